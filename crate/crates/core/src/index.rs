//! Static k-d tree for closed-ball range queries and nearest-neighbour lookups
//! over a fixed point set of runtime dimension.

use crate::geometry::{dist2, BALL_TOL};

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct PointIndex {
    dim: usize,
    coords: Vec<f64>,
    perm: Vec<usize>,
    nodes: Vec<Node>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl PointIndex {
    pub fn new<P: AsRef<[f64]>>(points: &[P]) -> Self {
        let dim = points.first().map(|p| p.as_ref().len()).unwrap_or(0);
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            coords.extend_from_slice(p.as_ref());
        }
        let mut index = PointIndex {
            dim,
            coords,
            perm: (0..points.len()).collect(),
            nodes: Vec::new(),
            lo: Vec::new(),
            hi: Vec::new(),
        };
        if !points.is_empty() {
            index.build(0, points.len());
        }
        index
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { start, end });
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for &i in &self.perm[start..end] {
            let p = &self.coords[i * self.dim..(i + 1) * self.dim];
            for k in 0..self.dim {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let (axis, extent) =
            (0..self.dim).map(|k| (k, hi[k] - lo[k])).fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        self.lo.extend_from_slice(&lo);
        self.hi.extend_from_slice(&hi);
        if end - start <= LEAF_SIZE || extent <= 0.0 {
            return id;
        }
        let mid = start + (end - start) / 2;
        let (dim, coords) = (self.dim, &self.coords);
        self.perm[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            coords[a * dim + axis].total_cmp(&coords[b * dim + axis]).then(a.cmp(&b))
        });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split { left, right };
        id
    }

    fn box_dist2(&self, node: usize, q: &[f64]) -> f64 {
        let lo = &self.lo[node * self.dim..(node + 1) * self.dim];
        let hi = &self.hi[node * self.dim..(node + 1) * self.dim];
        q.iter()
            .zip(lo.iter().zip(hi))
            .map(|(x, (l, h))| {
                let d = if x < l {
                    l - x
                } else if x > h {
                    x - h
                } else {
                    0.0
                };
                d * d
            })
            .sum()
    }

    /// Indices of points in the closed ball B(q, r) (slack `BALL_TOL`), sorted
    /// ascending.
    pub fn within(&self, q: &[f64], r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if self.is_empty() {
            return out;
        }
        let reach = r + BALL_TOL;
        let reach2 = reach * reach * (1.0 + 1e-12);
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            if self.box_dist2(n, q) > reach2 {
                continue;
            }
            match self.nodes[n] {
                Node::Leaf { start, end } => {
                    for &i in &self.perm[start..end] {
                        if dist2(self.point(i), q).sqrt() <= reach {
                            out.push(i);
                        }
                    }
                }
                Node::Split { left, right } => {
                    stack.push(left);
                    stack.push(right);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Nearest point to `q`; among points within `BALL_TOL` of the minimum
    /// distance the lowest index wins.
    pub fn nearest(&self, q: &[f64]) -> Option<(usize, f64)> {
        if self.is_empty() {
            return None;
        }
        let mut best = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            if self.box_dist2(n, q) > best {
                continue;
            }
            match self.nodes[n] {
                Node::Leaf { start, end } => {
                    for &i in &self.perm[start..end] {
                        best = best.min(dist2(self.point(i), q));
                    }
                }
                Node::Split { left, right } => {
                    let (dl, dr) = (self.box_dist2(left, q), self.box_dist2(right, q));
                    if dl <= dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        let dmin = best.sqrt();
        let i = self.within(q, dmin)[0];
        Some((i, dist2(self.point(i), q).sqrt()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vec<f64>> = (0..500).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let index = PointIndex::new(&pts);
        for _ in 0..50 {
            let q: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let r = rng.gen_range(0.0..0.8);
            let brute: Vec<usize> = (0..pts.len()).filter(|&i| dist2(&pts[i], &q).sqrt() <= r + BALL_TOL).collect();
            assert_eq!(index.within(&q, r), brute);
            let (nn, d) = index.nearest(&q).unwrap();
            let dmin = pts.iter().map(|p| dist2(p, &q).sqrt()).fold(f64::INFINITY, f64::min);
            assert_eq!(d, dmin);
            assert_eq!(dist2(&pts[nn], &q).sqrt(), dmin);
        }
    }

    #[test]
    fn duplicates_and_ties() {
        let pts = vec![vec![1.0, 0.0]; 40];
        let index = PointIndex::new(&pts);
        assert_eq!(index.within(&[1.0, 0.0], 0.0).len(), 40);
        assert_eq!(index.nearest(&[0.0, 0.0]).unwrap().0, 0);
        let pts = vec![vec![1.0], vec![-1.0]];
        assert_eq!(PointIndex::new(&pts).nearest(&[0.0]).unwrap().0, 0);
    }
}
