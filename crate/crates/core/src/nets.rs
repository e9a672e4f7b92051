//! Maximal separated nets and the multiresolution family of balls
//! B_k^j = B(x_k^j, λ₂ 2^-k) built on nested nets.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use ordered_float::OrderedFloat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{dist, Ball, BALL_TOL};
use crate::index::PointIndex;
use crate::measures::DiscreteMeasure;

/// Farthest-point traversal of `points` seeded at the lexicographically
/// smallest point. Returns the visiting order and the insertion radius of each
/// visited point (infinite for the seed); stops once the farthest remaining
/// point is closer than `min_delta`.
pub fn farthest_point_order<P: AsRef<[f64]>>(
    points: &[P],
    index: &PointIndex,
    min_delta: f64,
) -> (Vec<usize>, Vec<f64>) {
    if points.is_empty() {
        return (Vec::new(), Vec::new());
    }
    let seed = (0..points.len())
        .min_by(|&a, &b| {
            let (pa, pb) = (points[a].as_ref(), points[b].as_ref());
            pa.iter()
                .zip(pb)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        })
        .expect("non-empty");
    let sp = points[seed].as_ref();
    let mut mind: Vec<f64> = points.iter().map(|p| dist(p.as_ref(), sp)).collect();
    let mut heap: BinaryHeap<(OrderedFloat<f64>, Reverse<usize>)> =
        mind.iter().enumerate().map(|(i, &d)| (OrderedFloat(d), Reverse(i))).collect();
    let mut order = vec![seed];
    let mut radii = vec![f64::INFINITY];
    mind[seed] = 0.0;
    while let Some((OrderedFloat(key), Reverse(i))) = heap.pop() {
        if key != mind[i] || key == 0.0 {
            continue;
        }
        if key < min_delta - BALL_TOL {
            break;
        }
        order.push(i);
        radii.push(key);
        mind[i] = 0.0;
        let p = points[i].as_ref();
        for j in index.within(p, key) {
            let d = dist(points[j].as_ref(), p);
            if d < mind[j] {
                mind[j] = d;
                heap.push((OrderedFloat(d), Reverse(j)));
            }
        }
    }
    (order, radii)
}

/// Maximal δ-separated subset of `points` by farthest-point traversal, in
/// visiting order.
pub fn maximal_net<P: AsRef<[f64]>>(points: &[P], delta: f64) -> Result<Vec<usize>> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid(format!("net scale must be positive, got {delta}")));
    }
    let index = PointIndex::new(points);
    Ok(farthest_point_order(points, &index, delta).0)
}

/// One level of nested nets: atom indices of the ball centres at scale 2^-k.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetLevel {
    pub k: i32,
    pub indices: Vec<usize>,
}

/// Identifies B_k^j: level `k`, position `j` within that level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BallId {
    pub k: i32,
    pub j: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiresolutionFamily {
    pub k0: i32,
    pub lambda2: f64,
    #[serde(rename = "J")]
    pub j_param: u32,
    pub levels: Vec<NetLevel>,
}

/// Lower bound λ₂ must exceed for a given J.
pub fn lambda2_floor(j_param: u32) -> f64 {
    (1.0 - 0.5f64.powi(j_param as i32)).powi(-2)
}

/// Radius λ₂ 2^-k of the balls at level k.
pub fn level_radius(lambda2: f64, k: i32) -> f64 {
    lambda2 * 2f64.powi(-k)
}

impl MultiresolutionFamily {
    pub fn k_max(&self) -> i32 {
        self.k0 + self.levels.len() as i32 - 1
    }

    pub fn radius(&self, k: i32) -> f64 {
        level_radius(self.lambda2, k)
    }

    pub fn level(&self, k: i32) -> Option<&NetLevel> {
        if k < self.k0 {
            return None;
        }
        self.levels.get((k - self.k0) as usize)
    }

    pub fn center_atom(&self, id: BallId) -> usize {
        self.level(id.k).expect("level in range").indices[id.j]
    }

    pub fn ball(&self, mu: &DiscreteMeasure, id: BallId) -> Ball {
        Ball { center: mu.atom(self.center_atom(id)).clone(), radius: self.radius(id.k) }
    }

    pub fn ball_ids(&self) -> impl Iterator<Item = BallId> + '_ {
        self.levels.iter().flat_map(|l| (0..l.indices.len()).map(move |j| BallId { k: l.k, j }))
    }

    /// Checks level consistency against a measure.
    pub fn validate(&self, mu: &DiscreteMeasure) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::Empty("family has no levels"));
        }
        if !(self.lambda2 > lambda2_floor(self.j_param)) {
            return Err(invalid(format!(
                "lambda2 = {} must exceed (1 - 2^-J)^-2 = {}",
                self.lambda2,
                lambda2_floor(self.j_param)
            )));
        }
        for (i, l) in self.levels.iter().enumerate() {
            if l.k != self.k0 + i as i32 {
                return Err(Error::Mismatch(format!("level {i} has k = {}", l.k)));
            }
            if let Some(&bad) = l.indices.iter().find(|&&a| a >= mu.len()) {
                return Err(Error::Mismatch(format!("atom index {bad} out of range")));
            }
        }
        Ok(())
    }
}

/// Builds nested maximal 2^-k nets for k0 <= k <= k_max by one farthest-point
/// traversal; level k is the prefix whose insertion radii are at least 2^-k.
pub fn build_family(
    mu: &DiscreteMeasure,
    k0: i32,
    k_max: i32,
    lambda2: f64,
    j_param: u32,
) -> Result<MultiresolutionFamily> {
    if k_max < k0 {
        return Err(invalid(format!("k_max = {k_max} < k0 = {k0}")));
    }
    if j_param == 0 {
        return Err(invalid("J must be >= 1"));
    }
    if !(lambda2 > lambda2_floor(j_param)) {
        return Err(invalid(format!("lambda2 = {lambda2} must exceed (1 - 2^-J)^-2 = {}", lambda2_floor(j_param))));
    }
    let (order, radii) = farthest_point_order(mu.atoms(), mu.index(), 2f64.powi(-k_max));
    let levels = (k0..=k_max)
        .map(|k| {
            let scale = 2f64.powi(-k) - BALL_TOL;
            let len = radii.iter().take_while(|&&r| r >= scale).count();
            NetLevel { k, indices: order[..len].to_vec() }
        })
        .collect();
    Ok(MultiresolutionFamily { k0, lambda2, j_param, levels })
}

/// Smallest k with 2^-k >= diam / 2, the usual choice of k0.
pub fn recommended_k0(diam: f64) -> i32 {
    if diam <= 0.0 {
        return 0;
    }
    (-(diam / 2.0).log2()).floor() as i32
}

/// Spatial indices over the ball centres of each level.
#[derive(Clone, Debug)]
pub struct FamilyIndex {
    levels: Vec<PointIndex>,
    k0: i32,
}

impl FamilyIndex {
    pub fn new(mu: &DiscreteMeasure, fam: &MultiresolutionFamily) -> Self {
        let levels = fam
            .levels
            .par_iter()
            .map(|l| {
                let pts: Vec<&[f64]> = l.indices.iter().map(|&a| mu.atom(a).coords()).collect();
                PointIndex::new(&pts)
            })
            .collect();
        FamilyIndex { levels, k0: fam.k0 }
    }

    /// Positions j of level-k balls whose closed ball contains `x`.
    pub fn balls_containing(&self, fam: &MultiresolutionFamily, k: i32, x: &[f64]) -> Vec<usize> {
        match self.levels.get((k - self.k0) as usize) {
            Some(idx) if k >= self.k0 => idx.within(x, fam.radius(k)),
            _ => Vec::new(),
        }
    }

    /// Positions j of level-k balls with centre within `r` of `x`.
    pub fn centers_within(&self, k: i32, x: &[f64], r: f64) -> Vec<usize> {
        match self.levels.get((k - self.k0) as usize) {
            Some(idx) if k >= self.k0 => idx.within(x, r),
            _ => Vec::new(),
        }
    }
}

/// max over B in level k of #{B' in level j : μ(B ∩ B') > 0}.
pub fn overlap_counts(
    fam: &MultiresolutionFamily,
    mu: &DiscreteMeasure,
    index: &FamilyIndex,
    k: i32,
    j: i32,
) -> Result<usize> {
    let level = fam.level(k).ok_or_else(|| invalid(format!("level {k} not in family")))?;
    if fam.level(j).is_none() {
        return Err(invalid(format!("level {j} not in family")));
    }
    let rk = fam.radius(k);
    let counts: Vec<usize> = level
        .indices
        .par_iter()
        .map(|&c| {
            let mut hit = BTreeSet::new();
            for a in mu.atoms_in_ball(mu.atom(c), rk) {
                if mu.weights()[a] > 0.0 {
                    hit.extend(index.balls_containing(fam, j, mu.atom(a)));
                }
            }
            hit.len()
        })
        .collect();
    Ok(counts.into_iter().max().unwrap_or(0))
}

/// The finite-overlap bound D^(j - k + offset + log2 λ₂).
pub fn overlap_bound(doubling: f64, lambda2: f64, k: i32, j: i32, offset: f64) -> f64 {
    doubling.powf((j - k) as f64 + offset + lambda2.log2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::measures::{generate, MeasureSpec};

    #[test]
    fn three_point_net() {
        let pts = vec![vec![0.0], vec![0.3], vec![1.0]];
        assert_eq!(maximal_net(&pts, 0.5).unwrap(), vec![0, 2]);
    }

    #[test]
    fn collinear_net_is_separated_and_maximal() {
        let pts: Vec<Vec<f64>> = (0..=10).map(|i| vec![i as f64 / 10.0]).collect();
        let net = maximal_net(&pts, 0.25).unwrap();
        for (a, &i) in net.iter().enumerate() {
            for &j in &net[a + 1..] {
                assert!(dist(&pts[i], &pts[j]) >= 0.25 - 1e-12);
            }
        }
        for p in &pts {
            assert!(net.iter().any(|&i| dist(&pts[i], p) < 0.25));
        }
        assert!(maximal_net(&pts, 0.0).is_err());
    }

    #[test]
    fn lambda2_threshold() {
        let mu = DiscreteMeasure::uniform(vec![Point::new(vec![0.0, 0.0]).unwrap()]).unwrap();
        assert!(build_family(&mu, 0, 3, 1.0, 10).is_err());
        assert!(build_family(&mu, 0, 3, 1.1, 10).is_ok());
        assert!(build_family(&mu, 3, 2, 1.1, 10).is_err());
    }

    #[test]
    fn family_levels_nested() {
        let mu = generate(&MeasureSpec::default_for("segment").unwrap(), 300, 0).unwrap();
        let fam = build_family(&mu, 0, 8, 1.1, 10).unwrap();
        for w in fam.levels.windows(2) {
            assert_eq!(&w[1].indices[..w[0].indices.len()], &w[0].indices[..]);
        }
        assert_eq!(fam.levels[0].indices, vec![0, 299]);
    }

    #[test]
    fn overlap_counts_on_segment() {
        let mu = generate(&MeasureSpec::default_for("segment").unwrap(), 200, 0).unwrap();
        let fam = build_family(&mu, 0, 6, 1.1, 10).unwrap();
        let index = FamilyIndex::new(&mu, &fam);
        let c = overlap_counts(&fam, &mu, &index, 3, 3).unwrap();
        assert!((3..=6).contains(&c), "{c}");
    }
}
