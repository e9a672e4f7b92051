//! Points, balls, lines and m-planes in R^d, plus the distance and ordering
//! primitives the rest of the crate is built on.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Absolute slack used for closed-ball membership and separation tests.
pub const BALL_TOL: f64 = 1e-12;

/// A point of R^d.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Empty("point has no coordinates"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("point coordinate"));
        }
        Ok(Point(coords))
    }

    /// Builds a point without validation. Callers guarantee finiteness.
    pub(crate) fn from_vec(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn origin(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dist(&self, other: &Point) -> f64 {
        dist(&self.0, &other.0)
    }
}

impl Deref for Point {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for Point {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

/// Flips `v` so that its first non-negligible coordinate is positive.
pub fn canonical_sign(v: &mut [f64]) {
    let scale = norm(v).max(f64::MIN_POSITIVE);
    if let Some(first) = v.iter().find(|c| c.abs() > 1e-12 * scale) {
        if *first < 0.0 {
            v.iter_mut().for_each(|c| *c = -*c);
        }
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        Err(Error::DimensionMismatch { expected, found })
    } else {
        Ok(())
    }
}

/// Closed ball B(center, radius).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(invalid(format!("ball radius must be finite and >= 0, got {radius}")));
        }
        Ok(Ball { center, radius })
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        dist(&self.center, p) <= self.radius + BALL_TOL
    }

    pub fn diam(&self) -> f64 {
        2.0 * self.radius
    }

    pub fn dilate(&self, factor: f64) -> Ball {
        Ball { center: self.center.clone(), radius: self.radius * factor }
    }
}

/// An affine line through `anchor` with unit `direction`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub anchor: Point,
    pub direction: Vec<f64>,
}

impl Line {
    /// Normalizes `direction`; rejects zero directions and mismatched dimensions.
    pub fn new(anchor: Point, direction: Vec<f64>) -> Result<Self> {
        check_dim(anchor.dim(), direction.len())?;
        let n = norm(&direction);
        if !(n.is_finite() && n > 0.0) {
            return Err(invalid("line direction must be non-zero"));
        }
        let direction = direction.into_iter().map(|c| c / n).collect();
        Ok(Line { anchor, direction })
    }

    /// Signed coordinate of the projection of `p` along the line.
    pub fn project(&self, p: &[f64]) -> f64 {
        self.anchor.iter().zip(p).zip(&self.direction).map(|((a, x), u)| (x - a) * u).sum()
    }

    pub fn dist(&self, p: &[f64]) -> f64 {
        let t = self.project(p);
        self.anchor
            .iter()
            .zip(p)
            .zip(&self.direction)
            .map(|((a, x), u)| {
                let r = x - a - t * u;
                r * r
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Distance from `p` to `line`.
pub fn dist_point_line(p: &Point, line: &Line) -> Result<f64> {
    check_dim(line.anchor.dim(), p.dim())?;
    Ok(line.dist(p))
}

/// An affine m-plane given by a basepoint and an orthonormal basis of its
/// direction space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MPlane {
    pub basepoint: Point,
    pub basis: Vec<Vec<f64>>,
}

impl MPlane {
    /// Orthonormalizes `spanning` by Gram-Schmidt. Fails when the vectors are
    /// linearly dependent.
    pub fn new(basepoint: Point, spanning: Vec<Vec<f64>>) -> Result<Self> {
        let d = basepoint.dim();
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(spanning.len());
        for v in spanning {
            check_dim(d, v.len())?;
            let scale = norm(&v);
            let mut w = v;
            for b in &basis {
                let c = dot(&w, b);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
            let n = norm(&w);
            if !(n > 1e-10 * scale.max(f64::MIN_POSITIVE)) || !n.is_finite() {
                return Err(invalid("plane spanning vectors are linearly dependent"));
            }
            basis.push(w.into_iter().map(|x| x / n).collect());
        }
        if basis.is_empty() || basis.len() > d {
            return Err(invalid(format!("plane dimension must be in 1..={d}")));
        }
        Ok(MPlane { basepoint, basis })
    }

    /// The linear m-plane spanned by the first `m` coordinate axes.
    pub fn coordinate(dim: usize, m: usize) -> Result<Self> {
        MPlane::coordinate_axes(dim, &(0..m).collect::<Vec<_>>())
    }

    /// The linear plane spanned by the given coordinate axes.
    pub fn coordinate_axes(dim: usize, axes: &[usize]) -> Result<Self> {
        if let Some(&a) = axes.iter().find(|&&a| a >= dim) {
            return Err(invalid(format!("axis {a} out of range for dimension {dim}")));
        }
        let spanning = axes
            .iter()
            .map(|&i| {
                let mut e = vec![0.0; dim];
                e[i] = 1.0;
                e
            })
            .collect();
        MPlane::new(Point::origin(dim), spanning)
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basepoint.dim()
    }

    /// Orthogonal projection of the vector `w` onto the direction space.
    pub fn project_vector(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; w.len()];
        for b in &self.basis {
            let c = dot(w, b);
            out.iter_mut().zip(b).for_each(|(o, x)| *o += c * x);
        }
        out
    }

    /// Norm of the projection of `w` onto the direction space.
    pub fn parallel_norm(&self, w: &[f64]) -> f64 {
        self.basis.iter().map(|b| dot(w, b).powi(2)).sum::<f64>().sqrt()
    }

    /// Distance from the vector `w` to the direction space.
    pub fn perp_norm(&self, w: &[f64]) -> f64 {
        let total = dot(w, w);
        let par: f64 = self.basis.iter().map(|b| dot(w, b).powi(2)).sum();
        (total - par).max(0.0).sqrt()
    }
}

/// dist(p - x, V): distance from the displacement `p - x` to the direction
/// space of `plane`.
pub fn dist_point_plane(p: &Point, plane: &MPlane, x: &Point) -> Result<f64> {
    check_dim(plane.ambient_dim(), p.dim())?;
    check_dim(plane.ambient_dim(), x.dim())?;
    Ok(plane.perp_norm(&sub(p, x)))
}

/// Indices of `points` sorted by their projection onto `line`, ties broken by
/// index.
pub fn order_by_projection<P: AsRef<[f64]>>(points: &[P], line: &Line) -> Vec<usize> {
    let keys: Vec<f64> = points.iter().map(|p| line.project(p.as_ref())).collect();
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(a.cmp(&b)));
    idx
}

/// Hausdorff distance between two finite point sets.
pub fn hausdorff_distance<P: AsRef<[f64]>, Q: AsRef<[f64]>>(a: &[P], b: &[Q]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("hausdorff distance of an empty set"));
    }
    let one_sided =
        |x: &[f64], ys: &mut dyn Iterator<Item = &[f64]>| ys.map(|y| dist2(x, y)).fold(f64::INFINITY, f64::min);
    let ab = a.iter().map(|p| one_sided(p.as_ref(), &mut b.iter().map(|q| q.as_ref()))).fold(0.0, f64::max);
    let ba = b.iter().map(|q| one_sided(q.as_ref(), &mut a.iter().map(|p| p.as_ref()))).fold(0.0, f64::max);
    Ok(ab.max(ba).sqrt())
}

/// Distance from `p` to the segment [a, b].
pub fn dist_point_segment(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(&ab, &ab);
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = (dot(&sub(p, a), &ab) / len2).clamp(0.0, 1.0);
    p.iter().zip(a).zip(&ab).map(|((x, y), u)| (x - y - t * u).powi(2)).sum::<f64>().sqrt()
}

/// Distance between the segments [p1, q1] and [p2, q2].
pub fn dist_segment_segment(p1: &[f64], q1: &[f64], p2: &[f64], q2: &[f64]) -> f64 {
    let d1 = sub(q1, p1);
    let d2 = sub(q2, p2);
    let r = sub(p1, p2);
    let a = dot(&d1, &d1);
    let e = dot(&d2, &d2);
    let f = dot(&d2, &r);
    let (s, t);
    if a <= f64::EPSILON && e <= f64::EPSILON {
        return dist(p1, p2);
    }
    if a <= f64::EPSILON {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = dot(&d1, &r);
        if e <= f64::EPSILON {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = dot(&d1, &d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 0.0 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    (0..p1.len()).map(|i| (p1[i] + s * d1[i] - p2[i] - t * d2[i]).powi(2)).sum::<f64>().sqrt()
}

/// Length of the part of segment [a, b] inside the closed ball B(c, r).
pub fn segment_length_in_ball(a: &[f64], b: &[f64], c: &[f64], r: f64) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(&ab, &ab);
    if len2 == 0.0 {
        return 0.0;
    }
    let ac = sub(a, c);
    // |a + t ab - c|^2 = r^2  =>  len2 t^2 + 2 (ac . ab) t + |ac|^2 - r^2 = 0
    let bq = dot(&ac, &ab);
    let cq = dot(&ac, &ac) - r * r;
    let disc = bq * bq - len2 * cq;
    if disc <= 0.0 {
        return 0.0;
    }
    let sq = disc.sqrt();
    let t0 = ((-bq - sq) / len2).max(0.0);
    let t1 = ((-bq + sq) / len2).min(1.0);
    (t1 - t0).max(0.0) * len2.sqrt()
}

/// Maximum pairwise distance of a point set.
pub fn diameter<P: AsRef<[f64]> + Sync>(points: &[P]) -> f64 {
    use rayon::prelude::*;
    (0..points.len())
        .into_par_iter()
        .map(|i| {
            let p = points[i].as_ref();
            points[i + 1..].iter().map(|q| dist2(p, q.as_ref())).fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    #[test]
    fn point_line_distance() {
        let line = Line::new(pt(&[0.0, 0.0]), vec![1.0, 0.0]).unwrap();
        assert_eq!(dist_point_line(&pt(&[3.0, 4.0]), &line).unwrap(), 4.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Line::new(pt(&[0.0, 0.0]), vec![0.0, 0.0]).is_err());
        assert!(Point::new(vec![f64::NAN]).is_err());
        let line = Line::new(pt(&[0.0, 0.0]), vec![1.0, 0.0]).unwrap();
        assert!(matches!(dist_point_line(&pt(&[1.0, 2.0, 3.0]), &line), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn ordering_along_diagonal() {
        let pts = vec![pt(&[2.0, 2.0]), pt(&[0.0, 0.0]), pt(&[1.0, 1.0])];
        let line = Line::new(pt(&[0.0, 0.0]), vec![1.0, 1.0]).unwrap();
        assert_eq!(order_by_projection(&pts, &line), vec![1, 2, 0]);
    }

    #[test]
    fn plane_distance() {
        let v = MPlane::coordinate(3, 2).unwrap();
        let d = dist_point_plane(&pt(&[1.0, 2.0, 3.0]), &v, &pt(&[0.0, 0.0, 1.0])).unwrap();
        assert!((d - 2.0).abs() < 1e-15);
        assert!(MPlane::new(pt(&[0.0, 0.0]), vec![vec![1.0, 1.0], vec![2.0, 2.0]]).is_err());
    }

    #[test]
    fn segment_distances() {
        let d = dist_segment_segment(&[0.0, 0.0], &[1.0, 0.0], &[0.5, 1.0], &[0.5, 2.0]);
        assert!((d - 1.0).abs() < 1e-15);
        let d = dist_segment_segment(&[0.0, 0.0], &[1.0, 0.0], &[2.0, 0.0], &[3.0, 0.0]);
        assert!((d - 1.0).abs() < 1e-15);
        assert!((dist_point_segment(&[0.5, 1.0], &[0.0, 0.0], &[1.0, 0.0]) - 1.0).abs() < 1e-15);
        let l = segment_length_in_ball(&[-2.0, 0.0], &[2.0, 0.0], &[0.0, 0.0], 1.0);
        assert!((l - 2.0).abs() < 1e-12);
    }

    #[test]
    fn hausdorff_of_shifted_sets() {
        let a = vec![pt(&[0.0]), pt(&[1.0])];
        let b = vec![pt(&[0.0]), pt(&[1.0]), pt(&[3.0])];
        assert_eq!(hausdorff_distance(&a, &b).unwrap(), 2.0);
    }
}
