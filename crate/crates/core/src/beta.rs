//! L² and sup beta numbers of a measure or point set in a ball, with the
//! closed-form best-fit line (weighted centroid plus top principal axis).

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{canonical_sign, check_dim, dot, norm, Ball, Line, Point};
use crate::measures::DiscreteMeasure;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaResult {
    pub value: f64,
    /// Minimizing line; `None` when the window carries no mass or no points.
    pub line: Option<Line>,
    pub window_diam: f64,
    pub window_mass: f64,
}

/// Weighted centroid of the given points.
fn centroid(points: &[&[f64]], weights: &[f64]) -> Vec<f64> {
    let d = points[0].len();
    let total: f64 = weights.iter().sum();
    let mut c = vec![0.0; d];
    for (p, w) in points.iter().zip(weights) {
        c.iter_mut().zip(p.iter()).for_each(|(ci, x)| *ci += w * x);
    }
    c.iter_mut().for_each(|ci| *ci /= total);
    c
}

/// Top principal direction of the weighted second-moment matrix about `c`.
/// A zero matrix yields e₁; a repeated top eigenvalue yields the
/// lexicographically largest unit vector of its eigenspace.
fn principal_direction(points: &[&[f64]], weights: &[f64], c: &[f64]) -> Vec<f64> {
    let d = c.len();
    let mut m = DMatrix::<f64>::zeros(d, d);
    for (p, &w) in points.iter().zip(weights) {
        for a in 0..d {
            let da = p[a] - c[a];
            for b in a..d {
                m[(a, b)] += w * da * (p[b] - c[b]);
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            m[(a, b)] = m[(b, a)];
        }
    }
    let mut e1 = vec![0.0; d];
    e1[0] = 1.0;
    let scale = m.diagonal().iter().sum::<f64>();
    if !(scale > 0.0) {
        return e1;
    }
    let eig = SymmetricEigen::new(m);
    let top = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<Vec<f64>> = (0..d)
        .filter(|&i| eig.eigenvalues[i] >= top - 1e-10 * scale)
        .map(|i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    if tied.len() == 1 {
        let mut v = tied.into_iter().next().expect("one eigenvector");
        canonical_sign(&mut v);
        return v;
    }
    for i in 0..d {
        let mut u = vec![0.0; d];
        for b in &tied {
            let c = b[i];
            u.iter_mut().zip(b).for_each(|(x, y)| *x += c * y);
        }
        let n = norm(&u);
        if n > 1e-8 {
            return u.into_iter().map(|x| x / n).collect();
        }
    }
    e1
}

/// Least-squares line through weighted points (weights must have positive sum).
pub fn fit_line_weighted(points: &[&[f64]], weights: &[f64]) -> Line {
    let c = centroid(points, weights);
    let u = principal_direction(points, weights, &c);
    Line { anchor: Point::from_vec(c), direction: u }
}

/// Unweighted least-squares line through a non-empty point set.
pub fn fit_line(points: &[&[f64]]) -> Line {
    fit_line_weighted(points, &vec![1.0; points.len()])
}

fn window_atoms(mu: &DiscreteMeasure, window: &Ball) -> Result<(Vec<usize>, f64)> {
    check_dim(mu.dim(), window.center.dim())?;
    let idx: Vec<usize> =
        mu.atoms_in_ball(&window.center, window.radius).into_iter().filter(|&i| mu.weights()[i] > 0.0).collect();
    let mass = mu.mass_of(&idx);
    Ok((idx, mass))
}

/// Weighted centroid z_E of μ restricted to the closed ball.
pub fn center_of_mass(mu: &DiscreteMeasure, window: &Ball) -> Result<Point> {
    let (idx, mass) = window_atoms(mu, window)?;
    if mass <= 0.0 {
        return Err(Error::ZeroMass("center of mass of an empty window"));
    }
    let pts: Vec<&[f64]> = idx.iter().map(|&i| mu.atom(i).coords()).collect();
    let w: Vec<f64> = idx.iter().map(|&i| mu.weights()[i]).collect();
    Ok(Point::from_vec(centroid(&pts, &w)))
}

/// The L²(μ|window) best-fit line.
pub fn best_fit_line(mu: &DiscreteMeasure, window: &Ball) -> Result<Line> {
    let (idx, mass) = window_atoms(mu, window)?;
    if mass <= 0.0 {
        return Err(Error::ZeroMass("best-fit line of an empty window"));
    }
    let pts: Vec<&[f64]> = idx.iter().map(|&i| mu.atom(i).coords()).collect();
    let w: Vec<f64> = idx.iter().map(|&i| mu.weights()[i]).collect();
    Ok(fit_line_weighted(&pts, &w))
}

/// β₂(μ, E, ℓ) for E the closed ball `region`, with diam E = 2 * radius.
pub fn beta2_with_line(mu: &DiscreteMeasure, region: &Ball, line: &Line) -> Result<f64> {
    check_dim(line.anchor.dim(), region.center.dim())?;
    let (idx, mass) = window_atoms(mu, region)?;
    if mass <= 0.0 || region.radius <= 0.0 {
        return Ok(0.0);
    }
    let ss: f64 = idx.iter().map(|&i| mu.weights()[i] * line.dist(mu.atom(i)).powi(2)).sum();
    Ok((ss / mass).sqrt() / region.diam())
}

/// β₂(μ, λ·window): the L² beta number of the dilated window with its
/// minimizing line.
pub fn beta2(mu: &DiscreteMeasure, window: &Ball, dilation: f64) -> Result<BetaResult> {
    if !(dilation > 0.0 && dilation.is_finite()) {
        return Err(invalid(format!("dilation must be positive, got {dilation}")));
    }
    let region = window.dilate(dilation);
    let (idx, mass) = window_atoms(mu, &region)?;
    let window_diam = region.diam();
    if mass <= 0.0 || window_diam <= 0.0 {
        return Ok(BetaResult { value: 0.0, line: None, window_diam, window_mass: mass });
    }
    let pts: Vec<&[f64]> = idx.iter().map(|&i| mu.atom(i).coords()).collect();
    let w: Vec<f64> = idx.iter().map(|&i| mu.weights()[i]).collect();
    let line = fit_line_weighted(&pts, &w);
    let ss: f64 = pts.iter().zip(&w).map(|(p, wi)| wi * line.dist(p).powi(2)).sum();
    let value = (ss / mass).sqrt() / window_diam;
    Ok(BetaResult { value, line: Some(line), window_diam, window_mass: mass })
}

fn points_in<'a>(points: &'a [Point], window: &Ball) -> Result<Vec<&'a [f64]>> {
    let mut out = Vec::new();
    for p in points {
        check_dim(window.center.dim(), p.dim())?;
        if window.contains(p) {
            out.push(p.coords());
        }
    }
    Ok(out)
}

/// Sup-distance beta number evaluated at the L² best-fit line of the points in
/// the window: an upper bound for the minimax value.
pub fn beta_sup(points: &[Point], window: &Ball) -> Result<BetaResult> {
    let inside = points_in(points, window)?;
    let window_diam = window.diam();
    if inside.is_empty() || window_diam <= 0.0 {
        return Ok(BetaResult { value: 0.0, line: None, window_diam, window_mass: 0.0 });
    }
    let line = fit_line(&inside);
    let sup = inside.iter().map(|p| line.dist(p)).fold(0.0, f64::max);
    Ok(BetaResult { value: sup / window_diam, line: Some(line), window_diam, window_mass: inside.len() as f64 })
}

/// Half-width of the projections of `points` on the normal at angle `theta`,
/// and the midpoint offset.
fn strip(points: &[&[f64]], theta: f64) -> (f64, f64) {
    let n = [-theta.sin(), theta.cos()];
    let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let s = n[0] * p[0] + n[1] * p[1];
        (lo.min(s), hi.max(s))
    });
    ((hi - lo) / 2.0, (hi + lo) / 2.0)
}

/// Exact minimax sup-beta in the plane: an angle grid of `grid` directions
/// followed by golden-section refinement around the best one.
pub fn beta_sup_minimax_2d(points: &[Point], window: &Ball, grid: usize) -> Result<BetaResult> {
    if window.center.dim() != 2 {
        return Err(invalid("minimax sup-beta is only available in the plane"));
    }
    let inside = points_in(points, window)?;
    let window_diam = window.diam();
    if inside.is_empty() || window_diam <= 0.0 {
        return Ok(BetaResult { value: 0.0, line: None, window_diam, window_mass: 0.0 });
    }
    let grid = grid.max(8);
    let step = std::f64::consts::PI / grid as f64;
    let best = (0..grid)
        .map(|i| i as f64 * step)
        .min_by(|&a, &b| strip(&inside, a).0.total_cmp(&strip(&inside, b).0))
        .expect("non-empty grid");
    let (mut a, mut b) = (best - step, best + step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if strip(&inside, c).0 <= strip(&inside, d).0 {
            b = d;
        } else {
            a = c;
        }
    }
    let theta = [best, (a + b) / 2.0]
        .into_iter()
        .min_by(|&x, &y| strip(&inside, x).0.total_cmp(&strip(&inside, y).0))
        .expect("two candidates");
    let (half, mid) = strip(&inside, theta);
    let n = [-theta.sin(), theta.cos()];
    let line =
        Line { anchor: Point::from_vec(vec![mid * n[0], mid * n[1]]), direction: vec![theta.cos(), theta.sin()] };
    Ok(BetaResult { value: half / window_diam, line: Some(line), window_diam, window_mass: inside.len() as f64 })
}

/// dist(z, ℓ) for the centre of mass of μ in `region`, used by the
/// centre-of-mass inequality dist(z_E, ℓ) <= β₂(μ, E, ℓ) diam E.
pub fn center_of_mass_gap(mu: &DiscreteMeasure, region: &Ball, line: &Line) -> Result<f64> {
    let z = center_of_mass(mu, region)?;
    Ok(line.dist(&z))
}

/// Unit vector check shared by callers that accept external lines.
pub fn is_unit(v: &[f64]) -> bool {
    (dot(v, v) - 1.0).abs() < 1e-9
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{generate, MeasureSpec};

    fn pt(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    #[test]
    fn collinear_atoms_have_zero_beta() {
        let mu = generate(&MeasureSpec::default_for("segment").unwrap(), 50, 0).unwrap();
        let w = Ball::new(pt(&[0.5, 0.0]), 0.3).unwrap();
        let b = beta2(&mu, &w, 2.0).unwrap();
        assert!(b.value.abs() < 1e-15);
        assert!(is_unit(&b.line.unwrap().direction));
    }

    #[test]
    fn unit_square_corners() {
        let mu =
            DiscreteMeasure::uniform(vec![pt(&[0.0, 0.0]), pt(&[1.0, 0.0]), pt(&[0.0, 1.0]), pt(&[1.0, 1.0])]).unwrap();
        let w = Ball::new(pt(&[0.5, 0.5]), 2f64.sqrt() / 2.0).unwrap();
        let b = beta2(&mu, &w, 2.0).unwrap();
        assert!((b.value - 1.0 / (4.0 * 2f64.sqrt())).abs() < 1e-12, "{}", b.value);
        assert_eq!(b.line.unwrap().direction, vec![1.0, 0.0]);
    }

    #[test]
    fn single_atom_is_degenerate() {
        let mu = DiscreteMeasure::uniform(vec![pt(&[0.3, 0.4])]).unwrap();
        let w = Ball::new(pt(&[0.0, 0.0]), 1.0).unwrap();
        let b = beta2(&mu, &w, 1.0).unwrap();
        assert_eq!(b.value, 0.0);
        assert_eq!(b.line.unwrap().direction, vec![1.0, 0.0]);
    }

    #[test]
    fn empty_window() {
        let mu = DiscreteMeasure::uniform(vec![pt(&[5.0, 5.0])]).unwrap();
        let w = Ball::new(pt(&[0.0, 0.0]), 1.0).unwrap();
        let b = beta2(&mu, &w, 2.0).unwrap();
        assert_eq!((b.value, b.line.is_none()), (0.0, true));
        assert!(center_of_mass(&mu, &w).is_err());
        assert!(beta_sup(&[], &w).unwrap().value == 0.0);
    }

    #[test]
    fn sup_surrogate_bounds_minimax() {
        let h = 3f64.sqrt() / 2.0;
        let pts = vec![pt(&[0.0, 0.0]), pt(&[1.0, 0.0]), pt(&[0.5, h])];
        let w = Ball::new(pt(&[0.5, h / 3.0]), 1.0).unwrap();
        let s = beta_sup(&pts, &w).unwrap().value;
        let e = beta_sup_minimax_2d(&pts, &w, 3600).unwrap().value;
        // The minimax strip of an equilateral triangle has half-width h / 2.
        assert!((e - h / 4.0).abs() < 1e-9, "{e}");
        assert!(s >= e - 1e-12);
    }
}
