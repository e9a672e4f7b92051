//! Good and bad cones around m-planes, cone mass ratios, the separation
//! constant η_α, greedy Lipschitz-graph extraction and the per-atom
//! graph-rectifiability classifier.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{check_dim, dot, norm, sub, MPlane, Point};
use crate::measures::DiscreteMeasure;

/// Relative slack when deciding cone membership, so points exactly on the
/// cone boundary count as good.
pub const CONE_TOL: f64 = 1e-12;

/// Relative slack in the projection inequality of [`graph_extract`].
pub const GRAPH_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub apex: Point,
    pub plane: MPlane,
    pub alpha: f64,
    pub radius: Option<f64>,
}

impl ConeSpec {
    pub fn new(apex: Point, plane: MPlane, alpha: f64, radius: Option<f64>) -> Result<Self> {
        check_dim(plane.ambient_dim(), apex.dim())?;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid(format!("aperture must lie in (0, 1), got {alpha}")));
        }
        if let Some(r) = radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(invalid(format!("cone radius must be positive, got {r}")));
            }
        }
        Ok(ConeSpec { apex, plane, alpha, radius })
    }

    pub fn is_good(&self, y: &[f64]) -> bool {
        in_good_cone(&self.plane, &self.apex, y, self.alpha)
    }
}

/// y ∈ C_G(x, V, α), i.e. dist(y - x, V) <= α |y - x|; the apex is good.
pub fn in_good_cone(plane: &MPlane, apex: &[f64], y: &[f64], alpha: f64) -> bool {
    let w = sub(y, apex);
    let len = norm(&w);
    plane.perp_norm(&w) <= (alpha + CONE_TOL) * len
}

/// μ(C_B(x, r, V, α)) / μ(B(x, r)); without a radius the whole measure is
/// the denominator.
pub fn cone_mass_ratio(mu: &DiscreteMeasure, spec: &ConeSpec) -> Result<f64> {
    check_dim(mu.dim(), spec.apex.dim())?;
    let atoms: Vec<usize> = match spec.radius {
        Some(r) => mu.atoms_in_ball(&spec.apex, r),
        None => (0..mu.len()).collect(),
    };
    let total = mu.mass_of(&atoms);
    if !(total > 0.0) {
        return Err(Error::ZeroMass("cone ratio denominator"));
    }
    let bad: f64 = atoms.iter().filter(|&&a| !spec.is_good(mu.atom(a))).map(|&a| mu.weights()[a]).sum();
    Ok(bad / total)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaAlpha {
    pub alpha: f64,
    pub value: f64,
    /// False for α > 1/2, where t₂ = 1 - 2α turns negative.
    pub in_domain: bool,
}

/// η_α = sqrt(1 - (t₂t₁ + sqrt((1 - t₂²)(1 - t₁²)))), t₁ = 1 - α, t₂ = 1 - 2α.
pub fn eta_alpha(alpha: f64) -> Result<EtaAlpha> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("aperture must lie in (0, 1), got {alpha}")));
    }
    let t1 = 1.0 - alpha;
    let t2 = 1.0 - 2.0 * alpha;
    let inner = t2 * t1 + ((1.0 - t2 * t2) * (1.0 - t1 * t1)).sqrt();
    Ok(EtaAlpha { alpha, value: (1.0 - inner).max(0.0).sqrt(), in_domain: alpha <= 0.5 })
}

/// Largest η with B(y, η|x - y|) ⊂ C_B(x, V, α) for every y on the boundary
/// of C_B(x, V, (1 + α)/2): sin(arcsin((1 + α)/2) - arcsin α).
pub fn eta_alpha_exact(alpha: f64) -> f64 {
    (((1.0 + alpha) / 2.0).asin() - alpha.asin()).sin()
}

/// Distance from y to the closed good cone C_G(x, V, α), from the angle φ
/// between y - x and V: |w| sin(φ - φ₀) with φ₀ = arcsin α, capped at |w|.
pub fn distance_to_good_cone(plane: &MPlane, apex: &[f64], y: &[f64], alpha: f64) -> f64 {
    let w = sub(y, apex);
    let len = norm(&w);
    if len == 0.0 {
        return 0.0;
    }
    let phi = plane.perp_norm(&w).atan2(plane.parallel_norm(&w));
    let phi0 = alpha.asin();
    if phi <= phi0 {
        0.0
    } else if phi - phi0 >= std::f64::consts::FRAC_PI_2 {
        len
    } else {
        len * (phi - phi0).sin()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContainmentReport {
    pub alpha: f64,
    pub dim: usize,
    pub eta: f64,
    pub factor: f64,
    pub samples: usize,
    /// Samples where the shrunken ball leaves the bad cone by the exact
    /// distance test.
    pub distance_failures: usize,
    /// Samples where a probe point of the ball (the point nearest the good
    /// cone, or a random point of its sphere) is classified good.
    pub probe_failures: usize,
    /// Smallest (distance to the good cone) / (factor · η · |x - y|).
    pub worst_margin: f64,
}

impl ContainmentReport {
    pub fn holds(&self) -> bool {
        self.distance_failures == 0 && self.probe_failures == 0
    }
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Monte-Carlo check that B(y, factor·η·|x - y|) ⊂ C_B(x, V, α) for random
/// apexes x, lines V and points y on the boundary of C_B(x, V, (1 + α)/2).
pub fn eta_containment_check(
    alpha: f64,
    eta: f64,
    dim: usize,
    samples: usize,
    factor: f64,
    seed: u64,
) -> Result<ContainmentReport> {
    if dim < 2 {
        return Err(invalid("containment check needs dimension >= 2"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("aperture must lie in (0, 1), got {alpha}")));
    }
    let wide = alpha + (1.0 - alpha) / 2.0;
    let chunk = 1024;
    let chunks = samples.div_ceil(chunk);
    let results: Vec<(usize, usize, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (c as u64).wrapping_mul(0x9e3779b97f4a7c15));
            let mut df = 0;
            let mut pf = 0;
            let mut worst = f64::INFINITY;
            for _ in 0..chunk.min(samples - c * chunk) {
                let apex: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let v = random_unit(&mut rng, dim);
                let plane = MPlane::new(Point::origin(dim), vec![v.clone()]).expect("unit vector");
                let mut u = random_unit(&mut rng, dim);
                let c = dot(&u, &v);
                u.iter_mut().zip(&v).for_each(|(a, b)| *a -= c * b);
                let nu = norm(&u);
                u.iter_mut().for_each(|a| *a /= nu);
                let d = rng.gen_range(0.1..2.0);
                let (s, co) = (wide, (1.0 - wide * wide).sqrt());
                let y: Vec<f64> = (0..dim).map(|i| apex[i] + d * (co * v[i] + s * u[i])).collect();
                let rho = factor * eta * d;
                let margin = distance_to_good_cone(&plane, &apex, &y, alpha);
                worst = worst.min(margin / rho);
                if rho >= margin {
                    df += 1;
                }
                // Nearest good-cone point lies in span(v, u) at angle arcsin α.
                let phi0 = alpha.asin();
                let foot_dir: Vec<f64> = (0..dim).map(|i| phi0.cos() * v[i] + phi0.sin() * u[i]).collect();
                let w = sub(&y, &apex);
                let t = dot(&w, &foot_dir).max(0.0);
                let toward: Vec<f64> = (0..dim).map(|i| apex[i] + t * foot_dir[i] - y[i]).collect();
                let tn = norm(&toward);
                let r = random_unit(&mut rng, dim);
                let probes = [
                    (0..dim).map(|i| y[i] + rho * toward[i] / tn).collect::<Vec<f64>>(),
                    (0..dim).map(|i| y[i] + rho * r[i]).collect::<Vec<f64>>(),
                ];
                if probes.iter().any(|z| in_good_cone(&plane, &apex, z, alpha)) {
                    pf += 1;
                }
            }
            (df, pf, worst)
        })
        .collect();
    let (distance_failures, probe_failures, worst_margin) =
        results.into_iter().fold((0, 0, f64::INFINITY), |a, b| (a.0 + b.0, a.1 + b.1, a.2.min(b.2)));
    Ok(ContainmentReport { alpha, dim, eta, factor, samples, distance_failures, probe_failures, worst_margin })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphExtraction {
    /// Accepted point indices, ascending.
    pub accepted: Vec<usize>,
    /// (rejected point, first accepted point it conflicts with).
    pub rejected: Vec<(usize, usize)>,
    /// max |x - y| / |P_V x - P_V y| over accepted pairs (1 with fewer than two).
    pub lipschitz: f64,
    /// (1 - α²)^(-1/2).
    pub bound: f64,
    pub within_bound: bool,
}

/// Greedy in index order: a point is kept when |P_V x - P_V y| >=
/// (1 - α²)^(1/2) |x - y| against every point kept so far.
pub fn graph_extract<P: AsRef<[f64]>>(points: &[P], plane: &MPlane, alpha: f64) -> Result<GraphExtraction> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("aperture must lie in (0, 1), got {alpha}")));
    }
    for p in points {
        check_dim(plane.ambient_dim(), p.as_ref().len())?;
    }
    let floor = (1.0 - alpha * alpha).sqrt();
    let mut accepted: Vec<usize> = Vec::new();
    let mut rejected = Vec::new();
    let mut lipschitz: f64 = 1.0;
    for (i, p) in points.iter().enumerate() {
        let p = p.as_ref();
        let mut worst: f64 = 1.0;
        let conflict = accepted.iter().copied().find(|&j| {
            let w = sub(p, points[j].as_ref());
            let len = norm(&w);
            let par = plane.parallel_norm(&w);
            if par < floor * len * (1.0 - GRAPH_TOL) {
                return true;
            }
            if par > 0.0 {
                worst = worst.max(len / par);
            }
            false
        });
        match conflict {
            Some(j) => rejected.push((i, j)),
            None => {
                accepted.push(i);
                lipschitz = lipschitz.max(worst);
            }
        }
    }
    let bound = 1.0 / floor;
    Ok(GraphExtraction { accepted, rejected, lipschitz, bound, within_bound: lipschitz <= bound * (1.0 + GRAPH_TOL) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeLabel {
    pub atom: usize,
    pub positive: bool,
    /// Witness plane index into the grid.
    pub plane: Option<usize>,
    /// Smallest aperture that works with the witness plane.
    pub alpha: Option<f64>,
    /// min over (V, α) of the largest ratio over the fine radii.
    pub min_ratio: f64,
}

/// The lines through the origin of the first coordinate plane at angles
/// iπ/count, i = 0..count.
pub fn direction_grid(dim: usize, count: usize) -> Result<Vec<MPlane>> {
    if dim < 2 || count == 0 {
        return Err(invalid("direction grid needs dim >= 2 and count >= 1"));
    }
    (0..count)
        .map(|i| {
            let t = std::f64::consts::PI * i as f64 / count as f64;
            let mut v = vec![0.0; dim];
            v[0] = t.cos();
            v[1] = t.sin();
            MPlane::new(Point::origin(dim), vec![v])
        })
        .collect()
}

/// The m-plane of the top principal directions of the atoms in B(x, r).
pub fn local_plane(mu: &DiscreteMeasure, x: &[f64], r: f64, m: usize) -> Result<MPlane> {
    let d = mu.dim();
    if m == 0 || m >= d {
        return Err(invalid(format!("plane dimension must lie in 1..{d}")));
    }
    let atoms = mu.atoms_in_ball(x, r);
    let mass = mu.mass_of(&atoms);
    if !(mass > 0.0) {
        return Err(Error::ZeroMass("local plane window"));
    }
    let mut mean = vec![0.0; d];
    for &a in &atoms {
        let w = mu.weights()[a] / mass;
        mean.iter_mut().zip(mu.atom(a).iter()).for_each(|(m, c)| *m += w * c);
    }
    let mut cov = nalgebra::DMatrix::<f64>::zeros(d, d);
    for &a in &atoms {
        let c = sub(mu.atom(a), &mean);
        let w = mu.weights()[a];
        for i in 0..d {
            for j in 0..d {
                cov[(i, j)] += w * c[i] * c[j];
            }
        }
    }
    let eig = nalgebra::SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let spanning = order[..m].iter().map(|&i| eig.eigenvectors.column(i).iter().copied().collect()).collect();
    MPlane::new(Point::origin(d), spanning)
}

/// `count` radii r_max, r_max·factor, r_max·factor², ...
pub fn geometric_radii(r_max: f64, factor: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| r_max * factor.powi(i as i32)).collect()
}

pub fn default_alpha_grid() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

/// Labels each atom positive when some (V, α) of the grids keeps the cone
/// mass ratio below `ratio_threshold` at every radius in the finest half of
/// `r_grid`. The witness is the smallest such α (lowest plane index on ties).
pub fn classify_graph_rectifiable(
    mu: &DiscreteMeasure,
    atoms: &[usize],
    planes: &[MPlane],
    alphas: &[f64],
    r_grid: &[f64],
    ratio_threshold: f64,
) -> Result<Vec<ConeLabel>> {
    if planes.is_empty() || alphas.is_empty() || r_grid.is_empty() {
        return Err(invalid("cone classification needs nonempty plane, aperture and radius grids"));
    }
    for p in planes {
        check_dim(mu.dim(), p.ambient_dim())?;
    }
    if let Some(&a) = alphas.iter().find(|&&a| !(a > 0.0 && a < 1.0)) {
        return Err(invalid(format!("aperture must lie in (0, 1), got {a}")));
    }
    if r_grid.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(invalid("radii must be positive"));
    }
    if let Some(&bad) = atoms.iter().find(|&&a| a >= mu.len()) {
        return Err(invalid(format!("atom {bad} out of range")));
    }
    let mut radii = r_grid.to_vec();
    radii.sort_by(|a, b| b.total_cmp(a));
    let fine: Vec<f64> = radii[radii.len() / 2..].to_vec();
    let mut alpha_order: Vec<f64> = alphas.to_vec();
    alpha_order.sort_by(f64::total_cmp);
    let outer = fine[0];
    Ok(atoms
        .par_iter()
        .map(|&atom| {
            let x = mu.atom(atom).coords();
            let near = mu.atoms_in_ball(x, outer);
            let dists: Vec<f64> = near.iter().map(|&a| crate::geometry::dist(x, mu.atom(a))).collect();
            let mut best: Option<(usize, f64)> = None;
            let mut min_ratio = f64::INFINITY;
            for (pi, plane) in planes.iter().enumerate() {
                let sines: Vec<f64> = near
                    .iter()
                    .zip(&dists)
                    .map(|(&a, &len)| if len > 0.0 { plane.perp_norm(&sub(mu.atom(a), x)) / len } else { 0.0 })
                    .collect();
                for &alpha in &alpha_order {
                    let mut worst: f64 = 0.0;
                    for &r in &fine {
                        let (mut tot, mut bad) = (0.0, 0.0);
                        for (i, &a) in near.iter().enumerate() {
                            if dists[i] <= r + crate::geometry::BALL_TOL {
                                let w = mu.weights()[a];
                                tot += w;
                                if sines[i] > alpha + CONE_TOL {
                                    bad += w;
                                }
                            }
                        }
                        worst = worst.max(if tot > 0.0 { bad / tot } else { 0.0 });
                    }
                    min_ratio = min_ratio.min(worst);
                    if worst < ratio_threshold {
                        if best.map_or(true, |(_, a)| alpha < a) {
                            best = Some((pi, alpha));
                        }
                        break;
                    }
                }
            }
            ConeLabel { atom, positive: best.is_some(), plane: best.map(|b| b.0), alpha: best.map(|b| b.1), min_ratio }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{generate, MeasureSpec};

    #[test]
    fn eta_closed_form() {
        let e = eta_alpha(0.5).unwrap();
        assert!((e.value - (1.0 - 3f64.sqrt() / 2.0).sqrt()).abs() < 1e-15);
        assert!((e.value - 0.36603).abs() < 1e-4);
        assert!(e.in_domain);
        assert!(!eta_alpha(0.7).unwrap().in_domain);
        assert!(eta_alpha(1e-9).unwrap().value < 1e-3);
        assert!(eta_alpha(0.0).is_err());
        let mut prev = 0.0;
        for i in 1..=50 {
            let v = eta_alpha(i as f64 / 100.0).unwrap().value;
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn exact_eta_is_attained() {
        let r = eta_containment_check(0.3, eta_alpha_exact(0.3), 3, 2000, 0.99, 1).unwrap();
        assert!(r.holds(), "{r:?}");
        let r = eta_containment_check(0.3, eta_alpha_exact(0.3), 3, 2000, 1.02, 1).unwrap();
        assert_eq!(r.distance_failures, 2000);
    }

    #[test]
    fn line_measure_has_no_bad_mass() {
        let mu = generate(&MeasureSpec::default_for("segment").unwrap(), 101, 0).unwrap();
        let plane = MPlane::coordinate(2, 1).unwrap();
        for alpha in [0.01, 0.3, 0.9] {
            let spec = ConeSpec::new(mu.atom(50).clone(), plane.clone(), alpha, Some(0.2)).unwrap();
            assert_eq!(cone_mass_ratio(&mu, &spec).unwrap(), 0.0);
        }
        let single = DiscreteMeasure::uniform(vec![Point::new(vec![1.0, 1.0]).unwrap()]).unwrap();
        let spec = ConeSpec::new(single.atom(0).clone(), plane.clone(), 0.2, Some(1.0)).unwrap();
        assert_eq!(cone_mass_ratio(&single, &spec).unwrap(), 0.0);
        let far = ConeSpec::new(Point::new(vec![9.0, 9.0]).unwrap(), plane, 0.2, Some(1.0)).unwrap();
        assert!(cone_mass_ratio(&single, &far).is_err());
    }

    #[test]
    fn cantor_corner_has_bad_mass() {
        let mu = generate(&MeasureSpec::Cantor4 { depth: 6, dim: 2 }, 0, 0).unwrap();
        let corner = (0..mu.len())
            .min_by(|&a, &b| {
                let (pa, pb) = (mu.atom(a), mu.atom(b));
                (pa[0] + pa[1]).total_cmp(&(pb[0] + pb[1]))
            })
            .unwrap();
        let spec = ConeSpec::new(mu.atom(corner).clone(), MPlane::coordinate(2, 1).unwrap(), 0.5, Some(1.0)).unwrap();
        assert!(cone_mass_ratio(&mu, &spec).unwrap() > 0.2);
    }

    #[test]
    fn graph_extraction() {
        let pts: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 / 49.0, i as f64 / 98.0]).collect();
        let plane = MPlane::coordinate(2, 1).unwrap();
        let alpha = (0.5f64).atan().sin();
        let g = graph_extract(&pts, &plane, alpha).unwrap();
        assert_eq!(g.accepted.len(), 50);
        assert!(g.within_bound);
        assert!((g.bound - 1.25f64.sqrt()).abs() < 1e-12);

        let flat: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 0.0]).collect();
        let g = graph_extract(&flat, &plane, 0.1).unwrap();
        assert_eq!(g.lipschitz, 1.0);

        let stacked = vec![vec![0.0, 0.0], vec![0.0, 1.0]];
        let g = graph_extract(&stacked, &plane, 0.5).unwrap();
        assert_eq!(g.accepted, vec![0]);
        assert_eq!(g.rejected, vec![(1, 0)]);
    }

    #[test]
    fn ratio_monotone_in_alpha() {
        let mu = generate(&MeasureSpec::Cantor4 { depth: 4, dim: 2 }, 0, 0).unwrap();
        let plane = MPlane::coordinate(2, 1).unwrap();
        let mut prev = 1.0;
        for i in 1..20 {
            let spec = ConeSpec::new(mu.atom(7).clone(), plane.clone(), i as f64 / 20.0, Some(0.5)).unwrap();
            let r = cone_mass_ratio(&mu, &spec).unwrap();
            assert!(r <= prev);
            prev = r;
        }
    }
}
