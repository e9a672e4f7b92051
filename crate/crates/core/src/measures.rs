//! Finitely supported measures, their ball masses and doubling profiles, and
//! the synthetic generators used as fixtures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{check_dim, dist, Point};
use crate::index::PointIndex;

/// A weighted cloud of atoms in R^d.
#[derive(Clone, Debug)]
pub struct DiscreteMeasure {
    dim: usize,
    atoms: Vec<Point>,
    weights: Vec<f64>,
    index: PointIndex,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        let first = atoms.first().ok_or(Error::Empty("measure has no atoms"))?;
        let dim = first.dim();
        if weights.len() != atoms.len() {
            return Err(Error::Mismatch(format!("{} atoms but {} weights", atoms.len(), weights.len())));
        }
        for a in &atoms {
            check_dim(dim, a.dim())?;
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("weight"));
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(invalid("weights must be non-negative"));
        }
        let index = PointIndex::new(&atoms);
        Ok(DiscreteMeasure { dim, atoms, weights, index })
    }

    /// Equal weights summing to one.
    pub fn uniform(atoms: Vec<Point>) -> Result<Self> {
        let n = atoms.len().max(1) as f64;
        let weights = vec![1.0 / n; atoms.len()];
        DiscreteMeasure::new(atoms, weights)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Point] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn atom(&self, i: usize) -> &Point {
        &self.atoms[i]
    }

    pub fn index(&self) -> &PointIndex {
        &self.index
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Indices of atoms in the closed ball B(center, r), ascending.
    pub fn atoms_in_ball(&self, center: &[f64], r: f64) -> Vec<usize> {
        self.index.within(center, r)
    }

    /// μ(B(center, r)) for the closed ball.
    pub fn ball_mass(&self, center: &[f64], r: f64) -> Result<f64> {
        check_dim(self.dim, center.len())?;
        if !(r.is_finite() && r >= 0.0) {
            return Err(invalid(format!("radius must be finite and >= 0, got {r}")));
        }
        Ok(self.mass_of(&self.atoms_in_ball(center, r)))
    }

    pub fn mass_of(&self, idx: &[usize]) -> f64 {
        idx.iter().map(|&i| self.weights[i]).sum()
    }

    /// μ(B(x, r)) / r.
    pub fn lower_density(&self, x: &[f64], r: f64) -> Result<f64> {
        if r <= 0.0 {
            return Err(invalid("lower density needs r > 0"));
        }
        Ok(self.ball_mass(x, r)? / r)
    }

    /// Smallest distance between two atoms at distinct locations.
    pub fn min_atom_gap(&self) -> Option<f64> {
        let gap = (0..self.atoms.len())
            .into_par_iter()
            .map(|i| {
                let a = &self.atoms[i];
                let mut r = 1e-9;
                loop {
                    let near = self.index.within(a, r);
                    let d = near
                        .iter()
                        .map(|&j| dist(a, &self.atoms[j]))
                        .filter(|&d| d > 0.0)
                        .fold(f64::INFINITY, f64::min);
                    if d.is_finite() {
                        return d;
                    }
                    if near.len() == self.atoms.len() || r > 1e300 {
                        return f64::INFINITY;
                    }
                    r *= 4.0;
                }
            })
            .reduce(|| f64::INFINITY, f64::min);
        gap.is_finite().then_some(gap)
    }

    pub fn diameter(&self) -> f64 {
        crate::geometry::diameter(&self.atoms)
    }

    /// Applies `f` to every atom, keeping the weights.
    pub fn map_atoms(&self, f: impl Fn(&Point) -> Point) -> Result<Self> {
        DiscreteMeasure::new(self.atoms.iter().map(f).collect(), self.weights.clone())
    }

    pub fn translated(&self, offset: &[f64]) -> Result<Self> {
        check_dim(self.dim, offset.len())?;
        self.map_atoms(|p| Point::from_vec(p.iter().zip(offset).map(|(x, o)| x + o).collect()))
    }

    pub fn with_scaled_weights(&self, factor: f64) -> Result<Self> {
        DiscreteMeasure::new(self.atoms.clone(), self.weights.iter().map(|w| w * factor).collect())
    }

    /// Sum of measures with the same ambient dimension; atom order is the
    /// concatenation order.
    pub fn sum(parts: &[&DiscreteMeasure]) -> Result<Self> {
        let dim = parts.first().ok_or(Error::Empty("no measures to add"))?.dim;
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        for m in parts {
            check_dim(dim, m.dim)?;
            atoms.extend(m.atoms.iter().cloned());
            weights.extend_from_slice(&m.weights);
        }
        DiscreteMeasure::new(atoms, weights)
    }
}

/// Ratios μ(B(x, 2r)) / μ(B(x, r)) over a geometric radius grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DoublingProfile {
    pub radii: Vec<f64>,
    pub ratios: Vec<f64>,
    pub sup_ratio: f64,
}

pub fn doubling_profile(
    mu: &DiscreteMeasure,
    x: &[f64],
    r_min: f64,
    r_max: f64,
    steps: usize,
) -> Result<DoublingProfile> {
    check_dim(mu.dim(), x.len())?;
    if !(r_min > 0.0 && r_max >= r_min && r_max.is_finite()) || steps == 0 {
        return Err(invalid("doubling profile needs 0 < r_min <= r_max and steps >= 1"));
    }
    if mu.ball_mass(x, r_min)? == 0.0 {
        return Err(Error::ZeroMass("μ(B(x, r_min)) = 0"));
    }
    let radii: Vec<f64> = (0..steps)
        .map(|i| if steps == 1 { r_min } else { r_min * (r_max / r_min).powf(i as f64 / (steps - 1) as f64) })
        .collect();
    let ratios: Vec<f64> =
        radii.iter().map(|&r| Ok(mu.ball_mass(x, 2.0 * r)? / mu.ball_mass(x, r)?)).collect::<Result<_>>()?;
    let sup_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(DoublingProfile { radii, ratios, sup_ratio })
}

/// Largest doubling ratio over all atoms and the geometric grid
/// `r_min..=r_max` with `steps` radii.
pub fn measured_doubling_constant(mu: &DiscreteMeasure, r_min: f64, r_max: f64, steps: usize) -> Result<f64> {
    let sups: Vec<f64> = (0..mu.len())
        .into_par_iter()
        .map(|i| doubling_profile(mu, mu.atom(i), r_min, r_max, steps).map(|p| p.sup_ratio))
        .collect::<Result<_>>()?;
    Ok(sups.into_iter().fold(0.0, f64::max))
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn two_dims() -> usize {
    2
}
fn three_dims() -> usize {
    3
}
fn default_pieces() -> usize {
    8
}
fn default_depth() -> u32 {
    6
}
fn default_planes() -> usize {
    8
}

/// Generator recipes for the synthetic fixtures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureSpec {
    /// `n` equally spaced atoms on [0, length] x {0}.
    Segment {
        #[serde(default = "one")]
        length: f64,
        #[serde(default = "two_dims")]
        dim: usize,
    },
    /// `n` equally spaced atoms on the circle of the given radius about the
    /// origin of the first coordinate plane.
    Circle {
        #[serde(default = "half")]
        radius: f64,
        #[serde(default = "two_dims")]
        dim: usize,
    },
    /// `n` atoms on the graph of a piecewise-linear f: [0, 1] -> R. Without
    /// explicit knots, f is a seeded zigzag of `pieces` pieces whose slopes
    /// have magnitude in [(1 - slope_jitter) L, L] and alternate in sign.
    LipschitzGraph {
        #[serde(default = "half")]
        lipschitz: f64,
        #[serde(default = "default_pieces")]
        pieces: usize,
        #[serde(default)]
        slope_jitter: f64,
        #[serde(default)]
        param_jitter: bool,
        #[serde(default)]
        knots: Option<Vec<[f64; 2]>>,
        #[serde(default = "two_dims")]
        dim: usize,
    },
    /// Centres of the 4^depth squares of the four-corner Cantor construction
    /// in [0, 1]^2 (contraction 1/4). `n` is ignored.
    Cantor4 {
        #[serde(default = "default_depth")]
        depth: u32,
        #[serde(default = "two_dims")]
        dim: usize,
    },
    /// Parallel copies V0 + i * gap * e3 of the coordinate 2-plane, each
    /// carrying c_i times an m x m grid on [0, 1]^2 of unit mass, m = round(sqrt(n)).
    PlaneStack {
        #[serde(default = "default_planes")]
        planes: usize,
        #[serde(default)]
        coefficients: Option<Vec<f64>>,
        #[serde(default = "one")]
        gap: f64,
        #[serde(default = "three_dims")]
        dim: usize,
    },
}

impl MeasureSpec {
    /// Default recipe for a generator name.
    pub fn default_for(kind: &str) -> Result<Self> {
        let spec = match kind {
            "segment" => MeasureSpec::Segment { length: 1.0, dim: 2 },
            "circle" => MeasureSpec::Circle { radius: 0.5, dim: 2 },
            "lipschitz_graph" => MeasureSpec::LipschitzGraph {
                lipschitz: 0.5,
                pieces: 8,
                slope_jitter: 0.0,
                param_jitter: false,
                knots: None,
                dim: 2,
            },
            "cantor4" => MeasureSpec::Cantor4 { depth: 6, dim: 2 },
            "plane_stack" => MeasureSpec::PlaneStack { planes: 8, coefficients: None, gap: 1.0, dim: 3 },
            other => return Err(Error::UnknownKind(other.to_string())),
        };
        Ok(spec)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            MeasureSpec::Segment { .. } => "segment",
            MeasureSpec::Circle { .. } => "circle",
            MeasureSpec::LipschitzGraph { .. } => "lipschitz_graph",
            MeasureSpec::Cantor4 { .. } => "cantor4",
            MeasureSpec::PlaneStack { .. } => "plane_stack",
        }
    }
}

fn embed(dim: usize, coords: &[f64]) -> Point {
    let mut v = vec![0.0; dim];
    v[..coords.len()].copy_from_slice(coords);
    Point::from_vec(v)
}

/// Piecewise-linear function through `knots` (sorted by abscissa).
fn eval_piecewise(knots: &[[f64; 2]], t: f64) -> f64 {
    let seg = knots.windows(2).find(|w| t <= w[1][0]).unwrap_or(&knots[knots.len() - 2..]);
    let ([t0, y0], [t1, y1]) = (seg[0], seg[1]);
    y0 + (y1 - y0) * (t - t0) / (t1 - t0)
}

/// Builds a generator fixture with `n` atoms (see [`MeasureSpec`]).
pub fn generate(spec: &MeasureSpec, n: usize, seed: u64) -> Result<DiscreteMeasure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let need_dim = |dim: usize, min: usize| {
        if dim < min {
            Err(invalid(format!("{} needs dim >= {min}", spec.kind())))
        } else {
            Ok(())
        }
    };
    let need_n = |min: usize| {
        if n < min {
            Err(invalid(format!("{} needs n >= {min}", spec.kind())))
        } else {
            Ok(())
        }
    };
    match spec {
        MeasureSpec::Segment { length, dim } => {
            need_dim(*dim, 1)?;
            need_n(1)?;
            if !(*length > 0.0) {
                return Err(invalid("segment length must be positive"));
            }
            let denom = (n.max(2) - 1) as f64;
            let atoms = (0..n).map(|i| embed(*dim, &[length * i as f64 / denom])).collect();
            DiscreteMeasure::uniform(atoms)
        }
        MeasureSpec::Circle { radius, dim } => {
            need_dim(*dim, 2)?;
            need_n(1)?;
            if !(*radius > 0.0) {
                return Err(invalid("circle radius must be positive"));
            }
            let atoms = (0..n)
                .map(|i| {
                    let th = std::f64::consts::TAU * i as f64 / n as f64;
                    embed(*dim, &[radius * th.cos(), radius * th.sin()])
                })
                .collect();
            DiscreteMeasure::uniform(atoms)
        }
        MeasureSpec::LipschitzGraph { lipschitz, pieces, slope_jitter, param_jitter, knots, dim } => {
            need_dim(*dim, 2)?;
            need_n(2)?;
            if !(*lipschitz >= 0.0 && lipschitz.is_finite()) {
                return Err(invalid("Lipschitz constant must be finite and >= 0"));
            }
            if !(0.0..1.0).contains(slope_jitter) {
                return Err(invalid("slope_jitter must lie in [0, 1)"));
            }
            let knots = match knots {
                Some(k) => {
                    if k.len() < 2 || k.windows(2).any(|w| w[1][0] <= w[0][0]) {
                        return Err(invalid("knots need >= 2 entries with increasing abscissae"));
                    }
                    for w in k.windows(2) {
                        let slope = (w[1][1] - w[0][1]) / (w[1][0] - w[0][0]);
                        if slope.abs() > lipschitz + 1e-12 {
                            return Err(invalid(format!(
                                "knot slope {slope} exceeds the Lipschitz constant {lipschitz}"
                            )));
                        }
                    }
                    k.clone()
                }
                None => {
                    if *pieces == 0 {
                        return Err(invalid("pieces must be >= 1"));
                    }
                    let h = 1.0 / *pieces as f64;
                    let mut k = vec![[0.0, 0.0]];
                    let mut y = 0.0;
                    for i in 0..*pieces {
                        let mag = lipschitz * (1.0 - slope_jitter * rng.gen::<f64>());
                        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                        y += sign * mag * h;
                        k.push([(i + 1) as f64 * h, y]);
                    }
                    k
                }
            };
            let (t0, t1) = (knots[0][0], knots[knots.len() - 1][0]);
            let atoms = (0..n)
                .map(|i| {
                    let s = if *param_jitter {
                        (i as f64 + rng.gen::<f64>()) / n as f64
                    } else {
                        i as f64 / (n - 1) as f64
                    };
                    let t = t0 + (t1 - t0) * s;
                    embed(*dim, &[t, eval_piecewise(&knots, t)])
                })
                .collect();
            DiscreteMeasure::uniform(atoms)
        }
        MeasureSpec::Cantor4 { depth, dim } => {
            need_dim(*dim, 2)?;
            if *depth > 10 {
                return Err(invalid("cantor4 depth above 10 is not supported"));
            }
            let count = 4usize.pow(*depth);
            let side = 0.25f64.powi(*depth as i32);
            let atoms = (0..count)
                .map(|code| {
                    let (mut x, mut y, mut scale) = (0.0, 0.0, 1.0);
                    let mut c = code;
                    for _ in 0..*depth {
                        let digit = c % 4;
                        c /= 4;
                        x += 0.75 * scale * (digit & 1) as f64;
                        y += 0.75 * scale * (digit >> 1) as f64;
                        scale *= 0.25;
                    }
                    embed(*dim, &[x + side / 2.0, y + side / 2.0])
                })
                .collect();
            DiscreteMeasure::uniform(atoms)
        }
        MeasureSpec::PlaneStack { planes, coefficients, gap, dim } => {
            need_dim(*dim, 3)?;
            need_n(1)?;
            let coeffs: Vec<f64> = match coefficients {
                Some(c) => c.clone(),
                None => (0..*planes).map(|i| 0.5f64.powi(i as i32)).collect(),
            };
            if coeffs.is_empty() || coeffs.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
                return Err(invalid("plane coefficients must be positive"));
            }
            if !(*gap > 0.0) {
                return Err(invalid("plane gap must be positive"));
            }
            let m = ((n as f64).sqrt().round() as usize).max(1);
            let step = if m > 1 { 1.0 / (m - 1) as f64 } else { 0.0 };
            let mut atoms = Vec::with_capacity(coeffs.len() * m * m);
            let mut weights = Vec::with_capacity(coeffs.len() * m * m);
            for (i, c) in coeffs.iter().enumerate() {
                for a in 0..m {
                    for b in 0..m {
                        atoms.push(embed(*dim, &[a as f64 * step, b as f64 * step, i as f64 * gap]));
                        weights.push(c / (m * m) as f64);
                    }
                }
            }
            DiscreteMeasure::new(atoms, weights)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(n: usize) -> DiscreteMeasure {
        generate(&MeasureSpec::default_for("segment").unwrap(), n, 0).unwrap()
    }

    #[test]
    fn segment_ball_mass() {
        let mu = seg(1000);
        let m = mu.ball_mass(&[0.5, 0.0], 0.1).unwrap();
        assert!((m - 0.2).abs() <= 0.002, "{m}");
    }

    #[test]
    fn closed_ball_is_inclusive() {
        let mu =
            DiscreteMeasure::uniform(vec![Point::new(vec![0.0]).unwrap(), Point::new(vec![1.0]).unwrap()]).unwrap();
        assert_eq!(mu.ball_mass(&[0.0], 1.0).unwrap(), 1.0);
        assert_eq!(mu.ball_mass(&[0.0], 1.0 - 1e-9).unwrap(), 0.5);
    }

    #[test]
    fn rejects_bad_weights() {
        let a = vec![Point::new(vec![0.0]).unwrap()];
        assert!(DiscreteMeasure::new(a.clone(), vec![-1.0]).is_err());
        assert!(DiscreteMeasure::new(a, vec![1.0, 2.0]).is_err());
        assert!(matches!(MeasureSpec::default_for("spiral"), Err(Error::UnknownKind(_))));
    }

    #[test]
    fn cantor_depth_one() {
        let mu = generate(&MeasureSpec::Cantor4 { depth: 1, dim: 2 }, 0, 0).unwrap();
        let mut pts: Vec<Vec<f64>> = mu.atoms().iter().map(|p| p.to_vec()).collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(pts, vec![vec![0.125, 0.125], vec![0.125, 0.875], vec![0.875, 0.125], vec![0.875, 0.875]]);
        assert!((mu.total_mass() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn plane_stack_mass() {
        let spec = MeasureSpec::PlaneStack { planes: 3, coefficients: Some(vec![1.0, 0.5, 0.25]), gap: 1.0, dim: 3 };
        let mu = generate(&spec, 100, 0).unwrap();
        assert!((mu.total_mass() - 1.75).abs() < 1e-12);
    }

    #[test]
    fn lipschitz_knots_checked() {
        let spec = MeasureSpec::LipschitzGraph {
            lipschitz: 0.5,
            pieces: 1,
            slope_jitter: 0.0,
            param_jitter: false,
            knots: Some(vec![[0.0, 0.0], [1.0, 1.0]]),
            dim: 2,
        };
        assert!(generate(&spec, 10, 0).is_err());
    }

    #[test]
    fn doubling_on_segment_interior() {
        let mu = seg(1001);
        let p = doubling_profile(&mu, &[0.5, 0.0], 0.01, 0.2, 8).unwrap();
        assert!(p.ratios.iter().all(|r| (r - 2.0).abs() < 0.15), "{:?}", p.ratios);
        assert!(doubling_profile(&mu, &[5.0, 0.0], 0.01, 0.2, 8).is_err());
    }

    #[test]
    fn min_gap() {
        let mu = seg(11);
        assert!((mu.min_atom_gap().unwrap() - 0.1).abs() < 1e-12);
    }
}
