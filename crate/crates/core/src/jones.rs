//! Jones-type square function Ĵ₂(μ, r, x) = Σ β₂²(μ, 2B) diam B / μ(B) over
//! family balls B ∋ x with radius(B) <= r, its partial-sum profiles, and the
//! bounded/divergent classifier built on them.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beta::beta2;
use crate::error::{invalid, Error, Result};
use crate::geometry::check_dim;
use crate::measures::DiscreteMeasure;
use crate::nets::{BallId, FamilyIndex, MultiresolutionFamily};

/// Mass and β₂(μ, 2B) of one family ball.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallStats {
    pub mass: f64,
    pub beta2: f64,
}

/// One summand of Ĵ₂.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JonesTerm {
    pub k: i32,
    pub j: usize,
    pub radius: f64,
    pub beta2: f64,
    pub mass: f64,
    pub diam: f64,
    pub value: f64,
}

/// β₂² diam / mass, zero for a massless ball.
pub fn jones_term(beta2: f64, diam: f64, mass: f64) -> f64 {
    if mass > 0.0 {
        beta2 * beta2 * diam / mass
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JonesProfile {
    pub point: Vec<f64>,
    pub r: f64,
    pub family_fingerprint: u64,
    /// Terms ordered by (k, j).
    pub terms: Vec<JonesTerm>,
    /// k -> sum of the terms at levels <= k, over the levels with radius <= r.
    pub partial_sums: BTreeMap<i32, f64>,
    pub total: f64,
}

fn fnv1a(bytes: impl IntoIterator<Item = u8>, mut h: u64) -> u64 {
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Stable hash of a family's parameters and levels.
pub fn family_fingerprint(fam: &MultiresolutionFamily) -> u64 {
    let mut h = 0xcbf29ce484222325;
    h = fnv1a(fam.k0.to_le_bytes(), h);
    h = fnv1a(fam.lambda2.to_bits().to_le_bytes(), h);
    h = fnv1a(fam.j_param.to_le_bytes(), h);
    for l in &fam.levels {
        h = fnv1a(l.k.to_le_bytes(), h);
        for &i in &l.indices {
            h = fnv1a((i as u64).to_le_bytes(), h);
        }
    }
    h
}

/// Precomputed ball statistics for a measure and family; profiles at many
/// points share them.
pub struct JonesEngine<'a> {
    mu: &'a DiscreteMeasure,
    fam: &'a MultiresolutionFamily,
    index: FamilyIndex,
    stats: Vec<Vec<BallStats>>,
    fingerprint: u64,
}

impl<'a> JonesEngine<'a> {
    pub fn new(mu: &'a DiscreteMeasure, fam: &'a MultiresolutionFamily) -> Result<Self> {
        fam.validate(mu)?;
        let stats = fam
            .levels
            .iter()
            .map(|level| {
                (0..level.indices.len())
                    .into_par_iter()
                    .map(|j| {
                        let ball = fam.ball(mu, BallId { k: level.k, j });
                        let mass = mu.mass_of(&mu.atoms_in_ball(&ball.center, ball.radius));
                        let b = beta2(mu, &ball, 2.0)?;
                        Ok(BallStats { mass, beta2: b.value })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(JonesEngine { mu, fam, index: FamilyIndex::new(mu, fam), stats, fingerprint: family_fingerprint(fam) })
    }

    pub fn family(&self) -> &MultiresolutionFamily {
        self.fam
    }

    pub fn measure(&self) -> &DiscreteMeasure {
        self.mu
    }

    pub fn stats(&self, id: BallId) -> BallStats {
        self.stats[(id.k - self.fam.k0) as usize][id.j]
    }

    /// The Ĵ₂ profile at `x` truncated to balls of radius <= r.
    pub fn profile(&self, x: &[f64], r: f64) -> Result<JonesProfile> {
        check_dim(self.mu.dim(), x.len())?;
        if !(r >= 0.0) {
            return Err(invalid(format!("truncation radius must be >= 0, got {r}")));
        }
        let mut terms = Vec::new();
        let mut partial_sums = BTreeMap::new();
        let mut total = 0.0;
        for level in &self.fam.levels {
            let radius = self.fam.radius(level.k);
            if radius > r {
                continue;
            }
            for j in self.index.balls_containing(self.fam, level.k, x) {
                let s = self.stats(BallId { k: level.k, j });
                let diam = 2.0 * radius;
                let value = jones_term(s.beta2, diam, s.mass);
                total += value;
                terms.push(JonesTerm { k: level.k, j, radius, beta2: s.beta2, mass: s.mass, diam, value });
            }
            partial_sums.insert(level.k, total);
        }
        Ok(JonesProfile { point: x.to_vec(), r, family_fingerprint: self.fingerprint, terms, partial_sums, total })
    }
}

/// One-shot profile; builds a [`JonesEngine`] internally.
pub fn jones_profile(mu: &DiscreteMeasure, fam: &MultiresolutionFamily, x: &[f64], r: f64) -> Result<JonesProfile> {
    JonesEngine::new(mu, fam)?.profile(x, r)
}

/// Ĵ₂(r) - Ĵ₂(r'): the sum, in (k, j) order, of the terms of `profile_r` whose
/// radius lies in (r', r].
pub fn truncation_invariance_gap(profile_r: &JonesProfile, profile_r_prime: &JonesProfile) -> Result<f64> {
    if profile_r.family_fingerprint != profile_r_prime.family_fingerprint {
        return Err(Error::Mismatch("profiles come from different families".into()));
    }
    if profile_r.point != profile_r_prime.point {
        return Err(Error::Mismatch("profiles are evaluated at different points".into()));
    }
    if profile_r_prime.r > profile_r.r {
        return Err(invalid("expected r' <= r"));
    }
    let cut = profile_r_prime.r;
    let mut gap = 0.0;
    for t in profile_r.terms.iter().filter(|t| t.radius > cut) {
        gap += t.value;
    }
    Ok(gap)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JonesLabel {
    Bounded,
    Divergent,
}

impl JonesLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            JonesLabel::Bounded => "bounded",
            JonesLabel::Divergent => "divergent",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointClassification {
    pub atom: usize,
    pub slope: f64,
    pub label: JonesLabel,
    pub profile: JonesProfile,
}

/// Default slope threshold separating bounded from divergent profiles.
pub const DEFAULT_SLOPE_THRESHOLD: f64 = 0.01;

/// Least-squares slope of (x, y) pairs.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

/// Slope of the partial sums over the finest half of the levels.
pub fn fine_scale_slope(profile: &JonesProfile) -> f64 {
    let n = profile.partial_sums.len();
    let (xs, ys): (Vec<f64>, Vec<f64>) = profile.partial_sums.iter().skip(n / 2).map(|(&k, &s)| (k as f64, s)).unzip();
    ls_slope(&xs, &ys)
}

/// Labels each sampled atom `divergent` iff the least-squares slope of its
/// partial sums over the finest half of the levels exceeds `slope_threshold`.
pub fn classify(
    engine: &JonesEngine<'_>,
    sample_atoms: &[usize],
    slope_threshold: f64,
) -> Result<Vec<PointClassification>> {
    if engine.family().levels.len() < 4 {
        return Err(Error::Insufficient("classification needs at least 4 scales".into()));
    }
    let mu = engine.measure();
    if let Some(&bad) = sample_atoms.iter().find(|&&a| a >= mu.len()) {
        return Err(invalid(format!("sample atom {bad} out of range")));
    }
    sample_atoms
        .par_iter()
        .map(|&atom| {
            let profile = engine.profile(mu.atom(atom), f64::INFINITY)?;
            let slope = fine_scale_slope(&profile);
            let label = if slope > slope_threshold { JonesLabel::Divergent } else { JonesLabel::Bounded };
            Ok(PointClassification { atom, slope, label, profile })
        })
        .collect()
}

/// `count` distinct atom indices drawn with a seeded generator (all atoms,
/// in order, when `count >= n`).
pub fn sample_atoms(n: usize, count: usize, seed: u64) -> Vec<usize> {
    if count >= n {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rand::seq::index::sample(&mut rng, n, count).into_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{generate, MeasureSpec};
    use crate::nets::build_family;

    #[test]
    fn segment_profile_vanishes() {
        let mu = generate(&MeasureSpec::default_for("segment").unwrap(), 400, 0).unwrap();
        let fam = build_family(&mu, 0, 8, 1.1, 10).unwrap();
        let p = jones_profile(&mu, &fam, mu.atom(200), 1.0).unwrap();
        assert!(p.total.abs() < 1e-20);
        assert!(p.terms.iter().all(|t| t.radius <= 1.0));
    }

    #[test]
    fn point_off_support_is_finite() {
        let mu = generate(&MeasureSpec::default_for("circle").unwrap(), 200, 0).unwrap();
        let fam = build_family(&mu, 0, 6, 1.1, 10).unwrap();
        let p = jones_profile(&mu, &fam, &[3.0, 3.0], 10.0).unwrap();
        assert!(p.total.is_finite());
        assert!(p.terms.is_empty());
    }

    #[test]
    fn mismatched_profiles_rejected() {
        let mu = generate(&MeasureSpec::default_for("circle").unwrap(), 200, 0).unwrap();
        let fam = build_family(&mu, 0, 6, 1.1, 10).unwrap();
        let engine = JonesEngine::new(&mu, &fam).unwrap();
        let a = engine.profile(mu.atom(0), 1.0).unwrap();
        let b = engine.profile(mu.atom(1), 0.5).unwrap();
        assert!(truncation_invariance_gap(&a, &b).is_err());
        let c = engine.profile(mu.atom(0), 0.1).unwrap();
        let gap = truncation_invariance_gap(&a, &c).unwrap();
        assert!((a.total - c.total - gap).abs() < 1e-12);
    }

    #[test]
    fn slope_of_line() {
        assert!((ls_slope(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn sampling_is_deterministic() {
        assert_eq!(sample_atoms(100, 10, 4), sample_atoms(100, 10, 4));
        assert_eq!(sample_atoms(5, 10, 4), vec![0, 1, 2, 3, 4]);
    }
}
