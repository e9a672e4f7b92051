use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{dist, BALL_TOL};
use crate::index::PointIndex;
use crate::measures::DiscreteMeasure;
use crate::nets::{lambda2_floor, BallId, FamilyIndex, MultiresolutionFamily};

/// Core of B_k^j as the ball-id set of its iterated union: `layers[i]` holds
/// the positions of the level-(k + iJ) balls whose c-dilates were absorbed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Core {
    pub id: BallId,
    pub layers: Vec<Vec<usize>>,
}

impl Core {
    pub fn constituents(&self, j_param: u32) -> impl Iterator<Item = BallId> + '_ {
        let k = self.id.k;
        self.layers
            .iter()
            .enumerate()
            .flat_map(move |(i, l)| l.iter().map(move |&j| BallId { k: k + (i as i32) * j_param as i32, j }))
    }

    pub fn len(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, b: BallId, j_param: u32) -> bool {
        let d = b.k - self.id.k;
        if d < 0 || d % j_param as i32 != 0 {
            return false;
        }
        self.layers.get((d / j_param as i32) as usize).is_some_and(|l| l.binary_search(&b.j).is_ok())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoreLevel {
    pub k: i32,
    pub cores: Vec<Core>,
}

/// Levels k0 + index, k0 + index + J, ... and their cores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoreFamily {
    pub index: usize,
    pub levels: Vec<CoreLevel>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cores {
    pub c: f64,
    pub lambda2: f64,
    #[serde(rename = "J")]
    pub j_param: u32,
    pub k0: i32,
    pub k_max: i32,
    pub families: Vec<CoreFamily>,
}

/// Largest c keeping same-level cores 2^-(k+1) apart once the deeper layers
/// are absorbed: 1 / (4 λ₂ (1 + 4·2^-J)).
pub fn default_c(lambda2: f64, j_param: u32) -> f64 {
    1.0 / (4.0 * lambda2 * (1.0 + 4.0 * 0.5f64.powi(j_param as i32)))
}

impl Cores {
    pub fn family_of(&self, k: i32) -> usize {
        ((k - self.k0) % self.j_param as i32) as usize
    }

    pub fn core(&self, id: BallId) -> Option<&Core> {
        if id.k < self.k0 || id.k > self.k_max {
            return None;
        }
        let f = &self.families[self.family_of(id.k)];
        f.levels.get(((id.k - self.k0) / self.j_param as i32) as usize)?.cores.get(id.j)
    }

    pub fn level(&self, k: i32) -> Option<&CoreLevel> {
        if k < self.k0 || k > self.k_max {
            return None;
        }
        self.families[self.family_of(k)].levels.get(((k - self.k0) / self.j_param as i32) as usize)
    }

    /// Radius c λ₂ 2^-k of the dilates cB at level k.
    pub fn ball_radius(&self, k: i32) -> f64 {
        self.c * self.lambda2 * 2f64.powi(-k)
    }
}

/// Builds the J core families over every level of `fam`, iterating each
/// union until the family's deepest level.
pub fn build_cores(mu: &DiscreteMeasure, fam: &MultiresolutionFamily, c: f64, j_param: u32) -> Result<Cores> {
    fam.validate(mu)?;
    if j_param < 10 {
        return Err(invalid(format!("J must be >= 10, got {j_param}")));
    }
    if !(fam.lambda2 > lambda2_floor(j_param)) {
        return Err(invalid(format!("lambda2 = {} must exceed (1 - 2^-J)^-2 for J = {j_param}", fam.lambda2)));
    }
    if !(c > 0.0 && c <= 1.0 / (4.0 * fam.lambda2) + BALL_TOL) {
        return Err(invalid(format!("c must lie in (0, 1/(4 lambda2)], got {c}")));
    }
    let index = FamilyIndex::new(mu, fam);
    let k_max = fam.k_max();
    let jj = j_param as i32;
    let rad = |k: i32| c * fam.radius(k);
    let centre = |k: i32, j: usize| mu.atom(fam.level(k).expect("level").indices[j]).coords();
    let build = |k: i32, j: usize| {
        let mut layers = vec![vec![j]];
        let mut cons: Vec<(&[f64], f64)> = vec![(centre(k, j), rad(k))];
        let mut l = k + jj;
        while l <= k_max {
            let rl = rad(l);
            let mut found = BTreeSet::new();
            for &(x, r) in &cons {
                found.extend(index.centers_within(l, x, r + rl));
            }
            let layer: Vec<usize> = found.into_iter().collect();
            cons.extend(layer.iter().map(|&p| (centre(l, p), rl)));
            layers.push(layer);
            l += jj;
        }
        Core { id: BallId { k, j }, layers }
    };
    let mut families: Vec<CoreFamily> =
        (0..j_param as usize).map(|index| CoreFamily { index, levels: Vec::new() }).collect();
    for level in &fam.levels {
        let cores = (0..level.indices.len()).into_par_iter().map(|j| build(level.k, j)).collect();
        let f = ((level.k - fam.k0) % jj) as usize;
        families[f].levels.push(CoreLevel { k: level.k, cores });
    }
    Ok(Cores { c, lambda2: fam.lambda2, j_param, k0: fam.k0, k_max, families })
}

/// Constituent balls of all cores at one level, indexed by centre.
struct LevelConstituents<'a> {
    centres: Vec<&'a [f64]>,
    radii: Vec<f64>,
    owner: Vec<usize>,
    index: PointIndex,
    r_max: f64,
}

/// Spatial lookup of core constituents, for intersection tests between cores.
pub struct CoreGeometry<'a> {
    cores: &'a Cores,
    mu: &'a DiscreteMeasure,
    fam: &'a MultiresolutionFamily,
    levels: Vec<LevelConstituents<'a>>,
}

impl<'a> CoreGeometry<'a> {
    pub fn new(cores: &'a Cores, mu: &'a DiscreteMeasure, fam: &'a MultiresolutionFamily) -> Self {
        let levels = (cores.k0..=cores.k_max)
            .into_par_iter()
            .map(|k| {
                let level = cores.level(k).expect("level");
                let mut centres = Vec::new();
                let mut radii = Vec::new();
                let mut owner = Vec::new();
                for (j, core) in level.cores.iter().enumerate() {
                    for b in core.constituents(cores.j_param) {
                        centres.push(mu.atom(fam.center_atom(b)).coords());
                        radii.push(cores.ball_radius(b.k));
                        owner.push(j);
                    }
                }
                let index = PointIndex::new(&centres);
                LevelConstituents { centres, radii, owner, index, r_max: cores.ball_radius(k) }
            })
            .collect();
        CoreGeometry { cores, mu, fam, levels }
    }

    fn constituents_of(&self, id: BallId) -> Vec<(&'a [f64], f64)> {
        let core = self.cores.core(id).expect("core in range");
        core.constituents(self.cores.j_param)
            .map(|b| (self.mu.atom(self.fam.center_atom(b)).coords(), self.cores.ball_radius(b.k)))
            .collect()
    }

    /// Positions of the level-`k` cores meeting the core of `id`.
    pub fn intersecting(&self, k: i32, id: BallId) -> BTreeSet<usize> {
        let lc = &self.levels[(k - self.cores.k0) as usize];
        let mut out = BTreeSet::new();
        for (x, r) in self.constituents_of(id) {
            for i in lc.index.within(x, r + lc.r_max) {
                if dist(x, lc.centres[i]) <= r + lc.radii[i] + BALL_TOL {
                    out.insert(lc.owner[i]);
                }
            }
        }
        out
    }

    /// Smallest distance from the core of `id` to another core of its level,
    /// searched up to `horizon`; `None` when nothing is that close.
    pub fn nearest_gap(&self, id: BallId, horizon: f64) -> Option<(usize, f64)> {
        let lc = &self.levels[(id.k - self.cores.k0) as usize];
        let mut best: Option<(usize, f64)> = None;
        for (x, r) in self.constituents_of(id) {
            for i in lc.index.within(x, r + lc.r_max + horizon) {
                if lc.owner[i] == id.j {
                    continue;
                }
                let gap = (dist(x, lc.centres[i]) - r - lc.radii[i]).max(0.0);
                if gap <= horizon && best.map_or(true, |(o, g)| gap < g || (gap == g && lc.owner[i] < o)) {
                    best = Some((lc.owner[i], gap));
                }
            }
        }
        best
    }

    /// Diameter of the union of the constituent balls.
    pub fn diameter(&self, id: BallId) -> f64 {
        let cons = self.constituents_of(id);
        cons.par_iter()
            .enumerate()
            .map(|(i, &(x, r))| cons[i..].iter().map(|&(y, s)| dist(x, y) + r + s).fold(0.0, f64::max))
            .reduce(|| 0.0, f64::max)
    }

    /// μ(Q) for the closed union of the constituent balls.
    pub fn mass(&self, id: BallId) -> f64 {
        let mut atoms = BTreeSet::new();
        for (x, r) in self.constituents_of(id) {
            atoms.extend(self.mu.atoms_in_ball(x, r));
        }
        atoms.into_iter().map(|a| self.mu.weights()[a]).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiameterViolation {
    pub id: BallId,
    pub diam: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapViolation {
    pub a: BallId,
    pub b: BallId,
    pub gap: f64,
    pub required: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoreReport {
    pub cores: usize,
    /// Property (ii): 2cλ₂2^-k <= diam Q <= 2(1 + 4·2^(1-J)) cλ₂2^-k.
    pub diameter_violations: Vec<DiameterViolation>,
    /// Property (iii): same-level cores of one family at distance >= 2^-(k+1).
    pub gap_violations: Vec<GapViolation>,
    /// Smallest observed gap divided by 2^-(k+1), over cores with a neighbour
    /// within that distance (infinite when none).
    pub min_gap_ratio: f64,
    /// Property (iv): a deeper core meeting a coarser core of its family is
    /// not contained in it.
    pub nesting_violations: Vec<(BallId, BallId)>,
}

impl CoreReport {
    pub fn ok(&self) -> bool {
        self.diameter_violations.is_empty() && self.gap_violations.is_empty() && self.nesting_violations.is_empty()
    }
}

/// Exhaustive check of properties (ii)-(iv).
/// Per-core results of [`check_cores`]: diameter and gap findings, the gap
/// ratio and the nesting violations.
type CoreFindings = (Option<DiameterViolation>, Option<GapViolation>, f64, Vec<(BallId, BallId)>);

pub fn check_cores(cores: &Cores, mu: &DiscreteMeasure, fam: &MultiresolutionFamily) -> CoreReport {
    let geo = CoreGeometry::new(cores, mu, fam);
    let jj = cores.j_param as i32;
    let growth = 1.0 + 4.0 * 2f64.powi(1 - jj);
    let ids: Vec<BallId> = (cores.k0..=cores.k_max)
        .flat_map(|k| (0..cores.level(k).expect("level").cores.len()).map(move |j| BallId { k, j }))
        .collect();
    let per: Vec<CoreFindings> = ids
        .par_iter()
        .map(|&id| {
            let base = 2.0 * cores.ball_radius(id.k);
            let diam = geo.diameter(id);
            let (lower, upper) = (base, growth * base);
            let dv = (diam < lower - BALL_TOL || diam > upper + BALL_TOL).then_some(DiameterViolation {
                id,
                diam,
                lower,
                upper,
            });
            let required = 2f64.powi(-id.k - 1);
            let (gv, ratio) = match geo.nearest_gap(id, required) {
                Some((o, gap)) => {
                    let v = (gap < required - BALL_TOL).then_some(GapViolation {
                        a: id,
                        b: BallId { k: id.k, j: o },
                        gap,
                        required,
                    });
                    (v, gap / required)
                }
                None => (None, f64::INFINITY),
            };
            let mut nest = Vec::new();
            let core = cores.core(id).expect("core");
            let mut k = id.k - jj;
            while k >= cores.k0 {
                for p in geo.intersecting(k, id) {
                    let outer = cores.core(BallId { k, j: p }).expect("core");
                    if !core.constituents(cores.j_param).all(|b| outer.contains(b, cores.j_param)) {
                        nest.push((outer.id, id));
                    }
                }
                k -= jj;
            }
            (dv, gv, ratio, nest)
        })
        .collect();
    let mut report = CoreReport {
        cores: ids.len(),
        diameter_violations: Vec::new(),
        gap_violations: Vec::new(),
        min_gap_ratio: f64::INFINITY,
        nesting_violations: Vec::new(),
    };
    for (dv, gv, ratio, nest) in per {
        report.diameter_violations.extend(dv);
        report.gap_violations.extend(gv);
        report.min_gap_ratio = report.min_gap_ratio.min(ratio);
        report.nesting_violations.extend(nest);
    }
    report
}
