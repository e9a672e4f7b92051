//! JSON interchange: point sets, measures, families, hierarchies, curves and
//! trees. Writers emit pretty-printed JSON with a trailing newline so that
//! identical inputs give byte-identical files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::curve::{BridgePath, BridgeRecord, CurveChecks, CurveConstruction, LengthLedger};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::measures::DiscreteMeasure;
use crate::nets::BallId;
use crate::trees::{BallTree, GoodBadPartition};

fn format_err(path: &Path, message: impl ToString) -> Error {
    Error::Format { path: path.display().to_string(), message: message.to_string() }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    serde_json::from_str(&text).map_err(|e| format_err(path, e))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.display().to_string(), source })?;
    }
    fs::write(path, text).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json(value))
}

/// Point sets are plain arrays of coordinate arrays.
pub fn parse_points(values: Vec<Vec<f64>>) -> Result<Vec<Point>> {
    values.into_iter().map(Point::new).collect()
}

pub fn read_points(path: &Path) -> Result<Vec<Point>> {
    let raw: Vec<Vec<f64>> = read_json(path)?;
    parse_points(raw).map_err(|e| format_err(path, e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureFile {
    pub dim: usize,
    pub atoms: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl From<&DiscreteMeasure> for MeasureFile {
    fn from(mu: &DiscreteMeasure) -> Self {
        MeasureFile {
            dim: mu.dim(),
            atoms: mu.atoms().iter().map(|p| p.to_vec()).collect(),
            weights: mu.weights().to_vec(),
        }
    }
}

impl MeasureFile {
    pub fn into_measure(self) -> Result<DiscreteMeasure> {
        let atoms = parse_points(self.atoms)?;
        if let Some(a) = atoms.iter().find(|a| a.dim() != self.dim) {
            return Err(Error::DimensionMismatch { expected: self.dim, found: a.dim() });
        }
        DiscreteMeasure::new(atoms, self.weights)
    }
}

pub fn read_measure(path: &Path) -> Result<DiscreteMeasure> {
    let file: MeasureFile = read_json(path)?;
    file.into_measure().map_err(|e| format_err(path, e))
}

/// Serialized curve: the final vertex set with its edges as index pairs,
/// the bridges with their extension chains and polylines, and the per
/// generation length ledgers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaFile {
    pub r0: f64,
    pub delta: f64,
    pub c_star: f64,
    pub epsilon: f64,
    pub k0: Option<usize>,
    pub k_max: usize,
    pub h1: f64,
    pub bound: f64,
    pub ratio: f64,
    pub connected: bool,
    pub vertices: Vec<Point>,
    pub edges: Vec<(usize, usize)>,
    pub bridges: Vec<BridgeRecord>,
    pub bridge_paths: Vec<BridgePath>,
    pub ledgers: Vec<LengthLedger>,
    pub checks: CurveChecks,
}

impl From<&CurveConstruction> for GammaFile {
    fn from(c: &CurveConstruction) -> Self {
        GammaFile {
            r0: c.r0,
            delta: c.delta,
            c_star: c.c_star,
            epsilon: c.epsilon,
            k0: c.k0,
            k_max: c.k_max,
            h1: c.h1,
            bound: c.bound,
            ratio: c.ratio,
            connected: c.checks.all_generations_connected,
            vertices: c.gamma.vertices.clone(),
            edges: c.gamma.edges.clone(),
            bridges: c.bridges.clone(),
            bridge_paths: c.gamma.bridges.clone(),
            ledgers: c.generations.iter().map(|g| g.ledger).collect(),
            checks: c.checks.clone(),
        }
    }
}

impl GammaFile {
    pub fn gamma(&self) -> crate::curve::Gamma {
        crate::curve::Gamma {
            vertices: self.vertices.clone(),
            edges: self.edges.clone(),
            bridges: self.bridge_paths.clone(),
        }
    }
}

/// Key "k:j" of a family ball.
pub fn ball_key(id: BallId) -> String {
    format!("{}:{}", id.k, id.j)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeEntry {
    pub depth: usize,
    pub atom: usize,
    pub radius: f64,
    pub mass: f64,
    pub core_mass: f64,
    pub parent: Option<String>,
    pub children: Vec<String>,
    /// Present when a partition was computed.
    pub good: Option<bool>,
    pub payoff: Option<f64>,
}

/// Tree as an adjacency list keyed by "k:j".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeFile {
    pub top: String,
    pub lambda2: f64,
    #[serde(rename = "J")]
    pub j_param: u32,
    pub c: f64,
    pub max_depth: usize,
    pub nodes: BTreeMap<String, TreeEntry>,
    pub partition: Option<PartitionSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionSummary {
    pub n_threshold: f64,
    pub epsilon: f64,
    pub a: f64,
    pub mass_e: f64,
    pub mass_e_prime: f64,
    pub mass_top: f64,
    pub d_t: f64,
    pub good_sum: f64,
    pub good_bound: f64,
    pub good_sum_ok: bool,
    pub retention_bound: f64,
    pub retention_ok: bool,
    pub warnings: Vec<String>,
}

pub fn tree_file(tree: &BallTree, payoff: Option<&[f64]>, partition: Option<&GoodBadPartition>) -> TreeFile {
    let key = |i: usize| ball_key(tree.nodes[i].id);
    let good: Option<Vec<bool>> = partition.map(|p| {
        let mut g = vec![false; tree.len()];
        p.good.iter().for_each(|&i| g[i] = true);
        g
    });
    let nodes = tree
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let entry = TreeEntry {
                depth: n.depth,
                atom: n.atom,
                radius: n.radius,
                mass: n.mass,
                core_mass: n.core_mass,
                parent: n.parent.map(key),
                children: n.children.iter().map(|&c| key(c)).collect(),
                good: good.as_ref().map(|g| g[i]),
                payoff: payoff.map(|b| b[i]),
            };
            (key(i), entry)
        })
        .collect();
    TreeFile {
        top: key(0),
        lambda2: tree.lambda2,
        j_param: tree.j_param,
        c: tree.c,
        max_depth: tree.max_depth,
        nodes,
        partition: partition.map(|p| PartitionSummary {
            n_threshold: p.n_threshold,
            epsilon: p.epsilon,
            a: p.a,
            mass_e: p.mass_e,
            mass_e_prime: p.mass_e_prime,
            mass_top: p.mass_top,
            d_t: p.d_t,
            good_sum: p.good_sum,
            good_bound: p.good_bound,
            good_sum_ok: p.good_sum_ok,
            retention_bound: p.retention_bound,
            retention_ok: p.retention_ok,
            warnings: p.warnings.clone(),
        }),
    }
}
