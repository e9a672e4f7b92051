use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cores::{CoreGeometry, Cores};
use crate::error::{invalid, Result};
use crate::geometry::{dist, BALL_TOL};
use crate::measures::DiscreteMeasure;
use crate::nets::{BallId, MultiresolutionFamily};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub id: BallId,
    /// Generation below the top: the node sits at level top.k + depth·J.
    pub depth: usize,
    /// Atom at the ball centre.
    pub atom: usize,
    pub radius: f64,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub mass: f64,
    /// μ(Q_B) for the core of the ball.
    pub core_mass: f64,
}

/// Ball tree of one core family hanging from `top`, pruned to the branches
/// that reach the deepest available generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallTree {
    pub lambda2: f64,
    #[serde(rename = "J")]
    pub j_param: u32,
    pub c: f64,
    /// Node 0 is the top; nodes are stored generation by generation.
    pub nodes: Vec<TreeNode>,
    pub max_depth: usize,
    /// Balls removed because their branch dies before `max_depth`.
    pub pruned: usize,
    /// Balls with more than one candidate parent among the coarser cores.
    pub parent_conflicts: Vec<BallId>,
    /// (parent, child) pairs where the child ball is not inside the parent.
    pub containment_violations: Vec<(BallId, BallId)>,
}

impl BallTree {
    pub fn top(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes at the deepest generation, standing in for the leaves.
    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(move |&i| self.nodes[i].depth == self.max_depth)
    }

    pub fn generation(&self, depth: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(move |&i| self.nodes[i].depth == depth)
    }

    /// Node itself, then its ancestors up to the top.
    pub fn ancestors(&self, mut i: usize) -> Vec<usize> {
        let mut out = vec![i];
        while let Some(p) = self.nodes[i].parent {
            out.push(p);
            i = p;
        }
        out
    }

    pub fn node_of(&self, id: BallId) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// d_T = max μ(B↑)/μ(B) over non-top nodes (1 for a single node).
    pub fn parent_ratio(&self) -> f64 {
        self.nodes.iter().filter_map(|n| n.parent.map(|p| self.nodes[p].mass / n.mass)).fold(1.0, f64::max)
    }

    /// D_T(a) = max μ(B)/μ(aB) over the nodes.
    pub fn doubling_ratio(&self, mu: &DiscreteMeasure, a: f64) -> f64 {
        self.nodes
            .par_iter()
            .map(|n| n.mass / mu.mass_of(&mu.atoms_in_ball(mu.atom(n.atom), a * n.radius)))
            .reduce(|| 1.0, f64::max)
    }
}

/// Children of B_k^j are the level-(k+J) balls whose cores meet Q_k^j.
pub fn build_tree(cores: &Cores, mu: &DiscreteMeasure, fam: &MultiresolutionFamily, top: BallId) -> Result<BallTree> {
    let jj = cores.j_param as i32;
    if cores.core(top).is_none() {
        return Err(invalid(format!("top ball ({}, {}) is not in the family", top.k, top.j)));
    }
    if cores.k0 != fam.k0 || cores.k_max != fam.k_max() {
        return Err(crate::Error::Mismatch("cores were built on a different family".into()));
    }
    let geo = CoreGeometry::new(cores, mu, fam);
    let max_depth = ((cores.k_max - top.k) / jj) as usize;

    // Generation-by-generation expansion without pruning.
    let mut gens: Vec<Vec<(BallId, Option<usize>)>> = vec![vec![(top, None)]];
    let mut conflicts = Vec::new();
    for d in 1..=max_depth {
        let k = top.k + d as i32 * jj;
        let prev = &gens[d - 1];
        let parent_pos: BTreeMap<usize, usize> = prev.iter().enumerate().map(|(i, (b, _))| (b.j, i)).collect();
        let n_level = cores.level(k).expect("level").cores.len();
        let found: Vec<Option<(usize, bool)>> = (0..n_level)
            .into_par_iter()
            .map(|j| {
                let hits = geo.intersecting(k - jj, BallId { k, j });
                let mine: Vec<usize> = hits.iter().filter_map(|p| parent_pos.get(p).copied()).collect();
                let first = *mine.first()?;
                Some((first, hits.len() > 1))
            })
            .collect();
        let mut next = Vec::new();
        for (j, f) in found.into_iter().enumerate() {
            if let Some((p, conflict)) = f {
                if conflict {
                    conflicts.push(BallId { k, j });
                }
                next.push((BallId { k, j }, Some(p)));
            }
        }
        gens.push(next);
    }

    // Keep branches alive at the deepest generation.
    let mut alive: Vec<Vec<bool>> = gens.iter().map(|g| vec![false; g.len()]).collect();
    alive[max_depth].iter_mut().for_each(|a| *a = true);
    for d in (1..=max_depth).rev() {
        for (i, &(_, p)) in gens[d].iter().enumerate() {
            if alive[d][i] {
                alive[d - 1][p.expect("non-top node has a parent")] = true;
            }
        }
    }
    let total: usize = gens.iter().map(Vec::len).sum();
    let mut nodes: Vec<TreeNode> = Vec::new();
    let mut new_pos: Vec<Vec<Option<usize>>> = gens.iter().map(|g| vec![None; g.len()]).collect();
    for (d, g) in gens.iter().enumerate() {
        for (i, &(id, p)) in g.iter().enumerate() {
            if !alive[d][i] {
                continue;
            }
            let parent = p.map(|p| new_pos[d - 1][p].expect("alive parent"));
            let idx = nodes.len();
            new_pos[d][i] = Some(idx);
            if let Some(p) = parent {
                nodes[p].children.push(idx);
            }
            let atom = fam.center_atom(id);
            let radius = fam.radius(id.k);
            nodes.push(TreeNode {
                id,
                depth: d,
                atom,
                radius,
                parent,
                children: Vec::new(),
                mass: 0.0,
                core_mass: 0.0,
            });
        }
    }
    let masses: Vec<(f64, f64)> =
        nodes.par_iter().map(|n| (mu.mass_of(&mu.atoms_in_ball(mu.atom(n.atom), n.radius)), geo.mass(n.id))).collect();
    for (n, (m, q)) in nodes.iter_mut().zip(masses) {
        n.mass = m;
        n.core_mass = q;
    }
    let containment_violations = nodes
        .iter()
        .filter_map(|n| {
            let p = &nodes[n.parent?];
            let reach = dist(mu.atom(n.atom), mu.atom(p.atom)) + n.radius;
            (reach > p.radius + BALL_TOL).then_some((p.id, n.id))
        })
        .collect();
    let pruned = total - nodes.len();
    Ok(BallTree {
        lambda2: cores.lambda2,
        j_param: cores.j_param,
        c: cores.c,
        nodes,
        max_depth,
        pruned,
        parent_conflicts: conflicts,
        containment_violations,
    })
}
