use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::BallTree;
use crate::beta::beta2;
use crate::error::{invalid, Result};
use crate::geometry::Ball;
use crate::measures::DiscreteMeasure;

/// b(B) = β₂(μ, 2B)² diam B for every node.
pub fn beta_payoff(tree: &BallTree, mu: &DiscreteMeasure) -> Result<Vec<f64>> {
    tree.nodes
        .par_iter()
        .map(|n| {
            let ball = Ball { center: mu.atom(n.atom).clone(), radius: n.radius };
            let b = beta2(mu, &ball, 2.0)?.value;
            Ok(b * b * 2.0 * n.radius)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoodBadPartition {
    pub n_threshold: f64,
    pub epsilon: f64,
    pub a: f64,
    /// Node indices, ascending.
    pub good: Vec<usize>,
    pub bad: Vec<usize>,
    /// Ŝ_{T,b}(μ, x) at every atom of Top (atom index, value).
    pub sums: Vec<(usize, f64)>,
    /// E: atoms of Top with Ŝ <= N lying in some deepest-generation ball.
    pub e_atoms: Vec<usize>,
    /// μ(E) without the restriction to the deepest generation.
    pub mass_e_top: f64,
    pub mass_e: f64,
    pub mass_e_prime: f64,
    pub mass_top: f64,
    /// Measured D_T = max μ(B)/μ(aB).
    pub d_t: f64,
    pub good_sum: f64,
    pub good_bound: f64,
    pub good_sum_ok: bool,
    /// (1 - ε μ(Top)) μ(E).
    pub retention_bound: f64,
    pub retention_ok: bool,
    pub bad_closed_downward: bool,
    pub good_is_tree: bool,
    pub warnings: Vec<String>,
}

/// Good/bad partition: a ball is bad when it or an ancestor B' has
/// μ(E ∩ B') <= ε μ(E) μ(Q_B').
pub fn good_bad(
    tree: &BallTree,
    mu: &DiscreteMeasure,
    b: &[f64],
    n_threshold: f64,
    epsilon: f64,
    a: f64,
) -> Result<GoodBadPartition> {
    if tree.is_empty() {
        return Err(crate::Error::Empty("tree has no nodes"));
    }
    if b.len() != tree.len() {
        return Err(crate::Error::Mismatch(format!("{} payoffs for {} nodes", b.len(), tree.len())));
    }
    if b.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
        return Err(invalid("payoffs must be finite and nonnegative"));
    }
    if !(epsilon > 0.0) || !(n_threshold >= 0.0) {
        return Err(invalid("need epsilon > 0 and N >= 0"));
    }
    if !(a > 0.0 && a <= tree.c + 1e-15) {
        return Err(invalid(format!("a must lie in (0, c = {}], got {a}", tree.c)));
    }
    let n_atoms = mu.len();
    let balls: Vec<Vec<usize>> = tree.nodes.par_iter().map(|n| mu.atoms_in_ball(mu.atom(n.atom), n.radius)).collect();
    let mut s_hat = vec![0.0; n_atoms];
    for (i, node) in tree.nodes.iter().enumerate() {
        if node.mass > 0.0 {
            let w = b[i] / node.mass;
            for &x in &balls[i] {
                s_hat[x] += w;
            }
        }
    }
    let mut in_leaf = vec![false; n_atoms];
    for i in tree.leaves() {
        for &x in &balls[i] {
            in_leaf[x] = true;
        }
    }
    let weights = mu.weights();
    let top_atoms = &balls[0];
    let sums: Vec<(usize, f64)> = top_atoms.iter().map(|&x| (x, s_hat[x])).collect();
    let mut in_e = vec![false; n_atoms];
    let mut mass_e_top = 0.0;
    for &(x, s) in &sums {
        if s <= n_threshold {
            mass_e_top += weights[x];
            in_e[x] = in_leaf[x];
        }
    }
    let e_atoms: Vec<usize> = top_atoms.iter().copied().filter(|&x| in_e[x]).collect();
    let mass_e: f64 = e_atoms.iter().map(|&x| weights[x]).sum();
    let mass_top = tree.top().mass;

    let mut bad = vec![mass_e == 0.0; tree.len()];
    if mass_e > 0.0 {
        for i in 0..tree.len() {
            let node = &tree.nodes[i];
            let e_in: f64 = balls[i].iter().filter(|&&x| in_e[x]).map(|&x| weights[x]).sum();
            let own = e_in <= epsilon * mass_e * node.core_mass;
            // Parents precede children in storage order.
            bad[i] = own || node.parent.is_some_and(|p| bad[p]);
        }
    }
    let good: Vec<usize> = (0..tree.len()).filter(|&i| !bad[i]).collect();
    let bad_list: Vec<usize> = (0..tree.len()).filter(|&i| bad[i]).collect();

    let mut in_good_leaf = vec![false; n_atoms];
    for i in tree.leaves().filter(|&i| !bad[i]) {
        for &x in &balls[i] {
            in_good_leaf[x] = true;
        }
    }
    let mass_e_prime: f64 = e_atoms.iter().filter(|&&x| in_good_leaf[x]).map(|&x| weights[x]).sum();
    let d_t = tree.doubling_ratio(mu, a);
    let good_sum: f64 = good.iter().map(|&i| b[i]).sum();
    let good_bound = n_threshold * d_t / epsilon;
    let retention_bound = (1.0 - epsilon * mass_top) * mass_e;
    let tol = 1e-12 * mass_top.max(1.0);

    let bad_closed_downward = tree.nodes.iter().enumerate().all(|(i, n)| !bad[i] || n.children.iter().all(|&c| bad[c]));
    let good_is_tree =
        good.is_empty() || (!bad[0] && good.iter().all(|&i| tree.nodes[i].parent.map_or(i == 0, |p| !bad[p])));
    let mut warnings = Vec::new();
    if epsilon * mass_top >= 1.0 {
        warnings.push(format!("epsilon * mu(Top) = {} >= 1: the retention bound is vacuous", epsilon * mass_top));
    }
    if (mass_e_top - mass_e).abs() > tol {
        warnings.push(format!("mu(E) drops from {mass_e_top} to {mass_e} when restricted to the deepest generation"));
    }
    Ok(GoodBadPartition {
        n_threshold,
        epsilon,
        a,
        good,
        bad: bad_list,
        sums,
        e_atoms,
        mass_e_top,
        mass_e,
        mass_e_prime,
        mass_top,
        d_t,
        good_sum,
        good_bound,
        good_sum_ok: good_sum <= good_bound + tol,
        retention_bound,
        retention_ok: mass_e_prime >= retention_bound - tol,
        bad_closed_downward,
        good_is_tree,
        warnings,
    })
}
