use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::localization::beta_payoff;
use super::tree::BallTree;
use crate::beta::{best_fit_line, beta2};
use crate::curve::{
    construct, validate_hierarchy, Annotations, CurveConstruction, HierarchyViolation, NetHierarchy, VertexAnnotation,
};
use crate::error::{Error, Result};
use crate::geometry::{dist, Ball, Point, BALL_TOL};
use crate::measures::DiscreteMeasure;
use crate::nets::maximal_net;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeavesCurve {
    pub hierarchy: NetHierarchy,
    /// Tree node whose centre of mass is each vertex, per generation.
    pub vertex_nodes: Vec<Vec<usize>>,
    /// The enclosing ancestor B̂ used for each vertex.
    pub hat_nodes: Vec<Vec<usize>>,
    /// Vertices for which no proper ancestor held every required ball, so the
    /// top was used.
    pub hat_fallbacks: usize,
    pub construction: CurveConstruction,
    pub d_t: f64,
    pub s2: f64,
    pub diam_top: f64,
    /// diam Top + d_T^(6+J) S₂.
    pub tree_bound: f64,
    pub hierarchy_violations: Vec<HierarchyViolation>,
    /// max diam B̂ / diam B, against the limit 2^(12+2J).
    pub window_ratio_max: f64,
    pub window_ratio_limit: f64,
    /// Vertices whose window strays farther than α δ^k r0 from the line.
    pub annotation_violations: usize,
    /// Largest distance from a deepest-generation ball centre to Γ.
    pub leaf_distance: f64,
    /// 2 δ^K r0.
    pub leaf_tolerance: f64,
}

fn ball_of(tree: &BallTree, mu: &DiscreteMeasure, i: usize) -> Ball {
    let n = &tree.nodes[i];
    Ball { center: mu.atom(n.atom).clone(), radius: n.radius }
}

fn ball_inside(inner: &Ball, outer: &Ball) -> bool {
    dist(&inner.center, &outer.center) + inner.radius <= outer.radius + BALL_TOL
}

/// Draws Γ through the leaves of `tree`: centres of mass of each generation,
/// maximal δ^k r0-separated subsets of them as vertices (δ = 2^-J, C* = 5·2^J,
/// r0 = diam Top), lines from β₂ minimisers over 2B̂ and flatness numbers
/// α = (4 d_T)^(6+J) β₂(μ, 2B̂) diam B / (δ^k r0).
pub fn leaves_curve(tree: &BallTree, mu: &DiscreteMeasure, epsilon: f64) -> Result<LeavesCurve> {
    if tree.is_empty() {
        return Err(Error::Empty("tree has no nodes"));
    }
    let jj = tree.j_param as i32;
    let delta = 2f64.powi(-jj);
    let c_star = 5.0 * 2f64.powi(jj);
    let r0 = 2.0 * tree.top().radius;
    let kk = tree.max_depth;

    let centre_of_mass = |i: usize| -> Result<Point> {
        let b = ball_of(tree, mu, i);
        crate::beta::center_of_mass(mu, &b)
    };
    let mut vertex_nodes = Vec::with_capacity(kk + 1);
    let mut generations = Vec::with_capacity(kk + 1);
    for g in 0..=kk {
        let nodes: Vec<usize> = tree.generation(g).collect();
        let z: Vec<Point> = nodes.par_iter().map(|&i| centre_of_mass(i)).collect::<Result<_>>()?;
        let keep = maximal_net(&z, delta.powi(g as i32) * r0)?;
        vertex_nodes.push(keep.iter().map(|&i| nodes[i]).collect::<Vec<_>>());
        generations.push(keep.into_iter().map(|i| z[i].clone()).collect::<Vec<_>>());
    }
    let h = NetHierarchy::new(r0, delta, c_star, generations)?;
    let hierarchy_violations = validate_hierarchy(&h);

    let payoff = beta_payoff(tree, mu)?;
    let s2: f64 = payoff.iter().sum();
    let d_t = tree.parent_ratio();
    let amplifier = (4.0 * d_t).powi(6 + jj);
    let index: Vec<crate::index::PointIndex> = h.generations.iter().map(|g| crate::index::PointIndex::new(g)).collect();

    let mut hat_nodes = Vec::with_capacity(kk + 1);
    let mut vertices = Vec::with_capacity(kk + 1);
    let mut hat_fallbacks = 0;
    let mut window_ratio_max: f64 = 1.0;
    let mut annotation_violations = 0;
    for g in 0..=kk {
        let window = 66.0 * h.cscale(g as i64 - 2);
        let per: Vec<(usize, bool, f64, VertexAnnotation, bool)> = (0..h.generations[g].len())
            .into_par_iter()
            .map(|v| {
                let own = vertex_nodes[g][v];
                let pv = &h.generations[g][v];
                let mut required = vec![ball_of(tree, mu, own)];
                let mut near: Vec<&Point> = Vec::new();
                for j in [g.checked_sub(1), Some(g)].into_iter().flatten() {
                    for u in index[j].within(pv, window) {
                        required.push(ball_of(tree, mu, vertex_nodes[j][u]));
                        near.push(&h.generations[j][u]);
                    }
                }
                let chain = tree.ancestors(own);
                let found = chain.iter().copied().find(|&a| {
                    let outer = ball_of(tree, mu, a);
                    required.iter().all(|b| ball_inside(b, &outer))
                });
                let hat = found.unwrap_or(0);
                let hat_ball = ball_of(tree, mu, hat);
                let ratio = hat_ball.radius / tree.nodes[own].radius;
                let doubled = hat_ball.dilate(2.0);
                let line = best_fit_line(mu, &doubled)?;
                let beta = beta2(mu, &hat_ball, 2.0)?.value;
                let diam_b = 2.0 * tree.nodes[own].radius;
                let alpha = amplifier * beta * diam_b / h.scale(g);
                let sup = near.iter().map(|p| line.dist(p)).fold(0.0, f64::max);
                let violated = sup > alpha * h.scale(g) + BALL_TOL * r0.max(1.0);
                let ann = VertexAnnotation { line, alpha, flat: alpha < epsilon };
                Ok((hat, found.is_none(), ratio, ann, violated))
            })
            .collect::<Result<_>>()?;
        let mut hats = Vec::with_capacity(per.len());
        let mut anns = Vec::with_capacity(per.len());
        for (hat, fallback, ratio, ann, violated) in per {
            hats.push(hat);
            anns.push(ann);
            hat_fallbacks += fallback as usize;
            window_ratio_max = window_ratio_max.max(ratio);
            annotation_violations += violated as usize;
        }
        hat_nodes.push(hats);
        vertices.push(anns);
    }
    let ann = Annotations { epsilon, vertices };
    let construction = construct(&h, &ann, kk)?;
    let leaf_distance = tree
        .leaves()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&i| construction.gamma.distance_to(mu.atom(tree.nodes[i].atom)))
        .reduce(|| 0.0, f64::max);
    Ok(LeavesCurve {
        leaf_tolerance: 2.0 * h.scale(kk),
        hierarchy: h,
        vertex_nodes,
        hat_nodes,
        hat_fallbacks,
        construction,
        d_t,
        s2,
        diam_top: r0,
        tree_bound: r0 + d_t.powi(6 + jj) * s2,
        hierarchy_violations,
        window_ratio_max,
        window_ratio_limit: 2f64.powi(12 + 2 * jj),
        annotation_violations,
        leaf_distance,
    })
}
