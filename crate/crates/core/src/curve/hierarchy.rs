use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{check_dim, dist, Point, BALL_TOL};
use crate::index::PointIndex;
use crate::nets::farthest_point_order;

/// Generations V_0, V_1, ... of vertices with the scale data (r0, δ, C*).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetHierarchy {
    pub r0: f64,
    pub delta: f64,
    pub c_star: f64,
    pub generations: Vec<Vec<Point>>,
}

/// A failure of one of the hierarchy conditions (V1)-(V3) or of the
/// enclosing-ball condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "condition", rename_all = "snake_case")]
pub enum HierarchyViolation {
    /// Two vertices of V_k closer than δ^k r0.
    Separation { k: usize, a: usize, b: usize, dist: f64 },
    /// No vertex of V_{k+1} within C* δ^k r0.
    Successor { k: usize, v: usize, dist: f64 },
    /// No vertex of V_{k-1} within C* δ^k r0.
    Predecessor { k: usize, v: usize, dist: f64 },
    /// Vertex outside B(x0, C* r0), x0 the first vertex of V_0.
    Enclosure { k: usize, v: usize, dist: f64 },
}

impl NetHierarchy {
    pub fn new(r0: f64, delta: f64, c_star: f64, generations: Vec<Vec<Point>>) -> Result<Self> {
        if !(r0 > 0.0 && r0.is_finite()) {
            return Err(invalid(format!("r0 must be positive, got {r0}")));
        }
        if !(delta > 0.0 && delta <= 0.5) {
            return Err(invalid(format!("delta must lie in (0, 1/2], got {delta}")));
        }
        if !(c_star > 1.0 && c_star.is_finite()) {
            return Err(invalid(format!("C* must exceed 1, got {c_star}")));
        }
        if generations.is_empty() || generations.iter().any(|g| g.is_empty()) {
            return Err(Error::Empty("every generation needs at least one vertex"));
        }
        let d = generations[0][0].dim();
        for g in &generations {
            for p in g {
                check_dim(d, p.dim())?;
            }
        }
        Ok(NetHierarchy { r0, delta, c_star, generations })
    }

    pub fn dim(&self) -> usize {
        self.generations[0][0].dim()
    }

    pub fn k_max(&self) -> usize {
        self.generations.len() - 1
    }

    /// δ^k r0.
    pub fn scale(&self, k: usize) -> f64 {
        self.delta.powi(k as i32) * self.r0
    }

    /// C* δ^e r0 for a possibly negative exponent e.
    pub fn cscale(&self, e: i64) -> f64 {
        self.c_star * self.delta.powi(e as i32) * self.r0
    }

    /// Nested maximal δ^k r0-nets of `points`, k = 0..=k_max, with r0 the
    /// diameter of the point set. C* is fitted when not given.
    pub fn from_points(points: &[Point], delta: f64, k_max: usize, c_star: Option<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("no points for a hierarchy"));
        }
        if !(delta > 0.0 && delta <= 0.5) {
            return Err(invalid(format!("delta must lie in (0, 1/2], got {delta}")));
        }
        let diam = crate::geometry::diameter(points);
        let r0 = if diam > 0.0 { diam } else { 1.0 };
        let index = PointIndex::new(points);
        let finest = delta.powi(k_max as i32) * r0;
        let (order, radii) = farthest_point_order(points, &index, finest);
        let tol = BALL_TOL * r0.max(1.0);
        let generations: Vec<Vec<Point>> = (0..=k_max)
            .map(|k| {
                let s = delta.powi(k as i32) * r0 - tol;
                let len = radii.iter().take_while(|&&r| r >= s).count();
                order[..len].iter().map(|&i| points[i].clone()).collect()
            })
            .collect();
        let c_star = match c_star {
            Some(c) => c,
            None => fit_c_star(&generations, r0, delta),
        };
        NetHierarchy::new(r0, delta, c_star, generations)
    }
}

/// Smallest C* making (V2) and (V3) hold strictly, rounded up to one decimal
/// and kept above 1.
pub fn fit_c_star(generations: &[Vec<Point>], r0: f64, delta: f64) -> f64 {
    let indices: Vec<PointIndex> = generations.iter().map(|g| PointIndex::new(g)).collect();
    let mut worst: f64 = 0.0;
    for k in 0..generations.len() {
        let s = delta.powi(k as i32) * r0;
        for v in &generations[k] {
            if k + 1 < generations.len() {
                worst = worst.max(indices[k + 1].nearest(v).map_or(0.0, |x| x.1) / s);
            }
            if k > 0 {
                worst = worst.max(indices[k - 1].nearest(v).map_or(0.0, |x| x.1) / s);
            }
        }
    }
    let mut c = (worst * 10.0).ceil() / 10.0;
    if c <= worst {
        c += 0.1;
    }
    if c <= 1.0 {
        c = 1.1;
    }
    (c * 10.0).round() / 10.0
}

/// Exhaustive check of (V1)-(V3) and the enclosing ball.
pub fn validate_hierarchy(h: &NetHierarchy) -> Vec<HierarchyViolation> {
    let mut out = Vec::new();
    let indices: Vec<PointIndex> = h.generations.iter().map(|g| PointIndex::new(g)).collect();
    let x0 = &h.generations[0][0];
    let tol = BALL_TOL * h.r0.max(1.0);
    for (k, gen) in h.generations.iter().enumerate() {
        let s = h.scale(k);
        let cs = h.c_star * s;
        for (a, v) in gen.iter().enumerate() {
            for b in indices[k].within(v, s - tol - BALL_TOL) {
                if b > a {
                    out.push(HierarchyViolation::Separation { k, a, b, dist: dist(v, &gen[b]) });
                }
            }
            if k + 1 < h.generations.len() {
                let (_, d) = indices[k + 1].nearest(v).expect("non-empty generation");
                if d >= cs {
                    out.push(HierarchyViolation::Successor { k, v: a, dist: d });
                }
            }
            if k > 0 {
                let (_, d) = indices[k - 1].nearest(v).expect("non-empty generation");
                if d >= cs {
                    out.push(HierarchyViolation::Predecessor { k, v: a, dist: d });
                }
            }
            let d0 = dist(v, x0);
            if d0 > h.c_star * h.r0 + tol {
                out.push(HierarchyViolation::Enclosure { k, v: a, dist: d0 });
            }
        }
    }
    out
}
