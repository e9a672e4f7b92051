//! Curve construction through a multiscale vertex hierarchy: flatness
//! annotation, the generation-by-generation build of Γ with edges, bridges
//! and phantom lengths, and the connectivity and length certificates.

mod construct;
mod gamma;
mod hierarchy;

pub use construct::{
    annotate, construct, Annotations, BridgeRecord, CurveChecks, CurveConstruction, GenerationRecord, LengthLedger,
    SideCase, TerminalBridgePayment, VertexAnnotation, VertexCase, DEFAULT_EPSILON,
};
pub use gamma::{BridgePath, Connectivity, Gamma};
pub use hierarchy::{fit_c_star, validate_hierarchy, HierarchyViolation, NetHierarchy};

use serde::{Deserialize, Serialize};

/// Default scale ratio between generations.
pub const DEFAULT_DELTA: f64 = 0.5;

pub fn connectedness(gamma: &Gamma) -> Connectivity {
    gamma.connectivity()
}

/// Totals of a finished construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthReport {
    pub h1: f64,
    pub edge_length: f64,
    pub bridge_length: f64,
    pub alpha_sum: f64,
    pub bound: f64,
    pub ratio: f64,
    pub per_generation: Vec<LengthLedger>,
}

pub fn length_accounting(c: &CurveConstruction) -> LengthReport {
    LengthReport {
        h1: c.h1,
        edge_length: c.gamma.edge_length(),
        bridge_length: c.gamma.bridge_length(),
        alpha_sum: c.bound - c.r0,
        bound: c.bound,
        ratio: c.ratio,
        per_generation: c.generations.iter().map(|g| g.ledger).collect(),
    }
}

/// Annotate with `epsilon` and construct through the deepest generation.
pub fn build_curve(h: &NetHierarchy, epsilon: f64) -> crate::Result<CurveConstruction> {
    let ann = annotate(h, epsilon)?;
    construct(h, &ann, h.k_max())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;

    fn pts(xy: &[(f64, f64)]) -> Vec<Point> {
        xy.iter().map(|&(x, y)| Point::new(vec![x, y]).unwrap()).collect()
    }

    fn segment(n: usize) -> Vec<Point> {
        pts(&(0..=n).map(|i| (i as f64 / n as f64, 0.0)).collect::<Vec<_>>())
    }

    #[test]
    fn dyadic_segment_nets_are_valid() {
        let gens: Vec<Vec<Point>> = (0..6)
            .map(|k| {
                let m = 1usize << k;
                pts(&(0..=m).map(|i| (i as f64 / m as f64, 0.0)).collect::<Vec<_>>())
            })
            .collect();
        let h = NetHierarchy::new(1.0, 0.5, 5.0, gens).unwrap();
        assert!(validate_hierarchy(&h).is_empty());
    }

    #[test]
    fn duplicate_and_orphan_detected() {
        let mut gens = vec![segment(1), segment(2), segment(4)];
        let dup = gens[1][0].clone();
        gens[1].push(dup);
        let h = NetHierarchy::new(1.0, 0.5, 5.0, gens).unwrap();
        let v = validate_hierarchy(&h);
        assert!(v.iter().any(|x| matches!(x, HierarchyViolation::Separation { k: 1, .. })));

        let mut gens = vec![segment(1), segment(2)];
        gens[0].push(Point::new(vec![40.0, 0.0]).unwrap());
        let h = NetHierarchy::new(1.0, 0.5, 5.0, gens).unwrap();
        let v = validate_hierarchy(&h);
        assert!(v.iter().any(|x| matches!(x, HierarchyViolation::Successor { k: 0, v: 2, .. })));
    }

    #[test]
    fn segment_curve_is_its_polyline() {
        let h = NetHierarchy::from_points(&segment(256), 0.5, 8, None).unwrap();
        assert!(validate_hierarchy(&h).is_empty());
        let c = build_curve(&h, DEFAULT_EPSILON).unwrap();
        assert!(c.bridges.is_empty());
        assert!((c.h1 - 1.0).abs() < 1e-9);
        assert!((c.ratio - 1.0).abs() < 1e-9);
        assert!(c.checks.all_generations_connected);
        assert_eq!(c.gamma.edges.len(), 256);
        let last = c.generations.last().unwrap();
        let ends: Vec<usize> = last.phantom.iter().map(|&(_, v)| v).collect();
        let k = h.k_max();
        for v in ends {
            let x = h.generations[k][v][0];
            assert!(x == 0.0 || x == 1.0);
        }
        assert_eq!(last.phantom.len(), 2);
    }

    #[test]
    fn single_vertex_gives_singleton() {
        let g = vec![pts(&[(0.0, 0.0)]); 4];
        let h = NetHierarchy::new(1.0, 0.5, 2.0, g).unwrap();
        let c = build_curve(&h, DEFAULT_EPSILON).unwrap();
        assert_eq!(c.k0, None);
        assert_eq!(c.h1, 0.0);
        assert!(connectedness(&c.gamma).connected);
    }

    #[test]
    fn two_clusters_get_one_bridge() {
        let mut xy: Vec<(f64, f64)> = (0..=128).map(|i| (i as f64 / 128.0, 0.0)).collect();
        xy.extend((0..=128).map(|i| (3.0 + i as f64 / 128.0, 0.0)));
        let h = NetHierarchy::from_points(&pts(&xy), 0.5, 9, None).unwrap();
        let c = build_curve(&h, DEFAULT_EPSILON).unwrap();
        assert_eq!(c.bridges.len(), 1, "{:?}", c.bridges);
        let b = &c.bridges[0];
        assert!((b.span - 2.0).abs() < 1e-12);
        assert!(c.checks.all_generations_connected);
        assert!(connectedness(&c.gamma).connected);
        assert!((c.h1 - 4.0).abs() < 1e-9);
    }

    #[test]
    fn corner_is_not_flat() {
        let mut xy: Vec<(f64, f64)> = (0..=64).map(|i| (i as f64 / 64.0, 0.0)).collect();
        xy.extend((1..=64).map(|i| (0.0, i as f64 / 64.0)));
        let h = NetHierarchy::from_points(&pts(&xy), 0.5, 6, None).unwrap();
        let ann = annotate(&h, DEFAULT_EPSILON).unwrap();
        let k = 4;
        let v = h.generations[k].iter().position(|p| p[0] == 0.0 && p[1] == 0.0).unwrap();
        assert!(ann.vertices[k][v].alpha >= DEFAULT_EPSILON);
        assert!(!ann.is_flat(k, v));
    }

    #[test]
    fn removing_an_edge_disconnects() {
        let h = NetHierarchy::from_points(&segment(64), 0.5, 6, None).unwrap();
        let c = build_curve(&h, DEFAULT_EPSILON).unwrap();
        let cut = c.gamma.without_edge(10);
        let conn = connectedness(&cut);
        assert!(!conn.connected);
        assert_eq!(conn.components.len(), 2);
    }

    #[test]
    fn epsilon_must_be_below_one_32nd() {
        let h = NetHierarchy::from_points(&segment(8), 0.5, 2, None).unwrap();
        assert!(annotate(&h, 1.0 / 32.0).is_err());
    }
}
