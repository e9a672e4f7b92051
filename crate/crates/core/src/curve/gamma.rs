use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::geometry::{dist, dist_point_segment, Point};

/// A bridge as a polyline: the extension chain of one end (finest vertex
/// first), the bridging segment, then the other chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BridgePath {
    pub generation: usize,
    /// Vertex indices of the two ends within their generation.
    pub ends: (usize, usize),
    pub polyline: Vec<Point>,
    /// Indices in the final vertex set where the two chains terminate.
    pub terminals: (usize, usize),
    /// Length of the bridging segment alone.
    pub span: f64,
    pub flat: bool,
}

impl BridgePath {
    pub fn length(&self) -> f64 {
        self.polyline.windows(2).map(|w| dist(&w[0], &w[1])).sum()
    }
}

/// The final curve: the finest vertex generation, its edges, and every bridge
/// built along the way.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gamma {
    pub vertices: Vec<Point>,
    pub edges: Vec<(usize, usize)>,
    pub bridges: Vec<BridgePath>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Connectivity {
    pub connected: bool,
    /// Vertex index sets of the components, each sorted, ordered by their
    /// smallest member.
    pub components: Vec<Vec<usize>>,
}

impl Gamma {
    pub fn edge_length(&self) -> f64 {
        self.edges.iter().map(|&(a, b)| dist(&self.vertices[a], &self.vertices[b])).sum()
    }

    pub fn bridge_length(&self) -> f64 {
        self.bridges.iter().map(BridgePath::length).sum()
    }

    /// H¹(Γ) as total edge length plus total bridge length.
    pub fn length(&self) -> f64 {
        self.edge_length() + self.bridge_length()
    }

    pub fn connectivity(&self) -> Connectivity {
        let n = self.vertices.len();
        let mut uf = UnionFind::new(n);
        for &(a, b) in &self.edges {
            uf.union(a, b);
        }
        for br in &self.bridges {
            uf.union(br.terminals.0, br.terminals.1);
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for v in 0..n {
            groups.entry(uf.find(v)).or_default().push(v);
        }
        let mut components: Vec<Vec<usize>> = groups.into_values().collect();
        components.sort_by_key(|c| c[0]);
        Connectivity { connected: components.len() <= 1, components }
    }

    /// Distance from `p` to Γ (vertices, edges and bridge polylines).
    pub fn distance_to(&self, p: &[f64]) -> f64 {
        let mut best = self.vertices.iter().map(|v| dist(v, p)).fold(f64::INFINITY, f64::min);
        for &(a, b) in &self.edges {
            best = best.min(dist_point_segment(p, &self.vertices[a], &self.vertices[b]));
        }
        for br in &self.bridges {
            for w in br.polyline.windows(2) {
                best = best.min(dist_point_segment(p, &w[0], &w[1]));
            }
        }
        best
    }

    /// Copy of Γ without edge `i`; used as a negative control.
    pub fn without_edge(&self, i: usize) -> Gamma {
        let mut g = self.clone();
        g.edges.remove(i);
        g
    }
}
