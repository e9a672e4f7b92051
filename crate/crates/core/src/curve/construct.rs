use std::collections::{BTreeMap, BTreeSet};

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use super::gamma::{BridgePath, Gamma};
use super::hierarchy::NetHierarchy;
use crate::beta::fit_line;
use crate::error::{invalid, Error, Result};
use crate::geometry::{dist, dist_segment_segment, hausdorff_distance, segment_length_in_ball, Line, Point, BALL_TOL};
use crate::index::PointIndex;

/// Default flatness threshold; must stay below 1/32.
pub const DEFAULT_EPSILON: f64 = 1.0 / 33.0;

/// Best-fit line ℓ_{k,v} and flatness number α_{k,v} of one vertex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexAnnotation {
    pub line: Line,
    pub alpha: f64,
    pub flat: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Annotations {
    pub epsilon: f64,
    /// `vertices[k][i]` annotates vertex i of V_k.
    pub vertices: Vec<Vec<VertexAnnotation>>,
}

impl Annotations {
    pub fn is_flat(&self, k: usize, i: usize) -> bool {
        self.vertices[k][i].flat
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0 / 32.0) {
        return Err(invalid(format!("epsilon must lie in (0, 1/32), got {epsilon}")));
    }
    Ok(())
}

/// ℓ_{k,v}: unweighted best-fit line of (V_{k-1} ∪ V_k) ∩ B(v, 66 C* δ^{k-2} r0);
/// α_{k,v}: the largest distance from that window to ℓ_{k,v}, over δ^k r0.
pub fn annotate(h: &NetHierarchy, epsilon: f64) -> Result<Annotations> {
    check_epsilon(epsilon)?;
    let idx: Vec<PointIndex> = h.generations.iter().map(|g| PointIndex::new(g)).collect();
    let mut vertices = Vec::with_capacity(h.generations.len());
    for (k, gen) in h.generations.iter().enumerate() {
        let radius = 66.0 * h.cscale(k as i64 - 2);
        let ann: Vec<VertexAnnotation> = {
            use rayon::prelude::*;
            gen.par_iter()
                .map(|v| {
                    let mut pts: Vec<&[f64]> = idx[k].within(v, radius).into_iter().map(|i| gen[i].coords()).collect();
                    if k > 0 {
                        let prev = &h.generations[k - 1];
                        pts.extend(idx[k - 1].within(v, radius).into_iter().map(|i| prev[i].coords()));
                    }
                    let line = fit_line(&pts);
                    let sup = pts.iter().map(|p| line.dist(p)).fold(0.0, f64::max);
                    let alpha = sup / h.scale(k);
                    VertexAnnotation { line, alpha, flat: alpha < epsilon }
                })
                .collect()
        };
        vertices.push(ann);
    }
    Ok(Annotations { epsilon, vertices })
}

/// Outcome of the walk along ℓ_{k,v} on one side of a flat vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SideCase {
    NonTerminal,
    /// Terminal; Γ gets only the vertex on this side.
    Isolated,
    /// Terminal; a bridge to `partner` is added.
    Bridged {
        partner: usize,
    },
    /// The hierarchy violated an assumption needed to decide the side; treated
    /// as `Isolated`.
    Anomaly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum VertexCase {
    Base,
    Flat { right: SideCase, left: SideCase },
    NonFlat { semi_flat: bool },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BridgeRecord {
    pub generation: usize,
    pub ends: (usize, usize),
    pub flat: bool,
    /// Extension chains of the two ends: `chains[s][i]` is a vertex of
    /// V_{generation + i}.
    pub chains: [Vec<usize>; 2],
    pub span: f64,
    pub length: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthLedger {
    pub k: usize,
    pub edge_length: f64,
    pub bridge_length: f64,
    pub phantom_length: f64,
    pub alpha_sum: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub k: usize,
    pub edges: Vec<(usize, usize)>,
    pub new_bridges: Vec<usize>,
    pub phantom: Vec<(usize, usize)>,
    pub cases: Vec<VertexCase>,
    pub ledger: LengthLedger,
    pub components: usize,
    /// Vertices that satisfy the terminal-vertex hypotheses but are missing
    /// from the phantom set.
    pub terminal_violations: Vec<usize>,
}

/// Payment inequality for a terminal bridge: lhs <= rhs, recorded with both
/// the 23/27 and the 25/27 core factor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TerminalBridgePayment {
    pub k: usize,
    pub v: usize,
    pub partner: usize,
    pub lhs: f64,
    pub rhs_23: f64,
    pub rhs_25: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveChecks {
    pub all_generations_connected: bool,
    pub terminal_violations: usize,
    /// Pairs of flat bridges (by id) whose 9/10 cores intersect.
    pub overlapping_cores: Vec<(usize, usize)>,
    /// Bridges with H¹(B) > |v' - v''| + 4 C* δ^k r0 or > (32/30) |v' - v''|.
    pub bridge_bound_violations: Vec<usize>,
    /// (k, HD(V_k, V_kmax), 3 C* δ^k r0).
    pub hausdorff: Vec<(usize, f64, f64)>,
    pub hausdorff_ok: bool,
    /// Largest distance from a vertex of any generation to Γ.
    pub max_vertex_distance: f64,
    /// 2 δ^kmax r0.
    pub vertex_tolerance: f64,
    pub terminal_payments: Vec<TerminalBridgePayment>,
    /// Every terminal payment holds with the 25/27 factor.
    pub terminal_payments_ok: bool,
    pub anomalies: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveConstruction {
    pub r0: f64,
    pub delta: f64,
    pub c_star: f64,
    pub epsilon: f64,
    pub k0: Option<usize>,
    pub k_max: usize,
    pub generations: Vec<GenerationRecord>,
    pub bridges: Vec<BridgeRecord>,
    pub gamma: Gamma,
    pub h1: f64,
    /// r0 + Σ_{k>=1} Σ_v α²_{k,v} δ^k r0.
    pub bound: f64,
    pub ratio: f64,
    pub checks: CurveChecks,
}

type Pair = (usize, usize);

fn pair(a: usize, b: usize) -> Pair {
    (a.min(b), a.max(b))
}

struct Ctx<'a> {
    h: &'a NetHierarchy,
    ann: &'a Annotations,
    idx: Vec<PointIndex>,
    kk: usize,
    tol: f64,
}

impl Ctx<'_> {
    fn p(&self, k: usize, i: usize) -> &[f64] {
        self.h.generations[k][i].coords()
    }

    fn cs(&self, e: i64) -> f64 {
        self.h.cscale(e)
    }

    fn d(&self, k: usize, a: usize, b: usize) -> f64 {
        dist(self.p(k, a), self.p(k, b))
    }

    fn window(&self, k: usize, c: &[f64], r: f64) -> Vec<usize> {
        self.idx[k].within(c, r)
    }

    fn nearest(&self, k: usize, c: &[f64]) -> usize {
        self.idx[k].nearest(c).expect("non-empty generation").0
    }

    fn flat(&self, k: usize, i: usize) -> bool {
        self.ann.is_flat(k, i)
    }

    fn ordered(&self, k: usize, mut ids: Vec<usize>, line: &Line) -> Vec<usize> {
        let keys: BTreeMap<usize, f64> = ids.iter().map(|&i| (i, line.project(self.p(k, i)))).collect();
        ids.sort_by(|a, b| keys[a].total_cmp(&keys[b]).then(a.cmp(b)));
        ids
    }

    /// e[j, i]: nearest-vertex chain from vertex i of V_j down to V_kmax.
    fn extension(&self, j: usize, i: usize) -> Vec<usize> {
        let mut chain = vec![i];
        let mut cur = i;
        for g in j + 1..=self.kk {
            cur = self.nearest(g, self.p(g - 1, cur));
            chain.push(cur);
        }
        chain
    }

    fn chain_length(&self, j: usize, chain: &[usize]) -> f64 {
        chain.windows(2).enumerate().map(|(i, w)| dist(self.p(j + i, w[0]), self.p(j + i + 1, w[1]))).sum()
    }

    /// p_{j,u} = 3 C* δ^{j-1} r0.
    fn phantom_weight(&self, j: usize) -> f64 {
        3.0 * self.cs(j as i64 - 1)
    }
}

struct Bridges {
    list: Vec<BridgeRecord>,
    by_key: BTreeMap<(usize, Pair), usize>,
}

impl Bridges {
    fn add(&mut self, ctx: &Ctx<'_>, k: usize, a: usize, b: usize, flat: bool) -> (usize, bool) {
        let key = (k, pair(a, b));
        if let Some(&id) = self.by_key.get(&key) {
            return (id, false);
        }
        let (a, b) = key.1;
        let chains = [ctx.extension(k, a), ctx.extension(k, b)];
        let span = ctx.d(k, a, b);
        let length = span + ctx.chain_length(k, &chains[0]) + ctx.chain_length(k, &chains[1]);
        let id = self.list.len();
        self.list.push(BridgeRecord { generation: k, ends: (a, b), flat, chains, span, length });
        self.by_key.insert(key, id);
        (id, true)
    }

    /// I[k, v', v'']: the (generation, vertex) pairs of both extension chains.
    fn index_set(&self, id: usize) -> impl Iterator<Item = Pair> + '_ {
        let b = &self.list[id];
        b.chains.iter().flat_map(move |c| c.iter().enumerate().map(move |(i, &u)| (b.generation + i, u)))
    }
}

/// Builds Γ from a hierarchy and its annotations, generation by generation up
/// to `k_max`, recording the edge/bridge/phantom ledger of every generation.
pub fn construct(h: &NetHierarchy, ann: &Annotations, k_max: usize) -> Result<CurveConstruction> {
    check_epsilon(ann.epsilon)?;
    if k_max > h.k_max() {
        return Err(invalid(format!("k_max = {k_max} exceeds the hierarchy depth {}", h.k_max())));
    }
    if ann.vertices.len() < k_max + 1 || (0..=k_max).any(|k| ann.vertices[k].len() != h.generations[k].len()) {
        return Err(Error::Mismatch("annotations do not match the hierarchy".into()));
    }
    let truncated;
    let h = if k_max < h.k_max() {
        truncated = NetHierarchy { generations: h.generations[..=k_max].to_vec(), ..h.clone() };
        &truncated
    } else {
        h
    };
    let ctx = Ctx {
        h,
        ann,
        idx: h.generations.iter().map(|g| PointIndex::new(g)).collect(),
        kk: k_max,
        tol: BALL_TOL * h.r0.max(1.0),
    };
    let alpha_sums: Vec<f64> =
        (0..=k_max).map(|k| ann.vertices[k].iter().map(|a| a.alpha * a.alpha).sum::<f64>() * h.scale(k)).collect();
    let bound = h.r0 + alpha_sums.iter().skip(1).sum::<f64>();

    let k0 = (0..=k_max).find(|&k| (k..=k_max).all(|j| h.generations[j].len() >= 2));
    let mut bridges = Bridges { list: Vec::new(), by_key: BTreeMap::new() };
    let mut records: Vec<GenerationRecord> = Vec::new();
    let mut anomalies = Vec::new();
    let mut payments = Vec::new();

    if let Some(k0) = k0 {
        let mut phantom: BTreeSet<Pair> = BTreeSet::new();
        for k in k0..=k_max {
            let n = h.generations[k].len();
            let mut edges: BTreeSet<Pair> = BTreeSet::new();
            let mut new_bridges: Vec<usize> = Vec::new();
            let mut cases = vec![VertexCase::Base; n];
            if k == k0 {
                base_case(&ctx, k0, &mut edges);
                phantom = (0..n).map(|v| (k0, v)).collect();
            } else {
                phantom.retain(|&(g, _)| g != k - 1 && g != k);
                let mut pending = Vec::new();
                case_flat(
                    &ctx,
                    k,
                    &mut edges,
                    &mut bridges,
                    &mut new_bridges,
                    &mut phantom,
                    &mut cases,
                    &mut anomalies,
                    &mut pending,
                );
                case_non_flat(&ctx, k, &mut edges, &mut bridges, &mut new_bridges, &mut phantom, &mut cases);
                for (v, partner, id, far_gap) in pending {
                    payments.push(terminal_payment(&ctx, k, v, partner, far_gap, &bridges, id, &edges));
                }
            }
            let components = count_components(&ctx, k, &edges, &bridges.list);
            let terminal_violations = terminal_vertex_check(&ctx, k, &phantom);
            let ledger = LengthLedger {
                k,
                edge_length: edges.iter().map(|&(a, b)| ctx.d(k, a, b)).sum(),
                bridge_length: bridges.list.iter().filter(|b| b.generation <= k).map(|b| b.length).sum(),
                phantom_length: phantom.iter().map(|&(g, _)| ctx.phantom_weight(g)).sum(),
                alpha_sum: alpha_sums[k],
            };
            records.push(GenerationRecord {
                k,
                edges: edges.into_iter().collect(),
                new_bridges,
                phantom: phantom.iter().copied().collect(),
                cases,
                ledger,
                components,
                terminal_violations,
            });
        }
    }

    let gamma = final_gamma(&ctx, records.last(), &bridges.list);
    let h1 = gamma.length();
    let checks = run_checks(&ctx, &records, &bridges.list, &gamma, payments, anomalies)?;
    Ok(CurveConstruction {
        r0: h.r0,
        delta: h.delta,
        c_star: h.c_star,
        epsilon: ann.epsilon,
        k0,
        k_max,
        generations: records,
        bridges: bridges.list,
        gamma,
        h1,
        bound,
        ratio: h1 / bound,
        checks,
    })
}

/// Γ_{k0}: chain V_{k0} in the order induced by a flat vertex's line, else by
/// the line of a flat vertex of V_{k0+1} near a semi-flat vertex, else by index.
fn base_case(ctx: &Ctx<'_>, k0: usize, edges: &mut BTreeSet<Pair>) {
    let n = ctx.h.generations[k0].len();
    let all: Vec<usize> = (0..n).collect();
    let order = if let Some(v) = (0..n).find(|&v| ctx.flat(k0, v)) {
        ctx.ordered(k0, all, &ctx.ann.vertices[k0][v].line)
    } else if let Some((_, u)) = semi_flat_partner(ctx, k0) {
        ctx.ordered(k0, all, &ctx.ann.vertices[k0 + 1][u].line)
    } else {
        all
    };
    for w in order.windows(2) {
        edges.insert(pair(w[0], w[1]));
    }
}

/// First non-flat vertex y of V_k with a flat u ∈ V_{k+1}, |y - u| <= 32 C* δ^k r0.
fn semi_flat_partner(ctx: &Ctx<'_>, k: usize) -> Option<(usize, usize)> {
    (0..ctx.h.generations[k].len()).find_map(|y| semi_flat_of(ctx, k, y).map(|u| (y, u)))
}

fn semi_flat_of(ctx: &Ctx<'_>, k: usize, y: usize) -> Option<usize> {
    if k + 1 > ctx.kk || ctx.flat(k, y) {
        return None;
    }
    ctx.window(k + 1, ctx.p(k, y), 32.0 * ctx.cs(k as i64)).into_iter().find(|&u| ctx.flat(k + 1, u))
}

#[allow(clippy::too_many_arguments)]
fn case_flat(
    ctx: &Ctx<'_>,
    k: usize,
    edges: &mut BTreeSet<Pair>,
    bridges: &mut Bridges,
    new_bridges: &mut Vec<usize>,
    phantom: &mut BTreeSet<Pair>,
    cases: &mut [VertexCase],
    anomalies: &mut Vec<String>,
    pending: &mut Vec<(usize, usize, usize, f64)>,
) {
    let n = ctx.h.generations[k].len();
    let edge_cut = 30.0 * ctx.cs(k as i64 - 1);
    let prev_cut = 30.0 * ctx.cs(k as i64 - 2);
    for v in (0..n).filter(|&v| ctx.flat(k, v)) {
        let pv = ctx.p(k, v);
        let line = &ctx.ann.vertices[k][v].line;
        let w = ctx.ordered(k, ctx.window(k, pv, 66.0 * ctx.cs(k as i64 - 2)), line);
        let pos = w.iter().position(|&x| x == v).expect("vertex lies in its own window") as i64;
        let mut sides = [SideCase::NonTerminal; 2];
        for (side, dir) in [(0usize, 1i64), (1, -1)] {
            let mut t = 0;
            let mut cur = pos;
            loop {
                let nx = cur + dir;
                if nx < 0 || nx >= w.len() as i64 {
                    break;
                }
                let (a, b) = (w[cur as usize], w[nx as usize]);
                if ctx.d(k, a, b) >= edge_cut || dist(ctx.p(k, b), pv) > edge_cut + ctx.tol {
                    break;
                }
                edges.insert(pair(a, b));
                t += 1;
                cur = nx;
            }
            if t > 0 {
                continue;
            }
            let wv = ctx.nearest(k - 1, pv);
            let list = ctx.ordered(k - 1, ctx.window(k - 1, pv, 33.0 * ctx.cs(k as i64 - 2)), line);
            let Some(p0) = list.iter().position(|&x| x == wv) else {
                anomalies.push(format!("k={k} v={v}: closest predecessor outside the 33C*δ^(k-2) window"));
                sides[side] = SideCase::Anomaly;
                phantom.insert((k, v));
                continue;
            };
            let seq: Vec<usize> =
                if dir > 0 { list[p0..].to_vec() } else { list[..=p0].iter().rev().copied().collect() };
            let small = ctx.cs(k as i64 - 2) + ctx.tol;
            let r = (0..seq.len()).filter(|&i| dist(ctx.p(k - 1, seq[i]), pv) <= small).max().unwrap_or(0);
            let isolated = r + 1 >= seq.len() || ctx.d(k - 1, seq[r], seq[r + 1]) >= prev_cut;
            if isolated {
                sides[side] = SideCase::Isolated;
                phantom.insert((k, v));
                continue;
            }
            let nx = pos + dir;
            if nx < 0 || nx >= w.len() as i64 {
                anomalies.push(format!("k={k} v={v}: terminal bridge partner missing"));
                sides[side] = SideCase::Anomaly;
                phantom.insert((k, v));
                continue;
            }
            let partner = w[nx as usize];
            let (id, fresh) = bridges.add(ctx, k, v, partner, true);
            if fresh {
                new_bridges.push(id);
            }
            phantom.extend(bridges.index_set(id));
            sides[side] = SideCase::Bridged { partner };
            pending.push((v, partner, id, ctx.d(k - 1, seq[r], seq[r + 1])));
        }
        cases[v] = VertexCase::Flat { right: sides[0], left: sides[1] };
    }
}

/// S_k: edges of V_k walked from each semi-flat vertex along the line of its
/// flat partner in V_{k+1}, within 33 C* δ^{k-1} r0, stopping at gaps of
/// 30 C* δ^{k-1} r0.
fn semi_flat_edges(ctx: &Ctx<'_>, k: usize, semi: &mut [bool]) -> BTreeSet<Pair> {
    let mut out = BTreeSet::new();
    let cut = 30.0 * ctx.cs(k as i64 - 1);
    for y in 0..ctx.h.generations[k].len() {
        let Some(u) = semi_flat_of(ctx, k, y) else { continue };
        semi[y] = true;
        let line = &ctx.ann.vertices[k + 1][u].line;
        let w = ctx.ordered(k, ctx.window(k, ctx.p(k, y), 33.0 * ctx.cs(k as i64 - 1)), line);
        let pos = w.iter().position(|&x| x == y).expect("vertex lies in its own window") as i64;
        for dir in [1i64, -1] {
            let mut cur = pos;
            loop {
                let nx = cur + dir;
                if nx < 0 || nx >= w.len() as i64 {
                    break;
                }
                let (a, b) = (w[cur as usize], w[nx as usize]);
                if ctx.d(k, a, b) >= cut {
                    break;
                }
                out.insert(pair(a, b));
                cur = nx;
            }
        }
    }
    out
}

fn case_non_flat(
    ctx: &Ctx<'_>,
    k: usize,
    edges: &mut BTreeSet<Pair>,
    bridges: &mut Bridges,
    new_bridges: &mut Vec<usize>,
    phantom: &mut BTreeSet<Pair>,
    cases: &mut [VertexCase],
) {
    let n = ctx.h.generations[k].len();
    let mut semi = vec![false; n];
    let s_edges = semi_flat_edges(ctx, k, &mut semi);
    let flat_bridges: BTreeSet<Pair> = bridges.by_key.keys().filter(|(g, _)| *g == k).map(|&(_, p)| p).collect();
    let flat_edges = edges.clone();
    let mut incident: Vec<Vec<Pair>> = vec![Vec::new(); n];
    for &e in flat_edges.iter().chain(&s_edges).chain(&flat_bridges) {
        incident[e.0].push(e);
        incident[e.1].push(e);
    }
    let radius = 33.0 * ctx.cs(k as i64 - 2);
    let mut local: Vec<(usize, BTreeSet<Pair>, Vec<Pair>)> = Vec::new();
    let mut union_edges: BTreeSet<Pair> = BTreeSet::new();
    let mut stitch: BTreeSet<Pair> = BTreeSet::new();
    for v in (0..n).filter(|&v| !ctx.flat(k, v)) {
        cases[v] = VertexCase::NonFlat { semi_flat: semi[v] };
        let pv = ctx.p(k, v);
        let win = ctx.window(k, pv, radius);
        let e_kv: BTreeSet<Pair> = win.iter().flat_map(|&x| incident[x].iter().copied()).collect();
        let mut verts: BTreeSet<usize> = win.iter().copied().collect();
        for &(a, b) in &e_kv {
            verts.insert(a);
            verts.insert(b);
        }
        for &x in &win {
            if !ctx.flat(k, x) {
                phantom.insert((k, x));
            }
        }
        let verts: Vec<usize> = verts.into_iter().collect();
        let pos: BTreeMap<usize, usize> = verts.iter().enumerate().map(|(i, &x)| (x, i)).collect();
        let mut uf = UnionFind::new(verts.len());
        for &(a, b) in &e_kv {
            uf.union(pos[&a], pos[&b]);
        }
        let mut comps: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &x) in verts.iter().enumerate() {
            comps.entry(uf.find(i)).or_default().push(x);
        }
        let mut e_prime = Vec::new();
        if comps.len() > 1 {
            let in_ball: BTreeSet<usize> = win.iter().copied().collect();
            let key = |x: &usize| (ctx.d(k, *x, v), *x);
            let mut reps: Vec<usize> = comps
                .values()
                .map(|members| {
                    let pick = |f: &dyn Fn(&usize) -> bool| {
                        members
                            .iter()
                            .filter(|x| f(x))
                            .min_by(|a, b| {
                                let (ka, kb) = (key(a), key(b));
                                ka.0.total_cmp(&kb.0).then(ka.1.cmp(&kb.1))
                            })
                            .copied()
                    };
                    pick(&|x| !ctx.flat(k, *x) && in_ball.contains(x))
                        .or_else(|| pick(&|x| !ctx.flat(k, *x)))
                        .or_else(|| pick(&|_| true))
                        .expect("non-empty component")
                })
                .collect();
            let line = &ctx.ann.vertices[k][v].line;
            reps = ctx.ordered(k, reps, line);
            e_prime = reps.windows(2).map(|w| pair(w[0], w[1])).collect();
            stitch.extend(e_prime.iter().copied());
        }
        union_edges.extend(e_kv.iter().copied());
        local.push((v, e_kv, e_prime));
    }

    // Cycle removal over the stitching edges: shortest first.
    let mut sorted: Vec<Pair> = stitch.into_iter().collect();
    sorted.sort_by(|a, b| ctx.d(k, a.0, a.1).total_cmp(&ctx.d(k, b.0, b.1)).then(a.cmp(b)));
    let mut uf = UnionFind::new(n);
    let forest: BTreeSet<Pair> = sorted.into_iter().filter(|&(a, b)| uf.union(a, b)).collect();

    let cut = 30.0 * ctx.cs(k as i64 - 1);
    let mut bridge_of: BTreeMap<Pair, usize> = flat_bridges.iter().map(|&p| (p, bridges.by_key[&(k, p)])).collect();
    for &e in union_edges.iter().chain(&forest) {
        if flat_edges.contains(&e) || bridge_of.contains_key(&e) {
            continue;
        }
        if ctx.d(k, e.0, e.1) < cut {
            edges.insert(e);
        } else {
            let (id, fresh) = bridges.add(ctx, k, e.0, e.1, false);
            if fresh {
                new_bridges.push(id);
            }
            bridge_of.insert(e, id);
        }
    }
    for (_, e_kv, e_prime) in &local {
        let kept = e_prime.iter().filter(|e| forest.contains(e));
        for e in e_kv.iter().chain(kept) {
            if let Some(&id) = bridge_of.get(e) {
                let set: Vec<Pair> = bridges.index_set(id).collect();
                phantom.extend(set);
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn terminal_payment(
    ctx: &Ctx<'_>,
    k: usize,
    v: usize,
    partner: usize,
    far_gap: f64,
    bridges: &Bridges,
    id: usize,
    edges: &BTreeSet<Pair>,
) -> TerminalBridgePayment {
    let b = &bridges.list[id];
    let p: f64 = bridges.index_set(id).map(|(g, _)| ctx.phantom_weight(g)).sum();
    let near: f64 = edges
        .iter()
        .map(|&(a, c)| segment_length_in_ball(ctx.p(k, a), ctx.p(k, c), ctx.p(k, v), 2.0 * ctx.cs(k as i64)))
        .sum();
    let core = 0.9 * b.span;
    let lhs = b.length + p + near;
    TerminalBridgePayment {
        k,
        v,
        partner,
        lhs,
        rhs_23: far_gap + 23.0 / 27.0 * core,
        rhs_25: far_gap + 25.0 / 27.0 * core,
    }
}

fn count_components(ctx: &Ctx<'_>, k: usize, edges: &BTreeSet<Pair>, bridges: &[BridgeRecord]) -> usize {
    let n = ctx.h.generations[k].len();
    let mut uf = UnionFind::new(n);
    for &(a, b) in edges {
        uf.union(a, b);
    }
    for br in bridges.iter().filter(|b| b.generation <= k) {
        let i = k - br.generation;
        uf.union(br.chains[0][i], br.chains[1][i]);
    }
    (0..n).filter(|&v| uf.find(v) == v).count()
}

/// Vertices v with a line ℓ such that V_k ∩ B(v, 30 C* δ^{k-1} r0) lies within
/// ε δ^k r0 of ℓ and with no neighbour on one side of v along ℓ must belong to
/// Phantom(k). The test line is the best-fit line of that window.
fn terminal_vertex_check(ctx: &Ctx<'_>, k: usize, phantom: &BTreeSet<Pair>) -> Vec<usize> {
    let gen = &ctx.h.generations[k];
    let radius = 30.0 * ctx.cs(k as i64 - 1);
    let slack = ctx.ann.epsilon * ctx.h.scale(k);
    (0..gen.len())
        .filter(|&v| {
            let win = ctx.window(k, gen[v].coords(), radius);
            let pts: Vec<&[f64]> = win.iter().map(|&i| gen[i].coords()).collect();
            let line = fit_line(&pts);
            if pts.iter().any(|p| line.dist(p) >= slack) {
                return false;
            }
            let order = ctx.ordered(k, win, &line);
            let extreme = order.first() == Some(&v) || order.last() == Some(&v);
            extreme && !phantom.contains(&(k, v))
        })
        .collect()
}

fn final_gamma(ctx: &Ctx<'_>, last: Option<&GenerationRecord>, bridges: &[BridgeRecord]) -> Gamma {
    let kk = ctx.kk;
    let vertices = ctx.h.generations[kk].clone();
    let edges = last.map(|r| r.edges.clone()).unwrap_or_default();
    let bridges = bridges
        .iter()
        .map(|b| {
            let j = b.generation;
            let mut polyline: Vec<Point> =
                b.chains[0].iter().enumerate().rev().map(|(i, &u)| ctx.h.generations[j + i][u].clone()).collect();
            polyline.extend(b.chains[1].iter().enumerate().map(|(i, &u)| ctx.h.generations[j + i][u].clone()));
            BridgePath {
                generation: j,
                ends: b.ends,
                polyline,
                terminals: (*b.chains[0].last().expect("chain"), *b.chains[1].last().expect("chain")),
                span: b.span,
                flat: b.flat,
            }
        })
        .collect();
    Gamma { vertices, edges, bridges }
}

fn run_checks(
    ctx: &Ctx<'_>,
    records: &[GenerationRecord],
    bridges: &[BridgeRecord],
    gamma: &Gamma,
    terminal_payments: Vec<TerminalBridgePayment>,
    anomalies: Vec<String>,
) -> Result<CurveChecks> {
    let h = ctx.h;
    let flat: Vec<usize> = (0..bridges.len()).filter(|&i| bridges[i].flat).collect();
    let core = |b: &BridgeRecord| {
        let (a, c) = (ctx.p(b.generation, b.ends.0), ctx.p(b.generation, b.ends.1));
        let lo: Vec<f64> = a.iter().zip(c).map(|(x, y)| x + 0.05 * (y - x)).collect();
        let hi: Vec<f64> = a.iter().zip(c).map(|(x, y)| y - 0.05 * (y - x)).collect();
        (lo, hi)
    };
    let mut overlapping_cores = Vec::new();
    for (n, &i) in flat.iter().enumerate() {
        let (a0, a1) = core(&bridges[i]);
        for &j in &flat[n + 1..] {
            let (b0, b1) = core(&bridges[j]);
            if dist_segment_segment(&a0, &a1, &b0, &b1) <= ctx.tol {
                overlapping_cores.push((i, j));
            }
        }
    }
    let bridge_bound_violations = (0..bridges.len())
        .filter(|&i| {
            let b = &bridges[i];
            let slack = 4.0 * ctx.cs(b.generation as i64);
            b.length > b.span + slack + ctx.tol || b.length > 32.0 / 30.0 * b.span + ctx.tol
        })
        .collect();
    let finest = &h.generations[ctx.kk];
    let mut hausdorff = Vec::new();
    for k in 0..=ctx.kk {
        let hd = hausdorff_distance(&h.generations[k], finest)?;
        hausdorff.push((k, hd, 3.0 * ctx.cs(k as i64)));
    }
    let hausdorff_ok = hausdorff.iter().all(|&(_, hd, b)| hd <= b + ctx.tol);
    let max_vertex_distance = {
        use rayon::prelude::*;
        h.generations[..=ctx.kk]
            .par_iter()
            .flat_map(|g| g.par_iter().map(|v| gamma.distance_to(v)))
            .reduce(|| 0.0, f64::max)
    };
    let terminal_payments_ok = terminal_payments.iter().all(|p| p.lhs <= p.rhs_25 + ctx.tol);
    Ok(CurveChecks {
        all_generations_connected: records.iter().all(|r| r.components == 1),
        terminal_violations: records.iter().map(|r| r.terminal_violations.len()).sum(),
        overlapping_cores,
        bridge_bound_violations,
        hausdorff,
        hausdorff_ok,
        max_vertex_distance,
        vertex_tolerance: 2.0 * h.scale(ctx.kk),
        terminal_payments,
        terminal_payments_ok,
        anomalies,
    })
}
