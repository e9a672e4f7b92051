//! The pipeline steps behind each subcommand, shared with `run`.

use std::path::{Path, PathBuf};

use serde::Serialize;

use rectify_core::cones::{classify_graph_rectifiable, direction_grid, geometric_radii, ConeLabel};
use rectify_core::curve::{annotate, construct, CurveConstruction, NetHierarchy};
use rectify_core::io::{self, tree_file, GammaFile, MeasureFile, TreeFile};
use rectify_core::jones::{fine_scale_slope, sample_atoms, JonesEngine, JonesLabel};
use rectify_core::measures::generate;
use rectify_core::nets::{build_family, recommended_k0};
use rectify_core::trees::{beta_payoff, build_cores, build_tree, default_c, good_bad, leaves_curve};
use rectify_core::{BallId, DiscreteMeasure, MPlane, MeasureSpec, MultiresolutionFamily};

use crate::config::{ConesParams, CurveParams, ExperimentConfig, FamilyParams, JonesParams, TreesParams};
use crate::error::{CliError, CliResult};
use crate::svg;

/// Resolves a user path against the output directory.
pub fn out_path(out_dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        out_dir.join(p)
    }
}

pub fn csv_text<R: Serialize>(rows: &[R]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Compute(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Compute(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn generate_measure(spec: &MeasureSpec, n: usize, seed: u64) -> CliResult<DiscreteMeasure> {
    Ok(generate(spec, n, seed)?)
}

pub fn family(mu: &DiscreteMeasure, p: &FamilyParams) -> CliResult<MultiresolutionFamily> {
    p.validate()?;
    let k0 = p.k0.unwrap_or_else(|| recommended_k0(mu.diameter()));
    if p.k_max < k0 {
        return Err(CliError::input(format!("k_max = {} is below k0 = {k0}", p.k_max)));
    }
    Ok(build_family(mu, k0, p.k_max, p.lambda2, p.j_param)?)
}

#[derive(Debug, Serialize)]
pub struct BetaRow {
    pub k: i32,
    pub ball_index: usize,
    pub beta2: f64,
    pub mass: f64,
    pub diam: f64,
}

/// β₂(μ, 2B), μ(B) and diam B for every family ball.
pub fn beta_rows(engine: &JonesEngine<'_>) -> Vec<BetaRow> {
    let fam = engine.family();
    fam.ball_ids()
        .map(|id| {
            let s = engine.stats(id);
            BetaRow { k: id.k, ball_index: id.j, beta2: s.beta2, mass: s.mass, diam: 2.0 * fam.radius(id.k) }
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct JonesRow {
    pub point_id: usize,
    pub k: i32,
    pub partial_sum: f64,
    pub label: &'static str,
}

/// Partial sums of Ĵ₂ at each point, labelled by the fine-scale slope.
pub fn jones_rows(engine: &JonesEngine<'_>, points: &[Vec<f64>], p: &JonesParams) -> CliResult<Vec<JonesRow>> {
    p.validate()?;
    if engine.family().levels.len() < 4 {
        return Err(CliError::Compute("classification needs at least 4 scales".into()));
    }
    let r = p.r.unwrap_or(f64::INFINITY);
    let mut rows = Vec::new();
    for (point_id, x) in points.iter().enumerate() {
        let profile = engine.profile(x, r)?;
        let label =
            if fine_scale_slope(&profile) > p.slope_threshold { JonesLabel::Divergent } else { JonesLabel::Bounded };
        rows.extend(profile.partial_sums.iter().map(|(&k, &s)| JonesRow {
            point_id,
            k,
            partial_sum: s,
            label: label.as_str(),
        }));
    }
    Ok(rows)
}

pub fn hierarchy(mu: &DiscreteMeasure, p: &CurveParams) -> CliResult<NetHierarchy> {
    p.validate()?;
    Ok(NetHierarchy::from_points(mu.atoms(), p.delta, p.k_max, p.c_star)?)
}

pub fn curve(h: &NetHierarchy, epsilon: f64) -> CliResult<CurveConstruction> {
    if !(epsilon > 0.0 && epsilon < 1.0 / 32.0) {
        return Err(CliError::input(format!("epsilon must lie in (0, 1/32), got {epsilon}")));
    }
    let ann = annotate(h, epsilon)?;
    Ok(construct(h, &ann, h.k_max())?)
}

pub struct TreeOutput {
    pub file: TreeFile,
    pub leaves: Option<GammaFile>,
}

pub fn trees(
    mu: &DiscreteMeasure,
    fam: &MultiresolutionFamily,
    p: &TreesParams,
    curve_epsilon: f64,
) -> CliResult<TreeOutput> {
    let c = p.c.unwrap_or_else(|| default_c(fam.lambda2, fam.j_param));
    let cores = build_cores(mu, fam, c, fam.j_param)?;
    let top = BallId { k: p.top_k.unwrap_or(fam.k0), j: p.top_j };
    let tree = build_tree(&cores, mu, fam, top)?;
    let b = beta_payoff(&tree, mu)?;
    let part = good_bad(&tree, mu, &b, p.n_threshold, p.epsilon, tree.c)?;
    let leaves = if p.leaves_curve {
        Some(GammaFile::from(&leaves_curve(&tree, mu, curve_epsilon)?.construction))
    } else {
        None
    };
    Ok(TreeOutput { file: tree_file(&tree, Some(&b), Some(&part)), leaves })
}

/// Lines of the first coordinate plane plus the remaining axes when m = 1;
/// every coordinate m-plane otherwise.
pub fn plane_grid(dim: usize, m: usize, directions: usize) -> CliResult<Vec<MPlane>> {
    if m == 0 || m >= dim {
        return Err(CliError::input(format!("plane dimension m = {m} must lie in 1..{dim}")));
    }
    if m == 1 {
        let mut planes = direction_grid(dim, directions)?;
        for axis in 2..dim {
            planes.push(MPlane::coordinate_axes(dim, &[axis])?);
        }
        return Ok(planes);
    }
    let mut planes = Vec::new();
    let mut pick: Vec<usize> = (0..m).collect();
    loop {
        planes.push(MPlane::coordinate_axes(dim, &pick)?);
        let Some(i) = (0..m).rev().find(|&i| pick[i] < dim - m + i) else { break };
        pick[i] += 1;
        for t in i + 1..m {
            pick[t] = pick[t - 1] + 1;
        }
    }
    Ok(planes)
}

#[derive(Debug, Serialize)]
pub struct ConeRow {
    pub atom_id: usize,
    pub label: &'static str,
    #[serde(rename = "best_V")]
    pub best_v: Option<usize>,
    pub best_alpha: Option<f64>,
    pub min_ratio: f64,
}

pub fn cones(mu: &DiscreteMeasure, p: &ConesParams, seed: u64) -> CliResult<Vec<ConeLabel>> {
    p.validate()?;
    let planes = plane_grid(mu.dim(), p.m, p.directions)?;
    let r_max = p.r_max.unwrap_or(mu.diameter() / 2.0);
    if !(r_max > 0.0) {
        return Err(CliError::Compute("measure has zero diameter; give cones.r_max".into()));
    }
    let radii = geometric_radii(r_max, p.r_factor, p.r_count);
    let mut atoms = match p.samples {
        Some(s) => sample_atoms(mu.len(), s, seed),
        None => (0..mu.len()).collect(),
    };
    atoms.sort_unstable();
    Ok(classify_graph_rectifiable(mu, &atoms, &planes, &p.alphas, &radii, p.threshold)?)
}

pub fn cone_rows(labels: &[ConeLabel]) -> Vec<ConeRow> {
    labels
        .iter()
        .map(|l| ConeRow {
            atom_id: l.atom,
            label: if l.positive { "graph" } else { "none" },
            best_v: l.plane,
            best_alpha: l.alpha,
            min_ratio: l.min_ratio,
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub atoms: usize,
    pub dim: usize,
    pub family_levels: usize,
    pub h1: f64,
    pub bound: f64,
    pub ratio: f64,
    pub connected: bool,
    pub bridges: usize,
    pub jones_divergent_fraction: Option<f64>,
    pub tree_nodes: Option<usize>,
    pub cone_positive_fraction: Option<f64>,
}

/// Runs every configured step and returns (file name, contents) pairs in
/// write order; nothing touches the disk here.
pub fn run(cfg: &ExperimentConfig) -> CliResult<Vec<(String, String)>> {
    cfg.validate()?;
    let mut files = Vec::new();
    let mu = generate_measure(&cfg.measure.spec, cfg.measure.n, cfg.seed)?;
    files.push(("measure.json".to_string(), io::to_json(&MeasureFile::from(&mu))));
    let fam = family(&mu, &cfg.family)?;
    files.push(("family.json".to_string(), io::to_json(&fam)));

    let h = hierarchy(&mu, &cfg.curve)?;
    files.push(("hierarchy.json".to_string(), io::to_json(&h)));
    let c = curve(&h, cfg.curve.epsilon)?;
    let gamma = GammaFile::from(&c);
    files.push(("gamma.json".to_string(), io::to_json(&gamma)));
    if cfg.output.svg {
        files.push(("gamma.svg".to_string(), svg::render_gamma(&c.gamma, (0, 1))?));
    }

    let mut jones_divergent_fraction = None;
    if let Some(jp) = &cfg.jones {
        let engine = JonesEngine::new(&mu, &fam)?;
        files.push(("betas.csv".to_string(), csv_text(&beta_rows(&engine))?));
        let mut atoms = sample_atoms(mu.len(), jp.samples, cfg.seed);
        atoms.sort_unstable();
        let points: Vec<Vec<f64>> = atoms.iter().map(|&a| mu.atom(a).to_vec()).collect();
        files.push(("jones_points.json".to_string(), io::to_json(&points)));
        let rows = jones_rows(&engine, &points, jp)?;
        let mut labels: Vec<(usize, &str)> = rows.iter().map(|r| (r.point_id, r.label)).collect();
        labels.dedup();
        let div = labels.iter().filter(|l| l.1 == "divergent").count();
        jones_divergent_fraction = Some(div as f64 / labels.len().max(1) as f64);
        files.push(("jones.csv".to_string(), csv_text(&rows)?));
    }

    let mut tree_nodes = None;
    if let Some(tp) = &cfg.trees {
        let out = trees(&mu, &fam, tp, cfg.curve.epsilon)?;
        tree_nodes = Some(out.file.nodes.len());
        files.push(("tree.json".to_string(), io::to_json(&out.file)));
        if let Some(l) = out.leaves {
            files.push(("leaves_gamma.json".to_string(), io::to_json(&l)));
        }
    }

    let mut cone_positive_fraction = None;
    if let Some(cp) = &cfg.cones {
        let labels = cones(&mu, cp, cfg.seed)?;
        let pos = labels.iter().filter(|l| l.positive).count();
        cone_positive_fraction = Some(pos as f64 / labels.len().max(1) as f64);
        files.push(("cones.csv".to_string(), csv_text(&cone_rows(&labels))?));
        if cfg.output.svg && mu.dim() >= 2 {
            let pts: Vec<Vec<f64>> = labels.iter().map(|l| mu.atom(l.atom).to_vec()).collect();
            let names: Vec<String> =
                labels.iter().map(|l| if l.positive { "graph" } else { "none" }.to_string()).collect();
            files.push(("cones.svg".to_string(), svg::render_labels(&pts, &names, (0, 1))?));
        }
    }

    let summary = RunSummary {
        seed: cfg.seed,
        atoms: mu.len(),
        dim: mu.dim(),
        family_levels: fam.levels.len(),
        h1: c.h1,
        bound: c.bound,
        ratio: c.ratio,
        connected: c.checks.all_generations_connected,
        bridges: c.bridges.len(),
        jones_divergent_fraction,
        tree_nodes,
        cone_positive_fraction,
    };
    files.push(("summary.json".to_string(), io::to_json(&summary)));
    Ok(files)
}
