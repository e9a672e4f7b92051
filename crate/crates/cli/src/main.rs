use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rectify_cli::commands::{self, out_path};
use rectify_cli::config::{ConesParams, CurveParams, FamilyParams, JonesParams, TreesParams};
use rectify_cli::{svg, CliError, CliResult, ExperimentConfig};
use rectify_core::io::{self, GammaFile, MeasureFile};
use rectify_core::jones::{sample_atoms, JonesEngine};
use rectify_core::{MeasureSpec, MultiresolutionFamily};

#[derive(Parser)]
#[command(name = "rectify", version, about = "Rectifiability diagnostics for discrete measures")]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (all cores when absent).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory that relative output paths are resolved against.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic measure.
    Gen(GenArgs),
    /// Build a multiresolution family, optionally with a β₂ table.
    Family(FamilyArgs),
    /// Jones partial-sum profiles and bounded/divergent labels.
    Jones(JonesArgs),
    /// Construct a curve through a net hierarchy.
    Curve(CurveArgs),
    /// Build a ball tree, its good/bad partition and the curve through its leaves.
    Trees(TreesArgs),
    /// Cone-density labels for Lipschitz-graph rectifiability.
    Cones(ConesArgs),
    /// Run a full experiment from a TOML config.
    Run(RunArgs),
    /// Render a curve or a labelled point set as SVG.
    Render(RenderArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    kind: String,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long)]
    dim: Option<usize>,
    /// Segment length.
    #[arg(long)]
    length: Option<f64>,
    /// Circle radius.
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    lipschitz: Option<f64>,
    #[arg(long)]
    pieces: Option<usize>,
    #[arg(long)]
    slope_jitter: Option<f64>,
    #[arg(long)]
    param_jitter: bool,
    /// Cantor construction depth.
    #[arg(long)]
    depth: Option<u32>,
    #[arg(long, default_value = "measure.json")]
    out: PathBuf,
}

#[derive(Args)]
struct FamilyArgs {
    #[arg(long)]
    measure: PathBuf,
    #[arg(long)]
    k0: Option<i32>,
    #[arg(long, default_value_t = 10)]
    k_max: i32,
    #[arg(long, default_value_t = 1.1)]
    lambda2: f64,
    #[arg(long = "J", default_value_t = 10)]
    j_param: u32,
    #[arg(long, default_value = "family.json")]
    out: PathBuf,
    /// Also write (k, ball_index, beta2, mass, diam) for every ball.
    #[arg(long)]
    betas: Option<PathBuf>,
}

#[derive(Args)]
struct JonesArgs {
    #[arg(long)]
    measure: PathBuf,
    #[arg(long)]
    family: PathBuf,
    /// JSON array of points; seeded atom samples when absent.
    #[arg(long)]
    points: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long, default_value_t = rectify_core::jones::DEFAULT_SLOPE_THRESHOLD)]
    slope_threshold: f64,
    #[arg(long, default_value = "profile.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct CurveArgs {
    /// Hierarchy JSON; built from --measure when absent.
    #[arg(long, conflicts_with = "measure")]
    hierarchy: Option<PathBuf>,
    #[arg(long)]
    measure: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
    #[arg(long, default_value_t = 10)]
    k_max: usize,
    #[arg(long)]
    c_star: Option<f64>,
    #[arg(long, default_value_t = rectify_core::curve::DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value = "gamma.json")]
    out: PathBuf,
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Write the hierarchy built from --measure.
    #[arg(long)]
    hierarchy_out: Option<PathBuf>,
}

#[derive(Args)]
struct TreesArgs {
    #[arg(long)]
    measure: PathBuf,
    #[arg(long)]
    family: PathBuf,
    #[arg(long)]
    top_k: Option<i32>,
    #[arg(long, default_value_t = 0)]
    top_j: usize,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long = "N", default_value_t = 10.0)]
    n_threshold: f64,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Flatness threshold for the curve through the leaves.
    #[arg(long, default_value_t = rectify_core::curve::DEFAULT_EPSILON)]
    curve_epsilon: f64,
    #[arg(long, default_value = "tree.json")]
    out: PathBuf,
    /// Also build the curve through the leaves and write it here.
    #[arg(long)]
    leaves_out: Option<PathBuf>,
}

#[derive(Args)]
struct ConesArgs {
    #[arg(long)]
    measure: PathBuf,
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long, default_value_t = 8)]
    directions: usize,
    /// Comma-separated apertures in (0, 1).
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    #[arg(long)]
    r_max: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    r_factor: f64,
    #[arg(long, default_value_t = 8)]
    r_count: usize,
    #[arg(long, default_value_t = 0.01)]
    threshold: f64,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value = "labels.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long, conflicts_with = "labels")]
    gamma: Option<PathBuf>,
    /// Cones CSV; needs --measure.
    #[arg(long, requires = "measure")]
    labels: Option<PathBuf>,
    #[arg(long)]
    measure: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "0,1")]
    axes: Vec<usize>,
    #[arg(long, default_value = "figure.svg")]
    out: PathBuf,
}

fn gen_spec(a: &GenArgs) -> CliResult<MeasureSpec> {
    let mut spec = MeasureSpec::default_for(&a.kind)?;
    match &mut spec {
        MeasureSpec::Segment { length, dim } => {
            *length = a.length.unwrap_or(*length);
            *dim = a.dim.unwrap_or(*dim);
        }
        MeasureSpec::Circle { radius, dim } => {
            *radius = a.radius.unwrap_or(*radius);
            *dim = a.dim.unwrap_or(*dim);
        }
        MeasureSpec::LipschitzGraph { lipschitz, pieces, slope_jitter, param_jitter, dim, .. } => {
            *lipschitz = a.lipschitz.unwrap_or(*lipschitz);
            *pieces = a.pieces.unwrap_or(*pieces);
            *slope_jitter = a.slope_jitter.unwrap_or(*slope_jitter);
            *param_jitter |= a.param_jitter;
            *dim = a.dim.unwrap_or(*dim);
        }
        MeasureSpec::Cantor4 { depth, dim } => {
            *depth = a.depth.unwrap_or(*depth);
            *dim = a.dim.unwrap_or(*dim);
        }
        MeasureSpec::PlaneStack { dim, .. } => {
            *dim = a.dim.unwrap_or(*dim);
        }
    }
    Ok(spec)
}

fn read_family(path: &Path) -> CliResult<MultiresolutionFamily> {
    Ok(io::read_json(path)?)
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    Ok(io::write_text(path, text)?)
}

fn execute(cli: Cli) -> CliResult<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::input(format!("--threads: {e}")))?;
    }
    let dir = cli.out_dir.as_path();
    match cli.command {
        Command::Gen(a) => {
            let spec = gen_spec(&a)?;
            let mu = commands::generate_measure(&spec, a.n, cli.seed)?;
            write(&out_path(dir, &a.out), &io::to_json(&MeasureFile::from(&mu)))
        }
        Command::Family(a) => {
            let mu = io::read_measure(&a.measure)?;
            let p = FamilyParams { k0: a.k0, k_max: a.k_max, lambda2: a.lambda2, j_param: a.j_param };
            let fam = commands::family(&mu, &p)?;
            let mut outputs = vec![(out_path(dir, &a.out), io::to_json(&fam))];
            if let Some(b) = &a.betas {
                let engine = JonesEngine::new(&mu, &fam)?;
                outputs.push((out_path(dir, b), commands::csv_text(&commands::beta_rows(&engine))?));
            }
            outputs.iter().try_for_each(|(p, t)| write(p, t))
        }
        Command::Jones(a) => {
            let mu = io::read_measure(&a.measure)?;
            let fam = read_family(&a.family)?;
            let points: Vec<Vec<f64>> = match &a.points {
                Some(p) => io::read_points(p)?.into_iter().map(|p| p.into_inner()).collect(),
                None => {
                    let mut atoms = sample_atoms(mu.len(), a.samples, cli.seed);
                    atoms.sort_unstable();
                    atoms.iter().map(|&i| mu.atom(i).to_vec()).collect()
                }
            };
            let engine = JonesEngine::new(&mu, &fam)?;
            let p = JonesParams { r: a.r, slope_threshold: a.slope_threshold, samples: a.samples.max(1) };
            let rows = commands::jones_rows(&engine, &points, &p)?;
            write(&out_path(dir, &a.out), &commands::csv_text(&rows)?)
        }
        Command::Curve(a) => {
            let mut outputs = Vec::new();
            let h = match (&a.hierarchy, &a.measure) {
                (Some(p), _) => io::read_json(p)?,
                (None, Some(m)) => {
                    let mu = io::read_measure(m)?;
                    let p = CurveParams { delta: a.delta, k_max: a.k_max, c_star: a.c_star, epsilon: a.epsilon };
                    let h = commands::hierarchy(&mu, &p)?;
                    if let Some(o) = &a.hierarchy_out {
                        outputs.push((out_path(dir, o), io::to_json(&h)));
                    }
                    h
                }
                (None, None) => return Err(CliError::input("curve needs --hierarchy or --measure")),
            };
            let c = commands::curve(&h, a.epsilon)?;
            outputs.push((out_path(dir, &a.out), io::to_json(&GammaFile::from(&c))));
            if let Some(s) = &a.svg {
                outputs.push((out_path(dir, s), svg::render_gamma(&c.gamma, (0, 1))?));
            }
            outputs.iter().try_for_each(|(p, t)| write(p, t))
        }
        Command::Trees(a) => {
            let mu = io::read_measure(&a.measure)?;
            let fam = read_family(&a.family)?;
            let p = TreesParams {
                top_k: a.top_k,
                top_j: a.top_j,
                c: a.c,
                n_threshold: a.n_threshold,
                epsilon: a.epsilon,
                leaves_curve: a.leaves_out.is_some(),
            };
            p.validate(&FamilyParams {
                k0: Some(fam.k0),
                k_max: fam.k_max(),
                lambda2: fam.lambda2,
                j_param: fam.j_param,
            })?;
            let out = commands::trees(&mu, &fam, &p, a.curve_epsilon)?;
            write(&out_path(dir, &a.out), &io::to_json(&out.file))?;
            match (&a.leaves_out, &out.leaves) {
                (Some(path), Some(l)) => write(&out_path(dir, path), &io::to_json(l)),
                _ => Ok(()),
            }
        }
        Command::Cones(a) => {
            let mu = io::read_measure(&a.measure)?;
            let mut p = ConesParams {
                m: a.m,
                directions: a.directions,
                r_max: a.r_max,
                r_factor: a.r_factor,
                r_count: a.r_count,
                threshold: a.threshold,
                samples: a.samples,
                ..ConesParams::default()
            };
            if let Some(al) = a.alphas {
                p.alphas = al;
            }
            let labels = commands::cones(&mu, &p, cli.seed)?;
            write(&out_path(dir, &a.out), &commands::csv_text(&commands::cone_rows(&labels))?)
        }
        Command::Run(a) => {
            let cfg = ExperimentConfig::load(&a.config)?;
            let target = cfg.output.dir.clone().map_or_else(|| dir.to_path_buf(), |d| out_path(dir, &d));
            let files = commands::run(&cfg)?;
            files.iter().try_for_each(|(name, text)| write(&target.join(name), text))
        }
        Command::Render(a) => {
            let axes = match a.axes.as_slice() {
                &[x, y] => (x, y),
                _ => return Err(CliError::input("--axes takes exactly two indices")),
            };
            let text = match (&a.gamma, &a.labels, &a.measure) {
                (Some(g), _, _) => {
                    let file: GammaFile = io::read_json(g)?;
                    svg::render_gamma(&file.gamma(), axes)?
                }
                (None, Some(l), Some(m)) => {
                    let mu = io::read_measure(m)?;
                    let (points, labels) = read_label_csv(l, &mu)?;
                    svg::render_labels(&points, &labels, axes)?
                }
                _ => return Err(CliError::input("render needs --gamma, or --labels with --measure")),
            };
            write(&out_path(dir, &a.out), &text)
        }
    }
}

fn read_label_csv(path: &Path, mu: &rectify_core::DiscreteMeasure) -> CliResult<(Vec<Vec<f64>>, Vec<String>)> {
    #[derive(serde::Deserialize)]
    struct Row {
        atom_id: usize,
        label: String,
    }
    let mut reader =
        csv::Reader::from_path(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for row in reader.deserialize::<Row>() {
        let row = row.map_err(|e| CliError::input(format!("malformed {}: {e}", path.display())))?;
        if row.atom_id >= mu.len() {
            return Err(CliError::input(format!("{}: atom {} out of range", path.display(), row.atom_id)));
        }
        points.push(mu.atom(row.atom_id).to_vec());
        labels.push(row.label);
    }
    Ok((points, labels))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let first = e.to_string().lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            eprintln!("{}", CliError::Input(first));
            return ExitCode::from(2);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
