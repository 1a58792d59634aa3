//! Command-line front end. [`run`] parses arguments, performs one analysis,
//! prints a summary and writes JSON and CSV artifacts to the output
//! directory.
//!
//! Every JSON artifact carries the resolved [`RunConfig`]; CSV artifacts are
//! accompanied by `run_config.json` in the same directory. `sfd replay
//! --config FILE` re-runs a recorded configuration.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::dataset::{apply_transforms, load_csv, load_polygons, CsvSchema, SpatialDataset, TransformSpec};
use crate::differencing::difference;
use crate::error::{Error, Result};
use crate::estimation::{fit, EstimatorKind, FitResult};
use crate::inference::{yatchew_variance, SeMethod};
use crate::ordering::{assign_channels, default_channel_width, order_1d, order_grid, Axis, GridDirection, OrderedPath};
use crate::robustness::{extreme_bounds, full_thetas, rotation_sweep, sdd_check, CovariateGroup, COARSE_THETAS};
use crate::simulation::{lambda_sweep, monte_carlo, DGPConfig, DgpKind, EstimatorSpec, Scenario};

pub const OUT_DIR_ENV: &str = "SFD_OUT_DIR";

#[derive(Debug, Parser, Clone)]
#[command(name = "sfd", version, about = "Spatial first-difference estimation and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Clone)]
enum Command {
    /// Fit levels, SFD, SDD or Robinson along an ordering.
    Fit(FitArgs),
    /// Draw one simulated dataset.
    Simulate(SimulateArgs),
    /// Repeated draws of a simulated process with estimator summaries.
    MonteCarlo(MonteCarloArgs),
    /// Sample channels over (possibly rotated) polygon units.
    Channels(ChannelsArgs),
    /// Re-estimate SFD with channels drawn at a range of rotation angles.
    RotateSweep(RotateArgs),
    /// Enumerate all subsets of control groups for a focal covariate.
    ExtremeBounds(BoundsArgs),
    /// Compare double- and first-difference estimates.
    SddCheck(SddArgs),
    /// One fit with several standard-error methods side by side.
    SeTable(SeTableArgs),
    /// Re-run the configuration recorded in an artifact.
    Replay(ReplayArgs),
}

#[derive(Debug, Args, Clone)]
struct OutArgs {
    /// Output directory [default: $SFD_OUT_DIR, else the working directory].
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
struct DataArgs {
    /// Input CSV with one row per unit.
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    #[arg(long, default_value = "y")]
    outcome: String,
    /// Comma-separated regressor columns (may name transform outputs).
    #[arg(long, value_delimiter = ',')]
    regressors: Vec<String>,
    #[arg(long, default_value = "id")]
    id_col: String,
    #[arg(long, default_value = "coord_x")]
    x_col: String,
    #[arg(long, default_value = "coord_y")]
    y_col: String,
    /// Polygon vertices CSV: id,vertex_index,x,y.
    #[arg(long, value_name = "FILE")]
    polygons: Option<PathBuf>,
    /// poly:COL:DEGREE:OUT, lag:COL:K:OUT or degree-days:C1+C2+..:THRESHOLD:OUT.
    #[arg(long = "transform", value_name = "SPEC")]
    transforms: Vec<String>,
}

#[derive(Debug, Args, Clone)]
#[group(id = "ordering", required = true, multiple = false)]
struct OrderingArgs {
    /// Order every unit along one coordinate axis.
    #[arg(long, value_enum, value_name = "AXIS")]
    order_1d: Option<AxisArg>,
    /// Lattice data: one channel per row (we) or column (ns).
    #[arg(long, value_enum, value_name = "DIR")]
    grid: Option<GridArg>,
    /// Sample channels over polygon units (see --channel-width, --theta).
    #[arg(long)]
    channels: bool,
    /// Use an ordering written by `sfd channels`.
    #[arg(long, value_name = "FILE")]
    path_file: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
struct ChannelArgs {
    /// Channel width [default: mean north-south polygon extent].
    #[arg(long, value_name = "W")]
    channel_width: Option<f64>,
    /// Rotation of the map in degrees, within [-89, 90].
    #[arg(long, allow_hyphen_values = true, value_name = "DEG")]
    theta: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
enum AxisArg {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
enum GridArg {
    We,
    Ns,
}

#[derive(Debug, Args, Clone)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    ordering: OrderingArgs,
    #[command(flatten)]
    channel: ChannelArgs,
    /// levels, sfd, sdd or robinson:H.
    #[arg(long, default_value = "sfd")]
    kind: String,
    /// ols, hc, newey-west:L, conley:CX:CY, cluster, bootstrap:B[:SEED], block-bootstrap:B[:SEED].
    #[arg(long, default_value = "newey-west:2")]
    se: String,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
enum DgpArg {
    Sinusoid,
    CommonCause,
    Spillover,
    Iid,
    SmoothTrend,
    IsotropicGrid,
    ChannelConfounded,
}

#[derive(Debug, Args, Clone)]
struct DgpArgs {
    #[arg(long, value_enum, default_value = "sinusoid")]
    dgp: DgpArg,
    /// Wavelength of the sinusoid confounder.
    #[arg(long, default_value_t = 360.0)]
    lambda: f64,
    /// Noise scale of the sinusoid process.
    #[arg(long, default_value_t = 0.5)]
    phi: f64,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Common-cause scenario a, b or c.
    #[arg(long, default_value = "a")]
    scenario: String,
    /// Spillover coefficient on the left neighbour's x.
    #[arg(long, default_value_t = 0.6)]
    gamma: f64,
    /// Rows of the channel-confounded lattice.
    #[arg(long, default_value_t = 10)]
    rows: usize,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    beta: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl DgpArgs {
    fn config(&self) -> Result<DGPConfig> {
        let kind = match self.dgp {
            DgpArg::Sinusoid => DgpKind::Sinusoid {
                lambda: self.lambda,
                phi: self.phi,
            },
            DgpArg::CommonCause => DgpKind::CommonCause {
                scenario: self.scenario.parse::<Scenario>()?,
            },
            DgpArg::Spillover => DgpKind::Spillover { gamma: self.gamma },
            DgpArg::Iid => DgpKind::Iid,
            DgpArg::SmoothTrend => DgpKind::SmoothTrend,
            DgpArg::IsotropicGrid => DgpKind::IsotropicGrid,
            DgpArg::ChannelConfounded => DgpKind::ChannelConfounded { rows: self.rows },
        };
        let cfg = DGPConfig {
            kind,
            n: self.n,
            beta: self.beta,
            alpha: self.alpha,
            sigma: self.sigma,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args, Clone)]
struct SimulateArgs {
    #[command(flatten)]
    dgp: DgpArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
enum Preset {
    /// Sinusoid, lambda = 360, phi = 0.5, N = 1000, levels and SFD.
    Fig5Point,
}

#[derive(Debug, Args, Clone)]
struct MonteCarloArgs {
    #[command(flatten)]
    dgp: DgpArgs,
    /// Fixed configuration; overrides --dgp, --lambda, --phi and --n.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    /// Comma-separated estimators: levels, sfd, sdd, robinson:H.
    #[arg(long, value_delimiter = ',', default_value = "levels,sfd")]
    estimators: Vec<String>,
    /// Also sweep the sinusoid wavelength over START:END:STEP (long running).
    #[arg(long, value_name = "START:END:STEP")]
    lambda_sweep: Option<String>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args, Clone)]
struct ChannelsArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    channel: ChannelArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args, Clone)]
struct RotateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Channel width [default: mean north-south polygon extent].
    #[arg(long, value_name = "W")]
    channel_width: Option<f64>,
    /// coarse, full, or a comma-separated list of degrees.
    #[arg(long, default_value = "coarse", allow_hyphen_values = true)]
    thetas: String,
    #[arg(long, default_value = "sfd")]
    kind: String,
    #[arg(long, default_value = "newey-west:2")]
    se: String,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args, Clone)]
struct BoundsArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    ordering: OrderingArgs,
    #[command(flatten)]
    channel: ChannelArgs,
    /// Name of the focal group.
    #[arg(long)]
    focal: String,
    /// Covariate group NAME=COL1+COL2; a bare column name is its own group.
    #[arg(long = "group", value_name = "NAME=COLS", conflicts_with = "preset")]
    groups: Vec<String>,
    /// Named grouping: maize (temperature pair, precipitation pair, five soil columns).
    #[arg(long, value_parser = ["maize"])]
    preset: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "levels,sfd")]
    kinds: Vec<String>,
    #[arg(long, default_value = "ols")]
    se: String,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args, Clone)]
struct SddArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    ordering: OrderingArgs,
    #[command(flatten)]
    channel: ChannelArgs,
    #[arg(long, default_value = "newey-west:2")]
    se: String,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args, Clone)]
struct SeTableArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    ordering: OrderingArgs,
    #[command(flatten)]
    channel: ChannelArgs,
    #[arg(long, default_value = "sfd")]
    kind: String,
    /// Comma-separated methods.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "ols,hc,newey-west:2,cluster,bootstrap:1000,block-bootstrap:1000"
    )]
    se: Vec<String>,
    /// Seed for bootstrap methods given without one.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args, Clone)]
struct ReplayArgs {
    /// `run_config.json` or any JSON artifact carrying a `config` field.
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    #[command(flatten)]
    out: OutArgs,
}

impl Command {
    fn out(&self) -> &OutArgs {
        match self {
            Command::Fit(a) => &a.out,
            Command::Simulate(a) => &a.out,
            Command::MonteCarlo(a) => &a.out,
            Command::Channels(a) => &a.out,
            Command::RotateSweep(a) => &a.out,
            Command::ExtremeBounds(a) => &a.out,
            Command::SddCheck(a) => &a.out,
            Command::SeTable(a) => &a.out,
            Command::Replay(a) => &a.out,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Fit(_) => "fit",
            Command::Simulate(_) => "simulate",
            Command::MonteCarlo(_) => "monte-carlo",
            Command::Channels(_) => "channels",
            Command::RotateSweep(_) => "rotate-sweep",
            Command::ExtremeBounds(_) => "extreme-bounds",
            Command::SddCheck(_) => "sdd-check",
            Command::SeTable(_) => "se-table",
            Command::Replay(_) => "replay",
        }
    }
}

/// The resolved configuration of one run. The output directory is not part
/// of it, so the same configuration written to two directories produces
/// identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    /// Arguments after the program name, without `--out-dir`.
    pub argv: Vec<String>,
    pub seed: Option<u64>,
    pub inputs: Vec<String>,
    pub ordering: Option<String>,
    pub transforms: Vec<String>,
    pub estimators: Vec<String>,
    pub se_methods: Vec<String>,
}

enum CliError {
    Usage(String),
    Compute(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Compute(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Runs the command line `argv` (including the program name) and returns
/// the process exit code: 0 on success, 2 on usage errors, 1 when the
/// analysis fails.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command, &argv[1.min(argv.len())..], None) {
        Ok(()) => 0,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            2
        }
        Err(CliError::Compute(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn strip_out_dir(args: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    let mut skip = false;
    for a in args {
        if skip {
            skip = false;
            continue;
        }
        if a == "--out-dir" {
            skip = true;
            continue;
        }
        if a.starts_with("--out-dir=") {
            continue;
        }
        out.push(a.clone());
    }
    out
}

fn resolve_out_dir(out: &OutArgs, replay_override: Option<&Path>) -> PathBuf {
    if let Some(p) = replay_override {
        return p.to_path_buf();
    }
    out.out_dir
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn dispatch(command: Command, args: &[String], out_override: Option<&Path>) -> CliResult<()> {
    let mut cfg = RunConfig {
        command: command.name().to_string(),
        argv: strip_out_dir(args),
        seed: None,
        inputs: Vec::new(),
        ordering: None,
        transforms: Vec::new(),
        estimators: Vec::new(),
        se_methods: Vec::new(),
    };
    let out_dir = resolve_out_dir(command.out(), out_override);
    if !matches!(command, Command::Replay(_)) {
        fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    }
    let out = Output { dir: out_dir };
    match command {
        Command::Fit(a) => cmd_fit(a, cfg, &out),
        Command::Simulate(a) => {
            cfg.seed = Some(a.dgp.seed);
            cmd_simulate(a, cfg, &out)
        }
        Command::MonteCarlo(a) => cmd_monte_carlo(a, cfg, &out),
        Command::Channels(a) => cmd_channels(a, cfg, &out),
        Command::RotateSweep(a) => cmd_rotate(a, cfg, &out),
        Command::ExtremeBounds(a) => cmd_bounds(a, cfg, &out),
        Command::SddCheck(a) => cmd_sdd(a, cfg, &out),
        Command::SeTable(a) => cmd_se_table(a, cfg, &out),
        Command::Replay(a) => cmd_replay(a),
    }
}

struct Output {
    dir: PathBuf,
}

impl Output {
    /// Writes to a temporary sibling and renames it into place.
    fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp-{}", std::process::id()));
        fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    fn json<T: Serialize>(&self, name: &str, cfg: &RunConfig, result: &T) -> Result<PathBuf> {
        #[derive(Serialize)]
        struct Artifact<'a, T> {
            config: &'a RunConfig,
            result: &'a T,
        }
        let mut s = serde_json::to_string_pretty(&Artifact { config: cfg, result })?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    fn csv(&self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<PathBuf> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }

    fn config(&self, cfg: &RunConfig) -> Result<PathBuf> {
        let mut s = serde_json::to_string_pretty(cfg)?;
        s.push('\n');
        self.write("run_config.json", s.as_bytes())
    }
}

fn parse_transform(s: &str) -> CliResult<TransformSpec> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || usage(format!("invalid --transform `{s}`"));
    match parts.as_slice() {
        ["poly", col, deg, out] => Ok(TransformSpec::polynomial(col, deg.parse().map_err(|_| bad())?, out)),
        ["lag", col, k, out] => Ok(TransformSpec::spatial_lag(col, k.parse().map_err(|_| bad())?, out)),
        ["degree-days", cols, threshold, out] => {
            let cols: Vec<&str> = cols.split('+').collect();
            Ok(TransformSpec::degree_days(
                &cols,
                threshold.parse().map_err(|_| bad())?,
                out,
            ))
        }
        _ => Err(bad()),
    }
}

fn transform_io(spec: &TransformSpec) -> (Vec<String>, Vec<String>) {
    use crate::dataset::TransformKind as K;
    match &spec.kind {
        K::Polynomial { column, .. } | K::SpatialLag { column, .. } => {
            (vec![column.clone()], vec![spec.output.clone()])
        }
        K::DegreeDays { columns, .. } => (
            columns.clone(),
            vec![format!("{}_below", spec.output), format!("{}_above", spec.output)],
        ),
    }
}

/// A loaded dataset before ordering-dependent transforms.
struct Loaded {
    ds: SpatialDataset,
    transforms: Vec<TransformSpec>,
}

fn load(data: &DataArgs, extra: &[String], cfg: &mut RunConfig) -> CliResult<Loaded> {
    let transforms = data
        .transforms
        .iter()
        .map(|t| parse_transform(t))
        .collect::<CliResult<Vec<_>>>()?;
    let mut produced = BTreeSet::new();
    let mut needed: Vec<String> = Vec::new();
    let push = |c: &String, needed: &mut Vec<String>| {
        if !needed.contains(c) {
            needed.push(c.clone());
        }
    };
    for t in &transforms {
        let (inputs, outputs) = transform_io(t);
        for c in &inputs {
            if !produced.contains(c) {
                push(c, &mut needed);
            }
        }
        produced.extend(outputs);
    }
    for c in data.regressors.iter().chain(extra) {
        if !produced.contains(c) {
            push(c, &mut needed);
        }
    }
    let refs: Vec<&str> = needed.iter().map(String::as_str).collect();
    let mut schema = CsvSchema::new(data.outcome.clone(), &refs);
    schema.id = data.id_col.clone();
    schema.x = data.x_col.clone();
    schema.y = data.y_col.clone();
    let mut ds = load_csv(&data.data, &schema)?;
    cfg.inputs.push(data.data.display().to_string());
    if let Some(p) = &data.polygons {
        ds = ds.with_polygons(load_polygons(p)?)?;
        cfg.inputs.push(p.display().to_string());
    }
    cfg.transforms = data.transforms.clone();
    Ok(Loaded { ds, transforms })
}

fn channel_width(ds: &SpatialDataset, width: Option<f64>) -> CliResult<f64> {
    match width {
        Some(w) => Ok(w),
        None => {
            default_channel_width(ds).ok_or_else(|| usage("--channel-width is required when the data have no polygons"))
        }
    }
}

fn build_path(ds: &SpatialDataset, o: &OrderingArgs, c: &ChannelArgs, cfg: &mut RunConfig) -> CliResult<OrderedPath> {
    if !o.channels && (c.channel_width.is_some() || c.theta.is_some()) {
        return Err(usage("--channel-width and --theta apply only with --channels"));
    }
    let path = if let Some(axis) = o.order_1d {
        order_1d(
            ds,
            match axis {
                AxisArg::X => Axis::X,
                AxisArg::Y => Axis::Y,
            },
        )
    } else if let Some(g) = o.grid {
        order_grid(
            ds,
            match g {
                GridArg::We => GridDirection::WE,
                GridArg::Ns => GridDirection::NS,
            },
        )?
    } else if o.channels {
        let w = channel_width(ds, c.channel_width)?;
        assign_channels(ds, w, c.theta.unwrap_or(0.0))?
    } else if let Some(p) = &o.path_file {
        let f = fs::File::open(p).map_err(|e| Error::io(p, e))?;
        cfg.inputs.push(p.display().to_string());
        OrderedPath::read_csv(f, "file")?
    } else {
        return Err(usage("an ordering is required"));
    };
    cfg.ordering = Some(path.direction().to_string());
    Ok(path)
}

/// Loads data, orders it, applies transforms and keeps `columns`.
fn prepare(
    data: &DataArgs,
    ordering: &OrderingArgs,
    channel: &ChannelArgs,
    columns: &[String],
    cfg: &mut RunConfig,
) -> CliResult<(SpatialDataset, OrderedPath)> {
    if columns.is_empty() {
        return Err(usage("--regressors must name at least one column"));
    }
    let loaded = load(data, columns, cfg)?;
    let path = build_path(&loaded.ds, ordering, channel, cfg)?;
    let ds = apply_transforms(&loaded.ds, Some(&path), &loaded.transforms)?;
    let ds = ds.select_columns(columns)?;
    let path = path.restricted_to(&ds);
    Ok((ds, path))
}

fn parse_kind(s: &str) -> CliResult<EstimatorKind> {
    s.parse().map_err(|e: Error| usage(e.to_string()))
}

fn parse_se(s: &str) -> CliResult<SeMethod> {
    s.parse().map_err(|e: Error| usage(e.to_string()))
}

fn cmd_fit(a: FitArgs, mut cfg: RunConfig, out: &Output) -> CliResult<()> {
    let kind = parse_kind(&a.kind)?;
    let se = parse_se(&a.se)?;
    let (ds, path) = prepare(&a.data, &a.ordering, &a.channel, &a.data.regressors, &mut cfg)?;
    cfg.estimators = vec![kind.to_string()];
    cfg.se_methods = vec![se.label()];
    if let SeMethod::Bootstrap { seed, .. } | SeMethod::BlockBootstrap { seed, .. } = se {
        cfg.seed = Some(seed);
    }
    let f = fit(&ds, &path, kind, &se)?;
    print!("{}", f.table());

    #[derive(Serialize)]
    struct FitArtifact {
        fit: crate::estimation::FitSummary,
        dropped_channels: usize,
        yatchew: Option<crate::inference::YatchewVariance>,
    }
    let mut yatchew = None;
    if let Some(order) = kind.order() {
        let design = difference(&ds, &path, order)?;
        out.csv("design.csv", |w| design.write_csv(w, ds.outcome_name()))?;
        if order == 1 {
            yatchew = yatchew_variance(&design).ok();
        }
    }
    out.json(
        "fit.json",
        &cfg,
        &FitArtifact {
            fit: f.summary(),
            dropped_channels: ds.dropped_channels(),
            yatchew,
        },
    )?;
    out.csv("fit.csv", |w| f.write_csv(w))?;
    out.config(&cfg)?;
    Ok(())
}

fn cmd_simulate(a: SimulateArgs, cfg: RunConfig, out: &Output) -> CliResult<()> {
    let dgp = a.dgp.config()?;
    let sim = dgp.draw(0)?;
    out.csv("simulated.csv", |w| sim.dataset.write_csv(w))?;
    if sim.dataset.has_polygons() {
        out.csv("polygons.csv", |w| write_polygons(&sim.dataset, w))?;
    }
    #[derive(Serialize)]
    struct SimArtifact<'a> {
        dgp: &'a DGPConfig,
        description: &'a str,
        columns: &'a [String],
        true_coefficients: Vec<f64>,
        alpha: Vec<f64>,
        n_units: usize,
    }
    out.json(
        "simulate.json",
        &cfg,
        &SimArtifact {
            dgp: &dgp,
            description: &sim.description,
            columns: sim.dataset.columns(),
            true_coefficients: sim.coefficients.iter().copied().collect(),
            alpha: sim.alpha.iter().copied().collect(),
            n_units: sim.dataset.len(),
        },
    )?;
    out.config(&cfg)?;
    println!("{}", sim.description);
    println!(
        "wrote {} units to {}",
        sim.dataset.len(),
        out.dir.join("simulated.csv").display()
    );
    Ok(())
}

fn write_polygons(ds: &SpatialDataset, w: &mut Vec<u8>) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["id", "vertex_index", "x", "y"])?;
    for u in ds.units() {
        if let Some(ring) = &u.polygon {
            for (k, p) in ring.iter().enumerate() {
                wr.write_record([u.id.clone(), k.to_string(), format!("{:?}", p.x), format!("{:?}", p.y)])?;
            }
        }
    }
    wr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

fn parse_range(s: &str) -> CliResult<Vec<f64>> {
    let bad = || usage(format!("invalid --lambda-sweep `{s}` (expected START:END:STEP)"));
    let p: Vec<f64> = s
        .split(':')
        .map(|t| t.parse::<f64>().map_err(|_| bad()))
        .collect::<CliResult<_>>()?;
    let [start, end, step] = p.as_slice() else {
        return Err(bad());
    };
    if !(*step > 0.0) || end < start {
        return Err(bad());
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| start + k as f64 * step).collect())
}

fn cmd_monte_carlo(a: MonteCarloArgs, mut cfg: RunConfig, out: &Output) -> CliResult<()> {
    let mut dgp_args = a.dgp.clone();
    if let Some(Preset::Fig5Point) = a.preset {
        dgp_args.dgp = DgpArg::Sinusoid;
        dgp_args.lambda = 360.0;
        dgp_args.phi = 0.5;
        dgp_args.n = 1000;
    }
    let dgp = dgp_args.config()?;
    let estimators: Vec<EstimatorSpec> = a
        .estimators
        .iter()
        .map(|e| parse_kind(e).map(EstimatorSpec::new))
        .collect::<CliResult<_>>()?;
    cfg.seed = Some(dgp.seed);
    cfg.estimators = a.estimators.clone();
    let report = monte_carlo(&dgp, &estimators, a.reps)?;

    #[derive(Serialize)]
    struct Summary<'a> {
        dgp: &'a DGPConfig,
        description: &'a str,
        reps: usize,
        failures: usize,
        estimators: Vec<EstimatorSummary<'a>>,
    }
    #[derive(Serialize)]
    struct EstimatorSummary<'a> {
        label: &'a str,
        failures: &'a [(usize, String)],
        coefficients: &'a [crate::simulation::CoefficientSummary],
    }
    let summary = Summary {
        dgp: &dgp,
        description: &report.description,
        reps: report.reps,
        failures: report.failure_count(),
        estimators: report
            .estimators
            .iter()
            .map(|e| EstimatorSummary {
                label: &e.spec.label,
                failures: &e.failures,
                coefficients: &e.summaries,
            })
            .collect(),
    };
    out.json("monte_carlo.json", &cfg, &summary)?;
    out.csv("monte_carlo_draws.csv", |w| report.write_long_csv(w))?;

    println!("{}  ({} reps, seed {})", report.description, report.reps, dgp.seed);
    println!(
        "{:<12} {:<12} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "estimator", "coefficient", "mean", "variance", "q2.5", "q97.5", "bias"
    );
    for e in &report.estimators {
        for s in &e.summaries {
            println!(
                "{:<12} {:<12} {:>10.4} {:>10.6} {:>10.4} {:>10.4} {:>10}",
                e.spec.label,
                s.name,
                s.mean,
                s.variance,
                s.q025,
                s.q975,
                s.bias.map(|b| format!("{b:.4}")).unwrap_or_else(|| "-".into())
            );
        }
        if !e.failures.is_empty() {
            println!("{}: {} failed replications", e.spec.label, e.failures.len());
        }
    }

    if let Some(range) = &a.lambda_sweep {
        let DgpKind::Sinusoid { phi, .. } = dgp.kind else {
            return Err(usage("--lambda-sweep needs the sinusoid process"));
        };
        let lambdas = parse_range(range)?;
        let points = lambda_sweep(dgp.n, phi, &lambdas, a.reps, dgp.seed)?;
        out.csv("lambda_sweep.csv", |w| {
            let mut wr = csv::Writer::from_writer(w);
            wr.write_record(["lambda", "estimator", "mean", "variance", "q025", "q975"])?;
            for p in &points {
                for (label, s) in [("levels", &p.levels), ("sfd", &p.sfd)] {
                    wr.write_record([
                        format!("{:?}", p.lambda),
                        label.to_string(),
                        format!("{:?}", s.mean),
                        format!("{:?}", s.variance),
                        format!("{:?}", s.q025),
                        format!("{:?}", s.q975),
                    ])?;
                }
            }
            wr.flush().map_err(|e| Error::io("<csv writer>", e))?;
            Ok(())
        })?;
        println!("wavelength sweep: {} points", points.len());
    }
    out.config(&cfg)?;
    Ok(())
}

fn cmd_channels(a: ChannelsArgs, mut cfg: RunConfig, out: &Output) -> CliResult<()> {
    let loaded = load(&a.data, &[], &mut cfg)?;
    let w = channel_width(&loaded.ds, a.channel.channel_width)?;
    let path = assign_channels(&loaded.ds, w, a.channel.theta.unwrap_or(0.0))?;
    cfg.ordering = Some(path.direction().to_string());
    out.csv("channels.csv", |wr| path.write_csv(wr))?;
    #[derive(Serialize)]
    struct ChannelSummary {
        width: f64,
        direction: String,
        channels: usize,
        units: usize,
        longest_channel: usize,
        lengths: Vec<usize>,
    }
    let s = ChannelSummary {
        width: w,
        direction: path.direction().to_string(),
        channels: path.channels().len(),
        units: path.n_units(),
        longest_channel: path.longest_channel(),
        lengths: path.channels().iter().map(Vec::len).collect(),
    };
    out.json("channels.json", &cfg, &s)?;
    out.config(&cfg)?;
    println!(
        "{} channels of width {} ({}), {} units, longest {}",
        s.channels, w, s.direction, s.units, s.longest_channel
    );
    Ok(())
}

fn parse_thetas(s: &str) -> CliResult<Vec<f64>> {
    match s {
        "coarse" => Ok(COARSE_THETAS.to_vec()),
        "full" => Ok(full_thetas()),
        _ => s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| usage(format!("invalid angle `{t}` in --thetas")))
            })
            .collect(),
    }
}

fn print_dispersion(sweep: &crate::robustness::SweepResult) {
    println!(
        "{:<10} {:<16} {:>4} {:>12} {:>12} {:>12} {:>12} {:>8}",
        "estimator", "coefficient", "n", "mean", "variance", "min", "max", "CoV"
    );
    for d in &sweep.dispersion {
        println!(
            "{:<10} {:<16} {:>4} {:>12.5} {:>12.6} {:>12.5} {:>12.5} {:>8}",
            d.kind.to_string(),
            d.coefficient,
            d.n,
            d.mean,
            d.variance,
            d.min,
            d.max,
            d.coefficient_of_variation
                .map(|c| format!("{c:.4}"))
                .unwrap_or_else(|| "n/a".into())
        );
    }
    if sweep.missing() > 0 {
        println!("{} points failed; see the error column of the CSV", sweep.missing());
    }
}

fn cmd_rotate(a: RotateArgs, mut cfg: RunConfig, out: &Output) -> CliResult<()> {
    let kind = parse_kind(&a.kind)?;
    let se = parse_se(&a.se)?;
    let thetas = parse_thetas(&a.thetas)?;
    if a.data.regressors.is_empty() {
        return Err(usage("--regressors must name at least one column"));
    }
    if a.data.transforms.iter().any(|t| t.starts_with("lag:")) {
        return Err(usage(
            "spatial lags depend on the channels; lag transforms are not supported in rotate-sweep",
        ));
    }
    let loaded = load(&a.data, &[], &mut cfg)?;
    let ds = apply_transforms(&loaded.ds, None, &loaded.transforms)?.select_columns(&a.data.regressors)?;
    let w = channel_width(&ds, a.channel_width)?;
    cfg.ordering = Some(format!("channels width={w}"));
    cfg.estimators = vec![kind.to_string()];
    cfg.se_methods = vec![se.label()];
    let sweep = rotation_sweep(&ds, w, &thetas, kind, &se)?;
    out.json("rotation_sweep.json", &cfg, &sweep)?;
    out.csv("rotation_sweep.csv", |wr| sweep.write_long_csv(wr))?;
    out.config(&cfg)?;
    println!("rotation sweep over {} angles, channel width {w}", thetas.len());
    print_dispersion(&sweep);
    Ok(())
}

fn parse_groups(a: &BoundsArgs) -> CliResult<Vec<CovariateGroup>> {
    if a.preset.as_deref() == Some("maize") {
        return Ok(CovariateGroup::maize_preset());
    }
    a.groups
        .iter()
        .map(|g| {
            let (name, cols) = g.split_once('=').unwrap_or((g.as_str(), g.as_str()));
            let members: Vec<&str> = cols.split('+').filter(|c| !c.is_empty()).collect();
            if name.is_empty() || members.is_empty() {
                return Err(usage(format!("invalid --group `{g}`")));
            }
            Ok(CovariateGroup::new(name, &members))
        })
        .collect()
}

fn cmd_bounds(a: BoundsArgs, mut cfg: RunConfig, out: &Output) -> CliResult<()> {
    let groups = parse_groups(&a)?;
    let (focal, controls) = CovariateGroup::split(&groups, &a.focal).map_err(|e| usage(e.to_string()))?;
    let kinds: Vec<EstimatorKind> = a.kinds.iter().map(|k| parse_kind(k)).collect::<CliResult<_>>()?;
    let se = parse_se(&a.se)?;
    let columns: Vec<String> = groups.iter().flat_map(|g| g.members.iter().cloned()).collect();
    let (ds, path) = prepare(&a.data, &a.ordering, &a.channel, &columns, &mut cfg)?;
    cfg.estimators = a.kinds.clone();
    cfg.se_methods = vec![se.label()];
    let sweep = extreme_bounds(&ds, &path, &focal, &controls, &kinds, &se)?;
    out.json("extreme_bounds.json", &cfg, &sweep)?;
    out.csv("extreme_bounds.csv", |w| sweep.write_long_csv(w))?;
    out.config(&cfg)?;
    println!(
        "{} specifications per estimator for focal group `{}`",
        1usize << controls.len(),
        focal.name
    );
    let focal_only = crate::robustness::SweepResult {
        points: Vec::new(),
        dispersion: sweep
            .dispersion
            .iter()
            .filter(|d| focal.members.contains(&d.coefficient))
            .cloned()
            .collect(),
    };
    print_dispersion(&focal_only);
    if sweep.missing() > 0 {
        println!(
            "{} specifications failed; see the error column of the CSV",
            sweep.missing()
        );
    }
    Ok(())
}

fn cmd_sdd(a: SddArgs, mut cfg: RunConfig, out: &Output) -> CliResult<()> {
    let se = parse_se(&a.se)?;
    let (ds, path) = prepare(&a.data, &a.ordering, &a.channel, &a.data.regressors, &mut cfg)?;
    cfg.estimators = vec!["sfd".into(), "sdd".into()];
    cfg.se_methods = vec![se.label()];
    let check = sdd_check(&ds, &path, &se)?;
    #[derive(Serialize)]
    struct SddArtifact {
        sfd: crate::estimation::FitSummary,
        sdd: crate::estimation::FitSummary,
        gaps: Vec<crate::robustness::SddGap>,
    }
    out.json(
        "sdd_check.json",
        &cfg,
        &SddArtifact {
            sfd: check.sfd.summary(),
            sdd: check.sdd.summary(),
            gaps: check.gaps.clone(),
        },
    )?;
    out.csv("sdd_check.csv", |w| {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            "coefficient",
            "sfd",
            "sfd_se",
            "sdd",
            "sdd_se",
            "gap",
            "combined_se",
            "z",
            "inside_sfd_ci",
        ])?;
        for g in &check.gaps {
            wr.write_record([
                g.coefficient.clone(),
                format!("{:?}", g.sfd),
                format!("{:?}", g.sfd_se),
                format!("{:?}", g.sdd),
                format!("{:?}", g.sdd_se),
                format!("{:?}", g.gap),
                format!("{:?}", g.combined_se),
                format!("{:?}", g.z),
                g.inside_sfd_ci.to_string(),
            ])?;
        }
        wr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    })?;
    out.config(&cfg)?;
    print!("{}", check.sfd.table());
    print!("{}", check.sdd.table());
    println!(
        "{:<16} {:>12} {:>12} {:>10} {:>8}",
        "coefficient", "gap", "combined se", "z", "in CI"
    );
    for g in &check.gaps {
        println!(
            "{:<16} {:>12.6} {:>12.6} {:>10.3} {:>8}",
            g.coefficient, g.gap, g.combined_se, g.z, g.inside_sfd_ci
        );
    }
    Ok(())
}

fn with_default_seed(m: SeMethod, raw: &str, seed: u64) -> SeMethod {
    let explicit = raw.split(':').count() == 3;
    match m {
        SeMethod::Bootstrap { reps, .. } if !explicit => SeMethod::Bootstrap { reps, seed },
        SeMethod::BlockBootstrap { reps, .. } if !explicit => SeMethod::BlockBootstrap { reps, seed },
        other => other,
    }
}

fn cmd_se_table(a: SeTableArgs, mut cfg: RunConfig, out: &Output) -> CliResult<()> {
    let kind = parse_kind(&a.kind)?;
    let methods: Vec<SeMethod> =
        a.se.iter()
            .map(|s| parse_se(s).map(|m| with_default_seed(m, s, a.seed)))
            .collect::<CliResult<_>>()?;
    let (ds, path) = prepare(&a.data, &a.ordering, &a.channel, &a.data.regressors, &mut cfg)?;
    cfg.seed = Some(a.seed);
    cfg.estimators = vec![kind.to_string()];
    cfg.se_methods = methods.iter().map(SeMethod::label).collect();
    let base: FitResult = fit(&ds, &path, kind, &SeMethod::Ols)?;

    #[derive(Serialize)]
    struct Column {
        method: String,
        std_errors: Option<Vec<f64>>,
        error: Option<String>,
        warnings: Vec<String>,
    }
    let columns: Vec<Column> = methods
        .iter()
        .map(|m| match base.covariance(m) {
            Ok(c) => Column {
                method: m.label(),
                std_errors: Some(
                    (0..c.matrix.nrows())
                        .map(|j| c.matrix[(j, j)].max(0.0).sqrt())
                        .collect(),
                ),
                error: None,
                warnings: c.warnings,
            },
            Err(e) => Column {
                method: m.label(),
                std_errors: None,
                error: Some(e.to_string()),
                warnings: Vec::new(),
            },
        })
        .collect();

    #[derive(Serialize)]
    struct SeTable<'a> {
        kind: String,
        n_obs: usize,
        names: &'a [String],
        estimates: Vec<f64>,
        columns: &'a [Column],
    }
    out.json(
        "se_table.json",
        &cfg,
        &SeTable {
            kind: kind.to_string(),
            n_obs: base.n_obs,
            names: &base.names,
            estimates: base.coefficients.iter().copied().collect(),
            columns: &columns,
        },
    )?;
    out.csv("se_table.csv", |w| {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["coefficient".to_string(), "estimate".to_string()];
        header.extend(columns.iter().map(|c| c.method.clone()));
        wr.write_record(&header)?;
        for (j, name) in base.names.iter().enumerate() {
            let mut row = vec![name.clone(), format!("{:?}", base.coefficients[j])];
            row.extend(
                columns
                    .iter()
                    .map(|c| c.std_errors.as_ref().map(|s| format!("{:?}", s[j])).unwrap_or_default()),
            );
            wr.write_record(&row)?;
        }
        wr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    })?;
    out.config(&cfg)?;

    println!("estimator: {kind}  n = {}", base.n_obs);
    for (j, name) in base.names.iter().enumerate() {
        println!("{name:<20} {:>14.6}", base.coefficients[j]);
        for c in &columns {
            match &c.std_errors {
                Some(s) => println!("{:<20} {:>14} {}", "", format!("[{:.6}]", s[j]), c.method),
                None => println!("{:<20} {:>14} {}", "", "[n/a]", c.method),
            }
        }
    }
    for c in &columns {
        if let Some(e) = &c.error {
            println!("{}: {e}", c.method);
        }
        for w in &c.warnings {
            println!("{}: warning: {w}", c.method);
        }
    }
    Ok(())
}

fn cmd_replay(a: ReplayArgs) -> CliResult<()> {
    let text = fs::read_to_string(&a.config).map_err(|e| Error::io(&a.config, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(Error::from)?;
    let cfg_value = value.get("config").cloned().unwrap_or(value);
    let cfg: RunConfig = serde_json::from_value(cfg_value).map_err(Error::from)?;
    if cfg.command == "replay" {
        return Err(usage("a replay configuration cannot itself be replayed"));
    }
    let mut argv = vec!["sfd".to_string()];
    argv.extend(cfg.argv.iter().cloned());
    let cli = Cli::try_parse_from(&argv).map_err(|e| usage(format!("recorded arguments no longer parse: {e}")))?;
    let out_dir = resolve_out_dir(&a.out, None);
    dispatch(cli.command, &argv[1..], Some(&out_dir))
}
