//! Batch command-line front-end. Every subcommand writes CSV (or a model
//! file) whose `#` comment lines record the fully resolved configuration.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use crate::calibration::{self, build_table, fit_inverse, CalibrationModel};
use crate::csvio::{self, Cell};
use crate::error::{Error, Result};
use crate::metrics::{self, crb_sigma, fisher_info};
use crate::price::{self, build_gcurve, linspace};
use crate::pwl::{CorrelatorSpec, PwlMixture};
use crate::sampling::{sample_nongaussian, Family, RngStream, SampleBatch};
use crate::wht;

// Child indices of the root stream. Calibration and evaluation never share draws.
const CALIBRATION_STREAM: u64 = 1;
const EVALUATION_STREAM: u64 = 2;
const SAMPLE_STREAM: u64 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "corrkit",
    version,
    about = "Nonlinear cross-correlation estimators"
)]
pub struct RunConfig {
    /// Root seed; all randomness derives from it.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,

    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Output path (default: stdout).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Omit the generation-time comment line.
    #[arg(long, global = true)]
    pub no_timestamp: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Theoretical g(R) of a mixture as CSV (R, g).
    Gtable(GtableArgs),
    /// Monte-Carlo calibration; writes a model file.
    Calibrate(CalibrateArgs),
    /// Estimate R for a two-column pair file with a calibrated model.
    Estimate(EstimateArgs),
    /// Error standard deviation against R at one N.
    Sweep(SweepArgs),
    /// SNR against correlator length.
    Snr(SnrArgs),
    /// Cramér–Rao bound on a grid.
    Crb(CrbArgs),
    /// Walsh–Hadamard transform of a two-column pair file.
    Wht(WhtArgs),
    /// Draw a pair file with known correlation.
    Sample(SampleArgs),
}

#[derive(Debug, Args)]
pub struct GtableArgs {
    /// Mixture offsets α_l.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0",
        allow_hyphen_values = true
    )]
    pub alpha: Vec<f64>,
    /// Mixture weights w_l (default: equal).
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    /// Number of points on [-0.99, 0.99].
    #[arg(long, default_value_t = price::DEFAULT_GRID_POINTS)]
    pub grid: usize,
}

#[derive(Debug, Args)]
pub struct CalibrationOpts {
    /// Calibration grid points on [-0.95, 0.95].
    #[arg(long = "cal-grid", default_value_t = calibration::DEFAULT_GRID_POINTS)]
    pub cal_grid: usize,
    /// Pairs per calibration batch.
    #[arg(long = "cal-n", default_value_t = calibration::DEFAULT_N)]
    pub cal_n: usize,
    /// Batches per calibration grid point.
    #[arg(long = "cal-trials", default_value_t = calibration::DEFAULT_TRIALS)]
    pub cal_trials: usize,
    /// Polynomial degree (default depends on the correlator).
    #[arg(long)]
    pub degree: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub spec: CorrelatorSpec,
    #[arg(long, default_value = "gaussian")]
    pub family: Family,
    /// Calibration grid points on [-0.95, 0.95].
    #[arg(long, default_value_t = calibration::DEFAULT_GRID_POINTS)]
    pub grid: usize,
    #[arg(long, default_value_t = calibration::DEFAULT_N)]
    pub n: usize,
    #[arg(long, default_value_t = calibration::DEFAULT_TRIALS)]
    pub trials: usize,
    #[arg(long)]
    pub degree: Option<usize>,
    #[arg(long)]
    pub use_wht: bool,
    /// Also write the measured table (R, mean_score, stderr) here.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub spec: CorrelatorSpec,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub use_wht: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Correlator descriptor; repeat for several.
    #[arg(long, required = true)]
    pub spec: Vec<CorrelatorSpec>,
    /// Pre-calibrated model (single spec only); otherwise calibrated inline.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value = "gaussian")]
    pub family: Family,
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    #[arg(long, default_value_t = 2000)]
    pub trials: usize,
    /// Grid points on [-0.9, 0.9].
    #[arg(long, default_value_t = 19)]
    pub grid: usize,
    #[arg(long)]
    pub use_wht: bool,
    #[command(flatten)]
    pub cal: CalibrationOpts,
}

#[derive(Debug, Args)]
pub struct SnrArgs {
    #[arg(long, required = true)]
    pub spec: Vec<CorrelatorSpec>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value = "gaussian")]
    pub family: Family,
    /// Correlator lengths.
    #[arg(
        long = "n-values",
        value_delimiter = ',',
        default_value = "16,32,64,128,256,512,1024,2048,4096"
    )]
    pub n_values: Vec<usize>,
    #[arg(long, default_value_t = 500)]
    pub trials: usize,
    #[arg(long, default_value_t = 19)]
    pub grid: usize,
    #[arg(long)]
    pub use_wht: bool,
    #[command(flatten)]
    pub cal: CalibrationOpts,
}

#[derive(Debug, Args)]
pub struct CrbArgs {
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    /// Number of points on [-0.99, 0.99].
    #[arg(long, default_value_t = price::DEFAULT_GRID_POINTS)]
    pub grid: usize,
}

#[derive(Debug, Args)]
pub struct WhtArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long, default_value_t = 1024)]
    pub n: usize,
    #[arg(long, allow_hyphen_values = true)]
    pub r: f64,
    #[arg(long, default_value = "gaussian")]
    pub family: Family,
}

/// Parses `args` (including the program name), runs, and returns the exit
/// code: 0 success, 1 runtime failure, 2 usage error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cfg = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cfg) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn execute(cfg: &RunConfig) -> Result<()> {
    match cfg.threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::param(format!("cannot build thread pool: {e}")))?;
            pool.install(|| dispatch(cfg))
        }
        None => dispatch(cfg),
    }
}

fn dispatch(cfg: &RunConfig) -> Result<()> {
    let root = RngStream::new(cfg.seed);
    match &cfg.command {
        Command::Gtable(a) => gtable(cfg, a),
        Command::Crb(a) => crb(cfg, a),
        Command::Sample(a) => sample(cfg, a, root.child(SAMPLE_STREAM)),
        Command::Wht(a) => wht_cmd(cfg, a),
        Command::Calibrate(a) => calibrate(cfg, a, root.child(CALIBRATION_STREAM)),
        Command::Estimate(a) => estimate(cfg, a),
        Command::Sweep(a) => sweep(cfg, a, root),
        Command::Snr(a) => snr(cfg, a, root),
    }
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn header_comments(cfg: &RunConfig, name: &str, settings: Vec<(&str, String)>) -> Vec<String> {
    let mut c = vec![format!("corrkit {} {name}", env!("CARGO_PKG_VERSION"))];
    c.push(format!("seed = {}", cfg.seed));
    c.extend(settings.into_iter().map(|(k, v)| format!("{k} = {v}")));
    if !cfg.no_timestamp {
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        c.push(format!("generated_unix = {secs}"));
    }
    c
}

fn list<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn gtable(cfg: &RunConfig, a: &GtableArgs) -> Result<()> {
    let weights = a
        .weights
        .clone()
        .unwrap_or_else(|| vec![1.0 / a.alpha.len() as f64; a.alpha.len()]);
    let m = PwlMixture::new(weights.clone(), a.alpha.clone())?;
    let grid = linspace(price::DEFAULT_GRID_EDGE, a.grid);
    let curve = build_gcurve(&m, &grid)?;
    let comments = header_comments(
        cfg,
        "gtable",
        vec![
            ("alpha", list(&a.alpha)),
            ("weights", list(&weights)),
            (
                "grid",
                format!(
                    "{} points on [-{e}, {e}]",
                    a.grid,
                    e = price::DEFAULT_GRID_EDGE
                ),
            ),
        ],
    );
    let rows: Vec<Vec<Cell>> = curve
        .points()
        .map(|(r, g)| vec![r.into(), g.into()])
        .collect();
    csvio::emit_csv(open_out(cfg.out.as_deref())?, &comments, &["R", "g"], &rows)
}

fn crb(cfg: &RunConfig, a: &CrbArgs) -> Result<()> {
    let grid = linspace(price::DEFAULT_GRID_EDGE, a.grid);
    let rows = grid
        .iter()
        .map(|&r| {
            Ok(vec![
                r.into(),
                a.n.into(),
                crb_sigma(r, a.n)?.into(),
                fisher_info(r)?.into(),
            ])
        })
        .collect::<Result<Vec<Vec<Cell>>>>()?;
    let comments = header_comments(
        cfg,
        "crb",
        vec![
            ("n", a.n.to_string()),
            ("grid", format!("{} points on [-0.99, 0.99]", a.grid)),
        ],
    );
    csvio::emit_csv(
        open_out(cfg.out.as_deref())?,
        &comments,
        &["R", "N", "crb_sigma", "fisher_info"],
        &rows,
    )
}

fn sample(cfg: &RunConfig, a: &SampleArgs, stream: RngStream) -> Result<()> {
    let b = sample_nongaussian(a.n, a.r, a.family, stream)?;
    let comments = header_comments(cfg, "sample", vec![("n", a.n.to_string())]);
    b.write_csv(open_out(cfg.out.as_deref())?, &comments)
}

fn wht_cmd(cfg: &RunConfig, a: &WhtArgs) -> Result<()> {
    let b = SampleBatch::read_csv(File::open(&a.input)?)?;
    let t = wht::transform_batch(&b)?;
    let comments = header_comments(
        cfg,
        "wht",
        vec![
            ("in", a.input.display().to_string()),
            ("padded", format!("{} -> {}", b.len(), t.len())),
        ],
    );
    t.write_csv(open_out(cfg.out.as_deref())?, &comments)
}

fn calibrate(cfg: &RunConfig, a: &CalibrateArgs, stream: RngStream) -> Result<()> {
    let grid = linspace(calibration::DEFAULT_GRID_EDGE, a.grid);
    let table = build_table(&a.spec, &grid, a.n, a.trials, stream, a.use_wht, a.family)?;
    let degree = a.degree.unwrap_or_else(|| a.spec.default_degree());
    let model = fit_inverse(&table, degree)?;
    let comments = header_comments(
        cfg,
        "calibrate",
        vec![
            ("spec", a.spec.to_string()),
            ("family", a.family.to_string()),
            ("grid", format!("{} points on [-0.95, 0.95]", a.grid)),
            ("n", a.n.to_string()),
            ("trials", a.trials.to_string()),
            ("degree", degree.to_string()),
            ("use_wht", a.use_wht.to_string()),
        ],
    );
    if let Some(p) = &a.table {
        table.write_csv(BufWriter::new(File::create(p)?), &comments)?;
    }
    let mut out = open_out(cfg.out.as_deref())?;
    for c in &comments {
        writeln!(out, "# {c}")?;
    }
    model.write_to(&mut out)?;
    out.flush()?;
    Ok(())
}

fn estimate(cfg: &RunConfig, a: &EstimateArgs) -> Result<()> {
    let model = calibration::load_model(&a.model)?;
    let b = SampleBatch::read_csv(File::open(&a.input)?)?;
    let score = calibration::score(&b.xs, &b.ys, &a.spec, a.use_wht)?;
    let r_hat = calibration::estimate_r(&b.xs, &b.ys, &a.spec, &model, a.use_wht)?;
    let comments = header_comments(
        cfg,
        "estimate",
        vec![
            ("spec", a.spec.to_string()),
            ("model", a.model.display().to_string()),
            ("in", a.input.display().to_string()),
            ("use_wht", a.use_wht.to_string()),
        ],
    );
    let rows = vec![vec![
        Cell::Text(a.spec.to_string()),
        b.len().into(),
        score.into(),
        r_hat.into(),
    ]];
    csvio::emit_csv(
        open_out(cfg.out.as_deref())?,
        &comments,
        &["spec", "N", "score", "r_hat"],
        &rows,
    )
}

/// Loads `path` if given, otherwise calibrates on Gaussian inputs.
fn model_for(
    spec: &CorrelatorSpec,
    path: Option<&Path>,
    opts: &CalibrationOpts,
    stream: RngStream,
) -> Result<CalibrationModel> {
    if let Some(p) = path {
        return calibration::load_model(p);
    }
    let grid = linspace(calibration::DEFAULT_GRID_EDGE, opts.cal_grid);
    let table = build_table(
        spec,
        &grid,
        opts.cal_n,
        opts.cal_trials,
        stream,
        false,
        Family::Gaussian,
    )?;
    fit_inverse(&table, opts.degree.unwrap_or_else(|| spec.default_degree()))
}

fn calibration_settings(
    opts: &CalibrationOpts,
    path: Option<&Path>,
) -> Vec<(&'static str, String)> {
    match path {
        Some(p) => vec![("model", p.display().to_string())],
        None => vec![
            ("calibration", "inline, gaussian".to_owned()),
            ("cal_grid", opts.cal_grid.to_string()),
            ("cal_n", opts.cal_n.to_string()),
            ("cal_trials", opts.cal_trials.to_string()),
            (
                "degree",
                opts.degree.map_or("default".to_owned(), |d| d.to_string()),
            ),
        ],
    }
}

fn sweep_grid(points: usize) -> Vec<f64> {
    if points == 19 {
        metrics::default_sweep_grid()
    } else {
        linspace(0.9, points)
    }
}

fn check_model_use(specs: &[CorrelatorSpec], model: Option<&Path>) -> Result<()> {
    if model.is_some() && specs.len() != 1 {
        return Err(Error::param(
            "--model can only be combined with a single --spec",
        ));
    }
    Ok(())
}

fn sweep(cfg: &RunConfig, a: &SweepArgs, root: RngStream) -> Result<()> {
    check_model_use(&a.spec, a.model.as_deref())?;
    let grid = sweep_grid(a.grid);
    let mut rows = Vec::new();
    for spec in &a.spec {
        let model = model_for(
            spec,
            a.model.as_deref(),
            &a.cal,
            root.child(CALIBRATION_STREAM),
        )?;
        let res = metrics::error_std_sweep(
            spec,
            &model,
            a.family,
            &grid,
            a.n,
            a.trials,
            root.child(EVALUATION_STREAM),
            a.use_wht,
        )?;
        rows.extend(res.rows());
    }
    let mut settings = vec![
        (
            "specs",
            a.spec
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(" "),
        ),
        ("family", a.family.to_string()),
        ("n", a.n.to_string()),
        ("trials", a.trials.to_string()),
        ("grid", format!("{} points on [-0.9, 0.9]", grid.len())),
        ("use_wht", a.use_wht.to_string()),
        ("snr_weighting", "uniform over R grid".to_owned()),
    ];
    settings.extend(calibration_settings(&a.cal, a.model.as_deref()));
    let comments = header_comments(cfg, "sweep", settings);
    csvio::emit_csv(
        open_out(cfg.out.as_deref())?,
        &comments,
        &metrics::SWEEP_HEADER,
        &rows,
    )
}

fn snr(cfg: &RunConfig, a: &SnrArgs, root: RngStream) -> Result<()> {
    check_model_use(&a.spec, a.model.as_deref())?;
    let grid = sweep_grid(a.grid);
    let mut rows = Vec::new();
    for spec in &a.spec {
        let model = model_for(
            spec,
            a.model.as_deref(),
            &a.cal,
            root.child(CALIBRATION_STREAM),
        )?;
        let res = metrics::snr_sweep(
            spec,
            &model,
            a.family,
            &grid,
            &a.n_values,
            a.trials,
            root.child(EVALUATION_STREAM),
            a.use_wht,
        )?;
        for (n, db) in res.n_values.iter().zip(&res.snr_db) {
            rows.push(vec![
                Cell::Text(spec.to_string()),
                Cell::Text(a.family.to_string()),
                (*n).into(),
                (*db).into(),
                a.trials.into(),
                cfg.seed.into(),
            ]);
        }
    }
    let mut settings = vec![
        (
            "specs",
            a.spec
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(" "),
        ),
        ("family", a.family.to_string()),
        ("n_values", list(&a.n_values)),
        ("trials", a.trials.to_string()),
        ("grid", format!("{} points on [-0.9, 0.9]", grid.len())),
        ("use_wht", a.use_wht.to_string()),
        ("snr_weighting", "uniform over R grid".to_owned()),
    ];
    settings.extend(calibration_settings(&a.cal, a.model.as_deref()));
    let comments = header_comments(cfg, "snr", settings);
    csvio::emit_csv(
        open_out(cfg.out.as_deref())?,
        &comments,
        &["spec", "family", "N", "snr_db", "trials", "seed"],
        &rows,
    )
}
