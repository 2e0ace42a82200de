//! `rcgd`: run RCGD trajectories, Lyapunov spectra, saddle geometry and
//! escape experiments from the command line.
//!
//! Every subcommand resolves a flat key/value configuration (an optional
//! `--config` file, overridden by flags), writes its outputs and a
//! `manifest.json` into `--out`, and prints a short summary.
//!
//! Exit codes: 0 success, 1 runtime failure (or a failed `check`), 2 bad
//! arguments or configuration, 3 violated precondition such as
//! `alpha * M >= 1`.

mod plot;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use rcgd::config::Config;
use rcgd::dynamics::{run, StepSize, StopRule};
use rcgd::experiments::{attach_geometry, escape_experiment_with, TrialConfig};
use rcgd::geometry::{GeometryOptions, SaddleGeometry};
use rcgd::lyapunov::{lyapunov_spectrum, LinearizedSystem, SpectrumOptions};
use rcgd::objective::{builtin_objective, objective_param_names, parse_vector, Objective, Params, PointKind};
use rcgd::stream::CoordinateStream;
use rcgd::Vector;

#[derive(Parser)]
#[command(name = "rcgd", version, about = "Randomized coordinate gradient descent as a random dynamical system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trajectory and export it as CSV.
    Run(RunArgs),
    /// Estimate the Lyapunov spectrum of the linearization at a critical point.
    Lyapunov(LyapunovArgs),
    /// Compute the local constants at a strict saddle.
    Geometry(GeometryArgs),
    /// Monte-Carlo classification of limits over random starts and streams.
    Escape(EscapeArgs),
    /// Run the invariant suite.
    Check(CommonArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for parallel sections.
    #[arg(long)]
    threads: Option<usize>,
    /// Flat TOML configuration; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct ObjectiveArgs {
    /// Corpus name; defaults to `quadratic` when `--H` is given.
    #[arg(long)]
    objective: Option<String>,
    /// Quadratic Hessian: comma-separated diagonal, or `@file` holding the
    /// row-major lower triangle of a symmetric matrix.
    #[arg(long = "H", value_name = "MATRIX", allow_hyphen_values = true)]
    h: Option<String>,
    /// Objective parameter, e.g. `--param d=3`.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    objective: ObjectiveArgs,
    /// Starting point, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    /// Maximum number of steps.
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    tol_grad: Option<f64>,
    #[arg(long)]
    tol_x: Option<f64>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    region_radius: Option<f64>,
    /// Registry index of a strict saddle; fills the `S_t` column.
    #[arg(long)]
    saddle: Option<usize>,
    /// Also write `plot.svg` with f(x_t) and ln ||x_t - x*||.
    #[arg(long)]
    plot: bool,
}

#[derive(Args)]
struct LyapunovArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    objective: ObjectiveArgs,
    /// Registry index of the critical point; defaults to the first strict
    /// saddle, else the first point.
    #[arg(long)]
    point: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Steps between QR reorthogonalizations.
    #[arg(long)]
    reorth: Option<usize>,
}

#[derive(Args)]
struct GeometryArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    objective: ObjectiveArgs,
    #[arg(long)]
    saddle: Option<usize>,
    /// Sphere grid size for the growth constants.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    sigma_samples: Option<usize>,
    #[arg(long)]
    sigma_radius: Option<f64>,
    #[arg(long)]
    inclusion_samples: Option<usize>,
}

#[derive(Args)]
struct EscapeArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    objective: ObjectiveArgs,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Center of the starting ball, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    #[arg(long)]
    x0_radius: Option<f64>,
    /// `uniform_ball` or `fixed`.
    #[arg(long)]
    x0_distribution: Option<String>,
    /// Registry index of the saddle, or `none`.
    #[arg(long)]
    saddle: Option<String>,
    #[arg(long)]
    tail_fraction: Option<f64>,
    #[arg(long)]
    tol_point: Option<f64>,
    #[arg(long)]
    tol_grad: Option<f64>,
}

const COMMON_KEYS: &[&str] = &["objective", "alpha", "seed", "threads"];
const RUN_KEYS: &[&str] = &[
    "x0",
    "max_iters",
    "stop_tol_grad",
    "stop_tol_x",
    "patience",
    "region_radius",
    "saddle",
];
const LYAPUNOV_KEYS: &[&str] = &["point", "horizon", "reorth_interval"];
const GEOMETRY_KEYS: &[&str] = &["saddle", "grid", "sigma_samples", "sigma_radius", "inclusion_samples"];

#[derive(Serialize)]
struct Manifest<'a> {
    subcommand: &'a str,
    version: &'a str,
    config: &'a BTreeMap<String, String>,
    seeds: Vec<u64>,
    outputs: Vec<String>,
    wall_clock_seconds: f64,
}

/// Writes outputs into the `--out` directory and records them for the manifest.
struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_owned(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        self.written.push(path.display().to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn finish(mut self, subcommand: &str, cfg: &Config, seeds: Vec<u64>, start: Instant) -> anyhow::Result<()> {
        self.write("config.toml", cfg.to_toml().as_bytes())?;
        let mut outputs = self.written.clone();
        outputs.push(self.dir.join("manifest.json").display().to_string());
        let manifest = Manifest {
            subcommand,
            version: env!("CARGO_PKG_VERSION"),
            config: cfg.entries(),
            seeds,
            outputs,
            wall_clock_seconds: start.elapsed().as_secs_f64(),
        };
        self.json("manifest.json", &manifest)
    }
}

/// Load `--config`, then apply the shared flags on top.
fn base_config(common: &CommonArgs, obj: Option<&ObjectiveArgs>) -> anyhow::Result<Config> {
    let mut cfg = match &common.config {
        Some(path) => Config::load(path)?,
        None => Config::new(),
    };
    cfg.set_opt("seed", common.seed);
    cfg.set_opt("threads", common.threads);
    if let Some(o) = obj {
        cfg.set_opt("objective", o.objective.as_deref());
        cfg.set_opt("H", o.h.as_deref());
        for kv in &o.params {
            let Some((k, v)) = kv.split_once('=') else {
                return Err(rcgd::Error::Config(format!("`--param {kv}` is not KEY=VALUE")).into());
            };
            cfg.set(k.trim(), v.trim());
        }
        cfg.set_opt("alpha", o.alpha);
    }
    if !cfg.contains("objective") && cfg.contains("H") {
        cfg.set("objective", "quadratic");
    }
    Ok(cfg)
}

/// Build the objective from `objective` and every key not in `known`.
fn objective_from(cfg: &Config, known: &[&str]) -> anyhow::Result<Arc<dyn Objective>> {
    let name: String = cfg
        .get("objective")?
        .ok_or_else(|| rcgd::Error::Config("missing `objective` (or `H`)".into()))?;
    let allowed = objective_param_names(&name)?;
    let mut params = Params::new();
    for (k, v) in cfg.entries() {
        if COMMON_KEYS.contains(&k.as_str()) || known.contains(&k.as_str()) {
            continue;
        }
        if !allowed.contains(&k.as_str()) {
            return Err(rcgd::Error::Config(format!("unknown key `{k}`")).into());
        }
        params.insert(k.clone(), v.clone());
    }
    Ok(builtin_objective(&name, &params)?)
}

fn required<T: std::str::FromStr>(cfg: &Config, key: &str) -> anyhow::Result<T>
where
    T::Err: std::fmt::Display,
{
    Ok(cfg
        .get(key)?
        .ok_or_else(|| rcgd::Error::Config(format!("missing `{key}`")))?)
}

fn with_threads<T: Send>(cfg: &Config, f: impl FnOnce() -> anyhow::Result<T> + Send) -> anyhow::Result<T> {
    match cfg.get::<usize>("threads")? {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(f),
        None => f(),
    }
}

fn saddle_or_first(obj: &dyn Objective, idx: Option<usize>) -> anyhow::Result<usize> {
    let cps = obj.critical_points();
    let k = match idx {
        Some(k) => k,
        None => cps
            .iter()
            .position(|c| c.kind == PointKind::StrictSaddle)
            .ok_or_else(|| rcgd::Error::Precondition(format!("{} has no registered strict saddle", obj.name())))?,
    };
    match cps.get(k) {
        Some(c) if c.kind == PointKind::StrictSaddle => Ok(k),
        Some(c) => Err(rcgd::Error::Precondition(format!("critical point {k} is {}", c.kind.as_str())).into()),
        None => Err(rcgd::Error::InvalidParameter(format!("no critical point with index {k}")).into()),
    }
}

fn cmd_run(args: RunArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let mut cfg = base_config(&args.common, Some(&args.objective))?;
    cfg.set_opt("x0", args.x0.as_deref());
    cfg.set_opt("max_iters", args.iters);
    cfg.set_opt("stop_tol_grad", args.tol_grad);
    cfg.set_opt("stop_tol_x", args.tol_x);
    cfg.set_opt("patience", args.patience);
    cfg.set_opt("region_radius", args.region_radius);
    cfg.set_opt("saddle", args.saddle);

    let obj = objective_from(&cfg, RUN_KEYS)?;
    let alpha = StepSize::new(required(&cfg, "alpha")?, &*obj)?;
    let x0 = parse_vector(&required::<String>(&cfg, "x0")?).map_err(|e| rcgd::Error::Config(e.to_string()))?;
    let seed = cfg.get_or("seed", 0u64)?;
    let defaults = StopRule::default();
    let stop = StopRule {
        tol_grad: cfg.get_or("stop_tol_grad", defaults.tol_grad)?,
        tol_x: cfg.get_or("stop_tol_x", defaults.tol_x)?,
        patience: cfg.get("patience")?,
        region_radius: cfg.get_or("region_radius", defaults.region_radius)?,
    };
    let max_iters = cfg.get_or("max_iters", 10_000usize)?;
    let stream = CoordinateStream::new(seed, obj.dim());
    let mut traj = run(&*obj, alpha, &stream, &x0, max_iters, &stop)?;

    let saddle = cfg.get::<usize>("saddle")?.map(|k| saddle_or_first(&*obj, Some(k))).transpose()?;
    if let Some(k) = saddle {
        let geom = SaddleGeometry::build(
            &*obj,
            &obj.critical_points()[k],
            alpha.get(),
            &GeometryOptions {
                seed,
                ..GeometryOptions::default()
            },
        )?;
        attach_geometry(&mut traj, &*obj, &geom);
    }

    let mut out = Outputs::new(&args.common.out)?;
    let mut csv = Vec::new();
    traj.write_csv(&mut csv)?;
    out.write("trajectory.csv", &csv)?;

    if args.plot {
        let target: Vector = match saddle {
            Some(k) => obj.critical_points()[k].location.clone(),
            None => obj
                .critical_points()
                .iter()
                .map(|c| &c.location)
                .min_by(|a, b| (*a - traj.last()).norm().total_cmp(&(*b - traj.last()).norm()))
                .cloned()
                .unwrap_or_else(|| traj.last().clone()),
        };
        let log_dist: Vec<f64> = traj.x.iter().map(|x| (x - &target).norm().ln()).collect();
        let svg = plot::svg(&[
            plot::Series {
                title: "f(x_t)",
                values: &traj.f_values,
            },
            plot::Series {
                title: "ln ||x_t - x*||",
                values: &log_dist,
            },
        ]);
        out.write("plot.svg", svg.as_bytes())?;
    }

    println!(
        "{} steps, termination {:?}, f = {:.6e}, ||grad f|| = {:.3e}",
        traj.steps(),
        traj.termination,
        traj.f_values.last().unwrap(),
        traj.grad_norms.last().unwrap()
    );
    out.finish("run", &cfg, vec![seed], start)
}

fn cmd_lyapunov(args: LyapunovArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let mut cfg = base_config(&args.common, Some(&args.objective))?;
    cfg.set_opt("point", args.point);
    cfg.set_opt("horizon", args.horizon);
    cfg.set_opt("reorth_interval", args.reorth);

    let obj = objective_from(&cfg, LYAPUNOV_KEYS)?;
    let alpha: f64 = required(&cfg, "alpha")?;
    StepSize::new(alpha, &*obj)?;
    let seed = cfg.get_or("seed", 0u64)?;
    let point = match cfg.get::<usize>("point")? {
        Some(k) => k,
        None => obj
            .critical_points()
            .iter()
            .position(|c| c.kind == PointKind::StrictSaddle)
            .unwrap_or(0),
    };
    let cp = obj
        .critical_points()
        .get(point)
        .ok_or_else(|| rcgd::Error::InvalidParameter(format!("no critical point with index {point}")))?;
    let sys = LinearizedSystem::at(&*obj, cp, alpha, CoordinateStream::new(seed, obj.dim()))?;
    let opts = SpectrumOptions::new(cfg.get_or("horizon", 1_000_000usize)?)
        .reorth_interval(cfg.get_or("reorth_interval", rcgd::lyapunov::DEFAULT_REORTH_INTERVAL)?);
    let spec = lyapunov_spectrum(&sys, opts)?;

    let mut out = Outputs::new(&args.common.out)?;
    out.json("spectrum.json", &spec)?;
    println!("{}", serde_json::to_string(&spec)?);
    out.finish("lyapunov", &cfg, vec![seed], start)
}

fn cmd_geometry(args: GeometryArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let mut cfg = base_config(&args.common, Some(&args.objective))?;
    cfg.set_opt("saddle", args.saddle);
    cfg.set_opt("grid", args.grid);
    cfg.set_opt("sigma_samples", args.sigma_samples);
    cfg.set_opt("sigma_radius", args.sigma_radius);
    cfg.set_opt("inclusion_samples", args.inclusion_samples);

    let obj = objective_from(&cfg, GEOMETRY_KEYS)?;
    let alpha: f64 = required(&cfg, "alpha")?;
    StepSize::new(alpha, &*obj)?;
    let seed = cfg.get_or("seed", 0u64)?;
    let k = saddle_or_first(&*obj, cfg.get("saddle")?)?;
    let defaults = GeometryOptions::default();
    let opts = GeometryOptions {
        sigma_radius: cfg.get_or("sigma_radius", defaults.sigma_radius)?,
        sigma_samples: cfg.get_or("sigma_samples", defaults.sigma_samples)?,
        probes: defaults.probes,
        grid: cfg.get_or("grid", defaults.grid)?,
        inclusion_samples: cfg.get_or("inclusion_samples", defaults.inclusion_samples)?,
        seed,
    };
    let geom = with_threads(&cfg, || Ok(SaddleGeometry::build(&*obj, &obj.critical_points()[k], alpha, &opts)?))?;

    let mut out = Outputs::new(&args.common.out)?;
    let summary = geom.summary();
    out.json("geometry.json", &summary)?;
    println!("{}", serde_json::to_string(&summary)?);
    out.finish("geometry", &cfg, vec![seed], start)
}

fn cmd_escape(args: EscapeArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let mut cfg = base_config(&args.common, Some(&args.objective))?;
    cfg.set_opt("trials", args.trials);
    cfg.set_opt("max_iters", args.max_iters);
    cfg.set_opt("x0", args.x0.as_deref());
    cfg.set_opt("x0_radius", args.x0_radius);
    cfg.set_opt("x0_distribution", args.x0_distribution.as_deref());
    cfg.set_opt("saddle", args.saddle.as_deref());
    cfg.set_opt("tail_fraction", args.tail_fraction);
    cfg.set_opt("tol_point", args.tol_point);
    cfg.set_opt("tol_grad", args.tol_grad);

    let mut trial_cfg = cfg.clone();
    trial_cfg.take::<usize>("threads")?;
    let tc = TrialConfig::from_config(&trial_cfg)?;
    let obj = tc.build_objective()?;
    let report = with_threads(&cfg, || Ok(escape_experiment_with(&tc, &*obj)?))?;

    let mut out = Outputs::new(&args.common.out)?;
    let mut csv = Vec::new();
    report.write_trials_csv(&mut csv)?;
    out.write("trials.csv", &csv)?;
    out.json("summary.json", &report)?;
    let c = report.counts;
    println!(
        "{} trials: to_min {}, to_strict_saddle {}, diverged {}, undecided {}",
        report.trials, c.to_min, c.to_strict_saddle, c.diverged, c.undecided
    );
    out.finish("escape", &cfg, vec![tc.seed_base], start)
}

fn cmd_check(common: CommonArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let cfg = base_config(&common, None)?;
    let seed = cfg.get_or("seed", 0u64)?;
    let outcomes = with_threads(&cfg, || Ok(rcgd::checks::run_all(seed)))?;
    for c in &outcomes {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let mut out = Outputs::new(&common.out)?;
    out.json("check.json", &outcomes)?;
    out.finish("check", &cfg, vec![seed], start)?;
    let failed = outcomes.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        bail!("{failed} invariant checks failed");
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<rcgd::Error>() {
        Some(e) if e.is_config() => 2,
        Some(e) if e.is_precondition() => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Lyapunov(a) => cmd_lyapunov(a),
        Command::Geometry(a) => cmd_geometry(a),
        Command::Escape(a) => cmd_escape(a),
        Command::Check(a) => cmd_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
