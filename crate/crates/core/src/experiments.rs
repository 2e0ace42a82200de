//! Monte-Carlo harness over random starting points and coordinate streams.
//!
//! Each trial draws `x0` from a ball and a stream from its own seed, runs
//! RCGD, and classifies where the orbit ends up. Trials are independent and
//! run in parallel; results are collected in trial order, so a report is a
//! pure function of its [`TrialConfig`].

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::dynamics::{indicator, run, StepSize, StopRule, Termination, Trajectory};
use crate::geometry::{GeometryOptions, SaddleGeometry};
use crate::lyapunov::empirical_exponent;
use crate::numdiff;
use crate::objective::{builtin_objective, objective_param_names, CriticalPoint, Objective, Params, PointKind};
use crate::sampling;
use crate::stream::{mix64, CoordinateStream};
use crate::{Error, Result, Vector};

/// Visit-count tail probabilities are reported for `k = 1..=S_TAIL_LEN`.
pub const S_TAIL_LEN: usize = 10;

// ---------------------------------------------------------------------------
// Classification

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitClass {
    ToMin,
    ToStrictSaddle,
    Diverged,
    Undecided,
}

impl LimitClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            LimitClass::ToMin => "to_min",
            LimitClass::ToStrictSaddle => "to_strict_saddle",
            LimitClass::Diverged => "diverged",
            LimitClass::Undecided => "undecided",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyTolerance {
    /// Distance from the final iterate to a registered point.
    pub point: f64,
    /// Gradient norm at the final iterate.
    pub grad: f64,
}

impl Default for ClassifyTolerance {
    fn default() -> Self {
        Self {
            point: 1e-6,
            grad: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Classification {
    pub class: LimitClass,
    /// Registry index of the limit point.
    pub limit_id: Option<usize>,
}

/// Classify the end of a finished trajectory against a critical-point registry.
pub fn classify_limit(traj: &Trajectory, registry: &[CriticalPoint], tol: &ClassifyTolerance) -> Classification {
    let undecided = Classification {
        class: LimitClass::Undecided,
        limit_id: None,
    };
    if matches!(traj.termination, Termination::RegionExit | Termination::NonFinite) {
        return Classification {
            class: LimitClass::Diverged,
            limit_id: None,
        };
    }
    let last = traj.last();
    if !(traj.grad_norms.last().copied().unwrap_or(f64::INFINITY) <= tol.grad) {
        return undecided;
    }
    let nearest = registry
        .iter()
        .enumerate()
        .map(|(k, cp)| (k, (&cp.location - last).norm()))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    match nearest {
        Some((k, dist)) if dist <= tol.point => {
            let class = match registry[k].kind {
                PointKind::LocalMin => LimitClass::ToMin,
                PointKind::StrictSaddle => LimitClass::ToStrictSaddle,
                PointKind::Degenerate => return undecided,
            };
            Classification {
                class,
                limit_id: Some(k),
            }
        }
        _ => undecided,
    }
}

// ---------------------------------------------------------------------------
// Per-trajectory statistics

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IndicatorStats {
    /// Steps with a nonzero gradient.
    pub steps: usize,
    pub indicator_hits: usize,
    pub argmax_hits: usize,
    pub freq_i: f64,
    pub freq_argmax: f64,
}

/// Counts over steps with a nonzero gradient; the indicator is undefined at
/// critical points.
fn indicator_counts(traj: &Trajectory) -> (usize, usize, usize) {
    let mut counts = (0, 0, 0);
    for t in 0..traj.steps() {
        if traj.grad_norms[t] > 0.0 {
            counts.0 += 1;
            counts.1 += usize::from(traj.indicators[t]);
            counts.2 += usize::from(traj.argmax_hits[t]);
        }
    }
    counts
}

/// Frequencies of `I_t = 1` and of `i_t` hitting the largest gradient
/// component. Needs at least 100 steps.
pub fn indicator_stats(traj: &Trajectory) -> Result<IndicatorStats> {
    if traj.steps() < 100 {
        return Err(Error::Precondition(format!(
            "indicator statistics need at least 100 steps, got {}",
            traj.steps()
        )));
    }
    let (steps, indicator_hits, argmax_hits) = indicator_counts(traj);
    let freq = |n: usize| if steps == 0 { f64::NAN } else { n as f64 / steps as f64 };
    Ok(IndicatorStats {
        steps,
        indicator_hits,
        argmax_hits,
        freq_i: freq(indicator_hits),
        freq_argmax: freq(argmax_hits),
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct DecayReport {
    pub descent_checked: usize,
    /// Steps with `f(x_{t+1}) > f(x_t) - (alpha/2) (d_i f(x_t))^2 + slack`.
    pub descent_violations: usize,
    pub decay_checked: usize,
    /// Steps with `I_t = 1`, `x_t ∈ U1`, `f(x_t) >= f(x*)` and
    /// `f(x_{t+1}) - f(x*) > (1 - alpha sigma^2 / (M d)) (f(x_t) - f(x*)) + slack`.
    pub decay_violations: usize,
}

impl DecayReport {
    pub fn merge(self, other: Self) -> Self {
        Self {
            descent_checked: self.descent_checked + other.descent_checked,
            descent_violations: self.descent_violations + other.descent_violations,
            decay_checked: self.decay_checked + other.decay_checked,
            decay_violations: self.decay_violations + other.decay_violations,
        }
    }
}

fn slack(f: f64) -> f64 {
    1e-12 * (1.0 + f.abs())
}

/// Re-check the sufficient-decrease inequality on every recorded step, and
/// the contraction of `f - f(x*)` near a saddle when a geometry is given.
pub fn decay_check(traj: &Trajectory, obj: &dyn Objective, geom: Option<&SaddleGeometry>) -> DecayReport {
    let alpha = traj.alpha;
    let d = obj.dim() as f64;
    let mut rep = DecayReport::default();
    for t in 0..traj.steps() {
        let (x, i) = (&traj.x[t], traj.coords[t]);
        let (f0, f1) = (traj.f_values[t], traj.f_values[t + 1]);
        let g = obj.partial(x, i);
        rep.descent_checked += 1;
        if f1 > f0 - 0.5 * alpha * g * g + slack(f0) {
            rep.descent_violations += 1;
        }
        if let Some(geom) = geom {
            let s0 = f0 - geom.saddle_value;
            if traj.indicators[t] && geom.in_u1(x) && s0 >= 0.0 {
                let factor = 1.0 - alpha * geom.sigma * geom.sigma / (geom.hessian_bound * d);
                rep.decay_checked += 1;
                if f1 - geom.saddle_value > factor * s0 + slack(f0) {
                    rep.decay_violations += 1;
                }
            }
        }
    }
    rep
}

/// Record membership of every state in `S`.
pub fn attach_geometry(traj: &mut Trajectory, obj: &dyn Objective, geom: &SaddleGeometry) {
    traj.s_visits = Some(traj.x.iter().map(|x| geom.in_s(obj, x)).collect());
}

/// Number of states of the trajectory inside `S`.
pub fn s_visit_count(traj: &Trajectory, obj: &dyn Objective, geom: &SaddleGeometry) -> usize {
    match &traj.s_visits {
        Some(v) => v.iter().filter(|&&b| b).count(),
        None => traj.x.iter().filter(|x| geom.in_s(obj, x)).count(),
    }
}

// ---------------------------------------------------------------------------
// Residual of the linearization

#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub samples: usize,
    pub lipschitz: f64,
    /// Largest `|F_i|` over samples and coordinates.
    pub max_residual: f64,
    /// Cases with `|F_i| > (alpha L / 2) ||x - x*||^2`.
    pub integrated_violations: usize,
    /// Cases with `||D_x F|| > 1.1 alpha L ||x - x*||` for the
    /// finite-difference Jacobian.
    pub jacobian_violations: usize,
    /// Largest gap between the finite-difference and analytic Jacobians.
    pub max_fd_error: f64,
}

/// Check the residual `F = alpha e_i e_i^T (H (x - x*) - grad f(x))` of the
/// linearization at `saddle` on `samples` points of the ball of radius
/// `radius`, against a Hessian Lipschitz constant `lipschitz`.
pub fn residual_check(
    obj: &dyn Objective,
    saddle: &CriticalPoint,
    alpha: StepSize,
    lipschitz: f64,
    samples: usize,
    radius: f64,
    seed: u64,
) -> ResidualReport {
    let a = alpha.get();
    let center = &saddle.location;
    let h = obj.hessian(center);
    let d = obj.dim();
    // Same reduction order as a quadratic's partial derivative, so F
    // vanishes exactly for quadratic objectives.
    let residual = |x: &Vector, i: usize| -> f64 {
        let z = x - center;
        a * (h.row(i).transpose().dot(&z) - obj.partial(x, i))
    };
    let mut rng = sampling::rng(seed, 0x4e51);
    let mut rep = ResidualReport {
        samples,
        lipschitz,
        max_residual: 0.0,
        integrated_violations: 0,
        jacobian_violations: 0,
        max_fd_error: 0.0,
    };
    for _ in 0..samples {
        let x = sampling::uniform_ball(&mut rng, center, radius);
        let r = (&x - center).norm();
        let hx = obj.hessian(&x);
        for i in 0..d {
            let f = residual(&x, i);
            rep.max_residual = rep.max_residual.max(f.abs());
            if f.abs() > 0.5 * a * lipschitz * r * r {
                rep.integrated_violations += 1;
            }
            // D_x F has a single nonzero row, so its norm is that row's norm.
            let fd = numdiff::gradient(|y| residual(y, i), &x);
            let analytic = (h.row(i) - hx.row(i)).transpose() * a;
            rep.max_fd_error = rep.max_fd_error.max((&fd - &analytic).norm());
            if fd.norm() > 1.1 * a * lipschitz * r {
                rep.jacobian_violations += 1;
            }
        }
    }
    rep
}

// ---------------------------------------------------------------------------
// Trial configuration

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum X0Distribution {
    /// Uniform in the ball `B(x0_center, x0_radius)`.
    UniformBall,
    /// Every trial starts at `x0_center`.
    Fixed,
}

impl std::str::FromStr for X0Distribution {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "uniform_ball" => Ok(Self::UniformBall),
            "fixed" => Ok(Self::Fixed),
            other => Err(format!("unknown distribution `{other}` (expected uniform_ball or fixed)")),
        }
    }
}

/// Configuration for [`escape_experiment`].
#[derive(Clone, Debug, Serialize)]
pub struct TrialConfig {
    pub objective: String,
    pub params: Params,
    pub alpha: f64,
    /// Defaults to the saddle used for the geometry, else the origin.
    pub x0_center: Option<Vec<f64>>,
    pub x0_radius: f64,
    pub x0_distribution: X0Distribution,
    pub seed_base: u64,
    pub trials: usize,
    pub max_iters: usize,
    pub tol: ClassifyTolerance,
    pub stop: StopRule,
    /// Registry index of the saddle for `S`-visit counting. Defaults to the
    /// first registered strict saddle; `none` disables the geometry.
    pub saddle: Option<usize>,
    pub tail_fraction: f64,
}

/// Keys read by [`TrialConfig::from_config`]; all others are objective
/// parameters.
pub const TRIAL_KEYS: &[&str] = &[
    "objective",
    "alpha",
    "x0",
    "x0_radius",
    "x0_distribution",
    "seed",
    "trials",
    "max_iters",
    "tol_point",
    "tol_grad",
    "stop_tol_grad",
    "stop_tol_x",
    "patience",
    "region_radius",
    "saddle",
    "tail_fraction",
];

impl TrialConfig {
    /// A configuration with defaults for everything but the objective and
    /// step size.
    pub fn new(objective: &str, params: Params, alpha: f64) -> Self {
        Self {
            objective: objective.to_owned(),
            params,
            alpha,
            x0_center: None,
            x0_radius: 1.0,
            x0_distribution: X0Distribution::UniformBall,
            seed_base: 0,
            trials: 100,
            max_iters: 100_000,
            tol: ClassifyTolerance::default(),
            stop: StopRule::default(),
            saddle: None,
            tail_fraction: 0.5,
        }
    }

    pub fn from_config(cfg: &Config) -> Result<Self> {
        let mut cfg = cfg.clone();
        let objective: String = cfg
            .take("objective")?
            .ok_or_else(|| Error::Config("missing key `objective`".into()))?;
        let alpha: f64 = cfg.take("alpha")?.ok_or_else(|| Error::Config("missing key `alpha`".into()))?;
        let mut out = Self::new(&objective, Params::new(), alpha);
        if let Some(x0) = cfg.take::<String>("x0")? {
            let v = crate::objective::parse_vector(&x0).map_err(|e| Error::Config(e.to_string()))?;
            out.x0_center = Some(v.as_slice().to_vec());
        }
        out.x0_radius = cfg.take("x0_radius")?.unwrap_or(out.x0_radius);
        out.x0_distribution = cfg.take("x0_distribution")?.unwrap_or(out.x0_distribution);
        out.seed_base = cfg.take("seed")?.unwrap_or(out.seed_base);
        out.trials = cfg.take("trials")?.unwrap_or(out.trials);
        out.max_iters = cfg.take("max_iters")?.unwrap_or(out.max_iters);
        out.tol.point = cfg.take("tol_point")?.unwrap_or(out.tol.point);
        out.tol.grad = cfg.take("tol_grad")?.unwrap_or(out.tol.grad);
        out.stop.tol_grad = cfg.take("stop_tol_grad")?.unwrap_or(out.stop.tol_grad);
        out.stop.tol_x = cfg.take("stop_tol_x")?.unwrap_or(out.stop.tol_x);
        out.stop.patience = cfg.take("patience")?.or(out.stop.patience);
        out.stop.region_radius = cfg.take("region_radius")?.unwrap_or(out.stop.region_radius);
        match cfg.take::<String>("saddle")?.as_deref() {
            None => {}
            Some("none") => out.saddle = Some(usize::MAX),
            Some(s) => {
                out.saddle = Some(s.parse().map_err(|e| Error::Config(format!("bad value `{s}` for `saddle`: {e}")))?)
            }
        }
        out.tail_fraction = cfg.take("tail_fraction")?.unwrap_or(out.tail_fraction);
        let allowed = objective_param_names(&out.objective)?;
        if let Some(k) = cfg.entries().keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown key `{k}`")));
        }
        out.params = cfg.into_entries();
        Ok(out)
    }

    pub fn build_objective(&self) -> Result<Arc<dyn Objective>> {
        builtin_objective(&self.objective, &self.params)
    }

    /// Resolve the saddle index: an explicit index must name a strict
    /// saddle; by default the first registered one is used.
    pub fn saddle_index(&self, obj: &dyn Objective) -> Result<Option<usize>> {
        let cps = obj.critical_points();
        match self.saddle {
            Some(usize::MAX) => Ok(None),
            Some(k) => match cps.get(k) {
                Some(cp) if cp.kind == PointKind::StrictSaddle => Ok(Some(k)),
                Some(cp) => Err(Error::Precondition(format!(
                    "critical point {k} is {}, not a strict saddle",
                    cp.kind.as_str()
                ))),
                None => Err(Error::InvalidParameter(format!(
                    "saddle index {k} out of range ({} registered points)",
                    cps.len()
                ))),
            },
            None => Ok(cps.iter().position(|cp| cp.kind == PointKind::StrictSaddle)),
        }
    }

    pub fn validate(&self, obj: &dyn Objective) -> Result<StepSize> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be >= 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        if !(self.x0_radius >= 0.0) {
            return Err(Error::InvalidParameter("x0_radius must be nonnegative".into()));
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction < 1.0) {
            return Err(Error::InvalidParameter("tail_fraction must lie in (0, 1)".into()));
        }
        if let Some(c) = &self.x0_center {
            if c.len() != obj.dim() {
                return Err(Error::DimensionMismatch {
                    expected: obj.dim(),
                    got: c.len(),
                });
            }
        }
        StepSize::new(self.alpha, obj)
    }
}

// ---------------------------------------------------------------------------
// Escape experiment

#[derive(Clone, Debug, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub class: LimitClass,
    pub limit_id: Option<usize>,
    /// Fitted convergence exponent, for trials classified to a critical point.
    pub exponent: Option<f64>,
    /// `None` for runs shorter than 100 steps.
    pub freq_i: Option<f64>,
    pub s_visits: Option<usize>,
    pub iters: usize,
    pub termination: Termination,
    /// Set when the trial aborted with an error.
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ClassCounts {
    pub to_min: usize,
    pub to_strict_saddle: usize,
    pub diverged: usize,
    pub undecided: usize,
}

impl ClassCounts {
    pub fn total(&self) -> usize {
        self.to_min + self.to_strict_saddle + self.diverged + self.undecided
    }

    fn add(&mut self, c: LimitClass) {
        match c {
            LimitClass::ToMin => self.to_min += 1,
            LimitClass::ToStrictSaddle => self.to_strict_saddle += 1,
            LimitClass::Diverged => self.diverged += 1,
            LimitClass::Undecided => self.undecided += 1,
        }
    }
}

/// Step-level counts pooled over all trials.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct PooledSteps {
    /// Steps with a nonzero gradient.
    pub steps: usize,
    pub indicator_hits: usize,
    pub argmax_hits: usize,
    pub decay: DecayReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct EscapeReport {
    pub trials: usize,
    pub counts: ClassCounts,
    pub pooled: PooledSteps,
    /// Mean fitted exponent over trials classified `to_min`.
    pub mean_min_exponent: Option<f64>,
    /// `P(S-visits >= k)` for `k = 1..=10`, when a saddle geometry is used.
    pub s_visit_tail: Option<Vec<f64>>,
    #[serde(skip)]
    pub records: Vec<TrialRecord>,
}

/// Per-trial seed derived from the base seed.
pub fn trial_seed(seed_base: u64, trial: usize) -> u64 {
    mix64(seed_base.wrapping_add(trial as u64))
}

struct TrialOutcome {
    record: TrialRecord,
    pooled: PooledSteps,
}

fn run_trial(
    cfg: &TrialConfig,
    obj: &dyn Objective,
    alpha: StepSize,
    center: &Vector,
    geom: Option<&SaddleGeometry>,
    trial: usize,
) -> TrialOutcome {
    let seed = trial_seed(cfg.seed_base, trial);
    let x0 = match cfg.x0_distribution {
        X0Distribution::Fixed => center.clone(),
        X0Distribution::UniformBall => {
            let mut rng = sampling::rng(seed, 0x0);
            sampling::uniform_ball(&mut rng, center, cfg.x0_radius)
        }
    };
    let stream = CoordinateStream::new(seed, obj.dim());
    let mut record = TrialRecord {
        trial,
        seed,
        class: LimitClass::Undecided,
        limit_id: None,
        exponent: None,
        freq_i: None,
        s_visits: None,
        iters: 0,
        termination: Termination::MaxIters,
        error: None,
    };
    let mut traj = match run(obj, alpha, &stream, &x0, cfg.max_iters, &cfg.stop) {
        Ok(t) => t,
        Err(e) => {
            record.error = Some(e.to_string());
            return TrialOutcome {
                record,
                pooled: PooledSteps::default(),
            };
        }
    };
    let registry = obj.critical_points();
    let c = classify_limit(&traj, registry, &cfg.tol);
    record.class = c.class;
    record.limit_id = c.limit_id;
    record.iters = traj.steps();
    record.termination = traj.termination;
    if let Some(k) = c.limit_id {
        record.exponent = empirical_exponent(&traj, &registry[k].location, cfg.tail_fraction).ok();
    }
    record.freq_i = indicator_stats(&traj).ok().map(|s| s.freq_i);
    if let Some(g) = geom {
        attach_geometry(&mut traj, obj, g);
        record.s_visits = Some(s_visit_count(&traj, obj, g));
    }
    let (steps, indicator_hits, argmax_hits) = indicator_counts(&traj);
    TrialOutcome {
        record,
        pooled: PooledSteps {
            steps,
            indicator_hits,
            argmax_hits,
            decay: decay_check(&traj, obj, geom),
        },
    }
}

/// Run all trials of `cfg` on the current rayon pool.
pub fn escape_experiment(cfg: &TrialConfig) -> Result<EscapeReport> {
    let obj = cfg.build_objective()?;
    escape_experiment_with(cfg, &*obj)
}

/// [`escape_experiment`] for an objective built by the caller.
pub fn escape_experiment_with(cfg: &TrialConfig, obj: &dyn Objective) -> Result<EscapeReport> {
    let alpha = cfg.validate(obj)?;
    let saddle = cfg.saddle_index(obj)?;
    let geom = match saddle {
        Some(k) => Some(SaddleGeometry::build(
            obj,
            &obj.critical_points()[k],
            alpha.get(),
            &GeometryOptions {
                seed: cfg.seed_base,
                ..GeometryOptions::default()
            },
        )?),
        None => None,
    };
    let center = match (&cfg.x0_center, saddle) {
        (Some(c), _) => Vector::from_column_slice(c),
        (None, Some(k)) => obj.critical_points()[k].location.clone(),
        (None, None) => Vector::zeros(obj.dim()),
    };

    let outcomes: Vec<TrialOutcome> = (0..cfg.trials)
        .into_par_iter()
        .map(|k| run_trial(cfg, obj, alpha, &center, geom.as_ref(), k))
        .collect();

    let mut counts = ClassCounts::default();
    let mut pooled = PooledSteps::default();
    let mut records = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        counts.add(o.record.class);
        pooled.steps += o.pooled.steps;
        pooled.indicator_hits += o.pooled.indicator_hits;
        pooled.argmax_hits += o.pooled.argmax_hits;
        pooled.decay = pooled.decay.merge(o.pooled.decay);
        records.push(o.record);
    }
    let min_exponents: Vec<f64> = records
        .iter()
        .filter(|r| r.class == LimitClass::ToMin)
        .filter_map(|r| r.exponent)
        .collect();
    let mean_min_exponent =
        (!min_exponents.is_empty()).then(|| min_exponents.iter().sum::<f64>() / min_exponents.len() as f64);
    let s_visit_tail = geom.as_ref().map(|_| {
        (1..=S_TAIL_LEN)
            .map(|k| {
                let hits = records.iter().filter(|r| r.s_visits.unwrap_or(0) >= k).count();
                hits as f64 / records.len() as f64
            })
            .collect()
    });
    Ok(EscapeReport {
        trials: cfg.trials,
        counts,
        pooled,
        mean_min_exponent,
        s_visit_tail,
        records,
    })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_owned(), |v| v.to_string())
}

impl EscapeReport {
    /// `trial,seed,class,limit_id,exponent,freq_I,s_visits,iters`, with `-`
    /// for missing values.
    pub fn write_trials_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "trial,seed,class,limit_id,exponent,freq_I,s_visits,iters")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.trial,
                r.seed,
                r.class.as_str(),
                opt(r.limit_id),
                opt(r.exponent),
                opt(r.freq_i),
                opt(r.s_visits),
                r.iters
            )?;
        }
        Ok(())
    }
}

/// Whether `f` is non-increasing along the trajectory up to rounding slack.
pub fn is_monotone(traj: &Trajectory) -> bool {
    traj.f_values.windows(2).all(|w| w[1] <= w[0] + slack(w[0]))
}

/// Whether `I_t` at state `t` agrees with a recomputation from the
/// objective's gradient.
pub fn indicator_consistent(traj: &Trajectory, obj: &dyn Objective) -> bool {
    (0..traj.steps()).all(|t| {
        let g = obj.gradient(&traj.x[t]);
        traj.indicators[t] == (g.norm() > 0.0 && indicator(&g, traj.coords[t]))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{CoupledSaddle, Quadratic, SeparableQuartic};

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn quad_params(h: &str) -> Params {
        Params::from([("H".to_owned(), h.to_owned())])
    }

    fn constant_traj(x: Vector, grad_norm: f64, termination: Termination) -> Trajectory {
        Trajectory {
            x: vec![x.clone(), x],
            f_values: vec![0.0, 0.0],
            grad_norms: vec![grad_norm, grad_norm],
            coords: vec![0],
            indicators: vec![false],
            argmax_hits: vec![true],
            s_visits: None,
            termination,
            alpha: 0.1,
        }
    }

    #[test]
    fn classify_examples() {
        let q = SeparableQuartic::new(2, 2.0).unwrap();
        let tol = ClassifyTolerance::default();
        let at_min = constant_traj(v(&[1.0, -1.0]), 0.0, Termination::Converged);
        let c = classify_limit(&at_min, q.critical_points(), &tol);
        assert_eq!(c.class, LimitClass::ToMin);
        assert_eq!(q.critical_points()[c.limit_id.unwrap()].location, v(&[1.0, -1.0]));

        let at_saddle = constant_traj(v(&[0.0, 0.0]), 0.0, Termination::Converged);
        assert_eq!(classify_limit(&at_saddle, q.critical_points(), &tol).class, LimitClass::ToStrictSaddle);

        let gone = constant_traj(v(&[5.0, 5.0]), 1.0, Termination::RegionExit);
        assert_eq!(classify_limit(&gone, q.critical_points(), &tol).class, LimitClass::Diverged);

        let moving = constant_traj(v(&[0.5, 0.5]), 0.3, Termination::MaxIters);
        assert_eq!(classify_limit(&moving, q.critical_points(), &tol).class, LimitClass::Undecided);
    }

    #[test]
    fn indicator_stats_needs_100_steps() {
        let q = Quadratic::diagonal(&[2.0, 3.0]);
        let a = StepSize::new(0.1, &q).unwrap();
        let traj = run(&q, a, &CoordinateStream::new(1, 2), &v(&[1.0, 1.0]), 50, &StopRule::default()).unwrap();
        assert!(matches!(indicator_stats(&traj), Err(Error::Precondition(_))));
    }

    #[test]
    fn indicator_in_one_dimension_is_always_set() {
        let q = Quadratic::diagonal(&[0.5]);
        let a = StepSize::new(0.01, &q).unwrap();
        let traj = run(&q, a, &CoordinateStream::new(1, 1), &v(&[1.0]), 500, &StopRule::default()).unwrap();
        let s = indicator_stats(&traj).unwrap();
        assert_eq!(s.freq_i, 1.0);
        assert_eq!(s.freq_argmax, 1.0);
    }

    #[test]
    fn quartic_frequencies_match_one_over_d() {
        let q = SeparableQuartic::new(3, 2.0).unwrap();
        let a = StepSize::new(0.05, &q).unwrap();
        let stop = StopRule {
            tol_grad: 0.0,
            ..StopRule::default()
        };
        let traj = run(&q, a, &CoordinateStream::new(3, 3), &v(&[0.4, -0.3, 0.2]), 20_000, &stop).unwrap();
        let s = indicator_stats(&traj).unwrap();
        let p = 1.0 / 3.0;
        let sd = (p * (1.0 - p) / s.steps as f64).sqrt();
        assert!(s.freq_i >= p - 3.0 * sd, "{s:?}");
        assert!((s.freq_argmax - p).abs() <= 3.0 * sd, "{s:?}");
    }

    #[test]
    fn descent_holds_on_corpus_runs() {
        let q = SeparableQuartic::new(2, 2.0).unwrap();
        let a = StepSize::new(0.08, &q).unwrap();
        let traj = run(&q, a, &CoordinateStream::new(8, 2), &v(&[0.2, 1.3]), 2000, &StopRule::default()).unwrap();
        let rep = decay_check(&traj, &q, None);
        assert_eq!(rep.descent_violations, 0);
        assert_eq!(rep.descent_checked, traj.steps());
        assert!(is_monotone(&traj));
        assert!(indicator_consistent(&traj, &q));
    }

    #[test]
    fn decay_near_quadratic_saddle() {
        let q = Quadratic::diagonal(&[1.0, -1.0]);
        let geom = SaddleGeometry::build(&q, &q.critical_points()[0], 0.1, &GeometryOptions::default()).unwrap();
        let a = StepSize::new(0.1, &q).unwrap();
        let mut checked = 0;
        for seed in 0..20 {
            let traj = run(&q, a, &CoordinateStream::new(seed, 2), &v(&[0.8, 0.05]), 200, &StopRule::default()).unwrap();
            let rep = decay_check(&traj, &q, Some(&geom));
            assert_eq!(rep.descent_violations, 0);
            assert_eq!(rep.decay_violations, 0);
            checked += rep.decay_checked;
        }
        assert!(checked > 0);
    }

    #[test]
    fn s_visits_examples() {
        let q = Quadratic::diagonal(&[1.0, -1.0]);
        let geom = SaddleGeometry::build(&q, &q.critical_points()[0], 0.1, &GeometryOptions::default()).unwrap();
        let negative = constant_traj(v(&[0.0, 0.5]), 0.5, Termination::MaxIters);
        assert_eq!(s_visit_count(&negative, &q, &geom), 0);
        let at_saddle = constant_traj(v(&[0.0, 0.0]), 0.0, Termination::Converged);
        assert_eq!(s_visit_count(&at_saddle, &q, &geom), 0);
    }

    #[test]
    fn residual_vanishes_for_quadratics() {
        let q = Quadratic::diagonal(&[1.0, -2.0, 0.5]);
        let a = StepSize::new(0.1, &q).unwrap();
        let rep = residual_check(&q, &q.critical_points()[0], a, 0.0, 200, 1.0, 0);
        assert_eq!(rep.max_residual, 0.0);
        assert_eq!(rep.integrated_violations, 0);
    }

    #[test]
    fn residual_of_quartic_is_cubic() {
        let q = SeparableQuartic::new(2, 2.0).unwrap();
        let a = StepSize::new(0.05, &q).unwrap();
        let origin = &q.critical_points()[4];
        let rep = residual_check(&q, origin, a, 6.0 * 0.1, 300, 0.1, 1);
        assert_eq!(rep.integrated_violations, 0);
        assert_eq!(rep.jacobian_violations, 0);
        assert!(rep.max_fd_error <= 1e-5, "{}", rep.max_fd_error);
        // |F_i| = alpha |x_i|^3 <= alpha 0.1^3
        assert!(rep.max_residual <= 0.05 * 1e-3 + 1e-15);
    }

    #[test]
    fn config_round_trip() {
        let cfg = Config::parse(
            "objective = \"separable-quartic\"\nd = 2\nalpha = 0.05\ntrials = 7\nseed = 3\nx0 = [0.1, 0.2]\nsaddle = \"none\"",
        )
        .unwrap();
        let tc = TrialConfig::from_config(&cfg).unwrap();
        assert_eq!(tc.trials, 7);
        assert_eq!(tc.seed_base, 3);
        assert_eq!(tc.x0_center.as_deref(), Some(&[0.1, 0.2][..]));
        assert_eq!(tc.params.get("d").map(String::as_str), Some("2"));
        let obj = tc.build_objective().unwrap();
        assert_eq!(tc.saddle_index(&*obj).unwrap(), None);
    }

    #[test]
    fn config_errors() {
        let missing = Config::parse("alpha = 0.1").unwrap();
        assert!(TrialConfig::from_config(&missing).unwrap_err().is_config());
        let bad = Config::parse("objective = \"quadratic\"\nH = \"1,-1\"\nalpha = 0.1\ntrials = -1").unwrap();
        assert!(TrialConfig::from_config(&bad).unwrap_err().is_config());
        let unknown = Config::parse("objective = \"quadratic\"\nH = \"1,-1\"\nalpha = 0.1\nfoo = 1").unwrap();
        assert!(TrialConfig::from_config(&unknown).unwrap_err().is_config());
    }

    #[test]
    fn escape_quadratic_saddle_diverges() {
        let mut cfg = TrialConfig::new("quadratic", quad_params("1,-1"), 0.1);
        cfg.trials = 200;
        let rep = escape_experiment(&cfg).unwrap();
        assert_eq!(rep.counts.total(), 200);
        assert_eq!(rep.counts.to_strict_saddle, 0);
        assert_eq!(rep.counts.diverged, 200);
        assert_eq!(rep.s_visit_tail.as_ref().unwrap().len(), S_TAIL_LEN);
    }

    #[test]
    fn escape_minimum_contracts() {
        let mut cfg = TrialConfig::new("quadratic", quad_params("2,3"), 0.1);
        cfg.trials = 100;
        let rep = escape_experiment(&cfg).unwrap();
        assert_eq!(rep.counts.to_min, 100);
        assert!(rep.s_visit_tail.is_none());
        let mean = rep.mean_min_exponent.unwrap();
        assert!((mean - 0.5 * 0.8f64.ln()).abs() < 0.02, "{mean}");
    }

    #[test]
    fn escape_from_exact_saddle_stays() {
        let mut cfg = TrialConfig::new("quadratic", quad_params("1,-1"), 0.1);
        cfg.trials = 10;
        cfg.x0_distribution = X0Distribution::Fixed;
        let rep = escape_experiment(&cfg).unwrap();
        assert_eq!(rep.counts.to_strict_saddle, 10);
    }

    #[test]
    fn escape_is_deterministic() {
        let mut cfg = TrialConfig::new("coupled-saddle", Params::new(), 0.03);
        cfg.trials = 40;
        cfg.seed_base = 11;
        let a = escape_experiment(&cfg).unwrap();
        let b = escape_experiment(&cfg).unwrap();
        let mut ca = Vec::new();
        let mut cb = Vec::new();
        a.write_trials_csv(&mut ca).unwrap();
        b.write_trials_csv(&mut cb).unwrap();
        assert_eq!(ca, cb);
        assert_eq!(a.counts.to_strict_saddle, 0);
        assert_eq!(a.pooled.decay.descent_violations, 0);
    }

    #[test]
    fn escape_rejects_large_step() {
        let cfg = TrialConfig::new("quadratic", quad_params("1,-1"), 1.5);
        assert!(escape_experiment(&cfg).unwrap_err().is_precondition());
    }

    #[test]
    fn explicit_saddle_must_be_strict() {
        let c = CoupledSaddle::new(0.3, 2.5).unwrap();
        let mut cfg = TrialConfig::new("coupled-saddle", Params::new(), 0.03);
        cfg.saddle = Some(1);
        assert!(matches!(cfg.saddle_index(&c), Err(Error::Precondition(_))));
        cfg.saddle = Some(9);
        assert!(cfg.saddle_index(&c).is_err());
    }

    #[test]
    fn csv_layout() {
        let mut cfg = TrialConfig::new("quadratic", quad_params("2,3"), 0.1);
        cfg.trials = 2;
        let rep = escape_experiment(&cfg).unwrap();
        let mut out = Vec::new();
        rep.write_trials_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "trial,seed,class,limit_id,exponent,freq_I,s_visits,iters");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,") && lines[1].contains(",to_min,0,"));
        assert!(lines[1].split(',').nth(6) == Some("-"));
    }
}
