//! A fast, deterministic invariant suite.
//!
//! Each check exercises one library invariant at a reduced sample size so
//! the whole suite finishes in seconds. The `check` subcommand of the CLI
//! runs it and fails if any check fails.

use serde::Serialize;

use crate::dynamics::{evaluate, inverse_step, run, step, StepSize, StopRule};
use crate::experiments::{decay_check, escape_experiment_with, residual_check, TrialConfig};
use crate::geometry::{p_plus_oracle, rho_margin_holds, GeometryOptions, SaddleGeometry};
use crate::lyapunov::{lyapunov_spectrum, LinearizedSystem, SpectrumOptions};
use crate::numdiff;
use crate::objective::{builtin_objective, validate_assumptions, Objective, Params, ValidationOptions, CORPUS};
use crate::sampling;
use crate::stream::CoordinateStream;
use crate::{Matrix, Result, Vector};

#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, result: Result<(bool, String)>) -> CheckOutcome {
    match result {
        Ok((passed, detail)) => CheckOutcome { name, passed, detail },
        Err(e) => CheckOutcome {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn corpus() -> Result<Vec<std::sync::Arc<dyn Objective>>> {
    CORPUS
        .iter()
        .map(|&name| {
            let mut params = Params::new();
            if name == "quadratic" {
                params.insert("H".into(), "1,-1".into());
            }
            builtin_objective(name, &params)
        })
        .collect()
}

/// A step size of `alpha_fraction / M`.
fn alpha_for(obj: &dyn Objective, alpha_fraction: f64) -> Result<StepSize> {
    StepSize::new(alpha_fraction / obj.hessian_bound(), obj)
}

fn check_derivatives(seed: u64) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for obj in corpus()? {
        let mut rng = sampling::rng(seed, 1);
        let radius = obj.region().unwrap_or(2.0).min(2.0) * 0.9;
        for _ in 0..100 {
            let x = sampling::uniform_ball(&mut rng, &Vector::zeros(obj.dim()), radius);
            let g = obj.gradient(&x);
            let fd = numdiff::gradient(|y| obj.value(y), &x);
            worst = worst.max((&fd - &g).norm() / (1.0 + g.norm()));
            let hfd = numdiff::hessian_from_gradient(|y| obj.gradient(y), &x);
            worst = worst.max((&hfd - obj.hessian(&x)).norm() / (1.0 + obj.hessian(&x).norm()));
        }
    }
    Ok((worst <= 1e-5, format!("max relative FD error {worst:e}")))
}

fn check_assumptions(seed: u64) -> Result<(bool, String)> {
    let mut detail = Vec::new();
    let mut ok = true;
    for obj in corpus()? {
        let radius = obj.region().unwrap_or(1.0);
        let rep = validate_assumptions(
            &*obj,
            &ValidationOptions {
                region_radius: radius,
                samples: 500,
                seed,
                ..ValidationOptions::default()
            },
        );
        ok &= rep.bounded_hessian_holds && rep.nondegenerate_holds;
        detail.push(format!("{}: max|H| {:.4} <= M {:.4}", obj.name(), rep.max_hessian_norm, rep.hessian_bound));
    }
    Ok((ok, detail.join("; ")))
}

fn check_stream(seed: u64) -> Result<(bool, String)> {
    let d = 4;
    let s = CoordinateStream::new(seed, d);
    let n = 100_000;
    let mut counts = vec![0usize; d];
    for t in -(n as i64 / 2)..(n as i64 / 2) {
        counts[s.index(t)] += 1;
    }
    let p = 1.0 / d as f64;
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    let uniform = counts.iter().all(|&c| (c as f64 - n as f64 * p).abs() <= 4.0 * sd);
    let shifted = (-100..100).all(|t| s.shift(17).index(t) == s.index(t + 17));
    Ok((uniform && shifted, format!("counts {counts:?}")))
}

fn check_inverse(seed: u64) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for obj in corpus()? {
        let a = alpha_for(&*obj, 0.5)?;
        let mut rng = sampling::rng(seed, 2);
        let radius = obj.region().map_or(1.0, |r| 0.5 * r);
        for k in 0..200 {
            let x = sampling::uniform_ball(&mut rng, &Vector::zeros(obj.dim()), radius);
            let i = k % obj.dim();
            let back = inverse_step(&*obj, a, &step(&*obj, a, &x, i)?, i)?;
            worst = worst.max((back - &x).amax());
        }
    }
    Ok((worst <= 1e-10, format!("max round-trip error {worst:e}")))
}

fn check_cocycle(seed: u64) -> Result<(bool, String)> {
    let obj = builtin_objective("separable-quartic", &Params::new())?;
    let a = alpha_for(&*obj, 0.5)?;
    let w = CoordinateStream::new(seed, obj.dim());
    let x = Vector::from_vec(vec![0.3, -0.2]);
    let mut worst = 0.0f64;
    for (s, t) in [(10i64, 15i64), (-12, 20), (7, -19), (-8, -8)] {
        let lhs = evaluate(&*obj, a, &w, &x, t + s)?;
        let rhs = evaluate(&*obj, a, &w.shift(s), &evaluate(&*obj, a, &w, &x, s)?, t)?;
        worst = worst.max((lhs - rhs).amax());
    }
    Ok((worst <= 1e-8, format!("max cocycle error {worst:e}")))
}

fn check_descent(seed: u64) -> Result<(bool, String)> {
    let mut violations = 0;
    let mut steps = 0;
    for obj in corpus()? {
        let a = alpha_for(&*obj, 0.9)?;
        let mut rng = sampling::rng(seed, 3);
        for trial in 0..10 {
            let x0 = sampling::uniform_ball(&mut rng, &Vector::zeros(obj.dim()), 1.0);
            let traj = run(&*obj, a, &CoordinateStream::new(seed + trial, obj.dim()), &x0, 2000, &StopRule::default())?;
            let rep = decay_check(&traj, &*obj, None);
            violations += rep.descent_violations;
            steps += rep.descent_checked;
        }
    }
    Ok((violations == 0, format!("{violations} violations in {steps} steps")))
}

fn check_spectrum(seed: u64) -> Result<(bool, String)> {
    let h = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, -1.0]));
    let sys = LinearizedSystem::new(h, 0.1, CoordinateStream::new(seed, 2))?;
    let spec = lyapunov_spectrum(&sys, SpectrumOptions::new(200_000))?;
    let oracle = [0.5 * 1.1f64.ln(), 0.5 * 0.9f64.ln()];
    let err = spec
        .exponents
        .iter()
        .zip(oracle)
        .map(|(e, o)| (e - o).abs())
        .fold(0.0, f64::max);
    Ok((
        err <= 0.01 && spec.dim_unstable == 1,
        format!("exponents {:?}, max error {err:.2e}", spec.exponents),
    ))
}

fn check_escape(seed: u64) -> Result<(bool, String)> {
    let obj = builtin_objective("quadratic", &Params::from([("H".into(), "1,-1".into())]))?;
    let mut cfg = TrialConfig::new("quadratic", Params::from([("H".into(), "1,-1".into())]), 0.1);
    cfg.trials = 100;
    cfg.seed_base = seed;
    let rep = escape_experiment_with(&cfg, &*obj)?;
    Ok((
        rep.counts.to_strict_saddle == 0 && rep.counts.total() == cfg.trials,
        format!("{:?}", rep.counts),
    ))
}

fn check_geometry(_seed: u64) -> Result<(bool, String)> {
    let obj = builtin_objective("quadratic", &Params::from([("H".into(), "1,-1".into())]))?;
    let g = SaddleGeometry::build(&*obj, &obj.critical_points()[0], 0.1, &GeometryOptions::default())?;
    let h = obj.hessian(&Vector::zeros(2));
    let (p_plus, _) = p_plus_oracle(&h, 0.1, 20_000)?;
    let ok = rho_margin_holds(g.rho, 0.1, g.sigma, 2, 1.0)
        && g.rho_h < g.rho / 4.0
        && g.p > 0.0
        && (p_plus - 0.1 * 0.99f64.sqrt()).abs() < 1e-4;
    Ok((ok, format!("{:?}", g.summary())))
}

fn check_residual(seed: u64) -> Result<(bool, String)> {
    let quad = builtin_objective("quadratic", &Params::from([("H".into(), "1,-1".into())]))?;
    let rq = residual_check(&*quad, &quad.critical_points()[0], alpha_for(&*quad, 0.5)?, 0.0, 200, 1.0, seed);
    let quartic = builtin_objective("separable-quartic", &Params::new())?;
    let origin = quartic
        .critical_points()
        .iter()
        .find(|c| c.location.norm() == 0.0)
        .expect("origin is registered");
    let val = validate_assumptions(
        &*quartic,
        &ValidationOptions {
            lipschitz_radius: 0.1,
            seed,
            ..ValidationOptions::default()
        },
    );
    let idx = quartic.critical_points().iter().position(|c| c == origin).unwrap();
    let lip = val.critical_points[idx].hessian_lipschitz;
    let r4 = residual_check(&*quartic, origin, alpha_for(&*quartic, 0.5)?, lip, 300, 0.1, seed);
    Ok((
        rq.max_residual == 0.0 && r4.integrated_violations == 0 && r4.jacobian_violations == 0,
        format!(
            "quadratic max |F| {:e}; quartic L {lip:.4}, violations {}/{}",
            rq.max_residual, r4.integrated_violations, r4.jacobian_violations
        ),
    ))
}

type Check = fn(u64) -> Result<(bool, String)>;

/// Run every check with the given seed.
pub fn run_all(seed: u64) -> Vec<CheckOutcome> {
    let checks: [(&'static str, Check); 11] = [
        ("derivatives", check_derivatives),
        ("assumptions", check_assumptions),
        ("stream", check_stream),
        ("inverse", check_inverse),
        ("cocycle", check_cocycle),
        ("descent", check_descent),
        ("spectrum", check_spectrum),
        ("escape", check_escape),
        ("geometry", check_geometry),
        ("residual", check_residual),
        ("spectrum_seed_shift", check_spectrum_shift),
    ];
    checks.iter().map(|(name, f)| outcome(name, f(seed))).collect()
}

fn check_spectrum_shift(seed: u64) -> Result<(bool, String)> {
    let h = Matrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, -1.0]);
    let base = CoordinateStream::new(seed, 2);
    let a = lyapunov_spectrum(&LinearizedSystem::new(h.clone(), 0.2, base)?, SpectrumOptions::new(100_000))?;
    let b = lyapunov_spectrum(&LinearizedSystem::new(h, 0.2, base.shift(12_345))?, SpectrumOptions::new(100_000))?;
    let gap = a.top().0 - b.top().0;
    Ok((gap.abs() <= 0.01, format!("top exponent {:.5} vs shifted {:.5}", a.top().0, b.top().0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        for c in run_all(0) {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
