//! The linearized system at a critical point and its Lyapunov spectrum.
//!
//! With `H` the Hessian at the critical point, one step along coordinate `i`
//! is the rank-one perturbation of the identity `A = I - alpha e_i e_i^T H`.
//! Its inverse follows from Sherman-Morrison:
//! `A^{-1} = I + alpha / (1 - alpha H_ii) e_i e_i^T H`.
//!
//! The spectrum is estimated with the standard QR (Benettin) method: an
//! orthonormal frame is pushed through the product and re-factored every
//! `k` steps, accumulating `ln |R_jj|`.

use serde::Serialize;

use crate::dynamics::Trajectory;
use crate::objective::{CriticalPoint, Objective};
use crate::sampling;
use crate::stream::CoordinateStream;
use crate::{Error, Matrix, Result, Vector};

/// `|1 - alpha H_ii|` below this makes a factor numerically singular.
pub const SINGULAR_GAP: f64 = 1e-12;

/// Number of batches used for batch-means error bars.
pub const BATCHES: usize = 10;

/// Adjacent exponents closer than this many combined standard errors are
/// reported as one exponent with multiplicity.
pub const DEFAULT_MERGE_SIGMAS: f64 = 5.0;

pub const DEFAULT_REORTH_INTERVAL: usize = 10;

/// `Phi^H(t, omega)`, the product of factors `I - alpha e_{i_t} e_{i_t}^T H`.
#[derive(Clone, Debug)]
pub struct LinearizedSystem {
    h: Matrix,
    alpha: f64,
    stream: CoordinateStream,
}

impl LinearizedSystem {
    /// Requires symmetric `H` and `0 < alpha < 1 / max_i |H_ii|`, which keeps
    /// every factor invertible.
    pub fn new(h: Matrix, alpha: f64, stream: CoordinateStream) -> Result<Self> {
        if !h.is_square() || h.nrows() == 0 {
            return Err(Error::InvalidParameter("H must be a non-empty square matrix".into()));
        }
        if (&h - h.transpose()).amax() > 1e-12 * (1.0 + h.amax()) {
            return Err(Error::InvalidParameter("H must be symmetric".into()));
        }
        if stream.dim() != h.nrows() {
            return Err(Error::DimensionMismatch {
                expected: h.nrows(),
                got: stream.dim(),
            });
        }
        let max_diag = h.diagonal().amax();
        if !(alpha > 0.0) || !(alpha * max_diag < 1.0) {
            return Err(Error::StepSizeTooLarge {
                alpha,
                bound: 1.0 / max_diag,
            });
        }
        Ok(Self { h, alpha, stream })
    }

    /// Linearization of `obj` at a registered critical point.
    pub fn at(obj: &dyn Objective, point: &CriticalPoint, alpha: f64, stream: CoordinateStream) -> Result<Self> {
        Self::new(obj.hessian(&point.location), alpha, stream)
    }

    pub fn h(&self) -> &Matrix {
        &self.h
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn stream(&self) -> &CoordinateStream {
        &self.stream
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    fn gap(&self, i: usize) -> Result<f64> {
        let gap = 1.0 - self.alpha * self.h[(i, i)];
        if gap.abs() < SINGULAR_GAP {
            return Err(Error::SingularFactor { coord: i, gap: gap.abs() });
        }
        Ok(gap)
    }

    /// `I - alpha e_i e_i^T H`.
    pub fn factor_for(&self, i: usize) -> Result<Matrix> {
        self.gap(i)?;
        let mut a = Matrix::identity(self.dim(), self.dim());
        for c in 0..self.dim() {
            a[(i, c)] -= self.alpha * self.h[(i, c)];
        }
        Ok(a)
    }

    /// `I + alpha / (1 - alpha H_ii) e_i e_i^T H`.
    pub fn inverse_factor_for(&self, i: usize) -> Result<Matrix> {
        let scale = self.alpha / self.gap(i)?;
        let mut a = Matrix::identity(self.dim(), self.dim());
        for c in 0..self.dim() {
            a[(i, c)] += scale * self.h[(i, c)];
        }
        Ok(a)
    }

    /// The factor used at time `t`: `A(theta^t omega)` for `t >= 0`, and its
    /// inverse for `t < 0`, as it enters negative-time products.
    pub fn factor(&self, t: i64) -> Result<Matrix> {
        let i = self.stream.index(t);
        if t >= 0 {
            self.factor_for(i)
        } else {
            self.inverse_factor_for(i)
        }
    }

    /// Apply `I - alpha e_i e_i^T H` to `x` in place.
    #[inline]
    pub fn apply(&self, i: usize, x: &mut Vector) {
        let hx = self.h.row(i).transpose().dot(x);
        x[i] -= self.alpha * hx;
    }

    /// Apply the inverse factor to `x` in place.
    pub fn apply_inverse(&self, i: usize, x: &mut Vector) -> Result<()> {
        let scale = self.alpha / self.gap(i)?;
        let hx = self.h.row(i).transpose().dot(x);
        x[i] += scale * hx;
        Ok(())
    }

    /// `Phi^H(t, omega) x0` for signed `t`, matching the sign convention of
    /// [`crate::dynamics::evaluate`].
    pub fn propagate(&self, x0: &Vector, t: i64) -> Result<Vector> {
        let mut x = x0.clone();
        if t >= 0 {
            for s in 0..t {
                self.apply(self.stream.index(s), &mut x);
            }
        } else {
            for s in (t..0).rev() {
                self.apply_inverse(self.stream.index(s), &mut x)?;
            }
        }
        Ok(x)
    }

    /// The full matrix `Phi^H(t, omega)`.
    pub fn product(&self, t: i64) -> Result<Matrix> {
        let d = self.dim();
        let cols: Result<Vec<Vector>> = (0..d)
            .map(|j| {
                let mut e = Vector::zeros(d);
                e[j] = 1.0;
                self.propagate(&e, t)
            })
            .collect();
        Ok(Matrix::from_columns(&cols?))
    }

    /// Row `i` update of a frame: `Q <- (I - alpha e_i e_i^T H) Q`.
    fn apply_to_frame(&self, i: usize, q: &mut Matrix) {
        let d = self.dim();
        for c in 0..d {
            let mut acc = 0.0;
            for k in 0..d {
                acc += self.h[(i, k)] * q[(k, c)];
            }
            q[(i, c)] -= self.alpha * acc;
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LyapunovSpectrum {
    /// Distinct exponents, strictly decreasing.
    pub exponents: Vec<f64>,
    pub multiplicities: Vec<usize>,
    pub dim_unstable: usize,
    pub dim_center_stable: usize,
    pub std_errors: Vec<f64>,
    pub horizon: usize,
    pub seed: u64,
    /// One estimate per frame column before merging, decreasing.
    #[serde(skip)]
    pub raw_exponents: Vec<f64>,
    #[serde(skip)]
    pub raw_std_errors: Vec<f64>,
}

impl LyapunovSpectrum {
    pub fn top(&self) -> (f64, f64) {
        (self.exponents[0], self.std_errors[0])
    }

    pub fn dim(&self) -> usize {
        self.multiplicities.iter().sum()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SpectrumOptions {
    pub horizon: usize,
    pub reorth_interval: usize,
    pub merge_sigmas: f64,
}

impl SpectrumOptions {
    pub fn new(horizon: usize) -> Self {
        Self {
            horizon,
            reorth_interval: DEFAULT_REORTH_INTERVAL,
            merge_sigmas: DEFAULT_MERGE_SIGMAS,
        }
    }

    pub fn reorth_interval(mut self, k: usize) -> Self {
        self.reorth_interval = k;
        self
    }
}

/// Estimate the Lyapunov spectrum over `horizon` forward steps.
pub fn lyapunov_spectrum(sys: &LinearizedSystem, opts: SpectrumOptions) -> Result<LyapunovSpectrum> {
    let d = sys.dim();
    let horizon = opts.horizon;
    let k = opts.reorth_interval;
    if horizon < 1000 * d {
        return Err(Error::Precondition(format!("horizon must be at least 1000 d = {}", 1000 * d)));
    }
    if !(1..=100).contains(&k) {
        return Err(Error::Precondition("reorthogonalization interval must be in 1..=100".into()));
    }
    for i in 0..d {
        sys.gap(i)?;
    }

    // Random initial frame, so that no column starts inside an invariant
    // subspace of a special (e.g. diagonal) H.
    let mut rng = sampling::rng(sys.stream.seed(), 0x0f4a_3e11);
    let start = Matrix::from_columns(&(0..d).map(|_| sampling::unit_sphere(&mut rng, d)).collect::<Vec<_>>());
    let mut q = start.qr().q();

    let boundaries: Vec<usize> = (1..=BATCHES).map(|b| horizon * b / BATCHES).collect();
    let mut batch = 0;
    let mut batch_start = 0;
    let mut batch_logs = vec![0.0; d];
    let mut batch_rates = vec![Vec::with_capacity(BATCHES); d];
    let mut totals = vec![0.0; d];
    let mut since_qr = 0;

    for t in 0..horizon {
        sys.apply_to_frame(sys.stream.index(t as i64), &mut q);
        since_qr += 1;
        let end_of_batch = t + 1 == boundaries[batch];
        if since_qr == k || end_of_batch {
            let qr = q.qr();
            let r = qr.r();
            for j in 0..d {
                let rjj = r[(j, j)].abs();
                if !(rjj > 0.0) || !rjj.is_finite() {
                    return Err(Error::Underflow { step: t });
                }
                let l = rjj.ln();
                batch_logs[j] += l;
                totals[j] += l;
            }
            q = qr.q();
            since_qr = 0;
        }
        if end_of_batch {
            let len = (t + 1 - batch_start) as f64;
            for j in 0..d {
                batch_rates[j].push(batch_logs[j] / len);
                batch_logs[j] = 0.0;
            }
            batch_start = t + 1;
            batch += 1;
        }
    }

    let mut raw: Vec<(f64, f64)> = (0..d)
        .map(|j| (totals[j] / horizon as f64, batch_std_error(&batch_rates[j])))
        .collect();
    raw.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut exponents = Vec::new();
    let mut std_errors = Vec::new();
    let mut multiplicities = Vec::new();
    let mut group: Vec<(f64, f64)> = vec![raw[0]];
    let flush = |group: &mut Vec<(f64, f64)>, e: &mut Vec<f64>, s: &mut Vec<f64>, m: &mut Vec<usize>| {
        let n = group.len() as f64;
        e.push(group.iter().map(|g| g.0).sum::<f64>() / n);
        s.push(group.iter().map(|g| g.1 * g.1).sum::<f64>().sqrt() / n);
        m.push(group.len());
        group.clear();
    };
    for w in raw.windows(2) {
        let (prev, next) = (w[0], w[1]);
        let tol = opts.merge_sigmas * (prev.1 * prev.1 + next.1 * next.1).sqrt();
        if prev.0 - next.0 > tol {
            flush(&mut group, &mut exponents, &mut std_errors, &mut multiplicities);
        }
        group.push(next);
    }
    flush(&mut group, &mut exponents, &mut std_errors, &mut multiplicities);

    let dim_unstable = exponents
        .iter()
        .zip(&multiplicities)
        .filter(|(e, _)| **e > 0.0)
        .map(|(_, m)| m)
        .sum();
    Ok(LyapunovSpectrum {
        exponents,
        multiplicities,
        dim_unstable,
        dim_center_stable: d - dim_unstable,
        std_errors,
        horizon,
        seed: sys.stream.seed(),
        raw_exponents: raw.iter().map(|r| r.0).collect(),
        raw_std_errors: raw.iter().map(|r| r.1).collect(),
    })
}

fn batch_std_error(rates: &[f64]) -> f64 {
    let n = rates.len() as f64;
    let mean = rates.iter().sum::<f64>() / n;
    let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (var / n).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Positive,
    Nonpositive,
    Inconclusive,
}

/// Decide the sign of the top exponent at `confidence_sigmas` standard errors.
pub fn top_exponent_positive(sys: &LinearizedSystem, horizon: usize, confidence_sigmas: f64) -> Result<Sign> {
    let spec = lyapunov_spectrum(sys, SpectrumOptions::new(horizon))?;
    let (top, se) = (spec.raw_exponents[0], spec.raw_std_errors[0]);
    Ok(if top - confidence_sigmas * se > 0.0 {
        Sign::Positive
    } else if top + confidence_sigmas * se < 0.0 {
        Sign::Nonpositive
    } else {
        Sign::Inconclusive
    })
}

/// Least-squares slope of `ln ||x_t - target||` against `t` over the final
/// `tail_fraction` of the trajectory. Distances at the rounding floor
/// `100 eps (1 + ||target||)` are ignored. A negative slope means
/// exponential convergence at that rate.
pub fn empirical_exponent(traj: &Trajectory, target: &Vector, tail_fraction: f64) -> Result<f64> {
    if !(tail_fraction > 0.0 && tail_fraction < 1.0) {
        return Err(Error::InvalidParameter("tail_fraction must lie in (0, 1)".into()));
    }
    let n = traj.x.len();
    let start = ((n as f64) * (1.0 - tail_fraction)).floor() as usize;
    let floor = 1e2 * f64::EPSILON * (1.0 + target.norm());
    let pts: Vec<(f64, f64)> = traj.x[start..]
        .iter()
        .enumerate()
        .filter_map(|(k, x)| {
            let dist = (x - target).norm();
            (dist > floor).then(|| ((start + k) as f64, dist.ln()))
        })
        .collect();
    if pts.len() < 10 {
        return Err(Error::TooFewPoints {
            usable: pts.len(),
            needed: 10,
        });
    }
    Ok(least_squares_slope(&pts))
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sty, mut stt) = (0.0, 0.0);
    for &(t, y) in pts {
        sty += (t - mt) * (y - my);
        stt += (t - mt) * (t - mt);
    }
    sty / stt
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{self, run, StepSize, StopRule};
    use crate::objective::Quadratic;

    fn diag(h: &[f64]) -> Matrix {
        Matrix::from_diagonal(&Vector::from_column_slice(h))
    }

    fn sys(h: Matrix, alpha: f64, seed: u64) -> LinearizedSystem {
        let d = h.nrows();
        LinearizedSystem::new(h, alpha, CoordinateStream::new(seed, d)).unwrap()
    }

    /// Diagonal H: coordinate j is scaled by (1 - alpha h_j) with frequency
    /// 1/d, so its exponent is ln|1 - alpha h_j| / d.
    fn diagonal_oracle(h: &[f64], alpha: f64) -> Vec<f64> {
        let d = h.len() as f64;
        let mut e: Vec<f64> = h.iter().map(|v| (1.0 - alpha * v).abs().ln() / d).collect();
        e.sort_by(|a, b| b.total_cmp(a));
        e
    }

    #[test]
    fn factor_examples() {
        let s = sys(diag(&[1.0, -1.0]), 0.1, 0);
        let a = s.factor_for(0).unwrap();
        assert_eq!(a, diag(&[0.9, 1.0]));
        let inv = s.inverse_factor_for(0).unwrap();
        assert!((inv - diag(&[1.0 / 0.9, 1.0])).amax() < 1e-15);

        let h = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let s = sys(h, 0.1, 0);
        let a = s.factor_for(0).unwrap();
        assert_eq!(a, Matrix::from_row_slice(2, 2, &[1.0, -0.1, 0.0, 1.0]));
    }

    #[test]
    fn factor_inverse_identity_on_random_h() {
        let mut rng = sampling::rng(17, 1);
        for _ in 0..100 {
            let g = Matrix::from_fn(4, 4, |_, _| rand::Rng::random_range(&mut rng, -1.0..1.0));
            let h = (&g + g.transpose()) * 0.5;
            let alpha = 0.5 / crate::objective::spectral_norm(&h);
            let s = sys(h, alpha, 3);
            for t in -20..20 {
                let i = s.stream().index(t);
                let prod = s.factor_for(i).unwrap() * s.inverse_factor_for(i).unwrap();
                assert!((prod - Matrix::identity(4, 4)).amax() <= 1e-12);
                let f = s.factor(t).unwrap();
                let expect = if t >= 0 { s.factor_for(i).unwrap() } else { s.inverse_factor_for(i).unwrap() };
                assert_eq!(f, expect);
            }
        }
    }

    #[test]
    fn rejects_large_alpha() {
        let h = diag(&[2.0, -1.0]);
        let err = LinearizedSystem::new(h, 0.5, CoordinateStream::new(0, 2)).unwrap_err();
        assert!(matches!(err, Error::StepSizeTooLarge { .. }));
    }

    #[test]
    fn negative_time_products_invert() {
        let h = Matrix::from_row_slice(3, 3, &[1.0, 0.4, -0.2, 0.4, -0.7, 0.3, -0.2, 0.3, 0.5]);
        let s = sys(h, 0.3, 5);
        let fwd = s.product(30).unwrap();
        let back = LinearizedSystem::new(s.h().clone(), 0.3, s.stream().shift(30)).unwrap().product(-30).unwrap();
        assert!((back * fwd - Matrix::identity(3, 3)).amax() < 1e-10);
    }

    #[test]
    fn one_dimensional_exponent_is_exact() {
        let s = sys(diag(&[-2.0]), 0.1, 42);
        for horizon in [1000, 5000] {
            let spec = lyapunov_spectrum(&s, SpectrumOptions::new(horizon)).unwrap();
            assert!((spec.exponents[0] - 1.2f64.ln()).abs() < 1e-12);
            assert_eq!(spec.dim_unstable, 1);
        }
    }

    #[test]
    fn diagonal_spectrum_matches_closed_form() {
        for (h, unstable) in [(vec![1.0, -1.0], 1), (vec![2.0, 3.0], 0), (vec![1.5, -0.5, 0.7], 1)] {
            let oracle = diagonal_oracle(&h, 0.1);
            let s = sys(diag(&h), 0.1, 7);
            let spec = lyapunov_spectrum(&s, SpectrumOptions::new(200_000)).unwrap();
            assert_eq!(spec.multiplicities, vec![1; h.len()]);
            for ((e, se), o) in spec.exponents.iter().zip(&spec.std_errors).zip(&oracle) {
                assert!((e - o).abs() < 3.0 * se + 1e-3, "{h:?}: {spec:?}");
            }
            assert_eq!(spec.dim_unstable, unstable);
            assert_eq!(spec.dim_center_stable, h.len() - unstable);
        }
    }

    #[test]
    fn repeated_exponent_is_merged() {
        let s = sys(diag(&[1.0, 1.0, -1.0]), 0.1, 9);
        let spec = lyapunov_spectrum(&s, SpectrumOptions::new(300_000)).unwrap();
        assert_eq!(spec.multiplicities, vec![1, 2]);
        assert_eq!(spec.dim(), 3);
        assert!((spec.exponents[1] - 0.9f64.ln() / 3.0).abs() < 2e-3);
    }

    #[test]
    fn spectrum_sum_equals_log_det_rate() {
        let h = Matrix::from_row_slice(3, 3, &[1.0, 0.6, -0.3, 0.6, -0.8, 0.2, -0.3, 0.2, 0.4]);
        let s = sys(h.clone(), 0.4, 21);
        let horizon = 100_000;
        let spec = lyapunov_spectrum(&s, SpectrumOptions::new(horizon)).unwrap();
        let total: f64 = spec.raw_exponents.iter().sum();
        // det(I - alpha e_i e_i^T H) = 1 - alpha H_ii
        let log_det: f64 = (0..horizon as i64)
            .map(|t| (1.0 - 0.4 * h[(s.stream().index(t), s.stream().index(t))]).abs().ln())
            .sum::<f64>()
            / horizon as f64;
        assert!((total - log_det).abs() < 1e-9, "{total} vs {log_det}");
        let expected: f64 = (0..3).map(|i| (1.0 - 0.4 * h[(i, i)]).abs().ln()).sum::<f64>() / 3.0;
        let se: f64 = spec.raw_std_errors.iter().map(|s| s * s).sum::<f64>().sqrt();
        assert!((total - expected).abs() < 3.0 * se + 2e-3);
    }

    #[test]
    fn shift_and_seed_invariance() {
        let h = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, -1.0]);
        let base = sys(h.clone(), 0.2, 100);
        let shifted = LinearizedSystem::new(h.clone(), 0.2, base.stream().shift(1000)).unwrap();
        let other = sys(h, 0.2, 101);
        let opts = SpectrumOptions::new(200_000);
        let a = lyapunov_spectrum(&base, opts).unwrap();
        for b in [lyapunov_spectrum(&shifted, opts).unwrap(), lyapunov_spectrum(&other, opts).unwrap()] {
            for j in 0..2 {
                let tol = 3.0 * (a.raw_std_errors[j].powi(2) + b.raw_std_errors[j].powi(2)).sqrt();
                assert!((a.raw_exponents[j] - b.raw_exponents[j]).abs() <= tol.max(1e-3));
            }
        }
    }

    #[test]
    fn sign_decisions() {
        let pos = top_exponent_positive(&sys(diag(&[1.0, -1.0]), 0.1, 1), 100_000, 3.0).unwrap();
        assert_eq!(pos, Sign::Positive);
        let neg = top_exponent_positive(&sys(diag(&[2.0, 3.0]), 0.1, 1), 100_000, 3.0).unwrap();
        assert_eq!(neg, Sign::Nonpositive);
        // diag(1, -1) rotated by 45 degrees: no closed form, non-commuting factors.
        let rotated = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let rot = top_exponent_positive(&sys(rotated, 0.1, 1), 200_000, 3.0).unwrap();
        assert_eq!(rot, Sign::Positive);
    }

    #[test]
    fn spectrum_preconditions() {
        let s = sys(diag(&[1.0, -1.0]), 0.1, 1);
        assert!(matches!(lyapunov_spectrum(&s, SpectrumOptions::new(1999)), Err(Error::Precondition(_))));
        assert!(lyapunov_spectrum(&s, SpectrumOptions::new(5000).reorth_interval(0)).is_err());
        assert!(lyapunov_spectrum(&s, SpectrumOptions::new(5000).reorth_interval(101)).is_err());
    }

    #[test]
    fn quadratic_orbit_equals_linear_product() {
        let h = Matrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, -0.5, 0.1, 0.0, 0.1, 0.8]);
        let q = Quadratic::new(h.clone()).unwrap();
        let alpha = StepSize::new(0.3, &q).unwrap();
        let stream = CoordinateStream::new(12, 3);
        let s = LinearizedSystem::new(h, 0.3, stream).unwrap();
        let x0 = Vector::from_vec(vec![0.3, -0.2, 0.5]);
        for t in [-40i64, -1, 0, 1, 17, 60] {
            let nonlinear = dynamics::evaluate(&q, alpha, &stream, &x0, t).unwrap();
            let linear = s.product(t).unwrap() * &x0;
            assert!((nonlinear - linear).amax() <= 1e-12 * (1.0 + x0.norm()), "t={t}");
        }
        let traj = run(&q, alpha, &stream, &x0, 60, &StopRule::default()).unwrap();
        assert_eq!(traj.last(), &s.propagate(&x0, 60).unwrap());
    }

    #[test]
    fn empirical_exponent_of_geometric_decay() {
        let q = Quadratic::diagonal(&[2.0]);
        let alpha = StepSize::new(0.1, &q).unwrap();
        let traj = run(&q, alpha, &CoordinateStream::new(0, 1), &Vector::from_vec(vec![1.0]), 100, &StopRule::default()).unwrap();
        let slope = empirical_exponent(&traj, &Vector::zeros(1), 0.5).unwrap();
        assert!((slope - 0.8f64.ln()).abs() < 1e-3);
    }

    #[test]
    fn empirical_exponent_needs_usable_points() {
        let q = Quadratic::diagonal(&[1.0, -1.0]);
        let alpha = StepSize::new(0.1, &q).unwrap();
        let traj = run(&q, alpha, &CoordinateStream::new(0, 2), &Vector::zeros(2), 100, &StopRule::default()).unwrap();
        assert!(matches!(
            empirical_exponent(&traj, &Vector::zeros(2), 0.5),
            Err(Error::TooFewPoints { usable: 0, .. })
        ));
        assert!(empirical_exponent(&traj, &Vector::zeros(2), 1.0).is_err());
    }
}
