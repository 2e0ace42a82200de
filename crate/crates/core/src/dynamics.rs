//! The RCGD step map `x -> x - alpha e_i e_i^T grad f(x)`, its global
//! inverse, the two-sided cocycle built from a [`CoordinateStream`], and
//! recorded trajectories.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::objective::Objective;
use crate::stream::CoordinateStream;
use crate::{Error, Result, Vector};

/// A step size checked against the objective's Hessian bound, `0 < alpha < 1/M`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StepSize(f64);

impl StepSize {
    pub fn new(alpha: f64, obj: &dyn Objective) -> Result<Self> {
        Self::with_bound(alpha, obj.hessian_bound())
    }

    /// Check `0 < alpha` and `alpha * bound < 1`.
    pub fn with_bound(alpha: f64, bound: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("step size must be positive, got {alpha}")));
        }
        if !(alpha * bound < 1.0) {
            return Err(Error::StepSizeTooLarge {
                alpha,
                bound: 1.0 / bound,
            });
        }
        Ok(Self(alpha))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

fn check_coord(obj: &dyn Objective, x: &Vector, i: usize) -> Result<()> {
    if x.len() != obj.dim() {
        return Err(Error::DimensionMismatch {
            expected: obj.dim(),
            got: x.len(),
        });
    }
    if i >= obj.dim() {
        return Err(Error::InvalidParameter(format!(
            "coordinate {i} out of range for d = {}",
            obj.dim()
        )));
    }
    Ok(())
}

/// One RCGD update along coordinate `i` (zero-based).
pub fn step(obj: &dyn Objective, alpha: StepSize, x: &Vector, i: usize) -> Result<Vector> {
    check_coord(obj, x, i)?;
    let g = obj.partial(x, i);
    if !g.is_finite() {
        return Err(Error::NonFiniteGradient { coord: i });
    }
    let mut y = x.clone();
    y[i] -= alpha.get() * g;
    Ok(y)
}

/// Invert [`step`]: find `x` with `step(x) = y`.
///
/// Coordinates other than `i` are copied from `y`. Since `alpha * M < 1`,
/// `g(s) = s - alpha * d_i f(x with x_i = s) - y_i` has `g' >= 1 - alpha M > 0`,
/// so its root is unique; it is found by Newton steps safeguarded by
/// bisection inside a geometrically expanded bracket.
pub fn inverse_step(obj: &dyn Objective, alpha: StepSize, y: &Vector, i: usize) -> Result<Vector> {
    check_coord(obj, y, i)?;
    let a = alpha.get();
    let m = obj.hessian_bound();
    let yi = y[i];
    let mut x = y.clone();
    let g = |s: f64, x: &mut Vector| -> Result<f64> {
        x[i] = s;
        let p = obj.partial(x, i);
        if !p.is_finite() {
            return Err(Error::NonFiniteGradient { coord: i });
        }
        Ok(s - a * p - yi)
    };

    if g(yi, &mut x)? == 0.0 {
        return Ok(x);
    }

    // The Hessian bound, and with it monotonicity of g, only holds inside
    // the objective's region, so the bracket never leaves it.
    let limit = match obj.region() {
        Some(radius) => {
            let rest = y.norm_squared() - yi * yi;
            if rest >= radius * radius {
                return Err(Error::RegionExit { t: 0, radius });
            }
            Some(((radius * radius - rest).sqrt(), radius))
        }
        None => None,
    };
    let mut width = (a * m * (1.0 + yi.abs() + y.norm())).max(f64::EPSILON * (1.0 + yi.abs()));
    let mut expansions = 0;
    let (mut lo, mut hi, g_lo, g_hi) = loop {
        let (mut l, mut h) = (yi - width, yi + width);
        if let Some((cap, _)) = limit {
            (l, h) = (l.max(-cap), h.min(cap));
        }
        let (gl, gh) = (g(l, &mut x)?, g(h, &mut x)?);
        if gl <= 0.0 && gh >= 0.0 {
            break (l, h, gl, gh);
        }
        if let Some((cap, radius)) = limit {
            if (gl > 0.0 && l <= -cap) || (gh < 0.0 && h >= cap) {
                return Err(Error::RegionExit { t: 0, radius });
            }
        }
        expansions += 1;
        if expansions > 200 || !width.is_finite() {
            return Err(Error::BracketFailure { coord: i });
        }
        width *= 2.0;
    };
    if g_lo == 0.0 {
        x[i] = lo;
        return Ok(x);
    }
    if g_hi == 0.0 {
        x[i] = hi;
        return Ok(x);
    }

    let mut s = yi.clamp(lo, hi);
    for _ in 0..200 {
        let gs = g(s, &mut x)?;
        if gs == 0.0 {
            break;
        }
        if gs < 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let slope = 1.0 - a * obj.hessian_diag(&x, i);
        let newton = s - gs / slope;
        let next = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - s).abs() <= 4.0 * f64::EPSILON * (1.0 + s.abs()) || hi - lo <= 4.0 * f64::EPSILON * (1.0 + s.abs()) {
            s = next;
            break;
        }
        s = next;
    }
    x[i] = s;
    Ok(x)
}

fn check_region(obj: &dyn Objective, x: &Vector, t: i64) -> Result<()> {
    match obj.region() {
        Some(radius) if !(x.norm() <= radius) => Err(Error::RegionExit { t, radius }),
        _ => Ok(()),
    }
}

/// The cocycle `phi(t, omega) x0`.
///
/// For `t > 0` this applies the steps for `i_0, ..., i_{t-1}`; for `t < 0`
/// it applies inverse steps for `i_{-1}, i_{-2}, ..., i_t`. The result
/// satisfies `phi(t + s, omega) = phi(t, theta^s omega) o phi(s, omega)`.
pub fn evaluate(
    obj: &dyn Objective,
    alpha: StepSize,
    stream: &CoordinateStream,
    x0: &Vector,
    t: i64,
) -> Result<Vector> {
    let mut x = x0.clone();
    if t >= 0 {
        for s in 0..t {
            x = step(obj, alpha, &x, stream.index(s))?;
            check_region(obj, &x, s + 1)?;
        }
    } else {
        for s in (t..0).rev() {
            x = inverse_step(obj, alpha, &x, stream.index(s)).map_err(|e| match e {
                Error::RegionExit { radius, .. } => Error::RegionExit { t: s, radius },
                e => e,
            })?;
            check_region(obj, &x, s)?;
        }
    }
    Ok(x)
}

/// `I_t`: the chosen coordinate carries at least `1/sqrt(d)` of the gradient norm.
pub fn indicator(grad: &Vector, i: usize) -> bool {
    // g_i^2 d >= ||g||^2 avoids a square root.
    grad[i] * grad[i] * grad.len() as f64 >= grad.norm_squared()
}

/// Lowest index attaining `max_j |g_j|`.
pub fn argmax_coord(grad: &Vector) -> usize {
    let mut best = 0;
    for j in 1..grad.len() {
        if grad[j].abs() > grad[best].abs() {
            best = j;
        }
    }
    best
}

/// Stopping rule for [`run`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StopRule {
    pub tol_grad: f64,
    pub tol_x: f64,
    /// Consecutive quiet steps required; `None` means `10 d`.
    pub patience: Option<usize>,
    /// Trajectories leaving this ball about the origin are aborted.
    pub region_radius: f64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            tol_grad: 1e-9,
            tol_x: 1e-12,
            patience: None,
            region_radius: 1e3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIters,
    RegionExit,
    NonFinite,
}

/// A recorded orbit.
///
/// State arrays (`x`, `f_values`, `grad_norms`) have one entry per visited
/// point; step arrays (`coords`, `indicators`, `argmax_hits`) have one entry
/// per step taken, so they are one shorter.
#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub x: Vec<Vector>,
    pub f_values: Vec<f64>,
    pub grad_norms: Vec<f64>,
    pub coords: Vec<usize>,
    pub indicators: Vec<bool>,
    /// Whether `i_t` is the lowest index maximizing `|d_j f(x_t)|`.
    pub argmax_hits: Vec<bool>,
    /// Membership of each state in `S`, once a saddle geometry is attached.
    pub s_visits: Option<Vec<bool>>,
    pub termination: Termination,
    pub alpha: f64,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.coords.len()
    }

    pub fn last(&self) -> &Vector {
        self.x.last().expect("trajectory holds x0")
    }

    /// Write `t,i,f,grad_norm,x_1,...,x_d,I_t,S_t`. Coordinates are printed
    /// one-based; the final state has no step, so its `i` and `I_t` are `-`,
    /// as is `S_t` when no geometry is attached.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let d = self.x.first().map_or(0, |x| x.len());
        write!(w, "t,i,f,grad_norm")?;
        for j in 1..=d {
            write!(w, ",x_{j}")?;
        }
        writeln!(w, ",I_t,S_t")?;
        for t in 0..self.x.len() {
            match self.coords.get(t) {
                Some(i) => write!(w, "{t},{}", i + 1)?,
                None => write!(w, "{t},-")?,
            }
            write!(w, ",{},{}", self.f_values[t], self.grad_norms[t])?;
            for v in self.x[t].iter() {
                write!(w, ",{v}")?;
            }
            match self.indicators.get(t) {
                Some(b) => write!(w, ",{}", u8::from(*b))?,
                None => write!(w, ",-")?,
            }
            match self.s_visits.as_ref().map(|s| s[t]) {
                Some(b) => writeln!(w, ",{}", u8::from(b))?,
                None => writeln!(w, ",-")?,
            }
        }
        Ok(())
    }
}

/// Run RCGD from `x0` along `stream` for at most `max_iters` steps.
///
/// The run stops early once `||grad f|| <= tol_grad` and the step
/// displacement is at most `tol_x` for `patience` consecutive steps, or when
/// the next iterate would leave the working region (the smaller of the stop
/// rule's radius and the objective's own region). An out-of-region iterate
/// is not recorded.
pub fn run(
    obj: &dyn Objective,
    alpha: StepSize,
    stream: &CoordinateStream,
    x0: &Vector,
    max_iters: usize,
    stop: &StopRule,
) -> Result<Trajectory> {
    if max_iters == 0 {
        return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
    }
    let d = obj.dim();
    if x0.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x0.len(),
        });
    }
    if stream.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: stream.dim(),
        });
    }
    let radius = obj.region().map_or(stop.region_radius, |r| r.min(stop.region_radius));
    let patience = stop.patience.unwrap_or(10 * d).max(1);
    let a = alpha.get();

    let mut traj = Trajectory {
        x: Vec::new(),
        f_values: Vec::new(),
        grad_norms: Vec::new(),
        coords: Vec::new(),
        indicators: Vec::new(),
        argmax_hits: Vec::new(),
        s_visits: None,
        termination: Termination::MaxIters,
        alpha: a,
    };

    let mut x = x0.clone();
    let mut grad = obj.gradient(&x);
    traj.x.push(x.clone());
    traj.f_values.push(obj.value(&x));
    traj.grad_norms.push(grad.norm());
    if !x.norm().is_finite() || !traj.f_values[0].is_finite() || !traj.grad_norms[0].is_finite() {
        traj.termination = Termination::NonFinite;
        return Ok(traj);
    }
    if !(x.norm() <= radius) {
        traj.termination = Termination::RegionExit;
        return Ok(traj);
    }

    let mut quiet = 0usize;
    for t in 0..max_iters {
        let i = stream.index(t as i64);
        let gi = grad[i];
        let delta = a * gi;
        let mut next = x.clone();
        next[i] -= delta;
        if !next[i].is_finite() {
            traj.termination = Termination::NonFinite;
            break;
        }
        if !(next.norm() <= radius) {
            traj.termination = Termination::RegionExit;
            break;
        }
        let grad_norm = traj.grad_norms[t];
        traj.coords.push(i);
        traj.indicators.push(grad_norm > 0.0 && indicator(&grad, i));
        traj.argmax_hits.push(argmax_coord(&grad) == i);

        x = next;
        grad = obj.gradient(&x);
        let f = obj.value(&x);
        let gn = grad.norm();
        traj.x.push(x.clone());
        traj.f_values.push(f);
        traj.grad_norms.push(gn);
        if !f.is_finite() || !gn.is_finite() {
            traj.termination = Termination::NonFinite;
            break;
        }

        if grad_norm <= stop.tol_grad && delta.abs() <= stop.tol_x {
            quiet += 1;
            if quiet >= patience {
                traj.termination = Termination::Converged;
                break;
            }
        } else {
            quiet = 0;
        }
    }
    Ok(traj)
}
