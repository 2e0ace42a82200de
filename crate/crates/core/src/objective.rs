//! Objective functions, their critical-point registries, and checks of the
//! two standing assumptions: a bounded Hessian and non-degenerate critical
//! points.
//!
//! Polynomial corpus members only have a bounded Hessian on a compact
//! working region. Each carries that region (a Euclidean ball about the
//! origin) together with the analytic bound valid on it; trajectories that
//! leave the region are aborted.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::sampling;
use crate::{Error, Matrix, Result, Vector};

/// Eigenvalues with magnitude at or below this are treated as zero.
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-12;

/// A twice continuously differentiable function on `R^d`.
///
/// Implementations must be pure: the trait is shared across worker threads.
pub trait Objective: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn value(&self, x: &Vector) -> f64;

    fn gradient(&self, x: &Vector) -> Vector;

    /// `e_i^T grad f(x)`. Override when a single component is cheaper.
    fn partial(&self, x: &Vector, i: usize) -> f64 {
        self.gradient(x)[i]
    }

    fn hessian(&self, x: &Vector) -> Matrix;

    /// `e_i^T hess f(x) e_i`.
    fn hessian_diag(&self, x: &Vector, i: usize) -> f64 {
        self.hessian(x)[(i, i)]
    }

    /// `M` with `||hess f(x)||_2 <= M` on the working region.
    fn hessian_bound(&self) -> f64;

    /// Radius of the working region about the origin, if the Hessian bound
    /// is only valid locally.
    fn region(&self) -> Option<f64> {
        None
    }

    fn critical_points(&self) -> &[CriticalPoint];

    /// The Hessian, when the objective is exactly `1/2 x^T H x`.
    fn as_quadratic(&self) -> Option<&Matrix> {
        None
    }
}

impl fmt::Debug for dyn Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Objective")
            .field("name", &self.name())
            .field("dim", &self.dim())
            .field("M", &self.hessian_bound())
            .finish()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointKind {
    StrictSaddle,
    LocalMin,
    Degenerate,
}

impl PointKind {
    /// Classify from Hessian eigenvalues: any (numerically) zero eigenvalue
    /// is degenerate, otherwise the sign of the smallest decides.
    pub fn from_eigenvalues(eigs: &[f64]) -> Self {
        if eigs.iter().any(|e| e.abs() <= ZERO_EIGENVALUE_TOL) {
            PointKind::Degenerate
        } else if eigs.iter().any(|&e| e < 0.0) {
            PointKind::StrictSaddle
        } else {
            PointKind::LocalMin
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            PointKind::StrictSaddle => "strict_saddle",
            PointKind::LocalMin => "local_min",
            PointKind::Degenerate => "degenerate",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub location: Vector,
    /// Ascending.
    pub hessian_eigenvalues: Vec<f64>,
    pub kind: PointKind,
}

impl CriticalPoint {
    pub fn new(location: Vector, hessian: &Matrix) -> Self {
        let hessian_eigenvalues = sorted_eigenvalues(hessian);
        let kind = PointKind::from_eigenvalues(&hessian_eigenvalues);
        Self {
            location,
            hessian_eigenvalues,
            kind,
        }
    }

    pub fn min_abs_eigenvalue(&self) -> f64 {
        self.hessian_eigenvalues
            .iter()
            .map(|e| e.abs())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn sorted_eigenvalues(m: &Matrix) -> Vec<f64> {
    let mut e: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

/// Spectral norm of a symmetric matrix.
pub fn spectral_norm(m: &Matrix) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(0.0, |acc: f64, e| acc.max(e.abs()))
}

fn check_dim(expected: usize, x: &Vector) {
    debug_assert_eq!(x.len(), expected, "point has wrong dimension");
}

// ---------------------------------------------------------------------------
// Quadratic forms

/// `f(x) = 1/2 x^T H x` with symmetric `H`.
#[derive(Clone, Debug)]
pub struct Quadratic {
    h: Matrix,
    bound: f64,
    critical: Vec<CriticalPoint>,
}

impl Quadratic {
    pub fn new(h: Matrix) -> Result<Self> {
        if !h.is_square() || h.nrows() == 0 {
            return Err(Error::InvalidParameter("H must be a non-empty square matrix".into()));
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("H has non-finite entries".into()));
        }
        if (&h - h.transpose()).amax() > 1e-12 * (1.0 + h.amax()) {
            return Err(Error::InvalidParameter("H must be symmetric".into()));
        }
        let bound = spectral_norm(&h);
        if bound <= 0.0 {
            return Err(Error::InvalidParameter("H must be nonzero".into()));
        }
        let d = h.nrows();
        let critical = vec![CriticalPoint::new(Vector::zeros(d), &h)];
        Ok(Self { h, bound, critical })
    }

    /// Diagonal `H`.
    ///
    /// # Panics
    ///
    /// If `diag` is empty, all zero, or non-finite.
    pub fn diagonal(diag: &[f64]) -> Self {
        Self::new(Matrix::from_diagonal(&Vector::from_column_slice(diag)))
            .expect("invalid diagonal quadratic")
    }

    pub fn h(&self) -> &Matrix {
        &self.h
    }
}

impl Objective for Quadratic {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn dim(&self) -> usize {
        self.h.nrows()
    }

    fn value(&self, x: &Vector) -> f64 {
        check_dim(self.dim(), x);
        0.5 * x.dot(&(&self.h * x))
    }

    fn gradient(&self, x: &Vector) -> Vector {
        check_dim(self.dim(), x);
        Vector::from_iterator(self.dim(), (0..self.dim()).map(|i| self.partial(x, i)))
    }

    fn partial(&self, x: &Vector, i: usize) -> f64 {
        self.h.row(i).transpose().dot(x)
    }

    fn hessian(&self, _x: &Vector) -> Matrix {
        self.h.clone()
    }

    fn hessian_diag(&self, _x: &Vector, i: usize) -> f64 {
        self.h[(i, i)]
    }

    fn hessian_bound(&self) -> f64 {
        self.bound
    }

    fn critical_points(&self) -> &[CriticalPoint] {
        &self.critical
    }

    fn as_quadratic(&self) -> Option<&Matrix> {
        Some(&self.h)
    }
}

// ---------------------------------------------------------------------------
// Separable quartic

/// `f(x) = sum_j (x_j^4 / 4 - x_j^2 / 2)`.
///
/// Critical points are all of `{-1, 0, 1}^d`; the Hessian is
/// `diag(3 x_j^2 - 1)`, so any point with a zero coordinate is a strict
/// saddle and the `2^d` sign vectors are minima. On the ball of radius `R`,
/// `||hess f|| <= 3 R^2 - 1`.
#[derive(Clone, Debug)]
pub struct SeparableQuartic {
    d: usize,
    radius: f64,
    critical: Vec<CriticalPoint>,
}

impl SeparableQuartic {
    /// Registry size is `3^d`, so `d` is capped.
    pub const MAX_DIM: usize = 10;

    pub fn new(d: usize, radius: f64) -> Result<Self> {
        if d == 0 || d > Self::MAX_DIM {
            return Err(Error::InvalidParameter(format!(
                "separable-quartic needs 1 <= d <= {}",
                Self::MAX_DIM
            )));
        }
        if !(radius > (d as f64).sqrt()) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "separable-quartic radius must exceed sqrt(d) = {:.4}",
                (d as f64).sqrt()
            )));
        }
        let mut critical = Vec::with_capacity(3usize.pow(d as u32));
        for code in 0..3usize.pow(d as u32) {
            let mut c = code;
            let loc = Vector::from_iterator(
                d,
                (0..d).map(|_| {
                    let v = (c % 3) as f64 - 1.0;
                    c /= 3;
                    v
                }),
            );
            let h = Matrix::from_diagonal(&loc.map(|v| 3.0 * v * v - 1.0));
            critical.push(CriticalPoint::new(loc, &h));
        }
        Ok(Self {
            d,
            radius,
            critical,
        })
    }

    pub fn default_radius(d: usize) -> f64 {
        (2.0f64).max((d as f64).sqrt() + 0.5)
    }
}

impl Objective for SeparableQuartic {
    fn name(&self) -> &str {
        "separable-quartic"
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn value(&self, x: &Vector) -> f64 {
        check_dim(self.d, x);
        x.iter().map(|&v| 0.25 * v.powi(4) - 0.5 * v * v).sum()
    }

    fn gradient(&self, x: &Vector) -> Vector {
        x.map(|v| v * v * v - v)
    }

    fn partial(&self, x: &Vector, i: usize) -> f64 {
        let v = x[i];
        v * v * v - v
    }

    fn hessian(&self, x: &Vector) -> Matrix {
        Matrix::from_diagonal(&x.map(|v| 3.0 * v * v - 1.0))
    }

    fn hessian_diag(&self, x: &Vector, i: usize) -> f64 {
        3.0 * x[i] * x[i] - 1.0
    }

    fn hessian_bound(&self) -> f64 {
        3.0 * self.radius * self.radius - 1.0
    }

    fn region(&self) -> Option<f64> {
        Some(self.radius)
    }

    fn critical_points(&self) -> &[CriticalPoint] {
        &self.critical
    }
}

// ---------------------------------------------------------------------------
// Coupled saddle

/// `f(x, y) = x^2 / 2 + y^4 / 4 - y^2 / 2 + c x y^2` on `R^2`, `0 <= c < 1/sqrt(2)`.
///
/// The origin is a strict saddle with Hessian `diag(1, -1)`. The cubic
/// coupling bends the zero set of `f` away from the Hessian cone, and the
/// two minima sit at `(-c y*^2, +-y*)` with `y*^2 = 1 / (1 - 2c^2)`.
/// Gershgorin on the ball of radius `R >= 1` gives
/// `M = max(1 + 2cR, 3R^2 - 1 + 4cR)`.
#[derive(Clone, Debug)]
pub struct CoupledSaddle {
    c: f64,
    radius: f64,
    critical: Vec<CriticalPoint>,
}

impl CoupledSaddle {
    pub const DEFAULT_RADIUS: f64 = 2.5;

    pub fn new(c: f64, radius: f64) -> Result<Self> {
        if !(0.0..std::f64::consts::FRAC_1_SQRT_2).contains(&c) {
            return Err(Error::InvalidParameter(
                "coupled-saddle needs 0 <= c < 1/sqrt(2)".into(),
            ));
        }
        let y2 = 1.0 / (1.0 - 2.0 * c * c);
        let min_norm = (c * c * y2 * y2 + y2).sqrt();
        if !(radius > min_norm.max(1.0)) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "coupled-saddle radius must exceed {:.4}",
                min_norm.max(1.0)
            )));
        }
        let mut obj = Self {
            c,
            radius,
            critical: Vec::new(),
        };
        let y = y2.sqrt();
        let pts = [
            Vector::from_vec(vec![0.0, 0.0]),
            Vector::from_vec(vec![-c * y2, y]),
            Vector::from_vec(vec![-c * y2, -y]),
        ];
        obj.critical = pts
            .into_iter()
            .map(|p| {
                let h = obj.hessian(&p);
                CriticalPoint::new(p, &h)
            })
            .collect();
        Ok(obj)
    }

    pub fn coupling(&self) -> f64 {
        self.c
    }
}

impl Objective for CoupledSaddle {
    fn name(&self) -> &str {
        "coupled-saddle"
    }

    fn dim(&self) -> usize {
        2
    }

    fn value(&self, p: &Vector) -> f64 {
        let (x, y) = (p[0], p[1]);
        0.5 * x * x + 0.25 * y.powi(4) - 0.5 * y * y + self.c * x * y * y
    }

    fn gradient(&self, p: &Vector) -> Vector {
        Vector::from_vec(vec![self.partial(p, 0), self.partial(p, 1)])
    }

    fn partial(&self, p: &Vector, i: usize) -> f64 {
        let (x, y) = (p[0], p[1]);
        match i {
            0 => x + self.c * y * y,
            _ => y * y * y - y + 2.0 * self.c * x * y,
        }
    }

    fn hessian(&self, p: &Vector) -> Matrix {
        let (x, y) = (p[0], p[1]);
        let off = 2.0 * self.c * y;
        Matrix::from_row_slice(2, 2, &[1.0, off, off, 3.0 * y * y - 1.0 + 2.0 * self.c * x])
    }

    fn hessian_bound(&self) -> f64 {
        let (c, r) = (self.c, self.radius);
        (1.0 + 2.0 * c * r).max(3.0 * r * r - 1.0 + 4.0 * c * r)
    }

    fn region(&self) -> Option<f64> {
        Some(self.radius)
    }

    fn critical_points(&self) -> &[CriticalPoint] {
        &self.critical
    }
}

// ---------------------------------------------------------------------------
// Rosenbrock-like valley

/// `f(x, y) = (a - x)^2 + b (y - x^2)^2`, a curved valley with a single
/// minimum at `(a, a^2)`. Gershgorin on the ball of radius `R` gives
/// `M = max(2 + 8bR + 12bR^2, 4bR + 2b)`.
#[derive(Clone, Debug)]
pub struct RosenbrockLike {
    a: f64,
    b: f64,
    radius: f64,
    critical: Vec<CriticalPoint>,
}

impl RosenbrockLike {
    pub const DEFAULT_RADIUS: f64 = 2.0;

    pub fn new(a: f64, b: f64, radius: f64) -> Result<Self> {
        if !(b > 0.0) || !b.is_finite() || !a.is_finite() {
            return Err(Error::InvalidParameter("rosenbrock-like needs finite a and b > 0".into()));
        }
        let min_norm = (a * a + a.powi(4)).sqrt();
        if !(radius > min_norm) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "rosenbrock-like radius must exceed ||(a, a^2)|| = {min_norm:.4}"
            )));
        }
        let mut obj = Self {
            a,
            b,
            radius,
            critical: Vec::new(),
        };
        let p = Vector::from_vec(vec![a, a * a]);
        let h = obj.hessian(&p);
        obj.critical = vec![CriticalPoint::new(p, &h)];
        Ok(obj)
    }
}

impl Objective for RosenbrockLike {
    fn name(&self) -> &str {
        "rosenbrock-like"
    }

    fn dim(&self) -> usize {
        2
    }

    fn value(&self, p: &Vector) -> f64 {
        let (x, y) = (p[0], p[1]);
        (self.a - x).powi(2) + self.b * (y - x * x).powi(2)
    }

    fn gradient(&self, p: &Vector) -> Vector {
        Vector::from_vec(vec![self.partial(p, 0), self.partial(p, 1)])
    }

    fn partial(&self, p: &Vector, i: usize) -> f64 {
        let (x, y) = (p[0], p[1]);
        match i {
            0 => -2.0 * (self.a - x) - 4.0 * self.b * x * (y - x * x),
            _ => 2.0 * self.b * (y - x * x),
        }
    }

    fn hessian(&self, p: &Vector) -> Matrix {
        let (x, y) = (p[0], p[1]);
        let b = self.b;
        let off = -4.0 * b * x;
        Matrix::from_row_slice(
            2,
            2,
            &[2.0 - 4.0 * b * y + 12.0 * b * x * x, off, off, 2.0 * b],
        )
    }

    fn hessian_bound(&self) -> f64 {
        let (b, r) = (self.b, self.radius);
        (2.0 + 8.0 * b * r + 12.0 * b * r * r).max(4.0 * b * r + 2.0 * b)
    }

    fn region(&self) -> Option<f64> {
        Some(self.radius)
    }

    fn critical_points(&self) -> &[CriticalPoint] {
        &self.critical
    }
}

// ---------------------------------------------------------------------------
// Corpus lookup

/// String-valued parameters, as read from the command line or a config file.
pub type Params = BTreeMap<String, String>;

/// Names accepted by [`builtin_objective`].
pub const CORPUS: &[&str] = &["quadratic", "separable-quartic", "coupled-saddle", "rosenbrock-like"];

fn param_f64(params: &Params, key: &str, default: Option<f64>) -> Result<f64> {
    match params.get(key) {
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("`{key}` is not a number: {v}"))),
        None => default.ok_or_else(|| Error::InvalidParameter(format!("missing parameter `{key}`"))),
    }
}

fn check_known(params: &Params, allowed: &[&str]) -> Result<()> {
    match params.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(Error::InvalidParameter(format!("unexpected parameter `{k}`"))),
        None => Ok(()),
    }
}

/// Parameter names accepted by a corpus objective.
pub fn objective_param_names(name: &str) -> Result<&'static [&'static str]> {
    match name {
        "quadratic" => Ok(&["H"]),
        "separable-quartic" => Ok(&["d", "radius"]),
        "coupled-saddle" => Ok(&["c", "radius"]),
        "rosenbrock-like" => Ok(&["a", "b", "radius"]),
        other => Err(Error::UnknownObjective(other.to_string())),
    }
}

/// Build a corpus objective by name.
///
/// | name | parameters |
/// |------|------------|
/// | `quadratic` | `H`: diagonal `"1,-1"` or `@path` to a lower triangle |
/// | `separable-quartic` | `d` (default 2), `radius` (default `max(2, sqrt(d)+0.5)`) |
/// | `coupled-saddle` | `c` (default 0.5), `radius` (default 2.5) |
/// | `rosenbrock-like` | `a` (default 1), `b` (default 1), `radius` (default 2) |
pub fn builtin_objective(name: &str, params: &Params) -> Result<Arc<dyn Objective>> {
    match name {
        "quadratic" => {
            check_known(params, objective_param_names(name)?)?;
            let spec = params
                .get("H")
                .ok_or_else(|| Error::InvalidParameter("quadratic needs `H`".into()))?;
            Ok(Arc::new(Quadratic::new(parse_matrix(spec)?)?))
        }
        "separable-quartic" => {
            check_known(params, objective_param_names(name)?)?;
            let d = param_f64(params, "d", Some(2.0))?;
            if d.fract() != 0.0 || d < 1.0 {
                return Err(Error::InvalidParameter("`d` must be a positive integer".into()));
            }
            let d = d as usize;
            let radius = param_f64(params, "radius", Some(SeparableQuartic::default_radius(d)))?;
            Ok(Arc::new(SeparableQuartic::new(d, radius)?))
        }
        "coupled-saddle" => {
            check_known(params, objective_param_names(name)?)?;
            let c = param_f64(params, "c", Some(0.5))?;
            let radius = param_f64(params, "radius", Some(CoupledSaddle::DEFAULT_RADIUS))?;
            Ok(Arc::new(CoupledSaddle::new(c, radius)?))
        }
        "rosenbrock-like" => {
            check_known(params, objective_param_names(name)?)?;
            let a = param_f64(params, "a", Some(1.0))?;
            let b = param_f64(params, "b", Some(1.0))?;
            let radius = param_f64(params, "radius", Some(RosenbrockLike::DEFAULT_RADIUS))?;
            Ok(Arc::new(RosenbrockLike::new(a, b, radius)?))
        }
        other => Err(Error::UnknownObjective(other.to_string())),
    }
}

/// Parse a symmetric matrix.
///
/// `"h1,h2,...,hd"` is a diagonal. `"@path"` reads the row-major lower
/// triangle (`H11 H21 H22 H31 H32 H33 ...`, separated by commas or
/// whitespace) from a file.
pub fn parse_matrix(spec: &str) -> Result<Matrix> {
    let spec = spec.trim();
    if let Some(path) = spec.strip_prefix('@') {
        let text = std::fs::read_to_string(path)?;
        return parse_lower_triangle(&text);
    }
    let diag = parse_vector(spec)?;
    Ok(Matrix::from_diagonal(&diag))
}

/// Parse a row-major lower triangle into a full symmetric matrix.
pub fn parse_lower_triangle(text: &str) -> Result<Matrix> {
    let vals = parse_numbers(text)?;
    let n = vals.len();
    // n = d(d+1)/2
    let d = ((((8 * n + 1) as f64).sqrt() - 1.0) / 2.0).round() as usize;
    if d == 0 || d * (d + 1) / 2 != n {
        return Err(Error::InvalidParameter(format!(
            "{n} entries is not a lower triangle"
        )));
    }
    let mut m = Matrix::zeros(d, d);
    let mut it = vals.into_iter();
    for r in 0..d {
        for c in 0..=r {
            let v = it.next().expect("count checked above");
            m[(r, c)] = v;
            m[(c, r)] = v;
        }
    }
    Ok(m)
}

/// Parse `"1, -2.5, 3"` into a vector.
pub fn parse_vector(text: &str) -> Result<Vector> {
    let vals = parse_numbers(text)?;
    if vals.is_empty() {
        return Err(Error::InvalidParameter("empty vector".into()));
    }
    Ok(Vector::from_vec(vals))
}

fn parse_numbers(text: &str) -> Result<Vec<f64>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::InvalidParameter(format!("not a finite number: `{s}`")))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Assumption checks

#[derive(Clone, Debug)]
pub struct ValidationOptions {
    /// Radius of the sampling ball about the origin.
    pub region_radius: f64,
    pub samples: usize,
    /// Radius of the ball about each critical point used for the Hessian
    /// Lipschitz estimate.
    pub lipschitz_radius: f64,
    pub seed: u64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            region_radius: 1.0,
            samples: 1000,
            lipschitz_radius: 0.1,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriticalPointReport {
    pub index: usize,
    pub kind: PointKind,
    pub min_abs_eigenvalue: f64,
    pub nondegenerate: bool,
    /// Largest observed `||hess f(x) - hess f(y)|| / ||x - y||` over pairs
    /// in the ball about the point (the point itself included).
    pub hessian_lipschitz: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub max_hessian_norm: f64,
    pub hessian_bound: f64,
    pub bounded_hessian_holds: bool,
    pub critical_points: Vec<CriticalPointReport>,
    pub nondegenerate_holds: bool,
}

/// Spot-check the Hessian bound and critical-point non-degeneracy.
/// Violations are reported, never raised.
pub fn validate_assumptions(obj: &dyn Objective, opts: &ValidationOptions) -> ValidationReport {
    let d = obj.dim();
    let samples = opts.samples.max(1);
    let mut rng = sampling::rng(opts.seed, 0x7a11_da7e);
    let origin = Vector::zeros(d);

    let max_hessian_norm = (0..samples)
        .map(|_| spectral_norm(&obj.hessian(&sampling::uniform_ball(&mut rng, &origin, opts.region_radius))))
        .fold(0.0, f64::max);

    let critical_points: Vec<_> = obj
        .critical_points()
        .iter()
        .enumerate()
        .map(|(index, cp)| {
            let min_abs_eigenvalue = cp.min_abs_eigenvalue();
            let h0 = obj.hessian(&cp.location);
            let mut lip = 0.0f64;
            for _ in 0..samples {
                let x = sampling::uniform_ball(&mut rng, &cp.location, opts.lipschitz_radius);
                let y = sampling::uniform_ball(&mut rng, &cp.location, opts.lipschitz_radius);
                let hx = obj.hessian(&x);
                for (other, hy) in [(&y, obj.hessian(&y)), (&cp.location, h0.clone())] {
                    let dist = (&x - other).norm();
                    if dist > 0.0 {
                        lip = lip.max(spectral_norm(&(&hx - hy)) / dist);
                    }
                }
            }
            CriticalPointReport {
                index,
                kind: cp.kind,
                min_abs_eigenvalue,
                nondegenerate: min_abs_eigenvalue > ZERO_EIGENVALUE_TOL,
                hessian_lipschitz: lip,
            }
        })
        .collect();

    let hessian_bound = obj.hessian_bound();
    ValidationReport {
        max_hessian_norm,
        hessian_bound,
        bounded_hessian_holds: max_hessian_norm <= hessian_bound * (1.0 + 1e-12),
        nondegenerate_holds: critical_points.iter().all(|c| c.nondegenerate),
        critical_points,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numdiff;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    /// f(x) = x^3 on R, with the degenerate critical point 0 registered.
    struct Cubic {
        critical: Vec<CriticalPoint>,
    }

    impl Cubic {
        fn new() -> Self {
            Self {
                critical: vec![CriticalPoint::new(v(&[0.0]), &Matrix::zeros(1, 1))],
            }
        }
    }

    impl Objective for Cubic {
        fn name(&self) -> &str {
            "cubic"
        }
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, x: &Vector) -> f64 {
            x[0].powi(3)
        }
        fn gradient(&self, x: &Vector) -> Vector {
            v(&[3.0 * x[0] * x[0]])
        }
        fn hessian(&self, x: &Vector) -> Matrix {
            Matrix::from_element(1, 1, 6.0 * x[0])
        }
        fn hessian_bound(&self) -> f64 {
            6.0
        }
        fn region(&self) -> Option<f64> {
            Some(1.0)
        }
        fn critical_points(&self) -> &[CriticalPoint] {
            &self.critical
        }
    }

    fn corpus() -> Vec<Arc<dyn Objective>> {
        let mut p = Params::new();
        p.insert("H".into(), "1,-1".into());
        let mut q3 = Params::new();
        q3.insert("d".into(), "3".into());
        vec![
            builtin_objective("quadratic", &p).unwrap(),
            builtin_objective("separable-quartic", &Params::new()).unwrap(),
            builtin_objective("separable-quartic", &q3).unwrap(),
            builtin_objective("coupled-saddle", &Params::new()).unwrap(),
            builtin_objective("rosenbrock-like", &Params::new()).unwrap(),
        ]
    }

    #[test]
    fn quadratic_saddle_registry() {
        let q = Quadratic::diagonal(&[1.0, -1.0]);
        let cp = &q.critical_points()[0];
        assert_eq!(cp.location, v(&[0.0, 0.0]));
        assert_eq!(cp.hessian_eigenvalues, vec![-1.0, 1.0]);
        assert_eq!(cp.kind, PointKind::StrictSaddle);
        assert_eq!(q.hessian_bound(), 1.0);
    }

    #[test]
    fn quadratic_minimum_registry() {
        let q = Quadratic::diagonal(&[2.0, 3.0]);
        assert_eq!(q.critical_points()[0].kind, PointKind::LocalMin);
        assert_eq!(q.hessian_bound(), 3.0);
    }

    #[test]
    fn singular_quadratic_is_degenerate() {
        let q = Quadratic::diagonal(&[1.0, 0.0]);
        assert_eq!(q.critical_points()[0].kind, PointKind::Degenerate);
    }

    #[test]
    fn quadratic_rejects_asymmetric() {
        let h = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(Quadratic::new(h), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn quadratic_value_matches_hessian_form() {
        let h = Matrix::from_row_slice(3, 3, &[2.0, 0.3, -1.0, 0.3, -1.0, 0.5, -1.0, 0.5, 0.7]);
        let q = Quadratic::new(h).unwrap();
        let mut rng = sampling::rng(3, 0);
        for _ in 0..100 {
            let x = sampling::uniform_ball(&mut rng, &Vector::zeros(3), 5.0);
            let direct = 0.5 * x.dot(&(q.hessian(&x) * &x));
            assert!((q.value(&x) - direct).abs() <= 1e-14 * (1.0 + direct.abs()));
            assert!((q.gradient(&x) - q.hessian(&x) * &x).amax() <= 1e-14 * (1.0 + x.norm()));
        }
    }

    #[test]
    fn quartic_critical_points() {
        let q = SeparableQuartic::new(2, 2.0).unwrap();
        assert_eq!(q.critical_points().len(), 9);
        let origin = q.critical_points().iter().find(|c| c.location.norm() == 0.0).unwrap();
        assert_eq!(origin.kind, PointKind::StrictSaddle);
        assert_eq!(origin.hessian_eigenvalues, vec![-1.0, -1.0]);
        let mins: Vec<_> = q
            .critical_points()
            .iter()
            .filter(|c| c.kind == PointKind::LocalMin)
            .collect();
        assert_eq!(mins.len(), 4);
        for m in mins {
            assert!(m.location.iter().all(|v| v.abs() == 1.0));
            assert_eq!(m.hessian_eigenvalues, vec![2.0, 2.0]);
        }
        assert_eq!(q.hessian_bound(), 11.0);
    }

    #[test]
    fn coupled_saddle_critical_points() {
        let c = CoupledSaddle::new(0.5, 2.5).unwrap();
        let kinds: Vec<_> = c.critical_points().iter().map(|p| p.kind).collect();
        assert_eq!(kinds, vec![PointKind::StrictSaddle, PointKind::LocalMin, PointKind::LocalMin]);
        assert_eq!(c.critical_points()[1].location, v(&[-1.0, 2f64.sqrt()]));
    }

    #[test]
    fn registered_points_are_critical() {
        for obj in corpus() {
            for cp in obj.critical_points() {
                let g = obj.gradient(&cp.location).norm();
                assert!(g <= 1e-10, "{} at {:?}: {g}", obj.name(), cp.location);
                if cp.kind == PointKind::StrictSaddle {
                    assert!(cp.hessian_eigenvalues[0] < 0.0);
                }
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for obj in corpus() {
            let d = obj.dim();
            let r = obj.region().unwrap_or(3.0) * 0.9;
            let mut rng = sampling::rng(11, d as u64);
            for _ in 0..100 {
                let x = sampling::uniform_ball(&mut rng, &Vector::zeros(d), r);
                let g = obj.gradient(&x);
                let g_fd = numdiff::gradient(|y| obj.value(y), &x);
                assert!((&g_fd - &g).norm() <= 1e-5 * (1.0 + g.norm()), "{}", obj.name());
                for i in 0..d {
                    assert_eq!(obj.partial(&x, i), g[i]);
                }
                let h = obj.hessian(&x);
                let h_fd = numdiff::hessian_from_gradient(|y| obj.gradient(y), &x);
                assert!((&h_fd - &h).norm() <= 1e-5 * (1.0 + h.norm()), "{}", obj.name());
                for i in 0..d {
                    assert_eq!(obj.hessian_diag(&x, i), h[(i, i)]);
                }
            }
        }
    }

    #[test]
    fn hessian_bound_holds_in_region() {
        for obj in corpus() {
            let r = obj.region().unwrap_or(10.0);
            let report = validate_assumptions(
                obj.as_ref(),
                &ValidationOptions {
                    region_radius: r,
                    samples: 500,
                    ..Default::default()
                },
            );
            assert!(report.bounded_hessian_holds, "{}: {report:?}", obj.name());
        }
    }

    #[test]
    fn validation_of_constant_hessian() {
        let q = Quadratic::diagonal(&[1.0, -1.0]);
        let r = validate_assumptions(&q, &ValidationOptions::default());
        assert_eq!(r.max_hessian_norm, 1.0);
        assert_eq!(r.critical_points[0].min_abs_eigenvalue, 1.0);
        assert_eq!(r.critical_points[0].hessian_lipschitz, 0.0);
        assert!(r.nondegenerate_holds);
    }

    #[test]
    fn validation_of_quartic_hessian_norm() {
        let q = SeparableQuartic::new(2, 2.0).unwrap();
        let r = validate_assumptions(
            &q,
            &ValidationOptions {
                region_radius: 2.0,
                samples: 1000,
                ..Default::default()
            },
        );
        assert!(r.max_hessian_norm <= 11.0);
        // Near the origin ||H(x) - H(y)|| = max_j 3|x_j^2 - y_j^2| <= 6 * 0.1 ||x - y||.
        assert!(r.critical_points[4].hessian_lipschitz <= 0.6 + 1e-12);
        assert!(r.critical_points[4].hessian_lipschitz > 0.0);
    }

    #[test]
    fn validation_flags_degenerate_cubic() {
        let r = validate_assumptions(&Cubic::new(), &ValidationOptions::default());
        assert!(!r.nondegenerate_holds);
        assert_eq!(r.critical_points[0].kind, PointKind::Degenerate);
        assert!(!r.critical_points[0].nondegenerate);
    }

    #[test]
    fn builtin_errors() {
        assert!(matches!(
            builtin_objective("himmelblau", &Params::new()),
            Err(Error::UnknownObjective(_))
        ));
        let mut p = Params::new();
        p.insert("b".into(), "-1".into());
        assert!(matches!(builtin_objective("rosenbrock-like", &p), Err(Error::InvalidParameter(_))));
        let mut p = Params::new();
        p.insert("d".into(), "0".into());
        assert!(builtin_objective("separable-quartic", &p).is_err());
        assert!(builtin_objective("quadratic", &Params::new()).is_err());
        let mut p = Params::new();
        p.insert("H".into(), "1,-1".into());
        p.insert("bogus".into(), "1".into());
        assert!(builtin_objective("quadratic", &p).is_err());
    }

    #[test]
    fn lower_triangle_parsing() {
        let m = parse_lower_triangle("1\n0.5 -2\n0 3, 4").unwrap();
        assert_eq!(m, Matrix::from_row_slice(3, 3, &[1.0, 0.5, 0.0, 0.5, -2.0, 3.0, 0.0, 3.0, 4.0]));
        assert!(parse_lower_triangle("1 2").is_err());
        assert_eq!(parse_matrix("2, 3").unwrap(), Matrix::from_diagonal(&v(&[2.0, 3.0])));
        assert!(parse_matrix("1, x").is_err());
    }
}
