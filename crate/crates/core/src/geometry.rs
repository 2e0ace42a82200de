//! Local geometry near a strict saddle.
//!
//! All sets are expressed relative to the saddle `x*` with `f(x*)` shifted
//! to zero:
//!
//! * `U1`: a ball on which `||grad f(x)|| >= sigma ||x - x*||`.
//! * `U2(rho)`: the union of balls `B(z, rho ||z||)` over nonzero zeros `z`
//!   of `f`.
//! * `S = U1 ∩ U2 ∩ {f >= 0}`, the region from which a single step may fail
//!   to push `f` below zero.
//!
//! For a quadratic form the zero set is the cone `{z : z^T H z = 0}`, and
//! `x ∈ U2(rho)` exactly when the angle between `x` and the cone is below
//! `arcsin(rho)`. For other objectives membership in `U2` is decided by
//! probing for zeros of `f` along a fixed set of directions; the test can
//! miss thin pieces of the zero set but never reports a false member.

use nalgebra::SymmetricEigen;
use serde::Serialize;

use crate::objective::{CriticalPoint, Objective, PointKind, ZERO_EIGENVALUE_TOL};
use crate::sampling;
use crate::{Error, Matrix, Result, Vector};

// ---------------------------------------------------------------------------
// The zero cone of a quadratic form

/// The zero set `{z : z^T H z = 0}` of a symmetric quadratic form.
#[derive(Clone, Debug)]
pub struct QuadraticCone {
    eigenvalues: Vec<f64>,
    eigenvectors: Matrix,
}

impl QuadraticCone {
    pub fn new(h: &Matrix) -> Self {
        let eig = SymmetricEigen::new(h.clone());
        let scale = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
        let eigenvalues = eig
            .eigenvalues
            .iter()
            .map(|&e| if e.abs() <= ZERO_EIGENVALUE_TOL * scale { 0.0 } else { e })
            .collect();
        Self {
            eigenvalues,
            eigenvectors: eig.eigenvectors,
        }
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Whether the cone contains anything besides the origin.
    pub fn is_trivial(&self) -> bool {
        let pos = self.eigenvalues.iter().any(|&e| e > 0.0);
        let neg = self.eigenvalues.iter().any(|&e| e < 0.0);
        let zero = self.eigenvalues.contains(&0.0);
        !zero && !(pos && neg)
    }

    /// Nearest point of the cone to `u`.
    pub fn nearest(&self, u: &Vector) -> Vector {
        let w = self.eigenvectors.transpose() * u;
        let z = self.nearest_in_eigenbasis(&w);
        &self.eigenvectors * z
    }

    /// Euclidean distance from `u` to the cone.
    pub fn distance(&self, u: &Vector) -> f64 {
        let w = self.eigenvectors.transpose() * u;
        (&w - self.nearest_in_eigenbasis(&w)).norm()
    }

    /// Sine of the angle between `x` and the cone, in `[0, 1]`.
    pub fn angle_sine(&self, x: &Vector) -> f64 {
        let n = x.norm();
        if n == 0.0 {
            return 1.0;
        }
        self.distance(&(x / n)).min(1.0)
    }

    /// Minimize `||w - z||` subject to `sum_j h_j z_j^2 = 0`.
    ///
    /// Stationary points satisfy `z_j = w_j / (1 + nu h_j)`; the minimizer
    /// has `I + nu H` positive semidefinite, so `nu` is the unique root of
    /// the decreasing secular function
    /// `g(nu) = sum_j h_j w_j^2 / (1 + nu h_j)^2` on
    /// `(-1 / h_max, 1 / |h_min|)`. When `w` has no weight on an extreme
    /// eigenvalue the root can sit on the interval end; that end is then
    /// used with the remaining mass placed on the extreme eigendirection.
    fn nearest_in_eigenbasis(&self, w: &Vector) -> Vector {
        let h = &self.eigenvalues;
        let d = h.len();
        let h_max = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let h_min = h.iter().copied().fold(f64::INFINITY, f64::min);

        if h_min >= 0.0 || h_max <= 0.0 {
            // Semidefinite: the zero set is the null space.
            return Vector::from_iterator(d, (0..d).map(|j| if h[j] == 0.0 { w[j] } else { 0.0 }));
        }

        let lo = -1.0 / h_max;
        let hi = 1.0 / -h_min;
        let secular = |nu: f64| -> f64 {
            (0..d)
                .map(|j| {
                    let den = 1.0 + nu * h[j];
                    h[j] * w[j] * w[j] / (den * den)
                })
                .sum()
        };
        let project = |nu: f64| Vector::from_iterator(d, (0..d).map(|j| w[j] / (1.0 + nu * h[j])));

        let width = hi - lo;
        let eps = 1e-14 * width;
        let (g_lo, g_hi) = (secular(lo + eps), secular(hi - eps));
        if g_lo < 0.0 {
            return self.hard_case(w, lo, h_max);
        }
        if g_hi > 0.0 {
            return self.hard_case(w, hi, h_min);
        }
        let (mut a, mut b) = (lo + eps, hi - eps);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if secular(mid) > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        project(0.5 * (a + b))
    }

    fn hard_case(&self, w: &Vector, nu: f64, extreme: f64) -> Vector {
        let h = &self.eigenvalues;
        let d = h.len();
        let tie = |v: f64| (v - extreme).abs() <= 1e-12 * extreme.abs();
        let mut z = Vector::zeros(d);
        let mut rest = 0.0;
        for j in (0..d).filter(|&j| !tie(h[j])) {
            z[j] = w[j] / (1.0 + nu * h[j]);
            rest += h[j] * z[j] * z[j];
        }
        let t = (-rest / extreme).max(0.0).sqrt();
        // Put the remaining mass on the extreme eigendirection closest to w.
        let ties: Vec<usize> = (0..d).filter(|&j| tie(h[j])).collect();
        let wn: f64 = ties.iter().map(|&j| w[j] * w[j]).sum::<f64>().sqrt();
        if wn > 0.0 {
            for &j in &ties {
                z[j] = t * w[j] / wn;
            }
        } else {
            z[ties[0]] = t;
        }
        z
    }
}

// ---------------------------------------------------------------------------
// Scalar constants

/// Largest `r <= radius` on which the sampled minimum of
/// `||grad f(x)|| / ||x - x*||` exceeds `sigma = min |eig(H)| / 2`.
/// The radius is halved until the check passes.
pub fn estimate_sigma(
    obj: &dyn Objective,
    saddle: &CriticalPoint,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let min_eig = saddle.min_abs_eigenvalue();
    if !(min_eig > ZERO_EIGENVALUE_TOL) {
        return Err(Error::Degenerate(format!(
            "min |eigenvalue| = {min_eig:e} at {:?}",
            saddle.location.as_slice()
        )));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter("radius must be positive".into()));
    }
    let sigma = 0.5 * min_eig;
    let center = &saddle.location;
    let floor = 1e-12 * (1.0 + center.norm());
    let mut rng = sampling::rng(seed, 0x5161_3a00);
    let mut r = radius;
    while r >= floor {
        let ok = (0..samples.max(1)).all(|_| {
            let x = sampling::uniform_ball(&mut rng, center, r);
            let dist = (&x - center).norm();
            dist == 0.0 || obj.gradient(&x).norm() > sigma * dist
        });
        if ok {
            return Ok((sigma, r));
        }
        r *= 0.5;
    }
    Err(Error::Degenerate(
        "gradient lower bound fails at every radius".into(),
    ))
}

/// Half the root of `rho M + M rho^2 / 2 = (alpha sigma^2 / 2d)(1 - rho)^2`,
/// so the inequality `<` holds strictly.
pub fn solve_rho(alpha: f64, sigma: f64, d: usize, m: f64) -> Result<f64> {
    if !(alpha > 0.0 && sigma > 0.0 && m > 0.0) || d == 0 {
        return Err(Error::InvalidParameter("solve_rho needs positive alpha, sigma, d, M".into()));
    }
    if !(alpha * m < 1.0) {
        return Err(Error::StepSizeTooLarge { alpha, bound: 1.0 / m });
    }
    let c = alpha * sigma * sigma / (2.0 * d as f64);
    let gap = |r: f64| r * m + m * r * r / 2.0 - c * (1.0 - r) * (1.0 - r);
    // gap(0) = -c < 0 < gap(1) = 3M/2, and gap is increasing on [0, 1].
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-12 * hi.max(f64::MIN_POSITIVE) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if gap(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * lo)
}

/// Whether `rho` satisfies the strict margin inequality.
pub fn rho_margin_holds(rho: f64, alpha: f64, sigma: f64, d: usize, m: f64) -> bool {
    rho * m + m * rho * rho / 2.0 < alpha * sigma * sigma / (2.0 * d as f64) * (1.0 - rho).powi(2)
}

/// Points on the unit sphere: a regular grid for `d <= 3`, uniform
/// samples above.
fn sphere_points(d: usize, n: usize, seed: u64) -> Vec<Vector> {
    match d {
        1 => vec![Vector::from_element(1, 1.0), Vector::from_element(1, -1.0)],
        2 => (0..n)
            .map(|k| {
                let th = std::f64::consts::TAU * k as f64 / n as f64;
                Vector::from_vec(vec![th.cos(), th.sin()])
            })
            .collect(),
        3 => {
            // Fibonacci lattice.
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let th = golden * k as f64;
                    Vector::from_vec(vec![r * th.cos(), r * th.sin(), z])
                })
                .collect()
        }
        _ => {
            let mut rng = sampling::rng(seed, 0x5fe7e);
            (0..n).map(|_| sampling::unit_sphere(&mut rng, d)).collect()
        }
    }
}

/// The extreme value of `f^H(x) / ||x||^2` over points of the sphere of
/// radius `radius` that satisfy `sign * f^H >= 0` and lie outside
/// `U2^H(rho_h)`, or `None` if no grid point qualifies.
fn extreme_ratio(
    h: &Matrix,
    cone: &QuadraticCone,
    rho_h: f64,
    sign: f64,
    points: &[Vector],
    radius: f64,
    seed: u64,
) -> Option<f64> {
    let ratio = |u: &Vector| -> Option<f64> {
        let x = u * radius;
        let v = sign * 0.5 * x.dot(&(h * &x)) / x.norm_squared();
        (v >= 0.0 && cone.angle_sine(&x) >= rho_h).then_some(v)
    };
    let (mut best_u, mut best) = points
        .iter()
        .filter_map(|u| ratio(u).map(|v| (u.clone(), v)))
        .min_by(|a, b| a.1.total_cmp(&b.1))?;

    // Local refinement: random perturbations with a shrinking radius.
    let d = h.nrows();
    let mut rng = sampling::rng(seed, 0x4ef1);
    let mut step = if d <= 3 { 4.0 * std::f64::consts::PI / points.len().max(2) as f64 } else { 0.1 };
    step = step.max(1e-6);
    for _ in 0..40 {
        for _ in 0..32 {
            let cand = &best_u + sampling::unit_sphere(&mut rng, d) * step;
            let cand = &cand / cand.norm();
            if let Some(v) = ratio(&cand) {
                if v < best {
                    best = v;
                    best_u = cand;
                }
            }
        }
        step *= 0.6;
    }
    Some(sign * best)
}

/// Quadratic-growth constants of `f^H(x) = x^T H x / 2` outside `U2^H(rho_h)`,
/// evaluated on the sphere of radius `sphere_radius`.
///
/// `p_plus` is the minimum of `f^H / ||x||^2` over `f^H >= 0`, `p_minus` the
/// maximum over `f^H <= 0`. For a definite `H` one side is vacuous and is
/// reported as the negated other side.
pub fn growth_constants_on_sphere(
    h: &Matrix,
    rho_h: f64,
    grid: usize,
    sphere_radius: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    if !(rho_h > 0.0) || !(sphere_radius > 0.0) {
        return Err(Error::InvalidParameter("rho_H and the sphere radius must be positive".into()));
    }
    let cone = QuadraticCone::new(h);
    let eigs = &cone.eigenvalues;
    let lmin = eigs.iter().copied().fold(f64::INFINITY, f64::min);
    let lmax = eigs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lmin > 0.0 {
        return Ok((0.5 * lmin, -0.5 * lmin));
    }
    if lmax < 0.0 {
        return Ok((-0.5 * lmax, 0.5 * lmax));
    }
    let points = sphere_points(h.nrows(), grid.max(8), seed);
    let plus = extreme_ratio(h, &cone, rho_h, 1.0, &points, sphere_radius, seed);
    let minus = extreme_ratio(h, &cone, rho_h, -1.0, &points, sphere_radius, seed ^ 1);
    match (plus, minus) {
        (Some(p), Some(m)) => Ok((p, m)),
        (Some(p), None) if lmin >= 0.0 => Ok((p, -p)),
        (None, Some(m)) if lmax <= 0.0 => Ok((-m, m)),
        _ => Err(Error::EmptyFeasibleSet(format!(
            "no sphere point with f^H of either sign lies outside U2^H(rho_H = {rho_h})"
        ))),
    }
}

/// [`growth_constants_on_sphere`] on the unit sphere.
pub fn p_plus_oracle(h: &Matrix, rho_h: f64, grid: usize) -> Result<(f64, f64)> {
    growth_constants_on_sphere(h, rho_h, grid, 1.0, 0)
}

// ---------------------------------------------------------------------------
// Zero-set membership

/// Decides membership in `U2(rho)` for one objective and saddle.
#[derive(Clone, Debug)]
pub struct ZeroSetProbe {
    center: Vector,
    center_value: f64,
    /// `Some` for quadratic objectives: membership is then exact.
    cone: Option<QuadraticCone>,
    directions: Vec<Vector>,
    steps_per_ray: usize,
}

impl ZeroSetProbe {
    /// `probes` random directions plus the Hessian eigenvectors at the
    /// saddle; the direction toward the saddle is added per query.
    pub fn new(obj: &dyn Objective, saddle: &CriticalPoint, probes: usize, seed: u64) -> Self {
        let d = obj.dim();
        let center = saddle.location.clone();
        let h = obj.hessian(&center);
        let mut rng = sampling::rng(seed, 0x9b0b);
        let mut directions: Vec<Vector> = (0..probes).map(|_| sampling::unit_sphere(&mut rng, d)).collect();
        let eig = SymmetricEigen::new(h.clone());
        directions.extend(eig.eigenvectors.column_iter().map(|c| c.into_owned()));
        Self {
            center_value: obj.value(&center),
            cone: obj.as_quadratic().map(QuadraticCone::new),
            center,
            directions,
            steps_per_ray: 16,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.cone.is_some()
    }

    /// Whether `x` lies in `U2(rho)`.
    pub fn contains(&self, obj: &dyn Objective, x: &Vector, rho: f64) -> bool {
        let z = x - &self.center;
        let zn = z.norm();
        if zn == 0.0 {
            return false;
        }
        if let Some(cone) = &self.cone {
            return cone.angle_sine(&z) < rho;
        }
        let shifted = |p: &Vector| obj.value(p) - self.center_value;
        let fx = shifted(x);
        if fx == 0.0 {
            return true;
        }
        // Any qualifying zero y has ||y - x*|| <= ||z|| / (1 - rho).
        let reach = rho * zn / (1.0 - rho);
        let toward = -&z / zn;
        let accept = |y: &Vector| {
            let yz = y - &self.center;
            let yn = yz.norm();
            yn > 0.0 && (&yz - &z).norm() < rho * yn
        };
        for dir in self.directions.iter().chain(std::iter::once(&toward)) {
            for sign in [1.0, -1.0] {
                let mut prev_s = 0.0;
                for k in 1..=self.steps_per_ray {
                    let s = reach * k as f64 / self.steps_per_ray as f64;
                    let p = x + dir * (sign * s);
                    let fp = shifted(&p);
                    if fp == 0.0 {
                        if accept(&p) {
                            return true;
                        }
                        break;
                    }
                    if fp.signum() != fx.signum() {
                        let (mut a, mut b) = (prev_s, s);
                        for _ in 0..60 {
                            let mid = 0.5 * (a + b);
                            if shifted(&(x + dir * (sign * mid))).signum() == fx.signum() {
                                a = mid;
                            } else {
                                b = mid;
                            }
                        }
                        if accept(&(x + dir * (sign * b))) {
                            return true;
                        }
                        break;
                    }
                    prev_s = s;
                }
            }
        }
        false
    }
}

/// Membership in `U2(rho)` for a one-off query.
pub fn in_u2(obj: &dyn Objective, saddle: &CriticalPoint, x: &Vector, rho: f64, probes: usize) -> bool {
    ZeroSetProbe::new(obj, saddle, probes, 0).contains(obj, x, rho)
}

// ---------------------------------------------------------------------------
// Inclusion U2^H(rho_H) ⊆ U2(rho) near the saddle

#[derive(Clone, Debug, Serialize)]
pub struct RadiusCheck {
    pub radius: f64,
    pub tested: usize,
    pub failures: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct InclusionReport {
    /// Increasing radii.
    pub radii: Vec<RadiusCheck>,
    /// Largest tested radius at and below which every sample passed; zero
    /// if even the smallest radius produced a counterexample.
    pub inclusion_radius: f64,
}

/// Sample members of `U2^H(rho_h)` at radii `max_radius * 2^-k` about the
/// saddle and test each against `U2(rho)`.
#[allow(clippy::too_many_arguments)]
pub fn check_u2h_inclusion(
    obj: &dyn Objective,
    probe: &ZeroSetProbe,
    saddle: &CriticalPoint,
    rho: f64,
    rho_h: f64,
    samples: usize,
    max_radius: f64,
    seed: u64,
) -> Result<InclusionReport> {
    if !(rho_h > 0.0 && rho_h < rho / 4.0) {
        return Err(Error::Precondition(format!("need 0 < rho_H < rho/4, got rho_H = {rho_h}, rho = {rho}")));
    }
    let d = obj.dim();
    let cone = QuadraticCone::new(&obj.hessian(&saddle.location));
    let mut rng = sampling::rng(seed, 0x1c1);
    let mut radii = Vec::new();
    for k in (0..20).rev() {
        let r = max_radius * 0.5f64.powi(k);
        let mut check = RadiusCheck {
            radius: r,
            tested: 0,
            failures: 0,
        };
        if !cone.is_trivial() {
            for _ in 0..samples {
                let u = sampling::unit_sphere(&mut rng, d);
                let z = cone.nearest(&u);
                let zn = z.norm();
                if zn == 0.0 {
                    continue;
                }
                let base = z * (r / zn);
                let s: f64 = rand::Rng::random(&mut rng);
                let offset = sampling::unit_sphere(&mut rng, d) * (rho_h * r * s.powf(1.0 / d as f64) * (1.0 - 1e-9));
                let rel = base + offset;
                if cone.angle_sine(&rel) >= rho_h {
                    continue;
                }
                check.tested += 1;
                if !probe.contains(obj, &(&saddle.location + rel), rho) {
                    check.failures += 1;
                }
            }
        }
        radii.push(check);
    }
    let inclusion_radius = radii
        .iter()
        .take_while(|c| c.failures == 0)
        .last()
        .map_or(0.0, |c| c.radius);
    Ok(InclusionReport {
        radii,
        inclusion_radius,
    })
}

// ---------------------------------------------------------------------------
// Assembled geometry

#[derive(Clone, Debug)]
pub struct GeometryOptions {
    /// Starting radius for the `U1` search.
    pub sigma_radius: f64,
    pub sigma_samples: usize,
    pub probes: usize,
    /// Sphere grid size for the growth constants.
    pub grid: usize,
    pub inclusion_samples: usize,
    pub seed: u64,
}

impl Default for GeometryOptions {
    fn default() -> Self {
        Self {
            sigma_radius: 1.0,
            sigma_samples: 2000,
            probes: 16,
            grid: 100_000,
            inclusion_samples: 100,
            seed: 0,
        }
    }
}

/// Local constants at one strict saddle.
#[derive(Clone, Debug)]
pub struct SaddleGeometry {
    pub saddle: CriticalPoint,
    pub saddle_value: f64,
    pub alpha: f64,
    pub hessian_bound: f64,
    pub sigma: f64,
    pub u1_radius: f64,
    pub rho: f64,
    /// In `(0, rho/4)`; fixed at `rho/8`.
    pub rho_h: f64,
    pub p_plus: f64,
    pub p_minus: f64,
    /// `min(p_plus, -p_minus) / 2`.
    pub p: f64,
    pub inclusion: InclusionReport,
    probe: ZeroSetProbe,
}

#[derive(Clone, Debug, Serialize)]
pub struct GeometrySummary {
    pub sigma: f64,
    pub u1_radius: f64,
    pub rho: f64,
    #[serde(rename = "rho_H")]
    pub rho_h: f64,
    pub p_plus: f64,
    pub p_minus: f64,
    pub p: f64,
    pub inclusion_radius: f64,
}

impl SaddleGeometry {
    pub fn build(obj: &dyn Objective, saddle: &CriticalPoint, alpha: f64, opts: &GeometryOptions) -> Result<Self> {
        if saddle.kind != PointKind::StrictSaddle {
            return Err(Error::Precondition(format!(
                "geometry needs a strict saddle, got {}",
                saddle.kind.as_str()
            )));
        }
        let d = obj.dim();
        let m = obj.hessian_bound();
        let (sigma, u1_radius) = estimate_sigma(obj, saddle, opts.sigma_radius, opts.sigma_samples, opts.seed)?;
        let rho = solve_rho(alpha, sigma, d, m)?;
        let rho_h = rho / 8.0;
        let h = obj.hessian(&saddle.location);
        let (p_plus, p_minus) = growth_constants_on_sphere(&h, rho_h, opts.grid, 1.0, opts.seed)?;
        let probe = ZeroSetProbe::new(obj, saddle, opts.probes, opts.seed);
        let inclusion = check_u2h_inclusion(
            obj,
            &probe,
            saddle,
            rho,
            rho_h,
            opts.inclusion_samples,
            u1_radius,
            opts.seed,
        )?;
        Ok(Self {
            saddle: saddle.clone(),
            saddle_value: obj.value(&saddle.location),
            alpha,
            hessian_bound: m,
            sigma,
            u1_radius,
            rho,
            rho_h,
            p_plus,
            p_minus,
            p: 0.5 * p_plus.min(-p_minus),
            inclusion,
            probe,
        })
    }

    pub fn summary(&self) -> GeometrySummary {
        GeometrySummary {
            sigma: self.sigma,
            u1_radius: self.u1_radius,
            rho: self.rho,
            rho_h: self.rho_h,
            p_plus: self.p_plus,
            p_minus: self.p_minus,
            p: self.p,
            inclusion_radius: self.inclusion.inclusion_radius,
        }
    }

    pub fn probe(&self) -> &ZeroSetProbe {
        &self.probe
    }

    /// `f(x) - f(x*)`.
    pub fn shifted_value(&self, obj: &dyn Objective, x: &Vector) -> f64 {
        obj.value(x) - self.saddle_value
    }

    pub fn in_u1(&self, x: &Vector) -> bool {
        (x - &self.saddle.location).norm() < self.u1_radius
    }

    pub fn in_u2(&self, obj: &dyn Objective, x: &Vector) -> bool {
        self.probe.contains(obj, x, self.rho)
    }

    /// `x ∈ U1 ∩ U2 ∩ {f >= f(x*)}`.
    pub fn in_s(&self, obj: &dyn Objective, x: &Vector) -> bool {
        self.in_u1(x) && self.shifted_value(obj, x) >= 0.0 && self.in_u2(obj, x)
    }
}
