//! Randomized coordinate gradient descent (RCGD) studied as a two-sided
//! random dynamical system.
//!
//! The crate is organized bottom-up:
//!
//! * [`objective`]: smooth test functions with registered critical points
//!   and Hessian bounds.
//! * [`stream`] and [`dynamics`]: counter-based coordinate streams, the
//!   forward step map, its global inverse, and recorded trajectories.
//! * [`lyapunov`]: the linearization `I - alpha e_i e_i^T H` at a critical
//!   point and a QR estimator of its Lyapunov spectrum.
//! * [`geometry`]: local constants near a strict saddle (the gradient
//!   lower bound, the `rho` margin, the sets `U2` and `S`, quadratic growth).
//! * [`experiments`]: the Monte-Carlo harness that classifies limits over
//!   random starting points and streams.
//!
//! ```
//! use rcgd::prelude::*;
//!
//! let obj = Quadratic::diagonal(&[1.0, -1.0]);
//! let alpha = StepSize::new(0.1, &obj).unwrap();
//! let x = rcgd::dynamics::step(&obj, alpha, &Vector::from_vec(vec![1.0, 1.0]), 1).unwrap();
//! assert_eq!(x.as_slice(), &[1.0, 1.1]);
//! ```

// `!(a < b)` is used on purpose so that NaN fails the test.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod config;
pub mod dynamics;
mod error;
pub mod experiments;
pub mod geometry;
pub mod lyapunov;
pub mod numdiff;
pub mod objective;
pub mod sampling;
pub mod stream;

pub use error::{Error, Result};

pub type Vector = nalgebra::DVector<f64>;
pub type Matrix = nalgebra::DMatrix<f64>;

pub mod prelude {
    pub use crate::dynamics::{run, step, StepSize, StopRule, Termination, Trajectory};
    pub use crate::geometry::SaddleGeometry;
    pub use crate::lyapunov::{LinearizedSystem, LyapunovSpectrum};
    pub use crate::objective::{
        builtin_objective, CoupledSaddle, CriticalPoint, PointKind, Objective, Params, Quadratic,
        RosenbrockLike, SeparableQuartic,
    };
    pub use crate::stream::CoordinateStream;
    pub use crate::{Matrix, Vector};
}
