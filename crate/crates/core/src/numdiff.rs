//! Central finite differences, used to cross-check analytic derivatives.

use crate::{Matrix, Vector};

/// Step `cbrt(eps) * (1 + ||x||)`, balancing truncation against rounding.
pub fn step_size(x: &Vector) -> f64 {
    f64::EPSILON.cbrt() * (1.0 + x.norm())
}

pub fn gradient<F: Fn(&Vector) -> f64>(f: F, x: &Vector) -> Vector {
    let h = step_size(x);
    let mut g = Vector::zeros(x.len());
    let mut xp = x.clone();
    for j in 0..x.len() {
        let xj = x[j];
        xp[j] = xj + h;
        let fp = f(&xp);
        xp[j] = xj - h;
        let fm = f(&xp);
        xp[j] = xj;
        g[j] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Jacobian of a vector map; column `j` is the central difference along `e_j`.
pub fn jacobian<F: Fn(&Vector) -> Vector>(f: F, x: &Vector) -> Matrix {
    let h = step_size(x);
    let n = x.len();
    let mut xp = x.clone();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let xj = x[j];
        xp[j] = xj + h;
        let fp = f(&xp);
        xp[j] = xj - h;
        let fm = f(&xp);
        xp[j] = xj;
        cols.push((fp - fm) / (2.0 * h));
    }
    Matrix::from_columns(&cols)
}

/// Hessian as the symmetrized Jacobian of an analytic gradient.
pub fn hessian_from_gradient<G: Fn(&Vector) -> Vector>(grad: G, x: &Vector) -> Matrix {
    let j = jacobian(grad, x);
    (&j + j.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_of_cubic() {
        let f = |x: &Vector| x[0].powi(3) + 2.0 * x[0] * x[1];
        let x = Vector::from_vec(vec![0.7, -1.3]);
        let g = gradient(f, &x);
        assert!((g[0] - (3.0 * 0.49 + 2.0 * -1.3)).abs() < 1e-8);
        assert!((g[1] - 1.4).abs() < 1e-8);
    }

    #[test]
    fn jacobian_of_linear_map_is_exact_enough() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, -3.0, 0.5]);
        let j = jacobian(|x: &Vector| &a * x, &Vector::from_vec(vec![0.2, 0.4]));
        assert!((j - &a).amax() < 1e-9);
    }
}
