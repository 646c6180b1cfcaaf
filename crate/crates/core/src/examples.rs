//! The two benchmark problems: a scalar delay system with known imaginary eigenvalues and
//! a heated rod with delayed feedback.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::problem::{build_hinf_problem, DelayHamiltonianProblem};

/// `2x2` problem with one delay `τ = 1` and eigenvalues `±jπ/2`, `±jπ`.
pub fn make_example1() -> DelayHamiltonianProblem {
    let a1 = (3.0 * PI * PI / 4.0) / (20.0 + PI);
    let c0 = -1000.0 - 10.0 * a1 * a1 - 10.0 * a1 * PI - 5.0 * PI * PI / 2.0;
    let h0 = DMatrix::from_row_slice(2, 2, &[10.0, 0.1, c0, -10.0]);
    let hneg = DMatrix::from_row_slice(2, 2, &[a1, 0.0, 0.0, 0.0]);
    let hpos = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -a1]);
    DelayHamiltonianProblem::new(h0, vec![hneg], vec![hpos], vec![1.0]).expect("example 1 is well formed")
}

/// Central-difference discretization of
/// `v_t = v_xx - 2 sin(x) v + 2 sin(x) v(π - x, t - 1)` on `[0, π]` with Dirichlet ends,
/// observed and actuated through the mean value.
#[derive(Clone, Debug)]
pub struct RodSystem {
    pub a0: DMatrix<f64>,
    pub a1: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub delay: f64,
}

impl RodSystem {
    /// The Hamiltonian problem whose imaginary eigenvalues mark where the transfer
    /// function's singular value crosses `gamma`.
    pub fn hinf_problem(&self, gamma: f64) -> Result<DelayHamiltonianProblem> {
        build_hinf_problem(
            &[self.a0.clone(), self.a1.clone()],
            &self.b,
            &self.c,
            gamma,
            &[self.delay],
        )
    }
}

/// Rod model on `n` interior grid points `x_i = i h`, `h = π/(n+1)`.
pub fn make_example2(n: usize) -> Result<RodSystem> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "rod grid needs at least 2 points, got {n}"
        )));
    }
    let h = PI / (n + 1) as f64;
    let x: Vec<f64> = (1..=n).map(|i| i as f64 * h).collect();
    let inv_h2 = 1.0 / (h * h);

    let mut a0 = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        a0[(i, i)] = -2.0 * inv_h2 - 2.0 * x[i].sin();
        if i > 0 {
            a0[(i, i - 1)] = inv_h2;
        }
        if i + 1 < n {
            a0[(i, i + 1)] = inv_h2;
        }
    }
    // x_i ↦ π - x_i is the index reversal on the symmetric grid
    let mut a1 = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        a1[(i, n - 1 - i)] = 2.0 * x[i].sin();
    }
    let c = DMatrix::from_element(1, n, 1.0 / n as f64);
    let b = c.transpose();
    Ok(RodSystem {
        a0,
        a1,
        b,
        c,
        delay: 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;
    use nalgebra::DVector;

    fn reversal(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| if i + j == n - 1 { 1.0 } else { 0.0 })
    }

    #[test]
    fn reversal_is_an_involution() {
        let p = reversal(7);
        assert_eq!(&p * &p, DMatrix::identity(7, 7));
        let rod = make_example2(7).unwrap();
        let s = DMatrix::from_diagonal(&rod.a1.column_sum());
        assert_eq!(&s * p, rod.a1);
    }

    #[test]
    fn rod_rejects_tiny_grid() {
        assert!(make_example2(1).is_err());
    }

    #[test]
    fn rod_problem_is_hamiltonian() {
        let rod = make_example2(12).unwrap();
        let p = rod.hinf_problem(0.5).unwrap();
        assert_eq!(p.dim(), 24);
        assert!(p.validate_structure(0.0).passed);
    }

    // |C (jωI - A0 - A1 e^{-jω})^{-1} B| by a dense complex solve
    fn gain(rod: &RodSystem, omega: f64) -> f64 {
        let n = rod.a0.nrows();
        let s = C64::new(0.0, omega);
        let e = (-s).exp();
        let m = DMatrix::<C64>::from_fn(n, n, |i, j| {
            let id = if i == j { s } else { C64::new(0.0, 0.0) };
            id - rod.a0[(i, j)] - e * rod.a1[(i, j)]
        });
        let b = DVector::from_fn(n, |i, _| C64::new(rod.b[(i, 0)], 0.0));
        let x = m.lu().solve(&b).unwrap();
        x.iter().zip(rod.c.iter()).map(|(xi, ci)| xi * *ci).sum::<C64>().norm()
    }

    #[test]
    fn rod_gain_crosses_level_at_reported_frequencies() {
        let rod = make_example2(1000).unwrap();
        for w in [2.009437, 3.790888, 5.571120] {
            let g = gain(&rod, w);
            assert!((g - 0.00018).abs() < 1e-8, "gain {g} at {w}");
        }
    }

    #[test]
    fn level_crossing_gives_singular_char_matrix() {
        // on a coarse grid, locate a crossing of the gain and check M(jω) is singular there
        let rod = make_example2(40).unwrap();
        let (mut lo, mut hi) = (3.0, 4.5);
        let gamma = gain(&rod, 3.79);
        let f = |w: f64| gain(&rod, w) - gamma;
        let (flo, _) = (f(lo), f(hi));
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if (f(mid) > 0.0) == (flo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let w = 0.5 * (lo + hi);
        let p = rod.hinf_problem(gamma).unwrap();
        let sv = p.eval_char_matrix(C64::new(0.0, w)).singular_values();
        let smax = sv.max();
        let smin = sv.min();
        assert!(smin / smax < 1e-9, "relative smallest singular value {}", smin / smax);
    }
}
