//! Hamiltonian delay eigenvalue problems.
//!
//! The characteristic matrix is
//!
//! ```text
//! M(λ) = λ I - H0 - Σ_k ( Hneg[k] e^{-λ τ_k} + Hpos[k] e^{λ τ_k} )
//! ```
//!
//! with `J·H0` symmetric and `(J·Hneg[k])ᵀ = J·Hpos[k]`. Under these conditions the
//! spectrum is symmetric with respect to both the real and the imaginary axis.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{real_mul_complex, C64};

/// Default relative tolerance for the Hamiltonian structure checks.
pub const DEFAULT_STRUCTURE_TOL: f64 = 1e-12;

/// The symplectic matrix `[[0, I_n], [-I_n, 0]]`, applied as a signed block swap.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StructuredJ {
    pub n: usize,
}

impl StructuredJ {
    pub fn new(n: usize) -> Self {
        StructuredJ { n }
    }

    /// `J · x` for a matrix with `2n` rows.
    pub fn apply<T: nalgebra::Scalar + std::ops::Neg<Output = T> + Copy>(&self, x: &DMatrix<T>) -> DMatrix<T> {
        let n = self.n;
        assert_eq!(x.nrows(), 2 * n, "J applied to a matrix with wrong row count");
        DMatrix::from_fn(
            2 * n,
            x.ncols(),
            |i, j| {
                if i < n {
                    x[(i + n, j)]
                } else {
                    -x[(i - n, j)]
                }
            },
        )
    }

    pub fn apply_vec<T: nalgebra::Scalar + std::ops::Neg<Output = T> + Copy>(&self, x: &DVector<T>) -> DVector<T> {
        let n = self.n;
        assert_eq!(x.len(), 2 * n, "J applied to a vector with wrong length");
        DVector::from_fn(2 * n, |i, _| if i < n { x[i + n] } else { -x[i - n] })
    }

    /// `J · a` for a real `2n x 2n` matrix.
    pub fn left_mul(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        self.apply(a)
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(2 * n, 2 * n, |i, j| {
            if i < n && j == i + n {
                1.0
            } else if i >= n && j + n == i {
                -1.0
            } else {
                0.0
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShiftKind {
    Zero,
    Real,
    Imaginary,
}

/// A shift on one of the axes: `σ = 0`, `σ = s` or `σ = jω`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Shift {
    kind: ShiftKind,
    value: f64,
}

impl Shift {
    pub fn zero() -> Self {
        Shift {
            kind: ShiftKind::Zero,
            value: 0.0,
        }
    }

    pub fn real(s: f64) -> Self {
        if s == 0.0 {
            Self::zero()
        } else {
            Shift {
                kind: ShiftKind::Real,
                value: s,
            }
        }
    }

    pub fn imaginary(omega: f64) -> Self {
        if omega == 0.0 {
            Self::zero()
        } else {
            Shift {
                kind: ShiftKind::Imaginary,
                value: omega,
            }
        }
    }

    pub fn kind(&self) -> ShiftKind {
        self.kind
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn is_zero(&self) -> bool {
        self.kind == ShiftKind::Zero
    }

    pub fn sigma(&self) -> C64 {
        match self.kind {
            ShiftKind::Zero => C64::new(0.0, 0.0),
            ShiftKind::Real => C64::new(self.value, 0.0),
            ShiftKind::Imaginary => C64::new(0.0, self.value),
        }
    }

    /// `σ²`, which is real for every supported shift.
    pub fn sigma_squared(&self) -> f64 {
        match self.kind {
            ShiftKind::Zero => 0.0,
            ShiftKind::Real => self.value * self.value,
            ShiftKind::Imaginary => -self.value * self.value,
        }
    }
}

impl fmt::Display for Shift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ShiftKind::Zero => write!(f, "0"),
            ShiftKind::Real => write!(f, "r:{}", self.value),
            ShiftKind::Imaginary => write!(f, "i:{}", self.value),
        }
    }
}

impl FromStr for Shift {
    type Err = Error;

    /// Accepts `0`, `r:<x>` and `i:<x>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidArgument(format!("cannot parse shift '{s}', expected 0, r:<x> or i:<x>"));
        if let Some(rest) = s.strip_prefix("r:") {
            rest.trim().parse::<f64>().map(Shift::real).map_err(|_| bad())
        } else if let Some(rest) = s.strip_prefix("i:") {
            rest.trim().parse::<f64>().map(Shift::imaginary).map_err(|_| bad())
        } else {
            match s.parse::<f64>() {
                Ok(0.0) => Ok(Shift::zero()),
                _ => Err(bad()),
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct DelayHamiltonianProblem {
    n: usize,
    delays: Vec<f64>,
    h0: DMatrix<f64>,
    hneg: Vec<DMatrix<f64>>,
    hpos: Vec<DMatrix<f64>>,
}

impl DelayHamiltonianProblem {
    /// Checks dimensions and delays. The Hamiltonian structure itself is checked
    /// separately by [`validate_structure`](Self::validate_structure).
    pub fn new(h0: DMatrix<f64>, hneg: Vec<DMatrix<f64>>, hpos: Vec<DMatrix<f64>>, delays: Vec<f64>) -> Result<Self> {
        let size = h0.nrows();
        if h0.ncols() != size {
            return Err(Error::DimensionMismatch(format!(
                "H0 is {}x{}, expected square",
                h0.nrows(),
                h0.ncols()
            )));
        }
        if size == 0 {
            return Err(Error::DimensionMismatch("H0 is empty".into()));
        }
        if !size.is_multiple_of(2) {
            return Err(Error::OddDimension(size));
        }
        if hneg.len() != delays.len() || hpos.len() != delays.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} delays but {} negative-delay and {} positive-delay matrices",
                delays.len(),
                hneg.len(),
                hpos.len()
            )));
        }
        for (k, (a, b)) in hneg.iter().zip(&hpos).enumerate() {
            for (name, m) in [("Hneg", a), ("Hpos", b)] {
                if m.nrows() != size || m.ncols() != size {
                    return Err(Error::DimensionMismatch(format!(
                        "{name}[{}] is {}x{}, expected {size}x{size}",
                        k + 1,
                        m.nrows(),
                        m.ncols()
                    )));
                }
            }
        }
        if let Some(bad) = delays.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(Error::InvalidDelays(format!(
                "delay {bad} is not a positive finite number"
            )));
        }
        if delays.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidDelays(format!(
                "delays {delays:?} are not strictly increasing"
            )));
        }
        if h0
            .iter()
            .chain(hneg.iter().flatten())
            .chain(hpos.iter().flatten())
            .any(|x| !x.is_finite())
        {
            return Err(Error::InvalidArgument("matrix entries must be finite".into()));
        }
        Ok(DelayHamiltonianProblem {
            n: size / 2,
            delays,
            h0,
            hneg,
            hpos,
        })
    }

    /// Half dimension; matrices are `2n x 2n`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn num_delays(&self) -> usize {
        self.delays.len()
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    pub fn h0(&self) -> &DMatrix<f64> {
        &self.h0
    }

    pub fn hneg(&self) -> &[DMatrix<f64>] {
        &self.hneg
    }

    pub fn hpos(&self) -> &[DMatrix<f64>] {
        &self.hpos
    }

    pub fn j(&self) -> StructuredJ {
        StructuredJ::new(self.n)
    }

    /// Half width `τ_K` of the function domain `[-τ_K, τ_K]`; `1` for delay-free problems.
    pub fn half_width(&self) -> f64 {
        self.delays.last().copied().unwrap_or(1.0)
    }

    pub fn validate_structure(&self, tol: f64) -> ValidationReport {
        let j = self.j();
        let mut checks = Vec::with_capacity(1 + self.delays.len());

        let jh0 = j.left_mul(&self.h0);
        let dev = relative_deviation(&jh0.transpose(), &jh0, jh0.norm());
        checks.push(ConditionCheck {
            name: "(J H0)^T = J H0".into(),
            deviation: dev,
            passed: dev <= tol,
        });

        for k in 0..self.delays.len() {
            let jneg = j.left_mul(&self.hneg[k]);
            let jpos = j.left_mul(&self.hpos[k]);
            let scale = jneg.norm().max(jpos.norm());
            let dev = relative_deviation(&jneg.transpose(), &jpos, scale);
            checks.push(ConditionCheck {
                name: format!("(J Hneg[{0}])^T = J Hpos[{0}]", k + 1),
                deviation: dev,
                passed: dev <= tol,
            });
        }

        ValidationReport {
            passed: checks.iter().all(|c| c.passed),
            tol,
            checks,
        }
    }

    /// `M(λ)`. Exponentials overflow once `|Re λ|·τ_K` exceeds roughly 709.
    pub fn eval_char_matrix(&self, lambda: C64) -> DMatrix<C64> {
        let size = self.dim();
        let mut m = DMatrix::<C64>::from_fn(size, size, |i, j| {
            let id = if i == j { lambda } else { C64::new(0.0, 0.0) };
            id - self.h0[(i, j)]
        });
        for (k, &tau) in self.delays.iter().enumerate() {
            let eneg = (-lambda * tau).exp();
            let epos = (lambda * tau).exp();
            let (hn, hp) = (&self.hneg[k], &self.hpos[k]);
            for j in 0..size {
                for i in 0..size {
                    m[(i, j)] -= eneg * hn[(i, j)] + epos * hp[(i, j)];
                }
            }
        }
        m
    }

    /// `M(λ)` for real `λ`.
    pub fn eval_char_matrix_real(&self, lambda: f64) -> DMatrix<f64> {
        let size = self.dim();
        let mut m = DMatrix::<f64>::identity(size, size) * lambda - &self.h0;
        for (k, &tau) in self.delays.iter().enumerate() {
            m -= &self.hneg[k] * (-lambda * tau).exp();
            m -= &self.hpos[k] * (lambda * tau).exp();
        }
        m
    }

    /// `M(λ) v` without forming `M(λ)`.
    pub fn apply_char_matrix(&self, lambda: C64, v: &DVector<C64>) -> DVector<C64> {
        let mut out = v * lambda - real_mul_complex(&self.h0, v);
        for (k, &tau) in self.delays.iter().enumerate() {
            out -= real_mul_complex(&self.hneg[k], v) * (-lambda * tau).exp();
            out -= real_mul_complex(&self.hpos[k], v) * (lambda * tau).exp();
        }
        out
    }

    /// Normalized residual
    /// `‖M(λ)v‖ / (‖v‖ (|λ| + ‖H0‖_F + Σ_k (‖Hpos_k‖_F e^{Re λ τ_k} + ‖Hneg_k‖_F e^{-Re λ τ_k})))`.
    pub fn nlevp_residual(&self, lambda: C64, v: &DVector<C64>) -> Result<f64> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} for a problem of size {}",
                v.len(),
                self.dim()
            )));
        }
        let vnorm = v.norm();
        if vnorm == 0.0 {
            return Err(Error::ZeroVector);
        }
        let r = self.apply_char_matrix(lambda, v).norm();
        let mut scale = lambda.norm() + self.h0.norm();
        for (k, &tau) in self.delays.iter().enumerate() {
            scale += self.hpos[k].norm() * (lambda.re * tau).exp();
            scale += self.hneg[k].norm() * (-lambda.re * tau).exp();
        }
        Ok(r / (vnorm * scale))
    }
}

fn relative_deviation(a: &DMatrix<f64>, b: &DMatrix<f64>, scale: f64) -> f64 {
    let diff = (a - b).norm();
    if diff == 0.0 {
        0.0
    } else if scale == 0.0 {
        f64::INFINITY
    } else {
        diff / scale
    }
}

#[derive(Clone, Debug)]
pub struct ConditionCheck {
    pub name: String,
    /// Frobenius-normalized deviation.
    pub deviation: f64,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub passed: bool,
    pub tol: f64,
    pub checks: Vec<ConditionCheck>,
}

impl ValidationReport {
    pub fn violations(&self) -> impl Iterator<Item = &ConditionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "structure check: {} (relative tolerance {:.1e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.tol
        )?;
        for c in &self.checks {
            writeln!(
                f,
                "  [{}] {:<28} max relative deviation {:.3e}",
                if c.passed { "ok" } else { "VIOLATED" },
                c.name,
                c.deviation
            )?;
        }
        Ok(())
    }
}

/// Builds the Hamiltonian delay problem whose purely imaginary eigenvalues `jω` are the
/// frequencies at which `C (jωI - A0 - Σ A_k e^{-jωτ_k})^{-1} B` has singular value `γ`.
///
/// `a[0]` is the delay-free state matrix, `a[k]` multiplies `x(t - τ_k)`.
pub fn build_hinf_problem(
    a: &[DMatrix<f64>],
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    gamma: f64,
    delays: &[f64],
) -> Result<DelayHamiltonianProblem> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    let Some(a0) = a.first() else {
        return Err(Error::DimensionMismatch("no state matrices given".into()));
    };
    let n = a0.nrows();
    if a.len() != delays.len() + 1 {
        return Err(Error::DimensionMismatch(format!(
            "{} state matrices for {} delays",
            a.len(),
            delays.len()
        )));
    }
    for (k, ak) in a.iter().enumerate() {
        if ak.nrows() != n || ak.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "A{k} is {}x{}, expected {n}x{n}",
                ak.nrows(),
                ak.ncols()
            )));
        }
    }
    if b.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "B has {} rows, expected {n}",
            b.nrows()
        )));
    }
    if c.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "C has {} columns, expected {n}",
            c.ncols()
        )));
    }

    let bbt = b * b.transpose() / gamma;
    let ctc = c.transpose() * c / gamma;
    let mut h0 = DMatrix::<f64>::zeros(2 * n, 2 * n);
    h0.view_mut((0, 0), (n, n)).copy_from(a0);
    h0.view_mut((0, n), (n, n)).copy_from(&bbt);
    h0.view_mut((n, 0), (n, n)).copy_from(&(-ctc));
    h0.view_mut((n, n), (n, n)).copy_from(&(-a0.transpose()));

    let mut hneg = Vec::with_capacity(delays.len());
    let mut hpos = Vec::with_capacity(delays.len());
    for ak in &a[1..] {
        let mut neg = DMatrix::<f64>::zeros(2 * n, 2 * n);
        neg.view_mut((0, 0), (n, n)).copy_from(ak);
        let mut pos = DMatrix::<f64>::zeros(2 * n, 2 * n);
        pos.view_mut((n, n), (n, n)).copy_from(&(-ak.transpose()));
        hneg.push(neg);
        hpos.push(pos);
    }
    DelayHamiltonianProblem::new(h0, hneg, hpos, delays.to_vec())
}
