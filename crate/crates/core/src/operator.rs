//! Inverse of `R_σ = (H - σI)(H + σI)` on Chebyshev expansions.
//!
//! `H` is differentiation on functions over `[-τ_K, τ_K]` with the boundary condition
//! `φ'(0) = L(φ)`, where `L(φ) = H0 φ(0) + Σ_k (Hneg[k] φ(-τ_k) + Hpos[k] φ(τ_k))`.
//! Applying `R_σ⁻¹` to `f` gives the `φ` with `φ'' - σ²φ = f`, `φ'(0) = L(φ)` and
//! `φ''(0) = L(φ')`.
//!
//! For `σ = 0` this is a closed-form coefficient map. Otherwise it is done in five
//! steps, alternating exponential reweighting by interpolation with the resolvent step
//! for `(H ∓ σ)⁻¹`, which in the weighted variable is a plain antiderivative plus one
//! linear solve for the constant term.

use nalgebra::{DMatrix, DVector};

use crate::chebyshev::{interpolate_weighted, ChebFunction, InterpOptions};
use crate::error::{Error, Result};
use crate::linalg::{real_mul_complex, Factorization, C64};
use crate::problem::{DelayHamiltonianProblem, Shift, ShiftKind};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PipelineOptions {
    pub interp: InterpOptions,
    /// Largest admissible relative imaginary part of the final expansion.
    pub realness_tol: f64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            interp: InterpOptions::default(),
            realness_tol: 1e-10,
        }
    }
}

/// Which factorization a resolvent step uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

pub struct ShiftedOperator<'a> {
    problem: &'a DelayHamiltonianProblem,
    shift: Shift,
    plus: Factorization,
    // only stored for real shifts; imaginary shifts solve the conjugate system instead
    minus: Option<Factorization>,
    opts: PipelineOptions,
}

impl<'a> ShiftedOperator<'a> {
    /// Factorizes `M(σ)` (and `M(-σ)` for real `σ`). Fails if `σ` is numerically an
    /// eigenvalue.
    pub fn new(problem: &'a DelayHamiltonianProblem, shift: Shift, opts: PipelineOptions) -> Result<Self> {
        let label = shift.to_string();
        let (plus, minus) = match shift.kind() {
            ShiftKind::Zero => (Factorization::real(problem.eval_char_matrix_real(0.0), &label)?, None),
            ShiftKind::Real => {
                let s = shift.value();
                let plus = Factorization::real(problem.eval_char_matrix_real(s), &label)?;
                let minus = Factorization::real(problem.eval_char_matrix_real(-s), &format!("r:{}", -s))?;
                (plus, Some(minus))
            }
            ShiftKind::Imaginary => (
                Factorization::complex(problem.eval_char_matrix(shift.sigma()), &label)?,
                None,
            ),
        };
        Ok(ShiftedOperator {
            problem,
            shift,
            plus,
            minus,
            opts,
        })
    }

    pub fn shift(&self) -> Shift {
        self.shift
    }

    pub fn problem(&self) -> &DelayHamiltonianProblem {
        self.problem
    }

    pub fn options(&self) -> &PipelineOptions {
        &self.opts
    }

    fn tau(&self) -> f64 {
        self.problem.half_width()
    }

    fn check_input<T: crate::linalg::Scalar>(&self, f: &ChebFunction<T>) -> Result<()> {
        if f.rows() != self.problem.dim() {
            return Err(Error::DimensionMismatch(format!(
                "function with {} rows for a problem of size {}",
                f.rows(),
                self.problem.dim()
            )));
        }
        if (f.half_width() - self.tau()).abs() > 1e-14 * self.tau() {
            return Err(Error::DomainMismatch(f.half_width(), self.tau()));
        }
        Ok(())
    }

    /// `R_σ⁻¹ f` for any supported shift.
    pub fn apply_rinv(&self, f: &ChebFunction<f64>) -> Result<ChebFunction<f64>> {
        if self.shift.is_zero() {
            self.apply_rinv_zero(f)
        } else {
            self.apply_rinv_nonzero(f)
        }
    }

    /// `R_0⁻¹ f`; the degree grows by exactly two.
    pub fn apply_rinv_zero(&self, f: &ChebFunction<f64>) -> Result<ChebFunction<f64>> {
        if !self.shift.is_zero() {
            return Err(Error::InvalidArgument(format!(
                "closed-form inverse needs a zero shift, operator has {}",
                self.shift
            )));
        }
        self.check_input(f)?;
        let tau = self.tau();
        let p = self.problem;
        let once = antiderivative_band(f.coeffs(), tau);
        let mut v = antiderivative_band(&once, tau);
        v.column_mut(0).fill(0.0);
        v.column_mut(1).fill(0.0);

        let r = ChebFunction::from_parts(v, tau);
        let dr = r.derivative();
        let rhs = boundary_map_real(p, &dr) - f.eval(0.0);
        let v1 = self.plus.solve_real(&rhs) * tau;

        let mut v = r.into_coeffs();
        v.set_column(1, &v1);
        let r1 = ChebFunction::from_parts(v, tau);
        let dphi0 = &v1 / tau + dr.eval(0.0);
        let v0 = self.plus.solve_real(&(boundary_map_real(p, &r1) - dphi0));

        let mut v = r1.into_coeffs();
        v.set_column(0, &v0);
        Ok(ChebFunction::from_parts(v, tau))
    }

    /// One resolvent step with `s = ±σ`: returns `ξ` with `ξ' = a` whose constant term
    /// makes `θ ↦ ξ(θ) e^{sθ}` satisfy the boundary condition of `H`, i.e. that function
    /// equals `(H - s)⁻¹ (a e^{s·})`.
    pub fn resolvent_step(&self, sign: Sign, a: &ChebFunction<C64>) -> Result<ChebFunction<C64>> {
        self.check_input(a)?;
        let tau = self.tau();
        let s = match sign {
            Sign::Plus => self.shift.sigma(),
            Sign::Minus => -self.shift.sigma(),
        };
        let mut b = antiderivative_band(a.coeffs(), tau);
        b.column_mut(0).fill(C64::new(0.0, 0.0));
        let rest = ChebFunction::from_parts(b, tau);
        let rhs = boundary_map_complex(self.problem, &rest, s) - rest.eval(0.0) * s - a.eval(0.0);
        let b0 = match (sign, self.shift.kind()) {
            (Sign::Plus, _) | (Sign::Minus, ShiftKind::Zero) => self.plus.solve(&rhs),
            (Sign::Minus, ShiftKind::Real) => self.minus.as_ref().expect("real shift stores M(-σ)").solve(&rhs),
            // M(-jω) = conj(M(jω))
            (Sign::Minus, ShiftKind::Imaginary) => self.plus.solve_conjugate(&rhs),
        };
        let mut b = rest.into_coeffs();
        b.set_column(0, &b0);
        Ok(ChebFunction::from_parts(b, tau))
    }

    /// `R_σ⁻¹ f` for `σ ≠ 0` through the interpolation pipeline.
    pub fn apply_rinv_nonzero(&self, f: &ChebFunction<f64>) -> Result<ChebFunction<f64>> {
        if self.shift.is_zero() {
            return Err(Error::InvalidArgument(
                "interpolation pipeline needs a nonzero shift".into(),
            ));
        }
        self.check_input(f)?;
        let sigma = self.shift.sigma();
        let io = &self.opts.interp;
        let chi = interpolate_weighted(&f.to_complex(), -sigma, io, "I")?;
        let xi = self.resolvent_step(Sign::Plus, &chi)?;
        let zeta = interpolate_weighted(&xi, sigma * 2.0, io, "III")?;
        let upsilon = self.resolvent_step(Sign::Minus, &zeta)?;
        let phi = interpolate_weighted(&upsilon, -sigma, io, "V")?;
        // rounding in the pipeline scales with its largest intermediate, so the
        // imaginary residue is measured against that
        let scale = [&chi, &xi, &zeta, &upsilon, &phi]
            .iter()
            .map(|g| g.max_abs())
            .fold(0.0, f64::max);
        let ratio = if scale > 0.0 {
            phi.imag_ratio() * phi.max_abs() / scale
        } else {
            0.0
        };
        if ratio > self.opts.realness_tol {
            return Err(Error::RealnessViolated {
                ratio,
                tol: self.opts.realness_tol,
            });
        }
        Ok(phi.real_part())
    }

    /// `(H - σ)⁻¹ f`, the unstructured shift-invert operator.
    pub fn apply_baseline(&self, f: &ChebFunction<C64>) -> Result<ChebFunction<C64>> {
        if self.shift.is_zero() {
            return self.resolvent_step(Sign::Plus, f);
        }
        let sigma = self.shift.sigma();
        let io = &self.opts.interp;
        let chi = interpolate_weighted(f, -sigma, io, "I")?;
        let xi = self.resolvent_step(Sign::Plus, &chi)?;
        interpolate_weighted(&xi, sigma, io, "II")
    }
}

/// Chebyshev antiderivative scaled to `[-τ, τ]`, constant term left zero. The output has
/// one more column than the input.
pub fn antiderivative_band<T: crate::linalg::Scalar>(a: &DMatrix<T>, tau: f64) -> DMatrix<T> {
    let rows = a.nrows();
    let n = a.ncols() - 1;
    let mut b = DMatrix::<T>::zeros(rows, n + 2);
    let at = |i: usize, j: usize| if j <= n { a[(i, j)] } else { T::zero() };
    for j in 1..=n + 1 {
        let inv = T::from_real(1.0 / (2.0 * j as f64));
        let t = T::from_real(tau);
        for i in 0..rows {
            let lower = if j == 1 { at(i, 0) } else { at(i, j - 1) * inv };
            let upper = at(i, j + 1) * inv;
            b[(i, j)] = (lower - upper) * t;
        }
    }
    b
}

/// `H0 ψ(0) + Σ_k (Hneg[k] ψ(-τ_k) + Hpos[k] ψ(τ_k))`.
pub fn boundary_map_real(p: &DelayHamiltonianProblem, psi: &ChebFunction<f64>) -> DVector<f64> {
    let mut out = p.h0() * psi.eval(0.0);
    for (k, &tau) in p.delays().iter().enumerate() {
        out += &p.hneg()[k] * psi.eval(-tau);
        out += &p.hpos()[k] * psi.eval(tau);
    }
    out
}

/// `H0 ψ(0) + Σ_k (Hneg[k] e^{-sτ_k} ψ(-τ_k) + Hpos[k] e^{sτ_k} ψ(τ_k))`.
pub fn boundary_map_complex(p: &DelayHamiltonianProblem, psi: &ChebFunction<C64>, s: C64) -> DVector<C64> {
    let mut out = real_mul_complex(p.h0(), &psi.eval(0.0));
    for (k, &tau) in p.delays().iter().enumerate() {
        out += real_mul_complex(&p.hneg()[k], &psi.eval(-tau)) * (-s * tau).exp();
        out += real_mul_complex(&p.hpos()[k], &psi.eval(tau)) * (s * tau).exp();
    }
    out
}

/// Residuals of the two boundary conditions of `R_σ`'s domain, `φ'(0) - L(φ)` and
/// `φ''(0) - L(φ')`, in the max norm.
pub fn boundary_residuals(p: &DelayHamiltonianProblem, phi: &ChebFunction<f64>) -> (f64, f64) {
    let d1 = phi.derivative();
    let d2 = d1.derivative();
    let r1 = (d1.eval(0.0) - boundary_map_real(p, phi)).amax();
    let r2 = (d2.eval(0.0) - boundary_map_real(p, &d1)).amax();
    (r1, r2)
}

/// Max-norm coefficient residual of `φ'' - σ² φ - f`.
pub fn ode_residual(phi: &ChebFunction<f64>, f: &ChebFunction<f64>, sigma_squared: f64) -> f64 {
    let d2 = phi.derivative().derivative();
    let lhs = d2.axpy(-sigma_squared, phi).expect("same domain");
    lhs.axpy(-1.0, f).expect("same domain").max_abs()
}
