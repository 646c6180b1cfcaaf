//! Vector-valued Chebyshev expansions on `[-τ, τ]`.
//!
//! A [`ChebFunction`] stores `φ(θ) = Σ_l c_l T_l(θ/τ)` as a matrix whose column `l` is the
//! coefficient vector `c_l`. Conversions between values at the extreme points
//! `θ_l = τ cos(lπ/N)` and coefficients go through a DCT-I computed with an FFT of the
//! even extension.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::linalg::{Scalar, C64};

/// Adaptive interpolation settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterpOptions {
    /// Tail coefficients below this fraction of the largest coefficient are dropped.
    pub chop_tol: f64,
    pub max_degree: usize,
}

impl Default for InterpOptions {
    fn default() -> Self {
        InterpOptions {
            chop_tol: 1e-13,
            max_degree: 4096,
        }
    }
}

const FIRST_DEGREE: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct ChebFunction<T: Scalar> {
    half_width: f64,
    coeffs: DMatrix<T>,
}

fn check_half_width(half_width: f64) -> Result<()> {
    if half_width > 0.0 && half_width.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "half width must be positive, got {half_width}"
        )))
    }
}

fn same_domain(a: f64, b: f64) -> Result<()> {
    if (a - b).abs() <= 1e-14 * a.abs().max(b.abs()) {
        Ok(())
    } else {
        Err(Error::DomainMismatch(a, b))
    }
}

impl<T: Scalar> ChebFunction<T> {
    pub fn new(coeffs: DMatrix<T>, half_width: f64) -> Result<Self> {
        check_half_width(half_width)?;
        if coeffs.ncols() == 0 || coeffs.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "coefficient matrix is {}x{}",
                coeffs.nrows(),
                coeffs.ncols()
            )));
        }
        Ok(ChebFunction { half_width, coeffs })
    }

    pub(crate) fn from_parts(coeffs: DMatrix<T>, half_width: f64) -> Self {
        debug_assert!(coeffs.ncols() > 0);
        ChebFunction { half_width, coeffs }
    }

    pub fn zeros(rows: usize, degree: usize, half_width: f64) -> Self {
        ChebFunction::from_parts(DMatrix::zeros(rows, degree + 1), half_width)
    }

    pub fn constant(v: &DVector<T>, half_width: f64) -> Self {
        ChebFunction::from_parts(DMatrix::from_column_slice(v.len(), 1, v.as_slice()), half_width)
    }

    pub fn rows(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.ncols() - 1
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn coeffs(&self) -> &DMatrix<T> {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> DMatrix<T> {
        self.coeffs
    }

    /// Coefficients stacked column by column, length `rows * (degree + 1)`.
    pub fn stacked(&self) -> &[T] {
        self.coeffs.as_slice()
    }

    /// Value at real `θ` by Clenshaw's recurrence.
    pub fn eval(&self, theta: f64) -> DVector<T> {
        let t = theta / self.half_width;
        let rows = self.rows();
        let n = self.degree();
        let two_t = T::from_real(2.0 * t);
        let mut b1 = vec![T::zero(); rows];
        let mut b2 = vec![T::zero(); rows];
        for k in (1..=n).rev() {
            let c = self.coeffs.column(k);
            for i in 0..rows {
                let b0 = c[i] + two_t * b1[i] - b2[i];
                b2[i] = b1[i];
                b1[i] = b0;
            }
        }
        let c0 = self.coeffs.column(0);
        let tt = T::from_real(t);
        DVector::from_fn(rows, |i, _| c0[i] + tt * b1[i] - b2[i])
    }

    /// Value at complex `θ` (off the interval the expansion is simply continued).
    pub fn eval_complex(&self, theta: C64) -> DVector<C64> {
        let t = theta / self.half_width;
        let rows = self.rows();
        let mut b1 = vec![C64::new(0.0, 0.0); rows];
        let mut b2 = b1.clone();
        for k in (1..=self.degree()).rev() {
            let c = self.coeffs.column(k);
            for i in 0..rows {
                let b0 = c[i].to_c64() + t * 2.0 * b1[i] - b2[i];
                b2[i] = b1[i];
                b1[i] = b0;
            }
        }
        let c0 = self.coeffs.column(0);
        DVector::from_fn(rows, |i, _| c0[i].to_c64() + t * b1[i] - b2[i])
    }

    /// Values at `cheb_points(n)` as columns; requires `n >= degree`.
    pub fn values_at_points(&self, n: usize) -> DMatrix<T> {
        assert!(
            n >= self.degree(),
            "sampling degree {n} below function degree {}",
            self.degree()
        );
        coeffs_to_values(&self.pad(n).coeffs)
    }

    pub fn pad(&self, degree: usize) -> Self {
        let cols = self.coeffs.ncols();
        if degree < cols {
            return self.clone();
        }
        let mut c = DMatrix::zeros(self.rows(), degree + 1);
        c.columns_mut(0, cols).copy_from(&self.coeffs);
        ChebFunction::from_parts(c, self.half_width)
    }

    /// Drops trailing columns whose largest entry is at most `tol` times the largest entry
    /// overall. Never goes below degree 0.
    pub fn chop(&self, tol: f64) -> Self {
        let norms = column_max_abs(&self.coeffs);
        let keep = chopped_len(&norms, tol);
        ChebFunction::from_parts(self.coeffs.columns(0, keep).clone_owned(), self.half_width)
    }

    /// Derivative with respect to `θ`.
    pub fn derivative(&self) -> Self {
        let n = self.degree();
        let rows = self.rows();
        if n == 0 {
            return ChebFunction::zeros(rows, 0, self.half_width);
        }
        let mut d = DMatrix::<T>::zeros(rows, n + 1);
        // d_{k-1} = d_{k+1} + 2k c_k
        for k in (1..=n).rev() {
            let two_k = T::from_real(2.0 * k as f64);
            for i in 0..rows {
                let next = if k < n { d[(i, k + 1)] } else { T::zero() };
                d[(i, k - 1)] = next + two_k * self.coeffs[(i, k)];
            }
        }
        let half = T::from_real(0.5);
        for i in 0..rows {
            d[(i, 0)] *= half;
        }
        let scale = T::from_real(1.0 / self.half_width);
        let d = d.columns(0, n).clone_owned() * scale;
        ChebFunction::from_parts(d, self.half_width)
    }

    pub fn scale(&self, a: T) -> Self {
        ChebFunction::from_parts(&self.coeffs * a, self.half_width)
    }

    /// `self + a * other`, padding the shorter operand.
    pub fn axpy(&self, a: T, other: &Self) -> Result<Self> {
        same_domain(self.half_width, other.half_width)?;
        if self.rows() != other.rows() {
            return Err(Error::DimensionMismatch(format!(
                "{} vs {} rows",
                self.rows(),
                other.rows()
            )));
        }
        let deg = self.degree().max(other.degree());
        let mut out = self.pad(deg);
        let cols = other.coeffs.ncols();
        let mut view = out.coeffs.columns_mut(0, cols);
        view += &other.coeffs * a;
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|x| x.modulus()).fold(0.0, f64::max)
    }

    /// Norm induced by [`inner_product`].
    pub fn norm(&self) -> f64 {
        self.coeffs.norm()
    }

    pub fn to_complex(&self) -> ChebFunction<C64> {
        ChebFunction::from_parts(self.coeffs.map(|x| x.to_c64()), self.half_width)
    }

    /// Dumps the coefficients, one row per component and one column per index.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io_err = |e: std::io::Error| Error::Io {
            path: path.display().to_string(),
            source: e,
        };
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
        for i in 0..self.rows() {
            let line: Vec<String> = self.coeffs.row(i).iter().map(|x| format_scalar(x.to_c64())).collect();
            writeln!(out, "{}", line.join(",")).map_err(io_err)?;
        }
        out.flush().map_err(io_err)
    }
}

fn format_scalar(z: C64) -> String {
    if z.im == 0.0 {
        format!("{:.16e}", z.re)
    } else {
        format!("{:.16e}{:+.16e}j", z.re, z.im)
    }
}

impl ChebFunction<C64> {
    pub fn real_part(&self) -> ChebFunction<f64> {
        ChebFunction::from_parts(self.coeffs.map(|z| z.re), self.half_width)
    }

    /// Largest imaginary coefficient relative to the largest coefficient modulus.
    pub fn imag_ratio(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        self.coeffs.iter().map(|z| z.im.abs()).fold(0.0, f64::max) / scale
    }
}

pub(crate) fn column_max_abs<T: Scalar>(m: &DMatrix<T>) -> Vec<f64> {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.modulus()).fold(0.0, f64::max))
        .collect()
}

fn chopped_len(norms: &[f64], tol: f64) -> usize {
    let gmax = norms.iter().copied().fold(0.0, f64::max);
    let threshold = tol * gmax;
    match norms.iter().rposition(|&c| c > threshold) {
        Some(last) => last + 1,
        None => 1,
    }
}

/// `Σ_l f_lᴴ g_l` over coefficient columns; the shorter expansion is implicitly padded.
pub fn inner_product<T: Scalar>(f: &ChebFunction<T>, g: &ChebFunction<T>) -> Result<T> {
    same_domain(f.half_width, g.half_width)?;
    if f.rows() != g.rows() {
        return Err(Error::DimensionMismatch(format!("{} vs {} rows", f.rows(), g.rows())));
    }
    let len = f.coeffs.ncols().min(g.coeffs.ncols()) * f.rows();
    let a = &f.coeffs.as_slice()[..len];
    let b = &g.coeffs.as_slice()[..len];
    Ok(a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + x.conjugate() * *y))
}

/// Extreme points `θ_l = τ cos(lπ/N)`, `l = 0..=N`.
pub fn cheb_points(n: usize, half_width: f64) -> Vec<f64> {
    if n == 0 {
        return vec![half_width];
    }
    let nf = n as f64;
    (0..=n)
        .map(|l| {
            // sin form keeps the points exactly antisymmetric
            let x = (std::f64::consts::PI * (nf - 2.0 * l as f64) / (2.0 * nf)).sin();
            half_width * x
        })
        .collect()
}

/// `T_0(x), …, T_n(x)` by the three-term recurrence.
pub fn chebyshev_t(n: usize, x: f64) -> Vec<f64> {
    let mut t = Vec::with_capacity(n + 1);
    t.push(1.0);
    if n >= 1 {
        t.push(x);
    }
    for k in 2..=n {
        let v = 2.0 * x * t[k - 1] - t[k - 2];
        t.push(v);
    }
    t
}

fn even_extension_fft<T: Scalar>(m: &DMatrix<T>, scale_ends: f64) -> Vec<C64> {
    let rows = m.nrows();
    let n = m.ncols() - 1;
    let len = 2 * n;
    let mut buf = vec![C64::new(0.0, 0.0); rows * len];
    for l in 0..=n {
        let w = if l == 0 || l == n { scale_ends } else { 1.0 };
        let col = m.column(l);
        for i in 0..rows {
            let v = col[i].to_c64() * w;
            buf[i * len + l] = v;
            if l > 0 && l < n {
                buf[i * len + len - l] = v;
            }
        }
    }
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(len).process(&mut buf);
    buf
}

/// Values at `cheb_points(N)` (columns) to Chebyshev coefficients.
pub(crate) fn values_to_coeffs<T: Scalar>(values: &DMatrix<T>) -> DMatrix<T> {
    let n = values.ncols() - 1;
    if n == 0 {
        return values.clone();
    }
    let rows = values.nrows();
    let len = 2 * n;
    let buf = even_extension_fft(values, 1.0);
    let inv_n = 1.0 / n as f64;
    DMatrix::from_fn(rows, n + 1, |i, k| {
        let w = if k == 0 || k == n { 0.5 * inv_n } else { inv_n };
        T::from_c64(buf[i * len + k] * w)
    })
}

/// Chebyshev coefficients to values at `cheb_points(N)`.
pub(crate) fn coeffs_to_values<T: Scalar>(coeffs: &DMatrix<T>) -> DMatrix<T> {
    let n = coeffs.ncols() - 1;
    if n == 0 {
        return coeffs.clone();
    }
    let rows = coeffs.nrows();
    let len = 2 * n;
    let buf = even_extension_fft(coeffs, 2.0);
    DMatrix::from_fn(rows, n + 1, |i, l| T::from_c64(buf[i * len + l] * 0.5))
}

fn tail_resolved(norms: &[f64], tol: f64) -> bool {
    let n = norms.len() - 1;
    let gmax = norms.iter().copied().fold(0.0, f64::max);
    if gmax == 0.0 {
        return true;
    }
    let tail = (n / 8).max(3).min(n);
    norms[n + 1 - tail..].iter().all(|&c| c <= tol * gmax)
}

/// Adaptive Chebyshev interpolation of a vector-valued function.
///
/// `sampler` receives the extreme points for some degree `N` and must return the
/// `rows x (N+1)` matrix of values there. Degrees run through `16·2^j`, starting at the
/// first one that is at least `min_degree`, until the coefficient tail decays below
/// `opts.chop_tol`. `step` labels the call in errors.
pub fn interpolate<T, F>(
    rows: usize,
    half_width: f64,
    min_degree: usize,
    opts: &InterpOptions,
    step: &'static str,
    mut sampler: F,
) -> Result<ChebFunction<T>>
where
    T: Scalar,
    F: FnMut(&[f64]) -> DMatrix<T>,
{
    check_half_width(half_width)?;
    let mut n = FIRST_DEGREE;
    while n < min_degree {
        n *= 2;
    }
    while n <= opts.max_degree {
        let pts = cheb_points(n, half_width);
        let vals = sampler(&pts);
        if vals.nrows() != rows || vals.ncols() != n + 1 {
            return Err(Error::DimensionMismatch(format!(
                "sampler returned {}x{}, expected {}x{}",
                vals.nrows(),
                vals.ncols(),
                rows,
                n + 1
            )));
        }
        if vals.iter().any(|x| !x.modulus().is_finite()) {
            return Err(Error::DegreeExceeded {
                step,
                max_degree: opts.max_degree,
            });
        }
        let coeffs = values_to_coeffs(&vals);
        let norms = column_max_abs(&coeffs);
        if tail_resolved(&norms, opts.chop_tol) {
            let keep = chopped_len(&norms, opts.chop_tol);
            return Ok(ChebFunction::from_parts(
                coeffs.columns(0, keep).clone_owned(),
                half_width,
            ));
        }
        n *= 2;
    }
    Err(Error::DegreeExceeded {
        step,
        max_degree: opts.max_degree,
    })
}

/// Interpolates `θ ↦ f(θ) e^{sθ}`.
pub fn interpolate_weighted(
    f: &ChebFunction<C64>,
    s: C64,
    opts: &InterpOptions,
    step: &'static str,
) -> Result<ChebFunction<C64>> {
    let rows = f.rows();
    interpolate(rows, f.half_width, f.degree() + FIRST_DEGREE, opts, step, |pts| {
        let n = pts.len() - 1;
        let mut vals = f.values_at_points(n);
        for (l, &theta) in pts.iter().enumerate() {
            let w = (s * theta).exp();
            for z in vals.column_mut(l).iter_mut() {
                *z *= w;
            }
        }
        vals
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_fn(rng: &mut ChaCha8Rng, rows: usize, degree: usize, tau: f64) -> ChebFunction<f64> {
        let c = DMatrix::from_fn(rows, degree + 1, |_, _| rng.random_range(-1.0..1.0));
        ChebFunction::new(c, tau).unwrap()
    }

    fn naive_eval(f: &ChebFunction<f64>, theta: f64) -> DVector<f64> {
        let t = chebyshev_t(f.degree(), theta / f.half_width());
        let mut out = DVector::zeros(f.rows());
        for (l, tl) in t.iter().enumerate() {
            out += f.coeffs().column(l) * *tl;
        }
        out
    }

    #[test]
    fn constant_and_first_degree_evaluation() {
        let v = DVector::from_vec(vec![0.6, 0.8]);
        let f = ChebFunction::constant(&v, 2.5);
        for th in [-2.5, -1.0, 0.0, 0.3, 2.5] {
            assert_eq!(f.eval(th), v);
        }
        let mut c = DMatrix::zeros(2, 2);
        c.column_mut(1).copy_from(&v);
        let g = ChebFunction::new(c, 2.5).unwrap();
        assert_eq!(g.eval(2.5), v);
    }

    #[test]
    fn clenshaw_matches_naive_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let f = random_fn(&mut rng, 3, 8, 1.7);
            let th = rng.random_range(-1.7..1.7);
            let a = f.eval(th);
            let b = naive_eval(&f, th);
            assert!((&a - &b).norm() <= 1e-14 * b.norm().max(1.0));
            let z = f.eval_complex(C64::new(th, 0.0));
            assert!(z
                .iter()
                .zip(a.iter())
                .all(|(z, a)| (z.re - a).abs() < 1e-14 && z.im == 0.0));
        }
    }

    #[test]
    fn points() {
        let p = cheb_points(2, 1.0);
        assert_eq!(p, vec![1.0, 0.0, -1.0]);
        for n in [1, 5, 16, 33] {
            let p = cheb_points(n, 3.0);
            assert_eq!(p[0], 3.0);
            assert_eq!(p[n], -3.0);
            for l in 0..=n {
                assert_eq!(p[l], -p[n - l]);
                assert!((p[l] - 3.0 * (l as f64 * PI / n as f64).cos()).abs() < 1e-15 * 3.0);
            }
        }
    }

    #[test]
    fn dct_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in [1, 2, 7, 16, 31] {
            let f = random_fn(&mut rng, 4, n, 1.0);
            let vals = coeffs_to_values(f.coeffs());
            let pts = cheb_points(n, 1.0);
            for (l, &th) in pts.iter().enumerate() {
                let direct = naive_eval(&f, th);
                assert!((vals.column(l) - direct).norm() < 1e-13);
            }
            let back = values_to_coeffs(&vals);
            assert!((back - f.coeffs()).norm() < 1e-13);
        }
    }

    #[test]
    fn interpolating_a_polynomial_recovers_it() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_fn(&mut rng, 2, 5, 1.3);
        let g = interpolate(2, 1.3, 0, &InterpOptions::default(), "test", |pts| {
            DMatrix::from_fn(2, pts.len(), |i, l| f.eval(pts[l])[i])
        })
        .unwrap();
        assert_eq!(g.degree(), 5);
        assert!((g.coeffs() - f.coeffs()).abs().max() < 1e-14);
    }

    #[test]
    fn exponential_coefficients_match_quadrature() {
        // c_k = (2/π) ∫_0^π e^{jωτ cos u} cos(ku) du, halved for k = 0
        let tau = 1.0;
        let omega = 3.0 * PI / 4.0;
        let f = interpolate(1, tau, 0, &InterpOptions::default(), "test", |pts| {
            DMatrix::from_fn(1, pts.len(), |_, l| C64::new(0.0, omega * pts[l]).exp())
        })
        .unwrap();
        assert!(f.degree() <= 32, "degree {}", f.degree());
        let m = 4000;
        for k in 0..=f.degree() {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..m {
                let u = PI * (i as f64 + 0.5) / m as f64;
                acc += C64::new(0.0, omega * tau * u.cos()).exp() * (k as f64 * u).cos();
            }
            let mut ck = acc * (2.0 / m as f64);
            if k == 0 {
                ck *= 0.5;
            }
            assert!((f.coeffs()[(0, k)] - ck).norm() < 1e-13, "k={k}");
        }
    }

    #[test]
    fn unresolvable_function_reports_degree_error() {
        let opts = InterpOptions {
            chop_tol: 1e-13,
            max_degree: 256,
        };
        let r = interpolate(1, 1.0, 0, &opts, "probe", |pts| {
            DMatrix::from_fn(1, pts.len(), |_, l| 1.0 / (1.0 + 1e8 * pts[l] * pts[l]))
        });
        assert!(matches!(
            r,
            Err(Error::DegreeExceeded {
                step: "probe",
                max_degree: 256
            })
        ));
    }

    #[test]
    fn pad_and_chop() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = random_fn(&mut rng, 3, 6, 1.0);
        let padded = f.pad(20);
        assert_eq!(padded.degree(), 20);
        assert_eq!(padded.chop(0.0), f);
        assert_eq!(f.chop(1e-13), f);
        for th in [-1.0, -0.2, 0.7] {
            assert_eq!(padded.eval(th), f.eval(th));
        }
        let mut noisy = padded.clone();
        for l in 7..=20 {
            noisy.coeffs[(1, l)] = 1e-16 * rng.random_range(-1.0..1.0);
        }
        assert_eq!(noisy.chop(1e-13).degree(), 6);
    }

    #[test]
    fn inner_product_basics() {
        let mut c = DMatrix::zeros(1, 1);
        c[(0, 0)] = 1.0;
        let e0 = ChebFunction::new(c, 1.0).unwrap();
        assert_eq!(inner_product(&e0, &e0).unwrap(), 1.0);
        let mut c = DMatrix::zeros(1, 2);
        c[(0, 1)] = 1.0;
        let e1 = ChebFunction::new(c, 1.0).unwrap();
        assert_eq!(inner_product(&e0, &e1).unwrap(), 0.0);
        let other = ChebFunction::new(DMatrix::from_element(1, 1, 1.0), 2.0).unwrap();
        assert!(matches!(inner_product(&e0, &other), Err(Error::DomainMismatch(..))));
    }

    #[test]
    fn inner_product_matches_weighted_integral_form() {
        // (2/π) I[fᵀg] - (1/π²) I[f]ᵀ I[g] with I the Chebyshev-weighted integral
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = 64;
        let nodes: Vec<f64> = (1..=m)
            .map(|i| ((2 * i - 1) as f64 * PI / (2 * m) as f64).cos())
            .collect();
        for _ in 0..10 {
            let tau = rng.random_range(0.5..3.0);
            let f = random_fn(&mut rng, 3, 9, tau);
            let g = random_fn(&mut rng, 3, 12, tau);
            let (mut ifg, mut i_f, mut i_g) = (0.0, DVector::zeros(3), DVector::zeros(3));
            for &x in &nodes {
                let (fv, gv) = (f.eval(tau * x), g.eval(tau * x));
                ifg += fv.dot(&gv) * PI / m as f64;
                i_f += fv * (PI / m as f64);
                i_g += gv * (PI / m as f64);
            }
            let oracle = 2.0 / PI * ifg - i_f.dot(&i_g) / (PI * PI);
            let ip = inner_product(&f, &g).unwrap();
            assert!((ip - oracle).abs() < 1e-10, "{ip} vs {oracle}");
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let f = random_fn(&mut rng, 2, 9, 1.5);
        let d = f.derivative();
        assert_eq!(d.degree(), 8);
        let h = 1e-6;
        for _ in 0..10 {
            let th = rng.random_range(-1.4..1.4);
            let fd = (f.eval(th + h) - f.eval(th - h)) / (2.0 * h);
            assert!((d.eval(th) - fd).amax() < 1e-6);
        }
        // T_2'' = 4 = 4 T_0 on [-1, 1]
        let mut c = DMatrix::zeros(1, 3);
        c[(0, 2)] = 1.0;
        let t2 = ChebFunction::new(c, 1.0).unwrap();
        let dd = t2.derivative().derivative();
        assert_eq!(dd.degree(), 0);
        assert!((dd.coeffs()[(0, 0)] - 4.0).abs() < 1e-15);
    }

    #[test]
    fn weighted_interpolation() {
        let v = DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 2.0)]);
        let f = ChebFunction::constant(&v, 1.0);
        let s = C64::new(0.0, 1.2);
        let g = interpolate_weighted(&f, s, &InterpOptions::default(), "w").unwrap();
        for th in [-1.0, -0.3, 0.0, 0.9] {
            let expect = &v * (s * th).exp();
            let err = (g.eval(th) - &expect).norm();
            assert!(err < 1e-13 * expect.norm(), "{err}");
        }
    }

    #[test]
    fn csv_dump() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let f = ChebFunction::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -2.0, 0.25]), 1.0).unwrap();
        f.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        let vals: Vec<f64> = lines[1].split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(vals, vec![-2.0, 0.25]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn interpolation_is_idempotent(seed in 0u64..1000, deg in 0usize..30, rows in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_fn(&mut rng, rows, deg, 1.0 + seed as f64 / 500.0);
            let g = interpolate(rows, f.half_width(), 0, &InterpOptions::default(), "p", |pts| {
                let mut vals = DMatrix::zeros(rows, pts.len());
                for (l, &th) in pts.iter().enumerate() {
                    vals.set_column(l, &f.eval(th));
                }
                vals
            }).unwrap();
            let fp = f.pad(g.degree().max(f.degree()));
            let gp = g.pad(fp.degree());
            prop_assert!((fp.coeffs() - gp.coeffs()).amax() <= 1e-14 * 10.0 * f.max_abs().max(1.0));
        }

        #[test]
        fn inner_product_conjugate_symmetric_and_positive(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_fn(&mut rng, 2, 5, 1.0).to_complex().scale(C64::new(0.3, 0.7));
            let g = random_fn(&mut rng, 2, 8, 1.0).to_complex().scale(C64::new(-1.0, 0.2));
            let a = inner_product(&f, &g).unwrap();
            let b = inner_product(&g, &f).unwrap();
            prop_assert!((a - b.conj()).norm() < 1e-13);
            let ff = inner_product(&f, &f).unwrap();
            prop_assert!(ff.re > 0.0 && ff.im.abs() < 1e-15);
        }

        #[test]
        fn padding_preserves_values(seed in 0u64..1000, extra in 0usize..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_fn(&mut rng, 2, 4, 2.0);
            let th = rng.random_range(-2.0..2.0);
            prop_assert_eq!(f.pad(4 + extra).eval(th), f.eval(th));
        }
    }
}
