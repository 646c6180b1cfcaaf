//! Shift-invert infinite Arnoldi on Chebyshev-represented functions.
//!
//! Three variants share the loop:
//!
//! * [`Mode::Baseline`] runs Arnoldi on `(H - σ)⁻¹`, the unstructured reference;
//! * [`Mode::PlainR`] runs it on `R_σ⁻¹ = ((H - σ)(H + σ))⁻¹` with classical Gram–Schmidt
//!   and one reorthogonalization pass;
//! * [`Mode::JEnforced`] additionally removes from each new vector its component in the
//!   range of `S_N Q`, which keeps the basis neutral for the skew pairing. Every
//!   eigenvalue `μ` of the projected matrix then stands for exactly one symmetric pair
//!   `±√(1/μ + σ²)`.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use nalgebra::{ColPivQR, DMatrix, DVector, DVectorView, DVectorViewMut};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bilinear::SkewForm;
use crate::chebyshev::ChebFunction;
use crate::error::{Error, Result};
use crate::linalg::{complex_eigenvalues, inverse_iteration, real_eigenvalues, to_complex_matrix, Scalar, C64};
use crate::operator::{PipelineOptions, ShiftedOperator};
use crate::problem::{DelayHamiltonianProblem, Shift};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Baseline,
    PlainR,
    JEnforced,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Baseline, Mode::PlainR, Mode::JEnforced];

    pub fn is_structured(self) -> bool {
        self != Mode::Baseline
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Baseline => "baseline",
            Mode::PlainR => "plain-r",
            Mode::JEnforced => "j-enforced",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "baseline" => Ok(Mode::Baseline),
            "plain-r" | "plain_r" | "plainr" => Ok(Mode::PlainR),
            "j-enforced" | "j_enforced" | "jenforced" => Ok(Mode::JEnforced),
            other => Err(Error::InvalidArgument(format!(
                "unknown mode '{other}', expected baseline, plain-r or j-enforced"
            ))),
        }
    }
}

/// Constant starting function; random starts draw the constant vector from a seeded RNG.
#[derive(Clone, Debug, PartialEq)]
pub enum StartFunction {
    ConstantOnes,
    Constant(Vec<f64>),
    Random(u64),
}

impl StartFunction {
    pub fn vector(&self, size: usize) -> Result<DVector<f64>> {
        let v = match self {
            StartFunction::ConstantOnes => DVector::from_element(size, 1.0),
            StartFunction::Constant(c) => {
                if c.len() != size {
                    return Err(Error::DimensionMismatch(format!(
                        "start vector of length {} for a problem of size {size}",
                        c.len()
                    )));
                }
                DVector::from_column_slice(c)
            }
            StartFunction::Random(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                DVector::from_fn(size, |_, _| rng.random_range(-1.0..1.0))
            }
        };
        let norm = v.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::ZeroVector);
        }
        Ok(v / norm)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub shift: Shift,
    pub m: usize,
    pub mode: Mode,
    pub start: StartFunction,
    /// Relative to `‖Ψ‖`.
    pub breakdown_tol: f64,
    /// `μ` with `|Im μ| <= real_mu_tol ‖Ψ‖` is treated as real.
    pub real_mu_tol: f64,
    /// Relative drop tolerance of the pivoted QR that solves the skew Gram system.
    pub gram_drop_tol: f64,
    pub pipeline: PipelineOptions,
    /// Keep the basis functions in the result (real modes only).
    pub keep_basis: bool,
}

impl SolverConfig {
    pub fn new(shift: Shift, m: usize) -> Self {
        SolverConfig {
            shift,
            m,
            mode: Mode::JEnforced,
            start: StartFunction::ConstantOnes,
            breakdown_tol: 1e-12,
            real_mu_tol: 1e-10,
            gram_drop_tol: 1e-12,
            pipeline: PipelineOptions::default(),
            keep_basis: false,
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_start(mut self, start: StartFunction) -> Self {
        self.start = start;
        self
    }

    pub fn keeping_basis(mut self) -> Self {
        self.keep_basis = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidArgument("iteration count must be at least 1".into()));
        }
        for (name, v) in [
            ("breakdown_tol", self.breakdown_tol),
            ("real_mu_tol", self.real_mu_tol),
            ("gram_drop_tol", self.gram_drop_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SymmetryClass {
    ImaginaryPair,
    RealPair,
    Quadruple,
    /// Baseline results carry no symmetry guarantee.
    Unstructured,
}

impl fmt::Display for SymmetryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SymmetryClass::ImaginaryPair => "imaginary-pair",
            SymmetryClass::RealPair => "real-pair",
            SymmetryClass::Quadruple => "quadruple",
            SymmetryClass::Unstructured => "unstructured",
        })
    }
}

#[derive(Clone, Debug)]
pub struct RitzPair {
    pub mu: C64,
    pub lambdas: Vec<C64>,
    pub residuals: Vec<f64>,
    /// Unit-norm eigenvector estimate for each entry of `lambdas`.
    pub vectors: Vec<DVector<C64>>,
    pub symmetry_class: SymmetryClass,
}

impl RitzPair {
    pub fn ritz_vector(&self) -> &DVector<C64> {
        &self.vectors[0]
    }

    pub fn min_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub enum Hessenberg {
    Real(DMatrix<f64>),
    Complex(DMatrix<C64>),
}

impl Hessenberg {
    pub fn ncols(&self) -> usize {
        match self {
            Hessenberg::Real(m) => m.ncols(),
            Hessenberg::Complex(m) => m.ncols(),
        }
    }

    pub fn to_complex(&self) -> DMatrix<C64> {
        match self {
            Hessenberg::Real(m) => to_complex_matrix(m),
            Hessenberg::Complex(m) => m.clone(),
        }
    }

    pub fn norm(&self) -> f64 {
        match self {
            Hessenberg::Real(m) => m.norm(),
            Hessenberg::Complex(m) => m.norm(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct IterationDiagnostics {
    pub iteration: usize,
    /// Degree of the operator output before orthogonalization.
    pub candidate_degree: usize,
    /// Common degree of the padded basis after this iteration.
    pub basis_degree: usize,
    /// `max |QᵀS_N Q|` over the skew-form scale; NaN when not tracked.
    pub neutrality: f64,
    pub orthogonality: f64,
    /// Directions dropped by the rank-revealing Gram solve.
    pub gram_dropped: usize,
    pub subdiagonal: f64,
}

#[derive(Clone, Debug)]
pub struct KrylovState {
    pub psi: Hessenberg,
    pub basis_degrees: Vec<usize>,
    /// Basis functions, present for real runs with `keep_basis`.
    pub basis: Option<Vec<ChebFunction<f64>>>,
    /// `QᵀS_N Q` for tracked runs.
    pub neutrality_matrix: Option<DMatrix<f64>>,
    pub skew_scale: f64,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub mode: Mode,
    pub shift: Shift,
    pub ritz: Vec<RitzPair>,
    pub state: KrylovState,
    pub diagnostics: Vec<IterationDiagnostics>,
    /// Iteration at which the subdiagonal vanished, if it did.
    pub breakdown: Option<usize>,
    /// Principal eigenvalue estimates after every iteration.
    pub history: Vec<Vec<C64>>,
    /// Ritz values dropped because `μ` was numerically zero.
    pub dropped_mu: usize,
    pub elapsed: Duration,
}

impl SolveResult {
    /// All reported eigenvalues with their residuals and classes, in list order.
    pub fn eigenvalues(&self) -> Vec<(C64, f64, SymmetryClass)> {
        self.ritz
            .iter()
            .flat_map(|r| {
                r.lambdas
                    .iter()
                    .zip(&r.residuals)
                    .map(move |(l, res)| (*l, *res, r.symmetry_class))
            })
            .collect()
    }

    pub fn final_degree(&self) -> usize {
        self.diagnostics.last().map(|d| d.basis_degree).unwrap_or(0)
    }
}

/// Runs the iteration of `cfg.mode` on problem `p`.
pub fn run(p: &DelayHamiltonianProblem, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let start = Instant::now();
    let op = ShiftedOperator::new(p, cfg.shift, cfg.pipeline)?;
    let v0 = cfg.start.vector(p.dim())?;
    let tau = p.half_width();

    let mut result = match cfg.mode {
        Mode::Baseline if cfg.shift.kind() == crate::problem::ShiftKind::Imaginary => {
            let q0 = ChebFunction::constant(&v0.map(|x| C64::new(x, 0.0)), tau);
            let raw = arnoldi_loop(cfg, q0, NoSkew, |f| op.apply_baseline(f))?;
            finish(p, cfg, raw)
        }
        Mode::Baseline => {
            let q0 = ChebFunction::constant(&v0, tau);
            let raw = arnoldi_loop(cfg, q0, NoSkew, |f| Ok(op.apply_baseline(&f.to_complex())?.real_part()))?;
            finish(p, cfg, raw)
        }
        Mode::PlainR | Mode::JEnforced => {
            let q0 = ChebFunction::constant(&v0, tau);
            let tracker = SkewTracker::new(p, cfg.mode == Mode::JEnforced, cfg.gram_drop_tol);
            let raw = arnoldi_loop(cfg, q0, tracker, |f| op.apply_rinv(f))?;
            finish(p, cfg, raw)
        }
    };
    result.elapsed = start.elapsed();
    Ok(result)
}

/// Scalar-specific pieces of the loop.
pub(crate) trait KrylovScalar: Scalar {
    fn eigenvalues(m: &DMatrix<Self>) -> Vec<C64>;
    fn hessenberg(m: DMatrix<Self>) -> Hessenberg;
    fn real_basis(f: &ChebFunction<Self>) -> Option<ChebFunction<f64>>;
}

impl KrylovScalar for f64 {
    fn eigenvalues(m: &DMatrix<f64>) -> Vec<C64> {
        real_eigenvalues(m)
    }
    fn hessenberg(m: DMatrix<f64>) -> Hessenberg {
        Hessenberg::Real(m)
    }
    fn real_basis(f: &ChebFunction<f64>) -> Option<ChebFunction<f64>> {
        Some(f.clone())
    }
}

impl KrylovScalar for C64 {
    fn eigenvalues(m: &DMatrix<C64>) -> Vec<C64> {
        complex_eigenvalues(m)
    }
    fn hessenberg(m: DMatrix<C64>) -> Hessenberg {
        Hessenberg::Complex(m)
    }
    fn real_basis(_: &ChebFunction<C64>) -> Option<ChebFunction<f64>> {
        None
    }
}

/// Bookkeeping for the skew pairing; a no-op for the baseline.
pub(crate) trait Neutrality<T: Scalar> {
    fn grow(&mut self, degree: usize, basis: &[DMatrix<T>]) -> Result<()>;
    /// Registers a new basis vector; `basis` holds the earlier ones.
    fn push(&mut self, q: &DMatrix<T>, basis: &[DMatrix<T>]) -> Result<()>;
    /// Removes the component in `range(S Q)`; returns the number of dropped directions.
    fn project(&self, v: &mut DMatrix<T>) -> usize;
    fn neutrality(&self) -> f64;
    fn finish(self) -> (Option<DMatrix<f64>>, f64);
}

pub(crate) struct NoSkew;

impl<T: Scalar> Neutrality<T> for NoSkew {
    fn grow(&mut self, _: usize, _: &[DMatrix<T>]) -> Result<()> {
        Ok(())
    }
    fn push(&mut self, _: &DMatrix<T>, _: &[DMatrix<T>]) -> Result<()> {
        Ok(())
    }
    fn project(&self, _: &mut DMatrix<T>) -> usize {
        0
    }
    fn neutrality(&self) -> f64 {
        f64::NAN
    }
    fn finish(self) -> (Option<DMatrix<f64>>, f64) {
        (None, f64::NAN)
    }
}

/// Tracks `QᵀS_N Q` and, when enforcing, an orthonormal basis `W` of `range(S_N Q)`
/// with `S_N Q = W R`.
///
/// Projecting through `W` is the same projector as the Gram formula
/// `S Q ((S Q)ᵀ S Q)⁻¹ (S Q)ᵀ` without squaring the conditioning of `S Q`, which
/// degrades quickly once Ritz vectors converge.
pub(crate) struct SkewTracker {
    sf: SkewForm,
    enforce: bool,
    drop_tol: f64,
    w: DMatrix<f64>,
    r: DMatrix<f64>,
    col_max: f64,
    qsq: DMatrix<f64>,
}

fn dot_prefix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let len = a.len().min(b.len());
    a.as_slice()[..len]
        .iter()
        .zip(&b.as_slice()[..len])
        .map(|(x, y)| x * y)
        .sum()
}

/// Thin rank-revealing factorization `m ≈ Q R` with orthonormal `Q` of the numerical
/// rank: trailing pivots with `|R_kk| <= tol · |R_00|` are dropped.
pub(crate) fn rank_revealing_qr(m: DMatrix<f64>, tol: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let k = m.ncols();
    let qr = ColPivQR::new(m);
    let r = qr.r();
    let diag = r.nrows().min(k);
    let r00 = if diag > 0 { r[(0, 0)].abs() } else { 0.0 };
    let rank = (0..diag).take_while(|&i| r[(i, i)].abs() > tol * r00).count();
    let q = qr.q().columns(0, rank).clone_owned();
    let mut rr = r.rows(0, rank).clone_owned();
    qr.p().inv_permute_columns(&mut rr);
    (q, rr)
}

impl SkewTracker {
    pub(crate) fn new(p: &DelayHamiltonianProblem, enforce: bool, drop_tol: f64) -> Self {
        SkewTracker {
            sf: SkewForm::build(p, 0),
            enforce,
            drop_tol,
            w: DMatrix::zeros(p.dim(), 0),
            r: DMatrix::zeros(0, 0),
            col_max: 0.0,
            qsq: DMatrix::zeros(0, 0),
        }
    }

    fn dropped(&self) -> usize {
        self.r.ncols() - self.r.nrows()
    }
}

impl Neutrality<f64> for SkewTracker {
    fn grow(&mut self, degree: usize, basis: &[DMatrix<f64>]) -> Result<()> {
        let old = self.sf.degree();
        if degree <= old {
            return Ok(());
        }
        self.sf.extend(degree);
        if !self.enforce {
            return Ok(());
        }
        // S Q gains rows; with S Q = W R the stacked [R; E] carries all of it
        let rows = self.sf.rows() * (degree - old);
        let (rank, k) = (self.r.nrows(), basis.len());
        let mut stacked = DMatrix::zeros(rank + rows, k);
        stacked.view_mut((0, 0), (rank, k)).copy_from(&self.r);
        for (j, q) in basis.iter().enumerate() {
            let extra = self.sf.apply_columns(q, old + 1..degree + 1)?;
            stacked.view_mut((rank, j), (rows, 1)).copy_from_slice(extra.as_slice());
        }
        let (qs, r) = rank_revealing_qr(stacked, self.drop_tol);
        let new_rank = qs.ncols();
        let mut w = DMatrix::zeros(self.w.nrows() + rows, new_rank);
        if rank > 0 {
            w.rows_mut(0, self.w.nrows()).copy_from(&(&self.w * qs.rows(0, rank)));
        }
        w.rows_mut(self.w.nrows(), rows).copy_from(&qs.rows(rank, rows));
        self.w = w;
        self.r = r;
        Ok(())
    }

    fn push(&mut self, q: &DMatrix<f64>, basis: &[DMatrix<f64>]) -> Result<()> {
        let sq = self.sf.apply_block(q)?;
        let k = basis.len();
        let mut qsq = DMatrix::zeros(k + 1, k + 1);
        qsq.view_mut((0, 0), (k, k)).copy_from(&self.qsq);
        for (j, qj) in basis.iter().enumerate() {
            // q_jᵀ S q_k, and S is skew
            let t = dot_prefix(qj, &sq);
            qsq[(j, k)] = t;
            qsq[(k, j)] = -t;
        }
        qsq[(k, k)] = dot_prefix(q, &sq);
        self.qsq = qsq;
        if !self.enforce {
            return Ok(());
        }

        let len = sq.len();
        let mut s = DVector::from_column_slice(sq.as_slice());
        let norm = s.norm();
        self.col_max = self.col_max.max(norm);
        let mut c = DVector::zeros(self.w.ncols());
        for _ in 0..2 {
            let d = self.w.tr_mul(&s);
            s.gemv(-1.0, &self.w, &d, 1.0);
            c += d;
        }
        let rho = s.norm();
        let keep = rho > self.drop_tol * self.col_max;
        let rank = self.r.nrows();
        let mut r = DMatrix::zeros(rank + keep as usize, k + 1);
        r.view_mut((0, 0), (rank, k)).copy_from(&self.r);
        r.view_mut((0, k), (rank, 1)).copy_from(&c);
        if keep {
            r[(rank, k)] = rho;
            let mut w = DMatrix::zeros(len, rank + 1);
            w.columns_mut(0, rank).copy_from(&self.w);
            w.column_mut(rank).copy_from(&(s / rho));
            self.w = w;
        }
        self.r = r;
        Ok(())
    }

    fn project(&self, v: &mut DMatrix<f64>) -> usize {
        if !self.enforce || self.w.ncols() == 0 {
            return 0;
        }
        debug_assert_eq!(v.len(), self.w.nrows());
        let n = v.len();
        let y = self.w.tr_mul(&DVectorView::from_slice(v.as_slice(), n));
        let mut vv = DVectorViewMut::from_slice(v.as_mut_slice(), n);
        vv.gemv(-1.0, &self.w, &y, 1.0);
        self.dropped()
    }

    fn neutrality(&self) -> f64 {
        self.qsq.amax() / self.sf.scale()
    }

    fn finish(self) -> (Option<DMatrix<f64>>, f64) {
        let scale = self.sf.scale();
        (Some(self.qsq), scale)
    }
}

pub(crate) struct RawRun<T: Scalar> {
    psi: DMatrix<T>,
    basis: Vec<DMatrix<T>>,
    value0: Vec<DVector<T>>,
    deriv0: Vec<DVector<T>>,
    diagnostics: Vec<IterationDiagnostics>,
    breakdown: Option<usize>,
    history: Vec<Vec<C64>>,
    neutrality_matrix: Option<DMatrix<f64>>,
    skew_scale: f64,
    half_width: f64,
}

fn dot<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> T {
    let len = a.len().min(b.len());
    a.as_slice()[..len]
        .iter()
        .zip(&b.as_slice()[..len])
        .fold(T::zero(), |s, (x, y)| s + x.conjugate() * *y)
}

fn pad_to<T: Scalar>(m: &DMatrix<T>, cols: usize) -> DMatrix<T> {
    if m.ncols() >= cols {
        return m.clone();
    }
    let mut out = DMatrix::zeros(m.nrows(), cols);
    out.columns_mut(0, m.ncols()).copy_from(m);
    out
}

fn back_transform(mu: C64, shift: &Shift, mode: Mode) -> C64 {
    if mode == Mode::Baseline {
        shift.sigma() + mu.inv()
    } else {
        (mu.inv() + shift.sigma_squared()).sqrt()
    }
}

fn arnoldi_loop<T, N, F>(cfg: &SolverConfig, q0: ChebFunction<T>, mut skew: N, mut op: F) -> Result<RawRun<T>>
where
    T: KrylovScalar,
    N: Neutrality<T>,
    F: FnMut(&ChebFunction<T>) -> Result<ChebFunction<T>>,
{
    let m = cfg.m;
    let tau = q0.half_width();
    let mut psi = DMatrix::<T>::zeros(m + 1, m);
    let mut basis: Vec<DMatrix<T>> = Vec::with_capacity(m + 1);
    let mut value0 = Vec::with_capacity(m + 1);
    let mut deriv0 = Vec::with_capacity(m + 1);
    let mut diagnostics = Vec::with_capacity(m);
    let mut history = Vec::with_capacity(m);
    let mut degree = 0usize;
    let mut ortho = 0.0f64;
    let mut breakdown = None;
    let mut psi_norm_sq = 0.0f64;

    let record = |f: &ChebFunction<T>, value0: &mut Vec<DVector<T>>, deriv0: &mut Vec<DVector<T>>| {
        value0.push(f.eval(0.0));
        deriv0.push(f.derivative().eval(0.0));
    };
    record(&q0, &mut value0, &mut deriv0);
    skew.push(q0.coeffs(), &[])?;
    basis.push(q0.into_coeffs());

    let mut completed = 0;
    for i in 0..m {
        let current = ChebFunction::from_parts(basis[i].clone(), tau);
        let cand = op(&current).map_err(|e| e.at_iteration(i + 1))?;
        let cand_degree = cand.degree();
        if cand_degree > degree {
            degree = cand_degree;
            skew.grow(degree, &basis)?;
        }
        let mut v = pad_to(cand.coeffs(), degree + 1);

        let mut h = vec![T::zero(); i + 1];
        let mut dropped = 0;
        for _pass in 0..2 {
            let c: Vec<T> = basis.iter().map(|q| dot(q, &v)).collect();
            for (j, q) in basis.iter().enumerate() {
                let cols = q.ncols();
                let mut view = v.columns_mut(0, cols);
                let cj = c[j];
                view.zip_apply(q, |a, b| *a -= cj * b);
                h[j] += c[j];
            }
            dropped = dropped.max(skew.project(&mut v));
        }
        let beta = v.norm();
        for (j, hj) in h.iter().enumerate() {
            psi[(j, i)] = *hj;
            psi_norm_sq += hj.modulus_squared();
        }
        psi[(i + 1, i)] = T::from_real(beta);
        psi_norm_sq += beta * beta;
        completed = i + 1;

        let lucky = beta.is_nan() || beta <= cfg.breakdown_tol * psi_norm_sq.sqrt();
        let mut diag = IterationDiagnostics {
            iteration: i + 1,
            candidate_degree: cand_degree,
            basis_degree: degree,
            neutrality: skew.neutrality(),
            orthogonality: ortho,
            gram_dropped: dropped,
            subdiagonal: beta,
        };

        let block = psi.view((0, 0), (i + 1, i + 1)).clone_owned();
        history.push(
            T::eigenvalues(&block)
                .into_iter()
                .filter(|mu| mu.norm() > 0.0)
                .map(|mu| back_transform(mu, &cfg.shift, cfg.mode))
                .collect(),
        );

        if lucky {
            breakdown = Some(i + 1);
            diagnostics.push(diag);
            break;
        }

        v *= T::from_real(1.0 / beta);
        for q in &basis {
            let d = dot(q, &v);
            ortho = ortho.max(d.modulus());
        }
        ortho = ortho.max((v.norm_squared() - 1.0).abs());
        let f = ChebFunction::from_parts(v, tau);
        record(&f, &mut value0, &mut deriv0);
        let v = f.into_coeffs();
        skew.push(&v, &basis)?;
        basis.push(v);
        diag.orthogonality = ortho;
        diag.neutrality = skew.neutrality();
        diagnostics.push(diag);
    }

    let psi = psi.view((0, 0), (completed + 1, completed)).clone_owned();
    let (neutrality_matrix, skew_scale) = skew.finish();
    Ok(RawRun {
        psi,
        basis,
        value0,
        deriv0,
        diagnostics,
        breakdown,
        history,
        neutrality_matrix,
        skew_scale,
        half_width: tau,
    })
}

fn finish<T: KrylovScalar>(p: &DelayHamiltonianProblem, cfg: &SolverConfig, raw: RawRun<T>) -> SolveResult {
    let k = raw.psi.ncols();
    let square = raw.psi.view((0, 0), (k, k)).clone_owned();
    let mus = T::eigenvalues(&square);
    let psi_c = to_complex_matrix(&square);
    let psi_norm = raw.psi.norm();

    let value0: Vec<DVector<C64>> = raw.value0.iter().map(|v| v.map(|x| x.to_c64())).collect();
    let deriv0: Vec<DVector<C64>> = raw.deriv0.iter().map(|v| v.map(|x| x.to_c64())).collect();
    let combine = |y: &DVector<C64>, parts: &[DVector<C64>]| {
        let mut out = DVector::<C64>::zeros(p.dim());
        for (j, part) in parts.iter().take(y.len()).enumerate() {
            out.axpy(y[j], part, C64::new(1.0, 0.0));
        }
        out
    };

    let mut ritz = Vec::new();
    let mut dropped_mu = 0;
    for &mu in &mus {
        if mu.norm() <= cfg.breakdown_tol * psi_norm {
            dropped_mu += 1;
            continue;
        }
        let treated_real = cfg.mode.is_structured() && mu.im.abs() <= cfg.real_mu_tol * psi_norm;
        if cfg.mode.is_structured() && !treated_real && mu.im < 0.0 {
            // represented by its conjugate partner
            continue;
        }
        let y = inverse_iteration(&psi_c, mu);
        let phi0 = combine(&y, &value0);
        let dphi0 = combine(&y, &deriv0);
        let pair = if !cfg.mode.is_structured() {
            let lambda = cfg.shift.sigma() + mu.inv();
            let v = normalized(phi0);
            let res = residual_or_inf(p, lambda, &v);
            RitzPair {
                mu,
                lambdas: vec![lambda],
                residuals: vec![res],
                vectors: vec![v],
                symmetry_class: SymmetryClass::Unstructured,
            }
        } else {
            structured_pair(p, cfg, mu, treated_real, &phi0, &dphi0)
        };
        ritz.push(pair);
    }

    ritz.sort_by(|a, b| {
        let ka = (a.min_residual(), dist(a, &cfg.shift));
        let kb = (b.min_residual(), dist(b, &cfg.shift));
        ka.partial_cmp(&kb).unwrap_or(std::cmp::Ordering::Equal)
    });

    let basis = if cfg.keep_basis {
        raw.basis
            .iter()
            .map(|q| T::real_basis(&ChebFunction::from_parts(q.clone(), raw.half_width)))
            .collect::<Option<Vec<_>>>()
    } else {
        None
    };
    let basis_degrees = raw.basis.iter().map(|q| q.ncols() - 1).collect();
    SolveResult {
        mode: cfg.mode,
        shift: cfg.shift,
        ritz,
        state: KrylovState {
            psi: T::hessenberg(raw.psi),
            basis_degrees,
            basis,
            neutrality_matrix: raw.neutrality_matrix,
            skew_scale: raw.skew_scale,
        },
        diagnostics: raw.diagnostics,
        breakdown: raw.breakdown,
        history: raw.history,
        dropped_mu,
        elapsed: Duration::ZERO,
    }
}

fn dist(r: &RitzPair, shift: &Shift) -> f64 {
    let s = shift.sigma();
    r.lambdas.iter().map(|l| (l - s).norm()).fold(f64::INFINITY, f64::min)
}

fn normalized(v: DVector<C64>) -> DVector<C64> {
    let n = v.norm();
    if n > 0.0 {
        v / C64::new(n, 0.0)
    } else {
        v
    }
}

fn residual_or_inf(p: &DelayHamiltonianProblem, lambda: C64, v: &DVector<C64>) -> f64 {
    p.nlevp_residual(lambda, v).unwrap_or(f64::INFINITY)
}

/// Pair `±λ` (and conjugates) from `μ`, with eigenvector estimates split from the Ritz
/// function: if `φ = a e^{λθ} + b e^{-λθ}` then `a ∝ φ(0) + φ'(0)/λ`.
fn structured_pair(
    p: &DelayHamiltonianProblem,
    cfg: &SolverConfig,
    mu: C64,
    treated_real: bool,
    phi0: &DVector<C64>,
    dphi0: &DVector<C64>,
) -> RitzPair {
    let s2 = cfg.shift.sigma_squared();
    let (lam, class) = if treated_real {
        let x = 1.0 / mu.re + s2;
        if x < 0.0 {
            (C64::new(0.0, (-x).sqrt()), SymmetryClass::ImaginaryPair)
        } else {
            (C64::new(x.sqrt(), 0.0), SymmetryClass::RealPair)
        }
    } else {
        ((mu.inv() + s2).sqrt(), SymmetryClass::Quadruple)
    };

    let split = |l: C64| -> (DVector<C64>, f64) {
        if l.norm() == 0.0 {
            return (phi0.clone(), 0.0);
        }
        let d = dphi0 / l;
        let reference = phi0.norm() + d.norm();
        let v = phi0 + d;
        let ratio = if reference > 0.0 { v.norm() / reference } else { 0.0 };
        (v, ratio)
    };
    let (vp, rp) = split(lam);
    let (vm, rm) = split(-lam);
    // a component that cancels to rounding level carries no information; borrow the
    // partner's residual, which the spectral symmetry makes identical
    const NEGLIGIBLE: f64 = 1e-8;
    let mut res_p = if rp > NEGLIGIBLE {
        residual_or_inf(p, lam, &vp)
    } else {
        f64::NAN
    };
    let mut res_m = if rm > NEGLIGIBLE {
        residual_or_inf(p, -lam, &vm)
    } else {
        f64::NAN
    };
    if res_p.is_nan() && res_m.is_nan() {
        res_p = residual_or_inf(p, lam, phi0);
        res_m = residual_or_inf(p, -lam, phi0);
    } else if res_p.is_nan() {
        res_p = res_m;
    } else if res_m.is_nan() {
        res_m = res_p;
    }
    let (vp, vm) = match (rp > NEGLIGIBLE, rm > NEGLIGIBLE) {
        (true, true) => (vp, vm),
        (true, false) => (vp.clone(), conj(&vp)),
        (false, true) => (conj(&vm), vm),
        (false, false) => (phi0.clone(), phi0.clone()),
    };
    let (vp, vm) = (normalized(vp), normalized(vm));

    match class {
        SymmetryClass::Quadruple => RitzPair {
            mu,
            lambdas: vec![lam, -lam, lam.conj(), -lam.conj()],
            residuals: vec![res_p, res_m, res_p, res_m],
            vectors: vec![vp.clone(), vm.clone(), vp.map(|z| z.conj()), vm.map(|z| z.conj())],
            symmetry_class: class,
        },
        _ => RitzPair {
            mu,
            lambdas: vec![lam, -lam],
            residuals: vec![res_p, res_m],
            vectors: vec![vp, vm],
            symmetry_class: class,
        },
    }
}

// Stand-in vector for a missing component; exact for imaginary λ with real matrices.
fn conj(v: &DVector<C64>) -> DVector<C64> {
    v.map(|z| z.conj())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::make_example1;
    use std::f64::consts::PI;

    #[test]
    fn mode_and_start_parsing() {
        assert_eq!("plain-r".parse::<Mode>().unwrap(), Mode::PlainR);
        assert_eq!("J-Enforced".parse::<Mode>().unwrap(), Mode::JEnforced);
        assert!("other".parse::<Mode>().is_err());
        let v = StartFunction::Constant(vec![3.0, 4.0]).vector(2).unwrap();
        assert_eq!(v.as_slice(), &[0.6, 0.8]);
        assert!(StartFunction::Constant(vec![0.0, 0.0]).vector(2).is_err());
        let a = StartFunction::Random(7).vector(4).unwrap();
        let b = StartFunction::Random(7).vector(4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn back_transform_algebra() {
        let p = make_example1();
        let cfg = SolverConfig::new(Shift::zero(), 1);
        let z = DVector::from_element(2, C64::new(1.0, 0.0));
        let r = structured_pair(&p, &cfg, C64::new(-4.0 / (PI * PI), 0.0), true, &z, &z);
        assert_eq!(r.symmetry_class, SymmetryClass::ImaginaryPair);
        assert_eq!(r.lambdas[0].re, 0.0);
        assert_eq!(r.lambdas[1].re, 0.0);
        assert!((r.lambdas[0].im - PI / 2.0).abs() < 1e-15);
        assert_eq!(r.lambdas[1], -r.lambdas[0]);

        let r = structured_pair(&p, &cfg, C64::new(1.0, 0.0), true, &z, &z);
        assert_eq!(r.symmetry_class, SymmetryClass::RealPair);
        assert_eq!(r.lambdas, vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]);

        let r = structured_pair(&p, &cfg, C64::new(0.1, 0.05), false, &z, &z);
        assert_eq!(r.symmetry_class, SymmetryClass::Quadruple);
        let l = r.lambdas[0];
        for target in [l, -l, l.conj(), -l.conj()] {
            assert!(r.lambdas.contains(&target));
        }
        assert!((l * l - C64::new(0.1, 0.05).inv()).norm() < 1e-13);

        // μ = -1/σ² lands on λ = 0
        let cfg = SolverConfig::new(Shift::real(2.0), 1);
        let r = structured_pair(&p, &cfg, C64::new(-0.25, 0.0), true, &z, &z);
        assert_eq!(r.symmetry_class, SymmetryClass::RealPair);
        assert_eq!(r.lambdas[0], C64::new(0.0, 0.0));
    }

    #[test]
    fn rank_revealing_factorization() {
        let m = DMatrix::from_row_slice(4, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0, 1.0, -1.0, 0.0]);
        let (q, r) = rank_revealing_qr(m.clone(), 1e-12);
        assert_eq!(q.ncols(), 3);
        assert!((&q * &r - &m).amax() < 1e-14);
        assert!((q.transpose() * &q - DMatrix::identity(3, 3)).amax() < 1e-15);
        // a repeated column leaves rank two and is still reproduced
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 1.0, 0.0, 1.0, 0.0, 3.0, -1.0, 3.0]);
        let (q, r) = rank_revealing_qr(m.clone(), 1e-12);
        assert_eq!(q.ncols(), 2);
        assert!((&q * &r - &m).amax() < 1e-14);
    }

    #[test]
    fn eigenfunction_start_breaks_down() {
        // a constant null vector of H0 is an eigenfunction for λ = 0, so the Krylov
        // space is one-dimensional
        let h0 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let p = DelayHamiltonianProblem::new(h0, vec![], vec![], vec![]).unwrap();
        let cfg = SolverConfig::new(Shift::real(1.0), 5).with_start(StartFunction::Constant(vec![1.0, 0.0]));
        let r = run(&p, &cfg).unwrap();
        assert_eq!(r.breakdown, Some(1));
        assert_eq!(r.ritz.len(), 1);
        assert!((r.ritz[0].mu + 1.0).norm() < 1e-14);
        // x = 1/μ + σ² is zero up to rounding, so either pair class may come out
        assert_ne!(r.ritz[0].symmetry_class, SymmetryClass::Quadruple);
        assert!(r.ritz[0].lambdas[0].norm() < 1e-6);
        // λ = √x turns rounding in x into an O(√ε) eigenvalue error
        assert!(r.ritz[0].max_residual() < 1e-7);
    }

    #[test]
    fn example1_zero_shift_structured() {
        let p = make_example1();
        let cfg = SolverConfig::new(Shift::zero(), 21)
            .with_start(StartFunction::Constant(vec![0.6, 0.8]))
            .keeping_basis();
        let r = run(&p, &cfg).unwrap();
        assert!(matches!(r.state.psi, Hessenberg::Real(_)));
        assert!(r.diagnostics.iter().all(|d| d.neutrality <= 1e-12), "neutrality lost");
        assert!(r.diagnostics.iter().all(|d| d.orthogonality <= 1e-12));
        let hits = |w: f64| {
            r.ritz
                .iter()
                .filter(|rp| rp.lambdas.iter().any(|l| (l.im - w).abs() < 1e-6 && l.re == 0.0))
                .count()
        };
        assert_eq!(hits(PI / 2.0), 1);
        assert_eq!(hits(PI), 1);
    }
}
