//! The skew pairing `[φ, Jψ]` on Chebyshev coefficients.
//!
//! For `φ = Σ f_l T_l(θ/τ_K)` and `ψ = Σ g_l T_l(θ/τ_K)` the pairing is the quadratic form
//! `gᵀ S_N f` on stacked coefficients, where
//!
//! ```text
//! S_N = S0 ⊗ J + Σ_k ( Sneg[k] ⊗ (J Hneg[k]) + Spos[k] ⊗ (J Hpos[k]) )
//! ```
//!
//! `S_N` is skew-symmetric and is only ever applied through
//! `(A ⊗ B) vec(X) = vec(B X Aᵀ)`, never formed.

use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::chebyshev::{chebyshev_t, ChebFunction};
use crate::error::{Error, Result};
use crate::linalg::{BlockOperator, Scalar};
use crate::problem::{DelayHamiltonianProblem, StructuredJ};
use crate::quadrature::gauss_legendre_on;

#[derive(Clone, Debug)]
pub struct SkewForm {
    j: StructuredJ,
    delays: Vec<f64>,
    half_width: f64,
    degree: usize,
    s0: DMatrix<f64>,
    sneg: Vec<DMatrix<f64>>,
    spos: Vec<DMatrix<f64>>,
    // J·Hneg[k] and J·Hpos[k], shared between extensions
    jhneg: Arc<Vec<BlockOperator>>,
    jhpos: Arc<Vec<BlockOperator>>,
    hnorms: Vec<(f64, f64)>,
}

fn t_at_zero(l: usize) -> f64 {
    if l % 2 == 1 {
        0.0
    } else if (l / 2).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

impl SkewForm {
    pub fn build(p: &DelayHamiltonianProblem, degree: usize) -> Self {
        let j = p.j();
        let jhneg: Vec<_> = p.hneg().iter().map(|h| BlockOperator::new(j.left_mul(h))).collect();
        let jhpos: Vec<_> = p.hpos().iter().map(|h| BlockOperator::new(j.left_mul(h))).collect();
        let hnorms = jhneg.iter().zip(&jhpos).map(|(a, b)| (a.norm(), b.norm())).collect();
        let k = p.num_delays();
        let mut sf = SkewForm {
            j,
            delays: p.delays().to_vec(),
            half_width: p.half_width(),
            degree: 0,
            s0: DMatrix::zeros(0, 0),
            sneg: vec![DMatrix::zeros(0, 0); k],
            spos: vec![DMatrix::zeros(0, 0); k],
            jhneg: Arc::new(jhneg),
            jhpos: Arc::new(jhpos),
            hnorms,
        };
        sf.fill(0, degree);
        sf
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Size `2n` of the coefficient vectors.
    pub fn rows(&self) -> usize {
        2 * self.j.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn s0(&self) -> &DMatrix<f64> {
        &self.s0
    }

    pub fn sneg(&self) -> &[DMatrix<f64>] {
        &self.sneg
    }

    pub fn spos(&self) -> &[DMatrix<f64>] {
        &self.spos
    }

    /// Grows the blocks to `degree`, keeping every existing entry unchanged.
    pub fn extend(&mut self, degree: usize) {
        if degree > self.degree {
            let old = self.degree + 1;
            self.fill(old, degree);
        }
    }

    pub fn extended(&self, degree: usize) -> Self {
        let mut out = self.clone();
        out.extend(degree);
        out
    }

    // computes rows and columns with index >= `from` (0 means everything)
    fn fill(&mut self, from: usize, degree: usize) {
        let size = degree + 1;
        let tau_k = self.half_width;

        let mut s0 = DMatrix::zeros(size, size);
        if from > 0 {
            s0.view_mut((0, 0), (from, from)).copy_from(&self.s0);
        }
        for l1 in 0..size {
            for l2 in 0..size {
                if l1 >= from || l2 >= from {
                    s0[(l1, l2)] = -t_at_zero(l1) * t_at_zero(l2);
                }
            }
        }
        self.s0 = s0;

        for (k, &tau) in self.delays.iter().enumerate() {
            let (nodes, weights) = gauss_legendre_on(size, 0.0, tau);
            // a[l, q] = w_q T_l(θ_q/τ_K), b[l, q] = T_l((θ_q - τ)/τ_K)
            let mut a = DMatrix::<f64>::zeros(size, nodes.len());
            let mut b = DMatrix::<f64>::zeros(size, nodes.len());
            for (q, (&x, &w)) in nodes.iter().zip(&weights).enumerate() {
                let ta = chebyshev_t(degree, x / tau_k);
                let tb = chebyshev_t(degree, (x - tau) / tau_k);
                for l in 0..size {
                    a[(l, q)] = w * ta[l];
                    b[(l, q)] = tb[l];
                }
            }
            let mut sneg = DMatrix::zeros(size, size);
            if from > 0 {
                sneg.view_mut((0, 0), (from, from)).copy_from(&self.sneg[k]);
            }
            // new rows
            let rows_new = -(a.rows(from, size - from) * b.transpose());
            sneg.rows_mut(from, size - from).copy_from(&rows_new);
            if from > 0 {
                let cols_new = -(a.rows(0, from) * b.rows(from, size - from).transpose());
                sneg.view_mut((0, from), (from, size - from)).copy_from(&cols_new);
            }
            self.spos[k] = -sneg.transpose();
            self.sneg[k] = sneg;
        }
        self.degree = degree;
    }

    /// Crude upper bound on `‖S_N‖₂` used to scale neutrality checks.
    pub fn scale(&self) -> f64 {
        let mut s = self.s0.norm();
        for (k, (a, b)) in self.hnorms.iter().enumerate() {
            s += self.sneg[k].norm() * a + self.spos[k].norm() * b;
        }
        s
    }

    fn check(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.nrows() != self.rows() || x.ncols() > self.degree + 1 {
            return Err(Error::DimensionMismatch(format!(
                "coefficient block {}x{} for skew form with {} rows and degree {}",
                x.nrows(),
                x.ncols(),
                self.rows(),
                self.degree
            )));
        }
        Ok(())
    }

    /// Columns `range` of `S_N x`, with `x` given as a `2n x (d+1)` coefficient block,
    /// `d <= N`, implicitly padded with zeros.
    pub fn apply_columns(&self, x: &DMatrix<f64>, range: Range<usize>) -> Result<DMatrix<f64>> {
        self.check(x)?;
        if range.end > self.degree + 1 || range.start > range.end {
            return Err(Error::DimensionMismatch(format!(
                "column range {range:?} outside degree {}",
                self.degree
            )));
        }
        let cols = x.ncols();
        let width = range.end - range.start;
        let block = |s: &DMatrix<f64>| s.view((range.start, 0), (width, cols)).transpose();
        let mut out = self.j.apply(&(x * block(&self.s0)));
        // pick the cheaper association of B·X·Sᵀ
        let left_first = cols <= width;
        for k in 0..self.delays.len() {
            for (bmat, s) in [(&self.jhneg[k], &self.sneg[k]), (&self.jhpos[k], &self.spos[k])] {
                if left_first {
                    out += bmat.mul(x) * block(s);
                } else {
                    out += bmat.mul(&(x * block(s)));
                }
            }
        }
        Ok(out)
    }

    /// `S_N x` as a `2n x (N+1)` block.
    pub fn apply_block(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.apply_columns(x, 0..self.degree + 1)
    }

    /// `S_N q` for a stacked coefficient vector of length `2n (N+1)`.
    pub fn apply(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        let rows = self.rows();
        if q.len() != rows * (self.degree + 1) {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} for skew form of size {}",
                q.len(),
                rows * (self.degree + 1)
            )));
        }
        let x = DMatrix::from_column_slice(rows, self.degree + 1, q.as_slice());
        let y = self.apply_block(&x)?;
        Ok(DVector::from_column_slice(y.as_slice()))
    }

    /// `[f, J g] = gᵀ S_N f` for real expansions.
    pub fn pairing(&self, f: &ChebFunction<f64>, g: &ChebFunction<f64>) -> Result<f64> {
        let sf = self.apply_block(f.coeffs())?;
        let len = g.coeffs().len();
        Ok(g.stacked().iter().zip(&sf.as_slice()[..len]).map(|(a, b)| a * b).sum())
    }

    /// Dense `S_N`; test-sized problems only.
    pub fn assemble_dense(&self) -> DMatrix<f64> {
        let jd = self.j.dense();
        let mut s = self.s0.kronecker(&jd);
        for k in 0..self.delays.len() {
            s += self.sneg[k].kronecker(&self.jhneg[k].to_dense());
            s += self.spos[k].kronecker(&self.jhpos[k].to_dense());
        }
        s
    }
}

/// `[f, g] = g(0)ᵀ f(0) + Σ_k ( ∫_0^{τ_k} g(θ)ᵀ Hneg[k] f(θ-τ_k) dθ
///                              - ∫_0^{τ_k} g(θ-τ_k)ᵀ Hpos[k] f(θ) dθ )`
/// by Gauss–Legendre quadrature exact for the degrees involved. Transposes, not
/// conjugates.
pub fn bilinear_direct<T: Scalar>(p: &DelayHamiltonianProblem, f: &ChebFunction<T>, g: &ChebFunction<T>) -> Result<T> {
    if (f.half_width() - g.half_width()).abs() > 1e-14 * f.half_width() {
        return Err(Error::DomainMismatch(f.half_width(), g.half_width()));
    }
    if f.rows() != p.dim() || g.rows() != p.dim() {
        return Err(Error::DimensionMismatch(format!(
            "functions with {} and {} rows for a problem of size {}",
            f.rows(),
            g.rows(),
            p.dim()
        )));
    }
    let dot = |a: &DVector<T>, b: &DVector<T>| a.iter().zip(b.iter()).fold(T::zero(), |s, (x, y)| s + *x * *y);
    let hmul = |h: &DMatrix<f64>, v: &DVector<T>| {
        DVector::from_fn(v.len(), |i, _| {
            (0..v.len()).fold(T::zero(), |s, j| s + T::from_real(h[(i, j)]) * v[j])
        })
    };
    let mut total = dot(&g.eval(0.0), &f.eval(0.0));
    let nodes = (f.degree() + g.degree()) / 2 + 2;
    for (k, &tau) in p.delays().iter().enumerate() {
        let (xs, ws) = gauss_legendre_on(nodes, 0.0, tau);
        for (&x, &w) in xs.iter().zip(&ws) {
            let w = T::from_real(w);
            total += dot(&g.eval(x), &hmul(&p.hneg()[k], &f.eval(x - tau))) * w;
            total -= dot(&g.eval(x - tau), &hmul(&p.hpos()[k], &f.eval(x))) * w;
        }
    }
    Ok(total)
}

/// `J ψ` applied coefficient-wise.
pub fn apply_j<T: Scalar>(j: &StructuredJ, f: &ChebFunction<T>) -> ChebFunction<T> {
    ChebFunction::from_parts(j.apply(f.coeffs()), f.half_width())
}
