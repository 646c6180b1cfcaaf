//! Dense linear-algebra helpers shared by the solver modules.

use nalgebra::{ComplexField, DMatrix, DVector, Schur, LU};
use nalgebra_sparse::CscMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Field the Chebyshev carriers and Krylov bases are generic over: `f64` or `Complex64`.
pub trait Scalar: ComplexField<RealField = f64> + Copy {
    fn to_c64(self) -> C64;
    /// Drops the imaginary part when `Self` is real.
    fn from_c64(z: C64) -> Self;
}

impl Scalar for f64 {
    fn to_c64(self) -> C64 {
        C64::new(self, 0.0)
    }
    fn from_c64(z: C64) -> Self {
        z.re
    }
}

impl Scalar for C64 {
    fn to_c64(self) -> C64 {
        self
    }
    fn from_c64(z: C64) -> Self {
        z
    }
}

pub fn to_complex_matrix<T: Scalar>(m: &DMatrix<T>) -> DMatrix<C64> {
    m.map(|x| x.to_c64())
}

/// `a * v` for real `a` and complex `v`, computed as two real products.
pub fn real_mul_complex(a: &DMatrix<f64>, v: &DVector<C64>) -> DVector<C64> {
    let re = a * v.map(|z| z.re);
    let im = a * v.map(|z| z.im);
    DVector::from_fn(v.len(), |i, _| C64::new(re[i], im[i]))
}

/// Pivots below this fraction of the largest pivot flag a singular shift.
const PIVOT_RATIO_FLOOR: f64 = 1e3 * f64::EPSILON;

/// LU factorization of a characteristic matrix, real or complex.
#[derive(Clone, Debug)]
pub enum Factorization {
    Real(LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
    Complex(LU<C64, nalgebra::Dyn, nalgebra::Dyn>),
}

fn pivot_ratio<T: Scalar>(u: &DMatrix<T>) -> f64 {
    let diag = u.diagonal();
    let max = diag.iter().map(|x| x.modulus()).fold(0.0, f64::max);
    let min = diag.iter().map(|x| x.modulus()).fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        0.0
    } else {
        min / max
    }
}

impl Factorization {
    pub fn real(m: DMatrix<f64>, label: &str) -> Result<Self> {
        let lu = m.lu();
        let ratio = pivot_ratio(&lu.u());
        if ratio.is_nan() || ratio <= PIVOT_RATIO_FLOOR {
            return Err(Error::SingularShift {
                shift: label.to_string(),
                pivot_ratio: ratio,
            });
        }
        Ok(Factorization::Real(lu))
    }

    pub fn complex(m: DMatrix<C64>, label: &str) -> Result<Self> {
        let lu = m.lu();
        let ratio = pivot_ratio(&lu.u());
        if ratio.is_nan() || ratio <= PIVOT_RATIO_FLOOR {
            return Err(Error::SingularShift {
                shift: label.to_string(),
                pivot_ratio: ratio,
            });
        }
        Ok(Factorization::Complex(lu))
    }

    pub fn solve_real(&self, b: &DVector<f64>) -> DVector<f64> {
        match self {
            Factorization::Real(lu) => lu.solve(b).expect("factorization checked nonsingular"),
            Factorization::Complex(lu) => {
                let x = lu
                    .solve(&b.map(|x| C64::new(x, 0.0)))
                    .expect("factorization checked nonsingular");
                x.map(|z| z.re)
            }
        }
    }

    pub fn solve(&self, b: &DVector<C64>) -> DVector<C64> {
        match self {
            Factorization::Real(lu) => {
                let re = lu.solve(&b.map(|z| z.re)).expect("factorization checked nonsingular");
                let im = lu.solve(&b.map(|z| z.im)).expect("factorization checked nonsingular");
                DVector::from_fn(b.len(), |i, _| C64::new(re[i], im[i]))
            }
            Factorization::Complex(lu) => lu.solve(b).expect("factorization checked nonsingular"),
        }
    }

    /// Solves `conj(A) x = b` using the factorization of `A`.
    pub fn solve_conjugate(&self, b: &DVector<C64>) -> DVector<C64> {
        self.solve(&b.map(|z| z.conj())).map(|z| z.conj())
    }
}

/// Eigenvalues of a real square matrix. Real eigenvalues come back with an exactly zero
/// imaginary part and complex ones in exact conjugate pairs.
pub fn real_eigenvalues(a: &DMatrix<f64>) -> Vec<C64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let schur = Schur::new(a.clone());
    schur.complex_eigenvalues().iter().copied().collect()
}

pub fn complex_eigenvalues(a: &DMatrix<C64>) -> Vec<C64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let schur = Schur::new(a.clone());
    let (_, t) = schur.unpack();
    t.diagonal().iter().copied().collect()
}

/// Eigenvector of `a` for the (approximate) eigenvalue `mu` by shifted inverse iteration.
pub fn inverse_iteration(a: &DMatrix<C64>, mu: C64) -> DVector<C64> {
    let m = a.nrows();
    let scale = a.norm().max(mu.norm()).max(f64::MIN_POSITIVE);
    let mut x = DVector::from_fn(m, |i, _| C64::new(1.0 + 0.1 * i as f64, 0.05 * i as f64));
    x /= C64::new(x.norm(), 0.0);
    let mut perturb = 1e-10 * scale;
    for _ in 0..8 {
        let shifted = a - DMatrix::<C64>::identity(m, m) * (mu + C64::new(perturb, perturb));
        let lu = shifted.lu();
        if let Some(y) = lu.solve(&x) {
            let norm = y.norm();
            if norm.is_finite() && norm > 0.0 {
                x = y / C64::new(norm, 0.0);
                let y2 = lu.solve(&x).unwrap_or_else(|| x.clone());
                let n2 = y2.norm();
                if n2.is_finite() && n2 > 0.0 {
                    x = y2 / C64::new(n2, 0.0);
                }
                return x;
            }
        }
        perturb *= 10.0;
    }
    x
}

pub fn max_abs<T: Scalar>(m: &DMatrix<T>) -> f64 {
    m.iter().map(|x| x.modulus()).fold(0.0, f64::max)
}

/// Fixed left operand of repeated products, kept compressed when mostly zero.
#[derive(Clone, Debug)]
pub enum BlockOperator {
    Dense(DMatrix<f64>),
    Sparse(CscMatrix<f64>),
}

impl BlockOperator {
    /// Fill fraction below which the compressed form is used.
    pub const SPARSE_FILL: f64 = 0.1;

    pub fn new(m: DMatrix<f64>) -> Self {
        let nnz = m.iter().filter(|x| **x != 0.0).count();
        if (nnz as f64) <= Self::SPARSE_FILL * m.len() as f64 {
            BlockOperator::Sparse(CscMatrix::from(&m))
        } else {
            BlockOperator::Dense(m)
        }
    }

    pub fn mul(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            BlockOperator::Dense(m) => m * x,
            BlockOperator::Sparse(m) => m * x,
        }
    }

    pub fn norm(&self) -> f64 {
        match self {
            BlockOperator::Dense(m) => m.norm(),
            BlockOperator::Sparse(m) => m.values().iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            BlockOperator::Dense(m) => m.clone(),
            BlockOperator::Sparse(m) => DMatrix::from(m),
        }
    }
}
