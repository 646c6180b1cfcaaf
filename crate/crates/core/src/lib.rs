//! Structure-preserving shift-invert infinite Arnoldi for Hamiltonian delay eigenvalue
//! problems.
//!
//! The solver targets characteristic matrices of the form
//! `M(λ) = λI - H0 - Σ_k (Hneg[k] e^{-λτ_k} + Hpos[k] e^{λτ_k})` whose spectrum is
//! symmetric under `λ ↦ -λ` and conjugation. Eigenvalues closest to a real or imaginary
//! shift `σ` are found by running Arnoldi on the inverse of
//! `R_σ = (H - σ)(H + σ)` acting on Chebyshev-represented functions, while keeping the
//! Krylov basis neutral for the associated skew form. The computed eigenvalues then come
//! out in exactly symmetric pairs.
//!
//! ```no_run
//! use hamdelay::{arnoldi, examples, Shift, SolverConfig, Mode};
//!
//! let problem = examples::make_example1();
//! let cfg = SolverConfig::new(Shift::zero(), 21).with_mode(Mode::JEnforced);
//! let result = arnoldi::run(&problem, &cfg).unwrap();
//! for pair in &result.ritz {
//!     println!("{:?} residual {:?}", pair.lambdas, pair.residuals);
//! }
//! ```

pub mod arnoldi;
pub mod bilinear;
pub mod chebyshev;
pub mod cli;
pub mod error;
pub mod examples;
pub mod io;
pub mod linalg;
pub mod operator;
pub mod problem;
pub mod quadrature;

pub use arnoldi::{Mode, RitzPair, SolveResult, SolverConfig, StartFunction, SymmetryClass};
pub use bilinear::SkewForm;
pub use chebyshev::{ChebFunction, InterpOptions};
pub use error::{Error, Result};
pub use linalg::C64;
pub use operator::ShiftedOperator;
pub use problem::{build_hinf_problem, DelayHamiltonianProblem, Shift, ShiftKind, StructuredJ, ValidationReport};
