//! Helpers shared by the integration tests.
#![allow(dead_code)]

use hamdelay::{ChebFunction, DelayHamiltonianProblem, StructuredJ};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random problem satisfying the structure conditions: `H0 = -J Sym`, `Hpos = -J (J Hneg)ᵀ`.
pub fn random_hamiltonian_problem(rng: &mut ChaCha8Rng, n: usize, delays: &[f64]) -> DelayHamiltonianProblem {
    let size = 2 * n;
    let j = StructuredJ::new(n);
    let a = DMatrix::from_fn(size, size, |_, _| rng.random_range(-1.0..1.0));
    let h0 = -j.left_mul(&((&a + a.transpose()) * 0.5));
    let mut hneg = Vec::new();
    let mut hpos = Vec::new();
    for _ in delays {
        let b = DMatrix::from_fn(size, size, |_, _| rng.random_range(-0.5..0.5));
        hpos.push(-j.left_mul(&j.left_mul(&b).transpose()));
        hneg.push(b);
    }
    DelayHamiltonianProblem::new(h0, hneg, hpos, delays.to_vec()).unwrap()
}

/// Increasing delays in `(0, 1.5]`, between zero and `max` of them.
pub fn random_delays(rng: &mut ChaCha8Rng, max: usize) -> Vec<f64> {
    let k = rng.random_range(0..=max);
    let mut d: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.5)).collect();
    d.sort_by(f64::total_cmp);
    d.dedup_by(|a, b| (*a - *b).abs() < 0.05);
    d
}

pub fn random_fn(rng: &mut ChaCha8Rng, rows: usize, degree: usize, tau: f64) -> ChebFunction<f64> {
    ChebFunction::new(
        DMatrix::from_fn(rows, degree + 1, |_, _| rng.random_range(-1.0..1.0)),
        tau,
    )
    .unwrap()
}

pub fn problem_scale(p: &DelayHamiltonianProblem) -> f64 {
    p.h0().norm() + p.hneg().iter().chain(p.hpos()).map(|h| h.norm()).sum::<f64>()
}
