mod common;

use std::f64::consts::PI;

use hamdelay::arnoldi::{run, Hessenberg};
use hamdelay::examples::make_example1;
use hamdelay::{Mode, Shift, SolverConfig, StartFunction, SymmetryClass, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{problem_scale, random_delays, random_hamiltonian_problem};

fn converged(result: &hamdelay::SolveResult, tol: f64) -> Vec<C64> {
    result
        .eigenvalues()
        .into_iter()
        .filter(|(_, res, _)| *res <= tol)
        .map(|(l, _, _)| l)
        .collect()
}

#[test]
fn every_mode_finds_the_example_eigenvalues() {
    let p = make_example1();
    for mode in Mode::ALL {
        let cfg = SolverConfig::new(Shift::imaginary(0.75 * PI), 21).with_mode(mode);
        let r = run(&p, &cfg).unwrap();
        let found = converged(&r, 1e-8);
        for omega in [PI / 2.0, PI] {
            let hit = found.iter().any(|l| (l - C64::new(0.0, omega)).norm() < 1e-8);
            assert!(hit, "{mode}: j{omega} missing from {found:?}");
        }
    }
}

#[test]
fn structured_runs_keep_a_real_hessenberg() {
    let p = make_example1();
    for mode in [Mode::PlainR, Mode::JEnforced] {
        for shift in [Shift::zero(), Shift::real(0.5), Shift::imaginary(2.0)] {
            let r = run(&p, &SolverConfig::new(shift, 10).with_mode(mode)).unwrap();
            assert!(matches!(r.state.psi, Hessenberg::Real(_)), "{mode} {shift}");
        }
    }
}

#[test]
fn seeded_start_is_reproducible() {
    let p = make_example1();
    let cfg = SolverConfig::new(Shift::imaginary(2.0), 15).with_start(StartFunction::Random(7));
    let a = run(&p, &cfg).unwrap().eigenvalues();
    let b = run(&p, &cfg).unwrap().eigenvalues();
    assert_eq!(a, b);
}

#[test]
fn converged_values_are_singular_points_of_the_characteristic_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    for trial in 0..12 {
        let delays = random_delays(&mut rng, 2);
        let p = random_hamiltonian_problem(&mut rng, 2, &delays);
        let shift = if trial % 2 == 0 {
            Shift::real(0.3)
        } else {
            Shift::imaginary(0.7)
        };
        let r = run(&p, &SolverConfig::new(shift, 30)).unwrap();
        let scale = problem_scale(&p);
        for l in converged(&r, 1e-10) {
            // independent check: smallest singular value of M(λ)
            let m = p.eval_char_matrix(l);
            let sv = m.singular_values();
            let smallest = sv.iter().copied().fold(f64::INFINITY, f64::min);
            let weight = 1.0 + l.norm() + scale * (1.0 + delays.iter().map(|t| (l.re * t).abs().exp()).sum::<f64>());
            assert!(smallest <= 1e-7 * weight, "trial {trial}: {l} gives {smallest:.2e}");
            checked += 1;
        }
        for (l, _, class) in r.eigenvalues() {
            if class != SymmetryClass::Unstructured {
                assert!(
                    r.eigenvalues().iter().any(|(o, _, _)| *o == -l),
                    "trial {trial}: -{l} missing"
                );
            }
        }
    }
    assert!(checked > 0);
}
