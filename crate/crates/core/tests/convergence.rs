mod common;

use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{random_values, skew_m_matrix, symmetric_with_spectrum, uniform_vector};
use rkl::exact;
use rkl::experiments::{self, EnsembleConfig};
use rkl::solvers::{self, Method, SolveConfig, Termination};
use rkl::theory::{self, MapKind, Prediction};
use rkl::{DenseMatrix, DenseVector};

fn cfg(tol: f64, max_iters: usize) -> SolveConfig {
    SolveConfig {
        tol,
        max_iters,
        record_vectors: true,
        ..SolveConfig::default()
    }
}

#[test]
fn raa1_from_first_counterexample_settles_on_a_two_mode_cycle() {
    // r₀ = v₁ = [15, 5, 1]; after one half cycle the residual is
    // u = [0, 555/167, 500/167], a two-mode vector with ε = 100/111.
    let a = experiments::builtin_matrix("A1").unwrap();
    let x0 = DenseVector::new(vec![15.0, 2.5, 1.0 / 3.0]).unwrap();
    let (_, trace) = solvers::raa1(&a, &DenseVector::zeros(3), &x0, &cfg(1e-30, 400)).unwrap();
    assert_eq!(trace.termination, Termination::Converged);
    let r = trace.residuals.as_ref().unwrap();
    let u = DenseVector::new(vec![0.0, 555.0 / 167.0, 500.0 / 167.0]).unwrap();
    assert!(r[2].sub(&u).unwrap().norm2() <= 1e-13 * u.norm2());

    let mu = theory::mu_upsilon(2.0, 3.0, 100.0 / 111.0);
    let n = &trace.residual_norms;
    for k in (2..n.len() - 4).step_by(4) {
        assert_relative_eq!(n[k + 4] / n[k], mu, max_relative = 1e-9);
    }
    let tail = trace.final_rho();
    assert!((tail - mu.powf(0.25)).abs() < 2e-2, "{tail} vs {}", mu.powf(0.25));
}

#[test]
fn raa1_cycle_matches_exact_upsilon_image() {
    let (a, v) = exact::counterexample(1).unwrap();
    let w = exact::upsilon_exact(&a, &v).unwrap().to_dense().unwrap();
    let ad = experiments::builtin_matrix("CA1").unwrap();
    let vd = v.to_dense().unwrap();
    let image = theory::apply_map(&ad, MapKind::Upsilon, &vd).unwrap();
    assert!(image.sub(&w).unwrap().norm2() <= 1e-14 * w.norm2());
}

#[test]
fn structured_prediction_matches_measured_factor() {
    let a2 = experiments::builtin_matrix("A2").unwrap();
    for (x0, want) in [
        (vec![1.0, 2.0 * 2f64.sqrt(), 0.0, 0.0, 0.0], 1.0 / 3.0),
        (vec![1.0, 0.0, 8.0, 0.0, 0.0], 0.6),
        (vec![0.0, 0.0, 0.0, 1.0, 0.0], 0.0),
    ] {
        let run = experiments::run_structured(&a2, &DenseVector::new(x0).unwrap(), 1e-30, 10_000).unwrap();
        let p = run.prediction.unwrap();
        assert!(p.is_exact());
        assert!((p.value() - want).abs() < 1e-12, "{p:?} vs {want}");
        let ratios = run.trace.step_ratios();
        if want > 0.0 {
            let last = *ratios.last().unwrap();
            assert!((last - want).abs() < 1e-9, "{last} vs {want}");
        } else {
            assert_eq!(run.trace.iterations(), 1);
        }
    }
    let run = experiments::run_structured(&a2, &DenseVector::new(vec![1.0; 5]).unwrap(), 1e-30, 10_000).unwrap();
    assert!(matches!(run.prediction, Some(Prediction::Bound(b)) if (b - 15.0 / 17.0).abs() < 1e-12));
}

#[test]
fn indefinite_neutral_start_stagnates() {
    let a3 = experiments::builtin_matrix("A3").unwrap();
    // r₀ = A x₀ = [−√2, 1, 0, 0] has ⟨A r₀, r₀⟩ = −2 + 2 = 0.
    let x0 = DenseVector::new(vec![2f64.sqrt(), 0.5, 0.0, 0.0]).unwrap();
    let (_, trace) = solvers::gmres1(&a3, &DenseVector::zeros(4), &x0, &cfg(1e-30, 100)).unwrap();
    assert_eq!(trace.termination, Termination::Stagnated);
    assert!(trace.termination.is_success());
}

#[test]
fn gmres1_skew_block_start_stays_in_block() {
    let a4 = experiments::builtin_matrix("A4").unwrap();
    let theory::Structure::SkewM(blocks) = theory::classify(&a4).unwrap() else {
        panic!("A4 is skew");
    };
    let (q, qt) = blocks.block_basis(0).unwrap();
    let x0 = q.add(&qt.scaled(-0.4)).unwrap();
    let (_, trace) = solvers::gmres1(&a4, &DenseVector::zeros(8), &x0, &cfg(1e-300, 60)).unwrap();
    for r in trace.residuals.as_ref().unwrap() {
        let inside = blocks.project_onto_block(0, r).unwrap();
        assert!(r.sub(&inside).unwrap().norm2() <= 1e-12 * trace.residual_norms[0]);
    }
    for ratio in trace.step_ratios() {
        assert_relative_eq!(ratio, 0.5f64.sqrt(), max_relative = 1e-12);
    }
    // α is constant on a block: 1/(1 + m²)
    for al in trace.alphas.iter().flatten() {
        assert_relative_eq!(*al, 0.5, max_relative = 1e-12);
    }
}

#[test]
fn methods_agree_on_the_solution() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let values = random_values(&mut rng, 5, 0.3, 1.6, false);
    let a = symmetric_with_spectrum(&mut rng, &values);
    let b = uniform_vector(&mut rng, 5);
    let x0 = DenseVector::zeros(5);
    let exact_x = a.solve(&b).unwrap();
    for method in [Method::Gmres1, Method::Raa1, Method::Stationary] {
        let (x, trace) = solvers::solve(method, &a, &b, &x0, &cfg(1e-12, 100_000)).unwrap();
        assert_eq!(trace.termination, Termination::Converged, "{method}");
        assert!(x.sub(&exact_x).unwrap().norm2() < 1e-10, "{method}");
    }
}

#[test]
fn ensembles_are_reproducible_and_seed_sensitive() {
    let base = EnsembleConfig {
        matrix: "A2".into(),
        trials: 16,
        seed: 5,
        ..EnsembleConfig::default()
    };
    let a = experiments::run_ensemble(&base).unwrap();
    let b = experiments::run_ensemble(&base).unwrap();
    let norms = |r: &experiments::EnsembleResult| -> Vec<Vec<u64>> {
        r.trials
            .iter()
            .map(|t| t.trace.residual_norms.iter().map(|x| x.to_bits()).collect())
            .collect()
    };
    assert_eq!(norms(&a), norms(&b));
    let mut other = base.clone();
    other.seed = 6;
    let c = experiments::run_ensemble(&other).unwrap();
    assert_ne!(norms(&a), norms(&c));

    let mut csv = Vec::new();
    a.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let rows = text.lines().count() - 1;
    let expected: usize = a.trials.iter().map(|t| t.trace.residual_norms.len()).sum();
    assert_eq!(rows, expected);
    assert!(text.starts_with(experiments::CSV_HEADER));
}

#[test]
fn ensemble_step_ratios_respect_the_q_factor() {
    for name in ["A1", "A2", "A4"] {
        let cfg = EnsembleConfig {
            matrix: name.into(),
            trials: 50,
            seed: 2,
            ..EnsembleConfig::default()
        };
        let r = experiments::run_ensemble(&cfg).unwrap();
        assert!(r.bounded);
        for t in &r.trials {
            for ratio in t.trace.step_ratios() {
                assert!(ratio <= r.theoretical_rho + 1e-12, "{name}: {ratio}");
            }
        }
    }
}

fn spd(values: &[f64], seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    symmetric_with_spectrum(&mut rng, values)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gmres1_is_q_linear_with_nondecreasing_ratios(
        values in prop::collection::vec(0.05f64..20.0, 2..8),
        seed in any::<u64>(),
    ) {
        let a = spd(&values, seed);
        let sigma = theory::qfactor(&a).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let x0 = uniform_vector(&mut rng, values.len());
        let (_, trace) = solvers::gmres1(&a, &DenseVector::zeros(values.len()), &x0, &cfg(1e-200, 20_000)).unwrap();
        let ratios = trace.step_ratios();
        for w in ratios.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12);
        }
        for q in ratios {
            prop_assert!(q <= sigma + 1e-12);
        }
    }

    #[test]
    fn skew_m_gmres1_respects_its_factor(n in 2usize..10, scale in 0.05f64..2.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = skew_m_matrix(&mut rng, n, scale);
        let sigma = theory::qfactor(&a).unwrap();
        let x0 = uniform_vector(&mut rng, n);
        let (_, trace) = solvers::gmres1(&a, &DenseVector::zeros(n), &x0, &cfg(1e-200, 20_000)).unwrap();
        for q in trace.step_ratios() {
            prop_assert!(q <= sigma + 1e-12);
        }
    }

    #[test]
    fn traces_scale_exactly_with_powers_of_two(k in -40i32..40, seed in any::<u64>()) {
        let a = experiments::builtin_matrix("A2").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x0 = uniform_vector(&mut rng, 5);
        let c = 2f64.powi(k);
        let conf = SolveConfig { tol: 1e-300, max_iters: 50, ..SolveConfig::default() };
        let (_, t1) = solvers::gmres1(&a, &DenseVector::zeros(5), &x0, &conf).unwrap();
        let (_, t2) = solvers::gmres1(&a, &DenseVector::zeros(5), &x0.scaled(c), &conf).unwrap();
        prop_assert_eq!(&t1.alphas, &t2.alphas);
        for (x, y) in t1.residual_norms.iter().zip(&t2.residual_norms) {
            prop_assert_eq!(x * c, *y);
        }
    }

    #[test]
    fn raa1_two_step_identity(values in prop::collection::vec(0.1f64..1.9, 2..7), seed in any::<u64>()) {
        let a = spd(&values, seed);
        let m = a.iteration_matrix();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        let x0 = uniform_vector(&mut rng, values.len());
        let (_, trace) = solvers::raa1(&a, &DenseVector::zeros(values.len()), &x0, &cfg(1e-200, 30)).unwrap();
        let r = trace.residuals.unwrap();
        for k in (0..r.len().saturating_sub(2)).step_by(2) {
            let rhs = m.matvec(&rkl::phi_map(&a, &r[k]).unwrap()).unwrap();
            prop_assert!(r[k + 2].sub(&rhs).unwrap().norm2() <= 1e-10 * r[k].norm2());
        }
    }
}
