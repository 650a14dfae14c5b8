use potlab::embedding::SearchOptions;
use potlab::quadrature::QuadratureOptions;
use potlab::riesz::{build_counterexample, counterexample_sweep, discretization_check, CounterexampleConfig};
use potlab::suite::{csv_string, generate_suite, run_sandwich, run_semigroup, Family, SuiteConfig};

#[test]
fn measure_conditions_hold_and_the_sum_diverges() {
    let ce = build_counterexample(&CounterexampleConfig { pieces: 5000, ..Default::default() }).unwrap();
    assert_eq!(ce.first_index, 3);
    assert!(ce.conditions.convergent_within_ceilings());
    // c_k a_k^q / eps_k = 1/(k log(k+1)) term by term
    let rel = (ce.conditions.divergent_sum / ce.conditions.harmonic_log_sum - 1.0).abs();
    assert!(rel < 1e-12, "{rel}");
}

#[test]
fn kappa_grows_while_the_other_functionals_settle() {
    let cfg = CounterexampleConfig::default();
    let s = counterexample_sweep(&cfg, &[100, 300, 1000], &QuadratureOptions::default()).unwrap();
    let growth: Vec<f64> = s.windows(2).map(|w| w[1].kappa_lower - w[0].kappa_lower).collect();
    let oracle =
        |lo: usize, hi: usize| -> f64 { (lo + 1..=hi).map(|k| 2.0 / (k as f64 * ((k + 1) as f64).ln())).sum() };
    assert!(growth[0] >= 0.5 * oracle(100, 300));
    assert!(growth[1] >= 0.5 * oracle(300, 1000));
    let e = (s[2].energy_bound - s[1].energy_bound) / s[1].energy_bound;
    let k = (s[2].k_value - s[1].k_value).abs() / s[1].k_value;
    assert!(e < 0.05 && k < 1e-3, "energy {e}, K {k}");
}

#[test]
fn discretized_measure_dominates_kappa() {
    for pieces in [4, 10] {
        let chk = discretization_check(&CounterexampleConfig { pieces, ..Default::default() }, 20).unwrap();
        assert!(chk.holds(1e-10), "{chk:?}");
    }
}

#[test]
fn single_precision_paths_run() {
    let rows =
        run_semigroup(&[(0.25f32, 0.75)], 1e-2, &QuadratureOptions { rel_tol: 1e-5, ..Default::default() }).unwrap();
    assert!(rows[0].ok, "{rows:?}");
    let cfg = SuiteConfig { seed: 3, per_family: 2, min_atoms: 3, max_atoms: 5 };
    let inst = generate_suite::<f32>(&Family::THEOREM, &cfg).unwrap();
    let o = SearchOptions { restarts: 2, tol: 1e-6, ..Default::default() };
    let rows = run_sandwich(&inst, &[(2.0, 1.0)], &o).unwrap();
    assert!(rows.iter().all(|r| r.c_lower <= r.c_upper));
}

#[test]
fn thread_count_does_not_change_output() {
    let cfg = SuiteConfig { seed: 99, per_family: 5, min_atoms: 4, max_atoms: 8 };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let inst = generate_suite::<f64>(&Family::THEOREM, &cfg).unwrap();
            csv_string(&run_sandwich(&inst, &[(2.0, 1.0), (3.0, 2.0)], &SearchOptions::default()).unwrap()).unwrap()
        })
    };
    assert_eq!(run(1), run(4));
}
