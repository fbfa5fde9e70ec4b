use irls_core::experiments::{
    gap_ratio_of, gen_gaussian_matrix, gen_sparse_vector, run_phase_transition, run_trace, run_trial,
    ExperimentConfig, KPolicy, MatrixPolicy, RNG_ID,
};
use irls_core::io::{
    format_matrix, format_vector, parse_matrix, parse_phase_csv, parse_trace_csv, parse_vector, phase_csv, trace_csv,
};
use irls_core::irls::{RecoveryResult, Termination};
use irls_core::linalg::numerical_rank;
use irls_core::sparsity::sparsity_width;

fn config(m: usize, n: usize, k: usize) -> ExperimentConfig {
    ExperimentConfig {
        m,
        n,
        k,
        tau_list: vec![1.0, 0.5],
        trials: 6,
        master_seed: 42,
        success_tol: 1e-4,
        k_policy: KPolicy::EqualsPlantedK,
        gap_ratio: None,
        k_list: None,
        warmstart_iters: 10,
        max_iters: 2000,
        eps_floor: 1e-10,
        matrix_policy: MatrixPolicy::OncePerTable,
    }
}

#[test]
fn gaussian_matrix_statistics() {
    let (m, n) = (250, 1500);
    let phi = gen_gaussian_matrix(m, n, 2008).unwrap();
    let entries = phi.row_major();
    let count = entries.len() as f64;
    let mean = entries.iter().sum::<f64>() / count;
    let var = entries.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
    assert!(mean.abs() <= 4.0 / count.sqrt(), "mean {mean}");
    assert!((var - 1.0 / m as f64).abs() <= 0.1 / m as f64, "variance {var}");
}

#[test]
fn gaussian_matrix_is_deterministic_and_full_rank() {
    let a = gen_gaussian_matrix(50, 250, 9).unwrap();
    let b = gen_gaussian_matrix(50, 250, 9).unwrap();
    assert_eq!(a.row_major(), b.row_major());
    assert_ne!(a.row_major(), gen_gaussian_matrix(50, 250, 10).unwrap().row_major());
    assert_eq!(numerical_rank(a.as_matrix()), 50);
}

#[test]
fn sparse_vector_shapes() {
    assert_eq!(sparsity_width(gen_sparse_vector(20, 0, 1, None).as_slice(), 0.0), 0);
    assert_eq!(sparsity_width(gen_sparse_vector(20, 20, 1, None).as_slice(), 0.0), 20);
    assert_eq!(sparsity_width(gen_sparse_vector(200, 7, 3, None).as_slice(), 0.0), 7);
    let z = gen_sparse_vector(12, 3, 4, Some(10.0));
    assert_eq!(sparsity_width(z.as_slice(), 0.0), 12);
    assert!((gap_ratio_of(&z, 3) - 10.0).abs() <= 1e-12 * 10.0);
}

#[test]
fn zero_sparsity_trace_stops_immediately() {
    let cfg = ExperimentConfig { k: 0, ..config(10, 30, 0) };
    let run = run_trace(&cfg, 1.0, 0).unwrap();
    assert_eq!(run.result.termination, Termination::ExactSparseStop);
    assert_eq!(run.result.iterations(), 1);
    assert_eq!(run.result.trace[0].eps, 0.0);
}

#[test]
fn phase_table_is_deterministic_and_cells_reproduce() {
    let cfg = ExperimentConfig { k_list: Some(vec![0, 2, 6]), ..config(12, 40, 2) };
    let a = run_phase_transition(&cfg).unwrap();
    let b = run_phase_transition(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.rng, RNG_ID);
    for row in &a.rows {
        assert_eq!(row.success_rate, row.successes as f64 / row.trials as f64);
    }
    assert_eq!(a.row(0, "tau=1").unwrap().success_rate, 1.0);
    assert_eq!(a.row(0, "hybrid_tau=0.5").unwrap().success_rate, 1.0);

    let phi = gen_gaussian_matrix(cfg.m, cfg.n, cfg.matrix_seed()).unwrap();
    let whole: Vec<_> = (0..cfg.trials).map(|t| run_trial(&cfg, Some(&phi), 2, 0.5, t).unwrap()).collect();
    let again = run_trial(&cfg, None, 2, 0.5, 3).unwrap();
    assert_eq!(whole[3], again);
    let successes = whole.iter().filter(|r| r.success).count();
    assert_eq!(a.row(2, "hybrid_tau=0.5").unwrap().successes, successes);
    for r in &whole {
        assert_eq!(r.success, r.rel_error_l1 <= cfg.success_tol);
    }
}

#[test]
fn dense_sparsity_fails() {
    let cfg = ExperimentConfig {
        k_list: Some(vec![20]),
        tau_list: vec![1.0],
        trials: 10,
        ..config(20, 60, 20)
    };
    let table = run_phase_transition(&cfg).unwrap();
    assert_eq!(table.row(20, "tau=1").unwrap().successes, 0);
}

#[test]
fn per_trial_matrices_differ_but_reproduce() {
    let cfg = ExperimentConfig {
        matrix_policy: MatrixPolicy::PerTrial,
        ..config(10, 30, 2)
    };
    let a = run_trial(&cfg, None, 2, 1.0, 0).unwrap();
    assert_eq!(a, run_trial(&cfg, None, 2, 1.0, 0).unwrap());
}

#[test]
fn config_json_round_trip() {
    let cfg = ExperimentConfig {
        gap_ratio: Some(100.0),
        k_policy: KPolicy::Explicit(7),
        ..config(50, 250, 5)
    };
    let text = serde_json::to_string(&cfg).unwrap();
    assert!(text.contains("\"N\":250") && text.contains("\"K_policy\""));
    let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(back, cfg);

    let minimal = r#"{"m": 50, "N": 250, "k": 5, "tau_list": [1.0], "trials": 3,
        "master_seed": 1, "success_tol": 1e-4, "K_policy": "Heuristic"}"#;
    let parsed: ExperimentConfig = serde_json::from_str(minimal).unwrap();
    assert_eq!(parsed.warmstart_iters, 10);
    assert_eq!(parsed.max_iters, 2000);
    assert_eq!(parsed.eps_floor, 1e-10);
}

#[test]
fn file_formats_round_trip() {
    let phi = gen_gaussian_matrix(6, 15, 1).unwrap();
    assert_eq!(parse_matrix(&format_matrix(&phi)).unwrap().row_major(), phi.row_major());
    let x = gen_sparse_vector(15, 4, 2, Some(3.0));
    assert_eq!(parse_vector(&format_vector(&x)).unwrap(), x);

    let run = run_trace(&config(20, 60, 3), 1.0, 0).unwrap();
    let csv = trace_csv(&run.result.trace);
    let back = parse_trace_csv(&csv).unwrap();
    assert_eq!(back.len(), run.result.trace.len());
    for (a, b) in back.iter().zip(&run.result.trace) {
        assert_eq!((a.n, a.surrogate_value, a.eps, a.step_l1, a.ref_error_l1), (b.n, b.surrogate_value, b.eps, b.step_l1, b.ref_error_l1));
    }

    let json = serde_json::to_string(&run.result).unwrap();
    let result: RecoveryResult = serde_json::from_str(&json).unwrap();
    assert_eq!(result.x_final, run.result.x_final);
    assert_eq!(result.termination, run.result.termination);

    let table = run_phase_transition(&ExperimentConfig { k_list: Some(vec![1, 3]), ..config(10, 30, 1) }).unwrap();
    assert_eq!(parse_phase_csv(&phase_csv(&table)).unwrap().rows, table.rows);
}

/// Every key written for a result is declared by the shipped schema and every
/// required key is written.
#[test]
fn result_json_matches_schema_file() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../schemas/recovery_result.schema.json");
    let schema: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let run = run_trace(&config(12, 40, 2), 1.0, 0).unwrap();
    let doc = serde_json::to_value(&run.result).unwrap();

    let check = |value: &serde_json::Value, schema: &serde_json::Value| {
        let obj = value.as_object().unwrap();
        let props = schema["properties"].as_object().unwrap();
        for key in obj.keys() {
            assert!(props.contains_key(key), "undeclared key {key}");
        }
        for req in schema["required"].as_array().unwrap() {
            assert!(obj.contains_key(req.as_str().unwrap()), "missing key {req}");
        }
    };
    check(&doc, &schema);
    check(&doc["config"], &schema["properties"]["config"]);
    check(&doc["trace"][0], &schema["properties"]["trace"]["items"]);
    assert_eq!(doc["version"], schema["properties"]["version"]["const"]);
    let terminations = schema["properties"]["termination"]["enum"].as_array().unwrap();
    assert!(terminations.contains(&doc["termination"]));
}
