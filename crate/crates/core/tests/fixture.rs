use active_eval::harness::{
    sweep, sweep_with, CsvRow, Execution, ExperimentReport, MethodSpec, ABLATION_BUDGETS,
};
use active_eval::ingest::{load_pool_from_reader, write_pool, LoadOptions};
use active_eval::stratify::{stratify, StratifyMethod};
use active_eval::synth::reference_pool;

#[test]
fn reference_pool_is_frozen() {
    let f = reference_pool();
    let pool = &f.labeled.pool;
    assert_eq!(pool.len(), 3000);
    assert_eq!(pool.k(), 10);
    let zeros = pool.instances().iter().filter(|i| i.se() == 0.0).count();
    assert_eq!(zeros, 1839);
    assert!(zeros as f64 / 3000.0 >= 0.4);
    assert_eq!(f.labeled.risk(), 347.0 / 3000.0);
}

#[test]
fn stratum_loss_rises_with_entropy() {
    let f = reference_pool();
    let st = stratify(StratifyMethod::AdaptiveSe, &f.labeled.pool.se_values(), 5).unwrap();
    assert_eq!(st.sizes(), &[1839, 343, 322, 270, 226]);
    let means: Vec<f64> = st
        .members()
        .iter()
        .map(|m| m.iter().map(|&i| f.labeled.losses()[i]).sum::<f64>() / m.len() as f64)
        .collect();
    assert!(means.windows(2).all(|w| w[0] < w[1]), "{means:?}");
}

#[test]
fn export_and_reload_is_identity() {
    let f = reference_pool();
    let mut buf = Vec::new();
    write_pool(
        &mut buf,
        &f.labeled.pool,
        Some(f.labeled.losses()),
        Some(&f.gold_answers),
    )
    .unwrap();
    let loaded = load_pool_from_reader(&buf[..], "ref.jsonl", &LoadOptions::default()).unwrap();
    assert_eq!(
        loaded
            .gold_answers
            .iter()
            .flatten()
            .cloned()
            .collect::<Vec<_>>(),
        f.gold_answers
    );
    let lp = loaded.into_labeled().unwrap();
    assert_eq!(lp.pool.se_values(), f.labeled.pool.se_values());
    assert_eq!(lp.pool.sc_values(), f.labeled.pool.sc_values());
    assert_eq!(lp.losses(), f.labeled.losses());
    assert_eq!(lp.risk(), f.labeled.risk());
    for method in StratifyMethod::ALL {
        let a = stratify(method, &lp.pool.se_values(), 5).unwrap();
        let b = stratify(method, &f.labeled.pool.se_values(), 5).unwrap();
        assert_eq!(a, b, "{method}");
    }
}

fn small_sweep(exec: Execution) -> ExperimentReport {
    let f = reference_pool();
    let methods = [
        MethodSpec::proxy_neyman(),
        MethodSpec::adaptive(active_eval::allocate::AllocRule::OracleNeyman),
    ];
    sweep_with(&f.labeled, &methods, &[50, 100], 300, 99, exec).unwrap()
}

#[test]
fn sweep_is_deterministic_and_thread_count_independent() {
    let serial = small_sweep(Execution::Serial);
    let parallel = small_sweep(Execution::Parallel);
    assert_eq!(serial, parallel);
    assert_eq!(parallel, small_sweep(Execution::Parallel));
    let bits = |r: &ExperimentReport| r.cells.iter().map(|c| c.mse.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&serial), bits(&parallel));
}

#[test]
fn report_round_trips_through_json_and_csv() {
    let f = reference_pool();
    let report = sweep(
        &f.labeled,
        &[MethodSpec::proxy_neyman()],
        &ABLATION_BUDGETS,
        50,
        3,
    )
    .unwrap();
    let mut json = Vec::new();
    report.write_json(&mut json).unwrap();
    assert_eq!(ExperimentReport::read_json(&json[..]).unwrap(), report);

    let mut csv = Vec::new();
    report.write_csv(&mut csv).unwrap();
    let rows = ExperimentReport::read_csv(&csv[..]).unwrap();
    let expected: Vec<CsvRow> = report.cells.iter().map(CsvRow::from).collect();
    assert_eq!(rows, expected);
    assert_eq!(report.plot_data().len(), 2);
}
