use cvar_saa::harness::{
    convergence_study, histogram, multi_law_table, replicate_seed, run_replications, summarize, write_histogram_csv,
    write_report_csv, write_report_json, Provenance, ReferenceKind, ReplicationSet,
};
use cvar_saa::oracle::gaussian_solution;
use cvar_saa::presets;
use cvar_saa::{Error, GaussianModel, MarketModel, ProblemSpec, SolveOptions, SolverKind, TailLevel};

fn gaussian() -> (ProblemSpec, MarketModel, GaussianModel) {
    let model = GaussianModel::unit_mean(&presets::gaussian_covariance()).unwrap();
    let (lo, up) = presets::gaussian_open_box();
    let spec = ProblemSpec::new(TailLevel::default(), presets::CAPITAL_LIMIT, lo, up);
    (spec, MarketModel::Gaussian(model.clone()), model)
}

fn opts() -> SolveOptions {
    SolveOptions::default()
}

#[test]
fn same_seed_same_replications() {
    let (spec, market, _) = gaussian();
    let a = run_replications(&spec, &market, 1000, 2, 9, SolverKind::CuttingPlane, &opts()).unwrap();
    let b = run_replications(&spec, &market, 1000, 2, 9, SolverKind::CuttingPlane, &opts()).unwrap();
    assert_eq!(a, b);
    let c = run_replications(&spec, &market, 1000, 2, 10, SolverKind::CuttingPlane, &opts()).unwrap();
    assert_ne!(a.values, c.values);
    assert_ne!(replicate_seed(9, 1000, 0), replicate_seed(9, 1000, 1));
}

#[test]
fn bit_identical_across_worker_counts() {
    let (spec, market, model) = gaussian();
    let oracle = gaussian_solution(100.0, &model, TailLevel::default()).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                convergence_study(
                    &spec,
                    &market,
                    &[500, 600, 700],
                    8,
                    3,
                    SolverKind::CuttingPlane,
                    &opts(),
                    Some(&oracle),
                )
                .unwrap()
            })
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one, four);
    assert_eq!(
        serde_json::to_string(&one).unwrap(),
        serde_json::to_string(&four).unwrap()
    );
}

#[test]
fn summary_ignores_replicate_order() {
    let (spec, market, _) = gaussian();
    let set = run_replications(&spec, &market, 800, 12, 5, SolverKind::CuttingPlane, &opts()).unwrap();
    let mut perm: ReplicationSet = set.clone();
    let order: Vec<usize> = (0..set.values.len()).map(|i| (i * 5 + 3) % set.values.len()).collect();
    perm.values = order.iter().map(|&i| set.values[i]).collect();
    perm.gammas = order.iter().map(|&i| set.gammas[i].clone()).collect();
    perm.lambdas = order.iter().map(|&i| set.lambdas[i]).collect();
    perm.active = order.iter().map(|&i| set.active[i]).collect();
    assert_eq!(summarize(&set, None).unwrap(), summarize(&perm, None).unwrap());
}

#[test]
fn sample_average_bias_is_optimistic_and_vanishes() {
    let (spec, market, model) = gaussian();
    let v_star = gaussian_solution(100.0, &model, TailLevel::default()).unwrap().v_star;
    let small = run_replications(&spec, &market, 1000, 50, 42, SolverKind::CuttingPlane, &opts()).unwrap();
    let large = run_replications(&spec, &market, 8000, 50, 42, SolverKind::CuttingPlane, &opts()).unwrap();
    let stat = |s: &ReplicationSet| {
        let b = summarize(s, None).unwrap().value;
        (b.mean - v_star, b.std / (s.values.len() as f64).sqrt())
    };
    let (bias_small, _) = stat(&small);
    let (bias_large, se_large) = stat(&large);
    assert!(bias_small < 0.0, "{bias_small}");
    assert!(bias_large.abs() < bias_small.abs());
    assert!(bias_large.abs() < 3.0 * se_large, "bias {bias_large}, se {se_large}");
    // every Gaussian replicate spends the whole budget
    assert!(small.active.iter().chain(&large.active).all(|a| *a));
}

#[test]
fn too_small_samples_and_replication_counts() {
    let (spec, market, _) = gaussian();
    assert!(matches!(
        run_replications(&spec, &market, 100, 4, 0, SolverKind::CuttingPlane, &opts()),
        Err(Error::SampleTooSmall { n: 100, min: 500 })
    ));
    assert!(run_replications(&spec, &market, 1000, 1, 0, SolverKind::CuttingPlane, &opts()).is_err());
    assert!(convergence_study(
        &spec,
        &market,
        &[500, 1000],
        4,
        0,
        SolverKind::CuttingPlane,
        &opts(),
        None
    )
    .is_err());
}

#[test]
fn frozen_portfolio_flags_undefined_slopes() {
    // a point box leaves no freedom: γ has zero spread at every N
    let (mut spec, market, _) = gaussian();
    spec.gamma_low = vec![1.0; 5];
    spec.gamma_up = vec![1.0; 5];
    spec.capital_limit = 1e6;
    let report = convergence_study(
        &spec,
        &market,
        &[500, 1000, 2000],
        4,
        1,
        SolverKind::CuttingPlane,
        &opts(),
        None,
    )
    .unwrap();
    assert!(report.slope.gamma.iter().all(Option::is_none));
    assert!(report.slope.value.is_some());
    assert!(report.warnings.iter().any(|w| w.contains("gamma1")));
    assert_eq!(report.sizes[0].gamma[0].std, 0.0);
}

#[test]
fn report_files_carry_provenance() {
    let (spec, market, model) = gaussian();
    let oracle = gaussian_solution(100.0, &model, TailLevel::default()).unwrap();
    let mut report = convergence_study(
        &spec,
        &market,
        &[500, 700, 900],
        30,
        2,
        SolverKind::CuttingPlane,
        &opts(),
        Some(&oracle),
    )
    .unwrap();
    let clt = report.clt.take().unwrap();
    assert_eq!(clt.reference_kind, ReferenceKind::Oracle);
    assert_eq!(clt.scaled_errors.len(), 30);
    let prov = Provenance {
        config_hash: "abc123".into(),
        base_seed: 2,
    };

    let mut csv = Vec::new();
    write_report_csv(&report, &prov, &mut csv).unwrap();
    let csv = String::from_utf8(csv).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# config_hash=abc123 base_seed=2"));
    assert_eq!(lines.next(), Some("n,stat,target,value"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..3], &["500", "mean", "v"]);
    let value: f64 = row[3].parse().unwrap();
    let mean = report.sizes[0].value.mean;
    assert!((value - mean).abs() <= 1e-13 * mean.abs(), "{value} vs {mean}");
    assert!(csv.contains("900,oracle_distance,gamma,"));

    let mut hist = Vec::new();
    write_histogram_csv(&histogram(&clt.scaled_errors, 6), &prov, &mut hist).unwrap();
    let hist = String::from_utf8(hist).unwrap();
    assert!(hist.starts_with("# config_hash=abc123 base_seed=2\nbin_left,bin_right,count\n"));
    let total: usize = hist
        .lines()
        .skip(2)
        .map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(total, 30);

    let mut json = Vec::new();
    write_report_json(&report, &prov, &mut json).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&json).unwrap();
    assert_eq!(v["config_hash"], "abc123");
    assert_eq!(v["report"]["sizes"].as_array().unwrap().len(), 3);
}

#[test]
fn multi_law_rows_and_bounded_pins() {
    let marginals = presets::multi_law_marginals();
    let (lo, up) = presets::multi_law_open_box();
    let (blo, bup) = presets::multi_law_bounded_box();
    let a = TailLevel::default();
    let boxes = [
        (false, ProblemSpec::new(a, presets::CAPITAL_LIMIT, lo, up)),
        (true, ProblemSpec::new(a, presets::CAPITAL_LIMIT, blo, bup)),
    ];
    let rows = multi_law_table(
        &marginals,
        &presets::multi_law_dependences(),
        &boxes,
        20_000,
        4,
        &opts(),
    )
    .unwrap();
    assert_eq!(rows.len(), 6);
    for r in rows.iter().filter(|r| r.bounded) {
        assert_eq!(r.solution.gamma[0], 2.0, "{}", r.dependence);
        assert_eq!(r.solution.gamma[1], 5.0, "{}", r.dependence);
    }
    for pair in rows.chunks(2) {
        // shrinking the box can only hurt
        assert!(pair[1].solution.value >= pair[0].solution.value - 1e-9);
    }
}
