use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use cvar_saa::market::sample_gaussian;
use cvar_saa::oracle::gaussian_solution;
use cvar_saa::risk::evaluate_g;
use cvar_saa::saa::{assemble_problem, solve_cutting_plane, solve_epigraph_lp};
use cvar_saa::{presets, AuxiliaryPoint, MarketModel, SolveOptions, TailLevel};
use cvar_saa_bench::{gaussian_model, gaussian_oracle, gaussian_spec, SUITE_SEED};

fn g_evaluation(c: &mut Criterion) {
    let star = gaussian_oracle();
    let point = AuxiliaryPoint::new(star.gamma_star.clone(), star.zeta_star);
    let mut group = c.benchmark_group("evaluate_g");
    for n in [10_000, 100_000] {
        let scen = sample_gaussian(&gaussian_model(), n, SUITE_SEED).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &scen, |b, scen| {
            b.iter(|| evaluate_g(black_box(&point), scen, TailLevel::default()).unwrap())
        });
    }
    group.finish();
}

fn cutting_plane(c: &mut Criterion) {
    let spec = gaussian_spec(false);
    let mut group = c.benchmark_group("cutting_plane");
    group.sample_size(10);
    for n in [10_000, 100_000] {
        let scen = sample_gaussian(&gaussian_model(), n, SUITE_SEED).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &scen, |b, scen| {
            b.iter(|| {
                let p = assemble_problem(&spec, scen).unwrap();
                solve_cutting_plane(&p, &SolveOptions::default()).unwrap()
            })
        });
    }
    group.finish();
}

fn epigraph_lp(c: &mut Criterion) {
    let spec = gaussian_spec(false);
    let mut group = c.benchmark_group("epigraph_lp");
    group.sample_size(10);
    for n in [500, 1000] {
        let scen = sample_gaussian(&gaussian_model(), n, SUITE_SEED).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &scen, |b, scen| {
            b.iter(|| solve_epigraph_lp(&assemble_problem(&spec, scen).unwrap()).unwrap())
        });
    }
    group.finish();
}

fn closed_form(c: &mut Criterion) {
    let model = gaussian_model();
    c.bench_function("gaussian_solution", |b| {
        b.iter(|| gaussian_solution(black_box(presets::CAPITAL_LIMIT), &model, TailLevel::default()).unwrap())
    });
}

fn sampling(c: &mut Criterion) {
    let mut group = c.benchmark_group("sample_10k");
    for dep in presets::multi_law_dependences() {
        let name = dep.name();
        let model = MarketModel::MultiLaw(presets::multi_law_model(dep));
        group.bench_function(name, |b| {
            b.iter(|| model.sample(10_000, black_box(SUITE_SEED)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, g_evaluation, cutting_plane, epigraph_lp, closed_form, sampling);
criterion_main!(benches);
