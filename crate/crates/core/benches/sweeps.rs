use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use phonon_lattice::envelope::{make_sech, TimeGrid};
use phonon_lattice::par::ExecPolicy;
use phonon_lattice::scatter::detuning_sweep_with;
use phonon_lattice::scenarios::{run_mz_single, ScenarioConfig, ScenarioId, SweepSpec};

fn policies() -> [(&'static str, ExecPolicy); 2] {
    [("sequential", ExecPolicy::Sequential), ("parallel", ExecPolicy::Parallel)]
}

fn frequency_sweep(c: &mut Criterion) {
    let grid = TimeGrid::spanning(0.0, 800.0, 0.5).unwrap();
    let u = make_sech(20.0, 400.0, grid).unwrap();
    let deltas: Vec<f64> = (0..201).map(|i| -1.0 + 0.01 * i as f64).collect();
    let mut g = c.benchmark_group("detuning_sweep");
    for (name, p) in policies() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &p, |b, &p| b.iter(|| detuning_sweep_with(p, &u, 0.5, &deltas).unwrap()));
    }
    g.finish();
}

fn lattice_sweep(c: &mut Criterion) {
    let mut cfg = ScenarioConfig::for_scenario(ScenarioId::MzSingle);
    cfg.sweep = Some(SweepSpec::new("delta_MHz", -100.0, 100.0, 9));
    let mut g = c.benchmark_group("mz_single");
    g.sample_size(10);
    for (name, p) in policies() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &p, |b, &p| b.iter(|| run_mz_single(&cfg, p).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, frequency_sweep, lattice_sweep);
criterion_main!(benches);
