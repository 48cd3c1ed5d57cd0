use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pcmsyn::device::VariationSpec;
use pcmsyn::metrics::{default_sensitivity_grid, read_voltage_sensitivity, variation_sweep, NoiseReplay};
use pcmsyn::{Execution, RunConfig, Scenario};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn sweep(c: &mut Criterion) {
    let cfg = RunConfig::default();
    let seeds = cfg.sweep_seeds();
    let cases = VariationSpec::measured_cases();
    let mut group = c.benchmark_group("variation_sweep");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new(name, seeds.len()), &exec, |b, &exec| {
            b.iter(|| variation_sweep(&cases, &seeds, &cfg.device, &cfg.network, exec).unwrap())
        });
    }
    group.finish();
}

fn sensitivity(c: &mut Criterion) {
    let grid = default_sensitivity_grid();
    let scenario = Scenario::calibrated(0.60, 801).unwrap();
    let mut group = c.benchmark_group("read_voltage_sensitivity");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new(name, grid.len()), &exec, |b, &exec| {
            b.iter(|| read_voltage_sensitivity(&scenario, &grid, NoiseReplay::Tape, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sweep, sensitivity);
criterion_main!(benches);
