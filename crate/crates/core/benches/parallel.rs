use std::path::PathBuf;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rlct::blowup::chart_table;
use rlct::cli::load_model;
use rlct::fenergy::{estimate_lambda, FEnergyConfig};
use rlct::kseries::k_expansion;
use rlct::normalize::{check_assumption3, normalize_model, Assumption3Config, NormalizeConfig};
use rlct::par::Exec;

fn model(name: &str) -> rlct::modelspec::ModelSpec {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models").join(format!("{name}.model"));
    load_model(&p).unwrap().1
}

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn free_energy(c: &mut Criterion) {
    let spec = model("binmix_m2");
    let mut g = c.benchmark_group("fenergy");
    g.sample_size(10);
    for (name, exec) in MODES {
        let cfg = FEnergyConfig {
            replicates: 50,
            exec,
            ..Default::default()
        };
        g.bench_with_input(BenchmarkId::new("binmix_m2", name), &cfg, |b, cfg| {
            b.iter(|| estimate_lambda(&spec, cfg, None).unwrap())
        });
    }
    g.finish();
}

fn charts(c: &mut Criterion) {
    let spec = model("mixture_h5");
    let res = normalize_model(&spec, &NormalizeConfig::default()).unwrap();
    let a3 = check_assumption3(&res, &Assumption3Config::default()).unwrap();
    let k = k_expansion(&res).unwrap();
    let mut g = c.benchmark_group("chart_table");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new("mixture_h5", name), |b| {
            b.iter(|| chart_table(&k.poly, &res, &a3, exec).unwrap())
        });
    }
    g.finish();
}

fn normalization(c: &mut Criterion) {
    let spec = model("mixture_h4");
    let mut g = c.benchmark_group("normalize");
    g.sample_size(10);
    for (name, exec) in MODES {
        let cfg = NormalizeConfig {
            exec,
            ..Default::default()
        };
        g.bench_with_input(BenchmarkId::new("mixture_h4", name), &cfg, |b, cfg| {
            b.iter(|| normalize_model(&spec, cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, free_energy, charts, normalization);
criterion_main!(benches);
