use criterion::{criterion_group, criterion_main, Criterion};

use ybcav_core::ensemble::{lifetime_distribution, ple_spectrum, sample_sites};
use ybcav_core::ion::build_level_system;
use ybcav_core::{CavityMode, DetectionChain, EnsembleConfig, LevelConfig};

fn ensemble(c: &mut Criterion) {
    let levels = build_level_system(&LevelConfig::default()).unwrap();
    let mode = CavityMode::default();
    let cfg = EnsembleConfig::default();
    let chain = DetectionChain::default();
    let ions = sample_sites(&cfg, &mode, 1).unwrap().ions;
    c.bench_function("sample_sites", |b| b.iter(|| sample_sites(&cfg, &mode, 1).unwrap()));
    c.bench_function("ple_spectrum", |b| {
        b.iter(|| ple_spectrum(&ions, &levels, &mode, &chain, &cfg).unwrap())
    });
    c.bench_function("lifetime_distribution", |b| {
        b.iter(|| lifetime_distribution(&ions, &levels, &mode, cfg.lifetime_bins).unwrap())
    });
}

criterion_group!(benches, ensemble);
criterion_main!(benches);
