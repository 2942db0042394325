//! Compares the rayon backend on the default pool with a one-thread pool.
//! Building with `--no-default-features` runs the same groups on the
//! sequential fallback, where both variants are sequential.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use laser_trng::battery::{run_battery, Criteria, Mode};
use laser_trng::conditioning::condition;
use laser_trng::entropy::Histogram256;
use laser_trng::phase_sim::simulate;
use laser_trng::{BitStream, SimConfig};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_bytes(n: usize) -> Vec<u8> {
    let mut v = vec![0u8; n];
    ChaCha8Rng::seed_from_u64(7).fill_bytes(&mut v);
    v
}

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    let build = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    vec![("default", build(0)), ("one_thread", build(1))]
}

fn bench(c: &mut Criterion) {
    let pools = pools();

    let sim = SimConfig {
        n_samples: 1 << 20,
        ..SimConfig::default()
    };
    let mut g = c.benchmark_group("simulate");
    g.sample_size(10);
    g.throughput(Throughput::Elements(sim.n_samples as u64));
    for (name, pool) in &pools {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| simulate(&sim).unwrap()))
        });
    }
    g.finish();

    let raw = random_bytes(16 << 20);
    let mut g = c.benchmark_group("condition");
    g.sample_size(10);
    g.throughput(Throughput::Bytes(raw.len() as u64));
    for (name, pool) in &pools {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| condition(&raw, true, 6).unwrap()))
        });
    }
    g.finish();

    let mut g = c.benchmark_group("histogram");
    g.throughput(Throughput::Bytes(raw.len() as u64));
    for (name, pool) in &pools {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| Histogram256::from_bytes(&raw).unwrap()))
        });
    }
    g.finish();

    let bits = BitStream::from_bytes(random_bytes(16 * 100_000 / 8));
    let mode = Mode::Multi { k: 16, len: 100_000 };
    let criteria = Criteria::default();
    let mut g = c.benchmark_group("battery");
    g.sample_size(10);
    for (name, pool) in &pools {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| run_battery(&bits, mode, &criteria).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
