//! Times the SI engine on uniform random data.
//!
//! `cargo run --release -p sepidx-core --example throughput -- [Q] [D] [THREADS]`

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sepidx_core::{engine, LabeledFeatureSet};

fn main() {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().expect("integer argument")).collect();
    let q = args.first().copied().unwrap_or(20_000);
    let d = args.get(1).copied().unwrap_or(512);
    let threads = args.get(2).copied().unwrap_or(8);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let points = (0..q * d).map(|_| rng.random::<f32>()).collect();
    let labels = (0..q).map(|_| rng.random_range(0..10)).collect();
    let fs = LabeledFeatureSet::new("uniform", d, points, labels).expect("valid set");
    let start = Instant::now();
    let score = engine::with_threads(threads, || engine::separation_index(&fs)).expect("thread pool");
    let secs = start.elapsed().as_secs_f64();
    let pairs = (q * q) as f64 / 2.0;
    println!(
        "Q={q} D={d} threads={threads}: SI={:.6} in {secs:.3}s ({:.2} Gpair-dims/s)",
        score.si_value,
        pairs * d as f64 / secs / 1e9
    );
}
