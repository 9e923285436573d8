//! Sequential vs rayon execution of the data-parallel loops.
//!
//! ```bash
//! cargo bench -p ttsfront --bench parallel
//! cargo bench -p ttsfront --bench parallel -- pitch
//! ```
//!
//! With `--no-default-features` the "parallel" variant falls back to plain
//! iteration, so both lines should match.

use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ttsfront::corpus::Audio;
use ttsfront::g2p::{G2pDims, G2pError, G2pModel, LabelSequence, Vocab};
use ttsfront::nn::accumulate_gradients_with;
use ttsfront::par::Exec;
use ttsfront::pitch::{extract_many, PitchConfig};
use ttsfront::synthetic::{lexicon, sine};
use ttsfront::vocoder::{mel_many, MelConfig};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn clips(n: usize) -> Vec<Audio> {
    (0..n)
        .map(|i| Audio {
            sample_rate: 24_000,
            samples: sine(90.0 + 25.0 * i as f64, 0.5, 1.0, 24_000),
        })
        .collect()
}

fn pitch(c: &mut Criterion) {
    let audio = clips(8);
    let cfg = PitchConfig::default();
    let mut group = c.benchmark_group("pitch_8x1s");
    group.sample_size(10).measurement_time(Duration::from_secs(10));
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(extract_many(&audio, &cfg, exec)))
        });
    }
    group.finish();
}

fn mel(c: &mut Criterion) {
    let audio = clips(8);
    let cfg = MelConfig::default();
    let mut group = c.benchmark_group("mel_8x1s");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(mel_many(&audio, &cfg, exec)))
        });
    }
    group.finish();
}

fn gradients(c: &mut Criterion) {
    let data = lexicon(16, 3);
    let dims = G2pDims {
        embed: 16,
        channels: 32,
        kernel: 5,
        conv_layers: 3,
        hidden: 32,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let model = G2pModel::<f32>::new(Vocab::build(&data), dims, &mut rng).unwrap();
    let items: Vec<_> = data.iter().collect();
    let mut group = c.benchmark_group("g2p_grad_batch16");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            let mut m = model.clone();
            b.iter(|| {
                let r: Result<Vec<f64>, G2pError> =
                    accumulate_gradients_with(&mut m, &items, exec, |m: &mut G2pModel<f32>, s: &&LabelSequence| {
                        m.loss_backward(s, 1.0 / 16.0)
                    });
                black_box(r)
            })
        });
    }
    group.finish();
}

criterion_group!(benches, pitch, mel, gradients);
criterion_main!(benches);
