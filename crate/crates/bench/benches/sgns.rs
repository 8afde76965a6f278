use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

use embstab_core::corpus::Vocabulary;
use embstab_core::sgns::{train, Hyperparams};

fn synthetic_corpus(sentences: usize) -> (Vec<Vec<String>>, Vocabulary) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let vocab_size = 200;
    let stream: Vec<Vec<String>> = (0..sentences)
        .map(|_| {
            (0..12)
                .map(|_| format!("w{:03}", rng.gen_range(0..vocab_size)))
                .collect()
        })
        .collect();
    let (vocab, _) = Vocabulary::build(stream.clone(), 1, &HashSet::new()).unwrap();
    (stream, vocab)
}

fn bench_train(c: &mut Criterion) {
    let (stream, vocab) = synthetic_corpus(500);
    let encoded: Vec<Vec<usize>> = stream.iter().map(|s| vocab.encode(s)).collect();
    let hp = Hyperparams {
        dim: 50,
        window: 5,
        epochs: 1,
        negatives: 5,
        min_count: 1,
        subsample: 1e-2,
        ..Hyperparams::default()
    };
    c.bench_function("train_1_epoch_500_sentences_dim50", |b| {
        b.iter(|| train(&encoded, &vocab, &hp, 7).unwrap())
    });
}

criterion_group!(benches, bench_train);
criterion_main!(benches);
