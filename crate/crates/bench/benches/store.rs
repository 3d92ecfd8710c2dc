use criterion::{criterion_group, criterion_main, Criterion};
use migp_bench::{corpus, distribution};
use migp_core::pipeline::{build_store, Blocklist, BuildParams};
use migp_core::similarity::dasr_ruleset;
use migp_core::{EntryMode, PrfKey, ServerHash};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn store(c: &mut Criterion) {
    let rules = dasr_ruleset();
    let creds = corpus(&distribution(5_000), 1_000);
    let key = PrfKey::generate(&mut ChaCha20Rng::seed_from_u64(3));
    let blocklist = Blocklist::empty();
    let params = BuildParams {
        prefix_bits: 8,
        rules: &rules,
        n: 10,
        entry_mode: EntryMode::LastBit,
        hash: &ServerHash::Fast,
        blocklist: &blocklist,
        with_sidecar: false,
    };

    let mut g = c.benchmark_group("store");
    g.sample_size(10);
    g.bench_function("build_1k_credentials_n10", |b| b.iter(|| build_store(&creds, &key, &params).unwrap()));
    g.finish();
}

criterion_group!(benches, store);
criterion_main!(benches);
