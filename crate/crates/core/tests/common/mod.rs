//! Corpus and probe generators shared by the integration tests.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use migp_core::attack::synth_distribution;
use migp_core::pipeline::Credential;
use migp_core::similarity::RuleSet;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// `count` credentials for users with one to four passwords each.
pub fn synth_corpus(seed: u64, count: usize) -> Vec<Credential> {
    let dist = synth_distribution(seed, 20_000, 0.8).expect("dist");
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x5eed);
    let mut out = Vec::with_capacity(count);
    let mut user = 0usize;
    while out.len() < count {
        let k = rng.gen_range(1..=4).min(count - out.len());
        let mut pws: BTreeSet<String> = BTreeSet::new();
        for i in dist.sample_indices(k, &mut rng) {
            pws.insert(dist.support()[i].clone());
        }
        for p in pws {
            out.push(Credential::new(&format!("user{user:05}@example.org"), &p).expect("valid"));
        }
        user += 1;
    }
    out
}

pub fn by_user(corpus: &[Credential]) -> HashMap<String, BTreeSet<String>> {
    let mut m: HashMap<String, BTreeSet<String>> = HashMap::new();
    for c in corpus {
        m.entry(c.username().to_owned()).or_default().insert(c.password().to_owned());
    }
    m
}

/// A third exact pairs, a third rule-tweaked pairs and a third misses.
pub fn probes(corpus: &[Credential], rules: &RuleSet, count: usize, seed: u64) -> Vec<(String, String)> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let c = corpus.choose(&mut rng).expect("nonempty");
        let u = c.username().to_owned();
        match out.len() % 3 {
            0 => out.push((u, c.password().to_owned())),
            1 => {
                let rule = &rules.rules()[rng.gen_range(0..rules.len())];
                if let Some(v) = rule.apply(c.password()) {
                    if v != c.password() {
                        out.push((u, v));
                    }
                }
            }
            _ => out.push((u, format!("zzz-unrelated-{}", rng.gen_range(0..1_000_000)))),
        }
    }
    out
}

