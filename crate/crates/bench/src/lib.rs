//! Shared fixtures for the criterion benchmarks.

use migp_core::attack::{synth_distribution, PasswordDistribution};
use migp_core::Credential;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// A Zipf-shaped distribution over `size` synthetic passwords.
pub fn distribution(size: usize) -> PasswordDistribution {
    synth_distribution(2024, size, 1.0).expect("synthetic distribution")
}

/// `count` credentials with one password sampled from `dist` per user.
pub fn corpus(dist: &PasswordDistribution, count: usize) -> Vec<Credential> {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    dist.sample_indices(count, &mut rng)
        .into_iter()
        .enumerate()
        .map(|(i, j)| Credential::new(&format!("user{i}@example.org"), &dist.support()[j]).expect("valid credential"))
        .collect()
}

/// `(password, password with a trailing digit)` pairs.
pub fn pairs(dist: &PasswordDistribution, count: usize) -> Vec<(String, String)> {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    dist.sample_indices(count, &mut rng)
        .into_iter()
        .map(|j| {
            let w = dist.support()[j].clone();
            let d = (rng.next_u32() % 10).to_string();
            (w.clone(), w + &d)
        })
        .collect()
}
