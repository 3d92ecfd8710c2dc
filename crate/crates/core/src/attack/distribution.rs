//! Password distributions and the synthetic Zipf generator.

use std::collections::HashSet;
use std::io::{self, BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::AttackError;
use crate::similarity::{validate_password, TransformationPath};

/// A finite password distribution, most probable first.
#[derive(Clone, Debug, PartialEq)]
pub struct PasswordDistribution {
    support: Vec<String>,
    prob: Vec<f64>,
}

impl PasswordDistribution {
    /// Normalizes nonnegative `weights`; the support is reordered by
    /// descending probability, ties lexicographic.
    pub fn new(entries: Vec<(String, f64)>) -> Result<Self, AttackError> {
        if entries.is_empty() {
            return Err(AttackError::EmptyDistribution);
        }
        let mut seen = HashSet::with_capacity(entries.len());
        let mut total = 0.0;
        for (w, p) in &entries {
            if !p.is_finite() || *p < 0.0 {
                return Err(AttackError::Invalid(format!("weight {p} for {w:?}")));
            }
            if !seen.insert(w.as_str()) {
                return Err(AttackError::Invalid(format!("duplicate password {w:?}")));
            }
            total += p;
        }
        if total <= 0.0 {
            return Err(AttackError::Invalid("weights sum to zero".into()));
        }
        let mut entries = entries;
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let (support, prob) = entries.into_iter().map(|(w, p)| (w, p / total)).unzip();
        Ok(PasswordDistribution { support, prob })
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn support(&self) -> &[String] {
        &self.support
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.prob
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.support.iter().map(String::as_str).zip(self.prob.iter().copied())
    }

    /// The `k` most probable passwords, renormalized.
    pub fn top_k(&self, k: usize) -> Result<Self, AttackError> {
        let k = k.min(self.len());
        PasswordDistribution::new(self.iter().take(k).map(|(w, p)| (w.to_owned(), p)).collect())
    }

    /// Sum of the `q` largest probabilities.
    pub fn top_mass(&self, q: usize) -> f64 {
        self.prob.iter().take(q).sum()
    }

    /// `count` draws with replacement, returned as support indices.
    pub fn sample_indices<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<usize> {
        let mut cdf = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        for p in &self.prob {
            acc += p;
            cdf.push(acc);
        }
        (0..count)
            .map(|_| {
                let u = rng.gen::<f64>() * acc;
                cdf.partition_point(|c| *c <= u).min(self.len() - 1)
            })
            .collect()
    }

    /// One `probability<TAB>password` line per entry.
    pub fn write_text<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (p, prob) in self.iter() {
            writeln!(w, "{prob:e}\t{p}")?;
        }
        w.flush()
    }

    /// Reads `weight<TAB>password` lines; weights need not be normalized.
    /// Blank lines and lines starting with `#` are skipped.
    pub fn read_text<R: BufRead>(r: R) -> Result<Self, AttackError> {
        let mut entries = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| AttackError::Invalid(format!("read error: {e}")))?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (weight, password) = line
                .split_once('\t')
                .ok_or_else(|| AttackError::Invalid(format!("line {}: expected weight<TAB>password", i + 1)))?;
            let weight: f64 = weight
                .trim()
                .parse()
                .map_err(|_| AttackError::Invalid(format!("line {}: bad weight {weight:?}", i + 1)))?;
            entries.push((password.to_owned(), weight));
        }
        PasswordDistribution::new(entries)
    }
}

const ONSETS: &[&str] = &[
    "b", "c", "d", "f", "g", "h", "j", "k", "l", "m", "n", "p", "r", "s", "t", "v", "w", "z", "ch", "sh", "st",
    "br", "tr", "gr",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "y", "ai", "ee", "oo"];

fn synth_word<R: Rng>(rng: &mut R) -> String {
    let syllables = rng.gen_range(2..=3);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(ONSETS.choose(rng).expect("nonempty"));
        w.push_str(VOWELS.choose(rng).expect("nonempty"));
    }
    if rng.gen_bool(0.3) {
        w.push_str(ONSETS.choose(rng).expect("nonempty"));
    }
    w
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_ascii_uppercase().to_string() + c.as_str(),
        None => String::new(),
    }
}

fn leet(w: &str) -> String {
    w.chars()
        .map(|c| match c {
            'a' => '@',
            'e' => '3',
            'i' => '1',
            'o' => '0',
            's' => '$',
            c => c,
        })
        .collect()
}

/// The members of one synthetic password family with their relative
/// popularity inside the family.
fn family<R: Rng>(base: &str, rng: &mut R) -> Vec<(String, f64)> {
    let year = rng.gen_range(1970..=2024);
    let two = format!("{:02}", rng.gen_range(0..100));
    let templates: Vec<(String, f64)> = vec![
        (base.to_owned(), 1.0),
        (format!("{base}1"), 0.9),
        (format!("{base}123"), 0.7),
        (format!("{base}12"), 0.5),
        (format!("{base}{year}"), 0.45),
        (capitalize(base), 0.4),
        (format!("{}1", capitalize(base)), 0.35),
        (format!("{base}{two}"), 0.3),
        (format!("{base}!"), 0.25),
        (format!("{base}1234"), 0.2),
        (format!("{base}0"), 0.15),
        (format!("{}{year}", capitalize(base)), 0.12),
        (leet(base), 0.1),
        (format!("{}1", leet(base)), 0.08),
    ];
    let keep = rng.gen_range(3..=templates.len());
    let mut picked: Vec<(String, f64)> = Vec::with_capacity(keep);
    picked.push(templates[0].clone());
    let mut rest: Vec<_> = templates[1..].to_vec();
    rest.shuffle(rng);
    picked.extend(rest.into_iter().take(keep - 1));
    picked
}

/// A seed-determined distribution of `size` passwords whose rank-`r`
/// probability is proportional to `r^-s`. Passwords come in families built
/// from a pronounceable base word (digits, years, capitalization, leet);
/// a family's members sit at nearby ranks.
pub fn synth_distribution(seed: u64, size: usize, s: f64) -> Result<PasswordDistribution, AttackError> {
    if size == 0 {
        return Err(AttackError::Invalid("size must be at least 1".into()));
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(AttackError::Invalid(format!("zipf exponent must be positive, got {s}")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut seen = HashSet::with_capacity(size);
    let mut scored: Vec<(f64, String)> = Vec::with_capacity(size + 16);
    let mut bases = HashSet::new();
    while scored.len() < size {
        let base = synth_word(&mut rng);
        if !bases.insert(base.clone()) {
            continue;
        }
        // heavy-tailed family popularity, lognormal-ish member noise
        let fam: f64 = rng.gen::<f64>().max(1e-12).powf(-1.5);
        for (w, rel) in family(&base, &mut rng) {
            if validate_password(&w).is_err() || !seen.insert(w.clone()) {
                continue;
            }
            let noise = (rng.gen::<f64>() - 0.5) * 0.6;
            scored.push((fam * rel * noise.exp(), w));
            if scored.len() == size {
                break;
            }
        }
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    let entries = scored
        .into_iter()
        .enumerate()
        .map(|(r, (_, w))| (w, ((r + 1) as f64).powf(-s)))
        .collect();
    PasswordDistribution::new(entries)
}

/// Same-user password pairs for rule-mining experiments: each pair is a
/// distribution sample and the result of applying `planted` to it with
/// probability `rate`, otherwise a random other tweak.
pub fn synth_pairs(
    dist: &PasswordDistribution,
    seed: u64,
    count: usize,
    planted: &TransformationPath,
    rate: f64,
) -> Vec<(String, String)> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let noise = [
        |w: &str| format!("{w}!"),
        |w: &str| format!("{w}{w}"),
        |w: &str| format!("x{w}"),
        |w: &str| w.to_uppercase(),
        |w: &str| format!("{w}99"),
    ];
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count && attempts < count * 20 {
        attempts += 1;
        let idx = dist.sample_indices(1, &mut rng)[0];
        let w = &dist.support()[idx];
        let tweaked = if rng.gen_bool(rate.clamp(0.0, 1.0)) {
            planted.apply(w)
        } else {
            Some(noise.choose(&mut rng).expect("nonempty")(w))
        };
        if let Some(t) = tweaked {
            if &t != w && validate_password(&t).is_ok() {
                out.push((w.clone(), t));
            }
        }
    }
    out
}
