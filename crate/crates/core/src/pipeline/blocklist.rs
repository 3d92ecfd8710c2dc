//! Popular-password blocklist: the top `beta` passwords and their variants.

use std::collections::{BTreeSet, HashMap};
use std::io::{self, Write};

use super::corpus::Credential;
use crate::similarity::{generate_variants, RuleSet};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Blocklist {
    beta: usize,
    top: Vec<String>,
    blocked: BTreeSet<String>,
}

impl Blocklist {
    pub fn empty() -> Self {
        Blocklist::default()
    }

    pub fn beta(&self) -> usize {
        self.beta
    }

    /// The top passwords, most frequent first.
    pub fn top(&self) -> &[String] {
        &self.top
    }

    pub fn contains(&self, password: &str) -> bool {
        self.blocked.contains(password)
    }

    pub fn len(&self) -> usize {
        self.blocked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocked.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.blocked.iter().map(String::as_str)
    }

    /// One password per line, sorted.
    pub fn write_text<W: Write>(&self, mut w: W) -> io::Result<()> {
        for p in &self.blocked {
            writeln!(w, "{p}")?;
        }
        w.flush()
    }
}

/// Passwords ranked by descending corpus frequency, ties lexicographic.
pub fn rank_by_frequency<'a, I>(passwords: I) -> Vec<(String, u64)>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for p in passwords {
        *counts.entry(p).or_default() += 1;
    }
    let mut ranked: Vec<(String, u64)> = counts.into_iter().map(|(p, c)| (p.to_owned(), c)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked
}

pub fn build_blocklist(corpus: &[Credential], beta: usize, rules: &RuleSet, n: usize) -> Blocklist {
    if beta == 0 {
        return Blocklist::empty();
    }
    let top: Vec<String> = rank_by_frequency(corpus.iter().map(|c| c.password()))
        .into_iter()
        .take(beta)
        .map(|(p, _)| p)
        .collect();
    let mut blocked = BTreeSet::new();
    for p in &top {
        blocked.insert(p.clone());
        blocked.extend(generate_variants(rules, p, n));
    }
    Blocklist { beta, top, blocked }
}
