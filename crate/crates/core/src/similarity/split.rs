//! Offline analysis: how well a server/client rule split flags vulnerable
//! password pairs, and a greedy search for a good split.

use std::collections::HashSet;

use super::rules::{Rule, RuleSet};
use super::variants::{generate_variants, hybrid_similar};
use super::SimilarityError;

/// Decides whether knowing `leaked` makes `target` guessable.
pub trait PairLabeler {
    fn is_vulnerable(&self, leaked: &str, target: &str) -> bool;
}

/// Labels a pair vulnerable when a reference rule set produces the target
/// from the leaked password within its first `n` variants.
pub struct ReferenceLabeler {
    rules: RuleSet,
    n: usize,
}

impl ReferenceLabeler {
    pub fn new(rules: RuleSet, n: usize) -> Self {
        ReferenceLabeler { rules, n }
    }
}

impl PairLabeler for ReferenceLabeler {
    fn is_vulnerable(&self, leaked: &str, target: &str) -> bool {
        leaked != target && generate_variants(&self.rules, leaked, self.n).iter().any(|v| v == target)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverageReport {
    pub vulnerable: usize,
    pub safe: usize,
    pub true_positives: usize,
    pub false_positives: usize,
}

impl CoverageReport {
    pub fn tpr(&self) -> f64 {
        ratio(self.true_positives, self.vulnerable)
    }

    pub fn fpr(&self) -> f64 {
        ratio(self.false_positives, self.safe)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Scores a split on `(leaked, target)` pairs. Identical pairs are skipped.
pub fn coverage(
    pairs: &[(String, String)],
    labeler: &dyn PairLabeler,
    server_rules: &RuleSet,
    n: usize,
    client_rules: &RuleSet,
    m: usize,
) -> CoverageReport {
    let mut report = CoverageReport {
        vulnerable: 0,
        safe: 0,
        true_positives: 0,
        false_positives: 0,
    };
    for (leaked, target) in pairs.iter().filter(|(a, b)| a != b) {
        let flagged = hybrid_similar(target, leaked, server_rules, n, client_rules, m);
        if labeler.is_vulnerable(leaked, target) {
            report.vulnerable += 1;
            report.true_positives += usize::from(flagged);
        } else {
            report.safe += 1;
            report.false_positives += usize::from(flagged);
        }
    }
    report
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Server,
    Client,
}

#[derive(Clone, Debug)]
pub struct SplitResult {
    pub server: RuleSet,
    pub client: RuleSet,
    /// Pick order, for reporting.
    pub picks: Vec<(Side, usize)>,
    pub covered: usize,
    pub total: usize,
}

/// Greedily assigns rules from `pool` to the server side (up to `n`) or the
/// client side (up to `m`), each step taking the single rule and side with
/// the largest gain in covered `(leaked, target)` pairs. Ties go to the
/// server side, then to the better-ranked rule.
pub fn greedy_split(
    pool: &RuleSet,
    vulnerable_pairs: &[(String, String)],
    n: usize,
    m: usize,
) -> Result<SplitResult, SimilarityError> {
    let pairs: Vec<&(String, String)> = vulnerable_pairs.iter().filter(|(a, b)| a != b).collect();
    // With quota k equal to the number of chosen rules, generate_variants
    // keeps every applicable output, so a side's variant set is just the
    // union of single-rule outputs.
    let server_out: Vec<Vec<Option<String>>> = pool
        .rules()
        .iter()
        .map(|r| pairs.iter().map(|(leaked, _)| non_identity(r, leaked)).collect())
        .collect();
    let client_out: Vec<Vec<Option<String>>> = pool
        .rules()
        .iter()
        .map(|r| pairs.iter().map(|(_, target)| non_identity(r, target)).collect())
        .collect();

    let mut server_sets: Vec<HashSet<&str>> = pairs.iter().map(|(l, _)| HashSet::from([l.as_str()])).collect();
    let mut client_sets: Vec<HashSet<&str>> = pairs.iter().map(|(_, t)| HashSet::from([t.as_str()])).collect();
    let mut covered = vec![false; pairs.len()];
    let mut used = vec![false; pool.len()];
    let mut picks = Vec::new();
    let (mut n_left, mut m_left) = (n, m);

    while n_left + m_left > 0 {
        let mut best: Option<(usize, Side, usize)> = None;
        for (ri, _) in pool.rules().iter().enumerate().filter(|(i, _)| !used[*i]) {
            for side in [Side::Server, Side::Client] {
                let left = if side == Side::Server { n_left } else { m_left };
                if left == 0 {
                    continue;
                }
                let gain = (0..pairs.len())
                    .filter(|&pi| !covered[pi])
                    .filter(|&pi| {
                        let (out, other) = match side {
                            Side::Server => (&server_out[ri][pi], &client_sets[pi]),
                            Side::Client => (&client_out[ri][pi], &server_sets[pi]),
                        };
                        out.as_deref().is_some_and(|v| other.contains(v))
                    })
                    .count();
                if best.map_or(true, |(g, _, _)| gain > g) {
                    best = Some((gain, side, ri));
                }
            }
        }
        let Some((_, side, ri)) = best else { break };
        used[ri] = true;
        picks.push((side, ri));
        for pi in 0..pairs.len() {
            let (out, mine, other) = match side {
                Side::Server => (&server_out[ri][pi], &mut server_sets[pi], &client_sets[pi]),
                Side::Client => (&client_out[ri][pi], &mut client_sets[pi], &server_sets[pi]),
            };
            if let Some(v) = out.as_deref() {
                if other.contains(v) {
                    covered[pi] = true;
                }
                mine.insert(v);
            }
        }
        match side {
            Side::Server => n_left -= 1,
            Side::Client => m_left -= 1,
        }
    }

    let collect = |want: Side| -> Vec<Rule> {
        picks
            .iter()
            .filter(|(s, _)| *s == want)
            .map(|(_, ri)| pool.rules()[*ri].clone())
            .collect()
    };
    Ok(SplitResult {
        server: RuleSet::new(format!("{}-server", pool.name()), collect(Side::Server))?,
        client: RuleSet::new(format!("{}-client", pool.name()), collect(Side::Client))?,
        picks,
        covered: covered.iter().filter(|c| **c).count(),
        total: pairs.len(),
    })
}

fn non_identity(rule: &Rule, w: &str) -> Option<String> {
    rule.apply(w).filter(|v| v != w)
}
