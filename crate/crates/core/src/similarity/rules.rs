//! Ranked rule sets: the built-in Das-R table, corpus mining and a plain-text
//! serialization.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use super::keypress::KeySymbol;
use super::path::{derive_path, parse_path, TransformationPath, UnitTransformation};
use super::SimilarityError;

/// One rank slot. Most slots hold a single path; a slot with alternatives
/// applies the first one that is applicable.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Rule {
    alternatives: Vec<TransformationPath>,
    support: u64,
}

impl Rule {
    pub fn new(path: TransformationPath, support: u64) -> Self {
        Rule {
            alternatives: vec![path],
            support,
        }
    }

    pub fn with_alternatives(
        alternatives: Vec<TransformationPath>,
        support: u64,
    ) -> Result<Self, SimilarityError> {
        if alternatives.is_empty() {
            return Err(SimilarityError::EmptyPath);
        }
        Ok(Rule {
            alternatives,
            support,
        })
    }

    pub fn alternatives(&self) -> &[TransformationPath] {
        &self.alternatives
    }

    /// Number of corpus pairs explained; 0 for built-in tables.
    pub fn support(&self) -> u64 {
        self.support
    }

    pub fn apply(&self, password: &str) -> Option<String> {
        self.alternatives.iter().find_map(|p| p.apply(password))
    }

    /// The alternatives in rule-set file form.
    pub fn serialize_paths(&self) -> String {
        self.alternatives
            .iter()
            .map(|p| p.to_string())
            .collect::<Vec<_>>()
            .join(" | ")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleSet {
    name: String,
    rules: Vec<Rule>,
}

impl RuleSet {
    pub fn new(name: impl Into<String>, rules: Vec<Rule>) -> Result<Self, SimilarityError> {
        let name = name.into();
        if name.is_empty() || name.chars().any(|c| c.is_whitespace()) {
            return Err(SimilarityError::Parse(format!("bad rule set name {name:?}")));
        }
        let mut seen = HashSet::new();
        for rule in &rules {
            for p in &rule.alternatives {
                if !seen.insert(p) {
                    return Err(SimilarityError::DuplicatePath(p.to_string()));
                }
            }
        }
        Ok(RuleSet { name, rules })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// The first `k` ranks as a new set.
    pub fn truncated(&self, k: usize) -> RuleSet {
        RuleSet {
            name: self.name.clone(),
            rules: self.rules.iter().take(k).cloned().collect(),
        }
    }

    /// Stable identifier recorded in store headers: the name plus a short
    /// digest of the serialized table, so two different mined tables never
    /// share an id.
    pub fn id(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        format!("{}-{}", self.name, hex::encode(&digest[..4]))
    }

    /// Serializes as `support<TAB>path[ | path...]`, one rank per line, with
    /// a leading `# name: ...` comment.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# name: {}", self.name);
        for rule in &self.rules {
            let _ = writeln!(out, "{}\t{}", rule.support, rule.serialize_paths());
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, SimilarityError> {
        let mut name = None;
        let mut rules = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(n) = comment.trim().strip_prefix("name:") {
                    name = Some(n.trim().to_owned());
                }
                continue;
            }
            let at = |e: SimilarityError| SimilarityError::Parse(format!("line {}: {e}", lineno + 1));
            let (support, paths) = line
                .split_once('\t')
                .ok_or_else(|| at(SimilarityError::Parse("missing tab".into())))?;
            let support: u64 = support
                .trim()
                .parse()
                .map_err(|_| at(SimilarityError::Parse("bad support".into())))?;
            let alternatives = split_alternatives(paths)
                .iter()
                .map(|p| parse_path(p.trim()))
                .collect::<Result<Vec<_>, _>>()
                .map_err(at)?;
            rules.push(Rule::with_alternatives(alternatives, support).map_err(at)?);
        }
        RuleSet::new(name.unwrap_or_else(|| "custom".to_owned()), rules)
    }
}

fn split_alternatives(s: &str) -> Vec<String> {
    super::path::split_escaped(s, '|')
}

/// The built-in ten-rule Das-R table in rank order.
pub fn dasr_ruleset() -> RuleSet {
    use KeySymbol::{Char, Shift};
    use UnitTransformation as U;
    let one = |e: U| Rule::new(TransformationPath::single(e), 0);
    let many = |es: Vec<U>| Rule::new(TransformationPath::new(es).expect("nonempty"), 0);
    let rules = vec![
        one(U::delete(-1)),
        Rule::with_alternatives(
            vec![
                TransformationPath::single(U::insert(Shift, 1)),
                TransformationPath::single(U::delete_if(Shift, 1)),
            ],
            0,
        )
        .expect("nonempty"),
        many(vec![U::delete(-2), U::delete(-1)]),
        many(vec![U::delete(-3), U::delete(-2), U::delete(-1)]),
        one(U::insert(Char(b'0'), 1)),
        one(U::insert(Char(b'1'), -1)),
        one(U::insert(Char(b'a'), 1)),
        one(U::insert(Char(b'q'), 1)),
        one(U::delete(1)),
        one(U::insert(Char(b'0'), -1)),
    ];
    RuleSet::new("das-r", rules).expect("built-in table has no duplicates")
}

/// Counts the shortest path of every pair and keeps the `max_rules` most
/// frequent, ranked by support, then path length, then serialization.
pub fn mine_rules<I, A, B>(pairs: I, max_rules: usize) -> Result<RuleSet, SimilarityError>
where
    I: IntoIterator<Item = (A, B)>,
    A: AsRef<str>,
    B: AsRef<str>,
{
    let mut counts: HashMap<TransformationPath, u64> = HashMap::new();
    let mut any = false;
    for (a, b) in pairs {
        any = true;
        let path = derive_path(a.as_ref(), b.as_ref())?;
        *counts.entry(path).or_default() += 1;
    }
    if !any {
        return Err(SimilarityError::EmptyCorpus);
    }
    Ok(rank_counts(counts, max_rules))
}

/// Mines in parallel, with the same result as [`mine_rules`].
pub fn mine_rules_par(
    pairs: &[(String, String)],
    max_rules: usize,
) -> Result<RuleSet, SimilarityError> {
    use rayon::prelude::*;
    if pairs.is_empty() {
        return Err(SimilarityError::EmptyCorpus);
    }
    let counts = pairs
        .par_chunks(4096)
        .map(|chunk| {
            let mut local: HashMap<TransformationPath, u64> = HashMap::new();
            for (a, b) in chunk {
                *local.entry(derive_path(a, b)?).or_default() += 1;
            }
            Ok::<_, SimilarityError>(local)
        })
        .try_reduce(HashMap::new, |mut acc, other| {
            for (k, v) in other {
                *acc.entry(k).or_default() += v;
            }
            Ok(acc)
        })?;
    Ok(rank_counts(counts, max_rules))
}

fn rank_counts(counts: HashMap<TransformationPath, u64>, max_rules: usize) -> RuleSet {
    let mut ranked: Vec<(TransformationPath, u64, String)> = counts
        .into_iter()
        .map(|(p, c)| {
            let s = p.to_string();
            (p, c, s)
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.1.cmp(&a.1)
            .then(a.0.len().cmp(&b.0.len()))
            .then_with(|| a.2.cmp(&b.2))
    });
    ranked.truncate(max_rules);
    let rules = ranked.into_iter().map(|(p, c, _)| Rule::new(p, c)).collect();
    RuleSet::new("wedit", rules).expect("counted paths are distinct")
}
