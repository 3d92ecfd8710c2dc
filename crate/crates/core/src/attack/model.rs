//! Similarity models used by the oracle and the attacker.

use std::collections::HashMap;

use crate::similarity::{generate_variants, RuleSet};

/// The server-side variant function `tau`.
pub trait VariantModel: Sync {
    /// Distinct variants of `password`, never including it.
    fn variants(&self, password: &str) -> Vec<String>;
}

/// `tau_n` from a ranked rule set.
#[derive(Clone, Debug)]
pub struct RuleModel {
    pub rules: RuleSet,
    pub n: usize,
}

impl RuleModel {
    pub fn new(rules: RuleSet, n: usize) -> Self {
        RuleModel { rules, n }
    }
}

impl VariantModel for RuleModel {
    fn variants(&self, password: &str) -> Vec<String> {
        generate_variants(&self.rules, password, self.n)
    }
}

/// A hand-written relation; passwords without an entry have no variants.
#[derive(Clone, Debug, Default)]
pub struct ExplicitModel {
    map: HashMap<String, Vec<String>>,
}

impl ExplicitModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, password: &str, variants: &[&str]) {
        let mut v: Vec<String> = Vec::new();
        for x in variants {
            if *x != password && !v.iter().any(|y| y == x) {
                v.push((*x).to_owned());
            }
        }
        self.map.insert(password.to_owned(), v);
    }
}

impl VariantModel for ExplicitModel {
    fn variants(&self, password: &str) -> Vec<String> {
        self.map.get(password).cloned().unwrap_or_default()
    }
}
