//! Generative password similarity: keypress encoding, edit paths, ranked
//! rule sets and variant generation.

mod keypress;
mod path;
mod rules;
mod split;
mod variants;

use thiserror::Error;

pub use keypress::{keypress_decode, keypress_encode, validate_password, KeySymbol, PasswordError, MAX_PASSWORD_LEN};
pub use path::{
    apply_path, derive_path, edit_distance, location_for_index, location_for_slot, EditOp,
    TransformationPath, UnitTransformation,
};
pub use rules::{dasr_ruleset, mine_rules, mine_rules_par, Rule, RuleSet};
pub use split::{coverage, greedy_split, CoverageReport, PairLabeler, ReferenceLabeler, Side, SplitResult};
pub use variants::{generate_variants, hybrid_similar};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimilarityError {
    #[error(transparent)]
    Password(#[from] PasswordError),
    #[error("pair members are identical")]
    IdenticalPair,
    #[error("transformation path has no edits")]
    EmptyPath,
    #[error("pair corpus is empty")]
    EmptyCorpus,
    #[error("duplicate path in rule set: {0}")]
    DuplicatePath(String),
    #[error("rule set parse error: {0}")]
    Parse(String),
}
