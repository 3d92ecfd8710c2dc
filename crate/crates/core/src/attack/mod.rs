//! Breach-extraction simulation: the ideal oracle, balls, the greedy
//! attacker and experiment grids over synthetic distributions.

mod balls;
mod distribution;
mod greedy;
mod model;
mod oracle;
mod simulate;

pub use balls::{compute_balls, fixed_weight, Ball, BallIndex, WEIGHT_SCALE};
pub use distribution::{synth_distribution, synth_pairs, PasswordDistribution};
pub use greedy::{greedy_attack, AttackOutcome};
pub use model::{ExplicitModel, RuleModel, VariantModel};
pub use oracle::{OracleAnswer, OracleState, TranscriptEntry};
pub use simulate::{
    blocked_set, exact_baseline, format_table, sample_std, simulate_extraction, write_tsv, CellResult, SimConfig,
};

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum AttackError {
    #[error("password distribution is empty")]
    EmptyDistribution,
    #[error("invalid attack parameters: {0}")]
    Invalid(String),
}
