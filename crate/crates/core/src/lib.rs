//! Compromised-credential checking that also flags passwords similar to a
//! breached one.
//!
//! A server holds a bucketized store of PRF outputs of breached
//! `(username, password)` pairs and of rule-generated variants of each
//! password, with a flag separating the two. A client sends the username's
//! bucket prefix and blinded PRF inputs for its password (plus optional
//! client-side variants), unblinds the server's answers and looks them up in
//! the returned bucket. The server learns neither the password nor the full
//! username.
//!
//! Modules:
//! - [`oprf`]: the blinded PRF.
//! - [`similarity`]: keypress edit paths, ranked rule sets and variant generation.
//! - [`rate_limiter`]: slow hash, time-lock and secret-salt output hashes.
//! - [`pipeline`]: corpus cleaning, blocklisting, store building and key rotation.
//! - [`server`] and [`client`]: the online protocol, in process or over HTTP.
//! - [`attack`]: the extraction game and greedy attacker used to measure leakage.

pub mod attack;
pub mod client;
pub mod oprf;
pub mod pipeline;
pub mod rate_limiter;
pub mod server;
pub mod similarity;

pub use client::{MigpClient, QueryOutcome};
pub use oprf::{PrfKey, PrfOutput};
pub use pipeline::{BucketId, BucketStore, Credential, EntryKind, EntryMode, StoreHeader};
pub use rate_limiter::{HashSpec, ServerHash};
pub use server::{MigpServer, ServerConfig};
pub use similarity::{Rule, RuleSet, TransformationPath, UnitTransformation};
