//! Offline pre-processing of breach data into a bucketized store.

mod blocklist;
mod bucket;
mod corpus;
mod entry;
mod store;

pub use blocklist::{build_blocklist, rank_by_frequency, Blocklist};
pub use bucket::{bucket_id, check_prefix_bits, BucketError, BucketId, MAX_PREFIX_BITS, MIN_PREFIX_BITS};
pub use corpus::{
    canonicalize_username, clean_corpus, escape, read_corpus, read_raw_records, unescape, write_corpus,
    CleanReport, Credential, CredentialError, CorpusError, RawRecord, MAX_PASSWORDS_PER_USER,
};
pub use entry::{encode_entry, EntryKind, EntryMode};
pub use store::{
    build_store, expand_corpus, rotate_store, Bucket, BucketStore, BuildOutput, BuildParams, ExpandedEntry,
    Sidecar, SidecarRecord, StoreError, StoreHeader, StoreStats, EPOCH_RANGE, MAX_STORE_PREFIX_BITS,
    STORE_MAGIC, STORE_VERSION,
};
