//! The bucket store: building, the on-disk container, lookup and key
//! rotation.
//!
//! Container layout (integers little-endian):
//!
//! ```text
//! 0   magic "MIGP"
//! 4   version        u16
//! 6   group id       u8
//! 7   entry mode     u8
//! 8   prefix bits    u8
//! 9   hash kind      u8
//! 10  n              u16
//! 12  key epoch      u64
//! 20  beta           u64
//! 28  entry count    u64
//! 36  rule-set id    u16 length + bytes
//!     domain labels  u16 length + bytes
//!     hash params    u16 length + bytes
//!     offsets        (2^l + 1) x u64, cumulative entry counts
//!     entries        sorted within each bucket
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use rayon::prelude::*;

use super::blocklist::Blocklist;
use super::bucket::{bucket_id_canonical, check_prefix_bits, BucketError, BucketId};
use super::corpus::Credential;
use super::entry::{encode_entry, EntryKind, EntryMode};
use crate::oprf::{
    frame_credential, h2_message, keyed_element, rotation_exponent, GroupElement, OprfError, OutputHash, PrfKey,
    DOMAIN_LABELS, ELEMENT_LEN, GROUP_ID,
};
use crate::rate_limiter::{HashSpec, RateLimitError, ServerHash};
use crate::similarity::{generate_variants, RuleSet};

pub const STORE_MAGIC: &[u8; 4] = b"MIGP";
pub const STORE_VERSION: u16 = 1;
/// Largest prefix length a store supports; the dense offset index holds
/// `2^l + 1` words.
pub const MAX_STORE_PREFIX_BITS: u8 = 24;
/// Byte range of the key epoch in a serialized store.
pub const EPOCH_RANGE: std::ops::Range<usize> = 12..20;

const SIDECAR_MAGIC: &[u8; 4] = b"MIGS";
const SIDECAR_VERSION: u16 = 1;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
    #[error("malformed store: {0}")]
    Format(String),
    #[error("store and sidecar disagree: {0}")]
    Corrupt(String),
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error(transparent)]
    Oprf(#[from] OprfError),
    #[error(transparent)]
    Bucket(#[from] BucketError),
    #[error(transparent)]
    Hash(#[from] RateLimitError),
}

fn io_err(context: impl Into<String>) -> impl FnOnce(io::Error) -> StoreError {
    let context = context.into();
    move |source| StoreError::Io { context, source }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoreHeader {
    pub group_id: u8,
    pub entry_mode: EntryMode,
    pub prefix_bits: u8,
    pub hash: HashSpec,
    pub n: u16,
    pub epoch: u64,
    pub beta: u64,
    pub entry_count: u64,
    pub ruleset_id: String,
    pub labels: String,
}

impl StoreHeader {
    /// A header for an empty store with the fixed group and labels.
    pub fn new(
        prefix_bits: u8,
        entry_mode: EntryMode,
        hash: HashSpec,
        n: u16,
        epoch: u64,
        beta: u64,
        ruleset_id: impl Into<String>,
    ) -> Result<Self, StoreError> {
        check_store_prefix(prefix_bits)?;
        Ok(StoreHeader {
            group_id: GROUP_ID,
            entry_mode,
            prefix_bits,
            hash,
            n,
            epoch,
            beta,
            entry_count: 0,
            ruleset_id: ruleset_id.into(),
            labels: DOMAIN_LABELS.to_owned(),
        })
    }

    pub fn num_buckets(&self) -> usize {
        1usize << self.prefix_bits
    }
}

fn check_store_prefix(bits: u8) -> Result<(), StoreError> {
    check_prefix_bits(bits)?;
    if bits > MAX_STORE_PREFIX_BITS {
        return Err(StoreError::Invalid(format!(
            "stores support prefix lengths up to {MAX_STORE_PREFIX_BITS} bits"
        )));
    }
    Ok(())
}

/// A read-only view of one bucket's sorted entries.
#[derive(Clone, Copy, Debug)]
pub struct Bucket<'a> {
    data: &'a [u8],
    entry_len: usize,
}

impl<'a> Bucket<'a> {
    /// Wraps a raw blob, checking the length and strict ordering.
    pub fn new(data: &'a [u8], entry_len: usize) -> Result<Self, StoreError> {
        if entry_len == 0 || data.len() % entry_len != 0 {
            return Err(StoreError::Format("bucket length is not a multiple of the entry size".into()));
        }
        let b = Bucket { data, entry_len };
        if !b.iter().zip(b.iter().skip(1)).all(|(x, y)| x < y) {
            return Err(StoreError::Format("bucket entries are not strictly sorted".into()));
        }
        Ok(b)
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.entry_len
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn entry_len(&self) -> usize {
        self.entry_len
    }

    pub fn as_bytes(&self) -> &'a [u8] {
        self.data
    }

    pub fn iter(&self) -> impl Iterator<Item = &'a [u8]> + 'a {
        self.data.chunks_exact(self.entry_len)
    }

    pub fn get(&self, i: usize) -> &'a [u8] {
        &self.data[i * self.entry_len..(i + 1) * self.entry_len]
    }

    pub fn contains(&self, entry: &[u8]) -> bool {
        if entry.len() != self.entry_len {
            return false;
        }
        let (mut lo, mut hi) = (0, self.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.get(mid).cmp(entry) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BucketStore {
    header: StoreHeader,
    offsets: Vec<u64>,
    data: Vec<u8>,
}

impl BucketStore {
    /// Builds a store from `(bucket index, entry)` pairs, sorting and
    /// deduplicating each bucket. The header's entry count is overwritten.
    pub fn from_entries<I>(mut header: StoreHeader, entries: I) -> Result<Self, StoreError>
    where
        I: IntoIterator<Item = (u32, Vec<u8>)>,
    {
        check_store_prefix(header.prefix_bits)?;
        let entry_len = header.entry_mode.entry_len();
        let buckets = header.num_buckets();
        let mut items: Vec<(u32, Vec<u8>)> = entries.into_iter().collect();
        for (b, e) in &items {
            if *b as usize >= buckets || e.len() != entry_len {
                return Err(StoreError::Invalid("entry bucket or length out of range".into()));
            }
        }
        items.par_sort_unstable();
        items.dedup();
        Ok(Self::from_sorted(&mut header, &items))
    }

    fn from_sorted(header: &mut StoreHeader, items: &[(u32, Vec<u8>)]) -> Self {
        let entry_len = header.entry_mode.entry_len();
        let mut offsets = vec![0u64; header.num_buckets() + 1];
        let mut data = Vec::with_capacity(items.len() * entry_len);
        for (b, e) in items {
            offsets[*b as usize + 1] += 1;
            data.extend_from_slice(e);
        }
        for i in 1..offsets.len() {
            offsets[i] += offsets[i - 1];
        }
        header.entry_count = items.len() as u64;
        BucketStore {
            header: header.clone(),
            offsets,
            data,
        }
    }

    pub fn header(&self) -> &StoreHeader {
        &self.header
    }

    pub fn entry_count(&self) -> u64 {
        self.header.entry_count
    }

    pub fn num_buckets(&self) -> usize {
        self.header.num_buckets()
    }

    pub fn bucket_len(&self, index: usize) -> usize {
        (self.offsets[index + 1] - self.offsets[index]) as usize
    }

    fn bucket_at(&self, index: usize) -> Bucket<'_> {
        let len = self.header.entry_mode.entry_len();
        let (a, b) = (self.offsets[index] as usize, self.offsets[index + 1] as usize);
        Bucket {
            data: &self.data[a * len..b * len],
            entry_len: len,
        }
    }

    pub fn fetch_bucket(&self, id: BucketId) -> Result<Bucket<'_>, StoreError> {
        if id.bits() != self.header.prefix_bits {
            return Err(StoreError::Invalid(format!(
                "bucket id has {} bits, store uses {}",
                id.bits(),
                self.header.prefix_bits
            )));
        }
        Ok(self.bucket_at(id.index()))
    }

    /// Every entry with its bucket index, in store order.
    pub fn entries(&self) -> impl Iterator<Item = (u32, &[u8])> + '_ {
        (0..self.num_buckets()).flat_map(move |b| self.bucket_at(b).iter().map(move |e| (b as u32, e)))
    }

    pub fn stats(&self) -> StoreStats {
        let sizes = (0..self.num_buckets()).map(|b| self.bucket_len(b) as f64);
        let count = self.num_buckets() as f64;
        let mean = self.entry_count() as f64 / count;
        let var = sizes.clone().map(|s| (s - mean) * (s - mean)).sum::<f64>() / count;
        StoreStats {
            prefix_bits: self.header.prefix_bits,
            buckets: self.num_buckets() as u64,
            entries: self.entry_count(),
            mean,
            std: var.sqrt(),
            max: (0..self.num_buckets()).map(|b| self.bucket_len(b)).max().unwrap_or(0) as u64,
            empty: (0..self.num_buckets()).filter(|&b| self.bucket_len(b) == 0).count() as u64,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let h = &self.header;
        let mut out = Vec::with_capacity(64 + self.offsets.len() * 8 + self.data.len());
        out.extend_from_slice(STORE_MAGIC);
        out.extend_from_slice(&STORE_VERSION.to_le_bytes());
        out.push(h.group_id);
        out.push(h.entry_mode as u8);
        out.push(h.prefix_bits);
        out.push(h.hash.kind() as u8);
        out.extend_from_slice(&h.n.to_le_bytes());
        out.extend_from_slice(&h.epoch.to_le_bytes());
        out.extend_from_slice(&h.beta.to_le_bytes());
        out.extend_from_slice(&h.entry_count.to_le_bytes());
        put_bytes(&mut out, h.ruleset_id.as_bytes());
        put_bytes(&mut out, h.labels.as_bytes());
        put_bytes(&mut out, &h.hash.params_bytes());
        for o in &self.offsets {
            out.extend_from_slice(&o.to_le_bytes());
        }
        out.extend_from_slice(&self.data);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, StoreError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != STORE_MAGIC {
            return Err(StoreError::Format("bad magic".into()));
        }
        let version = r.u16()?;
        if version != STORE_VERSION {
            return Err(StoreError::Format(format!("unsupported version {version}")));
        }
        let group_id = r.u8()?;
        if group_id != GROUP_ID {
            return Err(StoreError::Format(format!("unknown group id {group_id}")));
        }
        let entry_mode = EntryMode::from_u8(r.u8()?).ok_or_else(|| StoreError::Format("bad entry mode".into()))?;
        let prefix_bits = r.u8()?;
        check_store_prefix(prefix_bits).map_err(|e| StoreError::Format(e.to_string()))?;
        let hash_kind = r.u8()?;
        let n = r.u16()?;
        let epoch = r.u64()?;
        let beta = r.u64()?;
        let entry_count = r.u64()?;
        let ruleset_id = r.string()?;
        let labels = r.string()?;
        let hash_len = r.u16()? as usize;
        let hash = HashSpec::from_parts(hash_kind, r.take(hash_len)?)?;
        let header = StoreHeader {
            group_id,
            entry_mode,
            prefix_bits,
            hash,
            n,
            epoch,
            beta,
            entry_count,
            ruleset_id,
            labels,
        };
        let mut offsets = Vec::with_capacity(header.num_buckets() + 1);
        for _ in 0..=header.num_buckets() {
            offsets.push(r.u64()?);
        }
        if offsets[0] != 0 || offsets.windows(2).any(|w| w[0] > w[1]) || offsets[offsets.len() - 1] != entry_count {
            return Err(StoreError::Format("offset index is inconsistent".into()));
        }
        let data_len = entry_count
            .checked_mul(entry_mode.entry_len() as u64)
            .ok_or_else(|| StoreError::Format("entry count overflow".into()))? as usize;
        let data = r.take(data_len)?.to_vec();
        if r.pos != bytes.len() {
            return Err(StoreError::Format("trailing bytes".into()));
        }
        let store = BucketStore { header, offsets, data };
        for b in 0..store.num_buckets() {
            let bucket = store.bucket_at(b);
            Bucket::new(bucket.data, bucket.entry_len)?;
        }
        Ok(store)
    }

    /// Writes via a temporary file in the same directory and a rename, so
    /// readers never see a partial store.
    pub fn write_atomic(&self, path: &Path) -> Result<(), StoreError> {
        write_atomic(path, &self.to_bytes(), false)
    }

    pub fn load(path: &Path) -> Result<Self, StoreError> {
        let bytes = fs::read(path).map_err(io_err(format!("reading {}", path.display())))?;
        BucketStore::from_bytes(&bytes)
    }
}

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    out.extend_from_slice(&(b.len() as u16).to_le_bytes());
    out.extend_from_slice(b);
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], StoreError> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len());
        let end = end.ok_or_else(|| StoreError::Format("truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, StoreError> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, StoreError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }
    fn u64(&mut self) -> Result<u64, StoreError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn string(&mut self) -> Result<String, StoreError> {
        let n = self.u16()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| StoreError::Format("non-UTF-8 string".into()))
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8], private: bool) -> Result<(), StoreError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let ctx = || format!("writing {}", path.display());
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(ctx()))?;
    #[cfg(unix)]
    if private {
        use std::os::unix::fs::PermissionsExt;
        fs::set_permissions(tmp.path(), fs::Permissions::from_mode(0o600)).map_err(io_err(ctx()))?;
    }
    #[cfg(not(unix))]
    let _ = private;
    tmp.write_all(bytes).map_err(io_err(ctx()))?;
    tmp.as_file().sync_all().map_err(io_err(ctx()))?;
    tmp.persist(path).map_err(|e| StoreError::Io {
        context: ctx(),
        source: e.error,
    })?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct StoreStats {
    pub prefix_bits: u8,
    pub buckets: u64,
    pub entries: u64,
    pub mean: f64,
    pub std: f64,
    pub max: u64,
    pub empty: u64,
}

/// `H1(x)^k` for one store entry, kept offline so the store can be re-keyed
/// without recomputing the hash to the group.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SidecarRecord {
    pub kind: EntryKind,
    pub input: Vec<u8>,
    pub element: [u8; ELEMENT_LEN],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sidecar {
    pub epoch: u64,
    pub records: Vec<SidecarRecord>,
}

impl Sidecar {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(SIDECAR_MAGIC);
        out.extend_from_slice(&SIDECAR_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.epoch.to_le_bytes());
        for rec in &self.records {
            out.push(rec.kind as u8);
            put_bytes(&mut out, &rec.input);
            out.extend_from_slice(&rec.element);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, StoreError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != SIDECAR_MAGIC || r.u16()? != SIDECAR_VERSION {
            return Err(StoreError::Format("not a sidecar file".into()));
        }
        let count = r.u64()?;
        let epoch = r.u64()?;
        let mut records = Vec::new();
        for _ in 0..count {
            let kind = EntryKind::from_u8(r.u8()?).ok_or_else(|| StoreError::Format("bad entry kind".into()))?;
            let n = r.u16()? as usize;
            let input = r.take(n)?.to_vec();
            let element = r.take(ELEMENT_LEN)?.try_into().expect("32 bytes");
            records.push(SidecarRecord { kind, input, element });
        }
        if r.pos != bytes.len() {
            return Err(StoreError::Format("trailing bytes in sidecar".into()));
        }
        Ok(Sidecar { epoch, records })
    }

    /// Written with owner-only permissions.
    pub fn write_atomic(&self, path: &Path) -> Result<(), StoreError> {
        write_atomic(path, &self.to_bytes(), true)
    }

    pub fn load(path: &Path) -> Result<Self, StoreError> {
        let bytes = fs::read(path).map_err(io_err(format!("reading {}", path.display())))?;
        Sidecar::from_bytes(&bytes)
    }
}

pub struct BuildParams<'a> {
    pub prefix_bits: u8,
    pub rules: &'a RuleSet,
    pub n: usize,
    pub entry_mode: EntryMode,
    pub hash: &'a ServerHash,
    pub blocklist: &'a Blocklist,
    pub with_sidecar: bool,
}

pub struct BuildOutput {
    pub store: BucketStore,
    pub sidecar: Option<Sidecar>,
}

/// One credential string to be stored, before PRF evaluation.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ExpandedEntry {
    pub username: String,
    pub password: String,
    pub kind: EntryKind,
}

/// The distinct `(user, password, kind)` strings a store will hold, sorted.
/// Each user's breached passwords are exact; variants of them that are not
/// themselves breached for that user are variant entries; blocklisted
/// strings are dropped on both sides.
pub fn expand_corpus(corpus: &[Credential], rules: &RuleSet, n: usize, blocklist: &Blocklist) -> Vec<ExpandedEntry> {
    let mut users: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for c in corpus {
        users.entry(c.username()).or_default().insert(c.password());
    }
    let per_user: Vec<Vec<ExpandedEntry>> = users
        .par_iter()
        .map(|(u, exact)| {
            let mut out = Vec::new();
            let mut variants = BTreeSet::new();
            for w in exact {
                variants.extend(generate_variants(rules, w, n));
                if !blocklist.contains(w) {
                    out.push(ExpandedEntry {
                        username: u.to_string(),
                        password: w.to_string(),
                        kind: EntryKind::Exact,
                    });
                }
            }
            for v in variants {
                if !exact.contains(v.as_str()) && !blocklist.contains(&v) {
                    out.push(ExpandedEntry {
                        username: u.to_string(),
                        password: v,
                        kind: EntryKind::Variant,
                    });
                }
            }
            out
        })
        .collect();
    per_user.into_iter().flatten().collect()
}

struct Computed {
    bucket: u32,
    entry: Vec<u8>,
    record: Option<SidecarRecord>,
}

pub fn build_store(corpus: &[Credential], key: &PrfKey, params: &BuildParams<'_>) -> Result<BuildOutput, StoreError> {
    check_store_prefix(params.prefix_bits)?;
    let n = u16::try_from(params.n).map_err(|_| StoreError::Invalid("n exceeds 65535".into()))?;
    let mut header = StoreHeader::new(
        params.prefix_bits,
        params.entry_mode,
        params.hash.spec(),
        n,
        key.epoch(),
        params.blocklist.beta() as u64,
        params.rules.id(),
    )?;
    let expanded = expand_corpus(corpus, params.rules, params.n, params.blocklist);
    let computed: Vec<Computed> = expanded
        .par_iter()
        .map(|e| {
            let input = frame_credential(&e.username, &e.password)?;
            let element = keyed_element(key, &input)?;
            let out = params.hash.digest(&h2_message(&input, &element));
            Ok(Computed {
                bucket: bucket_id_canonical(&e.username, params.prefix_bits).prefix(),
                entry: encode_entry(params.entry_mode, &out, e.kind),
                record: params.with_sidecar.then(|| SidecarRecord {
                    kind: e.kind,
                    input,
                    element: element.to_bytes(),
                }),
            })
        })
        .collect::<Result<_, StoreError>>()?;
    Ok(assemble(&mut header, computed, params.with_sidecar))
}

fn assemble(header: &mut StoreHeader, mut computed: Vec<Computed>, with_sidecar: bool) -> BuildOutput {
    computed.par_sort_by(|a, b| (a.bucket, &a.entry).cmp(&(b.bucket, &b.entry)));
    computed.dedup_by(|b, a| a.bucket == b.bucket && a.entry == b.entry);
    let mut records = Vec::with_capacity(if with_sidecar { computed.len() } else { 0 });
    let items: Vec<(u32, Vec<u8>)> = computed
        .into_iter()
        .map(|c| {
            if let Some(r) = c.record {
                records.push(r);
            }
            (c.bucket, c.entry)
        })
        .collect();
    let store = BucketStore::from_sorted(header, &items);
    let sidecar = with_sidecar.then(|| Sidecar {
        epoch: store.header.epoch,
        records,
    });
    BuildOutput { store, sidecar }
}

/// Re-keys `store` from `old` to `new` using the sidecar, producing the same
/// store (and sidecar) a fresh build under `new` would. Each record is
/// checked against the store entry it claims to produce.
pub fn rotate_store(
    store: &BucketStore,
    old: &PrfKey,
    new: &PrfKey,
    sidecar: &Sidecar,
    hash: &ServerHash,
) -> Result<BuildOutput, StoreError> {
    if sidecar.records.len() as u64 != store.entry_count() {
        return Err(StoreError::Corrupt(format!(
            "sidecar has {} records, store has {} entries",
            sidecar.records.len(),
            store.entry_count()
        )));
    }
    if sidecar.epoch != store.header.epoch || old.epoch() != store.header.epoch {
        return Err(StoreError::Corrupt("key epochs of store, sidecar and old key differ".into()));
    }
    if hash.spec() != store.header.hash {
        return Err(StoreError::Invalid("hash back-end does not match the store header".into()));
    }
    let mode = store.header.entry_mode;
    let exp = rotation_exponent(old, new);
    let entries: Vec<(u32, &[u8])> = store.entries().collect();
    let computed: Vec<Computed> = entries
        .par_iter()
        .zip(sidecar.records.par_iter())
        .enumerate()
        .map(|(i, ((bucket, stored), rec))| {
            let element = GroupElement::from_bytes(&rec.element)?;
            let before = hash.digest(&h2_message(&rec.input, &element));
            if encode_entry(mode, &before, rec.kind) != *stored {
                return Err(StoreError::Corrupt(format!("sidecar record {i} does not match its entry")));
            }
            let rotated = element.pow(&exp);
            let out = hash.digest(&h2_message(&rec.input, &rotated));
            Ok(Computed {
                bucket: *bucket,
                entry: encode_entry(mode, &out, rec.kind),
                record: Some(SidecarRecord {
                    kind: rec.kind,
                    input: rec.input.clone(),
                    element: rotated.to_bytes(),
                }),
            })
        })
        .collect::<Result<_, StoreError>>()?;
    let mut header = store.header.clone();
    header.epoch = new.epoch();
    Ok(assemble(&mut header, computed, true))
}
