use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use migp_core::pipeline::{
    build_blocklist, bucket_id, build_store, expand_corpus, read_corpus, rotate_store, Blocklist, BucketStore,
    BuildParams, Credential, Sidecar, StoreStats,
};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use tracing::info;

use super::{create, open};
use crate::config::Config;
use crate::secrets::Secrets;
use crate::{init_logging, BuildArgs, RotateArgs};

fn rng_for(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_entropy(),
    }
}

/// Mean and standard deviation of per-bucket counts of the strings `corpus`
/// would store, computed from usernames alone.
fn projected_sizes(corpus: &[Credential], cfg: &Config, blocklist: &Blocklist) -> Result<(u64, f64, f64)> {
    let buckets = 1usize << cfg.prefix_bits;
    let mut sizes = vec![0u64; buckets];
    let entries = expand_corpus(corpus, &cfg.rules, cfg.n, blocklist);
    for e in &entries {
        sizes[bucket_id(&e.username, cfg.prefix_bits)?.index()] += 1;
    }
    let mean = entries.len() as f64 / buckets as f64;
    let var = sizes.iter().map(|s| (*s as f64 - mean).powi(2)).sum::<f64>() / buckets as f64;
    Ok((entries.len() as u64, mean, var.sqrt()))
}

fn print_stats(stats: &StoreStats, unblocked: Option<(u64, f64, f64)>) {
    println!("l\tbuckets\tentries\tavg\tstd\tmax\tempty\tentries_no_blocklist\tavg_no_blocklist\tstd_no_blocklist");
    let (e, m, s) = unblocked.unwrap_or((stats.entries, stats.mean, stats.std));
    println!(
        "{}\t{}\t{}\t{:.2}\t{:.2}\t{}\t{}\t{}\t{:.2}\t{:.2}",
        stats.prefix_bits, stats.buckets, stats.entries, stats.mean, stats.std, stats.max, stats.empty, e, m, s
    );
}

pub fn build(a: &BuildArgs, level: Option<&str>) -> Result<u8> {
    let cfg = Config::load(&a.config)?;
    init_logging(level.or(cfg.log_level.as_deref()), "info");
    let corpus = read_corpus(open(&a.corpus)?).with_context(|| format!("reading {}", a.corpus.display()))?;
    let mut rng = rng_for(a.seed);
    let (mut secrets, fresh) = if cfg.key.exists() {
        (Secrets::load(&cfg.key)?, false)
    } else {
        (Secrets::generate(&mut rng), true)
    };
    let added = secrets.ensure_for(&cfg.hash, &mut rng)?;
    if fresh || added {
        secrets.write(&cfg.key)?;
        info!(path = %cfg.key.display(), "wrote key file");
    }
    let hash = secrets.server_hash(&cfg.hash)?;
    let blocklist = build_blocklist(&corpus, cfg.beta, &cfg.rules, cfg.n);
    if let Some(p) = &a.blocklist_out {
        let mut w = create(p)?;
        blocklist.write_text(&mut w)?;
        w.flush()?;
    }
    info!(credentials = corpus.len(), blocked = blocklist.len(), "building store");
    let out = build_store(
        &corpus,
        &secrets.key,
        &BuildParams {
            prefix_bits: cfg.prefix_bits,
            rules: &cfg.rules,
            n: cfg.n,
            entry_mode: cfg.entry_mode,
            hash: &hash,
            blocklist: &blocklist,
            with_sidecar: cfg.sidecar.is_some(),
        },
    )?;
    out.store.write_atomic(&cfg.store)?;
    if let (Some(path), Some(sidecar)) = (&cfg.sidecar, &out.sidecar) {
        sidecar.write_atomic(path)?;
    }
    let unblocked = if blocklist.is_empty() {
        None
    } else {
        Some(projected_sizes(&corpus, &cfg, &Blocklist::empty())?)
    };
    print_stats(&out.store.stats(), unblocked);
    Ok(0)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn rotate(a: &RotateArgs, level: Option<&str>) -> Result<u8> {
    let cfg = Config::load(&a.config)?;
    init_logging(level.or(cfg.log_level.as_deref()), "info");
    let Some(sidecar_path) = cfg.sidecar.as_ref().filter(|p| p.exists()) else {
        bail!("rotation needs the build sidecar; set `sidecar` in the config and rebuild with `migp build`");
    };
    let store = BucketStore::load(&cfg.store)?;
    let sidecar = Sidecar::load(sidecar_path)?;
    let mut secrets = Secrets::load(&cfg.key)?;
    if store.header().epoch != secrets.key.epoch() {
        bail!(
            "store epoch {} does not match key epoch {}",
            store.header().epoch,
            secrets.key.epoch()
        );
    }
    let hash = secrets.server_hash(&cfg.hash)?;
    let new_key = secrets.key.rotate(&mut rng_for(a.seed));
    let out = rotate_store(&store, &secrets.key, &new_key, &sidecar, &hash)?;
    secrets.key = new_key;
    let next = with_suffix(&cfg.key, ".next");
    secrets.write(&next)?;
    out.store.write_atomic(&cfg.store)?;
    if let Some(sc) = &out.sidecar {
        sc.write_atomic(sidecar_path)?;
    }
    fs::rename(&next, &cfg.key).with_context(|| format!("replacing {}", cfg.key.display()))?;
    println!("rotated to epoch {} ({} entries)", secrets.key.epoch(), out.store.entry_count());
    Ok(0)
}
