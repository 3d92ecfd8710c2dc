use std::collections::BTreeSet;
use std::fs;
use std::io::Write;

use anyhow::{anyhow, bail, Context, Result};
use migp_core::attack::{synth_distribution, synth_pairs, PasswordDistribution};
use migp_core::pipeline::{clean_corpus, escape, read_raw_records, write_corpus, Credential};
use migp_core::similarity::{greedy_split, mine_rules_par, RuleSet, Side, TransformationPath};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use tracing::info;

use super::{create, open, read_pairs};
use crate::config::load_rules_arg;
use crate::{CleanArgs, MineArgs, SplitArgs, SynthArgs};

pub fn clean(a: &CleanArgs) -> Result<u8> {
    let raw = read_raw_records(open(&a.input)?).with_context(|| format!("reading {}", a.input.display()))?;
    let (kept, report) = clean_corpus(raw);
    let mut out = create(&a.out)?;
    write_corpus(&mut out, &kept)?;
    out.flush()?;
    match &a.report {
        Some(p) => fs::write(p, format!("{report}\n")).with_context(|| format!("writing {}", p.display()))?,
        None => eprintln!("{report}"),
    }
    Ok(0)
}

pub fn mine(a: &MineArgs) -> Result<u8> {
    let all = read_pairs(&a.pairs)?;
    let pairs: Vec<(String, String)> = all.iter().filter(|(x, y)| x != y).cloned().collect();
    if pairs.len() < all.len() {
        info!(skipped = all.len() - pairs.len(), "identical pairs ignored");
    }
    if a.max_rules == 0 {
        bail!("--max-rules must be at least 1");
    }
    let mined = mine_rules_par(&pairs, a.max_rules)?;
    let named = RuleSet::new(a.name.clone(), mined.rules().to_vec())?;
    fs::write(&a.out, named.to_text()).with_context(|| format!("writing {}", a.out.display()))?;
    eprintln!("mined {} rules from {} pairs", named.len(), pairs.len());
    Ok(0)
}

/// Users with one to four distinct passwords drawn from `dist`.
fn synth_corpus(dist: &PasswordDistribution, seed: u64, size: usize) -> Result<Vec<Credential>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(size);
    let mut user = 0usize;
    while out.len() < size {
        let k = rng.gen_range(1..=4).min(size - out.len());
        let pws: BTreeSet<&String> = dist.sample_indices(k, &mut rng).into_iter().map(|i| &dist.support()[i]).collect();
        for p in pws {
            out.push(Credential::new(&format!("user{user:07}@example.org"), p)?);
        }
        user += 1;
    }
    Ok(out)
}

pub fn synth(a: &SynthArgs) -> Result<u8> {
    if a.out.is_none() && a.pairs_out.is_none() && a.corpus_out.is_none() {
        bail!("nothing to write: pass --out, --pairs-out or --corpus-out");
    }
    let dist = synth_distribution(a.seed, a.size, a.s)?;
    if let Some(p) = &a.out {
        let mut w = create(p)?;
        dist.write_text(&mut w)?;
        w.flush()?;
    }
    if let Some(p) = &a.pairs_out {
        let plant: TransformationPath = a.plant.parse().map_err(|e| anyhow!("--plant: {e}"))?;
        let pairs = synth_pairs(&dist, a.seed, a.pairs_count, &plant, a.plant_rate);
        let mut w = create(p)?;
        for (x, y) in &pairs {
            writeln!(w, "{}\t{}", escape(x), escape(y))?;
        }
        w.flush()?;
    }
    if let Some(p) = &a.corpus_out {
        let corpus = synth_corpus(&dist, a.seed, a.corpus_size)?;
        let mut w = create(p)?;
        write_corpus(&mut w, &corpus)?;
        w.flush()?;
    }
    Ok(0)
}

pub fn split(a: &SplitArgs) -> Result<u8> {
    let pool = load_rules_arg(&a.pool)?;
    let pairs = read_pairs(&a.pairs)?;
    let result = greedy_split(&pool, &pairs, a.n, a.m)?;
    println!("step\tside\trule");
    for (i, (side, rule)) in result.picks.iter().enumerate() {
        let side = match side {
            Side::Server => "server",
            Side::Client => "client",
        };
        println!("{}\t{side}\t{}", i + 1, pool.rules()[*rule].serialize_paths());
    }
    let pct = if result.total == 0 { 0.0 } else { 100.0 * result.covered as f64 / result.total as f64 };
    println!("covered {} of {} pairs ({pct:.2}%)", result.covered, result.total);
    if let Some(p) = &a.server_out {
        fs::write(p, result.server.to_text()).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = &a.client_out {
        fs::write(p, result.client.to_text()).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(0)
}
