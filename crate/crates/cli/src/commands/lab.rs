use std::fs;
use std::io::Write;
use std::time::Duration;

use anyhow::{Context, Result};
use migp_core::attack::{format_table, simulate_extraction, synth_distribution, write_tsv, PasswordDistribution, RuleModel, SimConfig};
use migp_core::rate_limiter::{
    calibrate_salt_bits, calibrate_slow_hash, calibrate_timelock, measure_hash_rate, TimelockParams,
};
use num_bigint::BigUint;
use rand::RngCore;

use super::{create, open};
use crate::config::{load_rules_arg, set_value};
use crate::{AttackArgs, Backend, CalibrateArgs};

pub fn attack(a: &AttackArgs) -> Result<u8> {
    let dist = match &a.dist {
        Some(p) => PasswordDistribution::read_text(open(p)?).with_context(|| format!("reading {}", p.display()))?,
        None => synth_distribution(a.synth_seed, a.synth_size, a.synth_s)?,
    };
    let rules = load_rules_arg(&a.rules)?;
    let cfg = SimConfig {
        n_grid: a.n_grid.clone(),
        beta_grid: a.beta_grid.clone(),
        q_grid: a.q_grid.clone(),
        m_grid: a.m_grid.clone(),
        targets: a.targets,
        folds: a.folds,
        seed: a.seed,
        candidate_k: a.candidate_k,
        final_guess_counts: !a.no_final_guess,
        exclude_blocked_targets: a.exclude_blocked_targets,
    };
    let rows = simulate_extraction(&dist, |n| RuleModel::new(rules.clone(), n), &cfg)?;
    print!("{}", format_table(&rows));
    if let Some(p) = &a.tsv {
        let mut w = create(p)?;
        write_tsv(&rows, &mut w)?;
        w.flush()?;
    }
    Ok(0)
}

/// An odd modulus of exactly `bits` bits. Squaring cost does not depend on
/// the factorization, so calibration needs no primes.
fn probe_modulus(bits: usize) -> BigUint {
    let mut bytes = vec![0u8; bits.div_ceil(8)];
    rand::thread_rng().fill_bytes(&mut bytes);
    let excess = bytes.len() * 8 - bits;
    bytes[0] &= 0xff >> excess;
    bytes[0] |= 0x80 >> excess;
    *bytes.last_mut().unwrap() |= 1;
    BigUint::from_bytes_be(&bytes)
}

pub fn calibrate(a: &CalibrateArgs) -> Result<u8> {
    let target = Duration::from_millis(a.target_ms);
    let (hash, settings): (&str, Vec<(&str, String)>) = match a.backend {
        Backend::Timelock => {
            let params = TimelockParams::new(probe_modulus(a.bits), 1)?;
            let tuned = calibrate_timelock(&params, target)?;
            ("timelock", vec![("timelock_bits", a.bits.to_string()), ("timelock_v", tuned.v().to_string())])
        }
        Backend::Slow => {
            let p = calibrate_slow_hash(target)?;
            (
                "slow",
                vec![
                    ("slow_m_cost_kib", p.m_cost_kib().to_string()),
                    ("slow_t_cost", p.t_cost().to_string()),
                    ("slow_p_cost", p.p_cost().to_string()),
                ],
            )
        }
        Backend::Salted => {
            let rate = measure_hash_rate();
            eprintln!("salted hash rate: {rate:.0}/s");
            let p = calibrate_salt_bits(rate, target)?;
            ("salted", vec![("salt_bits", p.bits().to_string())])
        }
    };
    for (k, v) in &settings {
        println!("{k} = {v}");
    }
    if let Some(path) = &a.config {
        let mut text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        text = set_value(&text, "hash", hash);
        for (k, v) in &settings {
            text = set_value(&text, k, v);
        }
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        eprintln!("updated {}", path.display());
    }
    Ok(0)
}
