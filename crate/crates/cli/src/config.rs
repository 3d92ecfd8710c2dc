//! `key = value` files with `#` comments, used for both the server
//! configuration and the secrets file.

use std::collections::BTreeMap;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use migp_core::pipeline::{check_prefix_bits, EntryMode, MAX_STORE_PREFIX_BITS};
use migp_core::rate_limiter::{SaltParams, SlowHashParams, MIN_MODULUS_BITS};
use migp_core::server::{RateConfig, ServerConfig, DEFAULT_M_MAX};
use migp_core::similarity::{dasr_ruleset, RuleSet};

pub const GROUP: &str = "ristretto255";

/// Parsed `key = value` lines in file order of first appearance.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KeyValues {
    map: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", i + 1))?;
            let k = k.trim();
            if k.is_empty() {
                bail!("line {}: empty key", i + 1);
            }
            if map.insert(k.to_owned(), v.trim().to_owned()).is_some() {
                bail!("line {}: duplicate key `{k}`", i + 1);
            }
        }
        Ok(KeyValues { map })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|_| anyhow!("`{key}`: cannot parse {v:?}")))
            .transpose()
    }
}

/// Rewrites `key = value` in `text`, keeping comments and order. Appends the
/// line if the key is absent.
pub fn set_value(text: &str, key: &str, value: &str) -> String {
    let mut out = String::new();
    let mut found = false;
    for line in text.lines() {
        let is_key = line
            .trim()
            .split_once('=')
            .is_some_and(|(k, _)| !line.trim().starts_with('#') && k.trim() == key);
        if is_key {
            out.push_str(&format!("{key} = {value}\n"));
            found = true;
        } else {
            out.push_str(line);
            out.push('\n');
        }
    }
    if !found {
        out.push_str(&format!("{key} = {value}\n"));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HashChoice {
    Fast,
    Slow(SlowHashParams),
    Timelock { bits: usize, v: u64 },
    Salted(SaltParams),
}

impl HashChoice {
    pub fn name(&self) -> &'static str {
        match self {
            HashChoice::Fast => "fast",
            HashChoice::Slow(_) => "slow",
            HashChoice::Timelock { .. } => "timelock",
            HashChoice::Salted(_) => "salted",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Config {
    pub store: PathBuf,
    pub key: PathBuf,
    pub sidecar: Option<PathBuf>,
    pub prefix_bits: u8,
    pub n: usize,
    pub rules: RuleSet,
    pub m_max: u16,
    pub beta: usize,
    pub entry_mode: EntryMode,
    pub hash: HashChoice,
    pub rate: RateConfig,
    pub listen: SocketAddr,
    pub log_level: Option<String>,
}

const KNOWN: &[&str] = &[
    "store",
    "key",
    "sidecar",
    "group",
    "prefix_bits",
    "n",
    "rules",
    "m_max",
    "beta",
    "entry_mode",
    "hash",
    "slow_m_cost_kib",
    "slow_t_cost",
    "slow_p_cost",
    "timelock_bits",
    "timelock_v",
    "salt_bits",
    "rate_budget",
    "rate_window_secs",
    "listen",
    "log_level",
];

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Config::from_text(&text, base).with_context(|| format!("config {}", path.display()))
    }

    /// Relative paths are taken relative to `base`.
    pub fn from_text(text: &str, base: &Path) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        if let Some(k) = kv.keys().find(|k| !KNOWN.contains(k)) {
            bail!("unknown key `{k}`");
        }
        let path = |key: &str| kv.get(key).map(|p| base.join(p));
        let group = kv.get("group").unwrap_or(GROUP);
        if group != GROUP {
            bail!("unsupported group `{group}`; only {GROUP} is available");
        }
        let prefix_bits: u8 = kv.parsed("prefix_bits")?.unwrap_or(16);
        check_prefix_bits(prefix_bits)?;
        if prefix_bits > MAX_STORE_PREFIX_BITS {
            bail!("prefix_bits must be at most {MAX_STORE_PREFIX_BITS}");
        }
        let m_max: u16 = kv.parsed("m_max")?.unwrap_or(DEFAULT_M_MAX);
        if m_max == 0 {
            bail!("m_max must be at least 1");
        }
        let entry_mode = match kv.get("entry_mode") {
            None => EntryMode::LastBit,
            Some(s) => EntryMode::parse(s).ok_or_else(|| anyhow!("entry_mode must be last-bit or flag-byte"))?,
        };
        let rules = match path("rules") {
            None => dasr_ruleset(),
            Some(_) if kv.get("rules") == Some("das-r") => dasr_ruleset(),
            Some(p) => load_rules(&p)?,
        };
        let hash = match kv.get("hash").unwrap_or("fast") {
            "fast" => HashChoice::Fast,
            "slow" => {
                let d = SlowHashParams::default();
                HashChoice::Slow(SlowHashParams::new(
                    kv.parsed("slow_m_cost_kib")?.unwrap_or(d.m_cost_kib()),
                    kv.parsed("slow_t_cost")?.unwrap_or(d.t_cost()),
                    kv.parsed("slow_p_cost")?.unwrap_or(d.p_cost()),
                )?)
            }
            "timelock" => {
                let bits = kv.parsed("timelock_bits")?.unwrap_or(MIN_MODULUS_BITS);
                let v = kv.parsed("timelock_v")?.unwrap_or(1 << 16);
                if bits < MIN_MODULUS_BITS || v == 0 {
                    bail!("timelock needs timelock_bits >= {MIN_MODULUS_BITS} and timelock_v >= 1");
                }
                HashChoice::Timelock { bits, v }
            }
            "salted" => HashChoice::Salted(SaltParams::new(kv.parsed("salt_bits")?.unwrap_or(12))?),
            other => bail!("hash must be fast, slow, timelock or salted, not `{other}`"),
        };
        let budget: u32 = kv.parsed("rate_budget")?.unwrap_or(600);
        let window: u64 = kv.parsed("rate_window_secs")?.unwrap_or(60);
        let rate = if budget == 0 {
            RateConfig::unlimited()
        } else {
            if window == 0 {
                bail!("rate_window_secs must be at least 1");
            }
            RateConfig::per_window(budget, Duration::from_secs(window))
        };
        Ok(Config {
            store: path("store").unwrap_or_else(|| base.join("store.migp")),
            key: path("key").unwrap_or_else(|| base.join("server.key")),
            sidecar: path("sidecar"),
            prefix_bits,
            n: kv.parsed("n")?.unwrap_or(10),
            rules,
            m_max,
            beta: kv.parsed("beta")?.unwrap_or(0),
            entry_mode,
            hash,
            rate,
            listen: kv.parsed("listen")?.unwrap_or_else(|| "127.0.0.1:8080".parse().expect("valid")),
            log_level: kv.get("log_level").map(str::to_owned),
        })
    }

    pub fn server_config(&self) -> ServerConfig {
        ServerConfig {
            m_max: self.m_max,
            rate: self.rate,
        }
    }
}

/// `das-r` names the built-in table; anything else is a rule-set file.
pub fn load_rules_arg(arg: &str) -> Result<RuleSet> {
    if arg == "das-r" {
        Ok(dasr_ruleset())
    } else {
        load_rules(Path::new(arg))
    }
}

pub fn load_rules(path: &Path) -> Result<RuleSet> {
    let text = fs::read_to_string(path).with_context(|| format!("reading rules {}", path.display()))?;
    RuleSet::from_text(&text).with_context(|| format!("rules {}", path.display()))
}
