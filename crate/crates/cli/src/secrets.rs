//! The server secrets file: the PRF key and its epoch, plus the time-lock
//! factors or salt seed when those back-ends are in use. Always written with
//! owner-only permissions and never printed.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use migp_core::oprf::{PrfKey, Scalar};
use migp_core::rate_limiter::{generate_timelock, ServerHash, TimelockParams, TimelockTrapdoor};
use num_bigint::BigUint;
use rand::{CryptoRng, RngCore};

use crate::config::{HashChoice, KeyValues};

pub struct Secrets {
    pub key: PrfKey,
    pub timelock: Option<(BigUint, BigUint)>,
    pub salt_seed: Option<[u8; 32]>,
}

impl Secrets {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        Secrets {
            key: PrfKey::generate(rng),
            timelock: None,
            salt_seed: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading key file {}", path.display()))?;
        Secrets::parse(&text).with_context(|| format!("key file {}", path.display()))
    }

    fn parse(text: &str) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        let epoch: u64 = kv
            .get("epoch")
            .ok_or_else(|| anyhow!("missing epoch"))?
            .parse()
            .map_err(|_| anyhow!("bad epoch"))?;
        let scalar = kv.get("scalar").ok_or_else(|| anyhow!("missing scalar"))?;
        let bytes: [u8; 32] = hex::decode(scalar)
            .ok()
            .and_then(|b| b.try_into().ok())
            .ok_or_else(|| anyhow!("scalar must be 64 hex digits"))?;
        let key = PrfKey::from_parts(Scalar::from_bytes(&bytes).map_err(|_| anyhow!("invalid scalar"))?, epoch);
        let big = |k: &str| -> Result<Option<BigUint>> {
            kv.get(k)
                .map(|v| BigUint::parse_bytes(v.as_bytes(), 16).ok_or_else(|| anyhow!("`{k}` is not hex")))
                .transpose()
        };
        let timelock = match (big("timelock_p")?, big("timelock_q")?) {
            (Some(p), Some(q)) => Some((p, q)),
            (None, None) => None,
            _ => bail!("timelock_p and timelock_q must appear together"),
        };
        let salt_seed = kv
            .get("salt_seed")
            .map(|v| {
                hex::decode(v)
                    .ok()
                    .and_then(|b| b.try_into().ok())
                    .ok_or_else(|| anyhow!("salt_seed must be 64 hex digits"))
            })
            .transpose()?;
        Ok(Secrets {
            key,
            timelock,
            salt_seed,
        })
    }

    fn to_text(&self) -> String {
        let mut out = String::from("# migp server secrets\n");
        let _ = writeln!(out, "epoch = {}", self.key.epoch());
        let _ = writeln!(out, "scalar = {}", hex::encode(self.key.scalar().to_bytes()));
        if let Some((p, q)) = &self.timelock {
            let _ = writeln!(out, "timelock_p = {}", p.to_str_radix(16));
            let _ = writeln!(out, "timelock_q = {}", q.to_str_radix(16));
        }
        if let Some(seed) = &self.salt_seed {
            let _ = writeln!(out, "salt_seed = {}", hex::encode(seed));
        }
        out
    }

    /// Replaces `path` atomically with a 0600 file.
    pub fn write(&self, path: &Path) -> Result<()> {
        let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating key file in {}", dir.display()))?;
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            tmp.as_file().set_permissions(fs::Permissions::from_mode(0o600))?;
        }
        tmp.write_all(self.to_text().as_bytes())?;
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| e.error).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    /// Fills in whatever back-end secret `choice` needs and is missing.
    /// Returns whether anything was added.
    pub fn ensure_for<R: RngCore + CryptoRng>(&mut self, choice: &HashChoice, rng: &mut R) -> Result<bool> {
        match choice {
            HashChoice::Timelock { bits, v } if self.timelock.is_none() => {
                let (_, trapdoor) = generate_timelock(*bits, *v, rng)?;
                let (p, q) = trapdoor.primes();
                self.timelock = Some((p.clone(), q.clone()));
                Ok(true)
            }
            HashChoice::Salted(_) if self.salt_seed.is_none() => {
                let mut seed = [0u8; 32];
                rng.fill_bytes(&mut seed);
                self.salt_seed = Some(seed);
                Ok(true)
            }
            _ => Ok(false),
        }
    }

    pub fn server_hash(&self, choice: &HashChoice) -> Result<ServerHash> {
        Ok(match choice {
            HashChoice::Fast => ServerHash::Fast,
            HashChoice::Slow(p) => ServerHash::SlowHash(*p),
            HashChoice::Timelock { v, .. } => {
                let (p, q) = self.timelock.as_ref().ok_or_else(|| anyhow!("key file has no time-lock factors"))?;
                let params = TimelockParams::new(p * q, *v)?;
                let trapdoor = TimelockTrapdoor::from_primes(&params, p.clone(), q.clone())?;
                ServerHash::Timelock(params, trapdoor)
            }
            HashChoice::Salted(p) => {
                ServerHash::Salted(*p, self.salt_seed.ok_or_else(|| anyhow!("key file has no salt seed"))?)
            }
        })
    }
}
