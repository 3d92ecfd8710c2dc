//! Memory-hard slow hashing with Argon2id.

use argon2::{Algorithm, Argon2, Params, Version};

use super::RateLimitError;
use crate::oprf::{PrfOutput, OUTPUT_LEN};

const SALT: &[u8] = b"MIGP-v1/argon2id";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SlowHashParams {
    m_cost_kib: u32,
    t_cost: u32,
    p_cost: u32,
}

impl SlowHashParams {
    pub fn new(m_cost_kib: u32, t_cost: u32, p_cost: u32) -> Result<Self, RateLimitError> {
        Params::new(m_cost_kib, t_cost, p_cost, Some(OUTPUT_LEN))
            .map_err(|e| RateLimitError::Config(format!("argon2 parameters: {e}")))?;
        Ok(SlowHashParams {
            m_cost_kib,
            t_cost,
            p_cost,
        })
    }

    pub fn m_cost_kib(&self) -> u32 {
        self.m_cost_kib
    }

    pub fn t_cost(&self) -> u32 {
        self.t_cost
    }

    pub fn p_cost(&self) -> u32 {
        self.p_cost
    }

    pub fn with_t_cost(&self, t_cost: u32) -> Result<Self, RateLimitError> {
        SlowHashParams::new(self.m_cost_kib, t_cost, self.p_cost)
    }

    fn hasher(&self) -> Argon2<'static> {
        let params = Params::new(self.m_cost_kib, self.t_cost, self.p_cost, Some(OUTPUT_LEN))
            .expect("validated at construction");
        Argon2::new(Algorithm::Argon2id, Version::V0x13, params)
    }
}

impl Default for SlowHashParams {
    /// The argon2 crate's recommended defaults (19 MiB, 2 passes, 1 lane).
    fn default() -> Self {
        SlowHashParams {
            m_cost_kib: Params::DEFAULT_M_COST,
            t_cost: Params::DEFAULT_T_COST,
            p_cost: Params::DEFAULT_P_COST,
        }
    }
}

pub fn slow_hash(params: &SlowHashParams, x: &[u8]) -> PrfOutput {
    let mut out = [0u8; OUTPUT_LEN];
    params
        .hasher()
        .hash_password_into(x, SALT, &mut out)
        .expect("parameters and salt length are valid");
    PrfOutput::new(out)
}
