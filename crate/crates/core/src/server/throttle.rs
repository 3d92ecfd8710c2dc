//! Per-client token buckets counting evaluated elements.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use parking_lot::Mutex;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateConfig {
    /// Elements a fresh client may spend at once.
    pub burst: f64,
    /// Refill rate in elements per second.
    pub per_second: f64,
}

impl RateConfig {
    /// `budget` elements per `window`, with a burst of one full window.
    pub fn per_window(budget: u32, window: Duration) -> Self {
        RateConfig {
            burst: budget as f64,
            per_second: budget as f64 / window.as_secs_f64(),
        }
    }

    pub fn unlimited() -> Self {
        RateConfig {
            burst: f64::INFINITY,
            per_second: f64::INFINITY,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Slot {
    tokens: f64,
    last: Instant,
}

const PRUNE_AT: usize = 65_536;

pub struct RateLimiter {
    config: RateConfig,
    slots: Mutex<HashMap<String, Slot>>,
}

impl RateLimiter {
    pub fn new(config: RateConfig) -> Self {
        RateLimiter {
            config,
            slots: Mutex::new(HashMap::new()),
        }
    }

    pub fn config(&self) -> RateConfig {
        self.config
    }

    pub fn check(&self, token: &str, units: u32) -> Result<(), Duration> {
        self.check_at(token, units, Instant::now())
    }

    /// Spends `units` from `token`'s bucket at time `now`, or returns how long
    /// until the request would fit. A request larger than the burst never
    /// fits and is answered with the time to refill a full bucket.
    pub fn check_at(&self, token: &str, units: u32, now: Instant) -> Result<(), Duration> {
        let RateConfig { burst, per_second } = self.config;
        if burst.is_infinite() {
            return Ok(());
        }
        let units = units as f64;
        let mut slots = self.slots.lock();
        if slots.len() >= PRUNE_AT {
            slots.retain(|_, s| refilled(s, now, burst, per_second) < burst);
        }
        let slot = slots.entry(token.to_owned()).or_insert(Slot { tokens: burst, last: now });
        slot.tokens = refilled(slot, now, burst, per_second);
        slot.last = slot.last.max(now);
        if units > burst {
            return Err(Duration::from_secs_f64(burst / per_second));
        }
        if slot.tokens >= units {
            slot.tokens -= units;
            Ok(())
        } else {
            Err(Duration::from_secs_f64((units - slot.tokens) / per_second))
        }
    }
}

fn refilled(slot: &Slot, now: Instant, burst: f64, per_second: f64) -> f64 {
    let dt = now.saturating_duration_since(slot.last).as_secs_f64();
    (slot.tokens + dt * per_second).min(burst)
}
