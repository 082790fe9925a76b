//! Battery state machine with Bernoulli harvesting and strict energy causality.
//!
//! Energy is counted in integer units. Transmission costs one unit and one
//! slot; local training costs `kappa` units, debited when training starts,
//! and occupies `kappa` slots. Harvested units are credited one slot at a
//! time (including while the client is busy) and clamped at capacity.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Integer battery with `0 <= level <= capacity`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Battery {
    level: u32,
    capacity: u32,
}

impl Battery {
    /// Creates a battery; the initial level is clamped to capacity.
    pub fn new(level: u32, capacity: u32) -> Self {
        assert!(capacity > 0, "battery capacity must be positive");
        Battery {
            level: level.min(capacity),
            capacity,
        }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn capacity(&self) -> u32 {
        self.capacity
    }

    /// Adds one unit, saturating at capacity.
    pub fn credit(&mut self) {
        self.level = (self.level + 1).min(self.capacity);
    }

    /// Debits `cost` units if the full cost is covered. Returns whether the
    /// action was granted; a denied action leaves the level untouched.
    pub fn try_debit(&mut self, cost: u32) -> bool {
        if self.level >= cost {
            self.level -= cost;
            true
        } else {
            false
        }
    }

    /// One-unit uplink transmission.
    pub fn try_transmit(&mut self) -> bool {
        self.try_debit(1)
    }

    /// Launches a `kappa`-slot local training; the full cost is paid up front.
    pub fn try_start_training(&mut self, kappa: u32) -> bool {
        debug_assert!(kappa >= 1);
        self.try_debit(kappa)
    }
}

/// Per-client Bernoulli(p_bc) harvesting process.
#[derive(Debug, Clone)]
pub struct HarvestProcess {
    p_bc: f64,
    stream: ChaCha8Rng,
}

impl HarvestProcess {
    pub fn new(p_bc: f64, stream: ChaCha8Rng) -> Self {
        assert!((0.0..=1.0).contains(&p_bc), "p_bc must lie in [0, 1]");
        HarvestProcess { p_bc, stream }
    }

    pub fn p_bc(&self) -> f64 {
        self.p_bc
    }

    /// Draws the harvest indicator for one slot. A uniform variate is
    /// consumed on every call, so the trace depends only on the seed.
    pub fn draw(&mut self) -> bool {
        let u: f64 = self.stream.random();
        u < self.p_bc
    }

    /// Draws and credits the battery. Returns the drawn indicator, which may
    /// be `true` even if the battery was already full.
    pub fn harvest(&mut self, battery: &mut Battery) -> bool {
        let hit = self.draw();
        if hit {
            battery.credit();
        }
        hit
    }
}
