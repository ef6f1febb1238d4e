//! Exact integer time grid: durations, translations, and closed subintervals.
//!
//! All arithmetic happens on 64-bit tick counts; `TickScale` only converts to
//! seconds at I/O boundaries. Overflow is a hard error, never wraparound.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A tick count on the global resolution grid.
pub type Tick = u64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TimeError {
    #[error("tick arithmetic overflow")]
    Overflow,
    #[error("interval [{lo}, {hi}] is not ordered")]
    BadInterval { lo: Tick, hi: Tick },
}

/// Seconds-per-tick conversion factor. Documentation-only: no internal
/// arithmetic uses it; it appears in configs and CSV headers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickScale {
    pub seconds_per_tick: f64,
}

impl TickScale {
    pub fn new(seconds_per_tick: f64) -> Self {
        assert!(
            seconds_per_tick > 0.0 && seconds_per_tick.is_finite(),
            "seconds_per_tick must be positive and finite"
        );
        TickScale { seconds_per_tick }
    }

    pub fn to_seconds(&self, t: Tick) -> f64 {
        t as f64 * self.seconds_per_tick
    }

    /// Nearest tick for a second count; used only when parsing configs.
    pub fn ticks_from_seconds(&self, s: f64) -> Tick {
        (s / self.seconds_per_tick).round() as Tick
    }
}

impl Default for TickScale {
    /// Microsecond grid.
    fn default() -> Self {
        TickScale::new(1e-6)
    }
}

/// A non-negative duration in ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Duration(pub Tick);

impl Duration {
    pub const ZERO: Duration = Duration(0);

    pub fn ticks(self) -> Tick {
        self.0
    }

    pub fn checked_add(self, other: Duration) -> Result<Duration, TimeError> {
        self.0
            .checked_add(other.0)
            .map(Duration)
            .ok_or(TimeError::Overflow)
    }
}

/// A translation-by-`a` map between durations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Translation(pub Tick);

impl Translation {
    pub const IDENTITY: Translation = Translation(0);

    pub fn offset(self) -> Tick {
        self.0
    }
}

/// `true` iff translating `src` by `ph` lands inside `dst`.
pub fn hom_valid(ph: Translation, src: Duration, dst: Duration) -> bool {
    match ph.0.checked_add(src.0) {
        Some(end) => end <= dst.0,
        None => false,
    }
}

/// Compose two translations; overflow is an error.
pub fn ph_compose(first: Translation, second: Translation) -> Result<Translation, TimeError> {
    first
        .0
        .checked_add(second.0)
        .map(Translation)
        .ok_or(TimeError::Overflow)
}

/// A closed interval `[lo, hi]` of ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ClosedInterval {
    lo: Tick,
    hi: Tick,
}

impl ClosedInterval {
    pub fn new(lo: Tick, hi: Tick) -> Result<Self, TimeError> {
        if lo <= hi {
            Ok(ClosedInterval { lo, hi })
        } else {
            Err(TimeError::BadInterval { lo, hi })
        }
    }

    /// Full window `[0, len]` of a duration.
    pub fn full(len: Duration) -> Self {
        ClosedInterval { lo: 0, hi: len.0 }
    }

    /// Degenerate window `[t, t]`.
    pub fn at(t: Tick) -> Self {
        ClosedInterval { lo: t, hi: t }
    }

    pub fn lo(&self) -> Tick {
        self.lo
    }

    pub fn hi(&self) -> Tick {
        self.hi
    }

    pub fn len(&self) -> Duration {
        Duration(self.hi - self.lo)
    }

    pub fn contains(&self, t: Tick) -> bool {
        self.lo <= t && t <= self.hi
    }

    /// Whether this window fits inside `[0, len]`.
    pub fn within(&self, len: Duration) -> bool {
        self.hi <= len.0
    }
}
