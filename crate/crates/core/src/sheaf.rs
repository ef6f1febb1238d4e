//! The section contract shared by every stream type: exact restriction to
//! closed subwindows, endpoint compatibility, and gluing, plus the period-`d`
//! clock sections.
//!
//! Every section lives on `[0, len]`; restriction re-bases the result to start
//! at 0, so compatibility of `a` and `b` is the direct equality
//! `a.restrict([len,len]) == b.restrict([0,0])`.

use thiserror::Error;

use crate::timebase::{ClosedInterval, Duration, Tick};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SectionError {
    #[error("window [{lo}, {hi}] exceeds section length {len}")]
    WindowOutOfRange { lo: Tick, hi: Tick, len: Tick },
    #[error("incompatible sections at the seam: left boundary {left}, right boundary {right}")]
    IncompatibleSections { left: String, right: String },
    #[error("tick arithmetic overflow while gluing")]
    Overflow,
    #[error("clock phase {phase} must be below period {period}")]
    InvalidPhase { phase: Tick, period: Tick },
    #[error("clock period must be positive")]
    ZeroPeriod,
}

/// A stream-like value over `[0, length]` that restricts exactly to closed
/// subwindows.
pub trait Section: Sized + Clone + PartialEq + std::fmt::Debug {
    fn length(&self) -> Duration;

    /// Restrict to `window ⊆ [0, length]`, re-based to start at 0.
    fn restrict(&self, window: ClosedInterval) -> Result<Self, SectionError>;

    /// The zero-length section at the right endpoint.
    fn right_boundary(&self) -> Self {
        self.restrict(ClosedInterval::at(self.length().ticks()))
            .expect("right boundary is always in range")
    }

    /// The zero-length section at the left endpoint.
    fn left_boundary(&self) -> Self {
        self.restrict(ClosedInterval::at(0))
            .expect("left boundary is always in range")
    }
}

/// A section type closed under gluing of compatible pairs.
pub trait Gluable: Section {
    /// Concatenate `self` then `other`; the caller has already verified
    /// endpoint compatibility.
    fn glue_unchecked(&self, other: &Self) -> Result<Self, SectionError>;
}

/// Endpoint compatibility: right boundary of `a` equals left boundary of `b`.
pub fn check_compatible<S: Section>(a: &S, b: &S) -> bool {
    a.right_boundary() == b.left_boundary()
}

/// Glue two compatible sections into one over the summed length.
pub fn glue<S: Gluable>(a: &S, b: &S) -> Result<S, SectionError> {
    if !check_compatible(a, b) {
        return Err(SectionError::IncompatibleSections {
            left: format!("{:?}", a.right_boundary()),
            right: format!("{:?}", b.left_boundary()),
        });
    }
    a.glue_unchecked(b)
}

/// A section of the period-`d` clock: ticks spaced exactly `d` apart, with the
/// first tick below `d` and the last within `d` of the right endpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClockSection {
    length: Duration,
    period: Duration,
    ticks: Vec<Tick>,
}

impl ClockSection {
    /// Build from raw parts, enforcing the spacing constraints verbatim.
    pub fn new(length: Duration, period: Duration, ticks: Vec<Tick>) -> Result<Self, SectionError> {
        if period.ticks() == 0 {
            return Err(SectionError::ZeroPeriod);
        }
        let d = period.ticks();
        if let (Some(&first), Some(&last)) = (ticks.first(), ticks.last()) {
            let ok = first < d
                && last <= length.ticks()
                && length.ticks() - last < d
                && ticks.windows(2).all(|w| w[1] - w[0] == d);
            if !ok {
                return Err(SectionError::InvalidPhase {
                    phase: first,
                    period: d,
                });
            }
        }
        Ok(ClockSection {
            length,
            period,
            ticks,
        })
    }

    pub fn period(&self) -> Duration {
        self.period
    }

    pub fn ticks(&self) -> &[Tick] {
        &self.ticks
    }
}

/// All clock ticks `{phase, phase+d, ...} ∩ [0, length]`.
pub fn clock_generate(
    period: Duration,
    phase: Tick,
    length: Duration,
) -> Result<ClockSection, SectionError> {
    let d = period.ticks();
    if d == 0 {
        return Err(SectionError::ZeroPeriod);
    }
    if phase >= d {
        return Err(SectionError::InvalidPhase { phase, period: d });
    }
    let mut ticks = Vec::new();
    let mut t = phase;
    while t <= length.ticks() {
        ticks.push(t);
        match t.checked_add(d) {
            Some(next) => t = next,
            None => break,
        }
    }
    ClockSection::new(length, period, ticks)
}

impl Section for ClockSection {
    fn length(&self) -> Duration {
        self.length
    }

    fn restrict(&self, window: ClosedInterval) -> Result<Self, SectionError> {
        if !window.within(self.length) {
            return Err(SectionError::WindowOutOfRange {
                lo: window.lo(),
                hi: window.hi(),
                len: self.length.ticks(),
            });
        }
        let ticks = self
            .ticks
            .iter()
            .filter(|&&t| window.contains(t))
            .map(|&t| t - window.lo())
            .collect();
        // restriction can break the phase constraints; keep the raw fields
        Ok(ClockSection {
            length: window.len(),
            period: self.period,
            ticks,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dur(t: Tick) -> Duration {
        Duration(t)
    }

    #[test]
    fn generate_with_phase() {
        let c = clock_generate(dur(10), 5, dur(20)).unwrap();
        assert_eq!(c.ticks(), &[5, 15]);
    }

    #[test]
    fn generate_phase_zero_divisible_length() {
        let c = clock_generate(dur(10), 0, dur(20)).unwrap();
        assert_eq!(c.ticks(), &[0, 10, 20]);
    }

    #[test]
    fn generate_rejects_bad_phase() {
        assert_eq!(
            clock_generate(dur(10), 10, dur(20)),
            Err(SectionError::InvalidPhase {
                phase: 10,
                period: 10
            })
        );
    }

    #[test]
    fn tick_count_stays_near_length_over_period() {
        // n is within one of l/d in both directions; endpoints are closed so
        // the upper side can exceed l/d by one on divisible lengths
        for d in 1..8u64 {
            for phase in 0..d {
                for l in 0..40u64 {
                    let c = clock_generate(dur(d), phase, dur(l)).unwrap();
                    let n = c.ticks().len() as u64;
                    assert!(n * d <= l + 2 * d);
                    assert!((n + 1) * d > l);
                }
            }
        }
    }

    #[test]
    fn restrict_is_intersection_rebased() {
        let c = clock_generate(dur(10), 5, dur(20)).unwrap();
        let full = c.restrict(ClosedInterval::new(0, 20).unwrap()).unwrap();
        assert_eq!(full.ticks(), c.ticks());

        let tail = c.restrict(ClosedInterval::new(10, 20).unwrap()).unwrap();
        assert_eq!(tail.ticks(), &[5]);

        let mid = c.restrict(ClosedInterval::new(6, 14).unwrap()).unwrap();
        assert_eq!(mid.ticks(), &[] as &[Tick]);
        assert_eq!(mid.length(), dur(8));
    }

    #[test]
    fn restrict_out_of_range() {
        let c = clock_generate(dur(10), 0, dur(20)).unwrap();
        assert!(c.restrict(ClosedInterval::new(10, 21).unwrap()).is_err());
    }

    #[test]
    fn restriction_functoriality() {
        let c = clock_generate(dur(3), 1, dur(30)).unwrap();
        // restrict twice = restrict once with composed offsets
        let once = c.restrict(ClosedInterval::new(4, 20).unwrap()).unwrap();
        let twice = once.restrict(ClosedInterval::new(2, 10).unwrap()).unwrap();
        let direct = c.restrict(ClosedInterval::new(6, 14).unwrap()).unwrap();
        assert_eq!(twice, direct);
    }

    #[test]
    fn spacing_preserved_when_nonempty() {
        let c = clock_generate(dur(4), 2, dur(50)).unwrap();
        let r = c.restrict(ClosedInterval::new(7, 31).unwrap()).unwrap();
        let d = c.period().ticks();
        assert!(r.ticks().windows(2).all(|w| w[1] - w[0] == d));
    }
}
