//! Finite timestamped value sequences with exact restriction and gluing,
//! functorial value-mapping, the merge/split monoidal isomorphism, and
//! filtering.

use thiserror::Error;

use crate::sheaf::{Gluable, Section, SectionError};
use crate::timebase::{ClosedInterval, Duration, Tick};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StreamError {
    #[error("timestamps must be strictly increasing and within [0, {len}]; offending tick {tick}")]
    BadTimestamp { tick: Tick, len: Tick },
    #[error("merge requires equal lengths, got {left} and {right}")]
    LengthMismatch { left: Tick, right: Tick },
}

/// Value carrier of the merged stream `Ev_{A ⊙ B}`: an event at a shared
/// timestamp holds both values, otherwise one side only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SumValue<A, B> {
    Left(A),
    Right(B),
    Both(A, B),
}

impl<A, B> SumValue<A, B> {
    pub fn map<C, D>(self, f: impl FnOnce(A) -> C, g: impl FnOnce(B) -> D) -> SumValue<C, D> {
        match self {
            SumValue::Left(a) => SumValue::Left(f(a)),
            SumValue::Right(b) => SumValue::Right(g(b)),
            SumValue::Both(a, b) => SumValue::Both(f(a), g(b)),
        }
    }
}

/// A length-`ℓ` event stream: strictly increasing timestamps in `[0, ℓ]`,
/// each carrying one value.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EventStream<V> {
    length: Duration,
    events: Vec<(Tick, V)>,
}

impl<V> EventStream<V> {
    pub fn new(length: Duration, events: Vec<(Tick, V)>) -> Result<Self, StreamError> {
        let mut prev: Option<Tick> = None;
        for &(t, _) in &events {
            let increasing = prev.map_or(true, |p| t > p);
            if !increasing || t > length.ticks() {
                return Err(StreamError::BadTimestamp {
                    tick: t,
                    len: length.ticks(),
                });
            }
            prev = Some(t);
        }
        Ok(EventStream { length, events })
    }

    pub fn empty(length: Duration) -> Self {
        EventStream {
            length,
            events: Vec::new(),
        }
    }

    pub fn events(&self) -> &[(Tick, V)] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn last(&self) -> Option<&(Tick, V)> {
        self.events.last()
    }
}

impl<V: Clone> EventStream<V> {
    /// Same timestamps, values pushed through `f`.
    pub fn map_values<W>(&self, mut f: impl FnMut(&V) -> W) -> EventStream<W> {
        EventStream {
            length: self.length,
            events: self.events.iter().map(|(t, v)| (*t, f(v))).collect(),
        }
    }

    /// Keep exactly the events whose value satisfies the predicate.
    pub fn filter_events(&self, mut keep: impl FnMut(&V) -> bool) -> EventStream<V> {
        EventStream {
            length: self.length,
            events: self
                .events
                .iter()
                .filter(|(_, v)| keep(v))
                .cloned()
                .collect(),
        }
    }
}

/// Timestamp-union merge: the component map of `Ev_A × Ev_B ≅ Ev_{A⊙B}`.
pub fn merge<A: Clone, B: Clone>(
    a: &EventStream<A>,
    b: &EventStream<B>,
) -> Result<EventStream<SumValue<A, B>>, StreamError> {
    if a.length != b.length {
        return Err(StreamError::LengthMismatch {
            left: a.length.ticks(),
            right: b.length.ticks(),
        });
    }
    let mut events = Vec::with_capacity(a.events.len() + b.events.len());
    let (mut i, mut j) = (0, 0);
    while i < a.events.len() || j < b.events.len() {
        match (a.events.get(i), b.events.get(j)) {
            (Some((ta, va)), Some((tb, vb))) => {
                if ta < tb {
                    events.push((*ta, SumValue::Left(va.clone())));
                    i += 1;
                } else if tb < ta {
                    events.push((*tb, SumValue::Right(vb.clone())));
                    j += 1;
                } else {
                    events.push((*ta, SumValue::Both(va.clone(), vb.clone())));
                    i += 1;
                    j += 1;
                }
            }
            (Some((ta, va)), None) => {
                events.push((*ta, SumValue::Left(va.clone())));
                i += 1;
            }
            (None, Some((tb, vb))) => {
                events.push((*tb, SumValue::Right(vb.clone())));
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    Ok(EventStream {
        length: a.length,
        events,
    })
}

/// Inverse of [`merge`]: Left/Both feed the first stream, Right/Both the second.
pub fn split<A: Clone, B: Clone>(
    m: &EventStream<SumValue<A, B>>,
) -> (EventStream<A>, EventStream<B>) {
    let mut left = Vec::new();
    let mut right = Vec::new();
    for (t, v) in &m.events {
        match v {
            SumValue::Left(a) => left.push((*t, a.clone())),
            SumValue::Right(b) => right.push((*t, b.clone())),
            SumValue::Both(a, b) => {
                left.push((*t, a.clone()));
                right.push((*t, b.clone()));
            }
        }
    }
    (
        EventStream {
            length: m.length,
            events: left,
        },
        EventStream {
            length: m.length,
            events: right,
        },
    )
}

impl<V: Clone + PartialEq + std::fmt::Debug> Section for EventStream<V> {
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
        let events = self
            .events
            .iter()
            .filter(|(t, _)| window.contains(*t))
            .map(|(t, v)| (t - window.lo(), v.clone()))
            .collect();
        Ok(EventStream {
            length: window.len(),
            events,
        })
    }
}

impl<V: Clone + PartialEq + std::fmt::Debug> Gluable for EventStream<V> {
    fn glue_unchecked(&self, other: &Self) -> Result<Self, SectionError> {
        let seam = self.length.ticks();
        let total = self
            .length
            .checked_add(other.length)
            .map_err(|_| SectionError::Overflow)?;
        let mut events = self.events.clone();
        for (t, v) in &other.events {
            let shifted = seam + t;
            // the shared boundary event appears once
            if *t == 0 && events.last().map_or(false, |(lt, _)| *lt == seam) {
                continue;
            }
            events.push((shifted, v.clone()));
        }
        Ok(EventStream {
            length: total,
            events,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sheaf::{check_compatible, glue};

    fn dur(t: Tick) -> Duration {
        Duration(t)
    }

    fn ev<V>(len: Tick, events: Vec<(Tick, V)>) -> EventStream<V> {
        EventStream::new(dur(len), events).unwrap()
    }

    #[test]
    fn construction_rejects_duplicates_and_overruns() {
        assert!(EventStream::new(dur(5), vec![(1, 'a'), (1, 'b')]).is_err());
        assert!(EventStream::new(dur(5), vec![(3, 'a'), (2, 'b')]).is_err());
        assert!(EventStream::new(dur(5), vec![(6, 'a')]).is_err());
        // an event exactly at the right endpoint is fine
        assert!(EventStream::new(dur(5), vec![(5, 'a')]).is_ok());
        // a zero-length stream may hold one event at 0
        assert!(EventStream::new(dur(0), vec![(0, 'a')]).is_ok());
    }

    #[test]
    fn traffic_light_restrictions() {
        #[derive(Debug, Clone, Copy, PartialEq, Eq)]
        enum T {
            RedToOrange,
            OrangeToGreen,
            GreenToOrange,
            OrangeToRed,
        }
        let s = ev(
            60,
            vec![
                (20, T::RedToOrange),
                (25, T::OrangeToGreen),
                (45, T::GreenToOrange),
                (50, T::OrangeToRed),
            ],
        );
        assert_eq!(s.restrict(ClosedInterval::full(dur(60))).unwrap(), s);

        let mid = s.restrict(ClosedInterval::new(22, 48).unwrap()).unwrap();
        assert_eq!(
            mid.events(),
            &[(3, T::OrangeToGreen), (23, T::GreenToOrange)]
        );

        let point = s.restrict(ClosedInterval::at(20)).unwrap();
        assert_eq!(point.events(), &[(0, T::RedToOrange)]);
        assert_eq!(point.length(), Duration::ZERO);
    }

    #[test]
    fn compatibility_cases() {
        // both empty
        assert!(check_compatible(
            &EventStream::<char>::empty(dur(3)),
            &EventStream::<char>::empty(dur(4))
        ));
        // both boundary events with equal value
        assert!(check_compatible(&ev(2, vec![(2, 'v')]), &ev(2, vec![(0, 'v')])));
        // one nothing, the other just a
        assert!(!check_compatible(&ev(5, vec![(5, 'v')]), &ev(5, vec![])));
        assert!(!check_compatible(&ev(2, vec![(2, 'v')]), &ev(2, vec![(0, 'w')])));
    }

    #[test]
    fn glue_examples() {
        let g = glue(
            &EventStream::<char>::empty(dur(3)),
            &EventStream::<char>::empty(dur(4)),
        )
        .unwrap();
        assert_eq!(g, EventStream::empty(dur(7)));

        let g = glue(&ev(2, vec![(1, 'x')]), &ev(2, vec![(1, 'y')])).unwrap();
        assert_eq!(g.events(), &[(1, 'x'), (3, 'y')]);

        // shared boundary event is deduplicated
        let g = glue(&ev(2, vec![(2, 'x')]), &ev(2, vec![(0, 'x')])).unwrap();
        assert_eq!(g.events(), &[(2, 'x')]);
        assert_eq!(g.length(), dur(4));

        let g = glue(&ev(5, vec![(5, 'v')]), &ev(5, vec![(0, 'v'), (3, 'w')])).unwrap();
        assert_eq!(g.events(), &[(5, 'v'), (8, 'w')]);

        let g = glue(&ev(5, vec![(2, 'v')]), &EventStream::empty(dur(5))).unwrap();
        assert_eq!(g.events(), &[(2, 'v')]);
        assert_eq!(g.length(), dur(10));

        assert!(glue(&EventStream::empty(dur(5)), &ev(5, vec![(0, 'v')])).is_err());
    }

    #[test]
    fn glue_round_trip() {
        let a = ev(4, vec![(1, 'p'), (4, 'q')]);
        let b = ev(3, vec![(0, 'q'), (2, 'r')]);
        let g = glue(&a, &b).unwrap();
        assert_eq!(g.restrict(ClosedInterval::new(0, 4).unwrap()).unwrap(), a);
        assert_eq!(g.restrict(ClosedInterval::new(4, 7).unwrap()).unwrap(), b);
    }

    #[test]
    fn map_values_examples() {
        let s = ev(5, vec![(1, 4u32), (2, 7u32)]);
        assert_eq!(s.map_values(|v| *v), s);
        let m = s.map_values(|v| v % 2);
        assert_eq!(m.events(), &[(1, 0), (2, 1)]);
    }

    #[test]
    fn merge_split_examples() {
        let m = merge(&ev(3, vec![(1, 'x')]), &ev(3, vec![(1, 'y')])).unwrap();
        assert_eq!(m.events(), &[(1, SumValue::Both('x', 'y'))]);

        let m = merge(&ev(3, vec![(1, 'x')]), &EventStream::<char>::empty(dur(3))).unwrap();
        assert_eq!(m.events(), &[(1, SumValue::Left('x'))]);

        assert!(merge(&ev(3, vec![(1, 'x')]), &ev(4, vec![(1, 'y')])).is_err());

        let (l, r) = split(&EventStream::<SumValue<char, char>>::empty(dur(2)));
        assert!(l.is_empty() && r.is_empty());

        let m = ev(
            4,
            vec![(1, SumValue::Both('x', 'y')), (2, SumValue::Left('z'))],
        );
        let (l, r) = split(&m);
        assert_eq!(l.events(), &[(1, 'x'), (2, 'z')]);
        assert_eq!(r.events(), &[(1, 'y')]);
        assert_eq!(merge(&l, &r).unwrap(), m);
    }

    #[test]
    fn filter_examples() {
        let s = ev(4, vec![(1, 1u8), (2, 2u8), (3, 3u8)]);
        assert_eq!(s.filter_events(|v| *v == 2).events(), &[(2, 2u8)]);
        assert_eq!(s.filter_events(|_| true), s);
        let none = s.filter_events(|_| false);
        assert!(none.is_empty());
        assert_eq!(none.length(), s.length());
    }
}
