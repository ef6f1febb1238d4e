//! Dynamic wire values and sections for machine composition.
//!
//! Machine wires carry one of four section shapes: an event stream, a
//! piecewise-linear trajectory, a step trajectory, or a pair of wires. Event
//! values are dynamically typed so that heterogeneous machines compose at
//! runtime.

use crate::event::{merge, split, EventStream, SumValue};
use crate::scalar::Real;
use crate::sheaf::{Gluable, Section, SectionError};
use crate::timebase::{ClosedInterval, Duration, Tick};
use crate::trajectory::{LinearTrajectory, StepTrajectory};

use super::MachineError;

/// Event payload on a machine wire.
#[derive(Debug, Clone, PartialEq)]
pub enum Value<S: Real> {
    Real(S),
    Vector(Vec<S>),
    /// Event-camera polarity, +1 or -1.
    Polarity(i8),
    /// Simultaneous firings: sorted (pixel index, polarity) pairs, non-empty.
    Firing(Vec<(usize, i8)>),
    /// Merged tensor wire.
    Sum(Box<SumValue<Value<S>, Value<S>>>),
    /// Finite-alphabet symbol for table machines.
    Symbol(usize),
}

impl<S: Real> Value<S> {
    pub fn as_real(&self) -> Option<S> {
        match self {
            Value::Real(r) => Some(*r),
            _ => None,
        }
    }

    pub fn as_symbol(&self) -> Option<usize> {
        match self {
            Value::Symbol(k) => Some(*k),
            _ => None,
        }
    }
}

/// Wire type descriptor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Kind {
    /// Event stream (value type checked dynamically).
    Events,
    /// Piecewise-linear trajectory of the given dimension.
    Linear(usize),
    /// Piecewise-constant trajectory of the given dimension.
    Step(usize),
    Pair(Box<Kind>, Box<Kind>),
    /// Trivial wire (used by fully-looped traces).
    Unit,
}

impl Kind {
    pub fn pair(a: Kind, b: Kind) -> Kind {
        Kind::Pair(Box::new(a), Box::new(b))
    }
}

/// A concrete section on a machine wire, over `[0, length]`.
#[derive(Debug, Clone, PartialEq)]
pub enum SectionVal<S: Real> {
    Events(EventStream<Value<S>>),
    Linear(LinearTrajectory<S>),
    Step(StepTrajectory<S>),
    Pair(Box<SectionVal<S>>, Box<SectionVal<S>>),
    Unit(Duration),
}

impl<S: Real> SectionVal<S> {
    pub fn length(&self) -> Duration {
        match self {
            SectionVal::Events(e) => e.length(),
            SectionVal::Linear(t) => t.length(),
            SectionVal::Step(t) => t.length(),
            SectionVal::Pair(a, _) => a.length(),
            SectionVal::Unit(l) => *l,
        }
    }

    pub fn kind(&self) -> Kind {
        match self {
            SectionVal::Events(_) => Kind::Events,
            SectionVal::Linear(t) => Kind::Linear(t.dim()),
            SectionVal::Step(t) => Kind::Step(t.dim()),
            SectionVal::Pair(a, b) => Kind::pair(a.kind(), b.kind()),
            SectionVal::Unit(_) => Kind::Unit,
        }
    }

    pub fn restrict(&self, window: ClosedInterval) -> Result<Self, SectionError> {
        Ok(match self {
            SectionVal::Events(e) => SectionVal::Events(e.restrict(window)?),
            SectionVal::Linear(t) => SectionVal::Linear(t.restrict(window)?),
            SectionVal::Step(t) => SectionVal::Step(t.restrict(window)?),
            SectionVal::Pair(a, b) => SectionVal::Pair(
                Box::new(a.restrict(window)?),
                Box::new(b.restrict(window)?),
            ),
            SectionVal::Unit(_) => SectionVal::Unit(window.len()),
        })
    }

    /// The quiescent section of a kind: empty events, zero trajectories.
    pub fn quiescent(kind: &Kind, len: Duration) -> SectionVal<S> {
        match kind {
            Kind::Events => SectionVal::Events(EventStream::empty(len)),
            Kind::Linear(n) => SectionVal::Linear(
                LinearTrajectory::constant(len, vec![S::zero(); *n]).expect("constant"),
            ),
            Kind::Step(n) => SectionVal::Step(
                StepTrajectory::constant(len, vec![S::zero(); *n]).expect("constant"),
            ),
            Kind::Pair(a, b) => SectionVal::Pair(
                Box::new(Self::quiescent(a, len)),
                Box::new(Self::quiescent(b, len)),
            ),
            Kind::Unit => SectionVal::Unit(len),
        }
    }

    pub fn expect_events(&self) -> Result<&EventStream<Value<S>>, MachineError> {
        match self {
            SectionVal::Events(e) => Ok(e),
            other => Err(MachineError::KindMismatch {
                expected: Kind::Events,
                got: other.kind(),
            }),
        }
    }

    pub fn expect_linear(&self) -> Result<&LinearTrajectory<S>, MachineError> {
        match self {
            SectionVal::Linear(t) => Ok(t),
            other => Err(MachineError::KindMismatch {
                expected: Kind::Linear(0),
                got: other.kind(),
            }),
        }
    }

    pub fn expect_step(&self) -> Result<&StepTrajectory<S>, MachineError> {
        match self {
            SectionVal::Step(t) => Ok(t),
            other => Err(MachineError::KindMismatch {
                expected: Kind::Step(0),
                got: other.kind(),
            }),
        }
    }

    pub fn expect_pair(&self) -> Result<(&SectionVal<S>, &SectionVal<S>), MachineError> {
        match self {
            SectionVal::Pair(a, b) => Ok((a, b)),
            other => Err(MachineError::KindMismatch {
                expected: Kind::pair(Kind::Unit, Kind::Unit),
                got: other.kind(),
            }),
        }
    }
}

/// Merge two event wires into one `⊙`-typed wire.
pub fn merge_wires<S: Real>(
    a: &EventStream<Value<S>>,
    b: &EventStream<Value<S>>,
) -> Result<EventStream<Value<S>>, MachineError> {
    let m = merge(a, b).map_err(MachineError::Stream)?;
    Ok(m.map_values(|v| Value::Sum(Box::new(v.clone()))))
}

/// Inverse of [`merge_wires`].
pub fn split_wire<S: Real>(
    m: &EventStream<Value<S>>,
) -> Result<(EventStream<Value<S>>, EventStream<Value<S>>), MachineError> {
    let decoded: Result<Vec<_>, MachineError> = m
        .events()
        .iter()
        .map(|(t, v)| match v {
            Value::Sum(s) => Ok((*t, (**s).clone())),
            other => Err(MachineError::BadWireValue(format!("{other:?}"))),
        })
        .collect();
    let stream = EventStream::new(m.length(), decoded?).map_err(MachineError::Stream)?;
    Ok(split(&stream))
}

/// Accumulates per-block machine outputs into one global section.
///
/// Event blocks are appended with a global time shift; a repeated seam event
/// must agree and is kept once. Trajectory blocks must meet exactly at the
/// seam value.
#[derive(Debug, Clone)]
pub struct Assembler<S: Real> {
    acc: Option<SectionVal<S>>,
}

impl<S: Real> Default for Assembler<S> {
    fn default() -> Self {
        Assembler { acc: None }
    }
}

impl<S: Real> Assembler<S> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, block: SectionVal<S>) -> Result<(), MachineError> {
        match self.acc.take() {
            None => {
                self.acc = Some(block);
                Ok(())
            }
            Some(acc) => {
                self.acc = Some(append(acc, block)?);
                Ok(())
            }
        }
    }

    pub fn finish(self) -> Option<SectionVal<S>> {
        self.acc
    }

    pub fn peek(&self) -> Option<&SectionVal<S>> {
        self.acc.as_ref()
    }
}

fn append<S: Real>(acc: SectionVal<S>, block: SectionVal<S>) -> Result<SectionVal<S>, MachineError> {
    match (acc, block) {
        (SectionVal::Events(a), SectionVal::Events(b)) => {
            Ok(SectionVal::Events(append_events(a, &b)?))
        }
        (SectionVal::Linear(a), SectionVal::Linear(b)) => {
            let left_end = a.evaluate(a.length().ticks()).map_err(MachineError::Trajectory)?;
            let right_start = b.evaluate(0).map_err(MachineError::Trajectory)?;
            if left_end != right_start {
                return Err(MachineError::SeamMismatch(format!(
                    "{left_end:?} vs {right_start:?}"
                )));
            }
            a.glue_unchecked(&b)
                .map(SectionVal::Linear)
                .map_err(MachineError::Section)
        }
        (SectionVal::Step(a), SectionVal::Step(b)) => {
            if a.final_value() != b.initial() {
                return Err(MachineError::SeamMismatch(format!(
                    "{:?} vs {:?}",
                    a.final_value(),
                    b.initial()
                )));
            }
            a.glue_unchecked(&b)
                .map(SectionVal::Step)
                .map_err(MachineError::Section)
        }
        (SectionVal::Pair(a1, a2), SectionVal::Pair(b1, b2)) => Ok(SectionVal::Pair(
            Box::new(append(*a1, *b1)?),
            Box::new(append(*a2, *b2)?),
        )),
        (SectionVal::Unit(a), SectionVal::Unit(b)) => Ok(SectionVal::Unit(
            a.checked_add(b)
                .map_err(|_| MachineError::Section(SectionError::Overflow))?,
        )),
        (a, b) => Err(MachineError::KindMismatch {
            expected: a.kind(),
            got: b.kind(),
        }),
    }
}

fn append_events<S: Real>(
    acc: EventStream<Value<S>>,
    block: &EventStream<Value<S>>,
) -> Result<EventStream<Value<S>>, MachineError> {
    let offset = acc.length().ticks();
    let total = acc
        .length()
        .checked_add(block.length())
        .map_err(|_| MachineError::Section(SectionError::Overflow))?;
    let mut events: Vec<(Tick, Value<S>)> = acc.events().to_vec();
    for (t, v) in block.events() {
        let global = offset + t;
        match events.last() {
            Some((last, lv)) if *last == global => {
                if lv != v {
                    return Err(MachineError::NonMonotoneOutput);
                }
                // repeated seam event, keep one
            }
            Some((last, _)) if *last > global => return Err(MachineError::NonMonotoneOutput),
            _ => events.push((global, v.clone())),
        }
    }
    EventStream::new(total, events).map_err(MachineError::Stream)
}

/// Emission window for a block starting at global `t0`: the first block owns
/// its left endpoint, later blocks leave the seam to their predecessor.
pub fn emit_lo(global_start: Tick) -> Tick {
    if global_start == 0 {
        0
    } else {
        1
    }
}
