//! The standard machine blocks: periodic sampler, level-crossing sampler,
//! zero-order hold, event filter, and the discrete / continuous dynamical
//! system adapters.

use std::sync::Arc;

use crate::event::EventStream;
use crate::machine::{emit_lo, Kind, Machine, MachineCore, MachineError, SectionVal, Value};
use crate::scalar::Real;
use crate::sheaf::Section;
use crate::timebase::{Duration, Tick};
use crate::trajectory::{LinearTrajectory, StepTrajectory};

/// Decode an event payload as a numeric vector.
fn value_to_vec<S: Real>(v: &Value<S>) -> Result<Vec<S>, MachineError> {
    match v {
        Value::Real(r) => Ok(vec![*r]),
        Value::Vector(xs) => Ok(xs.clone()),
        other => Err(MachineError::BadWireValue(format!("{other:?}"))),
    }
}

fn vec_to_value<S: Real>(xs: Vec<S>) -> Value<S> {
    if xs.len() == 1 {
        Value::Real(xs[0])
    } else {
        Value::Vector(xs)
    }
}

/// Sample a trajectory wire at a fractional local time. Step wires hold their
/// value between ticks, so the floor tick is exact.
fn sample_at<S: Real>(input: &SectionVal<S>, t: f64) -> Result<Vec<S>, MachineError> {
    match input {
        SectionVal::Linear(traj) => Ok(traj.evaluate_fractional(S::from_f64_lossy(t))?),
        SectionVal::Step(traj) => Ok(traj.evaluate(t.floor() as Tick)?),
        other => Err(MachineError::KindMismatch {
            expected: Kind::Linear(0),
            got: other.kind(),
        }),
    }
}

// ---------------------------------------------------------------------------
// periodic sampler

#[derive(Debug, Clone, Copy)]
pub struct SamplerConfig {
    pub period: Duration,
    /// First clock tick, in `[0, period)`.
    pub phase: Tick,
}

#[derive(Clone)]
struct SamplerCore {
    period: Tick,
    phase: Tick,
    t0: Tick,
}

impl<S: Real> MachineCore<S> for SamplerCore {
    fn advance(&mut self, input: &SectionVal<S>) -> Result<SectionVal<S>, MachineError> {
        let len = input.length().ticks();
        let t1 = self.t0 + len;
        let lo = self.t0 + emit_lo(self.t0);
        // first clock tick at or after lo
        let mut g = if lo <= self.phase {
            self.phase
        } else {
            let k = (lo - self.phase).div_ceil(self.period);
            self.phase + k * self.period
        };
        let mut events = Vec::new();
        while g <= t1 {
            let local = g - self.t0;
            let value = sample_at(input, local as f64)?;
            events.push((local, vec_to_value(value)));
            g += self.period;
        }
        self.t0 = t1;
        Ok(SectionVal::Events(
            EventStream::new(Duration(len), events).map_err(MachineError::Stream)?,
        ))
    }

    fn clone_box(&self) -> Box<dyn MachineCore<S>> {
        Box::new(self.clone())
    }
}

/// Period-`d` sampler on a piecewise-linear wire: one event per clock tick
/// carrying the trajectory value there. The clock is internal state with a
/// fixed phase.
pub fn make_sampler<S: Real>(cfg: SamplerConfig, value_dim: usize) -> Machine<S> {
    assert!(cfg.period.ticks() >= 1 && cfg.phase < cfg.period.ticks());
    Machine::new(
        Kind::Linear(value_dim),
        Kind::Events,
        Duration::ZERO,
        Box::new(SamplerCore {
            period: cfg.period.ticks(),
            phase: cfg.phase,
            t0: 0,
        }),
    )
}

/// Same sampler on a piecewise-constant wire.
pub fn make_step_sampler<S: Real>(cfg: SamplerConfig, value_dim: usize) -> Machine<S> {
    assert!(cfg.period.ticks() >= 1 && cfg.phase < cfg.period.ticks());
    Machine::new(
        Kind::Step(value_dim),
        Kind::Events,
        Duration::ZERO,
        Box::new(SamplerCore {
            period: cfg.period.ticks(),
            phase: cfg.phase,
            t0: 0,
        }),
    )
}

// ---------------------------------------------------------------------------
// level-crossing sampler

#[derive(Clone)]
struct LevelCrossingCore<S: Real> {
    level: S,
    reference: Vec<S>,
    t0: Tick,
    /// Last emitted global tick, for strict monotonicity across rounding.
    prev_emit: Option<Tick>,
    /// Fractional global time before which scanning is suppressed (the
    /// one-tick advance past the last crossing).
    skip_until: f64,
    /// Events rounded past the previous block end, at global ticks.
    pending: Vec<(Tick, Value<S>)>,
}

impl<S: Real> LevelCrossingCore<S> {
    fn emit(&mut self, events: &mut Vec<(Tick, Value<S>)>, t1: Tick, instant: f64, value: Value<S>) {
        // crossings a rounding error past a tick boundary snap back to it
        let mut tick = (instant - 1e-6).ceil().max(0.0) as Tick;
        // the left seam of a non-initial block belongs to the previous block,
        // which has already been emitted
        tick = tick.max(self.t0 + emit_lo(self.t0));
        if let Some(p) = self.prev_emit {
            tick = tick.max(p + 1);
        }
        self.prev_emit = Some(tick);
        if tick <= t1 {
            events.push((tick - self.t0, value));
        } else {
            self.pending.push((tick, value));
        }
    }
}

impl<S: Real> MachineCore<S> for LevelCrossingCore<S> {
    fn advance(&mut self, input: &SectionVal<S>) -> Result<SectionVal<S>, MachineError> {
        let traj = input.expect_linear()?;
        let len = traj.length().ticks();
        let t1 = self.t0 + len;
        let mut events: Vec<(Tick, Value<S>)> = Vec::new();
        // release carried-over events that fall in this block
        self.pending.retain(|(g, v)| {
            if *g <= t1 {
                events.push((*g - self.t0, v.clone()));
                false
            } else {
                true
            }
        });

        let level = self.level.to_f64().unwrap();
        let breaks = traj.breakpoints();
        let mut pos = (self.skip_until - self.t0 as f64).max(0.0);
        'scan: loop {
            let reference: Vec<f64> = self.reference.iter().map(|x| x.to_f64().unwrap()).collect();
            let mut found: Option<f64> = None;
            for seg in breaks.windows(2) {
                let (ta, tb) = (seg[0] as f64, seg[1] as f64);
                // a segment ending exactly at the scan position still owns
                // its right endpoint: a crossing there belongs to this block
                if tb < pos {
                    continue;
                }
                let va = traj.evaluate(seg[0])?;
                let vb = traj.evaluate(seg[1])?;
                let w_lo = (pos - ta).max(0.0);
                let dt = tb - ta;
                // squared distance to the reference along the segment is the
                // quadratic q(w) = |A + wB|^2 - L^2
                let a: Vec<f64> = va
                    .iter()
                    .zip(&reference)
                    .map(|(v, r)| v.to_f64().unwrap() - r)
                    .collect();
                let b: Vec<f64> = vb
                    .iter()
                    .zip(&va)
                    .map(|(v1, v0)| (v1.to_f64().unwrap() - v0.to_f64().unwrap()) / dt)
                    .collect();
                let b2: f64 = b.iter().map(|x| x * x).sum();
                let b1: f64 = 2.0 * a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>();
                let b0: f64 = a.iter().map(|x| x * x).sum::<f64>() - level * level;
                let q_lo = b2 * w_lo * w_lo + b1 * w_lo + b0;
                // roots landing a hair outside the segment (endpoint
                // crossings) are pulled back in
                const EPS: f64 = 1e-9;
                let w = if q_lo >= 0.0 {
                    Some(w_lo)
                } else if b2 == 0.0 {
                    if b1 > 0.0 {
                        let w = -b0 / b1;
                        (w <= dt + EPS).then_some(w)
                    } else {
                        None
                    }
                } else {
                    let disc = b1 * b1 - 4.0 * b2 * b0;
                    if disc > 0.0 {
                        let w = (-b1 + disc.sqrt()) / (2.0 * b2);
                        (w >= w_lo - EPS && w <= dt + EPS).then_some(w)
                    } else {
                        None
                    }
                };
                if let Some(w) = w {
                    found = Some(ta + w.clamp(w_lo, dt));
                    break;
                }
            }
            match found {
                None => break 'scan,
                Some(tau) => {
                    let point = traj.evaluate_fractional(S::from_f64_lossy(tau))?;
                    let value = if self.reference.len() == 1 {
                        // exact level keeps the ±L recursion under rounding
                        let dir = point[0].to_f64().unwrap() - self.reference[0].to_f64().unwrap();
                        if dir >= 0.0 {
                            self.reference[0] + self.level
                        } else {
                            self.reference[0] - self.level
                        }
                    } else {
                        S::zero() // unused marker for the vector branch
                    };
                    let new_ref = if self.reference.len() == 1 {
                        vec![value]
                    } else {
                        point.clone()
                    };
                    let payload = vec_to_value(new_ref.clone());
                    self.emit(&mut events, t1, self.t0 as f64 + tau, payload);
                    self.reference = new_ref;
                    // advance one tick past the crossing before rescanning so
                    // grazing contact cannot retrigger at the same instant
                    pos = tau + 1.0;
                    self.skip_until = self.t0 as f64 + pos;
                    if pos > len as f64 {
                        break 'scan;
                    }
                }
            }
        }
        self.t0 = t1;
        events.sort_by_key(|(t, _)| *t);
        Ok(SectionVal::Events(
            EventStream::new(Duration(len), events).map_err(MachineError::Stream)?,
        ))
    }

    fn clone_box(&self) -> Box<dyn MachineCore<S>> {
        Box::new(self.clone())
    }
}

/// Level-crossing sampler: emits an event whenever the input drifts a
/// distance `L` from the last reference value, then re-references there.
///
/// Scalar wires carry the exact crossing level `a ± L`; vector wires carry
/// the interpolated crossing point under the Euclidean distance. Crossing
/// instants round up to the next tick (strictly increasing across events).
pub fn make_level_crossing<S: Real>(level: S, a0: Vec<S>) -> Machine<S> {
    assert!(level > S::zero());
    let dim = a0.len();
    Machine::new(
        Kind::Linear(dim),
        Kind::Events,
        Duration::ZERO,
        Box::new(LevelCrossingCore {
            level,
            reference: a0,
            t0: 0,
            prev_emit: None,
            skip_until: 0.0,
            pending: Vec::new(),
        }),
    )
}

// ---------------------------------------------------------------------------
// zero-order hold

#[derive(Clone)]
struct ZohCore<S: Real> {
    held: Vec<S>,
    t0: Tick,
}

impl<S: Real> MachineCore<S> for ZohCore<S> {
    fn advance(&mut self, input: &SectionVal<S>) -> Result<SectionVal<S>, MachineError> {
        let events = input.expect_events()?;
        let len = events.length();
        let lo = emit_lo(self.t0);
        let mut initial = self.held.clone();
        let mut steps = Vec::new();
        for (t, v) in events.events() {
            if *t < lo {
                continue;
            }
            let value = value_to_vec(v)?;
            if value.len() != self.held.len() {
                return Err(MachineError::BadWireValue(format!(
                    "held dimension {} vs event dimension {}",
                    self.held.len(),
                    value.len()
                )));
            }
            if *t == 0 {
                initial = value.clone();
            } else {
                steps.push((*t, value.clone()));
            }
            self.held = value;
        }
        self.t0 += len.ticks();
        Ok(SectionVal::Step(
            StepTrajectory::new(len, initial, steps).map_err(MachineError::Trajectory)?,
        ))
    }

    fn clone_box(&self) -> Box<dyn MachineCore<S>> {
        Box::new(self.clone())
    }
}

/// Zero-order-hold reconstructor: holds `a0` until the first event, then each
/// event's value from its timestamp onward.
pub fn make_zoh<S: Real>(a0: Vec<S>) -> Machine<S> {
    let dim = a0.len();
    Machine::new(
        Kind::Events,
        Kind::Step(dim),
        Duration::ZERO,
        Box::new(ZohCore { held: a0, t0: 0 }),
    )
}

// ---------------------------------------------------------------------------
// filter

#[derive(Clone)]
struct FilterCore<S: Real> {
    keep: Arc<dyn Fn(&Value<S>) -> bool + Send + Sync>,
}

impl<S: Real> MachineCore<S> for FilterCore<S> {
    fn advance(&mut self, input: &SectionVal<S>) -> Result<SectionVal<S>, MachineError> {
        let events = input.expect_events()?;
        Ok(SectionVal::Events(events.filter_events(|v| (self.keep)(v))))
    }

    fn clone_box(&self) -> Box<dyn MachineCore<S>> {
        Box::new(self.clone())
    }
}

/// Stateless event filter: passes events whose value satisfies the predicate.
pub fn make_filter<S: Real>(keep: Arc<dyn Fn(&Value<S>) -> bool + Send + Sync>) -> Machine<S> {
    Machine::new(
        Kind::Events,
        Kind::Events,
        Duration::ZERO,
        Box::new(FilterCore { keep }),
    )
}

// ---------------------------------------------------------------------------
// discrete dynamical system adapter

#[derive(Clone)]
pub struct DdsSpec<S: Real> {
    pub update: Arc<dyn Fn(&Value<S>, &Value<S>) -> Value<S> + Send + Sync>,
    pub readout: Arc<dyn Fn(&Value<S>) -> Value<S> + Send + Sync>,
    pub initial: Value<S>,
    /// Emit the readout of the state *before* the update instead of after.
    /// The default (post-update) makes the counter read 1, 2, 3, …
    pub readout_pre_update: bool,
}

#[derive(Clone)]
struct DdsCore<S: Real> {
    spec: DdsSpec<S>,
    state: Value<S>,
    t0: Tick,
}

impl<S: Real> MachineCore<S> for DdsCore<S> {
    fn advance(&mut self, input: &SectionVal<S>) -> Result<SectionVal<S>, MachineError> {
        let events = input.expect_events()?;
        let len = events.length();
        let lo = emit_lo(self.t0);
        let mut out = Vec::new();
        for (t, v) in events.events() {
            if *t < lo {
                continue;
            }
            if self.spec.readout_pre_update {
                out.push((*t, (self.spec.readout)(&self.state)));
                self.state = (self.spec.update)(v, &self.state);
            } else {
                self.state = (self.spec.update)(v, &self.state);
                out.push((*t, (self.spec.readout)(&self.state)));
            }
        }
        self.t0 += len.ticks();
        Ok(SectionVal::Events(
            EventStream::new(len, out).map_err(MachineError::Stream)?,
        ))
    }

    fn clone_box(&self) -> Box<dyn MachineCore<S>> {
        Box::new(self.clone())
    }
}

/// Discrete dynamical system on event wires: fold the update over input
/// events, emitting the readout at each event's own timestamp.
pub fn make_dds<S: Real>(spec: DdsSpec<S>) -> Machine<S> {
    let state = spec.initial.clone();
    Machine::new(
        Kind::Events,
        Kind::Events,
        Duration::ZERO,
        Box::new(DdsCore {
            spec,
            state,
            t0: 0,
        }),
    )
}

// ---------------------------------------------------------------------------
// continuous dynamical system adapter

#[derive(Clone)]
pub struct CdsSpec<S: Real> {
    pub input_dim: usize,
    pub state_dim: usize,
    pub output_dim: usize,
    pub dynamics: Arc<dyn Fn(&[S], &[S]) -> Vec<S> + Send + Sync>,
    pub readout: Arc<dyn Fn(&[S]) -> Vec<S> + Send + Sync>,
    pub initial: Vec<S>,
    /// Integrator step in ticks; block boundaries must align to it.
    pub h: Duration,
    pub seconds_per_tick: f64,
    /// Whether the input wire is a step (piecewise-constant) trajectory
    /// rather than piecewise-linear.
    pub step_input: bool,
}

#[derive(Clone)]
struct CdsCore<S: Real> {
    spec: CdsSpec<S>,
    state: Vec<S>,
    t0: Tick,
}

impl<S: Real> MachineCore<S> for CdsCore<S> {
    fn advance(&mut self, input: &SectionVal<S>) -> Result<SectionVal<S>, MachineError> {
        let len = input.length().ticks();
        let h = self.spec.h.ticks();
        if self.t0 % h != 0 || len % h != 0 {
            return Err(MachineError::BlockNotAligned);
        }
        let dt = S::from_f64_lossy(h as f64 * self.spec.seconds_per_tick);
        let half = dt / S::from_f64_lossy(2.0);
        let sixth = dt / S::from_f64_lossy(6.0);
        let two = S::from_f64_lossy(2.0);

        let mut breakpoints = vec![0];
        let mut values = vec![(self.spec.readout)(&self.state)];
        let mut t = 0;
        while t < len {
            let u0 = sample_at(input, t as f64)?;
            let um = sample_at(input, t as f64 + h as f64 / 2.0)?;
            let u1 = sample_at(input, (t + h) as f64)?;
            let s = &self.state;
            let k1 = (self.spec.dynamics)(&u0, s);
            let s2: Vec<S> = s.iter().zip(&k1).map(|(x, k)| *x + half * *k).collect();
            let k2 = (self.spec.dynamics)(&um, &s2);
            let s3: Vec<S> = s.iter().zip(&k2).map(|(x, k)| *x + half * *k).collect();
            let k3 = (self.spec.dynamics)(&um, &s3);
            let s4: Vec<S> = s.iter().zip(&k3).map(|(x, k)| *x + dt * *k).collect();
            let k4 = (self.spec.dynamics)(&u1, &s4);
            self.state = s
                .iter()
                .enumerate()
                .map(|(i, x)| *x + sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]))
                .collect();
            if self.state.iter().any(|x| !x.is_finite()) {
                return Err(MachineError::NonFiniteState);
            }
            t += h;
            breakpoints.push(t);
            values.push((self.spec.readout)(&self.state));
        }
        self.t0 += len;
        Ok(SectionVal::Linear(
            LinearTrajectory::new(Duration(len), breakpoints, values)
                .map_err(MachineError::Trajectory)?,
        ))
    }

    fn clone_box(&self) -> Box<dyn MachineCore<S>> {
        Box::new(self.clone())
    }
}

/// Continuous dynamical system adapter: integrates `ṡ = f(u, s)` with
/// classical fixed-step fourth-order Runge–Kutta and emits `f_rdt(s)` on the
/// integrator grid.
pub fn make_cds<S: Real>(spec: CdsSpec<S>) -> Machine<S> {
    assert!(spec.h.ticks() >= 1);
    assert_eq!(spec.initial.len(), spec.state_dim);
    let input_kind = if spec.step_input {
        Kind::Step(spec.input_dim)
    } else {
        Kind::Linear(spec.input_dim)
    };
    let output_kind = Kind::Linear(spec.output_dim);
    let state = spec.initial.clone();
    Machine::new(
        input_kind,
        output_kind,
        Duration::ZERO,
        Box::new(CdsCore {
            spec,
            state,
            t0: 0,
        }),
    )
}
