//! Executable machines: total, deterministic state-threading step functions
//! over stream blocks, with series, tensor, and trace composition and the
//! ε-delay.
//!
//! A machine owns a prototype core; every `run` clones it, folds `advance`
//! over consecutive closed blocks `[t, t+Δ]`, and assembles the outputs. A
//! block seam belongs to the earlier block: cores only react to (and emit at)
//! local tick 0 on the very first block, so the assembled result is
//! independent of the block size.

pub mod finite;
pub mod value;

use thiserror::Error;

use crate::event::EventStream;
use crate::scalar::Real;
use crate::sheaf::{Section, SectionError};
use crate::timebase::{ClosedInterval, Duration, Tick};
use crate::trajectory::{LinearTrajectory, StepTrajectory, TrajectoryError};

pub use value::{emit_lo, merge_wires, split_wire, Assembler, Kind, SectionVal, Value};

use crate::event::StreamError;

#[derive(Debug, Error)]
pub enum MachineError {
    #[error("wire kind mismatch: expected {expected:?}, got {got:?}")]
    KindMismatch { expected: Kind, got: Kind },
    #[error("run step must be at least one tick")]
    BadStep,
    #[error("loop requires inertial lead >= step: lead {lead:?} < step {step:?}")]
    InsufficientLead { lead: Duration, step: Duration },
    #[error("loop wire disagrees with the machine's declared inertial lead")]
    FixedPointViolation,
    #[error("delay seed must have length equal to the delay")]
    SeedLengthMismatch,
    #[error("machine state diverged to a non-finite value")]
    NonFiniteState,
    #[error("machine emitted non-monotone or conflicting output events")]
    NonMonotoneOutput,
    #[error("event timestamps must not move backwards")]
    NonMonotoneTime,
    #[error("trajectory blocks disagree at the seam: {0}")]
    SeamMismatch(String),
    #[error("intensity below the configured floor")]
    NonPositiveIntensity,
    #[error("scene has no reflectance gradient in the prior window")]
    DegenerateScene,
    #[error("enumeration budget exceeded")]
    EnumerationBudgetExceeded,
    #[error("block not aligned to the integrator step")]
    BlockNotAligned,
    #[error("unexpected wire value: {0}")]
    BadWireValue(String),
    #[error(transparent)]
    Section(#[from] SectionError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Stream(#[from] StreamError),
}

/// One step of a machine: consume the input section over the current block,
/// mutate internal state, return the output section over the same block.
pub trait MachineCore<S: Real>: Send {
    fn advance(&mut self, input: &SectionVal<S>) -> Result<SectionVal<S>, MachineError>;

    fn clone_box(&self) -> Box<dyn MachineCore<S>>;

    /// Named intermediate wires recorded during the run, if any.
    fn collect_wires(&self, _out: &mut Vec<(String, SectionVal<S>)>) {}
}

impl<S: Real> Clone for Box<dyn MachineCore<S>> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

/// An executable machine: wire kinds, declared inertial lead, and a prototype
/// core cloned per run.
#[derive(Clone)]
pub struct Machine<S: Real> {
    pub input_kind: Kind,
    pub output_kind: Kind,
    pub lead: Duration,
    core: Box<dyn MachineCore<S>>,
}

impl<S: Real> Machine<S> {
    pub fn new(
        input_kind: Kind,
        output_kind: Kind,
        lead: Duration,
        core: Box<dyn MachineCore<S>>,
    ) -> Self {
        Machine {
            input_kind,
            output_kind,
            lead,
            core,
        }
    }

    pub fn identity(kind: Kind) -> Self {
        Machine::new(
            kind.clone(),
            kind,
            Duration::ZERO,
            Box::new(IdentityCore),
        )
    }

    pub fn fresh_core(&self) -> Box<dyn MachineCore<S>> {
        self.core.clone_box()
    }
}

/// The recorded behavior of one run: input and output over `[0, ℓ]`, plus any
/// named internal wires.
#[derive(Debug, Clone)]
pub struct BehaviorTrace<S: Real> {
    pub input: SectionVal<S>,
    pub output: SectionVal<S>,
    pub wires: Vec<(String, SectionVal<S>)>,
}

/// Fold `advance` over consecutive blocks of the given step.
pub fn run<S: Real>(
    m: &Machine<S>,
    input: &SectionVal<S>,
    step: Duration,
) -> Result<BehaviorTrace<S>, MachineError> {
    if step.ticks() == 0 {
        return Err(MachineError::BadStep);
    }
    if input.kind() != m.input_kind {
        return Err(MachineError::KindMismatch {
            expected: m.input_kind.clone(),
            got: input.kind(),
        });
    }
    let mut core = m.core.clone_box();
    let len = input.length().ticks();
    let mut assembler = Assembler::new();
    let mut t0: Tick = 0;
    loop {
        let t1 = (t0 + step.ticks()).min(len);
        let window = ClosedInterval::new(t0, t1).expect("ordered");
        let block = input.restrict(window)?;
        let out = core.advance(&block)?;
        if out.length() != window.len() {
            return Err(MachineError::SeamMismatch(format!(
                "core produced a block of length {:?} for a window of length {:?}",
                out.length(),
                window.len()
            )));
        }
        assembler.push(out)?;
        t0 = t1;
        if t0 >= len {
            break;
        }
    }
    let output = assembler.finish().expect("at least one block");
    let mut wires = Vec::new();
    core.collect_wires(&mut wires);
    Ok(BehaviorTrace {
        input: input.clone(),
        output,
        wires,
    })
}

#[derive(Clone)]
struct IdentityCore;

impl<S: Real> MachineCore<S> for IdentityCore {
    fn advance(&mut self, input: &SectionVal<S>) -> Result<SectionVal<S>, MachineError> {
        Ok(input.clone())
    }

    fn clone_box(&self) -> Box<dyn MachineCore<S>> {
        Box::new(self.clone())
    }
}

// ---------------------------------------------------------------------------
// series

#[derive(Clone)]
struct SeriesCore<S: Real> {
    first: Box<dyn MachineCore<S>>,
    second: Box<dyn MachineCore<S>>,
    label: Option<String>,
    recorded: Assembler<S>,
}

impl<S: Real> MachineCore<S> for SeriesCore<S> {
    fn advance(&mut self, input: &SectionVal<S>) -> Result<SectionVal<S>, MachineError> {
        let mid = self.first.advance(input)?;
        if self.label.is_some() {
            self.recorded.push(mid.clone())?;
        }
        self.second.advance(&mid)
    }

    fn clone_box(&self) -> Box<dyn MachineCore<S>> {
        Box::new(self.clone())
    }

    fn collect_wires(&self, out: &mut Vec<(String, SectionVal<S>)>) {
        self.first.collect_wires(out);
        if let (Some(label), Some(mid)) = (&self.label, self.recorded.peek()) {
            out.push((label.clone(), mid.clone()));
        }
        self.second.collect_wires(out);
    }
}

/// Feed the first machine's block output into the second within the same
/// block. Composite lead is conservatively the second machine's lead.
pub fn series<S: Real>(m1: Machine<S>, m2: Machine<S>) -> Result<Machine<S>, MachineError> {
    series_labeled(m1, m2, None)
}

/// Series composition that records the shared wire under the given label.
pub fn series_labeled<S: Real>(
    m1: Machine<S>,
    m2: Machine<S>,
    label: Option<&str>,
) -> Result<Machine<S>, MachineError> {
    if m1.output_kind != m2.input_kind {
        return Err(MachineError::KindMismatch {
            expected: m1.output_kind.clone(),
            got: m2.input_kind.clone(),
        });
    }
    Ok(Machine::new(
        m1.input_kind.clone(),
        m2.output_kind.clone(),
        m2.lead,
        Box::new(SeriesCore {
            first: m1.core,
            second: m2.core,
            label: label.map(String::from),
            recorded: Assembler::new(),
        }),
    ))
}

// ---------------------------------------------------------------------------
// tensor

#[derive(Debug, Clone, PartialEq)]
enum WireJoin {
    /// Two event wires carried as one ⊙-typed stream.
    MergedEvents,
    /// Two linear trajectories carried as one stacked vector trajectory.
    StackedLinear(usize, usize),
    /// Anything else carried as an explicit pair.
    Paired,
}

impl WireJoin {
    fn choose(a: &Kind, b: &Kind) -> (WireJoin, Kind) {
        match (a, b) {
            (Kind::Events, Kind::Events) => (WireJoin::MergedEvents, Kind::Events),
            (Kind::Linear(n), Kind::Linear(m)) => {
                (WireJoin::StackedLinear(*n, *m), Kind::Linear(n + m))
            }
            _ => (WireJoin::Paired, Kind::pair(a.clone(), b.clone())),
        }
    }

    fn split<S: Real>(
        &self,
        s: &SectionVal<S>,
    ) -> Result<(SectionVal<S>, SectionVal<S>), MachineError> {
        match self {
            WireJoin::MergedEvents => {
                let (a, b) = split_wire(s.expect_events()?)?;
                Ok((SectionVal::Events(a), SectionVal::Events(b)))
            }
            WireJoin::StackedLinear(n, m) => {
                let t = s.expect_linear()?;
                Ok((
                    SectionVal::Linear(t.components(0..*n)?),
                    SectionVal::Linear(t.components(*n..n + m)?),
                ))
            }
            WireJoin::Paired => {
                let (a, b) = s.expect_pair()?;
                Ok((a.clone(), b.clone()))
            }
        }
    }

    fn join<S: Real>(
        &self,
        a: SectionVal<S>,
        b: SectionVal<S>,
    ) -> Result<SectionVal<S>, MachineError> {
        match self {
            WireJoin::MergedEvents => Ok(SectionVal::Events(merge_wires(
                a.expect_events()?,
                b.expect_events()?,
            )?)),
            WireJoin::StackedLinear(_, _) => Ok(SectionVal::Linear(LinearTrajectory::stack(&[
                a.expect_linear()?.clone(),
                b.expect_linear()?.clone(),
            ])?)),
            WireJoin::Paired => Ok(SectionVal::Pair(Box::new(a), Box::new(b))),
        }
    }
}

#[derive(Clone)]
struct TensorCore<S: Real> {
    a: Box<dyn MachineCore<S>>,
    b: Box<dyn MachineCore<S>>,
    in_join: WireJoin,
    out_join: WireJoin,
}

impl<S: Real> MachineCore<S> for TensorCore<S> {
    fn advance(&mut self, input: &SectionVal<S>) -> Result<SectionVal<S>, MachineError> {
        let (ia, ib) = self.in_join.split(input)?;
        let oa = self.a.advance(&ia)?;
        let ob = self.b.advance(&ib)?;
        self.out_join.join(oa, ob)
    }

    fn clone_box(&self) -> Box<dyn MachineCore<S>> {
        Box::new(self.clone())
    }

    fn collect_wires(&self, out: &mut Vec<(String, SectionVal<S>)>) {
        self.a.collect_wires(out);
        self.b.collect_wires(out);
    }
}

/// Put two machines in parallel. Event wires pair up as merged ⊙-streams,
/// linear-trajectory wires as stacked vectors, anything else as explicit
/// pairs.
pub fn tensor<S: Real>(m1: Machine<S>, m2: Machine<S>) -> Machine<S> {
    let (in_join, input_kind) = WireJoin::choose(&m1.input_kind, &m2.input_kind);
    let (out_join, output_kind) = WireJoin::choose(&m1.output_kind, &m2.output_kind);
    let lead = m1.lead.min(m2.lead);
    Machine::new(
        input_kind,
        output_kind,
        lead,
        Box::new(TensorCore {
            a: m1.core,
            b: m2.core,
            in_join,
            out_join,
        }),
    )
}

// ---------------------------------------------------------------------------
// trace

#[derive(Clone)]
struct TraceCore<S: Real> {
    inner: Box<dyn MachineCore<S>>,
    /// Internal feedback granularity; must not exceed the inner lead.
    step: Duration,
    loop_kind: Kind,
    /// Whether the outer machine has non-trivial pass-through wires.
    pass_through: bool,
    label: Option<String>,
    recorded: Assembler<S>,
}

impl<S: Real> TraceCore<S> {
    fn advance_block(&mut self, a_in: &SectionVal<S>) -> Result<SectionVal<S>, MachineError> {
        let len = a_in.length();
        // predict the loop output from a state clone fed with quiescent input;
        // inertiality makes the prediction exact for blocks within the lead
        let quiescent = SectionVal::quiescent(&self.loop_kind, len);
        let dummy_in = self.compose_input(a_in, &quiescent);
        let mut probe = self.inner.clone_box();
        let predicted = probe.advance(&dummy_in)?;
        let (_, c_pred) = self.decompose_output(&predicted)?;

        let real_in = self.compose_input(a_in, &c_pred);
        let out = self.inner.advance(&real_in)?;
        let (b_out, c_out) = self.decompose_output(&out)?;
        if c_out != c_pred {
            return Err(MachineError::FixedPointViolation);
        }
        if self.label.is_some() {
            self.recorded.push(c_out)?;
        }
        Ok(b_out)
    }

    fn compose_input(&self, a: &SectionVal<S>, c: &SectionVal<S>) -> SectionVal<S> {
        if self.pass_through {
            SectionVal::Pair(Box::new(a.clone()), Box::new(c.clone()))
        } else {
            c.clone()
        }
    }

    fn decompose_output(
        &self,
        out: &SectionVal<S>,
    ) -> Result<(SectionVal<S>, SectionVal<S>), MachineError> {
        if self.pass_through {
            let (b, c) = out.expect_pair()?;
            Ok((b.clone(), c.clone()))
        } else {
            Ok((SectionVal::Unit(out.length()), out.clone()))
        }
    }
}

impl<S: Real> MachineCore<S> for TraceCore<S> {
    fn advance(&mut self, input: &SectionVal<S>) -> Result<SectionVal<S>, MachineError> {
        // sub-step at the internal feedback granularity so outer block sizes
        // never exceed the inertial lead
        let len = input.length().ticks();
        let mut assembler = Assembler::new();
        let mut t0 = 0;
        loop {
            let t1 = (t0 + self.step.ticks()).min(len);
            let block = input.restrict(ClosedInterval::new(t0, t1).expect("ordered"))?;
            let out = self.advance_block(&block)?;
            assembler.push(out)?;
            t0 = t1;
            if t0 >= len {
                break;
            }
        }
        Ok(assembler.finish().expect("at least one block"))
    }

    fn clone_box(&self) -> Box<dyn MachineCore<S>> {
        Box::new(self.clone())
    }

    fn collect_wires(&self, out: &mut Vec<(String, SectionVal<S>)>) {
        self.inner.collect_wires(out);
        if let (Some(label), Some(c)) = (&self.label, self.recorded.peek()) {
            out.push((label.clone(), c.clone()));
        }
    }
}

/// Close the feedback loop of a machine of kind `(A×C, B×C)`, yielding an
/// `(A, B)` machine. The loop executes at granularity `step`, which must not
/// exceed the machine's inertial lead.
pub fn trace<S: Real>(m: Machine<S>, step: Duration) -> Result<Machine<S>, MachineError> {
    let (a, c_in) = match &m.input_kind {
        Kind::Pair(a, c) => ((**a).clone(), (**c).clone()),
        other => {
            return Err(MachineError::KindMismatch {
                expected: Kind::pair(Kind::Unit, Kind::Unit),
                got: other.clone(),
            })
        }
    };
    let (b, c_out) = match &m.output_kind {
        Kind::Pair(b, c) => ((**b).clone(), (**c).clone()),
        other => {
            return Err(MachineError::KindMismatch {
                expected: Kind::pair(Kind::Unit, Kind::Unit),
                got: other.clone(),
            })
        }
    };
    if c_in != c_out {
        return Err(MachineError::KindMismatch {
            expected: c_in,
            got: c_out,
        });
    }
    check_loop_step(m.lead, step)?;
    Ok(Machine::new(
        a,
        b,
        m.lead,
        Box::new(TraceCore {
            inner: m.core,
            step,
            loop_kind: c_in,
            pass_through: true,
            label: None,
            recorded: Assembler::new(),
        }),
    ))
}

/// Trace a fully-looped `(C, C)` machine: every wire feeds back, and the
/// result is a machine on the trivial wire. The loop wire is recorded under
/// the given label.
pub fn trace_loop<S: Real>(
    m: Machine<S>,
    step: Duration,
    loop_label: &str,
) -> Result<Machine<S>, MachineError> {
    if m.input_kind != m.output_kind {
        return Err(MachineError::KindMismatch {
            expected: m.input_kind.clone(),
            got: m.output_kind.clone(),
        });
    }
    check_loop_step(m.lead, step)?;
    Ok(Machine::new(
        Kind::Unit,
        Kind::Unit,
        m.lead,
        Box::new(TraceCore {
            loop_kind: m.input_kind.clone(),
            inner: m.core,
            step,
            pass_through: false,
            label: Some(loop_label.to_string()),
            recorded: Assembler::new(),
        }),
    ))
}

fn check_loop_step(lead: Duration, step: Duration) -> Result<(), MachineError> {
    if step.ticks() == 0 {
        return Err(MachineError::BadStep);
    }
    if lead < step {
        return Err(MachineError::InsufficientLead { lead, step });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// delay

#[derive(Clone)]
struct DelayEventsCore<S: Real> {
    eps: Tick,
    /// Pending output events at their global due ticks, sorted.
    pending: Vec<(Tick, Value<S>)>,
    t0: Tick,
}

impl<S: Real> MachineCore<S> for DelayEventsCore<S> {
    fn advance(&mut self, input: &SectionVal<S>) -> Result<SectionVal<S>, MachineError> {
        let events = input.expect_events()?;
        let len = events.length();
        let t1 = self.t0 + len.ticks();
        let lo = emit_lo(self.t0);
        for (t, v) in events.events() {
            if *t >= lo {
                self.pending.push((self.t0 + t + self.eps, v.clone()));
            }
        }
        let due: Vec<(Tick, Value<S>)> = self
            .pending
            .iter()
            .filter(|(g, _)| *g <= t1)
            .map(|(g, v)| (g - self.t0, v.clone()))
            .collect();
        self.pending.retain(|(g, _)| *g > t1);
        self.t0 = t1;
        Ok(SectionVal::Events(
            EventStream::new(len, due).map_err(MachineError::Stream)?,
        ))
    }

    fn clone_box(&self) -> Box<dyn MachineCore<S>> {
        Box::new(self.clone())
    }
}

#[derive(Clone)]
struct DelayStepCore<S: Real> {
    eps: Tick,
    /// The last `eps` of the seed-then-input history.
    tail: StepTrajectory<S>,
}

impl<S: Real> MachineCore<S> for DelayStepCore<S> {
    fn advance(&mut self, input: &SectionVal<S>) -> Result<SectionVal<S>, MachineError> {
        let block = input.expect_step()?;
        let len = block.length().ticks();
        // extend the history, inserting a step at the seam if the value jumps
        let mut steps = self.tail.steps().to_vec();
        if block.initial() != self.tail.final_value().as_slice() {
            steps.push((self.eps, block.initial().to_vec()));
        }
        for (t, v) in block.steps() {
            steps.push((self.eps + t, v.clone()));
        }
        let extended = StepTrajectory::new(
            Duration(self.eps + len),
            self.tail.initial().to_vec(),
            steps,
        )?;
        let out = extended.restrict(ClosedInterval::new(0, len).expect("ordered"))?;
        self.tail =
            extended.restrict(ClosedInterval::new(len, len + self.eps).expect("ordered"))?;
        Ok(SectionVal::Step(out))
    }

    fn clone_box(&self) -> Box<dyn MachineCore<S>> {
        Box::new(self.clone())
    }
}

/// The ε-delay machine: output replays the seed for the first ε, then the
/// input shifted by ε. Declared lead is ε.
///
/// Supported wire kinds: event streams and step trajectories. A delayed
/// piecewise-linear wire would need a jump at the seed/input seam, which the
/// linear representation cannot carry; reconstructed (step) signals cover the
/// places delays are used.
pub fn delay_machine<S: Real>(
    epsilon: Duration,
    seed: SectionVal<S>,
) -> Result<Machine<S>, MachineError> {
    if epsilon.ticks() == 0 {
        return Err(MachineError::BadStep);
    }
    if seed.length() != epsilon {
        return Err(MachineError::SeedLengthMismatch);
    }
    let kind = seed.kind();
    let core: Box<dyn MachineCore<S>> = match &seed {
        SectionVal::Events(e) => Box::new(DelayEventsCore {
            eps: epsilon.ticks(),
            pending: e.events().to_vec(),
            t0: 0,
        }),
        SectionVal::Step(t) => Box::new(DelayStepCore {
            eps: epsilon.ticks(),
            tail: t.clone(),
        }),
        other => {
            return Err(MachineError::KindMismatch {
                expected: Kind::Events,
                got: other.kind(),
            })
        }
    };
    Ok(Machine::new(kind.clone(), kind, epsilon, core))
}
