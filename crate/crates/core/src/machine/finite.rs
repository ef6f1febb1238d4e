//! Fully enumerable table machines.
//!
//! A `FiniteMachineTable` is a Mealy-style machine over finite alphabets: at
//! every tick it consumes one input symbol, follows a transition, and emits
//! one output symbol. Transition entries are *sets*, so partial and
//! nondeterministic tables can be expressed and classified; only
//! single-valued, total tables are executable.
//!
//! These machines exist to cross-check the compositional executor: their
//! behavior sets are small enough to enumerate exhaustively, so series
//! composition can be compared against the brute-force relational composite.

use crate::event::EventStream;
use crate::scalar::Real;
use crate::sheaf::Section;
use crate::timebase::{Duration, Tick};

use super::value::{emit_lo, Kind, SectionVal, Value};
use super::{Machine, MachineCore, MachineError};

/// Enumeration budget for the classifier and the behavior oracle.
pub const MAX_STATES: usize = 4;
pub const MAX_SYMBOLS: usize = 4;
pub const MAX_HORIZON: Tick = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteMachineTable {
    pub states: usize,
    pub inputs: usize,
    pub outputs: usize,
    pub initial: usize,
    /// `trans[state][input]` = set of (next state, output symbol) choices.
    pub trans: Vec<Vec<Vec<(usize, usize)>>>,
}

impl FiniteMachineTable {
    pub fn new(
        states: usize,
        inputs: usize,
        outputs: usize,
        initial: usize,
        trans: Vec<Vec<Vec<(usize, usize)>>>,
    ) -> Self {
        assert!(states > 0 && inputs > 0 && outputs > 0);
        assert!(initial < states);
        assert_eq!(trans.len(), states);
        for row in &trans {
            assert_eq!(row.len(), inputs);
            for cell in row {
                for (s, y) in cell {
                    assert!(*s < states && *y < outputs);
                }
            }
        }
        FiniteMachineTable {
            states,
            inputs,
            outputs,
            initial,
            trans,
        }
    }

    fn check_budget(&self, horizon: Tick) -> Result<(), MachineError> {
        if self.states > MAX_STATES
            || self.inputs > MAX_SYMBOLS
            || self.outputs > MAX_SYMBOLS
            || horizon > MAX_HORIZON
        {
            return Err(MachineError::EnumerationBudgetExceeded);
        }
        Ok(())
    }

    pub fn is_executable(&self) -> bool {
        self.trans
            .iter()
            .all(|row| row.iter().all(|cell| cell.len() == 1))
    }

    /// Deterministic run on an input word; `None` when a transition is
    /// missing or multi-valued.
    pub fn run_word(&self, word: &[usize]) -> Option<Vec<usize>> {
        let mut s = self.initial;
        let mut out = Vec::with_capacity(word.len());
        for &x in word {
            match self.trans[s][x].as_slice() {
                [(next, y)] => {
                    out.push(*y);
                    s = *next;
                }
                _ => return None,
            }
        }
        Some(out)
    }

    /// All (input word, output word) behavior pairs over the horizon,
    /// following every nondeterministic choice.
    pub fn behaviors(&self, horizon: Tick) -> Result<Vec<(Vec<usize>, Vec<usize>)>, MachineError> {
        self.check_budget(horizon)?;
        let mut done = Vec::new();
        // frontier of partial runs: (state, input word so far, output word)
        let mut frontier = vec![(self.initial, Vec::new(), Vec::new())];
        for _ in 0..horizon {
            let mut next = Vec::new();
            for (s, xs, ys) in frontier {
                for x in 0..self.inputs {
                    for (s2, y) in &self.trans[s][x] {
                        let mut xs2 = xs.clone();
                        let mut ys2 = ys.clone();
                        xs2.push(x);
                        ys2.push(*y);
                        next.push((*s2, xs2, ys2));
                    }
                }
            }
            frontier = next;
        }
        for (_, xs, ys) in frontier {
            done.push((xs, ys));
        }
        done.sort();
        done.dedup();
        Ok(done)
    }

    /// Convert an executable table to a machine on dense symbol-event wires:
    /// one input symbol per tick starting at tick 0, one output symbol at the
    /// same tick.
    pub fn to_machine<S: Real>(&self) -> Result<Machine<S>, MachineError> {
        if !self.is_executable() {
            return Err(MachineError::BadWireValue(
                "table is not total and deterministic".to_string(),
            ));
        }
        Ok(Machine::new(
            Kind::Events,
            Kind::Events,
            Duration::ZERO,
            Box::new(TableCore {
                table: self.clone(),
                state: self.initial,
                t0: 0,
            }),
        ))
    }
}

#[derive(Clone)]
struct TableCore {
    table: FiniteMachineTable,
    state: usize,
    t0: Tick,
}

impl<S: Real> MachineCore<S> for TableCore {
    fn advance(&mut self, input: &SectionVal<S>) -> Result<SectionVal<S>, MachineError> {
        let events = input.expect_events()?;
        let len = events.length();
        let lo = emit_lo(self.t0);
        let mut out: Vec<(Tick, Value<S>)> = Vec::new();
        let mut expected = lo;
        for (t, v) in events.events() {
            if *t < lo {
                continue;
            }
            if *t != expected {
                return Err(MachineError::BadWireValue(format!(
                    "symbol wire must be dense: expected tick {expected}, got {t}"
                )));
            }
            let x = v
                .as_symbol()
                .ok_or_else(|| MachineError::BadWireValue(format!("{v:?}")))?;
            if x >= self.table.inputs {
                return Err(MachineError::BadWireValue(format!("symbol {x} out of range")));
            }
            let (next, y) = self.table.trans[self.state][x][0];
            out.push((*t, Value::Symbol(y)));
            self.state = next;
            expected += 1;
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

/// Encode an input word as a dense symbol-event section over `[0, len-1]`.
pub fn word_to_section<S: Real>(word: &[usize]) -> SectionVal<S> {
    let len = Duration(word.len().saturating_sub(1) as Tick);
    let events = word
        .iter()
        .enumerate()
        .map(|(t, &x)| (t as Tick, Value::Symbol(x)))
        .collect();
    SectionVal::Events(EventStream::new(len, events).expect("dense word"))
}

/// Decode a dense symbol-event section back into a word.
pub fn section_to_word<S: Real>(s: &SectionVal<S>) -> Result<Vec<usize>, MachineError> {
    let events = s.expect_events()?;
    events
        .events()
        .iter()
        .map(|(_, v)| {
            v.as_symbol()
                .ok_or_else(|| MachineError::BadWireValue(format!("{v:?}")))
        })
        .collect()
}

/// Exhaustive relational composite of two behavior sets: pairs of behaviors
/// whose shared middle word agrees, projected to (outer input, outer output).
pub fn pullback_oracle(
    m1: &FiniteMachineTable,
    m2: &FiniteMachineTable,
    horizon: Tick,
) -> Result<Vec<(Vec<usize>, Vec<usize>)>, MachineError> {
    let b1 = m1.behaviors(horizon)?;
    let b2 = m2.behaviors(horizon)?;
    let mut out = Vec::new();
    for (x1, y1) in &b1 {
        for (x2, y2) in &b2 {
            if y1 == x2 {
                out.push((x1.clone(), y2.clone()));
            }
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

/// Classification of a table against the totality/determinism contract.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TotalDeterministicReport {
    pub total: bool,
    pub deterministic: bool,
    /// Witness (input prefix reaching the state, blocked symbol).
    pub total_counterexample: Option<(Vec<usize>, usize)>,
    /// Witness (input prefix reaching the state, branching symbol).
    pub deterministic_counterexample: Option<(Vec<usize>, usize)>,
}

/// Walk every state reachable within the horizon and count consistent
/// extensions per input symbol: total needs at least one, deterministic at
/// most one.
pub fn check_total_deterministic(
    m: &FiniteMachineTable,
    horizon: Duration,
) -> Result<TotalDeterministicReport, MachineError> {
    m.check_budget(horizon.ticks())?;
    let mut report = TotalDeterministicReport {
        total: true,
        deterministic: true,
        total_counterexample: None,
        deterministic_counterexample: None,
    };
    // frontier of (state, witness word); horizon bounds the depth
    let mut frontier: Vec<(usize, Vec<usize>)> = vec![(m.initial, Vec::new())];
    let mut seen = vec![false; m.states];
    seen[m.initial] = true;
    for _ in 0..horizon.ticks() {
        let mut next = Vec::new();
        for (s, word) in frontier {
            for x in 0..m.inputs {
                let cell = &m.trans[s][x];
                if cell.is_empty() && report.total_counterexample.is_none() {
                    report.total = false;
                    report.total_counterexample = Some((word.clone(), x));
                }
                if cell.len() > 1 && report.deterministic_counterexample.is_none() {
                    report.deterministic = false;
                    report.deterministic_counterexample = Some((word.clone(), x));
                }
                for (s2, _) in cell {
                    if !seen[*s2] {
                        seen[*s2] = true;
                        let mut w = word.clone();
                        w.push(x);
                        next.push((*s2, w));
                    }
                }
            }
        }
        frontier = next;
    }
    Ok(report)
}

/// Total, deterministic xor machine: output and next state are `state ⊕ input`.
pub fn fixture_good() -> FiniteMachineTable {
    let trans = (0..2usize)
        .map(|s| (0..2usize).map(|x| vec![(s ^ x, s ^ x)]).collect())
        .collect();
    FiniteMachineTable::new(2, 2, 2, 0, trans)
}

/// The xor machine with one transition deleted: not total.
pub fn fixture_partial() -> FiniteMachineTable {
    let mut t = fixture_good();
    t.trans[1][1].clear();
    t
}

/// The xor machine with one transition duplicated to a second target: not
/// deterministic.
pub fn fixture_nondet() -> FiniteMachineTable {
    let mut t = fixture_good();
    t.trans[0][0].push((1, 1));
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::{run, series};

    fn all_words(alphabet: usize, len: usize) -> Vec<Vec<usize>> {
        let mut words = vec![Vec::new()];
        for _ in 0..len {
            words = words
                .into_iter()
                .flat_map(|w| {
                    (0..alphabet).map(move |x| {
                        let mut w2 = w.clone();
                        w2.push(x);
                        w2
                    })
                })
                .collect();
        }
        words
    }

    #[test]
    fn xor_machine_runs_words() {
        let t = fixture_good();
        assert_eq!(t.run_word(&[1, 1, 0]), Some(vec![1, 0, 0]));
    }

    #[test]
    fn behaviors_match_run_word_when_deterministic() {
        let t = fixture_good();
        let b = t.behaviors(3).unwrap();
        assert_eq!(b.len(), 8);
        for (x, y) in b {
            assert_eq!(t.run_word(&x), Some(y));
        }
    }

    #[test]
    fn executable_machine_matches_table() {
        let t = fixture_good();
        let m = t.to_machine::<f64>().unwrap();
        for word in all_words(2, 4) {
            let input = word_to_section::<f64>(&word);
            let trace = run(&m, &input, Duration(1)).unwrap();
            assert_eq!(section_to_word(&trace.output).unwrap(), t.run_word(&word).unwrap());
        }
    }

    #[test]
    fn series_matches_pullback_oracle() {
        let t1 = fixture_good();
        // second machine: output = negation of input, single state
        let t2 = FiniteMachineTable::new(1, 2, 2, 0, vec![vec![vec![(0, 1)], vec![(0, 0)]]]);
        let horizon = 3;
        let oracle = pullback_oracle(&t1, &t2, horizon).unwrap();

        let m = series(t1.to_machine::<f64>().unwrap(), t2.to_machine().unwrap()).unwrap();
        let mut executed = Vec::new();
        for word in all_words(2, horizon as usize) {
            let trace = run(&m, &word_to_section::<f64>(&word), Duration(1)).unwrap();
            executed.push((word, section_to_word(&trace.output).unwrap()));
        }
        executed.sort();
        assert_eq!(executed, oracle);
    }

    #[test]
    fn classifier_on_fixtures() {
        let good = check_total_deterministic(&fixture_good(), Duration(4)).unwrap();
        assert!(good.total && good.deterministic);

        let partial = check_total_deterministic(&fixture_partial(), Duration(4)).unwrap();
        assert!(!partial.total);
        assert!(partial.total_counterexample.is_some());

        let nondet = check_total_deterministic(&fixture_nondet(), Duration(4)).unwrap();
        assert!(!nondet.deterministic);
        assert_eq!(nondet.deterministic_counterexample, Some((vec![], 0)));
    }

    #[test]
    fn budget_is_enforced() {
        let t = fixture_good();
        assert!(matches!(
            t.behaviors(9),
            Err(MachineError::EnumerationBudgetExceeded)
        ));
    }

    #[test]
    fn nondeterministic_table_is_not_executable() {
        assert!(fixture_nondet().to_machine::<f64>().is_err());
    }
}
