//! Runnable law suites: seeded randomized and exhaustive checks of the
//! algebraic contracts (translation category laws, gluing round-trips and
//! uniqueness, merge/split monoidality, table-machine classification).
//!
//! Each suite returns a [`LawReport`] so callers (the CLI `laws` subcommand
//! and the acceptance tests) can print one line per law and surface the first
//! counterexample on failure.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::event::{merge, split, EventStream, SumValue};
use crate::machine::finite::{
    check_total_deterministic, fixture_good, fixture_nondet, fixture_partial, FiniteMachineTable,
    TotalDeterministicReport,
};
use crate::sheaf::{check_compatible, glue, Section};
use crate::timebase::{hom_valid, ph_compose, ClosedInterval, Duration, Tick, Translation};
use crate::trajectory::{LinearTrajectory, StepTrajectory};

/// Outcome of one law suite.
#[derive(Debug, Clone)]
pub struct LawReport {
    pub name: &'static str,
    pub cases: usize,
    /// `None` when every case passed; otherwise the first counterexample.
    pub failure: Option<String>,
}

impl LawReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

/// Run every law suite with `budget` randomized cases per suite.
pub fn run_laws(budget: usize, seed: u64) -> Vec<LawReport> {
    vec![
        translation_category_laws(budget, seed),
        event_gluing_round_trip(budget, seed.wrapping_add(1)),
        trajectory_gluing_round_trip(budget, seed.wrapping_add(2)),
        event_gluing_uniqueness(),
        merge_split_inversion(budget, seed.wrapping_add(3)),
        merge_naturality(budget, seed.wrapping_add(4)),
        classifier_fixtures(),
    ]
}

/// Look up a bundled table fixture by name and classify it.
pub fn classify_fixture(name: &str) -> Option<(FiniteMachineTable, TotalDeterministicReport)> {
    let table = match name {
        "good" => fixture_good(),
        "partial" => fixture_partial(),
        "nondet" => fixture_nondet(),
        _ => return None,
    };
    let report = check_total_deterministic(&table, Duration(4)).expect("fixtures fit the budget");
    Some((table, report))
}

// ---------------------------------------------------------------------------
// translation category

/// Unitality and associativity of translation composition, plus closure of
/// morphism validity under composition, on random triples.
pub fn translation_category_laws(budget: usize, seed: u64) -> LawReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failure = None;
    for case in 0..budget {
        let a = Translation(rng.gen_range(0..1 << 20));
        let b = Translation(rng.gen_range(0..1 << 20));
        let c = Translation(rng.gen_range(0..1 << 20));
        let left = ph_compose(ph_compose(a, b).unwrap(), c).unwrap();
        let right = ph_compose(a, ph_compose(b, c).unwrap()).unwrap();
        if left != right {
            failure = Some(format!("case {case}: associativity {a:?} {b:?} {c:?}"));
            break;
        }
        if ph_compose(Translation::IDENTITY, a).unwrap() != a
            || ph_compose(a, Translation::IDENTITY).unwrap() != a
        {
            failure = Some(format!("case {case}: unitality {a:?}"));
            break;
        }
        // validity closes under composition
        let l = Duration(rng.gen_range(0..64));
        let l1 = Duration(rng.gen_range(0..1 << 21));
        let l2 = Duration(rng.gen_range(0..1 << 22));
        if hom_valid(a, l, l1) && hom_valid(b, l1, l2) {
            let ab = ph_compose(a, b).unwrap();
            if !hom_valid(ab, l, l2) {
                failure = Some(format!(
                    "case {case}: {a:?};{b:?} invalid on {l:?}->{l2:?}"
                ));
                break;
            }
        }
    }
    LawReport {
        name: "translation-category",
        cases: budget,
        failure,
    }
}

// ---------------------------------------------------------------------------
// gluing

fn random_event_stream(rng: &mut ChaCha8Rng, length: Tick, force_at_zero: Option<Option<u8>>) -> EventStream<u8> {
    let mut events = Vec::new();
    match force_at_zero {
        Some(Some(v)) => events.push((0, v)),
        Some(None) => {}
        None => {
            if rng.gen_bool(0.3) {
                events.push((0, rng.gen_range(0..4)));
            }
        }
    }
    for t in 1..=length {
        if rng.gen_bool(0.3) {
            events.push((t, rng.gen_range(0..4)));
        }
    }
    EventStream::new(Duration(length), events).expect("increasing by construction")
}

/// Glue-then-restrict round trip on random compatible event-stream pairs.
pub fn event_gluing_round_trip(budget: usize, seed: u64) -> LawReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failure = None;
    for case in 0..budget {
        let la = rng.gen_range(0..20);
        let lb = rng.gen_range(0..20);
        let a = random_event_stream(&mut rng, la, None);
        // the right neighbour must agree with a's boundary at the seam
        let boundary = a
            .events()
            .last()
            .filter(|(t, _)| *t == la)
            .map(|(_, v)| *v);
        let b = random_event_stream(&mut rng, lb, Some(boundary));
        if !check_compatible(&a, &b) {
            failure = Some(format!("case {case}: constructed pair incompatible"));
            break;
        }
        let g = match glue(&a, &b) {
            Ok(g) => g,
            Err(e) => {
                failure = Some(format!("case {case}: glue failed: {e}"));
                break;
            }
        };
        let left = g.restrict(ClosedInterval::new(0, la).unwrap()).unwrap();
        let right = g.restrict(ClosedInterval::new(la, la + lb).unwrap()).unwrap();
        if left != a || right != b {
            failure = Some(format!("case {case}: round trip mismatch\n  a={a:?}\n  b={b:?}\n  g={g:?}"));
            break;
        }
    }
    LawReport {
        name: "event-gluing-round-trip",
        cases: budget,
        failure,
    }
}

fn random_linear(rng: &mut ChaCha8Rng, length: Tick, first: Option<f64>) -> LinearTrajectory<f64> {
    let mut breakpoints = vec![0];
    let mut t = 0;
    while t < length {
        t += rng.gen_range(1..=4).min(length - t);
        breakpoints.push(t);
    }
    let values = breakpoints
        .iter()
        .enumerate()
        .map(|(i, _)| {
            if i == 0 {
                if let Some(f) = first {
                    return vec![f];
                }
            }
            vec![rng.gen_range(-8i32..=8) as f64]
        })
        .collect();
    LinearTrajectory::new(Duration(length), breakpoints, values).expect("valid by construction")
}

/// Glue-then-restrict round trip on random compatible trajectory pairs, both
/// piecewise-linear and step.
pub fn trajectory_gluing_round_trip(budget: usize, seed: u64) -> LawReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failure = None;
    for case in 0..budget {
        // piecewise-linear pair sharing the seam value
        let la = rng.gen_range(1..16);
        let lb = rng.gen_range(1..16);
        let a = random_linear(&mut rng, la, None);
        let seam = a.evaluate(la).unwrap()[0];
        let b = random_linear(&mut rng, lb, Some(seam));
        let g = match glue(&a, &b) {
            Ok(g) => g,
            Err(e) => {
                failure = Some(format!("case {case}: linear glue failed: {e}"));
                break;
            }
        };
        let left = g.restrict(ClosedInterval::new(0, la).unwrap()).unwrap();
        let right = g.restrict(ClosedInterval::new(la, la + lb).unwrap()).unwrap();
        let agree = |x: &LinearTrajectory<f64>, y: &LinearTrajectory<f64>| {
            (0..=x.length().ticks()).all(|t| x.evaluate(t).unwrap() == y.evaluate(t).unwrap())
        };
        if !agree(&left, &a) || !agree(&right, &b) {
            failure = Some(format!("case {case}: linear round trip mismatch"));
            break;
        }

        // step pair sharing the seam value
        let mut random_steps = |len: Tick| -> Vec<(Tick, Vec<f64>)> {
            (1..=len)
                .filter_map(|t| {
                    rng.gen_bool(0.4)
                        .then(|| (t, vec![rng.gen_range(-4i32..=4) as f64]))
                })
                .collect()
        };
        let left_steps = random_steps(la);
        let right_steps = random_steps(lb);
        let sa = StepTrajectory::new(
            Duration(la),
            vec![rng.gen_range(-4i32..=4) as f64],
            left_steps,
        )
        .unwrap();
        let sb = StepTrajectory::new(Duration(lb), sa.final_value(), right_steps).unwrap();
        let g = match glue(&sa, &sb) {
            Ok(g) => g,
            Err(e) => {
                failure = Some(format!("case {case}: step glue failed: {e}"));
                break;
            }
        };
        let left = g.restrict(ClosedInterval::new(0, la).unwrap()).unwrap();
        let right = g.restrict(ClosedInterval::new(la, la + lb).unwrap()).unwrap();
        let agree = |x: &StepTrajectory<f64>, y: &StepTrajectory<f64>| {
            (0..=x.length().ticks()).all(|t| x.evaluate(t).unwrap() == y.evaluate(t).unwrap())
        };
        if !agree(&left, &sa) || !agree(&right, &sb) {
            failure = Some(format!("case {case}: step round trip mismatch"));
            break;
        }
    }
    LawReport {
        name: "trajectory-gluing-round-trip",
        cases: budget,
        failure,
    }
}

/// Gluing uniqueness by exhaustion: over every event stream on `[0, 6]` with
/// two possible values, the pair of restrictions at any seam determines the
/// global stream uniquely.
pub fn event_gluing_uniqueness() -> LawReport {
    // enumerate every stream: each tick 0..=6 carries nothing, value 0, or 1
    let len: Tick = 6;
    let mut all = Vec::new();
    let choices = 3u32.pow(len as u32 + 1);
    for code in 0..choices {
        let mut c = code;
        let mut events = Vec::new();
        for t in 0..=len {
            match c % 3 {
                0 => {}
                v => events.push((t, (v - 1) as u8)),
            }
            c /= 3;
        }
        all.push(EventStream::new(Duration(len), events).unwrap());
    }
    let mut cases = 0;
    let mut failure = None;
    'outer: for seam in 0..=len {
        let mut seen: HashMap<(Vec<(Tick, u8)>, Vec<(Tick, u8)>), Vec<usize>> = HashMap::new();
        for (i, s) in all.iter().enumerate() {
            let a = s.restrict(ClosedInterval::new(0, seam).unwrap()).unwrap();
            let b = s.restrict(ClosedInterval::new(seam, len).unwrap()).unwrap();
            // the two halves must glue back to the original
            if glue(&a, &b).unwrap() != *s {
                failure = Some(format!("seam {seam}: glue disagrees for {s:?}"));
                break 'outer;
            }
            seen.entry((a.events().to_vec(), b.events().to_vec()))
                .or_default()
                .push(i);
            cases += 1;
        }
        if let Some((key, hits)) = seen.iter().find(|(_, v)| v.len() > 1) {
            failure = Some(format!(
                "seam {seam}: {} global sections share restrictions {key:?}",
                hits.len()
            ));
            break;
        }
    }
    LawReport {
        name: "event-gluing-uniqueness",
        cases,
        failure,
    }
}

// ---------------------------------------------------------------------------
// monoidality

fn random_merged(rng: &mut ChaCha8Rng, length: Tick) -> EventStream<SumValue<u8, u8>> {
    let mut events = Vec::new();
    for t in 0..=length {
        if rng.gen_bool(0.4) {
            let v = match rng.gen_range(0..3) {
                0 => SumValue::Left(rng.gen_range(0..4)),
                1 => SumValue::Right(rng.gen_range(0..4)),
                _ => SumValue::Both(rng.gen_range(0..4), rng.gen_range(0..4)),
            };
            events.push((t, v));
        }
    }
    EventStream::new(Duration(length), events).unwrap()
}

/// Merge and split are mutually inverse on random stream pairs (both ways).
pub fn merge_split_inversion(budget: usize, seed: u64) -> LawReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failure = None;
    for case in 0..budget {
        let len = rng.gen_range(0..24);
        let a = random_event_stream(&mut rng, len, None);
        let b = random_event_stream(&mut rng, len, None);
        let m = merge(&a, &b).unwrap();
        let (a2, b2) = split(&m);
        if a2 != a || b2 != b {
            failure = Some(format!("case {case}: split∘merge\n  a={a:?}\n  b={b:?}"));
            break;
        }
        let m = random_merged(&mut rng, len);
        let (l, r) = split(&m);
        if merge(&l, &r).unwrap() != m {
            failure = Some(format!("case {case}: merge∘split on {m:?}"));
            break;
        }
    }
    LawReport {
        name: "merge-split-inversion",
        cases: budget,
        failure,
    }
}

/// Naturality of merge: mapping the components then merging equals merging
/// then mapping the summed value.
pub fn merge_naturality(budget: usize, seed: u64) -> LawReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = |v: u8| v.wrapping_mul(3).wrapping_add(1);
    let g = |v: u8| v ^ 0x5a;
    let mut failure = None;
    for case in 0..budget {
        let len = rng.gen_range(0..24);
        let a = random_event_stream(&mut rng, len, None);
        let b = random_event_stream(&mut rng, len, None);
        let mapped_then_merged =
            merge(&a.map_values(|v| f(*v)), &b.map_values(|v| g(*v))).unwrap();
        let merged_then_mapped = merge(&a, &b)
            .unwrap()
            .map_values(|v| (*v).map(f, g));
        if mapped_then_merged != merged_then_mapped {
            failure = Some(format!("case {case}: naturality square\n  a={a:?}\n  b={b:?}"));
            break;
        }
    }
    LawReport {
        name: "merge-naturality",
        cases: budget,
        failure,
    }
}

// ---------------------------------------------------------------------------
// table classification

/// The bundled good/partial/nondeterministic tables classify as expected.
pub fn classifier_fixtures() -> LawReport {
    let mut failure = None;
    let expect = [
        ("good", true, true),
        ("partial", false, true),
        ("nondet", true, false),
    ];
    for (name, total, deterministic) in expect {
        let (_, report) = classify_fixture(name).unwrap();
        if report.total != total || report.deterministic != deterministic {
            failure = Some(format!(
                "fixture {name}: got total:{} deterministic:{}, expected total:{total} deterministic:{deterministic}",
                report.total, report.deterministic
            ));
            break;
        }
    }
    LawReport {
        name: "classifier-fixtures",
        cases: 3,
        failure,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_laws_pass_at_small_budget() {
        for report in run_laws(500, 7) {
            assert!(report.passed(), "{}: {:?}", report.name, report.failure);
            assert!(report.cases > 0);
        }
    }

    #[test]
    fn fixture_lookup() {
        let (_, r) = classify_fixture("nondet").unwrap();
        assert!(!r.deterministic);
        assert!(classify_fixture("bogus").is_none());
    }
}
