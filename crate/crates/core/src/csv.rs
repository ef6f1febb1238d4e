//! CSV serialization of wire sections.
//!
//! Every file starts with a two-line metadata header carrying the section
//! length in ticks and the `seconds_per_tick` scale, followed by the column
//! header and one row per event (or trajectory point). The dialect is plain
//! comma-separated text with `\n` line endings; floats print in shortest
//! round-trip decimal notation, so output is byte-deterministic.
//!
//! ```text
//! length,seconds_per_tick
//! 100,0.01
//! t_tick,t_seconds,value_repr
//! 25,0.25,0.25
//! ```
//!
//! Event payloads use a comma-free grammar: plain numbers for `Real`,
//! `;`-joined numbers for `Vector`, `+`/`-` for `Polarity`, `pixel:+`-style
//! `;`-joined pairs for `Firing`, and `s<k>` for `Symbol`.

use std::fmt::Write as _;

use thiserror::Error;

use crate::event::{EventStream, StreamError};
use crate::machine::{SectionVal, Value};
use crate::scalar::Real;
use crate::sheaf::Section;
use crate::timebase::{Duration, Tick, TickScale};
use crate::trajectory::{LinearTrajectory, StepTrajectory, TrajectoryError};

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("section kind has no CSV form: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

fn header(length: Duration, scale: TickScale, columns: &str) -> String {
    format!(
        "length,seconds_per_tick\n{},{}\n{columns}\n",
        length.ticks(),
        scale.seconds_per_tick
    )
}

fn format_value<S: Real>(v: &Value<S>) -> Result<String, CsvError> {
    Ok(match v {
        Value::Real(r) => format!("{r}"),
        Value::Vector(xs) => xs
            .iter()
            .map(|x| format!("{x}"))
            .collect::<Vec<_>>()
            .join(";"),
        Value::Polarity(q) => (if *q >= 0 { "+" } else { "-" }).to_string(),
        Value::Firing(set) => set
            .iter()
            .map(|(s, q)| format!("{s}:{}", if *q >= 0 { "+" } else { "-" }))
            .collect::<Vec<_>>()
            .join(";"),
        Value::Symbol(k) => format!("s{k}"),
        Value::Sum(_) => {
            return Err(CsvError::Unsupported(
                "merged tensor wires have no CSV form".to_string(),
            ))
        }
    })
}

fn parse_value(repr: &str, line: usize) -> Result<Value<f64>, CsvError> {
    let bad = |message: String| CsvError::Parse { line, message };
    if repr == "+" {
        return Ok(Value::Polarity(1));
    }
    if repr == "-" {
        return Ok(Value::Polarity(-1));
    }
    if let Some(k) = repr.strip_prefix('s') {
        let k = k
            .parse()
            .map_err(|_| bad(format!("bad symbol `{repr}`")))?;
        return Ok(Value::Symbol(k));
    }
    if repr.contains(':') {
        let set = repr
            .split(';')
            .map(|pair| {
                let (s, q) = pair
                    .split_once(':')
                    .ok_or_else(|| bad(format!("bad firing entry `{pair}`")))?;
                let s = s
                    .parse()
                    .map_err(|_| bad(format!("bad pixel index `{s}`")))?;
                let q = match q {
                    "+" => 1,
                    "-" => -1,
                    other => return Err(bad(format!("bad polarity `{other}`"))),
                };
                Ok((s, q))
            })
            .collect::<Result<Vec<_>, CsvError>>()?;
        return Ok(Value::Firing(set));
    }
    if repr.contains(';') {
        let xs = repr
            .split(';')
            .map(|x| x.parse().map_err(|_| bad(format!("bad number `{x}`"))))
            .collect::<Result<Vec<f64>, CsvError>>()?;
        return Ok(Value::Vector(xs));
    }
    repr.parse()
        .map(Value::Real)
        .map_err(|_| bad(format!("bad value `{repr}`")))
}

/// Rows `t_tick,t_seconds,value_repr`, one per event.
pub fn events_to_csv<S: Real>(
    stream: &EventStream<Value<S>>,
    scale: TickScale,
) -> Result<String, CsvError> {
    let mut out = header(stream.length(), scale, "t_tick,t_seconds,value_repr");
    for (t, v) in stream.events() {
        writeln!(out, "{t},{},{}", scale.to_seconds(*t), format_value(v)?).expect("string write");
    }
    Ok(out)
}

fn trajectory_columns(dim: usize) -> String {
    let mut columns = "t_tick,t_seconds".to_string();
    for i in 0..dim {
        write!(columns, ",v_{i}").expect("string write");
    }
    columns
}

/// Rows `t_tick,t_seconds,v_0,...,v_{n-1}`, one per breakpoint.
pub fn linear_to_csv<S: Real>(traj: &LinearTrajectory<S>, scale: TickScale) -> String {
    let mut out = header(traj.length(), scale, &trajectory_columns(traj.dim()));
    for (t, value) in traj.breakpoints().iter().zip(traj.values()) {
        write!(out, "{t},{}", scale.to_seconds(*t)).expect("string write");
        for x in value {
            write!(out, ",{x}").expect("string write");
        }
        out.push('\n');
    }
    out
}

/// Rows `t_tick,t_seconds,v_0,...,v_{n-1}`: the initial value at tick 0, then
/// one row per step point.
pub fn step_to_csv<S: Real>(traj: &StepTrajectory<S>, scale: TickScale) -> String {
    let mut out = header(traj.length(), scale, &trajectory_columns(traj.dim()));
    let initial: Vec<S> = traj.initial().to_vec();
    let rows = std::iter::once((0, initial)).chain(traj.steps().iter().cloned());
    for (t, value) in rows {
        write!(out, "{t},{}", scale.to_seconds(t)).expect("string write");
        for x in &value {
            write!(out, ",{x}").expect("string write");
        }
        out.push('\n');
    }
    out
}

/// Serialize any recordable wire section.
pub fn section_to_csv<S: Real>(
    section: &SectionVal<S>,
    scale: TickScale,
) -> Result<String, CsvError> {
    match section {
        SectionVal::Events(e) => events_to_csv(e, scale),
        SectionVal::Linear(t) => Ok(linear_to_csv(t, scale)),
        SectionVal::Step(t) => Ok(step_to_csv(t, scale)),
        other => Err(CsvError::Unsupported(format!("{:?}", other.kind()))),
    }
}

/// Number of data rows the section serializes to.
pub fn section_row_count<S: Real>(section: &SectionVal<S>) -> usize {
    match section {
        SectionVal::Events(e) => e.len(),
        SectionVal::Linear(t) => t.breakpoints().len(),
        SectionVal::Step(t) => 1 + t.steps().len(),
        _ => 0,
    }
}

struct Rows<'a> {
    length: Duration,
    scale: TickScale,
    /// (line number, tick, remaining cells) per data row.
    data: Vec<(usize, Tick, Vec<&'a str>)>,
}

fn parse_rows<'a>(text: &'a str, columns_prefix: &str) -> Result<Rows<'a>, CsvError> {
    let bad = |line: usize, message: String| CsvError::Parse { line, message };
    let mut lines = text.lines().enumerate();
    let (_, meta_header) = lines
        .next()
        .ok_or_else(|| bad(1, "empty file".to_string()))?;
    if meta_header != "length,seconds_per_tick" {
        return Err(bad(1, format!("expected metadata header, got `{meta_header}`")));
    }
    let (_, meta) = lines
        .next()
        .ok_or_else(|| bad(2, "missing metadata row".to_string()))?;
    let (len, spt) = meta
        .split_once(',')
        .ok_or_else(|| bad(2, "metadata row needs two cells".to_string()))?;
    let length = Duration(
        len.parse()
            .map_err(|_| bad(2, format!("bad length `{len}`")))?,
    );
    let spt: f64 = spt
        .parse()
        .map_err(|_| bad(2, format!("bad seconds_per_tick `{spt}`")))?;
    if !(spt.is_finite() && spt > 0.0) {
        return Err(bad(2, format!("seconds_per_tick must be positive, got {spt}")));
    }
    let (_, columns) = lines
        .next()
        .ok_or_else(|| bad(3, "missing column header".to_string()))?;
    if !columns.starts_with(columns_prefix) {
        return Err(bad(3, format!("expected `{columns_prefix}...`, got `{columns}`")));
    }
    let mut data = Vec::new();
    for (i, row) in lines {
        if row.is_empty() {
            continue;
        }
        let mut cells = row.split(',');
        let t = cells
            .next()
            .filter(|c| !c.is_empty())
            .ok_or_else(|| bad(i + 1, "missing t_tick".to_string()))?;
        let t: Tick = t
            .parse()
            .map_err(|_| bad(i + 1, format!("bad t_tick `{t}`")))?;
        // t_seconds is redundant; it is checked for presence, not value
        cells
            .next()
            .ok_or_else(|| bad(i + 1, "missing t_seconds".to_string()))?;
        data.push((i + 1, t, cells.collect()));
    }
    Ok(Rows {
        length,
        scale: TickScale::new(spt),
        data,
    })
}

/// Parse an event CSV back into a stream.
pub fn events_from_csv(text: &str) -> Result<(EventStream<Value<f64>>, TickScale), CsvError> {
    let rows = parse_rows(text, "t_tick,t_seconds,value_repr")?;
    let events = rows
        .data
        .iter()
        .map(|(line, t, cells)| {
            let repr = cells.first().ok_or_else(|| CsvError::Parse {
                line: *line,
                message: "missing value_repr".to_string(),
            })?;
            Ok((*t, parse_value(repr, *line)?))
        })
        .collect::<Result<Vec<_>, CsvError>>()?;
    Ok((EventStream::new(rows.length, events)?, rows.scale))
}

fn parse_cells(line: usize, cells: &[&str]) -> Result<Vec<f64>, CsvError> {
    if cells.is_empty() {
        return Err(CsvError::Parse {
            line,
            message: "missing value columns".to_string(),
        });
    }
    cells
        .iter()
        .map(|c| {
            c.parse().map_err(|_| CsvError::Parse {
                line,
                message: format!("bad number `{c}`"),
            })
        })
        .collect()
}

/// Parse a trajectory CSV as piecewise-linear breakpoints.
pub fn linear_from_csv(text: &str) -> Result<(LinearTrajectory<f64>, TickScale), CsvError> {
    let rows = parse_rows(text, "t_tick,t_seconds,v_0")?;
    let mut breakpoints = Vec::with_capacity(rows.data.len());
    let mut values = Vec::with_capacity(rows.data.len());
    for (line, t, cells) in &rows.data {
        breakpoints.push(*t);
        values.push(parse_cells(*line, cells)?);
    }
    Ok((
        LinearTrajectory::new(rows.length, breakpoints, values)?,
        rows.scale,
    ))
}

/// Parse a trajectory CSV as a step trajectory: the first row is the initial
/// value, later rows are step points.
pub fn step_from_csv(text: &str) -> Result<(StepTrajectory<f64>, TickScale), CsvError> {
    let rows = parse_rows(text, "t_tick,t_seconds,v_0")?;
    let mut data = rows.data.iter();
    let (line, t, cells) = data.next().ok_or_else(|| CsvError::Parse {
        line: 4,
        message: "a step trajectory needs at least the initial row".to_string(),
    })?;
    if *t != 0 {
        return Err(CsvError::Parse {
            line: *line,
            message: format!("initial row must be at tick 0, got {t}"),
        });
    }
    let initial = parse_cells(*line, cells)?;
    let steps = data
        .map(|(line, t, cells)| Ok((*t, parse_cells(*line, cells)?)))
        .collect::<Result<Vec<_>, CsvError>>()?;
    Ok((StepTrajectory::new(rows.length, initial, steps)?, rows.scale))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scale() -> TickScale {
        TickScale::new(0.01)
    }

    #[test]
    fn events_round_trip() {
        let stream = EventStream::new(
            Duration(100),
            vec![
                (25, Value::Real(0.25)),
                (50, Value::Polarity(-1)),
                (75, Value::Firing(vec![(0, 1), (3, -1)])),
                (90, Value::Symbol(2)),
                (100, Value::Vector(vec![1.5, -2.0])),
            ],
        )
        .unwrap();
        let text = events_to_csv(&stream, scale()).unwrap();
        assert!(text.starts_with(
            "length,seconds_per_tick\n100,0.01\nt_tick,t_seconds,value_repr\n25,0.25,0.25\n"
        ));
        assert!(text.contains("\n75,0.75,0:+;3:-\n"));
        let (parsed, s) = events_from_csv(&text).unwrap();
        assert_eq!(parsed, stream);
        assert_eq!(s, scale());
    }

    #[test]
    fn linear_round_trip() {
        let traj = LinearTrajectory::new(
            Duration(10),
            vec![0, 4, 10],
            vec![vec![0.0, 1.0], vec![2.0, -1.5], vec![0.25, 0.0]],
        )
        .unwrap();
        let text = linear_to_csv(&traj, scale());
        assert!(text.contains("t_tick,t_seconds,v_0,v_1\n0,0,0,1\n"));
        let (parsed, _) = linear_from_csv(&text).unwrap();
        assert_eq!(parsed, traj);
    }

    #[test]
    fn step_round_trip() {
        let traj = StepTrajectory::new(Duration(10), vec![1.0], vec![(3, vec![2.0])]).unwrap();
        let text = step_to_csv(&traj, scale());
        let (parsed, _) = step_from_csv(&text).unwrap();
        assert_eq!(parsed, traj);
        assert_eq!(
            section_row_count(&SectionVal::Step(traj)),
            text.lines().count() - 3
        );
    }

    #[test]
    fn output_is_byte_deterministic() {
        let traj = LinearTrajectory::new(
            Duration(3),
            vec![0, 3],
            vec![vec![0.1 + 0.2], vec![1.0 / 3.0]],
        )
        .unwrap();
        assert_eq!(linear_to_csv(&traj, scale()), linear_to_csv(&traj, scale()));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "length,seconds_per_tick\n10,0.01\nt_tick,t_seconds,value_repr\n5,0.05,oops\n";
        match events_from_csv(text) {
            Err(CsvError::Parse { line: 4, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(events_from_csv("bogus\n").is_err());
        assert!(linear_from_csv("length,seconds_per_tick\n10,-1\nt_tick,t_seconds,v_0\n").is_err());
    }
}
