//! Command-line front end: `run` a configured closed-loop scenario, run a
//! standalone `block` over a CSV stream, or execute the `laws` suites.
//!
//! Exit codes: 0 success, 1 law failure, 2 config/parse error, 3 runtime
//! error (with the error printed on standard error).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use evsheaf::blocks::{make_level_crossing, make_sampler, make_zoh, SamplerConfig};
use evsheaf::csv::{events_from_csv, linear_from_csv, section_to_csv};
use evsheaf::laws::{classify_fixture, run_laws};
use evsheaf::machine::run;
use evsheaf::optomotor::make_pixel;
use evsheaf::scenario::{run_scenario, ScenarioConfig, ScenarioError};
use evsheaf::{Duration, Machine, SectionVal, TickScale};

#[derive(Parser)]
#[command(name = "evsheaf", version, about = "Event-stream machine calculus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a closed-loop scenario and write wire CSVs plus summary.csv.
    Run {
        /// Scenario TOML; omitted runs the shipped default scenario.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (created if missing).
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the config's record list.
        #[arg(long, value_delimiter = ',')]
        record: Option<Vec<String>>,
    },
    /// Run one standalone block over an input CSV.
    Block {
        name: BlockName,
        /// Input stream CSV (trajectory or events, per block).
        #[arg(long)]
        input: PathBuf,
        /// Output stream CSV.
        #[arg(long)]
        output: PathBuf,
        /// Level-crossing threshold L.
        #[arg(long)]
        level: Option<f64>,
        /// Initial reference / held value (comma-separated per dimension).
        #[arg(long, value_delimiter = ',')]
        a0: Option<Vec<f64>>,
        /// Sampler period in ticks.
        #[arg(long)]
        period: Option<u64>,
        /// Sampler phase in ticks.
        #[arg(long, default_value_t = 0)]
        phase: u64,
        /// Pixel contrast threshold C.
        #[arg(long)]
        contrast: Option<f64>,
        /// Pixel reference intensity.
        #[arg(long)]
        i0: Option<f64>,
        /// Pixel intensity floor.
        #[arg(long, default_value_t = 1e-6)]
        i_min: f64,
    },
    /// Run the algebraic law suites.
    Laws {
        /// Randomized cases per suite.
        #[arg(long, default_value_t = 10_000)]
        budget: usize,
        /// RNG seed for the randomized suites.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also classify a bundled table fixture: good, partial, or nondet.
        #[arg(long)]
        fixture: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BlockName {
    Sampler,
    Levelcross,
    Zoh,
    Pixel,
}

/// A failure routed to a specific exit code.
struct Failure {
    code: u8,
    message: String,
}

fn config_failure(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn runtime_failure(message: impl Into<String>) -> Failure {
    Failure {
        code: 3,
        message: message.into(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            record,
        } => cmd_run(config.as_deref(), &out, record),
        Command::Block {
            name,
            input,
            output,
            level,
            a0,
            period,
            phase,
            contrast,
            i0,
            i_min,
        } => cmd_block(
            name,
            &input,
            &output,
            BlockParams {
                level,
                a0,
                period,
                phase,
                contrast,
                i0,
                i_min,
            },
        ),
        Command::Laws {
            budget,
            seed,
            fixture,
        } => cmd_laws(budget, seed, fixture.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("{}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn cmd_run(
    config_path: Option<&std::path::Path>,
    out: &std::path::Path,
    record: Option<Vec<String>>,
) -> Result<u8, Failure> {
    let mut config = match config_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| config_failure(format!("cannot read {}: {e}", path.display())))?;
            ScenarioConfig::from_toml(&text).map_err(|e| config_failure(e.to_string()))?
        }
        None => ScenarioConfig::shipped(),
    };
    if let Some(record) = record {
        config.record = record;
        config.validate().map_err(|e| config_failure(e.to_string()))?;
    }
    let summary = run_scenario(&config, out).map_err(|e| match e {
        ScenarioError::Config(message) => config_failure(message),
        other => runtime_failure(other.to_string()),
    })?;
    println!(
        "final_heading={} abs_error_initial={} abs_error_final={} events={} statistic_events={}",
        summary.final_heading,
        summary.abs_error_initial,
        summary.abs_error_final,
        summary.event_count_total,
        summary.statistic_event_count
    );
    Ok(0)
}

struct BlockParams {
    level: Option<f64>,
    a0: Option<Vec<f64>>,
    period: Option<u64>,
    phase: u64,
    contrast: Option<f64>,
    i0: Option<f64>,
    i_min: f64,
}

fn cmd_block(
    name: BlockName,
    input: &std::path::Path,
    output: &std::path::Path,
    params: BlockParams,
) -> Result<u8, Failure> {
    let text = std::fs::read_to_string(input)
        .map_err(|e| config_failure(format!("cannot read {}: {e}", input.display())))?;
    let require = |opt: Option<f64>, flag: &str| {
        opt.ok_or_else(|| config_failure(format!("{flag} is required for this block")))
    };
    let (machine, section, scale): (Machine, SectionVal, TickScale) = match name {
        BlockName::Sampler => {
            let (traj, scale) =
                linear_from_csv(&text).map_err(|e| config_failure(e.to_string()))?;
            let period = params
                .period
                .ok_or_else(|| config_failure("--period is required for the sampler"))?;
            if period < 1 || params.phase >= period {
                return Err(config_failure("need period >= 1 and phase < period"));
            }
            let machine = make_sampler(
                SamplerConfig {
                    period: Duration(period),
                    phase: params.phase,
                },
                traj.dim(),
            );
            (machine, SectionVal::Linear(traj), scale)
        }
        BlockName::Levelcross => {
            let (traj, scale) =
                linear_from_csv(&text).map_err(|e| config_failure(e.to_string()))?;
            let level = require(params.level, "--level")?;
            if level <= 0.0 {
                return Err(config_failure("--level must be positive"));
            }
            let a0 = params.a0.unwrap_or_else(|| vec![0.0; traj.dim()]);
            if a0.len() != traj.dim() {
                return Err(config_failure(format!(
                    "--a0 has {} components but the input has dimension {}",
                    a0.len(),
                    traj.dim()
                )));
            }
            (
                make_level_crossing(level, a0),
                SectionVal::Linear(traj),
                scale,
            )
        }
        BlockName::Zoh => {
            let (events, scale) =
                events_from_csv(&text).map_err(|e| config_failure(e.to_string()))?;
            let a0 = params
                .a0
                .ok_or_else(|| config_failure("--a0 is required for the hold"))?;
            (make_zoh(a0), SectionVal::Events(events), scale)
        }
        BlockName::Pixel => {
            let (traj, scale) =
                linear_from_csv(&text).map_err(|e| config_failure(e.to_string()))?;
            if traj.dim() != 1 {
                return Err(config_failure("the pixel block takes a one-dimensional input"));
            }
            let contrast = require(params.contrast, "--contrast")?;
            let i0 = require(params.i0, "--i0")?;
            if contrast <= 0.0 || i0 <= 0.0 || params.i_min <= 0.0 {
                return Err(config_failure("contrast, i0, and i-min must be positive"));
            }
            (
                make_pixel(contrast, i0, params.i_min),
                SectionVal::Linear(traj),
                scale,
            )
        }
    };
    let step = Duration(section.length().ticks().max(1));
    let trace = run(&machine, &section, step).map_err(|e| runtime_failure(e.to_string()))?;
    let csv = section_to_csv(&trace.output, scale).map_err(|e| runtime_failure(e.to_string()))?;
    std::fs::write(output, csv).map_err(|e| runtime_failure(e.to_string()))?;
    Ok(0)
}

fn cmd_laws(budget: usize, seed: u64, fixture: Option<&str>) -> Result<u8, Failure> {
    if budget == 0 {
        return Err(config_failure("--budget 0 leaves nothing to check"));
    }
    let mut all_pass = true;
    for report in run_laws(budget, seed) {
        if report.passed() {
            println!("law {}: pass ({} cases)", report.name, report.cases);
        } else {
            all_pass = false;
            println!("law {}: FAIL", report.name);
            if let Some(counterexample) = &report.failure {
                println!("  counterexample: {counterexample}");
            }
        }
    }
    if let Some(name) = fixture {
        let (_, report) = classify_fixture(name)
            .ok_or_else(|| config_failure(format!("unknown fixture `{name}`")))?;
        println!(
            "fixture {name}: total:{} deterministic:{}",
            report.total, report.deterministic
        );
        if let Some((word, symbol)) = &report.total_counterexample {
            println!("  blocked after input {word:?} on symbol {symbol}");
        }
        if let Some((word, symbol)) = &report.deterministic_counterexample {
            println!("  branches after input {word:?} on symbol {symbol}");
        }
    }
    Ok(if all_pass { 0 } else { 1 })
}
