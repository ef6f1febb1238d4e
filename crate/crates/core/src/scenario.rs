//! Scenario configuration and closed-loop runs: a versioned TOML config that
//! builds the optomotor loop, runs it over the configured horizon, and writes
//! one CSV per recorded wire plus `summary.csv` and the effective config.

use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::csv::{section_row_count, section_to_csv, CsvError};
use crate::machine::{run, MachineError, SectionVal};
use crate::optomotor::{
    build_closed_loop, estimator_from_scene, proportional_estimator, BodyParams, ClosedLoopParams,
    PixelGeometry, Scene, LOOP_WIRES,
};
use crate::timebase::{Duration, Tick, TickScale};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Machine(#[from] MachineError),
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn config_err(message: impl Into<String>) -> ScenarioError {
    ScenarioError::Config(message.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Config format version; this release understands version 1.
    pub version: u32,
    pub seconds_per_tick: f64,
    /// Run horizon in seconds.
    pub horizon_seconds: f64,
    /// Integrator step h, in ticks.
    pub integrator_step_ticks: Tick,
    /// Loop delay ε, in ticks; must be a multiple of the integrator step.
    pub delay_ticks: Tick,
    pub camera: CameraConfig,
    pub scene: SceneConfig,
    pub regulator: RegulatorConfig,
    pub body: BodyConfig,
    /// Wires to serialize, a subset of
    /// heading/intensity/camera/statistic/control.
    #[serde(default = "default_record")]
    pub record: Vec<String>,
    /// Reserved: every machine is deterministic, so the seed is carried but
    /// unused.
    #[serde(default)]
    pub seed: u64,
}

fn default_record() -> Vec<String> {
    LOOP_WIRES.iter().map(|w| w.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub pixels: usize,
    /// Field of view in radians, centered on the heading.
    pub field_of_view: f64,
    /// Contrast threshold C.
    pub contrast: f64,
    /// Reference intensity; omitted means each pixel adapts to its initial
    /// view.
    #[serde(default)]
    pub i0: Option<f64>,
    pub i_min: f64,
    /// Excitation control held during the loop's pre-history.
    #[serde(default)]
    pub kick: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SceneConfig {
    Uniform {
        level: f64,
    },
    Cosine {
        contrast: f64,
        breakpoints: usize,
    },
    TwoBar {
        background: f64,
        bar: f64,
        width: f64,
    },
    /// Explicit periodic piecewise-linear reflectance over `[-π, π]`.
    Explicit {
        angles: Vec<f64>,
        values: Vec<f64>,
    },
}

impl SceneConfig {
    fn build(&self) -> Result<Scene, ScenarioError> {
        match self {
            SceneConfig::Uniform { level } => {
                if !(*level >= 0.0 && level.is_finite()) {
                    return Err(config_err("scene level must be non-negative"));
                }
                Ok(Scene::uniform(*level))
            }
            SceneConfig::Cosine {
                contrast,
                breakpoints,
            } => {
                if !(*contrast > 0.0 && *contrast < 1.0) {
                    return Err(config_err("cosine contrast must be in (0, 1)"));
                }
                if *breakpoints < 8 {
                    return Err(config_err("cosine scene needs at least 8 breakpoints"));
                }
                Ok(Scene::cosine(*contrast, *breakpoints))
            }
            SceneConfig::TwoBar {
                background,
                bar,
                width,
            } => {
                if !(*background > 0.0 && bar > background) {
                    return Err(config_err("two-bar scene needs bar > background > 0"));
                }
                if !(*width > 0.0 && *width < std::f64::consts::FRAC_PI_2) {
                    return Err(config_err("two-bar width must be in (0, π/2)"));
                }
                Ok(Scene::two_bar(*background, *bar, *width))
            }
            SceneConfig::Explicit { angles, values } => {
                let pi = std::f64::consts::PI;
                let ok = angles.len() >= 2
                    && angles.len() == values.len()
                    && (angles[0] + pi).abs() < 1e-12
                    && (angles[angles.len() - 1] - pi).abs() < 1e-12
                    && angles.windows(2).all(|w| w[0] < w[1])
                    && values.iter().all(|v| *v >= 0.0 && v.is_finite())
                    && (values[0] - values[values.len() - 1]).abs() < 1e-12;
                if !ok {
                    return Err(config_err(
                        "explicit scene needs increasing angles spanning [-π, π] \
                         with non-negative values and equal endpoints",
                    ));
                }
                Ok(Scene::new(angles.clone(), values.clone()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegulatorConfig {
    /// Statistic decay rate, 1/s.
    pub a: f64,
    /// Gain κ.
    pub kappa: f64,
    pub estimator: EstimatorKind,
    /// Half-width of the heading prior used by the quadrature estimator.
    pub prior_width: f64,
    /// Keep the decay term inside the sum over the firing set.
    #[serde(default)]
    pub decay_in_sum: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    /// `f(s) = wrap(dir(s) − θ_g)`.
    Proportional,
    /// Posterior-mean heading estimate per firing pixel, integrated against
    /// the scene gradient over the prior window.
    Quadrature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyConfig {
    /// Actuator saturation bound, rad/s.
    pub b: f64,
    pub theta0: f64,
    pub theta_goal: f64,
}

impl ScenarioConfig {
    /// The shipped default scenario: a 64-pixel camera watching a cosine
    /// scene, quadrature estimator, tuned so the heading error at least
    /// halves over the 8-second horizon.
    pub fn shipped() -> Self {
        ScenarioConfig {
            version: 1,
            seconds_per_tick: 0.001,
            horizon_seconds: 8.0,
            integrator_step_ticks: 1,
            delay_ticks: 10,
            camera: CameraConfig {
                pixels: 64,
                field_of_view: 2.0 * std::f64::consts::PI,
                contrast: 0.1,
                i0: None,
                i_min: 1e-6,
                kick: 0.5,
            },
            scene: SceneConfig::Cosine {
                contrast: 0.8,
                breakpoints: 256,
            },
            regulator: RegulatorConfig {
                a: 5.0,
                kappa: 2.0,
                estimator: EstimatorKind::Quadrature,
                prior_width: 0.6,
                decay_in_sum: false,
            },
            body: BodyConfig {
                b: 2.0,
                theta0: 0.4,
                theta_goal: 0.0,
            },
            record: default_record(),
            seed: 0,
        }
    }

    /// The shipped scenario over a featureless scene: no events, no kick, the
    /// heading stays put.
    pub fn shipped_uniform() -> Self {
        let mut config = Self::shipped();
        config.scene = SceneConfig::Uniform { level: 1.0 };
        config.camera.kick = 0.0;
        config
    }

    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let config: ScenarioConfig =
            toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn horizon_ticks(&self) -> Tick {
        TickScale::new(self.seconds_per_tick).ticks_from_seconds(self.horizon_seconds)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.version != 1 {
            return Err(config_err(format!(
                "unsupported config version {} (expected 1)",
                self.version
            )));
        }
        if !(self.seconds_per_tick > 0.0 && self.seconds_per_tick.is_finite()) {
            return Err(config_err("seconds_per_tick must be positive"));
        }
        let horizon = self.horizon_ticks();
        if horizon < 1 {
            return Err(config_err("horizon must be at least one tick"));
        }
        let h = self.integrator_step_ticks;
        if h < 1 {
            return Err(config_err("integrator step must be at least one tick"));
        }
        if self.delay_ticks < 1 || self.delay_ticks % h != 0 {
            return Err(config_err(
                "delay must be a positive multiple of the integrator step",
            ));
        }
        if horizon % h != 0 {
            return Err(config_err("horizon must be a multiple of the integrator step"));
        }
        if self.camera.pixels < 1 {
            return Err(config_err("camera needs at least one pixel"));
        }
        if !(self.camera.field_of_view > 0.0
            && self.camera.field_of_view <= 2.0 * std::f64::consts::PI)
        {
            return Err(config_err("field of view must be in (0, 2π]"));
        }
        if !(self.camera.contrast > 0.0) {
            return Err(config_err("contrast threshold must be positive"));
        }
        if let Some(i0) = self.camera.i0 {
            if !(i0 > 0.0) {
                return Err(config_err("reference intensity must be positive"));
            }
        }
        if !(self.camera.i_min > 0.0) {
            return Err(config_err("intensity floor must be positive"));
        }
        if !self.camera.kick.is_finite() {
            return Err(config_err("kick must be finite"));
        }
        self.scene.build()?;
        if !(self.regulator.a > 0.0) {
            return Err(config_err("regulator decay rate must be positive"));
        }
        if !(self.regulator.kappa >= 0.0) {
            return Err(config_err("regulator gain must be non-negative"));
        }
        if !(self.regulator.prior_width > 0.0) {
            return Err(config_err("estimator prior width must be positive"));
        }
        if !(self.body.b > 0.0) {
            return Err(config_err("saturation bound must be positive"));
        }
        for wire in &self.record {
            if !LOOP_WIRES.contains(&wire.as_str()) {
                return Err(config_err(format!(
                    "unknown wire `{wire}` (expected one of {})",
                    LOOP_WIRES.join("/")
                )));
            }
        }
        Ok(())
    }

    /// Build the loop parameters this config describes.
    pub fn loop_params(&self) -> Result<ClosedLoopParams, ScenarioError> {
        self.validate()?;
        let geometry = PixelGeometry::uniform(self.camera.pixels, self.camera.field_of_view);
        let scene = self.scene.build()?;
        let estimator = match self.regulator.estimator {
            EstimatorKind::Proportional => {
                proportional_estimator(&geometry, self.body.theta_goal)
            }
            EstimatorKind::Quadrature => {
                match estimator_from_scene(
                    &geometry,
                    &scene,
                    self.regulator.prior_width,
                    self.body.theta_goal,
                ) {
                    Ok(f) => f,
                    // a gradient-free scene generates no events anyway; keep
                    // the regulator inert instead of refusing to run
                    Err(MachineError::DegenerateScene) => vec![0.0; geometry.len()],
                    Err(e) => return Err(e.into()),
                }
            }
        };
        Ok(ClosedLoopParams {
            geometry,
            scene,
            contrast: self.camera.contrast,
            i0: self.camera.i0,
            kick: self.camera.kick,
            i_min: self.camera.i_min,
            regulator_a: self.regulator.a,
            regulator_kappa: self.regulator.kappa,
            estimator,
            decay_in_sum: self.regulator.decay_in_sum,
            body: BodyParams {
                b: self.body.b,
                theta0: self.body.theta0,
                theta_goal: self.body.theta_goal,
            },
            epsilon: Duration(self.delay_ticks),
            h: Duration(self.integrator_step_ticks),
            seconds_per_tick: self.seconds_per_tick,
        })
    }
}

/// Result of one closed-loop run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub final_heading: f64,
    pub goal: f64,
    pub abs_error_initial: f64,
    pub abs_error_final: f64,
    /// Camera events over the whole run.
    pub event_count_total: usize,
    /// Regulator statistic events over the whole run.
    pub statistic_event_count: usize,
    /// Data rows per recorded wire, in record order.
    pub wire_rows: Vec<(String, usize)>,
}

impl RunSummary {
    pub fn to_csv(&self) -> String {
        format!(
            "final_heading,goal,abs_error_initial,abs_error_final,\
             event_count_total,statistic_event_count\n{},{},{},{},{},{}\n",
            self.final_heading,
            self.goal,
            self.abs_error_initial,
            self.abs_error_final,
            self.event_count_total,
            self.statistic_event_count
        )
    }
}

/// Run the configured loop without touching the filesystem, returning the
/// summary plus every wire section.
pub fn simulate(
    config: &ScenarioConfig,
) -> Result<(RunSummary, Vec<(String, SectionVal<f64>)>), ScenarioError> {
    let params = config.loop_params()?;
    let machine = build_closed_loop::<f64>(&params)?;
    let horizon = config.horizon_ticks();
    let step = Duration(horizon.min(1000 * config.integrator_step_ticks));
    let trace = run(&machine, &SectionVal::Unit(Duration(horizon)), step)?;

    let wire = |name: &str| -> Result<&SectionVal<f64>, ScenarioError> {
        trace
            .wires
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s)
            .ok_or_else(|| config_err(format!("run recorded no `{name}` wire")))
    };
    let heading = wire("heading")?.expect_linear().map_err(MachineError::from)?;
    let final_heading = heading.evaluate(horizon).map_err(MachineError::from)?[0];
    let event_count_total = section_row_count(wire("camera")?);
    let statistic_event_count = section_row_count(wire("statistic")?);

    let mut wire_rows = Vec::new();
    for name in &config.record {
        wire_rows.push((name.clone(), section_row_count(wire(name)?)));
    }
    let summary = RunSummary {
        final_heading,
        goal: config.body.theta_goal,
        abs_error_initial: (config.body.theta0 - config.body.theta_goal).abs(),
        abs_error_final: (final_heading - config.body.theta_goal).abs(),
        event_count_total,
        statistic_event_count,
        wire_rows,
    };
    Ok((summary, trace.wires))
}

/// Run the scenario and write `<wire>.csv` per recorded wire, `summary.csv`,
/// and `effective_config.toml` into `out_dir`.
pub fn run_scenario(config: &ScenarioConfig, out_dir: &Path) -> Result<RunSummary, ScenarioError> {
    let (summary, wires) = simulate(config)?;
    std::fs::create_dir_all(out_dir)?;
    let scale = TickScale::new(config.seconds_per_tick);
    for name in &config.record {
        let section = wires
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s)
            .expect("simulate checked every recorded wire");
        let mut file = std::fs::File::create(out_dir.join(format!("{name}.csv")))?;
        file.write_all(section_to_csv(section, scale)?.as_bytes())?;
    }
    std::fs::write(out_dir.join("summary.csv"), summary.to_csv())?;
    std::fs::write(out_dir.join("effective_config.toml"), config.to_toml())?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_config_round_trips_through_toml() {
        let config = ScenarioConfig::shipped();
        let text = config.to_toml();
        let parsed = ScenarioConfig::from_toml(&text).unwrap();
        assert_eq!(parsed, config);
    }

    #[test]
    fn validation_rejects_bad_fields() {
        let mut c = ScenarioConfig::shipped();
        c.version = 2;
        assert!(matches!(c.validate(), Err(ScenarioError::Config(_))));

        let mut c = ScenarioConfig::shipped();
        c.delay_ticks = 15;
        c.integrator_step_ticks = 10;
        assert!(c.validate().is_err());

        let mut c = ScenarioConfig::shipped();
        c.record = vec!["bogus".to_string()];
        assert!(c.validate().is_err());

        let mut c = ScenarioConfig::shipped();
        c.scene = SceneConfig::Cosine {
            contrast: 2.0,
            breakpoints: 256,
        };
        assert!(c.validate().is_err());

        assert!(ScenarioConfig::from_toml("not toml [").is_err());
    }

    #[test]
    fn uniform_scenario_is_quiet() {
        let mut config = ScenarioConfig::shipped_uniform();
        config.horizon_seconds = 1.0;
        let (summary, _) = simulate(&config).unwrap();
        assert_eq!(summary.event_count_total, 0);
        assert_eq!(summary.statistic_event_count, 0);
        assert_eq!(summary.final_heading, config.body.theta0);
        assert_eq!(summary.abs_error_final, summary.abs_error_initial);
    }

    #[test]
    fn run_scenario_writes_matching_counts() {
        let mut config = ScenarioConfig::shipped();
        config.horizon_seconds = 1.0;
        config.record = vec!["camera".to_string(), "statistic".to_string()];
        let dir = tempfile::tempdir().unwrap();
        let summary = run_scenario(&config, dir.path()).unwrap();
        for (name, rows) in &summary.wire_rows {
            let text = std::fs::read_to_string(dir.path().join(format!("{name}.csv"))).unwrap();
            // three header lines, then one line per data row
            assert_eq!(text.lines().count() - 3, *rows, "{name}");
        }
        assert!(summary.event_count_total > 0);
        let effective =
            std::fs::read_to_string(dir.path().join("effective_config.toml")).unwrap();
        assert_eq!(ScenarioConfig::from_toml(&effective).unwrap(), config);
        let summary_csv = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert!(summary_csv.starts_with("final_heading,goal,"));
    }
}
