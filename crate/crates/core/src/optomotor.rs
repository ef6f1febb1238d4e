//! Closed-loop optomotor heading regulation: a ring of event-camera pixels
//! watches a periodic 1-D scene, a decay-and-sum regulator turns firing sets
//! into a control statistic, and saturated body dynamics steer the heading —
//! all wired as one traced machine.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::blocks::{make_cds, make_level_crossing, make_zoh, CdsSpec};
use crate::event::EventStream;
use crate::machine::{
    delay_machine, emit_lo, series, series_labeled, trace_loop, Kind, Machine, MachineCore,
    MachineError, SectionVal, Value,
};
use crate::scalar::Real;
use crate::sheaf::Section;
use crate::timebase::{Duration, Tick};

/// Wrap an angle to `[-π, π)`.
pub fn wrap_angle(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y >= PI {
        y - 2.0 * PI
    } else {
        y
    }
}

// ---------------------------------------------------------------------------
// geometry and scene

/// Ring of pixel directions (radians, strictly increasing, in `[-π, π)`).
#[derive(Debug, Clone)]
pub struct PixelGeometry {
    dirs: Vec<f64>,
}

impl PixelGeometry {
    pub fn new(dirs: Vec<f64>) -> Self {
        assert!(!dirs.is_empty());
        assert!(dirs.windows(2).all(|w| w[0] < w[1]));
        assert!(dirs.iter().all(|d| (-PI..PI).contains(d)));
        PixelGeometry { dirs }
    }

    /// `count` directions uniformly spaced over a field of view centered on 0.
    pub fn uniform(count: usize, field_of_view: f64) -> Self {
        assert!(count >= 1 && field_of_view > 0.0 && field_of_view <= 2.0 * PI);
        let dirs = (0..count)
            .map(|i| {
                // cell centers, so a full circle has no duplicate at ±π
                let frac = (i as f64 + 0.5) / count as f64 - 0.5;
                frac * field_of_view
            })
            .collect();
        PixelGeometry::new(dirs)
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn dir(&self, pixel: usize) -> f64 {
        self.dirs[pixel]
    }
}

/// Periodic piecewise-linear reflectance on the circle: breakpoint angles
/// spanning `[-π, π]` with equal first and last values.
#[derive(Debug, Clone)]
pub struct Scene {
    angles: Vec<f64>,
    values: Vec<f64>,
}

impl Scene {
    pub fn new(angles: Vec<f64>, values: Vec<f64>) -> Self {
        assert!(angles.len() >= 2 && angles.len() == values.len());
        assert!((angles[0] + PI).abs() < 1e-12);
        assert!((angles[angles.len() - 1] - PI).abs() < 1e-12);
        assert!(angles.windows(2).all(|w| w[0] < w[1]));
        assert!(values.iter().all(|v| *v >= 0.0 && v.is_finite()));
        assert!(
            (values[0] - values[values.len() - 1]).abs() < 1e-12,
            "periodic closure"
        );
        Scene { angles, values }
    }

    pub fn uniform(level: f64) -> Self {
        Scene::new(vec![-PI, PI], vec![level, level])
    }

    /// `1 + contrast·cos φ`, sampled piecewise-linearly.
    pub fn cosine(contrast: f64, breakpoints: usize) -> Self {
        assert!(contrast > 0.0 && contrast < 1.0 && breakpoints >= 8);
        let angles: Vec<f64> = (0..=breakpoints)
            .map(|i| -PI + 2.0 * PI * i as f64 / breakpoints as f64)
            .collect();
        let values = angles.iter().map(|a| 1.0 + contrast * a.cos()).collect();
        Scene::new(angles, values)
    }

    /// Dim background with two bright bars of the given width, opposite each
    /// other at `±π/2`.
    pub fn two_bar(background: f64, bar: f64, width: f64) -> Self {
        assert!(bar > background && background > 0.0 && width > 0.0 && width < PI / 2.0);
        let mut angles = vec![-PI];
        let mut values = vec![background];
        for center in [-PI / 2.0, PI / 2.0] {
            for (a, v) in [
                (center - width, background),
                (center - width / 2.0, bar),
                (center + width / 2.0, bar),
                (center + width, background),
            ] {
                angles.push(a);
                values.push(v);
            }
        }
        angles.push(PI);
        values.push(background);
        Scene::new(angles, values)
    }

    fn segment(&self, phi: f64) -> usize {
        let phi = wrap_angle(phi);
        match self.angles.binary_search_by(|a| a.partial_cmp(&phi).unwrap()) {
            Ok(i) => i.min(self.angles.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.angles.len() - 2),
        }
    }

    /// Reflectance at an (unwrapped) angle.
    pub fn eval(&self, phi: f64) -> f64 {
        let i = self.segment(phi);
        let phi = wrap_angle(phi);
        let (a0, a1) = (self.angles[i], self.angles[i + 1]);
        let frac = (phi - a0) / (a1 - a0);
        self.values[i] + frac * (self.values[i + 1] - self.values[i])
    }

    /// Magnitude of the reflectance slope at an angle (right-continuous at
    /// breakpoints).
    pub fn gradient_mag(&self, phi: f64) -> f64 {
        let i = self.segment(phi);
        ((self.values[i + 1] - self.values[i]) / (self.angles[i + 1] - self.angles[i])).abs()
    }
}

// ---------------------------------------------------------------------------
// stateless trajectory-map machine (log front end, scene observer)

#[derive(Clone)]
struct LinearMapCore<S: Real> {
    f: Arc<dyn Fn(&[S]) -> Vec<S> + Send + Sync>,
    resample: Tick,
}

impl<S: Real> MachineCore<S> for LinearMapCore<S> {
    fn advance(&mut self, input: &SectionVal<S>) -> Result<SectionVal<S>, MachineError> {
        let traj = input.expect_linear()?;
        Ok(SectionVal::Linear(
            traj.map_pointwise(|x| (self.f)(x), Duration(self.resample))
                .map_err(MachineError::Trajectory)?,
        ))
    }

    fn clone_box(&self) -> Box<dyn MachineCore<S>> {
        Box::new(self.clone())
    }
}

fn make_linear_map<S: Real>(
    in_dim: usize,
    out_dim: usize,
    f: Arc<dyn Fn(&[S]) -> Vec<S> + Send + Sync>,
) -> Machine<S> {
    Machine::new(
        Kind::Linear(in_dim),
        Kind::Linear(out_dim),
        Duration::ZERO,
        Box::new(LinearMapCore { f, resample: 1 }),
    )
}

// ---------------------------------------------------------------------------
// pixel

/// Threshold stage of a pixel: turns the level-crossing reference stream into
/// polarity events, checking each reference jump against the contrast
/// threshold.
#[derive(Clone)]
struct PolarityCore<S: Real> {
    threshold: S,
    reference: S,
    t0: Tick,
}

impl<S: Real> MachineCore<S> for PolarityCore<S> {
    fn advance(&mut self, input: &SectionVal<S>) -> Result<SectionVal<S>, MachineError> {
        let events = input.expect_events()?;
        let len = events.length();
        let lo = emit_lo(self.t0);
        let c = self.threshold.to_f64().unwrap();
        // the upstream level crossing keeps jumps at exactly ±C in exact
        // arithmetic; allow 4 ulp of rounding slack
        let tol = c - 4.0 * c * f64::EPSILON;
        let mut out = Vec::new();
        for (t, v) in events.events() {
            if *t < lo {
                continue;
            }
            let r = v
                .as_real()
                .ok_or_else(|| MachineError::BadWireValue(format!("{v:?}")))?;
            let delta = (r - self.reference).to_f64().unwrap();
            let polarity = if delta >= tol {
                1
            } else if delta <= -tol {
                -1
            } else {
                return Err(MachineError::BadWireValue(format!(
                    "reference jump {delta} below the contrast threshold {c}"
                )));
            };
            out.push((*t, Value::Polarity(polarity)));
            self.reference = r;
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

/// One event-camera pixel: log intensity (floored at `i_min`), contrast-`C`
/// level crossing referenced at `log i0`, then polarity extraction.
pub fn make_pixel<S: Real>(contrast: S, i0: S, i_min: S) -> Machine<S> {
    assert!(contrast > S::zero() && i0 > S::zero() && i_min > S::zero());
    let floor = i_min;
    let log_front = make_linear_map(
        1,
        1,
        Arc::new(move |x: &[S]| vec![x[0].max(floor).ln()]),
    );
    let crossing = make_level_crossing(contrast, vec![i0.ln()]);
    let polarity = Machine::new(
        Kind::Events,
        Kind::Events,
        Duration::ZERO,
        Box::new(PolarityCore {
            threshold: contrast,
            reference: i0.ln(),
            t0: 0,
        }),
    );
    series(series(log_front, crossing).expect("kinds"), polarity).expect("kinds")
}

// ---------------------------------------------------------------------------
// camera

#[derive(Clone)]
struct CameraCore<S: Real> {
    pixels: Vec<Box<dyn MachineCore<S>>>,
}

impl<S: Real> MachineCore<S> for CameraCore<S> {
    fn advance(&mut self, input: &SectionVal<S>) -> Result<SectionVal<S>, MachineError> {
        let traj = input.expect_linear()?;
        let len = traj.length();
        let mut firing: std::collections::BTreeMap<Tick, Vec<(usize, i8)>> =
            std::collections::BTreeMap::new();
        for (i, core) in self.pixels.iter_mut().enumerate() {
            let component = SectionVal::Linear(
                traj.components(i..i + 1).map_err(MachineError::Trajectory)?,
            );
            let out = core.advance(&component)?;
            for (t, v) in out.expect_events()?.events() {
                let q = match v {
                    Value::Polarity(q) => *q,
                    other => return Err(MachineError::BadWireValue(format!("{other:?}"))),
                };
                firing.entry(*t).or_default().push((i, q));
            }
        }
        let events = firing
            .into_iter()
            .map(|(t, set)| (t, Value::Firing(set)))
            .collect();
        Ok(SectionVal::Events(
            EventStream::new(len, events).map_err(MachineError::Stream)?,
        ))
    }

    fn clone_box(&self) -> Box<dyn MachineCore<S>> {
        Box::new(CameraCore {
            pixels: self.pixels.iter().map(|p| p.clone_box()).collect(),
        })
    }
}

/// Event camera: one pixel per direction in parallel, output events carrying
/// the simultaneous firing set with per-pixel polarities. Each pixel gets its
/// own reference intensity `i0` (a camera adapted to a known view).
pub fn make_camera<S: Real>(geom: &PixelGeometry, contrast: S, i0: &[S], i_min: S) -> Machine<S> {
    assert_eq!(i0.len(), geom.len());
    let pixels = (0..geom.len())
        .map(|i| make_pixel(contrast, i0[i], i_min).fresh_core())
        .collect();
    Machine::new(
        Kind::Linear(geom.len()),
        Kind::Events,
        Duration::ZERO,
        Box::new(CameraCore { pixels }),
    )
}

// ---------------------------------------------------------------------------
// regulator

#[derive(Clone)]
pub struct RegulatorParams {
    /// Statistic decay rate, 1/s.
    pub a: f64,
    /// Gain.
    pub kappa: f64,
    /// Per-pixel estimator value f(dir(s)).
    pub estimator: Arc<dyn Fn(usize) -> f64 + Send + Sync>,
    pub seconds_per_tick: f64,
    /// Alternative reading of the update: keep the decay term inside the sum
    /// over the firing set (scales it by |S|). The default decays once.
    pub decay_in_sum: bool,
}

/// Regulator state: (last event tick, statistic).
pub type RegulatorState = (Tick, f64);

/// One regulator step for a firing set at absolute tick `t`: decay the
/// statistic over the elapsed time, then subtract the gain-scaled estimator
/// summed over the firing pixels. Polarities are ignored.
pub fn regulator_update(
    params: &RegulatorParams,
    firing: &[(usize, i8)],
    t: Tick,
    x: RegulatorState,
) -> Result<RegulatorState, MachineError> {
    let (t_prev, stat) = x;
    if t < t_prev {
        return Err(MachineError::NonMonotoneTime);
    }
    let dt = (t - t_prev) as f64 * params.seconds_per_tick;
    let decay = (-params.a * dt).exp();
    let sum_f: f64 = firing.iter().map(|(s, _)| (params.estimator)(*s)).sum();
    let decayed = if params.decay_in_sum {
        firing.len() as f64 * decay * stat
    } else {
        decay * stat
    };
    Ok((t, decayed - params.kappa / params.a * sum_f))
}

#[derive(Clone)]
struct RegulatorCore {
    params: RegulatorParams,
    state: RegulatorState,
    t0: Tick,
}

impl<S: Real> MachineCore<S> for RegulatorCore {
    fn advance(&mut self, input: &SectionVal<S>) -> Result<SectionVal<S>, MachineError> {
        let events = input.expect_events()?;
        let len = events.length();
        let lo = emit_lo(self.t0);
        let mut out = Vec::new();
        for (t, v) in events.events() {
            if *t < lo {
                continue;
            }
            let firing: Vec<(usize, i8)> = match v {
                Value::Firing(set) => set.clone(),
                Value::Polarity(q) => vec![(0, *q)],
                other => return Err(MachineError::BadWireValue(format!("{other:?}"))),
            };
            self.state = regulator_update(&self.params, &firing, self.t0 + t, self.state)?;
            out.push((*t, Value::Real(S::from_f64_lossy(self.state.1))));
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

/// Heading regulator: folds [`regulator_update`] over camera events, emitting
/// the statistic at each event timestamp. Timestamps are absolute, so the
/// core tracks its global offset across blocks.
pub fn make_regulator<S: Real>(params: RegulatorParams) -> Machine<S> {
    assert!(params.a > 0.0 && params.kappa >= 0.0);
    Machine::new(
        Kind::Events,
        Kind::Events,
        Duration::ZERO,
        Box::new(RegulatorCore {
            params,
            state: (0, 0.0),
            t0: 0,
        }),
    )
}

// ---------------------------------------------------------------------------
// body

#[derive(Debug, Clone, Copy)]
pub struct BodyParams {
    /// Actuator saturation bound, rad/s.
    pub b: f64,
    /// Initial heading, rad.
    pub theta0: f64,
    /// Goal heading, rad.
    pub theta_goal: f64,
}

/// Clamp a control to `[-b, b]`.
pub fn sat_b<S: Real>(u: S, b: S) -> S {
    u.min(b).max(-b)
}

/// Body dynamics: hold the latest control event, integrate
/// `θ̇ = sat_b(u)` from `θ₀`.
pub fn make_body<S: Real>(params: BodyParams, h: Duration, seconds_per_tick: f64) -> Machine<S> {
    assert!(params.b > 0.0);
    let b = S::from_f64_lossy(params.b);
    let cds = make_cds(CdsSpec {
        input_dim: 1,
        state_dim: 1,
        output_dim: 1,
        dynamics: Arc::new(move |u: &[S], _s: &[S]| vec![sat_b(u[0], b)]),
        readout: Arc::new(|s: &[S]| s.to_vec()),
        initial: vec![S::from_f64_lossy(params.theta0)],
        h,
        seconds_per_tick,
        step_input: true,
    });
    series(make_zoh(vec![S::zero()]), cds).expect("kinds")
}

// ---------------------------------------------------------------------------
// scene observer

/// Maps a heading trajectory to the per-pixel intensity trajectory
/// `I_s(t) = m(θ(t) + dir(s))`.
pub fn make_scene_observer<S: Real>(geom: &PixelGeometry, scene: &Scene) -> Machine<S> {
    let dirs = geom.dirs.clone();
    let scene = scene.clone();
    make_linear_map(
        1,
        dirs.len(),
        Arc::new(move |theta: &[S]| {
            let th = theta[0].to_f64().unwrap();
            dirs.iter()
                .map(|d| S::from_f64_lossy(scene.eval(th + d)))
                .collect()
        }),
    )
}

// ---------------------------------------------------------------------------
// estimators

/// Proportional image-space estimator: `f(s) = wrap(dir(s) − θ_g)`.
pub fn proportional_estimator(geom: &PixelGeometry, theta_goal: f64) -> Vec<f64> {
    geom.dirs
        .iter()
        .map(|d| wrap_angle(d - theta_goal))
        .collect()
}

/// Event-triggered posterior-mean estimator: per pixel `s`,
/// `f(s) = E[θ | event at s] − θ_g`, where the expectation runs over a
/// uniform heading prior of half-width `prior_width` around the goal,
/// weighted by the probability of pixel `s` generating an event there
/// (the reflectance gradient magnitude at `θ + dir(s)`).
pub fn estimator_from_scene(
    geom: &PixelGeometry,
    scene: &Scene,
    prior_width: f64,
    theta_goal: f64,
) -> Result<Vec<f64>, MachineError> {
    assert!(prior_width > 0.0);
    const GRID: usize = 512;
    let mut out = Vec::with_capacity(geom.len());
    let mut informative = false;
    for s in 0..geom.len() {
        let dir = geom.dir(s);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..GRID {
            // trapezoid with half-weighted endpoints
            let w = if i == 0 || i == GRID - 1 { 0.5 } else { 1.0 };
            let theta =
                theta_goal - prior_width + 2.0 * prior_width * i as f64 / (GRID - 1) as f64;
            let g = scene.gradient_mag(theta + dir);
            num += w * theta * g;
            den += w * g;
        }
        if den > 1e-12 {
            informative = true;
            out.push(num / den - theta_goal);
        } else {
            out.push(0.0);
        }
    }
    if !informative {
        return Err(MachineError::DegenerateScene);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// closed loop

#[derive(Clone)]
pub struct ClosedLoopParams {
    pub geometry: PixelGeometry,
    pub scene: Scene,
    /// Pixel contrast threshold C.
    pub contrast: f64,
    /// Pixel reference intensity seeding the log front end; `None` adapts
    /// each pixel to the intensity it sees at the initial heading.
    pub i0: Option<f64>,
    /// Initial control held during the first delay window (the loop's
    /// pre-history): a small excitation so a calibrated camera starts
    /// generating events. Zero keeps the loop quiescent.
    pub kick: f64,
    /// Intensity floor before the log.
    pub i_min: f64,
    pub regulator_a: f64,
    pub regulator_kappa: f64,
    /// Per-pixel estimator values f(dir(s)).
    pub estimator: Vec<f64>,
    pub decay_in_sum: bool,
    pub body: BodyParams,
    /// Loop delay ε in ticks; must be a multiple of `h`.
    pub epsilon: Duration,
    /// Integrator step in ticks.
    pub h: Duration,
    pub seconds_per_tick: f64,
}

/// Names of the wires a closed-loop run records, in loop order.
pub const LOOP_WIRES: [&str; 5] = ["heading", "intensity", "camera", "statistic", "control"];

/// The traced loop body → scene observer → camera → regulator → ε-delay,
/// closed over the control wire. Running it on the trivial section of the
/// desired horizon records every intermediate wire.
pub fn build_closed_loop<S: Real>(p: &ClosedLoopParams) -> Result<Machine<S>, MachineError> {
    assert!(p.epsilon.ticks() >= 1 && p.epsilon.ticks() % p.h.ticks() == 0);
    assert_eq!(p.estimator.len(), p.geometry.len());
    let body = make_body::<S>(p.body, p.h, p.seconds_per_tick);
    let observer = make_scene_observer::<S>(&p.geometry, &p.scene);
    let i0: Vec<S> = (0..p.geometry.len())
        .map(|s| {
            let raw = match p.i0 {
                Some(level) => level,
                None => p.scene.eval(p.body.theta0 + p.geometry.dir(s)),
            };
            S::from_f64_lossy(raw.max(p.i_min))
        })
        .collect();
    let camera = make_camera::<S>(
        &p.geometry,
        S::from_f64_lossy(p.contrast),
        &i0,
        S::from_f64_lossy(p.i_min),
    );
    let estimator = p.estimator.clone();
    let regulator = make_regulator::<S>(RegulatorParams {
        a: p.regulator_a,
        kappa: p.regulator_kappa,
        estimator: Arc::new(move |s| estimator[s]),
        seconds_per_tick: p.seconds_per_tick,
        decay_in_sum: p.decay_in_sum,
    });
    let seed = if p.kick != 0.0 {
        EventStream::new(p.epsilon, vec![(0, Value::Real(S::from_f64_lossy(p.kick)))])
            .map_err(MachineError::Stream)?
    } else {
        EventStream::empty(p.epsilon)
    };
    let delay = delay_machine::<S>(p.epsilon, SectionVal::Events(seed))?;

    let m = series_labeled(body, observer, Some("heading"))?;
    let m = series_labeled(m, camera, Some("intensity"))?;
    let m = series_labeled(m, regulator, Some("camera"))?;
    let m = series_labeled(m, delay, Some("statistic"))?;
    trace_loop(m, p.epsilon, "control")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::run;
    use crate::trajectory::LinearTrajectory;

    fn exp_ramp(length: Tick, sign: f64) -> SectionVal<f64> {
        let breakpoints: Vec<Tick> = (0..=length).collect();
        let values = breakpoints
            .iter()
            .map(|&t| vec![(sign * t as f64 / length as f64).exp()])
            .collect();
        SectionVal::Linear(LinearTrajectory::new(Duration(length), breakpoints, values).unwrap())
    }

    fn polarities(s: &SectionVal<f64>) -> Vec<(Tick, i8)> {
        s.expect_events()
            .unwrap()
            .events()
            .iter()
            .map(|(t, v)| match v {
                Value::Polarity(q) => (*t, *q),
                other => panic!("{other:?}"),
            })
            .collect()
    }

    #[test]
    fn pixel_on_exponential_brightening() {
        let m = make_pixel(0.25, 1.0, 1e-6);
        let t = run(&m, &exp_ramp(100, 1.0), Duration(100)).unwrap();
        assert_eq!(
            polarities(&t.output),
            vec![(25, 1), (50, 1), (75, 1), (100, 1)]
        );
    }

    #[test]
    fn pixel_on_exponential_dimming() {
        let m = make_pixel(0.25, 1.0, 1e-6);
        let t = run(&m, &exp_ramp(100, -1.0), Duration(100)).unwrap();
        assert_eq!(
            polarities(&t.output),
            vec![(25, -1), (50, -1), (75, -1), (100, -1)]
        );
    }

    #[test]
    fn pixel_constant_intensity_is_silent() {
        let m = make_pixel(0.25, 1.0, 1e-6);
        let input =
            SectionVal::Linear(LinearTrajectory::constant(Duration(100), vec![1.0]).unwrap());
        assert!(run(&m, &input, Duration(100))
            .unwrap()
            .output
            .expect_events()
            .unwrap()
            .is_empty());
    }

    #[test]
    fn pixel_coherent_across_steps() {
        let m = make_pixel(0.25, 1.0, 1e-6);
        let whole = run(&m, &exp_ramp(100, 1.0), Duration(100)).unwrap();
        for step in [1, 7, 30] {
            let t = run(&m, &exp_ramp(100, 1.0), Duration(step)).unwrap();
            assert_eq!(t.output, whole.output, "step={step}");
        }
    }

    fn firings(s: &SectionVal<f64>) -> Vec<(Tick, Vec<(usize, i8)>)> {
        s.expect_events()
            .unwrap()
            .events()
            .iter()
            .map(|(t, v)| match v {
                Value::Firing(set) => (*t, set.clone()),
                other => panic!("{other:?}"),
            })
            .collect()
    }

    #[test]
    fn camera_groups_simultaneous_pixels() {
        let geom = PixelGeometry::new(vec![-0.5, 0.5]);
        let m = make_camera(&geom, 0.25, &[1.0, 1.0], 1e-6);
        // both pixels see the same brightening ramp
        let breakpoints: Vec<Tick> = (0..=100).collect();
        let values = breakpoints
            .iter()
            .map(|&t| vec![(t as f64 / 100.0).exp(); 2])
            .collect();
        let input = SectionVal::Linear(
            LinearTrajectory::new(Duration(100), breakpoints, values).unwrap(),
        );
        let out = firings(&run(&m, &input, Duration(100)).unwrap().output);
        assert_eq!(out.len(), 4);
        for (_, set) in &out {
            assert_eq!(set, &vec![(0, 1), (1, 1)]);
        }
    }

    #[test]
    fn camera_with_one_quiet_pixel_emits_singletons() {
        let geom = PixelGeometry::new(vec![-0.5, 0.5]);
        let m = make_camera(&geom, 0.25, &[1.0, 1.0], 1e-6);
        let breakpoints: Vec<Tick> = (0..=100).collect();
        let values = breakpoints
            .iter()
            .map(|&t| vec![(t as f64 / 100.0).exp(), 1.0])
            .collect();
        let input = SectionVal::Linear(
            LinearTrajectory::new(Duration(100), breakpoints, values).unwrap(),
        );
        let out = firings(&run(&m, &input, Duration(100)).unwrap().output);
        assert_eq!(out.len(), 4);
        for (_, set) in &out {
            assert_eq!(set.len(), 1);
            assert_eq!(set[0].0, 0);
        }
    }

    fn test_params(f: f64) -> RegulatorParams {
        RegulatorParams {
            a: 1.0,
            kappa: 1.0,
            estimator: Arc::new(move |_| f),
            seconds_per_tick: 0.001,
            decay_in_sum: false,
        }
    }

    #[test]
    fn regulator_update_examples() {
        // fresh state, one event: decay term vanishes
        let x = regulator_update(&test_params(0.5), &[(0, 1)], 1000, (0, 0.0)).unwrap();
        assert_eq!(x, (1000, -0.5));

        // pure decay over ln 2 seconds halves the statistic
        let t = (1000.0 * std::f64::consts::LN_2).round() as Tick;
        let x = regulator_update(&test_params(0.0), &[(0, 1)], t, (0, 1.0)).unwrap();
        assert!((x.1 - 0.5).abs() < 1e-3);

        assert!(matches!(
            regulator_update(&test_params(0.0), &[(0, 1)], 5, (10, 0.0)),
            Err(MachineError::NonMonotoneTime)
        ));
    }

    #[test]
    fn regulator_machine_folds_and_decays() {
        let m = make_regulator::<f64>(test_params(0.5));
        let events = SectionVal::Events(
            EventStream::new(
                Duration(2000),
                vec![
                    (1000, Value::Firing(vec![(0, 1)])),
                    (1693, Value::Firing(vec![(0, 1)])),
                ],
            )
            .unwrap(),
        );
        for step in [250, 2000] {
            let t = run(&m, &events, Duration(step)).unwrap();
            let out: Vec<f64> = t
                .output
                .expect_events()
                .unwrap()
                .events()
                .iter()
                .map(|(_, v)| v.as_real().unwrap())
                .collect();
            assert_eq!(out[0], -0.5);
            // second: decay e^{-0.693} ≈ 0.5 applied to −0.5, minus 0.5
            assert!((out[1] - (-0.5 * 0.5000631 - 0.5)).abs() < 1e-4, "{out:?}");
        }
    }

    #[test]
    fn saturation_examples() {
        assert_eq!(sat_b(3.0, 2.0), 2.0);
        assert_eq!(sat_b(-3.0, 2.0), -2.0);
        assert_eq!(sat_b(1.0, 2.0), 1.0);
    }

    fn control_events(pairs: &[(Tick, f64)], length: Tick) -> SectionVal<f64> {
        SectionVal::Events(
            EventStream::new(
                Duration(length),
                pairs.iter().map(|(t, u)| (*t, Value::Real(*u))).collect(),
            )
            .unwrap(),
        )
    }

    #[test]
    fn body_integrates_held_control() {
        let params = BodyParams {
            b: 2.0,
            theta0: 0.0,
            theta_goal: 0.0,
        };
        let m = make_body::<f64>(params, Duration(1), 0.01);
        let t = run(&m, &control_events(&[(0, 1.0)], 100), Duration(100)).unwrap();
        let theta = t.output.expect_linear().unwrap().evaluate(100).unwrap()[0];
        assert!((theta - 1.0).abs() < 1e-12);

        let t = run(&m, &control_events(&[(0, 5.0)], 100), Duration(100)).unwrap();
        let theta = t.output.expect_linear().unwrap().evaluate(100).unwrap()[0];
        assert!((theta - 2.0).abs() < 1e-12);
    }

    #[test]
    fn observer_uniform_scene_is_flat() {
        let geom = PixelGeometry::uniform(8, 2.0 * PI);
        let m = make_scene_observer::<f64>(&geom, &Scene::uniform(1.0));
        let heading = SectionVal::Linear(
            LinearTrajectory::new(
                Duration(50),
                vec![0, 25, 50],
                vec![vec![0.0], vec![2.0], vec![-1.0]],
            )
            .unwrap(),
        );
        let t = run(&m, &heading, Duration(50)).unwrap();
        let out = t.output.expect_linear().unwrap();
        for tick in [0, 10, 37, 50] {
            assert!(out.evaluate(tick).unwrap().iter().all(|v| *v == 1.0));
        }
    }

    #[test]
    fn observer_tracks_reflectance() {
        let geom = PixelGeometry::new(vec![0.0]);
        let scene = Scene::cosine(0.5, 720);
        let m = make_scene_observer::<f64>(&geom, &scene);
        let heading = SectionVal::Linear(
            LinearTrajectory::constant(Duration(10), vec![PI / 2.0]).unwrap(),
        );
        let t = run(&m, &heading, Duration(10)).unwrap();
        let v = t.output.expect_linear().unwrap().evaluate(5).unwrap()[0];
        assert!((v - 1.0).abs() < 1e-4, "{v}");
    }

    #[test]
    fn estimator_uniform_scene_is_degenerate() {
        let geom = PixelGeometry::uniform(8, 2.0 * PI);
        assert!(matches!(
            estimator_from_scene(&geom, &Scene::uniform(1.0), 0.5, 0.0),
            Err(MachineError::DegenerateScene)
        ));
    }

    #[test]
    fn estimator_is_odd_for_symmetric_scene() {
        let geom = PixelGeometry::uniform(16, 2.0 * PI);
        let f = estimator_from_scene(&geom, &Scene::cosine(0.8, 256), 0.5, 0.0).unwrap();
        for i in 0..8 {
            // directions are symmetric: dir(15−i) = −dir(i)
            assert!(
                (f[i] + f[15 - i]).abs() < 1e-9,
                "i={i}: {} vs {}",
                f[i],
                f[15 - i]
            );
        }
    }

    #[test]
    fn proportional_estimator_wraps() {
        let geom = PixelGeometry::new(vec![-3.0, 0.0, 3.0]);
        let f = proportional_estimator(&geom, 3.0);
        assert!((f[0] - wrap_angle(-6.0)).abs() < 1e-12);
        assert!((f[1] + 3.0).abs() < 1e-12);
        assert!((f[2] - 0.0).abs() < 1e-12);
    }

    fn loop_params(scene: Scene, theta0: f64) -> ClosedLoopParams {
        let geometry = PixelGeometry::uniform(64, 2.0 * PI);
        let estimator = match estimator_from_scene(&geometry, &scene, 0.6, 0.0) {
            Ok(f) => f,
            Err(_) => vec![0.0; geometry.len()],
        };
        ClosedLoopParams {
            geometry,
            scene,
            contrast: 0.1,
            i0: None,
            kick: 0.5,
            i_min: 1e-6,
            regulator_a: 5.0,
            regulator_kappa: 2.0,
            estimator,
            decay_in_sum: false,
            body: BodyParams {
                b: 2.0,
                theta0,
                theta_goal: 0.0,
            },
            epsilon: Duration(10),
            h: Duration(1),
            seconds_per_tick: 0.001,
        }
    }

    #[test]
    fn closed_loop_uniform_scene_is_stationary() {
        let mut p = loop_params(Scene::uniform(1.0), 0.7);
        p.kick = 0.0;
        let m = build_closed_loop::<f64>(&p).unwrap();
        let t = run(&m, &SectionVal::Unit(Duration(2000)), Duration(500)).unwrap();
        let wires: std::collections::HashMap<_, _> = t.wires.iter().cloned().collect();
        let heading = wires["heading"].expect_linear().unwrap().clone();
        for tick in [0, 777, 2000] {
            assert_eq!(heading.evaluate(tick).unwrap(), vec![0.7]);
        }
        assert!(wires["camera"].expect_events().unwrap().is_empty());
        assert!(wires["control"].expect_events().unwrap().is_empty());
    }

    #[test]
    fn closed_loop_regulates_toward_goal() {
        let p = loop_params(Scene::cosine(0.8, 256), 0.4);
        let m = build_closed_loop::<f64>(&p).unwrap();
        let horizon = 8000;
        let t = run(&m, &SectionVal::Unit(Duration(horizon)), Duration(1000)).unwrap();
        let wires: std::collections::HashMap<_, _> = t.wires.iter().cloned().collect();
        let heading = wires["heading"].expect_linear().unwrap().clone();
        let initial = (heading.evaluate(0).unwrap()[0] - 0.0f64).abs();
        let fin = (heading.evaluate(horizon).unwrap()[0] - 0.0f64).abs();
        assert!(
            fin < 0.5 * initial,
            "final error {fin} vs initial {initial}"
        );
    }
}
