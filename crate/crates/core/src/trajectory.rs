//! Piecewise-linear continuous trajectories and piecewise-constant step
//! trajectories over the tick grid, with exact restriction and gluing.
//!
//! Linear trajectories carry one real vector per breakpoint and interpolate
//! linearly in between; step trajectories are right-continuous, with each step
//! value taking effect at its tick.

use thiserror::Error;

use crate::scalar::Real;
use crate::sheaf::{Gluable, Section, SectionError};
use crate::timebase::{ClosedInterval, Duration, Tick};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TrajectoryError {
    #[error("tick {tick} outside the trajectory domain [0, {len}]")]
    OutOfDomain { tick: Tick, len: Tick },
    #[error("breakpoints must start at 0, end at the length, and strictly increase")]
    BadBreakpoints,
    #[error("all values must share one dimension >= 1")]
    DimMismatch,
    #[error("non-finite value encountered")]
    NonFinite,
    #[error("operation requires positive length")]
    ZeroLength,
    #[error("resample step must be positive")]
    ZeroStep,
}

fn all_finite<S: Real>(v: &[S]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Piecewise-linear trajectory: breakpoints from 0 to the length, one value
/// vector per breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearTrajectory<S: Real> {
    length: Duration,
    breakpoints: Vec<Tick>,
    values: Vec<Vec<S>>,
}

impl<S: Real> LinearTrajectory<S> {
    pub fn new(
        length: Duration,
        breakpoints: Vec<Tick>,
        values: Vec<Vec<S>>,
    ) -> Result<Self, TrajectoryError> {
        if breakpoints.is_empty()
            || breakpoints.len() != values.len()
            || breakpoints[0] != 0
            || *breakpoints.last().unwrap() != length.ticks()
            || breakpoints.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(TrajectoryError::BadBreakpoints);
        }
        let dim = values[0].len();
        if dim == 0 || values.iter().any(|v| v.len() != dim) {
            return Err(TrajectoryError::DimMismatch);
        }
        if values.iter().any(|v| !all_finite(v)) {
            return Err(TrajectoryError::NonFinite);
        }
        Ok(LinearTrajectory {
            length,
            breakpoints,
            values,
        })
    }

    pub fn constant(length: Duration, value: Vec<S>) -> Result<Self, TrajectoryError> {
        if length.ticks() == 0 {
            Self::new(length, vec![0], vec![value])
        } else {
            let v2 = value.clone();
            Self::new(length, vec![0, length.ticks()], vec![value, v2])
        }
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn breakpoints(&self) -> &[Tick] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[Vec<S>] {
        &self.values
    }

    /// Exact value at an integer tick; stored values at breakpoints.
    pub fn evaluate(&self, t: Tick) -> Result<Vec<S>, TrajectoryError> {
        if t > self.length.ticks() {
            return Err(TrajectoryError::OutOfDomain {
                tick: t,
                len: self.length.ticks(),
            });
        }
        match self.breakpoints.binary_search(&t) {
            Ok(i) => Ok(self.values[i].clone()),
            Err(i) => Ok(self.interp(i - 1, S::from_u64(t).unwrap())),
        }
    }

    /// Value at a fractional tick position (used by integrator stages and
    /// crossing solvers).
    pub fn evaluate_fractional(&self, t: S) -> Result<Vec<S>, TrajectoryError> {
        if t < S::zero() || t > S::from_u64(self.length.ticks()).unwrap() {
            return Err(TrajectoryError::OutOfDomain {
                tick: t.to_u64().unwrap_or(u64::MAX),
                len: self.length.ticks(),
            });
        }
        let floor = t.floor().to_u64().unwrap();
        if t == S::from_u64(floor).unwrap() {
            if let Ok(i) = self.breakpoints.binary_search(&floor) {
                return Ok(self.values[i].clone());
            }
        }
        let seg = match self.breakpoints.binary_search(&floor) {
            Ok(i) => {
                if i + 1 < self.breakpoints.len() {
                    i
                } else {
                    i - 1
                }
            }
            Err(i) => i - 1,
        };
        Ok(self.interp(seg, t))
    }

    fn interp(&self, seg: usize, t: S) -> Vec<S> {
        let t0 = S::from_u64(self.breakpoints[seg]).unwrap();
        let t1 = S::from_u64(self.breakpoints[seg + 1]).unwrap();
        let alpha = (t - t0) / (t1 - t0);
        self.values[seg]
            .iter()
            .zip(&self.values[seg + 1])
            .map(|(a, b)| *a + (*b - *a) * alpha)
            .collect()
    }

    /// Exact minimal Lipschitz constant of the piecewise-linear path:
    /// maximum segment slope (Euclidean norm per second).
    pub fn lipschitz_estimate(&self, seconds_per_tick: f64) -> Result<S, TrajectoryError> {
        if self.length.ticks() == 0 {
            return Err(TrajectoryError::ZeroLength);
        }
        let spt = S::from_f64(seconds_per_tick).unwrap();
        let mut k = S::zero();
        for i in 0..self.breakpoints.len() - 1 {
            let dt = S::from_u64(self.breakpoints[i + 1] - self.breakpoints[i]).unwrap() * spt;
            let dv = self.values[i]
                .iter()
                .zip(&self.values[i + 1])
                .map(|(a, b)| (*b - *a) * (*b - *a))
                .fold(S::zero(), |acc, x| acc + x)
                .sqrt();
            k = k.max(dv / dt);
        }
        Ok(k)
    }

    /// Push every point through `g`, with extra breakpoints at multiples of
    /// the resample step to bound the interpolation error of a nonlinear `g`.
    pub fn map_pointwise(
        &self,
        mut g: impl FnMut(&[S]) -> Vec<S>,
        resample: Duration,
    ) -> Result<Self, TrajectoryError> {
        if resample.ticks() == 0 {
            return Err(TrajectoryError::ZeroStep);
        }
        let mut ticks: Vec<Tick> = self.breakpoints.clone();
        let mut t = 0;
        while t < self.length.ticks() {
            ticks.push(t);
            t += resample.ticks();
        }
        ticks.push(self.length.ticks());
        ticks.sort_unstable();
        ticks.dedup();
        let mut values = Vec::with_capacity(ticks.len());
        for &t in &ticks {
            let out = g(&self.evaluate(t)?);
            if !all_finite(&out) {
                return Err(TrajectoryError::NonFinite);
            }
            values.push(out);
        }
        LinearTrajectory::new(self.length, ticks, values)
    }

    /// Select a contiguous range of components as a new trajectory.
    pub fn components(&self, range: std::ops::Range<usize>) -> Result<Self, TrajectoryError> {
        if range.end > self.dim() || range.is_empty() {
            return Err(TrajectoryError::DimMismatch);
        }
        LinearTrajectory::new(
            self.length,
            self.breakpoints.clone(),
            self.values.iter().map(|v| v[range.clone()].to_vec()).collect(),
        )
    }

    /// Stack several trajectories into one vector-valued trajectory.
    /// Breakpoints become the union of the inputs' breakpoints.
    pub fn stack(parts: &[LinearTrajectory<S>]) -> Result<Self, TrajectoryError> {
        let first = parts.first().ok_or(TrajectoryError::DimMismatch)?;
        let length = first.length;
        if parts.iter().any(|p| p.length != length) {
            return Err(TrajectoryError::BadBreakpoints);
        }
        let mut ticks: Vec<Tick> = parts.iter().flat_map(|p| p.breakpoints.iter().copied()).collect();
        ticks.sort_unstable();
        ticks.dedup();
        let mut values = Vec::with_capacity(ticks.len());
        for &t in &ticks {
            let mut row = Vec::new();
            for p in parts {
                row.extend(p.evaluate(t)?);
            }
            values.push(row);
        }
        LinearTrajectory::new(length, ticks, values)
    }
}

impl<S: Real> Section for LinearTrajectory<S> {
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
        let (lo, hi) = (window.lo(), window.hi());
        let mut ticks = vec![lo];
        ticks.extend(
            self.breakpoints
                .iter()
                .copied()
                .filter(|&t| t > lo && t < hi),
        );
        if hi > lo {
            ticks.push(hi);
        }
        let values = ticks
            .iter()
            .map(|&t| self.evaluate(t).expect("in range"))
            .collect();
        let rebased = ticks.iter().map(|&t| t - lo).collect();
        Ok(LinearTrajectory {
            length: window.len(),
            breakpoints: rebased,
            values,
        })
    }
}

impl<S: Real> Gluable for LinearTrajectory<S> {
    fn glue_unchecked(&self, other: &Self) -> Result<Self, SectionError> {
        let seam = self.length.ticks();
        let total = self
            .length
            .checked_add(other.length)
            .map_err(|_| SectionError::Overflow)?;
        let mut ticks = self.breakpoints.clone();
        let mut values = self.values.clone();
        for (i, &t) in other.breakpoints.iter().enumerate() {
            if t == 0 {
                continue; // seam breakpoint kept from the left side
            }
            ticks.push(seam + t);
            values.push(other.values[i].clone());
        }
        Ok(LinearTrajectory {
            length: total,
            breakpoints: ticks,
            values,
        })
    }
}

/// Piecewise-constant, right-continuous trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTrajectory<S: Real> {
    length: Duration,
    initial: Vec<S>,
    steps: Vec<(Tick, Vec<S>)>,
}

impl<S: Real> StepTrajectory<S> {
    pub fn new(
        length: Duration,
        initial: Vec<S>,
        steps: Vec<(Tick, Vec<S>)>,
    ) -> Result<Self, TrajectoryError> {
        let dim = initial.len();
        if dim == 0 {
            return Err(TrajectoryError::DimMismatch);
        }
        if !all_finite(&initial) {
            return Err(TrajectoryError::NonFinite);
        }
        let mut prev = 0;
        for (t, v) in &steps {
            if *t <= prev || *t > length.ticks() {
                return Err(TrajectoryError::BadBreakpoints);
            }
            if v.len() != dim {
                return Err(TrajectoryError::DimMismatch);
            }
            if !all_finite(v) {
                return Err(TrajectoryError::NonFinite);
            }
            prev = *t;
        }
        Ok(StepTrajectory {
            length,
            initial,
            steps,
        })
    }

    pub fn constant(length: Duration, value: Vec<S>) -> Result<Self, TrajectoryError> {
        StepTrajectory::new(length, value, Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.initial.len()
    }

    pub fn initial(&self) -> &[S] {
        &self.initial
    }

    pub fn steps(&self) -> &[(Tick, Vec<S>)] {
        &self.steps
    }

    /// Last step value at or before `t`; the initial value before any step.
    pub fn evaluate(&self, t: Tick) -> Result<Vec<S>, TrajectoryError> {
        if t > self.length.ticks() {
            return Err(TrajectoryError::OutOfDomain {
                tick: t,
                len: self.length.ticks(),
            });
        }
        let mut current = &self.initial;
        for (st, v) in &self.steps {
            if *st <= t {
                current = v;
            } else {
                break;
            }
        }
        Ok(current.clone())
    }

    pub fn final_value(&self) -> Vec<S> {
        self.steps
            .last()
            .map(|(_, v)| v.clone())
            .unwrap_or_else(|| self.initial.clone())
    }
}

impl<S: Real> Section for StepTrajectory<S> {
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
        let initial = self.evaluate(window.lo()).expect("in range");
        let steps = self
            .steps
            .iter()
            .filter(|(t, _)| *t > window.lo() && *t <= window.hi())
            .map(|(t, v)| (t - window.lo(), v.clone()))
            .collect();
        Ok(StepTrajectory {
            length: window.len(),
            initial,
            steps,
        })
    }
}

impl<S: Real> Gluable for StepTrajectory<S> {
    fn glue_unchecked(&self, other: &Self) -> Result<Self, SectionError> {
        let seam = self.length.ticks();
        let total = self
            .length
            .checked_add(other.length)
            .map_err(|_| SectionError::Overflow)?;
        let mut steps = self.steps.clone();
        for (t, v) in &other.steps {
            steps.push((seam + t, v.clone()));
        }
        Ok(StepTrajectory {
            length: total,
            initial: self.initial.clone(),
            steps,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sheaf::glue;

    fn dur(t: Tick) -> Duration {
        Duration(t)
    }

    fn ramp(len: Tick, from: f64, to: f64) -> LinearTrajectory<f64> {
        LinearTrajectory::new(dur(len), vec![0, len], vec![vec![from], vec![to]]).unwrap()
    }

    #[test]
    fn linear_evaluate() {
        let tr = ramp(10, 0.0, 1.0);
        assert_eq!(tr.evaluate(5).unwrap(), vec![0.5]);
        assert_eq!(tr.evaluate(0).unwrap(), vec![0.0]);
        assert_eq!(tr.evaluate(10).unwrap(), vec![1.0]);
        assert!(tr.evaluate(11).is_err());
    }

    #[test]
    fn step_evaluate_right_continuous() {
        let tr = StepTrajectory::new(dur(10), vec![1.0], vec![(5, vec![2.0])]).unwrap();
        assert_eq!(tr.evaluate(5).unwrap(), vec![2.0]);
        assert_eq!(tr.evaluate(4).unwrap(), vec![1.0]);
        assert_eq!(tr.evaluate(10).unwrap(), vec![2.0]);
    }

    #[test]
    fn rejects_nan() {
        assert!(LinearTrajectory::new(dur(1), vec![0, 1], vec![vec![0.0], vec![f64::NAN]]).is_err());
        assert!(StepTrajectory::new(dur(1), vec![f64::INFINITY], vec![]).is_err());
    }

    #[test]
    fn glue_ramps_to_tent() {
        let up = ramp(10, 0.0, 1.0);
        let down = ramp(10, 1.0, 0.0);
        let tent = glue(&up, &down).unwrap();
        assert_eq!(tent.length(), dur(20));
        assert_eq!(tent.evaluate(10).unwrap(), vec![1.0]);
        assert_eq!(tent.evaluate(5).unwrap(), vec![0.5]);
        assert_eq!(tent.evaluate(15).unwrap(), vec![0.5]);

        // endpoint mismatch
        assert!(glue(&ramp(10, 0.0, 1.0), &ramp(10, 0.5, 0.0)).is_err());

        // constants glue to a longer constant
        let c = glue(
            &LinearTrajectory::constant(dur(3), vec![0.0]).unwrap(),
            &LinearTrajectory::constant(dur(4), vec![0.0]).unwrap(),
        )
        .unwrap();
        assert_eq!(c.evaluate(6).unwrap(), vec![0.0]);
    }

    #[test]
    fn glue_round_trip() {
        let up = ramp(10, 0.0, 1.0);
        let down = ramp(10, 1.0, 0.0);
        let tent = glue(&up, &down).unwrap();
        assert_eq!(
            tent.restrict(ClosedInterval::new(0, 10).unwrap()).unwrap(),
            up
        );
        assert_eq!(
            tent.restrict(ClosedInterval::new(10, 20).unwrap()).unwrap(),
            down
        );
    }

    #[test]
    fn lipschitz_examples() {
        let c = LinearTrajectory::constant(dur(10), vec![3.0]).unwrap();
        assert_eq!(c.lipschitz_estimate(1.0).unwrap(), 0.0);

        // one-second ramp 0 -> 1 with one tick per second
        let r = ramp(1, 0.0, 1.0);
        assert_eq!(r.lipschitz_estimate(1.0).unwrap(), 1.0);

        let tent = glue(&ramp(1, 0.0, 1.0), &ramp(1, 1.0, 0.0)).unwrap();
        assert_eq!(tent.lipschitz_estimate(1.0).unwrap(), 1.0);

        assert!(LinearTrajectory::constant(dur(0), vec![0.0])
            .unwrap()
            .lipschitz_estimate(1.0)
            .is_err());
    }

    #[test]
    fn lipschitz_of_glue_is_max() {
        let a = ramp(2, 0.0, 3.0);
        let b = ramp(6, 3.0, 4.0);
        let g = glue(&a, &b).unwrap();
        let (ka, kb) = (
            a.lipschitz_estimate(1.0).unwrap(),
            b.lipschitz_estimate(1.0).unwrap(),
        );
        assert_eq!(g.lipschitz_estimate(1.0).unwrap(), ka.max(kb));
    }

    #[test]
    fn map_pointwise_examples() {
        let r = ramp(10, 0.0, 2.0);
        let id = r.map_pointwise(|v| v.to_vec(), dur(1)).unwrap();
        for t in 0..=10 {
            assert_eq!(id.evaluate(t).unwrap(), r.evaluate(t).unwrap());
        }

        let e = LinearTrajectory::constant(dur(5), vec![std::f64::consts::E]).unwrap();
        let logged = e
            .map_pointwise(|v| vec![v[0].ln()], dur(1))
            .unwrap();
        for t in 0..=5 {
            assert!((logged.evaluate(t).unwrap()[0] - 1.0).abs() < 1e-15);
        }

        // x^2 on a ramp stays within the interpolation error bound K*step
        let sq = r.map_pointwise(|v| vec![v[0] * v[0]], dur(1)).unwrap();
        for t in 0..=10 {
            let exact = (t as f64 * 0.2) * (t as f64 * 0.2);
            assert!((sq.evaluate(t).unwrap()[0] - exact).abs() < 1e-12);
        }
        // between ticks the deviation is bounded by the segment chord error
        let mid = sq.evaluate_fractional(4.5).unwrap()[0];
        let exact = 0.9f64 * 0.9;
        assert!((mid - exact).abs() <= 0.2 * 0.4 + 1e-12);
    }

    #[test]
    fn restrict_interpolates_cut_points() {
        let r = ramp(10, 0.0, 1.0);
        let w = r.restrict(ClosedInterval::new(2, 8).unwrap()).unwrap();
        assert_eq!(w.evaluate(0).unwrap(), vec![0.2]);
        assert_eq!(w.evaluate(6).unwrap(), vec![0.8]);
        assert_eq!(w.length(), dur(6));
    }

    #[test]
    fn step_restrict_carries_held_value() {
        let tr = StepTrajectory::new(dur(10), vec![1.0], vec![(3, vec![2.0]), (7, vec![3.0])]).unwrap();
        let w = tr.restrict(ClosedInterval::new(4, 10).unwrap()).unwrap();
        assert_eq!(w.initial(), &[2.0]);
        assert_eq!(w.steps(), &[(3, vec![3.0])]);
    }

    #[test]
    fn stack_and_components() {
        let a = ramp(4, 0.0, 1.0);
        let b = LinearTrajectory::constant(dur(4), vec![5.0]).unwrap();
        let s = LinearTrajectory::stack(&[a.clone(), b]).unwrap();
        assert_eq!(s.dim(), 2);
        assert_eq!(s.evaluate(2).unwrap(), vec![0.5, 5.0]);
        let back = s.components(0..1).unwrap();
        for t in 0..=4 {
            assert_eq!(back.evaluate(t).unwrap(), a.evaluate(t).unwrap());
        }
    }
}
