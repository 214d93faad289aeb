//! Uniform time grids with integer step indexing.
//!
//! Grid times are always derived as `index * step`; accumulated
//! floating-point sums never enter grid arithmetic, so two grids with the
//! same parameters produce bitwise-identical time sequences.

use crate::error::EngineError;

/// Relative slack accepted when checking that a time lies on the grid.
const ALIGN_TOL: f64 = 1e-9;

/// Uniform grid on `[0, horizon]` with `n_steps` intervals of width `step`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    step: f64,
    n_steps: usize,
}

impl TimeGrid {
    /// Builds a grid from a step and a horizon; the horizon must be a whole
    /// number of steps.
    pub fn new(step: f64, horizon: f64) -> Result<Self, EngineError> {
        if !(step.is_finite() && step > 0.0) {
            return Err(EngineError::config(format!("step must be positive, got {step}")));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(EngineError::config(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        let ratio = horizon / step;
        let n_steps = ratio.round();
        if n_steps < 1.0 || (ratio - n_steps).abs() > ALIGN_TOL * ratio.max(1.0) {
            return Err(EngineError::config(format!(
                "horizon {horizon} is not a whole number of steps of {step}"
            )));
        }
        if n_steps > 1e12 {
            return Err(EngineError::config(format!(
                "grid with {n_steps} steps is too large"
            )));
        }
        Ok(TimeGrid { step, n_steps: n_steps as usize })
    }

    /// Builds a grid directly from a step count.
    pub fn with_steps(step: f64, n_steps: usize) -> Result<Self, EngineError> {
        if !(step.is_finite() && step > 0.0) {
            return Err(EngineError::config(format!("step must be positive, got {step}")));
        }
        if n_steps == 0 {
            return Err(EngineError::config("grid needs at least one step"));
        }
        Ok(TimeGrid { step, n_steps })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of grid points, including both endpoints.
    pub fn n_points(&self) -> usize {
        self.n_steps + 1
    }

    pub fn time(&self, index: usize) -> f64 {
        index as f64 * self.step
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.n_steps)
    }

    /// Grid index of a time, if the time lies on the grid.
    pub fn index_of(&self, t: f64) -> Result<usize, EngineError> {
        if !t.is_finite() || t < 0.0 {
            return Err(EngineError::config(format!("time {t} is outside the grid")));
        }
        let ratio = t / self.step;
        let idx = ratio.round();
        if (ratio - idx).abs() > ALIGN_TOL * ratio.max(1.0) {
            return Err(EngineError::config(format!(
                "time {t} does not lie on a grid of step {}",
                self.step
            )));
        }
        let idx = idx as usize;
        if idx > self.n_steps {
            return Err(EngineError::config(format!(
                "time {t} exceeds the grid horizon {}",
                self.horizon()
            )));
        }
        Ok(idx)
    }

    /// Grid with the same step and `extra` additional steps.
    pub fn extended(&self, extra: usize) -> TimeGrid {
        TimeGrid { step: self.step, n_steps: self.n_steps + extra }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points()).map(|i| self.time(i))
    }
}
