//! Test functionals, integrable weight functions, and stopping rules.
//!
//! Identity checks compare integrals of bounded cylinder functionals under
//! two measures, so functionals are finite-dimensional by construction:
//! a kernel of the coordinate values at finitely many times plus a few
//! path statistics. The `Scope` marker controls how much of the path the
//! kernel is allowed to see.

use std::fmt;
use std::sync::Arc;

use crate::error::EngineError;

/// Information the kernel may read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    /// Coordinate values, running maximum, and the zero set.
    FullFiltration,
    /// Only the zero set, through the last zero at or before the
    /// evaluation time. Coordinate data is withheld.
    ZerosFiltration,
}

/// Path data visible to a cylinder kernel at evaluation time.
#[derive(Debug, Clone)]
pub struct CylinderInput<'a> {
    /// Coordinate values at the requested times (each capped at the
    /// evaluation time). Empty under `ZerosFiltration`.
    pub values: &'a [f64],
    /// Running maximum of the coordinate up to the evaluation time, where
    /// the carrier provides it. `None` under `ZerosFiltration`.
    pub running_max: Option<f64>,
    /// Last marked zero at or before the evaluation time.
    pub last_zero: Option<f64>,
}

/// Bounded functional of finitely many path coordinates. Output is clamped
/// to `[-bound, bound]`, so `bound` is also the scale used by tolerance
/// budgets that depend on the functional.
#[derive(Clone)]
pub struct CylinderFunctional {
    times: Vec<f64>,
    bound: f64,
    scope: Scope,
    kernel: Arc<dyn Fn(&CylinderInput) -> f64 + Send + Sync>,
}

impl fmt::Debug for CylinderFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CylinderFunctional")
            .field("times", &self.times)
            .field("bound", &self.bound)
            .field("scope", &self.scope)
            .finish_non_exhaustive()
    }
}

impl CylinderFunctional {
    pub fn new<K>(
        times: Vec<f64>,
        bound: f64,
        scope: Scope,
        kernel: K,
    ) -> Result<Self, EngineError>
    where
        K: Fn(&CylinderInput) -> f64 + Send + Sync + 'static,
    {
        if !(bound.is_finite() && bound > 0.0) {
            return Err(EngineError::config(format!(
                "functional bound must be positive and finite, got {bound}"
            )));
        }
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(EngineError::config("functional times must be finite and nonnegative"));
        }
        if scope == Scope::ZerosFiltration && !times.is_empty() {
            return Err(EngineError::config(
                "zero-set functionals read no coordinate values; times must be empty",
            ));
        }
        Ok(Self { times, bound, scope, kernel: Arc::new(kernel) })
    }

    /// The constant functional 1.
    pub fn one() -> Self {
        Self { times: Vec::new(), bound: 1.0, scope: Scope::FullFiltration, kernel: Arc::new(|_| 1.0) }
    }

    /// Indicator of `{coordinate at `time` <= level}`.
    pub fn value_window(time: f64, level: f64) -> Self {
        Self {
            times: vec![time],
            bound: 1.0,
            scope: Scope::FullFiltration,
            kernel: Arc::new(move |input: &CylinderInput| {
                if input.values[0] <= level {
                    1.0
                } else {
                    0.0
                }
            }),
        }
    }

    /// Indicator of `{last zero <= cutoff}`, a zero-set functional.
    pub fn last_zero_window(cutoff: f64) -> Self {
        Self {
            times: Vec::new(),
            bound: 1.0,
            scope: Scope::ZerosFiltration,
            kernel: Arc::new(move |input: &CylinderInput| match input.last_zero {
                Some(g) if g <= cutoff => 1.0,
                _ => 0.0,
            }),
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn scope(&self) -> Scope {
        self.scope
    }

    /// Kernel output clamped to the declared bound.
    pub fn eval_clamped(&self, input: &CylinderInput) -> f64 {
        (self.kernel)(input).clamp(-self.bound, self.bound)
    }
}

/// Nonnegative integrable weight functions with an exact tail integral
/// `G(x) = integral of f over [x, infinity)`. Having `G` in closed form
/// keeps one side of several identities free of quadrature error.
#[derive(Debug, Clone, PartialEq)]
pub enum IntegrableTestFunction {
    /// f(y) = exp(-rate y).
    Exponential { rate: f64 },
    /// f(y) = 1 on [0, upper), 0 elsewhere.
    IndicatorInterval { upper: f64 },
    /// f(y) = levels[j] on [breaks[j], breaks[j+1]), 0 outside.
    PiecewiseConstant { breaks: Vec<f64>, levels: Vec<f64> },
}

impl IntegrableTestFunction {
    pub fn validate(&self) -> Result<(), EngineError> {
        match self {
            IntegrableTestFunction::Exponential { rate } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err(EngineError::config(format!(
                        "exponential weight needs a positive rate, got {rate}"
                    )));
                }
            }
            IntegrableTestFunction::IndicatorInterval { upper } => {
                if !(upper.is_finite() && *upper > 0.0) {
                    return Err(EngineError::config(format!(
                        "interval weight needs a positive upper endpoint, got {upper}"
                    )));
                }
            }
            IntegrableTestFunction::PiecewiseConstant { breaks, levels } => {
                if breaks.len() != levels.len() + 1 || levels.is_empty() {
                    return Err(EngineError::config(
                        "piecewise weight needs k+1 breaks for k levels, k >= 1",
                    ));
                }
                if breaks.windows(2).any(|w| !(w[0] < w[1])) || !breaks[0].is_finite() {
                    return Err(EngineError::config("piecewise breaks must be finite and increasing"));
                }
                if breaks[0] < 0.0 {
                    return Err(EngineError::config("piecewise breaks must be nonnegative"));
                }
                if levels.iter().any(|l| !l.is_finite() || *l < 0.0) {
                    return Err(EngineError::config("piecewise levels must be finite and nonnegative"));
                }
            }
        }
        Ok(())
    }

    pub fn f(&self, y: f64) -> f64 {
        match self {
            IntegrableTestFunction::Exponential { rate } => (-rate * y).exp(),
            IntegrableTestFunction::IndicatorInterval { upper } => {
                if (0.0..*upper).contains(&y) {
                    1.0
                } else {
                    0.0
                }
            }
            IntegrableTestFunction::PiecewiseConstant { breaks, levels } => {
                if y < breaks[0] || y >= *breaks.last().unwrap() {
                    return 0.0;
                }
                // partition_point gives the first break beyond y.
                let j = breaks.partition_point(|b| *b <= y);
                levels[j - 1]
            }
        }
    }

    /// Exact tail integral G(x) over [max(x, 0), infinity).
    pub fn tail_integral(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        match self {
            IntegrableTestFunction::Exponential { rate } => (-rate * x).exp() / rate,
            IntegrableTestFunction::IndicatorInterval { upper } => (upper - x).max(0.0),
            IntegrableTestFunction::PiecewiseConstant { breaks, levels } => {
                let mut total = 0.0;
                for (j, level) in levels.iter().enumerate() {
                    let (lo, hi) = (breaks[j].max(x), breaks[j + 1]);
                    if hi > lo {
                        total += level * (hi - lo);
                    }
                }
                total
            }
        }
    }

    /// Total mass G(0).
    pub fn total_mass(&self) -> f64 {
        self.tail_integral(0.0)
    }
}

/// Stopping rules resolved on grid observations of the coordinate, so every
/// rule is a stopping time of the discretely observed filtration.
#[derive(Debug, Clone, PartialEq)]
pub enum StoppingRule {
    Deterministic { time: f64 },
    /// First grid time the coordinate is at or above `level`, capped at `cap`.
    HittingLevel { level: f64, cap: f64 },
    MinOf(Box<StoppingRule>, Box<StoppingRule>),
}

impl StoppingRule {
    pub fn validate(&self) -> Result<(), EngineError> {
        match self {
            StoppingRule::Deterministic { time } => {
                if !(time.is_finite() && *time >= 0.0) {
                    return Err(EngineError::config(format!(
                        "deterministic stopping time must be finite and nonnegative, got {time}"
                    )));
                }
            }
            StoppingRule::HittingLevel { level, cap } => {
                if !level.is_finite() {
                    return Err(EngineError::config("hitting level must be finite"));
                }
                if !(cap.is_finite() && *cap >= 0.0) {
                    return Err(EngineError::config(format!(
                        "hitting cap must be finite and nonnegative, got {cap}"
                    )));
                }
            }
            StoppingRule::MinOf(a, b) => {
                a.validate()?;
                b.validate()?;
            }
        }
        Ok(())
    }

    /// A deterministic bound: the rule never stops later than this.
    pub fn horizon_bound(&self) -> f64 {
        match self {
            StoppingRule::Deterministic { time } => *time,
            StoppingRule::HittingLevel { cap, .. } => *cap,
            StoppingRule::MinOf(a, b) => a.horizon_bound().min(b.horizon_bound()),
        }
    }
}
