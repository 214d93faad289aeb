//! Samplers for the sigma-finite measures attached to the carriers.
//!
//! Each measure disintegrates over the terminal value of its clock: pick a
//! clock level from a proposal with an importance weight, run the base
//! construction until the clock crosses the level, and continue with the
//! transient tail process that never returns to the zero set. The last zero
//! of the assembled path is the splice time, exactly.
//!
//! Samplers work on a finite window. When the clock does not cross inside
//! the window the base path is returned unspliced: restricted to the
//! window, the conditioned path and the base path agree pathwise on that
//! event, so window functionals of the sample are still exact. Consumers
//! that need the splice resolved use `sample_q_spliced`, which extends the
//! horizon under an explicit budget; the crossing time has no finite mean,
//! so the budget is a real interface, not a safety net.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::bridge::open_unit;
use crate::error::EngineError;
use crate::estimate::{estimate, EstimatorResult};
use crate::functional::{CylinderFunctional, IntegrableTestFunction, StoppingRule};
use crate::grid::TimeGrid;
use crate::path::{simulate_bessel_with, squared_bessel_step, PathSample};
use crate::rng::sample_stream;
use crate::sigma::{
    age_clock_scale, azema_projection, build_abs_bm_levy_with, build_bessel_scale,
    build_signed_bm_levy_with, eval_cylinder, stop_index, ClassSigmaPath, ZeroMarks,
};

/// Which measure to sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasureTag {
    /// Reflected Brownian coordinate, clock = local time at zero.
    AbsBm,
    /// Sum of both signed branches; a fair coin picks the final excursion
    /// sign and the weight doubles.
    W,
    /// Signed Brownian coordinate conditioned to end in a positive
    /// excursion; clock = half the local time.
    WPlus,
    /// Negative-excursion counterpart of `WPlus`.
    WMinus,
    /// Power-scale Bessel coordinate of dimension `delta` in (0, 2) with
    /// the residual clock (`eps` is the reconstruction band, radial units);
    /// the tail has dimension `4 - delta`.
    Bessel { delta: f64, eps: f64 },
    /// Last-zero age coordinate with exponent `alpha`, projected from the
    /// reflected base; the clock is rescaled by `age_clock_scale`.
    Azema { alpha: f64 },
    /// Finite case: density reweighting of the base probability, no
    /// splicing. Served by `reweight_class_d`, not by the path samplers.
    ClassD,
    /// Finite case: constant multiple of the base probability. Served by
    /// `bs_measure_expectation`, not by the path samplers.
    BsKp,
}

impl MeasureTag {
    fn validate(&self) -> Result<(), EngineError> {
        match self {
            MeasureTag::Bessel { delta, eps } => {
                if !(*delta > 0.0 && *delta < 2.0) {
                    return Err(EngineError::config(format!(
                        "sampler needs a Bessel dimension in (0, 2), got {delta}"
                    )));
                }
                if !(eps.is_finite() && *eps > 0.0) {
                    return Err(EngineError::config(format!("band must be positive, got {eps}")));
                }
                Ok(())
            }
            MeasureTag::Azema { alpha } => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return Err(EngineError::config(format!(
                        "age exponent must lie in (0, 1), got {alpha}"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn spliceable(&self) -> Result<(), EngineError> {
        match self {
            MeasureTag::ClassD | MeasureTag::BsKp => Err(EngineError::Unsupported(
                "finite measures reweight the base probability; nothing to splice".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Importance proposal for the clock level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevelProposal {
    /// Level uniform on (0, upper); weight `upper`. Correct only for
    /// integrands vanishing beyond `upper`, which truncated identities
    /// guarantee by construction.
    Uniform { upper: f64 },
    /// Level exponential with the given rate; weight `exp(rate l) / rate`.
    /// Full support, so no truncation remainder.
    Exponential { rate: f64 },
}

impl LevelProposal {
    pub fn validate(&self) -> Result<(), EngineError> {
        let v = match self {
            LevelProposal::Uniform { upper } => *upper,
            LevelProposal::Exponential { rate } => *rate,
        };
        if !(v.is_finite() && v > 0.0) {
            return Err(EngineError::config(format!("proposal scale must be positive, got {v}")));
        }
        Ok(())
    }

    /// Density at a nonnegative level.
    pub fn density(&self, l: f64) -> f64 {
        match self {
            LevelProposal::Uniform { upper } => {
                if l >= 0.0 && l < *upper {
                    1.0 / upper
                } else {
                    0.0
                }
            }
            LevelProposal::Exponential { rate } => {
                if l >= 0.0 {
                    rate * (-rate * l).exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// Draws a level and its importance weight `1 / density`.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        match self {
            LevelProposal::Uniform { upper } => (upper * rng.gen::<f64>(), *upper),
            LevelProposal::Exponential { rate } => {
                let l = -open_unit(rng).ln() / rate;
                (l, (rate * l).exp() / rate)
            }
        }
    }
}

/// One weighted draw from a measure sampler.
#[derive(Debug, Clone)]
pub struct WeightedSample {
    pub tag: MeasureTag,
    pub path: ClassSigmaPath,
    /// Importance weight: proposal weight times the tag factor. Multiply by
    /// the integrand and average to estimate the measure integral.
    pub weight: f64,
    /// The clock level this draw is conditioned on.
    pub level: f64,
    /// Grid index of the splice, where the coordinate is exactly zero.
    /// `None` when the clock did not cross inside the window.
    pub splice_index: Option<usize>,
}

impl WeightedSample {
    pub fn crossed(&self) -> bool {
        self.splice_index.is_some()
    }

    pub fn splice_time(&self) -> Option<f64> {
        self.splice_index.map(|k| self.path.grid.time(k))
    }
}

/// Horizon cap for splice resolution.
#[derive(Debug, Clone, Copy)]
pub struct ExtensionBudget {
    pub max_horizon: f64,
}

impl Default for ExtensionBudget {
    fn default() -> Self {
        // the crossing time is heavy tailed; past this horizon the caller
        // learns about the miss instead of waiting
        Self { max_horizon: 64.0 }
    }
}

fn bessel_tail_values(rng: &mut ChaCha8Rng, step: f64, n_steps: usize, delta: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_steps);
    let mut ysq = 0.0f64;
    for _ in 0..n_steps {
        ysq = squared_bessel_step(rng, ysq, delta, step);
        out.push(ysq.sqrt());
    }
    out
}

/// Replaces everything from `kappa` on: coordinate zero at the splice, then
/// the tail; clock frozen exactly at the level; no zeros after the splice.
fn splice_unsigned(base: &ClassSigmaPath, kappa: usize, level: f64, tail_x: &[f64]) -> ClassSigmaPath {
    let n = base.n_points();
    debug_assert_eq!(tail_x.len(), n - 1 - kappa);
    let mut x = Vec::with_capacity(n);
    x.extend_from_slice(&base.x[..kappa]);
    x.push(0.0);
    x.extend_from_slice(tail_x);
    let mut a = Vec::with_capacity(n);
    a.extend_from_slice(&base.a[..kappa]);
    a.resize(n, level);
    let zeros = match &base.zeros {
        ZeroMarks::Threshold { tol } => ZeroMarks::Threshold { tol: *tol },
        ZeroMarks::Flags(flags) => {
            let mut f = Vec::with_capacity(n - 1);
            f.extend_from_slice(&flags[..kappa - 1]);
            f.push(true);
            f.resize(n - 1, false);
            ZeroMarks::Flags(f)
        }
    };
    ClassSigmaPath { grid: base.grid.clone(), x, a, zeros, signed: None, coord_interval_max: None }
}

fn splice_signed(base: &ClassSigmaPath, kappa: usize, level: f64, sign: f64, tail_radial: &[f64]) -> ClassSigmaPath {
    let mut out = splice_unsigned(base, kappa, level, tail_radial);
    let n = base.n_points();
    let y_base = base.signed.as_ref().expect("signed base carrier");
    let hi_base = base.coord_interval_max.as_ref().expect("signed base carrier");

    let mut y = Vec::with_capacity(n);
    y.extend_from_slice(&y_base[..kappa]);
    y.push(0.0);
    y.extend(tail_radial.iter().map(|v| sign * v));

    let mut hi = Vec::with_capacity(n - 1);
    hi.extend_from_slice(&hi_base[..kappa - 1]);
    // endpoint maxima only from here on: the splice interval attains zero,
    // and the transient tail never contends for the pre-splice running
    // maximum on the negative branch
    hi.push(y[kappa - 1].max(0.0));
    for i in kappa..n - 1 {
        hi.push(y[i].max(y[i + 1]));
    }
    out.signed = Some(y);
    out.coord_interval_max = Some(hi);
    out
}

/// Base construction, splice and tag weight factor at a fixed clock level.
/// Consumes `rng` in the order: base construction, branch coin (W only),
/// tail.
fn assemble_at_level(
    tag: MeasureTag,
    rng: &mut ChaCha8Rng,
    grid: &TimeGrid,
    level: f64,
) -> Result<(ClassSigmaPath, Option<usize>, f64), EngineError> {
    let n = grid.n_points();
    match tag {
        MeasureTag::AbsBm => {
            let base = build_abs_bm_levy_with(rng, grid);
            Ok(match base.clock_crossing(level) {
                Some(k) => {
                    let tail = bessel_tail_values(rng, grid.step(), n - 1 - k, 3.0);
                    (splice_unsigned(&base, k, level, &tail), Some(k), 1.0)
                }
                None => (base, None, 1.0),
            })
        }
        MeasureTag::WPlus | MeasureTag::WMinus | MeasureTag::W => {
            let base = build_signed_bm_levy_with(rng, grid);
            let crossing = base.clock_crossing(level);
            let (sign, factor) = match tag {
                MeasureTag::WPlus => (1.0, 1.0),
                MeasureTag::WMinus => (-1.0, 1.0),
                _ => (if rng.gen::<bool>() { 1.0 } else { -1.0 }, 2.0),
            };
            Ok(match crossing {
                Some(k) => {
                    let tail = bessel_tail_values(rng, grid.step(), n - 1 - k, 3.0);
                    (splice_signed(&base, k, level, sign, &tail), Some(k), factor)
                }
                None => (base, None, factor),
            })
        }
        MeasureTag::Bessel { delta, eps } => {
            let radial = simulate_bessel_with(rng, grid, delta, 0.0)?;
            let base = build_bessel_scale(&radial, 1.0 - 0.5 * delta, eps)?;
            Ok(match base.clock_crossing(level) {
                Some(k) => {
                    let two_alpha = 2.0 - delta;
                    let tail: Vec<f64> = bessel_tail_values(rng, grid.step(), n - 1 - k, 4.0 - delta)
                        .iter()
                        .map(|v| v.powf(two_alpha))
                        .collect();
                    (splice_unsigned(&base, k, level, &tail), Some(k), 1.0)
                }
                None => (base, None, 1.0),
            })
        }
        MeasureTag::Azema { alpha } => {
            let scale = age_clock_scale(alpha);
            let base_level = scale * level;
            let base = build_abs_bm_levy_with(rng, grid);
            let (spliced, k) = match base.clock_crossing(base_level) {
                Some(k) => {
                    let tail = bessel_tail_values(rng, grid.step(), n - 1 - k, 3.0);
                    (splice_unsigned(&base, k, base_level, &tail), Some(k))
                }
                None => (base, None),
            };
            Ok((azema_projection(&spliced, alpha)?, k, 1.0 / scale))
        }
        MeasureTag::ClassD | MeasureTag::BsKp => unreachable!("guarded by spliceable"),
    }
}

/// Draws one weighted sample on the window `grid`, consuming `rng` in the
/// fixed order: clock level, base construction, branch coin (W only), tail.
pub fn sample_window(
    tag: MeasureTag,
    rng: &mut ChaCha8Rng,
    grid: &TimeGrid,
    proposal: &LevelProposal,
) -> Result<WeightedSample, EngineError> {
    tag.validate()?;
    tag.spliceable()?;
    proposal.validate()?;
    let (level, weight) = proposal.sample(rng);
    let (path, splice_index, factor) = assemble_at_level(tag, rng, grid, level)?;
    Ok(WeightedSample { tag, path, weight: weight * factor, level, splice_index })
}

/// Seeded wrapper around `sample_window`.
pub fn sample_measure(
    tag: MeasureTag,
    seed: u64,
    grid: &TimeGrid,
    proposal: &LevelProposal,
) -> Result<WeightedSample, EngineError> {
    sample_window(tag, &mut sample_stream(seed, 0), grid, proposal)
}

/// Draws the conditioned path at a fixed clock level with the splice
/// resolved, doubling the horizon until the clock crosses and the grid
/// covers `post_horizon` beyond the splice, or the budget is exhausted. The
/// returned grid may be longer than the requested one; its prefix
/// reproduces the window sample for the same seed bitwise. The weight is
/// the tag factor alone: level-integration weights belong to the caller's
/// proposal.
pub fn sample_q_spliced(
    tag: MeasureTag,
    level: f64,
    seed: u64,
    grid: &TimeGrid,
    post_horizon: f64,
    budget: ExtensionBudget,
) -> Result<WeightedSample, EngineError> {
    tag.validate()?;
    tag.spliceable()?;
    if let MeasureTag::Azema { .. } = tag {
        return Err(EngineError::Unsupported(
            "age-coordinate splices are produced by sample_azema_image".into(),
        ));
    }
    if !(level.is_finite() && level > 0.0) {
        return Err(EngineError::config(format!("clock level must be positive, got {level}")));
    }
    if !(post_horizon >= 0.0) {
        return Err(EngineError::config(format!("post horizon must be nonnegative, got {post_horizon}")));
    }
    if !(budget.max_horizon.is_finite() && budget.max_horizon > 0.0) {
        return Err(EngineError::config(format!(
            "extension budget must be positive, got {}",
            budget.max_horizon
        )));
    }
    let mut current = grid.clone();
    loop {
        let (path, splice_index, factor) =
            assemble_at_level(tag, &mut sample_stream(seed, 0), &current, level)?;
        if let Some(k) = splice_index {
            if current.time(k) + post_horizon <= current.horizon() + 0.5 * current.step() {
                return Ok(WeightedSample { tag, path, weight: factor, level, splice_index });
            }
        }
        let doubled = current.n_steps().checked_mul(2).ok_or_else(|| {
            EngineError::BudgetExhausted("horizon doubling overflowed the step count".into())
        })?;
        let next = TimeGrid::with_steps(current.step(), doubled)?;
        if next.horizon() > budget.max_horizon {
            return Err(EngineError::BudgetExhausted(format!(
                "clock level {level:.6} not resolved by horizon {:.1}",
                current.horizon()
            )));
        }
        current = next;
    }
}

/// Resolved draw of the age coordinate at a fixed level of the rescaled
/// clock: the reflected base runs until its own clock reaches
/// `age_clock_scale(alpha) * level`, the age projection is applied, and the
/// constant prefactor of the image measure is folded into the weight.
pub fn sample_azema_image(
    alpha: f64,
    level: f64,
    seed: u64,
    grid: &TimeGrid,
    post_horizon: f64,
    budget: ExtensionBudget,
) -> Result<WeightedSample, EngineError> {
    let tag = MeasureTag::Azema { alpha };
    tag.validate()?;
    if !(level.is_finite() && level > 0.0) {
        return Err(EngineError::config(format!("clock level must be positive, got {level}")));
    }
    if !(budget.max_horizon.is_finite() && budget.max_horizon > 0.0) {
        return Err(EngineError::config(format!(
            "extension budget must be positive, got {}",
            budget.max_horizon
        )));
    }
    let mut current = grid.clone();
    loop {
        let (path, splice_index, factor) =
            assemble_at_level(tag, &mut sample_stream(seed, 0), &current, level)?;
        if let Some(k) = splice_index {
            if current.time(k) + post_horizon <= current.horizon() + 0.5 * current.step() {
                return Ok(WeightedSample { tag, path, weight: factor, level, splice_index });
            }
        }
        let doubled = current.n_steps().checked_mul(2).ok_or_else(|| {
            EngineError::BudgetExhausted("horizon doubling overflowed the step count".into())
        })?;
        let next = TimeGrid::with_steps(current.step(), doubled)?;
        if next.horizon() > budget.max_horizon {
            return Err(EngineError::BudgetExhausted(format!(
                "clock level {level:.6} not resolved by horizon {:.1}",
                current.horizon()
            )));
        }
        current = next;
    }
}

/// Estimates the measure integral of `hh * h(clock at infinity)` by
/// importance sampling of the level: mean of `h(l)/p(l) * hh(sample)` over
/// `n` windowed draws. `hh` reads the window only, which matches the
/// conditioned path on every draw, crossed or not.
pub fn q_integral(
    tag: MeasureTag,
    hh: &CylinderFunctional,
    h: &IntegrableTestFunction,
    proposal: &LevelProposal,
    n: u64,
    seed: u64,
    grid: &TimeGrid,
) -> Result<EstimatorResult, EngineError> {
    tag.validate()?;
    tag.spliceable()?;
    proposal.validate()?;
    h.validate()?;
    let at = grid.n_points() - 1;
    // one probe surfaces grid misalignment before the sweep starts
    let probe = sample_window(tag, &mut sample_stream(seed, 0), grid, proposal)?;
    eval_cylinder(&probe.path, hh, at)?;
    Ok(estimate(n, seed, 0.0, |_, rng| {
        let s = sample_window(tag, rng, grid, proposal).expect("inputs validated");
        s.weight * h.f(s.level) * eval_cylinder(&s.path, hh, at).expect("inputs validated")
    }))
}

/// Same integral restricted to the event that the splice happens no later
/// than the stopping time: mean of `h(l)/p(l) * hh(sample at T) * 1{splice
/// index <= T index}`. The event is exact on the window: the clock crosses
/// inside it if and only if the last zero of the conditioned path is
/// within, and `T` never exceeds the horizon.
pub fn q_integral_stopped(
    tag: MeasureTag,
    hh: &CylinderFunctional,
    h: &IntegrableTestFunction,
    proposal: &LevelProposal,
    rule: &StoppingRule,
    n: u64,
    seed: u64,
    grid: &TimeGrid,
) -> Result<EstimatorResult, EngineError> {
    tag.validate()?;
    tag.spliceable()?;
    proposal.validate()?;
    h.validate()?;
    rule.validate()?;
    let probe = sample_window(tag, &mut sample_stream(seed, 0), grid, proposal)?;
    let probe_idx = stop_index(&probe.path, rule)?;
    eval_cylinder(&probe.path, hh, probe_idx)?;
    Ok(estimate(n, seed, 0.0, |_, rng| {
        let s = sample_window(tag, rng, grid, proposal).expect("inputs validated");
        match s.splice_index {
            Some(k) => {
                let t_idx = stop_index(&s.path, rule).expect("inputs validated");
                if k <= t_idx {
                    s.weight * h.f(s.level) * eval_cylinder(&s.path, hh, t_idx).expect("inputs validated")
                } else {
                    0.0
                }
            }
            None => 0.0,
        }
    }))
}

/// Finite-measure route for the stopped reflected model: the measure has
/// density (coordinate at the horizon) against the base probability, so
/// integrals are plain reweighted means. `h` reads the whole carrier.
pub fn reweight_class_d<H>(
    n: u64,
    seed: u64,
    grid: &TimeGrid,
    h: H,
) -> EstimatorResult
where
    H: Fn(&ClassSigmaPath) -> f64 + Sync,
{
    estimate(n, seed, 0.0, |_, rng| {
        let p = build_abs_bm_levy_with(rng, grid);
        let x_inf = *p.x.last().expect("nonempty grid");
        x_inf * h(&p)
    })
}

/// Finite-measure route for the strike-scaled base probability: `strike`
/// times the plain mean of the integrand over martingale paths.
pub fn bs_measure_expectation<H>(
    strike: f64,
    x0: f64,
    n: u64,
    seed: u64,
    grid: &TimeGrid,
    h: H,
) -> Result<EstimatorResult, EngineError>
where
    H: Fn(&PathSample) -> f64 + Sync,
{
    if !(strike >= 0.0 && strike.is_finite()) {
        return Err(EngineError::config(format!("strike must be nonnegative, got {strike}")));
    }
    crate::path::simulate_exp_martingale(0, grid, x0)?;
    Ok(estimate(n, seed, 0.0, |_, rng| {
        let p = crate::path::simulate_exp_martingale_with(rng, grid, x0).expect("validated");
        strike * h(&p)
    }))
}

/// Probability that a Brownian path from `y` accumulates `remaining` units
/// of symmetric local time at zero before exceeding `sup` > 0. The path
/// first reaches zero before `sup` (a ruin probability), then survives the
/// up-excursions higher than `sup`, which arrive at rate `1 / (2 sup)` per
/// unit of symmetric local time.
pub fn sup_survival_probability(y: f64, remaining: f64, sup: f64) -> f64 {
    if sup <= 0.0 || y >= sup {
        return 0.0;
    }
    let reach = if y <= 0.0 { 1.0 } else { (sup - y) / sup };
    reach * (-0.5 * remaining.max(0.0) / sup).exp()
}
