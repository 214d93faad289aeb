//! Paired-estimator statistical tests of the measure identities.
//!
//! Every check produces an `IdentityReport`: two estimator results, a
//! z-statistic, a deterministic bias budget, and a verdict. The two sides
//! are sampled from independent derived streams unless a paired design is
//! noted; paired designs reuse one stream on both sides and report the
//! z-statistic of the per-sample differences, the scale on which the
//! identity actually holds.
//!
//! Sigma-finite left sides are made finite in one of two ways: restriction
//! to the event that the last zero falls inside the window together with a
//! clock truncation whose remainder is certified by the identity itself,
//! or density weighting by an integrable function of the terminal clock.
//! Truncation remainders and discretization allowances land in the bias
//! budget, never silently in the estimate.

use crate::error::EngineError;
use crate::estimate::{estimate, mc_collect, EstimatorResult};
use crate::functional::{CylinderFunctional, IntegrableTestFunction, Scope, StoppingRule};
use crate::grid::TimeGrid;
use crate::path::simulate_bessel_with;
use crate::qmeasure::{
    q_integral, sample_window, sup_survival_probability, LevelProposal, MeasureTag,
};
use crate::rng::{derive_seed, role_id, sample_stream};
use crate::sigma::{
    build_abs_bm_levy_with, build_bessel_scale, build_drawdown_with, build_signed_bm_levy_with,
    eval_cylinder, stop_index, ClassSigmaPath,
};

/// Shared run parameters for one identity check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Samples per side.
    pub n: u64,
    pub step: f64,
    pub horizon: f64,
    pub z_crit: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { seed: 0, n: 100_000, step: 2f64.powi(-10), horizon: 1.0, z_crit: 4.0 }
    }
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.n < 2 {
            return Err(EngineError::config(format!("need at least 2 samples, got {}", self.n)));
        }
        if !(self.z_crit.is_finite() && self.z_crit > 0.0) {
            return Err(EngineError::config(format!(
                "z threshold must be positive, got {}",
                self.z_crit
            )));
        }
        TimeGrid::new(self.step, self.horizon).map(|_| ())
    }

    pub fn grid(&self) -> Result<TimeGrid, EngineError> {
        TimeGrid::new(self.step, self.horizon)
    }

    fn window(&self, horizon: f64) -> Result<TimeGrid, EngineError> {
        if horizon > self.horizon + 1e-9 {
            return Err(EngineError::config(format!(
                "evaluation time {horizon} exceeds the configured horizon {}",
                self.horizon
            )));
        }
        TimeGrid::new(self.step, horizon)
    }
}

/// The submartingale models the verifier knows how to sample on both sides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaModel {
    /// Reflected Brownian coordinate, clock = local time at zero.
    AbsBm,
    /// Positive part of a Brownian path, clock = half its local time.
    WPlus,
    /// Negative part, same clock.
    WMinus,
    /// Power-scale Bessel coordinate, dimension in (0, 2); `eps` is the
    /// clock reconstruction band.
    Bessel { delta: f64, eps: f64 },
    /// Running maximum minus the path; its conditioned measure is compared
    /// against the negative-part sampler.
    Drawdown,
}

impl SigmaModel {
    fn tag(&self) -> MeasureTag {
        match self {
            SigmaModel::AbsBm => MeasureTag::AbsBm,
            SigmaModel::WPlus => MeasureTag::WPlus,
            SigmaModel::WMinus | SigmaModel::Drawdown => MeasureTag::WMinus,
            SigmaModel::Bessel { delta, eps } => MeasureTag::Bessel { delta: *delta, eps: *eps },
        }
    }

    fn carrier(
        &self,
        rng: &mut rand_chacha::ChaCha8Rng,
        grid: &TimeGrid,
    ) -> Result<ClassSigmaPath, EngineError> {
        match self {
            SigmaModel::AbsBm => Ok(build_abs_bm_levy_with(rng, grid)),
            SigmaModel::WPlus | SigmaModel::WMinus => Ok(build_signed_bm_levy_with(rng, grid)),
            SigmaModel::Drawdown => Ok(build_drawdown_with(rng, grid, 0.0)),
            SigmaModel::Bessel { delta, eps } => {
                let radial = simulate_bessel_with(rng, grid, *delta, 0.0)?;
                build_bessel_scale(&radial, 1.0 - 0.5 * delta, *eps)
            }
        }
    }

    /// The submartingale value at a grid index of a carrier path.
    fn value(&self, path: &ClassSigmaPath, i: usize) -> f64 {
        match self {
            SigmaModel::WPlus => path.signed.as_ref().expect("signed carrier")[i].max(0.0),
            SigmaModel::WMinus => (-path.signed.as_ref().expect("signed carrier")[i]).max(0.0),
            _ => path.x[i],
        }
    }

    /// Extra clock allowance for models whose increasing part is itself
    /// estimated rather than constructed exactly.
    fn clock_allowance(&self, scale: f64) -> f64 {
        match self {
            // calibrated against the dimension-one case, where the residual
            // clock can be checked against the exact local time
            SigmaModel::Bessel { .. } => 0.12 * scale.abs().max(0.1),
            _ => 0.0,
        }
    }
}

/// Test outcome. `Inconclusive` is reserved for reports whose bias budget
/// dominates the comparison; it is never an alias for failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One identity check: two sides, their distance in standard errors, the
/// combined deterministic allowance, and the verdict.
#[derive(Debug, Clone)]
pub struct IdentityReport {
    pub id: String,
    pub lhs: EstimatorResult,
    pub rhs: EstimatorResult,
    pub z: f64,
    /// Combined bias budget of both sides.
    pub bias_budget: f64,
    pub n: u64,
    pub seed: u64,
    pub verdict: Verdict,
}

fn z_statistic(delta: f64, pooled: f64) -> f64 {
    if pooled == 0.0 {
        if delta == 0.0 {
            0.0
        } else {
            f64::INFINITY * delta.signum()
        }
    } else {
        delta / pooled
    }
}

fn classify(lhs: &EstimatorResult, rhs: &EstimatorResult, z_crit: f64) -> (f64, f64, Verdict) {
    let delta = lhs.mean - rhs.mean;
    let pooled = (lhs.stderr * lhs.stderr + rhs.stderr * rhs.stderr).sqrt();
    let budget = lhs.bias_budget + rhs.bias_budget;
    let z = z_statistic(delta, pooled);
    let scale = lhs.mean.abs().max(rhs.mean.abs()).max(0.1);
    let verdict = if budget > 0.5 * scale {
        // allowance swamps the signal; agreement here proves nothing
        Verdict::Inconclusive
    } else if delta.abs() > budget + z_crit * pooled {
        Verdict::Fail
    } else if z.abs() <= z_crit {
        Verdict::Pass
    } else {
        Verdict::Inconclusive
    };
    (z, budget, verdict)
}

pub(crate) fn report(id: &str, lhs: EstimatorResult, rhs: EstimatorResult, cfg: &VerifyConfig) -> IdentityReport {
    let (z, budget, verdict) = classify(&lhs, &rhs, cfg.z_crit);
    IdentityReport {
        id: id.to_string(),
        lhs,
        rhs,
        z,
        bias_budget: budget,
        n: cfg.n,
        seed: cfg.seed,
        verdict,
    }
}

/// Paired design: the identity holds per sample, so the z-statistic is the
/// mean difference over its own standard error.
pub(crate) fn report_paired(
    id: &str,
    lhs: EstimatorResult,
    rhs: EstimatorResult,
    diff: EstimatorResult,
    cfg: &VerifyConfig,
) -> IdentityReport {
    let budget = lhs.bias_budget + rhs.bias_budget;
    let z = z_statistic(diff.mean, diff.stderr);
    let scale = lhs.mean.abs().max(rhs.mean.abs()).max(0.1);
    let verdict = if budget > 0.5 * scale {
        Verdict::Inconclusive
    } else if diff.mean.abs() > budget + cfg.z_crit * diff.stderr {
        Verdict::Fail
    } else if z.abs() <= cfg.z_crit {
        Verdict::Pass
    } else {
        Verdict::Inconclusive
    };
    IdentityReport {
        id: id.to_string(),
        lhs,
        rhs,
        z,
        bias_budget: budget,
        n: cfg.n,
        seed: cfg.seed,
        verdict,
    }
}

fn seeds(cfg: &VerifyConfig, id: &str) -> (u64, u64) {
    let base = derive_seed(cfg.seed, role_id(id));
    (derive_seed(base, role_id("lhs")), derive_seed(base, role_id("rhs")))
}

fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let idx = ((q * v.len() as f64).ceil() as usize).saturating_sub(1).min(v.len() - 1);
    v[idx]
}

/// Allowance for reading a spliced path through a value kernel: the splice
/// lands on a grid point while the true zero falls inside the interval, so
/// coordinate readings near the splice shift by up to one step of path
/// motion. Constant kernels read nothing and need none.
fn splice_allowance(f: &CylinderFunctional, step: f64) -> f64 {
    if f.times().is_empty() {
        0.0
    } else {
        0.25 * f.bound() * step.sqrt()
    }
}

struct MasterRhs {
    result: EstimatorResult,
    /// Truncation level: high quantile of the carrier clock at the stop.
    r: f64,
    /// Certified truncation remainder (functional bound folded in).
    remainder: f64,
}

/// P-side of the conditioned-measure identity plus the data the truncated
/// left side needs: the clock quantile used as the truncation level and the
/// measured remainder bound `B_F * E[X_T 1{A_T > R}]`, which equals the
/// truncated mass exactly by the identity applied to the tail indicator.
fn master_rhs(
    model: SigmaModel,
    f: &CylinderFunctional,
    rule: &StoppingRule,
    grid: &TimeGrid,
    n: u64,
    seed: u64,
    f_bound: f64,
) -> Result<MasterRhs, EngineError> {
    let rows: Vec<Result<(f64, f64, f64), EngineError>> = mc_collect(n, seed, |_, rng| {
        let p = model.carrier(rng, grid)?;
        let t_idx = stop_index(&p, rule)?;
        let fv = eval_cylinder(&p, f, t_idx)?;
        Ok((fv * model.value(&p, t_idx), p.a[t_idx], model.value(&p, t_idx)))
    });
    let mut values = Vec::with_capacity(rows.len());
    let mut clocks = Vec::with_capacity(rows.len());
    let mut xs = Vec::with_capacity(rows.len());
    for row in rows {
        let (v, a, x) = row?;
        values.push(v);
        clocks.push(a);
        xs.push(x);
    }
    let r = quantile(&clocks, 0.999).max(1e-6);
    let tail: f64 = clocks
        .iter()
        .zip(&xs)
        .map(|(a, x)| if *a > r { *x } else { 0.0 })
        .sum::<f64>()
        / n as f64;
    Ok(MasterRhs {
        result: EstimatorResult::from_values(&values, 0.0),
        r,
        remainder: f_bound * tail,
    })
}

/// Conditioned-measure side of the master identity, restricted to samples
/// whose splice happens by the stopping time and truncated at clock level
/// `r` through the uniform proposal. With `drop_indicator` the restriction
/// is removed; the estimator is then deliberately wrong and serves as the
/// power check for the whole scheme.
fn master_lhs(
    model: SigmaModel,
    f: &CylinderFunctional,
    rule: &StoppingRule,
    grid: &TimeGrid,
    n: u64,
    seed: u64,
    r: f64,
    bias: f64,
    drop_indicator: bool,
) -> Result<EstimatorResult, EngineError> {
    let tag = model.tag();
    let proposal = LevelProposal::Uniform { upper: r };
    let probe = sample_window(tag, &mut sample_stream(seed, 0), grid, &proposal)?;
    let probe_idx = stop_index(&probe.path, rule)?;
    eval_cylinder(&probe.path, f, probe_idx)?;
    Ok(estimate(n, seed, bias, |_, rng| {
        let s = sample_window(tag, rng, grid, &proposal).expect("inputs validated");
        let t_idx = stop_index(&s.path, rule).expect("inputs validated");
        let in_window = match s.splice_index {
            Some(k) => k <= t_idx,
            None => false,
        };
        if in_window || drop_indicator {
            s.weight * eval_cylinder(&s.path, f, t_idx).expect("inputs validated")
        } else {
            0.0
        }
    }))
}

fn master_report(
    id: &str,
    model: SigmaModel,
    f: &CylinderFunctional,
    rule: &StoppingRule,
    cfg: &VerifyConfig,
    drop_indicator: bool,
) -> Result<IdentityReport, EngineError> {
    cfg.validate()?;
    rule.validate()?;
    let grid = cfg.window(rule.horizon_bound())?;
    let (lhs_seed, rhs_seed) = seeds(cfg, id);
    let rhs = master_rhs(model, f, rule, &grid, cfg.n, rhs_seed, f.bound())?;
    let bias = rhs.remainder
        + splice_allowance(f, cfg.step)
        + model.clock_allowance(rhs.result.mean);
    let lhs = master_lhs(model, f, rule, &grid, cfg.n, lhs_seed, rhs.r, bias, drop_indicator)?;
    Ok(report(id, lhs, rhs.result, cfg))
}

/// Conditioned measure against the plain expectation at a fixed time:
/// integral of `F 1{last zero <= t}` under the conditioned measure equals
/// `E[F_t X_t]` under the base probability.
pub fn verify_master(
    id: &str,
    model: SigmaModel,
    f: &CylinderFunctional,
    t: f64,
    cfg: &VerifyConfig,
) -> Result<IdentityReport, EngineError> {
    let rule = StoppingRule::Deterministic { time: t };
    match model {
        SigmaModel::Drawdown => drawdown_master(id, f, t, cfg),
        _ => master_report(id, model, f, &rule, cfg, false),
    }
}

/// Same comparison with the window restriction removed on the conditioned
/// side. A correct engine must fail this loudly; it exists to demonstrate
/// that the suite has the power to reject a wrong identity.
pub fn verify_master_mutated(
    id: &str,
    model: SigmaModel,
    f: &CylinderFunctional,
    t: f64,
    cfg: &VerifyConfig,
) -> Result<IdentityReport, EngineError> {
    let rule = StoppingRule::Deterministic { time: t };
    master_report(id, model, f, &rule, cfg, true)
}

/// Master identity at a bounded stopping time, evaluated per path on both
/// sides.
pub fn verify_stopping(
    id: &str,
    model: SigmaModel,
    f: &CylinderFunctional,
    rule: &StoppingRule,
    cfg: &VerifyConfig,
) -> Result<IdentityReport, EngineError> {
    match model {
        SigmaModel::Drawdown => Err(EngineError::Unsupported(
            "stopping-time checks for the drawdown model are not wired".into(),
        )),
        _ => master_report(id, model, f, rule, cfg, false),
    }
}

/// Conditioned drawdown measure tested through the negative-part sampler.
///
/// The drawdown's zero set is the set of times the canonical path sits at
/// its running maximum, so the window event is `{no new maximum after t}`.
/// A sample spliced inside the window settles the event by construction:
/// the tail stays negative, the indicator is one. An unspliced window
/// carries the base path, and the event is completed in closed form: the
/// leftover excursions above the current maximum `m` arrive at rate
/// `1/(2m)` per unit of remaining symmetric local time, giving the exact
/// survival probability for the conditioned future. Truncation restricts
/// to final maxima at most `r`; the remainder is certified on the plain
/// side through the identity with the tail indicator.
fn drawdown_master(
    id: &str,
    f: &CylinderFunctional,
    t: f64,
    cfg: &VerifyConfig,
) -> Result<IdentityReport, EngineError> {
    cfg.validate()?;
    let grid = cfg.window(t)?;
    let (lhs_seed, rhs_seed) = seeds(cfg, id);
    let rule = StoppingRule::Deterministic { time: t };
    let rhs = master_rhs(SigmaModel::Drawdown, f, &rule, &grid, cfg.n, rhs_seed, f.bound())?;

    let proposal = LevelProposal::Exponential { rate: 0.5 / rhs.r };
    let at = grid.n_points() - 1;
    let probe = sample_window(MeasureTag::WMinus, &mut sample_stream(lhs_seed, 0), &grid, &proposal)?;
    eval_cylinder(&probe.path, f, at)?;
    // maxima on zero-marked intervals fall back to endpoints; the gap this
    // opens in the completion is covered by a per-step allowance verified
    // against step halving
    let bias = rhs.remainder + splice_allowance(f, cfg.step) + 2.0 * cfg.step;
    let lhs = estimate(cfg.n, lhs_seed, bias, |_, rng| {
        let s = sample_window(MeasureTag::WMinus, rng, &grid, &proposal).expect("inputs validated");
        let m = s.path.refined_running_max(at);
        if m > rhs.r {
            return 0.0;
        }
        let fv = eval_cylinder(&s.path, f, at).expect("inputs validated");
        match s.splice_index {
            // spliced: the path never returns to its maximum, the last
            // maximum time is before the splice, inside the window
            Some(_) => s.weight * fv,
            None => {
                let y = s.path.signed.as_ref().expect("signed carrier")[at];
                let remaining = 2.0 * (s.level - s.path.a[at]);
                s.weight * fv * sup_survival_probability(y, remaining, m)
            }
        }
    });
    Ok(report(id, lhs, rhs.result, cfg))
}

/// Finite-measure projection identity for the stopped reflected model,
/// paired on identical paths: `F_T X_T` against `F_T X_h 1{g <= T}` with
/// `h` the horizon playing the role of the terminal time.
pub fn verify_class_d(
    id: &str,
    f: &CylinderFunctional,
    rule: &StoppingRule,
    cfg: &VerifyConfig,
) -> Result<IdentityReport, EngineError> {
    cfg.validate()?;
    rule.validate()?;
    if rule.horizon_bound() > cfg.horizon + 1e-9 {
        return Err(EngineError::config("stopping rule exceeds the horizon"));
    }
    let grid = cfg.grid()?;
    let base = derive_seed(cfg.seed, role_id(id));
    let last = grid.n_points() - 1;
    let rows: Vec<Result<(f64, f64), EngineError>> = mc_collect(cfg.n, base, |_, rng| {
        let p = build_abs_bm_levy_with(rng, &grid);
        let t_idx = stop_index(&p, rule)?;
        let fv = eval_cylinder(&p, f, t_idx)?;
        let g = p.last_zero(last).unwrap_or(0.0);
        let ind = if g <= grid.time(t_idx) + 1e-12 { 1.0 } else { 0.0 };
        Ok((fv * p.x[t_idx], fv * p.x[last] * ind))
    });
    let mut pairs = Vec::with_capacity(rows.len());
    for row in rows {
        pairs.push(row?);
    }
    let (lhs, rhs, diff) = crate::estimate::paired_results(&pairs);
    Ok(report_paired(id, lhs, rhs, diff, cfg))
}

/// The two one-sided conditioned estimates and the plain signed side of the
/// decomposition identity at a stopping time.
pub fn doob_sides(
    f: &CylinderFunctional,
    rule: &StoppingRule,
    cfg: &VerifyConfig,
) -> Result<(EstimatorResult, EstimatorResult, EstimatorResult), EngineError> {
    cfg.validate()?;
    rule.validate()?;
    let grid = cfg.window(rule.horizon_bound())?;
    let rhs_seed = derive_seed(cfg.seed, role_id("doob:rhs"));
    let rows: Vec<Result<(f64, f64, f64, f64), EngineError>> =
        mc_collect(cfg.n, rhs_seed, |_, rng| {
            let p = build_signed_bm_levy_with(rng, &grid);
            let t_idx = stop_index(&p, rule)?;
            let fv = eval_cylinder(&p, f, t_idx)?;
            let y = p.signed.as_ref().expect("signed carrier")[t_idx];
            Ok((fv * y, p.a[t_idx], y.max(0.0), (-y).max(0.0)))
        });
    let mut values = Vec::with_capacity(rows.len());
    let mut clocks = Vec::with_capacity(rows.len());
    let mut tails = (0.0f64, 0.0f64);
    let mut parsed = Vec::with_capacity(rows.len());
    for row in rows {
        parsed.push(row?);
    }
    for (v, a, _, _) in &parsed {
        values.push(*v);
        clocks.push(*a);
    }
    let r = quantile(&clocks, 0.999).max(1e-6);
    for (_, a, plus, minus) in &parsed {
        if *a > r {
            tails.0 += plus;
            tails.1 += minus;
        }
    }
    let rhs = EstimatorResult::from_values(&values, 0.0);
    let allowance = splice_allowance(f, cfg.step);
    let bias_plus = f.bound() * tails.0 / cfg.n as f64 + allowance;
    let bias_minus = f.bound() * tails.1 / cfg.n as f64 + allowance;

    let one_side = |model: SigmaModel, seed_role: &str, bias: f64| {
        master_lhs(
            model,
            f,
            rule,
            &grid,
            cfg.n,
            derive_seed(cfg.seed, role_id(seed_role)),
            r,
            bias,
            false,
        )
    };
    let plus = one_side(SigmaModel::WPlus, "doob:plus", bias_plus)?;
    let minus = one_side(SigmaModel::WMinus, "doob:minus", bias_minus)?;
    Ok((plus, minus, rhs))
}

/// Signed decomposition identity: the difference of the two one-sided
/// conditioned masses equals the plain expectation of `F_T` times the
/// signed coordinate.
pub fn verify_doob(
    id: &str,
    f: &CylinderFunctional,
    rule: &StoppingRule,
    cfg: &VerifyConfig,
) -> Result<IdentityReport, EngineError> {
    let (plus, minus, rhs) = doob_sides(f, rule, cfg)?;
    let lhs = EstimatorResult {
        mean: plus.mean - minus.mean,
        stderr: (plus.stderr * plus.stderr + minus.stderr * minus.stderr).sqrt(),
        n: cfg.n,
        bias_budget: plus.bias_budget + minus.bias_budget,
    };
    Ok(report(id, lhs, rhs, cfg))
}

fn density_proposal(f: &IntegrableTestFunction) -> LevelProposal {
    match f {
        IntegrableTestFunction::Exponential { rate } => LevelProposal::Exponential { rate: *rate },
        IntegrableTestFunction::IndicatorInterval { upper } => {
            LevelProposal::Uniform { upper: *upper }
        }
        IntegrableTestFunction::PiecewiseConstant { breaks, .. } => {
            LevelProposal::Uniform { upper: *breaks.last().expect("validated breaks") }
        }
    }
}

/// Density-weighted identity: the conditioned measure weighted by an
/// integrable function of the terminal clock has total mass `G(0)` and
/// integrates `F_t` to the plain expectation of `F_t (G(A_t) + f(A_t) X_t)`.
/// No indicator and no truncation: the weight makes the left side finite.
pub fn verify_nf_density(
    id: &str,
    model: SigmaModel,
    f: &IntegrableTestFunction,
    hh: &CylinderFunctional,
    t: f64,
    cfg: &VerifyConfig,
) -> Result<IdentityReport, EngineError> {
    cfg.validate()?;
    f.validate()?;
    let grid = cfg.window(t)?;
    let (lhs_seed, rhs_seed) = seeds(cfg, id);
    let proposal = density_proposal(f);
    let lhs_raw = q_integral(model.tag(), hh, f, &proposal, cfg.n, lhs_seed, &grid)?;
    let lhs = lhs_raw
        .with_bias(splice_allowance(hh, cfg.step) + model.clock_allowance(lhs_raw.mean));

    let last = grid.n_points() - 1;
    let rows: Vec<Result<f64, EngineError>> = mc_collect(cfg.n, rhs_seed, |_, rng| {
        let p = model.carrier(rng, &grid)?;
        let fv = eval_cylinder(&p, hh, last)?;
        let a = p.a[last];
        Ok(fv * (f.tail_integral(a) + f.f(a) * model.value(&p, last)))
    });
    let mut values = Vec::with_capacity(rows.len());
    for row in rows {
        values.push(row?);
    }
    let rhs = EstimatorResult::from_values(&values, 0.0);
    Ok(report(id, lhs, rhs, cfg))
}

/// Image of the terminal clock for a recurrent model started on its zero
/// set: Lebesgue measure. Weighted total masses reduce to `G(0)` exactly.
pub fn verify_ainf_image_recurrent(
    id: &str,
    model: SigmaModel,
    f: &IntegrableTestFunction,
    cfg: &VerifyConfig,
) -> Result<IdentityReport, EngineError> {
    cfg.validate()?;
    f.validate()?;
    let grid = cfg.grid()?;
    let (lhs_seed, _) = seeds(cfg, id);
    let proposal = density_proposal(f);
    let one = CylinderFunctional::one();
    let lhs_raw = q_integral(model.tag(), &one, f, &proposal, cfg.n, lhs_seed, &grid)?;
    let lhs = lhs_raw.with_bias(model.clock_allowance(lhs_raw.mean));
    let rhs = EstimatorResult::exact(f.total_mass());
    Ok(report(id, lhs, rhs, cfg))
}

/// Φ through the complementary error function.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

fn simpson<G: Fn(f64) -> f64>(g: G, lo: f64, hi: f64, panels: usize) -> f64 {
    let m = panels * 2;
    let h = (hi - lo) / m as f64;
    let mut acc = g(lo) + g(hi);
    for k in 1..m {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * g(lo + k as f64 * h);
    }
    acc * h / 3.0
}

/// `integral of f(u) P[L > u] du` for `L ~ |N(0,1)|`: the image of the
/// terminal clock for the stopped reflected model.
fn class_d_image_integral(f: &IntegrableTestFunction) -> f64 {
    let tail = |u: f64| libm::erfc(u / std::f64::consts::SQRT_2);
    match f {
        IntegrableTestFunction::Exponential { rate } => {
            simpson(|u| (-rate * u).exp() * tail(u), 0.0, 10.0 + 40.0 / rate, 40_000)
        }
        IntegrableTestFunction::IndicatorInterval { upper } => {
            simpson(&tail, 0.0, *upper, 40_000)
        }
        IntegrableTestFunction::PiecewiseConstant { breaks, levels } => {
            let mut total = 0.0;
            for (j, level) in levels.iter().enumerate() {
                total += level * simpson(&tail, breaks[j], breaks[j + 1], 8_000);
            }
            total
        }
    }
}

/// Image of the terminal clock for the stopped reflected model: compares
/// the reweighted estimate of `f` at the terminal clock against the
/// quadrature of `f` times the known clock tail probability.
pub fn verify_ainf_image_class_d(
    id: &str,
    f: &IntegrableTestFunction,
    cfg: &VerifyConfig,
) -> Result<IdentityReport, EngineError> {
    cfg.validate()?;
    f.validate()?;
    let grid = cfg.grid()?;
    let (lhs_seed, _) = seeds(cfg, id);
    let lhs = crate::qmeasure::reweight_class_d(cfg.n, lhs_seed, &grid, |p| {
        f.f(*p.a.last().expect("nonempty grid"))
    });
    let rhs = EstimatorResult::exact(class_d_image_integral(f));
    Ok(report(id, lhs, rhs, cfg))
}

/// Constancy of the weighted transform at bounded grid stopping times: the
/// sampled mean of `G(A_T) + f(A_T) X_T` against its exact initial value.
/// Grid stopping rules make the comparison free of discretization bias.
pub fn verify_martingale_constancy(
    id_prefix: &str,
    model: SigmaModel,
    f: &IntegrableTestFunction,
    rules: &[(&str, StoppingRule)],
    cfg: &VerifyConfig,
) -> Result<Vec<IdentityReport>, EngineError> {
    cfg.validate()?;
    f.validate()?;
    let grid = cfg.grid()?;
    let rhs = EstimatorResult::exact(f.total_mass());
    let mut out = Vec::with_capacity(rules.len());
    for (suffix, rule) in rules {
        rule.validate()?;
        if rule.horizon_bound() > cfg.horizon + 1e-9 {
            return Err(EngineError::config("stopping rule exceeds the horizon"));
        }
        let id = format!("{id_prefix}_{suffix}");
        let seed = derive_seed(cfg.seed, role_id(&id));
        let mut probe_rng = sample_stream(seed, 0);
        let probe = model.carrier(&mut probe_rng, &grid)?;
        stop_index(&probe, rule)?;
        let lhs = estimate(cfg.n, seed, 0.0, |_, rng| {
            let p = model.carrier(rng, &grid).expect("inputs validated");
            let t_idx = stop_index(&p, rule).expect("inputs validated");
            let a = p.a[t_idx];
            f.tail_integral(a) + f.f(a) * model.value(&p, t_idx)
        });
        out.push(report(&id, lhs, rhs, cfg));
    }
    Ok(out)
}

/// Last-zero age identity: the conditioned base measure integrates a
/// zero-set functional restricted to the window to the scaled plain
/// expectation of the functional times the age power. The exponent one
/// half rides on the exact reflected base; other exponents use the Bessel
/// base and inherit its clock allowance.
pub fn verify_azema(
    id: &str,
    alpha: f64,
    f: &CylinderFunctional,
    t: f64,
    cfg: &VerifyConfig,
) -> Result<IdentityReport, EngineError> {
    cfg.validate()?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(EngineError::config(format!("age exponent must lie in (0, 1), got {alpha}")));
    }
    if f.scope() != Scope::ZerosFiltration {
        return Err(EngineError::config(
            "age identities compare zero-set functionals; the kernel must not read values",
        ));
    }
    let model = if (alpha - 0.5).abs() < 1e-12 {
        SigmaModel::AbsBm
    } else {
        SigmaModel::Bessel { delta: 2.0 * (1.0 - alpha), eps: 3.0 * cfg.step.sqrt() }
    };
    let grid = cfg.window(t)?;
    let (lhs_seed, rhs_seed) = seeds(cfg, id);
    let scale = crate::sigma::age_clock_scale(alpha);
    let last = grid.n_points() - 1;

    // the plain side runs on the base carrier: a zero-set functional reads
    // the same data there, and the carrier clock gives the truncation level
    let rows: Vec<Result<(f64, f64, f64), EngineError>> =
        mc_collect(cfg.n, rhs_seed, |_, rng| {
            let p = model.carrier(rng, &grid)?;
            let fv = eval_cylinder(&p, f, last)?;
            let g = p.last_zero(last).unwrap_or(0.0);
            let age = (grid.time(last) - g).max(0.0).powf(alpha);
            Ok((scale * fv * age, p.a[last], p.x[last]))
        });
    let mut values = Vec::with_capacity(rows.len());
    let mut clocks = Vec::with_capacity(rows.len());
    let mut xs = Vec::with_capacity(rows.len());
    for row in rows {
        let (v, a, x) = row?;
        values.push(v);
        clocks.push(a);
        xs.push(x);
    }
    let rhs = EstimatorResult::from_values(&values, 0.0);
    let r = quantile(&clocks, 0.999).max(1e-6);
    let remainder: f64 = clocks
        .iter()
        .zip(&xs)
        .map(|(a, x)| if *a > r { *x } else { 0.0 })
        .sum::<f64>()
        / cfg.n as f64;
    let bias = f.bound() * remainder + model.clock_allowance(rhs.mean);
    let rule = StoppingRule::Deterministic { time: t };
    let lhs = master_lhs(model, f, &rule, &grid, cfg.n, lhs_seed, r, bias, false)?;
    Ok(report(id, lhs, rhs, cfg))
}

/// Regression pin for the age-identity constant: ordinary least squares of
/// the coordinate at the horizon on the square root of the age, with
/// intercept. Slope and its standard error against the exact constant.
pub fn azema_slope(id: &str, cfg: &VerifyConfig) -> Result<IdentityReport, EngineError> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let seed = derive_seed(cfg.seed, role_id(id));
    let last = grid.n_points() - 1;
    let pairs: Vec<(f64, f64)> = mc_collect(cfg.n, seed, |_, rng| {
        let p = build_abs_bm_levy_with(rng, &grid);
        let g = p.last_zero(last).unwrap_or(0.0);
        ((grid.horizon() - g).max(0.0).sqrt(), p.x[last])
    });
    let n = pairs.len() as f64;
    let (mut su, mut sv) = (0.0, 0.0);
    for (u, v) in &pairs {
        su += u;
        sv += v;
    }
    let (ub, vb) = (su / n, sv / n);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (u, v) in &pairs {
        sxx += (u - ub) * (u - ub);
        sxy += (u - ub) * (v - vb);
    }
    let slope = sxy / sxx;
    let intercept = vb - slope * ub;
    let rss: f64 = pairs.iter().map(|(u, v)| {
        let e = v - intercept - slope * u;
        e * e
    }).sum();
    let se = (rss / (n - 2.0) / sxx).sqrt();
    let lhs = EstimatorResult { mean: slope, stderr: se, n: pairs.len() as u64, bias_budget: 0.0 };
    let rhs = EstimatorResult::exact(crate::sigma::age_clock_scale(0.5));
    Ok(report(id, lhs, rhs, cfg))
}

/// Mass additivity of the signed decomposition: the two-branch conditioned
/// mass against the sum of independently estimated one-sided masses.
pub fn w_decomposition(id: &str, t: f64, cfg: &VerifyConfig) -> Result<IdentityReport, EngineError> {
    cfg.validate()?;
    let grid = cfg.window(t)?;
    let one = CylinderFunctional::one();
    let rule = StoppingRule::Deterministic { time: t };
    let rhs_probe_seed = derive_seed(cfg.seed, role_id("wdec:clock"));
    let clocks: Vec<f64> = mc_collect(cfg.n.min(20_000), rhs_probe_seed, |_, rng| {
        let p = build_signed_bm_levy_with(rng, &grid);
        *p.a.last().expect("nonempty grid")
    });
    let r = quantile(&clocks, 0.999).max(1e-6);
    let side = |model: SigmaModel, role: &str| {
        master_lhs(
            model,
            &one,
            &rule,
            &grid,
            cfg.n,
            derive_seed(cfg.seed, role_id(role)),
            r,
            0.0,
            false,
        )
    };
    // the two-branch tag folds its sign coin into a doubled weight
    let both = {
        let lhs_seed = derive_seed(cfg.seed, role_id("wdec:both"));
        let proposal = LevelProposal::Uniform { upper: r };
        let probe = sample_window(MeasureTag::W, &mut sample_stream(lhs_seed, 0), &grid, &proposal)?;
        let _ = probe;
        estimate(cfg.n, lhs_seed, 0.0, |_, rng| {
            let s = sample_window(MeasureTag::W, rng, &grid, &proposal).expect("inputs validated");
            match s.splice_index {
                Some(_) => s.weight,
                None => 0.0,
            }
        })
    };
    let plus = side(SigmaModel::WPlus, "wdec:plus")?;
    let minus = side(SigmaModel::WMinus, "wdec:minus")?;
    let rhs = EstimatorResult {
        mean: plus.mean + minus.mean,
        stderr: (plus.stderr * plus.stderr + minus.stderr * minus.stderr).sqrt(),
        n: cfg.n,
        bias_budget: 0.0,
    };
    Ok(report(id, both, rhs, cfg))
}
