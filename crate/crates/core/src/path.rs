//! Path simulation for the base processes.
//!
//! Brownian kinds carry per-interval extrema drawn from the exact bridge
//! laws conditioned on the endpoint pair, so running maxima and level
//! crossings can be resolved below grid resolution without changing the
//! endpoint joint law. Bessel kinds use the exact squared-Bessel transition
//! (a Poisson mixture of gamma variables), valid for any step size.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};

use crate::bridge::{bridge_max_from_u, bridge_min_from_u, open_unit};
use crate::error::EngineError;
use crate::grid::TimeGrid;
use crate::rng::sample_stream;

/// Law of a simulated path.
#[derive(Debug, Clone, PartialEq)]
pub enum ProcessSpec {
    BrownianMotion { x0: f64 },
    /// Geometric martingale `x0 * exp(B_t - t/2)`, unit volatility.
    ExpMartingale { x0: f64 },
    /// Bessel process of dimension `delta` in (0, 2).
    Bessel { delta: f64, x0: f64 },
    Bessel3 { x0: f64 },
    /// Bessel(3) reflected to the negative half-line.
    NegBessel3 { x0: f64 },
    /// Output of the measure samplers; carries its splice time. Not
    /// directly simulable or extendable.
    Spliced { splice_time: f64 },
}

impl ProcessSpec {
    /// Brownian kinds carry exact per-interval extrema.
    pub fn is_brownian(&self) -> bool {
        matches!(self, ProcessSpec::BrownianMotion { .. } | ProcessSpec::ExpMartingale { .. })
    }
}

/// A simulated path on a uniform grid.
///
/// `values[i]` is the state at `grid.time(i)`. For Brownian kinds,
/// `interval_max[i]` and `interval_min[i]` are draws of the path extrema
/// over `(time(i), time(i+1))` given the endpoints; the two are marginally
/// exact and conditionally independent across intervals, matching the joint
/// law of extrema over disjoint intervals.
#[derive(Debug, Clone)]
pub struct PathSample {
    pub spec: ProcessSpec,
    pub grid: TimeGrid,
    pub seed: u64,
    pub values: Vec<f64>,
    pub interval_max: Option<Vec<f64>>,
    pub interval_min: Option<Vec<f64>>,
}

impl PathSample {
    pub fn horizon(&self) -> f64 {
        self.grid.horizon()
    }

    pub fn last_value(&self) -> f64 {
        *self.values.last().expect("paths have at least one point")
    }

    pub fn value_at(&self, t: f64) -> Result<f64, EngineError> {
        Ok(self.values[self.grid.index_of(t)?])
    }
}

/// Brownian path with extrema; per interval the stream is consumed in the
/// fixed order increment, max uniform, min uniform.
pub fn simulate_bm_with(rng: &mut ChaCha8Rng, grid: &TimeGrid, x0: f64) -> PathSample {
    let step = grid.step();
    let sqrt_step = step.sqrt();
    let n = grid.n_steps();
    let mut values = Vec::with_capacity(n + 1);
    let mut hi = Vec::with_capacity(n);
    let mut lo = Vec::with_capacity(n);
    values.push(x0);
    let mut a = x0;
    for _ in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        let b = a + sqrt_step * z;
        hi.push(bridge_max_from_u(a, b, step, open_unit(rng)));
        lo.push(bridge_min_from_u(a, b, step, open_unit(rng)));
        values.push(b);
        a = b;
    }
    PathSample {
        spec: ProcessSpec::BrownianMotion { x0 },
        grid: grid.clone(),
        seed: 0,
        values,
        interval_max: Some(hi),
        interval_min: Some(lo),
    }
}

/// Brownian motion from `x0` on the given grid.
pub fn simulate_bm(seed: u64, grid: &TimeGrid, x0: f64) -> PathSample {
    let mut path = simulate_bm_with(&mut sample_stream(seed, 0), grid, x0);
    path.seed = seed;
    path
}

/// Exponential martingale `x0 * exp(B_t - t/2)` driven by the Brownian path
/// of the same stream; extrema come from the bridge law of the log path,
/// which the drift does not affect.
pub fn simulate_exp_martingale_with(
    rng: &mut ChaCha8Rng,
    grid: &TimeGrid,
    x0: f64,
) -> Result<PathSample, EngineError> {
    if !(x0.is_finite() && x0 > 0.0) {
        return Err(EngineError::config(format!(
            "exponential martingale needs x0 > 0, got {x0}"
        )));
    }
    let step = grid.step();
    let sqrt_step = step.sqrt();
    let n = grid.n_steps();
    let mut values = Vec::with_capacity(n + 1);
    let mut hi = Vec::with_capacity(n);
    let mut lo = Vec::with_capacity(n);
    values.push(x0);
    let mut b = 0.0f64;
    for i in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        let b_next = b + sqrt_step * z;
        let v_prev = *values.last().unwrap();
        let v_next = x0 * (b_next - 0.5 * grid.time(i + 1)).exp();
        let (la, lb) = (v_prev.ln(), v_next.ln());
        hi.push(bridge_max_from_u(la, lb, step, open_unit(rng)).exp());
        lo.push(bridge_min_from_u(la, lb, step, open_unit(rng)).exp());
        values.push(v_next);
        b = b_next;
    }
    Ok(PathSample {
        spec: ProcessSpec::ExpMartingale { x0 },
        grid: grid.clone(),
        seed: 0,
        values,
        interval_max: Some(hi),
        interval_min: Some(lo),
    })
}

pub fn simulate_exp_martingale(
    seed: u64,
    grid: &TimeGrid,
    x0: f64,
) -> Result<PathSample, EngineError> {
    let mut path = simulate_exp_martingale_with(&mut sample_stream(seed, 0), grid, x0)?;
    path.seed = seed;
    Ok(path)
}

/// One exact squared-Bessel transition of dimension `delta` over `dt`:
/// given the squared state `ysq`, the next squared state is
/// `dt * chi'^2_delta(ysq / dt)`, sampled as a Poisson(ysq / (2 dt)) mixture
/// of Gamma((delta + 2N)/2, 2) variables.
pub fn squared_bessel_step<R: Rng + ?Sized>(rng: &mut R, ysq: f64, delta: f64, dt: f64) -> f64 {
    let half_lambda = 0.5 * ysq / dt;
    // below ~1e-16 the library's inversion loop sees exp(-lambda) == 1 and
    // yields -1; a mean this small cannot produce a jump at f64 resolution,
    // so the zero branch is the correct draw
    let n = if half_lambda > 1e-12 {
        Poisson::new(half_lambda).expect("positive Poisson mean").sample(rng)
    } else {
        0.0
    };
    let shape = 0.5 * delta + n;
    dt * Gamma::new(shape, 2.0).expect("positive gamma shape").sample(rng)
}

fn bessel_values<R: Rng + ?Sized>(
    rng: &mut R,
    grid: &TimeGrid,
    delta: f64,
    x0: f64,
) -> Vec<f64> {
    let step = grid.step();
    let mut values = Vec::with_capacity(grid.n_points());
    values.push(x0);
    let mut ysq = x0 * x0;
    for _ in 0..grid.n_steps() {
        ysq = squared_bessel_step(rng, ysq, delta, step);
        values.push(ysq.sqrt());
    }
    values
}

fn validate_bessel_params(delta: f64, x0: f64) -> Result<(), EngineError> {
    let in_low_range = delta > 0.0 && delta < 2.0;
    if !(in_low_range || delta == 3.0) {
        return Err(EngineError::config(format!(
            "Bessel dimension must lie in (0, 2) or equal 3, got {delta}"
        )));
    }
    if !(x0.is_finite() && x0 >= 0.0) {
        return Err(EngineError::config(format!("Bessel start must be nonnegative, got {x0}")));
    }
    Ok(())
}

pub fn simulate_bessel_with(
    rng: &mut ChaCha8Rng,
    grid: &TimeGrid,
    delta: f64,
    x0: f64,
) -> Result<PathSample, EngineError> {
    validate_bessel_params(delta, x0)?;
    let values = bessel_values(rng, grid, delta, x0);
    let spec = if delta == 3.0 {
        ProcessSpec::Bessel3 { x0 }
    } else {
        ProcessSpec::Bessel { delta, x0 }
    };
    Ok(PathSample { spec, grid: grid.clone(), seed: 0, values, interval_max: None, interval_min: None })
}

/// Bessel process of dimension `delta` in (0, 2), or Bessel(3) for
/// `delta == 3`, via exact squared-Bessel transitions.
pub fn simulate_bessel(
    seed: u64,
    grid: &TimeGrid,
    delta: f64,
    x0: f64,
) -> Result<PathSample, EngineError> {
    let mut path = simulate_bessel_with(&mut sample_stream(seed, 0), grid, delta, x0)?;
    path.seed = seed;
    Ok(path)
}

/// Simulates any directly simulable spec.
pub fn simulate(spec: &ProcessSpec, seed: u64, grid: &TimeGrid) -> Result<PathSample, EngineError> {
    match *spec {
        ProcessSpec::BrownianMotion { x0 } => {
            if !x0.is_finite() {
                return Err(EngineError::config(format!("Brownian start must be finite, got {x0}")));
            }
            Ok(simulate_bm(seed, grid, x0))
        }
        ProcessSpec::ExpMartingale { x0 } => simulate_exp_martingale(seed, grid, x0),
        ProcessSpec::Bessel { delta, x0 } => {
            if !(delta > 0.0 && delta < 2.0) {
                return Err(EngineError::config(format!(
                    "Bessel dimension must lie in (0, 2), got {delta}"
                )));
            }
            simulate_bessel(seed, grid, delta, x0)
        }
        ProcessSpec::Bessel3 { x0 } => simulate_bessel(seed, grid, 3.0, x0),
        ProcessSpec::NegBessel3 { x0 } => {
            let mut path = simulate_bessel(seed, grid, 3.0, x0)?;
            for v in &mut path.values {
                *v = -*v;
            }
            path.spec = ProcessSpec::NegBessel3 { x0 };
            Ok(path)
        }
        ProcessSpec::Spliced { .. } => Err(EngineError::Unsupported(
            "spliced paths are produced by the measure samplers, not simulated directly".into(),
        )),
    }
}

/// Continues a path by `extra_horizon` with the same transition law, using a
/// fresh stream derived from `seed`. The original section is copied
/// verbatim, so restricting the result to the original grid returns the
/// original path bitwise.
pub fn extend_path(
    path: &PathSample,
    extra_horizon: f64,
    seed: u64,
) -> Result<PathSample, EngineError> {
    if matches!(path.spec, ProcessSpec::Spliced { .. }) {
        return Err(EngineError::Unsupported("spliced paths cannot be extended".into()));
    }
    if !(extra_horizon.is_finite() && extra_horizon >= 0.0) {
        return Err(EngineError::config(format!(
            "extension horizon must be nonnegative, got {extra_horizon}"
        )));
    }
    if extra_horizon == 0.0 {
        return Ok(path.clone());
    }
    let step = path.grid.step();
    let ratio = extra_horizon / step;
    let extra_steps = ratio.round();
    if (ratio - extra_steps).abs() > 1e-9 * ratio.max(1.0) {
        return Err(EngineError::config(format!(
            "extension horizon {extra_horizon} is not a whole number of steps of {step}"
        )));
    }
    let extra_steps = extra_steps as usize;
    let grid = path.grid.extended(extra_steps);
    let mut rng = sample_stream(seed, 0);
    let sqrt_step = step.sqrt();

    let mut out = path.clone();
    out.grid = grid.clone();

    match out.spec {
        ProcessSpec::BrownianMotion { .. } => {
            let hi = out.interval_max.as_mut().expect("Brownian paths carry extrema");
            let lo = out.interval_min.as_mut().expect("Brownian paths carry extrema");
            let mut a = *out.values.last().unwrap();
            for _ in 0..extra_steps {
                let z: f64 = rng.sample(StandardNormal);
                let b = a + sqrt_step * z;
                hi.push(bridge_max_from_u(a, b, step, open_unit(&mut rng)));
                lo.push(bridge_min_from_u(a, b, step, open_unit(&mut rng)));
                out.values.push(b);
                a = b;
            }
        }
        ProcessSpec::ExpMartingale { x0 } => {
            let start_idx = path.grid.n_steps();
            let hi = out.interval_max.as_mut().expect("Brownian paths carry extrema");
            let lo = out.interval_min.as_mut().expect("Brownian paths carry extrema");
            // Recover the driving Brownian level from the last value.
            let mut b = (path.last_value() / x0).ln() + 0.5 * path.grid.horizon();
            let mut v_prev = path.last_value();
            for i in 0..extra_steps {
                let z: f64 = rng.sample(StandardNormal);
                b += sqrt_step * z;
                let t_next = grid.time(start_idx + i + 1);
                let v_next = x0 * (b - 0.5 * t_next).exp();
                let (la, lb) = (v_prev.ln(), v_next.ln());
                hi.push(bridge_max_from_u(la, lb, step, open_unit(&mut rng)).exp());
                lo.push(bridge_min_from_u(la, lb, step, open_unit(&mut rng)).exp());
                out.values.push(v_next);
                v_prev = v_next;
            }
        }
        ProcessSpec::Bessel { delta, .. } => {
            let mut ysq = path.last_value() * path.last_value();
            for _ in 0..extra_steps {
                ysq = squared_bessel_step(&mut rng, ysq, delta, step);
                out.values.push(ysq.sqrt());
            }
        }
        ProcessSpec::Bessel3 { .. } => {
            let mut ysq = path.last_value() * path.last_value();
            for _ in 0..extra_steps {
                ysq = squared_bessel_step(&mut rng, ysq, 3.0, step);
                out.values.push(ysq.sqrt());
            }
        }
        ProcessSpec::NegBessel3 { .. } => {
            let mut ysq = path.last_value() * path.last_value();
            for _ in 0..extra_steps {
                ysq = squared_bessel_step(&mut rng, ysq, 3.0, step);
                out.values.push(-ysq.sqrt());
            }
        }
        ProcessSpec::Spliced { .. } => unreachable!("rejected above"),
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(step: f64, horizon: f64) -> TimeGrid {
        TimeGrid::new(step, horizon).unwrap()
    }

    #[test]
    fn bm_is_reproducible_bitwise() {
        let g = grid(0.125, 2.0);
        let a = simulate_bm(99, &g, 0.5);
        let b = simulate_bm(99, &g, 0.5);
        assert_eq!(a.values, b.values);
        assert_eq!(a.interval_max, b.interval_max);
        assert_eq!(a.interval_min, b.interval_min);
    }

    #[test]
    fn bm_increments_standardized_moments() {
        let g = TimeGrid::with_steps(2f64.powi(-10), 1 << 16).unwrap();
        let p = simulate_bm(5, &g, 0.0);
        let sqrt_step = g.step().sqrt();
        let n = g.n_steps() as f64;
        let zs: Vec<f64> = p.values.windows(2).map(|w| (w[1] - w[0]) / sqrt_step).collect();
        let mean = zs.iter().sum::<f64>() / n;
        let var = zs.iter().map(|z| (z - mean) * (z - mean)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 4.0 / n.sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 4.0 * (2.0 / n).sqrt(), "var {var}");
    }

    #[test]
    fn bm_extrema_bracket_endpoints() {
        let g = grid(0.25, 8.0);
        let p = simulate_bm(3, &g, -1.0);
        let hi = p.interval_max.as_ref().unwrap();
        let lo = p.interval_min.as_ref().unwrap();
        for i in 0..g.n_steps() {
            let (a, b) = (p.values[i], p.values[i + 1]);
            assert!(hi[i] >= a.max(b));
            assert!(lo[i] <= a.min(b));
        }
    }

    #[test]
    fn running_max_mean_matches_reflection_law() {
        // E[sup_{[0,1]} B] = sqrt(2/pi), with the sup refined by bridge maxima.
        let g = grid(2f64.powi(-6), 1.0);
        let n = 20_000;
        let mut sum = 0.0;
        for seed in 0..n {
            let p = simulate_bm(seed, &g, 0.0);
            let m = p.interval_max.as_ref().unwrap().iter().cloned().fold(0.0f64, f64::max);
            sum += m;
        }
        let mean = sum / n as f64;
        let target = (2.0 / std::f64::consts::PI).sqrt();
        // stderr of sup is about 0.6 / sqrt(n).
        assert!((mean - target).abs() < 0.02, "mean {mean} vs {target}");
    }

    #[test]
    fn exp_martingale_matches_same_seed_brownian_path() {
        let g = grid(0.125, 4.0);
        let x0 = 2.5;
        let m = simulate_exp_martingale(17, &g, x0).unwrap();
        let b = simulate_bm(17, &g, 0.0);
        for i in 0..g.n_points() {
            let expected = x0 * (b.values[i] - 0.5 * g.time(i)).exp();
            assert_eq!(m.values[i], expected, "index {i}");
        }
    }

    #[test]
    fn exp_martingale_median_at_t4() {
        // Median of x0 * exp(B_4 - 2) is x0 * exp(-2).
        let g = grid(0.25, 4.0);
        let n = 30_000;
        let mut finals: Vec<f64> = (0..n)
            .map(|seed| simulate_exp_martingale(seed, &g, 1.0).unwrap().last_value())
            .collect();
        finals.sort_by(f64::total_cmp);
        let median = finals[n as usize / 2];
        let target = (-2.0f64).exp();
        assert!((median - target).abs() < 0.008, "median {median} vs {target}");
    }

    #[test]
    fn exp_martingale_rejects_bad_start() {
        let g = grid(0.5, 1.0);
        assert!(simulate_exp_martingale(1, &g, 0.0).is_err());
        assert!(simulate_exp_martingale(1, &g, -1.0).is_err());
    }

    #[test]
    fn squared_bessel_moments() {
        // E[Y^2_t] = x0^2 + delta * t for any step size.
        let mut rng = sample_stream(23, 0);
        let (delta, x0, dt) = (0.7, 1.3, 0.5);
        let n = 40_000;
        let mean = (0..n)
            .map(|_| squared_bessel_step(&mut rng, x0 * x0, delta, dt))
            .sum::<f64>()
            / n as f64;
        let target = x0 * x0 + delta * dt;
        let var = 4.0 * x0 * x0 * dt + 2.0 * delta * dt * dt;
        let se = (var / n as f64).sqrt();
        assert!((mean - target).abs() < 4.0 * se, "mean {mean} vs {target}");
    }

    #[test]
    fn bessel_path_nonnegative_and_leaves_zero() {
        let g = grid(2f64.powi(-8), 1.0);
        for seed in 0..50 {
            let p = simulate_bessel(seed, &g, 0.5, 0.0).unwrap();
            assert!(p.values.iter().all(|v| *v >= 0.0));
            assert!(p.values[1] > 0.0, "Bessel leaves zero immediately");
        }
    }

    #[test]
    fn bessel_rejects_bad_dimension() {
        let g = grid(0.5, 1.0);
        assert!(simulate_bessel(1, &g, 2.0, 0.0).is_err());
        assert!(simulate_bessel(1, &g, 0.0, 0.0).is_err());
        assert!(simulate_bessel(1, &g, 2.5, 0.0).is_err());
        assert!(simulate_bessel(1, &g, 1.0, -0.1).is_err());
    }

    #[test]
    fn spliced_is_not_simulable_or_extendable() {
        let g = grid(0.5, 1.0);
        let err = simulate(&ProcessSpec::Spliced { splice_time: 0.5 }, 1, &g).unwrap_err();
        assert!(matches!(err, EngineError::Unsupported(_)));
        let mut p = simulate_bm(1, &g, 0.0);
        p.spec = ProcessSpec::Spliced { splice_time: 0.5 };
        assert!(matches!(extend_path(&p, 1.0, 2).unwrap_err(), EngineError::Unsupported(_)));
    }

    #[test]
    fn extend_by_zero_is_identity() {
        let g = grid(0.25, 2.0);
        let p = simulate_bessel(9, &g, 1.5, 0.7).unwrap();
        let q = extend_path(&p, 0.0, 1234).unwrap();
        assert_eq!(p.values, q.values);
        assert_eq!(p.grid, q.grid);
    }

    #[test]
    fn extend_then_restrict_is_bitwise_identity() {
        let g = grid(0.125, 1.0);
        for spec in [
            ProcessSpec::BrownianMotion { x0: 0.3 },
            ProcessSpec::ExpMartingale { x0: 1.2 },
            ProcessSpec::Bessel { delta: 1.1, x0: 0.4 },
            ProcessSpec::NegBessel3 { x0: 0.0 },
        ] {
            let p = simulate(&spec, 31, &g).unwrap();
            let q = extend_path(&p, 2.0, 77).unwrap();
            assert_eq!(q.grid.horizon(), 3.0);
            assert_eq!(&q.values[..p.values.len()], &p.values[..], "{spec:?}");
            if let (Some(ph), Some(qh)) = (&p.interval_max, &q.interval_max) {
                assert_eq!(&qh[..ph.len()], &ph[..]);
            }
        }
    }

    #[test]
    fn extend_rejects_misaligned_horizon() {
        let g = grid(0.25, 1.0);
        let p = simulate_bm(1, &g, 0.0);
        assert!(extend_path(&p, 0.3, 2).is_err());
        assert!(extend_path(&p, -1.0, 2).is_err());
    }

    #[test]
    fn extension_seam_increment_variance() {
        // The first increment past the seam is N(0, step).
        let g = grid(0.25, 0.5);
        let n = 30_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for seed in 0..n {
            let p = simulate_bm(seed, &g, 0.0);
            let q = extend_path(&p, 0.25, seed ^ 0xABCD).unwrap();
            let inc = q.values[3] - q.values[2];
            sum += inc;
            sumsq += inc * inc;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.012, "seam mean {mean}");
        assert!((var - 0.25).abs() < 0.01, "seam var {var}");
    }

    #[test]
    fn neg_bessel3_is_negative_bessel3() {
        let g = grid(0.25, 1.0);
        let p = simulate(&ProcessSpec::Bessel3 { x0: 0.2 }, 13, &g).unwrap();
        let q = simulate(&ProcessSpec::NegBessel3 { x0: 0.2 }, 13, &g).unwrap();
        for i in 0..g.n_points() {
            assert_eq!(q.values[i], -p.values[i]);
        }
    }
}
