//! Exact Brownian-bridge extrema and level-crossing formulas.
//!
//! Conditioned on its endpoints, a Brownian path over one grid interval is a
//! Brownian bridge; its maximum and minimum have the closed-form laws sampled
//! here by inverse transform. A constant drift does not change the bridge law
//! given the endpoints, so the same formulas apply to drifted log-paths.

use rand::Rng;

/// P(max >= m) = exp(-2 (m-a)(m-b) / dt) for m >= max(a, b); inverse
/// transform of that tail with uniform `u` in (0, 1].
pub fn bridge_max_from_u(a: f64, b: f64, dt: f64, u: f64) -> f64 {
    let d = a - b;
    0.5 * (a + b + (d * d - 2.0 * dt * u.ln()).sqrt())
}

/// Mirror image of `bridge_max_from_u`.
pub fn bridge_min_from_u(a: f64, b: f64, dt: f64, u: f64) -> f64 {
    let d = a - b;
    0.5 * (a + b - (d * d - 2.0 * dt * u.ln()).sqrt())
}

/// Draws the bridge maximum over an interval of length `dt` with endpoints
/// `a`, `b`.
pub fn sample_bridge_max<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64, dt: f64) -> f64 {
    bridge_max_from_u(a, b, dt, open_unit(rng))
}

/// Draws the bridge minimum over an interval of length `dt` with endpoints
/// `a`, `b`.
pub fn sample_bridge_min<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64, dt: f64) -> f64 {
    bridge_min_from_u(a, b, dt, open_unit(rng))
}

/// Probability that the bridge from `a` to `b` over `step` touches `level`:
/// 1 when the level sits between the endpoints, exp(-2 (a-level)(b-level) /
/// step) otherwise.
pub fn bridge_hit_probability(a: f64, b: f64, level: f64, step: f64) -> f64 {
    if (a - level) * (b - level) <= 0.0 {
        return 1.0;
    }
    (-2.0 * (a - level) * (b - level) / step).exp()
}

/// Uniform draw in (0, 1]; safe as an argument of `ln`.
#[inline]
pub(crate) fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.gen::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::sample_stream;
    use proptest::prelude::*;

    #[test]
    fn hit_probability_matches_reflection_formula() {
        // Flat bridge at 0, level 1, unit interval.
        let p = bridge_hit_probability(0.0, 0.0, 1.0, 1.0);
        assert!((p - (-2.0f64).exp()).abs() < 1e-15, "got {p}");
    }

    #[test]
    fn hit_probability_is_one_between_endpoints() {
        assert_eq!(bridge_hit_probability(-0.5, 0.7, 0.0, 0.25), 1.0);
        assert_eq!(bridge_hit_probability(0.3, 0.3, 0.3, 0.25), 1.0);
    }

    #[test]
    fn hit_probability_vanishes_with_step() {
        let p = bridge_hit_probability(0.0, 0.1, 1.0, 1e-12);
        assert_eq!(p, 0.0);
    }

    #[test]
    fn bridge_max_mean_over_unit_interval() {
        // E[max of standard bridge from 0 to 0 on [0,1]] = sqrt(pi/8).
        let mut rng = sample_stream(7, 0);
        let n = 200_000;
        let mean: f64 =
            (0..n).map(|_| sample_bridge_max(&mut rng, 0.0, 0.0, 1.0)).sum::<f64>() / n as f64;
        let target = (std::f64::consts::PI / 8.0).sqrt();
        assert!((mean - target).abs() < 3e-3, "mean {mean} vs {target}");
    }

    #[test]
    fn bridge_max_tail_matches_formula() {
        // P(max >= 0.8) for a bridge from 0 to 0.2 over dt = 0.5.
        let (a, b, dt, m) = (0.0, 0.2, 0.5, 0.8);
        let mut rng = sample_stream(11, 0);
        let n = 200_000u64;
        let hits = (0..n).filter(|_| sample_bridge_max(&mut rng, a, b, dt) >= m).count();
        let p_hat = hits as f64 / n as f64;
        let p = (-2.0 * (m - a) * (m - b) / dt).exp();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((p_hat - p).abs() < 4.0 * se, "p_hat {p_hat} vs {p}");
    }

    proptest! {
        #[test]
        fn extrema_bracket_endpoints(
            a in -5.0f64..5.0, b in -5.0f64..5.0, dt in 1e-6f64..4.0, seed in 0u64..1000
        ) {
            let mut rng = sample_stream(seed, 3);
            let hi = sample_bridge_max(&mut rng, a, b, dt);
            let lo = sample_bridge_min(&mut rng, a, b, dt);
            prop_assert!(hi >= a.max(b));
            prop_assert!(lo <= a.min(b));
        }

        #[test]
        fn u_one_gives_endpoint_extreme(a in -3.0f64..3.0, b in -3.0f64..3.0, dt in 1e-6f64..4.0) {
            prop_assert!((bridge_max_from_u(a, b, dt, 1.0) - a.max(b)).abs() <= 1e-12);
            prop_assert!((bridge_min_from_u(a, b, dt, 1.0) - a.min(b)).abs() <= 1e-12);
        }
    }
}
