//! Episode scoring, the constant naive benchmark, the analytic final-round
//! solution, and the future-peak probability.

use crate::domain::{feasible_interval, ScenarioConfig};
use crate::error::{Error, Result};
use crate::num::Real;
use crate::roots::solve_foc;

/// One realized episode with its reward decomposition.
///
/// `peak_round` is the 1-based round carrying the coincident-peak charge,
/// i.e. the first argmax of `loads`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace<R: Real> {
    pub consumption: Vec<R>,
    pub loads: Vec<R>,
    pub peak_round: usize,
    pub gross_revenue: R,
    pub cp_charge: R,
    pub reward: R,
}

/// 1-based index of the maximum load; ties break to the earliest round.
pub fn coincident_peak_index<R: Real>(loads: &[R]) -> Result<usize> {
    if loads.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut best = 0usize;
    for (i, &s) in loads.iter().enumerate().skip(1) {
        if s > loads[best] {
            best = i;
        }
    }
    Ok(best + 1)
}

/// Scoring core shared with the rollout sampler: returns
/// (peak_round, gross_revenue, cp_charge, reward) without allocating.
pub(crate) fn score_trace<R: Real>(
    consumption: &[R],
    loads: &[R],
    cfg: &ScenarioConfig<R>,
) -> Result<(usize, R, R, R)> {
    if consumption.len() != loads.len() {
        return Err(Error::LengthMismatch {
            consumption: consumption.len(),
            loads: loads.len(),
        });
    }
    let peak_round = coincident_peak_index(loads)?;
    let mut gross = R::zero();
    for &x in consumption {
        if !cfg.in_bounds(x) {
            return Err(Error::OutOfBounds {
                value: x.as_f64(),
                min: cfg.x_min.as_f64(),
                max: cfg.x_max.as_f64(),
            });
        }
        gross = gross + cfg.revenue.eval(x)?;
    }
    let charge = cfg.cp_rate * consumption[peak_round - 1];
    Ok((peak_round, gross, charge, gross - charge))
}

/// Score a consumption/load trace:
/// `reward = sum_t g(x_t) - cp_rate * x_{peak_round}`.
///
/// Ramp feasibility is not enforced here; callers validate their own traces.
pub fn episode_reward<R: Real>(
    consumption: &[R],
    loads: &[R],
    cfg: &ScenarioConfig<R>,
) -> Result<EpisodeTrace<R>> {
    let (peak_round, gross_revenue, cp_charge, reward) = score_trace(consumption, loads, cfg)?;
    Ok(EpisodeTrace {
        consumption: consumption.to_vec(),
        loads: loads.to_vec(),
        peak_round,
        gross_revenue,
        cp_charge,
        reward,
    })
}

/// Smallest admissible consumption for root finding; keeps clear of the
/// `x^(1/4)` derivative singularity at zero.
fn foc_floor<R: Real>(cfg: &ScenarioConfig<R>) -> R {
    cfg.x_min.max(R::of(1e-9))
}

/// The constant benchmark: the consumption balancing marginal revenue
/// against the amortized charge, `T g'(x) = cp_rate`.
///
/// Boundary handling follows [`solve_foc`]: `x_max` when marginal revenue
/// dominates everywhere, the scan floor when the amortized rate dominates
/// everywhere, and the objective-maximizing root when `g'` crosses the rate
/// more than once.
pub fn naive_consumption<R: Real>(cfg: &ScenarioConfig<R>) -> R {
    solve_foc(
        &cfg.revenue,
        foc_floor(cfg),
        cfg.x_max,
        cfg.amortized_rate(),
    )
}

/// Round-1 consumption: the configured override, or the naive benchmark so
/// every policy starts from the same point.
pub fn initial_consumption<R: Real>(cfg: &ScenarioConfig<R>) -> R {
    cfg.initial_x.unwrap_or_else(|| naive_consumption(cfg))
}

/// Probability that one specific future round carries the coincident peak,
/// given the running maximum `s_m` after round `t`:
/// `(1 - F(s_m)^(T-t)) / (T-t)`.
pub fn prob_round_is_peak<R: Real>(s_m: R, t: u32, cfg: &ScenarioConfig<R>) -> Result<R> {
    if t < 1 || t >= cfg.horizon {
        return Err(Error::RoundOutOfRange {
            t,
            max_t: cfg.horizon.saturating_sub(1),
        });
    }
    let remaining = cfg.horizon - t;
    let f = cfg.load.cdf(s_m);
    Ok((R::one() - f.powi(remaining as i32)) / R::of(remaining as f64))
}

/// Optimal last-round consumption given the previous consumption and the
/// running maximum: solve `g'(x) = cp_rate * P(S > s_m)` and project the
/// result onto the ramp-feasible interval around `x_prev`.
pub fn final_round_target<R: Real>(x_prev: R, s_m: R, cfg: &ScenarioConfig<R>) -> Result<R> {
    let interval = feasible_interval(x_prev, cfg)?;
    let p_last = R::one() - cfg.load.cdf(s_m);
    let unconstrained = solve_foc(
        &cfg.revenue,
        foc_floor(cfg),
        cfg.x_max,
        cfg.cp_rate * p_last,
    );
    Ok(interval.project(unconstrained))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{CpCharge, LoadModel, RevenueFunction, ScenarioParams};

    fn cfg_with(params: ScenarioParams<f64>) -> ScenarioConfig<f64> {
        ScenarioConfig::new(params).unwrap()
    }

    fn g1_cfg(horizon: u32) -> ScenarioConfig<f64> {
        cfg_with(ScenarioParams {
            horizon,
            ..ScenarioParams::default()
        })
    }

    fn g2_cfg(horizon: u32) -> ScenarioConfig<f64> {
        cfg_with(ScenarioParams {
            horizon,
            revenue: RevenueFunction::QuarticRoot,
            ..ScenarioParams::default()
        })
    }

    #[test]
    fn peak_index_basics() {
        assert_eq!(coincident_peak_index(&[1.0, 3.0, 2.0]).unwrap(), 2);
        assert_eq!(coincident_peak_index(&[5.0]).unwrap(), 1);
        // ties break to the first round
        assert_eq!(coincident_peak_index(&[2.0, 2.0]).unwrap(), 1);
        assert!(matches!(
            coincident_peak_index::<f64>(&[]),
            Err(Error::EmptySequence)
        ));
    }

    #[test]
    fn episode_reward_matches_direct_formula() {
        let cfg = cfg_with(ScenarioParams {
            horizon: 2,
            cp_charge: CpCharge::Rate(1.0),
            ..ScenarioParams::default()
        });
        let trace = episode_reward(&[0.3, 0.3], &[1.0, 2.0], &cfg).unwrap();
        assert_eq!(trace.peak_round, 2);
        let want = 2.0 * 2.0 * (1.0 + 0.09f64).ln() - 0.3;
        assert!((trace.reward - want).abs() < 1e-12);
        assert!((trace.reward - 0.044711).abs() < 1e-6);
        assert!((trace.gross_revenue - trace.cp_charge - trace.reward).abs() < 1e-15);
    }

    #[test]
    fn zero_charge_reward_is_gross_revenue() {
        let cfg = cfg_with(ScenarioParams {
            horizon: 1,
            cp_charge: CpCharge::Rate(0.0),
            ..ScenarioParams::default()
        });
        let trace = episode_reward(&[1.0], &[17.0], &cfg).unwrap();
        assert!((trace.reward - cfg.revenue.eval(1.0).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn episode_reward_quartic_case() {
        let cfg = cfg_with(ScenarioParams {
            horizon: 2,
            revenue: RevenueFunction::QuarticRoot,
            cp_charge: CpCharge::Rate(8.316),
            ..ScenarioParams::default()
        });
        let trace = episode_reward(&[0.5, 0.2], &[2.0, 1.0], &cfg).unwrap();
        // independent evaluation of g2(0.5) + g2(0.2) - 8.316 * 0.5
        let want = 1.386 * 0.5f64.powf(0.25) + 1.386 * 0.2f64.powf(0.25) - 8.316 * 0.5;
        assert!((trace.reward - want).abs() < 1e-12);
        assert_eq!(trace.peak_round, 1);
    }

    #[test]
    fn episode_reward_validates_inputs() {
        let cfg = g1_cfg(2);
        assert!(matches!(
            episode_reward(&[0.3], &[1.0, 2.0], &cfg),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            episode_reward(&[0.3, 1.4], &[1.0, 2.0], &cfg),
            Err(Error::OutOfBounds { .. })
        ));
    }

    #[test]
    fn naive_matches_case_study_value() {
        // T = 10, quartic revenue, charge at 60% of max gross revenue
        let x = naive_consumption(&g2_cfg(10));
        assert!((x - 0.311).abs() < 1e-3, "got {x}");
        // residual of the first-order condition at the interior solution
        let cfg = g2_cfg(10);
        let resid = 10.0 * cfg.revenue.derivative(x).unwrap() - cfg.cp_rate;
        assert!(resid.abs() < 1e-6, "residual {resid}");
    }

    #[test]
    fn naive_log_quadratic_matches_quadratic_root() {
        // T g1'(x) = cp_rate reduces to c x^2 - 4x + c = 0 with
        // c = 0.6 * 2 ln 2; the in-range root is the benchmark.
        let cfg = g1_cfg(10);
        let c = cfg.amortized_rate();
        let root = (2.0 - (4.0 - c * c).sqrt()) / c;
        let x = naive_consumption(&cfg);
        assert!((x - root).abs() < 1e-8, "{x} vs {root}");
        assert!((x - 0.21781).abs() < 1e-5);
        let resid = 10.0 * cfg.revenue.derivative(x).unwrap() - cfg.cp_rate;
        assert!(resid.abs() < 1e-6);
    }

    #[test]
    fn naive_with_zero_charge_consumes_max() {
        for revenue in [RevenueFunction::LogQuadratic, RevenueFunction::QuarticRoot] {
            let cfg = cfg_with(ScenarioParams {
                cp_charge: CpCharge::Rate(0.0),
                revenue,
                ..ScenarioParams::default()
            });
            assert_eq!(naive_consumption(&cfg), 1.0);
        }
    }

    #[test]
    fn naive_is_horizon_invariant_under_fixed_fraction() {
        for make in [g1_cfg as fn(u32) -> _, g2_cfg as fn(u32) -> _] {
            let base = naive_consumption(&make(2));
            for t in 3..=10 {
                let x = naive_consumption(&make(t));
                assert!(
                    (x - base).abs() <= 1e-9,
                    "horizon {t}: {x} vs {base}"
                );
            }
        }
    }

    #[test]
    fn peak_probability_formula() {
        let cfg = g1_cfg(10);
        // one round left, median observed max
        let p = prob_round_is_peak(0.0, 9, &cfg).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        // peak effectively already observed
        let p = prob_round_is_peak(f64::INFINITY, 5, &cfg).unwrap();
        assert_eq!(p, 0.0);
        // two rounds left at the median: (1 - 0.25) / 2
        let p = prob_round_is_peak(0.0, 8, &cfg).unwrap();
        assert!((p - 0.375).abs() < 1e-12);
    }

    #[test]
    fn peak_probabilities_sum_to_any_future_peak() {
        let cfg = g1_cfg(10);
        for t in [1u32, 3, 7, 9] {
            for s_m in [-1.3, 0.0, 0.4, 2.2] {
                let remaining = (cfg.horizon - t) as f64;
                let p = prob_round_is_peak(s_m, t, &cfg).unwrap();
                let total = p * remaining;
                let want = 1.0 - cfg.load.cdf(s_m).powi((cfg.horizon - t) as i32);
                assert!((total - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn peak_probability_range_errors() {
        let cfg = g1_cfg(10);
        assert!(matches!(
            prob_round_is_peak(0.0, 10, &cfg),
            Err(Error::RoundOutOfRange { .. })
        ));
        assert!(matches!(
            prob_round_is_peak(0.0, 0, &cfg),
            Err(Error::RoundOutOfRange { .. })
        ));
    }

    #[test]
    fn final_round_target_boundary_cases() {
        let cfg = g1_cfg(10);
        // peak certainly past: aim for x_max, ramp-limited to 0.8
        let x = final_round_target(0.5, f64::INFINITY, &cfg).unwrap();
        assert!((x - 0.8).abs() < 1e-12);
        // zero charge: stay at the top
        let cfg0 = cfg_with(ScenarioParams {
            cp_charge: CpCharge::Rate(0.0),
            ..ScenarioParams::default()
        });
        assert_eq!(final_round_target(1.0, 0.0, &cfg0).unwrap(), 1.0);
    }

    #[test]
    fn final_round_target_quartic_interior() {
        let cfg = g2_cfg(10);
        // F(s_m) = 0.5 at the Gaussian mean; solve g2'(x) = cp_rate / 2
        let rate = cfg.cp_rate * 0.5;
        let closed_form = (0.3465 / rate).powf(4.0 / 3.0);
        let x = final_round_target(0.05, 0.0, &cfg).unwrap();
        assert!((x - closed_form).abs() < 1e-6, "{x} vs {closed_form}");
        assert!((x - 0.0364).abs() < 1e-4);
        // inside [0, 0.35], so no projection happened
        assert!(x > 0.0 && x < 0.35);
    }

    #[test]
    fn initial_consumption_prefers_override() {
        let mut cfg = g2_cfg(10);
        assert!((initial_consumption(&cfg) - naive_consumption(&cfg)).abs() < 1e-15);
        cfg.initial_x = Some(0.5);
        assert_eq!(initial_consumption(&cfg), 0.5);
    }
}
