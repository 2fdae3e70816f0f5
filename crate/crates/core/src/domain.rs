//! Problem data shared by every policy: scenario parameters, revenue
//! functions, the system-load model, and ramp-feasibility arithmetic.
//!
//! Everything here is immutable after construction and safe to share across
//! threads; the operations are pure functions.

use crate::error::{Error, Result};
use crate::num::{clamp, Real};
use rand::Rng;

/// Concave/convex increasing revenue `g(x)` for consumption `x >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum RevenueFunction<R: Real> {
    /// `g(x) = 2 ln(1 + x^2)`.
    LogQuadratic,
    /// `g(x) = 1.386 x^(1/4)`. The coefficient is kept as the literal
    /// `1.386` rather than `2 ln 2`.
    QuarticRoot,
    /// Polynomial `g(x) = sum_k coeffs[k] x^k`.
    Custom { coeffs: Vec<R> },
}

impl<R: Real> RevenueFunction<R> {
    /// Revenue at consumption `x`.
    pub fn eval(&self, x: R) -> Result<R> {
        if x < R::zero() {
            return Err(Error::NegativeConsumption { x: x.as_f64() });
        }
        Ok(match self {
            Self::LogQuadratic => R::of(2.0) * (R::one() + x * x).ln(),
            Self::QuarticRoot => R::of(1.386) * x.powf(R::of(0.25)),
            Self::Custom { coeffs } => coeffs
                .iter()
                .rev()
                .fold(R::zero(), |acc, &c| acc * x + c),
        })
    }

    /// Marginal revenue `g'(x)`.
    pub fn derivative(&self, x: R) -> Result<R> {
        if x < R::zero() {
            return Err(Error::NegativeConsumption { x: x.as_f64() });
        }
        match self {
            Self::LogQuadratic => Ok(R::of(4.0) * x / (R::one() + x * x)),
            Self::QuarticRoot => {
                if x == R::zero() {
                    return Err(Error::DerivativeSingularity { x: 0.0 });
                }
                Ok(R::of(1.386 / 4.0) * x.powf(R::of(-0.75)))
            }
            Self::Custom { coeffs } => {
                let mut acc = R::zero();
                for (k, &c) in coeffs.iter().enumerate().skip(1).rev() {
                    acc = acc * x + R::of(k as f64) * c;
                }
                Ok(acc)
            }
        }
    }
}

/// Distribution of the iid per-round system load.
#[derive(Debug, Clone, PartialEq)]
pub enum LoadModel<R: Real> {
    Gaussian { mean: R, std_dev: R },
    Uniform { low: R, high: R },
}

impl<R: Real> LoadModel<R> {
    pub fn gaussian(mean: R, std_dev: R) -> Result<Self> {
        if !(std_dev > R::zero()) || !std_dev.is_finite() || !mean.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "gaussian load needs finite mean and std_dev > 0, got mean {} std_dev {}",
                mean.as_f64(),
                std_dev.as_f64()
            )));
        }
        Ok(Self::Gaussian { mean, std_dev })
    }

    pub fn uniform(low: R, high: R) -> Result<Self> {
        if !(high > low) || !low.is_finite() || !high.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "uniform load needs finite low < high, got [{}, {}]",
                low.as_f64(),
                high.as_f64()
            )));
        }
        Ok(Self::Uniform { low, high })
    }

    /// `P(S <= s)`. The Gaussian branch evaluates `erfc` in double precision
    /// (absolute error well below 1e-7).
    pub fn cdf(&self, s: R) -> R {
        match *self {
            Self::Gaussian { mean, std_dev } => {
                if !s.is_finite() {
                    return if s > R::zero() { R::one() } else { R::zero() };
                }
                let z = (s - mean).as_f64() / std_dev.as_f64();
                R::of(0.5 * libm::erfc(-z / std::f64::consts::SQRT_2))
            }
            Self::Uniform { low, high } => {
                if s <= low {
                    R::zero()
                } else if s >= high {
                    R::one()
                } else {
                    (s - low) / (high - low)
                }
            }
        }
    }

    /// One load draw.
    pub fn sample<G: Rng + ?Sized>(&self, rng: &mut G) -> R {
        match *self {
            Self::Gaussian { mean, std_dev } => mean + std_dev * R::standard_normal(rng),
            Self::Uniform { low, high } => R::uniform_in(low, high, rng),
        }
    }

    pub fn mean(&self) -> R {
        match *self {
            Self::Gaussian { mean, .. } => mean,
            Self::Uniform { low, high } => (low + high) / R::of(2.0),
        }
    }

    pub fn std_dev(&self) -> R {
        match *self {
            Self::Gaussian { std_dev, .. } => std_dev,
            Self::Uniform { low, high } => (high - low) / R::of(12.0).sqrt(),
        }
    }

    /// Range holding at least 0.9999 of the load mass; used for load grids.
    pub fn bulk_range(&self) -> (R, R) {
        match *self {
            Self::Gaussian { mean, std_dev } => {
                let four = R::of(4.0);
                (mean - four * std_dev, mean + four * std_dev)
            }
            Self::Uniform { low, high } => (low, high),
        }
    }
}

/// Closed interval of consumptions reachable in one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibleInterval<R: Real> {
    pub lo: R,
    pub hi: R,
}

impl<R: Real> FeasibleInterval<R> {
    pub fn contains(&self, x: R) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Nearest point of the interval to `x`.
    pub fn project(&self, x: R) -> R {
        clamp(x, self.lo, self.hi)
    }

    pub fn width(&self) -> R {
        self.hi - self.lo
    }
}

/// How the coincident-peak charge rate is specified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CpCharge<R: Real> {
    /// Direct rate per unit of consumption at the peak round.
    Rate(R),
    /// Fraction of the maximum gross revenue: `rate = fraction * T * g(x_max)`.
    Fraction(R),
}

/// Input bundle for [`ScenarioConfig::new`]; defaults mirror the case study
/// (T = 10, delta = 0.3, bounds [0, 1], charge at 60% of max gross revenue,
/// standard-normal loads).
#[derive(Debug, Clone)]
pub struct ScenarioParams<R: Real> {
    pub horizon: u32,
    pub ramp_delta: R,
    pub x_min: R,
    pub x_max: R,
    pub cp_charge: CpCharge<R>,
    pub revenue: RevenueFunction<R>,
    pub load: LoadModel<R>,
    /// Consumption at round 1; `None` defers to the naive benchmark value.
    pub initial_x: Option<R>,
    pub rng_seed: u64,
}

impl<R: Real> Default for ScenarioParams<R> {
    fn default() -> Self {
        Self {
            horizon: 10,
            ramp_delta: R::of(0.3),
            x_min: R::zero(),
            x_max: R::one(),
            cp_charge: CpCharge::Fraction(R::of(0.6)),
            revenue: RevenueFunction::LogQuadratic,
            load: LoadModel::Gaussian {
                mean: R::zero(),
                std_dev: R::one(),
            },
            initial_x: None,
            rng_seed: 42,
        }
    }
}

/// Validated problem instance. Construct through [`ScenarioConfig::new`];
/// the fields are public for reading.
#[derive(Debug, Clone)]
pub struct ScenarioConfig<R: Real> {
    pub horizon: u32,
    pub ramp_delta: R,
    pub x_min: R,
    pub x_max: R,
    /// Resolved charge rate (`pi_cp`).
    pub cp_rate: R,
    /// Present when the rate was given as a fraction of max gross revenue;
    /// kept so the rate can be re-resolved for a different horizon.
    pub cp_fraction: Option<R>,
    pub revenue: RevenueFunction<R>,
    pub load: LoadModel<R>,
    pub initial_x: Option<R>,
    pub rng_seed: u64,
}

impl<R: Real> ScenarioConfig<R> {
    pub fn new(params: ScenarioParams<R>) -> Result<Self> {
        let ScenarioParams {
            horizon,
            ramp_delta,
            x_min,
            x_max,
            cp_charge,
            revenue,
            load,
            initial_x,
            rng_seed,
        } = params;

        if horizon < 1 {
            return Err(Error::InvalidConfig("horizon must be at least 1".into()));
        }
        if !(ramp_delta >= R::zero()) || !ramp_delta.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "ramp_delta must be finite and >= 0, got {}",
                ramp_delta.as_f64()
            )));
        }
        if !(x_min >= R::zero()) || !(x_max > x_min) || !x_max.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "need 0 <= x_min < x_max, got [{}, {}]",
                x_min.as_f64(),
                x_max.as_f64()
            )));
        }
        let (cp_rate, cp_fraction) = match cp_charge {
            CpCharge::Rate(rate) => {
                if !(rate >= R::zero()) || !rate.is_finite() {
                    return Err(Error::InvalidConfig(format!(
                        "cp_rate must be finite and >= 0, got {}",
                        rate.as_f64()
                    )));
                }
                (rate, None)
            }
            CpCharge::Fraction(f) => {
                if !(f >= R::zero() && f <= R::one()) {
                    return Err(Error::InvalidConfig(format!(
                        "cp_fraction must lie in [0, 1], got {}",
                        f.as_f64()
                    )));
                }
                let rate = f * R::of(horizon as f64) * revenue.eval(x_max)?;
                (rate, Some(f))
            }
        };
        if let Some(x1) = initial_x {
            if x1 < x_min || x1 > x_max {
                return Err(Error::OutOfBounds {
                    value: x1.as_f64(),
                    min: x_min.as_f64(),
                    max: x_max.as_f64(),
                });
            }
        }

        Ok(Self {
            horizon,
            ramp_delta,
            x_min,
            x_max,
            cp_rate,
            cp_fraction,
            revenue,
            load,
            initial_x,
            rng_seed,
        })
    }

    /// Same scenario at a different horizon. A fractional charge is
    /// re-resolved against the new horizon; an explicit rate is kept.
    pub fn with_horizon(&self, horizon: u32) -> Result<Self> {
        let cp_charge = match self.cp_fraction {
            Some(f) => CpCharge::Fraction(f),
            None => CpCharge::Rate(self.cp_rate),
        };
        Self::new(ScenarioParams {
            horizon,
            ramp_delta: self.ramp_delta,
            x_min: self.x_min,
            x_max: self.x_max,
            cp_charge,
            revenue: self.revenue.clone(),
            load: self.load.clone(),
            initial_x: self.initial_x,
            rng_seed: self.rng_seed,
        })
    }

    /// Amortized per-round charge rate `cp_rate / T`.
    pub fn amortized_rate(&self) -> R {
        self.cp_rate / R::of(self.horizon as f64)
    }

    pub fn in_bounds(&self, x: R) -> bool {
        self.x_min <= x && x <= self.x_max
    }
}

/// Consumptions reachable from `x_prev` in one round:
/// `[max(x_min, x_prev - delta), min(x_max, x_prev + delta)]`.
pub fn feasible_interval<R: Real>(
    x_prev: R,
    cfg: &ScenarioConfig<R>,
) -> Result<FeasibleInterval<R>> {
    if !cfg.in_bounds(x_prev) {
        return Err(Error::OutOfBounds {
            value: x_prev.as_f64(),
            min: cfg.x_min.as_f64(),
            max: cfg.x_max.as_f64(),
        });
    }
    Ok(FeasibleInterval {
        lo: (x_prev - cfg.ramp_delta).max(cfg.x_min),
        hi: (x_prev + cfg.ramp_delta).min(cfg.x_max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g1() -> RevenueFunction<f64> {
        RevenueFunction::LogQuadratic
    }

    fn g2() -> RevenueFunction<f64> {
        RevenueFunction::QuarticRoot
    }

    fn default_cfg() -> ScenarioConfig<f64> {
        ScenarioConfig::new(ScenarioParams::default()).unwrap()
    }

    #[test]
    fn revenue_at_zero_is_zero() {
        assert_eq!(g1().eval(0.0).unwrap(), 0.0);
        assert_eq!(g2().eval(0.0).unwrap(), 0.0);
    }

    #[test]
    fn log_quadratic_at_one_is_two_ln_two() {
        let v = g1().eval(1.0).unwrap();
        assert!((v - 2.0 * std::f64::consts::LN_2).abs() < 1e-15);
        assert!((v - 1.386294).abs() < 1e-6);
    }

    #[test]
    fn quartic_root_keeps_literal_coefficient() {
        assert!((g2().eval(1.0).unwrap() - 1.386).abs() < 1e-15);
    }

    #[test]
    fn builtin_revenues_agree_at_one() {
        // 1.386 vs 2 ln 2
        assert!((g1().eval(1.0).unwrap() - g2().eval(1.0).unwrap()).abs() < 5e-4);
    }

    #[test]
    fn derivatives_match_closed_forms() {
        assert!((g1().derivative(1.0).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(g1().derivative(0.0).unwrap(), 0.0);
        assert!((g2().derivative(1.0).unwrap() - 0.3465).abs() < 1e-15);
    }

    #[test]
    fn negative_consumption_rejected() {
        assert!(matches!(
            g1().eval(-0.1),
            Err(Error::NegativeConsumption { .. })
        ));
        assert!(matches!(
            g2().derivative(-1.0),
            Err(Error::NegativeConsumption { .. })
        ));
    }

    #[test]
    fn quartic_root_derivative_singular_at_zero() {
        assert!(matches!(
            g2().derivative(0.0),
            Err(Error::DerivativeSingularity { .. })
        ));
    }

    #[test]
    fn custom_polynomial_eval_and_derivative() {
        let g = RevenueFunction::Custom {
            coeffs: vec![0.0, 1.5, -0.25, 0.05],
        };
        let x = 0.7;
        let want = 1.5 * x - 0.25 * x * x + 0.05 * x * x * x;
        assert!((g.eval(x).unwrap() - want).abs() < 1e-15);
        let dwant = 1.5 - 0.5 * x + 0.15 * x * x;
        assert!((g.derivative(x).unwrap() - dwant).abs() < 1e-15);
    }

    #[test]
    fn feasible_interval_clamps_to_bounds() {
        let cfg = default_cfg();
        let i = feasible_interval(0.3, &cfg).unwrap();
        assert_eq!((i.lo, i.hi), (0.0, 0.6));
        let i = feasible_interval(0.5, &cfg).unwrap();
        assert!((i.lo - 0.2).abs() < 1e-15 && (i.hi - 0.8).abs() < 1e-15);
    }

    #[test]
    fn wide_ramp_makes_full_range_feasible() {
        let cfg = ScenarioConfig::new(ScenarioParams {
            ramp_delta: 2.0,
            ..ScenarioParams::default()
        })
        .unwrap();
        let i = feasible_interval(1.0, &cfg).unwrap();
        assert_eq!((i.lo, i.hi), (0.0, 1.0));
    }

    #[test]
    fn feasible_interval_rejects_out_of_bounds() {
        let cfg = default_cfg();
        assert!(matches!(
            feasible_interval(1.5, &cfg),
            Err(Error::OutOfBounds { .. })
        ));
    }

    #[test]
    fn gaussian_cdf_midpoint_and_reference_value() {
        let m = LoadModel::gaussian(0.0, 1.0).unwrap();
        assert!((m.cdf(0.0) - 0.5).abs() < 1e-15);
        // Phi(1), cross-checked against direct quadrature in the
        // integration suite.
        assert!((m.cdf(1.0) - 0.841345).abs() < 1e-6);
        assert_eq!(m.cdf(f64::NEG_INFINITY), 0.0);
        assert_eq!(m.cdf(f64::INFINITY), 1.0);
    }

    #[test]
    fn uniform_cdf_is_linear() {
        let m = LoadModel::uniform(0.0, 1.0).unwrap();
        assert_eq!(m.cdf(0.25), 0.25);
        assert_eq!(m.cdf(-1.0), 0.0);
        assert_eq!(m.cdf(2.0), 1.0);
        assert!((m.std_dev() - 1.0 / 12f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn load_model_validation() {
        assert!(LoadModel::gaussian(0.0, 0.0).is_err());
        assert!(LoadModel::uniform(1.0, 1.0).is_err());
        assert!(LoadModel::<f64>::uniform(2.0, 1.0).is_err());
    }

    #[test]
    fn fraction_resolves_rate_exactly() {
        let cfg = default_cfg();
        let g_max = cfg.revenue.eval(cfg.x_max).unwrap();
        assert_eq!(cfg.cp_rate, 0.6 * 10.0 * g_max);
        assert_eq!(cfg.cp_fraction, Some(0.6));
    }

    #[test]
    fn with_horizon_rescales_fractional_rate() {
        let cfg = default_cfg();
        let c4 = cfg.with_horizon(4).unwrap();
        assert_eq!(c4.horizon, 4);
        assert_eq!(c4.cp_rate, 0.6 * 4.0 * cfg.revenue.eval(1.0).unwrap());
        // amortized rate is horizon-independent under a fixed fraction
        assert!((c4.amortized_rate() - cfg.amortized_rate()).abs() < 1e-15);
    }

    #[test]
    fn config_validation_errors() {
        assert!(ScenarioConfig::new(ScenarioParams::<f64> {
            horizon: 0,
            ..ScenarioParams::default()
        })
        .is_err());
        assert!(ScenarioConfig::new(ScenarioParams::<f64> {
            ramp_delta: -0.1,
            ..ScenarioParams::default()
        })
        .is_err());
        assert!(ScenarioConfig::new(ScenarioParams::<f64> {
            x_min: 0.5,
            x_max: 0.5,
            ..ScenarioParams::default()
        })
        .is_err());
        assert!(ScenarioConfig::new(ScenarioParams::<f64> {
            cp_charge: CpCharge::Fraction(1.5),
            ..ScenarioParams::default()
        })
        .is_err());
        assert!(ScenarioConfig::new(ScenarioParams::<f64> {
            initial_x: Some(1.5),
            ..ScenarioParams::default()
        })
        .is_err());
    }
}
