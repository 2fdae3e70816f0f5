//! Monte Carlo path sampling: near-optimal action targets from forward
//! rollouts, and the training-set generator built on them.
//!
//! For a query state `(x_t, s_m, t)` the feasible next consumptions are
//! discretized; each candidate is scored by `C` forward rollouts in which
//! loads are drawn from the load model and every later consumption is drawn
//! uniformly from its ramp-feasible interval. Each rollout is scored as a
//! synthetic episode whose load sequence starts at `s_m`, so a maximum that
//! is never exceeded charges the current consumption `x_t` (see
//! [`PastPeakCharge`] for the configurable stand-in). The candidate with the
//! best average reward becomes the training target.

use crate::domain::{feasible_interval, ScenarioConfig};
use crate::error::{Error, Result};
use crate::num::{fmt_sig17, linspace, Real};
use crate::reward::score_trace;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::io::{BufRead, Write};

/// Consumption charged when the synthetic trace's peak stays at the
/// observed maximum `s_m` (a past round whose true consumption the sampler
/// cannot know).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PastPeakCharge<R: Real> {
    /// Charge the current consumption `x_t`, treating it as a stand-in for
    /// the unknown past-peak consumption. This is the literal rollout
    /// scoring rule and the default.
    CurrentConsumption,
    /// Charge a fixed value instead; useful for sensitivity experiments on
    /// the stand-in assumption.
    Fixed(R),
}

/// Rollout-sampling knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerParams<R: Real> {
    /// Rollouts per candidate action (`C`).
    pub n_rollouts: u32,
    /// Number of candidate actions the feasible interval is split into.
    pub n_action_grid: usize,
    /// Training samples generated per decision round.
    pub samples_per_round: u32,
    pub past_peak_charge: PastPeakCharge<R>,
}

impl<R: Real> Default for SamplerParams<R> {
    fn default() -> Self {
        Self {
            n_rollouts: 100,
            n_action_grid: 25,
            samples_per_round: 1000,
            past_peak_charge: PastPeakCharge::CurrentConsumption,
        }
    }
}

impl<R: Real> SamplerParams<R> {
    fn validate(&self) -> Result<()> {
        if self.n_rollouts < 1 || self.n_action_grid < 1 || self.samples_per_round < 1 {
            return Err(Error::InvalidConfig(
                "sampler parameters must all be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// One supervised pair produced by rollout sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingSample<R: Real> {
    pub x_t: R,
    pub s_m: R,
    pub rounds_left: u32,
    pub target: R,
}

/// One forward rollout from candidate action `cand`, reusing the caller's
/// trace buffers. The synthetic episode is
/// `x = [x_t, cand, x_{t+2}, ..., x_T]`, `s = [s_m, s_{t+1}, ..., s_T]`.
fn rollout_reward<R: Real, G: Rng + ?Sized>(
    cand: R,
    x_t: R,
    s_m: R,
    t: u32,
    cfg: &ScenarioConfig<R>,
    params: &SamplerParams<R>,
    rng: &mut G,
    xs: &mut Vec<R>,
    ss: &mut Vec<R>,
) -> R {
    xs.clear();
    ss.clear();
    xs.push(x_t);
    xs.push(cand);
    ss.push(s_m);
    ss.push(cfg.load.sample(rng));

    let mut prev = cand;
    for _ in (t + 2)..=cfg.horizon {
        ss.push(cfg.load.sample(rng));
        let lo = (prev - cfg.ramp_delta).max(cfg.x_min);
        let hi = (prev + cfg.ramp_delta).min(cfg.x_max);
        let x_k = R::uniform_in(lo, hi, rng);
        xs.push(x_k);
        prev = x_k;
    }

    let (peak_round, gross, _, reward) =
        score_trace(xs, ss, cfg).expect("rollout traces are in bounds by construction");
    match params.past_peak_charge {
        PastPeakCharge::CurrentConsumption => reward,
        PastPeakCharge::Fixed(v) => {
            if peak_round == 1 {
                gross - cfg.cp_rate * v
            } else {
                reward
            }
        }
    }
}

/// Estimated optimal next consumption at `(x_t, s_m, t)` by rollout
/// sampling; ties go to the smallest candidate.
pub fn sample_target<R: Real, G: Rng + ?Sized>(
    x_t: R,
    s_m: R,
    t: u32,
    cfg: &ScenarioConfig<R>,
    params: &SamplerParams<R>,
    rng: &mut G,
) -> Result<R> {
    params.validate()?;
    if t < 1 || t >= cfg.horizon {
        return Err(Error::RoundOutOfRange {
            t,
            max_t: cfg.horizon.saturating_sub(1),
        });
    }
    let interval = feasible_interval(x_t, cfg)?;
    let candidates = linspace(interval.lo, interval.hi, params.n_action_grid);

    let mut xs: Vec<R> = Vec::with_capacity(cfg.horizon as usize);
    let mut ss: Vec<R> = Vec::with_capacity(cfg.horizon as usize);
    let mut best = candidates[0];
    let mut best_total = R::neg_infinity();
    for &cand in &candidates {
        let mut total = R::zero();
        for _ in 0..params.n_rollouts {
            total = total
                + rollout_reward(cand, x_t, s_m, t, cfg, params, rng, &mut xs, &mut ss);
        }
        if total > best_total {
            best_total = total;
            best = cand;
        }
    }
    Ok(best)
}

/// Generate `samples_per_round` training samples for every decision round
/// `t in [1, T-1]`.
///
/// Query states follow the reachable-state distribution: `x_t` uniform over
/// the consumption bounds and `s_m` distributed as the maximum of `t` load
/// draws. Sample `i` of the dataset uses its own RNG stream derived from
/// `(seed, i)`, so the output is bit-identical across runs and thread
/// counts; the returned order is by sample index.
pub fn generate_dataset<R: Real>(
    cfg: &ScenarioConfig<R>,
    params: &SamplerParams<R>,
    seed: u64,
) -> Result<Vec<TrainingSample<R>>> {
    params.validate()?;
    if cfg.horizon < 2 {
        return Err(Error::InvalidConfig(
            "dataset generation needs a horizon of at least 2".into(),
        ));
    }
    let per_round = params.samples_per_round as usize;
    let total = (cfg.horizon as usize - 1) * per_round;

    (0..total)
        .into_par_iter()
        .map(|idx| {
            let t = 1 + (idx / per_round) as u32;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(idx as u64 + 1);

            let x_t = R::uniform_in(cfg.x_min, cfg.x_max, &mut rng);
            let mut s_m = cfg.load.sample(&mut rng);
            for _ in 1..t {
                s_m = s_m.max(cfg.load.sample(&mut rng));
            }
            let target = sample_target(x_t, s_m, t, cfg, params, &mut rng)?;
            Ok(TrainingSample {
                x_t,
                s_m,
                rounds_left: cfg.horizon - t,
                target,
            })
        })
        .collect()
}

/// CSV with header `x_t,s_m,rounds_left,target`, 17-significant-digit
/// floats, LF line endings.
pub fn write_dataset_csv<R: Real, W: Write>(
    samples: &[TrainingSample<R>],
    out: &mut W,
) -> Result<()> {
    let mut text = String::from("x_t,s_m,rounds_left,target\n");
    for s in samples {
        text.push_str(&fmt_sig17(s.x_t));
        text.push(',');
        text.push_str(&fmt_sig17(s.s_m));
        text.push(',');
        text.push_str(&s.rounds_left.to_string());
        text.push(',');
        text.push_str(&fmt_sig17(s.target));
        text.push('\n');
    }
    out.write_all(text.as_bytes())?;
    Ok(())
}

pub fn read_dataset_csv<R: Real, Rd: BufRead>(reader: Rd) -> Result<Vec<TrainingSample<R>>> {
    let mut samples = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if i == 0 {
            if line.trim_end() != "x_t,s_m,rounds_left,target" {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("unexpected header {line:?}"),
                });
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let parse_real = |s: &str| -> Result<R> {
            s.trim()
                .parse::<f64>()
                .map(R::of)
                .map_err(|e| Error::Parse {
                    line: lineno,
                    msg: format!("bad float {s:?}: {e}"),
                })
        };
        let rounds_left = fields[2].trim().parse::<u32>().map_err(|e| Error::Parse {
            line: lineno,
            msg: format!("bad rounds_left {:?}: {e}", fields[2]),
        })?;
        samples.push(TrainingSample {
            x_t: parse_real(fields[0])?,
            s_m: parse_real(fields[1])?,
            rounds_left,
            target: parse_real(fields[3])?,
        });
    }
    Ok(samples)
}
