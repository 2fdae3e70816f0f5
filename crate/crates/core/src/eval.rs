//! Episode simulation and head-to-head policy comparison.
//!
//! Compared policies always see identical load sequences per episode
//! (common random numbers): episode `e` draws its loads from an RNG stream
//! derived from `(seed, e)`, and any action randomness gets a separate
//! stream per `(episode, policy)`. Results are therefore bit-identical
//! across runs and thread counts.

use crate::domain::{feasible_interval, ScenarioConfig};
use crate::error::{Error, Result};
use crate::neural::MlpPolicy;
use crate::num::{fmt_sig17, Real};
use crate::oracle::PolicyTable;
use crate::reward::{episode_reward, initial_consumption, naive_consumption, EpisodeTrace};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Streams per episode in the paired runner: one for loads plus one per
/// policy for action randomness.
const STREAMS_PER_EPISODE: u64 = 64;

/// A policy under a uniform act interface.
#[derive(Debug, Clone)]
pub enum PolicyHandle<R: Real> {
    /// Holds the naive benchmark consumption every round.
    Naive { consumption: R },
    /// Nearest-neighbor lookup into a backward-induction table.
    Grid(PolicyTable<R>),
    /// Trained network, output projected to feasibility.
    Neural(MlpPolicy<R>),
    /// Uniform draw from the feasible interval; a noise floor for
    /// comparisons.
    Random,
}

impl<R: Real> PolicyHandle<R> {
    pub fn naive(cfg: &ScenarioConfig<R>) -> Self {
        Self::Naive {
            consumption: naive_consumption(cfg),
        }
    }

    pub fn grid(table: PolicyTable<R>) -> Self {
        Self::Grid(table)
    }

    pub fn neural(policy: MlpPolicy<R>) -> Self {
        Self::Neural(policy)
    }

    pub fn random() -> Self {
        Self::Random
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Naive { .. } => "naive",
            Self::Grid(_) => "grid",
            Self::Neural(_) => "nn",
            Self::Random => "random",
        }
    }

    /// Horizon the policy was built for, when it has one.
    pub fn trained_horizon(&self) -> Option<u32> {
        match self {
            Self::Grid(t) => Some(t.horizon),
            Self::Neural(p) => Some(p.horizon),
            _ => None,
        }
    }

    fn check_horizon(&self, cfg: &ScenarioConfig<R>) -> Result<()> {
        if let Some(h) = self.trained_horizon() {
            if h != cfg.horizon {
                return Err(Error::HorizonMismatch {
                    policy: h,
                    config: cfg.horizon,
                });
            }
        }
        Ok(())
    }

    /// Round-1 consumption for episodes driven by this policy. The naive
    /// handle starts at its own constant; everything else starts at the
    /// scenario's initial consumption.
    pub fn first_consumption(&self, cfg: &ScenarioConfig<R>) -> R {
        match self {
            Self::Naive { consumption } => *consumption,
            _ => initial_consumption(cfg),
        }
    }

    /// Next consumption from state `(x_t, s_m)` at round `t`; always inside
    /// the feasible interval of `x_t`.
    pub fn act<G: Rng + ?Sized>(
        &self,
        x_t: R,
        s_m: R,
        t: u32,
        cfg: &ScenarioConfig<R>,
        rng: &mut G,
    ) -> Result<R> {
        match self {
            Self::Naive { consumption } => {
                Ok(feasible_interval(x_t, cfg)?.project(*consumption))
            }
            Self::Grid(table) => table.act(x_t, s_m, t, cfg),
            Self::Neural(policy) => policy.act(x_t, s_m, cfg.horizon - t, cfg),
            Self::Random => {
                let interval = feasible_interval(x_t, cfg)?;
                Ok(R::uniform_in(interval.lo, interval.hi, rng))
            }
        }
    }
}

/// Run one episode against a pre-drawn load sequence.
fn simulate_on_loads<R: Real, G: Rng + ?Sized>(
    policy: &PolicyHandle<R>,
    cfg: &ScenarioConfig<R>,
    loads: &[R],
    action_rng: &mut G,
) -> Result<EpisodeTrace<R>> {
    debug_assert_eq!(loads.len(), cfg.horizon as usize);
    let mut consumption = Vec::with_capacity(cfg.horizon as usize);
    consumption.push(policy.first_consumption(cfg));
    let mut s_m = R::neg_infinity();
    for t in 1..cfg.horizon {
        s_m = s_m.max(loads[(t - 1) as usize]);
        let x_next = policy.act(consumption[(t - 1) as usize], s_m, t, cfg, action_rng)?;
        consumption.push(x_next);
    }
    episode_reward(&consumption, loads, cfg)
}

/// Simulate one episode, drawing loads and any action randomness from the
/// given RNG in round order: observe `s_t`, update the running maximum,
/// choose `x_{t+1}`, and score after the final load.
pub fn simulate_episode<R: Real, G: Rng + ?Sized>(
    policy: &PolicyHandle<R>,
    cfg: &ScenarioConfig<R>,
    rng: &mut G,
) -> Result<EpisodeTrace<R>> {
    policy.check_horizon(cfg)?;
    let mut consumption = Vec::with_capacity(cfg.horizon as usize);
    let mut loads = Vec::with_capacity(cfg.horizon as usize);
    consumption.push(policy.first_consumption(cfg));
    let mut s_m = R::neg_infinity();
    for t in 1..cfg.horizon {
        let s_t = cfg.load.sample(rng);
        loads.push(s_t);
        s_m = s_m.max(s_t);
        let x_next = policy.act(consumption[(t - 1) as usize], s_m, t, cfg, rng)?;
        consumption.push(x_next);
    }
    loads.push(cfg.load.sample(rng));
    episode_reward(&consumption, &loads, cfg)
}

/// Per-episode rewards for each policy under common random loads;
/// `rewards[p][e]` is policy `p` on episode `e`.
#[derive(Debug, Clone)]
pub struct PairedRewards<R: Real> {
    pub names: Vec<String>,
    pub rewards: Vec<Vec<R>>,
}

/// Evaluate all policies on the same `n_episodes` load sequences.
pub fn paired_rewards<R: Real>(
    policies: &[(String, PolicyHandle<R>)],
    cfg: &ScenarioConfig<R>,
    n_episodes: usize,
    seed: u64,
) -> Result<PairedRewards<R>> {
    if policies.is_empty() || n_episodes == 0 {
        return Err(Error::InvalidConfig(
            "paired evaluation needs at least one policy and one episode".into(),
        ));
    }
    if policies.len() as u64 >= STREAMS_PER_EPISODE {
        return Err(Error::InvalidConfig(format!(
            "at most {} policies per comparison",
            STREAMS_PER_EPISODE - 1
        )));
    }
    for (_, p) in policies {
        p.check_horizon(cfg)?;
    }

    let per_episode: Vec<Vec<R>> = (0..n_episodes)
        .into_par_iter()
        .map(|e| -> Result<Vec<R>> {
            let base = e as u64 * STREAMS_PER_EPISODE;
            let mut load_rng = ChaCha8Rng::seed_from_u64(seed);
            load_rng.set_stream(base);
            let loads: Vec<R> = (0..cfg.horizon)
                .map(|_| cfg.load.sample(&mut load_rng))
                .collect();
            policies
                .iter()
                .enumerate()
                .map(|(p_idx, (_, policy))| {
                    let mut action_rng = ChaCha8Rng::seed_from_u64(seed);
                    action_rng.set_stream(base + 1 + p_idx as u64);
                    Ok(simulate_on_loads(policy, cfg, &loads, &mut action_rng)?.reward)
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut rewards = vec![Vec::with_capacity(n_episodes); policies.len()];
    for row in per_episode {
        for (p, r) in row.into_iter().enumerate() {
            rewards[p].push(r);
        }
    }
    Ok(PairedRewards {
        names: policies.iter().map(|(n, _)| n.clone()).collect(),
        rewards,
    })
}

/// Mean, sample standard deviation, and standard error of a reward series.
pub fn reward_stats<R: Real>(rewards: &[R]) -> (R, R, R) {
    let n = R::of(rewards.len() as f64);
    let mean = rewards.iter().copied().sum::<R>() / n;
    if rewards.len() < 2 {
        return (mean, R::zero(), R::zero());
    }
    let ss = rewards
        .iter()
        .map(|&r| (r - mean) * (r - mean))
        .sum::<R>();
    let std_dev = (ss / (n - R::one())).sqrt();
    (mean, std_dev, std_dev / n.sqrt())
}

/// Mean and standard error of the pairwise difference `a - b`.
pub fn paired_diff_stats<R: Real>(a: &[R], b: &[R]) -> (R, R) {
    assert_eq!(a.len(), b.len(), "paired series must have equal length");
    let diffs: Vec<R> = a.iter().zip(b).map(|(&x, &y)| x - y).collect();
    let (mean, _, se) = reward_stats(&diffs);
    (mean, se)
}

/// Summary statistics for one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyStats<R: Real> {
    pub name: String,
    pub horizon: u32,
    pub mean: R,
    pub std_dev: R,
    pub std_err: R,
    pub episodes: usize,
}

/// Paired-evaluation summary; every policy saw the same loads and the same
/// episode count.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport<R: Real> {
    pub seed: u64,
    pub episodes: usize,
    pub rows: Vec<PolicyStats<R>>,
}

impl<R: Real> ComparisonReport<R> {
    /// CSV with header `policy,T,mean,std,stderr,n`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("policy,T,mean,std,stderr,n\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.name,
                r.horizon,
                fmt_sig17(r.mean),
                fmt_sig17(r.std_dev),
                fmt_sig17(r.std_err),
                r.episodes
            ));
        }
        out
    }
}

/// Paired comparison of policies: identical load sequences per episode,
/// reported as mean / std / standard error per policy.
pub fn compare_policies<R: Real>(
    policies: &[(String, PolicyHandle<R>)],
    cfg: &ScenarioConfig<R>,
    n_episodes: usize,
    seed: u64,
) -> Result<ComparisonReport<R>> {
    let paired = paired_rewards(policies, cfg, n_episodes, seed)?;
    let rows = paired
        .names
        .iter()
        .zip(&paired.rewards)
        .map(|(name, rewards)| {
            let (mean, std_dev, std_err) = reward_stats(rewards);
            PolicyStats {
                name: name.clone(),
                horizon: cfg.horizon,
                mean,
                std_dev,
                std_err,
                episodes: rewards.len(),
            }
        })
        .collect();
    Ok(ComparisonReport {
        seed,
        episodes: n_episodes,
        rows,
    })
}

/// Action surface `x_{t+1} = f(s_m; t)` at fixed current consumption, for
/// plotting and CSV export. Rows follow `t_values`, columns follow
/// `s_m_grid`; every entry is feasible with respect to `x_fixed`.
pub fn policy_slice<R: Real>(
    policy: &PolicyHandle<R>,
    x_fixed: R,
    t_values: &[u32],
    s_m_grid: &[R],
    cfg: &ScenarioConfig<R>,
    seed: u64,
) -> Result<Vec<Vec<R>>> {
    policy.check_horizon(cfg)?;
    let mut rows = Vec::with_capacity(t_values.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (ri, &t) in t_values.iter().enumerate() {
        let mut row = Vec::with_capacity(s_m_grid.len());
        for (ci, &s_m) in s_m_grid.iter().enumerate() {
            rng.set_stream((ri * s_m_grid.len() + ci) as u64);
            row.push(policy.act(x_fixed, s_m, t, cfg, &mut rng)?);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// CSV with header `t,s_m,action`, row-major over the slice matrix.
pub fn slice_to_csv<R: Real>(t_values: &[u32], s_m_grid: &[R], rows: &[Vec<R>]) -> String {
    let mut out = String::from("t,s_m,action\n");
    for (ri, &t) in t_values.iter().enumerate() {
        for (ci, &s_m) in s_m_grid.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{}\n",
                t,
                fmt_sig17(s_m),
                fmt_sig17(rows[ri][ci])
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{CpCharge, RevenueFunction, ScenarioParams};
    use crate::oracle::{solve_grid_dp, GridSpec};

    fn cfg(horizon: u32) -> ScenarioConfig<f64> {
        ScenarioConfig::new(ScenarioParams {
            horizon,
            ..ScenarioParams::default()
        })
        .unwrap()
    }

    #[test]
    fn naive_episode_has_closed_form_reward() {
        let c = ScenarioConfig::new(ScenarioParams {
            horizon: 6,
            revenue: RevenueFunction::QuarticRoot,
            ..ScenarioParams::default()
        })
        .unwrap();
        let policy = PolicyHandle::naive(&c);
        let x_star = naive_consumption(&c);
        let want =
            6.0 * c.revenue.eval(x_star).unwrap() - c.cp_rate * x_star;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let trace = simulate_episode(&policy, &c, &mut rng).unwrap();
            assert!(trace.consumption.iter().all(|&x| x == x_star));
            assert!((trace.reward - want).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_ramp_freezes_consumption() {
        let c = ScenarioConfig::new(ScenarioParams {
            horizon: 5,
            ramp_delta: 0.0,
            initial_x: Some(0.4),
            ..ScenarioParams::default()
        })
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for policy in [PolicyHandle::random(), PolicyHandle::naive(&c)] {
            let trace = simulate_episode(&policy, &c, &mut rng).unwrap();
            let expect = policy.first_consumption(&c);
            assert!(trace.consumption.iter().all(|&x| x == expect), "{policy:?}");
        }
    }

    #[test]
    fn single_round_episode_works() {
        let c = cfg(1);
        let policy = PolicyHandle::naive(&c);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let trace = simulate_episode(&policy, &c, &mut rng).unwrap();
        assert_eq!(trace.consumption.len(), 1);
        assert_eq!(trace.peak_round, 1);
    }

    #[test]
    fn policy_compared_to_itself_is_identical() {
        let c = cfg(4);
        let report = compare_policies(
            &[
                ("a".into(), PolicyHandle::naive(&c)),
                ("b".into(), PolicyHandle::naive(&c)),
            ],
            &c,
            500,
            11,
        )
        .unwrap();
        assert_eq!(report.rows[0].mean, report.rows[1].mean);
        assert_eq!(report.rows[0].std_dev, report.rows[1].std_dev);
        assert_eq!(report.rows[0].episodes, report.rows[1].episodes);
    }

    #[test]
    fn oracle_beats_random_noise() {
        let c = cfg(3);
        let grid = GridSpec::build(&c, 41, 21).unwrap();
        let table = solve_grid_dp(&c, &grid).unwrap();
        let report = compare_policies(
            &[
                ("random".into(), PolicyHandle::random()),
                ("grid".into(), PolicyHandle::grid(table)),
            ],
            &c,
            10_000,
            5,
        )
        .unwrap();
        assert!(
            report.rows[1].mean > report.rows[0].mean,
            "oracle {} vs random {}",
            report.rows[1].mean,
            report.rows[0].mean
        );
    }

    #[test]
    fn paired_reports_are_reproducible_and_thread_independent() {
        let c = cfg(4);
        let policies = vec![
            ("naive".into(), PolicyHandle::naive(&c)),
            ("random".into(), PolicyHandle::random()),
        ];
        let a = compare_policies(&policies, &c, 2000, 7).unwrap().to_csv();
        let b = compare_policies(&policies, &c, 2000, 7).unwrap().to_csv();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c_seq =
            pool.install(|| compare_policies(&policies, &c, 2000, 7).unwrap().to_csv());
        assert_eq!(a, c_seq);
        let d = compare_policies(&policies, &c, 2000, 8).unwrap().to_csv();
        assert_ne!(a, d);
    }

    #[test]
    fn horizon_mismatch_is_rejected() {
        let c = cfg(4);
        let grid = GridSpec::build(&c, 21, 11).unwrap();
        let table = solve_grid_dp(&c, &grid).unwrap();
        let c9 = c.with_horizon(9).unwrap();
        let policy = PolicyHandle::grid(table);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            simulate_episode(&policy, &c9, &mut rng),
            Err(Error::HorizonMismatch { .. })
        ));
        assert!(matches!(
            compare_policies(&[("g".into(), policy)], &c9, 10, 0),
            Err(Error::HorizonMismatch { .. })
        ));
    }

    #[test]
    fn naive_slice_is_constant_and_feasible() {
        let c = cfg(4);
        let policy = PolicyHandle::naive(&c);
        let s_grid = [-2.0, 0.0, 2.0];
        let rows = policy_slice(&policy, 0.3, &[1, 2, 3], &s_grid, &c, 0).unwrap();
        let x_star = naive_consumption(&c);
        for row in &rows {
            for &a in row {
                assert_eq!(a, x_star.clamp(0.0, 0.6));
                assert!((0.0..=0.6).contains(&a));
            }
        }
        let csv = slice_to_csv(&[1, 2, 3], &s_grid, &rows);
        assert_eq!(csv.lines().count(), 1 + 9);
        assert!(csv.starts_with("t,s_m,action\n"));
    }

    #[test]
    fn random_slice_outputs_stay_feasible() {
        let c = cfg(4);
        let s_grid: Vec<f64> = (-8..=8).map(|i| i as f64 / 2.0).collect();
        let rows =
            policy_slice(&PolicyHandle::random(), 0.3, &[1, 2, 3], &s_grid, &c, 3).unwrap();
        for row in &rows {
            for &a in row {
                assert!((0.0..=0.6).contains(&a));
            }
        }
        // deterministic per seed
        let again =
            policy_slice(&PolicyHandle::random(), 0.3, &[1, 2, 3], &s_grid, &c, 3).unwrap();
        assert_eq!(rows, again);
    }
}
