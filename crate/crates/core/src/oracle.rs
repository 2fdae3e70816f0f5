//! Backward-induction ground truth on a discretized (consumption,
//! observed-max) state space.
//!
//! The load is replaced by a discrete law: node `s_j` carries the
//! probability mass of its grid cell. Under that law the expected charge
//! splits into a part pinned to the past peak, whose probability
//! `P(S <= s_m)^(T-t)` does not depend on any future action, and a part
//! charged to future consumption. The pinned part is therefore kept out of
//! the stored value function, which makes the recursion exactly two
//! dimensional per round:
//!
//! ```text
//! V_T(x, j) = 0
//! V_t(x, j) = max_a  g(x_a)
//!                  + C(j) * V_{t+1}(x_a, j)                       (no new peak)
//!                  + sum_{m > j} w_m * V_{t+1}(x_a, m)            (new peak at m)
//!                  - cp_rate * x_a * sum_{m > j} w_m * C(m)^(T-t-1)
//! ```
//!
//! where `C` is the discrete cdf and the last term is the probability that
//! round `t+1` ends up carrying the charge. The full value at a state with
//! past-peak consumption `x_p` is `V_t(x, j) - cp_rate * x_p * C(j)^(T-t)`;
//! the stored actions are optimal for any `x_p`. Ties in the load (`S` equal
//! to the current maximum) leave the peak at the earlier round, matching the
//! first-argmax convention of episode scoring.
//!
//! Memory is `2 (T-1) n_x n_s` values (about 2 * 10^5 at the default
//! n_x = n_s = 101, T = 10). Time slices are computed strictly sequentially;
//! states within a slice are independent.

use crate::domain::{feasible_interval, ScenarioConfig};
use crate::error::{Error, Result};
use crate::num::{linspace, Real};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"CPDP";
const VERSION: u16 = 1;

/// Discretization of consumption and load ranges, with per-cell load
/// probabilities.
#[derive(Debug, Clone)]
pub struct GridSpec<R: Real> {
    pub x_nodes: Vec<R>,
    pub s_nodes: Vec<R>,
    /// Cell probabilities aligned with `s_nodes`; cell boundaries sit midway
    /// between nodes and the edge cells absorb the tails.
    pub s_weights: Vec<R>,
}

impl<R: Real> GridSpec<R> {
    /// Uniform grids: `n_x` consumption nodes over `[x_min, x_max]` and
    /// `n_s` load nodes over the load model's bulk range (>= 0.9999 mass).
    pub fn build(cfg: &ScenarioConfig<R>, n_x: usize, n_s: usize) -> Result<Self> {
        if n_x < 2 || n_s < 2 {
            return Err(Error::InvalidConfig(format!(
                "grids need at least 2 nodes per axis, got n_x = {n_x}, n_s = {n_s}"
            )));
        }
        let x_nodes = linspace(cfg.x_min, cfg.x_max, n_x);
        let (s_lo, s_hi) = cfg.load.bulk_range();
        let s_nodes = linspace(s_lo, s_hi, n_s);

        let half = R::of(0.5);
        let mut s_weights = Vec::with_capacity(n_s);
        for j in 0..n_s {
            let lo_cdf = if j == 0 {
                R::zero()
            } else {
                cfg.load.cdf(half * (s_nodes[j - 1] + s_nodes[j]))
            };
            let hi_cdf = if j == n_s - 1 {
                R::one()
            } else {
                cfg.load.cdf(half * (s_nodes[j] + s_nodes[j + 1]))
            };
            s_weights.push(hi_cdf - lo_cdf);
        }
        let total: R = s_weights.iter().copied().sum();
        for w in &mut s_weights {
            *w = *w / total;
        }
        let renormed: R = s_weights.iter().copied().sum();
        debug_assert!((renormed - R::one()).abs() < R::of(1e-9));

        Ok(Self {
            x_nodes,
            s_nodes,
            s_weights,
        })
    }
}

/// Per-round optimal actions and values over the state grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable<R: Real> {
    pub horizon: u32,
    pub x_nodes: Vec<R>,
    pub s_nodes: Vec<R>,
    /// `actions[t-1][i * n_s + j]`: optimal next consumption at round `t`
    /// from consumption node `i` and observed-max node `j`.
    actions: Vec<Vec<R>>,
    /// Matching optimal values (future reward with the past-pinned charge
    /// excluded; see the module docs).
    values: Vec<Vec<R>>,
}

fn nearest_index<R: Real>(nodes: &[R], v: R) -> usize {
    let n = nodes.len();
    let lo = nodes[0];
    let hi = nodes[n - 1];
    if v <= lo {
        return 0;
    }
    if v >= hi {
        return n - 1;
    }
    let step = (hi - lo) / R::of((n - 1) as f64);
    let i = ((v - lo) / step).round().as_f64() as usize;
    i.min(n - 1)
}

impl<R: Real> PolicyTable<R> {
    pub fn n_x(&self) -> usize {
        self.x_nodes.len()
    }

    pub fn n_s(&self) -> usize {
        self.s_nodes.len()
    }

    /// Stored action at grid state (round `t`, consumption node `i`,
    /// observed-max node `j`).
    pub fn action_at(&self, t: u32, i: usize, j: usize) -> R {
        self.actions[(t - 1) as usize][i * self.n_s() + j]
    }

    /// Stored value at a grid state.
    pub fn value_at(&self, t: u32, i: usize, j: usize) -> R {
        self.values[(t - 1) as usize][i * self.n_s() + j]
    }

    /// Look up the action for an off-grid state: nearest-neighbor on both
    /// axes, then projected into the true feasible interval of `x_t` so the
    /// returned action is ramp-feasible even between nodes.
    pub fn act(&self, x_t: R, s_m: R, t: u32, cfg: &ScenarioConfig<R>) -> Result<R> {
        if t < 1 || t >= self.horizon {
            return Err(Error::RoundOutOfRange {
                t,
                max_t: self.horizon.saturating_sub(1),
            });
        }
        let interval = feasible_interval(x_t, cfg)?;
        let i = nearest_index(&self.x_nodes, x_t);
        let j = nearest_index(&self.s_nodes, s_m);
        Ok(interval.project(self.action_at(t, i, j)))
    }

    /// Write the table as a little-endian binary file: magic `CPDP`,
    /// version u16, horizon u32, n_x u32, n_s u32, grid bounds as four f64,
    /// then per decision round the action matrix followed by the value
    /// matrix, row-major over (consumption node, load node).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf: Vec<u8> = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&self.horizon.to_le_bytes());
        buf.extend_from_slice(&(self.n_x() as u32).to_le_bytes());
        buf.extend_from_slice(&(self.n_s() as u32).to_le_bytes());
        for v in [
            self.x_nodes[0],
            self.x_nodes[self.n_x() - 1],
            self.s_nodes[0],
            self.s_nodes[self.n_s() - 1],
        ] {
            buf.extend_from_slice(&v.as_f64().to_le_bytes());
        }
        for t in 0..self.actions.len() {
            for m in [&self.actions[t], &self.values[t]] {
                for &v in m.iter() {
                    buf.extend_from_slice(&v.as_f64().to_le_bytes());
                }
            }
        }
        let mut file = std::fs::File::create(path.as_ref())?;
        file.write_all(&buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path.as_ref())?.read_to_end(&mut bytes)?;
        let mut pos = 0usize;
        let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
            if *pos + n > bytes.len() {
                return Err(Error::FileFormat("policy table file is truncated".into()));
            }
            let s = &bytes[*pos..*pos + n];
            *pos += n;
            Ok(s)
        };

        if take(&mut pos, 4)? != MAGIC {
            return Err(Error::FileFormat("bad magic; not a CPDP table".into()));
        }
        let version = u16::from_le_bytes(take(&mut pos, 2)?.try_into().unwrap());
        if version != VERSION {
            return Err(Error::FileFormat(format!(
                "unsupported CPDP version {version}"
            )));
        }
        let horizon = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap());
        let n_x = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        let n_s = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        if horizon < 2 || n_x < 2 || n_s < 2 {
            return Err(Error::FileFormat("degenerate CPDP header".into()));
        }
        let mut bounds = [0.0f64; 4];
        for b in &mut bounds {
            *b = f64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap());
        }
        let x_nodes = linspace(R::of(bounds[0]), R::of(bounds[1]), n_x);
        let s_nodes = linspace(R::of(bounds[2]), R::of(bounds[3]), n_s);

        let rounds = (horizon - 1) as usize;
        let cells = n_x * n_s;
        let mut actions = Vec::with_capacity(rounds);
        let mut values = Vec::with_capacity(rounds);
        for _ in 0..rounds {
            for dst in [&mut actions, &mut values] {
                let mut m = Vec::with_capacity(cells);
                for _ in 0..cells {
                    let v = f64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap());
                    m.push(R::of(v));
                }
                dst.push(m);
            }
        }
        if pos != bytes.len() {
            return Err(Error::FileFormat(
                "trailing bytes after CPDP payload".into(),
            ));
        }
        Ok(Self {
            horizon,
            x_nodes,
            s_nodes,
            actions,
            values,
        })
    }
}

/// Backward induction over the grid; see the module docs for the recursion.
pub fn solve_grid_dp<R: Real>(cfg: &ScenarioConfig<R>, grid: &GridSpec<R>) -> Result<PolicyTable<R>> {
    if cfg.horizon < 2 {
        return Err(Error::InvalidConfig(
            "grid policies need a horizon of at least 2".into(),
        ));
    }
    let n_x = grid.x_nodes.len();
    let n_s = grid.s_nodes.len();
    let spacing = (cfg.x_max - cfg.x_min) / R::of((n_x - 1) as f64);
    let two_delta = R::of(2.0) * cfg.ramp_delta;
    if spacing > two_delta {
        return Err(Error::GridTooCoarse {
            spacing: spacing.as_f64(),
            limit: two_delta.as_f64(),
        });
    }

    // revenue at every consumption node
    let g_at: Vec<R> = grid
        .x_nodes
        .iter()
        .map(|&x| cfg.revenue.eval(x))
        .collect::<Result<_>>()?;

    // discrete cdf at load nodes
    let mut cum = Vec::with_capacity(n_s);
    let mut acc = R::zero();
    for &w in &grid.s_weights {
        acc = acc + w;
        cum.push(acc);
    }

    // feasible grid-action index range per consumption node
    let tol = spacing * R::of(1e-9);
    let ranges: Vec<(usize, usize)> = (0..n_x)
        .map(|i| {
            let lo_val = (grid.x_nodes[i] - cfg.ramp_delta).max(cfg.x_min) - tol;
            let hi_val = (grid.x_nodes[i] + cfg.ramp_delta).min(cfg.x_max) + tol;
            let a_lo = grid.x_nodes.iter().position(|&x| x >= lo_val).unwrap_or(i);
            let a_hi = grid.x_nodes.iter().rposition(|&x| x <= hi_val).unwrap_or(i);
            debug_assert!(a_lo <= i && i <= a_hi);
            (a_lo, a_hi)
        })
        .collect();

    let rounds = (cfg.horizon - 1) as usize;
    let cells = n_x * n_s;
    let mut actions = vec![vec![R::zero(); cells]; rounds];
    let mut values = vec![vec![R::zero(); cells]; rounds];
    let mut v_next = vec![R::zero(); cells]; // V_T = 0

    let mut suf_v = vec![R::zero(); cells];
    let mut suf_beta = vec![R::zero(); n_s];

    for t in (1..=rounds).rev() {
        let exceed_exponent = (cfg.horizon - t as u32 - 1) as i32;

        // suffix sums over load nodes strictly above j
        for a in 0..n_x {
            let row = a * n_s;
            suf_v[row + n_s - 1] = R::zero();
            for j in (0..n_s - 1).rev() {
                suf_v[row + j] =
                    suf_v[row + j + 1] + grid.s_weights[j + 1] * v_next[row + j + 1];
            }
        }
        suf_beta[n_s - 1] = R::zero();
        for j in (0..n_s - 1).rev() {
            suf_beta[j] = suf_beta[j + 1]
                + grid.s_weights[j + 1] * cum[j + 1].powi(exceed_exponent);
        }

        let act_slice = &mut actions[t - 1];
        let val_slice = &mut values[t - 1];
        for i in 0..n_x {
            let (a_lo, a_hi) = ranges[i];
            for j in 0..n_s {
                let mut best_a = a_lo;
                let mut best_q = R::neg_infinity();
                for a in a_lo..=a_hi {
                    let q = g_at[a] + cum[j] * v_next[a * n_s + j] + suf_v[a * n_s + j]
                        - cfg.cp_rate * grid.x_nodes[a] * suf_beta[j];
                    if q > best_q {
                        best_q = q;
                        best_a = a;
                    }
                }
                act_slice[i * n_s + j] = grid.x_nodes[best_a];
                val_slice[i * n_s + j] = best_q;
            }
        }
        v_next.copy_from_slice(val_slice);
    }

    Ok(PolicyTable {
        horizon: cfg.horizon,
        x_nodes: grid.x_nodes.clone(),
        s_nodes: grid.s_nodes.clone(),
        actions,
        values,
    })
}
