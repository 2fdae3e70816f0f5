//! The rollout-trained policy: a fixed 4-input, 4-hidden-sigmoid,
//! scalar-output network mapping (current consumption, observed max,
//! rounds left, constant 1) to the next consumption.
//!
//! Training is plain mini-batch SGD on mean squared error, single threaded
//! and fully determined by the seed. Raw network outputs are unclamped;
//! [`MlpPolicy::act`] projects them into the ramp-feasible interval.

use crate::domain::{feasible_interval, ScenarioConfig};
use crate::error::{Error, Result};
use crate::num::{fmt_sig17, Real};
use crate::sampler::TrainingSample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::path::Path;

pub const N_INPUTS: usize = 4;
pub const N_HIDDEN: usize = 4;

/// Fixed affine input normalization: consumption mapped to `[0, 1]` by the
/// bounds, observed max standardized by the load model's mean and standard
/// deviation, rounds-left divided by the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputScaling<R: Real> {
    pub x_offset: R,
    pub x_scale: R,
    pub s_offset: R,
    pub s_scale: R,
    pub rounds_scale: R,
}

impl<R: Real> InputScaling<R> {
    pub fn from_config(cfg: &ScenarioConfig<R>) -> Self {
        Self {
            x_offset: cfg.x_min,
            x_scale: cfg.x_max - cfg.x_min,
            s_offset: cfg.load.mean(),
            s_scale: cfg.load.std_dev(),
            rounds_scale: R::of(cfg.horizon as f64),
        }
    }

    /// Identity scaling, handy for hand-built networks in tests.
    pub fn identity() -> Self {
        Self {
            x_offset: R::zero(),
            x_scale: R::one(),
            s_offset: R::zero(),
            s_scale: R::one(),
            rounds_scale: R::one(),
        }
    }
}

/// Hyperparameters and bookkeeping from the run that produced a policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingMeta<R: Real> {
    pub learning_rate: R,
    pub batch_size: u32,
    pub epochs: u32,
    pub seed: u64,
    pub final_loss: R,
}

/// Weights of the policy network plus the normalization and horizon it was
/// trained for.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpPolicy<R: Real> {
    /// `hidden_weights[h][i]`: weight from input `i` (the fourth input is
    /// the constant 1) into hidden unit `h`.
    pub hidden_weights: [[R; N_INPUTS]; N_HIDDEN],
    pub output_weights: [R; N_HIDDEN],
    pub output_bias: R,
    pub scaling: InputScaling<R>,
    pub horizon: u32,
    pub meta: TrainingMeta<R>,
}

/// SGD settings; the defaults are the ones used for every reported run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions<R: Real> {
    pub learning_rate: R,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl<R: Real> Default for TrainOptions<R> {
    fn default() -> Self {
        Self {
            learning_rate: R::of(0.05),
            batch_size: 32,
            epochs: 2000,
            seed: 0,
        }
    }
}

/// Loss curve of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport<R: Real> {
    /// Mean squared training loss per epoch, measured on the predictions
    /// made during the epoch.
    pub epoch_losses: Vec<R>,
    /// Full-dataset mean squared error after the final update.
    pub validation_loss: R,
    pub epochs: usize,
}

fn sigmoid<R: Real>(z: R) -> R {
    R::one() / (R::one() + (-z).exp())
}

fn check_finite<R: Real>(name: &'static str, v: R) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::NonFiniteInput {
            name,
            value: v.as_f64(),
        });
    }
    Ok(())
}

impl<R: Real> MlpPolicy<R> {
    fn features(&self, x_t: R, s_m: R, rounds_left: u32) -> [R; N_INPUTS] {
        [
            (x_t - self.scaling.x_offset) / self.scaling.x_scale,
            (s_m - self.scaling.s_offset) / self.scaling.s_scale,
            R::of(rounds_left as f64) / self.scaling.rounds_scale,
            R::one(),
        ]
    }

    fn forward_parts(&self, u: &[R; N_INPUTS]) -> ([R; N_HIDDEN], R) {
        let mut acts = [R::zero(); N_HIDDEN];
        let mut y = self.output_bias;
        for h in 0..N_HIDDEN {
            let mut z = R::zero();
            for i in 0..N_INPUTS {
                z = z + self.hidden_weights[h][i] * u[i];
            }
            acts[h] = sigmoid(z);
            y = y + self.output_weights[h] * acts[h];
        }
        (acts, y)
    }

    /// Raw (unclamped) network output.
    pub fn forward(&self, x_t: R, s_m: R, rounds_left: u32) -> Result<R> {
        check_finite("x_t", x_t)?;
        check_finite("s_m", s_m)?;
        if rounds_left < 1 {
            return Err(Error::RoundOutOfRange {
                t: 0,
                max_t: self.horizon.saturating_sub(1),
            });
        }
        let u = self.features(x_t, s_m, rounds_left);
        Ok(self.forward_parts(&u).1)
    }

    /// Network output projected into the feasible interval of `x_t`, so the
    /// action satisfies the ramp and bound constraints whatever the raw
    /// output is.
    pub fn act(&self, x_t: R, s_m: R, rounds_left: u32, cfg: &ScenarioConfig<R>) -> Result<R> {
        let raw = self.forward(x_t, s_m, rounds_left)?;
        Ok(feasible_interval(x_t, cfg)?.project(raw))
    }

    /// Versioned text format: `CPNN v1` header, then labeled rows of
    /// 17-significant-digit decimals. Save -> load -> save is byte-exact.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::new();
        out.push_str("CPNN v1\n");
        out.push_str(&format!("horizon {}\n", self.horizon));
        out.push_str(&format!(
            "scale_x {} {}\n",
            fmt_sig17(self.scaling.x_offset),
            fmt_sig17(self.scaling.x_scale)
        ));
        out.push_str(&format!(
            "scale_s {} {}\n",
            fmt_sig17(self.scaling.s_offset),
            fmt_sig17(self.scaling.s_scale)
        ));
        out.push_str(&format!(
            "scale_rounds {}\n",
            fmt_sig17(self.scaling.rounds_scale)
        ));
        for h in 0..N_HIDDEN {
            let row: Vec<String> = self.hidden_weights[h].iter().map(|&w| fmt_sig17(w)).collect();
            out.push_str(&format!("w_hidden{h} {}\n", row.join(" ")));
        }
        let row: Vec<String> = self.output_weights.iter().map(|&w| fmt_sig17(w)).collect();
        out.push_str(&format!("w_out {}\n", row.join(" ")));
        out.push_str(&format!("b_out {}\n", fmt_sig17(self.output_bias)));
        out.push_str(&format!(
            "meta_learning_rate {}\n",
            fmt_sig17(self.meta.learning_rate)
        ));
        out.push_str(&format!("meta_batch_size {}\n", self.meta.batch_size));
        out.push_str(&format!("meta_epochs {}\n", self.meta.epochs));
        out.push_str(&format!("meta_seed {}\n", self.meta.seed));
        out.push_str(&format!("meta_final_loss {}\n", fmt_sig17(self.meta.final_loss)));
        let mut file = std::fs::File::create(path.as_ref())?;
        file.write_all(out.as_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let mut lines = text.lines().enumerate();

        let mut next = |tag: &str| -> Result<(usize, Vec<String>)> {
            let (i, line) = lines.next().ok_or(Error::Parse {
                line: 0,
                msg: format!("missing line tagged {tag:?}; file is truncated"),
            })?;
            let lineno = i + 1;
            let mut parts = line.split_whitespace();
            let got = parts.next().unwrap_or("");
            if got != tag {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected tag {tag:?}, found {got:?}"),
                });
            }
            Ok((lineno, parts.map(str::to_string).collect()))
        };
        fn reals<R: Real>(lineno: usize, fields: &[String], n: usize) -> Result<Vec<R>> {
            if fields.len() != n {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected {n} values, found {}", fields.len()),
                });
            }
            fields
                .iter()
                .map(|s| {
                    s.parse::<f64>().map(R::of).map_err(|e| Error::Parse {
                        line: lineno,
                        msg: format!("bad float {s:?}: {e}"),
                    })
                })
                .collect()
        }
        fn int<T: std::str::FromStr>(lineno: usize, fields: &[String]) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            if fields.len() != 1 {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected one value, found {}", fields.len()),
                });
            }
            fields[0].parse::<T>().map_err(|e| Error::Parse {
                line: lineno,
                msg: format!("bad integer {:?}: {e}", fields[0]),
            })
        }

        let (lineno, header) = next("CPNN")?;
        if header != ["v1"] {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("unsupported CPNN version {header:?}"),
            });
        }
        let (l, f) = next("horizon")?;
        let horizon: u32 = int(l, &f)?;
        let (l, f) = next("scale_x")?;
        let sx = reals::<R>(l, &f, 2)?;
        let (l, f) = next("scale_s")?;
        let ss = reals::<R>(l, &f, 2)?;
        let (l, f) = next("scale_rounds")?;
        let sr = reals::<R>(l, &f, 1)?;
        let mut hidden_weights = [[R::zero(); N_INPUTS]; N_HIDDEN];
        for (h, row) in hidden_weights.iter_mut().enumerate() {
            let (l, f) = next(&format!("w_hidden{h}"))?;
            row.copy_from_slice(&reals::<R>(l, &f, N_INPUTS)?);
        }
        let (l, f) = next("w_out")?;
        let mut output_weights = [R::zero(); N_HIDDEN];
        output_weights.copy_from_slice(&reals::<R>(l, &f, N_HIDDEN)?);
        let (l, f) = next("b_out")?;
        let output_bias = reals::<R>(l, &f, 1)?[0];
        let (l, f) = next("meta_learning_rate")?;
        let learning_rate = reals::<R>(l, &f, 1)?[0];
        let (l, f) = next("meta_batch_size")?;
        let batch_size: u32 = int(l, &f)?;
        let (l, f) = next("meta_epochs")?;
        let epochs: u32 = int(l, &f)?;
        let (l, f) = next("meta_seed")?;
        let seed: u64 = int(l, &f)?;
        let (l, f) = next("meta_final_loss")?;
        let final_loss = reals::<R>(l, &f, 1)?[0];

        Ok(Self {
            hidden_weights,
            output_weights,
            output_bias,
            scaling: InputScaling {
                x_offset: sx[0],
                x_scale: sx[1],
                s_offset: ss[0],
                s_scale: ss[1],
                rounds_scale: sr[0],
            },
            horizon,
            meta: TrainingMeta {
                learning_rate,
                batch_size,
                epochs,
                seed,
                final_loss,
            },
        })
    }
}

/// Per-parameter gradients of the squared error on one sample.
struct Gradients<R: Real> {
    hidden: [[R; N_INPUTS]; N_HIDDEN],
    output: [R; N_HIDDEN],
    bias: R,
}

impl<R: Real> Gradients<R> {
    fn zero() -> Self {
        Self {
            hidden: [[R::zero(); N_INPUTS]; N_HIDDEN],
            output: [R::zero(); N_HIDDEN],
            bias: R::zero(),
        }
    }
}

/// Backpropagate (prediction - target)^2 for one sample; `scale` multiplies
/// the contribution (1/batch for averaged batch gradients).
fn accumulate_gradients<R: Real>(
    policy: &MlpPolicy<R>,
    u: &[R; N_INPUTS],
    target: R,
    scale: R,
    grads: &mut Gradients<R>,
) -> R {
    let (acts, y) = policy.forward_parts(u);
    let err = y - target;
    let d_y = R::of(2.0) * err * scale;
    grads.bias = grads.bias + d_y;
    for h in 0..N_HIDDEN {
        grads.output[h] = grads.output[h] + d_y * acts[h];
        let d_z = d_y * policy.output_weights[h] * acts[h] * (R::one() - acts[h]);
        for i in 0..N_INPUTS {
            grads.hidden[h][i] = grads.hidden[h][i] + d_z * u[i];
        }
    }
    err * err
}

/// Train a policy on rollout targets with mini-batch SGD on mean squared
/// error. Weights start uniform in [-0.5, 0.5] from the seed, shuffling is
/// seed-deterministic, and the whole run is single threaded, so identical
/// inputs give bit-identical weights.
pub fn train<R: Real>(
    cfg: &ScenarioConfig<R>,
    dataset: &[TrainingSample<R>],
    opts: &TrainOptions<R>,
) -> Result<(MlpPolicy<R>, TrainReport<R>)> {
    if dataset.is_empty() {
        return Err(Error::InvalidConfig("training dataset is empty".into()));
    }
    if opts.batch_size < 1 || opts.epochs < 1 {
        return Err(Error::InvalidConfig(
            "batch_size and epochs must be at least 1".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let half = R::of(0.5);
    let mut policy = MlpPolicy {
        hidden_weights: [[R::zero(); N_INPUTS]; N_HIDDEN],
        output_weights: [R::zero(); N_HIDDEN],
        output_bias: R::zero(),
        scaling: InputScaling::from_config(cfg),
        horizon: cfg.horizon,
        meta: TrainingMeta {
            learning_rate: opts.learning_rate,
            batch_size: opts.batch_size as u32,
            epochs: opts.epochs as u32,
            seed: opts.seed,
            final_loss: R::zero(),
        },
    };
    for h in 0..N_HIDDEN {
        for i in 0..N_INPUTS {
            policy.hidden_weights[h][i] = R::uniform_in(-half, half, &mut rng);
        }
    }
    for h in 0..N_HIDDEN {
        policy.output_weights[h] = R::uniform_in(-half, half, &mut rng);
    }
    policy.output_bias = R::uniform_in(-half, half, &mut rng);

    let features: Vec<[R; N_INPUTS]> = dataset
        .iter()
        .map(|s| policy.features(s.x_t, s.s_m, s.rounds_left))
        .collect();
    let targets: Vec<R> = dataset.iter().map(|s| s.target).collect();
    let n = dataset.len();
    let n_real = R::of(n as f64);

    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_losses = Vec::with_capacity(opts.epochs);
    for epoch in 0..opts.epochs {
        order.shuffle(&mut rng);
        let mut running = R::zero();
        for batch in order.chunks(opts.batch_size) {
            let mut grads = Gradients::zero();
            let scale = R::one() / R::of(batch.len() as f64);
            for &idx in batch {
                running = running
                    + accumulate_gradients(&policy, &features[idx], targets[idx], scale, &mut grads);
            }
            let lr = opts.learning_rate;
            for h in 0..N_HIDDEN {
                for i in 0..N_INPUTS {
                    policy.hidden_weights[h][i] =
                        policy.hidden_weights[h][i] - lr * grads.hidden[h][i];
                }
                policy.output_weights[h] = policy.output_weights[h] - lr * grads.output[h];
            }
            policy.output_bias = policy.output_bias - lr * grads.bias;
        }
        let epoch_loss = running / n_real;
        if !epoch_loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        epoch_losses.push(epoch_loss);
    }

    let mut validation = R::zero();
    for i in 0..n {
        let (_, y) = policy.forward_parts(&features[i]);
        let e = y - targets[i];
        validation = validation + e * e;
    }
    validation = validation / n_real;
    policy.meta.final_loss = *epoch_losses.last().expect("at least one epoch");

    Ok((
        policy,
        TrainReport {
            epoch_losses,
            validation_loss: validation,
            epochs: opts.epochs,
        },
    ))
}

/// Compare backpropagated gradients against central finite differences of
/// the squared error on one sample. Returns the maximum over all 21
/// parameters of `|bp - fd| / max(|bp|, |fd|, 1e-4)` (the floor makes
/// near-zero gradients compare absolutely, and an exactly-zero pair scores
/// 0).
pub fn gradient_check<R: Real>(policy: &MlpPolicy<R>, sample: &TrainingSample<R>, eps: R) -> R {
    let u = policy.features(sample.x_t, sample.s_m, sample.rounds_left);
    let mut grads = Gradients::zero();
    accumulate_gradients(policy, &u, sample.target, R::one(), &mut grads);

    let loss = |p: &MlpPolicy<R>| {
        let (_, y) = p.forward_parts(&u);
        let e = y - sample.target;
        e * e
    };
    let relative = |bp: R, fd: R| {
        let denom = bp.abs().max(fd.abs()).max(R::of(1e-4));
        (bp - fd).abs() / denom
    };

    let two_eps = R::of(2.0) * eps;
    let mut worst = R::zero();
    let mut check = |bp: R, bump: &mut dyn FnMut(&mut MlpPolicy<R>, R)| {
        let mut plus = policy.clone();
        bump(&mut plus, eps);
        let mut minus = policy.clone();
        bump(&mut minus, -eps);
        let fd = (loss(&plus) - loss(&minus)) / two_eps;
        worst = worst.max(relative(bp, fd));
    };

    for h in 0..N_HIDDEN {
        for i in 0..N_INPUTS {
            check(grads.hidden[h][i], &mut |p, d| {
                p.hidden_weights[h][i] = p.hidden_weights[h][i] + d;
            });
        }
        check(grads.output[h], &mut |p, d| {
            p.output_weights[h] = p.output_weights[h] + d;
        });
    }
    check(grads.bias, &mut |p, d| {
        p.output_bias = p.output_bias + d;
    });
    worst
}
