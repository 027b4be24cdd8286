//! Over-the-air aggregation and the round orchestrator.
//!
//! Each round runs in two phases. Phase A (beginning of round `t`): every
//! device computes its local model from delayed information only — last
//! round's gradient, channel and queue. Phase B (end of round `t`): the
//! fresh channel and loss are revealed, devices transmit their
//! channel-inverted model differences simultaneously, the server recovers
//! the noisy global model from the superimposed signal, queues absorb the
//! fresh constraint values, and the result is broadcast. Reading fresh
//! round data during phase A is a contract violation and aborts the run.
//!
//! Round 1 is special: no feedback exists yet, so devices adopt the
//! initial broadcast model unchanged and no transmission happens; the main
//! update loop starts at round 2.

use std::sync::Arc;

use num_complex::Complex;
use serde::Serialize;

use crate::baselines::Strategy;
use crate::channel::{
    draw_noise, init_channel, inversion_vector, noise_power_watts, path_gain_db, step_channel,
    ChannelState,
};
use crate::comudo::{constraint_value, queue_update, Branch, DeviceState};
use crate::config::{ExperimentConfig, ModelInit};
use crate::error::{Error, Result};
use crate::losses::{mnist::MnistData, DataSource, LossSnapshot};
use crate::rng::RunStreams;
use crate::units::db_to_linear;
use crate::vector::{all_finite, box_clip, cnorm_sq, l2_norm, l2_norm_sq, mean_vectors, Cplx};

/// Per-device observations of one round.
#[derive(Debug, Clone, Serialize)]
pub struct DeviceRoundRecord {
    pub device: usize,
    pub branch: &'static str,
    /// Queue before this round's end-of-round update.
    pub queue_prev: f64,
    /// Queue after the end-of-round update.
    pub queue: f64,
    /// Fresh constraint value `g_t(x_t)` (absent for channel-free runs).
    pub g_value: Option<f64>,
    /// Delayed-channel constraint value at the committed model (absent in
    /// round 1, where no previous channel exists).
    pub g_tilde_value: Option<f64>,
    pub transmit_power_watts: f64,
    /// Local loss of the broadcast model, `f_t(x_hat_t)`.
    pub loss: f64,
}

/// Dense per-round vectors, retained only for small models or on request.
#[derive(Debug, Clone, Serialize)]
pub struct RoundVectors {
    pub x_hat: Vec<f64>,
    /// Ideal (noiseless) average of the local models.
    pub x_ideal: Vec<f64>,
    pub residual_noise: Vec<f64>,
    pub local_models: Vec<Vec<f64>>,
}

/// Everything observable at one round.
#[derive(Debug, Clone, Serialize)]
pub struct RoundRecord {
    pub round: u64,
    pub devices: Vec<DeviceRoundRecord>,
    /// `||n_t||` and `||n_t||^2`.
    pub noise_norm: f64,
    pub noise_norm_sq: f64,
    /// `||z_t||_F` of the raw channel noise draw.
    pub z_norm: f64,
    pub avg_loss: f64,
    /// `max_i |x_hat_t[i] - mean_n(x_t^n)[i] - n_t[i]|`.
    pub recovery_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vectors: Option<RoundVectors>,
}

/// Inputs the benchmark solver needs for one round: the fresh losses, the
/// squared inversion magnitudes per device, and the recovered model the
/// benchmark constraint anchors at.
#[derive(Debug, Clone)]
pub struct BenchmarkRoundInput {
    pub round: u64,
    pub snapshots: Vec<LossSnapshot<f64>>,
    /// `|b_t^n[i]|^2` per device.
    pub weights: Vec<Vec<f64>>,
    pub x_hat: Vec<f64>,
}

/// Analog transmit signal `s = b o (x - x_hat_prev)` and its power.
pub fn build_signal<T: crate::scalar::Scalar>(
    local_model: &[T],
    x_hat_prev: &[T],
    b: &[Cplx<T>],
) -> (Vec<Cplx<T>>, T) {
    debug_assert_eq!(local_model.len(), x_hat_prev.len());
    debug_assert_eq!(local_model.len(), b.len());
    let signal: Vec<Cplx<T>> = b
        .iter()
        .zip(local_model)
        .zip(x_hat_prev)
        .map(|((bv, &xv), &pv)| {
            let d = xv - pv;
            Complex::new(bv.re * d, bv.im * d)
        })
        .collect();
    let power = cnorm_sq(&signal);
    (signal, power)
}

/// Superimpose the device signals through their channels, add receiver
/// noise and recover the global model:
/// `x_hat_t = x_hat_prev + Re{y} / (N lambda)`, `n_t = Re{z} / (N lambda)`.
pub fn aggregate<T: crate::scalar::Scalar>(
    signals: &[Vec<Cplx<T>>],
    channels: &[&[Cplx<T>]],
    z: &[Cplx<T>],
    x_hat_prev: &[T],
    lambda_scale: T,
) -> Result<(Vec<T>, Vec<T>)> {
    let n = signals.len();
    if channels.len() != n {
        return Err(Error::LengthMismatch {
            what: "aggregate channels",
            expected: n,
            got: channels.len(),
        });
    }
    let dim = x_hat_prev.len();
    for s in signals {
        if s.len() != dim {
            return Err(Error::LengthMismatch {
                what: "aggregate signal",
                expected: dim,
                got: s.len(),
            });
        }
    }
    if z.len() != dim {
        return Err(Error::LengthMismatch {
            what: "aggregate noise",
            expected: dim,
            got: z.len(),
        });
    }
    let mut y = vec![Complex::new(T::zero(), T::zero()); dim];
    for (s, h) in signals.iter().zip(channels) {
        for ((acc, sv), hv) in y.iter_mut().zip(s).zip(*h) {
            *acc += hv * sv;
        }
    }
    for (acc, zv) in y.iter_mut().zip(z) {
        *acc += *zv;
    }
    let scale = T::one() / (T::of(n as f64) * lambda_scale);
    let x_hat = x_hat_prev
        .iter()
        .zip(&y)
        .map(|(&p, yv)| p + yv.re * scale)
        .collect();
    let residual = z.iter().map(|zv| zv.re * scale).collect();
    Ok((x_hat, residual))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    /// Ready to begin the next round.
    Idle,
    /// Phase A done: models committed, fresh data not yet revealed.
    Committed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TimelineEvent {
    ModelsCommitted,
    FreshInfoRevealed,
}

struct PendingRound {
    round: u64,
    models: Vec<Vec<f64>>,
    branches: Vec<Branch>,
    /// Constraint value of the committed model under the delayed channel
    /// (`g~_{t-1}(x_t)`); `None` in round 1.
    g_tilde: Vec<Option<f64>>,
}

/// Simulation state advancing through the two-phase round machine.
pub struct World {
    pub cfg: ExperimentConfig,
    strategy: Box<dyn Strategy>,
    streams: RunStreams,
    devices: Vec<DeviceState<f64>>,
    /// Last broadcast global model (`x_hat_{t-1}` during round `t`).
    x_hat_prev: Vec<f64>,
    noise_power: f64,
    h_lb: f64,
    path_gains: Vec<f64>,
    data: DataSource,
    next_round: u64,
    phase: Phase,
    pending: Option<PendingRound>,
    revealed: Option<(u64, Vec<LossSnapshot<f64>>)>,
    timeline: Vec<(u64, TimelineEvent)>,
    pub max_z_norm: f64,
    pub max_noise_norm: f64,
    pub max_grad_norm: f64,
    pub max_recovery_residual: f64,
}

impl World {
    pub fn new(cfg: ExperimentConfig, strategy: Box<dyn Strategy>) -> Result<Self> {
        cfg.validate()?;
        let streams = RunStreams::new(cfg.seed);
        let shadow_std = cfg.channel.shadowing_var_db.sqrt();
        let mut path_gains = Vec::with_capacity(cfg.num_devices);
        for n in 0..cfg.num_devices {
            let mut rng = streams.shadowing.at(0, n as u64);
            let shadow = <f64 as crate::scalar::Scalar>::standard_normal(&mut rng) * shadow_std;
            let gain_db = path_gain_db(cfg.channel.distance_m[n], shadow)?;
            path_gains.push(db_to_linear(gain_db));
        }
        let floors: Vec<f64> = path_gains
            .iter()
            .map(|&xi| cfg.channel.h_floor.resolve(xi))
            .collect();
        let h_lb = floors.iter().cloned().fold(f64::INFINITY, f64::min);
        cfg.validate_queue_capacity(h_lb)?;

        let x_hat_init = match cfg.model_init {
            ModelInit::Zero => vec![0.0; cfg.model_dim],
            ModelInit::UniformInBox => {
                use rand::Rng;
                let mut rng = streams.model_init.at(0, 0);
                (0..cfg.model_dim)
                    .map(|_| rng.random_range(-cfg.x_ub..=cfg.x_ub))
                    .collect()
            }
        };

        let devices = (0..cfg.num_devices)
            .map(|n| {
                // h_1 drawn from the stationary law; revealed to the device
                // at the end of round 1.
                let mut rng = streams.channel_init.at(1, n as u64);
                let channel = init_channel(cfg.model_dim, path_gains[n], floors[n], &mut rng);
                DeviceState {
                    queue: cfg.v_min,
                    local_model: x_hat_init.clone(),
                    power_limit: cfg.power_limits[n],
                    last_channel: channel,
                    last_gradient: vec![0.0; cfg.model_dim],
                }
            })
            .collect();

        let data = DataSource::new(&cfg, streams.data)?;
        if data.model_dim() != cfg.model_dim {
            return Err(Error::config(format!(
                "model_dim {} does not match the data source dimension {}",
                cfg.model_dim,
                data.model_dim()
            )));
        }

        let noise_power = noise_power_watts(&cfg.channel);
        Ok(World {
            strategy,
            streams,
            devices,
            // x_hat_0 = 0; the initial broadcast model is already in the
            // devices' local models and becomes x_hat_1 at the end of round 1.
            x_hat_prev: vec![0.0; cfg.model_dim],
            noise_power,
            h_lb,
            path_gains,
            data,
            next_round: 1,
            phase: Phase::Idle,
            pending: None,
            revealed: None,
            timeline: Vec::new(),
            max_z_norm: 0.0,
            max_noise_norm: 0.0,
            max_grad_norm: 0.0,
            max_recovery_residual: 0.0,
            cfg,
        })
    }

    pub fn strategy_name(&self) -> &'static str {
        self.strategy.name()
    }

    pub fn h_lb(&self) -> f64 {
        self.h_lb
    }

    pub fn path_gains(&self) -> &[f64] {
        &self.path_gains
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn x_hat(&self) -> &[f64] {
        &self.x_hat_prev
    }

    pub fn devices(&self) -> &[DeviceState<f64>] {
        &self.devices
    }

    pub fn timeline(&self) -> &[(u64, TimelineEvent)] {
        &self.timeline
    }

    pub fn reshuffles(&self) -> u64 {
        self.data.reshuffle_count()
    }

    /// The most recently revealed per-device losses. During phase A of a
    /// round this is a contract violation: the fresh losses do not exist
    /// yet for the committing devices.
    pub fn revealed_losses(&self) -> Result<(u64, &[LossSnapshot<f64>])> {
        if self.phase == Phase::Committed {
            return Err(Error::PhaseViolation {
                round: self.pending.as_ref().map(|p| p.round).unwrap_or(0),
                detail: "fresh round data requested before the end-of-round reveal".into(),
            });
        }
        match &self.revealed {
            Some((t, snaps)) => Ok((*t, snaps)),
            None => Err(Error::PhaseViolation {
                round: 0,
                detail: "no round has completed yet".into(),
            }),
        }
    }

    /// Phase A: devices commit their round-`t` local models using delayed
    /// information only.
    pub fn begin_round(&mut self) -> Result<u64> {
        if self.phase != Phase::Idle {
            return Err(Error::PhaseViolation {
                round: self.next_round,
                detail: "begin_round called while a round is already in flight".into(),
            });
        }
        let t = self.next_round;
        let (models, branches): (Vec<Vec<f64>>, Vec<Branch>) = if t == 1 {
            // No feedback exists yet: adopt the initial broadcast model.
            let init: Vec<Vec<f64>> = self
                .devices
                .iter()
                .map(|d| box_clip(&d.local_model, self.cfg.x_ub))
                .collect();
            let branches = vec![Branch::Unconstrained; self.devices.len()];
            (init, branches)
        } else {
            let mut models = Vec::with_capacity(self.devices.len());
            let mut branches = Vec::with_capacity(self.devices.len());
            for dev in &self.devices {
                let (model, branch) = self.strategy.update(dev, &self.x_hat_prev, &self.cfg)?;
                models.push(model);
                branches.push(branch);
            }
            (models, branches)
        };

        let g_tilde: Vec<Option<f64>> = if t == 1 || !self.strategy.uses_channel() {
            vec![None; self.devices.len()]
        } else {
            let mut vals = Vec::with_capacity(self.devices.len());
            for (dev, model) in self.devices.iter().zip(&models) {
                let b_prev = inversion_vector(&dev.last_channel.h, self.cfg.lambda_scale)?;
                vals.push(Some(constraint_value(
                    &b_prev,
                    model,
                    &self.x_hat_prev,
                    dev.power_limit,
                )));
            }
            vals
        };

        self.timeline.push((t, TimelineEvent::ModelsCommitted));
        self.pending = Some(PendingRound {
            round: t,
            models,
            branches,
            g_tilde,
        });
        self.phase = Phase::Committed;
        Ok(t)
    }

    /// Phase B: reveal the fresh channel and losses, transmit and aggregate,
    /// update queues, cache the delayed pair and broadcast.
    pub fn finish_round(&mut self, keep_vectors: bool) -> Result<(RoundRecord, BenchmarkRoundInput)> {
        if self.phase != Phase::Committed {
            return Err(Error::PhaseViolation {
                round: self.next_round,
                detail: "finish_round called before begin_round".into(),
            });
        }
        let pending = self.pending.take().expect("pending round present");
        let t = pending.round;
        let n_devices = self.devices.len();
        let dim = self.cfg.model_dim;
        let lambda = self.cfg.lambda_scale;

        // Fresh channel: round 1 keeps the stationary draw made at setup,
        // later rounds advance the Gauss-Markov chain.
        if t > 1 {
            for (n, dev) in self.devices.iter_mut().enumerate() {
                let mut rng = self.streams.channel_step.at(t, n as u64);
                dev.last_channel = step_channel(&dev.last_channel, self.cfg.channel.kappa, &mut rng);
            }
        }
        // Fresh losses.
        let snapshots = self.data.next_round(t);
        self.timeline.push((t, TimelineEvent::FreshInfoRevealed));

        let uses_channel = self.strategy.uses_channel();
        let mut transmit_powers = vec![0.0f64; n_devices];
        let mut g_values: Vec<Option<f64>> = vec![None; n_devices];
        let mut weights: Vec<Vec<f64>> = Vec::new();
        let (x_hat_t, residual, z_norm) = if uses_channel {
            let mut b_vecs = Vec::with_capacity(n_devices);
            for dev in &self.devices {
                b_vecs.push(inversion_vector(&dev.last_channel.h, lambda)?);
            }
            if t == 1 {
                // Initialization round: the initial model is broadcast as
                // x_hat_1 without a transmission; the constraint anchors at
                // x_hat_0 = 0.
                for (n, dev) in self.devices.iter().enumerate() {
                    g_values[n] = Some(constraint_value(
                        &b_vecs[n],
                        &pending.models[n],
                        &self.x_hat_prev,
                        dev.power_limit,
                    ));
                }
                weights = b_vecs
                    .iter()
                    .map(|b| b.iter().map(|c| c.norm_sqr()).collect())
                    .collect();
                let x_hat_1 = pending.models[0].clone();
                (x_hat_1, vec![0.0; dim], 0.0)
            } else {
                let mut signals = Vec::with_capacity(n_devices);
                for (n, dev) in self.devices.iter().enumerate() {
                    let (signal, power) =
                        build_signal(&pending.models[n], &self.x_hat_prev, &b_vecs[n]);
                    transmit_powers[n] = power;
                    g_values[n] = Some(constraint_value(
                        &b_vecs[n],
                        &pending.models[n],
                        &self.x_hat_prev,
                        dev.power_limit,
                    ));
                    signals.push(signal);
                }
                let mut noise_rng = self.streams.noise.at(t, 0);
                let z = draw_noise::<f64, _>(dim, self.noise_power, &mut noise_rng);
                let z_norm = cnorm_sq(&z).sqrt();
                let channels: Vec<&[Cplx<f64>]> = self
                    .devices
                    .iter()
                    .map(|d| d.last_channel.h.as_slice())
                    .collect();
                let (x_hat, residual) =
                    aggregate(&signals, &channels, &z, &self.x_hat_prev, lambda)?;
                weights = b_vecs
                    .iter()
                    .map(|b| b.iter().map(|c| c.norm_sqr()).collect())
                    .collect();
                (x_hat, residual, z_norm)
            }
        } else {
            // Idealized error-free averaging: no channel, no power accounting.
            (mean_vectors(&pending.models), vec![0.0; dim], 0.0)
        };

        if !all_finite(&x_hat_t) {
            return Err(Error::Domain {
                what: "aggregate",
                detail: format!("non-finite global model at round {t}"),
            });
        }

        // Exact-recovery diagnostic: x_hat - mean(local models) - n_t.
        let x_ideal = mean_vectors(&pending.models);
        let recovery_residual = x_hat_t
            .iter()
            .zip(&x_ideal)
            .zip(&residual)
            .map(|((&xh, &xi), &nv)| (xh - xi - nv).abs())
            .fold(0.0f64, f64::max);

        // Queue updates with the fresh constraint values (rounds t > 1).
        let maintains_queue = self.strategy.maintains_queue();
        let mut device_records = Vec::with_capacity(n_devices);
        let mut avg_loss = 0.0;
        for (n, dev) in self.devices.iter_mut().enumerate() {
            let queue_prev = dev.queue;
            if t > 1 && maintains_queue {
                if let Some(g) = g_values[n] {
                    dev.queue = queue_update(
                        dev.queue,
                        g,
                        self.cfg.eta,
                        self.cfg.gamma,
                        self.cfg.v_min,
                    );
                }
            }
            debug_assert!(dev.queue >= self.cfg.v_min);

            let (loss, grad) = snapshots[n].eval_and_grad(&x_hat_t);
            avg_loss += loss;
            let grad_norm = l2_norm(&grad);
            if grad_norm > self.max_grad_norm {
                self.max_grad_norm = grad_norm;
            }
            dev.local_model = pending.models[n].clone();
            dev.last_gradient = grad;

            device_records.push(DeviceRoundRecord {
                device: n,
                branch: pending.branches[n].as_str(),
                queue_prev,
                queue: dev.queue,
                g_value: g_values[n],
                g_tilde_value: pending.g_tilde[n],
                transmit_power_watts: transmit_powers[n],
                loss,
            });
        }
        avg_loss /= n_devices as f64;

        let noise_norm = l2_norm(&residual);
        let noise_norm_sq = l2_norm_sq(&residual);
        self.max_z_norm = self.max_z_norm.max(z_norm);
        self.max_noise_norm = self.max_noise_norm.max(noise_norm);
        self.max_recovery_residual = self.max_recovery_residual.max(recovery_residual);

        let bench = BenchmarkRoundInput {
            round: t,
            snapshots: snapshots.clone(),
            weights,
            x_hat: x_hat_t.clone(),
        };

        let vectors = keep_vectors.then(|| RoundVectors {
            x_hat: x_hat_t.clone(),
            x_ideal: x_ideal.clone(),
            residual_noise: residual.clone(),
            local_models: pending.models.clone(),
        });

        let record = RoundRecord {
            round: t,
            devices: device_records,
            noise_norm,
            noise_norm_sq,
            z_norm,
            avg_loss,
            recovery_residual,
            vectors,
        };

        // Broadcast.
        self.x_hat_prev = x_hat_t;
        self.revealed = Some((t, snapshots));
        self.phase = Phase::Idle;
        self.next_round = t + 1;
        Ok((record, bench))
    }

    pub fn run_round(&mut self, keep_vectors: bool) -> Result<(RoundRecord, BenchmarkRoundInput)> {
        self.begin_round()?;
        self.finish_round(keep_vectors)
    }
}

/// Options controlling what a full experiment run records.
#[derive(Clone, Default)]
pub struct RunOptions {
    /// Keep dense per-round vectors in the records.
    pub record_vectors: bool,
    /// Keep per-round benchmark inputs (losses, inversion weights, anchors).
    pub with_benchmarks: bool,
    /// Evaluate classification accuracy on this set every `eval_every`
    /// rounds.
    pub eval: Option<Arc<MnistData>>,
    pub eval_every: u64,
}

/// Aggregate results of one experiment.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub algorithm: String,
    pub seed: u64,
    pub horizon: u64,
    pub num_devices: usize,
    pub model_dim: usize,
    /// `(1/N) sum_t sum_n f_t^n(x_hat_t)`.
    pub cumulative_loss: f64,
    pub final_avg_loss: f64,
    /// Mean transmit power across rounds and devices, in watts.
    pub mean_transmit_power_watts: f64,
    /// `(1/N) sum_t sum_n [g]_+` over the run.
    pub cum_hard_violation: Option<f64>,
    /// Signed counterpart of the hard violation.
    pub cum_soft_violation: Option<f64>,
    /// `10 log10((1/(N T)) sum [P_t - P]_+ / P)`; absent when the run never
    /// violates or has no power accounting.
    pub normalized_hard_violation_db: Option<f64>,
    pub min_queue: f64,
    pub max_queue: f64,
    pub constrained_branch_rounds: u64,
    pub max_noise_norm: f64,
    pub max_z_norm: f64,
    pub max_grad_norm: f64,
    pub max_recovery_residual: f64,
    pub reshuffles: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_accuracy: Option<f64>,
    /// Trailing-window mean of checkpoint accuracies.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_avg_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<RoundRecord>,
    pub summary: Summary,
    pub benchmark_inputs: Option<Vec<BenchmarkRoundInput>>,
    /// `(round, raw accuracy, trailing mean)` at each checkpoint.
    pub accuracy_series: Vec<(u64, f64, f64)>,
}

/// Trailing-window size for the averaged test accuracy.
pub const ACCURACY_WINDOW: usize = 20;

/// Run a full experiment: `horizon` rounds plus summary assembly.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutput> {
    let strategy = crate::baselines::make_strategy(&cfg.algorithm)?;
    if opts.with_benchmarks && cfg.model_dim > 64 {
        log::warn!(
            "benchmark solves requested at model_dim = {}; this is impractical above 64",
            cfg.model_dim
        );
    }
    let mut world = World::new(cfg.clone(), strategy)?;
    let mut records = Vec::with_capacity(cfg.horizon as usize);
    let mut benchmark_inputs = opts.with_benchmarks.then(Vec::new);
    let mut accuracy_series: Vec<(u64, f64, f64)> = Vec::new();
    let mut acc_window: Vec<f64> = Vec::new();
    let eval_every = opts.eval_every.max(1);

    for t in 1..=cfg.horizon {
        let (record, bench) = world.run_round(opts.record_vectors)?;
        debug_assert_eq!(record.round, t);
        if let Some(inputs) = benchmark_inputs.as_mut() {
            inputs.push(bench);
        }
        if let Some(test_set) = &opts.eval {
            if t % eval_every == 0 || t == cfg.horizon {
                let acc = crate::losses::logistic::accuracy(world.x_hat(), test_set);
                acc_window.push(acc);
                if acc_window.len() > ACCURACY_WINDOW {
                    acc_window.remove(0);
                }
                let avg = acc_window.iter().sum::<f64>() / acc_window.len() as f64;
                accuracy_series.push((t, acc, avg));
            }
        }
        records.push(record);
    }

    let summary = summarize(cfg, &world, &records, &accuracy_series);
    Ok(RunOutput {
        records,
        summary,
        benchmark_inputs,
        accuracy_series,
    })
}

fn summarize(
    cfg: &ExperimentConfig,
    world: &World,
    records: &[RoundRecord],
    accuracy_series: &[(u64, f64, f64)],
) -> Summary {
    let n = cfg.num_devices as f64;
    let mut cumulative_loss = 0.0;
    let mut power_sum = 0.0;
    let mut power_count = 0u64;
    let mut hard = 0.0;
    let mut soft = 0.0;
    let mut has_g = false;
    let mut min_queue = f64::INFINITY;
    let mut max_queue = f64::NEG_INFINITY;
    let mut constrained = 0u64;
    let mut over_ratio_sum = 0.0;
    for rec in records {
        cumulative_loss += rec.avg_loss * n;
        for d in &rec.devices {
            power_sum += d.transmit_power_watts;
            power_count += 1;
            if let Some(g) = d.g_value {
                has_g = true;
                hard += g.max(0.0);
                soft += g;
                over_ratio_sum += g.max(0.0) / cfg.power_limits[d.device];
            }
            min_queue = min_queue.min(d.queue);
            max_queue = max_queue.max(d.queue);
            if d.branch == "constrained" {
                constrained += 1;
            }
        }
    }
    cumulative_loss /= n;
    let t_count = records.len() as f64;
    let normalized = if has_g && over_ratio_sum > 0.0 {
        Some(10.0 * (over_ratio_sum / (n * t_count)).log10())
    } else {
        None
    };
    Summary {
        algorithm: world.strategy_name().to_string(),
        seed: cfg.seed,
        horizon: cfg.horizon,
        num_devices: cfg.num_devices,
        model_dim: cfg.model_dim,
        cumulative_loss,
        final_avg_loss: records.last().map(|r| r.avg_loss).unwrap_or(0.0),
        mean_transmit_power_watts: if power_count > 0 {
            power_sum / power_count as f64
        } else {
            0.0
        },
        cum_hard_violation: has_g.then_some(hard / n),
        cum_soft_violation: has_g.then_some(soft / n),
        normalized_hard_violation_db: normalized,
        min_queue,
        max_queue,
        constrained_branch_rounds: constrained,
        max_noise_norm: world.max_noise_norm,
        max_z_norm: world.max_z_norm,
        max_grad_norm: world.max_grad_norm,
        max_recovery_residual: world.max_recovery_residual,
        reshuffles: world.reshuffles(),
        final_accuracy: accuracy_series.last().map(|&(_, acc, _)| acc),
        final_avg_accuracy: accuracy_series.last().map(|&(_, _, avg)| avg),
    }
}
