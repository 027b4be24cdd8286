//! Time-varying local loss functions with delayed gradient access.
//!
//! Two loss families are provided: synthetic convex quadratics (oracle
//! friendly, with a controllable center walk) and streaming non-i.i.d.
//! multinomial logistic regression over MNIST, where each device only sees
//! samples of its assigned labels and gathers a fresh batch every round.

pub mod logistic;
pub mod mnist;

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::config::{DataKind, ExperimentConfig};
use crate::error::Result;
use crate::rng::{gaussian_vec, RandomStream};
use crate::scalar::Scalar;
use crate::vector::{l2_norm, step_from, sub};

use mnist::MnistData;

/// A device's loss at one round: evaluation and exact gradient.
#[derive(Debug, Clone)]
pub struct LossSnapshot<T: Scalar> {
    pub round: u64,
    pub device: usize,
    kind: SnapshotKind<T>,
}

#[derive(Debug, Clone)]
enum SnapshotKind<T: Scalar> {
    /// `f(x) = 0.5 ||x - c||^2`
    Quadratic { center: Vec<T> },
    /// Average cross-entropy over a fixed batch.
    Logistic {
        data: Arc<MnistData>,
        indices: Vec<u32>,
    },
}

impl<T: Scalar> LossSnapshot<T> {
    pub fn quadratic(round: u64, device: usize, center: Vec<T>) -> Self {
        LossSnapshot {
            round,
            device,
            kind: SnapshotKind::Quadratic { center },
        }
    }

    pub fn logistic(round: u64, device: usize, data: Arc<MnistData>, indices: Vec<u32>) -> Self {
        LossSnapshot {
            round,
            device,
            kind: SnapshotKind::Logistic { data, indices },
        }
    }

    pub fn eval(&self, x: &[T]) -> T {
        match &self.kind {
            SnapshotKind::Quadratic { center } => {
                let diff = sub(x, center);
                T::of(0.5) * crate::vector::l2_norm_sq(&diff)
            }
            SnapshotKind::Logistic { data, indices } => logistic::loss(x, data, indices),
        }
    }

    pub fn grad(&self, x: &[T]) -> Vec<T> {
        match &self.kind {
            SnapshotKind::Quadratic { center } => sub(x, center),
            SnapshotKind::Logistic { data, indices } => logistic::loss_and_grad(x, data, indices).1,
        }
    }

    pub fn eval_and_grad(&self, x: &[T]) -> (T, Vec<T>) {
        match &self.kind {
            SnapshotKind::Quadratic { center } => {
                let g = sub(x, center);
                (T::of(0.5) * crate::vector::l2_norm_sq(&g), g)
            }
            SnapshotKind::Logistic { data, indices } => logistic::loss_and_grad(x, data, indices),
        }
    }

    /// Upper bound on the Hessian spectral norm (step-size hint for the
    /// benchmark solver).
    pub fn curvature_hint(&self) -> T {
        match &self.kind {
            SnapshotKind::Quadratic { .. } => T::one(),
            SnapshotKind::Logistic { data, indices } => {
                T::of(logistic::curvature_bound(data, indices))
            }
        }
    }
}

/// Stateful per-round loss generator. Round order matters (center walks and
/// streaming batch cursors advance); per-round draws are keyed by
/// `(round, device)` so equal seeds give identical realizations across
/// algorithm variants.
#[derive(Debug)]
pub enum DataSource {
    Quadratic(QuadraticSource),
    Mnist(MnistSource),
}

impl DataSource {
    pub fn new(cfg: &ExperimentConfig, stream: RandomStream) -> Result<Self> {
        match cfg.data.kind {
            DataKind::SyntheticQuadratic => {
                Ok(DataSource::Quadratic(QuadraticSource::new(cfg, stream)))
            }
            DataKind::LogisticMnist => Ok(DataSource::Mnist(MnistSource::new(cfg, stream)?)),
        }
    }

    /// Losses of round `t`, one snapshot per device.
    pub fn next_round(&mut self, t: u64) -> Vec<LossSnapshot<f64>> {
        match self {
            DataSource::Quadratic(src) => src.next_round(t),
            DataSource::Mnist(src) => src.next_round(t),
        }
    }

    /// Number of pool reshuffles caused by dataset exhaustion.
    pub fn reshuffle_count(&self) -> u64 {
        match self {
            DataSource::Quadratic(_) => 0,
            DataSource::Mnist(src) => src.reshuffles,
        }
    }

    pub fn model_dim(&self) -> usize {
        match self {
            DataSource::Quadratic(src) => src.dim,
            DataSource::Mnist(_) => logistic::PARAM_DIM,
        }
    }
}

/// Synthetic quadratic losses with drifting centers. The per-device center
/// moves by `walk_scale * t^(-walk_decay)` along a fresh random direction
/// each round, so the accumulated path length is controlled by the decay
/// exponent.
#[derive(Debug)]
pub struct QuadraticSource {
    dim: usize,
    centers: Vec<Vec<f64>>,
    walk_scale: f64,
    walk_decay: f64,
    stream: RandomStream,
}

impl QuadraticSource {
    fn new(cfg: &ExperimentConfig, stream: RandomStream) -> Self {
        let dim = cfg.model_dim;
        let scale = cfg.data.synthetic.center_scale;
        let centers = (0..cfg.num_devices)
            .map(|n| {
                let mut rng = stream.at(0, n as u64);
                (0..dim).map(|_| rng.random_range(-scale..=scale)).collect()
            })
            .collect();
        QuadraticSource {
            dim,
            centers,
            walk_scale: cfg.data.synthetic.walk_scale,
            walk_decay: cfg.data.synthetic.walk_decay,
            stream,
        }
    }

    fn next_round(&mut self, t: u64) -> Vec<LossSnapshot<f64>> {
        if self.walk_scale > 0.0 && t > 1 {
            let step = self.walk_scale * (t as f64).powf(-self.walk_decay);
            for (n, center) in self.centers.iter_mut().enumerate() {
                let mut rng = self.stream.at(t, n as u64);
                let dir = gaussian_vec::<f64, _>(&mut rng, self.dim, 1.0);
                let norm = l2_norm(&dir).max(1e-300);
                *center = step_from(center, &dir, -step / norm);
            }
        }
        self.centers
            .iter()
            .enumerate()
            .map(|(n, c)| LossSnapshot::quadratic(t, n, c.clone()))
            .collect()
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }
}

/// Streaming non-i.i.d. MNIST source: device `n` draws its per-round batch
/// only from its assigned labels, walking a shuffled pool and reshuffling on
/// exhaustion.
#[derive(Debug)]
pub struct MnistSource {
    data: Arc<MnistData>,
    batch: usize,
    pools: Vec<Vec<u32>>,
    order: Vec<Vec<u32>>,
    cursor: Vec<usize>,
    epoch: Vec<u64>,
    reshuffles: u64,
    stream: RandomStream,
}

/// Key offset separating epoch-shuffle draws from other data-stream uses.
const EPOCH_KEY_BASE: u64 = 1 << 40;

impl MnistSource {
    fn new(cfg: &ExperimentConfig, stream: RandomStream) -> Result<Self> {
        let data = Arc::new(mnist::load_mnist(&cfg.data.dataset_path, "train")?);
        let assignments: Vec<Vec<u8>> = match &cfg.data.labels_per_device {
            Some(list) => list.clone(),
            None => (0..cfg.num_devices).map(|n| vec![(n % 10) as u8]).collect(),
        };
        let mut pools = Vec::with_capacity(cfg.num_devices);
        for (n, labels) in assignments.iter().enumerate() {
            let pool = data.indices_with_labels(labels);
            if pool.is_empty() {
                return Err(crate::error::Error::config(format!(
                    "device {n} has no samples for labels {labels:?}"
                )));
            }
            pools.push(pool);
        }
        let n = cfg.num_devices;
        let mut src = MnistSource {
            data,
            batch: cfg.data.samples_per_round,
            pools,
            order: vec![Vec::new(); n],
            cursor: vec![0; n],
            epoch: vec![0; n],
            reshuffles: 0,
            stream,
        };
        for dev in 0..n {
            src.shuffle(dev, false);
        }
        Ok(src)
    }

    fn shuffle(&mut self, device: usize, exhausted: bool) {
        let epoch = self.epoch[device];
        let mut rng = self.stream.at(EPOCH_KEY_BASE + epoch, device as u64);
        let mut order = self.pools[device].clone();
        order.shuffle(&mut rng);
        self.order[device] = order;
        self.cursor[device] = 0;
        self.epoch[device] += 1;
        if exhausted {
            self.reshuffles += 1;
            log::info!(
                "device {device} exhausted its sample pool; reshuffled (epoch {})",
                self.epoch[device]
            );
        }
    }

    fn next_round(&mut self, t: u64) -> Vec<LossSnapshot<f64>> {
        (0..self.pools.len())
            .map(|dev| {
                let mut indices = Vec::with_capacity(self.batch);
                while indices.len() < self.batch {
                    if self.cursor[dev] >= self.order[dev].len() {
                        self.shuffle(dev, true);
                    }
                    indices.push(self.order[dev][self.cursor[dev]]);
                    self.cursor[dev] += 1;
                }
                LossSnapshot::logistic(t, dev, Arc::clone(&self.data), indices)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;
    use crate::rng::StreamId;

    fn quad_cfg() -> ExperimentConfig {
        let toml = r#"
algorithm = "comudo"
seed = 3
horizon = 10
num_devices = 2
model_dim = 5
alpha = 0.1
eta = 0.01
gamma = 0.5
v_min = 1.0
lambda_scale = 1.0
x_ub = 1.0
power_limit_dbm = 0.0

[channel]
kappa = 0.9
distance_m = 100.0
shadowing_var_db = 4.0
noise_psd_dbm_hz = -174.0
bandwidth_hz = 15000.0
noise_figure_db = 10.0

[data]
kind = "synthetic-quadratic"
samples_per_round = 1

[data.synthetic]
center_scale = 0.5
walk_scale = 0.1
walk_decay = 1.0
"#;
        ExperimentConfig::from_toml_str(toml).unwrap()
    }

    #[test]
    fn quadratic_gradient_is_analytic() {
        let cfg = quad_cfg();
        let mut src = DataSource::new(&cfg, RandomStream::new(3, StreamId::Data)).unwrap();
        let snaps = src.next_round(1);
        let x = vec![0.3, -0.1, 0.0, 0.8, -0.6];
        for s in &snaps {
            let g = s.grad(&x);
            let (val, g2) = s.eval_and_grad(&x);
            assert_eq!(g, g2);
            assert!((val - 0.5 * crate::vector::l2_norm_sq(&g)).abs() < 1e-14);
        }
    }

    #[test]
    fn center_walk_step_sizes_follow_decay() {
        let cfg = quad_cfg();
        let mut src = match DataSource::new(&cfg, RandomStream::new(3, StreamId::Data)).unwrap() {
            DataSource::Quadratic(q) => q,
            _ => unreachable!(),
        };
        let c1 = src.centers()[0].clone();
        src.next_round(2);
        let c2 = src.centers()[0].clone();
        let moved = crate::vector::dist(&c1, &c2);
        let expected = 0.1 * 2f64.powf(-1.0);
        assert!((moved - expected).abs() < 1e-12, "step {moved} vs {expected}");
    }

    #[test]
    fn finite_difference_matches_gradients() {
        let cfg = quad_cfg();
        let mut src = DataSource::new(&cfg, RandomStream::new(3, StreamId::Data)).unwrap();
        let snaps = src.next_round(1);
        let stream = RandomStream::new(11, StreamId::Data);
        for trial in 0..100u64 {
            let mut rng = stream.at(trial, 0);
            let x = gaussian_vec::<f64, _>(&mut rng, 5, 1.0);
            let g = snaps[0].grad(&x);
            for i in 0..5 {
                let h = 1e-5;
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (snaps[0].eval(&xp) - snaps[0].eval(&xm)) / (2.0 * h);
                let denom = g[i].abs().max(1.0);
                assert!(
                    ((fd - g[i]) / denom).abs() < 1e-5,
                    "fd {fd} vs analytic {}",
                    g[i]
                );
            }
        }
    }

    #[test]
    fn convexity_witness() {
        let cfg = quad_cfg();
        let mut src = DataSource::new(&cfg, RandomStream::new(3, StreamId::Data)).unwrap();
        let snap = &src.next_round(1)[0];
        let stream = RandomStream::new(13, StreamId::Data);
        for trial in 0..200u64 {
            let mut rng = stream.at(trial, 0);
            let x = gaussian_vec::<f64, _>(&mut rng, 5, 2.0);
            let y = gaussian_vec::<f64, _>(&mut rng, 5, 2.0);
            let t: f64 = rng.random_range(0.0..=1.0);
            let mix: Vec<f64> = x.iter().zip(&y).map(|(&a, &b)| t * a + (1.0 - t) * b).collect();
            assert!(snap.eval(&mix) <= t * snap.eval(&x) + (1.0 - t) * snap.eval(&y) + 1e-9);
        }
    }
}
