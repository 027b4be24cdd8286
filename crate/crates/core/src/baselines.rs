//! Per-round device update strategies behind a common interface.
//!
//! Every strategy consumes only phase-A-legal information: the delayed
//! gradient and delayed channel cached in [`DeviceState`], and the last
//! broadcast global model. OTA-RCI, OMUAA and OTA-MSP are declared as named
//! stubs; their update rules come from other work and selecting them is
//! rejected with a clear message.

use crate::comudo::{self, Branch, DeviceState};
use crate::config::{AlgorithmKind, ExperimentConfig};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::vector::{step_from, Cplx};

pub trait Strategy: Send + Sync {
    fn name(&self) -> &'static str;

    /// False for the idealized error-free baseline: the orchestrator then
    /// averages local models noiselessly and skips power accounting.
    fn uses_channel(&self) -> bool {
        true
    }

    /// True only for strategies that run the virtual queue.
    fn maintains_queue(&self) -> bool {
        false
    }

    /// Phase-A update from delayed information only.
    fn update(
        &self,
        dev: &DeviceState<f64>,
        x_hat_prev: &[f64],
        cfg: &ExperimentConfig,
    ) -> Result<(Vec<f64>, Branch)>;
}

pub fn make_strategy(kind: &AlgorithmKind) -> Result<Box<dyn Strategy>> {
    match kind {
        AlgorithmKind::Comudo => Ok(Box::new(Comudo)),
        AlgorithmKind::IdealizedFl => Ok(Box::new(IdealizedFl)),
        AlgorithmKind::OtaLpc => Ok(Box::new(OtaLpc)),
        AlgorithmKind::Custom(name) => Err(Error::UnimplementedBaseline(name.clone())),
    }
}

/// Constrained over-the-air model updating with delayed information.
pub struct Comudo;

impl Strategy for Comudo {
    fn name(&self) -> &'static str {
        "comudo"
    }

    fn maintains_queue(&self) -> bool {
        true
    }

    fn update(
        &self,
        dev: &DeviceState<f64>,
        x_hat_prev: &[f64],
        cfg: &ExperimentConfig,
    ) -> Result<(Vec<f64>, Branch)> {
        comudo::device_round(
            dev,
            x_hat_prev,
            cfg.alpha,
            cfg.gamma,
            cfg.x_ub,
            cfg.lambda_scale,
        )
    }
}

/// Plain local gradient step `x_hat - alpha * grad`.
pub fn idealized_fl_update<T: Scalar>(grad: &[T], x_hat_prev: &[T], alpha: T) -> Vec<T> {
    step_from(x_hat_prev, grad, alpha)
}

/// Error-free FL baseline: standard local gradient descent with noiseless
/// global averaging; serves as the accuracy upper bound.
pub struct IdealizedFl;

impl Strategy for IdealizedFl {
    fn name(&self) -> &'static str {
        "idealized-fl"
    }

    fn uses_channel(&self) -> bool {
        false
    }

    fn update(
        &self,
        dev: &DeviceState<f64>,
        x_hat_prev: &[f64],
        cfg: &ExperimentConfig,
    ) -> Result<(Vec<f64>, Branch)> {
        Ok((
            idealized_fl_update(&dev.last_gradient, x_hat_prev, cfg.alpha),
            Branch::Unconstrained,
        ))
    }
}

/// Long-term power control: the plain step's model difference is scaled by
/// `min{1, sqrt(P / power)}` so the projected transmit power under the
/// delayed channel meets the threshold (set to the per-device power limit).
pub fn ota_lpc_update<T: Scalar>(
    grad: &[T],
    b_prev: &[Cplx<T>],
    x_hat_prev: &[T],
    alpha: T,
    power_limit: T,
) -> Vec<T> {
    let mut power = T::zero();
    for (bv, &g) in b_prev.iter().zip(grad) {
        let d = alpha * g;
        power += bv.norm_sqr() * d * d;
    }
    let scale = if power > power_limit {
        (power_limit / power).sqrt()
    } else {
        T::one()
    };
    step_from(x_hat_prev, grad, alpha * scale)
}

pub struct OtaLpc;

impl Strategy for OtaLpc {
    fn name(&self) -> &'static str {
        "ota-lpc"
    }

    fn update(
        &self,
        dev: &DeviceState<f64>,
        x_hat_prev: &[f64],
        cfg: &ExperimentConfig,
    ) -> Result<(Vec<f64>, Branch)> {
        let b_prev = crate::channel::inversion_vector(&dev.last_channel.h, cfg.lambda_scale)?;
        Ok((
            ota_lpc_update(
                &dev.last_gradient,
                &b_prev,
                x_hat_prev,
                cfg.alpha,
                dev.power_limit,
            ),
            Branch::Unconstrained,
        ))
    }
}
