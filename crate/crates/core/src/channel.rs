//! Time-correlated fading channel, channel inversion and receiver noise.
//!
//! Each device sees a first-order Gauss-Markov complex fading process per
//! model entry, `h' = kappa * h + r` with `r ~ CN(0, (1 - kappa^2) * xi)`,
//! initialized from the stationary law `CN(0, xi)`. The path gain `xi`
//! combines an urban-macrocell distance loss with a log-normal shadowing
//! draw. Entry magnitudes are floored at `h_floor` with phase preserved so
//! channel inversion stays bounded.
//!
//! The model dimension may exceed the number of physical subchannels; the
//! simulator gives each of the `d` model entries its own independent fading
//! coefficient (reading: `ceil(d / C)` sequential analog symbols per round,
//! each entry with its own coherent realization).

use num_complex::Complex;
use rand::Rng;

use crate::config::ChannelConfig;
use crate::error::{Error, Result};
use crate::rng::complex_gaussian_vec;
use crate::scalar::Scalar;
use crate::units::dbm_to_watts;
use crate::vector::Cplx;

/// Per-device fading state at one round.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState<T: Scalar> {
    /// Fading coefficient per model entry.
    pub h: Vec<Cplx<T>>,
    /// Linear path gain `xi` (distance loss plus shadowing).
    pub path_gain: T,
    /// Minimum entry magnitude, already resolved for this device.
    pub h_floor: T,
    pub round: u64,
}

/// Urban-macrocell path gain in dB: `-31.54 - 37 log10(rho) - s`.
pub fn path_gain_db(distance_m: f64, shadow_draw_db: f64) -> Result<f64> {
    if !(distance_m > 0.0) {
        return Err(Error::config(format!(
            "device distance must be positive, got {distance_m}"
        )));
    }
    Ok(-31.54 - 37.0 * distance_m.log10() - shadow_draw_db)
}

/// Stationary initialization `h ~ CN(0, xi I)` with the magnitude floor
/// applied.
pub fn init_channel<T: Scalar, R: Rng + ?Sized>(
    dim: usize,
    path_gain: T,
    h_floor: T,
    rng: &mut R,
) -> ChannelState<T> {
    let mut h = complex_gaussian_vec(rng, dim, path_gain);
    floor_magnitudes(&mut h, h_floor);
    ChannelState {
        h,
        path_gain,
        h_floor,
        round: 1,
    }
}

/// One Gauss-Markov step: `h' = kappa * h + r`, `r ~ CN(0, (1-kappa^2) xi)`,
/// then magnitude flooring. Advances the round counter.
pub fn step_channel<T: Scalar, R: Rng + ?Sized>(
    prev: &ChannelState<T>,
    kappa: T,
    rng: &mut R,
) -> ChannelState<T> {
    let innov_var = (T::one() - kappa * kappa) * prev.path_gain;
    let innov = complex_gaussian_vec(rng, prev.h.len(), innov_var);
    let mut h: Vec<Cplx<T>> = prev
        .h
        .iter()
        .zip(&innov)
        .map(|(&hp, &r)| hp * kappa + r)
        .collect();
    floor_magnitudes(&mut h, prev.h_floor);
    ChannelState {
        h,
        path_gain: prev.path_gain,
        h_floor: prev.h_floor,
        round: prev.round + 1,
    }
}

/// Raise entries with `|h| < floor` to the floor, preserving phase. A zero
/// entry (phase undefined) is replaced by the real value `floor`.
fn floor_magnitudes<T: Scalar>(h: &mut [Cplx<T>], floor: T) {
    let floor_sq = floor * floor;
    for entry in h.iter_mut() {
        let mag_sq = entry.norm_sqr();
        if mag_sq < floor_sq {
            if mag_sq.is_zero() {
                *entry = Complex::new(floor, T::zero());
            } else {
                let scale = floor / mag_sq.sqrt();
                *entry = Complex::new(entry.re * scale, entry.im * scale);
            }
        }
    }
}

/// Channel inversion vector: `b[i] = lambda * conj(h[i]) / |h[i]|^2`, so
/// `h[i] * b[i] = lambda` exactly.
pub fn inversion_vector<T: Scalar>(h: &[Cplx<T>], lambda_scale: T) -> Result<Vec<Cplx<T>>> {
    let mut b = Vec::with_capacity(h.len());
    for entry in h {
        let mag_sq = entry.norm_sqr();
        if !(mag_sq > T::zero()) {
            return Err(Error::Domain {
                what: "inversion_vector",
                detail: "zero-magnitude channel entry".into(),
            });
        }
        let scale = lambda_scale / mag_sq;
        b.push(Complex::new(entry.re * scale, -(entry.im) * scale));
    }
    Ok(b)
}

/// Power-cost weights of the constraint function:
/// `theta[i] = 2 lambda^2 / |h[i]|^2`, identically `2 |b[i]|^2`.
pub fn power_cost_weights<T: Scalar>(h: &[Cplx<T>], lambda_scale: T) -> Result<Vec<T>> {
    let two_lambda_sq = T::of(2.0) * lambda_scale * lambda_scale;
    let mut theta = Vec::with_capacity(h.len());
    for entry in h {
        let mag_sq = entry.norm_sqr();
        if !(mag_sq > T::zero()) {
            return Err(Error::Domain {
                what: "power_cost_weights",
                detail: "zero-magnitude channel entry".into(),
            });
        }
        theta.push(two_lambda_sq / mag_sq);
    }
    Ok(theta)
}

/// Per-subchannel receiver noise power in watts:
/// `dbm_to_watts(N0 + 10 log10(B_W) + N_F)`.
pub fn noise_power_watts(cfg: &ChannelConfig) -> f64 {
    dbm_to_watts(cfg.noise_psd_dbm_hz + 10.0 * cfg.bandwidth_hz.log10() + cfg.noise_figure_db)
}

/// Circularly-symmetric receiver noise with per-entry variance
/// `noise_power`. Zero power gives the zero vector.
pub fn draw_noise<T: Scalar, R: Rng + ?Sized>(
    dim: usize,
    noise_power: T,
    rng: &mut R,
) -> Vec<Cplx<T>> {
    if noise_power.is_zero() {
        return vec![Complex::new(T::zero(), T::zero()); dim];
    }
    complex_gaussian_vec(rng, dim, noise_power)
}
