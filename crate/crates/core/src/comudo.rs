//! Device-side constrained model updating with delayed information.
//!
//! At the beginning of round `t` a device only knows last round's gradient
//! and channel. It tests whether transmitting the plain gradient step would
//! exceed its power limit; if so, the step is damped entrywise by the
//! virtual-queue-weighted channel cost before the box projection, otherwise
//! plain projected gradient descent applies. The virtual queue itself is
//! floored at `v_min` and provably capped at `gamma * G / eta`.

use crate::config::ExperimentConfig;
use crate::scalar::Scalar;
use crate::vector::{box_clip, clamp_sym, Cplx};

/// Per-device algorithm state.
#[derive(Debug, Clone)]
pub struct DeviceState<T: Scalar> {
    /// Virtual queue length, in `[v_min, gamma * G / eta]`.
    pub queue: T,
    /// Local model of the current round, inside the box.
    pub local_model: Vec<T>,
    /// Transmit power limit in watts.
    pub power_limit: T,
    /// Delayed channel: the fading state revealed at the end of the
    /// previous round.
    pub last_channel: crate::channel::ChannelState<T>,
    /// Delayed gradient, taken at the previous recovered global model.
    pub last_gradient: Vec<T>,
}

/// Bounds from the problem geometry: residual-noise bound `E`, feasible-set
/// diameter `R` and constraint bound `G`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub e: f64,
    pub r: f64,
    pub g: f64,
}

/// `E = z_ub / (N lambda)`, `R = 2 sqrt(d) x_ub`,
/// `G = max_n max{P^n, d (R + E)^2 lambda^2 / h_lb^2 - P^n}`.
pub fn bound_constants_with_floor(cfg: &ExperimentConfig, z_ub: f64, h_lb: f64) -> BoundConstants {
    let e = z_ub / (cfg.num_devices as f64 * cfg.lambda_scale);
    let r = 2.0 * (cfg.model_dim as f64).sqrt() * cfg.x_ub;
    let lead = cfg.model_dim as f64 * (r + e).powi(2) * cfg.lambda_scale.powi(2) / (h_lb * h_lb);
    let g = cfg
        .power_limits
        .iter()
        .map(|&p| p.max(lead - p))
        .fold(f64::NEG_INFINITY, f64::max);
    BoundConstants { e, r, g }
}

/// Constraint function value `||b o (x - anchor)||^2 - power_limit`, where
/// the norm sums squared complex moduli.
pub fn constraint_value<T: Scalar>(
    b: &[Cplx<T>],
    x: &[T],
    anchor: &[T],
    power_limit: T,
) -> T {
    debug_assert_eq!(b.len(), x.len());
    debug_assert_eq!(x.len(), anchor.len());
    let mut acc = T::zero();
    for ((bv, &xv), &av) in b.iter().zip(x).zip(anchor) {
        let d = xv - av;
        acc += bv.norm_sqr() * d * d;
    }
    acc - power_limit
}

/// Virtual queue update `max{(1 - eta) q + [gamma g]_+, v_min}`.
#[inline]
pub fn queue_update<T: Scalar>(q_prev: T, g_now: T, eta: T, gamma: T, v_min: T) -> T {
    let push = (gamma * g_now).max(T::zero());
    ((T::one() - eta) * q_prev + push).max(v_min)
}

/// True iff transmitting the plain gradient step `-alpha * grad` under the
/// delayed channel would exceed the power limit (strict inequality; the
/// boundary takes the unconstrained branch).
pub fn branch_test<T: Scalar>(
    b_prev: &[Cplx<T>],
    grad: &[T],
    alpha: T,
    power_limit: T,
) -> bool {
    debug_assert_eq!(b_prev.len(), grad.len());
    let mut power = T::zero();
    for (bv, &gv) in b_prev.iter().zip(grad) {
        let d = alpha * gv;
        power += bv.norm_sqr() * d * d;
    }
    power > power_limit
}

/// Damped closed-form update: entrywise
/// `clip(x_hat - alpha / (1 + alpha gamma q theta) * grad, x_ub)`.
pub fn constrained_update<T: Scalar>(
    x_hat_prev: &[T],
    grad: &[T],
    theta_prev: &[T],
    q_prev: T,
    alpha: T,
    gamma: T,
    x_ub: T,
) -> Vec<T> {
    debug_assert_eq!(x_hat_prev.len(), grad.len());
    debug_assert_eq!(grad.len(), theta_prev.len());
    let aq = alpha * gamma * q_prev;
    x_hat_prev
        .iter()
        .zip(grad)
        .zip(theta_prev)
        .map(|((&x, &g), &th)| clamp_sym(x - alpha / (T::one() + aq * th) * g, x_ub))
        .collect()
}

/// Plain projected gradient step `clip(x_hat - alpha * grad, x_ub)`.
pub fn unconstrained_update<T: Scalar>(
    x_hat_prev: &[T],
    grad: &[T],
    alpha: T,
    x_ub: T,
) -> Vec<T> {
    debug_assert_eq!(x_hat_prev.len(), grad.len());
    x_hat_prev
        .iter()
        .zip(grad)
        .map(|(&x, &g)| clamp_sym(x - alpha * g, x_ub))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Constrained,
    Unconstrained,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Constrained => "constrained",
            Branch::Unconstrained => "unconstrained",
        }
    }
}

/// One beginning-of-round device update from delayed information. Does not
/// touch the queue; that is updated at the end of the round with the fresh
/// constraint value.
pub fn device_round<T: Scalar>(
    state: &DeviceState<T>,
    x_hat_prev: &[T],
    alpha: T,
    gamma: T,
    x_ub: T,
    lambda_scale: T,
) -> crate::error::Result<(Vec<T>, Branch)> {
    let b_prev = crate::channel::inversion_vector(&state.last_channel.h, lambda_scale)?;
    if branch_test(&b_prev, &state.last_gradient, alpha, state.power_limit) {
        let theta = crate::channel::power_cost_weights(&state.last_channel.h, lambda_scale)?;
        let model = constrained_update(
            x_hat_prev,
            &state.last_gradient,
            &theta,
            state.queue,
            alpha,
            gamma,
            x_ub,
        );
        Ok((model, Branch::Constrained))
    } else {
        let model = unconstrained_update(x_hat_prev, &state.last_gradient, alpha, x_ub);
        Ok((model, Branch::Unconstrained))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{init_channel, inversion_vector, power_cost_weights, ChannelState};
    use crate::rng::{RandomStream, StreamId};
    use num_complex::Complex;
    use proptest::prelude::*;

    fn ones_channel(dim: usize) -> Vec<Cplx<f64>> {
        vec![Complex::new(1.0, 0.0); dim]
    }

    #[test]
    fn constraint_value_examples() {
        let b = ones_channel(2);
        // x = anchor gives -P
        assert_eq!(constraint_value(&b, &[0.4, -0.2], &[0.4, -0.2], 3.0), -3.0);
        // unit channel, difference [3,4], P = 25: 9 + 16 - 25 = 0
        assert_eq!(constraint_value(&b, &[3.0, 4.0], &[0.0, 0.0], 25.0), 0.0);
    }

    #[test]
    fn constraint_value_matches_expansion() {
        let stream = RandomStream::new(5, StreamId::ChannelInit);
        for trial in 0..50u64 {
            let mut rng = stream.at(trial, 0);
            let c = init_channel::<f64, _>(6, 0.9, 1e-6, &mut rng);
            let b = inversion_vector(&c.h, 1.3).unwrap();
            let x = crate::rng::gaussian_vec::<f64, _>(&mut rng, 6, 2.0);
            let anchor = crate::rng::gaussian_vec::<f64, _>(&mut rng, 6, 2.0);
            let direct = constraint_value(&b, &x, &anchor, 0.7);
            let expanded: f64 = b
                .iter()
                .zip(&x)
                .zip(&anchor)
                .map(|((bv, &xv), &av)| bv.norm_sqr() * (xv - av) * (xv - av))
                .sum::<f64>()
                - 0.7;
            assert!((direct - expanded).abs() < 1e-12);
        }
    }

    fn tiny_cfg(d: usize, x_ub: f64, n: usize, lambda: f64, p_w: f64) -> ExperimentConfig {
        let toml = format!(
            r#"
algorithm = "comudo"
seed = 1
horizon = 10
num_devices = {n}
model_dim = {d}
alpha = 0.1
eta = 0.01
gamma = 0.5
v_min = 1.0
lambda_scale = {lambda}
x_ub = {x_ub}
power_limits_dbm = [{}]

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
"#,
            vec![format!("{}", 10.0 * p_w.log10() + 30.0); n].join(", ")
        );
        ExperimentConfig::from_toml_str(&toml).unwrap()
    }

    #[test]
    fn bound_constants_basics() {
        // d = 1, x_ub = 1: R = 2
        let cfg = tiny_cfg(1, 1.0, 1, 1.0, 1.0);
        let bc = bound_constants_with_floor(&cfg, 0.0, 0.1);
        assert_eq!(bc.r, 2.0);
        assert_eq!(bc.e, 0.0);
        // z_ub = 0 gives E = 0 regardless of the rest
        let bc2 = bound_constants_with_floor(&cfg, 3.0, 0.1);
        assert!((bc2.e - 3.0).abs() < 1e-15);
        // G formula at E = 0: max{P, d R^2 lambda^2 / h^2 - P}
        let lead = 1.0 * 4.0 * 1.0 / (0.1 * 0.1);
        assert!((bc.g - (lead - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn bound_constants_dominate_random_constraint_values() {
        // |g(x)| <= G over random in-box points and floored channels
        let cfg = tiny_cfg(4, 1.0, 1, 0.8, 0.5);
        let h_lb = 0.05;
        let bc = bound_constants_with_floor(&cfg, 0.0, h_lb);
        let stream = RandomStream::new(17, StreamId::ChannelInit);
        let mut worst = f64::NEG_INFINITY;
        for trial in 0..20_000u64 {
            let mut rng = stream.at(trial, 0);
            let c = init_channel::<f64, _>(4, 0.01, h_lb, &mut rng);
            let b = inversion_vector(&c.h, cfg.lambda_scale).unwrap();
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let anchor: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let g = constraint_value(&b, &x, &anchor, cfg.power_limits[0]);
            worst = worst.max(g.abs());
            assert!(g.abs() <= bc.g, "|g| = {} exceeds G = {}", g.abs(), bc.g);
        }
        assert!(worst > 0.0);
    }

    #[test]
    fn queue_update_examples() {
        // floors at v when no violation
        assert_eq!(queue_update(1.0, -0.5, 0.5, 1.0, 1.0), 1.0);
        // eta=0.5, v=1, q=2, gamma*g=3 -> max{1 + 3, 1} = 4
        assert_eq!(queue_update(2.0, 3.0, 0.5, 1.0, 1.0), 4.0);
    }

    proptest! {
        #[test]
        fn queue_sandwich(
            eta in 0.01f64..0.99,
            gamma in 0.01f64..10.0,
            seed in 0u64..500,
        ) {
            // Lemma 2: V <= Q <= gamma G / eta, exactly, for |g| <= G.
            let g_bound = 5.0;
            let cap = gamma * g_bound / eta;
            let v = 0.9 * cap * 0.001 + 1e-6; // any V in (0, cap)
            prop_assume!(v < cap);
            let stream = RandomStream::new(seed, StreamId::Data);
            let mut rng = stream.at(0, 0);
            let mut q = v;
            for _ in 0..200 {
                let g = rng.random_range(-g_bound..=g_bound);
                q = queue_update(q, g, eta, gamma, v);
                prop_assert!(q >= v);
                prop_assert!(q <= cap);
            }
        }

        #[test]
        fn damping_monotone_in_queue(seed in 0u64..300) {
            let stream = RandomStream::new(seed, StreamId::Data);
            let mut rng = stream.at(0, 0);
            let d = 6;
            let x_hat: Vec<f64> = (0..d).map(|_| rng.random_range(-0.5..0.5)).collect();
            let grad: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let theta: Vec<f64> = (0..d).map(|_| rng.random_range(0.1..5.0)).collect();
            let q_small = rng.random_range(0.0..5.0);
            let q_large = q_small + rng.random_range(0.0..10.0);
            let a = constrained_update(&x_hat, &grad, &theta, q_small, 0.2, 0.7, 10.0);
            let b = constrained_update(&x_hat, &grad, &theta, q_large, 0.2, 0.7, 10.0);
            for i in 0..d {
                prop_assert!((b[i] - x_hat[i]).abs() <= (a[i] - x_hat[i]).abs() + 1e-15);
            }
        }
    }

    #[test]
    fn branch_test_examples() {
        let b = ones_channel(2);
        assert!(!branch_test(&b, &[0.0, 0.0], 1.0, 0.5));
        // boundary: power 25 vs limit 25 is not a violation
        assert!(!branch_test(&b, &[3.0, 4.0], 1.0, 25.0));
        assert!(branch_test(&b, &[3.0, 4.0], 1.0, 24.0));
    }

    #[test]
    fn constrained_update_limits() {
        let x_hat = [0.2, -0.4, 0.9];
        let grad = [1.0, -2.0, 0.5];
        let theta = [0.7, 0.3, 1.1];
        // q -> 0 reproduces the unconstrained update
        let damped = constrained_update(&x_hat, &grad, &theta, 0.0, 0.1, 0.5, 1.0);
        let plain = unconstrained_update(&x_hat, &grad, 0.1, 1.0);
        assert_eq!(damped, plain);
        // theta -> infinity freezes the model at clip(x_hat)
        let huge = [1e18, 1e18, 1e18];
        let frozen = constrained_update(&x_hat, &grad, &huge, 5.0, 0.1, 0.5, 1.0);
        for (f, x) in frozen.iter().zip(&x_hat) {
            assert!((f - x).abs() < 1e-12);
        }
    }

    #[test]
    fn unconstrained_update_examples() {
        let x_hat = [0.5, -1.5];
        assert_eq!(
            unconstrained_update(&x_hat, &[0.0, 0.0], 0.3, 1.0),
            vec![0.5, -1.0]
        );
        // interior step stays interior
        assert_eq!(
            unconstrained_update(&[0.1, 0.2], &[0.5, -0.5], 0.2, 1.0),
            vec![0.0, 0.3]
        );
    }

    fn device_with(
        h: Vec<Cplx<f64>>,
        grad: Vec<f64>,
        queue: f64,
        power_limit: f64,
    ) -> DeviceState<f64> {
        let dim = h.len();
        DeviceState {
            queue,
            local_model: vec![0.0; dim],
            power_limit,
            last_channel: ChannelState {
                h,
                path_gain: 1.0,
                h_floor: 1e-6,
                round: 1,
            },
            last_gradient: grad,
        }
    }

    #[test]
    fn device_round_zero_gradient_is_unconstrained() {
        let dev = device_with(ones_channel(3), vec![0.0; 3], 2.0, 0.1);
        let x_hat = [0.4, -2.0, 0.0];
        let (model, branch) = device_round(&dev, &x_hat, 0.1, 0.5, 1.0, 1.0).unwrap();
        assert_eq!(branch, Branch::Unconstrained);
        assert_eq!(model, box_clip(&x_hat, 1.0));
    }

    #[test]
    fn device_round_damps_oversized_gradient() {
        // adversarially large gradient with tiny power limit: constrained
        // branch fires and the damped step needs strictly less power than
        // the plain step.
        let dim = 4;
        let h: Vec<Cplx<f64>> = (0..dim)
            .map(|i| Complex::new(0.5 + 0.1 * i as f64, -0.2))
            .collect();
        let grad = vec![50.0, -80.0, 120.0, -20.0];
        let p = 1e-4;
        let dev = device_with(h.clone(), grad.clone(), 10.0, p);
        let x_hat = vec![0.0; dim];
        let lambda = 1.0;
        let (model, branch) = device_round(&dev, &x_hat, 0.1, 0.5, 10.0, lambda).unwrap();
        assert_eq!(branch, Branch::Constrained);
        let b = inversion_vector(&h, lambda).unwrap();
        let damped_power = constraint_value(&b, &model, &x_hat, 0.0);
        let plain = unconstrained_update(&x_hat, &grad, 0.1, 10.0);
        let plain_power = constraint_value(&b, &plain, &x_hat, 0.0);
        assert!(damped_power < plain_power);
    }

    #[test]
    fn branch_consistency_without_clipping() {
        // if the branch test passes (no violation) and the plain step is
        // interior, its transmit power under the delayed channel is <= P.
        let stream = RandomStream::new(23, StreamId::ChannelInit);
        for trial in 0..200u64 {
            let mut rng = stream.at(trial, 0);
            let c = init_channel::<f64, _>(5, 1.0, 1e-3, &mut rng);
            let b = inversion_vector(&c.h, 0.6).unwrap();
            let grad: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let alpha = 0.1;
            let p = 2.0;
            if !branch_test(&b, &grad, alpha, p) {
                let x_hat = vec![0.0; 5];
                let step = unconstrained_update(&x_hat, &grad, alpha, 1e9);
                let power = constraint_value(&b, &step, &x_hat, 0.0);
                assert!(power <= p + 1e-12);
            }
        }
    }

    #[test]
    fn theta_from_channel_matches_inversion() {
        let c = init_channel::<f64, _>(
            8,
            0.7,
            1e-6,
            &mut RandomStream::new(2, StreamId::ChannelInit).at(0, 0),
        );
        let b = inversion_vector(&c.h, 2.0).unwrap();
        let theta = power_cost_weights(&c.h, 2.0).unwrap();
        for (t, bv) in theta.iter().zip(&b) {
            assert!((t - 2.0 * bv.norm_sqr()).abs() < 1e-12 * t);
        }
    }

    #[test]
    fn kernels_work_at_f32() {
        let q = queue_update(2.0f32, 3.0, 0.5, 1.0, 1.0);
        assert_eq!(q, 4.0f32);
        let model = unconstrained_update(&[0.5f32, -1.5], &[0.0, 0.0], 0.3, 1.0);
        assert_eq!(model, vec![0.5f32, -1.0]);
    }
}
