//! Experiment configuration.
//!
//! Config files are TOML with `key = value` entries grouped in named
//! sections. Fields carrying dB or dBm values are suffixed `_db` / `_dbm`
//! and converted to linear SI units (watts, Hz, ratios) on load; the
//! resolved [`ExperimentConfig`] holds linear units only. The environment
//! variable `OTA_FL_SEED` overrides the configured seed.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::units::dbm_to_watts;

pub const SEED_ENV_VAR: &str = "OTA_FL_SEED";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AlgorithmKind {
    Comudo,
    IdealizedFl,
    OtaLpc,
    /// A named strategy that is declared but not implemented here.
    Custom(String),
}

impl AlgorithmKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "comudo" => Ok(AlgorithmKind::Comudo),
            "idealized-fl" | "idealized_fl" | "idealizedfl" => Ok(AlgorithmKind::IdealizedFl),
            "ota-lpc" | "ota_lpc" | "otalpc" => Ok(AlgorithmKind::OtaLpc),
            "ota-rci" | "ota_rci" => Ok(AlgorithmKind::Custom("ota-rci".into())),
            "omuaa" => Ok(AlgorithmKind::Custom("omuaa".into())),
            "ota-msp" | "ota_msp" => Ok(AlgorithmKind::Custom("ota-msp".into())),
            other => Err(Error::config(format!(
                "unknown algorithm `{other}`; expected one of comudo, idealized-fl, ota-lpc, ota-rci, omuaa, ota-msp"
            ))),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            AlgorithmKind::Comudo => "comudo",
            AlgorithmKind::IdealizedFl => "idealized-fl",
            AlgorithmKind::OtaLpc => "ota-lpc",
            AlgorithmKind::Custom(s) => s,
        }
    }
}

/// How the channel-magnitude floor `h_LB` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HFloor {
    /// Absolute magnitude floor.
    Absolute(f64),
    /// Floor at `scale * sqrt(xi_n)` per device (relative to the stationary
    /// channel magnitude).
    ScaleOfStationary(f64),
}

impl HFloor {
    pub fn resolve(&self, path_gain: f64) -> f64 {
        match *self {
            HFloor::Absolute(v) => v,
            HFloor::ScaleOfStationary(s) => s * path_gain.sqrt(),
        }
    }
}

/// Fading-channel parameters, resolved to linear units.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    /// Gauss-Markov correlation coefficient.
    pub kappa: f64,
    /// Per-device distance to the server in meters.
    pub distance_m: Vec<f64>,
    /// Log-normal shadowing variance in dB^2.
    pub shadowing_var_db: f64,
    /// Noise power spectral density in dBm/Hz.
    pub noise_psd_dbm_hz: f64,
    /// Subchannel bandwidth in Hz.
    pub bandwidth_hz: f64,
    /// Receiver noise figure in dB.
    pub noise_figure_db: f64,
    /// Number of orthogonal subchannels (documentation of the physical
    /// layout; every model entry sees an independent fading coefficient).
    pub num_subchannels: usize,
    pub h_floor: HFloor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataKind {
    SyntheticQuadratic,
    LogisticMnist,
}

/// Synthetic quadratic scenario: per-device loss centers follow a random
/// walk with step `walk_scale * t^(-walk_decay)`, so the accumulated center
/// path length is tunable.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub center_scale: f64,
    pub walk_scale: f64,
    pub walk_decay: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            center_scale: 1.0,
            walk_scale: 0.0,
            walk_decay: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataSourceConfig {
    pub kind: DataKind,
    pub samples_per_round: usize,
    /// Class labels each device may draw from; defaults to `device % 10`.
    pub labels_per_device: Option<Vec<Vec<u8>>>,
    pub dataset_path: PathBuf,
    /// Optional a priori gradient norm bound; measured and reported, never
    /// enforced by clipping.
    pub gradient_bound: Option<f64>,
    pub synthetic: SyntheticConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelInit {
    Zero,
    UniformInBox,
}

/// Fully resolved experiment configuration (linear units everywhere).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Step size.
    pub alpha: f64,
    /// Virtual-queue penalty factor, in (0, 1).
    pub eta: f64,
    /// Constraint weight.
    pub gamma: f64,
    /// Minimum virtual queue length.
    pub v_min: f64,
    /// Power scaling factor of the channel inversion.
    pub lambda_scale: f64,
    /// Model box bound; the feasible set is `[-x_ub, x_ub]^d`.
    pub x_ub: f64,
    /// Per-device transmit power limits in watts.
    pub power_limits: Vec<f64>,
    pub num_devices: usize,
    pub model_dim: usize,
    pub horizon: u64,
    pub seed: u64,
    pub model_init: ModelInit,
    pub channel: ChannelConfig,
    pub data: DataSourceConfig,
    pub algorithm: AlgorithmKind,
}

impl ExperimentConfig {
    pub fn power_limit(&self, device: usize) -> f64 {
        self.power_limits[device]
    }

    /// Basic field validation; channel-dependent checks (queue capacity)
    /// run once per-device path gains are known.
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::config(format!("eta must lie in (0,1), got {}", self.eta)));
        }
        for (name, v) in [
            ("alpha", self.alpha),
            ("gamma", self.gamma),
            ("v_min", self.v_min),
            ("lambda_scale", self.lambda_scale),
            ("x_ub", self.x_ub),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.num_devices == 0 || self.model_dim == 0 || self.horizon == 0 {
            return Err(Error::config(
                "num_devices, model_dim and horizon must all be positive",
            ));
        }
        if self.power_limits.len() != self.num_devices {
            return Err(Error::LengthMismatch {
                what: "power_limits",
                expected: self.num_devices,
                got: self.power_limits.len(),
            });
        }
        if self.power_limits.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::config("power limits must be positive"));
        }
        if self.channel.distance_m.len() != self.num_devices {
            return Err(Error::LengthMismatch {
                what: "channel.distance_m",
                expected: self.num_devices,
                got: self.channel.distance_m.len(),
            });
        }
        if self.channel.distance_m.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::config("device distances must be positive"));
        }
        if !(0.0..=1.0).contains(&self.channel.kappa) {
            return Err(Error::config(format!(
                "channel.kappa must lie in [0,1], got {}",
                self.channel.kappa
            )));
        }
        if self.channel.bandwidth_hz <= 0.0 {
            return Err(Error::config("channel.bandwidth_hz must be positive"));
        }
        match self.channel.h_floor {
            HFloor::Absolute(v) if !(v > 0.0) => {
                return Err(Error::config("channel.h_floor must be positive"))
            }
            HFloor::ScaleOfStationary(s) if !(s > 0.0) => {
                return Err(Error::config("channel.h_floor_scale must be positive"))
            }
            _ => {}
        }
        if self.data.samples_per_round == 0 {
            return Err(Error::config("data.samples_per_round must be at least 1"));
        }
        if let Some(labels) = &self.data.labels_per_device {
            if labels.len() != self.num_devices {
                return Err(Error::LengthMismatch {
                    what: "data.labels_per_device",
                    expected: self.num_devices,
                    got: labels.len(),
                });
            }
            if labels.iter().any(|l| l.is_empty()) {
                return Err(Error::config("every device needs at least one label"));
            }
        }
        Ok(())
    }

    /// Lemma-2 precondition `V < gamma * G / eta`, checked against the
    /// resolved channel floor (with the noise bound taken as zero, which
    /// only makes the check stricter).
    pub fn validate_queue_capacity(&self, h_lb: f64) -> Result<()> {
        let bc = crate::comudo::bound_constants_with_floor(self, 0.0, h_lb);
        let cap = self.gamma * bc.g / self.eta;
        if self.v_min >= cap {
            return Err(Error::config(format!(
                "v_min = {} must be below gamma*G/eta = {cap}",
                self.v_min
            )));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("config parse error: {e}")))?;
        raw.resolve()
    }

    /// Load from a file, applying the `OTA_FL_SEED` environment override.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Ok(seed) = std::env::var(SEED_ENV_VAR) {
            let parsed = seed.parse::<u64>().map_err(|_| {
                Error::config(format!("{SEED_ENV_VAR} must be an unsigned integer, got `{seed}`"))
            })?;
            cfg.seed = parsed;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

// --- raw TOML schema ---------------------------------------------------

fn default_samples_per_round() -> usize {
    20
}

fn default_dataset_path() -> PathBuf {
    PathBuf::from("data/mnist")
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    algorithm: String,
    seed: u64,
    horizon: u64,
    num_devices: usize,
    model_dim: usize,
    alpha: f64,
    eta: f64,
    gamma: f64,
    v_min: f64,
    lambda_scale: f64,
    x_ub: f64,
    /// Uniform per-device power limit in dBm.
    power_limit_dbm: Option<f64>,
    /// Per-device power limits in dBm (overrides `power_limit_dbm`).
    power_limits_dbm: Option<Vec<f64>>,
    #[serde(default)]
    model_init: Option<String>,
    channel: RawChannel,
    data: RawData,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    kappa: f64,
    distance_m: Option<f64>,
    distances_m: Option<Vec<f64>>,
    shadowing_var_db: f64,
    noise_psd_dbm_hz: f64,
    bandwidth_hz: f64,
    noise_figure_db: f64,
    #[serde(default = "default_subchannels")]
    num_subchannels: usize,
    h_floor: Option<f64>,
    h_floor_scale: Option<f64>,
}

fn default_subchannels() -> usize {
    1000
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawData {
    kind: String,
    #[serde(default = "default_samples_per_round")]
    samples_per_round: usize,
    labels_per_device: Option<Vec<Vec<u8>>>,
    #[serde(default = "default_dataset_path")]
    dataset_path: PathBuf,
    gradient_bound: Option<f64>,
    #[serde(default)]
    synthetic: Option<RawSynthetic>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSynthetic {
    center_scale: Option<f64>,
    walk_scale: Option<f64>,
    walk_decay: Option<f64>,
}

impl RawConfig {
    fn resolve(self) -> Result<ExperimentConfig> {
        let n = self.num_devices;
        let power_limits = match (self.power_limits_dbm, self.power_limit_dbm) {
            (Some(list), _) => list.into_iter().map(dbm_to_watts).collect(),
            (None, Some(p)) => vec![dbm_to_watts(p); n],
            (None, None) => {
                return Err(Error::config(
                    "one of power_limit_dbm or power_limits_dbm is required",
                ))
            }
        };
        let distance_m = match (self.channel.distances_m, self.channel.distance_m) {
            (Some(list), _) => list,
            (None, Some(d)) => vec![d; n],
            (None, None) => {
                return Err(Error::config(
                    "one of channel.distance_m or channel.distances_m is required",
                ))
            }
        };
        let h_floor = match (self.channel.h_floor, self.channel.h_floor_scale) {
            (Some(abs), None) => HFloor::Absolute(abs),
            (None, Some(s)) => HFloor::ScaleOfStationary(s),
            (None, None) => HFloor::ScaleOfStationary(1e-3),
            (Some(_), Some(_)) => {
                return Err(Error::config(
                    "set at most one of channel.h_floor and channel.h_floor_scale",
                ))
            }
        };
        let kind = match self.data.kind.to_ascii_lowercase().as_str() {
            "synthetic-quadratic" | "synthetic_quadratic" => DataKind::SyntheticQuadratic,
            "logistic-mnist" | "logistic_mnist" => DataKind::LogisticMnist,
            other => {
                return Err(Error::config(format!(
                    "unknown data.kind `{other}`; expected synthetic-quadratic or logistic-mnist"
                )))
            }
        };
        let synthetic = {
            let defaults = SyntheticConfig::default();
            match self.data.synthetic {
                Some(raw) => SyntheticConfig {
                    center_scale: raw.center_scale.unwrap_or(defaults.center_scale),
                    walk_scale: raw.walk_scale.unwrap_or(defaults.walk_scale),
                    walk_decay: raw.walk_decay.unwrap_or(defaults.walk_decay),
                },
                None => defaults,
            }
        };
        let model_init = match self.model_init.as_deref() {
            None | Some("zero") => ModelInit::Zero,
            Some("uniform") => ModelInit::UniformInBox,
            Some(other) => {
                return Err(Error::config(format!(
                    "model_init must be `zero` or `uniform`, got `{other}`"
                )))
            }
        };
        let cfg = ExperimentConfig {
            alpha: self.alpha,
            eta: self.eta,
            gamma: self.gamma,
            v_min: self.v_min,
            lambda_scale: self.lambda_scale,
            x_ub: self.x_ub,
            power_limits,
            num_devices: n,
            model_dim: self.model_dim,
            horizon: self.horizon,
            seed: self.seed,
            model_init,
            channel: ChannelConfig {
                kappa: self.channel.kappa,
                distance_m,
                shadowing_var_db: self.channel.shadowing_var_db,
                noise_psd_dbm_hz: self.channel.noise_psd_dbm_hz,
                bandwidth_hz: self.channel.bandwidth_hz,
                noise_figure_db: self.channel.noise_figure_db,
                num_subchannels: self.channel.num_subchannels,
                h_floor,
            },
            data: DataSourceConfig {
                kind,
                samples_per_round: self.data.samples_per_round,
                labels_per_device: self.data.labels_per_device,
                dataset_path: self.data.dataset_path,
                gradient_bound: self.data.gradient_bound,
                synthetic,
            },
            algorithm: AlgorithmKind::parse(&self.algorithm)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
