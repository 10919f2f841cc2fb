use alloc::string::{String, ToString};
use core::fmt;
use core::str::FromStr;

use crate::channel::DelayProfile;
use crate::plant::{InputSignal, PlantParams};
use crate::predictor::{DEFAULT_GAMMA_MAX, DEFAULT_TAU_MAX};

/// How the two ends are coupled across the channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Architecture {
    /// Power variables sent directly, no terminations.
    Raw,
    /// Matched wave transmission.
    Wave,
    /// Wave transmission with the operator-end Smith predictor.
    WaveSmith,
    /// Wave transmission with the remote-end minimum-jerk predictor.
    WaveMj,
    /// Wave transmission with both predictors.
    WavePred,
}

impl Architecture {
    pub const ALL: [Architecture; 5] = [
        Architecture::Raw,
        Architecture::Wave,
        Architecture::WaveSmith,
        Architecture::WaveMj,
        Architecture::WavePred,
    ];

    pub fn uses_waves(self) -> bool {
        self != Architecture::Raw
    }

    pub fn smith(self) -> bool {
        matches!(self, Architecture::WaveSmith | Architecture::WavePred)
    }

    pub fn mj(self) -> bool {
        matches!(self, Architecture::WaveMj | Architecture::WavePred)
    }

    /// Wave architecture with the given predictors.
    pub fn with_predictors(smith: bool, mj: bool) -> Self {
        match (smith, mj) {
            (false, false) => Architecture::Wave,
            (true, false) => Architecture::WaveSmith,
            (false, true) => Architecture::WaveMj,
            (true, true) => Architecture::WavePred,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Raw => "raw",
            Architecture::Wave => "wave",
            Architecture::WaveSmith => "wave+smith",
            Architecture::WaveMj => "wave+mj",
            Architecture::WavePred => "wave+pred",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Architecture {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "raw" => Ok(Architecture::Raw),
            "wave" => Ok(Architecture::Wave),
            "wave+smith" | "wave_smith" => Ok(Architecture::WaveSmith),
            "wave+mj" | "wave_mj" => Ok(Architecture::WaveMj),
            "wave+pred" | "wave_pred" => Ok(Architecture::WavePred),
            other => Err(ConfigError::new(
                "arch",
                alloc::format!("unknown architecture '{other}'"),
            )),
        }
    }
}

/// Which samples enter the power-channel dissipation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZetaMode {
    /// All four power variables taken at the current tick.
    #[default]
    SameTick,
    /// `x_r` replaced by `x_o(t − τ)` and `y_o` by `y_r(t − τ)`.
    DelaySubstituted,
}

impl FromStr for ZetaMode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "same-tick" | "same_tick" => Ok(ZetaMode::SameTick),
            "delay-substituted" | "delay_substituted" => Ok(ZetaMode::DelaySubstituted),
            other => Err(ConfigError::new(
                "passivity.zeta_mode",
                alloc::format!("unknown mode '{other}'"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: &'static str,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: &'static str, message: impl Into<String>) -> Self {
        Self {
            field,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl core::error::Error for ConfigError {}

pub const DEFAULT_DT: f64 = 0.001;
pub const DEFAULT_DURATION: f64 = 10.0;
pub const DEFAULT_B: f64 = 7.5;
pub const DEFAULT_BAND: f64 = 0.02;
pub const DEFAULT_OSCILLATION_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub arch: Architecture,
    pub b: f64,
    /// Operator → remote delay.
    pub forward_delay: DelayProfile,
    /// Remote → operator delay; `None` mirrors the forward profile.
    pub return_delay: Option<DelayProfile>,
    pub input: InputSignal,
    pub duration: f64,
    pub dt: f64,
    pub plant: PlantParams,
    pub smith_tau_max: f64,
    pub mj_gamma_max: f64,
    pub zeta_mode: ZetaMode,
    pub seed: u64,
    /// Settling band as a fraction of the equilibrium.
    pub band: f64,
    /// Oscillation verdict threshold as a fraction of the equilibrium.
    pub oscillation_threshold: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            arch: Architecture::Wave,
            b: DEFAULT_B,
            forward_delay: DelayProfile::Constant(0.0),
            return_delay: None,
            input: InputSignal::step(0.5, 0.0).expect("valid default step"),
            duration: DEFAULT_DURATION,
            dt: DEFAULT_DT,
            plant: PlantParams::default(),
            smith_tau_max: DEFAULT_TAU_MAX,
            mj_gamma_max: DEFAULT_GAMMA_MAX,
            zeta_mode: ZetaMode::SameTick,
            seed: 0,
            band: DEFAULT_BAND,
            oscillation_threshold: DEFAULT_OSCILLATION_THRESHOLD,
        }
    }
}

impl ExperimentConfig {
    /// Same constant delay in both directions.
    pub fn with_delay(mut self, tau: f64) -> Result<Self, ConfigError> {
        self.forward_delay =
            DelayProfile::constant(tau).map_err(|e| ConfigError::new("delay", e.to_string()))?;
        self.return_delay = None;
        Ok(self)
    }

    pub fn with_arch(mut self, arch: Architecture) -> Self {
        self.arch = arch;
        self
    }

    pub fn return_profile(&self) -> &DelayProfile {
        self.return_delay.as_ref().unwrap_or(&self.forward_delay)
    }

    /// Number of logged ticks, `duration/dt + 1`.
    pub fn ticks(&self) -> usize {
        libm::round(self.duration / self.dt) as usize + 1
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(ConfigError::new("dt", "must be finite and > 0"));
        }
        if !(self.duration.is_finite() && self.duration >= 10.0 * self.dt) {
            return Err(ConfigError::new("duration", "must be >= 10·dt"));
        }
        if !(self.b.is_finite() && self.b > 0.0) {
            return Err(ConfigError::new("b", "must be finite and > 0"));
        }
        self.plant
            .validate()
            .map_err(|e| ConfigError::new("plant", e.to_string()))?;
        if self.dt.is_nan() || self.dt >= 2.0 * self.plant.drag_time_constant {
            return Err(ConfigError::new(
                "dt",
                "must be < 2·plant.T_d for a stable Euler step",
            ));
        }
        for (field, profile) in [
            ("delay", &self.forward_delay),
            ("return_delay", self.return_profile()),
        ] {
            if let DelayProfile::Constant(tau) = profile {
                if !(tau.is_finite() && *tau >= 0.0) {
                    return Err(ConfigError::new(field, "must be finite and >= 0"));
                }
            }
            if self.arch.smith() {
                if let Some(max) = profile.max_tau() {
                    if max > self.smith_tau_max {
                        return Err(ConfigError::new(
                            "smith.tau_max",
                            alloc::format!(
                                "{} s is shorter than the {max} s delay",
                                self.smith_tau_max
                            ),
                        ));
                    }
                }
            }
        }
        if !(self.smith_tau_max.is_finite() && self.smith_tau_max >= 0.0) {
            return Err(ConfigError::new("smith.tau_max", "must be finite and >= 0"));
        }
        if !(self.mj_gamma_max.is_finite() && self.mj_gamma_max >= 0.0) {
            return Err(ConfigError::new("mj.gamma_max", "must be finite and >= 0"));
        }
        if !(self.band > 0.0 && self.band < 1.0) {
            return Err(ConfigError::new("band", "must be in (0, 1)"));
        }
        if !(self.oscillation_threshold.is_finite() && self.oscillation_threshold >= 0.0) {
            return Err(ConfigError::new(
                "metrics.oscillation_threshold",
                "must be finite and >= 0",
            ));
        }
        Ok(())
    }
}
