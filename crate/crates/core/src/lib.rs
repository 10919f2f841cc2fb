//! Bilateral teleoperation over a delayed channel.
//!
//! The crate models a two-port communication element between an operator
//! and a remote vehicle. Commands and feedback can cross it either as raw
//! power variables or as wave variables with matched terminations, and the
//! wave path can be augmented with a Smith predictor at the operator end
//! and a minimum-jerk predictor at the remote end. An energy ledger checks
//! passivity of the channel every tick.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

pub mod channel;
pub mod config;
pub mod metrics;
pub mod passivity;
pub mod plant;
pub mod predictor;
pub mod sim;
pub mod wave;

pub use channel::{ChannelEnd, ChannelError, ChannelMessage, DelayProfile, Delivered, Poll};
pub use config::{Architecture, ConfigError, ExperimentConfig, ZetaMode};
pub use metrics::{
    compute_metrics, evaluate, response_metrics, sweep, Metrics, SweepAxis, SweepRow,
};
pub use passivity::{
    energy_storage, power_balance_check, zeta_power_channel, EnergyLedger, PassivityError,
};
pub use plant::{InputSignal, PlantError, PlantParams, SignalError, VehicleModel};
pub use predictor::{
    mj_interpolate, MjPredictor, NullModel, PredictorError, SmithPredictor, VehicleWaveModel,
    WaveModel,
};
pub use sim::{
    analytical_equilibrium, run_experiment, Equilibrium, Flags, Reconfigure, SimError, Simulation,
    TraceLog, TraceRow,
};
pub use wave::{PowerSample, WaveError, WaveImpedance, WaveSample};
