//! Fixed-step closed loop.
//!
//! Every tick runs the same sequence: operator command → operator
//! termination (or raw pass-through) → forward send/poll → remote predictor
//! → remote termination → plant step → return send/poll → operator
//! predictor → operator feedback → ledger. Nothing reads a wall clock, so a
//! configuration always produces the same trace.

use alloc::collections::VecDeque;
use alloc::string::ToString;
use alloc::vec::Vec;
use core::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::channel::{ChannelEnd, ChannelError, DelayProfile, Poll};
use crate::config::{Architecture, ConfigError, ExperimentConfig, ZetaMode};
use crate::passivity::{storage_density, zeta_scalar, EnergyLedger};
use crate::plant::{
    direct_equilibrium_velocity, wave_equilibrium_velocity, PlantError, VehicleModel,
};
use crate::predictor::{MjPredictor, PredictorError, SmithPredictor, VehicleWaveModel};
use crate::wave::WaveImpedance;

#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    Config(ConfigError),
    Channel(ChannelError),
    Plant(PlantError),
    Predictor(PredictorError),
    NonFiniteInput(f64),
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::Config(e) => write!(f, "config error: {e}"),
            SimError::Channel(e) => write!(f, "channel: {e}"),
            SimError::Plant(e) => write!(f, "plant: {e}"),
            SimError::Predictor(e) => write!(f, "predictor: {e}"),
            SimError::NonFiniteInput(v) => write!(f, "non-finite operator input {v}"),
        }
    }
}

impl core::error::Error for SimError {}

impl From<ConfigError> for SimError {
    fn from(e: ConfigError) -> Self {
        SimError::Config(e)
    }
}

impl From<ChannelError> for SimError {
    fn from(e: ChannelError) -> Self {
        SimError::Channel(e)
    }
}

impl From<PlantError> for SimError {
    fn from(e: PlantError) -> Self {
        SimError::Plant(e)
    }
}

impl From<PredictorError> for SimError {
    fn from(e: PredictorError) -> Self {
        SimError::Predictor(e)
    }
}

/// Per-tick status bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Flags(pub u8);

impl Flags {
    /// No new forward message this tick.
    pub const FORWARD_STALE: u8 = 1;
    /// No new return message this tick.
    pub const RETURN_STALE: u8 = 1 << 1;
    /// Power-channel dissipation negative.
    pub const ZETA_NEGATIVE: u8 = 1 << 2;
    /// Wave-channel energy balance violated.
    pub const PASSIVITY_BREACH: u8 = 1 << 3;

    pub fn contains(self, bit: u8) -> bool {
        self.0 & bit != 0
    }
}

/// One logged tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub x_o: f64,
    pub y_o: f64,
    pub x_r: f64,
    pub y_r: f64,
    pub u_o: f64,
    pub v_o: f64,
    pub u_r: f64,
    pub v_r: f64,
    pub tau_est: f64,
    pub e_in: f64,
    pub e_out: f64,
    pub e_store: f64,
    pub zeta: f64,
    pub flags: Flags,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceLog {
    pub arch: Architecture,
    pub dt: f64,
    pub rows: Vec<TraceRow>,
    pub ledger: EnergyLedger,
}

impl TraceLog {
    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn operator_feedback(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.y_o).collect()
    }

    pub fn remote_velocity(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.y_r).collect()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }
}

/// Runtime change requested while a simulation is live.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Reconfigure {
    /// New constant delay for both directions.
    pub delay: Option<f64>,
    pub arch: Option<Architecture>,
    pub b: Option<f64>,
}

/// The closed loop, advanced one tick at a time.
pub struct Simulation {
    arch: Architecture,
    z: WaveImpedance,
    dt: f64,
    tick: u64,
    plant: VehicleModel,
    forward: ChannelEnd<f64>,
    back: ChannelEnd<f64>,
    mj: Option<MjPredictor>,
    smith: Option<SmithPredictor<VehicleWaveModel>>,
    smith_tau_max: f64,
    mj_gamma_max: f64,
    ledger: EnergyLedger,
    zeta_mode: ZetaMode,
    // (x_o, y_r) per tick for the power-channel diagnostics, newest last.
    power_history: VecDeque<(f64, f64)>,
    history_len: usize,
    noise: Option<(ChaCha8Rng, Normal<f64>)>,
}

impl Simulation {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let z = WaveImpedance::new(cfg.b).map_err(|e| ConfigError::new("b", e.to_string()))?;
        let plant = VehicleModel::new(cfg.plant)?;
        let horizon = [cfg.forward_delay.max_tau(), cfg.return_profile().max_tau()]
            .into_iter()
            .flatten()
            .fold(cfg.smith_tau_max, f64::max);
        let history_len = libm::ceil(horizon / cfg.dt) as usize + 1;
        let noise = if cfg.plant.noise_std > 0.0 {
            let normal = Normal::new(0.0, cfg.plant.noise_std)
                .map_err(|_| ConfigError::new("plant.noise", "invalid standard deviation"))?;
            Some((ChaCha8Rng::seed_from_u64(cfg.seed), normal))
        } else {
            None
        };
        let mut sim = Self {
            arch: cfg.arch,
            z,
            dt: cfg.dt,
            tick: 0,
            plant,
            forward: ChannelEnd::new(cfg.forward_delay.clone()),
            back: ChannelEnd::new(cfg.return_profile().clone()),
            mj: None,
            smith: None,
            smith_tau_max: cfg.smith_tau_max,
            mj_gamma_max: cfg.mj_gamma_max,
            ledger: EnergyLedger::new(),
            zeta_mode: cfg.zeta_mode,
            power_history: VecDeque::with_capacity(history_len),
            history_len,
            noise,
        };
        sim.build_predictors()?;
        Ok(sim)
    }

    fn build_predictors(&mut self) -> Result<(), SimError> {
        self.mj = if self.arch.mj() {
            Some(MjPredictor::new(self.mj_gamma_max)?)
        } else {
            None
        };
        self.smith = if self.arch.smith() {
            let model = VehicleWaveModel::new(self.plant.clone(), self.z);
            Some(SmithPredictor::new(model, self.dt, self.smith_tau_max)?)
        } else {
            None
        };
        Ok(())
    }

    pub fn arch(&self) -> Architecture {
        self.arch
    }

    pub fn impedance(&self) -> WaveImpedance {
        self.z
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Time of the next tick.
    pub fn time(&self) -> f64 {
        self.tick as f64 * self.dt
    }

    pub fn ticks_done(&self) -> u64 {
        self.tick
    }

    pub fn ledger(&self) -> &EnergyLedger {
        &self.ledger
    }

    /// Forward delay currently applied to new messages.
    pub fn delay_setting(&self) -> f64 {
        self.forward.profile().tau(self.time())
    }

    /// Applies a runtime change at the current tick boundary. A change of
    /// `b` or architecture discards in-flight messages and predictor state;
    /// the vehicle keeps its velocity.
    pub fn reconfigure(&mut self, change: Reconfigure) -> Result<(), SimError> {
        if let Some(tau) = change.delay {
            if (self.arch.smith() || change.arch.is_some_and(Architecture::smith))
                && tau > self.smith_tau_max
            {
                return Err(ConfigError::new(
                    "delay",
                    alloc::format!("exceeds predictor horizon {} s", self.smith_tau_max),
                )
                .into());
            }
        }
        let new_z = match change.b {
            Some(b) => {
                Some(WaveImpedance::new(b).map_err(|e| ConfigError::new("b", e.to_string()))?)
            }
            None => None,
        };
        if let Some(tau) = change.delay {
            let profile = DelayProfile::constant(tau)
                .map_err(|e| ConfigError::new("delay", e.to_string()))?;
            if tau > self.history_len as f64 * self.dt {
                self.history_len = libm::ceil(tau / self.dt) as usize + 1;
            }
            self.forward.set_profile(profile.clone());
            self.back.set_profile(profile);
        }
        let flush =
            new_z.is_some_and(|z| z != self.z) || change.arch.is_some_and(|a| a != self.arch);
        if let Some(z) = new_z {
            self.z = z;
        }
        if let Some(a) = change.arch {
            self.arch = a;
        }
        if flush {
            self.forward = ChannelEnd::new(self.forward.profile().clone());
            self.back = ChannelEnd::new(self.back.profile().clone());
            self.power_history.clear();
            self.build_predictors()?;
        }
        Ok(())
    }

    fn measure(&mut self) -> f64 {
        let y = self.plant.velocity();
        match &mut self.noise {
            Some((rng, normal)) => y + normal.sample(rng),
            None => y,
        }
    }

    fn push_power_history(&mut self, x_o: f64, y_r: f64) {
        if self.power_history.len() == self.history_len {
            self.power_history.pop_front();
        }
        self.power_history.push_back((x_o, y_r));
    }

    // Entry `lag` ticks before the newest; zeros before the run started.
    fn history_at(&self, lag: usize) -> (f64, f64) {
        let n = self.power_history.len();
        if lag < n {
            self.power_history[n - 1 - lag]
        } else {
            (0.0, 0.0)
        }
    }

    fn lag_ticks(&self, tau: f64) -> usize {
        libm::round(tau / self.dt) as usize
    }

    /// Advances one tick under operator command `x_o`.
    pub fn step(&mut self, x_o: f64) -> Result<TraceRow, SimError> {
        if !x_o.is_finite() {
            return Err(SimError::NonFiniteInput(x_o));
        }
        let t = self.time();
        let row = if self.arch.uses_waves() {
            self.wave_tick(t, x_o)?
        } else {
            self.raw_tick(t, x_o)?
        };
        self.tick += 1;
        Ok(row)
    }

    fn wave_tick(&mut self, t: f64, x_o: f64) -> Result<TraceRow, SimError> {
        let z = self.z;
        let dt = self.dt;
        let mut flags = 0u8;

        let (u_o, _) = z.operator_termination(x_o, 0.0);
        self.forward.send(u_o, t)?;
        let fwd = self.forward.poll(t);
        if !fwd.is_fresh() {
            flags |= Flags::FORWARD_STALE;
        }
        let v_r = match &mut self.mj {
            Some(mj) => mj.step(&fwd, t),
            None => held(&fwd),
        };

        let y_r = self.measure();
        let (u_r, x_r) = z.remote_termination(y_r, v_r);
        self.plant.step(x_r, dt)?;

        self.back.send(u_r, t)?;
        let ret = self.back.poll(t);
        if !ret.is_fresh() {
            flags |= Flags::RETURN_STALE;
        }
        let tau_est = self.back.current_delay_estimate(t);
        let v_o = match &mut self.smith {
            Some(smith) => smith.step(u_o, &ret, tau_est, t)?,
            None => held(&ret),
        };
        let (_, y_o) = z.operator_termination(x_o, v_o);

        // The channel itself only emits what it delivers this tick.
        let out_o = ret.fresh().copied().unwrap_or(0.0);
        let out_r = fwd.fresh().copied().unwrap_or(0.0);
        if !self
            .ledger
            .accumulate_wave_scalar(t, u_o, out_o, u_r, out_r, dt)
        {
            flags |= Flags::PASSIVITY_BREACH;
        }

        Ok(TraceRow {
            t,
            x_o,
            y_o,
            x_r,
            y_r,
            u_o,
            v_o,
            u_r,
            v_r,
            tau_est,
            e_in: self.ledger.e_in,
            e_out: self.ledger.e_out,
            e_store: 0.0,
            zeta: 0.0,
            flags: Flags(flags),
        })
    }

    fn raw_tick(&mut self, t: f64, x_o: f64) -> Result<TraceRow, SimError> {
        let z = self.z;
        let dt = self.dt;
        let mut flags = 0u8;

        self.forward.send(x_o, t)?;
        let fwd = self.forward.poll(t);
        if !fwd.is_fresh() {
            flags |= Flags::FORWARD_STALE;
        }
        let x_r = held(&fwd);

        let y_r = self.measure();
        self.plant.step(x_r, dt)?;

        self.back.send(y_r, t)?;
        let ret = self.back.poll(t);
        if !ret.is_fresh() {
            flags |= Flags::RETURN_STALE;
        }
        let y_o = held(&ret);
        let tau_est = self.back.current_delay_estimate(t);

        self.push_power_history(x_o, y_r);
        let tau_fwd = self.forward.profile().tau(t);
        let tau_ret = self.back.profile().tau(t);
        let zeta = match self.zeta_mode {
            ZetaMode::SameTick => zeta_scalar(x_o, y_o, x_r, y_r, &z),
            ZetaMode::DelaySubstituted => {
                let (x_o_past, _) = self.history_at(self.lag_ticks(tau_fwd));
                let (_, y_r_past) = self.history_at(self.lag_ticks(tau_ret));
                zeta_scalar(x_o, y_r_past, x_o_past, y_r, &z)
            }
        };
        // Left rectangles over [t − τ, t): the current tick is excluded.
        let window = self.lag_ticks(tau_fwd);
        let e_store = dt
            * (1..=window)
                .map(|lag| {
                    let (x, y) = self.history_at(lag);
                    storage_density(x, y, &z)
                })
                .sum::<f64>();
        if self.ledger.record_power_channel(t, zeta, e_store) {
            flags |= Flags::ZETA_NEGATIVE;
        }

        let (u_o, v_o) = z.encode_operator(x_o, y_o);
        let (u_r, v_r) = z.encode_remote(x_r, y_r);
        Ok(TraceRow {
            t,
            x_o,
            y_o,
            x_r,
            y_r,
            u_o,
            v_o,
            u_r,
            v_r,
            tau_est,
            e_in: self.ledger.e_in,
            e_out: self.ledger.e_out,
            e_store,
            zeta,
            flags: Flags(flags),
        })
    }
}

fn held(p: &Poll<f64>) -> f64 {
    p.latest().copied().unwrap_or(0.0)
}

/// Runs a full experiment from rest.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<TraceLog, SimError> {
    let mut sim = Simulation::new(cfg)?;
    let n = cfg.ticks();
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let x_o = cfg.input.value_at(sim.time());
        rows.push(sim.step(x_o)?);
    }
    Ok(TraceLog {
        arch: cfg.arch,
        dt: cfg.dt,
        rows,
        ledger: sim.ledger,
    })
}

/// Steady state of the loop under a held step command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub y_o: f64,
    pub y_r: f64,
}

/// Analytical equilibrium for step inputs; `None` for other inputs.
///
/// Wave variants: `y_r` is the matched-termination fixed point and
/// `y_o = (b/2)·x_o + y_r/2`. Raw: both ends settle at the plant's
/// open-loop steady state.
pub fn analytical_equilibrium(cfg: &ExperimentConfig) -> Option<Equilibrium> {
    let x = cfg.input.step_level()?;
    if cfg.arch.uses_waves() {
        let y_r = wave_equilibrium_velocity(&cfg.plant, cfg.b, x);
        Some(Equilibrium {
            y_o: 0.5 * cfg.b * x + 0.5 * y_r,
            y_r,
        })
    } else {
        let y_r = direct_equilibrium_velocity(&cfg.plant, x);
        Some(Equilibrium { y_o: y_r, y_r })
    }
}
