//! Energy bookkeeping for the communication element.
//!
//! For the wave channel the ledger integrates the energy of the waves put
//! into the channel (`u_o`, `u_r`) and of the waves the channel hands back
//! (`v̂_o`, `v̂_r`). Passivity means the second never exceeds the first.
//! For the power-variable channel the monitor evaluates the storage
//! function `E` and dissipation `ζ`; `ζ` can go negative there.

use core::fmt;

use crate::wave::{dot, power_flow, PowerSample, WaveError, WaveImpedance, WaveSample};

#[derive(Debug, Clone, PartialEq)]
pub enum PassivityError {
    InvalidStep(f64),
    InsufficientHistory {
        needed_from: f64,
        available_from: f64,
    },
    Wave(WaveError),
}

impl fmt::Display for PassivityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PassivityError::InvalidStep(dt) => write!(f, "time step must be > 0, got {dt}"),
            PassivityError::InsufficientHistory {
                needed_from,
                available_from,
            } => write!(
                f,
                "history starts at t={available_from}, window needs t={needed_from}"
            ),
            PassivityError::Wave(e) => e.fmt(f),
        }
    }
}

impl core::error::Error for PassivityError {}

impl From<WaveError> for PassivityError {
    fn from(e: WaveError) -> Self {
        PassivityError::Wave(e)
    }
}

/// Dissipation of the power-variable channel,
/// `y_o²/b − (y_o − b·x_o)²/(2b) + b·x_r² − (y_r + b·x_r)²/(2b)`.
pub fn zeta_power_channel(ps: &PowerSample, z: &WaveImpedance) -> Result<f64, PassivityError> {
    PowerSample::new(
        ps.t,
        ps.x_o.clone(),
        ps.y_o.clone(),
        ps.x_r.clone(),
        ps.y_r.clone(),
    )?;
    let b = z.b();
    let mut zeta = dot(&ps.y_o, &ps.y_o) / b + b * dot(&ps.x_r, &ps.x_r);
    for i in 0..ps.dim() {
        let d_o = ps.y_o[i] - b * ps.x_o[i];
        let d_r = ps.y_r[i] + b * ps.x_r[i];
        zeta -= (d_o * d_o + d_r * d_r) / (2.0 * b);
    }
    Ok(zeta)
}

/// Scalar form of [`zeta_power_channel`].
#[inline]
pub fn zeta_scalar(x_o: f64, y_o: f64, x_r: f64, y_r: f64, z: &WaveImpedance) -> f64 {
    let b = z.b();
    let d_o = y_o - b * x_o;
    let d_r = y_r + b * x_r;
    y_o * y_o / b - d_o * d_o / (2.0 * b) + b * x_r * x_r - d_r * d_r / (2.0 * b)
}

/// Integrand of the channel storage function, `(b/2)·x_o² + y_r²/(2b)`.
#[inline]
pub fn storage_density(x_o: f64, y_r: f64, z: &WaveImpedance) -> f64 {
    let b = z.b();
    0.5 * b * x_o * x_o + y_r * y_r / (2.0 * b)
}

/// Storage `E(t) = ∫_{t−τ}^{t} ((b/2)·x_o² + y_r²/(2b))` by left rectangles
/// on a history sampled every `dt`, oldest first. The window is the samples
/// with `t − τ ≤ t_k < t`.
pub fn energy_storage(
    history: &[PowerSample],
    t: f64,
    tau: f64,
    dt: f64,
    z: &WaveImpedance,
) -> Result<f64, PassivityError> {
    if dt.is_nan() || dt <= 0.0 {
        return Err(PassivityError::InvalidStep(dt));
    }
    let steps = libm::round(tau / dt) as usize;
    if steps == 0 {
        return Ok(0.0);
    }
    let start = t - steps as f64 * dt;
    let eps = 1e-6 * dt;
    let available_from = history.first().map_or(f64::INFINITY, |s| s.t);
    if available_from > start + eps {
        return Err(PassivityError::InsufficientHistory {
            needed_from: start,
            available_from,
        });
    }
    let sum: f64 = history
        .iter()
        .filter(|s| s.t >= start - eps && s.t < t - eps)
        .map(|s| 0.5 * z.b() * dot(&s.x_o, &s.x_o) + dot(&s.y_r, &s.y_r) / (2.0 * z.b()))
        .sum();
    Ok(dt * sum)
}

/// Residual between the power-variable and wave-variable power flows.
pub fn power_balance_check(ps: &PowerSample, ws: &WaveSample) -> Result<f64, PassivityError> {
    Ok(ps.power() - power_flow(ws)?)
}

/// Passivity tolerance for accumulated input energy `e_in`.
#[inline]
pub fn passivity_tolerance(e_in: f64) -> f64 {
    1e-6 * e_in.max(1.0)
}

/// Running energy account of one simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyLedger {
    pub t: f64,
    pub e_in: f64,
    pub e_out: f64,
    pub e_store: f64,
    pub zeta: f64,
    pub zeta_min: f64,
    pub passive_so_far: bool,
    /// Ticks at which `E_out > E_in + ε_tol`.
    pub violations: u64,
    /// Ticks at which `ζ < 0`.
    pub negative_zeta_ticks: u64,
}

impl Default for EnergyLedger {
    fn default() -> Self {
        Self {
            t: 0.0,
            e_in: 0.0,
            e_out: 0.0,
            e_store: 0.0,
            zeta: 0.0,
            zeta_min: f64::INFINITY,
            passive_so_far: true,
            violations: 0,
            negative_zeta_ticks: 0,
        }
    }
}

impl EnergyLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one left-rectangle step of wave energy. Returns whether the
    /// balance holds at this tick.
    pub fn accumulate_wave(&mut self, ws: &WaveSample, dt: f64) -> Result<bool, PassivityError> {
        if dt.is_nan() || dt <= 0.0 {
            return Err(PassivityError::InvalidStep(dt));
        }
        WaveSample::new(
            ws.t,
            ws.u_o.clone(),
            ws.v_o.clone(),
            ws.u_r.clone(),
            ws.v_r.clone(),
        )?;
        let p_in = 0.5 * (dot(&ws.u_o, &ws.u_o) + dot(&ws.u_r, &ws.u_r));
        let p_out = 0.5 * (dot(&ws.v_o, &ws.v_o) + dot(&ws.v_r, &ws.v_r));
        Ok(self.add_wave_power(ws.t, p_in, p_out, dt))
    }

    /// Scalar fast path of [`accumulate_wave`](Self::accumulate_wave).
    pub fn accumulate_wave_scalar(
        &mut self,
        t: f64,
        u_o: f64,
        v_o: f64,
        u_r: f64,
        v_r: f64,
        dt: f64,
    ) -> bool {
        let p_in = 0.5 * (u_o * u_o + u_r * u_r);
        let p_out = 0.5 * (v_o * v_o + v_r * v_r);
        self.add_wave_power(t, p_in, p_out, dt)
    }

    fn add_wave_power(&mut self, t: f64, p_in: f64, p_out: f64, dt: f64) -> bool {
        self.t = t;
        self.e_in += dt * p_in;
        self.e_out += dt * p_out;
        let ok = self.e_out <= self.e_in + passivity_tolerance(self.e_in);
        if !ok {
            self.violations += 1;
            self.passive_so_far = false;
        }
        ok
    }

    /// Records the power-channel diagnostics for this tick. Returns whether
    /// `ζ` is negative.
    pub fn record_power_channel(&mut self, t: f64, zeta: f64, e_store: f64) -> bool {
        self.t = t;
        self.zeta = zeta;
        self.e_store = e_store;
        self.zeta_min = self.zeta_min.min(zeta);
        let negative = zeta < 0.0;
        if negative {
            self.negative_zeta_ticks += 1;
        }
        negative
    }
}
