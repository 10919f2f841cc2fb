//! Delay compensators.
//!
//! [`MjPredictor`] sits at the remote end and fills stale intervals of the
//! incoming wave by extrapolating the minimum-jerk interpolant through the
//! last two received samples. [`SmithPredictor`] sits at the operator end
//! and corrects the received wave with a local plant model:
//! `v_o(t) = v̂_o(t) + ỹ(t) − ỹ(t − 2τ)`.

use alloc::collections::VecDeque;
use core::fmt;

use crate::channel::{Poll, TIME_EPS};
use crate::plant::{PlantError, VehicleModel};
use crate::wave::WaveImpedance;

#[derive(Debug, Clone, PartialEq)]
pub enum PredictorError {
    /// `t2 ≤ t1` in the interpolant.
    DegenerateInterval {
        t1: f64,
        t2: f64,
    },
    /// The delay estimate exceeds the history the Smith buffer keeps.
    BufferTooShort {
        tau_est: f64,
        tau_max: f64,
    },
    /// Smith predictor was stepped off its fixed grid.
    HistoryGap {
        expected: f64,
        found: f64,
    },
    InvalidParameter(&'static str, f64),
    Plant(PlantError),
}

impl fmt::Display for PredictorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredictorError::DegenerateInterval { t1, t2 } => {
                write!(f, "interpolant needs t2 > t1, got t1={t1}, t2={t2}")
            }
            PredictorError::BufferTooShort { tau_est, tau_max } => write!(
                f,
                "delay estimate {tau_est} s exceeds predictor horizon {tau_max} s"
            ),
            PredictorError::HistoryGap { expected, found } => {
                write!(f, "predictor expected step at t={expected}, got t={found}")
            }
            PredictorError::InvalidParameter(name, v) => {
                write!(f, "invalid predictor {name}: {v}")
            }
            PredictorError::Plant(e) => write!(f, "predictor model: {e}"),
        }
    }
}

impl core::error::Error for PredictorError {}

impl From<PlantError> for PredictorError {
    fn from(e: PlantError) -> Self {
        PredictorError::Plant(e)
    }
}

/// Quintic blend `6γ⁵ − 15γ⁴ + 10γ³`.
#[inline]
pub fn min_jerk_blend(gamma: f64) -> f64 {
    let g3 = gamma * gamma * gamma;
    g3 * (10.0 + gamma * (-15.0 + 6.0 * gamma))
}

/// Minimum-jerk interpolant through `(t1, x1)` and `(t2, x2)` evaluated at
/// `t`, with the normalized time clamped to `[0, gamma_max]`.
pub fn mj_interpolate(
    x1: f64,
    x2: f64,
    t1: f64,
    t2: f64,
    t: f64,
    gamma_max: f64,
) -> Result<f64, PredictorError> {
    if t1.is_nan() || t2.is_nan() || t2 <= t1 {
        return Err(PredictorError::DegenerateInterval { t1, t2 });
    }
    let gamma = ((t - t1) / (t2 - t1)).clamp(0.0, gamma_max);
    Ok(x1 + (x2 - x1) * min_jerk_blend(gamma))
}

pub const DEFAULT_GAMMA_MAX: f64 = 2.0;

/// Remote-end predictor over the incoming wave stream.
///
/// Samples are stamped with their local receipt time.
#[derive(Debug, Clone, PartialEq)]
pub struct MjPredictor {
    p1: Option<(f64, f64)>,
    p2: Option<(f64, f64)>,
    gamma_max: f64,
}

impl MjPredictor {
    pub fn new(gamma_max: f64) -> Result<Self, PredictorError> {
        if !(gamma_max.is_finite() && gamma_max >= 0.0) {
            return Err(PredictorError::InvalidParameter("gamma_max", gamma_max));
        }
        Ok(Self {
            p1: None,
            p2: None,
            gamma_max,
        })
    }

    pub fn gamma_max(&self) -> f64 {
        self.gamma_max
    }

    pub fn reset(&mut self) {
        self.p1 = None;
        self.p2 = None;
    }

    /// Records a received sample. A repeated timestamp replaces the newest
    /// sample instead of creating a zero-length interval.
    pub fn observe(&mut self, t: f64, value: f64) {
        match self.p2 {
            Some((t2, _)) if (t - t2).abs() <= TIME_EPS => self.p2 = Some((t2, value)),
            _ => {
                self.p1 = self.p2;
                self.p2 = Some((t, value));
            }
        }
    }

    /// Estimate at `t` from the stored samples.
    pub fn predict(&self, t: f64) -> f64 {
        match (self.p1, self.p2) {
            (Some((t1, x1)), Some((t2, x2))) => {
                mj_interpolate(x1, x2, t1, t2, t, self.gamma_max).unwrap_or(x2)
            }
            (None, Some((_, x2))) => x2,
            _ => 0.0,
        }
    }

    /// Passes a fresh delivery through verbatim; extrapolates on a stale one.
    pub fn step(&mut self, poll: &Poll<f64>, t: f64) -> f64 {
        match poll {
            Poll::Fresh(d) => {
                self.observe(t, d.payload);
                d.payload
            }
            Poll::Stale(_) => self.predict(t),
        }
    }
}

/// Local model the Smith predictor runs in the wave domain: maps the
/// outgoing operator wave to the wave the remote would send back.
pub trait WaveModel {
    /// Advances one step under `u_o` and returns the model's return wave
    /// for this tick.
    fn advance(&mut self, u_o: f64, dt: f64) -> Result<f64, PredictorError>;

    fn reset(&mut self);
}

/// Vehicle model wired through the matched remote termination, evaluated
/// in the same order as the real remote end: the return wave is taken from
/// the velocity before the plant step.
#[derive(Debug, Clone)]
pub struct VehicleWaveModel {
    vehicle: VehicleModel,
    impedance: WaveImpedance,
}

impl VehicleWaveModel {
    pub fn new(vehicle: VehicleModel, impedance: WaveImpedance) -> Self {
        Self { vehicle, impedance }
    }

    pub fn velocity(&self) -> f64 {
        self.vehicle.velocity()
    }
}

impl WaveModel for VehicleWaveModel {
    fn advance(&mut self, u_o: f64, dt: f64) -> Result<f64, PredictorError> {
        let (u_r, x_r) = self
            .impedance
            .remote_termination(self.vehicle.velocity(), u_o);
        self.vehicle.step(x_r, dt)?;
        Ok(u_r)
    }

    fn reset(&mut self) {
        self.vehicle.reset();
    }
}

/// Model that always predicts zero, which turns the predictor into a
/// pass-through.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullModel;

impl WaveModel for NullModel {
    fn advance(&mut self, _u_o: f64, _dt: f64) -> Result<f64, PredictorError> {
        Ok(0.0)
    }

    fn reset(&mut self) {}
}

pub const DEFAULT_TAU_MAX: f64 = 2.0;

/// Operator-end Smith predictor.
#[derive(Debug, Clone)]
pub struct SmithPredictor<M> {
    model: M,
    dt: f64,
    tau_max: f64,
    capacity: usize,
    history: VecDeque<f64>,
    last_t: Option<f64>,
    held: f64,
}

impl<M: WaveModel> SmithPredictor<M> {
    pub fn new(model: M, dt: f64, tau_max: f64) -> Result<Self, PredictorError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(PredictorError::InvalidParameter("dt", dt));
        }
        if !(tau_max.is_finite() && tau_max >= 0.0) {
            return Err(PredictorError::InvalidParameter("tau_max", tau_max));
        }
        let capacity = libm::ceil(2.0 * tau_max / dt) as usize + 1;
        Ok(Self {
            model,
            dt,
            tau_max,
            capacity,
            history: VecDeque::with_capacity(capacity),
            last_t: None,
            held: 0.0,
        })
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    /// Clears history, the held wave and the model state.
    pub fn reset(&mut self) {
        self.model.reset();
        self.history.clear();
        self.last_t = None;
        self.held = 0.0;
    }

    /// Model output `2τ` ago on the step grid; zero before the model started
    /// since the remote is at rest then.
    fn lookback(&self, tau_est: f64) -> f64 {
        let lag = libm::round(2.0 * tau_est / self.dt) as usize;
        let n = self.history.len();
        if lag < n {
            self.history[n - 1 - lag]
        } else {
            0.0
        }
    }

    /// Advances one step and returns the corrected operator incoming wave.
    pub fn step(
        &mut self,
        u_o: f64,
        received: &Poll<f64>,
        tau_est: f64,
        t: f64,
    ) -> Result<f64, PredictorError> {
        if tau_est > self.tau_max + TIME_EPS {
            return Err(PredictorError::BufferTooShort {
                tau_est,
                tau_max: self.tau_max,
            });
        }
        if let Some(prev) = self.last_t {
            let expected = prev + self.dt;
            if (t - expected).abs() > 1e-6 * self.dt.max(1.0) {
                return Err(PredictorError::HistoryGap { expected, found: t });
            }
        }
        self.last_t = Some(t);

        let predicted = self.model.advance(u_o, self.dt)?;
        if self.history.len() == self.capacity {
            self.history.pop_front();
        }
        self.history.push_back(predicted);
        let past = self.lookback(tau_est.max(0.0));

        if let Some(v) = received.fresh() {
            self.held = *v;
        }
        Ok(self.held + predicted - past)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ChannelEnd, DelayProfile, Delivered};
    use crate::plant::PlantParams;

    fn fresh(v: f64, t: f64) -> Poll<f64> {
        Poll::Fresh(Delivered {
            payload: v,
            t_send: t,
            t_received: t,
        })
    }

    #[test]
    fn interpolant_endpoints_and_midpoint() {
        assert_eq!(mj_interpolate(2.0, 5.0, 1.0, 3.0, 1.0, 2.0).unwrap(), 2.0);
        assert_eq!(mj_interpolate(2.0, 5.0, 1.0, 3.0, 3.0, 2.0).unwrap(), 5.0);
        assert_eq!(mj_interpolate(0.0, 1.0, 0.0, 1.0, 0.5, 2.0).unwrap(), 0.5);
        assert!(matches!(
            mj_interpolate(0.0, 1.0, 1.0, 1.0, 0.5, 2.0),
            Err(PredictorError::DegenerateInterval { .. })
        ));
    }

    #[test]
    fn interpolant_extrapolation() {
        // 6·1.5⁵ − 15·1.5⁴ + 10·1.5³ = 45.5625 − 75.9375 + 33.75
        let oracle = 6.0 * 7.59375 - 15.0 * 5.0625 + 10.0 * 3.375;
        assert_eq!(oracle, 3.375);
        let x = mj_interpolate(0.0, 1.0, 0.0, 1.0, 1.5, 2.0).unwrap();
        assert!((x - oracle).abs() < 1e-12);
        // Clamped beyond gamma_max.
        let clamped = mj_interpolate(0.0, 1.0, 0.0, 1.0, 10.0, 1.5).unwrap();
        assert!((clamped - oracle).abs() < 1e-12);
        // And at zero below t1.
        assert_eq!(mj_interpolate(0.3, 1.0, 0.0, 1.0, -4.0, 2.0).unwrap(), 0.3);
    }

    #[test]
    fn mj_step_behaviour() {
        let mut mj = MjPredictor::new(2.0).unwrap();
        assert_eq!(mj.step(&Poll::Stale(None), 0.0), 0.0);
        assert_eq!(mj.step(&fresh(0.0, 0.0), 0.0), 0.0);
        assert_eq!(mj.step(&fresh(0.2, 0.1), 0.1), 0.2);
        let stale = Poll::Stale(Some(Delivered {
            payload: 0.2,
            t_send: 0.1,
            t_received: 0.1,
        }));
        let x = mj.step(&stale, 0.15);
        assert!((x - 0.675).abs() < 1e-12, "{x}");
    }

    #[test]
    fn mj_single_sample_holds_and_duplicates_collapse() {
        let mut mj = MjPredictor::new(2.0).unwrap();
        mj.step(&fresh(0.4, 1.0), 1.0);
        assert_eq!(mj.predict(3.0), 0.4);
        mj.observe(1.0, 0.5);
        assert_eq!(mj.predict(3.0), 0.5);
        mj.observe(2.0, 1.0);
        assert!((mj.predict(2.5) - (0.5 + 0.5 * 3.375)).abs() < 1e-12);
    }

    #[test]
    fn smith_zero_delay_is_pass_through() {
        let z = WaveImpedance::new(7.5).unwrap();
        let model = VehicleWaveModel::new(VehicleModel::new(PlantParams::default()).unwrap(), z);
        let mut smith = SmithPredictor::new(model, 0.001, 2.0).unwrap();
        for k in 0..500 {
            let t = k as f64 * 0.001;
            let v_hat = 0.01 * k as f64;
            let v = smith.step(1.0, &fresh(v_hat, t), 0.0, t).unwrap();
            assert!((v - v_hat).abs() <= 1e-12);
        }
    }

    #[test]
    fn smith_null_model_is_pass_through() {
        let mut smith = SmithPredictor::new(NullModel, 0.001, 2.0).unwrap();
        for k in 0..500 {
            let t = k as f64 * 0.001;
            let v = smith.step(1.0, &fresh(-0.3, t), 0.7, t).unwrap();
            assert_eq!(v, -0.3);
        }
    }

    #[test]
    fn smith_holds_on_stale() {
        let mut smith = SmithPredictor::new(NullModel, 0.001, 2.0).unwrap();
        smith.step(0.0, &fresh(0.9, 0.0), 0.0, 0.0).unwrap();
        assert_eq!(
            smith.step(0.0, &Poll::Stale(None), 0.0, 0.001).unwrap(),
            0.9
        );
    }

    #[test]
    fn smith_errors() {
        let mut smith = SmithPredictor::new(NullModel, 0.001, 1.0).unwrap();
        assert!(matches!(
            smith.step(0.0, &Poll::Stale(None), 1.5, 0.0),
            Err(PredictorError::BufferTooShort { .. })
        ));
        smith.step(0.0, &Poll::Stale(None), 0.5, 0.0).unwrap();
        assert!(matches!(
            smith.step(0.0, &Poll::Stale(None), 0.5, 0.005),
            Err(PredictorError::HistoryGap { .. })
        ));
    }

    // The predictor's correction telescopes: with a perfect model behind a
    // constant symmetric delay, the corrected wave equals the undelayed
    // model output.
    #[test]
    fn smith_cancels_round_trip_delay() {
        let dt = 0.001;
        let tau = 0.25;
        let z = WaveImpedance::new(7.5).unwrap();
        let plant = VehicleModel::new(PlantParams::default()).unwrap();
        let mut remote = VehicleWaveModel::new(plant.clone(), z);
        let mut oracle = VehicleWaveModel::new(plant.clone(), z);
        let mut smith = SmithPredictor::new(VehicleWaveModel::new(plant, z), dt, 1.0).unwrap();
        let mut fwd = ChannelEnd::new(DelayProfile::constant(tau).unwrap());
        let mut ret = ChannelEnd::new(DelayProfile::constant(tau).unwrap());
        let mut worst: f64 = 0.0;
        for k in 0..3000 {
            let t = k as f64 * dt;
            let u_o = if t < 1.0 { 1.0 } else { -0.5 };
            fwd.send(u_o, t).unwrap();
            let v_r = fwd.poll(t).latest().copied().unwrap_or(0.0);
            let u_r = remote.advance(v_r, dt).unwrap();
            ret.send(u_r, t).unwrap();
            let p = ret.poll(t);
            let tau_est = ret.current_delay_estimate(t);
            let v_o = smith.step(u_o, &p, tau_est, t).unwrap();
            let want = oracle.advance(u_o, dt).unwrap();
            worst = worst.max((v_o - want).abs());
        }
        assert!(worst < 1e-9, "{worst}");
    }
}
