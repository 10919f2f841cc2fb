//! Remote vehicle dynamics and operator input signals.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use crate::channel::TIME_EPS;

#[derive(Debug, Clone, PartialEq)]
pub enum PlantError {
    InvalidParameter(&'static str, f64),
    NonFiniteCommand(f64),
    InvalidStep(f64),
}

impl fmt::Display for PlantError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlantError::InvalidParameter(name, v) => write!(f, "invalid plant {name}: {v}"),
            PlantError::NonFiniteCommand(v) => write!(f, "non-finite command {v}"),
            PlantError::InvalidStep(dt) => write!(f, "time step must be > 0, got {dt}"),
        }
    }
}

impl core::error::Error for PlantError {}

/// Parameters of the first-order vehicle model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantParams {
    /// Command-to-acceleration gain, m/s² per unit command.
    pub gain: f64,
    /// Drag time constant in seconds; `f64::INFINITY` gives a pure integrator.
    pub drag_time_constant: f64,
    /// Velocity saturation, m/s.
    pub v_max: f64,
    /// Standard deviation of additive measurement noise on the velocity
    /// reading. Zero disables it.
    pub noise_std: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            gain: 5.0,
            drag_time_constant: 30.0,
            v_max: 7.5,
            noise_std: 0.0,
        }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<(), PlantError> {
        if !(self.gain.is_finite() && self.gain > 0.0) {
            return Err(PlantError::InvalidParameter("gain", self.gain));
        }
        if self.drag_time_constant.is_nan() || self.drag_time_constant <= 0.0 {
            return Err(PlantError::InvalidParameter(
                "drag_time_constant",
                self.drag_time_constant,
            ));
        }
        if !(self.v_max.is_finite() && self.v_max > 0.0) {
            return Err(PlantError::InvalidParameter("v_max", self.v_max));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(PlantError::InvalidParameter("noise_std", self.noise_std));
        }
        Ok(())
    }

    /// `K_a·T_d`, the open-loop steady-state velocity per unit command.
    pub fn dc_gain(&self) -> f64 {
        self.gain * self.drag_time_constant
    }
}

/// Throttle-to-velocity model: `ẏ = K_a·x − y/T_d`, explicit Euler,
/// clamped to `±v_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleModel {
    params: PlantParams,
    velocity: f64,
}

impl VehicleModel {
    pub fn new(params: PlantParams) -> Result<Self, PlantError> {
        params.validate()?;
        Ok(Self {
            params,
            velocity: 0.0,
        })
    }

    pub fn params(&self) -> &PlantParams {
        &self.params
    }

    pub fn velocity(&self) -> f64 {
        self.velocity
    }

    pub fn reset(&mut self) {
        self.velocity = 0.0;
    }

    /// Advances one step under command `x_r` and returns the new velocity.
    pub fn step(&mut self, x_r: f64, dt: f64) -> Result<f64, PlantError> {
        if !x_r.is_finite() {
            return Err(PlantError::NonFiniteCommand(x_r));
        }
        if dt.is_nan() || dt <= 0.0 {
            return Err(PlantError::InvalidStep(dt));
        }
        let p = &self.params;
        let y = self.velocity + dt * (p.gain * x_r - self.velocity / p.drag_time_constant);
        self.velocity = y.clamp(-p.v_max, p.v_max);
        Ok(self.velocity)
    }
}

/// Remote velocity at equilibrium of the matched wave loop under a constant
/// operator command: the fixed point of `x_r = x_o/2 − y_r/(2b)` with
/// `K_a·x_r = y_r/T_d`, i.e. `b·x_o·K_aT_d/(2b + K_aT_d)`, saturated.
pub fn wave_equilibrium_velocity(params: &PlantParams, b: f64, x_o: f64) -> f64 {
    let y = if params.drag_time_constant.is_infinite() {
        b * x_o
    } else {
        let k = params.dc_gain();
        b * x_o * k / (2.0 * b + k)
    };
    y.clamp(-params.v_max, params.v_max)
}

/// Remote velocity at equilibrium when the command is applied directly.
pub fn direct_equilibrium_velocity(params: &PlantParams, x_r: f64) -> f64 {
    if x_r == 0.0 {
        return 0.0;
    }
    let y = if params.drag_time_constant.is_infinite() {
        f64::INFINITY.copysign(x_r)
    } else {
        params.dc_gain() * x_r
    };
    y.clamp(-params.v_max, params.v_max)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SignalError {
    OutOfRange(f64),
    EmptyTrace,
    UnsortedTrace(f64),
    InvalidParameter(&'static str, f64),
}

impl fmt::Display for SignalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignalError::OutOfRange(v) => write!(f, "signal value {v} outside [-1, 1]"),
            SignalError::EmptyTrace => f.write_str("trace signal has no samples"),
            SignalError::UnsortedTrace(t) => {
                write!(f, "trace sample times not strictly increasing at t={t}")
            }
            SignalError::InvalidParameter(name, v) => write!(f, "invalid signal {name}: {v}"),
        }
    }
}

impl core::error::Error for SignalError {}

#[derive(Debug, Clone, PartialEq)]
enum SignalKind {
    Step {
        amplitude: f64,
        start: f64,
    },
    Sine {
        amplitude: f64,
        frequency: f64,
        start: f64,
    },
    Trace(Vec<(f64, f64)>),
}

/// Normalized operator command generator; every value lies in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSignal {
    kind: SignalKind,
}

fn check_amplitude(a: f64) -> Result<(), SignalError> {
    if a.is_finite() && a.abs() <= 1.0 {
        Ok(())
    } else {
        Err(SignalError::OutOfRange(a))
    }
}

impl InputSignal {
    pub fn step(amplitude: f64, start: f64) -> Result<Self, SignalError> {
        check_amplitude(amplitude)?;
        if !start.is_finite() {
            return Err(SignalError::InvalidParameter("start", start));
        }
        Ok(Self {
            kind: SignalKind::Step { amplitude, start },
        })
    }

    pub fn sine(amplitude: f64, frequency: f64, start: f64) -> Result<Self, SignalError> {
        check_amplitude(amplitude)?;
        if !(frequency.is_finite() && frequency >= 0.0) {
            return Err(SignalError::InvalidParameter("frequency", frequency));
        }
        if !start.is_finite() {
            return Err(SignalError::InvalidParameter("start", start));
        }
        Ok(Self {
            kind: SignalKind::Sine {
                amplitude,
                frequency,
                start,
            },
        })
    }

    /// Zero-order hold over `(t, value)` samples; zero before the first one.
    pub fn trace(samples: Vec<(f64, f64)>) -> Result<Self, SignalError> {
        if samples.is_empty() {
            return Err(SignalError::EmptyTrace);
        }
        for w in samples.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(SignalError::UnsortedTrace(w[1].0));
            }
        }
        for &(t, v) in &samples {
            if !t.is_finite() {
                return Err(SignalError::InvalidParameter("t", t));
            }
            check_amplitude(v)?;
        }
        Ok(Self {
            kind: SignalKind::Trace(samples),
        })
    }

    pub fn value_at(&self, t: f64) -> f64 {
        match &self.kind {
            SignalKind::Step { amplitude, start } => {
                if t + TIME_EPS >= *start {
                    *amplitude
                } else {
                    0.0
                }
            }
            SignalKind::Sine {
                amplitude,
                frequency,
                start,
            } => {
                if t + TIME_EPS >= *start {
                    amplitude * libm::sin(2.0 * PI * frequency * (t - start))
                } else {
                    0.0
                }
            }
            SignalKind::Trace(samples) => {
                let idx = samples.partition_point(|&(ts, _)| ts <= t + TIME_EPS);
                if idx == 0 {
                    0.0
                } else {
                    samples[idx - 1].1
                }
            }
        }
    }

    /// Held level of a step input, `None` for other kinds.
    pub fn step_level(&self) -> Option<f64> {
        match self.kind {
            SignalKind::Step { amplitude, .. } => Some(amplitude),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn integrator() -> PlantParams {
        PlantParams {
            drag_time_constant: f64::INFINITY,
            ..PlantParams::default()
        }
    }

    #[test]
    fn rest_is_equilibrium() {
        let mut m = VehicleModel::new(PlantParams::default()).unwrap();
        for _ in 0..1000 {
            assert_eq!(m.step(0.0, 0.001).unwrap(), 0.0);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut m = VehicleModel::new(PlantParams::default()).unwrap();
        assert!(matches!(
            m.step(f64::NAN, 0.001),
            Err(PlantError::NonFiniteCommand(_))
        ));
        assert!(matches!(m.step(0.1, 0.0), Err(PlantError::InvalidStep(_))));
        let bad = PlantParams {
            gain: 0.0,
            ..PlantParams::default()
        };
        assert!(VehicleModel::new(bad).is_err());
        assert!(VehicleModel::new(integrator()).is_ok());
    }

    #[test]
    fn saturates_at_v_max() {
        let mut m = VehicleModel::new(PlantParams::default()).unwrap();
        for _ in 0..20_000 {
            m.step(1.0, 0.001).unwrap();
        }
        assert_eq!(m.velocity(), 7.5);
    }

    // Closed loop through both matched terminations at zero delay, used as a
    // check of the analytical fixed point.
    fn wave_loop_final(params: PlantParams, b: f64, x_o: f64, steps: usize) -> f64 {
        let z = crate::wave::WaveImpedance::new(b).unwrap();
        let mut m = VehicleModel::new(params).unwrap();
        for _ in 0..steps {
            let (u_o, _) = z.operator_termination(x_o, 0.0);
            let (_, x_r) = z.remote_termination(m.velocity(), u_o);
            m.step(x_r, 0.001).unwrap();
        }
        m.velocity()
    }

    #[test]
    fn integrating_plant_settles_at_b_times_command() {
        let y = wave_loop_final(integrator(), 7.5, 0.5, 60_000);
        assert!((y - 3.75).abs() < 1e-6, "{y}");
        assert_eq!(wave_equilibrium_velocity(&integrator(), 7.5, 0.5), 3.75);
    }

    #[test]
    fn drag_plant_settles_at_fixed_point() {
        let expected = 3.75 * 150.0 / 165.0;
        assert!(
            (wave_equilibrium_velocity(&PlantParams::default(), 7.5, 0.5) - expected).abs() < 1e-12
        );
        assert!((expected - 3.409).abs() < 1e-3);
        let y = wave_loop_final(PlantParams::default(), 7.5, 0.5, 80_000);
        assert!((y - expected).abs() < 1e-6, "{y}");
    }

    #[test]
    fn direct_equilibrium_saturates() {
        let p = PlantParams::default();
        assert_eq!(direct_equilibrium_velocity(&p, 0.5), 7.5);
        assert_eq!(direct_equilibrium_velocity(&p, 0.01), 1.5);
        assert_eq!(direct_equilibrium_velocity(&integrator(), -0.2), -7.5);
        assert_eq!(direct_equilibrium_velocity(&p, 0.0), 0.0);
    }

    #[test]
    fn step_signal() {
        let s = InputSignal::step(0.5, 0.0).unwrap();
        assert_eq!(s.value_at(5.0), 0.5);
        assert_eq!(s.value_at(-1.0), 0.0);
        assert_eq!(s.value_at(0.0), 0.5);
        assert!(InputSignal::step(1.5, 0.0).is_err());
    }

    #[test]
    fn sine_signal_zero_crossing() {
        // amplitude·sin(2πft): half a period at 0.5 Hz is t = 1 s.
        let s = InputSignal::sine(1.0, 0.5, 0.0).unwrap();
        assert!(s.value_at(1.0).abs() < 1e-12);
        assert!((s.value_at(0.5) - 1.0).abs() < 1e-12);
        assert_eq!(s.value_at(0.0), 0.0);
    }

    #[test]
    fn trace_signal_holds() {
        assert_eq!(InputSignal::trace(vec![]), Err(SignalError::EmptyTrace));
        assert!(InputSignal::trace(vec![(0.0, 2.0)]).is_err());
        let s = InputSignal::trace(vec![(0.0, 0.1), (1.0, -0.3)]).unwrap();
        assert_eq!(s.value_at(-0.5), 0.0);
        assert_eq!(s.value_at(0.5), 0.1);
        assert_eq!(s.value_at(1.0), -0.3);
        assert_eq!(s.value_at(9.0), -0.3);
    }
}
