//! Power-variable / wave-variable transforms.
//!
//! The operator end maps a flow `x_o` and effort `y_o` onto an input wave
//! `u_o` and output wave `v_o`; the remote end uses the mirrored matrix so
//! that power entering at the operator is positive and power leaving at the
//! remote is positive:
//!
//! ```text
//! [u_o]   [ β  α] [x_o]        [u_r]   [-β  α] [x_r]
//! [v_o] = [-β  α] [y_o]        [v_r] = [ β  α] [y_r]
//! ```
//!
//! with `α = 1/√(2b)` and `β = √(b/2)`. Every function here is pure.

use alloc::vec::Vec;
use core::fmt;

/// Strictly positive wave impedance `b` with its derived scale factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveImpedance {
    b: f64,
    alpha: f64,
    beta: f64,
}

impl WaveImpedance {
    pub fn new(b: f64) -> Result<Self, WaveError> {
        if !b.is_finite() || b <= 0.0 {
            return Err(WaveError::InvalidImpedance(b));
        }
        Ok(Self {
            b,
            alpha: 1.0 / libm::sqrt(2.0 * b),
            beta: libm::sqrt(b / 2.0),
        })
    }

    #[inline]
    pub fn b(&self) -> f64 {
        self.b
    }

    /// `1/√(2b)`
    #[inline]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `√(b/2)`
    #[inline]
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Scalar form of [`encode_operator`]: `(u_o, v_o)`.
    #[inline]
    pub fn encode_operator(&self, x_o: f64, y_o: f64) -> (f64, f64) {
        (
            self.beta * x_o + self.alpha * y_o,
            -self.beta * x_o + self.alpha * y_o,
        )
    }

    /// Scalar form of [`encode_remote`]: `(u_r, v_r)`.
    #[inline]
    pub fn encode_remote(&self, x_r: f64, y_r: f64) -> (f64, f64) {
        (
            -self.beta * x_r + self.alpha * y_r,
            self.beta * x_r + self.alpha * y_r,
        )
    }

    /// Scalar form of [`decode_operator`]: `(x_o, y_o)`.
    #[inline]
    pub fn decode_operator(&self, u_o: f64, v_o: f64) -> (f64, f64) {
        (
            self.alpha * u_o - self.alpha * v_o,
            self.beta * u_o + self.beta * v_o,
        )
    }

    /// Scalar form of [`decode_remote`]: `(x_r, y_r)`.
    #[inline]
    pub fn decode_remote(&self, u_r: f64, v_r: f64) -> (f64, f64) {
        (
            -self.alpha * u_r + self.alpha * v_r,
            self.beta * u_r + self.beta * v_r,
        )
    }

    /// Matched operator termination.
    ///
    /// Given the operator flow and the wave arriving from the channel,
    /// returns `(u_o, y_o)` with `u_o = √(b/2)·x_o` and
    /// `y_o = (b/2)·x_o + √(b/2)·v_o`.
    #[inline]
    pub fn operator_termination(&self, x_o: f64, v_o: f64) -> (f64, f64) {
        (self.beta * x_o, 0.5 * self.b * x_o + self.beta * v_o)
    }

    /// Matched remote termination.
    ///
    /// Given the measured remote effort and the wave arriving from the
    /// channel, returns `(u_r, x_r)` with `u_r = y_r/√(2b)` and
    /// `x_r = −y_r/(2b) + v_r/√(2b)`.
    #[inline]
    pub fn remote_termination(&self, y_r: f64, v_r: f64) -> (f64, f64) {
        (self.alpha * y_r, -y_r / (2.0 * self.b) + self.alpha * v_r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WaveError {
    InvalidImpedance(f64),
    DimensionMismatch { expected: usize, found: usize },
    EmptyVector,
    NonFinite,
}

impl fmt::Display for WaveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WaveError::InvalidImpedance(b) => {
                write!(f, "wave impedance must be finite and > 0, got {b}")
            }
            WaveError::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            WaveError::EmptyVector => f.write_str("vectors must have dimension >= 1"),
            WaveError::NonFinite => f.write_str("non-finite value"),
        }
    }
}

impl core::error::Error for WaveError {}

/// Flow/effort pairs at both ends of the two-port at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSample {
    pub t: f64,
    pub x_o: Vec<f64>,
    pub y_o: Vec<f64>,
    pub x_r: Vec<f64>,
    pub y_r: Vec<f64>,
}

impl PowerSample {
    pub fn new(
        t: f64,
        x_o: Vec<f64>,
        y_o: Vec<f64>,
        x_r: Vec<f64>,
        y_r: Vec<f64>,
    ) -> Result<Self, WaveError> {
        let n = x_o.len();
        check_all(n, [&x_o[..], &y_o[..], &x_r[..], &y_r[..]])?;
        Ok(Self {
            t,
            x_o,
            y_o,
            x_r,
            y_r,
        })
    }

    pub fn scalar(t: f64, x_o: f64, y_o: f64, x_r: f64, y_r: f64) -> Self {
        Self {
            t,
            x_o: alloc::vec![x_o],
            y_o: alloc::vec![y_o],
            x_r: alloc::vec![x_r],
            y_r: alloc::vec![y_r],
        }
    }

    pub fn dim(&self) -> usize {
        self.x_o.len()
    }

    /// `x_oᵀy_o − x_rᵀy_r`, the power entering at the operator minus the
    /// power leaving at the remote.
    pub fn power(&self) -> f64 {
        dot(&self.x_o, &self.y_o) - dot(&self.x_r, &self.y_r)
    }
}

/// Input/output waves at both ends of the two-port at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveSample {
    pub t: f64,
    pub u_o: Vec<f64>,
    pub v_o: Vec<f64>,
    pub u_r: Vec<f64>,
    pub v_r: Vec<f64>,
}

impl WaveSample {
    pub fn new(
        t: f64,
        u_o: Vec<f64>,
        v_o: Vec<f64>,
        u_r: Vec<f64>,
        v_r: Vec<f64>,
    ) -> Result<Self, WaveError> {
        let n = u_o.len();
        check_all(n, [&u_o[..], &v_o[..], &u_r[..], &v_r[..]])?;
        Ok(Self {
            t,
            u_o,
            v_o,
            u_r,
            v_r,
        })
    }

    pub fn scalar(t: f64, u_o: f64, v_o: f64, u_r: f64, v_r: f64) -> Self {
        Self {
            t,
            u_o: alloc::vec![u_o],
            v_o: alloc::vec![v_o],
            u_r: alloc::vec![u_r],
            v_r: alloc::vec![v_r],
        }
    }

    /// Encodes a power sample with the two-port transforms.
    pub fn from_power(ps: &PowerSample, z: &WaveImpedance) -> Result<Self, WaveError> {
        let (u_o, v_o) = encode_operator(&ps.x_o, &ps.y_o, z)?;
        let (u_r, v_r) = encode_remote(&ps.x_r, &ps.y_r, z)?;
        Ok(Self {
            t: ps.t,
            u_o,
            v_o,
            u_r,
            v_r,
        })
    }

    pub fn dim(&self) -> usize {
        self.u_o.len()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<(), WaveError> {
    if a.is_empty() {
        return Err(WaveError::EmptyVector);
    }
    if a.len() != b.len() {
        return Err(WaveError::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(WaveError::NonFinite);
    }
    Ok(())
}

fn check_all<const N: usize>(n: usize, parts: [&[f64]; N]) -> Result<(), WaveError> {
    if n == 0 {
        return Err(WaveError::EmptyVector);
    }
    for p in parts {
        if p.len() != n {
            return Err(WaveError::DimensionMismatch {
                expected: n,
                found: p.len(),
            });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(WaveError::NonFinite);
        }
    }
    Ok(())
}

fn map_pair(
    a: &[f64],
    b: &[f64],
    f: impl Fn(f64, f64) -> (f64, f64),
) -> Result<(Vec<f64>, Vec<f64>), WaveError> {
    check_pair(a, b)?;
    Ok(a.iter().zip(b).map(|(&p, &q)| f(p, q)).unzip())
}

/// Operator-end power → wave: `(u_o, v_o)`.
pub fn encode_operator(
    x_o: &[f64],
    y_o: &[f64],
    z: &WaveImpedance,
) -> Result<(Vec<f64>, Vec<f64>), WaveError> {
    map_pair(x_o, y_o, |x, y| z.encode_operator(x, y))
}

/// Remote-end power → wave: `(u_r, v_r)`.
pub fn encode_remote(
    x_r: &[f64],
    y_r: &[f64],
    z: &WaveImpedance,
) -> Result<(Vec<f64>, Vec<f64>), WaveError> {
    map_pair(x_r, y_r, |x, y| z.encode_remote(x, y))
}

/// Operator-end wave → power: `(x_o, y_o)`.
pub fn decode_operator(
    u_o: &[f64],
    v_o: &[f64],
    z: &WaveImpedance,
) -> Result<(Vec<f64>, Vec<f64>), WaveError> {
    map_pair(u_o, v_o, |u, v| z.decode_operator(u, v))
}

/// Remote-end wave → power: `(x_r, y_r)`.
pub fn decode_remote(
    u_r: &[f64],
    v_r: &[f64],
    z: &WaveImpedance,
) -> Result<(Vec<f64>, Vec<f64>), WaveError> {
    map_pair(u_r, v_r, |u, v| z.decode_remote(u, v))
}

/// Matched operator termination over vectors: `(u_o, y_o)`.
pub fn operator_termination(
    x_o: &[f64],
    v_o: &[f64],
    z: &WaveImpedance,
) -> Result<(Vec<f64>, Vec<f64>), WaveError> {
    map_pair(x_o, v_o, |x, v| z.operator_termination(x, v))
}

/// Matched remote termination over vectors: `(u_r, x_r)`.
pub fn remote_termination(
    y_r: &[f64],
    v_r: &[f64],
    z: &WaveImpedance,
) -> Result<(Vec<f64>, Vec<f64>), WaveError> {
    map_pair(y_r, v_r, |y, v| z.remote_termination(y, v))
}

/// Total power flow into the two-port expressed in waves:
/// `½(u_oᵀu_o − v_oᵀv_o + u_rᵀu_r − v_rᵀv_r)`.
pub fn power_flow(ws: &WaveSample) -> Result<f64, WaveError> {
    check_all(
        ws.dim(),
        [&ws.u_o[..], &ws.v_o[..], &ws.u_r[..], &ws.v_r[..]],
    )?;
    Ok(0.5
        * (dot(&ws.u_o, &ws.u_o) - dot(&ws.v_o, &ws.v_o) + dot(&ws.u_r, &ws.u_r)
            - dot(&ws.v_r, &ws.v_r)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_abs_diff_eq;

    fn z(b: f64) -> WaveImpedance {
        WaveImpedance::new(b).unwrap()
    }

    #[test]
    fn impedance_rejects_nonpositive() {
        assert!(WaveImpedance::new(0.0).is_err());
        assert!(WaveImpedance::new(-1.0).is_err());
        assert!(WaveImpedance::new(f64::NAN).is_err());
        let w = z(7.5);
        assert_abs_diff_eq!(w.alpha() * w.beta(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(w.alpha(), 1.0 / (2.0 * w.beta()), epsilon = 1e-12);
    }

    #[test]
    fn encode_operator_examples() {
        let w = z(2.0);
        assert_eq!(w.encode_operator(1.0, 0.0), (1.0, -1.0));
        assert_eq!(w.encode_operator(0.0, 0.0), (0.0, 0.0));
        let (u, v) = w.encode_operator(1.0, 3.0);
        assert_abs_diff_eq!(u, 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn encode_remote_examples() {
        assert_eq!(z(2.0).encode_remote(1.0, 0.0), (-1.0, 1.0));
        assert_eq!(z(2.0).encode_remote(0.0, 2.0), (1.0, 1.0));
        let (u, v) = z(8.0).encode_remote(0.5, 4.0);
        assert_abs_diff_eq!(u, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn decode_examples() {
        let w = z(2.0);
        assert_eq!(w.decode_operator(1.0, -1.0), (1.0, 0.0));
        assert_eq!(w.decode_operator(0.0, 0.0), (0.0, 0.0));
        let (x, y) = w.decode_operator(2.5, 0.5);
        assert_abs_diff_eq!(x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(y, 3.0, epsilon = 1e-12);

        assert_eq!(w.decode_remote(-1.0, 1.0), (1.0, 0.0));
        assert_eq!(w.decode_remote(0.0, 0.0), (0.0, 0.0));
        let (x, y) = z(8.0).decode_remote(0.0, 2.0);
        assert_abs_diff_eq!(x, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(y, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn operator_termination_examples() {
        let w = z(8.0);
        assert_eq!(w.operator_termination(0.5, 0.0), (1.0, 2.0));
        assert_eq!(w.operator_termination(0.0, 0.0), (0.0, 0.0));
        assert_eq!(w.operator_termination(0.5, 1.0), (1.0, 4.0));
    }

    #[test]
    fn remote_termination_examples() {
        let w = z(8.0);
        assert_eq!(w.remote_termination(4.0, 1.0), (1.0, 0.0));
        assert_eq!(w.remote_termination(0.0, 0.0), (0.0, 0.0));

        let w = z(7.5);
        let v_r = libm::sqrt(7.5 / 2.0) * 0.5;
        assert_abs_diff_eq!(v_r, 0.9682458365518543, epsilon = 1e-12);
        let (u_r, x_r) = w.remote_termination(3.75, v_r);
        assert_abs_diff_eq!(u_r, v_r, epsilon = 1e-12);
        assert_abs_diff_eq!(x_r, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn power_flow_examples() {
        let zero = WaveSample::scalar(0.0, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(power_flow(&zero).unwrap(), 0.0);

        let (u, v) = z(2.0).encode_operator(1.0, 3.0);
        let ws = WaveSample::scalar(0.0, u, v, 0.0, 0.0);
        assert_abs_diff_eq!(power_flow(&ws).unwrap(), 3.0, epsilon = 1e-12);

        let sym = WaveSample::scalar(0.0, 0.7, 0.7, -1.3, -1.3);
        assert_eq!(power_flow(&sym).unwrap(), 0.0);
    }

    #[test]
    fn vector_forms_validate() {
        let w = z(2.0);
        assert_eq!(
            encode_operator(&[1.0, 2.0], &[0.0], &w),
            Err(WaveError::DimensionMismatch {
                expected: 2,
                found: 1
            })
        );
        assert_eq!(
            decode_remote(&[f64::NAN], &[0.0], &w),
            Err(WaveError::NonFinite)
        );
        assert_eq!(encode_remote(&[], &[], &w), Err(WaveError::EmptyVector));
        assert!(WaveSample::new(0.0, vec![1.0], vec![1.0, 2.0], vec![0.0], vec![0.0]).is_err());

        let (u, v) = encode_operator(&[1.0, 0.0], &[3.0, 0.0], &w).unwrap();
        assert_abs_diff_eq!(u[0], 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(v[0], 0.5, epsilon = 1e-12);
        assert_eq!((u[1], v[1]), (0.0, 0.0));
    }
}
