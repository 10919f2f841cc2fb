//! Step-response metrics and parameter sweeps.

use alloc::vec::Vec;

use crate::config::{Architecture, ConfigError, ExperimentConfig};
use crate::sim::{analytical_equilibrium, run_experiment, SimError, TraceLog};

/// Fraction of the run, counted from the end, used for the steady-state
/// window.
pub const FINAL_WINDOW_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub y_inf: f64,
    /// Seconds; `f64::INFINITY` if the response never stays in band.
    pub settling_time: f64,
    /// Percent of `|y_inf|`.
    pub overshoot: f64,
    /// Peak-to-peak of the response over the final window.
    pub oscillation_index: f64,
    /// Mean of the response over the final window minus `y_inf`.
    pub steady_state_error: f64,
}

impl Metrics {
    pub fn settled(&self) -> bool {
        self.settling_time.is_finite()
    }

    /// Oscillation verdict: peak-to-peak above `threshold·|y_inf|`.
    pub fn oscillates(&self, threshold: f64) -> bool {
        self.oscillation_index > threshold * self.y_inf.abs()
    }
}

/// Metrics of an arbitrary sampled response. `times` must be increasing
/// and the same length as `values`.
pub fn response_metrics(times: &[f64], values: &[f64], y_inf: f64, band: f64) -> Metrics {
    assert_eq!(
        times.len(),
        values.len(),
        "times and values differ in length"
    );
    if values.is_empty() {
        return Metrics {
            y_inf,
            settling_time: f64::INFINITY,
            overshoot: 0.0,
            oscillation_index: 0.0,
            steady_state_error: 0.0,
        };
    }
    let tol = if y_inf != 0.0 {
        band * y_inf.abs()
    } else {
        band * values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    };

    let settling_time = match values.iter().rposition(|v| (v - y_inf).abs() > tol) {
        None => times[0],
        Some(i) if i + 1 == values.len() => f64::INFINITY,
        Some(i) => times[i + 1],
    };

    let overshoot = if y_inf != 0.0 {
        let sign = y_inf.signum();
        let peak = values
            .iter()
            .map(|v| (v - y_inf) * sign)
            .fold(0.0f64, f64::max);
        100.0 * peak / y_inf.abs()
    } else {
        0.0
    };

    let t_first = times[0];
    let t_last = times[times.len() - 1];
    let window_start = t_last - FINAL_WINDOW_FRACTION * (t_last - t_first);
    let first = times.partition_point(|&t| t < window_start - 1e-12);
    let window = &values[first..];
    let (lo, hi) = window
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let mean = window.iter().sum::<f64>() / window.len() as f64;

    Metrics {
        y_inf,
        settling_time,
        overshoot,
        oscillation_index: hi - lo,
        steady_state_error: mean - y_inf,
    }
}

/// Metrics of the operator feedback `y_o` in a trace.
pub fn compute_metrics(log: &TraceLog, y_inf: f64, band: f64) -> Metrics {
    response_metrics(&log.times(), &log.operator_feedback(), y_inf, band)
}

/// Reference level for a run: the analytical equilibrium of `y_o` for step
/// inputs, otherwise the mean of `y_o` over the final window.
pub fn reference_level(cfg: &ExperimentConfig, log: &TraceLog) -> f64 {
    match analytical_equilibrium(cfg) {
        Some(eq) => eq.y_o,
        None => {
            let y = log.operator_feedback();
            let m = response_metrics(&log.times(), &y, 0.0, cfg.band);
            m.steady_state_error
        }
    }
}

/// Runs one experiment and scores it against its reference level.
pub fn evaluate(cfg: &ExperimentConfig) -> Result<(TraceLog, Metrics), SimError> {
    let log = run_experiment(cfg)?;
    let y_inf = reference_level(cfg, &log);
    let m = compute_metrics(&log, y_inf, cfg.band);
    Ok((log, m))
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    /// Constant symmetric one-way delays, seconds.
    Delay(Vec<f64>),
    Impedance(Vec<f64>),
    Arch(Vec<Architecture>),
}

impl SweepAxis {
    fn len(&self) -> usize {
        match self {
            SweepAxis::Delay(v) | SweepAxis::Impedance(v) => v.len(),
            SweepAxis::Arch(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub arch: Architecture,
    pub delay: f64,
    pub b: f64,
    pub metrics: Metrics,
    pub passive: bool,
}

/// Cross product of `axis` with `archs` (or the base architecture when
/// `archs` is empty), axis value major, one row per cell in order.
pub fn sweep(
    base: &ExperimentConfig,
    axis: &SweepAxis,
    archs: &[Architecture],
) -> Result<Vec<SweepRow>, SimError> {
    if axis.len() == 0 {
        return Err(ConfigError::new("values", "sweep needs at least one value").into());
    }
    let default_archs = [base.arch];
    let archs = if archs.is_empty() {
        &default_archs[..]
    } else {
        archs
    };

    let mut cells: Vec<ExperimentConfig> = Vec::new();
    match axis {
        SweepAxis::Delay(values) => {
            for &tau in values {
                for &arch in archs {
                    cells.push(base.clone().with_arch(arch).with_delay(tau)?);
                }
            }
        }
        SweepAxis::Impedance(values) => {
            for &b in values {
                for &arch in archs {
                    let mut cfg = base.clone().with_arch(arch);
                    cfg.b = b;
                    cells.push(cfg);
                }
            }
        }
        SweepAxis::Arch(values) => {
            for &arch in values {
                cells.push(base.clone().with_arch(arch));
            }
        }
    }

    cells
        .iter()
        .map(|cfg| {
            let (log, metrics) = evaluate(cfg)?;
            Ok(SweepRow {
                arch: cfg.arch,
                delay: cfg.forward_delay.tau(0.0),
                b: cfg.b,
                metrics,
                passive: log.ledger.passive_so_far,
            })
        })
        .collect()
}
