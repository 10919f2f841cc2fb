//! Flat `section.key = value` configuration files and input specs.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use teleop_core::{DelayProfile, ExperimentConfig, InputSignal};

use crate::error::{Error, Result};
use crate::files;

pub const DEFAULT_TELEMETRY_HZ: f64 = 30.0;
pub const DEFAULT_MAILBOX: usize = 64;

/// Keys accepted in a configuration file.
pub const KEYS: &[&str] = &[
    "sim.arch",
    "sim.b",
    "sim.duration",
    "sim.dt",
    "sim.seed",
    "sim.input",
    "channel.delay",
    "channel.return_delay",
    "channel.profile",
    "channel.return_profile",
    "plant.K_a",
    "plant.T_d",
    "plant.v_max",
    "plant.noise",
    "smith.tau_max",
    "mj.gamma_max",
    "metrics.band",
    "metrics.oscillation_threshold",
    "passivity.zeta_mode",
    "service.telemetry_hz",
    "service.mailbox",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceSettings {
    /// Telemetry frames per second sent to each client.
    pub telemetry_hz: f64,
    /// Capacity of the command mailbox between clients and the loop.
    pub mailbox: usize,
}

impl Default for ServiceSettings {
    fn default() -> Self {
        Self {
            telemetry_hz: DEFAULT_TELEMETRY_HZ,
            mailbox: DEFAULT_MAILBOX,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Settings {
    pub experiment: ExperimentConfig,
    pub service: ServiceSettings,
}

pub fn load(path: &Path) -> Result<Settings> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::read(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse(&text, path, base)
}

fn value<T: FromStr>(raw: &str, path: &Path, line: usize, key: &str) -> Result<T> {
    raw.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("invalid value '{raw}' for {key}"),
    })
}

fn resolve(base: &Path, file: &str) -> PathBuf {
    let p = Path::new(file);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Parses configuration text. Relative file names resolve against `base`.
pub fn parse(text: &str, path: &Path, base: &Path) -> Result<Settings> {
    let mut s = Settings::default();
    let mut seen = HashSet::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let (key, raw) = content
            .split_once('=')
            .ok_or_else(|| parse_err(format!("expected 'section.key = value', got '{content}'")))?;
        let key = key.trim();
        let raw = raw.trim().trim_matches('"');
        if !KEYS.contains(&key) {
            return Err(parse_err(format!("unknown key '{key}'")));
        }
        if !seen.insert(key.to_string()) {
            return Err(parse_err(format!("duplicate key '{key}'")));
        }
        let e = &mut s.experiment;
        match key {
            "sim.arch" => e.arch = raw.parse()?,
            "sim.b" => e.b = value(raw, path, line, key)?,
            "sim.duration" => e.duration = value(raw, path, line, key)?,
            "sim.dt" => e.dt = value(raw, path, line, key)?,
            "sim.seed" => e.seed = value(raw, path, line, key)?,
            "sim.input" => e.input = parse_input_spec(raw, base)?,
            "channel.delay" => e.forward_delay = constant_delay(value(raw, path, line, key)?)?,
            "channel.return_delay" => {
                e.return_delay = Some(constant_delay(value(raw, path, line, key)?)?)
            }
            "channel.profile" => e.forward_delay = files::read_delay_profile(&resolve(base, raw))?,
            "channel.return_profile" => {
                e.return_delay = Some(files::read_delay_profile(&resolve(base, raw))?)
            }
            "plant.K_a" => e.plant.gain = value(raw, path, line, key)?,
            "plant.T_d" => e.plant.drag_time_constant = value(raw, path, line, key)?,
            "plant.v_max" => e.plant.v_max = value(raw, path, line, key)?,
            "plant.noise" => e.plant.noise_std = value(raw, path, line, key)?,
            "smith.tau_max" => e.smith_tau_max = value(raw, path, line, key)?,
            "mj.gamma_max" => e.mj_gamma_max = value(raw, path, line, key)?,
            "metrics.band" => e.band = value(raw, path, line, key)?,
            "metrics.oscillation_threshold" => {
                e.oscillation_threshold = value(raw, path, line, key)?
            }
            "passivity.zeta_mode" => e.zeta_mode = raw.parse()?,
            "service.telemetry_hz" => s.service.telemetry_hz = value(raw, path, line, key)?,
            "service.mailbox" => s.service.mailbox = value(raw, path, line, key)?,
            _ => unreachable!("key list and match arms disagree on {key}"),
        }
    }
    if seen.contains("channel.delay") && seen.contains("channel.profile") {
        return Err(Error::config(
            "channel.profile",
            "give either channel.delay or channel.profile",
        ));
    }
    if !(s.service.telemetry_hz.is_finite() && s.service.telemetry_hz > 0.0) {
        return Err(Error::config(
            "service.telemetry_hz",
            "must be finite and > 0",
        ));
    }
    if s.service.mailbox == 0 {
        return Err(Error::config("service.mailbox", "must be > 0"));
    }
    Ok(s)
}

pub fn constant_delay(tau: f64) -> Result<DelayProfile> {
    DelayProfile::constant(tau).map_err(|e| Error::config("delay", e.to_string()))
}

fn number(field: &str, raw: &str) -> Result<f64> {
    raw.trim()
        .parse()
        .map_err(|_| Error::config("input", format!("invalid {field} '{raw}'")))
}

/// Parses `step:A[@start]`, `sine:A:F[@start]` or `trace:FILE`.
pub fn parse_input_spec(spec: &str, base: &Path) -> Result<InputSignal> {
    let (kind, rest) = spec
        .split_once(':')
        .ok_or_else(|| Error::config("input", format!("expected kind:params, got '{spec}'")))?;
    let (params, start) = match rest.rsplit_once('@') {
        Some((p, s)) if kind != "trace" => (p, number("start", s)?),
        _ => (rest, 0.0),
    };
    let signal = match kind.trim() {
        "step" => InputSignal::step(number("amplitude", params)?, start),
        "sine" => {
            let (a, f) = params
                .split_once(':')
                .ok_or_else(|| Error::config("input", "sine needs sine:AMPLITUDE:FREQUENCY"))?;
            InputSignal::sine(number("amplitude", a)?, number("frequency", f)?, start)
        }
        "trace" => return files::read_input_trace(&resolve(base, params.trim())),
        other => {
            return Err(Error::config(
                "input",
                format!("unknown input kind '{other}'"),
            ))
        }
    };
    signal.map_err(|e| Error::config("input", e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use teleop_core::{Architecture, ZetaMode};

    fn parse_str(text: &str) -> Result<Settings> {
        parse(text, Path::new("test.conf"), Path::new("."))
    }

    #[test]
    fn full_file() {
        let s = parse_str(
            "# case 3\n\
             sim.arch = wave+pred\n\
             sim.b = 8   # impedance\n\
             sim.duration = 5\n\
             sim.input = step:0.5@0.2\n\
             channel.delay = 1.0\n\
             channel.return_delay = 0.5\n\
             plant.T_d = inf\n\
             passivity.zeta_mode = delay-substituted\n\
             service.telemetry_hz = 20\n",
        )
        .unwrap();
        let e = &s.experiment;
        assert_eq!(e.arch, Architecture::WavePred);
        assert_eq!(e.b, 8.0);
        assert_eq!(e.duration, 5.0);
        assert_eq!(e.input.value_at(0.1), 0.0);
        assert_eq!(e.input.value_at(0.2), 0.5);
        assert_eq!(e.forward_delay.tau(0.0), 1.0);
        assert_eq!(e.return_profile().tau(0.0), 0.5);
        assert!(e.plant.drag_time_constant.is_infinite());
        assert_eq!(e.zeta_mode, ZetaMode::DelaySubstituted);
        assert_eq!(s.service.telemetry_hz, 20.0);
        assert!(e.validate().is_ok());
    }

    #[test]
    fn empty_file_is_defaults() {
        let s = parse_str("\n# nothing\n").unwrap();
        assert_eq!(s.service, ServiceSettings::default());
        assert_eq!(s.experiment.b, 7.5);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_str("sim.b = 1\nsim.speed = 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_str("sim.b = one\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
        let err = parse_str("sim.b = 1\nsim.b = 2\n").unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
        let err = parse_str("just text\n").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        let err = parse_str("sim.arch = wave+foo\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert_eq!(err.exit_code(), crate::error::EXIT_CONFIG);
    }

    #[test]
    fn input_specs() {
        let base = Path::new(".");
        let s = parse_input_spec("step:0.5", base).unwrap();
        assert_eq!(s.step_level(), Some(0.5));
        let s = parse_input_spec("sine:1.0:0.5", base).unwrap();
        assert!((s.value_at(0.5) - 1.0).abs() < 1e-12);
        let s = parse_input_spec("sine:0.2:1@2", base).unwrap();
        assert_eq!(s.value_at(1.0), 0.0);
        assert!(parse_input_spec("step:1.5", base).is_err());
        assert!(parse_input_spec("ramp:1", base).is_err());
        assert!(parse_input_spec("sine:0.5", base).is_err());
        assert!(parse_input_spec("0.5", base).is_err());
        assert!(parse_input_spec("trace:/nonexistent/in.csv", base).is_err());
    }
}
