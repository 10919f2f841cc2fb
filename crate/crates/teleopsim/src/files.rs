//! CSV formats read and written by the CLI.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::Deserialize;
use teleop_core::{DelayProfile, InputSignal, SweepRow, TraceLog};

use crate::error::{Error, Result};

/// Header of the per-tick trace file.
pub const TRACE_HEADER: [&str; 13] = [
    "t", "x_o", "y_o", "x_r", "y_r", "u_o", "v_o", "u_r", "v_r", "tau_est", "E_in", "E_out", "zeta",
];

/// Header of metrics and sweep tables.
pub const METRICS_HEADER: [&str; 9] = [
    "arch",
    "delay",
    "b",
    "y_inf",
    "settling_time",
    "overshoot",
    "oscillation_index",
    "steady_state_error",
    "passive",
];

#[derive(Debug, Deserialize)]
struct DelayBreakpoint {
    t: f64,
    tau: f64,
}

#[derive(Debug, Deserialize)]
struct InputSample {
    t: f64,
    x_o: f64,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::read(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn read_rows<T: for<'de> Deserialize<'de>>(reader: impl Read, path: &Path) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    rdr.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })
}

/// Piecewise-constant delay profile from a `t,tau` CSV.
pub fn read_delay_profile(path: &Path) -> Result<DelayProfile> {
    parse_delay_profile(open(path)?, path)
}

pub fn parse_delay_profile(reader: impl Read, path: &Path) -> Result<DelayProfile> {
    let rows: Vec<DelayBreakpoint> = read_rows(reader, path)?;
    DelayProfile::piecewise(rows.into_iter().map(|r| (r.t, r.tau)).collect())
        .map_err(|e| Error::config("delay_profile", format!("{}: {e}", path.display())))
}

/// Zero-order-hold operator input from a `t,x_o` CSV.
pub fn read_input_trace(path: &Path) -> Result<InputSignal> {
    parse_input_trace(open(path)?, path)
}

pub fn parse_input_trace(reader: impl Read, path: &Path) -> Result<InputSignal> {
    let rows: Vec<InputSample> = read_rows(reader, path)?;
    InputSignal::trace(rows.into_iter().map(|r| (r.t, r.x_o)).collect())
        .map_err(|e| Error::config("input", format!("{}: {e}", path.display())))
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Writes one row per tick under [`TRACE_HEADER`].
pub fn write_trace(writer: impl Write, log: &TraceLog) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    w.write_record(TRACE_HEADER)?;
    for r in &log.rows {
        w.write_record([
            fmt(r.t),
            fmt(r.x_o),
            fmt(r.y_o),
            fmt(r.x_r),
            fmt(r.y_r),
            fmt(r.u_o),
            fmt(r.v_o),
            fmt(r.u_r),
            fmt(r.v_r),
            fmt(r.tau_est),
            fmt(r.e_in),
            fmt(r.e_out),
            fmt(r.zeta),
        ])?;
    }
    w.flush()
}

pub fn write_trace_file(path: &Path, log: &TraceLog) -> Result<()> {
    write_trace(create(path)?, log).map_err(|e| Error::io(path, e))
}

/// Writes one row per cell under [`METRICS_HEADER`].
pub fn write_metrics(writer: impl Write, rows: &[SweepRow]) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    w.write_record(METRICS_HEADER)?;
    for r in rows {
        let m = &r.metrics;
        w.write_record([
            r.arch.as_str().to_string(),
            fmt(r.delay),
            fmt(r.b),
            fmt(m.y_inf),
            fmt(m.settling_time),
            fmt(m.overshoot),
            fmt(m.oscillation_index),
            fmt(m.steady_state_error),
            r.passive.to_string(),
        ])?;
    }
    w.flush()
}

pub fn write_metrics_file(path: &Path, rows: &[SweepRow]) -> Result<()> {
    write_metrics(create(path)?, rows).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use teleop_core::{run_experiment, ExperimentConfig};

    #[test]
    fn delay_profile_from_csv() {
        let csv = "t,tau\n0,0.1\n2.5, 0.4\n";
        let p = parse_delay_profile(csv.as_bytes(), Path::new("p.csv")).unwrap();
        assert_eq!(p.tau(1.0), 0.1);
        assert_eq!(p.tau(3.0), 0.4);
    }

    #[test]
    fn delay_profile_rejects_bad_rows() {
        let unsorted = "t,tau\n1,0.1\n0,0.2\n";
        let err = parse_delay_profile(unsorted.as_bytes(), Path::new("p.csv")).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
        let wrong_header = "time,delay\n0,0.1\n";
        let err = parse_delay_profile(wrong_header.as_bytes(), Path::new("p.csv")).unwrap_err();
        assert!(matches!(err, Error::Csv { .. }), "{err}");
        let empty = "t,tau\n";
        assert!(parse_delay_profile(empty.as_bytes(), Path::new("p.csv")).is_err());
    }

    #[test]
    fn input_trace_from_csv() {
        let csv = "t,x_o\n0,0\n1,0.5\n";
        let s = parse_input_trace(csv.as_bytes(), Path::new("in.csv")).unwrap();
        assert_eq!(s.value_at(0.5), 0.0);
        assert_eq!(s.value_at(1.0), 0.5);
        let out_of_range = "t,x_o\n0,1.5\n";
        assert!(parse_input_trace(out_of_range.as_bytes(), Path::new("in.csv")).is_err());
    }

    #[test]
    fn trace_layout() {
        let cfg = ExperimentConfig {
            duration: 0.01,
            ..ExperimentConfig::default()
        };
        let log = run_experiment(&cfg).unwrap();
        let mut buf = Vec::new();
        write_trace(&mut buf, &log).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,x_o,y_o,x_r,y_r,u_o,v_o,u_r,v_r,tau_est,E_in,E_out,zeta"
        );
        assert_eq!(lines.count(), 11);
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn trace_values_round_trip() {
        let cfg = ExperimentConfig {
            duration: 0.05,
            ..ExperimentConfig::default()
        }
        .with_delay(0.01)
        .unwrap();
        let log = run_experiment(&cfg).unwrap();
        let mut buf = Vec::new();
        write_trace(&mut buf, &log).unwrap();
        let mut rdr = csv::Reader::from_reader(buf.as_slice());
        for (rec, row) in rdr.records().zip(&log.rows) {
            let rec = rec.unwrap();
            let y_o: f64 = rec[2].parse().unwrap();
            let e_in: f64 = rec[10].parse().unwrap();
            assert_eq!(y_o.to_bits(), row.y_o.to_bits());
            assert_eq!(e_in.to_bits(), row.e_in.to_bits());
        }
    }
}
