use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn teleopsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_teleopsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_trace_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let metrics = dir.path().join("metrics.csv");
    let out = teleopsim(&[
        "run",
        "--arch",
        "wave+pred",
        "--delay",
        "1.0",
        "--input",
        "step:0.5",
        "--duration",
        "2",
        "--dt",
        "0.001",
        "--b",
        "7.5",
        "--out",
        path_str(&trace),
        "--metrics",
        path_str(&metrics),
        "--band",
        "0.02",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let text = fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,x_o,y_o,x_r,y_r,u_o,v_o,u_r,v_r,tau_est,E_in,E_out,zeta"
    );
    assert_eq!(lines.count(), 2001);
    assert!(text.ends_with('\n'));

    let m = fs::read_to_string(&metrics).unwrap();
    let rows: Vec<&str> = m.lines().collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("arch,delay,b,y_inf,settling_time"));
    assert!(rows[1].starts_with("wave+pred,1,7.5,"));
}

#[test]
fn identical_runs_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = teleopsim(&[
            "run",
            "--arch",
            "wave+mj",
            "--delay",
            "0.5",
            "--input",
            "sine:0.5:0.3",
            "--duration",
            "3",
            "--out",
            path_str(p),
        ]);
        assert!(out.status.success());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn sweep_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("table.csv");
    let out = teleopsim(&[
        "sweep",
        "--axis",
        "delay",
        "--values",
        "0,0.5,1.0",
        "--arch",
        "raw,wave,wave+pred",
        "--duration",
        "2",
        "--out",
        path_str(&table),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(&table).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 9);
    let cells: Vec<(&str, &str)> = rows
        .iter()
        .map(|r| {
            let mut f = r.split(',');
            (f.next().unwrap(), f.next().unwrap())
        })
        .collect();
    assert_eq!(cells[0], ("raw", "0"));
    assert_eq!(cells[2], ("wave+pred", "0"));
    assert_eq!(cells[8], ("wave+pred", "1"));

    let out = teleopsim(&[
        "sweep",
        "--axis",
        "b",
        "--values",
        "7.5,8",
        "--arch",
        "wave+pred",
        "--delay",
        "0.5",
        "--duration",
        "2",
        "--out",
        path_str(&table),
    ]);
    assert!(out.status.success());
    assert_eq!(fs::read_to_string(&table).unwrap().lines().count(), 3);
}

#[test]
fn config_file_and_delay_profile() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("profile.csv"), "t,tau\n0,0.2\n1,0.6\n").unwrap();
    let conf = dir.path().join("case.conf");
    fs::write(
        &conf,
        "# varying delay\n\
         sim.arch = wave\n\
         sim.duration = 2\n\
         sim.input = step:0.5\n\
         channel.profile = profile.csv\n",
    )
    .unwrap();
    let trace = dir.path().join("trace.csv");
    let out = teleopsim(&[
        "run",
        "--config",
        path_str(&conf),
        "--out",
        path_str(&trace),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let mut rdr = csv::Reader::from_path(&trace).unwrap();
    let taus: Vec<f64> = rdr
        .records()
        .map(|r| r.unwrap()[9].parse().unwrap())
        .collect();
    assert_eq!(taus.len(), 2001);
    assert!((taus[1900] - 0.6).abs() < 1e-9, "{}", taus[1900]);

    let out = teleopsim(&[
        "run",
        "--config",
        path_str(&conf),
        "--delay-profile",
        path_str(&dir.path().join("profile.csv")),
        "--arch",
        "raw",
        "--out",
        path_str(&trace),
    ]);
    assert!(out.status.success());
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    let trace = path_str(&trace);

    for args in [
        vec!["run", "--arch", "wave+foo", "--out", trace],
        vec!["run", "--dt", "0", "--out", trace],
        vec!["run", "--input", "step:2", "--out", trace],
        vec!["run", "--arch", "raw,wave", "--out", trace],
        vec!["run", "--arch", "wave+pred", "--delay", "3", "--out", trace],
        vec![
            "run",
            "--delay-profile",
            "/nonexistent/p.csv",
            "--out",
            trace,
        ],
        vec!["run"],
        vec![
            "sweep", "--axis", "delay", "--values", "a,b", "--out", trace,
        ],
        vec!["sweep", "--axis", "speed", "--values", "1", "--out", trace],
    ] {
        let out = teleopsim(&args);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }

    let conf = dir.path().join("bad.conf");
    fs::write(&conf, "sim.speed = 3\n").unwrap();
    let out = teleopsim(&["run", "--config", path_str(&conf), "--out", trace]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("bad.conf:1") && err.contains("sim.speed"),
        "{err}"
    );
}

#[test]
fn serve_answers_health() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_teleopsim"))
        .args(["serve", "--bind", "127.0.0.1:0"])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap())
        .read_line(&mut line)
        .unwrap();
    let addr = line
        .trim()
        .trim_start_matches("listening on http://")
        .to_string();

    let mut stream = TcpStream::connect(&addr).unwrap();
    write!(
        stream,
        "GET /health HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n"
    )
    .unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(response.starts_with("HTTP/1.1 200"), "{response}");
    assert!(response.ends_with("ok\n"), "{response}");
}
