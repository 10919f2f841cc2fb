//! Soft-real-time service: runs the loop at wall-clock rate, streams
//! telemetry over a web socket and takes live operator commands.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use serde::{Deserialize, Serialize};
use teleop_core::{
    Architecture, ExperimentConfig, InputSignal, Reconfigure, SimError, Simulation, TraceRow,
};
use tokio::net::TcpListener;
use tokio::sync::{mpsc, watch};
use tokio::task::JoinHandle;
use tokio::time::{interval, Instant, MissedTickBehavior};

use crate::error::{Error, Result};
use crate::settings::Settings;

/// Longest backlog the loop works off after a stall; anything older is
/// dropped and the wall-clock anchor is reset.
pub const MAX_CATCH_UP: Duration = Duration::from_millis(250);

const WAKE_PERIOD: Duration = Duration::from_millis(1);

mod arch_name {
    use serde::{Deserialize, Deserializer, Serializer};
    use teleop_core::Architecture;

    pub fn serialize<S: Serializer>(a: &Architecture, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(a.as_str())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Architecture, D::Error> {
        let name = String::deserialize(d)?;
        name.parse().map_err(serde::de::Error::custom)
    }
}

/// Latest state of the loop as streamed to clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryFrame {
    pub t: f64,
    pub x_o: f64,
    pub y_o: f64,
    pub x_r: f64,
    pub y_r: f64,
    pub tau_est: f64,
    #[serde(rename = "E_in")]
    pub e_in: f64,
    #[serde(rename = "E_out")]
    pub e_out: f64,
    pub zeta: f64,
    #[serde(with = "arch_name")]
    pub arch: Architecture,
    /// Forward delay currently applied to new messages, seconds.
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ServerMessage {
    State(TelemetryFrame),
    Error { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ClientMessage {
    Input {
        throttle: f64,
    },
    Config {
        #[serde(default)]
        delay: Option<f64>,
        #[serde(default)]
        arch: Option<String>,
        #[serde(default)]
        b: Option<f64>,
    },
}

/// A validated command, applied at the next tick boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Command {
    Input(f64),
    Config(Reconfigure),
}

/// Bounds applied to client commands before they reach the loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limits {
    pub max_delay: f64,
}

impl Limits {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        Self {
            max_delay: cfg.smith_tau_max,
        }
    }
}

/// Parses and range-checks one client message.
pub fn parse_command(text: &str, limits: &Limits) -> Result<Command, String> {
    let msg: ClientMessage = serde_json::from_str(text).map_err(|e| e.to_string())?;
    match msg {
        ClientMessage::Input { throttle } => {
            if !(throttle.is_finite() && (-1.0..=1.0).contains(&throttle)) {
                return Err(format!("throttle {throttle} outside [-1, 1]"));
            }
            Ok(Command::Input(throttle))
        }
        ClientMessage::Config { delay, arch, b } => {
            if delay.is_none() && arch.is_none() && b.is_none() {
                return Err("config message changes nothing".into());
            }
            if let Some(tau) = delay {
                if !(tau.is_finite() && tau >= 0.0 && tau <= limits.max_delay) {
                    return Err(format!("delay {tau} outside [0, {}]", limits.max_delay));
                }
            }
            if let Some(b) = b {
                if !(b.is_finite() && b > 0.0) {
                    return Err(format!("b must be finite and > 0, got {b}"));
                }
            }
            let arch = arch
                .map(|a| a.parse::<Architecture>())
                .transpose()
                .map_err(|e| e.to_string())?;
            Ok(Command::Config(Reconfigure { delay, arch, b }))
        }
    }
}

/// A command together with the tick it was applied before.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoggedCommand {
    pub tick: u64,
    pub command: Command,
}

/// The deterministic part of the service: a simulation driven by commands
/// at tick boundaries, with a log of every command it accepted.
pub struct LoopCore {
    sim: Simulation,
    throttle: f64,
    last: Option<TraceRow>,
    log: Vec<LoggedCommand>,
}

impl LoopCore {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self, SimError> {
        Ok(Self {
            sim: Simulation::new(cfg)?,
            throttle: 0.0,
            last: None,
            log: Vec::new(),
        })
    }

    pub fn dt(&self) -> f64 {
        self.sim.dt()
    }

    pub fn ticks_done(&self) -> u64 {
        self.sim.ticks_done()
    }

    pub fn throttle(&self) -> f64 {
        self.throttle
    }

    pub fn command_log(&self) -> &[LoggedCommand] {
        &self.log
    }

    /// Applies a command before the next tick. Rejected commands leave the
    /// state and the log untouched.
    pub fn apply(&mut self, command: Command) -> Result<(), SimError> {
        match command {
            Command::Input(x) => self.throttle = x,
            Command::Config(change) => self.sim.reconfigure(change)?,
        }
        self.log.push(LoggedCommand {
            tick: self.sim.ticks_done(),
            command,
        });
        Ok(())
    }

    pub fn tick(&mut self) -> Result<TraceRow, SimError> {
        let row = self.sim.step(self.throttle)?;
        self.last = Some(row);
        Ok(row)
    }

    pub fn frame(&self) -> TelemetryFrame {
        let (arch, delay) = (self.sim.arch(), self.sim.delay_setting());
        match &self.last {
            Some(r) => TelemetryFrame {
                t: r.t,
                x_o: r.x_o,
                y_o: r.y_o,
                x_r: r.x_r,
                y_r: r.y_r,
                tau_est: r.tau_est,
                e_in: r.e_in,
                e_out: r.e_out,
                zeta: r.zeta,
                arch,
                delay,
            },
            None => TelemetryFrame {
                t: 0.0,
                x_o: 0.0,
                y_o: 0.0,
                x_r: 0.0,
                y_r: 0.0,
                tau_est: delay,
                e_in: 0.0,
                e_out: 0.0,
                zeta: 0.0,
                arch,
                delay,
            },
        }
    }
}

/// Re-runs a command log offline for `ticks` ticks.
pub fn replay(
    cfg: &ExperimentConfig,
    log: &[LoggedCommand],
    ticks: u64,
) -> Result<Vec<TraceRow>, SimError> {
    let mut core = LoopCore::new(cfg)?;
    let mut rows = Vec::with_capacity(ticks as usize);
    let mut pending = log.iter().peekable();
    for k in 0..ticks {
        while let Some(c) = pending.next_if(|c| c.tick == k) {
            core.apply(c.command)?;
        }
        rows.push(core.tick()?);
    }
    Ok(rows)
}

/// Input signal equivalent to a log that only holds throttle commands.
pub fn input_signal(log: &[LoggedCommand], dt: f64) -> Option<InputSignal> {
    let mut samples: Vec<(f64, f64)> = Vec::new();
    for c in log {
        let Command::Input(x) = c.command else {
            return None;
        };
        let t = c.tick as f64 * dt;
        match samples.last_mut() {
            Some(last) if last.0 == t => last.1 = x,
            _ => samples.push((t, x)),
        }
    }
    if samples.is_empty() {
        samples.push((0.0, 0.0));
    }
    InputSignal::trace(samples).ok()
}

async fn run_loop(
    mut core: LoopCore,
    mut commands: mpsc::Receiver<Command>,
    frames: watch::Sender<TelemetryFrame>,
    mut stop: watch::Receiver<bool>,
) -> LoopCore {
    let dt = core.dt();
    let max_backlog = (MAX_CATCH_UP.as_secs_f64() / dt).ceil() as u64;
    let mut anchor = (Instant::now(), core.ticks_done());
    let mut wake = interval(WAKE_PERIOD);
    wake.set_missed_tick_behavior(MissedTickBehavior::Skip);
    loop {
        tokio::select! {
            _ = wake.tick() => {}
            _ = stop.changed() => break,
        }
        let elapsed = anchor.0.elapsed().as_secs_f64();
        let due = anchor.1 + (elapsed / dt) as u64 + 1;
        let mut backlog = due.saturating_sub(core.ticks_done());
        if backlog > max_backlog {
            log::warn!("loop fell {backlog} ticks behind; dropping the backlog");
            anchor = (Instant::now(), core.ticks_done());
            backlog = 1;
        }
        for _ in 0..backlog {
            while let Ok(cmd) = commands.try_recv() {
                if let Err(e) = core.apply(cmd) {
                    log::warn!("command {cmd:?} rejected: {e}");
                }
            }
            if let Err(e) = core.tick() {
                log::error!("simulation stopped: {e}");
                frames.send_replace(core.frame());
                return core;
            }
        }
        frames.send_replace(core.frame());
    }
    core
}

#[derive(Clone)]
struct AppState {
    commands: mpsc::Sender<Command>,
    frames: watch::Receiver<TelemetryFrame>,
    stop: watch::Receiver<bool>,
    limits: Limits,
    period: Duration,
    clients: Arc<AtomicUsize>,
}

async fn health() -> &'static str {
    "ok\n"
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| client(socket, state))
}

fn encode(msg: &ServerMessage) -> Message {
    let text = serde_json::to_string(msg).expect("telemetry always serializes");
    Message::Text(text.into())
}

fn error_frame(message: impl Into<String>) -> Message {
    encode(&ServerMessage::Error {
        message: message.into(),
    })
}

async fn client(mut socket: WebSocket, mut state: AppState) {
    state.clients.fetch_add(1, Ordering::SeqCst);
    let mut ticker = interval(state.period);
    ticker.set_missed_tick_behavior(MissedTickBehavior::Skip);
    loop {
        let reply = tokio::select! {
            msg = socket.recv() => match msg {
                Some(Ok(Message::Text(text))) => match parse_command(text.as_str(), &state.limits) {
                    Ok(cmd) => match state.commands.try_send(cmd) {
                        Ok(()) => None,
                        Err(_) => Some(error_frame("command mailbox full")),
                    },
                    Err(e) => Some(error_frame(e)),
                },
                Some(Ok(Message::Binary(_))) => Some(error_frame("expected a text frame")),
                Some(Ok(_)) => None,
                Some(Err(_)) | None => break,
            },
            _ = ticker.tick() => {
                let frame = state.frames.borrow().clone();
                Some(encode(&ServerMessage::State(frame)))
            }
            _ = state.stop.changed() => break,
        };
        if let Some(out) = reply {
            if socket.send(out).await.is_err() {
                break;
            }
        }
    }
    if state.clients.fetch_sub(1, Ordering::SeqCst) == 1 {
        // Nobody is driving any more: release the throttle.
        let _ = state.commands.try_send(Command::Input(0.0));
    }
}

/// A running service.
pub struct Service {
    addr: SocketAddr,
    frames: watch::Receiver<TelemetryFrame>,
    commands: mpsc::Sender<Command>,
    stop: watch::Sender<bool>,
    sim: JoinHandle<LoopCore>,
    server: JoinHandle<std::io::Result<()>>,
}

impl Service {
    pub async fn bind(addr: &str, settings: &Settings) -> Result<Self> {
        let listener = TcpListener::bind(addr)
            .await
            .map_err(|e| Error::Service(format!("cannot bind {addr}: {e}")))?;
        Self::start(listener, settings)
    }

    /// Starts the loop and the HTTP server on an already bound listener.
    pub fn start(listener: TcpListener, settings: &Settings) -> Result<Self> {
        let cfg = &settings.experiment;
        let core = LoopCore::new(cfg)?;
        let addr = listener
            .local_addr()
            .map_err(|e| Error::Service(e.to_string()))?;
        let (cmd_tx, cmd_rx) = mpsc::channel(settings.service.mailbox);
        let (frame_tx, frame_rx) = watch::channel(core.frame());
        let (stop_tx, stop_rx) = watch::channel(false);

        let sim = tokio::spawn(run_loop(core, cmd_rx, frame_tx, stop_rx.clone()));

        let state = AppState {
            commands: cmd_tx.clone(),
            frames: frame_rx.clone(),
            stop: stop_rx.clone(),
            limits: Limits::from_config(cfg),
            period: Duration::from_secs_f64(1.0 / settings.service.telemetry_hz),
            clients: Arc::new(AtomicUsize::new(0)),
        };
        let app = Router::new()
            .route("/health", get(health))
            .route("/ws", get(ws_upgrade))
            .with_state(state);
        let mut server_stop = stop_rx;
        let server = tokio::spawn(async move {
            axum::serve(listener, app)
                .with_graceful_shutdown(async move {
                    let _ = server_stop.changed().await;
                })
                .await
        });

        Ok(Self {
            addr,
            frames: frame_rx,
            commands: cmd_tx,
            stop: stop_tx,
            sim,
            server,
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Latest telemetry; never waits on the loop.
    pub fn snapshot(&self) -> TelemetryFrame {
        self.frames.borrow().clone()
    }

    /// Queues a command as if it came from a client.
    pub fn submit(&self, command: Command) -> Result<()> {
        self.commands
            .try_send(command)
            .map_err(|e| Error::Service(format!("command not queued: {e}")))
    }

    /// Stops the loop and the server and hands back the loop state.
    pub async fn shutdown(self) -> Result<LoopCore> {
        let _ = self.stop.send(true);
        let core = self
            .sim
            .await
            .map_err(|e| Error::Service(format!("loop task failed: {e}")))?;
        match self.server.await {
            Ok(Ok(())) => Ok(core),
            Ok(Err(e)) => Err(Error::Service(e.to_string())),
            Err(e) => Err(Error::Service(format!("server task failed: {e}"))),
        }
    }
}
