//! Simulated one-way communication element with a programmable delay.
//!
//! Messages are sender-stamped. Delivery times are clamped to be
//! non-decreasing so a shrinking delay never reorders traffic.

use alloc::collections::VecDeque;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

/// Slack applied when comparing simulation timestamps.
pub const TIME_EPS: f64 = 1e-9;

/// One-way delay `tau(t)` as a function of the send time.
#[derive(Clone)]
pub enum DelayProfile {
    Constant(f64),
    /// `(t, tau)` breakpoints sorted by `t`; `tau` holds until the next
    /// breakpoint. Times before the first breakpoint use the first `tau`.
    Piecewise(Vec<(f64, f64)>),
    Callback(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl DelayProfile {
    pub fn constant(tau: f64) -> Result<Self, ChannelError> {
        if !tau.is_finite() || tau < 0.0 {
            return Err(ChannelError::InvalidDelay(tau));
        }
        Ok(DelayProfile::Constant(tau))
    }

    pub fn piecewise(breakpoints: Vec<(f64, f64)>) -> Result<Self, ChannelError> {
        if breakpoints.is_empty() {
            return Err(ChannelError::EmptyProfile);
        }
        for w in breakpoints.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(ChannelError::UnsortedProfile(w[1].0));
            }
        }
        for &(t, tau) in &breakpoints {
            if !t.is_finite() || !tau.is_finite() || tau < 0.0 {
                return Err(ChannelError::InvalidDelay(tau));
            }
        }
        Ok(DelayProfile::Piecewise(breakpoints))
    }

    pub fn callback(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        DelayProfile::Callback(Arc::new(f))
    }

    /// Delay applied to a message sent at `t`.
    pub fn tau(&self, t: f64) -> f64 {
        match self {
            DelayProfile::Constant(tau) => *tau,
            DelayProfile::Piecewise(bp) => {
                let idx = bp.partition_point(|&(tb, _)| tb <= t + TIME_EPS);
                bp[idx.saturating_sub(1)].1
            }
            DelayProfile::Callback(f) => f(t),
        }
    }

    /// Largest delay this profile can produce, if it is knowable.
    pub fn max_tau(&self) -> Option<f64> {
        match self {
            DelayProfile::Constant(tau) => Some(*tau),
            DelayProfile::Piecewise(bp) => bp.iter().map(|p| p.1).reduce(f64::max),
            DelayProfile::Callback(_) => None,
        }
    }
}

impl fmt::Debug for DelayProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DelayProfile::Constant(tau) => f.debug_tuple("Constant").field(tau).finish(),
            DelayProfile::Piecewise(bp) => f.debug_tuple("Piecewise").field(bp).finish(),
            DelayProfile::Callback(_) => f.write_str("Callback(..)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelError {
    InvalidDelay(f64),
    EmptyProfile,
    UnsortedProfile(f64),
    NonMonotoneSend { previous: f64, attempted: f64 },
}

impl fmt::Display for ChannelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelError::InvalidDelay(tau) => {
                write!(f, "delay must be finite and >= 0, got {tau}")
            }
            ChannelError::EmptyProfile => f.write_str("delay profile has no breakpoints"),
            ChannelError::UnsortedProfile(t) => {
                write!(
                    f,
                    "delay profile breakpoints not strictly increasing at t={t}"
                )
            }
            ChannelError::NonMonotoneSend {
                previous,
                attempted,
            } => write!(
                f,
                "send time {attempted} is not after previous send time {previous}"
            ),
        }
    }
}

impl core::error::Error for ChannelError {}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMessage<P> {
    pub payload: P,
    pub t_send: f64,
    pub t_deliver: f64,
}

/// A message that has come out of the channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Delivered<P> {
    pub payload: P,
    pub t_send: f64,
    /// Poll time at which the message was handed to the receiver.
    pub t_received: f64,
}

/// Result of polling a channel end.
#[derive(Debug, Clone, PartialEq)]
pub enum Poll<P> {
    /// A message arrived since the previous poll.
    Fresh(Delivered<P>),
    /// Nothing new; carries the last delivery, if there ever was one.
    Stale(Option<Delivered<P>>),
}

impl<P> Poll<P> {
    pub fn is_fresh(&self) -> bool {
        matches!(self, Poll::Fresh(_))
    }

    /// Payload of a fresh delivery.
    pub fn fresh(&self) -> Option<&P> {
        match self {
            Poll::Fresh(d) => Some(&d.payload),
            Poll::Stale(_) => None,
        }
    }

    /// Fresh payload, or the last delivered payload on a stale poll.
    pub fn latest(&self) -> Option<&P> {
        match self {
            Poll::Fresh(d) | Poll::Stale(Some(d)) => Some(&d.payload),
            Poll::Stale(None) => None,
        }
    }

    /// Time since the last delivery was received, `None` if never.
    pub fn age(&self, t: f64) -> Option<f64> {
        match self {
            Poll::Fresh(d) | Poll::Stale(Some(d)) => Some(t - d.t_received),
            Poll::Stale(None) => None,
        }
    }
}

/// One direction of the communication element.
#[derive(Debug, Clone)]
pub struct ChannelEnd<P> {
    profile: DelayProfile,
    initial_delay: f64,
    queue: VecDeque<ChannelMessage<P>>,
    last_send: Option<f64>,
    last_deliver: Option<f64>,
    last_delivered: Option<Delivered<P>>,
    last_poll: Option<f64>,
}

impl<P: Clone> ChannelEnd<P> {
    pub fn new(profile: DelayProfile) -> Self {
        let initial_delay = profile.tau(0.0);
        Self {
            profile,
            initial_delay,
            queue: VecDeque::new(),
            last_send: None,
            last_deliver: None,
            last_delivered: None,
            last_poll: None,
        }
    }

    pub fn profile(&self) -> &DelayProfile {
        &self.profile
    }

    /// Replaces the delay profile for subsequent sends. Messages already in
    /// flight keep their delivery times, and the monotone clamp still applies.
    pub fn set_profile(&mut self, profile: DelayProfile) {
        self.profile = profile;
    }

    /// Number of messages still in flight.
    pub fn in_flight(&self) -> usize {
        self.queue.len()
    }

    /// Enqueues `payload` sent at `t`; returns its delivery time.
    pub fn send(&mut self, payload: P, t: f64) -> Result<f64, ChannelError> {
        if let Some(prev) = self.last_send {
            if t <= prev {
                return Err(ChannelError::NonMonotoneSend {
                    previous: prev,
                    attempted: t,
                });
            }
        }
        let tau = self.profile.tau(t);
        if !tau.is_finite() || tau < 0.0 {
            return Err(ChannelError::InvalidDelay(tau));
        }
        let mut t_deliver = t + tau;
        if let Some(prev) = self.last_deliver {
            t_deliver = t_deliver.max(prev);
        }
        self.last_send = Some(t);
        self.last_deliver = Some(t_deliver);
        self.queue.push_back(ChannelMessage {
            payload,
            t_send: t,
            t_deliver,
        });
        Ok(t_deliver)
    }

    /// Drains every message due by `t` and returns the newest of them.
    pub fn poll(&mut self, t: f64) -> Poll<P> {
        self.last_poll = Some(t);
        let mut newest = None;
        while let Some(msg) = self.queue.front() {
            if msg.t_deliver > t + TIME_EPS {
                break;
            }
            newest = self.queue.pop_front();
        }
        match newest {
            Some(msg) => {
                let d = Delivered {
                    payload: msg.payload,
                    t_send: msg.t_send,
                    t_received: t,
                };
                self.last_delivered = Some(d.clone());
                Poll::Fresh(d)
            }
            None => Poll::Stale(self.last_delivered.clone()),
        }
    }

    /// Age of the newest delivered data, `t − t_send`; before the first
    /// delivery this is the profile's delay at `t = 0`.
    pub fn current_delay_estimate(&self, t: f64) -> f64 {
        match &self.last_delivered {
            Some(d) => t - d.t_send,
            None => self.initial_delay,
        }
    }

    pub fn last_delivered(&self) -> Option<&Delivered<P>> {
        self.last_delivered.as_ref()
    }
}
