//! Trainer-facing protocol: the JSON messages exchanged with trainer
//! clients, the shared inbox that stamps incoming feedback with the step it
//! refers to, and the pacing clock used while a human is watching.
//!
//! Credit assignment: a feedback message is attributed to the most recent
//! step whose state was published before the message arrived. The learner
//! drains the inbox at every step boundary; events for the latest pushed
//! transition are summed into its human reward, anything older is dropped
//! and counted.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::reward::{AdmissibleRewards, AgentMode, FeedbackEvent, FeedbackSource};

pub const DEFAULT_INBOX_CAPACITY: usize = 1024;

/// Per-step vehicle and guidance snapshot sent to every trainer client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateMessage {
    pub episode: usize,
    pub step: usize,
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub c_d: f64,
    pub d: f64,
    pub last_action: usize,
    pub env_r: f64,
    pub mode: AgentMode,
}

/// Messages from server to clients. Serialized as one JSON object per frame
/// with a `type` discriminator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ServerMessage {
    State(StateMessage),
    /// Confirms which step a feedback message was attributed to.
    Ack { value: f64, episode: usize, step: usize },
    Error { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ClientMessage {
    Feedback {
        value: f64,
        /// Milliseconds since the Unix epoch on the client.
        client_time: f64,
    },
}

impl ServerMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("feedback value {0} is not one of the admissible rewards")]
    InvalidValue(f64),
    #[error("no step has been published yet")]
    NoStep,
    #[error("feedback queue is full")]
    QueueFull,
}

pub fn parse_client_message(text: &str) -> Result<ClientMessage, ProtocolError> {
    serde_json::from_str(text).map_err(|e| ProtocolError::Malformed(e.to_string()))
}

#[derive(Debug)]
struct InboxState {
    latest_published: Option<(usize, usize)>,
    queue: VecDeque<FeedbackEvent>,
    capacity: usize,
    admissible: AdmissibleRewards,
    human_clients: usize,
    dropped: u64,
}

/// Bounded multi-producer, single-consumer queue of feedback events.
#[derive(Debug, Clone)]
pub struct FeedbackInbox {
    inner: Arc<Mutex<InboxState>>,
}

impl Default for FeedbackInbox {
    fn default() -> Self {
        FeedbackInbox::new(AdmissibleRewards::default(), DEFAULT_INBOX_CAPACITY)
    }
}

impl FeedbackInbox {
    pub fn new(admissible: AdmissibleRewards, capacity: usize) -> Self {
        FeedbackInbox {
            inner: Arc::new(Mutex::new(InboxState {
                latest_published: None,
                queue: VecDeque::new(),
                capacity,
                admissible,
                human_clients: 0,
                dropped: 0,
            })),
        }
    }

    fn lock(&self) -> MutexGuard<'_, InboxState> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Records that the state for `(episode, step)` is about to reach clients.
    pub fn mark_published(&self, episode: usize, step: usize) {
        self.lock().latest_published = Some((episode, step));
    }

    pub fn latest_published(&self) -> Option<(usize, usize)> {
        self.lock().latest_published
    }

    /// Validates a feedback value and queues it against the latest published
    /// step.
    pub fn ingest(&self, value: f64, client_time: f64) -> Result<FeedbackEvent, ProtocolError> {
        let mut state = self.lock();
        let value = state
            .admissible
            .validate(value)
            .ok_or(ProtocolError::InvalidValue(value))?;
        let (episode, step_index) = state.latest_published.ok_or(ProtocolError::NoStep)?;
        if state.queue.len() >= state.capacity {
            return Err(ProtocolError::QueueFull);
        }
        let event = FeedbackEvent {
            value,
            wall_time: client_time,
            episode,
            step_index,
            source: FeedbackSource::Human,
        };
        state.queue.push_back(event);
        Ok(event)
    }

    pub fn drain(&self) -> Vec<FeedbackEvent> {
        self.lock().queue.drain(..).collect()
    }

    pub fn record_dropped(&self, count: u64) {
        self.lock().dropped += count;
    }

    pub fn dropped(&self) -> u64 {
        self.lock().dropped
    }

    pub fn human_clients(&self) -> usize {
        self.lock().human_clients
    }

    /// Registers a connected trainer client until the guard is dropped.
    pub fn connect_client(&self) -> ClientGuard {
        self.lock().human_clients += 1;
        ClientGuard { inbox: self.clone() }
    }
}

#[derive(Debug)]
pub struct ClientGuard {
    inbox: FeedbackInbox,
}

impl Drop for ClientGuard {
    fn drop(&mut self) {
        let mut state = self.inbox.lock();
        state.human_clients = state.human_clients.saturating_sub(1);
    }
}

/// What the training loop needs from a trainer connection.
pub trait TrainerLink {
    /// Publishes one step's state to every client. Must never block on slow
    /// clients.
    fn publish(&mut self, msg: &StateMessage);

    fn human_connected(&self) -> bool;

    fn drain(&mut self) -> Vec<FeedbackEvent>;

    fn record_dropped(&mut self, count: u64);
}

/// Headless link: publishes nowhere and never yields feedback.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoLink;

impl TrainerLink for NoLink {
    fn publish(&mut self, _msg: &StateMessage) {}

    fn human_connected(&self) -> bool {
        false
    }

    fn drain(&mut self) -> Vec<FeedbackEvent> {
        Vec::new()
    }

    fn record_dropped(&mut self, _count: u64) {}
}

/// In-process link backed by an inbox, collecting published messages. Used
/// by tests and by transports that forward messages themselves.
#[derive(Debug, Clone)]
pub struct InboxLink<F> {
    pub inbox: FeedbackInbox,
    pub on_publish: F,
}

impl<F: FnMut(&StateMessage)> TrainerLink for InboxLink<F> {
    fn publish(&mut self, msg: &StateMessage) {
        self.inbox.mark_published(msg.episode, msg.step);
        (self.on_publish)(msg);
    }

    fn human_connected(&self) -> bool {
        self.inbox.human_clients() > 0
    }

    fn drain(&mut self) -> Vec<FeedbackEvent> {
        self.inbox.drain()
    }

    fn record_dropped(&mut self, count: u64) {
        self.inbox.record_dropped(count);
    }
}

/// Fixed-rate step throttle. Whether it throttles is decided once per
/// episode, so a trainer leaving mid-episode lifts throttling at the next
/// episode boundary.
#[derive(Debug, Clone)]
pub struct Pacer {
    interval: Duration,
    active: bool,
    next: Option<Instant>,
}

impl Pacer {
    pub const DEFAULT_STEPS_PER_SECOND: f64 = 2.0;

    pub fn new(steps_per_second: f64) -> Self {
        assert!(steps_per_second > 0.0, "pace must be positive");
        Pacer {
            interval: Duration::from_secs_f64(1.0 / steps_per_second),
            active: false,
            next: None,
        }
    }

    pub fn begin_episode(&mut self, throttle: bool) {
        self.active = throttle;
        self.next = None;
    }

    pub fn is_active(&self) -> bool {
        self.active
    }

    /// Sleeps until the next step slot when throttling.
    pub fn wait(&mut self) {
        if !self.active {
            return;
        }
        let now = Instant::now();
        let due = self.next.unwrap_or(now);
        if due > now {
            thread::sleep(due - now);
        }
        // Schedule from the slot, not from wake-up, so the rate does not drift.
        self.next = Some(due.max(now - self.interval) + self.interval);
    }
}
