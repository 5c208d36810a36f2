//! The single owner of [`SessionState`]. Connections talk to it through a
//! command queue, so judgments are applied strictly one at a time and an ack
//! is always queued before the next `trial_begin`.

use std::collections::BTreeMap;
use std::sync::mpsc::{Receiver, RecvTimeoutError};
use std::time::Instant;

use chrono::Utc;
use tokio::sync::{mpsc::UnboundedSender, oneshot};

use super::wire::{
    ErrorCode, Hello, MessageType, RatingSubmit, SessionComplete, SessionInfo, TimerExpired, TrialAck,
    TrialDescriptor, WireMessage,
};
use crate::session::{timer_contract, ExperimentConfig, Judgment, SessionError, SessionState, TrialTimer};

pub(crate) enum Command {
    /// Reply is `None` when another connection already holds the session.
    Attach {
        outbound: UnboundedSender<WireMessage>,
        reply: oneshot::Sender<Option<u64>>,
    },
    Inbound {
        conn: u64,
        text: String,
    },
    Detach {
        conn: u64,
    },
    Shutdown,
}

struct Connection {
    id: u64,
    outbound: UnboundedSender<WireMessage>,
    greeted: bool,
}

struct ActiveTrial {
    index: u32,
    started: Instant,
    timer: TrialTimer,
    notified: bool,
}

pub(crate) struct SessionActor {
    state: SessionState,
    config: ExperimentConfig,
    /// Stimulus id to `/geom/<hash>` URL.
    urls: BTreeMap<String, String>,
    conn: Option<Connection>,
    next_conn: u64,
    active: Option<ActiveTrial>,
}

impl SessionActor {
    pub(crate) fn new(state: SessionState, config: ExperimentConfig, urls: BTreeMap<String, String>) -> Self {
        SessionActor {
            state,
            config,
            urls,
            conn: None,
            next_conn: 1,
            active: None,
        }
    }

    pub(crate) fn run(mut self, rx: Receiver<Command>) -> SessionState {
        loop {
            let deadline = self
                .active
                .as_ref()
                .filter(|a| !a.notified)
                .map(|a| a.timer.remaining(a.started.elapsed()));
            let cmd = match deadline {
                Some(d) => match rx.recv_timeout(d) {
                    Ok(c) => c,
                    Err(RecvTimeoutError::Timeout) => {
                        self.poll_timer();
                        continue;
                    }
                    Err(RecvTimeoutError::Disconnected) => break,
                },
                None => match rx.recv() {
                    Ok(c) => c,
                    Err(_) => break,
                },
            };
            match cmd {
                Command::Attach { outbound, reply } => {
                    if self.conn.is_some() {
                        let _ = reply.send(None);
                    } else {
                        let id = self.next_conn;
                        self.next_conn += 1;
                        self.conn = Some(Connection {
                            id,
                            outbound,
                            greeted: false,
                        });
                        let _ = reply.send(Some(id));
                    }
                }
                Command::Inbound { conn, text } => {
                    if self.conn.as_ref().is_some_and(|c| c.id == conn) {
                        self.handle_text(&text);
                    }
                }
                Command::Detach { conn } => {
                    if self.conn.as_ref().is_some_and(|c| c.id == conn) {
                        tracing::info!(conn, "participant connection closed");
                        self.conn = None;
                        self.active = None;
                    }
                }
                Command::Shutdown => break,
            }
        }
        self.state
    }

    fn poll_timer(&mut self) {
        let Some(a) = self.active.as_mut() else { return };
        if a.timer.poll(a.started.elapsed()).is_some() {
            a.notified = true;
            let expired = TimerExpired { trial_index: a.index };
            self.send(WireMessage::new(MessageType::TimerExpiredAck, &expired));
        }
    }

    fn send(&self, msg: WireMessage) {
        if let Some(c) = &self.conn {
            let _ = c.outbound.send(msg);
        }
    }

    fn handle_text(&mut self, text: &str) {
        let msg = match WireMessage::parse(text) {
            Ok(m) => m,
            Err(reply) => return self.send(reply),
        };
        let greeted = self.conn.as_ref().is_some_and(|c| c.greeted);
        match msg.kind {
            MessageType::Hello => match msg.payload_as::<Option<Hello>>() {
                Ok(_) => {
                    if let Some(c) = self.conn.as_mut() {
                        c.greeted = true;
                    }
                    self.send(WireMessage::new(MessageType::SessionInfo, &self.session_info()));
                    self.advance();
                }
                Err(reply) => self.send(reply),
            },
            MessageType::RatingSubmit if greeted => match msg.payload_as::<RatingSubmit>() {
                Ok(r) => self.handle_rating(r),
                Err(reply) => self.send(reply),
            },
            MessageType::Telemetry => tracing::debug!(payload = %msg.payload, "telemetry"),
            MessageType::RatingSubmit => self.send(WireMessage::error(ErrorCode::UnexpectedMessage, "send hello first")),
            other => self.send(WireMessage::error(
                ErrorCode::UnexpectedMessage,
                format!("{other:?} is not accepted from clients"),
            )),
        }
    }

    fn session_info(&self) -> SessionInfo {
        SessionInfo {
            participant_name: self.config.participant_name.clone(),
            trial_count: self.state.playlist().len() as u32,
            completed: self.state.completed().len() as u32,
            rating_categories: self.state.rating_categories(),
        }
    }

    /// Sends the current trial, or `session_complete` when nothing is left.
    fn advance(&mut self) {
        let Some(trial) = self.state.next_trial().cloned() else {
            self.active = None;
            let done = SessionComplete {
                trial_count: self.state.playlist().len() as u32,
            };
            return self.send(WireMessage::new(MessageType::SessionComplete, &done));
        };
        let c = &self.config;
        let descriptor = TrialDescriptor {
            trial_index: trial.index,
            reference_asset_url: self.urls[&trial.reference_id].clone(),
            impaired_asset_url: self.urls[&trial.stimulus_id].clone(),
            display_mode: c.display_mode,
            rendering_mode: c.rendering_mode,
            background: c.background,
            viewing_time_s: c.viewing_time_s,
            rating_categories: c.rating_categories,
            model_scale: c.model_scale,
            point_size_px: c.point_size_px,
        };
        self.active = Some(ActiveTrial {
            index: trial.index,
            started: Instant::now(),
            timer: TrialTimer::new(timer_contract(c)),
            notified: false,
        });
        self.send(WireMessage::new(MessageType::TrialBegin, &descriptor));
    }

    fn handle_rating(&mut self, r: RatingSubmit) {
        if let Some(prev) = self.state.judgment_for(r.trial_index) {
            if prev.score == r.score {
                let ack = TrialAck {
                    trial_index: r.trial_index,
                    duplicate: true,
                };
                return self.send(WireMessage::new(MessageType::TrialAck, &ack));
            }
        }
        let Some(trial) = self.state.playlist().trial(r.trial_index) else {
            let e = SessionError::OutOfOrderTrial {
                expected: self.state.next_index(),
                got: r.trial_index,
            };
            return self.send(WireMessage::error(ErrorCode::from(&e), e.to_string()));
        };
        let measured = self
            .active
            .as_ref()
            .filter(|a| a.index == r.trial_index)
            .map(|a| TrialTimer::view_time_ms(a.started.elapsed()));
        let judgment = Judgment {
            trial_index: r.trial_index,
            stimulus_id: trial.stimulus_id.clone(),
            score: r.score,
            view_time_ms: r.view_time_ms.or(measured).unwrap_or(0),
            wall_clock: Utc::now(),
            participant_name: self.config.participant_name.clone(),
        };
        match self.state.record(judgment) {
            Ok(()) => {
                let ack = TrialAck {
                    trial_index: r.trial_index,
                    duplicate: false,
                };
                self.send(WireMessage::new(MessageType::TrialAck, &ack));
                self.advance();
            }
            Err(e) => {
                if matches!(e, SessionError::JournalWriteFailure(_)) {
                    tracing::error!(error = %e, "journal write failed, session halted");
                    self.active = None;
                }
                self.send(WireMessage::error(ErrorCode::from(&e), e.to_string()));
            }
        }
    }
}
