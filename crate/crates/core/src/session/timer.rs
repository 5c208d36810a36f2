use std::time::Duration;

use super::config::ExperimentConfig;

/// Per-trial timing rules. The countdown is advisory: ratings are accepted
/// before and after it runs out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimerRules {
    pub countdown: Duration,
    pub accepts_rating_after_expiry: bool,
}

pub fn timer_contract(config: &ExperimentConfig) -> TimerRules {
    TimerRules {
        countdown: Duration::from_secs_f64(config.viewing_time_s),
        accepts_rating_after_expiry: true,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimerEvent {
    Expired,
}

/// Countdown state for a single trial, driven by elapsed time since the
/// trial was first shown.
#[derive(Debug, Clone)]
pub struct TrialTimer {
    rules: TimerRules,
    fired: bool,
}

impl TrialTimer {
    pub fn new(rules: TimerRules) -> Self {
        TrialTimer { rules, fired: false }
    }

    pub fn remaining(&self, elapsed: Duration) -> Duration {
        self.rules.countdown.saturating_sub(elapsed)
    }

    pub fn is_expired(&self, elapsed: Duration) -> bool {
        elapsed >= self.rules.countdown
    }

    /// Emits [`TimerEvent::Expired`] the first time it is polled at or past
    /// the countdown, and never again.
    pub fn poll(&mut self, elapsed: Duration) -> Option<TimerEvent> {
        if !self.fired && self.is_expired(elapsed) {
            self.fired = true;
            Some(TimerEvent::Expired)
        } else {
            None
        }
    }

    pub fn accepts_rating(&self, elapsed: Duration) -> bool {
        self.rules.accepts_rating_after_expiry || !self.is_expired(elapsed)
    }

    pub fn view_time_ms(elapsed: Duration) -> u64 {
        elapsed.as_millis() as u64
    }
}
