use serde::{Deserialize, Serialize};

use super::scenario::ScenarioSpec;
use crate::domain::{CohortKey, Direction, Outcome, PanelKind};

/// One line of the append-only event log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    /// Position within the session stream, starting at 0.
    pub seq: u64,
    /// Milliseconds since the Unix epoch; nondecreasing within a session.
    pub timestamp: u64,
    pub session_id: Option<String>,
    #[serde(flatten)]
    pub body: EventBody,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventType {
    Register,
    SessionStart,
    RoundStart,
    PanelView,
    Guess,
    RoundResult,
    Timeout,
    SessionEnd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    Register {
        participant_id: String,
        cohort: CohortKey,
    },
    SessionStart {
        participant_id: String,
        scenario: ScenarioSpec,
        series_symbol: String,
        seed: u64,
    },
    RoundStart {
        round: u8,
        /// Direction of the last revealed move.
        market_prev: Direction,
        /// Panels that may be opened; for chosen-extra rounds the candidates.
        panels: Vec<PanelKind>,
    },
    PanelView {
        round: u8,
        kind: PanelKind,
        elapsed_ms: u64,
        /// Stated direction when the expert panel was opened.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        advice: Option<Direction>,
    },
    Guess {
        round: u8,
        direction: Direction,
        elapsed_ms: u64,
    },
    Timeout {
        round: u8,
    },
    RoundResult {
        round: u8,
        outcome: Option<Outcome>,
        market_next: Direction,
        coins_after: f64,
    },
    SessionEnd {
        coins: f64,
        correct: u32,
        wrong: u32,
        timeouts: u32,
    },
}

impl EventBody {
    pub fn event_type(&self) -> EventType {
        match self {
            EventBody::Register { .. } => EventType::Register,
            EventBody::SessionStart { .. } => EventType::SessionStart,
            EventBody::RoundStart { .. } => EventType::RoundStart,
            EventBody::PanelView { .. } => EventType::PanelView,
            EventBody::Guess { .. } => EventType::Guess,
            EventBody::Timeout { .. } => EventType::Timeout,
            EventBody::RoundResult { .. } => EventType::RoundResult,
            EventBody::SessionEnd { .. } => EventType::SessionEnd,
        }
    }
}

impl EventRecord {
    pub fn event_type(&self) -> EventType {
        self.body.event_type()
    }

    /// Serialized form used for the JSON-lines log, without the newline.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("event serialization is infallible")
    }
}
