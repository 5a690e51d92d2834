//! Session engine: scenarios, the expert oracle, the event log and the
//! state machine that plays 25 rounds over one price series.

mod engine;
mod events;
mod expert;
mod projection;
mod scenario;

pub use engine::{
    Phase, RoundView, Session, SessionParams, SessionSnapshot, INITIAL_COINS, LOSS_FACTOR, WIN_FACTOR,
};
pub use events::{EventBody, EventRecord, EventType};
pub use expert::{ExpertAdvice, SessionPlan, VolatilityPhrase, EXPERT_RELIABILITY};
pub use projection::{project_records, ProjectionError, RecordProjector};
pub use scenario::{
    assign_group, assign_group_with, scenario_spec, visible_panels, AssignmentMode, PanelSelection, ScenarioSpec,
    SCENARIO_NAMES,
};

use crate::domain::PanelKind;
use crate::market::MarketError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error("unknown scenario {0}")]
    UnknownScenario(u8),
    #[error("series pool is empty")]
    EmptyPool,
    #[error("panel {0} is not available in this round")]
    PanelNotAllowed(PanelKind),
    #[error("an extra screen must be chosen first")]
    MissingChoice,
    #[error("round is closed")]
    RoundClosed,
    #[error("decision after {elapsed_ms} ms exceeds the {limit_ms} ms limit")]
    OverTime { elapsed_ms: u64, limit_ms: u64 },
    #[error("elapsed time went backwards")]
    NonMonotoneTime,
    #[error("unknown series {0}")]
    UnknownSeries(String),
    #[error("corrupt log: {0}")]
    CorruptLog(String),
    #[error(transparent)]
    Market(#[from] MarketError),
}
