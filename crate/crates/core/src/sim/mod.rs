//! Synthetic participants with known strategies, used as ground truth for
//! the analytics.

mod agent;
mod calibrate;
mod events;
mod population;

pub use agent::{agent_step, AgentContext, AgentKind, LeafRow, LeafTable};
pub use calibrate::{analytic_channel_mi, calibrate, expected_stats, CalibratedAgent, CalibrationTargets, ExpectedStats};
pub use events::records_to_events;
pub use population::{
    run_population, AgentGroup, AgentSpec, MarketConfig, MarketSpec, PanelModel, PopulationConfig, SimSpec, TimeModel,
};

use crate::market::MarketError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid simulation spec: {0}")]
    InvalidSpec(String),
    #[error("missing context: {0}")]
    MissingContext(&'static str),
    #[error("calibration did not converge")]
    NoConvergence,
    #[error(transparent)]
    Market(#[from] MarketError),
}
