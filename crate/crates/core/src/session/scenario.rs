use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SessionError;
use crate::domain::{Group, PanelKind};

/// How the panels of a scenario/group are gated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PanelSelection {
    /// Every panel.
    Full,
    /// Home price chart only, without moving averages.
    HomeOnly,
    /// Home plus one screen drawn at random each round.
    OneExtraRandom,
    /// Home plus one screen picked by the participant each round.
    OneExtraChosen,
    /// Home plus the market-direction arrows.
    ArrowsOnly,
}

/// Information and time constraints of one scenario for one group.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario_id: u8,
    pub group: Group,
    pub time_limit_secs: u32,
    /// Panels that may ever be shown; one-extra modes narrow this per round.
    pub allowed_panels: BTreeSet<PanelKind>,
    pub panel_selection: PanelSelection,
    pub trend_warning: bool,
}

pub const SCENARIO_NAMES: [&str; 4] = [
    "Time is money",
    "Information is power",
    "The computer virus",
    "The trend hunter",
];

/// Group assignment policy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum AssignmentMode {
    /// A, B, A, B, ... per scenario in registration order.
    #[default]
    Alternating,
    /// Independent fair coin per registration, seeded.
    Iid { seed: u64 },
}

impl ScenarioSpec {
    pub fn name(&self) -> &'static str {
        SCENARIO_NAMES[self.scenario_id as usize - 1]
    }

    pub fn time_limit_ms(&self) -> u64 {
        u64::from(self.time_limit_secs) * 1000
    }

    /// Scenario 4 data is left out of default statistics.
    pub fn excluded_by_default(&self) -> bool {
        self.scenario_id == 4
    }
}

/// Full definition of `scenario_id` for `group`.
pub fn scenario_spec(scenario_id: u8, group: Group) -> Result<ScenarioSpec, SessionError> {
    let all: BTreeSet<PanelKind> = PanelKind::ALL.into_iter().collect();
    let home: BTreeSet<PanelKind> = [PanelKind::PriceChart].into();
    let one_extra: BTreeSet<PanelKind> = std::iter::once(PanelKind::PriceChart)
        .chain(PanelKind::SCREENS)
        .collect();
    let arrows: BTreeSet<PanelKind> = [PanelKind::PriceChart, PanelKind::MarketArrows].into();

    let (time_limit_secs, allowed_panels, panel_selection, trend_warning) = match (scenario_id, group) {
        (1, Group::A) => (30, all, PanelSelection::Full, false),
        (1, Group::B) => (10, all, PanelSelection::Full, false),
        (2, Group::A) => (30, all, PanelSelection::Full, false),
        (2, Group::B) => (30, home, PanelSelection::HomeOnly, false),
        (3, Group::A) => (30, one_extra, PanelSelection::OneExtraRandom, false),
        (3, Group::B) => (30, one_extra, PanelSelection::OneExtraChosen, false),
        (4, Group::A) => (30, all, PanelSelection::Full, false),
        (4, Group::B) => (30, arrows, PanelSelection::ArrowsOnly, true),
        (id, _) => return Err(SessionError::UnknownScenario(id)),
    };
    Ok(ScenarioSpec {
        scenario_id,
        group,
        time_limit_secs,
        allowed_panels,
        panel_selection,
        trend_warning,
    })
}

/// Scenario definition for the `registration_counter`-th participant
/// registered in `scenario_id` (0-based), alternating A/B.
pub fn assign_group(scenario_id: u8, registration_counter: u64) -> Result<ScenarioSpec, SessionError> {
    assign_group_with(AssignmentMode::Alternating, scenario_id, registration_counter)
}

pub fn assign_group_with(
    mode: AssignmentMode,
    scenario_id: u8,
    registration_counter: u64,
) -> Result<ScenarioSpec, SessionError> {
    let group = match mode {
        AssignmentMode::Alternating => {
            if registration_counter % 2 == 0 {
                Group::A
            } else {
                Group::B
            }
        }
        AssignmentMode::Iid { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(u64::from(scenario_id));
            rng.set_word_pos(u128::from(registration_counter) * 16);
            if rng.random_bool(0.5) {
                Group::A
            } else {
                Group::B
            }
        }
    };
    scenario_spec(scenario_id, group)
}

/// Panels visible in a round. `extra` is the drawn or chosen screen for the
/// one-extra modes and is required there.
pub fn visible_panels(spec: &ScenarioSpec, extra: Option<PanelKind>) -> Result<BTreeSet<PanelKind>, SessionError> {
    match spec.panel_selection {
        PanelSelection::OneExtraRandom | PanelSelection::OneExtraChosen => {
            let extra = extra.ok_or(SessionError::MissingChoice)?;
            if extra.is_home() || !spec.allowed_panels.contains(&extra) {
                return Err(SessionError::PanelNotAllowed(extra));
            }
            Ok([PanelKind::PriceChart, extra].into())
        }
        _ => {
            if let Some(extra) = extra {
                if !spec.allowed_panels.contains(&extra) {
                    return Err(SessionError::PanelNotAllowed(extra));
                }
            }
            let mut set = spec.allowed_panels.clone();
            set.insert(PanelKind::PriceChart);
            Ok(set)
        }
    }
}
