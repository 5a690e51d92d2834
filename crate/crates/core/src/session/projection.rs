use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::events::{EventBody, EventRecord};
use super::scenario::ScenarioSpec;
use crate::domain::{CohortKey, Direction, Guess, PanelKind, RoundRecord};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("event {seq} of session {session}: {reason}")]
pub struct ProjectionError {
    pub session: String,
    pub seq: u64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
struct OpenRound {
    round: u8,
    market_prev: Direction,
    viewed: BTreeSet<PanelKind>,
    advice: Option<Direction>,
    guess: Option<(Direction, u64)>,
    timed_out: bool,
}

/// Folds one session's events into the `RoundRecord`s they describe.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RecordProjector {
    session_id: String,
    participant_id: Option<String>,
    cohort: Option<CohortKey>,
    scenario: Option<ScenarioSpec>,
    open: Option<OpenRound>,
    records: Vec<RoundRecord>,
}

impl RecordProjector {
    pub fn new(session_id: impl Into<String>) -> Self {
        RecordProjector {
            session_id: session_id.into(),
            ..Default::default()
        }
    }

    pub fn records(&self) -> &[RoundRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<RoundRecord> {
        self.records
    }

    pub fn set_cohort(&mut self, cohort: CohortKey) {
        self.cohort.get_or_insert(cohort);
    }

    fn fail(&self, ev: &EventRecord, reason: impl Into<String>) -> ProjectionError {
        ProjectionError {
            session: self.session_id.clone(),
            seq: ev.seq,
            reason: reason.into(),
        }
    }

    /// Applies one event; returns the record completed by a `RoundResult`.
    pub fn apply(&mut self, ev: &EventRecord) -> Result<Option<RoundRecord>, ProjectionError> {
        match &ev.body {
            EventBody::Register { participant_id, cohort } => {
                self.participant_id = Some(participant_id.clone());
                self.cohort = Some(*cohort);
            }
            EventBody::SessionStart {
                participant_id, scenario, ..
            } => {
                self.participant_id = Some(participant_id.clone());
                self.scenario = Some(scenario.clone());
            }
            EventBody::RoundStart { round, market_prev, .. } => {
                if self.open.is_some() {
                    return Err(self.fail(ev, "round started while another is open"));
                }
                self.open = Some(OpenRound {
                    round: *round,
                    market_prev: *market_prev,
                    viewed: BTreeSet::new(),
                    advice: None,
                    guess: None,
                    timed_out: false,
                });
            }
            EventBody::PanelView { round, kind, advice, .. } => {
                let open = self.open_round(ev, *round)?;
                open.viewed.insert(*kind);
                if advice.is_some() {
                    open.advice = *advice;
                }
            }
            EventBody::Guess {
                round,
                direction,
                elapsed_ms,
            } => {
                let open = self.open_round(ev, *round)?;
                if open.guess.is_some() || open.timed_out {
                    return Err(self.fail(ev, "round already decided"));
                }
                open.guess = Some((*direction, *elapsed_ms));
            }
            EventBody::Timeout { round } => {
                let open = self.open_round(ev, *round)?;
                if open.guess.is_some() || open.timed_out {
                    return Err(self.fail(ev, "round already decided"));
                }
                open.timed_out = true;
            }
            EventBody::RoundResult {
                round,
                outcome,
                market_next,
                coins_after,
            } => {
                self.open_round(ev, *round)?;
                let open = self.open.take().expect("checked");
                let scenario = self
                    .scenario
                    .as_ref()
                    .ok_or_else(|| self.fail(ev, "result before session start"))?;
                let (guess, decision_time) = match (open.guess, open.timed_out) {
                    (Some((d, ms)), false) => (Guess::from(d), ms as f64 / 1000.0),
                    (None, true) => (Guess::Timeout, f64::from(scenario.time_limit_secs)),
                    _ => return Err(self.fail(ev, "result without a guess or timeout")),
                };
                let expert_consulted = open.viewed.contains(&PanelKind::Expert);
                let record = RoundRecord {
                    participant_id: self.participant_id.clone().unwrap_or_default(),
                    session_id: self.session_id.clone(),
                    scenario_id: scenario.scenario_id,
                    group: Some(scenario.group),
                    round_index: open.round,
                    guess,
                    market_prev: open.market_prev,
                    market_next: *market_next,
                    outcome: *outcome,
                    decision_time,
                    panels_viewed: open.viewed,
                    expert_consulted,
                    expert_advice: if expert_consulted { open.advice } else { None },
                    coins_after: *coins_after,
                    cohort: self.cohort,
                    trend: None,
                };
                record
                    .validate(Some(f64::from(scenario.time_limit_secs)))
                    .map_err(|e| self.fail(ev, e.to_string()))?;
                self.records.push(record.clone());
                return Ok(Some(record));
            }
            EventBody::SessionEnd { .. } => {
                if self.open.is_some() {
                    return Err(self.fail(ev, "session ended with an open round"));
                }
            }
        }
        Ok(None)
    }

    fn open_round(&mut self, ev: &EventRecord, round: u8) -> Result<&mut OpenRound, ProjectionError> {
        let err = match &self.open {
            Some(o) if o.round == round => None,
            Some(o) => Some(format!("event for round {round} while round {} is open", o.round)),
            None => Some(format!("event for round {round} with no open round")),
        };
        match err {
            Some(reason) => Err(self.fail(ev, reason)),
            None => Ok(self.open.as_mut().expect("checked")),
        }
    }
}

/// Round records of every session in an interleaved multi-session log, in
/// session-id order. Cohorts registered outside a session are attached to
/// that participant's sessions.
pub fn project_records(events: &[EventRecord]) -> Result<Vec<RoundRecord>, ProjectionError> {
    let mut registry: HashMap<String, CohortKey> = HashMap::new();
    let mut sessions: BTreeMap<String, RecordProjector> = BTreeMap::new();
    let mut owners: HashMap<String, String> = HashMap::new();
    for ev in events {
        match &ev.session_id {
            None => {
                if let EventBody::Register { participant_id, cohort } = &ev.body {
                    registry.insert(participant_id.clone(), *cohort);
                }
            }
            Some(id) => {
                if let EventBody::SessionStart { participant_id, .. } = &ev.body {
                    owners.insert(id.clone(), participant_id.clone());
                }
                let projector = sessions
                    .entry(id.clone())
                    .or_insert_with(|| RecordProjector::new(id.clone()));
                if let Some(cohort) = owners.get(id).and_then(|p| registry.get(p)) {
                    projector.set_cohort(*cohort);
                }
                projector.apply(ev)?;
            }
        }
    }
    Ok(sessions.into_values().flat_map(RecordProjector::into_records).collect())
}
