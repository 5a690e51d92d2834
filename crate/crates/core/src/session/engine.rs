use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Duration;

use serde::Serialize;

use super::events::{EventBody, EventRecord};
use super::expert::{ExpertAdvice, SessionPlan};
use super::projection::RecordProjector;
use super::scenario::{visible_panels, PanelSelection, ScenarioSpec};
use super::SessionError;
use crate::domain::{outcome_of, CohortKey, Direction, Outcome, PanelKind, RoundRecord};
use crate::market::{direction_at, panel_content, volatility_phrase, Dataset, PanelContent, PanelContext, PriceSeries, ROUNDS};

pub const INITIAL_COINS: f64 = 1000.0;
pub const WIN_FACTOR: f64 = 1.05;
pub const LOSS_FACTOR: f64 = 0.95;

/// Inputs of a new session.
#[derive(Clone, Debug)]
pub struct SessionParams {
    pub session_id: String,
    pub participant_id: String,
    pub cohort: CohortKey,
    pub scenario: ScenarioSpec,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum Phase {
    Open,
    /// Guess or timeout logged, result pending.
    Decided,
    /// Result logged, next round pending.
    Resolved,
    Ended,
}

/// Observable state of a session, used to compare live and rebuilt sessions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SessionSnapshot {
    pub session_id: String,
    pub participant_id: String,
    pub scenario_id: u8,
    pub series_symbol: String,
    pub round: u8,
    pub phase: Phase,
    pub coins: f64,
    pub correct: u32,
    pub wrong: u32,
    pub timeouts: u32,
    pub viewed: Vec<PanelKind>,
    pub chosen_extra: Option<PanelKind>,
    pub round_opened_at: u64,
    pub events: usize,
    pub records: usize,
}

/// What the client may know about the open round.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundView {
    pub round: u8,
    pub phase: Phase,
    pub coins: f64,
    pub time_limit_secs: u32,
    pub opened_at: u64,
    pub panels: Vec<PanelKind>,
    pub choice_required: bool,
    pub viewed: Vec<PanelKind>,
    pub trend_warning: bool,
}

/// One participant playing one scenario. Every mutation goes through an
/// event, so a session is exactly the fold of its log.
#[derive(Clone, Debug)]
pub struct Session {
    id: String,
    participant_id: String,
    cohort: Option<CohortKey>,
    scenario: ScenarioSpec,
    series: Arc<PriceSeries>,
    world: Arc<Vec<PriceSeries>>,
    seed: u64,
    plan: SessionPlan,
    round: u8,
    phase: Phase,
    coins: f64,
    correct: u32,
    wrong: u32,
    timeouts: u32,
    viewed: BTreeSet<PanelKind>,
    chosen_extra: Option<PanelKind>,
    round_opened_at: u64,
    last_elapsed_ms: u64,
    last_timestamp: u64,
    pending_decision: Option<Option<Direction>>,
    log: Vec<EventRecord>,
    projector: RecordProjector,
}

impl Session {
    /// Draws the series from `dataset` with the session seed and opens round 1.
    pub fn start(params: SessionParams, dataset: &Dataset, now_ms: u64) -> Result<Self, SessionError> {
        if dataset.series.is_empty() {
            return Err(SessionError::EmptyPool);
        }
        let plan = SessionPlan::from_seed(params.seed, dataset.series.len());
        let series = &dataset.series[plan.series_index];
        let sid = Some(params.session_id.clone());
        let events = vec![
            EventRecord {
                seq: 0,
                timestamp: now_ms,
                session_id: sid.clone(),
                body: EventBody::Register {
                    participant_id: params.participant_id.clone(),
                    cohort: params.cohort,
                },
            },
            EventRecord {
                seq: 1,
                timestamp: now_ms,
                session_id: sid,
                body: EventBody::SessionStart {
                    participant_id: params.participant_id,
                    scenario: params.scenario,
                    series_symbol: series.symbol().to_string(),
                    seed: params.seed,
                },
            },
        ];
        let mut session = Session::rebuild(&events, dataset)?;
        session.advance()?;
        Ok(session)
    }

    /// Replays a session log. A log cut between a decision and its
    /// consequences yields a session whose `complete_pending` finishes them.
    pub fn rebuild(events: &[EventRecord], dataset: &Dataset) -> Result<Self, SessionError> {
        let mut register: Option<&EventRecord> = None;
        let mut session: Option<Session> = None;
        for ev in events {
            match (&mut session, &ev.body) {
                (None, EventBody::Register { .. }) => register = Some(ev),
                (
                    None,
                    EventBody::SessionStart {
                        participant_id,
                        scenario,
                        series_symbol,
                        seed,
                    },
                ) => {
                    let session_id = ev
                        .session_id
                        .clone()
                        .ok_or_else(|| SessionError::CorruptLog("session start without session id".into()))?;
                    let plan = SessionPlan::from_seed(*seed, dataset.series.len());
                    let series = dataset
                        .series
                        .get(plan.series_index)
                        .filter(|s| s.symbol() == series_symbol)
                        .cloned()
                        .ok_or_else(|| SessionError::UnknownSeries(series_symbol.clone()))?;
                    let mut projector = RecordProjector::new(session_id.clone());
                    let mut log = Vec::new();
                    let mut cohort = None;
                    if let Some(reg) = register {
                        projector.apply(reg).map_err(|e| SessionError::CorruptLog(e.to_string()))?;
                        if let EventBody::Register { cohort: c, .. } = &reg.body {
                            cohort = Some(*c);
                        }
                        log.push(reg.clone());
                    }
                    projector.apply(ev).map_err(|e| SessionError::CorruptLog(e.to_string()))?;
                    log.push(ev.clone());
                    session = Some(Session {
                        id: session_id,
                        participant_id: participant_id.clone(),
                        cohort,
                        scenario: scenario.clone(),
                        series,
                        world: dataset.world.clone(),
                        seed: *seed,
                        plan,
                        round: 0,
                        phase: Phase::Resolved,
                        coins: INITIAL_COINS,
                        correct: 0,
                        wrong: 0,
                        timeouts: 0,
                        viewed: BTreeSet::new(),
                        chosen_extra: None,
                        round_opened_at: ev.timestamp,
                        last_elapsed_ms: 0,
                        last_timestamp: ev.timestamp,
                        pending_decision: None,
                        log,
                        projector,
                    });
                }
                (Some(s), _) => s.apply(ev)?,
                (None, _) => return Err(SessionError::CorruptLog("event before session start".into())),
            }
        }
        session.ok_or_else(|| SessionError::CorruptLog("no session start".into()))
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn participant_id(&self) -> &str {
        &self.participant_id
    }

    pub fn cohort(&self) -> Option<CohortKey> {
        self.cohort
    }

    pub fn scenario(&self) -> &ScenarioSpec {
        &self.scenario
    }

    pub fn series(&self) -> &PriceSeries {
        &self.series
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn round(&self) -> u8 {
        self.round
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn coins(&self) -> f64 {
        self.coins
    }

    pub fn correct(&self) -> u32 {
        self.correct
    }

    pub fn wrong(&self) -> u32 {
        self.wrong
    }

    pub fn is_ended(&self) -> bool {
        self.phase == Phase::Ended
    }

    pub fn round_opened_at(&self) -> u64 {
        self.round_opened_at
    }

    pub fn log(&self) -> &[EventRecord] {
        &self.log
    }

    pub fn records(&self) -> &[RoundRecord] {
        self.projector.records()
    }

    pub fn viewed(&self) -> &BTreeSet<PanelKind> {
        &self.viewed
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot {
            session_id: self.id.clone(),
            participant_id: self.participant_id.clone(),
            scenario_id: self.scenario.scenario_id,
            series_symbol: self.series.symbol().to_string(),
            round: self.round,
            phase: self.phase,
            coins: self.coins,
            correct: self.correct,
            wrong: self.wrong,
            timeouts: self.timeouts,
            viewed: self.viewed.iter().copied().collect(),
            chosen_extra: self.chosen_extra,
            round_opened_at: self.round_opened_at,
            events: self.log.len(),
            records: self.records().len(),
        }
    }

    pub fn round_view(&self) -> RoundView {
        RoundView {
            round: self.round,
            phase: self.phase,
            coins: self.coins,
            time_limit_secs: self.scenario.time_limit_secs,
            opened_at: self.round_opened_at,
            panels: self.round_panels().into_iter().collect(),
            choice_required: self.scenario.panel_selection == PanelSelection::OneExtraChosen
                && self.chosen_extra.is_none(),
            viewed: self.viewed.iter().copied().collect(),
            trend_warning: self.scenario.trend_warning,
        }
    }

    /// Panels the open round may show: the gated set, or the candidates while
    /// a chosen extra screen is still unpicked.
    fn round_panels(&self) -> BTreeSet<PanelKind> {
        match self.scenario.panel_selection {
            PanelSelection::OneExtraRandom if self.round >= 1 => {
                visible_panels(&self.scenario, Some(self.plan.extra_for(self.round))).unwrap_or_default()
            }
            PanelSelection::OneExtraChosen => match self.chosen_extra {
                Some(extra) => visible_panels(&self.scenario, Some(extra)).unwrap_or_default(),
                None => self.scenario.allowed_panels.clone(),
            },
            _ => visible_panels(&self.scenario, None).unwrap_or_default(),
        }
    }

    fn market_move(&self, round: u8) -> Result<(Direction, Direction), SessionError> {
        let i = self.series.outcome_index(round)?;
        Ok((direction_at(&self.series, i - 1)?, direction_at(&self.series, i)?))
    }

    /// Expert advice for `round`: truthful per the pre-drawn plan, with the
    /// volatility phrase taken at the round's last visible close.
    pub fn generate_expert_advice(&self, round: u8) -> Result<ExpertAdvice, SessionError> {
        if !(1..=ROUNDS as u8).contains(&round) {
            return Err(SessionError::RoundClosed);
        }
        let (_, market_next) = self.market_move(round)?;
        let phrase = volatility_phrase(&self.series, self.series.last_visible_index(round)?)?;
        Ok(ExpertAdvice::new(round, market_next, phrase, self.plan.is_truthful(round)))
    }

    /// Content of `kind` for the open round without logging a view.
    pub fn panel(&self, kind: PanelKind) -> Result<PanelContent, SessionError> {
        let advice = if kind == PanelKind::Expert {
            Some(self.generate_expert_advice(self.round)?)
        } else {
            None
        };
        let ctx = PanelContext {
            advice: advice.as_ref(),
            intraday_seed: self.seed,
            world: &self.world,
        };
        Ok(panel_content(&self.series, kind, self.round, &ctx)?)
    }

    fn check_open(&self, elapsed_ms: u64) -> Result<(), SessionError> {
        if self.phase != Phase::Open {
            return Err(SessionError::RoundClosed);
        }
        if elapsed_ms > self.scenario.time_limit_ms() {
            return Err(SessionError::OverTime {
                elapsed_ms,
                limit_ms: self.scenario.time_limit_ms(),
            });
        }
        if elapsed_ms < self.last_elapsed_ms {
            return Err(SessionError::NonMonotoneTime);
        }
        Ok(())
    }

    /// Logs a panel view and returns its content. In chosen-extra rounds the
    /// first non-home view fixes the extra screen.
    pub fn view_panel(&mut self, kind: PanelKind, elapsed: Duration) -> Result<PanelContent, SessionError> {
        let elapsed_ms = elapsed.as_millis() as u64;
        self.check_open(elapsed_ms)?;
        if !self.round_panels().contains(&kind) {
            return Err(SessionError::PanelNotAllowed(kind));
        }
        let content = self.panel(kind)?;
        let advice = match &content {
            PanelContent::Expert { direction, .. } => Some(*direction),
            _ => None,
        };
        self.emit(
            self.round_opened_at + elapsed_ms,
            EventBody::PanelView {
                round: self.round,
                kind,
                elapsed_ms,
                advice,
            },
        )?;
        Ok(content)
    }

    /// Records a guess for the open round and moves to the next one.
    pub fn submit_guess(&mut self, guess: Direction, elapsed: Duration) -> Result<RoundRecord, SessionError> {
        let elapsed_ms = elapsed.as_millis() as u64;
        self.check_open(elapsed_ms)?;
        self.emit(
            self.round_opened_at + elapsed_ms,
            EventBody::Guess {
                round: self.round,
                direction: guess,
                elapsed_ms,
            },
        )?;
        self.advance()?;
        Ok(self.records().last().cloned().expect("result just logged"))
    }

    /// Closes the open round without a guess once its time limit has passed.
    pub fn handle_timeout(&mut self) -> Result<RoundRecord, SessionError> {
        if self.phase != Phase::Open {
            return Err(SessionError::RoundClosed);
        }
        let at = self.round_opened_at + self.scenario.time_limit_ms();
        self.emit(at, EventBody::Timeout { round: self.round })?;
        self.advance()?;
        Ok(self.records().last().cloned().expect("result just logged"))
    }

    /// Emits the events that deterministically follow the last one logged.
    pub fn complete_pending(&mut self) -> Result<usize, SessionError> {
        let before = self.log.len();
        self.advance()?;
        Ok(self.log.len() - before)
    }

    fn advance(&mut self) -> Result<(), SessionError> {
        loop {
            let ts = self.last_timestamp;
            match self.phase {
                Phase::Decided => {
                    let decision = self.pending_decision.expect("decided phase has a decision");
                    let (_, market_next) = self.market_move(self.round)?;
                    let outcome = decision.map(|g| outcome_of(g, market_next));
                    let coins_after = match outcome {
                        Some(Outcome::Correct) => self.coins * WIN_FACTOR,
                        Some(Outcome::Wrong) => self.coins * LOSS_FACTOR,
                        None => self.coins,
                    };
                    self.emit(
                        ts,
                        EventBody::RoundResult {
                            round: self.round,
                            outcome,
                            market_next,
                            coins_after,
                        },
                    )?;
                }
                Phase::Resolved if (self.round as usize) < ROUNDS => {
                    let round = self.round + 1;
                    let (market_prev, _) = self.market_move(round)?;
                    let mut next = self.clone_for_round(round);
                    next.round = round;
                    let panels = next.round_panels().into_iter().collect();
                    self.emit(
                        ts,
                        EventBody::RoundStart {
                            round,
                            market_prev,
                            panels,
                        },
                    )?;
                }
                Phase::Resolved => {
                    self.emit(
                        ts,
                        EventBody::SessionEnd {
                            coins: self.coins,
                            correct: self.correct,
                            wrong: self.wrong,
                            timeouts: self.timeouts,
                        },
                    )?;
                }
                Phase::Open | Phase::Ended => return Ok(()),
            }
        }
    }

    fn clone_for_round(&self, round: u8) -> Session {
        Session {
            round,
            chosen_extra: None,
            log: Vec::new(),
            ..self.clone()
        }
    }

    fn emit(&mut self, timestamp: u64, body: EventBody) -> Result<(), SessionError> {
        let ev = EventRecord {
            seq: self.log.len() as u64,
            timestamp,
            session_id: Some(self.id.clone()),
            body,
        };
        self.apply(&ev)
    }

    /// Applies one logged event, checking it against what the engine would
    /// have produced.
    pub fn apply(&mut self, ev: &EventRecord) -> Result<(), SessionError> {
        let corrupt = |msg: String| SessionError::CorruptLog(format!("seq {}: {msg}", ev.seq));
        if ev.seq != self.log.len() as u64 {
            return Err(corrupt(format!("expected seq {}", self.log.len())));
        }
        if ev.session_id.as_deref() != Some(self.id.as_str()) {
            return Err(corrupt("foreign session id".into()));
        }
        if ev.timestamp < self.last_timestamp {
            return Err(corrupt("timestamp went backwards".into()));
        }
        match &ev.body {
            EventBody::RoundStart {
                round, market_prev, ..
            } => {
                if self.phase != Phase::Resolved || *round != self.round + 1 {
                    return Err(corrupt(format!("unexpected start of round {round}")));
                }
                if *market_prev != self.market_move(*round)?.0 {
                    return Err(corrupt("market_prev mismatch".into()));
                }
                self.round = *round;
                self.phase = Phase::Open;
                self.viewed.clear();
                self.chosen_extra = None;
                self.round_opened_at = ev.timestamp;
                self.last_elapsed_ms = 0;
            }
            EventBody::PanelView {
                round, kind, elapsed_ms, ..
            } => {
                if self.phase != Phase::Open || *round != self.round {
                    return Err(corrupt("panel view outside open round".into()));
                }
                if self.scenario.panel_selection == PanelSelection::OneExtraChosen
                    && !kind.is_home()
                    && self.chosen_extra.is_none()
                {
                    self.chosen_extra = Some(*kind);
                }
                if !self.round_panels().contains(kind) {
                    return Err(corrupt(format!("panel {kind} not visible")));
                }
                self.viewed.insert(*kind);
                self.last_elapsed_ms = *elapsed_ms;
            }
            EventBody::Guess {
                round,
                direction,
                elapsed_ms,
            } => {
                if self.phase != Phase::Open || *round != self.round {
                    return Err(corrupt("guess outside open round".into()));
                }
                self.phase = Phase::Decided;
                self.pending_decision = Some(Some(*direction));
                self.last_elapsed_ms = *elapsed_ms;
            }
            EventBody::Timeout { round } => {
                if self.phase != Phase::Open || *round != self.round {
                    return Err(corrupt("timeout outside open round".into()));
                }
                self.phase = Phase::Decided;
                self.pending_decision = Some(None);
            }
            EventBody::RoundResult {
                round,
                outcome,
                market_next,
                coins_after,
            } => {
                if self.phase != Phase::Decided || *round != self.round {
                    return Err(corrupt("result without decision".into()));
                }
                let decision = self.pending_decision.take().expect("decided");
                let (_, actual) = self.market_move(*round)?;
                let expected = decision.map(|g| outcome_of(g, actual));
                if *market_next != actual || *outcome != expected {
                    return Err(corrupt("result does not match market".into()));
                }
                let expected_coins = match expected {
                    Some(Outcome::Correct) => self.coins * WIN_FACTOR,
                    Some(Outcome::Wrong) => self.coins * LOSS_FACTOR,
                    None => self.coins,
                };
                if *coins_after != expected_coins {
                    return Err(corrupt(format!("coins {coins_after} != {expected_coins}")));
                }
                match expected {
                    Some(Outcome::Correct) => self.correct += 1,
                    Some(Outcome::Wrong) => self.wrong += 1,
                    None => self.timeouts += 1,
                }
                self.coins = expected_coins;
                self.phase = Phase::Resolved;
            }
            EventBody::SessionEnd { .. } => {
                if self.phase != Phase::Resolved || (self.round as usize) < ROUNDS {
                    return Err(corrupt("premature session end".into()));
                }
                self.phase = Phase::Ended;
            }
            EventBody::Register { .. } | EventBody::SessionStart { .. } => {
                return Err(corrupt("duplicate session header".into()));
            }
        }
        self.projector
            .apply(ev)
            .map_err(|e| SessionError::CorruptLog(e.to_string()))?;
        self.last_timestamp = ev.timestamp;
        self.log.push(ev.clone());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{AgeBand, Education, Gender, Group, Guess};
    use crate::market::{PricePoint, CONTEXT_POINTS};
    use crate::session::scenario::scenario_spec;
    use crate::session::EventType;
    use chrono::NaiveDate;

    pub(crate) fn dataset(n: usize) -> Dataset {
        let start = NaiveDate::from_ymd_opt(2006, 1, 2).unwrap();
        let series = (0..n)
            .map(|k| {
                let points = (0..60)
                    .map(|i| PricePoint {
                        date: start + chrono::Days::new(i),
                        close: 100.0 + ((i as f64) * (0.9 + k as f64 * 0.13)).sin() * 3.0 + i as f64 * 0.01,
                    })
                    .collect();
                PriceSeries::new(format!("S{k:02}"), points, CONTEXT_POINTS).unwrap()
            })
            .collect();
        Dataset::from_series(series)
    }

    fn cohort() -> CohortKey {
        CohortKey {
            gender: Gender::F,
            age_band: AgeBand::From26To35,
            education: Education::University,
        }
    }

    fn start(scenario: u8, group: Group, seed: u64) -> Session {
        Session::start(
            SessionParams {
                session_id: "s-1".into(),
                participant_id: "p-1".into(),
                cohort: cohort(),
                scenario: scenario_spec(scenario, group).unwrap(),
                seed,
            },
            &dataset(5),
            1_000_000,
        )
        .unwrap()
    }

    fn secs(s: f64) -> Duration {
        Duration::from_secs_f64(s)
    }

    #[test]
    fn start_emits_header_and_first_round() {
        let s = start(1, Group::A, 3);
        let types: Vec<EventType> = s.log().iter().map(|e| e.event_type()).collect();
        assert_eq!(types, vec![EventType::Register, EventType::SessionStart, EventType::RoundStart]);
        assert_eq!(s.round(), 1);
        assert_eq!(s.coins(), 1000.0);
    }

    #[test]
    fn empty_pool() {
        let err = Session::start(
            SessionParams {
                session_id: "s".into(),
                participant_id: "p".into(),
                cohort: cohort(),
                scenario: scenario_spec(1, Group::A).unwrap(),
                seed: 1,
            },
            &Dataset::from_series(vec![]),
            0,
        )
        .unwrap_err();
        assert_eq!(err, SessionError::EmptyPool);
    }

    #[test]
    fn same_seed_same_series_and_oracle() {
        let a = start(1, Group::A, 77);
        let b = start(1, Group::A, 77);
        assert_eq!(a.series().symbol(), b.series().symbol());
        for r in 1..=25 {
            assert_eq!(a.generate_expert_advice(r).unwrap(), b.generate_expert_advice(r).unwrap());
        }
    }

    #[test]
    fn pool_of_one() {
        let s = Session::start(
            SessionParams {
                session_id: "s".into(),
                participant_id: "p".into(),
                cohort: cohort(),
                scenario: scenario_spec(1, Group::A).unwrap(),
                seed: 12345,
            },
            &dataset(1),
            0,
        )
        .unwrap();
        assert_eq!(s.series().symbol(), "S00");
    }

    #[test]
    fn payoff_examples() {
        let mut s = start(1, Group::A, 5);
        let (_, next) = s.market_move(1).unwrap();
        let r = s.submit_guess(next, secs(2.0)).unwrap();
        assert_eq!(r.outcome, Some(Outcome::Correct));
        assert_eq!(s.coins(), 1050.0);
        let (_, next) = s.market_move(2).unwrap();
        s.submit_guess(!next, secs(2.0)).unwrap();
        assert!((s.coins() - 997.5).abs() < 1e-9);
    }

    #[test]
    fn overtime_rejected() {
        let mut s = start(1, Group::A, 5);
        let err = s.submit_guess(Direction::Up, secs(31.0)).unwrap_err();
        assert!(matches!(err, SessionError::OverTime { .. }));
        assert!(s.submit_guess(Direction::Up, secs(30.0)).is_ok());
        let mut s = start(1, Group::B, 5);
        assert!(matches!(
            s.submit_guess(Direction::Up, secs(10.5)),
            Err(SessionError::OverTime { .. })
        ));
    }

    #[test]
    fn timeout_keeps_coins_and_closes_round() {
        let mut s = start(1, Group::A, 5);
        let r = s.handle_timeout().unwrap();
        assert_eq!(r.guess, Guess::Timeout);
        assert_eq!(r.outcome, None);
        assert_eq!(s.coins(), 1000.0);
        assert_eq!(s.round(), 2);
        // The timed-out round is gone; a guess now lands on round 2.
        let r = s.submit_guess(Direction::Up, secs(1.0)).unwrap();
        assert_eq!(r.round_index, 2);
    }

    #[test]
    fn timeout_then_guess_on_closed_round() {
        let mut s = start(1, Group::A, 5);
        for _ in 0..24 {
            s.submit_guess(Direction::Up, secs(1.0)).unwrap();
        }
        s.handle_timeout().unwrap();
        assert!(s.is_ended());
        assert_eq!(s.log().last().unwrap().event_type(), EventType::SessionEnd);
        assert_eq!(s.submit_guess(Direction::Up, secs(1.0)).unwrap_err(), SessionError::RoundClosed);
        assert_eq!(s.handle_timeout().unwrap_err(), SessionError::RoundClosed);
    }

    #[test]
    fn exactly_25_results() {
        let mut s = start(2, Group::A, 8);
        for i in 0..25 {
            if i % 7 == 3 {
                s.handle_timeout().unwrap();
            } else {
                s.submit_guess(Direction::Down, secs(0.5)).unwrap();
            }
        }
        let results = s
            .log()
            .iter()
            .filter(|e| e.event_type() == EventType::RoundResult)
            .count();
        assert_eq!(results, 25);
        assert_eq!(s.records().len(), 25);
    }

    #[test]
    fn gating_scenario_two_group_b() {
        let mut s = start(2, Group::B, 4);
        assert!(s.view_panel(PanelKind::PriceChart, secs(0.1)).is_ok());
        assert_eq!(
            s.view_panel(PanelKind::Ma5, secs(0.2)).unwrap_err(),
            SessionError::PanelNotAllowed(PanelKind::Ma5)
        );
        assert_eq!(
            s.view_panel(PanelKind::Expert, secs(0.2)).unwrap_err(),
            SessionError::PanelNotAllowed(PanelKind::Expert)
        );
    }

    #[test]
    fn chosen_extra_locks_after_first_view() {
        let mut s = start(3, Group::B, 4);
        assert!(s.round_view().choice_required);
        s.view_panel(PanelKind::Expert, secs(1.0)).unwrap();
        assert_eq!(
            s.round_view().panels,
            vec![PanelKind::PriceChart, PanelKind::Expert]
        );
        assert_eq!(
            s.view_panel(PanelKind::Intraday, secs(1.5)).unwrap_err(),
            SessionError::PanelNotAllowed(PanelKind::Intraday)
        );
        let r = s.submit_guess(Direction::Up, secs(2.0)).unwrap();
        assert!(r.expert_consulted);
        assert!(r.expert_advice.is_some());
        // Next round offers the candidates again.
        assert!(s.round_view().choice_required);
    }

    #[test]
    fn random_extra_follows_plan() {
        let mut s = start(3, Group::A, 21);
        for round in 1..=25u8 {
            let extra = s.plan.extra_for(round);
            assert_eq!(s.round_view().panels, vec![PanelKind::PriceChart, extra]);
            s.view_panel(extra, secs(0.5)).unwrap();
            s.submit_guess(Direction::Up, secs(1.0)).unwrap();
        }
    }

    #[test]
    fn rebuild_equals_live() {
        let mut s = start(1, Group::A, 9);
        s.view_panel(PanelKind::Expert, secs(0.4)).unwrap();
        s.submit_guess(Direction::Up, secs(1.0)).unwrap();
        s.view_panel(PanelKind::Ma30, secs(0.4)).unwrap();
        let rebuilt = Session::rebuild(s.log(), &dataset(5)).unwrap();
        assert_eq!(rebuilt.snapshot(), s.snapshot());
        assert_eq!(rebuilt.records(), s.records());
    }

    #[test]
    fn torn_log_is_completed() {
        let mut s = start(1, Group::A, 9);
        s.submit_guess(Direction::Up, secs(1.0)).unwrap();
        let full = s.log().to_vec();
        // Cut right after the guess.
        let cut = full.iter().position(|e| e.event_type() == EventType::Guess).unwrap() + 1;
        let mut rebuilt = Session::rebuild(&full[..cut], &dataset(5)).unwrap();
        assert_eq!(rebuilt.phase(), Phase::Decided);
        assert_eq!(rebuilt.complete_pending().unwrap(), 2);
        assert_eq!(rebuilt.log(), &full[..]);
    }

    #[test]
    fn tampered_log_is_rejected() {
        let mut s = start(1, Group::A, 9);
        s.submit_guess(Direction::Up, secs(1.0)).unwrap();
        let mut log = s.log().to_vec();
        for e in log.iter_mut() {
            if let EventBody::RoundResult { coins_after, .. } = &mut e.body {
                *coins_after += 1.0;
            }
        }
        assert!(matches!(
            Session::rebuild(&log, &dataset(5)),
            Err(SessionError::CorruptLog(_))
        ));
    }

    #[test]
    fn expert_phrase_and_direction() {
        let s = start(1, Group::A, 11);
        for r in 1..=25 {
            let a = s.generate_expert_advice(r).unwrap();
            let (_, next) = s.market_move(r).unwrap();
            assert_eq!(a.stated_direction == next, a.is_truthful);
        }
    }
}
