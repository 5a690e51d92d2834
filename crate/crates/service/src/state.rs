//! Live service state: the participant registry and one actor per session,
//! all rebuilt from the event log at startup.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use mrbanks_core::domain::{CohortKey, Direction, Group, Guess, Outcome, PanelKind, RoundRecord};
use mrbanks_core::market::{Dataset, PanelContent};
use mrbanks_core::session::{
    assign_group_with, EventBody, EventRecord, Phase, RoundView, Session, SessionError, SessionParams,
};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::ServiceConfig;
use crate::store::{EventLog, StoreError};

pub trait Clock: Send + Sync {
    /// Milliseconds since the Unix epoch.
    fn now_ms(&self) -> u64;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

/// Clock moved by hand, for tests and replays.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn new(start_ms: u64) -> Self {
        ManualClock(AtomicU64::new(start_ms))
    }

    pub fn set(&self, ms: u64) {
        self.0.store(ms, Ordering::SeqCst);
    }

    pub fn advance(&self, ms: u64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{what} {id} not found")]
    NotFound { what: &'static str, id: String },
    #[error("scenario {0} is disabled")]
    ScenarioDisabled(u8),
    #[error("request is for round {requested} but round {current} is open")]
    StaleRound { requested: u8, current: u8 },
    #[error("bad manifest: {0}")]
    BadManifest(String),
    #[error("event log does not replay: {0}")]
    Replay(String),
}

/// Seed of the `index`-th session under deployment seed `root`.
pub fn session_seed(root: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(index);
    rng.next_u64()
}

#[derive(Debug, Default)]
struct Registry {
    participants: HashMap<String, CohortKey>,
    sessions_started: u64,
    per_scenario: [u64; 5],
}

/// Client-visible state of a session's current round.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundState {
    pub session_id: String,
    pub round: u8,
    /// `open`, or `ended` once all rounds are played.
    pub status: &'static str,
    pub coins: f64,
    pub correct: u32,
    pub wrong: u32,
    pub time_limit_secs: u32,
    pub opened_at: u64,
    pub deadline: u64,
    pub server_time: u64,
    pub panels: Vec<PanelKind>,
    pub choice_required: bool,
    pub viewed: Vec<PanelKind>,
    pub trend_warning: bool,
}

impl RoundState {
    fn of(session: &Session, now: u64) -> Self {
        let RoundView {
            round,
            phase,
            coins,
            time_limit_secs,
            opened_at,
            panels,
            choice_required,
            viewed,
            trend_warning,
        } = session.round_view();
        let ended = phase == Phase::Ended;
        RoundState {
            session_id: session.id().to_string(),
            round,
            status: if ended { "ended" } else { "open" },
            coins,
            correct: session.correct(),
            wrong: session.wrong(),
            time_limit_secs,
            opened_at,
            deadline: opened_at + u64::from(time_limit_secs) * 1000,
            server_time: now,
            panels: if ended { Vec::new() } else { panels },
            choice_required: !ended && choice_required,
            viewed,
            trend_warning,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub participant_id: String,
    pub scenario_id: u8,
    pub scenario_name: &'static str,
    pub group: Group,
    pub current: RoundState,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PanelViewed {
    pub round: u8,
    pub content: PanelContent,
}

/// Feedback for a resolved round, with the state of the next one.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundResolved {
    pub round: u8,
    pub guess: Guess,
    pub outcome: Option<Outcome>,
    pub market_next: Direction,
    pub coins_after: f64,
    pub current: RoundState,
}

impl RoundResolved {
    fn of(record: &RoundRecord, session: &Session, now: u64) -> Self {
        RoundResolved {
            round: record.round_index,
            guess: record.guess,
            outcome: record.outcome,
            market_next: record.market_next,
            coins_after: record.coins_after,
            current: RoundState::of(session, now),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LeaderboardEntry {
    pub rank: usize,
    pub participant_id: String,
    pub session_id: String,
    pub scenario_id: u8,
    pub coins: f64,
    pub rounds_played: usize,
    pub finished: bool,
}

pub struct AppState {
    config: ServiceConfig,
    dataset: Arc<Dataset>,
    log: EventLog,
    clock: Arc<dyn Clock>,
    registry: Mutex<Registry>,
    sessions: RwLock<BTreeMap<String, Arc<tokio::sync::Mutex<Session>>>>,
}

impl AppState {
    /// Opens the configured log and folds it into live state. Sessions whose
    /// log stops between a decision and its result are completed and the
    /// missing events appended.
    pub fn open(config: ServiceConfig, dataset: Arc<Dataset>, clock: Arc<dyn Clock>) -> Result<Self, ServiceError> {
        if dataset.series.is_empty() {
            return Err(ServiceError::BadManifest("no playable series".into()));
        }
        let (log, loaded) = EventLog::open(&config.log_path)?;
        let mut registry = Registry::default();
        let mut streams: BTreeMap<String, Vec<EventRecord>> = BTreeMap::new();
        for ev in loaded.events {
            match &ev.session_id {
                None => {
                    if let EventBody::Register { participant_id, cohort } = &ev.body {
                        registry.participants.insert(participant_id.clone(), *cohort);
                    }
                }
                Some(id) => streams.entry(id.clone()).or_default().push(ev),
            }
        }
        let mut sessions = BTreeMap::new();
        for (id, events) in streams {
            if !events.iter().any(|e| matches!(e.body, EventBody::SessionStart { .. })) {
                // Start torn before it was acknowledged; keep its id burnt.
                registry.sessions_started += 1;
                continue;
            }
            let mut session =
                Session::rebuild(&events, &dataset).map_err(|e| ServiceError::Replay(format!("{id}: {e}")))?;
            let before = session.log().len();
            session.complete_pending()?;
            log.append(&session.log()[before..])?;
            registry.sessions_started += 1;
            registry.per_scenario[session.scenario().scenario_id as usize] += 1;
            sessions.insert(id, Arc::new(tokio::sync::Mutex::new(session)));
        }
        Ok(AppState {
            config,
            dataset,
            log,
            clock,
            registry: Mutex::new(registry),
            sessions: RwLock::new(sessions),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn now_ms(&self) -> u64 {
        self.clock.now_ms()
    }

    pub fn register(&self, cohort: CohortKey) -> Result<String, ServiceError> {
        let mut reg = self.registry.lock().unwrap_or_else(|p| p.into_inner());
        let participant_id = format!("p{:06}", reg.participants.len() + 1);
        self.log.append(&[EventRecord {
            seq: 0,
            timestamp: self.now_ms(),
            session_id: None,
            body: EventBody::Register {
                participant_id: participant_id.clone(),
                cohort,
            },
        }])?;
        reg.participants.insert(participant_id.clone(), cohort);
        Ok(participant_id)
    }

    pub fn start_session(&self, participant_id: &str, scenario_id: u8) -> Result<SessionCreated, ServiceError> {
        if !(1..=4).contains(&scenario_id) {
            return Err(SessionError::UnknownScenario(scenario_id).into());
        }
        if !self.config.scenario_enabled(scenario_id) {
            return Err(ServiceError::ScenarioDisabled(scenario_id));
        }
        let mut reg = self.registry.lock().unwrap_or_else(|p| p.into_inner());
        let cohort = *reg.participants.get(participant_id).ok_or_else(|| ServiceError::NotFound {
            what: "participant",
            id: participant_id.to_string(),
        })?;
        let index = reg.sessions_started;
        let scenario = assign_group_with(self.config.assignment, scenario_id, reg.per_scenario[scenario_id as usize])?;
        let session_id = format!("s{:06}", index + 1);
        let now = self.now_ms();
        let session = Session::start(
            SessionParams {
                session_id: session_id.clone(),
                participant_id: participant_id.to_string(),
                cohort,
                scenario,
                seed: session_seed(self.config.seed, index),
            },
            &self.dataset,
            now,
        )?;
        self.log.append(session.log())?;
        reg.sessions_started += 1;
        reg.per_scenario[scenario_id as usize] += 1;
        let created = SessionCreated {
            session_id: session_id.clone(),
            participant_id: participant_id.to_string(),
            scenario_id,
            scenario_name: session.scenario().name(),
            group: session.scenario().group,
            current: RoundState::of(&session, now),
        };
        self.sessions
            .write()
            .unwrap_or_else(|p| p.into_inner())
            .insert(session_id, Arc::new(tokio::sync::Mutex::new(session)));
        Ok(created)
    }

    fn handle(&self, id: &str) -> Result<Arc<tokio::sync::Mutex<Session>>, ServiceError> {
        self.sessions
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound {
                what: "session",
                id: id.to_string(),
            })
    }

    /// Runs `op` on a copy of the session and commits the copy once its new
    /// events are on disk. Rounds whose time ran out are timed out first.
    async fn mutate<T>(
        &self,
        id: &str,
        op: impl FnOnce(&mut Session, u64) -> Result<T, ServiceError>,
    ) -> Result<T, ServiceError> {
        let handle = self.handle(id)?;
        let mut guard = handle.lock().await;
        let now = self.now_ms();
        self.commit(&mut guard, |s| expire(s, now))?;
        self.commit(&mut guard, |s| op(s, now))
    }

    fn commit<T>(
        &self,
        live: &mut Session,
        op: impl FnOnce(&mut Session) -> Result<T, ServiceError>,
    ) -> Result<T, ServiceError> {
        let mut next = live.clone();
        let before = next.log().len();
        let out = op(&mut next)?;
        self.log.append(&next.log()[before..])?;
        *live = next;
        Ok(out)
    }

    pub async fn current_round(&self, id: &str) -> Result<RoundState, ServiceError> {
        self.mutate(id, |s, now| Ok(RoundState::of(s, now))).await
    }

    pub async fn view_panel(&self, id: &str, kind: PanelKind, round: Option<u8>) -> Result<PanelViewed, ServiceError> {
        self.mutate(id, |s, now| {
            check_round(s, round)?;
            let elapsed = now.saturating_sub(s.round_opened_at());
            let content = s.view_panel(kind, Duration::from_millis(elapsed))?;
            Ok(PanelViewed {
                round: s.round(),
                content,
            })
        })
        .await
    }

    pub async fn guess(&self, id: &str, direction: Direction, round: Option<u8>) -> Result<RoundResolved, ServiceError> {
        self.mutate(id, |s, now| {
            check_round(s, round)?;
            let elapsed = now.saturating_sub(s.round_opened_at());
            let record = s.submit_guess(direction, Duration::from_millis(elapsed))?;
            Ok(RoundResolved::of(&record, s, now))
        })
        .await
    }

    /// Highest coin totals across sessions, ties broken by session id.
    pub async fn leaderboard(&self) -> Vec<LeaderboardEntry> {
        let handles: Vec<_> = self
            .sessions
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .values()
            .cloned()
            .collect();
        let mut rows = Vec::with_capacity(handles.len());
        for h in handles {
            let s = h.lock().await;
            rows.push(LeaderboardEntry {
                rank: 0,
                participant_id: s.participant_id().to_string(),
                session_id: s.id().to_string(),
                scenario_id: s.scenario().scenario_id,
                coins: s.coins(),
                rounds_played: s.records().len(),
                finished: s.is_ended(),
            });
        }
        rows.sort_by(|a, b| b.coins.total_cmp(&a.coins).then_with(|| a.session_id.cmp(&b.session_id)));
        rows.truncate(self.config.leaderboard_size);
        for (i, r) in rows.iter_mut().enumerate() {
            r.rank = i + 1;
        }
        rows
    }

    /// The on-disk log. Without `live`, events of unfinished sessions are
    /// left out.
    pub async fn export(&self, live: bool) -> Result<String, ServiceError> {
        let loaded = self.log.read()?;
        let mut ended = std::collections::HashSet::new();
        if !live {
            let handles: Vec<_> = self
                .sessions
                .read()
                .unwrap_or_else(|p| p.into_inner())
                .iter()
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect();
            for (id, h) in handles {
                if h.lock().await.is_ended() {
                    ended.insert(id);
                }
            }
        }
        let mut out = String::new();
        for ev in loaded.events {
            let keep = live || ev.session_id.as_ref().is_none_or(|id| ended.contains(id));
            if keep {
                out.push_str(&ev.to_json_line());
                out.push('\n');
            }
        }
        Ok(out)
    }

    /// Copy of a session, for inspection.
    pub async fn session(&self, id: &str) -> Result<Session, ServiceError> {
        Ok(self.handle(id)?.lock().await.clone())
    }

    pub fn session_ids(&self) -> Vec<String> {
        self.sessions
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .keys()
            .cloned()
            .collect()
    }
}

fn expire(s: &mut Session, now: u64) -> Result<(), ServiceError> {
    while s.phase() == Phase::Open && now > s.round_opened_at() + s.scenario().time_limit_ms() {
        s.handle_timeout()?;
    }
    Ok(())
}

fn check_round(s: &Session, requested: Option<u8>) -> Result<(), ServiceError> {
    if s.is_ended() {
        return Err(SessionError::RoundClosed.into());
    }
    match requested {
        Some(r) if r != s.round() => Err(ServiceError::StaleRound {
            requested: r,
            current: s.round(),
        }),
        _ => Ok(()),
    }
}
