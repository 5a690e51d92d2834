use std::collections::BTreeSet;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::agent::{agent_step, check_prob, AgentContext, AgentKind};
use super::SimError;
use crate::domain::{outcome_of, CohortKey, Direction, Group, Guess, Outcome, PanelKind, RoundRecord, TrendLabel};
use crate::market::{direction_at, trend_label, Dataset, PriceSeries, DEFAULT_FLAT_THRESHOLD, ROUNDS};
use crate::session::{scenario_spec, ScenarioSpec, EXPERT_RELIABILITY, INITIAL_COINS, LOSS_FACTOR, WIN_FACTOR};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub kind: AgentKind,
    pub seed: u64,
    #[serde(default)]
    pub cohort: Option<CohortKey>,
}

/// Where market directions come from.
#[derive(Clone, Debug)]
pub enum MarketSpec {
    IidBernoulli { p_up: f64 },
    /// Each session plays the playable window of one series drawn uniformly.
    FromSeries(Vec<Arc<PriceSeries>>),
}

/// Log-normal decision time, optionally growing with panels consulted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimeModel {
    pub median_secs: f64,
    pub sigma: f64,
    pub secs_per_panel: f64,
    /// Times beyond the limit become timeouts instead of being clamped.
    pub allow_timeouts: bool,
}

impl Default for TimeModel {
    fn default() -> Self {
        TimeModel {
            median_secs: 3.431,
            sigma: 0.9,
            secs_per_panel: 0.0,
            allow_timeouts: false,
        }
    }
}

/// Each non-home panel is opened independently with `view_prob`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PanelModel {
    pub view_prob: f64,
}

impl Default for PanelModel {
    fn default() -> Self {
        PanelModel { view_prob: 0.18 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PopulationConfig {
    pub rounds: u8,
    pub sessions_per_agent: usize,
    pub scenario_id: u8,
    pub group: Group,
    pub time: TimeModel,
    pub panels: PanelModel,
    pub expert_reliability: f64,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        PopulationConfig {
            rounds: ROUNDS as u8,
            sessions_per_agent: 1,
            scenario_id: 1,
            group: Group::A,
            time: TimeModel::default(),
            panels: PanelModel::default(),
            expert_reliability: EXPERT_RELIABILITY,
        }
    }
}

impl PopulationConfig {
    pub fn scenario(&self) -> Result<ScenarioSpec, SimError> {
        scenario_spec(self.scenario_id, self.group).map_err(|e| SimError::InvalidSpec(e.to_string()))
    }

    fn validate(&self) -> Result<ScenarioSpec, SimError> {
        if !(2..=ROUNDS as u8).contains(&self.rounds) {
            return Err(SimError::InvalidSpec(format!("rounds {} outside 2..=25", self.rounds)));
        }
        if self.sessions_per_agent == 0 {
            return Err(SimError::InvalidSpec("sessions_per_agent must be positive".into()));
        }
        check_prob("view_prob", self.panels.view_prob)?;
        check_prob("expert_reliability", self.expert_reliability)?;
        if !(self.time.median_secs > 0.0 && self.time.sigma >= 0.0 && self.time.secs_per_panel >= 0.0) {
            return Err(SimError::InvalidSpec("time model parameters out of range".into()));
        }
        self.scenario()
    }
}

const EXTRA_PANELS: [PanelKind; 6] = [
    PanelKind::Ma5,
    PanelKind::Ma30,
    PanelKind::Intraday,
    PanelKind::Expert,
    PanelKind::MarketArrows,
    PanelKind::WorldIndices,
];

/// Market moves for one session: element 0 is the move before round 1.
fn session_market(market: &MarketSpec, rounds: u8, rng: &mut ChaCha8Rng) -> Result<(Vec<Direction>, Option<TrendLabel>), SimError> {
    match market {
        MarketSpec::IidBernoulli { p_up } => Ok((
            (0..=rounds)
                .map(|_| if rng.random_bool(*p_up) { Direction::Up } else { Direction::Down })
                .collect(),
            None,
        )),
        MarketSpec::FromSeries(pool) => {
            let series = &pool[rng.random_range(0..pool.len())];
            let first = series.playable_start() - 1;
            let moves = (0..=rounds as usize)
                .map(|k| direction_at(series, first + k))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((moves, Some(trend_label(series, DEFAULT_FLAT_THRESHOLD)?)))
        }
    }
}

/// Seeded decision logs for every agent, ordered by agent then session.
pub fn run_population(agents: &[AgentSpec], market: &MarketSpec, config: &PopulationConfig) -> Result<Vec<RoundRecord>, SimError> {
    let scenario = config.validate()?;
    match market {
        MarketSpec::IidBernoulli { p_up } => check_prob("market p_up", *p_up)?,
        MarketSpec::FromSeries(pool) if pool.is_empty() => {
            return Err(SimError::InvalidSpec("empty series pool".into()));
        }
        MarketSpec::FromSeries(_) => {}
    }
    for a in agents {
        a.kind.validate()?;
    }
    let limit = f64::from(scenario.time_limit_secs);
    let mut records = Vec::with_capacity(agents.len() * config.sessions_per_agent * config.rounds as usize);
    for (ai, agent) in agents.iter().enumerate() {
        for s in 0..config.sessions_per_agent {
            let mut rng = ChaCha8Rng::seed_from_u64(agent.seed);
            rng.set_stream(s as u64);
            let (moves, trend) = session_market(market, config.rounds, &mut rng)?;
            let mut coins = INITIAL_COINS;
            let mut prev: Option<(Direction, Outcome)> = None;
            for round in 1..=config.rounds {
                let market_prev = moves[round as usize - 1];
                let market_next = moves[round as usize];
                let truthful = rng.random_bool(config.expert_reliability);
                let advice = if truthful { market_next } else { !market_next };
                let mut panels: BTreeSet<PanelKind> = [PanelKind::PriceChart].into();
                for kind in EXTRA_PANELS {
                    if rng.random_bool(config.panels.view_prob) {
                        panels.insert(kind);
                    }
                }
                if agent.kind.always_consults_expert() {
                    panels.insert(PanelKind::Expert);
                }
                let consulted = panels.contains(&PanelKind::Expert);
                let z: f64 = rng.sample(StandardNormal);
                let extras = (panels.len() - 1) as f64;
                let raw = config.time.median_secs * (config.time.sigma * z).exp() + config.time.secs_per_panel * extras;
                let ctx = AgentContext {
                    market_prev: Some(market_prev),
                    prev_guess: prev.map(|p| p.0),
                    prev_outcome: prev.map(|p| p.1),
                    advice: consulted.then_some(advice),
                };
                let decision = agent_step(&agent.kind, &ctx, &mut rng)?;
                let timed_out = config.time.allow_timeouts && raw > limit;
                let (guess, outcome, decision_time) = if timed_out {
                    (Guess::Timeout, None, limit)
                } else {
                    let ms = (raw.min(limit) * 1000.0).round();
                    let o = outcome_of(decision, market_next);
                    (Guess::from(decision), Some(o), ms / 1000.0)
                };
                match outcome {
                    Some(Outcome::Correct) => coins *= WIN_FACTOR,
                    Some(Outcome::Wrong) => coins *= LOSS_FACTOR,
                    None => {}
                }
                prev = outcome.map(|o| (decision, o));
                records.push(RoundRecord {
                    participant_id: format!("agent-{ai:04}"),
                    session_id: format!("agent-{ai:04}-s{s:04}"),
                    scenario_id: config.scenario_id,
                    group: Some(config.group),
                    round_index: round,
                    guess,
                    market_prev,
                    market_next,
                    outcome,
                    decision_time,
                    panels_viewed: panels,
                    expert_consulted: consulted,
                    expert_advice: consulted.then_some(advice),
                    coins_after: coins,
                    cohort: agent.cohort,
                    trend,
                });
            }
        }
    }
    Ok(records)
}

/// A group of identical agents in a simulation spec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentGroup {
    #[serde(flatten)]
    pub kind: AgentKind,
    #[serde(default = "one")]
    pub count: usize,
    #[serde(default)]
    pub cohort: Option<CohortKey>,
}

fn one() -> usize {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum MarketConfig {
    IidBernoulli { p_up: f64 },
    /// Series from the configured dataset.
    Dataset,
}

/// Simulation spec file: agents, market, rounds and seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub seed: u64,
    pub agents: Vec<AgentGroup>,
    pub market: MarketConfig,
    #[serde(default)]
    pub population: PopulationConfig,
}

impl SimSpec {
    /// Expands agent groups; each agent gets its own seed derived from `SimSpec::seed`.
    pub fn agents(&self) -> Vec<AgentSpec> {
        let mut seeder = ChaCha8Rng::seed_from_u64(self.seed);
        self.agents
            .iter()
            .flat_map(|g| std::iter::repeat_n(g, g.count))
            .map(|g| AgentSpec {
                kind: g.kind.clone(),
                seed: seeder.next_u64(),
                cohort: g.cohort,
            })
            .collect()
    }

    pub fn market_spec(&self, dataset: Option<&Dataset>) -> Result<MarketSpec, SimError> {
        match self.market {
            MarketConfig::IidBernoulli { p_up } => Ok(MarketSpec::IidBernoulli { p_up }),
            MarketConfig::Dataset => {
                let d = dataset.ok_or_else(|| SimError::InvalidSpec("market mode dataset needs a dataset".into()))?;
                Ok(MarketSpec::FromSeries(d.series.clone()))
            }
        }
    }

    pub fn run(&self, dataset: Option<&Dataset>) -> Result<Vec<RoundRecord>, SimError> {
        run_population(&self.agents(), &self.market_spec(dataset)?, &self.population)
    }
}
