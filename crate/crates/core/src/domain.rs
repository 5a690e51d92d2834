//! Shared vocabulary: directions, outcomes, decision records, probability
//! estimates and cohort keys.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Direction of a daily price move, or of a participant's guess about it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    pub const ALL: [Direction; 2] = [Direction::Up, Direction::Down];

    pub fn opposite(self) -> Self {
        match self {
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
        }
    }
}

impl std::ops::Not for Direction {
    type Output = Direction;

    fn not(self) -> Direction {
        self.opposite()
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Feedback shown after a guess.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Correct,
    Wrong,
}

impl Outcome {
    pub const ALL: [Outcome; 2] = [Outcome::Correct, Outcome::Wrong];

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Correct => "correct",
            Outcome::Wrong => "wrong",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A submitted guess. A timeout is its own state and never maps to a direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Guess {
    Up,
    Down,
    Timeout,
}

impl Guess {
    pub fn direction(self) -> Option<Direction> {
        match self {
            Guess::Up => Some(Direction::Up),
            Guess::Down => Some(Direction::Down),
            Guess::Timeout => None,
        }
    }

    pub fn is_timeout(self) -> bool {
        matches!(self, Guess::Timeout)
    }
}

impl From<Direction> for Guess {
    fn from(d: Direction) -> Self {
        match d {
            Direction::Up => Guess::Up,
            Direction::Down => Guess::Down,
        }
    }
}

/// Feedback rule: a guess is correct iff it matches the realized move.
pub fn outcome_of(guess: Direction, realized: Direction) -> Outcome {
    if guess == realized {
        Outcome::Correct
    } else {
        Outcome::Wrong
    }
}

/// True when a guess repeats the previous one.
pub fn repeat_flag(prev_guess: Direction, guess: Direction) -> bool {
    prev_guess == guess
}

/// Information views offered to participants. `PriceChart` is the home screen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PanelKind {
    PriceChart,
    #[serde(rename = "ma5")]
    Ma5,
    #[serde(rename = "ma30")]
    Ma30,
    Intraday,
    Expert,
    MarketArrows,
    WorldIndices,
}

impl PanelKind {
    pub const ALL: [PanelKind; 7] = [
        PanelKind::PriceChart,
        PanelKind::Ma5,
        PanelKind::Ma30,
        PanelKind::Intraday,
        PanelKind::Expert,
        PanelKind::MarketArrows,
        PanelKind::WorldIndices,
    ];

    /// Screens reachable from the home screen through the navigation buttons.
    pub const SCREENS: [PanelKind; 4] = [
        PanelKind::Intraday,
        PanelKind::Expert,
        PanelKind::MarketArrows,
        PanelKind::WorldIndices,
    ];

    pub fn is_home(self) -> bool {
        self == PanelKind::PriceChart
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PanelKind::PriceChart => "price_chart",
            PanelKind::Ma5 => "ma5",
            PanelKind::Ma30 => "ma30",
            PanelKind::Intraday => "intraday",
            PanelKind::Expert => "expert",
            PanelKind::MarketArrows => "market_arrows",
            PanelKind::WorldIndices => "world_indices",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        PanelKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for PanelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Trend of a 25-day playable window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrendLabel {
    Bullish,
    Bearish,
    Flat,
}

impl TrendLabel {
    pub const ALL: [TrendLabel; 3] = [TrendLabel::Bullish, TrendLabel::Flat, TrendLabel::Bearish];

    pub fn as_str(self) -> &'static str {
        match self {
            TrendLabel::Bullish => "bullish",
            TrendLabel::Bearish => "bearish",
            TrendLabel::Flat => "flat",
        }
    }
}

/// Treatment group within a scenario.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    A,
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Gender {
    F,
    M,
    Unreported,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgeBand {
    #[serde(rename = "<=15")]
    UpTo15,
    #[serde(rename = "16-25")]
    From16To25,
    #[serde(rename = "26-35")]
    From26To35,
    #[serde(rename = "36-45")]
    From36To45,
    #[serde(rename = "46-55")]
    From46To55,
    #[serde(rename = ">55")]
    Over55,
}

impl AgeBand {
    pub const ALL: [AgeBand; 6] = [
        AgeBand::UpTo15,
        AgeBand::From16To25,
        AgeBand::From26To35,
        AgeBand::From36To45,
        AgeBand::From46To55,
        AgeBand::Over55,
    ];

    /// Band containing an age in whole years.
    pub fn from_age(age: u32) -> Self {
        match age {
            0..=15 => AgeBand::UpTo15,
            16..=25 => AgeBand::From16To25,
            26..=35 => AgeBand::From26To35,
            36..=45 => AgeBand::From36To45,
            46..=55 => AgeBand::From46To55,
            _ => AgeBand::Over55,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Education {
    None,
    Primary,
    Secondary,
    HighSchool,
    University,
    Unavailable,
}

impl Education {
    pub const ALL: [Education; 6] = [
        Education::None,
        Education::Primary,
        Education::Secondary,
        Education::HighSchool,
        Education::University,
        Education::Unavailable,
    ];
}

impl Gender {
    pub const ALL: [Gender; 3] = [Gender::F, Gender::M, Gender::Unreported];
}

/// Pre-bucketed demographic key of a participant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CohortKey {
    pub gender: Gender,
    pub age_band: AgeBand,
    pub education: Education,
}

/// One participant decision with its full context.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub participant_id: String,
    /// One scenario played by one participant. Rounds are only paired within a session.
    pub session_id: String,
    pub scenario_id: u8,
    #[serde(default)]
    pub group: Option<Group>,
    pub round_index: u8,
    pub guess: Guess,
    pub market_prev: Direction,
    pub market_next: Direction,
    #[serde(default)]
    pub outcome: Option<Outcome>,
    /// Seconds from round display to the decision.
    pub decision_time: f64,
    #[serde(default)]
    pub panels_viewed: BTreeSet<PanelKind>,
    #[serde(default)]
    pub expert_consulted: bool,
    /// Direction stated by the expert, when the panel was consulted.
    #[serde(default)]
    pub expert_advice: Option<Direction>,
    pub coins_after: f64,
    #[serde(default)]
    pub cohort: Option<CohortKey>,
    #[serde(default)]
    pub trend: Option<TrendLabel>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RecordError {
    #[error("outcome {outcome:?} inconsistent with guess {guess:?} and market {market:?}")]
    InconsistentOutcome {
        guess: Guess,
        market: Direction,
        outcome: Option<Outcome>,
    },
    #[error("decision time {0} outside [0, limit]")]
    DecisionTime(f64),
    #[error("expert consulted but expert panel not in viewed set")]
    ExpertNotViewed,
    #[error("round index {0} outside 1..=25")]
    RoundIndex(u8),
    #[error("scenario {0} outside 1..=4")]
    Scenario(u8),
    #[error("coins must be positive, got {0}")]
    Coins(f64),
}

impl RoundRecord {
    /// Scenario 4 records are kept but left out of default statistics.
    pub fn excluded_by_default(&self) -> bool {
        self.scenario_id == 4
    }

    /// Number of distinct panels consulted apart from the home chart.
    pub fn extra_panels(&self) -> usize {
        self.panels_viewed.iter().filter(|k| !k.is_home()).count()
    }

    pub fn guess_direction(&self) -> Option<Direction> {
        self.guess.direction()
    }

    /// Checks the record invariants. `time_limit` bounds the decision time when known.
    pub fn validate(&self, time_limit: Option<f64>) -> Result<(), RecordError> {
        if !(1..=4).contains(&self.scenario_id) {
            return Err(RecordError::Scenario(self.scenario_id));
        }
        if !(1..=25).contains(&self.round_index) {
            return Err(RecordError::RoundIndex(self.round_index));
        }
        let expected = self.guess.direction().map(|g| outcome_of(g, self.market_next));
        if expected != self.outcome {
            return Err(RecordError::InconsistentOutcome {
                guess: self.guess,
                market: self.market_next,
                outcome: self.outcome,
            });
        }
        let limit = time_limit.unwrap_or(f64::INFINITY);
        if !(self.decision_time >= 0.0 && self.decision_time <= limit) {
            return Err(RecordError::DecisionTime(self.decision_time));
        }
        if self.expert_consulted && !self.panels_viewed.contains(&PanelKind::Expert) {
            return Err(RecordError::ExpertNotViewed);
        }
        if !(self.coins_after > 0.0) {
            return Err(RecordError::Coins(self.coins_after));
        }
        Ok(())
    }
}

/// Empirical probability with its binomial standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbEstimate {
    pub p: f64,
    pub sd: f64,
    pub n: u64,
}

impl ProbEstimate {
    /// `k` successes out of `n` trials. Returns `None` when `n == 0`.
    pub fn from_counts(k: u64, n: u64) -> Option<Self> {
        if n == 0 || k > n {
            return None;
        }
        let p = k as f64 / n as f64;
        Some(ProbEstimate {
            p,
            sd: (p * (1.0 - p) / n as f64).sqrt(),
            n,
        })
    }

    /// A known constant, e.g. a design parameter, with zero uncertainty.
    pub fn exact(p: f64) -> Self {
        ProbEstimate { p, sd: 0.0, n: 0 }
    }

    /// Estimate of the complementary event on the same sample.
    pub fn complement(self) -> Self {
        ProbEstimate {
            p: 1.0 - self.p,
            ..self
        }
    }

    /// Number of successes implied by `p` and `n`.
    pub fn successes(&self) -> u64 {
        (self.p * self.n as f64).round() as u64
    }
}
