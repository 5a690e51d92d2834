use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::domain::{Direction, Outcome};

/// Probability of guessing up and down after one (previous guess, outcome) context.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafRow {
    pub up: f64,
    pub down: f64,
}

impl LeafRow {
    pub fn new(up: f64) -> Self {
        LeafRow { up, down: 1.0 - up }
    }
}

/// Guess distribution for each of the four (previous guess, outcome) contexts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafTable {
    pub up_success: LeafRow,
    pub up_failure: LeafRow,
    pub down_success: LeafRow,
    pub down_failure: LeafRow,
}

impl LeafTable {
    pub fn row(&self, prev_guess: Direction, prev_outcome: Outcome) -> LeafRow {
        match (prev_guess, prev_outcome) {
            (Direction::Up, Outcome::Correct) => self.up_success,
            (Direction::Up, Outcome::Wrong) => self.up_failure,
            (Direction::Down, Outcome::Correct) => self.down_success,
            (Direction::Down, Outcome::Wrong) => self.down_failure,
        }
    }

    pub fn p_up(&self, prev_guess: Direction, prev_outcome: Outcome) -> f64 {
        self.row(prev_guess, prev_outcome).up
    }

    pub fn validate(&self) -> Result<(), SimError> {
        for row in [self.up_success, self.up_failure, self.down_success, self.down_failure] {
            check_prob("leaf probability", row.up)?;
            check_prob("leaf probability", row.down)?;
            if (row.up + row.down - 1.0).abs() > 1e-9 {
                return Err(SimError::InvalidSpec(format!("leaf row {row:?} does not sum to 1")));
            }
        }
        Ok(())
    }
}

pub(crate) fn check_prob(what: &str, p: f64) -> Result<(), SimError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(SimError::InvalidSpec(format!("{what} {p} outside [0, 1]")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentKind {
    Random { p_up: f64 },
    /// Guesses the previous market move with probability `follow_prob`, else the opposite.
    Imitator { follow_prob: f64 },
    /// Applies win-stay lose-shift with probability `follow_prob`, else the opposite.
    Wsls { follow_prob: f64 },
    Calibrated { table: LeafTable },
    /// Consults the expert every round and follows it with probability `obey_prob`.
    ExpertFollower { obey_prob: f64 },
}

impl AgentKind {
    pub fn validate(&self) -> Result<(), SimError> {
        match self {
            AgentKind::Random { p_up } => check_prob("p_up", *p_up),
            AgentKind::Imitator { follow_prob } | AgentKind::Wsls { follow_prob } => check_prob("follow_prob", *follow_prob),
            AgentKind::Calibrated { table } => table.validate(),
            AgentKind::ExpertFollower { obey_prob } => check_prob("obey_prob", *obey_prob),
        }
    }

    pub fn always_consults_expert(&self) -> bool {
        matches!(self, AgentKind::ExpertFollower { .. })
    }
}

/// What an agent knows when deciding.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AgentContext {
    pub market_prev: Option<Direction>,
    pub prev_guess: Option<Direction>,
    pub prev_outcome: Option<Outcome>,
    pub advice: Option<Direction>,
}

fn coin(rng: &mut impl Rng, p_up: f64) -> Direction {
    if rng.random_bool(p_up) {
        Direction::Up
    } else {
        Direction::Down
    }
}

fn keep_or_flip(rng: &mut impl Rng, target: Direction, p: f64) -> Direction {
    if rng.random_bool(p) {
        target
    } else {
        !target
    }
}

/// One decision. Agents that need a previous guess play a fair coin when
/// there is none.
pub fn agent_step(kind: &AgentKind, ctx: &AgentContext, rng: &mut impl Rng) -> Result<Direction, SimError> {
    let prev = |ctx: &AgentContext| -> Result<Option<(Direction, Outcome)>, SimError> {
        match (ctx.prev_guess, ctx.prev_outcome) {
            (None, _) => Ok(None),
            (Some(g), Some(o)) => Ok(Some((g, o))),
            (Some(_), None) => Err(SimError::MissingContext("prev_outcome")),
        }
    };
    Ok(match kind {
        AgentKind::Random { p_up } => coin(rng, *p_up),
        AgentKind::Imitator { follow_prob } => {
            let m = ctx.market_prev.ok_or(SimError::MissingContext("market_prev"))?;
            keep_or_flip(rng, m, *follow_prob)
        }
        AgentKind::Wsls { follow_prob } => match prev(ctx)? {
            None => coin(rng, 0.5),
            Some((g, o)) => {
                let rule = if o == Outcome::Correct { g } else { !g };
                keep_or_flip(rng, rule, *follow_prob)
            }
        },
        AgentKind::Calibrated { table } => match prev(ctx)? {
            None => coin(rng, 0.5),
            Some((g, o)) => coin(rng, table.p_up(g, o)),
        },
        AgentKind::ExpertFollower { obey_prob } => {
            let a = ctx.advice.ok_or(SimError::MissingContext("advice"))?;
            keep_or_flip(rng, a, *obey_prob)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rule_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ctx = AgentContext {
            market_prev: Some(Direction::Up),
            ..Default::default()
        };
        assert_eq!(agent_step(&AgentKind::Imitator { follow_prob: 1.0 }, &ctx, &mut rng).unwrap(), Direction::Up);
        let wsls = AgentKind::Wsls { follow_prob: 1.0 };
        let win = AgentContext {
            prev_guess: Some(Direction::Up),
            prev_outcome: Some(Outcome::Correct),
            ..Default::default()
        };
        assert_eq!(agent_step(&wsls, &win, &mut rng).unwrap(), Direction::Up);
        let loss = AgentContext {
            prev_outcome: Some(Outcome::Wrong),
            ..win
        };
        assert_eq!(agent_step(&wsls, &loss, &mut rng).unwrap(), Direction::Down);
        assert_eq!(
            agent_step(&AgentKind::Imitator { follow_prob: 0.5 }, &AgentContext::default(), &mut rng).unwrap_err(),
            SimError::MissingContext("market_prev")
        );
    }

    #[test]
    fn imitator_follow_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let kind = AgentKind::Imitator { follow_prob: 0.7 };
        let n = 100_000;
        let mut follow = 0;
        for i in 0..n {
            let m = if i % 3 == 0 { Direction::Down } else { Direction::Up };
            let ctx = AgentContext {
                market_prev: Some(m),
                ..Default::default()
            };
            if agent_step(&kind, &ctx, &mut rng).unwrap() == m {
                follow += 1;
            }
        }
        let rate = follow as f64 / n as f64;
        assert!((rate - 0.7).abs() < 0.005, "{rate}");
    }

    #[test]
    fn invalid_specs() {
        assert!(AgentKind::Random { p_up: 1.5 }.validate().is_err());
        let bad = LeafTable {
            up_success: LeafRow { up: 0.7, down: 0.2 },
            up_failure: LeafRow::new(0.5),
            down_success: LeafRow::new(0.5),
            down_failure: LeafRow::new(0.5),
        };
        assert!(AgentKind::Calibrated { table: bad }.validate().is_err());
    }
}
