use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::info::{conditional_mi_from_strata, dir_index, CmiReport, JointTable};
use super::AnalyticsError;
use crate::domain::{outcome_of, repeat_flag, Direction, Outcome, RoundRecord};

/// Which records enter default statistics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordFilter {
    pub include_timeouts: bool,
    pub include_excluded_scenarios: bool,
}

impl RecordFilter {
    pub fn admits(&self, r: &RoundRecord) -> bool {
        (self.include_timeouts || !r.guess.is_timeout()) && (self.include_excluded_scenarios || !r.excluded_by_default())
    }

    pub fn apply<'a>(&self, records: &'a [RoundRecord]) -> Vec<&'a RoundRecord> {
        records.iter().filter(|r| self.admits(r)).collect()
    }
}

/// A decision together with the previous round of the same session.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pair<'a> {
    pub prev_guess: Direction,
    pub prev_outcome: Outcome,
    pub market_prev: Direction,
    pub guess: Direction,
    pub record: &'a RoundRecord,
}

impl Pair<'_> {
    pub fn repeated(&self) -> bool {
        repeat_flag(self.prev_guess, self.guess)
    }

    pub fn follows(&self) -> bool {
        self.guess == self.market_prev
    }

    pub fn context(&self) -> DecisionContext {
        DecisionContext {
            prev_guess: Some(self.prev_guess),
            prev_outcome: Some(self.prev_outcome),
            market_prev: Some(self.market_prev),
            guess: Some(self.guess),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PairSet<'a> {
    pub pairs: Vec<Pair<'a>>,
    /// Consecutive rounds whose market directions disagree.
    pub inconsistent: usize,
}

/// Pairs consecutive non-timeout rounds within each session. First rounds,
/// rounds after a timeout and session boundaries never form a pair.
pub fn pair_records<'a>(records: &'a [RoundRecord], filter: &RecordFilter) -> PairSet<'a> {
    let mut sessions: BTreeMap<&str, Vec<&RoundRecord>> = BTreeMap::new();
    for r in records {
        if filter.include_excluded_scenarios || !r.excluded_by_default() {
            sessions.entry(r.session_id.as_str()).or_default().push(r);
        }
    }
    let mut set = PairSet::default();
    for rounds in sessions.values_mut() {
        rounds.sort_by_key(|r| r.round_index);
        for w in rounds.windows(2) {
            let (prev, cur) = (w[0], w[1]);
            if cur.round_index != prev.round_index + 1 {
                continue;
            }
            let (Some(prev_guess), Some(guess)) = (prev.guess.direction(), cur.guess.direction()) else {
                continue;
            };
            if cur.market_prev != prev.market_next {
                set.inconsistent += 1;
                continue;
            }
            set.pairs.push(Pair {
                prev_guess,
                prev_outcome: outcome_of(prev_guess, prev.market_next),
                market_prev: cur.market_prev,
                guess,
                record: cur,
            });
        }
    }
    set
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyBasis {
    MarketImitation,
    WinStayLoseShift,
    Aggregated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Follow {
    Follow,
    NotFollow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StrategyLabel {
    pub value: Follow,
    pub basis: StrategyBasis,
}

/// What is known about a decision and the round before it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DecisionContext {
    pub prev_guess: Option<Direction>,
    pub prev_outcome: Option<Outcome>,
    pub market_prev: Option<Direction>,
    pub guess: Option<Direction>,
}

pub fn follow_label(ctx: &DecisionContext, basis: StrategyBasis) -> Result<StrategyLabel, AnalyticsError> {
    let guess = ctx.guess.ok_or(AnalyticsError::MissingContext("guess"))?;
    let mi = || -> Result<bool, AnalyticsError> {
        Ok(guess == ctx.market_prev.ok_or(AnalyticsError::MissingContext("market_prev"))?)
    };
    let wsls = || -> Result<bool, AnalyticsError> {
        let prev = ctx.prev_guess.ok_or(AnalyticsError::MissingContext("prev_guess"))?;
        let outcome = ctx.prev_outcome.ok_or(AnalyticsError::MissingContext("prev_outcome"))?;
        Ok(repeat_flag(prev, guess) == (outcome == Outcome::Correct))
    };
    let follows = match basis {
        StrategyBasis::MarketImitation => mi()?,
        StrategyBasis::WinStayLoseShift => wsls()?,
        StrategyBasis::Aggregated => mi()? || wsls()?,
    };
    Ok(StrategyLabel {
        value: if follows { Follow::Follow } else { Follow::NotFollow },
        basis,
    })
}

/// One row of the exhaustive (prev guess, prev market, guess) table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TruthRow {
    pub prev_guess: Direction,
    pub market_prev: Direction,
    pub guess: Direction,
    pub mi: Follow,
    pub wsls: Follow,
}

pub fn follow_truth_table() -> Vec<TruthRow> {
    let mut rows = Vec::with_capacity(8);
    for prev_guess in Direction::ALL {
        for market_prev in Direction::ALL {
            for guess in Direction::ALL {
                let ctx = DecisionContext {
                    prev_guess: Some(prev_guess),
                    prev_outcome: Some(outcome_of(prev_guess, market_prev)),
                    market_prev: Some(market_prev),
                    guess: Some(guess),
                };
                rows.push(TruthRow {
                    prev_guess,
                    market_prev,
                    guess,
                    mi: follow_label(&ctx, StrategyBasis::MarketImitation).expect("full context").value,
                    wsls: follow_label(&ctx, StrategyBasis::WinStayLoseShift).expect("full context").value,
                });
            }
        }
    }
    rows
}

/// Checks that both bases label every pair identically; returns the number checked.
pub fn check_follow_equivalence(pairs: &[Pair]) -> Result<usize, AnalyticsError> {
    for p in pairs {
        let ctx = p.context();
        let mi = follow_label(&ctx, StrategyBasis::MarketImitation)?;
        let wsls = follow_label(&ctx, StrategyBasis::WinStayLoseShift)?;
        if mi.value != wsls.value {
            return Err(AnalyticsError::FollowMismatch {
                session: p.record.session_id.clone(),
                round: p.record.round_index,
            });
        }
    }
    Ok(pairs.len())
}

/// Binary variables available on a pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    Guess,
    PrevGuess,
    MarketPrev,
    PrevOutcome,
    MarketNext,
    Repeat,
}

impl Variable {
    pub fn name(self) -> &'static str {
        match self {
            Variable::Guess => "guess",
            Variable::PrevGuess => "prev_guess",
            Variable::MarketPrev => "market_prev",
            Variable::PrevOutcome => "prev_outcome",
            Variable::MarketNext => "market_next",
            Variable::Repeat => "repeat",
        }
    }

    pub fn labels(self) -> [&'static str; 2] {
        match self {
            Variable::PrevOutcome => ["correct", "wrong"],
            Variable::Repeat => ["repeat", "change"],
            _ => ["up", "down"],
        }
    }

    pub fn index(self, p: &Pair) -> usize {
        match self {
            Variable::Guess => dir_index(p.guess),
            Variable::PrevGuess => dir_index(p.prev_guess),
            Variable::MarketPrev => dir_index(p.market_prev),
            Variable::MarketNext => dir_index(p.record.market_next),
            Variable::PrevOutcome => usize::from(p.prev_outcome == Outcome::Wrong),
            Variable::Repeat => usize::from(!p.repeated()),
        }
    }
}

/// 2x2 table of `condition` (rows) against `target` (columns).
pub fn joint_table(pairs: &[Pair], condition: Variable, target: Variable) -> JointTable {
    let [c0, c1] = condition.labels();
    let [t0, t1] = target.labels();
    let mut t = JointTable::new(vec![c0.into(), c1.into()], [t0.into(), t1.into()]);
    for p in pairs {
        t.add(condition.index(p), target.index(p));
    }
    t
}

/// One 2x2 table per value of `given`.
pub fn stratified_tables(pairs: &[Pair], target: Variable, condition: Variable, given: Variable) -> Vec<(String, JointTable)> {
    given
        .labels()
        .iter()
        .enumerate()
        .map(|(z, label)| {
            let within: Vec<Pair> = pairs.iter().filter(|p| given.index(p) == z).copied().collect();
            (label.to_string(), joint_table(&within, condition, target))
        })
        .collect()
}

/// I(target; condition | given) over the pairs.
pub fn conditional_mutual_information(
    pairs: &[Pair],
    target: Variable,
    condition: Variable,
    given: Variable,
) -> Result<CmiReport, AnalyticsError> {
    conditional_mi_from_strata(&stratified_tables(pairs, target, condition, given))
}
