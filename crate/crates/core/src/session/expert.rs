use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Direction, PanelKind};
use crate::market::ROUNDS;

/// Long-run fraction of rounds in which the expert states the true direction.
pub const EXPERT_RELIABILITY: f64 = 0.6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VolatilityPhrase {
    High,
    Low,
}

/// Expert advice for one round. `is_truthful` is never serialized so it
/// cannot reach a participant-facing payload.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExpertAdvice {
    pub round: u8,
    pub stated_direction: Direction,
    pub volatility_phrase: VolatilityPhrase,
    pub is_truthful: bool,
}

impl ExpertAdvice {
    pub fn new(round: u8, market_next: Direction, volatility_phrase: VolatilityPhrase, is_truthful: bool) -> Self {
        let stated_direction = if is_truthful { market_next } else { market_next.opposite() };
        ExpertAdvice {
            round,
            stated_direction,
            volatility_phrase,
            is_truthful,
        }
    }
}

/// Everything a session draws from its seed, generated once at start so a
/// replay reproduces it exactly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SessionPlan {
    pub series_index: usize,
    pub truthful: [bool; ROUNDS],
    pub random_extra: [PanelKind; ROUNDS],
}

impl SessionPlan {
    pub fn from_seed(seed: u64, pool_len: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let series_index = rng.random_range(0..pool_len.max(1));
        let mut truthful = [false; ROUNDS];
        for t in truthful.iter_mut() {
            *t = rng.random_bool(EXPERT_RELIABILITY);
        }
        let mut random_extra = [PanelKind::Intraday; ROUNDS];
        for e in random_extra.iter_mut() {
            *e = *PanelKind::SCREENS.choose(&mut rng).expect("non-empty");
        }
        SessionPlan {
            series_index,
            truthful,
            random_extra,
        }
    }

    pub fn is_truthful(&self, round: u8) -> bool {
        self.truthful[round as usize - 1]
    }

    pub fn extra_for(&self, round: u8) -> PanelKind {
        self.random_extra[round as usize - 1]
    }
}
