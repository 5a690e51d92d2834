use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::indicators::{direction_sequence, moving_average, realized_volatility};
use super::series::CONTEXT_POINTS;
use super::{MarketError, PricePoint, PriceSeries};
use crate::domain::{Direction, PanelKind};
use crate::session::{ExpertAdvice, VolatilityPhrase};

/// Arrows shown on the market-direction screen.
pub const ARROW_COUNT: usize = 30;
/// Days of arrows shown per world index.
pub const WORLD_ARROW_DAYS: usize = 3;
/// Samples in the synthetic intraday path, endpoints included.
pub const INTRADAY_SAMPLES: usize = 52;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragePoint {
    pub date: NaiveDate,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldIndexArrows {
    pub symbol: String,
    pub arrows: Vec<Direction>,
}

/// What a participant sees on a panel. Never carries the advice truthfulness
/// or any close at or after the open round's outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PanelContent {
    PriceChart {
        points: Vec<PricePoint>,
    },
    #[serde(rename = "ma5")]
    Ma5 {
        points: Vec<AveragePoint>,
    },
    #[serde(rename = "ma30")]
    Ma30 {
        points: Vec<AveragePoint>,
    },
    Intraday {
        /// The path is a seeded Brownian bridge between two daily closes, not tick data.
        synthetic: bool,
        date: NaiveDate,
        prices: Vec<f64>,
    },
    Expert {
        direction: Direction,
        volatility: VolatilityPhrase,
        text: String,
    },
    MarketArrows {
        arrows: Vec<Direction>,
    },
    WorldIndices {
        indices: Vec<WorldIndexArrows>,
    },
}

impl PanelContent {
    pub fn kind(&self) -> PanelKind {
        match self {
            PanelContent::PriceChart { .. } => PanelKind::PriceChart,
            PanelContent::Ma5 { .. } => PanelKind::Ma5,
            PanelContent::Ma30 { .. } => PanelKind::Ma30,
            PanelContent::Intraday { .. } => PanelKind::Intraday,
            PanelContent::Expert { .. } => PanelKind::Expert,
            PanelContent::MarketArrows { .. } => PanelKind::MarketArrows,
            PanelContent::WorldIndices { .. } => PanelKind::WorldIndices,
        }
    }
}

/// Inputs beyond the series that some panels need.
#[derive(Clone, Copy, Debug, Default)]
pub struct PanelContext<'a> {
    pub advice: Option<&'a ExpertAdvice>,
    pub intraday_seed: u64,
    pub world: &'a [PriceSeries],
}

pub fn expert_sentence(direction: Direction, volatility: VolatilityPhrase) -> String {
    let vol = match volatility {
        VolatilityPhrase::High => "high",
        VolatilityPhrase::Low => "low",
    };
    format!("Current volatility is {vol} and the price will go \"{direction}\"")
}

/// Content of panel `kind` while `round` is open.
pub fn panel_content(
    series: &PriceSeries,
    kind: PanelKind,
    round: u8,
    ctx: &PanelContext<'_>,
) -> Result<PanelContent, MarketError> {
    let last = series.last_visible_index(round)?;
    let chart_start = series.playable_start() - CONTEXT_POINTS;
    let averages = |window: usize| -> Vec<AveragePoint> {
        (chart_start..=last)
            .filter_map(|i| {
                moving_average(series, window, i).ok().map(|value| AveragePoint {
                    date: series.points()[i].date,
                    value,
                })
            })
            .collect()
    };
    Ok(match kind {
        PanelKind::PriceChart => PanelContent::PriceChart {
            points: series.points()[chart_start..=last].to_vec(),
        },
        PanelKind::Ma5 => PanelContent::Ma5 { points: averages(5) },
        PanelKind::Ma30 => PanelContent::Ma30 { points: averages(30) },
        PanelKind::Intraday => PanelContent::Intraday {
            synthetic: true,
            date: series.points()[last].date,
            prices: intraday_bridge(series, last, ctx.intraday_seed ^ u64::from(round)),
        },
        PanelKind::Expert => {
            let advice = ctx.advice.ok_or(MarketError::MissingOracle)?;
            if advice.round != round {
                return Err(MarketError::OutOfRange {
                    what: "advice round",
                    index: advice.round as usize,
                });
            }
            PanelContent::Expert {
                direction: advice.stated_direction,
                volatility: advice.volatility_phrase,
                text: expert_sentence(advice.stated_direction, advice.volatility_phrase),
            }
        }
        PanelKind::MarketArrows => {
            let first = (last + 1).saturating_sub(ARROW_COUNT).max(1);
            PanelContent::MarketArrows {
                arrows: direction_sequence(series, first..last + 1)?,
            }
        }
        PanelKind::WorldIndices => {
            let cutoff = series.points()[last].date;
            let indices = ctx
                .world
                .iter()
                .filter(|w| w.symbol() != series.symbol())
                .filter_map(|w| {
                    let visible = w.points().partition_point(|p| p.date <= cutoff);
                    if visible < WORLD_ARROW_DAYS + 1 {
                        return None;
                    }
                    let arrows = direction_sequence(w, visible - WORLD_ARROW_DAYS..visible).ok()?;
                    Some(WorldIndexArrows {
                        symbol: w.symbol().to_string(),
                        arrows,
                    })
                })
                .collect();
            PanelContent::WorldIndices { indices }
        }
    })
}

/// Volatility phrase backing the expert sentence: high when the 5-day
/// realized volatility exceeds the 30-day one at `at`. The long window is
/// shortened to the available history.
pub fn volatility_phrase(series: &PriceSeries, at: usize) -> Result<VolatilityPhrase, MarketError> {
    let short = realized_volatility(series, 5, at)?;
    let long = realized_volatility(series, 30.min(at), at)?;
    Ok(if short > long {
        VolatilityPhrase::High
    } else {
        VolatilityPhrase::Low
    })
}

/// Brownian bridge in log-price from the close before `at` to the close at `at`.
fn intraday_bridge(series: &PriceSeries, at: usize, seed: u64) -> Vec<f64> {
    let start = series.close(at.saturating_sub(1));
    let end = series.close(at);
    let sigma = realized_volatility(series, 5.min(at), at).unwrap_or(0.0).max(1e-4);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(at as u64);

    let steps = INTRADAY_SAMPLES - 1;
    let dt = 1.0 / steps as f64;
    let mut walk = Vec::with_capacity(INTRADAY_SAMPLES);
    walk.push(0.0f64);
    for _ in 0..steps {
        let z: f64 = StandardNormal.sample(&mut rng);
        walk.push(walk.last().unwrap() + z * dt.sqrt());
    }
    let w1 = walk[steps];
    let (ls, le) = (start.ln(), end.ln());
    walk.iter()
        .enumerate()
        .map(|(i, w)| {
            let t = i as f64 * dt;
            if i == 0 {
                start
            } else if i == steps {
                end
            } else {
                (ls + t * (le - ls) + sigma * (w - t * w1)).exp()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::series::test_series;

    fn sample() -> PriceSeries {
        let closes: Vec<f64> = (0..60)
            .map(|i| 100.0 + (i as f64 * 0.7).sin() * 5.0 + i as f64 * 0.1)
            .collect();
        test_series(&closes, 30)
    }

    fn advice(round: u8) -> ExpertAdvice {
        ExpertAdvice {
            round,
            stated_direction: Direction::Up,
            volatility_phrase: VolatilityPhrase::Low,
            is_truthful: false,
        }
    }

    #[test]
    fn home_chart_round_one_shows_context_only() {
        let s = sample();
        let c = panel_content(&s, PanelKind::PriceChart, 1, &PanelContext::default()).unwrap();
        let PanelContent::PriceChart { points } = c else { panic!() };
        assert_eq!(points.len(), 30);
        assert_eq!(points.last().unwrap().date, s.points()[29].date);
    }

    #[test]
    fn arrows_round_five_end_at_round_four_outcome() {
        let s = sample();
        let c = panel_content(&s, PanelKind::MarketArrows, 5, &PanelContext::default()).unwrap();
        let PanelContent::MarketArrows { arrows } = c else { panic!() };
        assert_eq!(arrows.len(), 30);
        let round4 = s.outcome_index(4).unwrap();
        let expected = direction_sequence(&s, round4 + 1 - 30..round4 + 1).unwrap();
        assert_eq!(arrows, expected);
    }

    #[test]
    fn arrows_truncate_at_start_of_data() {
        let s = sample();
        let c = panel_content(&s, PanelKind::MarketArrows, 1, &PanelContext::default()).unwrap();
        let PanelContent::MarketArrows { arrows } = c else { panic!() };
        assert_eq!(arrows.len(), 29);
    }

    #[test]
    fn expert_needs_oracle() {
        let s = sample();
        assert_eq!(
            panel_content(&s, PanelKind::Expert, 3, &PanelContext::default()).unwrap_err(),
            MarketError::MissingOracle
        );
        let a = advice(3);
        let ctx = PanelContext { advice: Some(&a), ..Default::default() };
        let c = panel_content(&s, PanelKind::Expert, 3, &ctx).unwrap();
        let json = serde_json::to_string(&c).unwrap();
        assert!(!json.contains("truth"), "{json}");
        assert!(json.contains("Current volatility is low"));
    }

    #[test]
    fn out_of_range_round() {
        let s = sample();
        assert!(panel_content(&s, PanelKind::PriceChart, 0, &PanelContext::default()).is_err());
        assert!(panel_content(&s, PanelKind::PriceChart, 26, &PanelContext::default()).is_err());
    }

    #[test]
    fn intraday_is_deterministic_bridge() {
        let s = sample();
        let ctx = PanelContext { intraday_seed: 9, ..Default::default() };
        let a = panel_content(&s, PanelKind::Intraday, 4, &ctx).unwrap();
        let b = panel_content(&s, PanelKind::Intraday, 4, &ctx).unwrap();
        assert_eq!(a, b);
        let PanelContent::Intraday { prices, synthetic, .. } = a else { panic!() };
        assert!(synthetic);
        let last = s.last_visible_index(4).unwrap();
        assert_eq!(prices.len(), INTRADAY_SAMPLES);
        assert_eq!(prices[0], s.close(last - 1));
        assert_eq!(*prices.last().unwrap(), s.close(last));
    }

    #[test]
    fn world_indices_use_only_past_dates() {
        let s = sample();
        let other: Vec<f64> = (0..80).map(|i| 50.0 + i as f64).collect();
        let world = vec![test_series(&other, 30), s.clone()];
        let world: Vec<PriceSeries> = vec![
            PriceSeries::reference("DJI", world[0].points().to_vec()).unwrap(),
            world[1].clone(),
        ];
        let ctx = PanelContext { world: &world, ..Default::default() };
        let c = panel_content(&s, PanelKind::WorldIndices, 2, &ctx).unwrap();
        let PanelContent::WorldIndices { indices } = c else { panic!() };
        // The played series itself is skipped.
        assert_eq!(indices.len(), 1);
        assert_eq!(indices[0].symbol, "DJI");
        assert_eq!(indices[0].arrows, vec![Direction::Up; 3]);
    }

    /// Every panel for every round is unchanged when closes at or after the
    /// round's outcome index are perturbed.
    #[test]
    fn no_lookahead() {
        let s = sample();
        for round in 1..=25u8 {
            let cut = s.outcome_index(round).unwrap();
            let mut closes: Vec<f64> = s.closes().collect();
            for c in closes.iter_mut().skip(cut) {
                *c *= 1.37;
            }
            let perturbed = test_series(&closes, 30);
            let a = advice(round);
            for kind in PanelKind::ALL {
                let ctx = PanelContext { advice: Some(&a), intraday_seed: 5, world: &[] };
                assert_eq!(
                    panel_content(&s, kind, round, &ctx).unwrap(),
                    panel_content(&perturbed, kind, round, &ctx).unwrap(),
                    "{kind} round {round}"
                );
            }
            assert_eq!(
                volatility_phrase(&s, cut - 1).unwrap(),
                volatility_phrase(&perturbed, cut - 1).unwrap()
            );
        }
    }
}
