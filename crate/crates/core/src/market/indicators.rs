use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{MarketError, PriceSeries};
use crate::domain::{Direction, TrendLabel};

/// How a zero price change maps onto a direction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieRule {
    #[default]
    Down,
    Up,
}

pub const DEFAULT_FLAT_THRESHOLD: f64 = 0.02;

/// Arithmetic mean of the `window` closes ending at `at` (inclusive).
pub fn moving_average(series: &PriceSeries, window: usize, at: usize) -> Result<f64, MarketError> {
    if window == 0 {
        return Err(MarketError::InvalidWindow);
    }
    if at >= series.len() {
        return Err(MarketError::OutOfRange { what: "index", index: at });
    }
    if at + 1 < window {
        return Err(MarketError::InsufficientHistory { window, at });
    }
    let sum: f64 = series.points()[at + 1 - window..=at].iter().map(|p| p.close).sum();
    Ok(sum / window as f64)
}

fn direction_between(prev: f64, next: f64, tie: TieRule) -> Direction {
    if next > prev {
        Direction::Up
    } else if next < prev {
        Direction::Down
    } else {
        match tie {
            TieRule::Up => Direction::Up,
            TieRule::Down => Direction::Down,
        }
    }
}

/// Direction of the move into each index of `range` from the close before it.
pub fn direction_sequence(series: &PriceSeries, range: Range<usize>) -> Result<Vec<Direction>, MarketError> {
    direction_sequence_with(series, range, TieRule::default())
}

pub fn direction_sequence_with(
    series: &PriceSeries,
    range: Range<usize>,
    tie: TieRule,
) -> Result<Vec<Direction>, MarketError> {
    if range.start == 0 {
        return Err(MarketError::OutOfRange { what: "direction range start", index: 0 });
    }
    if range.end > series.len() {
        return Err(MarketError::OutOfRange { what: "direction range end", index: range.end });
    }
    Ok(range
        .map(|i| direction_between(series.close(i - 1), series.close(i), tie))
        .collect())
}

/// Direction of the move into index `i`.
pub fn direction_at(series: &PriceSeries, i: usize) -> Result<Direction, MarketError> {
    Ok(direction_sequence(series, i..i + 1)?[0])
}

/// Number of consecutive closes that are exactly equal.
pub fn count_ties(series: &PriceSeries) -> usize {
    series
        .points()
        .windows(2)
        .filter(|w| w[0].close == w[1].close)
        .count()
}

/// Population standard deviation of the `window` log-returns ending at `at`.
pub fn realized_volatility(series: &PriceSeries, window: usize, at: usize) -> Result<f64, MarketError> {
    if window == 0 {
        return Err(MarketError::InvalidWindow);
    }
    if at >= series.len() {
        return Err(MarketError::OutOfRange { what: "index", index: at });
    }
    if at < window {
        return Err(MarketError::InsufficientHistory { window, at });
    }
    let returns: Vec<f64> = (at + 1 - window..=at)
        .map(|i| (series.close(i) / series.close(i - 1)).ln())
        .collect();
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    Ok(var.sqrt())
}

/// Labels a window by its total log-return: above `+threshold` is bullish,
/// below `-threshold` bearish, otherwise flat.
pub fn classify_trend(
    series: &PriceSeries,
    window: Range<usize>,
    flat_threshold: f64,
) -> Result<TrendLabel, MarketError> {
    if window.is_empty() || window.end > series.len() {
        return Err(MarketError::OutOfRange { what: "trend window", index: window.end });
    }
    let total = (series.close(window.end - 1) / series.close(window.start)).ln();
    Ok(if total > flat_threshold {
        TrendLabel::Bullish
    } else if total < -flat_threshold {
        TrendLabel::Bearish
    } else {
        TrendLabel::Flat
    })
}

/// Curated label when present, otherwise the computed one over the playable window.
pub fn trend_label(series: &PriceSeries, flat_threshold: f64) -> Result<TrendLabel, MarketError> {
    match series.curated_trend() {
        Some(label) => Ok(label),
        None => classify_trend(series, series.playable_window(), flat_threshold),
    }
}
