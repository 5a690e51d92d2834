use std::io::Read;
use std::ops::Range;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::MarketError;
use crate::domain::TrendLabel;

/// Points before the first playable round that are always shown.
pub const CONTEXT_POINTS: usize = 30;
/// Rounds per scenario, one playable point each.
pub const ROUNDS: usize = 25;
pub const MIN_SERIES_LEN: usize = CONTEXT_POINTS + ROUNDS;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PricePoint {
    pub date: NaiveDate,
    pub close: f64,
}

/// Daily closes backing one playable 25-round window.
///
/// Round `r` (1-based) resolves on the close at `playable_start + r - 1`;
/// everything strictly before that index is visible while the round is open.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    symbol: String,
    points: Vec<PricePoint>,
    playable_start: usize,
    curated_trend: Option<TrendLabel>,
}

impl PriceSeries {
    /// Builds a validated series whose playable window starts at `playable_start`.
    pub fn new(
        symbol: impl Into<String>,
        points: Vec<PricePoint>,
        playable_start: usize,
    ) -> Result<Self, MarketError> {
        for (i, p) in points.iter().enumerate() {
            if !(p.close > 0.0) || !p.close.is_finite() {
                return Err(MarketError::NonPositiveClose { row: i, close: p.close });
            }
            if i > 0 && p.date <= points[i - 1].date {
                return Err(MarketError::NonMonotoneDates { row: i });
            }
        }
        if points.len() < MIN_SERIES_LEN {
            return Err(MarketError::TooShort { len: points.len() });
        }
        if playable_start < CONTEXT_POINTS || playable_start + ROUNDS > points.len() {
            return Err(MarketError::OutOfRange {
                what: "playable window",
                index: playable_start,
            });
        }
        Ok(PriceSeries {
            symbol: symbol.into(),
            points,
            playable_start,
            curated_trend: None,
        })
    }

    /// Series without a playable window, e.g. a world index shown only as context.
    pub fn reference(symbol: impl Into<String>, points: Vec<PricePoint>) -> Result<Self, MarketError> {
        for (i, p) in points.iter().enumerate() {
            if !(p.close > 0.0) || !p.close.is_finite() {
                return Err(MarketError::NonPositiveClose { row: i, close: p.close });
            }
            if i > 0 && p.date <= points[i - 1].date {
                return Err(MarketError::NonMonotoneDates { row: i });
            }
        }
        Ok(PriceSeries {
            symbol: symbol.into(),
            playable_start: points.len(),
            points,
            curated_trend: None,
        })
    }

    pub fn with_curated_trend(mut self, label: Option<TrendLabel>) -> Self {
        self.curated_trend = label;
        self
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn points(&self) -> &[PricePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn close(&self, index: usize) -> f64 {
        self.points[index].close
    }

    pub fn closes(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.close)
    }

    pub fn playable_start(&self) -> usize {
        self.playable_start
    }

    /// Indices of the 25 playable closes.
    pub fn playable_window(&self) -> Range<usize> {
        self.playable_start..self.playable_start + ROUNDS
    }

    pub fn curated_trend(&self) -> Option<TrendLabel> {
        self.curated_trend
    }

    /// Index of the close that resolves `round` (1-based).
    pub fn outcome_index(&self, round: u8) -> Result<usize, MarketError> {
        if !(1..=ROUNDS as u8).contains(&round) {
            return Err(MarketError::OutOfRange {
                what: "round",
                index: round as usize,
            });
        }
        Ok(self.playable_start + round as usize - 1)
    }

    /// Last index visible while `round` is open.
    pub fn last_visible_index(&self, round: u8) -> Result<usize, MarketError> {
        Ok(self.outcome_index(round)? - 1)
    }

    /// Same dates with the closes in reverse order.
    pub fn reversed(&self) -> Self {
        let closes: Vec<f64> = self.points.iter().rev().map(|p| p.close).collect();
        let points = self
            .points
            .iter()
            .zip(closes)
            .map(|(p, close)| PricePoint { date: p.date, close })
            .collect();
        PriceSeries {
            symbol: self.symbol.clone(),
            points,
            playable_start: self.points.len() - self.playable_start - ROUNDS,
            curated_trend: None,
        }
    }
}

/// Column layout of a delimiter-separated price file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub date_column: String,
    pub close_column: String,
    pub delimiter: u8,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            date_column: "date".into(),
            close_column: "close".into(),
            delimiter: b',',
        }
    }
}

/// Reads `(date, close)` rows. Dates are ISO-8601 (`YYYY-MM-DD`).
pub fn read_points(source: impl Read, mapping: &ColumnMapping) -> Result<Vec<PricePoint>, MarketError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(mapping.delimiter)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| MarketError::MalformedRow { row: 0, reason: e.to_string() })?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| MarketError::MalformedRow {
                row: 0,
                reason: format!("missing column `{name}`"),
            })
    };
    let date_col = column(&mapping.date_column)?;
    let close_col = column(&mapping.close_column)?;

    let mut points = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| MarketError::MalformedRow { row: i + 1, reason: e.to_string() })?;
        let date_raw = row.get(date_col).unwrap_or_default();
        let close_raw = row.get(close_col).unwrap_or_default();
        let date = NaiveDate::parse_from_str(date_raw, "%Y-%m-%d").map_err(|e| MarketError::MalformedRow {
            row: i + 1,
            reason: format!("date `{date_raw}`: {e}"),
        })?;
        let close: f64 = close_raw.parse().map_err(|e| MarketError::MalformedRow {
            row: i + 1,
            reason: format!("close `{close_raw}`: {e}"),
        })?;
        points.push(PricePoint { date, close });
    }
    Ok(points)
}

/// Parses and validates a playable series. The playable window starts at
/// `playable_start`, or right after the 30 context points when `None`.
pub fn load_series(
    source: impl Read,
    mapping: &ColumnMapping,
    symbol: &str,
    playable_start: Option<usize>,
) -> Result<PriceSeries, MarketError> {
    let points = read_points(source, mapping)?;
    PriceSeries::new(symbol, points, playable_start.unwrap_or(CONTEXT_POINTS))
}

#[cfg(test)]
pub(crate) fn test_series(closes: &[f64], playable_start: usize) -> PriceSeries {
    let start = NaiveDate::from_ymd_opt(2006, 1, 2).unwrap();
    let points = closes
        .iter()
        .enumerate()
        .map(|(i, &close)| PricePoint {
            date: start + chrono::Days::new(i as u64),
            close,
        })
        .collect();
    PriceSeries::new("TEST", points, playable_start).unwrap()
}
