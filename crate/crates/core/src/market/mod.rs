//! Daily price series: ingestion, moving averages, direction sequences,
//! volatility, trend labels and the content of every information panel.

mod indicators;
mod manifest;
mod panels;
mod series;

pub use indicators::{
    classify_trend, count_ties, direction_at, direction_sequence, direction_sequence_with, moving_average,
    realized_volatility, trend_label, TieRule, DEFAULT_FLAT_THRESHOLD,
};
pub use manifest::{load_dataset, validate_dataset, Dataset, DatasetManifest, DatasetReport, ManifestEntry, SeriesMeta};
pub use panels::{
    expert_sentence, panel_content, volatility_phrase, AveragePoint, PanelContent, PanelContext, WorldIndexArrows,
    ARROW_COUNT, INTRADAY_SAMPLES, WORLD_ARROW_DAYS,
};
pub use series::{load_series, read_points, ColumnMapping, PricePoint, PriceSeries, CONTEXT_POINTS, MIN_SERIES_LEN, ROUNDS};

pub use crate::domain::{PanelKind, TrendLabel};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MarketError {
    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("dates not strictly increasing at row {row}")]
    NonMonotoneDates { row: usize },
    #[error("non-positive close {close} at row {row}")]
    NonPositiveClose { row: usize, close: f64 },
    #[error("series has {len} points, at least {} required", MIN_SERIES_LEN)]
    TooShort { len: usize },
    #[error("window {window} needs more history than index {at} provides")]
    InsufficientHistory { window: usize, at: usize },
    #[error("window must be positive")]
    InvalidWindow,
    #[error("{what} {index} out of range")]
    OutOfRange { what: &'static str, index: usize },
    #[error("expert panel requested without advice")]
    MissingOracle,
    #[error("dataset: {0}")]
    Dataset(String),
}
