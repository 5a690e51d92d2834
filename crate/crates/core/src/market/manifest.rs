use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::indicators::{classify_trend, count_ties, trend_label};
use super::series::{read_points, ColumnMapping, PriceSeries};
use super::MarketError;
use crate::domain::TrendLabel;

/// Per-series sidecar metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub symbol: String,
    pub playable_offset: usize,
    #[serde(default)]
    pub trend: Option<TrendLabel>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Price file, relative to the manifest.
    pub file: PathBuf,
    /// Metadata sidecar, relative to the manifest.
    pub meta: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    #[serde(default)]
    pub description: String,
    #[serde(default = "default_threshold")]
    pub flat_threshold: f64,
    pub series: Vec<ManifestEntry>,
    /// Co-dated indices for the world panel.
    #[serde(default)]
    pub world: Vec<ManifestEntry>,
}

fn default_threshold() -> f64 {
    super::DEFAULT_FLAT_THRESHOLD
}

/// Playable series plus reference indices, immutable after load.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub series: Vec<Arc<PriceSeries>>,
    pub world: Arc<Vec<PriceSeries>>,
    pub flat_threshold: f64,
}

impl Dataset {
    pub fn from_series(series: Vec<PriceSeries>) -> Self {
        Dataset {
            series: series.into_iter().map(Arc::new).collect(),
            world: Arc::new(Vec::new()),
            flat_threshold: super::DEFAULT_FLAT_THRESHOLD,
        }
    }

    pub fn find(&self, symbol: &str) -> Option<(usize, &Arc<PriceSeries>)> {
        self.series.iter().enumerate().find(|(_, s)| s.symbol() == symbol)
    }

    /// Trend label by series symbol.
    pub fn trends(&self) -> BTreeMap<String, TrendLabel> {
        self.series
            .iter()
            .filter_map(|s| {
                trend_label(s, self.flat_threshold)
                    .ok()
                    .map(|t| (s.symbol().to_string(), t))
            })
            .collect()
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, MarketError> {
    let file = File::open(path).map_err(|e| MarketError::Dataset(format!("{}: {e}", path.display())))?;
    serde_json::from_reader(file).map_err(|e| MarketError::Dataset(format!("{}: {e}", path.display())))
}

fn load_entry(base: &Path, entry: &ManifestEntry, playable: bool) -> Result<PriceSeries, MarketError> {
    let meta: SeriesMeta = read_json(&base.join(&entry.meta))?;
    let path = base.join(&entry.file);
    let file = File::open(&path).map_err(|e| MarketError::Dataset(format!("{}: {e}", path.display())))?;
    let points = read_points(file, &ColumnMapping::default())
        .map_err(|e| MarketError::Dataset(format!("{}: {e}", path.display())))?;
    let series = if playable {
        PriceSeries::new(meta.symbol, points, meta.playable_offset)
    } else {
        PriceSeries::reference(meta.symbol, points)
    };
    series
        .map(|s| s.with_curated_trend(meta.trend))
        .map_err(|e| MarketError::Dataset(format!("{}: {e}", path.display())))
}

/// Loads every series named by the manifest at `path`.
pub fn load_dataset(path: &Path) -> Result<Dataset, MarketError> {
    let manifest: DatasetManifest = read_json(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    if manifest.series.is_empty() {
        return Err(MarketError::Dataset("manifest lists no playable series".into()));
    }
    let series = manifest
        .series
        .iter()
        .map(|e| load_entry(base, e, true).map(Arc::new))
        .collect::<Result<Vec<_>, _>>()?;
    let world = manifest
        .world
        .iter()
        .map(|e| load_entry(base, e, false))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset {
        series,
        world: Arc::new(world),
        flat_threshold: manifest.flat_threshold,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub playable_series: usize,
    pub world_series: usize,
    pub trend_counts: BTreeMap<TrendLabel, usize>,
    pub ties: usize,
    /// Series whose curated label differs from the computed one.
    pub label_mismatches: Vec<String>,
    pub problems: Vec<String>,
}

impl DatasetReport {
    pub fn is_ok(&self) -> bool {
        self.problems.is_empty()
    }
}

/// Checks a loaded dataset: tie-free closes, balanced trend labels, and
/// agreement between curated and computed labels.
pub fn validate_dataset(dataset: &Dataset, expected_per_trend: Option<usize>) -> DatasetReport {
    let mut report = DatasetReport {
        playable_series: dataset.series.len(),
        world_series: dataset.world.len(),
        ..Default::default()
    };
    let mut symbols = std::collections::BTreeSet::new();
    for s in &dataset.series {
        if !symbols.insert(s.symbol().to_string()) {
            report.problems.push(format!("duplicate symbol {}", s.symbol()));
        }
        match trend_label(s, dataset.flat_threshold) {
            Ok(label) => *report.trend_counts.entry(label).or_default() += 1,
            Err(e) => report.problems.push(format!("{}: {e}", s.symbol())),
        }
        if let (Some(curated), Ok(computed)) = (
            s.curated_trend(),
            classify_trend(s, s.playable_window(), dataset.flat_threshold),
        ) {
            if curated != computed {
                report.label_mismatches.push(s.symbol().to_string());
            }
        }
        let ties = count_ties(s);
        if ties > 0 {
            report.problems.push(format!("{}: {ties} tied closes", s.symbol()));
        }
        report.ties += ties;
    }
    for w in dataset.world.iter() {
        report.ties += count_ties(w);
    }
    if dataset.series.is_empty() {
        report.problems.push("no playable series".into());
    }
    if let Some(n) = expected_per_trend {
        for label in TrendLabel::ALL {
            let got = report.trend_counts.get(&label).copied().unwrap_or(0);
            if got != n {
                report
                    .problems
                    .push(format!("{} series labelled {}, expected {n}", got, label.as_str()));
            }
        }
    }
    report
}
