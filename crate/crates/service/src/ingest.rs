//! Loading round records from an event log or a flat CSV.
//!
//! CSV schema, one row per decision. Required columns: `session_id`,
//! `round_index`, `guess` (`up`/`down`/`timeout`), `market_prev`,
//! `market_next`, `decision_time` (seconds). Optional: `participant_id`,
//! `scenario_id` (default 1), `group` (`A`/`B`), `outcome`
//! (`correct`/`wrong`, checked against guess and market), `panels_viewed`
//! (`;`-separated panel names), `expert_advice`, `coins_after` (rebuilt
//! from the payoff rule when the column is absent), `gender`, `age_band`,
//! `education`, `trend`. A mapping renames source headers onto these names.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use mrbanks_core::domain::{outcome_of, CohortKey, Guess, Outcome, PanelKind, RoundRecord};
use mrbanks_core::session::{project_records, EventBody, ProjectionError, INITIAL_COINS, LOSS_FACTOR, WIN_FACTOR};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::store::{read_events, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}: {reason}")]
    UnreadableFile { path: PathBuf, reason: String },
    #[error("column `{0}` is not mapped to any header")]
    UnmappedColumn(String),
    #[error(transparent)]
    Log(#[from] StoreError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
}

pub const REQUIRED_COLUMNS: [&str; 6] = [
    "session_id",
    "round_index",
    "guess",
    "market_prev",
    "market_next",
    "decision_time",
];

pub const OPTIONAL_COLUMNS: [&str; 11] = [
    "participant_id",
    "scenario_id",
    "group",
    "outcome",
    "panels_viewed",
    "expert_advice",
    "coins_after",
    "gender",
    "age_band",
    "education",
    "trend",
];

/// Source header for each schema column; unlisted columns keep their name.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsvMapping {
    pub columns: BTreeMap<String, String>,
    pub delimiter: char,
}

impl Default for CsvMapping {
    fn default() -> Self {
        CsvMapping {
            columns: BTreeMap::new(),
            delimiter: ',',
        }
    }
}

impl CsvMapping {
    fn source<'a>(&'a self, column: &'a str) -> &'a str {
        self.columns.get(column).map(String::as_str).unwrap_or(column)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RejectedRow {
    /// 1-based line in the file, header included.
    pub line: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CsvIngest {
    pub records: Vec<RoundRecord>,
    pub rejects: Vec<RejectedRow>,
}

fn unreadable(path: &Path, e: impl std::fmt::Display) -> IngestError {
    IngestError::UnreadableFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

/// Records of an event log. Unless `live`, sessions without a `SessionEnd`
/// are dropped.
pub fn ingest_events(source: impl Read, live: bool) -> Result<Vec<RoundRecord>, IngestError> {
    let loaded = read_events(source)?;
    let mut events = loaded.events;
    if !live {
        let ended: BTreeSet<String> = events
            .iter()
            .filter(|e| matches!(e.body, EventBody::SessionEnd { .. }))
            .filter_map(|e| e.session_id.clone())
            .collect();
        events.retain(|e| e.session_id.as_ref().is_none_or(|id| ended.contains(id)));
    }
    Ok(project_records(&events)?)
}

pub fn ingest_events_file(path: &Path, live: bool) -> Result<Vec<RoundRecord>, IngestError> {
    let file = File::open(path).map_err(|e| unreadable(path, e))?;
    ingest_events(file, live)
}

fn parse_enum<T: DeserializeOwned>(raw: &str, column: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(raw.to_string()))
        .map_err(|_| format!("{column}: unrecognized value `{raw}`"))
}

fn parse_lower<T: DeserializeOwned>(raw: &str, column: &str) -> Result<T, String> {
    parse_enum(&raw.to_ascii_lowercase(), column)
}

fn parse_num<T: std::str::FromStr>(raw: &str, column: &str) -> Result<T, String> {
    raw.parse().map_err(|_| format!("{column}: not a number `{raw}`"))
}

struct Row<'a> {
    fields: HashMap<&'static str, &'a str>,
}

impl<'a> Row<'a> {
    fn get(&self, column: &str) -> Option<&'a str> {
        self.fields.get(column).copied().filter(|v| !v.is_empty())
    }

    fn req(&self, column: &str) -> Result<&'a str, String> {
        self.get(column).ok_or_else(|| format!("{column}: empty"))
    }
}

fn parse_row(row: &Row<'_>, coins_mapped: bool) -> Result<RoundRecord, String> {
    let session_id = row.req("session_id")?.to_string();
    let guess: Guess = parse_lower(row.req("guess")?, "guess")?;
    let market_next = parse_lower(row.req("market_next")?, "market_next")?;
    let outcome = guess.direction().map(|g| outcome_of(g, market_next));
    if let Some(raw) = row.get("outcome") {
        let stated: Outcome = parse_lower(raw, "outcome")?;
        if Some(stated) != outcome {
            return Err(format!("outcome: `{raw}` contradicts guess and market"));
        }
    }
    let mut panels_viewed = BTreeSet::new();
    if let Some(raw) = row.get("panels_viewed") {
        for name in raw.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            panels_viewed.insert(PanelKind::parse(name).ok_or_else(|| format!("panels_viewed: unknown panel `{name}`"))?);
        }
    }
    let expert_advice = row.get("expert_advice").map(|r| parse_lower(r, "expert_advice")).transpose()?;
    if expert_advice.is_some() {
        panels_viewed.insert(PanelKind::Expert);
    }
    let cohort = match (row.get("gender"), row.get("age_band"), row.get("education")) {
        (Some(g), Some(a), Some(e)) => Some(CohortKey {
            gender: parse_enum(g, "gender")?,
            age_band: parse_enum(a, "age_band")?,
            education: parse_enum(e, "education")?,
        }),
        (None, None, None) => None,
        _ => return Err("cohort: gender, age_band and education must be given together".into()),
    };
    let record = RoundRecord {
        participant_id: row.get("participant_id").unwrap_or(&session_id).to_string(),
        scenario_id: row.get("scenario_id").map(|r| parse_num(r, "scenario_id")).transpose()?.unwrap_or(1),
        group: row.get("group").map(|r| parse_enum(&r.to_ascii_uppercase(), "group")).transpose()?,
        round_index: parse_num(row.req("round_index")?, "round_index")?,
        guess,
        market_prev: parse_lower(row.req("market_prev")?, "market_prev")?,
        market_next,
        outcome,
        decision_time: parse_num(row.req("decision_time")?, "decision_time")?,
        expert_consulted: panels_viewed.contains(&PanelKind::Expert),
        panels_viewed,
        expert_advice,
        coins_after: if coins_mapped {
            parse_num(row.req("coins_after")?, "coins_after")?
        } else {
            INITIAL_COINS
        },
        cohort,
        trend: row.get("trend").map(|r| parse_lower(r, "trend")).transpose()?,
        session_id,
    };
    record.validate(None).map_err(|e| e.to_string())?;
    Ok(record)
}

/// Parses delimiter-separated round records. Rows that fail to parse or
/// validate are reported and skipped.
pub fn ingest_csv(source: impl Read, mapping: &CsvMapping) -> Result<CsvIngest, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(mapping.delimiter as u8)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| IngestError::UnreadableFile {
            path: PathBuf::new(),
            reason: e.to_string(),
        })?
        .clone();
    let position = |column: &str| headers.iter().position(|h| h == mapping.source(column));
    let mut index: Vec<(&'static str, usize)> = Vec::new();
    for column in REQUIRED_COLUMNS {
        let i = position(column).ok_or_else(|| IngestError::UnmappedColumn(column.to_string()))?;
        index.push((column, i));
    }
    for column in OPTIONAL_COLUMNS {
        if let Some(i) = position(column) {
            index.push((column, i));
        } else if mapping.columns.contains_key(column) {
            return Err(IngestError::UnmappedColumn(column.to_string()));
        }
    }
    let coins_mapped = index.iter().any(|(c, _)| *c == "coins_after");

    let mut records = Vec::new();
    let mut rejects = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                rejects.push(RejectedRow {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let fields = index.iter().map(|&(c, j)| (c, row.get(j).unwrap_or(""))).collect();
        match parse_row(&Row { fields }, coins_mapped) {
            Ok(r) => records.push(r),
            Err(reason) => rejects.push(RejectedRow { line, reason }),
        }
    }
    if !coins_mapped {
        rebuild_coins(&mut records);
    }
    Ok(CsvIngest { records, rejects })
}

pub fn ingest_csv_file(path: &Path, mapping: &CsvMapping) -> Result<CsvIngest, IngestError> {
    let file = File::open(path).map_err(|e| unreadable(path, e))?;
    ingest_csv(file, mapping).map_err(|e| match e {
        IngestError::UnreadableFile { reason, .. } => unreadable(path, reason),
        other => other,
    })
}

/// Replays the payoff rule over each session in round order.
fn rebuild_coins(records: &mut [RoundRecord]) {
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| {
        (&records[a].session_id, records[a].round_index).cmp(&(&records[b].session_id, records[b].round_index))
    });
    let mut coins = INITIAL_COINS;
    let mut current: Option<String> = None;
    for i in order {
        let r = &mut records[i];
        if current.as_deref() != Some(r.session_id.as_str()) {
            coins = INITIAL_COINS;
            current = Some(r.session_id.clone());
        }
        coins *= match r.outcome {
            Some(Outcome::Correct) => WIN_FACTOR,
            Some(Outcome::Wrong) => LOSS_FACTOR,
            None => 1.0,
        };
        r.coins_after = coins;
    }
}

fn text<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        _ => String::new(),
    }
}

/// Writes records in the CSV schema above, every column included.
pub fn write_records_csv(records: &[RoundRecord], out: impl Write) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = REQUIRED_COLUMNS.to_vec();
    header.extend(OPTIONAL_COLUMNS);
    w.write_record(&header)?;
    for r in records {
        let panels: Vec<&str> = r.panels_viewed.iter().map(|k| k.as_str()).collect();
        let cohort = r.cohort.map(|c| [text(&c.gender), text(&c.age_band), text(&c.education)]);
        let [gender, age_band, education] = cohort.unwrap_or_default();
        w.write_record([
            r.session_id.clone(),
            r.round_index.to_string(),
            text(&r.guess),
            text(&r.market_prev),
            text(&r.market_next),
            format!("{}", r.decision_time),
            r.participant_id.clone(),
            r.scenario_id.to_string(),
            r.group.map(|g| text(&g)).unwrap_or_default(),
            r.outcome.map(|o| text(&o)).unwrap_or_default(),
            panels.join(";"),
            r.expert_advice.map(|d| text(&d)).unwrap_or_default(),
            format!("{}", r.coins_after),
            gender,
            age_band,
            education,
            r.trend.map(|t| text(&t)).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Input format picked from the file extension.
pub fn ingest_path(path: &Path, mapping: Option<&CsvMapping>, live: bool) -> Result<CsvIngest, IngestError> {
    let is_csv = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        ingest_csv_file(path, &mapping.cloned().unwrap_or_default())
    } else {
        Ok(CsvIngest {
            records: ingest_events_file(path, live)?,
            rejects: Vec::new(),
        })
    }
}
