//! Report bundle: the full analysis as JSON plus one plot-ready CSV per figure.

use std::path::Path;

use mrbanks_core::analytics::{analyze, AnalysisConfig, AnalysisReport, AnalyticsError, ConditionalTree};
use mrbanks_core::domain::{ProbEstimate, RoundRecord};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const CSV_FILES: [&str; 6] = [
    "fig2_time.csv",
    "fig3_mi_tree.csv",
    "fig4_wsls_tree.csv",
    "fig5_two_step.csv",
    "fig6_follow.csv",
    "table1.csv",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleMetadata {
    /// SHA-256 of the input bytes.
    pub input_hash: String,
    pub seed: u64,
    pub sd_policy: String,
    pub mi_estimator: String,
    pub timeouts_excluded: bool,
    pub scenario4_excluded: bool,
    pub records: usize,
    pub generator: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub metadata: BundleMetadata,
    pub analysis: AnalysisReport,
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error("cannot write report: {0}")]
    Io(#[from] std::io::Error),
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Analyzes `records`. The bootstrap seed of `config` is replaced by `seed`.
pub fn build_bundle(
    records: &[RoundRecord],
    config: &AnalysisConfig,
    input_hash: String,
    seed: u64,
) -> Result<ReportBundle, AnalyticsError> {
    let mut config = *config;
    config.information.bootstrap_seed = seed;
    let analysis = analyze(records, &config)?;
    Ok(ReportBundle {
        metadata: BundleMetadata {
            input_hash,
            seed,
            sd_policy: config.sd_policy.name().to_string(),
            mi_estimator: analysis.information.estimator.clone(),
            timeouts_excluded: !config.filter.include_timeouts,
            scenario4_excluded: !config.filter.include_excluded_scenarios,
            records: records.len(),
            generator: format!("mrbanks {}", env!("CARGO_PKG_VERSION")),
        },
        analysis,
    })
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn est(e: &Option<ProbEstimate>) -> [String; 2] {
    match e {
        Some(e) => [num(e.p), num(e.sd)],
        None => [String::new(), String::new()],
    }
}

fn label<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

fn table(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

fn tree_csv(tree: &ConditionalTree) -> String {
    let mut rows = Vec::new();
    for node in &tree.nodes {
        let condition = node.path.join("/");
        for (label, e) in node.labels.iter().zip([&node.first, &node.second]) {
            let [p, sd] = est(e);
            rows.push(vec![condition.clone(), label.clone(), p, sd, node.n.to_string()]);
        }
    }
    table(&["condition", "event", "probability", "sd", "n"], rows)
}

impl ReportBundle {
    /// Plot-ready tables, named as in [`CSV_FILES`].
    pub fn csv_files(&self) -> Vec<(&'static str, String)> {
        let a = &self.analysis;
        let mut fig2 = vec![{
            let q = &a.time.global;
            vec![
                "all".into(),
                q.n.to_string(),
                num(q.q1),
                num(q.q2),
                num(q.q3),
                num(a.time.mean_extra_panels),
            ]
        }];
        for r in &a.time.per_round {
            let (n, q1, q2, q3) = match &r.quartiles {
                Some(q) => (q.n.to_string(), num(q.q1), num(q.q2), num(q.q3)),
                None => ("0".into(), String::new(), String::new(), String::new()),
            };
            fig2.push(vec![r.round.to_string(), n, q1, q2, q3, opt(r.mean_extra_panels)]);
        }

        let fig5 = a
            .two_step
            .leaves
            .iter()
            .map(|l| {
                vec![
                    label(&l.prev_guess),
                    label(&l.prev_outcome),
                    label(&l.market_prev),
                    opt(l.p_up),
                    opt(l.mi_p_up),
                    opt(l.wsls_p_up),
                    opt(l.mi_distance),
                    opt(l.wsls_distance),
                    l.closer.as_ref().map(label).unwrap_or_default(),
                ]
            })
            .collect();

        let mut fig6 = Vec::new();
        for curve in &a.follow_curves {
            let axis = curve.axis.name().to_string();
            fig6.push(vec![
                axis.clone(),
                "all".into(),
                curve.reference.n.to_string(),
                num(curve.reference.p),
                num(curve.reference.sd),
            ]);
            for bin in &curve.bins {
                let [p, sd] = est(&bin.estimate);
                fig6.push(vec![axis.clone(), bin.label.clone(), bin.n.to_string(), p, sd]);
            }
        }

        let t1 = a
            .table1
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.label.clone(),
                    r.subject_count.to_string(),
                    num(r.subject.p),
                    num(r.subject.sd),
                    r.market_count.to_string(),
                    num(r.market.p),
                    num(r.market.sd),
                    num(r.difference),
                    opt(r.sd_units),
                ]
            })
            .collect();

        vec![
            (
                CSV_FILES[0],
                table(&["round", "n", "q1", "median", "q3", "mean_extra_panels"], fig2),
            ),
            (CSV_FILES[1], tree_csv(&a.mi_tree)),
            (CSV_FILES[2], tree_csv(&a.wsls_tree)),
            (
                CSV_FILES[3],
                table(
                    &[
                        "prev_guess",
                        "prev_outcome",
                        "market_prev",
                        "p_up",
                        "mi_p_up",
                        "wsls_p_up",
                        "mi_distance",
                        "wsls_distance",
                        "closer",
                    ],
                    fig5,
                ),
            ),
            (CSV_FILES[4], table(&["axis", "bin", "n", "follow_prob", "sd"], fig6)),
            (
                CSV_FILES[5],
                table(
                    &[
                        "label",
                        "subject_count",
                        "subject_p",
                        "subject_sd",
                        "market_count",
                        "market_p",
                        "market_sd",
                        "difference",
                        "sd_units",
                    ],
                    t1,
                ),
            ),
        ]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serializes")
    }

    /// Writes `report.json` and the CSVs into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<(), ReportError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.to_json())?;
        for (name, body) in self.csv_files() {
            std::fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}
