use serde::{Deserialize, Serialize};

use super::pairs::Pair;
use super::AnalyticsError;
use crate::domain::ProbEstimate;

pub const TIME_BIN_SECS: f64 = 5.0;
pub const TIME_BINS: usize = 6;
pub const MAX_EXTRA_PANELS: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveAxis {
    /// Decision time in 5 s bins; the last bin also holds anything beyond 30 s.
    TimeBins5s,
    /// Distinct panels consulted besides the home chart, 0 to 6.
    PanelCount,
    /// Whether the expert was consulted.
    ExpertFlag,
}

impl CurveAxis {
    pub fn name(self) -> &'static str {
        match self {
            CurveAxis::TimeBins5s => "time_5s",
            CurveAxis::PanelCount => "panel_count",
            CurveAxis::ExpertFlag => "expert",
        }
    }

    pub fn bin_labels(self) -> Vec<String> {
        match self {
            CurveAxis::TimeBins5s => (0..TIME_BINS)
                .map(|i| format!("{}-{}", i * 5, (i + 1) * 5))
                .collect(),
            CurveAxis::PanelCount => (0..=MAX_EXTRA_PANELS).map(|i| i.to_string()).collect(),
            CurveAxis::ExpertFlag => vec!["no_expert".into(), "expert".into()],
        }
    }

    pub fn bin_of(self, p: &Pair) -> usize {
        match self {
            CurveAxis::TimeBins5s => ((p.record.decision_time / TIME_BIN_SECS).floor().max(0.0) as usize).min(TIME_BINS - 1),
            CurveAxis::PanelCount => p.record.extra_panels().min(MAX_EXTRA_PANELS),
            CurveAxis::ExpertFlag => usize::from(p.record.expert_consulted),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveBin {
    pub label: String,
    pub n: u64,
    pub estimate: Option<ProbEstimate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StratifiedCurve {
    pub axis: CurveAxis,
    pub bins: Vec<CurveBin>,
    pub reference: ProbEstimate,
}

/// Probability of `event` in every bin of `axis`, with the pooled reference.
pub fn stratified_curve(pairs: &[Pair], axis: CurveAxis, event: impl Fn(&Pair) -> bool) -> Result<StratifiedCurve, AnalyticsError> {
    if pairs.is_empty() {
        return Err(AnalyticsError::EmptySample);
    }
    let labels = axis.bin_labels();
    let mut counts = vec![(0u64, 0u64); labels.len()];
    let mut hits = 0u64;
    for p in pairs {
        let c = &mut counts[axis.bin_of(p)];
        c.1 += 1;
        if event(p) {
            c.0 += 1;
            hits += 1;
        }
    }
    Ok(StratifiedCurve {
        axis,
        bins: labels
            .into_iter()
            .zip(counts)
            .map(|(label, (k, n))| CurveBin {
                label,
                n,
                estimate: ProbEstimate::from_counts(k, n),
            })
            .collect(),
        reference: ProbEstimate::from_counts(hits, pairs.len() as u64).expect("nonempty"),
    })
}

/// Probability of following the (aggregated) emerging strategy per bin.
pub fn follow_strategy_curves(pairs: &[Pair], axis: CurveAxis) -> Result<StratifiedCurve, AnalyticsError> {
    stratified_curve(pairs, axis, |p| p.follows())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::pairs::{pair_records, RecordFilter};
    use crate::domain::{outcome_of, Direction, Guess, RoundRecord};
    use std::collections::BTreeSet;

    fn recs(times: &[f64]) -> Vec<RoundRecord> {
        times
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let d = if i % 2 == 0 { Direction::Up } else { Direction::Down };
                RoundRecord {
                    participant_id: "p".into(),
                    session_id: "s".into(),
                    scenario_id: 1,
                    group: None,
                    round_index: i as u8 + 1,
                    guess: Guess::Up,
                    market_prev: !d,
                    market_next: d,
                    outcome: Some(outcome_of(Direction::Up, d)),
                    decision_time: t,
                    panels_viewed: BTreeSet::new(),
                    expert_consulted: false,
                    expert_advice: None,
                    coins_after: 1000.0,
                    cohort: None,
                    trend: None,
                }
            })
            .collect()
    }

    #[test]
    fn empty_bins_have_no_estimate_and_counts_add_up() {
        let r = recs(&[1.0, 2.0, 6.0, 11.0, 3.0, 30.0]);
        let set = pair_records(&r, &RecordFilter::default());
        let c = follow_strategy_curves(&set.pairs, CurveAxis::TimeBins5s).unwrap();
        assert_eq!(c.bins.len(), 6);
        assert_eq!(c.bins.iter().map(|b| b.n).sum::<u64>(), set.pairs.len() as u64);
        assert_eq!(c.bins[4].n, 0);
        assert!(c.bins[4].estimate.is_none());
        assert_eq!(c.bins[5].n, 1);
        // Always up after alternating markets follows exactly when the market rose.
        let follow = set.pairs.iter().filter(|p| p.market_prev == Direction::Up).count();
        assert_eq!(c.reference.successes(), follow as u64);
    }

    #[test]
    fn empty_sample() {
        assert_eq!(follow_strategy_curves(&[], CurveAxis::ExpertFlag).unwrap_err(), AnalyticsError::EmptySample);
    }
}
