use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::curves::{follow_strategy_curves, stratified_curve, CurveAxis, StratifiedCurve, MAX_EXTRA_PANELS};
use super::estimate::{empirical_prob, ols, quartiles, sd_units_with, LinearFit, Quartiles, SdUnitsPolicy};
use super::info::{bootstrap_sd, bootstrap_sd_of, conditional_mi_from_strata, jackknife_sd, mutual_information_with, CmiReport, MiEstimator};
use super::pairs::{check_follow_equivalence, joint_table, pair_records, stratified_tables, Pair, RecordFilter, Variable};
use super::trees::{conditional_tree_mi, conditional_tree_wsls, total_probability_check, two_step_tree, ConditionalTree, TotalProbabilityCheck, TwoStepTree};
use super::AnalyticsError;
use crate::domain::{CohortKey, Direction, Group, Outcome, ProbEstimate, RoundRecord, TrendLabel};
use crate::session::EXPERT_RELIABILITY;

fn decisions<'a>(records: &'a [RoundRecord], filter: &RecordFilter) -> Vec<&'a RoundRecord> {
    records
        .iter()
        .filter(|r| filter.admits(r) && !r.guess.is_timeout())
        .collect()
}

fn success(records: &[&RoundRecord]) -> Option<ProbEstimate> {
    let k = records.iter().filter(|r| r.outcome == Some(Outcome::Correct)).count() as u64;
    ProbEstimate::from_counts(k, records.len() as u64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Labeled<T> {
    pub label: String,
    pub value: Option<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerformanceReport {
    pub overall: ProbEstimate,
    pub correct: u64,
    pub wrong: u64,
    pub by_trend: Vec<Labeled<ProbEstimate>>,
    pub by_extra_panels: Vec<Labeled<ProbEstimate>>,
    pub by_scenario_group: Vec<Labeled<ProbEstimate>>,
}

pub fn performance_report(records: &[RoundRecord], filter: &RecordFilter) -> Result<PerformanceReport, AnalyticsError> {
    let d = decisions(records, filter);
    let overall = success(&d).ok_or(AnalyticsError::EmptySample)?;
    let correct = overall.successes();
    let by_trend = TrendLabel::ALL
        .iter()
        .map(|&t| {
            let sub: Vec<&RoundRecord> = d.iter().copied().filter(|r| r.trend == Some(t)).collect();
            Labeled {
                label: t.as_str().into(),
                value: success(&sub),
            }
        })
        .collect();
    let by_extra_panels = (0..=MAX_EXTRA_PANELS)
        .map(|k| {
            let sub: Vec<&RoundRecord> = d
                .iter()
                .copied()
                .filter(|r| r.extra_panels().min(MAX_EXTRA_PANELS) == k)
                .collect();
            Labeled {
                label: k.to_string(),
                value: success(&sub),
            }
        })
        .collect();
    let mut groups: BTreeMap<(u8, Option<Group>), Vec<&RoundRecord>> = BTreeMap::new();
    for r in &d {
        groups.entry((r.scenario_id, r.group)).or_default().push(r);
    }
    let by_scenario_group = groups
        .into_iter()
        .map(|((s, g), sub)| Labeled {
            label: match g {
                Some(g) => format!("{s}{g:?}"),
                None => s.to_string(),
            },
            value: success(&sub),
        })
        .collect();
    Ok(PerformanceReport {
        overall,
        correct,
        wrong: overall.n - correct,
        by_trend,
        by_extra_panels,
        by_scenario_group,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundTimes {
    pub round: u8,
    pub quartiles: Option<Quartiles>,
    pub mean_extra_panels: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeStats {
    pub global: Quartiles,
    pub per_round: Vec<RoundTimes>,
    /// Decision time regressed on the number of extra panels consulted.
    pub time_vs_panels: Option<LinearFit>,
    pub mean_extra_panels: f64,
    pub mean_panels_viewed: f64,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| s / n as f64)
}

pub fn time_stats(records: &[RoundRecord], filter: &RecordFilter) -> Result<TimeStats, AnalyticsError> {
    let d = filter.apply(records);
    let times: Vec<f64> = d.iter().map(|r| r.decision_time).collect();
    let global = quartiles(&times).ok_or(AnalyticsError::EmptySample)?;
    let per_round = (1..=25u8)
        .map(|round| {
            let sub: Vec<&&RoundRecord> = d.iter().filter(|r| r.round_index == round).collect();
            let t: Vec<f64> = sub.iter().map(|r| r.decision_time).collect();
            RoundTimes {
                round,
                quartiles: quartiles(&t),
                mean_extra_panels: mean(sub.iter().map(|r| r.extra_panels() as f64)),
            }
        })
        .collect();
    let x: Vec<f64> = d.iter().map(|r| r.extra_panels() as f64).collect();
    Ok(TimeStats {
        global,
        per_round,
        time_vs_panels: ols(&x, &times).ok(),
        mean_extra_panels: mean(x.iter().copied()).expect("nonempty"),
        mean_panels_viewed: mean(d.iter().map(|r| r.panels_viewed.len() as f64)).expect("nonempty"),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpertEffect {
    pub policy: String,
    /// p(guess = stated advice | expert consulted).
    pub trust: ProbEstimate,
    pub trust_vs_reliability_sd: Option<f64>,
    pub follow_reference: Option<ProbEstimate>,
    pub follow_consulted: Option<ProbEstimate>,
    pub follow_not_consulted: Option<ProbEstimate>,
    pub follow_delta: Option<f64>,
    pub follow_delta_sd: Option<f64>,
}

pub fn expert_effect(
    records: &[RoundRecord],
    pairs: &[Pair],
    filter: &RecordFilter,
    policy: SdUnitsPolicy,
) -> Result<ExpertEffect, AnalyticsError> {
    let consulted: Vec<&RoundRecord> = decisions(records, filter)
        .into_iter()
        .filter(|r| r.expert_consulted && r.expert_advice.is_some())
        .collect();
    let agree = consulted
        .iter()
        .filter(|r| r.guess.direction() == r.expert_advice)
        .count() as u64;
    let trust = empirical_prob(agree, consulted.len() as u64)?;
    let follow = |sel: &dyn Fn(&Pair) -> bool| {
        let sub: Vec<&Pair> = pairs.iter().filter(|p| sel(p)).collect();
        ProbEstimate::from_counts(sub.iter().filter(|p| p.follows()).count() as u64, sub.len() as u64)
    };
    let follow_reference = follow(&|_| true);
    let follow_consulted = follow(&|p| p.record.expert_consulted);
    let follow_not_consulted = follow(&|p| !p.record.expert_consulted);
    let delta = follow_consulted.zip(follow_reference);
    Ok(ExpertEffect {
        policy: policy.name().into(),
        trust_vs_reliability_sd: sd_units_with(policy, &trust, &ProbEstimate::exact(EXPERT_RELIABILITY)).ok(),
        trust,
        follow_reference,
        follow_consulted,
        follow_not_consulted,
        follow_delta: delta.map(|(a, b)| a.p - b.p),
        follow_delta_sd: delta.and_then(|(a, b)| sd_units_with(policy, &a, &b).ok()),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CohortGrouping {
    Gender,
    AgeBand,
    Education,
    Full,
}

impl CohortGrouping {
    fn label<T: Serialize + std::fmt::Debug>(v: &T) -> String {
        match serde_json::to_value(v) {
            Ok(serde_json::Value::String(s)) => s,
            _ => format!("{v:?}"),
        }
    }

    fn key(self, c: &CohortKey) -> String {
        match self {
            CohortGrouping::Gender => Self::label(&c.gender),
            CohortGrouping::AgeBand => Self::label(&c.age_band),
            CohortGrouping::Education => Self::label(&c.education),
            CohortGrouping::Full => format!(
                "{}/{}/{}",
                Self::label(&c.gender),
                Self::label(&c.age_band),
                Self::label(&c.education)
            ),
        }
    }

    /// Every group of this grouping, observed or not. `Full` lists only observed keys.
    fn all_labels(self) -> Vec<String> {
        use crate::domain::{AgeBand, Education, Gender};
        match self {
            CohortGrouping::Gender => Gender::ALL.iter().map(Self::label).collect(),
            CohortGrouping::AgeBand => AgeBand::ALL.iter().map(Self::label).collect(),
            CohortGrouping::Education => Education::ALL.iter().map(Self::label).collect(),
            CohortGrouping::Full => Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortGroupReport {
    pub label: String,
    pub records: usize,
    pub empty: bool,
    pub follow: Option<ProbEstimate>,
    pub success: Option<ProbEstimate>,
    pub time: Option<Quartiles>,
    pub mean_extra_panels: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortReport {
    pub grouping: CohortGrouping,
    pub groups: Vec<CohortGroupReport>,
    pub without_cohort: usize,
}

pub fn cohort_report(records: &[RoundRecord], filter: &RecordFilter, grouping: CohortGrouping) -> CohortReport {
    let mut by: BTreeMap<String, Vec<RoundRecord>> = grouping.all_labels().into_iter().map(|l| (l, Vec::new())).collect();
    let mut without_cohort = 0;
    for r in records.iter().filter(|r| filter.admits(r)) {
        match &r.cohort {
            Some(c) => by.entry(grouping.key(c)).or_default().push(r.clone()),
            None => without_cohort += 1,
        }
    }
    let groups = by
        .into_iter()
        .map(|(label, recs)| {
            let pairs = pair_records(&recs, filter).pairs;
            let d = decisions(&recs, filter);
            let times: Vec<f64> = recs.iter().map(|r| r.decision_time).collect();
            CohortGroupReport {
                label,
                records: recs.len(),
                empty: recs.is_empty(),
                follow: ProbEstimate::from_counts(
                    pairs.iter().filter(|p| p.follows()).count() as u64,
                    pairs.len() as u64,
                ),
                success: success(&d),
                time: quartiles(&times),
                mean_extra_panels: mean(recs.iter().map(|r| r.extra_panels() as f64)),
            }
        })
        .collect();
    CohortReport {
        grouping,
        groups,
        without_cohort,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub label: String,
    pub subject_count: u64,
    pub subject: ProbEstimate,
    pub market_count: u64,
    pub market: ProbEstimate,
    pub difference: f64,
    pub sd_units: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table1 {
    pub policy: String,
    pub rows: Vec<Table1Row>,
}

/// Up/down and repeat/change frequencies of participants against the market.
pub fn table1(records: &[RoundRecord], pairs: &[Pair], filter: &RecordFilter, policy: SdUnitsPolicy) -> Result<Table1, AnalyticsError> {
    let d = decisions(records, filter);
    let n = d.len() as u64;
    let up = d.iter().filter(|r| r.guess.direction() == Some(Direction::Up)).count() as u64;
    let m_up = d.iter().filter(|r| r.market_next == Direction::Up).count() as u64;
    let np = pairs.len() as u64;
    let rep = pairs.iter().filter(|p| p.repeated()).count() as u64;
    let m_rep = pairs.iter().filter(|p| p.market_prev == p.record.market_next).count() as u64;
    let mut rows = Vec::new();
    for (label, k, mk, total) in [
        ("up", up, m_up, n),
        ("down", n - up, n - m_up, n),
        ("repeat", rep, m_rep, np),
        ("change", np - rep, np - m_rep, np),
    ] {
        let subject = empirical_prob(k, total)?;
        let market = empirical_prob(mk, total)?;
        rows.push(Table1Row {
            label: label.into(),
            subject_count: k,
            subject,
            market_count: mk,
            market,
            difference: subject.p - market.p,
            sd_units: sd_units_with(policy, &subject, &market).ok(),
        });
    }
    Ok(Table1 {
        policy: policy.name().into(),
        rows,
    })
}

/// An information estimate with its uncertainty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiEstimate {
    pub bits: f64,
    pub jackknife_sd: Option<f64>,
    pub bootstrap_sd: Option<f64>,
    pub n: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InformationReport {
    pub estimator: String,
    pub guess_vs_market_prev: MiEstimate,
    pub guess_vs_prev_outcome: MiEstimate,
    pub market_self: MiEstimate,
    pub guess_self: MiEstimate,
    /// I(guess; market_prev | prev_outcome).
    pub market_given_outcome: CmiReport,
    pub market_given_outcome_bootstrap_sd: Option<f64>,
    /// I(guess; prev_outcome | market_prev).
    pub outcome_given_market: CmiReport,
    pub outcome_given_market_bootstrap_sd: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InformationOptions {
    pub estimator: MiEstimator,
    pub bootstrap_resamples: usize,
    pub bootstrap_seed: u64,
}

impl Default for InformationOptions {
    fn default() -> Self {
        InformationOptions {
            estimator: MiEstimator::PlugIn,
            bootstrap_resamples: 1000,
            bootstrap_seed: 0,
        }
    }
}

pub fn information_report(pairs: &[Pair], opts: &InformationOptions) -> Result<InformationReport, AnalyticsError> {
    if pairs.is_empty() {
        return Err(AnalyticsError::EmptySample);
    }
    let mi = |condition: Variable, target: Variable, salt: u64| -> Result<MiEstimate, AnalyticsError> {
        let t = joint_table(pairs, condition, target);
        Ok(MiEstimate {
            bits: mutual_information_with(&t, opts.estimator)?,
            jackknife_sd: jackknife_sd(&t).ok(),
            bootstrap_sd: bootstrap_sd(&t, opts.bootstrap_resamples, opts.bootstrap_seed ^ salt).ok(),
            n: t.total(),
        })
    };
    let cmi = |condition: Variable, given: Variable, salt: u64| -> Result<(CmiReport, Option<f64>), AnalyticsError> {
        let strata = stratified_tables(pairs, Variable::Guess, condition, given);
        let report = conditional_mi_from_strata(&strata)?;
        let tables: Vec<_> = strata.iter().map(|(_, t)| t.clone()).collect();
        let sd = bootstrap_sd_of(&tables, opts.bootstrap_resamples, opts.bootstrap_seed ^ salt, |ts| {
            let labeled: Vec<(String, _)> = ts.iter().map(|t| (String::new(), t.clone())).collect();
            conditional_mi_from_strata(&labeled).map(|r| r.bits).unwrap_or(0.0)
        })
        .ok();
        Ok((report, sd))
    };
    let (market_given_outcome, market_given_outcome_bootstrap_sd) = cmi(Variable::MarketPrev, Variable::PrevOutcome, 5)?;
    let (outcome_given_market, outcome_given_market_bootstrap_sd) = cmi(Variable::PrevOutcome, Variable::MarketPrev, 6)?;
    Ok(InformationReport {
        estimator: opts.estimator.name().into(),
        guess_vs_market_prev: mi(Variable::MarketPrev, Variable::Guess, 1)?,
        guess_vs_prev_outcome: mi(Variable::PrevOutcome, Variable::Guess, 2)?,
        market_self: mi(Variable::MarketPrev, Variable::MarketNext, 3)?,
        guess_self: mi(Variable::PrevGuess, Variable::Guess, 4)?,
        market_given_outcome,
        market_given_outcome_bootstrap_sd,
        outcome_given_market,
        outcome_given_market_bootstrap_sd,
    })
}

/// Settings of a full analysis run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    #[serde(default)]
    pub filter: RecordFilter,
    #[serde(default)]
    pub sd_policy: SdUnitsPolicy,
    #[serde(default)]
    pub information: InformationOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleCounts {
    pub records: usize,
    pub decisions: usize,
    pub timeouts: usize,
    pub excluded_scenario_records: usize,
    pub pairs: usize,
    pub inconsistent_pairs: usize,
}

/// Curves of one conditional probability against time, panels and expert use.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalCurves {
    pub condition: String,
    pub event: String,
    pub curves: Vec<StratifiedCurve>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub config: AnalysisConfig,
    pub counts: SampleCounts,
    pub follow_equivalence_checked: usize,
    pub table1: Table1,
    pub mi_tree: ConditionalTree,
    pub wsls_tree: ConditionalTree,
    pub two_step: TwoStepTree,
    pub total_probability: TotalProbabilityCheck,
    pub information: InformationReport,
    pub follow_curves: Vec<StratifiedCurve>,
    pub conditional_curves: Vec<ConditionalCurves>,
    pub performance: PerformanceReport,
    pub time: TimeStats,
    pub expert: Option<ExpertEffect>,
    pub cohorts: Vec<CohortReport>,
}

const AXES: [CurveAxis; 3] = [CurveAxis::TimeBins5s, CurveAxis::PanelCount, CurveAxis::ExpertFlag];

fn conditional_curves(pairs: &[Pair]) -> Vec<ConditionalCurves> {
    type Sel = fn(&Pair) -> bool;
    let specs: [(&str, &str, Sel, Sel); 4] = [
        ("up_m", "up", |p| p.market_prev == Direction::Up, |p| p.guess == Direction::Up),
        ("down_m", "down", |p| p.market_prev == Direction::Down, |p| p.guess == Direction::Down),
        ("correct", "repeat", |p| p.prev_outcome == Outcome::Correct, |p| p.repeated()),
        ("wrong", "change", |p| p.prev_outcome == Outcome::Wrong, |p| !p.repeated()),
    ];
    specs
        .iter()
        .filter_map(|(condition, event, sel, ev)| {
            let sub: Vec<Pair> = pairs.iter().filter(|p| sel(p)).copied().collect();
            let curves = AXES
                .iter()
                .filter_map(|&a| stratified_curve(&sub, a, ev).ok())
                .collect::<Vec<_>>();
            (!curves.is_empty()).then(|| ConditionalCurves {
                condition: condition.to_string(),
                event: event.to_string(),
                curves,
            })
        })
        .collect()
}

/// Every statistic over one record collection.
pub fn analyze(records: &[RoundRecord], config: &AnalysisConfig) -> Result<AnalysisReport, AnalyticsError> {
    let filter = config.filter;
    let set = pair_records(records, &filter);
    let pairs = &set.pairs;
    if pairs.is_empty() {
        return Err(AnalyticsError::EmptySample);
    }
    let follow_equivalence_checked = check_follow_equivalence(pairs)?;
    let counts = SampleCounts {
        records: records.len(),
        decisions: decisions(records, &filter).len(),
        timeouts: records.iter().filter(|r| r.guess.is_timeout()).count(),
        excluded_scenario_records: records.iter().filter(|r| r.excluded_by_default()).count(),
        pairs: pairs.len(),
        inconsistent_pairs: set.inconsistent,
    };
    let has_cohorts = records.iter().any(|r| r.cohort.is_some());
    Ok(AnalysisReport {
        config: *config,
        counts,
        follow_equivalence_checked,
        table1: table1(records, pairs, &filter, config.sd_policy)?,
        mi_tree: conditional_tree_mi(pairs)?,
        wsls_tree: conditional_tree_wsls(pairs)?,
        two_step: two_step_tree(pairs)?,
        total_probability: total_probability_check(pairs)?,
        information: information_report(pairs, &config.information)?,
        follow_curves: AXES
            .iter()
            .map(|&a| follow_strategy_curves(pairs, a))
            .collect::<Result<_, _>>()?,
        conditional_curves: conditional_curves(pairs),
        performance: performance_report(records, &filter)?,
        time: time_stats(records, &filter)?,
        expert: expert_effect(records, pairs, &filter, config.sd_policy).ok(),
        cohorts: if has_cohorts {
            [CohortGrouping::Gender, CohortGrouping::AgeBand, CohortGrouping::Education]
                .iter()
                .map(|&g| cohort_report(records, &filter, g))
                .collect()
        } else {
            Vec::new()
        },
    })
}
