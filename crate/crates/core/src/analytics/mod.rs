//! Statistics over round records: probabilities and their differences,
//! mutual information, strategy labels, conditional trees, stratified
//! curves and the per-figure reports.

mod curves;
mod estimate;
mod info;
mod pairs;
mod reports;
mod trees;

pub use curves::{follow_strategy_curves, stratified_curve, CurveAxis, CurveBin, StratifiedCurve, MAX_EXTRA_PANELS, TIME_BINS, TIME_BIN_SECS};
pub use estimate::{empirical_prob, ols, quantile_sorted, quartiles, sd_units, sd_units_with, LinearFit, Quartiles, SdUnitsPolicy};
pub use info::{
    binary_entropy, bootstrap_sd, conditional_mi_from_strata, jackknife_sd, lagged_self_information, mutual_information,
    mutual_information_with, plug_in_bias_bound, CmiReport, JointTable, MiEstimator, StratumReport,
};
pub use pairs::{
    check_follow_equivalence, conditional_mutual_information, follow_label, follow_truth_table, joint_table, pair_records,
    stratified_tables, DecisionContext, Follow, Pair, PairSet, RecordFilter, StrategyBasis, StrategyLabel, TruthRow, Variable,
};
pub use reports::{
    analyze, cohort_report, expert_effect, information_report, performance_report, table1, time_stats, AnalysisConfig,
    AnalysisReport, CohortGroupReport, CohortGrouping, CohortReport, ConditionalCurves, ExpertEffect, InformationOptions,
    InformationReport, Labeled, MiEstimate, PerformanceReport, RoundTimes, SampleCounts, Table1, Table1Row, TimeStats,
};
pub use trees::{
    conditional_tree_mi, conditional_tree_wsls, leaf_label, total_probability_check, two_step_tree, ConditionalTree, Dominance,
    LeafComparison, TotalProbabilityCheck, TreeNode, TwoStepTree,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalyticsError {
    #[error("no samples left after filtering")]
    EmptySample,
    #[error("{successes} successes out of {trials} trials")]
    InvalidCounts { successes: u64, trials: u64 },
    #[error("both estimates have zero variance")]
    ZeroVariance,
    #[error("missing context: {0}")]
    MissingContext(&'static str),
    #[error("series of length {len} too short for lag {lag}")]
    TooShort { len: usize, lag: usize },
    #[error("imitation and win-stay lose-shift labels disagree in session {session} round {round}")]
    FollowMismatch { session: String, round: u8 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
