use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::AnalyticsError;
use crate::domain::Direction;

/// Counts of a categorical condition (rows) against a binary decision (columns).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointTable {
    pub condition_labels: Vec<String>,
    pub decision_labels: [String; 2],
    pub counts: Vec<[u64; 2]>,
}

impl JointTable {
    pub fn new(condition_labels: Vec<String>, decision_labels: [String; 2]) -> Self {
        let counts = vec![[0; 2]; condition_labels.len()];
        JointTable {
            condition_labels,
            decision_labels,
            counts,
        }
    }

    pub fn from_counts(counts: Vec<[u64; 2]>) -> Self {
        JointTable {
            condition_labels: (0..counts.len()).map(|i| i.to_string()).collect(),
            decision_labels: ["0".into(), "1".into()],
            counts,
        }
    }

    /// 2x2 table over (condition, decision) direction pairs, up first.
    pub fn of_directions(pairs: impl IntoIterator<Item = (Direction, Direction)>) -> Self {
        let mut t = JointTable::new(vec!["up".into(), "down".into()], ["up".into(), "down".into()]);
        for (x, y) in pairs {
            t.add(dir_index(x), dir_index(y));
        }
        t
    }

    pub fn add(&mut self, condition: usize, decision: usize) {
        self.counts[condition][decision] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|r| r[0] + r[1]).sum()
    }

    pub fn row_total(&self, i: usize) -> u64 {
        self.counts[i][0] + self.counts[i][1]
    }

    pub fn column_total(&self, j: usize) -> u64 {
        self.counts.iter().map(|r| r[j]).sum()
    }

    pub fn transpose(&self) -> Option<JointTable> {
        if self.counts.len() != 2 {
            return None;
        }
        let c = &self.counts;
        Some(JointTable {
            condition_labels: self.decision_labels.to_vec(),
            decision_labels: [self.condition_labels[0].clone(), self.condition_labels[1].clone()],
            counts: vec![[c[0][0], c[1][0]], [c[0][1], c[1][1]]],
        })
    }

    fn cells(&self) -> impl Iterator<Item = u64> + '_ {
        self.counts.iter().flat_map(|r| r.iter().copied())
    }
}

pub(crate) fn dir_index(d: Direction) -> usize {
    match d {
        Direction::Up => 0,
        Direction::Down => 1,
    }
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    entropy_bits([p, 1.0 - p])
}

fn entropy_bits(probs: impl IntoIterator<Item = f64>) -> f64 {
    probs
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MiEstimator {
    #[default]
    PlugIn,
    MillerMadow,
}

impl MiEstimator {
    pub fn name(self) -> &'static str {
        match self {
            MiEstimator::PlugIn => "plug_in",
            MiEstimator::MillerMadow => "miller_madow",
        }
    }
}

/// Plug-in mutual information of a table, in bits.
pub fn mutual_information(table: &JointTable) -> Result<f64, AnalyticsError> {
    mutual_information_with(table, MiEstimator::PlugIn)
}

pub fn mutual_information_with(table: &JointTable, estimator: MiEstimator) -> Result<f64, AnalyticsError> {
    let n = table.total();
    if n == 0 {
        return Err(AnalyticsError::EmptySample);
    }
    let plug_in = plug_in_mi(&table.counts, n);
    Ok(match estimator {
        MiEstimator::PlugIn => plug_in,
        MiEstimator::MillerMadow => {
            let nz = |it: &mut dyn Iterator<Item = u64>| it.filter(|&c| c > 0).count() as f64;
            let rows = nz(&mut (0..table.counts.len()).map(|i| table.row_total(i)));
            let cols = nz(&mut (0..2).map(|j| table.column_total(j)));
            let joint = nz(&mut table.cells());
            // Miller-Madow adds (m - 1) / 2N nats to each entropy.
            let correction = ((rows - 1.0) + (cols - 1.0) - (joint - 1.0)) / (2.0 * n as f64 * std::f64::consts::LN_2);
            (plug_in + correction).max(0.0)
        }
    })
}

fn plug_in_mi(counts: &[[u64; 2]], n: u64) -> f64 {
    let nf = n as f64;
    let col = [
        counts.iter().map(|r| r[0]).sum::<u64>() as f64,
        counts.iter().map(|r| r[1]).sum::<u64>() as f64,
    ];
    let mut mi = 0.0;
    for row in counts {
        let rt = (row[0] + row[1]) as f64;
        for j in 0..2 {
            let c = row[j] as f64;
            if c > 0.0 {
                mi += c / nf * (c * nf / (rt * col[j])).log2();
            }
        }
    }
    mi.max(0.0)
}

/// Expected plug-in bias on independent data, (k-1)(l-1) / (2N ln 2) bits.
pub fn plug_in_bias_bound(table: &JointTable) -> f64 {
    let k = table.counts.len() as f64;
    (k - 1.0) / (2.0 * table.total() as f64 * std::f64::consts::LN_2)
}

/// Leave-one-out jackknife sd of the plug-in estimate. Every observation in
/// a cell gives the same leave-one-out value, so this is exact in O(cells).
pub fn jackknife_sd(table: &JointTable) -> Result<f64, AnalyticsError> {
    let n = table.total();
    if n < 2 {
        return Err(AnalyticsError::EmptySample);
    }
    let mut loo = Vec::new();
    for i in 0..table.counts.len() {
        for j in 0..2 {
            let c = table.counts[i][j];
            if c == 0 {
                continue;
            }
            let mut counts = table.counts.clone();
            counts[i][j] -= 1;
            loo.push((plug_in_mi(&counts, n - 1), c as f64));
        }
    }
    let nf = n as f64;
    let mean = loo.iter().map(|(v, w)| v * w).sum::<f64>() / nf;
    let var = loo.iter().map(|(v, w)| w * (v - mean).powi(2)).sum::<f64>() * (nf - 1.0) / nf;
    Ok(var.sqrt())
}

/// Nonparametric bootstrap sd of the plug-in estimate. Resampling the
/// observations with replacement is a multinomial draw of the cell counts.
pub fn bootstrap_sd(table: &JointTable, resamples: usize, seed: u64) -> Result<f64, AnalyticsError> {
    bootstrap_sd_of(&[table.clone()], resamples, seed, |tables| {
        plug_in_mi(&tables[0].counts, tables[0].total().max(1))
    })
}

/// Bootstrap sd of any statistic over a set of tables sharing one sample.
pub(crate) fn bootstrap_sd_of(
    tables: &[JointTable],
    resamples: usize,
    seed: u64,
    stat: impl Fn(&[JointTable]) -> f64,
) -> Result<f64, AnalyticsError> {
    let n: u64 = tables.iter().map(JointTable::total).sum();
    if n == 0 {
        return Err(AnalyticsError::EmptySample);
    }
    if resamples < 2 {
        return Err(AnalyticsError::InvalidParameter("bootstrap needs at least 2 resamples".into()));
    }
    let cells: Vec<u64> = tables.iter().flat_map(|t| t.cells()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(resamples);
    let mut scratch = tables.to_vec();
    for _ in 0..resamples {
        let mut remaining_n = n;
        let mut remaining_mass = n;
        let mut draws = Vec::with_capacity(cells.len());
        for &c in &cells {
            let k = if remaining_mass == 0 || remaining_n == 0 {
                0
            } else if c == remaining_mass {
                remaining_n
            } else {
                let p = c as f64 / remaining_mass as f64;
                Binomial::new(remaining_n, p).expect("valid p").sample(&mut rng)
            };
            draws.push(k);
            remaining_n -= k;
            remaining_mass -= c;
        }
        let mut it = draws.into_iter();
        for t in scratch.iter_mut() {
            for row in t.counts.iter_mut() {
                row[0] = it.next().expect("cell");
                row[1] = it.next().expect("cell");
            }
        }
        values.push(stat(&scratch));
    }
    let m = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    Ok(var.sqrt())
}

/// Mutual information between a binary series and itself shifted by `lag`.
pub fn lagged_self_information(series: &[Direction], lag: usize) -> Result<f64, AnalyticsError> {
    if lag == 0 || series.len() < lag + 1 {
        return Err(AnalyticsError::TooShort { len: series.len(), lag });
    }
    let table = JointTable::of_directions(series.windows(lag + 1).map(|w| (w[0], w[lag])));
    mutual_information(&table)
}

/// One stratum of a conditional mutual information estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StratumReport {
    pub label: String,
    pub n: u64,
    pub weight: f64,
    pub bits: f64,
    /// Empty or with a constant marginal; contributes zero.
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmiReport {
    pub bits: f64,
    pub strata: Vec<StratumReport>,
}

impl CmiReport {
    pub fn degenerate_strata(&self) -> impl Iterator<Item = &StratumReport> {
        self.strata.iter().filter(|s| s.degenerate)
    }
}

/// I(X; Y | Z) = sum_z p(z) I(X; Y | Z = z) from one table per stratum.
pub fn conditional_mi_from_strata(strata: &[(String, JointTable)]) -> Result<CmiReport, AnalyticsError> {
    let n: u64 = strata.iter().map(|(_, t)| t.total()).sum();
    if n == 0 {
        return Err(AnalyticsError::EmptySample);
    }
    let mut bits = 0.0;
    let mut reports = Vec::new();
    for (label, t) in strata {
        let m = t.total();
        let weight = m as f64 / n as f64;
        let rows_used = (0..t.counts.len()).filter(|&i| t.row_total(i) > 0).count();
        let cols_used = (0..2).filter(|&j| t.column_total(j) > 0).count();
        let degenerate = m == 0 || rows_used < 2 || cols_used < 2;
        let b = if m == 0 { 0.0 } else { plug_in_mi(&t.counts, m) };
        bits += weight * b;
        reports.push(StratumReport {
            label: label.clone(),
            n: m,
            weight,
            bits: b,
            degenerate,
        });
    }
    Ok(CmiReport { bits, strata: reports })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mi_examples() {
        let indep = JointTable::from_counts(vec![[20, 30], [40, 60]]);
        assert!(mutual_information(&indep).unwrap().abs() < 1e-12);
        let diag = JointTable::from_counts(vec![[50, 0], [0, 50]]);
        assert!((mutual_information(&diag).unwrap() - 1.0).abs() < 1e-12);
        let bsc = JointTable::from_counts(vec![[70, 30], [30, 70]]);
        let expected = 1.0 - binary_entropy(0.3);
        assert!((mutual_information(&bsc).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.1187).abs() < 5e-5);
        assert_eq!(
            mutual_information(&JointTable::from_counts(vec![[0, 0], [0, 0]])).unwrap_err(),
            AnalyticsError::EmptySample
        );
    }

    #[test]
    fn miller_madow_is_larger_on_full_tables() {
        let t = JointTable::from_counts(vec![[70, 30], [30, 70]]);
        let pi = mutual_information(&t).unwrap();
        let mm = mutual_information_with(&t, MiEstimator::MillerMadow).unwrap();
        // (1 + 1 - 3) / 2N ln2 is negative for a full 2x2 table.
        assert!(mm < pi);
        assert!((pi - mm - 1.0 / (400.0 * std::f64::consts::LN_2)).abs() < 1e-12);
    }

    #[test]
    fn lagged_examples() {
        let alt: Vec<Direction> = (0..101).map(|i| if i % 2 == 0 { Direction::Up } else { Direction::Down }).collect();
        assert!((lagged_self_information(&alt, 1).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(lagged_self_information(&[Direction::Up; 50], 1).unwrap(), 0.0);
        assert!(matches!(
            lagged_self_information(&[Direction::Up], 1),
            Err(AnalyticsError::TooShort { .. })
        ));
    }

    #[test]
    fn jackknife_on_constant_table_is_zero() {
        let t = JointTable::from_counts(vec![[50, 0], [0, 0]]);
        assert_eq!(jackknife_sd(&t).unwrap(), 0.0);
    }

    #[test]
    fn bootstrap_is_seeded() {
        let t = JointTable::from_counts(vec![[70, 30], [30, 70]]);
        let a = bootstrap_sd(&t, 200, 5).unwrap();
        assert_eq!(a, bootstrap_sd(&t, 200, 5).unwrap());
        let jk = jackknife_sd(&t).unwrap();
        assert!(a > 0.5 * jk && a < 2.0 * jk, "{a} vs {jk}");
    }

    #[test]
    fn cmi_duplicate_condition_is_zero() {
        // Condition equals the stratum variable: each stratum has one row.
        let strata = vec![
            ("up".to_string(), JointTable::from_counts(vec![[30, 10], [0, 0]])),
            ("down".to_string(), JointTable::from_counts(vec![[0, 0], [15, 25]])),
        ];
        let r = conditional_mi_from_strata(&strata).unwrap();
        assert_eq!(r.bits, 0.0);
        assert_eq!(r.degenerate_strata().count(), 2);
    }

    fn table() -> impl Strategy<Value = Vec<[u64; 2]>> {
        prop::collection::vec([0u64..200, 0u64..200], 2..=2).prop_filter("nonempty", |c| {
            c.iter().map(|r| r[0] + r[1]).sum::<u64>() > 0
        })
    }

    proptest! {
        #[test]
        fn mi_nonnegative_symmetric_and_label_invariant(c in table()) {
            let t = JointTable::from_counts(c.clone());
            let mi = mutual_information(&t).unwrap();
            prop_assert!(mi >= 0.0);
            prop_assert!(mi <= 1.0 + 1e-12);
            let tt = t.transpose().unwrap();
            prop_assert!((mutual_information(&tt).unwrap() - mi).abs() < 1e-12);
            let swapped_rows = JointTable::from_counts(vec![c[1], c[0]]);
            prop_assert!((mutual_information(&swapped_rows).unwrap() - mi).abs() < 1e-12);
            let swapped_cols = JointTable::from_counts(c.iter().map(|r| [r[1], r[0]]).collect());
            prop_assert!((mutual_information(&swapped_cols).unwrap() - mi).abs() < 1e-12);
        }

        #[test]
        fn cmi_zero_for_product_strata(a in 1u64..50, b in 1u64..50, c in 1u64..50, d in 1u64..50, k in 1u64..5) {
            // Each stratum is an outer product, so X and Y are independent within it.
            let s1 = JointTable::from_counts(vec![[a * c, a * d], [b * c, b * d]]);
            let s2 = JointTable::from_counts(vec![[k * a, k * b], [a, b]]);
            let r = conditional_mi_from_strata(&[("z0".into(), s1), ("z1".into(), s2)]).unwrap();
            prop_assert!(r.bits.abs() < 1e-12);
        }
    }
}
