use serde::{Deserialize, Serialize};

use super::pairs::Pair;
use super::AnalyticsError;
use crate::domain::{Direction, Outcome, ProbEstimate};

/// One condition path with the split of a binary decision under it.
/// `second` is always the complement of `first` on the same sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub path: Vec<String>,
    pub labels: [String; 2],
    pub n: u64,
    pub first: Option<ProbEstimate>,
    pub second: Option<ProbEstimate>,
}

impl TreeNode {
    fn from_counts(path: &[&str], labels: [&str; 2], k: u64, n: u64) -> Self {
        let first = ProbEstimate::from_counts(k, n);
        TreeNode {
            path: path.iter().map(|s| s.to_string()).collect(),
            labels: labels.map(String::from),
            n,
            first,
            second: first.map(ProbEstimate::complement),
        }
    }

    pub fn prob(&self, label: &str) -> Option<f64> {
        if label == self.labels[0] {
            self.first.map(|e| e.p)
        } else if label == self.labels[1] {
            self.second.map(|e| e.p)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalTree {
    pub name: String,
    pub nodes: Vec<TreeNode>,
}

impl ConditionalTree {
    pub fn node(&self, path: &[&str]) -> Option<&TreeNode> {
        self.nodes.iter().find(|n| n.path.iter().map(String::as_str).eq(path.iter().copied()))
    }

    /// Probability of `label` under `path`, if the node has data.
    pub fn prob(&self, path: &[&str], label: &str) -> Option<f64> {
        self.node(path)?.prob(label)
    }

    pub fn estimate(&self, path: &[&str]) -> Option<ProbEstimate> {
        self.node(path)?.first
    }

    /// Largest |first + second - 1| over populated nodes.
    pub fn max_row_defect(&self) -> f64 {
        self.nodes
            .iter()
            .filter_map(|n| Some((n.first?.p + n.second?.p - 1.0).abs()))
            .fold(0.0, f64::max)
    }
}

fn market_label(d: Direction) -> &'static str {
    match d {
        Direction::Up => "up_m",
        Direction::Down => "down_m",
    }
}

/// p(guess | previous market move).
pub fn conditional_tree_mi(pairs: &[Pair]) -> Result<ConditionalTree, AnalyticsError> {
    if pairs.is_empty() {
        return Err(AnalyticsError::EmptySample);
    }
    let nodes = Direction::ALL
        .iter()
        .map(|&m| {
            let n = pairs.iter().filter(|p| p.market_prev == m).count() as u64;
            let k = pairs.iter().filter(|p| p.market_prev == m && p.guess == Direction::Up).count() as u64;
            TreeNode::from_counts(&[market_label(m)], ["up", "down"], k, n)
        })
        .collect();
    Ok(ConditionalTree {
        name: "market_imitation".into(),
        nodes,
    })
}

/// p(repeat | previous outcome).
pub fn conditional_tree_wsls(pairs: &[Pair]) -> Result<ConditionalTree, AnalyticsError> {
    if pairs.is_empty() {
        return Err(AnalyticsError::EmptySample);
    }
    let nodes = Outcome::ALL
        .iter()
        .map(|&o| {
            let n = pairs.iter().filter(|p| p.prev_outcome == o).count() as u64;
            let k = pairs.iter().filter(|p| p.prev_outcome == o && p.repeated()).count() as u64;
            TreeNode::from_counts(&[o.as_str()], ["repeat", "change"], k, n)
        })
        .collect();
    Ok(ConditionalTree {
        name: "win_stay_lose_shift".into(),
        nodes,
    })
}

/// One leaf of the two-step tree with its distances to both strategies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafComparison {
    pub prev_guess: Direction,
    pub prev_outcome: Outcome,
    pub market_prev: Direction,
    pub p_up: Option<f64>,
    /// p(up | market_prev) from the imitation tree.
    pub mi_p_up: Option<f64>,
    /// p(up) implied by the repeat/change split for this outcome.
    pub wsls_p_up: Option<f64>,
    pub mi_distance: Option<f64>,
    pub wsls_distance: Option<f64>,
    pub closer: Option<Dominance>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dominance {
    MarketImitation,
    WinStayLoseShift,
    Tie,
}

impl Dominance {
    fn of(mi: f64, wsls: f64) -> Self {
        if mi < wsls {
            Dominance::MarketImitation
        } else if wsls < mi {
            Dominance::WinStayLoseShift
        } else {
            Dominance::Tie
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoStepTree {
    pub tree: ConditionalTree,
    pub leaves: Vec<LeafComparison>,
    pub mean_mi_distance: Option<f64>,
    pub mean_wsls_distance: Option<f64>,
    pub verdict: Option<Dominance>,
}

pub fn leaf_label(prev_guess: Direction, prev_outcome: Outcome) -> [&'static str; 2] {
    let o = match prev_outcome {
        Outcome::Correct => "success",
        Outcome::Wrong => "failure",
    };
    [prev_guess.as_str(), o]
}

/// p(guess | previous guess, previous outcome), compared leaf by leaf with
/// the one-step imitation and win-stay lose-shift trees.
pub fn two_step_tree(pairs: &[Pair]) -> Result<TwoStepTree, AnalyticsError> {
    let mi = conditional_tree_mi(pairs)?;
    let wsls = conditional_tree_wsls(pairs)?;
    let mut nodes = Vec::new();
    let mut leaves = Vec::new();
    for g in Direction::ALL {
        for o in Outcome::ALL {
            let within = pairs.iter().filter(|p| p.prev_guess == g && p.prev_outcome == o);
            let n = within.clone().count() as u64;
            let k = within.filter(|p| p.guess == Direction::Up).count() as u64;
            let path = leaf_label(g, o);
            let node = TreeNode::from_counts(&path, ["up", "down"], k, n);
            let market_prev = match o {
                Outcome::Correct => g,
                Outcome::Wrong => !g,
            };
            let p_up = node.prob("up");
            let mi_p_up = mi.prob(&[market_label(market_prev)], "up");
            // Following the rule means repeating after a win and changing after a loss.
            let wsls_p_up = wsls.node(&[o.as_str()]).and_then(|w| {
                let repeat = w.prob("repeat")?;
                Some(if g == Direction::Up { repeat } else { 1.0 - repeat })
            });
            let mi_distance = p_up.zip(mi_p_up).map(|(a, b)| (a - b).abs());
            let wsls_distance = p_up.zip(wsls_p_up).map(|(a, b)| (a - b).abs());
            leaves.push(LeafComparison {
                prev_guess: g,
                prev_outcome: o,
                market_prev,
                p_up,
                mi_p_up,
                wsls_p_up,
                mi_distance,
                wsls_distance,
                closer: mi_distance.zip(wsls_distance).map(|(a, b)| Dominance::of(a, b)),
            });
            nodes.push(node);
        }
    }
    let mean = |f: fn(&LeafComparison) -> Option<f64>| {
        let v: Vec<f64> = leaves.iter().filter_map(f).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    let mean_mi_distance = mean(|l| l.mi_distance);
    let mean_wsls_distance = mean(|l| l.wsls_distance);
    Ok(TwoStepTree {
        tree: ConditionalTree {
            name: "two_step".into(),
            nodes,
        },
        verdict: mean_mi_distance.zip(mean_wsls_distance).map(|(a, b)| Dominance::of(a, b)),
        leaves,
        mean_mi_distance,
        mean_wsls_distance,
    })
}

/// p(up) estimated directly and rebuilt as sum_m p(up | m) p(m).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TotalProbabilityCheck {
    pub direct: f64,
    pub reconstructed: f64,
}

impl TotalProbabilityCheck {
    pub fn defect(&self) -> f64 {
        (self.direct - self.reconstructed).abs()
    }
}

pub fn total_probability_check(pairs: &[Pair]) -> Result<TotalProbabilityCheck, AnalyticsError> {
    let tree = conditional_tree_mi(pairs)?;
    let n = pairs.len() as f64;
    let direct = pairs.iter().filter(|p| p.guess == Direction::Up).count() as f64 / n;
    let reconstructed = Direction::ALL
        .iter()
        .filter_map(|&m| {
            let node = tree.node(&[market_label(m)])?;
            Some(node.first?.p * node.n as f64 / n)
        })
        .sum();
    Ok(TotalProbabilityCheck { direct, reconstructed })
}
