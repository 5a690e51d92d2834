use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use super::agent::{LeafRow, LeafTable};
use super::SimError;
use crate::analytics::binary_entropy;
use crate::market::ROUNDS;

/// Mutual information in bits between the previous market move, up with
/// probability `market_up`, and a guess that copies it with probability `follow`.
pub fn analytic_channel_mi(follow: f64, market_up: f64) -> f64 {
    let p_up = market_up * follow + (1.0 - market_up) * (1.0 - follow);
    (binary_entropy(p_up) - binary_entropy(follow)).max(0.0)
}

/// First-order conditional probabilities that the calibrated agent reproduces.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTargets {
    pub up_given_market_up: f64,
    pub up_given_market_down: f64,
    pub repeat_given_correct: f64,
    pub change_given_wrong: f64,
    pub up_after_up_success: f64,
}

impl Default for CalibrationTargets {
    fn default() -> Self {
        CalibrationTargets {
            up_given_market_up: 0.714,
            up_given_market_down: 0.469,
            repeat_given_correct: 0.682,
            change_given_wrong: 0.579,
            up_after_up_success: 0.729,
        }
    }
}

/// Pair-level statistics expected from a calibrated agent playing sessions
/// of `rounds` rounds on an iid market, with a fair coin in round 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectedStats {
    pub up_given_market_up: f64,
    pub up_given_market_down: f64,
    pub repeat_given_correct: f64,
    pub change_given_wrong: f64,
    pub up_after_up_success: f64,
    pub follow: f64,
    pub p_up: f64,
}

pub fn expected_stats(table: &LeafTable, market_up: f64, rounds: u8) -> ExpectedStats {
    let q = market_up;
    let (uc, uw, dc, dw) = (
        table.up_success.up,
        table.up_failure.up,
        table.down_success.up,
        table.down_failure.up,
    );
    // Expected number of pairs whose previous guess was up / down.
    let mut p = 0.5;
    let (mut u, mut d) = (0.0, 0.0);
    let mut ups = 0.0;
    for _ in 2..=rounds {
        u += p;
        d += 1.0 - p;
        p = p * (q * uc + (1.0 - q) * uw) + (1.0 - p) * ((1.0 - q) * dc + q * dw);
        ups += p;
    }
    let n = u + d;
    ExpectedStats {
        up_given_market_up: (u * uc + d * dw) / n,
        up_given_market_down: (u * uw + d * dc) / n,
        repeat_given_correct: (u * q * uc + d * (1.0 - q) * (1.0 - dc)) / (u * q + d * (1.0 - q)),
        change_given_wrong: (u * (1.0 - q) * (1.0 - uw) + d * q * dw) / (u * (1.0 - q) + d * q),
        up_after_up_success: uc,
        follow: (u * (q * uc + (1.0 - q) * (1.0 - uw)) + d * ((1.0 - q) * (1.0 - dc) + q * dw)) / n,
        p_up: ups / n,
    }
}

/// A leaf table together with the market it was solved for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibratedAgent {
    pub targets: CalibrationTargets,
    pub rounds: u8,
    pub market_up_prob: f64,
    pub table: LeafTable,
}

const DEFAULT_PARAMS: &str = include_str!("../../data/calibrated_default.json");

impl CalibratedAgent {
    /// Shipped parameters for the default targets.
    pub fn default_params() -> Self {
        serde_json::from_str(DEFAULT_PARAMS).expect("shipped calibration parses")
    }

    pub fn expected(&self) -> ExpectedStats {
        expected_stats(&self.table, self.market_up_prob, self.rounds)
    }
}

fn table_of(x: &Vector4<f64>, up_success: f64) -> LeafTable {
    LeafTable {
        up_success: LeafRow::new(up_success),
        up_failure: LeafRow::new(x[0]),
        down_success: LeafRow::new(x[1]),
        down_failure: LeafRow::new(x[2]),
    }
}

fn residual(x: &Vector4<f64>, t: &CalibrationTargets, rounds: u8) -> Vector4<f64> {
    let s = expected_stats(&table_of(x, t.up_after_up_success), x[3], rounds);
    Vector4::new(
        s.up_given_market_up - t.up_given_market_up,
        s.up_given_market_down - t.up_given_market_down,
        s.repeat_given_correct - t.repeat_given_correct,
        s.change_given_wrong - t.change_given_wrong,
    )
}

/// Solves for the three free leaves and the market up-probability so that
/// the expected pair statistics hit `targets` exactly. The up-success leaf
/// is the two-step target itself.
pub fn calibrate(targets: &CalibrationTargets, rounds: u8) -> Result<CalibratedAgent, SimError> {
    if !(2..=ROUNDS as u8).contains(&rounds) {
        return Err(SimError::InvalidSpec(format!("rounds {rounds} outside 2..=25")));
    }
    let mut x = Vector4::new(0.45, 0.5, 0.6, 0.55);
    for _ in 0..100 {
        let f = residual(&x, targets, rounds);
        if f.amax() < 1e-14 {
            let table = table_of(&x, targets.up_after_up_success);
            table.validate()?;
            return Ok(CalibratedAgent {
                targets: *targets,
                rounds,
                market_up_prob: x[3],
                table,
            });
        }
        let h = 1e-7;
        let mut jac = Matrix4::zeros();
        for j in 0..4 {
            let mut hi = x;
            let mut lo = x;
            hi[j] += h;
            lo[j] -= h;
            jac.set_column(j, &((residual(&hi, targets, rounds) - residual(&lo, targets, rounds)) / (2.0 * h)));
        }
        let step = jac.lu().solve(&f).ok_or(SimError::NoConvergence)?;
        x -= step;
        if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(SimError::NoConvergence);
        }
    }
    Err(SimError::NoConvergence)
}
