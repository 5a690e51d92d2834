//! Prints the calibrated agent for the default targets as JSON.

use mrbanks_core::sim::{calibrate, CalibrationTargets};

fn main() {
    let agent = calibrate(&CalibrationTargets::default(), 25).expect("calibration converges");
    println!("{}", serde_json::to_string_pretty(&agent).expect("serializes"));
    eprintln!("{:?}", agent.expected());
}
