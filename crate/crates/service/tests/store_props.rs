use std::time::Duration;

use mrbanks_core::domain::{AgeBand, CohortKey, Direction, Education, Gender, Group, PanelKind};
use mrbanks_core::market::load_dataset;
use mrbanks_core::session::{scenario_spec, EventRecord, Session, SessionParams};
use mrbanks_service::store::{read_events, EventLog};
use proptest::prelude::*;

fn sample_log() -> Vec<EventRecord> {
    let ds = load_dataset(&std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/manifest.json")).unwrap();
    let mut s = Session::start(
        SessionParams {
            session_id: "s000001".into(),
            participant_id: "p000001".into(),
            cohort: CohortKey {
                gender: Gender::F,
                age_band: AgeBand::From36To45,
                education: Education::None,
            },
            scenario: scenario_spec(1, Group::A).unwrap(),
            seed: 77,
        },
        &ds,
        5,
    )
    .unwrap();
    for r in 0..6 {
        s.view_panel(PanelKind::Expert, Duration::from_millis(300)).unwrap();
        let dir = if r % 2 == 0 { Direction::Up } else { Direction::Down };
        s.submit_guess(dir, Duration::from_millis(1_234)).unwrap();
    }
    s.log().to_vec()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// A log cut at any byte keeps exactly the events whose lines survived whole.
    #[test]
    fn any_truncation_recovers_whole_lines(cut in any::<prop::sample::Index>()) {
        let events = sample_log();
        let text: String = events.iter().map(|e| e.to_json_line() + "\n").collect();
        let k = cut.index(text.len() + 1);
        let prefix = &text[..k];
        let whole = prefix.matches('\n').count();
        let last_line_complete = prefix[prefix.rfind('\n').map_or(0, |i| i + 1)..]
            .trim()
            .parse::<serde_json::Value>()
            .is_ok();
        let expect = whole + usize::from(last_line_complete);

        let loaded = read_events(prefix.as_bytes()).unwrap();
        prop_assert_eq!(&loaded.events[..], &events[..expect]);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        std::fs::write(&path, prefix).unwrap();
        let (log, opened) = EventLog::open(&path).unwrap();
        prop_assert_eq!(&opened.events[..], &events[..expect]);
        let repaired: String = events[..expect].iter().map(|e| e.to_json_line() + "\n").collect();
        prop_assert_eq!(std::fs::read_to_string(&path).unwrap(), repaired.clone());
        log.append(&events[expect..]).unwrap();
        prop_assert_eq!(std::fs::read_to_string(&path).unwrap(), text);
    }
}
