use std::collections::BTreeMap;

use super::SimError;
use crate::domain::{Group, Guess, Outcome, PanelKind, RoundRecord};
use crate::session::{scenario_spec, visible_panels, EventBody, EventRecord};

/// Event log that projects back to exactly `records`. Sessions are written
/// one after another in order of first appearance.
pub fn records_to_events(records: &[RoundRecord]) -> Result<Vec<EventRecord>, SimError> {
    let mut order: Vec<&str> = Vec::new();
    let mut sessions: BTreeMap<&str, Vec<&RoundRecord>> = BTreeMap::new();
    for r in records {
        let entry = sessions.entry(&r.session_id).or_default();
        if entry.is_empty() {
            order.push(&r.session_id);
        }
        entry.push(r);
    }
    let mut out = Vec::new();
    let mut clock = 0u64;
    for id in order {
        let mut rounds = sessions.remove(id).expect("listed");
        rounds.sort_by_key(|r| r.round_index);
        let first = rounds[0];
        let scenario = scenario_spec(first.scenario_id, first.group.unwrap_or(Group::A))
            .map_err(|e| SimError::InvalidSpec(e.to_string()))?;
        let panels: Vec<PanelKind> = match visible_panels(&scenario, None) {
            Ok(set) => set.into_iter().collect(),
            Err(_) => scenario.allowed_panels.iter().copied().collect(),
        };
        let mut seq = 0u64;
        let mut push = |out: &mut Vec<EventRecord>, ts: u64, body: EventBody| {
            out.push(EventRecord {
                seq,
                timestamp: ts,
                session_id: Some(id.to_string()),
                body,
            });
            seq += 1;
        };
        if let Some(cohort) = first.cohort {
            push(&mut out, clock, EventBody::Register {
                participant_id: first.participant_id.clone(),
                cohort,
            });
        }
        push(&mut out, clock, EventBody::SessionStart {
            participant_id: first.participant_id.clone(),
            scenario: scenario.clone(),
            series_symbol: "synthetic".into(),
            seed: 0,
        });
        let (mut correct, mut wrong, mut timeouts) = (0, 0, 0);
        let mut coins = 0.0;
        for r in &rounds {
            push(&mut out, clock, EventBody::RoundStart {
                round: r.round_index,
                market_prev: r.market_prev,
                panels: panels.clone(),
            });
            let decision_ms = (r.decision_time * 1000.0).round() as u64;
            let n = r.panels_viewed.len() as u64;
            for (k, kind) in r.panels_viewed.iter().enumerate() {
                let elapsed_ms = decision_ms * (k as u64 + 1) / (n + 1);
                push(&mut out, clock + elapsed_ms, EventBody::PanelView {
                    round: r.round_index,
                    kind: *kind,
                    elapsed_ms,
                    advice: if *kind == PanelKind::Expert { r.expert_advice } else { None },
                });
            }
            clock += decision_ms;
            match r.guess {
                Guess::Timeout => {
                    timeouts += 1;
                    push(&mut out, clock, EventBody::Timeout { round: r.round_index });
                }
                g => push(&mut out, clock, EventBody::Guess {
                    round: r.round_index,
                    direction: g.direction().expect("not a timeout"),
                    elapsed_ms: decision_ms,
                }),
            }
            match r.outcome {
                Some(Outcome::Correct) => correct += 1,
                Some(Outcome::Wrong) => wrong += 1,
                None => {}
            }
            coins = r.coins_after;
            push(&mut out, clock, EventBody::RoundResult {
                round: r.round_index,
                outcome: r.outcome,
                market_next: r.market_next,
                coins_after: r.coins_after,
            });
        }
        push(&mut out, clock, EventBody::SessionEnd {
            coins,
            correct,
            wrong,
            timeouts,
        });
        clock += 1;
    }
    Ok(out)
}
