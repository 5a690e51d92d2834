//! Acceptance suite. One line per criterion; exits nonzero if any fails.
//!
//! Run with `cargo test -p mrbanks-service --test acceptance`.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::http::StatusCode;
use common::{Harness, T0};
use mrbanks_core::analytics::{
    analyze, follow_strategy_curves, follow_truth_table, jackknife_sd, joint_table, mutual_information, ols,
    pair_records, plug_in_bias_bound, sd_units, time_stats, AnalysisConfig, AnalysisReport, CurveAxis, Dominance, Follow,
    RecordFilter, Variable,
};
use mrbanks_core::domain::{
    AgeBand, CohortKey, Direction, Education, Gender, Group, Guess, Outcome, PanelKind, ProbEstimate, RoundRecord,
};
use mrbanks_core::market::{direction_at, Dataset};
use mrbanks_core::session::{project_records, scenario_spec, Session, SessionParams, SessionSnapshot};
use mrbanks_core::sim::{run_population, AgentKind, AgentSpec, CalibratedAgent, MarketSpec, PopulationConfig, SimSpec};
use mrbanks_service::config::ServiceConfig;
use mrbanks_service::state::{AppState, Clock, ManualClock};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

type Verdict = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn cohort() -> CohortKey {
    CohortKey {
        gender: Gender::M,
        age_band: AgeBand::From16To25,
        education: Education::Secondary,
    }
}

fn population(kind: AgentKind, agents: u64, sessions: usize, seed: u64, market: &MarketSpec) -> Vec<RoundRecord> {
    let specs: Vec<AgentSpec> = (0..agents)
        .map(|i| AgentSpec {
            kind: kind.clone(),
            seed: seed.wrapping_mul(1_000_003).wrapping_add(i),
            cohort: None,
        })
        .collect();
    let config = PopulationConfig {
        sessions_per_agent: sessions,
        ..Default::default()
    };
    run_population(&specs, market, &config).expect("valid population")
}

fn h2(p: f64) -> f64 {
    -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
}

/// Checks shared by every analyzed log.
fn log_invariants(report: &AnalysisReport) -> Verdict {
    ensure!(
        report.follow_equivalence_checked == report.counts.pairs,
        "follow equivalence checked on {} of {} pairs",
        report.follow_equivalence_checked,
        report.counts.pairs
    );
    let defect = report.total_probability.defect();
    ensure!(defect <= 1e-12, "total probability defect {defect:e}");
    for tree in [&report.mi_tree, &report.wsls_tree, &report.two_step.tree] {
        for node in &tree.nodes {
            if let (Some(a), Some(b)) = (node.first, node.second) {
                ensure!(a.p + b.p == 1.0, "{} {:?} sums to {}", tree.name, node.path, a.p + b.p);
            }
        }
    }
    Ok(format!("{} pairs", report.counts.pairs))
}

fn follow_equivalence() -> Verdict {
    let table = follow_truth_table();
    ensure!(table.len() == 8, "truth table has {} rows", table.len());
    let distinct: BTreeSet<_> = table.iter().map(|r| (r.prev_guess, r.market_prev, r.guess)).collect();
    ensure!(distinct.len() == 8, "truth table rows repeat");
    for r in &table {
        let prev_outcome = if r.prev_guess == r.market_prev { Outcome::Correct } else { Outcome::Wrong };
        let imitates = r.guess == r.market_prev;
        let stays = r.guess == r.prev_guess;
        let wsls = if prev_outcome == Outcome::Correct { stays } else { !stays };
        let want = |b: bool| if b { Follow::Follow } else { Follow::NotFollow };
        ensure!(r.mi == want(imitates) && r.wsls == want(wsls), "row {r:?} mislabeled");
        ensure!(r.mi == r.wsls, "row {r:?}: labels differ");
    }
    let spec: SimSpec = serde_json::from_value(json!({
        "seed": 3,
        "market": {"mode": "dataset"},
        "agents": [
            {"kind": "random", "p_up": 0.5, "count": 5},
            {"kind": "imitator", "follow_prob": 0.8, "count": 5},
            {"kind": "wsls", "follow_prob": 0.6, "count": 5},
            {"kind": "expert_follower", "obey_prob": 0.9, "count": 5}
        ],
        "population": {"sessions_per_agent": 2}
    }))
    .map_err(|e| e.to_string())?;
    let records = spec.run(Some(&common::dataset())).map_err(|e| e.to_string())?;
    let report = analyze(&records, &AnalysisConfig::default()).map_err(|e| e.to_string())?;
    let detail = log_invariants(&report)?;
    Ok(format!("8/8 truth-table rows agree; mixed log {detail}"))
}

fn payoff_identity() -> Verdict {
    let dataset = common::dataset();
    let mut rng = ChaCha8Rng::seed_from_u64(1005);
    let mut rounds = 0usize;
    let mut worst = 0.0f64;
    for i in 0..1000u64 {
        let scenario_id = rng.random_range(1..=4u8);
        let group = if rng.random_bool(0.5) { Group::A } else { Group::B };
        let scenario = scenario_spec(scenario_id, group).map_err(|e| e.to_string())?;
        let limit = scenario.time_limit_ms();
        let mut s = Session::start(
            SessionParams {
                session_id: format!("f{i}"),
                participant_id: "p".into(),
                cohort: cohort(),
                scenario,
                seed: rng.random(),
            },
            &dataset,
            T0,
        )
        .map_err(|e| e.to_string())?;
        let series = s.series().clone();
        let (mut c, mut w) = (0i32, 0i32);
        for round in 1..=25u8 {
            let idx = series.outcome_index(round).map_err(|e| e.to_string())?;
            let market_next = direction_at(&series, idx).map_err(|e| e.to_string())?;
            let mut t = 0u64;
            for _ in 0..rng.random_range(0..4) {
                t += rng.random_range(0..limit / 8);
                let kind = PanelKind::ALL[rng.random_range(0..7)];
                let _ = s.view_panel(kind, Duration::from_millis(t));
            }
            if rng.random_bool(0.1) {
                s.handle_timeout().map_err(|e| e.to_string())?;
            } else {
                let guess = if rng.random_bool(0.5) { Direction::Up } else { Direction::Down };
                t += rng.random_range(0..limit / 2);
                s.submit_guess(guess, Duration::from_millis(t)).map_err(|e| e.to_string())?;
                if guess == market_next {
                    c += 1;
                } else {
                    w += 1;
                }
            }
            let expected = 1000.0 * 1.05f64.powi(c) * 0.95f64.powi(w);
            let rel = (s.coins() - expected).abs() / expected;
            let logged = s.records().last().map(|r| r.coins_after).unwrap_or(f64::NAN);
            ensure!(logged == s.coins(), "session {i} round {round}: record {logged} != state {}", s.coins());
            worst = worst.max(rel);
            rounds += 1;
        }
        ensure!(s.is_ended(), "session {i} did not end");
    }
    ensure!(worst <= 1e-9, "max relative error {worst:e}");
    Ok(format!("{rounds} rounds, max relative error {worst:.1e}"))
}

fn expert_oracle() -> Verdict {
    let dataset = common::dataset();
    let (mut truthful, mut total) = (0u64, 0u64);
    for i in 0..4000u64 {
        let s = Session::start(
            SessionParams {
                session_id: format!("e{i}"),
                participant_id: "p".into(),
                cohort: cohort(),
                scenario: scenario_spec(1, Group::A).map_err(|e| e.to_string())?,
                seed: mrbanks_service::state::session_seed(99, i),
            },
            &dataset,
            T0,
        )
        .map_err(|e| e.to_string())?;
        for round in 1..=25u8 {
            let advice = s.generate_expert_advice(round).map_err(|e| e.to_string())?;
            let idx = s.series().outcome_index(round).map_err(|e| e.to_string())?;
            let market_next = direction_at(s.series(), idx).map_err(|e| e.to_string())?;
            truthful += u64::from(advice.stated_direction == market_next);
            total += 1;
        }
    }
    let frac = truthful as f64 / total as f64;
    ensure!((frac - 0.6).abs() <= 0.005, "truthful fraction {frac:.4} over {total} rounds");
    Ok(format!("truthful fraction {frac:.4} over {total} rounds"))
}

fn mi_oracle() -> Verdict {
    let market = MarketSpec::IidBernoulli { p_up: 0.5 };
    // 4167 sessions give at least 1e5 (decision, previous move) pairs.
    let records = population(AgentKind::Imitator { follow_prob: 0.7 }, 4167, 1, 70, &market);
    let set = pair_records(&records, &RecordFilter::default());
    let table = joint_table(&set.pairs, Variable::MarketPrev, Variable::Guess);
    let n = table.total();
    ensure!(n >= 100_000, "only {n} pairs");
    let mi = mutual_information(&table).map_err(|e| e.to_string())?;
    let analytic = 1.0 - h2(0.7);
    ensure!((analytic - 0.1187).abs() < 5e-5, "analytic value {analytic}");
    ensure!((mi - analytic).abs() <= 0.005, "imitator MI {mi:.5} vs {analytic:.5}");

    let records = population(AgentKind::Random { p_up: 0.5 }, 4167, 1, 71, &market);
    let set = pair_records(&records, &RecordFilter::default());
    let table = joint_table(&set.pairs, Variable::MarketPrev, Variable::Guess);
    let null_mi = mutual_information(&table).map_err(|e| e.to_string())?;
    let bound = plug_in_bias_bound(&table) + 3.0 * jackknife_sd(&table).map_err(|e| e.to_string())?;
    ensure!(null_mi.abs() <= bound, "independent MI {null_mi:e} above {bound:e}");
    Ok(format!(
        "imitator MI {mi:.5} vs {analytic:.5} (N={n}); independent MI {null_mi:.2e} <= {bound:.2e}"
    ))
}

fn detector_recovery() -> Verdict {
    let market = MarketSpec::IidBernoulli { p_up: 0.5 };
    let f = 0.634;
    let mut records = population(AgentKind::Imitator { follow_prob: f }, 100, 4, 634, &market);
    let mut wsls = population(AgentKind::Wsls { follow_prob: f }, 100, 4, 635, &market);
    for r in &mut wsls {
        r.session_id = format!("w{}", r.session_id);
    }
    records.extend(wsls);
    ensure!(records.len() == 200 * 100, "{} rounds", records.len());
    let set = pair_records(&records, &RecordFilter::default());
    let curve = follow_strategy_curves(&set.pairs, CurveAxis::TimeBins5s).map_err(|e| e.to_string())?;
    let got = curve.reference.p;
    ensure!((got - f).abs() <= 0.01, "recovered {got:.4}, programmed {f}");
    Ok(format!("recovered {got:.4} ± {:.4} from {} pairs", curve.reference.sd, curve.reference.n))
}

fn calibrated_closed_loop() -> Verdict {
    let params = CalibratedAgent::default_params();
    let market = MarketSpec::IidBernoulli {
        p_up: params.market_up_prob,
    };
    let records = population(AgentKind::Calibrated { table: params.table }, 10_000, 4, 2026, &market);
    ensure!(records.len() == 1_000_000, "{} rounds", records.len());
    let report = analyze(&records, &AnalysisConfig::default()).map_err(|e| e.to_string())?;
    log_invariants(&report)?;
    let measured = [
        ("p(up|up_m)", report.mi_tree.prob(&["up_m"], "up"), 0.714),
        ("p(up|down_m)", report.mi_tree.prob(&["down_m"], "up"), 0.469),
        ("p(repeat|correct)", report.wsls_tree.prob(&["correct"], "repeat"), 0.682),
        ("p(change|wrong)", report.wsls_tree.prob(&["wrong"], "change"), 0.579),
        ("p(up|up,success)", report.two_step.tree.prob(&["up", "success"], "up"), 0.729),
    ];
    let mut parts = Vec::new();
    for (name, got, want) in measured {
        let got = got.ok_or_else(|| format!("{name} missing"))?;
        ensure!((got - want).abs() <= 0.002, "{name} = {got:.4}, programmed {want}");
        parts.push(format!("{name}={got:.4}"));
    }
    let up_up = report.mi_tree.prob(&["up_m"], "up").unwrap_or(f64::NAN);
    let repeat = report.wsls_tree.prob(&["correct"], "repeat").unwrap_or(f64::NAN);
    let leaf = report.two_step.tree.prob(&["up", "success"], "up").unwrap_or(f64::NAN);
    ensure!((leaf - up_up).abs() < (leaf - repeat).abs(), "up/success leaf is not closer to imitation");
    ensure!(
        report.two_step.verdict == Some(Dominance::MarketImitation),
        "verdict {:?}",
        report.two_step.verdict
    );
    Ok(format!("{}; verdict market imitation", parts.join(", ")))
}

fn total_probability() -> Verdict {
    let mut checked = Vec::new();
    let spec: SimSpec = serde_json::from_value(json!({
        "seed": 12,
        "market": {"mode": "iid_bernoulli", "p_up": 0.58},
        "agents": [
            {"kind": "random", "p_up": 0.3, "count": 40},
            {"kind": "imitator", "follow_prob": 0.9, "count": 40},
            {"kind": "wsls", "follow_prob": 0.55, "count": 40}
        ],
        "population": {"sessions_per_agent": 3}
    }))
    .map_err(|e| e.to_string())?;
    for seed in 0..5u64 {
        let mut spec = spec.clone();
        spec.seed = seed;
        let records = spec.run(None).map_err(|e| e.to_string())?;
        let report = analyze(&records, &AnalysisConfig::default()).map_err(|e| e.to_string())?;
        log_invariants(&report)?;
        checked.push(report.total_probability.defect());
    }
    let worst = checked.iter().cloned().fold(0.0, f64::max);
    Ok(format!("{} logs, max defect {worst:.1e}, rows sum to 1", checked.len()))
}

fn sd_units_calibration() -> Verdict {
    let a = ProbEstimate { p: 0.69, sd: 0.03, n: 0 };
    let z = sd_units(&a, &ProbEstimate::exact(0.60)).map_err(|e| e.to_string())?;
    ensure!((z - 3.0).abs() <= 1e-12, "z = {z}");
    let back = sd_units(&ProbEstimate::exact(0.60), &a).map_err(|e| e.to_string())?;
    ensure!((back + 3.0).abs() <= 1e-12, "reversed z = {back}");
    Ok(format!("z = {z}"))
}

fn ols_fixture() -> Verdict {
    let x: Vec<f64> = (0..70).map(|i| (i % 7) as f64).collect();
    let y: Vec<f64> = x.iter().map(|v| 2.0 + 2.0 * v).collect();
    let fit = ols(&x, &y).map_err(|e| e.to_string())?;
    ensure!((fit.slope - 2.0).abs() <= 1e-9, "slope {}", fit.slope);
    ensure!((fit.intercept - 2.0).abs() <= 1e-9, "intercept {}", fit.intercept);
    ensure!(fit.slope_stderr.abs() <= 1e-9, "stderr {}", fit.slope_stderr);

    let records: Vec<RoundRecord> = (0..70u8)
        .map(|i| {
            let panels: BTreeSet<PanelKind> = std::iter::once(PanelKind::PriceChart)
                .chain(PanelKind::ALL.into_iter().filter(|k| !k.is_home()).take(usize::from(i % 7)))
                .collect();
            let extras = panels.len() - 1;
            RoundRecord {
                participant_id: "p".into(),
                session_id: format!("s{}", i / 25),
                scenario_id: 1,
                group: Some(Group::A),
                round_index: i % 25 + 1,
                guess: Guess::Up,
                market_prev: Direction::Up,
                market_next: Direction::Up,
                outcome: Some(Outcome::Correct),
                decision_time: 2.0 + 2.0 * extras as f64,
                expert_consulted: panels.contains(&PanelKind::Expert),
                panels_viewed: panels,
                expert_advice: None,
                coins_after: 1000.0,
                cohort: None,
                trend: None,
            }
        })
        .collect();
    let fit2 = time_stats(&records, &RecordFilter::default())
        .map_err(|e| e.to_string())?
        .time_vs_panels
        .ok_or("no time/panel fit")?;
    ensure!((fit2.slope - 2.0).abs() <= 1e-9, "time stats slope {}", fit2.slope);
    ensure!(fit2.slope_stderr.abs() <= 1e-9, "time stats stderr {}", fit2.slope_stderr);
    Ok(format!("slope {:.9}, stderr {:.1e}", fit.slope, fit.slope_stderr))
}

#[derive(Clone)]
struct Boundary {
    lines: usize,
    now: u64,
    sessions: BTreeMap<String, SessionSnapshot>,
}

async fn boundary(h: &Harness) -> Boundary {
    let text = std::fs::read_to_string(&h.config.log_path).unwrap_or_default();
    let mut sessions = BTreeMap::new();
    for id in h.state.session_ids() {
        sessions.insert(id.clone(), h.state.session(&id).await.unwrap().snapshot());
    }
    Boundary {
        lines: text.lines().count(),
        now: h.clock.now_ms(),
        sessions,
    }
}

/// Panels a round may show, from the scenario table. For random-extra
/// rounds any single screen is allowed.
fn oracle_panels(scenario: u8, group: Group, chosen: Option<PanelKind>) -> BTreeSet<PanelKind> {
    let home = PanelKind::PriceChart;
    match (scenario, group) {
        (2, Group::B) => [home].into(),
        (3, Group::A) => std::iter::once(home).chain(PanelKind::SCREENS).collect(),
        (3, Group::B) => std::iter::once(home).chain(chosen).collect(),
        (4, Group::B) => [home, PanelKind::MarketArrows].into(),
        _ => PanelKind::ALL.into_iter().collect(),
    }
}

/// Plays one 25-round session through the HTTP API, probing every panel
/// each round. Returns the command boundaries and the number of views served.
async fn play(h: &Harness, scenario: u8, want_group: Group) -> Result<(String, Vec<Boundary>, usize), String> {
    let mut bounds = vec![boundary(h).await];
    let p = h.participant().await;
    bounds.push(boundary(h).await);
    if want_group == Group::B {
        h.session(&p, scenario).await;
        bounds.push(boundary(h).await);
    }
    let created = h.session(&p, scenario).await;
    bounds.push(boundary(h).await);
    ensure!(created["group"] == json!(want_group), "assigned {}", created["group"]);
    let sid = created["session_id"].as_str().unwrap().to_string();
    let mut served = 0;
    for round in 1..=25u8 {
        let cur = h.get(&format!("/v1/sessions/{sid}/rounds/current")).await.1;
        ensure!(cur["round"] == round, "expected round {round}, got {}", cur["round"]);
        let mut chosen = None;
        if cur["choice_required"] == true {
            let pick = PanelKind::SCREENS[round as usize % 4];
            h.clock.advance(300);
            let (s, v) = h
                .post(&format!("/v1/sessions/{sid}/panel-views"), json!({"kind": pick.as_str()}))
                .await;
            ensure!(s == StatusCode::OK, "choice {pick:?}: {v}");
            chosen = Some(pick);
            served += 1;
            bounds.push(boundary(h).await);
        }
        let cur = h.get(&format!("/v1/sessions/{sid}/rounds/current")).await.1;
        let advertised: BTreeSet<PanelKind> = cur["panels"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| PanelKind::parse(v.as_str().unwrap()).unwrap())
            .collect();
        let oracle = oracle_panels(scenario, want_group, chosen);
        ensure!(advertised.is_subset(&oracle), "round {round} advertises {advertised:?} outside {oracle:?}");
        if (scenario, want_group) == (3, Group::A) {
            ensure!(advertised.len() == 2, "random-extra round shows {advertised:?}");
        }
        for kind in PanelKind::ALL {
            h.clock.advance(150);
            let (s, v) = h
                .post(&format!("/v1/sessions/{sid}/panel-views"), json!({"kind": kind.as_str()}))
                .await;
            if s == StatusCode::OK {
                ensure!(oracle.contains(&kind) && advertised.contains(&kind), "served {kind:?} in round {round}");
                ensure!(v["content"]["kind"] == kind.as_str(), "wrong content for {kind:?}");
                served += 1;
            } else {
                ensure!(s == StatusCode::FORBIDDEN, "{kind:?}: {s} {v}");
                ensure!(!advertised.contains(&kind), "refused advertised {kind:?}");
            }
            bounds.push(boundary(h).await);
        }
        if round % 7 == 0 {
            let limit = cur["time_limit_secs"].as_u64().unwrap() * 1000;
            let opened = cur["opened_at"].as_u64().unwrap();
            h.clock.set(opened + limit + 1);
            let after = h.get(&format!("/v1/sessions/{sid}/rounds/current")).await.1;
            ensure!(after["round"] == round + 1, "timeout did not advance: {after}");
        } else {
            h.clock.advance(400);
            let dir = if round % 3 == 0 { "down" } else { "up" };
            let (s, v) = h
                .post(&format!("/v1/sessions/{sid}/guesses"), json!({"direction": dir}))
                .await;
            ensure!(s == StatusCode::OK, "guess: {v}");
        }
        bounds.push(boundary(h).await);
    }
    let end = h.get(&format!("/v1/sessions/{sid}/rounds/current")).await.1;
    ensure!(end["status"] == "ended", "session still running");
    Ok((sid, bounds, served))
}

/// Reopens the service on every prefix of `lines` and compares the result
/// with the live state at the end of the interrupted command.
fn replay_every_prefix(dir: &Path, lines: &[String], bounds: &[Boundary], dataset: Arc<Dataset>) -> Result<usize, String> {
    let starts: BTreeSet<usize> = lines
        .iter()
        .enumerate()
        .filter(|(_, l)| l.contains("\"type\":\"register\"") && !l.contains("\"session_id\":null"))
        .map(|(i, _)| i)
        .collect();
    let rt = tokio::runtime::Builder::new_current_thread().build().map_err(|e| e.to_string())?;
    for k in 0..=lines.len() {
        let path = dir.join(format!("prefix{k}.jsonl"));
        std::fs::write(&path, lines[..k].concat()).map_err(|e| e.to_string())?;
        let b = bounds
            .iter()
            .find(|b| b.lines >= k)
            .ok_or_else(|| format!("no boundary covers line {k}"))?;
        // A start torn after its first line was never acknowledged.
        let torn_start = k >= 1 && starts.contains(&(k - 1));
        let (want_lines, want_sessions) = if torn_start {
            let prev = bounds.iter().rev().find(|b| b.lines < k).expect("start follows a boundary");
            (k, &prev.sessions)
        } else {
            (b.lines, &b.sessions)
        };
        let config = ServiceConfig {
            log_path: path.clone(),
            seed: 11,
            ..Default::default()
        };
        let state = AppState::open(config, dataset.clone(), Arc::new(ManualClock::new(b.now)))
            .map_err(|e| format!("prefix {k}: {e}"))?;
        let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
        ensure!(
            text == lines[..want_lines].concat(),
            "prefix {k}: recovered log differs from the live log up to line {want_lines}"
        );
        let ids: BTreeSet<String> = state.session_ids().into_iter().collect();
        let want_ids: BTreeSet<String> = want_sessions.keys().cloned().collect();
        ensure!(ids == want_ids, "prefix {k}: sessions {ids:?} vs {want_ids:?}");
        for (id, snap) in want_sessions {
            let got = rt.block_on(state.session(id)).map_err(|e| e.to_string())?.snapshot();
            ensure!(&got == snap, "prefix {k}: {id} rebuilt as {got:?}, live {snap:?}");
        }
        std::fs::remove_file(&path).map_err(|e| e.to_string())?;
    }
    Ok(lines.len() + 1)
}

fn event_sourced_replay() -> Verdict {
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let dataset = common::dataset();
    let mut prefixes = 0;
    let mut served = 0;
    let mut records = Vec::new();
    for scenario in 1..=4u8 {
        for group in [Group::A, Group::B] {
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            let log = dir.path().join("live.jsonl");
            let h = Harness::new(&log);
            let (sid, bounds, n) = rt.block_on(play(&h, scenario, group))?;
            served += n;
            let text = std::fs::read_to_string(&log).map_err(|e| e.to_string())?;
            let lines: Vec<String> = text.split_inclusive('\n').map(String::from).collect();
            ensure!(bounds.last().map(|b| b.lines) == Some(lines.len()), "boundaries do not cover the log");
            prefixes += replay_every_prefix(dir.path(), &lines, &bounds, dataset.clone())
                .map_err(|e| format!("scenario {scenario}{group:?}: {e}"))?;
            let events: Vec<_> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
            let session_records: Vec<RoundRecord> = project_records(&events)
                .map_err(|e| e.to_string())?
                .into_iter()
                .filter(|r| r.session_id == sid)
                .collect();
            ensure!(session_records.len() == 25, "{} records for {sid}", session_records.len());
            records.extend(session_records.into_iter().map(|mut r| {
                r.session_id = format!("{scenario}{group:?}-{}", r.session_id);
                r
            }));
        }
    }
    let mut config = AnalysisConfig::default();
    config.filter.include_excluded_scenarios = true;
    let report = analyze(&records, &config).map_err(|e| e.to_string())?;
    log_invariants(&report)?;
    Ok(format!("8 scenario/group sessions, {prefixes} crash points, {served} panel views all allowed"))
}

struct Criterion {
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Verdict,
}

fn main() {
    let criteria = [
        Criterion {
            name: "follow-event equivalence",
            budget: Some(Duration::from_secs(1)),
            run: follow_equivalence,
        },
        Criterion {
            name: "payoff identity",
            budget: Some(Duration::from_secs(5)),
            run: payoff_identity,
        },
        Criterion {
            name: "expert oracle",
            budget: Some(Duration::from_secs(5)),
            run: expert_oracle,
        },
        Criterion {
            name: "mutual information oracle",
            budget: Some(Duration::from_secs(30)),
            run: mi_oracle,
        },
        Criterion {
            name: "detector recovery",
            budget: Some(Duration::from_secs(30)),
            run: detector_recovery,
        },
        Criterion {
            name: "calibrated-agent closed loop",
            budget: Some(Duration::from_secs(120)),
            run: calibrated_closed_loop,
        },
        Criterion {
            name: "total probability reconstruction",
            budget: None,
            run: total_probability,
        },
        Criterion {
            name: "sd-units calibration",
            budget: None,
            run: sd_units_calibration,
        },
        Criterion {
            name: "event-sourced replay and gating",
            budget: Some(Duration::from_secs(60)),
            run: event_sourced_replay,
        },
        Criterion {
            name: "OLS fixture",
            budget: None,
            run: ols_fixture,
        },
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let verdict = match (verdict, c.budget) {
            (Ok(detail), Some(budget)) if elapsed > budget => {
                Err(format!("{detail}; took {:.2}s, budget {}s", elapsed.as_secs_f64(), budget.as_secs()))
            }
            (v, _) => v,
        };
        match verdict {
            Ok(detail) => println!("[PASS] {} ({:.2}s): {detail}", c.name, elapsed.as_secs_f64()),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {} ({:.2}s): {detail}", c.name, elapsed.as_secs_f64());
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
