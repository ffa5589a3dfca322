use std::collections::BTreeMap;

use proptest::prelude::*;
use sir_core::leaderboard::{visible_ranks, TimeRange};
use sir_core::{
    ActionKind, BoardKind, EntityId, Ledger, LeaderboardError, NewActivity, Points, ScoreFilter,
    TimeWindow, ViewDesign,
};
use sir_testkit::{ledger_graph, ledger_scores, random_ledger, DAY};

const END: i64 = 1_700_000_000;
const WINDOWS: [TimeWindow; 4] = [TimeWindow::Week, TimeWindow::Month, TimeWindow::Semester, TimeWindow::AllTime];
const KINDS: [BoardKind; 2] = [BoardKind::TopContributor, BoardKind::TopResponder];

#[test]
fn action_points_table() {
    let want = [
        ("source_add", 9.1),
        ("source_share", 7.8),
        ("source_rate", 6.3),
        ("source_comment", 6.4),
        ("source_upvote_comment", 5.1),
        ("post_add", 7.0),
        ("post_share", 5.8),
        ("post_like", 5.7),
        ("post_comment", 6.2),
        ("post_upvote_comment", 5.7),
        ("include", 4.7),
    ];
    for (name, pts) in want {
        let action: ActionKind = name.parse().unwrap();
        assert_eq!(action.points(), Points::from_f64(pts), "{name}");
    }
}

#[test]
fn scores_match_linear_scan_on_ten_thousand_activities() {
    let g = ledger_graph(40, 4, 30).snapshot();
    let ledger = random_ledger(1, &g, 10_000, END);
    assert!(ledger.len() > 9_000);
    assert!(ledger.records().iter().any(|r| r.reverts.is_some()));
    let mut contexts: Vec<Option<EntityId>> = vec![None];
    contexts.extend((0..4).map(|i| Some(EntityId::from(format!("c{i}")))));
    for now in [END - 200 * DAY, END, END + 400 * DAY] {
        for context in &contexts {
            for window in WINDOWS {
                for kind in KINDS {
                    let filter = ScoreFilter::new(context.clone(), window, kind, now);
                    let range = window.ending_at(now);
                    let mut want = ledger_scores(
                        ledger.records(),
                        context.as_ref(),
                        range.after,
                        now,
                        kind == BoardKind::TopResponder,
                        10,
                    );
                    want.retain(|_, v| *v > 0);
                    let got: BTreeMap<EntityId, i64> = ledger
                        .compute_scores(&filter)
                        .into_iter()
                        .map(|(u, p)| (u, p.tenths()))
                        .collect();
                    assert_eq!(got, want, "{filter:?}");
                }
            }
        }
    }
}

#[test]
fn adjacent_windows_add_up() {
    let g = ledger_graph(20, 2, 10).snapshot();
    let ledger = random_ledger(2, &g, 3_000, END);
    let mut r = sir_testkit::rng(2);
    for _ in 0..50 {
        use rand::Rng;
        let a = END - r.gen_range(0..400) * DAY;
        let b = a + r.gen_range(0..200) * DAY;
        let c = b + r.gen_range(0..200) * DAY;
        for kind in KINDS {
            let whole = ledger.totals_in(None, TimeRange { after: Some(a), until: c }, kind);
            let mut parts = ledger.totals_in(None, TimeRange { after: Some(a), until: b }, kind);
            for (u, p) in ledger.totals_in(None, TimeRange { after: Some(b), until: c }, kind) {
                *parts.entry(u).or_insert(Points::ZERO) += p;
            }
            for (u, p) in &parts {
                assert_eq!(whole.get(u).copied().unwrap_or(Points::ZERO), *p);
            }
            assert!(whole.keys().all(|u| parts.contains_key(u)));
        }
    }
}

#[test]
fn ties_go_to_whoever_reached_the_score_first() {
    let g = ledger_graph(3, 1, 1).snapshot();
    let mut l = Ledger::in_memory();
    l.record_activity(&g, NewActivity::new("u01", ActionKind::SourceAdd, "c0", "s00", 10)).unwrap();
    l.record_activity(&g, NewActivity::new("u00", ActionKind::SourceAdd, "c0", "s00", 20)).unwrap();
    l.record_activity(&g, NewActivity::new("u02", ActionKind::SourceAdd, "c0", "s00", 30)).unwrap();
    l.record_activity(&g, NewActivity::new("u02", ActionKind::SourceRate, "c0", "s00", 31)).unwrap();
    let d = l.record_activity(&g, NewActivity::new("u02", ActionKind::SourceRate, "c0", "s00", 32)).unwrap().id;
    l.record_delete(&"u02".into(), d, 33).unwrap();
    let standings = l.standings(&ScoreFilter::new(None, TimeWindow::AllTime, BoardKind::TopContributor, 100));
    let order: Vec<&str> = standings.iter().map(|s| s.user.as_str()).collect();
    assert_eq!(order, ["u02", "u01", "u00"]);
    assert_eq!(standings[0].reached_at, 31);
}

#[test]
fn responder_board_counts_upvotes_for_the_comment_author() {
    let g = ledger_graph(3, 1, 1).snapshot();
    let mut l = Ledger::in_memory();
    let c = l.record_activity(&g, NewActivity::new("u00", ActionKind::PostComment, "c0", "s00", 1)).unwrap().id;
    let up = l
        .record_activity(&g, NewActivity::new("u01", ActionKind::PostUpvoteComment, "c0", "s00", 2).upvoting(c))
        .unwrap()
        .id;
    l.record_activity(&g, NewActivity::new("u02", ActionKind::PostUpvoteComment, "c0", "s00", 3).upvoting(c)).unwrap();
    let responders = ScoreFilter::new(None, TimeWindow::AllTime, BoardKind::TopResponder, 10);
    assert_eq!(l.compute_scores(&responders)[&EntityId::from("u00")], Points::from_f64(8.2));
    l.record_delete(&"u01".into(), up, 4).unwrap();
    assert_eq!(l.compute_scores(&responders)[&EntityId::from("u00")], Points::from_f64(7.2));
    assert!(matches!(l.record_delete(&"u01".into(), up, 5), Err(LeaderboardError::AlreadyDeleted(_))));
    assert!(matches!(l.record_delete(&"u00".into(), up, 5), Err(LeaderboardError::NotOwner { .. })));
    assert!(matches!(
        l.record_activity(&g, NewActivity::new("u01", ActionKind::PostUpvoteComment, "c0", "s00", 6).upvoting(up)),
        Err(LeaderboardError::InvalidTarget(_))
    ));
}

fn expected_ranks(design: ViewDesign, total: usize, active: usize) -> Vec<usize> {
    (1..=total)
        .filter(|&r| match design {
            ViewDesign::HybridAbsolute => r <= 10 || r == active,
            ViewDesign::Hybrid5050 => r <= 5 || r.abs_diff(active) <= 2,
        })
        .collect()
}

proptest! {
    #[test]
    fn visible_rank_sets(total in 1usize..60, pick in 0usize..60) {
        let active = 1 + pick % total;
        for design in [ViewDesign::HybridAbsolute, ViewDesign::Hybrid5050] {
            prop_assert_eq!(visible_ranks(design, total, active), expected_ranks(design, total, active));
        }
    }
}

#[test]
fn views_on_random_fixtures() {
    for seed in 0..20u64 {
        let users = 3 + (seed as usize * 7) % 40;
        let g = ledger_graph(users, 2, 8).snapshot();
        let ledger = random_ledger(seed, &g, 40 + seed as usize * 30, END);
        let filter = ScoreFilter::new(None, TimeWindow::Semester, BoardKind::TopContributor, END);
        let standings = ledger.standings(&filter);
        for a in 0..users {
            let active = EntityId::from(format!("u{a:02}"));
            for design in [ViewDesign::HybridAbsolute, ViewDesign::Hybrid5050] {
                let view = ledger.build_view(&g, &filter, &active, design).unwrap();
                let rank = match standings.iter().position(|s| s.user == active) {
                    Some(i) => i + 1,
                    None => standings.len() + 1,
                };
                let total = standings.len().max(rank);
                assert_eq!(view.ranked, total);
                let ranks: Vec<usize> = view.rows.iter().map(|r| r.rank).collect();
                assert_eq!(ranks, expected_ranks(design, total, rank), "seed {seed} user {active}");
                assert_eq!(view.rows.iter().filter(|r| r.active).count(), 1);
                for row in &view.rows {
                    assert_eq!(row.active, row.user == active);
                    if row.rank <= standings.len() {
                        assert_eq!(row.user, standings[row.rank - 1].user);
                        assert_eq!(row.score, standings[row.rank - 1].score);
                    } else {
                        assert_eq!(row.score, Points::ZERO);
                    }
                }
                assert!(view.rows.windows(2).all(|w| w[0].score >= w[1].score));
            }
        }
    }
}
