use adaptmenu_core::heuristics::{compare, rank, score, HeuristicConfig};
use adaptmenu_core::testkit::{log_of, random_definition, random_selects, selectable};
use adaptmenu_core::usage::{hour_of, snapshot, LogError, NodeKey, StatsParams, UsageEvent, UsageLog};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

/// Direct evaluation of the three factors from the raw event list.
fn oracle(events: &[UsageEvent], key: &NodeKey, t: i64, c: &HeuristicConfig) -> (f64, Option<i64>, f64) {
    let mine: Vec<i64> = events
        .iter()
        .filter(|e| e.key().as_ref() == Some(key))
        .map(|e| e.t)
        .collect();
    let f = mine.iter().map(|&te| 0.5f64.powf((t - te) as f64 / c.half_life_f)).sum();
    let hour = |x: i64| (x + c.tz_offset).rem_euclid(86_400) / 3600;
    let tau = if mine.is_empty() {
        0.0
    } else {
        mine.iter().filter(|&&te| hour(te) == hour(t)).count() as f64 / mine.len() as f64
    };
    (f, mine.last().copied(), tau)
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn snapshot_matches_direct_evaluation(
        seed in any::<u64>(),
        n in 0usize..200,
        max_gap in 0i64..20_000,
        tz in -43_200i64..50_400,
        hl_f in 600.0f64..2_000_000.0,
        hl_r in 60.0f64..200_000.0,
        later in 0i64..100_000,
    ) {
        let mut rng = StdRng::seed_from_u64(seed);
        let def = random_definition(&mut rng, 30);
        let events = random_selects(&mut rng, &def, n, 1_700_000_000, max_gap);
        let config = HeuristicConfig { half_life_f: hl_f, half_life_r: hl_r, tz_offset: tz, ..HeuristicConfig::default() };
        let mut log = UsageLog::new(StatsParams::from(&config));
        for e in &events {
            log.record(e.clone()).unwrap();
        }
        let t = events.last().map_or(1_700_000_000, |e| e.t) + later;
        let snap = snapshot(&log, t, &config);
        let fs: Vec<f64> = selectable(&def)
            .into_iter()
            .map(|(m, id)| oracle(&events, &NodeKey::new(m, id), t, &config).0)
            .collect();
        let f_max = fs.iter().cloned().fold(0.0, f64::max);
        for (m, id) in selectable(&def) {
            let key = NodeKey::new(m, id);
            let (f, last, tau) = oracle(&events, &key, t, &config);
            match snap.row(&key) {
                None => prop_assert!(last.is_none()),
                Some(row) => {
                    prop_assert!(rel_close(row.f, f, 1e-9), "{} vs {}", row.f, f);
                    prop_assert!(rel_close(row.f_hat, f / f_max, 1e-9));
                    prop_assert_eq!(row.last_t, last);
                    let r = 0.5f64.powf((t - last.unwrap()) as f64 / hl_r);
                    prop_assert!(rel_close(row.r, r, 1e-12));
                    prop_assert_eq!(row.tau, tau);
                }
            }
        }
        // A log rebuilt from its own text has the same statistics.
        let reread = UsageLog::parse(&log.to_text(), log.params()).unwrap();
        prop_assert_eq!(reread, log);
    }

    #[test]
    fn scores_stay_in_unit_interval_and_ranking_is_total(
        seed in any::<u64>(),
        n in 0usize..100,
        w in (0.0f64..1.0, 0.0f64..1.0),
    ) {
        let mut rng = StdRng::seed_from_u64(seed);
        let def = random_definition(&mut rng, 40);
        let log = log_of(random_selects(&mut rng, &def, n, 0, 50_000));
        let (a, b) = (w.0.min(w.1), w.0.max(w.1));
        let config = HeuristicConfig { w_f: a, w_r: b - a, w_t: 1.0 - b, ..HeuristicConfig::default() };
        let t = log.last_t().unwrap_or(0) + 1000;
        let snap = snapshot(&log, t, &config);
        let keys: Vec<NodeKey> = selectable(&def).into_iter().map(|(m, id)| NodeKey::new(m, id)).collect();
        let ranked = rank(&snap, &keys, &config);
        prop_assert_eq!(ranked.len(), keys.len());
        for s in &ranked {
            prop_assert!((0.0..=1.0).contains(&s.s));
        }
        for pair in ranked.windows(2) {
            prop_assert_eq!(compare(&pair[0], &pair[1]), std::cmp::Ordering::Less);
        }
        for k in &keys {
            prop_assert_eq!(score(&snap, k, &config).s, ranked.iter().find(|s| &s.node == k).unwrap().s);
        }
    }
}

#[test]
fn zero_data_rank_is_definition_order() {
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..50 {
        let def = random_definition(&mut rng, 40);
        let keys: Vec<NodeKey> = selectable(&def).into_iter().map(|(m, id)| NodeKey::new(m, id)).collect();
        let config = HeuristicConfig::default();
        let ranked: Vec<NodeKey> = rank(&snapshot(&UsageLog::default(), 0, &config), &keys, &config)
            .into_iter()
            .map(|s| s.node)
            .collect();
        assert_eq!(ranked, keys);
    }
}

#[test]
fn log_file_format() {
    let text = "100 s1 select file/open\n100 s1 expand file\n160 s2 panel_expand file/more\n";
    let log = UsageLog::parse(text, StatsParams::default()).unwrap();
    assert_eq!(log.len(), 3);
    assert_eq!(log.to_text(), text);

    let err = UsageLog::parse("100 s select m/a\n99 s select m/a\n", StatsParams::default()).unwrap_err();
    assert!(matches!(err.root(), LogError::OutOfOrder { t_new: 99, t_last: 100 }));
    for bad in ["100 s select m\n", "100 s expand m/a\n", "x s select m/a\n", "100 s launch m/a\n", "100 s\n"] {
        assert!(UsageLog::parse(bad, StatsParams::default()).is_err(), "{bad:?}");
    }
}

#[test]
fn hour_buckets_follow_the_offset() {
    assert_eq!(hour_of(0, 0), 0);
    assert_eq!(hour_of(9 * 3600 + 59 * 60, 0), 9);
    assert_eq!(hour_of(0, -3600), 23);
    assert_eq!(hour_of(-1, 0), 23);
    assert_eq!(hour_of(3600 * 23, 3600), 0);
}
