use std::collections::BTreeSet;

use machprep::prepare::{
    balance_and_split, fit_scaler, inverse_transform, transform, BalanceMode, DataSplits, ScalerKind, SplitSpec,
};
use machprep::SensorFrame;
use proptest::prelude::*;

/// Rows `t = offset, offset + 2, ...`, so two frames with offsets 0 and 1
/// never share a timestamp.
fn rows(n: usize, offset: i64) -> SensorFrame {
    let ts: Vec<i64> = (0..n as i64).map(|i| 2 * i + offset).collect();
    let values = ts.iter().flat_map(|&t| [t as f64, (t % 7) as f64]).collect();
    SensorFrame::new(ts, vec!["a".into(), "b".into()], values).unwrap()
}

fn time_sets(s: &DataSplits) -> [BTreeSet<i64>; 3] {
    [&s.train, &s.validation, &s.test].map(|d| d.timestamps.iter().copied().collect())
}

fn imbalance(d: &machprep::prepare::Dataset) -> i64 {
    (d.positives() as i64 - (d.len() - d.positives()) as i64).abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn sets_are_disjoint_and_complete(n_d in 5usize..200, extra in 0usize..800, seed in any::<u64>(), mode in 0u8..3) {
        let balance = [BalanceMode::Both, BalanceMode::TestOnly, BalanceMode::None][mode as usize];
        let spec = SplitSpec { balance, seed, ..Default::default() };
        let (h, d) = (rows(n_d + extra, 1), rows(n_d, 0));
        let s = balance_and_split(&h, &d, &spec).unwrap();
        let [a, b, c] = time_sets(&s);
        prop_assert!(a.is_disjoint(&b) && a.is_disjoint(&c) && b.is_disjoint(&c));
        prop_assert_eq!(a.len() + b.len() + c.len(), s.train.len() + s.validation.len() + s.test.len());
        // Every degraded row lands somewhere.
        let degraded = s.train.positives() + s.validation.positives() + s.test.positives();
        prop_assert_eq!(degraded, n_d);
        // Labels follow the source frame.
        for set in [&s.train, &s.validation, &s.test] {
            for (t, l) in set.timestamps.iter().zip(&set.labels) {
                prop_assert_eq!(i64::from(*l), 1 - t % 2);
            }
        }
        if balance != BalanceMode::None {
            prop_assert!(imbalance(&s.test) <= 1);
        }
        if balance == BalanceMode::Both {
            prop_assert!(imbalance(&s.train) <= 1);
            prop_assert!(imbalance(&s.validation) <= 1);
        }
        if balance == BalanceMode::TestOnly {
            prop_assert_eq!(s.train.len() + s.validation.len() + s.test.len(), 2 * n_d + extra);
        }
    }

    #[test]
    fn test_set_ignores_balance_mode(n_d in 5usize..100, extra in 0usize..500, seed in any::<u64>()) {
        let (h, d) = (rows(n_d + extra, 1), rows(n_d, 0));
        let sorted = |b| {
            let spec = SplitSpec { balance: b, seed, ..Default::default() };
            let mut t = balance_and_split(&h, &d, &spec).unwrap().test.timestamps;
            t.sort_unstable();
            t
        };
        prop_assert_eq!(sorted(BalanceMode::Both), sorted(BalanceMode::TestOnly));
    }

    #[test]
    fn scaler_round_trip(values in prop::collection::vec(-1e4f64..1e4, 6..60), standard in any::<bool>()) {
        let n = values.len() / 2;
        let m = machprep::Matrix::from_vec(n, 2, values[..2 * n].to_vec());
        let names = vec!["a".to_string(), "b".to_string()];
        let kind = if standard { ScalerKind::Standard } else { ScalerKind::MinMax };
        let p = fit_scaler(&m, &names, kind, &Default::default()).unwrap();
        let t = transform(&m, &names, &p).unwrap();
        let back = inverse_transform(&t, &names, &p).unwrap();
        for (x, y) in m.data().iter().zip(back.data()) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
        }
        if !standard {
            prop_assert!(t.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}

#[test]
fn seeds_change_the_draw() {
    let (h, d) = (rows(500, 1), rows(100, 0));
    let a = balance_and_split(&h, &d, &SplitSpec { seed: 1, ..Default::default() }).unwrap();
    let b = balance_and_split(&h, &d, &SplitSpec { seed: 1, ..Default::default() }).unwrap();
    let c = balance_and_split(&h, &d, &SplitSpec { seed: 2, ..Default::default() }).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.test.timestamps, c.test.timestamps);
}
