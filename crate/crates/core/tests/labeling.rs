mod common;

use common::*;
use machprep::ingest::EventKind;
use machprep::labeler::{label_frame, partition_by_state, HealthState};
use proptest::prelude::*;

#[test]
fn interval_labels_match_per_timestamp_oracle() {
    let mut checked = 0;
    for seed in 0..300 {
        let s = random_schedule(seed);
        let got = label_frame(&s.log, &s.frame, &s.cfg).unwrap();
        let want = label_oracle(&s);
        for (i, (g, w)) in got.states.iter().zip(&want).enumerate() {
            assert_eq!(g, w, "seed {seed}, row {i}, t {}", s.frame.timestamps()[i]);
        }
        checked += want.len();
    }
    assert!(checked > 50_000);
}

#[test]
fn schedules_exercise_every_state() {
    let mut seen = std::collections::BTreeSet::new();
    for seed in 0..50 {
        let s = random_schedule(seed);
        seen.extend(label_oracle(&s).iter().map(|h| h.name()));
    }
    assert_eq!(seen.len(), 4, "{seen:?}");
}

#[test]
fn partitions_cover_every_row_once() {
    for seed in 0..30 {
        let s = random_schedule(seed);
        let labels = label_frame(&s.log, &s.frame, &s.cfg).unwrap();
        let p = partition_by_state(&s.frame, &labels).unwrap();
        let total = p.healthy.n_rows() + p.transition.n_rows() + p.degraded_rows() + p.excluded_rows;
        assert_eq!(total, s.frame.n_rows());
        if let Some(u) = p.degraded_union() {
            assert!(u.timestamps().windows(2).all(|w| w[0] < w[1]));
            assert_eq!(u.n_rows(), p.degraded_rows());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// No healthy row sits within the degraded + transition span before the
    /// failure that ends its stretch.
    #[test]
    fn healthy_rows_keep_clear_of_failures(seed in any::<u64>()) {
        let s = random_schedule(seed);
        let labels = label_frame(&s.log, &s.frame, &s.cfg).unwrap();
        let recs = s.log.records();
        for (i, st) in labels.states.iter().enumerate() {
            if *st != HealthState::Healthy {
                continue;
            }
            let t = s.frame.timestamps()[i];
            let Some(e) = labels.provenance[i].event.map(|k| &recs[k]) else { continue };
            if e.kind == EventKind::Failure {
                let mode = e.failure_mode.clone().or_else(|| e.component.clone()).unwrap_or_else(|| "unspecified".into());
                let (dw, dtr) = s.cfg.windows_for(&mode);
                prop_assert!(t < e.start - dw - dtr);
            }
        }
    }

    /// Rows inside a stoppage are never labeled anything but excluded.
    #[test]
    fn stoppages_are_excluded(seed in any::<u64>()) {
        let s = random_schedule(seed);
        let labels = label_frame(&s.log, &s.frame, &s.cfg).unwrap();
        for (i, &t) in s.frame.timestamps().iter().enumerate() {
            if s.log.records().iter().any(|e| e.start <= t && t < e.end) {
                prop_assert_eq!(&labels.states[i], &HealthState::Excluded);
            }
        }
    }
}
