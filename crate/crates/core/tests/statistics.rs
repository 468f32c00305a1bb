mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::*;
use machprep::baselines::{fit_pca, project, reconstruct};
use machprep::outlier::{apply_cutoffs, Bounds, CutoffSpec};
use machprep::reduce::{correlation_dedup, pearson_matrix};
use machprep::select::missing_ratio_filter;
use machprep::{is_missing, Matrix, SensorFrame, MISSING};
use proptest::prelude::*;
use rand::Rng;

fn frame_with_holes(seed: u64, n: usize, d: usize, hole_rate: f64) -> SensorFrame {
    let mut r = rng(seed);
    let values = (0..n * d)
        .map(|_| if r.random_bool(hole_rate) { MISSING } else { r.random_range(-3.0..3.0) })
        .collect();
    SensorFrame::new((0..n as i64).collect(), (0..d).map(|j| format!("s{j}")).collect(), values).unwrap()
}

/// Column filter then row filter, straight from the definitions.
fn selection_oracle(f: &SensorFrame, col_t: f64, row_t: Option<f64>) -> (Vec<String>, Vec<i64>) {
    let n = f.n_rows();
    let cols: Vec<usize> = (0..f.n_cols())
        .filter(|&j| ((0..n).filter(|&i| f.get(i, j).is_nan()).count() as f64 / n as f64) < col_t)
        .collect();
    let rows: Vec<i64> = (0..n)
        .filter(|&i| match row_t {
            None => true,
            Some(t) => cols.iter().filter(|&&j| f.get(i, j).is_nan()).count() as f64 / cols.len() as f64 <= t,
        })
        .map(|i| f.timestamps()[i])
        .collect();
    (cols.iter().map(|&j| f.feature_names()[j].clone()).collect(), rows)
}

#[test]
fn missing_ratio_filter_matches_oracle() {
    for seed in 0..200 {
        let mut r = rng(seed);
        let f = frame_with_holes(seed, r.random_range(5..40), r.random_range(1..8), r.random_range(0.0..0.6));
        let col_t = r.random_range(0.05..1.0);
        let row_t = if r.random_bool(0.8) { Some(r.random_range(0.0..1.0)) } else { None };
        let (cols, rows) = selection_oracle(&f, col_t, row_t);
        match missing_ratio_filter(&f, col_t, row_t) {
            Ok((out, report)) => {
                assert_eq!(out.feature_names(), cols.as_slice(), "seed {seed}");
                assert_eq!(out.timestamps(), rows.as_slice(), "seed {seed}");
                assert_eq!(report.dropped_row_count + rows.len(), f.n_rows());
                assert_eq!(report.remaining_shape, (rows.len(), cols.len()));
            }
            Err(_) => assert!(cols.is_empty(), "seed {seed}"),
        }
    }
}

#[test]
fn pearson_uses_pairwise_complete_rows() {
    for seed in 0..50 {
        let f = frame_with_holes(seed, 20, 5, 0.15);
        let m = pearson_matrix(&f).unwrap();
        for a in 0..5 {
            for b in 0..5 {
                let (x, y): (Vec<f64>, Vec<f64>) = (0..20)
                    .map(|i| (f.get(i, a), f.get(i, b)))
                    .filter(|(x, y)| !x.is_nan() && !y.is_nan())
                    .unzip();
                match pearson_oracle(&x, &y) {
                    Some(want) if a != b => assert!((m.r[a][b] - want).abs() < 1e-12),
                    Some(_) => assert_eq!(m.r[a][b], 1.0),
                    None => assert!(m.degenerate[a][b]),
                }
            }
        }
    }
}

/// Connected components of the |r| > t graph by depth-first search.
fn components_oracle(r: &[Vec<f64>], t: f64) -> BTreeSet<BTreeSet<usize>> {
    let d = r.len();
    let mut seen = vec![false; d];
    let mut out = BTreeSet::new();
    for s in 0..d {
        if seen[s] {
            continue;
        }
        let mut comp = BTreeSet::new();
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(u) = stack.pop() {
            comp.insert(u);
            for v in 0..d {
                if !seen[v] && v != u && r[u][v].abs() > t {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        out.insert(comp);
    }
    out
}

#[test]
fn dedup_keeps_one_per_component() {
    for seed in 0..100 {
        let mut r = rng(seed);
        let n = 40;
        let d = r.random_range(2..10);
        // Copies of a few base signals with varying noise.
        let bases: Vec<Vec<f64>> = (0..3).map(|_| (0..n).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let mut values = vec![0.0; n * d];
        for j in 0..d {
            let b = &bases[r.random_range(0..3)];
            let noise = r.random_range(0.0..0.5);
            let sign = if r.random_bool(0.5) { 1.0 } else { -1.0 };
            for i in 0..n {
                values[i * d + j] = sign * b[i] + noise * r.random_range(-1.0..1.0);
            }
        }
        let f = SensorFrame::new((0..n as i64).collect(), (0..d).map(|j| format!("c{j}")).collect(), values).unwrap();
        let m = pearson_matrix(&f).unwrap();
        let t = r.random_range(0.5..0.95);
        let report = correlation_dedup(&m, t, seed).unwrap();
        let kept: BTreeSet<usize> = report
            .final_features
            .iter()
            .map(|n| n[1..].parse().unwrap())
            .collect();
        let comps = components_oracle(&m.r, t);
        assert_eq!(kept.len(), comps.len(), "seed {seed}");
        for c in &comps {
            assert_eq!(c.intersection(&kept).count(), 1, "seed {seed}");
        }
        assert_eq!(correlation_dedup(&m, t, seed).unwrap(), report);
    }
}

#[test]
fn retained_cells_lie_within_bounds() {
    for seed in 0..50 {
        let mut r = rng(seed);
        let f = frame_with_holes(seed, 60, 4, 0.1);
        let mut bounds = BTreeMap::new();
        for j in 0..4 {
            let lo = if r.random_bool(0.7) { Some(r.random_range(-3.0..-1.0)) } else { None };
            let hi = if r.random_bool(0.7) { Some(r.random_range(1.0..3.0)) } else { None };
            bounds.insert(format!("s{j}"), Bounds::new(lo, hi));
        }
        let spec = CutoffSpec(bounds.clone());
        let (out, report) = apply_cutoffs(&f, &spec).unwrap();
        let inside = |i: usize| {
            (0..4).all(|j| {
                let v = f.get(i, j);
                let b = bounds[&format!("s{j}")];
                is_missing(v) || (b.lower.is_none_or(|l| v >= l) && b.upper.is_none_or(|u| v <= u))
            })
        };
        let want: Vec<i64> = (0..60).filter(|&i| inside(i)).map(|i| i as i64).collect();
        assert_eq!(out.timestamps(), want.as_slice());
        assert_eq!(report.rows_removed, 60 - want.len());
    }
}

#[test]
fn pca_matches_jacobi_on_small_matrices() {
    let mut r = rng(11);
    for _ in 0..200 {
        let d = r.random_range(1..=6);
        let n = r.random_range(2..=20);
        let m = random_matrix(&mut r, n, d);
        let pca = fit_pca(&m).unwrap();
        let want = jacobi_eigenvalues(covariance_oracle(&m));
        for (g, w) in pca.eigenvalues.iter().zip(&want) {
            assert!((g - w.max(0.0)).abs() < 1e-8, "{g} vs {w}");
        }
        // Orthonormal directions, ratios summing to one.
        for a in 0..d {
            for b in 0..d {
                let dot: f64 = (0..d).map(|j| pca.components.get(a, j) * pca.components.get(b, j)).sum();
                assert!((dot - f64::from(u8::from(a == b))).abs() < 1e-9);
            }
        }
        assert!((pca.explained_variance_ratio.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(pca.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        // Full projection recomposes the data.
        let back = reconstruct(&pca, &project(&pca, d, &m).unwrap());
        for i in 0..n {
            for j in 0..d {
                assert!((back.get(i, j) - m.get(i, j)).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn isotropic_data_splits_variance_evenly() {
    let mut r = rng(12);
    let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
    let data: Vec<f64> = (0..30_000).map(|_| r.sample(normal)).collect();
    let m = Matrix::from_vec(10_000, 3, data);
    let pca = fit_pca(&m).unwrap();
    for ratio in &pca.explained_variance_ratio {
        assert!((ratio - 1.0 / 3.0).abs() < 0.05, "{ratio}");
    }
    // The variance of each projected column is its eigenvalue.
    let p = project(&pca, 3, &m).unwrap();
    for j in 0..3 {
        let col = p.column(j);
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
        assert!((var - pca.eigenvalues[j]).abs() < 1e-6);
    }
}

proptest! {
    #[test]
    fn quantiles_match_order_statistics(xs in prop::collection::vec(-1e3f64..1e3, 1..30), p in 0.0f64..=1.0) {
        let got = machprep::stats::quantile(&xs, p).unwrap();
        prop_assert!((got - quantile_oracle(&xs, p)).abs() <= 1e-12 * (1.0 + got.abs()));
    }

    #[test]
    fn cv_matches_definition(xs in prop::collection::vec(1.0f64..1e3, 1..30)) {
        let got = machprep::reduce::coefficient_of_variation(&xs).unwrap().unwrap();
        prop_assert!((got - cv_oracle(&xs).unwrap()).abs() <= 1e-12);
    }
}
