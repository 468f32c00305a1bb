mod common;

use common::*;
use machprep::baselines::{choose_error_threshold, train_autoencoder, ThresholdMetric};
use machprep::models::network::{Activation, Loss, Network};
use machprep::models::{cross_validate, evaluate, random_search, train_forest, train_mlp, ForestParams, MlpParams, MlpSpace};
use machprep::prepare::Dataset;
use machprep::Matrix;
use rand::Rng;

/// Two noisy blobs, `gap` apart along every axis.
fn blobs(seed: u64, n: usize, d: usize, gap: f64) -> Dataset {
    let mut r = rng(seed);
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = (i % 2) as u8;
        for _ in 0..d {
            data.push(f64::from(y) * gap + r.random_range(-1.0..1.0));
        }
        labels.push(y);
    }
    Dataset {
        features: Matrix::from_vec(n, d, data),
        labels,
        timestamps: (0..n as i64).collect(),
    }
}

#[test]
fn mlp_gradients_match_central_differences() {
    let mut r = rng(21);
    for _ in 0..40 {
        let d = r.random_range(1..6);
        let sizes = [d, r.random_range(1..8), r.random_range(1..6), 1];
        let mut net = Network::new(&sizes, Activation::Relu, Activation::Sigmoid, &mut r);
        randomize(&mut net, &mut r);
        assert!(net.n_params() <= 200);
        let n = r.random_range(1..12);
        let x = random_matrix(&mut r, n, d);
        let y = Matrix::from_vec(n, 1, (0..n).map(|_| f64::from(r.random_range(0..2u8))).collect());
        let err = gradient_error(&net, &x, &y, Loss::BinaryCrossEntropy);
        assert!(err < 1e-4, "{sizes:?}: {err}");
    }
}

#[test]
fn autoencoder_gradients_match_central_differences() {
    let mut r = rng(22);
    for act in [Activation::Relu, Activation::Sigmoid, Activation::Identity] {
        for _ in 0..15 {
            let d = r.random_range(2..9);
            let k = r.random_range(1..=d);
            let mut net = Network::new(&[d, k, d], act, Activation::Identity, &mut r);
            randomize(&mut net, &mut r);
            assert!(net.n_params() <= 200);
            let n = r.random_range(1..10);
            let x = random_matrix(&mut r, n, d);
            let err = gradient_error(&net, &x, &x, Loss::MeanSquared);
            assert!(err < 1e-4, "{act:?} d={d} k={k}: {err}");
        }
    }
}

#[test]
fn deep_forest_memorises_training_data() {
    let data = blobs(1, 200, 4, 0.5);
    let params = ForestParams {
        n_trees: 25,
        max_depth: 64,
        features_per_split: Some(4),
        seed: 3,
        ..Default::default()
    };
    let model = train_forest(&data.features, &data.labels, &params).unwrap();
    let acc = evaluate(&model.predict(&data.features).unwrap(), &data.labels).unwrap().accuracy.value;
    assert!(acc > 0.97, "{acc}");
}

#[test]
fn training_accuracy_grows_with_depth() {
    let data = blobs(2, 400, 3, 0.6);
    let acc = |depth| {
        let p = ForestParams {
            n_trees: 15,
            max_depth: depth,
            seed: 5,
            ..Default::default()
        };
        let m = train_forest(&data.features, &data.labels, &p).unwrap();
        assert!(m.trees.iter().all(|t| t.depth() <= depth));
        evaluate(&m.predict(&data.features).unwrap(), &data.labels).unwrap().accuracy.value
    };
    let curve: Vec<f64> = [1, 2, 4, 8, 16].into_iter().map(acc).collect();
    assert!(curve.windows(2).all(|w| w[1] >= w[0] - 0.01), "{curve:?}");
    assert!(curve[4] > curve[0], "{curve:?}");
}

#[test]
fn cross_validation_prefers_the_deeper_forest_on_xor() {
    // XOR needs at least two levels of splits.
    let mut r = rng(7);
    let n = 400;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..n {
        let (a, b): (f64, f64) = (r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
        data.extend([a, b]);
        labels.push(u8::from((a > 0.0) != (b > 0.0)));
    }
    let x = Matrix::from_vec(n, 2, data);
    let grid: Vec<ForestParams> = [1, 8]
        .into_iter()
        .map(|max_depth| ForestParams {
            n_trees: 10,
            max_depth,
            seed: 1,
            ..Default::default()
        })
        .collect();
    let (best, results) = cross_validate(&x, &labels, &grid, 5, 9).unwrap();
    assert_eq!(best.max_depth, 8);
    assert!(results[1].mean_accuracy > results[0].mean_accuracy + 0.2, "{results:?}");
}

#[test]
fn random_search_is_seeded_and_picks_the_best_draw() {
    let train = blobs(3, 200, 3, 1.5);
    let val = blobs(4, 60, 3, 1.5);
    let space = MlpSpace {
        hidden_layer_sizes: vec![vec![4], vec![8, 4]],
        learning_rates: vec![1e-6, 0.1],
        batch_sizes: vec![16, 32],
        epochs: vec![20],
    };
    let (best, results) = random_search(&train, &val, &space, 8, 11).unwrap();
    let (again, _) = random_search(&train, &val, &space, 8, 11).unwrap();
    assert_eq!(best, again);
    let top = results.iter().map(|r| r.validation_accuracy).fold(0.0, f64::max);
    let chosen = results.iter().find(|r| r.params == best).unwrap();
    assert_eq!(chosen.validation_accuracy, top);
    assert!(top > 0.9, "{results:?}");
    assert_eq!(best.learning_rate, 0.1);
}

#[test]
fn mlp_separates_blobs() {
    let train = blobs(5, 400, 4, 1.5);
    let test = blobs(6, 200, 4, 1.5);
    let m = train_mlp(&train, &test, &MlpParams::default()).unwrap();
    let acc = evaluate(&m.predict(&test.features).unwrap(), &test.labels).unwrap().accuracy.value;
    assert!(acc > 0.95, "{acc}");
}

#[test]
fn autoencoder_flags_off_manifold_rows() {
    // Training rows lie on a line in 4-D; test rows off it reconstruct badly.
    let mut r = rng(8);
    let line = |t: f64| [t, 2.0 * t, -t, 0.5 * t];
    let rows: Vec<[f64; 4]> = (0..500).map(|_| line(r.random_range(-1.0..1.0))).collect();
    let m = Matrix::from_rows(&rows);
    let params = MlpParams {
        hidden_layer_sizes: vec![],
        learning_rate: 0.05,
        batch_size: 16,
        epochs: 60,
        seed: 2,
    };
    let mut ae = train_autoencoder(&m, 1, &params, Activation::Identity).unwrap();
    assert!(ae.curves.last().unwrap().loss < ae.curves[0].loss);
    let mut probe: Vec<[f64; 4]> = (0..50).map(|_| line(r.random_range(-1.0..1.0))).collect();
    let labels: Vec<u8> = (0..100).map(|i| u8::from(i >= 50)).collect();
    probe.extend((0..50).map(|_| {
        let mut v = line(r.random_range(-1.0..1.0));
        v[3] += 2.0;
        v
    }));
    let probe = Matrix::from_rows(&probe);
    let errors = ae.reconstruction_errors(&probe).unwrap();
    let choice = choose_error_threshold(&errors, &labels, ThresholdMetric::Accuracy).unwrap();
    ae.threshold = choice.threshold;
    let acc = evaluate(&ae.predict(&probe).unwrap(), &labels).unwrap().accuracy.value;
    assert_eq!(acc, 1.0);
}
