//! Brute-force oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::path::Path;

use machprep::ingest::{EventKind, EventLog, EventRecord};
use machprep::labeler::{HealthState, LabelingConfig, OperationSignal, WindowOverride};
use machprep::models::network::{Loss, Network};
use machprep::pipeline::PipelineConfig;
use machprep::synth::{generate_scenario, write_scenario, GroundTruth, SynthConfig};
use machprep::{Matrix, SensorFrame, MISSING};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- statistics

/// Pearson via z-scores, accumulated in reverse order.
pub fn pearson_oracle(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().rev().sum::<f64>() / n;
    let my = y.iter().rev().sum::<f64>() / n;
    let sx = (x.iter().rev().map(|v| (v - mx).powi(2)).sum::<f64>() / n).sqrt();
    let sy = (y.iter().rev().map(|v| (v - my).powi(2)).sum::<f64>() / n).sqrt();
    if sx == 0.0 || sy == 0.0 {
        return None;
    }
    let mut acc = 0.0;
    for i in (0..x.len()).rev() {
        acc += ((x[i] - mx) / sx) * ((y[i] - my) / sy);
    }
    Some(acc / n)
}

pub fn cv_oracle(x: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let m = x.iter().rev().sum::<f64>() / n;
    if m == 0.0 {
        return None;
    }
    let var = x.iter().rev().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
    Some(var.sqrt() / m)
}

/// k-th smallest by counting, no sorting.
fn order_statistic(x: &[f64], k: usize) -> f64 {
    for &c in x {
        let below = x.iter().filter(|&&v| v < c).count();
        let equal = x.iter().filter(|&&v| v == c).count();
        if below <= k && k < below + equal {
            return c;
        }
    }
    unreachable!("some element has rank k")
}

/// Linear interpolation at position `p (n - 1)`.
pub fn quantile_oracle(x: &[f64], p: f64) -> f64 {
    let h = p * (x.len() - 1) as f64;
    let lo = h.floor() as usize;
    let a = order_statistic(x, lo);
    if h == lo as f64 {
        return a;
    }
    let b = order_statistic(x, lo + 1);
    a + (h - lo as f64) * (b - a)
}

/// Population covariance by the definition, one pair at a time.
pub fn covariance_oracle(m: &Matrix) -> Vec<Vec<f64>> {
    let (n, d) = (m.rows(), m.cols());
    let cols: Vec<Vec<f64>> = (0..d).map(|j| m.column(j)).collect();
    let means: Vec<f64> = cols.iter().map(|c| c.iter().sum::<f64>() / n as f64).collect();
    let mut c = vec![vec![0.0; d]; d];
    for a in 0..d {
        for b in 0..d {
            c[a][b] = (0..n).map(|i| (cols[a][i] - means[a]) * (cols[b][i] - means[b])).sum::<f64>() / n as f64;
        }
    }
    c
}

/// Cyclic Jacobi rotations until the off-diagonal mass vanishes.
/// Returns eigenvalues, descending.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let d = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..d)
            .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..d).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Matrix {
    let data = (0..n * d).map(|_| rng.random_range(-5.0..5.0)).collect();
    Matrix::from_vec(n, d, data)
}

// ------------------------------------------------------------------ labeling

pub struct Schedule {
    pub frame: SensorFrame,
    pub log: EventLog,
    pub cfg: LabelingConfig,
}

/// Irregularly sampled frame with an operation signal, and a random log of
/// overlapping stoppages. Failures are packed close together so their
/// windows run into earlier intervals.
pub fn random_schedule(seed: u64) -> Schedule {
    let mut r = rng(seed);
    let n = r.random_range(200..600);
    let mut ts = Vec::with_capacity(n);
    let mut t = r.random_range(0..1000i64);
    for _ in 0..n {
        ts.push(t);
        t += if r.random_bool(0.05) { r.random_range(100..2000) } else { r.random_range(1..40) };
    }
    let (t0, t_end) = (ts[0], *ts.last().unwrap());
    let op: Vec<f64> = (0..n)
        .map(|_| match r.random_range(0..20) {
            0 => MISSING,
            1 => 0.0,
            _ => r.random_range(0.5..10.0),
        })
        .collect();
    let frame = SensorFrame::new(ts, vec!["op".into()], op).unwrap();

    let kinds = [EventKind::NormalStop, EventKind::Pause, EventKind::External, EventKind::Failure];
    let mut records = Vec::new();
    for _ in 0..r.random_range(0..12) {
        let start = r.random_range(t0 - 500..t_end + 200);
        let kind = if r.random_bool(0.5) { EventKind::Failure } else { kinds[r.random_range(0..3)] };
        let (component, failure_mode) = match (kind, r.random_range(0..4)) {
            (EventKind::Failure, 0) => (None, None),
            (EventKind::Failure, 1) => (Some("pump".to_string()), None),
            (EventKind::Failure, 2) => (Some("pump".to_string()), Some("seal".to_string())),
            (EventKind::Failure, _) => (Some("valve".to_string()), Some("leak".to_string())),
            _ => (None, None),
        };
        records.push(EventRecord {
            start,
            end: start + r.random_range(1..400),
            kind,
            component,
            failure_mode,
            note: String::new(),
        });
    }
    // A burst of same-start events now and then.
    if r.random_bool(0.3) && !records.is_empty() {
        let mut twin = records[0].clone();
        twin.kind = EventKind::NormalStop;
        twin.component = None;
        twin.failure_mode = None;
        twin.end = twin.start + r.random_range(1..50);
        records.push(twin);
    }
    let mut per_mode = std::collections::BTreeMap::new();
    if r.random_bool(0.5) {
        per_mode.insert(
            "seal".to_string(),
            WindowOverride {
                degraded_window: Some(r.random_range(0..300)),
                transition_window: None,
            },
        );
    }
    let cfg = LabelingConfig {
        degraded_window: r.random_range(0..400),
        transition_window: r.random_range(0..400),
        warmup: r.random_range(0..60),
        cooldown: r.random_range(0..60),
        operation_signal: if r.random_bool(0.8) {
            Some(OperationSignal {
                feature: "op".into(),
                threshold: r.random_range(0.0..1.0),
            })
        } else {
            None
        },
        per_mode,
    };
    Schedule {
        frame,
        log: EventLog::new(records).unwrap(),
        cfg,
    }
}

/// Labels one timestamp at a time straight from the log.
pub fn label_oracle(s: &Schedule) -> Vec<HealthState> {
    let ts = s.frame.timestamps();
    let t0 = ts[0];
    let data_end = *ts.last().unwrap() + 1;
    let recs = s.log.records();
    let op = s.cfg.operation_signal.as_ref();
    let mut out = Vec::with_capacity(ts.len());
    for (i, &t) in ts.iter().enumerate() {
        if recs.iter().any(|e| e.start <= t && t < e.end) {
            out.push(HealthState::Excluded);
            continue;
        }
        if let Some(sig) = op {
            let v = s.frame.get(i, 0);
            if v.is_nan() || v <= sig.threshold {
                out.push(HealthState::Excluded);
                continue;
            }
        }
        let start = recs.iter().map(|e| e.end).filter(|&e| e <= t).max().unwrap_or(t0).max(t0);
        // A stop after the last sample still ends the stretch.
        let end = recs.iter().map(|e| e.start).filter(|&b| b > t).min().unwrap_or(data_end);
        if t < start + s.cfg.warmup || t >= end - s.cfg.cooldown {
            out.push(HealthState::Excluded);
            continue;
        }
        // The event ending this stretch; a failure wins among equal starts.
        let cause = recs
            .iter()
            .enumerate()
            .filter(|(_, e)| e.start == end)
            .min_by_key(|(k, e)| (e.kind != EventKind::Failure, *k))
            .map(|(_, e)| e);
        let state = match cause {
            Some(e) if e.kind == EventKind::Failure => {
                let mode = e
                    .failure_mode
                    .clone()
                    .or_else(|| e.component.clone())
                    .unwrap_or_else(|| "unspecified".into());
                let o = s.cfg.per_mode.get(&mode).copied().unwrap_or_default();
                let dw = o.degraded_window.unwrap_or(s.cfg.degraded_window);
                let dtr = o.transition_window.unwrap_or(s.cfg.transition_window);
                if t >= end - dw {
                    HealthState::Degraded {
                        component: e.component.clone(),
                        failure_mode: mode,
                    }
                } else if t >= end - dw - dtr {
                    HealthState::Transition
                } else {
                    HealthState::Healthy
                }
            }
            _ => HealthState::Healthy,
        };
        out.push(state);
    }
    out
}

// ---------------------------------------------------------------- gradients

/// Random weights and biases. Non-zero biases keep ReLU units off their kink
/// when a whole layer below is inactive.
pub fn randomize(net: &mut Network, rng: &mut ChaCha8Rng) {
    let p: Vec<f64> = (0..net.n_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
    net.set_params(&p);
}

/// Largest relative error between the analytic gradient and central
/// differences, `|a - n| / max(|a| + |n|, 1e-6)` per weight.
pub fn gradient_error(net: &Network, x: &Matrix, y: &Matrix, loss: Loss) -> f64 {
    let rows: Vec<usize> = (0..x.rows()).collect();
    let (_, g) = net.loss_and_gradient(x, y, &rows, loss);
    let analytic = g.flatten();
    let p0 = net.params();
    let h = 1e-5;
    let mut probe = net.clone();
    let mut worst = 0.0f64;
    for k in 0..p0.len() {
        let mut p = p0.clone();
        p[k] = p0[k] + h;
        probe.set_params(&p);
        let up = probe.loss(x, y, &rows, loss);
        p[k] = p0[k] - h;
        probe.set_params(&p);
        let down = probe.loss(x, y, &rows, loss);
        let numeric = (up - down) / (2.0 * h);
        let err = (analytic[k] - numeric).abs() / (analytic[k].abs() + numeric.abs()).max(1e-6);
        worst = worst.max(err);
    }
    worst
}

// ------------------------------------------------------------------ scenario

/// Writes the scenario for `cfg` into `dir` and returns a pipeline config
/// pointing at it.
pub fn scenario(cfg: &SynthConfig, dir: &Path) -> (PipelineConfig, GroundTruth) {
    let (frame, log, truth) = generate_scenario(cfg).expect("scenario generates");
    write_scenario(dir, &frame, &log, &truth).expect("scenario written");
    let mut pc = PipelineConfig::for_synthetic(cfg, &truth);
    pc.paths.sensors = dir.join("sensors.csv");
    pc.paths.events = dir.join("events.csv");
    (pc, truth)
}

/// The default layout cut down to the first two failures, quick enough for
/// ordinary tests.
pub fn small_synth() -> SynthConfig {
    let mut cfg = SynthConfig {
        duration_hours: 400,
        sampling_period: 120,
        ..SynthConfig::default()
    };
    cfg.schedule.truncate(5);
    cfg.idle.retain(|s| s.start_minute < 300 * 60);
    cfg
}
