//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion outside `KNOWN_FAILING` fails.
//!
//! Every expected value here comes from an oracle written in this file
//! (scalar re-implementations, brute-force recomputation, finite
//! differences), never from the library under test.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cfpt_core::cli::{self, CrossvalArgs, EvalArgs, LabelArgs, SynthArgs};
use cfpt_core::config::{ExperimentConfig, Mode};
use cfpt_core::eval::{self, km_estimate, mcnemar_counts, region_ratios, roc_auc, threshold_table, McNemarMethod};
use cfpt_core::labels::{derive_scan_labels, PatientRecord, ScanLabel};
use cfpt_core::loss::{batch_loss, cel_grad_logit, crl, crl_grad, LossConfig};
use cfpt_core::model::{run_crossval, Mlp, ModelConfig};
use cfpt_core::synth::generate_cohort;
use cfpt_core::Dataset;

/// Criteria expected to fail, with the reason logged in the project notes.
/// They still run and print their measured values.
const KNOWN_FAILING: &[&str] = &["AC8"];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

// ---------------------------------------------------------------- oracles

/// Three-branch scalar evaluation of the censored regression loss.
fn crl_oracle(t_pred: f64, t_d: f64, p: bool, eps: f64) -> f64 {
    if !p {
        let r = t_pred - t_d - eps;
        if r < 0.0 {
            r * r
        } else {
            0.0
        }
    } else if t_d > eps {
        let r = t_pred - t_d + eps;
        r * r
    } else {
        let r = t_pred - t_d + eps;
        if r > 0.0 {
            r * r
        } else {
            0.0
        }
    }
}

/// Location of the clamp kink in `t_pred`, if the loss has one.
fn kink(t_d: f64, p: bool, eps: f64) -> f64 {
    if p {
        t_d - eps
    } else {
        t_d + eps
    }
}

fn km_oracle(times: &[f64], events: &[bool]) -> Vec<(f64, usize, usize, usize, f64)> {
    let mut event_times: Vec<f64> = times
        .iter()
        .zip(events)
        .filter(|(_, &e)| e)
        .map(|(&t, _)| t)
        .collect();
    event_times.sort_by(f64::total_cmp);
    event_times.dedup();
    let mut s = 1.0;
    event_times
        .into_iter()
        .map(|t| {
            let n = times.iter().filter(|&&x| x >= t).count();
            let d = times.iter().zip(events).filter(|(&x, &e)| x == t && e).count();
            let c = times.iter().zip(events).filter(|(&x, &e)| x == t && !e).count();
            s *= 1.0 - d as f64 / n as f64;
            (t, n, d, c, s)
        })
        .collect()
}

fn auc_oracle(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut num, mut pairs) = (0.0, 0usize);
    for (i, &si) in scores.iter().enumerate() {
        if !labels[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] {
                continue;
            }
            pairs += 1;
            if si > sj {
                num += 1.0;
            } else if si == sj {
                num += 0.5;
            }
        }
    }
    num / pairs as f64
}

fn binom(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

// ---------------------------------------------------------------- criteria

fn ac1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for i in 0..10_000 {
        let t_pred = rng.random_range(-5.0..=10.0);
        let eps = 3.0 * (1.0 - rng.random::<f64>());
        // Every tenth tuple sits on the case boundary t_d = eps.
        let t_d = if i % 10 == 0 { eps } else { rng.random_range(-5.0..=10.0) };
        let p = rng.random::<bool>();
        let got = match crl(t_pred, t_d, p, eps) {
            Ok(v) => v,
            Err(e) => return outcome(false, format!("crl errored: {e}")),
        };
        worst = worst.max((got - crl_oracle(t_pred, t_d, p, eps)).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-12 && secs < 1.0,
        format!("10000 tuples, max abs diff {worst:.1e}, {secs:.3}s"),
    )
}

fn ac2() -> Outcome {
    let start = Instant::now();
    const H: f64 = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(2);

    let mut worst_crl = 0.0f64;
    let mut n = 0;
    while n < 200 {
        let (t_pred, t_d) = (rng.random_range(-5.0..10.0), rng.random_range(-5.0..10.0));
        let eps = 3.0 * (1.0 - rng.random::<f64>());
        let p = rng.random::<bool>();
        if (t_pred - kink(t_d, p, eps)).abs() < 1e-3 {
            continue;
        }
        let fd = (crl_oracle(t_pred + H, t_d, p, eps) - crl_oracle(t_pred - H, t_d, p, eps)) / (2.0 * H);
        worst_crl = worst_crl.max(rel_err(crl_grad(t_pred, t_d, p, eps).unwrap(), fd));
        n += 1;
    }

    let mut worst_cel = 0.0f64;
    for _ in 0..200 {
        let z = rng.random_range(-8.0..8.0);
        let y = rng.random::<bool>();
        let f = |z: f64| {
            let q = 1.0 / (1.0 + (-z).exp());
            if y {
                -q.ln()
            } else {
                -(1.0 - q).ln()
            }
        };
        let fd = (f(z + H) - f(z - H)) / (2.0 * H);
        worst_cel = worst_cel.max(rel_err(cel_grad_logit(z, y).unwrap(), fd));
    }

    // Full network: 200 random (parameters, 5-sample batch) instances.
    let mut worst_net = 0.0f64;
    let mut instances = 0;
    let mut seed = 0u64;
    while instances < 200 {
        seed += 1;
        let cfg = ModelConfig {
            input_dim: 3,
            hidden_dims: vec![4, 3],
            seed,
            init_regression_bias: true,
        };
        let mut model = Mlp::init(&cfg, Some(1.0)).unwrap();
        for w in model.params_mut() {
            *w = rng.random_range(-1.0..1.0);
        }
        let loss = LossConfig {
            lambda: rng.random_range(0.1..2.0),
            epsilon: rng.random_range(0.2..2.0),
            prob_clamp: 1e-7,
        };
        let xs: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let labels: Vec<ScanLabel> = (0..5)
            .map(|i| {
                let p = rng.random::<bool>();
                ScanLabel {
                    scan_id: format!("s{i}"),
                    patient_id: format!("p{i}"),
                    t_d: rng.random_range(-3.0..6.0),
                    p,
                    y: p && rng.random::<bool>(),
                    right_censored: !p,
                }
            })
            .collect();
        let near_kink = xs.iter().zip(&labels).any(|(x, l)| {
            let (_, t) = model.forward(x).unwrap();
            (t - kink(l.t_d, l.p, loss.epsilon)).abs() < 1e-3
        });
        if near_kink {
            continue;
        }
        let batch: Vec<(&[f64], &ScanLabel)> = xs.iter().map(|x| x.as_slice()).zip(&labels).collect();
        let (grads, _) = model.backward(&batch, &loss).unwrap();
        let eval_loss = |m: &Mlp| {
            let preds = m
                .predict(labels.iter().map(|l| l.scan_id.as_str()).zip(xs.iter().map(|x| x.as_slice())))
                .unwrap();
            batch_loss(&preds, &labels, &loss).unwrap()
        };
        for (k, &g) in grads.iter().enumerate() {
            let orig = model.params()[k];
            model.params_mut()[k] = orig + H;
            let up = eval_loss(&model);
            model.params_mut()[k] = orig - H;
            let down = eval_loss(&model);
            model.params_mut()[k] = orig;
            worst_net = worst_net.max(rel_err(g, (up - down) / (2.0 * H)));
        }
        instances += 1;
    }

    let secs = start.elapsed().as_secs_f64();
    let pass = worst_crl <= 1e-5 && worst_cel <= 1e-5 && worst_net <= 1e-5 && secs < 10.0;
    outcome(
        pass,
        format!(
            "max rel err crl {worst_crl:.1e}, cel {worst_cel:.1e}, network {worst_net:.1e} (200 each), {secs:.2}s"
        ),
    )
}

fn ac3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // Values on a 1/64 grid keep `t_pred - t_d +- eps` exact, so the zero
    // sets can be tested with `==`.
    let grid = |rng: &mut ChaCha8Rng, lo: i32, hi: i32| rng.random_range(lo * 64..=hi * 64) as f64 / 64.0;
    let mut failures = Vec::new();

    for i in 0..10_000 {
        let t_d = grid(&mut rng, -5, 10);
        let eps = rng.random_range(1..=192) as f64 / 64.0;
        let p = rng.random::<bool>();
        let t_pred = if i % 2 == 0 { kink(t_d, p, eps) + grid(&mut rng, -1, 1) } else { grid(&mut rng, -5, 10) };
        let v = crl(t_pred, t_d, p, eps).unwrap();
        let zero_expected = if !p {
            t_pred >= t_d + eps
        } else if t_d <= eps {
            t_pred <= t_d - eps
        } else {
            t_pred == t_d - eps
        };
        if v < 0.0 || (v == 0.0) != zero_expected {
            failures.push(format!("zero set ({t_pred}, {t_d}, {p}, {eps}) -> {v}"));
        }
    }

    for _ in 0..10_000 {
        let t_d = rng.random_range(-5.0..10.0);
        let eps = 3.0 * (1.0 - rng.random::<f64>());
        let p = rng.random::<bool>();
        let (a, b) = (rng.random_range(-5.0..10.0), rng.random_range(-5.0..10.0));
        let mid = crl((a + b) / 2.0, t_d, p, eps).unwrap();
        let chord = (crl(a, t_d, p, eps).unwrap() + crl(b, t_d, p, eps).unwrap()) / 2.0;
        if mid > chord + 1e-12 * chord.max(1.0) {
            failures.push(format!("convexity ({a}, {b}, {t_d}, {p}, {eps})"));
        }
    }

    let mut worst_jump = 0.0f64;
    for _ in 0..10_000 {
        let t_d = rng.random_range(-5.0..10.0);
        let eps = 3.0 * (1.0 - rng.random::<f64>());
        let p = rng.random::<bool>();
        let k = kink(t_d, p, eps);
        let g = |t| crl_grad(t, t_d, p, eps).unwrap();
        let v = |t| crl(t, t_d, p, eps).unwrap();
        worst_jump = worst_jump.max((g(k + 1e-9) - g(k - 1e-9)).abs());
        worst_jump = worst_jump.max((v(k + 1e-9) - v(k - 1e-9)).abs());
    }
    // Slope 2 across a 2e-9 bracket gives a gradient change of at most 4e-9.
    if worst_jump > 1e-8 {
        failures.push(format!("discontinuity {worst_jump:e} across a kink"));
    }

    outcome(
        failures.is_empty(),
        match failures.first() {
            None => format!("10000 zero-set, 10000 convexity, 10000 kink brackets; max jump {worst_jump:.1e}"),
            Some(f) => format!("{} failures, first: {f}", failures.len()),
        },
    )
}

fn check_label_invariants(rec: &PatientRecord, labels: &[ScanLabel]) -> Result<(), String> {
    let n = rec.scan_times.len();
    if labels.len() != n {
        return Err(format!("{}: {} labels for {n} scans", rec.patient_id, labels.len()));
    }
    for (l, id) in labels.iter().zip(&rec.scan_ids) {
        if &l.scan_id != id || l.patient_id != rec.patient_id {
            return Err(format!("{}: order or id mismatch", rec.patient_id));
        }
        if l.right_censored == l.p || l.p != rec.is_cancer {
            return Err(format!("{}: censoring flag inconsistent", rec.patient_id));
        }
        if !l.p && (l.y || l.t_d < 1.0) {
            return Err(format!("{}: non-cancer scan has y=1 or t_d<1", rec.patient_id));
        }
    }
    let s = &rec.scan_times;
    if !rec.is_cancer {
        let min = labels.iter().map(|l| l.t_d).fold(f64::INFINITY, f64::min);
        if min != 1.0 || labels[n - 1].t_d != 1.0 {
            return Err(format!("{}: min t_d {min}", rec.patient_id));
        }
        for i in 1..n {
            if labels[i - 1].t_d - labels[i].t_d != s[i] - s[i - 1] {
                return Err(format!("{}: t_d step differs from scan gap", rec.patient_id));
            }
        }
    } else {
        let b = rec.diagnosis_time.unwrap_or(s[n - 1]);
        let latest = s.iter().rposition(|&t| t <= b);
        for (i, l) in labels.iter().enumerate() {
            let expect_y = s[i] > b || Some(i) == latest;
            if l.y != expect_y || l.t_d != b - s[i] || (l.t_d < 0.0) != (s[i] > b) {
                return Err(format!("{}: scan {i} y={} t_d={}", rec.patient_id, l.y, l.t_d));
            }
        }
    }
    Ok(())
}

fn ac4() -> Outcome {
    let mut failures = Vec::new();
    let examples: [(PatientRecord, Vec<f64>, Vec<bool>); 4] = [
        (PatientRecord::new("a", vec![0.0, 1.0, 2.0], false, None), vec![3.0, 2.0, 1.0], vec![false; 3]),
        (PatientRecord::new("b", vec![0.0, 1.5], true, Some(2.0)), vec![2.0, 0.5], vec![false, true]),
        (PatientRecord::new("c", vec![0.0, 1.0, 3.0], true, Some(2.0)), vec![2.0, 1.0, -1.0], vec![false, true, true]),
        (PatientRecord::new("d", vec![0.0, 1.0], true, None), vec![1.0, 0.0], vec![false, true]),
    ];
    for (rec, t_d, y) in &examples {
        let labels = derive_scan_labels(rec).unwrap();
        let got_t: Vec<f64> = labels.iter().map(|l| l.t_d).collect();
        let got_y: Vec<bool> = labels.iter().map(|l| l.y).collect();
        let got_p: Vec<bool> = labels.iter().map(|l| l.p).collect();
        if &got_t != t_d || &got_y != y || got_p != vec![rec.is_cancer; t_d.len()] {
            failures.push(format!("worked example {}: t_d {got_t:?} y {got_y:?}", rec.patient_id));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for i in 0..1000 {
        // Quarter-year grid keeps every difference exact.
        let n = rng.random_range(1..=8);
        let mut t = rng.random_range(0..8) as f64 / 4.0;
        let mut times = Vec::with_capacity(n);
        for _ in 0..n {
            times.push(t);
            t += rng.random_range(1..=8) as f64 / 4.0;
        }
        let is_cancer = rng.random::<bool>();
        let diagnosis = match (is_cancer, rng.random_range(0..3)) {
            (false, _) | (true, 0) => None,
            (true, 1) => Some(times[rng.random_range(0..n)]),
            (true, _) => Some(times[0] - 1.0 + rng.random_range(0..=(4 * (n as i32 + 2))) as f64 / 4.0),
        };
        let rec = PatientRecord::new(format!("R{i}"), times, is_cancer, diagnosis);
        let labels = derive_scan_labels(&rec).unwrap();
        if let Err(e) = check_label_invariants(&rec, &labels) {
            failures.push(e);
        }
        if derive_scan_labels(&rec).unwrap() != labels {
            failures.push(format!("{}: derivation not idempotent", rec.patient_id));
        }
    }
    outcome(
        failures.is_empty(),
        match failures.first() {
            None => "4 worked examples exact, 1000 random records satisfy all invariants".to_string(),
            Some(f) => format!("{} failures, first: {f}", failures.len()),
        },
    )
}

fn ac5() -> Outcome {
    let mut failures = Vec::new();
    type Example<'a> = (&'a [f64], &'a [bool], &'a [(f64, f64)]);
    let hand: [Example; 2] = [
        (&[1.0, 2.0, 3.0], &[true, true, true], &[(1.0, 2.0 / 3.0), (2.0, 1.0 / 3.0), (3.0, 0.0)]),
        (&[1.0, 2.0, 3.0], &[true, false, true], &[(1.0, 2.0 / 3.0), (3.0, 0.0)]),
    ];
    for (times, events, expected) in hand {
        let km = km_estimate(times, events).unwrap();
        let got: Vec<(f64, f64)> = km.steps.iter().map(|s| (s.time, s.survival)).collect();
        if got != expected {
            failures.push(format!("hand example {events:?}: {got:?}"));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let n = rng.random_range(1..=50);
        let tied = rng.random::<bool>();
        let times: Vec<f64> = (0..n)
            .map(|_| if tied { rng.random_range(0..8) as f64 } else { rng.random_range(0.0..10.0) })
            .collect();
        let events: Vec<bool> = (0..n).map(|_| rng.random_bool(0.6)).collect();
        let km = km_estimate(&times, &events).unwrap();
        let oracle = km_oracle(&times, &events);
        if km.steps.len() != oracle.len() {
            failures.push(format!("step count {} vs {}", km.steps.len(), oracle.len()));
            continue;
        }
        for (s, &(t, n_risk, d, c, surv)) in km.steps.iter().zip(&oracle) {
            if s.time != t || s.n_risk != n_risk || s.n_events != d || s.n_censored != c {
                failures.push(format!("risk set mismatch at t={t}"));
            }
            worst = worst.max((s.survival - surv).abs());
        }
    }
    if worst > 1e-12 {
        failures.push(format!("survival differs by {worst:e}"));
    }
    outcome(
        failures.is_empty(),
        match failures.first() {
            None => format!("2 hand examples exact, 500 random samples max diff {worst:.1e}"),
            Some(f) => format!("{} failures, first: {f}", failures.len()),
        },
    )
}

fn ac6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let n = rng.random_range(2..=200);
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
        labels[0] = true;
        labels[1] = false;
        let coarse = rng.random::<bool>();
        let scores: Vec<f64> = (0..n)
            .map(|_| if coarse { rng.random_range(0..5) as f64 / 4.0 } else { rng.random() })
            .collect();
        let auc = roc_auc(&scores, &labels).unwrap().auc;
        worst = worst.max((auc - auc_oracle(&scores, &labels)).abs());
    }
    let m = mcnemar_counts(10, 2);
    let exact = 2.0 * (0..=2).map(|k| binom(12, k)).sum::<f64>() / 4096.0;
    let pass = worst <= 1e-12
        && (m.p_value - 0.0386).abs() <= 1e-3
        && (m.p_value - exact).abs() <= 1e-12
        && m.method == McNemarMethod::ExactBinomial
        && (m.statistic - 49.0 / 12.0).abs() <= 1e-12;
    outcome(
        pass,
        format!(
            "500 AUC inputs max diff {worst:.1e}; McNemar b=10 c=2 p={:.5} (oracle {exact:.5}) statistic {:.4}",
            m.p_value, m.statistic
        ),
    )
}

fn ac7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let thresholds = [1.0, 2.0, 3.0, 4.0, 5.0];
    let mut failures = Vec::new();
    let point = |rng: &mut ChaCha8Rng| -> f64 {
        // A third of coordinates land exactly on a threshold.
        if rng.random_range(0..3) == 0 {
            rng.random_range(1..=5) as f64
        } else {
            rng.random_range(-2.0..8.0)
        }
    };
    for set in 0..100 {
        let cancer: Vec<(f64, f64)> = (0..rng.random_range(1..=150))
            .map(|_| (point(&mut rng), point(&mut rng)))
            .collect();
        let non: Vec<(f64, f64)> = (0..rng.random_range(1..=150))
            .map(|_| (point(&mut rng), point(&mut rng)))
            .collect();
        for pts in [&cancer, &non] {
            for &t in &thresholds {
                let r = region_ratios(pts, t).unwrap();
                let mut counts = [0usize; 4];
                for &(p, x) in pts.iter() {
                    let idx = match (p <= t, x <= t) {
                        (false, false) => 0,
                        (true, false) => 1,
                        (true, true) => 2,
                        (false, true) => 3,
                    };
                    counts[idx] += 1;
                }
                let sum = r.r1 + r.r2 + r.r3 + r.r4;
                if r.counts != counts || r.counts.iter().sum::<usize>() != pts.len() || (sum - 1.0).abs() > 1e-12 {
                    failures.push(format!("set {set} T={t}: counts {:?} vs {counts:?}, sum {sum}", r.counts));
                }
            }
        }
        let table = threshold_table(&cancer, &non, &thresholds).unwrap();
        for w in table.windows(2) {
            if w[1].recall < w[0].recall || w[1].noncancer_beyond > w[0].noncancer_beyond {
                failures.push(format!("set {set}: monotonicity broken at T={}", w[1].threshold));
            }
        }
        for row in &table {
            let direct = non.iter().filter(|&&(p, _)| p > row.threshold).count() as f64 / non.len() as f64;
            if row.noncancer_beyond != direct {
                failures.push(format!("set {set} T={}: beyond {} vs {direct}", row.threshold, row.noncancer_beyond));
            }
        }
    }
    outcome(
        failures.is_empty(),
        match failures.first() {
            None => "100 prediction sets: partition, boundary, monotonicity, beyond = frac(t_pred > T) exact".to_string(),
            Some(f) => format!("{} failures, first: {f}", failures.len()),
        },
    )
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn ac8() -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig::reference();
    let cohort = generate_cohort(&cfg.cohort).unwrap();
    let labels = cfpt_core::labels::derive_cohort_labels(&cohort.records).unwrap();
    let dataset = Dataset::join(labels.clone(), cohort.features.clone()).unwrap();
    let ys: Vec<bool> = dataset.labels().map(|l| l.y).collect();

    let mut aucs: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut p_values = Vec::new();
    for seed in 0..5u64 {
        let mut preds = Vec::new();
        for (name, mode) in [("single", Mode::SingleTask), ("multi", Mode::MultiTask)] {
            let mut run = cfg.clone().with_mode(mode);
            run.model.seed = seed;
            run.train.seed = seed;
            let mut mcfg = run.model.clone();
            mcfg.input_dim = dataset.dim();
            let out = run_crossval(&dataset, &mcfg, &run.effective_train().unwrap(), run.k_folds).unwrap();
            let p: Vec<_> = out.predictions.into_iter().map(|f| f.prediction).collect();
            let scores: Vec<f64> = p.iter().map(|p| p.y_hat).collect();
            aucs.entry(name).or_default().push(auc_oracle(&scores, &ys));
            preds.push(p);
        }
        let report = eval::evaluate(&preds[1], &labels, Some(&preds[0]), &cfg.eval.thresholds, cfg.eval.operating_point)
            .unwrap();
        p_values.push(report.comparison.unwrap().mcnemar.p_value);
    }
    let fmt = |v: &[f64]| v.iter().map(|a| format!("{a:.4}")).collect::<Vec<_>>().join(" ");
    let detail = format!(
        "multi [{}] single [{}]",
        fmt(&aucs["multi"]),
        fmt(&aucs["single"])
    );
    let m_multi = median(aucs.get_mut("multi").unwrap());
    let m_single = median(aucs.get_mut("single").unwrap());
    let valid_p = p_values.iter().all(|p| p.is_finite() && (0.0..=1.0).contains(p));
    let secs = start.elapsed().as_secs_f64();
    outcome(
        m_multi >= m_single - 0.005 && valid_p,
        format!(
            "median AUC multi {m_multi:.4} vs single {m_single:.4} (need >= {:.4}); {detail}; McNemar p [{}]; {secs:.0}s",
            m_single - 0.005,
            fmt(&p_values)
        ),
    )
}

fn pipeline(config: &Path, dir: &Path) {
    cli::cmd_synth(&SynthArgs {
        config: Some(config.to_path_buf()),
        out: dir.to_path_buf(),
        seed: None,
        calibrate: false,
    })
    .unwrap();
    cli::cmd_label(&LabelArgs {
        patients: dir.join("patients.csv"),
        out: dir.join("labels.csv"),
    })
    .unwrap();
    cli::cmd_crossval(&CrossvalArgs {
        config: Some(config.to_path_buf()),
        labels: Some(dir.join("labels.csv")),
        scans: Some(dir.join("scans.csv")),
        out: Some(dir.join("cv")),
        mode: None,
        seed: None,
        save_models: true,
    })
    .unwrap();
    cli::cmd_eval(&EvalArgs {
        predictions: dir.join("cv/predictions.csv"),
        predictions_b: None,
        labels: dir.join("labels.csv"),
        thresholds: eval::DEFAULT_THRESHOLDS.to_vec(),
        operating_point: 0.5,
        out: dir.join("eval"),
    })
    .unwrap();
}

fn files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn ac9() -> Outcome {
    let start = Instant::now();
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/reference.toml");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    pipeline(&config, a.path());
    pipeline(&config, b.path());
    let (fa, fb) = (files(a.path()), files(b.path()));
    let differing: Vec<_> = fa
        .keys()
        .chain(fb.keys())
        .filter(|k| fa.get(*k) != fb.get(*k))
        .map(|k| k.display().to_string())
        .collect();
    let key_files = ["cv/predictions.csv", "eval/report.json"].iter().all(|k| fa.contains_key(Path::new(k)));
    outcome(
        differing.is_empty() && key_files,
        format!(
            "{} files compared byte-for-byte, {} differ{}; {:.0}s",
            fa.len(),
            differing.len(),
            if differing.is_empty() { String::new() } else { format!(" ({})", differing.join(", ")) },
            start.elapsed().as_secs_f64()
        ),
    )
}

fn main() {
    type Criterion = (&'static str, &'static str, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        ("AC1", "CRL oracle equivalence", ac1),
        ("AC2", "gradient suite", ac2),
        ("AC3", "CRL zero sets, convexity, C1 continuity", ac3),
        ("AC4", "label derivation conformance", ac4),
        ("AC5", "Kaplan-Meier vs risk-set oracle", ac5),
        ("AC6", "AUC pairwise oracle and McNemar example", ac6),
        ("AC7", "region and threshold machinery", ac7),
        ("AC8", "multi-task AUC not below single-task", ac8),
        ("AC9", "end-to-end determinism", ac9),
    ];
    let mut unexpected = Vec::new();
    for (id, name, run) in criteria {
        let result = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let known = KNOWN_FAILING.contains(&id);
        let tag = match (result.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("{id} {tag}: {name}: {}", result.detail);
        if !result.pass && !known {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("acceptance failures: {}", unexpected.join(", "));
        std::process::exit(1);
    }
}
