//! Independent oracles shared by the unit-level test suites and the
//! acceptance runner. Each check returns a one-line summary on success and
//! the first disagreement on failure.

#![allow(dead_code)]

use camtrap::eval::{accumulate, ConfusionMatrix, MetricsReport};
use camtrap::features::{
    backward, default_arch, forward, forward_trace, init_convnet, ConvNetParams, Region,
    RegionFeatures,
};
use camtrap::image::RgbImage;
use camtrap::svm::{train_linear_svm, SvmTrainConfig};
use camtrap::wsddn::{
    aggregate_sum, aggregate_topk, loss_and_gradient, score_regions, AggregationConfig,
    RegionScoreMatrix, StackedBatch, TwoStreamHead, SUM_CLAMP_EPS,
};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

// ---- printed confusion matrix ------------------------------------------

pub const CONFUSION_FIXTURE: &str = include_str!("../fixtures/printed_confusion.csv");
const CONFUSION_EXPECTED: &str = include_str!("../fixtures/printed_expected.csv");

fn fraction(s: &str) -> f64 {
    let (n, d) = s.split_once('/').expect("fraction a/b");
    n.parse::<f64>().unwrap() / d.parse::<f64>().unwrap()
}

fn close(a: Option<f64>, b: f64) -> bool {
    a.is_some_and(|a| (a - b).abs() <= 1e-12)
}

/// Every per-class count and metric of the printed 11-class matrix against
/// hand-computed exact fractions.
pub fn printed_confusion_matrix() -> Check {
    let cm = ConfusionMatrix::from_csv(CONFUSION_FIXTURE.as_bytes()).map_err(|e| e.to_string())?;
    ensure!(cm.num_classes() == 11, "{} classes", cm.num_classes());
    let report = MetricsReport::from_confusion(&cm);
    let mut checked = 0;
    for line in CONFUSION_EXPECTED.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let class = f[0];
        let m = report
            .get(class)
            .ok_or_else(|| format!("no class {class}"))?;
        let c = m.counts;
        let counts: [u64; 4] = [f[1], f[2], f[3], f[4]].map(|v| v.parse().unwrap());
        ensure!([c.tp, c.fp, c.fn_, c.tn] == counts, "{class} counts");
        let metrics = [
            ("precision", m.precision),
            ("sensitivity", m.sensitivity),
            ("specificity", m.specificity),
            ("accuracy", m.accuracy),
            ("fp rate", m.fp_rate),
            ("fn rate", m.fn_rate),
        ];
        for ((name, got), exact) in metrics.into_iter().zip(&f[5..11]) {
            ensure!(
                close(got, fraction(exact)),
                "{class} {name}: {got:?} vs {exact}"
            );
        }
        checked += 1;
    }
    ensure!(checked == 11, "{checked} expected rows");
    Ok(format!("{checked} classes, 66 metrics exact to 1e-12"))
}

// ---- metrics against a loop ----------------------------------------------

/// `(tp, tn, fp, fn)` for class `c` by scanning every pair.
pub fn brute_counts(pairs: &[(usize, usize)], c: usize) -> (u64, u64, u64, u64) {
    let mut k = (0, 0, 0, 0);
    for &(p, t) in pairs {
        match (p == c, t == c) {
            (true, true) => k.0 += 1,
            (false, false) => k.1 += 1,
            (true, false) => k.2 += 1,
            (false, true) => k.3 += 1,
        }
    }
    k
}

fn ratio(n: u64, d: u64) -> Option<f64> {
    if d == 0 {
        None
    } else {
        Some(n as f64 / d as f64)
    }
}

/// Random prediction/truth lists (up to 6 classes, up to 200 items):
/// accumulation and every metric equal a brute-force loop exactly.
pub fn metric_lists(seed: u64, cases: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let c = rng.gen_range(1..=6);
        let n = rng.gen_range(0..=200);
        let pairs: Vec<(usize, usize)> = (0..n)
            .map(|_| (rng.gen_range(0..c), rng.gen_range(0..c)))
            .collect();
        let names: Vec<String> = (0..c).map(|i| format!("c{i}")).collect();
        let cm = accumulate(names, &pairs).map_err(|e| e.to_string())?;
        for (p, row) in cm.counts().iter().enumerate() {
            for (t, &v) in row.iter().enumerate() {
                ensure!(
                    v == pairs.iter().filter(|&&x| x == (p, t)).count() as u64,
                    "case {case} cell ({p},{t})"
                );
            }
        }
        let report = MetricsReport::from_confusion(&cm);
        for k in 0..c {
            let (tp, tn, fp, fn_) = brute_counts(&pairs, k);
            let m = &report.classes[k];
            ensure!(
                (m.counts.tp, m.counts.tn, m.counts.fp, m.counts.fn_) == (tp, tn, fp, fn_),
                "case {case} class {k} counts"
            );
            ensure!(
                m.sensitivity == ratio(tp, tp + fn_),
                "case {case} class {k} sensitivity"
            );
            ensure!(
                m.specificity == ratio(tn, tn + fp),
                "case {case} class {k} specificity"
            );
            ensure!(
                m.precision == ratio(tp, tp + fp),
                "case {case} class {k} precision"
            );
            ensure!(
                m.accuracy == ratio(tp + tn, tp + tn + fp + fn_),
                "case {case} class {k} accuracy"
            );
            ensure!(
                m.fp_rate == ratio(fp, tp).map(|r| 100.0 * r),
                "case {case} class {k} fp rate"
            );
            ensure!(
                m.fn_rate == ratio(fn_, tp).map(|r| 100.0 * r),
                "case {case} class {k} fn rate"
            );
        }
    }
    Ok(format!(
        "{cases} random lists match the loop oracle exactly"
    ))
}

// ---- region scoring and aggregation --------------------------------------

pub fn names(c: usize) -> Vec<String> {
    (0..c).map(|i| format!("class_{i}")).collect()
}

pub fn random_features(r: usize, d: usize, rng: &mut ChaCha8Rng) -> RegionFeatures {
    RegionFeatures {
        regions: (0..r)
            .map(|i| Region {
                x0: i,
                y0: 0,
                x1: i + 1,
                y1: 1,
            })
            .collect(),
        matrix: Array2::from_shape_fn((r, d), |_| rng.gen_range(-1.0..1.0)),
    }
}

pub fn random_head(d: usize, c: usize, scale: f64, rng: &mut ChaCha8Rng) -> TwoStreamHead {
    let mut draw = || Array2::from_shape_fn((d, c), |_| rng.gen_range(-scale..scale));
    let w_rec = draw();
    let w_det = draw();
    TwoStreamHead::new(w_rec, w_det, names(c)).unwrap()
}

/// Scores by explicit loops: row softmax of `X W_rec`, column softmax of
/// `X W_det`, elementwise product.
pub fn oracle_scores(x: &Array2<f64>, head: &TwoStreamHead) -> Vec<Vec<f64>> {
    let (r, d) = x.dim();
    let c = head.num_classes();
    let logit =
        |w: &Array2<f64>, i: usize, k: usize| (0..d).map(|j| x[[i, j]] * w[[j, k]]).sum::<f64>();
    let mut out = vec![vec![0.0; c]; r];
    for (i, row) in out.iter_mut().enumerate() {
        let rec: Vec<f64> = (0..c).map(|k| logit(&head.w_rec, i, k).exp()).collect();
        let rec_sum: f64 = rec.iter().sum();
        for k in 0..c {
            let det_sum: f64 = (0..r).map(|q| logit(&head.w_det, q, k).exp()).sum();
            row[k] = rec[k] / rec_sum * logit(&head.w_det, i, k).exp() / det_sum;
        }
    }
    out
}

/// Random heads and features: recognition rows and detection columns sum to
/// one and every score lies in (0, 1].
pub fn softmax_structure(seed: u64, cases: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let (r, c, d) = (
            rng.gen_range(1..=12),
            rng.gen_range(1..=6),
            rng.gen_range(1..=8),
        );
        let rf = random_features(r, d, &mut rng);
        let head = random_head(d, c, 3.0, &mut rng);
        let s = score_regions(&rf, &head).map_err(|e| e.to_string())?;
        for row in s.recognition.rows() {
            worst = worst.max((row.sum() - 1.0).abs());
        }
        for col in s.detection.columns() {
            worst = worst.max((col.sum() - 1.0).abs());
        }
        ensure!(worst <= 1e-9, "case {case}: softmax sum off by {worst:e}");
        ensure!(
            s.scores.iter().all(|&v| v > 0.0 && v <= 1.0),
            "case {case}: score outside (0, 1]"
        );
    }
    Ok(format!("{cases} random heads, worst sum error {worst:.1e}"))
}

pub fn random_score_matrix(r: usize, c: usize, rng: &mut ChaCha8Rng) -> RegionScoreMatrix {
    let scores = Array2::from_shape_fn((r, c), |_| rng.gen_range(1e-6..1.0));
    RegionScoreMatrix {
        recognition: scores.clone(),
        detection: Array2::ones((r, c)),
        scores,
    }
}

/// Top-K average where row `i` is kept iff fewer than `K` rows beat it
/// (higher maximum, or equal maximum and lower index).
pub fn oracle_topk(scores: &Array2<f64>, k: usize) -> Vec<f64> {
    let (r, c) = scores.dim();
    let maxima: Vec<f64> = (0..r)
        .map(|i| {
            (0..c)
                .map(|j| scores[[i, j]])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let kept: Vec<usize> = (0..r)
        .filter(|&i| {
            let beaten_by = (0..r)
                .filter(|&q| maxima[q] > maxima[i] || (maxima[q] == maxima[i] && q < i))
                .count();
            beaten_by < k
        })
        .collect();
    (0..c)
        .map(|j| kept.iter().map(|&i| scores[[i, j]]).sum::<f64>() / kept.len() as f64)
        .collect()
}

pub fn oracle_sum(scores: &Array2<f64>) -> Vec<f64> {
    let (r, c) = scores.dim();
    (0..c)
        .map(|j| {
            let mut total = 0.0;
            for i in 0..r {
                total += scores[[i, j]];
            }
            total.clamp(SUM_CLAMP_EPS, 1.0 - SUM_CLAMP_EPS)
        })
        .collect()
}

/// Random score matrices (R ≤ 12, C ≤ 6, K ≤ 12): both aggregations equal
/// their oracles and top-K is unchanged by shuffling rows.
pub fn aggregation(seed: u64, cases: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let (r, c, k) = (
            rng.gen_range(1..=12),
            rng.gen_range(1..=6),
            rng.gen_range(1..=12),
        );
        let s = random_score_matrix(r, c, &mut rng);
        let cfg = AggregationConfig { k };
        let topk = aggregate_topk(&s, &cfg, &names(c)).map_err(|e| e.to_string())?;
        for (a, b) in topk.values.iter().zip(oracle_topk(&s.scores, k)) {
            ensure!(
                (a - b).abs() <= 1e-12,
                "case {case}: top-{k} {a} vs oracle {b}"
            );
        }
        let sum = aggregate_sum(&s, &names(c));
        for (a, b) in sum.values.iter().zip(oracle_sum(&s.scores)) {
            ensure!((a - b).abs() <= 1e-12, "case {case}: sum {a} vs oracle {b}");
        }
        let mut order: Vec<usize> = (0..r).collect();
        order.shuffle(&mut rng);
        let permuted = Array2::from_shape_fn((r, c), |(i, j)| s.scores[[order[i], j]]);
        let p = RegionScoreMatrix {
            recognition: permuted.clone(),
            detection: Array2::ones((r, c)),
            scores: permuted,
        };
        // uniform draws make equal row maxima a measure-zero event
        let shuffled = aggregate_topk(&p, &cfg, &names(c)).map_err(|e| e.to_string())?;
        ensure!(
            shuffled.values == topk.values,
            "case {case}: top-{k} changed under row permutation"
        );
    }
    Ok(format!(
        "{cases} random matrices match both oracles; top-K row-permutation invariant"
    ))
}

// ---- gradients -----------------------------------------------------------

/// Relative error with a floor so that near-zero gradients are compared
/// absolutely.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

const FD_STEP: f64 = 1e-6;
const GRADIENT_TOLERANCE: f64 = 1e-4;

/// Head loss gradient against central differences on every weight of
/// `instances` random small problems; the first is the 2-image, 3-region,
/// 2-class case.
pub fn head_gradients(seed: u64, instances: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for instance in 0..instances {
        let (n, r, c, d) = if instance == 0 {
            (2, 3, 2, 4)
        } else {
            (
                rng.gen_range(1..=3),
                rng.gen_range(1..=4),
                rng.gen_range(2..=4),
                rng.gen_range(2..=5),
            )
        };
        let images: Vec<RegionFeatures> = (0..n).map(|_| random_features(r, d, &mut rng)).collect();
        let data: Vec<(&RegionFeatures, usize)> =
            images.iter().map(|rf| (rf, rng.gen_range(0..c))).collect();
        let batch = StackedBatch::new(&data).map_err(|e| e.to_string())?;
        let head = random_head(d, c, 0.5, &mut rng);
        let l2 = 1e-2;
        let (_, g_rec, g_det) = loss_and_gradient(&batch, &head, l2).map_err(|e| e.to_string())?;
        for stream in 0..2 {
            for j in 0..d {
                for k in 0..c {
                    let loss_at = |delta: f64| {
                        let mut hd = head.clone();
                        let w = if stream == 0 {
                            &mut hd.w_rec
                        } else {
                            &mut hd.w_det
                        };
                        w[[j, k]] += delta;
                        loss_and_gradient(&batch, &hd, l2).unwrap().0
                    };
                    let numeric = (loss_at(FD_STEP) - loss_at(-FD_STEP)) / (2.0 * FD_STEP);
                    let analytic = if stream == 0 {
                        g_rec[[j, k]]
                    } else {
                        g_det[[j, k]]
                    };
                    let err = relative_error(analytic, numeric);
                    worst = worst.max(err);
                    checked += 1;
                    ensure!(
                        err <= GRADIENT_TOLERANCE,
                        "instance {instance} stream {stream} ({j},{k}): analytic {analytic} numeric {numeric}"
                    );
                }
            }
        }
    }
    Ok(format!(
        "{instances} instances, {checked} weights, worst relative error {worst:.1e}"
    ))
}

pub fn random_image(w: usize, h: usize, rng: &mut ChaCha8Rng) -> RgbImage {
    let data = (0..w * h * 3).map(|_| rng.gen_range(0.0..1.0)).collect();
    RgbImage::from_vec(w, h, data).unwrap()
}

/// Random network with nonzero biases so the bias gradient is exercised.
fn random_net(seed: u64, rng: &mut ChaCha8Rng) -> ConvNetParams {
    let mut params = init_convnet(&default_arch(), seed).unwrap();
    for layer in &mut params.layers {
        for b in &mut layer.bias {
            *b = rng.gen_range(-0.1..0.1);
        }
    }
    params
}

/// `Σ g · forward(image)` for a fixed probe vector `g`.
fn probe_loss(image: &RgbImage, params: &ConvNetParams, g: &[f64]) -> f64 {
    let out = forward(image, params).unwrap();
    out.data.iter().zip(g).map(|(a, b)| a * b).sum()
}

/// Conv backprop against central differences on `instances` random 6×6
/// images: every input entry, every bias and every 7th weight.
pub fn conv_gradients(seed: u64, instances: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for instance in 0..instances as u64 {
        let image = random_image(6, 6, &mut rng);
        let params = random_net(instance, &mut rng);
        let trace = forward_trace(&image, &params).map_err(|e| e.to_string())?;
        let g: Vec<f64> = (0..trace.output.data.len())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let grads = backward(&trace, &params, &g).map_err(|e| e.to_string())?;

        let mut check = |analytic: f64, numeric: f64, what: String| {
            let err = relative_error(analytic, numeric);
            worst = worst.max(err);
            checked += 1;
            if err <= GRADIENT_TOLERANCE {
                Ok(())
            } else {
                Err(format!(
                    "instance {instance} {what}: analytic {analytic} numeric {numeric}"
                ))
            }
        };
        let central = |f: &dyn Fn(f64) -> f64| (f(FD_STEP) - f(-FD_STEP)) / (2.0 * FD_STEP);

        for i in 0..image.data().len() {
            let at = |delta: f64| {
                let mut im = image.clone();
                im.data_mut()[i] += delta;
                probe_loss(&im, &params, &g)
            };
            check(grads.input[i], central(&at), format!("input {i}"))?;
        }
        for (k, layer) in params.layers.iter().enumerate() {
            // a strided subset of weights keeps the check fast; every bias is checked
            for wi in (0..layer.weights.len()).step_by(7) {
                let at = |delta: f64| {
                    let mut p = params.clone();
                    p.layers[k].weights[wi] += delta;
                    probe_loss(&image, &p, &g)
                };
                check(
                    grads.weights[k][wi],
                    central(&at),
                    format!("layer {k} weight {wi}"),
                )?;
            }
            for bi in 0..layer.bias.len() {
                let at = |delta: f64| {
                    let mut p = params.clone();
                    p.layers[k].bias[bi] += delta;
                    probe_loss(&image, &p, &g)
                };
                check(
                    grads.bias[k][bi],
                    central(&at),
                    format!("layer {k} bias {bi}"),
                )?;
            }
        }
    }
    Ok(format!(
        "{instances} instances, {checked} entries, worst relative error {worst:.1e}"
    ))
}

// ---- linear SVM ----------------------------------------------------------

const GRID_BOUND: f64 = 5.0;
const GRID_STEP: f64 = 0.01;
pub const ORACLE_LAMBDA: f64 = 0.1;
const SEPARATING_LAMBDA: f64 = 1e-3;

/// Minimum of `(λ/2)‖w‖² + mean hinge` over `w` on the lattice
/// `[-5, 5]²` with step 0.01. For each lattice `w` the bias is optimized
/// exactly: the mean hinge is convex and piecewise linear in `b`, so its
/// minimum lies at a breakpoint `b = y_i − w·x_i`.
pub fn grid_optimum(points: &[[f64; 2]], labels: &[f64], lambda: f64) -> f64 {
    let steps = (2.0 * GRID_BOUND / GRID_STEP).round() as i64;
    let n = points.len() as f64;
    let mut best = f64::INFINITY;
    for i in 0..=steps {
        let w0 = -GRID_BOUND + i as f64 * GRID_STEP;
        for j in 0..=steps {
            let w1 = -GRID_BOUND + j as f64 * GRID_STEP;
            let reg = 0.5 * lambda * (w0 * w0 + w1 * w1);
            if reg >= best {
                continue;
            }
            let scores: Vec<f64> = points.iter().map(|p| w0 * p[0] + w1 * p[1]).collect();
            for (s_k, y_k) in scores.iter().zip(labels) {
                let b = y_k - s_k;
                let hinge: f64 = scores
                    .iter()
                    .zip(labels)
                    .map(|(s, y)| (1.0 - y * (s + b)).max(0.0))
                    .sum();
                best = best.min(reg + hinge / n);
            }
        }
    }
    best
}

/// A random linearly separable 2-D set with 4–8 points in `[-1, 1]²` and
/// geometric margin at least 0.15 around a random unit-normal hyperplane.
pub fn separable_set(rng: &mut ChaCha8Rng) -> (Vec<[f64; 2]>, Vec<f64>) {
    loop {
        let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let normal = [angle.cos(), angle.sin()];
        let offset: f64 = rng.gen_range(-0.3..0.3);
        let n = rng.gen_range(4..=8);
        let mut points = Vec::new();
        let mut labels = Vec::new();
        while points.len() < n {
            let p = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let d = normal[0] * p[0] + normal[1] * p[1] + offset;
            if d.abs() >= 0.15 {
                points.push(p);
                labels.push(d.signum());
            }
        }
        if labels.iter().any(|&y| y > 0.0) && labels.iter().any(|&y| y < 0.0) {
            return (points, labels);
        }
    }
}

pub fn rows(points: &[[f64; 2]]) -> Vec<Vec<f64>> {
    points.iter().map(|p| p.to_vec()).collect()
}

pub fn oracle_config(seed: u64) -> SvmTrainConfig {
    SvmTrainConfig {
        epochs: 5000,
        lambda: ORACLE_LAMBDA,
        seed,
    }
}

/// Random separable sets: the final objective is within 5% of the grid
/// optimum and every training point is classified correctly.
pub fn svm_optimality(seed: u64, sets: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for case in 0..sets {
        let (points, labels) = separable_set(&mut rng);
        let fit = train_linear_svm(&rows(&points), &labels, &oracle_config(case as u64))
            .map_err(|e| e.to_string())?;
        let trained = *fit.objective.last().unwrap();
        let optimum = grid_optimum(&points, &labels, ORACLE_LAMBDA);
        worst = worst.max(trained / optimum);
        ensure!(
            trained <= 1.05 * optimum,
            "set {case}: trained {trained} vs grid optimum {optimum}"
        );
        // The λ = 0.1 optimum may trade a point for a smaller norm; with
        // λ = 1e-3 and margin 0.15 any misclassification costs more than the
        // separating solution's penalty, so that fit must separate the set.
        let separating = SvmTrainConfig {
            lambda: SEPARATING_LAMBDA,
            ..oracle_config(case as u64)
        };
        let accuracy = train_linear_svm(&rows(&points), &labels, &separating)
            .map_err(|e| e.to_string())?
            .model
            .accuracy(&rows(&points), &labels)
            .map_err(|e| e.to_string())?;
        ensure!(accuracy == 1.0, "set {case}: training accuracy {accuracy}");
    }
    Ok(format!(
        "{sets} separable sets, worst objective ratio {worst:.4}, all at accuracy 1.0"
    ))
}

pub const XOR_POINTS: [[f64; 2]; 4] = [[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]];
pub const XOR_LABELS: [f64; 4] = [1.0, 1.0, -1.0, -1.0];

/// Best accuracy any linear rule `sign(w·x + b)` (margin 0 → +1) achieves
/// on `points`, by enumerating every distinct labelling a line can induce.
pub fn best_linear_accuracy(points: &[[f64; 2]], labels: &[f64]) -> f64 {
    let mut best = 0.0f64;
    for k in 0..3600 {
        let a = k as f64 * std::f64::consts::TAU / 3600.0;
        let w = [a.cos(), a.sin()];
        let mut projections: Vec<f64> = points.iter().map(|p| w[0] * p[0] + w[1] * p[1]).collect();
        projections.sort_by(f64::total_cmp);
        let mut thresholds = vec![
            projections[0] - 1.0,
            projections[projections.len() - 1] + 1.0,
        ];
        thresholds.extend(projections.windows(2).map(|p| 0.5 * (p[0] + p[1])));
        for t in thresholds {
            let correct = points
                .iter()
                .zip(labels)
                .filter(|(p, &y)| {
                    let pred = if w[0] * p[0] + w[1] * p[1] - t >= 0.0 {
                        1.0
                    } else {
                        -1.0
                    };
                    pred == y
                })
                .count();
            best = best.max(correct as f64 / points.len() as f64);
        }
    }
    best
}

/// XOR: no line does better than 3 of 4, and neither does training.
pub fn svm_xor(seeds: u64) -> Check {
    let best = best_linear_accuracy(&XOR_POINTS, &XOR_LABELS);
    ensure!(best == 0.75, "enumeration finds {best}");
    for seed in 0..seeds {
        let cfg = SvmTrainConfig {
            epochs: 200,
            lambda: 1e-2,
            seed,
        };
        let fit =
            train_linear_svm(&rows(&XOR_POINTS), &XOR_LABELS, &cfg).map_err(|e| e.to_string())?;
        let accuracy = fit
            .model
            .accuracy(&rows(&XOR_POINTS), &XOR_LABELS)
            .map_err(|e| e.to_string())?;
        ensure!(
            accuracy <= 0.75,
            "seed {seed}: XOR training accuracy {accuracy}"
        );
    }
    Ok(format!("XOR capped at 0.75 over {seeds} seeds"))
}
