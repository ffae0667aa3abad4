//! Two-stream region scoring for weakly supervised recognition.
//!
//! Each region's pooled features feed two linear streams. The recognition
//! stream is soft-maxed over classes (per region), the detection stream over
//! regions (per class), and their elementwise product gives per-region,
//! per-class scores. Image-level scores come either from summing those over
//! regions (used for training) or from the top-K rule used at inference:
//! rank regions by their best class score, keep the best K, and average.
//!
//! The same head serves species identification and individual recognition;
//! only the class list differs.

use std::path::Path;

use ndarray::{s, Array2, ArrayView2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::RegionFeatures;
use crate::rng::rng_for;

pub const HEAD_FORMAT_VERSION: u32 = 1;

/// Clamp applied to summed image scores before they enter the log loss.
pub const SUM_CLAMP_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStreamHead {
    /// `D × C` recognition weights.
    pub w_rec: Array2<f64>,
    /// `D × C` detection weights.
    pub w_det: Array2<f64>,
    pub class_names: Vec<String>,
}

impl TwoStreamHead {
    pub fn new(w_rec: Array2<f64>, w_det: Array2<f64>, class_names: Vec<String>) -> Result<Self> {
        if w_rec.dim() != w_det.dim() {
            return Err(Error::invalid(
                "recognition and detection weights differ in shape",
            ));
        }
        if w_rec.ncols() != class_names.len() {
            return Err(Error::DimensionMismatch {
                expected: class_names.len(),
                actual: w_rec.ncols(),
            });
        }
        if w_rec.iter().chain(w_det.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("head weights must be finite"));
        }
        Ok(TwoStreamHead {
            w_rec,
            w_det,
            class_names,
        })
    }

    pub fn zeros(dim: usize, class_names: Vec<String>) -> Self {
        let c = class_names.len();
        TwoStreamHead {
            w_rec: Array2::zeros((dim, c)),
            w_det: Array2::zeros((dim, c)),
            class_names,
        }
    }

    /// Glorot-uniform init, bound `sqrt(6 / (D + C))`.
    pub fn init(dim: usize, class_names: Vec<String>, seed: u64) -> Self {
        let c = class_names.len();
        let bound = (6.0 / (dim + c) as f64).sqrt();
        let draw = |tag: &str| {
            let mut rng = rng_for(seed, tag);
            Array2::from_shape_fn((dim, c), |_| rng.gen_range(-bound..=bound))
        };
        let w_rec = draw("head/rec");
        let w_det = draw("head/det");
        TwoStreamHead {
            w_rec,
            w_det,
            class_names,
        }
    }

    pub fn dim(&self) -> usize {
        self.w_rec.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn to_toml(&self) -> Result<String> {
        let file = HeadFile {
            format_version: HEAD_FORMAT_VERSION,
            dim: self.dim(),
            num_classes: self.num_classes(),
            class_names: self.class_names.clone(),
            w_rec: self.w_rec.iter().copied().collect(),
            w_det: self.w_det.iter().copied().collect(),
        };
        toml::to_string(&file).map_err(|e| Error::format(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: HeadFile = toml::from_str(text).map_err(|e| Error::format(e.to_string()))?;
        if file.format_version != HEAD_FORMAT_VERSION {
            return Err(Error::format(format!(
                "unsupported head file version {}",
                file.format_version
            )));
        }
        if file.class_names.len() != file.num_classes {
            return Err(Error::format(
                "class_names length does not match num_classes",
            ));
        }
        let shape = (file.dim, file.num_classes);
        let w_rec =
            Array2::from_shape_vec(shape, file.w_rec).map_err(|e| Error::format(e.to_string()))?;
        let w_det =
            Array2::from_shape_vec(shape, file.w_det).map_err(|e| Error::format(e.to_string()))?;
        TwoStreamHead::new(w_rec, w_det, file.class_names)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}

#[derive(Serialize, Deserialize)]
struct HeadFile {
    format_version: u32,
    dim: usize,
    num_classes: usize,
    class_names: Vec<String>,
    /// Row-major `dim × num_classes`.
    w_rec: Vec<f64>,
    w_det: Vec<f64>,
}

/// Per-region, per-class scores with both softmax factors retained.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionScoreMatrix {
    /// Row-wise softmax of the recognition stream (rows sum to 1).
    pub recognition: Array2<f64>,
    /// Column-wise softmax of the detection stream (columns sum to 1).
    pub detection: Array2<f64>,
    /// `recognition ∘ detection`, `R × C`.
    pub scores: Array2<f64>,
}

impl RegionScoreMatrix {
    pub fn num_regions(&self) -> usize {
        self.scores.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.scores.ncols()
    }
}

fn softmax_rows_in_place(a: &mut Array2<f64>) {
    for mut row in a.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

fn softmax_cols_in_place(a: &mut Array2<f64>) {
    for mut col in a.columns_mut() {
        let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        col.mapv_inplace(|v| (v - max).exp());
        let sum = col.sum();
        col /= sum;
    }
}

fn score_view(x: ArrayView2<f64>, head: &TwoStreamHead) -> RegionScoreMatrix {
    let mut recognition = x.dot(&head.w_rec);
    let mut detection = x.dot(&head.w_det);
    softmax_rows_in_place(&mut recognition);
    softmax_cols_in_place(&mut detection);
    let scores = &recognition * &detection;
    RegionScoreMatrix {
        recognition,
        detection,
        scores,
    }
}

pub fn score_regions(rf: &RegionFeatures, head: &TwoStreamHead) -> Result<RegionScoreMatrix> {
    if rf.dim() != head.dim() {
        return Err(Error::DimensionMismatch {
            expected: head.dim(),
            actual: rf.dim(),
        });
    }
    if rf.is_empty() {
        return Err(Error::invalid("cannot score an image with no regions"));
    }
    Ok(score_view(rf.matrix.view(), head))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassScores {
    pub values: Vec<f64>,
    pub class_names: Vec<String>,
}

/// Image scores as the sum over regions, clamped to `[ε, 1 − ε]`.
pub fn aggregate_sum(s: &RegionScoreMatrix, class_names: &[String]) -> ClassScores {
    let values = s
        .scores
        .sum_axis(Axis(0))
        .iter()
        .map(|v| v.clamp(SUM_CLAMP_EPS, 1.0 - SUM_CLAMP_EPS))
        .collect();
    ClassScores {
        values,
        class_names: class_names.to_vec(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregationConfig {
    pub k: usize,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        AggregationConfig { k: 30 }
    }
}

/// Indices of the `min(K, R)` regions with the largest maximum class score,
/// ties to the lower region index.
pub fn select_top_regions(s: &RegionScoreMatrix, k: usize) -> Vec<usize> {
    let maxima: Vec<f64> = s
        .scores
        .rows()
        .into_iter()
        .map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let mut idx: Vec<usize> = (0..maxima.len()).collect();
    idx.sort_by(|&a, &b| maxima[b].total_cmp(&maxima[a]).then(a.cmp(&b)));
    idx.truncate(k.min(maxima.len()));
    idx
}

/// Mean score per class over the top-K regions ranked by their best class.
pub fn aggregate_topk(
    s: &RegionScoreMatrix,
    cfg: &AggregationConfig,
    class_names: &[String],
) -> Result<ClassScores> {
    if cfg.k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    let chosen = select_top_regions(s, cfg.k);
    let mut values = vec![0.0; s.num_classes()];
    for &r in &chosen {
        for (v, &x) in values.iter_mut().zip(s.scores.row(r)) {
            *v += x;
        }
    }
    let n = chosen.len() as f64;
    values.iter_mut().for_each(|v| *v /= n);
    Ok(ClassScores {
        values,
        class_names: class_names.to_vec(),
    })
}

/// The `k` best classes by descending score, ties to the lower index.
pub fn predict_topk(cs: &ClassScores, k: usize) -> Result<Vec<usize>> {
    let c = cs.values.len();
    if k == 0 || k > c {
        return Err(Error::invalid(format!("k = {k} outside 1..={c}")));
    }
    let mut idx: Vec<usize> = (0..c).collect();
    idx.sort_by(|&a, &b| cs.values[b].total_cmp(&cs.values[a]).then(a.cmp(&b)));
    idx.truncate(k);
    Ok(idx)
}

/// Region with the highest score for `class`, ties to the lower index.
pub fn detect_region(s: &RegionScoreMatrix, class: usize) -> Result<usize> {
    if class >= s.num_classes() {
        return Err(Error::invalid(format!("class {class} out of range")));
    }
    let col = s.scores.column(class);
    let mut best = 0;
    for (r, &v) in col.iter().enumerate() {
        if v > col[best] {
            best = r;
        }
    }
    Ok(best)
}

/// Full pipeline for one image: score, aggregate with top-K, rank all classes.
pub fn rank_classes(
    rf: &RegionFeatures,
    head: &TwoStreamHead,
    cfg: &AggregationConfig,
) -> Result<Vec<usize>> {
    let s = score_regions(rf, head)?;
    let cs = aggregate_topk(&s, cfg, &head.class_names)?;
    predict_topk(&cs, head.num_classes())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadTrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub l2: f64,
}

impl Default for HeadTrainConfig {
    fn default() -> Self {
        HeadTrainConfig {
            epochs: 500,
            learning_rate: 0.5,
            seed: 0,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadFit {
    pub head: TwoStreamHead,
    /// `loss[e]` is the training loss before update `e`; the last entry is
    /// the loss of the returned head (`epochs + 1` entries).
    pub loss: Vec<f64>,
}

/// Training images stacked into one matrix with per-image row ranges.
pub struct StackedBatch {
    x: Array2<f64>,
    spans: Vec<(usize, usize)>,
    labels: Vec<usize>,
}

impl StackedBatch {
    pub fn new(dataset: &[(&RegionFeatures, usize)]) -> Result<Self> {
        let Some((first, _)) = dataset.first() else {
            return Err(Error::invalid("empty training set"));
        };
        let d = first.dim();
        let rows: usize = dataset.iter().map(|(rf, _)| rf.len()).sum();
        let mut x = Array2::zeros((rows, d));
        let mut spans = Vec::with_capacity(dataset.len());
        let mut labels = Vec::with_capacity(dataset.len());
        let mut at = 0;
        for (rf, label) in dataset {
            if rf.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: rf.dim(),
                });
            }
            if rf.is_empty() {
                return Err(Error::invalid("training image with no regions"));
            }
            x.slice_mut(s![at..at + rf.len(), ..]).assign(&rf.matrix);
            spans.push((at, at + rf.len()));
            labels.push(*label);
            at += rf.len();
        }
        Ok(StackedBatch { x, spans, labels })
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }
}

/// Mean per-image binary cross-entropy of the summed scores, plus
/// `(l2/2)(‖W_rec‖² + ‖W_det‖²)`, with its exact gradient.
pub fn loss_and_gradient(
    batch: &StackedBatch,
    head: &TwoStreamHead,
    l2: f64,
) -> Result<(f64, Array2<f64>, Array2<f64>)> {
    if batch.dim() != head.dim() {
        return Err(Error::DimensionMismatch {
            expected: head.dim(),
            actual: batch.dim(),
        });
    }
    let c = head.num_classes();
    if let Some(&bad) = batch.labels.iter().find(|&&l| l >= c) {
        return Err(Error::invalid(format!("label {bad} outside {c} classes")));
    }
    let n = batch.spans.len() as f64;
    let mut p = batch.x.dot(&head.w_rec);
    softmax_rows_in_place(&mut p);
    let b = batch.x.dot(&head.w_det);
    let mut d_a = Array2::zeros(p.dim());
    let mut d_b = Array2::zeros(p.dim());
    let mut loss = 0.0;
    for (&(lo, hi), &label) in batch.spans.iter().zip(&batch.labels) {
        let p_img = p.slice(s![lo..hi, ..]);
        let mut q = b.slice(s![lo..hi, ..]).to_owned();
        softmax_cols_in_place(&mut q);
        let sums = (&p_img * &q).sum_axis(Axis(0));
        // dL/dy_c per class, zero where the clamp is active
        let mut g = vec![0.0; c];
        for k in 0..c {
            let y = sums[k];
            let yc = y.clamp(SUM_CLAMP_EPS, 1.0 - SUM_CLAMP_EPS);
            let t = if k == label { 1.0 } else { 0.0 };
            loss -= t * yc.ln() + (1.0 - t) * (1.0 - yc).ln();
            if y > SUM_CLAMP_EPS && y < 1.0 - SUM_CLAMP_EPS {
                g[k] = (-t / yc + (1.0 - t) / (1.0 - yc)) / n;
            }
        }
        // dL/dP = g_c Q, dL/dQ = g_c P, then through the two softmaxes
        for r in 0..hi - lo {
            let mut dot_p = 0.0;
            for k in 0..c {
                dot_p += p_img[[r, k]] * g[k] * q[[r, k]];
            }
            for k in 0..c {
                d_a[[lo + r, k]] = p_img[[r, k]] * (g[k] * q[[r, k]] - dot_p);
            }
        }
        for k in 0..c {
            let dot_q: f64 = (0..hi - lo).map(|r| q[[r, k]] * g[k] * p_img[[r, k]]).sum();
            for r in 0..hi - lo {
                d_b[[lo + r, k]] = q[[r, k]] * (g[k] * p_img[[r, k]] - dot_q);
            }
        }
    }
    loss /= n;
    loss += 0.5
        * l2
        * (head.w_rec.iter().map(|v| v * v).sum::<f64>()
            + head.w_det.iter().map(|v| v * v).sum::<f64>());
    let xt = batch.x.t();
    let grad_rec = xt.dot(&d_a) + &head.w_rec * l2;
    let grad_det = xt.dot(&d_b) + &head.w_det * l2;
    Ok((loss, grad_rec, grad_det))
}

/// Full-batch gradient descent on the summed-score log loss.
pub fn train_head(
    dataset: &[(&RegionFeatures, usize)],
    class_names: Vec<String>,
    cfg: &HeadTrainConfig,
) -> Result<HeadFit> {
    let c = class_names.len();
    let mut present: Vec<usize> = dataset.iter().map(|(_, l)| *l).collect();
    present.sort_unstable();
    present.dedup();
    if present.iter().any(|&l| l >= c) {
        return Err(Error::invalid("label index outside the class list"));
    }
    if present.len() < 2 {
        return Err(Error::SingleClass);
    }
    if cfg.learning_rate.is_nan() || cfg.learning_rate <= 0.0 || cfg.l2 < 0.0 {
        return Err(Error::invalid(
            "learning rate must be positive and l2 non-negative",
        ));
    }
    let batch = StackedBatch::new(dataset)?;
    let mut head = TwoStreamHead::init(batch.dim(), class_names, cfg.seed);
    let mut losses = Vec::with_capacity(cfg.epochs + 1);
    for _ in 0..cfg.epochs {
        let (loss, g_rec, g_det) = loss_and_gradient(&batch, &head, cfg.l2)?;
        losses.push(loss);
        head.w_rec.scaled_add(-cfg.learning_rate, &g_rec);
        head.w_det.scaled_add(-cfg.learning_rate, &g_det);
    }
    losses.push(loss_and_gradient(&batch, &head, cfg.l2)?.0);
    Ok(HeadFit { head, loss: losses })
}
