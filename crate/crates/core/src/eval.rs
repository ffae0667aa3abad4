//! Confusion matrices and per-class metrics.
//!
//! Matrices are oriented rows = predicted class, columns = true class, so a
//! row sum is `TP + FP` and a column sum is `TP + FN` for the class on the
//! diagonal. Metrics whose denominator is zero are `None` ("undefined"),
//! never 0 or NaN.

use std::fmt::Write as _;
use std::io::Read;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    class_names: Vec<String>,
    /// `counts[predicted][truth]`
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(class_names: Vec<String>) -> Self {
        let c = class_names.len();
        ConfusionMatrix {
            class_names,
            counts: vec![vec![0; c]; c],
        }
    }

    pub fn from_counts(class_names: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        let c = class_names.len();
        if counts.len() != c || counts.iter().any(|r| r.len() != c) {
            return Err(Error::invalid(format!("confusion counts must be {c}x{c}")));
        }
        Ok(ConfusionMatrix {
            class_names,
            counts,
        })
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn get(&self, predicted: usize, truth: usize) -> u64 {
        self.counts[predicted][truth]
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, predicted: usize) -> u64 {
        self.counts[predicted].iter().sum()
    }

    pub fn col_sum(&self, truth: usize) -> u64 {
        self.counts.iter().map(|r| r[truth]).sum()
    }

    pub fn diagonal_sum(&self) -> u64 {
        (0..self.num_classes()).map(|c| self.counts[c][c]).sum()
    }

    pub fn class_index(&self, label: &str) -> Result<usize> {
        self.class_names
            .iter()
            .position(|n| n == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn add(&mut self, predicted: usize, truth: usize) -> Result<()> {
        let c = self.num_classes();
        if predicted >= c || truth >= c {
            return Err(Error::UnknownLabel(format!(
                "class index {} out of {c}",
                predicted.max(truth)
            )));
        }
        self.counts[predicted][truth] += 1;
        Ok(())
    }

    /// Elementwise sum; both matrices must share the class list.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if self.class_names != other.class_names {
            return Err(Error::invalid(
                "cannot merge matrices over different classes",
            ));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    /// CSV with a header row of class names, a trailing `TP+FP` column of row
    /// sums and a trailing `TP+FN` row of column sums.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("predicted\\true");
        for n in &self.class_names {
            s.push(',');
            s.push_str(n);
        }
        s.push_str(",TP+FP\n");
        for (p, row) in self.counts.iter().enumerate() {
            s.push_str(&self.class_names[p]);
            for v in row {
                let _ = write!(s, ",{v}");
            }
            let _ = writeln!(s, ",{}", self.row_sum(p));
        }
        s.push_str("TP+FN");
        for t in 0..self.num_classes() {
            let _ = write!(s, ",{}", self.col_sum(t));
        }
        s.push_str(",\n");
        s
    }

    /// Parses the layout written by [`ConfusionMatrix::to_csv`]. Marginal
    /// rows/columns, when present, must agree with the counts.
    pub fn from_csv(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| Error::format(e.to_string()))?
            .clone();
        let mut names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let has_row_margin = names.last().is_some_and(|n| n == "TP+FP");
        if has_row_margin {
            names.pop();
        }
        let c = names.len();
        let mut counts = Vec::with_capacity(c);
        let mut col_margin: Option<Vec<u64>> = None;
        for row in rdr.records() {
            let row = row.map_err(|e| Error::format(e.to_string()))?;
            let parse = |s: &str| -> Result<u64> {
                s.trim()
                    .parse()
                    .map_err(|_| Error::format(format!("bad count `{s}`")))
            };
            if &row[0] == "TP+FN" {
                col_margin = Some((1..=c).map(|i| parse(&row[i])).collect::<Result<_>>()?);
                continue;
            }
            if row.len() < c + 1 {
                return Err(Error::format(format!("row `{}` is short", &row[0])));
            }
            if row[0] != names[counts.len()] {
                return Err(Error::format(format!(
                    "row `{}` out of order, expected `{}`",
                    &row[0],
                    names[counts.len()]
                )));
            }
            let values: Vec<u64> = (1..=c).map(|i| parse(&row[i])).collect::<Result<_>>()?;
            if has_row_margin && row.len() > c + 1 {
                let margin = parse(&row[c + 1])?;
                if margin != values.iter().sum::<u64>() {
                    return Err(Error::format(format!(
                        "row `{}` TP+FP marginal mismatch",
                        &row[0]
                    )));
                }
            }
            counts.push(values);
        }
        let cm = ConfusionMatrix::from_counts(names, counts)?;
        if let Some(margin) = col_margin {
            for (t, &m) in margin.iter().enumerate() {
                if m != cm.col_sum(t) {
                    return Err(Error::format(format!(
                        "column `{}` TP+FN marginal mismatch",
                        cm.class_names[t]
                    )));
                }
            }
        }
        Ok(cm)
    }
}

/// Tallies `(predicted, true)` index pairs.
pub fn accumulate(class_names: Vec<String>, pairs: &[(usize, usize)]) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::new(class_names);
    for &(p, t) in pairs {
        cm.add(p, t)?;
    }
    Ok(cm)
}

/// Tallies `(predicted, true)` label pairs; labels outside the class list
/// are rejected.
pub fn accumulate_labels<S: AsRef<str>>(
    class_names: Vec<String>,
    pairs: &[(S, S)],
) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::new(class_names);
    for (p, t) in pairs {
        let p = cm.class_index(p.as_ref())?;
        let t = cm.class_index(t.as_ref())?;
        cm.add(p, t)?;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BinaryCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl BinaryCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn scaled(&self, k: u64) -> Self {
        BinaryCounts {
            tp: self.tp * k,
            tn: self.tn * k,
            fp: self.fp * k,
            fn_: self.fn_ * k,
        }
    }
}

impl std::ops::Add for BinaryCounts {
    type Output = BinaryCounts;

    fn add(self, o: BinaryCounts) -> BinaryCounts {
        BinaryCounts {
            tp: self.tp + o.tp,
            tn: self.tn + o.tn,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

/// One-vs-rest counts for class `c`.
pub fn binary_counts(cm: &ConfusionMatrix, c: usize) -> Result<BinaryCounts> {
    if c >= cm.num_classes() {
        return Err(Error::UnknownLabel(format!("class index {c}")));
    }
    let tp = cm.get(c, c);
    let fp = cm.row_sum(c) - tp;
    let fn_ = cm.col_sum(c) - tp;
    let tn = cm.total() - tp - fp - fn_;
    Ok(BinaryCounts { tp, tn, fp, fn_ })
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// `TP / (TP + FN)`
pub fn sensitivity(bc: &BinaryCounts) -> Option<f64> {
    ratio(bc.tp, bc.tp + bc.fn_)
}

/// `TN / (TN + FP)`
pub fn specificity(bc: &BinaryCounts) -> Option<f64> {
    ratio(bc.tn, bc.tn + bc.fp)
}

/// `TP / (TP + FP)`
pub fn precision(bc: &BinaryCounts) -> Option<f64> {
    ratio(bc.tp, bc.tp + bc.fp)
}

/// `(TP + TN) / (TP + TN + FP + FN)`
pub fn accuracy(bc: &BinaryCounts) -> Option<f64> {
    ratio(bc.tp + bc.tn, bc.total())
}

/// `FP / TP` as a percentage.
pub fn fp_rate(bc: &BinaryCounts) -> Option<f64> {
    ratio(bc.fp, bc.tp).map(|r| 100.0 * r)
}

/// `FN / TP` as a percentage.
pub fn fn_rate(bc: &BinaryCounts) -> Option<f64> {
    ratio(bc.fn_, bc.tp).map(|r| 100.0 * r)
}

/// Fraction of images whose true class is among the first `k` ranked.
pub fn topk_accuracy(rankings: &[Vec<usize>], truths: &[usize], k: usize) -> Result<f64> {
    if rankings.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            expected: truths.len(),
            actual: rankings.len(),
        });
    }
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let mut hits = 0usize;
    for (ranking, truth) in rankings.iter().zip(truths) {
        if ranking.len() < k {
            return Err(Error::invalid(format!(
                "ranking of length {} is shorter than k = {k}",
                ranking.len()
            )));
        }
        if ranking[..k].contains(truth) {
            hits += 1;
        }
    }
    if truths.is_empty() {
        return Ok(0.0);
    }
    Ok(hits as f64 / truths.len() as f64)
}

/// Per-class top-k hit rate: for each class, the fraction of its images whose
/// true class is among the first `k`. `None` for classes with no images.
pub fn per_class_topk(
    rankings: &[Vec<usize>],
    truths: &[usize],
    num_classes: usize,
    k: usize,
) -> Result<Vec<Option<f64>>> {
    let mut out = Vec::with_capacity(num_classes);
    for c in 0..num_classes {
        let (r, t): (Vec<Vec<usize>>, Vec<usize>) = rankings
            .iter()
            .zip(truths)
            .filter(|(_, &t)| t == c)
            .map(|(r, &t)| (r.clone(), t))
            .unzip();
        out.push(if t.is_empty() {
            None
        } else {
            Some(topk_accuracy(&r, &t, k)?)
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub class: String,
    /// Images whose true class is this one.
    pub support: u64,
    pub counts: BinaryCounts,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub precision: Option<f64>,
    pub accuracy: Option<f64>,
    pub fp_rate: Option<f64>,
    pub fn_rate: Option<f64>,
}

impl ClassMetrics {
    pub fn from_counts(class: impl Into<String>, counts: BinaryCounts) -> Self {
        ClassMetrics {
            class: class.into(),
            support: counts.tp + counts.fn_,
            counts,
            sensitivity: sensitivity(&counts),
            specificity: specificity(&counts),
            precision: precision(&counts),
            accuracy: accuracy(&counts),
            fp_rate: fp_rate(&counts),
            fn_rate: fn_rate(&counts),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub classes: Vec<ClassMetrics>,
}

pub const REPORT_HEADER: &str =
    "class,support,tp,tn,fp,fn,sensitivity,specificity,precision,accuracy,fp_rate_pct,fn_rate_pct";

/// Formats an optional metric for reports: fixed precision or `undefined`.
pub fn fmt_metric(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.6}"),
        None => "undefined".to_string(),
    }
}

impl MetricsReport {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Self {
        let classes = (0..cm.num_classes())
            .map(|c| {
                let bc = binary_counts(cm, c).expect("index in range");
                ClassMetrics::from_counts(cm.class_names()[c].clone(), bc)
            })
            .collect();
        MetricsReport { classes }
    }

    pub fn get(&self, class: &str) -> Option<&ClassMetrics> {
        self.classes.iter().find(|m| m.class == class)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(REPORT_HEADER);
        s.push('\n');
        for m in &self.classes {
            let c = &m.counts;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                m.class,
                m.support,
                c.tp,
                c.tn,
                c.fp,
                c.fn_,
                fmt_metric(m.sensitivity),
                fmt_metric(m.specificity),
                fmt_metric(m.precision),
                fmt_metric(m.accuracy),
                fmt_metric(m.fp_rate),
                fmt_metric(m.fn_rate),
            );
        }
        s
    }

    /// Structured-text summary: one table per class.
    pub fn to_toml(&self) -> String {
        let mut s = String::new();
        for m in &self.classes {
            let _ = writeln!(s, "[[class]]");
            let _ = writeln!(s, "name = {:?}", m.class);
            let _ = writeln!(s, "support = {}", m.support);
            let _ = writeln!(
                s,
                "tp = {}\ntn = {}\nfp = {}\nfn = {}",
                m.counts.tp, m.counts.tn, m.counts.fp, m.counts.fn_
            );
            for (key, v) in [
                ("sensitivity", m.sensitivity),
                ("specificity", m.specificity),
                ("precision", m.precision),
                ("accuracy", m.accuracy),
                ("fp_rate_pct", m.fp_rate),
                ("fn_rate_pct", m.fn_rate),
            ] {
                match v {
                    Some(x) => {
                        let _ = writeln!(s, "{key} = {x:?}");
                    }
                    None => {
                        let _ = writeln!(s, "{key} = \"undefined\"");
                    }
                }
            }
            s.push('\n');
        }
        s
    }
}
