//! Animal-detection protocols: volume, proportion and split sweeps and the
//! illumination study.

use rayon::prelude::*;

use crate::corpus::{
    balance_classes, filter_manifest, stratified_split, subsample_fraction, ClassKey, Illumination,
    Manifest, Predicate, StratifyBy,
};
use crate::error::{Error, Result};
use crate::eval::{accumulate, binary_counts, fmt_metric, ClassMetrics};
use crate::rng::derive_seed;
use crate::svm::{train_linear_svm, LinearModel};

use super::config::{DetectorConfig, ExperimentConfig, Protocol};
use super::report::{metric_columns, summarize, Summary, Table};
use super::workspace::Workspace;

pub const DETECTION_CLASSES: [&str; 2] = ["animal", "unclassified"];

/// Outcome of training the detector on one set and testing on another.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionOutcome {
    pub train_images: usize,
    pub test_images: usize,
    pub train_accuracy: f64,
    /// Test metrics with `animal` as the positive class.
    pub test: ClassMetrics,
}

fn presence_label(ws: &Workspace, i: usize) -> f64 {
    if ws.record(i).species.is_animal() {
        1.0
    } else {
        -1.0
    }
}

/// Trains the image-level animal detector on `train` (dataset positions).
pub fn train_detector(
    ws: &Workspace,
    train: &[usize],
    cfg: &DetectorConfig,
    seed: u64,
) -> Result<LinearModel> {
    let x: Vec<Vec<f64>> = train.iter().map(|&i| ws.image_feature(i)).collect();
    let y: Vec<f64> = train.iter().map(|&i| presence_label(ws, i)).collect();
    Ok(train_linear_svm(&x, &y, &cfg.with_seed(derive_seed(seed, "detector")))?.model)
}

pub fn evaluate_detector(
    ws: &Workspace,
    model: &LinearModel,
    images: &[usize],
) -> Result<ClassMetrics> {
    let pairs = images
        .iter()
        .map(|&i| {
            let predicted = usize::from(model.predict_label(&ws.image_feature(i))? < 0);
            let truth = usize::from(presence_label(ws, i) < 0.0);
            Ok((predicted, truth))
        })
        .collect::<Result<Vec<_>>>()?;
    let names = DETECTION_CLASSES.iter().map(|s| s.to_string()).collect();
    let cm = accumulate(names, &pairs)?;
    Ok(ClassMetrics::from_counts(
        DETECTION_CLASSES[0],
        binary_counts(&cm, 0)?,
    ))
}

pub fn detection_trial(
    ws: &Workspace,
    train: &Manifest,
    test: &Manifest,
    cfg: &DetectorConfig,
    seed: u64,
) -> Result<DetectionOutcome> {
    let tr = ws.positions(train)?;
    let te = ws.positions(test)?;
    let model = train_detector(ws, &tr, cfg, seed)?;
    let train_metrics = evaluate_detector(ws, &model, &tr)?;
    Ok(DetectionOutcome {
        train_images: tr.len(),
        test_images: te.len(),
        train_accuracy: train_metrics.accuracy.unwrap_or(0.0),
        test: evaluate_detector(ws, &model, &te)?,
    })
}

/// The plain path: presence-stratified split of `m`, then train and test.
pub fn split_and_detect(
    ws: &Workspace,
    m: &Manifest,
    train_fraction: f64,
    cfg: &DetectorConfig,
    seed: u64,
) -> Result<DetectionOutcome> {
    let split = stratified_split(m, train_fraction, seed, StratifyBy::Presence)?;
    detection_trial(
        ws,
        &m.select(&split.train),
        &m.select(&split.validation),
        cfg,
        seed,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTrial {
    pub point: f64,
    pub seed: u64,
    pub outcome: DetectionOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub protocol: Protocol,
    pub points: Vec<f64>,
    /// Point-major, seed-minor.
    pub trials: Vec<SweepTrial>,
}

type MetricFn = fn(&DetectionOutcome) -> Option<f64>;

const SWEEP_METRICS: [(&str, MetricFn); 5] = [
    ("accuracy", |o| o.test.accuracy),
    ("sensitivity", |o| o.test.sensitivity),
    ("specificity", |o| o.test.specificity),
    ("precision", |o| o.test.precision),
    ("train_accuracy", |o| Some(o.train_accuracy)),
];

impl SweepReport {
    pub fn parameter(&self) -> &'static str {
        match self.protocol {
            Protocol::Volume => "fraction",
            Protocol::Proportion => "proportion",
            _ => "train_ratio",
        }
    }

    pub fn trials_at(&self, point: usize) -> impl Iterator<Item = &SweepTrial> {
        let p = self.points[point];
        self.trials.iter().filter(move |t| t.point == p)
    }

    pub fn summary(&self, point: usize, metric: &str) -> Summary {
        let (_, f) = SWEEP_METRICS
            .iter()
            .find(|(name, _)| *name == metric)
            .expect("known metric name");
        summarize(self.trials_at(point).map(|t| f(&t.outcome)))
    }

    pub fn mean_accuracy(&self, point: usize) -> Option<f64> {
        self.summary(point, "accuracy").mean
    }

    /// Point with the highest mean test accuracy; ties go to the first.
    pub fn best_point(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.points.len() {
            if let Some(a) = self.mean_accuracy(i) {
                if best.is_none_or(|(_, b)| a > b) {
                    best = Some((i, a));
                }
            }
        }
        best.map(|(i, _)| i)
    }

    pub fn tables(&self) -> Vec<Table> {
        let param = self.parameter();
        let mut trials = Table::new(
            "trials",
            &[
                param,
                "seed",
                "train_images",
                "test_images",
                "tp",
                "tn",
                "fp",
                "fn",
                "accuracy",
                "sensitivity",
                "specificity",
                "precision",
                "train_accuracy",
            ],
        );
        for t in &self.trials {
            let o = &t.outcome;
            let c = o.test.counts;
            trials.push(vec![
                t.point.to_string(),
                t.seed.to_string(),
                o.train_images.to_string(),
                o.test_images.to_string(),
                c.tp.to_string(),
                c.tn.to_string(),
                c.fp.to_string(),
                c.fn_.to_string(),
                fmt_metric(o.test.accuracy),
                fmt_metric(o.test.sensitivity),
                fmt_metric(o.test.specificity),
                fmt_metric(o.test.precision),
                fmt_metric(Some(o.train_accuracy)),
            ]);
        }
        let mut columns: Vec<String> = vec![param.to_string(), "trials".to_string()];
        for (name, _) in SWEEP_METRICS {
            columns.extend(metric_columns(name));
        }
        columns.push("best".to_string());
        let col_refs: Vec<&str> = columns.iter().map(String::as_str).collect();
        let mut summary = Table::new("summary", &col_refs);
        let best = if self.protocol == Protocol::Split {
            self.best_point()
        } else {
            None
        };
        for (i, p) in self.points.iter().enumerate() {
            let mut row = vec![p.to_string(), self.trials_at(i).count().to_string()];
            for (name, _) in SWEEP_METRICS {
                row.extend(self.summary(i, name).cells());
            }
            row.push((best == Some(i)).to_string());
            summary.push(row);
        }
        vec![trials, summary]
    }
}

fn run_sweep(
    cfg: &ExperimentConfig,
    points: &[f64],
    trial: impl Fn(f64, u64) -> Result<DetectionOutcome> + Sync,
) -> Result<SweepReport> {
    let plan: Vec<(f64, u64)> = points
        .iter()
        .flat_map(|&p| cfg.trial_seeds().into_iter().map(move |s| (p, s)))
        .collect();
    let trials = plan
        .par_iter()
        .map(|&(point, seed)| {
            Ok(SweepTrial {
                point,
                seed,
                outcome: trial(point, seed)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport {
        protocol: cfg.protocol,
        points: points.to_vec(),
        trials,
    })
}

/// Subsample the corpus, split 70:30 (by default), train, test.
pub fn run_volume_sweep(ws: &Workspace, cfg: &ExperimentConfig) -> Result<SweepReport> {
    run_sweep(cfg, &cfg.fractions, |fraction, seed| {
        let sub = subsample_fraction(ws.manifest(), fraction, seed, StratifyBy::Presence)?;
        split_and_detect(ws, &sub, cfg.train_fraction, &cfg.detector, seed)
    })
}

/// Fixed test set per seed; the training pool is subsampled.
pub fn run_proportion_sweep(ws: &Workspace, cfg: &ExperimentConfig) -> Result<SweepReport> {
    run_sweep(cfg, &cfg.proportions, |proportion, seed| {
        let m = ws.manifest();
        let split = stratified_split(m, cfg.train_fraction, seed, StratifyBy::Presence)?;
        let pool = m.select(&split.train);
        let train = subsample_fraction(&pool, proportion, seed, StratifyBy::Presence)?;
        detection_trial(
            ws,
            &train,
            &m.select(&split.validation),
            &cfg.detector,
            seed,
        )
    })
}

pub fn run_split_sweep(ws: &Workspace, cfg: &ExperimentConfig) -> Result<SweepReport> {
    run_sweep(cfg, &cfg.split_ratios, |ratio, seed| {
        split_and_detect(ws, ws.manifest(), ratio, &cfg.detector, seed)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    Daylight,
    Night,
    Mixed,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Daylight, Condition::Night, Condition::Mixed];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Daylight => "daylight",
            Condition::Night => "night",
            Condition::Mixed => "mixed",
        }
    }

    fn predicate(self) -> Predicate {
        match self {
            Condition::Daylight => Predicate::Illumination(Illumination::Day),
            Condition::Night => Predicate::Illumination(Illumination::Night),
            Condition::Mixed => Predicate::All,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConditionResult {
    /// The condition has no positives or no negatives, or too few to split.
    Skipped(String),
    Ran {
        /// Size of the balanced set.
        num_images: usize,
        trials: Vec<(u64, DetectionOutcome)>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IlluminationReport {
    pub conditions: Vec<(Condition, ConditionResult)>,
}

impl IlluminationReport {
    pub fn get(&self, c: Condition) -> &ConditionResult {
        &self
            .conditions
            .iter()
            .find(|(k, _)| *k == c)
            .expect("all conditions present")
            .1
    }

    pub fn mean_test_accuracy(&self, c: Condition) -> Option<f64> {
        match self.get(c) {
            ConditionResult::Skipped(_) => None,
            ConditionResult::Ran { trials, .. } => {
                summarize(trials.iter().map(|(_, o)| o.test.accuracy)).mean
            }
        }
    }

    pub fn mean_train_accuracy(&self, c: Condition) -> Option<f64> {
        match self.get(c) {
            ConditionResult::Skipped(_) => None,
            ConditionResult::Ran { trials, .. } => {
                summarize(trials.iter().map(|(_, o)| Some(o.train_accuracy))).mean
            }
        }
    }

    pub fn tables(&self) -> Vec<Table> {
        let mut summary = Table::new(
            "illumination",
            &[
                "condition",
                "num_images",
                "training_accuracy",
                "test_accuracy",
            ],
        );
        let mut trials = Table::new(
            "trials",
            &[
                "condition",
                "seed",
                "num_images",
                "training_accuracy",
                "test_accuracy",
                "sensitivity",
                "specificity",
            ],
        );
        for (c, r) in &self.conditions {
            match r {
                ConditionResult::Skipped(_) => {
                    summary.push(vec![
                        c.as_str().into(),
                        "0".into(),
                        "skipped".into(),
                        "skipped".into(),
                    ]);
                }
                ConditionResult::Ran {
                    num_images,
                    trials: ts,
                } => {
                    summary.push(vec![
                        c.as_str().into(),
                        num_images.to_string(),
                        fmt_metric(self.mean_train_accuracy(*c)),
                        fmt_metric(self.mean_test_accuracy(*c)),
                    ]);
                    for (seed, o) in ts {
                        trials.push(vec![
                            c.as_str().into(),
                            seed.to_string(),
                            num_images.to_string(),
                            fmt_metric(Some(o.train_accuracy)),
                            fmt_metric(o.test.accuracy),
                            fmt_metric(o.test.sensitivity),
                            fmt_metric(o.test.specificity),
                        ]);
                    }
                }
            }
        }
        vec![summary, trials]
    }
}

/// Why a condition cannot run, if it cannot.
fn skip_reason(m: &Manifest) -> Option<String> {
    let pos = m.iter().filter(|r| r.species.is_animal()).count();
    let neg = m.len() - pos;
    if pos < 2 || neg < 2 {
        Some(format!("{pos} animal and {neg} unclassified images"))
    } else {
        None
    }
}

/// Day-only, night-only and mixed detectors, each on a set balanced between
/// animals and unclassified images.
pub fn run_illumination_study(
    ws: &Workspace,
    cfg: &ExperimentConfig,
) -> Result<IlluminationReport> {
    let conditions = Condition::ALL
        .iter()
        .map(|&c| {
            let subset = filter_manifest(ws.manifest(), &c.predicate());
            if let Some(reason) = skip_reason(&subset) {
                return Ok((c, ConditionResult::Skipped(reason)));
            }
            let trials = cfg
                .trial_seeds()
                .par_iter()
                .map(|&seed| {
                    let balanced = balance_classes(&subset, ClassKey::Presence, seed)?;
                    Ok((
                        balanced.len(),
                        seed,
                        split_and_detect(ws, &balanced, cfg.train_fraction, &cfg.detector, seed)?,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            let num_images = trials[0].0;
            Ok((
                c,
                ConditionResult::Ran {
                    num_images,
                    trials: trials.into_iter().map(|(_, s, o)| (s, o)).collect(),
                },
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    if conditions
        .iter()
        .all(|(_, r)| matches!(r, ConditionResult::Skipped(_)))
    {
        return Err(Error::invalid(
            "no illumination condition has both animal and unclassified images",
        ));
    }
    Ok(IlluminationReport { conditions })
}
