//! Species comparison, individual study and joint individual recognition.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::corpus::{balance_classes, stratified_split, ClassKey, Manifest, Species, StratifyBy};
use crate::error::{Error, Result};
use crate::eval::{accumulate, fmt_metric, per_class_topk, ConfusionMatrix, MetricsReport};
use crate::features::RegionFeatures;
use crate::rng::derive_seed;
use crate::segmentation::{apply_mask, segment_image, train_patch_detector};
use crate::svm::OneVsRest;
use crate::wsddn::{rank_classes, train_head, TwoStreamHead};

use super::config::{ExperimentConfig, HeadConfig, IndividualGroup};
use super::detection::train_detector;
use super::report::{summarize, OutputFile, Table};
use super::workspace::{proposal_features, Workspace};

/// Trains the region-scoring head on `(dataset position, class)` pairs.
pub fn fit_head(
    features: &[RegionFeatures],
    examples: &[(usize, usize)],
    classes: &[String],
    cfg: &HeadConfig,
    seed: u64,
) -> Result<TwoStreamHead> {
    let data: Vec<(&RegionFeatures, usize)> =
        examples.iter().map(|&(i, c)| (&features[i], c)).collect();
    Ok(train_head(
        &data,
        classes.to_vec(),
        &cfg.with_seed(derive_seed(seed, "head")),
    )?
    .head)
}

/// Full class ranking for each image.
pub fn head_rankings(
    features: &[RegionFeatures],
    images: &[usize],
    head: &TwoStreamHead,
    cfg: &HeadConfig,
) -> Result<Vec<Vec<usize>>> {
    images
        .iter()
        .map(|&i| rank_classes(&features[i], head, &cfg.aggregation()))
        .collect()
}

fn class_index(classes: &[String], label: &str) -> Result<usize> {
    classes
        .iter()
        .position(|c| c == label)
        .ok_or_else(|| Error::UnknownLabel(label.to_string()))
}

/// Species label of a record, with negatives as `unclassified`.
fn species_label(ws: &Workspace, i: usize) -> &'static str {
    ws.record(i).species.as_str()
}

pub const SPECIES_VARIANTS: [&str; 4] = ["bc_gated", "direct", "wsddn_top1", "wsddn_top5"];

#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesTrial {
    pub seed: u64,
    /// `per_class[c][v]`: accuracy of variant `v` on class `c`.
    pub per_class: Vec<[Option<f64>; 4]>,
    /// Confusion matrix of the direct image-level classifier.
    pub direct_confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesReport {
    pub classes: Vec<String>,
    /// `k` used for the "top-5" column (capped at the class count).
    pub top_n: usize,
    pub trials: Vec<SpeciesTrial>,
}

impl SpeciesReport {
    /// Mean over trials of variant `variant` (index into
    /// [`SPECIES_VARIANTS`]) on class `class`.
    pub fn mean(&self, class: usize, variant: usize) -> Option<f64> {
        summarize(self.trials.iter().map(|t| t.per_class[class][variant])).mean
    }

    /// Direct-classifier confusion matrix summed over trials.
    pub fn direct_confusion(&self) -> ConfusionMatrix {
        let mut cm = ConfusionMatrix::new(self.classes.clone());
        for t in &self.trials {
            cm.merge(&t.direct_confusion).expect("same classes");
        }
        cm
    }

    pub fn outputs(&self) -> Vec<OutputFile> {
        let mut columns = vec!["class"];
        columns.extend(SPECIES_VARIANTS);
        let mut summary = Table::new("species", &columns);
        for (c, name) in self.classes.iter().enumerate() {
            let mut row = vec![name.clone()];
            row.extend((0..SPECIES_VARIANTS.len()).map(|v| fmt_metric(self.mean(c, v))));
            summary.push(row);
        }
        let mut columns = vec!["seed", "class"];
        columns.extend(SPECIES_VARIANTS);
        let mut trials = Table::new("trials", &columns);
        for t in &self.trials {
            for (c, name) in self.classes.iter().enumerate() {
                let mut row = vec![t.seed.to_string(), name.clone()];
                row.extend(t.per_class[c].iter().map(|&v| fmt_metric(v)));
                trials.push(row);
            }
        }
        let cm = self.direct_confusion();
        vec![
            OutputFile::from(&summary),
            OutputFile::from(&trials),
            OutputFile {
                file_name: "confusion_direct.csv".into(),
                contents: cm.to_csv(),
            },
            OutputFile {
                file_name: "metrics_direct.csv".into(),
                contents: MetricsReport::from_confusion(&cm).to_csv(),
            },
        ]
    }
}

/// Classes for the species comparison: animal species present, in label
/// order, then `unclassified` if the corpus has negatives.
pub fn species_classes(m: &Manifest) -> Vec<String> {
    let present: BTreeSet<Species> = m.iter().map(|r| r.species).collect();
    let mut out: Vec<String> = Species::ALL
        .iter()
        .filter(|s| s.is_animal() && present.contains(s))
        .map(|s| s.as_str().to_string())
        .collect();
    if present.contains(&Species::Unclassified) {
        out.push(Species::Unclassified.as_str().to_string());
    }
    out
}

/// Image-level one-vs-rest ranking; with a single class every image gets it.
fn ovr_rankings(
    ws: &Workspace,
    train: &[(usize, usize)],
    test: &[usize],
    classes: &[String],
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if classes.len() == 1 {
        return Ok(vec![vec![0]; test.len()]);
    }
    let x: Vec<Vec<f64>> = train.iter().map(|&(i, _)| ws.image_feature(i)).collect();
    let y: Vec<usize> = train.iter().map(|&(_, c)| c).collect();
    let ovr = OneVsRest::train(&x, &y, classes.to_vec(), &cfg.detector.with_seed(seed))?;
    test.iter()
        .map(|&i| ovr.ranking(&ws.image_feature(i)))
        .collect()
}

fn species_trial(
    ws: &Workspace,
    cfg: &ExperimentConfig,
    classes: &[String],
    top_n: usize,
    seed: u64,
) -> Result<SpeciesTrial> {
    let m = ws.manifest();
    let split = stratified_split(m, cfg.train_fraction, seed, StratifyBy::Species)?;
    let train = ws.positions_of(&split.train)?;
    let test = ws.positions_of(&split.validation)?;
    let label = |i: usize| class_index(classes, species_label(ws, i));
    let train_pairs = train
        .iter()
        .map(|&i| Ok((i, label(i)?)))
        .collect::<Result<Vec<_>>>()?;
    let truths = test.iter().map(|&i| label(i)).collect::<Result<Vec<_>>>()?;
    let c = classes.len();

    // (b) direct image-level classifier over every class
    let direct = ovr_rankings(
        ws,
        &train_pairs,
        &test,
        classes,
        cfg,
        derive_seed(seed, "direct"),
    )?;

    // (a) detector gate, then a species-only classifier
    let has_negatives = classes.last().map(String::as_str) == Some(Species::Unclassified.as_str());
    let gated: Vec<Vec<usize>> = if has_negatives {
        let unclassified = c - 1;
        let animal_classes = &classes[..unclassified];
        let detector = train_detector(ws, &train, &cfg.detector, seed)?;
        let animal_train: Vec<(usize, usize)> = train_pairs
            .iter()
            .copied()
            .filter(|&(_, l)| l != unclassified)
            .collect();
        let species = ovr_rankings(
            ws,
            &animal_train,
            &test,
            animal_classes,
            cfg,
            derive_seed(seed, "gated"),
        )?;
        test.iter()
            .zip(species)
            .map(|(&i, ranking)| {
                let animal = detector.predict_label(&ws.image_feature(i))? > 0;
                Ok(vec![if animal { ranking[0] } else { unclassified }])
            })
            .collect::<Result<_>>()?
    } else {
        direct.clone()
    };

    // (c, d) region-scoring head with top-K aggregation
    let head = fit_head(&ws.features, &train_pairs, classes, &cfg.head, seed)?;
    let wsddn = head_rankings(&ws.features, &test, &head, &cfg.head)?;

    let columns = [
        per_class_topk(&gated, &truths, c, 1)?,
        per_class_topk(&direct, &truths, c, 1)?,
        per_class_topk(&wsddn, &truths, c, 1)?,
        per_class_topk(&wsddn, &truths, c, top_n)?,
    ];
    let per_class = (0..c)
        .map(|k| [columns[0][k], columns[1][k], columns[2][k], columns[3][k]])
        .collect();
    let pairs: Vec<(usize, usize)> = direct
        .iter()
        .zip(&truths)
        .map(|(r, &t)| (r[0], t))
        .collect();
    Ok(SpeciesTrial {
        seed,
        per_class,
        direct_confusion: accumulate(classes.to_vec(), &pairs)?,
    })
}

pub fn run_species_comparison(ws: &Workspace, cfg: &ExperimentConfig) -> Result<SpeciesReport> {
    let classes = species_classes(ws.manifest());
    if classes.len() < 2 {
        return Err(Error::invalid(
            "species comparison needs at least two classes",
        ));
    }
    let top_n = 5.min(classes.len());
    let trials = cfg
        .trial_seeds()
        .par_iter()
        .map(|&seed| species_trial(ws, cfg, &classes, top_n, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpeciesReport {
        classes,
        top_n,
        trials,
    })
}

/// One individual-recognition trial: a head over `classes`, tested top-1.
#[derive(Debug, Clone, PartialEq)]
pub struct IndividualTrial {
    pub seed: u64,
    /// Training images per class after any balancing.
    pub train_counts: Vec<usize>,
    pub confusion: ConfusionMatrix,
}

impl IndividualTrial {
    pub fn metrics(&self) -> MetricsReport {
        MetricsReport::from_confusion(&self.confusion)
    }

    pub fn accuracy(&self) -> Option<f64> {
        let total = self.confusion.total();
        (total > 0).then(|| self.confusion.diagonal_sum() as f64 / total as f64)
    }

    /// Smallest defined per-class sensitivity.
    pub fn min_sensitivity(&self) -> Option<f64> {
        self.metrics()
            .classes
            .iter()
            .filter_map(|m| m.sensitivity)
            .reduce(f64::min)
    }

    pub fn mean_sensitivity(&self) -> Option<f64> {
        summarize(self.metrics().classes.iter().map(|m| m.sensitivity)).mean
    }
}

fn individual_classes(m: &Manifest) -> Vec<String> {
    m.individual_counts().into_keys().collect()
}

/// Records of the individuals in `group`.
fn group_manifest(m: &Manifest, group: IndividualGroup) -> Manifest {
    let ids: Vec<&str> = m
        .iter()
        .filter(|r| r.individual.is_some() && group.contains(r.species))
        .map(|r| r.id.as_str())
        .collect();
    m.select(&ids)
}

/// Splits `m` by individual, optionally balances the training side, trains
/// the head on `features` and tests top-1.
fn individual_trial(
    ws: &Workspace,
    features: &[RegionFeatures],
    m: &Manifest,
    balanced: bool,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<IndividualTrial> {
    let classes = individual_classes(m);
    if classes.len() < 2 {
        return Err(Error::invalid(format!(
            "need at least two individuals, found {}",
            classes.len()
        )));
    }
    let split = stratified_split(m, cfg.train_fraction, seed, StratifyBy::Individual)?;
    let mut train_m = m.select(&split.train);
    if balanced {
        train_m = balance_classes(&train_m, ClassKey::Individual, seed)?;
    }
    let label = |i: usize| {
        class_index(
            &classes,
            ws.record(i).individual.as_deref().unwrap_or_default(),
        )
    };
    let train = ws.positions(&train_m)?;
    let test = ws.positions_of(&split.validation)?;
    let train_pairs = train
        .iter()
        .map(|&i| Ok((i, label(i)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut train_counts = vec![0; classes.len()];
    for &(_, c) in &train_pairs {
        train_counts[c] += 1;
    }
    let head = fit_head(features, &train_pairs, &classes, &cfg.head, seed)?;
    let rankings = head_rankings(features, &test, &head, &cfg.head)?;
    let pairs = test
        .iter()
        .zip(&rankings)
        .map(|(&i, r)| Ok((r[0], label(i)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(IndividualTrial {
        seed,
        train_counts,
        confusion: accumulate(classes, &pairs)?,
    })
}

/// Proposal features of masked images for every individual record; other
/// positions keep their raw features. The patch detector is fit on boxed
/// training images spaced evenly through the manifest.
fn segmented_features(
    ws: &Workspace,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<Vec<RegionFeatures>> {
    let m = group_manifest(ws.manifest(), IndividualGroup::Joint);
    let split = stratified_split(&m, cfg.train_fraction, seed, StratifyBy::Individual)?;
    let boxed: Vec<usize> = ws
        .positions_of(&split.train)?
        .into_iter()
        .filter(|&i| ws.dataset.boxes[i].is_some())
        .collect();
    let stride = (boxed.len() / cfg.individual.mask_training_images.max(1)).max(1);
    let samples: Vec<_> = boxed
        .iter()
        .step_by(stride)
        .take(cfg.individual.mask_training_images)
        .map(|&i| (&ws.dataset.images[i], ws.dataset.boxes[i]))
        .collect();
    if samples.is_empty() {
        return Err(Error::invalid(
            "segmented training needs animal boxes for the training images",
        ));
    }
    // Patches outside the box are the detector's negatives.
    let detector = train_patch_detector(
        &samples,
        cfg.segmentation.patch_size,
        &ws.extractor,
        &cfg.detector.with_seed(derive_seed(seed, "mask")),
    )?;
    let positions = ws.positions(&m)?;
    let masked = positions
        .iter()
        .map(|&i| {
            let image = &ws.dataset.images[i];
            let (_, mask) = segment_image(image, &detector, &ws.extractor, &cfg.segmentation)?;
            apply_mask(image, &mask.upsample())
        })
        .collect::<Result<Vec<_>>>()?;
    let masked_features = proposal_features(&masked, &ws.extractor)?;
    let mut out = ws.features.clone();
    for (i, rf) in positions.into_iter().zip(masked_features) {
        out[i] = rf;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndividualVariant {
    pub balanced: bool,
    pub segmented: bool,
    pub group: IndividualGroup,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantResult {
    pub variant: IndividualVariant,
    pub classes: Vec<String>,
    pub trials: Vec<IndividualTrial>,
}

impl VariantResult {
    /// Per-individual metrics from counts pooled over trials.
    pub fn pooled(&self) -> MetricsReport {
        let mut cm = ConfusionMatrix::new(self.classes.clone());
        for t in &self.trials {
            cm.merge(&t.confusion).expect("same classes");
        }
        MetricsReport::from_confusion(&cm)
    }

    pub fn mean_min_sensitivity(&self) -> Option<f64> {
        summarize(self.trials.iter().map(IndividualTrial::min_sensitivity)).mean
    }

    pub fn mean_accuracy(&self) -> Option<f64> {
        summarize(self.trials.iter().map(IndividualTrial::accuracy)).mean
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub individuals: usize,
    pub trials: Vec<IndividualTrial>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndividualReport {
    pub variants: Vec<VariantResult>,
    pub curve: Vec<CurvePoint>,
}

impl IndividualReport {
    pub fn find(
        &self,
        balanced: bool,
        segmented: bool,
        group: IndividualGroup,
    ) -> Option<&VariantResult> {
        let key = IndividualVariant {
            balanced,
            segmented,
            group,
        };
        self.variants.iter().find(|v| v.variant == key)
    }

    pub fn outputs(&self) -> Vec<OutputFile> {
        let key = |v: &IndividualVariant| {
            vec![
                if v.balanced { "balanced" } else { "unbalanced" }.to_string(),
                if v.segmented { "segmented" } else { "raw" }.to_string(),
                v.group.as_str().to_string(),
            ]
        };
        let mut summary = Table::new(
            "variants",
            &[
                "balance",
                "images",
                "group",
                "individuals",
                "trials",
                "accuracy_mean",
                "min_sensitivity_mean",
            ],
        );
        let mut per = Table::new(
            "per_individual",
            &[
                "balance",
                "images",
                "group",
                "individual",
                "train_images",
                "support",
                "tp",
                "tn",
                "fp",
                "fn",
                "sensitivity",
                "specificity",
                "precision",
                "accuracy",
            ],
        );
        let mut trials = Table::new(
            "trials",
            &[
                "balance",
                "images",
                "group",
                "seed",
                "accuracy",
                "min_sensitivity",
                "mean_sensitivity",
            ],
        );
        for v in &self.variants {
            let mut row = key(&v.variant);
            row.extend([
                v.classes.len().to_string(),
                v.trials.len().to_string(),
                fmt_metric(v.mean_accuracy()),
                fmt_metric(v.mean_min_sensitivity()),
            ]);
            summary.push(row);
            for (c, m) in v.pooled().classes.iter().enumerate() {
                let trained: usize = v.trials.iter().map(|t| t.train_counts[c]).sum();
                let mut row = key(&v.variant);
                row.extend([
                    m.class.clone(),
                    trained.to_string(),
                    m.support.to_string(),
                    m.counts.tp.to_string(),
                    m.counts.tn.to_string(),
                    m.counts.fp.to_string(),
                    m.counts.fn_.to_string(),
                    fmt_metric(m.sensitivity),
                    fmt_metric(m.specificity),
                    fmt_metric(m.precision),
                    fmt_metric(m.accuracy),
                ]);
                per.push(row);
            }
            for t in &v.trials {
                let mut row = key(&v.variant);
                row.extend([
                    t.seed.to_string(),
                    fmt_metric(t.accuracy()),
                    fmt_metric(t.min_sensitivity()),
                    fmt_metric(t.mean_sensitivity()),
                ]);
                trials.push(row);
            }
        }
        let mut curve = Table::new(
            "curve",
            &[
                "individuals",
                "trials",
                "accuracy_mean",
                "mean_sensitivity_mean",
                "min_sensitivity_mean",
            ],
        );
        for p in &self.curve {
            curve.push(vec![
                p.individuals.to_string(),
                p.trials.len().to_string(),
                fmt_metric(summarize(p.trials.iter().map(IndividualTrial::accuracy)).mean),
                fmt_metric(summarize(p.trials.iter().map(IndividualTrial::mean_sensitivity)).mean),
                fmt_metric(summarize(p.trials.iter().map(IndividualTrial::min_sensitivity)).mean),
            ]);
        }
        [summary, per, trials, curve]
            .iter()
            .map(OutputFile::from)
            .collect()
    }
}

pub fn run_individual_study(ws: &Workspace, cfg: &ExperimentConfig) -> Result<IndividualReport> {
    let ic = &cfg.individual;
    let seeds = cfg.trial_seeds();
    let groups: Vec<(IndividualGroup, Manifest)> = ic
        .groups
        .iter()
        .map(|&g| {
            let m = group_manifest(ws.manifest(), g);
            let n = individual_classes(&m).len();
            if n < 2 {
                return Err(Error::invalid(format!(
                    "group {} has {n} individuals; need at least 2",
                    g.as_str()
                )));
            }
            Ok((g, m))
        })
        .collect::<Result<_>>()?;
    let masked: Vec<Vec<RegionFeatures>> = if ic.segment.contains(&true) {
        seeds
            .par_iter()
            .map(|&s| segmented_features(ws, cfg, s))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };

    let mut plan = Vec::new();
    for &balanced in &ic.balance {
        for &segmented in &ic.segment {
            for (g, _) in &groups {
                for (k, &seed) in seeds.iter().enumerate() {
                    plan.push((
                        IndividualVariant {
                            balanced,
                            segmented,
                            group: *g,
                        },
                        k,
                        seed,
                    ));
                }
            }
        }
    }
    let results = plan
        .par_iter()
        .map(|&(v, k, seed)| {
            let m = &groups
                .iter()
                .find(|(g, _)| *g == v.group)
                .expect("planned group")
                .1;
            let features = if v.segmented {
                &masked[k]
            } else {
                &ws.features
            };
            individual_trial(ws, features, m, v.balanced, cfg, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut variants: Vec<VariantResult> = Vec::new();
    for ((v, _, _), trial) in plan.into_iter().zip(results) {
        match variants.last_mut() {
            Some(last) if last.variant == v => last.trials.push(trial),
            _ => variants.push(VariantResult {
                variant: v,
                classes: trial.confusion.class_names().to_vec(),
                trials: vec![trial],
            }),
        }
    }

    let pool = group_manifest(ws.manifest(), IndividualGroup::Joint);
    let all = individual_classes(&pool);
    let sizes: Vec<usize> = ic
        .curve
        .iter()
        .copied()
        .filter(|&n| n >= 2 && n <= all.len())
        .collect();
    let curve_plan: Vec<(usize, u64)> = sizes
        .iter()
        .flat_map(|&n| seeds.iter().map(move |&s| (n, s)))
        .collect();
    let curve_trials = curve_plan
        .par_iter()
        .map(|&(n, seed)| {
            let keep: BTreeSet<&str> = all[..n].iter().map(String::as_str).collect();
            let ids: Vec<&str> = pool
                .iter()
                .filter(|r| r.individual.as_deref().is_some_and(|i| keep.contains(i)))
                .map(|r| r.id.as_str())
                .collect();
            individual_trial(
                ws,
                &ws.features,
                &pool.select(&ids),
                ic.balance[0],
                cfg,
                seed,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut curve: Vec<CurvePoint> = sizes
        .iter()
        .map(|&n| CurvePoint {
            individuals: n,
            trials: Vec::new(),
        })
        .collect();
    for ((n, _), t) in curve_plan.into_iter().zip(curve_trials) {
        curve
            .iter_mut()
            .find(|p| p.individuals == n)
            .expect("planned size")
            .trials
            .push(t);
    }
    Ok(IndividualReport { variants, curve })
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointRow {
    pub individual: String,
    pub species: Species,
    pub metrics: crate::eval::ClassMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointReport {
    /// Sorted by descending pooled sensitivity, then by name.
    pub rows: Vec<JointRow>,
    pub trials: Vec<IndividualTrial>,
}

impl JointReport {
    pub fn outputs(&self) -> Vec<OutputFile> {
        let mut table = Table::new(
            "joint",
            &[
                "rank",
                "individual",
                "species",
                "support",
                "tp",
                "tn",
                "fp",
                "fn",
                "sensitivity",
                "specificity",
                "precision",
                "accuracy",
            ],
        );
        for (k, r) in self.rows.iter().enumerate() {
            let m = &r.metrics;
            table.push(vec![
                (k + 1).to_string(),
                r.individual.clone(),
                r.species.to_string(),
                m.support.to_string(),
                m.counts.tp.to_string(),
                m.counts.tn.to_string(),
                m.counts.fp.to_string(),
                m.counts.fn_.to_string(),
                fmt_metric(m.sensitivity),
                fmt_metric(m.specificity),
                fmt_metric(m.precision),
                fmt_metric(m.accuracy),
            ]);
        }
        let mut trials = Table::new(
            "trials",
            &["seed", "accuracy", "min_sensitivity", "min_specificity"],
        );
        for t in &self.trials {
            let min_spec = t
                .metrics()
                .classes
                .iter()
                .filter_map(|m| m.specificity)
                .reduce(f64::min);
            trials.push(vec![
                t.seed.to_string(),
                fmt_metric(t.accuracy()),
                fmt_metric(t.min_sensitivity()),
                fmt_metric(min_spec),
            ]);
        }
        [table, trials].iter().map(OutputFile::from).collect()
    }
}

/// One head over every individual of both species.
pub fn run_joint_individuals(ws: &Workspace, cfg: &ExperimentConfig) -> Result<JointReport> {
    let m = group_manifest(ws.manifest(), IndividualGroup::Joint);
    let count = |g: IndividualGroup| individual_classes(&group_manifest(&m, g)).len();
    if count(IndividualGroup::Tigerlike) < 2 || count(IndividualGroup::Leopardlike) < 2 {
        return Err(Error::invalid(
            "joint recognition needs at least two individuals of each species",
        ));
    }
    let trials = cfg
        .trial_seeds()
        .par_iter()
        .map(|&seed| individual_trial(ws, &ws.features, &m, false, cfg, seed))
        .collect::<Result<Vec<_>>>()?;
    let mut cm = ConfusionMatrix::new(individual_classes(&m));
    for t in &trials {
        cm.merge(&t.confusion)?;
    }
    let mut rows: Vec<JointRow> = MetricsReport::from_confusion(&cm)
        .classes
        .into_iter()
        .map(|metrics| {
            let species = m
                .iter()
                .find(|r| r.individual.as_deref() == Some(metrics.class.as_str()))
                .map(|r| r.species)
                .expect("class drawn from the manifest");
            JointRow {
                individual: metrics.class.clone(),
                species,
                metrics,
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        let sa = a.metrics.sensitivity.unwrap_or(-1.0);
        let sb = b.metrics.sensitivity.unwrap_or(-1.0);
        sb.total_cmp(&sa)
            .then_with(|| a.individual.cmp(&b.individual))
    });
    Ok(JointReport { rows, trials })
}
