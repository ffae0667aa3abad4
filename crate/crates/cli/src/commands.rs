//! One handler per subcommand: resolve flags against the config, call into
//! the library, write files.

use std::fmt::Write as _;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};

use camtrap::corpus::{
    balance_classes, filter_manifest, stratified_split, ClassKey, Manifest, Predicate,
    SplitAssignment, StratifyBy,
};
use camtrap::dataset::Dataset;
use camtrap::experiments::{
    fit_head, head_rankings, load_dataset, run, species_classes, train_detector, write_report,
    CorpusSource, ExperimentConfig, HeadConfig, Protocol, Workspace, DETECTION_CLASSES,
};
use camtrap::predictions::{evaluate_labels, load_labels, save_labels, LabelRow};
use camtrap::segmentation::{segment_image, train_patch_detector};
use camtrap::synth::generate_corpus;
use camtrap::wsddn::TwoStreamHead;
use camtrap::Error;
use rayon::prelude::*;

use crate::{
    Command, DataArgs, DetectArgs, EvalArgs, ExperimentArgs, Failure, HeadArgs, IndividualArgs,
    SegmentArgs, SpeciesArgs, SplitArgs, SynthArgs, DEFAULT_OUT,
};

type Outcome = Result<(), Failure>;

pub fn dispatch(command: Command) -> Outcome {
    match command {
        Command::Synth(a) => with_jobs(a.run.jobs, || synth(&a)),
        Command::Split(a) => with_jobs(a.run.jobs, || split(&a)),
        Command::TrainDetect(a) => with_jobs(a.run.jobs, || train_detect(&a)),
        Command::TrainSpecies(a) => with_jobs(a.run.jobs, || train_species(&a)),
        Command::TrainIndividual(a) => with_jobs(a.run.jobs, || train_individual(&a)),
        Command::Segment(a) => with_jobs(a.run.jobs, || segment(&a)),
        Command::Eval(a) => eval(&a),
        Command::Experiment(a) => experiment(&a),
    }
}

fn with_jobs(jobs: NonZeroUsize, f: impl FnOnce() -> Outcome + Send) -> Outcome {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.get())
        .build()
        .map_err(|e| Failure::Usage(format!("cannot start {jobs} worker threads: {e}")))?
        .install(f)
}

/// `protocol`'s defaults overlaid with the config file, if any. Problems with
/// the file are usage errors.
fn load_config(protocol: Protocol, path: Option<&Path>) -> Result<ExperimentConfig, Failure> {
    let Some(path) = path else {
        return Ok(ExperimentConfig::default_for(protocol));
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("--config {}: {e}", path.display())))?;
    ExperimentConfig::from_partial_toml(protocol, &text)
        .map_err(|e| Failure::Usage(format!("--config {}: {e}", path.display())))
}

fn validated(cfg: ExperimentConfig) -> Result<ExperimentConfig, Failure> {
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(cfg)
}

fn out_dir(flag: Option<&PathBuf>, cfg: &ExperimentConfig) -> Result<PathBuf, Failure> {
    let dir = flag
        .cloned()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    std::fs::create_dir_all(&dir).map_err(|source| Error::Io {
        path: dir.clone(),
        source,
    })?;
    Ok(dir)
}

fn write(path: &Path, contents: &str) -> Outcome {
    std::fs::write(path, contents).map_err(|source| {
        Failure::Data(Error::Io {
            path: path.to_path_buf(),
            source,
        })
    })
}

fn data_error(msg: impl Into<String>) -> Failure {
    Failure::Data(Error::InvalidArgument(msg.into()))
}

fn synth(a: &SynthArgs) -> Outcome {
    let cfg = load_config(a.protocol, a.config.as_deref())?;
    let CorpusSource::Synth(mut s) = cfg.corpus.clone() else {
        return Err(Failure::Usage(
            "the config's corpus is a manifest, not a synthetic corpus".into(),
        ));
    };
    if let Some(seed) = a.run.seed {
        s.seed = seed;
    }
    if let Some(n) = a.negatives {
        s.negatives = n;
    }
    if let Some(f) = a.night_fraction {
        s.night_fraction = f;
    }
    s.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let corpus = generate_corpus(&s)?;
    let manifest = corpus.write_to(out_dir(a.run.out.as_ref(), &cfg)?)?;
    println!(
        "wrote {} images to {}",
        corpus.manifest.len(),
        manifest.display()
    );
    Ok(())
}

fn split(a: &SplitArgs) -> Outcome {
    let m = Manifest::load(&a.manifest)?;
    let split = stratified_split(&m, a.fraction, a.run.seed.unwrap_or(0), a.stratify)?;
    let out = out_dir(
        a.run.out.as_ref(),
        &ExperimentConfig::default_for(Protocol::Volume),
    )?
    .join("split.toml");
    split.save(&out)?;
    println!(
        "wrote {} train and {} validation ids to {}",
        split.train.len(),
        split.validation.len(),
        out.display()
    );
    Ok(())
}

/// The images named by `--manifest`, or the config's corpus.
fn dataset(data: &DataArgs, cfg: &ExperimentConfig) -> Result<Dataset, Failure> {
    Ok(match &data.manifest {
        Some(path) => Dataset::load(path)?,
        None => load_dataset(&cfg.corpus)?,
    })
}

/// `--split` if given, restricted to the records of `m`; otherwise a fresh
/// split of `m`.
fn split_for(
    data: &DataArgs,
    m: &Manifest,
    cfg: &ExperimentConfig,
    seed: u64,
    by: StratifyBy,
) -> Result<SplitAssignment, Failure> {
    match &data.split {
        Some(path) => {
            let mut split = SplitAssignment::load(path)?;
            split.train.retain(|id| m.get(id).is_some());
            split.validation.retain(|id| m.get(id).is_some());
            Ok(split)
        }
        None => Ok(stratified_split(m, cfg.train_fraction, seed, by)?),
    }
}

fn apply_data_flags(cfg: &mut ExperimentConfig, data: &DataArgs) {
    if let Some(f) = data.fraction {
        cfg.train_fraction = f;
    }
}

fn apply_head_flags(head: &mut HeadConfig, a: &HeadArgs) {
    if let Some(e) = a.epochs {
        head.epochs = e;
    }
    if let Some(lr) = a.learning_rate {
        head.learning_rate = lr;
    }
    if let Some(k) = a.top_k {
        head.top_k = k;
    }
}

/// Writes predictions, truth and their evaluation into `out`.
fn write_evaluation(out: &Path, predictions: &[LabelRow], truth: &[LabelRow]) -> Outcome {
    save_labels(out.join("predictions.csv"), predictions)?;
    save_labels(out.join("truth.csv"), truth)?;
    let evaluation = evaluate_labels(predictions, truth)?;
    write(&out.join("metrics.csv"), &evaluation.report.to_csv())?;
    write(&out.join("confusion.csv"), &evaluation.confusion.to_csv())?;
    if !evaluation.topk.is_empty() {
        write(&out.join("topk.csv"), &evaluation.topk_csv())?;
    }
    let correct = evaluation.confusion.diagonal_sum();
    println!(
        "{correct} of {} validation images correct; wrote {}",
        evaluation.confusion.total(),
        out.display()
    );
    Ok(())
}

fn train_detect(a: &DetectArgs) -> Outcome {
    let mut cfg = load_config(Protocol::Volume, a.data.config.as_deref())?;
    apply_data_flags(&mut cfg, &a.data);
    if let Some(e) = a.epochs {
        cfg.detector.epochs = e;
    }
    if let Some(l) = a.lambda {
        cfg.detector.lambda = l;
    }
    let cfg = validated(cfg)?;
    let seed = a.run.seed.unwrap_or(cfg.base_seed);
    let ws = Workspace::new(dataset(&a.data, &cfg)?, cfg.features.extractor()?)?;
    let split = split_for(&a.data, ws.manifest(), &cfg, seed, StratifyBy::Presence)?;
    let train = ws.positions_of(&split.train)?;
    let model = train_detector(&ws, &train, &cfg.detector, seed)?;

    let out = out_dir(a.run.out.as_ref(), &cfg)?;
    model.save(out.join("detector.toml"))?;
    split.save(out.join("split.toml"))?;
    let mut predictions = Vec::new();
    let mut truth = Vec::new();
    for i in ws.positions_of(&split.validation)? {
        let r = ws.record(i);
        let empty = model.predict_label(&ws.image_feature(i))? < 0;
        predictions.push(LabelRow::new(&r.id, DETECTION_CLASSES[usize::from(empty)]));
        truth.push(LabelRow::new(&r.id, StratifyBy::Presence.key(r)));
    }
    write_evaluation(&out, &predictions, &truth)
}

/// Fits the head on the training ids and ranks the validation ids.
/// Returns the head with `(predictions, truth)` label rows.
fn head_stage(
    ws: &Workspace,
    cfg: &ExperimentConfig,
    classes: Vec<String>,
    label: impl Fn(usize) -> String,
    train: &[String],
    validation: &[String],
    seed: u64,
) -> Result<(TwoStreamHead, Vec<LabelRow>, Vec<LabelRow>), Failure> {
    if classes.len() < 2 {
        return Err(data_error(format!(
            "need at least two classes, found {classes:?}"
        )));
    }
    let index = |i: usize| {
        let l = label(i);
        classes
            .iter()
            .position(|c| *c == l)
            .ok_or(Error::UnknownLabel(l))
    };
    let examples = ws
        .positions_of(train)?
        .into_iter()
        .map(|i| Ok((i, index(i)?)))
        .collect::<Result<Vec<_>, Error>>()?;
    let head = fit_head(&ws.features, &examples, &classes, &cfg.head, seed)?;

    let test = ws.positions_of(validation)?;
    let rankings = head_rankings(&ws.features, &test, &head, &cfg.head)?;
    let mut predictions = Vec::with_capacity(test.len());
    let mut truth = Vec::with_capacity(test.len());
    for (&i, ranking) in test.iter().zip(&rankings) {
        let id = &ws.record(i).id;
        predictions.push(LabelRow::ranked(
            id,
            ranking.iter().map(|&c| classes[c].clone()).collect(),
        )?);
        truth.push(LabelRow::new(id, label(i)));
    }
    Ok((head, predictions, truth))
}

fn write_head_stage(
    out: &Path,
    split: &SplitAssignment,
    stage: (TwoStreamHead, Vec<LabelRow>, Vec<LabelRow>),
) -> Outcome {
    let (head, predictions, truth) = stage;
    head.save(out.join("head.toml"))?;
    split.save(out.join("split.toml"))?;
    write_evaluation(out, &predictions, &truth)
}

fn train_species(a: &SpeciesArgs) -> Outcome {
    let mut cfg = load_config(Protocol::Species, a.data.config.as_deref())?;
    apply_data_flags(&mut cfg, &a.data);
    apply_head_flags(&mut cfg.head, &a.head);
    let cfg = validated(cfg)?;
    let seed = a.run.seed.unwrap_or(cfg.base_seed);
    let ws = Workspace::new(dataset(&a.data, &cfg)?, cfg.features.extractor()?)?;
    let split = split_for(&a.data, ws.manifest(), &cfg, seed, StratifyBy::Species)?;
    let out = out_dir(a.run.out.as_ref(), &cfg)?;
    let classes = species_classes(ws.manifest());
    let label = |i: usize| ws.record(i).species.as_str().to_string();
    let stage = head_stage(
        &ws,
        &cfg,
        classes,
        label,
        &split.train,
        &split.validation,
        seed,
    )?;
    write_head_stage(&out, &split, stage)
}

fn train_individual(a: &IndividualArgs) -> Outcome {
    let mut cfg = load_config(Protocol::Individual, a.data.config.as_deref())?;
    apply_data_flags(&mut cfg, &a.data);
    apply_head_flags(&mut cfg.head, &a.head);
    let cfg = validated(cfg)?;
    let seed = a.run.seed.unwrap_or(cfg.base_seed);
    let all = dataset(&a.data, &cfg)?;
    let of_species = filter_manifest(
        &all.manifest,
        &Predicate::Species(a.species.iter().copied().collect()),
    );
    let identified: Vec<&str> = of_species
        .iter()
        .filter(|r| r.individual.is_some())
        .map(|r| r.id.as_str())
        .collect();
    let mut m = of_species.select(&identified);
    if let Some(min) = a.min_images {
        m = filter_manifest(&m, &Predicate::MinImagesPerIndividual(min));
    }
    let ws = Workspace::new(all.select(&m)?, cfg.features.extractor()?)?;
    let split = split_for(&a.data, &m, &cfg, seed, StratifyBy::Individual)?;
    let train = if a.balance {
        let balanced = balance_classes(&m.select(&split.train), ClassKey::Individual, seed)?;
        balanced.iter().map(|r| r.id.clone()).collect()
    } else {
        split.train.clone()
    };
    let out = out_dir(a.run.out.as_ref(), &cfg)?;
    let classes: Vec<String> = m.individual_counts().into_keys().collect();
    let label = |i: usize| ws.record(i).individual.clone().unwrap_or_default();
    let stage = head_stage(&ws, &cfg, classes, label, &train, &split.validation, seed)?;
    write_head_stage(&out, &split, stage)
}

fn segment(a: &SegmentArgs) -> Outcome {
    let mut cfg = load_config(Protocol::Individual, a.config.as_deref())?;
    if let Some(p) = a.patch_size {
        cfg.segmentation.patch_size = p;
    }
    if let Some(w) = a.weight {
        cfg.segmentation.pairwise.weight = w;
    }
    if let Some(t) = a.threshold {
        cfg.segmentation.threshold = t;
    }
    let cfg = validated(cfg)?;
    if a.train_images == 0 {
        return Err(Failure::Usage("--train-images must be at least 1".into()));
    }
    let seed = a.run.seed.unwrap_or(cfg.base_seed);
    let data = match &a.manifest {
        Some(path) => Dataset::load(path)?,
        None => load_dataset(&cfg.corpus)?,
    };
    let extractor = cfg.features.extractor()?;

    let boxed: Vec<usize> = (0..data.len())
        .filter(|&i| data.boxes[i].is_some())
        .collect();
    if boxed.is_empty() {
        return Err(data_error(
            "no image has an animal box to train the patch detector",
        ));
    }
    let stride = (boxed.len() / a.train_images).max(1);
    let fit: Vec<usize> = boxed
        .iter()
        .copied()
        .step_by(stride)
        .take(a.train_images)
        .collect();
    let samples: Vec<_> = fit
        .iter()
        .map(|&i| (&data.images[i], data.boxes[i]))
        .collect();
    let detector = train_patch_detector(
        &samples,
        cfg.segmentation.patch_size,
        &extractor,
        &cfg.detector.with_seed(seed),
    )?;

    let out = out_dir(a.run.out.as_ref(), &cfg)?;
    detector.save(out.join("patch_detector.toml"))?;
    let masks_dir = out.join("masks");
    std::fs::create_dir_all(&masks_dir).map_err(|source| Error::Io {
        path: masks_dir.clone(),
        source,
    })?;
    let masks = data
        .images
        .par_iter()
        .map(|image| {
            Ok(
                segment_image(image, &detector, &extractor, &cfg.segmentation)?
                    .1
                    .upsample(),
            )
        })
        .collect::<Result<Vec<_>, Error>>()?;

    let mut iou = String::from("id,iou\n");
    let mut held_out = Vec::new();
    for (i, (r, mask)) in data.manifest.iter().zip(&masks).enumerate() {
        mask.save_pbm(masks_dir.join(format!("{}.pbm", r.id)))?;
        if let (Some(b), false) = (data.boxes[i], fit.contains(&i)) {
            let truth = camtrap::segmentation::PixelMask::from_region(mask.width, mask.height, &b);
            let v = mask.iou(&truth)?;
            let _ = writeln!(iou, "{},{v:.6}", r.id);
            held_out.push(v);
        }
    }
    write(&out.join("iou.csv"), &iou)?;
    held_out.sort_by(f64::total_cmp);
    match held_out.get(held_out.len() / 2) {
        Some(median) => println!(
            "wrote {} masks to {}; median IoU {median:.4} over {} held-out boxed images",
            masks.len(),
            masks_dir.display(),
            held_out.len()
        ),
        None => println!("wrote {} masks to {}", masks.len(), masks_dir.display()),
    }
    Ok(())
}

fn eval(a: &EvalArgs) -> Outcome {
    let predictions = load_labels(&a.pred)?;
    let truth = load_labels(&a.truth)?;
    let evaluation = evaluate_labels(&predictions, &truth)?;
    print!("{}", evaluation.report.to_csv());
    if !evaluation.topk.is_empty() {
        print!("\n{}", evaluation.topk_csv());
    }
    if let Some(out) = &a.out {
        let out = out_dir(Some(out), &ExperimentConfig::default_for(Protocol::Volume))?;
        write(&out.join("metrics.csv"), &evaluation.report.to_csv())?;
        write(&out.join("confusion.csv"), &evaluation.confusion.to_csv())?;
        if !evaluation.topk.is_empty() {
            write(&out.join("topk.csv"), &evaluation.topk_csv())?;
        }
    }
    Ok(())
}

fn experiment(a: &ExperimentArgs) -> Outcome {
    let mut cfg = load_config(a.protocol, a.config.as_deref())?;
    if let Some(seed) = a.seed {
        cfg.base_seed = seed;
    }
    if let Some(n) = a.seeds {
        cfg.seeds = n;
    }
    if let Some(path) = &a.manifest {
        cfg.corpus = CorpusSource::Manifest(path.clone());
    }
    let cfg = validated(cfg)?;
    let out = out_dir(a.out.as_ref(), &cfg)?;
    let report = run(&cfg, a.jobs.get())?;
    write_report(&out, &cfg, &report)?;
    println!(
        "wrote {} report for {} seeds to {}",
        cfg.protocol,
        cfg.seeds,
        out.display()
    );
    Ok(())
}
