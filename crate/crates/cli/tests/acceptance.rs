//! Acceptance run. Every criterion prints one PASS or FAIL line with its
//! measurement and wall time; the process exits non-zero if any fails.

#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use camtrap::corpus::Species;
use camtrap::experiments::{
    desk_segmentation, run_illumination_study, run_individual_study, run_joint_individuals,
    run_species_comparison, run_volume_sweep, split_and_detect, Condition, CorpusSource,
    DetectorConfig, ExperimentConfig, IndividualGroup, Protocol, Workspace,
};
use camtrap::features::Extractor;
use camtrap::segmentation::{
    compute_unary, mean_field_sweeps, pairwise_kernel, refine_mean_field, segment_image,
    train_patch_detector, PatchGrid,
};
use camtrap::svm::logistic;
use camtrap::synth::{generate_corpus, ground_truth_mask, SynthImage};
use oracles::Check;

const SEED: u64 = 0;

type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn within(budget: Duration, check: impl FnOnce() -> Check) -> Check {
    let start = Instant::now();
    let summary = check()?;
    let took = start.elapsed();
    ensure!(
        took <= budget,
        "{summary}, but took {took:.2?} against a budget of {budget:?}"
    );
    Ok(summary)
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("thread pool")
        .install(f)
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn printed_matrix() -> Check {
    within(Duration::from_secs(1), oracles::printed_confusion_matrix)
}

fn metric_oracle() -> Check {
    within(Duration::from_secs(5), || oracles::metric_lists(2024, 1000))
}

fn aggregation_oracle() -> Check {
    within(Duration::from_secs(5), || oracles::aggregation(8, 1000))
}

fn softmax_structure() -> Check {
    oracles::softmax_structure(6, 1000)
}

fn gradients() -> Check {
    let head = oracles::head_gradients(10, 25)?;
    let conv = oracles::conv_gradients(12, 24)?;
    Ok(format!("head: {head}; conv: {conv}"))
}

fn svm() -> Check {
    let optimum = oracles::svm_optimality(7, 10)?;
    let xor = oracles::svm_xor(5)?;
    Ok(format!("{optimum}; {xor}"))
}

/// Detector and region head on the default three-species corpus at one seed,
/// then the joint individual protocol, all on one thread.
fn end_to_end() -> Check {
    single_threaded(|| {
        let start = Instant::now();
        let mut cfg = ExperimentConfig::default_for(Protocol::Species);
        cfg.seeds = 1;
        cfg.base_seed = SEED;
        let ws = Workspace::build(&cfg).map_err(err)?;

        let detection =
            split_and_detect(&ws, ws.manifest(), cfg.train_fraction, &cfg.detector, SEED)
                .map_err(err)?;
        let detector = detection.test.accuracy.unwrap_or(0.0);
        ensure!(detector >= 0.95, "detector held-out accuracy {detector:.3}");

        let species = run_species_comparison(&ws, &cfg).map_err(err)?;
        let (mut worst_top1, mut worst_class) = (f64::INFINITY, String::new());
        for (c, class) in species.classes.iter().enumerate() {
            let top1 = species.mean(c, 2).unwrap_or(0.0);
            let top5 = species.mean(c, 3).unwrap_or(0.0);
            ensure!(top1 >= 0.90, "{class}: region-head top-1 {top1:.3}");
            ensure!(
                top5 >= top1,
                "{class}: top-{} {top5:.3} below top-1 {top1:.3}",
                species.top_n
            );
            if top1 < worst_top1 {
                (worst_top1, worst_class) = (top1, class.clone());
            }
        }

        // The joint protocol pools counts over its default ten seeds.
        let mut joint_cfg = ExperimentConfig::default_for(Protocol::Joint);
        joint_cfg.base_seed = SEED;
        let joint_ws = Workspace::build(&joint_cfg).map_err(err)?;
        let joint = run_joint_individuals(&joint_ws, &joint_cfg).map_err(err)?;
        let (tigers, leopards) = joint.rows.iter().fold((0, 0), |(t, l), r| match r.species {
            Species::Tiger => (t + 1, l),
            _ => (t, l + 1),
        });
        ensure!(
            (tigers, leopards) == (3, 21),
            "joint report has {tigers} tigers and {leopards} leopards"
        );
        let specificity = joint
            .rows
            .iter()
            .map(|r| r.metrics.specificity.unwrap_or(0.0))
            .fold(f64::INFINITY, f64::min);
        ensure!(
            specificity >= 0.95,
            "minimum per-individual specificity {specificity:.3}"
        );

        let took = start.elapsed();
        ensure!(
            took <= Duration::from_secs(600),
            "single-threaded run took {took:.0?}"
        );
        Ok(format!(
            "seed {SEED}: detector {detector:.3}, worst region-head top-1 {worst_top1:.3} ({worst_class}), \
             joint minimum specificity {specificity:.3} over seeds {SEED}..{}, {:.0?} single-threaded",
            SEED + joint_cfg.seeds as u64 - 1,
            took
        ))
    })
}

/// Mean over ten seeds: more training data does not hurt, balancing lifts the
/// weakest individual, and daylight is no harder than night.
fn trends() -> Check {
    let mut volume_cfg = ExperimentConfig::default_for(Protocol::Volume);
    volume_cfg.seeds = 10;
    let ws = Workspace::build(&volume_cfg).map_err(err)?;
    let sweep = run_volume_sweep(&ws, &volume_cfg).map_err(err)?;
    let curve: Vec<f64> = (0..volume_cfg.fractions.len())
        .map(|p| sweep.mean_accuracy(p).unwrap_or(0.0))
        .collect();
    for (k, pair) in curve.windows(2).enumerate() {
        ensure!(
            pair[1] >= pair[0] - 0.02,
            "volume accuracy drops from {:.3} to {:.3} at point {}",
            pair[0],
            pair[1],
            k + 1
        );
    }

    let mut light_cfg = ExperimentConfig::default_for(Protocol::Illumination);
    light_cfg.seeds = 10;
    let light = run_illumination_study(&ws, &light_cfg).map_err(err)?;
    let day = light.mean_test_accuracy(Condition::Daylight).unwrap_or(0.0);
    let night = light.mean_test_accuracy(Condition::Night).unwrap_or(1.0);
    ensure!(day >= night, "day {day:.3} below night {night:.3}");

    let mut ind_cfg = ExperimentConfig::default_for(Protocol::Individual);
    ind_cfg.seeds = 10;
    ind_cfg.individual.segment = vec![false];
    ind_cfg.individual.curve.clear();
    let ind_ws = Workspace::build(&ind_cfg).map_err(err)?;
    let individuals = run_individual_study(&ind_ws, &ind_cfg).map_err(err)?;
    let mut lifts = Vec::new();
    for group in [
        IndividualGroup::Tigerlike,
        IndividualGroup::Leopardlike,
        IndividualGroup::Joint,
    ] {
        let min_sens = |balanced| {
            individuals
                .find(balanced, false, group)
                .and_then(|v| v.mean_min_sensitivity())
                .unwrap_or(0.0)
        };
        let (balanced, unbalanced) = (min_sens(true), min_sens(false));
        ensure!(
            balanced >= unbalanced,
            "{}: balanced minimum sensitivity {balanced:.3} below unbalanced {unbalanced:.3}",
            group.as_str()
        );
        lifts.push(format!("{} {balanced:.3}/{unbalanced:.3}", group.as_str()));
    }

    let curve: Vec<String> = curve.iter().map(|a| format!("{a:.3}")).collect();
    Ok(format!(
        "volume [{}], day {day:.3} / night {night:.3}, balanced/unbalanced minimum sensitivity {}",
        curve.join(", "),
        lifts.join(", ")
    ))
}

/// Patch detector fitted on 40 evenly spaced boxed images of the individual
/// corpus; the remaining boxed images are held out.
fn segmentation() -> Check {
    let CorpusSource::Synth(synth) = ExperimentConfig::default_for(Protocol::Individual).corpus
    else {
        return Err("individual protocol has no synthetic corpus".into());
    };
    let positives: Vec<SynthImage> = generate_corpus(&synth)
        .map_err(err)?
        .images
        .into_iter()
        .filter(|i| i.ground_truth_box.is_some())
        .collect();
    let stride = positives.len() / 40;
    let extractor = Extractor::with_seed(0);
    let samples: Vec<_> = positives
        .iter()
        .step_by(stride)
        .take(40)
        .map(|i| (&i.pixels, i.ground_truth_box))
        .collect();
    let cfg = desk_segmentation();
    let detector = train_patch_detector(
        &samples,
        cfg.patch_size,
        &extractor,
        &DetectorConfig::default().with_seed(1),
    )
    .map_err(err)?;
    let held_out: Vec<&SynthImage> = positives
        .iter()
        .enumerate()
        .filter(|(k, _)| k % stride != 0)
        .map(|(_, i)| i)
        .collect();

    let mut unweighted = cfg;
    unweighted.pairwise.weight = 0.0;
    for img in held_out.iter().take(10) {
        let grid = PatchGrid::for_image(&img.pixels, cfg.patch_size).map_err(err)?;
        let unary = compute_unary(
            &img.pixels,
            &grid,
            &detector,
            &extractor,
            cfg.probability_scale,
        )
        .map_err(err)?;
        let refined = refine_mean_field(&unary, &img.pixels, &unweighted.pairwise).map_err(err)?;
        let kernel = pairwise_kernel(&img.pixels, &grid, &cfg.pairwise);
        let swept = mean_field_sweeps(&unary.probs, &kernel, 0.0, cfg.pairwise.iterations);
        let bits = |p: &[f64]| p.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        ensure!(
            bits(&refined.probs) == bits(&unary.probs) && bits(&swept) == bits(&unary.probs),
            "{}: zero coupling changed the detector probabilities",
            img.record.id
        );
        let (field, _) =
            segment_image(&img.pixels, &detector, &extractor, &unweighted).map_err(err)?;
        ensure!(
            bits(&field.probs) == bits(&unary.probs),
            "{}: zero-coupling segmentation differs from the unary",
            img.record.id
        );
    }

    let mut ious = Vec::with_capacity(held_out.len());
    for img in &held_out {
        let (_, mask) = segment_image(&img.pixels, &detector, &extractor, &cfg).map_err(err)?;
        let truth = ground_truth_mask(img).map_err(err)?;
        ious.push(mask.upsample().iou(&truth).map_err(err)?);
    }
    ious.sort_by(f64::total_cmp);
    let median = ious[ious.len() / 2];
    ensure!(
        median >= 0.8,
        "median IoU {median:.3} over {} held-out images",
        ious.len()
    );

    let pair = mean_field_sweeps(&[0.9, 0.5], &[vec![(1, 1.0)], vec![(0, 1.0)]], 1.0, 1);
    let expected = logistic(0.8);
    ensure!(
        (pair[1] - expected).abs() <= 1e-9,
        "two-patch sweep gives {} against {expected}",
        pair[1]
    );
    Ok(format!(
        "zero coupling bit-identical on 10 images, median IoU {median:.3} over {} held-out images, \
         two-patch sweep {:.12}",
        ious.len(),
        pair[1]
    ))
}

/// Two tigers, two leopards, a few empty frames and short training runs.
const SMALL_CONFIG: &str = r#"
seeds = 2

[detector]
epochs = 30

[head]
epochs = 60

[corpus.synth]
negatives = 40
species = [
  { species = "tiger", individuals = 2, images_per_individual = 20 },
  { species = "leopard", individuals = 2, images_per_individual = 20 },
]
"#;

fn camtrap(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_camtrap"))
        .current_dir(dir)
        .env_remove("CAMTRAP_OUT")
        .args(args)
        .output()
        .map_err(err)?;
    ensure!(
        out.status.success(),
        "`camtrap {}` failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr).trim()
    );
    Ok(())
}

fn tree(root: &Path) -> Result<BTreeMap<PathBuf, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).map_err(err)? {
            let path = entry.map_err(err)?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = std::fs::read(&path).map_err(err)?;
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), bytes);
            }
        }
    }
    Ok(out)
}

fn same_tree(a: &Path, b: &Path) -> Result<usize, String> {
    let (ta, tb) = (tree(a)?, tree(b)?);
    ensure!(!ta.is_empty(), "{} is empty", a.display());
    ensure!(
        ta.keys().eq(tb.keys()),
        "{} and {} hold different files",
        a.display(),
        b.display()
    );
    for (name, bytes) in &ta {
        ensure!(
            bytes == &tb[name],
            "{} differs between {} and {}",
            name.display(),
            a.display(),
            b.display()
        );
    }
    Ok(ta.len())
}

/// Every subcommand twice into fresh directories, then every threaded
/// subcommand at four workers against one.
fn cli_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(err)?;
    let p = dir.path();
    std::fs::write(p.join("small.toml"), SMALL_CONFIG).map_err(err)?;
    camtrap(p, &["synth", "--config", "small.toml", "--out", "corpus"])?;
    camtrap(
        p,
        &[
            "train-species",
            "--config",
            "small.toml",
            "--manifest",
            "corpus/manifest.csv",
            "--out",
            "scored",
        ],
    )?;
    let m = "corpus/manifest.csv";
    let common = ["--config", "small.toml", "--manifest", m, "--seed", "3"];
    let with = |head: &[&'static str], tail: &[&'static str]| -> Vec<&'static str> {
        head.iter().chain(tail).copied().collect()
    };
    let runs: Vec<Vec<&str>> = vec![
        vec!["synth", "--config", "small.toml", "--seed", "5"],
        vec![
            "split",
            "--manifest",
            m,
            "--stratify",
            "species",
            "--seed",
            "2",
        ],
        with(&["train-detect"], &common),
        with(&["train-species"], &common),
        with(&["train-individual", "--balance"], &common),
        with(&["segment", "--train-images", "10"], &common),
        vec![
            "eval",
            "--pred",
            "scored/predictions.csv",
            "--truth",
            "scored/truth.csv",
        ],
        vec![
            "experiment",
            "individual",
            "--config",
            "small.toml",
            "--seed",
            "4",
        ],
    ];
    let mut files = 0;
    for (k, args) in runs.iter().enumerate() {
        let name = args[0];
        let dirs = [format!("rerun{k}a"), format!("rerun{k}b")];
        for d in &dirs {
            let mut full = args.clone();
            full.extend(["--out", d]);
            camtrap(p, &full)?;
        }
        files += same_tree(&p.join(&dirs[0]), &p.join(&dirs[1]))
            .map_err(|e| format!("{name} rerun: {e}"))?;
    }
    let mut threaded = 0;
    for (k, args) in runs.iter().enumerate() {
        if matches!(args[0], "split" | "eval") {
            continue;
        }
        let d = format!("jobs{k}");
        let mut full = args.clone();
        full.extend(["--jobs", "4", "--out", &d]);
        camtrap(p, &full)?;
        same_tree(&p.join(format!("rerun{k}a")), &p.join(&d))
            .map_err(|e| format!("{} at 4 workers: {e}", args[0]))?;
        threaded += 1;
    }
    Ok(format!(
        "{} subcommands rerun identically ({files} files), {threaded} match at 4 workers",
        runs.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("printed confusion matrix", printed_matrix),
        ("metric oracle", metric_oracle),
        ("aggregation oracle", aggregation_oracle),
        ("softmax structure", softmax_structure),
        ("gradient checks", gradients),
        ("svm optimality", svm),
        ("end to end", end_to_end),
        ("trends over ten seeds", trends),
        ("segmentation", segmentation),
        ("cli determinism", cli_determinism),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(summary) => println!("PASS {:>2} {name}: {summary} ({secs:.2} s)", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} ({secs:.2} s)", k + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
