//! Seeded replications of the detection, species and individual protocols.
//!
//! Every protocol is a pure function of the corpus and the configuration:
//! trial `i` uses seed `base_seed + i`, trials may run in parallel, and
//! results are assembled in trial order, so reports are bytewise identical
//! for any thread count.

mod config;
mod detection;
mod recognition;
mod report;
mod workspace;

use std::path::{Path, PathBuf};

pub use config::{
    desk_segmentation, CorpusSource, DetectorConfig, ExperimentConfig, FeatureConfig, HeadConfig,
    IndividualConfig, IndividualGroup, Protocol,
};
pub use detection::{
    detection_trial, evaluate_detector, run_illumination_study, run_proportion_sweep,
    run_split_sweep, run_volume_sweep, split_and_detect, train_detector, Condition,
    ConditionResult, DetectionOutcome, IlluminationReport, SweepReport, SweepTrial,
    DETECTION_CLASSES,
};
pub use recognition::{
    fit_head, head_rankings, run_individual_study, run_joint_individuals, run_species_comparison,
    species_classes, CurvePoint, IndividualReport, IndividualTrial, IndividualVariant, JointReport,
    JointRow, SpeciesReport, SpeciesTrial, VariantResult, SPECIES_VARIANTS,
};
pub use report::{summarize, write_outputs, OutputFile, Summary, Table, RUN_MANIFEST};
pub use workspace::{load_dataset, proposal_features, Workspace};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Report {
    Sweep(SweepReport),
    Illumination(IlluminationReport),
    Species(SpeciesReport),
    Individual(IndividualReport),
    Joint(JointReport),
}

impl Report {
    pub fn outputs(&self) -> Vec<OutputFile> {
        match self {
            Report::Sweep(r) => r.tables().iter().map(OutputFile::from).collect(),
            Report::Illumination(r) => r.tables().iter().map(OutputFile::from).collect(),
            Report::Species(r) => r.outputs(),
            Report::Individual(r) => r.outputs(),
            Report::Joint(r) => r.outputs(),
        }
    }
}

/// Runs `cfg.protocol` on a prepared workspace.
pub fn run_on(ws: &Workspace, cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    Ok(match cfg.protocol {
        Protocol::Volume => Report::Sweep(run_volume_sweep(ws, cfg)?),
        Protocol::Proportion => Report::Sweep(run_proportion_sweep(ws, cfg)?),
        Protocol::Split => Report::Sweep(run_split_sweep(ws, cfg)?),
        Protocol::Illumination => Report::Illumination(run_illumination_study(ws, cfg)?),
        Protocol::Species => Report::Species(run_species_comparison(ws, cfg)?),
        Protocol::Individual => Report::Individual(run_individual_study(ws, cfg)?),
        Protocol::Joint => Report::Joint(run_joint_individuals(ws, cfg)?),
    })
}

/// Builds the corpus and features, then runs the protocol on at most `jobs`
/// threads.
pub fn run(cfg: &ExperimentConfig, jobs: usize) -> Result<Report> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker threads: {e}")))?;
    pool.install(|| {
        let ws = Workspace::build(cfg)?;
        run_on(&ws, cfg)
    })
}

/// Writes the report's CSV files and `run.toml` into `dir`.
pub fn write_report(
    dir: impl AsRef<Path>,
    cfg: &ExperimentConfig,
    report: &Report,
) -> Result<PathBuf> {
    write_outputs(dir.as_ref(), cfg, &report.outputs())
}
