use std::collections::HashMap;

use rayon::prelude::*;

use crate::corpus::{ImageRecord, Manifest};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::features::{Extractor, RegionFeatures};
use crate::image::RgbImage;
use crate::synth::generate_corpus;

use super::config::{CorpusSource, ExperimentConfig};

/// A corpus with proposal features computed once for every image.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub dataset: Dataset,
    pub extractor: Extractor,
    /// Parallel to the dataset; the last row of each is the full image.
    pub features: Vec<RegionFeatures>,
    index: HashMap<String, usize>,
}

pub fn load_dataset(source: &CorpusSource) -> Result<Dataset> {
    match source {
        CorpusSource::Synth(cfg) => Ok(Dataset::from_synth(&generate_corpus(cfg)?)),
        CorpusSource::Manifest(path) => Dataset::load(path),
    }
}

/// Proposal features for every image, computed in parallel.
pub fn proposal_features(
    images: &[RgbImage],
    extractor: &Extractor,
) -> Result<Vec<RegionFeatures>> {
    images
        .par_iter()
        .map(|img| extractor.proposal_features(img))
        .collect()
}

impl Workspace {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        Workspace::new(load_dataset(&cfg.corpus)?, cfg.features.extractor()?)
    }

    pub fn new(dataset: Dataset, extractor: Extractor) -> Result<Self> {
        let features = proposal_features(&dataset.images, &extractor)?;
        let index = dataset
            .manifest
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id.clone(), i))
            .collect();
        Ok(Workspace {
            dataset,
            extractor,
            features,
            index,
        })
    }

    pub fn manifest(&self) -> &Manifest {
        &self.dataset.manifest
    }

    pub fn record(&self, i: usize) -> &ImageRecord {
        &self.dataset.manifest.records()[i]
    }

    pub fn position(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownLabel(id.to_string()))
    }

    /// Dataset positions of the records of `m`, in `m` order.
    pub fn positions(&self, m: &Manifest) -> Result<Vec<usize>> {
        m.iter().map(|r| self.position(&r.id)).collect()
    }

    pub fn positions_of<S: AsRef<str>>(&self, ids: &[S]) -> Result<Vec<usize>> {
        ids.iter().map(|id| self.position(id.as_ref())).collect()
    }

    /// Image-level feature: the full-image proposal row.
    pub fn image_feature(&self, i: usize) -> Vec<f64> {
        let rf = &self.features[i];
        rf.row(rf.len() - 1)
    }
}
