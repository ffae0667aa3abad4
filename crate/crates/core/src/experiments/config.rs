use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Species;
use crate::error::{Error, Result};
use crate::features::{ConvNetParams, Extractor, ProposalGrid, PyramidConfig};
use crate::segmentation::SegmentationConfig;
use crate::svm::SvmTrainConfig;
use crate::synth::{SpeciesSpec, SynthConfig};
use crate::wsddn::{AggregationConfig, HeadTrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Detector metrics as the corpus is subsampled.
    Volume,
    /// Detector metrics as the training pool shrinks against a fixed test set.
    Proportion,
    /// Detector metrics across train/test ratios.
    Split,
    /// Detector trained and tested on daylight, night and mixed images.
    Illumination,
    /// Gated, direct and region-scoring species classifiers side by side.
    Species,
    /// Individual recognition under balancing and segmentation variants.
    Individual,
    /// One classifier over the individuals of two species.
    Joint,
}

impl Protocol {
    pub const ALL: [Protocol; 7] = [
        Protocol::Volume,
        Protocol::Proportion,
        Protocol::Split,
        Protocol::Illumination,
        Protocol::Species,
        Protocol::Individual,
        Protocol::Joint,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Volume => "volume",
            Protocol::Proportion => "proportion",
            Protocol::Split => "split",
            Protocol::Illumination => "illumination",
            Protocol::Species => "species",
            Protocol::Individual => "individual",
            Protocol::Joint => "joint",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| {
                let known: Vec<&str> = Protocol::ALL.iter().map(|p| p.as_str()).collect();
                Error::invalid(format!(
                    "unknown protocol `{s}` (expected one of {})",
                    known.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusSource {
    Synth(SynthConfig),
    /// Manifest CSV; images and an optional `boxes.csv` sit beside it.
    Manifest(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    /// Seed of the convolutional stack's initialisation.
    pub seed: u64,
    pub pyramid: Vec<usize>,
    pub proposals: ProposalGrid,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            seed: 0,
            pyramid: PyramidConfig::default().levels,
            proposals: ProposalGrid::default(),
        }
    }
}

impl FeatureConfig {
    pub fn extractor(&self) -> Result<Extractor> {
        Extractor::new(
            ConvNetParams::default_net(self.seed),
            PyramidConfig::new(self.pyramid.clone())?,
            self.proposals.clone(),
        )
    }
}

/// Detector settings. Defaults use a smaller λ and more epochs than the
/// library's `SvmTrainConfig`: with λ = 1e-3 the final Pegasos iterate is
/// noisy enough to make volume sweeps non-monotone at desk scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub lambda: f64,
    pub epochs: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            lambda: 1e-4,
            epochs: 300,
        }
    }
}

impl DetectorConfig {
    pub fn with_seed(&self, seed: u64) -> SvmTrainConfig {
        SvmTrainConfig {
            epochs: self.epochs,
            lambda: self.lambda,
            seed,
        }
    }
}

/// Region-scoring head settings. Defaults differ from the library's
/// `HeadTrainConfig` and `AggregationConfig`: pooled features are unit-norm
/// and gradients are averaged over images, so a larger step and more epochs
/// are needed to converge, and the synthetic proposal grid has only 14
/// regions, so K = 30 would degenerate to a plain column mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeadConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    /// Regions averaged by top-K aggregation at inference.
    pub top_k: usize,
}

impl Default for HeadConfig {
    fn default() -> Self {
        HeadConfig {
            epochs: 2000,
            learning_rate: 8.0,
            l2: HeadTrainConfig::default().l2,
            top_k: 6,
        }
    }
}

impl HeadConfig {
    pub fn with_seed(&self, seed: u64) -> HeadTrainConfig {
        HeadTrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            seed,
            l2: self.l2,
        }
    }

    pub fn aggregation(&self) -> AggregationConfig {
        AggregationConfig { k: self.top_k }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndividualGroup {
    /// Individuals of the striped species.
    Tigerlike,
    /// Individuals of the spotted species.
    Leopardlike,
    /// Both together.
    Joint,
}

impl IndividualGroup {
    pub fn as_str(self) -> &'static str {
        match self {
            IndividualGroup::Tigerlike => "tigerlike",
            IndividualGroup::Leopardlike => "leopardlike",
            IndividualGroup::Joint => "joint",
        }
    }

    pub fn contains(self, species: Species) -> bool {
        match self {
            IndividualGroup::Tigerlike => species == Species::Tiger,
            IndividualGroup::Leopardlike => species == Species::Leopard,
            IndividualGroup::Joint => species.has_individuals(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IndividualConfig {
    /// Balancing settings to run (`true` = downsample training to the
    /// smallest individual).
    pub balance: Vec<bool>,
    /// Segmentation settings to run (`true` = train on masked images).
    pub segment: Vec<bool>,
    pub groups: Vec<IndividualGroup>,
    /// Numbers of individuals for the recognition-vs-population curve, drawn
    /// in label order from the joint group. Empty disables the curve.
    pub curve: Vec<usize>,
    /// Cap on training images used to fit the patch detector for masking.
    pub mask_training_images: usize,
}

impl Default for IndividualConfig {
    fn default() -> Self {
        IndividualConfig {
            balance: vec![true, false],
            segment: vec![false, true],
            groups: vec![
                IndividualGroup::Tigerlike,
                IndividualGroup::Leopardlike,
                IndividualGroup::Joint,
            ],
            curve: vec![2, 4, 6, 8],
            mask_training_images: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub protocol: Protocol,
    /// Trial `i` uses seed `base_seed + i`.
    pub base_seed: u64,
    pub seeds: usize,
    pub train_fraction: f64,
    /// Corpus fractions for the volume sweep.
    #[serde(default)]
    pub fractions: Vec<f64>,
    /// Training-pool fractions for the proportion sweep.
    #[serde(default)]
    pub proportions: Vec<f64>,
    /// Train fractions for the split sweep.
    #[serde(default)]
    pub split_ratios: Vec<f64>,
    #[serde(default)]
    pub features: FeatureConfig,
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default)]
    pub head: HeadConfig,
    #[serde(default)]
    pub individual: IndividualConfig,
    #[serde(default)]
    pub segmentation: SegmentationConfig,
    pub corpus: CorpusSource,
    /// Where reports go; not part of the recorded configuration.
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

/// Synthetic animal boxes lie on an 8-pixel lattice and span only a few
/// 16-pixel patches, so the desk-scale default uses 8-pixel patches and a
/// one-patch spatial bandwidth.
pub fn desk_segmentation() -> SegmentationConfig {
    let mut s = SegmentationConfig {
        patch_size: 8,
        ..SegmentationConfig::default()
    };
    s.pairwise.theta_pos = 1.0;
    s
}

impl ExperimentConfig {
    /// Defaults for `protocol`, including a synthetic corpus suited to it.
    pub fn default_for(protocol: Protocol) -> Self {
        let corpus = match protocol {
            Protocol::Individual => SynthConfig {
                species: vec![
                    skewed(Species::Tiger, &[80, 20, 20, 20]),
                    skewed(Species::Leopard, &[80, 20, 20, 20]),
                ],
                negatives: 0,
                ..SynthConfig::default()
            },
            Protocol::Joint => SynthConfig {
                species: vec![
                    SpeciesSpec::new(Species::Tiger, 3, 30),
                    SpeciesSpec::new(Species::Leopard, 21, 30),
                ],
                negatives: 0,
                ..SynthConfig::default()
            },
            _ => SynthConfig::default(),
        };
        ExperimentConfig {
            protocol,
            base_seed: 0,
            seeds: 10,
            train_fraction: 0.7,
            fractions: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            proportions: vec![0.2, 0.4, 0.6, 0.8],
            split_ratios: vec![0.5, 0.6, 0.7, 0.8, 0.9],
            features: FeatureConfig::default(),
            detector: DetectorConfig::default(),
            head: HeadConfig::default(),
            individual: IndividualConfig::default(),
            segmentation: desk_segmentation(),
            corpus: CorpusSource::Synth(corpus),
            output_dir: None,
        }
    }

    pub fn trial_seeds(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|i| self.base_seed + i).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: &[f64], closed: bool| -> Result<()> {
            for &f in v {
                let ok = f > 0.0 && (f < 1.0 || (closed && f == 1.0));
                if !ok {
                    let range = if closed { "(0, 1]" } else { "(0, 1)" };
                    return Err(Error::invalid(format!(
                        "{name} must lie in {range}, got {f}"
                    )));
                }
            }
            Ok(())
        };
        if self.seeds == 0 {
            return Err(Error::invalid("at least one seed is required"));
        }
        unit("train_fraction", &[self.train_fraction], false)?;
        unit("fractions", &self.fractions, true)?;
        unit("proportions", &self.proportions, true)?;
        unit("split_ratios", &self.split_ratios, false)?;
        let sweep = match self.protocol {
            Protocol::Volume => Some(("fractions", &self.fractions)),
            Protocol::Proportion => Some(("proportions", &self.proportions)),
            Protocol::Split => Some(("split_ratios", &self.split_ratios)),
            _ => None,
        };
        if let Some((name, v)) = sweep {
            if v.is_empty() {
                return Err(Error::invalid(format!("{name} must not be empty")));
            }
        }
        if self.head.top_k == 0 {
            return Err(Error::invalid("head.top_k must be at least 1"));
        }
        if self.detector.epochs == 0 || self.detector.lambda.is_nan() || self.detector.lambda <= 0.0
        {
            return Err(Error::invalid("detector needs epochs ≥ 1 and lambda > 0"));
        }
        if self.protocol == Protocol::Individual {
            let ic = &self.individual;
            if ic.balance.is_empty() || ic.segment.is_empty() || ic.groups.is_empty() {
                return Err(Error::invalid(
                    "individual study needs balance, segment and groups settings",
                ));
            }
        }
        PyramidConfig::new(self.features.pyramid.clone())?;
        if let CorpusSource::Synth(s) = &self.corpus {
            s.validate()?;
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::format(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::format(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// `default_for(protocol)` overlaid with whatever keys `text` sets.
    /// Tables merge key by key; arrays and scalars replace. A `corpus` table
    /// naming a different source replaces the default source outright. The
    /// protocol is always `protocol`.
    pub fn from_partial_toml(protocol: Protocol, text: &str) -> Result<Self> {
        let bad = |e: &dyn fmt::Display| Error::format(e.to_string());
        let mut base = toml::Table::try_from(Self::default_for(protocol)).map_err(|e| bad(&e))?;
        let mut overlay: toml::Table = toml::from_str(text).map_err(|e| bad(&e))?;
        overlay.remove("protocol");
        if let (Some(toml::Value::Table(new)), Some(toml::Value::Table(old))) =
            (overlay.get("corpus"), base.get("corpus"))
        {
            if !new.keys().all(|k| old.contains_key(k)) {
                base.remove("corpus");
            }
        }
        merge_tables(&mut base, overlay);
        base.try_into().map_err(|e| bad(&e))
    }

    pub fn load_partial(protocol: Protocol, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_partial_toml(protocol, &text)
    }
}

fn merge_tables(base: &mut toml::Table, overlay: toml::Table) {
    for (key, value) in overlay {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge_tables(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

fn skewed(species: Species, counts: &[usize]) -> SpeciesSpec {
    SpeciesSpec {
        image_counts: counts.to_vec(),
        ..SpeciesSpec::new(species, counts.len(), 0)
    }
}
