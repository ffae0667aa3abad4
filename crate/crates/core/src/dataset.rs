//! A manifest together with its decoded pixels and optional animal boxes.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rayon::prelude::*;

use crate::corpus::Manifest;
use crate::error::{Error, Result};
use crate::features::Region;
use crate::image::RgbImage;
use crate::synth::{SynthCorpus, BOXES_FILE};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    /// Parallel to `manifest.records()`.
    pub images: Vec<RgbImage>,
    /// Parallel to `manifest.records()`; `None` where no box is known.
    pub boxes: Vec<Option<Region>>,
}

impl Dataset {
    pub fn new(
        manifest: Manifest,
        images: Vec<RgbImage>,
        boxes: Vec<Option<Region>>,
    ) -> Result<Self> {
        if images.len() != manifest.len() || boxes.len() != manifest.len() {
            return Err(Error::DimensionMismatch {
                expected: manifest.len(),
                actual: images.len().min(boxes.len()),
            });
        }
        for (r, img) in manifest.iter().zip(&images) {
            if (img.width(), img.height()) != (r.width as usize, r.height as usize) {
                return Err(Error::InvalidRecord {
                    id: r.id.clone(),
                    reason: format!(
                        "manifest says {}x{}, image is {}x{}",
                        r.width,
                        r.height,
                        img.width(),
                        img.height()
                    ),
                });
            }
        }
        Ok(Dataset {
            manifest,
            images,
            boxes,
        })
    }

    pub fn from_synth(corpus: &SynthCorpus) -> Self {
        Dataset {
            manifest: corpus.manifest.clone(),
            images: corpus.pixels(),
            boxes: corpus.boxes(),
        }
    }

    /// Loads a manifest and its images (paths relative to the manifest's
    /// directory). A `boxes.csv` next to the manifest is read if present.
    pub fn load(manifest_path: impl AsRef<Path>) -> Result<Self> {
        let manifest_path = manifest_path.as_ref();
        let manifest = Manifest::load(manifest_path)?;
        let root = manifest_path.parent().unwrap_or(Path::new("."));
        let images = manifest
            .records()
            .par_iter()
            .map(|r| RgbImage::load_ppm(root.join(&r.path)))
            .collect::<Result<Vec<_>>>()?;
        let boxes_path = root.join(BOXES_FILE);
        let known = if boxes_path.exists() {
            load_boxes(&boxes_path)?
        } else {
            BTreeMap::new()
        };
        let boxes = manifest.iter().map(|r| known.get(&r.id).copied()).collect();
        Dataset::new(manifest, images, boxes)
    }

    pub fn len(&self) -> usize {
        self.manifest.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.is_empty()
    }

    /// Restricts to the records of `subset`, in `subset` order.
    pub fn select(&self, subset: &Manifest) -> Result<Dataset> {
        let index: HashMap<&str, usize> = self
            .manifest
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id.as_str(), i))
            .collect();
        let mut images = Vec::with_capacity(subset.len());
        let mut boxes = Vec::with_capacity(subset.len());
        for r in subset.iter() {
            let &i = index
                .get(r.id.as_str())
                .ok_or_else(|| Error::UnknownLabel(r.id.clone()))?;
            images.push(self.images[i].clone());
            boxes.push(self.boxes[i]);
        }
        Ok(Dataset {
            manifest: subset.clone(),
            images,
            boxes,
        })
    }
}

/// Reads an `id,x0,y0,x1,y1` box file.
pub fn load_boxes(path: impl AsRef<Path>) -> Result<BTreeMap<String, Region>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for row in reader.deserialize::<(String, usize, usize, usize, usize)>() {
        let (id, x0, y0, x1, y1) =
            row.map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
        if x0 >= x1 || y0 >= y1 {
            return Err(Error::InvalidRecord {
                id,
                reason: "empty box".into(),
            });
        }
        out.insert(id, Region { x0, y0, x1, y1 });
    }
    Ok(out)
}
