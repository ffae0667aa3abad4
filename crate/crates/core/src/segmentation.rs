//! Patch-level animal masks.
//!
//! A linear detector scores every patch of a regular grid; its probabilities
//! are the unary term of a binary Potts model whose pairwise kernel couples
//! patches that are close in position and similar in mean colour. A fixed
//! number of synchronous mean-field sweeps refines the field, which is then
//! thresholded into a mask.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Extractor, Region};
use crate::image::RgbImage;
use crate::svm::{logistic, train_linear_svm, LinearModel, SvmTrainConfig};

/// Square patches tiling an image; the last row and column are clipped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchGrid {
    pub patch_size: usize,
    pub width: usize,
    pub height: usize,
    pub cols: usize,
    pub rows: usize,
}

impl PatchGrid {
    pub fn new(width: usize, height: usize, patch_size: usize) -> Result<Self> {
        if patch_size < 4 {
            return Err(Error::invalid("patch size must be at least 4"));
        }
        if width == 0 || height == 0 {
            return Err(Error::invalid("image must be non-empty"));
        }
        Ok(PatchGrid {
            patch_size,
            width,
            height,
            cols: width.div_ceil(patch_size),
            rows: height.div_ceil(patch_size),
        })
    }

    pub fn for_image(image: &RgbImage, patch_size: usize) -> Result<Self> {
        Self::new(image.width(), image.height(), patch_size)
    }

    pub fn len(&self) -> usize {
        self.cols * self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major patch index to pixel region.
    pub fn region(&self, i: usize) -> Region {
        let (r, c) = (i / self.cols, i % self.cols);
        let p = self.patch_size;
        Region {
            x0: c * p,
            y0: r * p,
            x1: ((c + 1) * p).min(self.width),
            y1: ((r + 1) * p).min(self.height),
        }
    }

    pub fn regions(&self) -> Vec<Region> {
        (0..self.len()).map(|i| self.region(i)).collect()
    }

    /// Patch containing pixel `(x, y)`.
    pub fn patch_at(&self, x: usize, y: usize) -> usize {
        (y / self.patch_size) * self.cols + x / self.patch_size
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairwiseParams {
    /// Coupling weight `w ≥ 0`.
    pub weight: f64,
    /// Spatial bandwidth, in patches.
    pub theta_pos: f64,
    /// Colour bandwidth, in intensity units.
    pub theta_color: f64,
    pub iterations: usize,
}

impl Default for PairwiseParams {
    fn default() -> Self {
        PairwiseParams {
            weight: 2.0,
            theta_pos: 2.0,
            theta_color: 0.15,
            iterations: 5,
        }
    }
}

/// Per-patch foreground probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbField {
    pub grid: PatchGrid,
    pub probs: Vec<f64>,
}

/// Per-patch foreground labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub grid: PatchGrid,
    pub labels: Vec<bool>,
}

/// Per-pixel foreground labels, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelMask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn area(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    /// Nearest-neighbour upsampling: each pixel takes its patch's label.
    pub fn upsample(&self) -> PixelMask {
        let g = &self.grid;
        let mut data = Vec::with_capacity(g.width * g.height);
        for y in 0..g.height {
            for x in 0..g.width {
                data.push(self.labels[g.patch_at(x, y)]);
            }
        }
        PixelMask {
            width: g.width,
            height: g.height,
            data,
        }
    }
}

impl PixelMask {
    pub fn empty(width: usize, height: usize) -> Self {
        PixelMask {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn from_region(width: usize, height: usize, region: &Region) -> Self {
        let mut m = Self::empty(width, height);
        for y in region.y0..region.y1.min(height) {
            for x in region.x0..region.x1.min(width) {
                m.data[y * width + x] = true;
            }
        }
        m
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn area(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    /// Intersection over union; two empty masks have IoU 1.
    pub fn iou(&self, other: &PixelMask) -> Result<f64> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(Error::invalid("mask sizes differ"));
        }
        let (mut inter, mut union) = (0usize, 0usize);
        for (&a, &b) in self.data.iter().zip(&other.data) {
            inter += (a && b) as usize;
            union += (a || b) as usize;
        }
        Ok(if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        })
    }

    /// Binary PBM (P4); foreground pixels are written as 1 (black).
    pub fn write_pbm(&self, mut w: impl Write) -> std::io::Result<()> {
        write!(w, "P4\n{} {}\n", self.width, self.height)?;
        let row_bytes = self.width.div_ceil(8);
        for y in 0..self.height {
            let mut row = vec![0u8; row_bytes];
            for x in 0..self.width {
                if self.get(x, y) {
                    row[x / 8] |= 0x80 >> (x % 8);
                }
            }
            w.write_all(&row)?;
        }
        Ok(())
    }

    pub fn read_pbm(r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        let mut r = r;
        r.read_to_end(&mut bytes)
            .map_err(|e| Error::format(e.to_string()))?;
        let mut pos = 0;
        let mut token = || -> Result<String> {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(Error::format("truncated PBM header"));
            }
            let t = String::from_utf8_lossy(&bytes[start..pos]).into_owned();
            pos += 1;
            Ok(t)
        };
        if token()? != "P4" {
            return Err(Error::format("not a binary PBM"));
        }
        let width: usize = token()?
            .parse()
            .map_err(|_| Error::format("bad PBM width"))?;
        let height: usize = token()?
            .parse()
            .map_err(|_| Error::format("bad PBM height"))?;
        let row_bytes = width.div_ceil(8);
        let body = &bytes[pos.min(bytes.len())..];
        if body.len() < row_bytes * height {
            return Err(Error::format("truncated PBM data"));
        }
        let mut m = PixelMask::empty(width, height);
        for y in 0..height {
            for x in 0..width {
                m.data[y * width + x] = body[y * row_bytes + x / 8] & (0x80 >> (x % 8)) != 0;
            }
        }
        Ok(m)
    }

    pub fn save_pbm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_pbm(&mut buf).map_err(|e| Error::io(path, e))?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }
}

/// Detector probabilities for every patch, each patch pooled as one region
/// of the full-image feature map.
pub fn compute_unary(
    image: &RgbImage,
    grid: &PatchGrid,
    detector: &LinearModel,
    extractor: &Extractor,
    scale: f64,
) -> Result<ProbField> {
    if (grid.width, grid.height) != (image.width(), image.height()) {
        return Err(Error::invalid("patch grid does not match the image"));
    }
    let rf = extractor.region_features(image, &grid.regions())?;
    let probs = rf
        .matrix
        .rows()
        .into_iter()
        .map(|row| detector.margin_to_probability(row.as_slice().expect("standard layout"), scale))
        .collect::<Result<Vec<_>>>()?;
    Ok(ProbField { grid: *grid, probs })
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}

/// Sparse symmetric kernel: for each patch, `(j, k(i, j))` for every other
/// patch within `3 θ_pos` (patch units).
pub fn pairwise_kernel(
    image: &RgbImage,
    grid: &PatchGrid,
    pp: &PairwiseParams,
) -> Vec<Vec<(usize, f64)>> {
    let colors: Vec<[f64; 3]> = grid
        .regions()
        .iter()
        .map(|r| image.mean_color(r.x0, r.y0, r.x1, r.y1))
        .collect();
    let reach = 3.0 * pp.theta_pos;
    let span = reach.floor() as isize;
    let mut kernel = vec![Vec::new(); grid.len()];
    for i in 0..grid.len() {
        let (ri, ci) = ((i / grid.cols) as isize, (i % grid.cols) as isize);
        for dr in -span..=span {
            for dc in -span..=span {
                let (r, c) = (ri + dr, ci + dc);
                if (dr, dc) == (0, 0)
                    || r < 0
                    || c < 0
                    || r >= grid.rows as isize
                    || c >= grid.cols as isize
                {
                    continue;
                }
                let d2 = (dr * dr + dc * dc) as f64;
                if d2.sqrt() > reach {
                    continue;
                }
                let j = r as usize * grid.cols + c as usize;
                let dc2: f64 = (0..3).map(|k| (colors[i][k] - colors[j][k]).powi(2)).sum();
                let k = (-d2 / (2.0 * pp.theta_pos * pp.theta_pos)
                    - dc2 / (2.0 * pp.theta_color * pp.theta_color))
                    .exp();
                kernel[i].push((j, k));
            }
        }
    }
    kernel
}

/// Synchronous binary mean-field sweeps:
/// `q_i ← σ(logit(u_i) + w Σ_j k(i,j)(2 q_j − 1))`, starting from `q = u`.
pub fn mean_field_sweeps(
    unary: &[f64],
    kernel: &[Vec<(usize, f64)>],
    weight: f64,
    iterations: usize,
) -> Vec<f64> {
    if weight == 0.0 || iterations == 0 {
        return unary.to_vec();
    }
    let bias: Vec<f64> = unary.iter().map(|&u| logit(u)).collect();
    let mut q = unary.to_vec();
    for _ in 0..iterations {
        q = (0..q.len())
            .map(|i| {
                let msg: f64 = kernel[i].iter().map(|&(j, k)| k * (2.0 * q[j] - 1.0)).sum();
                logistic(bias[i] + weight * msg)
            })
            .collect();
    }
    q
}

pub fn refine_mean_field(
    unary: &ProbField,
    image: &RgbImage,
    pp: &PairwiseParams,
) -> Result<ProbField> {
    if !(pp.theta_pos > 0.0 && pp.theta_color > 0.0) || pp.weight < 0.0 {
        return Err(Error::invalid(
            "bandwidths must be positive and the weight non-negative",
        ));
    }
    let grid = &unary.grid;
    if (grid.width, grid.height) != (image.width(), image.height()) {
        return Err(Error::invalid("probability field does not match the image"));
    }
    if pp.weight == 0.0 {
        return Ok(unary.clone());
    }
    let kernel = pairwise_kernel(image, grid, pp);
    Ok(ProbField {
        grid: *grid,
        probs: mean_field_sweeps(&unary.probs, &kernel, pp.weight, pp.iterations),
    })
}

/// Foreground iff probability ≥ `tau`.
pub fn threshold_mask(pf: &ProbField, tau: f64) -> Result<Mask> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::invalid(format!(
            "threshold must lie in (0, 1), got {tau}"
        )));
    }
    Ok(Mask {
        grid: pf.grid,
        labels: pf.probs.iter().map(|&p| p >= tau).collect(),
    })
}

/// Background pixels become mid-grey; foreground pixels are untouched.
pub fn apply_mask(image: &RgbImage, mask: &PixelMask) -> Result<RgbImage> {
    if (mask.width, mask.height) != (image.width(), image.height()) {
        return Err(Error::invalid(format!(
            "mask {}x{} does not match image {}x{}",
            mask.width,
            mask.height,
            image.width(),
            image.height()
        )));
    }
    let mut out = image.clone();
    for y in 0..image.height() {
        for x in 0..image.width() {
            if !mask.get(x, y) {
                out.set_pixel(x, y, [0.5; 3]);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentationConfig {
    pub patch_size: usize,
    pub pairwise: PairwiseParams,
    pub threshold: f64,
    /// Multiplier applied to detector margins before the logistic.
    pub probability_scale: f64,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        SegmentationConfig {
            patch_size: 16,
            pairwise: PairwiseParams::default(),
            threshold: 0.5,
            probability_scale: 1.0,
        }
    }
}

/// A patch counts as foreground for detector training when at least half of
/// it lies inside the animal box.
pub fn patch_labels(grid: &PatchGrid, animal: Option<&Region>) -> Vec<f64> {
    grid.regions()
        .iter()
        .map(|r| match animal {
            Some(b) if 2 * r.intersection_area(b) >= r.area() => 1.0,
            _ => -1.0,
        })
        .collect()
}

/// Trains the patch-level detector from images with known animal boxes.
pub fn train_patch_detector(
    samples: &[(&RgbImage, Option<Region>)],
    patch_size: usize,
    extractor: &Extractor,
    cfg: &SvmTrainConfig,
) -> Result<LinearModel> {
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (image, animal) in samples {
        let grid = PatchGrid::for_image(image, patch_size)?;
        let rf = extractor.region_features(image, &grid.regions())?;
        for (row, y) in rf
            .matrix
            .rows()
            .into_iter()
            .zip(patch_labels(&grid, animal.as_ref()))
        {
            features.push(row.to_vec());
            labels.push(y);
        }
    }
    Ok(train_linear_svm(&features, &labels, cfg)?.model)
}

/// Unary → mean-field → threshold for one image.
pub fn segment_image(
    image: &RgbImage,
    detector: &LinearModel,
    extractor: &Extractor,
    cfg: &SegmentationConfig,
) -> Result<(ProbField, Mask)> {
    let grid = PatchGrid::for_image(image, cfg.patch_size)?;
    let unary = compute_unary(image, &grid, detector, extractor, cfg.probability_scale)?;
    let refined = refine_mean_field(&unary, image, &cfg.pairwise)?;
    let mask = threshold_mask(&refined, cfg.threshold)?;
    Ok((refined, mask))
}
