//! Convolutional feature extraction with spatial-pyramid pooling over
//! rectangular regions.
//!
//! The extractor is a small stack of `3×3 conv → ReLU → 2×2 max-pool` layers
//! with Glorot-uniform weights. A region of the input image is mapped onto the
//! final feature map, split into `g × g` cells for every pyramid level `g`, and
//! max-pooled per channel. Rows are L2-normalized so every region yields a
//! fixed-length unit vector (or zero) regardless of its size.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::image::RgbImage;
use crate::rng::rng_for;

pub const PARAMS_FORMAT_VERSION: u32 = 1;

/// Half-open pixel rectangle `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Region {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Region {
    /// Checked constructor for a region inside a `width × height` image.
    pub fn new(
        x0: usize,
        y0: usize,
        x1: usize,
        y1: usize,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        if x0 < x1 && x1 <= width && y0 < y1 && y1 <= height {
            Ok(Region { x0, y0, x1, y1 })
        } else {
            Err(Error::invalid(format!(
                "region [{x0},{x1})x[{y0},{y1}) is empty or outside {width}x{height}"
            )))
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Region {
            x0: 0,
            y0: 0,
            x1: width,
            y1: height,
        }
    }

    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn intersection_area(&self, other: &Region) -> usize {
        let w = self.x1.min(other.x1).saturating_sub(self.x0.max(other.x0));
        let h = self.y1.min(other.y1).saturating_sub(self.y0.max(other.y0));
        w * h
    }

    pub fn iou(&self, other: &Region) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    /// Whether a 2×2 stride-2 max-pool follows the ReLU.
    pub pool: bool,
}

impl LayerSpec {
    pub fn new(in_channels: usize, out_channels: usize) -> Self {
        LayerSpec {
            in_channels,
            out_channels,
            pool: true,
        }
    }
}

/// One 3×3 same-padding convolution. Weights are stored `[ky][kx][in][out]`
/// so the innermost loop runs over contiguous output channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub spec: LayerSpec,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvLayer {
    #[inline]
    fn w_index(&self, ky: usize, kx: usize, i: usize, o: usize) -> usize {
        ((ky * 3 + kx) * self.spec.in_channels + i) * self.spec.out_channels + o
    }

    pub fn weight(&self, o: usize, i: usize, ky: usize, kx: usize) -> f64 {
        self.weights[self.w_index(ky, kx, i, o)]
    }

    pub fn set_weight(&mut self, o: usize, i: usize, ky: usize, kx: usize, v: f64) {
        let idx = self.w_index(ky, kx, i, o);
        self.weights[idx] = v;
    }

    /// Glorot-uniform bound `sqrt(6 / (fan_in + fan_out))`.
    pub fn init_bound(spec: &LayerSpec) -> f64 {
        let fan_in = 9 * spec.in_channels;
        let fan_out = 9 * spec.out_channels;
        (6.0 / (fan_in + fan_out) as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvNetParams {
    pub layers: Vec<ConvLayer>,
    pub seed: u64,
}

/// Channel chain of the default desk-scale extractor: 3 → 8 → 16.
pub fn default_arch() -> Vec<LayerSpec> {
    vec![LayerSpec::new(3, 8), LayerSpec::new(8, 16)]
}

pub fn validate_arch(arch: &[LayerSpec]) -> Result<()> {
    if arch.is_empty() {
        return Err(Error::invalid("network needs at least one layer"));
    }
    for (k, l) in arch.iter().enumerate() {
        if l.in_channels == 0 || l.out_channels == 0 {
            return Err(Error::invalid(format!(
                "layer {k} has a zero channel count"
            )));
        }
        if k > 0 && arch[k - 1].out_channels != l.in_channels {
            return Err(Error::invalid(format!(
                "layer {k} expects {} input channels but layer {} produces {}",
                l.in_channels,
                k - 1,
                arch[k - 1].out_channels
            )));
        }
    }
    Ok(())
}

/// Glorot-uniform weights and zero biases, deterministic per seed.
pub fn init_convnet(arch: &[LayerSpec], seed: u64) -> Result<ConvNetParams> {
    validate_arch(arch)?;
    let layers = arch
        .iter()
        .enumerate()
        .map(|(k, spec)| {
            let bound = ConvLayer::init_bound(spec);
            let mut rng = rng_for(seed, &format!("convnet/layer{k}"));
            let n = 9 * spec.in_channels * spec.out_channels;
            let weights = (0..n).map(|_| rng.gen_range(-bound..=bound)).collect();
            ConvLayer {
                spec: *spec,
                weights,
                bias: vec![0.0; spec.out_channels],
            }
        })
        .collect();
    Ok(ConvNetParams { layers, seed })
}

impl ConvNetParams {
    pub fn default_net(seed: u64) -> Self {
        init_convnet(&default_arch(), seed).expect("default architecture is valid")
    }

    pub fn arch(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn in_channels(&self) -> usize {
        self.layers[0].spec.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.layers.last().map_or(0, |l| l.spec.out_channels)
    }

    /// Input pixels per feature-map cell along each axis.
    pub fn stride(&self) -> usize {
        1 << self.layers.iter().filter(|l| l.spec.pool).count()
    }

    /// SHA-256 over the architecture and the little-endian parameter bytes.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for l in &self.layers {
            h.update((l.spec.in_channels as u64).to_le_bytes());
            h.update((l.spec.out_channels as u64).to_le_bytes());
            h.update([l.spec.pool as u8]);
            for v in l.weights.iter().chain(&l.bias) {
                h.update(v.to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_toml(&self) -> Result<String> {
        let file = ParamsFile {
            format_version: PARAMS_FORMAT_VERSION,
            seed: self.seed,
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile {
                    in_channels: l.spec.in_channels,
                    out_channels: l.spec.out_channels,
                    pool: l.spec.pool,
                    weight_shape: [3, 3, l.spec.in_channels, l.spec.out_channels],
                    weights: l.weights.clone(),
                    bias: l.bias.clone(),
                })
                .collect(),
        };
        toml::to_string(&file).map_err(|e| Error::format(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ParamsFile = toml::from_str(text).map_err(|e| Error::format(e.to_string()))?;
        if file.format_version != PARAMS_FORMAT_VERSION {
            return Err(Error::format(format!(
                "unsupported network file version {}",
                file.format_version
            )));
        }
        let mut layers = Vec::with_capacity(file.layers.len());
        for (k, l) in file.layers.into_iter().enumerate() {
            let spec = LayerSpec {
                in_channels: l.in_channels,
                out_channels: l.out_channels,
                pool: l.pool,
            };
            let expected = [3, 3, l.in_channels, l.out_channels];
            if l.weight_shape != expected
                || l.weights.len() != expected.iter().product::<usize>()
                || l.bias.len() != l.out_channels
            {
                return Err(Error::format(format!(
                    "layer {k}: array shapes are inconsistent"
                )));
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(Error::format(format!("layer {k}: non-finite parameter")));
            }
            layers.push(ConvLayer {
                spec,
                weights: l.weights,
                bias: l.bias,
            });
        }
        validate_arch(&layers.iter().map(|l| l.spec).collect::<Vec<_>>())?;
        Ok(ConvNetParams {
            layers,
            seed: file.seed,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}

#[derive(Serialize, Deserialize)]
struct ParamsFile {
    format_version: u32,
    seed: u64,
    layers: Vec<LayerFile>,
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    in_channels: usize,
    out_channels: usize,
    pool: bool,
    /// `[ky, kx, in, out]`
    weight_shape: [usize; 4],
    weights: Vec<f64>,
    bias: Vec<f64>,
}

/// Height × width × channels activations, channel-interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    /// Input pixels covered by one cell along each axis.
    pub stride: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(height: usize, width: usize, channels: usize, stride: usize) -> Self {
        FeatureMap {
            height,
            width,
            channels,
            stride,
            data: vec![0.0; height * width * channels],
        }
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn at_mut(&mut self, y: usize, x: usize, c: usize) -> &mut f64 {
        &mut self.data[(y * self.width + x) * self.channels + c]
    }

    fn from_image(image: &RgbImage) -> Self {
        FeatureMap {
            height: image.height(),
            width: image.width(),
            channels: 3,
            stride: 1,
            data: image.data().to_vec(),
        }
    }
}

fn conv3x3(input: &FeatureMap, layer: &ConvLayer) -> FeatureMap {
    let (h, w) = (input.height, input.width);
    let (cin, cout) = (layer.spec.in_channels, layer.spec.out_channels);
    let mut out = FeatureMap::zeros(h, w, cout, input.stride);
    for y in 0..h {
        for x in 0..w {
            let o = (y * w + x) * cout;
            let acc = &mut out.data[o..o + cout];
            acc.copy_from_slice(&layer.bias);
            for ky in 0..3 {
                let sy = y as isize + ky as isize - 1;
                if sy < 0 || sy >= h as isize {
                    continue;
                }
                for kx in 0..3 {
                    let sx = x as isize + kx as isize - 1;
                    if sx < 0 || sx >= w as isize {
                        continue;
                    }
                    let src = (sy as usize * w + sx as usize) * cin;
                    let px = &input.data[src..src + cin];
                    let wbase = (ky * 3 + kx) * cin * cout;
                    for (i, &v) in px.iter().enumerate() {
                        if v == 0.0 {
                            continue;
                        }
                        let wrow = &layer.weights[wbase + i * cout..wbase + (i + 1) * cout];
                        for (a, &wv) in acc.iter_mut().zip(wrow) {
                            *a += v * wv;
                        }
                    }
                }
            }
        }
    }
    out
}

fn relu(map: &mut FeatureMap) {
    for v in &mut map.data {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// 2×2 stride-2 max-pool (floor). Returns the pooled map and, per output
/// value, the flat index of the winning input (first maximum in row-major
/// window order).
fn max_pool(input: &FeatureMap) -> (FeatureMap, Vec<usize>) {
    let (h, w, c) = (input.height / 2, input.width / 2, input.channels);
    let mut out = FeatureMap::zeros(h, w, c, input.stride * 2);
    let mut arg = vec![0usize; h * w * c];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut best_idx = ((2 * y) * input.width + 2 * x) * c + ch;
                let mut best = input.data[best_idx];
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = ((2 * y + dy) * input.width + 2 * x + dx) * c + ch;
                    if input.data[idx] > best {
                        best = input.data[idx];
                        best_idx = idx;
                    }
                }
                let o = (y * w + x) * c + ch;
                out.data[o] = best;
                arg[o] = best_idx;
            }
        }
    }
    (out, arg)
}

fn check_input(image: &RgbImage, params: &ConvNetParams) -> Result<()> {
    if params.in_channels() != 3 {
        return Err(Error::DimensionMismatch {
            expected: params.in_channels(),
            actual: 3,
        });
    }
    let min = params.stride();
    if image.width() < min || image.height() < min {
        return Err(Error::ImageTooSmall {
            width: image.width(),
            height: image.height(),
            min,
        });
    }
    Ok(())
}

/// Runs the conv stack over an RGB image.
pub fn forward(image: &RgbImage, params: &ConvNetParams) -> Result<FeatureMap> {
    check_input(image, params)?;
    Ok(forward_map(FeatureMap::from_image(image), params))
}

fn forward_map(mut x: FeatureMap, params: &ConvNetParams) -> FeatureMap {
    for layer in &params.layers {
        x = conv3x3(&x, layer);
        relu(&mut x);
        if layer.spec.pool {
            x = max_pool(&x).0;
        }
    }
    x
}

/// Activations retained by [`forward_trace`] for back-propagation.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    inputs: Vec<FeatureMap>,
    pre_relu: Vec<FeatureMap>,
    pool_arg: Vec<Option<(Vec<usize>, usize)>>,
    pub output: FeatureMap,
}

/// Parameter and input gradients of a scalar loss.
#[derive(Debug, Clone)]
pub struct ConvGradients {
    /// Same layout as the input image data.
    pub input: Vec<f64>,
    /// Same layout as each layer's `weights`.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

pub fn forward_trace(image: &RgbImage, params: &ConvNetParams) -> Result<ForwardTrace> {
    check_input(image, params)?;
    let mut x = FeatureMap::from_image(image);
    let mut inputs = Vec::new();
    let mut pre_relu = Vec::new();
    let mut pool_arg = Vec::new();
    for layer in &params.layers {
        inputs.push(x.clone());
        let z = conv3x3(&x, layer);
        let mut a = z.clone();
        relu(&mut a);
        pre_relu.push(z);
        if layer.spec.pool {
            let pre_len = a.data.len();
            let (p, arg) = max_pool(&a);
            pool_arg.push(Some((arg, pre_len)));
            x = p;
        } else {
            pool_arg.push(None);
            x = a;
        }
    }
    Ok(ForwardTrace {
        inputs,
        pre_relu,
        pool_arg,
        output: x,
    })
}

/// Back-propagates `grad_output` (∂loss/∂output, laid out like
/// `trace.output.data`) through the stack.
pub fn backward(
    trace: &ForwardTrace,
    params: &ConvNetParams,
    grad_output: &[f64],
) -> Result<ConvGradients> {
    if grad_output.len() != trace.output.data.len() {
        return Err(Error::DimensionMismatch {
            expected: trace.output.data.len(),
            actual: grad_output.len(),
        });
    }
    let n = params.layers.len();
    let mut grad = grad_output.to_vec();
    let mut gw = vec![Vec::new(); n];
    let mut gb = vec![Vec::new(); n];
    for k in (0..n).rev() {
        let layer = &params.layers[k];
        let input = &trace.inputs[k];
        let z = &trace.pre_relu[k];
        // un-pool
        let mut gz = match &trace.pool_arg[k] {
            Some((arg, pre_len)) => {
                let mut g = vec![0.0; *pre_len];
                for (o, &src) in arg.iter().enumerate() {
                    g[src] += grad[o];
                }
                g
            }
            None => grad,
        };
        // ReLU
        for (g, &zv) in gz.iter_mut().zip(&z.data) {
            if zv <= 0.0 {
                *g = 0.0;
            }
        }
        let (h, w) = (input.height, input.width);
        let (cin, cout) = (layer.spec.in_channels, layer.spec.out_channels);
        let mut dw = vec![0.0; layer.weights.len()];
        let mut db = vec![0.0; cout];
        let mut dx = vec![0.0; input.data.len()];
        for y in 0..h {
            for x in 0..w {
                let go = &gz[(y * w + x) * cout..(y * w + x + 1) * cout];
                for (b, &g) in db.iter_mut().zip(go) {
                    *b += g;
                }
                for ky in 0..3 {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    for kx in 0..3 {
                        let sx = x as isize + kx as isize - 1;
                        if sx < 0 || sx >= w as isize {
                            continue;
                        }
                        let src = (sy as usize * w + sx as usize) * cin;
                        let wbase = (ky * 3 + kx) * cin * cout;
                        for i in 0..cin {
                            let v = input.data[src + i];
                            let wrow = wbase + i * cout;
                            let mut acc = 0.0;
                            for o in 0..cout {
                                dw[wrow + o] += v * go[o];
                                acc += layer.weights[wrow + o] * go[o];
                            }
                            dx[src + i] += acc;
                        }
                    }
                }
            }
        }
        gw[k] = dw;
        gb[k] = db;
        grad = dx;
    }
    Ok(ConvGradients {
        input: grad,
        weights: gw,
        bias: gb,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PyramidConfig {
    pub levels: Vec<usize>,
}

impl Default for PyramidConfig {
    fn default() -> Self {
        PyramidConfig { levels: vec![1, 2] }
    }
}

impl PyramidConfig {
    pub fn new(levels: Vec<usize>) -> Result<Self> {
        let p = PyramidConfig { levels };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() || self.levels.contains(&0) {
            return Err(Error::invalid(
                "pyramid levels must be non-empty and each at least 1",
            ));
        }
        Ok(())
    }

    /// Pooled cells per channel, `Σ g²`.
    pub fn cells(&self) -> usize {
        self.levels.iter().map(|g| g * g).sum()
    }

    pub fn feature_dim(&self, channels: usize) -> usize {
        channels * self.cells()
    }
}

/// Sliding-window proposal settings. Each scale `s` slides a square window of
/// side `s × min(W, H)` with stride `stride_fraction × window`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalGrid {
    pub scales: Vec<f64>,
    pub stride_fraction: f64,
}

impl Default for ProposalGrid {
    fn default() -> Self {
        ProposalGrid {
            scales: vec![0.5, 0.75],
            stride_fraction: 0.5,
        }
    }
}

fn window_origins(extent: usize, window: usize, stride: usize) -> Vec<usize> {
    let last = extent - window;
    let mut origins: Vec<usize> = (0..=last).step_by(stride).collect();
    if origins.last() != Some(&last) {
        origins.push(last);
    }
    origins
}

/// Grid proposals, row-major per scale, with duplicates removed and the
/// full-image region always last. Windows that would overhang the image are
/// replaced by one aligned with the far edge.
pub fn propose_regions(width: usize, height: usize, grid: &ProposalGrid) -> Vec<Region> {
    let full = Region::full(width, height);
    let mut out: Vec<Region> = Vec::new();
    let side = width.min(height);
    if side > 0 {
        for &s in &grid.scales {
            if s.is_nan() || s <= 0.0 {
                continue;
            }
            let window = ((s * side as f64).round() as usize).clamp(1, side);
            let stride = ((grid.stride_fraction * window as f64).round() as usize).max(1);
            for &y in &window_origins(height, window, stride) {
                for &x in &window_origins(width, window, stride) {
                    let r = Region {
                        x0: x,
                        y0: y,
                        x1: x + window,
                        y1: y + window,
                    };
                    if r != full && !out.contains(&r) {
                        out.push(r);
                    }
                }
            }
        }
    }
    out.push(full);
    out
}

/// Feature-map cell window `[x0, x1) × [y0, y1)` covering an image region:
/// floor on the near edge, ceil on the far edge, at least one cell.
fn cell_window(fmap: &FeatureMap, region: &Region) -> (usize, usize, usize, usize) {
    let s = fmap.stride;
    let span = |lo: usize, hi: usize, n: usize| {
        let a = (lo / s).min(n - 1);
        let b = hi.div_ceil(s).clamp(a + 1, n);
        (a, b)
    };
    let (x0, x1) = span(region.x0, region.x1, fmap.width);
    let (y0, y1) = span(region.y0, region.y1, fmap.height);
    (x0, y0, x1, y1)
}

/// Bounds of cell `k` of `g` over `[start, start + len)`: floor start, ceil end.
fn pyramid_cell(start: usize, len: usize, g: usize, k: usize) -> (usize, usize) {
    (start + k * len / g, start + ((k + 1) * len).div_ceil(g))
}

/// Spatial-pyramid max pooling of one region. Output layout: level-major,
/// then cells row-major, then channels.
pub fn spp_pool(fmap: &FeatureMap, region: &Region, pyramid: &PyramidConfig) -> Vec<f64> {
    spp_pool_indexed(fmap, region, pyramid).0
}

/// As [`spp_pool`], also returning the flat feature-map index each output
/// value was taken from.
pub fn spp_pool_indexed(
    fmap: &FeatureMap,
    region: &Region,
    pyramid: &PyramidConfig,
) -> (Vec<f64>, Vec<usize>) {
    let c = fmap.channels;
    let (wx0, wy0, wx1, wy1) = cell_window(fmap, region);
    let mut out = Vec::with_capacity(pyramid.feature_dim(c));
    let mut arg = Vec::with_capacity(pyramid.feature_dim(c));
    for &g in &pyramid.levels {
        for gy in 0..g {
            let (cy0, cy1) = pyramid_cell(wy0, wy1 - wy0, g, gy);
            for gx in 0..g {
                let (cx0, cx1) = pyramid_cell(wx0, wx1 - wx0, g, gx);
                for ch in 0..c {
                    let mut best_idx = (cy0 * fmap.width + cx0) * c + ch;
                    let mut best = fmap.data[best_idx];
                    for y in cy0..cy1 {
                        for x in cx0..cx1 {
                            let idx = (y * fmap.width + x) * c + ch;
                            if fmap.data[idx] > best {
                                best = fmap.data[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    out.push(best);
                    arg.push(best_idx);
                }
            }
        }
    }
    (out, arg)
}

/// Pooled, L2-normalized feature rows for a set of regions of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionFeatures {
    pub regions: Vec<Region>,
    /// `regions.len() × D`
    pub matrix: Array2<f64>,
}

impl RegionFeatures {
    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn row(&self, r: usize) -> Vec<f64> {
        self.matrix.row(r).to_vec()
    }
}

pub(crate) fn l2_normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v {
            *x /= norm;
        }
    }
}

fn check_regions(image: &RgbImage, regions: &[Region]) -> Result<()> {
    for r in regions {
        Region::new(r.x0, r.y0, r.x1, r.y1, image.width(), image.height())?;
    }
    Ok(())
}

pub fn pool_regions(
    fmap: &FeatureMap,
    regions: &[Region],
    pyramid: &PyramidConfig,
) -> RegionFeatures {
    let d = pyramid.feature_dim(fmap.channels);
    let mut matrix = Array2::zeros((regions.len(), d));
    for (r, region) in regions.iter().enumerate() {
        let mut v = spp_pool(fmap, region, pyramid);
        l2_normalize(&mut v);
        matrix.row_mut(r).assign(&ndarray::ArrayView1::from(&v));
    }
    RegionFeatures {
        regions: regions.to_vec(),
        matrix,
    }
}

pub fn extract_region_features(
    image: &RgbImage,
    regions: &[Region],
    params: &ConvNetParams,
    pyramid: &PyramidConfig,
) -> Result<RegionFeatures> {
    pyramid.validate()?;
    check_regions(image, regions)?;
    let fmap = forward(image, params)?;
    Ok(pool_regions(&fmap, regions, pyramid))
}

/// A frozen extractor: network, pyramid and proposal grid together.
#[derive(Debug, Clone, PartialEq)]
pub struct Extractor {
    pub params: ConvNetParams,
    pub pyramid: PyramidConfig,
    pub proposals: ProposalGrid,
}

impl Extractor {
    pub fn new(
        params: ConvNetParams,
        pyramid: PyramidConfig,
        proposals: ProposalGrid,
    ) -> Result<Self> {
        pyramid.validate()?;
        if proposals.stride_fraction.is_nan() || proposals.stride_fraction <= 0.0 {
            return Err(Error::invalid("proposal stride fraction must be positive"));
        }
        Ok(Extractor {
            params,
            pyramid,
            proposals,
        })
    }

    pub fn with_seed(seed: u64) -> Self {
        Extractor {
            params: ConvNetParams::default_net(seed),
            pyramid: PyramidConfig::default(),
            proposals: ProposalGrid::default(),
        }
    }

    pub fn dim(&self) -> usize {
        self.pyramid.feature_dim(self.params.out_channels())
    }

    /// Features of every grid proposal; the last row is the full image.
    pub fn proposal_features(&self, image: &RgbImage) -> Result<RegionFeatures> {
        let regions = propose_regions(image.width(), image.height(), &self.proposals);
        extract_region_features(image, &regions, &self.params, &self.pyramid)
    }

    /// Single full-image feature vector.
    pub fn image_features(&self, image: &RgbImage) -> Result<Vec<f64>> {
        let full = [Region::full(image.width(), image.height())];
        Ok(extract_region_features(image, &full, &self.params, &self.pyramid)?.row(0))
    }

    pub fn region_features(&self, image: &RgbImage, regions: &[Region]) -> Result<RegionFeatures> {
        extract_region_features(image, regions, &self.params, &self.pyramid)
    }
}

const CACHE_MAGIC: &[u8; 8] = b"CTFEAT01";

/// Binary cache of region features keyed by image id, valid only for the
/// network checksum and pyramid it was built with.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCache {
    pub params_checksum: String,
    pub pyramid: PyramidConfig,
    pub entries: BTreeMap<String, RegionFeatures>,
}

impl FeatureCache {
    pub fn new(params: &ConvNetParams, pyramid: &PyramidConfig) -> Self {
        FeatureCache {
            params_checksum: params.checksum(),
            pyramid: pyramid.clone(),
            entries: BTreeMap::new(),
        }
    }

    pub fn matches(&self, params: &ConvNetParams, pyramid: &PyramidConfig) -> bool {
        self.params_checksum == params.checksum() && &self.pyramid == pyramid
    }

    /// Cached rows for `id`, only if the cache key matches.
    pub fn get(
        &self,
        id: &str,
        params: &ConvNetParams,
        pyramid: &PyramidConfig,
    ) -> Option<&RegionFeatures> {
        if self.matches(params, pyramid) {
            self.entries.get(id)
        } else {
            None
        }
    }

    pub fn insert(&mut self, id: impl Into<String>, features: RegionFeatures) {
        self.entries.insert(id.into(), features);
    }

    pub fn write(&self, mut w: impl Write) -> std::io::Result<()> {
        let put_u32 = |w: &mut dyn Write, v: usize| w.write_all(&(v as u32).to_le_bytes());
        w.write_all(CACHE_MAGIC)?;
        put_u32(&mut w, self.params_checksum.len())?;
        w.write_all(self.params_checksum.as_bytes())?;
        put_u32(&mut w, self.pyramid.levels.len())?;
        for &g in &self.pyramid.levels {
            put_u32(&mut w, g)?;
        }
        put_u32(&mut w, self.entries.len())?;
        for (id, rf) in &self.entries {
            put_u32(&mut w, id.len())?;
            w.write_all(id.as_bytes())?;
            put_u32(&mut w, rf.len())?;
            put_u32(&mut w, rf.dim())?;
            for r in &rf.regions {
                for v in [r.x0, r.y0, r.x1, r.y1] {
                    put_u32(&mut w, v)?;
                }
            }
            for v in rf.matrix.iter() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read(mut r: impl Read) -> Result<Self> {
        let bad = |what: &str| Error::format(format!("feature cache: {what}"));
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)
            .map_err(|_| bad("truncated header"))?;
        if &magic != CACHE_MAGIC {
            return Err(bad("bad magic"));
        }
        let get_u32 = |r: &mut dyn Read| -> Result<usize> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b).map_err(|_| bad("truncated"))?;
            Ok(u32::from_le_bytes(b) as usize)
        };
        let read_string = |r: &mut dyn Read, n: usize| -> Result<String> {
            let mut b = vec![0u8; n];
            r.read_exact(&mut b).map_err(|_| bad("truncated"))?;
            String::from_utf8(b).map_err(|_| bad("invalid utf-8"))
        };
        let n = get_u32(&mut r)?;
        let params_checksum = read_string(&mut r, n)?;
        let nlev = get_u32(&mut r)?;
        let levels = (0..nlev)
            .map(|_| get_u32(&mut r))
            .collect::<Result<Vec<_>>>()?;
        let pyramid = PyramidConfig::new(levels)?;
        let count = get_u32(&mut r)?;
        let mut entries = BTreeMap::new();
        for _ in 0..count {
            let n = get_u32(&mut r)?;
            let id = read_string(&mut r, n)?;
            let rows = get_u32(&mut r)?;
            let dim = get_u32(&mut r)?;
            let mut regions = Vec::with_capacity(rows);
            for _ in 0..rows {
                regions.push(Region {
                    x0: get_u32(&mut r)?,
                    y0: get_u32(&mut r)?,
                    x1: get_u32(&mut r)?,
                    y1: get_u32(&mut r)?,
                });
            }
            let mut data = Vec::with_capacity(rows * dim);
            let mut b = [0u8; 8];
            for _ in 0..rows * dim {
                r.read_exact(&mut b).map_err(|_| bad("truncated matrix"))?;
                data.push(f64::from_le_bytes(b));
            }
            let matrix =
                Array2::from_shape_vec((rows, dim), data).map_err(|e| bad(&e.to_string()))?;
            entries.insert(id, RegionFeatures { regions, matrix });
        }
        Ok(FeatureCache {
            params_checksum,
            pyramid,
            entries,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(std::io::BufReader::new(file))
    }
}
