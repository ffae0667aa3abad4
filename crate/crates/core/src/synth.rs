//! Deterministic synthetic camera-trap corpus.
//!
//! Every positive image plants one rectangular animal texture over a
//! low-frequency background with soft clutter blobs; negatives carry clutter
//! only. Texture parameters (colour tint, body size, stripe geometry or spot
//! layout) depend only on `(species, individual, seed)`, so each individual
//! has a stable "skin marking" that recurs at different positions across its
//! images. Night images are the day rendering scaled by 0.35 with additive
//! Gaussian noise (σ = 0.05).
//!
//! Each image's pixels depend only on the configuration and its record id,
//! so images may be generated in any order or in parallel.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Illumination, ImageRecord, Manifest, Species};
use crate::error::{Error, Result};
use crate::features::Region;
use crate::image::RgbImage;
use crate::rng::{rng_for, Rng};
use crate::segmentation::PixelMask;

pub const NIGHT_GAIN: f64 = 0.35;
pub const NIGHT_NOISE_SIGMA: f64 = 0.05;
/// Animal boxes are placed and sized on this pixel lattice.
pub const PLACEMENT_LATTICE: usize = 8;
const TINT_AMPLITUDE: f64 = 0.06;
const BRIGHTNESS_AMPLITUDE: f64 = 0.2;
const GOLDEN_FRACTION: f64 = 0.618_033_988_749_895;
/// Each individual is photographed around a preferred spot, within this many
/// lattice steps on each axis.
pub const PLACEMENT_JITTER: i64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextureFamily {
    /// Oriented sinusoid thresholded into dark bands.
    Stripes,
    /// Poisson-disc dark blobs.
    Spots,
    /// Uniform coat with smooth shading and fine mottling.
    Plain,
}

impl TextureFamily {
    pub fn for_species(species: Species) -> Self {
        match species {
            Species::Tiger => TextureFamily::Stripes,
            Species::Leopard | Species::Chital => TextureFamily::Spots,
            _ => TextureFamily::Plain,
        }
    }
}

/// Coat colour, marking colour.
fn palette(species: Species) -> ([f64; 3], [f64; 3]) {
    match species {
        Species::Tiger => ([0.92, 0.40, 0.06], [0.07, 0.05, 0.04]),
        Species::Leopard => ([0.84, 0.64, 0.25], [0.16, 0.11, 0.06]),
        Species::Chital => ([0.62, 0.33, 0.16], [0.96, 0.94, 0.90]),
        Species::Elephant => ([0.56, 0.60, 0.80], [0.44, 0.47, 0.64]),
        Species::Gaur => ([0.22, 0.14, 0.10], [0.85, 0.82, 0.70]),
        Species::Bear => ([0.08, 0.08, 0.09], [0.30, 0.28, 0.26]),
        Species::Dhole => ([0.78, 0.35, 0.15], [0.92, 0.80, 0.62]),
        Species::Muntjac => ([0.68, 0.42, 0.22], [0.55, 0.34, 0.18]),
        Species::Sambar => ([0.42, 0.33, 0.25], [0.30, 0.24, 0.18]),
        Species::WildPig => ([0.25, 0.23, 0.22], [0.45, 0.42, 0.40]),
        Species::Unclassified => ([0.5, 0.5, 0.5], [0.5, 0.5, 0.5]),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesSpec {
    pub species: Species,
    /// Distinct pattern variants. They are recorded as individuals only for
    /// tigers and leopards.
    pub individuals: usize,
    pub images_per_individual: usize,
    /// Optional per-individual image counts overriding
    /// `images_per_individual` (length must equal `individuals`).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub image_counts: Vec<usize>,
}

impl SpeciesSpec {
    pub fn new(species: Species, individuals: usize, images_per_individual: usize) -> Self {
        SpeciesSpec {
            species,
            individuals,
            images_per_individual,
            image_counts: Vec::new(),
        }
    }

    pub fn count_for(&self, individual: usize) -> usize {
        if self.image_counts.is_empty() {
            self.images_per_individual
        } else {
            self.image_counts[individual]
        }
    }

    pub fn total(&self) -> usize {
        (0..self.individuals).map(|i| self.count_for(i)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub species: Vec<SpeciesSpec>,
    /// Number of clutter-only `unclassified` images.
    pub negatives: usize,
    pub night_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            width: 96,
            height: 96,
            species: vec![
                SpeciesSpec::new(Species::Tiger, 4, 40),
                SpeciesSpec::new(Species::Leopard, 4, 40),
                SpeciesSpec::new(Species::Elephant, 4, 40),
            ],
            negatives: 480,
            night_fraction: 0.3,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("image size must be non-zero"));
        }
        let min_side = 5 * PLACEMENT_LATTICE;
        if self.width < min_side || self.height < min_side {
            return Err(Error::invalid(format!(
                "images must be at least {min_side}x{min_side} to hold an animal"
            )));
        }
        if !(0.0..=1.0).contains(&self.night_fraction) {
            return Err(Error::invalid("night_fraction must lie in [0, 1]"));
        }
        let mut seen = Vec::new();
        for s in &self.species {
            if s.species == Species::Unclassified {
                return Err(Error::invalid("negatives are configured with `negatives`"));
            }
            if seen.contains(&s.species) {
                return Err(Error::invalid(format!(
                    "species {} listed twice",
                    s.species
                )));
            }
            seen.push(s.species);
            if !s.image_counts.is_empty() && s.image_counts.len() != s.individuals {
                return Err(Error::invalid(format!(
                    "{}: image_counts has {} entries for {} individuals",
                    s.species,
                    s.image_counts.len(),
                    s.individuals
                )));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::format(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::format(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthImage {
    pub pixels: RgbImage,
    pub record: ImageRecord,
    /// Where the animal texture was planted; `None` for negatives.
    pub ground_truth_box: Option<Region>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub config: SynthConfig,
    pub manifest: Manifest,
    pub images: Vec<SynthImage>,
}

/// What to render for one record.
#[derive(Debug, Clone)]
struct Plan {
    record: ImageRecord,
    /// `(species, variant)` for positives.
    animal: Option<(Species, usize)>,
}

/// Night images are spread evenly: index `j` of `n` is night iff
/// `floor((j + 1) f) > floor(j f)`.
fn is_night(j: usize, f: f64) -> bool {
    ((j + 1) as f64 * f).floor() > (j as f64 * f).floor()
}

pub fn individual_label(species: Species, variant: usize) -> String {
    format!("{species}_{variant:02}")
}

fn plans(cfg: &SynthConfig) -> Vec<Plan> {
    let record = |id: String, species, individual, j| ImageRecord {
        path: PathBuf::from(format!("images/{id}.ppm")),
        id,
        species,
        individual,
        illumination: if is_night(j, cfg.night_fraction) {
            Illumination::Night
        } else {
            Illumination::Day
        },
        width: cfg.width as u32,
        height: cfg.height as u32,
    };
    let mut out = Vec::new();
    for spec in &cfg.species {
        for v in 0..spec.individuals {
            let individual = spec
                .species
                .has_individuals()
                .then(|| individual_label(spec.species, v));
            for j in 0..spec.count_for(v) {
                let id = format!("{}_{v:02}_{j:03}", spec.species);
                out.push(Plan {
                    record: record(id, spec.species, individual.clone(), j),
                    animal: Some((spec.species, v)),
                });
            }
        }
    }
    for j in 0..cfg.negatives {
        out.push(Plan {
            record: record(
                format!("unclassified_{j:04}"),
                Species::Unclassified,
                None,
                j,
            ),
            animal: None,
        });
    }
    out
}

/// Per-individual texture parameters.
#[derive(Debug, Clone)]
struct Pattern {
    family: TextureFamily,
    coat: [f64; 3],
    marking: [f64; 3],
    box_w: usize,
    box_h: usize,
    /// Preferred placement as a fraction of the free range on each axis.
    home: (f64, f64),
    angle: f64,
    frequency: f64,
    phase: f64,
    duty: f64,
    /// Spot centres and radii in box coordinates.
    spots: Vec<(f64, f64, f64)>,
}

fn pattern(cfg: &SynthConfig, species: Species, variant: usize) -> Pattern {
    let mut rng = rng_for(cfg.seed, &format!("pattern/{species}/{variant}"));
    let (coat, marking) = palette(species);
    // Individuals walk a low-discrepancy hue circle so small groups never
    // share a coat tint.
    let offset = rng_for(cfg.seed, &format!("palette/{species}")).gen_range(0.0..1.0);
    let hue = 2.0 * PI * (offset + variant as f64 * GOLDEN_FRACTION);
    // species without recorded individuals vary less
    let spread = if species.has_individuals() { 1.0 } else { 0.4 };
    let tint: [f64; 3] =
        [0, 1, 2].map(|c| spread * TINT_AMPLITUDE * (hue + 2.0 * PI * c as f64 / 3.0).cos());
    // brightness is the second, independent axis of the coat circle
    let value = 1.0 + spread * BRIGHTNESS_AMPLITUDE * hue.sin();
    let coat = [0, 1, 2].map(|c| (coat[c] * value + tint[c]).clamp(0.02, 0.98));
    let lattice_sizes = |lo: usize, hi: usize| -> Vec<usize> {
        (lo / PLACEMENT_LATTICE..=hi / PLACEMENT_LATTICE)
            .map(|k| k * PLACEMENT_LATTICE)
            .collect()
    };
    let side = cfg.width.min(cfg.height);
    let sizes = lattice_sizes(side * 5 / 12, side * 2 / 3);
    let box_w = sizes[rng.gen_range(0..sizes.len())];
    let box_h = sizes[rng.gen_range(0..sizes.len())];
    let home = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
    let angle = rng.gen_range(0.0..PI);
    let frequency = rng.gen_range(1.0 / 14.0..1.0 / 7.0);
    let phase = rng.gen_range(0.0..2.0 * PI);
    let duty = rng.gen_range(0.3..0.55);
    let family = TextureFamily::for_species(species);
    let mut spots = Vec::new();
    if family == TextureFamily::Spots {
        let radius = rng.gen_range(2.0..4.5);
        let min_dist = rng.gen_range(2.4..3.6) * radius;
        // dart throwing for a Poisson-disc layout
        for _ in 0..600 {
            let x = rng.gen_range(0.0..box_w as f64);
            let y = rng.gen_range(0.0..box_h as f64);
            if spots
                .iter()
                .all(|&(sx, sy, _): &(f64, f64, f64)| (sx - x).hypot(sy - y) >= min_dist)
            {
                let r = radius * rng.gen_range(0.8..1.2);
                spots.push((x, y, r));
            }
        }
    }
    Pattern {
        family,
        coat,
        marking,
        box_w,
        box_h,
        home,
        angle,
        frequency,
        phase,
        duty,
        spots,
    }
}

/// Low-frequency background with soft clutter blobs.
fn render_background(img: &mut RgbImage, rng: &mut Rng) {
    let (w, h) = (img.width(), img.height());
    let base = [
        0.30 + rng.gen_range(-0.06..0.06),
        0.38 + rng.gen_range(-0.06..0.06),
        0.22 + rng.gen_range(-0.06..0.06),
    ];
    let waves: Vec<(f64, f64, f64, f64, usize)> = (0..3)
        .map(|_| {
            let period = rng.gen_range(48.0..192.0);
            let theta = rng.gen_range(0.0..PI);
            (
                2.0 * PI / period * theta.cos(),
                2.0 * PI / period * theta.sin(),
                rng.gen_range(0.0..2.0 * PI),
                rng.gen_range(0.03..0.07),
                rng.gen_range(0..3),
            )
        })
        .collect();
    let blobs: Vec<(f64, f64, f64, [f64; 3], f64)> = (0..rng.gen_range(3..7))
        .map(|_| {
            (
                rng.gen_range(0.0..w as f64),
                rng.gen_range(0.0..h as f64),
                rng.gen_range(5.0..14.0),
                [
                    rng.gen_range(0.15..0.55),
                    rng.gen_range(0.2..0.55),
                    rng.gen_range(0.1..0.35),
                ],
                rng.gen_range(0.3..0.7),
            )
        })
        .collect();
    for y in 0..h {
        for x in 0..w {
            let mut px = base;
            for &(kx, ky, ph, amp, ch) in &waves {
                let v = amp * (kx * x as f64 + ky * y as f64 + ph).sin();
                px[ch] += v;
                px[(ch + 1) % 3] += 0.5 * v;
            }
            for &(bx, by, sigma, color, strength) in &blobs {
                let d2 = (x as f64 - bx).powi(2) + (y as f64 - by).powi(2);
                let a = strength * (-d2 / (2.0 * sigma * sigma)).exp();
                for c in 0..3 {
                    px[c] = (1.0 - a) * px[c] + a * color[c];
                }
            }
            img.set_pixel(x, y, px);
        }
    }
}

fn render_animal(img: &mut RgbImage, pat: &Pattern, bx: &Region, gain: f64, rng: &mut Rng) {
    let shade_dir = rng.gen_range(0.0..2.0 * PI);
    let (sdx, sdy) = (shade_dir.cos(), shade_dir.sin());
    let (ca, sa) = (pat.angle.cos(), pat.angle.sin());
    let threshold = (PI * pat.duty).cos();
    for y in bx.y0..bx.y1 {
        for x in bx.x0..bx.x1 {
            let u = (x - bx.x0) as f64;
            let v = (y - bx.y0) as f64;
            let marked = match pat.family {
                TextureFamily::Stripes => {
                    (2.0 * PI * pat.frequency * (u * ca + v * sa) + pat.phase).cos() > threshold
                }
                TextureFamily::Spots => pat
                    .spots
                    .iter()
                    .any(|&(sx, sy, r)| (sx - u).hypot(sy - v) <= r),
                TextureFamily::Plain => false,
            };
            let mut px = if marked { pat.marking } else { pat.coat };
            // smooth shading across the body plus fine mottling
            let t =
                ((u / bx.width() as f64 - 0.5) * sdx + (v / bx.height() as f64 - 0.5) * sdy) * 0.12;
            let mottle = if pat.family == TextureFamily::Plain {
                rng.gen_range(-0.04..0.04)
            } else {
                0.0
            };
            for c in px.iter_mut() {
                *c = ((*c + t + mottle) * gain).clamp(0.0, 1.0);
            }
            img.set_pixel(x, y, px);
        }
    }
}

fn add_noise(img: &mut RgbImage, sigma: f64, rng: &mut Rng) {
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    for v in img.data_mut() {
        *v = (*v + normal.sample(rng)).clamp(0.0, 1.0);
    }
}

/// Day rendering of one planned image plus its animal box.
fn render_day(cfg: &SynthConfig, plan: &Plan) -> (RgbImage, Option<Region>) {
    let mut rng = rng_for(cfg.seed, &format!("image/{}", plan.record.id));
    let mut img = RgbImage::new(cfg.width, cfg.height);
    render_background(&mut img, &mut rng);
    let mut gt = None;
    if let Some((species, variant)) = plan.animal {
        let pat = pattern(cfg, species, variant);
        let (bw, bh) = (pat.box_w.min(cfg.width), pat.box_h.min(cfg.height));
        let x_slots = (cfg.width - bw) / PLACEMENT_LATTICE;
        let y_slots = (cfg.height - bh) / PLACEMENT_LATTICE;
        let mut place = |slots: usize, home: f64| {
            let centre = (home * slots as f64).round() as i64;
            let jitter = rng.gen_range(-PLACEMENT_JITTER..=PLACEMENT_JITTER);
            (centre + jitter).clamp(0, slots as i64) as usize * PLACEMENT_LATTICE
        };
        let x0 = place(x_slots, pat.home.0);
        let y0 = place(y_slots, pat.home.1);
        let bx = Region {
            x0,
            y0,
            x1: x0 + bw,
            y1: y0 + bh,
        };
        let gain = rng.gen_range(0.9..1.1);
        render_animal(&mut img, &pat, &bx, gain, &mut rng);
        gt = Some(bx);
    }
    add_noise(&mut img, 0.02, &mut rng);
    (img, gt)
}

fn to_night(cfg: &SynthConfig, id: &str, day: &RgbImage) -> RgbImage {
    let mut img = day.clone();
    for v in img.data_mut() {
        *v *= NIGHT_GAIN;
    }
    let mut rng = rng_for(cfg.seed, &format!("night/{id}"));
    add_noise(&mut img, NIGHT_NOISE_SIGMA, &mut rng);
    img
}

fn render(cfg: &SynthConfig, plan: &Plan, illumination: Illumination) -> SynthImage {
    let (day, gt) = render_day(cfg, plan);
    let mut pixels = match illumination {
        Illumination::Day => day,
        Illumination::Night => to_night(cfg, &plan.record.id, &day),
    };
    pixels.quantize();
    let mut record = plan.record.clone();
    record.illumination = illumination;
    SynthImage {
        pixels,
        record,
        ground_truth_box: gt,
    }
}

pub fn generate_corpus(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let plans = plans(cfg);
    let images: Vec<SynthImage> = plans
        .par_iter()
        .map(|p| render(cfg, p, p.record.illumination))
        .collect();
    let manifest = Manifest::new(
        images.iter().map(|i| i.record.clone()).collect(),
        format!("synthetic corpus, seed {}", cfg.seed),
    )?;
    Ok(SynthCorpus {
        config: cfg.clone(),
        manifest,
        images,
    })
}

/// Renders the record `id` under the requested illumination, regardless of
/// the illumination it was assigned in the corpus.
pub fn render_variant(
    cfg: &SynthConfig,
    id: &str,
    illumination: Illumination,
) -> Result<SynthImage> {
    let plan = plans(cfg)
        .into_iter()
        .find(|p| p.record.id == id)
        .ok_or_else(|| Error::UnknownLabel(id.to_string()))?;
    Ok(render(cfg, &plan, illumination))
}

/// Pixel mask that is 1 exactly inside the planted box.
pub fn ground_truth_mask(img: &SynthImage) -> Result<PixelMask> {
    let bx = img
        .ground_truth_box
        .ok_or_else(|| Error::invalid(format!("`{}` is a negative image", img.record.id)))?;
    Ok(PixelMask::from_region(
        img.pixels.width(),
        img.pixels.height(),
        &bx,
    ))
}

pub const BOXES_FILE: &str = "boxes.csv";

pub fn boxes_to_csv(images: &[SynthImage]) -> String {
    let mut s = String::from("id,x0,y0,x1,y1\n");
    for img in images {
        if let Some(b) = img.ground_truth_box {
            let _ = writeln!(s, "{},{},{},{},{}", img.record.id, b.x0, b.y0, b.x1, b.y1);
        }
    }
    s
}

impl SynthCorpus {
    /// Writes `manifest.csv`, `boxes.csv`, `synth.toml` and one P6 file per
    /// image under `images/`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let dir = dir.as_ref();
        let images_dir = dir.join("images");
        std::fs::create_dir_all(&images_dir).map_err(|e| Error::io(&images_dir, e))?;
        self.images
            .par_iter()
            .try_for_each(|img| img.pixels.save_ppm(dir.join(&img.record.path)))?;
        let manifest_path = dir.join("manifest.csv");
        self.manifest.save(&manifest_path)?;
        let boxes = dir.join(BOXES_FILE);
        std::fs::write(&boxes, boxes_to_csv(&self.images)).map_err(|e| Error::io(&boxes, e))?;
        let cfg_path = dir.join("synth.toml");
        std::fs::write(&cfg_path, self.config.to_toml()?).map_err(|e| Error::io(&cfg_path, e))?;
        Ok(manifest_path)
    }

    pub fn boxes(&self) -> Vec<Option<Region>> {
        self.images.iter().map(|i| i.ground_truth_box).collect()
    }

    pub fn pixels(&self) -> Vec<RgbImage> {
        self.images.iter().map(|i| i.pixels.clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            width: 48,
            height: 48,
            species: vec![
                SpeciesSpec::new(Species::Tiger, 3, 10),
                SpeciesSpec::new(Species::Elephant, 3, 10),
            ],
            negatives: 7,
            night_fraction: 0.3,
            seed: 3,
        }
    }

    #[test]
    fn bookkeeping_matches_config() {
        let c = generate_corpus(&small()).unwrap();
        let counts = c.manifest.species_counts();
        assert_eq!(counts[&Species::Tiger], 30);
        assert_eq!(counts[&Species::Elephant], 30);
        assert_eq!(counts[&Species::Unclassified], 7);
        assert_eq!(c.manifest.individual_counts().len(), 3);
        assert!(c
            .manifest
            .iter()
            .filter(|r| r.species == Species::Elephant)
            .all(|r| r.individual.is_none()));
        let nights = c
            .manifest
            .iter()
            .filter(|r| r.species == Species::Tiger && r.illumination == Illumination::Night)
            .count();
        assert_eq!(nights, 9);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_corpus(&small()).unwrap();
        let b = generate_corpus(&small()).unwrap();
        let sums = |c: &SynthCorpus| {
            c.images
                .iter()
                .map(|i| i.pixels.checksum())
                .collect::<Vec<_>>()
        };
        assert_eq!(sums(&a), sums(&b));
        let mut other = small();
        other.seed = 4;
        assert_ne!(sums(&a), sums(&generate_corpus(&other).unwrap()));
    }

    #[test]
    fn boxes_inside_image_and_pixels_in_range() {
        let c = generate_corpus(&small()).unwrap();
        for img in &c.images {
            assert!(img.pixels.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
            match img.ground_truth_box {
                Some(b) => {
                    assert!(Region::new(b.x0, b.y0, b.x1, b.y1, 48, 48).is_ok());
                    let mask = ground_truth_mask(img).unwrap();
                    assert_eq!(mask.area(), b.area());
                    assert_eq!(mask.iou(&mask).unwrap(), 1.0);
                }
                None => assert!(ground_truth_mask(img).is_err()),
            }
        }
    }

    #[test]
    fn full_image_box_gives_all_ones_mask() {
        let mut img = generate_corpus(&small()).unwrap().images.remove(0);
        img.ground_truth_box = Some(Region::full(48, 48));
        assert_eq!(ground_truth_mask(&img).unwrap().area(), 48 * 48);
    }

    #[test]
    fn night_is_darker_than_day() {
        let cfg = small();
        for id in ["tiger_00_001", "elephant_02_004", "unclassified_0003"] {
            let day = render_variant(&cfg, id, Illumination::Day).unwrap();
            let night = render_variant(&cfg, id, Illumination::Night).unwrap();
            assert!(night.pixels.mean() < day.pixels.mean());
            assert_eq!(day.ground_truth_box, night.ground_truth_box);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = small();
        cfg.width = 0;
        assert!(generate_corpus(&cfg).is_err());
        let mut cfg = small();
        cfg.night_fraction = 1.5;
        assert!(generate_corpus(&cfg).is_err());
        let mut cfg = small();
        cfg.species[0].image_counts = vec![1, 2];
        assert!(generate_corpus(&cfg).is_err());
    }

    #[test]
    fn config_toml_roundtrip() {
        let mut cfg = small();
        cfg.species[0].image_counts = vec![40, 10, 10];
        assert_eq!(
            SynthConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(),
            cfg
        );
    }
}
