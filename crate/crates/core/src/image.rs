//! RGB images with intensities in [0, 1] and binary PPM (P6) storage.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Row-major, channel-interleaved RGB image.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, [0.0; 3])
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        RgbImage {
            width,
            height,
            data,
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::DimensionMismatch {
                expected: width * height * 3,
                actual: data.len(),
            });
        }
        Ok(RgbImage {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f64; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Mean colour over the half-open pixel rectangle.
    pub fn mean_color(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> [f64; 3] {
        let mut acc = [0.0; 3];
        for y in y0..y1 {
            for x in x0..x1 {
                let p = self.pixel(x, y);
                for c in 0..3 {
                    acc[c] += p[c];
                }
            }
        }
        let n = ((x1 - x0) * (y1 - y0)).max(1) as f64;
        acc.map(|v| v / n)
    }

    /// Snaps every intensity to the nearest multiple of 1/255, so that the
    /// image survives a P6 round trip unchanged.
    pub fn quantize(&mut self) {
        for v in &mut self.data {
            *v = quantize_level(*v) as f64 / 255.0;
        }
    }

    /// Block-averages down to `cols × rows` (each output cell averages the
    /// pixels whose floor-scaled coordinates fall in it).
    pub fn downsample(&self, cols: usize, rows: usize) -> Vec<f64> {
        let mut out = vec![0.0; cols * rows * 3];
        let mut counts = vec![0usize; cols * rows];
        for y in 0..self.height {
            let cy = y * rows / self.height;
            for x in 0..self.width {
                let cx = x * cols / self.width;
                let cell = cy * cols + cx;
                counts[cell] += 1;
                let p = self.pixel(x, y);
                for c in 0..3 {
                    out[cell * 3 + c] += p[c];
                }
            }
        }
        for (cell, &n) in counts.iter().enumerate() {
            for c in 0..3 {
                out[cell * 3 + c] /= n.max(1) as f64;
            }
        }
        out
    }

    /// SHA-256 of the quantized 8-bit pixel bytes, hex encoded.
    pub fn checksum(&self) -> String {
        let bytes: Vec<u8> = self.data.iter().map(|&v| quantize_level(v)).collect();
        let digest = Sha256::digest(&bytes);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn write_ppm(&self, mut w: impl Write) -> std::io::Result<()> {
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self.data.iter().map(|&v| quantize_level(v)).collect();
        w.write_all(&bytes)
    }

    pub fn save_ppm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_ppm(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_ppm(r: impl Read) -> Result<Self> {
        let mut r = BufReader::new(r);
        let magic = next_token(&mut r)?;
        if magic != "P6" {
            return Err(Error::format(format!("not a binary PPM (magic `{magic}`)")));
        }
        let mut dims = [0usize; 3];
        for d in &mut dims {
            let tok = next_token(&mut r)?;
            *d = tok
                .parse()
                .map_err(|_| Error::format(format!("bad PPM header field `{tok}`")))?;
        }
        let [width, height, maxval] = dims;
        if maxval != 255 {
            return Err(Error::format(format!("unsupported PPM maxval {maxval}")));
        }
        let mut bytes = vec![0u8; width * height * 3];
        r.read_exact(&mut bytes)
            .map_err(|e| Error::format(format!("truncated PPM data: {e}")))?;
        let data = bytes.iter().map(|&b| b as f64 / 255.0).collect();
        Ok(RgbImage {
            width,
            height,
            data,
        })
    }

    pub fn load_ppm(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_ppm(file)
    }
}

fn quantize_level(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Reads one whitespace-delimited header token, skipping `#` comments. The
/// single whitespace byte after the token is consumed.
fn next_token(r: &mut impl BufRead) -> Result<String> {
    let mut tok = String::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)
            .map_err(|e| Error::format(e.to_string()))?
            == 0
        {
            return if tok.is_empty() {
                Err(Error::format("unexpected end of PPM header"))
            } else {
                Ok(tok)
            };
        }
        let ch = byte[0] as char;
        if ch == '#' && tok.is_empty() {
            let mut line = String::new();
            r.read_line(&mut line)
                .map_err(|e| Error::format(e.to_string()))?;
        } else if ch.is_ascii_whitespace() {
            if !tok.is_empty() {
                return Ok(tok);
            }
        } else {
            tok.push(ch);
        }
    }
}
