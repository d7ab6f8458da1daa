//! Depth maps, pixel locations and synthetic scenes.
//!
//! Depth is stored in single precision, matching the on-disk PFM layout, and
//! lower values are closer to the camera. Every map carries a validity mask;
//! only valid pixels take part in sampling and evaluation.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, format, Result};
use crate::pfm::{self, Endian, FloatImage};

/// Zero-based pixel coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Location {
    pub row: usize,
    pub col: usize,
}

impl Location {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

/// A dense `height × width` grid of `f64`, row-major.
///
/// Used for score maps and predictions that need not satisfy the depth
/// invariants (negative values, no mask).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl Grid {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || values.len() != height * width {
            return Err(domain(format!(
                "grid of {height}x{width} cannot hold {} values",
                values.len()
            )));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn index_of(&self, loc: Location) -> Result<usize> {
        linear_index(self.height, self.width, loc)
    }

    pub fn get(&self, loc: Location) -> Result<f64> {
        Ok(self.values[self.index_of(loc)?])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Grid {
        Grid {
            height: self.height,
            width: self.width,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

pub(crate) fn linear_index(height: usize, width: usize, loc: Location) -> Result<usize> {
    if loc.row >= height || loc.col >= width {
        return Err(domain(format!(
            "location ({}, {}) outside {height}x{width}",
            loc.row, loc.col
        )));
    }
    Ok(loc.row * width + loc.col)
}

/// Depth values plus a validity mask (`true` = valid).
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    height: usize,
    width: usize,
    values: Vec<f32>,
    mask: Vec<bool>,
}

impl DepthMap {
    /// Builds a map, checking that valid pixels hold finite, nonnegative depth.
    pub fn new(height: usize, width: usize, values: Vec<f32>, mask: Vec<bool>) -> Result<Self> {
        let n = height * width;
        if height == 0 || width == 0 || values.len() != n || mask.len() != n {
            return Err(domain(format!(
                "depth map {height}x{width} needs {n} values and mask entries"
            )));
        }
        for (i, (&v, &ok)) in values.iter().zip(&mask).enumerate() {
            if ok && !(v.is_finite() && v >= 0.0) {
                return Err(domain(format!("valid pixel {i} holds invalid depth {v}")));
            }
        }
        Ok(Self {
            height,
            width,
            values,
            mask,
        })
    }

    /// A fully valid map.
    pub fn dense(height: usize, width: usize, values: Vec<f32>) -> Result<Self> {
        Self::new(height, width, values, vec![true; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn index_of(&self, loc: Location) -> Result<usize> {
        linear_index(self.height, self.width, loc)
    }

    pub fn location_of(&self, index: usize) -> Location {
        Location::new(index / self.width, index % self.width)
    }

    pub fn is_valid(&self, loc: Location) -> bool {
        self.index_of(loc).map(|i| self.mask[i]).unwrap_or(false)
    }

    /// Depth at a valid location.
    pub fn depth(&self, loc: Location) -> Result<f64> {
        let i = self.index_of(loc)?;
        if !self.mask[i] {
            return Err(domain(format!(
                "location ({}, {}) is masked",
                loc.row, loc.col
            )));
        }
        Ok(self.values[i] as f64)
    }

    /// Linear indices of all valid pixels, ascending.
    pub fn valid_indices(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&i| self.mask[i]).collect()
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Largest depth over valid pixels.
    pub fn max_valid_depth(&self) -> Option<f64> {
        self.values
            .iter()
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .map(|(&v, _)| v as f64)
            .reduce(f64::max)
    }

    /// Depth values widened to `f64`, masked pixels included.
    pub fn to_grid(&self) -> Grid {
        Grid {
            height: self.height,
            width: self.width,
            values: self.values.iter().map(|&v| v as f64).collect(),
        }
    }

    /// Rounds a grid to single precision; all pixels valid.
    pub fn from_grid(grid: &Grid) -> Result<Self> {
        Self::dense(
            grid.height,
            grid.width,
            grid.values.iter().map(|&v| v as f32).collect(),
        )
    }

    /// Writes `path` as a grayscale PFM and `path.mask.pgm` as the mask.
    pub fn write_pfm(&self, path: impl AsRef<Path>, endian: Endian) -> Result<()> {
        let path = path.as_ref();
        let image = FloatImage::new(self.width, self.height, self.values.clone())?;
        pfm::write(path, &image, endian)?;
        pfm::write_mask(pfm::mask_path(path), self.width, self.height, &self.mask)
    }

    /// Reads a PFM and its sidecar mask. A missing sidecar means all pixels
    /// are valid.
    pub fn read_pfm(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let image = pfm::read(path)?;
        let mask_path = pfm::mask_path(path);
        let mask = if mask_path.exists() {
            let (w, h, mask) = pfm::read_mask(&mask_path)?;
            if (w, h) != (image.width, image.height) {
                return Err(format(format!(
                    "mask is {w}x{h} but depth map is {}x{}",
                    image.width, image.height
                )));
            }
            mask
        } else {
            vec![true; image.width * image.height]
        };
        for (i, (&v, &ok)) in image.data.iter().zip(&mask).enumerate() {
            if ok && v.is_nan() {
                return Err(format(format!("NaN depth at valid pixel {i}")));
            }
        }
        Self::new(image.height, image.width, image.data, mask).map_err(|e| match e {
            crate::Error::Domain(m) => crate::Error::Format(m),
            other => other,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    /// Depth grows left to right.
    RampHorizontal,
    /// Depth grows top to bottom.
    RampVertical,
    /// Depth grows with distance from the center pixel.
    RadialBowl,
    /// Four constant vertical bands, nearest on the left; pixels touching a
    /// band edge are masked.
    Steps,
    /// A seeded sum of smooth bumps.
    RandomSmooth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub kind: SceneKind,
    pub height: usize,
    pub width: usize,
    pub min_depth: f64,
    pub max_depth: f64,
    pub seed: u64,
}

const STEP_BANDS: usize = 4;
const SMOOTH_BUMPS: usize = 6;

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.height < 4 || self.width < 4 {
            return Err(domain(format!(
                "scene must be at least 4x4, got {}x{}",
                self.height, self.width
            )));
        }
        if !(self.min_depth >= 0.0 && self.max_depth > self.min_depth && self.max_depth.is_finite())
        {
            return Err(domain(format!(
                "depth range [{}, {}] must satisfy 0 <= min < max",
                self.min_depth, self.max_depth
            )));
        }
        Ok(())
    }

    /// Pixel the bowl is centered on.
    pub fn center(&self) -> Location {
        Location::new(self.height / 2, self.width / 2)
    }
}

/// Renders a synthetic scene. Output depends on `spec` alone.
pub fn generate_scene(spec: &SceneSpec) -> Result<DepthMap> {
    spec.validate()?;
    let (h, w) = (spec.height, spec.width);
    let span = spec.max_depth - spec.min_depth;
    // unit-range profile, rescaled at the end
    let mut unit = vec![0.0f64; h * w];
    let mut mask = vec![true; h * w];
    match spec.kind {
        SceneKind::RampHorizontal => {
            for r in 0..h {
                for c in 0..w {
                    unit[r * w + c] = c as f64 / (w - 1) as f64;
                }
            }
        }
        SceneKind::RampVertical => {
            for r in 0..h {
                for c in 0..w {
                    unit[r * w + c] = r as f64 / (h - 1) as f64;
                }
            }
        }
        SceneKind::RadialBowl => {
            let center = spec.center();
            let dist = |r: usize, c: usize| {
                let dr = r as f64 - center.row as f64;
                let dc = c as f64 - center.col as f64;
                (dr * dr + dc * dc).sqrt()
            };
            let reach = [(0, 0), (0, w - 1), (h - 1, 0), (h - 1, w - 1)]
                .iter()
                .map(|&(r, c)| dist(r, c))
                .fold(0.0, f64::max);
            for r in 0..h {
                for c in 0..w {
                    unit[r * w + c] = dist(r, c) / reach;
                }
            }
        }
        SceneKind::Steps => {
            let band = |c: usize| c * STEP_BANDS / w;
            for r in 0..h {
                for c in 0..w {
                    unit[r * w + c] = band(c) as f64 / (STEP_BANDS - 1) as f64;
                    let edge =
                        (c > 0 && band(c - 1) != band(c)) || (c + 1 < w && band(c + 1) != band(c));
                    mask[r * w + c] = !edge;
                }
            }
        }
        SceneKind::RandomSmooth => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let bumps: Vec<(f64, f64, f64, f64)> = (0..SMOOTH_BUMPS)
                .map(|_| {
                    (
                        rng.random_range(0.0..h as f64),
                        rng.random_range(0.0..w as f64),
                        rng.random_range(0.15..0.5) * h.max(w) as f64,
                        rng.random_range(-1.0..1.0),
                    )
                })
                .collect();
            for r in 0..h {
                for c in 0..w {
                    unit[r * w + c] = bumps
                        .iter()
                        .map(|&(br, bc, width, amp)| {
                            let d2 = (r as f64 - br).powi(2) + (c as f64 - bc).powi(2);
                            amp * (-d2 / (2.0 * width * width)).exp()
                        })
                        .sum();
                }
            }
            let lo = unit.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = unit.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let range = if hi > lo { hi - lo } else { 1.0 };
            for v in &mut unit {
                *v = (*v - lo) / range;
            }
        }
    }
    let values = unit
        .iter()
        .map(|&u| (spec.min_depth + span * u).clamp(spec.min_depth, spec.max_depth) as f32)
        .collect();
    DepthMap::new(h, w, values, mask)
}
