//! Differentiable pixel scorers producing log-domain PL scores.

use std::fs;
use std::path::Path;

use crate::depth::{linear_index, Grid, Location};
use crate::error::{domain, format, Result};
use crate::pfm::{self, Endian, FloatImage};
use crate::pl::ScoreVector;

/// A parametric map from pixel locations to raw PL scores.
pub trait Scorer {
    /// `(height, width)` of the pixel frame the scorer is defined on.
    fn frame(&self) -> (usize, usize);

    fn params(&self) -> &[f64];

    fn params_mut(&mut self) -> &mut [f64];

    /// Scores of `locations`, in order.
    fn forward(&self, locations: &[Location]) -> Result<ScoreVector>;

    /// Pushes `(parameter index, ∂loss/∂parameter)` terms for a loss whose
    /// gradient with respect to `forward(locations)` is `score_grad`.
    /// Indices may repeat; the caller sums them.
    fn backward(
        &self,
        locations: &[Location],
        score_grad: &[f64],
        sink: &mut dyn FnMut(usize, f64),
    ) -> Result<()>;

    /// Scores of every pixel in the frame.
    fn score_grid(&self) -> Grid;
}

/// One free score per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularScorer {
    weights: Grid,
}

impl TabularScorer {
    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Ok(Self {
            weights: Grid::filled(height, width, 0.0)?,
        })
    }

    pub fn from_grid(weights: Grid) -> Result<Self> {
        if weights.values().iter().any(|w| !w.is_finite()) {
            return Err(domain("scorer weights must be finite"));
        }
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &Grid {
        &self.weights
    }

    /// Stores the weights as a PFM. Weights are rounded to `f32`.
    pub fn write_pfm(&self, path: impl AsRef<Path>, endian: Endian) -> Result<()> {
        let image = FloatImage::new(
            self.weights.width(),
            self.weights.height(),
            self.weights.values().iter().map(|&w| w as f32).collect(),
        )?;
        pfm::write(path.as_ref(), &image, endian)
    }

    pub fn read_pfm(path: impl AsRef<Path>) -> Result<Self> {
        let image = pfm::read(path.as_ref())?;
        let grid = Grid::new(
            image.height,
            image.width,
            image.data.iter().map(|&w| w as f64).collect(),
        )?;
        Self::from_grid(grid).map_err(|_| format("scorer weights must be finite"))
    }
}

impl Scorer for TabularScorer {
    fn frame(&self) -> (usize, usize) {
        (self.weights.height(), self.weights.width())
    }

    fn params(&self) -> &[f64] {
        self.weights.values()
    }

    fn params_mut(&mut self) -> &mut [f64] {
        self.weights.values_mut()
    }

    fn forward(&self, locations: &[Location]) -> Result<ScoreVector> {
        let scores = locations
            .iter()
            .map(|&l| self.weights.get(l))
            .collect::<Result<Vec<_>>>()?;
        ScoreVector::new(scores)
    }

    fn backward(
        &self,
        locations: &[Location],
        score_grad: &[f64],
        sink: &mut dyn FnMut(usize, f64),
    ) -> Result<()> {
        for (&l, &g) in locations.iter().zip(score_grad) {
            sink(self.weights.index_of(l)?, g);
        }
        Ok(())
    }

    fn score_grid(&self) -> Grid {
        self.weights.clone()
    }
}

/// Number of features seen by [`LinearFeatureScorer`].
pub const FEATURES: usize = 4;

/// `(normalized row, normalized column, distance from center, 1)` for a
/// pixel; coordinates are scaled to `[0, 1]`.
pub fn features(height: usize, width: usize, loc: Location) -> Result<[f64; FEATURES]> {
    linear_index(height, width, loc)?;
    let norm = |i: usize, n: usize| {
        if n > 1 {
            i as f64 / (n - 1) as f64
        } else {
            0.0
        }
    };
    let r = norm(loc.row, height);
    let c = norm(loc.col, width);
    let radial = ((r - 0.5).powi(2) + (c - 0.5).powi(2)).sqrt();
    Ok([r, c, radial, 1.0])
}

/// Score shared across pixels as a linear function of [`features`].
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFeatureScorer {
    height: usize,
    width: usize,
    coefficients: [f64; FEATURES],
}

impl LinearFeatureScorer {
    pub fn new(height: usize, width: usize, coefficients: [f64; FEATURES]) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(domain("scorer frame must be nonempty"));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(domain("coefficients must be finite"));
        }
        Ok(Self {
            height,
            width,
            coefficients,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, [0.0; FEATURES])
    }

    pub fn coefficients(&self) -> [f64; FEATURES] {
        self.coefficients
    }

    /// Four lines, one coefficient each, in shortest round-trip form.
    pub fn to_text(&self) -> String {
        self.coefficients.iter().map(|c| format!("{c}\n")).collect()
    }

    pub fn from_text(text: &str, height: usize, width: usize) -> Result<Self> {
        let values = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.trim()
                    .parse::<f64>()
                    .map_err(|_| format(format!("bad coefficient {l:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let coefficients: [f64; FEATURES] = values.try_into().map_err(|v: Vec<f64>| {
            format(format!(
                "expected {FEATURES} coefficients, found {}",
                v.len()
            ))
        })?;
        Self::new(height, width, coefficients).map_err(|e| format(e.to_string()))
    }

    pub fn write_text(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_text(path: impl AsRef<Path>, height: usize, width: usize) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?, height, width)
    }
}

impl Scorer for LinearFeatureScorer {
    fn frame(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    fn params(&self) -> &[f64] {
        &self.coefficients
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.coefficients
    }

    fn forward(&self, locations: &[Location]) -> Result<ScoreVector> {
        let scores = locations
            .iter()
            .map(|&l| {
                let f = features(self.height, self.width, l)?;
                Ok(f.iter().zip(&self.coefficients).map(|(x, c)| x * c).sum())
            })
            .collect::<Result<Vec<f64>>>()?;
        ScoreVector::new(scores)
    }

    fn backward(
        &self,
        locations: &[Location],
        score_grad: &[f64],
        sink: &mut dyn FnMut(usize, f64),
    ) -> Result<()> {
        let mut acc = [0.0; FEATURES];
        for (&l, &g) in locations.iter().zip(score_grad) {
            let f = features(self.height, self.width, l)?;
            for k in 0..FEATURES {
                acc[k] += g * f[k];
            }
        }
        for (k, a) in acc.into_iter().enumerate() {
            sink(k, a);
        }
        Ok(())
    }

    fn score_grid(&self) -> Grid {
        let values = (0..self.height * self.width)
            .map(|i| {
                let f = features(
                    self.height,
                    self.width,
                    Location::new(i / self.width, i % self.width),
                )
                .expect("index inside frame");
                f.iter().zip(&self.coefficients).map(|(x, c)| x * c).sum()
            })
            .collect();
        Grid::new(self.height, self.width, values).expect("frame is nonempty")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tabular_returns_weights() {
        let grid = Grid::new(2, 2, vec![0.5, -1.0, 3.0, 2.0]).unwrap();
        let s = TabularScorer::from_grid(grid).unwrap();
        let out = s
            .forward(&[Location::new(1, 0), Location::new(0, 1)])
            .unwrap();
        assert_eq!(out.as_slice(), &[3.0, -1.0]);
        assert!(s.forward(&[Location::new(2, 0)]).is_err());
    }

    #[test]
    fn bias_only_is_constant() {
        let s = LinearFeatureScorer::new(5, 7, [0.0, 0.0, 0.0, 1.75]).unwrap();
        assert!(s.score_grid().values().iter().all(|&v| v == 1.75));
    }

    #[test]
    fn row_coefficient_is_monotone() {
        let s = LinearFeatureScorer::new(3, 3, [1.0, 0.0, 0.0, 0.0]).unwrap();
        let col: Vec<Location> = (0..3).map(|r| Location::new(r, 1)).collect();
        let out = s.forward(&col).unwrap();
        assert!(out[0] < out[1] && out[1] < out[2]);
        assert!(s.forward(&[Location::new(0, 3)]).is_err());
    }

    #[test]
    fn feature_values() {
        assert_eq!(
            features(5, 5, Location::new(2, 2)).unwrap(),
            [0.5, 0.5, 0.0, 1.0]
        );
        let f = features(3, 5, Location::new(0, 4)).unwrap();
        assert_eq!(f[0], 0.0);
        assert_eq!(f[1], 1.0);
        assert!((f[2] - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn text_format_rejects_wrong_arity() {
        assert!(LinearFeatureScorer::from_text("1\n2\n3\n", 4, 4).is_err());
        assert!(LinearFeatureScorer::from_text("1\n2\n3\nx\n", 4, 4).is_err());
        let s = LinearFeatureScorer::new(4, 4, [0.1, -2.0, 1e-300, 3.0]).unwrap();
        assert_eq!(
            LinearFeatureScorer::from_text(&s.to_text(), 4, 4).unwrap(),
            s
        );
    }
}
