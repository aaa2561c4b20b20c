//! Amplitude encoding of images into real state vectors, and the inverse.
//!
//! An image `x` of `N = D*D` pixels (row-major) is mapped to the unit vector
//! `x / ||x||`. The squared norm is kept in a [`NormContext`] so that a
//! reconstructed state can be scaled back to pixel units. Decoding takes the
//! magnitude of each amplitude, so the sign of an amplitude is not recoverable
//! and negative pixel values decode to their absolute value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A flattened image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageSample {
    pub id: usize,
    pub pixels: Vec<f64>,
}

impl ImageSample {
    pub fn new(id: usize, pixels: Vec<f64>) -> Self {
        Self { id, pixels }
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.pixels.iter().all(|&p| p == 0.0)
    }
}

/// Squared pixel norm retained for decoding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormContext {
    pub sum_sq: f64,
}

/// Real amplitude vector over `N` basis states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateVector {
    pub amplitudes: Vec<f64>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<f64>) -> Self {
        Self { amplitudes }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            amplitudes: vec![0.0; n],
        }
    }

    /// Computational basis vector `e_index`.
    pub fn basis(n: usize, index: usize) -> Self {
        let mut s = Self::zeros(n);
        s.amplitudes[index] = 1.0;
        s
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sq(&self) -> f64 {
        self.amplitudes.iter().map(|a| a * a).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.amplitudes
    }
}

impl From<Vec<f64>> for StateVector {
    fn from(amplitudes: Vec<f64>) -> Self {
        Self { amplitudes }
    }
}

/// Row-major flattening of a square image.
pub fn flatten(image: &[Vec<f64>]) -> Result<ImageSample> {
    let side = image.len();
    let mut pixels = Vec::with_capacity(side * side);
    for row in image {
        if row.len() != side {
            return Err(Error::DimensionMismatch {
                expected: side,
                actual: row.len(),
            });
        }
        pixels.extend_from_slice(row);
    }
    Ok(ImageSample::new(0, pixels))
}

pub fn encode(x: &ImageSample) -> Result<(StateVector, NormContext)> {
    let sum_sq: f64 = x.pixels.iter().map(|p| p * p).sum();
    if sum_sq == 0.0 {
        return Err(Error::ZeroVector);
    }
    let norm = sum_sq.sqrt();
    let amplitudes = x.pixels.iter().map(|p| p / norm).collect();
    Ok((StateVector::new(amplitudes), NormContext { sum_sq }))
}

/// `x^j = |B^j| * sqrt(sum_sq)`.
pub fn decode(state: &StateVector, ctx: NormContext) -> Vec<f64> {
    let scale = ctx.sum_sq.sqrt();
    state.amplitudes.iter().map(|b| b.abs() * scale).collect()
}

/// Encoded states of a whole dataset, index-aligned with the source samples.
#[derive(Debug, Clone)]
pub struct EncodedSet {
    pub states: Vec<StateVector>,
    pub norms: Vec<NormContext>,
}

impl EncodedSet {
    pub fn encode_all(samples: &[ImageSample]) -> Result<Self> {
        let (states, norms) = samples.iter().map(encode).collect::<Result<Vec<_>>>()?.into_iter().unzip();
        Ok(Self { states, norms })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, StateVector::dim)
    }
}
