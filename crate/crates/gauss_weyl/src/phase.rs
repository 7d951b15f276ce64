//! Phase-space points and the complex bilinear products used by every kernel.
//!
//! All complex "dot products" in this crate are bilinear, never sesquilinear:
//! for `a = u + iv`, `a·a = |u|² − |v|² + 2i u·v`. Conjugation is always explicit.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{input, Result};

pub type C64 = Complex64;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// A point `X = (x, ξ)` of `E²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
}

impl PhasePoint {
    pub fn new(x: Vec<f64>, xi: Vec<f64>) -> Result<Self> {
        if x.len() != xi.len() {
            return input(format!("phase point halves differ in length: {} vs {}", x.len(), xi.len()));
        }
        if x.iter().chain(xi.iter()).any(|v| !v.is_finite()) {
            return input("phase point has non-finite coordinates");
        }
        Ok(Self { x, xi })
    }

    pub fn zero(dim: usize) -> Self {
        Self { x: vec![0.0; dim], xi: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn norm_sq(&self) -> f64 {
        self.x.iter().chain(self.xi.iter()).map(|v| v * v).sum()
    }

    /// `x + iξ` per coordinate.
    pub fn plus(&self) -> Vec<C64> {
        self.x.iter().zip(&self.xi).map(|(&a, &b)| C64::new(a, b)).collect()
    }

    /// `x − iξ` per coordinate.
    pub fn minus(&self) -> Vec<C64> {
        self.x.iter().zip(&self.xi).map(|(&a, &b)| C64::new(a, -b)).collect()
    }

    pub fn sub(&self, other: &PhasePoint) -> PhasePoint {
        PhasePoint {
            x: self.x.iter().zip(&other.x).map(|(a, b)| a - b).collect(),
            xi: self.xi.iter().zip(&other.xi).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn add(&self, other: &PhasePoint) -> PhasePoint {
        PhasePoint {
            x: self.x.iter().zip(&other.x).map(|(a, b)| a + b).collect(),
            xi: self.xi.iter().zip(&other.xi).map(|(a, b)| a + b).collect(),
        }
    }

    /// Flattened `(x, ξ)` coordinates.
    pub fn flat(&self) -> Vec<f64> {
        let mut v = self.x.clone();
        v.extend_from_slice(&self.xi);
        v
    }

    pub fn from_flat(v: &[f64]) -> Self {
        let d = v.len() / 2;
        Self { x: v[..d].to_vec(), xi: v[d..].to_vec() }
    }
}

/// Bilinear complex dot product `Σ a_j b_j` (no conjugation).
pub fn bdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Bilinear square `a·a`.
pub fn bsquare(a: &[C64]) -> C64 {
    bdot(a, a)
}

/// Symplectic form `σ(X, Y) = y·ξ − x·η`.
pub fn symplectic(x: &PhasePoint, y: &PhasePoint) -> f64 {
    let t1: f64 = y.x.iter().zip(&x.xi).map(|(a, b)| a * b).sum();
    let t2: f64 = x.x.iter().zip(&y.xi).map(|(a, b)| a * b).sum();
    t1 - t2
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}
