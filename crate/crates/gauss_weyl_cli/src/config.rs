use std::path::{Path, PathBuf};

use gauss_weyl::limits::MAX_GH_ORDER;
use gauss_weyl::symbol_library::SymbolSpec;
use gauss_weyl::{GwError, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Largest per-coordinate basis degree accepted from a config.
pub const MAX_DEGREE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Weyl,
    Antiwick,
    Hybrid,
    Kernel,
    Classical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleName {
    Quick,
    Full,
}

/// A function on `E`: a coherent state at a flat phase point, explicit coefficients, or a basis element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateSpec {
    Coherent(Vec<f64>),
    Coeffs(Vec<[f64; 2]>),
    Basis(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum McSpec {
    Brownian {
        k: usize,
        samples: usize,
    },
    Lattice {
        #[serde(default)]
        b: Option<Vec<f64>>,
        /// Power weights `b_j = (1 + |j|)^gamma` on `sites` one-dimensional sites.
        #[serde(default)]
        gamma: Option<f64>,
        #[serde(default)]
        sites: Option<usize>,
        eps: f64,
        ladder: Vec<usize>,
        samples: usize,
    },
}

/// Every field is optional in the file; flags override whatever the file sets.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbol: Option<SymbolSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    /// Weyl coordinates for hybrid quantization, or the averaged coordinates for partial heat.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected: Option<Vec<usize>>,
    /// Each ladder is a coordinate order; step `n` uses its first `n` entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladders: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_bar: Option<bool>,
    /// Flat phase points `[x.., ξ..]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<StateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<StateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<ScaleName>,
}

/// Values given on the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub dim: Option<usize>,
    pub h: Option<f64>,
    pub degree: Option<usize>,
    pub order: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub filter: Option<String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| GwError::Input(format!("config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| GwError::Input(format!("config: {e}")))
    }

    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! take {
            ($($f:ident),*) => { $( if o.$f.is_some() { self.$f = o.$f.clone(); } )* };
        }
        take!(dim, h, degree, order, seed, out, filter);
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(h) = self.h {
            if !(h > 0.0 && h.is_finite()) {
                return Err(GwError::Input(format!("h must be positive, got {h}")));
            }
        }
        if self.dim == Some(0) {
            return Err(GwError::Input("dim must be at least 1".into()));
        }
        if let Some(n) = self.degree {
            if n > MAX_DEGREE {
                return Err(GwError::Input(format!("degree {n} exceeds the cap {MAX_DEGREE}")));
            }
        }
        if let Some(q) = self.order {
            if q == 0 || q > MAX_GH_ORDER {
                return Err(GwError::Input(format!("order must lie in 1..={MAX_GH_ORDER}, got {q}")));
            }
        }
        if let Some(t) = self.t {
            if !(t > 0.0 && t.is_finite()) {
                return Err(GwError::Input(format!("t must be positive, got {t}")));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON of the effective config.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn h(&self) -> f64 {
        self.h.unwrap_or(0.5)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("gw_out"))
    }

    /// Explicit dim, else the symbol's own dimension, else 1.
    pub fn dim_hint(&self) -> usize {
        self.dim.unwrap_or(1)
    }

    pub fn degree_for(&self, dim: usize) -> usize {
        self.degree.unwrap_or(match dim {
            1 => 12,
            2 => 6,
            3 => 4,
            _ => 3,
        })
    }
}
