//! Operator matrices in the truncated Hermite basis and spectral-norm estimation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{input, numerical, Result};
use crate::hermite_space::{FunctionRep, HermiteBasis};
use crate::phase::C64;

pub type CMatrix = DMatrix<C64>;

/// Provenance attached to every assembled matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MatrixMeta {
    pub symbol: String,
    pub method: String,
    pub h: f64,
    pub order: usize,
    #[serde(default)]
    pub notes: Vec<String>,
}

/// Matrix of an operator: entry `(l, k)` is `⟨A e_k, e_l⟩_{L²(μ_{h/2})}`.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub basis: HermiteBasis,
    pub entries: CMatrix,
    pub meta: MatrixMeta,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorMatrixJson {
    pub dim: usize,
    pub h: f64,
    pub max_degree: usize,
    pub order: String,
    pub size: usize,
    pub meta: MatrixMeta,
    /// Row-major `[re, im]` pairs.
    pub entries: Vec<[f64; 2]>,
}

impl OperatorMatrix {
    pub fn new(basis: HermiteBasis, entries: CMatrix, meta: MatrixMeta) -> Result<Self> {
        if entries.nrows() != basis.len() || entries.ncols() != basis.len() {
            return input("operator matrix size does not match the basis");
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return numerical(format!("non-finite entries in {} matrix", meta.method));
        }
        Ok(Self { basis, entries, meta })
    }

    pub fn identity(basis: &HermiteBasis) -> Self {
        let n = basis.len();
        Self {
            basis: basis.clone(),
            entries: CMatrix::identity(n, n),
            meta: MatrixMeta { symbol: "identity".into(), method: "exact".into(), h: basis.h, ..Default::default() },
        }
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    /// `A f` for a representation over the same basis.
    pub fn apply(&self, f: &FunctionRep) -> Result<FunctionRep> {
        if !f.basis.same_space(&self.basis) {
            return input("apply: function and operator use different bases");
        }
        let v = DVector::from_column_slice(&f.coeffs);
        let w = &self.entries * v;
        FunctionRep::new(self.basis.clone(), w.iter().copied().collect())
    }

    /// `⟨A f, g⟩`.
    pub fn form(&self, f: &FunctionRep, g: &FunctionRep) -> Result<C64> {
        let af = self.apply(f)?;
        af.inner(g)
    }

    pub fn sub(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        if !self.basis.same_space(&other.basis) {
            return input("difference of matrices over different bases");
        }
        Ok(Self {
            basis: self.basis.clone(),
            entries: &self.entries - &other.entries,
            meta: MatrixMeta {
                symbol: format!("{} - {}", self.meta.symbol, other.meta.symbol),
                method: "difference".into(),
                h: self.meta.h,
                order: self.meta.order.max(other.meta.order),
                notes: vec![],
            },
        })
    }

    pub fn max_abs_diff(&self, other: &OperatorMatrix) -> f64 {
        (&self.entries - &other.entries).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entry of `A − A*`.
    pub fn hermitian_defect(&self) -> f64 {
        (&self.entries - self.entries.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> OperatorMatrixJson {
        let n = self.size();
        let mut entries = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                let z = self.entries[(r, c)];
                entries.push([z.re, z.im]);
            }
        }
        OperatorMatrixJson {
            dim: self.basis.dim,
            h: self.basis.h,
            max_degree: self.basis.max_degree,
            order: "graded-lexicographic".into(),
            size: n,
            meta: self.meta.clone(),
            entries,
        }
    }

    pub fn from_json(j: &OperatorMatrixJson) -> Result<Self> {
        let basis = HermiteBasis::new(j.dim, j.h, j.max_degree)?;
        let n = basis.len();
        if j.entries.len() != n * n {
            return input("matrix JSON has the wrong number of entries");
        }
        let m = CMatrix::from_row_iterator(n, n, j.entries.iter().map(|e| C64::new(e[0], e[1])));
        Self::new(basis, m, j.meta.clone())
    }
}

/// Spectral-norm estimate with its convergence record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    pub residual: f64,
}

pub const NORM_ITER_CAP: usize = 5000;
pub const NORM_REL_TOL: f64 = 1e-6;
/// Iterations after which a stalled estimate on a small matrix switches to a dense SVD.
pub const NORM_DENSE_AFTER: usize = 300;
pub const NORM_DENSE_MAX: usize = 1500;

/// Largest singular value by block power iteration on `A*A` with Rayleigh-Ritz extraction.
pub fn operator_norm(a: &OperatorMatrix) -> Result<f64> {
    Ok(norm_estimate(&a.entries)?.value)
}

pub fn norm_estimate(a: &CMatrix) -> Result<NormEstimate> {
    let n = a.ncols();
    if n == 0 {
        return Ok(NormEstimate { value: 0.0, iterations: 0, residual: 0.0 });
    }
    let b = n.min(8);
    let ata_apply = |v: &CMatrix| -> CMatrix { a.adjoint() * (a * v) };
    // Deterministic start block with broad support.
    let mut q = CMatrix::from_fn(n, b, |i, j| {
        let t = (i as f64 + 1.0) * (j as f64 + 1.0);
        C64::new((0.7 * t).sin() + 1.1, (1.3 * t + j as f64).cos())
    });
    q = orthonormalize(&q);
    let mut prev = -1.0f64;
    let mut stable = 0usize;
    for it in 1..=NORM_ITER_CAP {
        // Tight clusters at the top of the spectrum stall the Ritz values.
        if it == NORM_DENSE_AFTER && n <= NORM_DENSE_MAX {
            let sv = a.clone().singular_values();
            return Ok(NormEstimate { value: sv.max(), iterations: it, residual: 0.0 });
        }
        let z = ata_apply(&q);
        let small = q.adjoint() * &z;
        let small = (&small + small.adjoint()) * C64::new(0.5, 0.0);
        let eig = nalgebra::SymmetricEigen::new(small);
        let (imax, lam) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .fold((0usize, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        let lam = lam.max(0.0);
        if lam == 0.0 {
            return Ok(NormEstimate { value: 0.0, iterations: it, residual: 0.0 });
        }
        // Ritz vector and residual for the top pair.
        let y = eig.eigenvectors.column(imax).clone_owned();
        let x = &q * &y;
        let r = (ata_apply(&CMatrix::from_column_slice(n, 1, x.as_slice())) - &x * C64::new(lam, 0.0)).norm();
        let rel_change = (lam - prev).abs() / lam;
        prev = lam;
        if rel_change < 1e-13 || r <= 1e-10 * lam {
            stable += 1;
        } else {
            stable = 0;
        }
        if stable >= 3 {
            return Ok(NormEstimate { value: lam.sqrt(), iterations: it, residual: r / lam });
        }
        q = orthonormalize(&z);
    }
    numerical(format!("operator_norm: no convergence within {NORM_ITER_CAP} iterations (size {n})"))
}

/// Modified Gram-Schmidt on columns; dependent columns are replaced by unit vectors.
fn orthonormalize(m: &CMatrix) -> CMatrix {
    let (n, b) = (m.nrows(), m.ncols());
    let mut q = m.clone();
    for j in 0..b {
        for _pass in 0..2 {
            for k in 0..j {
                let qk = q.column(k).clone_owned();
                let proj = qk.dotc(&q.column(j));
                let col = q.column(j) - qk * proj;
                q.set_column(j, &col);
            }
        }
        let nrm = q.column(j).norm();
        if nrm > 1e-300 {
            let col = q.column(j) / C64::new(nrm, 0.0);
            q.set_column(j, &col);
        } else {
            let mut e = DVector::from_element(n, C64::new(0.0, 0.0));
            e[j % n] = C64::new(1.0, 0.0);
            q.set_column(j, &e);
        }
    }
    q
}
