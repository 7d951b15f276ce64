//! Orthonormal Hermite basis of `L²(ℝ^dim, μ_{h/2})`, function representations,
//! the isometry `γ` onto `L²(λ)`, and Gaussian/Lebesgue coherent states.
//!
//! One-dimensional elements are `e_n(x) = He_n(x/σ)/√(n!)` with `σ = √(h/2)`, generated by the
//! three-term recurrence in orthonormal form. Multi-dimensional elements are tensor products.
//! Basis order is graded lexicographic: total degree first, then the multi-degree tuple
//! compared coordinate by coordinate (coordinate 0 most significant).

use serde::{Deserialize, Serialize};

use crate::error::{input, Result};
use crate::gaussian_core::QuadratureRule;
use crate::phase::{symplectic, PhasePoint, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct HermiteBasis {
    pub dim: usize,
    pub h: f64,
    pub max_degree: usize,
    multis: Vec<Vec<usize>>,
    lookup: Vec<usize>,
}

impl HermiteBasis {
    pub fn new(dim: usize, h: f64, max_degree: usize) -> Result<Self> {
        if dim == 0 {
            return input("Hermite basis needs dim >= 1");
        }
        if !(h > 0.0 && h.is_finite()) {
            return input(format!("Hermite basis needs h > 0, got {h}"));
        }
        let k = max_degree + 1;
        let total = k.checked_pow(dim as u32).filter(|&t| t <= 1 << 22);
        let Some(total) = total else {
            return input(format!("basis with dim {dim} and max_degree {max_degree} is too large"));
        };
        let mut multis: Vec<Vec<usize>> = (0..total)
            .map(|mut r| {
                let mut m = vec![0usize; dim];
                for j in (0..dim).rev() {
                    m[j] = r % k;
                    r /= k;
                }
                m
            })
            .collect();
        multis.sort_by(|a, b| {
            let (da, db): (usize, usize) = (a.iter().sum(), b.iter().sum());
            da.cmp(&db).then_with(|| a.cmp(b))
        });
        let mut lookup = vec![0usize; total];
        for (i, m) in multis.iter().enumerate() {
            lookup[Self::radix(m, k)] = i;
        }
        Ok(Self { dim, h, max_degree, multis, lookup })
    }

    fn radix(m: &[usize], k: usize) -> usize {
        m.iter().fold(0, |acc, &d| acc * k + d)
    }

    pub fn len(&self) -> usize {
        self.multis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.multis.is_empty()
    }

    pub fn sigma(&self) -> f64 {
        (self.h / 2.0).sqrt()
    }

    pub fn multi(&self, i: usize) -> &[usize] {
        &self.multis[i]
    }

    pub fn multis(&self) -> &[Vec<usize>] {
        &self.multis
    }

    /// Basis position of a multi-degree, if it lies under the per-coordinate cap.
    pub fn index_of(&self, m: &[usize]) -> Option<usize> {
        if m.len() != self.dim || m.iter().any(|&d| d > self.max_degree) {
            return None;
        }
        Some(self.lookup[Self::radix(m, self.max_degree + 1)])
    }

    /// Values `e_0(x)..e_n(x)` of the one-dimensional elements.
    pub fn eval_1d(&self, x: f64, n: usize) -> Vec<f64> {
        hermite_values(x / self.sigma(), n)
    }

    /// All basis elements at `x`, in basis order.
    pub fn eval_all(&self, x: &[f64]) -> Vec<f64> {
        let tables: Vec<Vec<f64>> = x.iter().map(|&xi| self.eval_1d(xi, self.max_degree)).collect();
        self.multis
            .iter()
            .map(|m| m.iter().enumerate().map(|(j, &d)| tables[j][d]).product())
            .collect()
    }

    pub fn same_space(&self, other: &HermiteBasis) -> bool {
        self.dim == other.dim && self.h == other.h && self.max_degree == other.max_degree
    }
}

/// Orthonormal probabilists' Hermite values `He_k(y)/√(k!)` for `k = 0..=n`.
pub fn hermite_values(y: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    if n >= 1 {
        out.push(y);
    }
    for k in 1..n {
        let next = (y * out[k] - (k as f64).sqrt() * out[k - 1]) / ((k + 1) as f64).sqrt();
        out.push(next);
    }
    out
}

/// A function on `E` given by Hermite coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionRep {
    pub basis: HermiteBasis,
    pub coeffs: Vec<C64>,
}

impl FunctionRep {
    pub fn new(basis: HermiteBasis, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return input(format!("expected {} coefficients, got {}", basis.len(), coeffs.len()));
        }
        Ok(Self { basis, coeffs })
    }

    pub fn zero(basis: &HermiteBasis) -> Self {
        Self { basis: basis.clone(), coeffs: vec![C64::new(0.0, 0.0); basis.len()] }
    }

    pub fn constant(basis: &HermiteBasis, c: C64) -> Self {
        let mut f = Self::zero(basis);
        f.coeffs[0] = c;
        f
    }

    pub fn basis_element(basis: &HermiteBasis, i: usize) -> Self {
        let mut f = Self::zero(basis);
        f.coeffs[i] = C64::new(1.0, 0.0);
        f
    }

    pub fn eval(&self, x: &[f64]) -> C64 {
        let vals = self.basis.eval_all(x);
        self.coeffs.iter().zip(&vals).map(|(c, v)| c * v).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `⟨self, other⟩ = Σ a_k conj(b_k)`, linear in the first argument.
    pub fn inner(&self, other: &FunctionRep) -> Result<C64> {
        if !self.basis.same_space(&other.basis) {
            return input("inner product of representations over different bases");
        }
        Ok(self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b.conj()).sum())
    }

    pub fn scale(&self, c: C64) -> Self {
        Self { basis: self.basis.clone(), coeffs: self.coeffs.iter().map(|v| v * c).collect() }
    }

    pub fn to_json(&self) -> FunctionRepJson {
        FunctionRepJson {
            dim: self.basis.dim,
            h: self.basis.h,
            max_degree: self.basis.max_degree,
            coeffs: self.coeffs.iter().map(|c| [c.re, c.im]).collect(),
        }
    }

    pub fn from_json(j: &FunctionRepJson) -> Result<Self> {
        let basis = HermiteBasis::new(j.dim, j.h, j.max_degree)?;
        Self::new(basis, j.coeffs.iter().map(|c| C64::new(c[0], c[1])).collect())
    }
}

/// Serialized form: coefficients in basis order as `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionRepJson {
    pub dim: usize,
    pub h: f64,
    pub max_degree: usize,
    pub coeffs: Vec<[f64; 2]>,
}

fn gamma_factor(x: &[f64], h: f64) -> f64 {
    let d = x.len() as f64;
    (std::f64::consts::PI * h).powf(-d / 4.0) * (-x.iter().map(|v| v * v).sum::<f64>() / (2.0 * h)).exp()
}

/// `γ f(x) = (πh)^{-dim/4} f(x) e^{-|x|²/(2h)}`, mapping `L²(μ_{h/2})` onto `L²(λ)`.
pub fn gamma_map(f: &FunctionRep, x: &[f64]) -> Result<C64> {
    if x.len() != f.basis.dim {
        return input(format!("gamma_map: point length {} vs dim {}", x.len(), f.basis.dim));
    }
    Ok(f.eval(x) * gamma_factor(x, f.basis.h))
}

/// `γ` applied to an arbitrary function of `x`.
pub fn gamma_map_fn(f: impl Fn(&[f64]) -> C64, h: f64) -> impl Fn(&[f64]) -> C64 {
    move |x| f(x) * gamma_factor(x, h)
}

/// Coefficients `⟨f, e_k⟩_{L²(μ_{h/2})}` by the given quadrature rule for `μ_{h/2}`.
pub fn project(f: impl Fn(&[f64]) -> C64, basis: &HermiteBasis, rule: &QuadratureRule) -> Result<FunctionRep> {
    if rule.dim != basis.dim {
        return input("project: rule and basis dimensions differ");
    }
    if (rule.h - basis.h / 2.0).abs() > 1e-14 * basis.h {
        return input(format!("project: rule variance {} must equal h/2 = {}", rule.h, basis.h / 2.0));
    }
    let mut coeffs = vec![C64::new(0.0, 0.0); basis.len()];
    rule.rule.for_each(|x, w| {
        let fx = f(x) * w;
        for (c, v) in coeffs.iter_mut().zip(basis.eval_all(x)) {
            *c += fx * v;
        }
    });
    FunctionRep::new(basis.clone(), coeffs)
}

/// `Ψ_{X,h}(u) = exp(u·(a+ib)/h − |a|²/(2h) − i a·b/(2h))` for `X = (a, b)`.
pub fn coherent_fn(x: &PhasePoint, h: f64) -> impl Fn(&[f64]) -> C64 {
    let a = x.x.clone();
    let b = x.xi.clone();
    let na: f64 = a.iter().map(|v| v * v).sum();
    let ab: f64 = a.iter().zip(&b).map(|(p, q)| p * q).sum();
    move |u: &[f64]| {
        let re: f64 = u.iter().zip(&a).map(|(p, q)| p * q).sum::<f64>() / h - na / (2.0 * h);
        let im: f64 = u.iter().zip(&b).map(|(p, q)| p * q).sum::<f64>() / h - ab / (2.0 * h);
        C64::new(re, im).exp()
    }
}

/// A truncated coherent state with its resolution diagnostics.
#[derive(Debug, Clone)]
pub struct CoherentRep {
    pub rep: FunctionRep,
    /// `Σ|c_k|²` retained by the truncation (the exact state has norm 1).
    pub captured_norm_sq: f64,
    /// Set when `|X|²/(2h) > max_degree/4`.
    pub under_resolved: bool,
}

/// Hermite coefficients of `Ψ_{X,h}`.
///
/// Per coordinate, `Ψ = e^{-|X_j|²/(4h)} Σ_n s_j^n/√(n!) e_n` with `s_j = (a_j + i b_j)/√(2h)`,
/// which is the exact projection onto the truncated basis.
pub fn coherent_state(x: &PhasePoint, h: f64, basis: &HermiteBasis) -> Result<CoherentRep> {
    if x.dim() != basis.dim {
        return input("coherent_state: phase point and basis dimensions differ");
    }
    if (h - basis.h).abs() > 1e-14 * h {
        return input("coherent_state: h differs from the basis parameter");
    }
    let n = basis.max_degree;
    let tables: Vec<Vec<C64>> = (0..basis.dim)
        .map(|j| {
            let s = C64::new(x.x[j], x.xi[j]) / (2.0 * h).sqrt();
            let pref = (-(x.x[j] * x.x[j] + x.xi[j] * x.xi[j]) / (4.0 * h)).exp();
            let mut t = Vec::with_capacity(n + 1);
            let mut term = C64::new(pref, 0.0);
            t.push(term);
            for k in 1..=n {
                term = term * s / (k as f64).sqrt();
                t.push(term);
            }
            t
        })
        .collect();
    let coeffs: Vec<C64> = basis
        .multis()
        .iter()
        .map(|m| m.iter().enumerate().map(|(j, &d)| tables[j][d]).product())
        .collect();
    let rep = FunctionRep::new(basis.clone(), coeffs)?;
    let captured = rep.norm_sq();
    let under = x.norm_sq() / (2.0 * h) > n as f64 / 4.0;
    Ok(CoherentRep { rep, captured_norm_sq: captured, under_resolved: under })
}

/// `⟨Ψ_U, Ψ_V⟩ = e^{-|U−V|²/(4h) + iσ(U,V)/(2h)}`.
pub fn coherent_overlap(u: &PhasePoint, v: &PhasePoint, h: f64) -> Result<C64> {
    if u.dim() != v.dim() {
        return input("coherent_overlap: dimensions differ");
    }
    let d2 = u.sub(v).norm_sq();
    Ok(C64::new(-d2 / (4.0 * h), symplectic(u, v) / (2.0 * h)).exp())
}

/// `Ψ^{Leb}_{X,h}(u) = (πh)^{-dim/4} e^{-|u−a|²/(2h)} e^{i u·b/h − i a·b/(2h)}`.
pub fn leb_coherent_state(x: &PhasePoint, h: f64) -> impl Fn(&[f64]) -> C64 {
    let a = x.x.clone();
    let b = x.xi.clone();
    let d = a.len() as f64;
    let pref = (std::f64::consts::PI * h).powf(-d / 4.0);
    let ab: f64 = a.iter().zip(&b).map(|(p, q)| p * q).sum();
    move |u: &[f64]| {
        let r2: f64 = u.iter().zip(&a).map(|(p, q)| (p - q) * (p - q)).sum();
        let ub: f64 = u.iter().zip(&b).map(|(p, q)| p * q).sum();
        C64::new(-r2 / (2.0 * h), ub / h - ab / (2.0 * h)).exp() * pref
    }
}
