//! Symbol families on phase space with `S_m(M, ε)` class data, heat actions, derivative
//! estimates, the norms `N_m` and `N^{(m)}_{I,h}`, and stochastic-extension defects.
//!
//! Phase points are split as `(x, ξ) ∈ ℝ^D × ℝ^D`. Heat variances are given per phase
//! coordinate as a vector of length `2D` ordered `(x_0..x_{D−1}, ξ_0..ξ_{D−1})`.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{input, numerical, Result};
use crate::gaussian_core::{chunk_rng, ProductRule, SAMPLE_CHUNK};
use crate::phase::{PhasePoint, C64};

pub type Evaluator = Arc<dyn Fn(&[f64], &[f64]) -> C64 + Send + Sync>;
/// `(variances, x, ξ) ↦ ∫ F((x,ξ) + Y) dN(0, diag(variances))(Y)`.
pub type HeatFn = Arc<dyn Fn(&[f64], &[f64], &[f64]) -> C64 + Send + Sync>;
/// `(α, β, x, ξ) ↦ ∂_u^α ∂_v^β F(x, ξ)`.
pub type DerivFn = Arc<dyn Fn(&[u32], &[u32], &[f64], &[f64]) -> C64 + Send + Sync>;

/// Growth declaration used by the quadratic-form path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Growth {
    Bounded { sup: f64 },
    Polynomial { degree: u32 },
    Undeclared,
}

/// `S_m(M, ε)` membership data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassData {
    pub m: u32,
    pub big_m: f64,
    pub eps: Vec<f64>,
}

impl ClassData {
    /// `S_ε = sup_j max(1, ε_j²)`.
    pub fn s_eps(&self) -> f64 {
        self.eps.iter().fold(1.0f64, |s, e| s.max(e * e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    /// `a cos(ωs) + c`
    Cos,
    /// `a (1 − cos(ωs)) + c`
    OneMinusCos,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub kind: PotentialKind,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default = "one")]
    pub omega: f64,
    #[serde(default)]
    pub offset: f64,
}

fn one() -> f64 {
    1.0
}

impl Potential {
    pub fn cos() -> Self {
        Self { kind: PotentialKind::Cos, amplitude: 1.0, omega: 1.0, offset: 0.0 }
    }

    pub fn eval(&self, s: f64) -> f64 {
        let c = (self.omega * s).cos();
        match self.kind {
            PotentialKind::Cos => self.amplitude * c + self.offset,
            PotentialKind::OneMinusCos => self.amplitude * (1.0 - c) + self.offset,
        }
    }

    /// `V'(s)`.
    pub fn deriv(&self, s: f64) -> f64 {
        let sn = (self.omega * s).sin() * self.omega;
        match self.kind {
            PotentialKind::Cos => -self.amplitude * sn,
            PotentialKind::OneMinusCos => self.amplitude * sn,
        }
    }

    /// `‖V^{(k)}‖_∞ = |a| ω^k` for `k ≥ 1`.
    pub fn deriv_norm(&self, k: u32) -> f64 {
        self.amplitude.abs() * self.omega.abs().powi(k as i32)
    }

    pub fn infimum(&self) -> f64 {
        let a = self.amplitude;
        match self.kind {
            PotentialKind::Cos => self.offset - a.abs(),
            PotentialKind::OneMinusCos => self.offset + (2.0 * a).min(0.0),
        }
    }
}

/// Parameters of the lattice family `F_t = e^{−t f}` with
/// `f = Σ_j g_j² ξ_j² + Σ_{(j,k): |j−k|_∞ = 1} g_j g_k V(x_j − x_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSymbolParams {
    pub lattice_dim: usize,
    /// Sites per axis; the box has `side^lattice_dim` sites in row-major order.
    pub side: usize,
    pub g: Vec<f64>,
    pub potential: Potential,
    pub t: f64,
}

impl LatticeSymbolParams {
    pub fn chain(g: Vec<f64>, potential: Potential, t: f64) -> Self {
        Self { lattice_dim: 1, side: g.len(), g, potential, t }
    }

    pub fn sites(&self) -> usize {
        self.side.pow(self.lattice_dim as u32)
    }

    fn coords(&self, j: usize) -> Vec<i64> {
        let mut c = vec![0i64; self.lattice_dim];
        let mut r = j;
        for a in (0..self.lattice_dim).rev() {
            c[a] = (r % self.side) as i64;
            r /= self.side;
        }
        c
    }

    /// Ordered neighbour pairs at `ℓ^∞` distance one.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let n = self.sites();
        let cs: Vec<Vec<i64>> = (0..n).map(|j| self.coords(j)).collect();
        let mut out = Vec::new();
        for j in 0..n {
            for k in 0..n {
                if j == k {
                    continue;
                }
                let dist = cs[j].iter().zip(&cs[k]).map(|(a, b)| (a - b).abs()).max().unwrap_or(0);
                if dist == 1 {
                    out.push((j, k));
                }
            }
        }
        out
    }

    /// Largest neighbour ratio `g_j/g_k`, at least 1.
    pub fn k0(&self) -> f64 {
        self.pairs()
            .iter()
            .filter(|(j, k)| self.g[*j] > 0.0 && self.g[*k] > 0.0)
            .map(|(j, k)| self.g[*j] / self.g[*k])
            .fold(1.0f64, f64::max)
    }

    fn validate(&self) -> Result<()> {
        if self.lattice_dim == 0 || self.side == 0 {
            return input("lattice: lattice_dim and side must be positive");
        }
        if self.g.len() != self.sites() {
            return input(format!("lattice: {} couplings for {} sites", self.g.len(), self.sites()));
        }
        if self.g.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return input("lattice: couplings must be finite and nonnegative");
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return input("lattice: t must be positive");
        }
        if !(self.potential.omega.is_finite() && self.potential.amplitude.is_finite()) {
            return input("lattice: potential derivative bounds are not finite");
        }
        Ok(())
    }
}

/// `C_m = max_{1≤α≤m} sup_ξ |∂^α e^{−ξ²}|^{1/α}`, by a dense scan of `[0, 6]`.
pub fn gaussian_derivative_constant(m: u32) -> f64 {
    let mut best = 0.0f64;
    for a in 1..=m {
        let mut sup = 0.0f64;
        for i in 0..=6000 {
            let x = i as f64 * 1e-3;
            // ∂^α e^{−x²} = (−1)^α H_α(x) e^{−x²} with physicists' Hermite H_α.
            let (mut h0, mut h1) = (1.0f64, 2.0 * x);
            let hv = if a == 0 {
                h0
            } else {
                for k in 1..a {
                    let h2 = 2.0 * x * h1 - 2.0 * k as f64 * h0;
                    h0 = h1;
                    h1 = h2;
                }
                h1
            };
            sup = sup.max((hv * (-x * x).exp()).abs());
        }
        best = best.max(sup.powf(1.0 / a as f64));
    }
    best
}

/// Class data of the lattice family from the explicit constants of its membership proof.
///
/// `λ_j = 2·3^d K₀ max(g_j², g_j^{1/m}) max_{1≤k≤2m} ‖V^{(k)}‖^{1/k}`,
/// `ε'_j = m! (m+1)^{3^d m²} max(1, t^m) λ_j`, `ε''_j = C_m g_j √t`, `ε_j = max(ε'_j, ε''_j)`.
/// `M = exp(t Σ g_j g_k max(0, −inf V))`, which is 1 for nonnegative potentials.
pub fn lattice_class(p: &LatticeSymbolParams, m: u32) -> Result<ClassData> {
    p.validate()?;
    if m == 0 {
        return input("lattice class needs m >= 1");
    }
    let d = p.lattice_dim as i32;
    let three_d = 3f64.powi(d);
    let k0 = p.k0();
    let vmax = (1..=2 * m).map(|k| p.potential.deriv_norm(k).powf(1.0 / k as f64)).fold(0.0f64, f64::max);
    let mfact: f64 = (1..=m).map(|k| k as f64).product();
    let comb = mfact * ((m + 1) as f64).powf(three_d * (m * m) as f64) * p.t.powi(m as i32).max(1.0);
    let cm = gaussian_derivative_constant(m);
    let eps = p
        .g
        .iter()
        .map(|&g| {
            let lam = 2.0 * three_d * k0 * (g * g).max(g.powf(1.0 / m as f64)) * vmax;
            (comb * lam).max(cm * g * p.t.sqrt())
        })
        .collect();
    let neg = (-p.potential.infimum()).max(0.0);
    let pair_sum: f64 = p.pairs().iter().map(|(j, k)| p.g[*j] * p.g[*k]).sum();
    Ok(ClassData { m, big_m: (p.t * pair_sum * neg).exp(), eps })
}

/// Family tag with the parameters needed by closed forms and oracles.
#[derive(Debug, Clone)]
pub enum Family {
    Constant(C64),
    Exponential { a: Vec<f64>, b: Vec<f64> },
    FourierMeasure { atoms: Vec<FourierAtom> },
    Quadratic { t_mat: DMatrix<f64>, t: f64 },
    QuadraticForm { t_mat: DMatrix<f64> },
    Lattice(LatticeSymbolParams),
    Linear { a: Vec<f64>, b: Vec<f64> },
    Monomial { directions: Vec<Vec<f64>> },
    /// `Σ_k c_k H_{s_k} base`; produced by heat-semigroup operations.
    HeatCombination { base: Arc<SymbolDescriptor>, terms: Vec<(f64, Vec<f64>)> },
    Generic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierAtom {
    pub weight: [f64; 2],
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl FourierAtom {
    pub fn c(&self) -> C64 {
        C64::new(self.weight[0], self.weight[1])
    }
}

/// A phase-space symbol: evaluator plus closed-form metadata.
#[derive(Clone)]
pub struct SymbolDescriptor {
    pub name: String,
    pub dim: usize,
    pub family: Family,
    pub class: Option<ClassData>,
    pub growth: Growth,
    pub real_valued: bool,
    eval: Evaluator,
    heat: Option<HeatFn>,
    /// Whether `heat` is exact (closed form) rather than an internal quadrature.
    pub heat_exact: bool,
    deriv: Option<DerivFn>,
}

impl std::fmt::Debug for SymbolDescriptor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SymbolDescriptor")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("class", &self.class)
            .field("growth", &self.growth)
            .finish()
    }
}

fn check_vec(v: &[f64], what: &str) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return input(format!("{what}: non-finite parameter"));
    }
    Ok(())
}

impl SymbolDescriptor {
    pub fn eval(&self, x: &[f64], xi: &[f64]) -> C64 {
        (self.eval)(x, xi)
    }

    pub fn eval_point(&self, z: &PhasePoint) -> C64 {
        (self.eval)(&z.x, &z.xi)
    }

    pub fn evaluator(&self) -> Evaluator {
        self.eval.clone()
    }

    pub fn has_closed_heat(&self) -> bool {
        self.heat.is_some()
    }

    pub fn has_exact_derivatives(&self) -> bool {
        self.deriv.is_some()
    }

    /// Generic symbol from a callable.
    pub fn from_fn(
        name: impl Into<String>,
        dim: usize,
        growth: Growth,
        real_valued: bool,
        f: impl Fn(&[f64], &[f64]) -> C64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            dim,
            family: Family::Generic,
            class: None,
            growth,
            real_valued,
            eval: Arc::new(f),
            heat: None,
            heat_exact: false,
            deriv: None,
        }
    }

    pub fn with_class(mut self, class: ClassData) -> Self {
        self.class = Some(class);
        self
    }

    /// `∫ F(Z + Y) dN(0, diag(var))(Y)` with the closed action if present, else quadrature.
    pub fn heat(&self, var: &[f64], x: &[f64], xi: &[f64]) -> Result<C64> {
        if var.len() != 2 * self.dim {
            return input(format!("heat: variance vector has length {}, expected {}", var.len(), 2 * self.dim));
        }
        if var.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return input("heat: variances must be finite and nonnegative");
        }
        if var.iter().all(|v| *v == 0.0) {
            return Ok(self.eval(x, xi));
        }
        match &self.heat {
            Some(hf) => Ok(hf(var, x, xi)),
            None => heat_quadrature(self, var, x, xi, None),
        }
    }
}

/// Per-axis Gauss-Hermite order used by [`heat_quadrature`] for `k` smoothed coordinates.
pub fn heat_order(k: usize) -> usize {
    match k {
        0..=2 => 32,
        3..=4 => 12,
        5..=6 => 6,
        _ => 4,
    }
}

/// Heat action by tensor Gauss-Hermite over the coordinates with positive variance.
pub fn heat_quadrature(f: &SymbolDescriptor, var: &[f64], x: &[f64], xi: &[f64], order: Option<usize>) -> Result<C64> {
    let d = f.dim;
    if var.len() != 2 * d || x.len() != d || xi.len() != d {
        return input("heat_quadrature: dimension mismatch");
    }
    let active: Vec<usize> = (0..2 * d).filter(|&i| var[i] > 0.0).collect();
    if active.is_empty() {
        return Ok(f.eval(x, xi));
    }
    let q = order.unwrap_or_else(|| heat_order(active.len()));
    let rule = ProductRule::gaussian(&active.iter().map(|&i| var[i]).collect::<Vec<_>>(), q)?;
    let mut xs = x.to_vec();
    let mut xis = xi.to_vec();
    Ok(rule.integrate_c(|y| {
        for (k, &i) in active.iter().enumerate() {
            if i < d {
                xs[i] = x[i] + y[k];
            } else {
                xis[i - d] = xi[i - d] + y[k];
            }
        }
        f.eval(&xs, &xis)
    }))
}

pub fn constant(dim: usize, c: C64) -> SymbolDescriptor {
    SymbolDescriptor {
        name: "constant".into(),
        dim,
        family: Family::Constant(c),
        class: Some(ClassData { m: 2, big_m: c.norm(), eps: vec![0.0; dim] }),
        growth: Growth::Bounded { sup: c.norm() },
        real_valued: c.im == 0.0,
        eval: Arc::new(move |_, _| c),
        heat: Some(Arc::new(move |_, _, _| c)),
        heat_exact: true,
        deriv: Some(Arc::new(move |al, be, _, _| {
            if al.iter().chain(be).all(|&k| k == 0) {
                c
            } else {
                C64::new(0.0, 0.0)
            }
        })),
    }
}

fn exp_phase(a: &[f64], b: &[f64], x: &[f64], xi: &[f64]) -> f64 {
    a.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() + b.iter().zip(xi).map(|(p, q)| p * q).sum::<f64>()
}

fn exp_heat_factor(a: &[f64], b: &[f64], var: &[f64]) -> f64 {
    let d = a.len();
    let s: f64 = (0..d).map(|j| var[j] * a[j] * a[j] + var[d + j] * b[j] * b[j]).sum();
    (-0.5 * s).exp()
}

fn exp_deriv_factor(a: &[f64], b: &[f64], al: &[u32], be: &[u32]) -> C64 {
    let mut c = C64::new(1.0, 0.0);
    for j in 0..a.len() {
        c *= (C64::new(0.0, a[j])).powu(al[j]) * (C64::new(0.0, b[j])).powu(be[j]);
    }
    c
}

/// `F_{a,b}(x, ξ) = e^{i(a·x + b·ξ)}` with `M = 1`, `ε_j = max(|a_j|, |b_j|)` and class order `m`.
pub fn make_exponential(a: Vec<f64>, b: Vec<f64>) -> Result<SymbolDescriptor> {
    make_exponential_m(a, b, 2)
}

pub fn make_exponential_m(a: Vec<f64>, b: Vec<f64>, m: u32) -> Result<SymbolDescriptor> {
    if a.len() != b.len() || a.is_empty() {
        return input("exponential symbol: a and b must have equal positive length");
    }
    check_vec(&a, "exponential symbol")?;
    check_vec(&b, "exponential symbol")?;
    let dim = a.len();
    let eps = a.iter().zip(&b).map(|(p, q)| p.abs().max(q.abs())).collect();
    let (a1, b1) = (a.clone(), b.clone());
    let (a2, b2) = (a.clone(), b.clone());
    let (a3, b3) = (a.clone(), b.clone());
    Ok(SymbolDescriptor {
        name: "exponential".into(),
        dim,
        family: Family::Exponential { a, b },
        class: Some(ClassData { m, big_m: 1.0, eps }),
        growth: Growth::Bounded { sup: 1.0 },
        real_valued: false,
        eval: Arc::new(move |x, xi| C64::from_polar(1.0, exp_phase(&a1, &b1, x, xi))),
        heat: Some(Arc::new(move |var, x, xi| {
            C64::from_polar(exp_heat_factor(&a2, &b2, var), exp_phase(&a2, &b2, x, xi))
        })),
        heat_exact: true,
        deriv: Some(Arc::new(move |al, be, x, xi| {
            exp_deriv_factor(&a3, &b3, al, be) * C64::from_polar(1.0, exp_phase(&a3, &b3, x, xi))
        })),
    })
}

/// `F = Σ_k c_k F_{a_k, b_k}`, the symbol of a finitely supported Fourier measure.
pub fn fourier_measure(atoms: Vec<FourierAtom>) -> Result<SymbolDescriptor> {
    if atoms.is_empty() {
        return input("fourier_measure: no atoms");
    }
    let dim = atoms[0].a.len();
    for at in &atoms {
        if at.a.len() != dim || at.b.len() != dim || dim == 0 {
            return input("fourier_measure: inconsistent atom dimensions");
        }
        check_vec(&at.a, "fourier_measure")?;
        check_vec(&at.b, "fourier_measure")?;
        if !(at.weight[0].is_finite() && at.weight[1].is_finite()) {
            return input("fourier_measure: non-finite weight");
        }
    }
    let total: f64 = atoms.iter().map(|a| a.c().norm()).sum();
    let eps = (0..dim)
        .map(|j| atoms.iter().map(|at| at.a[j].abs().max(at.b[j].abs())).fold(0.0, f64::max))
        .collect();
    let real = is_conjugate_symmetric(&atoms);
    let (e1, e2, e3) = (atoms.clone(), atoms.clone(), atoms.clone());
    Ok(SymbolDescriptor {
        name: "fourier_measure".into(),
        dim,
        family: Family::FourierMeasure { atoms },
        class: Some(ClassData { m: 2, big_m: total, eps }),
        growth: Growth::Bounded { sup: total },
        real_valued: real,
        eval: Arc::new(move |x, xi| e1.iter().map(|at| at.c() * C64::from_polar(1.0, exp_phase(&at.a, &at.b, x, xi))).sum()),
        heat: Some(Arc::new(move |var, x, xi| {
            e2.iter()
                .map(|at| at.c() * C64::from_polar(exp_heat_factor(&at.a, &at.b, var), exp_phase(&at.a, &at.b, x, xi)))
                .sum()
        })),
        heat_exact: true,
        deriv: Some(Arc::new(move |al, be, x, xi| {
            e3.iter()
                .map(|at| {
                    at.c() * exp_deriv_factor(&at.a, &at.b, al, be) * C64::from_polar(1.0, exp_phase(&at.a, &at.b, x, xi))
                })
                .sum()
        })),
    })
}

fn is_conjugate_symmetric(atoms: &[FourierAtom]) -> bool {
    atoms.iter().all(|at| {
        atoms.iter().any(|o| {
            o.a.iter().zip(&at.a).all(|(p, q)| (p + q).abs() < 1e-15)
                && o.b.iter().zip(&at.b).all(|(p, q)| (p + q).abs() < 1e-15)
                && (o.c() - at.c().conj()).norm() < 1e-15
        })
    })
}

/// Random real trigonometric polynomial with `pairs` conjugate atom pairs, `|a|,|b| ≤ radius`.
pub fn random_trig(dim: usize, pairs: usize, radius: f64, seed: u64) -> Result<SymbolDescriptor> {
    use rand::Rng;
    let mut rng = chunk_rng(seed, 0);
    let mut atoms = Vec::new();
    let cst = rng.random_range(-0.5..0.5);
    for _ in 0..pairs {
        let a: Vec<f64> = (0..dim).map(|_| rng.random_range(-radius..radius)).collect();
        let b: Vec<f64> = (0..dim).map(|_| rng.random_range(-radius..radius)).collect();
        let w = [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
        atoms.push(FourierAtom { weight: w, a: a.clone(), b: b.clone() });
        atoms.push(FourierAtom { weight: [w[0], -w[1]], a: a.iter().map(|v| -v).collect(), b: b.iter().map(|v| -v).collect() });
    }
    atoms.push(FourierAtom { weight: [cst, 0.0], a: vec![0.0; dim], b: vec![0.0; dim] });
    let mut s = fourier_measure(atoms)?;
    s.name = "trig".into();
    Ok(s)
}

fn check_symmetric(t: &DMatrix<f64>, n: usize, what: &str) -> Result<()> {
    if t.nrows() != n || t.ncols() != n {
        return input(format!("{what}: T must be {n}x{n}"));
    }
    let scale = t.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if (t - t.transpose()).iter().any(|v| v.abs() > 1e-12 * scale) {
        return input(format!("{what}: T is not symmetric"));
    }
    if t.iter().any(|v| !v.is_finite()) {
        return input(format!("{what}: T has non-finite entries"));
    }
    Ok(())
}

fn quad_value(t: &DMatrix<f64>, x: &[f64], xi: &[f64]) -> f64 {
    let d = x.len();
    let z: Vec<f64> = x.iter().chain(xi).copied().collect();
    let mut s = 0.0;
    for i in 0..2 * d {
        for j in 0..2 * d {
            s += t[(i, j)] * z[i] * z[j];
        }
    }
    s
}

/// `F_t(X) = e^{−t⟨TX, X⟩}` for symmetric positive semidefinite `T` on `ℝ^{2D}`.
///
/// Closed heat action: with `A = 2tT` and `Σ = diag(var)`,
/// `H F(Z) = det(I + ΣA)^{−1/2} exp(−½ Zᵀ A (I + ΣA)^{−1} Z)`.
pub fn make_quadratic(t_mat: DMatrix<f64>, t: f64) -> Result<SymbolDescriptor> {
    let n = t_mat.nrows();
    if n == 0 || n % 2 == 1 {
        return input("quadratic symbol: T must be 2D x 2D");
    }
    check_symmetric(&t_mat, n, "quadratic symbol")?;
    if !(t > 0.0 && t.is_finite()) {
        return input("quadratic symbol: t must be positive");
    }
    let eig = nalgebra::SymmetricEigen::new(t_mat.clone());
    if eig.eigenvalues.iter().any(|&l| l < -1e-12) {
        return input("quadratic symbol: T is not positive semidefinite");
    }
    let dim = n / 2;
    let (t1, t2) = (t_mat.clone(), t_mat.clone());
    Ok(SymbolDescriptor {
        name: "quadratic".into(),
        dim,
        family: Family::Quadratic { t_mat, t },
        class: None,
        growth: Growth::Bounded { sup: 1.0 },
        real_valued: true,
        eval: Arc::new(move |x, xi| C64::new((-t * quad_value(&t1, x, xi)).exp(), 0.0)),
        heat: Some(Arc::new(move |var, x, xi| {
            let a = &t2 * (2.0 * t);
            let sig = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(var));
            let m = DMatrix::<f64>::identity(n, n) + &sig * &a;
            let det = m.determinant();
            let inv = m.try_inverse().unwrap_or_else(|| DMatrix::from_element(n, n, f64::NAN));
            let q = &a * inv;
            let z: Vec<f64> = x.iter().chain(xi).copied().collect();
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += q[(i, j)] * z[i] * z[j];
                }
            }
            C64::new(det.powf(-0.5) * (-0.5 * s).exp(), 0.0)
        })),
        heat_exact: true,
        deriv: None,
    })
}

/// The quadratic form `φ(X) = ⟨TX, X⟩` itself (polynomial growth, degree 2).
pub fn quadratic_form(t_mat: DMatrix<f64>) -> Result<SymbolDescriptor> {
    let n = t_mat.nrows();
    if n == 0 || n % 2 == 1 {
        return input("quadratic form: T must be 2D x 2D");
    }
    check_symmetric(&t_mat, n, "quadratic form")?;
    let (t1, t2) = (t_mat.clone(), t_mat.clone());
    Ok(SymbolDescriptor {
        name: "quadratic_form".into(),
        dim: n / 2,
        family: Family::QuadraticForm { t_mat },
        class: None,
        growth: Growth::Polynomial { degree: 2 },
        real_valued: true,
        eval: Arc::new(move |x, xi| C64::new(quad_value(&t1, x, xi), 0.0)),
        heat: Some(Arc::new(move |var, x, xi| {
            let tr: f64 = (0..n).map(|i| t2[(i, i)] * var[i]).sum();
            C64::new(quad_value(&t2, x, xi) + tr, 0.0)
        })),
        heat_exact: true,
        deriv: None,
    })
}

/// `F(x, ξ) = a·x + b·ξ`.
pub fn linear(a: Vec<f64>, b: Vec<f64>) -> Result<SymbolDescriptor> {
    if a.len() != b.len() || a.is_empty() {
        return input("linear symbol: a and b must have equal positive length");
    }
    check_vec(&a, "linear symbol")?;
    check_vec(&b, "linear symbol")?;
    let (a1, b1) = (a.clone(), b.clone());
    let (a2, b2) = (a.clone(), b.clone());
    Ok(SymbolDescriptor {
        name: "linear".into(),
        dim: a.len(),
        family: Family::Linear { a, b },
        class: None,
        growth: Growth::Polynomial { degree: 1 },
        real_valued: true,
        eval: Arc::new(move |x, xi| C64::new(exp_phase(&a1, &b1, x, xi), 0.0)),
        heat: Some(Arc::new(move |_, x, xi| C64::new(exp_phase(&a2, &b2, x, xi), 0.0))),
        heat_exact: true,
        deriv: None,
    })
}

/// `F(X) = Π_k ℓ_{u_k}(X)` with directions `u_k ∈ ℝ^{2D}` acting on `X = (x, ξ)`.
pub fn monomial(directions: Vec<Vec<f64>>) -> Result<SymbolDescriptor> {
    if directions.is_empty() || directions[0].is_empty() || directions[0].len() % 2 == 1 {
        return input("monomial: directions must be nonempty vectors of even length 2D");
    }
    let n = directions[0].len();
    if directions.iter().any(|u| u.len() != n) {
        return input("monomial: directions have different lengths");
    }
    for u in &directions {
        check_vec(u, "monomial")?;
    }
    let deg = directions.len() as u32;
    let dirs = directions.clone();
    Ok(SymbolDescriptor {
        name: "monomial".into(),
        dim: n / 2,
        family: Family::Monomial { directions },
        class: None,
        growth: Growth::Polynomial { degree: deg },
        real_valued: true,
        eval: Arc::new(move |x, xi| {
            let z: Vec<f64> = x.iter().chain(xi).copied().collect();
            C64::new(dirs.iter().map(|u| u.iter().zip(&z).map(|(p, q)| p * q).sum::<f64>()).product(), 0.0)
        }),
        heat: None,
        heat_exact: false,
        deriv: None,
    })
}

fn lattice_x_energy(p: &LatticeSymbolParams, pairs: &[(usize, usize)], x: &[f64]) -> f64 {
    pairs.iter().map(|&(j, k)| p.g[j] * p.g[k] * p.potential.eval(x[j] - x[k])).sum()
}

/// Lattice family `F_t` with class data for order `m`.
///
/// The heat action is closed form in the `ξ` variables and uses tensor Gauss-Hermite in the
/// smoothed `x` variables.
pub fn make_lattice(params: LatticeSymbolParams, m: u32) -> Result<SymbolDescriptor> {
    let class = lattice_class(&params, m)?;
    let dim = params.sites();
    let pairs = params.pairs();
    let t = params.t;
    let (p1, pr1) = (params.clone(), pairs.clone());
    let (p2, pr2) = (params.clone(), pairs.clone());
    let eval: Evaluator = Arc::new(move |x, xi| {
        let q: f64 = p1.g.iter().zip(xi).map(|(g, v)| g * g * v * v).sum();
        C64::new((-t * (q + lattice_x_energy(&p1, &pr1, x))).exp(), 0.0)
    });
    let heat: HeatFn = Arc::new(move |var, x, xi| {
        let d = x.len();
        let mut xi_part = 1.0;
        for j in 0..d {
            let c = t * p2.g[j] * p2.g[j];
            let den = 1.0 + 2.0 * c * var[d + j];
            xi_part *= den.powf(-0.5) * (-c * xi[j] * xi[j] / den).exp();
        }
        let active: Vec<usize> = (0..d).filter(|&j| var[j] > 0.0).collect();
        if active.is_empty() {
            return C64::new(xi_part * (-t * lattice_x_energy(&p2, &pr2, x)).exp(), 0.0);
        }
        let q = match active.len() {
            1 => 40,
            2 => 24,
            3 => 12,
            _ => 8,
        };
        let vars: Vec<f64> = active.iter().map(|&j| var[j]).collect();
        let rule = match ProductRule::gaussian(&vars, q) {
            Ok(r) => r,
            Err(_) => return C64::new(f64::NAN, 0.0),
        };
        let mut xs = x.to_vec();
        let xpart = rule.integrate(|y| {
            for (k, &j) in active.iter().enumerate() {
                xs[j] = x[j] + y[k];
            }
            (-t * lattice_x_energy(&p2, &pr2, &xs)).exp()
        });
        C64::new(xi_part * xpart, 0.0)
    });
    let sup = class.big_m;
    Ok(SymbolDescriptor {
        name: "lattice".into(),
        dim,
        family: Family::Lattice(params),
        class: Some(class),
        growth: Growth::Bounded { sup },
        real_valued: true,
        eval,
        heat: Some(heat),
        heat_exact: false,
        deriv: None,
    })
}

/// `Σ_k c_k H_{s_k} F` as a symbol; its own heat action adds variances.
pub fn heat_combination(base: &SymbolDescriptor, terms: Vec<(f64, Vec<f64>)>, name: impl Into<String>) -> Result<SymbolDescriptor> {
    let dim = base.dim;
    for (c, v) in &terms {
        if v.len() != 2 * dim || v.iter().any(|s| !(s.is_finite() && *s >= 0.0)) || !c.is_finite() {
            return input("heat_combination: bad term");
        }
    }
    // Flatten nested combinations so that variances add on a single base.
    let (root, terms) = match &base.family {
        Family::HeatCombination { base: inner, terms: inner_terms } => {
            let mut out = Vec::new();
            for (c1, v1) in inner_terms {
                for (c2, v2) in &terms {
                    out.push((c1 * c2, v1.iter().zip(v2).map(|(a, b)| a + b).collect::<Vec<f64>>()));
                }
            }
            (inner.clone(), out)
        }
        _ => (Arc::new(base.clone()), terms),
    };
    let total: f64 = terms.iter().map(|(c, _)| c.abs()).sum();
    let growth = match root.growth {
        Growth::Bounded { sup } => Growth::Bounded { sup: sup * total },
        g => g,
    };
    let (r1, t1) = (root.clone(), terms.clone());
    let (r2, t2) = (root.clone(), terms.clone());
    let eval: Evaluator = Arc::new(move |x, xi| {
        t1.iter().map(|(c, v)| r1.heat(v, x, xi).unwrap_or(C64::new(f64::NAN, 0.0)) * *c).sum()
    });
    let heat: HeatFn = Arc::new(move |var, x, xi| {
        t2.iter()
            .map(|(c, v)| {
                let s: Vec<f64> = v.iter().zip(var).map(|(a, b)| a + b).collect();
                r2.heat(&s, x, xi).unwrap_or(C64::new(f64::NAN, 0.0)) * *c
            })
            .sum()
    });
    Ok(SymbolDescriptor {
        name: name.into(),
        dim,
        class: None,
        growth,
        real_valued: root.real_valued,
        heat_exact: root.heat_exact || root.heat.is_none(),
        family: Family::HeatCombination { base: root, terms },
        eval,
        heat: Some(heat),
        deriv: None,
    })
}

// ---------------------------------------------------------------------------------------------
// Derivatives

/// Finite-difference step for total derivative order `k` at a point of norm `r`.
pub fn fd_step(k: u32, r: f64) -> f64 {
    let base = if k <= 2 { 1e-4 } else { f64::EPSILON.powf(1.0 / (k as f64 + 2.0)) };
    base * r.max(1.0)
}

/// A multi-index over a coordinate support: `alpha[i], beta[i]` refer to `coords[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    pub alpha: Vec<u32>,
    pub beta: Vec<u32>,
}

impl MultiIndex {
    pub fn order(&self) -> u32 {
        self.alpha.iter().chain(&self.beta).sum()
    }

    /// All maps `coords → {0..m}²`.
    pub fn all(len: usize, m: u32) -> Vec<MultiIndex> {
        let n = 2 * len;
        let base = (m + 1) as usize;
        let total = base.pow(n as u32);
        (0..total)
            .map(|mut r| {
                let mut v = vec![0u32; n];
                for i in (0..n).rev() {
                    v[i] = (r % base) as u32;
                    r /= base;
                }
                MultiIndex { alpha: v[..len].to_vec(), beta: v[len..].to_vec() }
            })
            .collect()
    }
}

fn stencil(order: u32, step: f64) -> [f64; 3] {
    match order {
        0 => [0.0, 1.0, 0.0],
        1 => [-0.5 / step, 0.0, 0.5 / step],
        _ => [1.0 / (step * step), -2.0 / (step * step), 1.0 / (step * step)],
    }
}

/// Derivatives at `z` for every multi-index over `coords` with per-direction order `≤ m`.
///
/// Exact derivatives are used when the symbol provides them; otherwise one `3^{2|coords|}`
/// stencil grid is evaluated per total order and reduced axis by axis. Finite differences
/// support `m ≤ 2`.
pub fn derivatives_at(f: &SymbolDescriptor, z: &PhasePoint, coords: &[usize], m: u32, force_fd: bool) -> Result<HashMap<MultiIndex, C64>> {
    let d = f.dim;
    if z.dim() != d || coords.iter().any(|&c| c >= d) {
        return input("derivatives_at: coordinate out of range");
    }
    let multis = MultiIndex::all(coords.len(), m);
    let mut out = HashMap::with_capacity(multis.len());
    if let (Some(df), false) = (&f.deriv, force_fd) {
        let mut al = vec![0u32; d];
        let mut be = vec![0u32; d];
        for mi in multis {
            al.iter_mut().for_each(|v| *v = 0);
            be.iter_mut().for_each(|v| *v = 0);
            for (i, &c) in coords.iter().enumerate() {
                al[c] = mi.alpha[i];
                be[c] = mi.beta[i];
            }
            out.insert(mi, df(&al, &be, &z.x, &z.xi));
        }
        return Ok(out);
    }
    if m > 2 {
        return input("finite-difference derivatives support per-direction order <= 2");
    }
    let axes = 2 * coords.len();
    let r = z.norm_sq().sqrt();
    let max_k = (axes as u32) * m;
    let grid_len = 3usize.pow(axes as u32);
    for k in 0..=max_k {
        let group: Vec<&MultiIndex> = multis.iter().filter(|mi| mi.order() == k).collect();
        if group.is_empty() {
            continue;
        }
        let step = fd_step(k, r);
        let scale = r.max(1.0);
        if scale + step == scale {
            return numerical(format!("finite-difference step {step:e} underflows at |X| = {r:e}"));
        }
        let mut grid = Vec::with_capacity(grid_len);
        let mut x = z.x.clone();
        let mut xi = z.xi.clone();
        for gi in 0..grid_len {
            let mut rem = gi;
            for a in (0..axes).rev() {
                let off = (rem % 3) as f64 - 1.0;
                rem /= 3;
                let c = coords[a % coords.len()];
                if a < coords.len() {
                    x[c] = z.x[c] + off * step;
                } else {
                    xi[c] = z.xi[c] + off * step;
                }
            }
            grid.push(f.eval(&x, &xi));
        }
        for mi in group {
            let orders: Vec<u32> = mi.alpha.iter().chain(&mi.beta).copied().collect();
            let sts: Vec<[f64; 3]> = orders.iter().map(|&o| stencil(o, step)).collect();
            let mut acc = C64::new(0.0, 0.0);
            'grid: for (gi, val) in grid.iter().enumerate() {
                let mut rem = gi;
                let mut w = 1.0;
                for a in (0..axes).rev() {
                    let s = sts[a][rem % 3];
                    rem /= 3;
                    if s == 0.0 {
                        continue 'grid;
                    }
                    w *= s;
                }
                acc += val * w;
            }
            out.insert(mi.clone(), acc);
        }
    }
    Ok(out)
}

/// Deterministic quasi-random points in the ball of radius `radius` in `ℝ^{2D}` (Halton
/// sequence, rejection to the ball); the origin is always included.
pub fn sample_ball(dim: usize, radius: f64, count: usize) -> Vec<PhasePoint> {
    const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];
    let n = 2 * dim;
    let mut out = vec![PhasePoint::zero(dim)];
    let mut i: u64 = 1;
    while out.len() < count && i < 1_000_000 {
        let v: Vec<f64> = (0..n)
            .map(|a| {
                let b = PRIMES[a % PRIMES.len()] + if a >= PRIMES.len() { 56 } else { 0 };
                let (mut f, mut r, mut k) = (1.0, 0.0, i);
                while k > 0 {
                    f /= b as f64;
                    r += f * (k % b) as f64;
                    k /= b;
                }
                (2.0 * r - 1.0) * radius
            })
            .collect();
        i += 1;
        if v.iter().map(|c| c * c).sum::<f64>() <= radius * radius {
            out.push(PhasePoint::from_flat(&v));
        }
    }
    out
}

/// Result of [`verify_class`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClassReport {
    pub worst_ratio: f64,
    pub worst_index: Option<MultiIndex>,
    pub worst_point: Option<Vec<f64>>,
    pub samples: usize,
    pub radius: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub const DEFAULT_SAMPLES: usize = 1000;
pub const SAMPLE_RADIUS_SQRT_H: f64 = 5.0;

/// Checks `|∂_u^α ∂_v^β F| ≤ M Π ε_j^{α_j+β_j} (1 + tol)` over multi-indices on `coords`
/// at quasi-random points of the ball of radius `5√h`.
pub fn verify_class(
    f: &SymbolDescriptor,
    class: &ClassData,
    coords: &[usize],
    h: f64,
    samples: usize,
    tol: f64,
) -> Result<ClassReport> {
    if class.eps.len() != f.dim {
        return input("verify_class: ε family length differs from the symbol dimension");
    }
    let radius = SAMPLE_RADIUS_SQRT_H * h.sqrt();
    let pts = sample_ball(f.dim, radius, samples);
    let noise = 1e-6 * class.big_m.max(1.0);
    let mut worst = 0.0f64;
    let mut worst_index = None;
    let mut worst_point = None;
    for p in &pts {
        let ders = derivatives_at(f, p, coords, class.m, false)?;
        for (mi, v) in ders {
            let mut bound = class.big_m;
            for (i, &c) in coords.iter().enumerate() {
                bound *= class.eps[c].powi((mi.alpha[i] + mi.beta[i]) as i32);
            }
            let a = v.norm();
            let ratio = if bound > 0.0 {
                a / bound
            } else if a <= noise {
                0.0
            } else {
                f64::INFINITY
            };
            if ratio > worst {
                worst = ratio;
                worst_index = Some(mi);
                worst_point = Some(p.flat());
            }
        }
    }
    Ok(ClassReport {
        worst_ratio: worst,
        worst_index,
        worst_point,
        samples: pts.len(),
        radius,
        tolerance: tol,
        passed: worst <= 1.0 + tol,
    })
}

/// `N^{(m)}_{I,h}(F) = Σ_{(α,β) ∈ 𝓜_m(I)} h^{(|α|+|β|)/2} sup |∂_u^α ∂_v^β F|`, the sup taken
/// over the sample set.
pub fn norm_nim(f: &SymbolDescriptor, coords: &[usize], m: u32, h: f64, points: &[PhasePoint]) -> Result<f64> {
    let mut sups: HashMap<MultiIndex, f64> = HashMap::new();
    for p in points {
        for (mi, v) in derivatives_at(f, p, coords, m, false)? {
            let e = sups.entry(mi).or_insert(0.0);
            *e = e.max(v.norm());
        }
    }
    Ok(sups.iter().map(|(mi, s)| h.powf(mi.order() as f64 / 2.0) * s).sum())
}

/// Closed form of `N^{(m)}_{I,h}` for `F_{a,b}`.
pub fn norm_nim_exponential(a: &[f64], b: &[f64], coords: &[usize], m: u32, h: f64) -> f64 {
    let sh = h.sqrt();
    let geo = |x: f64| (0..=m).map(|k| x.powi(k as i32)).sum::<f64>();
    coords.iter().map(|&j| geo(sh * a[j].abs()) * geo(sh * b[j].abs())).product()
}

pub const NM_SLOPE_THRESHOLD: f64 = 0.25;

/// Result of [`norm_nm`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmReport {
    pub value: f64,
    pub unbounded: bool,
    pub worst_radius: f64,
}

/// `N_m(F) = sup_Y ‖F(· + Y)‖_{L¹(μ_{2D,h/2})} / (1 + |Y|)^m`, sampled over `ys`.
///
/// Flagged unbounded when the sup is attained in the outer tenth of the sampled radii and the
/// ratio still grows there with log-log slope above [`NM_SLOPE_THRESHOLD`].
pub fn norm_nm(f: &SymbolDescriptor, m: u32, h: f64, ys: &[PhasePoint], order: usize) -> Result<NmReport> {
    if matches!(f.growth, Growth::Undeclared) {
        return input("norm_Nm: symbol has no declared growth");
    }
    let d = f.dim;
    let rule = ProductRule::gaussian(&vec![h / 2.0; 2 * d], order)?;
    let mut rows: Vec<(f64, f64)> = Vec::with_capacity(ys.len());
    for y in ys {
        let l1 = rule.integrate(|p| {
            let x: Vec<f64> = (0..d).map(|j| p[j] + y.x[j]).collect();
            let xi: Vec<f64> = (0..d).map(|j| p[d + j] + y.xi[j]).collect();
            f.eval(&x, &xi).norm()
        });
        let r = y.norm_sq().sqrt();
        rows.push((r, l1 / (1.0 + r).powi(m as i32)));
    }
    let (worst_r, value) = rows.iter().fold((0.0, 0.0f64), |acc, &(r, v)| if v > acc.1 { (r, v) } else { acc });
    let rmax = rows.iter().map(|r| r.0).fold(0.0f64, f64::max);
    let mut outer: Vec<(f64, f64)> = rows.iter().copied().filter(|(r, _)| *r >= 0.9 * rmax).collect();
    outer.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    // Log-log slope of the ratio across the outer band; a ratio that merely saturates has a
    // slope decaying like 1/r.
    let growing = match (outer.first(), outer.last()) {
        (Some(&(r0, v0)), Some(&(r1, v1))) if r1 > r0 && r0 > 0.0 && v0 > 0.0 && v1 > 0.0 => {
            (v1 / v0).ln() / (r1 / r0).ln() > NM_SLOPE_THRESHOLD
        }
        _ => false,
    };
    let unbounded = rmax > 0.0 && worst_r >= 0.9 * rmax && growing;
    Ok(NmReport { value, unbounded, worst_radius: worst_r })
}

// ---------------------------------------------------------------------------------------------
// Stochastic extensions

/// Norm used by [`stochastic_ext_defect`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DefectNorm {
    L1,
    L2,
}

/// Monte Carlo estimate of `‖F∘π_{E_m} − F∘π_{E_n}‖` over `μ_{2D,h}`.
///
/// `π_E` zeroes the phase coordinates outside `E`. The L² norm is used for exponential and
/// Fourier-measure symbols, L¹ otherwise. Returns `(estimate, standard error)`.
pub fn stochastic_ext_defect(f: &SymbolDescriptor, em: &[usize], en: &[usize], h: f64, n: usize, seed: u64) -> Result<(f64, f64, DefectNorm)> {
    use rand_distr::{Distribution, StandardNormal};
    let d = f.dim;
    if em.iter().chain(en).any(|&c| c >= d) {
        return input("stochastic_ext_defect: coordinate out of range");
    }
    if em.iter().any(|c| !en.contains(c)) {
        return input("stochastic_ext_defect: E_m must be contained in E_n");
    }
    if n < 2 {
        return input("stochastic_ext_defect: need at least two samples");
    }
    let norm = match f.family {
        Family::Exponential { .. } | Family::FourierMeasure { .. } => DefectNorm::L2,
        _ => DefectNorm::L1,
    };
    let mask = |set: &[usize]| -> Vec<f64> { (0..d).map(|j| if set.contains(&j) { 1.0 } else { 0.0 }).collect() };
    let (mm, mn) = (mask(em), mask(en));
    let sd = h.sqrt();
    let chunks = n.div_ceil(SAMPLE_CHUNK);
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for c in 0..chunks {
        let mut rng = chunk_rng(seed, c as u64);
        let len = SAMPLE_CHUNK.min(n - c * SAMPLE_CHUNK);
        for _ in 0..len {
            let p: Vec<f64> = (0..2 * d).map(|_| sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)).collect();
            let (x, xi) = p.split_at(d);
            let xm: Vec<f64> = x.iter().zip(&mm).map(|(a, b)| a * b).collect();
            let xim: Vec<f64> = xi.iter().zip(&mm).map(|(a, b)| a * b).collect();
            let xn: Vec<f64> = x.iter().zip(&mn).map(|(a, b)| a * b).collect();
            let xin: Vec<f64> = xi.iter().zip(&mn).map(|(a, b)| a * b).collect();
            let dv = (f.eval(&xm, &xim) - f.eval(&xn, &xin)).norm();
            let v = if norm == DefectNorm::L2 { dv * dv } else { dv };
            sum += v;
            sumsq += v * v;
        }
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sumsq / nf - mean * mean) * nf / (nf - 1.0)).max(0.0);
    let se = (var / nf).sqrt();
    Ok(match norm {
        // Delta method for the square root of the mean square.
        DefectNorm::L2 => {
            let est = mean.sqrt();
            (est, if est > 0.0 { se / (2.0 * est) } else { 0.0 }, norm)
        }
        DefectNorm::L1 => (mean, se, norm),
    })
}

/// Exact squared L² defect for `F_{a,b}`: `2(1 − e^{−h|Δ|²/2})` with `Δ` the components of
/// `(a, b)` on `E_n ∖ E_m`.
pub fn exponential_defect_sq(a: &[f64], b: &[f64], em: &[usize], en: &[usize], h: f64) -> f64 {
    let delta: f64 = en.iter().filter(|j| !em.contains(j)).map(|&j| a[j] * a[j] + b[j] * b[j]).sum();
    2.0 * (1.0 - (-h * delta / 2.0).exp())
}

/// Lipschitz tail bound for the L¹ defect of the lattice family.
///
/// `|e^{−tf₁} − e^{−tf₂}| ≤ t M |f₁ − f₂|`; the kinetic part contributes `h g_j²` per dropped
/// site and each neighbour pair contributes `g_j g_k ‖V'‖ √(2hk/π)`, `k` the number of its
/// sites dropped.
pub fn lattice_defect_bound(p: &LatticeSymbolParams, em: &[usize], en: &[usize], h: f64) -> Result<f64> {
    let class = lattice_class(p, 1)?;
    let dropped = |j: usize| en.contains(&j) && !em.contains(&j);
    let kinetic: f64 = (0..p.sites()).filter(|&j| dropped(j)).map(|j| h * p.g[j] * p.g[j]).sum();
    let lip = p.potential.deriv_norm(1);
    let pot: f64 = p
        .pairs()
        .iter()
        .map(|&(j, k)| {
            let cnt = dropped(j) as u32 + dropped(k) as u32;
            if cnt == 0 {
                0.0
            } else {
                p.g[j] * p.g[k] * lip * (2.0 * h * cnt as f64 / std::f64::consts::PI).sqrt()
            }
        })
        .sum();
    Ok(p.t * class.big_m * (kinetic + pot))
}

// ---------------------------------------------------------------------------------------------
// JSON specification

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SymbolSpec {
    Constant {
        #[serde(default)]
        dim: Option<usize>,
        value: serde_json::Value,
    },
    Exponential {
        a: Vec<f64>,
        b: Vec<f64>,
        #[serde(default)]
        m: Option<u32>,
    },
    FourierMeasure {
        atoms: Vec<FourierAtom>,
    },
    Quadratic {
        #[serde(rename = "T")]
        t_mat: Vec<Vec<f64>>,
        t: f64,
    },
    QuadraticForm {
        #[serde(rename = "T")]
        t_mat: Vec<Vec<f64>>,
    },
    Lattice {
        #[serde(default = "one_usize")]
        lattice_dim: usize,
        side: usize,
        #[serde(default)]
        g: Option<Vec<f64>>,
        #[serde(default)]
        g_geometric: Option<GeometricCouplings>,
        potential: Potential,
        t: f64,
        #[serde(default = "two_u32")]
        m: u32,
    },
    Linear {
        a: Vec<f64>,
        b: Vec<f64>,
    },
    Monomial {
        directions: Vec<Vec<f64>>,
    },
    Trig {
        dim: usize,
        pairs: usize,
        radius: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GeometricCouplings {
    pub g0: f64,
    pub ratio: f64,
}

fn one_usize() -> usize {
    1
}

fn two_u32() -> u32 {
    2
}

fn parse_complex(v: &serde_json::Value) -> Result<C64> {
    match v {
        serde_json::Value::Number(n) => n.as_f64().map(|r| C64::new(r, 0.0)).ok_or_else(|| crate::GwError::Input("bad number".into())),
        serde_json::Value::Array(a) if a.len() == 2 => {
            let re = a[0].as_f64();
            let im = a[1].as_f64();
            match (re, im) {
                (Some(re), Some(im)) => Ok(C64::new(re, im)),
                _ => input("complex value must be [re, im]"),
            }
        }
        _ => input("complex value must be a number or [re, im]"),
    }
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return input("T must be a nonempty square matrix");
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl SymbolSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| crate::GwError::Input(format!("symbol spec: {e}")))
    }

    /// Builds the symbol; `default_dim` is used by families whose dimension is implicit.
    pub fn build(&self, default_dim: usize) -> Result<SymbolDescriptor> {
        match self {
            SymbolSpec::Constant { dim, value } => Ok(constant(dim.unwrap_or(default_dim), parse_complex(value)?)),
            SymbolSpec::Exponential { a, b, m } => make_exponential_m(a.clone(), b.clone(), m.unwrap_or(2)),
            SymbolSpec::FourierMeasure { atoms } => fourier_measure(atoms.clone()),
            SymbolSpec::Quadratic { t_mat, t } => make_quadratic(matrix_from_rows(t_mat)?, *t),
            SymbolSpec::QuadraticForm { t_mat } => quadratic_form(matrix_from_rows(t_mat)?),
            SymbolSpec::Lattice { lattice_dim, side, g, g_geometric, potential, t, m } => {
                let sites = side.checked_pow(*lattice_dim as u32).unwrap_or(usize::MAX);
                let g = match (g, g_geometric) {
                    (Some(g), None) => g.clone(),
                    (None, Some(gg)) => (0..sites).map(|j| gg.g0 * gg.ratio.powi(j as i32)).collect(),
                    _ => return input("lattice: give exactly one of g and g_geometric"),
                };
                let p = LatticeSymbolParams { lattice_dim: *lattice_dim, side: *side, g, potential: *potential, t: *t };
                make_lattice(p, *m)
            }
            SymbolSpec::Linear { a, b } => linear(a.clone(), b.clone()),
            SymbolSpec::Monomial { directions } => monomial(directions.clone()),
            SymbolSpec::Trig { dim, pairs, radius, seed } => random_trig(*dim, *pairs, *radius, *seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_eps_per_coordinate() {
        let s = make_exponential(vec![1.0, 0.0], vec![0.0, 2.0]).unwrap();
        assert_eq!(s.class.unwrap().eps, vec![1.0, 2.0]);
    }

    #[test]
    fn gaussian_constant_m2_is_sqrt2() {
        assert!((gaussian_derivative_constant(2) - 2f64.sqrt()).abs() < 1e-9);
        let c1 = gaussian_derivative_constant(1);
        assert!((c1 - 2f64.sqrt() * (-0.5f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn lattice_zero_coupling_is_constant() {
        let p = LatticeSymbolParams::chain(vec![0.0; 3], Potential::cos(), 1.0);
        let s = make_lattice(p, 2).unwrap();
        assert_eq!(s.eval(&[0.3, -1.0, 2.0], &[1.0, 0.5, -0.2]), C64::new(1.0, 0.0));
    }

    #[test]
    fn chain_pairs_are_ordered_neighbours() {
        let p = LatticeSymbolParams::chain(vec![1.0; 4], Potential::cos(), 1.0);
        assert_eq!(p.pairs().len(), 6);
        let sq = LatticeSymbolParams { lattice_dim: 2, side: 2, g: vec![1.0; 4], potential: Potential::cos(), t: 1.0 };
        // Every pair of a 2x2 box is at ℓ^∞ distance one.
        assert_eq!(sq.pairs().len(), 12);
    }

    #[test]
    fn fd_matches_exact_on_exponential() {
        let s = make_exponential(vec![0.7], vec![-1.3]).unwrap();
        let z = PhasePoint::new(vec![0.2], vec![0.4]).unwrap();
        let exact = derivatives_at(&s, &z, &[0], 2, false).unwrap();
        let fd = derivatives_at(&s, &z, &[0], 2, true).unwrap();
        for (k, v) in exact {
            let w = fd[&k];
            assert!((v - w).norm() < 2e-3 * v.norm().max(1.0), "{k:?}: {v} vs {w}");
        }
    }

    #[test]
    fn spec_parsing() {
        let s = SymbolSpec::from_json(r#"{"family":"exponential","a":[1.0],"b":[0.5]}"#).unwrap().build(1).unwrap();
        assert_eq!(s.dim, 1);
        assert!(SymbolSpec::from_json(r#"{"family":"nope"}"#).is_err());
        let l = SymbolSpec::from_json(
            r#"{"family":"lattice","side":3,"g_geometric":{"g0":0.5,"ratio":0.5},"potential":{"kind":"cos"},"t":1.0}"#,
        )
        .unwrap()
        .build(1)
        .unwrap();
        assert_eq!(l.dim, 3);
    }
}
