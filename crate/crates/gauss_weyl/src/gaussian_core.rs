//! Centered Gaussian measures `μ_{E,h}` on `ℝ^dim`, tensor Gauss-Hermite quadrature,
//! reproducible sampling and the closed-form Gaussian integral calculus.
//!
//! `μ_{E,h}` has density `(2πh)^{-dim/2} e^{-|x|²/(2h)}`; `h` is the variance of every
//! coordinate. Linear forms are written `ℓ_a(x) = a·x`, extended bilinearly to complex `a`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{input, resource, Result};
use crate::limits::{check_nodes, MAX_GH_ORDER};
use crate::phase::{bsquare, dot, norm_sq, C64};

/// Points drawn per RNG stream; chunk `c` of a run always uses stream `c`.
pub const SAMPLE_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianMeasure {
    pub dim: usize,
    pub h: f64,
}

impl GaussianMeasure {
    pub fn new(dim: usize, h: f64) -> Result<Self> {
        if dim == 0 {
            return input("Gaussian measure needs dim >= 1");
        }
        if !(h > 0.0 && h.is_finite()) {
            return input(format!("Gaussian measure needs h > 0, got {h}"));
        }
        Ok(Self { dim, h })
    }
}

pub fn density(mu: &GaussianMeasure, x: &[f64]) -> Result<f64> {
    if x.len() != mu.dim {
        return input(format!("density: point has length {}, measure has dim {}", x.len(), mu.dim));
    }
    let d = mu.dim as f64;
    Ok((2.0 * std::f64::consts::PI * mu.h).powf(-d / 2.0) * (-norm_sq(x) / (2.0 * mu.h)).exp())
}

/// One-dimensional Gauss-Hermite rule for the standard normal law.
#[derive(Debug, Clone)]
pub struct Rule1 {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Orthonormal probabilists' Hermite values `φ_0..φ_{n}` at `x` (`φ_k = He_k/√k!`).
fn orthonormal_hermite(x: f64, n: usize, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if n == 0 {
        return;
    }
    out.push(x);
    for k in 1..n {
        let next = (x * out[k] - (k as f64).sqrt() * out[k - 1]) / ((k + 1) as f64).sqrt();
        out.push(next);
    }
}

fn compute_rule1(order: usize) -> Rule1 {
    // Golub-Welsch for starting values, then Newton on φ_order with Christoffel weights.
    let n = order;
    let mut jac = nalgebra::DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let s = (k as f64).sqrt();
        jac[(k, k - 1)] = s;
        jac[(k - 1, k)] = s;
    }
    let eig = nalgebra::SymmetricEigen::new(jac);
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut buf = Vec::with_capacity(n + 1);
    for x in nodes.iter_mut() {
        for _ in 0..8 {
            orthonormal_hermite(*x, n, &mut buf);
            let f = buf[n];
            let fp = (n as f64).sqrt() * buf[n - 1];
            if fp == 0.0 {
                break;
            }
            let dx = f / fp;
            *x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
    }
    // Enforce exact symmetry.
    for i in 0..n / 2 {
        let m = 0.5 * (nodes[n - 1 - i] - nodes[i]);
        nodes[i] = -m;
        nodes[n - 1 - i] = m;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let mut weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            orthonormal_hermite(x, n - 1, &mut buf);
            1.0 / buf.iter().map(|v| v * v).sum::<f64>()
        })
        .collect();
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
    Rule1 { nodes, weights }
}

fn rule_cache() -> &'static Mutex<HashMap<usize, Arc<Rule1>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Rule1>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Cached standard-normal Gauss-Hermite rule of the given order.
pub fn standard_rule(order: usize) -> Result<Arc<Rule1>> {
    if order == 0 {
        return input("quadrature order must be >= 1");
    }
    if order > MAX_GH_ORDER {
        return resource(format!("Gauss-Hermite order {order} exceeds maximum {MAX_GH_ORDER}"));
    }
    if let Some(r) = rule_cache().lock().unwrap().get(&order) {
        return Ok(r.clone());
    }
    let r = Arc::new(if order == 1 {
        Rule1 { nodes: vec![0.0], weights: vec![1.0] }
    } else {
        compute_rule1(order)
    });
    rule_cache().lock().unwrap().insert(order, r.clone());
    Ok(r)
}

/// A one-dimensional axis of a product rule: nodes and positive weights summing to 1.
#[derive(Debug, Clone)]
pub struct Axis {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Axis {
    /// Gauss-Hermite axis for `μ_{ℝ,var}`.
    pub fn gaussian(var: f64, order: usize) -> Result<Self> {
        let r = standard_rule(order)?;
        let s = var.sqrt();
        Ok(Self { nodes: r.nodes.iter().map(|x| x * s).collect(), weights: r.weights.clone() })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Tensor product of one-dimensional axes, iterated without materializing the grid.
#[derive(Debug, Clone)]
pub struct ProductRule {
    pub axes: Vec<Axis>,
}

impl ProductRule {
    pub fn new(axes: Vec<Axis>) -> Self {
        Self { axes }
    }

    /// Product of Gaussian axes with per-axis variances.
    pub fn gaussian(vars: &[f64], order: usize) -> Result<Self> {
        let axes = vars.iter().map(|&v| Axis::gaussian(v, order)).collect::<Result<Vec<_>>>()?;
        let r = Self { axes };
        check_nodes(r.node_count(), "product quadrature")?;
        Ok(r)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn node_count(&self) -> f64 {
        self.axes.iter().map(|a| a.len() as f64).product()
    }

    /// Calls `f(point, weight)` for every tensor node in odometer order (last axis fastest).
    pub fn for_each(&self, mut f: impl FnMut(&[f64], f64)) {
        let d = self.axes.len();
        if d == 0 {
            f(&[], 1.0);
            return;
        }
        if self.axes.iter().any(|a| a.is_empty()) {
            return;
        }
        let mut idx = vec![0usize; d];
        let mut pt: Vec<f64> = self.axes.iter().map(|a| a.nodes[0]).collect();
        loop {
            let w: f64 = idx.iter().zip(&self.axes).map(|(&i, a)| a.weights[i]).product();
            f(&pt, w);
            let mut k = d;
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < self.axes[k].len() {
                    pt[k] = self.axes[k].nodes[idx[k]];
                    break;
                }
                idx[k] = 0;
                pt[k] = self.axes[k].nodes[0];
            }
        }
    }

    pub fn integrate_c(&self, mut f: impl FnMut(&[f64]) -> C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        self.for_each(|p, w| acc += f(p) * w);
        acc
    }

    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        let mut acc = 0.0;
        self.for_each(|p, w| acc += f(p) * w);
        acc
    }
}

/// Homogeneous tensor Gauss-Hermite rule for `μ_{dim,h}`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub dim: usize,
    pub h: f64,
    pub order: usize,
    pub rule: ProductRule,
}

impl QuadratureRule {
    pub fn node_count(&self) -> usize {
        self.rule.node_count() as usize
    }

    /// Materialized nodes, last coordinate fastest.
    pub fn nodes(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.node_count());
        self.rule.for_each(|p, _| out.push(p.to_vec()));
        out
    }

    pub fn weights(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.node_count());
        self.rule.for_each(|_, w| out.push(w));
        out
    }

    pub fn integrate(&self, f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.rule.integrate(f)
    }

    pub fn integrate_c(&self, f: impl FnMut(&[f64]) -> C64) -> C64 {
        self.rule.integrate_c(f)
    }
}

/// Default per-axis order: 64 in dim 1-2, 20 in dim 3, 10 beyond.
pub fn default_order(dim: usize) -> usize {
    match dim {
        0..=2 => 64,
        3 => 20,
        _ => 10,
    }
}

pub fn gauss_quadrature(dim: usize, h: f64, order: usize) -> Result<QuadratureRule> {
    GaussianMeasure::new(dim, h)?;
    if order == 0 {
        return input("quadrature order must be >= 1");
    }
    check_nodes((order as f64).powi(dim as i32), "gauss_quadrature")?;
    let rule = ProductRule::gaussian(&vec![h; dim], order)?;
    Ok(QuadratureRule { dim, h, order, rule })
}

/// `∫ e^{ℓ_a} dμ_{B,h} = e^{h a²/2}` with the bilinear square `a²`.
pub fn exp_integral(a: &[C64], h: f64) -> C64 {
    (bsquare(a) * (h / 2.0)).exp()
}

/// `∫ |ℓ_a|^p dμ_h = (2h)^{p/2} π^{-1/2} |a|^p Γ((p+1)/2)`.
pub fn ell_abs_moment(a: &[f64], p: f64, h: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return input(format!("ell_abs_moment needs p >= 1, got {p}"));
    }
    let na = norm_sq(a).sqrt();
    if na == 0.0 {
        return Ok(0.0);
    }
    Ok((2.0 * h).powf(p / 2.0) / std::f64::consts::PI.sqrt()
        * na.powf(p)
        * libm::tgamma((p + 1.0) / 2.0))
}

/// Largest number of factors accepted by [`wick_moment`] (the pairing sum has (2p−1)!! terms).
pub const WICK_MAX_FACTORS: usize = 18;

/// Gaussian moment `∫ ℓ_{u_1}⋯ℓ_{u_n} dμ_h` by summing over perfect pairings.
///
/// The empty list returns 1 (empty product).
pub fn wick_moment(us: &[Vec<f64>], h: f64) -> Result<f64> {
    if let Some(first) = us.first() {
        if us.iter().any(|u| u.len() != first.len()) {
            return input("wick_moment: vectors have different dimensions");
        }
    }
    if us.len() % 2 == 1 {
        return Ok(0.0);
    }
    if us.len() > WICK_MAX_FACTORS {
        return resource(format!("wick_moment: {} factors exceed cap {WICK_MAX_FACTORS}", us.len()));
    }
    let n = us.len();
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            gram[i * n + j] = dot(&us[i], &us[j]);
        }
    }
    fn pairings(alive: &mut Vec<usize>, gram: &[f64], n: usize) -> f64 {
        if alive.is_empty() {
            return 1.0;
        }
        let first = alive.remove(0);
        let mut total = 0.0;
        for k in 0..alive.len() {
            let other = alive.remove(k);
            let g = gram[first * n + other];
            if g != 0.0 {
                total += g * pairings(alive, gram, n);
            }
            alive.insert(k, other);
        }
        alive.insert(0, first);
        total
    }
    let mut alive: Vec<usize> = (0..n).collect();
    Ok(h.powi((n / 2) as i32) * pairings(&mut alive, &gram, n))
}

/// Both sides of the translation formula
/// `∫ g dμ = e^{-|a|²/(2h)} ∫ g(x+a) e^{-ℓ_a(x)/h} dμ`, each by the supplied rule.
pub fn cameron_martin_check(
    g: impl Fn(&[f64]) -> f64,
    a: &[f64],
    mu: &GaussianMeasure,
    rule: &QuadratureRule,
) -> Result<(f64, f64)> {
    if a.len() != mu.dim || rule.dim != mu.dim {
        return input("cameron_martin_check: dimension mismatch");
    }
    let lhs = rule.integrate(|x| g(x));
    let mut shifted = vec![0.0; mu.dim];
    let rhs = (-norm_sq(a) / (2.0 * mu.h)).exp()
        * rule.integrate(|x| {
            for (s, (xi, ai)) in shifted.iter_mut().zip(x.iter().zip(a)) {
                *s = xi + ai;
            }
            g(&shifted) * (-dot(a, x) / mu.h).exp()
        });
    Ok((lhs, rhs))
}

/// RNG for chunk `chunk` of a run keyed by `seed`. Streams are independent of thread count.
pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// `n` independent draws from `μ`, produced in chunks of [`SAMPLE_CHUNK`].
pub fn sample(mu: &GaussianMeasure, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return input("sample needs n >= 1");
    }
    let s = mu.h.sqrt();
    let mut out = Vec::with_capacity(n);
    let mut chunk = 0u64;
    while out.len() < n {
        let mut rng = chunk_rng(seed, chunk);
        let take = SAMPLE_CHUNK.min(n - out.len());
        for _ in 0..take {
            let p: Vec<f64> =
                (0..mu.dim).map(|_| s * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)).collect();
            out.push(p);
        }
        chunk += 1;
    }
    Ok(out)
}

/// One-dimensional reduction of `∫ e^{ℓ_b} |ℓ_a|^p dμ_h`:
/// `e^{h|b|²/2} ∫ |√h |a| v + h a·b|^p dμ_{ℝ,1}(v)`, evaluated by Gauss-Legendre
/// panels split at the kink of the absolute value.
pub fn exp_abs_moment_reduced(a: &[f64], b: &[f64], p: f64, h: f64) -> Result<f64> {
    if a.len() != b.len() {
        return input("exp_abs_moment_reduced: a and b differ in dimension");
    }
    if !(p >= 1.0) {
        return input("exp_abs_moment_reduced: p must be >= 1");
    }
    let sigma = h.sqrt() * norm_sq(a).sqrt();
    let shift = h * dot(a, b);
    let pref = (h * norm_sq(b) / 2.0).exp();
    if sigma == 0.0 {
        return Ok(pref * shift.abs().powf(p));
    }
    let kink = -shift / sigma;
    let f = |v: f64| (sigma * v + shift).abs().powf(p) * (-v * v / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let lo = kink.min(0.0) - 14.0;
    let hi = kink.max(0.0) + 14.0;
    Ok(pref * (gauss_legendre_panels(&f, lo, kink, 200) + gauss_legendre_panels(&f, kink, hi, 200)))
}

/// Composite 8-point Gauss-Legendre over `[lo, hi]` with `panels` equal panels.
pub fn gauss_legendre_panels(f: &impl Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
    const X: [f64; 4] = [0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363];
    const W: [f64; 4] = [0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763];
    if hi <= lo {
        return 0.0;
    }
    let step = (hi - lo) / panels as f64;
    let mut acc = 0.0;
    for k in 0..panels {
        let c = lo + (k as f64 + 0.5) * step;
        let r = step / 2.0;
        for i in 0..4 {
            acc += W[i] * r * (f(c - r * X[i]) + f(c + r * X[i]));
        }
    }
    acc
}

/// Right-hand sides of the two `L²` bounds on `∫|e^{ℓ_a} − e^{ℓ_b}|² dμ_h`.
pub fn exp_difference_bounds(a: &[C64], b: &[C64], h: f64) -> (f64, f64) {
    let cn = |v: &[C64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let re = |v: &[C64]| v.iter().map(|z| z.re * z.re).sum::<f64>().sqrt();
    let diff: Vec<C64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let d = cn(&diff);
    let m = re(a).max(re(b));
    let first = 4.0 * h * d * (cn(a) + cn(b)) * (2.0 * h * m * m).exp();
    let second = (2.0 * h * m * m).exp() * h * d * d * (1.0 + 4.0 * h * m * m);
    (first, second)
}

/// Closed form of `∫|e^{ℓ_a} − e^{ℓ_b}|² dμ_h` from the exponential integral.
pub fn exp_difference_exact(a: &[C64], b: &[C64], h: f64) -> f64 {
    let conj = |v: &[C64]| v.iter().map(|z| z.conj()).collect::<Vec<_>>();
    let sum = |u: &[C64], v: &[C64]| u.iter().zip(v).map(|(x, y)| x + y).collect::<Vec<_>>();
    let (ac, bc) = (conj(a), conj(b));
    let aa = exp_integral(&sum(a, &ac), h).re;
    let bb = exp_integral(&sum(b, &bc), h).re;
    let ab = exp_integral(&sum(a, &bc), h);
    aa + bb - 2.0 * ab.re
}
