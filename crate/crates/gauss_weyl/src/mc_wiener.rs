//! Monte Carlo models of concrete Wiener spaces: Brownian paths on `[0, 1]` and weighted-sup
//! lattice spaces, plus plain Gaussian Monte Carlo integration.

use rand_distr::{Distribution, StandardNormal};
use libm::erf;

use crate::error::{input, Result};
use crate::gaussian_core::{chunk_rng, SAMPLE_CHUNK};

/// One path sampled at `t_i = i/K`, `i = 0..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianGrid {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub h: f64,
}

impl BrownianGrid {
    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn endpoint(&self) -> f64 {
        *self.values.last().unwrap_or(&0.0)
    }

    /// Discrete Itô sum `Σ_i u'(t_i) ΔB_i` for `u'` constant on each grid cell.
    pub fn ito_sum(&self, uprime: &[f64]) -> Result<f64> {
        if uprime.len() + 1 != self.values.len() {
            return input("ito_sum: one derivative value per grid cell");
        }
        Ok(self.increments().iter().zip(uprime).map(|(d, u)| d * u).sum())
    }
}

/// `∫_0^1 u'(t)² dt` for `u'` piecewise constant on `K` equal cells.
pub fn cameron_martin_norm_sq(uprime: &[f64]) -> f64 {
    let k = uprime.len() as f64;
    uprime.iter().map(|u| u * u).sum::<f64>() / k
}

fn normal(rng: &mut rand_chacha::ChaCha20Rng) -> f64 {
    <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
}

/// `n` paths with exact independent increments of variance `h/K`.
pub fn sample_brownian(k: usize, h: f64, n: usize, seed: u64) -> Result<Vec<BrownianGrid>> {
    if k == 0 {
        return input("sample_brownian: K must be at least 1");
    }
    if !(h > 0.0 && h.is_finite()) {
        return input("sample_brownian: h must be positive");
    }
    let times: Vec<f64> = (0..=k).map(|i| i as f64 / k as f64).collect();
    let sd = (h / k as f64).sqrt();
    let mut out = Vec::with_capacity(n);
    let mut chunk = 0u64;
    while out.len() < n {
        let mut rng = chunk_rng(seed, chunk);
        for _ in 0..SAMPLE_CHUNK.min(n - out.len()) {
            let mut values = Vec::with_capacity(k + 1);
            let mut b = 0.0;
            values.push(b);
            for _ in 0..k {
                b += sd * normal(&mut rng);
                values.push(b);
            }
            out.push(BrownianGrid { times: times.clone(), values, h });
        }
        chunk += 1;
    }
    Ok(out)
}

/// Ensemble export: metadata comment, header row, one path per row.
pub fn ensemble_csv(paths: &[BrownianGrid], header: &str) -> String {
    let mut s = String::new();
    for line in header.lines() {
        s.push_str("# ");
        s.push_str(line);
        s.push('\n');
    }
    if let Some(p) = paths.first() {
        s.push_str(&format!("# K={} h={}\n", p.times.len() - 1, p.h));
        let cols: Vec<String> = p.times.iter().map(|t| format!("t={t}")).collect();
        s.push_str(&cols.join(","));
        s.push('\n');
    }
    for p in paths {
        let row: Vec<String> = p.values.iter().map(|v| format!("{v:.17e}")).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// `R(b, ε) = ∫_{εb}^∞ e^{−x²/2} dx`.
pub fn gaussian_tail(b: f64, eps: f64) -> f64 {
    (std::f64::consts::PI / 2.0).sqrt() * libm::erfc(eps * b / std::f64::consts::SQRT_2)
}

/// `Π_j (1 − 2(2π)^{−1/2} R(b_j, ε/√h))`, the measure of `{sup_j |x_j|/b_j ≤ ε}`.
pub fn lattice_exact(b: &[f64], eps: f64, h: f64) -> f64 {
    let s = eps / h.sqrt();
    b.iter().map(|&bj| 1.0 - 2.0 / (2.0 * std::f64::consts::PI).sqrt() * gaussian_tail(bj, s)).product()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeEstimate {
    pub sites: usize,
    pub mc: f64,
    pub stderr: f64,
    pub exact: f64,
}

/// MC estimates of `μ_h(sup_{j<p} |x_j|/b_j ≤ ε)` for each `p` in `site_ladder`, all from the
/// same samples, alongside the exact product.
pub fn lattice_norm_probability(b: &[f64], eps: f64, h: f64, site_ladder: &[usize], n: usize, seed: u64) -> Result<Vec<LatticeEstimate>> {
    if b.iter().any(|v| !(*v > 0.0)) {
        return input("lattice_norm_probability: weights must be positive");
    }
    if !(eps > 0.0 && h > 0.0) {
        return input("lattice_norm_probability: eps and h must be positive");
    }
    if n == 0 {
        return input("lattice_norm_probability: n must be positive");
    }
    let pmax = site_ladder.iter().copied().max().unwrap_or(0);
    if pmax > b.len() || site_ladder.windows(2).any(|w| w[1] < w[0]) {
        return input("lattice_norm_probability: ladder must be nondecreasing and within the weights");
    }
    let sd = h.sqrt();
    let mut hits = vec![0usize; site_ladder.len()];
    let mut chunk = 0u64;
    let mut done = 0usize;
    while done < n {
        let mut rng = chunk_rng(seed, chunk);
        for _ in 0..SAMPLE_CHUNK.min(n - done) {
            // First site where the bound fails, or pmax when none does.
            let mut first_fail = pmax;
            for (j, &bj) in b.iter().enumerate().take(pmax) {
                let x = sd * normal(&mut rng);
                if first_fail == pmax && x.abs() / bj > eps {
                    first_fail = j;
                }
            }
            for (hcount, &p) in hits.iter_mut().zip(site_ladder) {
                if p <= first_fail {
                    *hcount += 1;
                }
            }
            done += 1;
        }
        chunk += 1;
    }
    let nf = n as f64;
    Ok(site_ladder
        .iter()
        .zip(hits)
        .map(|(&p, k)| {
            let m = k as f64 / nf;
            LatticeEstimate { sites: p, mc: m, stderr: (m * (1.0 - m) / nf).sqrt(), exact: lattice_exact(&b[..p], eps, h) }
        })
        .collect())
}

/// `Π_{j∈ℤ^d} (1 − 2(2π)^{−1/2} R((1+|j|)^γ, ε/√h))`, summed shell by shell until the log
/// factors fall below `1e−18`. `|j|` is the Euclidean norm.
pub fn power_weights_limit(gamma: f64, eps: f64, h: f64, lattice_dim: usize) -> Result<f64> {
    if !(gamma > 0.0) || lattice_dim == 0 || lattice_dim > 3 {
        return input("power_weights_limit: need gamma > 0 and lattice dim 1..=3");
    }
    let s = eps / h.sqrt();
    let mut log_sum = 0.0;
    let mut r: i64 = 0;
    loop {
        // Sites with ℓ^∞ norm exactly r.
        let mut shell = 0.0;
        let mut smallest = f64::INFINITY;
        let mut visit = |j: &[i64]| {
            if j.iter().map(|c| c.abs()).max().unwrap_or(0) != r {
                return;
            }
            let norm = j.iter().map(|c| (c * c) as f64).sum::<f64>().sqrt();
            let f = 1.0 - 2.0 / (2.0 * std::f64::consts::PI).sqrt() * gaussian_tail((1.0 + norm).powf(gamma), s);
            shell += f.ln();
            smallest = smallest.min(f);
        };
        match lattice_dim {
            1 => {
                for a in -r..=r {
                    visit(&[a]);
                }
            }
            2 => {
                for a in -r..=r {
                    for b in -r..=r {
                        visit(&[a, b]);
                    }
                }
            }
            _ => {
                for a in -r..=r {
                    for b in -r..=r {
                        for c in -r..=r {
                            visit(&[a, b, c]);
                        }
                    }
                }
            }
        }
        log_sum += shell;
        if smallest <= 0.0 {
            return Ok(0.0);
        }
        if shell.abs() < 1e-18 || r > 1_000_000 {
            break;
        }
        r += 1;
    }
    Ok(log_sum.exp())
}

/// Sample mean and standard error of `f` over `n` draws from `μ_{ℝ^dim, h}`.
pub fn mc_integral(f: &dyn Fn(&[f64]) -> f64, dim: usize, h: f64, n: usize, seed: u64) -> Result<(f64, f64)> {
    if n < 2 {
        return input("mc_integral: need at least two samples");
    }
    if !(h > 0.0) {
        return input("mc_integral: h must be positive");
    }
    let sd = h.sqrt();
    let (mut sum, mut sumsq) = (0.0, 0.0);
    let mut x = vec![0.0; dim];
    let mut chunk = 0u64;
    let mut done = 0usize;
    while done < n {
        let mut rng = chunk_rng(seed, chunk);
        for _ in 0..SAMPLE_CHUNK.min(n - done) {
            for v in x.iter_mut() {
                *v = sd * normal(&mut rng);
            }
            let y = f(&x);
            sum += y;
            sumsq += y * y;
            done += 1;
        }
        chunk += 1;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sumsq / nf - mean * mean) * nf / (nf - 1.0)).max(0.0);
    Ok((mean, (var / nf).sqrt()))
}

/// `erf`-form of one lattice factor, exposed for cross-checks.
pub fn lattice_factor(b: f64, eps: f64, h: f64) -> f64 {
    erf(eps * b / (2.0 * h).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_integrand_is_exact() {
        let (m, s) = mc_integral(&|_| 1.0, 3, 0.5, 1000, 7).unwrap();
        assert_eq!(m, 1.0);
        assert_eq!(s, 0.0);
    }

    #[test]
    fn same_seed_same_paths() {
        let a = sample_brownian(8, 0.5, 10, 3).unwrap();
        let b = sample_brownian(8, 0.5, 10, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].values[0], 0.0);
    }

    #[test]
    fn lattice_factor_forms_agree() {
        for &(b, e, h) in &[(1.0, 0.5, 0.5), (2.0, 1.0, 1.0), (0.3, 2.0, 0.25)] {
            let d = (lattice_exact(&[b], e, h) - lattice_factor(b, e, h)).abs();
            assert!(d < 1e-14, "{b} {e} {h}: {d:e}");
        }
        // erf(1/2) to 30 digits: 0.520499877813046537682746653892.
        assert!((lattice_factor(1.0, 0.5, 0.5) - 0.520_499_877_813_046_5).abs() < 1e-15);
    }
}
