//! Segal-Bargmann transform `T̂_h`, Weyl and anti-Wick kernels, and the seminorms `I_{E,m,h}`.
//!
//! `T̂_h f(x, ξ) = e^{-(x−iξ)²/(4h)} ∫ f(y) e^{y·(x−iξ)/h} dμ_{h/2}(y)`. On the Hermite basis it
//! acts diagonally: `T̂_h e_k = Π_j v_j^{k_j}/√(k_j!)` with `v = (x − iξ)/√(2h)`, which is what
//! [`BargmannFn`] evaluates. [`bargmann`] is the direct quadrature of the defining integral.

use crate::error::{input, numerical, Result};
use crate::gaussian_core::{default_order, gauss_quadrature, ProductRule};
use crate::hermite_space::FunctionRep;
use crate::mutation::kernel_sign_flip;
use crate::phase::{bdot, bsquare, PhasePoint, C64};

/// Radius used to truncate the seminorm integral, in units of `√h`.
pub const SEMINORM_CUTOFF: f64 = 8.0;

fn check_dim(f: &FunctionRep, z: &PhasePoint) -> Result<()> {
    if z.dim() != f.basis.dim {
        return input(format!("phase point dim {} vs function dim {}", z.dim(), f.basis.dim));
    }
    Ok(())
}

/// Quadrature order for configuration-space integrals of a representation.
fn config_order(f: &FunctionRep) -> usize {
    let n = f.basis.max_degree;
    if f.basis.dim <= 2 {
        default_order(f.basis.dim).max(n + 40)
    } else {
        default_order(f.basis.dim).max(n + 8)
    }
}

/// `T̂_h f(Z)` by tensor Gauss-Hermite quadrature of the defining integral.
pub fn bargmann(f: &FunctionRep, z: &PhasePoint) -> Result<C64> {
    bargmann_with_order(f, z, config_order(f))
}

pub fn bargmann_with_order(f: &FunctionRep, z: &PhasePoint, order: usize) -> Result<C64> {
    check_dim(f, z)?;
    let h = f.basis.h;
    let w = z.minus();
    let rule = gauss_quadrature(f.basis.dim, h / 2.0, order)?;
    let integral = rule.integrate_c(|y| {
        let e: C64 = y.iter().zip(&w).map(|(yy, ww)| ww * *yy).sum::<C64>() / h;
        f.eval(y) * e.exp()
    });
    Ok((-bsquare(&w) / (4.0 * h)).exp() * integral)
}

/// Bargmann image of a representation, evaluated in closed form.
#[derive(Debug, Clone)]
pub struct BargmannFn {
    pub rep: FunctionRep,
}

impl BargmannFn {
    pub fn new(rep: FunctionRep) -> Self {
        Self { rep }
    }

    pub fn h(&self) -> f64 {
        self.rep.basis.h
    }

    pub fn dim(&self) -> usize {
        self.rep.basis.dim
    }

    /// Per-coordinate tables `v_j^k/√(k!)`, `k = 0..=max_degree`.
    fn tables(&self, x: &[f64], xi: &[f64]) -> Vec<Vec<C64>> {
        let s = (2.0 * self.h()).sqrt();
        let n = self.rep.basis.max_degree;
        x.iter()
            .zip(xi)
            .map(|(&a, &b)| {
                let v = C64::new(a, -b) / s;
                let mut t = Vec::with_capacity(n + 1);
                let mut term = C64::new(1.0, 0.0);
                t.push(term);
                for k in 1..=n {
                    term = term * v / (k as f64).sqrt();
                    t.push(term);
                }
                t
            })
            .collect()
    }

    pub fn eval_xy(&self, x: &[f64], xi: &[f64]) -> C64 {
        let t = self.tables(x, xi);
        self.rep
            .basis
            .multis()
            .iter()
            .zip(&self.rep.coeffs)
            .map(|(m, c)| c * m.iter().enumerate().map(|(j, &d)| t[j][d]).product::<C64>())
            .sum()
    }

    pub fn eval(&self, z: &PhasePoint) -> C64 {
        self.eval_xy(&z.x, &z.xi)
    }

    /// Largest discrete Cauchy-Riemann residual `|∂_x F − i ∂_ξ F| / max(1, |F|)` over
    /// `points`, by central differences with step `1e-4·max(1,|X|)`.
    pub fn cr_residual(&self, points: &[PhasePoint]) -> f64 {
        let mut worst: f64 = 0.0;
        for p in points {
            let step = 1e-4 * p.norm_sq().sqrt().max(1.0);
            let f0 = self.eval(p).norm().max(1.0);
            for j in 0..p.dim() {
                let mut xp = p.clone();
                let mut xm = p.clone();
                xp.x[j] += step;
                xm.x[j] -= step;
                let dx = (self.eval(&xp) - self.eval(&xm)) / (2.0 * step);
                let mut yp = p.clone();
                let mut ym = p.clone();
                yp.xi[j] += step;
                ym.xi[j] -= step;
                let dxi = (self.eval(&yp) - self.eval(&ym)) / (2.0 * step);
                let r = (dx - C64::new(0.0, 1.0) * dxi).norm() / f0;
                worst = worst.max(r);
            }
        }
        worst
    }
}

/// Phase-space rule for `μ_{E²,var}` with coordinates ordered `(x_1..x_d, ξ_1..ξ_d)`.
pub fn phase_rule(dim: usize, var: f64, order: usize) -> Result<ProductRule> {
    ProductRule::gaussian(&vec![var; 2 * dim], order)
}

/// `| ‖T_h f‖_{L²(μ_{E²,h})} − ‖f‖_{L²(μ_{E,h/2})} |`, both norms by quadrature.
pub fn bargmann_isometry_defect(f: &FunctionRep) -> Result<f64> {
    let n = f.basis.max_degree;
    let d = f.basis.dim;
    let h = f.basis.h;
    let order = n + 4;
    let tf = BargmannFn::new(f.clone());
    let rule = phase_rule(d, h, order)?;
    let t_norm = rule.integrate(|p| tf.eval_xy(&p[..d], &p[d..]).norm_sqr()).sqrt();
    let crule = gauss_quadrature(d, h / 2.0, order)?;
    let f_norm = crule.integrate(|x| f.eval(x).norm_sqr()).sqrt();
    Ok((t_norm - f_norm).abs())
}

/// `∫ e^{(x+iξ)·(z−iζ)/(2h)} (T̂f)(x,ξ) dμ_{E²,h}(x,ξ)`; equals `T̂f(Z)`.
pub fn reproducing_eval(tf: &BargmannFn, z: &PhasePoint) -> Result<C64> {
    reproducing_eval_with_order(tf, z, 40)
}

pub fn reproducing_eval_with_order(tf: &BargmannFn, z: &PhasePoint, order: usize) -> Result<C64> {
    let d = tf.dim();
    if z.dim() != d {
        return input("reproducing_eval: dimension mismatch");
    }
    let h = tf.h();
    let zm = z.minus();
    let rule = phase_rule(d, h, order)?;
    Ok(rule.integrate_c(|p| {
        let xp: Vec<C64> = (0..d).map(|j| C64::new(p[j], p[d + j])).collect();
        (bdot(&xp, &zm) / (2.0 * h)).exp() * tf.eval_xy(&p[..d], &p[d..])
    }))
}

/// `K^{Weyl}_h(X,Y,Z) = exp((1/h)[(x+iξ)·(z−iζ) + (y−iη)·(z+iζ) − ½(x+iξ)·(y−iη)])`.
pub fn weyl_kernel(x: &PhasePoint, y: &PhasePoint, z: &PhasePoint, h: f64) -> C64 {
    let cross = if kernel_sign_flip() { 0.5 } else { -0.5 };
    let (xp, ym) = (x.plus(), y.minus());
    let e = bdot(&xp, &z.minus()) + bdot(&ym, &z.plus()) + bdot(&xp, &ym) * cross;
    (e / h).exp()
}

/// `K^{AW}_h(X,Y,Z) = exp((1/(2h))[(x+iξ)·(z−iζ) + (y−iη)·(z+iζ)])`.
pub fn aw_kernel(x: &PhasePoint, y: &PhasePoint, z: &PhasePoint, h: f64) -> C64 {
    let e = bdot(&x.plus(), &z.minus()) + bdot(&y.minus(), &z.plus());
    (e / (2.0 * h)).exp()
}

/// Value of `I_{E,m,h}(f)` with the quadrature settings that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Seminorm {
    pub value: f64,
    pub cutoff_radius: f64,
    pub order: usize,
}

/// `I_{E,m,h}(f) = (2πh)^{-dim} ∫ |T̂f(X)| (1+|X|)^m e^{-|X|²/(4h)} dλ(X)`.
///
/// Rewritten as `2^{dim} ∫ |T̂f| (1+|X|)^m dμ_{E²,2h}` and integrated by Gauss-Hermite, dropping
/// nodes with `|X| > 8√h`.
pub fn seminorm_i(f: &FunctionRep, m: u32) -> Result<Seminorm> {
    let d = f.basis.dim;
    let h = f.basis.h;
    let base = match 2 * d {
        0..=2 => 64,
        3..=4 => 20,
        _ => 8,
    };
    let order = base + 8;
    let tf = BargmannFn::new(f.clone());
    let rule = phase_rule(d, 2.0 * h, order)?;
    let cutoff = SEMINORM_CUTOFF * h.sqrt();
    let mut acc = 0.0;
    rule.for_each(|p, w| {
        let r = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r <= cutoff {
            acc += w * tf.eval_xy(&p[..d], &p[d..]).norm() * (1.0 + r).powi(m as i32);
        }
    });
    let value = 2f64.powi(d as i32) * acc;
    if !value.is_finite() {
        return numerical("seminorm_I quadrature diverged");
    }
    Ok(Seminorm { value, cutoff_radius: cutoff, order })
}
