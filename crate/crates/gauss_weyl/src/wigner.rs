//! Wigner-Gauss transform `Ĥ_h(f, g)` on `E²`, its Lebesgue counterpart and its
//! Bargmann-kernel representation.

use std::fmt::Write as _;

use crate::bargmann::{weyl_kernel, BargmannFn};
use crate::contraction::complex_hermite;
use crate::error::{input, numerical, Result};
use crate::gaussian_core::{gauss_quadrature, ProductRule};
use crate::hermite_space::{gamma_map, FunctionRep};
use crate::limits::MAX_GH_ORDER;
use crate::mutation::kernel_sign_flip;
use crate::phase::{PhasePoint, C64};

/// Above this value of `|ζ|²/h` the factor `e^{|ζ|²/h}` amplifies quadrature roundoff past `1e-8`.
pub const LOW_CONFIDENCE_ZETA: f64 = 18.0;

/// A Wigner value with the quadrature order that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WignerValue {
    pub value: C64,
    pub order: usize,
    pub low_confidence: bool,
}

fn check_pair(f: &FunctionRep, g: &FunctionRep, z: &PhasePoint) -> Result<()> {
    if !f.basis.same_space(&g.basis) {
        return input("wigner: f and g use different bases");
    }
    if z.dim() != f.basis.dim {
        return input(format!("wigner: phase point dim {} vs function dim {}", z.dim(), f.basis.dim));
    }
    Ok(())
}

/// Per-axis order for the oscillatory integral: `max(40 + 10|ζ|²/h, n + 40)`.
pub fn oscillatory_order(zeta_sq: f64, h: f64, max_degree: usize) -> usize {
    let want = 40.0 + 10.0 * zeta_sq / h;
    (want.ceil() as usize).max(max_degree + 40)
}

/// `Ĥ_h(f,g)(z,ζ) = e^{|ζ|²/h} ∫ e^{−2iζ·t/h} f(z+t) conj(g(z−t)) dμ_{E,h/2}(t)` by quadrature.
pub fn wigner_gauss(f: &FunctionRep, g: &FunctionRep, z: &PhasePoint) -> Result<C64> {
    Ok(wigner_gauss_flagged(f, g, z)?.value)
}

pub fn wigner_gauss_flagged(f: &FunctionRep, g: &FunctionRep, z: &PhasePoint) -> Result<WignerValue> {
    check_pair(f, g, z)?;
    let h = f.basis.h;
    let zeta_sq: f64 = z.xi.iter().map(|v| v * v).sum();
    let want = oscillatory_order(zeta_sq, h, f.basis.max_degree);
    let order = want.min(MAX_GH_ORDER);
    let low = order < want || zeta_sq / h > LOW_CONFIDENCE_ZETA;
    let value = wigner_gauss_with_order(f, g, z, order)?;
    Ok(WignerValue { value, order, low_confidence: low })
}

pub fn wigner_gauss_with_order(f: &FunctionRep, g: &FunctionRep, z: &PhasePoint, order: usize) -> Result<C64> {
    check_pair(f, g, z)?;
    let d = f.basis.dim;
    let h = f.basis.h;
    let rule = gauss_quadrature(d, h / 2.0, order)?;
    let mut plus = vec![0.0; d];
    let mut minus = vec![0.0; d];
    let integral = rule.integrate_c(|t| {
        let mut phase = 0.0;
        for j in 0..d {
            plus[j] = z.x[j] + t[j];
            minus[j] = z.x[j] - t[j];
            phase -= 2.0 * z.xi[j] * t[j] / h;
        }
        C64::from_polar(1.0, phase) * f.eval(&plus) * g.eval(&minus).conj()
    });
    let zeta_sq: f64 = z.xi.iter().map(|v| v * v).sum();
    Ok(integral * (zeta_sq / h).exp())
}

/// Closed form on the basis: `Ĥ(e_k, e_l) = Π_j H_{k_j,l_j}(w_j, w̄_j)/√(k_j! l_j!)`,
/// `w = (z − iζ)/σ`.
pub fn wigner_hermite(f: &FunctionRep, g: &FunctionRep, z: &PhasePoint) -> Result<C64> {
    check_pair(f, g, z)?;
    let kdim = f.basis.max_degree + 1;
    let tabs = hermite_tables(z, f.basis.sigma(), kdim);
    let mut total = C64::new(0.0, 0.0);
    let ms = f.basis.multis();
    for (k, fk) in ms.iter().zip(&f.coeffs) {
        if *fk == C64::new(0.0, 0.0) {
            continue;
        }
        for (l, gl) in ms.iter().zip(&g.coeffs) {
            if *gl == C64::new(0.0, 0.0) {
                continue;
            }
            let prod: C64 = (0..k.len()).map(|j| tabs[j][k[j] * kdim + l[j]]).product();
            total += fk * gl.conj() * prod;
        }
    }
    Ok(total)
}

fn hermite_tables(z: &PhasePoint, sigma: f64, kdim: usize) -> Vec<Vec<C64>> {
    let flip = kernel_sign_flip();
    (0..z.dim())
        .map(|j| {
            let w = if flip { C64::new(z.x[j], z.xi[j]) } else { C64::new(z.x[j], -z.xi[j]) } / sigma;
            let mut t = vec![C64::new(0.0, 0.0); kdim * kdim];
            complex_hermite(w, kdim, &mut t);
            t
        })
        .collect()
}

/// Uniform one-dimensional composite Simpson grid over `[-half_width, half_width]` with step at
/// most `max_step`.
pub fn simpson_grid(half_width: f64, max_step: f64) -> (Vec<f64>, Vec<f64>) {
    let mut n = ((2.0 * half_width / max_step).ceil() as usize).max(2);
    if n % 2 == 1 {
        n += 1;
    }
    let step = 2.0 * half_width / n as f64;
    let nodes: Vec<f64> = (0..=n).map(|i| -half_width + i as f64 * step).collect();
    let weights = (0..=n)
        .map(|i| {
            let c = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * step / 3.0
        })
        .collect();
    (nodes, weights)
}

/// Box half-width and grid step resolving Hermite functions of degree `n` at scale `√h`.
pub fn lebesgue_resolution(h: f64, n: usize) -> (f64, f64) {
    let r = ((2 * n + 1) as f64).sqrt() + 6.0;
    let omega = r / h.sqrt();
    (h.sqrt() * r, std::f64::consts::PI / (4.0 * omega))
}

/// `H^{Leb}_h(φ, ψ)(z, ζ) = ∫ e^{−i t·ζ/h} φ(z + t/2) conj(ψ(z − t/2)) dt` on a tensor Simpson grid.
pub fn leb_wigner(
    phi: &dyn Fn(&[f64]) -> C64,
    psi: &dyn Fn(&[f64]) -> C64,
    z: &PhasePoint,
    h: f64,
    half_width: f64,
    step: f64,
) -> Result<C64> {
    let d = z.dim();
    let (nodes, weights) = simpson_grid(half_width, step);
    let axis = crate::gaussian_core::Axis { nodes, weights };
    let rule = ProductRule::new(vec![axis; d]);
    crate::limits::check_nodes(rule.node_count(), "Lebesgue Wigner grid")?;
    let mut plus = vec![0.0; d];
    let mut minus = vec![0.0; d];
    Ok(rule.integrate_c(|t| {
        let mut phase = 0.0;
        for j in 0..d {
            plus[j] = z.x[j] + t[j] / 2.0;
            minus[j] = z.x[j] - t[j] / 2.0;
            phase -= t[j] * z.xi[j] / h;
        }
        C64::from_polar(1.0, phase) * phi(&plus) * psi(&minus).conj()
    }))
}

/// Returns `(Ĥ(f,g)(Z), 2^{−dim} e^{|Z|²/h} H^{Leb}(γf, γg)(Z))`, each from its own quadrature.
pub fn wigner_leb_relation_check(f: &FunctionRep, g: &FunctionRep, z: &PhasePoint) -> Result<(C64, C64)> {
    check_pair(f, g, z)?;
    let d = f.basis.dim;
    if d > 2 {
        return input("wigner_leb_relation_check supports dim <= 2");
    }
    let h = f.basis.h;
    let lhs = wigner_gauss(f, g, z)?;
    let (r, step) = lebesgue_resolution(h, f.basis.max_degree);
    let zmax = z.x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let half = 2.0 * (r + zmax);
    let phi = |x: &[f64]| gamma_map(f, x).unwrap_or(C64::new(f64::NAN, 0.0));
    let psi = |x: &[f64]| gamma_map(g, x).unwrap_or(C64::new(f64::NAN, 0.0));
    let leb = leb_wigner(&phi, &psi, z, h, half, step)?;
    let rhs = leb * 2f64.powi(-(d as i32)) * (z.norm_sq() / h).exp();
    if !rhs.re.is_finite() || !rhs.im.is_finite() {
        return numerical("wigner_leb_relation_check: non-finite Lebesgue Wigner value");
    }
    Ok((lhs, rhs))
}

/// `Ĥ(Ψ_X, Ψ_Y)(Z) = e^{−(|X|²+|Y|²)/(4h)} K^{Weyl}_h(X, Y, Z)`.
pub fn wigner_coherent(x: &PhasePoint, y: &PhasePoint, z: &PhasePoint, h: f64) -> Result<C64> {
    if x.dim() != y.dim() || x.dim() != z.dim() {
        return input("wigner_coherent: dimensions differ");
    }
    if !(h > 0.0) {
        return input("wigner_coherent: h must be positive");
    }
    Ok(weyl_kernel(x, y, z, h) * (-(x.norm_sq() + y.norm_sq()) / (4.0 * h)).exp())
}

/// `∫ K^{Weyl}_h(X,Y,Z) T̂f(X) conj(T̂g(Y)) dμ_{E⁴,h}(X,Y)`.
///
/// The quadrature runs against `μ_{E⁴,2h}` with the density ratio folded into the integrand,
/// which keeps the indefinite quadratic part of the kernel inside the Gaussian envelope.
pub fn wigner_via_bargmann(f: &FunctionRep, g: &FunctionRep, z: &PhasePoint) -> Result<C64> {
    let order = match f.basis.dim {
        1 => 24 + f.basis.max_degree,
        _ => 10 + f.basis.max_degree / 2,
    };
    wigner_via_bargmann_with_order(f, g, z, order)
}

pub fn wigner_via_bargmann_with_order(f: &FunctionRep, g: &FunctionRep, z: &PhasePoint, order: usize) -> Result<C64> {
    check_pair(f, g, z)?;
    let d = f.basis.dim;
    if d > 2 {
        return input("wigner_via_bargmann supports dim <= 2");
    }
    let h = f.basis.h;
    let tf = BargmannFn::new(f.clone());
    let tg = BargmannFn::new(g.clone());
    let ratio = 4f64.powi(d as i32);
    let xrule = ProductRule::gaussian(&vec![2.0 * h; 2 * d], order)?;
    crate::limits::check_nodes(xrule.node_count().powi(2), "wigner_via_bargmann")?;
    let ynodes: Vec<(PhasePoint, f64, C64)> = {
        let mut v = Vec::new();
        xrule.for_each(|p, w| {
            let yp = PhasePoint::from_flat(p);
            let val = tg.eval(&yp).conj();
            v.push((yp, w, val));
        });
        v
    };
    let mut total = C64::new(0.0, 0.0);
    xrule.for_each(|p, wx| {
        let xp = PhasePoint::from_flat(p);
        let fx = tf.eval(&xp);
        if fx == C64::new(0.0, 0.0) {
            return;
        }
        let x2 = xp.norm_sq();
        let mut inner = C64::new(0.0, 0.0);
        for (yp, wy, gy) in &ynodes {
            let damp = (-(x2 + yp.norm_sq()) / (4.0 * h)).exp();
            inner += weyl_kernel(&xp, yp, z, h) * gy * (wy * damp);
        }
        total += inner * fx * wx;
    });
    Ok(total * ratio)
}

/// Values of `Ĥ_h(f, g)` on an evaluation set.
#[derive(Debug, Clone)]
pub struct WignerGrid {
    pub points: Vec<PhasePoint>,
    pub values: Vec<C64>,
    pub h: f64,
    pub provenance: String,
}

impl WignerGrid {
    /// Evaluates by the closed Hermite form (`quadrature = false`) or by [`wigner_gauss`].
    pub fn evaluate(f: &FunctionRep, g: &FunctionRep, points: Vec<PhasePoint>, quadrature: bool) -> Result<Self> {
        let values = points
            .iter()
            .map(|z| if quadrature { wigner_gauss(f, g, z) } else { wigner_hermite(f, g, z) })
            .collect::<Result<Vec<_>>>()?;
        let bound_scale = f.norm() * g.norm();
        for (z, v) in points.iter().zip(&values) {
            if !v.re.is_finite() || !v.im.is_finite() {
                return numerical("WignerGrid: non-finite value");
            }
            let bound = (z.norm_sq() / f.basis.h).exp() * bound_scale;
            if v.norm() > bound * (1.0 + 1e-9) + 1e-12 {
                return numerical(format!("WignerGrid: pointwise bound violated at {:?}", z.flat()));
            }
        }
        Ok(Self {
            points,
            values,
            h: f.basis.h,
            provenance: if quadrature { "quadrature".into() } else { "closed-form".into() },
        })
    }

    /// CSV with columns `z_0.., zeta_0.., re, im`.
    pub fn to_csv(&self) -> String {
        let d = self.points.first().map_or(0, |p| p.dim());
        let mut s = String::new();
        let mut cols: Vec<String> = (0..d).map(|j| format!("z{j}")).collect();
        cols.extend((0..d).map(|j| format!("zeta{j}")));
        cols.push("re".into());
        cols.push("im".into());
        s.push_str(&cols.join(","));
        s.push('\n');
        for (p, v) in self.points.iter().zip(&self.values) {
            let mut row: Vec<String> = p.x.iter().chain(&p.xi).map(|c| format!("{c:.12e}")).collect();
            row.push(format!("{:.12e}", v.re));
            row.push(format!("{:.12e}", v.im));
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }
}

/// `‖Ĥ(f,g)‖_{L^p(μ_{E²,var})}` for `p ∈ {1, 2}` by Gauss-Hermite with the closed Hermite form.
pub fn wigner_lp_norm(f: &FunctionRep, g: &FunctionRep, p: u32, var: f64, order: usize) -> Result<f64> {
    if !f.basis.same_space(&g.basis) {
        return input("wigner_lp_norm: different bases");
    }
    if p != 1 && p != 2 {
        return input("wigner_lp_norm supports p = 1 or 2");
    }
    let d = f.basis.dim;
    let rule = ProductRule::gaussian(&vec![var; 2 * d], order)?;
    let mut acc = 0.0;
    let mut err = None;
    rule.for_each(|q, w| match wigner_hermite(f, g, &PhasePoint::from_flat(q)) {
        Ok(v) => acc += w * v.norm().powi(p as i32),
        Err(e) => err = Some(e),
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok(if p == 2 { acc.sqrt() } else { acc })
}
