//! Full and partial heat semigroups on phase-space symbols, the adjoint `M̃`, the
//! coordinate-split operators `T_I` and `S_J`, and the subset decomposition.
//!
//! `H_{D_j,t}` averages the pair `(x_j, ξ_j)` against a centred Gaussian of variance `t` per
//! coordinate. Derived symbols are heat combinations, so their own heat actions
//! stay exact whenever the base symbol's action is.

use crate::error::{input, Result};
use crate::gaussian_core::ProductRule;
use crate::limits::check_subsets;
use crate::phase::{PhasePoint, C64};
use crate::symbol_library::{heat_combination, heat_quadrature, ClassData, SymbolDescriptor};

/// Split of `{0..D−1}` into `I` and its complement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoordinateSplit {
    pub ambient_dim: usize,
    pub selected: Vec<usize>,
}

impl CoordinateSplit {
    pub fn new(ambient_dim: usize, mut selected: Vec<usize>) -> Result<Self> {
        selected.sort_unstable();
        selected.dedup();
        if selected.iter().any(|&j| j >= ambient_dim) {
            return input(format!("coordinate split: index out of range for D = {ambient_dim}"));
        }
        Ok(Self { ambient_dim, selected })
    }

    pub fn all(ambient_dim: usize) -> Self {
        Self { ambient_dim, selected: (0..ambient_dim).collect() }
    }

    pub fn complement(&self) -> Vec<usize> {
        (0..self.ambient_dim).filter(|j| !self.selected.contains(j)).collect()
    }

    /// Variance vector with `t` on `(x_j, ξ_j)` for `j` in the selected set or its complement.
    pub fn variances(&self, t: f64, on_selected: bool) -> Vec<f64> {
        let d = self.ambient_dim;
        let mut v = vec![0.0; 2 * d];
        for j in 0..d {
            if self.selected.contains(&j) == on_selected {
                v[j] = t;
                v[d + j] = t;
            }
        }
        v
    }
}

fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return input(format!("heat: t must be positive, got {t}"));
    }
    Ok(())
}

fn check_point(f: &SymbolDescriptor, z: &PhasePoint) -> Result<()> {
    if z.dim() != f.dim {
        return input(format!("heat: point dim {} vs symbol dim {}", z.dim(), f.dim));
    }
    Ok(())
}

/// `∫ F(Z + Y) dμ_{2D,t}(Y)`, exact when `F` declares a heat action.
pub fn heat_full(f: &SymbolDescriptor, t: f64, z: &PhasePoint) -> Result<C64> {
    check_t(t)?;
    check_point(f, z)?;
    f.heat(&vec![t; 2 * f.dim], &z.x, &z.xi)
}

/// [`heat_full`] by tensor Gauss-Hermite of the given per-axis order, ignoring closed forms.
pub fn heat_full_quadrature(f: &SymbolDescriptor, t: f64, z: &PhasePoint, order: usize) -> Result<C64> {
    check_t(t)?;
    check_point(f, z)?;
    heat_quadrature(f, &vec![t; 2 * f.dim], &z.x, &z.xi, Some(order))
}

/// Gaussian average over the selected coordinate pairs (or over the complement).
pub fn heat_partial(f: &SymbolDescriptor, split: &CoordinateSplit, on_selected: bool, t: f64, z: &PhasePoint) -> Result<C64> {
    check_t(t)?;
    check_point(f, z)?;
    if split.ambient_dim != f.dim {
        return input("heat_partial: split dimension differs from the symbol dimension");
    }
    f.heat(&split.variances(t, on_selected), &z.x, &z.xi)
}

pub fn heat_partial_quadrature(
    f: &SymbolDescriptor,
    split: &CoordinateSplit,
    on_selected: bool,
    t: f64,
    z: &PhasePoint,
    order: Option<usize>,
) -> Result<C64> {
    check_t(t)?;
    check_point(f, z)?;
    heat_quadrature(f, &split.variances(t, on_selected), &z.x, &z.xi, order)
}

/// `(M̃_{E⊥,t,h1,h2} G)(Z) = ∫ G(Z_E, Y + (h2/(t+h2)) Z_{E⊥}) dμ_{t h2/(t+h2)}(Y)` with
/// `E` the selected coordinates of `split`.
#[allow(clippy::too_many_arguments)]
pub fn heat_adjoint_m(
    g: &dyn Fn(&[f64], &[f64]) -> C64,
    split: &CoordinateSplit,
    t: f64,
    h1: f64,
    h2: f64,
    z: &PhasePoint,
    order: usize,
) -> Result<C64> {
    check_t(t)?;
    if !(h1 > 0.0 && h2 > 0.0) {
        return input("heat_adjoint_M: h1 and h2 must be positive");
    }
    let d = split.ambient_dim;
    if z.dim() != d {
        return input("heat_adjoint_M: dimension mismatch");
    }
    let comp = split.complement();
    if comp.is_empty() {
        return Ok(g(&z.x, &z.xi));
    }
    let shrink = h2 / (t + h2);
    let var = t * h2 / (t + h2);
    let rule = ProductRule::gaussian(&vec![var; 2 * comp.len()], order)?;
    let mut x = z.x.clone();
    let mut xi = z.xi.clone();
    let k = comp.len();
    Ok(rule.integrate_c(|y| {
        for (i, &j) in comp.iter().enumerate() {
            x[j] = y[i] + shrink * z.x[j];
            xi[j] = y[k + i] + shrink * z.xi[j];
        }
        g(&x, &xi)
    }))
}

/// `‖F‖_{L^p(ν_{h1,h2})}` with variance `h1` on the selected pairs and `h2` on the rest.
pub fn lp_norm_nu(f: &dyn Fn(&[f64], &[f64]) -> C64, split: &CoordinateSplit, h1: f64, h2: f64, p: f64, order: usize) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return input("lp_norm_nu: p must be in [1, ∞)");
    }
    let d = split.ambient_dim;
    let mut vars = vec![h2; 2 * d];
    for &j in &split.selected {
        vars[j] = h1;
        vars[d + j] = h1;
    }
    let rule = ProductRule::gaussian(&vars, order)?;
    let s = rule.integrate(|q| f(&q[..d], &q[d..]).norm().powf(p));
    Ok(s.powf(1.0 / p))
}

/// Both sides of `∫ H̃_{E⊥,t}F · G dν_{h1,h2} = ∫ F · M̃G dν_{h1,h2+t}` by quadrature.
pub fn duality_check(
    f: &SymbolDescriptor,
    g: &SymbolDescriptor,
    split: &CoordinateSplit,
    t: f64,
    h1: f64,
    h2: f64,
    order: usize,
) -> Result<(C64, C64)> {
    let d = split.ambient_dim;
    if f.dim != d || g.dim != d {
        return input("duality_check: dimension mismatch");
    }
    let var_comp = split.variances(t, false);
    let mut nu1 = vec![h2; 2 * d];
    let mut nu2 = vec![h2 + t; 2 * d];
    for &j in &split.selected {
        nu1[j] = h1;
        nu1[d + j] = h1;
        nu2[j] = h1;
        nu2[d + j] = h1;
    }
    let r1 = ProductRule::gaussian(&nu1, order)?;
    let mut err = None;
    let lhs = r1.integrate_c(|q| match heat_quadrature(f, &var_comp, &q[..d], &q[d..], Some(order)) {
        Ok(v) => v * g.eval(&q[..d], &q[d..]),
        Err(e) => {
            err.get_or_insert(e);
            C64::new(0.0, 0.0)
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    let r2 = ProductRule::gaussian(&nu2, order)?;
    let gev = g.evaluator();
    let geval = move |x: &[f64], xi: &[f64]| gev(x, xi);
    let mut err = None;
    let rhs = r2.integrate_c(|q| {
        let z = PhasePoint::from_flat(q);
        match heat_adjoint_m(&geval, split, t, h1, h2, &z, order) {
            Ok(m) => f.eval(&q[..d], &q[d..]) * m,
            Err(e) => {
                err.get_or_insert(e);
                C64::new(0.0, 0.0)
            }
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok((lhs, rhs))
}

fn set_variances(d: usize, set: &[usize], t: f64) -> Vec<f64> {
    let mut v = vec![0.0; 2 * d];
    for &j in set {
        v[j] = t;
        v[d + j] = t;
    }
    v
}

fn check_index_set(d: usize, set: &[usize], what: &str) -> Result<Vec<usize>> {
    let mut s = set.to_vec();
    s.sort_unstable();
    s.dedup();
    if s.len() != set.len() {
        return input(format!("{what}: repeated index"));
    }
    if s.iter().any(|&j| j >= d) {
        return input(format!("{what}: index out of range for D = {d}"));
    }
    Ok(s)
}

/// `T_{I,h} F = Π_{j∈I} (Id − H_{D_j,h/2}) F`, expanded over subsets of `I`.
pub fn op_t_i(f: &SymbolDescriptor, set: &[usize], h: f64) -> Result<SymbolDescriptor> {
    check_t(h)?;
    let set = check_index_set(f.dim, set, "op_T_I")?;
    check_subsets(set.len(), "op_T_I")?;
    let d = f.dim;
    let mut terms = Vec::with_capacity(1 << set.len());
    for mask in 0u64..(1u64 << set.len()) {
        let sub: Vec<usize> = set.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &j)| j).collect();
        let sign = if sub.len() % 2 == 0 { 1.0 } else { -1.0 };
        terms.push((sign, set_variances(d, &sub, h / 2.0)));
    }
    heat_combination(f, terms, format!("T_{:?}({})", set, f.name))
}

/// `S_{J,h} F = H_{E(J),h/2} F`.
pub fn op_s(f: &SymbolDescriptor, set: &[usize], h: f64) -> Result<SymbolDescriptor> {
    check_t(h)?;
    let set = check_index_set(f.dim, set, "op_S")?;
    heat_combination(f, vec![(1.0, set_variances(f.dim, &set, h / 2.0))], format!("S_{:?}({})", set, f.name))
}

/// `(G(Z), Σ_{I⊆Λ} (T_{I,h} S_{Λ∖I,h} G)(Z))`.
pub fn decomposition_check(g: &SymbolDescriptor, lambda: &[usize], h: f64, z: &PhasePoint) -> Result<(C64, C64)> {
    check_point(g, z)?;
    let lambda = check_index_set(g.dim, lambda, "decomposition_check")?;
    check_subsets(lambda.len(), "decomposition_check")?;
    let lhs = g.eval_point(z);
    let mut rhs = C64::new(0.0, 0.0);
    for mask in 0u64..(1u64 << lambda.len()) {
        let (i_set, rest): (Vec<usize>, Vec<usize>) = {
            let mut a = Vec::new();
            let mut b = Vec::new();
            for (k, &j) in lambda.iter().enumerate() {
                if mask >> k & 1 == 1 {
                    a.push(j)
                } else {
                    b.push(j)
                }
            }
            (a, b)
        };
        let term = op_t_i(&op_s(g, &rest, h)?, &i_set, h)?;
        rhs += term.eval_point(z);
    }
    Ok((lhs, rhs))
}

/// Closed form of `T_{I,h} F_{a,b} / F_{a,b} = Π_{j∈I}(1 − e^{−(h/4)(a_j² + b_j²)})`.
pub fn t_i_exponential_factor(a: &[f64], b: &[f64], set: &[usize], h: f64) -> f64 {
    set.iter().map(|&j| 1.0 - (-(h / 4.0) * (a[j] * a[j] + b[j] * b[j])).exp()).product()
}

/// `M (18 S_ε h)^{|I|} Π_{j∈I} ε_j²`, the bound on `N^{(2)}_{I,h}(T_{I,h} F)`.
pub fn smoothing_bound(class: &ClassData, set: &[usize], h: f64) -> f64 {
    let s = class.s_eps();
    class.big_m * set.iter().map(|&j| 18.0 * s * h * class.eps[j] * class.eps[j]).product::<f64>()
}

/// `F∘π_E`: coordinates outside `keep` are set to zero before evaluation.
pub fn project_symbol(f: &SymbolDescriptor, keep: &[usize]) -> Result<SymbolDescriptor> {
    let keep = check_index_set(f.dim, keep, "project_symbol")?;
    let d = f.dim;
    let inner = f.evaluator();
    let mask: Vec<bool> = (0..d).map(|j| keep.contains(&j)).collect();
    let mut s = SymbolDescriptor::from_fn(format!("{}∘π{:?}", f.name, keep), d, f.growth, f.real_valued, move |x, xi| {
        let xm: Vec<f64> = x.iter().zip(&mask).map(|(v, &m)| if m { *v } else { 0.0 }).collect();
        let xim: Vec<f64> = xi.iter().zip(&mask).map(|(v, &m)| if m { *v } else { 0.0 }).collect();
        inner(&xm, &xim)
    });
    s.class = f.class.clone();
    Ok(s)
}

/// `((H_{E,t}F)∘π_{E_n})(Z)` and `H_{E,t}(F∘π_{E_n})(Z)`, both by the same quadrature.
pub fn projection_commutation(f: &SymbolDescriptor, e: &[usize], en: &[usize], t: f64, z: &PhasePoint) -> Result<(C64, C64)> {
    check_t(t)?;
    check_point(f, z)?;
    if e.iter().any(|j| !en.contains(j)) {
        return input("projection_commutation: E must be contained in E_n");
    }
    let d = f.dim;
    let split = CoordinateSplit::new(d, e.to_vec())?;
    let mut pz = z.clone();
    for j in 0..d {
        if !en.contains(&j) {
            pz.x[j] = 0.0;
            pz.xi[j] = 0.0;
        }
    }
    let lhs = heat_partial_quadrature(f, &split, true, t, &pz, None)?;
    let proj = project_symbol(f, en)?;
    let rhs = heat_partial_quadrature(&proj, &split, true, t, z, None)?;
    Ok((lhs, rhs))
}
