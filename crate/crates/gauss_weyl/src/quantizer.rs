//! Weyl, anti-Wick and hybrid quantization in the truncated Hermite basis, the classical
//! Lebesgue-kernel oracle, the exponential-symbol operators `U_{a,b,h}`, the truncation ladder
//! and Wick symbols.
//!
//! Matrices follow [`OperatorMatrix`]: entry `(l, k)` is `⟨A e_k, e_l⟩`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::contraction::{aw_site, contract, tensor_to_matrix, weyl_site, SiteTable};
use crate::error::{input, numerical, Result};
use crate::gaussian_core::Axis;
use crate::heat_semigroup::{op_t_i, CoordinateSplit};
use crate::hermite_space::{coherent_state, hermite_values, FunctionRep, HermiteBasis};
use crate::limits::{check_nodes, check_subsets};
use crate::linalg::{norm_estimate, CMatrix, MatrixMeta, OperatorMatrix};
use crate::mutation::kernel_sign_flip;
use crate::phase::{PhasePoint, C64};
use crate::symbol_library::{FourierAtom, Growth, SymbolDescriptor};
use crate::wigner::{lebesgue_resolution, simpson_grid};

pub use crate::linalg::operator_norm;

/// Residual allowed in the `F = 1` diagnostic of the classical kernel grid.
pub const CLASSICAL_DIAGNOSTIC_TOL: f64 = 1e-6;

/// Default per-axis Gauss-Hermite order for site tables.
pub fn site_order(dim: usize, max_degree: usize) -> usize {
    match dim {
        1 => max_degree + 24,
        2 => max_degree + 12,
        3 => max_degree + 6,
        _ => max_degree + 3,
    }
}

fn check_symbol(f: &SymbolDescriptor, basis: &HermiteBasis) -> Result<()> {
    if f.dim != basis.dim {
        return input(format!("symbol dim {} vs basis dim {}", f.dim, basis.dim));
    }
    if matches!(f.growth, Growth::Undeclared) {
        return input(format!("symbol '{}' has no declared growth class", f.name));
    }
    Ok(())
}

fn assemble(f: &SymbolDescriptor, basis: &HermiteBasis, sites: &[Vec<&SiteTable>], method: &str, order: usize) -> Result<OperatorMatrix> {
    let g = f.evaluator();
    let c = contract(sites, &|z: &[f64], zeta: &[f64]| g(z, zeta))?;
    let m = tensor_to_matrix(basis, &c.tensors[0], c.kdim)?;
    OperatorMatrix::new(
        basis.clone(),
        m,
        MatrixMeta { symbol: f.name.clone(), method: method.into(), h: basis.h, order, notes: vec![] },
    )
}

/// `Op^{Weyl}_h(F)` from `A_{lk} = ∫ F Ĥ(e_k, e_l) dμ_{E²,h/2}`.
pub fn weyl_matrix(f: &SymbolDescriptor, basis: &HermiteBasis) -> Result<OperatorMatrix> {
    weyl_matrix_with_order(f, basis, site_order(basis.dim, basis.max_degree))
}

pub fn weyl_matrix_with_order(f: &SymbolDescriptor, basis: &HermiteBasis, order: usize) -> Result<OperatorMatrix> {
    check_symbol(f, basis)?;
    let w = weyl_site(basis.h, basis.max_degree, order)?;
    assemble(f, basis, &vec![vec![&w]; basis.dim], "weyl", order)
}

/// `Q^{Weyl}_h(F)(f, g)` by Gauss-Hermite quadrature of the Wigner-Gauss pairing.
pub fn weyl_form(f: &SymbolDescriptor, u: &FunctionRep, v: &FunctionRep) -> Result<C64> {
    if !u.basis.same_space(&v.basis) {
        return input("weyl_form: functions use different bases");
    }
    weyl_matrix(f, &u.basis)?.form(u, v)
}

/// `Op^{AW}_h(F)` from `A_{lk} = ∫ F T̂e_k conj(T̂e_l) dμ_{E²,h}`.
pub fn antiwick_matrix(f: &SymbolDescriptor, basis: &HermiteBasis) -> Result<OperatorMatrix> {
    antiwick_matrix_with_order(f, basis, site_order(basis.dim, basis.max_degree))
}

pub fn antiwick_matrix_with_order(f: &SymbolDescriptor, basis: &HermiteBasis, order: usize) -> Result<OperatorMatrix> {
    check_symbol(f, basis)?;
    let a = aw_site(basis.h, basis.max_degree, order)?;
    assemble(f, basis, &vec![vec![&a]; basis.dim], "anti-wick", order)
}

/// `Q^{hyb,E(I)}_h(F)`: Weyl tables on the selected coordinates, anti-Wick tables elsewhere.
pub fn hybrid_matrix(f: &SymbolDescriptor, split: &CoordinateSplit, basis: &HermiteBasis) -> Result<OperatorMatrix> {
    hybrid_matrix_with_order(f, split, basis, site_order(basis.dim, basis.max_degree))
}

pub fn hybrid_matrix_with_order(f: &SymbolDescriptor, split: &CoordinateSplit, basis: &HermiteBasis, order: usize) -> Result<OperatorMatrix> {
    check_symbol(f, basis)?;
    if split.ambient_dim != basis.dim {
        return input("hybrid_matrix: split dimension differs from the basis dimension");
    }
    let w = weyl_site(basis.h, basis.max_degree, order)?;
    let a = aw_site(basis.h, basis.max_degree, order)?;
    let sites: Vec<Vec<&SiteTable>> =
        (0..basis.dim).map(|j| vec![if split.selected.contains(&j) { &w } else { &a }]).collect();
    let mut m = assemble(f, basis, &sites, "hybrid", order)?;
    m.meta.notes.push(format!("weyl coordinates {:?}", split.selected));
    Ok(m)
}

/// Per-coordinate table of the kernel-integral path: the `X` and `Y` integrals of
/// `K^{Weyl}(X,Y,Z) T̂e_k(X) conj(T̂e_l(Y))` against `μ_h ⊗ μ_h`, done by Gaussian moments,
/// leaving
/// `Q_{kl}(Z) = (2/h)^{k/2} (2h)^{l/2} √(l!)/√(k!) Σ_m C(k,m) c^m α^{k−m} (β/h)^{l−m}/(l−m)!`
/// with `α = z − iζ`, `β = z + iζ` and `c` the cross coefficient of the kernel (`−½`).
pub fn kernel_site(h: f64, max_degree: usize, order: usize) -> Result<SiteTable> {
    let kdim = max_degree + 1;
    let axis = Axis::gaussian(h / 2.0, order)?;
    let cross: f64 = if kernel_sign_flip() { 0.5 } else { -0.5 };
    let fact: Vec<f64> = (0..=kdim).scan(1.0, |s, k| {
        let v = *s;
        *s *= (k + 1) as f64;
        Some(v)
    }).collect();
    let binom = |n: usize, k: usize| fact[n] / (fact[k] * fact[n - k]);
    Ok(SiteTable::from_grid("kernel", &axis, &axis, kdim, |z, zeta, out: &mut [C64]| {
        let alpha = C64::new(z, -zeta);
        let beta = C64::new(z, zeta) / h;
        let ap: Vec<C64> = (0..kdim).scan(C64::new(1.0, 0.0), |s, _| { let v = *s; *s *= alpha; Some(v) }).collect();
        let bp: Vec<C64> = (0..kdim).scan(C64::new(1.0, 0.0), |s, _| { let v = *s; *s *= beta; Some(v) }).collect();
        for k in 0..kdim {
            for l in 0..kdim {
                let mut s = C64::new(0.0, 0.0);
                for m in 0..=k.min(l) {
                    s += ap[k - m] * bp[l - m] * (binom(k, m) * cross.powi(m as i32) / fact[l - m]);
                }
                let pre = (2.0 / h).powf(k as f64 / 2.0) * (2.0 * h).powf(l as f64 / 2.0) * fact[l].sqrt() / fact[k].sqrt();
                out[k * kdim + l] = s * pre;
            }
        }
    }))
}

/// Weyl matrix through the kernel-integral path.
pub fn weyl_matrix_kernel(f: &SymbolDescriptor, basis: &HermiteBasis, order: usize) -> Result<OperatorMatrix> {
    check_symbol(f, basis)?;
    let k = kernel_site(basis.h, basis.max_degree, order)?;
    assemble(f, basis, &vec![vec![&k]; basis.dim], "weyl-kernel", order)
}

/// `Q(U, V) = ∫ K^{Weyl} U(X) V(Y) H(Z)` with `U = T̂f`, `V = conj(T̂g)`, through the kernel path.
pub fn kernel_form(hsym: &SymbolDescriptor, f: &FunctionRep, g: &FunctionRep, order: usize) -> Result<C64> {
    if !f.basis.same_space(&g.basis) {
        return input("kernel_form: functions use different bases");
    }
    weyl_matrix_kernel(hsym, &f.basis, order)?.form(f, g)
}

/// `(9π/2)^{|I|} N^{(2)}_{I,h}(H) ‖U‖ ‖V‖`.
pub fn kernel_form_bound(n2: f64, set_len: usize, u_norm: f64, v_norm: f64) -> f64 {
    (4.5 * std::f64::consts::PI).powi(set_len as i32) * n2 * u_norm * v_norm
}

/// `γe_0..γe_n` at `x`.
fn gamma_basis_values(x: f64, h: f64, n: usize) -> Vec<f64> {
    let sigma = (h / 2.0).sqrt();
    let g = (std::f64::consts::PI * h).powf(-0.25) * (-x * x / (2.0 * h)).exp();
    hermite_values(x / sigma, n).into_iter().map(|v| v * g).collect()
}

/// Site table for the classical Weyl kernel: nodes of a Simpson grid in `(z, ζ)` and values
/// `(2πh)^{−1} H^{Leb}_h(γe_k, γe_l)(z, ζ)`, each `H^{Leb}` itself a Simpson sum in `t`.
pub fn classical_site(h: f64, max_degree: usize) -> Result<SiteTable> {
    let kdim = max_degree + 1;
    let p = kdim * kdim;
    let (r, step) = lebesgue_resolution(h, max_degree);
    let (zn, zw) = simpson_grid(r, step);
    let (tn, tw) = simpson_grid(2.0 * r, step);
    let (nz, nt) = (zn.len(), tn.len());
    check_nodes((nz * nz) as f64 * nt as f64 * p as f64 / 64.0, "classical kernel grid")?;
    let cmat = DMatrix::<f64>::from_fn(nt, nz, |i, j| (tn[i] * zn[j] / h).cos());
    let smat = DMatrix::<f64>::from_fn(nt, nz, |i, j| (tn[i] * zn[j] / h).sin());
    let norm = 1.0 / (2.0 * std::f64::consts::PI * h);
    let rows: Vec<(Vec<f64>, Vec<f64>, Vec<C64>)> = (0..nz)
        .into_par_iter()
        .map(|iz| {
            let z = zn[iz];
            let mut pm = DMatrix::<f64>::zeros(p, nt);
            for (it, &t) in tn.iter().enumerate() {
                let a = gamma_basis_values(z + t / 2.0, h, max_degree);
                let b = gamma_basis_values(z - t / 2.0, h, max_degree);
                for k in 0..kdim {
                    for l in 0..kdim {
                        pm[(k * kdim + l, it)] = tw[it] * a[k] * b[l];
                    }
                }
            }
            let re = &pm * &cmat;
            let im = &pm * &smat;
            let mut zs = Vec::new();
            let mut zetas = Vec::new();
            let mut vals = Vec::new();
            for (j, &zeta) in zn.iter().enumerate() {
                if z * z + zeta * zeta > r * r {
                    continue;
                }
                let w = zw[iz] * zw[j] * norm;
                zs.push(z);
                zetas.push(zeta);
                for q in 0..p {
                    vals.push(C64::new(re[(q, j)], -im[(q, j)]) * w);
                }
            }
            (zs, zetas, vals)
        })
        .collect();
    let mut table = SiteTable { label: "classical".into(), z: vec![], zeta: vec![], vals: vec![], kdim };
    for (zs, zetas, vals) in rows {
        table.z.extend(zs);
        table.zeta.extend(zetas);
        table.vals.extend(vals);
    }
    Ok(table)
}

/// Largest deviation of the `F = 1` moments of a site table from the identity.
pub fn identity_residual(table: &SiteTable) -> f64 {
    let kdim = table.kdim;
    table
        .moments()
        .iter()
        .enumerate()
        .map(|(q, v)| {
            let target = if q / kdim == q % kdim { 1.0 } else { 0.0 };
            (v - C64::new(target, 0.0)).norm()
        })
        .fold(0.0, f64::max)
}

/// `Op^{Weyl,Leb}_h(F)` on the `γ`-transformed basis, by the classical kernel on a Simpson grid.
///
/// The grid is accepted only when it reproduces the identity for `F = 1` within
/// [`CLASSICAL_DIAGNOSTIC_TOL`].
pub fn weyl_matrix_classical(f: &SymbolDescriptor, basis: &HermiteBasis) -> Result<OperatorMatrix> {
    check_symbol(f, basis)?;
    if basis.dim > 2 {
        return input("weyl_matrix_classical supports dim <= 2");
    }
    let table = classical_site(basis.h, basis.max_degree)?;
    let resid = identity_residual(&table);
    if !(resid <= CLASSICAL_DIAGNOSTIC_TOL) {
        let (r, step) = lebesgue_resolution(basis.h, basis.max_degree);
        return numerical(format!(
            "classical kernel grid fails the F = 1 diagnostic: residual {resid:.3e} (box {r:.3}, step {step:.4}, {} nodes)",
            table.len()
        ));
    }
    let mut m = assemble(f, basis, &vec![vec![&table]; basis.dim], "weyl-classical", table.len())?;
    m.meta.notes.push(format!("identity residual {resid:.3e}"));
    Ok(m)
}

/// `‖Op^{AW}(F) − Op^{Weyl,Leb}(H̃_{h/2}F)‖` in dim 1.
pub fn antiwick_equals_smoothed_weyl_check(f: &SymbolDescriptor, basis: &HermiteBasis) -> Result<f64> {
    if basis.dim != 1 {
        return input("antiwick_equals_smoothed_weyl_check supports dim 1");
    }
    let aw = antiwick_matrix(f, basis)?;
    let smoothed = crate::symbol_library::heat_combination(f, vec![(1.0, vec![basis.h / 2.0; 2])], "H_{h/2} F")?;
    let w = weyl_matrix_classical(&smoothed, basis)?;
    operator_norm(&aw.sub(&w)?)
}

/// One-coordinate matrix of `U_{a,b,h}` by Gauss-Hermite quadrature in `u`.
fn oracle_u_1d(a: f64, b: f64, h: f64, n: usize, order: usize) -> Result<CMatrix> {
    let kdim = n + 1;
    let sigma = (h / 2.0).sqrt();
    let axis = Axis::gaussian(h / 2.0, order)?;
    let pre = C64::new(-0.5 * h * b * b, 0.5 * h * a * b);
    let mut m = CMatrix::zeros(kdim, kdim);
    for (&u, &w) in axis.nodes.iter().zip(&axis.weights) {
        let phase = (pre + C64::new(-b * u, a * u)).exp() * w;
        let shifted = hermite_values((u + h * b) / sigma, n);
        let here = hermite_values(u / sigma, n);
        for l in 0..kdim {
            for k in 0..kdim {
                m[(l, k)] += phase * shifted[k] * here[l];
            }
        }
    }
    Ok(m)
}

fn kron_over_basis(basis: &HermiteBasis, factors: &[CMatrix]) -> CMatrix {
    let n = basis.len();
    let multis = basis.multis();
    CMatrix::from_fn(n, n, |r, c| {
        let (ml, mk) = (&multis[r], &multis[c]);
        (0..basis.dim).map(|j| factors[j][(ml[j], mk[j])]).product()
    })
}

/// Matrix of `(U_{a,b,h} f)(u) = e^{−(h/2)|b|² + (ih/2)a·b + iℓ_{a+ib}(u)} f(u + hb)`.
pub fn oracle_u(a: &[f64], b: &[f64], basis: &HermiteBasis) -> Result<OperatorMatrix> {
    if a.len() != basis.dim || b.len() != basis.dim {
        return input("oracle_U: a and b must have the basis dimension");
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return input("oracle_U: non-finite parameter");
    }
    let h = basis.h;
    let order = basis.max_degree + 48;
    let factors = (0..basis.dim)
        .map(|j| oracle_u_1d(a[j], b[j], h, basis.max_degree, order))
        .collect::<Result<Vec<_>>>()?;
    OperatorMatrix::new(
        basis.clone(),
        kron_over_basis(basis, &factors),
        MatrixMeta { symbol: format!("U(a={a:?}, b={b:?})"), method: "oracle-U".into(), h, order, notes: vec![] },
    )
}

/// `Σ_k c_k U_{a_k,b_k,h}`, optionally with anti-Wick weights `e^{−(h/4)(|a_k|²+|b_k|²)}`.
pub fn quantize_fourier_measure(atoms: &[FourierAtom], basis: &HermiteBasis, antiwick: bool) -> Result<OperatorMatrix> {
    if atoms.is_empty() {
        return input("quantize_fourier_measure: no atoms");
    }
    let n = basis.len();
    let mut acc = CMatrix::zeros(n, n);
    for at in atoms {
        let u = oracle_u(&at.a, &at.b, basis)?;
        let mut c = at.c();
        if antiwick {
            let s: f64 = at.a.iter().chain(&at.b).map(|v| v * v).sum();
            c *= (-(basis.h / 4.0) * s).exp();
        }
        acc += u.entries * c;
    }
    OperatorMatrix::new(
        basis.clone(),
        acc,
        MatrixMeta {
            symbol: "fourier_measure".into(),
            method: if antiwick { "fourier-aw" } else { "fourier-weyl" }.into(),
            h: basis.h,
            order: basis.max_degree + 48,
            notes: vec![],
        },
    )
}

/// Wick symbol value with its resolution flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WickValue {
    pub value: C64,
    pub captured_norm_sq: f64,
    pub low_confidence: bool,
}

/// `⟨A Ψ_{X,h}, Ψ_{X,h}⟩` with the truncated coherent state.
pub fn wick_symbol(a: &OperatorMatrix, x: &PhasePoint) -> Result<WickValue> {
    let c = coherent_state(x, a.basis.h, &a.basis)?;
    let value = a.form(&c.rep, &c.rep)?;
    Ok(WickValue {
        value,
        captured_norm_sq: c.captured_norm_sq,
        low_confidence: c.under_resolved || c.captured_norm_sq < 1.0 - 1e-6,
    })
}

// ---------------------------------------------------------------------------------------------
// Ladder

/// `Λ_1 ⊂ … ⊂ Λ_N = {0..D−1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexLadder {
    pub ambient_dim: usize,
    pub subsets: Vec<Vec<usize>>,
}

impl IndexLadder {
    pub fn new(ambient_dim: usize, subsets: Vec<Vec<usize>>) -> Result<Self> {
        if subsets.is_empty() {
            return input("ladder: no steps");
        }
        let mut norm = Vec::with_capacity(subsets.len());
        for s in subsets {
            let mut s = s;
            s.sort_unstable();
            s.dedup();
            if s.iter().any(|&j| j >= ambient_dim) {
                return input("ladder: index out of range");
            }
            norm.push(s);
        }
        for w in norm.windows(2) {
            if w[1].len() <= w[0].len() || w[0].iter().any(|j| !w[1].contains(j)) {
                return input("ladder: subsets must be strictly increasing");
            }
        }
        if norm.last().map(|s| s.len()) != Some(ambient_dim) {
            return input("ladder: the last subset must be the full index set");
        }
        Ok(Self { ambient_dim, subsets: norm })
    }

    /// `Λ_n = {order[0..n]}` for `n = 1..D`.
    pub fn from_order(order: &[usize]) -> Result<Self> {
        let d = order.len();
        Self::new(d, (1..=d).map(|n| order[..n].to_vec()).collect())
    }

    pub fn prefix(d: usize) -> Result<Self> {
        Self::from_order(&(0..d).collect::<Vec<_>>())
    }
}

/// `M Π_j (1 + 81π h S_ε ε_j²)` with `S_ε = sup_j max(1, ε_j²)`.
pub fn cv_bound(m: f64, eps: &[f64], h: f64) -> Result<f64> {
    if !(h > 0.0 && h <= 1.0) {
        return input(format!("cv_bound requires h in (0, 1], got {h}"));
    }
    let s = eps.iter().fold(1.0f64, |s, e| s.max(e * e));
    Ok(m * eps.iter().map(|e| 1.0 + 81.0 * std::f64::consts::PI * h * s * e * e).product::<f64>())
}

/// `M (81π h S_ε)^{|I|} Π_{j∈I} ε_j²`.
pub fn term_bound(m: f64, eps: &[f64], set: &[usize], h: f64) -> f64 {
    let s = eps.iter().fold(1.0f64, |s, e| s.max(e * e));
    m * set.iter().map(|&j| 81.0 * std::f64::consts::PI * h * s * eps[j] * eps[j]).product::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderStep {
    pub n: usize,
    pub lambda_size: usize,
    pub diff_norm: f64,
    pub diff_bound: f64,
    pub tail: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermRecord {
    pub set: Vec<usize>,
    pub norm: f64,
    pub bound: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub ambient_dim: usize,
    pub h: f64,
    pub max_degree: usize,
    pub order: usize,
    pub steps: Vec<LadderStep>,
    pub terms: Vec<TermRecord>,
    pub final_norm: f64,
    pub cv_bound: f64,
    /// Change of the final norm when the degree cap and order are raised by one and two.
    pub error_bar: Option<f64>,
    pub final_matrix: OperatorMatrix,
}

impl ConvergenceReport {
    pub fn within_bounds(&self) -> bool {
        self.steps.iter().all(|s| s.diff_norm <= s.diff_bound * (1.0 + 1e-9) + 1e-9)
            && self.terms.iter().all(|t| t.norm <= t.bound * (1.0 + 1e-9) + 1e-9)
            && self.final_norm <= self.cv_bound * (1.0 + 1e-9) + 1e-9
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,lambda_size,diff_norm,diff_bound,tail,final_norm,cv_bound\n");
        for st in &self.steps {
            s.push_str(&format!(
                "{},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                st.n, st.lambda_size, st.diff_norm, st.diff_bound, st.tail, self.final_norm, self.cv_bound
            ));
        }
        s
    }
}

/// All hybrid matrices `H_S` (Weyl on `S`, anti-Wick elsewhere) from one contraction; the
/// result is indexed by the bit mask of `S`.
pub fn hybrid_family(f: &SymbolDescriptor, basis: &HermiteBasis, order: usize) -> Result<Vec<OperatorMatrix>> {
    check_symbol(f, basis)?;
    let d = basis.dim;
    check_subsets(d, "hybrid family")?;
    let w = weyl_site(basis.h, basis.max_degree, order)?;
    let a = aw_site(basis.h, basis.max_degree, order)?;
    let sites: Vec<Vec<&SiteTable>> = (0..d).map(|_| vec![&w, &a]).collect();
    let g = f.evaluator();
    let c = contract(&sites, &|z: &[f64], zeta: &[f64]| g(z, zeta))?;
    let mut out = Vec::with_capacity(1 << d);
    for mask in 0usize..(1 << d) {
        let choice: Vec<usize> = (0..d).map(|j| if mask >> j & 1 == 1 { 0 } else { 1 }).collect();
        let t = c.find(&choice).ok_or_else(|| crate::GwError::Numerical("missing hybrid combination".into()))?;
        let m = tensor_to_matrix(basis, t, c.kdim)?;
        let sel: Vec<usize> = (0..d).filter(|j| mask >> j & 1 == 1).collect();
        out.push(OperatorMatrix::new(
            basis.clone(),
            m,
            MatrixMeta {
                symbol: f.name.clone(),
                method: "hybrid".into(),
                h: basis.h,
                order,
                notes: vec![format!("weyl coordinates {sel:?}")],
            },
        )?);
    }
    Ok(out)
}

/// `Σ_{I⊆Λ} Q^{hyb,E(I)}(T_{I,h} F)` with every `T_I F` quantized on its own, without the
/// telescoping shortcut used by [`ladder_run`].
pub fn ladder_sum_explicit(f: &SymbolDescriptor, lambda: &[usize], basis: &HermiteBasis, order: usize) -> Result<OperatorMatrix> {
    check_symbol(f, basis)?;
    check_subsets(lambda.len(), "ladder_sum_explicit")?;
    let n = basis.len();
    let mut acc = CMatrix::zeros(n, n);
    for mask in 0usize..(1 << lambda.len()) {
        let set: Vec<usize> = lambda.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &j)| j).collect();
        let t = op_t_i(f, &set, basis.h)?;
        let split = CoordinateSplit::new(basis.dim, set)?;
        acc += hybrid_matrix_with_order(&t, &split, basis, order)?.entries;
    }
    OperatorMatrix::new(
        basis.clone(),
        acc,
        MatrixMeta { symbol: f.name.clone(), method: "ladder-explicit".into(), h: basis.h, order, notes: vec![format!("lambda {lambda:?}")] },
    )
}

fn mask_of(set: &[usize]) -> usize {
    set.iter().fold(0, |m, &j| m | (1 << j))
}

/// Runs the truncation ladder: `Op_n = Σ_{I⊆Λ_n} Q^{hyb,E(I)}(T_I F)`, which telescopes to the
/// hybrid operator with Weyl tables on `Λ_n`.
///
/// Records `‖Op_n − Op_{n−1}‖` against `Σ_{I⊆Λ_n, I⊄Λ_{n−1}} M(81πhS_ε)^{|I|}Π ε_j²`, the
/// per-term norms `‖Q^{hyb,E(I)}(T_I F)‖ = ‖Σ_{J⊆I} (−1)^{|J|} H_{I∖J}‖` against the same
/// per-term bound, the tail `Σ_{j∉Λ_n} ε_j²` and the final bound.
pub fn ladder_run(f: &SymbolDescriptor, ladder: &IndexLadder, basis: &HermiteBasis, error_bar: bool) -> Result<ConvergenceReport> {
    let class = f.class.clone().ok_or_else(|| crate::GwError::Input(format!("ladder_run: symbol '{}' has no class data", f.name)))?;
    if class.m < 2 {
        return input("ladder_run: class data must have m >= 2");
    }
    if ladder.ambient_dim != basis.dim || f.dim != basis.dim {
        return input("ladder_run: ladder, symbol and basis dimensions differ");
    }
    let h = basis.h;
    let cvb = cv_bound(class.big_m, &class.eps, h)?;
    let order = site_order(basis.dim, basis.max_degree);
    let fam = hybrid_family(f, basis, order)?;
    let d = basis.dim;
    let big_m = class.big_m;
    let c: Vec<f64> = {
        let s = class.s_eps();
        class.eps.iter().map(|e| 81.0 * std::f64::consts::PI * h * s * e * e).collect()
    };
    let prod = |set: &[usize]| set.iter().map(|&j| 1.0 + c[j]).product::<f64>();

    let mut steps = Vec::with_capacity(ladder.subsets.len());
    let mut prev: Option<&Vec<usize>> = None;
    for (i, lam) in ladder.subsets.iter().enumerate() {
        let (diff_norm, diff_bound) = match prev {
            None => {
                // Op_1 − Op_0 with Op_0 the anti-Wick operator (Λ_0 = ∅).
                let dn = operator_norm(&fam[mask_of(lam)].sub(&fam[0])?)?;
                (dn, big_m * (prod(lam) - 1.0))
            }
            Some(p) => {
                let dn = operator_norm(&fam[mask_of(lam)].sub(&fam[mask_of(p)])?)?;
                (dn, big_m * (prod(lam) - prod(p)))
            }
        };
        let tail = (0..d).filter(|j| !lam.contains(j)).map(|j| class.eps[j] * class.eps[j]).fold(0.0, |s, v| s + v);
        steps.push(LadderStep { n: i + 1, lambda_size: lam.len(), diff_norm, diff_bound, tail });
        prev = Some(lam);
    }

    let n = basis.len();
    let mut terms = Vec::with_capacity(1 << d);
    for imask in 0usize..(1 << d) {
        let set: Vec<usize> = (0..d).filter(|j| imask >> j & 1 == 1).collect();
        let mut acc = CMatrix::zeros(n, n);
        // Σ_{J⊆I} (−1)^{|J|} H_{I∖J}, J enumerated as submasks of I.
        let mut jm = imask;
        loop {
            let sign = if jm.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            acc += &fam[imask & !jm].entries * C64::new(sign, 0.0);
            if jm == 0 {
                break;
            }
            jm = (jm - 1) & imask;
        }
        let norm = norm_estimate(&acc)?.value;
        terms.push(TermRecord { bound: term_bound(big_m, &class.eps, &set, h), set, norm });
    }

    let final_matrix = fam[(1 << d) - 1].clone();
    let final_norm = operator_norm(&final_matrix)?;
    let error_bar = if error_bar {
        let fine = HermiteBasis::new(basis.dim, h, basis.max_degree + 1)?;
        let w = weyl_matrix_with_order(f, &fine, order + 2)?;
        Some((operator_norm(&w)? - final_norm).abs())
    } else {
        None
    };
    Ok(ConvergenceReport {
        ambient_dim: d,
        h,
        max_degree: basis.max_degree,
        order,
        steps,
        terms,
        final_norm,
        cv_bound: cvb,
        error_bar,
        final_matrix,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol_library::constant;

    #[test]
    fn cv_bound_values() {
        assert_eq!(cv_bound(2.0, &[0.0, 0.0], 0.5).unwrap(), 2.0);
        let v = cv_bound(1.0, &[1.0], 1.0).unwrap();
        assert!((v - (1.0 + 81.0 * std::f64::consts::PI)).abs() < 1e-12);
        assert!((v - 255.469).abs() < 1e-3);
        assert_eq!(cv_bound(1.0, &[1.0], 1.5).unwrap_err().exit_code(), 2);
        assert_eq!(cv_bound(1.0, &[1.0], 0.0).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn ladder_validation() {
        assert!(IndexLadder::new(2, vec![vec![0], vec![0, 1]]).is_ok());
        assert!(IndexLadder::new(2, vec![vec![0], vec![0]]).is_err());
        assert!(IndexLadder::new(3, vec![vec![0], vec![0, 1]]).is_err());
        assert!(IndexLadder::new(2, vec![vec![1], vec![0, 1]]).is_ok());
    }

    #[test]
    fn unit_symbol_quantizes_to_identity() {
        let b = HermiteBasis::new(1, 0.5, 6).unwrap();
        let one = constant(1, C64::new(1.0, 0.0));
        let id = OperatorMatrix::identity(&b);
        assert!(weyl_matrix(&one, &b).unwrap().max_abs_diff(&id) < 1e-12);
        assert!(antiwick_matrix(&one, &b).unwrap().max_abs_diff(&id) < 1e-12);
        assert!(weyl_matrix_kernel(&one, &b, 30).unwrap().max_abs_diff(&id) < 1e-10);
    }

    #[test]
    fn undeclared_growth_is_input_error() {
        let b = HermiteBasis::new(1, 0.5, 2).unwrap();
        let f = SymbolDescriptor::from_fn("raw", 1, Growth::Undeclared, true, |x, _| C64::new(x[0], 0.0));
        let u = FunctionRep::constant(&b, C64::new(1.0, 0.0));
        assert_eq!(weyl_form(&f, &u, &u).unwrap_err().exit_code(), 2);
    }
}
