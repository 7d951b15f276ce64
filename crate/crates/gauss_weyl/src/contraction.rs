//! Site-factorized quadrature for operator matrices.
//!
//! Every quantization handled here has a matrix element of the form
//! `A_{lk} = ∫ G(Z) Π_j P^{(j)}_{k_j l_j}(z_j, ζ_j) dν(Z)` with a product measure `ν`. A
//! [`SiteTable`] stores, for one coordinate pair `(z_j, ζ_j)`, the quadrature nodes and the
//! weighted kernel values `w_i P_{kl}(node_i)`. A site may carry several tables (for instance
//! Weyl and anti-Wick); [`contract`] returns the tensors for every choice of one table per site
//! while evaluating `G` only once per node tuple.

use rayon::prelude::*;

use crate::error::{input, Result};
use crate::gaussian_core::Axis;
use crate::hermite_space::HermiteBasis;
use crate::limits::check_nodes;
use crate::linalg::CMatrix;
use crate::mutation::kernel_sign_flip;
use crate::phase::C64;

/// Quadrature nodes of one site together with weighted kernel values.
#[derive(Debug, Clone)]
pub struct SiteTable {
    pub label: String,
    pub z: Vec<f64>,
    pub zeta: Vec<f64>,
    /// Node-major: `vals[i * p + (k * kdim + l)]`, `k` the input degree, `l` the output degree.
    pub vals: Vec<C64>,
    pub kdim: usize,
}

impl SiteTable {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn p(&self) -> usize {
        self.kdim * self.kdim
    }

    /// `Σ_i vals[i, (k,l)]`, the table applied to `G ≡ 1`.
    pub fn moments(&self) -> Vec<C64> {
        let p = self.p();
        let mut out = vec![C64::new(0.0, 0.0); p];
        for i in 0..self.len() {
            for (o, v) in out.iter_mut().zip(&self.vals[i * p..(i + 1) * p]) {
                *o += v;
            }
        }
        out
    }

    /// Builds a table from a node grid and a kernel callback filling one node's `p` values.
    pub fn from_grid(
        label: impl Into<String>,
        zs: &Axis,
        zetas: &Axis,
        kdim: usize,
        mut kernel: impl FnMut(f64, f64, &mut [C64]),
    ) -> Self {
        let p = kdim * kdim;
        let n = zs.len() * zetas.len();
        let mut z = Vec::with_capacity(n);
        let mut zeta = Vec::with_capacity(n);
        let mut vals = vec![C64::new(0.0, 0.0); n * p];
        let mut i = 0;
        for (a, wa) in zs.nodes.iter().zip(&zs.weights) {
            for (b, wb) in zetas.nodes.iter().zip(&zetas.weights) {
                z.push(*a);
                zeta.push(*b);
                let slot = &mut vals[i * p..(i + 1) * p];
                kernel(*a, *b, slot);
                let w = wa * wb;
                for v in slot.iter_mut() {
                    *v *= w;
                }
                i += 1;
            }
        }
        Self { label: label.into(), z, zeta, vals, kdim }
    }
}

/// Normalized complex Hermite polynomials `H_{k,l}(w, w̄)/√(k! l!)` for `k, l < kdim`,
/// written into `out[k * kdim + l]`.
///
/// Uses `N_{0,l} = w̄^l/√(l!)` and `N_{k+1,l} = (w N_{k,l} − √l N_{k,l−1})/√(k+1)`.
pub fn complex_hermite(w: C64, kdim: usize, out: &mut [C64]) {
    let wb = w.conj();
    let mut t = C64::new(1.0, 0.0);
    for l in 0..kdim {
        if l > 0 {
            t = t * wb / (l as f64).sqrt();
        }
        out[l] = t;
    }
    for k in 0..kdim.saturating_sub(1) {
        let sk = ((k + 1) as f64).sqrt();
        for l in 0..kdim {
            let prev = if l > 0 { out[k * kdim + l - 1] * (l as f64).sqrt() } else { C64::new(0.0, 0.0) };
            out[(k + 1) * kdim + l] = (w * out[k * kdim + l] - prev) / sk;
        }
    }
}

/// Weyl site: nodes of `μ_{ℝ²,h/2}`, kernel `Ĥ(e_k, e_l)(z, ζ)` with `w = (z − iζ)/σ`.
pub fn weyl_site(h: f64, max_degree: usize, order: usize) -> Result<SiteTable> {
    let ax = Axis::gaussian(h / 2.0, order)?;
    let sigma = (h / 2.0).sqrt();
    let kdim = max_degree + 1;
    let flip = kernel_sign_flip();
    Ok(SiteTable::from_grid("weyl", &ax, &ax, kdim, |z, zeta, out| {
        let w = if flip { C64::new(z, zeta) } else { C64::new(z, -zeta) } / sigma;
        complex_hermite(w, kdim, out);
    }))
}

/// Anti-Wick site: nodes of `μ_{ℝ²,h}`, kernel `T̂e_k · conj(T̂e_l) = v^k v̄^l/√(k! l!)`.
pub fn aw_site(h: f64, max_degree: usize, order: usize) -> Result<SiteTable> {
    let ax = Axis::gaussian(h, order)?;
    let s = (2.0 * h).sqrt();
    let kdim = max_degree + 1;
    Ok(SiteTable::from_grid("antiwick", &ax, &ax, kdim, |z, zeta, out| {
        let v = C64::new(z, -zeta) / s;
        let mut pw = vec![C64::new(1.0, 0.0); kdim];
        for k in 1..kdim {
            pw[k] = pw[k - 1] * v / (k as f64).sqrt();
        }
        for k in 0..kdim {
            for l in 0..kdim {
                out[k * kdim + l] = pw[k] * pw[l].conj();
            }
        }
    }))
}

/// Result of [`contract`]: one tensor per combination of site tables.
#[derive(Debug, Clone)]
pub struct Contraction {
    /// `combos[c][j]` is the table index chosen at site `j`.
    pub combos: Vec<Vec<usize>>,
    /// Tensor over `(p_0, …, p_{D−1})`, site 0 most significant.
    pub tensors: Vec<Vec<C64>>,
    pub kdim: usize,
    pub evaluations: f64,
}

impl Contraction {
    pub fn find(&self, choice: &[usize]) -> Option<&[C64]> {
        self.combos.iter().position(|c| c == choice).map(|i| self.tensors[i].as_slice())
    }
}

struct SiteNodes<'a> {
    tables: Vec<&'a SiteTable>,
    offsets: Vec<usize>,
    z: Vec<f64>,
    zeta: Vec<f64>,
}

impl<'a> SiteNodes<'a> {
    fn new(tables: Vec<&'a SiteTable>) -> Self {
        let mut offsets = Vec::with_capacity(tables.len());
        let mut z = Vec::new();
        let mut zeta = Vec::new();
        for t in &tables {
            offsets.push(z.len());
            z.extend_from_slice(&t.z);
            zeta.extend_from_slice(&t.zeta);
        }
        Self { tables, offsets, z, zeta }
    }

    fn len(&self) -> usize {
        self.z.len()
    }

    fn locate(&self, i: usize) -> (usize, usize) {
        let o = self.offsets.iter().rposition(|&off| off <= i).unwrap_or(0);
        (o, i - self.offsets[o])
    }
}

/// Largest accumulator footprint (bytes) for which site-0 nodes are split into partial sums.
const SPLIT_BYTES: usize = 64 << 20;
const MAX_SPLIT: usize = 8;

/// Contracts `G` against every combination of per-site tables.
///
/// `G(x, ξ)` is evaluated once per node tuple of the concatenated site grids. Partial sums
/// are formed over a fixed split of site-0 nodes and added in order, so results do not depend
/// on the number of worker threads.
pub fn contract<G>(sites: &[Vec<&SiteTable>], g: &G) -> Result<Contraction>
where
    G: Fn(&[f64], &[f64]) -> C64 + Sync,
{
    let d = sites.len();
    if d == 0 {
        return input("contract: no sites");
    }
    if sites.iter().any(|s| s.is_empty()) {
        return input("contract: a site has no tables");
    }
    let kdim = sites[0][0].kdim;
    if sites.iter().flatten().any(|t| t.kdim != kdim) {
        return input("contract: tables disagree on the degree cap");
    }
    let p = kdim * kdim;
    let nodes: Vec<SiteNodes> = sites.iter().map(|s| SiteNodes::new(s.clone())).collect();
    let evaluations: f64 = nodes.iter().map(|n| n.len() as f64).product();
    check_nodes(evaluations, "kernel contraction")?;

    let ncombo: usize = nodes.iter().map(|n| n.tables.len()).product();
    let suffix_combos: usize = nodes[1..].iter().map(|n| n.tables.len()).product();
    let tsize = p.pow(d as u32);
    let rsize = p.pow(d as u32 - 1);
    let n0 = nodes[0].len();
    let acc_bytes = ncombo * tsize * std::mem::size_of::<C64>();
    let split = (SPLIT_BYTES / acc_bytes.max(1)).clamp(1, MAX_SPLIT).min(n0);
    let bounds: Vec<(usize, usize)> = (0..split).map(|c| (c * n0 / split, (c + 1) * n0 / split)).collect();

    let partials: Vec<Vec<Vec<C64>>> = bounds
        .par_iter()
        .map(|&(lo, hi)| {
            let mut acc = vec![vec![C64::new(0.0, 0.0); tsize]; ncombo];
            for i0 in lo..hi {
                let slab = evaluate_slab(&nodes, i0, g);
                let entries = contract_suffix(&nodes, slab, p);
                let (o0, loc) = nodes[0].locate(i0);
                let tab = &nodes[0].tables[o0].vals[loc * p..(loc + 1) * p];
                for (s, t) in entries.iter().enumerate() {
                    let a = &mut acc[o0 * suffix_combos + s];
                    for (p0, c) in tab.iter().enumerate() {
                        if *c == C64::new(0.0, 0.0) {
                            continue;
                        }
                        let dst = &mut a[p0 * rsize..(p0 + 1) * rsize];
                        for (x, y) in dst.iter_mut().zip(t) {
                            *x += c * y;
                        }
                    }
                }
            }
            acc
        })
        .collect();

    let mut tensors = vec![vec![C64::new(0.0, 0.0); tsize]; ncombo];
    for part in partials {
        for (t, q) in tensors.iter_mut().zip(part) {
            for (x, y) in t.iter_mut().zip(q) {
                *x += y;
            }
        }
    }
    let radices: Vec<usize> = nodes.iter().map(|n| n.tables.len()).collect();
    let combos = (0..ncombo)
        .map(|mut c| {
            let mut v = vec![0usize; d];
            for j in (0..d).rev() {
                v[j] = c % radices[j];
                c /= radices[j];
            }
            v
        })
        .collect();
    Ok(Contraction { combos, tensors, kdim, evaluations })
}

/// `G` on all node tuples with site 0 fixed at `i0`, last site fastest.
fn evaluate_slab<G>(nodes: &[SiteNodes], i0: usize, g: &G) -> Vec<C64>
where
    G: Fn(&[f64], &[f64]) -> C64 + Sync,
{
    let d = nodes.len();
    let size: usize = nodes[1..].iter().map(|n| n.len()).product();
    let mut out = Vec::with_capacity(size);
    let mut x = vec![0.0; d];
    let mut xi = vec![0.0; d];
    x[0] = nodes[0].z[i0];
    xi[0] = nodes[0].zeta[i0];
    let mut idx = vec![0usize; d];
    for j in 1..d {
        x[j] = nodes[j].z[0];
        xi[j] = nodes[j].zeta[0];
    }
    loop {
        out.push(g(&x, &xi));
        let mut k = d;
        loop {
            if k == 1 {
                return out;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < nodes[k].len() {
                x[k] = nodes[k].z[idx[k]];
                xi[k] = nodes[k].zeta[idx[k]];
                break;
            }
            idx[k] = 0;
            x[k] = nodes[k].z[0];
            xi[k] = nodes[k].zeta[0];
        }
    }
}

/// Contracts sites `D−1, …, 1` of a slab; returns one tensor of size `p^{D−1}` per suffix combo.
fn contract_suffix(nodes: &[SiteNodes], slab: Vec<C64>, p: usize) -> Vec<Vec<C64>> {
    let d = nodes.len();
    let mut entries = vec![slab];
    let mut rsize = 1usize;
    for j in (1..d).rev() {
        let nj = nodes[j].len();
        let outer: usize = nodes[1..j].iter().map(|n| n.len()).product();
        let mut next = Vec::with_capacity(entries.len() * nodes[j].tables.len());
        for (o, tab) in nodes[j].tables.iter().enumerate() {
            let off = nodes[j].offsets[o];
            for t in &entries {
                let mut out = vec![C64::new(0.0, 0.0); outer * p * rsize];
                for op in 0..outer {
                    for il in 0..tab.len() {
                        let row = &t[(op * nj + off + il) * rsize..(op * nj + off + il + 1) * rsize];
                        let coef = &tab.vals[il * p..(il + 1) * p];
                        for (pp, c) in coef.iter().enumerate() {
                            let dst = &mut out[(op * p + pp) * rsize..(op * p + pp + 1) * rsize];
                            for (x, y) in dst.iter_mut().zip(row) {
                                *x += c * y;
                            }
                        }
                    }
                }
                next.push(out);
            }
        }
        entries = next;
        rsize *= p;
    }
    entries
}

/// Reads a contraction tensor as a matrix in the graded basis: entry `(l, k)`.
pub fn tensor_to_matrix(basis: &HermiteBasis, tensor: &[C64], kdim: usize) -> Result<CMatrix> {
    if basis.max_degree + 1 != kdim {
        return input("tensor_to_matrix: basis degree does not match the tables");
    }
    let n = basis.len();
    let p = kdim * kdim;
    if tensor.len() != p.pow(basis.dim as u32) {
        return input("tensor_to_matrix: tensor size does not match the basis");
    }
    let multis = basis.multis();
    Ok(CMatrix::from_fn(n, n, |r, c| {
        let (l, k) = (&multis[r], &multis[c]);
        let idx = k.iter().zip(l).fold(0usize, |acc, (&kj, &lj)| acc * p + kj * kdim + lj);
        tensor[idx]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_hermite_low_orders() {
        let w = C64::new(0.3, -1.2);
        let mut out = vec![C64::new(0.0, 0.0); 9];
        complex_hermite(w, 3, &mut out);
        let wb = w.conj();
        // H_{1,1} = w w̄ − 1, H_{2,1} = w² w̄ − 2w, H_{2,2} = w²w̄² − 4ww̄ + 2.
        assert!((out[0 * 3 + 1] - wb).norm() < 1e-14);
        assert!((out[1 * 3 + 0] - w).norm() < 1e-14);
        assert!((out[1 * 3 + 1] - (w * wb - 1.0)).norm() < 1e-14);
        assert!((out[2 * 3 + 1] - (w * w * wb - 2.0 * w) / 2f64.sqrt()).norm() < 1e-13);
        let h22 = w * w * wb * wb - 4.0 * w * wb + 2.0;
        assert!((out[2 * 3 + 2] - h22 / 2.0).norm() < 1e-13);
    }

    #[test]
    fn unit_symbol_gives_identity_tensor() {
        let h = 0.5;
        let w = weyl_site(h, 3, 12).unwrap();
        let a = aw_site(h, 3, 12).unwrap();
        let c = contract(&[vec![&w, &a], vec![&w, &a]], &|_: &[f64], _: &[f64]| C64::new(1.0, 0.0)).unwrap();
        let basis = HermiteBasis::new(2, h, 3).unwrap();
        for t in &c.tensors {
            let m = tensor_to_matrix(&basis, t, 4).unwrap();
            let id = CMatrix::identity(basis.len(), basis.len());
            assert!((m - id).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-12);
        }
    }

    #[test]
    fn split_count_does_not_change_result() {
        let h = 0.5;
        let w = weyl_site(h, 2, 6).unwrap();
        let g = |x: &[f64], xi: &[f64]| C64::new(0.0, x[0] - 0.3 * xi[1] + x[1] * xi[0]).exp();
        let c1 = contract(&[vec![&w], vec![&w]], &g).unwrap();
        let c2 = contract(&[vec![&w], vec![&w]], &g).unwrap();
        assert_eq!(c1.tensors, c2.tensors);
    }
}
