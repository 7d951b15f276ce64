//! Resource caps. Read once from `GW_MAX_NODES` and `GW_MAX_SUBSETS`, overridable per process.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{resource, Result};

pub const DEFAULT_MAX_NODES: usize = 400_000_000;
pub const DEFAULT_MAX_SUBSET_EXPONENT: usize = 12;
/// Largest one-dimensional Gauss-Hermite order; beyond it the orthonormal recurrence overflows.
pub const MAX_GH_ORDER: usize = 400;

static MAX_NODES: AtomicUsize = AtomicUsize::new(0);
static MAX_SUBSETS: AtomicUsize = AtomicUsize::new(0);

fn env_or(name: &str, default: usize) -> usize {
    std::env::var(name)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&v| v > 0)
        .unwrap_or(default)
}

/// Quadrature node budget (total tensor nodes touched by one integral or matrix assembly).
pub fn max_nodes() -> usize {
    let v = MAX_NODES.load(Ordering::Relaxed);
    if v != 0 {
        return v;
    }
    let v = env_or("GW_MAX_NODES", DEFAULT_MAX_NODES);
    MAX_NODES.store(v, Ordering::Relaxed);
    v
}

/// Largest |I| for which 2^{|I|} inclusion-exclusion terms are expanded.
pub fn max_subset_exponent() -> usize {
    let v = MAX_SUBSETS.load(Ordering::Relaxed);
    if v != 0 {
        return v;
    }
    // GW_MAX_SUBSETS counts terms, so 4096 means |I| <= 12.
    let terms = env_or("GW_MAX_SUBSETS", 1 << DEFAULT_MAX_SUBSET_EXPONENT);
    let v = (usize::BITS - 1 - terms.leading_zeros()) as usize;
    let v = v.max(1);
    MAX_SUBSETS.store(v, Ordering::Relaxed);
    v
}

pub fn set_max_nodes(n: usize) {
    MAX_NODES.store(n.max(1), Ordering::Relaxed);
}

pub fn set_max_subset_exponent(k: usize) {
    MAX_SUBSETS.store(k.max(1), Ordering::Relaxed);
}

pub fn check_nodes(count: f64, what: &str) -> Result<()> {
    let cap = max_nodes();
    if !(count <= cap as f64) {
        return resource(format!("{what}: {count:.3e} quadrature nodes exceed budget {cap} (GW_MAX_NODES)"));
    }
    Ok(())
}

pub fn check_subsets(size: usize, what: &str) -> Result<()> {
    let cap = max_subset_exponent();
    if size > cap {
        return resource(format!(
            "{what}: |I| = {size} needs 2^{size} terms, cap is 2^{cap} (GW_MAX_SUBSETS)"
        ));
    }
    Ok(())
}
