//! Mutation fixtures for negative-control runs. Process-global; only the acceptance
//! harness and `verify` toggle them, and only while no other computation is running.

use std::sync::atomic::{AtomicBool, Ordering};

static KERNEL_SIGN_FLIP: AtomicBool = AtomicBool::new(false);

/// When set, the Weyl kernel uses the wrong sign in its momentum coupling.
pub fn set_kernel_sign_flip(on: bool) {
    KERNEL_SIGN_FLIP.store(on, Ordering::SeqCst);
}

pub fn kernel_sign_flip() -> bool {
    KERNEL_SIGN_FLIP.load(Ordering::Relaxed)
}
