use gauss_weyl::hermite_space::{coherent_state, FunctionRep, HermiteBasis};
use gauss_weyl::linalg::{norm_estimate, CMatrix, OperatorMatrix};
use gauss_weyl::phase::PhasePoint;
use gauss_weyl::quantizer::*;
use gauss_weyl::symbol_library::*;
use gauss_weyl::C64;
use rand::{Rng, SeedableRng};

fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

/// `⟨U_{a,b,h}Ψ_X, Ψ_Y⟩` in closed form.
fn u_coherent_closed(a: f64, b: f64, x: (f64, f64), y: (f64, f64), h: f64) -> C64 {
    let (x0, xi) = x;
    let (y0, eta) = y;
    let re = -((x0 - y0 - h * b).powi(2) + (xi - eta + h * a).powi(2)) / (4.0 * h);
    let im = (y0 * xi - x0 * eta + h * a * (x0 + y0) + h * b * (xi + eta)) / (2.0 * h);
    C64::new(re, im).exp()
}

#[test]
fn weyl_of_exponential_matches_u_operator() {
    let basis = HermiteBasis::new(1, 0.5, 16).unwrap();
    let mut r = rng(11);
    for _ in 0..3 {
        let a = r.random_range(-2.0..2.0);
        let b = r.random_range(-2.0..2.0);
        let f = make_exponential(vec![a], vec![b]).unwrap();
        let w = weyl_matrix(&f, &basis).unwrap();
        let u = oracle_u(&[a], &[b], &basis).unwrap();
        let rel = operator_norm(&w.sub(&u).unwrap()).unwrap() / operator_norm(&u).unwrap();
        assert!(rel < 1e-4, "a={a} b={b}: {rel:e}");
    }
}

#[test]
fn u_operator_coherent_elements() {
    let h = 0.5;
    let basis = HermiteBasis::new(1, h, 40).unwrap();
    let (a, b) = (0.7, -0.4);
    let u = oracle_u(&[a], &[b], &basis).unwrap();
    for &(x, y) in &[((0.2, 0.1), (0.0, 0.3)), ((-0.3, 0.4), (0.5, -0.2))] {
        let px = coherent_state(&PhasePoint::new(vec![x.0], vec![x.1]).unwrap(), h, &basis).unwrap();
        let py = coherent_state(&PhasePoint::new(vec![y.0], vec![y.1]).unwrap(), h, &basis).unwrap();
        let got = u.form(&px.rep, &py.rep).unwrap();
        let want = u_coherent_closed(a, b, x, y, h);
        assert!((got - want).norm() < 1e-5, "{got} vs {want}");
    }
}

#[test]
fn u_operator_is_unitary_on_low_block() {
    let basis = HermiteBasis::new(1, 0.5, 40).unwrap();
    let u = oracle_u(&[0.8], &[-0.6], &basis).unwrap();
    let p = &u.entries.adjoint() * &u.entries;
    for i in 0..10 {
        for j in 0..10 {
            let t = if i == j { 1.0 } else { 0.0 };
            assert!((p[(i, j)] - C64::new(t, 0.0)).norm() < 1e-5);
        }
    }
}

#[test]
fn classical_kernel_reproduces_identity() {
    let basis = HermiteBasis::new(1, 0.5, 8).unwrap();
    let table = classical_site(0.5, 8).unwrap();
    assert!(identity_residual(&table) < 1e-6, "{}", identity_residual(&table));
    let one = constant(1, C64::new(1.0, 0.0));
    let m = weyl_matrix_classical(&one, &basis).unwrap();
    assert!(m.max_abs_diff(&OperatorMatrix::identity(&basis)) < 1e-6);
}

#[test]
fn classical_kernel_matches_weyl_on_trig_symbols() {
    let basis = HermiteBasis::new(1, 0.5, 8).unwrap();
    for seed in 0..2 {
        let f = random_trig(1, 2, 1.5, seed).unwrap();
        let a = weyl_matrix(&f, &basis).unwrap();
        let b = weyl_matrix_classical(&f, &basis).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-4, "seed {seed}: {:e}", a.max_abs_diff(&b));
    }
}

#[test]
fn linear_symbol_matches_field_operator() {
    let h = 0.5;
    let n = 8;
    let basis = HermiteBasis::new(1, h, n).unwrap();
    let (a, b) = (0.7, -1.1);
    let f = linear(vec![a], vec![b]).unwrap();
    let sigma = (h / 2.0).sqrt();
    // ℓ_{a+ib} u e_k = (a+ib)σ(√(k+1) e_{k+1} + √k e_{k−1}); (h/i) b ∂ e_k = −i h b (√k/σ) e_{k−1}.
    let mut want = CMatrix::zeros(n + 1, n + 1);
    for k in 0..=n {
        if k < n {
            want[(k + 1, k)] += C64::new(a, b) * sigma * ((k + 1) as f64).sqrt();
        }
        if k > 0 {
            want[(k - 1, k)] += C64::new(a, b) * sigma * (k as f64).sqrt() - C64::new(0.0, h * b * (k as f64).sqrt() / sigma);
        }
    }
    for m in [weyl_matrix(&f, &basis).unwrap(), weyl_matrix_classical(&f, &basis).unwrap()] {
        let d = (&m.entries - &want).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(d < 1e-5, "{}: {d:e}", m.meta.method);
    }
}

#[test]
fn kernel_path_agrees_with_wigner_path() {
    let basis = HermiteBasis::new(1, 0.5, 6).unwrap();
    let f = random_trig(1, 3, 1.0, 5).unwrap();
    let a = weyl_matrix(&f, &basis).unwrap();
    let b = weyl_matrix_kernel(&f, &basis, 40).unwrap();
    assert!(a.max_abs_diff(&b) < 1e-5, "{:e}", a.max_abs_diff(&b));
}

#[test]
fn antiwick_is_smoothed_weyl() {
    let basis = HermiteBasis::new(1, 0.5, 8).unwrap();
    let f = make_exponential(vec![0.9], vec![-0.5]).unwrap();
    let d = antiwick_equals_smoothed_weyl_check(&f, &basis).unwrap();
    assert!(d < 1e-5, "{d:e}");
    let g = random_trig(1, 2, 1.5, 9).unwrap();
    let d = antiwick_equals_smoothed_weyl_check(&g, &basis).unwrap();
    assert!(d < 1e-4, "{d:e}");
}

#[test]
fn wick_symbol_of_weyl_operator() {
    let h = 0.5;
    let basis = HermiteBasis::new(1, h, 24).unwrap();
    let f = random_trig(1, 2, 1.0, 3).unwrap();
    let w = weyl_matrix(&f, &basis).unwrap();
    let x = PhasePoint::new(vec![0.3], vec![-0.4]).unwrap();
    let v = wick_symbol(&w, &x).unwrap();
    let want = gauss_weyl::heat_semigroup::heat_full(&f, h / 2.0, &x).unwrap();
    assert!((v.value - want).norm() < 1e-4, "{} vs {}", v.value, want);
    assert!(!v.low_confidence);
}

#[test]
fn norm_estimate_small_hermitian() {
    let mut r = rng(2);
    let n = 6;
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let z = C64::new(r.random_range(-1.0..1.0), if i == j { 0.0 } else { r.random_range(-1.0..1.0) });
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let want = eig.eigenvalues.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let got = norm_estimate(&m).unwrap().value;
    assert!((got - want).abs() <= 1e-6 * want);
    let _ = FunctionRep::zero(&HermiteBasis::new(1, 0.5, 1).unwrap());
}
