use gauss_weyl::heat_semigroup::*;
use gauss_weyl::phase::PhasePoint;
use gauss_weyl::symbol_library::*;
use gauss_weyl::C64;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

fn point(r: &mut impl Rng, d: usize, s: f64) -> PhasePoint {
    PhasePoint::new((0..d).map(|_| r.random_range(-s..s)).collect(), (0..d).map(|_| r.random_range(-s..s)).collect()).unwrap()
}

/// A bounded smooth symbol with no closed heat action.
fn bump(d: usize) -> SymbolDescriptor {
    SymbolDescriptor::from_fn("bump", d, Growth::Bounded { sup: 1.0 }, true, move |x, xi| {
        let r: f64 = x.iter().chain(xi).enumerate().map(|(k, v)| (v - 0.1 * k as f64).powi(2)).sum();
        C64::new(1.0 / (1.0 + r), 0.0)
    })
}

/// `F_{a,b}` as a generic callable, so every heat action goes through quadrature.
fn generic_exponential(a: Vec<f64>, b: Vec<f64>) -> SymbolDescriptor {
    let d = a.len();
    SymbolDescriptor::from_fn("F_ab generic", d, Growth::Bounded { sup: 1.0 }, false, move |x, xi| {
        let ph: f64 = a.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() + b.iter().zip(xi).map(|(p, q)| p * q).sum::<f64>();
        C64::from_polar(1.0, ph)
    })
}

fn chain(sites: usize, g0: f64) -> LatticeSymbolParams {
    LatticeSymbolParams::chain((0..sites).map(|j| g0 * 0.5f64.powi(j as i32)).collect(), Potential::cos(), 1.0)
}

#[test]
fn full_heat_closed_forms() {
    let z = PhasePoint::new(vec![0.3, -0.7], vec![1.1, 0.2]).unwrap();
    let c = constant(2, C64::new(0.5, -1.0));
    assert_eq!(heat_full(&c, 0.3, &z).unwrap(), C64::new(0.5, -1.0));
    // Complex linear exponent: ∫ e^{ℓ(Z+Y)} dμ_t(Y) = e^{t a²/2} e^{ℓ(Z)} with the bilinear square.
    let (al, be) = ([C64::new(0.4, 0.3), C64::new(-0.2, 0.5)], [C64::new(0.1, -0.6), C64::new(0.0, 0.2)]);
    let f = SymbolDescriptor::from_fn("exp ell", 2, Growth::Undeclared, false, move |x, xi| {
        (al[0] * x[0] + al[1] * x[1] + be[0] * xi[0] + be[1] * xi[1]).exp()
    });
    let t = 0.35;
    let sq: C64 = al.iter().chain(&be).map(|v| v * v).sum();
    let want = (sq * (t / 2.0)).exp() * f.eval_point(&z);
    assert!((heat_full_quadrature(&f, t, &z, 32).unwrap() - want).norm() < 1e-10);
    let h = 0.5;
    let (a, b) = (vec![1.2, -0.4], vec![0.3, 0.9]);
    let e = make_exponential(a.clone(), b.clone()).unwrap();
    let fac = (-(h / 4.0) * (a.iter().chain(&b).map(|v| v * v).sum::<f64>())).exp();
    assert!((heat_full(&e, h / 2.0, &z).unwrap() - e.eval_point(&z) * fac).norm() < 1e-14);
    assert!((heat_full_quadrature(&e, h / 2.0, &z, 32).unwrap() - e.eval_point(&z) * fac).norm() < 1e-12);
    assert!(heat_full(&e, 0.0, &z).is_err());
}

#[test]
fn heat_eigen_actions_match_quadrature() {
    let mut r = rng(1);
    let tmat = DMatrix::from_row_slice(4, 4, &[1.0, 0.2, 0.0, 0.1, 0.2, 0.8, 0.0, 0.0, 0.0, 0.0, 0.5, 0.1, 0.1, 0.0, 0.1, 0.6]);
    let symbols = vec![
        make_exponential(vec![0.7, -1.3], vec![0.2, 0.5]).unwrap(),
        random_trig(2, 3, 1.5, 4).unwrap(),
        make_quadratic(tmat.clone(), 0.4).unwrap(),
        quadratic_form(tmat).unwrap(),
        linear(vec![0.3, -0.5], vec![1.0, 0.2]).unwrap(),
    ];
    for f in &symbols {
        assert!(f.has_closed_heat(), "{}", f.name);
        for _ in 0..20 {
            let z = point(&mut r, 2, 1.0);
            let t = r.random_range(0.1..0.6);
            let a = heat_full(f, t, &z).unwrap();
            let b = heat_full_quadrature(f, t, &z, 32).unwrap();
            assert!((a - b).norm() < 1e-6 * a.norm().max(1.0), "{}: {a} vs {b}", f.name);
        }
    }
}

#[test]
fn partial_heat_basics() {
    let f = random_trig(2, 2, 1.0, 7).unwrap();
    let z = PhasePoint::new(vec![0.1, 0.4], vec![-0.3, 0.8]).unwrap();
    let all = CoordinateSplit::all(2);
    assert!((heat_partial(&f, &all, true, 0.3, &z).unwrap() - heat_full(&f, 0.3, &z).unwrap()).norm() < 1e-14);
    // Independent of coordinate 1: smoothing over it changes nothing.
    let g = make_exponential(vec![0.8, 0.0], vec![-0.5, 0.0]).unwrap();
    let s = CoordinateSplit::new(2, vec![0]).unwrap();
    assert!((heat_partial(&g, &s, false, 0.4, &z).unwrap() - g.eval_point(&z)).norm() < 1e-14);
    assert!((heat_partial_quadrature(&g, &s, false, 0.4, &z, None).unwrap() - g.eval_point(&z)).norm() < 1e-13);
    assert!(CoordinateSplit::new(2, vec![2]).is_err());
}

#[test]
fn partial_heats_compose() {
    let f = bump(2);
    let z = PhasePoint::new(vec![0.2, -0.1], vec![0.3, 0.5]).unwrap();
    let t = 0.25;
    let i = CoordinateSplit::new(2, vec![0]).unwrap();
    let s = CoordinateSplit::new(2, vec![1]).unwrap();
    // Smooth over I inside a derived symbol, then over S outside; compare with I ∪ S at once.
    let inner = heat_combination(&f, vec![(1.0, i.variances(t, true))], "H_I bump").unwrap();
    let two_step = heat_partial_quadrature(&inner, &s, true, t, &z, Some(32)).unwrap();
    let one_step = heat_partial_quadrature(&f, &CoordinateSplit::all(2), true, t, &z, Some(32)).unwrap();
    assert!((two_step - one_step).norm() < 1e-7, "{two_step} vs {one_step}");
}

#[test]
fn semigroup_law() {
    let f = bump(1);
    let z = PhasePoint::new(vec![0.3], vec![-0.2]).unwrap();
    let (t, s) = (0.2, 0.3);
    let inner = heat_combination(&f, vec![(1.0, vec![s, s])], "H_s bump").unwrap();
    let comp = heat_full_quadrature(&inner, t, &z, 48).unwrap();
    let direct = heat_full_quadrature(&f, t + s, &z, 48).unwrap();
    assert!((comp - direct).norm() < 1e-7);
    let e = make_exponential(vec![1.1], vec![0.4]).unwrap();
    let inner = heat_combination(&e, vec![(1.0, vec![s, s])], "H_s F").unwrap();
    assert!((heat_full(&inner, t, &z).unwrap() - heat_full(&e, t + s, &z).unwrap()).norm() < 1e-14);
}

#[test]
fn adjoint_operator() {
    let split = CoordinateSplit::new(2, vec![0]).unwrap();
    let z = PhasePoint::new(vec![0.4, -0.3], vec![0.2, 0.7]).unwrap();
    let c = |_x: &[f64], _xi: &[f64]| C64::new(2.5, 0.0);
    assert!((heat_adjoint_m(&c, &split, 0.3, 0.5, 0.4, &z, 16).unwrap() - C64::new(2.5, 0.0)).norm() < 1e-13);
    // G = e^{α x_1 + β ξ_1} on the complement: shrink the point, then the Gaussian factor.
    let (al, be) = (C64::new(0.5, 0.2), C64::new(-0.3, 0.6));
    let g = move |x: &[f64], xi: &[f64]| (al * x[1] + be * xi[1]).exp();
    let (t, h1, h2) = (0.3, 0.5, 0.4);
    let s = h2 / (t + h2);
    let var = t * h2 / (t + h2);
    let want = (al * (s * z.x[1]) + be * (s * z.xi[1]) + (al * al + be * be) * (var / 2.0)).exp();
    assert!((heat_adjoint_m(&g, &split, t, h1, h2, &z, 32).unwrap() - want).norm() < 1e-7);
}

#[test]
fn duality_identity() {
    let split = CoordinateSplit::new(2, vec![0]).unwrap();
    for seed in 0..3 {
        let f = random_trig(2, 2, 1.0, seed).unwrap();
        let g = random_trig(2, 2, 1.0, seed + 10).unwrap();
        let (l, r) = duality_check(&f, &g, &split, 0.3, 0.5, 0.4, 16).unwrap();
        assert!((l - r).norm() < 1e-5, "{l} vs {r}");
    }
}

#[test]
fn heat_contracts_weighted_norms() {
    let split = CoordinateSplit::new(2, vec![0]).unwrap();
    let (t, h1, h2) = (0.3, 0.5, 0.4);
    for seed in 0..3 {
        let f = random_trig(2, 3, 1.2, seed).unwrap();
        let fh = f.clone();
        let spl = split.clone();
        let smoothed = move |x: &[f64], xi: &[f64]| {
            let z = PhasePoint::new(x.to_vec(), xi.to_vec()).unwrap();
            heat_partial(&fh, &spl, false, t, &z).unwrap()
        };
        let fe = f.evaluator();
        let raw = move |x: &[f64], xi: &[f64]| fe(x, xi);
        for p in [1.0, 2.0] {
            let lhs = lp_norm_nu(&smoothed, &split, h1, h2, p, 16).unwrap();
            let rhs = lp_norm_nu(&raw, &split, h1, h2 + t, p, 16).unwrap();
            assert!(lhs <= rhs * (1.0 + 1e-6), "p={p}: {lhs} {rhs}");
        }
    }
}

#[test]
fn t_operator() {
    let h = 0.5;
    let z = PhasePoint::new(vec![0.3, -0.2, 0.5], vec![0.1, 0.6, -0.4]).unwrap();
    let (a, b) = (vec![0.9, -1.4, 0.6], vec![0.3, 0.8, -1.1]);
    let e = make_exponential(a.clone(), b.clone()).unwrap();
    let t0 = op_t_i(&e, &[], h).unwrap();
    assert!((t0.eval_point(&z) - e.eval_point(&z)).norm() < 1e-15);
    let t1 = op_t_i(&e, &[1], h).unwrap();
    let s = CoordinateSplit::new(3, vec![1]).unwrap();
    let two = e.eval_point(&z) - heat_partial(&e, &s, true, h / 2.0, &z).unwrap();
    assert!((t1.eval_point(&z) - two).norm() < 1e-15);
    let generic = generic_exponential(a.clone(), b.clone());
    for set in [vec![0], vec![0, 2], vec![0, 1, 2]] {
        let closed = e.eval_point(&z) * t_i_exponential_factor(&a, &b, &set, h);
        let ex = op_t_i(&e, &set, h).unwrap().eval_point(&z);
        let quad = op_t_i(&generic, &set, h).unwrap().eval_point(&z);
        assert!((ex - closed).norm() < 1e-14);
        assert!((quad - closed).norm() < 1e-6, "{set:?}: {quad} vs {closed}");
    }
}

#[test]
fn t_operator_respects_subset_cap() {
    let e = make_exponential(vec![0.1; 13], vec![0.0; 13]).unwrap();
    let set: Vec<usize> = (0..13).collect();
    assert_eq!(op_t_i(&e, &set, 0.5).unwrap_err().exit_code(), 4);
    assert!(op_t_i(&e, &[0, 0], 0.5).is_err());
}

#[test]
fn decomposition_on_closed_forms() {
    let h = 0.5;
    let mut r = rng(2);
    let tmat = DMatrix::from_row_slice(6, 6, &[
        0.9, 0.1, 0.0, 0.0, 0.1, 0.0, 0.1, 0.7, 0.1, 0.0, 0.0, 0.0, 0.0, 0.1, 0.8, 0.0, 0.0, 0.1, 0.0, 0.0, 0.0, 0.6, 0.1, 0.0, 0.1, 0.0,
        0.0, 0.1, 0.5, 0.0, 0.0, 0.0, 0.1, 0.0, 0.0, 0.7,
    ]);
    let symbols = vec![
        make_exponential(vec![0.9, -1.4, 0.6], vec![0.3, 0.8, -1.1]).unwrap(),
        random_trig(3, 3, 1.5, 5).unwrap(),
        make_quadratic(tmat, 0.5).unwrap(),
    ];
    for f in &symbols {
        for lam in [vec![1], vec![0, 2], vec![0, 1, 2]] {
            let z = point(&mut r, 3, 1.0);
            let (l, rr) = decomposition_check(f, &lam, h, &z).unwrap();
            assert!((l - rr).norm() < 1e-8, "{} {lam:?}: {l} vs {rr}", f.name);
        }
    }
}

#[test]
fn decomposition_on_lattice_symbol() {
    let f = make_lattice(chain(3, 0.6), 2).unwrap();
    let z = PhasePoint::new(vec![0.2, -0.4, 0.1], vec![0.3, 0.0, -0.5]).unwrap();
    let (l, r) = decomposition_check(&f, &[0, 1], 0.5, &z).unwrap();
    assert!((l - r).norm() < 1e-5, "{l} vs {r}");
}

#[test]
fn smoothing_bound_on_lattice() {
    let h: f64 = 0.5;
    let f = make_lattice(chain(3, 0.6), 2).unwrap();
    let class = f.class.clone().unwrap();
    let pts = sample_ball(3, SAMPLE_RADIUS_SQRT_H * h.sqrt(), 40);
    for set in [vec![0], vec![1], vec![0, 1], vec![1, 2]] {
        let t = op_t_i(&f, &set, h).unwrap();
        let n = norm_nim(&t, &set, 2, h, &pts).unwrap();
        let bound = smoothing_bound(&class, &set, h);
        assert!(n.is_finite() && n <= bound, "{set:?}: {n} vs {bound}");
    }
}

#[test]
fn projection_commutes_with_heat() {
    let f = random_trig(3, 3, 1.0, 8).unwrap();
    let z = PhasePoint::new(vec![0.4, -0.2, 0.7], vec![0.1, 0.3, -0.6]).unwrap();
    let (l, r) = projection_commutation(&f, &[0], &[0, 1], 0.3, &z).unwrap();
    assert!((l - r).norm() < 1e-14);
    let (l, r) = projection_commutation(&f, &[0, 2], &[0, 1, 2], 0.3, &z).unwrap();
    assert!((l - r).norm() < 1e-14);
    assert!(projection_commutation(&f, &[2], &[0, 1], 0.3, &z).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn decomposition_prop(seed in 0u64..10_000, pick in 0usize..3) {
        let mut r = rng(seed);
        let a: Vec<f64> = (0..3).map(|_| r.random_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..3).map(|_| r.random_range(-2.0..2.0)).collect();
        let f = make_exponential(a, b).unwrap();
        let lam = [vec![0], vec![0, 1], vec![0, 1, 2]][pick].clone();
        let z = point(&mut r, 3, 1.5);
        let (l, rr) = decomposition_check(&f, &lam, 0.5, &z).unwrap();
        prop_assert!((l - rr).norm() < 1e-8);
    }

    #[test]
    fn heat_of_exponential_is_a_contraction(seed in 0u64..10_000, t in 0.01f64..2.0) {
        let mut r = rng(seed);
        let f = make_exponential(vec![r.random_range(-3.0..3.0)], vec![r.random_range(-3.0..3.0)]).unwrap();
        let z = point(&mut r, 1, 2.0);
        prop_assert!(heat_full(&f, t, &z).unwrap().norm() <= 1.0 + 1e-15);
    }
}
