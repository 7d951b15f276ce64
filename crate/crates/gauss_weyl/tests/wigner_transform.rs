use gauss_weyl::gaussian_core::ProductRule;
use gauss_weyl::hermite_space::*;
use gauss_weyl::phase::PhasePoint;
use gauss_weyl::wigner::*;
use gauss_weyl::C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

fn pt(x: f64, xi: f64) -> PhasePoint {
    PhasePoint::new(vec![x], vec![xi]).unwrap()
}

fn random_rep(basis: &HermiteBasis, degree: usize, r: &mut impl Rng) -> FunctionRep {
    let coeffs = basis
        .multis()
        .iter()
        .map(|m| if m.iter().sum::<usize>() <= degree { C64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)) } else { C64::new(0.0, 0.0) })
        .collect();
    FunctionRep::new(basis.clone(), coeffs).unwrap()
}

#[test]
fn wigner_of_constants() {
    let basis = HermiteBasis::new(1, 0.5, 4).unwrap();
    let one = FunctionRep::constant(&basis, C64::new(1.0, 0.0));
    for z in [pt(0.0, 0.0), pt(0.6, -0.9), pt(-1.5, 1.2)] {
        assert!((wigner_gauss(&one, &one, &z).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-10);
        assert!((wigner_hermite(&one, &one, &z).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-12);
    }
    let b2 = HermiteBasis::new(1, 0.5, 2).unwrap();
    let one2 = FunctionRep::constant(&b2, C64::new(1.0, 0.0));
    assert!((wigner_via_bargmann(&one2, &one2, &pt(0.4, 0.3)).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-8);
}

#[test]
fn wigner_of_coherent_state_on_its_center() {
    let h = 0.5;
    let basis = HermiteBasis::new(1, h, 40).unwrap();
    let x = pt(0.4, 0.3);
    let c = coherent_state(&x, h, &basis).unwrap().rep;
    let want = (x.norm_sq() / h).exp();
    assert!((wigner_gauss(&c, &c, &x).unwrap() - C64::new(want, 0.0)).norm() < 1e-6);
    assert!((wigner_coherent(&x, &x, &x, h).unwrap() - C64::new(want, 0.0)).norm() < 1e-12);
}

#[test]
fn coherent_closed_form() {
    let z0 = PhasePoint::zero(1);
    assert_eq!(wigner_coherent(&z0, &z0, &z0, 1.0).unwrap(), C64::new(1.0, 0.0));
    let x = pt(0.6, 0.8);
    assert!((wigner_coherent(&x, &x, &x, 1.0).unwrap() - C64::new(1f64.exp(), 0.0)).norm() < 1e-12);
    let h = 0.5;
    let rule = ProductRule::gaussian(&[h / 4.0; 2], 60).unwrap();
    for (x, y) in [(pt(0.3, -0.2), pt(0.3, -0.2)), (pt(0.5, 0.1), pt(-0.2, 0.4))] {
        let n = rule.integrate(|z| wigner_coherent(&x, &y, &PhasePoint::from_flat(z), h).unwrap().norm_sqr()).sqrt();
        assert!((n - 1.0).abs() < 1e-5, "{n}");
    }
    let basis = HermiteBasis::new(1, h, 40).unwrap();
    let (x, y) = (pt(0.2, 0.5), pt(-0.3, 0.1));
    let cx = coherent_state(&x, h, &basis).unwrap().rep;
    let cy = coherent_state(&y, h, &basis).unwrap().rep;
    let z = pt(0.1, -0.3);
    assert!((wigner_hermite(&cx, &cy, &z).unwrap() - wigner_coherent(&x, &y, &z, h).unwrap()).norm() < 1e-8);
}

#[test]
fn quadrature_matches_bargmann_representation() {
    let basis = HermiteBasis::new(1, 0.5, 3).unwrap();
    let mut r = rng(1);
    for _ in 0..3 {
        let f = random_rep(&basis, 3, &mut r);
        let g = random_rep(&basis, 3, &mut r);
        let z = pt(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
        let a = wigner_gauss(&f, &g, &z).unwrap();
        let b = wigner_via_bargmann(&f, &g, &z).unwrap();
        assert!((a - b).norm() < 1e-5 * a.norm().max(1.0), "{a} vs {b}");
        assert!((a - wigner_hermite(&f, &g, &z).unwrap()).norm() < 1e-8 * a.norm().max(1.0));
    }
    let f = random_rep(&basis, 3, &mut r);
    let g = random_rep(&basis, 3, &mut r);
    let z = pt(0.2, 0.2);
    let v = wigner_via_bargmann(&f, &g, &z).unwrap();
    let v2 = wigner_via_bargmann(&f.scale(C64::new(2.0, 0.0)), &g, &z).unwrap();
    assert!((v2 - v * 2.0).norm() < 1e-12 * v.norm().max(1.0));
}

#[test]
fn lebesgue_relation() {
    let h = 0.5;
    let basis = HermiteBasis::new(1, h, 3).unwrap();
    let one = FunctionRep::constant(&basis, C64::new(1.0, 0.0));
    let (l, r) = wigner_leb_relation_check(&one, &one, &PhasePoint::zero(1)).unwrap();
    assert!((l - C64::new(1.0, 0.0)).norm() < 1e-10 && (r - C64::new(1.0, 0.0)).norm() < 1e-8);
    let mut g = rng(2);
    let f1 = random_rep(&basis, 3, &mut g);
    let f2 = random_rep(&basis, 3, &mut g);
    for _ in 0..20 {
        let z = pt(g.random_range(-1.0..1.0), g.random_range(-1.0..1.0));
        let (l, r) = wigner_leb_relation_check(&f1, &f2, &z).unwrap();
        assert!((l - r).norm() < 1e-5 * l.norm().max(1.0), "{l} vs {r}");
    }
    let cb = HermiteBasis::new(1, h, 30).unwrap();
    let x = pt(0.3, -0.4);
    let c = coherent_state(&x, h, &cb).unwrap().rep;
    let z = pt(-0.1, 0.2);
    let (l, r) = wigner_leb_relation_check(&c, &c, &z).unwrap();
    let closed = wigner_coherent(&x, &x, &z, h).unwrap();
    assert!((l - closed).norm() < 1e-5 && (r - closed).norm() < 1e-5);
}

#[test]
fn pointwise_and_norm_bounds() {
    let h = 0.5;
    for dim in 1..=2 {
        let basis = HermiteBasis::new(dim, h, 4).unwrap();
        let mut g = rng(3 + dim as u64);
        for _ in 0..3 {
            let f = random_rep(&basis, 4, &mut g);
            let k = random_rep(&basis, 4, &mut g);
            let scale = f.norm() * k.norm();
            for _ in 0..10 {
                let z = PhasePoint::new((0..dim).map(|_| g.random_range(-1.5..1.5)).collect(), (0..dim).map(|_| g.random_range(-1.5..1.5)).collect()).unwrap();
                let v = wigner_hermite(&f, &k, &z).unwrap();
                assert!(v.norm() <= (z.norm_sq() / h).exp() * scale);
            }
            // The Gaussian L² norm is in fact equal to ‖f‖‖g‖ (Moyal identity).
            let n2 = wigner_lp_norm(&f, &k, 2, h / 4.0, 16).unwrap();
            assert!(n2 <= scale * (1.0 + 1e-6), "{n2} vs {scale}");
            assert!(n2 >= scale * (1.0 - 1e-6), "{n2} vs {scale}");
        }
    }
}

#[test]
fn l1_norm_is_stable() {
    let h = 0.5;
    let basis = HermiteBasis::new(1, h, 4).unwrap();
    let mut g = rng(7);
    let f = random_rep(&basis, 4, &mut g);
    let k = random_rep(&basis, 4, &mut g);
    let a = wigner_lp_norm(&f, &k, 1, h / 2.0, 40).unwrap();
    let b = wigner_lp_norm(&f, &k, 1, h / 2.0, 80).unwrap();
    assert!(a.is_finite() && ((a - b) / b).abs() < 1e-2);
}

#[test]
fn grid_evaluation_and_export() {
    let h = 0.5;
    let basis = HermiteBasis::new(1, h, 3).unwrap();
    let mut g = rng(8);
    let f = random_rep(&basis, 3, &mut g);
    let points: Vec<PhasePoint> = (0..5).map(|k| pt(0.2 * k as f64, -0.1 * k as f64)).collect();
    let a = WignerGrid::evaluate(&f, &f, points.clone(), false).unwrap();
    let b = WignerGrid::evaluate(&f, &f, points, true).unwrap();
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((x - y).norm() < 1e-8 * x.norm().max(1.0));
    }
    let csv = a.to_csv();
    assert!(csv.starts_with("z0,zeta0,re,im\n"));
    assert_eq!(csv.lines().count(), 6);
    assert_eq!(b.provenance, "quadrature");
}

#[test]
fn large_momenta_are_flagged() {
    let basis = HermiteBasis::new(1, 0.5, 2).unwrap();
    let one = FunctionRep::constant(&basis, C64::new(1.0, 0.0));
    let v = wigner_gauss_flagged(&one, &one, &pt(0.0, 4.0)).unwrap();
    assert!(v.low_confidence);
    let w = wigner_gauss_flagged(&one, &one, &pt(0.0, 0.5)).unwrap();
    assert!(!w.low_confidence);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sesquilinear(seed in 0u64..1000, re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let basis = HermiteBasis::new(1, 0.5, 3).unwrap();
        let mut g = rng(seed);
        let f = random_rep(&basis, 3, &mut g);
        let k = random_rep(&basis, 3, &mut g);
        let z = pt(g.random_range(-1.0..1.0), g.random_range(-1.0..1.0));
        let a = C64::new(re, im);
        let lhs = wigner_gauss(&f, &k.scale(a), &z).unwrap();
        let rhs = a.conj() * wigner_gauss(&f, &k, &z).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-13 * lhs.norm().max(1.0));
    }

    #[test]
    fn pointwise_bound_holds(seed in 0u64..1000) {
        let basis = HermiteBasis::new(1, 0.5, 5).unwrap();
        let mut g = rng(seed);
        let f = random_rep(&basis, 5, &mut g);
        let k = random_rep(&basis, 5, &mut g);
        let z = pt(g.random_range(-2.0..2.0), g.random_range(-2.0..2.0));
        let v = wigner_hermite(&f, &k, &z).unwrap();
        prop_assert!(v.norm() <= (z.norm_sq() / 0.5).exp() * f.norm() * k.norm());
    }
}
