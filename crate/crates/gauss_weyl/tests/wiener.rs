use gauss_weyl::mc_wiener::*;
use proptest::prelude::*;

const ERF_1P2_OVER_SQRT0P6: f64 = 0.971_540_263_083_689_4;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn brownian_variances() {
    let (k, h, n) = (16, 0.5, 20_000);
    let paths = sample_brownian(k, h, n, 11).unwrap();
    assert_eq!(paths.len(), n);
    assert_eq!(paths[0].times.len(), k + 1);
    let nf = n as f64;
    let end: Vec<f64> = paths.iter().map(|p| p.endpoint()).collect();
    let mean = end.iter().sum::<f64>() / nf;
    let var = end.iter().map(|v| v * v).sum::<f64>() / nf;
    assert!(mean.abs() < 4.0 * (h / nf).sqrt());
    assert!((var - h).abs() < 4.0 * h * (2.0 / nf).sqrt(), "{var}");
    // Cell increments have variance h/K and are uncorrelated.
    let inc: Vec<Vec<f64>> = paths.iter().map(|p| p.increments()).collect();
    let v0 = inc.iter().map(|d| d[0] * d[0]).sum::<f64>() / nf;
    let c01 = inc.iter().map(|d| d[0] * d[5]).sum::<f64>() / nf;
    let q = h / k as f64;
    assert!((v0 - q).abs() < 4.0 * q * (2.0 / nf).sqrt());
    assert!(c01.abs() < 4.0 * q / nf.sqrt());
}

#[test]
fn ito_sums_and_cameron_martin() {
    let (k, h, n) = (8, 0.5, 40_000);
    let paths = sample_brownian(k, h, n, 5).unwrap();
    let up: Vec<f64> = (0..k).map(|i| (i as f64 * 0.7).cos()).collect();
    let cm = cameron_martin_norm_sq(&up);
    let want_cm = up.iter().map(|u| u * u).sum::<f64>() / k as f64;
    assert!((cm - want_cm).abs() < 1e-15);
    let nf = n as f64;
    let sums: Vec<f64> = paths.iter().map(|p| p.ito_sum(&up).unwrap()).collect();
    let var = sums.iter().map(|v| v * v).sum::<f64>() / nf;
    assert!((var - h * cm).abs() < 4.0 * h * cm * (2.0 / nf).sqrt(), "{var} vs {}", h * cm);
    // E exp(I(u)/h − |u|²_CM/(2h)) = 1.
    let w: Vec<f64> = sums.iter().map(|s| (s / h - cm / (2.0 * h)).exp()).collect();
    let m = w.iter().sum::<f64>() / nf;
    let sd = (w.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (nf - 1.0)).sqrt();
    assert!((m - 1.0).abs() < 4.0 * sd / nf.sqrt(), "{m}");
    assert!(paths[0].ito_sum(&up[1..]).is_err());
    assert!(sample_brownian(0, h, 1, 0).is_err());
    assert!(sample_brownian(4, -1.0, 1, 0).is_err());
}

#[test]
fn ensemble_export() {
    let paths = sample_brownian(4, 0.5, 3, 2).unwrap();
    let csv = ensemble_csv(&paths, "version=x\nseed=2");
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "# version=x");
    assert_eq!(lines[1], "# seed=2");
    assert_eq!(lines[2], "# K=4 h=0.5");
    assert_eq!(lines[3].split(',').count(), 5);
    assert_eq!(lines.len(), 7);
    let parsed: Vec<f64> = lines[4].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(parsed, paths[0].values);
}

#[test]
fn lattice_probabilities_match_exact() {
    let b = [1.0, 2.0, 4.0];
    let (eps, h) = (1.0, 0.5);
    let est = lattice_norm_probability(&b, eps, h, &[1, 2, 3], 100_000, 17).unwrap();
    for e in &est {
        assert!((e.mc - e.exact).abs() <= 3.0 * e.stderr, "{e:?}");
    }
    for w in est.windows(2) {
        assert!(w[1].mc <= w[0].mc && w[1].exact <= w[0].exact);
    }
    // Single factor against erf(1.2/√0.6), frozen from a 30-digit evaluation.
    let one = lattice_exact(&[1.5], 0.8, 0.3);
    assert!((one - ERF_1P2_OVER_SQRT0P6).abs() < 1e-14, "{one}");
    assert!(lattice_norm_probability(&[1.0, -1.0], eps, h, &[2], 10, 0).is_err());
    assert!(lattice_norm_probability(&b, eps, h, &[2, 1], 10, 0).is_err());
    assert!(lattice_norm_probability(&b, eps, h, &[4], 10, 0).is_err());
}

#[test]
fn power_weight_limits() {
    let (eps, h) = (1.0, 0.5);
    for d in 1..=2 {
        for gamma in [0.5, 1.0, 2.0] {
            let lim = power_weights_limit(gamma, eps, h, d).unwrap();
            assert!(lim > 0.0 && lim < 1.0, "d={d} gamma={gamma}: {lim}");
        }
        assert!(power_weights_limit(2.0, eps, h, d).unwrap() > power_weights_limit(1.0, eps, h, d).unwrap());
    }
    // The limit lies below every finite truncation and close to a long one.
    let weights: Vec<f64> = (-200i64..=200).map(|j| (1.0 + j.abs() as f64).powf(1.0)).collect();
    let finite = lattice_exact(&weights, eps, h);
    let lim = power_weights_limit(1.0, eps, h, 1).unwrap();
    assert!(lim <= finite && (finite - lim) / finite < 1e-10, "{lim} vs {finite}");
    assert!(power_weights_limit(0.0, eps, h, 1).is_err());
    assert!(power_weights_limit(1.0, eps, h, 4).is_err());
}

#[test]
fn gaussian_integrals() {
    let h = 0.5;
    let a = [0.4, -0.7, 0.2];
    let (m, se) = mc_integral(&|x: &[f64]| dot(&a, x).exp(), 3, h, 100_000, 3).unwrap();
    let want = (h * dot(&a, &a) / 2.0).exp();
    assert!((m - want).abs() < 4.0 * se, "{m} ± {se} vs {want}");
    let u = [[1.0, 0.0, 0.5], [0.3, 1.0, 0.0], [0.0, -0.4, 1.0], [0.6, 0.6, 0.6]];
    let (m, se) = mc_integral(&|x: &[f64]| u.iter().map(|v| dot(v, x)).product(), 3, h, 200_000, 8).unwrap();
    let want = h * h * (dot(&u[0], &u[1]) * dot(&u[2], &u[3]) + dot(&u[0], &u[2]) * dot(&u[1], &u[3]) + dot(&u[0], &u[3]) * dot(&u[1], &u[2]));
    assert!((m - want).abs() < 4.0 * se, "{m} ± {se} vs {want}");
    assert!(mc_integral(&|_| 1.0, 1, h, 1, 0).is_err());
    let tail = gaussian_tail(1.0, 0.0);
    assert!((tail - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sampling_is_deterministic(seed in 0u64..10_000, k in 1usize..10) {
        let a = sample_brownian(k, 0.3, 5, seed).unwrap();
        let b = sample_brownian(k, 0.3, 5, seed).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn lattice_exact_is_a_probability(b in prop::collection::vec(0.1f64..5.0, 1..6), eps in 0.01f64..3.0, h in 0.05f64..1.0) {
        let p = lattice_exact(&b, eps, h);
        prop_assert!((0.0..=1.0).contains(&p));
        let q = lattice_exact(&b[..b.len() - 1], eps, h);
        prop_assert!(p <= q + 1e-15);
    }
}
