use hypercube::cube::{character, fwht_forward, fwht_inverse, p_norm, CubeFunction};
use hypercube::noise::{
    apply_kernel, apply_spectral, correlation_expectation, monte_carlo_correlation, rng_from_seed,
    sample_correlated_pair, NoiseParam,
};
use proptest::prelude::*;
use rand::Rng;

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn random_function(seed: u64, n: usize) -> CubeFunction {
    let mut rng = rng_from_seed(seed);
    CubeFunction::from_fn(n, |_| rng.gen_range(-1.0..1.0)).unwrap()
}

#[test]
fn characters_are_orthonormal_in_integers() {
    for n in 0..=5 {
        let size = 1usize << n;
        for x in 0..size {
            for y in 0..size {
                let inner: i64 = (0..size).map(|z| (character(x, z) * character(y, z)) as i64).sum();
                assert_eq!(inner, if x == y { size as i64 } else { 0 }, "n={n} x={x} y={y}");
            }
        }
    }
}

#[test]
fn transform_matches_direct_sums() {
    let f = random_function(3, 5);
    let spec = fwht_forward(&f);
    for x in 0..32 {
        let direct: f64 = (0..32).map(|y| f.get(y) * character(x, y) as f64).sum::<f64>() / 32.0;
        assert!((spec.coeff(x) - direct).abs() < 1e-14);
    }
}

#[test]
fn noise_preserves_mean_and_fixes_constants() {
    let f = random_function(11, 6);
    let p = NoiseParam::new(5, 2).unwrap();
    let t = apply_spectral(&f, p);
    assert!((t.mean() - f.mean()).abs() < 1e-14);
    let c = CubeFunction::constant(4, 2.5).unwrap();
    assert!(max_abs_diff(apply_kernel(&c, p).values(), c.values()) < 1e-14);
}

#[test]
fn noise_semigroup() {
    // T_{1/3} T_{1/5} = T_{1/15}
    let f = random_function(5, 7);
    let a = NoiseParam::from_eps_ratio(1, 3).unwrap();
    let b = NoiseParam::from_eps_ratio(1, 5).unwrap();
    let ab = NoiseParam::from_eps_ratio(1, 15).unwrap();
    let two_step = apply_kernel(&apply_kernel(&f, a), b);
    let one_step = apply_kernel(&f, ab);
    assert!(max_abs_diff(two_step.values(), one_step.values()) < 1e-13);
}

#[test]
fn kernel_matches_brute_force_average() {
    let n = 4;
    let f = random_function(8, n);
    let p = NoiseParam::new(3, 1).unwrap();
    let out = apply_kernel(&f, p);
    let (r, s) = (p.r() as f64, p.s() as f64);
    for x in 0..16usize {
        let avg: f64 = (0..16usize)
            .map(|y| {
                let d = (x ^ y).count_ones() as i32;
                r.powi(n as i32 - d) * s.powi(d) * f.get(y)
            })
            .sum::<f64>()
            / (r + s).powi(n as i32);
        assert!((out.get(x) - avg).abs() < 1e-14);
    }
}

#[test]
fn correlation_is_symmetric() {
    let f = random_function(1, 5);
    let g = random_function(2, 5);
    let p = NoiseParam::new(7, 3).unwrap();
    assert_eq!(
        correlation_expectation(&f, &g, p).unwrap(),
        correlation_expectation(&g, &f, p).unwrap()
    );
}

#[test]
fn monte_carlo_agrees_with_exact() {
    let n = 6;
    let mut rng = rng_from_seed(99);
    let f = CubeFunction::from_fn(n, |_| rng.gen_range(0.0..1.0)).unwrap();
    let g = CubeFunction::from_fn(n, |_| rng.gen_range(0.0..1.0)).unwrap();
    for (r, s) in [(2, 1), (3, 2), (9, 1)] {
        let p = NoiseParam::new(r, s).unwrap();
        let exact = correlation_expectation(&f, &g, p).unwrap();
        let (mean, se) = monte_carlo_correlation(&mut rng, &f, &g, p, 200_000).unwrap();
        assert!((mean - exact).abs() < 4.0 * se, "r={r} s={s}: {mean} vs {exact} (se {se})");
    }
}

#[test]
fn sampler_flip_rate_and_marginals() {
    let n = 8;
    let p = NoiseParam::new(3, 1).unwrap();
    let mut rng = rng_from_seed(17);
    let draws = 50_000;
    let mut flips = 0u64;
    let mut ones = vec![0u64; n];
    for _ in 0..draws {
        let (x, y) = sample_correlated_pair(&mut rng, p, n);
        flips += (x ^ y).count_ones() as u64;
        for (i, c) in ones.iter_mut().enumerate() {
            *c += ((y >> i) & 1) as u64;
        }
    }
    let trials = (draws * n) as f64;
    let rate = flips as f64 / trials;
    let q = p.flip_prob();
    assert!((rate - q).abs() < 3.0 * (q * (1.0 - q) / trials).sqrt(), "{rate} vs {q}");
    for c in ones {
        let freq = c as f64 / draws as f64;
        assert!((freq - 0.5).abs() < 3.0 * (0.25 / draws as f64).sqrt() + 1e-3);
    }
}

#[test]
fn indicator_examples() {
    // f = 1{X_1 = 0}, eps = 1/3
    let f = CubeFunction::from_fn(1, |x| if x & 1 == 0 { 1.0 } else { 0.0 }).unwrap();
    let p = NoiseParam::from_eps_ratio(1, 3).unwrap();
    assert!((correlation_expectation(&f, &f, p).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    let t = apply_spectral(&f, p);
    assert!((t.get(0) - 2.0 / 3.0).abs() < 1e-15);
    assert!((t.get(1) - 1.0 / 3.0).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn roundtrip_and_parseval(n in 0usize..=8, seed in any::<u64>()) {
        let f = random_function(seed, n);
        let spec = fwht_forward(&f);
        let back = fwht_inverse(&spec);
        prop_assert!(max_abs_diff(back.values(), f.values()) < 1e-12);
        let l2 = p_norm(&f, 2.0).unwrap();
        prop_assert!((spec.energy() - l2 * l2).abs() < 1e-12);
    }

    #[test]
    fn operator_forms_agree(n in 1usize..=10, seed in any::<u64>(), k in 1u64..=9) {
        let f = random_function(seed, n);
        let p = NoiseParam::from_eps_ratio(k, 10).unwrap();
        let a = apply_spectral(&f, p);
        let b = apply_kernel(&f, p);
        let scale = a.values().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        prop_assert!(max_abs_diff(a.values(), b.values()) / scale < 1e-10);
    }

    #[test]
    fn norms_are_monotone_in_p(n in 0usize..=6, seed in any::<u64>(), p in 1.0f64..4.0, dp in 0.0f64..3.0) {
        let f = random_function(seed, n);
        prop_assert!(p_norm(&f, p).unwrap() <= p_norm(&f, p + dp).unwrap() * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn noise_is_a_contraction_in_l2(n in 0usize..=7, seed in any::<u64>(), r in 1u64..10, s_frac in 0.0f64..1.0) {
        let s = (s_frac * r as f64) as u64;
        let p = NoiseParam::new(r, s).unwrap();
        let f = random_function(seed, n);
        let t = apply_spectral(&f, p);
        prop_assert!(p_norm(&t, 2.0).unwrap() <= p_norm(&f, 2.0).unwrap() + 1e-12);
    }
}
