use hypercube::checks::{
    check_eq1, check_eq2_eq3, check_eq77, check_eq88, check_general_lognorm, distance_histogram, sweep,
    weighted_pair_count, SweepConfig, SweepMode, SweepTarget,
};
use hypercube::cube::CubeFunction;
use hypercube::noise::{rng_from_seed, NoiseParam};
use hypercube::report::Tolerances;
use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use proptest::prelude::*;
use rand::Rng;

fn tol() -> Tolerances {
    Tolerances::default()
}

fn param(r: u64, s: u64) -> NoiseParam {
    NoiseParam::new(r, s).unwrap()
}

/// `sum_{x in A, y in B} r^{n - |x^y|} s^{|x^y|}`, pair by pair.
fn brute_weight(n: usize, p: NoiseParam, a: &CubeFunction, b: &CubeFunction) -> BigUint {
    let mut total = BigUint::zero();
    for x in a.support() {
        for y in b.support() {
            let d = (x ^ y).count_ones();
            total += BigUint::from(p.r()).pow(n as u32 - d) * BigUint::from(p.s()).pow(d);
        }
    }
    total
}

#[test]
fn weighted_count_matches_pairwise_sum_and_expectation() {
    let mut rng = rng_from_seed(4);
    for _ in 0..40 {
        let n = rng.gen_range(1..=5);
        let r = rng.gen_range(1..=6);
        let p = param(r, rng.gen_range(0..=r));
        let a = hypercube::checks::random_nonempty_set(&mut rng, n);
        let b = hypercube::checks::random_nonempty_set(&mut rng, n);
        let w = weighted_pair_count(n, p, &distance_histogram(n, &a.support(), &b.support()));
        assert_eq!(w, brute_weight(n, p, &a, &b));
        // E[1_A(X) 1_B(Y)] = W / (2^n (r+s)^n)
        let den = (BigUint::from(2u32) * BigUint::from(p.r() + p.s())).pow(n as u32);
        let exact = BigRational::new(w.into(), den.into()).to_f64().unwrap();
        let report = check_eq1(&a, &b, p, &tol()).unwrap();
        assert!((report.lhs - exact).abs() < 1e-14, "{} vs {exact}", report.lhs);
    }
}

#[test]
fn eq1_examples() {
    let full = CubeFunction::constant(3, 1.0).unwrap();
    let r = check_eq1(&full, &full, param(2, 1), &tol()).unwrap();
    assert!(r.pass && r.margin.abs() < 1e-12);

    let zero = CubeFunction::indicator(1, [0]).unwrap();
    let r = check_eq1(&zero, &zero, param(2, 1), &tol()).unwrap();
    assert!((r.lhs - 1.0 / 3.0).abs() < 1e-15);
    assert!((r.rhs - 0.25f64.powf(0.75)).abs() < 1e-15);
    assert!((r.rhs - 0.353_553_390_593_273_8).abs() < 1e-12);
    assert!(r.pass);

    // eps -> 0: independence, lhs = mu(A) mu(B) = rhs
    let a = CubeFunction::indicator(3, [0, 3, 5]).unwrap();
    let b = CubeFunction::indicator(3, [1, 3]).unwrap();
    let r = check_eq1(&a, &b, param(1, 1), &tol()).unwrap();
    assert!((r.lhs - 3.0 / 32.0).abs() < 1e-15 && (r.rhs - 3.0 / 32.0).abs() < 1e-15);

    let empty = CubeFunction::constant(2, 0.0).unwrap();
    assert!(check_eq1(&empty, &full.clone(), param(2, 1), &tol()).is_err());
}

#[test]
fn eps_one_is_equality_on_equal_sets() {
    // Y = X: lhs = mu(A), rhs = (mu(A)^2)^{1/2}; distinct sets give mu(A and B) <= sqrt(mu(A) mu(B))
    let mut rng = rng_from_seed(21);
    for _ in 0..50 {
        let n = rng.gen_range(1..=5);
        let a = hypercube::checks::random_nonempty_set(&mut rng, n);
        let r = check_eq1(&a, &a, param(3, 0), &tol()).unwrap();
        let mu = a.mean();
        assert!((r.lhs - mu).abs() < 1e-15);
        assert!((r.rhs - mu).abs() < 1e-15);
        assert!(r.pass && r.margin.abs() < 1e-14);

        let b = hypercube::checks::random_nonempty_set(&mut rng, n);
        let r = check_eq1(&a, &b, param(3, 0), &tol()).unwrap();
        let both = (0..a.len()).filter(|&x| a.get(x) == 1.0 && b.get(x) == 1.0).count() as f64 / a.len() as f64;
        assert!((r.lhs - both).abs() < 1e-15);
        assert!(r.pass);
    }
}

#[test]
fn eq77_examples() {
    let one = CubeFunction::constant(3, 1.0).unwrap();
    let r = check_eq77(&one, &one, param(3, 1), &tol()).unwrap();
    assert!((r.lhs - 1.0).abs() < 1e-15 && (r.rhs - 1.0).abs() < 1e-15);

    let f = CubeFunction::indicator(1, [0]).unwrap();
    let r = check_eq77(&f, &f, NoiseParam::from_eps_ratio(1, 3).unwrap(), &tol()).unwrap();
    assert!((r.lhs - 1.0 / 3.0).abs() < 1e-15);
    assert!((r.rhs - 2f64.powf(-1.5)).abs() < 1e-15);

    let g = CubeFunction::from_fn(2, |x| x as f64 - 1.0).unwrap();
    assert!(check_eq77(&f, &one, param(2, 1), &tol()).is_err());
    assert!(check_eq77(&g, &g, param(2, 1), &tol()).is_err());
}

#[test]
fn eq88_examples() {
    let c = CubeFunction::constant(5, 0.7).unwrap();
    let r = check_eq88(&c, param(4, 1), &tol()).unwrap();
    assert!((r.lhs - 0.7).abs() < 1e-14 && (r.rhs - 0.7).abs() < 1e-14);
    let mut rng = rng_from_seed(77);
    for _ in 0..50 {
        let n = rng.gen_range(0..=8);
        let f = hypercube::checks::random_nonnegative(&mut rng, n);
        let p = NoiseParam::from_eps_ratio(rng.gen_range(1..=9), 10).unwrap();
        assert!(check_eq88(&f, p, &tol()).unwrap().pass);
    }
}

#[test]
fn eq2_eq3_examples() {
    let full = CubeFunction::constant(1, 1.0).unwrap();
    let r = check_eq2_eq3(&full, &full, param(2, 1), &tol()).unwrap();
    assert!((r.lhs - 6f64.log2()).abs() < 1e-12);
    assert!((r.rhs - (3f64.log2() - 0.5 + 1.5)).abs() < 1e-12);
    assert!(r.margin.abs() < 1e-12 && r.pass);

    // s = 0: lhs = log2(r^n |A and B|), rhs = n log2 r + (log2|A| + log2|B|)/2
    let a = CubeFunction::indicator(3, [0, 1, 2, 6]).unwrap();
    let b = CubeFunction::indicator(3, [1, 2, 7]).unwrap();
    let r = check_eq2_eq3(&a, &b, param(3, 0), &tol()).unwrap();
    assert!((r.lhs - (27.0f64 * 2.0).log2()).abs() < 1e-12);
    assert!((r.rhs - (3.0 * 3f64.log2() + 0.5 * (2.0 + 3f64.log2()))).abs() < 1e-12);
    assert!(r.pass);
}

#[test]
fn lognorm_examples() {
    let ones = CubeFunction::constant(2, 1.0).unwrap();
    let p = param(3, 1);
    let l = check_general_lognorm(&ones, &ones, p, &tol()).unwrap();
    let e = check_eq2_eq3(&ones, &ones, p, &tol()).unwrap();
    assert_eq!((l.lhs, l.rhs), (e.lhs, e.rhs));

    let f = CubeFunction::from_fn(3, |x| if x == 5 { 7.0 } else { 0.0 }).unwrap();
    let r = check_general_lognorm(&f, &f, p, &tol()).unwrap();
    assert!((r.lhs - (27.0f64 * 49.0).log2()).abs() < 1e-12);
    assert!(r.pass);

    let bad = CubeFunction::new(1, vec![0.5, 1.0]).unwrap();
    assert!(check_general_lognorm(&bad, &ones.clone(), p, &tol()).is_err());
    let zero = CubeFunction::constant(2, 0.0).unwrap();
    assert!(check_general_lognorm(&zero, &ones, p, &tol()).is_err());
}

#[test]
fn sweep_examples() {
    let cfg = SweepConfig {
        target: SweepTarget::Eq1,
        mode: SweepMode::Exhaustive,
        n: 2,
        param: param(2, 1),
        count: 0,
        seed: 0,
    };
    let reports = sweep(&cfg, &tol()).unwrap();
    assert_eq!(reports.len(), 225);
    assert!(reports.iter().all(|r| r.pass));

    let random = SweepConfig { target: SweepTarget::Eq77, mode: SweepMode::Random, n: 6, count: 10_000, seed: 1, ..cfg };
    let reports = sweep(&random, &tol()).unwrap();
    assert_eq!(reports.len(), 10_000);
    assert!(reports.iter().all(|r| r.pass));

    let empty = SweepConfig { count: 0, ..random };
    assert!(sweep(&empty, &tol()).unwrap().is_empty());

    let too_big = SweepConfig { n: 4, ..cfg };
    assert!(sweep(&too_big, &tol()).is_err());
}

#[test]
fn sweeps_are_deterministic() {
    let cfg = SweepConfig {
        target: SweepTarget::LogNorm,
        mode: SweepMode::Random,
        n: 3,
        param: param(3, 2),
        count: 50,
        seed: 9,
    };
    let a: Vec<String> = sweep(&cfg, &tol()).unwrap().iter().map(|r| r.to_json_line()).collect();
    let b: Vec<String> = sweep(&cfg, &tol()).unwrap().iter().map(|r| r.to_json_line()).collect();
    assert_eq!(a, b);
}

#[test]
fn equality_only_on_full_cube_pair() {
    for n in 1..=2 {
        for (r, s) in [(2, 1), (3, 1), (3, 2)] {
            let cfg = SweepConfig {
                target: SweepTarget::Eq1,
                mode: SweepMode::Exhaustive,
                n,
                param: param(r, s),
                count: 0,
                seed: 0,
            };
            let sets = (1usize << (1 << n)) - 1;
            let full_index = (sets - 1) * sets + (sets - 1);
            for (idx, rep) in sweep(&cfg, &tol()).unwrap().iter().enumerate() {
                assert!(rep.pass);
                assert_eq!(rep.margin.abs() < 1e-9, idx == full_index, "n={n} r={r} s={s} idx={idx}");
            }
        }
    }
}

#[test]
fn indicator_forms_agree_in_sign() {
    let mut rng = rng_from_seed(5);
    for _ in 0..200 {
        let n = rng.gen_range(1..=4);
        let p = param(3, rng.gen_range(0..=3));
        let a = hypercube::checks::random_nonempty_set(&mut rng, n);
        let b = hypercube::checks::random_nonempty_set(&mut rng, n);
        let e1 = check_eq1(&a, &b, p, &tol()).unwrap();
        let e77 = check_eq77(&a, &b, p, &tol()).unwrap();
        assert_eq!(e1.margin >= -1e-12, e77.margin >= -1e-12);
        assert!((e1.lhs - e77.lhs).abs() < 1e-14);
        let e23 = check_eq2_eq3(&a, &b, p, &tol()).unwrap();
        assert!(e23.pass && e23.extras["form_gap"] <= 1e-9);
    }
}

#[test]
fn eq1_margin_is_continuous_in_eps() {
    let a = CubeFunction::indicator(3, [0, 1, 3, 4]).unwrap();
    let b = CubeFunction::indicator(3, [1, 2, 3]).unwrap();
    let den = 1000;
    let margins: Vec<f64> = (0..=den)
        .map(|k| check_eq1(&a, &b, NoiseParam::from_eps_ratio(k, den).unwrap(), &tol()).unwrap().margin)
        .collect();
    let max_jump = margins.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    assert!(max_jump < 0.01, "{max_jump}");
}

#[test]
fn exact_rational_rhs_matches_float() {
    // W^{2r} 2^{2ns} <= (r+s)^{2rn} (|A||B|)^{r+s}, checked in rationals
    let a = CubeFunction::indicator(2, [0, 1]).unwrap();
    let b = CubeFunction::indicator(2, [0, 2, 3]).unwrap();
    let p = param(2, 1);
    let n = 2;
    let w = brute_weight(n, p, &a, &b);
    let lhs = w.pow(4) * BigUint::from(2u32).pow(4);
    let rhs = BigUint::from(3u32).pow(8) * BigUint::from(6u32).pow(3);
    let ratio = BigRational::new(lhs.into(), rhs.into());
    let report = check_eq2_eq3(&a, &b, p, &tol()).unwrap();
    assert_eq!(ratio <= BigRational::one(), report.margin >= 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pass_flag_matches_margin(n in 1usize..=3, sa in 1u64..255, sb in 1u64..255, r in 1u64..6, sf in 0.0f64..=1.0) {
        let n_sets = (1u64 << (1 << n)) - 1;
        let a = CubeFunction::indicator_from_set_mask(n, 1 + sa % n_sets).unwrap();
        let b = CubeFunction::indicator_from_set_mask(n, 1 + sb % n_sets).unwrap();
        let p = param(r, (sf * r as f64) as u64);
        let rep = check_eq1(&a, &b, p, &tol()).unwrap();
        prop_assert_eq!(rep.margin, rep.rhs - rep.lhs);
        prop_assert_eq!(rep.pass, rep.margin >= -1e-12 || rep.exact_recheck == Some(true));
        prop_assert!(rep.pass);
    }
}
