//! Both sides of the hypercontractive inequality in each of its equivalent
//! forms, evaluated and compared.
//!
//! Forms covered:
//!
//! * `|T_eps f|_2 <= |f|_{1+eps^2}` ([`check_eq88`]),
//! * `E[f(X) g(Y)] <= |f|_{1+eps} |g|_{1+eps}` ([`check_eq77`]),
//! * the set version `E[1_A(X) 1_B(Y)] <= (mu(A) mu(B))^{1/(1+eps)}`
//!   ([`check_eq1`]) and its two logarithmic rewritings ([`check_eq2_eq3`]),
//! * the integer-weighted logarithmic form ([`check_general_lognorm`]).
//!
//! Weighted pair counts `sum r^a s^d` are accumulated exactly and only the
//! final logarithm is taken in floating point. A margin that fails the
//! tolerance is recomputed (exactly where the data allow, otherwise with
//! compensated sums) before a failure is reported.

use num_bigint::BigUint;
use num_traits::Zero;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bigcount::log2_big;
use crate::cube::{p_norm, CubeFunction};
use crate::error::{Error, Result};
use crate::noise::{apply_spectral, correlation_expectation, rng_from_seed, NoiseParam, PairKernel};
use crate::report::{CheckReport, ReportParams, Scale, Tolerances};

/// Largest dimension for which every pair of subsets is enumerated.
pub const MAX_EXHAUSTIVE_DIM: usize = 3;

/// Largest value drawn for random integer-valued functions.
pub const RANDOM_INT_MAX: u64 = 8;

fn params_for(n: usize, p: NoiseParam, inputs: &[&CubeFunction]) -> ReportParams {
    let mut params = ReportParams::for_param(n, p);
    for f in inputs {
        params = params.with_digest(f.digest());
    }
    params
}

fn require_nonempty_indicator(f: &CubeFunction, name: &'static str) -> Result<usize> {
    f.ensure_indicator()?;
    let size = f.support().len();
    if size == 0 {
        return Err(Error::EmptySet(name));
    }
    Ok(size)
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn compensated_norm(f: &CubeFunction, p: f64) -> f64 {
    let mean = compensated_sum(f.values().iter().map(|v| v.abs().powf(p))) / f.len() as f64;
    mean.powf(1.0 / p)
}

/// `E[f(X) g(Y)]` as a direct compensated double sum; `O(4^n)`.
fn direct_correlation(f: &CubeFunction, g: &CubeFunction, p: NoiseParam) -> f64 {
    let k = PairKernel::new(f.n(), p);
    let len = f.len();
    let terms = (0..len).flat_map(|x| (0..len).map(move |y| (x, y)));
    compensated_sum(terms.map(|(x, y)| f.get(x) * g.get(y) * k.weight(x, y))) / len as f64
}

const DIRECT_RECHECK_MAX_DIM: usize = 12;

/// `|T_eps f|_2 <= |f|_{1+eps^2}` for nonnegative `f`.
pub fn check_eq88(f: &CubeFunction, p: NoiseParam, tol: &Tolerances) -> Result<CheckReport> {
    f.ensure_nonnegative()?;
    let eps = p.eps();
    let q = 1.0 + eps * eps;
    let lhs = p_norm(&apply_spectral(f, p), 2.0)?;
    let rhs = p_norm(f, q)?;
    let report = CheckReport::inequality("eq88", params_for(f.n(), p, &[f]), Scale::Linear, lhs, rhs, tol);
    Ok(report.with_recheck(|| {
        if f.n() > DIRECT_RECHECK_MAX_DIM {
            return None;
        }
        // |T_eps f|_2^2 = <f, T_{eps^2} f>, a correlation at eps^2
        let (num, den) = p.eps_ratio();
        let squared = NoiseParam::from_eps_ratio(num * num, den * den).ok()?;
        let lhs = direct_correlation(f, f, squared).max(0.0).sqrt();
        Some(compensated_norm(f, q) - lhs >= -tol.linear)
    }))
}

/// `E[f(X) g(Y)] <= |f|_{1+eps} |g|_{1+eps}` for nonnegative `f`, `g`.
pub fn check_eq77(f: &CubeFunction, g: &CubeFunction, p: NoiseParam, tol: &Tolerances) -> Result<CheckReport> {
    f.ensure_same_dim(g)?;
    f.ensure_nonnegative()?;
    g.ensure_nonnegative()?;
    let q = p.holder_exponent();
    let lhs = correlation_expectation(f, g, p)?;
    let rhs = p_norm(f, q)? * p_norm(g, q)?;
    let report = CheckReport::inequality("eq77", params_for(f.n(), p, &[f, g]), Scale::Linear, lhs, rhs, tol);
    Ok(report.with_recheck(|| {
        if f.n() > DIRECT_RECHECK_MAX_DIM {
            return None;
        }
        let lhs = direct_correlation(f, g, p);
        Some(compensated_norm(f, q) * compensated_norm(g, q) - lhs >= -tol.linear)
    }))
}

/// Number of pairs `(x, y)` in `xs x ys` at each Hamming distance `0..=n`.
pub fn distance_histogram(n: usize, xs: &[usize], ys: &[usize]) -> Vec<u64> {
    let mut hist = vec![0u64; n + 1];
    for &x in xs {
        for &y in ys {
            hist[(x ^ y).count_ones() as usize] += 1;
        }
    }
    hist
}

/// `sum_{x,y} r^{a(x,y)} s^{d(x,y)}` from a distance histogram.
pub fn weighted_pair_count(n: usize, p: NoiseParam, hist: &[u64]) -> BigUint {
    let (r, s) = (BigUint::from(p.r()), BigUint::from(p.s()));
    hist.iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(d, &c)| BigUint::from(c) * r.pow((n - d) as u32) * s.pow(d as u32))
        .fold(BigUint::zero(), |acc, t| acc + t)
}

/// Integer form of the logarithmic set inequality:
/// `W^{2r} 2^{2ns} <= (r+s)^{2rn} (|A||B|)^{r+s}`. `None` when the powers
/// would be unreasonably large.
pub fn eq3_holds_exactly(n: usize, p: NoiseParam, weighted: &BigUint, size_a: usize, size_b: usize) -> Option<bool> {
    let (r, s) = (p.r(), p.s());
    let budget_bits = 1u64 << 26;
    let lhs_bits = weighted.bits().saturating_mul(2 * r);
    let rhs_bits = (64 - (r + s).leading_zeros() as u64)
        .saturating_mul(2 * r * n as u64)
        .saturating_add(128u64.saturating_mul(r + s));
    if lhs_bits > budget_bits || rhs_bits > budget_bits {
        return None;
    }
    let lhs = weighted.pow((2 * r) as u32) << (2 * n as u64 * s);
    let rhs = BigUint::from(r + s).pow((2 * r * n as u64) as u32)
        * (BigUint::from(size_a) * BigUint::from(size_b)).pow((r + s) as u32);
    Some(lhs <= rhs)
}

/// `E[1_A(X) 1_B(Y)] <= (mu(A) mu(B))^{1/(1+eps)}` for nonempty `A`, `B`.
pub fn check_eq1(a: &CubeFunction, b: &CubeFunction, p: NoiseParam, tol: &Tolerances) -> Result<CheckReport> {
    a.ensure_same_dim(b)?;
    let size_a = require_nonempty_indicator(a, "first set")?;
    let size_b = require_nonempty_indicator(b, "second set")?;
    let lhs = correlation_expectation(a, b, p)?;
    let rhs = (a.mean() * b.mean()).powf(1.0 / (1.0 + p.eps()));
    let report = CheckReport::inequality("eq1", params_for(a.n(), p, &[a, b]), Scale::Linear, lhs, rhs, tol);
    Ok(report.with_recheck(|| {
        let hist = distance_histogram(a.n(), &a.support(), &b.support());
        let w = weighted_pair_count(a.n(), p, &hist);
        eq3_holds_exactly(a.n(), p, &w, size_a, size_b)
    }))
}

/// Right side shared by the integer-weighted forms:
/// `n (log(r+s) - s/r) + ((r+s)/2r) (la + lb)`.
fn integer_form_rhs(n: usize, p: NoiseParam, la: f64, lb: f64) -> f64 {
    let (r, s) = (p.r() as f64, p.s() as f64);
    n as f64 * ((r + s).log2() - s / r) + (r + s) / (2.0 * r) * (la + lb)
}

/// The set inequality with `log2` taken, in the `eps` form
/// `log sum (1+eps)^a (1-eps)^d <= (2 eps n + log|A| + log|B|) / (1+eps)`
/// and the `(r, s)` form
/// `log sum r^a s^d <= n(log(r+s) - s/r) + ((r+s)/2r)(log|A| + log|B|)`.
///
/// The report carries the integer form; the `eps` form's margin is in the
/// extras and the two margins must agree.
pub fn check_eq2_eq3(a: &CubeFunction, b: &CubeFunction, p: NoiseParam, tol: &Tolerances) -> Result<CheckReport> {
    a.ensure_same_dim(b)?;
    let size_a = require_nonempty_indicator(a, "first set")?;
    let size_b = require_nonempty_indicator(b, "second set")?;
    let n = a.n();
    let hist = distance_histogram(n, &a.support(), &b.support());
    let weighted = weighted_pair_count(n, p, &hist);
    let (la, lb) = ((size_a as f64).log2(), (size_b as f64).log2());

    let lhs3 = log2_big(&weighted);
    let rhs3 = integer_form_rhs(n, p, la, lb);

    let eps = p.eps();
    let sum2: f64 = hist
        .iter()
        .enumerate()
        .map(|(d, &c)| c as f64 * (1.0 + eps).powi((n - d) as i32) * (1.0 - eps).powi(d as i32))
        .sum();
    let lhs2 = sum2.log2();
    let rhs2 = (2.0 * eps * n as f64 + la + lb) / (1.0 + eps);
    let margin2 = if lhs2 == rhs2 { 0.0 } else { rhs2 - lhs2 };

    let report = CheckReport::inequality("eq2_eq3", params_for(n, p, &[a, b]), Scale::Log, lhs3, rhs3, tol);
    let gap = if report.margin == margin2 { 0.0 } else { (report.margin - margin2).abs() };
    let report = report
        .with_extra("eq2_lhs", lhs2)
        .with_extra("eq2_rhs", rhs2)
        .with_extra("eq2_margin", margin2)
        .with_extra("form_gap", gap)
        .with_recheck(|| eq3_holds_exactly(n, p, &weighted, size_a, size_b));
    let forms_agree = gap <= tol.log || (report.margin.is_infinite() && margin2.is_infinite());
    Ok(report.require(forms_agree, "eq2 and eq3 margins disagree"))
}

/// Integer-weighted form for nonnegative integer `f`, `g`:
/// `log sum r^a s^d f(X) g(Y) <= n(log(r+s) - s/r)
///   + ((r+s)/2r)(log sum f^{2r/(r+s)} + log sum g^{2r/(r+s)})`.
pub fn check_general_lognorm(f: &CubeFunction, g: &CubeFunction, p: NoiseParam, tol: &Tolerances) -> Result<CheckReport> {
    f.ensure_same_dim(g)?;
    let fc = f.to_counts()?;
    let gc = g.to_counts()?;
    if fc.iter().all(|&v| v == 0) {
        return Err(Error::ZeroFunction("f"));
    }
    if gc.iter().all(|&v| v == 0) {
        return Err(Error::ZeroFunction("g"));
    }
    let n = f.n();
    let weighted = weighted_function_sum(n, p, &fc, &gc);
    let lhs = log2_big(&weighted);
    let q = p.holder_exponent();
    let power_sum = |c: &[u64]| c.iter().map(|&v| (v as f64).powf(q)).sum::<f64>();
    let rhs = integer_form_rhs(n, p, power_sum(&fc).log2(), power_sum(&gc).log2());
    let report = CheckReport::inequality("lognorm", params_for(n, p, &[f, g]), Scale::Log, lhs, rhs, tol);
    Ok(report.with_recheck(|| {
        let comp = |c: &[u64]| compensated_sum(c.iter().map(|&v| (v as f64).powf(q))).log2();
        Some(integer_form_rhs(n, p, comp(&fc), comp(&gc)) - lhs >= -tol.log)
    }))
}

/// `sum_{x,y} r^{a} s^{d} f(x) g(y)`, exactly.
pub fn weighted_function_sum(n: usize, p: NoiseParam, f: &[u64], g: &[u64]) -> BigUint {
    let mut by_distance = vec![BigUint::zero(); n + 1];
    for (x, &fx) in f.iter().enumerate().filter(|(_, &v)| v > 0) {
        for (y, &gy) in g.iter().enumerate().filter(|(_, &v)| v > 0) {
            by_distance[(x ^ y).count_ones() as usize] += BigUint::from(fx) * BigUint::from(gy);
        }
    }
    let (r, s) = (BigUint::from(p.r()), BigUint::from(p.s()));
    by_distance
        .into_iter()
        .enumerate()
        .filter(|(_, c)| !c.is_zero())
        .map(|(d, c)| c * r.pow((n - d) as u32) * s.pow(d as u32))
        .fold(BigUint::zero(), |acc, t| acc + t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    Exhaustive,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepTarget {
    Eq1,
    Eq2Eq3,
    Eq77,
    Eq88,
    LogNorm,
}

impl SweepTarget {
    fn takes_pair(self) -> bool {
        !matches!(self, SweepTarget::Eq88)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub target: SweepTarget,
    pub mode: SweepMode,
    pub n: usize,
    pub param: NoiseParam,
    pub count: usize,
    pub seed: u64,
}

/// A uniformly random nonempty subset of `{0,1}^n` as an indicator.
pub fn random_nonempty_set<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CubeFunction {
    loop {
        let f = CubeFunction::from_fn(n, |_| if rng.gen::<bool>() { 1.0 } else { 0.0 }).expect("valid n");
        if f.values().iter().any(|&v| v == 1.0) {
            return f;
        }
    }
}

/// Random function with values uniform in `[0, 1)`.
pub fn random_nonnegative<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CubeFunction {
    CubeFunction::from_fn(n, |_| rng.gen::<f64>()).expect("valid n")
}

/// Random integer function with values in `0..=max`, not identically zero.
pub fn random_integer_function<R: Rng + ?Sized>(rng: &mut R, n: usize, max: u64) -> CubeFunction {
    loop {
        let f = CubeFunction::from_fn(n, |_| rng.gen_range(0..=max) as f64).expect("valid n");
        if f.values().iter().any(|&v| v > 0.0) {
            return f;
        }
    }
}

fn run_target(target: SweepTarget, f: &CubeFunction, g: &CubeFunction, p: NoiseParam, tol: &Tolerances) -> Result<CheckReport> {
    match target {
        SweepTarget::Eq1 => check_eq1(f, g, p, tol),
        SweepTarget::Eq2Eq3 => check_eq2_eq3(f, g, p, tol),
        SweepTarget::Eq77 => check_eq77(f, g, p, tol),
        SweepTarget::Eq88 => check_eq88(f, p, tol),
        SweepTarget::LogNorm => check_general_lognorm(f, g, p, tol),
    }
}

/// Runs one check over every input (exhaustive mode, `n <= 3`) or over
/// `count` seeded random inputs. Reports come back in enumeration order.
///
/// Exhaustive mode walks nonempty subsets of the cube (as indicators) in
/// increasing set-mask order, pairs in row-major order.
pub fn sweep(cfg: &SweepConfig, tol: &Tolerances) -> Result<Vec<CheckReport>> {
    let SweepConfig { target, mode, n, param, count, seed } = *cfg;
    let label = |r: CheckReport, idx: usize, seed: Option<u64>| {
        let mut r = r;
        r.params = r.params.with_label("index", idx).with_seed(seed);
        r
    };
    match mode {
        SweepMode::Exhaustive => {
            if n > MAX_EXHAUSTIVE_DIM {
                return Err(Error::InfeasibleSweep { n, max: MAX_EXHAUSTIVE_DIM });
            }
            let sets = (1u64 << (1usize << n)) - 1;
            let total = if target.takes_pair() { sets * sets } else { sets } as usize;
            (0..total)
                .into_par_iter()
                .map(|idx| {
                    let (i, j) = if target.takes_pair() {
                        (idx as u64 / sets, idx as u64 % sets)
                    } else {
                        (idx as u64, 0)
                    };
                    let f = CubeFunction::indicator_from_set_mask(n, i + 1)?;
                    let g = CubeFunction::indicator_from_set_mask(n, j + 1)?;
                    Ok(label(run_target(target, &f, &g, param, tol)?, idx, None))
                })
                .collect()
        }
        SweepMode::Random => {
            let mut rng = rng_from_seed(seed);
            let inputs: Vec<(CubeFunction, CubeFunction)> = (0..count)
                .map(|_| {
                    let draw = |rng: &mut rand_chacha::ChaCha8Rng| match target {
                        SweepTarget::Eq1 | SweepTarget::Eq2Eq3 => random_nonempty_set(rng, n),
                        SweepTarget::Eq77 | SweepTarget::Eq88 => random_nonnegative(rng, n),
                        SweepTarget::LogNorm => random_integer_function(rng, n, RANDOM_INT_MAX),
                    };
                    let f = draw(&mut rng);
                    let g = if target.takes_pair() { draw(&mut rng) } else { f.clone() };
                    (f, g)
                })
                .collect();
            inputs
                .par_iter()
                .enumerate()
                .map(|(idx, (f, g))| Ok(label(run_target(target, f, g, param, tol)?, idx, Some(seed))))
                .collect()
        }
    }
}
