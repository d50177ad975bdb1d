//! The noise operator `T_eps` in its spectral and channel forms, and
//! `eps`-correlated pairs.

use std::fmt;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cube::{fwht_forward, fwht_inverse, CubeFunction};
use crate::error::{Error, Result};

/// Default bound on the denominator when a real `eps` is made rational.
pub const DEFAULT_MAX_DENOMINATOR: u64 = 10_000;

/// Correlation parameter as the exact pair `(r, s)` with
/// `(1+eps)/2 = r/(r+s)` and `(1-eps)/2 = s/(r+s)`.
///
/// `r` and `s` are kept as given (not reduced): they also size the
/// alphabets of the triple construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NoiseParam {
    r: u64,
    s: u64,
}

impl NoiseParam {
    pub fn new(r: u64, s: u64) -> Result<Self> {
        if r == 0 || s > r {
            return Err(Error::InvalidNoiseParam { r, s });
        }
        Ok(Self { r, s })
    }

    /// Exact `eps = num/den`, with `0 <= num <= den`.
    pub fn from_eps_ratio(num: u64, den: u64) -> Result<Self> {
        if den == 0 || num > den {
            return Err(Error::InvalidCorrelation(num as f64 / den as f64));
        }
        let (r, s) = (den + num, den - num);
        let g = gcd(r, s);
        Self::new(r / g, s / g)
    }

    /// Best rational approximation of `eps` with denominator at most `max_den`.
    pub fn from_eps(eps: f64, max_den: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::InvalidCorrelation(eps));
        }
        let (num, den) = best_rational(eps, max_den.max(1));
        Self::from_eps_ratio(num, den)
    }

    pub fn r(&self) -> u64 {
        self.r
    }

    pub fn s(&self) -> u64 {
        self.s
    }

    /// `eps` as a reduced fraction `(r - s) / (r + s)`.
    pub fn eps_ratio(&self) -> (u64, u64) {
        let (num, den) = (self.r - self.s, self.r + self.s);
        let g = gcd(num, den);
        (num / g, den / g)
    }

    pub fn eps(&self) -> f64 {
        (self.r - self.s) as f64 / (self.r + self.s) as f64
    }

    /// `delta = s / r`.
    pub fn delta(&self) -> f64 {
        self.s as f64 / self.r as f64
    }

    /// `Pr[X_i = Y_i] = r/(r+s)`.
    pub fn agree_prob(&self) -> f64 {
        self.r as f64 / (self.r + self.s) as f64
    }

    /// `Pr[X_i != Y_i] = s/(r+s)`.
    pub fn flip_prob(&self) -> f64 {
        self.s as f64 / (self.r + self.s) as f64
    }

    /// The Hölder exponent `1 + eps = 2r/(r+s)`.
    pub fn holder_exponent(&self) -> f64 {
        2.0 * self.r as f64 / (self.r + self.s) as f64
    }
}

impl fmt::Display for NoiseParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(r={}, s={})", self.r, self.s)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

/// Closest fraction `p/q` to `x` in `[0, 1]` with `q <= max_den`, from the
/// continued-fraction convergents and the last semiconvergent.
fn best_rational(x: f64, max_den: u64) -> (u64, u64) {
    let (mut p0, mut q0, mut p1, mut q1) = (0u64, 1u64, 1u64, 0u64);
    let mut frac = x;
    loop {
        let a = frac.floor();
        if a > 1e15 {
            break;
        }
        let a = a as u64;
        let (p2, q2) = (a * p1 + p0, a * q1 + q0);
        if q2 > max_den {
            let k = (max_den - q0) / q1;
            let (ps, qs) = (k * p1 + p0, k * q1 + q0);
            let err_semi = (x - ps as f64 / qs as f64).abs();
            let err_conv = (x - p1 as f64 / q1 as f64).abs();
            return if err_semi < err_conv { (ps, qs) } else { (p1, q1) };
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let rem = frac - a as f64;
        if rem <= 0.0 || (p1 as f64 / q1 as f64 - x).abs() <= f64::EPSILON * x.max(1e-300) {
            break;
        }
        frac = 1.0 / rem;
    }
    (p1, q1)
}

/// Agreement/disagreement statistics and weights of the product channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairKernel {
    n: usize,
    param: NoiseParam,
}

impl PairKernel {
    pub fn new(n: usize, param: NoiseParam) -> Self {
        Self { n, param }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn param(&self) -> NoiseParam {
        self.param
    }

    /// Number of coordinates where `x` and `y` agree.
    pub fn agreement(&self, x: usize, y: usize) -> u32 {
        self.n as u32 - self.disagreement(x, y)
    }

    /// Number of coordinates where `x` and `y` differ.
    pub fn disagreement(&self, x: usize, y: usize) -> u32 {
        (x ^ y).count_ones()
    }

    /// `Pr[Y = y | X = x] = (r/(r+s))^a (s/(r+s))^d`.
    pub fn weight(&self, x: usize, y: usize) -> f64 {
        self.param.agree_prob().powi(self.agreement(x, y) as i32)
            * self.param.flip_prob().powi(self.disagreement(x, y) as i32)
    }

    /// `r^a s^d`, exactly.
    pub fn integer_weight(&self, x: usize, y: usize) -> BigUint {
        BigUint::from(self.param.r).pow(self.agreement(x, y))
            * BigUint::from(self.param.s).pow(self.disagreement(x, y))
    }
}

/// `T_eps f` through the spectrum: coefficient `X` scaled by `eps^{|X|}`.
pub fn apply_spectral(f: &CubeFunction, p: NoiseParam) -> CubeFunction {
    let eps = p.eps();
    let mut spectrum = fwht_forward(f);
    spectrum.scale_by_level(|level| eps.powi(level as i32));
    fwht_inverse(&spectrum)
}

/// `T_eps f(x) = E[f(Y)]` over the channel, one coordinate at a time.
pub fn apply_kernel(f: &CubeFunction, p: NoiseParam) -> CubeFunction {
    let (stay, flip) = (p.agree_prob(), p.flip_prob());
    let mut values = f.values().to_vec();
    let len = values.len();
    let mut h = 1;
    while h < len {
        for block in values.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (u, v) in lo.iter_mut().zip(hi.iter_mut()) {
                let (a, b) = (*u, *v);
                *u = stay * a + flip * b;
                *v = flip * a + stay * b;
            }
        }
        h *= 2;
    }
    CubeFunction::new(f.n(), values).expect("same shape")
}

/// Exact `E[f(X) g(Y)]` for an `eps`-correlated pair with `X` uniform.
///
/// Both association orders are evaluated and averaged, which makes the
/// result symmetric in `f` and `g` bit for bit.
pub fn correlation_expectation(f: &CubeFunction, g: &CubeFunction, p: NoiseParam) -> Result<f64> {
    f.ensure_same_dim(g)?;
    let one_sided = |u: &CubeFunction, v: &CubeFunction| {
        let tv = apply_kernel(v, p);
        u.values()
            .iter()
            .zip(tv.values())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / u.len() as f64
    };
    Ok(0.5 * (one_sided(f, g) + one_sided(g, f)))
}

/// Seeded generator used for every stochastic check.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draws `X` uniform on `{0,1}^n` and `Y` with `Pr[Y_i = X_i] = r/(r+s)`
/// independently per coordinate.
pub fn sample_correlated_pair<R: Rng + ?Sized>(rng: &mut R, p: NoiseParam, n: usize) -> (usize, usize) {
    let mask = if n == 0 { 0 } else { usize::MAX >> (usize::BITS as usize - n) };
    let x = rng.gen::<u64>() as usize & mask;
    let total = p.r + p.s;
    let mut flips = 0usize;
    for i in 0..n {
        if rng.gen_range(0..total) < p.s {
            flips |= 1 << i;
        }
    }
    (x, x ^ flips)
}

/// Sample mean of `f(X) g(Y)` and its standard error.
pub fn monte_carlo_correlation<R: Rng + ?Sized>(
    rng: &mut R,
    f: &CubeFunction,
    g: &CubeFunction,
    p: NoiseParam,
    samples: usize,
) -> Result<(f64, f64)> {
    f.ensure_same_dim(g)?;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let (x, y) = sample_correlated_pair(rng, p, f.n());
        let v = f.get(x) * g.get(y);
        sum += v;
        sum_sq += v * v;
    }
    let m = samples as f64;
    let mean = sum / m;
    let var = ((sum_sq / m) - mean * mean).max(0.0) * m / (m - 1.0).max(1.0);
    Ok((mean, (var / m).sqrt()))
}
