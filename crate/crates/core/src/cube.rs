//! Real functions on the Boolean cube, Walsh characters and the Walsh-Hadamard
//! transform.
//!
//! Points and character labels are bitmasks: coordinate `i` (1-based) is bit
//! `i - 1`, so the least significant bit is the first coordinate. Tables
//! store one value per mask in increasing mask order.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Largest dimension accepted for a dense table.
pub const MAX_DIM: usize = 24;

/// Walsh character `u_x(y) = (-1)^{popcount(x & y)}`.
#[inline]
pub fn character(x: usize, y: usize) -> i8 {
    if (x & y).count_ones() % 2 == 0 {
        1
    } else {
        -1
    }
}

/// A real-valued table on `{0,1}^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CubeFunction {
    n: usize,
    values: Vec<f64>,
}

impl CubeFunction {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        check_dim(n)?;
        let expected = 1usize << n;
        if values.len() != expected {
            return Err(Error::TableLength {
                n,
                expected,
                found: values.len(),
            });
        }
        Ok(Self { n, values })
    }

    pub fn constant(n: usize, c: f64) -> Result<Self> {
        check_dim(n)?;
        Ok(Self {
            n,
            values: vec![c; 1 << n],
        })
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize) -> f64) -> Result<Self> {
        check_dim(n)?;
        Ok(Self {
            n,
            values: (0..1usize << n).map(f).collect(),
        })
    }

    /// Indicator of the set of listed points.
    pub fn indicator(n: usize, members: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut f = Self::constant(n, 0.0)?;
        let size = f.values.len();
        for m in members {
            if m >= size {
                return Err(Error::OutOfRange {
                    what: "point",
                    value: m as f64,
                    lo: 0.0,
                    hi: (size - 1) as f64,
                });
            }
            f.values[m] = 1.0;
        }
        Ok(f)
    }

    /// Indicator of a subset of the cube encoded as a bitmask over the
    /// `2^n` points (bit `x` set iff point `x` is a member). Needs `2^n <= 64`.
    pub fn indicator_from_set_mask(n: usize, set: u64) -> Result<Self> {
        if n > 6 {
            return Err(Error::DimensionTooLarge { n, max: 6 });
        }
        Self::from_fn(n, |x| ((set >> x) & 1) as f64)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, x: usize) -> f64 {
        self.values[x]
    }

    /// Expectation under the uniform measure.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn is_indicator(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Points with a nonzero value, in increasing order.
    pub fn support(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(x, _)| x)
            .collect()
    }

    pub fn ensure_indicator(&self) -> Result<()> {
        match self
            .values
            .iter()
            .position(|&v| v != 0.0 && v != 1.0)
        {
            Some(index) => Err(Error::NotIndicator {
                index,
                value: self.values[index],
            }),
            None => Ok(()),
        }
    }

    pub fn ensure_nonnegative(&self) -> Result<()> {
        match self.values.iter().position(|&v| !(v >= 0.0)) {
            Some(index) => Err(Error::NegativeValue {
                index,
                value: self.values[index],
            }),
            None => Ok(()),
        }
    }

    /// Nonnegative integer values, as exact integers.
    pub fn to_counts(&self) -> Result<Vec<u64>> {
        self.values
            .iter()
            .enumerate()
            .map(|(index, &v)| {
                if v < 0.0 {
                    Err(Error::NegativeValue { index, value: v })
                } else if v.fract() != 0.0 || !v.is_finite() || v > u64::MAX as f64 {
                    Err(Error::NonInteger { index, value: v })
                } else {
                    Ok(v as u64)
                }
            })
            .collect()
    }

    pub fn ensure_same_dim(&self, other: &CubeFunction) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                left: self.n,
                right: other.n,
            });
        }
        Ok(())
    }

    /// Short hex digest of the table, for identifying inputs in reports.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.n as u64).to_le_bytes());
        for v in &self.values {
            hasher.update(v.to_bits().to_le_bytes());
        }
        hasher
            .finalize()
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n > MAX_DIM {
        Err(Error::DimensionTooLarge { n, max: MAX_DIM })
    } else {
        Ok(())
    }
}

/// Fourier coefficients `f^(X)` indexed by character mask.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierSpectrum {
    n: usize,
    coeffs: Vec<f64>,
}

impl FourierSpectrum {
    pub fn new(n: usize, coeffs: Vec<f64>) -> Result<Self> {
        let f = CubeFunction::new(n, coeffs)?;
        Ok(Self {
            n,
            coeffs: f.into_values(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, x: usize) -> f64 {
        self.coeffs[x]
    }

    /// Multiplies coefficient `X` by `weight(popcount(X))`.
    pub fn scale_by_level(&mut self, mut weight: impl FnMut(u32) -> f64) {
        for (x, c) in self.coeffs.iter_mut().enumerate() {
            *c *= weight(x.count_ones());
        }
    }

    /// `sum_X f^(X)^2`, which equals `E[f^2]` by Parseval.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }
}

/// In-place unnormalized Walsh-Hadamard butterfly.
fn butterfly(values: &mut [f64]) {
    let len = values.len();
    let mut h = 1;
    while h < len {
        for block in values.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (u, v) in lo.iter_mut().zip(hi.iter_mut()) {
                let (a, b) = (*u, *v);
                *u = a + b;
                *v = a - b;
            }
        }
        h *= 2;
    }
}

/// `f^(X) = 2^{-n} sum_Y f(Y) u_X(Y)`, in `O(n 2^n)`.
pub fn fwht_forward(f: &CubeFunction) -> FourierSpectrum {
    let mut coeffs = f.values.clone();
    butterfly(&mut coeffs);
    let scale = 1.0 / coeffs.len() as f64;
    for c in &mut coeffs {
        *c *= scale;
    }
    FourierSpectrum { n: f.n, coeffs }
}

/// `f(Y) = sum_X f^(X) u_X(Y)`.
pub fn fwht_inverse(s: &FourierSpectrum) -> CubeFunction {
    let mut values = s.coeffs.clone();
    butterfly(&mut values);
    CubeFunction { n: s.n, values }
}

/// `(E|f|^p)^{1/p}` under the uniform measure.
pub fn p_norm(f: &CubeFunction, p: f64) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidExponent(p));
    }
    let mean = f.values.iter().map(|v| v.abs().powf(p)).sum::<f64>() / f.values.len() as f64;
    Ok(mean.powf(1.0 / p))
}
