//! Floating-point views of exact counts.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

/// `log2(x)` accurate to a few ulps for counts of any size; `-inf` at zero.
pub fn log2_big(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 64 {
        return (x.to_u64().expect("fits in u64") as f64).log2();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_u64().expect("top 64 bits");
    (top as f64).log2() + shift as f64
}

/// `num / den` as a float, without overflowing for huge operands.
pub fn ratio(num: &BigUint, den: &BigUint) -> f64 {
    assert!(!den.is_zero(), "ratio with zero denominator");
    if num.is_zero() {
        return 0.0;
    }
    if den.bits() < 1000 {
        return num.to_f64().expect("finite") / den.to_f64().expect("finite");
    }
    (log2_big(num) - log2_big(den)).exp2()
}

/// Entropy in bits of the law proportional to `counts`, given their exact sum.
///
/// Uses `H = log2 N - sum (c/N) log2 c`, so nothing is normalized before the
/// logarithms are taken.
pub fn entropy_of_counts<'a, I>(counts: I, total: &BigUint) -> f64
where
    I: IntoIterator<Item = &'a BigUint>,
{
    let log_total = log2_big(total);
    let mut acc = 0.0;
    for c in counts {
        if c.is_zero() {
            continue;
        }
        acc += ratio(c, total) * log2_big(c);
    }
    log_total - acc
}
