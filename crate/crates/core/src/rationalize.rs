//! Continued-fraction snapping of floats to nearby small-denominator rationals.

use num_bigint::BigInt;
use num_rational::BigRational;

/// Smallest-denominator convergent of `x` within `tol·max(1, |x|)`, with
/// denominator at most `max_den`.
pub fn snap(x: f64, max_den: i64, tol: f64) -> Option<BigRational> {
    if !x.is_finite() {
        return None;
    }
    let bound = tol * x.abs().max(1.0);
    let (mut h0, mut h1): (i128, i128) = (0, 1);
    let (mut k0, mut k1): (i128, i128) = (1, 0);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a.abs() > 1e18 {
            return None;
        }
        let ai = a as i128;
        let h2 = ai.checked_mul(h1)?.checked_add(h0)?;
        let k2 = ai.checked_mul(k1)?.checked_add(k0)?;
        if k2 > max_den as i128 {
            return None;
        }
        if (x - h2 as f64 / k2 as f64).abs() <= bound {
            return Some(BigRational::new(BigInt::from(h2), BigInt::from(k2)));
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = r - a;
        if frac == 0.0 {
            return None;
        }
        r = 1.0 / frac;
    }
    None
}
