//! Coefficient scalars: exact rationals or binary64 floats.
//!
//! Arithmetic between two exact values stays exact; any float operand
//! promotes the result to float. Promotion never goes the other way.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::Error;

#[derive(Clone, Debug)]
pub enum Scalar {
    /// Lowest terms, positive denominator (maintained by `BigRational`).
    Exact(BigRational),
    Float(f64),
}

pub fn rat(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

pub fn int(p: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(p))
}

/// Closest binary64 to a rational; exact rationals beyond f64 range saturate.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar::Exact(BigRational::zero())
    }

    pub fn one() -> Self {
        Scalar::Exact(BigRational::one())
    }

    pub fn from_int(k: i64) -> Self {
        Scalar::Exact(int(k))
    }

    pub fn ratio(p: i64, q: i64) -> Self {
        Scalar::Exact(rat(p, q))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Exact(r) => r.is_zero(),
            Scalar::Float(x) => *x == 0.0,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Scalar::Exact(_))
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self {
            Scalar::Exact(r) => Some(r),
            Scalar::Float(_) => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Exact(r) => rational_to_f64(r),
            Scalar::Float(x) => *x,
        }
    }

    /// Same value, forced to float.
    pub fn to_float(&self) -> Scalar {
        Scalar::Float(self.to_f64())
    }

    pub fn abs(&self) -> Scalar {
        match self {
            Scalar::Exact(r) => Scalar::Exact(r.abs()),
            Scalar::Float(x) => Scalar::Float(x.abs()),
        }
    }

    /// Integer power; negative exponents invert (zero base yields an error).
    pub fn powi(&self, e: i32) -> Result<Scalar, Error> {
        match self {
            Scalar::Exact(r) => {
                if e < 0 && r.is_zero() {
                    return Err(Error::InvalidArgument("zero to a negative power".into()));
                }
                Ok(Scalar::Exact(num_traits::pow::Pow::pow(r, e)))
            }
            Scalar::Float(x) => Ok(Scalar::Float(x.powi(e))),
        }
    }

    pub fn recip(&self) -> Result<Scalar, Error> {
        if self.is_zero() {
            return Err(Error::InvalidArgument("division by zero".into()));
        }
        Ok(match self {
            Scalar::Exact(r) => Scalar::Exact(r.recip()),
            Scalar::Float(x) => Scalar::Float(1.0 / x),
        })
    }

    /// Exact zero stays exact zero under `abs_max`; used for residual maxima.
    pub fn max_abs<'a, I: IntoIterator<Item = &'a Scalar>>(items: I) -> Scalar {
        let mut best = Scalar::zero();
        for s in items {
            let a = s.abs();
            if a > best {
                best = a;
            } else if !a.is_exact() && best.is_exact() {
                best = best.to_float();
            }
        }
        best
    }
}

impl From<BigRational> for Scalar {
    fn from(r: BigRational) -> Self {
        Scalar::Exact(r)
    }
}

impl From<f64> for Scalar {
    fn from(x: f64) -> Self {
        Scalar::Float(x)
    }
}

impl From<i64> for Scalar {
    fn from(k: i64) -> Self {
        Scalar::from_int(k)
    }
}

impl PartialEq for Scalar {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => a == b,
            _ => self.to_f64() == other.to_f64(),
        }
    }
}

impl PartialOrd for Scalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Some(a.cmp(b)),
            _ => self.to_f64().partial_cmp(&other.to_f64()),
        }
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $op:tt) => {
        impl $tr<&Scalar> for &Scalar {
            type Output = Scalar;
            fn $m(self, rhs: &Scalar) -> Scalar {
                match (self, rhs) {
                    (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a $op b),
                    _ => Scalar::Float(self.to_f64() $op rhs.to_f64()),
                }
            }
        }
        impl $tr<Scalar> for Scalar {
            type Output = Scalar;
            fn $m(self, rhs: Scalar) -> Scalar {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Scalar> for Scalar {
            type Output = Scalar;
            fn $m(self, rhs: &Scalar) -> Scalar {
                (&self).$m(rhs)
            }
        }
        impl $tr<Scalar> for &Scalar {
            type Output = Scalar;
            fn $m(self, rhs: Scalar) -> Scalar {
                self.$m(&rhs)
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);

impl Div<&Scalar> for &Scalar {
    type Output = Scalar;
    /// Panics on exact division by zero, like `BigRational`.
    fn div(self, rhs: &Scalar) -> Scalar {
        match (self, rhs) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a / b),
            _ => Scalar::Float(self.to_f64() / rhs.to_f64()),
        }
    }
}

impl Div<Scalar> for Scalar {
    type Output = Scalar;
    fn div(self, rhs: Scalar) -> Scalar {
        &self / &rhs
    }
}

impl Div<&Scalar> for Scalar {
    type Output = Scalar;
    fn div(self, rhs: &Scalar) -> Scalar {
        &self / rhs
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        match self {
            Scalar::Exact(a) => Scalar::Exact(-a),
            Scalar::Float(x) => Scalar::Float(-x),
        }
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        self.clone().neg()
    }
}

impl AddAssign<&Scalar> for Scalar {
    fn add_assign(&mut self, rhs: &Scalar) {
        match (&mut *self, rhs) {
            (Scalar::Exact(a), Scalar::Exact(b)) => *a += b,
            (Scalar::Float(x), _) => *x += rhs.to_f64(),
            (Scalar::Exact(_), Scalar::Float(y)) => *self = Scalar::Float(self.to_f64() + y),
        }
    }
}

impl SubAssign<&Scalar> for Scalar {
    fn sub_assign(&mut self, rhs: &Scalar) {
        *self += &(-rhs);
    }
}

impl MulAssign<&Scalar> for Scalar {
    fn mul_assign(&mut self, rhs: &Scalar) {
        match (&mut *self, rhs) {
            (Scalar::Exact(a), Scalar::Exact(b)) => *a *= b,
            (Scalar::Float(x), _) => *x *= rhs.to_f64(),
            (Scalar::Exact(_), Scalar::Float(y)) => *self = Scalar::Float(self.to_f64() * y),
        }
    }
}

impl fmt::Display for Scalar {
    /// Exact values print as `p` or `p/q`; floats use the shortest round-trip form.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Exact(r) => {
                if r.is_integer() {
                    write!(f, "{}", r.numer())
                } else {
                    write!(f, "{}/{}", r.numer(), r.denom())
                }
            }
            Scalar::Float(x) => write!(f, "{:?}", x),
        }
    }
}

impl FromStr for Scalar {
    type Err = Error;

    /// `"p/q"` and bare integers parse exactly; anything with a decimal point
    /// or exponent parses as float.
    fn from_str(s: &str) -> Result<Self, Error> {
        let t = s.trim();
        let bad = || Error::Parse(format!("not a number: {s:?}"));
        if t.is_empty() {
            return Err(bad());
        }
        if let Some((p, q)) = t.split_once('/') {
            let p: BigInt = p.trim().parse().map_err(|_| bad())?;
            let q: BigInt = q.trim().parse().map_err(|_| bad())?;
            if q.is_zero() {
                return Err(Error::Parse(format!("zero denominator in {s:?}")));
            }
            return Ok(Scalar::Exact(BigRational::new(p, q)));
        }
        if let Ok(p) = t.parse::<BigInt>() {
            return Ok(Scalar::Exact(BigRational::from_integer(p)));
        }
        let x: f64 = t.parse().map_err(|_| bad())?;
        if !x.is_finite() {
            return Err(Error::Parse(format!("non-finite value {s:?}")));
        }
        Ok(Scalar::Float(x))
    }
}

/// Decimal rendering with 17 significant digits. Exact values are rounded
/// from the rational itself (half away from zero), not via binary64.
pub fn decimal17(s: &Scalar) -> String {
    match s {
        Scalar::Float(x) => float17(*x),
        Scalar::Exact(r) => rational17(r),
    }
}

fn float17(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.16e}", x);
    let (mant, exp) = sci.split_once('e').expect("scientific format");
    let exp: i64 = exp.parse().expect("exponent");
    let neg = mant.starts_with('-');
    let digits: String = mant.chars().filter(|c| c.is_ascii_digit()).collect();
    place_point(neg, &digits, exp)
}

fn rational17(r: &BigRational) -> String {
    if r.is_zero() {
        return "0".into();
    }
    let neg = r.is_negative();
    let a = r.abs();
    // Find e with 10^e <= a < 10^(e+1).
    let ten = BigRational::from_integer(BigInt::from(10));
    let approx = rational_to_f64(&a);
    let mut e = if approx.is_finite() && approx > 0.0 {
        approx.log10().floor() as i64
    } else {
        0
    };
    let pow10 = |k: i64| -> BigRational {
        if k >= 0 {
            num_traits::pow::Pow::pow(&ten, k as u64)
        } else {
            num_traits::pow::Pow::pow(&ten, (-k) as u64).recip()
        }
    };
    while pow10(e) > a {
        e -= 1;
    }
    while pow10(e + 1) <= a {
        e += 1;
    }
    let scaled = &a * pow10(16 - e);
    let half = rat(1, 2);
    let mut n = (scaled + half).floor().to_integer();
    let mut exp = e;
    if n.to_string().len() > 17 {
        n /= BigInt::from(10);
        exp += 1;
    }
    place_point(neg, &n.to_string(), exp)
}

/// `digits` holds 17 significant digits d0.d1...; value is d0.d1.. × 10^exp.
fn place_point(neg: bool, digits: &str, exp: i64) -> String {
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    let n = digits.len() as i64;
    if exp >= n - 1 {
        out.push_str(digits);
        for _ in 0..(exp - (n - 1)) {
            out.push('0');
        }
        return out;
    }
    if exp >= 0 {
        let cut = (exp + 1) as usize;
        out.push_str(&digits[..cut]);
        let frac = digits[cut..].trim_end_matches('0');
        if !frac.is_empty() {
            out.push('.');
            out.push_str(frac);
        }
        return out;
    }
    out.push_str("0.");
    for _ in 0..(-exp - 1) {
        out.push('0');
    }
    out.push_str(digits.trim_end_matches('0'));
    out
}
