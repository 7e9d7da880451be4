//! Finitely supported sequences on Z, masks, and the subdivision operator.

use std::fmt;

use num_rational::BigRational;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Coefficient cap shared by every routine that materializes long sequences.
pub const DEFAULT_MAX_COEFFS: u128 = 10_000_000;

pub fn max_coeffs() -> u128 {
    std::env::var("SUBDIVKIT_MAX_COEFFS")
        .ok()
        .and_then(|s| s.trim().parse::<u128>().ok())
        .unwrap_or(DEFAULT_MAX_COEFFS)
}

pub fn check_budget(needed: u128) -> Result<()> {
    let cap = max_coeffs();
    if needed > cap {
        Err(Error::Resource { needed, cap })
    } else {
        Ok(())
    }
}

/// A sequence Z → Scalar with finite support.
///
/// Invariant: `coeffs` is empty (the zero sequence) or its first and last
/// entries are nonzero; entry `i` sits at offset `start + i`.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteSequence {
    start: i64,
    coeffs: Vec<Scalar>,
}

impl FiniteSequence {
    pub fn new(start: i64, coeffs: Vec<Scalar>) -> Self {
        let mut coeffs = coeffs;
        let Some(first) = coeffs.iter().position(|c| !c.is_zero()) else {
            return Self::zero();
        };
        let last = coeffs.iter().rposition(|c| !c.is_zero()).expect("nonzero exists");
        coeffs.truncate(last + 1);
        coeffs.drain(..first);
        FiniteSequence {
            start: start + first as i64,
            coeffs,
        }
    }

    pub fn from_rationals(start: i64, coeffs: Vec<BigRational>) -> Self {
        Self::new(start, coeffs.into_iter().map(Scalar::Exact).collect())
    }

    pub fn from_f64(start: i64, coeffs: &[f64]) -> Self {
        Self::new(start, coeffs.iter().map(|&x| Scalar::Float(x)).collect())
    }

    pub fn zero() -> Self {
        FiniteSequence {
            start: 0,
            coeffs: Vec::new(),
        }
    }

    pub fn delta() -> Self {
        Self::delta_at(0)
    }

    pub fn delta_at(k: i64) -> Self {
        FiniteSequence {
            start: k,
            coeffs: vec![Scalar::one()],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Minimal support `[l, h]`, `None` for the zero sequence.
    pub fn support(&self) -> Option<(i64, i64)> {
        if self.coeffs.is_empty() {
            None
        } else {
            Some((self.start, self.start + self.coeffs.len() as i64 - 1))
        }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn coeffs(&self) -> &[Scalar] {
        &self.coeffs
    }

    pub fn get(&self, k: i64) -> Option<&Scalar> {
        let i = k - self.start;
        if i < 0 {
            None
        } else {
            self.coeffs.get(i as usize)
        }
    }

    /// Value at `k`, exact zero outside the support.
    pub fn at(&self, k: i64) -> Scalar {
        self.get(k).cloned().unwrap_or_else(Scalar::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, &Scalar)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(i, c)| (self.start + i as i64, c))
    }

    pub fn is_exact(&self) -> bool {
        self.coeffs.iter().all(Scalar::is_exact)
    }

    pub fn sum(&self) -> Scalar {
        let mut s = Scalar::zero();
        for c in &self.coeffs {
            s += c;
        }
        s
    }

    pub fn norm_inf(&self) -> Scalar {
        Scalar::max_abs(self.coeffs.iter())
    }

    pub fn norm1(&self) -> Scalar {
        let mut s = Scalar::zero();
        for c in &self.coeffs {
            s += &c.abs();
        }
        s
    }

    pub fn norm1_f64(&self) -> f64 {
        self.coeffs.iter().map(|c| c.to_f64().abs()).sum()
    }

    /// `result(k) = self(k - by)`.
    pub fn shift(&self, by: i64) -> Self {
        FiniteSequence {
            start: self.start + by,
            coeffs: self.coeffs.clone(),
        }
    }

    pub fn scale(&self, s: &Scalar) -> Self {
        Self::new(self.start, self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn reverse(&self) -> Self {
        match self.support() {
            None => Self::zero(),
            Some((_, h)) => {
                let mut c = self.coeffs.clone();
                c.reverse();
                FiniteSequence { start: -h, coeffs: c }
            }
        }
    }

    pub fn to_float(&self) -> Self {
        Self::new(self.start, self.coeffs.iter().map(Scalar::to_float).collect())
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.coeffs.iter().map(Scalar::to_f64).collect()
    }

    pub fn add(&self, other: &Self) -> Self {
        combine(self, other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        combine(self, other, |a, b| a - b)
    }

    /// Dense values over `[lo, hi]` (zeros outside the support).
    pub fn window(&self, lo: i64, hi: i64) -> Vec<Scalar> {
        (lo..=hi).map(|k| self.at(k)).collect()
    }

    /// Restriction to `[lo, hi]`.
    pub fn restrict(&self, lo: i64, hi: i64) -> Self {
        if hi < lo {
            return Self::zero();
        }
        Self::new(lo, self.window(lo, hi))
    }

    /// Symbol Σ u(k) z^k evaluated at a nonzero scalar.
    pub fn symbol_at(&self, z: &Scalar) -> Result<Scalar> {
        let mut acc = Scalar::zero();
        for (k, c) in self.iter() {
            acc += &(c * z.powi(k as i32)?);
        }
        Ok(acc)
    }
}

fn combine(u: &FiniteSequence, v: &FiniteSequence, f: impl Fn(Scalar, Scalar) -> Scalar) -> FiniteSequence {
    let (lo, hi) = match (u.support(), v.support()) {
        (None, None) => return FiniteSequence::zero(),
        (Some(s), None) | (None, Some(s)) => s,
        (Some((a, b)), Some((c, d))) => (a.min(c), b.max(d)),
    };
    FiniteSequence::new(lo, (lo..=hi).map(|k| f(u.at(k), v.at(k))).collect())
}

impl fmt::Display for FiniteSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.support() {
            None => write!(f, "{{}}"),
            Some((l, h)) => {
                write!(f, "{{")?;
                for (i, c) in self.coeffs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, "}}_[{l},{h}]")
            }
        }
    }
}

/// A mask with its dilation factor M ≥ 2.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    seq: FiniteSequence,
    dilation: u64,
}

impl Mask {
    pub fn new(seq: FiniteSequence, dilation: u64) -> Result<Self> {
        if dilation < 2 {
            return Err(Error::InvalidDilation(dilation));
        }
        Ok(Mask { seq, dilation })
    }

    pub fn from_rationals(start: i64, coeffs: Vec<BigRational>, dilation: u64) -> Result<Self> {
        Self::new(FiniteSequence::from_rationals(start, coeffs), dilation)
    }

    /// The hat mask {1/4, 1/2, 1/4} on [-1, 1] with M = 2.
    pub fn hat() -> Self {
        Self::new(
            FiniteSequence::new(
                -1,
                vec![Scalar::ratio(1, 4), Scalar::ratio(1, 2), Scalar::ratio(1, 4)],
            ),
            2,
        )
        .expect("dilation 2")
    }

    pub fn seq(&self) -> &FiniteSequence {
        &self.seq
    }

    pub fn dilation(&self) -> u64 {
        self.dilation
    }

    pub fn m(&self) -> i64 {
        self.dilation as i64
    }

    pub fn support(&self) -> Option<(i64, i64)> {
        self.seq.support()
    }

    pub fn nonzero_support(&self) -> Result<(i64, i64)> {
        self.seq.support().ok_or(Error::ZeroMask)
    }

    pub fn at(&self, k: i64) -> Scalar {
        self.seq.at(k)
    }

    pub fn is_exact(&self) -> bool {
        self.seq.is_exact()
    }

    pub fn sum(&self) -> Scalar {
        self.seq.sum()
    }

    /// Σ a(k) = 1, exactly for rational masks, to 1e-12 for float masks.
    pub fn is_normalized(&self) -> bool {
        let s = self.sum();
        match s {
            Scalar::Exact(r) => r == crate::scalar::int(1),
            Scalar::Float(x) => (x - 1.0).abs() <= 1e-12 * self.seq.norm1_f64().max(1.0),
        }
    }

    pub fn require_normalized(&self) -> Result<()> {
        if self.is_normalized() {
            Ok(())
        } else {
            Err(Error::NotNormalized(self.sum().to_string()))
        }
    }

    pub fn with_seq(&self, seq: FiniteSequence) -> Self {
        Mask {
            seq,
            dilation: self.dilation,
        }
    }
}

pub fn convolve(u: &FiniteSequence, v: &FiniteSequence) -> FiniteSequence {
    if u.is_zero() || v.is_zero() {
        return FiniteSequence::zero();
    }
    let n = u.len() + v.len() - 1;
    let mut out = vec![Scalar::zero(); n];
    for (i, a) in u.coeffs().iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        for (j, b) in v.coeffs().iter().enumerate() {
            if !b.is_zero() {
                out[i + j] += &(a * b);
            }
        }
    }
    FiniteSequence::new(u.start() + v.start(), out)
}

pub fn upsample(u: &FiniteSequence, l: i64) -> Result<FiniteSequence> {
    if l < 1 {
        return Err(Error::InvalidArgument(format!("upsampling factor {l} < 1")));
    }
    let Some((lo, _)) = u.support() else {
        return Ok(FiniteSequence::zero());
    };
    let step = l as usize;
    let mut out = vec![Scalar::zero(); (u.len() - 1) * step + 1];
    for (i, c) in u.coeffs().iter().enumerate() {
        out[i * step] = c.clone();
    }
    Ok(FiniteSequence::new(lo * l, out))
}

/// ∇^j u with ∇u = u − u(·−1).
pub fn backward_difference(u: &FiniteSequence, j: u32) -> FiniteSequence {
    let mut r = u.clone();
    for _ in 0..j {
        r = r.sub(&r.shift(1));
    }
    r
}

/// `result(k) = u(γ + M k)`.
pub fn coset(u: &FiniteSequence, gamma: i64, m: i64) -> Result<FiniteSequence> {
    if m < 2 {
        return Err(Error::InvalidDilation(m.max(0) as u64));
    }
    let Some((l, h)) = u.support() else {
        return Ok(FiniteSequence::zero());
    };
    let k_lo = (l - gamma).div_euclid(m);
    let k_hi = (h - gamma).div_euclid(m) + 1;
    Ok(FiniteSequence::new(
        k_lo,
        (k_lo..=k_hi).map(|k| u.at(gamma + m * k)).collect(),
    ))
}

/// Inverse of taking the cosets 0..M−1.
pub fn interleave(cosets: &[FiniteSequence]) -> FiniteSequence {
    let m = cosets.len() as i64;
    let mut acc = FiniteSequence::zero();
    for (g, c) in cosets.iter().enumerate() {
        let up = upsample(c, m).expect("m >= 1").shift(g as i64);
        acc = acc.add(&up);
    }
    acc
}

/// Integer c with a(c − k) = a(k) for all k, if the mask is symmetric.
pub fn symmetry_center(a: &Mask) -> Option<i64> {
    let (l, h) = a.support()?;
    let c = l + h;
    (l..=h).all(|k| a.at(c - k) == a.at(k)).then_some(c)
}

/// `[S v](j) = M Σ_k v(k) a(j − M k)`.
pub fn subdivide_once(a: &Mask, v: &FiniteSequence) -> FiniteSequence {
    let (Some((la, _)), Some((lv, _))) = (a.support(), v.support()) else {
        return FiniteSequence::zero();
    };
    let m = a.m();
    let ma: Vec<Scalar> = a.seq().coeffs().iter().map(|c| c * Scalar::from_int(m)).collect();
    let n = (v.len() - 1) * m as usize + ma.len();
    let mut out = vec![Scalar::zero(); n];
    for (i, vk) in v.coeffs().iter().enumerate() {
        if vk.is_zero() {
            continue;
        }
        let base = i * m as usize;
        for (t, c) in ma.iter().enumerate() {
            out[base + t] += &(vk * c);
        }
    }
    FiniteSequence::new(m * lv + la, out)
}

/// Predicted length of the support hull of A_n (or S^n δ).
pub fn iterated_support_len(width: i64, m: i64, n: u32) -> u128 {
    let geo: u128 = (0..n).map(|i| (m as u128).pow(i)).sum();
    geo * width.max(0) as u128 + 1
}

/// A_n = M^{-n} S^n δ, symbol ã(z^{M^{n−1}})···ã(z).
pub fn iterated_mask(a: &Mask, n: u32) -> Result<FiniteSequence> {
    let (l, h) = a.nonzero_support()?;
    check_budget(iterated_support_len(h - l, a.m(), n))?;
    let mut acc = FiniteSequence::delta();
    for _ in 0..n {
        acc = convolve(&upsample(&acc, a.m())?, a.seq());
    }
    Ok(acc)
}

/// S^n v with a budget check on the output length.
pub fn subdivide(a: &Mask, v: &FiniteSequence, n: u32) -> Result<FiniteSequence> {
    let (Some((la, ha)), Some((lv, hv))) = (a.support(), v.support()) else {
        return Ok(FiniteSequence::zero());
    };
    let m = a.m() as u128;
    let len = m.pow(n) * (hv - lv) as u128 + iterated_support_len(ha - la, a.m(), n);
    check_budget(len)?;
    let mut r = v.clone();
    for _ in 0..n {
        r = subdivide_once(a, &r);
    }
    Ok(r)
}

/// Monomial sequence k ↦ k^j over `[lo, hi]`.
pub fn monomial_window(j: u32, lo: i64, hi: i64) -> FiniteSequence {
    FiniteSequence::new(
        lo,
        (lo..=hi)
            .map(|k| Scalar::Exact(num_traits::pow::Pow::pow(crate::scalar::int(k), j)))
            .collect(),
    )
}

pub fn is_all_zero(v: &[Scalar]) -> bool {
    v.iter().all(Scalar::is_zero)
}

pub fn rational_coeffs(u: &FiniteSequence) -> Option<Vec<BigRational>> {
    u.coeffs().iter().map(|c| c.as_rational().cloned()).collect()
}

pub fn zero_rational() -> BigRational {
    BigRational::zero()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    fn seq(start: i64, v: &[(i64, i64)]) -> FiniteSequence {
        FiniteSequence::from_rationals(start, v.iter().map(|&(p, q)| rat(p, q)).collect())
    }

    fn hat_seq() -> FiniteSequence {
        seq(-1, &[(1, 4), (1, 2), (1, 4)])
    }

    fn d7() -> Mask {
        Mask::new(seq(-2, &[(-1, 28), (3, 14), (15, 28), (2, 7)]), 2).unwrap()
    }

    #[test]
    fn trims_to_minimal_support() {
        let s = seq(-3, &[(0, 1), (1, 2), (0, 1)]);
        assert_eq!(s.support(), Some((-2, -2)));
        assert_eq!(seq(0, &[(0, 1)]).support(), None);
    }

    #[test]
    fn convolution_by_hand() {
        let d = seq(0, &[(1, 1), (-1, 1)]);
        assert_eq!(convolve(&hat_seq(), &d), seq(-1, &[(1, 4), (1, 4), (-1, 4), (-1, 4)]));
        assert_eq!(convolve(&FiniteSequence::delta(), &d), d);
        assert!(convolve(&FiniteSequence::zero(), &d).is_zero());
    }

    #[test]
    fn upsample_definition() {
        assert_eq!(upsample(&seq(0, &[(1, 1), (2, 1)]), 2).unwrap(), seq(0, &[(1, 1), (0, 1), (2, 1)]));
        assert_eq!(upsample(&FiniteSequence::delta(), 3).unwrap(), FiniteSequence::delta());
        assert!(upsample(&FiniteSequence::delta(), 0).is_err());
    }

    #[test]
    fn second_difference_matches_convolution() {
        let u = hat_seq();
        let k = seq(0, &[(1, 1), (-2, 1), (1, 1)]);
        assert_eq!(backward_difference(&u, 2), convolve(&u, &k));
        assert_eq!(backward_difference(&u, 2), seq(-1, &[(1, 4), (0, 1), (-1, 2), (0, 1), (1, 4)]));
        assert_eq!(backward_difference(&FiniteSequence::delta(), 1), seq(0, &[(1, 1), (-1, 1)]));
        assert!(backward_difference(&u, 3).sum().is_zero());
    }

    #[test]
    fn cosets_and_reassembly() {
        let u = hat_seq();
        assert_eq!(coset(&u, 0, 2).unwrap(), seq(0, &[(1, 2)]));
        assert_eq!(coset(&u, 1, 2).unwrap(), seq(-1, &[(1, 4), (1, 4)]));
        let cs: Vec<_> = (0..3).map(|g| coset(&d7().seq().clone(), g, 3).unwrap()).collect();
        assert_eq!(interleave(&cs), d7().seq().clone());
    }

    #[test]
    fn symmetry_centers() {
        assert_eq!(symmetry_center(&Mask::hat()), Some(0));
        assert_eq!(symmetry_center(&d7()), None);
        let ex5 = Mask::new(
            seq(-3, &[(-1, 36), (1, 36), (1, 6), (1, 3), (1, 3), (1, 6), (1, 36), (-1, 36)]),
            3,
        )
        .unwrap();
        assert_eq!(symmetry_center(&ex5), Some(1));
    }

    #[test]
    fn subdivision_of_delta_is_scaled_mask() {
        assert_eq!(subdivide_once(&Mask::hat(), &FiniteSequence::delta()), seq(-1, &[(1, 2), (1, 1), (1, 2)]));
        assert_eq!(
            subdivide_once(&d7(), &FiniteSequence::delta()),
            seq(-2, &[(-1, 14), (3, 7), (15, 14), (4, 7)])
        );
    }

    #[test]
    fn iterated_mask_base_cases() {
        let a = d7();
        assert_eq!(iterated_mask(&a, 0).unwrap(), FiniteSequence::delta());
        assert_eq!(iterated_mask(&a, 1).unwrap(), a.seq().clone());
    }

    #[test]
    fn budget_is_enforced() {
        let a = d7();
        assert!(matches!(iterated_mask(&a, 40), Err(Error::Resource { .. })));
    }

    #[test]
    fn mask_rejects_small_dilation() {
        assert_eq!(Mask::new(FiniteSequence::delta(), 1), Err(Error::InvalidDilation(1)));
    }
}
