//! Quasi-stationary schemes: r masks applied cyclically with one dilation.

use num_rational::BigRational;

use crate::analysis;
use crate::error::{Error, Result};
use crate::interp::{self, InterpolationCertificate, Verdict, VerifyOptions};
use crate::scalar::Scalar;
use crate::seq::{self, backward_difference, check_budget, convolve, subdivide_once, upsample, FiniteSequence, Mask};
use crate::transition::pow_checked;

/// Masks a_1..a_r with a common dilation M, each summing to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct SchemeSpec {
    dilation: u64,
    masks: Vec<Mask>,
    composed: Mask,
}

impl SchemeSpec {
    pub fn new(masks: Vec<Mask>) -> Result<Self> {
        let first = masks
            .first()
            .ok_or_else(|| Error::InvalidArgument("a scheme needs at least one mask".into()))?;
        let dilation = first.dilation();
        for (i, a) in masks.iter().enumerate() {
            if a.dilation() != dilation {
                return Err(Error::InvalidArgument(format!(
                    "mask {} has dilation {}, expected {dilation}",
                    i + 1,
                    a.dilation()
                )));
            }
            a.require_normalized()
                .map_err(|e| Error::NotNormalized(format!("mask {}: {e}", i + 1)))?;
        }
        let composed = compose_by_symbols(&masks)?;
        Ok(SchemeSpec {
            dilation,
            masks,
            composed,
        })
    }

    pub fn dilation(&self) -> u64 {
        self.dilation
    }

    pub fn period(&self) -> usize {
        self.masks.len()
    }

    pub fn masks(&self) -> &[Mask] {
        &self.masks
    }

    /// The mask a with dilation M^r of one full block.
    pub fn composed(&self) -> &Mask {
        &self.composed
    }

    /// s_a of the composed mask, m_a / (M^r − 1).
    pub fn shift(&self) -> Scalar {
        analysis::shift_parameter(&self.composed)
    }
}

/// ã(z) = ã_1(z^{M^{r−1}}) ··· ã_{r−1}(z^M) ã_r(z), dilation M^r.
pub fn compose_by_symbols(masks: &[Mask]) -> Result<Mask> {
    let m = masks
        .first()
        .ok_or_else(|| Error::InvalidArgument("no masks to compose".into()))?
        .dilation();
    let r = masks.len() as u32;
    let big = pow_checked(m, r)?;
    let mut acc = FiniteSequence::delta();
    for (i, a) in masks.iter().enumerate() {
        let factor = pow_checked(m, r - 1 - i as u32)? as i64;
        acc = convolve(&acc, &upsample(a.seq(), factor)?);
    }
    Mask::new(acc, big)
}

/// M^{−r} S_{a_r} ··· S_{a_1} δ, dilation M^r.
pub fn compose_by_operators(masks: &[Mask]) -> Result<Mask> {
    let m = masks
        .first()
        .ok_or_else(|| Error::InvalidArgument("no masks to compose".into()))?
        .dilation();
    let r = masks.len() as u32;
    let big = pow_checked(m, r)?;
    let mut v = FiniteSequence::delta();
    for a in masks {
        v = subdivide_once(a, &v);
    }
    Mask::new(v.scale(&Scalar::ratio(1, big as i64)), big)
}

pub fn compose_masks(spec: &SchemeSpec) -> Mask {
    spec.composed.clone()
}

/// Applies S_{a_1}, S_{a_2}, … cyclically, `n` operator applications in all.
pub fn quasi_subdivide(spec: &SchemeSpec, v: &FiniteSequence, n: u32) -> Result<FiniteSequence> {
    if n == 0 {
        return Ok(v.clone());
    }
    let widest = spec
        .masks
        .iter()
        .filter_map(|a| a.support().map(|(l, h)| h - l))
        .max()
        .unwrap_or(0);
    let len = v.len().max(1) as u128 * (spec.dilation as u128).saturating_pow(n)
        + seq::iterated_support_len(widest, spec.dilation as i64, n);
    check_budget(len)?;
    let mut out = v.clone();
    for step in 0..n as usize {
        out = subdivide_once(&spec.masks[step % spec.period()], &out);
    }
    Ok(out)
}

/// Closed-polygon subdivision: `v` is one period of an N-periodic
/// sequence; returns one period (length M·N) of S_a v.
pub fn subdivide_periodic(a: &Mask, v: &[Scalar]) -> Result<Vec<Scalar>> {
    let n = v.len() as i64;
    if n == 0 {
        return Err(Error::InvalidArgument("empty periodic data".into()));
    }
    let (l, h) = a.nonzero_support()?;
    let m = a.m();
    check_budget((n * m) as u128)?;
    let scale = Scalar::from_int(m);
    Ok((0..n * m)
        .map(|j| {
            let lo = num_integer::Integer::div_ceil(&(j - h), &m);
            let hi = num_integer::Integer::div_floor(&(j - l), &m);
            let mut acc = Scalar::zero();
            for k in lo..=hi {
                acc += &(&v[k.rem_euclid(n) as usize] * &a.at(j - m * k));
            }
            &acc * &scale
        })
        .collect())
}

/// Closed-polygon version of `quasi_subdivide`.
pub fn quasi_subdivide_periodic(spec: &SchemeSpec, v: &[Scalar], n: u32) -> Result<Vec<Scalar>> {
    check_budget(v.len() as u128 * (spec.dilation as u128).saturating_pow(n))?;
    let mut out = v.to_vec();
    for step in 0..n as usize {
        out = subdivide_periodic(&spec.masks[step % spec.period()], &out)?;
    }
    Ok(out)
}

/// Indices after `n` steps whose values depend only on data in [lo, hi];
/// `None` once the range is exhausted.
pub fn determined_range(spec: &SchemeSpec, range: (i64, i64), n: u32) -> Option<(i64, i64)> {
    let m = spec.dilation as i64;
    let (mut lo, mut hi) = range;
    for step in 0..n as usize {
        let (l, h) = spec.masks[step % spec.period()].support()?;
        lo = m * (lo - 1) + h + 1;
        hi = m * (hi + 1) + l - 1;
        if lo > hi {
            return None;
        }
    }
    Some((lo, hi))
}

/// (α, β) with n steps mapping the data v(k) = k to α j + β, assuming
/// every mask has at least two sum rules; β/(α − 1) tends to −s_a.
pub fn parameter_map(spec: &SchemeSpec, n: u32) -> (Scalar, Scalar) {
    let m = Scalar::from_int(spec.dilation as i64);
    let (mut alpha, mut beta) = (Scalar::one(), Scalar::zero());
    for step in 0..n as usize {
        let ma = analysis::first_moment(&spec.masks[step % spec.period()]);
        beta = &beta - &(&(&alpha * &ma) / &m);
        alpha = &alpha / &m;
    }
    (alpha, beta)
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuasiCertificate {
    /// sr(a_ℓ, M) for ℓ = 1..r.
    pub sum_rules: Vec<u32>,
    pub sum_rules_ok: bool,
    /// Certificate of the composed mask with dilation M^r.
    pub interpolation: InterpolationCertificate,
    pub verdict: Verdict,
}

/// sr(a_ℓ, M) > m for every ℓ, plus the interpolation certificate of the
/// composed mask (which carries the sm_∞ bound for dilation M^r).
pub fn verify_quasi(spec: &SchemeSpec, m: u32, s_a: &BigRational, opts: VerifyOptions) -> Result<QuasiCertificate> {
    let sum_rules = spec
        .masks
        .iter()
        .map(analysis::sum_rule_order)
        .collect::<Result<Vec<u32>>>()?;
    let sum_rules_ok = sum_rules.iter().all(|&j| j > m);
    let interpolation = interp::verify_interpolatory(&spec.composed, s_a, m, opts)?;
    let verdict = if sum_rules_ok {
        interpolation.verdict.clone()
    } else {
        let worst = sum_rules.iter().enumerate().min_by_key(|(_, &j)| j).map(|(i, &j)| (i + 1, j));
        let (i, j) = worst.expect("non-empty scheme");
        Verdict::Failed {
            reason: format!("sr(a_{i}, M) = {j} does not exceed m = {m}"),
        }
    };
    Ok(QuasiCertificate {
        sum_rules,
        sum_rules_ok,
        interpolation,
        verdict,
    })
}

/// Block-aligned Cauchy differences of scaled j-th differences:
/// level q data d_q = (M^r)^{jq} ∇^j S_a^q v against d_{q+1}(M^r ·).
#[derive(Clone, Debug, PartialEq)]
pub struct CauchyDiagnostic {
    pub deriv: u32,
    /// (q, max_k |d_q(k) − d_{q+1}(M^r k)|).
    pub differences: Vec<(u32, f64)>,
    /// The last three differences, scaled by M^{qr/2}, do not increase.
    pub decaying: bool,
}

pub fn cauchy_diagnostic(spec: &SchemeSpec, v: &FiniteSequence, deriv: u32, q_max: u32) -> Result<CauchyDiagnostic> {
    let big = spec.composed.dilation();
    let bigi = big as i64;
    let r = spec.period() as u32;
    let mut levels: Vec<FiniteSequence> = Vec::new();
    let mut cur = v.clone();
    for q in 0..=q_max + 1 {
        if q > 0 {
            cur = quasi_subdivide(spec, &cur, r)?;
        }
        let scale = (big as f64).powi((deriv * q) as i32);
        levels.push(backward_difference(&cur, deriv).scale(&Scalar::Float(scale)));
    }
    let mut differences = Vec::new();
    for q in 1..=q_max {
        let (coarse, fine) = (&levels[q as usize], &levels[q as usize + 1]);
        let Some((lo, hi)) = coarse.support() else {
            differences.push((q, 0.0));
            continue;
        };
        let d = (lo..=hi)
            .map(|k| (&coarse.at(k) - &fine.at(bigi * k)).abs().to_f64())
            .fold(0.0, f64::max);
        differences.push((q, d));
    }
    let scaled: Vec<f64> = differences
        .iter()
        .map(|&(q, d)| d * (spec.dilation as f64).powf(q as f64 * r as f64 / 2.0))
        .collect();
    let decaying = scaled.len() >= 3
        && scaled[scaled.len() - 3..]
            .windows(2)
            .all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-12);
    Ok(CauchyDiagnostic {
        deriv,
        differences,
        decaying,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::scalar::rat;

    #[test]
    fn single_mask_composes_to_itself() {
        let spec = SchemeSpec::new(vec![Mask::hat()]).unwrap();
        assert_eq!(spec.composed(), &Mask::hat());
        let v = FiniteSequence::from_rationals(0, vec![rat(1, 1), rat(-2, 1), rat(5, 3)]);
        assert_eq!(quasi_subdivide(&spec, &v, 3).unwrap(), seq::subdivide(&Mask::hat(), &v, 3).unwrap());
    }

    #[test]
    fn delta_masks_compose_to_delta() {
        let d = Mask::new(FiniteSequence::delta(), 3).unwrap();
        let spec = SchemeSpec::new(vec![d.clone(), d.clone(), d]).unwrap();
        assert_eq!(spec.composed().seq(), &FiniteSequence::delta());
        assert_eq!(spec.composed().dilation(), 27);
    }

    #[test]
    fn example_pair_composed_mask() {
        let spec = SchemeSpec::new(fixtures::quasi_pair_c1()).unwrap();
        let a = spec.composed();
        assert_eq!(a.dilation(), 4);
        assert_eq!(a.at(0), Scalar::ratio(1, 4));
        let (l, h) = a.support().unwrap();
        assert!(l >= -6 && h <= 6);
        for k in [-1i64, 1] {
            assert!(a.at(4 * k).is_zero());
        }
        assert_eq!(&compose_by_operators(spec.masks()).unwrap(), a);
    }

    #[test]
    fn block_consistency() {
        let spec = SchemeSpec::new(fixtures::quasi_pair_c1()).unwrap();
        let v = FiniteSequence::from_rationals(-1, vec![rat(2, 1), rat(0, 1), rat(-1, 3), rat(7, 5)]);
        let by_blocks = seq::subdivide(spec.composed(), &v, 2).unwrap();
        assert_eq!(quasi_subdivide(&spec, &v, 4).unwrap(), by_blocks);
    }

    #[test]
    fn example_pair_is_verified_for_c1() {
        let spec = SchemeSpec::new(fixtures::quasi_pair_c1()).unwrap();
        let cert = verify_quasi(&spec, 1, &rat(0, 1), VerifyOptions::default()).unwrap();
        assert_eq!(cert.sum_rules, vec![2, 2]);
        assert!(cert.verdict.is_verified(), "{:?}", cert.verdict);
    }

    #[test]
    fn low_sum_rules_fail_the_scheme() {
        let d = Mask::new(FiniteSequence::delta(), 2).unwrap();
        let spec = SchemeSpec::new(vec![Mask::hat(), d]).unwrap();
        let cert = verify_quasi(&spec, 0, &rat(0, 1), VerifyOptions::default()).unwrap();
        assert_eq!(cert.sum_rules, vec![2, 0]);
        assert!(matches!(cert.verdict, Verdict::Failed { .. }));
    }

    #[test]
    fn periodic_hat_inserts_midpoints() {
        let v: Vec<Scalar> = [0, 4, 8, 2].iter().map(|&k| Scalar::from_int(k)).collect();
        let out = subdivide_periodic(&Mask::hat(), &v).unwrap();
        let expect: Vec<Scalar> = [0, 2, 4, 6, 8, 5, 2, 1].iter().map(|&k| Scalar::from_int(k)).collect();
        assert_eq!(out, expect);
    }

    #[test]
    fn periodic_matches_infinite_on_interior() {
        let a = fixtures::binary_seventh();
        let base: Vec<Scalar> = (0..6).map(|k| Scalar::from_int(k * k % 5)).collect();
        let per = subdivide_periodic(&a, &base).unwrap();
        // Three periods of data reproduce the middle period exactly.
        let long: Vec<Scalar> = (0..18).map(|k| base[k % 6].clone()).collect();
        let inf = subdivide_once(&a, &FiniteSequence::new(-6, long));
        for (j, p) in per.iter().enumerate() {
            assert_eq!(&inf.at(j as i64), p);
        }
    }

    #[test]
    fn cauchy_differences_shrink_for_a_verified_scheme() {
        let spec = SchemeSpec::new(fixtures::quasi_pair_c1()).unwrap();
        let v = FiniteSequence::from_rationals(0, vec![rat(0, 1), rat(1, 1), rat(-1, 2), rat(2, 1), rat(1, 4)]);
        // Interpolation makes the undifferentiated data nest exactly.
        let d0 = cauchy_diagnostic(&spec, &v, 0, 4).unwrap();
        assert!(d0.differences.iter().all(|&(_, d)| d == 0.0));
        let d1 = cauchy_diagnostic(&spec, &v, 1, 4).unwrap();
        assert_eq!(d1.differences.len(), 4);
        assert!(d1.differences.windows(2).all(|w| w[1].1 < w[0].1));
        assert!(d1.decaying);
    }

    #[test]
    fn float_pairs_are_two_step_interpolatory() {
        for masks in [fixtures::quasi_pair_c2(), fixtures::quasi_pair_c2_alt()] {
            let spec = SchemeSpec::new(masks).unwrap();
            let v = FiniteSequence::from_f64(-2, &[0.3, -1.0, 2.5, 0.0, 4.0, -0.7]);
            for blocks in 1..=2u32 {
                let out = quasi_subdivide(&spec, &v, 2 * blocks).unwrap();
                let step = 4i64.pow(blocks);
                for k in -2..=3 {
                    assert!((out.at(step * k).to_f64() - v.at(k).to_f64()).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn triple_is_verified_for_c3() {
        let spec = SchemeSpec::new(fixtures::quasi_triple_c3()).unwrap();
        assert_eq!(spec.composed().dilation(), 8);
        let cert = verify_quasi(&spec, 3, &rat(0, 1), VerifyOptions::default()).unwrap();
        assert!(cert.sum_rules.iter().all(|&j| j > 3), "{:?}", cert.sum_rules);
        assert!(cert.verdict.is_verified(), "{:?}", cert.verdict);
    }

    #[test]
    fn hat_determined_range_keeps_corners() {
        let spec = SchemeSpec::new(vec![Mask::hat()]).unwrap();
        assert_eq!(determined_range(&spec, (0, 3), 1), Some((0, 6)));
        assert_eq!(determined_range(&spec, (0, 3), 2), Some((0, 12)));
        let wide = SchemeSpec::new(vec![fixtures::binary_seventh()]).unwrap();
        assert_eq!(determined_range(&wide, (0, 1), 1), Some((0, 1)));
        assert_eq!(determined_range(&wide, (0, 0), 1), None);
    }

    #[test]
    fn parameter_map_tracks_identity_data() {
        let spec = SchemeSpec::new(fixtures::quasi_pair_c1()).unwrap();
        let v = FiniteSequence::from_rationals(0, (0..6).map(|k| rat(k, 1)).collect());
        for n in 1..=3 {
            let out = quasi_subdivide(&spec, &v, n).unwrap();
            let (alpha, beta) = parameter_map(&spec, n);
            let (lo, hi) = determined_range(&spec, (0, 5), n).unwrap();
            for j in lo..=hi {
                assert_eq!(out.at(j), &(&alpha * &Scalar::from_int(j)) + &beta);
            }
        }
    }
}
