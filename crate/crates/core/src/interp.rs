//! Admissible shifts and certificates for s_a-interpolating refinable functions.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed};

use crate::analysis::{self, SmoothnessReport};
use crate::error::{Error, Result};
use crate::scalar::{int, Scalar};
use crate::seq::{self, convolve, FiniteSequence, Mask};
use crate::transition::{self, bigint_to_i64, pow_checked, transition_matrix, unit_eigenvector};

/// Search bound on both m_s and n_s.
pub const MAX_ADMISSIBILITY_EXPONENT: u32 = 32;

/// Relative tolerance for identity residuals of float masks.
pub const FLOAT_RESIDUAL_TOL: f64 = 1e-10;

/// Default number of levels tried for the coset smoothness bound.
pub const DEFAULT_LEVELS: u32 = 5;

/// Minimal (m_s, n_s) with γ = M^{m_s}(M^{n_s} − 1) s_a integral.
#[derive(Clone, Debug, PartialEq)]
pub struct Admissibility {
    pub s_a: BigRational,
    pub m_s: u32,
    pub n_s: u32,
    pub gamma: BigInt,
}

pub fn admissible_params(s_a: &BigRational, m: u64) -> Result<Admissibility> {
    if m < 2 {
        return Err(Error::InvalidDilation(m));
    }
    let big_m = BigInt::from(m);
    for m_s in 0..=MAX_ADMISSIBILITY_EXPONENT {
        let outer = big_m.pow(m_s);
        for n_s in 1..=MAX_ADMISSIBILITY_EXPONENT {
            let factor = &outer * (big_m.pow(n_s) - BigInt::one());
            let g = s_a * BigRational::from_integer(factor);
            if g.is_integer() {
                return Ok(Admissibility {
                    s_a: s_a.clone(),
                    m_s,
                    n_s,
                    gamma: g.to_integer(),
                });
            }
        }
    }
    Err(Error::NotAdmissible(format!("s = {s_a} with M = {m}")))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Verified { m: u32 },
    /// Identities hold but the best certified bound does not exceed m.
    Unconfirmed { best_bound: f64, level: Option<u32> },
    Failed { reason: String },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Verified { .. } => "verified",
            Verdict::Unconfirmed { .. } => "identities-hold-smoothness-unconfirmed",
            Verdict::Failed { .. } => "failed",
        }
    }

    pub fn is_verified(&self) -> bool {
        matches!(self, Verdict::Verified { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InterpolationCertificate {
    pub admissibility: Admissibility,
    pub target: u32,
    /// Samples w(k) = φ(M^{m_s} s_a + k); δ when m_s = 0.
    pub w: FiniteSequence,
    /// Integers strictly inside (l_a/(M−1) − M^{m_s}s_a, h_a/(M−1) − M^{m_s}s_a).
    pub support_window: Option<(i64, i64)>,
    /// [A_{m_s} * w](M^{m_s}k) − M^{−m_s}δ(k), maximum modulus.
    pub residual_coarse: Option<Scalar>,
    /// [A_{n_s} * w](γ + M^{n_s}k) − M^{−n_s}w(k), maximum modulus.
    pub residual_refine: Option<Scalar>,
    /// A_{n_s}(γ + M^{n_s}k) − M^{−n_s}δ(k), maximum modulus (m_s = 0 only).
    pub residual_direct: Option<Scalar>,
    /// Acceptance threshold for float residuals; 0 for exact masks.
    pub tolerance: f64,
    pub smoothness: Option<SmoothnessReport>,
    pub verdict: Verdict,
}

#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    pub max_level: u32,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            max_level: DEFAULT_LEVELS,
        }
    }
}

fn within(r: &Scalar, tol: f64) -> bool {
    if r.is_exact() {
        r.is_zero()
    } else {
        r.to_f64().abs() <= tol
    }
}

/// max_k |u(offset + step·k) − c·e(k)| over every k where either side is nonzero.
fn strided_residual(u: &FiniteSequence, offset: i64, step: i64, c: &Scalar, e: &FiniteSequence) -> Scalar {
    let mut ks: Vec<i64> = Vec::new();
    if let Some((l, h)) = u.support() {
        ks.push(Integer::div_floor(&(l - offset), &step));
        ks.push(Integer::div_ceil(&(h - offset), &step));
    }
    if let Some((l, h)) = e.support() {
        ks.push(l);
        ks.push(h);
    }
    let (Some(&lo), Some(&hi)) = (ks.iter().min(), ks.iter().max()) else {
        return Scalar::zero();
    };
    let diffs: Vec<Scalar> = (lo..=hi)
        .map(|k| u.at(offset + step * k) - c * &e.at(k))
        .collect();
    Scalar::max_abs(diffs.iter())
}

fn open_window(a: &Mask, adm: &Admissibility) -> Result<Option<(i64, i64)>> {
    let (l, h) = a.nonzero_support()?;
    let m1 = int(a.m() - 1);
    let shift = &adm.s_a * BigRational::from_integer(BigInt::from(a.dilation()).pow(adm.m_s));
    let lo_r = int(l) / &m1 - &shift;
    let hi_r = int(h) / &m1 - &shift;
    let lo = bigint_to_i64(&(lo_r.floor().to_integer() + 1))?;
    let hi = bigint_to_i64(&(hi_r.ceil().to_integer() - 1))?;
    Ok((lo <= hi).then_some((lo, hi)))
}

pub fn verify_interpolatory(a: &Mask, s_a: &BigRational, m: u32, opts: VerifyOptions) -> Result<InterpolationCertificate> {
    a.require_normalized()?;
    let adm = admissible_params(s_a, a.dilation())?;
    let gamma = bigint_to_i64(&adm.gamma)?;
    let an = seq::iterated_mask(a, adm.n_s)?;
    let mn = pow_checked(a.dilation(), adm.n_s)? as i64;
    let tolerance = if a.is_exact() {
        0.0
    } else {
        FLOAT_RESIDUAL_TOL * an.norm1_f64()
    };
    let mut cert = InterpolationCertificate {
        admissibility: adm.clone(),
        target: m,
        w: FiniteSequence::delta(),
        support_window: open_window(a, &adm)?,
        residual_coarse: None,
        residual_refine: None,
        residual_direct: None,
        tolerance,
        smoothness: None,
        verdict: Verdict::Failed {
            reason: "not evaluated".into(),
        },
    };
    let inv_mn = Scalar::ratio(1, mn);
    let identities_hold = if adm.m_s == 0 {
        let r = strided_residual(&an, gamma, mn, &inv_mn, &FiniteSequence::delta());
        let ok = within(&r, tolerance);
        cert.residual_direct = Some(r);
        ok
    } else {
        let big = Mask::new(an.clone(), mn as u64)?;
        let w = match transition_matrix(&big, gamma).and_then(|t| unit_eigenvector(&t)) {
            Ok(w) => w,
            Err(e) => {
                cert.verdict = Verdict::Failed { reason: e.to_string() };
                return Ok(cert);
            }
        };
        cert.w = w.clone();
        let inside = match (w.support(), cert.support_window) {
            (None, _) => true,
            (Some((l, h)), Some((lo, hi))) => lo <= l && h <= hi,
            (Some(_), None) => false,
        };
        if !inside {
            cert.verdict = Verdict::Failed {
                reason: "eigenvector support leaves the open window".into(),
            };
            return Ok(cert);
        }
        let mm = pow_checked(a.dilation(), adm.m_s)? as i64;
        let am = seq::iterated_mask(a, adm.m_s)?;
        let coarse = strided_residual(&convolve(&am, &w), 0, mm, &Scalar::ratio(1, mm), &FiniteSequence::delta());
        let refine = strided_residual(&convolve(&an, &w), gamma, mn, &inv_mn, &w);
        let ok = within(&coarse, tolerance) && within(&refine, tolerance);
        cert.residual_coarse = Some(coarse);
        cert.residual_refine = Some(refine);
        ok
    };
    if !identities_hold {
        cert.verdict = Verdict::Failed {
            reason: "interpolation identities do not hold".into(),
        };
        return Ok(cert);
    }
    let report = analysis::smoothness_report(a, opts.max_level, Some(m as f64))?;
    let best = report.best_bound();
    cert.verdict = if best > m as f64 {
        Verdict::Verified { m }
    } else {
        Verdict::Unconfirmed {
            best_bound: best,
            level: report.best_level(),
        }
    };
    cert.smoothness = Some(report);
    Ok(cert)
}

/// [S^{q n_s} v]((M^{q n_s} − 1)s_a + M^{q n_s}k) = v(k) for all k.
pub fn ns_step_check(a: &Mask, s_a: &BigRational, v: &FiniteSequence, q: u32) -> Result<bool> {
    let adm = admissible_params(s_a, a.dilation())?;
    if adm.m_s != 0 {
        return Err(Error::InvalidArgument(format!(
            "shift {s_a} needs m_s = {} > 0",
            adm.m_s
        )));
    }
    let steps = q * adm.n_s;
    let big = pow_checked(a.dilation(), steps)? as i64;
    let offset = s_a * int(big - 1);
    if !offset.is_integer() {
        return Ok(false);
    }
    let offset = bigint_to_i64(&offset.to_integer())?;
    let u = seq::subdivide(a, v, steps)?;
    let r = strided_residual(&u, offset, big, &Scalar::one(), v);
    let tol = FLOAT_RESIDUAL_TOL * v.norm1_f64().max(1.0) * a.seq().norm1_f64().powi(steps as i32);
    Ok(within(&r, tol))
}

/// Whether S^n p = p(M^{−n}(s_a + ·) − s_a) for every monomial p of degree ≤ d,
/// on a boundary-trimmed window.
pub fn polynomial_reproduction_check(a: &Mask, degree: u32, n: u32) -> Result<bool> {
    let order = analysis::sum_rule_order(a)?;
    if degree >= order {
        return Err(Error::InvalidArgument(format!(
            "degree {degree} is not below the sum rule order {order}"
        )));
    }
    let (l, h) = a.nonzero_support()?;
    let m = a.m();
    let width = h - l;
    let half = 4 * width.max(1) + 4;
    let s_a = analysis::shift_parameter(a);
    let mn = pow_checked(a.dilation(), n)? as i64;
    let inv = Scalar::ratio(1, mn);
    for j in 0..=degree {
        let v = seq::monomial_window(j, -half, half);
        let u = seq::subdivide(a, &v, n)?;
        let (mut lo, mut hi) = (-half, half);
        for _ in 0..n {
            lo = m * lo + h;
            hi = m * hi + l;
        }
        if lo > hi {
            return Err(Error::InvalidArgument("window too small".into()));
        }
        for k in lo..=hi {
            let x = &(&inv * &(&s_a + &Scalar::from_int(k))) - &s_a;
            let expect = x.powi(j as i32)?;
            let got = u.at(k);
            let d = &got - &expect;
            let ok = if d.is_exact() {
                d.is_zero()
            } else {
                d.to_f64().abs() <= 1e-8 * (1.0 + expect.to_f64().abs())
            };
            if !ok {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Σ_k k^j φ(x + k) = (s_a − x)^j at every grid point of level n, j < sr.
pub fn prop21_phi_check(a: &Mask, s_a: &BigRational, n: u32) -> Result<bool> {
    let order = analysis::sum_rule_order(a)?;
    let samples = transition::sample_phi_grid(a, n, 0)?;
    let step = samples.step();
    let exact = samples.is_exact();
    for i in 0..step {
        let x = samples.x(i);
        // φ(x + k) is entry i + k·step.
        let Some((l, h)) = samples.values.support() else {
            return Ok(false);
        };
        let k_lo = Integer::div_floor(&(l - i), &step);
        let k_hi = Integer::div_ceil(&(h - i), &step);
        for j in 0..order {
            let mut sum = Scalar::zero();
            for k in k_lo..=k_hi {
                let v = samples.values.at(i + k * step);
                if !v.is_zero() {
                    sum += &(&Scalar::from(num_traits::pow::Pow::pow(int(k), j)) * &v);
                }
            }
            let target = num_traits::pow::Pow::pow(s_a - &x, j);
            let ok = if exact {
                sum == Scalar::Exact(target)
            } else {
                (sum.to_f64() - crate::scalar::rational_to_f64(&target)).abs()
                    <= 1e-8 * (1.0 + crate::scalar::rational_to_f64(&target.abs()))
            };
            if !ok {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Rational s_a of a mask: exact moments, or a snapped float moment.
pub fn mask_shift(a: &Mask) -> Option<BigRational> {
    match analysis::shift_parameter(a) {
        Scalar::Exact(r) => Some(r),
        Scalar::Float(x) => crate::rationalize::snap(x, 1_000_000, 1e-9),
    }
}
