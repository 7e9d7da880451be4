//! Sum rules, moments, and smoothness exponents.

use num_complex::Complex64;
use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, Matrix};
use crate::scalar::{rational_to_f64, Scalar};
use crate::seq::{self, check_budget, convolve, FiniteSequence, Mask};

/// Relative remainder tolerance for deciding divisibility of float masks.
pub const FLOAT_DIVISIBILITY_TOL: f64 = 1e-10;

/// ã(z) = (1 + z + … + z^{M−1})^order · b̃(z) with `order` maximal.
#[derive(Clone, Debug, PartialEq)]
pub struct SumRuleFactorization {
    pub order: u32,
    pub quotient: FiniteSequence,
    pub dilation: u64,
}

impl SumRuleFactorization {
    /// Multiplies the factors back together.
    pub fn expand(&self) -> FiniteSequence {
        let p = box_filter(self.dilation);
        let mut acc = self.quotient.clone();
        for _ in 0..self.order {
            acc = convolve(&acc, &p);
        }
        acc
    }
}

/// 1 + z + … + z^{M−1} as a sequence on [0, M−1].
pub fn box_filter(m: u64) -> FiniteSequence {
    FiniteSequence::new(0, vec![Scalar::one(); m as usize])
}

/// Quotient and remainder of dividing by 1 + z + … + z^{M−1}; `None` when
/// the dividend has fewer than M coefficients.
fn divide_by_box(u: &FiniteSequence, m: usize) -> Option<(FiniteSequence, Vec<Scalar>)> {
    let c = u.coeffs();
    if c.len() < m {
        return None;
    }
    let mut r: Vec<Scalar> = c.to_vec();
    let qlen = c.len() - (m - 1);
    let mut q = vec![Scalar::zero(); qlen];
    for i in (0..qlen).rev() {
        let lead = r[i + m - 1].clone();
        if !lead.is_zero() {
            for t in 0..m {
                r[i + t] -= &lead;
            }
        }
        q[i] = lead;
    }
    r.truncate(m - 1);
    Some((FiniteSequence::new(u.start(), q), r))
}

pub fn sum_rule_factorization(a: &Mask) -> Result<SumRuleFactorization> {
    if a.seq().is_zero() {
        return Err(Error::ZeroMask);
    }
    let m = a.dilation() as usize;
    let tol = FLOAT_DIVISIBILITY_TOL * a.seq().norm1_f64();
    let mut b = a.seq().clone();
    let mut order = 0;
    while let Some((q, r)) = divide_by_box(&b, m) {
        let divisible = if b.is_exact() {
            r.iter().all(Scalar::is_zero)
        } else {
            r.iter().all(|x| x.to_f64().abs() <= tol)
        };
        if !divisible || q.is_zero() {
            break;
        }
        b = q;
        order += 1;
    }
    Ok(SumRuleFactorization {
        order,
        quotient: b,
        dilation: a.dilation(),
    })
}

pub fn sum_rule_order(a: &Mask) -> Result<u32> {
    Ok(sum_rule_factorization(a)?.order)
}

fn kpow(k: i64, j: u32) -> Scalar {
    Scalar::Exact(num_traits::pow::Pow::pow(crate::scalar::int(k), j))
}

/// Σ_k p(γ+Mk) a(γ+Mk) = M^{-1} Σ_k p(k) a(k) for monomials of degree < order
/// and every coset γ.
pub fn spatial_sum_rule_check(a: &Mask, order: u32) -> bool {
    let Some((l, h)) = a.support() else {
        return true;
    };
    let m = a.m();
    let inv_m = Scalar::ratio(1, m);
    for j in 0..order {
        let mut total = Scalar::zero();
        let mut scale = 0.0;
        let mut per = vec![Scalar::zero(); m as usize];
        for k in l..=h {
            let t = &kpow(k, j) * &a.at(k);
            scale += t.to_f64().abs();
            per[k.rem_euclid(m) as usize] += &t;
            total += &t;
        }
        let target = &total * &inv_m;
        for s in &per {
            let d = s - &target;
            let ok = if d.is_exact() {
                d.is_zero()
            } else {
                d.to_f64().abs() <= FLOAT_DIVISIBILITY_TOL * scale.max(1.0)
            };
            if !ok {
                return false;
            }
        }
    }
    true
}

/// Σ_k k^j a(k) for j = 0..=jmax.
pub fn moments(a: &Mask, jmax: u32) -> Vec<Scalar> {
    (0..=jmax)
        .map(|j| {
            let mut s = Scalar::zero();
            for (k, c) in a.seq().iter() {
                s += &(&kpow(k, j) * c);
            }
            s
        })
        .collect()
}

/// m_a = Σ k a(k).
pub fn first_moment(a: &Mask) -> Scalar {
    moments(a, 1).pop().expect("two moments")
}

/// s_a = m_a / (M − 1).
pub fn shift_parameter(a: &Mask) -> Scalar {
    first_moment(a) / Scalar::from_int(a.m() - 1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearPhase {
    pub holds: bool,
    /// First j in 0..order whose moment differs from m_a^j.
    pub first_failure: Option<u32>,
    /// Σ k^j a(k) − m_a^j for j = 0..order.
    pub residuals: Vec<Scalar>,
    pub order: u32,
}

/// Σ k^j a(k) = m_a^j for j = 0..sr−1.
pub fn linear_phase_check(a: &Mask) -> Result<LinearPhase> {
    let order = sum_rule_order(a)?;
    Ok(linear_phase_residuals(a, order))
}

pub fn linear_phase_residuals(a: &Mask, order: u32) -> LinearPhase {
    let mom = moments(a, order.max(1));
    let ma = mom[1].clone();
    let tol = 1e-10 * a.seq().norm1_f64().max(1.0);
    let mut residuals = Vec::new();
    let mut first_failure = None;
    for j in 0..order {
        let target = ma.powi(j as i32).expect("nonnegative power");
        let r = &mom[j as usize] - &target;
        let ok = if r.is_exact() {
            r.is_zero()
        } else {
            r.to_f64().abs() <= tol * (1.0 + target.to_f64().abs())
        };
        if !ok && first_failure.is_none() {
            first_failure = Some(j);
        }
        residuals.push(r);
    }
    LinearPhase {
        holds: first_failure.is_none(),
        first_failure,
        residuals,
        order,
    }
}

/// L2 smoothness exponent from the autocorrelation transition matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Sm2 {
    pub value: f64,
    pub lambda_c: Complex64,
    /// λ_c has a nonzero imaginary part.
    pub complex: bool,
    pub order: u32,
}

impl Sm2 {
    pub fn modulus(&self) -> f64 {
        self.lambda_c.norm()
    }
}

pub fn sm2(a: &Mask) -> Result<Sm2> {
    let f = sum_rule_factorization(a)?;
    sm2_from_factorization(&f)
}

pub fn sm2_from_factorization(f: &SumRuleFactorization) -> Result<Sm2> {
    let b = &f.quotient;
    if b.is_zero() {
        return Err(Error::InvalidArgument("degenerate quotient".into()));
    }
    let m = f.dilation as i64;
    let w = b.len() as i64 - 1;
    let c = convolve(b, &b.reverse());
    let size = (2 * w + 1) as usize;
    let mut mat = Matrix::zeros(size, size);
    for (r, j) in (-w..=w).enumerate() {
        for (s, k) in (-w..=w).enumerate() {
            mat.set(r, s, c.at(m * k - j));
        }
    }
    let ev = eigenvalues(&mat);
    let lambda = ev.first().copied().unwrap_or(Complex64::new(0.0, 0.0));
    let modulus = lambda.norm();
    let value = if modulus == 0.0 {
        f64::INFINITY
    } else {
        -0.5 - 0.5 * modulus.ln() / (m as f64).ln()
    };
    Ok(Sm2 {
        value,
        lambda_c: lambda,
        complex: lambda.im.abs() > 1e-12 * modulus.max(1e-300),
        order: f.order,
    })
}

/// Largest coset sum of |S_b^n δ| over γ = 0..M^n−1.
fn coset_sup(b: &FiniteSequence, m: u64, n: u32) -> Result<f64> {
    let mb = Mask::new(b.clone(), m)?;
    let mn = (m as u128).pow(n);
    check_budget(mn)?;
    let v = seq::subdivide(&mb, &FiniteSequence::delta(), n)?;
    let modulus = mn as i64;
    let mut sums = vec![0.0f64; mn as usize];
    for (k, c) in v.iter() {
        sums[k.rem_euclid(modulus) as usize] += c.to_f64().abs();
    }
    Ok(sums.into_iter().fold(0.0, f64::max))
}

/// Certified lower bound −log_M (sup_γ Σ_k |[S_b^n δ](γ + M^n k)|)^{1/n}.
pub fn sminf_lower_bound(a: &Mask, n: u32) -> Result<f64> {
    let f = sum_rule_factorization(a)?;
    sminf_from_factorization(&f, n)
}

pub fn sminf_from_factorization(f: &SumRuleFactorization, n: u32) -> Result<f64> {
    if f.order < 1 {
        return Err(Error::SumRulesRequired);
    }
    if n < 1 {
        return Err(Error::InvalidArgument("level n must be at least 1".into()));
    }
    let sup = coset_sup(&f.quotient, f.dilation, n)?;
    Ok(-(sup.ln() / n as f64) / (f.dilation as f64).ln())
}

/// ‖∇^J S_a^n δ‖_∞^{1/n}, a finite-n estimate of ρ_J(a, M)_∞.
pub fn rho_empirical(a: &Mask, n: u32) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidArgument("level n must be at least 1".into()));
    }
    let j = sum_rule_order(a)?;
    let v = seq::subdivide(a, &FiniteSequence::delta(), n)?;
    let d = seq::backward_difference(&v, j);
    Ok(d.norm_inf().to_f64().powf(1.0 / n as f64))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmoothnessReport {
    pub sr: u32,
    pub sm2: f64,
    pub lambda_c: Complex64,
    pub lambda_c_complex: bool,
    /// (n, coset bound at level n).
    pub sminf_lower: Vec<(u32, f64)>,
    /// (n, empirical ρ_J estimate at level n).
    pub rho_empirical: Vec<(u32, f64)>,
    pub inexact: bool,
    /// Level at which the coset bound hit the resource cap, if any.
    pub resource_limited_at: Option<u32>,
}

impl SmoothnessReport {
    /// max(sm2 − 1/2, max_n coset bound): a certified lower bound on sm_∞.
    pub fn best_bound(&self) -> f64 {
        self.sminf_lower
            .iter()
            .map(|&(_, b)| b)
            .fold(self.sm2 - 0.5, f64::max)
    }

    /// Level achieving the best bound, `None` when sm2 − 1/2 wins.
    pub fn best_level(&self) -> Option<u32> {
        let base = self.sm2 - 0.5;
        self.sminf_lower
            .iter()
            .filter(|&&(_, b)| b > base)
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .map(|&(n, _)| n)
    }
}

/// Report with coset bounds for n = 1..=n_max, stopping early once the best
/// bound exceeds `target` or the resource cap is hit.
pub fn smoothness_report(a: &Mask, n_max: u32, target: Option<f64>) -> Result<SmoothnessReport> {
    a.require_normalized()?;
    let f = sum_rule_factorization(a)?;
    let s = sm2_from_factorization(&f)?;
    let mut report = SmoothnessReport {
        sr: f.order,
        sm2: s.value,
        lambda_c: s.lambda_c,
        lambda_c_complex: s.complex,
        sminf_lower: Vec::new(),
        rho_empirical: Vec::new(),
        inexact: !a.is_exact(),
        resource_limited_at: None,
    };
    if f.order >= 1 {
        for n in 1..=n_max {
            if target.is_some_and(|t| report.best_bound() > t) {
                break;
            }
            match sminf_from_factorization(&f, n) {
                Ok(b) => report.sminf_lower.push((n, b)),
                Err(Error::Resource { .. }) => {
                    report.resource_limited_at = Some(n);
                    break;
                }
                Err(e) => return Err(e),
            }
        }
    }
    let rho_levels = report.sminf_lower.len().max(1) as u32;
    for n in 1..=rho_levels.min(n_max.max(1)) {
        match rho_empirical(a, n) {
            Ok(r) => report.rho_empirical.push((n, r)),
            Err(Error::Resource { .. }) => break,
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}

/// m_a and s_a as exact rationals when the mask is exact.
pub fn exact_shift_parameter(a: &Mask) -> Option<BigRational> {
    shift_parameter(a).as_rational().cloned()
}

pub fn shift_parameter_f64(a: &Mask) -> f64 {
    match shift_parameter(a) {
        Scalar::Exact(r) => rational_to_f64(&r),
        Scalar::Float(x) => x,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    fn mask(start: i64, v: &[(i64, i64)], m: u64) -> Mask {
        Mask::from_rationals(start, v.iter().map(|&(p, q)| rat(p, q)).collect(), m).unwrap()
    }

    fn d7() -> Mask {
        mask(-2, &[(-1, 28), (3, 14), (15, 28), (2, 7)], 2)
    }

    fn ex5_j2() -> Mask {
        mask(-3, &[(-1, 36), (1, 36), (1, 6), (1, 3), (1, 3), (1, 6), (1, 36), (-1, 36)], 3)
    }

    #[test]
    fn hat_factorization() {
        let f = sum_rule_factorization(&Mask::hat()).unwrap();
        assert_eq!(f.order, 2);
        assert_eq!(f.quotient, FiniteSequence::from_rationals(-1, vec![rat(1, 4)]));
        assert_eq!(f.expand(), Mask::hat().seq().clone());
    }

    #[test]
    fn d7_factorization() {
        let f = sum_rule_factorization(&d7()).unwrap();
        assert_eq!(f.order, 2);
        assert_eq!(f.quotient, FiniteSequence::from_rationals(-2, vec![rat(-1, 28), rat(2, 7)]));
    }

    #[test]
    fn ex5_order() {
        assert_eq!(sum_rule_order(&ex5_j2()).unwrap(), 2);
    }

    #[test]
    fn zero_mask_rejected() {
        let z = Mask::new(FiniteSequence::zero(), 2).unwrap();
        assert_eq!(sum_rule_factorization(&z), Err(Error::ZeroMask));
    }

    #[test]
    fn spatial_form_on_hat_and_delta() {
        assert!(spatial_sum_rule_check(&Mask::hat(), 2));
        assert!(!spatial_sum_rule_check(&Mask::hat(), 3));
        let d = Mask::new(FiniteSequence::delta(), 3).unwrap();
        assert!(spatial_sum_rule_check(&d, 0));
        assert!(!spatial_sum_rule_check(&d, 1));
    }

    #[test]
    fn moments_and_shift() {
        assert_eq!(first_moment(&d7()), Scalar::ratio(1, 7));
        assert_eq!(shift_parameter(&d7()), Scalar::ratio(1, 7));
        assert_eq!(shift_parameter(&Mask::hat()), Scalar::zero());
        assert_eq!(shift_parameter(&ex5_j2()), Scalar::ratio(1, 4));
        assert_eq!(moments(&d7(), 2)[2], Scalar::ratio(5, 14));
    }

    #[test]
    fn linear_phase_range() {
        let lp = linear_phase_check(&d7()).unwrap();
        assert!(lp.holds);
        assert_eq!(lp.residuals.len(), 2);
        let beyond = linear_phase_residuals(&d7(), 3);
        assert_eq!(beyond.first_failure, Some(2));
        assert!(linear_phase_check(&Mask::hat()).unwrap().holds);
    }

    #[test]
    fn sm2_values() {
        let h = sm2(&Mask::hat()).unwrap();
        assert!((h.value - 1.5).abs() < 1e-12);
        assert!((h.lambda_c.re - 1.0 / 16.0).abs() < 1e-15);
        assert!((sm2(&d7()).unwrap().value - 1.29617).abs() < 1e-5);
        assert!((sm2(&ex5_j2()).unwrap().value - 1.393267).abs() < 1e-6);
    }

    #[test]
    fn hat_coset_bound_level_one() {
        assert!((sminf_lower_bound(&Mask::hat(), 1).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn coset_bound_needs_sum_rules() {
        let d = Mask::new(FiniteSequence::delta(), 2).unwrap();
        assert_eq!(sminf_lower_bound(&d, 1), Err(Error::SumRulesRequired));
    }

    #[test]
    fn empirical_rates() {
        let r = rho_empirical(&Mask::hat(), 12).unwrap();
        assert!((r - 0.5).abs() < 0.05);
        let d = Mask::new(FiniteSequence::delta(), 2).unwrap();
        assert!((rho_empirical(&d, 5).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn report_keeps_best_bound() {
        let rep = smoothness_report(&Mask::hat(), 3, None).unwrap();
        assert_eq!(rep.sr, 2);
        assert!((rep.best_bound() - 1.0).abs() < 1e-12);
        assert!(rep.sm2 <= rep.sr as f64 + 1e-9);
    }
}
