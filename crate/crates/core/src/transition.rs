//! Shifted transition operators and exact evaluation of refinable functions.
//!
//! `[T v](n) = M Σ_k a(k) v(γ + M n − k)`. Restricted to sequences supported
//! on Z ∩ [(l − γ)/(M − 1), (h − γ)/(M − 1)], it is a finite matrix whose
//! eigenvectors with nonzero eigenvalue carry samples of φ.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::ToPrimitive;

use crate::analysis;
use crate::error::{Error, Result};
use crate::interp::admissible_params;
use crate::linalg::{eigenvalues, least_squares, Matrix};
use crate::scalar::Scalar;
use crate::seq::{self, convolve, FiniteSequence, Mask};

/// Cluster radius for counting float eigenvalues equal to 1.
pub const FLOAT_EIGEN_CLUSTER_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix {
    pub dilation: u64,
    pub gamma: i64,
    /// Inclusive index range; `None` when empty.
    pub range: Option<(i64, i64)>,
    pub entries: Matrix,
}

impl TransitionMatrix {
    pub fn size(&self) -> usize {
        self.entries.rows()
    }

    pub fn is_exact(&self) -> bool {
        self.entries.is_exact()
    }

    /// Applies the matrix to `v` restricted to the index range.
    pub fn apply(&self, v: &FiniteSequence) -> FiniteSequence {
        let Some((lo, hi)) = self.range else {
            return FiniteSequence::zero();
        };
        FiniteSequence::new(lo, self.entries.mul_vec(&v.window(lo, hi)))
    }
}

fn ceil_div(a: i64, b: i64) -> i64 {
    Integer::div_ceil(&a, &b)
}

/// Z ∩ [(l − γ)/(M − 1), (h − γ)/(M − 1)].
pub fn index_range(support: (i64, i64), m: i64, gamma: i64) -> Option<(i64, i64)> {
    let lo = ceil_div(support.0 - gamma, m - 1);
    let hi = (support.1 - gamma).div_euclid(m - 1);
    (lo <= hi).then_some((lo, hi))
}

pub fn transition_matrix(a: &Mask, gamma: i64) -> Result<TransitionMatrix> {
    let support = a.nonzero_support()?;
    let m = a.m();
    let range = index_range(support, m, gamma);
    let size = range.map_or(0, |(lo, hi)| (hi - lo + 1) as usize);
    seq::check_budget((size * size) as u128)?;
    let mut entries = Matrix::zeros(size, size);
    if let Some((lo, _)) = range {
        let mm = Scalar::from_int(m);
        for r in 0..size {
            for c in 0..size {
                let n = lo + r as i64;
                let k = lo + c as i64;
                let v = a.at(gamma + m * n - k);
                if !v.is_zero() {
                    entries.set(r, c, &mm * &v);
                }
            }
        }
    }
    Ok(TransitionMatrix {
        dilation: a.dilation(),
        gamma,
        range,
        entries,
    })
}

/// The operator itself on an arbitrary finitely supported `v`.
pub fn transition_apply(a: &Mask, gamma: i64, v: &FiniteSequence) -> FiniteSequence {
    let (Some((la, ha)), Some((lv, hv))) = (a.support(), v.support()) else {
        return FiniteSequence::zero();
    };
    let m = a.m();
    let lo = ceil_div(lv + la - gamma, m);
    let hi = (hv + ha - gamma).div_euclid(m);
    if lo > hi {
        return FiniteSequence::zero();
    }
    let mm = Scalar::from_int(m);
    let out = (lo..=hi)
        .map(|n| {
            let mut s = Scalar::zero();
            for (k, c) in a.seq().iter() {
                let x = v.at(gamma + m * n - k);
                if !x.is_zero() {
                    s += &(c * &x);
                }
            }
            &s * &mm
        })
        .collect();
    FiniteSequence::new(lo, out)
}

pub fn spectrum(t: &TransitionMatrix) -> Vec<Complex64> {
    eigenvalues(&t.entries)
}

/// Eigenvector for eigenvalue 1 normalized to unit sum; 1 must be simple.
pub fn unit_eigenvector(t: &TransitionMatrix) -> Result<FiniteSequence> {
    let Some((lo, _)) = t.range else {
        return Err(Error::NoUnitEigenvalue);
    };
    let n = t.size();
    if t.is_exact() {
        let shifted = t.entries.shifted(&Scalar::one());
        let rank = shifted.rank();
        if rank == n {
            return Err(Error::NoUnitEigenvalue);
        }
        if rank + 1 < n || shifted.mul(&shifted).rank() + 1 != n {
            return Err(Error::UnitEigenvalueNotSimple);
        }
        let v = shifted.nullspace().pop().expect("one-dimensional nullspace");
        let mut sum = Scalar::zero();
        for x in &v {
            sum += x;
        }
        if sum.is_zero() {
            return Err(Error::EigenvectorNotNormalizable);
        }
        return Ok(FiniteSequence::new(lo, v.into_iter().map(|x| x / &sum).collect()));
    }
    let ev = eigenvalues(&t.entries);
    let near = ev
        .iter()
        .filter(|z| (*z - Complex64::new(1.0, 0.0)).norm() < FLOAT_EIGEN_CLUSTER_TOL)
        .count();
    match near {
        0 => return Err(Error::NoUnitEigenvalue),
        1 => {}
        _ => return Err(Error::UnitEigenvalueNotSimple),
    }
    let mut aug = nalgebra::DMatrix::<f64>::zeros(n + 1, n);
    let d = t.entries.to_dmatrix();
    for i in 0..n {
        for j in 0..n {
            aug[(i, j)] = d[(i, j)] - if i == j { 1.0 } else { 0.0 };
        }
        aug[(n, i)] = 1.0;
    }
    let mut rhs = vec![0.0; n + 1];
    rhs[n] = 1.0;
    let v = least_squares(&aug, &rhs).ok_or(Error::EigenvectorNotNormalizable)?;
    let resid = (&aug * nalgebra::DVector::from_column_slice(&v)) - nalgebra::DVector::from_column_slice(&rhs);
    let scale = d.iter().map(|x| x.abs()).fold(1.0, f64::max);
    if resid.amax() > 1e-8 * scale {
        return Err(Error::EigenvectorNotNormalizable);
    }
    Ok(FiniteSequence::from_f64(lo, &v))
}

/// Integer samples w(k) = φ(k) and whether sm_∞ > 0 is certified.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegerSamples {
    pub values: FiniteSequence,
    pub verified: bool,
}

/// Levels tried for the positivity certificate behind integer samples.
const SAMPLE_EVIDENCE_LEVELS: u32 = 3;

pub fn integer_samples(a: &Mask) -> Result<IntegerSamples> {
    let f = analysis::sum_rule_factorization(a)?;
    if f.order < 1 {
        return Err(Error::SumRulesRequired);
    }
    let values = unit_eigenvector(&transition_matrix(a, 0)?)?;
    let mut best = analysis::sm2_from_factorization(&f).map_or(f64::NEG_INFINITY, |s| s.value - 0.5);
    for n in 1..=SAMPLE_EVIDENCE_LEVELS {
        if best > 0.0 {
            break;
        }
        match analysis::sminf_from_factorization(&f, n) {
            Ok(b) => best = best.max(b),
            Err(Error::Resource { .. }) => break,
            Err(e) => return Err(e),
        }
    }
    Ok(IntegerSamples {
        values,
        verified: best > 0.0,
    })
}

pub fn pow_checked(m: u64, e: u32) -> Result<u64> {
    m.checked_pow(e)
        .filter(|&v| v <= i64::MAX as u64)
        .ok_or_else(|| Error::InvalidArgument(format!("{m}^{e} overflows")))
}

pub fn bigint_to_i64(x: &BigInt) -> Result<i64> {
    x.to_i64()
        .ok_or_else(|| Error::InvalidArgument(format!("{x} does not fit in 64 bits")))
}

/// A_n as a mask with dilation M^n.
pub fn iterated_as_mask(a: &Mask, n: u32) -> Result<Mask> {
    Mask::new(seq::iterated_mask(a, n)?, pow_checked(a.dilation(), n)?)
}

/// φ(s) for s with M^{m_s}(M^{n_s} − 1)s ∈ Z.
pub fn eval_phi(a: &Mask, s: &BigRational) -> Result<Scalar> {
    let adm = admissible_params(s, a.dilation())?;
    let gamma = bigint_to_i64(&adm.gamma)?;
    let big = iterated_as_mask(a, adm.n_s)?;
    let v = unit_eigenvector(&transition_matrix(&big, gamma)?)?;
    let am = seq::iterated_mask(a, adm.m_s)?;
    let scale = Scalar::from_int(pow_checked(a.dilation(), adm.m_s)? as i64);
    Ok(&convolve(&am, &v).at(0) * &scale)
}

/// φ (or a scaled difference quotient of it) on the grid M^{−n} Z.
#[derive(Clone, Debug, PartialEq)]
pub struct PhiSamples {
    pub level: u32,
    pub deriv: u32,
    pub dilation: u64,
    /// Entry k is the value at x = k / M^level.
    pub values: FiniteSequence,
    pub verified: bool,
}

impl PhiSamples {
    pub fn x(&self, k: i64) -> BigRational {
        let den = BigInt::from(self.dilation).pow(self.level);
        BigRational::new(BigInt::from(k), den)
    }

    pub fn step(&self) -> i64 {
        (self.dilation as i64).pow(self.level)
    }

    pub fn is_exact(&self) -> bool {
        self.values.is_exact()
    }

    /// Value at a grid point, `None` when x is not on the grid.
    pub fn value_at(&self, x: &BigRational) -> Option<Scalar> {
        let scaled = x * BigRational::from_integer(BigInt::from(self.step()));
        scaled.is_integer().then(|| self.values.at(scaled.to_integer().to_i64().unwrap_or(i64::MAX)))
    }
}

/// φ(M^{−n} k) = M^n [A_n * w](k); for j ≥ 1 the grid values are replaced
/// by M^{jn} ∇^j of them.
pub fn sample_phi_grid(a: &Mask, n: u32, deriv: u32) -> Result<PhiSamples> {
    let w = integer_samples(a)?;
    let an = seq::iterated_mask(a, n)?;
    let mn = pow_checked(a.dilation(), n)? as i64;
    let mut values = convolve(&an, &w.values).scale(&Scalar::from_int(mn));
    if deriv > 0 {
        let factor = Scalar::from_int(mn).powi(deriv as i32)?;
        values = seq::backward_difference(&values, deriv).scale(&factor);
    }
    Ok(PhiSamples {
        level: n,
        deriv,
        dilation: a.dilation(),
        values,
        verified: w.verified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::scalar::rat;

    fn q(p: i64, d: i64) -> Scalar {
        Scalar::ratio(p, d)
    }

    #[test]
    fn hat_matrix_gamma_zero() {
        let t = transition_matrix(&Mask::hat(), 0).unwrap();
        assert_eq!(t.range, Some((-1, 1)));
        let z = q(0, 1);
        let expect = Matrix::from_rows(vec![
            vec![q(1, 2), z.clone(), z.clone()],
            vec![q(1, 2), q(1, 1), q(1, 2)],
            vec![z.clone(), z.clone(), q(1, 2)],
        ]);
        assert_eq!(t.entries, expect);
    }

    #[test]
    fn hat_matrix_gamma_one() {
        let t = transition_matrix(&Mask::hat(), 1).unwrap();
        assert_eq!(t.range, Some((-2, 0)));
        assert_eq!(unit_eigenvector(&t).unwrap(), FiniteSequence::delta_at(-1));
    }

    #[test]
    fn hat_spectrum() {
        let ev = spectrum(&transition_matrix(&Mask::hat(), 0).unwrap());
        let re: Vec<f64> = ev.iter().map(|z| z.re).collect();
        assert!((re[0] - 1.0).abs() < 1e-12 && (re[1] - 0.5).abs() < 1e-12 && (re[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn matrix_matches_operator() {
        let a = fixtures::binary_seventh();
        for gamma in -2..3 {
            let t = transition_matrix(&a, gamma).unwrap();
            let (lo, hi) = t.range.unwrap();
            let v = FiniteSequence::new(lo, (lo..=hi).map(|k| q(k * k - 3, 5)).collect());
            let direct = transition_apply(&a, gamma, &v);
            assert_eq!(t.apply(&v), direct.restrict(lo, hi));
        }
    }

    #[test]
    fn integer_samples_of_hat_and_ternary() {
        assert_eq!(integer_samples(&Mask::hat()).unwrap().values, FiniteSequence::delta());
        let w = integer_samples(&fixtures::ternary_quarter_j2()).unwrap();
        let (l, h) = w.values.support().unwrap();
        assert!(l >= -1 && h <= 1);
        assert_eq!(w.values.sum(), Scalar::one());
        assert!(w.verified);
    }

    #[test]
    fn integer_samples_require_sum_rules() {
        let d = Mask::new(FiniteSequence::delta(), 2).unwrap();
        assert_eq!(integer_samples(&d), Err(Error::SumRulesRequired));
    }

    #[test]
    fn eval_phi_on_hat() {
        assert_eq!(eval_phi(&Mask::hat(), &rat(1, 2)).unwrap(), q(1, 2));
        assert_eq!(eval_phi(&Mask::hat(), &rat(1, 3)).unwrap(), q(2, 3));
        assert_eq!(eval_phi(&Mask::hat(), &rat(-5, 4)).unwrap(), q(0, 1));
    }

    #[test]
    fn eval_phi_interpolates_at_shift() {
        let a = fixtures::binary_third_family(&rat(0, 1));
        assert_eq!(eval_phi(&a, &rat(1, 3)).unwrap(), q(1, 1));
        assert_eq!(eval_phi(&a, &rat(4, 3)).unwrap(), q(0, 1));
        assert_eq!(eval_phi(&a, &rat(-2, 3)).unwrap(), q(0, 1));
    }

    #[test]
    fn hat_grid_level_one() {
        let s = sample_phi_grid(&Mask::hat(), 1, 0).unwrap();
        assert_eq!(s.values, FiniteSequence::new(-1, vec![q(1, 2), q(1, 1), q(1, 2)]));
        assert_eq!(s.value_at(&rat(1, 2)), Some(q(1, 2)));
        let d = sample_phi_grid(&Mask::hat(), 3, 1).unwrap();
        assert_eq!(d.values.norm_inf(), q(1, 1));
    }
}
