//! Randomized identities for sequences, sum rules, transition operators,
//! polynomial reproduction and refinable-function samples. Every oracle is
//! computed here from first principles, not through the routine under test.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;
use subdivkit::analysis::{self, box_filter};
use subdivkit::construct::{self, ConstructionSpec};
use subdivkit::interp;
use subdivkit::linalg::Matrix;
use subdivkit::quasistat::{self, SchemeSpec};
use subdivkit::scalar::rat;
use subdivkit::seq::{self, convolve, upsample, FiniteSequence};
use subdivkit::transition::{self, transition_matrix};
use subdivkit::{Mask, Scalar};

const CASES: u32 = 256;

fn small_rational() -> impl Strategy<Value = BigRational> {
    (-9i64..=9, 1i64..=9).prop_map(|(p, q)| rat(p, q))
}

fn nonzero_rational() -> impl Strategy<Value = BigRational> {
    small_rational().prop_filter("nonzero", |r| !r.is_zero())
}

fn sequence(max_len: usize) -> impl Strategy<Value = FiniteSequence> {
    (-3i64..=3, prop::collection::vec(small_rational(), 1..=max_len))
        .prop_map(|(start, c)| FiniteSequence::from_rationals(start, c))
        .prop_filter("nonzero", |u| !u.is_zero())
}

fn power(u: &FiniteSequence, j: u32) -> FiniteSequence {
    (0..j).fold(FiniteSequence::delta(), |acc, _| convolve(&acc, u))
}

fn exact(s: &Scalar) -> BigRational {
    s.as_rational().expect("exact").clone()
}

fn max_abs(u: &FiniteSequence) -> BigRational {
    u.coeffs().iter().map(|c| exact(c).abs()).max().unwrap_or_else(BigRational::zero)
}

fn trace(m: &Matrix) -> BigRational {
    (0..m.rows()).map(|i| exact(m.get(i, i))).sum()
}

fn pow_rat(x: &BigRational, e: u32) -> BigRational {
    (0..e).fold(BigRational::one(), |acc, _| acc * x)
}

/// A random exact mask with J sum rules and linear-phase moments through
/// J − 1 for the shift s_a, or `None` when the moment system has no solution.
fn linear_phase_member(m: u64, j: u32, lo: i64, extra: i64, s_a: BigRational, theta: &[BigRational]) -> Option<Mask> {
    let hi = lo + (m as i64 - 1) * j as i64 + extra;
    let spec = ConstructionSpec::new(m, j, (lo, hi), s_a);
    let model = construct::solve_moment_constraints(&construct::parameterize(&spec).ok()?, &spec).ok()?;
    let x: Vec<BigRational> = theta.iter().cycle().take(model.dim()).cloned().collect();
    let a = Mask::new(model.sequence(&x), m).ok()?;
    a.support().is_some().then_some(a)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn convolution_is_symbol_multiplication(u in sequence(6), v in sequence(6), z in nonzero_rational(), m in 2i64..=4) {
        let z = Scalar::Exact(z);
        let uv = convolve(&u, &v);
        prop_assert_eq!(uv.symbol_at(&z).unwrap(), &u.symbol_at(&z).unwrap() * &v.symbol_at(&z).unwrap());
        let up = upsample(&u, m).unwrap();
        prop_assert_eq!(up.symbol_at(&z).unwrap(), u.symbol_at(&z.powi(m as i32).unwrap()).unwrap());
    }

    #[test]
    fn sum_rule_factorization_roundtrip(b in sequence(5), m in 2u64..=4, j in 0u32..=3) {
        let a = convolve(&power(&box_filter(m), j), &b);
        let f = analysis::sum_rule_factorization(&Mask::new(a.clone(), m).unwrap()).unwrap();
        prop_assert!(f.order >= j);
        prop_assert_eq!(f.expand(), a);
        // The quotient has no further factor: some M-th root of unity other
        // than 1 is not a root, i.e. its coset sums differ.
        let q = &f.quotient;
        let sums: Vec<BigRational> = (0..m as i64)
            .map(|r| q.iter().filter(|(k, _)| k.rem_euclid(m as i64) == r).map(|(_, c)| exact(c)).sum())
            .collect();
        prop_assert!(sums.iter().any(|s| s != &sums[0]));
    }

    #[test]
    fn spatial_and_symbol_sum_rules_agree(b in sequence(5), m in 2u64..=4, j in 0u32..=3, order in 0u32..=5) {
        let a = Mask::new(convolve(&power(&box_filter(m), j), &b), m).unwrap();
        let sr = analysis::sum_rule_order(&a).unwrap();
        prop_assert_eq!(analysis::spatial_sum_rule_check(&a, order), sr >= order);
    }

    /// Traces of all powers agree, so the nonzero eigenvalues of T_a are those
    /// of T_b together with ã(1)M^{−j}, j < J, with multiplicity.
    #[test]
    fn spectrum_splits_off_sum_rule_eigenvalues(b in sequence(4), m in 2u64..=3, j in 1u32..=2, gamma in -3i64..=3) {
        let a = Mask::new(convolve(&power(&box_filter(m), j), &b), m).unwrap();
        let bm = Mask::new(b.clone(), m).unwrap();
        let ta = transition_matrix(&a, gamma).unwrap();
        let tb = transition_matrix(&bm, gamma).unwrap();
        prop_assert_eq!(ta.size(), tb.size() + j as usize);
        let a1 = exact(&a.sum());
        let inv_m = rat(1, m as i64);
        let (mut pa, mut pb) = (ta.entries.clone(), tb.entries.clone());
        for k in 1..=ta.size() as u32 {
            let mut expect: BigRational = (0..j).map(|i| pow_rat(&(&a1 * pow_rat(&inv_m, i)), k)).sum();
            if tb.size() > 0 {
                expect += trace(&pb);
                pb = pb.mul(&tb.entries);
            }
            prop_assert_eq!(trace(&pa), expect, "power {}", k);
            pa = pa.mul(&ta.entries);
        }
    }

    /// 2^{−J} N^{−J} ‖B_n * u‖ ≤ ‖∇^J (A_n * u)‖ ≤ 2^J ‖B_n * u‖ in the max norm.
    #[test]
    fn difference_norms_are_equivalent(b in sequence(3), u in sequence(3), m in 2u64..=3, j in 1u32..=2, n in 1u32..=5) {
        prop_assume!(m == 2 || n <= 4);
        let a = Mask::new(convolve(&power(&box_filter(m), j), &b), m).unwrap();
        let bm = Mask::new(b.clone(), m).unwrap();
        let an = seq::iterated_mask(&a, n).unwrap();
        let bn = seq::iterated_mask(&bm, n).unwrap();
        let lhs = max_abs(&seq::backward_difference(&convolve(&an, &u), j));
        let rhs = max_abs(&convolve(&bn, &u));
        let reach = [a.support(), bm.support(), u.support()]
            .into_iter()
            .flatten()
            .map(|(l, h)| l.abs().max(h.abs()))
            .max()
            .unwrap();
        let big_n = BigRational::from_integer(BigInt::from(reach + 1));
        let two_j = pow_rat(&rat(2, 1), j);
        prop_assert!(&rhs / (&two_j * pow_rat(&big_n, j)) <= lhs);
        prop_assert!(lhs <= &two_j * &rhs);
    }

    /// T^n v = M^n [A_n * v](γ(1 + M + … + M^{n−1}) + M^n ·).
    #[test]
    fn transition_powers_use_the_iterated_mask(a in sequence(5), v in sequence(5), m in 2u64..=3, gamma in -3i64..=3, n in 1u32..=3) {
        let a = Mask::new(a, m).unwrap();
        let mut lhs = v.clone();
        for _ in 0..n {
            lhs = transition::transition_apply(&a, gamma, &lhs);
        }
        let mn = (m as i64).pow(n);
        let g = gamma * (mn - 1) / (m as i64 - 1);
        let c = convolve(&seq::iterated_mask(&a, n).unwrap(), &v);
        let rhs = seq::coset(&c, g, mn).unwrap().scale(&Scalar::from_int(mn));
        prop_assert_eq!(lhs, rhs);
    }

    /// S^n p = p(M^{−n}(s_a + ·) − s_a) for deg p < J, away from the ends.
    #[test]
    fn polynomials_are_reproduced_with_the_shift(
        m in 2u64..=3,
        j in 1u32..=3,
        lo in -3i64..=0,
        extra in 0i64..=2,
        s_a in small_rational(),
        theta in prop::collection::vec(small_rational(), 1..=4),
        p in prop::collection::vec(small_rational(), 1..=3),
        n in 1u32..=2,
    ) {
        let a = linear_phase_member(m, j, lo, extra, s_a.clone(), &theta);
        prop_assume!(a.is_some());
        let a = a.unwrap();
        prop_assert!(analysis::sum_rule_order(&a).unwrap() >= j);
        let p: Vec<BigRational> = p.into_iter().take(j as usize).collect();
        let eval = |x: &BigRational| p.iter().rev().fold(BigRational::zero(), |acc, c| acc * x + c);
        let half = 12i64;
        let v = FiniteSequence::from_rationals(-half, (-half..=half).map(|k| eval(&rat(k, 1))).collect());
        let out = seq::subdivide(&a, &v, n).unwrap();
        let (l, h) = a.support().unwrap();
        let (mut wlo, mut whi) = (-half, half);
        for _ in 0..n {
            wlo = m as i64 * wlo + h;
            whi = m as i64 * whi + l;
        }
        prop_assume!(wlo <= whi);
        let mn = rat((m as i64).pow(n), 1);
        for k in wlo..=whi {
            let x = (&s_a + rat(k, 1)) / &mn - &s_a;
            prop_assert_eq!(exact(&out.at(k)), eval(&x), "k = {}", k);
        }
        prop_assert!(interp::polynomial_reproduction_check(&a, j - 1, n).unwrap());
    }

    /// [S^n v_0](k) = M^{−n}k − (1 − M^{−n}) m_a/(M − 1) for v_0(k) = k.
    #[test]
    fn identity_data_drifts_by_the_shift(b in sequence(4), m in 2u64..=4, n in 1u32..=3) {
        let raw = convolve(&power(&box_filter(m), 2), &b);
        let total = exact(&raw.sum());
        prop_assume!(!total.is_zero());
        let a = Mask::new(raw.scale(&Scalar::Exact(total.recip())), m).unwrap();
        let ma = exact(&analysis::first_moment(&a));
        let half = 10i64;
        let v0 = FiniteSequence::from_rationals(-half, (-half..=half).map(|k| rat(k, 1)).collect());
        let out = seq::subdivide(&a, &v0, n).unwrap();
        let spec = SchemeSpec::new(vec![a.clone()]).unwrap();
        let (wlo, whi) = quasistat::determined_range(&spec, (-half, half), n).unwrap();
        let inv = pow_rat(&rat(1, m as i64), n);
        let (alpha, beta) = quasistat::parameter_map(&spec, n);
        for k in wlo..=whi {
            let expect = &inv * rat(k, 1) - (BigRational::one() - &inv) * &ma / rat(m as i64 - 1, 1);
            prop_assert_eq!(exact(&out.at(k)), expect.clone());
            prop_assert_eq!(exact(&(&(&alpha * &Scalar::from_int(k)) + &beta)), expect);
        }
    }

    /// Σ_k φ(x + k) = 1 and Σ_k k φ(x + k) = s_a − x on the grid M^{−n}Z.
    #[test]
    fn sampled_phi_has_linear_phase_moments(
        m in 2u64..=3,
        j in 2u32..=3,
        lo in -3i64..=0,
        extra in 0i64..=2,
        s_a in small_rational(),
        theta in prop::collection::vec(small_rational(), 1..=4),
    ) {
        let a = linear_phase_member(m, j, lo, extra, s_a.clone(), &theta);
        prop_assume!(a.is_some());
        let samples = transition::sample_phi_grid(&a.unwrap(), 2, 0);
        prop_assume!(samples.is_ok());
        let samples = samples.unwrap();
        let step = samples.step();
        let scale = samples.values.norm1_f64().max(1.0);
        let (l, h) = samples.values.support().unwrap();
        for i in 0..step {
            let x = subdivkit::scalar::rational_to_f64(&rat(i, step));
            let (mut s0, mut s1) = (0.0, 0.0);
            for k in (l - i).div_euclid(step) - 1..=(h - i).div_euclid(step) + 1 {
                let v = samples.values.at(i + k * step).to_f64();
                s0 += v;
                s1 += k as f64 * v;
            }
            let sa = subdivkit::scalar::rational_to_f64(&s_a);
            prop_assert!((s0 - 1.0).abs() <= 1e-8 * scale, "sum {}", s0);
            prop_assert!((s1 - (sa - x)).abs() <= 1e-8 * scale * (1.0 + sa.abs()), "first moment {} vs {}", s1, sa - x);
        }
    }
}

/// On every fixture whose bound certifies order m: 1, M^{−1}, …, M^{−m} are
/// simple eigenvalues of T_{a,M,γ} and the rest have modulus below M^{−m}.
#[test]
fn certified_fixtures_have_simple_leading_eigenvalues() {
    for f in subdivkit::fixtures::stationary() {
        let a = &f.mask;
        let report = analysis::smoothness_report(a, 5, Some(f.order as f64)).unwrap();
        assert!(report.best_bound() > f.order as f64, "{}", f.name);
        let m = a.dilation() as f64;
        for gamma in -3i64..=3 {
            let ev = transition::spectrum(&transition_matrix(a, gamma).unwrap());
            let mut rest: Vec<f64> = ev.iter().map(|z| z.norm()).collect();
            for j in 0..=f.order {
                let target = m.powi(-(j as i32));
                let hits = ev.iter().filter(|z| (*z - target).norm() < 1e-6).count();
                assert_eq!(hits, 1, "{} gamma {gamma}: eigenvalue M^-{j}", f.name);
                let pos = rest.iter().position(|&r| (r - target).abs() < 1e-6).unwrap();
                rest.remove(pos);
            }
            let cap = m.powi(-(f.order as i32));
            assert!(rest.iter().all(|&r| r < cap), "{} gamma {gamma}: {rest:?}", f.name);
        }
    }
}
