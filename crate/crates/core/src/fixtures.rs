//! Named reference masks with known interpolation shifts and smoothness.
//!
//! Families are exposed as functions of their parameter; surd-valued
//! parameters are only available in floating point.

use num_rational::BigRational;

use crate::scalar::{int, rat, Scalar};
use crate::seq::{convolve, FiniteSequence, Mask};

/// A reference mask, its interpolation shift s_a, and the smoothness order m
/// it is known to certify.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: &'static str,
    pub mask: Mask,
    pub shift: BigRational,
    pub order: u32,
}

fn exact(start: i64, v: &[(i64, i64)], m: u64) -> Mask {
    Mask::from_rationals(start, v.iter().map(|&(p, q)| rat(p, q)).collect(), m).expect("valid dilation")
}

/// Mirror `half` (listed from the left end) about the center 1/2: the mask on
/// [−len+1, len] with a(1 − k) = a(k).
fn mirrored_left(half: Vec<BigRational>, m: u64) -> Mask {
    let n = half.len() as i64;
    let mut all = half.clone();
    all.extend(half.into_iter().rev());
    Mask::from_rationals(1 - n, all, m).expect("valid dilation")
}

/// Mask given by its values on [1, len], reflected so that a(1 − k) = a(k).
fn mirrored_right(right: Vec<BigRational>, m: u64) -> Mask {
    let mut left = right.clone();
    left.reverse();
    mirrored_left(left, m)
}

fn fr(v: &[(i64, i64)]) -> Vec<BigRational> {
    v.iter().map(|&(p, q)| rat(p, q)).collect()
}

/// M = 2 mask reproducing linear polynomials with shift 1/7.
pub fn binary_seventh() -> Mask {
    exact(-2, &[(-1, 28), (3, 14), (15, 28), (2, 7)], 2)
}

/// One-parameter M = 2 family with shift 1/3 on [−2, 4] (t ≠ −2/3).
pub fn binary_third_family(t: &BigRational) -> Mask {
    let c = |k: i64| int(k);
    let t2 = t * t;
    let v = vec![
        -((c(3) * t + c(1)) * (c(3) * t + c(1))) / (c(18) * t + c(12)),
        (c(3) * t + c(1)) / (c(9) * t + c(6)),
        (c(63) * &t2 + c(78) * t + c(28)) / (c(72) * t + c(48)),
        c(2) / (c(9) * t + c(6)),
        -(c(3) * t * (t + c(1))) / (c(12) * t + c(8)),
        t / (c(6) * t + c(4)),
        -(c(3) * &t2) / (c(24) * t + c(16)),
    ];
    Mask::from_rationals(-2, v, 2).expect("valid dilation")
}

/// M = 3, shift 1/4, two sum rules, unique symmetric solution on [−3, 4].
pub fn ternary_quarter_j2() -> Mask {
    exact(-3, &[(-1, 36), (1, 36), (1, 6), (1, 3), (1, 3), (1, 6), (1, 36), (-1, 36)], 3)
}

/// M = 3, shift 1/4, three sum rules, symmetric family on [−6, 7].
pub fn ternary_quarter_j3(t: &BigRational) -> Mask {
    let third = rat(1, 3);
    let two_thirds = rat(2, 3);
    let half = vec![
        rat(5, 432) - &third * t,
        rat(-1, 72) + &third * t,
        rat(-1, 48),
        rat(-19, 432) + &two_thirds * t,
        rat(1, 16) - &two_thirds * t,
        rat(3, 16),
        rat(137, 432),
    ];
    mirrored_left(half, 3)
}

/// M = 3, shift 1/4, five sum rules, symmetric on [−11, 12].
pub fn ternary_quarter_j5() -> Mask {
    let right = vec![
        BigRational::new(87651329.into(), 277385472.into()),
        rat(25, 128),
        BigRational::new(3486281.into(), 69346368.into()),
        BigRational::new((-40618421).into(), 1386927360.into()),
        rat(-25, 768),
        BigRational::new((-95969).into(), 10668672.into()),
        BigRational::new(4981993.into(), 1040195520.into()),
        rat(1, 256),
        BigRational::new(3609913.into(), 4160782080i64.into()),
        BigRational::new((-130015).into(), 416078208.into()),
        int(0),
        BigRational::new(26003.into(), 4160782080i64.into()),
    ];
    mirrored_right(right, 3)
}

/// M = 4, shift 1/6, symmetric on [−4, 5].
pub fn quaternary_sixth_j2() -> Mask {
    exact(
        -4,
        &[(-1, 64), (1, 64), (3, 32), (5, 32), (1, 4), (1, 4), (5, 32), (3, 32), (1, 64), (-1, 64)],
        4,
    )
}

/// M = 4, shift 1/6, three sum rules, symmetric on [−7, 8].
pub fn quaternary_sixth_j3() -> Mask {
    mirrored_left(
        fr(&[
            (-1, 832),
            (-9, 832),
            (-123, 6656),
            (-83, 6656),
            (141, 6656),
            (645, 6656),
            (607, 3328),
            (807, 3328),
        ]),
        4,
    )
}

/// M = 4, shift 1/6, five sum rules, symmetric on [−12, 13].
pub fn quaternary_sixth_j5() -> Mask {
    let r = |p: i64, q: i64| BigRational::new(p.into(), q.into());
    mirrored_right(
        vec![
            r(6327597, 26083328),
            r(34295435, 182583296),
            r(18691499, 182583296),
            r(37613109, 1460666368),
            r(-24468257, 1460666368),
            r(-10210465, 365166592),
            r(-6463745, 365166592),
            r(-3546873, 912916480),
            r(186261, 91291648),
            r(1281515, 365166592),
            r(710475, 365166592),
            r(331365, 1460666368),
            r(198819, 7303331840),
        ],
        4,
    )
}

/// Pair of M = 2 symmetric masks composing to a 0-interpolating M = 4 mask.
pub fn quasi_pair_c1() -> Vec<Mask> {
    vec![
        exact(-2, &[(-11, 168), (1, 4), (53, 84), (1, 4), (-11, 168)], 2),
        exact(-2, &[(11, 128), (1, 4), (21, 64), (1, 4), (11, 128)], 2),
    ]
}

/// (1/16) z^{−2}(1+z)^4 (t2 z^{−2} + t1 z^{−1} + 1 − 2t1 − 2t2 + t1 z + t2 z^2).
pub fn symmetric_four_rule_mask(t1: Scalar, t2: Scalar) -> Mask {
    let one = Scalar::one();
    let two = Scalar::from_int(2);
    let mid = &one - &(&two * &t1) - &two * &t2;
    let inner = FiniteSequence::new(-2, vec![t2.clone(), t1.clone(), mid, t1, t2]);
    let binom = FiniteSequence::new(
        -2,
        [1, 4, 6, 4, 1].iter().map(|&c| Scalar::ratio(c, 16)).collect(),
    );
    Mask::new(convolve(&binom, &inner), 2).expect("dilation 2")
}

/// Float masks of the pair with parameters involving √161.
pub fn quasi_pair_c2() -> Vec<Mask> {
    let s = 161f64.sqrt();
    vec![
        symmetric_four_rule_mask(Scalar::Float(-(s + 19.0) / 16.0), Scalar::Float(5.0 / 16.0)),
        symmetric_four_rule_mask(Scalar::Float((s - 11.0) / 4.0), Scalar::Float(0.0)),
    ]
}

/// Float masks of the pair with parameters involving √721.
pub fn quasi_pair_c2_alt() -> Vec<Mask> {
    let s = 721f64.sqrt();
    vec![
        symmetric_four_rule_mask(Scalar::Float(-(s + 55.0) / 256.0), Scalar::Float(0.0)),
        symmetric_four_rule_mask(Scalar::Float((s - 33.0) / 64.0), Scalar::Float(-9.0 / 32.0)),
    ]
}

/// Float triple composing to a 0-interpolating M = 8 mask.
pub fn quasi_triple_c3() -> Vec<Mask> {
    let s = 713f64.sqrt();
    let t1 = -(s + 41.0) / 32.0;
    let t2 = 11.0 / 32.0;
    let t3 = 179.0 * s / 616.0 - 140873.0 / 19712.0;
    let t4 = 40137.0 / 39424.0 - 51.0 * s / 1232.0;
    let t5 = 19.0 / 64.0;
    let third = {
        let one = Scalar::one();
        let t = Scalar::Float(t5);
        let mid = &one - &(Scalar::from_int(2) * &t);
        let inner = FiniteSequence::new(-1, vec![t.clone(), mid, t]);
        let binom = FiniteSequence::new(
            -2,
            [1, 4, 6, 4, 1].iter().map(|&c| Scalar::ratio(c, 16)).collect(),
        );
        Mask::new(convolve(&binom, &inner), 2).expect("dilation 2")
    };
    vec![
        symmetric_four_rule_mask(Scalar::Float(t1), Scalar::Float(t2)),
        symmetric_four_rule_mask(Scalar::Float(t3), Scalar::Float(t4)),
        third,
    ]
}

/// Stationary reference masks with exact coefficients.
pub fn stationary() -> Vec<Fixture> {
    let f = |name, mask, shift, order| Fixture {
        name,
        mask,
        shift,
        order,
    };
    vec![
        f("hat", Mask::hat(), int(0), 0),
        f("binary_seventh", binary_seventh(), rat(1, 7), 0),
        f("binary_third_t0", binary_third_family(&int(0)), rat(1, 3), 0),
        f("binary_third_c1", binary_third_family(&rat(-3, 16)), rat(1, 3), 1),
        f("ternary_quarter_j2", ternary_quarter_j2(), rat(1, 4), 1),
        f("ternary_quarter_j3_c2", ternary_quarter_j3(&rat(7, 256)), rat(1, 4), 2),
        f("ternary_quarter_j3_alt", ternary_quarter_j3(&rat(5, 144)), rat(1, 4), 1),
        f("ternary_quarter_j5", ternary_quarter_j5(), rat(1, 4), 3),
        f("quaternary_sixth_j2", quaternary_sixth_j2(), rat(1, 6), 1),
        f("quaternary_sixth_j3", quaternary_sixth_j3(), rat(1, 6), 2),
        f("quaternary_sixth_j5", quaternary_sixth_j5(), rat(1, 6), 2),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{shift_parameter, sum_rule_order};
    use crate::seq::symmetry_center;

    #[test]
    fn all_stationary_fixtures_are_normalized_with_matching_shift() {
        for fx in stationary() {
            assert!(fx.mask.is_normalized(), "{}", fx.name);
            assert_eq!(shift_parameter(&fx.mask), Scalar::Exact(fx.shift.clone()), "{}", fx.name);
        }
    }

    #[test]
    fn family_at_zero_collapses_support() {
        let a = binary_third_family(&int(0));
        assert_eq!(a.support(), Some((-2, 1)));
        assert_eq!(a, exact(-2, &[(-1, 12), (1, 6), (7, 12), (1, 3)], 2));
    }

    #[test]
    fn sum_rule_orders() {
        assert_eq!(sum_rule_order(&ternary_quarter_j5()).unwrap(), 5);
        assert_eq!(sum_rule_order(&quaternary_sixth_j2()).unwrap(), 2);
        assert_eq!(sum_rule_order(&quaternary_sixth_j3()).unwrap(), 3);
        assert_eq!(sum_rule_order(&quaternary_sixth_j5()).unwrap(), 5);
        assert_eq!(sum_rule_order(&ternary_quarter_j3(&rat(7, 256))).unwrap(), 3);
        for m in quasi_pair_c2().iter().chain(quasi_triple_c3().iter()) {
            assert_eq!(sum_rule_order(m).unwrap(), 4);
        }
    }

    #[test]
    fn symmetric_fixtures_have_center_one() {
        assert_eq!(symmetry_center(&ternary_quarter_j5()), Some(1));
        assert_eq!(symmetry_center(&quaternary_sixth_j5()), Some(1));
        assert_eq!(ternary_quarter_j5().support(), Some((-11, 12)));
        assert_eq!(quaternary_sixth_j5().support(), Some((-12, 13)));
    }

    #[test]
    fn shorter_support_at_special_parameter() {
        assert_eq!(ternary_quarter_j3(&rat(5, 144)).support(), Some((-5, 6)));
    }
}
