//! Randomized checks of composed masks, block structure and the two-step
//! interpolation of the float quasi-stationary pairs.

use num_rational::BigRational;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use subdivkit::fixtures;
use subdivkit::quasistat::{self, SchemeSpec};
use subdivkit::scalar::rat;
use subdivkit::seq::{self, FiniteSequence};
use subdivkit::{Mask, Scalar};

const CASES: u32 = 256;

fn small_rational() -> impl Strategy<Value = BigRational> {
    (-9i64..=9, 1i64..=9).prop_map(|(p, q)| rat(p, q))
}

/// A random exact mask scaled to sum 1.
fn normalized_mask(m: u64) -> impl Strategy<Value = Mask> {
    (-3i64..=3, prop::collection::vec(small_rational(), 1..=5)).prop_filter_map("zero sum", move |(start, c)| {
        let total: BigRational = c.iter().sum();
        if total == rat(0, 1) {
            return None;
        }
        let c = c.into_iter().map(|x| x / &total).collect();
        Mask::from_rationals(start, c, m).ok()
    })
}

fn tuple() -> impl Strategy<Value = Vec<Mask>> {
    (2u64..=3, 1usize..=3).prop_flat_map(|(m, r)| prop::collection::vec(normalized_mask(m), r))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn symbol_and_operator_routes_agree(masks in tuple()) {
        prop_assert_eq!(
            quasistat::compose_by_symbols(&masks).unwrap(),
            quasistat::compose_by_operators(&masks).unwrap()
        );
    }

    #[test]
    fn whole_blocks_equal_the_composed_scheme(masks in tuple(), v in prop::collection::vec(small_rational(), 1..=4), q in 1u32..=2) {
        let spec = SchemeSpec::new(masks).unwrap();
        let v = FiniteSequence::from_rationals(-1, v);
        let r = spec.period() as u32;
        prop_assert_eq!(
            quasistat::quasi_subdivide(&spec, &v, q * r).unwrap(),
            seq::subdivide(spec.composed(), &v, q).unwrap()
        );
    }
}

/// [(S_{a_2}S_{a_1})^q v](4^q k) = v(k) for random polygons, q = 1 and 2,
/// which are refinement levels 2 and 4.
#[test]
fn float_pairs_interpolate_every_two_steps() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for masks in [fixtures::quasi_pair_c2(), fixtures::quasi_pair_c2_alt()] {
        let spec = SchemeSpec::new(masks).unwrap();
        for _ in 0..CASES {
            let len = rng.gen_range(2..=8);
            let v: Vec<f64> = (0..len).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let v = FiniteSequence::new(0, v.into_iter().map(Scalar::Float).collect());
            for q in 1..=2u32 {
                let out = quasistat::quasi_subdivide(&spec, &v, 2 * q).unwrap();
                let step = 4i64.pow(q);
                for k in 0..len as i64 {
                    let d = (out.at(step * k).to_f64() - v.at(k).to_f64()).abs();
                    assert!(d <= 1e-9, "level {}: |diff| = {d:e}", 2 * q);
                }
            }
        }
    }
}
