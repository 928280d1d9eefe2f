//! Kernel invariants as reusable proptest checks.

use acd::numerics::{adaptive_alpha, argmax, combine_contrastive, entropy, softmax, Alpha, Entropy, LogitVector};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub const TOL: f64 = 1e-9;

pub fn logits(len: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
    len.prop_flat_map(|n| prop::collection::vec(-30.0f64..30.0, n))
}

pub fn logit_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..=64)
        .prop_flat_map(|n| (prop::collection::vec(-30.0f64..30.0, n), prop::collection::vec(-30.0f64..30.0, n)))
}

fn lv(v: &[f64]) -> LogitVector {
    LogitVector::new(v.to_vec()).unwrap()
}

pub fn softmax_normalized_and_shift_invariant(z: &[f64], shift: f64) -> Result<(), TestCaseError> {
    let p = softmax(&lv(z));
    let total: f64 = p.probs().iter().sum();
    prop_assert!((total - 1.0).abs() <= TOL, "sum {total}");
    prop_assert!(p.probs().iter().all(|&x| (0.0..=1.0).contains(&x)));
    let shifted: Vec<f64> = z.iter().map(|x| x + shift).collect();
    let q = softmax(&lv(&shifted));
    for (a, b) in p.probs().iter().zip(q.probs()) {
        prop_assert!((a - b).abs() <= TOL, "{a} vs {b}");
    }
    Ok(())
}

pub fn alpha_in_unit_interval(h: f64, hc: f64) -> Result<(), TestCaseError> {
    let a = adaptive_alpha(Entropy::new(h).unwrap(), Entropy::new(hc).unwrap()).value();
    prop_assert!((0.0..=1.0).contains(&a), "alpha {a}");
    Ok(())
}

pub fn alpha_complementary(h: f64, hc: f64) -> Result<(), TestCaseError> {
    prop_assume!(h + hc > 0.0);
    let e = |x| Entropy::new(x).unwrap();
    let sum = adaptive_alpha(e(h), e(hc)).value() + adaptive_alpha(e(hc), e(h)).value();
    prop_assert!((sum - 1.0).abs() <= 1e-12, "sum {sum}");
    Ok(())
}

pub fn alpha_scale_invariant(h: f64, hc: f64, k: f64) -> Result<(), TestCaseError> {
    let e = |x| Entropy::new(x).unwrap();
    let a = adaptive_alpha(e(h), e(hc)).value();
    let b = adaptive_alpha(e(k * h), e(k * hc)).value();
    prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    Ok(())
}

pub fn combined_shift_invariant(z: &[f64], zc: &[f64], alpha: f64, c: f64, cc: f64) -> Result<(), TestCaseError> {
    let a = Alpha::new(alpha).unwrap();
    let base = softmax(&combine_contrastive(&lv(z), &lv(zc), a).unwrap());
    let zs: Vec<f64> = z.iter().map(|x| x + c).collect();
    let zcs: Vec<f64> = zc.iter().map(|x| x + cc).collect();
    let moved = softmax(&combine_contrastive(&lv(&zs), &lv(&zcs), a).unwrap());
    for (x, y) in base.probs().iter().zip(moved.probs()) {
        prop_assert!((x - y).abs() <= TOL, "{x} vs {y}");
    }
    Ok(())
}

pub fn argmax_matches_softmax(z: &[f64], zc: &[f64], alpha: f64) -> Result<(), TestCaseError> {
    let combined = combine_contrastive(&lv(z), &lv(zc), Alpha::new(alpha).unwrap()).unwrap();
    let p = softmax(&combined);
    prop_assert_eq!(argmax(combined.as_slice()), argmax(p.probs()));
    Ok(())
}

pub fn entropy_bounds(z: &[f64]) -> Result<(), TestCaseError> {
    let h = entropy(&softmax(&lv(z))).value();
    prop_assert!(h >= 0.0 && h <= (z.len() as f64).ln() + 1e-12, "H {h}");
    Ok(())
}
