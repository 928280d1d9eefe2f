mod common;

use acd::dataio::{parse_dataset, to_jsonl, QAExample, RetrievedContext};
use acd::decoding::{micd_dynamic_alpha, score_step, Strategy};
use acd::evaluation::{auroc, exact_match, normalize_answer};
use acd::numerics::{combine_contrastive, Alpha, LogitVector};
use common::kernel;
use proptest::prelude::*;

proptest! {
    #[test]
    fn softmax_is_normalized(z in kernel::logits(1..=64), shift in -50.0f64..50.0) {
        kernel::softmax_normalized_and_shift_invariant(&z, shift)?;
    }

    #[test]
    fn alpha_stays_in_unit_interval(h in 0.0f64..20.0, hc in 0.0f64..20.0) {
        kernel::alpha_in_unit_interval(h, hc)?;
    }

    #[test]
    fn alpha_is_complementary(h in 0.0f64..20.0, hc in 0.0f64..20.0) {
        kernel::alpha_complementary(h, hc)?;
    }

    #[test]
    fn alpha_ignores_entropy_units(h in 0.0f64..20.0, hc in 0.0f64..20.0, k in 0.01f64..100.0) {
        kernel::alpha_scale_invariant(h, hc, k)?;
    }

    #[test]
    fn combined_distribution_ignores_shifts(
        (z, zc) in kernel::logit_pair(),
        alpha in 0.0f64..=1.0,
        c in -20.0f64..20.0,
        cc in -20.0f64..20.0,
    ) {
        kernel::combined_shift_invariant(&z, &zc, alpha, c, cc)?;
    }

    #[test]
    fn argmax_of_logits_is_argmax_of_probs((z, zc) in kernel::logit_pair(), alpha in 0.0f64..=1.0) {
        kernel::argmax_matches_softmax(&z, &zc, alpha)?;
    }

    #[test]
    fn entropy_is_bounded(z in kernel::logits(1..=64)) {
        kernel::entropy_bounds(&z)?;
    }

    #[test]
    fn interpolation_endpoints_are_exact((z, zc) in kernel::logit_pair()) {
        let (a, b) = (LogitVector::new(z.clone()).unwrap(), LogitVector::new(zc.clone()).unwrap());
        prop_assert_eq!(combine_contrastive(&a, &b, Alpha::new(0.0).unwrap()).unwrap(), a.clone());
        prop_assert_eq!(combine_contrastive(&a, &b, Alpha::new(1.0).unwrap()).unwrap(), b);
    }

    #[test]
    fn acd_alpha_matches_entropy_ratio((z, zc) in kernel::logit_pair()) {
        let steps = score_step(
            &Strategy::Acd,
            &[LogitVector::new(z).unwrap(), LogitVector::new(zc).unwrap()],
        ).unwrap();
        let (h, hc) = (steps.h_closed.unwrap().value(), steps.h_open.unwrap().value());
        let expected = if h + hc == 0.0 { 0.5 } else { h / (h + hc) };
        prop_assert!((steps.alpha.unwrap().value() - expected).abs() <= 1e-12);
    }

    #[test]
    fn micd_alpha_stays_in_unit_interval(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let v = micd_dynamic_alpha(a, b).unwrap().value();
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn auroc_ignores_increasing_transforms(
        data in prop::collection::vec((-10.0f64..10.0, any::<bool>()), 2..80),
    ) {
        let scores: Vec<f64> = data.iter().map(|d| d.0).collect();
        let labels: Vec<bool> = data.iter().map(|d| d.1).collect();
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let base = auroc(&scores, &labels).unwrap();
        let moved: Vec<f64> = scores.iter().map(|s| (s / 5.0).exp() * 3.0 + 1.0).collect();
        prop_assert!((auroc(&moved, &labels).unwrap() - base).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&base));
    }

    #[test]
    fn auroc_of_flipped_labels_is_complement(
        scores in prop::collection::hash_set(-1000i32..1000, 2..80),
        seed in any::<u64>(),
    ) {
        // distinct integer scores keep the input tie-free
        let scores: Vec<f64> = scores.into_iter().map(f64::from).collect();
        let labels: Vec<bool> = (0..scores.len()).map(|i| (seed >> (i % 64)) & 1 == 1).collect();
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let flipped: Vec<bool> = labels.iter().map(|l| !l).collect();
        let sum = auroc(&scores, &labels).unwrap() + auroc(&scores, &flipped).unwrap();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn exact_match_ignores_surface_noise(
        words in prop::collection::vec("[a-z]{2,8}", 1..5),
        upper in any::<bool>(),
        article in prop::sample::select(vec!["", "the ", "a ", "An "]),
        punct in prop::sample::select(vec!["", ".", "!", ","]),
        pad in prop::sample::select(vec!["", " ", "  ", "\t"]),
    ) {
        prop_assume!(words.iter().all(|w| !matches!(w.as_str(), "a" | "an" | "the")));
        let answer = words.join(" ");
        let noisy = format!("{pad}{article}{}{punct}{pad}", if upper { answer.to_uppercase() } else { answer.clone() });
        prop_assert!(exact_match(&noisy, std::slice::from_ref(&answer)).unwrap());
        prop_assert!(exact_match(&answer, std::slice::from_ref(&noisy)).unwrap());
        prop_assert_eq!(normalize_answer(&noisy), normalize_answer(&answer));
    }

    #[test]
    fn dataset_round_trips(
        rows in prop::collection::vec(
            ("[a-z][a-z ?]{0,19}", prop::collection::vec("[A-Za-z][A-Za-z ]{0,11}", 1..3), prop::option::of(("[a-z][a-z .]{0,29}", prop::option::of(any::<bool>())))),
            0..10,
        ),
    ) {
        let examples: Vec<QAExample> = rows
            .into_iter()
            .enumerate()
            .map(|(i, (q, answers, ctx))| QAExample {
                id: format!("ex-{i}"),
                question: q,
                answers,
                context: ctx.map(|(text, gold)| RetrievedContext { text, gold }),
                swapped_context: None,
                meta: Default::default(),
            })
            .collect();
        let text = to_jsonl(&examples).unwrap();
        prop_assert_eq!(parse_dataset(&text).unwrap(), examples);
    }
}
