#![allow(clippy::needless_range_loop)]

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stance_scope::corpus::{aggregate_votes, StanceLabel};
use stance_scope::metrics::{accuracy, confusion, macro_f1, ConfusionMatrix};

/// Per-class F1 from explicit tp/fp/fn counts, averaged over classes.
fn brute_force_macro_f1(cm: &[[u64; 3]; 3]) -> f64 {
    let mut total = 0.0;
    for class in 0..3 {
        let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
        for gold in 0..3 {
            for pred in 0..3 {
                let n = cm[gold][pred];
                match (gold == class, pred == class) {
                    (true, true) => tp += n,
                    (false, true) => fp += n,
                    (true, false) => fn_ += n,
                    (false, false) => {}
                }
            }
        }
        if 2 * tp + fp + fn_ > 0 {
            total += 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64;
        }
    }
    total / 3.0
}

#[test]
fn macro_f1_matches_brute_force_on_100_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..100 {
        let mut counts = [[0u64; 3]; 3];
        for row in counts.iter_mut() {
            for cell in row.iter_mut() {
                // sparse matrices exercise the zero-denominator branches
                *cell = if rng.gen_bool(0.3) { 0 } else { rng.gen_range(0..50) };
            }
        }
        if counts.iter().flatten().sum::<u64>() == 0 {
            counts[1][2] = 1;
        }
        let got = macro_f1(&ConfusionMatrix::from_counts(counts)).unwrap();
        let want = brute_force_macro_f1(&counts);
        assert!((got - want).abs() <= 1e-9, "case {case}: {counts:?} {got} vs {want}");
    }
}

#[test]
fn perfect_and_degenerate_predictions() {
    let perfect = ConfusionMatrix::from_counts([[5, 0, 0], [0, 3, 0], [0, 0, 2]]);
    assert_eq!(macro_f1(&perfect).unwrap(), 1.0);
    assert_eq!(accuracy(&perfect).unwrap(), 1.0);
    // everything predicted favour: F1 only for favour
    let majority = ConfusionMatrix::from_counts([[6, 0, 0], [3, 0, 0], [1, 0, 0]]);
    let f1_favour = 2.0 * 0.6 * 1.0 / 1.6;
    assert!((macro_f1(&majority).unwrap() - f1_favour / 3.0).abs() < 1e-12);
    assert!(macro_f1(&ConfusionMatrix::default()).is_err());
}

#[test]
fn confusion_rejects_unrelated_and_length_mismatch() {
    use StanceLabel::*;
    assert!(confusion(&[Favour], &[Unrelated]).is_err());
    assert!(confusion(&[Favour, Against], &[Favour]).is_err());
    let cm = confusion(&[Favour, Against, Neutral, Against], &[Favour, Neutral, Neutral, Against]).unwrap();
    assert_eq!(cm.counts, [[1, 0, 0], [0, 1, 1], [0, 0, 1]]);
}

/// Majority by explicit counting over the four labels.
fn counting_oracle(votes: [StanceLabel; 3]) -> (bool, Option<StanceLabel>) {
    let best = StanceLabel::ALL
        .iter()
        .map(|&l| (votes.iter().filter(|&&v| v == l).count(), l))
        .max_by_key(|(n, _)| *n)
        .unwrap();
    if best.0 >= 2 {
        (true, Some(best.1))
    } else {
        (false, None)
    }
}

#[test]
fn all_64_vote_triples_agree_with_counting_oracle() {
    let mut checked = 0;
    let mut retained = 0;
    for a in StanceLabel::ALL {
        for b in StanceLabel::ALL {
            for c in StanceLabel::ALL {
                let got = aggregate_votes(&[a, b, c]).unwrap();
                let (keep, label) = counting_oracle([a, b, c]);
                assert_eq!((got.retained, got.label), (keep, label), "{a} {b} {c}");
                checked += 1;
                retained += usize::from(keep);
            }
        }
    }
    assert_eq!(checked, 64);
    // 64 triples minus the 4*3*2 all-distinct ones
    assert_eq!(retained, 40);
}

#[test]
fn vote_count_other_than_three_is_an_error() {
    assert!(aggregate_votes(&[StanceLabel::Favour; 2]).is_err());
    assert!(aggregate_votes(&[StanceLabel::Favour; 4]).is_err());
}

fn label() -> impl Strategy<Value = StanceLabel> {
    prop::sample::select(StanceLabel::ALL.to_vec())
}

proptest! {
    #[test]
    fn aggregation_is_permutation_invariant(a in label(), b in label(), c in label()) {
        let base = aggregate_votes(&[a, b, c]).unwrap();
        for perm in [[a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
            prop_assert_eq!(aggregate_votes(&perm).unwrap(), base);
        }
    }

    #[test]
    fn macro_f1_and_accuracy_lie_in_unit_interval(cells in prop::collection::vec(0u64..100, 9)) {
        prop_assume!(cells.iter().sum::<u64>() > 0);
        let mut counts = [[0u64; 3]; 3];
        for (i, v) in cells.iter().enumerate() {
            counts[i / 3][i % 3] = *v;
        }
        let cm = ConfusionMatrix::from_counts(counts);
        let f1 = macro_f1(&cm).unwrap();
        let acc = accuracy(&cm).unwrap();
        prop_assert!((0.0..=1.0).contains(&f1));
        prop_assert!((0.0..=1.0).contains(&acc));
        prop_assert!((f1 - brute_force_macro_f1(&counts)).abs() <= 1e-9);
    }
}
