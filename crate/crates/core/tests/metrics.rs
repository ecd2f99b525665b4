use freqscope::metrics::{auroc, fakeness_percentiles, pd_at_far, roc_curve, summarize, Label, ScoreSet};
use proptest::prelude::*;

fn scored() -> impl Strategy<Value = (Vec<Label>, Vec<f64>)> {
    prop::collection::vec((any::<bool>(), -8i32..8), 2..60)
        .prop_filter("both classes", |v| v.iter().any(|e| e.0) && v.iter().any(|e| !e.0))
        .prop_map(|v| {
            let labels = v.iter().map(|e| if e.0 { Label::Fake } else { Label::Real }).collect();
            // Small integer grid so ties are frequent.
            let scores = v.iter().map(|e| f64::from(e.1) / 4.0).collect();
            (labels, scores)
        })
}

fn brute_auroc(labels: &[Label], scores: &[f64]) -> f64 {
    let (mut credit, mut pairs) = (0.0, 0.0);
    for (lf, sf) in labels.iter().zip(scores) {
        for (lr, sr) in labels.iter().zip(scores) {
            if lf.is_fake() && !lr.is_fake() {
                pairs += 1.0;
                credit += if sf > sr { 1.0 } else if sf == sr { 0.5 } else { 0.0 };
            }
        }
    }
    credit / pairs
}

fn flipped(labels: &[Label]) -> Vec<Label> {
    labels.iter().map(|l| l.flipped()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn auroc_matches_pair_counting((labels, scores) in scored()) {
        let s = ScoreSet::from_labels(&labels, &scores).unwrap();
        prop_assert!((auroc(&s).unwrap() - brute_auroc(&labels, &scores)).abs() < 1e-12);
    }

    #[test]
    fn negation_with_swapped_labels_preserves_auroc((labels, scores) in scored()) {
        let a = auroc(&ScoreSet::from_labels(&labels, &scores).unwrap()).unwrap();
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        let b = auroc(&ScoreSet::from_labels(&flipped(&labels), &neg).unwrap()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn swapped_labels_complement_auroc((labels, scores) in scored()) {
        let a = auroc(&ScoreSet::from_labels(&labels, &scores).unwrap()).unwrap();
        let b = auroc(&ScoreSet::from_labels(&flipped(&labels), &scores).unwrap()).unwrap();
        prop_assert_eq!(a + b, 1.0);
    }

    #[test]
    fn roc_is_monotone_with_fixed_endpoints((labels, scores) in scored()) {
        let roc = roc_curve(&ScoreSet::from_labels(&labels, &scores).unwrap()).unwrap();
        prop_assert!(roc.fpr.len() >= 2 && roc.fpr.len() == roc.tpr.len());
        prop_assert_eq!((roc.fpr[0], roc.tpr[0]), (0.0, 0.0));
        prop_assert_eq!((*roc.fpr.last().unwrap(), *roc.tpr.last().unwrap()), (1.0, 1.0));
        prop_assert!(roc.fpr.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(roc.tpr.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(roc.thresholds.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn pd_at_far_is_monotone((labels, scores) in scored(), a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let roc = roc_curve(&ScoreSet::from_labels(&labels, &scores).unwrap()).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(pd_at_far(&roc, lo) <= pd_at_far(&roc, hi));
        prop_assert_eq!(pd_at_far(&roc, 1.0), 1.0);
        let min_of = |fake: bool| {
            labels.iter().zip(&scores).filter(|(l, _)| l.is_fake() == fake).map(|(_, s)| *s).fold(f64::INFINITY, f64::min)
        };
        if min_of(true) > min_of(false) {
            prop_assert_eq!(pd_at_far(&roc, 1.0 - f64::EPSILON / 2.0), 1.0);
        }
    }

    #[test]
    fn strictly_increasing_maps_change_nothing((labels, scores) in scored()) {
        let s = ScoreSet::from_labels(&labels, &scores).unwrap();
        let mapped: Vec<f64> = scores.iter().map(|x| (x * 0.7).exp() + x.powi(3)).collect();
        let t = ScoreSet::from_labels(&labels, &mapped).unwrap();
        let (ra, rb) = (roc_curve(&s).unwrap(), roc_curve(&t).unwrap());
        prop_assert_eq!(&ra.fpr, &rb.fpr);
        prop_assert_eq!(&ra.tpr, &rb.tpr);
        prop_assert_eq!(summarize(&s).unwrap(), summarize(&t).unwrap());
    }
}

#[test]
fn hand_example() {
    let s = ScoreSet::from_labels(
        &[Label::Real, Label::Real, Label::Fake, Label::Fake],
        &[0.1, 0.4, 0.35, 0.8],
    )
    .unwrap();
    assert_eq!(auroc(&s).unwrap(), 0.75);
    let roc = roc_curve(&s).unwrap();
    assert_eq!(roc.thresholds[1..], [0.8, 0.4, 0.35, 0.1]);
    assert_eq!(roc.fpr, [0.0, 0.0, 0.5, 0.5, 1.0]);
    assert_eq!(roc.tpr, [0.0, 0.5, 0.5, 1.0, 1.0]);
}

#[test]
fn step_rule_on_constant_scores() {
    let s = ScoreSet::from_labels(&[Label::Real, Label::Fake], &[0.3, 0.3]).unwrap();
    let sum = summarize(&s).unwrap();
    assert_eq!((sum.auroc, sum.pd_at_5, sum.pd_at_1), (0.5, 0.0, 0.0));
}

#[test]
fn percentile_ranks() {
    let s = ScoreSet::from_labels(&[Label::Real; 5], &[5.0, 1.0, 3.0, 2.0, 4.0]).unwrap();
    let got = fakeness_percentiles(&s, &[0.0, 50.0, 100.0], 1).unwrap();
    assert_eq!(got[0].1, ["1"]);
    assert_eq!(got[1].1, ["2"]);
    assert_eq!(got[2].1, ["0"]);
    assert!(roc_curve(&s).is_err());
}
