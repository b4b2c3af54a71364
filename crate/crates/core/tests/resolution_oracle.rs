use benchgen_core::behavior::{behavior_geq, behavior_of, classify, is_resolved, BehaviorError, BehaviorMap};
use benchgen_core::{TestBehavior, TestStatus};
use proptest::prelude::*;

const FP: TestBehavior = TestBehavior::FAIL_TO_PASS;
const FF: TestBehavior = TestBehavior::FAIL_TO_FAIL;
const PP: TestBehavior = TestBehavior::PASS_TO_PASS;
const PF: TestBehavior = TestBehavior::PASS_TO_FAIL;
const ORDER: [TestBehavior; 4] = [FP, FF, PP, PF];

/// `TRUTH[i][j]` is whether `ORDER[i] ≥ ORDER[j]`, written out by hand.
const TRUTH: [[bool; 4]; 4] = [
    // vs  F→P    F→F    P→P    P→F
    [true, true, false, false],  // F→P
    [false, true, false, false], // F→F
    [false, false, true, true],  // P→P
    [false, false, false, true], // P→F
];

#[test]
fn order_matches_truth_table() {
    for (i, a) in ORDER.iter().enumerate() {
        for (j, b) in ORDER.iter().enumerate() {
            assert_eq!(behavior_geq(*a, *b), TRUTH[i][j], "{a} vs {b}");
        }
    }
    assert_eq!(behavior_of(TestStatus::Fail, TestStatus::Pass), FP);
    assert_eq!(behavior_of(TestStatus::Pass, TestStatus::Pass), PP);
    assert_eq!(behavior_of(TestStatus::Pass, TestStatus::Fail), PF);
}

#[test]
fn order_is_a_partial_order() {
    for a in ORDER {
        assert!(behavior_geq(a, a));
        for b in ORDER {
            if behavior_geq(a, b) && behavior_geq(b, a) {
                assert_eq!(a, b);
            }
            for c in ORDER {
                if behavior_geq(a, b) && behavior_geq(b, c) {
                    assert!(behavior_geq(a, c), "{a} {b} {c}");
                }
            }
        }
    }
}

fn maps(n: usize) -> Vec<Vec<TestBehavior>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|m| ORDER.map(|b| [m.clone(), vec![b]].concat()))
            .collect();
    }
    out
}

fn to_map(bs: &[TestBehavior]) -> BehaviorMap {
    bs.iter().enumerate().map(|(i, b)| (format!("t{i}"), *b)).collect()
}

fn brute_force(reference: &[TestBehavior], candidate: &[TestBehavior]) -> bool {
    let index = |b: TestBehavior| ORDER.iter().position(|x| *x == b).unwrap();
    reference
        .iter()
        .zip(candidate)
        .all(|(r, c)| TRUTH[index(*c)][index(*r)])
}

#[test]
fn resolution_matches_brute_force_on_small_maps() {
    let mut checked = 0;
    for n in 0..=3 {
        for reference in maps(n) {
            for candidate in maps(n) {
                let r = to_map(&reference);
                let c = to_map(&candidate);
                let compatible = reference.iter().zip(&candidate).all(|(a, b)| a.pre == b.pre);
                let got = is_resolved(&r, &c);
                if compatible {
                    assert_eq!(
                        got,
                        Ok(brute_force(&reference, &candidate)),
                        "{reference:?} {candidate:?}"
                    );
                    checked += 1;
                } else {
                    assert!(matches!(got, Err(BehaviorError::PreStatusMismatch(_))));
                }
            }
        }
    }
    assert_eq!(checked, 1 + 4 * 2 + 16 * 4 + 64 * 8);
}

#[test]
fn missing_and_extra_tests() {
    let r = to_map(&[FP, PP]);
    let c = to_map(&[FP]);
    assert_eq!(is_resolved(&r, &c), Err(BehaviorError::MissingTest("t1".into())));
    let extra = to_map(&[FP, PP, PF]);
    assert_eq!(is_resolved(&r, &extra), Ok(true));
}

fn behavior() -> impl Strategy<Value = TestBehavior> {
    prop::sample::select(ORDER.to_vec())
}

proptest! {
    #[test]
    fn self_resolution(bs in prop::collection::vec(behavior(), 0..30)) {
        let m = to_map(&bs);
        prop_assert_eq!(is_resolved(&m, &m), Ok(true));
    }

    #[test]
    fn improving_a_candidate_keeps_it_resolved(bs in prop::collection::vec(behavior(), 1..20), pick in any::<prop::sample::Index>()) {
        let r = to_map(&bs);
        let mut cand = bs.clone();
        let i = pick.index(cand.len());
        cand[i] = if cand[i].pre == TestStatus::Fail { FP } else { PP };
        prop_assert_eq!(is_resolved(&r, &to_map(&cand)), Ok(true));
    }

    #[test]
    fn classify_matches_linear_scan(bs in prop::collection::vec(behavior(), 0..40)) {
        let counts = classify(&to_map(&bs));
        let tally = |b: TestBehavior| bs.iter().filter(|x| **x == b).count();
        prop_assert_eq!(
            (counts.pass_to_pass, counts.fail_to_pass, counts.fail_to_fail, counts.pass_to_fail),
            (tally(PP), tally(FP), tally(FF), tally(PF))
        );
        prop_assert_eq!(counts.total(), bs.len());
        let mut rev = bs.clone();
        rev.reverse();
        let reversed: BehaviorMap = rev.iter().enumerate().map(|(i, b)| (format!("t{}", bs.len() - 1 - i), *b)).collect();
        prop_assert_eq!(classify(&reversed), counts);
    }
}
