use std::time::Instant;

use lineup_core::{
    class_sum, doneck_dolphins_2022, enumerate_valid_lineups, solve_single, Engine, Lineup, RuleSet,
    SelectionConstraints,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Census by brute force over all 2^9 subsets with float arithmetic.
fn bitmask_census(caps: &[f64]) -> [usize; 4] {
    let classes = [1.5, 2.0, 3.5, 4.5, 1.0, 4.5, 3.5, 3.5, 4.5];
    let female = [true, false, false, false, false, true, false, true, false];
    let mut strata = [0; 4];
    for mask in 0u32..512 {
        if mask.count_ones() != 5 {
            continue;
        }
        let members = (0..9).filter(|i| mask >> i & 1 == 1);
        let (sum, women) = members.fold((0.0, 0), |(s, w), i| (s + classes[i], w + female[i] as usize));
        if sum <= caps[women.min(caps.len() - 1)] {
            strata[women] += 1;
        }
    }
    strata
}

fn strata(lineups: &[Lineup]) -> [usize; 4] {
    let roster = doneck_dolphins_2022();
    let mut s = [0; 4];
    for l in lineups {
        s[l.female_count(&roster)] += 1;
    }
    s
}

#[test]
fn census_matches_bitmask_oracle() {
    let roster = doneck_dolphins_2022();
    let none = SelectionConstraints::default();
    let rbbl = enumerate_valid_lineups(&roster, &RuleSet::rbbl(), &none).unwrap();
    assert_eq!(strata(&rbbl), bitmask_census(&[14.5, 16.0, 17.5]));
    let bonus = enumerate_valid_lineups(&roster, &RuleSet::rbbl_per_woman_bonus(), &none).unwrap();
    assert_eq!(strata(&bonus), bitmask_census(&[14.5, 16.0, 17.5, 19.0]));
    let iwbf = enumerate_valid_lineups(&roster, &RuleSet::iwbf(), &none).unwrap();
    assert_eq!(strata(&iwbf), bitmask_census(&[14.0]));
    for l in rbbl.iter().chain(&iwbf) {
        assert!(class_sum(l, &roster).value() <= 17.5);
    }
}

#[test]
fn branch_and_bound_equals_exhaustive_on_1000_vectors() {
    let roster = doneck_dolphins_2022();
    let none = SelectionConstraints::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let start = Instant::now();
    for rules in [RuleSet::iwbf(), RuleSet::rbbl()] {
        for k in 0..1000 {
            // Every fifth vector is rounded to create exact ties.
            let values: Vec<f64> = (0..9)
                .map(|_| {
                    let v: f64 = rng.random_range(-0.5..1.5);
                    if k % 5 == 0 { (v * 4.0).round() / 4.0 } else { v }
                })
                .collect();
            let a = solve_single(&values, &roster, &rules, &none, Engine::Exhaustive).unwrap();
            let b = solve_single(&values, &roster, &rules, &none, Engine::BranchAndBound).unwrap();
            assert_eq!(a, b, "values {values:?}");
        }
    }
    assert!(start.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn engines_agree_under_constraints() {
    let roster = doneck_dolphins_2022();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let cases = [
        SelectionConstraints { pinned: [1, 2, 4, 9].into(), banned: Default::default() },
        SelectionConstraints { pinned: Default::default(), banned: [4].into() },
        SelectionConstraints { pinned: [6].into(), banned: [9, 3].into() },
    ];
    for c in &cases {
        for _ in 0..200 {
            let values: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
            let a = solve_single(&values, &roster, &RuleSet::rbbl(), c, Engine::Exhaustive).unwrap();
            let b = solve_single(&values, &roster, &RuleSet::rbbl(), c, Engine::BranchAndBound).unwrap();
            assert_eq!(a, b);
            assert!(c.pinned.iter().all(|&p| a.contains(p)));
            assert!(c.banned.iter().all(|&p| !a.contains(p)));
        }
    }
}
