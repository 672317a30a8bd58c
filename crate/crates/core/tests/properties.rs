mod common;

use proptest::prelude::*;
use trimcast_core::encoder::{decode, encode, DEFAULT_ROWS, DEFAULT_SLOTS};
use trimcast_core::instancegen::{default_config, generate};
use trimcast_core::trimsolver::{solve_initial, SolverConfig};
use trimcast_core::{are_equivalent, reduce, validate, Budget, CancelToken, Entry, Family, ReduceConfig, Solution};

const MASTER: u32 = 5000;

fn entry() -> impl Strategy<Value = Entry> {
    (1u32..30, prop::collection::vec(prop::sample::select(vec![500u32, 730, 910, 1200, 1450]), 1..6))
        .prop_map(|(c, w)| Entry::new(c, w))
}

fn solution() -> impl Strategy<Value = Solution> {
    prop::collection::vec(entry(), 1..20).prop_map(|e| Solution::new("p", e))
}

/// Splits the first entry with at least two runs into two entries.
fn split_first(s: &Solution) -> Solution {
    let mut out = s.clone();
    if let Some(i) = out.entries.iter().position(|e| e.repetitions > 1) {
        let e = out.entries[i].clone();
        out.entries[i].repetitions = 1;
        out.entries.push(Entry { repetitions: e.repetitions - 1, ..e });
    }
    out
}

proptest! {
    #[test]
    fn canonicalize_is_idempotent(s in solution()) {
        let c = s.canonicalize();
        prop_assert!(c.is_canonical());
        prop_assert_eq!(c.canonicalize(), c.clone());
        prop_assert!(are_equivalent(&s, &c).unwrap());
        prop_assert!(c.pattern_count() <= s.pattern_count());
    }

    #[test]
    fn canonical_form_ignores_order_and_splits(s in solution(), seed in any::<u64>()) {
        let mut shuffled = split_first(&s);
        let k = (seed % shuffled.entries.len() as u64) as usize;
        shuffled.entries.rotate_left(k);
        shuffled.entries.reverse();
        prop_assert_eq!(shuffled.canonicalize(), s.canonicalize());
    }

    #[test]
    fn equivalence_is_an_equivalence(a in solution(), b in solution()) {
        let c = split_first(&a);
        prop_assert!(are_equivalent(&a, &a).unwrap());
        prop_assert_eq!(are_equivalent(&a, &b).unwrap(), are_equivalent(&b, &a).unwrap());
        prop_assert!(are_equivalent(&a, &c).unwrap());
        prop_assert!(are_equivalent(&c, &a.canonicalize()).unwrap());
        if are_equivalent(&a, &b).unwrap() {
            prop_assert!(are_equivalent(&c, &b).unwrap());
        }
    }

    #[test]
    fn encoding_ignores_entry_order(s in solution()) {
        let mut r = s.clone();
        r.entries.reverse();
        prop_assert_eq!(
            encode(&s, MASTER, DEFAULT_ROWS, DEFAULT_SLOTS).unwrap(),
            encode(&r, MASTER, DEFAULT_ROWS, DEFAULT_SLOTS).unwrap()
        );
    }

    #[test]
    fn decode_inverts_encode(s in solution(), master in 1500u32..8000) {
        let m = encode(&s, master, DEFAULT_ROWS, DEFAULT_SLOTS).unwrap();
        prop_assert_eq!(decode(&m, master, "p").unwrap(), s.canonicalize());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reduce_keeps_production(
        family in prop::sample::select(vec![Family::CCM, Family::F, Family::FP]),
        seed in 0u64..10_000,
        nodes in 1_000u64..200_000,
    ) {
        let inst = generate(&default_config(family).unwrap(), seed).unwrap();
        let s = solve_initial(&inst, &SolverConfig::default()).unwrap();
        let cfg = ReduceConfig { budget: Budget::nodes(nodes), ..ReduceConfig::default() };
        let (out, trace) = reduce(&s, &inst, &cfg, &CancelToken::new()).unwrap();
        prop_assert!(validate(&out, &inst).is_valid());
        prop_assert!(are_equivalent(&s, &out).unwrap());
        prop_assert!(out.is_canonical());
        prop_assert!(out.pattern_count() <= s.canonicalize().pattern_count());
        let counts: Vec<usize> = trace.milestones.iter().map(|m| m.pattern_count).collect();
        prop_assert!(counts.windows(2).all(|w| w[1] < w[0]));
        prop_assert_eq!(trace.final_count(), Some(out.pattern_count()));
    }

    #[test]
    fn tiny_cases_are_valid(seed in any::<u64>()) {
        let (inst, s) = common::tiny_case(seed);
        prop_assert!(validate(&s, &inst).is_valid());
        prop_assert!(s.is_canonical());
    }
}
