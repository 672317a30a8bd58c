mod common;

use trimcast_core::reducer::brute_force_min_patterns;
use trimcast_core::{are_equivalent, reduce, validate, CancelToken};

#[test]
fn reduce_matches_brute_force_on_tiny_cases() {
    for seed in 0..300 {
        let (inst, s) = common::tiny_case(seed);
        let expected =
            brute_force_min_patterns(&s.production(), s.run_length(), inst.master_width, inst.max_pieces)
                .unwrap();
        let (out, _) = reduce(&s, &inst, &common::ample_config(), &CancelToken::new()).unwrap();
        assert!(are_equivalent(&s, &out).unwrap());
        assert!(validate(&out, &inst).is_valid());
        assert_eq!(out.pattern_count(), expected, "seed {seed}: {s:?} -> {out:?}");
    }
}

