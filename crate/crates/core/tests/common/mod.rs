#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trimcast_core::reducer::ReduceConfig;
use trimcast_core::{Budget, Entry, Family, Instance, Item, Solution};

/// A random valid solution small enough for the brute-force oracle:
/// at most 12 runs, 16 pieces and 5 distinct widths.
pub fn tiny_case(seed: u64) -> (Instance, Solution) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let master = 100u32;
    let n_widths = rng.random_range(2..=5);
    let mut widths: Vec<u32> = Vec::new();
    while widths.len() < n_widths {
        let w = rng.random_range(2..=12) * 5;
        if !widths.contains(&w) {
            widths.push(w);
        }
    }
    let runs = rng.random_range(1..=12);
    let mut pieces_left = 16usize;
    let mut entries = Vec::new();
    for r in 0..runs {
        let runs_after = runs - r - 1;
        let mut pattern = Vec::new();
        let mut used = 0;
        let cap = rng.random_range(1..=4usize);
        while pattern.len() < cap && pieces_left > runs_after {
            let w = widths[rng.random_range(0..widths.len())];
            if used + w > master {
                if pattern.is_empty() {
                    continue;
                }
                break;
            }
            used += w;
            pattern.push(w);
            pieces_left -= 1;
        }
        entries.push(Entry::new(1, pattern));
    }
    let s = Solution::new(format!("tiny-{seed}"), entries).canonicalize();
    let items = s
        .production()
        .into_iter()
        .map(|(width, n)| Item { width, demand: n as u32 })
        .collect();
    let inst = Instance::new(s.instance_id.clone(), Family::CUSTOM, master, items, 12).unwrap();
    (inst, s)
}

/// Reducer settings wide enough that the exact search sees the whole tiny case.
pub fn ample_config() -> ReduceConfig {
    ReduceConfig {
        budget: Budget::nodes(50_000_000),
        subset_max_patterns: 12,
        subset_max_runs: 12,
        enable_exact: true,
        rng_seed: 0,
        subset_node_limit: 10_000_000,
    }
}
