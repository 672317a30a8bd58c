//! Exhaustive minimum pattern count for tiny cases. Used as a test oracle
//! for the reducer; shares no search code with it.

use crate::error::{Error, Result};
use crate::solution::{ProductionVector, Width};

pub const ORACLE_MAX_RUNS: u64 = 12;
pub const ORACLE_MAX_PIECES: u64 = 16;
pub const ORACLE_MAX_WIDTHS: usize = 5;

/// Minimum number of distinct patterns over every way of cutting exactly
/// `production` in exactly `runs` runs. Runs are enumerated as a multiset of
/// patterns (non-decreasing pattern index), which removes run permutations.
pub fn brute_force_min_patterns(
    production: &ProductionVector,
    runs: u64,
    master: Width,
    max_pieces: usize,
) -> Result<usize> {
    let pieces: u64 = production.values().sum();
    if runs > ORACLE_MAX_RUNS || pieces > ORACLE_MAX_PIECES || production.len() > ORACLE_MAX_WIDTHS {
        return Err(Error::OracleLimits(format!(
            "runs {runs} (max {ORACLE_MAX_RUNS}), pieces {pieces} (max {ORACLE_MAX_PIECES}), widths {} (max {ORACLE_MAX_WIDTHS})",
            production.len()
        )));
    }
    if runs == 0 {
        return if pieces == 0 {
            Ok(0)
        } else {
            Err(Error::InvalidSolution("pieces without runs".into()))
        };
    }

    let widths: Vec<Width> = production.keys().copied().collect();
    let counts: Vec<u64> = production.values().copied().collect();

    // every non-empty sub-multiset of the production that fits one run
    let mut candidates: Vec<Vec<u64>> = Vec::new();
    let mut cur = vec![0u64; widths.len()];
    all_patterns(&widths, &counts, 0, 0, 0, master, max_pieces, &mut cur, &mut candidates);

    let mut best: Option<usize> = None;
    let mut rem = counts.clone();
    let mut used = vec![false; candidates.len()];
    assign(&candidates, 0, runs, &mut rem, &mut used, 0, &mut best);
    best.ok_or_else(|| Error::InvalidSolution("no arrangement reproduces the production".into()))
}

#[allow(clippy::too_many_arguments)]
fn all_patterns(
    widths: &[Width],
    counts: &[u64],
    idx: usize,
    used: u64,
    pieces: usize,
    master: Width,
    max_pieces: usize,
    cur: &mut Vec<u64>,
    out: &mut Vec<Vec<u64>>,
) {
    if idx == widths.len() {
        if pieces > 0 {
            out.push(cur.clone());
        }
        return;
    }
    for k in 0..=counts[idx] {
        let u = used + k * u64::from(widths[idx]);
        if u > u64::from(master) || pieces + k as usize > max_pieces {
            break;
        }
        cur[idx] = k;
        all_patterns(widths, counts, idx + 1, u, pieces + k as usize, master, max_pieces, cur, out);
    }
    cur[idx] = 0;
}

fn assign(
    candidates: &[Vec<u64>],
    from: usize,
    runs_left: u64,
    rem: &mut Vec<u64>,
    used: &mut Vec<bool>,
    distinct: usize,
    best: &mut Option<usize>,
) {
    if best.is_some_and(|b| distinct >= b) {
        return;
    }
    if runs_left == 0 {
        if rem.iter().all(|&r| r == 0) {
            *best = Some(distinct);
        }
        return;
    }
    let left: u64 = rem.iter().sum();
    if left < runs_left {
        return;
    }
    for i in from..candidates.len() {
        let pat = &candidates[i];
        if pat.iter().zip(rem.iter()).any(|(k, r)| k > r) {
            continue;
        }
        for (r, k) in rem.iter_mut().zip(pat) {
            *r -= k;
        }
        let fresh = !used[i];
        used[i] = true;
        assign(candidates, i, runs_left - 1, rem, used, distinct + fresh as usize, best);
        if fresh {
            used[i] = false;
        }
        for (r, k) in rem.iter_mut().zip(pat) {
            *r += k;
        }
    }
}
