//! Depth-first branch-and-bound over pattern sets with a fixed production
//! vector and run length.
//!
//! Patterns are emitted in strictly decreasing canonical order, so the next
//! pattern always starts with the largest width still to be cut. Patterns are
//! represented as count vectors over the subset's distinct widths (largest
//! first); lexicographic order on those vectors is the canonical order.

use crate::reducer::meter::{Budget, CancelToken, Meter};
use crate::solution::{canonical_entries, production_of, run_length_of, Entry, Pattern, Width};

/// Default node budget for one subset search.
pub const DEFAULT_SUBSET_NODE_LIMIT: u64 = 200_000;

pub(crate) enum Outcome {
    /// A minimum-cost rearrangement with strictly lower cost than the input.
    Found(Vec<Entry>),
    /// No cheaper rearrangement exists.
    Proven,
    /// Node limit, budget or cancellation hit before a conclusion.
    Aborted,
}

struct Search<'m> {
    widths: Vec<u64>,
    master: u64,
    max_pieces: usize,
    free: Option<Vec<u32>>,
    rem: Vec<u64>,
    rem_runs: u64,
    chosen: Vec<(u64, Vec<u32>)>,
    free_used: bool,
    meter: &'m mut Meter,
    local_limit: u64,
    local_nodes: u64,
    aborted: bool,
}

/// Finds the cheapest set of distinct patterns reproducing `entries`' run
/// length and production. Entries whose pattern equals `free` cost nothing.
pub(crate) fn minimize(
    entries: &[Entry],
    free: Option<&Pattern>,
    master: Width,
    max_pieces: usize,
    node_limit: u64,
    meter: &mut Meter,
) -> Outcome {
    let merged = canonical_entries(entries);
    let cost = |es: &[Entry]| es.iter().filter(|e| Some(&e.pattern) != free).count();
    let input_cost = cost(entries);
    if cost(&merged) < input_cost {
        return Outcome::Found(merged);
    }
    if input_cost == 0 {
        return Outcome::Proven;
    }

    let production = production_of(&merged);
    let widths: Vec<Width> = production.keys().rev().copied().collect();
    let rem: Vec<u64> = widths.iter().map(|w| production[w]).collect();
    let free_vec = free.and_then(|p| {
        let v: Vec<u32> = widths.iter().map(|&w| p.count_of(w)).collect();
        // a free pattern using widths outside the subset can never be formed
        (v.iter().map(|&c| c as usize).sum::<usize>() == p.len()).then_some(v)
    });

    let mut search = Search {
        widths: widths.iter().map(|&w| u64::from(w)).collect(),
        master: u64::from(master),
        max_pieces,
        free: free_vec,
        rem,
        rem_runs: run_length_of(&merged),
        chosen: Vec::new(),
        free_used: false,
        meter,
        local_limit: node_limit,
        local_nodes: 0,
        aborted: false,
    };

    let lower = search.cost_lower_bound();
    for target in lower..input_cost {
        if search.node(0, target) {
            let entries: Vec<Entry> = search
                .chosen
                .iter()
                .map(|(c, take)| Entry {
                    repetitions: *c as u32,
                    pattern: pattern_of(&widths, take),
                })
                .collect();
            return Outcome::Found(canonical_entries(&entries));
        }
        if search.aborted {
            return Outcome::Aborted;
        }
    }
    Outcome::Proven
}

/// Public entry point: a strictly smaller equivalent entry set for `entries`,
/// if the search finds one within `node_limit` nodes.
pub fn reduce_exact_subset(
    entries: &[Entry],
    master: Width,
    max_pieces: usize,
    node_limit: u64,
) -> Option<Vec<Entry>> {
    let mut meter = Meter::new(Budget::nodes(u64::MAX), CancelToken::new());
    match minimize(entries, None, master, max_pieces, node_limit, &mut meter) {
        Outcome::Found(found) => Some(found),
        Outcome::Proven | Outcome::Aborted => None,
    }
}

fn pattern_of(widths: &[Width], take: &[u32]) -> Pattern {
    let mut v = Vec::new();
    for (&w, &k) in widths.iter().zip(take) {
        v.extend(std::iter::repeat_n(w, k as usize));
    }
    Pattern::new(v)
}

impl Search<'_> {
    fn tick(&mut self) -> bool {
        self.local_nodes += 1;
        if self.local_nodes > self.local_limit || !self.meter.charge(1) {
            self.aborted = true;
        }
        !self.aborted
    }

    fn free_cap(&self) -> u64 {
        match (&self.free, self.free_used) {
            (Some(f), false) => f
                .iter()
                .zip(&self.rem)
                .filter(|(&k, _)| k > 0)
                .map(|(&k, &r)| r / u64::from(k))
                .min()
                .unwrap_or(0),
            _ => 0,
        }
    }

    /// Lower bound on the cost still to pay: one pattern covers at most
    /// `max(rem)` runs.
    fn cost_lower_bound(&self) -> usize {
        let max_rem = self.rem.iter().copied().max().unwrap_or(0);
        if max_rem == 0 {
            return 0;
        }
        let uncovered = self.rem_runs.saturating_sub(self.free_cap());
        uncovered.div_ceil(max_rem) as usize
    }

    /// Cheap necessary conditions on the remaining pieces and runs.
    fn feasible(&self) -> bool {
        let pieces: u64 = self.rem.iter().sum();
        if pieces == 0 {
            return self.rem_runs == 0;
        }
        if self.rem_runs == 0 || self.rem_runs > pieces {
            return false;
        }
        if pieces > self.rem_runs * self.max_pieces as u64 {
            return false;
        }
        let area: u64 = self.rem.iter().zip(&self.widths).map(|(r, w)| r * w).sum();
        if area > self.rem_runs * self.master {
            return false;
        }
        // at most one piece wider than half the master per run
        let wide: u64 = self
            .rem
            .iter()
            .zip(&self.widths)
            .filter(|(_, &w)| 2 * w > self.master)
            .map(|(r, _)| r)
            .sum();
        wide <= self.rem_runs
    }

    fn slack(&self) -> u64 {
        let area: u64 = self.rem.iter().zip(&self.widths).map(|(r, w)| r * w).sum();
        self.rem_runs * self.master - area
    }

    /// Places the next pattern. Returns true when a complete arrangement of
    /// cost `<= target` was found (left in `self.chosen`).
    fn node(&mut self, cost: usize, target: usize) -> bool {
        if !self.tick() {
            return false;
        }
        if !self.feasible() {
            return false;
        }
        let first = match self.rem.iter().position(|&r| r > 0) {
            Some(i) => i,
            None => return true,
        };
        if cost + self.cost_lower_bound() > target {
            return false;
        }
        let prev = self.chosen.last().map(|(_, t)| t.clone());
        // an earlier pattern with a larger leading width is already greater
        let tied = prev
            .as_ref()
            .is_some_and(|p| p.iter().position(|&k| k > 0) == Some(first));
        let min_fill = self.master - self.slack().min(self.master);
        let mut take = vec![0u32; self.widths.len()];
        self.patterns(first, first, 0, 0, tied, prev.as_deref(), min_fill, &mut take, cost, target)
    }

    #[allow(clippy::too_many_arguments)]
    fn patterns(
        &mut self,
        first: usize,
        idx: usize,
        used: u64,
        count: usize,
        tied: bool,
        prev: Option<&[u32]>,
        min_fill: u64,
        take: &mut Vec<u32>,
        cost: usize,
        target: usize,
    ) -> bool {
        if self.aborted {
            return false;
        }
        if idx == self.widths.len() {
            if tied {
                return false; // equal to the previous pattern
            }
            return self.place(take, used, cost, target);
        }
        // the most this pattern can still add: largest remaining pieces first
        let mut room = self.max_pieces - count;
        let mut reach = used;
        for j in idx..self.widths.len() {
            if room == 0 {
                break;
            }
            let k = (self.rem[j] as usize).min(room);
            reach += k as u64 * self.widths[j];
            room -= k;
        }
        if reach < min_fill {
            return false;
        }
        if !self.tick() {
            return false;
        }

        let w = self.widths[idx];
        let mut hi = self.rem[idx].min((self.max_pieces - count) as u64);
        hi = hi.min((self.master - used) / w);
        if tied {
            hi = hi.min(u64::from(prev.unwrap()[idx]));
        }
        let lo = if idx == first { 1 } else { 0 };
        if hi < lo {
            return false;
        }
        for k in (lo..=hi).rev() {
            take[idx] = k as u32;
            let still_tied = tied && k as u32 == prev.unwrap()[idx];
            if self.patterns(
                first,
                idx + 1,
                used + k * w,
                count + k as usize,
                still_tied,
                prev,
                min_fill,
                take,
                cost,
                target,
            ) {
                return true;
            }
            if self.aborted {
                break;
            }
        }
        take[idx] = 0;
        false
    }

    /// Tries every repetition count for the completed pattern `take`.
    fn place(&mut self, take: &[u32], used: u64, cost: usize, target: usize) -> bool {
        let is_free = self.free.as_deref() == Some(take);
        if is_free && self.free_used {
            return false;
        }
        let step_cost = if is_free { 0 } else { 1 };
        if cost + step_cost > target {
            return false;
        }
        let mut c_max = take
            .iter()
            .zip(&self.rem)
            .filter(|(&k, _)| k > 0)
            .map(|(&k, &r)| r / u64::from(k))
            .min()
            .unwrap_or(0)
            .min(self.rem_runs);
        let waste = self.master - used;
        if waste > 0 {
            c_max = c_max.min(self.slack() / waste);
        }
        for c in (1..=c_max).rev() {
            for (r, &k) in self.rem.iter_mut().zip(take) {
                *r -= c * u64::from(k);
            }
            self.rem_runs -= c;
            self.chosen.push((c, take.to_vec()));
            if is_free {
                self.free_used = true;
            }
            if self.node(cost + step_cost, target) {
                return true;
            }
            if is_free {
                self.free_used = false;
            }
            self.chosen.pop();
            self.rem_runs += c;
            for (r, &k) in self.rem.iter_mut().zip(take) {
                *r += c * u64::from(k);
            }
            if self.aborted {
                return false;
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solution::entries_equivalent;

    #[test]
    fn single_entry_has_nothing_to_gain() {
        assert_eq!(reduce_exact_subset(&[Entry::new(5, vec![60, 40])], 100, 12, 1000), None);
    }

    #[test]
    fn duplicates_merge() {
        let es = [Entry::new(1, vec![60, 40]), Entry::new(1, vec![40, 60])];
        assert_eq!(
            reduce_exact_subset(&es, 100, 12, 1000),
            Some(vec![Entry::new(2, vec![60, 40])])
        );
    }

    #[test]
    fn three_into_two() {
        // 50:3 30:2 20:2 over 3 runs is also (2,<50,30,20>) + (1,<50>)
        let es = [
            Entry::new(1, vec![50, 30, 20]),
            Entry::new(1, vec![50, 30]),
            Entry::new(1, vec![50, 20]),
        ];
        let found = reduce_exact_subset(&es, 100, 12, 100_000).expect("reducible");
        assert_eq!(
            found,
            vec![Entry::new(2, vec![50, 30, 20]), Entry::new(1, vec![50])]
        );
        assert!(entries_equivalent(&es, &found));
    }

    #[test]
    fn run_length_blocks_merging() {
        // four 50s over three runs cannot be one repeated pattern
        let es = [Entry::new(1, vec![50, 50]), Entry::new(2, vec![50])];
        assert_eq!(reduce_exact_subset(&es, 100, 12, 1000), None);
    }

    #[test]
    fn respects_max_pieces() {
        let es = [Entry::new(1, vec![50, 30]), Entry::new(1, vec![20, 20, 20])];
        // <50,30,20,...> would need 4+ pieces in some run
        assert_eq!(reduce_exact_subset(&es, 200, 2, 100_000), None);
        let es = [Entry::new(1, vec![60]), Entry::new(1, vec![40, 40])];
        // (2, <60, 40>) is impossible: 60 appears once
        assert_eq!(reduce_exact_subset(&es, 100, 12, 100_000), None);
        let es = [Entry::new(1, vec![60, 60]), Entry::new(1, vec![40, 40])];
        assert_eq!(
            reduce_exact_subset(&es, 120, 2, 100_000),
            Some(vec![Entry::new(2, vec![60, 40])])
        );
        assert_eq!(reduce_exact_subset(&es, 120, 1, 100_000), None);
    }

    #[test]
    fn free_pattern_costs_nothing() {
        // with <60,40> free: (2,<60,40>) + (1,<40,20>) costs one pattern
        let free = Pattern::new(vec![60, 40]);
        let es = [
            Entry::new(1, vec![60, 40]),
            Entry::new(1, vec![60, 20]),
            Entry::new(1, vec![40, 40]),
        ];
        let mut meter = Meter::new(Budget::nodes(u64::MAX), CancelToken::new());
        match minimize(&es, Some(&free), 100, 12, 100_000, &mut meter) {
            Outcome::Found(found) => {
                assert!(entries_equivalent(&es, &found));
                assert_eq!(
                    found,
                    vec![Entry::new(2, vec![60, 40]), Entry::new(1, vec![40, 20])]
                );
            }
            _ => panic!("expected a cheaper arrangement"),
        }
    }

    #[test]
    fn node_limit_aborts() {
        let es = [
            Entry::new(3, vec![50, 30, 20]),
            Entry::new(2, vec![45, 35, 20]),
            Entry::new(1, vec![50, 35, 15]),
            Entry::new(4, vec![45, 30, 15, 10]),
        ];
        let mut meter = Meter::new(Budget::nodes(u64::MAX), CancelToken::new());
        assert!(matches!(minimize(&es, None, 100, 12, 3, &mut meter), Outcome::Aborted));
    }
}
