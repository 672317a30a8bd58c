//! Anytime pattern-count reduction.
//!
//! Every move rewrites a handful of entries into an equivalent set (same run
//! length, same production) and is only applied when the canonical pattern
//! count strictly drops. Moves, cheapest first:
//!
//! 1. canonical merge of identical contents;
//! 2. pairwise swap: exchange pieces between two patterns so one of them
//!    becomes a copy of a third pattern;
//! 3. exact subset search over pairs, triples, ... of entries;
//! 4. repetition-split absorption: peel `c1` runs off a long entry and let the
//!    exact search rebuild its neighbours around that pattern for free.

mod exact;
mod meter;
mod oracle;

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use exact::{reduce_exact_subset, DEFAULT_SUBSET_NODE_LIMIT};
pub use meter::{Budget, CancelToken};
pub use oracle::{brute_force_min_patterns, ORACLE_MAX_PIECES, ORACLE_MAX_RUNS, ORACLE_MAX_WIDTHS};

use crate::error::{Error, Result};
use crate::solution::{canonical_entries, validate, Entry, Instance, Pattern, Solution, Width};
use exact::{minimize, Outcome};
use meter::{Meter, Stop};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReduceConfig {
    pub budget: Budget,
    pub subset_max_patterns: usize,
    pub subset_max_runs: u64,
    pub enable_exact: bool,
    pub rng_seed: u64,
    #[serde(default = "default_node_limit")]
    pub subset_node_limit: u64,
}

fn default_node_limit() -> u64 {
    DEFAULT_SUBSET_NODE_LIMIT
}

impl Default for ReduceConfig {
    fn default() -> Self {
        ReduceConfig {
            budget: Budget::WallClock { millis: 150_000 },
            subset_max_patterns: 4,
            subset_max_runs: 40,
            enable_exact: true,
            rng_seed: 0,
            subset_node_limit: DEFAULT_SUBSET_NODE_LIMIT,
        }
    }
}

impl ReduceConfig {
    pub fn check(&self) -> Result<()> {
        let empty = match self.budget {
            Budget::WallClock { millis } => millis == 0,
            Budget::Nodes { count } => count == 0,
        };
        if empty {
            return Err(Error::InvalidSolution("reduce budget must be positive".into()));
        }
        if self.subset_max_patterns < 2 {
            return Err(Error::InvalidSolution("subset_max_patterns must be at least 2".into()));
        }
        Ok(())
    }

    /// Short content hash; datasets record it so labels can be traced to the
    /// reducer settings that produced them.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(&Sha256::digest(&json)[..8])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalReason {
    BudgetExhausted,
    Fixpoint,
    Cancelled,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Milestone {
    pub elapsed_ms: u64,
    pub pattern_count: usize,
    pub nodes: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReduceTrace {
    pub milestones: Vec<Milestone>,
    pub reason: TerminalReason,
}

impl ReduceTrace {
    pub fn final_count(&self) -> Option<usize> {
        self.milestones.last().map(|m| m.pattern_count)
    }
}

/// Observer callback: receives every improved solution with its milestone.
pub type Observer<'a> = dyn FnMut(&Solution, &Milestone) + 'a;

pub fn reduce(
    s: &Solution,
    inst: &Instance,
    cfg: &ReduceConfig,
    cancel: &CancelToken,
) -> Result<(Solution, ReduceTrace)> {
    reduce_observed(s, inst, cfg, cancel, &mut |_, _| {})
}

pub fn reduce_observed(
    s: &Solution,
    inst: &Instance,
    cfg: &ReduceConfig,
    cancel: &CancelToken,
    observer: &mut Observer<'_>,
) -> Result<(Solution, ReduceTrace)> {
    check_input(s, inst, cfg)?;
    let meter = Meter::new(cfg.budget, cancel.clone());
    let mut engine = Engine::new(s, inst.master_width, inst.max_pieces, cfg, meter, observer);
    Ok(engine.run())
}

/// Splits the solution into blocks of at most `subset_max_patterns` entries,
/// reduces each block on its own, then runs one more pass over the union.
pub fn reduce_by_split(
    s: &Solution,
    inst: &Instance,
    cfg: &ReduceConfig,
    cancel: &CancelToken,
) -> Result<(Solution, ReduceTrace)> {
    check_input(s, inst, cfg)?;
    let start = std::time::Instant::now();
    let canonical = s.canonicalize();
    let blocks: Vec<&[Entry]> = canonical.entries.chunks(cfg.subset_max_patterns).collect();
    let share = cfg.budget.share(blocks.len() as u64 + 1);

    let mut milestones = vec![Milestone {
        elapsed_ms: 0,
        pattern_count: s.pattern_count(),
        nodes: 0,
    }];
    let mut nodes = 0;
    let mut union = Vec::new();
    for block in &blocks {
        let part = Solution::new(s.instance_id.clone(), block.to_vec());
        let meter = Meter::new(share, cancel.clone());
        let mut quiet = |_: &Solution, _: &Milestone| {};
        let mut engine = Engine::new(&part, inst.master_width, inst.max_pieces, cfg, meter, &mut quiet);
        let (reduced, _) = engine.run();
        nodes += engine.meter.nodes();
        union.extend(reduced.entries);
    }
    let merged = Solution::new(s.instance_id.clone(), canonical_entries(&union));
    if merged.pattern_count() < s.pattern_count() {
        milestones.push(Milestone {
            elapsed_ms: start.elapsed().as_millis() as u64,
            pattern_count: merged.pattern_count(),
            nodes,
        });
    }

    let remaining = match cfg.budget {
        Budget::WallClock { millis } => Budget::WallClock {
            millis: millis.saturating_sub(start.elapsed().as_millis() as u64).max(1),
        },
        Budget::Nodes { count } => Budget::Nodes {
            count: count.saturating_sub(nodes).max(1),
        },
    };
    let meter = Meter::new(remaining, cancel.clone());
    let mut quiet = |_: &Solution, _: &Milestone| {};
    let mut engine = Engine::new(&merged, inst.master_width, inst.max_pieces, cfg, meter, &mut quiet);
    let (result, trace) = engine.run();
    let offset = (start.elapsed().as_millis() as u64).saturating_sub(engine.meter.elapsed().as_millis() as u64);
    milestones.extend(trace.milestones.into_iter().skip(1).map(|m| Milestone {
        elapsed_ms: m.elapsed_ms + offset,
        pattern_count: m.pattern_count,
        nodes: m.nodes + nodes,
    }));
    Ok((
        result,
        ReduceTrace {
            milestones,
            reason: trace.reason,
        },
    ))
}

fn check_input(s: &Solution, inst: &Instance, cfg: &ReduceConfig) -> Result<()> {
    cfg.check()?;
    let v = validate(s, inst);
    if !v.is_valid() {
        return Err(Error::InvalidSolution(v.diagnostics.join("; ")));
    }
    Ok(())
}

type SubsetKey = (Vec<Entry>, Option<Pattern>);

struct Engine<'a, 'o> {
    instance_id: String,
    master: Width,
    max_pieces: usize,
    cfg: &'a ReduceConfig,
    meter: Meter,
    entries: Vec<Entry>,
    milestones: Vec<Milestone>,
    /// Subsets the exact search proved irreducible.
    proven: HashSet<SubsetKey>,
    observer: &'a mut Observer<'o>,
}

impl<'a, 'o> Engine<'a, 'o> {
    fn new(
        s: &Solution,
        master: Width,
        max_pieces: usize,
        cfg: &'a ReduceConfig,
        meter: Meter,
        observer: &'a mut Observer<'o>,
    ) -> Self {
        Engine {
            instance_id: s.instance_id.clone(),
            master,
            max_pieces,
            cfg,
            meter,
            entries: s.entries.clone(),
            milestones: vec![Milestone {
                elapsed_ms: 0,
                pattern_count: s.pattern_count(),
                nodes: 0,
            }],
            proven: HashSet::new(),
            observer,
        }
    }

    fn solution(&self) -> Solution {
        Solution::new(self.instance_id.clone(), self.entries.clone())
    }

    fn run(&mut self) -> (Solution, ReduceTrace) {
        let merged = canonical_entries(&self.entries);
        if merged.len() < self.entries.len() {
            self.apply(merged);
        } else {
            self.entries = merged;
        }
        let mut sweep = 0u64;
        let reason = loop {
            if self.meter.is_stopped() {
                break self.stop_reason();
            }
            if self.entries.len() <= 1 {
                break TerminalReason::Fixpoint;
            }
            let improved = self.sweep(sweep);
            sweep += 1;
            if !improved {
                break if self.meter.is_stopped() {
                    self.stop_reason()
                } else {
                    TerminalReason::Fixpoint
                };
            }
        };
        (
            self.solution(),
            ReduceTrace {
                milestones: self.milestones.clone(),
                reason,
            },
        )
    }

    fn stop_reason(&self) -> TerminalReason {
        match self.meter.stop_reason() {
            Some(Stop::Cancelled) => TerminalReason::Cancelled,
            _ => TerminalReason::BudgetExhausted,
        }
    }

    fn apply(&mut self, entries: Vec<Entry>) {
        debug_assert!(entries.len() < self.entries.len());
        self.entries = entries;
        let m = Milestone {
            elapsed_ms: self.meter.elapsed().as_millis() as u64,
            pattern_count: self.entries.len(),
            nodes: self.meter.nodes(),
        };
        let s = self.solution();
        (self.observer)(&s, &m);
        self.milestones.push(m);
    }

    /// One pass over the move set; stops at the first improvement.
    fn sweep(&mut self, sweep: u64) -> bool {
        if self.try_swaps() {
            return true;
        }
        if !self.cfg.enable_exact {
            return false;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.rng_seed ^ sweep.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        self.try_subsets(&mut rng) || self.try_split_absorb(&mut rng)
    }

    /// Replaces `removed` entries with `added` and applies the result if it
    /// has fewer patterns.
    fn replace(&mut self, removed: &[usize], added: Vec<Entry>) -> bool {
        let mut next: Vec<Entry> = self
            .entries
            .iter()
            .enumerate()
            .filter(|(i, _)| !removed.contains(i))
            .map(|(_, e)| e.clone())
            .collect();
        next.extend(added);
        let next = canonical_entries(&next);
        if next.len() < self.entries.len() {
            self.apply(next);
            true
        } else {
            false
        }
    }

    fn try_swaps(&mut self) -> bool {
        let n = self.entries.len();
        for p in 0..n {
            for r in 0..n {
                if r == p {
                    continue;
                }
                let give = multiset_diff(self.entries[p].pattern.widths(), self.entries[r].pattern.widths());
                let want = multiset_diff(self.entries[r].pattern.widths(), self.entries[p].pattern.widths());
                for q in 0..n {
                    if q == p || q == r {
                        continue;
                    }
                    if !self.meter.charge(1) {
                        return false;
                    }
                    let qw = self.entries[q].pattern.widths();
                    if !multiset_contains(qw, &want) {
                        continue;
                    }
                    let mut q_new = multiset_diff(qw, &want);
                    q_new.extend_from_slice(&give);
                    if q_new.is_empty() || q_new.len() > self.max_pieces {
                        continue;
                    }
                    let q_new = Pattern::new(q_new);
                    if q_new.used_width() > u64::from(self.master) {
                        continue;
                    }
                    let (cp, cq) = (self.entries[p].repetitions, self.entries[q].repetitions);
                    let t = cp.min(cq);
                    let added = vec![
                        Entry {
                            repetitions: cp - t,
                            pattern: self.entries[p].pattern.clone(),
                        },
                        Entry {
                            repetitions: t,
                            pattern: self.entries[r].pattern.clone(),
                        },
                        Entry {
                            repetitions: cq - t,
                            pattern: self.entries[q].pattern.clone(),
                        },
                        Entry {
                            repetitions: t,
                            pattern: q_new,
                        },
                    ];
                    if self.replace(&[p, q], added) {
                        return true;
                    }
                }
            }
        }
        false
    }

    fn shared(&self, i: usize, j: usize) -> usize {
        let a = self.entries[i].pattern.groups();
        let b = self.entries[j].pattern.groups();
        a.iter().filter(|(w, _)| b.iter().any(|(v, _)| v == w)).count()
    }

    /// Subsets to try this sweep: the whole solution when small enough, all
    /// pairs (most shared widths first), then greedy and random larger sets.
    fn subset_candidates(&self, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
        let n = self.entries.len();
        let max_runs = self.cfg.subset_max_runs;
        let runs = |s: &[usize]| -> u64 { s.iter().map(|&i| u64::from(self.entries[i].repetitions)).sum() };
        let mut out: Vec<Vec<usize>> = Vec::new();
        let mut seen: HashSet<Vec<usize>> = HashSet::new();
        let mut push = |mut s: Vec<usize>, out: &mut Vec<Vec<usize>>| {
            s.sort_unstable();
            if seen.insert(s.clone()) {
                out.push(s);
            }
        };

        let all: Vec<usize> = (0..n).collect();
        if n <= self.cfg.subset_max_patterns && runs(&all) <= max_runs {
            push(all, &mut out);
        }

        let mut pairs: Vec<(usize, u64, Vec<usize>)> = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if runs(&[i, j]) <= max_runs {
                    pairs.push((self.shared(i, j), rng.random(), vec![i, j]));
                }
            }
        }
        pairs.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        for (_, _, p) in pairs {
            push(p, &mut out);
        }

        let mut anchors: Vec<usize> = (0..n).collect();
        for size in 3..=self.cfg.subset_max_patterns.min(n) {
            anchors.shuffle(rng);
            for &a in &anchors {
                if let Some(s) = self.grow(vec![a], size, rng, true) {
                    push(s, &mut out);
                }
                if let Some(s) = self.grow(vec![a], size, rng, false) {
                    push(s, &mut out);
                }
            }
        }
        out
    }

    /// Extends `set` to `size` entries within the run cap, either greedily by
    /// shared widths or at random.
    fn grow(&self, mut set: Vec<usize>, size: usize, rng: &mut ChaCha8Rng, greedy: bool) -> Option<Vec<usize>> {
        let mut total: u64 = set.iter().map(|&i| u64::from(self.entries[i].repetitions)).sum();
        while set.len() < size {
            let options: Vec<usize> = (0..self.entries.len())
                .filter(|j| !set.contains(j))
                .filter(|&j| total + u64::from(self.entries[j].repetitions) <= self.cfg.subset_max_runs)
                .collect();
            if options.is_empty() {
                return None;
            }
            let pick = if greedy {
                let score = |j: usize| set.iter().map(|&i| self.shared(i, j)).sum::<usize>();
                let best = options.iter().map(|&j| score(j)).max().unwrap();
                let top: Vec<usize> = options.into_iter().filter(|&j| score(j) == best).collect();
                top[rng.random_range(0..top.len())]
            } else {
                options[rng.random_range(0..options.len())]
            };
            total += u64::from(self.entries[pick].repetitions);
            set.push(pick);
        }
        Some(set)
    }

    fn try_subsets(&mut self, rng: &mut ChaCha8Rng) -> bool {
        for subset in self.subset_candidates(rng) {
            let es: Vec<Entry> = subset.iter().map(|&i| self.entries[i].clone()).collect();
            let key = (es, None);
            if self.proven.contains(&key) {
                continue;
            }
            match minimize(&key.0, None, self.master, self.max_pieces, self.cfg.subset_node_limit, &mut self.meter) {
                Outcome::Found(found) => {
                    if self.replace(&subset, found) {
                        return true;
                    }
                }
                Outcome::Proven => {
                    self.proven.insert(key);
                }
                Outcome::Aborted => {
                    if self.meter.is_stopped() {
                        return false;
                    }
                }
            }
        }
        false
    }

    fn try_split_absorb(&mut self, rng: &mut ChaCha8Rng) -> bool {
        let n = self.entries.len();
        let max_runs = self.cfg.subset_max_runs;
        for i in 0..n {
            let c = u64::from(self.entries[i].repetitions);
            if c < 2 {
                continue;
            }
            for size in 2..=self.cfg.subset_max_patterns.min(n) {
                // neighbours share the run cap with at least one peeled run
                let Some(set) = self.grow_neighbours(i, size - 1, max_runs - 1, rng) else {
                    break;
                };
                let neighbour_runs: u64 = set.iter().map(|&j| u64::from(self.entries[j].repetitions)).sum();
                let room = (max_runs - neighbour_runs).min(c - 1);
                let mut splits: Vec<u64> = set
                    .iter()
                    .map(|&j| u64::from(self.entries[j].repetitions))
                    .chain([room, 1])
                    .filter(|&v| v >= 1 && v <= room)
                    .collect();
                splits.sort_unstable_by(|a, b| b.cmp(a));
                splits.dedup();
                for c1 in splits {
                    if self.absorb(i, &set, c1) {
                        return true;
                    }
                    if self.meter.is_stopped() {
                        return false;
                    }
                }
            }
        }
        false
    }

    fn grow_neighbours(&self, anchor: usize, count: usize, cap: u64, rng: &mut ChaCha8Rng) -> Option<Vec<usize>> {
        let mut set: Vec<usize> = Vec::new();
        let mut total = 0u64;
        while set.len() < count {
            let options: Vec<usize> = (0..self.entries.len())
                .filter(|&j| j != anchor && !set.contains(&j))
                .filter(|&j| total + u64::from(self.entries[j].repetitions) <= cap)
                .collect();
            if options.is_empty() {
                return None;
            }
            let score = |j: usize| self.shared(anchor, j) * 2 + set.iter().map(|&k| self.shared(k, j)).sum::<usize>();
            let best = options.iter().map(|&j| score(j)).max().unwrap();
            let top: Vec<usize> = options.into_iter().filter(|&j| score(j) == best).collect();
            let pick = top[rng.random_range(0..top.len())];
            total += u64::from(self.entries[pick].repetitions);
            set.push(pick);
        }
        Some(set)
    }

    fn absorb(&mut self, anchor: usize, set: &[usize], c1: u64) -> bool {
        let free = self.entries[anchor].pattern.clone();
        let mut es: Vec<Entry> = set.iter().map(|&j| self.entries[j].clone()).collect();
        es.push(Entry {
            repetitions: c1 as u32,
            pattern: free.clone(),
        });
        let key = (es, Some(free.clone()));
        if self.proven.contains(&key) {
            return false;
        }
        match minimize(&key.0, Some(&free), self.master, self.max_pieces, self.cfg.subset_node_limit, &mut self.meter) {
            Outcome::Found(mut found) => {
                found.push(Entry {
                    repetitions: self.entries[anchor].repetitions - c1 as u32,
                    pattern: free,
                });
                let mut removed = set.to_vec();
                removed.push(anchor);
                self.replace(&removed, found)
            }
            Outcome::Proven => {
                self.proven.insert(key);
                false
            }
            Outcome::Aborted => false,
        }
    }
}

/// `a - b` for width multisets sorted in decreasing order.
fn multiset_diff(a: &[Width], b: &[Width]) -> Vec<Width> {
    let mut out = Vec::new();
    let mut j = 0;
    for &x in a {
        while j < b.len() && b[j] > x {
            j += 1;
        }
        if j < b.len() && b[j] == x {
            j += 1;
        } else {
            out.push(x);
        }
    }
    out
}

fn multiset_contains(a: &[Width], b: &[Width]) -> bool {
    multiset_diff(b, a).is_empty()
}
