//! Initial low-waste solutions: first-fit decreasing followed by a bounded
//! pairwise repack pass.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solution::{canonical_entries, Entry, Instance, Pattern, Solution, Width};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Run the pairwise repack pass after first-fit decreasing.
    pub repack: bool,
    /// Hard cap on pair attempts; the effective budget is
    /// `min(cap, 2 * bins^2)`.
    pub max_pair_attempts: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            repack: true,
            max_pair_attempts: 200_000,
        }
    }
}

#[derive(Clone, Debug)]
struct Bin {
    pieces: Vec<Width>,
    used: u64,
}

impl Bin {
    fn new(pieces: Vec<Width>) -> Self {
        let used = pieces.iter().map(|&w| u64::from(w)).sum();
        Bin { pieces, used }
    }
}

/// `ceil(sum(demand * width) / master)`.
pub fn lower_bound_runs(inst: &Instance) -> u64 {
    let area: u64 = inst
        .items
        .iter()
        .map(|i| u64::from(i.width) * u64::from(i.demand))
        .sum();
    area.div_ceil(u64::from(inst.master_width))
}

pub fn solve_initial(inst: &Instance, cfg: &SolverConfig) -> Result<Solution> {
    inst.check()?;
    let mut bins = first_fit_decreasing(inst)?;
    if cfg.repack {
        repack_pairs(&mut bins, inst, cfg.max_pair_attempts);
    }
    let entries: Vec<Entry> = bins
        .into_iter()
        .map(|b| Entry {
            repetitions: 1,
            pattern: Pattern::new(b.pieces),
        })
        .collect();
    Ok(Solution::new(inst.id.clone(), canonical_entries(&entries)))
}

fn first_fit_decreasing(inst: &Instance) -> Result<Vec<Bin>> {
    let master = u64::from(inst.master_width);
    let mut order: Vec<usize> = (0..inst.items.len()).collect();
    // stable: equal widths cannot occur, but keep item-index order anyway
    order.sort_by(|&a, &b| inst.items[b].width.cmp(&inst.items[a].width));

    let mut bins: Vec<Bin> = Vec::new();
    for idx in order {
        let item = inst.items[idx];
        let w = u64::from(item.width);
        if w > master {
            return Err(Error::InvalidInstance(format!(
                "width {} exceeds master {}",
                item.width, inst.master_width
            )));
        }
        for _ in 0..item.demand {
            let slot = bins
                .iter()
                .position(|b| b.used + w <= master && b.pieces.len() < inst.max_pieces);
            match slot {
                Some(i) => {
                    bins[i].pieces.push(item.width);
                    bins[i].used += w;
                }
                None => bins.push(Bin::new(vec![item.width])),
            }
        }
    }
    Ok(bins)
}

/// Re-splits the pieces of two bins so that the fuller bin gets as full as
/// possible. A move is taken only when it strictly raises the larger fill;
/// when everything fits in one bin the other one disappears. Total waste
/// therefore only ever drops (by a whole master per eliminated bin).
fn repack_pairs(bins: &mut Vec<Bin>, inst: &Instance, cap: usize) {
    let master = u64::from(inst.master_width);
    let budget = cap.min(2 * bins.len() * bins.len());
    let mut attempts = 0usize;
    let mut improved = true;
    while improved && attempts < budget {
        improved = false;
        // least-filled bins first: that is where slack concentrates
        bins.sort_by(|a, b| a.used.cmp(&b.used).then_with(|| b.pieces.cmp(&a.pieces)));
        'outer: for i in 0..bins.len() {
            for j in (i + 1)..bins.len() {
                if attempts >= budget {
                    break 'outer;
                }
                if bins[i].pieces.is_empty() || bins[j].pieces.is_empty() {
                    continue;
                }
                if bins[i].used == master || bins[j].used == master {
                    continue;
                }
                attempts += 1;
                let current = bins[i].used.max(bins[j].used);
                if let Some((a, b)) = best_split(&bins[i], &bins[j], master, inst.max_pieces) {
                    let fill = a.used.max(b.used);
                    if fill > current {
                        bins[i] = a;
                        bins[j] = b;
                        improved = true;
                    }
                }
            }
        }
        bins.retain(|b| !b.pieces.is_empty());
    }
}

/// Exhaustive split of two bins' pieces into (fuller, rest), maximising the
/// fuller bin's fill. Skips pairs holding more than `2 * max_pieces` pieces.
fn best_split(a: &Bin, b: &Bin, master: u64, max_pieces: usize) -> Option<(Bin, Bin)> {
    let mut pool: Vec<Width> = a.pieces.iter().chain(&b.pieces).copied().collect();
    if pool.len() > 2 * max_pieces {
        return None;
    }
    pool.sort_unstable_by(|x, y| y.cmp(x));
    let mut groups: Vec<(Width, u32)> = Vec::new();
    for &w in &pool {
        match groups.last_mut() {
            Some((g, n)) if *g == w => *n += 1,
            _ => groups.push((w, 1)),
        }
    }
    let total: u64 = pool.iter().map(|&w| u64::from(w)).sum();
    let total_count = pool.len();

    let mut best: Option<(u64, Vec<u32>)> = None;
    let mut take = vec![0u32; groups.len()];
    enumerate_takes(&groups, 0, 0, 0, &mut take, &mut |take, used, count| {
        let rest = total - used;
        let rest_count = total_count - count;
        if used > master || count > max_pieces || count == 0 {
            return;
        }
        if rest > master || rest_count > max_pieces {
            return;
        }
        if best.as_ref().is_none_or(|(f, _)| used > *f) {
            best = Some((used, take.to_vec()));
        }
    });

    let (_, take) = best?;
    let mut full = Vec::new();
    let mut rest = Vec::new();
    for (&(w, n), &k) in groups.iter().zip(&take) {
        full.extend(std::iter::repeat_n(w, k as usize));
        rest.extend(std::iter::repeat_n(w, (n - k) as usize));
    }
    Some((Bin::new(full), Bin::new(rest)))
}

fn enumerate_takes(
    groups: &[(Width, u32)],
    idx: usize,
    used: u64,
    count: usize,
    take: &mut Vec<u32>,
    visit: &mut dyn FnMut(&[u32], u64, usize),
) {
    if idx == groups.len() {
        visit(take, used, count);
        return;
    }
    let (w, n) = groups[idx];
    for k in 0..=n {
        take[idx] = k;
        enumerate_takes(
            groups,
            idx + 1,
            used + u64::from(w) * u64::from(k),
            count + k as usize,
            take,
            visit,
        );
    }
    take[idx] = 0;
}
