//! Seeded random instances for the three industrial families: corrugated case
//! materials (CCM), plastic film (F) and fine paper (FP).

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solution::{Family, Instance, Item, Solution, Width};
use crate::trimsolver::{solve_initial, SolverConfig};

/// Accepted initial pattern counts (inclusive).
pub const INITIAL_PATTERN_RANGE: (usize, usize) = (5, 66);
/// Largest initial solution the generator will emit.
pub const MAX_INITIAL_PATTERNS: usize = 80;
pub const MAX_REJECTIONS: usize = 1000;

/// Items drawn from a separate width band with a fixed probability, e.g. the
/// metallised parent reels in film.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubPopulation {
    pub width_range: (Width, Width),
    pub share: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyConfig {
    pub family: Family,
    pub master_range: (Width, Width),
    /// Masters are drawn on this grid.
    #[serde(default = "default_master_step")]
    pub master_step: Width,
    pub width_range: (Width, Width),
    /// A width is on grid when it is a multiple of any listed value.
    pub width_grid: Vec<Width>,
    pub distinct_items_range: (usize, usize),
    pub demand_range: (u32, u32),
    pub max_pieces: usize,
    /// Exponent of the `width^skew` sampling weight; 0 is uniform.
    pub width_skew: f64,
    #[serde(default)]
    pub secondary: Option<SubPopulation>,
}

fn default_master_step() -> Width {
    10
}

impl FamilyConfig {
    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InfeasibleConfig(m.to_string()));
        let ranges = [self.master_range, self.width_range];
        if ranges.iter().any(|&(lo, hi)| lo == 0 || lo > hi) {
            return bad("empty or zero width/master range");
        }
        if self.distinct_items_range.0 == 0 || self.distinct_items_range.0 > self.distinct_items_range.1 {
            return bad("empty distinct_items_range");
        }
        if self.demand_range.0 == 0 || self.demand_range.0 > self.demand_range.1 {
            return bad("empty demand_range");
        }
        if self.max_pieces == 0 {
            return bad("max_pieces must be at least 1");
        }
        if self.master_step == 0 || self.width_grid.is_empty() || self.width_grid.contains(&0) {
            return bad("grid steps must be positive");
        }
        if !self.width_skew.is_finite() || self.width_skew < 0.0 {
            return bad("width_skew must be finite and non-negative");
        }
        if self.grid_widths(self.width_range).is_empty() {
            return bad("no grid width inside width_range");
        }
        if let Some(sub) = &self.secondary {
            if !(0.0..=1.0).contains(&sub.share) || sub.width_range.0 > sub.width_range.1 {
                return bad("bad secondary sub-population");
            }
        }
        Ok(())
    }

    pub fn on_grid(&self, w: Width) -> bool {
        self.width_grid.iter().any(|&g| w.is_multiple_of(g))
    }

    fn grid_widths(&self, (lo, hi): (Width, Width)) -> Vec<Width> {
        (lo..=hi).filter(|&w| self.on_grid(w)).collect()
    }
}

/// Preset for one of the industrial families.
pub fn default_config(family: Family) -> Result<FamilyConfig> {
    let base = FamilyConfig {
        family,
        master_range: (0, 0),
        master_step: 10,
        width_range: (0, 0),
        width_grid: vec![],
        distinct_items_range: (6, 35),
        demand_range: (2, 120),
        max_pieces: 12,
        width_skew: 0.0,
        secondary: None,
    };
    let cfg = match family {
        Family::CCM => FamilyConfig {
            master_range: (5000, 8000),
            width_range: (1800, 2500),
            width_grid: vec![10, 25],
            width_skew: 2.0,
            ..base
        },
        Family::F => FamilyConfig {
            master_range: (6000, 8000),
            width_range: (300, 1000),
            width_grid: vec![5],
            distinct_items_range: (6, 30),
            secondary: Some(SubPopulation {
                width_range: (1800, 2300),
                share: 0.15,
            }),
            ..base
        },
        Family::FP => FamilyConfig {
            master_range: (4000, 6000),
            width_range: (1500, 2300),
            width_grid: vec![10],
            ..base
        },
        Family::CUSTOM => return Err(Error::CustomFamily),
    };
    Ok(cfg)
}

/// Draws an instance whose initial solution has an acceptable pattern count.
pub fn generate(cfg: &FamilyConfig, seed: u64) -> Result<Instance> {
    generate_with_solution(cfg, seed).map(|(inst, _)| inst)
}

/// As [`generate`], also returning the initial solution used for acceptance.
pub fn generate_with_solution(cfg: &FamilyConfig, seed: u64) -> Result<(Instance, Solution)> {
    cfg.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let solver = SolverConfig::default();
    for _ in 0..MAX_REJECTIONS {
        let inst = draw(cfg, seed, &mut rng)?;
        let initial = solve_initial(&inst, &solver)?;
        let n = initial.pattern_count();
        if n >= INITIAL_PATTERN_RANGE.0 && n <= INITIAL_PATTERN_RANGE.1 && n <= MAX_INITIAL_PATTERNS {
            return Ok((inst, initial));
        }
    }
    Err(Error::InfeasibleConfig(format!(
        "{MAX_REJECTIONS} consecutive rejections for {} (seed {seed})",
        cfg.family
    )))
}

fn draw(cfg: &FamilyConfig, seed: u64, rng: &mut ChaCha8Rng) -> Result<Instance> {
    let steps = (cfg.master_range.1 - cfg.master_range.0) / cfg.master_step;
    let master = cfg.master_range.0 + cfg.master_step * rng.random_range(0..=steps);

    let primary: Vec<Width> = cfg
        .grid_widths(cfg.width_range)
        .into_iter()
        .filter(|&w| w < master)
        .collect();
    let secondary: Vec<Width> = cfg
        .secondary
        .as_ref()
        .map(|s| cfg.grid_widths(s.width_range))
        .unwrap_or_default()
        .into_iter()
        .filter(|&w| w < master && !primary.contains(&w))
        .collect();

    let n = rng.random_range(cfg.distinct_items_range.0..=cfg.distinct_items_range.1);
    let share = cfg.secondary.as_ref().map_or(0.0, |s| s.share);
    let n_secondary = if secondary.is_empty() {
        0
    } else {
        (0..n).filter(|_| rng.random_bool(share)).count()
    };
    let n_primary = n - n_secondary;

    let weight = |&w: &Width| f64::from(w).powf(cfg.width_skew);
    let mut widths: Vec<Width> = pick_weighted(&primary, n_primary, weight, rng)?;
    widths.extend(pick_weighted(&secondary, n_secondary, weight, rng)?);
    if widths.is_empty() {
        return Err(Error::InfeasibleConfig("no width fits the master".into()));
    }

    // log-uniform demands
    let (lo, hi) = cfg.demand_range;
    let (ln_lo, ln_hi) = ((f64::from(lo)).ln(), (f64::from(hi) + 1.0).ln());
    let items = widths
        .into_iter()
        .map(|width| {
            let d = rng.random_range(ln_lo..ln_hi).exp().floor() as u32;
            Item {
                width,
                demand: d.clamp(lo, hi),
            }
        })
        .collect();

    let mut inst = Instance {
        id: format!("{}-{seed}", cfg.family),
        family: cfg.family,
        master_width: master,
        items,
        rng_seed: seed,
        max_pieces: cfg.max_pieces,
    };
    inst.items.sort_by(|a, b| b.width.cmp(&a.width));
    inst.check()?;
    Ok(inst)
}

fn pick_weighted(
    pool: &[Width],
    amount: usize,
    weight: impl Fn(&Width) -> f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Width>> {
    if amount == 0 {
        return Ok(Vec::new());
    }
    let picked = pool
        .choose_multiple_weighted(rng, amount.min(pool.len()), weight)
        .map_err(|e| Error::InfeasibleConfig(format!("weighted sampling: {e}")))?;
    Ok(picked.copied().collect())
}

/// Requested number of instances per family.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyMix(pub BTreeMap<Family, usize>);

impl FamilyMix {
    /// Relative weights of CCM, F and FP in the reference dataset.
    pub const REFERENCE: [(Family, usize); 3] =
        [(Family::CCM, 1500), (Family::F, 6800), (Family::FP, 1000)];

    pub fn single(family: Family, count: usize) -> Self {
        FamilyMix([(family, count)].into_iter().collect())
    }

    /// The reference CCM:F:FP proportion scaled to `total` (largest
    /// remainder rounding).
    pub fn reference_scaled(total: usize) -> Self {
        let sum: usize = Self::REFERENCE.iter().map(|(_, c)| c).sum();
        let mut counts: Vec<(Family, usize, usize)> = Self::REFERENCE
            .iter()
            .map(|&(f, c)| (f, c * total / sum, (c * total) % sum))
            .collect();
        let mut missing = total - counts.iter().map(|c| c.1).sum::<usize>();
        let mut by_remainder: Vec<usize> = (0..counts.len()).collect();
        by_remainder.sort_by(|&a, &b| counts[b].2.cmp(&counts[a].2));
        for i in by_remainder {
            if missing == 0 {
                break;
            }
            counts[i].1 += 1;
            missing -= 1;
        }
        FamilyMix(counts.into_iter().map(|(f, c, _)| (f, c)).collect())
    }

    pub fn total(&self) -> usize {
        self.0.values().sum()
    }
}

/// Generates `mix` in family order; instance `i` of the batch uses seed
/// `base_seed + i`.
pub fn generate_batch(mix: &FamilyMix, base_seed: u64) -> Result<Vec<Instance>> {
    let mut out = Vec::with_capacity(mix.total());
    let mut index = 0u64;
    for (&family, &count) in &mix.0 {
        let cfg = default_config(family)?;
        for _ in 0..count {
            out.push(generate(&cfg, base_seed.wrapping_add(index))?);
            index += 1;
        }
    }
    Ok(out)
}

/// Like [`generate_batch`] with explicit per-family configs.
pub fn generate_batch_with(
    configs: &BTreeMap<Family, FamilyConfig>,
    mix: &FamilyMix,
    base_seed: u64,
) -> Result<Vec<Instance>> {
    let mut out = Vec::with_capacity(mix.total());
    let mut index = 0u64;
    for (&family, &count) in &mix.0 {
        let cfg = match configs.get(&family) {
            Some(c) => c.clone(),
            None => default_config(family)?,
        };
        for _ in 0..count {
            out.push(generate(&cfg, base_seed.wrapping_add(index))?);
            index += 1;
        }
    }
    Ok(out)
}
