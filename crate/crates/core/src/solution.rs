//! Instances, patterns and solutions of the one-dimensional cutting stock
//! problem, plus the algebra the rest of the crate relies on: run length,
//! production, equivalence, waste and canonical form.
//!
//! Widths are integer millimetres everywhere in this module. Fractions of the
//! master width only show up in the encoder.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Width = u32;

/// Default cap on pieces per pattern; matches the encoder's `k`.
pub const DEFAULT_MAX_PIECES: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    /// Corrugated case materials.
    CCM,
    /// Plastic film.
    F,
    /// Fine paper.
    FP,
    CUSTOM,
}

impl Family {
    pub const PRESETS: [Family; 3] = [Family::CCM, Family::F, Family::FP];
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::CCM => "CCM",
            Family::F => "F",
            Family::FP => "FP",
            Family::CUSTOM => "CUSTOM",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "CCM" => Ok(Family::CCM),
            "F" => Ok(Family::F),
            "FP" => Ok(Family::FP),
            "CUSTOM" => Ok(Family::CUSTOM),
            other => Err(Error::InvalidInstance(format!("unknown family {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Item {
    pub width: Width,
    pub demand: u32,
}

fn default_max_pieces() -> usize {
    DEFAULT_MAX_PIECES
}

/// One trim problem: a single master width and the ordered items.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub family: Family,
    pub master_width: Width,
    pub items: Vec<Item>,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default = "default_max_pieces")]
    pub max_pieces: usize,
}

impl Instance {
    pub fn new(
        id: impl Into<String>,
        family: Family,
        master_width: Width,
        items: Vec<Item>,
        max_pieces: usize,
    ) -> Result<Self> {
        let inst = Instance {
            id: id.into(),
            family,
            master_width,
            items,
            rng_seed: 0,
            max_pieces,
        };
        inst.check()?;
        Ok(inst)
    }

    /// Checks the structural invariants of an instance.
    pub fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInstance(format!("{}: {msg}", self.id)));
        if self.master_width == 0 {
            return bad("master width must be positive".into());
        }
        if self.items.is_empty() {
            return bad("no items".into());
        }
        if self.max_pieces == 0 {
            return bad("max_pieces must be at least 1".into());
        }
        let mut seen = BTreeSet::new();
        for item in &self.items {
            if item.width == 0 || item.width >= self.master_width {
                return bad(format!(
                    "item width {} outside (0, {})",
                    item.width, self.master_width
                ));
            }
            if item.demand == 0 {
                return bad(format!("item {} has zero demand", item.width));
            }
            if !seen.insert(item.width) {
                return bad(format!("duplicate item width {}", item.width));
            }
        }
        Ok(())
    }

    pub fn demand_of(&self, width: Width) -> Option<u32> {
        self.items.iter().find(|i| i.width == width).map(|i| i.demand)
    }

    pub fn total_pieces(&self) -> u64 {
        self.items.iter().map(|i| u64::from(i.demand)).sum()
    }

    /// Demands as a production vector.
    pub fn demand_vector(&self) -> ProductionVector {
        self.items
            .iter()
            .map(|i| (i.width, u64::from(i.demand)))
            .collect()
    }
}

/// Multiset of item widths cut together from one master reel. The content is
/// kept sorted in decreasing width so that equal multisets compare equal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<Width>", into = "Vec<Width>")]
pub struct Pattern(Vec<Width>);

impl Pattern {
    pub fn new(mut widths: Vec<Width>) -> Self {
        widths.sort_unstable_by(|a, b| b.cmp(a));
        Pattern(widths)
    }

    pub fn widths(&self) -> &[Width] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn used_width(&self) -> u64 {
        self.0.iter().map(|&w| u64::from(w)).sum()
    }

    /// Distinct widths with their multiplicities, largest width first.
    pub fn groups(&self) -> Vec<(Width, u32)> {
        let mut out: Vec<(Width, u32)> = Vec::new();
        for &w in &self.0 {
            match out.last_mut() {
                Some((last, n)) if *last == w => *n += 1,
                _ => out.push((w, 1)),
            }
        }
        out
    }

    pub fn count_of(&self, width: Width) -> u32 {
        self.0.iter().filter(|&&w| w == width).count() as u32
    }

    /// Decreasing lexicographic order on the sorted-width tuple.
    pub fn canonical_cmp(&self, other: &Pattern) -> Ordering {
        other.0.cmp(&self.0)
    }
}

impl From<Vec<Width>> for Pattern {
    fn from(v: Vec<Width>) -> Self {
        Pattern::new(v)
    }
}

impl From<Pattern> for Vec<Width> {
    fn from(p: Pattern) -> Self {
        p.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Entry {
    pub repetitions: u32,
    pub pattern: Pattern,
}

impl Entry {
    pub fn new(repetitions: u32, widths: Vec<Width>) -> Self {
        Entry {
            repetitions,
            pattern: Pattern::new(widths),
        }
    }
}

/// Map from item width to total pieces produced.
pub type ProductionVector = BTreeMap<Width, u64>;

/// A solution: repetitions paired with pattern contents.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Solution {
    pub instance_id: String,
    pub entries: Vec<Entry>,
}

impl Solution {
    pub fn new(instance_id: impl Into<String>, entries: Vec<Entry>) -> Self {
        Solution {
            instance_id: instance_id.into(),
            entries,
        }
    }

    pub fn pattern_count(&self) -> usize {
        self.entries.len()
    }

    pub fn run_length(&self) -> u64 {
        self.entries.iter().map(|e| u64::from(e.repetitions)).sum()
    }

    pub fn production(&self) -> ProductionVector {
        production_of(&self.entries)
    }

    /// Total trim loss in mm·runs.
    pub fn waste(&self, inst: &Instance) -> Result<u64> {
        let master = u64::from(inst.master_width);
        let mut total = 0u64;
        for e in &self.entries {
            let used = e.pattern.used_width();
            if used > master {
                return Err(Error::Overfull {
                    pattern: e.pattern.widths().to_vec(),
                    master: inst.master_width,
                });
            }
            total += u64::from(e.repetitions) * (master - used);
        }
        Ok(total)
    }

    /// Merges duplicate contents and orders entries canonically.
    pub fn canonicalize(&self) -> Solution {
        Solution {
            instance_id: self.instance_id.clone(),
            entries: canonical_entries(&self.entries),
        }
    }

    pub fn is_canonical(&self) -> bool {
        self.entries.windows(2).all(|w| {
            w[0].pattern.canonical_cmp(&w[1].pattern) == Ordering::Less
        }) && self.entries.iter().all(|e| e.repetitions > 0)
    }
}

pub fn production_of(entries: &[Entry]) -> ProductionVector {
    let mut prod = ProductionVector::new();
    for e in entries {
        for &w in e.pattern.widths() {
            *prod.entry(w).or_insert(0) += u64::from(e.repetitions);
        }
    }
    prod
}

pub fn run_length_of(entries: &[Entry]) -> u64 {
    entries.iter().map(|e| u64::from(e.repetitions)).sum()
}

/// Merges entries with identical content and sorts them in canonical order.
/// Entries with zero repetitions are dropped.
pub fn canonical_entries(entries: &[Entry]) -> Vec<Entry> {
    let mut sorted: Vec<Entry> = entries
        .iter()
        .filter(|e| e.repetitions > 0)
        .cloned()
        .collect();
    sorted.sort_by(|a, b| {
        a.pattern
            .canonical_cmp(&b.pattern)
            .then(b.repetitions.cmp(&a.repetitions))
    });
    let mut out: Vec<Entry> = Vec::with_capacity(sorted.len());
    for e in sorted {
        match out.last_mut() {
            Some(last) if last.pattern == e.pattern => last.repetitions += e.repetitions,
            _ => out.push(e),
        }
    }
    out
}

/// Same run length and same production per width.
pub fn are_equivalent(a: &Solution, b: &Solution) -> Result<bool> {
    if a.instance_id != b.instance_id {
        return Err(Error::InstanceMismatch(
            a.instance_id.clone(),
            b.instance_id.clone(),
        ));
    }
    Ok(entries_equivalent(&a.entries, &b.entries))
}

pub fn entries_equivalent(a: &[Entry], b: &[Entry]) -> bool {
    run_length_of(a) == run_length_of(b) && production_of(a) == production_of(b)
}

/// Outcome of [`validate`], with a human-readable diagnostic per violation.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Validation {
    pub diagnostics: Vec<String>,
}

impl Validation {
    pub fn is_valid(&self) -> bool {
        self.diagnostics.is_empty()
    }
}

pub fn validate(s: &Solution, inst: &Instance) -> Validation {
    let mut diagnostics = Vec::new();
    if s.instance_id != inst.id {
        diagnostics.push(format!(
            "solution is for instance {:?}, not {:?}",
            s.instance_id, inst.id
        ));
    }
    let known: BTreeSet<Width> = inst.items.iter().map(|i| i.width).collect();
    for (idx, e) in s.entries.iter().enumerate() {
        if e.repetitions == 0 {
            diagnostics.push(format!("entry {idx} has zero repetitions"));
        }
        if e.pattern.is_empty() {
            diagnostics.push(format!("entry {idx} has an empty pattern"));
        }
        if e.pattern.len() > inst.max_pieces {
            diagnostics.push(format!(
                "entry {idx} has {} pieces, max is {}",
                e.pattern.len(),
                inst.max_pieces
            ));
        }
        if e.pattern.used_width() > u64::from(inst.master_width) {
            diagnostics.push(format!(
                "entry {idx} uses {} mm of {} mm",
                e.pattern.used_width(),
                inst.master_width
            ));
        }
        for &w in e.pattern.widths() {
            if !known.contains(&w) {
                diagnostics.push(format!("entry {idx} cuts unknown width {w}"));
            }
        }
    }
    let prod = s.production();
    for item in &inst.items {
        let got = prod.get(&item.width).copied().unwrap_or(0);
        if got != u64::from(item.demand) {
            diagnostics.push(format!(
                "width {} produced {got}, demand {}",
                item.width, item.demand
            ));
        }
    }
    Validation { diagnostics }
}


#[cfg(test)]
mod tests {
    use super::*;

    fn sol(entries: Vec<Entry>) -> Solution {
        Solution::new("t", entries)
    }

    fn inst(master: Width, items: &[(Width, u32)]) -> Instance {
        Instance::new(
            "t",
            Family::CUSTOM,
            master,
            items
                .iter()
                .map(|&(width, demand)| Item { width, demand })
                .collect(),
            DEFAULT_MAX_PIECES,
        )
        .unwrap()
    }

    #[test]
    fn counts_on_empty_solution() {
        let s = sol(vec![]);
        assert_eq!(s.pattern_count(), 0);
        assert_eq!(s.run_length(), 0);
        assert!(s.production().is_empty());
    }

    #[test]
    fn run_length_single_entry() {
        assert_eq!(sol(vec![Entry::new(7, vec![10, 20])]).run_length(), 7);
    }

    #[test]
    fn production_of_reference_entry() {
        let s = sol(vec![fixtures::reference_entry()]);
        let expected: ProductionVector = [(1200, 16), (970, 64), (740, 16)].into_iter().collect();
        assert_eq!(s.production(), expected);
    }

    #[test]
    fn equivalence_basic() {
        let s = sol(vec![Entry::new(2, vec![60, 40]), Entry::new(1, vec![50, 50])]);
        assert!(are_equivalent(&s, &s).unwrap());
        let mut t = s.clone();
        t.entries[0].repetitions += 1;
        assert!(!are_equivalent(&s, &t).unwrap());
        let other = Solution::new("other", s.entries.clone());
        assert!(are_equivalent(&s, &other).is_err());
    }

    #[test]
    fn equivalence_after_swap() {
        // Swapping 30 and 20 between the two patterns keeps every total.
        let a = sol(vec![Entry::new(1, vec![50, 30]), Entry::new(1, vec![40, 20])]);
        let b = sol(vec![Entry::new(1, vec![50, 20]), Entry::new(1, vec![40, 30])]);
        assert_ne!(a.canonicalize(), b.canonicalize());
        assert!(are_equivalent(&a, &b).unwrap());
    }

    #[test]
    fn waste_cases() {
        let i = inst(100, &[(60, 2), (40, 2), (50, 2)]);
        assert_eq!(sol(vec![Entry::new(5, vec![60, 40])]).waste(&i).unwrap(), 0);
        assert_eq!(sol(vec![Entry::new(2, vec![50])]).waste(&i).unwrap(), 100);
        assert!(sol(vec![Entry::new(1, vec![60, 50])]).waste(&i).is_err());
    }

    #[test]
    fn canonicalize_merges_permuted_duplicates() {
        let s = sol(vec![Entry::new(3, vec![20, 50, 30]), Entry::new(5, vec![30, 20, 50])]);
        let c = s.canonicalize();
        assert_eq!(c.entries, vec![Entry::new(8, vec![50, 30, 20])]);
        assert_eq!(c.canonicalize(), c);
    }

    #[test]
    fn canonical_order_is_decreasing_lexicographic() {
        let s = sol(vec![
            Entry::new(1, vec![50]),
            Entry::new(1, vec![30, 30, 30]),
            Entry::new(1, vec![50, 40]),
            Entry::new(1, vec![60]),
        ]);
        let c = s.canonicalize();
        let order: Vec<Vec<Width>> = c.entries.iter().map(|e| e.pattern.widths().to_vec()).collect();
        assert_eq!(order, vec![vec![60], vec![50, 40], vec![50], vec![30, 30, 30]]);
        assert!(c.is_canonical());
    }

    #[test]
    fn validate_reports_violations() {
        let i = inst(100, &[(60, 2), (40, 2)]);
        let good = sol(vec![Entry::new(2, vec![60, 40])]);
        assert!(validate(&good, &i).is_valid());

        let overfull = sol(vec![Entry::new(1, vec![60, 60]), Entry::new(2, vec![40])]);
        assert!(!validate(&overfull, &i).is_valid());

        let over = sol(vec![Entry::new(3, vec![60, 40])]);
        let v = validate(&over, &i);
        assert!(!v.is_valid());
        assert!(v.diagnostics.iter().any(|d| d.contains("produced 3")));
    }

    #[test]
    fn validate_enforces_max_pieces() {
        let mut i = inst(100, &[(10, 4)]);
        i.max_pieces = 3;
        let s = sol(vec![Entry::new(1, vec![10, 10, 10, 10])]);
        assert!(!validate(&s, &i).is_valid());
    }

    #[test]
    fn instance_invariants() {
        let item = |width, demand| Item { width, demand };
        assert!(Instance::new("x", Family::F, 100, vec![item(100, 1)], 12).is_err());
        assert!(Instance::new("x", Family::F, 100, vec![item(10, 0)], 12).is_err());
        assert!(Instance::new("x", Family::F, 100, vec![item(10, 1), item(10, 2)], 12).is_err());
        assert!(Instance::new("x", Family::F, 100, vec![], 12).is_err());
        assert!(Instance::new("x", Family::F, 100, vec![item(10, 1)], 12).is_ok());
    }

    #[test]
    fn json_round_trip() {
        let s = sol(vec![Entry::new(2, vec![40, 60])]);
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(
            text,
            r#"{"instance_id":"t","entries":[{"repetitions":2,"pattern":[60,40]}]}"#
        );
        let back: Solution = serde_json::from_str(r#"{"instance_id":"t","entries":[{"repetitions":2,"pattern":[40,60]}]}"#).unwrap();
        assert_eq!(back, s);
    }
}
