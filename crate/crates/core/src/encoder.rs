//! Fixed-shape numeric encoding of a solution.
//!
//! Row `p` holds `(c_p, n_1, w_1, ..., n_k, w_k)`: the repetitions of pattern
//! `p`, then one `(multiplicity, width / master)` slot per distinct width,
//! largest width first. Rows follow canonical pattern order and zero rows pad
//! the tail.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solution::{Entry, Instance, Pattern, Solution, Width};

pub const DEFAULT_ROWS: usize = 400;
pub const DEFAULT_SLOTS: usize = 12;
/// Widest master among the family presets; scales the optional master feature.
pub const REFERENCE_MAX_MASTER: f64 = 8000.0;
/// Number of scalars appended by `extra_features`.
pub const EXTRA_FEATURES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub rows: usize,
    pub slots: usize,
    /// Append run length, pattern count and master/8000 after the matrix.
    #[serde(default)]
    pub extra_features: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            rows: DEFAULT_ROWS,
            slots: DEFAULT_SLOTS,
            extra_features: false,
        }
    }
}

impl EncoderConfig {
    pub fn input_dim(&self) -> usize {
        self.rows * (1 + 2 * self.slots) + if self.extra_features { EXTRA_FEATURES } else { 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    slots: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn zeros(rows: usize, slots: usize) -> Self {
        FeatureMatrix {
            rows,
            slots,
            values: vec![0.0; rows * (1 + 2 * slots)],
        }
    }

    pub fn from_vec(rows: usize, slots: usize, values: Vec<f64>) -> Result<Self> {
        let expected = rows * (1 + 2 * slots);
        if values.len() != expected {
            return Err(Error::Dimension {
                expected,
                got: values.len(),
            });
        }
        Ok(FeatureMatrix { rows, slots, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn row_len(&self) -> usize {
        1 + 2 * self.slots
    }

    pub fn row(&self, p: usize) -> &[f64] {
        let n = self.row_len();
        &self.values[p * n..(p + 1) * n]
    }

    fn row_mut(&mut self, p: usize) -> &mut [f64] {
        let n = self.row_len();
        &mut self.values[p * n..(p + 1) * n]
    }

    /// Row-major flattened values.
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }
}

/// Encodes the canonical form of `s`.
pub fn encode(s: &Solution, master: Width, rows: usize, slots: usize) -> Result<FeatureMatrix> {
    let canonical = s.canonicalize();
    if canonical.pattern_count() > rows {
        return Err(Error::SolutionTooLarge {
            patterns: canonical.pattern_count(),
            max: rows,
        });
    }
    let mut m = FeatureMatrix::zeros(rows, slots);
    let master = f64::from(master);
    for (p, e) in canonical.entries.iter().enumerate() {
        let groups = e.pattern.groups();
        if groups.len() > slots {
            return Err(Error::PatternTooWide {
                distinct: groups.len(),
                max: slots,
            });
        }
        let row = m.row_mut(p);
        row[0] = f64::from(e.repetitions);
        for (i, (w, n)) in groups.into_iter().enumerate() {
            row[1 + 2 * i] = f64::from(n);
            row[2 + 2 * i] = f64::from(w) / master;
        }
    }
    Ok(m)
}

/// Encodes with the default shape.
pub fn encode_default(s: &Solution, inst: &Instance) -> Result<FeatureMatrix> {
    encode(s, inst.master_width, DEFAULT_ROWS, DEFAULT_SLOTS)
}

/// The model input: the flattened matrix plus optional scalar features.
pub fn feature_vector(s: &Solution, master: Width, cfg: &EncoderConfig) -> Result<Vec<f64>> {
    let mut v = encode(s, master, cfg.rows, cfg.slots)?.into_vec();
    if cfg.extra_features {
        v.push(s.run_length() as f64);
        v.push(s.canonicalize().pattern_count() as f64);
        v.push(f64::from(master) / REFERENCE_MAX_MASTER);
    }
    Ok(v)
}

/// Checks `encode`'s limits without building the matrix.
pub fn check_limits(s: &Solution, rows: usize, slots: usize) -> Result<()> {
    let canonical = s.canonicalize();
    if canonical.pattern_count() > rows {
        return Err(Error::SolutionTooLarge {
            patterns: canonical.pattern_count(),
            max: rows,
        });
    }
    for e in &canonical.entries {
        let distinct = e.pattern.groups().len();
        if distinct > slots {
            return Err(Error::PatternTooWide { distinct, max: slots });
        }
    }
    Ok(())
}

fn as_count(x: f64, what: &str) -> Result<u32> {
    if x < 0.0 || x.fract() != 0.0 || x > f64::from(u32::MAX) {
        return Err(Error::MalformedMatrix(format!("{what} {x} is not a count")));
    }
    Ok(x as u32)
}

/// Inverse of [`encode`]; widths are recovered by rounding to whole mm.
pub fn decode(m: &FeatureMatrix, master: Width, instance_id: &str) -> Result<Solution> {
    let mut entries = Vec::new();
    let mut padding = false;
    for p in 0..m.rows() {
        let row = m.row(p);
        if row.iter().all(|&v| v == 0.0) {
            padding = true;
            continue;
        }
        if padding {
            return Err(Error::MalformedMatrix(format!("row {p} follows a zero row")));
        }
        let c = as_count(row[0], "repetitions")?;
        if c == 0 {
            return Err(Error::MalformedMatrix(format!("row {p} has slots but no repetitions")));
        }
        let mut widths = Vec::new();
        let mut empty_seen = false;
        for i in 0..m.slots() {
            let (n, frac) = (row[1 + 2 * i], row[2 + 2 * i]);
            if n == 0.0 && frac == 0.0 {
                empty_seen = true;
                continue;
            }
            if empty_seen {
                return Err(Error::MalformedMatrix(format!("row {p} slot {i} follows an empty slot")));
            }
            let n = as_count(n, "multiplicity")?;
            if n == 0 || !(frac > 0.0 && frac < 1.0) {
                return Err(Error::MalformedMatrix(format!("row {p} slot {i} is inconsistent")));
            }
            let w = (frac * f64::from(master)).round() as Width;
            widths.extend(std::iter::repeat_n(w, n as usize));
        }
        if widths.is_empty() {
            return Err(Error::MalformedMatrix(format!("row {p} has no pieces")));
        }
        entries.push(Entry {
            repetitions: c,
            pattern: Pattern::new(widths),
        });
    }
    Ok(Solution::new(instance_id, entries))
}

/// Writes feature matrices as a little-endian f32 array behind an 8-byte
/// header holding `rows` and `slots` as u32.
pub fn write_cache<W: Write>(mut out: W, rows: usize, slots: usize, matrices: &[FeatureMatrix]) -> Result<()> {
    out.write_all(&(rows as u32).to_le_bytes())?;
    out.write_all(&(slots as u32).to_le_bytes())?;
    for m in matrices {
        if m.rows() != rows || m.slots() != slots {
            return Err(Error::Dimension {
                expected: rows * (1 + 2 * slots),
                got: m.as_slice().len(),
            });
        }
        for &v in m.as_slice() {
            out.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads a cache written by [`write_cache`]; values come back as f32.
pub fn read_cache<R: Read>(mut input: R) -> Result<(usize, usize, Vec<Vec<f32>>)> {
    let mut header = [0u8; 8];
    input.read_exact(&mut header)?;
    let rows = u32::from_le_bytes(header[0..4].try_into().unwrap()) as usize;
    let slots = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let len = rows * (1 + 2 * slots);
    let mut body = Vec::new();
    input.read_to_end(&mut body)?;
    if len == 0 || body.len() % (4 * len) != 0 {
        return Err(Error::MalformedMatrix(format!(
            "cache body of {} bytes is not a whole number of {rows}x{slots} matrices",
            body.len()
        )));
    }
    let values: Vec<f32> = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Ok((rows, slots, values.chunks(len).map(<[f32]>::to_vec).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solution::fixtures::reference_entry;

    #[test]
    fn reference_first_row() {
        let s = Solution::new("ref", vec![reference_entry()]);
        let m = encode(&s, 5820, DEFAULT_ROWS, DEFAULT_SLOTS).unwrap();
        let row = m.row(0);
        assert_eq!(&row[..7], &[16.0, 1.0, 1200.0 / 5820.0, 4.0, 970.0 / 5820.0, 1.0, 740.0 / 5820.0]);
        assert!(row[7..].iter().all(|&v| v == 0.0));
        assert_eq!(m.as_slice().len(), 10_000);
    }

    #[test]
    fn empty_solution_is_all_zero() {
        let m = encode(&Solution::new("e", vec![]), 1000, 4, 3).unwrap();
        assert!(m.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(decode(&m, 1000, "e").unwrap().entries, vec![]);
    }

    #[test]
    fn limits() {
        let s = Solution::new("x", vec![Entry::new(1, vec![10]), Entry::new(1, vec![20])]);
        assert!(matches!(encode(&s, 100, 1, 3), Err(Error::SolutionTooLarge { .. })));
        let wide = Solution::new("x", vec![Entry::new(1, vec![10, 20, 30])]);
        assert!(matches!(encode(&wide, 100, 4, 2), Err(Error::PatternTooWide { .. })));
        assert!(check_limits(&wide, 4, 2).is_err());
        assert!(check_limits(&wide, 4, 3).is_ok());
    }

    #[test]
    fn mid_body_zero_row_is_rejected() {
        let s = Solution::new("x", vec![Entry::new(2, vec![60, 40]), Entry::new(1, vec![30])]);
        let m = encode(&s, 100, 3, 2).unwrap();
        let mut v = m.into_vec();
        let row_len = 5;
        let second: Vec<f64> = v[row_len..2 * row_len].to_vec();
        v[row_len..2 * row_len].fill(0.0);
        v[2 * row_len..].copy_from_slice(&second);
        let bad = FeatureMatrix::from_vec(3, 2, v).unwrap();
        assert!(decode(&bad, 100, "x").is_err());
    }

    #[test]
    fn round_trip_and_shapes() {
        let s = Solution::new(
            "x",
            vec![Entry::new(3, vec![333, 333, 250]), Entry::new(1, vec![997]), Entry::new(7, vec![250, 125])],
        );
        let m = encode(&s, 1000, 8, 3).unwrap();
        assert_eq!(decode(&m, 1000, "x").unwrap(), s.canonicalize());
        // a larger shape only extends the zero padding
        let big = encode(&s, 1000, 10, 5).unwrap();
        for p in 0..3 {
            assert_eq!(&big.row(p)[..m.row_len()], m.row(p));
        }
    }

    #[test]
    fn extra_features_append() {
        let s = Solution::new("x", vec![Entry::new(3, vec![600, 400]), Entry::new(2, vec![500])]);
        let cfg = EncoderConfig {
            rows: 2,
            slots: 2,
            extra_features: true,
        };
        let v = feature_vector(&s, 4000, &cfg).unwrap();
        assert_eq!(v.len(), cfg.input_dim());
        assert_eq!(&v[10..], &[5.0, 2.0, 0.5]);
    }

    #[test]
    fn cache_round_trip() {
        let s = Solution::new("x", vec![Entry::new(3, vec![600, 400])]);
        let m = encode(&s, 1000, 2, 2).unwrap();
        let mut buf = Vec::new();
        write_cache(&mut buf, 2, 2, &[m.clone(), m.clone()]).unwrap();
        assert_eq!(buf.len(), 8 + 2 * 10 * 4);
        let (rows, slots, back) = read_cache(buf.as_slice()).unwrap();
        assert_eq!((rows, slots, back.len()), (2, 2, 2));
        assert_eq!(back[1][2], 0.6f32);
        assert!(read_cache(&buf[..buf.len() - 1]).is_err());
    }
}
