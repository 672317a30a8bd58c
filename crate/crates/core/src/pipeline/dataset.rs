use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::encoder::{decode, feature_vector, EncoderConfig, FeatureMatrix};
use crate::error::{Error, Result};
use crate::reducer::{reduce, Budget, CancelToken, ReduceConfig, TerminalReason};
use crate::solution::{are_equivalent, validate, Family, Instance, Solution};
use crate::trimsolver::{solve_initial, SolverConfig};

pub const RECORD_VERSION: u32 = 1;

/// One line of `dataset.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub v: u32,
    pub instance_id: String,
    pub family: Family,
    pub seed: u64,
    pub instance: Instance,
    pub initial: Solution,
    pub reduced: Solution,
    pub initial_count: usize,
    /// Training label: pattern count of the reduced solution.
    pub final_count: usize,
    pub encoder: EncoderConfig,
    pub features: Vec<f64>,
    pub reduce_config_hash: String,
    pub budget: Budget,
    pub nodes: u64,
    pub reason: TerminalReason,
    pub elapsed_ms: u64,
}

impl DatasetRecord {
    /// Checks the record against its own instance: counts, monotonicity,
    /// equivalence, and that the features decode to the initial solution.
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSolution(format!("record {}: {m}", self.instance_id)));
        if self.v != RECORD_VERSION {
            return bad(format!("unsupported record version {}", self.v));
        }
        if self.initial_count != self.initial.pattern_count() || self.final_count != self.reduced.pattern_count() {
            return bad("stored counts disagree with the solutions".into());
        }
        if self.final_count > self.initial_count {
            return bad(format!("final count {} exceeds initial {}", self.final_count, self.initial_count));
        }
        for (name, s) in [("initial", &self.initial), ("reduced", &self.reduced)] {
            let v = validate(s, &self.instance);
            if !v.is_valid() {
                return bad(format!("{name} solution invalid: {}", v.diagnostics.join("; ")));
            }
        }
        if !are_equivalent(&self.initial, &self.reduced)? {
            return bad("reduced solution is not equivalent to the initial one".into());
        }
        let matrix_len = self.encoder.rows * (1 + 2 * self.encoder.slots);
        if self.features.len() != self.encoder.input_dim() {
            return bad("feature length does not match the encoder".into());
        }
        let m = FeatureMatrix::from_vec(
            self.encoder.rows,
            self.encoder.slots,
            self.features[..matrix_len].to_vec(),
        )?;
        let decoded = decode(&m, self.instance.master_width, &self.instance_id)?;
        if decoded != self.initial.canonicalize() {
            return bad("features do not decode to the initial solution".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BuildOptions {
    pub reduce: ReduceConfig,
    pub solver: SolverConfig,
    pub encoder: EncoderConfig,
    /// Worker threads; 0 means one per available core.
    pub jobs: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildSummary {
    pub written: usize,
    pub skipped_existing: usize,
    pub failed: Vec<String>,
}

/// Solves, reduces and encodes one instance.
pub fn build_record(inst: &Instance, opts: &BuildOptions) -> Result<DatasetRecord> {
    inst.check()?;
    let initial = solve_initial(inst, &opts.solver)?.canonicalize();
    let features = feature_vector(&initial, inst.master_width, &opts.encoder)?;
    let start = Instant::now();
    let (reduced, trace) = reduce(&initial, inst, &opts.reduce, &CancelToken::new())?;
    let elapsed_ms = start.elapsed().as_millis() as u64;
    Ok(DatasetRecord {
        v: RECORD_VERSION,
        instance_id: inst.id.clone(),
        family: inst.family,
        seed: inst.rng_seed,
        instance: inst.clone(),
        initial_count: initial.pattern_count(),
        final_count: reduced.pattern_count(),
        initial,
        reduced,
        encoder: opts.encoder,
        features,
        reduce_config_hash: opts.reduce.hash(),
        budget: opts.reduce.budget,
        nodes: trace.milestones.last().map_or(0, |m| m.nodes),
        reason: trace.reason,
        elapsed_ms,
    })
}

/// Appends one record per instance to `out`, skipping ids already present.
/// Instances are processed by `opts.jobs` workers; records are written by
/// this thread in input order. Failed instances are logged and listed in
/// the summary.
pub fn build_dataset(instances: &[Instance], opts: &BuildOptions, out: &Path) -> Result<BuildSummary> {
    opts.reduce.check()?;
    let existing = existing_ids(out)?;
    let todo: Vec<&Instance> = instances.iter().filter(|i| !existing.contains(&i.id)).collect();
    let mut summary = BuildSummary {
        skipped_existing: instances.len() - todo.len(),
        ..Default::default()
    };
    let file = OpenOptions::new().create(true).append(true).open(out)?;
    let mut writer = BufWriter::new(file);
    let jobs = match opts.jobs {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    }
    .min(todo.len().max(1));

    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, Result<DatasetRecord>)>();
    std::thread::scope(|scope| -> Result<()> {
        for _ in 0..jobs {
            let tx = tx.clone();
            let (next, todo) = (&next, &todo);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= todo.len() {
                    break;
                }
                if tx.send((i, build_record(todo[i], opts))).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        let mut pending = BTreeMap::new();
        let mut cursor = 0;
        for (i, result) in rx {
            pending.insert(i, result);
            while let Some(result) = pending.remove(&cursor) {
                match result {
                    Ok(record) => {
                        serde_json::to_writer(&mut writer, &record)?;
                        writer.write_all(b"\n")?;
                        writer.flush()?;
                        summary.written += 1;
                    }
                    Err(e) => {
                        log::warn!("skipping {}: {e}", todo[cursor].id);
                        summary.failed.push(todo[cursor].id.clone());
                    }
                }
                cursor += 1;
                if cursor % 100 == 0 {
                    log::info!("{cursor}/{} instances processed", todo.len());
                }
            }
        }
        Ok(())
    })?;
    Ok(summary)
}

/// Ids already in `path`. A torn final line left by an interrupted build is
/// cut off so that appending resumes on a clean line boundary.
fn existing_ids(path: &Path) -> Result<HashSet<String>> {
    #[derive(Deserialize)]
    struct IdOnly {
        instance_id: String,
    }
    let mut ids = HashSet::new();
    let Ok(bytes) = fs::read(path) else {
        return Ok(ids);
    };
    let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
    if complete < bytes.len() {
        log::warn!("truncating torn last line of {}", path.display());
        OpenOptions::new().write(true).open(path)?.set_len(complete as u64)?;
    }
    for line in bytes[..complete].split(|&b| b == b'\n') {
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let rec: IdOnly = serde_json::from_slice(line)?;
        ids.insert(rec.instance_id);
    }
    Ok(ids)
}

pub fn read_dataset(path: &Path) -> Result<Vec<DatasetRecord>> {
    read_jsonl(path)
}

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| {
            Error::InvalidInstance(format!("{}:{}: {e}", path.display(), n + 1))
        })?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, values: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for v in values {
        serde_json::to_writer(&mut w, v)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instancegen::{generate_batch, FamilyMix};

    fn opts() -> BuildOptions {
        BuildOptions {
            reduce: ReduceConfig {
                budget: Budget::nodes(20_000),
                ..Default::default()
            },
            jobs: 2,
            ..Default::default()
        }
    }

    #[test]
    fn resumable() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("d.jsonl");
        let insts = generate_batch(&FamilyMix::reference_scaled(10), 5).unwrap();
        let first = build_dataset(&insts, &opts(), &out).unwrap();
        assert_eq!(first.written, 10);
        let second = build_dataset(&insts, &opts(), &out).unwrap();
        assert_eq!((second.written, second.skipped_existing), (0, 10));
        let recs = read_dataset(&out).unwrap();
        assert_eq!(recs.len(), 10);
        for (r, i) in recs.iter().zip(&insts) {
            assert_eq!(r.instance_id, i.id);
            assert_eq!(r.family, i.family);
            r.check().unwrap();
        }
    }

    #[test]
    fn torn_line_is_rebuilt() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("d.jsonl");
        let insts = generate_batch(&FamilyMix::single(Family::FP, 3), 1).unwrap();
        build_dataset(&insts, &opts(), &out).unwrap();
        let text = fs::read_to_string(&out).unwrap();
        let cut = text.trim_end().rfind('\n').unwrap() + 40;
        fs::write(&out, &text[..cut]).unwrap();
        let again = build_dataset(&insts, &opts(), &out).unwrap();
        assert_eq!((again.written, again.skipped_existing), (1, 2));
        assert_eq!(read_dataset(&out).unwrap().len(), 3);
    }

    #[test]
    fn failures_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("d.jsonl");
        let mut insts = generate_batch(&FamilyMix::single(Family::CCM, 2), 1).unwrap();
        insts[0].items[0].width = insts[0].master_width + 1;
        let s = build_dataset(&insts, &opts(), &out).unwrap();
        assert_eq!(s.written, 1);
        assert_eq!(s.failed, vec![insts[0].id.clone()]);
    }

    #[test]
    fn output_order_ignores_job_count() {
        let dir = tempfile::tempdir().unwrap();
        let insts = generate_batch(&FamilyMix::reference_scaled(6), 9).unwrap();
        let a = dir.path().join("a.jsonl");
        let b = dir.path().join("b.jsonl");
        build_dataset(&insts, &BuildOptions { jobs: 1, ..opts() }, &a).unwrap();
        build_dataset(&insts, &BuildOptions { jobs: 3, ..opts() }, &b).unwrap();
        let strip = |p: &Path| -> Vec<(String, Solution)> {
            read_dataset(p).unwrap().into_iter().map(|r| (r.instance_id, r.reduced)).collect()
        };
        assert_eq!(strip(&a), strip(&b));
    }

    #[test]
    fn tampered_record_fails_check() {
        let insts = generate_batch(&FamilyMix::single(Family::F, 1), 3).unwrap();
        let mut r = build_record(&insts[0], &opts()).unwrap();
        r.check().unwrap();
        r.features[0] += 1.0;
        assert!(r.check().is_err());
    }
}
