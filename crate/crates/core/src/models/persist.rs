//! Model files.
//!
//! MLP: `b"TCM1"`, a little-endian u32 header length, the JSON header, then
//! every parameter as little-endian f64 in layer order (weights row-major,
//! then biases). Quadratic: a plain JSON document tagged `"kind":"quadratic"`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::models::mlp::{Activation, Layer, MlpModel, TrainingMeta};
use crate::models::quadratic::QuadraticModel;
use crate::solution::{Solution, Width};

pub const MAGIC: &[u8; 4] = b"TCM1";
const FORMAT_VERSION: u32 = 1;
const MAX_HEADER: u32 = 1 << 20;

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    dims: Vec<usize>,
    activations: Vec<Activation>,
    encoder: EncoderConfig,
    meta: Option<TrainingMeta>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum QuadraticFile {
    Quadratic(QuadraticModel),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Mlp(MlpModel),
    Quadratic(QuadraticModel),
}

impl Model {
    /// Predicted reduced pattern count for `s`.
    pub fn predict(&self, s: &Solution, master: Width) -> Result<f64> {
        match self {
            Model::Mlp(m) => m.predict_solution(s, master),
            Model::Quadratic(q) => Ok(q.predict(s.canonicalize().pattern_count() as f64)),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Model::Mlp(_) => "mlp",
            Model::Quadratic(_) => "quadratic",
        }
    }
}

pub fn write_mlp<W: Write>(mut out: W, m: &MlpModel) -> Result<()> {
    m.check()?;
    let header = serde_json::to_vec(&Header {
        version: FORMAT_VERSION,
        dims: m.dims(),
        activations: m.layers.iter().map(|l| l.activation).collect(),
        encoder: m.encoder,
        meta: m.meta.clone(),
    })?;
    out.write_all(MAGIC)?;
    out.write_all(&(header.len() as u32).to_le_bytes())?;
    out.write_all(&header)?;
    let mut blob = Vec::with_capacity(m.parameter_count() * 8);
    for l in &m.layers {
        for v in l.weights.iter().chain(&l.bias) {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.write_all(&blob)?;
    Ok(())
}

pub fn read_mlp<R: Read>(mut input: R) -> Result<MlpModel> {
    let mut head = [0u8; 8];
    input
        .read_exact(&mut head)
        .map_err(|_| Error::ModelFormat("truncated header".into()))?;
    if &head[..4] != MAGIC {
        return Err(Error::ModelFormat("bad magic bytes".into()));
    }
    let len = u32::from_le_bytes(head[4..].try_into().unwrap());
    if len > MAX_HEADER {
        return Err(Error::ModelFormat(format!("header length {len} is implausible")));
    }
    let mut json = vec![0u8; len as usize];
    input
        .read_exact(&mut json)
        .map_err(|_| Error::ModelFormat("truncated header".into()))?;
    let header: Header =
        serde_json::from_slice(&json).map_err(|e| Error::ModelFormat(format!("header: {e}")))?;
    if header.version != FORMAT_VERSION {
        return Err(Error::ModelFormat(format!("unsupported version {}", header.version)));
    }
    if header.dims.len() < 2 || header.activations.len() != header.dims.len() - 1 {
        return Err(Error::ModelFormat("dims and activations disagree".into()));
    }

    let mut rest = Vec::new();
    input.read_to_end(&mut rest)?;
    let expected: usize = header.dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
    if rest.len() != expected * 8 {
        return Err(Error::ModelFormat(format!(
            "parameter blob has {} bytes, expected {}",
            rest.len(),
            expected * 8
        )));
    }
    let mut values = rest.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let layers = header
        .dims
        .windows(2)
        .zip(&header.activations)
        .map(|(w, &activation)| Layer {
            inputs: w[0],
            outputs: w[1],
            weights: values.by_ref().take(w[0] * w[1]).collect(),
            bias: values.by_ref().take(w[1]).collect(),
            activation,
        })
        .collect();
    let m = MlpModel {
        layers,
        encoder: header.encoder,
        meta: header.meta,
    };
    m.check()?;
    Ok(m)
}

pub fn save_model(path: &Path, model: &Model) -> Result<()> {
    let mut buf = Vec::new();
    match model {
        Model::Mlp(m) => write_mlp(&mut buf, m)?,
        Model::Quadratic(q) => {
            if q.coefficients.iter().any(|c| !c.is_finite()) {
                return Err(Error::ModelFormat("non-finite coefficients".into()));
            }
            serde_json::to_writer_pretty(&mut buf, &QuadraticFile::Quadratic(q.clone()))?;
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

/// Loads either model kind, telling them apart by the magic bytes.
pub fn load_model(path: &Path) -> Result<Model> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(MAGIC) {
        return read_mlp(bytes.as_slice()).map(Model::Mlp);
    }
    match serde_json::from_slice::<QuadraticFile>(&bytes) {
        Ok(QuadraticFile::Quadratic(q)) if q.coefficients.iter().all(|c| c.is_finite()) => Ok(Model::Quadratic(q)),
        Ok(_) => Err(Error::ModelFormat("non-finite coefficients".into())),
        Err(e) => Err(Error::ModelFormat(format!("{}: neither TCM1 nor quadratic JSON ({e})", path.display()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::mlp::mlp_init;
    use crate::models::optim::OptimizerKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn trained_looking() -> MlpModel {
        let mut m = mlp_init(&[20, 7, 5, 1], 12).unwrap();
        m.layers[1].bias = vec![0.1, -0.2, 0.3, 1e-300, -0.0];
        m.encoder = EncoderConfig {
            rows: 4,
            slots: 2,
            extra_features: false,
        };
        m.meta = Some(TrainingMeta {
            epochs_run: 31,
            best_epoch: 6,
            best_val_mae: 1.25,
            optimizer: OptimizerKind::Nadam,
            learning_rate: 0.001,
            seed: 12,
        });
        m
    }

    #[test]
    fn mlp_round_trip_is_bitwise() {
        let m = trained_looking();
        let mut buf = Vec::new();
        write_mlp(&mut buf, &m).unwrap();
        let back = read_mlp(buf.as_slice()).unwrap();
        for (a, b) in m.layers.iter().zip(&back.layers) {
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.weights), bits(&b.weights));
            assert_eq!(bits(&a.bias), bits(&b.bias));
        }
        assert_eq!(back.meta, m.meta);
        assert_eq!(back.encoder, m.encoder);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let x: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
            assert_eq!(m.forward(&x).unwrap().to_bits(), back.forward(&x).unwrap().to_bits());
        }
    }

    #[test]
    fn corrupted_files_are_rejected() {
        let m = trained_looking();
        let mut buf = Vec::new();
        write_mlp(&mut buf, &m).unwrap();

        let mut bad_magic = buf.clone();
        bad_magic[0] = b'X';
        assert!(read_mlp(bad_magic.as_slice()).is_err());

        let mut bad_len = buf.clone();
        bad_len[4..8].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(read_mlp(bad_len.as_slice()).is_err());

        let mut bad_json = buf.clone();
        bad_json[9] = b'#';
        assert!(read_mlp(bad_json.as_slice()).is_err());

        assert!(read_mlp(&buf[..buf.len() - 8]).is_err());
        assert!(read_mlp(&buf[..6]).is_err());
    }

    #[test]
    fn version_mismatch() {
        let m = trained_looking();
        let mut buf = Vec::new();
        write_mlp(&mut buf, &m).unwrap();
        let text = String::from_utf8_lossy(&buf[8..]).into_owned();
        let at = text.find("\"version\":1").unwrap();
        buf[8 + at + 10] = b'9';
        assert!(matches!(read_mlp(buf.as_slice()), Err(Error::ModelFormat(msg)) if msg.contains("version")));
    }

    #[test]
    fn files_of_both_kinds() {
        let dir = tempfile::tempdir().unwrap();
        let mlp_path = dir.path().join("m.tcm");
        let quad_path = dir.path().join("q.json");
        let mlp = Model::Mlp(trained_looking());
        let quad = Model::Quadratic(QuadraticModel {
            coefficients: [0.1, 0.7, -0.002],
            n: 40,
            train_r2: 0.9,
        });
        save_model(&mlp_path, &mlp).unwrap();
        save_model(&quad_path, &quad).unwrap();
        assert_eq!(load_model(&mlp_path).unwrap(), mlp);
        assert_eq!(load_model(&quad_path).unwrap(), quad);

        fs::write(&quad_path, b"{\"kind\":\"cubic\"}").unwrap();
        assert!(load_model(&quad_path).is_err());
    }

    #[test]
    fn quadratic_predicts_from_pattern_count() {
        let q = Model::Quadratic(QuadraticModel::new([0.0, 1.0, 0.0]));
        let s = Solution {
            instance_id: "x".into(),
            entries: vec![
                crate::solution::Entry::new(2, vec![60, 40]),
                crate::solution::Entry::new(1, vec![40, 60]),
                crate::solution::Entry::new(1, vec![50]),
            ],
        };
        // duplicates merge before counting
        assert_eq!(q.predict(&s, 100).unwrap(), 2.0);
    }
}
