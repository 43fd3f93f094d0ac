//! Binary checkpoint format.
//!
//! ```text
//! magic    8 bytes  "CRWCKPT\0"
//! version  u32 LE
//! hlen     u32 LE   length of the JSON header
//! header   hlen bytes of JSON: kind, config, vocab, optional state,
//!          and the tensor list (name and shape, in data order)
//! data     every tensor as row-major f32 LE, in header order
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::params::Params;
use super::tensor::Mat;
use super::vocab::Vocab;
use super::ModelError;

pub const MAGIC: &[u8; 8] = b"CRWCKPT\0";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorMeta {
    name: String,
    shape: [usize; 2],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    kind: String,
    config: ModelConfig,
    vocab: Vocab,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    state: Option<serde_json::Value>,
    tensors: Vec<TensorMeta>,
}

/// A trained model: configuration, vocabulary and weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub params: Params<f32>,
}

fn encode_file(header: &Header, tensors: &[&Mat<f32>]) -> Result<Vec<u8>, ModelError> {
    let json = serde_json::to_vec(header).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    let data_len: usize = tensors.iter().map(|t| t.data.len() * 4).sum();
    let mut buf = Vec::with_capacity(16 + json.len() + data_len);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    let hlen = u32::try_from(json.len()).map_err(|_| ModelError::Checkpoint("header too large".into()))?;
    buf.extend_from_slice(&hlen.to_le_bytes());
    buf.extend_from_slice(&json);
    for t in tensors {
        for x in &t.data {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(buf)
}

fn decode_file(bytes: &[u8]) -> Result<(Header, Vec<Mat<f32>>), ModelError> {
    let err = |m: &str| ModelError::Checkpoint(m.to_owned());
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(err("bad magic bytes"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(ModelError::Checkpoint(format!("unsupported version {version}")));
    }
    let hlen = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
    let body = &bytes[16..];
    if body.len() < hlen {
        return Err(err("truncated header"));
    }
    let header: Header = serde_json::from_slice(&body[..hlen]).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    let mut data = &body[hlen..];
    let mut tensors = Vec::with_capacity(header.tensors.len());
    for meta in &header.tensors {
        let n = meta.shape[0] * meta.shape[1];
        if data.len() < n * 4 {
            return Err(ModelError::Checkpoint(format!("truncated data for {}", meta.name)));
        }
        let vals = data[..n * 4]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        tensors.push(Mat::from_vec(meta.shape[0], meta.shape[1], vals));
        data = &data[n * 4..];
    }
    if !data.is_empty() {
        return Err(err("trailing bytes after tensor data"));
    }
    Ok((header, tensors))
}

fn metas(prefix: &str, p: &Params<f32>) -> Vec<TensorMeta> {
    p.tensors()
        .into_iter()
        .map(|(name, t)| TensorMeta {
            name: format!("{prefix}{name}"),
            shape: [t.rows, t.cols],
        })
        .collect()
}

/// Fills `params` (already shaped from the config) from the next tensors,
/// checking names and shapes.
fn fill(
    prefix: &str,
    params: &mut Params<f32>,
    metas: &[TensorMeta],
    tensors: &mut impl Iterator<Item = Mat<f32>>,
) -> Result<(), ModelError> {
    let mut metas = metas.iter();
    for (name, dst) in params.tensors_mut() {
        let (Some(meta), Some(t)) = (metas.next(), tensors.next()) else {
            return Err(ModelError::Checkpoint(format!("missing tensor {prefix}{name}")));
        };
        let want = format!("{prefix}{name}");
        if meta.name != want {
            return Err(ModelError::Checkpoint(format!("expected tensor {want}, found {}", meta.name)));
        }
        if t.shape() != dst.shape() {
            return Err(ModelError::Checkpoint(format!(
                "shape mismatch for {want}: file {:?}, config {:?}",
                t.shape(),
                dst.shape()
            )));
        }
        *dst = t;
    }
    Ok(())
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>, ModelError> {
        let header = Header {
            kind: "model".into(),
            config: self.config.clone(),
            vocab: self.vocab.clone(),
            state: None,
            tensors: metas("", &self.params),
        };
        let ts: Vec<&Mat<f32>> = self.params.tensors().into_iter().map(|(_, t)| t).collect();
        encode_file(&header, &ts)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let (header, tensors) = decode_file(bytes)?;
        if header.kind != "model" {
            return Err(ModelError::Checkpoint(format!("expected a model checkpoint, found {:?}", header.kind)));
        }
        header.config.validate()?;
        let mut params = Params::zeros(&header.config, header.vocab.len());
        if header.tensors.len() != params.tensors().len() {
            return Err(ModelError::Checkpoint("tensor count does not match config".into()));
        }
        fill("", &mut params, &header.tensors, &mut tensors.into_iter())?;
        Ok(Checkpoint {
            config: header.config,
            vocab: header.vocab,
            params,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Writes through a temporary file in the same directory, then renames.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ModelError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Tensor groups stored in a training-state file besides the model.
pub(crate) struct StateFile {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub state: serde_json::Value,
    /// (prefix, params) in file order.
    pub groups: Vec<(String, Params<f32>)>,
}

impl StateFile {
    pub fn to_bytes(&self) -> Result<Vec<u8>, ModelError> {
        let mut tensors = Vec::new();
        let mut ts = Vec::new();
        for (prefix, p) in &self.groups {
            tensors.extend(metas(&format!("{prefix}."), p));
            ts.extend(p.tensors().into_iter().map(|(_, t)| t));
        }
        let header = Header {
            kind: "train_state".into(),
            config: self.config.clone(),
            vocab: self.vocab.clone(),
            state: Some(self.state.clone()),
            tensors,
        };
        encode_file(&header, &ts)
    }

    pub fn from_bytes(bytes: &[u8], prefixes: &[&str]) -> Result<Self, ModelError> {
        let (header, tensors) = decode_file(bytes)?;
        if header.kind != "train_state" {
            return Err(ModelError::Checkpoint(format!("expected a training state, found {:?}", header.kind)));
        }
        header.config.validate()?;
        let per = Params::<f32>::zeros(&header.config, header.vocab.len()).tensors().len();
        if header.tensors.len() != per * prefixes.len() {
            return Err(ModelError::Checkpoint("tensor count does not match config".into()));
        }
        let mut it = tensors.into_iter();
        let mut groups = Vec::new();
        for (k, prefix) in prefixes.iter().enumerate() {
            let mut p = Params::zeros(&header.config, header.vocab.len());
            fill(&format!("{prefix}."), &mut p, &header.tensors[k * per..(k + 1) * per], &mut it)?;
            groups.push((prefix.to_string(), p));
        }
        Ok(StateFile {
            config: header.config,
            vocab: header.vocab,
            state: header.state.unwrap_or(serde_json::Value::Null),
            groups,
        })
    }
}
