//! Tensor files: magic, `u64` header length, JSON header with a tensor table,
//! then a little-endian payload. CNN checkpoints store `f32`, linear decoders `f64`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use ssf_core::baseline::LinearDecoder;
use ssf_core::cnn::{Checkpoint, CnnConfig, CnnParams, TrainConfig, CHECKPOINT_VERSION};

use crate::error::{Result, SsfError};
use crate::io::write_atomic;

const MAGIC: &[u8; 8] = b"SSFTENS\x01";
pub const CNN_FORMAT: &str = "ssf-cnn-checkpoint";
pub const DECODER_FORMAT: &str = "linear-decoder";
pub const DECODER_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    /// Element offset into the payload.
    offset: usize,
    len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum DType {
    F32,
    F64,
}

impl DType {
    fn width(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Header<M> {
    format: String,
    format_version: u32,
    dtype: DType,
    #[serde(flatten)]
    meta: M,
    tensors: Vec<TensorEntry>,
}

fn encode<M: Serialize>(
    format: &str,
    version: u32,
    dtype: DType,
    meta: M,
    tensors: &[(&str, Vec<usize>, &[f64])],
) -> Vec<u8> {
    let mut entries = Vec::new();
    let mut payload = Vec::new();
    let mut offset = 0;
    for (name, shape, data) in tensors {
        entries.push(TensorEntry {
            name: (*name).to_owned(),
            shape: shape.clone(),
            offset,
            len: data.len(),
        });
        offset += data.len();
        for &v in data.iter() {
            match dtype {
                DType::F32 => payload.extend((v as f32).to_le_bytes()),
                DType::F64 => payload.extend(v.to_le_bytes()),
            }
        }
    }
    let header = Header {
        format: format.to_owned(),
        format_version: version,
        dtype,
        meta,
        tensors: entries,
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(16 + json.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend((json.len() as u64).to_le_bytes());
    out.extend(json);
    out.extend(payload);
    out
}

type Decoded<M> = (M, Vec<(String, Vec<usize>, Vec<f64>)>);

fn decode<M: for<'de> Deserialize<'de>>(
    path: &Path,
    bytes: &[u8],
    format: &str,
    version: u32,
) -> Result<Decoded<M>> {
    let bad = |m: String| SsfError::format(path, m);
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("not a tensor file".into()));
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = bytes
        .get(16..16 + hlen)
        .ok_or_else(|| bad("truncated header".into()))?;
    let header: Header<M> = serde_json::from_slice(body).map_err(|source| SsfError::Json {
        path: path.to_owned(),
        source,
    })?;
    if header.format != format {
        return Err(bad(format!(
            "expected format {format}, found {}",
            header.format
        )));
    }
    if header.format_version != version {
        return Err(bad(format!(
            "unsupported format_version {}",
            header.format_version
        )));
    }
    let payload = &bytes[16 + hlen..];
    let w = header.dtype.width();
    let total: usize = header.tensors.iter().map(|t| t.len).sum();
    if payload.len() != total * w {
        return Err(bad(format!(
            "payload holds {} bytes, table needs {}",
            payload.len(),
            total * w
        )));
    }
    let mut tensors = Vec::new();
    for t in &header.tensors {
        if t.shape.iter().product::<usize>() != t.len || t.offset + t.len > total {
            return Err(bad(format!("inconsistent table entry for {}", t.name)));
        }
        let raw = &payload[t.offset * w..(t.offset + t.len) * w];
        let values = match header.dtype {
            DType::F32 => raw
                .chunks_exact(4)
                .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4"))))
                .collect(),
            DType::F64 => raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8")))
                .collect(),
        };
        tensors.push((t.name.clone(), t.shape.clone(), values));
    }
    Ok((header.meta, tensors))
}

#[derive(Debug, Serialize, Deserialize)]
struct CnnMeta {
    config: CnnConfig,
    train_config: TrainConfig,
    epoch: usize,
    validation_accuracy: f64,
}

pub fn encode_checkpoint(ck: &Checkpoint) -> Vec<u8> {
    let meta = CnnMeta {
        config: ck.config.clone(),
        train_config: ck.train_config.clone(),
        epoch: ck.epoch,
        validation_accuracy: ck.validation_accuracy,
    };
    encode(
        CNN_FORMAT,
        ck.format_version,
        DType::F32,
        meta,
        &ck.params.named(),
    )
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    write_atomic(path, &encode_checkpoint(ck))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| SsfError::io(path, e))?;
    let (meta, tensors): Decoded<CnnMeta> = decode(path, &bytes, CNN_FORMAT, CHECKPOINT_VERSION)?;
    let params = CnnParams::from_named(&meta.config, |name| {
        tensors
            .iter()
            .find(|t| t.0 == name)
            .map(|t| (t.1.clone(), t.2.clone()))
    })?;
    Ok(Checkpoint {
        format_version: CHECKPOINT_VERSION,
        config: meta.config,
        train_config: meta.train_config,
        params,
        epoch: meta.epoch,
        validation_accuracy: meta.validation_accuracy,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct DecoderMeta {
    subject_id: String,
    sample_rate: f64,
    n_channels: usize,
    max_lag: usize,
    ridge_lambda: f64,
}

pub fn save_decoder(
    path: &Path,
    subject_id: &str,
    sample_rate: f64,
    d: &LinearDecoder,
) -> Result<()> {
    let meta = DecoderMeta {
        subject_id: subject_id.to_owned(),
        sample_rate,
        n_channels: d.n_channels,
        max_lag: d.max_lag,
        ridge_lambda: d.ridge_lambda,
    };
    let shape = vec![d.n_channels, d.n_lags()];
    write_atomic(
        path,
        &encode(
            DECODER_FORMAT,
            DECODER_VERSION,
            DType::F64,
            meta,
            &[("weights", shape, &d.weights)],
        ),
    )
}

/// `(subject_id, sample_rate, decoder)`
pub fn load_decoder(path: &Path) -> Result<(String, f64, LinearDecoder)> {
    let bytes = fs::read(path).map_err(|e| SsfError::io(path, e))?;
    let (m, mut tensors): Decoded<DecoderMeta> =
        decode(path, &bytes, DECODER_FORMAT, DECODER_VERSION)?;
    let (_, shape, weights) = tensors
        .pop()
        .filter(|t| t.0 == "weights")
        .ok_or_else(|| SsfError::format(path, "missing weights"))?;
    if shape != [m.n_channels, m.max_lag + 1] {
        return Err(SsfError::format(path, "weight shape does not match header"));
    }
    let d = LinearDecoder {
        n_channels: m.n_channels,
        max_lag: m.max_lag,
        ridge_lambda: m.ridge_lambda,
        weights,
    };
    Ok((m.subject_id, m.sample_rate, d))
}
