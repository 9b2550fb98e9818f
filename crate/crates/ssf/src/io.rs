//! On-disk containers: a JSON header next to a raw little-endian `f32` payload.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use ssf_core::baseline::Envelope;
use ssf_core::data::{AttentionLabel, RawRecording, Trial};
use ssf_core::features::SsfTensor;

use crate::error::{Result, SsfError};

pub const FORMAT_VERSION: u32 = 1;

/// Writes through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| SsfError::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| SsfError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        SsfError::io(path, e)
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| SsfError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| SsfError::Json {
        path: path.to_owned(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| SsfError::Json {
        path: path.to_owned(),
        source,
    })?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn f32_bytes(values: impl IntoIterator<Item = f32>) -> Vec<u8> {
    values.into_iter().flat_map(f32::to_le_bytes).collect()
}

pub fn read_f32(path: &Path, expected: usize) -> Result<Vec<f32>> {
    let bytes = fs::read(path).map_err(|e| SsfError::io(path, e))?;
    if bytes.len() != expected * 4 {
        return Err(SsfError::format(
            path,
            format!(
                "expected {expected} float32 values, found {} bytes",
                bytes.len()
            ),
        ));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

/// Payload path paired with a header path.
pub fn payload_path(header: &Path) -> PathBuf {
    header.with_extension("f32")
}

fn check_version(path: &Path, v: u32) -> Result<()> {
    if v != FORMAT_VERSION {
        return Err(SsfError::format(
            path,
            format!("unsupported format_version {v}"),
        ));
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct RecordingHeader {
    format_version: u32,
    subject_id: String,
    sample_rate: f64,
    channels: Vec<String>,
    n_samples: usize,
    trials: Vec<Trial>,
}

/// Writes `<stem>.json` and channel-major `<stem>.f32`.
pub fn write_recording(header: &Path, rec: &RawRecording) -> Result<()> {
    let h = RecordingHeader {
        format_version: FORMAT_VERSION,
        subject_id: rec.subject_id.clone(),
        sample_rate: rec.sample_rate,
        channels: rec.channels.clone(),
        n_samples: rec.n_samples(),
        trials: rec.trials.clone(),
    };
    write_atomic(
        &payload_path(header),
        &f32_bytes(rec.data.iter().flatten().map(|&v| v as f32)),
    )?;
    write_json(header, &h)
}

pub fn read_recording(header: &Path) -> Result<RawRecording> {
    let h: RecordingHeader = read_json(header)?;
    check_version(header, h.format_version)?;
    let n_ch = h.channels.len();
    let flat = read_f32(&payload_path(header), n_ch * h.n_samples)?;
    let data = if h.n_samples == 0 {
        vec![Vec::new(); n_ch]
    } else {
        flat.chunks_exact(h.n_samples)
            .map(|c| c.iter().map(|&v| f64::from(v)).collect())
            .collect()
    };
    Ok(RawRecording::new(
        h.subject_id,
        h.sample_rate,
        h.channels,
        data,
        h.trials,
    )?)
}

#[derive(Debug, Serialize, Deserialize)]
struct EnvelopeHeader {
    format_version: u32,
    speaker_id: String,
    sample_rate: f64,
    n_samples: usize,
}

pub fn write_envelope(header: &Path, env: &Envelope) -> Result<()> {
    let h = EnvelopeHeader {
        format_version: FORMAT_VERSION,
        speaker_id: env.speaker_id.clone(),
        sample_rate: env.sample_rate,
        n_samples: env.len(),
    };
    write_atomic(
        &payload_path(header),
        &f32_bytes(env.samples.iter().map(|&v| v as f32)),
    )?;
    write_json(header, &h)
}

pub fn read_envelope(header: &Path) -> Result<Envelope> {
    let h: EnvelopeHeader = read_json(header)?;
    check_version(header, h.format_version)?;
    let v = read_f32(&payload_path(header), h.n_samples)?;
    Ok(Envelope::new(
        h.speaker_id,
        h.sample_rate,
        v.into_iter().map(f64::from).collect(),
    )?)
}

/// Envelope headers belonging to a recording header: `<stem>_env_left.json`
/// and `<stem>_env_right.json`.
pub fn envelope_paths(recording: &Path) -> [PathBuf; 2] {
    let stem = recording
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    ["left", "right"].map(|side| recording.with_file_name(format!("{stem}_env_{side}.json")))
}

/// Loads both envelopes if present next to the recording.
pub fn read_envelope_pair(recording: &Path) -> Result<Option<[Envelope; 2]>> {
    let [l, r] = envelope_paths(recording);
    match (l.exists(), r.exists()) {
        (false, false) => Ok(None),
        (true, true) => Ok(Some([read_envelope(&l)?, read_envelope(&r)?])),
        _ => Err(SsfError::format(
            recording,
            "only one of the two envelope files exists",
        )),
    }
}

/// Recording headers in a directory, skipping envelope files, sorted by name.
pub fn list_recordings(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| SsfError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == "json")
                && !p
                    .file_stem()
                    .is_some_and(|s| s.to_string_lossy().contains("_env_"))
        })
        .collect();
    out.sort();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorCacheHeader {
    pub format_version: u32,
    #[serde(rename = "S")]
    pub n_maps: usize,
    pub grid_n: usize,
    pub extent: [f64; 4],
    pub labels: Vec<AttentionLabel>,
    pub subjects: Vec<String>,
}

/// Window-major tensor cache.
pub fn write_tensor_cache(header: &Path, tensors: &[SsfTensor], extent: [f64; 4]) -> Result<()> {
    let (n_maps, grid_n) = tensors.first().map_or((1, 0), |t| (t.n_maps, t.grid_n));
    if tensors
        .iter()
        .any(|t| t.n_maps != n_maps || t.grid_n != grid_n)
    {
        return Err(SsfError::format(header, "tensors of mixed shapes"));
    }
    let h = TensorCacheHeader {
        format_version: FORMAT_VERSION,
        n_maps,
        grid_n,
        extent,
        labels: tensors.iter().map(|t| t.label).collect(),
        subjects: tensors.iter().map(|t| t.subject_id.clone()).collect(),
    };
    write_atomic(
        &payload_path(header),
        &f32_bytes(tensors.iter().flat_map(|t| t.data.iter().copied())),
    )?;
    write_json(header, &h)
}

pub fn read_tensor_cache(header: &Path) -> Result<(TensorCacheHeader, Vec<SsfTensor>)> {
    let h: TensorCacheHeader = read_json(header)?;
    check_version(header, h.format_version)?;
    if h.labels.len() != h.subjects.len() {
        return Err(SsfError::format(
            header,
            "labels and subjects differ in length",
        ));
    }
    let per = h.n_maps * h.grid_n * h.grid_n;
    let data = read_f32(&payload_path(header), per * h.labels.len())?;
    let tensors = h
        .labels
        .iter()
        .zip(&h.subjects)
        .enumerate()
        .map(|(i, (&label, s))| SsfTensor {
            n_maps: h.n_maps,
            grid_n: h.grid_n,
            data: data[i * per..(i + 1) * per].to_vec(),
            label,
            subject_id: s.clone(),
        })
        .collect();
    Ok((h, tensors))
}
