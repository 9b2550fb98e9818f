//! Pipeline configuration: one JSON document, overridable by dotted paths.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use ssf_core::baseline::{DEFAULT_LAG_S, LAMBDA_GRID};
use ssf_core::cnn::{CnnConfig, TrainConfig};
use ssf_core::data::{SynthConfig, SPLIT_RATIOS};
use ssf_core::features::FeatureConfig;
use ssf_core::signal::PreprocConfig;

use crate::error::{Result, SsfError};
use crate::io::read_json;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub enabled: bool,
    /// Longest EEG lag after the stimulus, seconds.
    pub lag_s: f64,
    /// Ridge values relative to the mean autocovariance diagonal.
    pub lambda_grid: Vec<f64>,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            enabled: true,
            lag_s: DEFAULT_LAG_S,
            lambda_grid: LAMBDA_GRID.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub ratios: [f64; 3],
    /// Windows are assigned to partitions in contiguous blocks of at least
    /// this many seconds (and at least two windows).
    pub block_s: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            ratios: SPLIT_RATIOS,
            block_s: 20.0,
            seed: 0,
        }
    }
}

/// Synthetic cohort: subject `i` (0-based) is `S{i+1:02}` generated with
/// seed `subject.seed + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthCohort {
    pub subjects: usize,
    pub subject: SynthConfig,
}

impl Default for SynthCohort {
    fn default() -> Self {
        SynthCohort {
            subjects: 16,
            subject: SynthConfig::default(),
        }
    }
}

impl SynthCohort {
    pub fn subject_config(&self, i: usize) -> SynthConfig {
        SynthConfig {
            subject_id: format!("S{:02}", i + 1),
            seed: self.subject.seed.wrapping_add(i as u64),
            ..self.subject.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Bundled montage name or path to a montage JSON file.
    pub montage: String,
    /// Keep only these scalp channels (e.g. a 32-channel subset).
    pub channels: Option<Vec<String>>,
    /// Directory of recording containers; exclusive with `synth`.
    pub data_dir: Option<PathBuf>,
    pub synth: Option<SynthCohort>,
    pub preprocess: PreprocConfig,
    pub features: FeatureConfig,
    /// `in_channels` and `input_size` are taken from `features`.
    pub cnn: CnnConfig,
    /// `seed` is replaced per run by `seed + run`.
    pub training: TrainConfig,
    pub baseline: BaselineConfig,
    pub window_sizes: Vec<f64>,
    pub overlap: f64,
    pub split: SplitConfig,
    /// Runs use training seeds `seed .. seed + runs`.
    pub seed: u64,
    pub runs: usize,
    pub output_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            montage: "biosemi64".into(),
            channels: None,
            data_dir: None,
            synth: None,
            preprocess: PreprocConfig::default(),
            features: FeatureConfig::default(),
            cnn: CnnConfig::default(),
            training: TrainConfig::default(),
            baseline: BaselineConfig::default(),
            window_sizes: vec![0.1, 1.0, 2.0, 5.0, 10.0],
            overlap: 0.5,
            split: SplitConfig::default(),
            seed: 0,
            runs: 10,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SsfError::Config(m));
        if self.window_sizes.is_empty() {
            return bad("window_sizes must not be empty".into());
        }
        if let Some(w) = self
            .window_sizes
            .iter()
            .find(|w| !(**w > 0.0 && w.is_finite()))
        {
            return bad(format!("window size {w} must be positive"));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return bad(format!("overlap {} must lie in [0, 1)", self.overlap));
        }
        if self.runs == 0 {
            return bad("runs must be >= 1".into());
        }
        match (&self.data_dir, &self.synth) {
            (Some(_), Some(_)) => return bad("data_dir and synth are mutually exclusive".into()),
            (None, None) => return bad("one of data_dir or synth is required".into()),
            (_, Some(s)) if s.subjects == 0 => return bad("synth.subjects must be >= 1".into()),
            _ => {}
        }
        if !(self.split.block_s > 0.0) {
            return bad("split.block_s must be positive".into());
        }
        if self.baseline.lambda_grid.is_empty()
            || self.baseline.lambda_grid.iter().any(|l| !(*l >= 0.0))
        {
            return bad("baseline.lambda_grid must hold non-negative values".into());
        }
        if !(self.baseline.lag_s >= 0.0) {
            return bad("baseline.lag_s must be >= 0".into());
        }
        let core = |r: ssf_core::Result<()>| r.map_err(|e| SsfError::Config(e.to_string()));
        core(self.preprocess.validate())?;
        core(self.features.validate())?;
        core(self.cnn_config().validate())?;
        core(self.training.validate())?;
        if let Some(s) = &self.synth {
            core(s.subject.validate())?;
        }
        Ok(())
    }

    pub fn cnn_config(&self) -> CnnConfig {
        CnnConfig {
            in_channels: self.features.sub_windows,
            input_size: self.features.grid_n,
            ..self.cnn.clone()
        }
    }

    pub fn train_config(&self, run: usize) -> TrainConfig {
        TrainConfig {
            seed: self.seed.wrapping_add(run as u64),
            ..self.training.clone()
        }
    }

    /// Reads a config file (or defaults) and applies `path=value` overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut value = match path {
            Some(p) => read_json::<Value>(p)?,
            None => serde_json::to_value(PipelineConfig::default()).expect("defaults serialize"),
        };
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        serde_json::from_value(value).map_err(|e| SsfError::Config(e.to_string()))
    }
}

/// Sets `a.b.c=value` in a JSON tree; the value is parsed as JSON, falling
/// back to a plain string. Missing intermediate objects are created.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| SsfError::Config(format!("override {assignment:?} is not path=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(SsfError::Config(format!("bad override path {path:?}")));
    }
    let mut node = root;
    for key in &keys[..keys.len() - 1] {
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
        let obj = node
            .as_object_mut()
            .ok_or_else(|| SsfError::Config(format!("{path}: {key} is not inside an object")))?;
        node = obj.entry((*key).to_owned()).or_insert(Value::Null);
    }
    if node.is_null() {
        *node = Value::Object(Default::default());
    }
    let obj = node
        .as_object_mut()
        .ok_or_else(|| SsfError::Config(format!("{path}: parent is not an object")))?;
    obj.insert(keys[keys.len() - 1].to_owned(), value);
    Ok(())
}
