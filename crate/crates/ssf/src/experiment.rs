//! End-to-end experiment: preprocess, split, extract, train per seed,
//! evaluate per window size, and write the report files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ssf_core::baseline::{
    decide_attention, max_lag_samples, reconstruct, select_lambda, Envelope, LaggedCovariance,
    LinearDecoder,
};
use ssf_core::cnn::{evaluate, train, EpochRecord, SubjectAccuracy, TrainOutcome};
use ssf_core::data::{
    merge_spans, segment_windows, stratified_split, subset_channels, synth_recording,
    AttentionLabel, DecisionWindow, Montage, RawRecording, SplitSet, SynthConfig,
};
use ssf_core::features::{extract_ssf, SsfExtractor, SsfTensor};
use ssf_core::signal::{normalize_trial, preprocess, rereference, resample, resample_series};

use crate::checkpoint::{save_checkpoint, save_decoder};
use crate::config::PipelineConfig;
use crate::error::{Result, SsfError, StageContext};
use crate::io::{list_recordings, read_envelope_pair, read_recording, write_atomic, write_json};
use crate::montage::load_montage;
use crate::report::{
    aggregate_markdown, fmt_window, metrics_csv, paired_tests, paired_tests_csv, MetricRow,
};

pub const SSF_MODEL: &str = "ssf-cnn";
pub const LINEAR_MODEL: &str = "linear";

/// A raw recording with its optional `[left, right]` speech envelopes.
#[derive(Debug, Clone)]
pub struct Subject {
    pub recording: RawRecording,
    pub envelopes: Option<[Envelope; 2]>,
}

/// The configured montage restricted to `channels` when that list is set.
pub fn scalp_montage(cfg: &PipelineConfig) -> Result<Montage> {
    let m = load_montage(&cfg.montage)?;
    match &cfg.channels {
        None => Ok(m),
        Some(keep) => {
            let entries = keep
                .iter()
                .map(|n| {
                    m.get(n).cloned().ok_or_else(|| {
                        SsfError::Config(format!("channel {n} is not in the montage"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Montage::new(entries)?)
        }
    }
}

/// Synthetic subject `i` on the full configured montage.
pub fn synth_subject(cfg: &PipelineConfig, i: usize) -> Result<Subject> {
    let cohort = cfg
        .synth
        .as_ref()
        .ok_or_else(|| SsfError::Config("no synth section in the configuration".into()))?;
    let montage = load_montage(&cfg.montage)?;
    let sc = SynthConfig {
        n_channels: montage.len(),
        ..cohort.subject_config(i)
    };
    let s = synth_recording(&sc, &montage)?;
    Ok(Subject {
        recording: s.recording,
        envelopes: s.envelopes,
    })
}

pub fn load_subject(path: &Path) -> Result<Subject> {
    Ok(Subject {
        recording: read_recording(path)?,
        envelopes: read_envelope_pair(path)?,
    })
}

/// Subjects from the synthetic cohort or the data directory, in a stable order.
pub fn load_subjects(cfg: &PipelineConfig) -> Result<Vec<Subject>> {
    match (&cfg.synth, &cfg.data_dir) {
        (Some(c), _) => (0..c.subjects).map(|i| synth_subject(cfg, i)).collect(),
        (None, Some(dir)) => {
            let paths = list_recordings(dir)?;
            if paths.is_empty() {
                return Err(SsfError::Config(format!(
                    "no recordings in {}",
                    dir.display()
                )));
            }
            paths.iter().map(|p| load_subject(p)).collect()
        }
        (None, None) => Err(SsfError::Config(
            "one of data_dir or synth is required".into(),
        )),
    }
}

fn restrict(rec: RawRecording, montage: &Montage, cfg: &PipelineConfig) -> Result<RawRecording> {
    if cfg.channels.is_none() {
        return Ok(rec);
    }
    let keep: Vec<&str> = montage.names().collect();
    Ok(subset_channels(&rec, montage, &keep)?.0)
}

/// Re-reference, alpha bandpass, resample, z-score; then the channel subset.
pub fn prepare_ssf(
    raw: &RawRecording,
    montage: &Montage,
    cfg: &PipelineConfig,
) -> Result<RawRecording> {
    restrict(preprocess(raw, &cfg.preprocess)?, montage, cfg)
}

/// Recording and envelopes for the linear decoder, both at the target rate.
#[derive(Debug, Clone)]
pub struct BaselineData {
    pub recording: RawRecording,
    pub envelopes: [Vec<f64>; 2],
}

/// Same chain as [`prepare_ssf`] without the alpha bandpass: the decoder
/// tracks the slow speech envelope, which the alpha band would remove.
pub fn prepare_baseline(
    subject: &Subject,
    montage: &Montage,
    cfg: &PipelineConfig,
) -> Result<BaselineData> {
    let raw = &subject.recording;
    let envs = subject.envelopes.as_ref().ok_or_else(|| {
        SsfError::Config(format!(
            "subject {} has no speech envelopes for the linear baseline",
            raw.subject_id
        ))
    })?;
    for e in envs {
        if e.len() != raw.n_samples() || e.sample_rate != raw.sample_rate {
            return Err(SsfError::Config(format!(
                "subject {}: envelope {} does not match the recording's length and rate",
                raw.subject_id, e.speaker_id
            )));
        }
    }
    let pp = &cfg.preprocess;
    let refs: Vec<&str> = pp.reference_channels.iter().map(String::as_str).collect();
    let rec = rereference(raw, &refs)?;
    let rec = normalize_trial(&resample(&rec, pp.target_rate, None)?)?;
    let rec = restrict(rec, montage, cfg)?;
    let envelopes = [
        resample_series(&envs[0].samples, raw.sample_rate, pp.target_rate)?,
        resample_series(&envs[1].samples, raw.sample_rate, pp.target_rate)?,
    ];
    Ok(BaselineData {
        recording: rec,
        envelopes,
    })
}

/// Block length in samples: `split.block_s`, but never under two windows.
pub fn block_samples(cfg: &PipelineConfig, window_s: f64, sample_rate: f64) -> usize {
    let w = (window_s * sample_rate).round() as usize;
    ((cfg.split.block_s * sample_rate).round() as usize)
        .max(2 * w)
        .max(1)
}

/// Windows of one subject, split with seed `split.seed + subject_index`.
pub fn split_subject(
    rec: &RawRecording,
    window_s: f64,
    cfg: &PipelineConfig,
    subject_index: usize,
) -> Result<SplitSet> {
    let windows = segment_windows(rec, window_s, cfg.overlap)?;
    let block = block_samples(cfg, window_s, rec.sample_rate);
    let split = stratified_split(
        windows,
        cfg.split.ratios,
        block,
        cfg.split.seed.wrapping_add(subject_index as u64),
    )?;
    for (name, part, ratio) in [
        ("train", &split.train, cfg.split.ratios[0]),
        ("validation", &split.validation, cfg.split.ratios[1]),
        ("test", &split.test, cfg.split.ratios[2]),
    ] {
        if ratio > 0.0 && part.is_empty() {
            return Err(SsfError::Data(format!(
                "subject {}: no {name} windows of {window_s} s remain after removing overlap with other partitions; \
                 trials of {} s are too short for {block} sample blocks",
                rec.subject_id,
                rec.trials.iter().map(|t| t.len()).max().unwrap_or(0) as f64 / rec.sample_rate,
            )));
        }
    }
    Ok(split)
}

pub fn extract_all(windows: &[DecisionWindow], ex: &SsfExtractor) -> Result<Vec<SsfTensor>> {
    Ok(windows
        .iter()
        .map(|w| extract_ssf(w, ex))
        .collect::<ssf_core::Result<_>>()?)
}

/// Train, validation and test tensors pooled over subjects.
#[derive(Debug, Clone, Default)]
pub struct TensorSplit {
    pub train: Vec<SsfTensor>,
    pub validation: Vec<SsfTensor>,
    pub test: Vec<SsfTensor>,
}

impl TensorSplit {
    pub fn extend(&mut self, split: &SplitSet, ex: &SsfExtractor) -> Result<()> {
        self.train.extend(extract_all(&split.train, ex)?);
        self.validation.extend(extract_all(&split.validation, ex)?);
        self.test.extend(extract_all(&split.test, ex)?);
        Ok(())
    }
}

fn attended(data: &BaselineData, label: AttentionLabel) -> &[f64] {
    &data.envelopes[label.class_index()]
}

/// Fits a per-subject decoder on the training spans (ridge chosen on the
/// validation spans) and classifies every test window.
///
/// Reconstruction runs over whole trials with the EEG zero-padded past the
/// trial end, then is cut into the test windows.
pub fn run_baseline(
    data: &BaselineData,
    split: &SplitSet,
    cfg: &PipelineConfig,
) -> Result<(LinearDecoder, SubjectAccuracy)> {
    let rec = &data.recording;
    let max_lag = max_lag_samples(cfg.baseline.lag_s, rec.sample_rate);
    let mut cov = LaggedCovariance::new(rec.n_channels(), max_lag);
    for (_, trial, a, b) in merge_spans(&split.train) {
        let label = rec.trials[trial].label;
        let eeg: Vec<&[f64]> = rec.data.iter().map(|r| &r[a..b]).collect();
        cov.accumulate(&eeg, &attended(data, label)[a..b])?;
    }
    let validation: Vec<(Vec<&[f64]>, Vec<f64>)> = merge_spans(&split.validation)
        .into_iter()
        .map(|(_, trial, a, b)| {
            let label = rec.trials[trial].label;
            (
                rec.data.iter().map(|r| &r[a..b]).collect(),
                attended(data, label)[a..b].to_vec(),
            )
        })
        .collect();
    let decoder = select_lambda(&cov, &validation, &cfg.baseline.lambda_grid)?;

    let mut by_trial: BTreeMap<usize, Vec<&DecisionWindow>> = BTreeMap::new();
    for w in &split.test {
        by_trial.entry(w.origin.trial).or_default().push(w);
    }
    let mut correct = 0;
    let mut total = 0;
    for (ti, windows) in by_trial {
        let trial = rec.trials[ti];
        let padded: Vec<Vec<f64>> = rec
            .data
            .iter()
            .map(|r| {
                let mut v = r[trial.start..trial.end].to_vec();
                v.resize(v.len() + max_lag, 0.0);
                v
            })
            .collect();
        let recon = reconstruct(&decoder, &padded)?;
        for w in windows {
            let (a, b) = (w.origin.start, w.end());
            let d = decide_attention(
                &recon[a - trial.start..b - trial.start],
                &data.envelopes[0][a..b],
                &data.envelopes[1][a..b],
            )?;
            total += 1;
            correct += usize::from(d.label == w.label);
        }
    }
    if total == 0 {
        return Err(SsfError::Core(ssf_core::Error::Empty(
            "baseline test windows",
        )));
    }
    Ok((
        decoder,
        SubjectAccuracy {
            subject: rec.subject_id.clone(),
            correct,
            total,
            accuracy: correct as f64 / total as f64,
        },
    ))
}

pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,train_loss,train_acc,val_acc\n");
    for h in history {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6}\n",
            h.epoch, h.train_loss, h.train_acc, h.val_acc
        ));
    }
    out
}

fn ensure_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| SsfError::io(p, e))
}

/// Trains one model and writes its checkpoint and history into `dir`.
pub fn train_and_save(
    cfg: &PipelineConfig,
    run: usize,
    tensors: &TensorSplit,
    dir: &Path,
    tag: &str,
) -> Result<TrainOutcome> {
    let tc = cfg.train_config(run);
    let outcome = train(&cfg.cnn_config(), &tc, &tensors.train, &tensors.validation)?;
    let ck = dir.join("checkpoints");
    let hist = dir.join("history");
    ensure_dir(&ck)?;
    ensure_dir(&hist)?;
    let name = format!("{tag}_seed{}", tc.seed);
    save_checkpoint(&ck.join(format!("{name}.ckpt")), &outcome.checkpoint)?;
    write_atomic(
        &hist.join(format!("{name}.csv")),
        history_csv(&outcome.history).as_bytes(),
    )?;
    Ok(outcome)
}

/// Paths of the files a finished run leaves behind.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub rows: Vec<MetricRow>,
}

impl RunOutput {
    pub fn metrics(&self) -> PathBuf {
        self.dir.join("metrics.csv")
    }
    pub fn aggregate(&self) -> PathBuf {
        self.dir.join("aggregate.md")
    }
    pub fn paired_tests(&self) -> PathBuf {
        self.dir.join("paired_tests.csv")
    }
}

/// Writes metrics, aggregate table and paired tests for `rows` into `dir`.
pub fn write_report(dir: &Path, rows: &[MetricRow]) -> Result<()> {
    ensure_dir(dir)?;
    write_atomic(&dir.join("metrics.csv"), metrics_csv(rows).as_bytes())?;
    write_atomic(
        &dir.join("aggregate.md"),
        aggregate_markdown(rows).as_bytes(),
    )?;
    let paired = paired_tests(rows)?;
    write_atomic(
        &dir.join("paired_tests.csv"),
        paired_tests_csv(&paired).as_bytes(),
    )
}

fn staging_dir(out: &Path) -> PathBuf {
    let mut name = out
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_else(|| "out".into());
    name.push(".partial");
    out.with_file_name(name)
}

/// Replaces `out` with `stage`. An existing `out` is only removed when it is
/// empty or holds a previous run (a `metrics.csv`).
fn promote(stage: &Path, out: &Path) -> Result<()> {
    if out.exists() {
        let empty = fs::read_dir(out)
            .map_err(|e| SsfError::io(out, e))?
            .next()
            .is_none();
        if !empty && !out.join("metrics.csv").exists() {
            return Err(SsfError::Config(format!(
                "{} exists and does not look like a previous run; refusing to replace it",
                out.display()
            )));
        }
        fs::remove_dir_all(out).map_err(|e| SsfError::io(out, e))?;
    }
    fs::rename(stage, out).map_err(|e| SsfError::io(out, e))
}

/// Runs the whole experiment. Outputs are built in a sibling `.partial`
/// directory which is removed on failure and renamed into place on success.
pub fn run_experiment(cfg: &PipelineConfig, progress: &mut dyn FnMut(&str)) -> Result<RunOutput> {
    cfg.validate()?;
    let out = cfg.output_dir.clone();
    let stage = staging_dir(&out);
    if stage.exists() {
        fs::remove_dir_all(&stage).map_err(|e| SsfError::io(&stage, e))?;
    }
    ensure_dir(&stage)?;
    match run_into(cfg, &stage, progress) {
        Ok(rows) => {
            promote(&stage, &out)?;
            Ok(RunOutput { dir: out, rows })
        }
        Err(e) => {
            let _ = fs::remove_dir_all(&stage);
            Err(e)
        }
    }
}

fn run_into(
    cfg: &PipelineConfig,
    dir: &Path,
    progress: &mut dyn FnMut(&str),
) -> Result<Vec<MetricRow>> {
    write_json(&dir.join("config.json"), cfg)?;
    let montage = scalp_montage(cfg).stage("montage")?;
    let subjects = load_subjects(cfg).stage("load")?;
    progress(&format!("loaded {} subject(s)", subjects.len()));

    let mut ssf_recs = Vec::with_capacity(subjects.len());
    let mut base_data = Vec::new();
    for s in &subjects {
        ssf_recs.push(prepare_ssf(&s.recording, &montage, cfg).stage("preprocess")?);
        if cfg.baseline.enabled {
            base_data.push(prepare_baseline(s, &montage, cfg).stage("preprocess")?);
        }
    }
    drop(subjects);
    let channels = &ssf_recs[0].channels;
    if let Some(r) = ssf_recs.iter().find(|r| &r.channels != channels) {
        return Err(SsfError::Config(format!(
            "subject {} has a different channel list; set `channels` to a common subset",
            r.subject_id
        )));
    }
    let extractor = SsfExtractor::new(&montage, channels, cfg.features.clone()).stage("extract")?;

    let mut rows = Vec::new();
    for &w in &cfg.window_sizes {
        let tag = format!("{SSF_MODEL}_w{}", fmt_window(w));
        let mut tensors = TensorSplit::default();
        let mut linear_rows = Vec::new();
        for (i, rec) in ssf_recs.iter().enumerate() {
            let split = split_subject(rec, w, cfg, i).stage("split")?;
            tensors.extend(&split, &extractor).stage("extract")?;
            if let Some(data) = base_data.get(i) {
                let (decoder, acc) = run_baseline(data, &split, cfg).stage("baseline")?;
                let dec_dir = dir.join("decoders");
                ensure_dir(&dec_dir)?;
                let path = dec_dir.join(format!(
                    "{LINEAR_MODEL}_w{}_{}.ckpt",
                    fmt_window(w),
                    rec.subject_id
                ));
                save_decoder(&path, &rec.subject_id, rec.sample_rate, &decoder)?;
                linear_rows.push(MetricRow {
                    model: LINEAR_MODEL.into(),
                    window_s: w,
                    subject: acc.subject,
                    accuracy: acc.accuracy,
                });
            }
        }
        progress(&format!(
            "{w} s windows: {} train / {} validation / {} test",
            tensors.train.len(),
            tensors.validation.len(),
            tensors.test.len()
        ));

        let mut per_subject: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for run in 0..cfg.runs {
            let outcome = train_and_save(cfg, run, &tensors, dir, &tag).stage("train")?;
            let m = evaluate(&outcome.checkpoint, &tensors.test).stage("evaluate")?;
            progress(&format!(
                "{w} s, seed {}: test accuracy {:.4} (best epoch {})",
                cfg.train_config(run).seed,
                m.accuracy,
                outcome.checkpoint.epoch
            ));
            for s in m.per_subject {
                per_subject.entry(s.subject).or_default().push(s.accuracy);
            }
        }
        rows.extend(per_subject.into_iter().map(|(subject, accs)| MetricRow {
            model: SSF_MODEL.into(),
            window_s: w,
            subject,
            accuracy: accs.iter().sum::<f64>() / accs.len() as f64,
        }));
        rows.extend(linear_rows);
    }
    write_report(dir, &rows).stage("report")?;
    Ok(rows)
}
