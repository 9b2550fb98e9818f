use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ssf::checkpoint::{load_checkpoint, save_decoder};
use ssf::config::PipelineConfig;
use ssf::dump::{window_map, write_dump};
use ssf::error::{Result, SsfError, StageContext};
use ssf::experiment::{
    load_subject, prepare_baseline, prepare_ssf, run_baseline, run_experiment, scalp_montage,
    split_subject, synth_subject, train_and_save, write_report, TensorSplit, LINEAR_MODEL,
    SSF_MODEL,
};
use ssf::io::{
    read_recording, read_tensor_cache, write_envelope, write_recording, write_tensor_cache,
};
use ssf::report::{fmt_window, metrics_csv, parse_metrics_csv, MetricRow};
use ssf_core::cnn::evaluate;
use ssf_core::features::SsfExtractor;

#[derive(Parser)]
#[command(
    name = "ssf",
    version,
    about = "Spectro-spatial alpha features and CNN for left/right auditory attention detection"
)]
struct Cli {
    /// Pipeline configuration (JSON). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed; overrides `seed` in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output location for the command.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override a configuration field, e.g. `--set training.batch_size=32`.
    #[arg(long = "set", value_name = "PATH=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured synthetic cohort as recording containers.
    Synth,
    /// Re-reference, bandpass, resample and normalize recordings.
    Preprocess(Inputs),
    /// Split preprocessed recordings and cache SSF tensors per partition.
    Extract(WindowedInputs),
    /// Train the CNN on cached tensors (`train.json`, `validation.json`).
    Train {
        /// Directory written by `extract`.
        #[arg(long)]
        data: PathBuf,
    },
    /// Evaluate a checkpoint on a cached partition.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = Part::Test)]
        partition: Part,
    },
    /// Fit and evaluate the linear stimulus-reconstruction decoder per subject.
    Baseline(WindowedInputs),
    /// Aggregate table and paired tests from one or more metrics CSVs.
    Report {
        #[arg(long, required = true, num_args = 1..)]
        metrics: Vec<PathBuf>,
    },
    /// Dump one window's map as PGM and CSV.
    DumpMap {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        window: f64,
        #[arg(long)]
        index: usize,
        /// The recording is already preprocessed.
        #[arg(long)]
        no_preprocess: bool,
    },
    /// Full experiment over all window sizes and seeds.
    Run,
}

#[derive(Args)]
struct Inputs {
    /// Recording headers.
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
}

#[derive(Args)]
struct WindowedInputs {
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    /// Decision window length in seconds.
    #[arg(long)]
    window: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Part {
    Train,
    Validation,
    Test,
}

impl Part {
    fn file(self) -> &'static str {
        match self {
            Part::Train => "train.json",
            Part::Validation => "validation.json",
            Part::Test => "test.json",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref(), &cli.overrides)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: &PipelineConfig) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| cfg.output_dir.clone())
}

fn mkdir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| SsfError::io(p, e))
}

fn file_name(p: &Path) -> PathBuf {
    PathBuf::from(p.file_name().unwrap_or_default())
}

fn dispatch(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    let out = out_dir(&cli, &cfg);
    match &cli.command {
        Command::Synth => {
            let cohort = cfg
                .synth
                .as_ref()
                .ok_or_else(|| SsfError::Config("`synth` needs a synth section".into()))?;
            mkdir(&out)?;
            for i in 0..cohort.subjects {
                let s = synth_subject(&cfg, i).stage("synth")?;
                let path = out.join(format!("{}.json", s.recording.subject_id));
                write_recording(&path, &s.recording)?;
                if let Some(envs) = &s.envelopes {
                    for (e, p) in envs.iter().zip(ssf::io::envelope_paths(&path)) {
                        write_envelope(&p, e)?;
                    }
                }
                println!("{}", path.display());
            }
        }
        Command::Preprocess(inputs) => {
            let montage = scalp_montage(&cfg)?;
            mkdir(&out)?;
            for p in &inputs.input {
                let rec = read_recording(p)?;
                let pre = prepare_ssf(&rec, &montage, &cfg).stage("preprocess")?;
                let dest = out.join(file_name(p));
                write_recording(&dest, &pre)?;
                println!("{}", dest.display());
            }
        }
        Command::Extract(w) => {
            let montage = scalp_montage(&cfg)?;
            let mut tensors = TensorSplit::default();
            let mut extractor: Option<SsfExtractor> = None;
            for (i, p) in w.input.iter().enumerate() {
                let rec = read_recording(p)?;
                if extractor.is_none() {
                    extractor = Some(SsfExtractor::new(
                        &montage,
                        &rec.channels,
                        cfg.features.clone(),
                    )?);
                }
                let ex = extractor.as_ref().expect("set above");
                let split = split_subject(&rec, w.window, &cfg, i).stage("split")?;
                tensors.extend(&split, ex).stage("extract")?;
            }
            let extent = extractor
                .expect("at least one input")
                .interpolator()
                .extent();
            mkdir(&out)?;
            for (part, set) in [
                (Part::Train, &tensors.train),
                (Part::Validation, &tensors.validation),
                (Part::Test, &tensors.test),
            ] {
                let path = out.join(part.file());
                write_tensor_cache(&path, set, extent)?;
                println!("{} ({} windows)", path.display(), set.len());
            }
        }
        Command::Train { data } => {
            let tensors = TensorSplit {
                train: read_tensor_cache(&data.join(Part::Train.file()))?.1,
                validation: read_tensor_cache(&data.join(Part::Validation.file()))?.1,
                test: Vec::new(),
            };
            mkdir(&out)?;
            let o = train_and_save(&cfg, 0, &tensors, &out, SSF_MODEL).stage("train")?;
            println!(
                "best epoch {} validation accuracy {:.4}; outputs in {}",
                o.checkpoint.epoch,
                o.checkpoint.validation_accuracy,
                out.display()
            );
        }
        Command::Eval {
            checkpoint,
            data,
            partition,
        } => {
            let ck = load_checkpoint(checkpoint)?;
            let (_, set) = read_tensor_cache(&data.join(partition.file()))?;
            let m = evaluate(&ck, &set).stage("evaluate")?;
            println!("accuracy {:.4} over {} windows", m.accuracy, m.n_windows);
            if cli.out.is_some() {
                mkdir(&out)?;
                let path = out.join("metrics.json");
                ssf::io::write_json(&path, &m)?;
                println!("{}", path.display());
            }
        }
        Command::Baseline(w) => {
            let montage = scalp_montage(&cfg)?;
            mkdir(&out)?;
            let mut rows = Vec::new();
            for (i, p) in w.input.iter().enumerate() {
                let subject = load_subject(p)?;
                let data = prepare_baseline(&subject, &montage, &cfg).stage("preprocess")?;
                let split = split_subject(&data.recording, w.window, &cfg, i).stage("split")?;
                let (dec, acc) = run_baseline(&data, &split, &cfg).stage("baseline")?;
                let id = &data.recording.subject_id;
                save_decoder(
                    &out.join(format!(
                        "{LINEAR_MODEL}_w{}_{id}.ckpt",
                        fmt_window(w.window)
                    )),
                    id,
                    data.recording.sample_rate,
                    &dec,
                )?;
                println!("{id}: {:.4} ({}/{})", acc.accuracy, acc.correct, acc.total);
                rows.push(MetricRow {
                    model: LINEAR_MODEL.into(),
                    window_s: w.window,
                    subject: acc.subject,
                    accuracy: acc.accuracy,
                });
            }
            ssf::io::write_atomic(&out.join("metrics.csv"), metrics_csv(&rows).as_bytes())?;
        }
        Command::Report { metrics } => {
            let mut rows = Vec::new();
            for p in metrics {
                let text = std::fs::read_to_string(p).map_err(|e| SsfError::io(p, e))?;
                rows.extend(parse_metrics_csv(p, &text)?);
            }
            write_report(&out, &rows)?;
            println!("{}", out.join("aggregate.md").display());
        }
        Command::DumpMap {
            input,
            window,
            index,
            no_preprocess,
        } => {
            let montage = scalp_montage(&cfg)?;
            let rec = read_recording(input)?;
            let rec = if *no_preprocess {
                rec
            } else {
                prepare_ssf(&rec, &montage, &cfg).stage("preprocess")?
            };
            let ex = SsfExtractor::new(&montage, &rec.channels, cfg.features.clone())?;
            let map = window_map(&rec, &ex, *window, cfg.overlap, *index)?;
            let prefix = cli
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from(format!("map_{index}")));
            if let Some(parent) = prefix.parent().filter(|p| !p.as_os_str().is_empty()) {
                mkdir(parent)?;
            }
            for p in write_dump(&prefix, &map)? {
                println!("{}", p.display());
            }
        }
        Command::Run => {
            let done = run_experiment(&cfg, &mut |m| eprintln!("{m}"))?;
            println!("{}", done.aggregate().display());
        }
    }
    Ok(())
}
