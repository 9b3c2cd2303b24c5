use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Deserialize;

use evsynth::io::{self, SampleParts, ThresholdEvents};
use evsynth::pipeline::{eval_predictions, file_density, run_pipeline, EvalOptions, PipelineConfig};
use evsynth::sampler::SampleSchedule;
use evsynth::simulator::{generate_events, log_transform, validate_thresholds, SimulatorConfig};
use evsynth::{voxelize, EvalMode, Error};

const EXIT_CONFIG: u8 = 2;
const EXIT_GENERATION: u8 = 3;
const EXIT_MISMATCH: u8 = 4;

#[derive(Parser)]
#[command(name = "evsynth", version, about = "Synthetic event-camera datasets with exact optical flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate and package a full dataset.
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        thresholds: Option<Vec<f64>>,
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long)]
        max_disp: Option<f64>,
        #[arg(long)]
        jobs: Option<usize>,
        /// Also write event-accumulation snapshots under `<out>/debug`.
        #[arg(long)]
        debug_images: bool,
    },
    /// Simulate events from a CSV of `path,t_us` frame rows.
    Simulate {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.2")]
        thresholds: Vec<f64>,
        /// Simulator settings as JSON; `threshold` is overridden.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode an event file as a voxel grid over its window.
    Voxelize {
        #[arg(long)]
        events: PathBuf,
        #[arg(long, default_value_t = evsynth::voxel::DEFAULT_BINS)]
        bins: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the valid-pixel density of event files.
    Density {
        #[arg(long, num_args = 1.., required = true)]
        events: Vec<PathBuf>,
        #[arg(long, default_value_t = evsynth::voxel::DEFAULT_BINS)]
        bins: usize,
    },
    /// Package loose parts described by `<parts>/parts.json` into a dataset.
    Package {
        #[arg(long)]
        parts: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-check every sample listed in a dataset manifest.
    Validate { root: PathBuf },
    /// Score `<pred>/<id>.flo` files against a dataset's forward flow.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        mode: Option<EvalMode>,
        /// Dataset root holding the event files for sparse masks.
        #[arg(long)]
        events: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
        /// Report destination; defaults to `<pred>/eval_report.jsonl`.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Json(_) | Error::Io { .. } | Error::Alignment { .. } => EXIT_CONFIG,
        Error::Format { .. } | Error::Corrupt { .. } | Error::Shape { .. } => EXIT_MISMATCH,
        _ => EXIT_GENERATION,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(command: Command) -> evsynth::Result<u8> {
    match command {
        Command::Generate {
            config,
            seed,
            out,
            samples,
            thresholds,
            bins,
            max_disp,
            jobs,
            debug_images,
        } => {
            let mut cfg = match config {
                Some(p) => PipelineConfig::load(&p)?,
                None => PipelineConfig::default(),
            };
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.out = out.unwrap_or(cfg.out);
            cfg.samples = samples.unwrap_or(cfg.samples);
            cfg.thresholds = thresholds.unwrap_or(cfg.thresholds);
            cfg.bins = bins.unwrap_or(cfg.bins);
            cfg.max_disp = max_disp.unwrap_or(cfg.max_disp);
            cfg.jobs = jobs.unwrap_or(cfg.jobs);
            cfg.debug_images |= debug_images;
            let summary = run_pipeline(&cfg)?;
            println!("{summary}");
            Ok(0)
        }
        Command::Simulate {
            frames,
            thresholds,
            config,
            out,
        } => simulate(&frames, &thresholds, config.as_deref(), &out),
        Command::Voxelize { events, bins, out } => {
            let s = io::read_events(&events)?;
            io::write_voxels(&out, &voxelize(&s, s.t_start, s.t_end, bins)?)?;
            Ok(0)
        }
        Command::Density { events, bins } => {
            for p in &events {
                println!("{}\t{}", p.display(), file_density(p, bins)?);
            }
            Ok(0)
        }
        Command::Package { parts, out } => package(&parts, &out),
        Command::Validate { root } => {
            let findings = io::validate_dataset(&root)?;
            for f in &findings {
                println!("{f}");
            }
            if findings.is_empty() {
                println!("ok: {} samples", io::read_manifest(&root)?.len());
                Ok(0)
            } else {
                eprintln!("{} findings", findings.len());
                Ok(EXIT_MISMATCH)
            }
        }
        Command::Eval {
            pred,
            gt,
            mode,
            events,
            threshold,
            report,
        } => {
            let modes = match (mode, &events) {
                (Some(m), _) => vec![m],
                (None, Some(_)) => vec![EvalMode::Dense, EvalMode::Sparse],
                (None, None) => vec![EvalMode::Dense],
            };
            let opts = EvalOptions {
                modes,
                events_root: events,
                threshold,
            };
            let outcome = eval_predictions(&pred, &gt, &opts)?;
            let text = outcome.to_jsonl()?;
            print!("{text}");
            let report = report.unwrap_or_else(|| pred.join("eval_report.jsonl"));
            fs::write(&report, &text).map_err(|e| Error::Io {
                path: report.clone(),
                source: e,
            })?;
            for id in &outcome.missing {
                eprintln!("missing prediction: {id}");
            }
            Ok(if outcome.missing.is_empty() { 0 } else { EXIT_MISMATCH })
        }
    }
}

fn read_text(path: &Path) -> evsynth::Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn simulate(frames_csv: &Path, thresholds: &[f64], config: Option<&Path>, out: &Path) -> evsynth::Result<u8> {
    validate_thresholds(thresholds)?;
    let base: SimulatorConfig = match config {
        Some(p) => serde_json::from_str(&read_text(p)?).map_err(|e| Error::Config(e.to_string()))?,
        None => SimulatorConfig::default(),
    };
    let dir = frames_csv.parent().unwrap_or(Path::new("."));
    let mut log_frames = Vec::new();
    for (n, line) in read_text(frames_csv)?.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (n == 0 && line.starts_with("path")) {
            continue;
        }
        let (path, t) = line
            .split_once(',')
            .ok_or_else(|| Error::Config(format!("{}:{}: expected path,t_us", frames_csv.display(), n + 1)))?;
        let t: i64 = t
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{}:{}: bad timestamp", frames_csv.display(), n + 1)))?;
        let frame = io::read_frame(dir.join(path.trim()), t)?;
        log_frames.push(log_transform(&frame, base.log_floor));
    }
    let times: Vec<i64> = log_frames.iter().map(|f| f.t).collect();
    if times.len() < 2 || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("need at least two frames with increasing timestamps".into()));
    }
    let schedule = SampleSchedule { times, max_disp: f64::NAN };
    for &c in thresholds {
        let cfg = SimulatorConfig {
            threshold: c,
            ..base.clone()
        };
        let stream = generate_events(&log_frames, &schedule, &cfg)?;
        let path = out.join(format!("events_{}.evs", io::threshold_tag(c)));
        io::write_events(&path, &stream)?;
        println!("{}\t{} events", path.display(), stream.len());
    }
    Ok(0)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PartsSpec {
    id: String,
    dt: u32,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_bins")]
    bins: usize,
    events: Vec<EventsSpec>,
    flow_fw: PathBuf,
    flow_bw: PathBuf,
    #[serde(default)]
    frames: Vec<FrameSpec>,
    #[serde(default)]
    info: serde_json::Value,
}

fn default_bins() -> usize {
    evsynth::voxel::DEFAULT_BINS
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EventsSpec {
    threshold: f64,
    prev: PathBuf,
    next: PathBuf,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameSpec {
    index: usize,
    t: i64,
    path: PathBuf,
}

fn package(parts_dir: &Path, root: &Path) -> evsynth::Result<u8> {
    let spec_path = parts_dir.join("parts.json");
    let spec: PartsSpec = serde_json::from_str(&read_text(&spec_path)?)
        .map_err(|e| Error::Config(format!("{}: {e}", spec_path.display())))?;
    let events = spec
        .events
        .iter()
        .map(|e| {
            Ok(ThresholdEvents {
                threshold: e.threshold,
                prev: io::read_events(parts_dir.join(&e.prev))?,
                next: io::read_events(parts_dir.join(&e.next))?,
            })
        })
        .collect::<evsynth::Result<Vec<_>>>()?;
    let frames = spec
        .frames
        .iter()
        .map(|f| Ok((f.index, io::read_frame(parts_dir.join(&f.path), f.t)?)))
        .collect::<evsynth::Result<Vec<_>>>()?;
    let parts = SampleParts {
        id: spec.id,
        dt: spec.dt,
        seed: spec.seed,
        bins: spec.bins,
        events,
        flow_fw: io::read_flow(parts_dir.join(&spec.flow_fw))?,
        flow_bw: io::read_flow(parts_dir.join(&spec.flow_bw))?,
        frames,
        info: spec.info,
    };
    let entry = io::package_sample(root, &parts)?;
    io::append_manifest(root, &[entry])?;
    io::write_timestamps(root, &io::read_manifest(root)?)?;
    println!("packaged {}", parts.id);
    Ok(0)
}
