//! End-to-end dataset generation and prediction scoring.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{slice_by_time, Event, EventStream};
use crate::frame::{Frame, Grid};
use crate::io::{self, ManifestEntry, SampleParts, ThresholdEvents};
use crate::metrics::{aggregate, evaluate, EvalMode, EvalReport};
use crate::sampler::{plan_schedule_with, SampleSchedule, SamplerOptions};
use crate::scene::{
    analytic_flow, gen_scene, gen_trajectory, render_frame, CameraIntrinsics, PlanarScene, SceneConfig,
    TrajectoryConfig,
};
use crate::simulator::{log_transform, validate_thresholds, EventSimulator, SimulatorConfig};
use crate::voxel::{density, voxelize};
use crate::pose::Trajectory;

/// Everything needed to generate a dataset. Every field has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub samples: usize,
    pub width: usize,
    pub height: usize,
    /// Horizontal field of view in degrees, used when `intrinsics` is unset.
    pub hfov_deg: f64,
    /// Explicit `[fx, fy, cx, cy]` in pixels.
    pub intrinsics: Option<[f64; 4]>,
    pub thresholds: Vec<f64>,
    /// Label-rate multiples; each produces its own packaged sample.
    pub dt: Vec<u32>,
    pub label_rate_hz: f64,
    pub bins: usize,
    pub max_disp: f64,
    pub max_intervals: usize,
    pub out: PathBuf,
    /// Worker threads; 0 uses every available core.
    pub jobs: usize,
    pub debug_images: bool,
    pub scene: SceneConfig,
    /// `duration_us` is replaced by the span the label windows need.
    pub trajectory: TrajectoryConfig,
    /// `threshold` is replaced by each entry of `thresholds`.
    pub simulator: SimulatorConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            samples: 1,
            width: 128,
            height: 128,
            hfov_deg: 60.0,
            intrinsics: None,
            thresholds: vec![0.1, 0.2, 0.4],
            dt: vec![1, 4],
            label_rate_hz: 60.0,
            bins: crate::voxel::DEFAULT_BINS,
            max_disp: crate::sampler::DEFAULT_MAX_DISP,
            max_intervals: crate::sampler::DEFAULT_MAX_INTERVALS,
            out: PathBuf::from("dataset"),
            jobs: 0,
            debug_images: false,
            scene: SceneConfig::default(),
            trajectory: TrajectoryConfig::default(),
            simulator: SimulatorConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.samples == 0 {
            return bad("sample count must be at least 1".into());
        }
        if self.width == 0 || self.height == 0 || self.width > 65535 || self.height > 65535 {
            return bad(format!("bad sensor size {}x{}", self.width, self.height));
        }
        validate_thresholds(&self.thresholds)?;
        if self.dt.is_empty() || self.dt.contains(&0) {
            return bad(format!("dt rates must be non-empty and positive, got {:?}", self.dt));
        }
        for (i, d) in self.dt.iter().enumerate() {
            if self.dt[..i].contains(d) {
                return bad(format!("duplicate dt {d}"));
            }
        }
        if !(self.label_rate_hz > 0.0 && self.label_rate_hz.is_finite()) {
            return bad(format!("label rate must be positive, got {}", self.label_rate_hz));
        }
        if self.bins < 2 {
            return bad(format!("bins must be at least 2, got {}", self.bins));
        }
        if !(self.max_disp > 0.0 && self.max_disp.is_finite()) {
            return bad(format!("max_disp must be positive, got {}", self.max_disp));
        }
        if self.max_intervals == 0 {
            return bad("max_intervals must be positive".into());
        }
        if self.label_time(1) <= 0 {
            return bad(format!("label rate {} Hz is below 1 us resolution", self.label_rate_hz));
        }
        self.scene.validate()?;
        self.trajectory_config().validate()?;
        self.simulator.validate()?;
        self.intrinsics_for().map(|_| ())
    }

    pub fn intrinsics_for(&self) -> Result<CameraIntrinsics> {
        match self.intrinsics {
            Some([fx, fy, cx, cy]) => CameraIntrinsics::new(fx, fy, cx, cy, self.width, self.height),
            None => CameraIntrinsics::from_fov(self.width, self.height, self.hfov_deg),
        }
    }

    /// Label timestamp `t_k = round(k * 1e6 / rate)` in microseconds.
    pub fn label_time(&self, k: usize) -> i64 {
        (k as f64 * 1e6 / self.label_rate_hz).round() as i64
    }

    /// Index of the reference label; the label timeline runs to twice this.
    pub fn center_index(&self) -> usize {
        self.dt.iter().copied().max().unwrap_or(1) as usize
    }

    pub fn trajectory_config(&self) -> TrajectoryConfig {
        TrajectoryConfig {
            duration_us: self.label_time(2 * self.center_index()),
            ..self.trajectory.clone()
        }
    }
}

/// `splitmix64` finaliser, used to derive independent per-sample seeds.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Scene, path and schedule for one drawn sample.
#[derive(Clone, Debug)]
pub struct SampleSetup {
    pub index: usize,
    pub seed: u64,
    pub scene: PlanarScene,
    pub trajectory: Trajectory,
    pub label_times: Vec<i64>,
    pub schedule: SampleSchedule,
}

pub fn sample_id(index: usize, dt: u32) -> String {
    format!("s{index:05}_dt{dt}")
}

/// Draws the scene and path for sample `index` and plans a schedule that
/// contains every label timestamp.
pub fn setup_sample(cfg: &PipelineConfig, k: &CameraIntrinsics, index: usize) -> Result<SampleSetup> {
    let seed = mix_seed(cfg.seed, index as u64);
    let scene = gen_scene(&cfg.scene, mix_seed(seed, 1))?;
    let trajectory = gen_trajectory(&cfg.trajectory_config(), &scene, mix_seed(seed, 2))?;
    let label_times: Vec<i64> = (0..=2 * cfg.center_index()).map(|i| cfg.label_time(i)).collect();
    let opts = SamplerOptions {
        max_disp: cfg.max_disp,
        max_intervals: cfg.max_intervals,
    };
    let parts = label_times
        .windows(2)
        .map(|w| plan_schedule_with(&scene, &trajectory, k, w[0], w[1], opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleSetup {
        index,
        seed,
        scene,
        trajectory,
        label_times,
        schedule: SampleSchedule::concat(&parts)?,
    })
}

/// Renders the schedule once and streams it through one simulator per
/// threshold. Returns the full event streams and the frames at label times.
pub fn simulate_sample(
    setup: &SampleSetup,
    k: &CameraIntrinsics,
    thresholds: &[f64],
    base: &SimulatorConfig,
) -> Result<(Vec<EventStream>, Vec<Frame>)> {
    let render = |t: i64| -> Result<Frame> {
        Ok(render_frame(&setup.scene, &setup.trajectory.pose_at(t)?, k, t))
    };
    let times = &setup.schedule.times;
    let first = render(times[0])?;
    let first_log = log_transform(&first, base.log_floor);
    let mut sims = thresholds
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let cfg = SimulatorConfig {
                threshold: c,
                noise_seed: mix_seed(setup.seed, 16 + i as u64),
                ..base.clone()
            };
            EventSimulator::new(cfg, &first_log)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut events: Vec<Vec<Event>> = vec![Vec::new(); thresholds.len()];
    let mut key_frames = vec![first];
    let mut labels = setup.label_times[1..].iter().peekable();
    for &t in &times[1..] {
        let frame = render(t)?;
        let log = log_transform(&frame, base.log_floor);
        for (sim, out) in sims.iter_mut().zip(&mut events) {
            out.extend(sim.advance(&log)?);
        }
        if labels.peek() == Some(&&t) {
            labels.next();
            key_frames.push(frame);
        }
    }
    let streams = events
        .into_iter()
        .map(|mut ev| {
            ev.sort();
            EventStream {
                events: ev,
                width: k.width as u32,
                height: k.height as u32,
                t_start: setup.schedule.start(),
                t_end: setup.schedule.end(),
            }
        })
        .collect();
    Ok((streams, key_frames))
}

/// Accumulated event polarity rendered as a grey image around 0.5.
pub fn event_image(stream: &EventStream) -> Frame {
    let (w, h) = (stream.width as usize, stream.height as usize);
    let mut acc = Grid::filled(w, h, 0.0);
    for e in &stream.events {
        *acc.get_mut(usize::from(e.x), usize::from(e.y)) += e.p.as_f64();
    }
    let peak = acc.as_slice().iter().fold(0.0f64, |m, v: &f64| m.max(v.abs())).max(1.0);
    Frame::new(acc.map(|v| 0.5 + 0.5 * v / peak), stream.t_start)
}

/// Builds the packaged parts for every dt of one drawn sample.
pub fn build_parts(cfg: &PipelineConfig, k: &CameraIntrinsics, index: usize) -> Result<Vec<SampleParts>> {
    let setup = setup_sample(cfg, k, index)?;
    let (streams, frames) = simulate_sample(&setup, k, &cfg.thresholds, &cfg.simulator)?;
    let m = cfg.center_index();
    let lt = &setup.label_times;
    let pose = |i: usize| setup.trajectory.pose_at(lt[i]);
    let mut out = Vec::with_capacity(cfg.dt.len());
    for &dt in &cfg.dt {
        let d = dt as usize;
        let (a, c, b) = (m - d, m, m + d);
        let events = cfg
            .thresholds
            .iter()
            .zip(&streams)
            .map(|(&threshold, s)| {
                Ok(ThresholdEvents {
                    threshold,
                    prev: slice_by_time(s, lt[a], lt[c])?,
                    next: slice_by_time(s, lt[c], lt[b])?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let (pc, pb) = (pose(c)?, pose(b)?);
        out.push(SampleParts {
            id: sample_id(index, dt),
            dt,
            seed: setup.seed,
            bins: cfg.bins,
            events,
            flow_fw: analytic_flow(&setup.scene, &pc, &pb, k),
            flow_bw: analytic_flow(&setup.scene, &pb, &pc, k),
            frames: [a, c, b].iter().map(|&i| (i, frames[i].clone())).collect(),
            info: serde_json::json!({
                "sample_index": index,
                "planes": setup.scene.planes().len(),
                "schedule_intervals": setup.schedule.intervals(),
                "label_times": lt,
                "flow_window": [lt[c], lt[b]],
            }),
        });
    }
    Ok(out)
}

/// What a pipeline run produced. Wall time is reported but never written to
/// the dataset so that repeated runs stay byte-identical.
#[derive(Clone, Debug)]
pub struct PipelineSummary {
    pub samples: usize,
    pub packaged: usize,
    pub frames_rendered: usize,
    /// `(C, mean density over all prev/next windows)` in threshold order.
    pub mean_density: Vec<(f64, f64)>,
    pub events: Vec<(f64, usize)>,
    pub wall_time: Duration,
}

impl fmt::Display for PipelineSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "samples   {:>8}", self.samples)?;
        writeln!(f, "packaged  {:>8}", self.packaged)?;
        writeln!(f, "frames    {:>8}", self.frames_rendered)?;
        writeln!(f, "{:>8}  {:>12}  {:>12}", "C", "mean density", "events")?;
        for ((c, d), (_, n)) in self.mean_density.iter().zip(&self.events) {
            writeln!(f, "{c:>8}  {d:>12.6}  {n:>12}")?;
        }
        write!(f, "wall time {:.2} s", self.wall_time.as_secs_f64())
    }
}

/// Error for a single drawn sample, naming the sample that failed.
fn sample_error(index: usize, e: Error) -> Error {
    match e {
        Error::Io { .. } => e,
        other => Error::Sample {
            index,
            source: Box::new(other),
        },
    }
}

fn run_samples<T: Send>(jobs: usize, n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Result<Vec<T>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
        Ok(pool.install(|| (0..n).into_par_iter().map(&f).collect()))
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
        Ok((0..n).map(f).collect())
    }
}

/// Generates, packages and indexes `cfg.samples` samples under `cfg.out`.
/// Output is identical for any worker count.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineSummary> {
    let started = Instant::now();
    cfg.validate()?;
    let k = cfg.intrinsics_for()?;
    let root = cfg.out.as_path();
    let results = run_samples(cfg.jobs, cfg.samples, |i| -> Result<(Vec<ManifestEntry>, usize)> {
        let parts = build_parts(cfg, &k, i).map_err(|e| sample_error(i, e))?;
        let mut entries = Vec::with_capacity(parts.len());
        for p in &parts {
            entries.push(io::package_sample(root, p)?);
            if cfg.debug_images {
                for te in &p.events {
                    let tag = io::threshold_tag(te.threshold);
                    for (name, s) in [("prev", &te.prev), ("next", &te.next)] {
                        let path = root.join("debug").join(format!("{}_{tag}_{name}.pgm", p.id));
                        io::write_frame(path, &event_image(s))?;
                    }
                }
            }
        }
        let frames = 1 + parts
            .first()
            .and_then(|p| p.info.get("schedule_intervals"))
            .and_then(|v| v.as_u64())
            .unwrap_or(0) as usize;
        Ok((entries, frames))
    })?;
    let mut entries = Vec::new();
    let mut frames_rendered = 0;
    for r in results {
        let (e, f) = r?;
        entries.extend(e);
        frames_rendered += f;
    }
    io::write_manifest(root, &entries)?;
    io::write_timestamps(root, &entries)?;
    let mut mean_density = Vec::new();
    let mut events = Vec::new();
    for &c in &cfg.thresholds {
        let files: Vec<_> = entries.iter().filter_map(|e| e.events_for(c)).collect();
        let sum: f64 = files.iter().map(|f| f.density_prev + f.density_next).sum();
        mean_density.push((c, sum / (2 * files.len()).max(1) as f64));
        events.push((c, files.iter().map(|f| f.count_prev + f.count_next).sum()));
    }
    Ok(PipelineSummary {
        samples: cfg.samples,
        packaged: entries.len(),
        frames_rendered,
        mean_density,
        events,
        wall_time: started.elapsed(),
    })
}

/// One line of an evaluation report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    /// Sample id, or `"aggregate"` for the pixel-weighted total.
    pub id: String,
    #[serde(flatten)]
    pub report: EvalReport,
}

#[derive(Clone, Debug, Default)]
pub struct EvalOutcome {
    pub records: Vec<EvalRecord>,
    pub missing: Vec<String>,
}

impl EvalOutcome {
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }
}

#[derive(Clone, Debug)]
pub struct EvalOptions {
    /// Modes to report; sparse needs `events_root`.
    pub modes: Vec<EvalMode>,
    /// Dataset root holding the event files used for sparse masks.
    pub events_root: Option<PathBuf>,
    /// Threshold whose `next` window defines the sparse mask. Defaults to
    /// each sample's first threshold.
    pub threshold: Option<f64>,
}

/// Scores `<pred_dir>/<id>.flo` against each sample's forward flow.
/// Samples without a prediction are listed in `missing` and skipped.
pub fn eval_predictions(pred_dir: &Path, gt_root: &Path, opts: &EvalOptions) -> Result<EvalOutcome> {
    if opts.modes.contains(&EvalMode::Sparse) && opts.events_root.is_none() {
        return Err(Error::Config("sparse evaluation needs an events directory".into()));
    }
    let entries = io::read_manifest(gt_root)?;
    let mut outcome = EvalOutcome::default();
    let mut per_mode: Vec<Vec<EvalReport>> = vec![Vec::new(); opts.modes.len()];
    for e in &entries {
        let pred_path = pred_dir.join(format!("{}.flo", e.id));
        if !pred_path.exists() {
            outcome.missing.push(e.id.clone());
            continue;
        }
        let pred = io::read_flow(&pred_path)?;
        let gt = io::read_flow(gt_root.join(&e.flow_fw))?;
        for (mode, acc) in opts.modes.iter().zip(&mut per_mode) {
            let grid = match (mode, &opts.events_root) {
                (EvalMode::Sparse, Some(root)) => {
                    let c = opts.threshold.unwrap_or_else(|| e.events[0].threshold);
                    let files = e.events_for(c).ok_or_else(|| {
                        Error::Config(format!("{}: no events at threshold {c}", e.id))
                    })?;
                    let s = io::read_events(root.join(&files.next))?;
                    Some(voxelize(&s, s.t_start, s.t_end, e.bins)?)
                }
                _ => None,
            };
            let report = evaluate(&pred, &gt, *mode, grid.as_ref())?;
            acc.push(report);
            outcome.records.push(EvalRecord {
                id: e.id.clone(),
                report,
            });
        }
    }
    for (mode, reports) in opts.modes.iter().zip(&per_mode) {
        outcome.records.push(EvalRecord {
            id: "aggregate".into(),
            report: aggregate(reports, *mode),
        });
    }
    Ok(outcome)
}

/// Density of an event file's whole window.
pub fn file_density(path: &Path, bins: usize) -> Result<f64> {
    let s = io::read_events(path)?;
    Ok(density(&voxelize(&s, s.t_start, s.t_end, bins)?).get())
}
