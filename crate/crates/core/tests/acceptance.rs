//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line for
//! each and exits non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;

use common::{dense_oracle, metrics_oracle, point_transfer_flow, random_flow, rng, smooth_video};
use evsynth::event::{Event, EventStream, Polarity};
use evsynth::frame::{Frame, FlowField, Grid};
use evsynth::io;
use evsynth::metrics::{evaluate, EvalMode};
use evsynth::pipeline::{run_pipeline, PipelineConfig};
use evsynth::sampler::{plan_schedule, verify_schedule};
use evsynth::scene::{analytic_flow, flow_at, gen_scene, gen_trajectory, CameraIntrinsics, SceneConfig, TrajectoryConfig};
use evsynth::simulator::{log_transform, EventSimulator, LogFrame, SimulatorConfig};
use evsynth::voxel::{density, temporal_kernel, valid_mask, voxelize, VoxelGrid};

type Outcome = Result<String, String>;

const THRESHOLDS: [f64; 3] = [0.1, 0.2, 0.4];

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn videos() -> Vec<Vec<LogFrame>> {
    (0..50)
        .map(|seed| {
            smooth_video(1000 + seed, 16, 16, 20)
                .iter()
                .map(|f| log_transform(f, 0.01))
                .collect()
        })
        .collect()
}

fn simulate(frames: &[LogFrame], c: f64) -> (Vec<Event>, EventSimulator) {
    let mut sim = EventSimulator::new(SimulatorConfig::with_threshold(c), &frames[0]).unwrap();
    let mut events = Vec::new();
    for f in &frames[1..] {
        events.extend(sim.advance(f).unwrap());
    }
    (events, sim)
}

fn oracle_equivalence(videos: &[Vec<LogFrame>]) -> Outcome {
    let start = Instant::now();
    let (mut total, mut count_mismatch, mut worst_dt) = (0usize, 0usize, 0i64);
    for frames in videos {
        for c in THRESHOLDS {
            let (events, _) = simulate(frames, c);
            let (oracle, _) = dense_oracle(frames, c);
            total += events.len();
            let mut mine: BTreeMap<usize, Vec<(i64, bool)>> = BTreeMap::new();
            for e in &events {
                mine.entry(usize::from(e.y) * 16 + usize::from(e.x))
                    .or_default()
                    .push((e.t * 1000, e.p == Polarity::On));
            }
            let mut theirs: BTreeMap<usize, Vec<(i64, bool)>> = BTreeMap::new();
            for e in &oracle {
                theirs.entry(e.pixel).or_default().push((e.t_ns, e.on));
            }
            for px in 0..256 {
                let a = mine.get(&px).map(Vec::as_slice).unwrap_or_default();
                let b = theirs.get(&px).map(Vec::as_slice).unwrap_or_default();
                if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.1 != y.1) {
                    count_mismatch += 1;
                    continue;
                }
                for (x, y) in a.iter().zip(b) {
                    worst_dt = worst_dt.max((x.0 - y.0).abs());
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        count_mismatch == 0 && worst_dt <= 2000 && secs < 60.0,
        format!(
            "{total} events, {count_mismatch} pixel count mismatches, max |dt| {:.3} us, {secs:.1} s",
            worst_dt as f64 / 1000.0
        ),
    )
}

fn residual_invariant(videos: &[Vec<LogFrame>]) -> Outcome {
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for frames in videos {
        for c in THRESHOLDS {
            let (_, sim) = simulate(frames, c);
            let refs = sim.reference_levels();
            for (l, r) in sim.current_levels().as_slice().iter().zip(refs.as_slice()) {
                let res = (l - r).abs();
                worst = worst.max(res / c);
                violations += usize::from(res >= c);
            }
        }
    }
    check(violations == 0, format!("{violations} violations, max |L - L_ref| / C = {worst:.4}"))
}

fn sampling_guarantee() -> Outcome {
    let k = CameraIntrinsics::from_fov(64, 64, 60.0).unwrap();
    let cfg = TrajectoryConfig::default();
    let (mut worst, mut intervals) = (0.0f64, 0usize);
    for seed in 0..100u64 {
        let scene = gen_scene(&SceneConfig::default(), 7000 + seed).unwrap();
        let traj = gen_trajectory(&cfg, &scene, 9000 + seed).map_err(|e| e.to_string())?;
        let s = plan_schedule(&scene, &traj, &k, 0, cfg.duration_us, 1.0).map_err(|e| e.to_string())?;
        intervals += s.intervals();
        worst = worst.max(verify_schedule(&scene, &traj, &k, &s).unwrap());
    }
    check(
        worst <= 1.0 + 1e-3,
        format!("100 trajectories, {intervals} intervals, worst interval displacement {worst:.6} px"),
    )
}

fn voxel_partition() -> Outcome {
    let mut r = rng(11);
    let bins = 5;
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let s = r.random_range(0.0..=(bins - 1) as f64);
        let sum: f64 = (0..bins).map(|b| temporal_kernel(b, s)).sum();
        worst = worst.max((sum - 1.0).abs());
    }
    let mut density_mismatch = 0;
    for _ in 0..200 {
        let (w, h) = (r.random_range(1..20u32), r.random_range(1..20u32));
        let n = r.random_range(0..200);
        let events = (0..n)
            .map(|_| {
                let p = if r.random_bool(0.5) { Polarity::On } else { Polarity::Off };
                Event::new(r.random_range(0..w) as u16, r.random_range(0..h) as u16, r.random_range(0..=1000), p)
            })
            .collect();
        let stream = EventStream::from_unsorted(events, w, h, 0, 1000);
        let g = voxelize(&stream, 0, 1000, bins).unwrap();
        let mask = valid_mask(&g);
        let mean = mask.as_slice().iter().filter(|&&m| m).count() as f64 / mask.as_slice().len() as f64;
        density_mismatch += usize::from(density(&g).get() != mean);
    }
    check(
        worst < 1e-6 && density_mismatch == 0,
        format!("max |sum_b k - 1| = {worst:.2e} over 1e4 draws; density != mean(mask) on {density_mismatch}/200 grids"),
    )
}

fn analytic_flow_check() -> Outcome {
    let k = CameraIntrinsics::from_fov(64, 48, 70.0).unwrap();
    let cfg = TrajectoryConfig::default();
    let mut r = rng(5);
    let (mut worst, mut worst_comp) = (0.0f64, 0.0f64);
    let (mut compared, mut disagreements, mut marginal) = (0usize, 0usize, 0usize);
    for pair in 0..50u64 {
        let scene = gen_scene(&SceneConfig::default(), 300 + pair).unwrap();
        let traj = gen_trajectory(&cfg, &scene, 600 + pair).map_err(|e| e.to_string())?;
        let pi = traj.pose_at(r.random_range(0..=cfg.duration_us)).unwrap();
        let pj = traj.pose_at(r.random_range(0..=cfg.duration_us)).unwrap();
        let flow = analytic_flow(&scene, &pi, &pj, &k);
        for y in 0..k.height {
            for x in 0..k.width {
                let o = point_transfer_flow(&scene, &pi, &pj, &k, x as f64, y as f64);
                let valid = *flow.valid.get(x, y);
                if o.marginal {
                    marginal += 1;
                } else if valid != o.flow.is_some() {
                    disagreements += 1;
                }
                if let (true, Some((u, v))) = (valid, o.flow) {
                    let (fu, fv) = flow.at(x, y);
                    worst = worst.max((fu - u).hypot(fv - v));
                    compared += 1;
                    let (qx, qy) = (x as f64 + fu, y as f64 + fv);
                    if let Some((bu, bv)) = flow_at(&scene, &pj, &pi, &k, qx, qy) {
                        worst_comp = worst_comp.max((qx + bu - x as f64).hypot(qy + bv - y as f64));
                    }
                }
            }
        }
    }
    check(
        worst < 1e-4 && worst_comp < 1e-3 && disagreements == 0 && compared > 0,
        format!(
            "{compared} valid pixels: max error {worst:.2e} px, max fw/bw composition {worst_comp:.2e} px, \
             {disagreements} validity disagreements ({marginal} marginal pixels skipped)"
        ),
    )
}

fn metrics_check() -> Outcome {
    let mut mismatches = 0;
    for seed in 0..1000u64 {
        let mut r = rng(seed);
        let gt = random_flow(&mut r, 8, 8, 10.0);
        let pred = random_flow(&mut r, 8, 8, 10.0);
        let rep = evaluate(&pred, &gt, EvalMode::Dense, None).unwrap();
        let (e, o, n) = metrics_oracle(&pred, &gt, &gt.valid);
        mismatches += usize::from(rep.epe != e || rep.out_pct != o || rep.n_pixels != n);
    }
    let gt = FlowField::new(Grid::filled(8, 8, 0.6), Grid::filled(8, 8, 0.8), Grid::filled(8, 8, true)).unwrap();
    let pred = FlowField::new(gt.u.map(|u| u + 3.0), gt.v.map(|v| v + 4.0), gt.valid.clone()).unwrap();
    let shift = evaluate(&pred, &gt, EvalMode::Dense, None).unwrap();
    let epe = format!("{:.2}", shift.epe);
    check(
        mismatches == 0 && epe == "5.00" && shift.out_pct == 100.0,
        format!("{mismatches}/1000 oracle mismatches; (3,4) shift: EPE {epe}, %Out {:.2}", shift.out_pct),
    )
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn io_check() -> Outcome {
    let p = Path::new("mem");
    let mut failures = Vec::new();
    let mut r = rng(77);
    for _ in 0..100 {
        let (w, h) = (r.random_range(1..64u32), r.random_range(1..64u32));
        let t0 = r.random_range(-1000..1000i64);
        let t1 = t0 + r.random_range(0..100_000);
        let events = (0..r.random_range(0..300))
            .map(|_| {
                let p = if r.random_bool(0.5) { Polarity::On } else { Polarity::Off };
                Event::new(r.random_range(0..w) as u16, r.random_range(0..h) as u16, r.random_range(t0..=t1), p)
            })
            .collect();
        let s = EventStream::from_unsorted(events, w, h, t0, t1);
        let bytes = io::encode_events(&s).unwrap();
        if io::decode_events(&bytes, p).ok().as_ref() != Some(&s) {
            failures.push("events");
        }

        let (fw, fh) = (r.random_range(1..40), r.random_range(1..40));
        let f = random_flow(&mut r, fw, fh, 40.0);
        let (flo, mask) = io::encode_flow(&f);
        if io::decode_flow(&flo, Some(&mask), p).ok().as_ref() != Some(&f) {
            failures.push("flow");
        }

        let frame = Frame::new(Grid::from_fn(fw, fh, |_, _| r.random_range(0..=255u8) as f64 / 255.0), 0);
        let pgm = io::encode_pgm(&frame);
        match io::decode_pgm(&pgm, 0, p) {
            Ok(back) if back == frame && io::encode_pgm(&back) == pgm => {}
            _ => failures.push("pgm"),
        }

        let bins = r.random_range(2..8);
        let values = (0..bins * fw * fh).map(|_| r.random_range(-50.0f32..50.0) as f64).collect();
        let g = VoxelGrid::from_values(bins, fw, fh, 0, 0, values).unwrap();
        if io::decode_voxels(&io::encode_voxels(&g), p).ok().as_ref() != Some(&g) {
            failures.push("vox");
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let cfg = PipelineConfig {
            seed: 2024,
            samples: 3,
            width: 64,
            height: 64,
            out: dir.path().join(name),
            ..PipelineConfig::default()
        };
        run_pipeline(&cfg).map(|_| tree(&cfg.out))
    };
    let (a, b) = (run("a").map_err(|e| e.to_string())?, run("b").map_err(|e| e.to_string())?);
    let identical = a == b;
    check(
        failures.is_empty() && identical,
        format!(
            "400 round trips, {} failures {:?}; two pipeline runs: {} files, byte-identical = {identical}",
            failures.len(),
            failures,
            a.len()
        ),
    )
}

fn throughput(root: &Path) -> Outcome {
    let cfg = PipelineConfig {
        seed: 1,
        samples: 100,
        width: 128,
        height: 128,
        thresholds: THRESHOLDS.to_vec(),
        dt: vec![1, 4],
        out: root.to_path_buf(),
        ..PipelineConfig::default()
    };
    let start = Instant::now();
    let summary = run_pipeline(&cfg).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let findings = io::validate_dataset(root).map_err(|e| e.to_string())?;
    let d: Vec<f64> = summary.mean_density.iter().map(|(_, d)| *d).collect();
    let decreasing = d.windows(2).all(|w| w[1] < w[0]);
    check(
        secs < 600.0 && findings.is_empty() && decreasing,
        format!(
            "{} samples ({} packaged, {} frames) in {secs:.1} s; mean density {d:.4?}; {} validation findings",
            summary.samples,
            summary.packaged,
            summary.frames_rendered,
            findings.len()
        ),
    )
}

fn density_monotonicity(root: &Path) -> Outcome {
    let entries = io::read_manifest(root).map_err(|e| e.to_string())?;
    let samples: std::collections::BTreeSet<u64> = entries.iter().map(|e| e.seed).collect();
    let mut violations = Vec::new();
    let mut windows = 0;
    for e in &entries {
        let d = |rel: &str| -> Result<f64, String> {
            let s = io::read_events(root.join(rel)).map_err(|e| e.to_string())?;
            Ok(density(&voxelize(&s, s.t_start, s.t_end, e.bins).map_err(|e| e.to_string())?).get())
        };
        let mut prev = Vec::new();
        let mut next = Vec::new();
        for c in THRESHOLDS {
            let f = e.events_for(c).ok_or(format!("{}: no C={c}", e.id))?;
            prev.push(d(&f.prev)?);
            next.push(d(&f.next)?);
        }
        for (name, ds) in [("prev", prev), ("next", next)] {
            windows += 1;
            if ds.windows(2).any(|w| w[1] > w[0]) {
                violations.push(format!("{}/{name} {ds:?}", e.id));
            }
        }
    }
    check(
        violations.is_empty() && samples.len() >= 100,
        format!(
            "{} samples, {windows} windows recomputed from files, {} violations {:?}",
            samples.len(),
            violations.len(),
            violations.iter().take(3).collect::<Vec<_>>()
        ),
    )
}

fn main() -> ExitCode {
    let videos = videos();
    let dataset = tempfile::tempdir().unwrap();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("simulator matches dense 1 ns oracle", Box::new(|| oracle_equivalence(&videos))),
        ("residual |L - L_ref| < C", Box::new(|| residual_invariant(&videos))),
        ("sampling guarantee <= 1 px per interval", Box::new(sampling_guarantee)),
        ("voxel partition of unity and density", Box::new(voxel_partition)),
        ("analytic flow vs point transfer", Box::new(analytic_flow_check)),
        ("EPE and %Out vs brute force", Box::new(metrics_check)),
        ("IO round trips and deterministic pipeline", Box::new(io_check)),
        ("throughput 100 samples 128x128", Box::new(|| throughput(dataset.path()))),
        ("density non-increasing in C", Box::new(|| density_monotonicity(dataset.path()))),
    ];
    let mut failed = 0;
    for (name, run) in &criteria {
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(run))
            .unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
