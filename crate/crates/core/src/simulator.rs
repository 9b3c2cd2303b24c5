//! Contrast-threshold event generation from a frame sequence.
//!
//! Between consecutive frames each pixel's log intensity is interpolated
//! linearly in time. An event fires whenever the interpolated value moves a
//! full threshold away from the pixel's reference level; its timestamp is
//! the exact crossing time of that linear segment, and the reference level
//! then steps by one threshold in the direction of the change.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{Event, EventStream, Polarity};
use crate::frame::{Frame, Grid};
use crate::sampler::SampleSchedule;

pub const DEFAULT_LOG_FLOOR: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulatorConfig {
    /// ON threshold `C` in log-intensity units.
    pub threshold: f64,
    /// OFF threshold; `None` means ON and OFF share `threshold`.
    pub off_threshold: Option<f64>,
    pub log_floor: f64,
    /// Crossings closer than this to the previous event at a pixel are
    /// consumed without emitting. Zero disables.
    pub refractory_us: i64,
    /// Relative standard deviation of per-pixel thresholds. Zero disables.
    pub threshold_sigma: f64,
    pub noise_seed: u64,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        Self {
            threshold: 0.2,
            off_threshold: None,
            log_floor: DEFAULT_LOG_FLOOR,
            refractory_us: 0,
            threshold_sigma: 0.0,
            noise_seed: 0,
        }
    }
}

impl SimulatorConfig {
    pub fn with_threshold(threshold: f64) -> Self {
        Self {
            threshold,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let off = self.off_threshold.unwrap_or(self.threshold);
        if !(self.threshold > 0.0 && off > 0.0 && self.threshold.is_finite() && off.is_finite()) {
            return Err(Error::Config(format!(
                "thresholds must be positive, got ON {} / OFF {off}",
                self.threshold
            )));
        }
        if !(self.log_floor > 0.0) {
            return Err(Error::Config(format!("log_floor must be positive, got {}", self.log_floor)));
        }
        if self.refractory_us < 0 || !(self.threshold_sigma >= 0.0) {
            return Err(Error::Config("refractory period and threshold sigma must be non-negative".into()));
        }
        Ok(())
    }
}

/// Per-pixel `ln(I + log_floor)` at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogFrame {
    pub values: Grid<f64>,
    pub t: i64,
}

pub fn log_transform(frame: &Frame, log_floor: f64) -> LogFrame {
    LogFrame {
        values: frame.intensities.map(|&i| (i + log_floor).ln()),
        t: frame.t,
    }
}

/// Trigger state of every pixel. Reference levels are kept as the first
/// frame's level plus whole threshold steps so they never drift.
#[derive(Clone, Debug)]
pub struct PixelTriggerState {
    base: Vec<f64>,
    on_steps: Vec<i64>,
    off_steps: Vec<i64>,
    /// Time of the last emitted event, `i64::MIN` before the first.
    last_event: Vec<i64>,
}

/// Streaming simulator: feed frames in time order with [`advance`].
///
/// [`advance`]: EventSimulator::advance
#[derive(Clone, Debug)]
pub struct EventSimulator {
    cfg: SimulatorConfig,
    width: usize,
    height: usize,
    thresholds: Vec<(f64, f64)>,
    state: PixelTriggerState,
    current: LogFrame,
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

impl EventSimulator {
    /// Reference levels start at `first`; no events are emitted for it.
    pub fn new(cfg: SimulatorConfig, first: &LogFrame) -> Result<Self> {
        cfg.validate()?;
        let n = first.values.as_slice().len();
        if first.values.width() > usize::from(u16::MAX) || first.values.height() > usize::from(u16::MAX) {
            return Err(Error::Config("sensor dimensions exceed 65535".into()));
        }
        let on = cfg.threshold;
        let off = cfg.off_threshold.unwrap_or(on);
        let thresholds = if cfg.threshold_sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.noise_seed);
            let floor = 0.01 * on.min(off);
            (0..n)
                .map(|_| {
                    let a = (on * (1.0 + cfg.threshold_sigma * gaussian(&mut rng))).max(floor);
                    let b = (off * (1.0 + cfg.threshold_sigma * gaussian(&mut rng))).max(floor);
                    (a, b)
                })
                .collect()
        } else {
            vec![(on, off); n]
        };
        Ok(Self {
            cfg,
            width: first.values.width(),
            height: first.values.height(),
            thresholds,
            state: PixelTriggerState {
                base: first.values.as_slice().to_vec(),
                on_steps: vec![0; n],
                off_steps: vec![0; n],
                last_event: vec![i64::MIN; n],
            },
            current: first.clone(),
        })
    }

    pub fn config(&self) -> &SimulatorConfig {
        &self.cfg
    }

    pub fn time(&self) -> i64 {
        self.current.t
    }

    fn reference_at(&self, i: usize) -> f64 {
        let (on, off) = self.thresholds[i];
        let s = &self.state;
        s.base[i] + s.on_steps[i] as f64 * on - s.off_steps[i] as f64 * off
    }

    /// Current reference level per pixel.
    pub fn reference_levels(&self) -> Grid<f64> {
        let data = (0..self.width * self.height).map(|i| self.reference_at(i)).collect();
        Grid::from_vec(self.width, self.height, data).expect("state matches sensor shape")
    }

    /// Log intensity of the most recent frame.
    pub fn current_levels(&self) -> &Grid<f64> {
        &self.current.values
    }

    /// Per-pixel `(ON, OFF)` thresholds in use.
    pub fn pixel_thresholds(&self) -> &[(f64, f64)] {
        &self.thresholds
    }

    /// Consumes the next frame and returns the events fired since the
    /// previous one, in repo order.
    pub fn advance(&mut self, next: &LogFrame) -> Result<Vec<Event>> {
        if next.values.shape() != self.current.values.shape() {
            return Err(Error::Shape {
                expected: self.current.values.shape(),
                actual: next.values.shape(),
            });
        }
        let (t0, t1) = (self.current.t, next.t);
        if t1 <= t0 {
            return Err(Error::InvalidWindow { start: t0, end: t1 });
        }
        let span = (t1 - t0) as f64;
        let refractory = self.cfg.refractory_us;
        let mut events = Vec::new();
        let prev = self.current.values.as_slice();
        let curr = next.values.as_slice();
        for i in 0..prev.len() {
            let (l0, l1) = (prev[i], curr[i]);
            let (on, off) = self.thresholds[i];
            loop {
                let reference = self.reference_at(i);
                let (level, p) = if l1 - reference >= on {
                    (reference + on, Polarity::On)
                } else if reference - l1 >= off {
                    (reference - off, Polarity::Off)
                } else {
                    break;
                };
                match p {
                    Polarity::On => self.state.on_steps[i] += 1,
                    Polarity::Off => self.state.off_steps[i] += 1,
                }
                let frac = ((level - l0) / (l1 - l0)).clamp(0.0, 1.0);
                let t = (t0 + (frac * span).round() as i64).clamp(t0, t1);
                let last = self.state.last_event[i];
                if refractory > 0 && last != i64::MIN && t - last < refractory {
                    continue;
                }
                self.state.last_event[i] = t;
                let (x, y) = (i % self.width, i / self.width);
                events.push(Event::new(x as u16, y as u16, t, p));
            }
        }
        events.sort_unstable();
        self.current = next.clone();
        Ok(events)
    }
}

fn check_alignment(log_frames: &[LogFrame], schedule: &SampleSchedule) -> Result<()> {
    if log_frames.len() != schedule.times.len() || log_frames.is_empty() {
        return Err(Error::Alignment {
            frames: log_frames.len(),
            times: schedule.times.len(),
        });
    }
    if log_frames.iter().zip(&schedule.times).any(|(f, &t)| f.t != t) {
        return Err(Error::Alignment {
            frames: log_frames.len(),
            times: schedule.times.len(),
        });
    }
    Ok(())
}

/// Runs one simulator over a whole aligned frame sequence.
pub fn generate_events(
    log_frames: &[LogFrame],
    schedule: &SampleSchedule,
    cfg: &SimulatorConfig,
) -> Result<EventStream> {
    check_alignment(log_frames, schedule)?;
    let first = &log_frames[0];
    let mut sim = EventSimulator::new(cfg.clone(), first)?;
    let mut events = Vec::new();
    for f in &log_frames[1..] {
        events.extend(sim.advance(f)?);
    }
    // Per-interval batches are sorted and time-disjoint except at shared
    // frame times, so a final stable pass restores full order cheaply.
    events.sort();
    Ok(EventStream {
        events,
        width: first.values.width() as u32,
        height: first.values.height() as u32,
        t_start: schedule.start(),
        t_end: schedule.end(),
    })
}

/// One independent run per threshold over the same frames, in input order.
pub fn multi_density(
    log_frames: &[LogFrame],
    schedule: &SampleSchedule,
    thresholds: &[f64],
    base: &SimulatorConfig,
) -> Result<Vec<(f64, EventStream)>> {
    validate_thresholds(thresholds)?;
    thresholds
        .iter()
        .map(|&c| {
            let cfg = SimulatorConfig {
                threshold: c,
                ..base.clone()
            };
            generate_events(log_frames, schedule, &cfg).map(|s| (c, s))
        })
        .collect()
}

pub fn validate_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty() {
        return Err(Error::Config("threshold list is empty".into()));
    }
    if let Some(c) = thresholds.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
        return Err(Error::Config(format!("thresholds must be positive, got {c}")));
    }
    for (i, a) in thresholds.iter().enumerate() {
        if thresholds[..i].contains(a) {
            return Err(Error::Config(format!("duplicate threshold {a}")));
        }
    }
    Ok(())
}
