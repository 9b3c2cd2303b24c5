//! Rendered event-camera data engine.
//!
//! Planar scenes are rendered along smooth camera paths at an adaptively
//! chosen frame rate, converted into contrast-threshold events at several
//! thresholds, encoded as temporal voxel grids, and packaged together with
//! exact optical-flow labels. Flow predictions can then be scored with
//! end-point error and outlier rate.

pub mod error;
pub mod event;
pub mod frame;
pub mod io;
pub mod metrics;
mod par;
pub mod pipeline;
pub mod pose;
pub mod sampler;
pub mod scene;
pub mod simulator;
pub mod voxel;

pub use error::{Error, Result};
pub use event::{slice_by_time, validate_stream, Event, EventStream, Polarity, Violation};
pub use frame::{Frame, FlowField, Grid, Mask};
pub use metrics::{evaluate, EvalMode, EvalReport};
pub use pose::{Pose, Trajectory};
pub use sampler::{plan_schedule, SampleSchedule};
pub use simulator::{generate_events, EventSimulator, SimulatorConfig};
pub use voxel::{density, voxelize, VoxelGrid};
