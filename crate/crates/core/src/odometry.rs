//! Sequential frame-to-frame odometry over a stream of clouds or a TUM
//! sequence, with warm starts and a constant-velocity failure policy.

use std::fmt::Write as _;
use std::time::Instant;

use crate::dataset::{associate, load_frame, SequenceIndex};
use crate::error::{Error, Result};
use crate::evaluation::{accumulate, Trajectory};
use crate::frame_pipeline::{frame_to_cloud, SelectionConfig};
use crate::lie::Pose;
use crate::registration::{register, SolverConfig};
use crate::rkhs::ColoredCloud;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OdometryConfig {
    pub solver: SolverConfig,
    pub selection: SelectionConfig,
    /// Stop after this many associated frames.
    pub max_frames: Option<usize>,
}

/// Outcome of registering one frame against its predecessor.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameDiagnostics {
    /// Index of the newer frame among the frames that produced a cloud.
    pub frame: usize,
    pub stamp: f64,
    pub points: usize,
    pub iterations: usize,
    pub final_ell: f64,
    pub objective: f64,
    pub cost: f64,
    pub converged: bool,
    pub tracking_warning: bool,
    /// Registration failed and the previous relative pose was reused.
    pub failed: bool,
    pub wall_time_s: f64,
    pub relative: Pose,
}

pub const DIAGNOSTICS_HEADER: &str =
    "frame,stamp,points,iterations,final_ell,objective,cost,converged,warning,failed,wall_time_s";

pub fn diagnostics_to_csv(rows: &[FrameDiagnostics]) -> String {
    let mut out = format!("{DIAGNOSTICS_HEADER}\n");
    for d in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{:.6}",
            d.frame,
            d.stamp,
            d.points,
            d.iterations,
            d.final_ell,
            d.objective,
            d.cost,
            d.converged as u8,
            d.tracking_warning as u8,
            d.failed as u8,
            d.wall_time_s
        );
    }
    out
}

/// Incremental odometry: feed clouds in time order.
#[derive(Clone, Debug)]
pub struct Odometry {
    solver: SolverConfig,
    previous: Option<ColoredCloud>,
    first_stamp: Option<f64>,
    last_relative: Pose,
    steps: Vec<(f64, Pose)>,
    frames: usize,
}

impl Odometry {
    pub fn new(solver: SolverConfig) -> Result<Self> {
        solver.validate()?;
        Ok(Self {
            solver,
            previous: None,
            first_stamp: None,
            last_relative: Pose::identity(),
            steps: Vec::new(),
            frames: 0,
        })
    }

    /// Registers `cloud` against the previous one, warm-started with the
    /// previous relative pose. Returns `None` for the first frame.
    pub fn push(&mut self, stamp: f64, cloud: ColoredCloud) -> Result<Option<FrameDiagnostics>> {
        let frame = self.frames;
        self.frames += 1;
        let Some(prev) = self.previous.replace(cloud) else {
            self.first_stamp = Some(stamp);
            return Ok(None);
        };
        let current = self.previous.as_ref().expect("just stored");
        let started = Instant::now();
        let diag = match register(&prev, current, &self.solver, &self.last_relative) {
            Ok(r) => FrameDiagnostics {
                frame,
                stamp,
                points: current.len(),
                iterations: r.iterations,
                final_ell: r.final_ell,
                objective: r.final_objective,
                cost: r.final_cost,
                converged: r.converged,
                tracking_warning: r.tracking_warning,
                failed: false,
                wall_time_s: 0.0,
                relative: r.pose,
            },
            Err(Error::RegistrationFailed(_)) => FrameDiagnostics {
                frame,
                stamp,
                points: current.len(),
                iterations: 0,
                final_ell: f64::NAN,
                objective: f64::NAN,
                cost: f64::NAN,
                converged: false,
                tracking_warning: true,
                failed: true,
                wall_time_s: 0.0,
                relative: self.last_relative,
            },
            Err(e) => return Err(e),
        };
        let diag = FrameDiagnostics {
            wall_time_s: started.elapsed().as_secs_f64(),
            ..diag
        };
        self.last_relative = diag.relative;
        self.steps.push((stamp, diag.relative));
        Ok(Some(diag))
    }

    pub fn trajectory(&self) -> Result<Trajectory> {
        match self.first_stamp {
            None => Ok(Trajectory::default()),
            Some(t0) => accumulate(t0, &self.steps),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SequenceRun {
    pub trajectory: Trajectory,
    pub diagnostics: Vec<FrameDiagnostics>,
    /// Frames dropped because too few points survived selection.
    pub skipped_frames: usize,
    pub unmatched_rgb: usize,
}

/// Runs odometry over every associated frame of a sequence in order.
/// `on_frame` sees each diagnostics row as soon as it is available.
pub fn run_sequence(
    index: &SequenceIndex,
    config: &OdometryConfig,
    mut on_frame: impl FnMut(&FrameDiagnostics),
) -> Result<SequenceRun> {
    config.selection.validate()?;
    let association = associate(index);
    let mut odo = Odometry::new(config.solver)?;
    let mut diagnostics = Vec::new();
    let mut skipped_frames = 0;
    let limit = config.max_frames.unwrap_or(usize::MAX);
    for pair in association.pairs.iter().take(limit) {
        let frame = load_frame(index, pair)?;
        let cloud = match frame_to_cloud(&frame, &config.selection) {
            Ok((cloud, _)) => cloud,
            Err(Error::InsufficientPoints { .. }) => {
                skipped_frames += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        if let Some(d) = odo.push(frame.timestamp, cloud)? {
            on_frame(&d);
            diagnostics.push(d);
        }
    }
    Ok(SequenceRun {
        trajectory: odo.trajectory()?,
        diagnostics,
        skipped_frames,
        unmatched_rgb: association.unmatched_rgb,
    })
}
