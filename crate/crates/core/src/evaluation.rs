//! Trajectories and relative pose error (RPE) in the TUM benchmark's
//! drift-per-second form.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Quaternion, Rotation3, UnitQuaternion, Vector3};

use crate::error::{Error, Result};
use crate::lie::Pose;

/// Default timestamp association tolerance, seconds.
pub const ASSOCIATION_TOLERANCE: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StampedPose {
    pub stamp: f64,
    pub pose: Pose,
}

/// Time-ordered poses in a world frame.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub entries: Vec<StampedPose>,
}

impl Trajectory {
    pub fn new(entries: Vec<StampedPose>) -> Result<Self> {
        if let Some(w) = entries.windows(2).find(|w| w[1].stamp <= w[0].stamp) {
            return Err(Error::InvalidParameter(format!(
                "trajectory timestamps must increase ({} then {})",
                w[0].stamp, w[1].stamp
            )));
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn stamps(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.stamp)
    }

    pub fn push(&mut self, stamp: f64, pose: Pose) {
        self.entries.push(StampedPose { stamp, pose });
    }

    /// Left-multiplies every pose by `g`.
    pub fn transformed(&self, g: &Pose) -> Trajectory {
        Trajectory {
            entries: self
                .entries
                .iter()
                .map(|e| StampedPose {
                    stamp: e.stamp,
                    pose: g.compose(&e.pose),
                })
                .collect(),
        }
    }

    /// Index of the entry whose stamp is closest to `t`.
    fn closest(&self, t: f64) -> Option<usize> {
        if self.entries.is_empty() {
            return None;
        }
        let idx = self.entries.partition_point(|e| e.stamp < t);
        let candidates = [idx.checked_sub(1), (idx < self.entries.len()).then_some(idx)];
        candidates
            .into_iter()
            .flatten()
            .min_by(|&a, &b| {
                (self.entries[a].stamp - t)
                    .abs()
                    .total_cmp(&(self.entries[b].stamp - t).abs())
            })
    }
}

/// Chains frame-to-frame motions into a trajectory starting at identity:
/// `P_0 = I`, `P_{k+1} = P_k ∘ h_k`, where `h_k` maps frame `k+1`
/// coordinates into frame `k`.
pub fn accumulate(first_stamp: f64, steps: &[(f64, Pose)]) -> Result<Trajectory> {
    let mut entries = Vec::with_capacity(steps.len() + 1);
    let mut pose = Pose::identity();
    entries.push(StampedPose {
        stamp: first_stamp,
        pose,
    });
    for (stamp, h) in steps {
        pose = pose.compose(h);
        entries.push(StampedPose { stamp: *stamp, pose });
    }
    Trajectory::new(entries)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RpeResidual {
    pub t0: f64,
    pub t1: f64,
    /// Translational drift, m/s.
    pub trans: f64,
    /// Rotational drift, deg/s.
    pub rot: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RpeResult {
    /// Translational RMSE, m/s.
    pub trans_rmse: f64,
    /// Rotational RMSE, deg/s.
    pub rot_rmse: f64,
    pub residuals: Vec<RpeResidual>,
}

fn rmse(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Relative pose error over intervals of `delta` seconds.
///
/// For every estimated stamp `t` whose partner near `t + delta` exists in the
/// estimate, and whose two endpoints both associate with reference stamps
/// within [`ASSOCIATION_TOLERANCE`], the error transform is
/// `E = (Q_t^-1 Q_{t+delta})^-1 (P_t^-1 P_{t+delta})`.
pub fn rpe(estimated: &Trajectory, reference: &Trajectory, delta: f64) -> Result<RpeResult> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    let tol = ASSOCIATION_TOLERANCE;
    let mut residuals = Vec::new();
    for (i, e0) in estimated.entries.iter().enumerate() {
        let Some(j) = estimated.closest(e0.stamp + delta) else { continue };
        let e1 = &estimated.entries[j];
        if j == i || (e1.stamp - (e0.stamp + delta)).abs() > tol {
            continue;
        }
        let (Some(g0), Some(g1)) = (reference.closest(e0.stamp), reference.closest(e1.stamp)) else {
            continue;
        };
        let (q0, q1) = (&reference.entries[g0], &reference.entries[g1]);
        if (q0.stamp - e0.stamp).abs() > tol || (q1.stamp - e1.stamp).abs() > tol {
            continue;
        }
        let est_rel = e0.pose.inverse().compose(&e1.pose);
        let ref_rel = q0.pose.inverse().compose(&q1.pose);
        let err = ref_rel.inverse().compose(&est_rel);
        residuals.push(RpeResidual {
            t0: e0.stamp,
            t1: e1.stamp,
            trans: err.translation.norm() / delta,
            rot: err.angle().to_degrees() / delta,
        });
    }
    if residuals.len() < 2 {
        return Err(Error::NoOverlap {
            intervals: residuals.len(),
        });
    }
    Ok(RpeResult {
        trans_rmse: rmse(residuals.iter().map(|r| r.trans)),
        rot_rmse: rmse(residuals.iter().map(|r| r.rot)),
        residuals,
    })
}

/// Rotation as a unit quaternion `(qx, qy, qz, qw)` with `qw >= 0`.
pub fn pose_to_quaternion(pose: &Pose) -> [f64; 4] {
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(pose.rotation));
    let s = if q.w < 0.0 { -1.0 } else { 1.0 };
    // Adding 0.0 folds negative zero into positive zero.
    [s * q.i + 0.0, s * q.j + 0.0, s * q.k + 0.0, s * q.w + 0.0]
}

pub fn pose_from_tum(t: [f64; 3], q: [f64; 4]) -> Result<Pose> {
    let [qx, qy, qz, qw] = q;
    let raw = Quaternion::new(qw, qx, qy, qz);
    if !(raw.norm() > 1e-9) || !raw.coords.iter().all(|c| c.is_finite()) {
        return Err(Error::InvalidParameter(format!("degenerate quaternion {q:?}")));
    }
    let unit = UnitQuaternion::from_quaternion(raw);
    Ok(Pose::new(
        unit.to_rotation_matrix().into_inner(),
        Vector3::new(t[0], t[1], t[2]),
    ))
}

/// One `timestamp tx ty tz qx qy qz qw` line, without newline.
pub fn format_tum_line(stamp: f64, pose: &Pose) -> String {
    let t = pose.translation;
    let [qx, qy, qz, qw] = pose_to_quaternion(pose);
    format!(
        "{} {} {} {} {} {} {} {}",
        stamp,
        t.x + 0.0,
        t.y + 0.0,
        t.z + 0.0,
        qx,
        qy,
        qz,
        qw
    )
}

pub fn format_trajectory(traj: &Trajectory) -> String {
    let mut out = String::from("# timestamp tx ty tz qx qy qz qw\n");
    for e in &traj.entries {
        out.push_str(&format_tum_line(e.stamp, &e.pose));
        out.push('\n');
    }
    out
}

pub fn write_trajectory(traj: &Trajectory, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_trajectory(traj))?;
    Ok(())
}

/// Parses `timestamp tx ty tz qx qy qz qw` rows; `#` lines and blank lines
/// are skipped. `path` is only used in error messages.
pub fn parse_trajectory(text: &str, path: &Path) -> Result<Trajectory> {
    let mut entries: Vec<StampedPose> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            message,
        };
        let fields: Vec<f64> = line
            .split_whitespace()
            .map(|f| f.parse::<f64>().map_err(|e| parse_err(format!("{f:?}: {e}"))))
            .collect::<Result<_>>()?;
        if fields.len() != 8 {
            return Err(parse_err(format!("expected 8 fields, found {}", fields.len())));
        }
        let pose = pose_from_tum([fields[1], fields[2], fields[3]], [fields[4], fields[5], fields[6], fields[7]])
            .map_err(|e| parse_err(e.to_string()))?;
        if let Some(prev) = entries.last() {
            if fields[0] <= prev.stamp {
                return Err(parse_err(format!(
                    "timestamp {} does not increase (previous {})",
                    fields[0], prev.stamp
                )));
            }
        }
        entries.push(StampedPose {
            stamp: fields[0],
            pose,
        });
    }
    Ok(Trajectory { entries })
}

pub fn read_trajectory(path: impl AsRef<Path>) -> Result<Trajectory> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    parse_trajectory(&text, path)
}

/// CSV dump of per-interval residuals.
pub fn residuals_to_csv(result: &RpeResult) -> String {
    let mut out = String::from("t0,t1,trans_m_per_s,rot_deg_per_s\n");
    for r in &result.residuals {
        let _ = writeln!(out, "{},{},{},{}", r.t0, r.t1, r.trans, r.rot);
    }
    out
}
