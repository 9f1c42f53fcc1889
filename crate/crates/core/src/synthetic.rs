//! Ray-cast RGB-D frames of a textured room, and TUM-format sequences built
//! from them. Used for end-to-end tests and demos without real data.

use std::fmt::Write as _;
use std::path::Path;

use image::{ImageBuffer, Luma, Rgb, RgbImage};
use nalgebra::Vector3;

use crate::dataset::CameraConfig;
use crate::error::Result;
use crate::evaluation::format_tum_line;
use crate::frame_pipeline::{Frame, Intrinsics};
use crate::lie::Pose;

/// Axis-aligned box seen from inside, in camera frame convention (x right,
/// y down, z forward), with a ball near the middle. The default is desk
/// sized: 1.5 m wide, 1 m tall, back wall 1.5 m ahead.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Room {
    pub half_width: f64,
    pub half_height: f64,
    pub near: f64,
    pub far: f64,
    pub ball_center: Vector3<f64>,
    pub ball_radius: f64,
    /// Wavelength multiplier of the surface pattern, meters.
    pub pattern_scale: f64,
}

impl Default for Room {
    fn default() -> Self {
        Self {
            half_width: 0.75,
            half_height: 0.5,
            near: -1.0,
            far: 1.5,
            ball_center: Vector3::new(0.15, 0.1, 0.9),
            ball_radius: 0.2,
            pattern_scale: 0.5,
        }
    }
}

impl Room {
    /// Distance along the unit ray `dir` from `origin` to the first surface.
    fn hit(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        let mut best = f64::INFINITY;
        let walls = [
            (0, -self.half_width),
            (0, self.half_width),
            (1, -self.half_height),
            (1, self.half_height),
            (2, self.near),
            (2, self.far),
        ];
        for (axis, at) in walls {
            if dir[axis].abs() > 1e-12 {
                let t = (at - origin[axis]) / dir[axis];
                if t > 1e-9 && t < best {
                    best = t;
                }
            }
        }
        let oc = origin - self.ball_center;
        let b = oc.dot(dir);
        let c = oc.norm_squared() - self.ball_radius * self.ball_radius;
        let disc = b * b - c;
        if disc >= 0.0 {
            let t = -b - disc.sqrt();
            if t > 1e-9 && t < best {
                best = t;
            }
        }
        best.is_finite().then_some(best)
    }
}

/// Procedural albedo in world coordinates: soft-edged stripes of three
/// wavelengths, one per channel, scaled by `scale`.
pub fn albedo(p: &Vector3<f64>, scale: f64) -> [u8; 3] {
    use std::f64::consts::TAU;
    let stripe = |phase: f64| 0.5 + 0.45 * (3.0 * phase.sin()).tanh();
    let q = p / scale;
    let r = stripe(TAU * (q.x + 0.5 * q.y) / 0.35) * (0.75 + 0.25 * (TAU * q.z / 0.5).cos());
    let g = stripe(TAU * (q.y - 0.3 * q.z) / 0.3);
    let b = stripe(TAU * (q.z + 0.7 * q.x) / 0.4) * (0.75 + 0.25 * (TAU * q.y / 0.6).sin());
    [r, g, b].map(|c| (c * 255.0).round().clamp(0.0, 255.0) as u8)
}

/// Renders color and metric depth (along the optical axis) for a camera at
/// `camera_to_world`.
pub fn render(room: &Room, camera_to_world: &Pose, intrinsics: &Intrinsics, width: u32, height: u32) -> (RgbImage, Vec<f64>) {
    let mut rgb = RgbImage::new(width, height);
    let mut depth = vec![0.0; (width * height) as usize];
    let origin = camera_to_world.translation;
    for v in 0..height {
        for u in 0..width {
            let ray_cam = intrinsics.back_project(u as f64, v as f64, 1.0);
            let dir = (camera_to_world.rotation * ray_cam).normalize();
            if let Some(t) = room.hit(&origin, &dir) {
                let p = origin + dir * t;
                rgb.put_pixel(u, v, Rgb(albedo(&p, room.pattern_scale)));
                depth[(v * width + u) as usize] = t / ray_cam.norm();
            }
        }
    }
    (rgb, depth)
}

pub fn render_frame(
    room: &Room,
    camera_to_world: &Pose,
    intrinsics: &Intrinsics,
    width: u32,
    height: u32,
    timestamp: f64,
) -> Result<Frame> {
    let (rgb, depth) = render(room, camera_to_world, intrinsics, width, height);
    Frame::new(rgb, depth, timestamp, *intrinsics)
}

/// Writes a TUM-layout sequence (`rgb/`, `depth/`, listings, ground truth)
/// plus `camera.cfg` for the given camera poses.
pub fn write_sequence(
    dir: &Path,
    room: &Room,
    camera: &CameraConfig,
    width: u32,
    height: u32,
    poses: &[(f64, Pose)],
) -> Result<()> {
    std::fs::create_dir_all(dir.join("rgb"))?;
    std::fs::create_dir_all(dir.join("depth"))?;
    let mut rgb_list = String::from("# color images\n# timestamp filename\n");
    let mut depth_list = String::from("# depth maps\n# timestamp filename\n");
    let mut gt = String::from("# ground truth trajectory\n# timestamp tx ty tz qx qy qz qw\n");
    for (stamp, pose) in poses {
        let (rgb, depth) = render(room, pose, &camera.intrinsics, width, height);
        let name = format!("{stamp:.6}.png");
        rgb.save(dir.join("rgb").join(&name))?;
        let raw: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_fn(width, height, |u, v| {
            let d = depth[(v * width + u) as usize] * camera.depth_scale;
            Luma([d.round().clamp(0.0, u16::MAX as f64) as u16])
        });
        raw.save(dir.join("depth").join(&name))?;
        let _ = writeln!(rgb_list, "{stamp:.6} rgb/{name}");
        let _ = writeln!(depth_list, "{stamp:.6} depth/{name}");
        let _ = writeln!(gt, "{}", format_tum_line(*stamp, pose));
    }
    std::fs::write(dir.join("rgb.txt"), rgb_list)?;
    std::fs::write(dir.join("depth.txt"), depth_list)?;
    std::fs::write(dir.join("groundtruth.txt"), gt)?;
    std::fs::write(dir.join("camera.cfg"), camera.to_config_string())?;
    Ok(())
}
