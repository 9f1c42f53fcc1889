#![allow(dead_code)]

use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rkhs_odometry::{ColorLabel, ColoredCloud, Pose, Twist};

/// Box corner (floor and two walls) plus a ball, ~0.5 m across, about 1 m in
/// front of the origin. Labels vary smoothly with position.
pub fn structured_cloud(rng: &mut ChaCha8Rng, n: usize) -> ColoredCloud {
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for k in 0..n {
        let (a, b): (f64, f64) = (rng.random_range(0.0..0.5), rng.random_range(0.0..0.5));
        let p = match k % 4 {
            0 => Vector3::new(a - 0.25, b - 0.25, 1.0),
            1 => Vector3::new(-0.25, a - 0.25, 0.75 + b),
            2 => Vector3::new(a - 0.25, -0.25, 0.75 + b),
            _ => {
                let (th, ph) = (a * 12.0, b * 6.0);
                Vector3::new(
                    0.05 + 0.1 * th.cos() * ph.sin(),
                    0.05 + 0.1 * th.sin() * ph.sin(),
                    0.85 + 0.1 * ph.cos(),
                )
            }
        };
        points.push(p);
        labels.push(ColorLabel([
            0.5 + 0.5 * (6.0 * p.x).sin(),
            0.5 + 0.5 * (6.0 * p.y).cos(),
            0.5 + 0.5 * (6.0 * p.z).sin(),
            (k % 4) as f64 / 3.0,
            0.5,
        ]));
    }
    ColoredCloud::new(points, labels).unwrap()
}

/// Uniform points in a cube of side `extent` centered at (0, 0, 1).
pub fn random_cloud(rng: &mut ChaCha8Rng, n: usize, extent: f64) -> ColoredCloud {
    let points = (0..n)
        .map(|_| {
            Vector3::new(
                rng.random_range(-0.5..0.5) * extent,
                rng.random_range(-0.5..0.5) * extent,
                1.0 + rng.random_range(-0.5..0.5) * extent,
            )
        })
        .collect();
    let labels = (0..n)
        .map(|_| ColorLabel(std::array::from_fn(|_| rng.random_range(0.0..1.0))))
        .collect();
    ColoredCloud::new(points, labels).unwrap()
}

pub fn unit_vector(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Rotation by at most `max_angle` radians about a random axis, translation
/// of at most `max_translation` in a random direction.
pub fn random_pose(rng: &mut ChaCha8Rng, max_angle: f64, max_translation: f64) -> Pose {
    let r = Pose::exp(&Twist::new(unit_vector(rng) * rng.random_range(0.0..max_angle), Vector3::zeros()));
    Pose::new(r.rotation, unit_vector(rng) * rng.random_range(0.0..max_translation))
}

pub fn jittered(cloud: &ColoredCloud, rng: &mut ChaCha8Rng, noise: f64) -> ColoredCloud {
    let points = cloud
        .points()
        .iter()
        .map(|p| p + Vector3::new(rng.random_range(-noise..noise), rng.random_range(-noise..noise), rng.random_range(-noise..noise)))
        .collect();
    ColoredCloud::new(points, cloud.labels().to_vec()).unwrap()
}
