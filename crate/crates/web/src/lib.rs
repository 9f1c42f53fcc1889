//! WebAssembly bindings for the browser demo: kernel cutoff analysis, the
//! sparsified kernel profile, and registration of a small synthetic scene.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rkhs_odometry::kernels::support_radius;
use rkhs_odometry::sensitivity::{cutoff, g, laurent_approx};
use rkhs_odometry::{register, ColorLabel, ColoredCloud, EllMode, Pose, SolverConfig, Twist};
use wasm_bindgen::prelude::*;

/// `[s_cut, k_cut]` for an expansion order and tolerance.
#[wasm_bindgen(js_name = cutoff)]
pub fn cutoff_js(order: u32, tolerance: f64) -> Result<Vec<f64>, JsError> {
    cutoff_pair(order, tolerance).map_err(|e| JsError::new(&e))
}

pub fn cutoff_pair(order: u32, tolerance: f64) -> Result<Vec<f64>, String> {
    let c = cutoff(order, tolerance).map_err(|e| e.to_string())?;
    Ok(vec![c.s_cut, c.k_cut])
}

/// Interleaved `[s, g(s), expansion(s)]` for `samples` points on `(0, s_max]`.
#[wasm_bindgen(js_name = expansionCurve)]
pub fn expansion_curve(order: u32, s_max: f64, samples: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(3 * samples);
    for i in 1..=samples {
        let s = s_max * i as f64 / samples as f64;
        out.extend([s, g(s), laurent_approx(s, order)]);
    }
    out
}

/// Support radius of the spatial kernel, meters.
#[wasm_bindgen(js_name = supportRadius)]
pub fn support_radius_js(ell: f64, tau: f64) -> f64 {
    support_radius(ell, tau)
}

/// Interleaved `[r, k(r)]` of the unit-variance spatial kernel out to twice
/// the support radius, with `k = 0` where pairs are dropped.
#[wasm_bindgen(js_name = kernelProfile)]
pub fn kernel_profile(ell: f64, tau: f64, samples: usize) -> Vec<f64> {
    let radius = support_radius(ell, tau);
    let mut out = Vec::with_capacity(2 * samples);
    for i in 0..samples {
        let r = 2.0 * radius * i as f64 / (samples - 1).max(1) as f64;
        let k = (-r * r / (2.0 * ell * ell)).exp();
        out.extend([r, if k < tau { 0.0 } else { k }]);
    }
    out
}

/// Box corner with a ball, about 0.5 m across and 1 m ahead, sampled on a
/// fixed grid. Labels vary with position.
pub fn scene(per_face: usize) -> ColoredCloud {
    let side = (per_face as f64).sqrt().ceil() as usize;
    let mut points = Vec::new();
    for i in 0..side {
        for j in 0..side {
            let (a, b) = ((i as f64 + 0.5) / side as f64 * 0.5, (j as f64 + 0.5) / side as f64 * 0.5);
            points.push(Vector3::new(a - 0.25, b - 0.25, 1.0));
            points.push(Vector3::new(-0.25, a - 0.25, 0.75 + b));
            points.push(Vector3::new(a - 0.25, -0.25, 0.75 + b));
        }
    }
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    for k in 0..per_face {
        let y = 1.0 - 2.0 * (k as f64 + 0.5) / per_face as f64;
        let r = (1.0 - y * y).sqrt();
        let th = golden * k as f64;
        points.push(Vector3::new(0.05, 0.05, 0.85) + 0.1 * Vector3::new(r * th.cos(), y, r * th.sin()));
    }
    let labels = points
        .iter()
        .map(|p| {
            ColorLabel([
                0.5 + 0.5 * (6.0 * p.x).sin(),
                0.5 + 0.5 * (6.0 * p.y).cos(),
                0.5 + 0.5 * (6.0 * p.z).sin(),
                0.5 + 0.5 * (9.0 * (p.x + p.y)).sin(),
                0.5,
            ])
        })
        .collect();
    ColoredCloud::new(points, labels).expect("scene labels are in range")
}

/// Outcome of one demo registration.
#[wasm_bindgen]
pub struct Demo {
    translation_error: f64,
    rotation_error_deg: f64,
    iterations: usize,
    converged: bool,
    final_ell: f64,
    ell_trace: Vec<f64>,
    objective_trace: Vec<f64>,
    source: Vec<f64>,
    target: Vec<f64>,
    aligned: Vec<f64>,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(getter, js_name = translationError)]
    pub fn translation_error(&self) -> f64 {
        self.translation_error
    }

    #[wasm_bindgen(getter, js_name = rotationErrorDeg)]
    pub fn rotation_error_deg(&self) -> f64 {
        self.rotation_error_deg
    }

    #[wasm_bindgen(getter)]
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    #[wasm_bindgen(getter)]
    pub fn converged(&self) -> bool {
        self.converged
    }

    #[wasm_bindgen(getter, js_name = finalEll)]
    pub fn final_ell(&self) -> f64 {
        self.final_ell
    }

    /// Length-scale per iteration.
    #[wasm_bindgen(js_name = ellTrace)]
    pub fn ell_trace(&self) -> Vec<f64> {
        self.ell_trace.clone()
    }

    /// Objective per iteration.
    #[wasm_bindgen(js_name = objectiveTrace)]
    pub fn objective_trace(&self) -> Vec<f64> {
        self.objective_trace.clone()
    }

    /// Reference cloud, flattened xyz.
    pub fn source(&self) -> Vec<f64> {
        self.source.clone()
    }

    /// Moved cloud before alignment, flattened xyz.
    pub fn target(&self) -> Vec<f64> {
        self.target.clone()
    }

    /// Moved cloud after alignment, flattened xyz.
    pub fn aligned(&self) -> Vec<f64> {
        self.aligned.clone()
    }
}

/// Moves the scene by a rotation of `angle_deg` about a fixed oblique axis
/// and a translation of `translation_cm`, adds uniform noise of `noise_mm`,
/// and registers it back.
#[wasm_bindgen(js_name = registerDemo)]
pub fn register_demo_js(
    angle_deg: f64,
    translation_cm: f64,
    noise_mm: f64,
    adaptive: bool,
    ell_init: f64,
    seed: u32,
) -> Result<Demo, JsError> {
    register_demo(angle_deg, translation_cm, noise_mm, adaptive, ell_init, seed).map_err(|e| JsError::new(&e))
}

pub fn register_demo(
    angle_deg: f64,
    translation_cm: f64,
    noise_mm: f64,
    adaptive: bool,
    ell_init: f64,
    seed: u32,
) -> Result<Demo, String> {
    let x = scene(150);
    let axis = Vector3::new(1.0, -2.0, 0.5).normalize();
    let dir = Vector3::new(0.6, 0.3, -0.2).normalize();
    let motion = Pose::exp(&Twist::new(axis * angle_deg.to_radians(), Vector3::zeros()));
    let motion = Pose::new(motion.rotation, dir * translation_cm / 100.0);

    let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
    let noise = noise_mm / 1000.0;
    let moved = x
        .points()
        .iter()
        .map(|p| {
            let jitter = if noise > 0.0 {
                Vector3::from_fn(|_, _| rng.random_range(-noise..noise))
            } else {
                Vector3::zeros()
            };
            motion.apply(p) + jitter
        })
        .collect();
    let z = ColoredCloud::new(moved, x.labels().to_vec()).map_err(|e| e.to_string())?;

    let mut config = SolverConfig {
        mode: if adaptive { EllMode::Adaptive } else { EllMode::Fixed },
        ell_init,
        ..SolverConfig::default()
    };
    config.ell_max = config.ell_max.max(ell_init);
    config.ell_min = config.ell_min.min(0.5 * ell_init);
    let r = register(&x, &z, &config, &Pose::identity()).map_err(|e| e.to_string())?;
    let err = r.pose.compose(&motion);
    let flat = |c: &ColoredCloud| c.points().iter().flat_map(|p| [p.x, p.y, p.z]).collect::<Vec<f64>>();
    Ok(Demo {
        translation_error: err.translation.norm(),
        rotation_error_deg: err.angle().to_degrees(),
        iterations: r.iterations,
        converged: r.converged,
        final_ell: r.final_ell,
        ell_trace: r.trace.iter().map(|t| t.ell).collect(),
        objective_trace: r.trace.iter().map(|t| t.objective).collect(),
        source: flat(&x),
        target: flat(&z),
        aligned: flat(&z.transformed(&r.pose)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_anchor() {
        let c = cutoff_pair(6, 1e-3).unwrap();
        assert!((c[1] - 0.6694).abs() < 5e-3);
        assert!(cutoff_pair(3, 1e-3).is_err());
    }

    #[test]
    fn curve_converges_at_large_s() {
        let c = expansion_curve(6, 10.0, 50);
        assert_eq!(c.len(), 150);
        let last = &c[147..];
        assert_eq!(last[0], 10.0);
        assert!((last[1] - last[2]).abs() < 1e-9);
    }

    #[test]
    fn profile_drops_beyond_support() {
        let (ell, tau) = (0.1, 8.315e-3);
        let radius = support_radius_js(ell, tau);
        let p = kernel_profile(ell, tau, 101);
        assert_eq!(p[1], 1.0);
        for pair in p.chunks(2) {
            assert_eq!(pair[1] == 0.0, pair[0] > radius * (1.0 + 1e-12), "{pair:?}");
        }
    }

    #[test]
    fn scene_is_deterministic_and_sized() {
        let a = scene(150);
        assert_eq!(a.len(), 3 * 13 * 13 + 150);
        assert_eq!(a, scene(150));
    }

    #[test]
    fn demo_recovers_motion() {
        let d = register_demo(5.0, 5.0, 0.0, true, 0.1, 1).unwrap();
        assert!(d.converged());
        assert!(d.translation_error() < 1e-3, "{}", d.translation_error());
        assert!(d.rotation_error_deg() < 0.1);
        assert_eq!(d.ell_trace().len(), d.iterations());
        assert_eq!(d.aligned().len(), d.source().len());
    }

    #[test]
    fn fixed_mode_keeps_ell() {
        let d = register_demo(3.0, 2.0, 1.0, false, 0.08, 7).unwrap();
        assert!(d.ell_trace().iter().all(|&l| l == 0.08));
    }
}
