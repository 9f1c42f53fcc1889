//! Squared-exponential spatial and color kernels, and the sparsification
//! radius that bounds which point pairs interact.

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Number of components in a color label: H, S, V and two intensity
/// gradient magnitudes.
pub const LABEL_DIM: usize = 5;

/// Per-point appearance label, every component in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ColorLabel(pub [f64; LABEL_DIM]);

impl ColorLabel {
    pub fn new(values: [f64; LABEL_DIM]) -> Self {
        Self(values)
    }

    pub fn distance_squared(&self, other: &ColorLabel) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn is_normalized(&self) -> bool {
        self.0.iter().all(|c| (0.0..=1.0).contains(c))
    }
}

/// Hyperparameters of the spatial and color kernels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelParams {
    /// Spatial kernel signal standard deviation.
    pub sigma: f64,
    /// Spatial length-scale, meters.
    pub ell: f64,
    /// Color kernel signal standard deviation.
    pub sigma_c: f64,
    /// Color length-scale in label units.
    pub ell_c: f64,
    /// Pairs whose unit-variance spatial kernel value falls below this are
    /// dropped.
    pub tau: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        Self {
            sigma: 0.1,
            ell: 0.1,
            sigma_c: 1.0,
            ell_c: 0.1,
            tau: 8.315e-3,
        }
    }
}

impl KernelParams {
    pub fn with_ell(self, ell: f64) -> Self {
        Self { ell, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sigma", self.sigma),
            ("ell", self.ell),
            ("sigma_c", self.sigma_c),
            ("ell_c", self.ell_c),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {value}")));
            }
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "tau must lie in (0, 1), got {}",
                self.tau
            )));
        }
        Ok(())
    }

    pub fn support_radius(&self) -> f64 {
        support_radius(self.ell, self.tau)
    }

    #[inline]
    pub fn spatial(&self, x: &Vector3<f64>, z: &Vector3<f64>) -> f64 {
        spatial_kernel(x, z, self.sigma, self.ell)
    }

    #[inline]
    pub fn color(&self, a: &ColorLabel, b: &ColorLabel) -> f64 {
        color_kernel(a, b, self.sigma_c, self.ell_c)
    }
}

/// `sigma^2 exp(-|x - z|^2 / (2 ell^2))`.
#[inline]
pub fn spatial_kernel(x: &Vector3<f64>, z: &Vector3<f64>, sigma: f64, ell: f64) -> f64 {
    se_kernel_from_sq_dist((x - z).norm_squared(), sigma, ell)
}

#[inline]
pub(crate) fn se_kernel_from_sq_dist(d2: f64, sigma: f64, ell: f64) -> f64 {
    sigma * sigma * (-d2 / (2.0 * ell * ell)).exp()
}

/// Squared-exponential kernel on the 5-dimensional label space.
#[inline]
pub fn color_kernel(a: &ColorLabel, b: &ColorLabel, sigma_c: f64, ell_c: f64) -> f64 {
    se_kernel_from_sq_dist(a.distance_squared(b), sigma_c, ell_c)
}

/// Distance at which `exp(-r^2 / (2 ell^2)) == tau`.
pub fn support_radius(ell: f64, tau: f64) -> f64 {
    ell * (-2.0 * tau.ln()).sqrt()
}

/// Squared support radius, the quantity compared against when pairing.
#[inline]
pub(crate) fn support_radius_squared(ell: f64, tau: f64) -> f64 {
    -2.0 * ell * ell * tau.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::{Pose, Twist};
    use proptest::prelude::*;

    fn vec3() -> impl Strategy<Value = Vector3<f64>> {
        (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b, c)| Vector3::new(a, b, c))
    }

    fn label() -> impl Strategy<Value = ColorLabel> {
        prop::array::uniform5(0.0..=1.0f64).prop_map(ColorLabel)
    }

    #[test]
    fn spatial_kernel_values() {
        let x = Vector3::new(0.3, -0.1, 1.2);
        assert_eq!(spatial_kernel(&x, &x, 0.1, 0.1), 0.1 * 0.1);
        let z = x + Vector3::new(0.0, 0.1, 0.0);
        let k = spatial_kernel(&x, &z, 0.1, 0.1);
        assert!((k - 6.065306597126334e-3).abs() < 1e-15, "{k}");
    }

    #[test]
    fn color_kernel_values() {
        let a = ColorLabel([0.2, 0.4, 0.6, 0.1, 0.0]);
        assert_eq!(color_kernel(&a, &a, 1.0, 0.1), 1.0);
        let mut b = a;
        b.0[2] += 0.1;
        let k = color_kernel(&a, &b, 1.0, 0.1);
        assert!((k - 0.6065306597126334).abs() < 1e-12, "{k}");
    }

    #[test]
    fn support_radius_values() {
        assert!((support_radius(0.25, (-0.5f64).exp()) - 0.25).abs() < 1e-15);
        let r = support_radius(0.1, 8.315e-3);
        // sqrt(-2 ln 8.315e-3) = 3.0950...
        assert!((r - 0.309507).abs() < 1e-5, "{r}");
        assert!(support_radius(0.1, 1.0 - 1e-12) < 1e-6);
    }

    #[test]
    fn rejects_bad_params() {
        let p = KernelParams { tau: 1.0, ..Default::default() };
        assert!(p.validate().is_err());
        let p = KernelParams { ell: 0.0, ..Default::default() };
        assert!(p.validate().is_err());
        assert!(KernelParams::default().validate().is_ok());
    }

    proptest! {
        #[test]
        fn spatial_kernel_symmetric_and_bounded(x in vec3(), z in vec3(), ell in 0.01..1.0f64) {
            let a = spatial_kernel(&x, &z, 0.1, ell);
            prop_assert_eq!(a, spatial_kernel(&z, &x, 0.1, ell));
            prop_assert!((0.0..=0.01).contains(&a));
        }

        #[test]
        fn spatial_kernel_is_rigid_invariant(x in vec3(), z in vec3(), w in vec3(), t in vec3()) {
            let h = Pose::exp(&Twist::new(w, t));
            let a = spatial_kernel(&x, &z, 0.1, 0.5);
            let b = spatial_kernel(&h.apply(&x), &h.apply(&z), 0.1, 0.5);
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn color_kernel_monotone(a in label(), b in label(), c in label()) {
            let (kb, kc) = (color_kernel(&a, &b, 1.0, 0.1), color_kernel(&a, &c, 1.0, 0.1));
            if a.distance_squared(&b) < a.distance_squared(&c) {
                prop_assert!(kb >= kc);
            }
            prop_assert!(kb > 0.0 || a.distance_squared(&b) > 1.0);
            prop_assert!(kb <= 1.0);
        }

        #[test]
        fn support_radius_inverts_kernel(ell in 0.01..0.5f64, tau in 1e-6..0.99f64) {
            let r = support_radius(ell, tau);
            let x = Vector3::zeros();
            let z = Vector3::new(r, 0.0, 0.0);
            let k = spatial_kernel(&x, &z, 0.1, ell);
            prop_assert!((k - 0.01 * tau).abs() < 1e-12);
        }
    }
}
