//! Online length-scale learning.
//!
//! After each pose step the spatial length-scale takes one gradient-descent
//! step on `J(ell) = |f_X - h.f_Z|^2`, is kept inside `[ell_min, ceiling]`,
//! and whenever the candidate reaches the ceiling both are shrunk by
//! `lambda_ell`.

use crate::error::Result;
use crate::kernels::KernelParams;
use crate::lie::Pose;
use crate::registration::SolverConfig;
use crate::rkhs::{build_pairs, ColoredCloud, PairSet};

/// `|dJ/d ell|` below this counts as a weak gradient.
pub const WEAK_GRADIENT: f64 = 1e-12;

/// Consecutive weak gradients that trigger one forced reduction.
pub const WEAK_GRADIENT_PATIENCE: u32 = 3;

/// Length-scale state carried through one registration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EllState {
    pub ell: f64,
    /// Mutable ceiling; starts at `ell_max` and only ever shrinks.
    pub ell_max_current: f64,
    /// `ell` was clamped at `ell_min` during this registration.
    pub pinned_low: bool,
    /// Number of consecutive weak gradients seen.
    pub weak_streak: u32,
    /// The weak-gradient fallback fired at least once.
    pub warning: bool,
}

impl EllState {
    pub fn new(config: &SolverConfig) -> Self {
        Self {
            ell: config.ell_init,
            ell_max_current: config.ell_max,
            pinned_low: false,
            weak_streak: 0,
            warning: false,
        }
    }

    fn reduce(&mut self, ell_candidate: f64, config: &SolverConfig) -> f64 {
        self.ell_max_current = (config.lambda_ell * self.ell_max_current).max(config.ell_min);
        config.lambda_ell * ell_candidate
    }

    fn clamp(&mut self, ell_candidate: f64, config: &SolverConfig) {
        if ell_candidate <= config.ell_min {
            self.ell = config.ell_min;
            self.pinned_low = true;
        } else {
            self.ell = ell_candidate.min(self.ell_max_current);
        }
    }
}

/// One length-scale update: `ell' = ell - gamma * grad`, shrink `ell'` and
/// the ceiling by `lambda` when `ell'` reaches the ceiling, then clamp.
///
/// A run of [`WEAK_GRADIENT_PATIENCE`] near-zero gradients forces one
/// reduction and raises the warning flag.
pub fn update_ell(state: EllState, grad: f64, config: &SolverConfig) -> EllState {
    let mut next = state;
    let mut candidate = state.ell - config.gamma_ell * grad;
    if candidate >= next.ell_max_current {
        candidate = next.reduce(candidate, config);
    }

    if grad.abs() < WEAK_GRADIENT {
        next.weak_streak += 1;
        if next.weak_streak >= WEAK_GRADIENT_PATIENCE {
            candidate = next.reduce(candidate, config);
            next.weak_streak = 0;
            next.warning = true;
        }
    } else {
        next.weak_streak = 0;
    }

    next.clamp(candidate, config);
    next
}

/// `dJ/d ell` from pre-summed pieces: each argument is a
/// `sum coeff * |a - b|^2 * k(a, b)` over the respective pair set.
pub fn ell_gradient_from_sums(self_x: f64, self_z: f64, cross: f64, ell: f64) -> f64 {
    (self_x + self_z - 2.0 * cross) / (ell * ell * ell)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EllGradient {
    pub value: f64,
    /// No cross pairs survived; `value` then only reflects the self terms
    /// and should not be trusted.
    pub empty_cross: bool,
}

/// Derivative of `J` with respect to the spatial length-scale at pose `h`,
/// with every sum restricted to the support radius at `ell`.
pub fn ell_gradient(
    x: &ColoredCloud,
    z: &ColoredCloud,
    h: &Pose,
    ell: f64,
    params: &KernelParams,
) -> Result<EllGradient> {
    let params = params.with_ell(ell);
    params.validate()?;
    let weighted = |pairs: &PairSet| pairs.distance_weighted_sum();
    let self_x = weighted(&build_pairs(x, x, &params)?);
    let self_z = weighted(&build_pairs(z, z, &params)?);
    let (cross, empty_cross) = match build_pairs(x, &z.transformed(h), &params) {
        Ok(p) => (weighted(&p), false),
        Err(crate::Error::EmptyPairSet { .. }) => (0.0, true),
        Err(e) => return Err(e),
    };
    Ok(EllGradient {
        value: if empty_cross { 0.0 } else { ell_gradient_from_sums(self_x, self_z, cross, ell) },
        empty_cross,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn config() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn zero_gradient_keeps_ell() {
        let s = EllState::new(&config());
        let next = update_ell(s, 0.0, &config());
        assert_eq!(next.ell, s.ell);
        assert_eq!(next.ell_max_current, s.ell_max_current);
        assert_eq!(next.weak_streak, 1);
    }

    #[test]
    fn ceiling_reduction_trace() {
        let s = EllState { ell: 0.14, ..EllState::new(&config()) };
        let next = update_ell(s, -0.05, &config());
        // raw 0.155 >= 0.15 -> 0.7 * 0.155 = 0.1085, ceiling 0.105, clamp.
        assert!((next.ell_max_current - 0.105).abs() < 1e-15);
        assert!((next.ell - 0.105).abs() < 1e-15);
        assert!(!next.pinned_low);
    }

    #[test]
    fn reduction_without_clamp() {
        let cfg = SolverConfig { ell_max: 0.2, ..config() };
        let s = EllState { ell: 0.14, ell_max_current: 0.15, ..EllState::new(&cfg) };
        let next = update_ell(s, -0.04, &cfg);
        // raw 0.152 -> 0.1064 against a ceiling of 0.105 -> clamped.
        assert!((next.ell - 0.105).abs() < 1e-15);
        let s = EllState { ell: 0.14, ell_max_current: 0.16, ..EllState::new(&cfg) };
        let next = update_ell(s, -0.1, &cfg);
        // raw 0.17 -> 0.119, ceiling 0.112 -> clamped at 0.112.
        assert!((next.ell - 0.112).abs() < 1e-12);
    }

    #[test]
    fn huge_gradient_pins_low() {
        let next = update_ell(EllState::new(&config()), 1e6, &config());
        assert_eq!(next.ell, config().ell_min);
        assert!(next.pinned_low);
    }

    #[test]
    fn ceiling_never_drops_below_minimum() {
        let cfg = config();
        let mut s = EllState::new(&cfg);
        for _ in 0..50 {
            s = update_ell(s, -1e6, &cfg);
            assert!(cfg.ell_min <= s.ell && s.ell <= s.ell_max_current && s.ell_max_current <= cfg.ell_max);
        }
        assert_eq!(s.ell_max_current, cfg.ell_min);
        assert_eq!(s.ell, cfg.ell_min);
    }

    #[test]
    fn weak_gradients_force_a_reduction() {
        let cfg = config();
        let mut s = EllState::new(&cfg);
        s = update_ell(s, 0.0, &cfg);
        s = update_ell(s, 1e-14, &cfg);
        assert!(!s.warning);
        assert!((s.ell - cfg.ell_init).abs() < 1e-12);
        s = update_ell(s, -1e-13, &cfg);
        assert!(s.warning);
        assert!((s.ell_max_current - 0.7 * cfg.ell_max).abs() < 1e-15);
        assert!((s.ell - 0.7 * cfg.ell_init).abs() < 1e-12);
    }

    #[test]
    fn coincident_single_pair_has_zero_gradient() {
        let l = crate::kernels::ColorLabel([0.5; 5]);
        let x = ColoredCloud::new(vec![Vector3::new(0.0, 0.0, 1.0)], vec![l]).unwrap();
        let g = ell_gradient(&x, &x, &Pose::identity(), 0.1, &KernelParams::default()).unwrap();
        assert_eq!(g.value, 0.0);
        assert!(!g.empty_cross);
    }

    #[test]
    fn empty_cross_is_flagged() {
        let l = crate::kernels::ColorLabel([0.5; 5]);
        let x = ColoredCloud::new(vec![Vector3::zeros()], vec![l]).unwrap();
        let z = ColoredCloud::new(vec![Vector3::new(5.0, 0.0, 0.0)], vec![l]).unwrap();
        let g = ell_gradient(&x, &z, &Pose::identity(), 0.1, &KernelParams::default()).unwrap();
        assert!(g.empty_cross);
        assert_eq!(g.value, 0.0);
    }
}
