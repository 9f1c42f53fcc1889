//! Gradient ascent of `F(h) = <f_X, h.f_Z>` over SE(3).
//!
//! Each iteration rebuilds the pair set at the current pose, takes one
//! line-searched ascent step, and then (in adaptive mode) one length-scale
//! update. Ascent directions are expressed as twists about the centroid of
//! `X`; this is a fixed change of coordinates of the left perturbation and
//! keeps rotation and translation from fighting each other when the cloud
//! sits far from the origin.

use nalgebra::Vector3;

use crate::adaptive::{ell_gradient_from_sums, update_ell, EllState, WEAK_GRADIENT};
use crate::error::{Error, Result};
use crate::kernels::KernelParams;
use crate::lie::{Pose, Twist};
use crate::reduce::chunked_fold;
use crate::rkhs::{build_pairs, build_pairs_indexed, ColoredCloud, PairSet, SpatialIndex};

/// How the spatial length-scale evolves during a registration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EllMode {
    /// Online gradient updates with interval clamping.
    #[default]
    Adaptive,
    /// `ell` stays at `ell_init`.
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    /// Convergence threshold on the norm of the applied step twist.
    pub eps_transform: f64,
    /// Convergence threshold on the norm of the ascent gradient.
    pub eps_gradient: f64,
    /// Floor of the backtracking multiplier.
    pub min_step: f64,
    pub max_iterations: usize,
    /// Kernel hyperparameters; `kernel.ell` is ignored in favor of the
    /// length-scale schedule below.
    pub kernel: KernelParams,
    pub ell_init: f64,
    pub ell_min: f64,
    pub ell_max: f64,
    /// Length-scale learning rate.
    pub gamma_ell: f64,
    /// Length-scale and ceiling reduction factor.
    pub lambda_ell: f64,
    pub mode: EllMode,
    /// Sufficient-increase constant of the line search.
    pub armijo: f64,
    /// Backtracking shrink factor.
    pub shrink: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eps_transform: 1e-5,
            eps_gradient: 5e-5,
            min_step: 0.2,
            max_iterations: 500,
            kernel: KernelParams::default(),
            ell_init: 0.1,
            ell_min: 0.039,
            ell_max: 0.15,
            gamma_ell: 0.3,
            lambda_ell: 0.7,
            mode: EllMode::Adaptive,
            armijo: 1e-4,
            shrink: 0.5,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        self.kernel.with_ell(self.ell_init).validate()?;
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.ell_min > 0.0 && self.ell_min < self.ell_init && self.ell_init <= self.ell_max) {
            return bad(format!(
                "need 0 < ell_min < ell_init <= ell_max, got {} / {} / {}",
                self.ell_min, self.ell_init, self.ell_max
            ));
        }
        if !(self.lambda_ell > 0.0 && self.lambda_ell < 1.0) {
            return bad(format!("lambda_ell must lie in (0, 1), got {}", self.lambda_ell));
        }
        if !(self.gamma_ell >= 0.0 && self.gamma_ell.is_finite()) {
            return bad(format!("gamma_ell must be non-negative, got {}", self.gamma_ell));
        }
        for (name, v) in [
            ("eps_transform", self.eps_transform),
            ("eps_gradient", self.eps_gradient),
            ("min_step", self.min_step),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.min_step > 1.0 {
            return bad(format!("min_step must not exceed 1, got {}", self.min_step));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) || !(self.armijo >= 0.0 && self.armijo < 1.0) {
            return bad("line search constants out of range".into());
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive".into());
        }
        Ok(())
    }
}

/// Left-perturbation gradient of `F` at the pose that produced `z_moved`:
/// with `w = c k / ell^2`, `grad_v = sum w (x - z')` and
/// `grad_omega = sum w z' x (x - z')`.
pub fn pose_gradient_from_pairs(x: &ColoredCloud, z_moved: &ColoredCloud, pairs: &PairSet) -> Twist {
    let inv_l2 = 1.0 / (pairs.ell_used * pairs.ell_used);
    let (xs, zs) = (x.points(), z_moved.points());
    let (omega, v) = chunked_fold(
        &pairs.entries,
        (Vector3::zeros(), Vector3::zeros()),
        |(om, v), p| {
            let w = p.c * p.k * inv_l2;
            let diff = xs[p.i] - zs[p.j];
            *om += zs[p.j].cross(&diff) * w;
            *v += diff * w;
        },
        |a, b| (a.0 + b.0, a.1 + b.1),
    );
    Twist::new(omega, v)
}

/// Gradient of `F` with respect to a left perturbation `exp(xi) h`.
pub fn pose_gradient(x: &ColoredCloud, z: &ColoredCloud, h: &Pose, params: &KernelParams) -> Result<Twist> {
    let moved = z.transformed(h);
    let pairs = build_pairs(x, &moved, params)?;
    Ok(pose_gradient_from_pairs(x, &moved, &pairs))
}

/// `F(h) = <f_X, h.f_Z>` with the sparsified pair set at `h`.
pub fn objective(x: &ColoredCloud, z: &ColoredCloud, h: &Pose, params: &KernelParams) -> Result<f64> {
    Ok(build_pairs(x, &z.transformed(h), params)?.inner_product())
}

/// Re-expresses an origin-frame gradient about `center`.
fn recenter(g: &Twist, center: &Vector3<f64>) -> Twist {
    Twist::new(g.omega - center.cross(&g.v), g.v)
}

/// Applies a twist expressed about `center` on the left of `h`.
fn perturb(h: &Pose, xi: &Twist, center: &Vector3<f64>) -> Pose {
    Pose::from_translation(*center)
        .compose(&Pose::exp(xi))
        .compose(&Pose::from_translation(-center))
        .compose(h)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Moved,
    /// Gradient norm fell below `eps_gradient`; the pose was left alone.
    ZeroGradient,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepDiagnostics {
    pub outcome: StepOutcome,
    pub objective_before: f64,
    pub objective_after: f64,
    pub gradient_norm: f64,
    /// Norm of the applied step twist.
    pub step_norm: f64,
    /// Accepted backtracking multiplier.
    pub multiplier: f64,
    /// Objective evaluations spent in the line search.
    pub evaluations: usize,
    pub converged: bool,
}

/// Per-iteration record of a registration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Length-scale used for this iteration's pose step.
    pub ell: f64,
    pub ell_max_current: f64,
    /// `dJ/d ell` at the post-step pose.
    pub ell_gradient: f64,
    /// `F` at the post-step pose.
    pub objective: f64,
    /// `J` at the post-step pose.
    pub cost: f64,
    pub gradient_norm: f64,
    pub step_norm: f64,
    pub multiplier: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegistrationResult {
    /// Pose `h` with `h · Z` aligned to `X`.
    pub pose: Pose,
    pub iterations: usize,
    pub final_ell: f64,
    pub converged: bool,
    pub tracking_warning: bool,
    /// `J` at `pose` and `final_ell`.
    pub final_cost: f64,
    /// `F` at `pose` and `final_ell`.
    pub final_objective: f64,
    pub trace: Vec<IterationRecord>,
}

/// Self-term sums `|f|^2` and `sum a |.|^2 k` of one cloud at one `ell`.
#[derive(Clone, Copy, Debug)]
struct SelfSums {
    norm: f64,
    weighted: f64,
}

impl SelfSums {
    fn new(cloud: &ColoredCloud, params: &KernelParams) -> Result<Self> {
        let pairs = build_pairs(cloud, cloud, params)?;
        Ok(Self {
            norm: pairs.inner_product(),
            weighted: pairs.distance_weighted_sum(),
        })
    }
}

/// Evaluation state shared by the iterations of one registration.
struct Problem<'a> {
    x: &'a ColoredCloud,
    z: &'a ColoredCloud,
    center: Vector3<f64>,
    index: Option<(u64, SpatialIndex)>,
    self_terms: Option<(u64, SelfSums, SelfSums)>,
}

/// Pair set at a pose together with the moved cloud that produced it.
struct Evaluation {
    pose: Pose,
    moved: ColoredCloud,
    pairs: PairSet,
    objective: f64,
}

impl<'a> Problem<'a> {
    fn new(x: &'a ColoredCloud, z: &'a ColoredCloud) -> Self {
        Self {
            x,
            z,
            center: x.centroid(),
            index: None,
            self_terms: None,
        }
    }

    fn index(&mut self, params: &KernelParams) -> &SpatialIndex {
        let key = params.ell.to_bits();
        if self.index.as_ref().map(|(k, _)| *k) != Some(key) {
            self.index = Some((key, SpatialIndex::new(self.x.points(), params.support_radius())));
        }
        &self.index.as_ref().expect("index just built").1
    }

    fn self_terms(&mut self, params: &KernelParams) -> Result<(SelfSums, SelfSums)> {
        let key = params.ell.to_bits();
        match self.self_terms {
            Some((k, a, b)) if k == key => Ok((a, b)),
            _ => {
                let a = SelfSums::new(self.x, params)?;
                let b = SelfSums::new(self.z, params)?;
                self.self_terms = Some((key, a, b));
                Ok((a, b))
            }
        }
    }

    fn evaluate(&mut self, pose: Pose, params: &KernelParams) -> Result<Evaluation> {
        let moved = self.z.transformed(&pose);
        let x = self.x;
        let pairs = build_pairs_indexed(self.index(params), x, &moved, params)?;
        let objective = pairs.inner_product();
        Ok(Evaluation {
            pose,
            moved,
            pairs,
            objective,
        })
    }

    /// First and second derivative of `F` along the centered direction `d`.
    fn directional_derivatives(&self, eval: &Evaluation, d: &Twist) -> (f64, f64) {
        let inv_2l2 = 0.5 / (eval.pairs.ell_used * eval.pairs.ell_used);
        let (xs, zs) = (self.x.points(), eval.moved.points());
        let center = self.center;
        chunked_fold(
            &eval.pairs.entries,
            (0.0, 0.0),
            |(d1, d2), p| {
                let u = xs[p.i] - zs[p.j];
                let rel = zs[p.j] - center;
                // First- and second-order displacement of z' along exp(t d).
                let delta = d.omega.cross(&rel) + d.v;
                let accel = d.omega.cross(&delta);
                let e1 = -2.0 * u.dot(&delta);
                let e2 = 2.0 * delta.norm_squared() - 2.0 * u.dot(&accel);
                let ck = p.c * p.k;
                let a = e1 * inv_2l2;
                *d1 -= ck * a;
                *d2 += ck * (a * a - e2 * inv_2l2);
            },
            |a, b| (a.0 + b.0, a.1 + b.1),
        )
    }

    /// One ascent step from `current` at fixed kernel parameters.
    fn step(
        &mut self,
        current: &Evaluation,
        params: &KernelParams,
        config: &SolverConfig,
    ) -> Result<(Evaluation, Twist, StepDiagnostics)> {
        let raw = pose_gradient_from_pairs(self.x, &current.moved, &current.pairs);
        let grad = recenter(&raw, &self.center);
        let gnorm = grad.norm();
        let f0 = current.objective;
        if gnorm < config.eps_gradient {
            let same = Evaluation {
                pose: current.pose,
                moved: current.moved.clone(),
                pairs: current.pairs.clone(),
                objective: f0,
            };
            let diag = StepDiagnostics {
                outcome: StepOutcome::ZeroGradient,
                objective_before: f0,
                objective_after: f0,
                gradient_norm: gnorm,
                step_norm: 0.0,
                multiplier: 0.0,
                evaluations: 0,
                converged: true,
            };
            return Ok((same, Twist::zero(), diag));
        }

        let dir = grad.scale(1.0 / gnorm);
        let (slope, curvature) = self.directional_derivatives(current, &dir);
        // Newton length along the ray when F is locally concave there,
        // otherwise one length-scale.
        let trust = params.ell;
        let base = if curvature < 0.0 {
            (-slope / curvature).min(trust)
        } else {
            trust
        };

        let mut multiplier = 1.0;
        let mut evaluations = 0;
        let accepted = loop {
            let xi = dir.scale(multiplier * base);
            let candidate = perturb(&current.pose, &xi, &self.center);
            evaluations += 1;
            let at_floor = multiplier <= config.min_step;
            match self.evaluate(candidate, params) {
                Ok(eval) => {
                    let target = f0 + config.armijo * multiplier * base * slope;
                    if eval.objective >= target || at_floor {
                        break (eval, xi);
                    }
                }
                Err(Error::EmptyPairSet { .. }) if !at_floor => {}
                Err(e) => return Err(e),
            }
            multiplier = (multiplier * config.shrink).max(config.min_step);
        };

        let (eval, xi) = accepted;
        let step_norm = xi.norm();
        let diag = StepDiagnostics {
            outcome: StepOutcome::Moved,
            objective_before: f0,
            objective_after: eval.objective,
            gradient_norm: gnorm,
            step_norm,
            multiplier,
            evaluations,
            converged: step_norm < config.eps_transform,
        };
        Ok((eval, xi, diag))
    }
}

/// One ascent iteration at length-scale `ell`: returns the new pose, the
/// applied step twist (expressed about the centroid of `x`) and diagnostics.
pub fn step(
    x: &ColoredCloud,
    z: &ColoredCloud,
    h: &Pose,
    ell: f64,
    config: &SolverConfig,
) -> Result<(Pose, Twist, StepDiagnostics)> {
    let params = config.kernel.with_ell(ell);
    params.validate()?;
    let mut problem = Problem::new(x, z);
    let current = problem.evaluate(*h, &params)?;
    let (eval, xi, diag) = problem.step(&current, &params, config)?;
    Ok((eval.pose, xi, diag))
}

/// Finds `h` maximizing `<f_X, h.f_Z>`, starting from `h_init`.
pub fn register(
    x: &ColoredCloud,
    z: &ColoredCloud,
    config: &SolverConfig,
    h_init: &Pose,
) -> Result<RegistrationResult> {
    config.validate()?;
    let mut problem = Problem::new(x, z);

    let widest = config.kernel.with_ell(config.ell_max);
    match problem.evaluate(*h_init, &widest) {
        Err(Error::EmptyPairSet { radius }) => {
            return Err(Error::RegistrationFailed(format!(
                "clouds do not overlap within {radius:.3} m at the initial pose"
            )))
        }
        Err(e) => return Err(e),
        Ok(_) => {}
    }

    let mut state = EllState::new(config);
    let mut params = config.kernel.with_ell(state.ell);
    let lost = |e: Error| match e {
        Error::EmptyPairSet { radius } => Error::RegistrationFailed(format!(
            "lost all point pairs within {radius:.3} m during the ascent"
        )),
        e => e,
    };
    let mut current = problem.evaluate(*h_init, &params).map_err(lost)?;
    // Best pose at the current length-scale; F values at different ell are
    // not comparable.
    let mut best = (current.pose, current.objective, state.ell);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut weak_at_bound = false;

    for iteration in 1..=config.max_iterations {
        let (next, _, diag) = problem.step(&current, &params, config).map_err(lost)?;
        current = next;
        if current.objective > best.1 {
            best = (current.pose, current.objective, state.ell);
        }

        let (sx, sz) = problem.self_terms(&params)?;
        let ell_grad = ell_gradient_from_sums(
            sx.weighted,
            sz.weighted,
            current.pairs.distance_weighted_sum(),
            state.ell,
        );
        trace.push(IterationRecord {
            iteration,
            ell: state.ell,
            ell_max_current: state.ell_max_current,
            ell_gradient: ell_grad,
            objective: current.objective,
            cost: sx.norm + sz.norm - 2.0 * current.objective,
            gradient_norm: diag.gradient_norm,
            step_norm: diag.step_norm,
            multiplier: diag.multiplier,
        });

        if diag.converged {
            converged = true;
            break;
        }

        if config.mode == EllMode::Adaptive {
            let at_bound = state.ell <= config.ell_min || state.ell >= state.ell_max_current;
            weak_at_bound |= at_bound && ell_grad.abs() < WEAK_GRADIENT;
            let next_state = update_ell(state, ell_grad, config);
            if next_state.ell != state.ell {
                params = config.kernel.with_ell(next_state.ell);
                current = problem.evaluate(current.pose, &params).map_err(lost)?;
                best = (current.pose, current.objective, next_state.ell);
            }
            state = next_state;
        }
    }

    params = config.kernel.with_ell(state.ell);
    let (sx, sz) = problem.self_terms(&params)?;
    let final_objective = best.1;
    Ok(RegistrationResult {
        pose: best.0,
        iterations: trace.len(),
        final_ell: state.ell,
        converged,
        tracking_warning: state.warning || weak_at_bound,
        final_cost: sx.norm + sz.norm - 2.0 * final_objective,
        final_objective,
        trace,
    })
}
