use anyhow::{bail, Context, Result};
use rkhs_odometry::frame_pipeline::SelectionConfig;
use rkhs_odometry::odometry::OdometryConfig;

pub const KEYS: &[&str] = &[
    "sigma",
    "ell_init",
    "sigma_c",
    "ell_c",
    "tau",
    "eps_transform",
    "eps_gradient",
    "min_step",
    "max_iterations",
    "ell_min",
    "ell_max",
    "gamma_ell",
    "lambda_ell",
    "armijo",
    "shrink",
    "target_points",
    "fallback_fraction",
    "gradient_block",
    "gradient_margin",
    "canny_low",
    "canny_high",
    "depth_min",
    "depth_max",
];

pub fn parse_assignment(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .with_context(|| format!("expected key=value, got {s:?}"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    value.parse().with_context(|| format!("bad value for {key}: {value:?}"))
}

pub fn apply(config: &mut OdometryConfig, key: &str, value: &str) -> Result<()> {
    let s = &mut config.solver;
    let sel: &mut SelectionConfig = &mut config.selection;
    match key {
        "sigma" => s.kernel.sigma = num(key, value)?,
        "ell_init" => {
            s.ell_init = num(key, value)?;
            s.kernel.ell = s.ell_init;
        }
        "sigma_c" => s.kernel.sigma_c = num(key, value)?,
        "ell_c" => s.kernel.ell_c = num(key, value)?,
        "tau" => s.kernel.tau = num(key, value)?,
        "eps_transform" => s.eps_transform = num(key, value)?,
        "eps_gradient" => s.eps_gradient = num(key, value)?,
        "min_step" => s.min_step = num(key, value)?,
        "max_iterations" => s.max_iterations = num(key, value)?,
        "ell_min" => s.ell_min = num(key, value)?,
        "ell_max" => s.ell_max = num(key, value)?,
        "gamma_ell" => s.gamma_ell = num(key, value)?,
        "lambda_ell" => s.lambda_ell = num(key, value)?,
        "armijo" => s.armijo = num(key, value)?,
        "shrink" => s.shrink = num(key, value)?,
        "target_points" => sel.target_points = num(key, value)?,
        "fallback_fraction" => sel.fallback_fraction = num(key, value)?,
        "gradient_block" => sel.gradient_block = num(key, value)?,
        "gradient_margin" => sel.gradient_margin = num(key, value)?,
        "canny_low" => sel.canny_low = num(key, value)?,
        "canny_high" => sel.canny_high = num(key, value)?,
        "depth_min" => sel.depth_valid_range.0 = num(key, value)?,
        "depth_max" => sel.depth_valid_range.1 = num(key, value)?,
        _ => bail!("unknown parameter {key:?}; known: {}", KEYS.join(", ")),
    }
    Ok(())
}

pub fn describe(config: &OdometryConfig) -> String {
    let s = &config.solver;
    let k = &s.kernel;
    let sel = &config.selection;
    format!(
        "mode={:?} sigma={} ell_init={} sigma_c={} ell_c={} tau={} eps_transform={} eps_gradient={} \
         min_step={} max_iterations={} ell_min={} ell_max={} gamma_ell={} lambda_ell={} armijo={} shrink={} \
         target_points={} fallback_fraction={} gradient_block={} gradient_margin={} canny_low={} canny_high={} \
         depth_min={} depth_max={}",
        s.mode,
        k.sigma,
        s.ell_init,
        k.sigma_c,
        k.ell_c,
        k.tau,
        s.eps_transform,
        s.eps_gradient,
        s.min_step,
        s.max_iterations,
        s.ell_min,
        s.ell_max,
        s.gamma_ell,
        s.lambda_ell,
        s.armijo,
        s.shrink,
        sel.target_points,
        sel.fallback_fraction,
        sel.gradient_block,
        sel.gradient_margin,
        sel.canny_low,
        sel.canny_high,
        sel.depth_valid_range.0,
        sel.depth_valid_range.1
    )
}
