mod params;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::Vector3;
use rkhs_odometry::dataset::{associate, load_frame, load_sequence, CameraConfig};
use rkhs_odometry::evaluation::{format_tum_line, read_trajectory, residuals_to_csv, rpe, write_trajectory};
use rkhs_odometry::frame_pipeline::frame_to_cloud;
use rkhs_odometry::odometry::{diagnostics_to_csv, run_sequence, OdometryConfig};
use rkhs_odometry::registration::RegistrationResult;
use rkhs_odometry::sensitivity::{cutoff_table, table_to_csv};
use rkhs_odometry::synthetic::{write_sequence, Room};
use rkhs_odometry::{register, EllMode, Pose, Twist};

/// Environment variable holding the worker thread count.
const THREADS_ENV: &str = "RKHS_THREADS";

#[derive(Parser)]
#[command(name = "rkhs-vo", version, about = "RGB-D odometry by kernel inner-product registration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run odometry over a TUM-format sequence.
    Run(RunArgs),
    /// Register one pair of consecutive frames.
    Pair(PairArgs),
    /// Relative pose error of an estimated trajectory.
    Rpe(RpeArgs),
    /// Kernel cutoff table for the sparsification threshold.
    Sensitivity(SensitivityArgs),
    /// Render a synthetic TUM-format sequence with known motion.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Adaptive,
    FixedEll,
}

#[derive(Args)]
struct SolverArgs {
    /// Length-scale handling.
    #[arg(long, value_enum, default_value = "adaptive")]
    mode: Mode,
    /// Parameter override, `key=value`; repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
}

impl SolverArgs {
    fn config(&self) -> Result<OdometryConfig> {
        let mut config = OdometryConfig::default();
        config.solver.mode = match self.mode {
            Mode::Adaptive => EllMode::Adaptive,
            Mode::FixedEll => EllMode::Fixed,
        };
        for p in &self.params {
            let (k, v) = params::parse_assignment(p)?;
            params::apply(&mut config, &k, &v)?;
        }
        config.solver.validate().context("solver configuration")?;
        config.selection.validate().context("selection configuration")?;
        eprintln!("parameters: {}", params::describe(&config));
        Ok(config)
    }
}

#[derive(Args)]
struct SequenceArgs {
    /// Sequence root containing rgb.txt and depth.txt.
    #[arg(long)]
    dataset: PathBuf,
    /// Camera file with fx, fy, cx, cy and depth_scale.
    #[arg(long)]
    intrinsics: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    sequence: SequenceArgs,
    /// Output trajectory (TUM format).
    #[arg(long)]
    out: PathBuf,
    /// Per-frame diagnostics CSV.
    #[arg(long)]
    diag: Option<PathBuf>,
    /// Process at most this many associated frames.
    #[arg(long)]
    max_frames: Option<usize>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct PairArgs {
    #[command(flatten)]
    sequence: SequenceArgs,
    /// Index of the first frame among associated frames; it is registered
    /// against the next one.
    #[arg(long, default_value_t = 0)]
    index: usize,
    /// Per-iteration trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct RpeArgs {
    /// Estimated trajectory.
    #[arg(long)]
    estimated: PathBuf,
    /// Reference trajectory.
    #[arg(long)]
    groundtruth: PathBuf,
    /// Interval length, seconds.
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Per-interval residual CSV.
    #[arg(long)]
    residuals: Option<PathBuf>,
}

#[derive(Args)]
struct SensitivityArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [2u32, 4, 6, 8, 10])]
    orders: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_values_t = [1e-2, 1e-3, 1e-4, 1e-5])]
    tolerances: Vec<f64>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    frames: usize,
    /// Seconds between frames.
    #[arg(long, default_value_t = 0.25)]
    dt: f64,
    /// Per-frame camera motion `wx,wy,wz,vx,vy,vz` (radians, meters).
    #[arg(long, value_delimiter = ',', num_args = 6, allow_negative_numbers = true,
          default_values_t = [0.002, -0.006, 0.0015, 0.01, 0.0025, 0.0075])]
    twist: Vec<f64>,
    #[arg(long, default_value_t = 640)]
    width: u32,
    #[arg(long, default_value_t = 480)]
    height: u32,
}

fn load_index(args: &SequenceArgs) -> Result<rkhs_odometry::dataset::SequenceIndex> {
    let camera = CameraConfig::load(&args.intrinsics)?;
    Ok(load_sequence(&args.dataset, camera)?)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn run(args: &RunArgs) -> Result<()> {
    let mut config = args.solver.config()?;
    config.max_frames = args.max_frames;
    let index = load_index(&args.sequence)?;
    let result = run_sequence(&index, &config, |d| {
        if d.failed {
            eprintln!("frame {} ({}): registration failed, reusing previous motion", d.frame, d.stamp);
        } else if d.tracking_warning {
            eprintln!("frame {} ({}): weak length-scale gradient, tracking may be unreliable", d.frame, d.stamp);
        }
    })?;
    write_trajectory(&result.trajectory, &args.out)?;
    if let Some(diag) = &args.diag {
        write_file(diag, &diagnostics_to_csv(&result.diagnostics))?;
    }
    let failed = result.diagnostics.iter().filter(|d| d.failed).count();
    println!(
        "registered {} frame pairs ({failed} failed), skipped {} frames, {} rgb frames without depth",
        result.diagnostics.len(),
        result.skipped_frames,
        result.unmatched_rgb
    );
    Ok(())
}

fn trace_csv(r: &RegistrationResult) -> String {
    let mut out = String::from("iteration,ell,ell_max_current,ell_gradient,objective,cost,gradient_norm,step_norm,multiplier\n");
    for t in &r.trace {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            t.iteration, t.ell, t.ell_max_current, t.ell_gradient, t.objective, t.cost, t.gradient_norm, t.step_norm, t.multiplier
        );
    }
    out
}

fn pair(args: &PairArgs) -> Result<()> {
    let config = args.solver.config()?;
    let index = load_index(&args.sequence)?;
    let association = associate(&index);
    let (Some(a), Some(b)) = (association.pairs.get(args.index), association.pairs.get(args.index + 1)) else {
        bail!("sequence has {} associated frames; no pair at index {}", association.pairs.len(), args.index);
    };
    let (x, _) = frame_to_cloud(&load_frame(&index, a)?, &config.selection)?;
    let (z, _) = frame_to_cloud(&load_frame(&index, b)?, &config.selection)?;
    let r = register(&x, &z, &config.solver, &Pose::identity())?;
    if let Some(path) = &args.trace {
        write_file(path, &trace_csv(&r))?;
    }
    println!("# relative pose of frame {} in frame {}", b.rgb.stamp, a.rgb.stamp);
    println!("{}", format_tum_line(b.rgb.stamp, &r.pose));
    println!(
        "points {} / {}, iterations {}, converged {}, final ell {:.4}, F {:.6}, J {:.6}, warning {}",
        x.len(),
        z.len(),
        r.iterations,
        r.converged,
        r.final_ell,
        r.final_objective,
        r.final_cost,
        r.tracking_warning
    );
    Ok(())
}

fn rpe_cmd(args: &RpeArgs) -> Result<()> {
    let est = read_trajectory(&args.estimated)?;
    let gt = read_trajectory(&args.groundtruth)?;
    let r = rpe(&est, &gt, args.delta)?;
    if let Some(path) = &args.residuals {
        write_file(path, &residuals_to_csv(&r))?;
    }
    println!("intervals {}", r.residuals.len());
    println!("trans_rmse {:.4} m/s", r.trans_rmse);
    println!("rot_rmse {:.4} deg/s", r.rot_rmse);
    Ok(())
}

fn sensitivity(args: &SensitivityArgs) -> Result<()> {
    let rows = cutoff_table(&args.orders, &args.tolerances)?;
    let csv = table_to_csv(&rows);
    match &args.out {
        Some(path) => write_file(path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn synth(args: &SynthArgs) -> Result<()> {
    if args.frames < 2 || !(args.dt > 0.0) {
        bail!("need at least 2 frames and a positive dt");
    }
    let t = &args.twist;
    let step = Pose::exp(&Twist::new(Vector3::new(t[0], t[1], t[2]), Vector3::new(t[3], t[4], t[5])));
    let mut pose = Pose::identity();
    let poses: Vec<(f64, Pose)> = (0..args.frames)
        .map(|k| {
            if k > 0 {
                pose = pose.compose(&step);
            }
            (1.0 + k as f64 * args.dt, pose)
        })
        .collect();
    let camera = CameraConfig {
        intrinsics: rkhs_odometry::frame_pipeline::Intrinsics {
            fx: 525.0 * args.width as f64 / 640.0,
            fy: 525.0 * args.width as f64 / 640.0,
            cx: (args.width as f64 - 1.0) / 2.0,
            cy: (args.height as f64 - 1.0) / 2.0,
        },
        depth_scale: 5000.0,
    };
    write_sequence(&args.out, &Room::default(), &camera, args.width, args.height, &poses)?;
    println!("wrote {} frames to {}", args.frames, args.out.display());
    Ok(())
}

fn configure_threads() -> Result<()> {
    if let Ok(value) = std::env::var(THREADS_ENV) {
        let n: usize = value
            .parse()
            .with_context(|| format!("{THREADS_ENV} must be a positive integer, got {value:?}"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| match &cli.command {
        Command::Run(a) => run(a),
        Command::Pair(a) => pair(a),
        Command::Rpe(a) => rpe_cmd(a),
        Command::Sensitivity(a) => sensitivity(a),
        Command::Synth(a) => synth(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
