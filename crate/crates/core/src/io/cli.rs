//! The `warpkit` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or numerical error.
//! Diagnostics go to standard error; machine-readable results go to files or
//! to standard output as JSON.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use super::align::{align_face_with_template, template_from_env, DEFAULT_ALIGNED_SIZE};
use super::landmarks::read_landmarks;
use super::params::{parse_dense_grid, parse_projective};
use super::png::{read_png, write_png};
use super::points::{read_points, write_points};
use super::wfld::write_wfld;
use crate::backends::{self, Backend, CoarseDeformationGrid, LandmarkSet};
use crate::error::{Error, Result};
use crate::fitdemo::{self, FitConfig, FitReport};
use crate::image::{FlowField, Image};
use crate::sampler;
use crate::tps::{self, DEFAULT_LAMBDA};
use crate::warp_grad;

#[derive(Debug, Parser)]
#[command(name = "warpkit", version, about = "Differentiable control-point image warping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Warp an image with control points or another backend's parameters.
    Warp(WarpArgs),
    /// Recover control points by gradient descent (image pair or seeded round trip).
    Fit(FitArgs),
    /// Warp at several exaggeration factors.
    Sweep(SweepArgs),
    /// Compare analytic warp gradients with finite differences.
    CheckGrad(CheckGradArgs),
    /// Align a face to the five-point template.
    Align(AlignArgs),
    /// Export the inverse-mapping flow as WFLD.
    Flow(FlowArgs),
}

#[derive(Debug, Args)]
struct TransformArgs {
    /// Parameter file: control points for tps/landmark, homography or grid JSON otherwise.
    #[arg(long)]
    points: PathBuf,
    #[arg(long, value_enum, default_value = "tps")]
    backend: Backend,
    /// Exaggeration factor applied to displacements (or grid offsets).
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    alpha: f64,
    /// Curvature relaxation of the spline fit.
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    lambda: f64,
}

#[derive(Debug, Args)]
struct WarpArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    transform: TransformArgs,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Source image; omit for a seeded synthetic round trip.
    #[arg(long, requires = "target")]
    input: Option<PathBuf>,
    /// Target image the warped source should match.
    #[arg(long, requires = "input")]
    target: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Side length of the synthetic round-trip image.
    #[arg(long, default_value_t = 64)]
    size: usize,
    #[arg(short = 'k', default_value_t = tps::DEFAULT_CONTROL_POINTS)]
    k: usize,
    #[arg(long, default_value_t = 2000)]
    iters: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    /// Largest displacement of the synthetic ground truth.
    #[arg(long, default_value_t = 0.1)]
    magnitude: f64,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    lambda: f64,
    /// Report JSON path (standard output when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write the recovered control points here.
    #[arg(long)]
    points: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    points: PathBuf,
    #[arg(long, value_enum, default_value = "tps")]
    backend: Backend,
    #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true, default_value = "0.5,1.0,1.5,2.0")]
    alphas: Vec<f64>,
    #[arg(long)]
    outdir: PathBuf,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    lambda: f64,
}

#[derive(Debug, Args)]
struct CheckGradArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 16)]
    size: usize,
    #[arg(short = 'k', default_value_t = 8)]
    k: usize,
}

#[derive(Debug, Args)]
struct AlignArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    landmarks: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ALIGNED_SIZE)]
    size: usize,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct FlowArgs {
    /// Image whose dimensions the flow takes.
    #[arg(long, conflicts_with = "size", required_unless_present = "size")]
    input: Option<PathBuf>,
    /// Square flow side length, when no image is given.
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    transform: TransformArgs,
}

/// A fully parsed transformation, ready to produce a flow or a warp.
enum Transform {
    Spline(tps::ControlPointSet),
    Landmark(LandmarkSet, Vec<crate::image::Vec2>),
    Projective(backends::ProjectiveParams),
    Dense(CoarseDeformationGrid),
}

impl Transform {
    fn load(path: &Path, backend: Backend) -> Result<Self> {
        Ok(match backend {
            Backend::Tps => Transform::Spline(read_points(path)?),
            Backend::Landmark => {
                let control = read_points(path)?;
                let anchors = LandmarkSet::new(control.points().to_vec())?;
                Transform::Landmark(anchors, control.displacements().to_vec())
            }
            Backend::Projective => Transform::Projective(parse_projective(&super::read_file(path)?)?),
            Backend::Dense => Transform::Dense(parse_dense_grid(&super::read_file(path)?)?),
        })
    }

    fn scaled_grid(grid: &CoarseDeformationGrid, alpha: f64) -> Result<CoarseDeformationGrid> {
        CoarseDeformationGrid::new(
            grid.height(),
            grid.width(),
            grid.offsets().iter().map(|o| [alpha * o[0], alpha * o[1]]).collect(),
        )
    }

    fn check_alpha(&self, alpha: f64) -> Result<()> {
        if !alpha.is_finite() {
            return Err(Error::Parameter(format!("alpha must be finite, got {alpha}")));
        }
        if matches!(self, Transform::Projective(_)) && alpha != 1.0 {
            return Err(Error::Parameter("the projective backend has no displacements to scale; use --alpha 1".into()));
        }
        Ok(())
    }

    fn warp(&self, image: &Image, alpha: f64, lambda: f64) -> Result<Image> {
        self.check_alpha(alpha)?;
        match self {
            Transform::Spline(c) => sampler::warp_image(image, c, alpha, lambda),
            Transform::Landmark(a, d) => backends::landmark_warp(image, a, d, alpha, lambda),
            Transform::Projective(p) => backends::projective_warp(image, p),
            Transform::Dense(g) => backends::dense_warp(image, &Self::scaled_grid(g, alpha)?),
        }
    }

    fn flow(&self, height: usize, width: usize, alpha: f64, lambda: f64) -> Result<FlowField> {
        self.check_alpha(alpha)?;
        match self {
            Transform::Spline(c) => Ok(sampler::build_flow(&tps::fit(&c.scaled(alpha), lambda)?, height, width)),
            Transform::Landmark(a, d) => {
                let c = tps::ControlPointSet::new(a.anchors().to_vec(), d.clone())?;
                Ok(sampler::build_flow(&tps::fit(&c.scaled(alpha), lambda)?, height, width))
            }
            Transform::Projective(p) => p.flow(height, width),
            Transform::Dense(g) => Ok(Self::scaled_grid(g, alpha)?.flow(height, width)),
        }
    }
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("json values serialize"));
}

fn warp(args: WarpArgs) -> Result<()> {
    let image = read_png(&args.input)?;
    let t = &args.transform;
    let out = Transform::load(&t.points, t.backend)?.warp(&image, t.alpha, t.lambda)?;
    write_png(&out, &args.output)?;
    print_json(&json!({
        "output": args.output,
        "backend": t.backend,
        "alpha": t.alpha,
        "height": out.height(),
        "width": out.width(),
    }));
    Ok(())
}

/// JSON form of a fit report; an exact match has `"psnr_db": "inf"`.
pub fn fit_report_json(report: &FitReport, config: &FitConfig) -> serde_json::Value {
    let psnr = if report.psnr_db.is_finite() {
        json!(report.psnr_db)
    } else {
        json!("inf")
    };
    json!({
        "psnr_db": psnr,
        "best_loss": report.best_loss,
        "best_iteration": report.best_iteration,
        "trajectory": report.trajectory,
        "points": super::points::PointsDocument::from(&report.control),
        "config": config,
    })
}

fn fit(args: FitArgs) -> Result<()> {
    let config = FitConfig {
        k: args.k,
        iterations: args.iters,
        step_size: args.lr,
        lambda: args.lambda,
        seed: args.seed,
        ..FitConfig::default()
    };
    let report = match (&args.input, &args.target) {
        (Some(input), Some(target)) => fitdemo::fit_warp(&read_png(input)?, &read_png(target)?, &config)?,
        _ => fitdemo::roundtrip(args.seed, args.size, args.size, args.k, args.magnitude, &config)?,
    };
    eprintln!(
        "best loss {:.6} at iteration {}, PSNR {:.2} dB",
        report.best_loss, report.best_iteration, report.psnr_db
    );
    if let Some(path) = &args.points {
        write_points(&report.control, path)?;
    }
    let value = fit_report_json(&report, &config);
    match &args.output {
        Some(path) => super::write_file(path, serde_json::to_string_pretty(&value).expect("json").as_bytes())?,
        None => print_json(&value),
    }
    Ok(())
}

/// File name for one sweep output: `<stem>_a<alpha with two decimals>.png`.
pub fn sweep_file_name(input: &Path, alpha: f64) -> String {
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("warp");
    format!("{stem}_a{alpha:.2}.png")
}

fn sweep(args: SweepArgs) -> Result<()> {
    let image = read_png(&args.input)?;
    let transform = Transform::load(&args.points, args.backend)?;
    std::fs::create_dir_all(&args.outdir).map_err(|source| Error::Io {
        path: args.outdir.clone(),
        source,
    })?;
    let mut written = Vec::new();
    for &alpha in &args.alphas {
        let path = args.outdir.join(sweep_file_name(&args.input, alpha));
        write_png(&transform.warp(&image, alpha, args.lambda)?, &path)?;
        written.push(json!({ "alpha": alpha, "output": path }));
    }
    print_json(&json!({ "outputs": written }));
    Ok(())
}

fn check_grad(args: CheckGradArgs) -> Result<bool> {
    let report = warp_grad::check_gradients(args.seed, args.size, args.size, args.k)?;
    eprintln!(
        "max relative error: {:.3e} ({} components, {} skipped) -> {}",
        report.max_relative_error,
        report.checked,
        report.skipped,
        if report.pass { "pass" } else { "FAIL" }
    );
    print_json(&serde_json::to_value(&report).expect("report serializes"));
    Ok(report.pass)
}

fn align(args: AlignArgs) -> Result<()> {
    let image = read_png(&args.input)?;
    let landmarks = read_landmarks(&args.landmarks)?;
    let template = template_from_env()?;
    let (out, transform) = align_face_with_template(&image, &landmarks, &template, args.size)?;
    write_png(&out, &args.output)?;
    print_json(&json!({
        "output": args.output,
        "size": args.size,
        "scale": transform.scale,
        "rotation": transform.rotation,
        "translation": transform.translation,
    }));
    Ok(())
}

fn flow(args: FlowArgs) -> Result<()> {
    let (height, width) = match (&args.input, args.size) {
        (Some(path), _) => {
            let image = read_png(path)?;
            (image.height(), image.width())
        }
        (None, Some(size)) if size > 0 => (size, size),
        _ => return Err(Error::Parameter("flow size must be positive".into())),
    };
    let t = &args.transform;
    let field = Transform::load(&t.points, t.backend)?.flow(height, width, t.alpha, t.lambda)?;
    write_wfld(&field, &args.output)?;
    print_json(&json!({ "output": args.output, "height": height, "width": width }));
    Ok(())
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let outcome = match cli.command {
        Command::Warp(a) => warp(a).map(|_| true),
        Command::Fit(a) => fit(a).map(|_| true),
        Command::Sweep(a) => sweep(a).map(|_| true),
        Command::CheckGrad(a) => check_grad(a),
        Command::Align(a) => align(a).map(|_| true),
        Command::Flow(a) => flow(a).map(|_| true),
    };
    match outcome {
        Ok(true) => 0,
        Ok(false) => 2,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
