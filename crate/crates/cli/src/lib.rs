//! Command-line front end for the reconstruction engine.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::Value;
use vsharp_core::calibration::{acs_region, estimate_sensitivities, DEFAULT_EPS};
use vsharp_core::dataio::{read_image, read_kspace, read_maps, read_mask, write_array, write_report, write_trace, Array};
use vsharp_core::fourier::{apply_mask, AcquisitionOperator};
use vsharp_core::metrics::{evaluate_volume, ReconReport};
use vsharp_core::phantom::{augment, coil_maps, generate_phantom, simulate, AugmentFlags, PhantomSpec};
use vsharp_core::priors::DenoiserKind;
use vsharp_core::rng::Rng;
use vsharp_core::sampling::{generate, measured_acceleration, MaskSpec, Scheme};
use vsharp_core::suite::{mean_by_method, run_method, run_suite, Method, MethodConfig, SuiteConfig};
use vsharp_core::vsharp::UInit;
use vsharp_core::{Error, SamplingMask};

mod png;

pub use png::write_png;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_FORMAT: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

/// Coin flips for augmentation use their own stream so they do not share draws with the noise.
const AUGMENT_STREAM: u64 = 0xa5a5_5a5a_0f0f_f0f0;

#[derive(Debug, Parser)]
#[command(name = "vsharp", version, about = "Multi-coil dynamic MRI reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a ground-truth cine phantom and its coil maps.
    Phantom(PhantomArgs),
    /// Generate a sampling mask and print its measured acceleration.
    Mask(MaskArgs),
    /// Simulate a noisy undersampled acquisition.
    Undersample(UndersampleArgs),
    /// Reconstruct an image from k-space.
    Recon(ReconArgs),
    /// Compare a reconstruction with a reference and write report files.
    Eval(EvalArgs),
    /// Run a preset sweep of schemes, accelerations and methods.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct PhantomArgs {
    #[arg(long, default_value_t = 128)]
    ny: usize,
    #[arg(long, default_value_t = 128)]
    nx: usize,
    #[arg(long, default_value_t = 12)]
    nf: usize,
    #[arg(long, default_value_t = 8)]
    nc: usize,
    #[arg(long, default_value_t = 0.15)]
    beat_amplitude: f64,
    /// Output image file.
    #[arg(long)]
    image: PathBuf,
    /// Output coil-map file.
    #[arg(long)]
    maps: PathBuf,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct MaskArgs {
    #[arg(long, value_parser = parse_scheme)]
    scheme: Scheme,
    /// Nominal acceleration.
    #[arg(long = "R", default_value_t = 4)]
    acceleration: u32,
    /// Fraction of columns in the central calibration block (Cartesian schemes).
    #[arg(long, default_value_t = 0.0)]
    acs: f64,
    /// Interleave the pattern across frames.
    #[arg(long)]
    kt: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 12)]
    nf: usize,
    #[arg(long, default_value_t = 128)]
    ny: usize,
    #[arg(long, default_value_t = 128)]
    nx: usize,
    /// Equispaced base offset; drawn from the seed when absent.
    #[arg(long)]
    offset: Option<usize>,
    /// Radial base angle in radians; drawn from the seed when absent.
    #[arg(long)]
    angle_offset: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct UndersampleArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    maps: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    /// Noise level relative to the mean k-space magnitude.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Candidate augmentations, each applied with probability --augment-prob.
    #[arg(long, value_delimiter = ',', value_parser = ["hflip", "vflip", "time-reverse"])]
    augment: Vec<String>,
    #[arg(long, default_value_t = 0.5)]
    augment_prob: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct ReconArgs {
    #[arg(long, value_parser = parse_method)]
    method: Method,
    #[arg(long)]
    kspace: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    /// Coil maps; estimated from the calibration region when absent.
    #[arg(long)]
    maps: Option<PathBuf>,
    /// Side of the central square used to estimate maps when the mask has no ACS block.
    #[arg(long, default_value_t = 24)]
    calibration_width: usize,
    /// JSON method configuration; flags take precedence over its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Directory for the iterate trace (vsharp methods).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Magnitude PNG of the result, frames side by side.
    #[arg(long)]
    png: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Debug, Args, Default)]
struct SolverFlags {
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    gd_steps: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    step_size: Option<f64>,
    #[arg(long, value_parser = parse_denoiser)]
    denoiser: Option<DenoiserKind>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    tv_iterations: Option<usize>,
    #[arg(long)]
    per_iterate_dc: Option<bool>,
    #[arg(long, value_parser = parse_u_init)]
    u_init: Option<UInit>,
    #[arg(long)]
    arn_cascades: Option<usize>,
    #[arg(long)]
    arn_eta: Option<f64>,
    #[arg(long, value_parser = parse_denoiser)]
    arn_regularizer: Option<DenoiserKind>,
    #[arg(long)]
    arn_lambda: Option<f64>,
    #[arg(long)]
    sense_mu: Option<f64>,
    #[arg(long)]
    sense_iterations: Option<usize>,
    #[arg(long)]
    sense_tol: Option<f64>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long, default_value = "unknown")]
    method: String,
    #[arg(long, default_value = "volume")]
    volume: String,
    #[arg(long, default_value_t = 0)]
    acceleration: u32,
    #[arg(long, default_value = "")]
    scheme: String,
    #[arg(long)]
    csv: PathBuf,
    #[arg(long)]
    json: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// desk-A (equispaced, same mask per frame) or desk-B (interleaved, all schemes).
    #[arg(long, default_value = "desk-B")]
    preset: String,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    no_png: bool,
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_denoiser(s: &str) -> Result<DenoiserKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_u_init(s: &str) -> Result<UInit, String> {
    match s {
        "zero" => Ok(UInit::Zero),
        "scaled_adjoint" | "scaled-adjoint" => Ok(UInit::ScaledAdjoint),
        other => Err(format!("unknown multiplier init '{other}'")),
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Phantom(a) => phantom(a),
        Command::Mask(a) => mask(a),
        Command::Undersample(a) => undersample(a),
        Command::Recon(a) => recon(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Format { .. } | Error::Io(_) => EXIT_FORMAT,
        Error::Numeric(_) | Error::Divergence(_) | Error::DegenerateMask(_) | Error::Calibration(_) | Error::UndefinedMetric(_) => {
            EXIT_NUMERIC
        }
        Error::Dimension(_) | Error::InvalidParameter(_) | Error::InvalidSpec(_) => EXIT_USAGE,
    }
}

fn phantom(a: PhantomArgs) -> Result<(), Error> {
    let spec = PhantomSpec { beat_amplitude: a.beat_amplitude, ..PhantomSpec::new(a.ny, a.nx, a.nf, a.nc) };
    write_array(&a.image, &Array::Image(generate_phantom(&spec)?))?;
    write_array(&a.maps, &Array::Maps(coil_maps(&spec)?))
}

fn mask(a: MaskArgs) -> Result<(), Error> {
    let spec = MaskSpec {
        acs_fraction: a.acs,
        kt_mode: a.kt,
        seed: a.seed,
        offset: a.offset,
        angle_offset: a.angle_offset,
        ..MaskSpec::new(a.scheme, a.acceleration, a.nf, a.ny, a.nx)
    };
    let mask = generate(&spec)?;
    println!("{:.3}", measured_acceleration(&mask)?);
    if let Some(out) = &a.out {
        write_array(out, &Array::Mask(mask))?;
    }
    Ok(())
}

fn augment_flags(names: &[String], prob: f64, seed: u64) -> Result<AugmentFlags, Error> {
    if !(0.0..=1.0).contains(&prob) {
        return Err(Error::InvalidParameter(format!("augment probability {prob} outside [0, 1]")));
    }
    let mut rng = Rng::new(seed ^ AUGMENT_STREAM);
    let mut flags = AugmentFlags::default();
    // one draw per candidate in a fixed order, so the outcome depends only on the seed and the set
    for (name, slot) in [("hflip", &mut flags.hflip), ("vflip", &mut flags.vflip), ("time-reverse", &mut flags.time_reverse)] {
        let heads = rng.uniform() < prob;
        *slot = heads && names.iter().any(|n| n == name);
    }
    Ok(flags)
}

fn undersample(a: UndersampleArgs) -> Result<(), Error> {
    let image = read_image(&a.image)?;
    let maps = read_maps(&a.maps)?;
    let mask = read_mask(&a.mask)?;
    let y = if a.augment.is_empty() {
        simulate(&image, &maps, &mask, a.noise, a.seed)?
    } else {
        let flags = augment_flags(&a.augment, a.augment_prob, a.seed)?;
        let (nf, ny, nx) = mask.shape();
        let full = simulate(&image, &maps, &SamplingMask::full(nf, ny, nx), a.noise, a.seed)?;
        let mut y = augment(&full, flags)?;
        apply_mask(&mut y, &mask);
        eprintln!("augment: hflip={} vflip={} time_reverse={}", flags.hflip, flags.vflip, flags.time_reverse);
        y
    };
    write_array(&a.out, &Array::KSpace(y))
}

/// Recursively overlays `patch` onto `base`.
fn merge_json(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge_json(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn load_config(path: Option<&Path>) -> Result<MethodConfig, Error> {
    let defaults = MethodConfig::default();
    let Some(path) = path else { return Ok(defaults) };
    let text = std::fs::read_to_string(path)?;
    let patch: Value = serde_json::from_str(&text)
        .map_err(|e| Error::Format { offset: e.column(), message: format!("{}: {e}", path.display()) })?;
    let mut merged = serde_json::to_value(&defaults).expect("config serializes");
    merge_json(&mut merged, patch);
    serde_json::from_value(merged).map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))
}

fn apply_flags(cfg: &mut MethodConfig, f: &SolverFlags) {
    let v = &mut cfg.vsharp;
    if let Some(x) = f.iterations {
        v.iterations = x;
    }
    if let Some(x) = f.gd_steps {
        v.gd_steps = x;
    }
    if let Some(x) = f.rho {
        v.rho = x;
    }
    if f.step_size.is_some() {
        v.step_size = f.step_size;
    }
    if let Some(x) = f.denoiser {
        v.denoiser.kind = x;
    }
    if let Some(x) = f.lambda {
        v.denoiser.lambda = x;
    }
    if let Some(x) = f.tv_iterations {
        v.denoiser.tv_iterations = x;
        cfg.arn.regularizer.tv_iterations = x;
    }
    if let Some(x) = f.per_iterate_dc {
        v.per_iterate_dc = x;
    }
    if let Some(x) = f.u_init {
        v.u_init = x;
    }
    let r = &mut cfg.arn;
    if let Some(x) = f.arn_cascades {
        r.cascades = x;
    }
    if let Some(x) = f.arn_eta {
        r.eta = x;
    }
    if let Some(x) = f.arn_regularizer {
        r.regularizer.kind = x;
    }
    if let Some(x) = f.arn_lambda {
        r.regularizer.lambda = x;
    }
    let s = &mut cfg.sense;
    if let Some(x) = f.sense_mu {
        s.mu = x;
    }
    if let Some(x) = f.sense_iterations {
        s.iterations = x;
    }
    if let Some(x) = f.sense_tol {
        s.tol = x;
    }
}

fn recon(a: ReconArgs) -> Result<(), Error> {
    let mut cfg = load_config(a.config.as_deref())?;
    apply_flags(&mut cfg, &a.solver);
    let y = read_kspace(&a.kspace)?;
    let mask = read_mask(&a.mask)?;
    let maps = match &a.maps {
        Some(p) => read_maps(p)?,
        None => estimate_sensitivities(&y, &acs_region(&mask, a.calibration_width)?, DEFAULT_EPS)?,
    };
    if a.trace.is_some() && matches!(a.method, Method::ZeroFilled | Method::Sense) {
        return Err(Error::InvalidParameter(format!("--trace needs an unrolled method, got {}", a.method)));
    }
    let op = AcquisitionOperator::new(maps, mask)?;
    let out = run_method(a.method, &y, &op, &cfg)?;
    write_array(&a.out, &Array::Image(out.image.clone()))?;
    if let (Some(dir), Some(trace)) = (&a.trace, &out.trace) {
        std::fs::create_dir_all(dir)?;
        write_trace(dir, trace)?;
    }
    if let Some(p) = &a.png {
        write_png(p, &out.image)?;
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<(), Error> {
    let pred = read_image(&a.pred)?;
    let reference = read_image(&a.reference)?;
    let metrics = evaluate_volume(&pred, &reference)?;
    let report = ReconReport::new(&a.method, &a.volume, a.acceleration, &a.scheme, metrics, 0.0);
    println!("ssim {:.6} psnr {:.6} nmse {:.6}", report.ssim, report.psnr, report.nmse);
    write_report(&a.csv, &a.json, &[report])
}

fn bench(a: BenchArgs) -> Result<(), Error> {
    let cfg = SuiteConfig::preset(&a.preset)?;
    let threads = match a.threads {
        Some(0) => return Err(Error::InvalidParameter("--threads must be positive".into())),
        Some(t) => t,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    std::fs::create_dir_all(&a.out)?;
    let results = run_suite(&cfg, threads)?;
    let mut reports = Vec::new();
    for (case, outcomes) in &results {
        for o in outcomes {
            if !a.no_png {
                let dir = a.out.join("png");
                std::fs::create_dir_all(&dir)?;
                write_png(&dir.join(format!("{case}_{}.png", o.report.method)), &o.reconstruction.image)?;
            }
            eprintln!("{case:<16} {:<12} ssim {:.4} psnr {:.3} nmse {:.5}", o.report.method, o.report.ssim, o.report.psnr, o.report.nmse);
            reports.push(o.report.clone());
        }
    }
    write_report(&a.out.join("report.csv"), &a.out.join("report.json"), &reports)?;
    for (method, mean) in mean_by_method(&reports, |r| r.ssim) {
        println!("{method:<12} mean ssim {mean:.6}");
    }
    Ok(())
}
