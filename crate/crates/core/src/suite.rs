//! Seeded desk-scale comparison: phantom volumes undersampled with every scheme
//! and acceleration, reconstructed by every method, scored against ground truth.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::arn::{init_z0, refine, ArnConfig};
use crate::array::{DynamicImage, MultiCoilKSpace, SamplingMask, SensitivityMaps};
use crate::baselines::{cg_sense, zero_filled, SenseConfig};
use crate::calibration::{acs_region, estimate_sensitivities, DEFAULT_EPS};
use crate::error::{Error, Result};
use crate::fourier::AcquisitionOperator;
use crate::metrics::{evaluate_volume, ReconReport};
use crate::phantom::{coil_maps, generate_phantom, simulate, PhantomSpec};
use crate::priors::{DenoiserKind, DenoiserSpec};
use crate::sampling::{generate, MaskSpec, Scheme};
use crate::vsharp::{reconstruct, SolveTrace, VSharpConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "zero-filled")]
    ZeroFilled,
    #[serde(rename = "sense")]
    Sense,
    #[serde(rename = "vsharp")]
    VSharp,
    #[serde(rename = "vsharp-arn")]
    VSharpArn,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::ZeroFilled, Method::Sense, Method::VSharp, Method::VSharpArn];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::ZeroFilled => "zero-filled",
            Method::Sense => "sense",
            Method::VSharp => "vsharp",
            Method::VSharpArn => "vsharp-arn",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method '{s}'")))
    }
}

/// Everything a single reconstruction needs besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub vsharp: VSharpConfig,
    pub arn: ArnConfig,
    pub sense: SenseConfig,
}

impl Default for MethodConfig {
    fn default() -> Self {
        let prior = DenoiserSpec::new(DenoiserKind::WaveletSoftThreshold, DESK_LAMBDA);
        Self {
            vsharp: VSharpConfig { denoiser: prior.clone(), ..VSharpConfig::default() },
            arn: ArnConfig { regularizer: prior, ..ArnConfig::default() },
            sense: SenseConfig::default(),
        }
    }
}

/// Wavelet threshold used by the desk presets.
pub const DESK_LAMBDA: f64 = 1e-2;

pub struct Reconstruction {
    pub image: DynamicImage,
    pub trace: Option<SolveTrace>,
    /// Refined k-space of the auxiliary path, when it ran.
    pub refined: Option<MultiCoilKSpace>,
}

pub fn run_method(
    method: Method,
    y: &MultiCoilKSpace,
    op: &AcquisitionOperator,
    cfg: &MethodConfig,
) -> Result<Reconstruction> {
    match method {
        Method::ZeroFilled => Ok(Reconstruction { image: zero_filled(y, op)?, trace: None, refined: None }),
        Method::Sense => Ok(Reconstruction { image: cg_sense(y, op, &cfg.sense)?, trace: None, refined: None }),
        Method::VSharp => {
            let trace = reconstruct(y, op, &cfg.vsharp, None)?;
            Ok(Reconstruction { image: trace.final_image().clone(), trace: Some(trace), refined: None })
        }
        Method::VSharpArn => {
            let r = refine(y, op, &cfg.arn)?;
            let z0 = init_z0(&r, op)?;
            let trace = reconstruct(y, op, &cfg.vsharp, Some(&z0))?;
            Ok(Reconstruction { image: trace.final_image().clone(), trace: Some(trace), refined: Some(r) })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub ny: usize,
    pub nx: usize,
    pub nf: usize,
    pub nc: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    pub schemes: Vec<Scheme>,
    pub accelerations: Vec<u32>,
    /// Interleave masks across frames.
    pub kt_mode: bool,
    /// Autocalibration block width in columns for Cartesian schemes.
    pub acs_columns: usize,
    /// Side of the centered calibration square used for non-Cartesian masks.
    pub calibration_width: usize,
    pub methods: Vec<Method>,
    pub method_config: MethodConfig,
}

impl SuiteConfig {
    fn base(kt_mode: bool, schemes: Vec<Scheme>) -> Self {
        Self {
            ny: 128,
            nx: 128,
            nf: 12,
            nc: 8,
            noise_sigma: 0.01,
            seed: 0,
            schemes,
            accelerations: vec![4, 8],
            kt_mode,
            acs_columns: 16,
            calibration_width: 24,
            methods: Method::ALL.to_vec(),
            method_config: MethodConfig::default(),
        }
    }

    /// Same mask for every frame, equispaced only.
    pub fn desk_a() -> Self {
        Self::base(false, vec![Scheme::Equispaced])
    }

    /// Interleaved masks, every scheme.
    pub fn desk_b() -> Self {
        Self::base(true, vec![Scheme::Equispaced, Scheme::Gaussian1d, Scheme::Radial])
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk-A" | "desk-a" => Ok(Self::desk_a()),
            "desk-B" | "desk-b" => Ok(Self::desk_b()),
            _ => Err(Error::InvalidParameter(format!("unknown preset '{name}'"))),
        }
    }

    pub fn phantom_spec(&self) -> PhantomSpec {
        PhantomSpec { noise_sigma: self.noise_sigma, seed: self.seed, ..PhantomSpec::new(self.ny, self.nx, self.nf, self.nc) }
    }

    pub fn mask_spec(&self, scheme: Scheme, acceleration: u32) -> MaskSpec {
        let mut spec = MaskSpec::new(scheme, acceleration, self.nf, self.ny, self.nx);
        spec.kt_mode = self.kt_mode;
        spec.seed = self.seed;
        if scheme != Scheme::Radial {
            spec.acs_fraction = self.acs_columns as f64 / self.nx as f64;
        }
        spec
    }

    pub fn cases(&self) -> Vec<(Scheme, u32)> {
        self.schemes
            .iter()
            .flat_map(|&s| self.accelerations.iter().map(move |&r| (s, r)))
            .collect()
    }
}

/// Data shared by all methods of one (scheme, acceleration) case.
pub struct CaseData {
    pub scheme: Scheme,
    pub acceleration: u32,
    pub truth: DynamicImage,
    pub true_maps: SensitivityMaps,
    pub mask: SamplingMask,
    pub y: MultiCoilKSpace,
    /// Operator built from maps estimated on the calibration region.
    pub op: AcquisitionOperator,
}

impl CaseData {
    pub fn name(&self) -> String {
        case_name(self.scheme, self.acceleration)
    }
}

pub fn case_name(scheme: Scheme, acceleration: u32) -> String {
    format!("{}-r{}", scheme.as_str(), acceleration)
}

pub fn prepare_case(cfg: &SuiteConfig, scheme: Scheme, acceleration: u32) -> Result<CaseData> {
    let pspec = cfg.phantom_spec();
    let truth = generate_phantom(&pspec)?;
    let true_maps = coil_maps(&pspec)?;
    let mask = generate(&cfg.mask_spec(scheme, acceleration))?;
    let y = simulate(&truth, &true_maps, &mask, cfg.noise_sigma, cfg.seed)?;
    let region = acs_region(&mask, cfg.calibration_width)?;
    let maps = estimate_sensitivities(&y, &region, DEFAULT_EPS)?;
    let op = AcquisitionOperator::new(maps, mask.clone())?;
    Ok(CaseData { scheme, acceleration, truth, true_maps, mask, y, op })
}

pub struct CaseOutcome {
    pub report: ReconReport,
    pub reconstruction: Reconstruction,
}

pub fn run_case(cfg: &SuiteConfig, case: &CaseData, method: Method) -> Result<CaseOutcome> {
    let start = Instant::now();
    let reconstruction = run_method(method, &case.y, &case.op, &cfg.method_config)?;
    let wall = start.elapsed().as_secs_f64();
    let metrics = evaluate_volume(&reconstruction.image, &case.truth)?;
    let report = ReconReport::new(
        method.as_str(),
        &case.name(),
        case.acceleration,
        case.scheme.as_str(),
        metrics,
        wall,
    );
    Ok(CaseOutcome { report, reconstruction })
}

/// Runs every case, spreading cases over up to `threads` worker threads.
/// Results come back in case order, then method order, whatever the thread count.
pub fn run_suite(cfg: &SuiteConfig, threads: usize) -> Result<Vec<(String, Vec<CaseOutcome>)>> {
    let cases = cfg.cases();
    let threads = threads.max(1).min(cases.len().max(1));
    let run_one = |(scheme, r): (Scheme, u32)| -> Result<(String, Vec<CaseOutcome>)> {
        let data = prepare_case(cfg, scheme, r)?;
        let outcomes = cfg
            .methods
            .iter()
            .map(|&m| run_case(cfg, &data, m))
            .collect::<Result<Vec<_>>>()?;
        Ok((data.name(), outcomes))
    };
    let mut slots: Vec<Option<Result<(String, Vec<CaseOutcome>)>>> = (0..cases.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        for (worker, chunk) in slots.chunks_mut(cases.len().div_ceil(threads)).enumerate() {
            let start = worker * cases.len().div_ceil(threads);
            let cases = &cases;
            let run_one = &run_one;
            s.spawn(move || {
                for (i, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(run_one(cases[start + i]));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("every case ran")).collect()
}

/// Mean of a report field per method, in [`Method::ALL`] order.
pub fn mean_by_method(reports: &[ReconReport], field: impl Fn(&ReconReport) -> f64) -> Vec<(Method, f64)> {
    Method::ALL
        .into_iter()
        .filter_map(|m| {
            let vals: Vec<f64> = reports.iter().filter(|r| r.method == m.as_str()).map(&field).collect();
            (!vals.is_empty()).then(|| (m, vals.iter().sum::<f64>() / vals.len() as f64))
        })
        .collect()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
