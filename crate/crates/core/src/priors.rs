//! Proximal denoisers for the auxiliary-variable update.
//!
//! A denoiser receives the current image, the previous auxiliary variable and the
//! scaled multiplier, and returns `argmin_z G(z) + (ρ/2)‖x − z + u/ρ‖²`. The
//! implementations here are exact (or, for TV, iterative) proximal maps of
//! classical priors applied frame by frame; learned denoisers fit the same trait.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::array::{DynamicImage, C64};
use crate::error::{dim_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenoiserKind {
    Identity,
    SoftThreshold,
    WaveletSoftThreshold,
    Tv,
}

impl DenoiserKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DenoiserKind::Identity => "identity",
            DenoiserKind::SoftThreshold => "soft_threshold",
            DenoiserKind::WaveletSoftThreshold => "wavelet",
            DenoiserKind::Tv => "tv",
        }
    }
}

impl fmt::Display for DenoiserKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DenoiserKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(DenoiserKind::Identity),
            "soft_threshold" | "soft-threshold" => Ok(DenoiserKind::SoftThreshold),
            "wavelet" | "wavelet_soft_threshold" => Ok(DenoiserKind::WaveletSoftThreshold),
            "tv" => Ok(DenoiserKind::Tv),
            other => Err(Error::InvalidParameter(format!("unknown denoiser '{other}'"))),
        }
    }
}

pub const TV_STEP: f64 = 0.249;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenoiserSpec {
    pub kind: DenoiserKind,
    pub lambda: f64,
    pub tv_iterations: usize,
}

impl Default for DenoiserSpec {
    fn default() -> Self {
        Self { kind: DenoiserKind::Identity, lambda: 0.0, tv_iterations: 20 }
    }
}

impl DenoiserSpec {
    pub fn new(kind: DenoiserKind, lambda: f64) -> Self {
        Self { kind, lambda, ..Self::default() }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda must be finite and ≥ 0, got {}", self.lambda)));
        }
        if self.kind == DenoiserKind::Tv && self.tv_iterations == 0 {
            return Err(Error::InvalidParameter("tv_iterations must be positive".into()));
        }
        Ok(())
    }
}

/// The z-update contract `D(x, z, u/ρ)`.
pub trait Denoiser {
    fn denoise(
        &self,
        x: &DynamicImage,
        z: &DynamicImage,
        u_over_rho: &DynamicImage,
        rho: f64,
    ) -> Result<DynamicImage>;
}

impl Denoiser for DenoiserSpec {
    fn denoise(
        &self,
        x: &DynamicImage,
        z: &DynamicImage,
        u_over_rho: &DynamicImage,
        rho: f64,
    ) -> Result<DynamicImage> {
        denoise(x, z, u_over_rho, rho, self)
    }
}

/// `prox_{G/ρ}(x + u/ρ)` for the prior selected by `spec`. The previous auxiliary
/// variable `z` only fixes the shape: exact proximal maps do not depend on it.
pub fn denoise(
    x: &DynamicImage,
    z: &DynamicImage,
    u_over_rho: &DynamicImage,
    rho: f64,
    spec: &DenoiserSpec,
) -> Result<DynamicImage> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter(format!("rho must be positive, got {rho}")));
    }
    spec.validate()?;
    x.same_shape(z)?;
    x.same_shape(u_over_rho)?;

    let mut v = x.clone();
    for (a, b) in v.data_mut().iter_mut().zip(u_over_rho.data()) {
        *a += b;
    }
    let threshold = spec.lambda / rho;
    if spec.kind == DenoiserKind::Identity || threshold == 0.0 {
        return Ok(v);
    }
    let (nf, ny, nx) = v.shape();
    for f in 0..nf {
        let frame = v.frame_mut(f);
        match spec.kind {
            DenoiserKind::Identity => unreachable!(),
            DenoiserKind::SoftThreshold => {
                frame.iter_mut().for_each(|c| *c = soft_threshold(*c, threshold));
            }
            DenoiserKind::WaveletSoftThreshold => {
                let mut coeffs = HaarCoefficients::analyze(frame, ny, nx)?;
                coeffs.data.iter_mut().for_each(|c| *c = soft_threshold(*c, threshold));
                frame.copy_from_slice(&coeffs.synthesize());
            }
            DenoiserKind::Tv => {
                let out = tv_prox(frame, ny, nx, threshold, spec.tv_iterations)?;
                frame.copy_from_slice(&out);
            }
        }
    }
    Ok(v)
}

/// Complex soft-thresholding: shrink the magnitude by `t`, keep the phase.
pub fn soft_threshold(v: C64, t: f64) -> C64 {
    let mag = v.norm();
    if mag <= t {
        C64::new(0.0, 0.0)
    } else {
        v * ((mag - t) / mag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Single-level orthonormal 2D Haar transform of an even-sized frame.
///
/// Quadrant layout: LL top-left, LH top-right, HL bottom-left, HH bottom-right.
/// For a 2×2 block `[[a, b], [c, d]]`: LL = (a+b+c+d)/2, LH = (a−b+c−d)/2,
/// HL = (a+b−c−d)/2, HH = (a−b−c+d)/2.
pub fn haar2d(data: &[C64], ny: usize, nx: usize, direction: Direction) -> Result<Vec<C64>> {
    if ny < 2 || nx < 2 || ny % 2 != 0 || nx % 2 != 0 {
        return dim_err(format!("haar2d needs even dimensions, got {ny}x{nx}"));
    }
    if data.len() != ny * nx {
        return dim_err(format!("haar2d: {} values for {ny}x{nx}", data.len()));
    }
    let (hy, hx) = (ny / 2, nx / 2);
    let mut out = vec![C64::new(0.0, 0.0); ny * nx];
    for i in 0..hy {
        for j in 0..hx {
            let ll = i * nx + j;
            let lh = i * nx + j + hx;
            let hl = (i + hy) * nx + j;
            let hh = (i + hy) * nx + j + hx;
            let tl = 2 * i * nx + 2 * j;
            let tr = tl + 1;
            let bl = tl + nx;
            let br = bl + 1;
            match direction {
                Direction::Forward => {
                    let (a, b, c, d) = (data[tl], data[tr], data[bl], data[br]);
                    out[ll] = (a + b + c + d) * 0.5;
                    out[lh] = (a - b + c - d) * 0.5;
                    out[hl] = (a + b - c - d) * 0.5;
                    out[hh] = (a - b - c + d) * 0.5;
                }
                Direction::Inverse => {
                    let (s, h, v, g) = (data[ll], data[lh], data[hl], data[hh]);
                    out[tl] = (s + h + v + g) * 0.5;
                    out[tr] = (s - h + v - g) * 0.5;
                    out[bl] = (s + h - v - g) * 0.5;
                    out[br] = (s - h - v + g) * 0.5;
                }
            }
        }
    }
    Ok(out)
}

/// Haar coefficients of a frame padded to even size by edge replication. The
/// original size is kept so synthesis crops back exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct HaarCoefficients {
    pub data: Vec<C64>,
    pub padded: (usize, usize),
    pub original: (usize, usize),
}

impl HaarCoefficients {
    pub fn analyze(frame: &[C64], ny: usize, nx: usize) -> Result<Self> {
        if frame.len() != ny * nx {
            return dim_err(format!("haar: {} values for {ny}x{nx}", frame.len()));
        }
        let (py, px) = (ny.max(2).next_multiple_of(2), nx.max(2).next_multiple_of(2));
        let padded: Vec<C64> = (0..py)
            .flat_map(|r| (0..px).map(move |c| (r.min(ny - 1), c.min(nx - 1))))
            .map(|(r, c)| frame[r * nx + c])
            .collect();
        Ok(Self {
            data: haar2d(&padded, py, px, Direction::Forward)?,
            padded: (py, px),
            original: (ny, nx),
        })
    }

    pub fn synthesize(&self) -> Vec<C64> {
        let (py, px) = self.padded;
        let (ny, nx) = self.original;
        let full = haar2d(&self.data, py, px, Direction::Inverse).expect("padded size is even");
        (0..ny).flat_map(|r| full[r * px..r * px + nx].iter().copied()).collect()
    }
}

fn gradient(u: &[C64], ny: usize, nx: usize, gr: &mut [C64], gc: &mut [C64]) {
    for r in 0..ny {
        for c in 0..nx {
            let i = r * nx + c;
            gr[i] = if r + 1 < ny { u[i + nx] - u[i] } else { C64::new(0.0, 0.0) };
            gc[i] = if c + 1 < nx { u[i + 1] - u[i] } else { C64::new(0.0, 0.0) };
        }
    }
}

/// Negative adjoint of the forward-difference gradient.
fn divergence(pr: &[C64], pc: &[C64], ny: usize, nx: usize, out: &mut [C64]) {
    for r in 0..ny {
        for c in 0..nx {
            let i = r * nx + c;
            let dr = if r == 0 {
                pr[i]
            } else if r + 1 == ny {
                -pr[i - nx]
            } else {
                pr[i] - pr[i - nx]
            };
            let dc = if c == 0 {
                pc[i]
            } else if c + 1 == nx {
                -pc[i - 1]
            } else {
                pc[i] - pc[i - 1]
            };
            out[i] = dr + dc;
        }
    }
}

/// Isotropic TV proximal map `argmin_z ½‖z − v‖² + weight·TV(z)` by dual
/// projection (fixed step 0.249, `iterations` sweeps from a zero dual).
pub fn tv_prox(v: &[C64], ny: usize, nx: usize, weight: f64, iterations: usize) -> Result<Vec<C64>> {
    if v.len() != ny * nx {
        return dim_err(format!("tv_prox: {} values for {ny}x{nx}", v.len()));
    }
    if weight == 0.0 {
        return Ok(v.to_vec());
    }
    let n = ny * nx;
    let zero = C64::new(0.0, 0.0);
    let (mut pr, mut pc) = (vec![zero; n], vec![zero; n]);
    let (mut gr, mut gc) = (vec![zero; n], vec![zero; n]);
    let mut div = vec![zero; n];
    let mut work = vec![zero; n];
    for _ in 0..iterations {
        divergence(&pr, &pc, ny, nx, &mut div);
        for ((w, d), s) in work.iter_mut().zip(&div).zip(v) {
            *w = d - s / weight;
        }
        gradient(&work, ny, nx, &mut gr, &mut gc);
        for i in 0..n {
            let mag = (gr[i].norm_sqr() + gc[i].norm_sqr()).sqrt();
            let denom = 1.0 + TV_STEP * mag;
            pr[i] = (pr[i] + gr[i] * TV_STEP) / denom;
            pc[i] = (pc[i] + gc[i] * TV_STEP) / denom;
        }
    }
    divergence(&pr, &pc, ny, nx, &mut div);
    Ok(v.iter().zip(&div).map(|(s, d)| s - d * weight).collect())
}

/// Isotropic total variation with forward differences.
pub fn total_variation(u: &[C64], ny: usize, nx: usize) -> f64 {
    let n = ny * nx;
    let (mut gr, mut gc) = (vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n]);
    gradient(u, ny, nx, &mut gr, &mut gc);
    gr.iter().zip(&gc).map(|(a, b)| (a.norm_sqr() + b.norm_sqr()).sqrt()).sum()
}
