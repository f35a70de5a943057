//! Image quality metrics and the dual-domain training loss, used here purely as
//! an evaluator over solve traces.
//!
//! SSIM convention: uniform 7×7 window (3×7×7 for the volumetric variant),
//! stride 1, valid positions only, population statistics, K1 = 0.01,
//! K2 = 0.03, dynamic range = max(ref) − min(ref).

use serde::{Deserialize, Serialize};

use crate::array::{DynamicImage, MultiCoilKSpace, RealImage};
use crate::error::{dim_err, Error, Result};
use crate::vsharp::SolveTrace;

pub const SSIM_WINDOW: usize = 7;
pub const SSIM3D_FRAMES: usize = 3;
pub const K1: f64 = 0.01;
pub const K2: f64 = 0.03;

/// Box sums over every valid `wf×wy×wx` window of a `(nf, ny, nx)` volume,
/// computed separably (columns, then rows, then frames).
fn box_sums(v: &[f64], dims: (usize, usize, usize), win: (usize, usize, usize)) -> Vec<f64> {
    let (nf, ny, nx) = dims;
    let (wf, wy, wx) = win;
    let ox = nx + 1 - wx;
    let oy = ny + 1 - wy;
    let of = nf + 1 - wf;

    let mut sx = vec![0.0; nf * ny * ox];
    for f in 0..nf {
        for r in 0..ny {
            let row = &v[(f * ny + r) * nx..(f * ny + r + 1) * nx];
            let out = &mut sx[(f * ny + r) * ox..(f * ny + r + 1) * ox];
            for (c, o) in out.iter_mut().enumerate() {
                *o = row[c..c + wx].iter().sum();
            }
        }
    }
    let mut sy = vec![0.0; nf * oy * ox];
    for f in 0..nf {
        for r in 0..oy {
            for c in 0..ox {
                sy[(f * oy + r) * ox + c] = (0..wy).map(|k| sx[(f * ny + r + k) * ox + c]).sum();
            }
        }
    }
    let plane = oy * ox;
    let mut sf = vec![0.0; of * plane];
    for f in 0..of {
        for i in 0..plane {
            sf[f * plane + i] = (0..wf).map(|k| sy[(f + k) * plane + i]).sum();
        }
    }
    sf
}

fn dynamic_range(reference: &[f64]) -> Result<f64> {
    let max = reference.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = reference.iter().cloned().fold(f64::INFINITY, f64::min);
    if reference.iter().all(|v| *v == 0.0) {
        return Err(Error::UndefinedMetric("reference is identically zero".into()));
    }
    // a constant nonzero reference has no spread; fall back to its magnitude
    if max > min {
        Ok(max - min)
    } else {
        Ok(max.abs())
    }
}

fn ssim_volume(
    pred: &[f64],
    reference: &[f64],
    dims: (usize, usize, usize),
    win: (usize, usize, usize),
    range: f64,
) -> Result<f64> {
    let (nf, ny, nx) = dims;
    if pred.len() != nf * ny * nx || reference.len() != pred.len() {
        return dim_err("ssim: shape mismatch");
    }
    if nf < win.0 || ny < win.1 || nx < win.2 {
        return dim_err(format!("ssim: {nf}x{ny}x{nx} is smaller than the {}x{}x{} window", win.0, win.1, win.2));
    }
    if !(range > 0.0) || !range.is_finite() {
        return Err(Error::UndefinedMetric(format!("ssim: invalid dynamic range {range}")));
    }
    let c1 = (K1 * range).powi(2);
    let c2 = (K2 * range).powi(2);
    let n = (win.0 * win.1 * win.2) as f64;

    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).collect::<Vec<f64>>();
    let sp = box_sums(pred, dims, win);
    let sr = box_sums(reference, dims, win);
    let spp = box_sums(&sq(pred, pred), dims, win);
    let srr = box_sums(&sq(reference, reference), dims, win);
    let spr = box_sums(&sq(pred, reference), dims, win);

    let mut total = 0.0;
    for i in 0..sp.len() {
        let mx = sp[i] / n;
        let my = sr[i] / n;
        let vx = spp[i] / n - mx * mx;
        let vy = srr[i] / n - my * my;
        let cxy = spr[i] / n - mx * my;
        total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    Ok(total / sp.len() as f64)
}

/// Mean local SSIM of two `ny×nx` planes.
pub fn ssim(pred: &[f64], reference: &[f64], ny: usize, nx: usize) -> Result<f64> {
    if reference.len() != ny * nx {
        return dim_err("ssim: shape mismatch");
    }
    let range = dynamic_range(reference)?;
    ssim_with_range(pred, reference, ny, nx, range)
}

/// SSIM with an explicit dynamic range instead of the reference spread.
pub fn ssim_with_range(pred: &[f64], reference: &[f64], ny: usize, nx: usize, range: f64) -> Result<f64> {
    ssim_volume(pred, reference, (1, ny, nx), (1, SSIM_WINDOW, SSIM_WINDOW), range)
}

/// Volumetric SSIM with a 3×7×7 window.
pub fn ssim3d(pred: &RealImage, reference: &RealImage) -> Result<f64> {
    if pred.shape() != reference.shape() {
        return dim_err("ssim3d: shape mismatch");
    }
    if reference.nf() < SSIM3D_FRAMES {
        return dim_err(format!("ssim3d needs at least {SSIM3D_FRAMES} frames, got {}", reference.nf()));
    }
    let range = dynamic_range(reference.data())?;
    ssim_volume(
        pred.data(),
        reference.data(),
        reference.shape(),
        (SSIM3D_FRAMES, SSIM_WINDOW, SSIM_WINDOW),
        range,
    )
}

/// `20·log10(max|ref| / √MSE)`, `+∞` when the inputs coincide.
pub fn psnr(pred: &[f64], reference: &[f64]) -> Result<f64> {
    if pred.len() != reference.len() || pred.is_empty() {
        return dim_err("psnr: shape mismatch");
    }
    let peak = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Err(Error::UndefinedMetric("psnr: reference is identically zero".into()));
    }
    let mse = pred.iter().zip(reference).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / pred.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * (peak / mse.sqrt()).log10())
}

/// `‖pred − ref‖² / ‖ref‖²`.
pub fn nmse(pred: &[f64], reference: &[f64]) -> Result<f64> {
    if pred.len() != reference.len() {
        return dim_err("nmse: shape mismatch");
    }
    let den: f64 = reference.iter().map(|v| v * v).sum();
    if den == 0.0 {
        return Err(Error::UndefinedMetric("nmse: reference is identically zero".into()));
    }
    Ok(pred.iter().zip(reference).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / den)
}

/// NMSE of complex images.
pub fn nmse_complex(pred: &DynamicImage, reference: &DynamicImage) -> Result<f64> {
    pred.same_shape(reference)?;
    let den: f64 = reference.data().iter().map(|v| v.norm_sqr()).sum();
    if den == 0.0 {
        return Err(Error::UndefinedMetric("nmse: reference is identically zero".into()));
    }
    Ok(pred.data().iter().zip(reference.data()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / den)
}

/// `w_j = 10^((j − N)/(N − 1))` for `j = 1..=N`; a single iteration gets weight 1.
pub fn loss_weights(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (1..=n).map(|j| 10f64.powf((j as f64 - n as f64) / (n as f64 - 1.0))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossTerms {
    /// Σ_t (1 − SSIM) over frames.
    pub ssim: f64,
    /// Σ_t ‖|x_t| − x*_t‖₁.
    pub l1: f64,
    /// ‖k − y*‖₁ / ‖y*‖₁.
    pub kspace: f64,
    /// 1 − SSIM3D; zero when there are fewer than three frames.
    pub ssim3d: f64,
}

impl LossTerms {
    pub fn sum(&self) -> f64 {
        self.ssim + self.l1 + self.kspace + self.ssim3d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub total: f64,
    pub z0: LossTerms,
    pub iterates: Vec<LossTerms>,
    pub weights: Vec<f64>,
}

fn loss_terms(x: &DynamicImage, k: &MultiCoilKSpace, x_star: &RealImage, y_star: &MultiCoilKSpace) -> Result<LossTerms> {
    let mag = x.magnitude();
    if mag.shape() != x_star.shape() {
        return dim_err("loss: image shape differs from ground truth");
    }
    k.same_shape(y_star)?;
    let (nf, ny, nx) = x_star.shape();
    let mut terms = LossTerms::default();
    for t in 0..nf {
        terms.ssim += 1.0 - ssim(mag.frame(t), x_star.frame(t), ny, nx)?;
        terms.l1 += mag.frame(t).iter().zip(x_star.frame(t)).map(|(a, b)| (a - b).abs()).sum::<f64>();
    }
    let den = y_star.l1_norm();
    if den == 0.0 {
        return Err(Error::UndefinedMetric("loss: ground-truth k-space is identically zero".into()));
    }
    terms.kspace = k.data().iter().zip(y_star.data()).map(|(a, b)| (a - b).norm()).sum::<f64>() / den;
    if nf >= SSIM3D_FRAMES {
        terms.ssim3d = 1.0 - ssim3d(&mag, x_star)?;
    }
    Ok(terms)
}

/// Dual-domain loss of a solve trace against fully sampled ground truth.
pub fn vsharp_loss(
    trace: &SolveTrace,
    r: &MultiCoilKSpace,
    x_star: &RealImage,
    y_star: &MultiCoilKSpace,
    n: usize,
) -> Result<LossRecord> {
    if trace.iterates.len() != n || n == 0 {
        return dim_err(format!("loss: trace has {} iterates, expected {n}", trace.iterates.len()));
    }
    let weights = loss_weights(n);
    let z0 = loss_terms(&trace.z0, r, x_star, y_star)?;
    let mut total = z0.sum();
    let mut iterates = Vec::with_capacity(n);
    for ((x_hat, y_hat), w) in trace.iterates.iter().zip(&weights) {
        let terms = loss_terms(x_hat, y_hat, x_star, y_star)?;
        total += w * terms.sum();
        iterates.push(terms);
    }
    Ok(LossRecord { total, z0, iterates, weights })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconReport {
    pub method: String,
    pub volume: String,
    pub acceleration: u32,
    pub scheme: String,
    /// Per-frame SSIM averaged over frames.
    pub ssim: f64,
    /// `None` when the volume has fewer than three frames.
    pub ssim3d: Option<f64>,
    /// Per-frame PSNR averaged over frames.
    pub psnr: f64,
    /// Per-frame NMSE averaged over frames.
    pub nmse: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeMetrics {
    pub ssim: f64,
    pub ssim3d: Option<f64>,
    pub psnr: f64,
    pub nmse: f64,
}

/// Metrics on magnitude images, averaged per frame.
pub fn evaluate_volume(pred: &DynamicImage, reference: &DynamicImage) -> Result<VolumeMetrics> {
    pred.same_shape(reference)?;
    let p = pred.magnitude();
    let r = reference.magnitude();
    let (nf, ny, nx) = r.shape();
    let (mut s, mut ps, mut e) = (0.0, 0.0, 0.0);
    for t in 0..nf {
        s += ssim(p.frame(t), r.frame(t), ny, nx)?;
        ps += psnr(p.frame(t), r.frame(t))?;
        e += nmse(p.frame(t), r.frame(t))?;
    }
    let k = nf as f64;
    let ssim3d = if nf >= SSIM3D_FRAMES { Some(ssim3d(&p, &r)?) } else { None };
    Ok(VolumeMetrics { ssim: s / k, ssim3d, psnr: ps / k, nmse: e / k })
}

impl ReconReport {
    pub fn new(method: &str, volume: &str, acceleration: u32, scheme: &str, m: VolumeMetrics, wall_seconds: f64) -> Self {
        Self {
            method: method.to_string(),
            volume: volume.to_string(),
            acceleration,
            scheme: scheme.to_string(),
            ssim: m.ssim,
            ssim3d: m.ssim3d,
            psnr: m.psnr,
            nmse: m.nmse,
            wall_seconds,
        }
    }
}
