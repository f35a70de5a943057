//! Coil sensitivity estimation from the autocalibration region.
//!
//! The measured k-space is averaged over frames, restricted to the calibration
//! region with a Hann taper, transformed to low-resolution coil images `c_k`, and
//! normalized by their root-sum-of-squares.

use std::f64::consts::PI;

use crate::array::{MultiCoilKSpace, SamplingMask, SensitivityMaps, C64};
use crate::error::{dim_err, Error, Result};
use crate::fourier::ifft2c;

pub const DEFAULT_EPS: f64 = 1e-9;

/// Support flag threshold relative to the largest coil RSS.
pub const SUPPORT_THRESHOLD: f64 = 1e-3;

/// Narrowest fully sampled center block accepted as an ACS region.
pub const MIN_ACS_WIDTH: usize = 4;

/// Post-processing seam for estimated maps.
pub trait SensitivityRefiner {
    fn refine(&self, maps: SensitivityMaps) -> Result<SensitivityMaps>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityRefiner;

impl SensitivityRefiner for IdentityRefiner {
    fn refine(&self, maps: SensitivityMaps) -> Result<SensitivityMaps> {
        Ok(maps)
    }
}

fn column_fully_sampled(mask: &SamplingMask, c: usize) -> bool {
    (0..mask.nf()).all(|f| (0..mask.ny()).all(|r| mask.is_sampled(f, r, c)))
}

/// Calibration region of a mask.
///
/// When the columns around `nx/2` are sampled in every row of every frame, the
/// widest such contiguous block is used (at least [`MIN_ACS_WIDTH`] columns).
/// Otherwise (radial and sparse patterns) the region is the sampled part of a
/// centered `fallback_width × fallback_width` square.
pub fn acs_region(mask: &SamplingMask, fallback_width: usize) -> Result<SamplingMask> {
    let (nf, ny, nx) = mask.shape();
    let center = nx / 2;
    if column_fully_sampled(mask, center) {
        let mut lo = center;
        while lo > 0 && column_fully_sampled(mask, lo - 1) {
            lo -= 1;
        }
        let mut hi = center + 1;
        while hi < nx && column_fully_sampled(mask, hi) {
            hi += 1;
        }
        if hi - lo >= MIN_ACS_WIDTH {
            return SamplingMask::from_columns(nf, ny, nx, vec![(lo..hi).collect(); nf]);
        }
    }
    let w = fallback_width.max(2);
    let rows = crate::sampling::acs_columns(ny, w.min(ny));
    let cols = crate::sampling::acs_columns(nx, w.min(nx));
    let mut data = vec![0u8; nf * ny * nx];
    for f in 0..nf {
        for r in rows.clone() {
            for c in cols.clone() {
                if mask.is_sampled(f, r, c) {
                    data[(f * ny + r) * nx + c] = 1;
                }
            }
        }
    }
    SamplingMask::new(nf, ny, nx, data)
}

/// Symmetric Hann weights over `[lo, hi)` that stay strictly positive at the ends.
fn hann_weights(n: usize, lo: usize, hi: usize) -> Vec<f64> {
    let width = (hi - lo) as f64;
    (0..n)
        .map(|i| {
            if i < lo || i >= hi {
                0.0
            } else {
                0.5 - 0.5 * (2.0 * PI * (i - lo + 1) as f64 / (width + 1.0)).cos()
            }
        })
        .collect()
}

fn span(flags: impl Iterator<Item = bool>) -> Option<(usize, usize)> {
    let mut lo = None;
    let mut hi = 0;
    for (i, on) in flags.enumerate() {
        if on {
            lo.get_or_insert(i);
            hi = i + 1;
        }
    }
    lo.map(|l| (l, hi))
}

/// Estimate per-coil maps `S_k = c_k / √(rss² + (eps·max rss)²)` from the
/// calibration entries of `y`.
///
/// Frame averaging counts only frames where an entry lies in the calibration
/// region. The taper runs along each axis on which the region does not span the
/// whole frame (columns for a Cartesian ACS block).
pub fn estimate_sensitivities(y: &MultiCoilKSpace, acs_mask: &SamplingMask, eps: f64) -> Result<SensitivityMaps> {
    let (nc, nf, ny, nx) = y.shape();
    if acs_mask.shape() != (nf, ny, nx) {
        return dim_err(format!("k-space {:?} vs calibration mask {:?}", y.shape(), acs_mask.shape()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let n = ny * nx;
    let counts: Vec<usize> = (0..n)
        .map(|p| (0..nf).filter(|&f| acs_mask.frame(f)[p] == 1).count())
        .collect();
    if counts.iter().all(|&c| c == 0) {
        return Err(Error::Calibration("calibration region is empty".into()));
    }

    let (r0, r1) = span((0..ny).map(|r| (0..nx).any(|c| counts[r * nx + c] > 0))).expect("nonempty");
    let (c0, c1) = span((0..nx).map(|c| (0..ny).any(|r| counts[r * nx + c] > 0))).expect("nonempty");
    let row_taper = if r1 - r0 < ny { hann_weights(ny, r0, r1) } else { vec![1.0; ny] };
    let col_taper = if c1 - c0 < nx { hann_weights(nx, c0, c1) } else { vec![1.0; nx] };

    let mut low_res = Vec::with_capacity(nc * n);
    for coil in 0..nc {
        let mut acc = vec![C64::new(0.0, 0.0); n];
        for f in 0..nf {
            for ((a, &v), &u) in acc.iter_mut().zip(y.slice(coil, f)).zip(acs_mask.frame(f)) {
                if u == 1 {
                    *a += v;
                }
            }
        }
        for r in 0..ny {
            for c in 0..nx {
                let p = r * nx + c;
                acc[p] = if counts[p] == 0 {
                    C64::new(0.0, 0.0)
                } else {
                    acc[p] * (row_taper[r] * col_taper[c] / counts[p] as f64)
                };
            }
        }
        low_res.extend(ifft2c(&acc, ny, nx)?);
    }

    let rss: Vec<f64> = (0..n)
        .map(|p| (0..nc).map(|k| low_res[k * n + p].norm_sqr()).sum::<f64>().sqrt())
        .collect();
    let peak = rss.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::Calibration("calibration data is identically zero".into()));
    }
    let floor = (eps * peak).powi(2);
    for k in 0..nc {
        for p in 0..n {
            low_res[k * n + p] /= (rss[p] * rss[p] + floor).sqrt();
        }
    }
    let support = rss.iter().map(|&r| r > SUPPORT_THRESHOLD * peak).collect();
    SensitivityMaps::with_support(nc, ny, nx, low_res, support)
}
