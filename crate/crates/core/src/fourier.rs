//! Centered orthonormal 2D DFT and the multi-coil acquisition operators.
//!
//! `fft2c` puts the zero frequency at `(ny/2, nx/2)` (integer division) and scales
//! by `1/√(ny·nx)` in both directions, so the forward operator
//! `y_k,f = U_f ⊙ F(S_k ⊙ x_f)` has norm at most one when the coil maps satisfy
//! `Σ_k |S_k|² ≤ 1`.

use std::cell::RefCell;

use rustfft::{FftDirection, FftPlanner};

use crate::array::{DynamicImage, MultiCoilKSpace, SamplingMask, SensitivityMaps, C64};
use crate::error::{dim_err, Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn centered_transform(data: &[C64], ny: usize, nx: usize, direction: FftDirection) -> Vec<C64> {
    let n = ny * nx;
    debug_assert_eq!(data.len(), n);
    let (row_fft, col_fft) = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft(nx, direction), p.plan_fft(ny, direction))
    });
    let (sy, sx) = (ny / 2, nx / 2);

    // ifftshift
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for r in 0..ny {
        let src = ((r + sy) % ny) * nx;
        let dst = &mut buf[r * nx..(r + 1) * nx];
        for (c, v) in dst.iter_mut().enumerate() {
            *v = data[src + (c + sx) % nx];
        }
    }
    row_fft.process(&mut buf);

    let mut cols = vec![C64::new(0.0, 0.0); n];
    for r in 0..ny {
        for c in 0..nx {
            cols[c * ny + r] = buf[r * nx + c];
        }
    }
    col_fft.process(&mut cols);

    // fftshift back into row-major order
    let scale = 1.0 / (n as f64).sqrt();
    for c in 0..nx {
        let dc = (c + sx) % nx;
        for r in 0..ny {
            buf[((r + sy) % ny) * nx + dc] = cols[c * ny + r] * scale;
        }
    }
    buf
}

fn check_frame(data: &[C64], ny: usize, nx: usize) -> Result<()> {
    if ny < 2 || nx < 2 {
        return dim_err(format!("fft2c needs at least 2x2, got {ny}x{nx}"));
    }
    if data.len() != ny * nx {
        return dim_err(format!("fft2c: {} values for a {ny}x{nx} frame", data.len()));
    }
    if let Some(i) = data.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Numeric(format!("fft2c: non-finite input at index {i}")));
    }
    Ok(())
}

/// Centered orthonormal forward 2D DFT of one row-major `ny × nx` frame.
pub fn fft2c(data: &[C64], ny: usize, nx: usize) -> Result<Vec<C64>> {
    check_frame(data, ny, nx)?;
    Ok(centered_transform(data, ny, nx, FftDirection::Forward))
}

/// Exact inverse of [`fft2c`].
pub fn ifft2c(data: &[C64], ny: usize, nx: usize) -> Result<Vec<C64>> {
    check_frame(data, ny, nx)?;
    Ok(centered_transform(data, ny, nx, FftDirection::Inverse))
}

/// The masked multi-coil Fourier operator `T_{U,S}`.
#[derive(Debug, Clone)]
pub struct AcquisitionOperator {
    maps: SensitivityMaps,
    mask: SamplingMask,
}

impl AcquisitionOperator {
    pub fn new(maps: SensitivityMaps, mask: SamplingMask) -> Result<Self> {
        if (maps.ny(), maps.nx()) != (mask.ny(), mask.nx()) {
            return dim_err(format!(
                "maps are {}x{} but mask is {}x{}",
                maps.ny(),
                maps.nx(),
                mask.ny(),
                mask.nx()
            ));
        }
        Ok(Self { maps, mask })
    }

    pub fn maps(&self) -> &SensitivityMaps {
        &self.maps
    }
    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    pub(crate) fn check_image(&self, x: &DynamicImage) -> Result<()> {
        if x.shape() != self.mask.shape() {
            return dim_err(format!("image shape {:?} vs operator {:?}", x.shape(), self.mask.shape()));
        }
        Ok(())
    }

    pub(crate) fn check_kspace(&self, y: &MultiCoilKSpace) -> Result<()> {
        let (nf, ny, nx) = self.mask.shape();
        if y.shape() != (self.maps.nc(), nf, ny, nx) {
            return dim_err(format!(
                "k-space shape {:?} vs operator {:?}",
                y.shape(),
                (self.maps.nc(), nf, ny, nx)
            ));
        }
        Ok(())
    }
}

fn check_maps_image(maps: &SensitivityMaps, x: &DynamicImage) -> Result<()> {
    if (maps.ny(), maps.nx()) != (x.ny(), x.nx()) {
        return dim_err(format!(
            "image frames are {}x{} but maps are {}x{}",
            x.ny(),
            x.nx(),
            maps.ny(),
            maps.nx()
        ));
    }
    Ok(())
}

fn check_maps_kspace(maps: &SensitivityMaps, k: &MultiCoilKSpace) -> Result<()> {
    if (maps.nc(), maps.ny(), maps.nx()) != (k.nc(), k.ny(), k.nx()) {
        return dim_err(format!(
            "k-space {:?} does not match maps ({}, {}, {})",
            k.shape(),
            maps.nc(),
            maps.ny(),
            maps.nx()
        ));
    }
    Ok(())
}

/// Unmasked coil expansion: `k_k,f = F(S_k ⊙ x_f)` for every coil and frame.
pub fn expand(x: &DynamicImage, maps: &SensitivityMaps) -> Result<MultiCoilKSpace> {
    check_maps_image(maps, x)?;
    let (nf, ny, nx) = x.shape();
    let mut out = MultiCoilKSpace::zeros(maps.nc(), nf, ny, nx);
    let mut weighted = vec![C64::new(0.0, 0.0); ny * nx];
    for k in 0..maps.nc() {
        let s = maps.map(k);
        for f in 0..nf {
            for ((w, &sv), &xv) in weighted.iter_mut().zip(s).zip(x.frame(f)) {
                *w = sv * xv;
            }
            let spectrum = centered_transform(&weighted, ny, nx, FftDirection::Forward);
            out.slice_mut(k, f).copy_from_slice(&spectrum);
        }
    }
    Ok(out)
}

/// Unmasked coil combination: `x_f = Σ_k conj(S_k) ⊙ F⁻¹(k_k,f)`.
pub fn combine(k: &MultiCoilKSpace, maps: &SensitivityMaps) -> Result<DynamicImage> {
    check_maps_kspace(maps, k)?;
    combine_with(k, maps, None)
}

fn combine_with(k: &MultiCoilKSpace, maps: &SensitivityMaps, mask: Option<&SamplingMask>) -> Result<DynamicImage> {
    let (nc, nf, ny, nx) = k.shape();
    let mut out = DynamicImage::zeros(nf, ny, nx);
    let mut masked = vec![C64::new(0.0, 0.0); ny * nx];
    for f in 0..nf {
        for coil in 0..nc {
            let src = k.slice(coil, f);
            let image = match mask {
                Some(m) => {
                    for ((dst, &v), &u) in masked.iter_mut().zip(src).zip(m.frame(f)) {
                        *dst = if u == 1 { v } else { C64::new(0.0, 0.0) };
                    }
                    centered_transform(&masked, ny, nx, FftDirection::Inverse)
                }
                None => centered_transform(src, ny, nx, FftDirection::Inverse),
            };
            let s = maps.map(coil);
            for ((acc, &sv), iv) in out.frame_mut(f).iter_mut().zip(s).zip(image) {
                *acc += sv.conj() * iv;
            }
        }
    }
    Ok(out)
}

/// `T_{U,S}(x)`: entries off the mask are exactly zero.
pub fn forward(x: &DynamicImage, op: &AcquisitionOperator) -> Result<MultiCoilKSpace> {
    op.check_image(x)?;
    let mut out = expand(x, &op.maps)?;
    apply_mask(&mut out, &op.mask);
    Ok(out)
}

/// `T_{U,S}ᴴ(y) = Σ_k conj(S_k) ⊙ F⁻¹(U ⊙ y_k)`.
pub fn adjoint(y: &MultiCoilKSpace, op: &AcquisitionOperator) -> Result<DynamicImage> {
    op.check_kspace(y)?;
    combine_with(y, &op.maps, Some(&op.mask))
}

/// Zero every unsampled entry in place.
pub fn apply_mask(k: &mut MultiCoilKSpace, mask: &SamplingMask) {
    let (nc, nf, _, _) = k.shape();
    for coil in 0..nc {
        for f in 0..nf {
            for (v, &u) in k.slice_mut(coil, f).iter_mut().zip(mask.frame(f)) {
                if u == 0 {
                    *v = C64::new(0.0, 0.0);
                }
            }
        }
    }
}

/// Hard data consistency `U(y) + (1 − U)(w)`, implemented as a per-entry select.
pub fn dc(w: &MultiCoilKSpace, y: &MultiCoilKSpace, mask: &SamplingMask) -> Result<MultiCoilKSpace> {
    w.same_shape(y)?;
    if (w.nf(), w.ny(), w.nx()) != mask.shape() {
        return dim_err(format!("k-space {:?} vs mask {:?}", w.shape(), mask.shape()));
    }
    let mut out = w.clone();
    for coil in 0..w.nc() {
        for f in 0..w.nf() {
            let measured = y.slice(coil, f);
            for ((v, &m), &u) in out.slice_mut(coil, f).iter_mut().zip(measured).zip(mask.frame(f)) {
                if u == 1 {
                    *v = m;
                }
            }
        }
    }
    Ok(out)
}

/// Replace the measured entries of the coil k-space of `x` by `y` and coil-combine
/// the result. Returns `(x̂, ŷ)`.
pub fn project_iterate(
    x: &DynamicImage,
    y: &MultiCoilKSpace,
    op: &AcquisitionOperator,
) -> Result<(DynamicImage, MultiCoilKSpace)> {
    op.check_image(x)?;
    op.check_kspace(y)?;
    let predicted = expand(x, &op.maps)?;
    let y_hat = dc(&predicted, y, &op.mask)?;
    let x_hat = combine_with(&y_hat, &op.maps, None)?;
    Ok((x_hat, y_hat))
}
