//! Synthetic dynamic cardiac phantom, analytic coil maps, noisy acquisition and
//! image-domain augmentations.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::array::{DynamicImage, MultiCoilKSpace, SamplingMask, SensitivityMaps, C64};
use crate::error::{dim_err, Error, Result};
use crate::fourier::{expand, fft2c, ifft2c};
use crate::rng::Rng;

/// Geometry and intensities of the scene, in fractions of the frame size.
pub mod geometry {
    pub const TORSO_CENTER: (f64, f64) = (0.5, 0.5);
    pub const TORSO_SEMI_AXES: (f64, f64) = (0.45, 0.45);
    pub const TORSO_INTENSITY: f64 = 0.2;

    pub const LUNG_CENTERS: [(f64, f64); 2] = [(0.42, 0.2), (0.42, 0.76)];
    pub const LUNG_SEMI_AXES: (f64, f64) = (0.2, 0.1);
    pub const LUNG_INTENSITY: f64 = 0.05;

    pub const HEART_CENTER: (f64, f64) = (0.5, 0.45);
    pub const HEART_OUTER_RADIUS: f64 = 0.18;
    pub const HEART_INNER_RADIUS: f64 = 0.10;
    pub const WALL_INTENSITY: f64 = 0.9;
    pub const BLOOD_INTENSITY: f64 = 0.5;

    /// Phase ramp `exp(i·PHASE_SLOPE·(row + col)/(ny + nx))`.
    pub const PHASE_SLOPE: f64 = 0.3 * std::f64::consts::PI;

    pub const COIL_RING_RADIUS: f64 = 0.55 / 2.0;
    pub const COIL_SIGMA: f64 = 0.5;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub ny: usize,
    pub nx: usize,
    pub nf: usize,
    pub nc: usize,
    pub beat_amplitude: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl PhantomSpec {
    pub fn new(ny: usize, nx: usize, nf: usize, nc: usize) -> Self {
        Self { ny, nx, nf, nc, beat_amplitude: 0.15, noise_sigma: 0.0, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ny < 32 || self.nx < 32 || self.nf < 2 {
            return Err(Error::InvalidParameter(format!(
                "phantom needs ny, nx ≥ 32 and nf ≥ 2, got {}x{} with {} frames",
                self.ny, self.nx, self.nf
            )));
        }
        if self.nc == 0 {
            return Err(Error::InvalidParameter("phantom needs at least one coil".into()));
        }
        if !(0.0..0.5).contains(&self.beat_amplitude) {
            return Err(Error::InvalidParameter(format!("beat amplitude {} outside [0, 0.5)", self.beat_amplitude)));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::InvalidParameter(format!("noise sigma {} is negative", self.noise_sigma)));
        }
        Ok(())
    }

    fn min_dim(&self) -> f64 {
        self.ny.min(self.nx) as f64
    }

    /// Inner (blood pool) radius of the myocardium in frame `t`, in pixels.
    pub fn inner_radius(&self, t: usize) -> f64 {
        let phase = 2.0 * PI * (t % self.nf) as f64 / self.nf as f64;
        geometry::HEART_INNER_RADIUS * self.min_dim() * (1.0 + self.beat_amplitude * phase.sin())
    }
}

fn in_ellipse(row: f64, col: f64, center: (f64, f64), semi: (f64, f64)) -> bool {
    let dr = (row - center.0) / semi.0;
    let dc = (col - center.1) / semi.1;
    dr * dr + dc * dc <= 1.0
}

/// Real scene intensity at a (possibly fractional) pixel position in frame `t`.
pub fn intensity(spec: &PhantomSpec, t: usize, row: f64, col: f64) -> f64 {
    use geometry::*;
    let (ny, nx) = (spec.ny as f64, spec.nx as f64);
    let mut value = 0.0;
    if in_ellipse(
        row,
        col,
        (TORSO_CENTER.0 * ny, TORSO_CENTER.1 * nx),
        (TORSO_SEMI_AXES.0 * ny, TORSO_SEMI_AXES.1 * nx),
    ) {
        value = TORSO_INTENSITY;
    }
    for center in LUNG_CENTERS {
        if in_ellipse(
            row,
            col,
            (center.0 * ny, center.1 * nx),
            (LUNG_SEMI_AXES.0 * ny, LUNG_SEMI_AXES.1 * nx),
        ) {
            value = LUNG_INTENSITY;
        }
    }
    let d = ((row - HEART_CENTER.0 * ny).powi(2) + (col - HEART_CENTER.1 * nx).powi(2)).sqrt();
    if d <= spec.inner_radius(t) {
        value = BLOOD_INTENSITY;
    } else if d <= HEART_OUTER_RADIUS * spec.min_dim() {
        value = WALL_INTENSITY;
    }
    value
}

/// Complex phantom value: scene intensity times the smooth phase ramp.
pub fn pixel(spec: &PhantomSpec, t: usize, row: f64, col: f64) -> C64 {
    let phase = geometry::PHASE_SLOPE * (row + col) / (spec.ny + spec.nx) as f64;
    C64::from_polar(intensity(spec, t, row, col), phase)
}

pub fn generate_phantom(spec: &PhantomSpec) -> Result<DynamicImage> {
    spec.validate()?;
    let (nf, ny, nx) = (spec.nf, spec.ny, spec.nx);
    let data = (0..nf)
        .flat_map(|t| (0..ny).flat_map(move |r| (0..nx).map(move |c| (t, r, c))))
        .map(|(t, r, c)| pixel(spec, t, r as f64, c as f64))
        .collect();
    DynamicImage::new(nf, ny, nx, data)
}

/// Gaussian receive profiles on a ring around the field of view, normalized so
/// that `Σ_k |S_k|² = 1` at every pixel.
pub fn coil_maps(spec: &PhantomSpec) -> Result<SensitivityMaps> {
    if spec.nc == 0 {
        return Err(Error::InvalidParameter("need at least one coil".into()));
    }
    let (ny, nx, nc) = (spec.ny, spec.nx, spec.nc);
    let (cy, cx) = (ny as f64 / 2.0, nx as f64 / 2.0);
    let ring = geometry::COIL_RING_RADIUS * spec.min_dim();
    let sigma = geometry::COIL_SIGMA * spec.min_dim();
    let mut raw = vec![C64::new(0.0, 0.0); nc * ny * nx];
    for k in 0..nc {
        let angle = 2.0 * PI * k as f64 / nc as f64;
        let (ky, kx) = (cy + ring * angle.sin(), cx + ring * angle.cos());
        for r in 0..ny {
            for c in 0..nx {
                let d2 = (r as f64 - ky).powi(2) + (c as f64 - kx).powi(2);
                raw[(k * ny + r) * nx + c] = C64::from_polar((-d2 / (2.0 * sigma * sigma)).exp(), angle);
            }
        }
    }
    let n = ny * nx;
    for p in 0..n {
        let norm = (0..nc).map(|k| raw[k * n + p].norm_sqr()).sum::<f64>().sqrt();
        for k in 0..nc {
            raw[k * n + p] /= norm;
        }
    }
    SensitivityMaps::new(nc, ny, nx, raw)
}

/// Noisy masked acquisition `U ⊙ (F(S_k x) + n)`.
///
/// The noise is circular complex Gaussian with total standard deviation
/// `noise_sigma · mean|F(S_k x)|`, drawn for every entry (mask or not) in
/// coil, frame, row, column order so the stream is independent of the mask.
pub fn simulate(
    x: &DynamicImage,
    maps: &SensitivityMaps,
    mask: &SamplingMask,
    noise_sigma: f64,
    seed: u64,
) -> Result<MultiCoilKSpace> {
    if x.shape() != mask.shape() {
        return dim_err(format!("image {:?} vs mask {:?}", x.shape(), mask.shape()));
    }
    if !(noise_sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise sigma {noise_sigma} is negative")));
    }
    let mut k = expand(x, maps)?;
    if noise_sigma > 0.0 {
        let mean_mag = k.data().iter().map(|v| v.norm()).sum::<f64>() / k.data().len() as f64;
        let std = noise_sigma * mean_mag;
        let mut rng = Rng::new(seed);
        for v in k.data_mut() {
            *v += rng.complex_normal(std);
        }
    }
    crate::fourier::apply_mask(&mut k, mask);
    Ok(k)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentFlags {
    /// Mirror columns.
    pub hflip: bool,
    /// Mirror rows.
    pub vflip: bool,
    pub time_reverse: bool,
}

/// Image-domain flips and time reversal applied through the centered transform.
pub fn augment(y: &MultiCoilKSpace, flags: AugmentFlags) -> Result<MultiCoilKSpace> {
    let (nc, nf, ny, nx) = y.shape();
    let mut out = MultiCoilKSpace::zeros(nc, nf, ny, nx);
    for coil in 0..nc {
        for f in 0..nf {
            let src_frame = if flags.time_reverse { nf - 1 - f } else { f };
            let src = y.slice(coil, src_frame);
            let spectrum = if flags.hflip || flags.vflip {
                let image = ifft2c(src, ny, nx)?;
                let flipped: Vec<C64> = (0..ny)
                    .flat_map(|r| (0..nx).map(move |c| (r, c)))
                    .map(|(r, c)| {
                        let sr = if flags.vflip { ny - 1 - r } else { r };
                        let sc = if flags.hflip { nx - 1 - c } else { c };
                        image[sr * nx + sc]
                    })
                    .collect();
                fft2c(&flipped, ny, nx)?
            } else {
                src.to_vec()
            };
            out.slice_mut(coil, f).copy_from_slice(&spectrum);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::{adjoint, forward, AcquisitionOperator};

    fn spec() -> PhantomSpec {
        PhantomSpec::new(32, 40, 6, 4)
    }

    #[test]
    fn inner_radius_is_periodic() {
        let s = spec();
        let mut doubled = s.clone();
        doubled.nf *= 2;
        // frame t at nf equals frame 2t at 2nf, and frame t+nf at 2nf repeats frame t
        let a = generate_phantom(&s).unwrap();
        let b = generate_phantom(&doubled).unwrap();
        for t in 0..s.nf {
            assert_eq!(a.frame(t), b.frame(2 * t));
            assert_eq!(s.inner_radius(t), s.inner_radius(t + s.nf));
        }
    }

    #[test]
    fn inner_radius_at_zero_crossings() {
        let s = spec();
        assert_eq!(s.inner_radius(0), 0.10 * 32.0);
    }

    #[test]
    fn annulus_center_is_blood_pool() {
        let s = PhantomSpec::new(64, 80, 5, 1);
        let img = generate_phantom(&s).unwrap();
        // heart center (32, 36) lies on the pixel grid
        let (r, c) = (32, 36);
        for t in 0..s.nf {
            assert!((img.frame(t)[r * 80 + c].norm() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn magnitudes_and_phase() {
        let img = generate_phantom(&spec()).unwrap();
        for v in img.data() {
            assert!((0.0..=0.9 + 1e-12).contains(&v.norm()));
        }
        let (ny, nx) = (32, 40);
        for r in 0..ny {
            for c in 0..nx {
                let v = img.frame(0)[r * nx + c];
                if v.norm() > 0.0 {
                    let expected = geometry::PHASE_SLOPE * (r + c) as f64 / (ny + nx) as f64;
                    assert!((v.arg() - expected).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn validates_spec() {
        assert!(generate_phantom(&PhantomSpec::new(16, 32, 4, 1)).is_err());
        assert!(generate_phantom(&PhantomSpec::new(32, 32, 1, 1)).is_err());
        let mut s = spec();
        s.beat_amplitude = 0.5;
        assert!(generate_phantom(&s).is_err());
    }

    #[test]
    fn coil_maps_are_normalized() {
        for nc in [1, 3, 8] {
            let mut s = spec();
            s.nc = nc;
            let maps = coil_maps(&s).unwrap();
            for e in maps.coil_energy() {
                assert!((e - 1.0).abs() <= 1e-12);
            }
            if nc == 1 {
                assert!(maps.data().iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn nearest_coil_dominates() {
        let s = PhantomSpec::new(64, 64, 2, 8);
        let maps = coil_maps(&s).unwrap();
        // coil 0 sits at angle 0: row 32, column 32 + 0.275*64 = 49.6
        let p = 32 * 64 + 50;
        let mags: Vec<f64> = (0..8).map(|k| maps.map(k)[p].norm()).collect();
        let best = mags.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(best, 0, "{mags:?}");
    }

    fn full_op(s: &PhantomSpec) -> AcquisitionOperator {
        AcquisitionOperator::new(coil_maps(s).unwrap(), SamplingMask::full(s.nf, s.ny, s.nx)).unwrap()
    }

    #[test]
    fn noiseless_simulation_matches_forward() {
        let s = spec();
        let x = generate_phantom(&s).unwrap();
        let op = full_op(&s);
        let y = simulate(&x, op.maps(), op.mask(), 0.0, 1).unwrap();
        let back = adjoint(&y, &op).unwrap();
        let err: f64 = back.data().iter().zip(x.data()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        assert!(err <= 1e-6 * x.norm());

        let mask = crate::sampling::equispaced_mask(&crate::sampling::MaskSpec::new(
            crate::sampling::Scheme::Equispaced,
            3,
            s.nf,
            s.ny,
            s.nx,
        ))
        .unwrap();
        let op = AcquisitionOperator::new(coil_maps(&s).unwrap(), mask.clone()).unwrap();
        assert_eq!(simulate(&x, op.maps(), &mask, 0.0, 9).unwrap(), forward(&x, &op).unwrap());
    }

    #[test]
    fn noisy_simulation_respects_mask_and_seed() {
        let s = spec();
        let x = generate_phantom(&s).unwrap();
        let maps = coil_maps(&s).unwrap();
        let mut ms = crate::sampling::MaskSpec::new(crate::sampling::Scheme::Gaussian1d, 4, s.nf, s.ny, s.nx);
        ms.kt_mode = true;
        let mask = crate::sampling::generate(&ms).unwrap();
        let a = simulate(&x, &maps, &mask, 0.05, 3).unwrap();
        let b = simulate(&x, &maps, &mask, 0.05, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, simulate(&x, &maps, &mask, 0.05, 4).unwrap());
        for coil in 0..s.nc {
            for f in 0..s.nf {
                for (v, &u) in a.slice(coil, f).iter().zip(mask.frame(f)) {
                    if u == 0 {
                        assert_eq!(*v, C64::new(0.0, 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn noise_stream_matches_box_muller_recipe() {
        // Regenerate the first noise sample from the documented recipe.
        let s = spec();
        let x = generate_phantom(&s).unwrap();
        let maps = coil_maps(&s).unwrap();
        let mask = SamplingMask::full(s.nf, s.ny, s.nx);
        let clean = simulate(&x, &maps, &mask, 0.0, 0).unwrap();
        let noisy = simulate(&x, &maps, &mask, 0.1, 77).unwrap();
        let mean = clean.data().iter().map(|v| v.norm()).sum::<f64>() / clean.data().len() as f64;
        let std = 0.1 * mean;
        let mut rng = Rng::new(77);
        let u1 = rng.uniform().max(1e-300);
        let u2 = rng.uniform();
        let n = C64::new((2.0 * PI * u2).cos(), (2.0 * PI * u2).sin()) * ((-2.0 * u1.ln()).sqrt() * std / 2f64.sqrt());
        assert!((noisy.data()[0] - clean.data()[0] - n).norm() <= 1e-12);
    }

    #[test]
    fn augment_involutions_and_norm() {
        let s = spec();
        let x = generate_phantom(&s).unwrap();
        let maps = coil_maps(&s).unwrap();
        let y = simulate(&x, &maps, &SamplingMask::full(s.nf, s.ny, s.nx), 0.0, 0).unwrap();
        for flags in [
            AugmentFlags { hflip: true, ..Default::default() },
            AugmentFlags { vflip: true, ..Default::default() },
            AugmentFlags { time_reverse: true, ..Default::default() },
            AugmentFlags { hflip: true, vflip: true, time_reverse: true },
        ] {
            let once = augment(&y, flags).unwrap();
            assert!((once.norm() - y.norm()).abs() <= 1e-9 * y.norm());
            let twice = augment(&once, flags).unwrap();
            for (a, b) in twice.data().iter().zip(y.data()) {
                assert!((a - b).norm() <= 1e-9);
            }
        }
    }

    #[test]
    fn time_reverse_single_frame_is_identity() {
        let y = MultiCoilKSpace::new(1, 1, 2, 2, vec![C64::new(1.0, 2.0); 4]).unwrap();
        let out = augment(&y, AugmentFlags { time_reverse: true, ..Default::default() }).unwrap();
        assert_eq!(out, y);
    }

    #[test]
    fn hflip_mirrors_the_scene() {
        let s = PhantomSpec::new(32, 32, 3, 1);
        let x = generate_phantom(&s).unwrap();
        let op = AcquisitionOperator::new(SensitivityMaps::unit(32, 32), SamplingMask::full(3, 32, 32)).unwrap();
        let y = forward(&x, &op).unwrap();
        let flipped = augment(&y, AugmentFlags { hflip: true, ..Default::default() }).unwrap();
        let image = adjoint(&flipped, &op).unwrap();
        for t in 0..3 {
            for r in 0..32 {
                for c in 0..32 {
                    let expected = pixel(&s, t, r as f64, (31 - c) as f64);
                    assert!((image.frame(t)[r * 32 + c] - expected).norm() < 1e-9);
                }
            }
        }
        // the scene is not left-right symmetric, so the flip is observable
        assert!((0..32 * 32).any(|p| (image.frame(0)[p] - x.frame(0)[p]).norm() > 1e-3));
    }
}
