//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use vsharp_core::rng::Rng;
use vsharp_core::{DynamicImage, MultiCoilKSpace, SamplingMask, SensitivityMaps, C64};

/// Direct centered orthonormal DFT, O(N²).
pub fn dft2c(data: &[C64], ny: usize, nx: usize, inverse: bool) -> Vec<C64> {
    let sign = if inverse { 1.0 } else { -1.0 };
    let (cy, cx) = ((ny / 2) as f64, (nx / 2) as f64);
    let scale = 1.0 / ((ny * nx) as f64).sqrt();
    let mut out = vec![C64::new(0.0, 0.0); ny * nx];
    for k1 in 0..ny {
        for k2 in 0..nx {
            let mut acc = C64::new(0.0, 0.0);
            for n1 in 0..ny {
                for n2 in 0..nx {
                    let phase = sign
                        * 2.0
                        * PI
                        * ((k1 as f64 - cy) * (n1 as f64 - cy) / ny as f64
                            + (k2 as f64 - cx) * (n2 as f64 - cx) / nx as f64);
                    acc += data[n1 * nx + n2] * C64::from_polar(1.0, phase);
                }
            }
            out[k1 * nx + k2] = acc * scale;
        }
    }
    out
}

/// Centered DFT matrix acting on row-major `ny×nx` vectors.
pub fn dft_matrix(ny: usize, nx: usize) -> DMatrix<C64> {
    let n = ny * nx;
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![C64::new(0.0, 0.0); n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        e[j] = C64::new(1.0, 0.0);
        let col = dft2c(&e, ny, nx, false);
        for i in 0..n {
            m[(i, j)] = col[i];
        }
    }
    m
}

/// Dense single-frame acquisition matrix, rows ordered (coil, pixel).
pub fn dense_operator(maps: &SensitivityMaps, mask: &SamplingMask, frame: usize) -> DMatrix<C64> {
    let (ny, nx) = (maps.ny(), maps.nx());
    let n = ny * nx;
    let f = dft_matrix(ny, nx);
    let mut a = DMatrix::zeros(maps.nc() * n, n);
    for k in 0..maps.nc() {
        let s = maps.map(k);
        for p in 0..n {
            if mask.frame(frame)[p] == 0 {
                continue;
            }
            for q in 0..n {
                a[(k * n + p, q)] = f[(p, q)] * s[q];
            }
        }
    }
    a
}

pub fn solve(m: DMatrix<C64>, rhs: DVector<C64>) -> DVector<C64> {
    m.lu().solve(&rhs).expect("nonsingular system")
}

pub fn vec_of(data: &[C64]) -> DVector<C64> {
    DVector::from_column_slice(data)
}

pub fn relative_error(got: &[C64], want: &[C64]) -> f64 {
    let num: f64 = got.iter().zip(want).map(|(a, b)| (a - b).norm_sqr()).sum();
    let den: f64 = want.iter().map(|b| b.norm_sqr()).sum();
    (num / den).sqrt()
}

pub fn random_complex(n: usize, rng: &mut Rng) -> Vec<C64> {
    (0..n).map(|_| rng.complex_normal(1.0)).collect()
}

pub fn random_image(nf: usize, ny: usize, nx: usize, rng: &mut Rng) -> DynamicImage {
    DynamicImage::new(nf, ny, nx, random_complex(nf * ny * nx, rng)).unwrap()
}

pub fn random_kspace(nc: usize, nf: usize, ny: usize, nx: usize, rng: &mut Rng) -> MultiCoilKSpace {
    MultiCoilKSpace::new(nc, nf, ny, nx, random_complex(nc * nf * ny * nx, rng)).unwrap()
}

/// Random maps normalized so that Σ|S_k|² = 1 at every pixel.
pub fn random_maps(nc: usize, ny: usize, nx: usize, rng: &mut Rng) -> SensitivityMaps {
    let n = ny * nx;
    let mut data = random_complex(nc * n, rng);
    for p in 0..n {
        let e: f64 = (0..nc).map(|k| data[k * n + p].norm_sqr()).sum::<f64>().sqrt();
        for k in 0..nc {
            data[k * n + p] /= e;
        }
    }
    SensitivityMaps::new(nc, ny, nx, data).unwrap()
}

/// Independent Bernoulli mask with sampling probability `p`.
pub fn random_mask(nf: usize, ny: usize, nx: usize, p: f64, rng: &mut Rng) -> SamplingMask {
    let data = (0..nf * ny * nx).map(|_| u8::from(rng.uniform() < p)).collect();
    SamplingMask::new(nf, ny, nx, data).unwrap()
}

/// Zeroes `y` off the mask.
pub fn masked(y: &MultiCoilKSpace, mask: &SamplingMask) -> MultiCoilKSpace {
    let mut out = y.clone();
    for c in 0..y.nc() {
        for f in 0..y.nf() {
            for (v, &u) in out.slice_mut(c, f).iter_mut().zip(mask.frame(f)) {
                if u == 0 {
                    *v = C64::new(0.0, 0.0);
                }
            }
        }
    }
    out
}

pub fn sampled_bitwise_equal(a: &MultiCoilKSpace, b: &MultiCoilKSpace, mask: &SamplingMask) -> bool {
    (0..a.nc()).all(|c| {
        (0..a.nf()).all(|f| {
            a.slice(c, f).iter().zip(b.slice(c, f)).zip(mask.frame(f)).all(|((p, q), &u)| {
                u == 0 || (p.re.to_bits() == q.re.to_bits() && p.im.to_bits() == q.im.to_bits())
            })
        })
    })
}

/// Isotropic forward-difference TV of a real image, written out directly.
pub fn tv_direct(z: &[f64], ny: usize, nx: usize) -> f64 {
    let mut total = 0.0;
    for r in 0..ny {
        for c in 0..nx {
            let v = z[r * nx + c];
            let dr = if r + 1 < ny { z[(r + 1) * nx + c] - v } else { 0.0 };
            let dc = if c + 1 < nx { z[r * nx + c + 1] - v } else { 0.0 };
            total += (dr * dr + dc * dc).sqrt();
        }
    }
    total
}

/// Coarse-to-fine grid search for `argmin ½‖z − v‖² + w·TV(z)` on a 2×2 image.
pub fn tv_brute_force(v: &[f64; 4], w: f64) -> [f64; 4] {
    let objective = |z: &[f64; 4]| -> f64 {
        z.iter().zip(v).map(|(a, b)| 0.5 * (a - b).powi(2)).sum::<f64>() + w * tv_direct(z, 2, 2)
    };
    let mut center = *v;
    let mut radius = 2.0;
    while radius > 1e-5 {
        let steps = 8i32;
        let h = radius / steps as f64;
        let mut best = (objective(&center), center);
        for a in -steps..=steps {
            for b in -steps..=steps {
                for c in -steps..=steps {
                    for d in -steps..=steps {
                        let z = [
                            center[0] + a as f64 * h,
                            center[1] + b as f64 * h,
                            center[2] + c as f64 * h,
                            center[3] + d as f64 * h,
                        ];
                        let o = objective(&z);
                        if o < best.0 {
                            best = (o, z);
                        }
                    }
                }
            }
        }
        center = best.1;
        radius *= 0.25;
    }
    center
}

/// Grid search for `argmin_z ½(z − v)² + t|z|` over [−10, 10] in 1e-3 steps.
pub fn soft_threshold_brute_force(v: f64, t: f64) -> f64 {
    let mut best = (f64::INFINITY, 0.0);
    for i in -10_000..=10_000 {
        let z = i as f64 * 1e-3;
        let o = 0.5 * (z - v).powi(2) + t * z.abs();
        if o < best.0 {
            best = (o, z);
        }
    }
    best.1
}
