//! Undersampling pattern generators: equispaced, Gaussian-1D and pseudo-radial
//! masks, each either shared by all frames or interleaved across frames (kt).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::array::SamplingMask;
use crate::error::{Error, Result};
pub use crate::rng::Rng;

/// Golden angle used to rotate radial spokes from one frame to the next.
pub const GOLDEN_ANGLE_DEG: f64 = 111.246117975;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Equispaced,
    Gaussian1d,
    Radial,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Equispaced => "equispaced",
            Scheme::Gaussian1d => "gaussian1d",
            Scheme::Radial => "radial",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equispaced" => Ok(Scheme::Equispaced),
            "gaussian1d" => Ok(Scheme::Gaussian1d),
            "radial" => Ok(Scheme::Radial),
            other => Err(Error::InvalidSpec(format!("unknown scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskSpec {
    pub scheme: Scheme,
    /// Nominal acceleration R.
    pub acceleration: u32,
    pub acs_fraction: f64,
    pub kt_mode: bool,
    pub seed: u64,
    pub nf: usize,
    pub ny: usize,
    pub nx: usize,
    /// Equispaced base offset in `[0, R)`; drawn from the seed when absent.
    #[serde(default)]
    pub offset: Option<usize>,
    /// Radial base angle θ₀ in radians; drawn uniformly from `[0, π/nspokes)` when absent.
    #[serde(default)]
    pub angle_offset: Option<f64>,
}

impl MaskSpec {
    pub fn new(scheme: Scheme, acceleration: u32, nf: usize, ny: usize, nx: usize) -> Self {
        Self {
            scheme,
            acceleration,
            acs_fraction: 0.0,
            kt_mode: false,
            seed: 0,
            nf,
            ny,
            nx,
            offset: None,
            angle_offset: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.acceleration == 0 {
            return Err(Error::InvalidSpec("acceleration must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.acs_fraction) {
            return Err(Error::InvalidSpec(format!("acs_fraction {} outside [0, 1)", self.acs_fraction)));
        }
        if self.nf == 0 || self.ny < 2 || self.nx < 2 {
            return Err(Error::InvalidSpec(format!(
                "shape ({}, {}, {}) is too small",
                self.nf, self.ny, self.nx
            )));
        }
        Ok(())
    }

    /// Width of the autocalibration block in columns.
    pub fn acs_count(&self) -> usize {
        (self.acs_fraction * self.nx as f64).round() as usize
    }
}

/// Center block of `width` columns: `[nx/2 − ⌈w/2⌉, nx/2 + ⌊w/2⌋)`.
pub fn acs_columns(nx: usize, width: usize) -> std::ops::Range<usize> {
    let center = nx / 2;
    let start = center.saturating_sub(width.div_ceil(2));
    let end = (center + width / 2).min(nx);
    start..end
}

fn merge_acs(mut cols: Vec<usize>, nx: usize, acs: usize) -> Vec<usize> {
    cols.extend(acs_columns(nx, acs));
    cols.sort_unstable();
    cols.dedup();
    cols
}

/// Columns `{offset, offset + R, …}` plus the ACS block. Frames share one offset
/// unless `kt_mode` is set, in which case frame `t` uses `(offset + t) mod R`.
pub fn equispaced_mask(spec: &MaskSpec) -> Result<SamplingMask> {
    spec.validate()?;
    let r = spec.acceleration as usize;
    if r > spec.nx {
        return Err(Error::InvalidSpec(format!("R={r} exceeds nx={}", spec.nx)));
    }
    let base = match spec.offset {
        Some(o) if o >= r => return Err(Error::InvalidSpec(format!("offset {o} must be below R={r}"))),
        Some(o) => o,
        None => ((Rng::new(spec.seed).uniform() * r as f64) as usize).min(r - 1),
    };
    let acs = spec.acs_count();
    let columns = (0..spec.nf)
        .map(|t| {
            let offset = if spec.kt_mode { (base + t) % r } else { base };
            merge_acs((offset..spec.nx).step_by(r).collect(), spec.nx, acs)
        })
        .collect();
    SamplingMask::from_columns(spec.nf, spec.ny, spec.nx, columns)
}

fn gaussian_columns(nx: usize, target: usize, acs: usize, seed: u64) -> Vec<usize> {
    let sigma = nx as f64 / 6.0;
    let center = (nx / 2) as f64;
    let acs_range = acs_columns(nx, acs);
    let mut chosen: Vec<usize> = acs_range.clone().collect();
    let mut candidates: Vec<(usize, f64)> = (0..nx)
        .filter(|c| !acs_range.contains(c))
        .map(|c| {
            let d = c as f64 - center;
            (c, (-d * d / (2.0 * sigma * sigma)).exp())
        })
        .collect();
    let mut rng = Rng::new(seed);
    while chosen.len() < target && !candidates.is_empty() {
        let total: f64 = candidates.iter().map(|&(_, w)| w).sum();
        let threshold = rng.uniform() * total;
        let mut cumulative = 0.0;
        let mut pick = candidates.len() - 1;
        for (i, &(_, w)) in candidates.iter().enumerate() {
            cumulative += w;
            if cumulative > threshold {
                pick = i;
                break;
            }
        }
        chosen.push(candidates.remove(pick).0);
    }
    chosen.sort_unstable();
    chosen
}

/// `max(round(nx/R), acs)` distinct columns per frame: the ACS block plus columns
/// drawn without replacement from a Gaussian density centered on `nx/2`
/// (σ = nx/6). kt frames reseed with `seed ^ t`.
pub fn gaussian1d_mask(spec: &MaskSpec) -> Result<SamplingMask> {
    spec.validate()?;
    let r = spec.acceleration as usize;
    if r > spec.nx {
        return Err(Error::InvalidSpec(format!("R={r} exceeds nx={}", spec.nx)));
    }
    let acs = spec.acs_count();
    let nominal = (spec.nx as f64 / r as f64).round() as usize;
    let target = nominal.max(acs);
    if target == 0 || target > spec.nx {
        return Err(Error::InvalidSpec(format!("cannot sample {target} of {} columns", spec.nx)));
    }
    let columns = (0..spec.nf)
        .map(|t| {
            let seed = if spec.kt_mode { spec.seed ^ t as u64 } else { spec.seed };
            gaussian_columns(spec.nx, target, acs, seed)
        })
        .collect();
    SamplingMask::from_columns(spec.nf, spec.ny, spec.nx, columns)
}

pub fn radial_spoke_count(spec: &MaskSpec) -> usize {
    ((spec.nx as f64 / spec.acceleration as f64).round() as usize).max(1)
}

/// Base spoke angle θ₀ for a spec (explicit or seeded).
pub fn radial_base_angle(spec: &MaskSpec) -> f64 {
    spec.angle_offset
        .unwrap_or_else(|| Rng::new(spec.seed).uniform() * PI / radial_spoke_count(spec) as f64)
}

/// Spoke angles used in frame `t`.
pub fn radial_angles(spec: &MaskSpec, t: usize) -> Vec<f64> {
    let nspokes = radial_spoke_count(spec);
    let mut theta0 = radial_base_angle(spec);
    if spec.kt_mode {
        theta0 += t as f64 * GOLDEN_ANGLE_DEG.to_radians();
    }
    (0..nspokes).map(|s| theta0 + s as f64 * PI / nspokes as f64).collect()
}

fn rasterize_spoke(frame: &mut [u8], ny: usize, nx: usize, theta: f64) {
    let half = 0.5 * ((ny * ny + nx * nx) as f64).sqrt();
    let (cy, cx) = ((ny / 2) as f64, (nx / 2) as f64);
    let (sin, cos) = theta.sin_cos();
    let steps = (2.0 * half / 0.5).floor() as usize;
    for i in 0..=steps {
        let t = -half + 0.5 * i as f64;
        let r = (cy + t * sin).round();
        let c = (cx + t * cos).round();
        if r >= 0.0 && c >= 0.0 && (r as usize) < ny && (c as usize) < nx {
            frame[r as usize * nx + c as usize] = 1;
        }
    }
}

/// Pseudo-radial pattern rasterized onto the Cartesian grid. Spoke `s` sits at
/// `θ₀ + s·π/nspokes`; kt frames rotate θ₀ by the golden angle per frame.
pub fn radial_mask(spec: &MaskSpec) -> Result<SamplingMask> {
    spec.validate()?;
    if spec.ny < 4 || spec.nx < 4 {
        return Err(Error::InvalidSpec("radial masks need at least 4x4 frames".into()));
    }
    let (ny, nx) = (spec.ny, spec.nx);
    let mut data = vec![0u8; spec.nf * ny * nx];
    for (t, frame) in data.chunks_mut(ny * nx).enumerate() {
        for theta in radial_angles(spec, t) {
            rasterize_spoke(frame, ny, nx, theta);
        }
        frame[(ny / 2) * nx + nx / 2] = 1;
    }
    SamplingMask::new(spec.nf, ny, nx, data)
}

/// Interleaved (kt) expansion of a spec across frames.
pub fn kt_expand(spec: &MaskSpec) -> Result<SamplingMask> {
    if !spec.kt_mode {
        return Err(Error::InvalidSpec("kt_expand requires kt_mode".into()));
    }
    generate(spec)
}

/// Dispatch on the spec's scheme.
pub fn generate(spec: &MaskSpec) -> Result<SamplingMask> {
    match spec.scheme {
        Scheme::Equispaced => equispaced_mask(spec),
        Scheme::Gaussian1d => gaussian1d_mask(spec),
        Scheme::Radial => radial_mask(spec),
    }
}

/// Total entry count divided by sampled entry count.
pub fn measured_acceleration(mask: &SamplingMask) -> Result<f64> {
    let sampled = mask.sampled_count();
    if sampled == 0 {
        return Err(Error::DegenerateMask("mask has no sampled entries".into()));
    }
    Ok(mask.data().len() as f64 / sampled as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn spec(scheme: Scheme, r: u32, nf: usize, nx: usize) -> MaskSpec {
        MaskSpec::new(scheme, r, nf, 8, nx)
    }

    #[test]
    fn equispaced_r4_offset0() {
        let mut s = spec(Scheme::Equispaced, 4, 1, 8);
        s.offset = Some(0);
        let m = equispaced_mask(&s).unwrap();
        assert_eq!(m.cartesian_columns().unwrap()[0], vec![0, 4]);
        assert_eq!(measured_acceleration(&m).unwrap(), 4.0);
    }

    #[test]
    fn equispaced_r1_samples_everything() {
        let m = equispaced_mask(&spec(Scheme::Equispaced, 1, 2, 8)).unwrap();
        assert_eq!(m.sampled_count(), 2 * 8 * 8);
    }

    #[test]
    fn equispaced_with_centered_acs() {
        let mut s = spec(Scheme::Equispaced, 4, 1, 16);
        s.offset = Some(1);
        s.acs_fraction = 0.25;
        let m = equispaced_mask(&s).unwrap();
        // {1,5,9,13} ∪ {6,7,8,9}
        assert_eq!(m.cartesian_columns().unwrap()[0], vec![1, 5, 6, 7, 8, 9, 13]);
    }

    #[test]
    fn acs_block_centering_rule() {
        assert_eq!(acs_columns(16, 4), 6..10);
        assert_eq!(acs_columns(16, 3), 6..9);
        assert_eq!(acs_columns(15, 3), 5..8);
        assert_eq!(acs_columns(8, 0), 4..4);
    }

    #[test]
    fn equispaced_rejects_r_above_nx() {
        assert!(matches!(equispaced_mask(&spec(Scheme::Equispaced, 9, 1, 8)), Err(Error::InvalidSpec(_))));
        let mut s = spec(Scheme::Equispaced, 4, 1, 8);
        s.offset = Some(4);
        assert!(equispaced_mask(&s).is_err());
    }

    #[test]
    fn gaussian_r1_is_full_for_any_seed() {
        for seed in [0, 1, 99, u64::MAX] {
            let mut s = spec(Scheme::Gaussian1d, 1, 1, 8);
            s.seed = seed;
            assert_eq!(gaussian1d_mask(&s).unwrap().sampled_count(), 64);
        }
    }

    /// Independent re-execution of the documented draw procedure: splitmix64
    /// uniforms, weights exp(-(c-c0)²/(2σ²)), inverse-CDF over remaining columns.
    fn gaussian_oracle(nx: usize, count: usize, seed: u64) -> BTreeSet<usize> {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_add(0x9E3779B97F4A7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4B5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
            ((z ^ (z >> 31)) >> 11) as f64 / 9007199254740992.0
        };
        let sigma = nx as f64 / 6.0;
        let c0 = (nx / 2) as f64;
        let mut remaining: Vec<usize> = (0..nx).collect();
        let mut out = BTreeSet::new();
        while out.len() < count {
            let w: Vec<f64> = remaining.iter().map(|&c| (-(c as f64 - c0).powi(2) / (2.0 * sigma * sigma)).exp()).collect();
            let target = next() * w.iter().sum::<f64>();
            let mut acc = 0.0;
            let mut idx = remaining.len() - 1;
            for (i, wi) in w.iter().enumerate() {
                acc += wi;
                if acc > target {
                    idx = i;
                    break;
                }
            }
            out.insert(remaining.remove(idx));
        }
        out
    }

    #[test]
    fn gaussian_golden_columns() {
        let mut s = spec(Scheme::Gaussian1d, 2, 1, 8);
        s.seed = 1;
        let m = gaussian1d_mask(&s).unwrap();
        let got: BTreeSet<usize> = m.cartesian_columns().unwrap()[0].iter().copied().collect();
        assert_eq!(got, gaussian_oracle(8, 4, 1));
        // frozen from the oracle
        assert_eq!(got, BTreeSet::from([3, 4, 5, 7]));
        assert_eq!(gaussian1d_mask(&s).unwrap(), m);
    }

    #[test]
    fn gaussian_acs_dominates_small_budget() {
        let mut s = spec(Scheme::Gaussian1d, 8, 2, 32);
        s.acs_fraction = 0.25; // 8 columns, budget round(32/8)=4
        let m = gaussian1d_mask(&s).unwrap();
        for f in 0..2 {
            assert_eq!(m.cartesian_columns().unwrap()[f], (12..20).collect::<Vec<_>>());
        }
    }

    fn radial_spec(nspokes_r: u32, ny: usize, nx: usize, theta: f64) -> MaskSpec {
        let mut s = MaskSpec::new(Scheme::Radial, nspokes_r, 1, ny, nx);
        s.angle_offset = Some(theta);
        s
    }

    #[test]
    fn radial_single_horizontal_spoke() {
        // R=5 on nx=5 -> one spoke
        let m = radial_mask(&radial_spec(5, 5, 5, 0.0)).unwrap();
        for r in 0..5 {
            for c in 0..5 {
                assert_eq!(m.is_sampled(0, r, c), r == 2, "({r},{c})");
            }
        }
    }

    #[test]
    fn radial_single_vertical_spoke() {
        let m = radial_mask(&radial_spec(5, 5, 5, PI / 2.0)).unwrap();
        for r in 0..5 {
            for c in 0..5 {
                assert_eq!(m.is_sampled(0, r, c), c == 2, "({r},{c})");
            }
        }
    }

    /// Hand rasterization of four spokes at 0, 45, 90, 135 degrees on 16x16,
    /// enumerating the half-pixel samples with an integer counter.
    fn radial_oracle_16() -> usize {
        let mut grid = [[false; 16]; 16];
        let half = 0.5 * (512f64).sqrt();
        for s in 0..4 {
            let theta = s as f64 * PI / 4.0;
            let mut k = 0;
            loop {
                let t = -half + 0.5 * k as f64;
                if t > half {
                    break;
                }
                let r = (8.0 + t * theta.sin()).round();
                let c = (8.0 + t * theta.cos()).round();
                if (0.0..16.0).contains(&r) && (0.0..16.0).contains(&c) {
                    grid[r as usize][c as usize] = true;
                }
                k += 1;
            }
        }
        grid[8][8] = true;
        grid.iter().flatten().filter(|&&b| b).count()
    }

    #[test]
    fn radial_measured_acceleration_16() {
        let m = radial_mask(&radial_spec(4, 16, 16, 0.0)).unwrap();
        assert_eq!(radial_spoke_count(&radial_spec(4, 16, 16, 0.0)), 4);
        let count = radial_oracle_16();
        assert_eq!(m.sampled_count(), count);
        let accel = measured_acceleration(&m).unwrap();
        assert_eq!(accel, 256.0 / count as f64);
        // frozen golden
        assert_eq!(count, 60);
    }

    #[test]
    fn radial_kt_rotates_by_golden_angle() {
        let mut s = radial_spec(4, 16, 16, 0.3);
        s.kt_mode = true;
        s.nf = 2;
        let a0 = radial_angles(&s, 0);
        let a1 = radial_angles(&s, 1);
        for (x, y) in a0.iter().zip(&a1) {
            assert!((y - x - GOLDEN_ANGLE_DEG.to_radians()).abs() < 1e-12);
        }
    }

    #[test]
    fn kt_equispaced_offsets_and_coverage() {
        let mut s = spec(Scheme::Equispaced, 4, 4, 8);
        s.kt_mode = true;
        s.offset = Some(0);
        let m = kt_expand(&s).unwrap();
        let cols = m.cartesian_columns().unwrap();
        for (t, frame) in cols.iter().enumerate() {
            assert_eq!(frame[0], t);
        }
        let union: BTreeSet<usize> = cols.iter().flatten().copied().collect();
        assert_eq!(union, (0..8).collect());

        s.nf = 2;
        let m = kt_expand(&s).unwrap();
        let union: BTreeSet<usize> = m.cartesian_columns().unwrap().iter().flatten().copied().collect();
        assert_eq!(union.len(), 2 * 8 / 4);
    }

    #[test]
    fn kt_expand_requires_kt_mode() {
        assert!(matches!(kt_expand(&spec(Scheme::Equispaced, 2, 2, 8)), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn measured_acceleration_rejects_empty() {
        assert!(matches!(
            measured_acceleration(&SamplingMask::empty(1, 4, 4)),
            Err(Error::DegenerateMask(_))
        ));
        assert_eq!(measured_acceleration(&SamplingMask::full(2, 4, 4)).unwrap(), 1.0);
    }

    fn arb_spec() -> impl Strategy<Value = MaskSpec> {
        (
            prop_oneof![Just(Scheme::Equispaced), Just(Scheme::Gaussian1d), Just(Scheme::Radial)],
            1u32..12,
            0.0..0.3f64,
            any::<bool>(),
            any::<u64>(),
            1usize..5,
            prop_oneof![Just(16usize), Just(24), Just(33)],
        )
            .prop_map(|(scheme, r, acs, kt, seed, nf, nx)| {
                let mut s = MaskSpec::new(scheme, r, nf, 16, nx);
                s.acs_fraction = acs;
                s.kt_mode = kt;
                s.seed = seed;
                s
            })
    }

    proptest! {
        #[test]
        fn generation_is_deterministic(s in arb_spec()) {
            prop_assert_eq!(generate(&s).unwrap(), generate(&s).unwrap());
        }

        #[test]
        fn acs_columns_always_sampled(s in arb_spec()) {
            prop_assume!(s.scheme != Scheme::Radial);
            let m = generate(&s).unwrap();
            for f in 0..s.nf {
                for c in acs_columns(s.nx, s.acs_count()) {
                    for r in 0..s.ny {
                        prop_assert!(m.is_sampled(f, r, c));
                    }
                }
            }
        }

        #[test]
        fn kt_equispaced_covers_every_column(r in 1u32..9, extra in 0usize..4, seed in any::<u64>()) {
            let nf = r as usize + extra;
            let mut s = MaskSpec::new(Scheme::Equispaced, r, nf, 8, 64);
            s.kt_mode = true;
            s.seed = seed;
            let m = kt_expand(&s).unwrap();
            let union: BTreeSet<usize> = m.cartesian_columns().unwrap().iter().flatten().copied().collect();
            prop_assert_eq!(union, (0..64).collect::<BTreeSet<_>>());
        }

        #[test]
        fn nominal_acceleration_within_15_percent(
            scheme in prop_oneof![Just(Scheme::Equispaced), Just(Scheme::Gaussian1d)],
            r in prop_oneof![Just(2u32), Just(4), Just(8)],
            nx in prop_oneof![Just(64usize), Just(96), Just(128)],
            kt in any::<bool>(),
            seed in any::<u64>(),
        ) {
            let mut s = MaskSpec::new(scheme, r, 3, nx, nx);
            s.kt_mode = kt;
            s.seed = seed;
            let accel = measured_acceleration(&generate(&s).unwrap()).unwrap();
            let rel = (accel - r as f64).abs() / r as f64;
            prop_assert!(rel <= 0.15, "{scheme} R={r} nx={nx}: measured {accel}");
        }

        // round(nx/R) spokes oversample relative to R: the diagonal spokes are longer
        // than nx. Measured values sit between 0.75·R and R.
        #[test]
        fn radial_measured_acceleration_band(
            r in prop_oneof![Just(2u32), Just(4), Just(8)],
            nx in prop_oneof![Just(64usize), Just(96), Just(128)],
            kt in any::<bool>(),
            seed in any::<u64>(),
        ) {
            let mut s = MaskSpec::new(Scheme::Radial, r, 3, nx, nx);
            s.kt_mode = kt;
            s.seed = seed;
            let accel = measured_acceleration(&generate(&s).unwrap()).unwrap();
            prop_assert!(accel >= 0.75 * r as f64 && accel <= r as f64, "R={r} nx={nx}: {accel}");
        }
    }
}
