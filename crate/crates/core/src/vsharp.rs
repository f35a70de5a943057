//! Unrolled half-quadratic splitting / ADMM solver.
//!
//! Each of the `N` iterations runs
//!
//! ```text
//! z ← D(x, z, u/ρ)                                   (prior / denoiser)
//! x ← Nx gradient steps on ½‖T(x) − y‖² + ρ/2‖x − z + u/ρ‖²
//! u ← u + ρ(x − z)
//! ```
//!
//! and, with per-iterate data consistency on, replaces `x` by the coil-combined
//! image of its measured-entry-corrected k-space before the multiplier update.

use serde::{Deserialize, Serialize};

use crate::array::{DynamicImage, MultiCoilKSpace};
use crate::error::{Error, Result};
use crate::fourier::{adjoint, expand, forward, project_iterate, AcquisitionOperator};
use crate::priors::{Denoiser, DenoiserKind, DenoiserSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UInit {
    Zero,
    ScaledAdjoint,
}

/// Seam for the multiplier initialization `u⁽⁰⁾ = I(x⁽⁰⁾)`.
pub trait MultiplierInit {
    fn init(&self, x0: &DynamicImage) -> DynamicImage;
}

impl MultiplierInit for UInit {
    fn init(&self, x0: &DynamicImage) -> DynamicImage {
        match self {
            UInit::Zero => DynamicImage::zeros_like(x0),
            UInit::ScaledAdjoint => {
                let mut u = x0.clone();
                u.scale(1e-3.into());
                u
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VSharpConfig {
    /// ADMM iterations `N`.
    pub iterations: usize,
    /// Gradient steps per x-update `Nx`.
    pub gd_steps: usize,
    pub rho: f64,
    /// Gradient step; `None` resolves to `1/(1 + ρ)`.
    pub step_size: Option<f64>,
    pub denoiser: DenoiserSpec,
    pub per_iterate_dc: bool,
    pub u_init: UInit,
}

impl Default for VSharpConfig {
    fn default() -> Self {
        Self {
            iterations: 12,
            gd_steps: 6,
            rho: 1.0,
            step_size: None,
            denoiser: DenoiserSpec::new(DenoiserKind::WaveletSoftThreshold, 1e-3),
            per_iterate_dc: true,
            u_init: UInit::Zero,
        }
    }
}

impl VSharpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.gd_steps == 0 {
            return Err(Error::InvalidParameter("iterations and gd_steps must be ≥ 1".into()));
        }
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::InvalidParameter(format!("rho must be positive, got {}", self.rho)));
        }
        if let Some(eta) = self.step_size {
            if !(eta > 0.0) || !eta.is_finite() {
                return Err(Error::InvalidParameter(format!("step size must be positive, got {eta}")));
            }
        }
        self.denoiser.validate()
    }

    pub fn step(&self) -> f64 {
        self.step_size.unwrap_or(1.0 / (1.0 + self.rho))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace {
    /// `(x̂⁽ʲ⁾, ŷ⁽ʲ⁾)` for `j = 1..=N`.
    pub iterates: Vec<(DynamicImage, MultiCoilKSpace)>,
    pub z0: DynamicImage,
    /// `‖T(x̂⁽ʲ⁾) − y‖₂` per iteration.
    pub residual_history: Vec<f64>,
}

impl SolveTrace {
    pub fn final_image(&self) -> &DynamicImage {
        &self.iterates.last().expect("trace has at least one iterate").0
    }
}

/// `x⁽⁰⁾ = Tᴴy`, `z⁽⁰⁾ = override or x⁽⁰⁾`, `u⁽⁰⁾` from the configured initializer.
pub fn initialize(
    y: &MultiCoilKSpace,
    op: &AcquisitionOperator,
    cfg: &VSharpConfig,
    z0_override: Option<&DynamicImage>,
) -> Result<(DynamicImage, DynamicImage, DynamicImage)> {
    let x0 = adjoint(y, op)?;
    let z0 = match z0_override {
        Some(z) => {
            x0.same_shape(z)?;
            z.clone()
        }
        None => x0.clone(),
    };
    let u0 = cfg.u_init.init(&x0);
    Ok((z0, x0, u0))
}

fn ensure_finite(x: &DynamicImage, what: &str) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Divergence(format!("{what} produced a non-finite value")))
    }
}

/// `Nx` unrolled gradient steps
/// `x ← x − η·[Tᴴ(T(x) − y) + ρ(x − z) + u]`.
pub fn x_update(
    x: &DynamicImage,
    z_next: &DynamicImage,
    u: &DynamicImage,
    y: &MultiCoilKSpace,
    op: &AcquisitionOperator,
    cfg: &VSharpConfig,
) -> Result<DynamicImage> {
    x.same_shape(z_next)?;
    x.same_shape(u)?;
    let eta = cfg.step();
    let rho = cfg.rho;
    let mut x = x.clone();
    for _ in 0..cfg.gd_steps {
        let mut residual = forward(&x, op)?;
        for (r, m) in residual.data_mut().iter_mut().zip(y.data()) {
            *r -= m;
        }
        let data_grad = adjoint(&residual, op)?;
        for (((xi, g), zi), ui) in x
            .data_mut()
            .iter_mut()
            .zip(data_grad.data())
            .zip(z_next.data())
            .zip(u.data())
        {
            let grad = g + (*xi - zi) * rho + ui;
            *xi -= grad * eta;
        }
        ensure_finite(&x, "x-update")?;
    }
    Ok(x)
}

/// `u + ρ(x − z)`.
pub fn u_update(u: &DynamicImage, x_next: &DynamicImage, z_next: &DynamicImage, rho: f64) -> Result<DynamicImage> {
    u.same_shape(x_next)?;
    u.same_shape(z_next)?;
    let mut out = u.clone();
    for ((o, xi), zi) in out.data_mut().iter_mut().zip(x_next.data()).zip(z_next.data()) {
        *o += (xi - zi) * rho;
    }
    Ok(out)
}

fn data_residual(x: &DynamicImage, y: &MultiCoilKSpace, op: &AcquisitionOperator) -> Result<f64> {
    let predicted = forward(x, op)?;
    Ok(predicted
        .data()
        .iter()
        .zip(y.data())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt())
}

/// Full solve with the denoiser and multiplier initializer taken from `cfg`.
pub fn reconstruct(
    y: &MultiCoilKSpace,
    op: &AcquisitionOperator,
    cfg: &VSharpConfig,
    z0_override: Option<&DynamicImage>,
) -> Result<SolveTrace> {
    reconstruct_with(y, op, cfg, &cfg.denoiser, z0_override)
}

/// Full solve with an arbitrary denoiser.
pub fn reconstruct_with(
    y: &MultiCoilKSpace,
    op: &AcquisitionOperator,
    cfg: &VSharpConfig,
    denoiser: &dyn Denoiser,
    z0_override: Option<&DynamicImage>,
) -> Result<SolveTrace> {
    cfg.validate()?;
    op.check_kspace(y)?;
    let (z0, mut x, mut u) = initialize(y, op, cfg, z0_override)?;
    let mut z = z0.clone();
    let rho = cfg.rho;
    let mut iterates = Vec::with_capacity(cfg.iterations);
    let mut residual_history = Vec::with_capacity(cfg.iterations);

    for _ in 0..cfg.iterations {
        let mut u_over_rho = u.clone();
        u_over_rho.scale((1.0 / rho).into());
        z = denoiser.denoise(&x, &z, &u_over_rho, rho)?;
        ensure_finite(&z, "denoiser")?;
        x = x_update(&x, &z, &u, y, op, cfg)?;
        let y_hat = if cfg.per_iterate_dc {
            let (x_hat, y_hat) = project_iterate(&x, y, op)?;
            x = x_hat;
            y_hat
        } else {
            expand(&x, op.maps())?
        };
        u = u_update(&u, &x, &z, rho)?;
        residual_history.push(data_residual(&x, y, op)?);
        iterates.push((x.clone(), y_hat));
    }
    Ok(SolveTrace { iterates, z0, residual_history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{SamplingMask, C64};
    use crate::metrics::nmse_complex;
    use crate::phantom::{coil_maps, generate_phantom, simulate, PhantomSpec};
    use crate::sampling::{equispaced_mask, MaskSpec, Scheme};

    fn setup(mask: SamplingMask) -> (DynamicImage, MultiCoilKSpace, AcquisitionOperator) {
        let spec = PhantomSpec::new(32, 32, mask.nf(), 4);
        let x = generate_phantom(&spec).unwrap();
        let maps = coil_maps(&spec).unwrap();
        let y = simulate(&x, &maps, &mask, 0.0, 0).unwrap();
        (x, y, AcquisitionOperator::new(maps, mask).unwrap())
    }

    fn identity_cfg() -> VSharpConfig {
        VSharpConfig { denoiser: DenoiserSpec::identity(), ..VSharpConfig::default() }
    }

    #[test]
    fn initialize_without_override() {
        let (_, y, op) = setup(SamplingMask::full(2, 32, 32));
        let (z0, x0, u0) = initialize(&y, &op, &identity_cfg(), None).unwrap();
        assert_eq!(x0, adjoint(&y, &op).unwrap());
        assert_eq!(z0, x0);
        assert!(u0.data().iter().all(|v| *v == C64::new(0.0, 0.0)));
        let scaled = VSharpConfig { u_init: UInit::ScaledAdjoint, ..identity_cfg() };
        let (_, _, u0) = initialize(&y, &op, &scaled, None).unwrap();
        assert_eq!(u0.data()[5], x0.data()[5] * 1e-3);
    }

    #[test]
    fn initialize_with_override() {
        let (x, y, op) = setup(SamplingMask::full(2, 32, 32));
        let (z0, x0, _) = initialize(&y, &op, &identity_cfg(), Some(&x)).unwrap();
        assert_eq!(z0, x);
        assert_eq!(x0, adjoint(&y, &op).unwrap());
        assert!(initialize(&y, &op, &identity_cfg(), Some(&DynamicImage::zeros(1, 32, 32))).is_err());
    }

    #[test]
    fn zero_data_gives_zero_everything() {
        let (_, y, op) = setup(SamplingMask::full(2, 32, 32));
        let zero = MultiCoilKSpace::zeros_like(&y);
        let (z0, x0, u0) = initialize(&zero, &op, &identity_cfg(), None).unwrap();
        for img in [&z0, &x0, &u0] {
            assert!(img.data().iter().all(|v| v.norm() == 0.0));
        }
        let trace = reconstruct(&zero, &op, &VSharpConfig::default(), None).unwrap();
        for (x, yh) in &trace.iterates {
            assert!(x.data().iter().all(|v| v.norm() == 0.0));
            assert!(yh.data().iter().all(|v| v.norm() == 0.0));
        }
    }

    #[test]
    fn single_gradient_step_in_small_rho_limit() {
        let (_, y, op) = setup(SamplingMask::full(2, 32, 32));
        let cfg = VSharpConfig { rho: 1e-12, step_size: Some(1.0), gd_steps: 1, ..identity_cfg() };
        let zero = DynamicImage::zeros(2, 32, 32);
        let x = x_update(&zero, &zero, &zero, &y, &op, &cfg).unwrap();
        let target = adjoint(&y, &op).unwrap();
        assert!(nmse_complex(&x, &target).unwrap().sqrt() <= 1e-6);
    }

    #[test]
    fn gradient_steps_shrink_toward_zero_without_data() {
        let (x, y, op) = setup(SamplingMask::full(2, 32, 32));
        let zero_y = MultiCoilKSpace::zeros_like(&y);
        let zero = DynamicImage::zeros_like(&x);
        let mut cur = x.clone();
        let cfg = VSharpConfig { gd_steps: 1, ..identity_cfg() };
        for _ in 0..5 {
            let next = x_update(&cur, &zero, &zero, &zero_y, &op, &cfg).unwrap();
            assert!(next.norm() < cur.norm());
            cur = next;
        }
    }

    #[test]
    fn divergent_step_is_reported() {
        let (x, y, op) = setup(SamplingMask::full(2, 32, 32));
        let cfg = VSharpConfig { step_size: Some(1e200), gd_steps: 6, ..identity_cfg() };
        let zero = DynamicImage::zeros_like(&x);
        assert!(matches!(x_update(&x, &zero, &zero, &y, &op, &cfg), Err(Error::Divergence(_))));
    }

    #[test]
    fn u_update_examples() {
        let a = DynamicImage::new(1, 2, 2, vec![C64::new(1.0, 0.0); 4]).unwrap();
        let zero = DynamicImage::zeros(1, 2, 2);
        assert_eq!(u_update(&a, &a, &a, 3.0).unwrap(), a);
        let u = u_update(&zero, &a, &zero, 2.0).unwrap();
        assert!(u.data().iter().all(|v| *v == C64::new(2.0, 0.0)));
        // two successive updates compose additively
        let b = DynamicImage::new(1, 2, 2, vec![C64::new(0.0, 0.5); 4]).unwrap();
        let twice = u_update(&u_update(&zero, &a, &zero, 2.0).unwrap(), &b, &zero, 2.0).unwrap();
        let mut sum = a.clone();
        for (s, bi) in sum.data_mut().iter_mut().zip(b.data()) {
            *s = (*s + bi) * 2.0;
        }
        assert_eq!(twice, sum);
    }

    #[test]
    fn full_sampling_converges_to_adjoint_image() {
        let (_, y, op) = setup(SamplingMask::full(2, 32, 32));
        let trace = reconstruct(&y, &op, &identity_cfg(), None).unwrap();
        assert_eq!(trace.iterates.len(), 12);
        let target = adjoint(&y, &op).unwrap();
        assert!(nmse_complex(trace.final_image(), &target).unwrap() <= 1e-4);
    }

    #[test]
    fn per_iterate_dc_is_bitwise_and_residuals_descend() {
        let mut spec = MaskSpec::new(Scheme::Equispaced, 4, 3, 32, 32);
        spec.acs_fraction = 0.125;
        let mask = equispaced_mask(&spec).unwrap();
        let (_, y, op) = setup(mask.clone());
        let trace = reconstruct(&y, &op, &identity_cfg(), None).unwrap();
        for (_, y_hat) in &trace.iterates {
            for coil in 0..y.nc() {
                for f in 0..y.nf() {
                    for ((a, b), &u) in y_hat.slice(coil, f).iter().zip(y.slice(coil, f)).zip(mask.frame(f)) {
                        if u == 1 {
                            assert_eq!(a.re.to_bits(), b.re.to_bits());
                            assert_eq!(a.im.to_bits(), b.im.to_bits());
                        }
                    }
                }
            }
        }
        for w in trace.residual_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{:?}", trace.residual_history);
        }
    }

    #[test]
    fn deterministic_trace() {
        let mask = equispaced_mask(&MaskSpec::new(Scheme::Equispaced, 2, 2, 32, 32)).unwrap();
        let (_, y, op) = setup(mask);
        let cfg = VSharpConfig { iterations: 3, ..VSharpConfig::default() };
        assert_eq!(reconstruct(&y, &op, &cfg, None).unwrap(), reconstruct(&y, &op, &cfg, None).unwrap());
    }

    #[test]
    fn config_validation() {
        let (_, y, op) = setup(SamplingMask::full(2, 32, 32));
        for bad in [
            VSharpConfig { iterations: 0, ..VSharpConfig::default() },
            VSharpConfig { gd_steps: 0, ..VSharpConfig::default() },
            VSharpConfig { rho: 0.0, ..VSharpConfig::default() },
            VSharpConfig { step_size: Some(-1.0), ..VSharpConfig::default() },
        ] {
            assert!(matches!(reconstruct(&y, &op, &bad, None), Err(Error::InvalidParameter(_))));
        }
        assert_eq!(VSharpConfig::default().step(), 0.5);
    }
}
