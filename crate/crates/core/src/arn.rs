//! Auxiliary refinement of the measured k-space.
//!
//! A short variational-network cascade refines `y`; after a final hard data
//! consistency step its coil-combined image seeds the auxiliary variable `z⁽⁰⁾`
//! of the solver.

use serde::{Deserialize, Serialize};

use crate::array::{DynamicImage, MultiCoilKSpace};
use crate::error::{Error, Result};
use crate::fourier::{combine, dc, expand, AcquisitionOperator};
use crate::priors::{Denoiser, DenoiserKind, DenoiserSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArnConfig {
    /// Number of cascades `T`.
    pub cascades: usize,
    /// Data-gradient weight, in `(0, 2]`.
    pub eta: f64,
    pub regularizer: DenoiserSpec,
}

impl Default for ArnConfig {
    fn default() -> Self {
        Self {
            cascades: 8,
            eta: 1.0,
            regularizer: DenoiserSpec::new(DenoiserKind::WaveletSoftThreshold, 1e-3),
        }
    }
}

impl ArnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cascades == 0 {
            return Err(Error::InvalidParameter("cascades must be ≥ 1".into()));
        }
        if !(self.eta > 0.0 && self.eta <= 2.0) {
            return Err(Error::InvalidParameter(format!("eta must lie in (0, 2], got {}", self.eta)));
        }
        self.regularizer.validate()
    }
}

/// `k − η·U⊙(k − y) + expand(prox(reduce k) − reduce k)`.
pub fn cascade_step(
    k: &MultiCoilKSpace,
    y: &MultiCoilKSpace,
    op: &AcquisitionOperator,
    cfg: &ArnConfig,
) -> Result<MultiCoilKSpace> {
    cfg.validate()?;
    op.check_kspace(k)?;
    op.check_kspace(y)?;
    let eta = cfg.eta;
    let mask = op.mask();
    let mut out = k.clone();
    for coil in 0..k.nc() {
        for f in 0..k.nf() {
            let measured = y.slice(coil, f);
            for ((v, &m), &u) in out.slice_mut(coil, f).iter_mut().zip(measured).zip(mask.frame(f)) {
                if u == 1 {
                    *v = if eta == 1.0 { m } else { *v - (*v - m) * eta };
                }
            }
        }
    }
    let identity = cfg.regularizer.kind == DenoiserKind::Identity || cfg.regularizer.lambda == 0.0;
    if !identity {
        let m = combine(k, op.maps())?;
        let zero = DynamicImage::zeros_like(&m);
        let mut correction = cfg.regularizer.denoise(&m, &m, &zero, 1.0)?;
        for (c, v) in correction.data_mut().iter_mut().zip(m.data()) {
            *c -= v;
        }
        let delta = expand(&correction, op.maps())?;
        for (o, d) in out.data_mut().iter_mut().zip(delta.data()) {
            *o += d;
        }
    }
    Ok(out)
}

/// `T` cascades from `k⁰ = y`, then hard data consistency.
pub fn refine(y: &MultiCoilKSpace, op: &AcquisitionOperator, cfg: &ArnConfig) -> Result<MultiCoilKSpace> {
    cfg.validate()?;
    let mut k = y.clone();
    for _ in 0..cfg.cascades {
        k = cascade_step(&k, y, op, cfg)?;
    }
    dc(&k, y, op.mask())
}

/// Coil-combined image of `r` with no mask applied.
pub fn init_z0(r: &MultiCoilKSpace, op: &AcquisitionOperator) -> Result<DynamicImage> {
    op.check_kspace(r)?;
    combine(r, op.maps())
}
