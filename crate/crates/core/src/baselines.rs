//! Classical reference reconstructions: zero-filled and Tikhonov-regularized
//! CG-SENSE.

use serde::{Deserialize, Serialize};

use crate::array::{DynamicImage, MultiCoilKSpace, C64};
use crate::error::{Error, Result};
use crate::fourier::{adjoint, forward, AcquisitionOperator};

/// `Tᴴy`.
pub fn zero_filled(y: &MultiCoilKSpace, op: &AcquisitionOperator) -> Result<DynamicImage> {
    adjoint(y, op)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SenseConfig {
    /// Tikhonov weight `μ`.
    pub mu: f64,
    pub iterations: usize,
    /// Relative residual stopping threshold.
    pub tol: f64,
}

impl Default for SenseConfig {
    fn default() -> Self {
        Self { mu: 1e-2, iterations: 15, tol: 1e-6 }
    }
}

impl SenseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu >= 0.0) || !self.mu.is_finite() {
            return Err(Error::InvalidParameter(format!("mu must be ≥ 0, got {}", self.mu)));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iterations must be ≥ 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidParameter(format!("tol must be ≥ 0, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgResult {
    pub image: DynamicImage,
    /// `‖b − Nx‖₂` before the first and after every iteration.
    pub residual_history: Vec<f64>,
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).fold(C64::new(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y)
}

fn normal_op(x: &DynamicImage, op: &AcquisitionOperator, mu: f64) -> Result<DynamicImage> {
    let mut out = adjoint(&forward(x, op)?, op)?;
    for (o, v) in out.data_mut().iter_mut().zip(x.data()) {
        *o += v * mu;
    }
    Ok(out)
}

/// Solves `(TᴴT + μI)x = Tᴴy` from `x = 0` with the conjugate-residual form of
/// conjugate gradient, which keeps `‖b − Nx‖₂` non-increasing.
pub fn cg_sense_with_history(y: &MultiCoilKSpace, op: &AcquisitionOperator, cfg: &SenseConfig) -> Result<CgResult> {
    cfg.validate()?;
    let b = adjoint(y, op)?;
    let mut x = DynamicImage::zeros_like(&b);
    let b_norm = b.norm();
    let mut history = vec![b_norm];
    if b_norm == 0.0 {
        return Ok(CgResult { image: x, residual_history: history });
    }
    let mut r = b;
    let mut ar = normal_op(&r, op, cfg.mu)?;
    let mut p = r.clone();
    let mut ap = ar.clone();
    let mut rar = dot(r.data(), ar.data()).re;
    for _ in 0..cfg.iterations {
        let apap = dot(ap.data(), ap.data()).re;
        if !(rar > 0.0) || !(apap > 0.0) {
            return Err(Error::Numeric(format!("CG breakdown: search-direction curvature {rar}")));
        }
        let alpha = rar / apap;
        for ((xi, ri), (pi, api)) in x.data_mut().iter_mut().zip(r.data_mut()).zip(p.data().iter().zip(ap.data())) {
            *xi += pi * alpha;
            *ri -= api * alpha;
        }
        let r_norm = r.norm();
        history.push(r_norm);
        if r_norm <= cfg.tol * b_norm {
            break;
        }
        ar = normal_op(&r, op, cfg.mu)?;
        let rar_next = dot(r.data(), ar.data()).re;
        let beta = rar_next / rar;
        for ((pi, ri), (api, ari)) in p.data_mut().iter_mut().zip(r.data()).zip(ap.data_mut().iter_mut().zip(ar.data())) {
            *pi = ri + *pi * beta;
            *api = ari + *api * beta;
        }
        rar = rar_next;
    }
    if !x.is_finite() {
        return Err(Error::Numeric("CG produced a non-finite value".into()));
    }
    Ok(CgResult { image: x, residual_history: history })
}

pub fn cg_sense(y: &MultiCoilKSpace, op: &AcquisitionOperator, cfg: &SenseConfig) -> Result<DynamicImage> {
    Ok(cg_sense_with_history(y, op, cfg)?.image)
}
