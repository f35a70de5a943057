//! Complex array containers shared by the whole pipeline.
//!
//! Every container is a flat row-major buffer. Axis order is fixed globally as
//! (coil, frame, row, column); containers without a coil or frame axis simply
//! drop it.

use num_complex::Complex64;

use crate::error::{dim_err, Error, Result};

pub type C64 = Complex64;

fn check_spatial(ny: usize, nx: usize) -> Result<()> {
    if ny < 2 || nx < 2 {
        return dim_err(format!("spatial size {ny}x{nx} is below the 2x2 minimum"));
    }
    Ok(())
}

fn check_len(what: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return dim_err(format!("{what}: expected {expected} values, got {got}"));
    }
    Ok(())
}

fn check_finite(what: &str, data: &[C64]) -> Result<()> {
    match data.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
        Some(i) => Err(Error::Numeric(format!("{what}: non-finite value at index {i}"))),
        None => Ok(()),
    }
}

/// Complex image sequence, axes (frame, row, column).
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicImage {
    nf: usize,
    ny: usize,
    nx: usize,
    data: Vec<C64>,
}

impl DynamicImage {
    pub fn new(nf: usize, ny: usize, nx: usize, data: Vec<C64>) -> Result<Self> {
        if nf == 0 {
            return dim_err("image needs at least one frame");
        }
        check_spatial(ny, nx)?;
        check_len("image", nf * ny * nx, data.len())?;
        check_finite("image", &data)?;
        Ok(Self { nf, ny, nx, data })
    }

    pub fn zeros(nf: usize, ny: usize, nx: usize) -> Self {
        Self { nf, ny, nx, data: vec![C64::new(0.0, 0.0); nf * ny * nx] }
    }

    pub fn zeros_like(other: &Self) -> Self {
        Self::zeros(other.nf, other.ny, other.nx)
    }

    pub fn from_real(real: &RealImage) -> Self {
        Self {
            nf: real.nf,
            ny: real.ny,
            nx: real.nx,
            data: real.data.iter().map(|&v| C64::new(v, 0.0)).collect(),
        }
    }

    pub fn nf(&self) -> usize {
        self.nf
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.nf, self.ny, self.nx)
    }
    pub fn frame_len(&self) -> usize {
        self.ny * self.nx
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }
    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn frame(&self, f: usize) -> &[C64] {
        let n = self.frame_len();
        &self.data[f * n..(f + 1) * n]
    }
    pub fn frame_mut(&mut self, f: usize) -> &mut [C64] {
        let n = self.frame_len();
        &mut self.data[f * n..(f + 1) * n]
    }

    pub fn same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return dim_err(format!("image shapes differ: {:?} vs {:?}", self.shape(), other.shape()));
        }
        Ok(())
    }

    pub fn magnitude(&self) -> RealImage {
        RealImage {
            nf: self.nf,
            ny: self.ny,
            nx: self.nx,
            data: self.data.iter().map(|v| v.norm()).collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        check_finite("", &self.data).is_ok()
    }

    pub fn scale(&mut self, s: C64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }
}

/// Real-valued image sequence (magnitudes, ground truth references).
#[derive(Debug, Clone, PartialEq)]
pub struct RealImage {
    nf: usize,
    ny: usize,
    nx: usize,
    data: Vec<f64>,
}

impl RealImage {
    pub fn new(nf: usize, ny: usize, nx: usize, data: Vec<f64>) -> Result<Self> {
        if nf == 0 {
            return dim_err("image needs at least one frame");
        }
        check_spatial(ny, nx)?;
        check_len("real image", nf * ny * nx, data.len())?;
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("real image: non-finite value at index {i}")));
        }
        Ok(Self { nf, ny, nx, data })
    }

    pub fn nf(&self) -> usize {
        self.nf
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.nf, self.ny, self.nx)
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn frame(&self, f: usize) -> &[f64] {
        let n = self.ny * self.nx;
        &self.data[f * n..(f + 1) * n]
    }
}

/// Multi-coil k-space, axes (coil, frame, row, column).
#[derive(Debug, Clone, PartialEq)]
pub struct MultiCoilKSpace {
    nc: usize,
    nf: usize,
    ny: usize,
    nx: usize,
    data: Vec<C64>,
}

impl MultiCoilKSpace {
    pub fn new(nc: usize, nf: usize, ny: usize, nx: usize, data: Vec<C64>) -> Result<Self> {
        if nc == 0 || nf == 0 {
            return dim_err("k-space needs at least one coil and one frame");
        }
        check_spatial(ny, nx)?;
        check_len("k-space", nc * nf * ny * nx, data.len())?;
        check_finite("k-space", &data)?;
        Ok(Self { nc, nf, ny, nx, data })
    }

    pub fn zeros(nc: usize, nf: usize, ny: usize, nx: usize) -> Self {
        Self { nc, nf, ny, nx, data: vec![C64::new(0.0, 0.0); nc * nf * ny * nx] }
    }

    pub fn zeros_like(other: &Self) -> Self {
        Self::zeros(other.nc, other.nf, other.ny, other.nx)
    }

    pub fn nc(&self) -> usize {
        self.nc
    }
    pub fn nf(&self) -> usize {
        self.nf
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.nc, self.nf, self.ny, self.nx)
    }
    pub fn frame_len(&self) -> usize {
        self.ny * self.nx
    }
    pub fn data(&self) -> &[C64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }
    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    fn offset(&self, coil: usize, frame: usize) -> usize {
        (coil * self.nf + frame) * self.frame_len()
    }
    pub fn slice(&self, coil: usize, frame: usize) -> &[C64] {
        let o = self.offset(coil, frame);
        &self.data[o..o + self.frame_len()]
    }
    pub fn slice_mut(&mut self, coil: usize, frame: usize) -> &mut [C64] {
        let o = self.offset(coil, frame);
        let n = self.frame_len();
        &mut self.data[o..o + n]
    }

    pub fn same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return dim_err(format!("k-space shapes differ: {:?} vs {:?}", self.shape(), other.shape()));
        }
        Ok(())
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.data)
    }

    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).sum()
    }

    pub fn scale(&mut self, s: C64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }
}

/// Per-coil complex sensitivity maps, axes (coil, row, column), shared by all frames.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityMaps {
    nc: usize,
    ny: usize,
    nx: usize,
    data: Vec<C64>,
    support: Vec<bool>,
}

impl SensitivityMaps {
    const NORM_TOL: f64 = 1e-6;

    /// Validates `Σ_k |S_k|² ≤ 1 + 1e-6` at every pixel. The support flag is set
    /// wherever the coil energy is 1 within 1e-6.
    pub fn new(nc: usize, ny: usize, nx: usize, data: Vec<C64>) -> Result<Self> {
        let support = Self::unit_energy_pixels(nc, ny, nx, &data)?;
        Ok(Self { nc, ny, nx, data, support })
    }

    /// Like [`SensitivityMaps::new`] but with an explicit support flag. Pixels
    /// flagged as support must carry unit coil energy.
    pub fn with_support(nc: usize, ny: usize, nx: usize, data: Vec<C64>, support: Vec<bool>) -> Result<Self> {
        let unit = Self::unit_energy_pixels(nc, ny, nx, &data)?;
        check_len("support flag", ny * nx, support.len())?;
        if let Some(p) = support.iter().zip(&unit).position(|(&s, &u)| s && !u) {
            return Err(Error::InvalidParameter(format!(
                "support pixel {p} does not have unit coil energy"
            )));
        }
        Ok(Self { nc, ny, nx, data, support })
    }

    fn unit_energy_pixels(nc: usize, ny: usize, nx: usize, data: &[C64]) -> Result<Vec<bool>> {
        if nc == 0 {
            return dim_err("maps need at least one coil");
        }
        check_spatial(ny, nx)?;
        check_len("sensitivity maps", nc * ny * nx, data.len())?;
        check_finite("sensitivity maps", data)?;
        let n = ny * nx;
        let mut unit = vec![false; n];
        for (p, flag) in unit.iter_mut().enumerate() {
            let energy: f64 = (0..nc).map(|k| data[k * n + p].norm_sqr()).sum();
            if energy > 1.0 + Self::NORM_TOL {
                return Err(Error::InvalidParameter(format!(
                    "coil energy {energy} exceeds 1 at pixel {p}"
                )));
            }
            *flag = (energy - 1.0).abs() <= Self::NORM_TOL;
        }
        Ok(unit)
    }

    /// Single coil with unit sensitivity everywhere.
    pub fn unit(ny: usize, nx: usize) -> Self {
        Self {
            nc: 1,
            ny,
            nx,
            data: vec![C64::new(1.0, 0.0); ny * nx],
            support: vec![true; ny * nx],
        }
    }

    pub fn nc(&self) -> usize {
        self.nc
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn data(&self) -> &[C64] {
        &self.data
    }
    pub fn support(&self) -> &[bool] {
        &self.support
    }
    pub fn map(&self, coil: usize) -> &[C64] {
        let n = self.ny * self.nx;
        &self.data[coil * n..(coil + 1) * n]
    }

    /// Σ_k |S_k|² per pixel.
    pub fn coil_energy(&self) -> Vec<f64> {
        let n = self.ny * self.nx;
        (0..n)
            .map(|p| (0..self.nc).map(|k| self.data[k * n + p].norm_sqr()).sum())
            .collect()
    }
}

/// Binary sampling pattern, axes (frame, row, column).
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingMask {
    nf: usize,
    ny: usize,
    nx: usize,
    data: Vec<u8>,
    cartesian_columns: Option<Vec<Vec<usize>>>,
}

impl SamplingMask {
    pub fn new(nf: usize, ny: usize, nx: usize, data: Vec<u8>) -> Result<Self> {
        if nf == 0 {
            return dim_err("mask needs at least one frame");
        }
        check_spatial(ny, nx)?;
        check_len("mask", nf * ny * nx, data.len())?;
        if let Some(i) = data.iter().position(|&v| v > 1) {
            return Err(Error::InvalidParameter(format!("mask value {} at index {i} is not 0 or 1", data[i])));
        }
        let cartesian_columns = Self::infer_columns(nf, ny, nx, &data);
        Ok(Self { nf, ny, nx, data, cartesian_columns })
    }

    /// Column lists when every row of every frame repeats the frame's first row.
    fn infer_columns(nf: usize, ny: usize, nx: usize, data: &[u8]) -> Option<Vec<Vec<usize>>> {
        let mut columns = Vec::with_capacity(nf);
        for f in 0..nf {
            let frame = &data[f * ny * nx..(f + 1) * ny * nx];
            let first = &frame[..nx];
            if frame.chunks(nx).any(|row| row != first) {
                return None;
            }
            columns.push(first.iter().enumerate().filter(|(_, &v)| v == 1).map(|(c, _)| c).collect());
        }
        Some(columns)
    }

    /// Cartesian mask: every row of frame `f` samples exactly the columns in `columns[f]`.
    pub fn from_columns(nf: usize, ny: usize, nx: usize, columns: Vec<Vec<usize>>) -> Result<Self> {
        if nf == 0 {
            return dim_err("mask needs at least one frame");
        }
        check_spatial(ny, nx)?;
        check_len("column lists", nf, columns.len())?;
        let mut data = vec![0u8; nf * ny * nx];
        let mut sorted = Vec::with_capacity(nf);
        for (f, cols) in columns.into_iter().enumerate() {
            let mut cols = cols;
            cols.sort_unstable();
            cols.dedup();
            if let Some(&c) = cols.iter().find(|&&c| c >= nx) {
                return dim_err(format!("column {c} out of range for nx={nx}"));
            }
            for r in 0..ny {
                let row = &mut data[(f * ny + r) * nx..(f * ny + r + 1) * nx];
                for &c in &cols {
                    row[c] = 1;
                }
            }
            sorted.push(cols);
        }
        Ok(Self { nf, ny, nx, data, cartesian_columns: Some(sorted) })
    }

    pub fn full(nf: usize, ny: usize, nx: usize) -> Self {
        Self::from_columns(nf, ny, nx, vec![(0..nx).collect(); nf]).expect("valid full mask")
    }

    pub fn empty(nf: usize, ny: usize, nx: usize) -> Self {
        Self::from_columns(nf, ny, nx, vec![Vec::new(); nf]).expect("valid empty mask")
    }

    pub fn nf(&self) -> usize {
        self.nf
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.nf, self.ny, self.nx)
    }
    pub fn data(&self) -> &[u8] {
        &self.data
    }
    pub fn frame(&self, f: usize) -> &[u8] {
        let n = self.ny * self.nx;
        &self.data[f * n..(f + 1) * n]
    }
    pub fn cartesian_columns(&self) -> Option<&[Vec<usize>]> {
        self.cartesian_columns.as_deref()
    }
    pub fn is_sampled(&self, f: usize, r: usize, c: usize) -> bool {
        self.data[(f * self.ny + r) * self.nx + c] == 1
    }
    pub fn sampled_count(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    /// Sorted set of columns with at least one sampled entry in frame `f`.
    pub fn columns_touched(&self, f: usize) -> Vec<usize> {
        let fr = self.frame(f);
        (0..self.nx)
            .filter(|&c| (0..self.ny).any(|r| fr[r * self.nx + c] == 1))
            .collect()
    }
}

/// Root-sum-of-squares coil combination.
pub fn rss_combine(coil_images: &[DynamicImage]) -> Result<RealImage> {
    let first = coil_images
        .first()
        .ok_or_else(|| Error::Dimension("rss_combine needs at least one coil".into()))?;
    for img in &coil_images[1..] {
        first.same_shape(img)?;
    }
    let (nf, ny, nx) = first.shape();
    let data = (0..nf * ny * nx)
        .map(|i| coil_images.iter().map(|img| img.data[i].norm_sqr()).sum::<f64>().sqrt())
        .collect();
    Ok(RealImage { nf, ny, nx, data })
}

/// `⟨a, b⟩ = Σ a_i·conj(b_i)`, accumulated sequentially in flat order.
pub fn inner_product(a: &[C64], b: &[C64]) -> Result<C64> {
    if a.len() != b.len() {
        return dim_err(format!("inner product of lengths {} and {}", a.len(), b.len()));
    }
    Ok(a.iter().zip(b).fold(C64::new(0.0, 0.0), |acc, (x, y)| acc + x * y.conj()))
}

pub fn l2_norm(a: &[C64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}
