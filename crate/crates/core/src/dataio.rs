//! On-disk container for arrays plus the CSV/JSON report writer.
//!
//! Layout, all little-endian, no padding:
//!
//! ```text
//! "CMRX0001" | kind u8 | dtype u8 | ndim u8 | ndim × u32 dims | payload
//! ```
//!
//! kind: 0 k-space (coil, frame, row, col), 1 image (frame, row, col; a single
//! frame may drop the frame axis), 2 maps (coil, row, col), 3 mask (same axes
//! as image). dtype: 0 complex (re, im as f64), 1 real f64, 2 u8.

use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use crate::array::{DynamicImage, MultiCoilKSpace, RealImage, SamplingMask, SensitivityMaps, C64};
use crate::error::{Error, Result};
use crate::metrics::ReconReport;
use crate::vsharp::SolveTrace;

pub const MAGIC: &[u8; 8] = b"CMRX0001";
const HEADER_FIXED: usize = 11;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    KSpace = 0,
    Image = 1,
    Maps = 2,
    Mask = 3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    Complex = 0,
    Real = 1,
    U8 = 2,
}

impl DType {
    fn width(self) -> usize {
        match self {
            DType::Complex => 16,
            DType::Real => 8,
            DType::U8 => 1,
        }
    }
}

/// Any array the container can hold.
#[derive(Debug, Clone, PartialEq)]
pub enum Array {
    KSpace(MultiCoilKSpace),
    Image(DynamicImage),
    RealImage(RealImage),
    Maps(SensitivityMaps),
    Mask(SamplingMask),
}

impl Array {
    pub fn kind(&self) -> Kind {
        match self {
            Array::KSpace(_) => Kind::KSpace,
            Array::Image(_) | Array::RealImage(_) => Kind::Image,
            Array::Maps(_) => Kind::Maps,
            Array::Mask(_) => Kind::Mask,
        }
    }
}

fn format_err<T>(offset: usize, message: impl Into<String>) -> Result<T> {
    Err(Error::Format { offset, message: message.into() })
}

/// Frame axis is dropped for single-frame images and masks.
fn frame_dims(nf: usize, ny: usize, nx: usize) -> Vec<usize> {
    if nf == 1 {
        vec![ny, nx]
    } else {
        vec![nf, ny, nx]
    }
}

fn header(kind: Kind, dtype: DType, dims: &[usize]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_FIXED + 4 * dims.len());
    out.extend_from_slice(MAGIC);
    out.push(kind as u8);
    out.push(dtype as u8);
    out.push(dims.len() as u8);
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out
}

fn push_complex(out: &mut Vec<u8>, data: &[C64]) {
    for v in data {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
}

pub fn encode(array: &Array) -> Vec<u8> {
    match array {
        Array::KSpace(k) => {
            let (nc, nf, ny, nx) = k.shape();
            let mut out = header(Kind::KSpace, DType::Complex, &[nc, nf, ny, nx]);
            push_complex(&mut out, k.data());
            out
        }
        Array::Image(x) => {
            let (nf, ny, nx) = x.shape();
            let mut out = header(Kind::Image, DType::Complex, &frame_dims(nf, ny, nx));
            push_complex(&mut out, x.data());
            out
        }
        Array::RealImage(x) => {
            let (nf, ny, nx) = x.shape();
            let mut out = header(Kind::Image, DType::Real, &frame_dims(nf, ny, nx));
            for v in x.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out
        }
        Array::Maps(s) => {
            let mut out = header(Kind::Maps, DType::Complex, &[s.nc(), s.ny(), s.nx()]);
            push_complex(&mut out, s.data());
            out
        }
        Array::Mask(m) => {
            let (nf, ny, nx) = m.shape();
            let mut out = header(Kind::Mask, DType::U8, &frame_dims(nf, ny, nx));
            out.extend_from_slice(m.data());
            out
        }
    }
}

fn read_f64(bytes: &[u8], offset: usize) -> Result<f64> {
    let v = f64::from_le_bytes(bytes[offset..offset + 8].try_into().expect("8 bytes"));
    if !v.is_finite() {
        return format_err(offset, "non-finite value");
    }
    Ok(v)
}

fn complex_payload(bytes: &[u8], start: usize, n: usize) -> Result<Vec<C64>> {
    (0..n)
        .map(|i| {
            let o = start + 16 * i;
            Ok(C64::new(read_f64(bytes, o)?, read_f64(bytes, o + 8)?))
        })
        .collect()
}

fn shape_error(offset: usize, e: Error) -> Error {
    Error::Format { offset, message: e.to_string() }
}

pub fn decode(bytes: &[u8]) -> Result<Array> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return format_err(0, "bad magic");
    }
    if bytes.len() < HEADER_FIXED {
        return format_err(bytes.len(), "truncated header");
    }
    let kind = match bytes[8] {
        0 => Kind::KSpace,
        1 => Kind::Image,
        2 => Kind::Maps,
        3 => Kind::Mask,
        k => return format_err(8, format!("unknown kind code {k}")),
    };
    let dtype = match bytes[9] {
        0 => DType::Complex,
        1 => DType::Real,
        2 => DType::U8,
        d => return format_err(9, format!("unknown dtype code {d}")),
    };
    let ndim = bytes[10] as usize;
    let dtype_ok = match kind {
        Kind::KSpace | Kind::Maps => dtype == DType::Complex,
        Kind::Image => dtype != DType::U8,
        Kind::Mask => dtype == DType::U8,
    };
    if !dtype_ok {
        return format_err(9, format!("dtype {dtype:?} is not valid for {kind:?}"));
    }
    let ndim_ok = match kind {
        Kind::KSpace => ndim == 4,
        Kind::Maps => ndim == 3,
        Kind::Image | Kind::Mask => ndim == 2 || ndim == 3,
    };
    if !ndim_ok {
        return format_err(10, format!("ndim {ndim} is not valid for {kind:?}"));
    }
    let payload_start = HEADER_FIXED + 4 * ndim;
    if bytes.len() < payload_start {
        return format_err(bytes.len(), "truncated header");
    }
    let mut dims = Vec::with_capacity(ndim);
    for i in 0..ndim {
        let o = HEADER_FIXED + 4 * i;
        let d = u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
        if d == 0 {
            return format_err(o, "zero-length axis");
        }
        dims.push(d);
    }
    let count = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
    let expected = count
        .and_then(|c| c.checked_mul(dtype.width()))
        .and_then(|p| p.checked_add(payload_start));
    let expected = match expected {
        Some(e) => e,
        None => return format_err(HEADER_FIXED, "dimensions overflow"),
    };
    let n = count.expect("checked above");
    if bytes.len() < expected {
        return format_err(bytes.len(), format!("truncated payload: expected {expected} bytes"));
    }
    if bytes.len() > expected {
        return format_err(expected, "trailing bytes after payload");
    }
    let (nf, ny, nx) = match (kind, ndim) {
        (Kind::Image | Kind::Mask, 2) => (1, dims[0], dims[1]),
        (Kind::Image | Kind::Mask, 3) => (dims[0], dims[1], dims[2]),
        _ => (0, 0, 0),
    };
    let p = payload_start;
    let array = match kind {
        Kind::KSpace => {
            let data = complex_payload(bytes, p, n)?;
            MultiCoilKSpace::new(dims[0], dims[1], dims[2], dims[3], data).map(Array::KSpace)
        }
        Kind::Maps => {
            let data = complex_payload(bytes, p, n)?;
            SensitivityMaps::new(dims[0], dims[1], dims[2], data).map(Array::Maps)
        }
        Kind::Image if dtype == DType::Complex => {
            let data = complex_payload(bytes, p, n)?;
            DynamicImage::new(nf, ny, nx, data).map(Array::Image)
        }
        Kind::Image => {
            let data = (0..n).map(|i| read_f64(bytes, p + 8 * i)).collect::<Result<Vec<f64>>>()?;
            RealImage::new(nf, ny, nx, data).map(Array::RealImage)
        }
        Kind::Mask => {
            let data = bytes[p..].to_vec();
            if let Some(i) = data.iter().position(|&v| v > 1) {
                return format_err(p + i, format!("mask value {} is not 0 or 1", data[i]));
            }
            SamplingMask::new(nf, ny, nx, data).map(Array::Mask)
        }
    };
    array.map_err(|e| shape_error(HEADER_FIXED, e))
}

pub fn write_array(path: &Path, array: &Array) -> Result<()> {
    fs::write(path, encode(array))?;
    Ok(())
}

pub fn read_array(path: &Path) -> Result<Array> {
    decode(&fs::read(path)?)
}

fn kind_mismatch<T>(expected: Kind, got: &Array) -> Result<T> {
    format_err(8, format!("expected {expected:?}, found {:?}", got.kind()))
}

pub fn read_kspace(path: &Path) -> Result<MultiCoilKSpace> {
    match read_array(path)? {
        Array::KSpace(k) => Ok(k),
        other => kind_mismatch(Kind::KSpace, &other),
    }
}

/// Complex image; a real-valued file is promoted to complex.
pub fn read_image(path: &Path) -> Result<DynamicImage> {
    match read_array(path)? {
        Array::Image(x) => Ok(x),
        Array::RealImage(x) => Ok(DynamicImage::from_real(&x)),
        other => kind_mismatch(Kind::Image, &other),
    }
}

pub fn read_maps(path: &Path) -> Result<SensitivityMaps> {
    match read_array(path)? {
        Array::Maps(s) => Ok(s),
        other => kind_mismatch(Kind::Maps, &other),
    }
}

pub fn read_mask(path: &Path) -> Result<SamplingMask> {
    match read_array(path)? {
        Array::Mask(m) => Ok(m),
        other => kind_mismatch(Kind::Mask, &other),
    }
}

fn fmt_float(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.6}")
    }
}

fn json_float(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(fmt_float(v))
    }
}

pub const REPORT_HEADER: &str = "method,volume,acceleration,scheme,ssim,ssim3d,psnr,nmse,wall_seconds";

fn sorted(reports: &[ReconReport]) -> Vec<&ReconReport> {
    let mut rows: Vec<&ReconReport> = reports.iter().collect();
    rows.sort_by(|a, b| (&a.method, &a.volume).cmp(&(&b.method, &b.volume)));
    rows
}

pub fn report_csv(reports: &[ReconReport]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in sorted(reports) {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.method,
            r.volume,
            r.acceleration,
            r.scheme,
            fmt_float(r.ssim),
            fmt_float(r.ssim3d.unwrap_or(f64::NAN)),
            fmt_float(r.psnr),
            fmt_float(r.nmse),
            fmt_float(r.wall_seconds),
        ));
    }
    out
}

pub fn report_json(reports: &[ReconReport]) -> String {
    let records: Vec<Value> = sorted(reports)
        .into_iter()
        .map(|r| {
            json!({
                "method": r.method,
                "volume": r.volume,
                "acceleration": r.acceleration,
                "scheme": r.scheme,
                "ssim": json_float(r.ssim),
                "ssim3d": r.ssim3d.map(json_float),
                "psnr": json_float(r.psnr),
                "nmse": json_float(r.nmse),
                "wall_seconds": json_float(r.wall_seconds),
            })
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&records).expect("report records serialize");
    s.push('\n');
    s
}

pub fn write_report(csv_path: &Path, json_path: &Path, reports: &[ReconReport]) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::InvalidParameter("no reports to write".into()));
    }
    fs::write(csv_path, report_csv(reports))?;
    fs::write(json_path, report_json(reports))?;
    Ok(())
}

/// Persists a solve trace as `z0.cmrx`, `x_NN.cmrx`, `y_NN.cmrx` and
/// `residuals.json` inside `dir`.
pub fn write_trace(dir: &Path, trace: &SolveTrace) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_array(&dir.join("z0.cmrx"), &Array::Image(trace.z0.clone()))?;
    for (j, (x, y)) in trace.iterates.iter().enumerate() {
        write_array(&dir.join(format!("x_{:02}.cmrx", j + 1)), &Array::Image(x.clone()))?;
        write_array(&dir.join(format!("y_{:02}.cmrx", j + 1)), &Array::KSpace(y.clone()))?;
    }
    let residuals = serde_json::to_string(&trace.residual_history).expect("residuals serialize");
    fs::write(dir.join("residuals.json"), residuals)?;
    Ok(())
}

pub fn read_trace(dir: &Path) -> Result<SolveTrace> {
    let z0 = read_image(&dir.join("z0.cmrx"))?;
    let text = fs::read_to_string(dir.join("residuals.json"))?;
    let residual_history: Vec<f64> = serde_json::from_str(&text)
        .map_err(|e| Error::Format { offset: 0, message: format!("residuals.json: {e}") })?;
    let mut iterates = Vec::with_capacity(residual_history.len());
    for j in 1..=residual_history.len() {
        let x = read_image(&dir.join(format!("x_{j:02}.cmrx")))?;
        let y = read_kspace(&dir.join(format!("y_{j:02}.cmrx")))?;
        iterates.push((x, y));
    }
    Ok(SolveTrace { iterates, z0, residual_history })
}
