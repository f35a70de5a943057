use std::path::Path;

use image::GrayImage;
use vsharp_core::{DynamicImage, Error};

/// Writes the magnitude of every frame side by side as 8-bit grey, each frame
/// min-max normalized on its own. A constant frame comes out black.
pub fn write_png(path: &Path, image: &DynamicImage) -> Result<(), Error> {
    let (nf, ny, nx) = image.shape();
    let mag = image.magnitude();
    let mut out = GrayImage::new((nf * nx) as u32, ny as u32);
    for f in 0..nf {
        let frame = mag.frame(f);
        let lo = frame.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = frame.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        for (i, &v) in frame.iter().enumerate() {
            let level = if span > 0.0 { ((v - lo) / span * 255.0).round() as u8 } else { 0 };
            out.put_pixel((f * nx + i % nx) as u32, (i / nx) as u32, image::Luma([level]));
        }
    }
    out.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}
