pub mod array;
pub mod arn;
pub mod baselines;
pub mod calibration;
pub mod dataio;
pub mod error;
pub mod fourier;
pub mod metrics;
pub mod phantom;
pub mod priors;
pub mod rng;
pub mod sampling;
pub mod suite;
pub mod vsharp;

pub use array::{
    inner_product, rss_combine, DynamicImage, MultiCoilKSpace, RealImage, SamplingMask, SensitivityMaps, C64,
};
pub use error::{Error, Result};
