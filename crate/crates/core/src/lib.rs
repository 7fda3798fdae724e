//! Operator-valued random Fourier features.
//!
//! Randomized finite-dimensional feature maps for shift-invariant
//! matrix-valued kernels (decomposable, curl-free and divergence-free
//! Gaussians), matrix-free operators over those maps, vector-valued ridge
//! solvers, and numerical evaluation of the associated concentration bounds.
//!
//! ```
//! use orffkit::{features::FeatureMap, kernels::{signature, KernelSpec}};
//!
//! let spec = KernelSpec::curl_free(2, 1.0).unwrap();
//! let map = FeatureMap::build(&spec, 4096, 7).unwrap();
//! let approx = map.approx_kernel(&[0.2, 0.1], &[-0.3, 0.4]).unwrap();
//! let exact = signature(&spec, &[0.5, -0.3]).unwrap().value;
//! assert!((approx - exact).amax() < 0.1);
//! ```

pub mod bounds;
pub mod error;
pub mod features;
pub mod kernels;
pub mod learn;
pub mod linalg;
pub mod rng;
pub mod spectral;
pub mod workbench;

pub use error::{OrffError, Result};
