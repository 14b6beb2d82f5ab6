//! Blur and noise removal for grayscale images with economical cascadic
//! multigrid methods.
//!
//! The degraded image is modelled as `g = H u + e`, where `H = h ⊗ h` is a
//! banded Gaussian Toeplitz blur. Restoration solves `H u = g` with CG or
//! MR, stopped by the discrepancy principle, either directly on the input
//! grid or through a coarse-to-fine cascade whose prolongations are
//! followed by a local least-squares smoother and Perona-Malik diffusion.
//!
//! ```no_run
//! use cascade_restore::{degrade, phantom, restore, CascadeConfig, DegradationSpec};
//!
//! let truth = phantom(129);
//! let spec = DegradationSpec { sigma: 1.0, band: 7, noise_level: 0.05, seed: 1 };
//! let degraded = degrade(&truth, &spec).unwrap();
//! let config = CascadeConfig { levels: 3, ..Default::default() };
//! let report = restore(&degraded.noisy, &degraded.kernel, degraded.delta, &config, Some(&truth)).unwrap();
//! println!("{}: {:.2} dB", report.label, report.psnr_db.unwrap());
//! ```

pub mod blur;
pub mod cascade;
pub mod error;
pub mod experiment;
pub mod image;
pub mod pgm;
pub mod phantom;
pub mod regularize;
pub mod solve;
pub mod transfer;

pub use blur::{apply_blur, build_kernel, coarsen_kernel, degrade, BlurKernel1D, DegradationSpec, Degraded};
pub use cascade::{
    build_hierarchy, restore, run_method, CascadeConfig, CoarseOperator, GridHierarchy, Method, RestorationReport,
};
pub use error::{Error, Result};
pub use image::{psnr, rms_norm, ImageGrid, RmsScalar, PSNR_CAP_DB};
pub use pgm::{read_pgm, write_pgm};
pub use phantom::phantom;
pub use regularize::{apply_ds, local_smooth, pm_diffuse, DiffusionParams, LsqParams};
pub use solve::{cg_smooth, iteration_schedule, mr_smooth, Schedule, Smoother, SolverConfig, StopReason};
pub use transfer::{prolong_extrapolated, prolong_linear, prolong_quadratic, restrict};
