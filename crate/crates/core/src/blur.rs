//! Gaussian banded Toeplitz blur `H = h ⊗ h`, applied separably.
//!
//! `h` is the `n x n` symmetric Toeplitz matrix whose entry at lag `d` is
//! the raw (unnormalized) Gaussian density for `d <= band` and zero beyond.
//! Indices that fall outside the image contribute nothing; rows are not
//! renormalized near the border.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::image::{rms_norm, ImageGrid, RmsScalar};

/// One factor of the separable blur, stored as its lag taps.
#[derive(Debug, Clone, PartialEq)]
pub struct BlurKernel1D {
    n: usize,
    sigma: f64,
    band: usize,
    taps: Vec<f64>,
}

impl BlurKernel1D {
    /// Gaussian factor with `taps[d] = exp(-d²/2σ²) / (σ√(2π))`.
    pub fn gaussian(sigma: f64, band: usize, n: usize) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::config(format!("sigma must be positive, got {sigma}")));
        }
        if band == 0 {
            return Err(Error::config("band must be at least 1"));
        }
        if band >= n {
            return Err(Error::config(format!("band {band} must be smaller than the side {n}")));
        }
        let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        let taps = (0..=band)
            .map(|d| {
                let d = d as f64;
                norm * (-(d * d) / (2.0 * sigma * sigma)).exp()
            })
            .collect();
        Ok(Self { n, sigma, band, taps })
    }

    /// Arbitrary symmetric banded factor; `taps[0]` is the diagonal.
    /// `sigma()` is 0 for kernels built this way.
    pub fn from_taps(n: usize, taps: Vec<f64>) -> Result<Self> {
        if taps.is_empty() || taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::config("taps must be nonempty and finite"));
        }
        let band = taps.len() - 1;
        if band >= n {
            return Err(Error::config(format!("band {band} must be smaller than the side {n}")));
        }
        Ok(Self {
            n,
            sigma: 0.0,
            band,
            taps,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Gaussian width in pixels of this level (halves on every coarsening).
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn band(&self) -> usize {
        self.band
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// Entry `h[i][j]` of the dense factor.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let lag = i.abs_diff(j);
        self.taps.get(lag).copied().unwrap_or(0.0)
    }

    /// Factor of `R H R*` where `R` injects at every other node (0, 2, 4, ...)
    /// and `R*` inserts zeros.
    ///
    /// Sampling a Toeplitz matrix at even rows and columns keeps the even
    /// lags: `taps'[d] = taps[2d]`, `band' = band / 2`.
    pub fn coarsen(&self) -> Result<Self> {
        if self.n < 3 {
            return Err(Error::config(format!("cannot coarsen a kernel of side {}", self.n)));
        }
        let n = coarse_side(self.n);
        let band = self.band / 2;
        let taps = (0..=band).map(|d| self.taps[2 * d]).collect();
        Ok(Self {
            n,
            sigma: self.sigma / 2.0,
            band,
            taps,
        })
    }

    /// The same factor with every tap multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            taps: self.taps.iter().map(|t| t * factor).collect(),
            ..self.clone()
        }
    }

    /// `y = h x` for a single line of samples with stride `stride`.
    fn convolve_line(&self, src: &[f64], dst: &mut [f64], len: usize, stride: usize) {
        let band = self.band as isize;
        for i in 0..len as isize {
            let lo = (i - band).max(0);
            let hi = (i + band).min(len as isize - 1);
            let mut acc = 0.0;
            for j in lo..=hi {
                acc += self.taps[(i - j).unsigned_abs()] * src[j as usize * stride];
            }
            dst[i as usize * stride] = acc;
        }
    }
}

/// Side of the next coarser grid: `(n + 1) / 2` for odd `n`, `n / 2` for even.
pub fn coarse_side(n: usize) -> usize {
    n.div_ceil(2)
}

pub fn build_kernel(sigma: f64, band: usize, n: usize) -> Result<BlurKernel1D> {
    BlurKernel1D::gaussian(sigma, band, n)
}

pub fn coarsen_kernel(kernel: &BlurKernel1D) -> Result<BlurKernel1D> {
    kernel.coarsen()
}

/// `h U hᵀ` for a square image `U` of side `kernel.n()`.
pub fn apply_blur(kernel: &BlurKernel1D, image: &ImageGrid) -> Result<ImageGrid> {
    let n = kernel.n;
    if image.width() != n || image.height() != n {
        return Err(Error::shape(format!(
            "kernel side {n} does not match {}x{} image",
            image.width(),
            image.height()
        )));
    }
    let mut out = vec![0.0; n * n];
    apply_blur_raw(kernel, image.data(), &mut out);
    Ok(ImageGrid::from_parts(n, n, out))
}

/// Separable application on a raw row-major buffer of side `kernel.n()`.
pub(crate) fn apply_blur_raw(kernel: &BlurKernel1D, src: &[f64], dst: &mut [f64]) {
    let n = kernel.n;
    debug_assert_eq!(src.len(), n * n);
    debug_assert_eq!(dst.len(), n * n);
    let mut tmp = vec![0.0; n * n];
    for row in 0..n {
        let span = row * n..(row + 1) * n;
        kernel.convolve_line(&src[span.clone()], &mut tmp[span], n, 1);
    }
    for col in 0..n {
        kernel.convolve_line(&tmp[col..], &mut dst[col..], n, n);
    }
}

/// Blur level and noise level of a synthetic degradation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegradationSpec {
    pub sigma: f64,
    pub band: usize,
    pub noise_level: f64,
    pub seed: u64,
}

impl DegradationSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::config(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.band == 0 {
            return Err(Error::config("band must be at least 1"));
        }
        if !(self.noise_level.is_finite() && self.noise_level >= 0.0) {
            return Err(Error::config(format!(
                "noise level must be >= 0, got {}",
                self.noise_level
            )));
        }
        Ok(())
    }
}

/// Output of [`degrade`].
#[derive(Debug, Clone)]
pub struct Degraded {
    pub kernel: BlurKernel1D,
    /// Noise-free blurred image `g = H u`.
    pub blurred: ImageGrid,
    /// `g + e`.
    pub noisy: ImageGrid,
    /// RMS norm of the added noise.
    pub delta: RmsScalar,
}

/// Seeded i.i.d. standard normal samples.
///
/// The stream is ChaCha8 seeded through `seed_from_u64`, transformed by the
/// ziggurat sampler of `rand_distr::StandardNormal`, drawn in row-major order.
pub fn standard_normal_field(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Blurs `u` and adds Gaussian noise scaled so that `‖e‖ / ‖u‖ = ν`.
pub fn degrade(u: &ImageGrid, spec: &DegradationSpec) -> Result<Degraded> {
    spec.validate()?;
    let n = u
        .side()
        .ok_or_else(|| Error::shape(format!("image must be square, got {}x{}", u.width(), u.height())))?;
    let kernel = build_kernel(spec.sigma, spec.band, n)?;
    let blurred = apply_blur(&kernel, u)?;

    let u_rms = u.rms().value();
    let raw = standard_normal_field(u.len(), spec.seed);
    let raw_rms = rms_norm(&raw)?.value();
    let scale = if spec.noise_level == 0.0 || raw_rms == 0.0 {
        0.0
    } else {
        spec.noise_level * u_rms / raw_rms
    };
    let noise: Vec<f64> = raw.iter().map(|x| scale * x).collect();
    let delta = rms_norm(&noise)?;
    let noisy_data = blurred.data().iter().zip(&noise).map(|(g, e)| g + e).collect();
    let noisy = ImageGrid::new(n, n, noisy_data)?;
    Ok(Degraded {
        kernel,
        blurred,
        noisy,
        delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_taps() {
        let k = build_kernel(1.0, 7, 33).unwrap();
        assert!((k.taps()[0] - 0.3989422804).abs() < 1e-10);
        assert!((k.taps()[1] / k.taps()[0] - 0.6065306597).abs() < 1e-10);
        assert_eq!(k.taps().len(), 8);
        assert!(k.taps().windows(2).all(|w| w[1] < w[0]));
        assert!(build_kernel(2.0, 9, 33).is_ok());
        assert!(build_kernel(4.0, 13, 33).is_ok());
        assert!(matches!(build_kernel(1.0, 33, 33), Err(Error::Config(_))));
        assert!(build_kernel(0.0, 3, 33).is_err());
    }

    #[test]
    fn identity_kernel_scales_by_tap_squared() {
        let k = BlurKernel1D::from_taps(4, vec![3.0]).unwrap();
        let img = ImageGrid::from_fn(4, 4, |r, c| (r * 4 + c) as f64);
        let out = apply_blur(&k, &img).unwrap();
        for (a, b) in out.data().iter().zip(img.data()) {
            assert_eq!(*a, 9.0 * b);
        }
    }

    #[test]
    fn delta_image_gives_outer_product() {
        let k = build_kernel(1.0, 2, 5).unwrap();
        let t = k.taps();
        let profile = [t[2], t[1], t[0], t[1], t[2]];
        let delta = ImageGrid::from_fn(5, 5, |r, c| if r == 2 && c == 2 { 1.0 } else { 0.0 });
        let out = apply_blur(&k, &delta).unwrap();
        for r in 0..5 {
            for c in 0..5 {
                assert!((out.get(r, c) - profile[r] * profile[c]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn constant_image_dims_at_the_border() {
        let k = build_kernel(1.0, 2, 9).unwrap();
        let row_sum: f64 = k.taps()[0] + 2.0 * (k.taps()[1] + k.taps()[2]);
        let out = apply_blur(&k, &ImageGrid::filled(9, 9, 1.0)).unwrap();
        for r in 0..9 {
            for c in 0..9 {
                let interior = (2..7).contains(&r) && (2..7).contains(&c);
                if interior {
                    assert!((out.get(r, c) - row_sum * row_sum).abs() < 1e-14);
                } else {
                    assert!(out.get(r, c) < row_sum * row_sum - 1e-6);
                }
            }
        }
    }

    #[test]
    fn coarsening_keeps_even_lags() {
        let k = BlurKernel1D::from_taps(9, vec![5.0, 3.0, 2.0]).unwrap();
        let c = k.coarsen().unwrap();
        assert_eq!(c.taps(), &[5.0, 2.0]);
        assert_eq!(c.band(), 1);
        assert_eq!(c.n(), 5);
        assert_eq!(BlurKernel1D::from_taps(8, vec![1.0]).unwrap().coarsen().unwrap().n(), 4);

        let b1 = build_kernel(1.0, 7, 129).unwrap();
        let l2 = b1.coarsen().unwrap();
        let l1 = l2.coarsen().unwrap();
        assert_eq!((l2.band(), l1.band()), (3, 1));
        assert_eq!((l2.n(), l1.n()), (65, 33));
        assert!(BlurKernel1D::from_taps(2, vec![1.0]).unwrap().coarsen().is_err());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let k = build_kernel(1.0, 2, 5).unwrap();
        assert!(matches!(apply_blur(&k, &ImageGrid::zeros(4, 5)), Err(Error::Shape(_))));
    }

    fn phantom(n: usize) -> ImageGrid {
        ImageGrid::from_fn(n, n, |r, c| if (r / 4 + c / 3) % 2 == 0 { 200.0 } else { 30.0 })
    }

    #[test]
    fn noise_free_degradation() {
        let u = phantom(17);
        let spec = DegradationSpec {
            sigma: 1.0,
            band: 7,
            noise_level: 0.0,
            seed: 3,
        };
        let d = degrade(&u, &spec).unwrap();
        assert_eq!(d.noisy, d.blurred);
        assert_eq!(d.delta.value(), 0.0);
    }

    #[test]
    fn noise_level_is_exact_and_seeded() {
        let u = phantom(17);
        for &nu in &[5e-2, 1e-1, 5e-1, 8e-1] {
            let spec = DegradationSpec {
                sigma: 2.0,
                band: 9,
                noise_level: nu,
                seed: 42,
            };
            let d = degrade(&u, &spec).unwrap();
            let e = d.noisy.difference(&d.blurred).unwrap();
            let ratio = e.rms().value() / u.rms().value();
            assert!((ratio - nu).abs() < 1e-12);
            assert!((d.delta.value() - nu * u.rms().value()).abs() < 1e-9);
            let again = degrade(&u, &spec).unwrap();
            assert_eq!(again.noisy.data(), d.noisy.data());
        }
    }
}
