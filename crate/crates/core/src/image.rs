//! Image container, the RMS norm and PSNR.
//!
//! Intensities live on the 0-255 scale throughout the crate. Fractional
//! values are allowed while computing; quantization only happens when an
//! image is written to disk.

use crate::error::{Error, Result};

/// PSNR reported when the RMS error is numerically zero.
pub const PSNR_CAP_DB: f64 = 300.0;

/// RMS errors below this are treated as exact recovery.
const PSNR_ZERO_ERROR: f64 = 1e-12;

/// Row-major grid of finite intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ImageGrid {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::shape(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::shape(format!(
                "{width}x{height} image needs {} samples, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite intensity at index {i}")));
        }
        Ok(Self { width, height, data })
    }

    /// Internal constructor for buffers already known to be well formed.
    pub(crate) fn from_parts(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert!(width > 0 && height > 0);
        debug_assert_eq!(data.len(), width * height);
        debug_assert!(data.iter().all(|v| v.is_finite()));
        Self { width, height, data }
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(value.is_finite(), "fill value must be finite");
        Self::from_parts(width, height, vec![value; width * height])
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    /// Builds an image by evaluating `f(row, col)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(row, col));
            }
        }
        assert!(
            data.iter().all(|v| v.is_finite()),
            "from_fn produced a non-finite value"
        );
        Self::from_parts(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Side length of a square image.
    pub fn side(&self) -> Option<usize> {
        (self.width == self.height).then_some(self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    /// Pixel lookup with clamp-to-edge handling of out-of-range indices.
    #[inline]
    pub fn get_clamped(&self, row: isize, col: isize) -> f64 {
        let r = row.clamp(0, self.height as isize - 1) as usize;
        let c = col.clamp(0, self.width as isize - 1) as usize;
        self.get(r, c)
    }

    pub fn same_shape(&self, other: &ImageGrid) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn ensure_same_shape(&self, other: &ImageGrid) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }

    /// Pixelwise `self - other`.
    pub fn difference(&self, other: &ImageGrid) -> Result<ImageGrid> {
        self.ensure_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self::from_parts(self.width, self.height, data))
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> ImageGrid {
        let data: Vec<f64> = self.data.iter().map(|&v| f(v)).collect();
        assert!(data.iter().all(|v| v.is_finite()), "map produced a non-finite value");
        Self::from_parts(self.width, self.height, data)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn rms(&self) -> RmsScalar {
        // Images are never empty, so the norm is always defined.
        rms_norm(&self.data).expect("image is nonempty and finite")
    }

    /// Sub-image starting at (`top`, `left`).
    pub fn crop(&self, top: usize, left: usize, width: usize, height: usize) -> Result<ImageGrid> {
        if width == 0 || height == 0 || top + height > self.height || left + width > self.width {
            return Err(Error::shape(format!(
                "crop {width}x{height}+{left}+{top} does not fit in {}x{}",
                self.width, self.height
            )));
        }
        Ok(Self::from_fn(width, height, |r, c| self.get(top + r, left + c)))
    }

    /// Extends the image to the right and bottom by replicating the last
    /// column and row.
    pub fn pad_replicate(&self, width: usize, height: usize) -> Result<ImageGrid> {
        if width < self.width || height < self.height {
            return Err(Error::shape(format!(
                "cannot pad {}x{} down to {width}x{height}",
                self.width, self.height
            )));
        }
        Ok(Self::from_fn(width, height, |r, c| {
            self.get(r.min(self.height - 1), c.min(self.width - 1))
        }))
    }
}

/// Magnitude of the size-normalized Euclidean norm.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RmsScalar(f64);

impl RmsScalar {
    pub const ZERO: RmsScalar = RmsScalar(0.0);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value >= 0.0 {
            Ok(Self(value))
        } else {
            Err(Error::Domain(format!(
                "RMS magnitude must be finite and >= 0, got {value}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// `sqrt((1/m) * sum v_i^2)`.
pub fn rms_norm(v: &[f64]) -> Result<RmsScalar> {
    if v.is_empty() {
        return Err(Error::Domain("RMS norm of an empty vector".into()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("RMS norm of a non-finite vector".into()));
    }
    let sum_sq: f64 = v.iter().map(|x| x * x).sum();
    Ok(RmsScalar((sum_sq / v.len() as f64).sqrt()))
}

/// Peak signal-to-noise ratio in dB on the 0-255 scale.
///
/// Returns [`PSNR_CAP_DB`] when the two images agree to within 1e-12 RMS.
pub fn psnr(reference: &ImageGrid, restored: &ImageGrid) -> Result<f64> {
    let diff = reference.difference(restored)?;
    let err = diff.rms().value();
    if err < PSNR_ZERO_ERROR {
        return Ok(PSNR_CAP_DB);
    }
    Ok(20.0 * (255.0 / err).log10())
}
