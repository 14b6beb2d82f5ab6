//! Local weighted least-squares smoothing and explicit Perona-Malik
//! diffusion.
//!
//! Both operators read only their input buffer and write a fresh output
//! (Jacobi-style), so per-pixel work is independent of traversal order.

use crate::error::{Error, Result};
use crate::image::ImageGrid;

/// Explicit diffusion parameters. `k` is on the 0-255 intensity scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionParams {
    pub k: f64,
    pub tau: f64,
    pub steps: usize,
}

impl Default for DiffusionParams {
    fn default() -> Self {
        Self {
            k: 10.0,
            tau: 0.2,
            steps: 1,
        }
    }
}

impl DiffusionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(Error::config(format!(
                "diffusion threshold k must be positive, got {}",
                self.k
            )));
        }
        if !(self.tau > 0.0 && self.tau <= 0.25) {
            return Err(Error::config(format!(
                "time step must lie in (0, 0.25] for the explicit scheme, got {}",
                self.tau
            )));
        }
        Ok(())
    }
}

/// Weight bandwidth of the local fit, as a fraction of full scale (255).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsqParams {
    pub rho: f64,
}

impl LsqParams {
    /// Unit exponent scale on raw 0-255 differences.
    pub const RAW: LsqParams = LsqParams { rho: 1.0 / 255.0 };

    pub fn validate(&self) -> Result<()> {
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::config(format!("rho must be positive, got {}", self.rho)));
        }
        Ok(())
    }
}

impl Default for LsqParams {
    fn default() -> Self {
        Self { rho: 0.1 }
    }
}

/// Counters gathered by [`local_smooth_with_diagnostics`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SmoothDiagnostics {
    /// Pixels whose normal equations were singular and fell back to the
    /// weighted mean.
    pub fallback_pixels: usize,
}

const OFFSETS: [(isize, isize); 9] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 0),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// Weighted plane fit `a0 + a1 s + a2 t` over the clamped 3x3 neighbourhood
/// of every pixel; each pixel is replaced by `a0`.
///
/// Weights are `exp(-((u(i,j) - u(i+s,j+t)) / (255 rho))²)`; `s` runs along
/// rows and `t` along columns.
pub fn local_smooth(image: &ImageGrid, params: LsqParams) -> Result<ImageGrid> {
    local_smooth_with_diagnostics(image, params).map(|(img, _)| img)
}

pub fn local_smooth_with_diagnostics(image: &ImageGrid, params: LsqParams) -> Result<(ImageGrid, SmoothDiagnostics)> {
    params.validate()?;
    let scale = 1.0 / (255.0 * params.rho);
    let mut diagnostics = SmoothDiagnostics::default();
    let (w, h) = (image.width(), image.height());
    let mut out = Vec::with_capacity(w * h);
    for row in 0..h {
        for col in 0..w {
            let center = image.get(row, col);
            let mut samples = [(0.0, 0.0, 0.0, 0.0); 9];
            for (slot, &(s, t)) in samples.iter_mut().zip(OFFSETS.iter()) {
                let v = image.get_clamped(row as isize + s, col as isize + t);
                let z = (center - v) * scale;
                // fitting offsets from the centre keeps the sums small
                *slot = (s as f64, t as f64, v - center, (-z * z).exp());
            }
            match fit_plane_intercept(&samples) {
                Some(a0) => out.push(center + a0),
                None => {
                    diagnostics.fallback_pixels += 1;
                    out.push(center + weighted_mean(&samples));
                }
            }
        }
    }
    Ok((ImageGrid::from_parts(w, h, out), diagnostics))
}

fn weighted_mean(samples: &[(f64, f64, f64, f64)]) -> f64 {
    let (num, den) = samples
        .iter()
        .fold((0.0, 0.0), |(n, d), &(_, _, v, w)| (n + w * v, d + w));
    num / den
}

/// Intercept of the weighted least-squares plane, by Cramer's rule on the
/// 3x3 normal equations. `None` when the system is numerically singular.
fn fit_plane_intercept(samples: &[(f64, f64, f64, f64)]) -> Option<f64> {
    let (mut sw, mut ss, mut st, mut sss, mut sst, mut stt) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut bv, mut bs, mut bt) = (0.0, 0.0, 0.0);
    for &(s, t, v, w) in samples {
        sw += w;
        ss += w * s;
        st += w * t;
        sss += w * s * s;
        sst += w * s * t;
        stt += w * t * t;
        bv += w * v;
        bs += w * s * v;
        bt += w * t * v;
    }
    let det = sw * (sss * stt - sst * sst) - ss * (ss * stt - sst * st) + st * (ss * sst - sss * st);
    // the matrix entries are bounded by sw, so this is a relative test
    if det.is_nan() || det.abs() <= 1e-12 * sw * sw * sw {
        return None;
    }
    let det0 = bv * (sss * stt - sst * sst) - ss * (bs * stt - sst * bt) + st * (bs * sst - sss * bt);
    let a0 = det0 / det;
    a0.is_finite().then_some(a0)
}

/// Edge-stopping coefficient `1 / (1 + (g/k)²)`.
pub fn diffusion_coefficient(grad_mag: f64, k: f64) -> f64 {
    let q = grad_mag / k;
    1.0 / (1.0 + q * q)
}

/// Per-pixel coefficients from central differences with clamp-to-edge.
pub fn coefficient_field(image: &ImageGrid, k: f64) -> ImageGrid {
    let (w, h) = (image.width(), image.height());
    ImageGrid::from_fn(w, h, |r, c| {
        let (r, c) = (r as isize, c as isize);
        let ux = 0.5 * (image.get_clamped(r, c + 1) - image.get_clamped(r, c - 1));
        let uy = 0.5 * (image.get_clamped(r + 1, c) - image.get_clamped(r - 1, c));
        diffusion_coefficient((ux * ux + uy * uy).sqrt(), k)
    })
}

/// One explicit step `u + τ A(u) u` in conservative form: the off-diagonal
/// weight between axial neighbours `p, q` is `(c_p + c_q) / 2`, the diagonal
/// is minus the sum of those weights, and neighbours outside the image do
/// not exchange flux.
fn diffusion_step(image: &ImageGrid, params: &DiffusionParams) -> Result<ImageGrid> {
    let coeff = coefficient_field(image, params.k);
    let (w, h) = (image.width(), image.height());
    let mut out = Vec::with_capacity(w * h);
    for r in 0..h {
        for c in 0..w {
            let u = image.get(r, c);
            let cp = coeff.get(r, c);
            let mut flux = 0.0;
            let mut diag = 0.0;
            let neighbours = [
                (r > 0).then(|| (r - 1, c)),
                (r + 1 < h).then_some((r + 1, c)),
                (c > 0).then(|| (r, c - 1)),
                (c + 1 < w).then_some((r, c + 1)),
            ];
            for (nr, nc) in neighbours.into_iter().flatten() {
                let weight = 0.5 * (cp + coeff.get(nr, nc));
                flux += weight * (image.get(nr, nc) - u);
                diag += weight;
            }
            if params.tau * diag > 1.0 {
                return Err(Error::config(format!(
                    "time step {} violates the explicit stability bound at ({r}, {c})",
                    params.tau
                )));
            }
            out.push(u + params.tau * flux);
        }
    }
    Ok(ImageGrid::from_parts(w, h, out))
}

/// `steps` explicit Perona-Malik updates with zero-flux boundaries.
pub fn pm_diffuse(image: &ImageGrid, params: DiffusionParams) -> Result<ImageGrid> {
    params.validate()?;
    if image.width() < 2 || image.height() < 2 {
        return Err(Error::shape(format!(
            "diffusion needs at least 2x2 pixels, got {}x{}",
            image.width(),
            image.height()
        )));
    }
    let mut current = image.clone();
    for _ in 0..params.steps {
        current = diffusion_step(&current, &params)?;
    }
    Ok(current)
}

/// Local smoothing followed by edge-preserving diffusion.
pub fn apply_ds(image: &ImageGrid, lsq: LsqParams, diffusion: DiffusionParams) -> Result<ImageGrid> {
    let smoothed = local_smooth(image, lsq)?;
    pm_diffuse(&smoothed, diffusion)
}
