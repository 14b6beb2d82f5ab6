//! Inter-grid transfer: injection restriction and three prolongations.
//!
//! Grids nest by keeping every other node: a fine grid of side `n` has a
//! parent of side `(n + 1) / 2` (odd `n`) or `n / 2` (even `n`), and fine
//! node `2k` coincides with coarse node `k`.

use crate::blur::coarse_side;
use crate::error::{Error, Result};
use crate::image::ImageGrid;

/// Side lengths of one level and its parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelGeometry {
    /// 1-based level index, 1 being the coarsest.
    pub level: usize,
    pub side: usize,
    pub parent_side: usize,
}

impl LevelGeometry {
    /// Geometries for `levels` nested grids whose finest side is `finest`,
    /// ordered coarsest first.
    pub fn chain(finest: usize, levels: usize) -> Result<Vec<LevelGeometry>> {
        if levels == 0 {
            return Err(Error::config("at least one level is required"));
        }
        let mut sides = vec![finest];
        for _ in 1..levels {
            let side = *sides.last().unwrap();
            if side < 3 {
                return Err(Error::config(format!("side {side} is too small to coarsen further")));
            }
            sides.push(coarse_side(side));
        }
        sides.reverse();
        Ok(sides
            .iter()
            .enumerate()
            .map(|(i, &side)| LevelGeometry {
                level: i + 1,
                side,
                parent_side: coarse_side(side),
            })
            .collect())
    }
}

fn square_side(image: &ImageGrid, what: &str) -> Result<usize> {
    image.side().ok_or_else(|| {
        Error::shape(format!(
            "{what} must be square, got {}x{}",
            image.width(),
            image.height()
        ))
    })
}

/// Injection at even 0-based rows and columns.
pub fn restrict(fine: &ImageGrid) -> Result<ImageGrid> {
    if fine.width() < 3 || fine.height() < 3 {
        return Err(Error::shape(format!(
            "cannot restrict a {}x{} image",
            fine.width(),
            fine.height()
        )));
    }
    let w = coarse_side(fine.width());
    let h = coarse_side(fine.height());
    Ok(ImageGrid::from_fn(w, h, |r, c| fine.get(2 * r, 2 * c)))
}

/// Zero insertion, the Euclidean adjoint of [`restrict`].
pub fn inject_adjoint(coarse: &ImageGrid, fine_side: usize) -> Result<ImageGrid> {
    let side = square_side(coarse, "coarse grid")?;
    if fine_side < 3 || coarse_side(fine_side) != side {
        return Err(Error::shape(format!(
            "coarse side {side} is not the parent of fine side {fine_side}"
        )));
    }
    Ok(ImageGrid::from_fn(fine_side, fine_side, |r, c| {
        if r % 2 == 0 && c % 2 == 0 {
            coarse.get(r / 2, c / 2)
        } else {
            0.0
        }
    }))
}

/// Piecewise linear prolongation.
///
/// Nodes shared with the coarse grid are copied, edge midpoints average
/// their two coarse neighbours, and cell centres average the two coarse
/// nodes on the main diagonal (upper-left and lower-right). Coarse indices
/// past the last row or column, which only occur for even `fine_side`,
/// are clamped.
pub fn prolong_linear(coarse: &ImageGrid, fine_side: usize) -> Result<ImageGrid> {
    let side = square_side(coarse, "coarse grid")?;
    if fine_side < 2 || coarse_side(fine_side) != side {
        return Err(Error::shape(format!(
            "coarse side {side} is not the parent of fine side {fine_side}"
        )));
    }
    let last = side - 1;
    let lo = |k: usize| (k / 2).min(last);
    let hi = |k: usize| (k.div_ceil(2)).min(last);
    Ok(ImageGrid::from_fn(fine_side, fine_side, |r, c| {
        match (r % 2 == 0, c % 2 == 0) {
            (true, true) => coarse.get(r / 2, c / 2),
            (true, false) => 0.5 * (coarse.get(r / 2, lo(c)) + coarse.get(r / 2, hi(c))),
            (false, true) => 0.5 * (coarse.get(lo(r), c / 2) + coarse.get(hi(r), c / 2)),
            (false, false) => 0.5 * (coarse.get(lo(r), lo(c)) + coarse.get(hi(r), hi(c))),
        }
    }))
}

/// Quadratic interpolation of one line of `m` samples (odd, `m >= 3`) onto
/// the `2m - 1` refined line.
///
/// Samples are grouped into triplets starting at even indices; the two
/// midpoints of each triplet get `3/8, 3/4, -1/8` and its mirror image.
pub(crate) fn quadratic_line(src: &[f64], dst: &mut [f64]) {
    let m = src.len();
    debug_assert!(m >= 3 && m % 2 == 1);
    debug_assert_eq!(dst.len(), 2 * m - 1);
    for (k, &v) in src.iter().enumerate() {
        dst[2 * k] = v;
    }
    for start in (0..m - 1).step_by(2) {
        let (a, b, c) = (src[start], src[start + 1], src[start + 2]);
        dst[2 * start + 1] = 0.375 * a + 0.75 * b - 0.125 * c;
        dst[2 * start + 3] = -0.125 * a + 0.75 * b + 0.375 * c;
    }
}

/// Linear interpolation of `m` samples onto the `2m - 1` refined line.
fn linear_line(src: &[f64], dst: &mut [f64]) {
    let m = src.len();
    debug_assert_eq!(dst.len(), 2 * m - 1);
    for k in 0..m {
        dst[2 * k] = src[k];
        if k + 1 < m {
            dst[2 * k + 1] = 0.5 * (src[k] + src[k + 1]);
        }
    }
}

/// Tensor-product refinement from side `m` to `2m - 1`: every row, then
/// every column of the intermediate.
fn refine_tensor(coarse: &ImageGrid, line: fn(&[f64], &mut [f64])) -> ImageGrid {
    let m = coarse.width();
    let f = 2 * m - 1;
    let mut rows = vec![0.0; m * f];
    for r in 0..m {
        line(&coarse.data()[r * m..(r + 1) * m], &mut rows[r * f..(r + 1) * f]);
    }
    let mut out = vec![0.0; f * f];
    let mut col_src = vec![0.0; m];
    let mut col_dst = vec![0.0; f];
    for c in 0..f {
        for r in 0..m {
            col_src[r] = rows[r * f + c];
        }
        line(&col_src, &mut col_dst);
        for r in 0..f {
            out[r * f + c] = col_dst[r];
        }
    }
    ImageGrid::from_parts(f, f, out)
}

/// Quadratic prolongation from an odd coarse side `m` to `2m - 1`.
pub fn prolong_quadratic(coarse: &ImageGrid, fine_side: usize) -> Result<ImageGrid> {
    let side = square_side(coarse, "coarse grid")?;
    if side < 3 || side % 2 == 0 {
        return Err(Error::shape(format!(
            "quadratic prolongation needs an odd coarse side >= 3, got {side}"
        )));
    }
    if fine_side != 2 * side - 1 {
        return Err(Error::shape(format!(
            "coarse side {side} refines to {}, not {fine_side}",
            2 * side - 1
        )));
    }
    Ok(refine_tensor(coarse, quadratic_line))
}

/// Extrapolation step on the `u_prev` lattice.
///
/// With `d = u_prev - u_prev2` on the nodes the two grids share, returns
/// `u_prev + B(d) / 4` where `B` is bilinear interpolation onto the
/// `u_prev` lattice. At shared nodes this is `(5 u_prev - u_prev2) / 4`.
pub fn extrapolate(u_prev: &ImageGrid, u_prev2: &ImageGrid) -> Result<ImageGrid> {
    let n1 = square_side(u_prev, "finer iterate")?;
    let n2 = square_side(u_prev2, "coarser iterate")?;
    if n2 < 2 || n1 != 2 * n2 - 1 {
        return Err(Error::shape(format!(
            "iterates of sides {n1} and {n2} are not nested as 2m-1 and m"
        )));
    }
    let correction = ImageGrid::from_fn(n2, n2, |r, c| u_prev.get(2 * r, 2 * c) - u_prev2.get(r, c));
    let spread = refine_tensor(&correction, linear_line);
    let data = u_prev
        .data()
        .iter()
        .zip(spread.data())
        .map(|(u, d)| u + 0.25 * d)
        .collect();
    Ok(ImageGrid::from_parts(n1, n1, data))
}

/// Extrapolation followed by quadratic prolongation, producing the next
/// finer level (side `2 * side(u_prev) - 1`).
pub fn prolong_extrapolated(u_prev: &ImageGrid, u_prev2: &ImageGrid) -> Result<ImageGrid> {
    let extrapolated = extrapolate(u_prev, u_prev2)?;
    let side = extrapolated.width();
    prolong_quadratic(&extrapolated, 2 * side - 1)
}
