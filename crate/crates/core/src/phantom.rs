//! Synthetic test image with sharp-edged geometric shapes.

use crate::image::ImageGrid;

/// Piecewise-constant phantom of the given side: a dark background with a
/// bright rectangle, a mid-gray disc, a triangle and a thin ring.
///
/// Shapes are placed in normalized coordinates so any side works; the
/// shipped test image is `phantom(129)`.
pub fn phantom(side: usize) -> ImageGrid {
    let s = side as f64;
    ImageGrid::from_fn(side, side, |row, col| {
        // pixel centres in [0, 1]
        let y = (row as f64 + 0.5) / s;
        let x = (col as f64 + 0.5) / s;
        let mut v = 40.0;
        if (0.12..0.45).contains(&x) && (0.10..0.38).contains(&y) {
            v = 210.0;
        }
        let (dx, dy) = (x - 0.68, y - 0.30);
        if dx * dx + dy * dy < 0.17 * 0.17 {
            v = 130.0;
        }
        // triangle with apex at the top
        let (tx, ty) = (x - 0.30, y - 0.55);
        if (0.0..0.33).contains(&ty) && tx.abs() < 0.5 * ty + 0.01 {
            v = 240.0;
        }
        let (rx, ry) = (x - 0.70, y - 0.72);
        let r2 = rx * rx + ry * ry;
        if (0.12 * 0.12..0.16 * 0.16).contains(&r2) {
            v = 180.0;
        }
        if (0.62..0.78).contains(&x) && (0.66..0.78).contains(&y) {
            v = 90.0;
        }
        v
    })
}
