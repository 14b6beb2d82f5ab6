//! Independent reference implementations shared by the oracle suites and
//! the acceptance harness.

use cascade_restore::blur::BlurKernel1D;
use cascade_restore::solve::LinearOperator;
use cascade_restore::ImageGrid;
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::Rng;

use super::Dense;

/// Random polynomial of total degree at most two.
pub fn random_quadratic(r: &mut impl Rng) -> impl Fn(f64, f64) -> f64 {
    let c: [f64; 6] = std::array::from_fn(|_| r.random_range(-50.0..50.0));
    move |x, y| c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y
}

/// Fields sampled from smooth `u*` and `C` so that level `l` holds
/// `u* + C 4^-l` on its own lattice.
pub fn richardson_family(
    ustar: &dyn Fn(f64, f64) -> f64,
    cfield: &dyn Fn(f64, f64) -> f64,
    side: usize,
    level: i32,
) -> ImageGrid {
    let h = 1.0 / (side - 1) as f64;
    let scale = 4f64.powi(-level);
    ImageGrid::from_fn(side, side, |i, j| {
        let (x, y) = (i as f64 * h, j as f64 * h);
        ustar(x, y) + cfield(x, y) * scale
    })
}

/// The explicit two-dimensional formulas for the extrapolated prolongation,
/// evaluated pointwise. `(I, J)` index the coarsest lattice, `u1` is the
/// middle level (side `2m - 1`) and `u2` the coarsest (side `m`).
pub struct PrintedFormulas<'a> {
    pub u1: &'a ImageGrid,
    pub u2: &'a ImageGrid,
}

impl PrintedFormulas<'_> {
    fn a(&self, i: usize, j: usize) -> f64 {
        self.u1.get(2 * i, 2 * j)
    }
    fn b(&self, i: usize, j: usize) -> f64 {
        self.u2.get(i, j)
    }
    fn d(&self, i: usize, j: usize) -> f64 {
        self.a(i, j) - self.b(i, j)
    }
    /// u(i, j) = (5 u1 - u2) / 4
    pub fn node(&self, i: usize, j: usize) -> f64 {
        0.25 * (5.0 * self.a(i, j) - self.b(i, j))
    }
    /// u(i, j + 1/2) = u1(i, j + 1/2) + [d(i, j) + d(i, j + 1)] / 8
    pub fn row_mid(&self, i: usize, j: usize) -> f64 {
        self.u1.get(2 * i, 2 * j + 1) + 0.125 * (self.d(i, j) + self.d(i, j + 1))
    }
    /// u(i + 1/2, j) = u1(i + 1/2, j) + [d(i, j) + d(i + 1, j)] / 8
    pub fn col_mid(&self, i: usize, j: usize) -> f64 {
        self.u1.get(2 * i + 1, 2 * j) + 0.125 * (self.d(i, j) + self.d(i + 1, j))
    }
    /// u(i + 1/2, j + 1/2) with the four-corner correction / 16
    pub fn centre(&self, i: usize, j: usize) -> f64 {
        self.u1.get(2 * i + 1, 2 * j + 1)
            + (self.d(i, j) + self.d(i + 1, j) + self.d(i, j + 1) + self.d(i + 1, j + 1)) / 16.0
    }
    /// u(i, j + 1/4)
    pub fn row_quarter(&self, i: usize, j: usize) -> f64 {
        ((9.0 * self.a(i, j) + 12.0 * self.u1.get(2 * i, 2 * j + 1) - self.a(i, j + 1))
            - (3.0 * self.b(i, j) + self.b(i, j + 1)))
            / 16.0
    }
    /// u(i, j + 3/4)
    pub fn row_three_quarter(&self, i: usize, j: usize) -> f64 {
        ((9.0 * self.a(i, j + 1) + 12.0 * self.u1.get(2 * i, 2 * j + 1) - self.a(i, j))
            - (3.0 * self.b(i, j + 1) + self.b(i, j)))
            / 16.0
    }
    /// u(i + 1/4, j)
    pub fn col_quarter(&self, i: usize, j: usize) -> f64 {
        ((9.0 * self.a(i, j) + 12.0 * self.u1.get(2 * i + 1, 2 * j) - self.a(i + 1, j))
            - (3.0 * self.b(i, j) + self.b(i + 1, j)))
            / 16.0
    }
    /// u(i + 3/4, j)
    pub fn col_three_quarter(&self, i: usize, j: usize) -> f64 {
        ((9.0 * self.a(i + 1, j) + 12.0 * self.u1.get(2 * i + 1, 2 * j) - self.a(i, j))
            - (3.0 * self.b(i + 1, j) + self.b(i, j)))
            / 16.0
    }
    /// u(i + 1/4, j + 1/2): column stencil over the extrapolated values.
    pub fn quarter_row_mid(&self, i: usize, j: usize) -> f64 {
        0.375 * self.row_mid(i, j) + 0.75 * self.centre(i, j) - 0.125 * self.row_mid(i + 1, j)
    }
    /// u(i + 1/4, j + 1/4)
    pub fn quarter_quarter(&self, i: usize, j: usize) -> f64 {
        0.375 * self.col_quarter(i, j) + 0.75 * self.quarter_row_mid(i, j) - 0.125 * self.col_quarter(i, j + 1)
    }
    /// u(i + 1/4, j + 3/4)
    pub fn quarter_three_quarter(&self, i: usize, j: usize) -> f64 {
        -0.125 * self.col_quarter(i, j) + 0.75 * self.quarter_row_mid(i, j) + 0.375 * self.col_quarter(i, j + 1)
    }
}

/// Largest deviation of `out` from every printed formula, over all
/// coarse cells. `out` is the extrapolated prolongation of `(u1, u2)`.
pub fn printed_formula_error(u1: &ImageGrid, u2: &ImageGrid, out: &ImageGrid) -> f64 {
    let m = u2.width();
    let f = PrintedFormulas { u1, u2 };
    let at = |r: usize, c: usize| out.get(r, c);
    let mut worst = 0.0f64;
    let mut check = |got: f64, want: f64| worst = worst.max((got - want).abs());
    for i in 0..m {
        for j in 0..m {
            check(at(4 * i, 4 * j), f.node(i, j));
            if j + 1 < m {
                check(at(4 * i, 4 * j + 2), f.row_mid(i, j));
                check(at(4 * i, 4 * j + 1), f.row_quarter(i, j));
                check(at(4 * i, 4 * j + 3), f.row_three_quarter(i, j));
            }
            if i + 1 < m {
                check(at(4 * i + 2, 4 * j), f.col_mid(i, j));
                check(at(4 * i + 1, 4 * j), f.col_quarter(i, j));
                check(at(4 * i + 3, 4 * j), f.col_three_quarter(i, j));
            }
            if i + 1 < m && j + 1 < m {
                check(at(4 * i + 2, 4 * j + 2), f.centre(i, j));
                check(at(4 * i + 1, 4 * j + 1), f.quarter_quarter(i, j));
                check(at(4 * i + 1, 4 * j + 3), f.quarter_three_quarter(i, j));
            }
        }
    }
    worst
}

/// Dense `h ⊗ h` acting on row-major images of side `n`.
pub fn dense_blur(kernel: &BlurKernel1D) -> Dense {
    let n = kernel.n();
    let mut m = Dense::zeros(n * n);
    for r in 0..n {
        for c in 0..n {
            for rr in 0..n {
                for cc in 0..n {
                    m.set(r * n + c, rr * n + cc, kernel.entry(r, rr) * kernel.entry(c, cc));
                }
            }
        }
    }
    m
}

impl LinearOperator for Dense {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&self.mul_vec(x));
    }
}

/// `Q diag(λ) Qᵀ` with eigenvalues spread over `[0.05, 5]`.
pub fn random_spd(r: &mut impl Rng, n: usize) -> Dense {
    let raw = DMatrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0));
    let q = raw.qr().q();
    let lambda = DVector::from_fn(n, |i, _| 0.05 + 4.95 * i as f64 / (n - 1) as f64);
    let a = &q * DMatrix::from_diagonal(&lambda) * q.transpose();
    let a = (&a + a.transpose()) * 0.5;
    let mut m = Dense::zeros(n);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, a[(i, j)]);
        }
    }
    m
}

pub fn clamped(u: &ImageGrid, r: isize, c: isize) -> f64 {
    let r = r.clamp(0, u.height() as isize - 1) as usize;
    let c = c.clamp(0, u.width() as isize - 1) as usize;
    u.get(r, c)
}

/// Edge-stopping coefficients from central differences with replicated
/// borders.
pub fn pm_coefficients(u: &ImageGrid, k: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for r in 0..u.height() as isize {
        for c in 0..u.width() as isize {
            let gx = (clamped(u, r, c + 1) - clamped(u, r, c - 1)) / 2.0;
            let gy = (clamped(u, r + 1, c) - clamped(u, r - 1, c)) / 2.0;
            let g2 = gx * gx + gy * gy;
            out.push(1.0 / (1.0 + g2 / (k * k)));
        }
    }
    out
}

/// Dense conservative diffusion matrix: off-diagonals are averaged
/// coefficients of in-domain axial neighbours, rows sum to zero.
pub fn diffusion_matrix(u: &ImageGrid, k: f64) -> Dense {
    let (w, h) = (u.width(), u.height());
    let c = pm_coefficients(u, k);
    let mut a = Dense::zeros(w * h);
    for r in 0..h {
        for col in 0..w {
            let p = r * w + col;
            let mut neighbours = Vec::new();
            if r > 0 {
                neighbours.push(p - w);
            }
            if r + 1 < h {
                neighbours.push(p + w);
            }
            if col > 0 {
                neighbours.push(p - 1);
            }
            if col + 1 < w {
                neighbours.push(p + 1);
            }
            for q in neighbours {
                let v = 0.5 * (c[p] + c[q]);
                a.set(p, q, v);
                a.set(p, p, a.at(p, p) - v);
            }
        }
    }
    a
}

/// What the oracle expects at one pixel.
pub enum Fit {
    /// Well-conditioned normal equations and their intercept.
    Plane(f64),
    /// Numerically singular system and the weighted mean of the samples.
    Degenerate(f64),
    /// Conditioned badly enough that rounding alone exceeds the tolerance.
    Ambiguous,
}

/// Weighted plane fit `a0 + a1 s + a2 t` over the clamped 3x3 neighbourhood,
/// solved from the normal equations.
pub fn brute_force_lsq(u: &ImageGrid, rho: f64) -> Vec<Fit> {
    let bandwidth = 255.0 * rho;
    let mut out = Vec::new();
    for r in 0..u.height() as isize {
        for c in 0..u.width() as isize {
            let centre = u.get(r as usize, c as usize);
            let mut m = Matrix3::zeros();
            let mut rhs = Vector3::zeros();
            let (mut num, mut den) = (0.0, 0.0);
            for s in -1..=1 {
                for t in -1..=1 {
                    let v = clamped(u, r + s, c + t);
                    let w = (-((centre - v) / bandwidth).powi(2)).exp();
                    let x = Vector3::new(1.0, s as f64, t as f64);
                    // the intercept is shift-equivariant, so fit offsets from the centre
                    m += w * x * x.transpose();
                    rhs += w * (v - centre) * x;
                    num += w * (v - centre);
                    den += w;
                }
            }
            let eig = m.symmetric_eigenvalues();
            let cond = eig.max() / eig.min().max(0.0);
            out.push(if cond <= 1e4 {
                Fit::Plane(centre + m.lu().solve(&rhs).expect("well conditioned")[0])
            } else if cond >= 1e14 {
                Fit::Degenerate(centre + num / den)
            } else {
                Fit::Ambiguous
            });
        }
    }
    out
}

#[derive(Debug, Default, Clone, Copy)]
pub struct LsqComparison {
    pub planes: usize,
    pub degenerate: usize,
    pub ambiguous: usize,
    /// Largest deviation over the plane and degenerate pixels.
    pub max_error: f64,
}

/// Compares a local-fit output against [`brute_force_lsq`] pixel by pixel.
pub fn compare_lsq(u: &ImageGrid, got: &ImageGrid, rho: f64) -> LsqComparison {
    let mut cmp = LsqComparison::default();
    for (g, w) in got.data().iter().zip(brute_force_lsq(u, rho)) {
        let want = match w {
            Fit::Plane(a0) => {
                cmp.planes += 1;
                a0
            }
            Fit::Degenerate(mean) => {
                cmp.degenerate += 1;
                mean
            }
            Fit::Ambiguous => {
                cmp.ambiguous += 1;
                continue;
            }
        };
        cmp.max_error = cmp.max_error.max((g - want).abs());
    }
    cmp
}
