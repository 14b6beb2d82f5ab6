//! CG and MR smoothers with discrepancy-principle stopping, and the
//! economical per-level iteration schedule.

use std::fmt;
use std::str::FromStr;

use crate::blur::{apply_blur_raw, BlurKernel1D};
use crate::error::{Error, Result};
use crate::image::{rms_norm, ImageGrid, RmsScalar};

/// Curvatures at or below this end the iteration as stagnated.
const CURVATURE_FLOOR: f64 = 1e-300;

/// A symmetric linear map on flat vectors of length `dim()`.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for BlurKernel1D {
    fn dim(&self) -> usize {
        self.n() * self.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        apply_blur_raw(self, x, y);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Smoother {
    Cg,
    Mr,
}

impl Smoother {
    pub fn label(self) -> &'static str {
        match self {
            Smoother::Cg => "CG",
            Smoother::Mr => "MR",
        }
    }
}

impl fmt::Display for Smoother {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Smoother {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cg" => Ok(Smoother::Cg),
            "mr" => Ok(Smoother::Mr),
            other => Err(Error::config(format!("unknown smoother {other:?}"))),
        }
    }
}

/// Parameters of the per-level iteration counts `m_l`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub m0: f64,
    pub beta: f64,
    pub m_star: f64,
    pub epsilon0: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            m0: 1.0,
            beta: 4.0,
            m_star: 1.0,
            epsilon0: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub smoother: Smoother,
    /// Discrepancy constant `c > 1`.
    pub c: f64,
    /// Iteration budget of the single-level (direct) solves.
    pub max_iters_cap: usize,
    pub schedule: Schedule,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            smoother: Smoother::Cg,
            c: 1.1,
            max_iters_cap: 200,
            schedule: Schedule::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c > 1.0) {
            return Err(Error::config(format!(
                "discrepancy constant must exceed 1, got {}",
                self.c
            )));
        }
        let s = &self.schedule;
        if !(s.m0 >= 1.0 && s.m0.is_finite()) {
            return Err(Error::config(format!("m0 must be >= 1, got {}", s.m0)));
        }
        if !(s.beta >= 1.0 && s.beta.is_finite()) {
            return Err(Error::config(format!("beta must be >= 1, got {}", s.beta)));
        }
        if !(s.m_star > 0.0 && s.m_star.is_finite() && s.epsilon0.is_finite()) {
            return Err(Error::config("m_star must be positive and epsilon0 finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Discrepancy,
    IterationCap,
    Stagnation,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Discrepancy => "discrepancy",
            StopReason::IterationCap => "iteration-cap",
            StopReason::Stagnation => "stagnation",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub solution: ImageGrid,
    pub iterations: usize,
    /// RMS residual before the first iteration and after each one.
    pub residual_history: Vec<f64>,
    pub stop_reason: StopReason,
}

impl SolveOutcome {
    pub fn final_residual(&self) -> f64 {
        *self
            .residual_history
            .last()
            .expect("history holds the initial residual")
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rms(v: &[f64]) -> f64 {
    (dot(v, v) / v.len() as f64).sqrt()
}

fn check_shapes(op: &dyn LinearOperator, rhs: &ImageGrid, u0: &ImageGrid) -> Result<()> {
    rhs.ensure_same_shape(u0)?;
    if rhs.len() != op.dim() {
        return Err(Error::shape(format!(
            "operator of dimension {} applied to {} unknowns",
            op.dim(),
            rhs.len()
        )));
    }
    Ok(())
}

fn initial_residual(op: &dyn LinearOperator, rhs: &ImageGrid, u: &[f64]) -> Vec<f64> {
    let mut hu = vec![0.0; u.len()];
    op.apply(u, &mut hu);
    rhs.data().iter().zip(&hu).map(|(b, a)| b - a).collect()
}

fn finite_or_err(v: &[f64], iteration: usize) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric { iteration })
    }
}

/// Conjugate gradients on `H u = rhs` from `u0`.
///
/// Stops at the first of: RMS residual `<= c * delta`, `budget` iterations,
/// or a search direction with curvature `<= 1e-300`.
pub fn cg_smooth(
    op: &dyn LinearOperator,
    rhs: &ImageGrid,
    u0: &ImageGrid,
    delta: RmsScalar,
    c: f64,
    budget: usize,
) -> Result<SolveOutcome> {
    check_shapes(op, rhs, u0)?;
    let threshold = c * delta.value();
    let mut u = u0.data().to_vec();
    let mut r = initial_residual(op, rhs, &u);
    let mut history = vec![rms(&r)];
    let mut p = r.clone();
    let mut hp = vec![0.0; u.len()];
    let mut rr = dot(&r, &r);
    let mut iterations = 0;

    let stop_reason = loop {
        if *history.last().unwrap() <= threshold {
            break StopReason::Discrepancy;
        }
        if iterations == budget {
            break StopReason::IterationCap;
        }
        op.apply(&p, &mut hp);
        let curvature = dot(&p, &hp);
        if !curvature.is_finite() {
            return Err(Error::Numeric {
                iteration: iterations + 1,
            });
        }
        if curvature <= CURVATURE_FLOOR {
            break StopReason::Stagnation;
        }
        let alpha = rr / curvature;
        for i in 0..u.len() {
            u[i] += alpha * p[i];
            r[i] -= alpha * hp[i];
        }
        iterations += 1;
        finite_or_err(&u, iterations)?;
        let rr_next = dot(&r, &r);
        history.push((rr_next / r.len() as f64).sqrt());
        let beta = rr_next / rr;
        rr = rr_next;
        for i in 0..p.len() {
            p[i] = r[i] + beta * p[i];
        }
    };

    Ok(SolveOutcome {
        solution: ImageGrid::from_parts(rhs.width(), rhs.height(), u),
        iterations,
        residual_history: history,
        stop_reason,
    })
}

/// One-step minimal residual iteration: `u += (<r, Hr> / <Hr, Hr>) r`.
///
/// Same stopping contract as [`cg_smooth`]; stagnation when `<Hr, Hr>`
/// falls to `1e-300`.
pub fn mr_smooth(
    op: &dyn LinearOperator,
    rhs: &ImageGrid,
    u0: &ImageGrid,
    delta: RmsScalar,
    c: f64,
    budget: usize,
) -> Result<SolveOutcome> {
    check_shapes(op, rhs, u0)?;
    let threshold = c * delta.value();
    let mut u = u0.data().to_vec();
    let mut r = initial_residual(op, rhs, &u);
    let mut history = vec![rms(&r)];
    let mut hr = vec![0.0; u.len()];
    let mut iterations = 0;

    let stop_reason = loop {
        if *history.last().unwrap() <= threshold {
            break StopReason::Discrepancy;
        }
        if iterations == budget {
            break StopReason::IterationCap;
        }
        op.apply(&r, &mut hr);
        let denom = dot(&hr, &hr);
        if !denom.is_finite() {
            return Err(Error::Numeric {
                iteration: iterations + 1,
            });
        }
        if denom <= CURVATURE_FLOOR {
            break StopReason::Stagnation;
        }
        let alpha = dot(&r, &hr) / denom;
        for i in 0..u.len() {
            u[i] += alpha * r[i];
            r[i] -= alpha * hr[i];
        }
        iterations += 1;
        finite_or_err(&u, iterations)?;
        history.push(rms(&r));
    };

    Ok(SolveOutcome {
        solution: ImageGrid::from_parts(rhs.width(), rhs.height(), u),
        iterations,
        residual_history: history,
        stop_reason,
    })
}

/// Dispatches to [`cg_smooth`] or [`mr_smooth`].
pub fn smooth(
    smoother: Smoother,
    op: &dyn LinearOperator,
    rhs: &ImageGrid,
    u0: &ImageGrid,
    delta: RmsScalar,
    c: f64,
    budget: usize,
) -> Result<SolveOutcome> {
    match smoother {
        Smoother::Cg => cg_smooth(op, rhs, u0, delta, c, budget),
        Smoother::Mr => mr_smooth(op, rhs, u0, delta, c, budget),
    }
}

/// Number of smoothing steps `m_l` on level `level` of `levels`.
///
/// With `L0 = ceil(L/2)` and `h_l = 2^(1-l)`:
/// fine levels (`l > L0`) get `ceil(m0 (L - L0)² β^(L-l))`, coarse levels
/// get `ceil(m*^(l/2) (L - (2 - ε0) l) h_l^-2)`. Values below one are
/// raised to one.
pub fn iteration_schedule(levels: usize, level: usize, schedule: &Schedule) -> Result<usize> {
    if levels == 0 || level == 0 || level > levels {
        return Err(Error::Domain(format!("level {level} is outside 1..={levels}")));
    }
    let big_l = levels as f64;
    let l = level as f64;
    let l0 = levels.div_ceil(2);
    let raw = if level > l0 {
        let spread = (levels - l0) as f64;
        schedule.m0 * spread * spread * schedule.beta.powi((levels - level) as i32)
    } else {
        let h_inv_sq = 4f64.powi(level as i32 - 1);
        schedule.m_star.powf(l / 2.0) * (big_l - (2.0 - schedule.epsilon0) * l) * h_inv_sq
    };
    let m = raw.ceil();
    Ok(if m < 1.0 { 1 } else { m as usize })
}

/// Convenience: the whole schedule for `levels`, coarsest first.
pub fn schedule_for(levels: usize, schedule: &Schedule) -> Result<Vec<usize>> {
    (1..=levels).map(|l| iteration_schedule(levels, l, schedule)).collect()
}

/// RMS residual of `u` for the system `H u = rhs`.
pub fn residual_rms(op: &dyn LinearOperator, rhs: &ImageGrid, u: &ImageGrid) -> Result<RmsScalar> {
    check_shapes(op, rhs, u)?;
    rms_norm(&initial_residual(op, rhs, u.data()))
}
