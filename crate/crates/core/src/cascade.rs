//! Grid hierarchy and the cascadic restoration drivers.
//!
//! Levels are numbered from 1 (coarsest) to `L` (finest, the input grid).
//! Level data is obtained by repeated injection and level kernels by
//! repeated Galerkin coarsening of the finest blur factor.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::blur::{coarse_side, BlurKernel1D};
use crate::error::{Error, Result};
use crate::image::{psnr, ImageGrid, RmsScalar};
use crate::regularize::{apply_ds, DiffusionParams, LsqParams};
use crate::solve::{iteration_schedule, smooth, SolveOutcome, SolverConfig, StopReason};
use crate::transfer::{prolong_extrapolated, prolong_linear, prolong_quadratic, restrict, LevelGeometry};

/// Level count used when the image admits it.
pub const DEFAULT_LEVELS: usize = 4;

#[derive(Debug, Clone)]
pub struct HierarchyLevel {
    pub geometry: LevelGeometry,
    /// Restricted right-hand side `g_l`.
    pub data: ImageGrid,
    pub kernel: BlurKernel1D,
    /// Noise magnitude used by the discrepancy test on this level.
    pub delta: RmsScalar,
}

/// Nested levels, coarsest first.
#[derive(Debug, Clone)]
pub struct GridHierarchy {
    levels: Vec<HierarchyLevel>,
}

impl GridHierarchy {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Level `l` (1-based).
    pub fn level(&self, l: usize) -> &HierarchyLevel {
        &self.levels[l - 1]
    }

    pub fn finest(&self) -> &HierarchyLevel {
        self.levels.last().expect("hierarchy has at least one level")
    }

    pub fn levels(&self) -> &[HierarchyLevel] {
        &self.levels
    }

    pub fn sides(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.geometry.side).collect()
    }

    /// Multiplies each coarse factor by `n_L / n_l`, so that the 2D coarse
    /// operator carries `N_L / N_l`: the Galerkin product taken with the
    /// adjoint of injection under size-normalized inner products.
    pub fn with_rms_scaled_operators(mut self) -> Self {
        let finest = self.levels.len() - 1;
        let n_fine = self.levels[finest].geometry.side as f64;
        for level in &mut self.levels[..finest] {
            let ratio = n_fine / level.geometry.side as f64;
            level.kernel = level.kernel.scaled(ratio);
        }
        self
    }

    /// Replaces the discrepancy threshold on every level below the finest.
    pub fn with_coarse_delta(mut self, delta: RmsScalar) -> Self {
        let finest = self.levels.len() - 1;
        for level in &mut self.levels[..finest] {
            level.delta = delta;
        }
        self
    }
}

/// Whether a grid of `side` with kernel half-bandwidth `band` can serve as
/// the coarsest level. `min_band` is 1 for genuine blurs and 0 for
/// diagonal (band 0) test operators.
fn coarsest_ok(side: usize, band: usize, min_band: usize) -> bool {
    side >= 3.max(2 * band + 1) && band >= min_band
}

/// Largest `L` for which repeated coarsening of a `side` grid and a
/// `band` kernel stays feasible.
pub fn max_feasible_levels(side: usize, band: usize) -> usize {
    let min_band = band.min(1);
    let (mut side, mut band) = (side, band);
    if !coarsest_ok(side, band, min_band) {
        return 0;
    }
    let mut levels = 1;
    loop {
        let (next_side, next_band) = (coarse_side(side), band / 2);
        if !coarsest_ok(next_side, next_band, min_band) {
            return levels;
        }
        levels += 1;
        side = next_side;
        band = next_band;
    }
}

/// [`DEFAULT_LEVELS`] when feasible, otherwise the maximum feasible count.
pub fn default_levels(side: usize, band: usize) -> usize {
    DEFAULT_LEVELS.min(max_feasible_levels(side, band)).max(1)
}

pub fn build_hierarchy(
    g_delta: &ImageGrid,
    kernel: &BlurKernel1D,
    delta: RmsScalar,
    levels: usize,
) -> Result<GridHierarchy> {
    let side = g_delta.side().ok_or_else(|| {
        Error::shape(format!(
            "data must be square, got {}x{}",
            g_delta.width(),
            g_delta.height()
        ))
    })?;
    if kernel.n() != side {
        return Err(Error::shape(format!(
            "kernel side {} does not match data side {side}",
            kernel.n()
        )));
    }
    if levels == 0 {
        return Err(Error::config("at least one level is required"));
    }
    let feasible = max_feasible_levels(side, kernel.band());
    if levels > feasible {
        return Err(Error::config(format!(
            "{levels} levels requested but a {side}x{side} image with band {} supports at most {feasible}",
            kernel.band()
        )));
    }
    let geometry = LevelGeometry::chain(side, levels)?;
    let mut data = vec![g_delta.clone()];
    let mut kernels = vec![kernel.clone()];
    for _ in 1..levels {
        data.push(restrict(data.last().unwrap())?);
        kernels.push(kernels.last().unwrap().coarsen()?);
    }
    data.reverse();
    kernels.reverse();
    let levels = geometry
        .into_iter()
        .zip(data)
        .zip(kernels)
        .map(|((geometry, data), kernel)| HierarchyLevel {
            geometry,
            data,
            kernel,
            delta,
        })
        .collect();
    Ok(GridHierarchy { levels })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Single-level smoothing on the finest grid.
    Direct,
    /// Cascade with piecewise linear prolongation.
    IecmgLinear,
    /// Cascade with quadratic prolongation.
    IecmgQuadratic,
    /// Cascade with extrapolation plus quadratic prolongation.
    Eecmg,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Direct,
        Method::IecmgLinear,
        Method::IecmgQuadratic,
        Method::Eecmg,
    ];

    pub fn is_cascade(self) -> bool {
        self != Method::Direct
    }

    /// Command-line identifier.
    pub fn id(self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::IecmgLinear => "iecmg-l",
            Method::IecmgQuadratic => "iecmg-p",
            Method::Eecmg => "eecmg",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "direct" => Ok(Method::Direct),
            "iecmg-l" => Ok(Method::IecmgLinear),
            "iecmg-p" => Ok(Method::IecmgQuadratic),
            "eecmg" => Ok(Method::Eecmg),
            other => Err(Error::config(format!("unknown method {other:?}"))),
        }
    }
}

/// How coarse operators relate to the finest blur.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoarseOperator {
    /// `R H R^T` with injection and zero insertion.
    #[default]
    Galerkin,
    /// [`CoarseOperator::Galerkin`] times `N_L / N_l`; see
    /// [`GridHierarchy::with_rms_scaled_operators`].
    Scaled,
}

impl CoarseOperator {
    pub fn id(self) -> &'static str {
        match self {
            CoarseOperator::Galerkin => "galerkin",
            CoarseOperator::Scaled => "scaled",
        }
    }
}

impl fmt::Display for CoarseOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for CoarseOperator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "galerkin" => Ok(CoarseOperator::Galerkin),
            "scaled" => Ok(CoarseOperator::Scaled),
            other => Err(Error::config(format!("unknown coarse operator {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeConfig {
    pub levels: usize,
    pub method: Method,
    pub solver: SolverConfig,
    pub lsq: LsqParams,
    pub diffusion: DiffusionParams,
    /// Discrepancy threshold for the levels below the finest; the noise
    /// level of the input is reused when `None`.
    pub coarse_delta: Option<f64>,
    pub coarse_operator: CoarseOperator,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self {
            levels: DEFAULT_LEVELS,
            method: Method::Eecmg,
            solver: SolverConfig::default(),
            lsq: LsqParams::default(),
            diffusion: DiffusionParams::default(),
            coarse_delta: None,
            coarse_operator: CoarseOperator::Galerkin,
        }
    }
}

impl CascadeConfig {
    /// Display name, e.g. `EECMG (MR)` or `CG` for the direct baseline.
    pub fn label(&self) -> String {
        let s = self.solver.smoother.label();
        match self.method {
            Method::Direct => s.to_string(),
            Method::IecmgLinear => format!("IECMG-L ({s})"),
            Method::IecmgQuadratic => format!("IECMG-P ({s})"),
            Method::Eecmg => format!("EECMG ({s})"),
        }
    }

    /// Levels actually built for this method.
    pub fn effective_levels(&self) -> usize {
        if self.method.is_cascade() {
            self.levels
        } else {
            1
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        self.lsq.validate()?;
        self.diffusion.validate()?;
        if self.levels == 0 {
            return Err(Error::config("at least one level is required"));
        }
        if self.method == Method::Eecmg && self.levels < 2 {
            return Err(Error::config("EECMG needs at least two levels"));
        }
        if let Some(d) = self.coarse_delta {
            RmsScalar::new(d)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelReport {
    pub level: usize,
    pub side: usize,
    /// Iteration budget handed to the smoother.
    pub budget: usize,
    pub iterations: usize,
    pub final_residual: f64,
    pub stop_reason: StopReason,
}

#[derive(Debug, Clone)]
pub struct RestorationReport {
    pub label: String,
    pub restored: ImageGrid,
    pub psnr_db: Option<f64>,
    pub per_level: Vec<LevelReport>,
    pub wall_time_s: f64,
    pub config: CascadeConfig,
}

impl RestorationReport {
    pub fn total_iterations(&self) -> usize {
        self.per_level.iter().map(|l| l.iterations).sum()
    }
}

fn level_report(level: &HierarchyLevel, budget: usize, outcome: &SolveOutcome) -> LevelReport {
    LevelReport {
        level: level.geometry.level,
        side: level.geometry.side,
        budget,
        iterations: outcome.iterations,
        final_residual: outcome.final_residual(),
        stop_reason: outcome.stop_reason,
    }
}

struct Cascade<'a> {
    hierarchy: &'a GridHierarchy,
    config: &'a CascadeConfig,
    per_level: Vec<LevelReport>,
}

impl<'a> Cascade<'a> {
    fn new(hierarchy: &'a GridHierarchy, config: &'a CascadeConfig) -> Self {
        Self {
            hierarchy,
            config,
            per_level: Vec::with_capacity(hierarchy.len()),
        }
    }

    /// Smooths on level `l` starting from `start` with budget `m_l`.
    fn smooth_level(&mut self, l: usize, start: &ImageGrid) -> Result<ImageGrid> {
        let level = self.hierarchy.level(l);
        let solver = &self.config.solver;
        let budget = iteration_schedule(self.hierarchy.len(), l, &solver.schedule)?;
        let outcome = smooth(
            solver.smoother,
            &level.kernel,
            &level.data,
            start,
            level.delta,
            solver.c,
            budget,
        )?;
        self.per_level.push(level_report(level, budget, &outcome));
        Ok(outcome.solution)
    }

    fn zeros(&self, l: usize) -> ImageGrid {
        let side = self.hierarchy.level(l).geometry.side;
        ImageGrid::zeros(side, side)
    }

    fn regularize(&self, image: &ImageGrid) -> Result<ImageGrid> {
        apply_ds(image, self.config.lsq, self.config.diffusion)
    }
}

/// Quadratic and extrapolated prolongation need `n_{l+1} = 2 n_l - 1` with
/// odd `n_l` on every level.
fn require_odd_chain(hierarchy: &GridHierarchy) -> Result<()> {
    let sides = hierarchy.sides();
    if sides.iter().any(|s| s % 2 == 0) {
        return Err(Error::shape(format!(
            "quadratic prolongation needs odd sides on every level, got {sides:?}"
        )));
    }
    Ok(())
}

/// Improved economical cascade: solve the coarsest level from zero, then
/// on each finer level prolong, smooth locally, diffuse, and run `m_l`
/// smoothing steps.
pub fn run_iecmg(hierarchy: &GridHierarchy, config: &CascadeConfig) -> Result<(ImageGrid, Vec<LevelReport>)> {
    let quadratic = match config.method {
        Method::IecmgLinear => false,
        Method::IecmgQuadratic => true,
        other => {
            return Err(Error::config(format!("run_iecmg cannot run {}", other.id())));
        }
    };
    if quadratic {
        require_odd_chain(hierarchy)?;
    }
    let mut cascade = Cascade::new(hierarchy, config);
    let mut u = cascade.smooth_level(1, &cascade.zeros(1))?;
    for l in 2..=hierarchy.len() {
        let side = hierarchy.level(l).geometry.side;
        let prolonged = if quadratic {
            prolong_quadratic(&u, side)?
        } else {
            prolong_linear(&u, side)?
        };
        let start = cascade.regularize(&prolonged)?;
        u = cascade.smooth_level(l, &start)?;
    }
    Ok((u, cascade.per_level))
}

/// Extrapolated economical cascade: levels 1 and 2 are solved from zero;
/// each finer start is the extrapolation of the two previous iterates,
/// refined quadratically, then locally smoothed and diffused.
pub fn run_eecmg(hierarchy: &GridHierarchy, config: &CascadeConfig) -> Result<(ImageGrid, Vec<LevelReport>)> {
    if config.method != Method::Eecmg {
        return Err(Error::config(format!("run_eecmg cannot run {}", config.method.id())));
    }
    let levels = hierarchy.len();
    if levels < 2 {
        return Err(Error::config("EECMG needs at least two levels"));
    }
    require_odd_chain(hierarchy)?;
    let mut cascade = Cascade::new(hierarchy, config);
    let mut coarser = cascade.smooth_level(1, &cascade.zeros(1))?;
    let mut finer = cascade.smooth_level(2, &cascade.zeros(2))?;
    for l in 2..levels {
        let prolonged = prolong_extrapolated(&finer, &coarser)?;
        let start = cascade.regularize(&prolonged)?;
        let next = cascade.smooth_level(l + 1, &start)?;
        coarser = std::mem::replace(&mut finer, next);
    }
    Ok((finer, cascade.per_level))
}

/// Single-level smoothing on the finest grid from zero, capped at
/// `max_iters_cap` iterations.
pub fn run_direct(hierarchy: &GridHierarchy, config: &CascadeConfig) -> Result<(ImageGrid, Vec<LevelReport>)> {
    if config.method != Method::Direct {
        return Err(Error::config(format!("run_direct cannot run {}", config.method.id())));
    }
    let level = hierarchy.finest();
    let side = level.geometry.side;
    let budget = config.solver.max_iters_cap;
    let outcome = smooth(
        config.solver.smoother,
        &level.kernel,
        &level.data,
        &ImageGrid::zeros(side, side),
        level.delta,
        config.solver.c,
        budget,
    )?;
    let report = level_report(level, budget, &outcome);
    Ok((outcome.solution, vec![report]))
}

/// Builds the hierarchy and runs the configured method, without timing or
/// scoring. Usable where no monotonic clock exists (wasm32).
pub fn run_method(
    g_delta: &ImageGrid,
    kernel: &BlurKernel1D,
    delta: RmsScalar,
    config: &CascadeConfig,
) -> Result<(ImageGrid, Vec<LevelReport>)> {
    config.validate()?;
    let mut hierarchy = build_hierarchy(g_delta, kernel, delta, config.effective_levels())?;
    if let Some(d) = config.coarse_delta {
        hierarchy = hierarchy.with_coarse_delta(RmsScalar::new(d)?);
    }
    if config.coarse_operator == CoarseOperator::Scaled {
        hierarchy = hierarchy.with_rms_scaled_operators();
    }
    match config.method {
        Method::Direct => run_direct(&hierarchy, config),
        Method::IecmgLinear | Method::IecmgQuadratic => run_iecmg(&hierarchy, config),
        Method::Eecmg => run_eecmg(&hierarchy, config),
    }
}

/// [`run_method`] plus wall time and, when `truth` is given, PSNR.
pub fn restore(
    g_delta: &ImageGrid,
    kernel: &BlurKernel1D,
    delta: RmsScalar,
    config: &CascadeConfig,
    truth: Option<&ImageGrid>,
) -> Result<RestorationReport> {
    let started = Instant::now();
    let (restored, per_level) = run_method(g_delta, kernel, delta, config)?;
    let wall_time_s = started.elapsed().as_secs_f64();
    let psnr_db = truth.map(|t| psnr(t, &restored)).transpose()?;
    Ok(RestorationReport {
        label: config.label(),
        restored,
        psnr_db,
        per_level,
        wall_time_s,
        config: *config,
    })
}

impl fmt::Display for LevelReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "level={} side={} budget={} iterations={} residual={:.6e} stop={}",
            self.level, self.side, self.budget, self.iterations, self.final_residual, self.stop_reason
        )
    }
}
