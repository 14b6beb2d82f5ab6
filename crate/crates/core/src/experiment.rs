//! Scenario harness: the standard blur and noise grid, seed-averaged runs,
//! CSV and Markdown emission, and the key=value meta and report formats.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;

use crate::blur::{degrade, DegradationSpec};
use crate::cascade::{default_levels, restore, CascadeConfig, Method, RestorationReport};
use crate::error::{Error, Result};
use crate::image::ImageGrid;
use crate::solve::Smoother;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "CASCADE_RESTORE_THREADS";

/// Seeds used when none are given.
pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

/// Column order of `results.csv`.
pub const CSV_HEADER: [&str; 8] = [
    "method",
    "blur",
    "noise",
    "seed",
    "psnr_db",
    "wall_time_s",
    "iterations",
    "error",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlurLevel {
    pub id: &'static str,
    pub sigma: f64,
    pub band: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseLevel {
    pub id: &'static str,
    pub nu: f64,
}

pub const BLUR_LEVELS: [BlurLevel; 4] = [
    BlurLevel {
        id: "b1",
        sigma: 1.0,
        band: 7,
    },
    BlurLevel {
        id: "b2",
        sigma: 2.0,
        band: 9,
    },
    BlurLevel {
        id: "b3",
        sigma: 3.0,
        band: 11,
    },
    BlurLevel {
        id: "b4",
        sigma: 4.0,
        band: 13,
    },
];

pub const NOISE_LEVELS: [NoiseLevel; 4] = [
    NoiseLevel { id: "v1", nu: 5e-2 },
    NoiseLevel { id: "v2", nu: 1e-1 },
    NoiseLevel { id: "v3", nu: 5e-1 },
    NoiseLevel { id: "v4", nu: 8e-1 },
];

pub fn blur_level(id: &str) -> Result<BlurLevel> {
    BLUR_LEVELS
        .iter()
        .find(|b| b.id.eq_ignore_ascii_case(id))
        .copied()
        .ok_or_else(|| Error::config(format!("unknown blur level {id:?} (expected b1-b4)")))
}

pub fn noise_level(id: &str) -> Result<NoiseLevel> {
    NOISE_LEVELS
        .iter()
        .find(|v| v.id.eq_ignore_ascii_case(id))
        .copied()
        .ok_or_else(|| Error::config(format!("unknown noise level {id:?} (expected v1-v4)")))
}

/// A blur level paired with a noise level, e.g. `b1v1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub blur: BlurLevel,
    pub noise: NoiseLevel,
}

impl Scenario {
    pub fn id(&self) -> String {
        format!("{}{}", self.blur.id, self.noise.id)
    }

    pub fn spec(&self, seed: u64) -> DegradationSpec {
        DegradationSpec {
            sigma: self.blur.sigma,
            band: self.blur.band,
            noise_level: self.noise.nu,
            seed,
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    /// Parses `b<i>v<j>`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        let split = lower
            .find('v')
            .ok_or_else(|| Error::config(format!("scenario {s:?} is not of the form b<i>v<j>")))?;
        Ok(Scenario {
            blur: blur_level(&lower[..split])?,
            noise: noise_level(&lower[split..])?,
        })
    }
}

/// The diagonal of the grid: b1v1, b2v2, b3v3, b4v4.
pub fn standard_scenarios() -> Vec<Scenario> {
    BLUR_LEVELS
        .iter()
        .zip(NOISE_LEVELS.iter())
        .map(|(&blur, &noise)| Scenario { blur, noise })
        .collect()
}

/// An algorithm together with the smoother it runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MethodChoice {
    pub method: Method,
    pub smoother: Smoother,
}

impl MethodChoice {
    /// Parses one of `cg`, `mr`, `iecmg-l`, `iecmg-p`, `eecmg`; cascades
    /// take `smoother`.
    pub fn parse(name: &str, smoother: Smoother) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "cg" => Ok(Self::new(Method::Direct, Smoother::Cg)),
            "mr" => Ok(Self::new(Method::Direct, Smoother::Mr)),
            other => {
                let method: Method = other.parse()?;
                if method == Method::Direct {
                    return Err(Error::config("name the direct baseline as cg or mr"));
                }
                Ok(Self::new(method, smoother))
            }
        }
    }

    /// Comma-separated list; empty entries are rejected.
    pub fn parse_list(list: &str, smoother: Smoother) -> Result<Vec<Self>> {
        let list = list.trim();
        if list.is_empty() {
            return Err(Error::config("no methods given"));
        }
        let mut out = Vec::new();
        for name in list.split(',') {
            if name.trim().is_empty() {
                return Err(Error::config(format!("empty entry in method list {list:?}")));
            }
            let choice = Self::parse(name, smoother)?;
            if !out.contains(&choice) {
                out.push(choice);
            }
        }
        Ok(out)
    }

    pub fn new(method: Method, smoother: Smoother) -> Self {
        Self { method, smoother }
    }

    /// CLI name: `cg`/`mr` for the baselines, the method id otherwise.
    pub fn cli_name(&self) -> &'static str {
        match (self.method, self.smoother) {
            (Method::Direct, Smoother::Cg) => "cg",
            (Method::Direct, Smoother::Mr) => "mr",
            (m, _) => m.id(),
        }
    }

    pub fn apply(&self, base: &CascadeConfig) -> CascadeConfig {
        let mut config = *base;
        config.method = self.method;
        config.solver.smoother = self.smoother;
        config
    }

    pub fn label(&self) -> String {
        self.apply(&CascadeConfig::default()).label()
    }

    /// Position in the expected quality chain, Direct lowest.
    fn rank(&self) -> usize {
        match self.method {
            Method::Direct => 0,
            Method::IecmgLinear => 1,
            Method::IecmgQuadratic => 2,
            Method::Eecmg => 3,
        }
    }
}

/// One method run on one scenario and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRow {
    pub method: String,
    pub choice: MethodChoice,
    pub blur: String,
    pub noise: String,
    pub seed: u64,
    pub psnr_db: Option<f64>,
    pub wall_time_s: Option<f64>,
    /// Per-level iteration counts joined by `+`, finest last.
    pub iterations: String,
    pub error: Option<String>,
}

impl ScenarioRow {
    pub fn scenario_id(&self) -> String {
        format!("{}{}", self.blur, self.noise)
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    fn sort_key(&self) -> (String, usize, usize, u64) {
        (
            self.scenario_id(),
            self.choice.smoother as usize,
            self.choice.rank(),
            self.seed,
        )
    }
}

/// Knobs of a table run.
#[derive(Debug, Clone)]
pub struct TableRun {
    pub methods: Vec<MethodChoice>,
    pub scenarios: Vec<Scenario>,
    pub seeds: Vec<u64>,
    /// Shared solver and regularizer settings; method and smoother are
    /// overridden per row.
    pub base: CascadeConfig,
    /// Cascade depth; `None` picks the default for each scenario's band.
    pub levels: Option<usize>,
}

impl TableRun {
    pub fn new(methods: Vec<MethodChoice>) -> Self {
        Self {
            methods,
            scenarios: standard_scenarios(),
            seeds: DEFAULT_SEEDS.to_vec(),
            base: CascadeConfig::default(),
            levels: None,
        }
    }
}

/// Worker count from [`THREADS_ENV`], if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Runs every method on every scenario and seed. Failures are recorded
/// per row; rows come back sorted by scenario, smoother, method, seed.
pub fn run_table(truth: &ImageGrid, run: &TableRun) -> Result<Vec<ScenarioRow>> {
    if run.methods.is_empty() {
        return Err(Error::config("no methods given"));
    }
    if truth.side().is_none() {
        return Err(Error::shape(format!(
            "ground truth must be square, got {}x{}",
            truth.width(),
            truth.height()
        )));
    }
    let jobs: Vec<(Scenario, u64)> = run
        .scenarios
        .iter()
        .flat_map(|&s| run.seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let work = || -> Vec<ScenarioRow> {
        jobs.par_iter()
            .flat_map_iter(|&(scenario, seed)| run_job(truth, run, scenario, seed))
            .collect()
    };
    let mut rows = match thread_cap() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config(format!("cannot start {n} workers: {e}")))?
            .install(work),
        None => work(),
    };
    rows.sort_by_key(ScenarioRow::sort_key);
    Ok(rows)
}

fn run_job(truth: &ImageGrid, run: &TableRun, scenario: Scenario, seed: u64) -> Vec<ScenarioRow> {
    let row = |choice: &MethodChoice, outcome: Result<RestorationReport>| {
        let mut row = ScenarioRow {
            method: choice.label(),
            choice: *choice,
            blur: scenario.blur.id.to_string(),
            noise: scenario.noise.id.to_string(),
            seed,
            psnr_db: None,
            wall_time_s: None,
            iterations: String::new(),
            error: None,
        };
        match outcome {
            Ok(report) => {
                row.psnr_db = report.psnr_db;
                row.wall_time_s = Some(report.wall_time_s);
                row.iterations = iterations_summary(&report);
            }
            Err(e) => row.error = Some(e.to_string()),
        }
        row
    };
    let degraded = match degrade(truth, &scenario.spec(seed)) {
        Ok(d) => d,
        Err(e) => {
            let msg = e.to_string();
            return run
                .methods
                .iter()
                .map(|m| row(m, Err(Error::Domain(msg.clone()))))
                .collect();
        }
    };
    let side = truth.width();
    run.methods
        .iter()
        .map(|choice| {
            let mut config = choice.apply(&run.base);
            config.levels = run.levels.unwrap_or_else(|| default_levels(side, scenario.blur.band));
            let outcome = restore(&degraded.noisy, &degraded.kernel, degraded.delta, &config, Some(truth));
            row(choice, outcome)
        })
        .collect()
}

/// Per-level iteration counts joined by `+`.
pub fn iterations_summary(report: &RestorationReport) -> String {
    report
        .per_level
        .iter()
        .map(|l| l.iterations.to_string())
        .collect::<Vec<_>>()
        .join("+")
}

/// Six significant digits with a `.` decimal point; scientific notation
/// outside `[1e-4, 1e6)`.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let exponent: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-4..6).contains(&exponent) {
        let decimals = (5 - exponent) as usize;
        format!("{x:.decimals$}")
    } else {
        sci
    }
}

pub fn rows_to_csv(rows: &[ScenarioRow]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Domain(format!("csv: {e}"));
    writer.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in rows {
        let opt = |v: Option<f64>| v.map(format_sig6).unwrap_or_default();
        writer
            .write_record([
                r.method.clone(),
                r.blur.clone(),
                r.noise.clone(),
                r.seed.to_string(),
                opt(r.psnr_db),
                opt(r.wall_time_s),
                r.iterations.clone(),
                r.error.clone().unwrap_or_default(),
            ])
            .map_err(csv_err)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Domain(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Mean PSNR and time of one method on one scenario over its successful
/// seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub choice: MethodChoice,
    pub scenario: String,
    pub mean_psnr_db: Option<f64>,
    pub mean_time_s: Option<f64>,
    pub succeeded: usize,
    pub total: usize,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn summarize(rows: &[ScenarioRow]) -> Vec<MethodSummary> {
    let mut groups: BTreeMap<(String, usize, usize), Vec<&ScenarioRow>> = BTreeMap::new();
    for r in rows {
        let (scenario, smoother, rank, _) = r.sort_key();
        groups.entry((scenario, smoother, rank)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((scenario, _, _), group)| {
            let ok: Vec<_> = group.iter().filter(|r| r.is_ok()).collect();
            MethodSummary {
                choice: group[0].choice,
                scenario,
                mean_psnr_db: mean(ok.iter().filter_map(|r| r.psnr_db)),
                mean_time_s: mean(ok.iter().filter_map(|r| r.wall_time_s)),
                succeeded: ok.len(),
                total: group.len(),
            }
        })
        .collect()
}

/// Per-seed check of the chain EECMG >= IECMG-P >= IECMG-L >= Direct for one
/// scenario and smoother, restricted to the methods that were run.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderingCheck {
    pub scenario: String,
    pub smoother: Smoother,
    /// Labels of the compared methods, best expected first.
    pub chain: Vec<String>,
    pub seeds_holding: usize,
    pub seeds_compared: usize,
    /// Mean PSNR of the top of the chain minus that of the bottom.
    pub mean_gain_db: Option<f64>,
}

impl OrderingCheck {
    /// Holds on at least `needed` seeds.
    pub fn holds_on(&self, needed: usize) -> bool {
        self.seeds_compared > 0 && self.seeds_holding >= needed
    }
}

pub fn ordering_checks(rows: &[ScenarioRow]) -> Vec<OrderingCheck> {
    let mut groups: BTreeMap<(String, usize), Vec<&ScenarioRow>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.scenario_id(), r.choice.smoother as usize))
            .or_default()
            .push(r);
    }
    let mut out = Vec::new();
    for ((scenario, _), group) in groups {
        let mut ranks: Vec<usize> = group.iter().map(|r| r.choice.rank()).collect();
        ranks.sort_unstable();
        ranks.dedup();
        if ranks.len() < 2 {
            continue;
        }
        ranks.reverse();
        let smoother = group[0].choice.smoother;
        let label_of = |rank: usize| {
            group
                .iter()
                .find(|r| r.choice.rank() == rank)
                .map(|r| r.method.clone())
                .unwrap_or_default()
        };
        let mut by_seed: BTreeMap<u64, BTreeMap<usize, f64>> = BTreeMap::new();
        for r in group.iter().filter(|r| r.is_ok()) {
            if let Some(p) = r.psnr_db {
                by_seed.entry(r.seed).or_default().insert(r.choice.rank(), p);
            }
        }
        let complete: Vec<Vec<f64>> = by_seed
            .values()
            .filter(|m| ranks.iter().all(|k| m.contains_key(k)))
            .map(|m| ranks.iter().map(|k| m[k]).collect())
            .collect();
        let seeds_holding = complete
            .iter()
            .filter(|psnrs| psnrs.windows(2).all(|w| w[0] >= w[1]))
            .count();
        let mean_gain_db = mean(complete.iter().map(|p| p[0] - p[p.len() - 1]));
        out.push(OrderingCheck {
            scenario,
            smoother,
            chain: ranks.iter().map(|&k| label_of(k)).collect(),
            seeds_holding,
            seeds_compared: complete.len(),
            mean_gain_db,
        });
    }
    out
}

/// Mean wall time of the CG rows and of the MR rows, over the methods run
/// with both smoothers.
pub fn smoother_timing(rows: &[ScenarioRow]) -> Option<(f64, f64)> {
    let methods_with = |s: Smoother| -> Vec<Method> {
        rows.iter()
            .filter(|r| r.choice.smoother == s)
            .map(|r| r.choice.method)
            .collect()
    };
    let (cg, mr) = (methods_with(Smoother::Cg), methods_with(Smoother::Mr));
    let shared = |m: &Method| cg.contains(m) && mr.contains(m);
    let time = |s: Smoother| {
        mean(
            rows.iter()
                .filter(|r| r.choice.smoother == s && shared(&r.choice.method) && r.is_ok())
                .filter_map(|r| r.wall_time_s),
        )
    };
    Some((time(Smoother::Cg)?, time(Smoother::Mr)?))
}

/// Markdown tables: one row per scenario, a PSNR and a Time column per
/// method, followed by the ordering summary.
pub fn tables_markdown(rows: &[ScenarioRow], seeds: usize) -> String {
    let summaries = summarize(rows);
    let mut methods: Vec<MethodChoice> = Vec::new();
    for s in &summaries {
        if !methods.contains(&s.choice) {
            methods.push(s.choice);
        }
    }
    methods.sort_by_key(|m| (m.smoother as usize, m.rank()));
    let mut scenarios: Vec<String> = summaries.iter().map(|s| s.scenario.clone()).collect();
    scenarios.dedup();

    let mut md = String::new();
    let _ = writeln!(md, "# Restoration results\n");
    let _ = writeln!(md, "Mean over {seeds} seed(s). PSNR in dB, Time in seconds.\n");
    let mut header = String::from("| Scenario |");
    let mut rule = String::from("|---|");
    for m in &methods {
        let _ = write!(header, " {} PSNR | {} Time |", m.label(), m.label());
        rule.push_str("---:|---:|");
    }
    let _ = writeln!(md, "{header}\n{rule}");
    for scenario in &scenarios {
        let mut line = format!("| {scenario} |");
        for m in &methods {
            let s = summaries.iter().find(|s| &s.scenario == scenario && s.choice == *m);
            let cell = |v: Option<f64>, decimals: usize| match v {
                Some(v) => format!("{v:.decimals$}"),
                None => "n/a".to_string(),
            };
            let (p, t) = match s {
                Some(s) => (cell(s.mean_psnr_db, 4), cell(s.mean_time_s, 4)),
                None => ("n/a".into(), "n/a".into()),
            };
            let _ = write!(line, " {p} | {t} |");
        }
        let _ = writeln!(md, "{line}");
    }

    let failures = rows.iter().filter(|r| !r.is_ok()).count();
    if failures > 0 {
        let _ = writeln!(md, "\n{failures} run(s) failed; see the error column of results.csv.");
    }

    let checks = ordering_checks(rows);
    if !checks.is_empty() {
        let _ = writeln!(md, "\n## Ordering check\n");
        let _ = writeln!(md, "| Scenario | Smoother | Chain | Seeds holding | Mean gain (dB) |");
        let _ = writeln!(md, "|---|---|---|---:|---:|");
        for c in &checks {
            let gain = c
                .mean_gain_db
                .map(|g| format!("{g:.3}"))
                .unwrap_or_else(|| "n/a".into());
            let _ = writeln!(
                md,
                "| {} | {} | {} | {}/{} | {} |",
                c.scenario,
                c.smoother,
                c.chain.join(" >= "),
                c.seeds_holding,
                c.seeds_compared,
                gain
            );
        }
    }
    if let Some((cg, mr)) = smoother_timing(rows) {
        let verdict = if mr < cg { "MR faster" } else { "MR not faster" };
        let _ = writeln!(
            md,
            "\nMean time over methods run with both smoothers: CG {cg:.4} s, MR {mr:.4} s ({verdict})."
        );
    }
    md
}

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
/// Later keys do not overwrite earlier ones; all pairs are kept in order.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}: expected key=value, got {line:?}", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Contents of a `.meta` file written next to a degraded image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegradationMeta {
    pub sigma: f64,
    pub band: usize,
    pub noise_level: f64,
    pub seed: u64,
    pub delta: f64,
    pub side: usize,
}

impl DegradationMeta {
    /// Floats use the shortest representation that parses back exactly.
    pub fn to_text(&self) -> String {
        format!(
            "sigma={}\nband={}\nnoise_level={}\nseed={}\ndelta={}\nside={}\n",
            self.sigma, self.band, self.noise_level, self.seed, self.delta, self.side
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let pairs: BTreeMap<String, String> = parse_key_values(text)?.into_iter().rev().collect();
        fn field<T: FromStr>(pairs: &BTreeMap<String, String>, key: &str) -> Result<T> {
            let raw = pairs
                .get(key)
                .ok_or_else(|| Error::config(format!("meta file lacks {key}")))?;
            raw.parse()
                .map_err(|_| Error::config(format!("meta {key}={raw:?} is not a valid value")))
        }
        Ok(Self {
            sigma: field(&pairs, "sigma")?,
            band: field(&pairs, "band")?,
            noise_level: field(&pairs, "noise_level")?,
            seed: field(&pairs, "seed")?,
            delta: field(&pairs, "delta")?,
            side: field(&pairs, "side")?,
        })
    }
}

/// Text report: configuration echo, outcome, then one `level=` line per
/// level. Floats are written in round-trip form.
pub fn report_text(report: &RestorationReport, delta: f64, notes: &[String]) -> String {
    let c = &report.config;
    let mut out = String::new();
    let _ = writeln!(out, "method={}", report.label);
    let _ = writeln!(out, "method_id={}", c.method.id());
    let _ = writeln!(out, "smoother={}", c.solver.smoother);
    let _ = writeln!(out, "levels={}", report.per_level.len());
    let _ = writeln!(out, "c={}", c.solver.c);
    let _ = writeln!(out, "max_iters_cap={}", c.solver.max_iters_cap);
    let _ = writeln!(out, "k={}", c.diffusion.k);
    let _ = writeln!(out, "tau={}", c.diffusion.tau);
    let _ = writeln!(out, "steps={}", c.diffusion.steps);
    let _ = writeln!(out, "rho={}", c.lsq.rho);
    let _ = writeln!(out, "coarse_operator={}", c.coarse_operator);
    let _ = writeln!(out, "delta={delta}");
    let _ = writeln!(out, "side={}", report.restored.width());
    if let Some(p) = report.psnr_db {
        let _ = writeln!(out, "psnr_db={p}");
    }
    let _ = writeln!(out, "total_iterations={}", report.total_iterations());
    let _ = writeln!(out, "wall_time_s={}", report.wall_time_s);
    for note in notes {
        let _ = writeln!(out, "note={note}");
    }
    for l in &report.per_level {
        let _ = writeln!(
            out,
            "level={} side={} budget={} iterations={} final_residual={} stop={}",
            l.level, l.side, l.budget, l.iterations, l.final_residual, l.stop_reason
        );
    }
    out
}

/// Smallest side `>= n` whose `levels`-deep coarsening chain stays odd,
/// i.e. `s = 1 (mod 2^(levels-1))`.
pub fn cascade_side_at_least(n: usize, levels: usize) -> usize {
    let period = 1usize << levels.saturating_sub(1);
    let s = n.max(3);
    s + (period + 1 - s % period) % period
}

/// Largest side `<= n` whose coarsening chain stays odd for `levels`.
pub fn cascade_side_at_most(n: usize, levels: usize) -> Option<usize> {
    let period = 1usize << levels.saturating_sub(1);
    if n < period + 1 {
        return None;
    }
    Some(n - (n + period - 1) % period)
}

/// Centered square crop of side `side`.
pub fn center_square(image: &ImageGrid, side: usize) -> Result<ImageGrid> {
    if side > image.width() || side > image.height() {
        return Err(Error::shape(format!(
            "cannot cut a {side}x{side} square from {}x{}",
            image.width(),
            image.height()
        )));
    }
    image.crop((image.height() - side) / 2, (image.width() - side) / 2, side, side)
}
