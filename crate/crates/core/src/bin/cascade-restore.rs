use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cascade_restore::cascade::{default_levels, CoarseOperator};
use cascade_restore::experiment::{
    blur_level, cascade_side_at_least, cascade_side_at_most, center_square, iterations_summary, noise_level,
    report_text, rows_to_csv, run_table, tables_markdown, DegradationMeta, MethodChoice, Scenario, TableRun,
    DEFAULT_SEEDS,
};
use cascade_restore::{
    build_kernel, degrade, phantom, read_pgm, restore, write_pgm, CascadeConfig, DegradationSpec, Error, ImageGrid,
    LsqParams, Method, RmsScalar, Smoother,
};

#[derive(Parser)]
#[command(
    name = "cascade-restore",
    version,
    about = "Cascadic multigrid restoration of blurred, noisy grayscale images"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Blur an image with a Gaussian kernel and add scaled white noise.
    Degrade(DegradeArgs),
    /// Restore a degraded image with a direct or cascadic solver.
    Restore(RestoreArgs),
    /// Run methods over the standard blur/noise grid and emit CSV and Markdown.
    Tables(TablesArgs),
    /// Write the built-in synthetic test image.
    Phantom(PhantomArgs),
}

#[derive(Args)]
struct DegradeArgs {
    /// Ground-truth PGM image.
    #[arg(long)]
    input: PathBuf,
    /// Output prefix; writes <out>.blur.pgm, <out>.noisy.pgm and <out>.meta.
    #[arg(long)]
    out: PathBuf,
    /// Gaussian standard deviation in pixels.
    #[arg(long)]
    sigma: Option<f64>,
    /// Kernel half-bandwidth in pixels.
    #[arg(long)]
    band: Option<usize>,
    /// Noise level: RMS of the noise relative to the RMS of the image.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Blur preset b1-b4 (sigma and band).
    #[arg(long)]
    blur_level: Option<String>,
    /// Noise preset v1-v4.
    #[arg(long)]
    noise_level: Option<String>,
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Discrepancy constant c > 1.
    #[arg(long, default_value_t = 1.1)]
    c: f64,
    /// Diffusion edge threshold on the 0-255 scale.
    #[arg(long, default_value_t = 10.0)]
    k: f64,
    /// Diffusion time step.
    #[arg(long, default_value_t = 0.2)]
    tau: f64,
    /// Diffusion steps per level.
    #[arg(long, default_value_t = 1)]
    steps: usize,
    /// Weight bandwidth of the local fit as a fraction of 255.
    #[arg(long, default_value_t = 0.1, conflicts_with = "raw_lsq")]
    rho: f64,
    /// Use unit-scale weights on raw intensity differences (rho = 1/255).
    #[arg(long)]
    raw_lsq: bool,
    /// Smoother for cascadic methods: cg or mr.
    #[arg(long, default_value = "cg")]
    smoother: Smoother,
    /// Coarse operators: galerkin (R H R^T) or scaled (times N_L / N_l).
    #[arg(long, default_value = "galerkin")]
    coarse_operator: CoarseOperator,
    /// Iteration cap of the direct solvers.
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
}

impl SolverArgs {
    fn config(&self) -> CascadeConfig {
        let mut config = CascadeConfig::default();
        config.solver.c = self.c;
        config.solver.max_iters_cap = self.max_iters;
        config.solver.smoother = self.smoother;
        config.diffusion.k = self.k;
        config.diffusion.tau = self.tau;
        config.diffusion.steps = self.steps;
        config.lsq = if self.raw_lsq {
            LsqParams::RAW
        } else {
            LsqParams { rho: self.rho }
        };
        config.coarse_operator = self.coarse_operator;
        config
    }
}

#[derive(Args)]
struct RestoreArgs {
    /// Degraded PGM image.
    #[arg(long)]
    input: PathBuf,
    /// Meta file written by `degrade`; explicit --sigma/--band/--delta override it.
    #[arg(long)]
    meta: Option<PathBuf>,
    /// Gaussian standard deviation in pixels.
    #[arg(long)]
    sigma: Option<f64>,
    /// Kernel half-bandwidth in pixels.
    #[arg(long)]
    band: Option<usize>,
    /// Noise RMS used by the discrepancy stop.
    #[arg(long)]
    delta: Option<f64>,
    /// cg, mr, iecmg-l, iecmg-p or eecmg.
    #[arg(long)]
    method: String,
    /// Cascade depth (cascadic methods only).
    #[arg(long)]
    levels: Option<usize>,
    /// Ground truth for PSNR.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Restored PGM.
    #[arg(long)]
    out: PathBuf,
    /// Report file; defaults to <out>.report.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct TablesArgs {
    /// Ground-truth PGM; the built-in 129x129 phantom when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Comma-separated methods: cg, mr, iecmg-l, iecmg-p, eecmg.
    #[arg(long)]
    methods: String,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Comma-separated scenarios such as b1v1; defaults to b1v1,b2v2,b3v3,b4v4.
    #[arg(long, value_delimiter = ',')]
    scenarios: Option<Vec<Scenario>>,
    /// Cascade depth; per-scenario default when omitted.
    #[arg(long)]
    levels: Option<usize>,
    /// Directory for results.csv and tables.md.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct PhantomArgs {
    #[arg(long, default_value_t = 129)]
    side: usize,
    #[arg(long)]
    out: PathBuf,
}

/// Failure with the process exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io { .. } | Error::Parse { .. } => 2,
            Error::Numeric { .. } => 3,
            Error::Shape(_) | Error::Domain(_) | Error::Config(_) => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|source| {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
        .into()
    })
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|source| {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
        .into()
    })
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Crops a non-square image to its centered square.
fn squared(image: ImageGrid, what: &str) -> Result<ImageGrid, Failure> {
    if image.side().is_some() {
        return Ok(image);
    }
    let side = image.width().min(image.height());
    eprintln!(
        "note: {what} is {}x{}; using the centered {side}x{side} square",
        image.width(),
        image.height()
    );
    Ok(center_square(&image, side)?)
}

fn cmd_degrade(args: DegradeArgs) -> Result<(), Failure> {
    let preset = args.blur_level.as_deref().map(blur_level).transpose()?;
    let sigma = args.sigma.or(preset.map(|b| b.sigma));
    let band = args.band.or(preset.map(|b| b.band));
    let noise = args
        .noise
        .or(args.noise_level.as_deref().map(noise_level).transpose()?.map(|v| v.nu));
    let (Some(sigma), Some(band), Some(noise)) = (sigma, band, noise) else {
        return Err(usage(
            "give --sigma and --band (or --blur-level) and --noise (or --noise-level)",
        ));
    };
    let truth = squared(read_pgm(&args.input)?, "input")?;
    let spec = DegradationSpec {
        sigma,
        band,
        noise_level: noise,
        seed: args.seed,
    };
    let d = degrade(&truth, &spec)?;
    write_pgm(&d.blurred, with_suffix(&args.out, ".blur.pgm"))?;
    write_pgm(&d.noisy, with_suffix(&args.out, ".noisy.pgm"))?;
    let meta = DegradationMeta {
        sigma,
        band,
        noise_level: noise,
        seed: args.seed,
        delta: d.delta.value(),
        side: truth.width(),
    };
    write_text(&with_suffix(&args.out, ".meta"), &meta.to_text())?;
    println!("delta={}", meta.delta);
    Ok(())
}

fn cmd_restore(args: RestoreArgs) -> Result<(), Failure> {
    let choice = MethodChoice::parse(&args.method, args.solver.smoother)?;
    if choice.method == Method::Direct && args.levels.is_some() {
        return Err(usage(format!(
            "--levels does not apply to the single-level method {}",
            choice.cli_name()
        )));
    }
    let meta = args
        .meta
        .as_deref()
        .map(|p| read_text(p).and_then(|t| DegradationMeta::parse(&t).map_err(Failure::from)))
        .transpose()?;
    let sigma = args.sigma.or(meta.map(|m| m.sigma));
    let band = args.band.or(meta.map(|m| m.band));
    let delta = args.delta.or(meta.map(|m| m.delta));
    let (Some(sigma), Some(band), Some(delta)) = (sigma, band, delta) else {
        return Err(usage("give --meta or all of --sigma, --band and --delta"));
    };
    let delta = RmsScalar::new(delta)?;

    let noisy = squared(read_pgm(&args.input)?, "input")?;
    let truth = args
        .truth
        .as_deref()
        .map(|p| read_pgm(p).map_err(Failure::from).and_then(|t| squared(t, "truth")))
        .transpose()?;
    if let Some(t) = &truth {
        if t.width() != noisy.width() {
            return Err(usage(format!(
                "truth side {} differs from input side {}",
                t.width(),
                noisy.width()
            )));
        }
    }

    let side = noisy.width();
    let mut config = choice.apply(&args.solver.config());
    config.levels = match (choice.method, args.levels) {
        (Method::Direct, _) => 1,
        (_, Some(l)) => l,
        (_, None) => default_levels(side, band),
    };
    config.validate()?;

    // quadratic refinement needs an odd chain of sides: pad by replication
    let needs_odd_chain = matches!(choice.method, Method::IecmgQuadratic | Method::Eecmg);
    let work_side = if needs_odd_chain {
        cascade_side_at_least(side, config.levels)
    } else {
        side
    };
    let mut notes = Vec::new();
    let work = if work_side != side {
        notes.push(format!(
            "padded {side}x{side} to {work_side}x{work_side} by edge replication; result cropped back"
        ));
        noisy.pad_replicate(work_side, work_side)?
    } else {
        noisy.clone()
    };
    let kernel = build_kernel(sigma, band, work_side)?;
    let mut report = restore(&work, &kernel, delta, &config, None)?;
    if work_side != side {
        report.restored = report.restored.crop(0, 0, side, side)?;
    }
    if let Some(t) = &truth {
        report.psnr_db = Some(cascade_restore::psnr(t, &report.restored)?);
    }

    write_pgm(&report.restored, &args.out)?;
    let report_path = args.report.clone().unwrap_or_else(|| with_suffix(&args.out, ".report"));
    write_text(&report_path, &report_text(&report, delta.value(), &notes))?;
    println!("method={}", report.label);
    println!("iterations={}", iterations_summary(&report));
    if let Some(p) = report.psnr_db {
        println!("psnr_db={p:.4}");
    }
    Ok(())
}

fn cmd_tables(args: TablesArgs) -> Result<(), Failure> {
    let methods = MethodChoice::parse_list(&args.methods, args.solver.smoother)?;
    let truth = match &args.input {
        Some(p) => squared(read_pgm(p)?, "input")?,
        None => phantom(129),
    };
    let mut run = TableRun::new(methods);
    run.base = args.solver.config();
    run.levels = args.levels;
    if let Some(seeds) = args.seeds {
        if seeds.is_empty() {
            return Err(usage("no seeds given"));
        }
        run.seeds = seeds;
    } else {
        run.seeds = DEFAULT_SEEDS.to_vec();
    }
    if let Some(s) = args.scenarios {
        run.scenarios = s;
    }
    run.base.validate()?;

    // keep every cascade level odd so all prolongations apply
    let depth = args.levels.unwrap_or(cascade_restore::cascade::DEFAULT_LEVELS);
    let side = cascade_side_at_most(truth.width(), depth)
        .ok_or_else(|| usage(format!("a {0}x{0} image is too small", truth.width())))?;
    let truth = if side != truth.width() {
        eprintln!("note: using the centered {side}x{side} square of the input");
        center_square(&truth, side)?
    } else {
        truth
    };

    let rows = run_table(&truth, &run)?;
    fs::create_dir_all(&args.out_dir).map_err(|source| Error::Io {
        path: args.out_dir.clone(),
        source,
    })?;
    write_text(&args.out_dir.join("results.csv"), &rows_to_csv(&rows)?)?;
    let md = tables_markdown(&rows, run.seeds.len());
    write_text(&args.out_dir.join("tables.md"), &md)?;
    print!("{md}");
    if rows.iter().any(|r| r.is_ok()) {
        Ok(())
    } else {
        Err(Failure {
            code: 3,
            message: "every scenario failed".into(),
        })
    }
}

fn cmd_phantom(args: PhantomArgs) -> Result<(), Failure> {
    if args.side < 8 {
        return Err(usage("phantom side must be at least 8"));
    }
    write_pgm(&phantom(args.side), &args.out)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let result = match cli.command {
        Command::Degrade(a) => cmd_degrade(a),
        Command::Restore(a) => cmd_restore(a),
        Command::Tables(a) => cmd_tables(a),
        Command::Phantom(a) => cmd_phantom(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
