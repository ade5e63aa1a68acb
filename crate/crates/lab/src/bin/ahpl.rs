use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ahpl_lab::config::{CertifyMode, ExperimentConfig, Family};
use ahpl_lab::experiments::{self, Context};
use ahpl_lab::output::RunDir;
use ahpl_lab::{LabError, LabResult};

/// Renormalization, asymptotically holomorphic extensions and expansion experiments
/// for the unimodal family x -> 1 - a|x|^d.
///
/// Exit codes: 0 success, 1 IO error, 2 configuration error, 3 numeric failure.
#[derive(Parser)]
#[command(name = "ahpl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parameter search and renormalization tower.
    Renorm(Overrides),
    /// Real bounds: scaling ratios, sums S_n, C^2 norms per level.
    Bounds(Overrides),
    /// Extension decay order and quasiregular height.
    Extend(Overrides),
    /// Escape-time field of the AHPL map (PPM and CSV).
    Julia(Overrides),
    /// Periodic points and the orbit expansion corpus.
    Expansion(Overrides),
    /// Certificate constants and the controlled-map conditions.
    Certify(Overrides),
    /// Equipotential nest, polynomial rays, shrinking and conjugacy evidence.
    Puzzle(Overrides),
    /// Every subcommand into one run directory.
    All(Overrides),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Threshold,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Quad,
}

/// Flags override the config file, which overrides the defaults.
#[derive(Args, Clone)]
struct Overrides {
    /// JSON config file; unknown keys are rejected.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root directory for run directories; overrides `output` without entering the snapshot.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; outputs do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Map family.
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    /// Parameter a of 1 - a|x|^d; wins over --combinatorics.
    #[arg(long)]
    a: Option<f64>,
    /// Repeating renormalization periods, comma separated.
    #[arg(long, value_delimiter = ',')]
    combinatorics: Option<Vec<u32>>,
    /// Critical order d (even).
    #[arg(long)]
    d: Option<u32>,
    /// Truncation order m of the extension.
    #[arg(long)]
    m: Option<usize>,
    /// Tower depth.
    #[arg(long)]
    depth: Option<usize>,
    /// Renormalization level of the AHPL map.
    #[arg(long)]
    level: Option<usize>,
    /// Level fitted by `extend`.
    #[arg(long)]
    extend_level: Option<usize>,
    /// Radius c_V of the disk V.
    #[arg(long)]
    c_v: Option<f64>,
    /// Grid resolution per side.
    #[arg(long)]
    resolution: Option<usize>,
    /// Escape iterations.
    #[arg(long)]
    max_iter: Option<u32>,
    /// Largest period searched.
    #[arg(long)]
    max_period: Option<u32>,
    /// Orbits in the expansion corpus.
    #[arg(long)]
    corpus: Option<usize>,
    /// Shrinking-diagnostic samples.
    #[arg(long)]
    shrink_samples: Option<usize>,
    /// Itinerary length for the conjugacy check.
    #[arg(long)]
    itinerary_length: Option<usize>,
    /// Certificate mode.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Control parameter alpha.
    #[arg(long)]
    alpha: Option<f64>,
    /// Control parameter delta.
    #[arg(long)]
    delta: Option<f64>,
    /// Control parameter theta.
    #[arg(long)]
    theta: Option<f64>,
    /// Control constant M.
    #[arg(long = "M")]
    big_m: Option<f64>,
    /// Control parameter n0.
    #[arg(long)]
    n0: Option<u32>,
    /// Smoothness r.
    #[arg(long)]
    r: Option<f64>,
    /// Taylor-remainder constant C0.
    #[arg(long)]
    c0: Option<f64>,
    /// Sample count for certificate measurements.
    #[arg(long)]
    samples: Option<usize>,
    /// RNG seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl Overrides {
    fn config(&self) -> LabResult<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(FamilyArg::Quad) = self.family {
            c.family = Family::Quad;
        }
        if let Some(a) = self.a {
            c.a = Some(a);
        }
        if let Some(v) = &self.combinatorics {
            c.combinatorics = Some(v.clone());
            if self.a.is_none() {
                c.a = None;
            }
        }
        macro_rules! set {
            ($($field:ident),*) => { $(if let Some(v) = self.$field { c.$field = v; })* };
        }
        set!(d, m, depth, level, extend_level, c_v, resolution, max_iter, max_period, corpus, shrink_samples);
        set!(itinerary_length, alpha, delta, theta, big_m, n0, r, c0, samples, seed);
        if self.depth.is_some() && self.level.is_none() {
            c.level = c.level.min(c.depth);
            c.extend_level = c.extend_level.min(c.depth);
        }
        if let Some(m) = self.mode {
            c.certify_mode = match m {
                ModeArg::Threshold => CertifyMode::Threshold,
                ModeArg::Full => CertifyMode::Full,
            };
        }
        c.validate()?;
        Ok(c)
    }
}

fn run(cli: Cli) -> LabResult<PathBuf> {
    let (name, o, job): (&str, &Overrides, fn(&Context, &mut RunDir) -> LabResult<()>) = match &cli.command {
        Command::Renorm(o) => ("renorm", o, experiments::renorm),
        Command::Bounds(o) => ("bounds", o, experiments::bounds),
        Command::Extend(o) => ("extend", o, experiments::extension),
        Command::Julia(o) => ("julia", o, experiments::julia),
        Command::Expansion(o) => ("expansion", o, experiments::expansion),
        Command::Certify(o) => ("certify", o, experiments::certify),
        Command::Puzzle(o) => ("puzzle", o, experiments::puzzle),
        Command::All(o) => ("all", o, experiments::all),
    };
    let cfg = o.config()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(o.threads.unwrap_or(0))
        .build()
        .map_err(|e| LabError::Config(e.to_string()))?;
    pool.install(|| {
        let ctx = Context::new(&cfg)?;
        let root = o.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output));
        let mut dir = RunDir::create(&root, name, &cfg)?;
        job(&ctx, &mut dir)?;
        dir.finish()
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
