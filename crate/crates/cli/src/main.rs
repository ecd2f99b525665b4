use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use freqscope::classifier::{default_lambda_grid, TransformTag};
use freqscope::commands::{self, CacheAction, ReducedOptions, RunReport, ScheduleOptions, SpectrumOptions, Subset};
use freqscope::diffusion::{DEFAULT_BETA_END, DEFAULT_BETA_START, DEFAULT_HYBRID_LAMBDA, DEFAULT_T};
use freqscope::io::HeatmapOptions;
use freqscope::manifest::{load_manifest, ArtifactCache, DatasetManifest};
use freqscope::perturb::{ApplyProbabilities, PerturbConfig};

/// Frequency-domain analysis of real and generated images.
///
/// Every global flag can also be set through a `FREQSCOPE_*` environment
/// variable; an explicit flag wins over the environment, which wins over
/// the built-in default.
#[derive(Parser, Debug)]
#[command(name = "freqscope", version)]
struct Cli {
    /// Dataset manifest (JSON).
    #[arg(long, global = true, env = "FREQSCOPE_MANIFEST")]
    manifest: Option<PathBuf>,

    /// Overrides the manifest seed; also seeds `perturb`.
    #[arg(long, global = true, env = "FREQSCOPE_SEED")]
    seed: Option<u64>,

    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "FREQSCOPE_JOBS", default_value_t = 0)]
    jobs: usize,

    /// Per-image spectrum cache.
    #[arg(long, global = true, env = "FREQSCOPE_CACHE_DIR")]
    cache_dir: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, env = "FREQSCOPE_OUT", default_value = ".")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Mean DFT spectrum of one class, with heatmap.
    Spectrum(SpectrumArgs),
    /// Reduced spectra of two classes and their spectral density error.
    Reduced(ReducedArgs),
    /// AUROC and Pd@5%/Pd@1% for score files.
    EvalScores {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Logistic regression on pixel and frequency features.
    Logreg(LogregArgs),
    /// Apply the perturbation battery to every manifest image.
    Perturb(PerturbArgs),
    /// Noise schedule and loss-weight table.
    Schedule(ScheduleArgs),
    /// MMD between pairs of feature files.
    Mmd {
        /// Two feature files; repeat for more pairs.
        #[arg(long = "pair", num_args = 2, value_names = ["A", "B"], required = true)]
        pairs: Vec<PathBuf>,
    },
    /// Per-timestep MSE statistics from a directory of `t=<int>.bin` files.
    Mse { dir: PathBuf },
    /// Inspect or maintain the cache.
    Cache {
        #[arg(value_enum)]
        action: CacheCmd,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum CacheCmd {
    Stats,
    Verify,
    Clear,
}

#[derive(Args, Debug)]
struct CorpusArgs {
    /// Which split partition to read.
    #[arg(long, default_value = "all")]
    subset: Subset,
    /// Center crop before the transform.
    #[arg(long)]
    crop: Option<usize>,
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    #[arg(long)]
    label: String,
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Median high-pass kernel.
    #[arg(long, default_value_t = 3)]
    highpass: usize,
    /// Skip the median high-pass.
    #[arg(long)]
    no_highpass: bool,
    /// Average power instead of magnitude.
    #[arg(long)]
    power: bool,
    /// Linear rather than log10 heatmap scale.
    #[arg(long)]
    linear: bool,
    #[arg(long, default_value_t = 1e-5)]
    vmin: f64,
    #[arg(long, default_value_t = 1e-1)]
    vmax: f64,
    /// Do not divide values by H*W before mapping.
    #[arg(long)]
    raw_scale: bool,
}

#[derive(Args, Debug)]
struct ReducedArgs {
    #[arg(long, default_value = "real")]
    real: String,
    #[arg(long)]
    fake: String,
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Median high-pass kernel (off by default).
    #[arg(long)]
    highpass: Option<usize>,
}

#[derive(Args, Debug)]
struct LogregArgs {
    #[arg(long, value_delimiter = ',', default_value = "pixel,dft,log_dft,dct,log_dct")]
    transforms: Vec<TransformTag>,
    /// Regularization values (default 1e-4 ... 1e4).
    #[arg(long, value_delimiter = ',')]
    lambda_grid: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct PerturbArgs {
    /// PerturbConfig JSON; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Probability applied to every perturbation.
    #[arg(long)]
    probability: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    blur_kernels: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', num_args = 1, value_name = "LO,HI")]
    crop_range: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', num_args = 1, value_name = "LO,HI")]
    jpeg_range: Option<Vec<u8>>,
    #[arg(long, value_delimiter = ',', num_args = 1, value_name = "LO,HI")]
    noise_range: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct ScheduleArgs {
    #[arg(long, default_value_t = DEFAULT_T)]
    steps: usize,
    #[arg(long, default_value_t = DEFAULT_BETA_START)]
    beta_start: f64,
    #[arg(long, default_value_t = DEFAULT_BETA_END)]
    beta_end: f64,
    /// Weight of the VLB term in the hybrid loss.
    #[arg(long, default_value_t = DEFAULT_HYBRID_LAMBDA)]
    lambda: f64,
}

fn pair<T: Copy>(v: &[T], flag: &str) -> anyhow::Result<(T, T)> {
    match v {
        [a, b] => Ok((*a, *b)),
        _ => bail!("--{flag} takes exactly two comma-separated values"),
    }
}

struct Globals {
    manifest: Option<PathBuf>,
    seed: Option<u64>,
    cache: Option<ArtifactCache>,
}

impl Globals {
    fn manifest(&self) -> anyhow::Result<DatasetManifest> {
        let Some(path) = &self.manifest else {
            bail!("this command needs --manifest (or FREQSCOPE_MANIFEST)");
        };
        let mut m = load_manifest(path).with_context(|| format!("loading {}", path.display()))?;
        if let Some(seed) = self.seed {
            m.seed = seed;
        }
        Ok(m)
    }
}

fn perturb_config(args: &PerturbArgs, seed: u64) -> anyhow::Result<PerturbConfig> {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => PerturbConfig::default(),
    };
    cfg.seed = seed;
    if let Some(p) = args.probability {
        cfg.apply_probability = ApplyProbabilities::uniform(p);
    }
    if let Some(k) = &args.blur_kernels {
        cfg.blur_kernels = k.clone();
    }
    if let Some(r) = &args.crop_range {
        cfg.crop_factor_range = pair(r, "crop-range")?;
    }
    if let Some(r) = &args.jpeg_range {
        cfg.jpeg_quality_range = pair(r, "jpeg-range")?;
    }
    if let Some(r) = &args.noise_range {
        cfg.noise_variance_range = pair(r, "noise-range")?;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> anyhow::Result<RunReport> {
    let cache = cli.cache_dir.as_ref().map(ArtifactCache::open).transpose()?;
    let ctx = Globals {
        manifest: cli.manifest.clone(),
        seed: cli.seed,
        cache,
    };
    let out = cli.out.as_path();
    let report = match &cli.command {
        Command::Spectrum(a) => {
            let m = ctx.manifest()?;
            let opts = SpectrumOptions {
                label: a.label.clone(),
                subset: a.corpus.subset,
                crop: a.corpus.crop,
                highpass_kernel: (!a.no_highpass).then_some(a.highpass),
                power: a.power,
                heatmap: HeatmapOptions {
                    log: !a.linear,
                    vmin: a.vmin,
                    vmax: a.vmax,
                    normalize_by_size: !a.raw_scale,
                },
            };
            commands::cmd_spectrum(&m, &opts, out, ctx.cache.as_ref())?
        }
        Command::Reduced(a) => {
            let m = ctx.manifest()?;
            let mut opts = ReducedOptions::new(&a.real, &a.fake);
            opts.subset = a.corpus.subset;
            opts.crop = a.corpus.crop;
            opts.highpass_kernel = a.highpass;
            commands::cmd_reduced(&m, &opts, out, ctx.cache.as_ref())?
        }
        Command::EvalScores { files } => commands::cmd_eval_scores(files, out)?,
        Command::Logreg(a) => {
            let m = ctx.manifest()?;
            let grid = a.lambda_grid.clone().unwrap_or_else(default_lambda_grid);
            commands::cmd_logreg(&m, &a.transforms, &grid, out)?
        }
        Command::Perturb(a) => {
            let m = ctx.manifest()?;
            commands::cmd_perturb(&m, &perturb_config(a, m.seed)?, out)?
        }
        Command::Schedule(a) => {
            let opts = ScheduleOptions {
                steps: a.steps,
                beta_start: a.beta_start,
                beta_end: a.beta_end,
                lambda: a.lambda,
            };
            commands::cmd_schedule(&opts, out)?
        }
        Command::Mmd { pairs } => {
            let pairs: Vec<(PathBuf, PathBuf)> = pairs.chunks(2).map(|c| (c[0].clone(), c[1].clone())).collect();
            commands::cmd_mmd(&pairs, out)?
        }
        Command::Mse { dir } => commands::cmd_mse(dir, out)?,
        Command::Cache { action } => {
            let Some(cache) = &ctx.cache else {
                bail!("cache commands need --cache-dir (or FREQSCOPE_CACHE_DIR)");
            };
            let action = match action {
                CacheCmd::Stats => CacheAction::Stats,
                CacheCmd::Verify => CacheAction::Verify,
                CacheCmd::Clear => CacheAction::Clear,
            };
            commands::cmd_cache(cache, action)?
        }
    };
    Ok(report)
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Spectrum(_) => "spectrum",
        Command::Reduced(_) => "reduced",
        Command::EvalScores { .. } => "eval-scores",
        Command::Logreg(_) => "logreg",
        Command::Perturb(_) => "perturb",
        Command::Schedule(_) => "schedule",
        Command::Mmd { .. } => "mmd",
        Command::Mse { .. } => "mse",
        Command::Cache { .. } => "cache",
    }
}

fn write_report(out: &Path, name: &str, json: &str) {
    let path = out.join(format!("{name}_report.json"));
    if let Err(e) = freqscope::io::write_atomic(&path, json.as_bytes()) {
        log::warn!("could not write {}: {e}", path.display());
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
        eprintln!("error: thread pool: {e}");
        return ExitCode::FAILURE;
    }
    let name = command_name(&cli.command);
    match run(&cli) {
        Ok(report) => {
            let json = report.to_json();
            write_report(&cli.out, name, &json);
            println!("{json}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let json = serde_json::to_string_pretty(&serde_json::json!({
                "command": name,
                "error": format!("{e:#}"),
            }))
            .expect("report serializes");
            write_report(&cli.out, name, &json);
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
