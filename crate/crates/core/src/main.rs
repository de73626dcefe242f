use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use panosynth::config::PipelineConfig;
use panosynth::geometry::BeamMode;
use panosynth::image::Image;
use panosynth::metrics::{MetricError, MetricReport};
use panosynth::phantom::{generate, PhantomError, PhantomSpec};
use panosynth::pipeline::{run_pipeline, PipelineError};
use panosynth::volume::write_volume;

#[derive(Parser)]
#[command(name = "panosynth", version, about = "Synthesize panoramic dental radiographs from CBCT volumes")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a panorama from a PVOL1 volume.
    Synthesize(SynthesizeArgs),
    /// Write a synthetic head phantom and its ground truth.
    Phantom(PhantomArgs),
    /// Compare two PGM images (SSIM and PSNR).
    Compare { a: PathBuf, b: PathBuf },
}

#[derive(Args)]
struct SynthesizeArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Panorama PGM path; the provenance sidecar goes to `<output>.txt`.
    #[arg(long)]
    output: Option<PathBuf>,
    /// key=value config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    sweep_deg: Option<f64>,
    #[arg(long)]
    shift_min: Option<f64>,
    #[arg(long)]
    shift_max: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Beam sample spacing, voxels.
    #[arg(long)]
    delta: Option<f64>,
    /// Trough thickness at the incisors, mm.
    #[arg(long)]
    trough_incisor: Option<f64>,
    /// Trough thickness at the molars, mm.
    #[arg(long)]
    trough_molar: Option<f64>,
    #[arg(long, value_parser = clap::value_parser!(BeamMode))]
    beam_mode: Option<BeamMode>,
    #[arg(long)]
    no_tilt_correct: bool,
    #[arg(long)]
    bits: Option<u8>,
    #[arg(long)]
    png: bool,
    #[arg(long)]
    debug_dir: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct PhantomArgs {
    /// Volume path; truth goes to `<output>.truth.txt` unless --truth is given.
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Grid size per axis; the field of view stays 128 mm.
    #[arg(long, default_value_t = 256)]
    size: usize,
    #[arg(long, default_value_t = 16)]
    teeth: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    tilt: f64,
    /// Comma-separated missing tooth indices; default 3,12 where they exist.
    #[arg(long, value_delimiter = ',')]
    missing: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    implants: Vec<usize>,
    /// Relative crown size variation; 0 gives a mirror-symmetric jaw.
    #[arg(long)]
    jitter: Option<f64>,
}

/// Failure with its exit status.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn usage(error: impl Into<anyhow::Error>) -> Self {
        Self { code: 2, error: error.into() }
    }

    fn stage(error: impl Into<anyhow::Error>) -> Self {
        Self { code: 1, error: error.into() }
    }
}

fn pipeline_failure(e: PipelineError) -> Failure {
    if e.is_validation() {
        Failure::usage(e)
    } else {
        Failure::stage(e)
    }
}

fn synthesize(args: SynthesizeArgs) -> std::result::Result<(), Failure> {
    let mut cfg = match &args.config {
        Some(p) => PipelineConfig::load(p).map_err(Failure::usage)?,
        None => PipelineConfig::default(),
    };
    macro_rules! over {
        ($field:ident, $value:expr) => {
            if let Some(v) = $value {
                cfg.$field = v;
            }
        };
    }
    over!(sweep_deg, args.sweep_deg);
    over!(shift_min_deg, args.shift_min);
    over!(shift_max_deg, args.shift_max);
    over!(beta, args.beta);
    over!(delta, args.delta);
    over!(trough_incisor_mm, args.trough_incisor);
    over!(trough_molar_mm, args.trough_molar);
    over!(beam_mode, args.beam_mode);
    over!(bits, args.bits);
    if args.input.is_some() {
        cfg.input = args.input;
    }
    if args.output.is_some() {
        cfg.output = args.output;
    }
    if args.debug_dir.is_some() {
        cfg.debug_dir = args.debug_dir;
    }
    if args.threads.is_some() {
        cfg.threads = args.threads;
    }
    if args.no_tilt_correct {
        cfg.tilt_correct = false;
    }
    if args.png {
        cfg.png = true;
    }
    cfg.validate().map_err(Failure::usage)?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("building worker pool").map_err(Failure::stage)?;
    let synthesis = pool.install(|| run_pipeline(&cfg)).map_err(pipeline_failure)?;
    let img = &synthesis.panorama.image;
    println!("output={}", cfg.output.as_ref().map(|p| p.display().to_string()).unwrap_or_default());
    println!("width={}", img.width);
    println!("height={}", img.height);
    println!("tilt_deg={:?}", synthesis.tilt.estimate.degrees);
    Ok(())
}

fn phantom(args: PhantomArgs) -> std::result::Result<(), Failure> {
    let mut spec = PhantomSpec::standard(args.size);
    spec.tooth_count = args.teeth;
    spec.tilt_deg = args.tilt;
    spec.missing_teeth = match args.missing {
        Some(list) => list.into_iter().collect(),
        None => spec.missing_teeth.into_iter().filter(|&i| i < args.teeth).collect(),
    };
    spec.implant_teeth = args.implants.into_iter().collect();
    if let Some(j) = args.jitter {
        spec.size_jitter = j;
    }
    let (volume, truth) = generate(&spec, args.seed).map_err(|e| match e {
        PhantomError::Volume(_) => Failure::stage(e),
        _ => Failure::usage(e),
    })?;
    write_volume(&volume, &args.output)
        .with_context(|| format!("writing {}", args.output.display()))
        .map_err(Failure::stage)?;
    let truth_path = args.truth.unwrap_or_else(|| {
        let mut s = args.output.clone().into_os_string();
        s.push(".truth.txt");
        s.into()
    });
    std::fs::write(&truth_path, truth.to_text())
        .with_context(|| format!("writing {}", truth_path.display()))
        .map_err(Failure::stage)?;
    println!("volume={}", args.output.display());
    println!("truth={}", truth_path.display());
    Ok(())
}

fn compare(a: PathBuf, b: PathBuf) -> std::result::Result<(), Failure> {
    let read = |p: &PathBuf| {
        Image::read_pgm(p)
            .with_context(|| format!("reading {}", p.display()))
            .map_err(Failure::stage)
    };
    let (ia, ib) = (read(&a)?, read(&b)?);
    let report = MetricReport::compare(&ia, &ib).map_err(|e| match e {
        MetricError::DimMismatch { .. } => Failure::usage(e),
        _ => Failure::stage(e),
    })?;
    println!("{report}");
    Ok(())
}

fn run(cli: Cli) -> std::result::Result<(), Failure> {
    match cli.command {
        Command::Synthesize(args) => synthesize(args),
        Command::Phantom(args) => phantom(args),
        Command::Compare { a, b } => compare(a, b),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, error }) => {
            // causes whose text already appears in the message are skipped
            let mut msg = error.to_string();
            for cause in error.chain().skip(1) {
                let c = cause.to_string();
                if !msg.contains(&c) {
                    msg = format!("{msg}: {c}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
