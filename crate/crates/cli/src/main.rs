use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use kmcohort_core::{Error, KeyValueConfig, RunManifest};

mod commands;

/// Age-of-infection epidemic models: forward runs, reconstruction of the
/// daily reproduction number, stochastic batches and data preparation.
#[derive(Parser)]
#[command(name = "kmcohort", version, about)]
struct Cli {
    /// Flat `key = value` file; flags override its keys.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Where to write the run manifest (default: OUT/manifest.json).
    #[arg(long, global = true, value_name = "PATH")]
    manifest: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the forward model and write the trajectory.
    Forward(ForwardArgs),
    /// Reconstruct R0(a) from an incidence file, once per I0.
    Inverse(InverseArgs),
    /// Run a batch of the individual-based model.
    Ibm(IbmArgs),
    /// Turn reported cases into an initial count and an incidence flow.
    Dataprep(DataprepArgs),
    /// Rerun a command from its manifest.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct Common {
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ForwardArgs {
    /// `example1`, `example2`, or a kernel config file.
    #[arg(long)]
    kernel: Option<String>,
    /// Size of a single cohort at age 0.
    #[arg(long)]
    i0: Option<f64>,
    /// Extra cohorts as AGE:SIZE; replaces --i0.
    #[arg(long = "cohort", value_name = "AGE:SIZE")]
    cohorts: Vec<String>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Use the day-by-day model.
    #[arg(long)]
    discrete: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct InverseArgs {
    /// Incidence CSV (`date,daily`, `day,daily` or a trajectory file).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Initial number of infected; repeat for several reconstructions.
    #[arg(long)]
    i0: Vec<f64>,
    /// `discrete`, `continuous` or `auto` (from the file layout).
    #[arg(long)]
    mode: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct IbmArgs {
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    i0: Option<u64>,
    /// Susceptible population (default: the kernel's S0).
    #[arg(long)]
    s0: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Age-update tick in days.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Also write one CSV per run under OUT/runs.
    #[arg(long)]
    dump_runs: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct DataprepArgs {
    /// Cumulative or daily reported cases, or a cluster line list.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Exit rate in 1/days.
    #[arg(long)]
    nu: Option<f64>,
    /// Reporting fraction in (0, 1].
    #[arg(long)]
    fraction: Option<f64>,
    /// `step`, `gaussian:SIGMA` or `rolling-weekly`.
    #[arg(long)]
    regularize: Option<String>,
    /// Nodes per day for `step`.
    #[arg(long)]
    substeps: Option<usize>,
    /// Treat the input as a cluster line list and fold it onto day 0.
    #[arg(long)]
    align_cluster: bool,
    /// Incubation period in days.
    #[arg(long)]
    incubation: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ReplayArgs {
    /// Manifest written by an earlier run.
    manifest_file: PathBuf,
    /// Write to a different directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

fn set_opt<T: ToString>(cfg: &mut KeyValueConfig, key: &str, v: &Option<T>) {
    if let Some(v) = v {
        cfg.set(key, v.to_string());
    }
}

fn set_path(cfg: &mut KeyValueConfig, key: &str, v: &Option<PathBuf>) {
    if let Some(p) = v {
        cfg.set(key, p.display());
    }
}

fn join<T: ToString>(values: &[T]) -> String {
    values.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

/// Subcommand name and resolved settings.
fn resolve(cli: &Cli) -> Result<(String, KeyValueConfig)> {
    let mut s = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            KeyValueConfig::parse(&text)?
        }
        None => KeyValueConfig::new(),
    };
    let name = match &cli.command {
        Command::Forward(a) => {
            set_opt(&mut s, "kernel", &a.kernel);
            set_opt(&mut s, "i0", &a.i0);
            if !a.cohorts.is_empty() {
                s.set("cohorts", a.cohorts.join(","));
            }
            set_opt(&mut s, "dt", &a.dt);
            set_opt(&mut s, "horizon", &a.horizon);
            if a.discrete {
                s.set("discrete", true);
            }
            set_path(&mut s, "out", &a.common.out);
            "forward"
        }
        Command::Inverse(a) => {
            set_path(&mut s, "input", &a.input);
            if !a.i0.is_empty() {
                s.set("i0", join(&a.i0));
            }
            set_opt(&mut s, "mode", &a.mode);
            set_path(&mut s, "out", &a.common.out);
            "inverse"
        }
        Command::Ibm(a) => {
            set_opt(&mut s, "kernel", &a.kernel);
            set_opt(&mut s, "i0", &a.i0);
            set_opt(&mut s, "population", &a.s0);
            set_opt(&mut s, "runs", &a.runs);
            set_opt(&mut s, "seed", &a.seed);
            set_opt(&mut s, "dt", &a.dt);
            set_opt(&mut s, "horizon", &a.horizon);
            if a.dump_runs {
                s.set("dump_runs", true);
            }
            set_path(&mut s, "out", &a.common.out);
            "ibm"
        }
        Command::Dataprep(a) => {
            set_path(&mut s, "input", &a.input);
            set_opt(&mut s, "nu", &a.nu);
            set_opt(&mut s, "fraction", &a.fraction);
            set_opt(&mut s, "regularize", &a.regularize);
            set_opt(&mut s, "substeps", &a.substeps);
            if a.align_cluster {
                s.set("align_cluster", true);
            }
            set_opt(&mut s, "incubation", &a.incubation);
            set_path(&mut s, "out", &a.common.out);
            "dataprep"
        }
        Command::Replay(a) => {
            let file = std::fs::File::open(&a.manifest_file)
                .with_context(|| format!("opening manifest {}", a.manifest_file.display()))?;
            let manifest = RunManifest::read(file)?;
            let mut replayed = KeyValueConfig::new();
            for (k, v) in &manifest.config {
                replayed.set(k.clone(), v);
            }
            set_path(&mut replayed, "out", &a.out);
            return Ok((manifest.subcommand, replayed));
        }
    };
    commands::inline_kernel_file(&mut s)?;
    Ok((name.to_string(), s))
}

fn run(cli: &Cli) -> Result<()> {
    let clock = Instant::now();
    let (name, settings) = resolve(cli)?;
    let out_dir = PathBuf::from(settings.get("out").unwrap_or("."));
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let files = commands::execute(&name, &settings, &out_dir)?;
    let manifest = RunManifest {
        subcommand: name,
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: settings
            .keys()
            .map(|k| (k.to_string(), settings.get(k).unwrap_or_default().to_string()))
            .collect(),
        inputs: files.inputs,
        outputs: files.outputs,
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
    };
    let path = cli.manifest.clone().unwrap_or_else(|| out_dir.join("manifest.json"));
    let file = std::fs::File::create(&path)
        .with_context(|| format!("writing manifest {}", path.display()))?;
    kmcohort_core::io::write_json(file, &manifest)?;
    Ok(())
}

/// 2 for usage and validation errors, 3 for bad input data, 4 when the
/// numbers themselves fail.
fn exit_code(err: &anyhow::Error) -> u8 {
    let core = err.chain().find_map(|e| e.downcast_ref::<Error>());
    match core {
        Some(e) if e.is_numerical() => 4,
        Some(Error::Resource(_)) => 4,
        Some(Error::Usage(_) | Error::Config(_) | Error::Domain(_)) => 2,
        Some(_) => 3,
        None if err.chain().any(|e| e.is::<std::io::Error>()) => 3,
        None => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
