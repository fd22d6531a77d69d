use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use wfh::adaptive::QuadraturePlan;
use wfh::baselines::Baseline;
use wfh::experiment::{self, SweepConfig};
use wfh::information::{planned_information, ratio_and_gain, Detector, DetectorKind};
use wfh::modulation::{ModulationScheme, Shape};
use wfh::numeric::log_space;
use wfh::optimizer::{optimize_z, OptimizerSettings};
use wfh::pnr::PnrResolution;
use wfh::{Error, Result};

/// Information rates of weak-field homodyne receivers.
#[derive(Debug, Parser)]
#[command(name = "wfh", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the baseline capacities over a log grid of n_S.
    Capacity {
        #[arg(long, default_value_t = 1e-3)]
        min: f64,
        #[arg(long, default_value_t = 1e2)]
        max: f64,
        #[arg(long, default_value_t = 16)]
        points: usize,
    },
    /// Evaluate one receiver at one energy; prints JSON.
    Point(PointArgs),
    /// Run a configured sweep and write the results CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output` from the config file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print crossovers, maximal gains and ratios of a results CSV.
    Summary {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Split results CSVs into per-figure files.
    Figures {
        #[arg(long = "in", required = true)]
        input: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct PointArgs {
    #[arg(long)]
    detector: DetectorKind,
    #[arg(long = "M")]
    m: u32,
    #[arg(long = "nS")]
    n_s: f64,
    /// LO amplitude.
    #[arg(long, conflicts_with = "optimize_z", required_unless_present = "optimize_z")]
    z: Option<f64>,
    #[arg(long)]
    optimize_z: bool,
    /// Gamma shape of a single-quadrature prior (1/2 is Gaussian).
    #[arg(long, conflicts_with = "bpsk")]
    nu: Option<f64>,
    #[arg(long)]
    bpsk: bool,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Domain(_) | Error::Config(_) => 1,
        Error::Numeric { .. } | Error::Bracket { .. } => 2,
        Error::Io { .. } | Error::Csv(_) => 3,
    }
}

fn capacity(min: f64, max: f64, points: usize) -> Result<()> {
    experiment::Grid { min, max, points }.validate()?;
    let baselines = [Baseline::Sh, Baseline::Dh, Baseline::Holevo, Baseline::Dd];
    print!("{:>14}", "n_S");
    for b in baselines {
        print!(" {:>14}", b.label());
    }
    println!();
    for n in log_space(min, max, points) {
        print!("{n:>14.6e}");
        for b in baselines {
            print!(" {:>14.9}", b.capacity(n)?);
        }
        println!();
    }
    Ok(())
}

fn point(args: &PointArgs) -> Result<()> {
    let res = PnrResolution::new(args.m)?;
    let scheme = match (args.detector.is_bivariate(), args.nu, args.bpsk) {
        (true, None, false) => ModulationScheme::gaussian_bi(args.n_s)?,
        (true, ..) => {
            return Err(Error::Config(
                "dw takes a two-quadrature Gaussian prior; drop --nu/--bpsk".into(),
            ))
        }
        (false, _, true) => ModulationScheme::bpsk(args.n_s)?,
        (false, Some(nu), false) => ModulationScheme::single_quadrature(args.n_s, Shape::Finite(nu))?,
        (false, None, false) => ModulationScheme::gaussian_uni(args.n_s)?,
    };
    let plan = QuadraturePlan::default();
    let (z, bits, nodes) = match args.z {
        Some(z) => {
            let detector = Detector::new(args.detector, res, z)?;
            let (bits, nodes) = planned_information(&detector, &scheme, &plan)?;
            (z, bits, nodes)
        }
        None => {
            let opt = optimize_z(args.detector, res, &scheme, &plan, &OptimizerSettings::default())?;
            (opt.z_opt, opt.bits, opt.nodes)
        }
    };
    let mut out = json!({
        "detector": args.detector.label(),
        "M": args.m,
        "n_S": args.n_s,
        "modulation": scheme.kind().label(),
        "nu": scheme.shape().map(|s| s.to_string()),
        "z": z,
        "optimized": args.z.is_none(),
        "bits_per_use": bits,
        "node_count": nodes,
    });
    if args.n_s > 0.0 {
        let (ratio, gain) = ratio_and_gain(bits, args.n_s, args.detector.shannon_baseline())?;
        out["pie"] = json!(bits / args.n_s);
        out["ratio"] = json!(ratio);
        out["gain"] = json!(gain);
    }
    println!("{}", serde_json::to_string_pretty(&out).expect("JSON value"));
    Ok(())
}

fn sweep(config: &PathBuf, out: Option<&PathBuf>) -> Result<()> {
    let cfg = SweepConfig::from_file(config)?;
    let path = out
        .or(cfg.output.as_ref())
        .ok_or_else(|| Error::Config("no output path: pass --out or set [sweep] output".into()))?
        .clone();
    let rows = experiment::run_experiment(&cfg)?;
    experiment::write_csv(&rows, &path)?;
    eprintln!("wrote {} rows to {}", rows.len(), path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Capacity { min, max, points } => capacity(min, max, points),
        Command::Point(args) => point(&args),
        Command::Sweep { config, out } => sweep(&config, out.as_ref()),
        Command::Summary { input } => {
            let rows = experiment::read_csv(&input)?;
            print!("{}", experiment::summarize(&rows));
            Ok(())
        }
        Command::Figures { input, out } => {
            let mut rows = Vec::new();
            for path in &input {
                rows.extend(experiment::read_csv(path)?);
            }
            for path in experiment::write_figures(&rows, &out)? {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
