//! `chshear`: runs scenarios, sweeps and linear studies from TOML configs.
//!
//! Exit status: 0 on success (a blow-up is a valid outcome), 1 for bad
//! input or configuration, 2 when a run fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chshear::config::RunConfig;
use chshear::experiments::{self, ThresholdInputs, ThresholdReport};
use chshear::Error;
use clap::{Args, Parser, Subcommand};
use log::info;

#[derive(Parser, Debug)]
#[command(name = "chshear", version, about = "Cahn–Hilliard with shear: simulation and analysis")]
struct Cli {
    /// Run configuration (TOML); a path given to the subcommand wins.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "CHSHEAR_OUT_DIR", default_value = "chshear-out")]
    out_dir: PathBuf,
    /// Overrides the seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps and scaling studies (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Only print warnings and errors.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate one scenario; writes diagnostics.csv and status.json.
    Run(ConfigArg),
    /// Run every (a, A) cell of the [sweep] section; writes map.csv.
    Sweep(ConfigArg),
    /// Enhanced-dissipation scaling study of the [semigroup] section.
    Semigroup(ConfigArg),
    /// H⁻¹ mixing study of the [mixing] section.
    Mixing(ConfigArg),
    /// Evaluate the smallness conditions.
    Thresholds(ThresholdArgs),
    /// Check a config and print "ok".
    Validate(ConfigArg),
    /// Print the version.
    Version,
}

#[derive(Args, Debug)]
struct ConfigArg {
    path: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ThresholdArgs {
    /// Take ε, a, b and the initial norms from this run config.
    path: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<f64>,
    /// ‖u_∦(0)‖ in L².
    #[arg(long)]
    fluct0: Option<f64>,
    /// ‖∫u₀ dx‖ in L²_y.
    #[arg(long)]
    mean0: Option<f64>,
    #[arg(long)]
    b1: Option<f64>,
    #[arg(long)]
    b2: Option<f64>,
    #[arg(long)]
    b3: Option<f64>,
    #[arg(long)]
    l: Option<f64>,
    #[arg(long = "l-prime")]
    l_prime: Option<f64>,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 1 } else { 2 })
        }
    }
}

fn load(cli: &Cli, arg: &Option<PathBuf>) -> chshear::Result<RunConfig> {
    let path = arg
        .as_ref()
        .or(cli.config.as_ref())
        .ok_or_else(|| Error::Config("no config given (pass a path or --config)".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn dispatch(cli: &Cli) -> chshear::Result<()> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("--jobs: {e}")))?;
    }
    let out = cli.out_dir.as_path();
    match &cli.command {
        Command::Run(arg) => {
            let cfg = load(cli, &arg.path)?;
            let res = experiments::run_scenario(&cfg, out)?;
            let s = &res.status;
            println!(
                "{} t={} steps={} rejected={} final_l2={:e}",
                s.status, s.t_final, s.accepted_steps, s.rejected_steps, s.final_l2
            );
            if let Some(f) = &s.tail_fit {
                println!("tail_fit rate={:e} r2={:.6}", f.rate, f.r_squared);
            }
            if let Some(b) = &res.bootstrap {
                println!(
                    "bootstrap lambda={:e} max_ratio1={:.4} max_ratio2={:.4} assumptions={} improved={}",
                    b.lambda_gamma,
                    b.max_ratio1,
                    b.max_ratio2,
                    b.assumptions_hold(),
                    b.improved_hold()
                );
            }
            report_outputs(out);
        }
        Command::Sweep(arg) => {
            let cfg = load(cli, &arg.path)?;
            let cells = experiments::sweep(&cfg, out, cli.jobs)?;
            println!("{}", experiments::SWEEP_HEADER);
            for c in &cells {
                println!("{}", c.csv_line());
            }
            report_outputs(out);
        }
        Command::Semigroup(arg) => {
            let cfg = load(cli, &arg.path)?;
            for r in experiments::run_semigroup(&cfg, out)? {
                println!(
                    "{}: exponent {:.4} (r2 {:.4}), predicted {:.4}",
                    r.shear, r.slope, r.slope_r2, r.predicted_exponent
                );
            }
            report_outputs(out);
        }
        Command::Mixing(arg) => {
            let cfg = load(cli, &arg.path)?;
            for r in experiments::run_mixing(&cfg, out)? {
                println!("{}: q {:.4} (r2 {:.4})", r.shear, r.fit.rate, r.fit.r_squared);
            }
            report_outputs(out);
        }
        Command::Thresholds(args) => {
            let report = experiments::threshold_report(&threshold_inputs(cli, args)?)?;
            if args.json {
                println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
            } else {
                print_thresholds(&report);
            }
        }
        Command::Validate(arg) => {
            load(cli, &arg.path)?;
            println!("ok");
        }
        Command::Version => println!("chshear {}", env!("CARGO_PKG_VERSION")),
    }
    Ok(())
}

fn threshold_inputs(cli: &Cli, args: &ThresholdArgs) -> chshear::Result<ThresholdInputs> {
    let from_config = args.path.is_some() || cli.config.is_some();
    let mut inp = if from_config {
        experiments::threshold_inputs_for(&load(cli, &args.path)?)?
    } else {
        ThresholdInputs::default()
    };
    let set = |slot: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    set(&mut inp.epsilon, args.epsilon);
    set(&mut inp.a, args.a);
    set(&mut inp.b, args.b);
    set(&mut inp.fluct0, args.fluct0);
    set(&mut inp.mean0, args.mean0);
    set(&mut inp.b1, args.b1);
    set(&mut inp.b2, args.b2);
    set(&mut inp.b3, args.b3);
    set(&mut inp.l, args.l);
    set(&mut inp.l_prime, args.l_prime);
    Ok(inp)
}

fn print_thresholds(r: &ThresholdReport) {
    println!("K = {:e}", r.k_bound);
    println!("|a| bound (20211018eq01) = {:e}", r.a_bound_eq1018);
    println!("|a| bound (20211026eq100) = {:e}", r.a_bound_eq100);
    for c in &r.conditions {
        println!(
            "{}: {:e} <= {:e} {} (margin {:e})",
            c.equation,
            c.lhs,
            c.rhs,
            if c.holds { "holds" } else { "FAILS" },
            c.margin
        );
    }
    println!("note: {}", r.note);
}

fn report_outputs(out: &Path) {
    info!("outputs in {}", out.display());
}
