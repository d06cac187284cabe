use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use cascade_toa::report::{Format, MetricsReport};
use cascade_toa::Method;
use cascade_toa_cli::{
    crlb_command, defaults, guard_failures, levels_command, load, locate_command, render_report, simulate_command, sweep_command, CliError,
    Overrides, PreviousFix,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Cascaded TOA localization with inaccurate anchors.
///
/// Configs are JSON files, or `builtin:nine-node` / `builtin:manet50`.
/// Unset values default to: comm_radius 500 m, sigma 5 m, delta 3 m, seed 0,
/// sweep sigmas [3, 5, 8, 10], 500 trials, eta 0.1, duration 20 s,
/// v_mean 20 m/s, v_n_max 5 m/s, dt 0.2 s, 60 particles × 300 iterations,
/// iChan 20 iterations with tolerance 1e-3.
///
/// Exit status: 0 success, 2 config error, 3 solver failure rate above 50%,
/// 1 anything else.
#[derive(Parser, Debug)]
#[command(name = "cascade-toa", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the localization level of every node as JSON.
    Levels(Common),
    /// Print each node's level and CRLB as JSON rows.
    Crlb {
        #[command(flatten)]
        common: Common,
        /// Also print the updated CRLB of every anchor the node uses.
        #[arg(long)]
        updated: bool,
    },
    /// Localize one node from a single seeded measurement draw.
    Locate {
        #[command(flatten)]
        common: Common,
        /// Node to localize [default: config `target`, else first node of the top level].
        #[arg(long)]
        target: Option<String>,
        #[arg(long, value_enum, default_value_t = MethodArg::TwoStep)]
        method: MethodArg,
        /// Previous estimate `X,Y`; required by `--method dynamic`.
        #[arg(long, allow_negative_numbers = true)]
        prev: Option<PreviousFix>,
    },
    /// Static Monte-Carlo sweep over sigma.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        output: Output,
        /// Node scored by the sweep [default: config `target`, else first node of the top level].
        #[arg(long)]
        target: Option<String>,
    },
    /// Mobile-network simulation (needs a `generator` block).
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Config file or `builtin:<name>`.
    #[arg(long, visible_alias = "scenario")]
    config: String,
    /// Ranging noise std (m); for `sweep` it replaces the sigma list.
    #[arg(long, allow_negative_numbers = true)]
    sigma: Option<f64>,
    /// Base-anchor position noise std (m).
    #[arg(long, allow_negative_numbers = true)]
    delta: Option<f64>,
    /// Motion penalty weight.
    #[arg(long, allow_negative_numbers = true)]
    eta: Option<f64>,
    /// Root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Trials per sweep cell, or independent runs for `simulate`.
    #[arg(long)]
    trials: Option<usize>,
    /// Swarm size.
    #[arg(long)]
    particles: Option<usize>,
    /// Swarm iterations.
    #[arg(long)]
    iterations: Option<usize>,
    /// iChan iteration cap.
    #[arg(long)]
    ichan_max_iter: Option<usize>,
    /// iChan convergence tolerance (m).
    #[arg(long)]
    ichan_eps: Option<f64>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            sigma: self.sigma,
            delta: self.delta,
            eta: self.eta,
            seed: self.seed,
            trials: self.trials,
            particles: self.particles,
            iterations: self.iterations,
            ichan_max_iter: self.ichan_max_iter,
            ichan_eps: self.ichan_eps,
        }
    }
}

#[derive(Args, Debug)]
struct Output {
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    TwoStep,
    Dynamic,
    Pso,
    Lls,
    Cwlls,
    Ichan,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::TwoStep => Method::TwoStepStatic,
            MethodArg::Dynamic => Method::TwoStepDynamic,
            MethodArg::Pso => Method::DirectPso,
            MethodArg::Lls => Method::Lls,
            MethodArg::Cwlls => Method::Cwlls,
            MethodArg::Ichan => Method::Ichan,
        }
    }
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

fn print(text: Option<String>) {
    if let Some(text) = text {
        let _ = std::io::stdout().write_all(text.as_bytes());
    }
}

/// The report goes out before the failure guard so a run that trips it still
/// leaves its numbers behind.
fn report(report: &MetricsReport, output: &Output) -> Result<(), CliError> {
    print(render_report(report, output.format.into(), output.out.as_deref())?);
    guard_failures(report, defaults::MAX_FAILURE_RATE)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Levels(common) => print(Some(levels_command(&load(&common.config, &common.overrides())?))),
        Command::Crlb { common, updated } => print(Some(crlb_command(&load(&common.config, &common.overrides())?, updated)?)),
        Command::Locate { common, target, method, prev } => {
            let config = load(&common.config, &common.overrides())?;
            print(Some(locate_command(&config, target.as_deref(), method.into(), prev)?));
        }
        Command::Sweep { common, output, target } => {
            let config = load(&common.config, &common.overrides())?;
            report(&sweep_command(&config, target.as_deref())?, &output)?;
        }
        Command::Simulate { common, output } => {
            let config = load(&common.config, &common.overrides())?;
            report(&simulate_command(&config)?, &output)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
