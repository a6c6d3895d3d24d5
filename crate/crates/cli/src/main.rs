use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kpp_cli::{dispatch, parse_config, CommandArgs, Experiment, Overrides};

#[derive(Parser)]
#[command(name = "kpplab", version, about = "Fisher-KPP fronts in alternating media")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration applied on top of the preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Preset to start from (ci or desk).
    #[arg(long, global = true)]
    preset: Option<String>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Level to trace; repeat for several.
    #[arg(long, global = true)]
    gamma: Vec<f64>,

    #[arg(long, global = true)]
    horizon: Option<f64>,

    #[arg(long, global = true)]
    dx: Option<f64>,

    #[arg(long, global = true)]
    dt: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Plain run with level traces and the final profile.
    Simulate,
    /// CSV of the growth rate.
    MediaPreview {
        /// Sample spacing.
        #[arg(long, default_value_t = 0.5)]
        step: f64,
        #[arg(long)]
        from: Option<f64>,
        #[arg(long)]
        to: Option<f64>,
    },
    /// Diverging-interface experiment with every bound checked.
    Theorem1,
    /// Probes ahead of the front in the slow blocks.
    LiminfProbe {
        /// Probe speed in units of sqrt(mu_minus).
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Sweeps the comparison bounds over one run.
    VerifyBounds,
    /// Homogeneous spreading-speed control.
    Speed,
    /// Interface widths with mu_plus below 2 mu_minus.
    Zlatos,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut args = CommandArgs::default();
    let experiment = match cli.command {
        Command::Simulate => Experiment::Simulate,
        Command::MediaPreview { step, from, to } => {
            args.step = Some(step);
            args.from = from;
            args.to = to;
            Experiment::MediaPreview
        }
        Command::Theorem1 => Experiment::Theorem1,
        Command::LiminfProbe { sigma } => {
            args.sigma = sigma;
            Experiment::LiminfProbe
        }
        Command::VerifyBounds => Experiment::VerifyBounds,
        Command::Speed => Experiment::Speed,
        Command::Zlatos => Experiment::Zlatos,
    };
    let common = cli.common;
    let overrides = Overrides {
        preset: common.preset,
        output_dir: common.out,
        gamma: common.gamma,
        horizon: common.horizon,
        dx: common.dx,
        dt: common.dt,
    };
    let outcome = parse_config(common.config.as_deref(), experiment, &overrides)
        .map_err(kpp_cli::CliError::from)
        .and_then(|run| dispatch(&run, &args));
    match outcome {
        Ok(done) => {
            let verdict = if done.passed { "PASS" } else { "FAIL" };
            println!("{verdict} {}", done.summary);
            for file in &done.files {
                println!("  wrote {}", file.display());
            }
            if done.passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("{verdict} {}", done.summary);
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
