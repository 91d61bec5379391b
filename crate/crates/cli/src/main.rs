use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cuspcpm_cli::{cmd_converge, cmd_cp_check, cmd_eps_study, cmd_solve, cmd_surface_demo, Command, ExperimentConfig};

#[derive(Parser)]
#[command(name = "cuspcpm", version, about = "Closest point experiments on desingularized algebraic curves and surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Mesh refinement study against the spectral solution.
    Converge(Common),
    /// Spectral comparison of the regularized and singular problems as eps shrinks.
    EpsStudy(Common),
    /// Closest point diagnostics for both constructions.
    CpCheck(Common),
    /// One closest point run with state dump.
    Solve(Common),
    /// Reaction-diffusion on the desingularized surface of revolution in R^5.
    SurfaceDemo(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set h=0.1,0.05`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn execute(cmd: Command, common: &Common) -> cuspcpm::Result<String> {
    let cfg = ExperimentConfig::load(cmd, common.config.as_deref(), &common.set)?;
    let out = cfg.output.display().to_string();
    let detail = match cmd {
        Command::Converge => {
            let report = cmd_converge(&cfg)?;
            let failed = report.records.iter().filter(|r| r.reason != "ok").count();
            format!("{} cells, {failed} not ok", report.records.len())
        }
        Command::EpsStudy => {
            let reports = cmd_eps_study(&cfg)?;
            let slopes: Vec<String> = reports.iter().map(|r| format!("{:.3}", r.slope)).collect();
            format!("slopes {}", slopes.join(", "))
        }
        Command::CpCheck => {
            let summaries = cmd_cp_check(&cfg)?;
            let parts: Vec<String> =
                summaries.iter().map(|s| format!("{} pass {:.1}%", s.construction, 100.0 * s.pass_fraction)).collect();
            parts.join(", ")
        }
        Command::Solve => {
            let out = cmd_solve(&cfg)?;
            format!("{} steps of tau = {:e}", out.run.steps, out.run.tau)
        }
        Command::SurfaceDemo => {
            let r = cmd_surface_demo(&cfg)?;
            format!("{} active points ({:.3}% of the grid), symmetry residual {:e}", r.active_points, 100.0 * r.fraction(), r.symmetry_residual)
        }
    };
    Ok(format!("{}: {detail}; output in {out}", cmd.name()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, common) = match &cli.command {
        Sub::Converge(c) => (Command::Converge, c),
        Sub::EpsStudy(c) => (Command::EpsStudy, c),
        Sub::CpCheck(c) => (Command::CpCheck, c),
        Sub::Solve(c) => (Command::Solve, c),
        Sub::SurfaceDemo(c) => (Command::SurfaceDemo, c),
    };
    match execute(cmd, common) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("ERROR {} {msg}", e.code());
            ExitCode::FAILURE
        }
    }
}
