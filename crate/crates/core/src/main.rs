use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use structured_lqr::experiments::{exit_code, resolve_scenario, run_batch, write_outputs, Mode, Overrides, RunOutput};
use structured_lqr::Error;

#[derive(Parser)]
#[command(name = "structured-lqr", version, about = "Structured LQR synthesis, model-based and from data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a structured gain from simulated exploration data.
    Srl(RunArgs),
    /// Masked Kleinman iteration with the full model.
    ModelBased(RunArgs),
    /// Learned vs model-based vs unstructured.
    Compare(RunArgs),
    /// Structured-vs-unstructured cost bound.
    Bound(RunArgs),
    /// Closed loop under the scenario's initial gain.
    Simulate(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file or built-in name (paper-a, paper-b, paper-b-printed). Repeatable.
    #[arg(long, required = true)]
    scenario: Vec<String>,
    /// Output directory; one subdirectory per scenario when several are given.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Stopping threshold on |P_k - P_{k-1}|_F.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Run scenarios on separate threads.
    #[arg(long)]
    parallel: bool,
}

fn summary(out: &RunOutput) -> String {
    let r = &out.report;
    let mut line = format!(
        "{} [{}]: iterations {}, J = {:.6} (quadrature {:.6}), abscissa {:.4}",
        r.scenario,
        r.mode.as_str(),
        r.iterations,
        r.cost.analytic,
        r.cost.quadrature,
        r.spectral_abscissa
    );
    if let Some(mb) = &r.vs_model_based {
        line += &format!(", |K - K_mb|_F = {:.3e}", mb.k_frobenius);
    }
    if let Some(b) = &r.bound {
        line += &format!(", gap {:.4} <= bound {:.4}: {}", b.gap, b.bound, b.within_bound);
    }
    line
}

fn execute(mode: Mode, args: RunArgs) -> Result<i32, Error> {
    let overrides = Overrides {
        seed: args.seed,
        tol: args.tol,
        max_iter: args.max_iter,
    };
    let mut specs = Vec::new();
    for name in &args.scenario {
        let mut spec = resolve_scenario(name)?;
        overrides.apply(&mut spec)?;
        specs.push(spec);
    }
    let several = specs.len() > 1;
    let mut status = 0;
    for (spec, result) in specs.iter().zip(run_batch(&specs, mode, args.parallel)) {
        match result {
            Ok(out) => {
                println!("{}", summary(&out));
                if let Some(dir) = &args.out {
                    let dir = if several { dir.join(&spec.name) } else { dir.clone() };
                    write_outputs(&dir, &out)?;
                }
            }
            Err(e) => {
                eprintln!("{}: {e}", spec.name);
                if status == 0 {
                    status = exit_code(&e);
                }
            }
        }
    }
    Ok(status)
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors; 2 is reserved for rank failures here
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let (mode, args) = match cli.command {
        Command::Srl(a) => (Mode::Srl, a),
        Command::ModelBased(a) => (Mode::ModelBased, a),
        Command::Compare(a) => (Mode::Compare, a),
        Command::Bound(a) => (Mode::Bound, a),
        Command::Simulate(a) => (Mode::Simulate, a),
    };
    let code = execute(mode, args).unwrap_or_else(|e| {
        eprintln!("error: {e}");
        exit_code(&e)
    });
    ExitCode::from(code as u8)
}
