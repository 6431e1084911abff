//! `sescap` command-line driver.

mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sescap::checks::{all_passed, run_checks, CheckOptions, Status};
use sescap::diagnostics::{write_error_series, write_snapshots, write_table};
use sescap::experiment::{self, RunConfig, Table};
use sescap::hamiltonian::write_spectrum;
use sescap::par::{sequential_linear_algebra, Exec};

use output::{CliError, Outputs};

#[derive(Parser, Debug)]
#[command(name = "sescap", version, about = "Smooth-exterior-scaling CAP propagation experiments")]
struct Cli {
    /// TOML run configuration; defaults reproduce the figure 1 setup.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a configuration key, e.g. `--set contour.theta=0.3`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Output directory (overrides `outputs.directory`).
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,

    /// Disable data-parallel loops.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Propagate the configured problem and write snapshots and reports.
    Run,
    /// Write overlay data for one of the six reference figures.
    Figure {
        #[arg(value_parser = clap::value_parser!(u32).range(1..=6))]
        n: u32,
    },
    /// Inner-region error of the configured run and the Hermitian run
    /// against the converged reference.
    Compare,
    /// Eigenvalues of the configured Hamiltonian.
    Spectrum,
    /// Run the desk-scale invariant suite.
    Check {
        /// Force the scaling angle.
        #[arg(long)]
        theta: Option<f64>,
        /// Flip the sign of V1 before assembly.
        #[arg(long, hide = true)]
        flip_v1: bool,
    },
    /// Print the effective configuration.
    Config,
}

impl Command {
    fn name(&self) -> String {
        match self {
            Command::Run => "run".into(),
            Command::Figure { n } => format!("figure {n}"),
            Command::Compare => "compare".into(),
            Command::Spectrum => "spectrum".into(),
            Command::Check { .. } => "check".into(),
            Command::Config => "config".into(),
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_toml(&text)?
        }
        None => RunConfig::default(),
    };
    for o in &cli.overrides {
        let (key, value) = o
            .split_once('=')
            .ok_or_else(|| CliError::Validation(format!("override `{o}` is not KEY=VALUE")))?;
        config.set(key.trim(), value.trim())?;
    }
    if let Some(dir) = &cli.out {
        config.outputs.directory = dir.display().to_string();
    }
    config.validate()?;
    Ok(config)
}

fn table_file(out: &mut Outputs, t: &Table) {
    out.add(format!("{}.dat", t.name), &t.notes, |w| write_table(w, &[], &t.columns, &t.rows));
}

fn cmd_run(config: &RunConfig, exec: Exec, out: &mut Outputs) -> Result<(), CliError> {
    let r = experiment::run(config, exec)?;
    let mut notes = vec![r.trajectory.provenance().describe(), r.meta.clone()];
    if let Some(n) = &r.reference_note {
        notes.push(format!("reference: {n}"));
    }
    if config.outputs.snapshots {
        out.add("snapshots.dat", &notes, |w| write_snapshots(w, &[], &r.trajectory));
    }
    if config.outputs.reports {
        if let Some(e) = &r.reference_error {
            out.add("error.dat", &notes, |w| write_error_series(w, &[], e));
        }
        let edge: Vec<Vec<f64>> = r.edge.iter().map(|&(t, a)| vec![t, a]).collect();
        let mut edge_notes = notes.clone();
        edge_notes.push(format!(
            "edge x = {} onset (threshold {:e}) = {}",
            config.diagnostics.edge_x, config.diagnostics.onset_threshold, r.onset
        ));
        out.add("edge.dat", &edge_notes, |w| write_table(w, &[], "t, |psi(edge)|", &edge));
        if let Some(rep) = &r.reflection {
            out.add("reflection.dat", &notes, |w| rep.write(w));
        }
        if let Some(values) = &r.spectrum {
            out.add("spectrum.dat", &notes, |w| write_spectrum(w, values));
        }
    }
    if let Some(e) = &r.reference_error {
        let worst = e.iter().map(|p| p.1).fold(0.0, f64::max);
        println!("max inner-region error {worst:.3e}");
    }
    if let Some(rep) = &r.reflection {
        println!("reflection bound max {:.3e} (epsilon {:e})", rep.max_bound, rep.epsilon);
    }
    Ok(())
}

fn cmd_check(theta: Option<f64>, flip_v1: bool, exec: Exec) -> Result<(), CliError> {
    let results = run_checks(CheckOptions { theta, flip_v1 }, exec);
    for r in &results {
        let tag = match r.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIP",
        };
        println!("{tag} {}: {}", r.name, r.detail);
    }
    if all_passed(&results) {
        return Ok(());
    }
    let failed: Vec<&str> = results.iter().filter(|r| r.status == Status::Fail).map(|r| r.name).collect();
    let msg = format!("failed checks: {}", failed.join(", "));
    if failed.contains(&"validate_theta") {
        Err(CliError::Validation(msg))
    } else {
        Err(CliError::Numerical(msg))
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel };
    if let Command::Check { theta, flip_v1 } = cli.command {
        return cmd_check(theta, flip_v1, exec);
    }
    let config = load_config(cli)?;
    let mut out = Outputs::new(&config, cli.command.name());
    match &cli.command {
        Command::Run => cmd_run(&config, exec, &mut out)?,
        Command::Figure { n } => table_file(&mut out, &experiment::figure(*n, &config, exec)?),
        Command::Compare => table_file(&mut out, &experiment::compare(&config, exec)?),
        Command::Spectrum => {
            let (all, bound, meta) = experiment::spectrum(&config)?;
            let notes = vec![meta];
            out.add("spectrum.dat", &notes, |w| write_spectrum(w, &all));
            out.add("bound_states.dat", &notes, |w| write_spectrum(w, &bound));
            println!("{} eigenvalues, {} bound-like", all.len(), bound.len());
        }
        Command::Config => {
            print!("{}", config.to_toml());
            return Ok(());
        }
        Command::Check { .. } => unreachable!(),
    }
    for path in out.commit()? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    // usage errors are validation failures, not clap's default exit code 2
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    sequential_linear_algebra();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
