use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use mfjq::scenarios::{run_scenario, Backend, ScenarioOutcome, ScenarioSpec};
use mfjq::verify::{audit_concentration, audit_conservation, audit_constraints, audit_run_dir, parse_trajectory_csv};
use mfjq::verify::{run_suite, AuditLimits, Check, ConcentrationAuditRow, RunMeta, Suite, SuiteReport};
use mfjq::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_VIOLATION: u8 = 3;

#[derive(Parser)]
#[command(name = "mfjq", version, about = "Sparse Lyapunov feedback for mean-field transport")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a built-in scenario or a scenario file.
    Run(RunArgs),
    /// Run an invariant suite: constraints, conservation, oracle, dissipativity or all.
    Verify {
        suite: String,
        /// Audit a finished run directory instead of the built-in cases.
        #[arg(long)]
        run_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Grid,
    Particles,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    scenario: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    cells: Option<usize>,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
}

fn version() -> String {
    format!("{}-{}", env!("CARGO_PKG_VERSION"), env!("MFJQ_GIT_DESCRIBE"))
}

fn resolve(args: &RunArgs) -> mfjq::Result<ScenarioSpec> {
    let mut spec = match (&args.scenario, &args.config) {
        (Some(name), _) => ScenarioSpec::builtin(name)?,
        (None, Some(path)) => ScenarioSpec::from_file(path)?,
        (None, None) => return Err(Error::InvalidParameter("either --scenario or --config is required".into())),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(dt) = args.dt {
        spec.solver.dt = dt;
    }
    if let Some(cells) = args.cells {
        spec.cells = cells;
    }
    if let Some(b) = args.backend {
        spec.backend = match b {
            BackendArg::Grid => Backend::Grid,
            BackendArg::Particles => Backend::Particles,
        };
    }
    if args.h.is_some() || args.kappa.is_some() {
        let ctrl = spec
            .controller
            .as_mut()
            .ok_or_else(|| Error::InvalidParameter(format!("scenario `{}` has no controller", spec.name)))?;
        ctrl.h = args.h.unwrap_or(ctrl.h);
        ctrl.kappa = args.kappa.unwrap_or(ctrl.kappa);
    }
    if let Some(c) = args.c {
        match (&mut spec.controller, &mut spec.concentration) {
            (Some(ctrl), _) => ctrl.c = c,
            (None, Some(conc)) => conc.c = c,
            _ => return Err(Error::InvalidParameter(format!("scenario `{}` has no budget c", spec.name))),
        }
    }
    spec.taper = Some(spec.taper());
    spec.validate()?;
    Ok(spec)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn write_file(path: &Path, write: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> mfjq::Result<()> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    write(&mut out).and_then(|_| out.flush()).map_err(io_err(path))
}

fn write_report(dir: &Path, lines: &[String]) -> mfjq::Result<PathBuf> {
    let path = dir.join("violations.txt");
    write_file(&path, |out| lines.iter().try_for_each(|l| writeln!(out, "{l}")))?;
    Ok(path)
}

fn failed(checks: &[Check]) -> Vec<String> {
    checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{}: {}", c.name, c.detail))
        .collect()
}

enum RunFailure {
    Config(Error),
    Violation(String),
    Other(Error),
}

fn cmd_run(args: &RunArgs) -> Result<(), RunFailure> {
    let spec = resolve(args).map_err(RunFailure::Config)?;
    let out = &args.out;
    let snapshots = out.join("snapshots");
    fs::create_dir_all(&snapshots)
        .map_err(io_err(&snapshots))
        .map_err(RunFailure::Config)?;
    let meta = RunMeta {
        version: version(),
        seed: spec.seed,
        scenario: spec.clone(),
    };
    let io = RunFailure::Other;
    write_file(&out.join("meta.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &meta).map_err(std::io::Error::other)?;
        writeln!(w)
    })
    .map_err(io)?;

    let outcome = match run_scenario(&spec) {
        Ok(o) => o,
        Err(e @ Error::SupportEscape { .. }) => {
            let path = write_report(out, &[e.to_string()]).map_err(io)?;
            return Err(RunFailure::Violation(format!("{e}; report at {}", path.display())));
        }
        Err(e) => return Err(RunFailure::Config(e)),
    };
    let trajectory = out.join("trajectory.csv");
    let violations = match &outcome {
        ScenarioOutcome::Hk(hk) => {
            write_file(&trajectory, |w| hk.log.write_csv(w)).map_err(io)?;
            for s in &hk.log.snapshots {
                write_file(&snapshots.join(format!("step_{:07}.csv", s.step)), |w| s.measure.write_csv(w)).map_err(io)?;
            }
            let rows = parse_trajectory_csv(&hk.log.to_csv_string()).map_err(io)?;
            let limits = AuditLimits::from_spec(&spec);
            let mut checks = audit_constraints(&rows, &limits);
            checks.extend(audit_conservation(&rows, &limits));
            println!(
                "{}: t_end = {}, V = {:.6e} -> {:.6e}, switches = {}, clusters = {}, consensus = {}",
                spec.name,
                spec.solver.t_end,
                rows.first().map_or(0.0, |r| r.v),
                rows.last().map_or(0.0, |r| r.v),
                hk.log.switch_count(),
                hk.clusters.clusters.len(),
                hk.clusters.consensus
            );
            failed(&checks)
        }
        ScenarioOutcome::Concentration(log) => {
            write_file(&trajectory, |w| log.write_csv(w)).map_err(io)?;
            let measure: mfjq::Measure64 = log.final_measure.clone().into();
            write_file(&snapshots.join("final.csv"), |w| measure.write_csv(w)).map_err(io)?;
            let last = log.rows.last();
            println!(
                "{}: t = {}, window mass = {:.6}",
                spec.name,
                last.map_or(0.0, |r| r.t),
                last.map_or(0.0, |r| r.window_mass)
            );
            let rows: Vec<ConcentrationAuditRow> = log.rows.iter().map(Into::into).collect();
            failed(&audit_concentration(&rows, log.c))
        }
    };
    if !violations.is_empty() {
        let path = write_report(out, &violations).map_err(io)?;
        return Err(RunFailure::Violation(format!(
            "{} invariant violations; report at {}",
            violations.len(),
            path.display()
        )));
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn print_report(report: &SuiteReport) {
    println!("[{}]", report.suite);
    for c in &report.checks {
        println!("  {:4}  {:<40} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
}

fn cmd_verify(suite: &str, run_dir: Option<&Path>) -> ExitCode {
    let suites = match Suite::select(suite) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let results: Vec<mfjq::Result<SuiteReport>> = suites
        .par_iter()
        .map(|s| match run_dir {
            Some(dir) if s.audits_runs() => audit_run_dir(*s, dir),
            _ => run_suite(*s),
        })
        .collect();
    let mut ok = true;
    for r in results {
        match r {
            Ok(report) => {
                print_report(&report);
                ok &= report.passed();
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_CONFIG);
            }
        }
    }
    println!("{}", if ok { "all checks passed" } else { "some checks FAILED" });
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn init_threads() {
    if let Some(n) = std::env::var("MFJQ_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            // Fails only if a pool already exists, which cannot happen this early.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads();
    match &cli.command {
        Command::Run(args) => match cmd_run(args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(RunFailure::Config(e)) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_CONFIG)
            }
            Err(RunFailure::Violation(msg)) => {
                eprintln!("invariant violation: {msg}");
                ExitCode::from(EXIT_VIOLATION)
            }
            Err(RunFailure::Other(e)) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
        Command::Verify { suite, run_dir } => cmd_verify(suite, run_dir.as_deref()),
    }
}
