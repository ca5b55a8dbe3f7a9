//! `afm`: equilibria, fold diagrams, homoclinic thresholds and splitting checks
//! for the Lennard-Jones cantilever oscillator.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use afm_core::bifurcation::{diagram_csv, regime_curve, saddle_node_points, sweep_a};
use afm_core::equilibria::find_equilibria;
use afm_core::homoclinic::{sample_both, sample_orbit, OrbitOptions, SaddleLoop, Side};
use afm_core::melnikov::{analyze_loops, scan_csv, scan_omega};
use afm_core::output::{fmt17, json_array, Csv};
use afm_core::verify::{equispaced_phases, phase_scan, simulate, splitting_csv};
use afm_core::{reference_case, Error, Execution, Params, PhaseState, Regime};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "afm", version, about = "Lennard-Jones AFM oscillator toolkit")]
struct Cli {
    /// Run scans on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

/// Conservative constants, adimensional.
#[derive(Args, Clone, Copy)]
struct Force {
    #[arg(long, default_value_t = 0.1)]
    b1: f64,
    #[arg(long, default_value_t = 1.0)]
    b2: f64,
    #[arg(long, default_value_t = 1.89)]
    a: f64,
}

#[derive(Args, Clone, Copy)]
struct Perturbation {
    /// Damping coefficient.
    #[arg(long = "C", default_value_t = 1.0)]
    c: f64,
    /// Forcing amplitude.
    #[arg(long = "B", default_value_t = 0.0)]
    b: f64,
    #[arg(long, default_value_t = 1.0)]
    omega: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SideArg {
    Left,
    Right,
    Both,
}

impl SideArg {
    fn sides(self) -> Vec<Side> {
        match self {
            SideArg::Left => vec![Side::Left],
            SideArg::Right => vec![Side::Right],
            SideArg::Both => vec![Side::Left, Side::Right],
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Equilibria and their kinds as JSON.
    Classify {
        #[command(flatten)]
        force: Force,
    },
    /// Equilibrium branches over a range of offsets as CSV.
    Sweep {
        #[arg(long, default_value_t = 0.1)]
        b1: f64,
        #[arg(long, default_value_t = 1.0)]
        b2: f64,
        #[arg(long)]
        a_min: f64,
        #[arg(long)]
        a_max: f64,
        #[arg(long, default_value_t = 400)]
        n: usize,
        /// Diagram file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fold-point file; stderr when absent.
        #[arg(long)]
        folds: Option<PathBuf>,
    },
    /// Critical repulsion b1*(b2) as CSV.
    Regimes {
        #[arg(long)]
        b2_min: f64,
        #[arg(long)]
        b2_max: f64,
        #[arg(long, default_value_t = 100)]
        n: usize,
    },
    /// Melnikov integrals and persistence threshold as JSON.
    Melnikov {
        #[command(flatten)]
        force: Force,
        #[command(flatten)]
        pert: Perturbation,
        #[arg(long, value_enum, default_value_t = SideArg::Both)]
        side: SideArg,
    },
    /// Threshold against forcing frequency as CSV.
    Scan {
        #[command(flatten)]
        force: Force,
        #[arg(long = "C", default_value_t = 1.0)]
        c: f64,
        #[arg(long)]
        omega_min: f64,
        #[arg(long)]
        omega_max: f64,
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, value_enum, default_value_t = SideArg::Both)]
        side: SideArg,
    },
    /// Measured against predicted manifold splitting as CSV.
    Verify {
        #[command(flatten)]
        force: Force,
        #[command(flatten)]
        pert: Perturbation,
        #[arg(long)]
        epsilon: f64,
        /// Number of equispaced phases over one forcing period.
        #[arg(long, default_value_t = 8)]
        phases: usize,
        #[arg(long, value_enum, default_value_t = SideArg::Right)]
        side: SideArg,
    },
    /// Trajectory of the perturbed system as CSV.
    Simulate {
        #[command(flatten)]
        force: Force,
        #[command(flatten)]
        pert: Perturbation,
        #[arg(long)]
        x1: f64,
        #[arg(long)]
        x2: f64,
        #[arg(long, default_value_t = 0.0)]
        t0: f64,
        #[arg(long)]
        t1: f64,
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
    },
    /// Consistency check of the cantilever example constants as JSON.
    Reference,
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        Failure {
            code: if e.is_parameter_error() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure {
            code: 1,
            message: e.to_string(),
        }
    }
}

fn usage(message: String) -> Failure {
    Failure { code: 2, message }
}

fn build(force: Force, pert: Option<Perturbation>, epsilon: f64) -> Result<Params, Failure> {
    let mut p = Params::new(force.b1, force.b2, force.a)?;
    if let Some(q) = pert {
        p = p.with_damping(q.c)?.with_forcing(q.b, q.omega)?;
    }
    let p = p.with_epsilon(epsilon)?;
    warn_regime(&p);
    Ok(p)
}

/// Always-on regime report on stderr.
fn warn_regime(p: &Params) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(
        err,
        "regime: {} (b1 = {}, b1* = {})",
        p.regime().name(),
        p.b1(),
        fmt17(p.b1_crit())
    );
    if p.regime() != Regime::Bistable {
        let _ = writeln!(
            err,
            "warning: b1 >= b1*: at most two equilibria, no homoclinic loop"
        );
    }
    if (p.b1(), p.b2()) == (reference_case::B1, reference_case::B2) {
        if let Ok(r) = reference_case::consistency_report() {
            let _ = writeln!(
                err,
                "warning: cantilever example constants: {}",
                r.diagnostic
            );
        }
    }
}

fn loops(p: &Params, side: SideArg, exec: Execution) -> Result<Vec<SaddleLoop>, Failure> {
    let opts = OrbitOptions::default();
    Ok(match side {
        SideArg::Both => sample_both(p, &opts, exec)?.into(),
        one => vec![sample_orbit(p, one.sides()[0], &opts)?],
    })
}

fn grid(lo: f64, hi: f64, n: usize, what: &str) -> Result<Vec<f64>, Failure> {
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi >= lo) || n == 0 {
        return Err(usage(format!(
            "{what} requires 0 < min <= max and n >= 1 (got {lo}, {hi}, {n})"
        )));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect())
}

fn write_out(path: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<String, Failure> {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match cli.command {
        Command::Classify { force } => {
            let p = build(force, None, 0.0)?;
            Ok(json_array(find_equilibria(&p).iter().map(|e| e.to_json())) + "\n")
        }
        Command::Sweep {
            b1,
            b2,
            a_min,
            a_max,
            n,
            out,
            folds,
        } => {
            let p = build(Force { b1, b2, a: a_min }, None, 0.0)?;
            let branches = sweep_a(&p, a_min, a_max, n, exec)?;
            let mut fold_csv = Csv::new(&["x", "a_crit", "d2f", "daf"]);
            for f in saddle_node_points(&p) {
                fold_csv.row(&[fmt17(f.x), fmt17(f.a_crit), fmt17(f.d2f), fmt17(f.daf)]);
            }
            match &folds {
                Some(_) => write_out(&folds, fold_csv.as_str())?,
                None => eprint!("{}", fold_csv.as_str()),
            }
            write_out(&out, &diagram_csv(&branches))?;
            Ok(String::new())
        }
        Command::Regimes { b2_min, b2_max, n } => {
            let mut csv = Csv::new(&["b2", "b1_crit"]);
            for (b2, b1c) in regime_curve(b2_min, b2_max, n)? {
                csv.row(&[fmt17(b2), fmt17(b1c)]);
            }
            Ok(csv.into_string())
        }
        Command::Melnikov { force, pert, side } => {
            let p = build(force, Some(pert), 0.0)?;
            let report = analyze_loops(&loops(&p, side, exec)?, exec)?;
            Ok(report.to_json() + "\n")
        }
        Command::Scan {
            force,
            c,
            omega_min,
            omega_max,
            n,
            side,
        } => {
            let pert = Perturbation {
                c,
                b: 0.0,
                omega: 1.0,
            };
            let p = build(force, Some(pert), 0.0)?;
            let omegas = grid(omega_min, omega_max, n, "scan")?;
            let results = scan_omega(&loops(&p, side, exec)?, &omegas, exec)?;
            Ok(scan_csv(&results))
        }
        Command::Verify {
            force,
            pert,
            epsilon,
            phases,
            side,
        } => {
            if !matches!(side, SideArg::Left | SideArg::Right) {
                return Err(usage(
                    "verify requires --side left or --side right".to_string(),
                ));
            }
            if phases == 0 {
                return Err(usage("verify requires --phases >= 1".to_string()));
            }
            let p = build(force, Some(pert), epsilon)?;
            let lp = sample_orbit(&p, side.sides()[0], &OrbitOptions::default())?;
            let reports = phase_scan(&p, &lp, &equispaced_phases(&p, phases), exec)?;
            Ok(splitting_csv(&reports))
        }
        Command::Simulate {
            force,
            pert,
            x1,
            x2,
            t0,
            t1,
            epsilon,
        } => {
            let p = build(force, Some(pert), epsilon)?;
            let s0 = PhaseState::new(x1, x2)?;
            Ok(simulate(&p, s0, t0, t1)?.to_csv())
        }
        Command::Reference => {
            let p = reference_case::params()?;
            warn_regime(&p);
            Ok(reference_case::consistency_report()?.to_json() + "\n")
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(text) => {
            if std::io::stdout().lock().write_all(text.as_bytes()).is_err() {
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
