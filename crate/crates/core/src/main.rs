use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info};

use qkfp::equilibria::{
    boson_beta_limit, critical_mass, mass_of_beta, MomentumQuadrature, Statistics,
};
use qkfp::grid::{read_snapshot, GridSpec};
use qkfp::harness::check::bound_tolerance;
use qkfp::harness::config::ConfigError;
use qkfp::harness::scenario::write_run;
use qkfp::harness::{
    check_snapshot, check_suite, exit, load_config, simulate, sweep_delta, CheckReport,
    HarnessError, ScenarioConfig,
};

#[derive(Parser)]
#[command(name = "qkfp", version, about = "Quantum kinetic Fokker-Planck simulator and checks")]
struct Cli {
    /// Scenario file (flat `section.key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `check.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `output.directory`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Only warnings and errors on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the beta/mass table and the critical masses.
    Equilibrium {
        /// Rows in the table.
        #[arg(long, default_value_t = 12)]
        rows: usize,
    },
    /// Evolve the scenario and write diagnostics, fit and plots.
    Run,
    /// Evolve the scenario and its `pair.*` companion and compare them in L1.
    Contract,
    /// Run the invariant suite, or the static subset on a snapshot.
    Check {
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Refit the decay of E over several delta values.
    SweepDelta {
        /// Comma separated; defaults to the heuristic times 1/4, 1/2, 1, 2, 4.
        #[arg(long, value_delimiter = ',')]
        deltas: Vec<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32, HarnessError> {
    if let Command::Equilibrium { rows } = cli.command {
        return equilibrium_table(cli, rows);
    }
    let cfg = scenario(cli)?;
    let out = cli.out.clone().unwrap_or_else(|| cfg.output.directory.clone());
    match &cli.command {
        Command::Equilibrium { .. } => unreachable!(),
        Command::Run => run(&cfg, &out),
        Command::Contract => contract(&cfg, &out),
        Command::Check { snapshot } => check(&cfg, &out, snapshot.as_deref()),
        Command::SweepDelta { deltas } => sweep(&cfg, &out, deltas),
    }
}

fn scenario(cli: &Cli) -> Result<ScenarioConfig, HarnessError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| ConfigError::Value {
            key: "--config".into(),
            msg: "required by this subcommand".into(),
        })?;
    let mut cfg = load_config(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn equilibrium_table(cli: &Cli, rows: usize) -> Result<i32, HarnessError> {
    let grid = match &cli.config {
        Some(p) => load_config(p)?.grid,
        None => GridSpec::default(),
    };
    let quad = grid.momentum_quadrature();
    println!("# grid quadrature: np = {}, p_max = {}", grid.np(), grid.p_max());
    println!("beta,mass_fermi,mass_classical,mass_bose,mass_bose_exact");
    let top = boson_beta_limit(1);
    for k in 1..=rows {
        let beta = top * k as f64 / (rows + 1) as f64;
        let m = |s, q: &MomentumQuadrature| mass_of_beta(beta, s, 1, q);
        println!(
            "{beta:.6},{:.12e},{:.12e},{:.12e},{:.12e}",
            m(Statistics::Fermi, &quad)?,
            m(Statistics::Classical, &quad)?,
            m(Statistics::Bose, &quad)?,
            m(Statistics::Bose, &MomentumQuadrature::Radial)?,
        );
    }
    for d in 1..=3 {
        println!("# critical mass d = {d}: {:e}", critical_mass(d));
    }
    Ok(exit::SUCCESS)
}

fn run(cfg: &ScenarioConfig, out: &Path) -> Result<i32, HarnessError> {
    let rec = simulate(cfg)?;
    write_run(cfg, &rec, out)?;
    match rec.fit {
        Some(f) => println!(
            "lambda = {:.6}  c = {:.4e}  r^2 = {:.6}  window = [{}, {}]",
            f.lambda, f.c, f.r_squared, f.window[0], f.window[1]
        ),
        None => println!("no decay fit (initial data at equilibrium)"),
    }
    info!("artifacts in {}", out.display());
    Ok(exit::SUCCESS)
}

fn contract(cfg: &ScenarioConfig, out: &Path) -> Result<i32, HarnessError> {
    if cfg.companion.is_none() {
        return Err(ConfigError::Missing("pair.kind".into()).into());
    }
    let rec = simulate(cfg)?;
    write_run(cfg, &rec, out)?;
    let rep = rec
        .pair_report(cfg.solver.dt)
        .ok_or_else(|| HarnessError::Invariant("no pair samples".into()))?;
    fs::write(out.join("contract.json"), serde_json::to_string_pretty(&rep)? + "\n")?;
    println!(
        "l1(0) = {:.6e}  max ratio = {:.12}  allowance margin = {:.3e}  ordered = {}  ordered excess = {:.3e}",
        rep.l1_initial, rep.max_ratio, rep.allowance_margin, rep.ordered, rep.ordered_excess
    );
    if rep.allowance_margin > 0.0 {
        return Err(HarnessError::Invariant(format!(
            "l1 distance exceeds l1(0) (1 + 10 dt t) by {:e}",
            rep.allowance_margin
        )));
    }
    let tol = bound_tolerance(&cfg.grid);
    if rep.ordered && rep.ordered_excess > tol {
        return Err(HarnessError::Invariant(format!(
            "ordering lost: (f - g)+ reaches {:e} > {tol:e}",
            rep.ordered_excess
        )));
    }
    Ok(exit::SUCCESS)
}

fn check(cfg: &ScenarioConfig, out: &Path, snapshot: Option<&Path>) -> Result<i32, HarnessError> {
    let rep = match snapshot {
        Some(p) => {
            let (f, _) = read_snapshot(p)?;
            check_snapshot(cfg, &f, cfg.seed)?
        }
        None => check_suite(cfg, cfg.seed)?,
    };
    fs::create_dir_all(out)?;
    fs::write(out.join("check.json"), serde_json::to_string_pretty(&rep)? + "\n")?;
    print_report(&rep);
    Ok(if rep.passed { exit::SUCCESS } else { exit::INVARIANT })
}

fn print_report(rep: &CheckReport) {
    for e in &rep.entries {
        println!(
            "{} {:<40} {:>12.4e} <= {:<10.3e} {}",
            if e.passed { "ok  " } else { "FAIL" },
            e.name,
            e.value,
            e.limit,
            e.detail
        );
    }
    let failed = rep.failures().count();
    println!("{} checks, {failed} failed (seed {})", rep.entries.len(), rep.seed);
}

fn sweep(cfg: &ScenarioConfig, out: &Path, deltas: &[f64]) -> Result<i32, HarnessError> {
    let deltas: Vec<f64> = if deltas.is_empty() {
        [0.25, 0.5, 1.0, 2.0, 4.0].iter().map(|s| s * cfg.model.delta).collect()
    } else {
        deltas.to_vec()
    };
    if let Some(bad) = deltas.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
        return Err(ConfigError::Value {
            key: "--deltas".into(),
            msg: format!("{bad} is not a positive number"),
        }
        .into());
    }
    let rec = simulate(cfg)?;
    let rows = sweep_delta(cfg, &rec, &deltas);
    let mut csv = String::from("delta,lambda,r_squared,monotone,C6,C7\n");
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.17e}")).unwrap_or_default();
    println!("{:>12} {:>10} {:>12} {:>9} {:>12} {:>12}", "delta", "lambda", "r^2", "monotone", "C6", "C7");
    for r in &rows {
        csv.push_str(&format!(
            "{:.17e},{},{},{},{:.17e},{:.17e}\n",
            r.delta,
            opt(r.lambda),
            opt(r.r_squared),
            r.monotone,
            r.c6,
            r.c7
        ));
        println!(
            "{:>12.4e} {:>10} {:>12} {:>9} {:>12.4e} {:>12.4e}",
            r.delta,
            r.lambda.map(|v| format!("{v:.5}")).unwrap_or_else(|| "-".into()),
            r.r_squared.map(|v| format!("{v:.8}")).unwrap_or_else(|| "-".into()),
            r.monotone,
            r.c6,
            r.c7
        );
    }
    fs::create_dir_all(out)?;
    fs::write(out.join("sweep.csv"), csv)?;
    Ok(exit::SUCCESS)
}
