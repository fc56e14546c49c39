use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use nwa_cli::export::{investor_table_csv, lp_file, price_signal_csv, ExportKind};
use nwa_cli::run::{EXIT_OK, EXIT_VERIFICATION};
use nwa_cli::{
    cashflow, compare, load_report_case, load_with_horizon, report_exit_code, run_scenario, verify_lower_level,
    RunError, ScenarioReport,
};
use nwa_core::network::overload_report;
use nwa_core::{Backend, ScenarioKind, SolverConfig};

#[derive(Parser)]
#[command(name = "nwa", version, about = "Value distributed energy resources as non-wires alternatives")]
struct Cli {
    /// Log solver progress.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario and write its report.
    Run {
        #[arg(long)]
        case: PathBuf,
        /// baseline, bess, bess-der, or all.
        #[arg(long)]
        scenario: String,
        /// Report file; a directory when the scenario is `all`.
        #[arg(long)]
        out: PathBuf,
        /// Relative optimality gap.
        #[arg(long, default_value_t = 0.02)]
        gap: f64,
        /// Keep only the first H steps of the case.
        #[arg(long)]
        horizon: Option<usize>,
        /// `internal` or `external:COMMAND`.
        #[arg(long, default_value = "internal")]
        solver: String,
        /// Wall-clock limit per scenario, seconds.
        #[arg(long)]
        time_limit: Option<u64>,
        /// Solve the three scenarios concurrently (with `all`).
        #[arg(long)]
        parallel: bool,
    },
    /// Tabulate reports of one case against its baseline.
    Compare {
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Year-by-year spending of a report.
    Cashflow {
        report: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the price signal, the investor table or the model file.
    Export {
        report: PathBuf,
        /// price-signal-csv, investor-table or lp-file.
        #[arg(long)]
        what: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Overload screening of a case.
    Inspect {
        #[arg(long)]
        case: PathBuf,
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Re-check the lower-level optimality conditions stored in a report.
    ValidateKkt { report: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<RunError>().map_or(1, RunError::exit_code);
            ExitCode::from(code)
        }
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => match std::io::stdout().write_all(text.as_bytes()) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
            _ => Ok(()),
        },
    }
}

/// The backend and, for an external solver, the scratch directory that must
/// outlive the run.
fn parse_backend(s: &str) -> Result<(Backend, Option<tempfile::TempDir>)> {
    if s == "internal" {
        return Ok((Backend::Internal, None));
    }
    let command = s.strip_prefix("external:").ok_or_else(|| anyhow!("solver must be `internal` or `external:CMD`"))?;
    if command.is_empty() {
        bail!("external solver command is empty");
    }
    let dir = tempfile::Builder::new().prefix("nwa-").tempdir()?;
    let workdir = dir.path().to_path_buf();
    Ok((Backend::External { command: command.to_string(), workdir }, Some(dir)))
}

fn summary(r: &ScenarioReport) -> String {
    let mut s = format!(
        "{:<9} {:<8} LCC {:>14.2}  gap {:.2e}  upgrades {}/{}  BESS {:.1} kW / {:.1} kWh  DER {:.1} kW  {:.1}s",
        r.scenario,
        r.solve.status,
        r.total_lcc,
        r.solve.gap,
        r.upgrades.count(),
        r.upgrades.transformers.len() + r.upgrades.lines.len(),
        r.bess_kw(),
        r.bess_kwh(),
        r.der_kw(),
        r.solve.elapsed_s
    );
    let failed = r.verification.failures();
    if !failed.is_empty() {
        s.push_str(&format!("  FAILED {}", failed.join(",")));
    }
    s
}

fn dispatch(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Run { case, scenario, out, gap, horizon, solver, time_limit, parallel } => {
            let c = load_with_horizon(&case, horizon)?;
            let (backend, _scratch) = parse_backend(&solver)?;
            let cfg = SolverConfig {
                gap,
                time_limit: time_limit.map(Duration::from_secs),
                backend,
                ..SolverConfig::default()
            };
            if scenario == "all" {
                return run_all(&c, &case, &cfg, &out, parallel);
            }
            let kind = ScenarioKind::parse(&scenario).ok_or_else(|| anyhow!("unknown scenario `{scenario}`"))?;
            let (report, _) = run_scenario(&c, &case, kind, &cfg, None)?;
            report.write(&out)?;
            println!("{}", summary(&report));
            Ok(report_exit_code(&report))
        }
        Command::Compare { reports, out } => {
            let rs = reports.iter().map(|p| ScenarioReport::read(p)).collect::<Result<Vec<_>>>()?;
            let table = compare(&rs)?;
            print!("{}", table.to_text());
            if let Some(p) = out {
                emit(&table.to_csv(), Some(&p))?;
            }
            Ok(EXIT_OK)
        }
        Command::Cashflow { report, out } => {
            let r = ScenarioReport::read(&report)?;
            emit(&cashflow(&r).to_csv(), out.as_deref())?;
            Ok(EXIT_OK)
        }
        Command::Export { report, what, out } => {
            let r = ScenarioReport::read(&report)?;
            let kind = ExportKind::parse(&what).ok_or_else(|| anyhow!("unknown export `{what}`"))?;
            let text = match kind {
                ExportKind::PriceSignalCsv => price_signal_csv(&r)?,
                ExportKind::InvestorTable => investor_table_csv(&r)?,
                ExportKind::LpFile => lp_file(&r, &load_report_case(&r)?)?,
            };
            emit(&text, out.as_deref())?;
            Ok(EXIT_OK)
        }
        Command::Inspect { case, horizon } => {
            let c = load_with_horizon(&case, horizon)?;
            println!("case {} ({} buses, {} lines, {} steps)", c.name, c.feeder.buses.len(), c.feeder.lines.len(), c.series.steps);
            println!("{:<16} {:>10} {:>10} {:>8}", "component", "peak kW", "rating kW", "load %");
            for e in overload_report(&c) {
                let flag = if e.overloaded { "  overloaded" } else { "" };
                println!("{:<16} {:>10.2} {:>10.2} {:>7.1}%{flag}", e.name, e.peak_kw, e.rating_kw, e.percent);
            }
            for p in &c.provenance {
                println!("note: {p}");
            }
            Ok(EXIT_OK)
        }
        Command::ValidateKkt { report } => {
            let r = ScenarioReport::read(&report)?;
            if !r.is_solved() {
                bail!("report holds no solution");
            }
            let case = load_report_case(&r)?;
            let llf = nwa_core::investor::build_investor_lp(&case)?;
            let v = verify_lower_level(&case, &llf, &r.lower_level, r.case.pwf_planner, r.verification.signal_active)?;
            let k = &v.kkt;
            let tag = |pass: bool| match (pass, v.signal_active) {
                (true, _) => "ok",
                (false, true) => "FAIL",
                (false, false) => "not enforced",
            };
            println!(
                "stationarity {:.2e}  primal {:.2e}  dual sign {:.2e}  complementarity {:.2e}  {}",
                k.stationarity, k.primal, k.dual_sign, k.complementarity, tag(k.pass)
            );
            println!("payment identity gap {:.2e}  {}", v.payment.relative_gap, tag(v.payment.pass));
            println!("linearization gap {:.2e}  {}", v.linearization.relative_gap, tag(v.linearization.pass));
            println!(
                "price recovery: {} interior exports, {} mismatches  {}",
                v.price_recovery.interior, v.price_recovery.mismatches, tag(v.price_recovery.pass)
            );
            println!("argmin gap {:.2e}  {}", v.argmin.relative_gap, if v.argmin.pass { "ok" } else { "FAIL" });
            println!("investor indifference gap {:.2e}", v.indifference.relative_gap);
            if !v.signal_active {
                println!("no price signal: only the argmin check is enforced");
            }
            Ok(if v.passed() { EXIT_OK } else { EXIT_VERIFICATION })
        }
    }
}

fn run_all(case: &nwa_core::Case, path: &Path, cfg: &SolverConfig, dir: &Path, parallel: bool) -> Result<u8> {
    fs::create_dir_all(dir)?;
    let kinds = ScenarioKind::ALL;
    let reports: Vec<Result<ScenarioReport, RunError>> = if parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = kinds.iter().map(|&k| s.spawn(move || run_scenario(case, path, k, cfg, None).map(|r| r.0))).collect();
            handles.into_iter().map(|h| h.join().expect("scenario thread panicked")).collect()
        })
    } else {
        let mut warm = None;
        let mut out = Vec::new();
        for k in kinds {
            let r = run_scenario(case, path, k, cfg, warm.as_ref());
            if let Ok((_, o)) = &r {
                if k == ScenarioKind::BessOnly {
                    warm = Some(o.warm_start());
                }
            }
            out.push(r.map(|r| r.0));
        }
        out
    };
    let mut code = EXIT_OK;
    let mut solved = Vec::new();
    for (k, r) in kinds.iter().zip(reports) {
        match r {
            Ok(rep) => {
                rep.write(&dir.join(format!("{}.json", k.name())))?;
                println!("{}", summary(&rep));
                code = code.max(report_exit_code(&rep));
                solved.push(rep);
            }
            Err(e) => {
                eprintln!("error: {e}");
                code = code.max(e.exit_code());
            }
        }
    }
    if solved.len() >= 2 {
        let table = compare(&solved)?;
        print!("{}", table.to_text());
        fs::write(dir.join("comparison.csv"), table.to_csv())?;
    }
    if code == EXIT_VERIFICATION {
        eprintln!("verification failed; see the reports");
    }
    Ok(code)
}
