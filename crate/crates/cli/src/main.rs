use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fockflow::fit::{fit_range, Family, FitResult};
use fockflow::FockError;
use serde::Serialize;

mod config;
mod format;
mod run;
mod sweep;

use config::Overrides;
use format::{Cell, Table};

#[derive(Debug)]
pub enum CliError {
    Parse(String),
    Invariant(String),
    Integration(String),
    Model(FockError),
    Io(String),
}

impl std::error::Error for CliError {}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Parse(s) => write!(f, "parse error: {s}"),
            CliError::Invariant(s) => write!(f, "invariant breached: {s}"),
            CliError::Integration(s) => write!(f, "integration failed: {s}"),
            CliError::Model(e) => write!(f, "{e}"),
            CliError::Io(s) => write!(f, "i/o error: {s}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Invariant(_) => 3,
            CliError::Integration(_) => 4,
            CliError::Model(e) => match e {
                FockError::Integration { .. } | FockError::Quadrature(_) => 4,
                FockError::Invariant(_) => 3,
                FockError::Dimension(_)
                | FockError::InvalidModel(_)
                | FockError::InvalidEnvelope(_)
                | FockError::InvalidField(_)
                | FockError::Unsupported(_) => 2,
                FockError::Fit(_) | FockError::Linalg(_) => 1,
            },
            CliError::Io(_) => 1,
        }
    }

    pub fn status(&self) -> &'static str {
        match self.exit_code() {
            2 => "parse",
            3 => "invariant",
            4 => "integration",
            _ => "error",
        }
    }
}

#[derive(Parser)]
#[command(name = "fockflow", version, about = "Fock-state master equations for pulsed quantum inputs")]
struct Cli {
    /// Output directory
    #[arg(long, global = true, env = "FOCKFLOW_OUT", default_value = "fockflow-out")]
    out: PathBuf,
    /// Worker threads for sweeps
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Relative tolerance of the adaptive integrator
    #[arg(long, global = true)]
    rtol: Option<f64>,
    /// Use fixed-step RK4 with this step instead of the adaptive integrator
    #[arg(long, global = true, value_name = "DT")]
    fixed_step: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one scenario and write its observables
    Run { config: PathBuf },
    /// Run the [sweep] section of a scenario
    Sweep { config: PathBuf },
    /// Fit a model to two columns of a table
    Fit {
        table: PathBuf,
        #[arg(long)]
        family: Family,
        /// Inclusive x range, `a..b`
        #[arg(long, value_parser = parse_range)]
        range: Option<(f64, f64)>,
        /// x column (default: first)
        #[arg(long)]
        x: Option<String>,
        /// y column (default: second)
        #[arg(long)]
        y: Option<String>,
    },
    /// Check the engine against its independent oracles
    Verify,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once("..").ok_or("expected a..b")?;
    let a: f64 = a.trim().parse().map_err(|_| format!("'{a}' is not a number"))?;
    let b: f64 = b.trim().parse().map_err(|_| format!("'{b}' is not a number"))?;
    if !(a <= b) {
        return Err("range must satisfy a <= b".into());
    }
    Ok((a, b))
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(io(path))
}

#[derive(Serialize)]
struct FitReport<'a> {
    x: &'a str,
    y: &'a str,
    range: (f64, f64),
    #[serde(flatten)]
    result: &'a FitResult,
}

fn print_fit(r: &FitResult, x: &str, y: &str) {
    println!(
        "{} fit of {y} against {x}: a = {:.6} ± {:.6}, b = {:.6} ± {:.6}, R² = {:.6} ({} points)",
        r.family, r.a, r.a_half_width, r.b, r.b_half_width, r.r_squared, r.points
    );
}

fn cmd_run(cfg_path: &Path, out: &Path, ov: Overrides) -> Result<(), CliError> {
    let cfg = config::parse(config::load(cfg_path)?)?;
    let res = run::run(&cfg, ov)?;
    let mut columns = vec!["t".to_string()];
    columns.extend(res.columns.iter().cloned());
    let rows = (0..res.times.len())
        .map(|k| std::iter::once(res.times[k]).chain(res.values.iter().map(|c| c[k])).map(Cell::Num).collect())
        .collect();
    let mut comments = vec![format!("scenario: {}", cfg.name)];
    if !cfg.description.is_empty() {
        comments.push(cfg.description.clone());
    }
    let table = Table { comments, columns, rows };
    let csv = out.join(format!("{}.csv", cfg.name));
    table.write(&csv).map_err(io(&csv))?;
    let side = out.join(format!("{}.invariants.json", cfg.name));
    write_json(&side, &res.invariants)?;
    println!("wrote {} ({} samples, {} steps)", csv.display(), res.times.len(), res.accepted_steps);
    if !res.invariants.within {
        return Err(CliError::Invariant(format!("see {}", side.display())));
    }
    Ok(())
}

fn cmd_sweep(cfg_path: &Path, out: &Path, ov: Overrides) -> Result<(), CliError> {
    let value = config::load(cfg_path)?;
    let cfg = config::parse(value.clone())?;
    let res = sweep::sweep(&value, ov)?;
    let csv = out.join(format!("{}.sweep.csv", cfg.name));
    res.table.write(&csv).map_err(io(&csv))?;
    println!("wrote {} ({} points)", csv.display(), res.table.rows.len());
    if !cfg.fit.is_empty() {
        let (header, cols) = format::read_table(&res.table.render()).map_err(CliError::Parse)?;
        let col = |name: &str| {
            header.iter().position(|h| h == name).map(|k| cols[k].clone()).ok_or_else(|| CliError::Parse(format!("fit column '{name}' is not in the sweep table")))
        };
        let mut reports = Vec::new();
        for f in &cfg.fit {
            let r = fit_range(f.family, &col(&f.x)?, &col(&f.y)?, f.range.0, f.range.1).map_err(CliError::Model)?;
            print_fit(&r, &f.x, &f.y);
            reports.push((f.x.clone(), f.y.clone(), f.range, r));
        }
        let json: Vec<FitReport> = reports.iter().map(|(x, y, range, r)| FitReport { x, y, range: *range, result: r }).collect();
        write_json(&out.join(format!("{}.fits.json", cfg.name)), &json)?;
    }
    match res.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn cmd_fit(table: &Path, family: Family, range: Option<(f64, f64)>, x: Option<String>, y: Option<String>, out: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(table).map_err(|e| CliError::Parse(format!("{}: {e}", table.display())))?;
    let (header, cols) = format::read_table(&text).map_err(|e| CliError::Parse(format!("{}: {e}", table.display())))?;
    let pick = |name: Option<String>, default: usize| -> Result<(String, Vec<f64>), CliError> {
        let k = match &name {
            Some(n) => header.iter().position(|h| h == n).ok_or_else(|| CliError::Parse(format!("no column '{n}' in {}", table.display())))?,
            None if default < header.len() => default,
            None => return Err(CliError::Parse("table needs at least two columns".into())),
        };
        Ok((header[k].clone(), cols[k].clone()))
    };
    let (xn, xs) = pick(x, 0)?;
    let (yn, ys) = pick(y, 1)?;
    let (lo, hi) = range.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let r = fit_range(family, &xs, &ys, lo, hi).map_err(CliError::Model)?;
    print_fit(&r, &xn, &yn);
    let stem = table.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "table".into());
    write_json(&out.join(format!("{stem}.fit.json")), &FitReport { x: &xn, y: &yn, range: (lo, hi), result: &r })
}

fn cmd_verify() -> Result<(), CliError> {
    let checks = fockflow::oracles::run_gate();
    let failed = checks.iter().filter(|c| !c.pass).count();
    for c in &checks {
        println!("{} {}: {:.3e} (limit {:.1e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.limit);
    }
    if failed > 0 {
        return Err(CliError::Invariant(format!("{failed} of {} oracle checks failed", checks.len())));
    }
    println!("all {} oracle checks passed", checks.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(k) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global() {
            eprintln!("could not size the worker pool: {e}");
        }
    }
    let ov = Overrides { rtol: cli.rtol, fixed_step: cli.fixed_step };
    let needs_out = !matches!(cli.command, Command::Verify);
    if needs_out {
        if let Err(e) = std::fs::create_dir_all(&cli.out) {
            eprintln!("i/o error: {}: {e}", cli.out.display());
            return ExitCode::from(1);
        }
    }
    let res = match cli.command {
        Command::Run { config } => cmd_run(&config, &cli.out, ov),
        Command::Sweep { config } => cmd_sweep(&config, &cli.out, ov),
        Command::Fit { table, family, range, x, y } => cmd_fit(&table, family, range, x, y, &cli.out),
        Command::Verify => cmd_verify(),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fockflow: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
