//! `basket`: prices basket puts with the PCA-based and comonotonic
//! approximations and reruns the reference experiments.
//!
//! Exit codes: 0 success, 2 invalid input, 3 a tolerance check failed,
//! 1 anything else (I/O).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use basket_core::experiments::{self, Method, OracleSettings, PriceReport};
use basket_core::{config, presets, BasketSpec, ConstraintMode, ExerciseStyle};
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "basket", version, about = "Basket put pricing by PCA-based and comonotonic dimension reduction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Price one basket.
    Price(PriceArgs),
    /// Recompute a published reference table (1-4).
    Tables(TablesArgs),
    /// Discretisation error against a fine-grid reference, N = m.
    Converge(ConvergeArgs),
    /// Temporal error of the EP and IT constraint updates at fixed m.
    TemporalStudy(TemporalArgs),
    /// Single-asset and Monte Carlo consistency checks.
    OracleCheck(OracleArgs),
}

#[derive(Args, Debug)]
struct SpecArgs {
    /// Built-in parameter set: A-F or HL-<T>-<K>-<sigma1>.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Basket description file (key = value lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// european or american; overrides the style of a config file.
    #[arg(long)]
    style: Option<ExerciseStyle>,
}

#[derive(Args, Debug)]
struct PriceArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// pca, comonotonic or both.
    #[arg(long, default_value = "both")]
    method: Method,
    /// American constraint update: ep or it.
    #[arg(long, default_value = "it")]
    mode: ConstraintMode,
    /// Grid points per spatial direction.
    #[arg(long, default_value_t = 1000)]
    m: usize,
    /// Time steps.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Write CSV here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Accepted for uniformity; pricing is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct TablesArgs {
    /// Table number.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=4))]
    which: u8,
    #[arg(long, default_value = "it")]
    mode: ConstraintMode,
    #[arg(long, default_value_t = 1000)]
    m: usize,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Exit with status 3 if any value deviates beyond its tolerance.
    #[arg(long)]
    check: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ConvergeArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, default_value = "both")]
    method: Method,
    #[arg(long, default_value = "it")]
    mode: ConstraintMode,
    /// Grid sizes: `a-b`, `a-b:step` or a comma list.
    #[arg(long, default_value = "10-100", value_parser = parse_list)]
    m: SizeList,
    /// Grid size (m = N) of the reference solution.
    #[arg(long, default_value_t = 1000)]
    reference_m: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TemporalArgs {
    /// Built-in parameter set (American style is used).
    #[arg(long, default_value = "A", conflicts_with = "config")]
    preset: String,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "both")]
    method: Method,
    #[arg(long, default_value_t = 100)]
    m: usize,
    /// Step counts: `a-b`, `a-b:step` or a comma list.
    #[arg(long, default_value = "10-100", value_parser = parse_list)]
    n: SizeList,
    /// Step count of the IT reference run.
    #[arg(long, default_value_t = 1000)]
    reference_n: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// Basket whose lower bound is checked by Monte Carlo.
    #[arg(long, default_value = "A", conflicts_with = "config")]
    preset: String,
    /// Single-asset contract (d = 1) for the closed-form and tree checks.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    m: usize,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 1_000_000)]
    paths: usize,
    #[arg(long, default_value_t = 10_000)]
    tree_steps: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
struct SizeList(Vec<usize>);

fn parse_list(s: &str) -> Result<SizeList, String> {
    let bad = || format!("cannot parse `{s}` as a list of sizes");
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    let values = if let Some((a, rest)) = s.split_once('-') {
        let (b, step) = match rest.split_once(':') {
            Some((b, step)) => (num(b)?, num(step)?),
            None => (num(rest)?, 1),
        };
        let a = num(a)?;
        if step == 0 || b < a {
            return Err(bad());
        }
        (a..=b).step_by(step).collect()
    } else {
        s.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if values.is_empty() {
        return Err(bad());
    }
    Ok(SizeList(values))
}

#[derive(Debug)]
enum Failure {
    Invalid(String),
    Tolerance(String),
    Io(String),
}

impl From<basket_core::Error> for Failure {
    fn from(e: basket_core::Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

fn read_config(path: &Path) -> Result<BasketSpec, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    config::parse_spec(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn resolve(args: &SpecArgs) -> Result<(String, BasketSpec), Failure> {
    match (&args.preset, &args.config) {
        (Some(id), None) => {
            let style = args.style.unwrap_or(ExerciseStyle::European);
            Ok((id.clone(), presets::lookup(id, style)?))
        }
        (None, Some(path)) => {
            let mut spec = read_config(path)?;
            if let Some(style) = args.style {
                spec.style = style;
            }
            let label = path.file_stem().map_or("config".into(), |s| s.to_string_lossy().into_owned());
            Ok((label, spec))
        }
        _ => Err(Failure::Invalid("give either --preset or --config".into())),
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Price(a) => {
            let (label, spec) = resolve(&a.spec)?;
            let report = experiments::price(&label, &spec, a.method, a.m, a.n, a.mode)?;
            let mut csv = PriceReport::csv_header();
            report.write_row(&mut csv);
            eprintln!("{label}: m = {}, N = {}, {:.2} s", a.m, a.n, report.seconds);
            emit(&a.out, csv.as_str())
        }
        Command::Tables(a) => {
            let result = experiments::tables(a.which, a.m, a.n, a.mode)?;
            emit(&a.out, result.to_csv().as_str())?;
            if a.which >= 3 && !result.monotone_in_strike() {
                eprintln!("warning: values are not increasing in the strike");
            }
            if a.check && !result.all_within_tolerance() {
                let failed: Vec<&str> =
                    result.rows.iter().filter(|r| !r.within_tolerance()).map(|r| r.reference.id).collect();
                return Err(Failure::Tolerance(format!("outside tolerance: {}", failed.join(", "))));
            }
            Ok(())
        }
        Command::Converge(a) => {
            let (_, spec) = resolve(&a.spec)?;
            let result = experiments::converge(&spec, a.method, &a.m.0, a.mode, None, a.reference_m)?;
            eprintln!("{}", result.summary());
            emit(&a.out, result.to_csv().as_str())
        }
        Command::TemporalStudy(a) => {
            let spec = match &a.config {
                Some(path) => read_config(path)?,
                None => presets::lookup(&a.preset, ExerciseStyle::American)?,
            };
            let spec = BasketSpec { style: ExerciseStyle::American, ..spec };
            let result = experiments::temporal_study(&spec, a.method, a.m, &a.n.0, a.reference_n)?;
            eprintln!("{}", result.summary());
            emit(&a.out, result.to_csv().as_str())
        }
        Command::OracleCheck(a) => {
            let single = match &a.config {
                Some(path) => read_config(path)?,
                None => experiments::default_single_asset(),
            };
            let basket = presets::lookup(&a.preset, ExerciseStyle::European)?;
            let settings = OracleSettings { m: a.m, n: a.n, tree_steps: a.tree_steps, paths: a.paths, seed: a.seed };
            let report = experiments::oracle_check(&single, &basket, &settings)?;
            emit(&a.out, report.to_csv().as_str())?;
            if !report.passed() {
                return Err(Failure::Tolerance("oracle check failed".into()));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Tolerance(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_lists() {
        assert_eq!(parse_list("10-13").unwrap().0, vec![10, 11, 12, 13]);
        assert_eq!(parse_list("20-100:40").unwrap().0, vec![20, 60, 100]);
        assert_eq!(parse_list("5, 7,9").unwrap().0, vec![5, 7, 9]);
        assert!(parse_list("9-3").is_err());
        assert!(parse_list("a").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
