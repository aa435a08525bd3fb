use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use helpkit_core::csp::DEFAULT_BUDGET;
use helpkit_core::lp::candidate_orders;
use helpkit_core::report::{self, render_tuples, GoldenSource, ReportOptions};
use helpkit_core::st::{self, StError};
use helpkit_core::{chain_solve, ChainConfig, CharTable, RowSelection, SolveError, SolveMode};

/// Partial-augmentation constraints for torsion units of integral group rings.
#[derive(Debug, Parser)]
#[command(name = "helpkit", version)]
struct Cli {
    /// Node budget for the solver; overrides HELPKIT_BUDGET.
    #[arg(long, global = true, env = "HELPKIT_BUDGET")]
    budget: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Joint,
    CaseSplit,
}

impl From<Mode> for SolveMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Joint => SolveMode::Joint,
            Mode::CaseSplit => SolveMode::CaseSplit,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Parse a table, check its invariants and, if complete, orthogonality.
    Validate { file: PathBuf },
    /// Enumerate partial augmentations of units of one order.
    Solve {
        /// Table file, or the name of a bundled table (a5, s3, co1, co2, co3).
        #[arg(long)]
        table: String,
        #[arg(long)]
        order: u64,
        /// Only use these character ids.
        #[arg(long, value_delimiter = ',')]
        chars: Option<Vec<String>>,
        #[arg(long, value_enum, default_value = "joint")]
        mode: Mode,
        /// Write the result here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Try to exclude units of order s*t with (s,t)-constant characters.
    RuleOut {
        #[arg(long)]
        table: String,
        /// The two primes, as s,t.
        #[arg(long, value_delimiter = ',', num_args = 1)]
        primes: Vec<u64>,
        /// Explicit rows as char@l,l,... separated by ';' (default: automatic).
        #[arg(long)]
        rows: Option<String>,
        /// Largest character sum scanned by the automatic selection.
        #[arg(long, default_value_t = 5)]
        max_summands: usize,
        /// Print JSON instead of the table.
        #[arg(long)]
        json: bool,
    },
    /// Rerun every pinned computation and diff against the golden datasets.
    Report {
        /// Skip checks carrying any of these tags (e.g. co1-55-65, co3-4-14, co2-22).
        #[arg(long, value_delimiter = ',')]
        skip: Vec<String>,
        /// Read golden files from this directory instead of the bundled copies.
        #[arg(long)]
        golden: Option<PathBuf>,
        /// A complete table for optional checks, as group=path.
        #[arg(long = "full-table")]
        full_table: Vec<String>,
        #[arg(long, value_enum, default_value = "joint")]
        mode: Mode,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failure(String),
    #[error("{0}")]
    Budget(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Failure(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Budget(_) => 3,
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::BudgetExceeded(_) => CliError::Budget(e.to_string()),
            e => CliError::Failure(e.to_string()),
        }
    }
}

fn load_table(spec: &str) -> Result<CharTable, CliError> {
    let p = Path::new(spec);
    if !p.exists() {
        if let Some(src) = report::bundled_table_source(spec) {
            return CharTable::parse(src).map_err(|e| CliError::Failure(e.to_string()));
        }
    }
    CharTable::from_path(p).map_err(|e| CliError::Failure(format!("{spec}: {e}")))
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(p) => std::fs::write(p, text)
            .map_err(|e| CliError::Failure(format!("cannot write {}: {e}", p.display()))),
    }
}

fn validate(file: &Path) -> Result<(), CliError> {
    let t = CharTable::from_path(file)
        .map_err(|e| CliError::Failure(format!("{}: {e}", file.display())))?;
    println!(
        "{}: {} classes, {} characters",
        t.group_name,
        t.classes.len(),
        t.characters.len()
    );
    if !t.is_complete() {
        println!("partial table: orthogonality not checked");
        return Ok(());
    }
    let r = t
        .validate_orthogonality()
        .map_err(|e| CliError::Failure(e.to_string()))?;
    if r.ok() {
        println!("orthogonality: {} pairs clean", r.checked);
        Ok(())
    } else {
        for (a, b, s) in &r.failures {
            println!("orthogonality fails for ({a}, {b}): inner sum {s}");
        }
        Err(CliError::Failure(format!(
            "{} of {} pairs fail orthogonality",
            r.failures.len(),
            r.checked
        )))
    }
}

fn solve(
    table: &str,
    k: u64,
    chars: Option<Vec<String>>,
    mode: Mode,
    out: Option<&Path>,
    budget: u64,
) -> Result<(), CliError> {
    let t = load_table(table)?;
    if !candidate_orders(&t).iter().any(|c| c.order == k) {
        return Err(CliError::Usage(format!(
            "{k} does not divide the exponent of {}",
            t.group_name
        )));
    }
    let cfg = ChainConfig {
        mode: mode.into(),
        characters: chars,
        budget,
        ..ChainConfig::default()
    };
    let r = chain_solve(&t, k, &cfg)?;
    let tuples = r.top_tuples();
    let classes: Vec<String> = r.vars.iter().map(|v| v.class.clone()).collect();
    let mut text = render_tuples(
        &t.group_name.to_lowercase(),
        k,
        &classes,
        &tuples,
        r.all_rational(),
    );
    if !r.chain_vars.is_empty() {
        text.push_str("# with powers:\n");
        for s in &r.solutions {
            let mut line = format!("# {}", s.canonical());
            for (tag, vals) in s.chain.iter().rev() {
                let names: Vec<&str> = r.chain_vars[tag].iter().map(|v| v.class.as_str()).collect();
                line.push_str(&format!(
                    "  u^{} [{}] = {}",
                    k / tag,
                    names.join(" "),
                    helpkit_core::csp::fmt_tuple(vals)
                ));
            }
            line.push_str(if s.is_rational() { "  rational" } else { "" });
            text.push_str(&line);
            text.push('\n');
        }
    }
    let mut seen = BTreeSet::new();
    for n in r
        .skipped
        .iter()
        .filter(|n| seen.insert(n.character.clone()))
    {
        text.push_str(&format!("# skipped {}: {}\n", n.character, n.reason));
    }
    emit(&text, out)
}

fn parse_rows(t: &CharTable, s: u64, tt: u64, spec: &str) -> Result<RowSelection, CliError> {
    let mut rows = Vec::new();
    for item in spec.split(';').map(str::trim).filter(|x| !x.is_empty()) {
        let (c, ls) = item
            .split_once('@')
            .ok_or_else(|| CliError::Usage(format!("row spec {item} is not char@l,l")))?;
        let ch = report::lookup_character(t, c)
            .ok_or_else(|| CliError::Usage(format!("unknown character {c}")))?;
        for l in ls.split(',') {
            let l: u64 = l
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad l in {item}")))?;
            rows.push(st::st_row(t, &ch, s, tt, l).map_err(st_error)?);
        }
    }
    Ok(RowSelection::Explicit(rows))
}

fn st_error(e: StError) -> CliError {
    match e {
        StError::NotPrime(_) | StError::EqualPrimes => CliError::Usage(e.to_string()),
        e => CliError::Failure(e.to_string()),
    }
}

fn rule_out(
    table: &str,
    primes: &[u64],
    rows: Option<&str>,
    max_summands: usize,
    json: bool,
) -> Result<(), CliError> {
    let &[s, tt] = primes else {
        return Err(CliError::Usage(
            "--primes takes exactly two primes s,t".into(),
        ));
    };
    let t = load_table(table)?;
    let sel = match rows {
        Some(spec) => parse_rows(&t, s, tt, spec)?,
        None => RowSelection::Auto { max_summands },
    };
    let r = st::rule_out_order(&t, s, tt, sel).map_err(st_error)?;
    if json {
        let v = serde_json::to_string_pretty(&r).map_err(|e| CliError::Failure(e.to_string()))?;
        println!("{v}");
    } else {
        print!("{}", r.render_table());
    }
    Ok(())
}

fn run_report(
    skip: Vec<String>,
    golden: Option<PathBuf>,
    full: &[String],
    mode: Mode,
    budget: u64,
) -> Result<(), CliError> {
    let mut opts = ReportOptions {
        skip: skip.into_iter().collect::<BTreeSet<_>>(),
        budget,
        mode: mode.into(),
        goldens: golden.map(GoldenSource::Dir).unwrap_or_default(),
        ..ReportOptions::default()
    };
    for f in full {
        let (g, p) = f
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--full-table expects group=path, got {f}")))?;
        let t = CharTable::from_path(p).map_err(|e| CliError::Failure(format!("{p}: {e}")))?;
        opts.full_tables.insert(g.to_lowercase(), t);
    }
    let r = report::run(&opts).map_err(|e| CliError::Failure(e.to_string()))?;
    print!("{r}");
    if r.budget_exceeded() {
        Err(CliError::Budget(
            "a computation exceeded its node budget".into(),
        ))
    } else if r.failed() > 0 {
        Err(CliError::Failure(format!("{} checks failed", r.failed())))
    } else {
        Ok(())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let budget = cli.budget.unwrap_or(DEFAULT_BUDGET);
    let res = match cli.cmd {
        Cmd::Validate { file } => validate(&file),
        Cmd::Solve {
            table,
            order,
            chars,
            mode,
            out,
        } => solve(&table, order, chars, mode, out.as_deref(), budget),
        Cmd::RuleOut {
            table,
            primes,
            rows,
            max_summands,
            json,
        } => rule_out(&table, &primes, rows.as_deref(), max_summands, json),
        Cmd::Report {
            skip,
            golden,
            full_table,
            mode,
        } => run_report(skip, golden, &full_table, mode, budget),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("helpkit: {e}");
            ExitCode::from(e.code())
        }
    }
}
