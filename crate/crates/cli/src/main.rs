//! `linesim` — experiment runner for coding-delay simulation of dense and
//! chunked network codes over line networks.
//!
//! Verbs: `simulate` (trial batches judged against bounds), `bound`
//! (closed-form bounds only), `verify-lemmas` (rank-tail and
//! density-transfer verification battery), `sweep` (grid over k, L, q).
//! Exit codes: 0 success, 2 when the only problems are violated bound side
//! conditions, 1 on errors or failed verification.

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use linesim_core::config::{parse_config, FileConfig};
use linesim_core::experiment::{
    self, run_experiment, run_sweep, ExperimentSummary, OutputFormat, RegimeRow,
};
use linesim_core::{bounds, verify};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "linesim", version, about = "Line-network coding-delay simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded trial batches and judge them against the selected bounds.
    Simulate(RunArgs),
    /// Evaluate the selected closed-form bounds without simulating.
    Bound(RunArgs),
    /// Run the verification battery for the rank-tail and transfer facts.
    VerifyLemmas(VerifyArgs),
    /// Cartesian sweep over message size, link count, and chunk count.
    Sweep(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat key-value experiment file.
    #[arg(long)]
    config: PathBuf,
    /// Override experiment.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override experiment.trials.
    #[arg(long)]
    trials: Option<u64>,
    /// Override output.path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override output.format (csv | json).
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Optional experiment file; experiment.trials / experiment.seed seed
    /// the defaults when the flags are absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Monte Carlo budget per check.
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Optional report path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format: text (default) or json.
    #[arg(long)]
    format: Option<String>,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Bound(args) => bound(args),
        Command::VerifyLemmas(args) => verify_lemmas(args),
        Command::Sweep(args) => sweep(args),
    }
}

fn load(args: &RunArgs) -> Result<FileConfig> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let mut file = parse_config(&text).context("parsing config")?;
    if let Some(seed) = args.seed {
        file.experiment.master_seed = seed;
    }
    if let Some(trials) = args.trials {
        file.experiment.trials = trials;
    }
    if let Some(out) = &args.out {
        file.output_path = Some(out.clone());
    }
    if let Some(format) = &args.format {
        file.format = match format.as_str() {
            "csv" => OutputFormat::Csv,
            "json" => OutputFormat::Json,
            other => anyhow::bail!("unknown format {other:?} (expected csv or json)"),
        };
    }
    Ok(file)
}

fn write_or_print(body: &str, path: Option<&PathBuf>) -> Result<()> {
    match path {
        Some(p) => {
            let mut f = std::fs::File::create(p)
                .with_context(|| format!("creating {}", p.display()))?;
            f.write_all(body.as_bytes())?;
            f.flush()?;
        }
        None => print!("{body}"),
    }
    Ok(())
}

fn exit_for(rows: &[RegimeRow]) -> ExitCode {
    if rows.iter().any(|r| !r.constraints_ok) {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn report_violations(rows: &[RegimeRow]) {
    for row in rows {
        for v in &row.violated {
            eprintln!("warning: {}: side condition violated: {v}", row.regime.name());
        }
    }
}

fn simulate(args: RunArgs) -> Result<ExitCode> {
    let file = load(&args)?;
    let summary = run_experiment(&file.experiment).context("running experiment")?;
    let body = match file.format {
        OutputFormat::Csv => experiment::to_csv(&summary.rows),
        OutputFormat::Json => experiment::to_json(&summary),
    };
    write_or_print(&body, file.output_path.as_ref())?;
    eprintln!(
        "{} trials ({} censored), config {}",
        summary.trials, summary.censored, summary.config_hash
    );
    report_violations(&summary.rows);
    Ok(exit_for(&summary.rows))
}

fn bound(args: RunArgs) -> Result<ExitCode> {
    let file = load(&args)?;
    let cfg = &file.experiment;
    let mut any_violation = false;
    let mut json_rows = Vec::new();
    let mut text = String::new();
    for &regime in &cfg.regimes {
        let query = cfg.bound_query(regime)?;
        let value = bounds::evaluate(&query)?;
        any_violation |= !value.constraints_ok;
        text.push_str(&format!(
            "{} k={} L={} q={} eps={}: bound {:.6} ({}{})\n",
            regime.name(),
            query.k,
            query.l,
            query.q,
            query.epsilon,
            value.value,
            if value.constraints_ok {
                "side conditions hold"
            } else {
                "side conditions violated"
            },
            if value.asymptotic_note {
                "; leading asymptotic form"
            } else {
                ""
            },
        ));
        for v in &value.violated {
            text.push_str(&format!("  violated: {v}\n"));
        }
        json_rows.push(serde_json::json!({
            "regime": regime.name(),
            "k": query.k,
            "l": query.l,
            "q": query.q,
            "epsilon": query.epsilon,
            "bound": value.value,
            "constraints_ok": value.constraints_ok,
            "violated": value.violated,
            "asymptotic_note": value.asymptotic_note,
        }));
    }
    let body = match file.format {
        OutputFormat::Csv => text.clone(),
        OutputFormat::Json => format!(
            "{}\n",
            serde_json::to_string_pretty(&json_rows).expect("serializable")
        ),
    };
    write_or_print(&body, file.output_path.as_ref())?;
    Ok(if any_violation {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn verify_lemmas(args: VerifyArgs) -> Result<ExitCode> {
    let mut trials = 100_000u64;
    let mut seed = 0u64;
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let file = parse_config(&text).context("parsing config")?;
        trials = file.experiment.trials;
        seed = file.experiment.master_seed;
    }
    let trials = args.trials.unwrap_or(trials);
    let seed = args.seed.unwrap_or(seed);
    let reports = verify::verify_all(trials, seed);
    let mut all_pass = true;
    let mut text = String::new();
    for r in &reports {
        text.push_str(&format!(
            "{}: {} ({})\n",
            r.name,
            if r.pass { "PASS" } else { "FAIL" },
            r.detail
        ));
        all_pass &= r.pass;
    }
    let body = match args.format.as_deref() {
        None | Some("text") => text,
        Some("json") => format!(
            "{}\n",
            serde_json::to_string_pretty(&reports).expect("serializable")
        ),
        Some(other) => anyhow::bail!("unknown format {other:?} (expected text or json)"),
    };
    write_or_print(&body, args.out.as_ref())?;
    Ok(if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn sweep(args: RunArgs) -> Result<ExitCode> {
    let file = load(&args)?;
    let spec = file.sweep.clone().unwrap_or_else(|| {
        linesim_core::config::SweepSpec {
            k: vec![file.experiment.network.code.k],
            l: vec![file.experiment.network.links()],
            q: vec![file.experiment.network.code.q],
        }
    });
    let summaries: Vec<ExperimentSummary> =
        run_sweep(&file.experiment, &spec.k, &spec.l, &spec.q).context("running sweep")?;
    let rows: Vec<RegimeRow> = summaries.iter().flat_map(|s| s.rows.clone()).collect();
    let body = match file.format {
        OutputFormat::Csv => experiment::to_csv(&rows),
        OutputFormat::Json => {
            let payload: Vec<_> = summaries
                .iter()
                .map(|s| {
                    serde_json::json!({
                        "config_hash": s.config_hash,
                        "master_seed": s.master_seed,
                        "rows": s.rows,
                    })
                })
                .collect();
            format!(
                "{}\n",
                serde_json::to_string_pretty(&payload).expect("serializable")
            )
        }
    };
    write_or_print(&body, file.output_path.as_ref())?;
    eprintln!(
        "{} grid cells, {} rows",
        summaries.len(),
        rows.len()
    );
    report_violations(&rows);
    Ok(exit_for(&rows))
}
