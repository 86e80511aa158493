use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use tnr_core::harness::{
    plot_steps, read_csv, run_sweep, run_sweep_with_threads, write_csv, write_csv_string, Axis,
    RowStatus, SeriesKey, SweepSpec, SweepStructure, TargetRule,
};
use tnr_core::io::{load_network, save_network};
use tnr_core::norm::method_norm;
use tnr_core::{
    frobenius_norm_sq, linear_norm, log_norm_reference, renormalize, InitParams, Method,
    RenormConfig, Status, TensorNetworkLayer,
};

#[derive(Parser)]
#[command(
    name = "tnr",
    version,
    about = "Partial-norm renormalization of tensor-network layers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a random network, normalize it and save it.
    Init(InitArgs),
    /// Report the norms of a saved network.
    Norm(NormArgs),
    /// Run a parameter sweep and write one CSV row per combination.
    Sweep(SweepArgs),
    /// Draw median step counts from a sweep CSV as an SVG line chart.
    Plot(PlotArgs),
}

#[derive(Args)]
struct ProtocolArgs {
    /// frobenius or linear.
    #[arg(long, default_value = "frobenius")]
    method: Method,
    #[arg(long, default_value_t = 1e-3)]
    range_lo: f64,
    #[arg(long, default_value_t = 1e3)]
    range_hi: f64,
    #[arg(long, default_value_t = 1000)]
    max_steps: usize,
}

#[derive(Args)]
struct InitArgs {
    /// tt, ttm or peps.
    #[arg(long, default_value = "tt")]
    structure: String,
    /// Number of nodes for tt/ttm, or ROWSxCOLS for peps.
    #[arg(long)]
    nodes: String,
    /// Physical dimension (the output dimension for ttm).
    #[arg(long)]
    phys: usize,
    /// Input physical dimension for ttm; defaults to --phys.
    #[arg(long)]
    phys_in: Option<usize>,
    #[arg(long)]
    bond: usize,
    #[arg(long, default_value_t = 1.0)]
    mean: f64,
    #[arg(long, default_value_t = 0.5)]
    std: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Absolute-value init; defaults to on for the linear method only.
    #[arg(long)]
    positive: Option<bool>,
    /// `auto` (number of entries of the represented tensor) or a number.
    #[arg(long, default_value = "auto")]
    target: String,
    #[arg(long, default_value_t = 0)]
    xi_seed: u64,
    #[command(flatten)]
    protocol: ProtocolArgs,
    /// Where to save the normalized network.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct NormArgs {
    /// A saved network file.
    path: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON sweep spec; grid flags are ignored when given.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Comma list of TT and TTM.
    #[arg(long, default_value = "TT,TTM")]
    structure: String,
    /// Comma list of frobenius and linear.
    #[arg(long, default_value = "frobenius")]
    method: String,
    /// Ranges such as `2:34` or lists such as `8,20,28,34`.
    #[arg(long, default_value = "2:34")]
    nodes: String,
    #[arg(long, default_value = "6:12")]
    phys: String,
    #[arg(long, default_value = "10")]
    bond: String,
    #[arg(long, default_value = "0:9")]
    seeds: String,
    #[arg(long, default_value_t = 1.0)]
    mean: f64,
    #[arg(long, default_value_t = 0.5)]
    std: f64,
    /// `auto` (p^N) or a number.
    #[arg(long, default_value = "auto")]
    target: String,
    #[arg(long, default_value_t = 1e-3)]
    range_lo: f64,
    #[arg(long, default_value_t = 1e3)]
    range_hi: f64,
    #[arg(long, default_value_t = 1000)]
    max_steps: usize,
    /// Largest node, in entries, before a combination is skipped.
    #[arg(long)]
    node_memory_cap: Option<usize>,
    /// Fill the wall_ms column; makes the CSV non-reproducible.
    #[arg(long)]
    timing: bool,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Output CSV; written to stdout when absent.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    csv: PathBuf,
    /// N, p or b.
    #[arg(long, default_value = "N")]
    x: Axis,
    /// p, N, b or structure. The structure always separates series.
    #[arg(long, default_value = "p")]
    series: SeriesKey,
    /// frobenius or linear; required when the CSV holds both.
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    out: PathBuf,
}

/// Parses `2:5,8,10:12` into `[2, 3, 4, 5, 8, 10, 11, 12]`.
fn parse_range<T>(text: &str) -> Result<Vec<T>>
where
    T: std::str::FromStr + Copy + PartialOrd + std::ops::AddAssign + From<u8>,
    T::Err: std::error::Error + Send + Sync + 'static,
{
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match part.split_once(':') {
            Some((lo, hi)) => {
                let mut v: T = lo
                    .trim()
                    .parse()
                    .with_context(|| format!("range start {lo:?}"))?;
                let hi: T = hi
                    .trim()
                    .parse()
                    .with_context(|| format!("range end {hi:?}"))?;
                if v > hi {
                    bail!("empty range {part:?}");
                }
                while v <= hi {
                    out.push(v);
                    v += T::from(1);
                }
            }
            None => out.push(part.parse().with_context(|| format!("value {part:?}"))?),
        }
    }
    if out.is_empty() {
        bail!("no values in {text:?}");
    }
    Ok(out)
}

fn parse_list<T>(text: &str) -> Result<Vec<T>>
where
    T: std::str::FromStr,
    T::Err: std::error::Error + Send + Sync + 'static,
{
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().with_context(|| format!("value {s:?}")))
        .collect()
}

fn build(args: &InitArgs, init: &InitParams) -> Result<TensorNetworkLayer> {
    let tn = match args.structure.to_ascii_lowercase().as_str() {
        "tt" => TensorNetworkLayer::build_tt(args.nodes.parse()?, args.phys, args.bond, init)?,
        "ttm" | "tt-m" => TensorNetworkLayer::build_ttm(
            args.nodes.parse()?,
            args.phys,
            args.phys_in.unwrap_or(args.phys),
            args.bond,
            init,
        )?,
        "peps" => {
            let (rows, cols) = args
                .nodes
                .split_once(['x', 'X'])
                .context("peps needs --nodes ROWSxCOLS")?;
            TensorNetworkLayer::build_peps(
                rows.parse()?,
                cols.parse()?,
                args.phys,
                args.bond,
                init,
            )?
        }
        other => bail!("unknown structure {other:?}, expected tt, ttm or peps"),
    };
    Ok(tn)
}

fn init(args: InitArgs) -> Result<bool> {
    let method = args.protocol.method;
    let positive = args.positive.unwrap_or(method == Method::Linear);
    let params = InitParams::gaussian(args.mean, args.std, args.seed).with_positive(positive);
    let mut tn = build(&args, &params)?;
    let target = match args.target.as_str() {
        "auto" => tn.element_count(),
        t => t.parse().with_context(|| format!("target {t:?}"))?,
    };
    let cfg = RenormConfig::new(method, target)
        .with_range(args.protocol.range_lo, args.protocol.range_hi)
        .with_max_steps(args.protocol.max_steps)
        .with_xi_seed(args.xi_seed);
    let report = renormalize(&mut tn, &cfg)?;
    save_network(&tn, &args.out)?;
    let summary = json!({
        "out": args.out,
        "structure": tn.structure().name(),
        "method": method.as_str(),
        "target": target,
        "status": report.status,
        "steps_total": report.steps_total,
        "steps_by_cause": report.steps_by_cause,
        "final_norm": report.final_norm,
        "cumulative_log_scale": report.cumulative_log_scale,
        "negative_total_seen": report.negative_total_seen,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(report.status == Status::Success)
}

fn norm(args: NormArgs) -> Result<bool> {
    let tn = load_network(&args.path)?;
    let log_ref = |m| {
        if tn.structure().is_chain() {
            log_norm_reference(&tn, m).ok()
        } else {
            None
        }
    };
    let summary = json!({
        "structure": tn.structure().name(),
        "nodes": tn.len(),
        "frobenius_norm_sq": frobenius_norm_sq(&tn),
        "frobenius_norm": method_norm(&tn, Method::Frobenius),
        "linear_norm": linear_norm(&tn),
        "log_frobenius_norm_sq": log_ref(Method::Frobenius),
        "log_linear_norm": log_ref(Method::Linear),
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(true)
}

fn sweep_spec(args: &SweepArgs) -> Result<SweepSpec> {
    if let Some(path) = &args.spec {
        return Ok(SweepSpec::load(path)?);
    }
    let mut spec = SweepSpec::new(
        parse_list::<SweepStructure>(&args.structure)?,
        parse_list::<Method>(&args.method)?,
        parse_range(&args.nodes)?,
        parse_range(&args.phys)?,
        parse_range(&args.bond)?,
        parse_range(&args.seeds)?,
    );
    spec.mean = args.mean;
    spec.std = args.std;
    spec.target = match args.target.as_str() {
        "auto" => TargetRule::Auto,
        t => TargetRule::Fixed(t.parse().with_context(|| format!("target {t:?}"))?),
    };
    spec.range_lo = args.range_lo;
    spec.range_hi = args.range_hi;
    spec.max_steps = args.max_steps;
    if let Some(cap) = args.node_memory_cap {
        spec.node_memory_cap = cap;
    }
    spec.record_timing = args.timing;
    spec.validate()?;
    Ok(spec)
}

fn sweep(args: SweepArgs) -> Result<bool> {
    let spec = sweep_spec(&args)?;
    let rows = match args.threads {
        Some(t) => run_sweep_with_threads(&spec, t)?,
        None => run_sweep(&spec)?,
    };
    match &args.csv {
        Some(path) => write_csv(&rows, path)?,
        None => print!("{}", write_csv_string(&rows)?),
    }
    let count = |s| rows.iter().filter(|r| r.status == s).count();
    eprintln!(
        "{} rows: {} success, {} failed, {} skipped",
        rows.len(),
        count(RowStatus::Success),
        count(RowStatus::Failed),
        count(RowStatus::Skipped)
    );
    Ok(true)
}

fn plot(args: PlotArgs) -> Result<bool> {
    let mut rows = read_csv(&args.csv)?;
    if let Some(m) = args.method {
        rows.retain(|r| r.method == m);
    }
    plot_steps(&rows, args.x, args.series, &args.out)?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Init(a) => init(a),
        Command::Norm(a) => norm(a),
        Command::Sweep(a) => sweep(a),
        Command::Plot(a) => plot(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        // The protocol ran but did not converge; the network was still saved.
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_and_lists() {
        assert_eq!(parse_range::<usize>("2:5,8").unwrap(), vec![2, 3, 4, 5, 8]);
        assert_eq!(parse_range::<u64>("7").unwrap(), vec![7]);
        assert!(parse_range::<usize>("5:2").is_err());
        assert!(parse_range::<usize>("").is_err());
        assert_eq!(
            parse_list::<SweepStructure>("TT, TTM").unwrap(),
            vec![SweepStructure::Tt, SweepStructure::Ttm]
        );
    }
}
