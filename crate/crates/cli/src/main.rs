use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use copeq::clustering::{cluster_copulas, cluster_copulas_tuned};
use copeq::harness::{builtin_design, builtin_designs, emit_report, run_experiment, ExperimentConfig, ReportFormat};
use copeq::io::{load_csv, CsvOptions, Header, LabeledSample};
use copeq::ksample::{ksample_test, pairwise_anova, Pairing, TestConfig};
use copeq::tuning::{tune_alpha, TuningConfig, TuningResult};
use copeq::{pseudo_observations, spearman_rho, Error, Sample, TiesPolicy};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "copeq", version, about = "K-sample tests for equality of copulas")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test whether K populations share one copula.
    Test(DataArgs),
    /// Pairwise two-sample p-values.
    Anova(DataArgs),
    /// Group populations that share a copula.
    Cluster(DataArgs),
    /// Calibrate the penalty factor alpha on the pooled data.
    Tune(DataArgs),
    /// Run a Monte Carlo design.
    Simulate(SimArgs),
    /// Spearman's rho of two-column samples.
    Spearman(InputArgs),
}

#[derive(Args)]
struct InputArgs {
    /// CSV files, one sample each (or one file split by --group-col).
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Column holding group labels (header name or 0-based index).
    #[arg(long)]
    group_col: Option<String>,
    /// Header row handling: auto, yes or no.
    #[arg(long, default_value = "auto", value_parser = parse_header)]
    header: Header,
    /// Tie handling: error or average (midranks).
    #[arg(long, default_value = "error")]
    ties: TiesPolicy,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DataArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Nominal level.
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    /// Fixed penalty factor; tuned on the data when absent.
    #[arg(long)]
    alpha: Option<f64>,
    /// Largest coefficient norm.
    #[arg(long, default_value_t = 3)]
    dmax: usize,
    /// paired or independent.
    #[arg(long, default_value = "paired")]
    pairing: Pairing,
    /// Seed of the tuning splits.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of random splits used for tuning.
    #[arg(long, default_value_t = TuningConfig::default().n_reps)]
    tune_reps: usize,
    /// Sub-populations per tuning split.
    #[arg(long, default_value_t = TuningConfig::default().k_prime)]
    kprime: usize,
    /// json, or csv for anova and tune.
    #[arg(long, default_value = "json")]
    format: String,
}

#[derive(Args)]
struct SimArgs {
    /// Built-in design name.
    #[arg(long, conflicts_with = "config", required_unless_present_any = ["config", "list"])]
    design: Option<String>,
    /// Design config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// List built-in designs.
    #[arg(long)]
    list: bool,
    /// Override a config key (key=value), repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Base seed of the design.
    #[arg(long)]
    seed: Option<u64>,
    /// Nominal level.
    #[arg(long)]
    level: Option<f64>,
    /// Fixed penalty factor instead of tuning.
    #[arg(long)]
    alpha: Option<f64>,
    /// Largest coefficient norm.
    #[arg(long)]
    dmax: Option<usize>,
    /// paired or independent.
    #[arg(long)]
    pairing: Option<String>,
    /// Replications per cell.
    #[arg(long)]
    replications: Option<usize>,
    /// json, csv or dat.
    #[arg(long, default_value = "csv")]
    format: ReportFormat,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_header(s: &str) -> Result<Header, String> {
    match s {
        "auto" => Ok(Header::Auto),
        "yes" | "true" => Ok(Header::Present),
        "no" | "false" => Ok(Header::Absent),
        _ => Err(format!("expected auto, yes or no, got '{s}'")),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::DegenerateVariance { .. } => 3,
        Error::InvalidArgument(_) | Error::UnsupportedFormat(_) => 1,
        _ => 2,
    }
}

fn load(input: &InputArgs) -> copeq::Result<Vec<LabeledSample>> {
    let opts = CsvOptions {
        header: input.header.clone(),
        group_col: input.group_col.clone(),
    };
    let mut out = Vec::new();
    for f in &input.files {
        out.extend(load_csv(f, &opts)?);
    }
    if input.ties == TiesPolicy::Average {
        for l in &out {
            if pseudo_observations(&l.sample, TiesPolicy::Average).is_ok_and(|ps| ps.had_ties()) {
                log::warn!("{}: tied values ranked by midranks", l.label);
            }
        }
    }
    Ok(out)
}

fn write_out(path: Option<&PathBuf>, bytes: &[u8]) -> copeq::Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn json_bytes(v: &Value) -> copeq::Result<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(v)?;
    b.push(b'\n');
    Ok(b)
}

fn test_config(a: &DataArgs, alpha: f64) -> TestConfig {
    TestConfig {
        d_max: a.dmax,
        alpha_penalty: alpha,
        pairing: a.pairing,
        level: a.level,
        ties: a.input.ties,
        ..TestConfig::default()
    }
}

fn tuning_config(a: &DataArgs) -> TuningConfig {
    TuningConfig {
        k_prime: a.kprime,
        n_reps: a.tune_reps,
        seed: a.seed,
        ..TuningConfig::default()
    }
}

/// The fixed alpha, or the tuned one together with its tuning record.
fn resolve_alpha(a: &DataArgs, samples: &[Sample]) -> copeq::Result<(f64, Option<TuningResult>)> {
    match a.alpha {
        Some(alpha) => Ok((alpha, None)),
        None => {
            let t = tune_alpha(samples, &tuning_config(a), &test_config(a, 1.0))?;
            Ok((t.alpha_hat, Some(t)))
        }
    }
}

fn alpha_json(alpha: f64, t: &Option<TuningResult>) -> Value {
    json!({
        "value": alpha,
        "tuned": t.is_some(),
        "exhausted": t.as_ref().is_some_and(|t| t.exhausted),
    })
}

fn split(data: Vec<LabeledSample>) -> (Vec<String>, Vec<Sample>) {
    data.into_iter().map(|l| (l.label, l.sample)).unzip()
}

fn check_format(a: &DataArgs, allowed: &[&str]) -> copeq::Result<()> {
    if allowed.contains(&a.format.as_str()) {
        Ok(())
    } else {
        Err(Error::UnsupportedFormat(a.format.clone()))
    }
}

fn cmd_test(a: &DataArgs) -> copeq::Result<Vec<u8>> {
    check_format(a, &["json"])?;
    let (labels, samples) = split(load(&a.input)?);
    let (alpha, tuning) = resolve_alpha(a, &samples)?;
    let res = ksample_test(&samples, &test_config(a, alpha))?;
    json_bytes(&json!({
        "labels": labels,
        "alpha": alpha_json(alpha, &tuning),
        "result": res,
    }))
}

fn cmd_anova(a: &DataArgs) -> copeq::Result<Vec<u8>> {
    check_format(a, &["json", "csv"])?;
    let (labels, samples) = split(load(&a.input)?);
    let (alpha, tuning) = resolve_alpha(a, &samples)?;
    let pv = pairwise_anova(&samples, &test_config(a, alpha))?;
    if a.format == "csv" {
        let mut s = format!(",{}\n", labels.join(","));
        for (l, row) in labels.iter().zip(&pv) {
            let cells: Vec<String> = row.iter().map(|p| format!("{p:.6e}")).collect();
            s += &format!("{l},{}\n", cells.join(","));
        }
        return Ok(s.into_bytes());
    }
    json_bytes(&json!({
        "labels": labels,
        "alpha": alpha_json(alpha, &tuning),
        "p_values": pv,
    }))
}

fn cmd_cluster(a: &DataArgs) -> copeq::Result<Vec<u8>> {
    check_format(a, &["json"])?;
    let (labels, samples) = split(load(&a.input)?);
    let (alpha, tuning) = resolve_alpha(a, &samples)?;
    let cfg = test_config(a, alpha);
    let part = match tuning {
        Some(_) => cluster_copulas_tuned(&samples, &cfg, &tuning_config(a))?,
        None => cluster_copulas(&samples, &cfg)?,
    };
    let named: Vec<Vec<&str>> = part
        .clusters
        .iter()
        .map(|c| c.iter().map(|&i| labels[i].as_str()).collect())
        .collect();
    json_bytes(&json!({
        "labels": labels,
        "alpha": alpha_json(alpha, &tuning),
        "clusters": named,
        "partition": part,
    }))
}

fn cmd_tune(a: &DataArgs) -> copeq::Result<Vec<u8>> {
    check_format(a, &["json", "csv"])?;
    let (_, samples) = split(load(&a.input)?);
    let t = tune_alpha(&samples, &tuning_config(a), &test_config(a, 1.0))?;
    if a.format == "csv" {
        let mut s = String::from("alpha,n_single,unanimous\n");
        for r in &t.table {
            s += &format!("{},{},{}\n", r.alpha, r.n_single, r.unanimous);
        }
        return Ok(s.into_bytes());
    }
    json_bytes(&serde_json::to_value(&t)?)
}

fn cmd_spearman(a: &InputArgs) -> copeq::Result<Vec<u8>> {
    let data = load(a)?;
    let mut out = Vec::new();
    for l in &data {
        let rho = spearman_rho(&pseudo_observations(&l.sample, a.ties)?)?;
        out.push(json!({ "label": l.label, "n": l.sample.n(), "rho": rho }));
    }
    json_bytes(&Value::Array(out))
}

fn cmd_simulate(a: &SimArgs) -> copeq::Result<Vec<u8>> {
    if a.list {
        return Ok(builtin_designs().iter().map(|d| format!("{d}\n")).collect::<String>().into_bytes());
    }
    let text = match (&a.design, &a.config) {
        (Some(name), _) => builtin_design(name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown design '{name}'")))?
            .to_owned(),
        (None, Some(path)) => std::fs::read_to_string(path)?,
        (None, None) => unreachable!("clap requires --design or --config"),
    };
    let mut overrides = Vec::new();
    for kv in &a.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        overrides.push((k.trim().to_owned(), v.trim().to_owned()));
    }
    let flags = [
        ("seed", a.seed.map(|v| v.to_string())),
        ("level", a.level.map(|v| v.to_string())),
        ("alpha", a.alpha.map(|v| v.to_string())),
        ("dmax", a.dmax.map(|v| v.to_string())),
        ("pairing", a.pairing.clone()),
        ("replications", a.replications.map(|v| v.to_string())),
    ];
    overrides.extend(flags.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_owned(), v))));
    let cfg = ExperimentConfig::parse(&text, &overrides)?;
    let report = run_experiment(&cfg)?;
    log::info!("{} finished in {:.1}s", cfg.design_id, report.runtime_secs);
    emit_report(&report, a.format)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let (bytes, out) = match &cli.command {
        Command::Test(a) => (cmd_test(a), a.input.out.as_ref()),
        Command::Anova(a) => (cmd_anova(a), a.input.out.as_ref()),
        Command::Cluster(a) => (cmd_cluster(a), a.input.out.as_ref()),
        Command::Tune(a) => (cmd_tune(a), a.input.out.as_ref()),
        Command::Simulate(a) => (cmd_simulate(a), a.out.as_ref()),
        Command::Spearman(a) => (cmd_spearman(a), a.out.as_ref()),
    };
    match bytes.and_then(|b| write_out(out, &b)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("copeq: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
