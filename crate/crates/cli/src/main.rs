//! `hmgn`: fit rank-r signals, generate test series and run experiments.
//!
//! Exit codes: 0 success, 1 failure while reading data or solving, 2 usage.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hmgn::bench::experiments::{parse_methods, parse_n_list, run_experiment, ExperimentKind, ExperimentSpec};
use hmgn::bench::generate::{add_noise, apply_gaps, parse_components, parse_gaps, Preset};
use hmgn::bench::io::{read_series, read_values, write_fit, write_values, WeightArg};
use hmgn::series::{generate_model_signal, GlrrVector};
use hmgn::solvers::{fit, glrr_relative_residual, Method, SolverConfig};
use serde_json::json;

#[derive(Parser)]
#[command(name = "hmgn", version, about = "Weighted Hankel low-rank signal estimation")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a rank-r signal to a CSV series.
    Fit(FitArgs),
    /// Write a synthetic series to CSV.
    Generate(GenerateArgs),
    /// Run an experiment suite and write CSV tables and plot scripts.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct FitArgs {
    /// CSV with a `value` column; empty or NaN cells are missing.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    rank: usize,
    /// mgn, s-mgn, vpgn or s-vpgn.
    #[arg(long, default_value = "s-mgn", value_parser = parse_method)]
    method: Method,
    /// identity, ar:phi1[,phi2..][:sigma2] or arinv:...
    #[arg(long, default_value = "identity", value_parser = parse_weights)]
    weights: WeightArg,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// File with r+1 starting GLRR coefficients, one per line.
    #[arg(long)]
    a0: Option<PathBuf>,
    /// Output table; defaults to `<input>.fit.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Metadata JSON; defaults to the output path with a `.json` extension.
    #[arg(long)]
    meta: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_parser = parse_preset, conflicts_with = "components", required_unless_present = "components")]
    preset: Option<Preset>,
    /// `c0,c1,..:alpha:omega:phi;...`
    #[arg(long)]
    components: Option<String>,
    /// Length for --components.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// 1-based inclusive ranges such as 10-19,35-39.
    #[arg(long)]
    gaps: Option<String>,
    /// Noise level relative to the signal norm; presets default to their own.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// known_minimum_accuracy, residual_vs_N, iteration_timing or gapped_fit.
    #[arg(long, value_parser = parse_kind)]
    kind: ExperimentKind,
    #[arg(long, default_value = "20,100,1000", value_parser = parse_ns)]
    n_list: NList,
    /// Comma-separated methods or `all`.
    #[arg(long, default_value = "all", value_parser = parse_method_list)]
    methods: MethodList,
    #[arg(long, default_value = "identity", value_parser = parse_weights)]
    weights: WeightArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
    /// Allow N above the default ceiling.
    #[arg(long)]
    allow_large: bool,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: hmgn::Error| e.to_string())
}

fn parse_weights(s: &str) -> Result<WeightArg, String> {
    WeightArg::parse(s).map_err(|e| e.to_string())
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    s.parse().map_err(|e: hmgn::Error| e.to_string())
}

fn parse_kind(s: &str) -> Result<ExperimentKind, String> {
    s.parse().map_err(|e: hmgn::Error| e.to_string())
}

// a bare Vec field would make clap expect repeated flags
#[derive(Clone)]
struct NList(Vec<usize>);

#[derive(Clone)]
struct MethodList(Vec<Method>);

fn parse_ns(s: &str) -> Result<NList, String> {
    parse_n_list(s).map(NList).map_err(|e| e.to_string())
}

fn parse_method_list(s: &str) -> Result<MethodList, String> {
    parse_methods(s).map(MethodList).map_err(|e| e.to_string())
}

type Failure = (u8, String);

fn fail<E: std::fmt::Display>(code: u8) -> impl Fn(E) -> Failure {
    move |e| (code, e.to_string())
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| (1, format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| (1, format!("{}: {e}", path.display())))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_fit(a: FitArgs) -> Result<(), Failure> {
    let x = read_series(open(&a.input)?).map_err(fail(1))?;
    let n = x.len();
    let w = a.weights.build(n, x.mask()).map_err(fail(1))?;
    let a0 = match &a.a0 {
        Some(p) => Some(GlrrVector::new(read_values(open(p)?).map_err(fail(1))?).map_err(fail(1))?),
        None => None,
    };
    let mut cfg = SolverConfig::new(a.method);
    cfg.max_iter = a.max_iter;
    let res = fit(&x, a.rank, &w, &cfg, a0.as_ref()).map_err(fail(1))?;
    let out = a.out.unwrap_or_else(|| with_suffix(&a.input, ".fit.csv"));
    let meta = a.meta.unwrap_or_else(|| out.with_extension("json"));
    write_fit(create(&out)?, &x, &res.signal).map_err(fail(1))?;
    let trace = &res.trace;
    let first = trace.iterations.first().map(|r| r.residual);
    let last = trace.iterations.last().map(|r| r.residual);
    let doc = json!({
        "method": a.method.name(),
        "rank": a.rank,
        "n": n,
        "observed": x.observed_count(),
        "iterations": trace.steps(),
        "initial_residual": first,
        "final_residual": last,
        "glrr": res.glrr.coeffs(),
        "glrr_relative_residual": glrr_relative_residual(&res.glrr, &res.signal).map_err(fail(1))?,
        "termination": trace.termination.to_string(),
        "trace": trace.iterations,
    });
    let text = serde_json::to_string_pretty(&doc).map_err(fail(1))?;
    std::fs::write(&meta, text + "\n").map_err(|e| (1, format!("{}: {e}", meta.display())))?;
    Ok(())
}

fn cmd_generate(a: GenerateArgs) -> Result<(), Failure> {
    let (signal, default_noise) = match (&a.preset, &a.components) {
        (Some(p), _) => (p.signal().map_err(fail(1))?, p.default_noise()),
        (None, Some(c)) => {
            let comps = parse_components(c).map_err(fail(2))?;
            let s = generate_model_signal(&comps, a.n).map_err(fail(2))?;
            (s.values().to_vec(), 0.0)
        }
        (None, None) => return Err((2, "either --preset or --components is required".into())),
    };
    let noise = a.noise.unwrap_or(default_noise);
    if !(noise >= 0.0) {
        return Err((2, "--noise must be non-negative".into()));
    }
    let mut values = add_noise(&signal, noise, a.seed);
    if let Some(g) = &a.gaps {
        let gaps = parse_gaps(g).map_err(fail(2))?;
        values = apply_gaps(&values, &gaps).map_err(fail(2))?;
    }
    write_values(create(&a.out)?, &values).map_err(fail(1))
}

fn cmd_experiment(a: ExperimentArgs) -> Result<(), Failure> {
    let spec = ExperimentSpec {
        kind: a.kind,
        n_list: a.n_list.0,
        methods: a.methods.0,
        weights: a.weights,
        seed: a.seed,
        allow_large: a.allow_large,
    };
    spec.validate().map_err(fail(2))?;
    let paths = run_experiment(&spec, &a.out_dir).map_err(fail(1))?;
    for p in paths {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Command::Fit(a) => cmd_fit(a),
        Command::Generate(a) => cmd_generate(a),
        Command::Experiment(a) => cmd_experiment(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("hmgn: {msg}");
            ExitCode::from(code)
        }
    }
}
