// SPDX-License-Identifier: MIT OR Apache-2.0

use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{error::ErrorKind, Args, Parser, Subcommand};

use depsmuce::experiments::{emit_tables, run_scenario_cached, Scenario, FULL_REPS, KDIFF_LABELS};
use depsmuce::multiscale::calibration::{QuantileCache, DEFAULT_CALIBRATION_SEED, DEFAULT_MC_REPS};
use depsmuce::multiscale::default_min_len;
use depsmuce::segmentation::{detect_cached, DetectorConfig, Threshold};
use depsmuce::variance::VarianceEstimator;
use depsmuce::Error;

const EXIT_IO: u8 = 1;
const EXIT_MALFORMED: u8 = 2;
const EXIT_DEGENERATE: u8 = 3;
const EXIT_BAD_FLAGS: u8 = 4;
const EXIT_UNKNOWN_SCENARIO: u8 = 5;

#[derive(Parser)]
#[command(
    name = "depsmuce",
    version,
    about = "Multiscale change-point estimation under dependent noise"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate change points in a series (one value per line).
    Detect(DetectArgs),
    /// Monte-Carlo quantile of the null multiscale statistic.
    Quantile(QuantileArgs),
    /// Long-run variance estimate of a series.
    Lrv(LrvArgs),
    /// Run a simulation scenario and write its tables.
    Bench(BenchArgs),
    /// Print the series one replicate of a scenario observes.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct CacheArgs {
    /// Quantile cache file (overrides DEPSMUCE_CACHE).
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Do not read or write the quantile cache.
    #[arg(long, conflicts_with = "cache")]
    no_cache: bool,
}

#[derive(Args)]
struct DetectArgs {
    /// Input file, or '-' for standard input.
    input: String,
    #[arg(long, conflicts_with = "q")]
    alpha: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    /// Smallest tested interval length.
    #[arg(long)]
    min_scale: Option<usize>,
    /// block | iid-diff | fixed:SIGMA
    #[arg(long, default_value = "block", value_parser = parse_lrv)]
    lrv: LrvChoice,
    #[arg(long)]
    block_length: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_MC_REPS)]
    mc_reps: usize,
    #[arg(long, default_value_t = DEFAULT_CALIBRATION_SEED)]
    seed: u64,
    /// Pretty-print the fit.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    cache: CacheArgs,
}

#[derive(Args)]
struct QuantileArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    min_scale: Option<usize>,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_MC_REPS)]
    mc_reps: usize,
    #[arg(long, default_value_t = DEFAULT_CALIBRATION_SEED)]
    seed: u64,
    #[command(flatten)]
    cache: CacheArgs,
}

#[derive(Args)]
struct LrvArgs {
    input: String,
    /// block | iid-diff
    #[arg(long, default_value = "block", value_parser = parse_lrv)]
    method: LrvChoice,
    #[arg(long)]
    block_length: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    /// Builtin scenario name (ma1_01, ma1_03, ma4, arma26) or scenario JSON file.
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Use the full replicate count (1000).
    #[arg(long)]
    full: bool,
    #[arg(long)]
    mc_reps: Option<usize>,
    #[command(flatten)]
    cache: CacheArgs,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 0)]
    rep: usize,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, Debug)]
enum LrvChoice {
    Block,
    IidDiff,
    Fixed(f64),
}

fn parse_lrv(s: &str) -> Result<LrvChoice, String> {
    match s {
        "block" => Ok(LrvChoice::Block),
        "iid-diff" => Ok(LrvChoice::IidDiff),
        _ => match s.strip_prefix("fixed:") {
            Some(v) => v
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite() && *x > 0.0)
                .map(LrvChoice::Fixed)
                .ok_or_else(|| format!("invalid fixed sigma `{v}`")),
            None => Err(format!(
                "unknown estimator `{s}` (expected block, iid-diff or fixed:SIGMA)"
            )),
        },
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    fn flags(message: impl Into<String>) -> Self {
        Self::new(EXIT_BAD_FLAGS, message)
    }
}

/// Maps library errors onto the exit-code taxonomy; `InvalidInput` counts as a flag problem.
impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Degenerate(_) => EXIT_DEGENERATE,
            Error::UnknownScenario(_) => EXIT_UNKNOWN_SCENARIO,
            Error::InvalidInput(_) | Error::NonStationary(_) => EXIT_BAD_FLAGS,
            Error::Json(_) => EXIT_MALFORMED,
            Error::Io(_) => EXIT_IO,
        };
        Self::new(code, e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_BAD_FLAGS),
            };
        }
    };
    let result = match cli.command {
        Command::Detect(a) => cmd_detect(a),
        Command::Quantile(a) => cmd_quantile(a),
        Command::Lrv(a) => cmd_lrv(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("depsmuce: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn read_series(input: &str) -> Result<Vec<f64>, Failure> {
    let text = if input == "-" {
        let mut s = String::new();
        io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| Failure::new(EXIT_MALFORMED, e.to_string()))?;
        s
    } else {
        std::fs::read_to_string(input).map_err(|e| Failure::new(EXIT_MALFORMED, format!("{input}: {e}")))?
    };
    parse_series(&text)
}

/// One float per line; a non-numeric first line is taken as a header.
fn parse_series(text: &str) -> Result<Vec<f64>, Failure> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match line.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            _ if idx == 0 => continue,
            _ => {
                return Err(Failure::new(
                    EXIT_MALFORMED,
                    format!("line {}: cannot parse `{line}` as a number", idx + 1),
                ))
            }
        }
    }
    Ok(out)
}

fn cache_path(args: &CacheArgs) -> Option<PathBuf> {
    if args.no_cache {
        return None;
    }
    if let Some(p) = &args.cache {
        return Some(p.clone());
    }
    if let Some(p) = std::env::var_os("DEPSMUCE_CACHE") {
        return Some(PathBuf::from(p));
    }
    let base = std::env::var_os("XDG_CACHE_HOME")
        .map(PathBuf::from)
        .or_else(|| std::env::var_os("HOME").map(|h| Path::new(&h).join(".cache")))?;
    Some(base.join("depsmuce").join("quantiles.json"))
}

fn load_cache(path: Option<&Path>) -> QuantileCache {
    match path.map(QuantileCache::load) {
        Some(Ok(c)) => c,
        Some(Err(e)) => {
            eprintln!("depsmuce: ignoring unreadable quantile cache: {e}");
            QuantileCache::default()
        }
        None => QuantileCache::default(),
    }
}

fn store_cache(path: Option<&Path>, cache: &QuantileCache) {
    if let Some(p) = path.filter(|_| cache.is_dirty()) {
        if let Err(e) = cache.save(p) {
            eprintln!("depsmuce: could not write quantile cache {}: {e}", p.display());
        }
    }
}

fn check_alpha(alpha: f64) -> CmdResult {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Failure::flags(format!("--alpha must lie in (0, 1), got {alpha}")))
    }
}

fn cmd_detect(a: DetectArgs) -> CmdResult {
    let y = read_series(&a.input)?;
    if y.len() < 4 {
        return Err(Failure::new(
            EXIT_MALFORMED,
            format!("need at least 4 observations, got {}", y.len()),
        ));
    }
    let threshold = match (a.alpha, a.q) {
        (_, Some(q)) => Threshold::Fixed(q),
        (Some(alpha), None) => {
            check_alpha(alpha)?;
            Threshold::Alpha(alpha)
        }
        (None, None) => Threshold::Alpha(0.5),
    };
    let variance = match a.lrv {
        LrvChoice::Block => VarianceEstimator::BlockDiff {
            block_length: a.block_length,
        },
        LrvChoice::IidDiff | LrvChoice::Fixed(_) if a.block_length.is_some() => {
            return Err(Failure::flags("--block-length only applies to --lrv block"));
        }
        LrvChoice::IidDiff => VarianceEstimator::IidDiff,
        LrvChoice::Fixed(s) => VarianceEstimator::Fixed(s),
    };
    if let Some(m) = a.min_scale {
        if m == 0 || m > y.len() {
            return Err(Failure::flags(format!("--min-scale must lie in 1..={}", y.len())));
        }
    }
    let cfg = DetectorConfig {
        threshold,
        min_len: a.min_scale,
        variance,
        mc_reps: a.mc_reps,
        seed: a.seed,
    };

    let path = cache_path(&a.cache);
    let mut cache = load_cache(path.as_deref());
    let fit = detect_cached(&y, &cfg, &mut cache)?;
    store_cache(path.as_deref(), &cache);

    let text = if a.json {
        serde_json::to_string_pretty(&fit)
    } else {
        serde_json::to_string(&fit)
    };
    println!("{}", text.map_err(|e| Failure::new(EXIT_IO, e.to_string()))?);
    Ok(())
}

fn cmd_quantile(a: QuantileArgs) -> CmdResult {
    check_alpha(a.alpha)?;
    let min_len = a.min_scale.unwrap_or_else(|| default_min_len(a.n));
    let path = cache_path(&a.cache);
    let mut cache = load_cache(path.as_deref());
    let q = cache.quantile(a.n, min_len, a.alpha, a.mc_reps, a.seed)?;
    store_cache(path.as_deref(), &cache);
    println!("{q}");
    Ok(())
}

fn cmd_lrv(a: LrvArgs) -> CmdResult {
    let y = read_series(&a.input)?;
    let est = match a.method {
        LrvChoice::Block => VarianceEstimator::BlockDiff {
            block_length: a.block_length,
        },
        LrvChoice::IidDiff => VarianceEstimator::IidDiff,
        LrvChoice::Fixed(_) => return Err(Failure::flags("--method fixed is not an estimator")),
    }
    .estimate(&y)?;
    println!(
        "{}",
        serde_json::to_string(&est).map_err(|e| Failure::new(EXIT_IO, e.to_string()))?
    );
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> CmdResult {
    let mut s = Scenario::resolve(&a.scenario)?;
    if a.full {
        s.reps = FULL_REPS;
    } else if let Some(r) = a.reps {
        s.reps = r;
    }
    if let Some(seed) = a.seed {
        s.seed = seed;
    }
    if let Some(m) = a.mc_reps {
        s.mc_reps = m;
    }
    let path = cache_path(&a.cache);
    let mut cache = load_cache(path.as_deref());
    let result = run_scenario_cached(&s, &mut cache)?;
    store_cache(path.as_deref(), &cache);
    let files = emit_tables(&result, &a.out)?;

    let mut out = io::stdout().lock();
    let header: Vec<&str> = KDIFF_LABELS.to_vec();
    let _ = writeln!(
        out,
        "{:<16} {:>7} {}  {:>8} {:>7} {:>7}",
        "method",
        "q",
        header.join("   "),
        "|dK|",
        "MSE",
        "MAE"
    );
    for c in &result.cells {
        let props: Vec<String> = c.kdiff.iter().map(|p| format!("{p:.3}")).collect();
        let _ = writeln!(
            out,
            "{:<16} {:>7.4} {}  {:>8.3} {:>7.3} {:>7.3}",
            c.label(),
            c.q,
            props.join(" "),
            c.mean_abs_kdiff,
            c.mse,
            c.mae
        );
    }
    for f in files {
        let _ = writeln!(out, "wrote {}", f.display());
    }
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> CmdResult {
    let mut s = Scenario::resolve(&a.scenario)?;
    if let Some(seed) = a.seed {
        s.seed = seed;
    }
    let y = s.replicate_series(a.rep)?;
    let mut out = io::BufWriter::new(io::stdout().lock());
    for v in y {
        writeln!(out, "{v}").map_err(|e| Failure::new(EXIT_IO, e.to_string()))?;
    }
    out.flush().map_err(|e| Failure::new(EXIT_IO, e.to_string()))
}
