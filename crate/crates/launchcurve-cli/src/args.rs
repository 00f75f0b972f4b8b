use chrono::{DateTime, NaiveDate, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use launchcurve::curve::CurveParams;
use launchcurve::estimate::{Condition, Grid, TimeWindow};
use launchcurve::fixed::{self, Lamports};
use launchcurve::ingest::LogFormat;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// Batch analytics over bonding-curve trade logs: validation, graduation
/// odds, breakeven frontiers, backtests, dump detection, and synthetic
/// market generation. Every run writes a manifest next to its outputs and
/// reruns with the same manifest reproduce the outputs byte for byte.
#[derive(Debug, Parser)]
#[command(name = "launchcurve", version, max_term_width = 100)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a trade log against the curve mechanics and report violations
    Validate(ValidateArgs),
    /// Estimate conditional graduation-probability curves
    Estimate(EstimateArgs),
    /// Tabulate the breakeven probability parabola over a level grid
    Breakeven(BreakevenArgs),
    /// Backtest buying every token at an entry level and holding
    Backtest(BacktestArgs),
    /// Scan every token for dump episodes
    DumpScan(DumpScanArgs),
    /// Generate a synthetic market log
    Synth(SynthArgs),
    /// Merge estimated curves into one plot-ready overlay CSV
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Jsonl,
    Csv,
}

/// Shared input options. Relative paths resolve under
/// `LAUNCHCURVE_DATA_DIR` when that variable is set.
#[derive(Debug, Args)]
pub struct InputArgs {
    /// Trade log to read
    #[arg(long)]
    pub input: PathBuf,
    /// Log format; inferred from the file extension when omitted
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Abort on the first malformed record instead of skipping it
    #[arg(long)]
    pub strict: bool,
}

impl InputArgs {
    pub fn resolved_path(&self) -> PathBuf {
        resolve_data_path(&self.input)
    }

    pub fn log_format(&self) -> LogFormat {
        match self.format {
            Some(FormatArg::Jsonl) => LogFormat::Jsonl,
            Some(FormatArg::Csv) => LogFormat::Csv,
            None => infer_format(&self.input),
        }
    }
}

pub fn infer_format(path: &Path) -> LogFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => LogFormat::Csv,
        _ => LogFormat::Jsonl,
    }
}

pub fn resolve_data_path(path: &Path) -> PathBuf {
    if path.is_relative() {
        if let Some(dir) = std::env::var_os("LAUNCHCURVE_DATA_DIR") {
            return PathBuf::from(dir).join(path);
        }
    }
    path.to_path_buf()
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Relative tolerance for invariant and step checks
    #[arg(long, default_value_t = launchcurve::ingest::DEFAULT_VALIDATE_TOL)]
    pub tol: f64,
    /// Write the full diagnostics report here as JSON
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Level grid as start:stop:step in SOL; defaults to one level per
    /// whole SOL from 31 to 115
    #[arg(long)]
    pub grid: Option<String>,
    /// Eligibility condition: none | mintime=<s> | nonbot=<theta> |
    /// maxtrades=<N>[,min=<M>] | topwallets=<k>,window=<iso/iso> |
    /// topcreators=<k>,window=<iso/iso>
    #[arg(long, default_value = "none")]
    pub condition: String,
    /// Evaluation window as half-open UTC interval <iso>/<iso>; only
    /// tokens created inside it are counted. Required for topwallets and
    /// topcreators, whose ranking window must end before it starts
    #[arg(long)]
    pub window: Option<String>,
    /// Emit width-binned peak-level rates instead of threshold crossings;
    /// value is the bin width in SOL
    #[arg(long)]
    pub binned: Option<String>,
    /// Output CSV path
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BreakevenArgs {
    /// Level grid as start:stop:step in SOL; defaults to one level per
    /// whole SOL from 31 to 115
    #[arg(long)]
    pub grid: Option<String>,
    /// Output CSV path
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BacktestArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Entry level in SOL, strictly between the launch seed and graduation
    #[arg(long)]
    pub entry: String,
    /// Output CSV of per-token returns
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DumpScanArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Detector settings as a TOML file; omitted keys keep their defaults
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override the violation threshold multiplier
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Output CSV of dump episodes
    #[arg(long)]
    pub out: PathBuf,
    /// Also write an aggregate summary here as JSON
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Generator settings as a TOML file; omitted keys keep their defaults
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override the number of tokens
    #[arg(long)]
    pub tokens: Option<usize>,
    /// Override the generator seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output format
    #[arg(long, value_enum, default_value_t = FormatArg::Jsonl)]
    pub format: FormatArg,
    /// Output log path
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Curve CSVs produced by the estimate command, one column each
    #[arg(long, num_args = 1.., required = true)]
    pub curves: Vec<PathBuf>,
    /// Output CSV path
    #[arg(long)]
    pub out: PathBuf,
}

pub fn parse_grid(spec: Option<&str>, params: &CurveParams) -> Result<Grid, CliError> {
    let Some(spec) = spec else {
        return Ok(Grid::default_for(params));
    };
    let parts: Vec<&str> = spec.split(':').collect();
    let [start, stop, step] = parts[..] else {
        return Err(CliError::bad_args(format!("grid `{spec}` is not start:stop:step")));
    };
    let sol = |s: &str| {
        fixed::parse_sol(s).map_err(|e| CliError::bad_args(format!("grid value `{s}`: {e}")))
    };
    Grid::from_range(sol(start)?, sol(stop)?, sol(step)?, params)
        .map_err(|e| CliError::bad_args(e.to_string()))
}

pub fn parse_sol_amount(s: &str, what: &str) -> Result<Lamports, CliError> {
    fixed::parse_sol(s).map_err(|e| CliError::bad_args(format!("{what} `{s}`: {e}")))
}

fn parse_instant(s: &str) -> Result<f64, CliError> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.with_timezone(&Utc).timestamp_millis() as f64 / 1e3);
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        let midnight = d.and_hms_opt(0, 0, 0).expect("midnight exists");
        return Ok(midnight.and_utc().timestamp() as f64);
    }
    Err(CliError::bad_args(format!(
        "timestamp `{s}` is neither RFC 3339 nor a plain UTC date"
    )))
}

/// Half-open UTC interval written `<start>/<end>`, each side RFC 3339 or a
/// plain date.
pub fn parse_window(spec: &str) -> Result<TimeWindow, CliError> {
    let (a, b) = spec
        .split_once('/')
        .ok_or_else(|| CliError::bad_args(format!("window `{spec}` is not <start>/<end>")))?;
    let window = TimeWindow { start: parse_instant(a)?, end: parse_instant(b)? };
    if window.start >= window.end {
        return Err(CliError::bad_args(format!("window `{spec}` is empty or reversed")));
    }
    Ok(window)
}

/// Condition spec as parsed from the command line. The predictive variants
/// carry a ranking window and still need data to resolve into a concrete
/// wallet or creator set.
#[derive(Debug, Clone, PartialEq)]
pub enum ConditionSpec {
    Ready(Condition),
    TopWallets { k: usize, window: TimeWindow },
    TopCreators { k: usize, window: TimeWindow },
}

impl ConditionSpec {
    pub fn ranking_window(&self) -> Option<&TimeWindow> {
        match self {
            ConditionSpec::Ready(_) => None,
            ConditionSpec::TopWallets { window, .. } | ConditionSpec::TopCreators { window, .. } => Some(window),
        }
    }
}

fn split_kv<'a>(part: &'a str, spec: &str) -> Result<(&'a str, &'a str), CliError> {
    part.split_once('=')
        .ok_or_else(|| CliError::bad_args(format!("condition `{spec}`: expected key=value, got `{part}`")))
}

pub fn parse_condition(spec: &str) -> Result<ConditionSpec, CliError> {
    if spec == "none" {
        return Ok(ConditionSpec::Ready(Condition::None));
    }
    let bad = |msg: String| CliError::bad_args(format!("condition `{spec}`: {msg}"));
    let parts: Vec<&str> = spec.split(',').collect();
    let (key, value) = split_kv(parts[0], spec)?;
    match key {
        "mintime" => {
            if parts.len() > 1 {
                return Err(bad("mintime takes no extra fields".to_string()));
            }
            let t_min_secs: f64 =
                value.parse().map_err(|_| bad(format!("`{value}` is not a number of seconds")))?;
            Ok(ConditionSpec::Ready(Condition::MinTime { t_min_secs }))
        }
        "nonbot" => {
            if parts.len() > 1 {
                return Err(bad("nonbot takes no extra fields".to_string()));
            }
            let theta: f64 = value.parse().map_err(|_| bad(format!("`{value}` is not a share")))?;
            Ok(ConditionSpec::Ready(Condition::NonBotShare { theta }))
        }
        "maxtrades" => {
            let n_max: u32 = value.parse().map_err(|_| bad(format!("`{value}` is not a count")))?;
            let n_min = match parts.len() {
                1 => None,
                2 => {
                    let (k2, v2) = split_kv(parts[1], spec)?;
                    if k2 != "min" {
                        return Err(bad(format!("unknown field `{k2}`")));
                    }
                    Some(v2.parse::<u32>().map_err(|_| bad(format!("`{v2}` is not a count")))?)
                }
                _ => return Err(bad("too many fields".to_string())),
            };
            Ok(ConditionSpec::Ready(Condition::MaxTrades { n_max, n_min }))
        }
        "topwallets" | "topcreators" => {
            let k: usize = value.parse().map_err(|_| bad(format!("`{value}` is not a count")))?;
            if k == 0 {
                return Err(bad("need at least one identity".to_string()));
            }
            if parts.len() != 2 {
                return Err(bad("expected exactly one window=<iso/iso> field".to_string()));
            }
            let (k2, v2) = split_kv(parts[1], spec)?;
            if k2 != "window" {
                return Err(bad(format!("unknown field `{k2}`")));
            }
            let window = parse_window(v2)?;
            Ok(if key == "topwallets" {
                ConditionSpec::TopWallets { k, window }
            } else {
                ConditionSpec::TopCreators { k, window }
            })
        }
        other => Err(bad(format!("unknown condition `{other}`"))),
    }
}

/// Checks the out-of-sample discipline for predictive conditions: the
/// ranking window must close before the evaluation window opens.
pub fn check_causality(spec: &ConditionSpec, eval: Option<&TimeWindow>) -> Result<(), CliError> {
    let Some(ranking) = spec.ranking_window() else {
        return Ok(());
    };
    let Some(eval) = eval else {
        return Err(CliError::causality(
            "predictive conditions need --window so the ranking period can be checked against it",
        ));
    };
    if ranking.end > eval.start {
        return Err(CliError::causality(format!(
            "ranking window ends at {} but the evaluation window starts at {}; the ranking must be fixed before evaluation begins",
            ranking.end, eval.start
        )));
    }
    Ok(())
}

/// Wallet or creator identity sets resolved from data, used to turn a
/// predictive spec into a concrete condition.
pub fn condition_from_set(spec: &ConditionSpec, set: BTreeSet<String>) -> Condition {
    match spec {
        ConditionSpec::Ready(c) => c.clone(),
        ConditionSpec::TopWallets { .. } => Condition::WalletSet { wallets: set },
        ConditionSpec::TopCreators { .. } => Condition::CreatorSet { creators: set },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> CurveParams {
        CurveParams::default()
    }

    #[test]
    fn grid_specs_parse_to_lamport_levels() {
        let g = parse_grid(Some("31:115:1"), &params()).unwrap();
        assert_eq!(g.levels().len(), 85);
        assert_eq!(g.levels()[0], 31_000_000_000);
        assert_eq!(*g.levels().last().unwrap(), 115_000_000_000);

        let g = parse_grid(Some("50:50:1"), &params()).unwrap();
        assert_eq!(g.levels(), &[50_000_000_000]);

        let g = parse_grid(Some("40.5:41.5:0.25"), &params()).unwrap();
        assert_eq!(g.levels().len(), 5);

        assert!(parse_grid(Some("31:115"), &params()).is_err());
        assert!(parse_grid(Some("10:115:1"), &params()).is_err());
        assert!(parse_grid(Some("31:116:1"), &params()).is_err());
        assert_eq!(parse_grid(None, &params()).unwrap().levels().len(), 85);
    }

    #[test]
    fn windows_are_half_open_utc() {
        let w = parse_window("2025-01-01T00:00:00Z/2025-01-15T00:00:00Z").unwrap();
        assert_eq!(w.start, 1_735_689_600.0);
        assert_eq!(w.end, 1_735_689_600.0 + 14.0 * 86_400.0);
        assert!(w.contains(w.start));
        assert!(!w.contains(w.end));

        let d = parse_window("2025-01-01/2025-01-15").unwrap();
        assert_eq!((d.start, d.end), (w.start, w.end));

        let ms = parse_window("2025-01-01T00:00:00.250Z/2025-01-02T00:00:00Z").unwrap();
        assert_eq!(ms.start, 1_735_689_600.25);

        assert!(parse_window("2025-01-15/2025-01-01").is_err());
        assert!(parse_window("2025-01-01").is_err());
        assert!(parse_window("yesterday/today").is_err());
    }

    #[test]
    fn condition_grammar_round_trips() {
        use Condition::*;
        let ready = |s: &str| match parse_condition(s).unwrap() {
            ConditionSpec::Ready(c) => c,
            other => panic!("expected ready condition, got {other:?}"),
        };
        assert_eq!(ready("none"), None);
        assert_eq!(ready("mintime=2"), MinTime { t_min_secs: 2.0 });
        assert_eq!(ready("nonbot=0.3"), NonBotShare { theta: 0.3 });
        assert_eq!(ready("maxtrades=100"), MaxTrades { n_max: 100, n_min: Option::None });
        assert_eq!(ready("maxtrades=100,min=10"), MaxTrades { n_max: 100, n_min: Some(10) });

        let spec = parse_condition("topwallets=5,window=2025-01-01/2025-01-08").unwrap();
        match spec {
            ConditionSpec::TopWallets { k, window } => {
                assert_eq!(k, 5);
                assert_eq!(window.end - window.start, 7.0 * 86_400.0);
            }
            other => panic!("expected topwallets, got {other:?}"),
        }
        assert!(matches!(
            parse_condition("topcreators=3,window=2025-01-01/2025-01-08").unwrap(),
            ConditionSpec::TopCreators { k: 3, .. }
        ));

        for bad in [
            "bogus",
            "bogus=1",
            "mintime=soon",
            "nonbot=0.3,min=1",
            "maxtrades=10,max=20",
            "topwallets=5",
            "topwallets=0,window=2025-01-01/2025-01-08",
            "topwallets=5,window=2025-01-08/2025-01-01",
        ] {
            assert!(parse_condition(bad).is_err(), "`{bad}` should be rejected");
        }
    }

    #[test]
    fn predictive_conditions_demand_a_preceding_ranking_window() {
        let spec = parse_condition("topwallets=5,window=2025-01-01/2025-01-08").unwrap();
        let eval = parse_window("2025-01-08/2025-01-15").unwrap();
        assert!(check_causality(&spec, Some(&eval)).is_ok());

        let overlapping = parse_window("2025-01-07/2025-01-15").unwrap();
        let err = check_causality(&spec, Some(&overlapping)).unwrap_err();
        assert_eq!(err.code, "causality");
        assert_eq!(check_causality(&spec, None).unwrap_err().code, "causality");

        let ready = parse_condition("nonbot=0.5").unwrap();
        assert!(check_causality(&ready, None).is_ok());
    }
}
