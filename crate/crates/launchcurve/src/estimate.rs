//! Graduation-probability estimation and descriptive statistics over token
//! trajectories.
//!
//! The central estimator answers: among tokens whose curve SOL ever
//! strictly exceeded a level `v`, what fraction graduated? Conditions
//! restrict the eligible set using only information available up to the
//! crossing trade, so the curves remain readable as forecasts an observer
//! could have made at the crossing.

use crate::curve::CurveParams;
use crate::fixed::{self, Lamports};
use crate::ingest::{TokenTrajectory, TradeEvent, TxType};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EstimateError {
    #[error("grid must contain at least one level")]
    EmptyGrid,
    #[error("grid levels must be strictly increasing, within ({lo}, {hi}] SOL")]
    BadGrid { lo: String, hi: String },
    #[error("condition requires a non-empty {0} set")]
    EmptySet(&'static str),
    #[error("invalid condition parameter: {0}")]
    BadCondition(String),
}

/// Half-open time window `[start, end)` in unix seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeWindow {
    pub start: f64,
    pub end: f64,
}

impl TimeWindow {
    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t < self.end
    }

    pub fn overlaps(&self, other: &TimeWindow) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// Strictly increasing SOL levels, each above the launch seed and at most
/// the graduation threshold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid {
    levels: Vec<Lamports>,
}

impl Grid {
    pub fn new(levels: Vec<Lamports>, params: &CurveParams) -> Result<Grid, EstimateError> {
        if levels.is_empty() {
            return Err(EstimateError::EmptyGrid);
        }
        let ok = levels.windows(2).all(|w| w[0] < w[1])
            && levels[0] > params.x_virtual0
            && *levels.last().unwrap() <= params.x_graduate_total;
        if !ok {
            return Err(EstimateError::BadGrid {
                lo: fixed::format_sol(params.x_virtual0),
                hi: fixed::format_sol(params.x_graduate_total),
            });
        }
        Ok(Grid { levels })
    }

    /// `start`, `stop`, `step` in lamports; levels are `start`,
    /// `start+step`, ... up to `stop` inclusive.
    pub fn from_range(start: Lamports, stop: Lamports, step: Lamports, params: &CurveParams) -> Result<Grid, EstimateError> {
        if step == 0 || stop < start {
            return Err(EstimateError::BadCondition(format!(
                "bad grid range {}:{}:{}",
                fixed::format_sol(start),
                fixed::format_sol(stop),
                fixed::format_sol(step)
            )));
        }
        let mut levels = Vec::new();
        let mut v = start;
        loop {
            levels.push(v);
            match v.checked_add(step) {
                Some(next) if next <= stop => v = next,
                _ => break,
            }
        }
        Grid::new(levels, params)
    }

    /// One level per whole SOL from just above the launch seed to the
    /// graduation threshold.
    pub fn default_for(params: &CurveParams) -> Grid {
        let step = fixed::LAMPORTS_PER_SOL;
        let start = params.x_virtual0 + step;
        Grid::from_range(start, params.x_graduate_total, step, params).expect("default grid is valid")
    }

    pub fn levels(&self) -> &[Lamports] {
        &self.levels
    }
}

/// Eligibility restriction applied at the crossing trade.
///
/// Every variant except `MinTime` is decided from the events up to and
/// including the crossing, so truncating a trajectory right after the
/// crossing cannot change the outcome. `MinTime` instead drops tokens that
/// graduated faster than the cutoff from both numerator and denominator;
/// it is an outcome filter against ultra-fast scripted launches, not a
/// crossing-time predicate.
#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    None,
    /// Keep only tokens that did not graduate within `t_min_secs` of
    /// creation.
    MinTime { t_min_secs: f64 },
    /// Share of non-bot trades up to the crossing must exceed `theta`.
    NonBotShare { theta: f64 },
    /// Trade count up to and including the crossing (create excluded)
    /// must be at most `n_max`, and at least `n_min` when given.
    MaxTrades { n_max: u32, n_min: Option<u32> },
    /// Some member of the set traded the token at or before the crossing.
    WalletSet { wallets: BTreeSet<String> },
    /// The token's creator belongs to the set.
    CreatorSet { creators: BTreeSet<String> },
}

impl Condition {
    pub fn describe(&self) -> String {
        match self {
            Condition::None => "none".to_string(),
            Condition::MinTime { t_min_secs } => format!("mintime={t_min_secs}"),
            Condition::NonBotShare { theta } => format!("nonbot={theta}"),
            Condition::MaxTrades { n_max, n_min: None } => format!("maxtrades={n_max}"),
            Condition::MaxTrades { n_max, n_min: Some(m) } => format!("maxtrades={n_max},min={m}"),
            Condition::WalletSet { wallets } => format!("wallets={}", wallets.len()),
            Condition::CreatorSet { creators } => format!("creators={}", creators.len()),
        }
    }

    fn validate(&self) -> Result<(), EstimateError> {
        match self {
            Condition::MinTime { t_min_secs } if !(t_min_secs.is_finite() && *t_min_secs >= 0.0) => {
                Err(EstimateError::BadCondition(format!("mintime={t_min_secs}")))
            }
            Condition::NonBotShare { theta } if !(theta.is_finite() && (0.0..=1.0).contains(theta)) => {
                Err(EstimateError::BadCondition(format!("nonbot={theta}")))
            }
            Condition::MaxTrades { n_max, n_min } if n_min.map_or(false, |m| m > *n_max) => {
                Err(EstimateError::BadCondition(format!("maxtrades min {} exceeds max {n_max}", n_min.unwrap())))
            }
            Condition::WalletSet { wallets } if wallets.is_empty() => Err(EstimateError::EmptySet("wallet")),
            Condition::CreatorSet { creators } if creators.is_empty() => Err(EstimateError::EmptySet("creator")),
            _ => Ok(()),
        }
    }
}

/// Index into `traj.events` of the first event whose curve SOL strictly
/// exceeds `level`, if any. A token that only ever touches `level`
/// exactly, including the graduation threshold itself, never crosses it.
pub fn first_crossing(traj: &TokenTrajectory, level: Lamports) -> Option<usize> {
    traj.events.iter().position(|e| e.in_bonding_curve && e.v_sol > level)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub level: Lamports,
    pub n_eligible: u64,
    pub n_graduated: u64,
    /// Graduation fraction among eligible tokens; absent when no token is
    /// eligible. Never coerced to zero.
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraduationCurve {
    pub condition: String,
    pub rows: Vec<CurveRow>,
}

impl GraduationCurve {
    /// Plot-ready CSV: level in SOL, counts, probability with 12
    /// significant digits, `null` where undefined.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,n_eligible,n_graduated,p,condition\n");
        for row in &self.rows {
            let p = row.p.map(fixed::format_sig12).unwrap_or_else(|| "null".to_string());
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                fixed::format_sol(row.level),
                row.n_eligible,
                row.n_graduated,
                p,
                self.condition
            ));
        }
        out
    }
}

/// Per-token crossing state shared by the estimators: the crossing event
/// index per grid level plus trade counters at each crossing.
struct CrossingScan {
    cross_idx: Vec<Option<usize>>,
}

fn scan_crossings(traj: &TokenTrajectory, levels: &[Lamports]) -> CrossingScan {
    let mut cross_idx = vec![None; levels.len()];
    let mut ptr = 0usize;
    for (i, ev) in traj.events.iter().enumerate() {
        if !ev.in_bonding_curve {
            continue;
        }
        while ptr < levels.len() && ev.v_sol > levels[ptr] {
            cross_idx[ptr] = Some(i);
            ptr += 1;
        }
        if ptr == levels.len() {
            break;
        }
    }
    CrossingScan { cross_idx }
}

/// Evaluates a crossing-time condition for one token at one crossing
/// index, using only events up to and including that index. `MinTime` is
/// handled by the caller because it is not a crossing-time predicate.
pub fn condition_holds_at(traj: &TokenTrajectory, cross_idx: usize, condition: &Condition) -> bool {
    match condition {
        Condition::None | Condition::MinTime { .. } => true,
        Condition::NonBotShare { theta } => {
            let mut trades = 0u64;
            let mut nonbot = 0u64;
            for ev in &traj.events[..=cross_idx] {
                if ev.tx_type != TxType::Create {
                    trades += 1;
                    if !ev.is_bot {
                        nonbot += 1;
                    }
                }
            }
            trades > 0 && (nonbot as f64 / trades as f64) > *theta
        }
        Condition::MaxTrades { n_max, n_min } => {
            let trades = traj.events[..=cross_idx]
                .iter()
                .filter(|e| e.tx_type != TxType::Create)
                .count() as u32;
            trades <= *n_max && n_min.map_or(true, |m| trades >= m)
        }
        Condition::WalletSet { wallets } => traj.events[..=cross_idx]
            .iter()
            .any(|e| e.tx_type != TxType::Create && wallets.contains(&e.trader)),
        Condition::CreatorSet { creators } => creators.contains(&traj.creator),
    }
}

fn min_time_excluded(traj: &TokenTrajectory, condition: &Condition) -> bool {
    match condition {
        Condition::MinTime { t_min_secs } => {
            traj.graduated && traj.t_grad.map_or(false, |t| t <= *t_min_secs)
        }
        _ => false,
    }
}

/// Conditional graduation-probability curve over the grid.
///
/// For each level, a token is eligible when its curve SOL strictly
/// exceeded the level at some trade and the condition held at that first
/// crossing; `p` is the graduated fraction of eligible tokens, absent when
/// none are eligible. Under the trivial condition, eligible sets are
/// nested downward in the level, so `p` is non-decreasing wherever
/// defined.
pub fn estimate_curve(
    trajs: &BTreeMap<String, TokenTrajectory>,
    grid: &Grid,
    condition: &Condition,
) -> Result<GraduationCurve, EstimateError> {
    condition.validate()?;
    let levels = grid.levels();
    let mut n_eligible = vec![0u64; levels.len()];
    let mut n_graduated = vec![0u64; levels.len()];
    for traj in trajs.values() {
        if min_time_excluded(traj, condition) {
            continue;
        }
        let scan = scan_crossings(traj, levels);
        for (j, cross) in scan.cross_idx.iter().enumerate() {
            let Some(idx) = cross else { continue };
            if condition_holds_at(traj, *idx, condition) {
                n_eligible[j] += 1;
                if traj.graduated {
                    n_graduated[j] += 1;
                }
            }
        }
    }
    let rows = levels
        .iter()
        .zip(n_eligible.iter().zip(&n_graduated))
        .map(|(&level, (&e, &g))| CurveRow {
            level,
            n_eligible: e,
            n_graduated: g,
            p: (e > 0).then(|| g as f64 / e as f64),
        })
        .collect();
    Ok(GraduationCurve { condition: condition.describe(), rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinRow {
    pub lo: Lamports,
    pub hi: Lamports,
    pub n_entered: u64,
    pub n_graduated: u64,
    pub p: Option<f64>,
}

/// Width-binned variant: a token counts toward every bin whose lower edge
/// its peak curve SOL reached, and `p` is the graduated fraction of those
/// entrants.
pub fn estimate_binned(
    trajs: &BTreeMap<String, TokenTrajectory>,
    bin_width: Lamports,
    params: &CurveParams,
) -> Result<Vec<BinRow>, EstimateError> {
    if bin_width == 0 {
        return Err(EstimateError::BadCondition("bin width must be positive".to_string()));
    }
    let mut rows = Vec::new();
    let mut lo = params.x_virtual0;
    while lo < params.x_graduate_total {
        let hi = (lo + bin_width).min(params.x_graduate_total);
        let mut n_entered = 0;
        let mut n_graduated = 0;
        for traj in trajs.values() {
            if traj.max_v_sol >= lo {
                n_entered += 1;
                if traj.graduated {
                    n_graduated += 1;
                }
            }
        }
        rows.push(BinRow {
            lo,
            hi,
            n_entered,
            n_graduated,
            p: (n_entered > 0).then(|| n_graduated as f64 / n_entered as f64),
        });
        lo = hi;
    }
    Ok(rows)
}

/// Tokens whose peak curve SOL reached each level (non-strict).
pub fn survival_counts(trajs: &BTreeMap<String, TokenTrajectory>, levels: &[Lamports]) -> Vec<(Lamports, u64)> {
    levels
        .iter()
        .map(|&level| {
            let n = trajs.values().filter(|t| t.max_v_sol >= level).count() as u64;
            (level, n)
        })
        .collect()
}

/// Mean over tokens crossing each level of the bot-trade share among the
/// trades up to and including the crossing.
pub fn mean_bot_share_at_crossing(trajs: &BTreeMap<String, TokenTrajectory>, grid: &Grid) -> Vec<(Lamports, Option<f64>)> {
    let levels = grid.levels();
    let mut sums = vec![0.0f64; levels.len()];
    let mut counts = vec![0u64; levels.len()];
    for traj in trajs.values() {
        let scan = scan_crossings(traj, levels);
        for (j, cross) in scan.cross_idx.iter().enumerate() {
            let Some(idx) = cross else { continue };
            let mut trades = 0u64;
            let mut bots = 0u64;
            for ev in &traj.events[..=*idx] {
                if ev.tx_type != TxType::Create {
                    trades += 1;
                    if ev.is_bot {
                        bots += 1;
                    }
                }
            }
            if trades > 0 {
                sums[j] += bots as f64 / trades as f64;
                counts[j] += 1;
            }
        }
    }
    levels
        .iter()
        .zip(sums.iter().zip(&counts))
        .map(|(&level, (&s, &c))| (level, (c > 0).then(|| s / c as f64)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerEntry {
    pub wallet: String,
    pub n_buys: u32,
    pub n_sells: u32,
    /// Gross SOL spent on buys within the window.
    pub sol_spent: Lamports,
    /// Gross SOL received from sells within the window.
    pub sol_received: Lamports,
}

impl LedgerEntry {
    /// Cash-flow profit in lamports: sells minus buys, fees as recorded.
    pub fn pnl_lamports(&self) -> i128 {
        self.sol_received as i128 - self.sol_spent as i128
    }

    pub fn pnl_sol(&self) -> f64 {
        self.pnl_lamports() as f64 / fixed::LAMPORTS_PER_SOL as f64
    }
}

#[derive(Debug, Clone)]
pub struct TopTraders {
    /// The top-`k` wallets by cash-flow profit.
    pub wallets: BTreeSet<String>,
    /// Full ledger, profit-descending, wallet name breaking ties.
    pub ledger: Vec<LedgerEntry>,
    /// Set when fewer wallets traded than requested.
    pub underfilled: bool,
}

/// Ranks wallets by realized SOL cash flow (sells minus buys) over the
/// trades inside `window`. The full ledger comes back alongside the set
/// so rankings can be audited.
pub fn identify_top_traders(events: &[TradeEvent], window: &TimeWindow, k: usize) -> TopTraders {
    let mut by_wallet: BTreeMap<&str, LedgerEntry> = BTreeMap::new();
    for ev in events {
        if !window.contains(ev.timestamp) || ev.tx_type == TxType::Create {
            continue;
        }
        let entry = by_wallet.entry(&ev.trader).or_insert_with(|| LedgerEntry {
            wallet: ev.trader.clone(),
            n_buys: 0,
            n_sells: 0,
            sol_spent: 0,
            sol_received: 0,
        });
        match ev.tx_type {
            TxType::Buy => {
                entry.n_buys += 1;
                entry.sol_spent += ev.sol_amount;
            }
            TxType::Sell => {
                entry.n_sells += 1;
                entry.sol_received += ev.sol_amount;
            }
            TxType::Create => {}
        }
    }
    let mut ledger: Vec<LedgerEntry> = by_wallet.into_values().collect();
    ledger.sort_by(|a, b| b.pnl_lamports().cmp(&a.pnl_lamports()).then_with(|| a.wallet.cmp(&b.wallet)));
    let underfilled = k > ledger.len();
    let wallets = ledger.iter().take(k).map(|e| e.wallet.clone()).collect();
    TopTraders { wallets, ledger, underfilled }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CreatorFilters {
    /// Creators with fewer launches in the window are ignored.
    pub min_tokens: usize,
    /// A graduated token counts only with at least this many trades.
    pub min_trades_per_token: usize,
    /// Keep creators whose graduation ratio strictly exceeds this.
    pub min_ratio: f64,
}

impl Default for CreatorFilters {
    fn default() -> Self {
        CreatorFilters { min_tokens: 50, min_trades_per_token: 10, min_ratio: 0.001 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CreatorStats {
    pub creator: String,
    pub n_tokens: u64,
    pub n_graduated: u64,
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct TopCreators {
    /// The top-`k` creators by graduation ratio.
    pub creators: BTreeSet<String>,
    /// All creators passing the filters, ratio-descending.
    pub stats: Vec<CreatorStats>,
    pub underfilled: bool,
}

/// Ranks creators launched inside `window` by the fraction of their tokens
/// that graduated with a real trade history, after the volume filters.
pub fn identify_top_creators(
    trajs: &BTreeMap<String, TokenTrajectory>,
    window: &TimeWindow,
    filters: &CreatorFilters,
    k: usize,
) -> TopCreators {
    let mut per_creator: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    for traj in trajs.values() {
        if !window.contains(traj.t_create) {
            continue;
        }
        let entry = per_creator.entry(&traj.creator).or_insert((0, 0));
        entry.0 += 1;
        if traj.graduated && traj.n_trades() >= filters.min_trades_per_token {
            entry.1 += 1;
        }
    }
    let mut stats: Vec<CreatorStats> = per_creator
        .into_iter()
        .filter(|(_, (tokens, _))| *tokens as usize >= filters.min_tokens)
        .map(|(creator, (n_tokens, n_graduated))| CreatorStats {
            creator: creator.to_string(),
            n_tokens,
            n_graduated,
            ratio: n_graduated as f64 / n_tokens as f64,
        })
        .filter(|s| s.ratio > filters.min_ratio)
        .collect();
    stats.sort_by(|a, b| b.ratio.total_cmp(&a.ratio).then_with(|| a.creator.cmp(&b.creator)));
    let underfilled = k > stats.len();
    let creators = stats.iter().take(k).map(|s| s.creator.clone()).collect();
    TopCreators { creators, stats, underfilled }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// Lower edge of each bin; a bin spans `[edge, edge + width)`.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub width: f64,
}

fn histogram(values: &[f64], width: f64) -> Histogram {
    if values.is_empty() {
        return Histogram { edges: Vec::new(), counts: Vec::new(), width };
    }
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    let n_bins = (max / width).floor() as usize + 1;
    let mut counts = vec![0u64; n_bins];
    for &v in values {
        counts[(v / width).floor() as usize] += 1;
    }
    Histogram { edges: (0..n_bins).map(|i| i as f64 * width).collect(), counts, width }
}

fn median(sorted: &[f64]) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let n = sorted.len();
    Some(if n % 2 == 1 { sorted[n / 2] } else { (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraduationStats {
    pub n_graduated: u64,
    pub median_steps: Option<f64>,
    pub median_time_secs: Option<f64>,
    pub step_hist: Histogram,
    pub time_hist: Histogram,
    /// Joint counts over (step bin, time bin), indexed as
    /// `joint[step][time]`.
    pub joint: Vec<Vec<u64>>,
}

/// Swaps-to-graduation and time-to-graduation over graduated tokens:
/// medians (midpoint of the middle pair for even counts), marginal
/// histograms and the joint histogram. `time_bin_secs` defaults to one
/// minute via [`DEFAULT_TIME_BIN_SECS`].
pub fn graduation_step_time_stats(
    trajs: &BTreeMap<String, TokenTrajectory>,
    step_bin: u32,
    time_bin_secs: f64,
) -> GraduationStats {
    let mut steps = Vec::new();
    let mut times = Vec::new();
    for traj in trajs.values() {
        if let (Some(s), Some(t)) = (traj.grad_steps, traj.t_grad) {
            steps.push(s as f64);
            times.push(t);
        }
    }
    let mut steps_sorted = steps.clone();
    steps_sorted.sort_by(f64::total_cmp);
    let mut times_sorted = times.clone();
    times_sorted.sort_by(f64::total_cmp);
    let step_hist = histogram(&steps, step_bin as f64);
    let time_hist = histogram(&times, time_bin_secs);
    let mut joint = vec![vec![0u64; time_hist.edges.len()]; step_hist.edges.len()];
    for (s, t) in steps.iter().zip(&times) {
        let si = (s / step_bin as f64).floor() as usize;
        let ti = (t / time_bin_secs).floor() as usize;
        joint[si][ti] += 1;
    }
    GraduationStats {
        n_graduated: steps.len() as u64,
        median_steps: median(&steps_sorted),
        median_time_secs: median(&times_sorted),
        step_hist,
        time_hist,
        joint,
    }
}

pub const DEFAULT_TIME_BIN_SECS: f64 = 60.0;
pub const DEFAULT_STEP_BIN: u32 = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetFlowPoint {
    /// UTC day number (unix seconds / 86400).
    pub day: i64,
    /// Cumulative signed gross SOL through the end of that day: buys add,
    /// sells subtract.
    pub cumulative_sol: f64,
}

/// Daily-sampled cumulative SOL flow into curves across a whole event log.
pub fn net_flow_series(events: &[TradeEvent]) -> Vec<NetFlowPoint> {
    let mut ordered: Vec<&TradeEvent> = events.iter().filter(|e| e.tx_type != TxType::Create).collect();
    ordered.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp).then_with(|| a.signature.cmp(&b.signature)));
    if ordered.is_empty() {
        return Vec::new();
    }
    let day_of = |t: f64| (t / 86_400.0).floor() as i64;
    let first_day = day_of(ordered[0].timestamp);
    let last_day = day_of(ordered.last().unwrap().timestamp);
    let mut points = Vec::with_capacity((last_day - first_day + 1) as usize);
    let mut cumulative: i128 = 0;
    let mut it = ordered.iter().peekable();
    for day in first_day..=last_day {
        while let Some(ev) = it.peek() {
            if day_of(ev.timestamp) > day {
                break;
            }
            match ev.tx_type {
                TxType::Buy => cumulative += ev.sol_amount as i128,
                TxType::Sell => cumulative -= ev.sol_amount as i128,
                TxType::Create => {}
            }
            it.next();
        }
        points.push(NetFlowPoint { day, cumulative_sol: cumulative as f64 / fixed::LAMPORTS_PER_SOL as f64 });
    }
    points
}
