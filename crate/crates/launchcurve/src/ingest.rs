//! Trade-log ingestion: event schema, JSONL and CSV codecs, per-token
//! trajectory assembly and state-consistency validation.
//!
//! A log is a flat sequence of [`TradeEvent`] records, one per on-curve
//! transaction. SOL and token fields travel as decimal strings so values
//! survive a parse/serialize round trip exactly; in memory they are
//! integer lamports and base units.

use crate::curve::CurveParams;
use crate::fixed::{self, Lamports, TokenUnits};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use serde_json::Value;
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use thiserror::Error;

/// Relative tolerance for trajectory validation checks.
pub const DEFAULT_VALIDATE_TOL: f64 = 1e-6;

const FIELDS: [&str; 13] = [
    "timestamp",
    "local_time",
    "signature",
    "mint",
    "coin_creator",
    "trader",
    "tx_type",
    "in_bonding_curve",
    "v_sol",
    "v_tok",
    "sol_amount",
    "token_amount",
    "is_bot",
];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogFormat {
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strictness {
    /// Abort on the first malformed record.
    Strict,
    /// Skip malformed records and report them with their line numbers.
    Lenient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TxType {
    Create,
    Buy,
    Sell,
}

impl TxType {
    pub fn as_str(&self) -> &'static str {
        match self {
            TxType::Create => "create",
            TxType::Buy => "buy",
            TxType::Sell => "sell",
        }
    }
}

/// One on-curve transaction.
///
/// `v_sol` and `v_tok` are the curve reserves immediately after the
/// transaction. `sol_amount` is the gross SOL exchanged with the curve:
/// what the buyer pays before fees on a buy, what leaves the curve on a
/// sell (the seller keeps the post-fee remainder). `token_amount` is the
/// token movement. Create events carry zero amounts and the launch
/// reserves. `is_bot` marks trades submitted straight to the contract
/// rather than through the frontend.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeEvent {
    /// Unix seconds, sub-second fraction allowed.
    pub timestamp: f64,
    pub local_time: Option<String>,
    pub signature: String,
    pub mint: String,
    pub coin_creator: String,
    pub trader: String,
    pub tx_type: TxType,
    pub in_bonding_curve: bool,
    pub v_sol: Lamports,
    pub v_tok: TokenUnits,
    pub sol_amount: Lamports,
    pub token_amount: TokenUnits,
    pub is_bot: bool,
}

impl Serialize for TradeEvent {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("TradeEvent", 13)?;
        s.serialize_field("timestamp", &self.timestamp)?;
        s.serialize_field("local_time", &self.local_time)?;
        s.serialize_field("signature", &self.signature)?;
        s.serialize_field("mint", &self.mint)?;
        s.serialize_field("coin_creator", &self.coin_creator)?;
        s.serialize_field("trader", &self.trader)?;
        s.serialize_field("tx_type", self.tx_type.as_str())?;
        s.serialize_field("in_bonding_curve", &self.in_bonding_curve)?;
        s.serialize_field("v_sol", &fixed::format_sol(self.v_sol))?;
        s.serialize_field("v_tok", &fixed::format_tokens(self.v_tok))?;
        s.serialize_field("sol_amount", &fixed::format_sol(self.sol_amount))?;
        s.serialize_field("token_amount", &fixed::format_tokens(self.token_amount))?;
        s.serialize_field("is_bot", &(self.is_bot as u8))?;
        s.end()
    }
}

fn field_err(name: &str, detail: impl std::fmt::Display) -> String {
    format!("field `{name}`: {detail}")
}

fn as_str<'a>(v: &'a Value, name: &str) -> Result<&'a str, String> {
    v.as_str().ok_or_else(|| field_err(name, "expected a string"))
}

fn parse_timestamp(v: &Value) -> Result<f64, String> {
    let t = match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| field_err("timestamp", "not representable"))?,
        Value::String(s) => s.trim().parse::<f64>().map_err(|e| field_err("timestamp", e))?,
        _ => return Err(field_err("timestamp", "expected a number")),
    };
    if !t.is_finite() || t < 0.0 {
        return Err(field_err("timestamp", format!("out of range: {t}")));
    }
    Ok(t)
}

fn parse_amount(v: &Value, name: &str, decimals: u32) -> Result<u64, String> {
    match v {
        Value::String(s) => fixed::parse_fixed(s, decimals).map_err(|e| field_err(name, e)),
        Value::Number(n) => {
            let f = n.as_f64().ok_or_else(|| field_err(name, "not representable"))?;
            if !f.is_finite() || f < 0.0 {
                return Err(field_err(name, format!("out of range: {f}")));
            }
            let scaled = f * 10f64.powi(decimals as i32);
            if scaled > u64::MAX as f64 {
                return Err(field_err(name, format!("out of range: {f}")));
            }
            Ok(scaled.round() as u64)
        }
        _ => Err(field_err(name, "expected a decimal string or number")),
    }
}

fn parse_flag(v: &Value, name: &str) -> Result<bool, String> {
    match v {
        Value::Bool(b) => Ok(*b),
        Value::Number(n) => match n.as_i64() {
            Some(0) => Ok(false),
            Some(1) => Ok(true),
            _ => Err(field_err(name, format!("expected 0 or 1, got {n}"))),
        },
        Value::String(s) => match s.trim() {
            "0" | "false" => Ok(false),
            "1" | "true" => Ok(true),
            other => Err(field_err(name, format!("expected 0/1/true/false, got {other:?}"))),
        },
        _ => Err(field_err(name, "expected a boolean flag")),
    }
}

fn event_from_object(obj: &serde_json::Map<String, Value>) -> Result<TradeEvent, String> {
    let get = |name: &str| -> Result<&Value, String> {
        match obj.get(name) {
            Some(v) if !v.is_null() => Ok(v),
            _ => Err(field_err(name, "missing")),
        }
    };
    let tx_type = match as_str(get("tx_type")?, "tx_type")? {
        "create" => TxType::Create,
        "buy" => TxType::Buy,
        "sell" => TxType::Sell,
        other => return Err(field_err("tx_type", format!("unknown trade type {other:?}"))),
    };
    let local_time = match obj.get("local_time") {
        None | Some(Value::Null) => None,
        Some(v) => Some(as_str(v, "local_time")?.to_string()),
    };
    let text = |name: &str| -> Result<String, String> {
        let s = as_str(get(name)?, name)?;
        if s.is_empty() {
            return Err(field_err(name, "must not be empty"));
        }
        Ok(s.to_string())
    };
    Ok(TradeEvent {
        timestamp: parse_timestamp(get("timestamp")?)?,
        local_time,
        signature: text("signature")?,
        mint: text("mint")?,
        coin_creator: text("coin_creator")?,
        trader: text("trader")?,
        tx_type,
        in_bonding_curve: parse_flag(get("in_bonding_curve")?, "in_bonding_curve")?,
        v_sol: parse_amount(get("v_sol")?, "v_sol", 9)?,
        v_tok: parse_amount(get("v_tok")?, "v_tok", fixed::TOKEN_DECIMALS)?,
        sol_amount: parse_amount(get("sol_amount")?, "sol_amount", 9)?,
        token_amount: parse_amount(get("token_amount")?, "token_amount", fixed::TOKEN_DECIMALS)?,
        is_bot: parse_flag(get("is_bot")?, "is_bot")?,
    })
}

#[derive(Debug, Clone)]
pub struct ParseIssue {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct ParseOutput {
    pub events: Vec<TradeEvent>,
    pub issues: Vec<ParseIssue>,
}

/// Parses a trade log. Blank lines and `#` comment lines are skipped. In
/// strict mode the first malformed record aborts with its line number; in
/// lenient mode bad records are collected as issues and parsing continues.
pub fn parse_events(
    reader: impl BufRead,
    format: LogFormat,
    strictness: Strictness,
) -> Result<ParseOutput, IngestError> {
    match format {
        LogFormat::Jsonl => parse_jsonl(reader, strictness),
        LogFormat::Csv => parse_csv(reader, strictness),
    }
}

fn parse_jsonl(reader: impl BufRead, strictness: Strictness) -> Result<ParseOutput, IngestError> {
    let mut out = ParseOutput::default();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parsed = serde_json::from_str::<Value>(&line)
            .map_err(|e| e.to_string())
            .and_then(|v| match v.as_object() {
                Some(obj) => event_from_object(obj),
                None => Err("expected a JSON object".to_string()),
            });
        match parsed {
            Ok(ev) => out.events.push(ev),
            Err(message) => match strictness {
                Strictness::Strict => return Err(IngestError::Malformed { line: line_no, message }),
                Strictness::Lenient => out.issues.push(ParseIssue { line: line_no, message }),
            },
        }
    }
    Ok(out)
}

fn parse_csv(reader: impl BufRead, strictness: Strictness) -> Result<ParseOutput, IngestError> {
    let mut out = ParseOutput::default();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let mut columns = Vec::new();
    for name in FIELDS {
        match col(name) {
            Some(i) => columns.push((name, i)),
            None if name == "local_time" => columns.push((name, usize::MAX)),
            None => {
                return Err(IngestError::Malformed {
                    line: 1,
                    message: format!("missing CSV column `{name}`"),
                })
            }
        }
    }
    for record in rdr.records() {
        let record = record?;
        let line_no = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let mut obj = serde_json::Map::new();
        for (name, i) in &columns {
            if *i == usize::MAX {
                continue;
            }
            match record.get(*i) {
                Some(cell) if !cell.is_empty() => {
                    obj.insert(name.to_string(), Value::String(cell.to_string()));
                }
                _ => {}
            }
        }
        match event_from_object(&obj) {
            Ok(ev) => out.events.push(ev),
            Err(message) => match strictness {
                Strictness::Strict => return Err(IngestError::Malformed { line: line_no, message }),
                Strictness::Lenient => out.issues.push(ParseIssue { line: line_no, message }),
            },
        }
    }
    Ok(out)
}

/// Writes events as JSONL, one object per line, decimal-string amounts.
pub fn write_events_jsonl(events: &[TradeEvent], mut w: impl Write) -> Result<(), IngestError> {
    for ev in events {
        serde_json::to_writer(&mut w, ev).map_err(|e| IngestError::Malformed {
            line: 0,
            message: e.to_string(),
        })?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Writes events as CSV with a header row.
pub fn write_events_csv(events: &[TradeEvent], w: impl Write) -> Result<(), IngestError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(FIELDS)?;
    for ev in events {
        wtr.write_record([
            format_timestamp(ev.timestamp).as_str(),
            ev.local_time.as_deref().unwrap_or(""),
            &ev.signature,
            &ev.mint,
            &ev.coin_creator,
            &ev.trader,
            ev.tx_type.as_str(),
            if ev.in_bonding_curve { "true" } else { "false" },
            &fixed::format_sol(ev.v_sol),
            &fixed::format_tokens(ev.v_tok),
            &fixed::format_sol(ev.sol_amount),
            &fixed::format_tokens(ev.token_amount),
            if ev.is_bot { "1" } else { "0" },
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

fn format_timestamp(t: f64) -> String {
    // Shortest representation that parses back to the same f64.
    let mut s = format!("{t}");
    if !s.contains('.') && !s.contains('e') {
        s.push_str(".0");
    }
    s
}

/// Re-labels the bot flag in place. The default ingestion is pass-through;
/// callers with their own classification apply it here.
pub fn reclassify_bots(events: &mut [TradeEvent], classify: impl Fn(&TradeEvent) -> bool) {
    for ev in events.iter_mut() {
        ev.is_bot = classify(ev);
    }
}

/// All events of one token in causal order, with derived lifecycle facts.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenTrajectory {
    pub mint: String,
    pub creator: String,
    pub events: Vec<TradeEvent>,
    pub graduated: bool,
    /// Timestamp of the create event, unix seconds.
    pub t_create: f64,
    /// Seconds from create to the first event at or past the graduation
    /// threshold.
    pub t_grad: Option<f64>,
    /// Swaps (create excluded) from launch through the graduating event.
    pub grad_steps: Option<u32>,
    /// Highest curve SOL reading over the token's life.
    pub max_v_sol: Lamports,
}

impl TokenTrajectory {
    /// Buy and sell events, create excluded.
    pub fn n_trades(&self) -> usize {
        self.events.iter().filter(|e| e.tx_type != TxType::Create).count()
    }

    /// Marginal curve price after each bonding-curve event, starting with
    /// the launch state. One entry per event, SOL per whole token.
    pub fn bonding_prices(&self) -> Vec<f64> {
        self.events
            .iter()
            .filter(|e| e.in_bonding_curve && e.v_tok > 0)
            .map(|e| fixed::sol_f64(e.v_sol) / fixed::tokens_f64(e.v_tok))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum QuarantineReason {
    /// No create event anywhere in the mint's records.
    MissingCreate,
    /// A record predates the create event.
    TradeBeforeCreate,
    /// More than one create event.
    DuplicateCreate,
}

#[derive(Debug, Clone, Serialize)]
pub struct Quarantine {
    pub mint: String,
    pub reason: QuarantineReason,
    pub n_events: usize,
}

#[derive(Debug, Default)]
pub struct BuildOutput {
    pub trajectories: BTreeMap<String, TokenTrajectory>,
    pub quarantined: Vec<Quarantine>,
}

/// Groups events by mint and orders each group by (timestamp, signature,
/// input position). Signatures are unique in well-formed logs, so the
/// result does not depend on input order. Mints whose ordered records do
/// not start with exactly one create event are quarantined with a reason
/// instead of producing a trajectory.
pub fn build_trajectories(events: Vec<TradeEvent>, params: &CurveParams) -> BuildOutput {
    let mut groups: BTreeMap<String, Vec<(usize, TradeEvent)>> = BTreeMap::new();
    for (idx, ev) in events.into_iter().enumerate() {
        groups.entry(ev.mint.clone()).or_default().push((idx, ev));
    }
    let mut out = BuildOutput::default();
    for (mint, mut group) in groups {
        group.sort_by(|(ia, a), (ib, b)| {
            a.timestamp
                .total_cmp(&b.timestamp)
                .then_with(|| a.signature.cmp(&b.signature))
                .then_with(|| ia.cmp(ib))
        });
        let ordered: Vec<TradeEvent> = group.into_iter().map(|(_, e)| e).collect();
        let n_creates = ordered.iter().filter(|e| e.tx_type == TxType::Create).count();
        let reason = if n_creates == 0 {
            Some(QuarantineReason::MissingCreate)
        } else if n_creates > 1 {
            Some(QuarantineReason::DuplicateCreate)
        } else if ordered[0].tx_type != TxType::Create {
            Some(QuarantineReason::TradeBeforeCreate)
        } else {
            None
        };
        if let Some(reason) = reason {
            out.quarantined.push(Quarantine { mint, reason, n_events: ordered.len() });
            continue;
        }
        let create = &ordered[0];
        let t_create = create.timestamp;
        let creator = create.coin_creator.clone();
        let mut max_v_sol = 0;
        let mut t_grad = None;
        let mut grad_steps = None;
        let mut swaps = 0u32;
        for ev in &ordered {
            if !ev.in_bonding_curve {
                continue;
            }
            if ev.tx_type != TxType::Create {
                swaps += 1;
            }
            max_v_sol = max_v_sol.max(ev.v_sol);
            if t_grad.is_none() && ev.v_sol >= params.x_graduate_total {
                t_grad = Some(ev.timestamp - t_create);
                grad_steps = Some(swaps);
            }
        }
        out.trajectories.insert(
            mint.clone(),
            TokenTrajectory {
                mint,
                creator,
                events: ordered,
                graduated: max_v_sol >= params.x_graduate_total,
                t_create,
                t_grad,
                grad_steps,
                max_v_sol,
            },
        );
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    /// Reserve product strays from the launch invariant.
    InvariantDrift,
    /// Curve SOL outside the launch-to-graduation band.
    VSolOutOfRange,
    /// A buy lowered, or a sell raised, the curve SOL.
    WrongDirection,
    /// State change disagrees with the recorded SOL amount.
    SolStepMismatch,
    /// State change disagrees with the recorded token amount.
    TokStepMismatch,
    /// Create event carries nonzero amounts.
    NonzeroCreate,
}

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub event_index: usize,
    pub signature: String,
    pub kind: ViolationKind,
    pub detail: String,
}

#[derive(Debug, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks a trajectory's bonding-curve events against the curve mechanics:
/// the reserve product must stay within `tol` (relative) of the launch
/// invariant, curve SOL must stay in the launch-to-graduation band and move
/// in the trade's direction, and each step must match the recorded gross
/// SOL amount (net of fee on buys) and token amount within `tol`.
pub fn validate_trajectory(traj: &TokenTrajectory, params: &CurveParams, tol: f64) -> ValidationReport {
    let mut report = ValidationReport::default();
    let k = params.invariant();
    let mut flag = |idx: usize, sig: &str, kind: ViolationKind, detail: String| {
        report.violations.push(Violation { event_index: idx, signature: sig.to_string(), kind, detail });
    };
    let mut prev: Option<&TradeEvent> = None;
    for (idx, ev) in traj.events.iter().enumerate() {
        if !ev.in_bonding_curve {
            continue;
        }
        if ev.v_sol < params.x_virtual0 || ev.v_sol > params.x_graduate_total {
            flag(idx, &ev.signature, ViolationKind::VSolOutOfRange, format!("v_sol = {}", fixed::format_sol(ev.v_sol)));
        }
        let prod = ev.v_sol as u128 * ev.v_tok as u128;
        let drift = prod.abs_diff(k) as f64 / k as f64;
        if drift > tol {
            flag(idx, &ev.signature, ViolationKind::InvariantDrift, format!("relative drift {drift:.3e}"));
        }
        match (ev.tx_type, prev) {
            (TxType::Create, _) => {
                if ev.sol_amount != 0 || ev.token_amount != 0 {
                    flag(idx, &ev.signature, ViolationKind::NonzeroCreate, "create event with nonzero amounts".to_string());
                }
            }
            (tx, Some(p)) => {
                let (rose, expect_dx, actual_dx, expect_dy, actual_dy) = match tx {
                    TxType::Buy => (
                        ev.v_sol >= p.v_sol,
                        fixed::mul_ppm_floor(ev.sol_amount, params.retained_ppm()),
                        ev.v_sol.saturating_sub(p.v_sol),
                        ev.token_amount,
                        p.v_tok.saturating_sub(ev.v_tok),
                    ),
                    TxType::Sell => (
                        ev.v_sol <= p.v_sol,
                        ev.sol_amount,
                        p.v_sol.saturating_sub(ev.v_sol),
                        ev.token_amount,
                        ev.v_tok.saturating_sub(p.v_tok),
                    ),
                    TxType::Create => unreachable!(),
                };
                if !rose {
                    flag(idx, &ev.signature, ViolationKind::WrongDirection, format!("{} moved v_sol the wrong way", tx.as_str()));
                } else {
                    let dx_err = expect_dx.abs_diff(actual_dx) as f64;
                    if dx_err > tol * (expect_dx.max(1) as f64) {
                        flag(
                            idx,
                            &ev.signature,
                            ViolationKind::SolStepMismatch,
                            format!("state moved {actual_dx} lamports, amount implies {expect_dx}"),
                        );
                    }
                    let dy_err = expect_dy.abs_diff(actual_dy) as f64;
                    if dy_err > tol * (expect_dy.max(1) as f64) {
                        flag(
                            idx,
                            &ev.signature,
                            ViolationKind::TokStepMismatch,
                            format!("state moved {actual_dy} base units, amount says {expect_dy}"),
                        );
                    }
                }
            }
            (_, None) => {}
        }
        prev = Some(ev);
    }
    report
}
