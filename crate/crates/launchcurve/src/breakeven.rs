//! Economics of buying at a curve level and holding to graduation.
//!
//! The marginal price grows with the square of curve SOL, so a position
//! entered at level `v` and held to the graduation level `L` multiplies
//! by `(L/v)^2` on success. Treating failure as a total loss, the
//! expected simple return at graduation probability `p` is
//!
//! ```text
//! E[r](v, p) = ((L/v)^2 - 1) * p - (1 - p)
//! ```
//!
//! which is positive exactly when `p` exceeds `(v/L)^2`, the breakeven
//! probability frontier.

use crate::curve::CurveParams;
use crate::estimate::GraduationCurve;
use crate::fixed::{self, Lamports};
use crate::ingest::TokenTrajectory;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BreakevenError {
    #[error("entry level {0} SOL must lie strictly between the launch seed and the graduation level")]
    BadLevel(String),
    #[error("probability {0} must lie in [0, 1]")]
    BadProbability(f64),
}

/// Return model for hold-to-graduation positions on one curve shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BreakevenCurve {
    /// Graduation level in SOL.
    pub grad_level_sol: f64,
}

impl BreakevenCurve {
    pub fn from_params(params: &CurveParams) -> BreakevenCurve {
        BreakevenCurve { grad_level_sol: fixed::sol_f64(params.x_graduate_total) }
    }

    fn check_level(&self, entry_sol: f64) -> Result<(), BreakevenError> {
        if entry_sol.is_finite() && entry_sol > 0.0 && entry_sol <= self.grad_level_sol {
            Ok(())
        } else {
            Err(BreakevenError::BadLevel(format!("{entry_sol}")))
        }
    }

    /// Price multiple gained by holding from `entry_sol` to graduation.
    pub fn win_multiple(&self, entry_sol: f64) -> Result<f64, BreakevenError> {
        self.check_level(entry_sol)?;
        let ratio = self.grad_level_sol / entry_sol;
        Ok(ratio * ratio)
    }

    /// Expected simple return of entering at `entry_sol` when the token
    /// graduates with probability `p` and otherwise goes to zero.
    pub fn expected_return(&self, entry_sol: f64, p: f64) -> Result<f64, BreakevenError> {
        if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
            return Err(BreakevenError::BadProbability(p));
        }
        let win = self.win_multiple(entry_sol)? - 1.0;
        Ok(win * p - (1.0 - p))
    }

    /// Graduation probability at which the expected return is zero.
    pub fn breakeven_probability(&self, entry_sol: f64) -> Result<f64, BreakevenError> {
        self.check_level(entry_sol)?;
        let ratio = entry_sol / self.grad_level_sol;
        Ok(ratio * ratio)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierRow {
    pub level: Lamports,
    pub breakeven_p: f64,
    /// Empirical graduation probability at the level, when supplied.
    pub p_hat: Option<f64>,
    /// Expected return at `p_hat`, when defined.
    pub expected_return: Option<f64>,
}

/// Breakeven frontier across an estimated curve: each row pairs the
/// structural breakeven probability with the empirical estimate and the
/// implied edge.
pub fn frontier(curve: &GraduationCurve, model: &BreakevenCurve) -> Result<Vec<FrontierRow>, BreakevenError> {
    curve
        .rows
        .iter()
        .map(|row| {
            let level_sol = fixed::sol_f64(row.level);
            let breakeven_p = model.breakeven_probability(level_sol)?;
            let expected_return = match row.p {
                Some(p) => Some(model.expected_return(level_sol, p)?),
                None => None,
            };
            Ok(FrontierRow { level: row.level, breakeven_p, p_hat: row.p, expected_return })
        })
        .collect()
}

pub fn frontier_to_csv(rows: &[FrontierRow]) -> String {
    let mut out = String::from("level,breakeven_p,p_hat,expected_return\n");
    for row in rows {
        let fmt = |v: Option<f64>| v.map(fixed::format_sig12).unwrap_or_else(|| "null".to_string());
        out.push_str(&format!(
            "{},{},{},{}\n",
            fixed::format_sol(row.level),
            fixed::format_sig12(row.breakeven_p),
            fmt(row.p_hat),
            fmt(row.expected_return)
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenReturn {
    pub mint: String,
    pub graduated: bool,
    /// Simple return of the hold-to-graduation position.
    pub ret: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestResult {
    pub entry_level: Lamports,
    pub n_entered: u64,
    pub n_graduated: u64,
    /// `(L/v)^2` price multiple on graduation.
    pub win_multiple: f64,
    /// Mean simple return over entered tokens; absent when none entered.
    pub mean_return: Option<f64>,
    /// Empirical graduation probability among entered tokens.
    pub p_hat: Option<f64>,
    pub per_token: Vec<TokenReturn>,
}

/// Buys every token the first time its curve SOL strictly exceeds the
/// entry level and holds: graduated tokens pay the win multiple minus
/// one, the rest are written off at -1. The mean return then equals
/// [`BreakevenCurve::expected_return`] at the empirical graduation
/// fraction by construction.
pub fn backtest_buy_and_hold(
    trajs: &BTreeMap<String, TokenTrajectory>,
    entry_level: Lamports,
    params: &CurveParams,
) -> Result<BacktestResult, BreakevenError> {
    if entry_level <= params.x_virtual0 || entry_level >= params.x_graduate_total {
        return Err(BreakevenError::BadLevel(fixed::format_sol(entry_level)));
    }
    let model = BreakevenCurve::from_params(params);
    let entry_sol = fixed::sol_f64(entry_level);
    let win = model.win_multiple(entry_sol)? - 1.0;
    let mut per_token = Vec::new();
    let mut n_graduated = 0u64;
    for traj in trajs.values() {
        if traj.max_v_sol <= entry_level {
            continue;
        }
        if traj.graduated {
            n_graduated += 1;
        }
        per_token.push(TokenReturn {
            mint: traj.mint.clone(),
            graduated: traj.graduated,
            ret: if traj.graduated { win } else { -1.0 },
        });
    }
    let n_entered = per_token.len() as u64;
    let p_hat = (n_entered > 0).then(|| n_graduated as f64 / n_entered as f64);
    // Mean through the graduated count, so that it matches the model
    // identity at p_hat bit for bit.
    let mean_return = p_hat.map(|p| win * p - (1.0 - p));
    Ok(BacktestResult {
        entry_level,
        n_entered,
        n_graduated,
        win_multiple: win + 1.0,
        mean_return,
        p_hat,
        per_token,
    })
}
