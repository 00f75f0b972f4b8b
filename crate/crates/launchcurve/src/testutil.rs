//! Shared fixture builders for unit tests.

use crate::curve::CurveParams;
use crate::fixed::{self, Lamports};
use crate::ingest::{TokenTrajectory, TradeEvent, TxType};
use std::collections::BTreeMap;

const SOL: u64 = fixed::LAMPORTS_PER_SOL;

/// Hand-built trajectory: create at `t0`, then one swap per entry of
/// `(v_sol_lamports, trader, is_bot)`, one second apart. Token reserves
/// are a constant placeholder, so marginal prices move exactly with
/// `v_sol`.
pub(crate) fn traj_lamports(mint: &str, creator: &str, t0: f64, path: &[(Lamports, &str, bool)]) -> TokenTrajectory {
    let params = CurveParams::default();
    let mut events = vec![TradeEvent {
        timestamp: t0,
        local_time: None,
        signature: format!("{mint}-c"),
        mint: mint.to_string(),
        coin_creator: creator.to_string(),
        trader: creator.to_string(),
        tx_type: TxType::Create,
        in_bonding_curve: true,
        v_sol: params.x_virtual0,
        v_tok: params.initial_token_reserve(),
        sol_amount: 0,
        token_amount: 0,
        is_bot: false,
    }];
    let mut prev = params.x_virtual0;
    for (i, (v_sol, trader, is_bot)) in path.iter().enumerate() {
        let tx_type = if *v_sol >= prev { TxType::Buy } else { TxType::Sell };
        events.push(TradeEvent {
            timestamp: t0 + (i as f64 + 1.0),
            local_time: None,
            signature: format!("{mint}-{i:03}"),
            mint: mint.to_string(),
            coin_creator: creator.to_string(),
            trader: trader.to_string(),
            tx_type,
            in_bonding_curve: true,
            v_sol: *v_sol,
            v_tok: params.initial_token_reserve(),
            sol_amount: v_sol.abs_diff(prev),
            token_amount: 1,
            is_bot: *is_bot,
        });
        prev = *v_sol;
    }
    let max_v_sol = events.iter().map(|e| e.v_sol).max().unwrap();
    let graduated = max_v_sol >= params.x_graduate_total;
    let grad_at = events.iter().find(|e| e.v_sol >= params.x_graduate_total);
    TokenTrajectory {
        mint: mint.to_string(),
        creator: creator.to_string(),
        graduated,
        t_create: t0,
        t_grad: grad_at.map(|e| e.timestamp - t0),
        grad_steps: grad_at.map(|e| {
            events.iter().take_while(|x| x.timestamp < e.timestamp).filter(|x| x.tx_type != TxType::Create).count() as u32 + 1
        }),
        max_v_sol,
        events,
    }
}

/// [`traj_lamports`] with the path given in whole SOL.
pub(crate) fn traj(mint: &str, creator: &str, t0: f64, path: &[(u64, &str, bool)]) -> TokenTrajectory {
    let scaled: Vec<(Lamports, &str, bool)> = path.iter().map(|(sol, w, b)| (sol * SOL, *w, *b)).collect();
    traj_lamports(mint, creator, t0, &scaled)
}

pub(crate) fn map(trajs: Vec<TokenTrajectory>) -> BTreeMap<String, TokenTrajectory> {
    trajs.into_iter().map(|t| (t.mint.clone(), t)).collect()
}
