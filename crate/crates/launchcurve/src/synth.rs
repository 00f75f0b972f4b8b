//! Deterministic synthetic trade-log generation.
//!
//! Every generated swap is priced through the live curve, so synthetic
//! logs replay cleanly through ingestion and state validation by
//! construction. Each token draws from its own counter-mode RNG stream,
//! which makes single tokens reproducible in isolation and the whole
//! market independent of generation order.

use crate::curve::{CurveParams, CurveState};
use crate::fixed::{self, Lamports, TokenUnits};
use crate::ingest::{TradeEvent, TxType};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    BadConfig(String),
}

/// Coordinated sell-off behavior for tokens drawn into the dump arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DumpSynthConfig {
    /// Probability a non-graduating token stages a dump.
    pub probability: f64,
    /// Fraction of accumulated inventory unloaded at the trigger.
    pub inventory_fraction: f64,
    /// Wallets colluding on the accumulation and the dump.
    pub n_dump_wallets: usize,
    /// Curve SOL level the walk-up aims for before the dump.
    pub v_sol_trigger_sol: f64,
    /// Swaps before the dump; keep comfortably above the detector's
    /// baseline window so the trigger lands in the scanned region.
    pub pre_dump_trades: usize,
    /// Share of walk-up buys routed through the dump wallets.
    pub accumulation_share: f64,
}

impl Default for DumpSynthConfig {
    fn default() -> Self {
        DumpSynthConfig {
            probability: 0.01,
            inventory_fraction: 0.9,
            n_dump_wallets: 2,
            v_sol_trigger_sol: 90.0,
            pre_dump_trades: 230,
            accumulation_share: 0.45,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_tokens: usize,
    pub seed: u64,
    /// Unix seconds of the first possible creation.
    pub start_time: f64,
    /// Creations spread uniformly over this span.
    pub time_span_secs: f64,
    /// Per-token graduation probability.
    pub target_grad_rate: f64,
    /// Share of graduations that happen at sniper speed.
    pub fast_grad_prob: f64,
    /// Beta parameters of the per-token bot trade share.
    pub bot_share_alpha: f64,
    pub bot_share_beta: f64,
    /// Median free-form buy size in SOL and its log-scale spread.
    pub buy_size_median_sol: f64,
    pub buy_size_log_sigma: f64,
    /// Chance a mid-walk step is a sell instead of a buy.
    pub sell_prob: f64,
    pub n_wallets: usize,
    pub n_creators: usize,
    /// Power-law skew of wallet and creator activity; higher values
    /// concentrate flow on fewer identities.
    pub identity_skew: f64,
    pub mean_interarrival_secs: f64,
    pub fast_interarrival_secs: f64,
    /// Median swap count of a graduating walk and its log-scale spread.
    pub grad_steps_median: f64,
    pub grad_steps_log_sigma: f64,
    /// Median swap count of a fizzling token and its log-scale spread.
    pub fizzle_steps_median: f64,
    pub fizzle_steps_log_sigma: f64,
    /// Median fizzle peak in SOL above the launch seed.
    pub fizzle_peak_median_sol: f64,
    pub fizzle_peak_log_sigma: f64,
    pub dump: DumpSynthConfig,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_tokens: 1000,
            seed: 7,
            start_time: 1_735_689_600.0,
            time_span_secs: 30.0 * 86_400.0,
            target_grad_rate: 0.006,
            fast_grad_prob: 0.25,
            bot_share_alpha: 2.0,
            bot_share_beta: 3.0,
            buy_size_median_sol: 0.35,
            buy_size_log_sigma: 1.0,
            sell_prob: 0.22,
            n_wallets: 20_000,
            n_creators: 1_500,
            identity_skew: 2.5,
            mean_interarrival_secs: 20.0,
            fast_interarrival_secs: 0.03,
            grad_steps_median: 130.0,
            grad_steps_log_sigma: 0.45,
            fizzle_steps_median: 10.0,
            fizzle_steps_log_sigma: 1.2,
            fizzle_peak_median_sol: 2.0,
            fizzle_peak_log_sigma: 1.3,
            dump: DumpSynthConfig::default(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let prob = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) && v.is_finite() {
                Ok(())
            } else {
                Err(SynthError::BadConfig(format!("{name} = {v} is not a probability")))
            }
        };
        prob("target_grad_rate", self.target_grad_rate)?;
        prob("fast_grad_prob", self.fast_grad_prob)?;
        prob("sell_prob", self.sell_prob)?;
        prob("dump.probability", self.dump.probability)?;
        prob("dump.inventory_fraction", self.dump.inventory_fraction)?;
        prob("dump.accumulation_share", self.dump.accumulation_share)?;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(SynthError::BadConfig(format!("{name} = {v} must be positive")))
            }
        };
        positive("time_span_secs", self.time_span_secs)?;
        positive("bot_share_alpha", self.bot_share_alpha)?;
        positive("bot_share_beta", self.bot_share_beta)?;
        positive("buy_size_median_sol", self.buy_size_median_sol)?;
        positive("mean_interarrival_secs", self.mean_interarrival_secs)?;
        positive("fast_interarrival_secs", self.fast_interarrival_secs)?;
        positive("grad_steps_median", self.grad_steps_median)?;
        positive("fizzle_steps_median", self.fizzle_steps_median)?;
        positive("fizzle_peak_median_sol", self.fizzle_peak_median_sol)?;
        positive("identity_skew", self.identity_skew)?;
        positive("dump.v_sol_trigger_sol", self.dump.v_sol_trigger_sol)?;
        if self.n_tokens == 0 || self.n_wallets == 0 || self.n_creators == 0 {
            return Err(SynthError::BadConfig("token, wallet and creator counts must be positive".to_string()));
        }
        if self.dump.n_dump_wallets == 0 || self.dump.pre_dump_trades == 0 {
            return Err(SynthError::BadConfig("dump wallet and trade counts must be positive".to_string()));
        }
        Ok(())
    }
}

/// Behavioral archetype of one token's life.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Graduate { fast: bool },
    Dump,
    Fizzle,
}

/// Smallest buy the generator will place.
const MIN_BUY_GROSS: Lamports = 1_000_000;
/// Non-graduating walks never push the curve past this level.
const WALK_CEILING_SOL: f64 = 105.0;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn token_rng(config: &SynthConfig, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1 + index as u64);
    rng
}

fn power_law_index(rng: &mut ChaCha8Rng, n: usize, skew: f64) -> usize {
    let u: f64 = rng.gen();
    ((n as f64 * u.powf(skew)) as usize).min(n - 1)
}

fn draw_kind(rng: &mut ChaCha8Rng, config: &SynthConfig) -> TokenKind {
    if rng.gen_bool(config.target_grad_rate) {
        TokenKind::Graduate { fast: rng.gen_bool(config.fast_grad_prob) }
    } else if rng.gen_bool(config.dump.probability) {
        TokenKind::Dump
    } else {
        TokenKind::Fizzle
    }
}

struct TokenGen<'a> {
    config: &'a SynthConfig,
    params: &'a CurveParams,
    rng: ChaCha8Rng,
    sig_state: u64,
    mint: String,
    creator: String,
    bot_share: f64,
    interarrival: Exp<f64>,
    state: CurveState,
    t: f64,
    inventory: BTreeMap<String, TokenUnits>,
    events: Vec<TradeEvent>,
}

impl<'a> TokenGen<'a> {
    fn new(config: &'a SynthConfig, params: &'a CurveParams, index: usize, kind: TokenKind) -> TokenGen<'a> {
        let mut rng = token_rng(config, index);
        let creator_idx = power_law_index(&mut rng, config.n_creators, config.identity_skew);
        let t0 = config.start_time + rng.gen::<f64>() * config.time_span_secs;
        let bot_share = Beta::new(config.bot_share_alpha, config.bot_share_beta)
            .expect("validated beta parameters")
            .sample(&mut rng);
        let mean = if matches!(kind, TokenKind::Graduate { fast: true }) {
            config.fast_interarrival_secs
        } else {
            config.mean_interarrival_secs
        };
        let mint = format!("mint_{index:06}");
        let creator = format!("c_{creator_idx:04}");
        let state = CurveState::init(params).expect("default params are valid");
        let mut gen = TokenGen {
            config,
            params,
            rng,
            sig_state: {
                let mut s = config.seed.wrapping_add((index as u64).wrapping_mul(0x9e3779b97f4a7c15));
                splitmix64(&mut s)
            },
            mint: mint.clone(),
            creator: creator.clone(),
            bot_share,
            interarrival: Exp::new(1.0 / mean).expect("positive interarrival"),
            state,
            t: t0,
            inventory: BTreeMap::new(),
            events: Vec::new(),
        };
        let signature = gen.next_signature();
        gen.events.push(TradeEvent {
            timestamp: t0,
            local_time: None,
            signature,
            mint,
            coin_creator: creator.clone(),
            trader: creator,
            tx_type: TxType::Create,
            in_bonding_curve: true,
            v_sol: gen.state.x_tot,
            v_tok: gen.state.y_tot,
            sol_amount: 0,
            token_amount: 0,
            is_bot: false,
        });
        gen
    }

    fn next_signature(&mut self) -> String {
        format!("{:016x}{:016x}", splitmix64(&mut self.sig_state), splitmix64(&mut self.sig_state))
    }

    fn advance_clock(&mut self) {
        self.t += self.interarrival.sample(&mut self.rng);
    }

    fn pick_wallet(&mut self) -> String {
        let idx = power_law_index(&mut self.rng, self.config.n_wallets, self.config.identity_skew);
        format!("w_{idx:05}")
    }

    fn push_swap(&mut self, trader: String, tx_type: TxType, sol_amount: Lamports, token_amount: TokenUnits) {
        let is_bot = self.rng.gen_bool(self.bot_share);
        let signature = self.next_signature();
        self.events.push(TradeEvent {
            timestamp: self.t,
            local_time: None,
            signature,
            mint: self.mint.clone(),
            coin_creator: self.creator.clone(),
            trader,
            tx_type,
            in_bonding_curve: true,
            v_sol: self.state.x_tot,
            v_tok: self.state.y_tot,
            sol_amount,
            token_amount,
            is_bot,
        });
    }

    fn buy(&mut self, trader: String, gross: Lamports) {
        let gross = gross.max(MIN_BUY_GROSS);
        let quote = self.state.quote_buy(gross, self.params).expect("buy on live curve");
        self.state = quote.new_state;
        self.advance_clock();
        *self.inventory.entry(trader.clone()).or_insert(0) += quote.delta_y;
        self.push_swap(trader, TxType::Buy, quote.delta_x_gross, quote.delta_y);
    }

    /// Sells `fraction` of one holder's stack; picks the holder at random.
    fn sell_some(&mut self, fraction: f64) -> bool {
        let holders: Vec<String> = self
            .inventory
            .iter()
            .filter(|(_, units)| **units > 0)
            .map(|(w, _)| w.clone())
            .collect();
        if holders.is_empty() {
            return false;
        }
        let trader = holders[self.rng.gen_range(0..holders.len())].clone();
        let held = self.inventory[&trader];
        let amount = ((held as f64 * fraction) as TokenUnits).clamp(1, held);
        self.sell_exact(trader, amount);
        true
    }

    fn sell_exact(&mut self, trader: String, amount: TokenUnits) {
        let quote = self.state.quote_sell(amount, self.params).expect("inventory-bounded sell");
        self.state = quote.new_state;
        self.advance_clock();
        *self.inventory.get_mut(&trader).expect("seller holds tokens") -= quote.delta_y;
        self.push_swap(trader, TxType::Sell, quote.delta_x_gross, quote.delta_y);
    }

    /// One steered step toward `target_x`: usually a buy sized to arrive
    /// in the remaining steps, sometimes a sell. Never overshoots the
    /// target.
    fn steered_step(&mut self, target_x: Lamports, remaining: usize, margin: Lamports, accumulate: Option<&str>) {
        let gap = target_x.saturating_sub(self.state.x_tot);
        let sell_frac = self.rng.gen_range(0.1..0.6);
        if self.rng.gen_bool(self.config.sell_prob) && self.sell_some(sell_frac) {
            return;
        }
        let per_step = gap as f64 / remaining.max(1) as f64;
        let jitter: f64 = self.rng.gen_range(0.5..1.8);
        let ceiling = gap.saturating_sub(margin);
        if ceiling < MIN_BUY_GROSS {
            self.sell_some(0.2);
            return;
        }
        let net = ((per_step * jitter) as Lamports).clamp(MIN_BUY_GROSS, ceiling);
        let trader = match accumulate {
            Some(w) => w.to_string(),
            None => self.pick_wallet(),
        };
        let gross = self.params.gross_for_net(net);
        self.buy(trader, gross);
    }

    fn run_graduate(&mut self) {
        let steps = LogNormal::new(self.config.grad_steps_median.ln(), self.config.grad_steps_log_sigma)
            .expect("validated step distribution")
            .sample(&mut self.rng)
            .round()
            .clamp(5.0, 2_000.0) as usize;
        let margin = fixed::LAMPORTS_PER_SOL / 2;
        for step in 0..steps.saturating_sub(1) {
            self.steered_step(self.params.x_graduate_total, steps - step, margin, None);
        }
        let headroom = self.params.x_graduate_total - self.state.x_tot;
        let trader = self.pick_wallet();
        let gross = self.params.gross_for_net(headroom);
        self.buy(trader, gross);
        debug_assert!(self.state.graduated);
    }

    fn run_dump(&mut self) {
        let cfg = &self.config.dump;
        let dump_wallets: Vec<String> = (0..cfg.n_dump_wallets).map(|_| self.pick_wallet()).collect();
        let steps = cfg.pre_dump_trades + self.rng.gen_range(0..20);
        let target = (cfg.v_sol_trigger_sol * fixed::LAMPORTS_PER_SOL as f64) as Lamports;
        for step in 0..steps {
            let accumulate = if self.rng.gen_bool(cfg.accumulation_share) {
                Some(dump_wallets[step % dump_wallets.len()].as_str().to_string())
            } else {
                None
            };
            self.steered_step(target, steps - step, 0, accumulate.as_deref());
        }
        for wallet in &dump_wallets {
            let held = self.inventory.get(wallet).copied().unwrap_or(0);
            let amount = (held as f64 * cfg.inventory_fraction) as TokenUnits;
            if amount > 0 {
                self.sell_exact(wallet.clone(), amount);
            }
        }
        for _ in 0..3 {
            let frac = self.rng.gen_range(0.3..0.9);
            self.sell_some(frac);
        }
    }

    fn run_fizzle(&mut self) {
        let steps = LogNormal::new(self.config.fizzle_steps_median.ln(), self.config.fizzle_steps_log_sigma)
            .expect("validated step distribution")
            .sample(&mut self.rng)
            .round()
            .clamp(1.0, 1_000.0) as usize;
        let peak_above = LogNormal::new(self.config.fizzle_peak_median_sol.ln(), self.config.fizzle_peak_log_sigma)
            .expect("validated peak distribution")
            .sample(&mut self.rng);
        let sol = fixed::LAMPORTS_PER_SOL as f64;
        let target_sol = (fixed::sol_f64(self.params.x_virtual0) + peak_above).min(WALK_CEILING_SOL);
        let target = (target_sol * sol) as Lamports;
        let up_steps = (steps * 3).div_ceil(5).max(1);
        for step in 0..up_steps {
            self.steered_step(target, up_steps - step, 0, None);
        }
        for _ in up_steps..steps {
            let frac = self.rng.gen_range(0.3..1.0);
            if !self.sell_some(frac) {
                let net = (self.rng.gen::<f64>() * 0.05 * sol) as Lamports;
                let headroom = target.saturating_sub(self.state.x_tot);
                if headroom > MIN_BUY_GROSS {
                    let trader = self.pick_wallet();
                    let gross = self.params.gross_for_net(net.clamp(MIN_BUY_GROSS, headroom));
                    self.buy(trader, gross);
                }
            }
        }
    }
}

/// Generates one token's full event list for a forced archetype.
pub fn generate_token_of_kind(
    config: &SynthConfig,
    params: &CurveParams,
    index: usize,
    kind: TokenKind,
) -> Vec<TradeEvent> {
    let mut gen = TokenGen::new(config, params, index, kind);
    match kind {
        TokenKind::Graduate { .. } => gen.run_graduate(),
        TokenKind::Dump => gen.run_dump(),
        TokenKind::Fizzle => gen.run_fizzle(),
    }
    gen.events
}

/// Generates one token, drawing its archetype from the token's own RNG
/// stream.
pub fn generate_token(config: &SynthConfig, params: &CurveParams, index: usize) -> Vec<TradeEvent> {
    let mut rng = token_rng(config, index);
    let kind = draw_kind(&mut rng, config);
    generate_token_of_kind(config, params, index, kind)
}

/// Generates the whole market, sorted by time then signature.
pub fn generate_market(config: &SynthConfig, params: &CurveParams) -> Result<Vec<TradeEvent>, SynthError> {
    config.validate()?;
    params
        .validate()
        .map_err(|e| SynthError::BadConfig(format!("curve params: {e}")))?;
    let mut events = Vec::new();
    for index in 0..config.n_tokens {
        events.extend(generate_token(config, params, index));
    }
    events.sort_by(|a, b| {
        a.timestamp
            .total_cmp(&b.timestamp)
            .then_with(|| a.signature.cmp(&b.signature))
    });
    Ok(events)
}
