//! Constant-product bonding curve with virtual reserves, trade fees,
//! graduation and migration to the real pool.
//!
//! The curve holds `x` SOL (part virtual, part deposited) and `y` tokens
//! with `x * y = k` fixed at launch. Buys deposit SOL net of fee and
//! withdraw tokens; sells deposit tokens and withdraw SOL, with the fee
//! charged on the SOL side in both directions. Once total SOL reaches the
//! graduation threshold the curve seals and the real-pool reserves take
//! over.
//!
//! All arithmetic is integer: lamports for SOL, base units for tokens,
//! 128-bit intermediates for products. Trader-facing outputs round down.
//! The SOL ledger `x_tot` is exact; the token reserve is re-derived as
//! `floor(k / x_tot)` after every trade, so `|x_tot * y_tot - k|` stays
//! below ten token base units times `x_tot` and equal net deposits reach
//! identical states regardless of how they are split into trades.

use crate::fixed::{self, Lamports, TokenUnits, PPM};
use thiserror::Error;

pub const DEFAULT_X_VIRTUAL: Lamports = 30_000_000_000;
pub const DEFAULT_Y_TOKEN_CURVE: TokenUnits = 793_100_000_000_000;
pub const DEFAULT_Y_VIRTUAL: TokenUnits = 279_900_000_000_000;
pub const DEFAULT_Y_TOKEN_POOL: TokenUnits = 206_900_000_000_000;
pub const DEFAULT_X_GRADUATE_TOTAL: Lamports = 115_000_000_000;
pub const DEFAULT_X_GRADUATE_REAL: Lamports = 85_000_000_000;
pub const DEFAULT_FEE_TOTAL_PPM: u64 = 12_500;
pub const DEFAULT_FEE_CREATOR_PPM: u64 = 3_000;
pub const DEFAULT_FEE_PLATFORM_PPM: u64 = 9_500;

/// Reserve magnitudes above this would risk overflowing the 128-bit
/// product space together with the ppm scaling.
const MAX_RESERVE: u64 = 1_000_000_000_000_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CurveError {
    #[error("invalid curve parameters: {0}")]
    InvalidParams(String),
    #[error("curve has graduated; the bonding pool no longer trades")]
    Graduated,
    #[error("curve has not graduated yet")]
    NotGraduated,
    #[error("sell of {requested} base units exceeds circulating supply of {available}")]
    Oversell { requested: TokenUnits, available: TokenUnits },
    #[error("arithmetic overflow in curve math")]
    MathOverflow,
}

/// Linear post-graduation creator fee schedule: `fee_lo_ppm` at pool SOL
/// `x_lo`, falling linearly to `fee_hi_ppm` at `x_hi` and clamped outside
/// that range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CreatorFeeSchedule {
    pub x_lo: Lamports,
    pub fee_lo_ppm: u64,
    pub x_hi: Lamports,
    pub fee_hi_ppm: u64,
}

impl Default for CreatorFeeSchedule {
    fn default() -> Self {
        CreatorFeeSchedule {
            x_lo: DEFAULT_X_GRADUATE_REAL,
            fee_lo_ppm: 9_500,
            x_hi: 4 * DEFAULT_X_GRADUATE_REAL,
            fee_hi_ppm: 500,
        }
    }
}

impl CreatorFeeSchedule {
    /// Scheduled creator fee in ppm at a given pool SOL balance.
    pub fn fee_ppm_at(&self, x_pool: Lamports) -> u64 {
        if x_pool <= self.x_lo {
            return self.fee_lo_ppm;
        }
        if x_pool >= self.x_hi {
            return self.fee_hi_ppm;
        }
        let span = (self.x_hi - self.x_lo) as u128;
        let pos = (x_pool - self.x_lo) as u128;
        let lo = self.fee_lo_ppm as u128;
        let hi = self.fee_hi_ppm as u128;
        if lo >= hi {
            (lo - (lo - hi) * pos / span) as u64
        } else {
            (lo + (hi - lo) * pos / span) as u64
        }
    }
}

/// Launch parameters of the bonding curve and its graduation pool.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveParams {
    /// Virtual SOL seeding the curve at launch.
    pub x_virtual0: Lamports,
    /// Mint tokens allocated to the bonding curve.
    pub y_token_curve0: TokenUnits,
    /// Virtual token padding on top of the curve allocation.
    pub y_virtual0: TokenUnits,
    /// Mint tokens reserved for the post-graduation pool.
    pub y_token_pool0: TokenUnits,
    /// Total SOL (virtual plus deposited) at which the curve graduates.
    pub x_graduate_total: Lamports,
    /// Real SOL deposited into the post-graduation pool.
    pub x_graduate_real: Lamports,
    /// Total trade fee on the SOL side, parts per million.
    pub fee_total_ppm: u64,
    /// Creator share of the trade fee, parts per million.
    pub fee_creator_ppm: u64,
    /// Platform share of the trade fee, parts per million.
    pub fee_platform_ppm: u64,
    /// Flat SOL haircut taken at migration. Zero by default.
    pub migration_gas_fee: Lamports,
    /// Decimal places of the token base units.
    pub token_decimals: u32,
    /// Optional declining creator fee on the post-graduation pool.
    /// Disabled by default; the bonding-curve fee fields above always
    /// govern pre-graduation trades.
    pub creator_fee_schedule: Option<CreatorFeeSchedule>,
}

impl Default for CurveParams {
    fn default() -> Self {
        CurveParams {
            x_virtual0: DEFAULT_X_VIRTUAL,
            y_token_curve0: DEFAULT_Y_TOKEN_CURVE,
            y_virtual0: DEFAULT_Y_VIRTUAL,
            y_token_pool0: DEFAULT_Y_TOKEN_POOL,
            x_graduate_total: DEFAULT_X_GRADUATE_TOTAL,
            x_graduate_real: DEFAULT_X_GRADUATE_REAL,
            fee_total_ppm: DEFAULT_FEE_TOTAL_PPM,
            fee_creator_ppm: DEFAULT_FEE_CREATOR_PPM,
            fee_platform_ppm: DEFAULT_FEE_PLATFORM_PPM,
            migration_gas_fee: 0,
            token_decimals: fixed::TOKEN_DECIMALS,
            creator_fee_schedule: None,
        }
    }
}

impl CurveParams {
    pub fn validate(&self) -> Result<(), CurveError> {
        let err = |m: &str| Err(CurveError::InvalidParams(m.to_string()));
        if self.x_virtual0 == 0 || self.y_token_curve0 == 0 || self.y_virtual0 == 0 || self.y_token_pool0 == 0 {
            return err("reserves must be strictly positive");
        }
        if self.x_graduate_total == 0 || self.x_graduate_real == 0 {
            return err("graduation thresholds must be strictly positive");
        }
        if self.x_graduate_total <= self.x_virtual0 {
            return err("graduation total must exceed the virtual SOL seed");
        }
        if self.x_graduate_total - self.x_graduate_real != self.x_virtual0 {
            return err("graduation total minus real deposit must equal the virtual SOL seed");
        }
        if self.fee_creator_ppm + self.fee_platform_ppm != self.fee_total_ppm {
            return err("creator and platform fee shares must sum to the total fee");
        }
        if self.fee_total_ppm >= PPM {
            return err("total fee must be below 100%");
        }
        if self.x_graduate_total > MAX_RESERVE
            || self.initial_token_reserve() > MAX_RESERVE
            || self.migration_gas_fee > self.x_graduate_real
        {
            return err("reserve magnitudes out of supported range");
        }
        Ok(())
    }

    /// Token reserve at launch: curve allocation plus virtual padding.
    pub fn initial_token_reserve(&self) -> TokenUnits {
        self.y_token_curve0 + self.y_virtual0
    }

    /// Constant product fixed at launch, in lamport times base-unit space.
    pub fn invariant(&self) -> u128 {
        self.x_virtual0 as u128 * self.initial_token_reserve() as u128
    }

    /// Fraction of gross SOL that reaches the curve on a buy, in ppm.
    pub fn retained_ppm(&self) -> u64 {
        PPM - self.fee_total_ppm
    }

    /// Smallest gross SOL amount whose post-fee remainder is exactly
    /// `net`. Useful for hitting an exact deposit through the fee.
    pub fn gross_for_net(&self, net: Lamports) -> Lamports {
        if net == 0 {
            return 0;
        }
        fixed::div_ppm_ceil(net, self.retained_ppm())
    }
}

/// One priced trade against the curve.
///
/// For buys, `delta_x_gross` is the SOL actually spent (a quote that would
/// push the curve past graduation spends only what graduation needs and
/// reports the rest in `refund_gross`), `delta_x_net` is the post-fee
/// deposit and `delta_y` the tokens withdrawn. For sells, `delta_x_gross`
/// is the SOL leaving the curve, `delta_x_net` what the seller keeps after
/// fee and `delta_y` the tokens the curve absorbed, never more than
/// offered.
#[derive(Debug, Clone, PartialEq)]
pub struct SwapQuote {
    pub delta_x_gross: Lamports,
    pub delta_x_net: Lamports,
    pub delta_y: TokenUnits,
    pub fee_creator: Lamports,
    pub fee_platform: Lamports,
    pub refund_gross: Lamports,
    pub new_state: CurveState,
}

/// Real pool created at migration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolState {
    pub x_pool: Lamports,
    pub y_pool: TokenUnits,
}

impl PoolState {
    /// Pool price in SOL per whole token.
    pub fn price(&self, params: &CurveParams) -> f64 {
        let scale = 10f64.powi(params.token_decimals as i32);
        (self.x_pool as f64 / fixed::LAMPORTS_PER_SOL as f64) / (self.y_pool as f64 / scale)
    }
}

/// Live reserves of the bonding curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CurveState {
    /// Total SOL on the curve, virtual seed included. Exact.
    pub x_tot: Lamports,
    /// Token reserve, `floor(k / x_tot)` for well-formed states.
    pub y_tot: TokenUnits,
    /// Constant product in lamport times base-unit space.
    pub k: u128,
    /// Creator fees accrued across trades.
    pub fees_creator: Lamports,
    /// Platform fees accrued across trades.
    pub fees_platform: Lamports,
    /// Set once `x_tot` reaches the graduation threshold; the curve then
    /// refuses further trades.
    pub graduated: bool,
}

impl CurveState {
    /// Fresh curve at launch.
    pub fn init(params: &CurveParams) -> Result<CurveState, CurveError> {
        params.validate()?;
        Ok(CurveState {
            x_tot: params.x_virtual0,
            y_tot: params.initial_token_reserve(),
            k: params.invariant(),
            fees_creator: 0,
            fees_platform: 0,
            graduated: false,
        })
    }

    /// Analysis state with arbitrary reserves; `k` is their product.
    pub fn with_reserves(x_tot: Lamports, y_tot: TokenUnits) -> Result<CurveState, CurveError> {
        if x_tot == 0 || y_tot == 0 || x_tot > MAX_RESERVE || y_tot > MAX_RESERVE {
            return Err(CurveError::InvalidParams("reserves must be positive and in range".to_string()));
        }
        Ok(CurveState {
            x_tot,
            y_tot,
            k: x_tot as u128 * y_tot as u128,
            fees_creator: 0,
            fees_platform: 0,
            graduated: false,
        })
    }

    /// Marginal price in SOL per whole token, `x / y`.
    pub fn marginal_price(&self, params: &CurveParams) -> f64 {
        let scale = 10f64.powi(params.token_decimals as i32);
        (self.x_tot as f64 / fixed::LAMPORTS_PER_SOL as f64) / (self.y_tot as f64 / scale)
    }

    /// Marginal price computed from the invariant, `x^2 / k`. Agrees with
    /// [`marginal_price`](Self::marginal_price) up to reserve rounding.
    pub fn price_from_invariant(&self, params: &CurveParams) -> f64 {
        let scale = 10f64.powi(params.token_decimals as i32);
        let x_sol = self.x_tot as f64 / fixed::LAMPORTS_PER_SOL as f64;
        let k_scaled = self.k as f64 / (fixed::LAMPORTS_PER_SOL as f64 * scale);
        x_sol * x_sol / k_scaled
    }

    /// Token base units by which `x_tot * y_tot` strays from `k`,
    /// measured on the token axis.
    pub fn curve_gap_units(&self) -> f64 {
        let prod = self.x_tot as u128 * self.y_tot as u128;
        let diff = prod.abs_diff(self.k);
        diff as f64 / self.x_tot as f64
    }

    /// Prices a buy of `delta_x_gross` lamports against the curve.
    ///
    /// The post-fee remainder is deposited, tokens come out at the
    /// constant product, and a deposit that would cross the graduation
    /// threshold is cut at the threshold with the unused gross reported in
    /// the quote. Zero input yields a zero-movement quote.
    pub fn quote_buy(&self, delta_x_gross: Lamports, params: &CurveParams) -> Result<SwapQuote, CurveError> {
        if self.graduated {
            return Err(CurveError::Graduated);
        }
        let net_full = fixed::mul_ppm_floor(delta_x_gross, params.retained_ppm());
        let headroom = params.x_graduate_total.saturating_sub(self.x_tot);
        let (net, gross_used) = if net_full > headroom {
            (headroom, params.gross_for_net(headroom))
        } else {
            (net_full, delta_x_gross)
        };
        let refund = delta_x_gross - gross_used;
        let fee_total = gross_used - net;
        let fee_creator = fixed::mul_ppm_floor(gross_used, params.fee_creator_ppm);
        let fee_platform = fee_total - fee_creator;
        let new_x = self.x_tot.checked_add(net).ok_or(CurveError::MathOverflow)?;
        let new_y = u64::try_from(self.k / new_x as u128).map_err(|_| CurveError::MathOverflow)?;
        let delta_y = self.y_tot - new_y;
        let new_state = CurveState {
            x_tot: new_x,
            y_tot: new_y,
            k: self.k,
            fees_creator: self.fees_creator + fee_creator,
            fees_platform: self.fees_platform + fee_platform,
            graduated: new_x >= params.x_graduate_total,
        };
        Ok(SwapQuote {
            delta_x_gross: gross_used,
            delta_x_net: net,
            delta_y,
            fee_creator,
            fee_platform,
            refund_gross: refund,
            new_state,
        })
    }

    /// Prices a sell of up to `delta_y` token base units.
    ///
    /// SOL leaves the curve at the constant product, rounded down, and the
    /// seller keeps the post-fee remainder. The curve absorbs the token
    /// amount matching the rounded SOL movement, never more than offered,
    /// and the token reserve can never exceed the launch reserve.
    pub fn quote_sell(&self, delta_y: TokenUnits, params: &CurveParams) -> Result<SwapQuote, CurveError> {
        if self.graduated {
            return Err(CurveError::Graduated);
        }
        let available = params.initial_token_reserve().saturating_sub(self.y_tot);
        if delta_y > available {
            return Err(CurveError::Oversell { requested: delta_y, available });
        }
        let y_target = self.y_tot + delta_y;
        let gross_out_wide = self.x_tot as u128 * delta_y as u128 / y_target as u128;
        let gross_out = u64::try_from(gross_out_wide).map_err(|_| CurveError::MathOverflow)?;
        let new_x = self.x_tot - gross_out;
        let new_y = u64::try_from(self.k / new_x as u128)
            .map_err(|_| CurveError::MathOverflow)?
            .min(y_target);
        let absorbed = new_y - self.y_tot;
        let net = fixed::mul_ppm_floor(gross_out, params.retained_ppm());
        let fee_total = gross_out - net;
        let fee_creator = fixed::mul_ppm_floor(gross_out, params.fee_creator_ppm);
        let fee_platform = fee_total - fee_creator;
        let new_state = CurveState {
            x_tot: new_x,
            y_tot: new_y,
            k: self.k,
            fees_creator: self.fees_creator + fee_creator,
            fees_platform: self.fees_platform + fee_platform,
            graduated: false,
        };
        Ok(SwapQuote {
            delta_x_gross: gross_out,
            delta_x_net: net,
            delta_y: absorbed,
            fee_creator,
            fee_platform,
            refund_gross: 0,
            new_state,
        })
    }

    /// Seals the curve and opens the real pool: the real SOL deposit less
    /// the migration gas fee, paired with the reserved token allocation.
    pub fn migrate(&self, params: &CurveParams) -> Result<PoolState, CurveError> {
        if !self.graduated {
            return Err(CurveError::NotGraduated);
        }
        Ok(PoolState {
            x_pool: params.x_graduate_real - params.migration_gas_fee,
            y_pool: params.y_token_pool0,
        })
    }
}

/// Proceeds of selling `delta_y` whole tokens at graduation, on the sealed
/// virtual curve versus the real pool, using the nominal graduation
/// reserves. The virtual curve always pays more; `ratio` is the
/// before/after quotient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SellComparison {
    pub dx_before_sol: f64,
    pub dx_after_sol: f64,
    pub ratio: f64,
}

/// Compares liquidation proceeds just before and just after migration,
/// ignoring fees: `x * dy / (y + dy)` on reserves (graduation SOL, virtual
/// token reserve) versus (real SOL, pool token reserve).
pub fn sell_proceeds_before_after(delta_y_tokens: f64, params: &CurveParams) -> Result<SellComparison, CurveError> {
    if !delta_y_tokens.is_finite() || delta_y_tokens <= 0.0 {
        return Err(CurveError::InvalidParams("delta_y must be positive and finite".to_string()));
    }
    let scale = 10f64.powi(params.token_decimals as i32);
    let x_before = params.x_graduate_total as f64 / fixed::LAMPORTS_PER_SOL as f64;
    let y_before = params.y_virtual0 as f64 / scale;
    let x_after = params.x_graduate_real as f64 / fixed::LAMPORTS_PER_SOL as f64;
    let y_after = params.y_token_pool0 as f64 / scale;
    let dx_before = x_before * delta_y_tokens / (y_before + delta_y_tokens);
    let dx_after = x_after * delta_y_tokens / (y_after + delta_y_tokens);
    Ok(SellComparison {
        dx_before_sol: dx_before,
        dx_after_sol: dx_after,
        ratio: dx_before / dx_after,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> CurveParams {
        CurveParams::default()
    }

    fn zero_fee_params() -> CurveParams {
        CurveParams {
            fee_total_ppm: 0,
            fee_creator_ppm: 0,
            fee_platform_ppm: 0,
            ..CurveParams::default()
        }
    }

    #[test]
    fn launch_state_matches_defaults() {
        let s = CurveState::init(&params()).unwrap();
        assert_eq!(s.x_tot, 30_000_000_000);
        assert_eq!(s.y_tot, 1_073_000_000_000_000);
        assert_eq!(s.k, 30_000_000_000u128 * 1_073_000_000_000_000u128);
        assert!(!s.graduated);
        // 30 / 1.073e9 SOL per token.
        let p = s.marginal_price(&params());
        assert!((p - 2.7959e-8).abs() / 2.7959e-8 < 1e-4);
    }

    #[test]
    fn params_validation_catches_inconsistencies() {
        let mut p = params();
        p.fee_creator_ppm = 1;
        assert!(matches!(p.validate(), Err(CurveError::InvalidParams(_))));

        let mut p = params();
        p.x_graduate_real = p.x_graduate_total;
        assert!(p.validate().is_err());

        let mut p = params();
        p.y_virtual0 = 0;
        assert!(p.validate().is_err());

        assert!(zero_fee_params().validate().is_ok());
    }

    #[test]
    fn scaling_reserves_scales_the_invariant() {
        let mut p = params();
        p.x_virtual0 *= 2;
        p.y_token_curve0 *= 2;
        p.y_virtual0 *= 2;
        p.y_token_pool0 *= 2;
        p.x_graduate_total *= 2;
        p.x_graduate_real = p.x_graduate_total - p.x_virtual0;
        assert_eq!(p.invariant(), 4 * params().invariant());
    }

    #[test]
    fn one_sol_buy_from_launch() {
        let p = params();
        let s = CurveState::init(&p).unwrap();
        let q = s.quote_buy(1_000_000_000, &p).unwrap();
        assert_eq!(q.delta_x_gross, 1_000_000_000);
        assert_eq!(q.delta_x_net, 987_500_000);
        assert_eq!(q.fee_creator, 3_000_000);
        assert_eq!(q.fee_platform, 9_500_000);
        assert_eq!(q.refund_gross, 0);
        assert_eq!(q.new_state.x_tot, 30_987_500_000);
        // floor(k / 30_987_500_000) recomputed independently below.
        let expect_y = (30_000_000_000u128 * 1_073_000_000_000_000u128 / 30_987_500_000u128) as u64;
        assert_eq!(q.new_state.y_tot, expect_y);
        assert_eq!(q.delta_y, 1_073_000_000_000_000 - expect_y);
        // About 3.419e7 whole tokens leave the curve.
        let dy_tokens = q.delta_y as f64 / 1e6;
        assert!((dy_tokens - 3.4193e7).abs() / 3.4193e7 < 1e-3, "dy = {dy_tokens}");
        assert!(q.new_state.curve_gap_units() <= 10.0);
    }

    #[test]
    fn fee_split_conserves_lamports() {
        let p = params();
        let mut s = CurveState::init(&p).unwrap();
        for gross in [1u64, 7, 999, 123_456_789, 1_000_000_000, 33_333_333_333] {
            let q = s.quote_buy(gross, &p).unwrap();
            assert_eq!(q.delta_x_net + q.fee_creator + q.fee_platform + q.refund_gross, gross);
            assert_eq!(q.fee_creator + q.fee_platform, q.delta_x_gross - q.delta_x_net);
            s = q.new_state;
        }
        let q = s.quote_sell(5_000_000_000_000, &p).unwrap();
        assert_eq!(q.fee_creator + q.fee_platform, q.delta_x_gross - q.delta_x_net);
    }

    #[test]
    fn zero_input_quotes_do_not_move_the_curve() {
        let p = params();
        let s = CurveState::init(&p).unwrap();
        let q = s.quote_buy(0, &p).unwrap();
        assert_eq!(q.new_state, s);
        assert_eq!(q.delta_y, 0);
        let q = s.quote_sell(0, &p).unwrap();
        assert_eq!(q.new_state, s);
        assert_eq!(q.delta_x_gross, 0);
    }

    #[test]
    fn graduation_truncates_and_refunds_excess() {
        let p = params();
        let s = CurveState::init(&p).unwrap();
        // 200 SOL gross nets far past the threshold.
        let q = s.quote_buy(200_000_000_000, &p).unwrap();
        assert_eq!(q.new_state.x_tot, 115_000_000_000);
        assert!(q.new_state.graduated);
        assert_eq!(q.delta_x_net, 85_000_000_000);
        assert_eq!(q.delta_x_gross, 86_075_949_368);
        assert_eq!(q.refund_gross, 200_000_000_000 - 86_075_949_368);
        assert_eq!(q.delta_x_net + q.fee_creator + q.fee_platform + q.refund_gross, 200_000_000_000);
        let expect_y = (s.k / 115_000_000_000u128) as u64;
        assert_eq!(q.new_state.y_tot, expect_y);
        assert!(q.new_state.quote_buy(1, &p) == Err(CurveError::Graduated));
        assert!(q.new_state.quote_sell(1, &p) == Err(CurveError::Graduated));
    }

    #[test]
    fn migration_opens_the_real_pool() {
        let p = params();
        let s = CurveState::init(&p).unwrap();
        assert_eq!(s.migrate(&p), Err(CurveError::NotGraduated));
        let sealed = s.quote_buy(p.gross_for_net(85_000_000_000), &p).unwrap().new_state;
        assert!(sealed.graduated);
        let pool = sealed.migrate(&p).unwrap();
        assert_eq!(pool.x_pool, 85_000_000_000);
        assert_eq!(pool.y_pool, 206_900_000_000_000);
        let p_grad = pool.price(&p);
        assert!((p_grad - 4.1083e-7).abs() / 4.1083e-7 < 1e-4, "pool price {p_grad}");
        // Sealed-curve price and pool price nearly coincide.
        let gap = (sealed.marginal_price(&p) - p_grad).abs() / p_grad;
        assert!(gap <= 1e-3, "price gap {gap}");
        // Depth shrinks to about 0.739 of the virtual curve.
        let depth_ratio = ((pool.x_pool as f64 * pool.y_pool as f64)
            / (sealed.x_tot as f64 * p.y_virtual0 as f64))
            .sqrt();
        assert!((depth_ratio - 0.739).abs() <= 0.005, "depth ratio {depth_ratio}");
        let gas = CurveParams { migration_gas_fee: 1_000_000_000, ..params() };
        assert_eq!(sealed.migrate(&gas).unwrap().x_pool, 84_000_000_000);
    }

    #[test]
    fn sell_quote_matches_hand_computation() {
        // Nominal sealed reserves, fee disabled: selling 1e7 tokens nets
        // 115e9 * 1e13 / (2.799e14 + 1e13) lamports, rounded down.
        let p = zero_fee_params();
        let s = CurveState::with_reserves(115_000_000_000, 279_900_000_000_000).unwrap();
        let q = s.quote_sell(10_000_000_000_000, &p).unwrap();
        assert_eq!(q.delta_x_gross, 3_966_885_132);
        assert_eq!(q.delta_x_net, q.delta_x_gross);
        let sol = q.delta_x_gross as f64 / 1e9;
        assert!((sol - 3.9669).abs() < 1e-4);
    }

    #[test]
    fn sell_fee_is_charged_on_the_sol_side() {
        let p = params();
        let s = CurveState::init(&p).unwrap();
        let s = s.quote_buy(10_000_000_000, &p).unwrap().new_state;
        let q = s.quote_sell(10_000_000_000_000, &p).unwrap();
        assert_eq!(q.delta_x_net, fixed::mul_ppm_floor(q.delta_x_gross, p.retained_ppm()));
        assert!(q.delta_x_net < q.delta_x_gross);
        assert_eq!(q.new_state.x_tot, s.x_tot - q.delta_x_gross);
    }

    #[test]
    fn zero_fee_round_trip_returns_the_exact_deposit() {
        let p = zero_fee_params();
        let s = CurveState::init(&p).unwrap();
        for net in [1_000_000_000u64, 1, 999_999_999, 84_999_999_999] {
            let buy = s.quote_buy(net, &p).unwrap();
            assert_eq!(buy.delta_x_net, net);
            let sell = buy.new_state.quote_sell(buy.delta_y, &p).unwrap();
            assert_eq!(sell.delta_x_gross, net, "round trip of {net} lamports");
            assert_eq!(sell.new_state.x_tot, s.x_tot);
            assert_eq!(sell.new_state.y_tot, s.y_tot);
        }
    }

    #[test]
    fn oversell_is_rejected_and_supply_floor_holds() {
        let p = params();
        let s = CurveState::init(&p).unwrap();
        assert!(matches!(s.quote_sell(1, &p), Err(CurveError::Oversell { .. })));
        let bought = s.quote_buy(40_000_000_000, &p).unwrap();
        let err = bought.new_state.quote_sell(bought.delta_y + 1, &p);
        assert_eq!(
            err,
            Err(CurveError::Oversell { requested: bought.delta_y + 1, available: bought.delta_y })
        );
        // Selling everything lands back on the virtual floor.
        let sell = bought.new_state.quote_sell(bought.delta_y, &p).unwrap();
        assert_eq!(sell.new_state.x_tot, 30_000_000_000);
        assert_eq!(sell.new_state.y_tot, 1_073_000_000_000_000);
    }

    #[test]
    fn buy_sequences_land_on_the_same_state_as_one_shot() {
        let p = params();
        let init = CurveState::init(&p).unwrap();
        let one = init.quote_buy(p.gross_for_net(85_000_000_000), &p).unwrap().new_state;
        let mut split = init;
        let mut dy_total = 0u64;
        for net in [10_000_000_000u64, 25_000_000_000, 1, 49_999_999_998, 1] {
            let q = split.quote_buy(p.gross_for_net(net), &p).unwrap();
            dy_total += q.delta_y;
            split = q.new_state;
        }
        assert_eq!(split.x_tot, one.x_tot);
        assert_eq!(split.y_tot, one.y_tot);
        assert!(split.graduated);
        let one_dy = init.y_tot - one.y_tot;
        assert_eq!(dy_total, one_dy);
    }

    #[test]
    fn price_identity_between_reserves_and_invariant() {
        let p = params();
        let mut s = CurveState::init(&p).unwrap();
        let mut seed = 0x9e3779b97f4a7c15u64;
        for _ in 0..100 {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            let gross = 1_000_000 + seed % 600_000_000;
            let q = s.quote_buy(gross, &p).unwrap();
            s = q.new_state;
            if s.graduated {
                break;
            }
            let a = s.marginal_price(&p);
            let b = s.price_from_invariant(&p);
            assert!((a - b).abs() / b < 1e-9, "price drift {a} vs {b}");
            assert!(s.curve_gap_units() <= 10.0);
        }
    }

    #[test]
    fn liquidation_pays_more_on_the_virtual_curve() {
        let p = params();
        for dy in [1e3, 1e5, 1e7, 1e8] {
            let c = sell_proceeds_before_after(dy, &p).unwrap();
            assert!(c.dx_before_sol > c.dx_after_sol, "dy = {dy}");
            assert!(c.ratio > 1.0);
        }
        let c = sell_proceeds_before_after(1e7, &p).unwrap();
        assert!((c.dx_before_sol - 3.9669).abs() < 1e-3);
        assert!((c.dx_after_sol - 3.9189).abs() < 1e-3);
        assert!((c.ratio - 1.0123).abs() < 1e-3);
        assert!(sell_proceeds_before_after(0.0, &p).is_err());
        assert!(sell_proceeds_before_after(-1.0, &p).is_err());
    }

    #[test]
    fn liquidation_ratio_grows_with_size_under_exact_continuity() {
        // Reserves chosen so the sealed curve and the pool share a price.
        let mut p = params();
        p.y_virtual0 = 230_000_000_000_000;
        p.y_token_pool0 = 170_000_000_000_000;
        let mut last = 1.0;
        for dy in [1e2, 1e4, 1e6, 3e7, 1e8, 2e8] {
            let c = sell_proceeds_before_after(dy, &p).unwrap();
            assert!(c.ratio > last, "ratio must increase, dy = {dy}");
            last = c.ratio;
        }
        // And it approaches the price ratio at vanishing size.
        let tiny = sell_proceeds_before_after(1e-6, &p).unwrap();
        assert!((tiny.ratio - 1.0).abs() < 1e-9);
    }

    #[test]
    fn small_liquidation_ratio_approaches_price_gap() {
        let p = params();
        let tiny = sell_proceeds_before_after(1e-6, &p).unwrap();
        // 115/2.799e8 over 85/2.069e8.
        let expect = (115.0 / 2.799e8) / (85.0 / 2.069e8);
        assert!((tiny.ratio - expect).abs() < 1e-9);
        assert!((expect - 1.00008).abs() < 1e-5);
    }

    #[test]
    fn creator_fee_schedule_declines_linearly() {
        let sched = CreatorFeeSchedule::default();
        assert_eq!(sched.fee_ppm_at(0), 9_500);
        assert_eq!(sched.fee_ppm_at(85_000_000_000), 9_500);
        assert_eq!(sched.fee_ppm_at(4 * 85_000_000_000), 500);
        assert_eq!(sched.fee_ppm_at(u64::MAX), 500);
        let mid = sched.fee_ppm_at((85_000_000_000 + 4 * 85_000_000_000) / 2);
        assert_eq!(mid, 5_000);
        assert!(CurveParams::default().creator_fee_schedule.is_none());
    }

    #[test]
    fn truncated_buy_charges_fees_only_on_spent_gross() {
        let p = params();
        let s = CurveState::init(&p).unwrap();
        let q = s.quote_buy(1_000_000_000_000, &p).unwrap();
        let direct = s.quote_buy(q.delta_x_gross, &p).unwrap();
        assert_eq!(q.fee_creator, direct.fee_creator);
        assert_eq!(q.fee_platform, direct.fee_platform);
        assert_eq!(q.new_state.x_tot, direct.new_state.x_tot);
        assert_eq!(direct.refund_gross, 0);
    }
}
