//! Fixed-point units and decimal string conversions.
//!
//! SOL amounts are stored as integer lamports (1 SOL = 10^9 lamports) and
//! token amounts as integer base units (10^6 base units per token by
//! default). Interchange files carry these fields as decimal strings so a
//! parse/serialize round trip is lossless.

use thiserror::Error;

/// Integer lamports. 1 SOL = 10^9 lamports.
pub type Lamports = u64;

/// Integer token base units. 10^`TOKEN_DECIMALS` base units per token.
pub type TokenUnits = u64;

/// Lamports per SOL.
pub const LAMPORTS_PER_SOL: u64 = 1_000_000_000;

/// Decimal places carried by token base units.
pub const TOKEN_DECIMALS: u32 = 6;

/// Base units per whole token.
pub const UNITS_PER_TOKEN: u64 = 1_000_000;

/// Denominator for parts-per-million fee rates.
pub const PPM: u64 = 1_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FixedError {
    #[error("empty decimal string")]
    Empty,
    #[error("invalid decimal string {0:?}")]
    Invalid(String),
    #[error("too many fractional digits in {0:?} (max {1})")]
    TooPrecise(String, u32),
    #[error("value {0:?} overflows the fixed-point range")]
    Overflow(String),
}

/// floor(value * num_ppm / 10^6) in 128-bit intermediates.
pub fn mul_ppm_floor(value: u64, num_ppm: u64) -> u64 {
    (value as u128 * num_ppm as u128 / PPM as u128) as u64
}

/// ceil(value * 10^6 / num_ppm) in 128-bit intermediates.
pub fn div_ppm_ceil(value: u64, num_ppm: u64) -> u64 {
    let n = value as u128 * PPM as u128;
    let d = num_ppm as u128;
    ((n + d - 1) / d) as u64
}

/// Parses a non-negative decimal string into an integer scaled by
/// 10^`decimals`. Accepts plain integers ("30"), fractions ("30.9875") and
/// a leading "+". Rejects more fractional digits than `decimals` unless the
/// excess digits are all zero.
pub fn parse_fixed(s: &str, decimals: u32) -> Result<u64, FixedError> {
    let s = s.trim();
    let s = s.strip_prefix('+').unwrap_or(s);
    if s.is_empty() {
        return Err(FixedError::Empty);
    }
    let (int_part, frac_part) = match s.split_once('.') {
        Some((i, f)) => (i, f),
        None => (s, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(FixedError::Invalid(s.to_string()));
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return Err(FixedError::Invalid(s.to_string()));
    }
    let scale = 10u128.pow(decimals);
    let int_val: u128 = if int_part.is_empty() {
        0
    } else {
        int_part.parse().map_err(|_| FixedError::Overflow(s.to_string()))?
    };
    let mut frac_val: u128 = 0;
    for (i, c) in frac_part.chars().enumerate() {
        let d = c.to_digit(10).unwrap() as u128;
        if (i as u32) < decimals {
            frac_val = frac_val * 10 + d;
        } else if d != 0 {
            return Err(FixedError::TooPrecise(s.to_string(), decimals));
        }
    }
    let frac_digits = (frac_part.len() as u32).min(decimals);
    frac_val *= 10u128.pow(decimals - frac_digits);
    let total = int_val
        .checked_mul(scale)
        .and_then(|v| v.checked_add(frac_val))
        .ok_or_else(|| FixedError::Overflow(s.to_string()))?;
    u64::try_from(total).map_err(|_| FixedError::Overflow(s.to_string()))
}

/// Formats an integer scaled by 10^`decimals` as a decimal string with
/// trailing zeros trimmed ("30.9875", "30").
pub fn format_fixed(value: u64, decimals: u32) -> String {
    let scale = 10u64.pow(decimals);
    let int_part = value / scale;
    let frac_part = value % scale;
    if frac_part == 0 {
        return int_part.to_string();
    }
    let mut frac = format!("{frac_part:0width$}", width = decimals as usize);
    while frac.ends_with('0') {
        frac.pop();
    }
    format!("{int_part}.{frac}")
}

/// Parses a decimal SOL string into lamports.
pub fn parse_sol(s: &str) -> Result<Lamports, FixedError> {
    parse_fixed(s, 9)
}

/// Formats lamports as a decimal SOL string.
pub fn format_sol(lamports: Lamports) -> String {
    format_fixed(lamports, 9)
}

/// Parses a decimal token string into base units.
pub fn parse_tokens(s: &str) -> Result<TokenUnits, FixedError> {
    parse_fixed(s, TOKEN_DECIMALS)
}

/// Formats token base units as a decimal token string.
pub fn format_tokens(units: TokenUnits) -> String {
    format_fixed(units, TOKEN_DECIMALS)
}

/// Lamports to SOL as f64, for analytics output only.
pub fn sol_f64(lamports: Lamports) -> f64 {
    lamports as f64 / LAMPORTS_PER_SOL as f64
}

/// Token base units to whole tokens as f64, for analytics output only.
pub fn tokens_f64(units: TokenUnits) -> f64 {
    units as f64 / UNITS_PER_TOKEN as f64
}

/// Formats a float with 12 significant digits, the precision used by all
/// CSV analytics output.
pub fn format_sig12(x: f64) -> String {
    format!("{x:.11e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_plain_integers() {
        assert_eq!(parse_sol("30").unwrap(), 30_000_000_000);
        assert_eq!(parse_sol("0").unwrap(), 0);
        assert_eq!(parse_tokens("1073000000").unwrap(), 1_073_000_000_000_000);
    }

    #[test]
    fn parses_fractions_exactly() {
        assert_eq!(parse_sol("30.9875").unwrap(), 30_987_500_000);
        assert_eq!(parse_sol("0.000000001").unwrap(), 1);
        assert_eq!(parse_sol(".5").unwrap(), 500_000_000);
        assert_eq!(parse_tokens("0.000001").unwrap(), 1);
    }

    #[test]
    fn rejects_excess_precision_unless_zero() {
        assert_eq!(parse_sol("1.0000000001"), Err(FixedError::TooPrecise("1.0000000001".into(), 9)));
        assert_eq!(parse_sol("1.2500000000").unwrap(), 1_250_000_000);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_sol("").is_err());
        assert!(parse_sol("-1").is_err());
        assert!(parse_sol("1e9").is_err());
        assert!(parse_sol("1.2.3").is_err());
        assert!(parse_sol(".").is_err());
    }

    #[test]
    fn format_trims_trailing_zeros() {
        assert_eq!(format_sol(30_987_500_000), "30.9875");
        assert_eq!(format_sol(30_000_000_000), "30");
        assert_eq!(format_sol(1), "0.000000001");
        assert_eq!(format_tokens(1_073_000_000_000_000), "1073000000");
    }

    #[test]
    fn round_trip_is_lossless() {
        for v in [0u64, 1, 999, 1_000_000_000, 86_075_949_368, u64::MAX / 2] {
            assert_eq!(parse_sol(&format_sol(v)).unwrap(), v);
            assert_eq!(parse_tokens(&format_tokens(v)).unwrap(), v);
        }
    }

    #[test]
    fn ppm_helpers_round_as_documented() {
        assert_eq!(mul_ppm_floor(1_000_000_000, 987_500), 987_500_000);
        assert_eq!(mul_ppm_floor(1, 987_500), 0);
        assert_eq!(div_ppm_ceil(85_000_000_000, 987_500), 86_075_949_368);
        // ceil(net / r) nets back to exactly net after the floor multiply.
        for net in [1u64, 17, 999_999_999, 85_000_000_000, 114_999_999_999] {
            let gross = div_ppm_ceil(net, 987_500);
            assert_eq!(mul_ppm_floor(gross, 987_500), net);
        }
    }
}
