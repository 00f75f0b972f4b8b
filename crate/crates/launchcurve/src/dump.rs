//! Robust detection of coordinated sell-offs in per-token price series.
//!
//! Works on log returns of the marginal curve price. A baseline scale is
//! estimated from the opening stretch of each token's return series with
//! a median/MAD estimator, hardened by a provisional outlier guard, and
//! later returns are flagged when they fall below a fixed multiple of
//! that scale. Violations are measured against zero rather than the
//! baseline median: a dump is an absolute collapse, not a deviation from
//! drift.

use crate::fixed::{self, Lamports};
use crate::ingest::{TokenTrajectory, TradeEvent, TxType};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Scale factor turning a median absolute deviation into a standard
/// deviation equivalent under normality.
pub const MAD_CONSISTENCY: f64 = 1.0 / 0.67449;

#[derive(Debug, Error, PartialEq)]
pub enum DumpError {
    #[error("need at least two prices, got {0}")]
    TooFewPrices(usize),
    #[error("price at index {0} is not positive and finite")]
    BadPrice(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DumpConfig {
    /// Violation threshold: a return below `-sigma_multiplier * sigma`
    /// is flagged.
    pub sigma_multiplier: f64,
    /// Minimum returns required before any baseline is attempted.
    pub baseline_min: usize,
    /// Baseline window length when enough returns exist.
    pub baseline_max: usize,
    /// Provisional guard width used to drop extreme returns from the
    /// baseline sample before the final scale estimate.
    pub guard_multiplier: f64,
    /// Merge adjacent violating returns into one episode.
    pub merge_consecutive: bool,
}

impl Default for DumpConfig {
    fn default() -> Self {
        DumpConfig {
            sigma_multiplier: 4.0,
            baseline_min: 30,
            baseline_max: 200,
            guard_multiplier: 8.0,
            merge_consecutive: true,
        }
    }
}

/// Log returns `ln(p[i+1] / p[i])` of a positive price series.
pub fn log_returns(prices: &[f64]) -> Result<Vec<f64>, DumpError> {
    if prices.len() < 2 {
        return Err(DumpError::TooFewPrices(prices.len()));
    }
    for (i, p) in prices.iter().enumerate() {
        if !(p.is_finite() && *p > 0.0) {
            return Err(DumpError::BadPrice(i));
        }
    }
    Ok(prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Baseline {
    pub median: f64,
    /// MAD scaled to a standard deviation equivalent.
    pub sigma: f64,
    /// Returns that survived the outlier guard.
    pub n_used: usize,
}

fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

fn median_mad(sample: &[f64]) -> (f64, f64) {
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = median_of_sorted(&sorted);
    let mut deviations: Vec<f64> = sorted.iter().map(|r| (r - median).abs()).collect();
    deviations.sort_by(f64::total_cmp);
    (median, median_of_sorted(&deviations))
}

/// Median and MAD-based scale of a return sample. No guard is applied.
pub fn robust_baseline(sample: &[f64]) -> Option<Baseline> {
    if sample.is_empty() {
        return None;
    }
    let (median, mad) = median_mad(sample);
    Some(Baseline { median, sigma: mad * MAD_CONSISTENCY, n_used: sample.len() })
}

/// Reasons a return series yields no scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    /// Fewer returns than `baseline_min`.
    TooShort,
    /// Baseline scale collapsed to zero.
    DegenerateBaseline,
    /// The whole series fits inside the baseline window.
    NoScanRegion,
}

impl SkipReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            SkipReason::TooShort => "too_short",
            SkipReason::DegenerateBaseline => "degenerate_baseline",
            SkipReason::NoScanRegion => "no_scan_region",
        }
    }
}

/// One run of consecutive violating returns.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnEpisode {
    /// Index of the first violating return.
    pub start: usize,
    /// Index of the last violating return, inclusive.
    pub end: usize,
    pub min_return: f64,
    /// Total fractional price drop over the episode,
    /// `1 - exp(sum of returns)`.
    pub drop_frac: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsScan {
    pub baseline: Baseline,
    /// Number of leading returns consumed by the baseline window.
    pub window_len: usize,
    pub n_scanned: usize,
    /// Indices of violating returns, ascending.
    pub violations: Vec<usize>,
    pub episodes: Vec<ReturnEpisode>,
    /// Largest `-r / sigma` over the scanned region; lets callers sweep
    /// the threshold without rescanning.
    pub max_severity: Option<f64>,
}

/// Scans a return series for dumps.
///
/// The baseline sample is the first `min(baseline_max, len)` returns.
/// A provisional median/MAD fit over the first `baseline_min` of them
/// supplies a guard band; returns outside `guard_multiplier` provisional
/// sigmas of the provisional median are dropped, and the final
/// median/MAD scale is fit to the survivors. Returns after the window
/// violate when below `-sigma_multiplier * sigma`.
pub fn scan_returns(returns: &[f64], config: &DumpConfig) -> Result<ReturnsScan, SkipReason> {
    if returns.len() < config.baseline_min {
        return Err(SkipReason::TooShort);
    }
    let window_len = config.baseline_max.min(returns.len());
    let window = &returns[..window_len];
    let (med0, mad0) = median_mad(&window[..config.baseline_min]);
    let sigma0 = mad0 * MAD_CONSISTENCY;
    let guarded: Vec<f64> = if sigma0 > 0.0 {
        let band = config.guard_multiplier * sigma0;
        window.iter().copied().filter(|r| (r - med0).abs() <= band).collect()
    } else {
        window.to_vec()
    };
    let baseline = robust_baseline(&guarded).ok_or(SkipReason::DegenerateBaseline)?;
    if baseline.sigma <= 0.0 {
        return Err(SkipReason::DegenerateBaseline);
    }
    if window_len == returns.len() {
        return Err(SkipReason::NoScanRegion);
    }
    let threshold = -config.sigma_multiplier * baseline.sigma;
    let scan = &returns[window_len..];
    let mut violations = Vec::new();
    let mut max_severity = f64::MIN;
    for (offset, r) in scan.iter().enumerate() {
        max_severity = max_severity.max(-r / baseline.sigma);
        if *r < threshold {
            violations.push(window_len + offset);
        }
    }
    let mut episodes = Vec::new();
    let mut i = 0;
    while i < violations.len() {
        let start = violations[i];
        let mut end = start;
        if config.merge_consecutive {
            while i + 1 < violations.len() && violations[i + 1] == end + 1 {
                i += 1;
                end = violations[i];
            }
        }
        let span = &returns[start..=end];
        episodes.push(ReturnEpisode {
            start,
            end,
            min_return: span.iter().copied().fold(f64::MAX, f64::min),
            drop_frac: 1.0 - span.iter().sum::<f64>().exp(),
        });
        i += 1;
    }
    Ok(ReturnsScan {
        baseline,
        window_len,
        n_scanned: scan.len(),
        violations,
        episodes,
        max_severity: (!scan.is_empty()).then_some(max_severity),
    })
}

/// A detected dump on one token, tied back to the trade log.
#[derive(Debug, Clone, PartialEq)]
pub struct DumpEpisode {
    pub mint: String,
    /// Index into the token's return series of the first violating
    /// return.
    pub trigger_index: usize,
    pub trigger_return: f64,
    /// Violating returns merged into this episode.
    pub n_returns: usize,
    pub drop_frac: f64,
    /// Curve SOL immediately before the trade that fired the trigger.
    pub v_sol_at_trigger: Lamports,
    /// Distinct wallets selling within the episode.
    pub seller_wallets: BTreeSet<String>,
    /// Every selling trade in the episode came from one wallet.
    pub single_wallet: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DumpScan {
    pub mint: String,
    pub n_returns: usize,
    pub n_scanned: usize,
    pub n_violations: usize,
    pub sigma: Option<f64>,
    pub max_severity: Option<f64>,
    pub skip: Option<SkipReason>,
    pub episodes: Vec<DumpEpisode>,
}

/// Runs the return-level scanner over a token's bonding-phase price
/// series and maps violations back to trades and wallets.
pub fn detect_dumps(traj: &TokenTrajectory, config: &DumpConfig) -> DumpScan {
    let bonding: Vec<&TradeEvent> = traj.events.iter().filter(|e| e.in_bonding_curve).collect();
    let prices: Vec<f64> = bonding
        .iter()
        .map(|e| fixed::sol_f64(e.v_sol) / fixed::tokens_f64(e.v_tok))
        .collect();
    let returns = match log_returns(&prices) {
        Ok(r) => r,
        Err(_) => {
            return DumpScan {
                mint: traj.mint.clone(),
                n_returns: 0,
                n_scanned: 0,
                n_violations: 0,
                sigma: None,
                max_severity: None,
                skip: Some(SkipReason::TooShort),
                episodes: Vec::new(),
            }
        }
    };
    match scan_returns(&returns, config) {
        Ok(scan) => {
            let episodes = scan
                .episodes
                .iter()
                .map(|ep| {
                    // Return i is produced by bonding event i + 1; the
                    // state before that trade is event i's.
                    let seller_wallets: BTreeSet<String> = (ep.start..=ep.end)
                        .map(|i| bonding[i + 1])
                        .filter(|e| e.tx_type == TxType::Sell)
                        .map(|e| e.trader.clone())
                        .collect();
                    DumpEpisode {
                        mint: traj.mint.clone(),
                        trigger_index: ep.start,
                        trigger_return: returns[ep.start],
                        n_returns: ep.end - ep.start + 1,
                        drop_frac: ep.drop_frac,
                        v_sol_at_trigger: bonding[ep.start].v_sol,
                        single_wallet: seller_wallets.len() == 1,
                        seller_wallets,
                    }
                })
                .collect();
            DumpScan {
                mint: traj.mint.clone(),
                n_returns: returns.len(),
                n_scanned: scan.n_scanned,
                n_violations: scan.violations.len(),
                sigma: Some(scan.baseline.sigma),
                max_severity: scan.max_severity,
                skip: None,
                episodes,
            }
        }
        Err(reason) => DumpScan {
            mint: traj.mint.clone(),
            n_returns: returns.len(),
            n_scanned: 0,
            n_violations: 0,
            sigma: None,
            max_severity: None,
            skip: Some(reason),
            episodes: Vec::new(),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DumpSummary {
    pub n_tokens: u64,
    pub n_scanned: u64,
    pub n_skipped: BTreeMap<&'static str, u64>,
    pub n_tokens_with_dump: u64,
    pub n_episodes: u64,
    pub n_single_wallet: u64,
    pub n_multi_wallet: u64,
    /// Fraction of scanned tokens that would show at least one violation
    /// at each threshold multiplier.
    pub coverage: Vec<(f64, f64)>,
    /// Episode count per selling wallet.
    pub wallet_episodes: BTreeMap<String, u64>,
}

pub fn dump_summary(scans: &[DumpScan], multipliers: &[f64]) -> DumpSummary {
    let mut summary = DumpSummary {
        n_tokens: scans.len() as u64,
        n_scanned: 0,
        n_skipped: BTreeMap::new(),
        n_tokens_with_dump: 0,
        n_episodes: 0,
        n_single_wallet: 0,
        n_multi_wallet: 0,
        coverage: Vec::new(),
        wallet_episodes: BTreeMap::new(),
    };
    for scan in scans {
        match scan.skip {
            Some(reason) => *summary.n_skipped.entry(reason.as_str()).or_insert(0) += 1,
            None => summary.n_scanned += 1,
        }
        if !scan.episodes.is_empty() {
            summary.n_tokens_with_dump += 1;
        }
        for ep in &scan.episodes {
            summary.n_episodes += 1;
            if ep.single_wallet {
                summary.n_single_wallet += 1;
            } else {
                summary.n_multi_wallet += 1;
            }
            for wallet in &ep.seller_wallets {
                *summary.wallet_episodes.entry(wallet.clone()).or_insert(0) += 1;
            }
        }
    }
    for &k in multipliers {
        let hits = scans
            .iter()
            .filter(|s| s.skip.is_none() && s.max_severity.map_or(false, |sev| sev > k))
            .count();
        let frac = if summary.n_scanned > 0 { hits as f64 / summary.n_scanned as f64 } else { 0.0 };
        summary.coverage.push((k, frac));
    }
    summary
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::traj_lamports;
    use proptest::prelude::*;

    /// Baseline-friendly return series cycling through five levels in
    /// `[-amp, amp]`; its window MAD is `amp / 2` and stays there even
    /// if the guard removes an element.
    fn jitter(n: usize, amp: f64) -> Vec<f64> {
        (0..n).map(|i| ((i % 5) as f64 - 2.0) * amp / 2.0).collect()
    }

    #[test]
    fn log_returns_match_price_ratios() {
        let prices = [1.0, 2.0, 1.0];
        let r = log_returns(&prices).unwrap();
        assert_eq!(r.len(), 2);
        assert!((r[0] - 2.0f64.ln()).abs() < 1e-15);
        assert!((r[1] + 2.0f64.ln()).abs() < 1e-15);
        assert_eq!(log_returns(&[1.0]), Err(DumpError::TooFewPrices(1)));
        assert_eq!(log_returns(&[1.0, 0.0]), Err(DumpError::BadPrice(1)));
        assert_eq!(log_returns(&[1.0, f64::NAN]), Err(DumpError::BadPrice(1)));
    }

    #[test]
    fn baseline_matches_hand_computed_mad() {
        let b = robust_baseline(&[-1.0, 0.0, 1.0]).unwrap();
        assert_eq!(b.median, 0.0);
        assert!((b.sigma - MAD_CONSISTENCY).abs() < 1e-12);
        assert!((b.sigma - 1.4826).abs() < 2e-4);

        let even = robust_baseline(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(even.median, 2.5);
        assert!(robust_baseline(&[]).is_none());
    }

    #[test]
    fn single_crash_after_window_is_one_episode() {
        let mut returns = jitter(250, 0.01);
        returns.push(-0.5);
        returns.extend(jitter(10, 0.01));
        let scan = scan_returns(&returns, &DumpConfig::default()).unwrap();
        assert_eq!(scan.window_len, 200);
        assert_eq!(scan.n_scanned, 61);
        assert!((scan.baseline.sigma - 0.005 * MAD_CONSISTENCY).abs() < 1e-12);
        assert_eq!(scan.violations, vec![250]);
        assert_eq!(scan.episodes.len(), 1);
        let ep = &scan.episodes[0];
        assert_eq!((ep.start, ep.end), (250, 250));
        assert_eq!(ep.min_return, -0.5);
        assert!((ep.drop_frac - (1.0 - (-0.5f64).exp())).abs() < 1e-15);
        assert!(scan.max_severity.unwrap() > 30.0);
    }

    #[test]
    fn consecutive_violations_merge_into_one_episode() {
        let mut returns = jitter(220, 0.01);
        returns.extend([-0.3, -0.4]);
        returns.extend(jitter(5, 0.01));
        returns.push(-0.2);
        let scan = scan_returns(&returns, &DumpConfig::default()).unwrap();
        assert_eq!(scan.violations, vec![220, 221, 227]);
        assert_eq!(scan.episodes.len(), 2);
        assert_eq!((scan.episodes[0].start, scan.episodes[0].end), (220, 221));
        assert_eq!(scan.episodes[0].min_return, -0.4);
        assert!((scan.episodes[0].drop_frac - (1.0 - (-0.7f64).exp())).abs() < 1e-12);
        assert_eq!((scan.episodes[1].start, scan.episodes[1].end), (227, 227));

        let split = scan_returns(&returns, &DumpConfig { merge_consecutive: false, ..DumpConfig::default() }).unwrap();
        assert_eq!(split.episodes.len(), 3);
    }

    #[test]
    fn guard_keeps_baseline_tight_against_planted_outlier() {
        // A huge negative return inside the window but past the
        // provisional stretch must not inflate the final scale.
        let mut returns = jitter(250, 0.01);
        returns[100] = -0.9;
        returns.push(-0.06);
        let scan = scan_returns(&returns, &DumpConfig::default()).unwrap();
        assert_eq!(scan.baseline.n_used, 199);
        assert!((scan.baseline.sigma - 0.005 * MAD_CONSISTENCY).abs() < 1e-12);
        // -0.06 is about 4 sigmas under the clean scale, so it flags.
        assert_eq!(scan.violations, vec![250]);
    }

    #[test]
    fn violations_are_measured_against_zero_not_the_median() {
        // The baseline window drifts down at -0.05 per step; later
        // returns settle near zero before one -0.04 print.
        let mut returns: Vec<f64> = (0..200)
            .map(|i| -0.05 + if i % 2 == 0 { 0.001 } else { -0.001 })
            .collect();
        returns.extend(jitter(50, 0.002));
        returns.push(-0.04);
        let scan = scan_returns(&returns, &DumpConfig::default()).unwrap();
        assert!((scan.baseline.median + 0.05).abs() < 1e-12);
        // Relative to the median, -0.04 is an up move; it still flags
        // because the rule is an absolute collapse threshold.
        assert!(returns[250] > scan.baseline.median);
        assert_eq!(scan.violations, vec![250]);
    }

    #[test]
    fn skip_reasons_cover_short_flat_and_windowed_series() {
        let cfg = DumpConfig::default();
        assert_eq!(scan_returns(&jitter(10, 0.01), &cfg), Err(SkipReason::TooShort));
        assert_eq!(scan_returns(&vec![0.0; 250], &cfg), Err(SkipReason::DegenerateBaseline));
        assert_eq!(scan_returns(&jitter(100, 0.01), &cfg), Err(SkipReason::NoScanRegion));
        assert_eq!(scan_returns(&jitter(200, 0.01), &cfg), Err(SkipReason::NoScanRegion));
        assert!(scan_returns(&jitter(201, 0.01), &cfg).is_ok());
    }

    #[test]
    fn trajectory_scan_maps_triggers_to_trades() {
        // Prices move with v_sol. Five-level jitter within one percent
        // for 260 swaps, then one wallet sells the price down thirty
        // percent.
        let mut v = 30_000_000_000f64;
        let mut path: Vec<(u64, String, bool)> = Vec::new();
        for i in 0..260 {
            v *= 1.0 + ((i % 5) as f64 - 2.0) * 0.004;
            path.push((v as u64, format!("w{:03}", i % 7), false));
        }
        let v_before_crash = path.last().unwrap().0;
        v *= 0.7;
        path.push((v as u64, "dumper".to_string(), true));
        for i in 0..5 {
            v *= 1.0 + ((i % 5) as f64 - 2.0) * 0.004;
            path.push((v as u64, format!("w{:03}", i % 7), false));
        }
        let borrowed: Vec<(u64, &str, bool)> = path.iter().map(|(v, w, b)| (*v, w.as_str(), *b)).collect();
        let traj = traj_lamports("m", "c", 0.0, &borrowed);
        let scan = detect_dumps(&traj, &DumpConfig::default());
        assert_eq!(scan.skip, None);
        assert_eq!(scan.n_returns, 266);
        assert_eq!(scan.episodes.len(), 1);
        let ep = &scan.episodes[0];
        assert_eq!(ep.trigger_index, 260);
        assert!((ep.trigger_return - 0.7f64.ln()).abs() < 1e-3);
        assert_eq!(ep.v_sol_at_trigger, v_before_crash);
        assert_eq!(ep.seller_wallets.len(), 1);
        assert!(ep.seller_wallets.contains("dumper"));
        assert!(ep.single_wallet);
        assert!((ep.drop_frac - 0.3).abs() < 2e-3);
    }

    #[test]
    fn summary_aggregates_scans_and_coverage() {
        let mk_scan = |mint: &str, severity: Option<f64>, episodes: Vec<DumpEpisode>, skip: Option<SkipReason>| DumpScan {
            mint: mint.to_string(),
            n_returns: 300,
            n_scanned: if skip.is_none() { 100 } else { 0 },
            n_violations: episodes.len(),
            sigma: skip.is_none().then_some(0.01),
            max_severity: severity,
            skip,
            episodes,
        };
        let ep = DumpEpisode {
            mint: "m1".to_string(),
            trigger_index: 250,
            trigger_return: -0.5,
            n_returns: 1,
            drop_frac: 0.4,
            v_sol_at_trigger: 50_000_000_000,
            seller_wallets: ["a".to_string(), "b".to_string()].into(),
            single_wallet: false,
        };
        let scans = vec![
            mk_scan("m1", Some(50.0), vec![ep], None),
            mk_scan("m2", Some(1.5), vec![], None),
            mk_scan("m3", None, vec![], Some(SkipReason::TooShort)),
        ];
        let summary = dump_summary(&scans, &[1.0, 4.0, 100.0]);
        assert_eq!(summary.n_tokens, 3);
        assert_eq!(summary.n_scanned, 2);
        assert_eq!(summary.n_skipped.get("too_short"), Some(&1));
        assert_eq!(summary.n_tokens_with_dump, 1);
        assert_eq!(summary.n_episodes, 1);
        assert_eq!(summary.n_multi_wallet, 1);
        assert_eq!(summary.coverage, vec![(1.0, 1.0), (4.0, 0.5), (100.0, 0.0)]);
        assert_eq!(summary.wallet_episodes.get("a"), Some(&1));
    }

    proptest! {
        /// Scaling every price by a power of two leaves returns, and so
        /// the whole scan, exactly unchanged.
        #[test]
        fn scan_is_scale_invariant(exp in -20i32..20, seed in 0u64..1000) {
            let mut state = seed.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
            let mut prices = vec![1.0f64];
            for _ in 0..240 {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                let step = 1.0 + ((state % 2001) as f64 - 1000.0) / 50_000.0;
                let last = *prices.last().unwrap();
                prices.push(last * step);
            }
            let scale = 2.0f64.powi(exp);
            let scaled: Vec<f64> = prices.iter().map(|p| p * scale).collect();
            let r1 = log_returns(&prices).unwrap();
            let r2 = log_returns(&scaled).unwrap();
            prop_assert_eq!(&r1, &r2);
            let cfg = DumpConfig::default();
            prop_assert_eq!(scan_returns(&r1, &cfg), scan_returns(&r2, &cfg));
        }

        /// Adding a constant to a return sample shifts the median by that
        /// constant and leaves the scale unchanged, up to rounding.
        #[test]
        fn baseline_is_translation_equivariant(shift in -0.1f64..0.1, seed in 0u64..1000) {
            let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let sample: Vec<f64> = (0..101).map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                ((state % 2001) as f64 - 1000.0) / 10_000.0
            }).collect();
            let shifted: Vec<f64> = sample.iter().map(|r| r + shift).collect();
            let b1 = robust_baseline(&sample).unwrap();
            let b2 = robust_baseline(&shifted).unwrap();
            prop_assert!((b2.median - (b1.median + shift)).abs() < 1e-9);
            prop_assert!((b2.sigma - b1.sigma).abs() < 1e-9);
        }
    }
}
