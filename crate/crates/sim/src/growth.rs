//! Compound-growth arithmetic: the rule of 72 and the gap between asset
//! and output growth over a horizon.

use serde::Serialize;

use crate::SimError;

/// Periods for a value growing at `rate_percent` per period to double,
/// by the rule of 72.
pub fn rule_of_72(rate_percent: f64) -> Result<f64, SimError> {
    if !rate_percent.is_finite() || rate_percent <= 0.0 {
        return Err(SimError::NonPositiveRate(rate_percent));
    }
    Ok(72.0 / rate_percent)
}

/// Whole periods used by rounded-mode arithmetic: the rule-of-72 doubling
/// time rounded to the nearest period, at least one.
pub fn doubling_periods(rate_percent: f64) -> Result<u64, SimError> {
    Ok(rule_of_72(rate_percent)?.round().max(1.0) as u64)
}

/// Human-readable doubling time, e.g. `"at 10% a year, wealth doubles in about 7 years"`.
pub fn doubling_report(rate_percent: f64) -> Result<String, SimError> {
    let n = doubling_periods(rate_percent)?;
    Ok(format!("at {rate_percent}% a year, wealth doubles in about {n} years"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthGap {
    pub r_percent: f64,
    pub g_percent: f64,
    pub horizon: u64,
    pub asset_doublings: u64,
    pub gdp_doublings: u64,
    /// `2^asset_doublings`.
    pub asset_multiple_rounded: f64,
    pub gdp_multiple_rounded: f64,
    pub gap_rounded: f64,
    /// `(1 + r)^horizon`.
    pub asset_multiple_exact: f64,
    pub gdp_multiple_exact: f64,
    pub gap_exact: f64,
}

/// Multiples reached by assets growing at `r_percent` and output growing at
/// `g_percent` over `horizon` periods.
///
/// Rounded mode counts whole doublings, `2^floor(horizon / doubling_periods)`;
/// exact mode compounds.
pub fn growth_gap(r_percent: f64, g_percent: f64, horizon: u64) -> Result<GrowthGap, SimError> {
    if horizon == 0 {
        return Err(SimError::ConfigInvalid("horizon must be positive".into()));
    }
    let asset_doublings = horizon / doubling_periods(r_percent)?;
    let gdp_doublings = horizon / doubling_periods(g_percent)?;
    let asset_multiple_rounded = 2f64.powi(asset_doublings as i32);
    let gdp_multiple_rounded = 2f64.powi(gdp_doublings as i32);
    let compound = |p: f64| (1.0 + p / 100.0).powi(horizon as i32);
    let asset_multiple_exact = compound(r_percent);
    let gdp_multiple_exact = compound(g_percent);
    Ok(GrowthGap {
        r_percent,
        g_percent,
        horizon,
        asset_doublings,
        gdp_doublings,
        asset_multiple_rounded,
        gdp_multiple_rounded,
        gap_rounded: asset_multiple_rounded / gdp_multiple_rounded,
        asset_multiple_exact,
        gdp_multiple_exact,
        gap_exact: asset_multiple_exact / gdp_multiple_exact,
    })
}

/// Header plus one row. Numbers use shortest round-trip formatting, so
/// whole multiples print without a fractional part.
pub fn write_csv<W: std::io::Write>(gap: &GrowthGap, out: W) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "r_percent",
        "g_percent",
        "horizon",
        "asset_multiple_rounded",
        "gdp_multiple_rounded",
        "gap_rounded",
        "asset_multiple_exact",
        "gdp_multiple_exact",
        "gap_exact",
    ])?;
    w.write_record([
        gap.r_percent.to_string(),
        gap.g_percent.to_string(),
        gap.horizon.to_string(),
        gap.asset_multiple_rounded.to_string(),
        gap.gdp_multiple_rounded.to_string(),
        gap.gap_rounded.to_string(),
        gap.asset_multiple_exact.to_string(),
        gap.gdp_multiple_exact.to_string(),
        gap.gap_exact.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}
