//! Per-round metrics and the statistics computed over them.
//!
//! CSV columns, one row per round:
//!
//! | column | meaning |
//! |---|---|
//! | `round` | round index from 0 |
//! | `fundamental` | fundamental value of the token that round |
//! | `reference` | reference price the round opened with |
//! | `clearing_price` | uniform clearing price, empty when nothing crossed |
//! | `settlement_price` | clearing price, or the reference when nothing crossed |
//! | `volume` | units traded, participant matches plus sponsor fills |
//! | `reserve_rate` | sponsor collateral over issued supply × issue price |
//! | `gini` | Gini coefficient of agent gross wealth at the settlement price |
//! | `dispersion` | coefficient of variation of the round's submitted quotes |
//! | `ratio` | settlement price over fundamental |
//! | `debt` | agents' outstanding borrowing (bubble scenario) |
//! | `credit_frozen` | whether the lender has stopped extending credit |

use std::io::Write;

use serde::Serialize;

use crate::SimError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundMetrics {
    pub round: u64,
    pub fundamental: f64,
    pub reference: f64,
    pub clearing_price: Option<f64>,
    pub settlement_price: f64,
    pub volume: f64,
    pub reserve_rate: f64,
    pub gini: f64,
    pub dispersion: f64,
    pub ratio: f64,
    pub debt: f64,
    pub credit_frozen: bool,
}

pub fn write_csv<W: Write>(rows: &[RoundMetrics], out: W) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

pub fn coefficient_of_variation(xs: &[f64]) -> f64 {
    let m = mean(xs);
    if m == 0.0 {
        0.0
    } else {
        std_dev(xs) / m
    }
}

/// Gini coefficient of non-negative values; 0 for empty or all-zero input.
pub fn gini(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let total: f64 = v.iter().sum();
    if v.is_empty() || total <= 0.0 {
        return 0.0;
    }
    let weighted: f64 = v.iter().enumerate().map(|(i, x)| (2.0 * (i as f64 + 1.0) - n - 1.0) * x).sum();
    weighted / (n * total)
}

/// Ordinary least-squares slope of `ys` against their index.
pub fn ols_slope(ys: &[f64]) -> f64 {
    let n = ys.len();
    if n < 2 {
        return 0.0;
    }
    let xm = (n as f64 - 1.0) / 2.0;
    let ym = mean(ys);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - xm;
        sxy += dx * (y - ym);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// Standard deviation of settlement prices over rounds `[from, to)`.
pub fn window_std(rows: &[RoundMetrics], from: usize, to: usize) -> f64 {
    let to = to.min(rows.len());
    let from = from.min(to);
    let prices: Vec<f64> = rows[from..to].iter().map(|r| r.settlement_price).collect();
    std_dev(&prices)
}

/// Late-window over early-window price standard deviation, each window
/// `window` rounds wide at either end of the run.
pub fn consensus_ratio(rows: &[RoundMetrics], window: usize) -> f64 {
    let early = window_std(rows, 0, window);
    let late = window_std(rows, rows.len().saturating_sub(window), rows.len());
    if early == 0.0 {
        if late == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        late / early
    }
}
