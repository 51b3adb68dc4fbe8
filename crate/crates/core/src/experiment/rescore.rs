//! Recomputes K and K^Π from a CSV under a binning of the caller's choice.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::table::{format_float, CsvLog};
use super::verify::config_domain;
use super::Metadata;
use crate::binning::BinningSpec;
use crate::error::{Error, Result};
use crate::history::{HistoryStats, Retention};
use crate::point::Point;
use crate::scores::{binned_score, classic_score};

/// K^Π ≤ K holds exactly for a partition of unity; this absorbs rounding.
pub const RESCORE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RescoreRow {
    pub t: u64,
    pub k_classic: f64,
    pub k_binned: f64,
}

impl RescoreRow {
    pub fn consistent(&self) -> bool {
        self.k_binned <= self.k_classic + RESCORE_SLACK * self.k_classic.max(1.0)
    }
}

/// Scores at the checkpoint rows of `csv` (rows that carry score cells).
///
/// Errors with `Verification` when some row breaks K^Π ≤ K.
pub fn rescore(csv: &Path, md: &Metadata, binning: &BinningSpec) -> Result<Vec<RescoreRow>> {
    let domain = config_domain(&md.config)?;
    let log = CsvLog::read(csv)?;
    Error::check_dim(domain.dim(), log.m)?;
    let b = Arc::new(binning.build(&domain).map_err(|e| Error::Config(format!("binning: {e}")))?);
    let mut stats = HistoryStats::new(domain, b.clone(), Retention::default())?;
    let mut out = Vec::new();
    for row in &log.rows {
        stats.record(&Point::new(row.forecast.clone())?, &Point::new(row.action.clone())?)?;
        if row.scores.is_some() {
            out.push(RescoreRow { t: row.t, k_classic: classic_score(&stats)?, k_binned: binned_score(&stats, &b)? });
        }
    }
    if let Some(r) = out.iter().find(|r| !r.consistent()) {
        return Err(Error::Verification(format!(
            "period {}: binned score {} exceeds classic score {}",
            r.t, r.k_binned, r.k_classic
        )));
    }
    Ok(out)
}

pub fn write_rescore(out: &mut impl Write, rows: &[RescoreRow]) -> Result<()> {
    writeln!(out, "t,K_classic,K_binned")?;
    for r in rows {
        writeln!(out, "{},{},{}", r.t, format_float(r.k_classic), format_float(r.k_binned))?;
    }
    Ok(())
}
