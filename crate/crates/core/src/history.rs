//! Incremental accumulators for n_t(w_i), t·g_t(w_i) and the classic tally.

use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::binning::{Binning, WeightFn};
use crate::domain::ConvexDomain;
use crate::error::{Error, Result};
use crate::point::{Point, PointKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Retention {
    /// Keep the full (c_s, a_s) log.
    #[serde(default)]
    pub keep_log: bool,
    /// Stop logging (and treat the log as absent) beyond this many periods.
    #[serde(default = "default_log_cap")]
    pub log_cap: usize,
}

fn default_log_cap() -> usize {
    1_000_000
}

impl Default for Retention {
    fn default() -> Self {
        Retention { keep_log: false, log_cap: default_log_cap() }
    }
}

impl Retention {
    pub fn with_log() -> Self {
        Retention { keep_log: true, ..Retention::default() }
    }
}

/// Per-forecast-value tally for the classic score.
#[derive(Debug, Clone, PartialEq)]
pub struct TallyEntry {
    pub point: Point,
    pub count: u64,
    /// Σ (a_s − x) over the periods with c_s = x.
    pub gap_sum: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct HistoryStats {
    domain: ConvexDomain,
    binning: Arc<Binning>,
    t: u64,
    bin_weight: Vec<f64>,
    bin_gap: Vec<f64>,
    tally: IndexMap<PointKey, TallyEntry>,
    log: Option<Vec<(Point, Point)>>,
    log_cap: usize,
    log_dropped: bool,
    scratch: Vec<(usize, f64)>,
}

impl HistoryStats {
    pub fn new(domain: ConvexDomain, binning: Arc<Binning>, retention: Retention) -> Result<Self> {
        Error::check_dim(domain.dim(), binning.dim())?;
        let i = binning.len();
        let m = domain.dim();
        Ok(HistoryStats {
            domain,
            binning,
            t: 0,
            bin_weight: vec![0.0; i],
            bin_gap: vec![0.0; i * m],
            tally: IndexMap::new(),
            log: retention.keep_log.then(Vec::new),
            log_cap: retention.log_cap,
            log_dropped: false,
            scratch: Vec::new(),
        })
    }

    /// Rebuild from a recorded log.
    pub fn replay(domain: ConvexDomain, binning: Arc<Binning>, log: &[(Point, Point)], retention: Retention) -> Result<Self> {
        let mut s = HistoryStats::new(domain, binning, retention)?;
        for (c, a) in log {
            s.record(c, a)?;
        }
        Ok(s)
    }

    /// Adds period t+1 with forecast c and action a.
    pub fn record(&mut self, c: &Point, a: &Point) -> Result<()> {
        self.domain.check_point(c)?;
        self.domain.check_point(a)?;
        let m = self.dim();
        self.t += 1;
        let mut scratch = std::mem::take(&mut self.scratch);
        self.binning.weights_into(c, &mut scratch);
        for &(i, w) in &scratch {
            self.bin_weight[i] += w;
            let row = &mut self.bin_gap[i * m..(i + 1) * m];
            for k in 0..m {
                row[k] += w * (a[k] - c[k]);
            }
        }
        self.scratch = scratch;
        let entry = self.tally.entry(c.key()).or_insert_with(|| TallyEntry {
            point: c.clone(),
            count: 0,
            gap_sum: vec![0.0; m],
        });
        entry.count += 1;
        for k in 0..m {
            entry.gap_sum[k] += a[k] - c[k];
        }
        if let Some(log) = &mut self.log {
            if log.len() < self.log_cap {
                log.push((c.clone(), a.clone()));
            } else {
                self.log = None;
                self.log_dropped = true;
            }
        }
        Ok(())
    }

    /// Value-semantics update: returns the new stats, leaving `self` untouched.
    pub fn updated(&self, c: &Point, a: &Point) -> Result<Self> {
        let mut next = self.clone();
        next.record(c, a)?;
        Ok(next)
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &ConvexDomain {
        &self.domain
    }

    pub fn binning(&self) -> &Arc<Binning> {
        &self.binning
    }

    pub fn bins(&self) -> usize {
        self.bin_weight.len()
    }

    /// n_t(w_i) = Σ_s w_i(c_s).
    pub fn bin_weight(&self, i: usize) -> f64 {
        self.bin_weight[i]
    }

    /// Σ_s w_i(c_s)(a_s − c_s), i.e. t·g_t(w_i).
    pub fn bin_gap_sum(&self, i: usize) -> &[f64] {
        let m = self.dim();
        &self.bin_gap[i * m..(i + 1) * m]
    }

    /// g_t(w_i), zero at t = 0.
    pub fn gap(&self, i: usize) -> Vec<f64> {
        let t = self.t.max(1) as f64;
        self.bin_gap_sum(i).iter().map(|v| v / t).collect()
    }

    /// e_t(w_i), zero when n_t(w_i) = 0.
    pub fn error(&self, i: usize) -> Vec<f64> {
        let n = self.bin_weight[i];
        if n > 0.0 {
            self.bin_gap_sum(i).iter().map(|v| v / n).collect()
        } else {
            vec![0.0; self.dim()]
        }
    }

    pub fn tally(&self) -> impl Iterator<Item = &TallyEntry> {
        self.tally.values()
    }

    pub fn tally_len(&self) -> usize {
        self.tally.len()
    }

    pub fn tally_entry(&self, x: &Point) -> Option<&TallyEntry> {
        self.tally.get(&x.key())
    }

    pub fn log(&self) -> Result<&[(Point, Point)]> {
        match &self.log {
            Some(l) if !self.log_dropped => Ok(l),
            _ => Err(Error::LogNotRetained),
        }
    }

    /// n_t(w) and Σ_s w(c_s)(a_s − c_s) for an arbitrary weight function, from the log.
    pub fn weighted_sums(&self, w: &WeightFn) -> Result<(f64, Vec<f64>)> {
        let log = self.log()?;
        let mut n = 0.0;
        let mut sum = vec![0.0; self.dim()];
        for (c, a) in log {
            let v = w.eval(c);
            if v != 0.0 {
                n += v;
                for k in 0..sum.len() {
                    sum[k] += v * (a[k] - c[k]);
                }
            }
        }
        Ok((n, sum))
    }

    /// g_t(w) for an arbitrary weight function, from the log.
    pub fn gap_of(&self, w: &WeightFn) -> Result<Vec<f64>> {
        if self.t == 0 {
            return Err(Error::EmptyHistory);
        }
        let (_, sum) = self.weighted_sums(w)?;
        let t = self.t as f64;
        Ok(sum.into_iter().map(|v| v / t).collect())
    }
}
