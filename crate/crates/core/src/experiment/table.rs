//! The per-seed CSV: one row per period, scores only on checkpoint rows.
//!
//! Floats are written with 17 significant digits so every cell parses back to
//! the exact f64 that produced it.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::point::Point;
use crate::scores::ScoreSet;

pub const SCORE_COLUMNS: [&str; 4] = ["K_classic", "K_binned", "S_over_t2", "X_over_t"];

pub fn csv_header(m: usize, ne_gap: bool) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((0..m).map(|k| format!("forecast_{k}")));
    h.extend((0..m).map(|k| format!("action_{k}")));
    h.extend(SCORE_COLUMNS.iter().map(|s| s.to_string()));
    if ne_gap {
        h.push("ne_gap".into());
    }
    h
}

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn score_cells(s: &ScoreSet) -> [String; 4] {
    [s.k_classic, s.k_binned, s.s_over_t2, s.x_over_t].map(format_float)
}

pub struct CsvRow<'a> {
    pub t: u64,
    pub forecast: &'a Point,
    pub action: &'a Point,
    pub scores: Option<&'a ScoreSet>,
    pub ne_gap: Option<f64>,
}

pub struct CsvWriter<W: Write> {
    out: W,
    m: usize,
    ne_gap: bool,
    line: String,
}

impl<W: Write> CsvWriter<W> {
    pub fn new(mut out: W, m: usize, ne_gap: bool) -> Result<Self> {
        writeln!(out, "{}", csv_header(m, ne_gap).join(","))?;
        Ok(CsvWriter { out, m, ne_gap, line: String::new() })
    }

    pub fn row(&mut self, r: &CsvRow<'_>) -> Result<()> {
        Error::check_dim(self.m, r.forecast.dim())?;
        Error::check_dim(self.m, r.action.dim())?;
        if self.ne_gap != r.ne_gap.is_some() {
            return Err(Error::contract("ne_gap cell present on some rows only"));
        }
        self.line.clear();
        self.line.push_str(&r.t.to_string());
        for x in r.forecast.iter().chain(r.action.iter()) {
            self.line.push(',');
            self.line.push_str(&format_float(*x));
        }
        match r.scores {
            Some(s) => {
                for cell in score_cells(s) {
                    self.line.push(',');
                    self.line.push_str(&cell);
                }
            }
            None => self.line.push_str(",,,,"),
        }
        if let Some(g) = r.ne_gap {
            self.line.push(',');
            self.line.push_str(&format_float(g));
        }
        self.line.push('\n');
        self.out.write_all(self.line.as_bytes())?;
        Ok(())
    }
}

/// A parsed row; score cells are kept as text so checks compare exact strings.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRecord {
    pub t: u64,
    pub forecast: Vec<f64>,
    pub action: Vec<f64>,
    pub scores: Option<[String; 4]>,
    pub ne_gap: Option<String>,
}

impl CsvRecord {
    pub fn score_values(&self) -> Option<[f64; 4]> {
        let s = self.scores.as_ref()?;
        let mut out = [0.0; 4];
        for (o, c) in out.iter_mut().zip(s) {
            *o = c.parse().ok()?;
        }
        Some(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvLog {
    pub m: usize,
    pub has_ne_gap: bool,
    pub rows: Vec<CsvRecord>,
}

impl CsvLog {
    pub fn read(path: &Path) -> Result<CsvLog> {
        let text = fs::read_to_string(path).map_err(|e| super::with_path(e, path))?;
        CsvLog::parse(&text).map_err(|e| match e {
            Error::Verification(msg) => Error::Verification(format!("{}: {msg}", path.display())),
            e => e,
        })
    }

    pub fn parse(text: &str) -> Result<CsvLog> {
        let bad = |line: usize, msg: String| Error::Verification(format!("line {line}: {msg}"));
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().ok_or_else(|| bad(1, "missing header".into()))?.split(',').collect();
        let m = header.iter().filter(|h| h.starts_with("forecast_")).count();
        let has_ne_gap = header.last() == Some(&"ne_gap");
        if header != csv_header(m, has_ne_gap) {
            return Err(bad(1, format!("unexpected header {header:?}")));
        }
        let width = header.len();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let n = i + 2;
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != width {
                return Err(bad(n, format!("{} cells, expected {width}", cells.len())));
            }
            let t = cells[0].parse().map_err(|_| bad(n, format!("bad period {:?}", cells[0])))?;
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| bad(n, format!("bad number {s:?}")))
            };
            let forecast = cells[1..1 + m].iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?;
            let action = cells[1 + m..1 + 2 * m].iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?;
            let sc = &cells[1 + 2 * m..5 + 2 * m];
            let scores = if sc.iter().all(|s| s.is_empty()) {
                None
            } else {
                for s in sc {
                    num(s)?;
                }
                Some([0, 1, 2, 3].map(|k| sc[k].to_string()))
            };
            let ne_gap = if has_ne_gap {
                let g = cells[width - 1];
                num(g)?;
                Some(g.to_string())
            } else {
                None
            };
            rows.push(CsvRecord { t, forecast, action, scores, ne_gap });
        }
        Ok(CsvLog { m, has_ne_gap, rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let xs = [0.1, 1.0 / 3.0, 1e-300, 0.0, 1.0 - f64::EPSILON, 123456.789];
        for x in xs {
            assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
        }
        let mut buf = Vec::new();
        let mut w = CsvWriter::new(&mut buf, 2, true).unwrap();
        let c = Point::new(vec![0.1, 0.9]).unwrap();
        let a = Point::new(vec![1.0, 0.0]).unwrap();
        let s = ScoreSet { t: 1, k_classic: 0.9, k_binned: 0.45, s_over_t2: 0.81, x_over_t: 0.2 };
        w.row(&CsvRow { t: 1, forecast: &c, action: &a, scores: Some(&s), ne_gap: Some(0.25) }).unwrap();
        w.row(&CsvRow { t: 2, forecast: &c, action: &a, scores: None, ne_gap: Some(1.0 / 3.0) }).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,forecast_0,forecast_1,action_0,action_1,K_classic,K_binned,S_over_t2,X_over_t,ne_gap\n"));
        let log = CsvLog::parse(&text).unwrap();
        assert_eq!(log.m, 2);
        assert_eq!(log.rows[0].forecast, vec![0.1, 0.9]);
        assert_eq!(log.rows[0].score_values().unwrap(), [0.9, 0.45, 0.81, 0.2]);
        assert_eq!(log.rows[1].scores, None);
        assert_eq!(log.rows[1].ne_gap.as_deref().unwrap().parse::<f64>().unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn malformed_rows_rejected() {
        let head = "t,forecast_0,action_0,K_classic,K_binned,S_over_t2,X_over_t\n";
        assert!(CsvLog::parse(&format!("{head}1,0.5,1,,,,\n")).is_ok());
        assert!(CsvLog::parse(&format!("{head}1,0.5,1,,,\n")).is_err());
        assert!(CsvLog::parse(&format!("{head}1,nan,1,,,,\n")).is_err());
        assert!(CsvLog::parse(&format!("{head}1,0.5,1,0.1,,,\n")).is_err());
        assert!(CsvLog::parse("t,forecast_0\n").is_err());
    }
}
