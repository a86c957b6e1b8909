//! Prices to log returns to per-period covariance matrices, and the
//! matrices.csv format.

use crate::error::{Error, Result};
use crate::linalg::{SpdMatrix, SymmetricMatrix};
use chrono::NaiveDate;
use std::io::{Read, Write};
use std::path::Path;

pub const DEFAULT_PERIOD: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct PriceTable {
    dates: Vec<NaiveDate>,
    symbols: Vec<String>,
    /// Row-major, one row per date.
    prices: Vec<Vec<f64>>,
}

impl PriceTable {
    pub fn new(dates: Vec<NaiveDate>, symbols: Vec<String>, prices: Vec<Vec<f64>>) -> Result<Self> {
        if dates.len() != prices.len() {
            return Err(Error::DimensionMismatch { expected: dates.len(), got: prices.len() });
        }
        if symbols.is_empty() {
            return Err(Error::Format("no asset columns".into()));
        }
        for w in dates.windows(2) {
            if w[1] == w[0] {
                return Err(Error::Format(format!("duplicate date {}", w[0])));
            }
            if w[1] < w[0] {
                return Err(Error::Format(format!("dates out of order at {}", w[1])));
            }
        }
        for (d, row) in dates.iter().zip(&prices) {
            if row.len() != symbols.len() {
                return Err(Error::Format(format!("{d}: expected {} prices, got {}", symbols.len(), row.len())));
            }
            if let Some(p) = row.iter().find(|p| !(**p > 0.0) || !p.is_finite()) {
                return Err(Error::Format(format!("{d}: price {p} is not strictly positive")));
            }
        }
        Ok(PriceTable { dates, symbols, prices })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn prices(&self) -> &[Vec<f64>] {
        &self.prices
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Reindex on `calendar`, repeating the previous observation on missing days.
    pub fn forward_fill(&self, calendar: &[NaiveDate]) -> Result<PriceTable> {
        let Some(first) = self.dates.first() else {
            return Err(Error::Format("empty price table".into()));
        };
        if calendar.first().is_none_or(|c| c > first) {
            return Err(Error::Format(format!("calendar does not cover first price date {first}")));
        }
        let mut out_dates = Vec::new();
        let mut out = Vec::new();
        let mut j = 0;
        for c in calendar {
            if c < first {
                continue;
            }
            if j < self.dates.len() && self.dates[j] < *c {
                return Err(Error::Format(format!("price date {} is not in the calendar", self.dates[j])));
            }
            if j < self.dates.len() && self.dates[j] == *c {
                j += 1;
            }
            out_dates.push(*c);
            out.push(self.prices[j - 1].clone());
        }
        if j < self.dates.len() {
            return Err(Error::Format(format!("price date {} is not in the calendar", self.dates[j])));
        }
        PriceTable::new(out_dates, self.symbols.clone(), out)
    }
}

fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|e| Error::Format(format!("bad date {s:?}: {e}")))
}

/// Reads `date,SYM1,...,SYMk` with ISO dates.
pub fn read_prices<R: Read>(reader: R) -> Result<PriceTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Format(e.to_string()))?.clone();
    if header.is_empty() || header.len() < 2 {
        return Err(Error::Format("price file needs a header `date,SYM1,...`".into()));
    }
    let symbols: Vec<String> = header.iter().skip(1).map(String::from).collect();
    let mut dates = Vec::new();
    let mut prices = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format(format!("row {}: {e}", i + 2)))?;
        if rec.len() != header.len() {
            return Err(Error::Format(format!("row {}: expected {} fields, got {}", i + 2, header.len(), rec.len())));
        }
        dates.push(parse_date(&rec[0])?);
        let row = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>().map_err(|e| Error::Format(format!("row {}: bad price {v:?}: {e}", i + 2))))
            .collect::<Result<Vec<f64>>>()?;
        prices.push(row);
    }
    if dates.is_empty() {
        return Err(Error::Format("price file has no rows".into()));
    }
    PriceTable::new(dates, symbols, prices)
}

pub fn read_calendar<R: Read>(mut reader: R) -> Result<Vec<NaiveDate>> {
    let mut s = String::new();
    reader.read_to_string(&mut s)?;
    let mut out: Vec<NaiveDate> = s.lines().filter(|l| !l.trim().is_empty()).map(parse_date).collect::<Result<_>>()?;
    let n = out.len();
    out.sort();
    out.dedup();
    if out.len() != n {
        return Err(Error::Format("duplicate calendar date".into()));
    }
    Ok(out)
}

pub fn load_prices(path: &Path, calendar: Option<&[NaiveDate]>) -> Result<PriceTable> {
    let table = read_prices(std::fs::File::open(path)?)?;
    match calendar {
        Some(c) => table.forward_fill(c),
        None => Ok(table),
    }
}

/// r_{j,k} = log(S_{j+1,k}/S_{j,k}).
pub fn log_returns(table: &PriceTable) -> Result<Vec<Vec<f64>>> {
    if table.len() < 2 {
        return Err(Error::InvalidArgument("need at least two dates".into()));
    }
    Ok(table.prices.windows(2).map(|w| w[1].iter().zip(&w[0]).map(|(b, a)| (b / a).ln()).collect()).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSample {
    m: usize,
    ids: Vec<String>,
    matrices: Vec<SpdMatrix>,
}

impl MatrixSample {
    pub fn new(ids: Vec<String>, matrices: Vec<SpdMatrix>) -> Result<Self> {
        let Some(first) = matrices.first() else {
            return Err(Error::Format("empty matrix sample".into()));
        };
        let m = first.dim();
        if ids.len() != matrices.len() {
            return Err(Error::DimensionMismatch { expected: matrices.len(), got: ids.len() });
        }
        if let Some(x) = matrices.iter().find(|x| x.dim() != m) {
            return Err(Error::DimensionMismatch { expected: m, got: x.dim() });
        }
        Ok(MatrixSample { m, ids, matrices })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn matrices(&self) -> &[SpdMatrix] {
        &self.matrices
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "m={}", self.m)?;
        for (id, x) in self.ids.iter().zip(&self.matrices) {
            if id.contains(',') || id.contains('\n') {
                return Err(Error::Format(format!("identifier {id:?} contains a separator")));
            }
            write!(w, "{id}")?;
            for v in x.matrix().upper() {
                // shortest representation that parses back to the same bits
                write!(w, ",{v:?}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(mut r: R) -> Result<Self> {
        let mut s = String::new();
        r.read_to_string(&mut s)?;
        let mut lines = s.lines().filter(|l| !l.trim().is_empty());
        let head = lines.next().ok_or_else(|| Error::Format("empty matrices file".into()))?;
        let m: usize = head
            .trim()
            .strip_prefix("m=")
            .and_then(|v| v.trim().parse().ok())
            .filter(|m| *m > 0)
            .ok_or_else(|| Error::Format(format!("bad header {head:?}, expected m=<dim>")))?;
        let width = m * (m + 1) / 2;
        let mut ids = Vec::new();
        let mut mats = Vec::new();
        for (i, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != width + 1 {
                return Err(Error::Format(format!("row {}: expected {} fields, got {}", i + 2, width + 1, f.len())));
            }
            let upper = f[1..]
                .iter()
                .map(|v| v.parse::<f64>().map_err(|e| Error::Format(format!("row {}: {v:?}: {e}", i + 2))))
                .collect::<Result<Vec<f64>>>()?;
            let x = SymmetricMatrix::from_upper(m, &upper)?;
            ids.push(f[0].to_string());
            mats.push(SpdMatrix::new(x)?);
        }
        MatrixSample::new(ids, mats)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Mean-centered sample covariance (denominator period − 1) of each block of
/// `period` consecutive return rows. A trailing partial block is dropped.
pub fn period_covariances(returns: &[Vec<f64>], period: usize) -> Result<MatrixSample> {
    let m = returns.first().map(|r| r.len()).ok_or_else(|| Error::InvalidArgument("no returns".into()))?;
    if m == 0 {
        return Err(Error::InvalidArgument("no assets".into()));
    }
    if let Some(r) = returns.iter().find(|r| r.len() != m) {
        return Err(Error::DimensionMismatch { expected: m, got: r.len() });
    }
    if period < m + 1 {
        return Err(Error::InvalidArgument(format!("period {period} must be at least m + 1 = {}", m + 1)));
    }
    let blocks = returns.len() / period;
    if blocks == 0 {
        return Err(Error::InvalidArgument(format!("{} return rows do not fill one period of {period}", returns.len())));
    }
    let rest = returns.len() % period;
    if rest != 0 {
        log::warn!("dropping {rest} trailing return rows that do not fill a period");
    }
    let mut ids = Vec::with_capacity(blocks);
    let mut mats = Vec::with_capacity(blocks);
    for b in 0..blocks {
        let rows = &returns[b * period..(b + 1) * period];
        let mean: Vec<f64> = (0..m).map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / period as f64).collect();
        let mut upper = Vec::with_capacity(m * (m + 1) / 2);
        for i in 0..m {
            for j in i..m {
                let s: f64 = rows.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum();
                upper.push(s / (period as f64 - 1.0));
            }
        }
        let cov = SymmetricMatrix::from_upper(m, &upper)?;
        let x = SpdMatrix::new(cov).map_err(|e| Error::DegenerateSample(format!("period {}: covariance not positive definite ({e})", b + 1)))?;
        ids.push(format!("P{:03}", b + 1));
        mats.push(x);
    }
    MatrixSample::new(ids, mats)
}
