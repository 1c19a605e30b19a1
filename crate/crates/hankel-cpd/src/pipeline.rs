//! Financial data pipeline: OHLCV price files to log-returns to windowed
//! covariance series, plus eigenvalue reduction and on-disk persistence.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use chrono::{DateTime, Utc};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::SpdMatrix;

/// One validated price observation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PriceRow {
    /// UTC epoch seconds.
    pub timestamp: i64,
    pub close: f64,
}

/// Close prices of one symbol with strictly increasing timestamps.
#[derive(Clone, Debug)]
pub struct PriceSeries {
    pub symbol: String,
    pub rows: Vec<PriceRow>,
}

impl PriceSeries {
    pub fn new(symbol: impl Into<String>, rows: Vec<PriceRow>) -> Result<Self> {
        let symbol = symbol.into();
        let bad: Vec<usize> = rows
            .iter()
            .enumerate()
            .filter(|(_, r)| !(r.close.is_finite() && r.close > 0.0))
            .map(|(i, _)| i + 1)
            .collect();
        if !bad.is_empty() {
            return Err(Error::InvalidInput(format!(
                "{symbol}: non-positive close at rows {bad:?}"
            )));
        }
        for (i, w) in rows.windows(2).enumerate() {
            if w[1].timestamp <= w[0].timestamp {
                return Err(Error::InvalidInput(format!(
                    "{symbol}: timestamps not strictly increasing at row {} ({} then {})",
                    i + 2,
                    w[0].timestamp,
                    w[1].timestamp
                )));
            }
        }
        Ok(Self { symbol, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

fn parse_timestamp(raw: &str) -> Option<i64> {
    let raw = raw.trim();
    if let Ok(v) = raw.parse::<i64>() {
        return Some(v);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.timestamp());
    }
    None
}

/// Load a close-price series from a CSV file.
///
/// The header must contain `timestamp` and `close` columns
/// (case-insensitive, any order); other columns are ignored. Timestamps are
/// epoch seconds or ISO-8601 UTC. Rows with non-positive close, unparsable
/// timestamps, or non-increasing timestamps are reported with their 1-based
/// data row numbers. The symbol is taken from the file stem.
pub fn load_prices(path: &Path) -> Result<PriceSeries> {
    let symbol = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "series".to_string());
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
    };
    let ts_col = find("timestamp").ok_or_else(|| {
        Error::InvalidInput(format!("{}: missing required column 'timestamp'", path.display()))
    })?;
    let close_col = find("close").ok_or_else(|| {
        Error::InvalidInput(format!("{}: missing required column 'close'", path.display()))
    })?;

    let mut rows = Vec::new();
    let mut bad_close = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let row_no = idx + 1;
        let ts_raw = record.get(ts_col).unwrap_or("");
        let timestamp = parse_timestamp(ts_raw).ok_or_else(|| {
            Error::InvalidInput(format!(
                "{}: unparsable timestamp {ts_raw:?} at row {row_no}",
                path.display()
            ))
        })?;
        let close: f64 = record
            .get(close_col)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| {
                Error::InvalidInput(format!("{}: unparsable close at row {row_no}", path.display()))
            })?;
        if !(close.is_finite() && close > 0.0) {
            bad_close.push(row_no);
        }
        rows.push(PriceRow { timestamp, close });
    }
    if !bad_close.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{}: non-positive close at rows {bad_close:?}",
            path.display()
        )));
    }
    for (i, w) in rows.windows(2).enumerate() {
        if w[1].timestamp <= w[0].timestamp {
            return Err(Error::InvalidInput(format!(
                "{}: timestamps not strictly increasing at row {}",
                path.display(),
                i + 2
            )));
        }
    }
    PriceSeries::new(symbol, rows)
}

/// Log-returns of several symbols aligned on their common timestamps.
#[derive(Clone, Debug)]
pub struct ReturnPanel {
    pub symbols: Vec<String>,
    /// Timestamp of each return (the later of the two prices).
    pub times: Vec<i64>,
    /// Row per time, column per symbol.
    pub values: DMatrix<f64>,
}

impl ReturnPanel {
    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn n_symbols(&self) -> usize {
        self.symbols.len()
    }
}

/// Compute log-returns log(X_t / X_{t-1}) over the timestamp intersection of
/// all series. Timestamps missing from any symbol are dropped (and logged);
/// returns are taken between consecutive surviving timestamps.
pub fn log_returns(prices: &[PriceSeries]) -> Result<ReturnPanel> {
    if prices.is_empty() {
        return Err(Error::InvalidInput("need at least one price series".into()));
    }
    let mut common: HashSet<i64> = prices[0].rows.iter().map(|r| r.timestamp).collect();
    for series in &prices[1..] {
        let times: HashSet<i64> = series.rows.iter().map(|r| r.timestamp).collect();
        common.retain(|t| times.contains(t));
    }
    let mut grid: Vec<i64> = common.into_iter().collect();
    grid.sort_unstable();
    if grid.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "timestamp intersection has {} points; need at least 2",
            grid.len()
        )));
    }
    for series in prices {
        let dropped = series.len() - grid.len();
        if dropped > 0 {
            log::info!("{}: {dropped} timestamps outside the common grid dropped", series.symbol);
        }
    }

    let symbols: Vec<String> = prices.iter().map(|s| s.symbol.clone()).collect();
    let t = grid.len() - 1;
    let mut values = DMatrix::zeros(t, prices.len());
    for (col, series) in prices.iter().enumerate() {
        let by_time: HashMap<i64, f64> = series.rows.iter().map(|r| (r.timestamp, r.close)).collect();
        for (row, w) in grid.windows(2).enumerate() {
            let prev = by_time[&w[0]];
            let cur = by_time[&w[1]];
            values[(row, col)] = (cur / prev).ln();
        }
    }
    Ok(ReturnPanel {
        symbols,
        times: grid[1..].to_vec(),
        values,
    })
}

/// How return rows are grouped into covariance windows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Grouping {
    /// One group per UTC calendar day.
    CalendarDay,
    /// One group per UTC calendar hour.
    CalendarHour,
    /// Fixed-size chunks of consecutive rows; the remainder is dropped.
    FixedCount(usize),
}

impl Grouping {
    /// Parse `day`, `hour`, or `count:N`.
    pub fn parse(raw: &str) -> Result<Self> {
        match raw {
            "day" => Ok(Self::CalendarDay),
            "hour" => Ok(Self::CalendarHour),
            other => {
                if let Some(n) = other.strip_prefix("count:") {
                    let n: usize = n.parse().map_err(|_| {
                        Error::InvalidConfig(format!("bad fixed-count grouping {other:?}"))
                    })?;
                    if n < 2 {
                        return Err(Error::InvalidConfig("count grouping needs N >= 2".into()));
                    }
                    Ok(Self::FixedCount(n))
                } else {
                    Err(Error::InvalidConfig(format!(
                        "unknown grouping {other:?}; expected day, hour, or count:N"
                    )))
                }
            }
        }
    }
}

/// An ordered, timestamped sequence of SPD matrices of common dimension.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "SeriesJson", into = "SeriesJson")]
pub struct MatrixSeries {
    dim: usize,
    items: Vec<MatrixSeriesItem>,
}

#[derive(Clone, Debug)]
pub struct MatrixSeriesItem {
    pub label: String,
    /// Epoch seconds of the first and last observation in the window.
    pub start: i64,
    pub end: i64,
    pub matrix: SpdMatrix,
}

impl MatrixSeries {
    pub fn new(dim: usize, items: Vec<MatrixSeriesItem>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("series dimension must be positive".into()));
        }
        for (i, item) in items.iter().enumerate() {
            if item.matrix.dim() != dim {
                return Err(Error::Dimension(format!(
                    "/items/{i}/data: matrix is {}x{} but series dim is {dim}",
                    item.matrix.dim(),
                    item.matrix.dim()
                )));
            }
        }
        for (i, w) in items.windows(2).enumerate() {
            if w[1].start < w[0].start {
                return Err(Error::InvalidInput(format!(
                    "/items/{}: series not in chronological order",
                    i + 1
                )));
            }
        }
        Ok(Self { dim, items })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn items(&self) -> &[MatrixSeriesItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// The matrices alone, in order, e.g. for building a Gram.
    pub fn matrices(&self) -> Vec<SpdMatrix> {
        self.items.iter().map(|it| it.matrix.clone()).collect()
    }
}

#[derive(Clone, Serialize, Deserialize)]
struct ItemJson {
    label: String,
    start: i64,
    end: i64,
    data: Vec<Vec<f64>>,
}

#[derive(Clone, Serialize, Deserialize)]
struct SeriesJson {
    dim: usize,
    items: Vec<ItemJson>,
}

impl TryFrom<SeriesJson> for MatrixSeries {
    type Error = Error;

    fn try_from(json: SeriesJson) -> Result<Self> {
        let mut items = Vec::with_capacity(json.items.len());
        for (i, item) in json.items.into_iter().enumerate() {
            if item.data.len() != json.dim || item.data.iter().any(|r| r.len() != json.dim) {
                return Err(Error::InvalidInput(format!(
                    "/items/{i}/data: expected a {0}x{0} matrix",
                    json.dim
                )));
            }
            let matrix = SpdMatrix::from_rows(&item.data)
                .map_err(|e| Error::InvalidInput(format!("/items/{i}/data: {e}")))?;
            items.push(MatrixSeriesItem {
                label: item.label,
                start: item.start,
                end: item.end,
                matrix,
            });
        }
        MatrixSeries::new(json.dim, items)
    }
}

impl From<MatrixSeries> for SeriesJson {
    fn from(series: MatrixSeries) -> Self {
        SeriesJson {
            dim: series.dim,
            items: series
                .items
                .into_iter()
                .map(|it| ItemJson {
                    label: it.label,
                    start: it.start,
                    end: it.end,
                    data: (0..it.matrix.dim())
                        .map(|r| (0..it.matrix.dim()).map(|c| it.matrix.entries()[(r, c)]).collect())
                        .collect(),
                })
                .collect(),
        }
    }
}

/// Write a series as JSON (UTF-8, full round-trip precision for doubles).
pub fn save_matrix_series(series: &MatrixSeries, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(file, series)?;
    Ok(())
}

/// Load a series saved by [`save_matrix_series`]; extra top-level fields
/// (such as an embedded run manifest) are ignored.
pub fn load_matrix_series(path: &Path) -> Result<MatrixSeries> {
    let file = std::fs::File::open(path)?;
    let series: MatrixSeries = serde_json::from_reader(std::io::BufReader::new(file))?;
    Ok(series)
}

fn day_label(ts: i64) -> String {
    DateTime::<Utc>::from_timestamp(ts, 0)
        .map(|dt| dt.format("%Y-%m-%d").to_string())
        .unwrap_or_else(|| format!("day-{ts}"))
}

fn hour_label(ts: i64) -> String {
    DateTime::<Utc>::from_timestamp(ts, 0)
        .map(|dt| dt.format("%Y-%m-%dT%H").to_string())
        .unwrap_or_else(|| format!("hour-{ts}"))
}

/// A covariance series plus bookkeeping about what the grouping discarded.
#[derive(Clone, Debug)]
pub struct CovarianceOutcome {
    pub series: MatrixSeries,
    /// Calendar groups skipped for having fewer than 2 rows.
    pub dropped_groups: usize,
    /// Trailing rows discarded by fixed-count grouping.
    pub dropped_rows: usize,
}

/// Per-group mean-centered sample covariance (denominator group size - 1).
///
/// Groups with fewer than two rows are dropped and logged. A group of
/// constant returns produces the zero matrix, which is accepted (and
/// logged). Fixed-count grouping drops the trailing remainder.
pub fn windowed_covariance(panel: &ReturnPanel, grouping: Grouping) -> Result<MatrixSeries> {
    Ok(windowed_covariance_detailed(panel, grouping)?.series)
}

/// As [`windowed_covariance`], additionally reporting drop counts.
pub fn windowed_covariance_detailed(
    panel: &ReturnPanel,
    grouping: Grouping,
) -> Result<CovarianceOutcome> {
    let d = panel.n_symbols();
    if d == 0 || panel.n_times() == 0 {
        return Err(Error::InvalidInput("empty return panel".into()));
    }

    let mut dropped_rows = 0usize;
    // group key -> row indices, in chronological order
    let mut groups: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    match grouping {
        Grouping::CalendarDay => {
            for (row, &ts) in panel.times.iter().enumerate() {
                groups.entry(ts.div_euclid(86_400)).or_default().push(row);
            }
        }
        Grouping::CalendarHour => {
            for (row, &ts) in panel.times.iter().enumerate() {
                groups.entry(ts.div_euclid(3_600)).or_default().push(row);
            }
        }
        Grouping::FixedCount(w) => {
            let full = panel.n_times() / w;
            dropped_rows = panel.n_times() - full * w;
            if dropped_rows > 0 {
                log::info!("fixed-count grouping drops {dropped_rows} trailing rows");
            }
            for chunk in 0..full {
                groups.insert(chunk as i64, (chunk * w..(chunk + 1) * w).collect());
            }
        }
    }

    let mut items = Vec::new();
    let mut dropped_groups = 0usize;
    for (key, rows) in groups {
        if rows.len() < 2 {
            dropped_groups += 1;
            continue;
        }
        let start = panel.times[rows[0]];
        let end = panel.times[*rows.last().unwrap()];
        let label = match grouping {
            Grouping::CalendarDay => day_label(start),
            Grouping::CalendarHour => hour_label(start),
            Grouping::FixedCount(_) => format!("chunk-{key:04}"),
        };
        let g = rows.len();
        let mut mean = vec![0.0f64; d];
        for &r in &rows {
            for (c, m) in mean.iter_mut().enumerate() {
                *m += panel.values[(r, c)];
            }
        }
        for m in &mut mean {
            *m /= g as f64;
        }
        let mut cov = DMatrix::zeros(d, d);
        for &r in &rows {
            for i in 0..d {
                let di = panel.values[(r, i)] - mean[i];
                for j in i..d {
                    cov[(i, j)] += di * (panel.values[(r, j)] - mean[j]);
                }
            }
        }
        for i in 0..d {
            for j in i..d {
                let v = cov[(i, j)] / (g as f64 - 1.0);
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        if cov.iter().all(|&v| v == 0.0) {
            log::warn!("group {label}: constant returns produced a zero covariance matrix");
        }
        let matrix = SpdMatrix::new(cov)
            .map_err(|e| Error::InvalidInput(format!("group {label}: {e}")))?;
        items.push(MatrixSeriesItem {
            label,
            start,
            end,
            matrix,
        });
    }
    if dropped_groups > 0 {
        log::warn!("{dropped_groups} groups with fewer than 2 rows dropped");
    }
    if items.is_empty() {
        return Err(Error::InvalidInput("no group had at least 2 return rows".into()));
    }
    Ok(CovarianceOutcome {
        series: MatrixSeries::new(d, items)?,
        dropped_groups,
        dropped_rows,
    })
}

/// Eigenvalue reduction of a series together with the cumulative
/// explained-variance profile of the mean covariance matrix.
#[derive(Clone, Debug)]
pub struct PcaReduction {
    pub series: MatrixSeries,
    /// `explained_variance[i]` = share of total variance carried by the i+1
    /// leading eigenvalues of the mean covariance matrix.
    pub explained_variance: Vec<f64>,
}

/// Replace each matrix by the diagonal matrix of its p largest eigenvalues
/// (descending). The reported explained-variance table comes from the mean
/// covariance matrix of the whole series.
pub fn pca_reduce(series: &MatrixSeries, p: usize) -> Result<PcaReduction> {
    let dim = series.dim();
    if p < 1 || p > dim {
        return Err(Error::InvalidInput(format!("target dimension p = {p} out of range 1..={dim}")));
    }
    if series.is_empty() {
        return Err(Error::InvalidInput("cannot reduce an empty series".into()));
    }

    let mut mean = DMatrix::zeros(dim, dim);
    for item in series.items() {
        mean += item.matrix.entries();
    }
    mean /= series.len() as f64;
    let mut mean_eigs: Vec<f64> = mean.symmetric_eigen().eigenvalues.iter().copied().collect();
    mean_eigs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let total: f64 = mean_eigs.iter().sum();
    let mut explained = Vec::with_capacity(dim);
    let mut acc = 0.0;
    for &e in &mean_eigs {
        acc += e;
        explained.push(if total > 0.0 { acc / total } else { 0.0 });
    }

    let items = series
        .items()
        .iter()
        .map(|item| {
            let top = &item.matrix.eigenvalues()[..p];
            let diag = DMatrix::from_fn(p, p, |i, j| if i == j { top[i] } else { 0.0 });
            Ok(MatrixSeriesItem {
                label: item.label.clone(),
                start: item.start,
                end: item.end,
                matrix: SpdMatrix::new(diag)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(PcaReduction {
        series: MatrixSeries::new(p, items)?,
        explained_variance: explained,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn loads_a_three_row_csv() {
        let f = write_csv("timestamp,close\n1672531200,100.0\n1672534800,101.5\n1672538400,99.8\n");
        let series = load_prices(f.path()).unwrap();
        assert_eq!(series.len(), 3);
        assert_eq!(series.rows[0].timestamp, 1672531200);
        assert_relative_eq!(series.rows[1].close, 101.5);
    }

    #[test]
    fn column_order_does_not_matter() {
        let a = write_csv("timestamp,open,close\n100,1.0,2.0\n200,1.0,2.5\n");
        let b = write_csv("close,open,timestamp\n2.0,1.0,100\n2.5,1.0,200\n");
        let sa = load_prices(a.path()).unwrap();
        let sb = load_prices(b.path()).unwrap();
        assert_eq!(sa.rows, sb.rows);
    }

    #[test]
    fn iso_timestamps_accepted() {
        let f = write_csv("timestamp,close\n2023-01-01T00:00:00Z,10.0\n2023-01-01T01:00:00Z,11.0\n");
        let series = load_prices(f.path()).unwrap();
        assert_eq!(series.rows[0].timestamp, 1672531200);
        assert_eq!(series.rows[1].timestamp - series.rows[0].timestamp, 3600);
    }

    #[test]
    fn duplicate_timestamp_names_the_row() {
        let f = write_csv("timestamp,close\n100,1.0\n100,1.1\n200,1.2\n");
        let err = load_prices(f.path()).unwrap_err().to_string();
        assert!(err.contains("row 2"), "{err}");
    }

    #[test]
    fn non_positive_close_names_rows() {
        let f = write_csv("timestamp,close\n100,1.0\n200,0.0\n300,-2.0\n");
        let err = load_prices(f.path()).unwrap_err().to_string();
        assert!(err.contains("[2, 3]"), "{err}");
    }

    #[test]
    fn missing_column_is_an_error() {
        let f = write_csv("time,close\n100,1.0\n");
        assert!(load_prices(f.path()).is_err());
    }

    fn series(symbol: &str, points: &[(i64, f64)]) -> PriceSeries {
        PriceSeries::new(
            symbol,
            points
                .iter()
                .map(|&(timestamp, close)| PriceRow { timestamp, close })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn flat_prices_give_zero_return() {
        let panel = log_returns(&[series("a", &[(0, 100.0), (60, 100.0)])]).unwrap();
        assert_eq!(panel.n_times(), 1);
        assert_eq!(panel.values[(0, 0)], 0.0);
    }

    #[test]
    fn e_fold_gives_unit_return() {
        let panel =
            log_returns(&[series("a", &[(0, 100.0), (60, 100.0 * std::f64::consts::E)])]).unwrap();
        assert_relative_eq!(panel.values[(0, 0)], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn missing_hour_dropped_from_intersection() {
        let a = series("a", &[(0, 1.0), (3600, 2.0), (7200, 3.0)]);
        let b = series("b", &[(0, 1.0), (7200, 3.0)]); // hour 3600 missing
        let panel = log_returns(&[a, b]).unwrap();
        assert_eq!(panel.times, vec![7200]);
        assert_eq!(panel.n_times(), 1);
        // symbol a's return spans 0 -> 7200 directly
        assert_relative_eq!(panel.values[(0, 0)], 3.0f64.ln(), max_relative = 1e-12);
    }

    fn synthetic_panel(hours: usize, per_hour: usize) -> ReturnPanel {
        // two symbols, deterministic wiggle
        let mut prices_a = Vec::new();
        let mut prices_b = Vec::new();
        let step = 3600 / per_hour as i64;
        for i in 0..(hours * per_hour) {
            let t = i as i64 * step;
            prices_a.push((t, 100.0 + (i as f64 * 0.7).sin()));
            prices_b.push((t, 50.0 + (i as f64 * 0.3).cos()));
        }
        log_returns(&[series("a", &prices_a), series("b", &prices_b)]).unwrap()
    }

    #[test]
    fn calendar_day_grouping_counts() {
        let panel = synthetic_panel(48, 1); // 48 hourly prices -> 47 returns over 2 days
        let series = windowed_covariance(&panel, Grouping::CalendarDay).unwrap();
        assert_eq!(series.len(), 2);
        assert_eq!(series.dim(), 2);
    }

    #[test]
    fn calendar_hour_grouping_counts() {
        // 2 "days" of minute bars -> 48 hourly groups
        let panel = synthetic_panel(48, 60);
        let series = windowed_covariance(&panel, Grouping::CalendarHour).unwrap();
        assert_eq!(series.len(), 48);
    }

    #[test]
    fn fixed_count_floor_division() {
        let panel = synthetic_panel(13, 1); // 12 returns
        let series = windowed_covariance(&panel, Grouping::FixedCount(5)).unwrap();
        assert_eq!(series.len(), 2); // remainder of 2 dropped
        assert!(series.items()[0].label.starts_with("chunk-"));
    }

    #[test]
    fn covariance_trace_equals_sum_of_variances() {
        let panel = synthetic_panel(24, 4);
        let series = windowed_covariance(&panel, Grouping::CalendarDay).unwrap();
        let item = &series.items()[0];
        // recompute per-coordinate variances over that day directly
        let rows: Vec<usize> = panel
            .times
            .iter()
            .enumerate()
            .filter(|(_, &t)| t.div_euclid(86_400) == item.start.div_euclid(86_400))
            .map(|(i, _)| i)
            .collect();
        let g = rows.len() as f64;
        let mut var_sum = 0.0;
        for c in 0..2 {
            let mean: f64 = rows.iter().map(|&r| panel.values[(r, c)]).sum::<f64>() / g;
            var_sum += rows
                .iter()
                .map(|&r| (panel.values[(r, c)] - mean).powi(2))
                .sum::<f64>()
                / (g - 1.0);
        }
        assert_relative_eq!(item.matrix.trace(), var_sum, max_relative = 1e-12);
    }

    #[test]
    fn constant_returns_give_zero_matrix() {
        let a = series("a", &[(0, 5.0), (60, 5.0), (120, 5.0), (180, 5.0)]);
        let panel = log_returns(&[a]).unwrap();
        let series = windowed_covariance(&panel, Grouping::FixedCount(3)).unwrap();
        assert_eq!(series.len(), 1);
        assert_eq!(series.items()[0].matrix.trace(), 0.0);
    }

    fn toy_series() -> MatrixSeries {
        let items = vec![
            MatrixSeriesItem {
                label: "w0".into(),
                start: 0,
                end: 100,
                matrix: SpdMatrix::from_rows(&[vec![3.0, 0.5], vec![0.5, 1.0]]).unwrap(),
            },
            MatrixSeriesItem {
                label: "w1".into(),
                start: 100,
                end: 200,
                matrix: SpdMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 0.5]]).unwrap(),
            },
            MatrixSeriesItem {
                label: "w2".into(),
                start: 200,
                end: 300,
                matrix: SpdMatrix::from_rows(&[vec![1.0, 0.2], vec![0.2, 0.9]]).unwrap(),
            },
        ];
        MatrixSeries::new(2, items).unwrap()
    }

    #[test]
    fn save_load_round_trip() {
        let series = toy_series();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("series.json");
        save_matrix_series(&series, &path).unwrap();
        let loaded = load_matrix_series(&path).unwrap();
        assert_eq!(loaded.dim(), series.dim());
        assert_eq!(loaded.len(), series.len());
        for (a, b) in loaded.items().iter().zip(series.items()) {
            assert_eq!(a.label, b.label);
            assert_eq!(a.start, b.start);
            assert_eq!(a.matrix.entries(), b.matrix.entries());
        }
    }

    #[test]
    fn empty_series_round_trips() {
        let series = MatrixSeries::new(3, vec![]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.json");
        save_matrix_series(&series, &path).unwrap();
        let loaded = load_matrix_series(&path).unwrap();
        assert_eq!(loaded.dim(), 3);
        assert!(loaded.is_empty());
    }

    #[test]
    fn dim_mismatch_error_names_the_item() {
        let raw = r#"{"dim":2,"items":[
            {"label":"ok","start":0,"end":1,"data":[[1.0,0.0],[0.0,1.0]]},
            {"label":"bad","start":1,"end":2,"data":[[1.0]]}
        ]}"#;
        let err = serde_json::from_str::<MatrixSeries>(raw).unwrap_err().to_string();
        assert!(err.contains("/items/1/data"), "{err}");
    }

    #[test]
    fn pca_reduction_values() {
        let series = toy_series();
        let reduced = pca_reduce(&series, 1).unwrap();
        assert_eq!(reduced.series.dim(), 1);
        for (orig, red) in series.items().iter().zip(reduced.series.items()) {
            assert_relative_eq!(
                red.matrix.entries()[(0, 0)],
                orig.matrix.eigenvalues()[0],
                max_relative = 1e-12
            );
        }
        // p = dim keeps the trace
        let full = pca_reduce(&series, 2).unwrap();
        for (orig, red) in series.items().iter().zip(full.series.items()) {
            assert_relative_eq!(red.matrix.trace(), orig.matrix.trace(), max_relative = 1e-10);
        }
        // cumulative shares end at 1
        assert_relative_eq!(*full.explained_variance.last().unwrap(), 1.0, max_relative = 1e-12);
        assert!(full.explained_variance[0] <= 1.0 && full.explained_variance[0] > 0.0);
    }

    #[test]
    fn pca_on_diagonal_matrix() {
        let items = vec![MatrixSeriesItem {
            label: "d".into(),
            start: 0,
            end: 1,
            matrix: SpdMatrix::from_rows(&[vec![3.0, 0.0], vec![0.0, 1.0]]).unwrap(),
        }];
        let series = MatrixSeries::new(2, items).unwrap();
        let reduced = pca_reduce(&series, 1).unwrap();
        assert_eq!(reduced.series.items()[0].matrix.entries()[(0, 0)], 3.0);
        assert!(pca_reduce(&series, 3).is_err());
        assert!(pca_reduce(&series, 0).is_err());

        // idempotent at full dimension on already-diagonal input
        let full = pca_reduce(&series, 2).unwrap();
        let again = pca_reduce(&full.series, 2).unwrap();
        for (a, b) in full.series.items().iter().zip(again.series.items()) {
            assert_eq!(a.matrix.entries(), b.matrix.entries());
        }
        assert_eq!(
            full.series.items()[0].matrix.entries(),
            series.items()[0].matrix.entries()
        );
    }
}
