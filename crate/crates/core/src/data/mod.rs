//! Dataset ingestion, z-scoring, chronological splits and windowing.

mod metrics;
mod windows;

pub use metrics::{metrics, ErrorSums, Metrics};
pub use windows::{Part, Windows};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A multivariate series: one timestamp column plus `C` numeric columns,
/// stored row-major as `[n, C]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    pub timestamps: Vec<String>,
    pub columns: Vec<String>,
    data: Vec<f64>,
}

impl SeriesTable {
    pub fn new(timestamps: Vec<String>, columns: Vec<String>, data: Vec<f64>) -> Result<Self> {
        if data.len() != timestamps.len() * columns.len() {
            return Err(Error::contract(format!(
                "{} values for {} rows of {} columns",
                data.len(),
                timestamps.len(),
                columns.len()
            )));
        }
        Ok(Self { timestamps, columns, data })
    }

    pub fn rows(&self) -> usize {
        self.timestamps.len()
    }

    pub fn channels(&self) -> usize {
        self.columns.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.channels();
        &self.data[i * c..(i + 1) * c]
    }

    /// Keeps the first `n` rows.
    pub fn truncate(&mut self, n: usize) {
        let c = self.channels();
        self.timestamps.truncate(n);
        self.data.truncate(n * c);
    }

    /// Writes the table in the format [`load_csv`] reads; values use
    /// round-trip formatting.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let err = |e: csv::Error| Error::Io { path: path.to_path_buf(), source: e.into() };
        let mut w = csv::Writer::from_path(path).map_err(err)?;
        let mut header = vec!["date".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header).map_err(err)?;
        for (i, ts) in self.timestamps.iter().enumerate() {
            let mut rec = vec![ts.clone()];
            rec.extend(self.row(i).iter().map(|v| format!("{v:?}")));
            w.write_record(&rec).map_err(err)?;
        }
        w.flush().map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
    }
}

/// Noiseless hourly test signal: channel `c` at row `t` is
/// `sin(2 pi t / 12 + c) + 0.02 t (1 + c)`. Timestamps follow a 360-day
/// calendar so they sort in row order.
pub fn sine_trend(rows: usize, channels: usize) -> SeriesTable {
    let data = (0..rows * channels)
        .map(|i| {
            let (t, c) = ((i / channels) as f64, (i % channels) as f64);
            (2.0 * std::f64::consts::PI * t / 12.0 + c).sin() + 0.02 * t * (1.0 + c)
        })
        .collect();
    let timestamps = (0..rows)
        .map(|t| format!("{:04}-{:02}-{:02} {:02}:00:00", 2000 + t / 8640, 1 + t / 720 % 12, 1 + t / 24 % 30, t % 24))
        .collect();
    let columns = (0..channels).map(|c| format!("x{c}")).collect();
    SeriesTable::new(timestamps, columns, data).expect("consistent sizes")
}

/// Reads a headered CSV whose first column is a timestamp and whose other
/// columns are numeric. Rows in errors are 1-based data rows (the header is
/// row 0).
pub fn load_csv(path: impl AsRef<Path>) -> Result<SeriesTable> {
    let path = path.as_ref();
    let io = |e: std::io::Error| Error::Io { path: path.to_path_buf(), source: e };
    let file = std::fs::File::open(path).map_err(io)?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let parse =
        |row: usize, column: String, message: String| Error::Parse { path: path.to_path_buf(), row, column, message };
    let header = reader.headers().map_err(|e| parse(0, String::new(), e.to_string()))?.clone();
    if header.len() < 2 {
        return Err(parse(0, String::new(), "need a timestamp column and at least one value column".into()));
    }
    let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut timestamps = Vec::new();
    let mut data = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| parse(row, String::new(), e.to_string()))?;
        if record.len() != header.len() {
            return Err(parse(row, String::new(), format!("expected {} fields, found {}", header.len(), record.len())));
        }
        let ts = record[0].trim().to_string();
        if let Some(prev) = timestamps.last() {
            if ts < *prev {
                return Err(parse(row, header[0].to_string(), format!("timestamp {ts} precedes {prev}")));
            }
        }
        timestamps.push(ts);
        for (name, cell) in columns.iter().zip(record.iter().skip(1)) {
            let cell = cell.trim();
            if cell.is_empty() {
                return Err(parse(row, name.clone(), "missing value".into()));
            }
            let v: f64 = cell.parse().map_err(|_| parse(row, name.clone(), format!("not a number: {cell:?}")))?;
            if !v.is_finite() {
                return Err(parse(row, name.clone(), format!("non-finite value {cell}")));
            }
            data.push(v);
        }
    }
    SeriesTable::new(timestamps, columns, data)
}

/// Chronological row ranges `[0, train)`, `[train, train + val)`,
/// `[train + val, train + val + test)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum SplitSpec {
    /// Hourly ETT convention: 12/4/4 months of hourly rows.
    EttHour,
    /// 15-minute ETT convention: 12/4/4 months of quarter-hour rows.
    EttMinute,
    Rows {
        train: usize,
        val: usize,
        test: usize,
    },
    /// Fractions of the table for train and test; validation takes the rest.
    Ratios {
        train: f64,
        test: f64,
    },
}

impl SplitSpec {
    /// `(train, val, test)` row counts for a table of `n` rows.
    pub fn counts(&self, n: usize) -> Result<(usize, usize, usize)> {
        let (tr, va, te) = match *self {
            SplitSpec::EttHour => (12 * 30 * 24, 4 * 30 * 24, 4 * 30 * 24),
            SplitSpec::EttMinute => (12 * 30 * 24 * 4, 4 * 30 * 24 * 4, 4 * 30 * 24 * 4),
            SplitSpec::Rows { train, val, test } => (train, val, test),
            SplitSpec::Ratios { train, test } => {
                if !(train > 0.0 && test > 0.0 && train + test < 1.0) {
                    return Err(Error::config(format!(
                        "split ratios train={train} test={test} must be positive and sum below 1"
                    )));
                }
                let tr = (n as f64 * train) as usize;
                let te = (n as f64 * test) as usize;
                (tr, n - tr - te, te)
            }
        };
        if tr + va + te > n {
            return Err(Error::config(format!("split needs {} rows, table has {n}", tr + va + te)));
        }
        if tr == 0 {
            return Err(Error::config("empty training split"));
        }
        Ok((tr, va, te))
    }
}

/// Per-column z-score statistics fitted on training rows only.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population (divide-by-n) standard deviation.
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(table: &SeriesTable, train_rows: usize) -> Result<Self> {
        if train_rows == 0 || train_rows > table.rows() {
            return Err(Error::config(format!("cannot fit statistics on {train_rows} of {} rows", table.rows())));
        }
        let c = table.channels();
        let n = train_rows as f64;
        let mut mean = vec![0.0; c];
        for i in 0..train_rows {
            for (m, v) in mean.iter_mut().zip(table.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; c];
        for i in 0..train_rows {
            for ((s, v), m) in var.iter_mut().zip(table.row(i)).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        let std: Vec<f64> = var.iter().map(|s| (s / n).sqrt()).collect();
        for (name, (&s, &m)) in table.columns.iter().zip(std.iter().zip(&mean)) {
            if s <= 1e-12 * m.abs().max(1.0) {
                return Err(Error::ZeroVariance(name.clone()));
            }
        }
        Ok(Self { mean, std })
    }

    pub fn transform(&self, table: &SeriesTable) -> SeriesTable {
        self.apply(table, |v, m, s| (v - m) / s)
    }

    pub fn inverse(&self, table: &SeriesTable) -> SeriesTable {
        self.apply(table, |v, m, s| v * s + m)
    }

    /// Maps a channel-major `[.., C, T]` buffer back to raw units in place.
    pub fn inverse_channel_major(&self, data: &mut [f64], len: usize) {
        let c = self.mean.len();
        for (r, row) in data.chunks_exact_mut(len).enumerate() {
            let ch = r % c;
            row.iter_mut().for_each(|v| *v = *v * self.std[ch] + self.mean[ch]);
        }
    }

    /// Standardizes a channel-major `[.., C, L]` buffer in place.
    pub fn transform_channel_major(&self, data: &mut [f64], len: usize) {
        let c = self.mean.len();
        for (r, row) in data.chunks_exact_mut(len).enumerate() {
            let ch = r % c;
            row.iter_mut().for_each(|v| *v = (*v - self.mean[ch]) / self.std[ch]);
        }
    }

    fn apply(&self, table: &SeriesTable, f: impl Fn(f64, f64, f64) -> f64) -> SeriesTable {
        let c = table.channels();
        let data = table.data().iter().enumerate().map(|(i, &v)| f(v, self.mean[i % c], self.std[i % c])).collect();
        SeriesTable { timestamps: table.timestamps.clone(), columns: table.columns.clone(), data }
    }
}

/// Standardized train/val/test windows of one dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub path: PathBuf,
    pub table: SeriesTable,
    pub stats: Standardizer,
    pub train: Windows,
    pub val: Windows,
    pub test: Windows,
}

impl Dataset {
    /// Loads, z-scores with train statistics, and windows all three parts.
    /// With `back_reach`, validation and test inputs may start inside the
    /// preceding part; targets never leave their part.
    pub fn load(
        path: impl AsRef<Path>,
        split: &SplitSpec,
        seq_len: usize,
        pred_len: usize,
        back_reach: bool,
    ) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let raw = load_csv(&path)?;
        Self::from_table(path, raw, split, seq_len, pred_len, back_reach)
    }

    pub fn from_table(
        path: PathBuf,
        raw: SeriesTable,
        split: &SplitSpec,
        seq_len: usize,
        pred_len: usize,
        back_reach: bool,
    ) -> Result<Self> {
        let (tr, va, te) = split.counts(raw.rows())?;
        let stats = Standardizer::fit(&raw, tr)?;
        let table = stats.transform(&raw);
        let make = |part, start, end| Windows::new(&table, part, start, end, seq_len, pred_len, back_reach);
        let train = make(Part::Train, 0, tr)?;
        let val = make(Part::Val, tr, tr + va)?;
        let test = make(Part::Test, tr + va, tr + va + te)?;
        Ok(Self { path, table, stats, train, val, test })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn two_rows_round_trip_exactly() {
        let f = write("date,a,b\n2020-01-01 00:00:00,1.5,-2.25\n2020-01-01 01:00:00,0.1,3e-3\n");
        let t = load_csv(f.path()).unwrap();
        assert_eq!(t.columns, ["a", "b"]);
        assert_eq!(t.rows(), 2);
        assert_eq!(t.data(), [1.5, -2.25, 0.1, 3e-3]);
    }

    #[test]
    fn bad_cell_names_row_and_column() {
        let mut s = String::from("date,a,b\n");
        for i in 0..6 {
            let b = if i == 4 { "oops".to_string() } else { i.to_string() };
            s += &format!("t{i},{i},{b}\n");
        }
        match load_csv(write(&s).path()).unwrap_err() {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 5);
                assert_eq!(column, "b");
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn missing_value_is_rejected() {
        let f = write("date,a\nt0,1\nt1,\n");
        assert!(matches!(load_csv(f.path()), Err(Error::Parse { row: 2, .. })));
    }

    #[test]
    fn missing_file_is_io_error_with_path() {
        let e = load_csv("/nonexistent/x.csv").unwrap_err();
        assert!(e.to_string().contains("/nonexistent/x.csv"), "{e}");
    }

    #[test]
    fn decreasing_timestamps_are_rejected() {
        let f = write("date,a\n2020-01-02,1\n2020-01-01,2\n");
        assert!(matches!(load_csv(f.path()), Err(Error::Parse { row: 2, .. })));
    }

    fn table(cols: &[&[f64]]) -> SeriesTable {
        let n = cols[0].len();
        let mut data = Vec::new();
        for i in 0..n {
            for c in cols {
                data.push(c[i]);
            }
        }
        SeriesTable::new(
            (0..n).map(|i| format!("t{i:04}")).collect(),
            (0..cols.len()).map(|i| format!("c{i}")).collect(),
            data,
        )
        .unwrap()
    }

    #[test]
    fn population_std_zscore() {
        let t = table(&[&[0.0, 2.0, 100.0]]);
        let s = Standardizer::fit(&t, 2).unwrap();
        assert_eq!((s.mean[0], s.std[0]), (1.0, 1.0));
        assert_eq!(s.transform(&t).data()[..2], [-1.0, 1.0]);
    }

    #[test]
    fn constant_train_column_names_column() {
        let t = table(&[&[1.0, 2.0, 3.0], &[5.0, 5.0, 9.0]]);
        match Standardizer::fit(&t, 2) {
            Err(Error::ZeroVariance(name)) => assert_eq!(name, "c1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn stats_ignore_non_train_rows() {
        let a = table(&[&[0.0, 1.0, 5.0, 7.0]]);
        let b = table(&[&[0.0, 1.0, -50.0, 1e6]]);
        assert_eq!(Standardizer::fit(&a, 2).unwrap(), Standardizer::fit(&b, 2).unwrap());
    }

    #[test]
    fn inverse_restores_raw_values() {
        let t = table(&[&[3.0, -1.0, 2.5, 8.0], &[0.1, 0.2, 0.4, 0.8]]);
        let s = Standardizer::fit(&t, 3).unwrap();
        let back = s.inverse(&s.transform(&t));
        for (a, b) in back.data().iter().zip(t.data()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn ett_hour_split_counts() {
        assert_eq!(SplitSpec::EttHour.counts(17420).unwrap(), (8640, 2880, 2880));
        assert!(SplitSpec::EttHour.counts(1000).is_err());
        assert_eq!(SplitSpec::Ratios { train: 0.7, test: 0.2 }.counts(100).unwrap(), (70, 10, 20));
    }
}
