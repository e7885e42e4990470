//! Delimited table loading, column kind inference and supervised target
//! preparation.
//!
//! A [`Table`] is a column-major collection of raw string cells. Nothing is
//! parsed at load time; the encoders decide how to read each column from the
//! [`ColumnKind`] assigned by [`infer_column_kinds`].

use std::collections::HashSet;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of non-empty cells that must parse for a column to be typed
/// numeric or datetime.
pub const PARSE_RATE_THRESHOLD: f64 = 0.99;
/// Columns with at most this many distinct values are one-hot encoded.
pub const LOW_CARDINALITY_MAX: usize = 10;
/// Columns with more distinct values than this are treated as text.
pub const MID_CARDINALITY_MAX: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    name: String,
    headers: Vec<String>,
    columns: Vec<Vec<String>>,
    n_rows: usize,
}

impl Table {
    pub fn new(name: impl Into<String>, headers: Vec<String>, columns: Vec<Vec<String>>) -> Result<Self> {
        if headers.len() != columns.len() {
            return Err(Error::invalid(format!(
                "{} headers for {} columns",
                headers.len(),
                columns.len()
            )));
        }
        let mut seen = HashSet::new();
        for h in &headers {
            if !seen.insert(h.as_str()) {
                return Err(Error::DuplicateHeader(h.clone()));
            }
        }
        let n_rows = columns.first().map_or(0, Vec::len);
        if n_rows == 0 {
            return Err(Error::invalid("table has no rows"));
        }
        if let Some(bad) = columns.iter().find(|c| c.len() != n_rows) {
            return Err(Error::RaggedRow {
                record: 0,
                expected: n_rows,
                found: bad.len(),
            });
        }
        Ok(Table {
            name: name.into(),
            headers,
            columns,
            n_rows,
        })
    }

    /// Builds a table from row-major records.
    pub fn from_rows(name: impl Into<String>, headers: Vec<String>, rows: Vec<Vec<String>>) -> Result<Self> {
        let width = headers.len();
        let mut columns = vec![Vec::with_capacity(rows.len()); width];
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != width {
                return Err(Error::RaggedRow {
                    record: i + 1,
                    expected: width,
                    found: row.len(),
                });
            }
            for (col, cell) in columns.iter_mut().zip(row) {
                col.push(cell);
            }
        }
        Table::new(name, headers, columns)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn headers(&self) -> &[String] {
        &self.headers
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.headers.len()
    }

    pub fn column_index(&self, header: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == header)
    }

    pub fn column(&self, header: &str) -> Option<&[String]> {
        self.column_index(header).map(|i| self.columns[i].as_slice())
    }

    pub fn require_column(&self, header: &str) -> Result<&[String]> {
        self.column(header)
            .ok_or_else(|| Error::MissingColumn(header.to_string()))
    }

    pub fn columns(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.headers
            .iter()
            .map(String::as_str)
            .zip(self.columns.iter().map(Vec::as_slice))
    }

    pub fn row(&self, i: usize) -> Vec<&str> {
        self.columns.iter().map(|c| c[i].as_str()).collect()
    }

    /// Returns a new table holding the given rows, in the given order.
    ///
    /// Panics if `rows` is empty or holds an out-of-range index.
    pub fn take_rows(&self, rows: &[usize]) -> Table {
        assert!(!rows.is_empty(), "take_rows on an empty selection");
        let columns = self
            .columns
            .iter()
            .map(|c| rows.iter().map(|&r| c[r].clone()).collect())
            .collect();
        Table {
            name: self.name.clone(),
            headers: self.headers.clone(),
            columns,
            n_rows: rows.len(),
        }
    }

    pub fn drop_column(&self, header: &str) -> Result<Table> {
        let idx = self
            .column_index(header)
            .ok_or_else(|| Error::MissingColumn(header.to_string()))?;
        let mut headers = self.headers.clone();
        let mut columns = self.columns.clone();
        headers.remove(idx);
        columns.remove(idx);
        Ok(Table {
            name: self.name.clone(),
            headers,
            columns,
            n_rows: self.n_rows,
        })
    }

    pub fn select_columns<S: AsRef<str>>(&self, headers: &[S]) -> Result<Table> {
        let mut out_headers = Vec::with_capacity(headers.len());
        let mut columns = Vec::with_capacity(headers.len());
        for h in headers {
            let h = h.as_ref();
            columns.push(self.require_column(h)?.to_vec());
            out_headers.push(h.to_string());
        }
        Ok(Table {
            name: self.name.clone(),
            headers: out_headers,
            columns,
            n_rows: self.n_rows,
        })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, delimiter: u8) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(file, delimiter)
    }

    pub fn write_to<W: Write>(&self, out: W, delimiter: u8) -> Result<()> {
        let mut writer = csv::WriterBuilder::new().delimiter(delimiter).from_writer(out);
        writer.write_record(&self.headers)?;
        for i in 0..self.n_rows {
            writer.write_record(self.columns.iter().map(|c| c[i].as_str()))?;
        }
        writer.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Loads a delimited UTF-8 file.
///
/// Quoting follows RFC 4180. Rows whose width differs from the first row are
/// rejected; empty cells are kept as empty strings. Without a header row the
/// columns are named `col0`, `col1`, ...
pub fn load_csv(path: impl AsRef<Path>, delimiter: u8, has_header: bool) -> Result<Table> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_csv(file, &name, delimiter, has_header)
}

pub fn read_csv<R: std::io::Read>(input: R, name: &str, delimiter: u8, has_header: bool) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = reader.records();
    let mut headers: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    let mut width = None;
    for (i, rec) in records.by_ref().enumerate() {
        let rec = rec?;
        let expected = *width.get_or_insert(rec.len());
        if rec.len() != expected {
            return Err(Error::RaggedRow {
                record: i + 1,
                expected,
                found: rec.len(),
            });
        }
        let fields: Vec<String> = rec.iter().map(str::to_string).collect();
        if has_header && headers.is_none() {
            headers = Some(fields);
        } else {
            rows.push(fields);
        }
    }
    let width = width.ok_or_else(|| Error::invalid("empty input"))?;
    let headers = headers.unwrap_or_else(|| (0..width).map(|i| format!("col{i}")).collect());
    Table::from_rows(name, headers, rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ColumnKind {
    Numeric,
    Datetime,
    LowCardCategorical,
    MidCardCategorical,
    Text,
}

impl ColumnKind {
    pub fn is_string(self) -> bool {
        matches!(
            self,
            ColumnKind::LowCardCategorical | ColumnKind::MidCardCategorical | ColumnKind::Text
        )
    }
}

pub fn parse_number(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

const DATETIME_FORMATS: &[&str] = &[
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%d %H:%M:%S%.f",
    "%Y-%m-%dT%H:%M:%S%.f",
    "%Y-%m-%d %H:%M",
    "%Y-%m-%dT%H:%M",
    "%Y/%m/%d %H:%M:%S",
];
const DATE_FORMATS: &[&str] = &["%Y-%m-%d", "%Y/%m/%d"];

/// Parses ISO-like dates and timestamps. Date-only cells get midnight;
/// RFC 3339 offsets are dropped after conversion to the local wall time
/// they carry.
pub fn parse_datetime(cell: &str) -> Option<NaiveDateTime> {
    let s = cell.trim();
    if s.is_empty() {
        return None;
    }
    if let Ok(dt) = chrono::DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_local());
    }
    for fmt in DATETIME_FORMATS {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt);
        }
    }
    for fmt in DATE_FORMATS {
        if let Ok(d) = NaiveDate::parse_from_str(s, fmt) {
            return d.and_hms_opt(0, 0, 0);
        }
    }
    None
}

/// Kind of a single column. Empty cells count as missing and are ignored by
/// the parse-rate test and the distinct count.
pub fn infer_kind(values: &[String]) -> ColumnKind {
    let non_empty: Vec<&str> = values
        .iter()
        .map(|v| v.trim())
        .filter(|v| !v.is_empty())
        .collect();
    if non_empty.is_empty() {
        return ColumnKind::LowCardCategorical;
    }
    let needed = PARSE_RATE_THRESHOLD * non_empty.len() as f64;
    let numeric = non_empty.iter().filter(|v| parse_number(v).is_some()).count();
    if numeric as f64 >= needed {
        return ColumnKind::Numeric;
    }
    let dates = non_empty.iter().filter(|v| parse_datetime(v).is_some()).count();
    if dates as f64 >= needed {
        return ColumnKind::Datetime;
    }
    let distinct: HashSet<&str> = values
        .iter()
        .map(String::as_str)
        .filter(|v| !v.trim().is_empty())
        .collect();
    match distinct.len() {
        d if d <= LOW_CARDINALITY_MAX => ColumnKind::LowCardCategorical,
        d if d <= MID_CARDINALITY_MAX => ColumnKind::MidCardCategorical,
        _ => ColumnKind::Text,
    }
}

pub fn infer_column_kinds(table: &Table) -> Vec<(String, ColumnKind)> {
    table
        .columns()
        .map(|(h, values)| (h.to_string(), infer_kind(values)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct SupervisedDataset {
    pub features: Table,
    pub target: Vec<bool>,
    /// Index of each retained row in the source table.
    pub source_rows: Vec<usize>,
    pub group_keys: Option<Vec<String>>,
}

impl SupervisedDataset {
    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.target.iter().filter(|&&y| y).count();
        (self.target.len() - pos, pos)
    }

    pub fn take_rows(&self, rows: &[usize]) -> SupervisedDataset {
        SupervisedDataset {
            features: self.features.take_rows(rows),
            target: rows.iter().map(|&r| self.target[r]).collect(),
            source_rows: rows.iter().map(|&r| self.source_rows[r]).collect(),
            group_keys: self
                .group_keys
                .as_ref()
                .map(|g| rows.iter().map(|&r| g[r].clone()).collect()),
        }
    }
}

pub fn binarize_and_balance(table: &Table, target_header: &str, seed: u64) -> Result<SupervisedDataset> {
    binarize_and_balance_grouped(table, target_header, None, seed)
}

/// Turns the target column into binary labels and downsamples the majority
/// class until both classes have the same count.
///
/// Numeric targets with more than two distinct values are split at the
/// median (`value > median` is positive, so median rows go to the negative
/// class). Two-valued targets keep their two classes, the larger value (or
/// lexicographically larger string) being positive. Rows with an empty
/// target are dropped. The group column, when given, stays in the features.
pub fn binarize_and_balance_grouped(
    table: &Table,
    target_header: &str,
    group_header: Option<&str>,
    seed: u64,
) -> Result<SupervisedDataset> {
    let raw = table.require_column(target_header)?;
    let groups = group_header.map(|g| table.require_column(g)).transpose()?;
    let kept: Vec<usize> = (0..raw.len()).filter(|&i| !raw[i].trim().is_empty()).collect();
    if kept.is_empty() {
        return Err(Error::invalid(format!("target column {target_header:?} is empty")));
    }
    let labels = binarize(kept.iter().map(|&i| raw[i].trim()).collect())?;

    let (pos, neg): (Vec<usize>, Vec<usize>) = (0..kept.len()).partition(|&i| labels[i]);
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::SingleClass(format!(
            "target {target_header:?} binarizes to a single class"
        )));
    }
    let (minority, majority) = if pos.len() <= neg.len() { (pos, neg) } else { (neg, pos) };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut retained: Vec<usize> = index::sample(&mut rng, majority.len(), minority.len())
        .into_iter()
        .map(|j| majority[j])
        .chain(minority.iter().copied())
        .collect();
    retained.sort_unstable();

    let source_rows: Vec<usize> = retained.iter().map(|&i| kept[i]).collect();
    let features = table.drop_column(target_header)?;
    Ok(SupervisedDataset {
        features: features.take_rows(&source_rows),
        target: retained.iter().map(|&i| labels[i]).collect(),
        group_keys: groups.map(|g| source_rows.iter().map(|&r| g[r].clone()).collect()),
        source_rows,
    })
}

fn binarize(values: Vec<&str>) -> Result<Vec<bool>> {
    let mut distinct: Vec<&str> = values.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::SingleClass("target has a single distinct value".into()));
    }
    let numbers: Option<Vec<f64>> = values.iter().map(|v| parse_number(v)).collect();
    match numbers {
        Some(nums) => {
            let mut sorted = nums.clone();
            sorted.sort_by(f64::total_cmp);
            sorted.dedup();
            if sorted.len() == 2 {
                let hi = sorted[1];
                return Ok(nums.iter().map(|&v| v == hi).collect());
            }
            let m = median(&nums);
            Ok(nums.iter().map(|&v| v > m).collect())
        }
        None if distinct.len() == 2 => Ok(values.iter().map(|&v| v == distinct[1]).collect()),
        None => Err(Error::invalid(format!(
            "non-numeric target with {} classes; only binary targets are supported",
            distinct.len()
        ))),
    }
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(values: &[&str]) -> Vec<String> {
        values.iter().map(|s| s.to_string()).collect()
    }

    fn table(headers: &[&str], columns: Vec<Vec<String>>) -> Table {
        Table::new("t", col(headers), columns).unwrap()
    }

    #[test]
    fn parses_well_formed_csv() {
        let t = read_csv("a,b\n1,x\n2,y\n3,z\n".as_bytes(), "t", b',', true).unwrap();
        assert_eq!(t.n_rows(), 3);
        assert_eq!(t.n_cols(), 2);
        assert_eq!(t.column("b").unwrap(), &col(&["x", "y", "z"])[..]);
    }

    #[test]
    fn rejects_ragged_rows() {
        let err = read_csv("a,b\n1,2\n1,2,3\n".as_bytes(), "t", b',', true).unwrap_err();
        assert!(err.to_string().contains("inconsistent row width"), "{err}");
    }

    #[test]
    fn rejects_duplicate_headers() {
        let err = read_csv("a,a\n1,2\n".as_bytes(), "t", b',', true).unwrap_err();
        assert!(matches!(err, Error::DuplicateHeader(h) if h == "a"));
    }

    #[test]
    fn keeps_empty_cells_and_quoted_delimiters() {
        let t = read_csv("a;b\n\"x;y\";\n".as_bytes(), "t", b';', true).unwrap();
        assert_eq!(t.row(0), vec!["x;y", ""]);
    }

    #[test]
    fn headerless_columns_are_numbered() {
        let t = read_csv("1,2\n3,4\n".as_bytes(), "t", b',', false).unwrap();
        assert_eq!(t.headers(), &col(&["col0", "col1"])[..]);
        assert_eq!(t.n_rows(), 2);
    }

    #[test]
    fn kind_thresholds() {
        let distinct = |d: usize| (0..100).map(|i| format!("v{}", i % d)).collect::<Vec<_>>();
        assert_eq!(infer_kind(&distinct(31)), ColumnKind::Text);
        assert_eq!(infer_kind(&distinct(30)), ColumnKind::MidCardCategorical);
        assert_eq!(infer_kind(&distinct(25)), ColumnKind::MidCardCategorical);
        assert_eq!(infer_kind(&distinct(11)), ColumnKind::MidCardCategorical);
        assert_eq!(infer_kind(&distinct(10)), ColumnKind::LowCardCategorical);
        assert_eq!(infer_kind(&col(&["1.5", "2", "-3e2"])), ColumnKind::Numeric);
        assert_eq!(
            infer_kind(&col(&["2020-03-15", "2021-01-01 10:00:00", ""])),
            ColumnKind::Datetime
        );
    }

    #[test]
    fn numeric_tolerates_one_percent_dirt() {
        let mut v: Vec<String> = (0..199).map(|i| i.to_string()).collect();
        v.push("n/a".into());
        assert_eq!(infer_kind(&v), ColumnKind::Numeric);
        v.push("oops".into());
        v.push("bad".into());
        assert_ne!(infer_kind(&v), ColumnKind::Numeric);
    }

    #[test]
    fn median_split_sends_ties_to_negative() {
        let t = table(&["x", "y"], vec![col(&["a", "b", "c", "d"]), col(&["1", "2", "3", "4"])]);
        let ds = binarize_and_balance(&t, "y", 0).unwrap();
        assert_eq!(ds.target, vec![false, false, true, true]);
        assert_eq!(ds.features.headers(), &col(&["x"])[..]);

        let t = table(&["y"], vec![col(&["1", "2", "3", "2", "5"])]);
        let ds = binarize_and_balance(&t, "y", 0).unwrap();
        assert_eq!(ds.class_counts(), (2, 2));
        assert!(ds.source_rows.contains(&2) && ds.source_rows.contains(&4));
    }

    #[test]
    fn balancing_is_seeded() {
        let y: Vec<String> = (0..100).map(|i| if i < 80 { "no" } else { "yes" }.to_string()).collect();
        let x: Vec<String> = (0..100).map(|i| i.to_string()).collect();
        let t = table(&["x", "y"], vec![x, y]);
        let a = binarize_and_balance(&t, "y", 7).unwrap();
        let b = binarize_and_balance(&t, "y", 7).unwrap();
        assert_eq!(a.class_counts(), (20, 20));
        assert_eq!(a.source_rows, b.source_rows);
        let c = binarize_and_balance(&t, "y", 8).unwrap();
        assert_ne!(a.source_rows, c.source_rows);
    }

    #[test]
    fn single_valued_target_is_an_error() {
        let t = table(&["y"], vec![col(&["3", "3", "3"])]);
        assert!(matches!(binarize_and_balance(&t, "y", 0), Err(Error::SingleClass(_))));
        let t = table(&["y"], vec![col(&["a", "b", "c"])]);
        assert!(binarize_and_balance(&t, "y", 0).is_err());
        assert!(matches!(binarize_and_balance(&t, "z", 0), Err(Error::MissingColumn(_))));
    }

    #[test]
    fn group_keys_follow_retained_rows() {
        let t = table(
            &["g", "y"],
            vec![col(&["a", "a", "b", "b", "c"]), col(&["0", "0", "0", "1", "1"])],
        );
        let ds = binarize_and_balance_grouped(&t, "y", Some("g"), 3).unwrap();
        let groups = ds.group_keys.unwrap();
        for (k, &r) in ds.source_rows.iter().enumerate() {
            assert_eq!(groups[k], t.column("g").unwrap()[r]);
        }
    }
}
