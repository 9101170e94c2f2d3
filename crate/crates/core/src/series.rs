//! Time series, per-subsequence label series, subsequence extraction and
//! z-normalization, plus the CSV formats both are stored in.

use std::path::Path;

use crate::error::{Error, Result};

/// Standard deviations below this are treated as a constant subsequence.
pub const ZNORM_EPS: f64 = 1e-8;

/// The reserved background class.
pub const BACKGROUND: usize = 0;

/// A `d`-dimensional real-valued series of length `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    name: String,
    dims: Vec<Vec<f64>>,
}

impl TimeSeries {
    pub fn new(name: impl Into<String>, dims: Vec<Vec<f64>>) -> Result<Self> {
        let name = name.into();
        let Some(first) = dims.first() else {
            return Err(Error::Shape(format!("series `{name}` has no dimensions")));
        };
        let n = first.len();
        if n == 0 {
            return Err(Error::Shape(format!("series `{name}` is empty")));
        }
        for (d, values) in dims.iter().enumerate() {
            if values.len() != n {
                return Err(Error::Shape(format!(
                    "series `{name}`: dimension {d} has length {} but dimension 0 has {n}",
                    values.len()
                )));
            }
            if let Some(t) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!(
                    "series `{name}`: non-finite value at dimension {d}, step {t}"
                )));
            }
        }
        Ok(Self { name, dims })
    }

    pub fn univariate(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        Self::new(name, vec![values])
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.dims[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn n_dims(&self) -> usize {
        self.dims.len()
    }

    pub fn dim(&self, d: usize) -> &[f64] {
        &self.dims[d]
    }

    pub fn dims(&self) -> &[Vec<f64>] {
        &self.dims
    }

    /// Number of length-`m` subsequences, or an error if `m` is 0 or longer
    /// than the series.
    pub fn n_subsequences(&self, m: usize) -> Result<usize> {
        if m == 0 || m > self.len() {
            return Err(Error::Bounds(format!(
                "subsequence length {m} is invalid for series `{}` of length {}",
                self.name,
                self.len()
            )));
        }
        Ok(self.len() - m + 1)
    }

    /// Copies columns `[start, start + m)` of every dimension, laid out
    /// dimension-major (`d * m` values).
    pub fn extract_subsequence(&self, start: usize, m: usize) -> Result<Vec<f64>> {
        let window = SubseqWindow::new(start, m);
        window.check(self)?;
        let mut out = Vec::with_capacity(self.n_dims() * m);
        for values in &self.dims {
            out.extend_from_slice(&values[start..start + m]);
        }
        Ok(out)
    }

    /// Appends the subsequence at `start` to `out` without bounds checks
    /// beyond slice indexing.
    pub(crate) fn push_subsequence(&self, start: usize, m: usize, out: &mut Vec<f64>) {
        for values in &self.dims {
            out.extend_from_slice(&values[start..start + m]);
        }
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::from_csv_reader(name, path.display().to_string(), file)
    }

    pub fn from_csv_reader<R: std::io::Read>(
        name: impl Into<String>,
        source_name: impl Into<String>,
        reader: R,
    ) -> Result<Self> {
        let source_name = source_name.into();
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::parse(&source_name, "line 1", e.to_string()))?
            .clone();
        for (i, h) in headers.iter().enumerate() {
            if h.trim() != format!("dim{i}") {
                return Err(Error::parse(
                    &source_name,
                    "line 1",
                    format!("expected header column `dim{i}`, found `{h}`"),
                ));
            }
        }
        let d = headers.len();
        if d == 0 {
            return Err(Error::parse(&source_name, "line 1", "empty header"));
        }
        let mut dims = vec![Vec::new(); d];
        for record in rdr.records() {
            let record = record.map_err(|e| csv_error(&source_name, e))?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            for (j, field) in record.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::parse(
                        &source_name,
                        format!("line {line}"),
                        format!("`{field}` is not a number"),
                    )
                })?;
                dims[j].push(v);
            }
        }
        Self::new(name, dims)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut wtr = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        let header: Vec<String> = (0..self.n_dims()).map(|d| format!("dim{d}")).collect();
        wtr.write_record(&header).map_err(|e| csv_io(path, e))?;
        for t in 0..self.len() {
            let row: Vec<String> = self.dims.iter().map(|v| format!("{:?}", v[t])).collect();
            wtr.write_record(&row).map_err(|e| csv_io(path, e))?;
        }
        wtr.flush().map_err(|e| Error::io(path, e))
    }
}

/// A subsequence `[start, start + length)` of some series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubseqWindow {
    pub start: usize,
    pub length: usize,
}

impl SubseqWindow {
    pub fn new(start: usize, length: usize) -> Self {
        Self { start, length }
    }

    pub fn check(&self, series: &TimeSeries) -> Result<()> {
        if self.length == 0 || self.start + self.length > series.len() {
            return Err(Error::Bounds(format!(
                "window [{}, {}) does not fit series `{}` of length {}",
                self.start,
                self.start + self.length,
                series.name(),
                series.len()
            )));
        }
        Ok(())
    }
}

/// Integer class labels, one per subsequence start index. Class 0 is
/// background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSeries {
    labels: Vec<usize>,
    n_classes: usize,
}

impl LabelSeries {
    pub fn new(labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if n_classes == 0 {
            return Err(Error::Config("n_classes must be positive".into()));
        }
        if let Some(i) = labels.iter().position(|&l| l >= n_classes) {
            return Err(Error::Bounds(format!(
                "label {} at position {i} is outside [0, {n_classes})",
                labels[i]
            )));
        }
        Ok(Self { labels, n_classes })
    }

    /// Builds a label series whose class count is one past the largest label
    /// (at least 2, so background plus one foreground class).
    pub fn inferred(labels: Vec<usize>) -> Self {
        let n_classes = labels.iter().copied().max().map_or(2, |m| (m + 1).max(2));
        Self { labels, n_classes }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<usize> {
        self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn get(&self, i: usize) -> Option<usize> {
        self.labels.get(i).copied()
    }

    /// Re-tags the series with a larger class count.
    pub fn with_n_classes(self, n_classes: usize) -> Result<Self> {
        Self::new(self.labels, n_classes)
    }

    /// Checks that this series labels every length-`m` subsequence of `series`.
    pub fn check_matches(&self, series: &TimeSeries, m: usize) -> Result<()> {
        let expected = series.n_subsequences(m)?;
        if self.labels.len() != expected {
            return Err(Error::Consistency(format!(
                "series `{}` has {expected} subsequences of length {m} but {} labels were given",
                series.name(),
                self.labels.len()
            )));
        }
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(path.display().to_string(), file)
    }

    pub fn from_csv_reader<R: std::io::Read>(
        source_name: impl Into<String>,
        reader: R,
    ) -> Result<Self> {
        let source_name = source_name.into();
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::parse(&source_name, "line 1", e.to_string()))?
            .clone();
        let cols: Vec<&str> = headers.iter().map(str::trim).collect();
        if cols != ["start", "label"] {
            return Err(Error::parse(
                &source_name,
                "line 1",
                format!("expected header `start,label`, found `{}`", cols.join(",")),
            ));
        }
        let mut labels = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| csv_error(&source_name, e))?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let loc = || format!("line {line}");
            let start: usize = record[0]
                .trim()
                .parse()
                .map_err(|_| Error::parse(&source_name, loc(), "start is not an index"))?;
            let label: usize = record[1]
                .trim()
                .parse()
                .map_err(|_| Error::parse(&source_name, loc(), "label is not a class id"))?;
            if start != labels.len() {
                return Err(Error::parse(
                    &source_name,
                    loc(),
                    format!("start indices must be contiguous from 0; expected {}", labels.len()),
                ));
            }
            labels.push(label);
        }
        Ok(Self::inferred(labels))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut wtr = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        wtr.write_record(["start", "label"]).map_err(|e| csv_io(path, e))?;
        for (i, l) in self.labels.iter().enumerate() {
            wtr.write_record([i.to_string(), l.to_string()])
                .map_err(|e| csv_io(path, e))?;
        }
        wtr.flush().map_err(|e| Error::io(path, e))
    }
}

fn csv_error(source_name: &str, e: csv::Error) -> Error {
    let location = e
        .position()
        .map(|p| format!("line {}", p.line()))
        .unwrap_or_else(|| "unknown position".into());
    Error::parse(source_name, location, e.to_string())
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

/// Population mean and standard deviation (two-pass).
pub fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Subtracts the mean and divides by the population standard deviation.
/// Subsequences with std below [`ZNORM_EPS`] normalize to all zeros.
pub fn z_normalize(x: &[f64]) -> Vec<f64> {
    let (mean, std) = mean_std(x);
    if std < ZNORM_EPS {
        return vec![0.0; x.len()];
    }
    x.iter().map(|v| (v - mean) / std).collect()
}
