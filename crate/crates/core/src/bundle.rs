//! CSV input and the on-disk output bundle.
//!
//! A bundle is a directory holding `samples.csv`, `curve.csv`,
//! `summary.json` and `diagnostics.csv`. It is assembled in a sibling
//! temporary directory and renamed into place, so readers never observe a
//! partial bundle.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use crate::basis::KnotState;
use crate::chain::{Chain, Sample, TracePoint};
use crate::data::Dataset;
use crate::error::{Error, Result};

pub const SAMPLES_FILE: &str = "samples.csv";
pub const CURVE_FILE: &str = "curve.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";

/// Formats `v` with at most 12 significant digits.
pub fn fmt_num(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if v == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{v:.11e}").parse().expect("formatted float parses");
    let a = rounded.abs();
    if (1e-5..1e15).contains(&a) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

fn parse_num(s: &str, what: &str) -> Result<f64> {
    match s.trim() {
        "nan" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        t => t
            .parse()
            .map_err(|_| Error::validation(format!("{what}: cannot parse '{s}' as a number"))),
    }
}

fn join_nums(v: &[f64]) -> String {
    v.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(",")
}

fn split_nums(s: &str, what: &str) -> Result<Vec<f64>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|t| parse_num(t, what)).collect()
}

/// Reads two named numeric columns from a headed CSV stream.
pub fn read_xy_from<R: Read>(reader: R, x_col: &str, y_col: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::validation(format!("column '{name}' not found")))
    };
    let (ix, iy) = (find(x_col)?, find(y_col)?);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        let get = |i: usize, name: &str| -> Result<f64> {
            let field = rec
                .get(i)
                .ok_or_else(|| Error::validation(format!("line {line}: missing '{name}' value")))?;
            field.parse::<f64>().map_err(|_| {
                Error::validation(format!(
                    "line {line}: '{name}' value '{field}' is not a number"
                ))
            })
        };
        x.push(get(ix, x_col)?);
        y.push(get(iy, y_col)?);
    }
    if x.is_empty() {
        return Err(Error::validation("input has no data rows"));
    }
    Dataset::new(x, y)
}

pub fn read_xy(path: &Path, x_col: &str, y_col: &str) -> Result<Dataset> {
    let file = fs::File::open(path)
        .map_err(|e| Error::validation(format!("cannot open {}: {e}", path.display())))?;
    read_xy_from(file, x_col, y_col)
}

/// Writes `data` as a two-column CSV.
pub fn write_xy(path: &Path, data: &Dataset, x_col: &str, y_col: &str) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([x_col, y_col])?;
    for (x, y) in data.x().iter().zip(data.y()) {
        w.write_record([fmt_num(*x), fmt_num(*y)])?;
    }
    w.flush()?;
    Ok(())
}

/// Named numeric columns of equal length.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: &str, values: Vec<f64>) -> &mut Self {
        if let Some(first) = self.columns.first() {
            assert_eq!(
                first.len(),
                values.len(),
                "column '{name}' has the wrong length"
            );
        }
        self.headers.push(name.to_string());
        self.columns.push(values);
        self
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.headers
            .iter()
            .position(|h| h == name)
            .map(|i| self.columns[i].as_slice())
    }

    fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.headers)?;
        for r in 0..self.rows() {
            w.write_record(self.columns.iter().map(|c| fmt_num(c[r])))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut columns = vec![Vec::new(); headers.len()];
        for rec in rdr.records() {
            let rec = rec?;
            for (c, field) in columns.iter_mut().zip(rec.iter()) {
                c.push(parse_num(field, "table")?);
            }
        }
        Ok(Self { headers, columns })
    }
}

/// Everything written to a bundle directory.
#[derive(Debug, Clone)]
pub struct Bundle<'c> {
    pub chain: &'c Chain,
    pub curve: Table,
    pub summary: serde_json::Value,
}

fn write_samples(path: &Path, samples: &[Sample]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iteration", "log_post", "size", "z", "gamma", "beta"])?;
    for s in samples {
        w.write_record([
            s.iteration.to_string(),
            fmt_num(s.log_post),
            s.state.size().to_string(),
            s.state.z_string(),
            join_nums(&s.state.gamma),
            s.beta.as_deref().map(join_nums).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_trace(path: &Path, trace: &[TracePoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iteration", "log_post", "size"])?;
    for t in trace {
        w.write_record([
            t.iteration.to_string(),
            fmt_num(t.log_post),
            t.size.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `samples.csv` back into samples.
pub fn read_samples(path: &Path) -> Result<Vec<Sample>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let iteration = field(0)
            .parse()
            .map_err(|_| Error::validation(format!("samples: bad iteration '{}'", field(0))))?;
        let log_post = parse_num(field(1), "samples log_post")?;
        let z: Vec<bool> = field(3).chars().map(|c| c == '1').collect();
        let gamma = split_nums(field(4), "samples gamma")?;
        let beta = split_nums(field(5), "samples beta")?;
        out.push(Sample {
            iteration,
            state: KnotState::new(z, gamma)?,
            beta: if beta.is_empty() { None } else { Some(beta) },
            log_post,
        });
    }
    Ok(out)
}

fn staging_dir(target: &Path) -> PathBuf {
    let name = target
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "bundle".into());
    let parent = target
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    parent.join(format!(".{name}.partial-{}", std::process::id()))
}

/// Writes the bundle to `dir`, replacing any previous bundle there.
pub fn write_bundle(dir: &Path, bundle: &Bundle) -> Result<()> {
    let staging = staging_dir(dir);
    if staging.exists() {
        fs::remove_dir_all(&staging)?;
    }
    if let Some(parent) = staging.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::create_dir(&staging)?;
    let result = (|| -> Result<()> {
        write_samples(&staging.join(SAMPLES_FILE), &bundle.chain.samples)?;
        bundle.curve.write(&staging.join(CURVE_FILE))?;
        fs::write(
            staging.join(SUMMARY_FILE),
            serde_json::to_string_pretty(&bundle.summary)? + "\n",
        )?;
        write_trace(&staging.join(DIAGNOSTICS_FILE), &bundle.chain.trace)?;
        Ok(())
    })();
    if let Err(e) = result {
        let _ = fs::remove_dir_all(&staging);
        return Err(e);
    }
    if dir.exists() {
        let old = staging.with_extension("old");
        fs::rename(dir, &old)?;
        fs::rename(&staging, dir)?;
        fs::remove_dir_all(&old)?;
    } else {
        fs::rename(&staging, dir)?;
    }
    Ok(())
}
