//! CSV and key-value file formats used by the command line tools.
//!
//! Floats are written with Rust's shortest round-trip formatting, which is
//! locale independent.

use std::fs;
use std::path::{Path, PathBuf};

use crate::cv::Task;
use crate::error::{Error, Result};
use crate::scr::ScrParams;
use crate::series::TimeSeries;

/// Contents of a series CSV: `t,value` or `t,input,target`.
#[derive(Debug, Clone, PartialEq)]
pub enum SeriesFile {
    Univariate(TimeSeries),
    Exogenous { inputs: TimeSeries, targets: TimeSeries },
}

impl SeriesFile {
    /// One-step-ahead task for a univariate series, input/target pairs
    /// otherwise.
    pub fn to_task(&self) -> Result<Task> {
        match self {
            SeriesFile::Univariate(s) => Task::from_series(s),
            SeriesFile::Exogenous { inputs, targets } => {
                Task::new(inputs.values().to_vec(), targets.values().to_vec())
            }
        }
    }

    pub fn len(&self) -> usize {
        match self {
            SeriesFile::Univariate(s) => s.len(),
            SeriesFile::Exogenous { targets, .. } => targets.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: {field:?} is not a number")))
}

fn open_csv(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn read_columns(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = open_csv(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.to_ascii_lowercase()).collect();
    let mut cols = vec![Vec::new(); header.len()];
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::Parse(format!(
                "line {}: expected {} fields, got {}",
                i + 2,
                header.len(),
                rec.len()
            )));
        }
        for (c, field) in rec.iter().enumerate() {
            cols[c].push(parse_f64(field, i + 2)?);
        }
    }
    Ok((header, cols))
}

fn infer_dt(t: &[f64]) -> f64 {
    match t {
        [a, b, ..] if b > a => b - a,
        _ => 1.0,
    }
}

pub fn read_series_file(path: &Path) -> Result<SeriesFile> {
    let (header, cols) = read_columns(path)?;
    let meta = path.display().to_string();
    let names: Vec<&str> = header.iter().map(String::as_str).collect();
    match names.as_slice() {
        ["t" | "time", "value"] => {
            let dt = infer_dt(&cols[0]);
            Ok(SeriesFile::Univariate(TimeSeries::with_meta(cols[1].clone(), dt, meta)?))
        }
        ["t" | "time", "input", "target"] => {
            let dt = infer_dt(&cols[0]);
            Ok(SeriesFile::Exogenous {
                inputs: TimeSeries::with_meta(cols[1].clone(), dt, meta.clone())?,
                targets: TimeSeries::with_meta(cols[2].clone(), dt, meta)?,
            })
        }
        _ => Err(Error::Parse(format!(
            "{meta}: expected header t,value or t,input,target, got {}",
            header.join(",")
        ))),
    }
}

/// Reads a `time,value` CSV of irregular observations.
pub fn read_time_value_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let (header, mut cols) = read_columns(path)?;
    if header != ["time", "value"] {
        return Err(Error::Parse(format!(
            "{}: expected header time,value, got {}",
            path.display(),
            header.join(",")
        )));
    }
    let values = cols.pop().expect("two columns");
    let times = cols.pop().expect("two columns");
    Ok((times, values))
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    Ok(())
}

/// Writes rows to a CSV file, creating parent directories.
pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    create_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_series_csv(path: &Path, series: &TimeSeries) -> Result<()> {
    let dt = series.dt();
    write_csv(
        path,
        &["t", "value"],
        series
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| [(i as f64 * dt).to_string(), v.to_string()]),
    )
}

pub fn write_exogenous_csv(path: &Path, inputs: &TimeSeries, targets: &TimeSeries) -> Result<()> {
    if inputs.len() != targets.len() {
        return Err(Error::Shape {
            expected: inputs.len(),
            got: targets.len(),
        });
    }
    let dt = inputs.dt();
    write_csv(
        path,
        &["t", "input", "target"],
        inputs
            .values()
            .iter()
            .zip(targets.values())
            .enumerate()
            .map(|(i, (s, y))| [(i as f64 * dt).to_string(), s.to_string(), y.to_string()]),
    )
}

/// Series paths listed in a manifest CSV with a `path` column. Relative
/// paths are resolved against the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<PathBuf>> {
    let mut reader = open_csv(path)?;
    let col = reader
        .headers()?
        .iter()
        .position(|h| h.eq_ignore_ascii_case("path"))
        .ok_or_else(|| Error::Parse(format!("{}: manifest needs a path column", path.display())))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let p = PathBuf::from(rec.get(col).unwrap_or_default());
        out.push(if p.is_absolute() { p } else { base.join(p) });
    }
    if out.is_empty() {
        return Err(Error::Config(format!("{}: manifest lists no series", path.display())));
    }
    Ok(out)
}

/// `key = value` lines for one or more parameter sets. With `prefix`, keys
/// read `prefix.n_nodes` and so on.
pub fn params_to_kv(params: &ScrParams, prefix: Option<&str>) -> String {
    let key = |k: &str| match prefix {
        Some(p) => format!("{p}.{k}"),
        None => k.to_string(),
    };
    format!(
        "{} = {}\n{} = {}\n{} = {}\n{} = {}\n",
        key("n_nodes"),
        params.n_nodes,
        key("w_in"),
        params.w_in,
        key("w"),
        params.w,
        key("lambda"),
        params.lambda
    )
}

/// Parses a `key = value` file written by [`params_to_kv`] without prefix.
pub fn params_from_kv(text: &str) -> Result<ScrParams> {
    let mut vals = [None; 4];
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", i + 1)))?;
        let slot = match k.trim() {
            "n_nodes" => 0,
            "w_in" => 1,
            "w" => 2,
            "lambda" => 3,
            other => return Err(Error::Parse(format!("unknown key {other:?}"))),
        };
        vals[slot] = Some(parse_f64(v, i + 1)?);
    }
    let [Some(n), Some(wi), Some(w), Some(l)] = vals else {
        return Err(Error::Parse("missing one of n_nodes, w_in, w, lambda".into()));
    };
    if n.fract() != 0.0 || n < 1.0 {
        return Err(Error::Parse(format!("n_nodes must be a positive integer, got {n}")));
    }
    ScrParams::new(n as usize, wi, w, l)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    create_parent(path)?;
    fs::write(path, text)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    Ok(())
}
