//! Tensor files and decomposition JSON.
//!
//! Two input layouts are supported:
//!
//! - **LongCSV**: a single file with header `t,i,j,w`, one edge per row.
//!   Node indices `i, j` are 1-based. Rows may come in any order; missing pairs
//!   are zero; `(i, j)` and `(j, i)` may both appear but must agree within 1e-8.
//!   Slices are ordered by the sorted distinct values of `t`.
//! - **SliceDirCSV**: a directory of headerless dense `p x p` CSV files, one per
//!   slice, ordered by file name.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::decompose::Factor;
use crate::error::{Error, Result};
use crate::tensor::SemiSymTensor;

/// Version of every JSON document written by the CLI.
pub const SCHEMA_VERSION: u32 = 1;

/// Largest disagreement allowed between the two entries of a node pair.
pub const PAIR_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    LongCsv,
    SliceDir,
}

impl InputFormat {
    /// Directories are slice directories, everything else LongCSV.
    pub fn detect(path: &Path) -> Self {
        if path.is_dir() {
            InputFormat::SliceDir
        } else {
            InputFormat::LongCsv
        }
    }
}

impl std::str::FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "long-csv" | "long" => Ok(InputFormat::LongCsv),
            "slice-dir" | "slices" => Ok(InputFormat::SliceDir),
            other => Err(Error::Config(format!("unknown input format '{other}'"))),
        }
    }
}

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Loads a tensor, detecting the format from the path when `format` is `None`.
pub fn load_tensor(path: &Path, format: Option<InputFormat>) -> Result<SemiSymTensor> {
    match format.unwrap_or_else(|| InputFormat::detect(path)) {
        InputFormat::LongCsv => load_long_csv(path, None),
        InputFormat::SliceDir => load_slice_dir(path),
    }
}

/// Reads a LongCSV file. `nodes` fixes `p`; otherwise it is the largest index seen.
pub fn load_long_csv(path: &Path, nodes: Option<usize>) -> Result<SemiSymTensor> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header != ["t", "i", "j", "w"] {
        return Err(parse_err(
            path,
            format!("expected header 't,i,j,w', found '{}'", header.join(",")),
        ));
    }

    let mut entries: BTreeMap<(i64, usize, usize), f64> = BTreeMap::new();
    let mut times = BTreeSet::new();
    let mut p_seen = 0;
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let line = k + 2;
        if record.len() != 4 {
            return Err(parse_err(path, format!("line {line}: expected 4 fields, found {}", record.len())));
        }
        let field = |c: usize| record.get(c).unwrap_or_default();
        let t: i64 = field(0)
            .parse()
            .map_err(|_| parse_err(path, format!("line {line}, column t: '{}' is not an integer", field(0))))?;
        let mut idx = [0usize; 2];
        for (c, name) in [(1, "i"), (2, "j")] {
            let v: usize = field(c).parse().map_err(|_| {
                parse_err(path, format!("line {line}, column {name}: '{}' is not a positive integer", field(c)))
            })?;
            if v == 0 {
                return Err(parse_err(path, format!("line {line}, column {name}: node indices are 1-based")));
            }
            idx[c - 1] = v;
        }
        let w: f64 = field(3)
            .parse()
            .map_err(|_| parse_err(path, format!("line {line}, column w: '{}' is not a number", field(3))))?;
        if !w.is_finite() {
            return Err(parse_err(path, format!("line {line}, column w: non-finite weight")));
        }
        let (i, j) = (idx[0].min(idx[1]), idx[0].max(idx[1]));
        p_seen = p_seen.max(j);
        times.insert(t);
        if let Some(&prev) = entries.get(&(t, i, j)) {
            if (prev - w).abs() > PAIR_TOLERANCE {
                return Err(Error::AsymmetricInput {
                    t: t.to_string(),
                    i,
                    j,
                    a: prev,
                    b: w,
                });
            }
        } else {
            entries.insert((t, i, j), w);
        }
    }
    if times.is_empty() {
        return Err(parse_err(path, "no data rows"));
    }
    let p = match nodes {
        Some(n) if n < p_seen => {
            return Err(Error::InconsistentDimensions(format!(
                "node index {p_seen} exceeds the declared node count {n}"
            )))
        }
        Some(n) => n,
        None => p_seen,
    };
    let order: BTreeMap<i64, usize> = times.iter().enumerate().map(|(k, &t)| (t, k)).collect();
    let mut slices = vec![DMatrix::zeros(p, p); times.len()];
    for ((t, i, j), w) in entries {
        let a = &mut slices[order[&t]];
        a[(i - 1, j - 1)] = w;
        a[(j - 1, i - 1)] = w;
    }
    SemiSymTensor::new_from_slices(slices)
}

/// Reads a directory of dense slice files in file-name order.
pub fn load_slice_dir(dir: &Path) -> Result<SemiSymTensor> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")))
        .collect();
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    if files.is_empty() {
        return Err(parse_err(dir, "no .csv slice files found"));
    }
    let mut slices = Vec::with_capacity(files.len());
    for file in &files {
        let a = read_dense(file)?;
        if let Some(first) = slices.first() {
            let first: &DMatrix<f64> = first;
            if first.nrows() != a.nrows() {
                return Err(Error::InconsistentDimensions(format!(
                    "{} is {}x{} but earlier slices are {}x{}",
                    file.display(),
                    a.nrows(),
                    a.ncols(),
                    first.nrows(),
                    first.ncols()
                )));
            }
        }
        slices.push(a);
    }
    SemiSymTensor::new_from_slices(slices).map_err(|e| match e {
        Error::AsymmetricSlice { slice, deviation, .. } => parse_err(
            &files[slice],
            format!("slice is not symmetric (max |A_ij - A_ji| = {deviation:e})"),
        ),
        other => other,
    })
}

fn read_dense(path: &Path) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .enumerate()
            .map(|(c, s)| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(path, format!("row {}, column {}: '{s}' is not a finite number", r + 1, c + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let p = rows.len();
    if p == 0 {
        return Err(parse_err(path, "empty slice file"));
    }
    if let Some((r, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != p) {
        return Err(Error::InconsistentDimensions(format!(
            "{}: row {} has {} entries, expected {p}",
            path.display(),
            r + 1,
            row.len()
        )));
    }
    Ok(DMatrix::from_fn(p, p, |i, j| rows[i][j]))
}

/// Writes nonzero entries with `i <= j` as LongCSV, `t` running from 1.
pub fn write_long_csv(x: &SemiSymTensor, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "i", "j", "w"])?;
    for (t, a) in x.slices().iter().enumerate() {
        for i in 0..x.p() {
            for j in i..x.p() {
                let v = a[(i, j)];
                if v != 0.0 {
                    w.write_record([(t + 1).to_string(), (i + 1).to_string(), (j + 1).to_string(), v.to_string()])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes one dense CSV per slice, named `slice_0001.csv`, ...
pub fn write_slice_dir(x: &SemiSymTensor, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let width = x.t().to_string().len().max(4);
    for (t, a) in x.slices().iter().enumerate() {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_path(dir.join(format!("slice_{:0width$}.csv", t + 1)))?;
        for i in 0..x.p() {
            w.write_record((0..x.p()).map(|j| a[(i, j)].to_string()))?;
        }
        w.flush()?;
    }
    Ok(())
}

/// A factor as stored in JSON. `V` is row-major `p x r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorJson {
    pub d: f64,
    pub u: Vec<f64>,
    #[serde(rename = "V")]
    pub v: Vec<f64>,
    pub p: usize,
    pub r: usize,
    #[serde(rename = "T")]
    pub t: usize,
}

impl From<&Factor> for FactorJson {
    fn from(f: &Factor) -> Self {
        let (p, r) = f.v.shape();
        let v = (0..p).flat_map(|i| (0..r).map(move |k| (i, k))).map(|(i, k)| f.v[(i, k)]).collect();
        FactorJson {
            d: f.d,
            u: f.u.as_slice().to_vec(),
            v,
            p,
            r,
            t: f.u.len(),
        }
    }
}

impl TryFrom<&FactorJson> for Factor {
    type Error = Error;

    fn try_from(j: &FactorJson) -> Result<Factor> {
        if j.u.len() != j.t || j.v.len() != j.p * j.r {
            return Err(Error::InconsistentDimensions(format!(
                "factor declares p = {}, r = {}, T = {} but has {} loadings and {} basis entries",
                j.p,
                j.r,
                j.t,
                j.u.len(),
                j.v.len()
            )));
        }
        Ok(Factor {
            u: DVector::from_column_slice(&j.u),
            v: DMatrix::from_row_slice(j.p, j.r, &j.v),
            d: j.d,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FactorsDoc {
    schema_version: u32,
    factors: Vec<FactorJson>,
}

/// Writes `{"schema_version": .., "factors": [..]}`.
pub fn save_factors(factors: &[Factor], path: &Path) -> Result<()> {
    let doc = FactorsDoc {
        schema_version: SCHEMA_VERSION,
        factors: factors.iter().map(FactorJson::from).collect(),
    };
    fs::write(path, serde_json::to_string_pretty(&doc)? + "\n")?;
    Ok(())
}

/// Reads the `factors` array of any CLI result document, either at the top
/// level or under `result`.
pub fn load_factors(path: &Path) -> Result<Vec<Factor>> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let version = value.get("schema_version").and_then(|v| v.as_u64());
    if version != Some(SCHEMA_VERSION as u64) {
        return Err(parse_err(path, format!("unsupported schema_version {version:?}")));
    }
    let factors = value
        .get("factors")
        .or_else(|| value.get("result").and_then(|r| r.get("factors")))
        .ok_or_else(|| parse_err(path, "no 'factors' array"))?;
    let parsed: Vec<FactorJson> = serde_json::from_value(factors.clone())?;
    parsed.iter().map(Factor::try_from).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(path: &Path, text: &str) {
        let mut f = fs::File::create(path).unwrap();
        f.write_all(text.as_bytes()).unwrap();
    }

    #[test]
    fn long_csv_pair_example() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        write(&path, "t,i,j,w\n1,1,2,0.5\n1,2,1,0.5\n");
        let x = load_tensor(&path, None).unwrap();
        assert_eq!((x.p(), x.t()), (2, 1));
        assert_eq!(x.slice(0), &DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]));
    }

    #[test]
    fn long_csv_disagreeing_pair() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        write(&path, "t,i,j,w\n1,1,2,0.5\n1,2,1,0.6\n");
        assert!(matches!(load_tensor(&path, None), Err(Error::AsymmetricInput { i: 1, j: 2, .. })));
    }

    #[test]
    fn long_csv_orders_time_and_fills_zeros() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        write(&path, "t,i,j,w\n20,3,1,2\n5,2,2,1\n");
        let x = load_long_csv(&path, Some(4)).unwrap();
        assert_eq!((x.p(), x.t()), (4, 2));
        assert_eq!(x.get(1, 1, 0), 1.0);
        assert_eq!(x.get(0, 2, 1), 2.0);
        assert_eq!(x.get(2, 0, 1), 2.0);
        assert!(matches!(load_long_csv(&path, Some(2)), Err(Error::InconsistentDimensions(_))));
    }

    #[test]
    fn long_csv_parse_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        write(&path, "a,b,c,d\n1,1,2,0.5\n");
        assert!(matches!(load_tensor(&path, None), Err(Error::Parse { .. })));
        write(&path, "t,i,j,w\n1,0,2,0.5\n");
        assert!(matches!(load_tensor(&path, None), Err(Error::Parse { .. })));
        write(&path, "t,i,j,w\n1,1,2,abc\n");
        match load_tensor(&path, None) {
            Err(Error::Parse { message, .. }) => assert!(message.contains("line 2"), "{message}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn slice_dir_dimensions_must_agree() {
        let dir = tempfile::tempdir().unwrap();
        write(&dir.path().join("a.csv"), "1,0,0\n0,1,0\n0,0,1\n");
        write(&dir.path().join("b.csv"), "1,0,0,0\n0,1,0,0\n0,0,1,0\n0,0,0,1\n");
        assert!(matches!(load_tensor(dir.path(), None), Err(Error::InconsistentDimensions(_))));
    }

    #[test]
    fn slice_dir_reads_in_name_order() {
        let dir = tempfile::tempdir().unwrap();
        write(&dir.path().join("b.csv"), "0,2\n2,0\n");
        write(&dir.path().join("a.csv"), "1,0\n0,1\n");
        write(&dir.path().join("notes.txt"), "ignored");
        let x = load_tensor(dir.path(), Some(InputFormat::SliceDir)).unwrap();
        assert_eq!(x.t(), 2);
        assert_eq!(x.get(0, 0, 0), 1.0);
        assert_eq!(x.get(0, 1, 1), 2.0);
    }

    #[test]
    fn writers_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let slices = vec![
            DMatrix::from_row_slice(3, 3, &[0.1, 1.0 / 3.0, 0.0, 1.0 / 3.0, 0.0, -2.5e-17, 0.0, -2.5e-17, 7.0]),
            DMatrix::zeros(3, 3),
            DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]),
        ];
        let x = SemiSymTensor::new_from_slices(slices).unwrap();
        let dense = dir.path().join("slices");
        write_slice_dir(&x, &dense).unwrap();
        assert_eq!(load_slice_dir(&dense).unwrap(), x);
        // an all-zero slice vanishes from LongCSV, so only check the others
        let long = dir.path().join("x.csv");
        write_long_csv(&x, &long).unwrap();
        let y = load_long_csv(&long, Some(3)).unwrap();
        assert_eq!(y.t(), 2);
        assert_eq!(y.slice(0), x.slice(0));
        assert_eq!(y.slice(1), x.slice(2));
    }

    #[test]
    fn factors_round_trip() {
        let f = Factor {
            u: DVector::from_vec(vec![0.6, -0.8]),
            v: DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0 / 2f64.sqrt(), 0.0, -1.0 / 2f64.sqrt()]),
            d: 1.0 / 3.0,
        };
        let j = FactorJson::from(&f);
        assert_eq!(j.v, vec![1.0, 0.0, 0.0, 1.0 / 2f64.sqrt(), 0.0, -1.0 / 2f64.sqrt()]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.json");
        save_factors(&[f.clone(), f.clone()], &path).unwrap();
        let back = load_factors(&path).unwrap();
        assert_eq!(back, vec![f.clone(), f]);
    }
}
