//! File formats.
//!
//! `data.csv` is long format with header `traj,t,x1..xn` and one row per
//! (trajectory, time slice). Static covariates live in `static.csv` with
//! header `traj,z1..zm`. Continuous values are written in shortest
//! round-trip form, so reading a written file reproduces every bit.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dbn::{DbnStructure, Domain, TrajectoryDataset};
use crate::error::{DbnError, Result};

fn format_value(v: f64, discrete: bool) -> String {
    if discrete {
        format!("{}", v as u64)
    } else {
        format!("{v:?}")
    }
}

pub fn write_data_csv<W: Write>(data: &TrajectoryDataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["traj".to_string(), "t".to_string()];
    header.extend((1..=data.n_x()).map(|i| format!("x{i}")));
    w.write_record(&header)?;
    let discrete = data.is_discrete();
    for n in 0..data.n_traj() {
        for t in 0..=data.horizon() {
            let mut rec = vec![n.to_string(), t.to_string()];
            rec.extend(data.slice(n, t).iter().map(|&v| format_value(v, discrete)));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_static_csv<W: Write>(data: &TrajectoryDataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["traj".to_string()];
    header.extend((1..=data.n_z()).map(|s| format!("z{s}")));
    w.write_record(&header)?;
    let discrete = data.is_discrete();
    for n in 0..data.n_traj() {
        let mut rec = vec![n.to_string()];
        rec.extend(data.statics(n).iter().map(|&v| format_value(v, discrete)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// How to type the values of a dataset being read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DomainHint {
    Continuous,
    /// Arity of each variable is one more than its largest observed value
    /// and at least 2.
    Discrete,
    Exact(Domain),
}

struct Table {
    header: Vec<String>,
    rows: Vec<(u64, Vec<String>)>,
}

fn read_table<R: Read>(input: R, key_cols: usize, what: &str) -> Result<Table> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.len() < key_cols || header[0] != "traj" || (key_cols == 2 && header[1] != "t") {
        return Err(DbnError::Parse(format!("{what}: header must start with {}", if key_cols == 2 { "traj,t" } else { "traj" })));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let traj: u64 = rec[0]
            .parse()
            .map_err(|_| DbnError::Parse(format!("{what} line {}: bad trajectory id {:?}", line + 2, &rec[0])))?;
        rows.push((traj, rec.iter().skip(1).map(str::to_string).collect()));
    }
    Ok(Table { header, rows })
}

fn parse_value(s: &str, what: &str, line: usize) -> Result<f64> {
    s.parse::<f64>().map_err(|_| DbnError::Parse(format!("{what} line {line}: bad value {s:?}")))
}

fn infer_arities(values: &[f64], width: usize, what: &str) -> Result<Vec<usize>> {
    let mut ar = vec![2usize; width];
    for (k, &v) in values.iter().enumerate() {
        if v < 0.0 || v.fract() != 0.0 {
            return Err(DbnError::Parse(format!("{what}: discrete value {v} is not a category index")));
        }
        let a = &mut ar[k % width];
        *a = (*a).max(v as usize + 1);
    }
    Ok(ar)
}

/// Reads `data.csv` and, when the model has static covariates, `static.csv`.
/// Trajectory ids may be any integers; they are renumbered in ascending order.
pub fn read_dataset<R: Read, S: Read>(data: R, statics: Option<S>, hint: DomainHint) -> Result<TrajectoryDataset> {
    let table = read_table(data, 2, "data.csv")?;
    let n_x = table.header.len() - 2;
    let mut by_traj: BTreeMap<u64, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for (line, (traj, rest)) in table.rows.iter().enumerate() {
        let line = line + 2;
        if rest.len() != n_x + 1 {
            return Err(DbnError::Parse(format!("data.csv line {line}: expected {} fields", n_x + 2)));
        }
        let t: usize =
            rest[0].parse().map_err(|_| DbnError::Parse(format!("data.csv line {line}: bad time {:?}", rest[0])))?;
        let vals = rest[1..].iter().map(|s| parse_value(s, "data.csv", line)).collect::<Result<Vec<_>>>()?;
        if by_traj.entry(*traj).or_default().insert(t, vals).is_some() {
            return Err(DbnError::Parse(format!("data.csv line {line}: duplicate (traj {traj}, t {t})")));
        }
    }
    let Some(first) = by_traj.values().next() else {
        return Err(DbnError::Parse("data.csv has no rows".into()));
    };
    let horizon = first.len() - 1;
    let mut x = Vec::with_capacity(by_traj.len() * (horizon + 1) * n_x);
    for (traj, slices) in &by_traj {
        if slices.len() != horizon + 1 || slices.keys().enumerate().any(|(k, &t)| k != t) {
            return Err(DbnError::Parse(format!("data.csv: trajectory {traj} does not cover t = 0..={horizon}")));
        }
        for v in slices.values() {
            x.extend_from_slice(v);
        }
    }

    let (n_z, z) = match statics {
        None => (0, Vec::new()),
        Some(s) => {
            let st = read_table(s, 1, "static.csv")?;
            let n_z = st.header.len() - 1;
            let mut map = BTreeMap::new();
            for (line, (traj, rest)) in st.rows.iter().enumerate() {
                if rest.len() != n_z {
                    return Err(DbnError::Parse(format!("static.csv line {}: expected {} fields", line + 2, n_z + 1)));
                }
                let vals = rest.iter().map(|v| parse_value(v, "static.csv", line + 2)).collect::<Result<Vec<_>>>()?;
                if map.insert(*traj, vals).is_some() {
                    return Err(DbnError::Parse(format!("static.csv: duplicate trajectory {traj}")));
                }
            }
            if !map.keys().eq(by_traj.keys()) {
                return Err(DbnError::Parse("static.csv and data.csv list different trajectories".into()));
            }
            (n_z, map.into_values().flatten().collect())
        }
    };

    let domain = match hint {
        DomainHint::Continuous => Domain::Continuous,
        DomainHint::Discrete => Domain::Discrete {
            x_arities: infer_arities(&x, n_x, "data.csv")?,
            z_arities: if n_z == 0 { Vec::new() } else { infer_arities(&z, n_z, "static.csv")? },
        },
        DomainHint::Exact(d) => d,
    };
    TrajectoryDataset::new(domain, n_x, n_z, by_traj.len(), horizon, x, z)
}

/// Reads `data.csv` and an optional `static.csv` from disk.
pub fn read_dataset_files(data: &Path, statics: Option<&Path>, hint: DomainHint) -> Result<TrajectoryDataset> {
    let d = BufReader::new(File::open(data).map_err(|e| DbnError::Io(format!("{}: {e}", data.display())))?);
    let s = match statics {
        Some(p) => Some(BufReader::new(File::open(p).map_err(|e| DbnError::Io(format!("{}: {e}", p.display())))?)),
        None => None,
    };
    read_dataset(d, s, hint)
}

/// Writes `data.csv`, and `static.csv` when there are static covariates,
/// into `dir`. Returns the written paths.
pub fn write_dataset_files(data: &TrajectoryDataset, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut paths = vec![dir.join("data.csv")];
    write_data_csv(data, BufWriter::new(File::create(&paths[0])?))?;
    if data.n_z() > 0 {
        let p = dir.join("static.csv");
        write_static_csv(data, BufWriter::new(File::create(&p)?))?;
        paths.push(p);
    }
    Ok(paths)
}

/// Ground-truth sidecar: the structure and value domain of a generated model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthFile {
    pub structure: DbnStructure,
    pub domain: Domain,
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    std::fs::write(path, to_json(value)?)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).map_err(|e| DbnError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| DbnError::Parse(format!("{}: {e}", path.display())))
}
