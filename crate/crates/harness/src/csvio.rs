//! CSV artifacts: `#` comment lines, one header row, then data rows.

use std::fs;
use std::path::{Path, PathBuf};

use neograd::ExperimentTrace;

use crate::error::{HarnessError, Result};

pub const TRACE_COLUMNS: [&str; 9] = [
    "iter",
    "f",
    "log10_f",
    "rho",
    "log10_rho",
    "alpha",
    "log10_alpha",
    "grad_norm",
    "degenerate",
];

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn f64_column(&self, name: &str) -> std::result::Result<Vec<f64>, String> {
        let j = self
            .column_index(name)
            .ok_or_else(|| format!("no column `{name}`"))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r[j].parse::<f64>().map_err(|_| {
                    format!(
                        "row {}: `{}` in column `{name}` is not a number",
                        i + 1,
                        r[j]
                    )
                })
            })
            .collect()
    }

    /// Value of a `# key: value` comment line.
    pub fn comment_value(&self, key: &str) -> Option<&str> {
        self.comments.iter().find_map(|c| {
            c.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix(':'))
                .map(str::trim)
        })
    }
}

pub fn write_table(
    path: &Path,
    comments: &[String],
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut out = String::new();
    for c in comments {
        for line in c.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
    }
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(header).map_err(HarnessError::csv(path))?;
    for row in rows {
        w.write_record(&row).map_err(HarnessError::csv(path))?;
    }
    let body = w
        .into_inner()
        .map_err(|e| HarnessError::Experiment(e.to_string()))?;
    out.push_str(&String::from_utf8_lossy(&body));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(HarnessError::io(dir))?;
    }
    fs::write(path, out).map_err(HarnessError::io(path))
}

pub fn read_table(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path).map_err(HarnessError::io(path))?;
    let mut comments = Vec::new();
    let mut body = String::new();
    for line in text.lines() {
        match line.strip_prefix('#') {
            Some(c) => comments.push(c.strip_prefix(' ').unwrap_or(c).to_string()),
            None => {
                body.push_str(line);
                body.push('\n');
            }
        }
    }
    let mut rdr = csv::ReaderBuilder::new().from_reader(body.as_bytes());
    let header = rdr
        .headers()
        .map_err(HarnessError::csv(path))?
        .iter()
        .map(str::to_string)
        .collect();
    let rows = rdr
        .records()
        .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<_, _>>()
        .map_err(HarnessError::csv(path))?;
    Ok(Table {
        comments,
        header,
        rows,
    })
}

/// One parsed row of a trace CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub f: f64,
    pub rho: f64,
    pub alpha: f64,
    pub grad_norm: f64,
    pub degenerate: bool,
}

pub fn trace_rows(trace: &ExperimentTrace) -> impl Iterator<Item = Vec<String>> + '_ {
    trace.steps.iter().map(|d| {
        vec![
            d.iter.to_string(),
            fmt_f64(d.f_new),
            fmt_f64(d.f_new.log10()),
            fmt_f64(d.rho),
            fmt_f64(d.rho.log10()),
            fmt_f64(d.alpha_used),
            fmt_f64(d.alpha_used.log10()),
            fmt_f64(d.grad_norm),
            u8::from(d.degenerate).to_string(),
        ]
    })
}

pub fn write_trace(path: &Path, comments: &[String], trace: &ExperimentTrace) -> Result<()> {
    write_table(path, comments, &TRACE_COLUMNS, trace_rows(trace))
}

pub fn read_trace(path: &Path) -> Result<(Table, Vec<TraceRecord>)> {
    let table = read_table(path)?;
    let bad = |msg: String| HarnessError::Parse {
        path: path.to_path_buf(),
        msg,
    };
    if table.header != TRACE_COLUMNS {
        return Err(bad(format!("unexpected trace columns {:?}", table.header)));
    }
    let records = table
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let num = |j: usize| {
                r[j].parse::<f64>()
                    .map_err(|_| bad(format!("row {}: `{}` is not a number", i + 1, r[j])))
            };
            Ok(TraceRecord {
                iter: r[0]
                    .parse()
                    .map_err(|_| bad(format!("row {}: bad iteration `{}`", i + 1, r[0])))?,
                f: num(1)?,
                rho: num(3)?,
                alpha: num(5)?,
                grad_norm: num(7)?,
                degenerate: r[8] == "1",
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((table, records))
}

/// θ vector as `index,value` rows.
pub fn write_theta(path: &Path, comments: &[String], theta: &[f64]) -> Result<()> {
    write_table(
        path,
        comments,
        &["index", "value"],
        theta
            .iter()
            .enumerate()
            .map(|(i, v)| vec![i.to_string(), fmt_f64(*v)]),
    )
}

pub fn read_theta(path: &Path) -> Result<Vec<f64>> {
    read_table(path)?
        .f64_column("value")
        .map_err(|msg| HarnessError::Parse {
            path: path.to_path_buf(),
            msg,
        })
}

/// θ snapshots as `iter,theta_0,theta_1,…` rows.
pub fn write_snapshots(
    path: &Path,
    comments: &[String],
    snapshots: &[(usize, Vec<f64>)],
) -> Result<()> {
    let dim = snapshots.first().map_or(0, |(_, t)| t.len());
    let names: Vec<String> = std::iter::once("iter".to_string())
        .chain((0..dim).map(|i| format!("theta_{i}")))
        .collect();
    let header: Vec<&str> = names.iter().map(String::as_str).collect();
    write_table(
        path,
        comments,
        &header,
        snapshots.iter().map(|(it, t)| {
            std::iter::once(it.to_string())
                .chain(t.iter().map(|v| fmt_f64(*v)))
                .collect()
        }),
    )
}

pub fn read_snapshots(path: &Path) -> Result<Vec<(usize, Vec<f64>)>> {
    let table = read_table(path)?;
    let bad = |msg: String| HarnessError::Parse {
        path: PathBuf::from(path),
        msg,
    };
    table
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let iter = r[0]
                .parse()
                .map_err(|_| bad(format!("row {}: bad iteration `{}`", i + 1, r[0])))?;
            let theta = r[1..]
                .iter()
                .map(|c| {
                    c.parse::<f64>()
                        .map_err(|_| bad(format!("row {}: `{c}` is not a number", i + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((iter, theta))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt_roundtrips_extremes() {
        for x in [
            0.0,
            -0.0,
            1e-300,
            5e-324,
            1.0 / 3.0,
            f64::MAX,
            f64::INFINITY,
            f64::NEG_INFINITY,
        ] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert!(fmt_f64(f64::NAN).parse::<f64>().unwrap().is_nan());
    }

    #[test]
    fn table_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/t.csv");
        let comments = vec!["cf: beale".to_string(), "two\nlines".to_string()];
        write_table(
            &p,
            &comments,
            &["a", "b"],
            vec![vec!["1".into(), "x,y".into()]],
        )
        .unwrap();
        let t = read_table(&p).unwrap();
        assert_eq!(t.comments, vec!["cf: beale", "two", "lines"]);
        assert_eq!(t.header, vec!["a", "b"]);
        assert_eq!(t.rows, vec![vec!["1".to_string(), "x,y".to_string()]]);
        assert_eq!(t.comment_value("cf"), Some("beale"));
    }

    #[test]
    fn snapshots_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let snaps = vec![(0, vec![1.0, -2.5]), (10, vec![0.1, 1e-20])];
        write_snapshots(&p, &[], &snaps).unwrap();
        assert_eq!(read_snapshots(&p).unwrap(), snaps);
    }
}
