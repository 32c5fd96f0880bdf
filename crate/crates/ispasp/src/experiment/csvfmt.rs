//! Minimal CSV assembly and parsing for the harness.
//!
//! Fields never contain commas or quotes, so plain joins are enough and the
//! output is byte-deterministic. Wall-clock measurements live in columns whose
//! names end in `_ms`; stripping those makes reruns diff clean.

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, IndexSet};

/// A fixed-width table with a header row.
#[derive(Debug, Clone)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(
            row.len(),
            self.header.len(),
            "row width does not match header"
        );
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Split a CSV produced by [`Table::to_csv`] back into header and rows.
pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Config("empty csv".into()))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let row: Vec<String> = line.split(',').map(str::to_string).collect();
        if row.len() != header.len() {
            return Err(Error::Config(format!(
                "csv row has {} fields, header has {}",
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// Drop every column whose header ends in `_ms`, keeping the rest verbatim.
pub fn strip_timing_columns(csv: &str) -> Result<String> {
    let (header, rows) = parse_csv(csv)?;
    let keep: Vec<usize> = header
        .iter()
        .enumerate()
        .filter_map(|(i, name)| (!name.ends_with("_ms")).then_some(i))
        .collect();
    let mut out = keep
        .iter()
        .map(|&i| header[i].as_str())
        .collect::<Vec<_>>()
        .join(",");
    out.push('\n');
    for row in rows {
        let line = keep
            .iter()
            .map(|&i| row[i].as_str())
            .collect::<Vec<_>>()
            .join(",");
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

/// Matrix export format: a `rows,cols` header, a dimensions line, then one
/// line per matrix row with comma-separated values.
pub fn write_matrix_csv(m: &DenseMatrix) -> String {
    let mut out = String::from("rows,cols\n");
    out.push_str(&format!("{},{}\n", m.rows(), m.cols()));
    for r in 0..m.rows() {
        let line: Vec<String> = (0..m.cols()).map(|c| format!("{}", m.get(r, c))).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn read_matrix_csv(text: &str) -> Result<DenseMatrix> {
    let mut lines = text.lines();
    match lines.next() {
        Some("rows,cols") => {}
        other => {
            return Err(Error::Config(format!(
                "bad matrix csv header: {other:?}"
            )))
        }
    }
    let dims = lines
        .next()
        .ok_or_else(|| Error::Config("matrix csv missing dimensions".into()))?;
    let (rows, cols) = dims
        .split_once(',')
        .ok_or_else(|| Error::Config("bad matrix dimensions line".into()))?;
    let rows: usize = rows
        .parse()
        .map_err(|_| Error::Config(format!("bad row count {rows:?}")))?;
    let cols: usize = cols
        .parse()
        .map_err(|_| Error::Config(format!("bad col count {cols:?}")))?;
    let mut m = DenseMatrix::zeros(rows.max(1), cols.max(1));
    let mut row_count = 0usize;
    for (r, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        row_count += 1;
        if r >= rows {
            return Err(Error::Config("matrix csv has extra rows".into()));
        }
        let mut col_count = 0usize;
        for (c, field) in line.split(',').enumerate() {
            if c >= cols {
                return Err(Error::Config("matrix csv has extra columns".into()));
            }
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Config(format!("bad matrix value {field:?}")))?;
            m.set(r, c, v);
            col_count += 1;
        }
        if col_count != cols {
            return Err(Error::Config("matrix csv row too short".into()));
        }
    }
    if row_count != rows || rows == 0 || cols == 0 {
        return Err(Error::Config("matrix csv row count mismatch".into()));
    }
    Ok(m)
}

/// Newline-delimited index export for pruned sets.
pub fn index_set_lines(set: &IndexSet) -> String {
    let mut out = String::new();
    for i in set.iter() {
        out.push_str(&i.to_string());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strip_removes_only_timing_columns() {
        let mut t = Table::new(&["a", "wall_ms", "b", "prune_ms"]);
        t.push(vec!["1".into(), "9.9".into(), "x".into(), "3.3".into()]);
        let stripped = strip_timing_columns(&t.to_csv()).unwrap();
        assert_eq!(stripped, "a,b\n1,x\n");
    }

    #[test]
    fn matrix_csv_round_trip() {
        let m = DenseMatrix::from_rows(&[&[1.5, -2.0, 0.25], &[0.0, 3.0, 1e-9]]).unwrap();
        let text = write_matrix_csv(&m);
        assert!(text.starts_with("rows,cols\n2,3\n"));
        let back = read_matrix_csv(&text).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn matrix_csv_rejects_malformed() {
        assert!(read_matrix_csv("nope\n1,1\n0\n").is_err());
        assert!(read_matrix_csv("rows,cols\n2,2\n1,2\n").is_err());
    }

    #[test]
    fn index_lines() {
        let set = IndexSet::new(10, vec![7, 2, 5]).unwrap();
        assert_eq!(index_set_lines(&set), "2\n5\n7\n");
    }
}
