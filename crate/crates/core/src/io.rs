//! Plain-text matrix exchange and CSV time series.
//!
//! All numbers are written with 17 significant digits (`{:.16e}`), which is
//! enough to recover every `f64` exactly, so write-read-write is
//! byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const MAGIC: &str = "# dualcomp matrix v1";

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixRecord {
    pub name: String,
    pub matrix: DMatrix<f64>,
    pub meta: BTreeMap<String, String>,
}

impl MatrixRecord {
    pub fn new(name: &str, matrix: DMatrix<f64>) -> Self {
        Self {
            name: name.to_string(),
            matrix,
            meta: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: &str) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let (r, c) = self.matrix.shape();
        writeln!(out, "{MAGIC}").unwrap();
        writeln!(out, "name: {}", self.name).unwrap();
        writeln!(out, "shape: {r} {c}").unwrap();
        for (k, v) in &self.meta {
            writeln!(out, "meta.{k}: {v}").unwrap();
        }
        writeln!(out, "data:").unwrap();
        for i in 0..r {
            let row: Vec<String> = (0..c).map(|j| fmt_f64(self.matrix[(i, j)])).collect();
            writeln!(out, "{}", row.join(" ")).unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(MAGIC) {
            return Err(Error::Parse("missing matrix header".to_string()));
        }
        let mut name = None;
        let mut shape = None;
        let mut meta = BTreeMap::new();
        for line in lines.by_ref() {
            if line == "data:" {
                break;
            }
            let (key, value) = line
                .split_once(": ")
                .ok_or_else(|| Error::Parse(format!("bad header line '{line}'")))?;
            match key {
                "name" => name = Some(value.to_string()),
                "shape" => {
                    let dims: Vec<usize> = value
                        .split_whitespace()
                        .map(|t| {
                            t.parse()
                                .map_err(|_| Error::Parse(format!("bad shape '{value}'")))
                        })
                        .collect::<Result<_>>()?;
                    if dims.len() != 2 {
                        return Err(Error::Parse(format!("bad shape '{value}'")));
                    }
                    shape = Some((dims[0], dims[1]));
                }
                k => match k.strip_prefix("meta.") {
                    Some(m) => {
                        meta.insert(m.to_string(), value.to_string());
                    }
                    None => return Err(Error::Parse(format!("unknown header key '{k}'"))),
                },
            }
        }
        let name = name.ok_or_else(|| Error::Parse("missing name".to_string()))?;
        let (r, c) = shape.ok_or_else(|| Error::Parse("missing shape".to_string()))?;
        let values: Vec<f64> = lines
            .flat_map(str::split_whitespace)
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::Parse(format!("bad number '{t}'")))
            })
            .collect::<Result<_>>()?;
        if values.len() != r * c {
            return Err(Error::Parse(format!(
                "expected {} entries, found {}",
                r * c,
                values.len()
            )));
        }
        Ok(Self {
            name,
            matrix: DMatrix::from_row_slice(r, c, &values),
            meta,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// A table of floats with named columns and `# ` comment header lines.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub columns: Vec<String>,
    /// Optional label per row (empty for plain numeric rows).
    pub labels: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: Vec<String>, columns: Vec<String>) -> Self {
        Self {
            header,
            columns,
            labels: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        self.labels.push(String::new());
        self.rows.push(row);
    }

    /// A row whose first cell is `label` instead of a number.
    pub fn push_labeled(&mut self, label: &str, row: Vec<f64>) {
        self.labels.push(label.to_string());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::new();
        for line in &self.header {
            for part in line.trim_end_matches('\n').split('\n') {
                writeln!(out, "# {part}").unwrap();
            }
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).map_err(csv_err)?;
        for (label, row) in self.labels.iter().zip(&self.rows) {
            let mut rec: Vec<String> = Vec::with_capacity(row.len() + 1);
            let cells = if label.is_empty() {
                row.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>()
            } else {
                rec.push(label.clone());
                row.iter().skip(1).map(|&x| fmt_f64(x)).collect()
            };
            rec.extend(cells);
            w.write_record(&rec).map_err(csv_err)?;
        }
        let body = String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.to_string()))?)
            .map_err(|e| Error::Io(e.to_string()))?;
        out.push_str(&body);
        Ok(out)
    }

    /// Inverse of [`Table::to_csv`]. Labeled rows read back with `NaN` in
    /// the label column.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let header = text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .map(|l| l.strip_prefix("# ").unwrap_or(&l[1..]).to_string())
            .collect();
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let columns = r
            .headers()
            .map_err(csv_err)?
            .iter()
            .map(str::to_string)
            .collect();
        let mut table = Table::new(header, columns);
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            let mut label = String::new();
            let mut row = Vec::with_capacity(rec.len());
            for (j, cell) in rec.iter().enumerate() {
                match cell.parse::<f64>() {
                    Ok(x) => row.push(x),
                    Err(_) if j == 0 => {
                        label = cell.to_string();
                        row.push(f64::NAN);
                    }
                    Err(_) => return Err(Error::Parse(format!("bad number '{cell}'"))),
                }
            }
            table.labels.push(label);
            table.rows.push(row);
        }
        Ok(table)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()?)?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matrix_text_layout() {
        let m = MatrixRecord::new("S", DMatrix::from_row_slice(1, 2, &[1.0, -0.5]))
            .with_meta("basis", "fourier/2");
        let text = m.to_text();
        assert!(text.contains("shape: 1 2\n"));
        assert!(text.contains("meta.basis: fourier/2\n"));
        assert!(text.ends_with("1.0000000000000000e0 -5.0000000000000000e-1\n"));
        assert_eq!(MatrixRecord::parse(&text).unwrap(), m);
    }

    #[test]
    fn malformed_matrix_text() {
        assert!(MatrixRecord::parse("nope").is_err());
        let short = format!("{MAGIC}\nname: x\nshape: 2 2\ndata:\n1 2 3\n");
        assert!(MatrixRecord::parse(&short).is_err());
    }

    #[test]
    fn table_round_trip_with_label() {
        let mut t = Table::new(
            vec!["problem = \"wave\"".to_string()],
            vec!["time".into(), "H".into()],
        );
        t.push(vec![0.0, 1.0 / 3.0]);
        t.push_labeled("max", vec![f64::NAN, 0.25]);
        let text = t.to_csv().unwrap();
        assert!(text.starts_with("# problem = \"wave\"\ntime,H\n"));
        assert!(text.contains("\nmax,2.5000000000000000e-1\n"));
        let back = Table::parse_csv(&text).unwrap();
        assert_eq!(back.to_csv().unwrap(), text);
        assert_eq!(back.rows[0][1], 1.0 / 3.0);
    }

    #[test]
    fn blank_header_lines_survive() {
        let mut t = Table::new(vec!["a = 1\n\n[b]\nc = 2\n".to_string()], vec!["x".into()]);
        t.push(vec![1.0]);
        let text = t.to_csv().unwrap();
        assert!(text.starts_with("# a = 1\n# \n# [b]\n"));
        assert_eq!(Table::parse_csv(&text).unwrap().to_csv().unwrap(), text);
    }

    proptest! {
        #[test]
        fn matrix_round_trip_is_bit_exact(vals in prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 6)) {
            let m = MatrixRecord::new("M", DMatrix::from_row_slice(2, 3, &vals));
            let text = m.to_text();
            let back = MatrixRecord::parse(&text).unwrap();
            for (a, b) in m.matrix.iter().zip(back.matrix.iter()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
            prop_assert_eq!(back.to_text(), text);
        }
    }
}
