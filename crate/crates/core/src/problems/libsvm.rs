//! LIBSVM text format: one sample per line, `label idx:val idx:val ...` with
//! 1-based, strictly increasing feature indices.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseRow {
    /// 0-based, strictly increasing.
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseRow {
    pub fn new(indices: Vec<u32>, values: Vec<f64>) -> Self {
        debug_assert_eq!(indices.len(), values.len());
        SparseRow { indices, values }
    }

    #[inline]
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&j, &v)| v * x[j as usize])
            .sum()
    }

    /// `out += alpha * row`
    #[inline]
    pub fn axpy_into(&self, alpha: f64, out: &mut [f64]) {
        for (&j, &v) in self.indices.iter().zip(&self.values) {
            out[j as usize] += alpha * v;
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut d = vec![0.0; n];
        self.axpy_into(1.0, &mut d);
        d
    }
}

/// A binary-labelled sparse design matrix. Labels are always `-1.0` or `+1.0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseDataset {
    pub rows: Vec<SparseRow>,
    pub labels: Vec<f64>,
    pub dimension: usize,
}

impl SparseDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Builds a dataset from dense rows, dropping exact zeros.
    pub fn from_dense(rows: &[Vec<f64>], labels: &[f64]) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::invalid("labels", "one label per row required"));
        }
        let dimension = rows.first().map_or(0, Vec::len);
        let mut out = Vec::with_capacity(rows.len());
        for row in rows {
            if row.len() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    actual: row.len(),
                });
            }
            let (indices, values) = row
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(j, &v)| (j as u32, v))
                .unzip();
            out.push(SparseRow::new(indices, values));
        }
        for &y in labels {
            if y != 1.0 && y != -1.0 {
                return Err(Error::invalid("labels", format!("expected +-1, got {y}")));
            }
        }
        Ok(SparseDataset {
            rows: out,
            labels: labels.to_vec(),
            dimension,
        })
    }

    /// Declares a wider feature space than the largest index seen.
    pub fn with_dimension(mut self, n: usize) -> Result<Self> {
        if n < self.dimension {
            return Err(Error::invalid(
                "dimension",
                format!("declared {n} but data uses {}", self.dimension),
            ));
        }
        self.dimension = n;
        Ok(self)
    }
}

/// Parses LIBSVM text. Labels must be drawn from `{0, 1}` (mapped to
/// `{-1, +1}`) or from `{-1, +1}`; anything else is rejected.
pub fn parse_libsvm<R: BufRead>(reader: R) -> Result<SparseDataset> {
    parse_libsvm_named(reader, "<input>")
}

pub fn parse_libsvm_named<R: BufRead>(reader: R, name: &str) -> Result<SparseDataset> {
    let err = |line: usize, reason: String| Error::Parse {
        path: name.to_string(),
        line,
        reason,
    };
    let mut rows = Vec::new();
    let mut raw_labels = Vec::new();
    let mut dimension = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| err(lineno, e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().expect("non-empty line has a token");
        let label: f64 = label_tok
            .parse()
            .map_err(|_| err(lineno, format!("non-numeric label `{label_tok}`")))?;
        if !label.is_finite() {
            return Err(err(lineno, format!("non-finite label `{label_tok}`")));
        }
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| err(lineno, format!("expected idx:val, got `{tok}`")))?;
            let idx: u32 = idx
                .parse()
                .map_err(|_| err(lineno, format!("non-numeric index in `{tok}`")))?;
            let val: f64 = val
                .parse()
                .map_err(|_| err(lineno, format!("non-numeric value in `{tok}`")))?;
            if idx == 0 {
                return Err(err(lineno, "feature indices are 1-based".into()));
            }
            if !val.is_finite() {
                return Err(err(lineno, format!("non-finite value in `{tok}`")));
            }
            let idx0 = idx - 1;
            if let Some(&prev) = indices.last() {
                if idx0 <= prev {
                    return Err(err(lineno, format!("index {idx} not strictly increasing")));
                }
            }
            indices.push(idx0);
            values.push(val);
        }
        if let Some(&last) = indices.last() {
            dimension = dimension.max(last as usize + 1);
        }
        rows.push(SparseRow::new(indices, values));
        raw_labels.push(label);
    }

    if rows.is_empty() {
        return Err(err(0, "empty dataset".into()));
    }
    let labels = map_labels(&raw_labels).map_err(|reason| err(0, reason))?;
    Ok(SparseDataset {
        rows,
        labels,
        dimension,
    })
}

fn map_labels(raw: &[f64]) -> std::result::Result<Vec<f64>, String> {
    let distinct: BTreeSet<i64> = raw
        .iter()
        .map(|&y| {
            if y.fract() == 0.0 {
                Ok(y as i64)
            } else {
                Err(format!("non-integer label {y}"))
            }
        })
        .collect::<std::result::Result<_, _>>()?;
    let zero_one = distinct.iter().all(|y| *y == 0 || *y == 1);
    let plus_minus = distinct.iter().all(|y| *y == -1 || *y == 1);
    if zero_one {
        Ok(raw.iter().map(|&y| if y == 0.0 { -1.0 } else { 1.0 }).collect())
    } else if plus_minus {
        Ok(raw.to_vec())
    } else {
        Err(format!("unsupported label set {distinct:?}; expected {{0,1}} or {{-1,+1}}"))
    }
}

/// Writes `data` in LIBSVM format. Values use the shortest representation that
/// parses back to the same `f64`.
pub fn write_libsvm<W: Write>(data: &SparseDataset, mut out: W) -> std::io::Result<()> {
    let mut line = String::new();
    for (row, &y) in data.rows.iter().zip(&data.labels) {
        line.clear();
        line.push_str(if y > 0.0 { "+1" } else { "-1" });
        for (&j, &v) in row.indices.iter().zip(&row.values) {
            let _ = write!(line, " {}:{}", j + 1, v);
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_single_row() {
        let d = parse_libsvm("1 1:0.5 3:-1.2\n".as_bytes()).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.labels, vec![1.0]);
        assert_eq!(d.rows[0].indices, vec![0, 2]);
        assert_eq!(d.rows[0].values, vec![0.5, -1.2]);
        assert_eq!(d.dimension, 3);
    }

    #[test]
    fn zero_one_labels_map_to_minus_one() {
        let d = parse_libsvm("0 2:1\n1 1:1\n".as_bytes()).unwrap();
        assert_eq!(d.labels, vec![-1.0, 1.0]);
        let d = parse_libsvm("-1 2:1\n+1 1:3\n".as_bytes()).unwrap();
        assert_eq!(d.labels, vec![-1.0, 1.0]);
    }

    #[test]
    fn rejects_bad_input() {
        for bad in [
            "",
            "\n\n",
            "x 1:2\n",
            "1 1:abc\n",
            "1 a:1\n",
            "1 3:1 2:1\n",
            "1 2:1 2:1\n",
            "1 0:1\n",
            "1 1\n",
            "2 1:1\n1 1:1\n",
            "0 1:1\n-1 1:1\n",
            "0.5 1:1\n",
        ] {
            assert!(parse_libsvm(bad.as_bytes()).is_err(), "accepted {bad:?}");
        }
    }

    #[test]
    fn parse_error_carries_line_number() {
        let e = parse_libsvm("1 1:1\n1 2:q\n".as_bytes()).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
    }

    #[test]
    fn rows_without_features_are_allowed() {
        let d = parse_libsvm("1\n0 4:2\n".as_bytes()).unwrap();
        assert!(d.rows[0].indices.is_empty());
        assert_eq!(d.dimension, 4);
    }

    #[test]
    fn dense_conversion() {
        let d = SparseDataset::from_dense(&[vec![1.0, 0.0], vec![0.0, 2.0]], &[1.0, -1.0]).unwrap();
        assert_eq!(d.rows[1].indices, vec![1]);
        assert_eq!(d.rows[1].to_dense(2), vec![0.0, 2.0]);
        assert!(SparseDataset::from_dense(&[vec![1.0]], &[0.0]).is_err());
    }
}
