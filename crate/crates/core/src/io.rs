//! Dataset, estimate and trace files.
//!
//! A dataset is comma-separated text whose first line is a header
//!
//! ```text
//! # kind=<linear|logistic|quantile:tau|precision> n=<n> p=<p>
//! ```
//!
//! followed by `n` rows. Regression rows are `y, x_1, ..., x_p`; precision
//! rows are raw observations `x_1, ..., x_p`, from which the sample
//! covariance is formed.

use std::io::{BufRead, BufReader, Read, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lla::LlaTrace;
use crate::model::{sample_covariance, Estimate, LossKind, Problem};

/// Raw contents of a dataset file.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub kind: LossKind,
    /// Design (regression) or observations (precision), `n x p`.
    pub x: DMatrix<f64>,
    /// Responses; `None` for precision data.
    pub y: Option<DVector<f64>>,
}

impl Dataset {
    pub fn regression(kind: LossKind, x: DMatrix<f64>, y: DVector<f64>) -> Self {
        Self { kind, x, y: Some(y) }
    }

    pub fn observations(x: DMatrix<f64>) -> Self {
        Self {
            kind: LossKind::Precision,
            x,
            y: None,
        }
    }

    pub fn to_problem(&self) -> Result<Problem> {
        match (&self.kind, &self.y) {
            (LossKind::Precision, _) => Problem::precision(sample_covariance(&self.x)?),
            (kind, Some(y)) => Problem::regression(*kind, self.x.clone(), y.clone()),
            (_, None) => Err(Error::InvalidProblem("regression data needs a response".into())),
        }
    }
}

fn parse_err(line: u64, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn parse_header(line: &str) -> Result<(LossKind, usize, usize)> {
    let body = line
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| parse_err(1, 1, "expected a '# kind=... n=... p=...' header"))?;
    let (mut kind, mut n, mut p) = (None, None, None);
    for token in body.split_whitespace() {
        let column = line.find(token).map_or(1, |c| c + 1);
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| parse_err(1, column, format!("expected key=value, found '{token}'")))?;
        let bad = |what: &str| parse_err(1, column, format!("bad {what} '{value}'"));
        match key {
            "kind" => kind = Some(value.parse::<LossKind>().map_err(|_| bad("kind"))?),
            "n" => n = Some(value.parse::<usize>().map_err(|_| bad("n"))?),
            "p" => p = Some(value.parse::<usize>().map_err(|_| bad("p"))?),
            other => return Err(parse_err(1, column, format!("unknown header key '{other}'"))),
        }
    }
    match (kind, n, p) {
        (Some(k), Some(n), Some(p)) if n > 0 && p > 0 => Ok((k, n, p)),
        (Some(_), Some(_), Some(_)) => Err(parse_err(1, 1, "n and p must be positive")),
        _ => Err(parse_err(1, 1, "header must give kind, n and p")),
    }
}

/// Reads a dataset, reporting the line and column of the first problem.
pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let mut reader = BufReader::new(reader);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let (kind, n, p) = parse_header(&header)?;
    let width = if kind == LossKind::Precision { p } else { p + 1 };

    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut values = Vec::with_capacity(n * width);
    let mut rows = 0;
    for record in csv.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() + 1);
            parse_err(line, 1, e.to_string())
        })?;
        // data lines start on line 2
        let line = record.position().map_or(rows as u64 + 2, |p| p.line() + 1);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != width {
            return Err(parse_err(
                line,
                record.len().min(width) + 1,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, c + 1, format!("'{field}' is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(line, c + 1, format!("'{field}' is not finite")));
            }
            values.push(v);
        }
        rows += 1;
        if rows > n {
            return Err(parse_err(line, 1, format!("more than the declared {n} rows")));
        }
    }
    if rows != n {
        return Err(parse_err(rows as u64 + 2, 1, format!("expected {n} rows, found {rows}")));
    }
    let all = DMatrix::from_row_slice(n, width, &values);
    Ok(match kind {
        LossKind::Precision => Dataset::observations(all),
        kind => Dataset::regression(kind, all.columns(1, p).into_owned(), all.column(0).into_owned()),
    })
}

/// Writes a dataset in the format [`read_dataset`] accepts. Numbers use the
/// shortest representation that round-trips.
pub fn write_dataset<W: Write>(data: &Dataset, mut out: W) -> Result<()> {
    let (n, p) = data.x.shape();
    writeln!(out, "# kind={} n={n} p={p}", data.kind.label())?;
    for i in 0..n {
        let mut fields: Vec<String> = Vec::with_capacity(p + 1);
        if let Some(y) = &data.y {
            fields.push(y[i].to_string());
        }
        fields.extend(data.x.row(i).iter().map(|v| v.to_string()));
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

/// `index,value` for vectors, `row,col,value` for matrices (0-based).
pub fn write_estimate<W: Write>(est: &Estimate, mut out: W) -> Result<()> {
    match est {
        Estimate::Vector(b) => {
            writeln!(out, "index,value")?;
            for (j, v) in b.iter().enumerate() {
                writeln!(out, "{j},{v}")?;
            }
        }
        Estimate::Matrix(m) => {
            writeln!(out, "row,col,value")?;
            for j in 0..m.nrows() {
                for k in 0..m.ncols() {
                    writeln!(out, "{j},{k},{}", m[(j, k)])?;
                }
            }
        }
    }
    Ok(())
}

/// `iteration,objective,nonzeros,max_change`, one line per iterate.
pub fn write_trace<W: Write>(trace: &LlaTrace, mut out: W) -> Result<()> {
    writeln!(out, "iteration,objective,nonzeros,max_change")?;
    for (m, est) in trace.iterates.iter().enumerate() {
        writeln!(
            out,
            "{m},{},{},{}",
            trace.objectives[m],
            est.support_above(crate::model::SUPPORT_THRESHOLD).len(),
            trace.changes[m]
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_regression() {
        let x = DMatrix::from_row_slice(2, 3, &[1.0, 0.1, -2.5, 3.0, 1e-17, 4.0]);
        let y = DVector::from_vec(vec![0.3, -1.0 / 3.0]);
        let d = Dataset::regression(LossKind::Quantile { tau: 0.3 }, x, y);
        let mut buf = Vec::new();
        write_dataset(&d, &mut buf).unwrap();
        assert!(buf.starts_with(b"# kind=quantile:0.3 n=2 p=3\n"));
        assert_eq!(read_dataset(buf.as_slice()).unwrap(), d);
    }

    #[test]
    fn precision_rows_are_observations() {
        let text = "# kind=precision n=3 p=2\n1,2\n0,1\n-1,0\n";
        let d = read_dataset(text.as_bytes()).unwrap();
        let p = d.to_problem().unwrap();
        let s = p.sample_cov().unwrap();
        assert!((s[(0, 0)] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn errors_carry_positions() {
        let text = "# kind=linear n=2 p=2\n1,2,3\n4,x,6\n";
        match read_dataset(text.as_bytes()) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (3, 2)),
            other => panic!("unexpected {other:?}"),
        }
        let text = "# kind=linear n=2 p=2\n1,2,3\n4,5\n";
        match read_dataset(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(read_dataset("kind=linear".as_bytes()), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(
            read_dataset("# kind=cubic n=1 p=1\n1,2\n".as_bytes()),
            Err(Error::Parse { line: 1, column: 3, .. })
        ));
        let text = "# kind=linear n=3 p=1\n1,2\n";
        assert!(matches!(read_dataset(text.as_bytes()), Err(Error::Parse { .. })));
    }
}
