//! Plain-text file formats.
//!
//! All formats are whitespace-separated decimals. Blank lines and lines
//! starting with `#` are skipped everywhere.
//!
//! * dataset: `m d`, then `m` lines of `d` covariates followed by `y`
//! * chain: `n d`, then `n` rows of `n` transition probabilities, then `n`
//!   rows of `d` embedding coordinates
//! * model: `key value` header lines, an `alpha` block and an `inputs` block,
//!   numbers written with 17 significant digits so a round trip is exact
//! * config: `key = value` per line
//!
//! Tables are written as CSV with 12 significant digits.

use std::fs;
use std::path::{Path, PathBuf};

use modalmr_core::solver::{Penalty, RmrConfig, RmrModel};
use modalmr_core::{HypothesisKernel, PhiKind, RepresentingFunction, TransitionKernel};
use nalgebra::DMatrix;

use crate::CliError;

/// `%.{digits}g`: shortest of fixed and scientific notation, trailing zeros dropped.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if exp < -4 || exp >= digits as i32 {
        format!("{}e{}", trim_zeros(mantissa), exp)
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Table cell.
pub fn fmt12(x: f64) -> String {
    fmt_sig(x, 12)
}

/// Exact decimal form used by the model and dataset writers.
pub fn fmt17(x: f64) -> String {
    format!("{:.16e}", x)
}

/// CSV text with a header row; cells are written verbatim.
pub fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Non-blank, non-comment lines with 1-based line numbers.
struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    path: PathBuf,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str, path: &Path) -> Self {
        Lines {
            inner: text.lines().enumerate(),
            path: path.to_path_buf(),
            last: 0,
        }
    }

    fn error(&self, line: usize, reason: impl Into<String>) -> CliError {
        CliError::Parse {
            path: self.path.clone(),
            line,
            reason: reason.into(),
        }
    }

    fn next_line(&mut self) -> Option<(usize, &'a str)> {
        for (k, raw) in self.inner.by_ref() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            self.last = k + 1;
            return Some((k + 1, line));
        }
        None
    }

    fn expect_line(&mut self, what: &str) -> Result<(usize, &'a str), CliError> {
        let last = self.last;
        self.next_line()
            .ok_or_else(|| self.error(last + 1, format!("unexpected end of file, expected {what}")))
    }

    fn numbers(&mut self, count: usize, what: &str) -> Result<Vec<f64>, CliError> {
        let (line, text) = self.expect_line(what)?;
        let values = parse_numbers(text).map_err(|reason| self.error(line, reason))?;
        if values.len() != count {
            return Err(self.error(
                line,
                format!("expected {count} values for {what}, found {}", values.len()),
            ));
        }
        Ok(values)
    }

    fn finish(&mut self) -> Result<(), CliError> {
        match self.next_line() {
            Some((line, _)) => Err(self.error(line, "unexpected trailing content")),
            None => Ok(()),
        }
    }
}

fn parse_numbers(text: &str) -> Result<Vec<f64>, String> {
    text.split_whitespace()
        .map(|t| match t.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(format!("`{t}` is not a finite number")),
        })
        .collect()
}

fn parse_header(lines: &mut Lines<'_>, names: [&str; 2]) -> Result<(usize, usize), CliError> {
    let (line, text) = lines.expect_line("a header")?;
    let fields: Vec<&str> = text.split_whitespace().collect();
    let parsed: Vec<usize> = fields.iter().filter_map(|f| f.parse().ok()).collect();
    if fields.len() != 2 || parsed.len() != 2 {
        return Err(lines.error(
            line,
            format!("header must be `{} {}` (two non-negative integers)", names[0], names[1]),
        ));
    }
    Ok((parsed[0], parsed[1]))
}

/// Covariates and responses.
#[derive(Debug, Clone, PartialEq)]
pub struct DataFile {
    pub inputs: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

pub fn parse_dataset(text: &str, path: &Path) -> Result<DataFile, CliError> {
    let mut lines = Lines::new(text, path);
    let (m, d) = parse_header(&mut lines, ["m", "d"])?;
    if m == 0 || d == 0 {
        return Err(lines.error(lines.last, "m and d must be positive"));
    }
    let mut inputs = Vec::with_capacity(m);
    let mut y = Vec::with_capacity(m);
    for _ in 0..m {
        let mut row = lines.numbers(d + 1, "a sample (d covariates and y)")?;
        y.push(row.pop().expect("row has d + 1 values"));
        inputs.push(row);
    }
    lines.finish()?;
    Ok(DataFile { inputs, y })
}

pub fn read_dataset(path: &Path) -> Result<DataFile, CliError> {
    parse_dataset(&read_text(path)?, path)
}

pub fn write_dataset(inputs: &[Vec<f64>], y: &[f64]) -> String {
    let d = inputs.first().map_or(0, Vec::len);
    let mut out = format!("{} {}\n", inputs.len(), d);
    for (x, v) in inputs.iter().zip(y) {
        let mut fields: Vec<String> = x.iter().map(|&c| fmt17(c)).collect();
        fields.push(fmt17(*v));
        out.push_str(&fields.join(" "));
        out.push('\n');
    }
    out
}

/// Covariates for prediction: a dataset file with or without the `y` column.
pub fn parse_inputs(text: &str, path: &Path, d: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let mut lines = Lines::new(text, path);
    let (m, d_file) = parse_header(&mut lines, ["m", "d"])?;
    if d_file != d {
        return Err(lines.error(
            lines.last,
            format!("inputs have dimension {d_file}, the model expects {d}"),
        ));
    }
    let mut inputs = Vec::with_capacity(m);
    for _ in 0..m {
        let (line, text) = lines.expect_line("a sample")?;
        let mut row = parse_numbers(text).map_err(|reason| lines.error(line, reason))?;
        match row.len() {
            n if n == d => {}
            n if n == d + 1 => {
                row.pop();
            }
            n => {
                return Err(lines.error(line, format!("expected {d} or {} values, found {n}", d + 1)));
            }
        }
        inputs.push(row);
    }
    lines.finish()?;
    Ok(inputs)
}

pub fn parse_chain(text: &str, path: &Path) -> Result<TransitionKernel, CliError> {
    let mut lines = Lines::new(text, path);
    let (n, d) = parse_header(&mut lines, ["n", "d"])?;
    if n == 0 || d == 0 {
        return Err(lines.error(lines.last, "n and d must be positive"));
    }
    let mut probabilities = Vec::with_capacity(n * n);
    for _ in 0..n {
        probabilities.extend(lines.numbers(n, "a transition row")?);
    }
    let mut embedding = Vec::with_capacity(n);
    for _ in 0..n {
        embedding.push(lines.numbers(d, "an embedding row")?);
    }
    lines.finish()?;
    let matrix = DMatrix::from_row_slice(n, n, &probabilities);
    Ok(TransitionKernel::new(matrix, embedding)?)
}

pub fn read_chain(path: &Path) -> Result<TransitionKernel, CliError> {
    parse_chain(&read_text(path)?, path)
}

pub fn write_chain(chain: &TransitionKernel) -> String {
    let n = chain.n_states();
    let mut out = format!("{} {}\n", n, chain.dim());
    let matrix = chain.matrix();
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| fmt17(matrix[(i, j)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    for point in chain.embedding() {
        let row: Vec<String> = point.iter().map(|&c| fmt17(c)).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_model(model: &RmrModel) -> String {
    let config = model.config();
    let kernel = match *model.kernel() {
        HypothesisKernel::GaussianRbf { bandwidth } => format!("gaussian-rbf {}", fmt17(bandwidth)),
        HypothesisKernel::Laplacian { bandwidth } => format!("laplacian {}", fmt17(bandwidth)),
        HypothesisKernel::Polynomial { degree, offset } => {
            format!("polynomial {degree} {}", fmt17(offset))
        }
    };
    let q = match config.penalty {
        Penalty::L1 => 1,
        Penalty::L2 => 2,
    };
    let mut out = String::from("# modalmr model\n");
    out.push_str(&format!("m {}\n", model.alpha().len()));
    out.push_str(&format!("d {}\n", model.dim()));
    out.push_str(&format!("kernel {kernel}\n"));
    out.push_str(&format!("phi {}\n", model.phi().kind().name()));
    out.push_str(&format!("sigma {}\n", fmt17(config.sigma)));
    out.push_str(&format!("lambda {}\n", fmt17(config.lambda)));
    out.push_str(&format!("q {q}\n"));
    out.push_str(&format!("max-hq-iters {}\n", config.max_hq_iters));
    out.push_str(&format!("tol {}\n", fmt17(config.tol)));
    out.push_str(&format!("inner-max-iters {}\n", config.inner_max_iters));
    out.push_str(&format!("max-gradient-iters {}\n", config.max_gradient_iters));
    out.push_str("alpha\n");
    for a in model.alpha() {
        out.push_str(&fmt17(*a));
        out.push('\n');
    }
    out.push_str("inputs\n");
    for x in model.train_inputs() {
        let row: Vec<String> = x.iter().map(|&c| fmt17(c)).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_model(text: &str, path: &Path) -> Result<RmrModel, CliError> {
    let mut lines = Lines::new(text, path);
    let field = |lines: &mut Lines<'_>, key: &str| -> Result<(usize, Vec<String>), CliError> {
        let (line, text) = lines.expect_line(&format!("`{key}`"))?;
        let mut parts = text.split_whitespace();
        if parts.next() != Some(key) {
            return Err(lines.error(line, format!("expected `{key}`")));
        }
        Ok((line, parts.map(str::to_string).collect()))
    };
    let single = |lines: &Lines<'_>, line: usize, values: &[String], key: &str| -> Result<String, CliError> {
        match values {
            [v] => Ok(v.clone()),
            _ => Err(lines.error(line, format!("`{key}` takes one value"))),
        }
    };
    let number = |lines: &Lines<'_>, line: usize, v: &str| -> Result<f64, CliError> {
        v.parse::<f64>()
            .map_err(|_| lines.error(line, format!("`{v}` is not a number")))
    };
    let count = |lines: &Lines<'_>, line: usize, v: &str| -> Result<usize, CliError> {
        v.parse::<usize>()
            .map_err(|_| lines.error(line, format!("`{v}` is not a non-negative integer")))
    };

    let (line, v) = field(&mut lines, "m")?;
    let m = count(&lines, line, &single(&lines, line, &v, "m")?)?;
    let (line, v) = field(&mut lines, "d")?;
    let d = count(&lines, line, &single(&lines, line, &v, "d")?)?;
    if m == 0 || d == 0 {
        return Err(lines.error(line, "m and d must be positive"));
    }

    let (line, v) = field(&mut lines, "kernel")?;
    let kernel = match v.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["gaussian-rbf", h] => HypothesisKernel::gaussian_rbf(number(&lines, line, h)?)?,
        ["laplacian", h] => HypothesisKernel::laplacian(number(&lines, line, h)?)?,
        ["polynomial", degree, offset] => {
            let degree = count(&lines, line, degree)? as u32;
            HypothesisKernel::polynomial(degree, number(&lines, line, offset)?)?
        }
        _ => {
            return Err(lines.error(
                line,
                "kernel must be `gaussian-rbf h`, `laplacian h` or `polynomial degree offset`",
            ))
        }
    };

    let (line, v) = field(&mut lines, "phi")?;
    let name = single(&lines, line, &v, "phi")?;
    let phi = PhiKind::from_name(&name)
        .map(RepresentingFunction::new)
        .ok_or_else(|| lines.error(line, format!("unknown phi `{name}`")))?;

    let mut config = RmrConfig::default();
    let (line, v) = field(&mut lines, "sigma")?;
    config.sigma = number(&lines, line, &single(&lines, line, &v, "sigma")?)?;
    let (line, v) = field(&mut lines, "lambda")?;
    config.lambda = number(&lines, line, &single(&lines, line, &v, "lambda")?)?;
    let (line, v) = field(&mut lines, "q")?;
    let q = single(&lines, line, &v, "q")?;
    config.penalty = Penalty::from_name(&q).ok_or_else(|| lines.error(line, "q must be 1 or 2"))?;
    let (line, v) = field(&mut lines, "max-hq-iters")?;
    config.max_hq_iters = count(&lines, line, &single(&lines, line, &v, "max-hq-iters")?)?;
    let (line, v) = field(&mut lines, "tol")?;
    config.tol = number(&lines, line, &single(&lines, line, &v, "tol")?)?;
    let (line, v) = field(&mut lines, "inner-max-iters")?;
    config.inner_max_iters = count(&lines, line, &single(&lines, line, &v, "inner-max-iters")?)?;
    let (line, v) = field(&mut lines, "max-gradient-iters")?;
    config.max_gradient_iters = count(&lines, line, &single(&lines, line, &v, "max-gradient-iters")?)?;
    config.validate()?;

    let (line, v) = field(&mut lines, "alpha")?;
    if !v.is_empty() {
        return Err(lines.error(line, "`alpha` stands on its own line"));
    }
    let mut alpha = Vec::with_capacity(m);
    for _ in 0..m {
        alpha.push(lines.numbers(1, "a coefficient")?[0]);
    }
    let (line, v) = field(&mut lines, "inputs")?;
    if !v.is_empty() {
        return Err(lines.error(line, "`inputs` stands on its own line"));
    }
    let mut inputs = Vec::with_capacity(m);
    for _ in 0..m {
        inputs.push(lines.numbers(d, "a training input")?);
    }
    lines.finish()?;
    Ok(RmrModel::from_parts(alpha, inputs, kernel, phi, config, Vec::new())?)
}

pub fn read_model(path: &Path) -> Result<RmrModel, CliError> {
    parse_model(&read_text(path)?, path)
}

/// `key = value` pairs in file order, with their line numbers. Keys may use
/// `_` or `-`; they are returned with `-`. Repeated keys are an error.
pub fn parse_config(text: &str, path: &Path) -> Result<Vec<(String, String, usize)>, CliError> {
    let mut entries: Vec<(String, String, usize)> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let error = |reason: String| CliError::Parse {
            path: path.to_path_buf(),
            line: k + 1,
            reason,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| error("expected `key = value`".to_string()))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        let value = value.split_once(" #").map_or(value, |(v, _)| v.trim_end());
        if key.is_empty() || value.is_empty() {
            return Err(error("expected `key = value`".to_string()));
        }
        if entries.iter().any(|(existing, _, _)| *existing == key) {
            return Err(error(format!("key `{key}` given twice")));
        }
        entries.push((key, value.to_string(), k + 1));
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(fmt12(0.0), "0");
        assert_eq!(fmt12(-0.0), "0");
        assert_eq!(fmt12(0.1 + 0.2), "0.3");
        assert_eq!(fmt12(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt12(123456.0), "123456");
        assert_eq!(fmt12(1e6), "1000000");
        assert_eq!(fmt12(1e12), "1e12");
        assert_eq!(fmt12(1.5e-5), "1.5e-5");
        assert_eq!(fmt12(0.0001), "0.0001");
        assert_eq!(fmt12(-2.5), "-2.5");
        assert_eq!(fmt12(9.9999999999999), "10");
        assert_eq!(fmt12(f64::NAN), "nan");
    }

    #[test]
    fn exact_decimal_round_trip() {
        for x in [0.1, 1.0 / 3.0, -1e-300, 6.02214076e23, f64::MIN_POSITIVE, f64::MAX] {
            assert_eq!(fmt17(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn config_lines() {
        let text = "# defaults\nsigma = 0.5\nm_grid = 64,128  # sizes\n\nphi=gaussian\n";
        let entries = parse_config(text, Path::new("c.conf")).unwrap();
        let pairs: Vec<(&str, &str)> = entries.iter().map(|(k, v, _)| (k.as_str(), v.as_str())).collect();
        assert_eq!(pairs, [("sigma", "0.5"), ("m-grid", "64,128"), ("phi", "gaussian")]);
        assert_eq!(entries[1].2, 3);

        let err = parse_config("sigma 0.5\n", Path::new("c.conf")).unwrap_err();
        assert!(err.to_string().contains("c.conf:1"));
        assert!(parse_config("a = 1\na = 2\n", Path::new("c")).is_err());
    }

    #[test]
    fn dataset_errors_name_the_line() {
        let err = parse_dataset("2 1\n0.5 1.0\n0.7\n", Path::new("d.txt")).unwrap_err();
        assert!(err.to_string().starts_with("d.txt:3"), "{err}");
        let err = parse_dataset("2 1\n0.5 1.0\n", Path::new("d.txt")).unwrap_err();
        assert!(err.to_string().contains("end of file"), "{err}");
        let err = parse_dataset("2 1\n0.5 x\n0.7 1\n", Path::new("d.txt")).unwrap_err();
        assert!(err.to_string().contains("`x`"), "{err}");
        assert!(parse_dataset("1 1\n0 0\n9 9\n", Path::new("d")).is_err());
    }

    #[test]
    fn inputs_accept_optional_response_column() {
        let with_y = parse_inputs("2 1\n0.5 1.0\n0.7 2.0\n", Path::new("a"), 1).unwrap();
        let without = parse_inputs("2 1\n0.5\n0.7\n", Path::new("b"), 1).unwrap();
        assert_eq!(with_y, without);
        assert!(parse_inputs("1 2\n0.5 0.5\n", Path::new("c"), 1).is_err());
    }
}
