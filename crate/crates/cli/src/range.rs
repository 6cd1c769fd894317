//! Parameter value lists.
//!
//! A value is either a single number, a comma-separated list, or `a:b:n`, which
//! expands to `n` evenly spaced points from `a` to `b` inclusive.

use crate::error::CliError;

pub fn parse_values(s: &str) -> Result<Vec<f64>, CliError> {
    let s = s.trim();
    if s.is_empty() {
        return Err(CliError::Config("empty value list".into()));
    }
    if s.contains(':') {
        return parse_range(s);
    }
    s.split(',').map(|p| parse_number(p.trim())).collect()
}

fn parse_number(s: &str) -> Result<f64, CliError> {
    let v: f64 = s.parse().map_err(|_| CliError::Config(format!("not a number: {s:?}")))?;
    if !v.is_finite() {
        return Err(CliError::Config(format!("not a finite number: {s:?}")));
    }
    Ok(v)
}

fn parse_range(s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, n] = parts[..] else {
        return Err(CliError::Config(format!("range must be a:b:n, got {s:?}")));
    };
    let (a, b) = (parse_number(a.trim())?, parse_number(b.trim())?);
    let n: usize = n
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("range count must be a positive integer in {s:?}")))?;
    match n {
        0 => Err(CliError::Config(format!("range count must be positive in {s:?}"))),
        1 if a != b => Err(CliError::Config(format!("a single-point range needs a == b in {s:?}"))),
        1 => Ok(vec![a]),
        _ => Ok((0..n)
            .map(|i| if i == n - 1 { b } else { a + (b - a) * i as f64 / (n - 1) as f64 })
            .collect()),
    }
}
