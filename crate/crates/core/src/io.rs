//! JSON and CSV file formats.
//!
//! ```text
//! distribution  {"alphabet": ["a","b"], "probs": [0.5, 0.5]}
//! sample        {"alphabet": ["a","b"], "observations": ["a","b","b"]}
//!               or CSV: one label per line, optional header line
//! family        {"kind": "alpha_power_law", "alpha": 2.0, "q": [...],
//!                "f": [[...], ...], "alphabet": [...]}
//! linear family {"f": [[...], ...], "a": [...]}
//! ```
//!
//! Labels may be strings or numbers; numbers are read as their decimal text.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::family::{FamilyKind, FamilySpec, LinearFamilySpec};
use crate::measures::{empirical, Alpha, Alphabet, Distribution, SampleData};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))
}

fn parse<'a, T: Deserialize<'a>>(text: &'a str, path: &Path) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

fn label(v: &Value) -> Result<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        other => Err(Error::Input(format!("label must be a string or number, got {other}"))),
    }
}

fn alphabet_of(labels: Option<&[Value]>, m: usize) -> Result<Alphabet> {
    match labels {
        Some(l) => {
            if l.len() != m {
                return Err(Error::Dimension(format!("alphabet has {} labels, expected {m}", l.len())));
            }
            Alphabet::new(l.iter().map(label).collect::<Result<Vec<_>>>()?)
        }
        None => Alphabet::numeric(m),
    }
}

#[derive(Deserialize)]
struct DistributionFile {
    alphabet: Option<Vec<Value>>,
    probs: Vec<f64>,
}

pub fn load_distribution(path: &Path) -> Result<(Alphabet, Distribution)> {
    let text = read(path)?;
    let file: DistributionFile = parse(&text, path)?;
    let alphabet = alphabet_of(file.alphabet.as_deref(), file.probs.len())?;
    Ok((alphabet, Distribution::new(file.probs)?))
}

#[derive(Deserialize, Serialize)]
struct SampleFile {
    alphabet: Option<Vec<Value>>,
    observations: Vec<Value>,
}

/// Reads a JSON or CSV sample against `alphabet`.
pub fn load_sample(path: &Path, alphabet: &Alphabet) -> Result<SampleData> {
    let text = read(path)?;
    if text.trim_start().starts_with('{') {
        let file: SampleFile = parse(&text, path)?;
        if let Some(labels) = &file.alphabet {
            let own = alphabet_of(Some(labels), labels.len())?;
            if own != *alphabet {
                return Err(Error::Input(format!(
                    "{}: sample alphabet differs from the model alphabet",
                    path.display()
                )));
            }
        }
        let obs = file.observations.iter().map(label).collect::<Result<Vec<_>>>()?;
        return empirical(&obs, alphabet);
    }
    parse_csv(&text, alphabet)
}

/// One label per line; a first line outside the alphabet is a header.
pub fn parse_csv(text: &str, alphabet: &Alphabet) -> Result<SampleData> {
    let mut lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    if let Some(first) = lines.first() {
        if alphabet.index_of(first).is_none() {
            lines.remove(0);
        }
    }
    empirical(&lines, alphabet)
}

pub fn sample_json(sample: &SampleData) -> Value {
    serde_json::json!({
        "alphabet": sample.alphabet().symbols(),
        "observations": sample.labels(),
    })
}

#[derive(Deserialize)]
struct FamilyFile {
    kind: String,
    alpha: Option<f64>,
    q: Vec<f64>,
    f: Vec<Vec<f64>>,
    alphabet: Option<Vec<Value>>,
}

fn matrix(rows: &[Vec<f64>], m: usize) -> Result<DMatrix<f64>> {
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::Dimension(format!("every statistic row needs {m} entries")));
    }
    Ok(DMatrix::from_fn(rows.len(), m, |i, j| rows[i][j]))
}

pub fn load_family(path: &Path) -> Result<(Alphabet, FamilySpec)> {
    let text = read(path)?;
    let file: FamilyFile = parse(&text, path)?;
    let kind: FamilyKind = file.kind.parse()?;
    let m = file.q.len();
    let alphabet = alphabet_of(file.alphabet.as_deref(), m)?;
    let alpha = Alpha::new(file.alpha.unwrap_or(1.0))?;
    let spec = FamilySpec::new(kind, Distribution::new(file.q)?, matrix(&file.f, m)?, alpha)?;
    Ok((alphabet, spec))
}

#[derive(Deserialize)]
struct LinearFile {
    f: Vec<Vec<f64>>,
    a: Vec<f64>,
}

pub fn load_linear(path: &Path, m: usize) -> Result<LinearFamilySpec> {
    let text = read(path)?;
    let file: LinearFile = parse(&text, path)?;
    LinearFamilySpec::new(matrix(&file.f, m)?, file.a)
}
