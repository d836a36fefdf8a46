//! Input documents: inline JSON or `@path`.

use std::fs;

use bmcurrent::linalg::ExponentMatrix;
use bmcurrent::structure::MbSpec;
use bmcurrent::testform::{parse_testform, TestForm};
use bmcurrent::Error;
use serde::Deserialize;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixDoc {
    p: usize,
    n: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<i64>>,
}

/// The argument itself, or the contents of the file it names after `@`.
pub fn read_arg(arg: &str) -> Result<String, Error> {
    match arg.strip_prefix('@') {
        Some(path) => fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("cannot read {path}: {e}"))),
        None => Ok(arg.to_string()),
    }
}

pub fn matrix(arg: &str) -> Result<ExponentMatrix, Error> {
    let doc: MatrixDoc =
        serde_json::from_str(&read_arg(arg)?).map_err(|e| Error::InvalidMatrix(format!("matrix document: {e}")))?;
    ExponentMatrix::from_signed(doc.p, doc.n, &doc.a)
}

pub fn testform(arg: &str) -> Result<TestForm, Error> {
    parse_testform(&read_arg(arg)?)
}

pub fn mb_spec(arg: &str) -> Result<MbSpec, Error> {
    let spec: MbSpec =
        serde_json::from_str(&read_arg(arg)?).map_err(|e| Error::InvalidInput(format!("MB spec document: {e}")))?;
    spec.validate()?;
    Ok(spec)
}

/// Comma-separated list of finite floats.
pub fn float_list(raw: &str) -> Result<Vec<f64>, Error> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::InvalidInput(format!("bad number {s:?}")))
        })
        .collect()
}

pub fn positive(name: &str, v: f64) -> Result<f64, Error> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidInput(format!("--{name} must be positive, got {v}")))
    }
}
