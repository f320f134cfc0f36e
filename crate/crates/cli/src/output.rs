use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use spectramoment::io::matrix_vec;
use spectramoment::linalg::CMat;
use spectramoment::numerics::MatrixFunctionSamples;

use crate::commands::CliError;

pub fn write_text(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize") + "\n"
}

pub fn emit_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<(), CliError> {
    write_text(path, &to_json(value))
}

fn entry_label(i: usize, j: usize, m: usize) -> String {
    if m <= 10 {
        format!("{i}{j}")
    } else {
        format!("{i}_{j}")
    }
}

/// `theta,re_ij,im_ij,...` over the upper triangle `i ≤ j`.
pub fn spectrum_csv(samples: &MatrixFunctionSamples) -> String {
    let m = samples.rows();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i..m).map(move |j| (i, j))).collect();
    let mut out = String::from("theta");
    for &(i, j) in &pairs {
        let label = entry_label(i, j, m);
        write!(out, ",re_{label},im_{label}").unwrap();
    }
    out.push('\n');
    for (k, v) in samples.values().iter().enumerate() {
        write!(out, "{}", samples.grid().angle(k)).unwrap();
        for &(i, j) in &pairs {
            write!(out, ",{},{}", v[(i, j)].re, v[(i, j)].im).unwrap();
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
pub struct SpectrumJson {
    pub theta: Vec<f64>,
    #[serde(with = "matrix_vec")]
    pub values: Vec<CMat>,
}

impl From<&MatrixFunctionSamples> for SpectrumJson {
    fn from(s: &MatrixFunctionSamples) -> Self {
        Self { theta: s.grid().angles(), values: s.values().to_vec() }
    }
}
