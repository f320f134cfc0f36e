//! JSON interchange.
//!
//! Matrices are row-major arrays of rows. Complex entries are `[re, im]`
//! pairs; plain numbers are read as real entries, and a bare number is read
//! as a `1 x 1` matrix. Output always uses pairs.

use std::fs;
use std::path::Path;

use serde::de::{self, DeserializeOwned};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::filterbank::FilterBank;
use crate::linalg::{c, CMat};

#[derive(Deserialize)]
#[serde(untagged)]
enum EntryRepr {
    Real(f64),
    Complex([f64; 2]),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MatrixRepr {
    Scalar(EntryRepr),
    Rows(Vec<Vec<EntryRepr>>),
}

fn rows_of(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

fn from_repr(repr: MatrixRepr) -> std::result::Result<CMat, String> {
    let rows = match repr {
        MatrixRepr::Scalar(e) => vec![vec![e]],
        MatrixRepr::Rows(rows) => rows,
    };
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 {
        return Err("matrix must have at least one row and one column".into());
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(format!("row {i} has {} entries, expected {ncols}", r.len()));
    }
    let mut out = CMat::zeros(rows.len(), ncols);
    for (i, row) in rows.into_iter().enumerate() {
        for (j, e) in row.into_iter().enumerate() {
            out[(i, j)] = match e {
                EntryRepr::Real(x) => c(x, 0.0),
                EntryRepr::Complex([re, im]) => c(re, im),
            };
        }
    }
    Ok(out)
}

/// `#[serde(with = "matrix")]` for a `CMat` field.
pub mod matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> std::result::Result<S::Ok, S::Error> {
        rows_of(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CMat, D::Error> {
        from_repr(MatrixRepr::deserialize(d)?).map_err(de::Error::custom)
    }
}

/// `#[serde(with = "matrix_opt")]` for an `Option<CMat>` field.
pub mod matrix_opt {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Option<CMat>, s: S) -> std::result::Result<S::Ok, S::Error> {
        m.as_ref().map(rows_of).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<CMat>, D::Error> {
        Option::<MatrixRepr>::deserialize(d)?.map(from_repr).transpose().map_err(de::Error::custom)
    }
}

/// `#[serde(with = "matrix_vec")]` for a `Vec<CMat>` field.
pub mod matrix_vec {
    use super::*;

    pub fn serialize<S: Serializer>(ms: &[CMat], s: S) -> std::result::Result<S::Ok, S::Error> {
        ms.iter().map(rows_of).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<CMat>, D::Error> {
        Vec::<MatrixRepr>::deserialize(d)?
            .into_iter()
            .map(from_repr)
            .collect::<std::result::Result<_, _>>()
            .map_err(de::Error::custom)
    }
}

/// A bare JSON matrix, as used for `Σ` and `Λ` files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JsonMatrix(#[serde(with = "matrix")] pub CMat);

/// `{"A": ..., "B": ...}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterBankSpec {
    #[serde(rename = "A", with = "matrix")]
    pub a: CMat,
    #[serde(rename = "B", with = "matrix")]
    pub b: CMat,
}

impl FilterBankSpec {
    pub fn build(self) -> Result<FilterBank> {
        FilterBank::new(self.a, self.b)
    }
}

impl From<&FilterBank> for FilterBankSpec {
    fn from(fb: &FilterBank) -> Self {
        Self { a: fb.a().clone(), b: fb.b().clone() }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", path.display())))
}

pub fn read_matrix(path: &Path) -> Result<CMat> {
    read_json::<JsonMatrix>(path).map(|m| m.0)
}

pub fn read_filter_bank(path: &Path) -> Result<FilterBank> {
    read_json::<FilterBankSpec>(path)?.build()
}
