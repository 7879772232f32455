//! Serde adapters for dense real matrices stored as row-major arrays of
//! arrays, the layout used by model and report files.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::numkit::RMatrix;

pub fn to_rows(m: &RMatrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Builds a matrix from rows. `cols` is used when there are no rows so
/// that empty matrices keep their shape.
pub fn from_rows(rows: &[Vec<f64>], cols_if_empty: usize) -> Result<RMatrix, String> {
    let Some(first) = rows.first() else {
        return Ok(RMatrix::zeros(0, cols_if_empty));
    };
    let cols = first.len();
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
        return Err(format!("row {i} has {} entries, expected {cols}", r.len()));
    }
    Ok(RMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub fn serialize<S: Serializer>(m: &RMatrix, s: S) -> Result<S::Ok, S::Error> {
    to_rows(m).serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<RMatrix, D::Error> {
    let rows = Vec::<Vec<f64>>::deserialize(d)?;
    from_rows(&rows, 0).map_err(D::Error::custom)
}
