//! JSON representation of matrices and vectors.
//!
//! Every matrix is written as
//! `{"rows": r, "cols": c, "data": [[row 0 ...], [row 1 ...], ...]}`
//! (row-major nested arrays with explicit dimensions). Signals are matrices
//! with one column per sample.

use nalgebra::DMatrix;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Version tag written into every configuration and exported artifact.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Vec<f64>>,
}

impl From<&DMatrix<f64>> for MatrixJson {
    fn from(m: &DMatrix<f64>) -> Self {
        MatrixJson {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
        }
    }
}

impl TryFrom<MatrixJson> for DMatrix<f64> {
    type Error = String;

    fn try_from(j: MatrixJson) -> Result<Self, String> {
        if j.data.len() != j.rows {
            return Err(format!(
                "matrix declares {} rows but has {}",
                j.rows,
                j.data.len()
            ));
        }
        if let Some(bad) = j.data.iter().position(|r| r.len() != j.cols) {
            return Err(format!(
                "matrix row {bad} has {} entries, expected {}",
                j.data[bad].len(),
                j.cols
            ));
        }
        Ok(DMatrix::from_fn(j.rows, j.cols, |i, k| j.data[i][k]))
    }
}

pub mod matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        MatrixJson::from(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let j = MatrixJson::deserialize(d)?;
        DMatrix::try_from(j).map_err(D::Error::custom)
    }
}

pub mod opt_matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Option<DMatrix<f64>>, s: S) -> Result<S::Ok, S::Error> {
        m.as_ref().map(MatrixJson::from).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<Option<DMatrix<f64>>, D::Error> {
        Option::<MatrixJson>::deserialize(d)?
            .map(|j| DMatrix::try_from(j).map_err(D::Error::custom))
            .transpose()
    }
}
