//! JSON interchange for models.
//!
//! Complex numbers are `[re, im]` pairs and matrices are row-major nested
//! arrays. A model file looks like:
//!
//! ```json
//! {
//!   "version": "cwcu-model-v1",
//!   "kind": "linear",
//!   "n": 2, "m": 3,
//!   "H": [[[1, 0], [0, 0]], ...],
//!   "mean_x": [[0, 0], [0, 0]],
//!   "C_xx": [...], "C_nn": [...]
//! }
//! ```
//!
//! `"kind": "joint_gaussian"` files carry `mean_x`, `mean_y`, `C_xx`, `C_xy`
//! and `C_yy` instead.

use serde::{Deserialize, Serialize};

use crate::error::{CwcuError, Result};
use crate::linalg::{c64, CMatrix, CVector};
use crate::model::{JointGaussianModel, LinearModel};

pub const MODEL_VERSION: &str = "cwcu-model-v1";

/// serde adapters for complex scalars, vectors and matrices.
pub mod serde_complex {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::linalg::{CMatrix, CVector};

    pub fn pair(z: &Complex64) -> [f64; 2] {
        [z.re, z.im]
    }

    pub fn vector_pairs(v: &CVector) -> Vec<[f64; 2]> {
        v.iter().map(pair).collect()
    }

    pub fn matrix_rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
        m.row_iter()
            .map(|row| row.iter().map(pair).collect())
            .collect()
    }

    pub mod scalar {
        use super::*;

        pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
            pair(z).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
            let [re, im] = <[f64; 2]>::deserialize(d)?;
            Ok(Complex64::new(re, im))
        }
    }

    pub mod vector {
        use super::*;

        pub fn serialize<S: Serializer>(v: &CVector, s: S) -> Result<S::Ok, S::Error> {
            vector_pairs(v).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CVector, D::Error> {
            let pairs = Vec::<[f64; 2]>::deserialize(d)?;
            Ok(CVector::from_iterator(
                pairs.len(),
                pairs.iter().map(|&[re, im]| Complex64::new(re, im)),
            ))
        }
    }

    pub mod matrix {
        use super::*;

        pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> Result<S::Ok, S::Error> {
            matrix_rows(m).serialize(s)
        }
    }

    pub mod option_matrix {
        use super::*;

        pub fn serialize<S: Serializer>(m: &Option<CMatrix>, s: S) -> Result<S::Ok, S::Error> {
            m.as_ref().map(matrix_rows).serialize(s)
        }
    }
}

type Rows = Vec<Vec<[f64; 2]>>;
type Pairs = Vec<[f64; 2]>;

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ModelBody {
    Linear {
        n: usize,
        m: usize,
        #[serde(rename = "H")]
        h: Rows,
        mean_x: Pairs,
        #[serde(rename = "C_xx")]
        cxx: Rows,
        #[serde(rename = "C_nn")]
        cnn: Rows,
    },
    JointGaussian {
        n: usize,
        m: usize,
        mean_x: Pairs,
        mean_y: Pairs,
        #[serde(rename = "C_xx")]
        cxx: Rows,
        #[serde(rename = "C_xy")]
        cxy: Rows,
        #[serde(rename = "C_yy")]
        cyy: Rows,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    version: String,
    #[serde(flatten)]
    body: ModelBody,
}

/// A model read from JSON.
#[derive(Clone, Debug)]
pub enum LoadedModel {
    Linear(LinearModel),
    JointGaussian(JointGaussianModel),
}

fn to_vector(field: &str, pairs: &Pairs, len: usize) -> Result<CVector> {
    if pairs.len() != len {
        return Err(CwcuError::ModelFormat(format!(
            "{field}: expected {len} entries, got {}",
            pairs.len()
        )));
    }
    Ok(CVector::from_iterator(
        len,
        pairs.iter().map(|&[re, im]| c64(re, im)),
    ))
}

fn to_matrix(field: &str, rows: &Rows, nrows: usize, ncols: usize) -> Result<CMatrix> {
    if rows.len() != nrows {
        return Err(CwcuError::ModelFormat(format!(
            "{field}: expected {nrows} rows, got {}",
            rows.len()
        )));
    }
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(CwcuError::ModelFormat(format!(
            "{field}: row {i} has {} entries, expected {ncols}",
            row.len()
        )));
    }
    Ok(CMatrix::from_row_iterator(
        nrows,
        ncols,
        rows.iter().flatten().map(|&[re, im]| c64(re, im)),
    ))
}

/// Parses and validates a model file.
pub fn parse_model(text: &str) -> Result<LoadedModel> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| CwcuError::ModelParse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if file.version != MODEL_VERSION {
        return Err(CwcuError::ModelFormat(format!(
            "unsupported version {:?}, expected {MODEL_VERSION:?}",
            file.version
        )));
    }
    match file.body {
        ModelBody::Linear {
            n,
            m,
            h,
            mean_x,
            cxx,
            cnn,
        } => Ok(LoadedModel::Linear(LinearModel::new(
            to_matrix("H", &h, m, n)?,
            to_vector("mean_x", &mean_x, n)?,
            to_matrix("C_xx", &cxx, n, n)?,
            to_matrix("C_nn", &cnn, m, m)?,
        )?)),
        ModelBody::JointGaussian {
            n,
            m,
            mean_x,
            mean_y,
            cxx,
            cxy,
            cyy,
        } => Ok(LoadedModel::JointGaussian(JointGaussianModel::new(
            to_vector("mean_x", &mean_x, n)?,
            to_vector("mean_y", &mean_y, m)?,
            to_matrix("C_xx", &cxx, n, n)?,
            to_matrix("C_xy", &cxy, n, m)?,
            to_matrix("C_yy", &cyy, m, m)?,
        )?)),
    }
}

pub fn linear_model_to_json(model: &LinearModel) -> String {
    use serde_complex::{matrix_rows, vector_pairs};
    let file = ModelFile {
        version: MODEL_VERSION.to_string(),
        body: ModelBody::Linear {
            n: model.n(),
            m: model.m(),
            h: matrix_rows(model.h()),
            mean_x: vector_pairs(model.mean_x()),
            cxx: matrix_rows(model.cxx()),
            cnn: matrix_rows(model.cnn()),
        },
    };
    serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
}

pub fn joint_model_to_json(model: &JointGaussianModel) -> String {
    use serde_complex::{matrix_rows, vector_pairs};
    let file = ModelFile {
        version: MODEL_VERSION.to_string(),
        body: ModelBody::JointGaussian {
            n: model.n(),
            m: model.m(),
            mean_x: vector_pairs(model.mean_x()),
            mean_y: vector_pairs(model.mean_y()),
            cxx: matrix_rows(model.cxx()),
            cxy: matrix_rows(model.cxy()),
            cyy: matrix_rows(model.cyy()),
        },
    };
    serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
}
