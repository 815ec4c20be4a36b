//! JSON serialization for matrices and channels.
//!
//! Matrices serialize as `{rows, cols, re, im}` with row-major entry arrays;
//! channels as `{dim, representation, matrix}` where the representation is
//! `"choi"` or `"liouville"`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::channel::{Channel, Representation};
use super::matrix::{zeros, CMatrix};
use crate::error::{QvdError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl From<&CMatrix> for MatrixJson {
    fn from(m: &CMatrix) -> Self {
        let (rows, cols) = (m.nrows(), m.ncols());
        let mut re = Vec::with_capacity(rows * cols);
        let mut im = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                re.push(m[(i, j)].re);
                im.push(m[(i, j)].im);
            }
        }
        Self { rows, cols, re, im }
    }
}

impl MatrixJson {
    pub fn to_matrix(&self) -> Result<CMatrix> {
        let n = self.rows * self.cols;
        if self.re.len() != n || self.im.len() != n {
            return Err(QvdError::Config(format!(
                "matrix payload has {} real / {} imaginary entries, expected {n}",
                self.re.len(),
                self.im.len()
            )));
        }
        let mut m = zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let k = i * self.cols + j;
                m[(i, j)] = Complex64::new(self.re[k], self.im[k]);
            }
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelJson {
    pub dim: usize,
    pub representation: String,
    pub matrix: MatrixJson,
}

impl ChannelJson {
    pub fn from_channel(c: &Channel, repr: Representation) -> Result<Self> {
        let (name, m) = match repr {
            Representation::Choi => ("choi", c.choi_matrix()?),
            Representation::Liouville => ("liouville", c.liouville_matrix()?),
            // Kraus is a list, not a single matrix; serialize via Choi.
            Representation::Kraus => ("choi", c.choi_matrix()?),
        };
        Ok(Self {
            dim: c.dim(),
            representation: name.to_string(),
            matrix: MatrixJson::from(&m),
        })
    }

    pub fn to_channel(&self) -> Result<Channel> {
        let m = self.matrix.to_matrix()?;
        match self.representation.as_str() {
            "choi" => Channel::from_choi(m),
            "liouville" => Channel::from_liouville(m),
            other => Err(QvdError::Config(format!(
                "unknown channel representation {other:?}"
            ))),
        }
    }
}
