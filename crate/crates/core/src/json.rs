//! JSON schemas shared across the crate.
//!
//! Matrices serialize as `{"re": [[..]], "im": [[..]]}` in row-major order;
//! vectors as `{"re": [..], "im": [..]}`. Output written through
//! [`to_string`] renders every float with 17 significant digits so values
//! round-trip bit-exactly and reports are byte-stable.

use std::io;

use nalgebra::DVector;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::ser::Formatter;

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C64};

/// Compact JSON with floats printed as `{:.16e}`.
#[derive(Clone, Copy, Debug, Default)]
pub struct SigFigs17;

impl Formatter for SigFigs17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_writer<W: io::Write, T: Serialize + ?Sized>(writer: W, value: &T) -> Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(writer, SigFigs17);
    value.serialize(&mut ser)?;
    Ok(())
}

pub fn to_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    to_writer(&mut buf, value)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixJson {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&ComplexMatrix> for MatrixJson {
    fn from(m: &ComplexMatrix) -> Self {
        let rows = |f: fn(&C64) -> f64| {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect())
                .collect()
        };
        Self {
            re: rows(|z| z.re),
            im: rows(|z| z.im),
        }
    }
}

impl TryFrom<MatrixJson> for ComplexMatrix {
    type Error = Error;

    fn try_from(m: MatrixJson) -> Result<Self> {
        let rows = m.re.len();
        let cols = m.re.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("matrix must be nonempty".into()));
        }
        let ragged = m.re.iter().chain(&m.im).any(|r| r.len() != cols);
        if m.im.len() != rows || ragged {
            return Err(Error::DimensionMismatch(
                "matrix `re`/`im` rows must be rectangular and of equal shape".into(),
            ));
        }
        let out = ComplexMatrix::from_fn(rows, cols, |i, j| C64::new(m.re[i][j], m.im[i][j]));
        if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VectorJson {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl From<&DVector<C64>> for VectorJson {
    fn from(v: &DVector<C64>) -> Self {
        Self {
            re: v.iter().map(|z| z.re).collect(),
            im: v.iter().map(|z| z.im).collect(),
        }
    }
}

impl TryFrom<VectorJson> for DVector<C64> {
    type Error = Error;

    fn try_from(v: VectorJson) -> Result<Self> {
        if v.re.len() != v.im.len() || v.re.is_empty() {
            return Err(Error::DimensionMismatch(
                "vector `re`/`im` lengths differ or are empty".into(),
            ));
        }
        if v.re.iter().chain(&v.im).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(DVector::from_iterator(
            v.re.len(),
            v.re.iter().zip(&v.im).map(|(&re, &im)| C64::new(re, im)),
        ))
    }
}

/// `#[serde(with = "crate::json::matrix")]`
pub mod matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &ComplexMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson::from(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<ComplexMatrix, D::Error> {
        let raw = MatrixJson::deserialize(d)?;
        ComplexMatrix::try_from(raw).map_err(serde::de::Error::custom)
    }
}

/// `#[serde(with = "crate::json::matrix_list")]`
pub mod matrix_list {
    use super::*;

    pub fn serialize<S: Serializer>(ms: &[ComplexMatrix], s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(ms.iter().map(MatrixJson::from))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<ComplexMatrix>, D::Error> {
        Vec::<MatrixJson>::deserialize(d)?
            .into_iter()
            .map(|m| ComplexMatrix::try_from(m).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// `#[serde(with = "crate::json::vector")]`
pub mod vector {
    use super::*;

    pub fn serialize<S: Serializer>(v: &DVector<C64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        VectorJson::from(v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<DVector<C64>, D::Error> {
        let raw = VectorJson::deserialize(d)?;
        DVector::try_from(raw).map_err(serde::de::Error::custom)
    }
}
