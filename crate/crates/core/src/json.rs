//! JSON encoding of matrices: row-major nested arrays of `[re, im]` pairs.
//!
//! ```text
//! [[[1.0, 0.0], [0.0, -0.5]],
//!  [[0.0, 0.5], [2.0,  0.0]]]
//! ```
//!
//! Use the submodules with `#[serde(with = "...")]`.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::linalg::{cplx, CMat, CVec, RVec};
use crate::Real;

fn rows_of<T: Real>(m: &CMat<T>) -> Vec<Vec<[T; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

fn from_rows<T: Real>(rows: Vec<Vec<[T; 2]>>) -> Result<CMat<T>, String> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err("ragged matrix rows".into());
    }
    Ok(CMat::from_fn(nrows, ncols, |i, j| {
        let [re, im] = rows[i][j];
        cplx(re, im)
    }))
}

/// Encodes a matrix as a `serde_json::Value`-compatible structure.
pub fn encode<T: Real>(m: &CMat<T>) -> Vec<Vec<[T; 2]>> {
    rows_of(m)
}

pub fn decode<T: Real>(rows: Vec<Vec<[T; 2]>>) -> crate::Result<CMat<T>> {
    from_rows(rows).map_err(crate::Error::InvalidArgument)
}

pub mod cmat {
    use super::*;

    pub fn serialize<T: Real, S: Serializer>(m: &CMat<T>, s: S) -> Result<S::Ok, S::Error> {
        rows_of(m).serialize(s)
    }

    pub fn deserialize<'de, T: Real, D: Deserializer<'de>>(d: D) -> Result<CMat<T>, D::Error> {
        let rows = Vec::<Vec<[T; 2]>>::deserialize(d)?;
        from_rows(rows).map_err(D::Error::custom)
    }
}

/// `Option<CMat>`; `null` or an absent field (with `#[serde(default)]`) is `None`.
pub mod opt_cmat {
    use super::*;

    pub fn serialize<T: Real, S: Serializer>(m: &Option<CMat<T>>, s: S) -> Result<S::Ok, S::Error> {
        m.as_ref().map(rows_of).serialize(s)
    }

    pub fn deserialize<'de, T: Real, D: Deserializer<'de>>(d: D) -> Result<Option<CMat<T>>, D::Error> {
        match Option::<Vec<Vec<[T; 2]>>>::deserialize(d)? {
            Some(rows) => from_rows(rows).map(Some).map_err(D::Error::custom),
            None => Ok(None),
        }
    }
}

/// Complex vectors as a flat array of `[re, im]` pairs.
pub mod cvec {
    use super::*;

    pub fn serialize<T: Real, S: Serializer>(v: &CVec<T>, s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, T: Real, D: Deserializer<'de>>(d: D) -> Result<CVec<T>, D::Error> {
        let items = Vec::<[T; 2]>::deserialize(d)?;
        Ok(CVec::from_iterator(
            items.len(),
            items.into_iter().map(|[re, im]| cplx(re, im)),
        ))
    }
}

pub mod rvec {
    use super::*;

    pub fn serialize<T: Real, S: Serializer>(v: &RVec<T>, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, T: Real, D: Deserializer<'de>>(d: D) -> Result<RVec<T>, D::Error> {
        let items = Vec::<T>::deserialize(d)?;
        Ok(RVec::from_vec(items))
    }
}
