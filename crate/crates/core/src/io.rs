//! Deterministic JSON and CSV output.
//!
//! Every float is written with 17 significant digits (`{:.16e}`), which round
//! trips any `f64` exactly and makes byte-identical output independent of the
//! shortest-representation algorithm.

use std::io;

use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;

use crate::error::{DreError, Result};
use crate::linalg::{matrix_from_rows, matrix_to_rows, BlockSymMat, SymMat};
use crate::semigroup::{Kind, SemigroupElement};

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

struct SigDigits;

impl Formatter for SigDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            writer.write_all(fmt_f64(value).as_bytes())
        } else {
            writer.write_all(b"null")
        }
    }
}

/// Compact JSON with fixed float formatting, newline terminated.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigDigits);
    value.serialize(&mut ser).expect("in-memory serialization cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON output is UTF-8")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemigroupDocument {
    pub kind: String,
    pub k: usize,
    pub n: usize,
    pub b11: Vec<Vec<f64>>,
    pub b12: Vec<Vec<f64>>,
    pub b22: Vec<Vec<f64>>,
}

impl SemigroupDocument {
    pub fn from_element(e: &SemigroupElement) -> SemigroupDocument {
        SemigroupDocument {
            kind: e.kind.to_string(),
            k: e.k,
            n: e.hessian.block_dim(),
            b11: e.hessian.b11.to_rows(),
            b12: matrix_to_rows(&e.hessian.b12),
            b22: e.hessian.b22.to_rows(),
        }
    }

    pub fn to_element(&self) -> Result<SemigroupElement> {
        let kind = match self.kind.as_str() {
            "Q" => Kind::Q,
            "Theta" => Kind::Theta,
            "Lambda" => Kind::Lambda,
            other => return Err(DreError::Parse(format!("unknown kind {other:?}"))),
        };
        let hessian = BlockSymMat::new(
            SymMat::from_rows(&self.b11)?,
            matrix_from_rows(&self.b12)?,
            SymMat::from_rows(&self.b22)?,
        )?;
        if hessian.block_dim() != self.n {
            return Err(DreError::Parse(format!(
                "declared n = {} but blocks are {}x{}",
                self.n,
                hessian.block_dim(),
                hessian.block_dim()
            )));
        }
        Ok(SemigroupElement { kind, k: self.k, hessian })
    }
}

pub fn parse_semigroup_document(text: &str) -> Result<SemigroupElement> {
    let doc: SemigroupDocument = serde_json::from_str(text).map_err(|e| DreError::Parse(e.to_string()))?;
    doc.to_element()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn floats_use_seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(to_json(&vec![1.0, -2.5]), "[1.0000000000000000e0,-2.5000000000000000e0]\n");
    }

    proptest! {
        #[test]
        fn formatted_floats_round_trip(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let back: f64 = serde_json::from_str(&to_json(&v)).unwrap();
            prop_assert_eq!(back.to_bits(), v.to_bits());
        }
    }
}
