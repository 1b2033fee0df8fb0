//! Serialization helpers for extended-real values.

use serde::Serializer;

use crate::float::Real;

/// Serialize a possibly infinite scalar: finite values as numbers,
/// infinities and NaN as the strings `"inf"`, `"-inf"`, `"nan"` (plain JSON
/// numbers cannot represent them).
pub(crate) fn extended<F: Real, S: Serializer>(v: &F, ser: S) -> Result<S::Ok, S::Error> {
    let x = v.as_f64();
    if x.is_finite() {
        ser.serialize_f64(x)
    } else if x.is_nan() {
        ser.serialize_str("nan")
    } else if x > 0.0 {
        ser.serialize_str("inf")
    } else {
        ser.serialize_str("-inf")
    }
}
