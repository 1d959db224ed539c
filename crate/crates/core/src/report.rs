//! Serialization helpers shared by the JSON and CSV reports.

use num_complex::Complex64;
use serde::ser::SerializeStruct;
use serde::Serializer;

/// Writes a complex number as {"re": .., "im": .., "abs": ..}.
pub fn ser_complex<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
    let mut st = s.serialize_struct("Complex", 3)?;
    st.serialize_field("re", &z.re)?;
    st.serialize_field("im", &z.im)?;
    st.serialize_field("abs", &z.norm())?;
    st.end()
}
