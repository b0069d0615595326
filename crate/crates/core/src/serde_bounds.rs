//! Serde adapters for bounds that may be infinite. JSON has no infinity,
//! so an unbounded side is written as `null`.

macro_rules! bound_adapter {
    ($name:ident, $inf:expr) => {
        pub mod $name {
            use serde::{Deserialize, Deserializer, Serializer};

            pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
                if v.is_infinite() {
                    s.serialize_none()
                } else {
                    s.serialize_f64(*v)
                }
            }

            pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
                Ok(Option::<f64>::deserialize(d)?.unwrap_or($inf))
            }
        }
    };
}

bound_adapter!(lower, f64::NEG_INFINITY);
bound_adapter!(upper, f64::INFINITY);
