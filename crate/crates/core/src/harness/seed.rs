//! Serde helpers for 64-bit unsigned seeds. TOML integers are signed, so
//! seeds above `i64::MAX` are written as strings.

use serde::{de, Deserialize, Deserializer, Serializer};

pub fn serialize<S: Serializer>(seed: &u64, s: S) -> Result<S::Ok, S::Error> {
    match i64::try_from(*seed) {
        Ok(v) => s.serialize_i64(v),
        Err(_) => s.serialize_str(&seed.to_string()),
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Raw {
    Int(i64),
    Str(String),
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
    match Raw::deserialize(d)? {
        Raw::Int(v) => u64::try_from(v).map_err(|_| de::Error::custom(format!("seed {v} is negative"))),
        Raw::Str(s) => s
            .parse()
            .map_err(|_| de::Error::custom(format!("seed {s:?} is not a u64"))),
    }
}
