//! Serde adapters encoding `f64` as decimal strings with 17 significant digits,
//! which round-trip every finite value bit for bit.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serializer};

pub fn encode(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn decode(s: &str) -> Result<f64, std::num::ParseFloatError> {
    s.trim().parse()
}

pub mod scalar {
    use super::*;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&encode(*x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let s = String::deserialize(d)?;
        decode(&s).map_err(D::Error::custom)
    }
}

pub mod vec {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for x in v {
            seq.serialize_element(&encode(*x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| decode(s).map_err(D::Error::custom))
            .collect()
    }
}

pub mod map {
    use super::*;
    use serde::ser::SerializeMap;
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(m: &BTreeMap<String, Vec<f64>>, s: S) -> Result<S::Ok, S::Error> {
        let mut out = s.serialize_map(Some(m.len()))?;
        for (k, v) in m {
            let enc: Vec<String> = v.iter().map(|x| encode(*x)).collect();
            out.serialize_entry(k, &enc)?;
        }
        out.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, Vec<f64>>, D::Error> {
        BTreeMap::<String, Vec<String>>::deserialize(d)?
            .into_iter()
            .map(|(k, v)| {
                let vals = v
                    .iter()
                    .map(|s| decode(s).map_err(D::Error::custom))
                    .collect::<Result<Vec<f64>, _>>()?;
                Ok((k, vals))
            })
            .collect()
    }
}
