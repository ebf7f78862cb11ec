//! Machine-readable run reports emitted by every command.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cloud::EmbeddingCloud;

/// Serde adapter: non-finite floats become the strings `"inf"`, `"-inf"`, `"nan"`.
pub mod f64_or_inf {
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;
    use std::fmt;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    struct V;

    impl Visitor<'_> for V {
        type Value = f64;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a number or \"inf\"/\"-inf\"/\"nan\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(V)
    }
}

/// JSON value for a float that may be infinite.
pub fn json_f64(v: f64) -> serde_json::Value {
    serde_json::to_value(Wrapped(v)).expect("float serializes")
}

#[derive(Serialize)]
struct Wrapped(#[serde(with = "f64_or_inf")] f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputInfo {
    pub path: String,
    pub label: String,
    pub count: usize,
    pub dim: usize,
}

impl InputInfo {
    pub fn of(path: impl Into<String>, cloud: &EmbeddingCloud) -> Self {
        Self {
            path: path.into(),
            label: cloud.label().to_string(),
            count: cloud.count(),
            dim: cloud.dim(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub inputs: Vec<InputInfo>,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub results: serde_json::Value,
    pub tool_version: String,
    pub wall_time_ms: u64,
}

impl RunReport {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            inputs: Vec::new(),
            parameters: BTreeMap::new(),
            results: serde_json::Value::Null,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_ms: 0,
        }
    }

    pub fn param(mut self, key: &str, value: impl Serialize) -> Self {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.parameters.insert(key.to_string(), v);
        self
    }

    pub fn input(mut self, path: impl Into<String>, cloud: &EmbeddingCloud) -> Self {
        self.inputs.push(InputInfo::of(path, cloud));
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Holder(#[serde(with = "f64_or_inf")] f64);

    #[test]
    fn infinities_round_trip() {
        for v in [1.5, 0.0, -3.0, f64::INFINITY, f64::NEG_INFINITY] {
            let s = serde_json::to_string(&Holder(v)).unwrap();
            let back: Holder = serde_json::from_str(&s).unwrap();
            assert_eq!(back.0, v, "{s}");
        }
        assert_eq!(serde_json::to_string(&Holder(f64::INFINITY)).unwrap(), "\"inf\"");
        assert!(serde_json::from_str::<Holder>("\"huge\"").is_err());
        assert_eq!(json_f64(f64::NEG_INFINITY), serde_json::json!("-inf"));
    }

    #[test]
    fn report_round_trip() {
        let cloud = EmbeddingCloud::new("c", 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let mut r = RunReport::new("fid").param("seed", 0u64).input("a.emb", &cloud);
        r.results = serde_json::json!({"fid": 0.1 + 0.2});
        let back: RunReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }
}
