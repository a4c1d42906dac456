//! Serde adapters for limits that may be infinite. JSON has no infinity, so
//! an unbounded limit travels as `null`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

macro_rules! scalar {
    ($name:ident, $inf:expr) => {
        pub mod $name {
            use super::*;

            pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
                finite(*v).serialize(s)
            }

            pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
                Ok(Option::<f64>::deserialize(d)?.unwrap_or($inf))
            }
        }
    };
}

scalar!(above, f64::INFINITY);
scalar!(below, f64::NEG_INFINITY);

/// Upper limits, element by element.
pub mod above_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|&x| finite(x)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let v = Vec::<Option<f64>>::deserialize(d)?;
        Ok(v.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect())
    }
}

#[cfg(test)]
mod tests {
    use serde::{Deserialize, Serialize};

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Limits {
        #[serde(with = "super::above")]
        hi: f64,
        #[serde(with = "super::below")]
        lo: f64,
        #[serde(with = "super::above_vec")]
        all: Vec<f64>,
    }

    #[test]
    fn infinities_round_trip_through_json() {
        let v = Limits {
            hi: f64::INFINITY,
            lo: f64::NEG_INFINITY,
            all: vec![1.5, f64::INFINITY],
        };
        let text = serde_json::to_string(&v).unwrap();
        assert_eq!(text, r#"{"hi":null,"lo":null,"all":[1.5,null]}"#);
        assert_eq!(serde_json::from_str::<Limits>(&text).unwrap(), v);
    }
}
