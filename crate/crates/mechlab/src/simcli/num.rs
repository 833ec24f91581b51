use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Scenario number: a JSON number, a decimal string or a fraction string such
/// as `"10/3"`. Serializes as a plain number.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Num(pub f64);

impl Num {
    pub fn parse(text: &str) -> Result<Self, String> {
        let text = text.trim();
        let value = match text.split_once('/') {
            Some((n, d)) => {
                let (n, d) = (decimal(n)?, decimal(d)?);
                if d == 0.0 {
                    return Err(format!("zero denominator in {text:?}"));
                }
                n / d
            }
            None => decimal(text)?,
        };
        if value.is_finite() {
            Ok(Self(value))
        } else {
            Err(format!("{text:?} is not a finite number"))
        }
    }
}

fn decimal(text: &str) -> Result<f64, String> {
    text.trim().parse::<f64>().map_err(|_| format!("{text:?} is not a decimal number"))
}

impl From<Num> for f64 {
    fn from(n: Num) -> f64 {
        n.0
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct NumVisitor;

        impl Visitor<'_> for NumVisitor {
            type Value = Num;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number, a decimal string or a fraction string")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Num, E> {
                Ok(Num(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Num, E> {
                Ok(Num(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Num, E> {
                Ok(Num(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Num, E> {
                Num::parse(v).map_err(E::custom)
            }
        }

        d.deserialize_any(NumVisitor)
    }
}

pub fn values(nums: &[Num]) -> Vec<f64> {
    nums.iter().map(|n| n.0).collect()
}

pub fn pair([lo, hi]: [Num; 2]) -> (f64, f64) {
    (lo.0, hi.0)
}
