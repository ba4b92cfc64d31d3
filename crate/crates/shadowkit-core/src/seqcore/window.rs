use core::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// Inclusive integer index range standing in for `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawWindow")]
pub struct Window {
    pub lo: i64,
    pub hi: i64,
}

#[derive(Deserialize)]
struct RawWindow {
    lo: i64,
    hi: i64,
}

impl TryFrom<RawWindow> for Window {
    type Error = Error;
    fn try_from(r: RawWindow) -> Result<Self> {
        Window::new(r.lo, r.hi)
    }
}

impl Window {
    pub fn new(lo: i64, hi: i64) -> Result<Self> {
        if lo > hi {
            return Err(Error::InvalidInput(alloc::format!("window lo {lo} > hi {hi}")));
        }
        Ok(Window { lo, hi })
    }

    /// `[-n, n]`.
    pub fn symmetric(n: usize) -> Self {
        Window { lo: -(n as i64), hi: n as i64 }
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, i: i64) -> bool {
        i >= self.lo && i <= self.hi
    }

    /// Storage position of index `i`, if inside.
    pub fn pos(&self, i: i64) -> Option<usize> {
        self.contains(i).then(|| (i - self.lo) as usize)
    }

    pub fn index(&self, pos: usize) -> i64 {
        self.lo + pos as i64
    }

    pub fn indices(&self) -> impl Iterator<Item = i64> {
        self.lo..=self.hi
    }
}

/// The exponent of an `l^p` norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormExp {
    One,
    Two,
    Inf,
    /// A finite exponent strictly between 1 and infinity, other than 2.
    P(f64),
}

impl NormExp {
    /// Accepts any `p` in `[1, inf]`.
    pub fn from_f64(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidInput(alloc::format!("norm exponent {p} outside [1, inf]")));
        }
        Ok(if p == 1.0 {
            NormExp::One
        } else if p == 2.0 {
            NormExp::Two
        } else if p.is_infinite() {
            NormExp::Inf
        } else {
            NormExp::P(p)
        })
    }

    pub fn value(&self) -> f64 {
        match *self {
            NormExp::One => 1.0,
            NormExp::Two => 2.0,
            NormExp::Inf => f64::INFINITY,
            NormExp::P(p) => p,
        }
    }

    /// The `l^p` norm of a coefficient slice.
    pub fn norm(&self, c: &[f64]) -> f64 {
        match *self {
            NormExp::Inf => c.iter().fold(0.0, |m, x| m.max(libm::fabs(*x))),
            NormExp::One => c.iter().map(|x| libm::fabs(*x)).sum(),
            NormExp::Two => {
                // scaled to avoid overflow on huge witnesses
                let s = c.iter().fold(0.0f64, |m, x| m.max(libm::fabs(*x)));
                if s == 0.0 || !s.is_finite() {
                    return s;
                }
                let acc: f64 = c.iter().map(|x| (x / s) * (x / s)).sum();
                s * libm::sqrt(acc)
            }
            NormExp::P(p) => {
                let s = c.iter().fold(0.0f64, |m, x| m.max(libm::fabs(*x)));
                if s == 0.0 || !s.is_finite() {
                    return s;
                }
                let acc: f64 = c.iter().map(|x| libm::pow(libm::fabs(*x) / s, p)).sum();
                s * libm::pow(acc, 1.0 / p)
            }
        }
    }
}

impl fmt::Display for NormExp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormExp::Inf => write!(f, "inf"),
            other => write!(f, "{}", other.value()),
        }
    }
}

impl Serialize for NormExp {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        match self {
            NormExp::Inf => s.serialize_str("inf"),
            other => s.serialize_f64(other.value()),
        }
    }
}

impl<'de> Deserialize<'de> for NormExp {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = NormExp;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number >= 1 or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> core::result::Result<NormExp, E> {
                NormExp::from_f64(v).map_err(E::custom)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> core::result::Result<NormExp, E> {
                self.visit_f64(v as f64)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> core::result::Result<NormExp, E> {
                self.visit_f64(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> core::result::Result<NormExp, E> {
                match v {
                    "inf" | "infinity" | "Inf" | "Infinity" => Ok(NormExp::Inf),
                    other => other
                        .parse::<f64>()
                        .map_err(E::custom)
                        .and_then(|x| NormExp::from_f64(x).map_err(E::custom)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// Serde helper for reals that may be infinite (written as `"inf"`).
pub mod ext_f64 {
    use super::*;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> core::result::Result<S::Ok, S::Error> {
        if x.is_infinite() {
            s.serialize_str(if *x > 0.0 { "inf" } else { "-inf" })
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else {
            s.serialize_f64(*x)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> core::result::Result<f64, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = f64;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> core::result::Result<f64, E> {
                Ok(v)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> core::result::Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> core::result::Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> core::result::Result<f64, E> {
                match v {
                    "inf" => Ok(f64::INFINITY),
                    "-inf" => Ok(f64::NEG_INFINITY),
                    "nan" => Ok(f64::NAN),
                    _ => v.parse().map_err(E::custom),
                }
            }
        }
        d.deserialize_any(V)
    }
}
