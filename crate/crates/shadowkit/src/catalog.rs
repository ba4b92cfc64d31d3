//! Systems addressable by name, each with the certificate it ships with.
//!
//! | name | kind | parameters |
//! |---|---|---|
//! | `weighted_shift_linear` | map | `threshold` (split index, default 0) |
//! | `weighted_shift_tanh` | map | `threshold` |
//! | `ms_product` | map | `lambda1`, `lambda2`, `cert_horizon` |
//! | `linear_no_ed` | operator sequence | `a`, `b` (interval, default -10, 10) |
//! | `conjugated:<map>` | map | `eps` (sine amplitude, default 0.05) plus the base parameters |

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use shadowkit_core::clstruct::{
    ms_certificate, no_ed_certificate, shift_certificate, transported_certificate, CLCertificate,
};
use shadowkit_core::seqcore::{NormExp, OperatorSeq, SeqVec, Window};
use shadowkit_core::systems::{conjugate, make_linear_example_seq, make_ms_product, CoordSine, Diffeo, MsParams, WeightedShift};

use crate::error::config_err;
use crate::Result;

pub const NAMES: [&str; 5] =
    ["weighted_shift_linear", "weighted_shift_tanh", "ms_product", "linear_no_ed", "conjugated:<map>"];

/// A system name and its parameters, as written in a config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub name: String,
    #[serde(default)]
    pub params: Map<String, Value>,
}

impl SystemSpec {
    pub fn named(name: &str) -> Self {
        SystemSpec { name: name.to_string(), params: Map::new() }
    }
}

/// Where exact fixed points of a map sit, for chain-recurrent samples.
#[derive(Clone)]
enum Fixed {
    Zero,
    /// Coordinates in `{-1, 0, 1}`.
    Pattern,
    Image(Arc<dyn Diffeo>, Box<Fixed>),
}

/// A map with its certificate.
#[derive(Clone)]
pub struct MapSystem {
    pub sys: Arc<dyn Diffeo>,
    pub cert: CLCertificate,
    /// Conjugacy data when the map is `h ∘ f ∘ h^{-1}`: `(R₁, base C)`.
    pub conjugacy: Option<(f64, f64)>,
    fixed: Fixed,
    info: Value,
}

impl MapSystem {
    /// A fixed point, randomized by `seed` where the map has many.
    pub fn fixed_point(&self, radius: i64, seed: u64) -> Result<SeqVec> {
        fixed_point(&self.fixed, self.sys.window(), self.sys.p(), radius, seed)
    }

    pub fn info_value(&self) -> Value {
        self.info.clone()
    }
}

fn fixed_point(fixed: &Fixed, w: Window, p: NormExp, radius: i64, seed: u64) -> Result<SeqVec> {
    Ok(match fixed {
        Fixed::Zero => SeqVec::zeros(w, p),
        Fixed::Pattern => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            SeqVec::from_fn(w, p, |i| if i.abs() <= radius { rng.gen_range(-1i32..=1) as f64 } else { 0.0 })
        }
        Fixed::Image(h, inner) => h.forward(&fixed_point(inner, w, p, radius, seed)?)?,
    })
}

/// An operator sequence with its certificate.
#[derive(Clone)]
pub struct SeqSystem {
    pub seq: OperatorSeq,
    pub cert: CLCertificate,
    info: Value,
}

impl SeqSystem {
    pub fn info_value(&self) -> Value {
        self.info.clone()
    }
}

#[derive(Clone)]
pub enum Built {
    Map(MapSystem),
    Sequence(SeqSystem),
}

impl Built {
    /// Constants for the manifest.
    pub fn info(&self) -> &Value {
        match self {
            Built::Map(m) => &m.info,
            Built::Sequence(s) => &s.info,
        }
    }

    pub fn cert(&self) -> &CLCertificate {
        match self {
            Built::Map(m) => &m.cert,
            Built::Sequence(s) => &s.cert,
        }
    }

    pub fn as_map(&self) -> Result<&MapSystem> {
        match self {
            Built::Map(m) => Ok(m),
            Built::Sequence(_) => Err(config_err("this experiment needs a map, not an operator sequence")),
        }
    }
}

struct Params<'a> {
    name: &'a str,
    map: &'a Map<String, Value>,
}

impl Params<'_> {
    fn allow(&self, keys: &[&str]) -> Result<()> {
        match self.map.keys().find(|k| !keys.contains(&k.as_str())) {
            Some(k) => Err(config_err(format!("{}: unknown parameter `{k}` (allowed: {})", self.name, keys.join(", ")))),
            None => Ok(()),
        }
    }

    fn f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v.as_f64().ok_or_else(|| config_err(format!("{}: `{key}` must be a number", self.name))),
        }
    }

    fn i64(&self, key: &str, default: i64) -> Result<i64> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v.as_i64().ok_or_else(|| config_err(format!("{}: `{key}` must be an integer", self.name))),
        }
    }
}

/// Builds `spec` on the window `[-half, half]` with norm `p`.
pub fn build(spec: &SystemSpec, half: usize, p: NormExp) -> Result<Built> {
    let w = Window::symmetric(half);
    let params = Params { name: &spec.name, map: &spec.params };
    if let Some(base) = spec.name.strip_prefix("conjugated:") {
        let eps = params.f64("eps", 0.05)?;
        if !(eps.abs() < 1.0) {
            return Err(config_err(format!("{}: need |eps| < 1", spec.name)));
        }
        let mut inner = spec.params.clone();
        inner.remove("eps");
        let Built::Map(base) = build(&SystemSpec { name: base.to_string(), params: inner }, half, p)? else {
            return Err(config_err("conjugated: base must be a map"));
        };
        let h: Arc<dyn Diffeo> = Arc::new(CoordSine::new(w, p, eps)?);
        let g = conjugate(base.sys.clone(), h.clone())?;
        let (r1, r) = (g.r1(), g.deriv_bound());
        let cert = transported_certificate(&base.cert, h.clone(), r1, r)?;
        let info = json!({
            "name": spec.name, "eps": eps, "r1": r1, "base": base.info, "certificate": cert.summary(),
        });
        return Ok(Built::Map(MapSystem {
            sys: Arc::new(g),
            cert,
            conjugacy: Some((r1, base.cert.c)),
            fixed: Fixed::Image(h, Box::new(base.fixed)),
            info,
        }));
    }
    match spec.name.as_str() {
        "weighted_shift_linear" | "weighted_shift_tanh" => {
            params.allow(&["threshold"])?;
            let threshold = params.i64("threshold", 0)?;
            if threshold.unsigned_abs() as usize >= half {
                return Err(config_err("threshold must lie inside the window"));
            }
            let f =
                if spec.name.ends_with("linear") { WeightedShift::linear(w, p) } else { WeightedShift::tanh(w, p) };
            let cert = shift_certificate(&f, threshold)?;
            let info = json!({ "name": spec.name, "threshold": threshold, "certificate": cert.summary() });
            Ok(Built::Map(MapSystem { sys: Arc::new(f), cert, conjugacy: None, fixed: Fixed::Zero, info }))
        }
        "ms_product" => {
            params.allow(&["lambda1", "lambda2", "cert_horizon"])?;
            let d = MsParams::default();
            let ms = MsParams { lambda1: params.f64("lambda1", d.lambda1)?, lambda2: params.f64("lambda2", d.lambda2)?, m: None };
            let horizon = params.i64("cert_horizon", 60)?;
            if !(1..=10_000).contains(&horizon) {
                return Err(config_err("ms_product: cert_horizon must lie in [1, 10000]"));
            }
            let f = make_ms_product(ms, w, p)?;
            let (cert, ms_info) = ms_certificate(&f, horizon as usize)?;
            let info = json!({ "name": spec.name, "params": ms, "scan": ms_info, "certificate": cert.summary() });
            Ok(Built::Map(MapSystem { sys: Arc::new(f), cert, conjugacy: None, fixed: Fixed::Pattern, info }))
        }
        "linear_no_ed" => {
            params.allow(&["a", "b"])?;
            let (a, b) = (params.i64("a", -10)?, params.i64("b", 10)?);
            if a >= b {
                return Err(config_err("linear_no_ed: need a < b"));
            }
            let seq = make_linear_example_seq(w, (a, b))?;
            let cert = no_ed_certificate(w)?;
            let info = json!({ "name": spec.name, "interval": [a, b], "certificate": cert.summary() });
            Ok(Built::Sequence(SeqSystem { seq, cert, info }))
        }
        other => Err(config_err(format!("unknown system `{other}` (known: {})", NAMES.join(", ")))),
    }
}
