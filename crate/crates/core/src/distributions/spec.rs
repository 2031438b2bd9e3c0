//! JSON descriptions of demand laws.
//!
//! ```json
//! {"family": "pareto", "params": {"L": 1.0, "k": 3.0}}
//! {"family": "piecewise", "knots": [[0, 0], [0.3333, 0.7778], [0.6667, 0.7778], [1, 1]]}
//! {"transform": "scale", "c": 2.0, "of": {"family": "exponential", "params": {"lambda": 1.0}}}
//! ```
//!
//! Families and their parameters: `exponential {lambda}`, `pareto {L, k}`,
//! `gpareto {mu, sigma, k}` or `gpareto {mu, epsilon}`, `kumaraswamy {lambda}`,
//! `uniform {a, b}`, `gamma {shape, scale}`, `lognormal {mu, sigma}`,
//! `normal {mu, sigma, truncated = true}`, `deterministic {alpha}`,
//! `piecewise {knots}`.
//!
//! Transforms: `scale {c, of}`, `affine {shift, factor, of}`,
//! `mean_preserving {kappa, of}`, `mixture {p, first, second}`,
//! `convex {map: power|exp_scale|affine, gamma|s|a,b, of}`,
//! `convolve {of, with, method = empirical|grid, samples, seed}`.

use serde_json::{Map, Value};
use thiserror::Error;

use super::{ConvexMap, ConvolutionMethod, DemandDistribution, DistributionError};
use super::{DEFAULT_CONVOLUTION_SAMPLES, DEFAULT_CONVOLUTION_SEED};

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("{path}: {source}")]
    Distribution { path: String, source: DistributionError },
}

fn bad(path: &str, message: impl Into<String>) -> SpecError {
    SpecError::Invalid { path: path.to_string(), message: message.into() }
}

/// Parses a distribution description from JSON text.
pub fn parse_distribution(text: &str) -> Result<DemandDistribution, SpecError> {
    let v: Value = serde_json::from_str(text)?;
    from_value(&v)
}

/// Builds a distribution from a parsed JSON value.
pub fn from_value(v: &Value) -> Result<DemandDistribution, SpecError> {
    build(v, "$")
}

fn build(v: &Value, path: &str) -> Result<DemandDistribution, SpecError> {
    let obj = v.as_object().ok_or_else(|| bad(path, "expected an object"))?;
    let wrap = |r: Result<DemandDistribution, DistributionError>| {
        r.map_err(|source| SpecError::Distribution { path: path.to_string(), source })
    };
    if let Some(t) = obj.get("transform") {
        let t = t.as_str().ok_or_else(|| bad(path, "`transform` must be a string"))?;
        let child = |key: &str| -> Result<DemandDistribution, SpecError> {
            let c = obj.get(key).ok_or_else(|| bad(path, format!("missing `{key}`")))?;
            build(c, &format!("{path}.{key}"))
        };
        let num = |key: &str| number(obj, key, path);
        return match t {
            "scale" => wrap(child("of")?.scaled(num("c")?)),
            "affine" => wrap(child("of")?.affine(num("shift")?, num("factor")?)),
            "mean_preserving" => wrap(child("of")?.mean_preserving(num("kappa")?)),
            "mixture" => wrap(DemandDistribution::mixture(num("p")?, &child("first")?, &child("second")?)),
            "convex" | "convex_map" => {
                let map = match obj.get("map").and_then(Value::as_str) {
                    Some("power") => ConvexMap::Power { gamma: num("gamma")? },
                    Some("exp_scale") => ConvexMap::ExpScale { s: num("s")? },
                    Some("affine") | Some("affine_increasing") => {
                        ConvexMap::AffineIncreasing { a: num("a")?, b: num("b")? }
                    }
                    other => return Err(bad(path, format!("unknown convex map {other:?}; use power, exp_scale or affine"))),
                };
                wrap(child("of")?.convex_map(map))
            }
            "convolve" => {
                let method = match obj.get("method").and_then(Value::as_str).unwrap_or("empirical") {
                    "empirical" => {
                        let samples = match obj.get("samples") {
                            Some(_) => integer(obj, "samples", path)? as usize,
                            None => DEFAULT_CONVOLUTION_SAMPLES,
                        };
                        let seed = match obj.get("seed") {
                            Some(_) => integer(obj, "seed", path)?,
                            None => DEFAULT_CONVOLUTION_SEED,
                        };
                        ConvolutionMethod::Empirical { samples, seed }
                    }
                    "grid" => ConvolutionMethod::Grid,
                    other => return Err(bad(path, format!("unknown convolution method `{other}`"))),
                };
                wrap(child("of")?.convolve(&child("with")?, method))
            }
            other => Err(bad(path, format!("unknown transform `{other}`"))),
        };
    }
    let family = obj
        .get("family")
        .and_then(Value::as_str)
        .ok_or_else(|| bad(path, "expected a `family` or `transform` field"))?;
    if family == "piecewise" {
        let knots = obj.get("knots").and_then(Value::as_array).ok_or_else(|| bad(path, "missing `knots` array"))?;
        let mut pairs = Vec::with_capacity(knots.len());
        for (i, k) in knots.iter().enumerate() {
            let pair = k.as_array().filter(|a| a.len() == 2).ok_or_else(|| bad(path, format!("knot {i} must be [x, F]")))?;
            let x = pair[0].as_f64().ok_or_else(|| bad(path, format!("knot {i}: x is not a number")))?;
            let f = pair[1].as_f64().ok_or_else(|| bad(path, format!("knot {i}: F is not a number")))?;
            pairs.push((x, f));
        }
        return wrap(DemandDistribution::piecewise_linear(&pairs));
    }
    let params = match obj.get("params") {
        Some(Value::Object(p)) => p,
        Some(_) => return Err(bad(path, "`params` must be an object")),
        None => obj,
    };
    let num = |key: &str| number(params, key, path);
    match family {
        "exponential" => wrap(DemandDistribution::exponential(num("lambda")?)),
        "pareto" => wrap(DemandDistribution::pareto(num("L")?, num("k")?)),
        "gpareto" | "generalized_pareto" => {
            if params.contains_key("epsilon") {
                wrap(DemandDistribution::generalized_pareto_eps(num("mu")?, num("epsilon")?))
            } else {
                wrap(DemandDistribution::generalized_pareto(num("mu")?, num("sigma")?, num("k")?))
            }
        }
        "kumaraswamy" | "beta" => wrap(DemandDistribution::kumaraswamy(num("lambda")?)),
        "uniform" => wrap(DemandDistribution::uniform(num("a")?, num("b")?)),
        "gamma" => wrap(DemandDistribution::gamma(num("shape")?, num("scale")?)),
        "lognormal" => wrap(DemandDistribution::lognormal(num("mu")?, num("sigma")?)),
        "normal" => {
            let truncated = match params.get("truncated") {
                None => true,
                Some(Value::Bool(b)) => *b,
                Some(_) => return Err(bad(path, "`truncated` must be a boolean")),
            };
            if truncated {
                wrap(DemandDistribution::normal(num("mu")?, num("sigma")?))
            } else {
                wrap(DemandDistribution::normal_untruncated(num("mu")?, num("sigma")?))
            }
        }
        "deterministic" => wrap(DemandDistribution::deterministic(num("alpha")?)),
        other => Err(bad(path, format!("unknown family `{other}`"))),
    }
}

fn number(obj: &Map<String, Value>, key: &str, path: &str) -> Result<f64, SpecError> {
    match obj.get(key) {
        Some(v) => v.as_f64().ok_or_else(|| bad(path, format!("`{key}` must be a number"))),
        None => Err(bad(path, format!("missing parameter `{key}`"))),
    }
}

fn integer(obj: &Map<String, Value>, key: &str, path: &str) -> Result<u64, SpecError> {
    obj.get(key).and_then(Value::as_u64).ok_or_else(|| bad(path, format!("`{key}` must be a nonnegative integer")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Family;

    #[test]
    fn parses_families() {
        let d = parse_distribution(r#"{"family": "pareto", "params": {"L": 1.0, "k": 3.0}}"#).unwrap();
        assert_eq!(d.family(), &Family::Pareto { scale: 1.0, shape: 3.0 });
        let d = parse_distribution(r#"{"family": "exponential", "lambda": 2}"#).unwrap();
        assert_eq!(d.family(), &Family::Exponential { rate: 2.0 });
        let d = parse_distribution(r#"{"family": "gpareto", "params": {"mu": 0.02, "epsilon": 0.5}}"#).unwrap();
        assert!((d.mean() - (0.02 + 1.0 / 1.5)).abs() < 1e-15);
        let d = parse_distribution(r#"{"family": "normal", "params": {"mu": 1, "sigma": 0.2, "truncated": false}}"#).unwrap();
        assert_eq!(d.family(), &Family::Normal { mean: 1.0, sd: 0.2, truncated: false });
    }

    #[test]
    fn parses_piecewise_and_transforms() {
        let d = parse_distribution(r#"{"family": "piecewise", "knots": [[0,0],[0.5,0.9],[1,1]]}"#).unwrap();
        assert!((d.cdf(0.25) - 0.45).abs() < 1e-15);
        let d = parse_distribution(
            r#"{"transform": "scale", "c": 2.0, "of": {"family": "exponential", "params": {"lambda": 1.0}}}"#,
        )
        .unwrap();
        assert!((d.mean() - 2.0).abs() < 1e-15);
        let d = parse_distribution(
            r#"{"transform": "mixture", "p": 0.3,
                "first": {"family": "uniform", "params": {"a": 0, "b": 1}},
                "second": {"family": "uniform", "params": {"a": 0, "b": 2}}}"#,
        )
        .unwrap();
        assert!((d.mean() - (0.3 * 0.5 + 0.7 * 1.0)).abs() < 1e-15);
    }

    #[test]
    fn reports_paths_of_errors() {
        let e = parse_distribution(r#"{"transform": "scale", "c": 2, "of": {"family": "pareto", "params": {"L": 1, "k": 1}}}"#)
            .unwrap_err();
        assert!(e.to_string().starts_with("$.of"), "{e}");
        let e = parse_distribution(r#"{"family": "weibull"}"#).unwrap_err();
        assert!(e.to_string().contains("unknown family"));
        assert!(matches!(parse_distribution("{"), Err(SpecError::Json(_))));
        let e = parse_distribution(r#"{"family": "exponential", "params": {}}"#).unwrap_err();
        assert!(e.to_string().contains("lambda"));
    }
}
