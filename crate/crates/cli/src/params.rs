//! Parsing of parameter and point arguments.
//!
//! Parameters are JSON:
//! * Poincaré: `[[a,b],[b,c]]` or `{"a":…,"b":…,"c":…}`;
//! * hyperboloid: `[θ0,…,θd]` or `{"theta":[θ0,…,θd]}`.
//!
//! Any object form may carry `"family"` to make the family explicit.

use hyperstat::geometry::{LorentzParam, SpdParam2};
use serde_json::{Map, Value};

use crate::error::{invalid, CliResult};
use crate::output::{matrix, nums};

#[derive(Debug, Clone, PartialEq)]
pub enum ParamSpec {
    Poincare(SpdParam2<f64>),
    Hyperboloid(LorentzParam<f64>),
}

impl ParamSpec {
    pub fn family(&self) -> &'static str {
        match self {
            Self::Poincare(_) => "poincare",
            Self::Hyperboloid(_) => "hyperboloid",
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Self::Poincare(t) => matrix(&t.to_matrix()),
            Self::Hyperboloid(t) => nums(&t.theta),
        }
    }
}

fn parse_json(what: &str, text: &str) -> CliResult<Value> {
    serde_json::from_str(text).or_else(|e| invalid(format!("{what} is not valid JSON ({e}): {text}")))
}

fn number(what: &str, v: &Value) -> CliResult<f64> {
    match v.as_f64() {
        Some(x) if x.is_finite() => Ok(x),
        _ => invalid(format!("{what} must be a finite number, got {v}")),
    }
}

pub fn numbers(what: &str, v: &Value) -> CliResult<Vec<f64>> {
    match v.as_array() {
        Some(items) => items.iter().map(|x| number(what, x)).collect(),
        None => invalid(format!("{what} must be an array of numbers, got {v}")),
    }
}

fn matrix2(v: &Value) -> CliResult<[[f64; 2]; 2]> {
    let rows = v.as_array().filter(|r| r.len() == 2);
    let rows = match rows {
        Some(r) => r,
        None => return invalid(format!("matrix must be [[a,b],[b,c]], got {v}")),
    };
    let mut m = [[0.0; 2]; 2];
    for (i, row) in rows.iter().enumerate() {
        let r = numbers("matrix entry", row)?;
        if r.len() != 2 {
            return invalid(format!("matrix must be [[a,b],[b,c]], got {v}"));
        }
        m[i] = [r[0], r[1]];
    }
    Ok(m)
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str) -> CliResult<&'a Value> {
    obj.get(key)
        .map_or_else(|| invalid(format!("parameter object is missing \"{key}\"")), Ok)
}

fn from_object(obj: &Map<String, Value>) -> CliResult<ParamSpec> {
    let family = match obj.get("family") {
        None => None,
        Some(Value::String(s)) if s == "poincare" || s == "hyperboloid" => Some(s.as_str()),
        Some(v) => return invalid(format!("family must be \"poincare\" or \"hyperboloid\", got {v}")),
    };
    let allowed: &[&str] = if obj.contains_key("theta") {
        &["family", "theta"]
    } else if obj.contains_key("matrix") {
        &["family", "matrix"]
    } else {
        &["family", "a", "b", "c"]
    };
    if let Some(k) = obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        return invalid(format!("unexpected key \"{k}\" in parameter object"));
    }
    let spec = if obj.contains_key("theta") {
        ParamSpec::Hyperboloid(LorentzParam::new(numbers("theta", field(obj, "theta")?)?)?)
    } else if obj.contains_key("matrix") {
        ParamSpec::Poincare(SpdParam2::from_matrix(matrix2(field(obj, "matrix")?)?)?)
    } else {
        let get = |k| field(obj, k).and_then(|v| number(k, v));
        ParamSpec::Poincare(SpdParam2::new(get("a")?, get("b")?, get("c")?)?)
    };
    match family {
        Some(f) if f != spec.family() => invalid(format!("family \"{f}\" does not match a {} parameter", spec.family())),
        _ => Ok(spec),
    }
}

/// Parses and validates a parameter; cone violations name the failed inequality.
pub fn parse_param(text: &str) -> CliResult<ParamSpec> {
    let v = parse_json("parameter", text)?;
    match &v {
        Value::Object(obj) => from_object(obj),
        Value::Array(items) if items.first().is_some_and(Value::is_array) => {
            Ok(ParamSpec::Poincare(SpdParam2::from_matrix(matrix2(&v)?)?))
        }
        Value::Array(_) => Ok(ParamSpec::Hyperboloid(LorentzParam::new(numbers("theta", &v)?)?)),
        _ => invalid(format!("parameter must be a matrix, an object or an array, got {v}")),
    }
}

/// A planar point `[x, y]` or `{"x":…,"y":…}` (also `u`/`v` for disk points).
pub fn parse_point2(text: &str) -> CliResult<(f64, f64)> {
    let v = parse_json("point", text)?;
    let xs = match &v {
        Value::Array(_) => numbers("point", &v)?,
        Value::Object(obj) => {
            let keys: Vec<&str> = obj.keys().map(String::as_str).collect();
            let names = match keys.as_slice() {
                ["x", "y"] | ["y", "x"] => ["x", "y"],
                ["u", "v"] | ["v", "u"] => ["u", "v"],
                ["x1", "x2"] | ["x2", "x1"] => ["x1", "x2"],
                _ => return invalid(format!("point object needs keys x,y (or u,v or x1,x2), got {v}")),
            };
            vec![number(names[0], &obj[names[0]])?, number(names[1], &obj[names[1]])?]
        }
        _ => return invalid(format!("point must be [x, y], got {v}")),
    };
    if xs.len() != 2 {
        return invalid(format!("point must have two coordinates, got {}", xs.len()));
    }
    Ok((xs[0], xs[1]))
}
