//! Versioned JSON model files.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Map, Value};

use super::{GtmModel, ModelMeta};
use crate::decorrelation::{pairs, DecorrelationLayer};
use crate::error::{GtmError, Result};
use crate::marginal::{MarginalTransform, Standardization, TransformationLayer};
use crate::scalar::Real;
use crate::spline::KnotGrid;

pub const FORMAT_VERSION: u64 = 1;

/// Writes every float with 17 significant digits.
struct FullPrecision;

impl serde_json::ser::Formatter for FullPrecision {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

fn num<T: Real>(x: T, what: &str) -> Result<Value> {
    let v = x.as_f64();
    if !v.is_finite() {
        return Err(GtmError::numerical(format!("cannot serialise non-finite {what}")));
    }
    Ok(Value::from(v))
}

fn nums<T: Real>(xs: &[T], what: &str) -> Result<Value> {
    Ok(Value::Array(xs.iter().map(|&x| num(x, what)).collect::<Result<_>>()?))
}

fn grid_json<T: Real>(g: &KnotGrid<T>) -> Result<Value> {
    Ok(json!({
        "lower": num(g.lower(), "grid bound")?,
        "upper": num(g.upper(), "grid bound")?,
        "num_basis": g.num_basis(),
        "degree": g.degree(),
    }))
}

fn load_err(field: &str, msg: impl Into<String>) -> GtmError {
    GtmError::Load { field: field.to_string(), msg: msg.into() }
}

fn field<'a>(obj: &'a Value, name: &str, path: &str) -> Result<&'a Value> {
    let map = obj.as_object().ok_or_else(|| load_err(path, "expected an object"))?;
    map.get(name).ok_or_else(|| load_err(&format!("{path}.{name}"), "missing field"))
}

fn as_f64(v: &Value, path: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| load_err(path, "expected a number"))
}

fn as_usize(v: &Value, path: &str) -> Result<usize> {
    v.as_u64().map(|x| x as usize).ok_or_else(|| load_err(path, "expected a non-negative integer"))
}

fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| load_err(path, "expected an array"))
}

fn real_vec<T: Real>(v: &Value, path: &str) -> Result<Vec<T>> {
    as_array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, x)| as_f64(x, &format!("{path}[{i}]")).map(T::lit))
        .collect()
}

fn read_grid<T: Real>(v: &Value, path: &str) -> Result<KnotGrid<T>> {
    let lower = as_f64(field(v, "lower", path)?, &format!("{path}.lower"))?;
    let upper = as_f64(field(v, "upper", path)?, &format!("{path}.upper"))?;
    let p = as_usize(field(v, "num_basis", path)?, &format!("{path}.num_basis"))?;
    let d = as_usize(field(v, "degree", path)?, &format!("{path}.degree"))?;
    KnotGrid::new(T::lit(lower), T::lit(upper), p, d).map_err(|e| load_err(path, e.to_string()))
}

impl<T: Real> GtmModel<T> {
    pub fn to_json_value(&self) -> Result<Value> {
        let t = &self.transformation;
        let standardization = t
            .standardization()
            .iter()
            .map(|s| {
                Ok(json!({
                    "mean": num(s.mean, "mean")?,
                    "sd": num(s.sd, "sd")?,
                    "min": num(s.min, "min")?,
                    "max": num(s.max, "max")?,
                }))
            })
            .collect::<Result<Vec<_>>>()?;
        let grids = t.transforms().iter().map(|m| grid_json(m.grid())).collect::<Result<Vec<_>>>()?;
        let thetas = t.transforms().iter().map(|m| nums(m.theta(), "theta")).collect::<Result<Vec<_>>>()?;
        let layers = self
            .layers
            .iter()
            .map(|l| {
                let splines = pairs(l.dim())
                    .map(|(r, c)| Ok(json!({ "r": r + 1, "c": c + 1, "coeffs": nums(l.pair_coeffs(r, c), "coefficient")? })))
                    .collect::<Result<Vec<_>>>()?;
                Ok(json!({ "flipped": l.flipped(), "grid": grid_json(l.grid())?, "splines": splines }))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut doc = Map::new();
        doc.insert("format_version".into(), FORMAT_VERSION.into());
        doc.insert("J".into(), self.dim().into());
        doc.insert("L".into(), self.depth().into());
        doc.insert("standardization".into(), Value::Array(standardization));
        doc.insert("marginal_grids".into(), Value::Array(grids));
        doc.insert("marginal_theta".into(), Value::Array(thetas));
        doc.insert("layer".into(), Value::Array(layers));
        doc.insert("meta".into(), serde_json::to_value(&self.meta).map_err(|e| GtmError::numerical(e.to_string()))?);
        Ok(Value::Object(doc))
    }

    pub fn to_json_string(&self) -> Result<String> {
        let value = self.to_json_value()?;
        let mut out = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut out, FullPrecision);
        value.serialize(&mut ser).map_err(|e| GtmError::numerical(e.to_string()))?;
        Ok(String::from_utf8(out).expect("JSON output is UTF-8"))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(s).map_err(|e| load_err("<document>", e.to_string()))?;
        let version = field(&doc, "format_version", "")?
            .as_u64()
            .ok_or_else(|| load_err("format_version", "expected a non-negative integer"))?;
        if version != FORMAT_VERSION {
            return Err(GtmError::Version { found: version, expected: FORMAT_VERSION });
        }
        let j = as_usize(field(&doc, "J", "")?, "J")?;
        let l = as_usize(field(&doc, "L", "")?, "L")?;

        let st_v = as_array(field(&doc, "standardization", "")?, "standardization")?;
        let gr_v = as_array(field(&doc, "marginal_grids", "")?, "marginal_grids")?;
        let th_v = as_array(field(&doc, "marginal_theta", "")?, "marginal_theta")?;
        for (name, len) in [("standardization", st_v.len()), ("marginal_grids", gr_v.len()), ("marginal_theta", th_v.len())] {
            if len != j {
                return Err(load_err(name, format!("expected {j} entries, found {len}")));
            }
        }
        let mut standardization = Vec::with_capacity(j);
        let mut transforms = Vec::with_capacity(j);
        for k in 0..j {
            let p = format!("standardization[{k}]");
            let get = |n: &str| -> Result<T> { Ok(T::lit(as_f64(field(&st_v[k], n, &p)?, &format!("{p}.{n}"))?)) };
            standardization.push(Standardization { mean: get("mean")?, sd: get("sd")?, min: get("min")?, max: get("max")? });
            let grid = read_grid(&gr_v[k], &format!("marginal_grids[{k}]"))?;
            let p = format!("marginal_theta[{k}]");
            let theta = real_vec(&th_v[k], &p)?;
            transforms.push(MarginalTransform::new(grid, theta).map_err(|e| load_err(&p, e.to_string()))?);
        }
        let transformation =
            TransformationLayer::new(transforms, standardization).map_err(|e| load_err("standardization", e.to_string()))?;

        let layer_v = as_array(field(&doc, "layer", "")?, "layer")?;
        if layer_v.len() != l {
            return Err(load_err("layer", format!("L = {l} but {} layers are stored", layer_v.len())));
        }
        let mut layers = Vec::with_capacity(l);
        for (i, lv) in layer_v.iter().enumerate() {
            let p = format!("layer[{i}]");
            let flipped =
                field(lv, "flipped", &p)?.as_bool().ok_or_else(|| load_err(&format!("{p}.flipped"), "expected a boolean"))?;
            let grid = read_grid(field(lv, "grid", &p)?, &format!("{p}.grid"))?;
            let mut layer = DecorrelationLayer::zeros(j, grid, flipped);
            let sp = as_array(field(lv, "splines", &p)?, &format!("{p}.splines"))?;
            if sp.len() != layer.num_pairs() {
                return Err(load_err(&format!("{p}.splines"), format!("expected {} splines, found {}", layer.num_pairs(), sp.len())));
            }
            let mut seen = vec![false; layer.num_pairs()];
            for (s, v) in sp.iter().enumerate() {
                let sp_path = format!("{p}.splines[{s}]");
                let r = as_usize(field(v, "r", &sp_path)?, &format!("{sp_path}.r"))?;
                let c = as_usize(field(v, "c", &sp_path)?, &format!("{sp_path}.c"))?;
                if c == 0 || c >= r || r > j {
                    return Err(load_err(&sp_path, format!("({r}, {c}) is not a pair with 1 <= c < r <= {j}")));
                }
                let k = crate::decorrelation::pair_index(r - 1, c - 1);
                if std::mem::replace(&mut seen[k], true) {
                    return Err(load_err(&sp_path, format!("duplicate spline ({r}, {c})")));
                }
                let cp = format!("{sp_path}.coeffs");
                let coeffs = real_vec(field(v, "coeffs", &sp_path)?, &cp)?;
                layer.set_pair_coeffs(r - 1, c - 1, &coeffs).map_err(|e| load_err(&cp, e.to_string()))?;
            }
            layers.push(layer);
        }
        let meta: ModelMeta =
            serde_json::from_value(field(&doc, "meta", "")?.clone()).map_err(|e| load_err("meta", e.to_string()))?;
        GtmModel::new(transformation, layers, meta).map_err(|e| load_err("layer", e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let s = self.to_json_string()?;
        std::fs::write(path, s)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path)
            .map_err(|e| GtmError::Load { field: "<file>".into(), msg: format!("{}: {e}", path.display()) })?;
        Self::from_json_str(&s)
    }
}
