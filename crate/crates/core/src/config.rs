//! Pipeline configuration and the flat `key = value` file format.
//!
//! Config files hold one `key = value` per line; `#` starts a comment.
//! Unknown keys are rejected. A JSON run report is also accepted, in which
//! case its `config` object is used, so any run can be replayed from its
//! report.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::morph::Shape;
use crate::track::TrackingPolicy;
use crate::veinmap::{Method, ProfileDirections};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeakSeries {
    /// Count peaks on the differentiated trend.
    Derivative,
    /// Count peaks on the Savitzky-Golay output.
    Sg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub edge_half_height: usize,
    pub curvature_sigma: f64,
    pub curvature_directions: ProfileDirections,
    pub rlt_iterations: usize,
    pub rlt_valley_radius: f64,
    pub rlt_depth_threshold: f64,
    pub rlt_straight_weight: f64,
    /// Percentile for max-curvature fields.
    pub binarize_percentile: f64,
    /// Percentile for line-tracking locus fields.
    pub rlt_binarize_percentile: f64,
    pub morph_shape: Shape,
    pub morph_radius: usize,
    pub median_window: usize,
    /// Line-tracking preset order: median before erode/dilate when true.
    pub rlt_median_first: bool,
    pub central_band_fraction: f64,
    /// `None` tracks each frame independently.
    pub match_gate_px: Option<f64>,
    pub max_gap_fraction: f64,
    pub width_columns: usize,
    pub smooth_window: usize,
    pub sg_window: usize,
    pub sg_order: usize,
    pub peak_series: PeakSeries,
    /// Absolute prominence floor, in units of the peak series.
    pub peak_min_prominence: f64,
    pub peak_prominence_iqr_fraction: f64,
    pub peak_min_separation_s: f64,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            edge_half_height: 4,
            curvature_sigma: 1.5,
            curvature_directions: ProfileDirections::All,
            rlt_iterations: 3000,
            rlt_valley_radius: 14.0,
            rlt_depth_threshold: 0.05,
            rlt_straight_weight: 2.0,
            binarize_percentile: 90.0,
            rlt_binarize_percentile: 15.0,
            morph_shape: Shape::Square,
            morph_radius: 1,
            median_window: 5,
            rlt_median_first: true,
            central_band_fraction: 0.5,
            match_gate_px: Some(15.0),
            max_gap_fraction: 0.2,
            width_columns: 1,
            smooth_window: 5,
            sg_window: 11,
            sg_order: 3,
            peak_series: PeakSeries::Derivative,
            peak_min_prominence: 12.0,
            peak_prominence_iqr_fraction: 0.25,
            peak_min_separation_s: 0.33,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: &str| {
            Err(Error::Config {
                key: key.into(),
                message: message.into(),
            })
        };
        if self.edge_half_height == 0 {
            return bad("edge_half_height", "must be >= 1");
        }
        if !(self.curvature_sigma >= 1.0) {
            return bad("curvature_sigma", "must be >= 1");
        }
        if !(self.rlt_valley_radius >= 1.0) {
            return bad("rlt_valley_radius", "must be >= 1");
        }
        if !(self.rlt_depth_threshold >= 0.0) {
            return bad("rlt_depth_threshold", "must be >= 0");
        }
        if !(self.rlt_straight_weight > 0.0) {
            return bad("rlt_straight_weight", "must be > 0");
        }
        if !(self.binarize_percentile > 0.0 && self.binarize_percentile < 100.0) {
            return bad("binarize_percentile", "must be in (0, 100)");
        }
        if !(self.rlt_binarize_percentile >= 0.0 && self.rlt_binarize_percentile < 100.0) {
            return bad("rlt_binarize_percentile", "must be in [0, 100)");
        }
        if self.morph_radius == 0 {
            return bad("morph_radius", "must be >= 1");
        }
        if self.median_window < 3 || self.median_window.is_multiple_of(2) {
            return bad("median_window", "must be odd and >= 3");
        }
        if !(self.central_band_fraction > 0.0 && self.central_band_fraction <= 1.0) {
            return bad("central_band_fraction", "must be in (0, 1]");
        }
        if let Some(g) = self.match_gate_px {
            if !(g >= 0.0) {
                return bad("match_gate_px", "must be >= 0 or none");
            }
        }
        if !(0.0..=1.0).contains(&self.max_gap_fraction) {
            return bad("max_gap_fraction", "must be in [0, 1]");
        }
        if self.width_columns == 0 || self.width_columns.is_multiple_of(2) {
            return bad("width_columns", "must be odd");
        }
        if self.smooth_window == 0 || self.smooth_window.is_multiple_of(2) {
            return bad("smooth_window", "must be odd");
        }
        if self.sg_window < 3 || self.sg_window.is_multiple_of(2) {
            return bad("sg_window", "must be odd and >= 3");
        }
        if self.sg_order >= self.sg_window {
            return bad("sg_order", "must be below sg_window");
        }
        if !(self.peak_min_prominence >= 0.0) {
            return bad("peak_min_prominence", "must be >= 0");
        }
        if !(self.peak_prominence_iqr_fraction >= 0.0) {
            return bad("peak_prominence_iqr_fraction", "must be >= 0");
        }
        if !(self.peak_min_separation_s > 0.0) {
            return bad("peak_min_separation_s", "must be > 0");
        }
        Ok(())
    }

    pub fn percentile_for(&self, method: Method) -> f64 {
        match method {
            Method::MaxCurvature => self.binarize_percentile,
            Method::RepeatedLineTracking => self.rlt_binarize_percentile,
        }
    }

    pub fn tracking_policy(&self) -> TrackingPolicy {
        TrackingPolicy {
            band_fraction: self.central_band_fraction,
            gate_px: self.match_gate_px,
            max_gap_fraction: self.max_gap_fraction,
            width_columns: self.width_columns,
        }
    }

    /// Apply `key = value` overrides on top of `self`.
    pub fn with_overrides(&self, text: &str) -> Result<Self> {
        let Value::Object(mut current) = serde_json::to_value(self).expect("config serializes") else {
            unreachable!("config is a struct");
        };
        for (key, raw) in key_values(text)? {
            let Some(old) = current.get(&key) else {
                return Err(Error::Config {
                    key,
                    message: "unknown key".into(),
                });
            };
            let value = typed_like(old, &raw, &key)?;
            current.insert(key, value);
        }
        let cfg: Self = serde_json::from_value(Value::Object(current)).map_err(|e| Error::Config {
            key: "config".into(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse a config file: `key = value` lines, or a JSON report/config.
    pub fn parse(text: &str) -> Result<Self> {
        let trimmed = text.trim_start();
        if trimmed.starts_with('{') {
            let v: Value = serde_json::from_str(trimmed).map_err(|e| Error::Config {
                key: "config".into(),
                message: e.to_string(),
            })?;
            let inner = v.get("config").cloned().unwrap_or(v);
            let cfg: Self = serde_json::from_value(inner).map_err(|e| Error::Config {
                key: "config".into(),
                message: e.to_string(),
            })?;
            cfg.validate()?;
            return Ok(cfg);
        }
        Self::default().with_overrides(text)
    }

    pub fn to_key_values(&self) -> String {
        let Value::Object(map) = serde_json::to_value(self).expect("config serializes") else {
            unreachable!("config is a struct");
        };
        let mut out = String::new();
        for (k, v) in map {
            let text = match v {
                Value::Null => "none".to_string(),
                Value::String(s) => s,
                other => other.to_string(),
            };
            out.push_str(&format!("{k} = {text}\n"));
        }
        out
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

/// Interpret `raw` with the JSON type of the current value of the key.
fn typed_like(old: &Value, raw: &str, key: &str) -> Result<Value> {
    let err = |m: &str| Error::Config {
        key: key.into(),
        message: format!("{m}, got {raw:?}"),
    };
    Ok(match old {
        Value::Bool(_) => Value::Bool(raw.parse().map_err(|_| err("expected true or false"))?),
        Value::String(_) => Value::String(raw.to_string()),
        Value::Number(_) | Value::Null => {
            if raw.eq_ignore_ascii_case("none") {
                if matches!(old, Value::Null) || key == "match_gate_px" {
                    Value::Null
                } else {
                    return Err(err("value required"));
                }
            } else if let Ok(i) = raw.parse::<u64>() {
                Value::from(i)
            } else {
                let f: f64 = raw.parse().map_err(|_| err("expected a number"))?;
                let mut m = Map::new();
                m.insert("v".into(), Value::from(f));
                m.remove("v").filter(|v| !v.is_null()).ok_or_else(|| err("expected a finite number"))?
            }
        }
        _ => return Err(err("unsupported value")),
    })
}

/// Split a flat config text into `(key, value)` pairs.
pub fn key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config {
                key: format!("line {}", lineno + 1),
                message: format!("expected key = value, got {line:?}"),
            });
        };
        out.push((k.trim().to_string(), v.trim().trim_matches('"').to_string()));
    }
    Ok(out)
}
