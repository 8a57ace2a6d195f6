//! JSON reports written by the subcommands and the `--check` comparison.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use hdnn_core::compiler::Schedule;
use hdnn_core::dse::DesignPoint;
use hdnn_core::perfmodel::{peak_spat_ops, peak_wino_ops, HwConfig, LayerLatency, ResourceUsage};

/// Hardware parameters and schedule, as written by `explore` and `compile`
/// and read back through `--design`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignFile {
    pub pi: usize,
    pub po: usize,
    pub pt: usize,
    pub ni: usize,
    #[serde(default)]
    pub schedule: Option<Schedule>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LayerRow {
    pub index: usize,
    #[serde(flatten)]
    pub latency: LayerLatency,
}

#[derive(Debug, Clone, Serialize)]
pub struct DesignReport {
    pub label: String,
    pub pi: usize,
    pub po: usize,
    pub pt: usize,
    pub ni: usize,
    pub total_latency_s: f64,
    pub throughput_gops: f64,
    pub peak_wino_gops: f64,
    pub peak_spat_gops: f64,
    pub resources: ResourceUsage,
    pub layers: Vec<LayerRow>,
}

impl DesignReport {
    pub fn new(hw: &HwConfig, layers: &[LayerLatency], total: f64, throughput: f64, resources: ResourceUsage) -> Self {
        DesignReport {
            label: hw.label(),
            pi: hw.pi,
            po: hw.po,
            pt: hw.pt,
            ni: hw.ni,
            total_latency_s: total,
            throughput_gops: throughput / 1e9,
            peak_wino_gops: peak_wino_ops(hw) / 1e9,
            peak_spat_gops: peak_spat_ops(hw) / 1e9,
            resources,
            layers: layers
                .iter()
                .enumerate()
                .map(|(index, l)| LayerRow { index, latency: *l })
                .collect(),
        }
    }

    pub fn from_point(p: &DesignPoint) -> Self {
        DesignReport::new(&p.hw, &p.layers, p.total_latency, p.throughput, p.resources)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExploreReport {
    pub model: String,
    pub platform: String,
    pub candidates: usize,
    pub frontier: Vec<String>,
    pub best: DesignReport,
    pub ranked: Vec<DesignReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub model: String,
    pub platform: String,
    pub design: DesignReport,
    pub caps: ResourceUsage,
    pub fits: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompileReport {
    pub model: String,
    pub design: String,
    pub instructions: usize,
    pub per_opcode: std::collections::BTreeMap<String, usize>,
    pub program_bytes: usize,
    pub dram_words: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub code: &'static str,
    pub message: String,
}

/// Relative tolerance for a numeric field; timing and rate fields come out of
/// floating-point models, everything else must match exactly.
fn tolerance(key: &str) -> f64 {
    let k = key.to_ascii_lowercase();
    if k.starts_with("t_") || k.contains("latency") || k.contains("gops") || k.contains("throughput") {
        1e-9
    } else if k == "lut" || k == "dsp" || k == "bram" {
        1e-12
    } else {
        0.0
    }
}

fn diff_into(path: &str, key: &str, got: &Value, want: &Value, out: &mut Vec<String>) {
    match (got, want) {
        (Value::Object(g), Value::Object(w)) => {
            for (k, wv) in w {
                match g.get(k) {
                    Some(gv) => diff_into(&format!("{path}.{k}"), k, gv, wv, out),
                    None => out.push(format!("{path}.{k}: missing")),
                }
            }
            for k in g.keys().filter(|k| !w.contains_key(*k)) {
                out.push(format!("{path}.{k}: unexpected"));
            }
        }
        (Value::Array(g), Value::Array(w)) => {
            if g.len() != w.len() {
                out.push(format!("{path}: length {} vs {}", g.len(), w.len()));
            }
            for (i, (gv, wv)) in g.iter().zip(w).enumerate() {
                diff_into(&format!("{path}[{i}]"), key, gv, wv, out);
            }
        }
        (Value::Number(g), Value::Number(w)) => {
            let (g, w) = (g.as_f64().unwrap_or(f64::NAN), w.as_f64().unwrap_or(f64::NAN));
            let tol = tolerance(key);
            if (g - w).abs() > tol * w.abs().max(g.abs()) {
                out.push(format!("{path}: {g} vs {w}"));
            }
        }
        _ if got != want => out.push(format!("{path}: {got} vs {want}")),
        _ => {}
    }
}

/// Field-by-field differences between a fresh report and a golden one.
pub fn diff(got: &Value, want: &Value) -> Vec<String> {
    let mut out = Vec::new();
    diff_into("$", "", got, want, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn timing_fields_tolerate_rounding() {
        let a = json!({"t_total": 1.0, "total_cycles": 10});
        let b = json!({"t_total": 1.0 + 1e-12, "total_cycles": 10});
        assert!(diff(&a, &b).is_empty());
        let c = json!({"t_total": 1.0, "total_cycles": 11});
        assert_eq!(diff(&a, &c), vec!["$.total_cycles: 10 vs 11".to_string()]);
    }

    #[test]
    fn structural_differences_reported() {
        let a = json!({"layers": [1, 2], "extra": true});
        let b = json!({"layers": [1], "name": "x"});
        let d = diff(&a, &b);
        assert!(d.iter().any(|l| l.contains("length")));
        assert!(d.iter().any(|l| l.contains("missing")));
        assert!(d.iter().any(|l| l.contains("unexpected")));
    }
}
