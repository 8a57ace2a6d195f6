//! Analytical resource and latency models.
//!
//! Latencies are in seconds. Resource counts are per instance unless a
//! function says otherwise; `NI` replicates everything.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::compiler::{plan_partition, Dataflow, Mode, Schedule};
use crate::error::{Error, Result};
use crate::model::{DnnModel, LayerSpec};
use crate::winograd::WinogradParams;

/// Kernel tile size of the supported Winograd algorithms.
pub const WINO_R: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceCaps {
    pub lut: f64,
    pub dsp: f64,
    pub bram: f64,
}

/// Profiled correction constants of the resource models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfiledConstants {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_alpha() -> f64 {
    1.0
}
fn default_beta() -> f64 {
    8.0
}
fn default_gamma() -> f64 {
    48.0
}
fn default_delta() -> f64 {
    0.05
}
fn default_bram_depth() -> usize {
    1024
}
fn default_dram_words() -> u64 {
    1 << 32
}

impl Default for ProfiledConstants {
    fn default() -> Self {
        ProfiledConstants {
            alpha: default_alpha(),
            beta: default_beta(),
            gamma: default_gamma(),
            delta: default_delta(),
        }
    }
}

/// Target device description, as read from a platform file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Platform {
    #[serde(default)]
    pub name: String,
    pub freq_hz: f64,
    pub bw_words_per_s: f64,
    pub data_width: u32,
    pub bram_width: u32,
    /// Words per on-chip buffer bank.
    #[serde(default = "default_bram_depth")]
    pub bram_depth: usize,
    /// External memory size in words.
    #[serde(default = "default_dram_words")]
    pub dram_words: u64,
    pub caps: ResourceCaps,
    #[serde(default)]
    pub constants: ProfiledConstants,
}

impl Platform {
    pub fn parse(text: &str) -> Result<Platform> {
        let p: Platform = serde_json::from_str(text).map_err(|e| Error::Platform(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Platform> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Platform(format!("{}: {e}", path.display())))?;
        Platform::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("freq_hz", self.freq_hz),
            ("bw_words_per_s", self.bw_words_per_s),
            ("data_width", self.data_width as f64),
            ("bram_width", self.bram_width as f64),
            ("bram_depth", self.bram_depth as f64),
            ("caps.lut", self.caps.lut),
            ("caps.dsp", self.caps.dsp),
            ("caps.bram", self.caps.bram),
        ];
        for (name, v) in positive {
            if v <= 0.0 || !v.is_finite() {
                return Err(Error::Platform(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.bram_depth.is_multiple_of(2) {
            return Err(Error::Platform("bram_depth must be even for ping-pong slots".into()));
        }
        Ok(())
    }

    /// External bandwidth in words per cycle.
    pub fn bw_per_cycle(&self) -> f64 {
        self.bw_words_per_s / self.freq_hz
    }

    /// Same device with the external bandwidth scaled by `factor`.
    pub fn with_bw_scale(&self, factor: f64) -> Platform {
        Platform {
            bw_words_per_s: self.bw_words_per_s * factor,
            ..self.clone()
        }
    }
}

/// Instance parameters plus the platform they are built for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HwConfig {
    pub pi: usize,
    pub po: usize,
    pub pt: usize,
    pub ni: usize,
    pub platform: Platform,
}

/// Table of buffer partition factors for one mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionFactors {
    pub input: usize,
    pub weight: usize,
    pub output: usize,
}

impl HwConfig {
    pub fn new(pi: usize, po: usize, pt: usize, ni: usize, platform: Platform) -> Result<Self> {
        let hw = HwConfig {
            pi,
            po,
            pt,
            ni,
            platform,
        };
        hw.validate()?;
        Ok(hw)
    }

    pub fn validate(&self) -> Result<()> {
        if self.po < 1 || self.pi < self.po {
            return Err(Error::InvalidHw(format!(
                "need PI >= PO >= 1, got PI={} PO={}",
                self.pi, self.po
            )));
        }
        if self.pt != 4 && self.pt != 6 {
            return Err(Error::InvalidHw(format!("PT must be 4 or 6, got {}", self.pt)));
        }
        if self.ni < 1 {
            return Err(Error::InvalidHw("NI must be >= 1".into()));
        }
        self.platform.validate()
    }

    pub fn m(&self) -> usize {
        self.pt + 1 - WINO_R
    }

    pub fn wino_params(&self) -> WinogradParams {
        WinogradParams { m: self.m(), r: WINO_R }
    }

    pub fn label(&self) -> String {
        format!("PI={} PO={} PT={} NI={}", self.pi, self.po, self.pt, self.ni)
    }

    // Physical banks follow the Winograd partitioning, the larger of the two.

    pub fn input_banks(&self) -> usize {
        self.pi * self.pt * self.pt
    }

    pub fn weight_banks(&self) -> usize {
        self.pi * self.po * self.pt * self.pt
    }

    pub fn output_banks(&self) -> usize {
        self.po * self.m() * self.m()
    }

    pub fn bias_banks(&self) -> usize {
        self.po
    }

    /// Words in one ping-pong slot (half a buffer).
    pub fn input_slot_words(&self) -> usize {
        self.input_banks() * self.platform.bram_depth / 2
    }

    pub fn weight_slot_words(&self) -> usize {
        self.weight_banks() * self.platform.bram_depth / 2
    }

    pub fn output_slot_words(&self) -> usize {
        self.output_banks() * self.platform.bram_depth / 2
    }

    pub fn bias_slot_words(&self) -> usize {
        self.bias_banks() * self.platform.bram_depth / 2
    }

    /// Buffer lines per slot; a line is one word from every bank.
    pub fn slot_lines(&self) -> usize {
        self.platform.bram_depth / 2
    }

    pub fn partition_factors(&self, mode: Mode) -> PartitionFactors {
        let (pi, po, pt, m) = (self.pi, self.po, self.pt, self.m());
        match mode {
            Mode::Wino => PartitionFactors {
                input: pi * pt * pt,
                weight: pi * po * pt * pt,
                output: po * m * m,
            },
            Mode::Spat => PartitionFactors {
                input: pi * pt,
                weight: pi * pt * po * pt,
                output: po * pt,
            },
        }
    }

    /// Words per cycle of each module port, before the bandwidth limit.
    pub fn ldi_port(&self) -> f64 {
        (self.pi * self.pt) as f64
    }

    pub fn ldw_port(&self) -> f64 {
        (self.pi * self.po * self.pt) as f64
    }

    pub fn sv_port(&self) -> f64 {
        (self.po * self.pt) as f64
    }

    /// Effective words per cycle of a port: `min(BW / FREQ, port)`.
    pub fn rate(&self, port: f64) -> f64 {
        self.platform.bw_per_cycle().min(port)
    }
}

// Resource models, per instance.

pub fn dsp_util(hw: &HwConfig) -> f64 {
    let (pi, po, pt, m) = (hw.pi as f64, hw.po as f64, hw.pt as f64, hw.m() as f64);
    let k = &hw.platform.constants;
    pi * po * pt * pt + k.alpha * po * m * m + po + k.beta
}

pub fn bram_util(hw: &HwConfig) -> f64 {
    let (pi, po, pt, m) = (hw.pi as f64, hw.po as f64, hw.pt as f64, hw.m() as f64);
    let p = &hw.platform;
    let ratio = p.data_width as f64 / p.bram_width as f64;
    ratio * (pi * pt * pt + pi * po * pt * pt + (1.0 + p.constants.alpha) * po * m * m)
}

pub fn lut_util(hw: &HwConfig) -> f64 {
    let (pi, po, pt, m) = (hw.pi as f64, hw.po as f64, hw.pt as f64, hw.m() as f64);
    let k = &hw.platform.constants;
    k.gamma * (pi * po * pt * pt) * (1.0 + k.delta * m * m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceUsage {
    pub lut: f64,
    pub dsp: f64,
    pub bram: f64,
}

impl ResourceUsage {
    /// Sum of utilization fractions, used to rank equal-latency designs.
    pub fn weighted(&self, caps: &ResourceCaps) -> f64 {
        self.lut / caps.lut + self.dsp / caps.dsp + self.bram / caps.bram
    }
}

/// Usage of all `NI` instances.
pub fn resource_usage(hw: &HwConfig) -> ResourceUsage {
    let ni = hw.ni as f64;
    ResourceUsage {
        lut: lut_util(hw) * ni,
        dsp: dsp_util(hw) * ni,
        bram: bram_util(hw) * ni,
    }
}

/// Whether all `NI` instances fit the platform caps.
pub fn fits(hw: &HwConfig) -> bool {
    let u = resource_usage(hw);
    let c = &hw.platform.caps;
    u.lut <= c.lut && u.dsp <= c.dsp && u.bram <= c.bram
}

// Latency models.

fn decomposition(layer: &LayerSpec) -> (f64, f64) {
    (layer.r.div_ceil(WINO_R) as f64, layer.s.div_ceil(WINO_R) as f64)
}

/// Computation latency of a layer.
pub fn comp_latency(layer: &LayerSpec, hw: &HwConfig, mode: Mode) -> f64 {
    let (k, c, r, s, h, w) = dims(layer);
    let (pi, po, pt) = (hw.pi as f64, hw.po as f64, hw.pt as f64);
    let freq = hw.platform.freq_hz;
    match mode {
        Mode::Spat => k * c * r * s * h * w / (freq * pi * po * pt * pt),
        Mode::Wino => {
            let m = hw.m() as f64;
            let (dr, ds) = decomposition(layer);
            k * c * dr * ds * pt * pt * h * w / (freq * pi * po * pt * pt * m * m)
        }
    }
}

/// `comp_latency` with `K` and `C` rounded up to whole `PO` and `PI` lane
/// groups, which is what the PE actually iterates over.
pub fn lane_comp_latency(layer: &LayerSpec, hw: &HwConfig, mode: Mode) -> f64 {
    let padded = LayerSpec {
        k: layer.k.div_ceil(hw.po) * hw.po,
        c: layer.c.div_ceil(hw.pi) * hw.pi,
        ..layer.clone()
    };
    comp_latency(&padded, hw, mode)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadLatencies {
    pub t_ldw: f64,
    pub t_ldi: f64,
    pub t_sv: f64,
}

pub fn load_latencies(layer: &LayerSpec, hw: &HwConfig, mode: Mode) -> LoadLatencies {
    let (k, c, r, s, h, w) = dims(layer);
    let freq = hw.platform.freq_hz;
    let bw = hw.platform.bw_words_per_s;
    let pt = hw.pt as f64;
    let weight_words = match mode {
        Mode::Spat => k * c * r * s,
        Mode::Wino => {
            let (dr, ds) = decomposition(layer);
            k * c * dr * ds * pt * pt
        }
    };
    LoadLatencies {
        t_ldw: weight_words / bw.min(freq * hw.ldw_port()),
        t_ldi: c * h * w / bw.min(freq * hw.ldi_port()),
        t_sv: k * h * w / bw.min(freq * hw.sv_port()),
    }
}

fn dims(layer: &LayerSpec) -> (f64, f64, f64, f64, f64, f64) {
    (
        layer.k as f64,
        layer.c as f64,
        layer.r as f64,
        layer.s as f64,
        layer.h as f64,
        layer.w as f64,
    )
}

/// Which term of the max dominates a layer's latency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dominant {
    LoadInput,
    LoadWeight,
    Compute,
    Save,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerLatency {
    pub mode: Mode,
    pub dataflow: Dataflow,
    pub g_k: usize,
    pub t_cp: f64,
    pub t_ldw: f64,
    pub t_ldi: f64,
    pub t_sv: f64,
    pub t_penalty: f64,
    pub t_total: f64,
    pub dominant: Dominant,
}

/// Latency of one layer under a given mode, dataflow and weight-group count.
///
/// The steady-state term is the max of the four module terms. Input-stationary
/// reloads weights once per row-group, except that with a single weight group
/// the weights stay resident and are loaded once. Weight-stationary reloads
/// inputs once per weight group.
///
/// `T_penalty` is what a depth-2 pipeline adds on top of the dominant term.
/// Each module is bounded by the time before it can start (fill), its own
/// busy time, and the work that must follow its last operation (drain); the
/// layer takes the largest bound. The drain after the outer loop's last load
/// (inputs for IS, weights for WS) covers a whole inner loop.
pub fn layer_latency(layer: &LayerSpec, hw: &HwConfig, mode: Mode, dataflow: Dataflow, g_k: usize) -> LayerLatency {
    let t_cp = lane_comp_latency(layer, hw, mode);
    let LoadLatencies { t_ldw, t_ldi, t_sv } = load_latencies(layer, hw, mode);
    let groups = match mode {
        Mode::Spat => layer.h,
        Mode::Wino => layer.h.div_ceil(hw.m()),
    } as f64;
    let gk = g_k as f64;
    let (ldi_term, ldw_term) = match dataflow {
        Dataflow::Is => (t_ldi, if g_k > 1 { groups * t_ldw } else { t_ldw }),
        Dataflow::Ws => (gk * t_ldi, t_ldw),
    };
    let terms = [
        (Dominant::LoadInput, ldi_term),
        (Dominant::LoadWeight, ldw_term),
        (Dominant::Compute, t_cp),
        (Dominant::Save, t_sv),
    ];
    let (dominant, steady) =
        terms.iter().copied().fold(
            (Dominant::LoadInput, f64::MIN),
            |best, t| if t.1 > best.1 { t } else { best },
        );

    let iters = groups * gk;
    let cp_g = t_cp / iters;
    let sv_g = t_sv / iters;
    let ldi_first = t_ldi / groups;
    let ldw_first = t_ldw / gk;
    // Per-iteration load of the inner operand and the inner loop length. With
    // one weight group both dataflows load the weights once, up front.
    let (inner_g, n_inner, outer_term, inner_term) = if dataflow == Dataflow::Is && g_k > 1 {
        (ldw_first, gk, ldi_term, ldw_term)
    } else {
        (ldi_first, groups, ldw_term, ldi_term)
    };
    let fill = ldi_first.max(ldw_first);
    let outer_drain = (n_inner - 1.0).max(0.0) * inner_g.max(cp_g).max(sv_g) + cp_g + sv_g;
    let total = [
        outer_term + outer_drain,
        inner_term + cp_g + sv_g,
        fill + t_cp + sv_g,
        fill + cp_g + t_sv,
    ]
    .into_iter()
    .fold(steady, f64::max);
    let t_penalty = total - steady;
    LayerLatency {
        mode,
        dataflow,
        g_k,
        t_cp,
        t_ldw,
        t_ldi,
        t_sv,
        t_penalty,
        t_total: total,
        dominant,
    }
}

/// Plans the layer's partition and evaluates its latency; `None` when the
/// layer cannot be mapped in this mode.
pub fn estimate_layer(layer: &LayerSpec, hw: &HwConfig, mode: Mode, dataflow: Dataflow) -> Option<LayerLatency> {
    if layer.is_fc() && mode == Mode::Wino {
        return None;
    }
    let plan = plan_partition(layer, mode, hw).ok()?;
    Some(layer_latency(layer, hw, mode, dataflow, plan.g_k))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub layers: Vec<LayerLatency>,
    /// Sum of per-layer latencies of one instance, seconds.
    pub total: f64,
    /// Operations per second of all `NI` instances (2 ops per MAC).
    pub throughput_ops: f64,
}

/// Latency report of a model under a fixed schedule.
pub fn model_latency(model: &DnnModel, hw: &HwConfig, schedule: &Schedule) -> Result<LatencyReport> {
    schedule.validate(model)?;
    let mut layers = Vec::with_capacity(model.len());
    for (i, (layer, choice)) in model.layers.iter().zip(&schedule.layers).enumerate() {
        let plan = plan_partition(layer, choice.mode, hw).map_err(|e| match e {
            Error::Unmappable { reason, .. } => Error::Unmappable { layer: i, reason },
            other => other,
        })?;
        layers.push(layer_latency(layer, hw, choice.mode, choice.dataflow, plan.g_k));
    }
    let total = layers.iter().map(|l| l.t_total).sum();
    Ok(LatencyReport {
        throughput_ops: throughput(model, hw, total),
        layers,
        total,
    })
}

pub fn throughput(model: &DnnModel, hw: &HwConfig, total_seconds: f64) -> f64 {
    2.0 * model.total_macs() as f64 * hw.ni as f64 / total_seconds
}

/// Peak operations per second of all instances with every PE busy in
/// Winograd mode on 3x3 kernels.
pub fn peak_wino_ops(hw: &HwConfig) -> f64 {
    let m = hw.m() as f64;
    let r = WINO_R as f64;
    2.0 * (hw.pi * hw.po) as f64 * m * m * r * r * hw.platform.freq_hz * hw.ni as f64
}

/// Peak operations per second in Spatial mode.
pub fn peak_spat_ops(hw: &HwConfig) -> f64 {
    2.0 * (hw.pi * hw.po * hw.pt * hw.pt) as f64 * hw.platform.freq_hz * hw.ni as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LayerSpec;

    pub(crate) fn platform(freq: f64, bw: f64) -> Platform {
        Platform {
            name: "test".into(),
            freq_hz: freq,
            bw_words_per_s: bw,
            data_width: 12,
            bram_width: 18,
            bram_depth: 1024,
            dram_words: 1 << 32,
            caps: ResourceCaps {
                lut: 1e9,
                dsp: 1e9,
                bram: 1e9,
            },
            constants: ProfiledConstants::default(),
        }
    }

    fn hw(pi: usize, po: usize, pt: usize, alpha: f64, beta: f64) -> HwConfig {
        let mut p = platform(1.0, 1e12);
        p.constants.alpha = alpha;
        p.constants.beta = beta;
        HwConfig::new(pi, po, pt, 1, p).unwrap()
    }

    #[test]
    fn dsp_examples() {
        assert_eq!(dsp_util(&hw(4, 4, 6, 0.0, 0.0)), 580.0);
        assert_eq!(dsp_util(&hw(1, 1, 4, 0.0, 0.0)), 17.0);
        assert!(dsp_util(&hw(5, 4, 6, 1.0, 8.0)) > dsp_util(&hw(4, 4, 6, 1.0, 8.0)));
    }

    #[test]
    fn bram_and_lut_examples() {
        // 12/18 * (4*36 + 16*36 + 2*4*16)
        let expected = 12.0 / 18.0 * (144.0 + 576.0 + 128.0);
        assert!((bram_util(&hw(4, 4, 6, 1.0, 8.0)) - expected).abs() < 1e-9);
        // 48 * 576 * (1 + 0.05 * 16)
        assert!((lut_util(&hw(4, 4, 6, 1.0, 8.0)) - 48.0 * 576.0 * 1.8).abs() < 1e-9);
        assert!(lut_util(&hw(4, 3, 4, 1.0, 8.0)) < lut_util(&hw(4, 4, 4, 1.0, 8.0)));
        assert!(bram_util(&hw(4, 3, 4, 1.0, 8.0)) < bram_util(&hw(4, 4, 4, 1.0, 8.0)));
    }

    #[test]
    fn comp_latency_examples() {
        let layer = LayerSpec::conv(64, 64, 3, 3, 32, 32);
        let hw = hw(4, 4, 6, 1.0, 8.0);
        assert_eq!(comp_latency(&layer, &hw, Mode::Spat), 65_536.0);
        assert_eq!(comp_latency(&layer, &hw, Mode::Wino), 16_384.0);
        let fc = LayerSpec::fc(10, 100);
        assert!(comp_latency(&fc, &hw, Mode::Spat) < comp_latency(&fc, &hw, Mode::Wino));
    }

    #[test]
    fn weight_load_ratios() {
        let hw = hw(4, 4, 6, 1.0, 8.0);
        let five = LayerSpec::conv(8, 8, 5, 5, 16, 16);
        let r5 = load_latencies(&five, &hw, Mode::Wino).t_ldw / load_latencies(&five, &hw, Mode::Spat).t_ldw;
        assert!((r5 - 5.76).abs() < 1e-12, "{r5}");
        let three = LayerSpec::conv(8, 8, 3, 3, 16, 16);
        let r3 = load_latencies(&three, &hw, Mode::Wino).t_ldw / load_latencies(&three, &hw, Mode::Spat).t_ldw;
        assert!((r3 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn infinite_bandwidth_uses_ports() {
        let hw = hw(4, 4, 6, 1.0, 8.0);
        let layer = LayerSpec::conv(8, 8, 3, 3, 16, 16);
        let l = load_latencies(&layer, &hw, Mode::Spat);
        assert_eq!(l.t_ldi, 8.0 * 256.0 / 24.0);
        assert_eq!(l.t_sv, 8.0 * 256.0 / 24.0);
        assert_eq!(l.t_ldw, 8.0 * 8.0 * 9.0 / 96.0);
    }

    #[test]
    fn is_and_ws_agree_with_one_weight_group() {
        let hw = hw(4, 4, 6, 1.0, 8.0);
        for layer in [
            LayerSpec::conv(8, 8, 3, 3, 16, 16),
            LayerSpec::conv(64, 512, 3, 3, 8, 8),
        ] {
            for mode in [Mode::Spat, Mode::Wino] {
                let is = layer_latency(&layer, &hw, mode, Dataflow::Is, 1);
                let ws = layer_latency(&layer, &hw, mode, Dataflow::Ws, 1);
                assert_eq!(is.t_total, ws.t_total);
            }
        }
    }

    #[test]
    fn total_bounds_components() {
        let hw = hw(4, 4, 6, 1.0, 8.0);
        let layer = LayerSpec::conv(64, 32, 3, 3, 24, 24);
        for mode in [Mode::Spat, Mode::Wino] {
            for df in [Dataflow::Is, Dataflow::Ws] {
                let l = layer_latency(&layer, &hw, mode, df, 3);
                assert!(l.t_total >= l.t_cp.max(l.t_ldi).max(l.t_sv));
            }
        }
    }

    #[test]
    fn memory_bound_wino_prefers_spat() {
        let mut hw = hw(4, 4, 6, 1.0, 8.0);
        hw.platform.bw_words_per_s = 0.5;
        let layer = LayerSpec::conv(64, 64, 3, 3, 32, 32);
        let wino = layer_latency(&layer, &hw, Mode::Wino, Dataflow::Is, 2);
        let spat = layer_latency(&layer, &hw, Mode::Spat, Dataflow::Is, 2);
        assert_eq!(wino.dominant, Dominant::LoadWeight);
        assert!(spat.t_total < wino.t_total);
    }

    #[test]
    fn compute_bound_total_is_cp_plus_penalty() {
        let hw = hw(4, 4, 6, 1.0, 8.0);
        let layer = LayerSpec::conv(64, 64, 3, 3, 32, 32);
        let l = layer_latency(&layer, &hw, Mode::Spat, Dataflow::Is, 1);
        assert_eq!(l.dominant, Dominant::Compute);
        assert_eq!(l.t_total, l.t_cp + l.t_penalty);
    }

    #[test]
    fn platform_requires_positive_fields() {
        let mut p = platform(1.0, 1.0);
        p.caps.dsp = 0.0;
        assert!(p.validate().is_err());
        assert!(Platform::parse("{").is_err());
    }
}
