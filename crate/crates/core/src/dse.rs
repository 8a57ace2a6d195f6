//! Design-space exploration: hardware candidates, per-layer scheduling and
//! global selection.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::compiler::{LayerChoice, Mode, Schedule};
use crate::error::{Error, Result};
use crate::model::DnnModel;
use crate::perfmodel::{
    estimate_layer, fits, resource_usage, throughput, HwConfig, LayerLatency, Platform, ResourceUsage,
};

pub const TILE_SIZES: [usize; 2] = [4, 6];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub hw: HwConfig,
    pub schedule: Schedule,
    pub layers: Vec<LayerLatency>,
    /// Sum of layer latencies of one instance, seconds.
    pub total_latency: f64,
    /// Operations per second over all instances.
    pub throughput: f64,
    pub resources: ResourceUsage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidates {
    pub hw: Vec<HwConfig>,
    /// Last point reached by the round-robin walk for each tile size.
    pub frontier: Vec<HwConfig>,
}

fn feasible(pi: usize, po: usize, pt: usize, ni: usize, platform: &Platform) -> Option<HwConfig> {
    let hw = HwConfig::new(pi, po, pt, ni, platform.clone()).ok()?;
    fits(&hw).then_some(hw)
}

/// Round-robin single-step walk from `(1, 1, 1)` over the listed dimensions
/// (0 = PI, 1 = PO, 2 = NI), skipping steps that break a constraint, until a
/// full round makes no progress. Returns every visited point.
fn walk(pt: usize, dims: &[usize], platform: &Platform) -> Vec<HwConfig> {
    let Some(start) = feasible(1, 1, pt, 1, platform) else {
        return Vec::new();
    };
    let mut cur = [1usize; 3];
    let mut visited = vec![start];
    loop {
        let mut progressed = false;
        for &d in dims {
            let mut next = cur;
            next[d] += 1;
            if let Some(p) = feasible(next[0], next[1], pt, next[2], platform) {
                cur = next;
                visited.push(p);
                progressed = true;
            }
        }
        if !progressed {
            return visited;
        }
    }
}

/// Step (1) of the exploration. The `PI -> PO -> NI` round-robin walk is
/// joined by a `PI -> PO` walk at `NI = 1`, since growing `NI` early can stop
/// `PI`/`PO` short of the single-instance optimum. Every feasible `NI` is then
/// added for each visited `(PT, PI, PO)`.
pub fn enumerate_hw(platform: &Platform) -> Result<Candidates> {
    platform.validate()?;
    let mut hw = Vec::new();
    let mut frontier = Vec::new();
    for pt in TILE_SIZES {
        let full = walk(pt, &[0, 1, 2], platform);
        let Some(last) = full.last() else {
            continue;
        };
        frontier.push(last.clone());
        let mut pairs: Vec<(usize, usize)> = full
            .iter()
            .chain(&walk(pt, &[0, 1], platform))
            .map(|h| (h.pi, h.po))
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        for (pi, po) in pairs {
            let mut ni = 1;
            while let Some(p) = feasible(pi, po, pt, ni, platform) {
                hw.push(p);
                ni += 1;
            }
        }
    }
    if hw.is_empty() {
        return Err(Error::NoFeasibleHw(format!(
            "PI=PO=NI=1 exceeds the caps of platform `{}`",
            platform.name
        )));
    }
    hw.sort_by_key(|h| (h.pt, h.pi, h.po, h.ni));
    hw.dedup_by_key(|h| (h.pt, h.pi, h.po, h.ni));
    Ok(Candidates { hw, frontier })
}

/// Per-layer argmin over the four mode/dataflow choices; ties keep the
/// earlier choice, so `(spat, is)` wins. Fails if a layer fits no choice.
pub fn schedule_layers(hw: &HwConfig, model: &DnnModel) -> Result<(Schedule, Vec<LayerLatency>, f64)> {
    let mut choices = Vec::with_capacity(model.len());
    let mut latencies = Vec::with_capacity(model.len());
    for (i, layer) in model.layers.iter().enumerate() {
        let mut best: Option<(LayerChoice, LayerLatency)> = None;
        for choice in LayerChoice::all() {
            if layer.is_fc() && choice.mode == Mode::Wino {
                continue;
            }
            let Some(lat) = estimate_layer(layer, hw, choice.mode, choice.dataflow) else {
                continue;
            };
            if best.as_ref().is_none_or(|(_, b)| lat.t_total < b.t_total) {
                best = Some((choice, lat));
            }
        }
        let (choice, lat) = best.ok_or_else(|| Error::Unmappable {
            layer: i,
            reason: format!("no mode fits {}", hw.label()),
        })?;
        choices.push(choice);
        latencies.push(lat);
    }
    let total = latencies.iter().map(|l| l.t_total).sum();
    Ok((Schedule { layers: choices }, latencies, total))
}

pub fn design_point(hw: &HwConfig, model: &DnnModel, schedule: Schedule, layers: Vec<LayerLatency>) -> DesignPoint {
    let total_latency: f64 = layers.iter().map(|l| l.t_total).sum();
    DesignPoint {
        hw: hw.clone(),
        schedule,
        throughput: throughput(model, hw, total_latency),
        resources: resource_usage(hw),
        layers,
        total_latency,
    }
}

pub fn evaluate(hw: &HwConfig, model: &DnnModel) -> Result<DesignPoint> {
    let (schedule, layers, _) = schedule_layers(hw, model)?;
    Ok(design_point(hw, model, schedule, layers))
}

/// Ranking: lower latency, then more instances, then lower weighted resource
/// use, then `(PT, PI, PO, NI)` ascending.
pub fn compare(a: &DesignPoint, b: &DesignPoint) -> Ordering {
    a.total_latency
        .total_cmp(&b.total_latency)
        .then(b.hw.ni.cmp(&a.hw.ni))
        .then(
            a.resources
                .weighted(&a.hw.platform.caps)
                .total_cmp(&b.resources.weighted(&b.hw.platform.caps)),
        )
        .then((a.hw.pt, a.hw.pi, a.hw.po, a.hw.ni).cmp(&(b.hw.pt, b.hw.pi, b.hw.po, b.hw.ni)))
}

pub fn select_best(points: &[DesignPoint]) -> Result<DesignPoint> {
    let best = points.iter().min_by(|a, b| compare(a, b)).ok_or(Error::NoCandidates)?;
    if !fits(&best.hw) {
        return Err(Error::NoFeasibleHw(format!(
            "{} exceeds the platform caps",
            best.hw.label()
        )));
    }
    Ok(best.clone())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exploration {
    pub best: DesignPoint,
    /// Every evaluated candidate, best first.
    pub ranked: Vec<DesignPoint>,
    pub frontier: Vec<HwConfig>,
}

/// Enumerates candidates, schedules the model on each and ranks them.
/// Candidates on which some layer cannot be mapped are dropped.
pub fn explore(model: &DnnModel, platform: &Platform) -> Result<Exploration> {
    model.validate()?;
    let cands = enumerate_hw(platform)?;
    let mut ranked = Vec::new();
    for hw in &cands.hw {
        match evaluate(hw, model) {
            Ok(p) => ranked.push(p),
            Err(e) => log::debug!("skipping {}: {e}", hw.label()),
        }
    }
    ranked.sort_by(compare);
    let best = select_best(&ranked)?;
    Ok(Exploration {
        best,
        ranked,
        frontier: cands.frontier,
    })
}

/// Exhaustive search over every candidate and every per-layer choice tuple.
/// Exponential in the layer count; meant as a test oracle.
pub fn brute_force(model: &DnnModel, candidates: &[HwConfig]) -> Result<DesignPoint> {
    let n = model.len();
    let choices = LayerChoice::all();
    let mut best: Option<DesignPoint> = None;
    for hw in candidates {
        let table: Vec<Vec<Option<LayerLatency>>> = model
            .layers
            .iter()
            .map(|l| {
                choices
                    .iter()
                    .map(|c| {
                        if l.is_fc() && c.mode == Mode::Wino {
                            None
                        } else {
                            estimate_layer(l, hw, c.mode, c.dataflow)
                        }
                    })
                    .collect()
            })
            .collect();
        'tuples: for code in 0..4usize.pow(n as u32) {
            let mut picks = Vec::with_capacity(n);
            let mut lats = Vec::with_capacity(n);
            let mut rest = code;
            for row in &table {
                let c = rest % 4;
                rest /= 4;
                let Some(lat) = row[c] else { continue 'tuples };
                picks.push(choices[c]);
                lats.push(lat);
            }
            let point = design_point(hw, model, Schedule { layers: picks }, lats);
            if best.as_ref().is_none_or(|b| compare(&point, b) == Ordering::Less) {
                best = Some(point);
            }
        }
    }
    best.ok_or(Error::NoCandidates)
}
