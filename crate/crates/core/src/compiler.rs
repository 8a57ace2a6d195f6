//! Lowers a model, a per-layer schedule and a hardware instance into an
//! instruction stream plus a DRAM memory map.
//!
//! Each layer is split into row-groups along the output height (one row in
//! Spatial mode, `m` rows in Winograd mode) and `G_K` weight groups along the
//! output channels. Input-stationary keeps one input window and walks all
//! weight groups; weight-stationary keeps one weight group and walks all
//! windows. Every buffer is a pair of ping-pong slots and the compiler
//! alternates slots on each load.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::isa::{
    CompDims, Instruction, LayerSegment, LayoutMode, LoadBiasDims, LoadInpDims, LoadWgtDims, Op, Opcode, Program,
    SaveDims,
};
use crate::model::{DnnModel, LayerParams, LayerSpec};
use crate::perfmodel::{HwConfig, WINO_R};
use crate::simulator::layout::{read_tensor, write_tensor, DramLayout};
use crate::tensor::Tensor;
use crate::winograd::{decompose_kernel, transform_matrices, transform_weights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Spat,
    Wino,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataflow {
    Is,
    Ws,
}

impl Mode {
    pub const ALL: [Mode; 2] = [Mode::Spat, Mode::Wino];
}

impl Dataflow {
    pub const ALL: [Dataflow; 2] = [Dataflow::Is, Dataflow::Ws];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerChoice {
    pub mode: Mode,
    pub dataflow: Dataflow,
}

impl LayerChoice {
    pub fn new(mode: Mode, dataflow: Dataflow) -> Self {
        LayerChoice { mode, dataflow }
    }

    /// The four choices in tie-break order, `(spat, is)` first.
    pub fn all() -> [LayerChoice; 4] {
        [
            LayerChoice::new(Mode::Spat, Dataflow::Is),
            LayerChoice::new(Mode::Spat, Dataflow::Ws),
            LayerChoice::new(Mode::Wino, Dataflow::Is),
            LayerChoice::new(Mode::Wino, Dataflow::Ws),
        ]
    }
}

/// Per-layer mode and dataflow. Winograd layers use `F(m x m, 3 x 3)` with
/// `m = PT - 2` of the target hardware.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub layers: Vec<LayerChoice>,
}

impl Schedule {
    /// Same choice for every layer, except that fc layers stay Spatial.
    pub fn uniform(model: &DnnModel, mode: Mode, dataflow: Dataflow) -> Schedule {
        Schedule {
            layers: model
                .layers
                .iter()
                .map(|l| LayerChoice::new(if l.is_fc() { Mode::Spat } else { mode }, dataflow))
                .collect(),
        }
    }

    pub fn validate(&self, model: &DnnModel) -> Result<()> {
        if self.layers.len() != model.len() {
            return Err(Error::InvalidSchedule(format!(
                "schedule has {} entries for {} layers",
                self.layers.len(),
                model.len()
            )));
        }
        for (i, (layer, choice)) in model.layers.iter().zip(&self.layers).enumerate() {
            if layer.is_fc() && choice.mode == Mode::Wino {
                return Err(Error::InvalidSchedule(format!(
                    "layer {i} is fc and must use spat mode"
                )));
            }
        }
        Ok(())
    }
}

/// One band of output rows and the input window it needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowGroup {
    pub out_row: usize,
    pub rows: usize,
    /// First input row of the window in tensor coordinates; negative inside
    /// the top padding.
    pub window_top: isize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightGroup {
    pub first: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub mode: Mode,
    /// Output rows per row-group: 1 (spat) or `m` (wino).
    pub group_rows: usize,
    pub row_groups: Vec<RowGroup>,
    /// Input rows held on chip per row-group.
    pub window_rows: usize,
    /// On-chip input row pitch in pixels, padding included.
    pub pitch: usize,
    /// Sub-kernel grid; `(1, 1)` in Spatial mode.
    pub decomposition: (usize, usize),
    /// Weight words per (output channel, input channel, sub-kernel).
    pub kernel_words: usize,
    pub channels_per_group: usize,
    pub g_k: usize,
    pub weight_groups: Vec<WeightGroup>,
    /// Weight-buffer lines reserved per sub-kernel block.
    pub block_lines: usize,
}

impl PartitionPlan {
    pub fn sub_kernels(&self) -> usize {
        self.decomposition.0 * self.decomposition.1
    }

    pub fn window_words(&self, channels: usize) -> usize {
        self.window_rows * self.pitch * channels
    }
}

fn unmappable(reason: String) -> Error {
    Error::Unmappable { layer: 0, reason }
}

/// Largest channel group fitting every per-group buffer, before balancing.
fn max_channels_per_group(
    layer: &LayerSpec,
    hw: &HwConfig,
    group_rows: usize,
    kernel_words: usize,
    subs: usize,
) -> usize {
    let wline = hw.weight_banks();
    let lines_per_block = hw.slot_lines() / subs;
    let by_weight = lines_per_block * wline / (layer.c * kernel_words);
    let by_output = hw.output_slot_words() / (group_rows * layer.w);
    let by_bias = hw.bias_slot_words();
    // COMP and SAVE carry channel counts in 12-bit fields.
    by_weight.min(by_output).min(by_bias).min(4095).min(layer.k)
}

/// Splits a layer into row-groups and weight groups that fit the buffers.
pub fn plan_partition(layer: &LayerSpec, mode: Mode, hw: &HwConfig) -> Result<PartitionPlan> {
    if layer.is_fc() && mode == Mode::Wino {
        return Err(Error::InvalidSchedule("fc layers must use spat mode".into()));
    }
    let (_, _, w_in) = layer.input_dims();
    let pitch = w_in + 2 * layer.pad_left();
    let (group_rows, window_rows, decomposition, kernel_words) = match mode {
        Mode::Spat => (1, layer.r, (1, 1), layer.r * layer.s),
        Mode::Wino => {
            let m = hw.m();
            let dr = layer.r.div_ceil(WINO_R);
            let ds = layer.s.div_ceil(WINO_R);
            (m, dr * WINO_R + m - 1, (dr, ds), hw.pt * hw.pt)
        }
    };
    let subs = decomposition.0 * decomposition.1;

    let window_words = window_rows * pitch * layer.c;
    if window_words > hw.input_slot_words() {
        return Err(unmappable(format!(
            "input window of {window_words} words exceeds the {}-word input slot",
            hw.input_slot_words()
        )));
    }
    if pitch > 4095 || layer.w > 4095 || layer.c > 0xFFFF || window_rows > 63 || layer.pad_left() > 63 {
        return Err(unmappable("layer geometry exceeds instruction field widths".into()));
    }
    if subs > 1 && (decomposition.0 > 16 || decomposition.1 > 16) {
        return Err(unmappable("kernel decomposes into too many sub-kernels".into()));
    }
    if mode == Mode::Spat && (layer.r > 15 || layer.s > 15) {
        return Err(unmappable("spatial kernels are limited to 15x15".into()));
    }

    let fit = max_channels_per_group(layer, hw, group_rows, kernel_words, subs);
    if fit == 0 {
        return Err(unmappable("a single output channel does not fit the buffers".into()));
    }
    // Fewest groups, then balance them and align to PO when that keeps the count.
    let g_k = layer.k.div_ceil(fit);
    let mut cpg = layer.k.div_ceil(g_k);
    let aligned = cpg.div_ceil(hw.po) * hw.po;
    if aligned <= fit && layer.k.div_ceil(aligned) == g_k {
        cpg = aligned;
    }
    let weight_groups = (0..g_k)
        .map(|g| WeightGroup {
            first: g * cpg,
            count: cpg.min(layer.k - g * cpg),
        })
        .collect();
    let block_lines = (cpg * layer.c * kernel_words).div_ceil(hw.weight_banks());

    let row_groups = (0..layer.h.div_ceil(group_rows))
        .map(|g| {
            let out_row = g * group_rows;
            RowGroup {
                out_row,
                rows: group_rows.min(layer.h - out_row),
                window_top: out_row as isize - layer.pad_top() as isize,
            }
        })
        .collect();

    Ok(PartitionPlan {
        mode,
        group_rows,
        row_groups,
        window_rows,
        pitch,
        decomposition,
        kernel_words,
        channels_per_group: cpg,
        g_k,
        weight_groups,
        block_lines,
    })
}

/// DRAM placement of one layer's operands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerAddresses {
    pub input: usize,
    pub output: usize,
    pub weights: usize,
    pub bias: Option<usize>,
    /// Layout of the input tensor and of the saved output tensor.
    pub input_layout: DramLayout,
    pub output_layout: DramLayout,
}

struct Emitter<'a> {
    layer: &'a LayerSpec,
    plan: &'a PartitionPlan,
    hw: &'a HwConfig,
    wino: bool,
    save_layout: LayoutMode,
    addr: LayerAddresses,
    out: Vec<Instruction>,
    in_slot: usize,
    w_slot: usize,
    out_slot: usize,
}

impl Emitter<'_> {
    fn push(&mut self, op: Op) -> &mut Instruction {
        self.out.push(Instruction::new(op, self.wino));
        self.out.last_mut().expect("just pushed")
    }

    fn load_input(&mut self, group: &RowGroup, reuse: bool) {
        let (_, h_in, w_in) = self.layer.input_dims();
        let slot = self.in_slot;
        let base = (slot * self.hw.slot_lines()) as u16;
        let dims = LoadInpDims {
            channels: self.layer.c as u32,
            window_rows: self.plan.window_rows as u32,
            reuse,
            tensor_cols: w_in as u32,
            tensor_rows: h_in as u32,
            window_top: group.window_top as i32,
            pad_left: self.layer.pad_left() as u32,
        };
        let dram = self.addr.input as u32;
        let wino_in = self.addr.input_layout.is_wino();
        let instr = self.push(Op::LoadInp(dims));
        instr.buff_base = base;
        instr.dram_base = dram;
        instr.layout = LayoutMode::between(wino_in, wino_in);
    }

    /// Loads bias and every sub-kernel block of a weight group into the
    /// current weight slot.
    fn load_weights(&mut self, group: &WeightGroup) {
        let slot = self.w_slot;
        if let Some(bias) = self.addr.bias {
            let instr = self.push(Op::LoadBias(LoadBiasDims {
                count: group.count as u32,
            }));
            instr.buff_base = slot as u16;
            instr.dram_base = (bias + group.first) as u32;
        }
        let per_kernel = self.layer.c * self.plan.kernel_words;
        for d in 0..self.plan.sub_kernels() {
            // DRAM order is [d][k][c][e]; a group's block is contiguous.
            let offset = d * self.layer.k * per_kernel + group.first * per_kernel;
            let line = slot * self.hw.slot_lines() + d * self.plan.block_lines;
            let dram = (self.addr.weights + offset) as u32;
            let instr = self.push(Op::LoadWgt(LoadWgtDims {
                words: (group.count * per_kernel) as u32,
            }));
            instr.buff_base = line as u16;
            instr.dram_base = dram;
        }
    }

    fn compute_and_save(&mut self, rows: &RowGroup, group: &WeightGroup, w_slot: usize) {
        let (dr, ds) = self.plan.decomposition;
        for d in 0..dr * ds {
            let (kr, ks) = match self.plan.mode {
                Mode::Spat => (self.layer.r, self.layer.s),
                Mode::Wino => (d / ds, d % ds),
            };
            let line = w_slot * self.hw.slot_lines() + d * self.plan.block_lines;
            let dims = CompDims {
                in_channels: self.layer.c as u32,
                out_rows: self.plan.group_rows as u32,
                kr: kr as u32,
                out_channels: group.count as u32,
                out_cols: self.layer.w as u32,
                stride: self.plan.pitch as u32,
                ks: ks as u32,
                in_slot: self.in_slot as u32,
                out_slot: self.out_slot as u32,
            };
            let instr = self.push(Op::Comp(dims));
            instr.buff_base = line as u16;
            instr.accumulate = d > 0;
        }
        let dims = SaveDims {
            channels: group.count as u32,
            cols: self.layer.w as u32,
            first_channel: group.first as u32,
            first_row: rows.out_row as u32,
            total_channels: self.layer.k as u32,
            valid_rows: rows.rows as u32,
            out_slot: self.out_slot as u32,
            bias: self.addr.bias.is_some(),
            bias_slot: w_slot as u32,
        };
        let relu = self.layer.relu;
        let layout = self.save_layout;
        let dram = self.addr.output as u32;
        let instr = self.push(Op::Save(dims));
        instr.relu = relu;
        instr.layout = layout;
        instr.dram_base = dram;
        self.out_slot ^= 1;
    }
}

/// Instruction stream of one layer.
///
/// Input-stationary: per row-group one `LOAD_INP`, then per weight group
/// `[LOAD_BIAS] LOAD_WGT x D, COMP x D, SAVE`. With a single weight group the
/// weights stay resident and are loaded only for the first row-group.
/// Weight-stationary: per weight group `[LOAD_BIAS] LOAD_WGT x D`, then per
/// row-group `LOAD_INP, COMP x D, SAVE`.
pub fn compile_layer(
    layer: &LayerSpec,
    mode: Mode,
    dataflow: Dataflow,
    plan: &PartitionPlan,
    next_mode: Mode,
    hw: &HwConfig,
    addr: LayerAddresses,
) -> Vec<Instruction> {
    let mut e = Emitter {
        layer,
        plan,
        hw,
        wino: mode == Mode::Wino,
        save_layout: LayoutMode::between(mode == Mode::Wino, next_mode == Mode::Wino),
        addr,
        out: Vec::new(),
        in_slot: 0,
        w_slot: 0,
        out_slot: 0,
    };
    match dataflow {
        Dataflow::Is => {
            let resident = plan.g_k == 1;
            for (gi, rows) in plan.row_groups.iter().enumerate() {
                e.load_input(rows, gi > 0);
                for group in &plan.weight_groups {
                    if !resident || gi == 0 {
                        e.load_weights(group);
                        e.w_slot ^= 1;
                    }
                    let slot = e.w_slot ^ 1;
                    e.compute_and_save(rows, group, slot);
                }
                e.in_slot ^= 1;
            }
        }
        Dataflow::Ws => {
            for group in &plan.weight_groups {
                e.load_weights(group);
                let slot = e.w_slot;
                e.w_slot ^= 1;
                for (gi, rows) in plan.row_groups.iter().enumerate() {
                    e.load_input(rows, gi > 0);
                    e.compute_and_save(rows, group, slot);
                    e.in_slot ^= 1;
                }
            }
        }
    }
    e.out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub offset: usize,
    pub len: usize,
}

impl Region {
    pub fn end(&self) -> usize {
        self.offset + self.len
    }

    pub fn overlaps(&self, other: &Region) -> bool {
        self.offset < other.end() && other.offset < self.end()
    }
}

/// Named DRAM regions plus per-layer operand placement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryMap {
    pub regions: BTreeMap<String, Region>,
    pub layers: Vec<LayerAddresses>,
    pub total_words: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompiledModel {
    pub program: Program,
    pub map: MemoryMap,
    pub plans: Vec<PartitionPlan>,
    pub schedule: Schedule,
    /// Winograd tile size the stream was built for.
    pub m: usize,
}

/// Weight words a layer occupies in DRAM under a mode.
pub fn weight_words(layer: &LayerSpec, mode: Mode, pt: usize) -> usize {
    match mode {
        Mode::Spat => layer.k * layer.c * layer.r * layer.s,
        Mode::Wino => layer.k * layer.c * layer.r.div_ceil(WINO_R) * layer.s.div_ceil(WINO_R) * pt * pt,
    }
}

/// Tensor entering layer `i + 1` after host-side ops, as `(C, H, W)`.
fn next_input_dims(model: &DnnModel, i: usize) -> (usize, usize, usize) {
    model.layers[i + 1].input_dims()
}

pub fn compile_model(model: &DnnModel, schedule: &Schedule, hw: &HwConfig) -> Result<CompiledModel> {
    hw.validate()?;
    model.validate()?;
    schedule.validate(model)?;
    let m = hw.m();
    let layout = |mode: Mode| DramLayout::new(mode == Mode::Wino, m);

    let mut plans = Vec::with_capacity(model.len());
    for (i, (layer, choice)) in model.layers.iter().zip(&schedule.layers).enumerate() {
        let plan = plan_partition(layer, choice.mode, hw).map_err(|e| match e {
            Error::Unmappable { reason, .. } => Error::Unmappable { layer: i, reason },
            other => other,
        })?;
        plans.push(plan);
    }

    // Memory map: input, per-layer weights and biases, two activation regions.
    let mut regions = BTreeMap::new();
    let mut cursor = 0usize;
    let mut alloc = |name: String, len: usize, regions: &mut BTreeMap<String, Region>| {
        let r = Region { offset: cursor, len };
        cursor += len;
        regions.insert(name, r);
        r
    };
    let first = &model.layers[0];
    let (c0, h0, w0) = first.input_dims();
    let input_layout = layout(schedule.layers[0].mode);
    let input_region = alloc("input".into(), input_layout.words(c0, h0, w0), &mut regions);

    let mut weight_regions = Vec::new();
    let mut bias_regions = Vec::new();
    for (i, (layer, choice)) in model.layers.iter().zip(&schedule.layers).enumerate() {
        weight_regions.push(alloc(
            format!("weights.{i}"),
            weight_words(layer, choice.mode, hw.pt),
            &mut regions,
        ));
        bias_regions.push(layer.bias.then(|| alloc(format!("bias.{i}"), layer.k, &mut regions)));
    }

    // Layer i saves in the layout of layer i + 1; the last layer saves Spatial.
    let out_modes: Vec<Mode> = (0..model.len())
        .map(|i| schedule.layers.get(i + 1).map_or(Mode::Spat, |c| c.mode))
        .collect();
    let mut act_len = 0;
    for (i, layer) in model.layers.iter().enumerate() {
        let lay = layout(out_modes[i]);
        act_len = act_len.max(lay.words(layer.k, layer.h, layer.w));
        if i + 1 < model.len() {
            let (c, h, w) = next_input_dims(model, i);
            act_len = act_len.max(lay.words(c, h, w));
        }
    }
    let acts = [
        alloc("act.0".into(), act_len, &mut regions),
        alloc("act.1".into(), act_len, &mut regions),
    ];
    let total_words = cursor;
    if total_words as u64 > hw.platform.dram_words {
        return Err(Error::DramCapacity {
            needed: total_words as u64,
            available: hw.platform.dram_words,
        });
    }
    if total_words > u32::MAX as usize {
        return Err(Error::DramCapacity {
            needed: total_words as u64,
            available: u32::MAX as u64,
        });
    }

    let mut instructions = Vec::new();
    let mut segments = Vec::new();
    let mut layers = Vec::new();
    for (i, (layer, choice)) in model.layers.iter().zip(&schedule.layers).enumerate() {
        let input = if i == 0 { input_region } else { acts[(i - 1) % 2] };
        let addr = LayerAddresses {
            input: input.offset,
            output: acts[i % 2].offset,
            weights: weight_regions[i].offset,
            bias: bias_regions[i].map(|r| r.offset),
            input_layout: layout(choice.mode),
            output_layout: layout(out_modes[i]),
        };
        let start = instructions.len();
        instructions.extend(compile_layer(
            layer,
            choice.mode,
            choice.dataflow,
            &plans[i],
            out_modes[i],
            hw,
            addr,
        ));
        segments.push(LayerSegment {
            layer: i,
            start,
            end: instructions.len(),
        });
        layers.push(addr);
    }
    for instr in &instructions {
        instr.validate()?;
    }
    let program = Program { instructions, segments };
    let compiled = CompiledModel {
        program,
        map: MemoryMap {
            regions,
            layers,
            total_words,
        },
        plans,
        schedule: schedule.clone(),
        m,
    };
    lint(&compiled.program, hw)?;
    Ok(compiled)
}

/// DRAM contents before execution: input, pre-transformed weights, biases.
pub fn build_dram_image(
    model: &DnnModel,
    compiled: &CompiledModel,
    hw: &HwConfig,
    input: &Tensor,
    params: &[LayerParams],
) -> Result<Vec<f64>> {
    let (c0, h0, w0) = model.layers[0].input_dims();
    if input.dims() != [c0, h0, w0] {
        return Err(Error::ShapeMismatch(format!(
            "input {:?} does not match the first layer's {:?}",
            input.dims(),
            [c0, h0, w0]
        )));
    }
    if params.len() != model.len() {
        return Err(Error::ShapeMismatch("one parameter set per layer required".into()));
    }
    let mut dram = vec![0.0; compiled.map.total_words];
    write_tensor(
        &mut dram,
        compiled.map.layers[0].input,
        input,
        compiled.map.layers[0].input_layout,
    );
    let mats = transform_matrices(hw.wino_params())?;
    for (i, layer) in model.layers.iter().enumerate() {
        let p = &params[i];
        if p.weights.dims() != [layer.k, layer.c, layer.r, layer.s] {
            return Err(Error::ShapeMismatch(format!(
                "layer {i} weights {:?}",
                p.weights.dims()
            )));
        }
        let addr = compiled.map.layers[i];
        let base = addr.weights;
        match compiled.schedule.layers[i].mode {
            Mode::Spat => dram[base..base + p.weights.len()].copy_from_slice(p.weights.data()),
            Mode::Wino => {
                let e = hw.pt * hw.pt;
                let block = layer.k * layer.c * e;
                for (d, sub) in decompose_kernel(&p.weights, WINO_R).iter().enumerate() {
                    for (kc, tile) in transform_weights(&sub.weights, &mats).iter().enumerate() {
                        let off = base + d * block + kc * e;
                        dram[off..off + e].copy_from_slice(tile);
                    }
                }
            }
        }
        if let Some(b) = addr.bias {
            let bias = p
                .bias
                .as_ref()
                .ok_or_else(|| Error::ShapeMismatch(format!("layer {i} needs a bias")))?;
            dram[b..b + layer.k].copy_from_slice(bias.data());
        }
    }
    Ok(dram)
}

/// Final activation, read back from DRAM in logical order.
pub fn read_output(model: &DnnModel, compiled: &CompiledModel, dram: &[f64]) -> Tensor {
    let last = model.len() - 1;
    let layer = &model.layers[last];
    let addr = compiled.map.layers[last];
    read_tensor(dram, addr.output, layer.output_dims(), addr.output_layout)
}

/// Reads layer `i`'s output and rewrites it as layer `i + 1`'s input after
/// host-side pooling and flattening. No-op when there is nothing to do.
pub fn apply_host_ops(model: &DnnModel, compiled: &CompiledModel, i: usize, dram: &mut [f64]) {
    let layer = &model.layers[i];
    if i + 1 >= model.len() || (layer.host_pool.is_none() && !model.flatten_after(i)) {
        return;
    }
    let addr = compiled.map.layers[i];
    let out = read_tensor(dram, addr.output, layer.output_dims(), addr.output_layout);
    let next = crate::model::host_ops(model, i, out);
    let next_addr = compiled.map.layers[i + 1];
    write_tensor(dram, next_addr.input, &next, next_addr.input_layout);
}

/// Static token check: every consumer must be preceded by a producer of the
/// buffer region it reads, and geometry must agree between a COMP and the
/// load that filled its input slot.
pub fn lint(program: &Program, hw: &HwConfig) -> Result<()> {
    let lines = hw.slot_lines();
    let mut input: [Option<LoadInpDims>; 2] = [None, None];
    let mut weight_lines = vec![false; 2 * lines];
    let mut bias = [false; 2];
    let mut output = [false; 2];
    let dep = |index: usize, detail: String| Error::Dependency { index, detail };
    for (index, instr) in program.instructions.iter().enumerate() {
        match instr.op {
            Op::LoadInp(d) => {
                let base = instr.buff_base as usize;
                if !base.is_multiple_of(lines) || base / lines > 1 {
                    return Err(dep(index, format!("input base line {base} is not a slot start")));
                }
                if d.reuse && input[1 - base / lines].is_none() {
                    return Err(dep(index, "reuse without a previous window".into()));
                }
                input[base / lines] = Some(d);
            }
            Op::LoadWgt(d) => {
                let first = instr.buff_base as usize;
                let n = (d.words as usize).div_ceil(hw.weight_banks());
                if first + n > weight_lines.len() {
                    return Err(dep(index, "weight load past the buffer end".into()));
                }
                weight_lines[first..first + n].iter_mut().for_each(|l| *l = true);
            }
            Op::LoadBias(_) => {
                let slot = instr.buff_base as usize;
                if slot > 1 {
                    return Err(dep(index, format!("bias slot {slot}")));
                }
                bias[slot] = true;
            }
            Op::Comp(d) => {
                let Some(win) = input[d.in_slot as usize] else {
                    return Err(dep(
                        index,
                        format!("COMP reads input slot {} before any LOAD_INP", d.in_slot),
                    ));
                };
                if win.channels != d.in_channels || win.tensor_cols + 2 * win.pad_left != d.stride {
                    return Err(dep(
                        index,
                        "COMP geometry disagrees with the loaded input window".into(),
                    ));
                }
                if !weight_lines.get(instr.buff_base as usize).copied().unwrap_or(false) {
                    return Err(dep(
                        index,
                        format!("COMP reads weight line {} before any LOAD_WGT", instr.buff_base),
                    ));
                }
                if instr.accumulate && !output[d.out_slot as usize] {
                    return Err(dep(index, "accumulating COMP without a prior partial".into()));
                }
                output[d.out_slot as usize] = true;
            }
            Op::Save(d) => {
                if !output[d.out_slot as usize] {
                    return Err(dep(
                        index,
                        format!("SAVE reads output slot {} before any COMP", d.out_slot),
                    ));
                }
                if d.bias && !bias[d.bias_slot as usize] {
                    return Err(dep(
                        index,
                        format!("SAVE reads bias slot {} before LOAD_BIAS", d.bias_slot),
                    ));
                }
                output[d.out_slot as usize] = false;
            }
        }
        debug_assert!(Opcode::ALL.contains(&instr.opcode()));
    }
    Ok(())
}
