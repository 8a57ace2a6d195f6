//! Functional and cycle-approximate model of the accelerator.
//!
//! Four modules (LOAD_INP, LOAD_WGT, COMP, SAVE) each drain their own
//! instruction queue in program order. LOAD_BIAS runs on the LOAD_WGT module.
//! Cross-module ordering comes only from buffer tokens: a consumer waits for
//! the producer that last wrote the ping-pong slot it reads, and a producer
//! waits until every consumer of the slot's previous contents has finished.
//! Timing is a list schedule over that dependency graph; data is computed in
//! program order, which yields the same values as any legal interleaving.

pub mod layout;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::compiler::{apply_host_ops, build_dram_image, read_output, CompiledModel};
use crate::error::{Error, Result};
use crate::isa::{CompDims, Instruction, LoadInpDims, Op, Program, SaveDims};
use crate::model::{layer_macs, DnnModel, LayerParams};
use crate::perfmodel::HwConfig;
use crate::tensor::Tensor;
use crate::winograd::{inverse_transform, transform_input_tile, transform_matrices, TransformMatrices};

use layout::{save_layout_transform, DramLayout, TileBlock};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Module {
    LoadInp,
    LoadWgt,
    Comp,
    Save,
}

impl Module {
    pub const ALL: [Module; 4] = [Module::LoadInp, Module::LoadWgt, Module::Comp, Module::Save];

    pub fn of(instr: &Instruction) -> Module {
        match instr.op {
            Op::LoadInp(_) => Module::LoadInp,
            Op::LoadWgt(_) | Op::LoadBias(_) => Module::LoadWgt,
            Op::Comp(_) => Module::Comp,
            Op::Save(_) => Module::Save,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Module::LoadInp => "load_inp",
            Module::LoadWgt => "load_wgt",
            Module::Comp => "comp",
            Module::Save => "save",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceKind {
    Start,
    Done,
    Stall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub cycle: u64,
    pub module: Module,
    pub kind: TraceKind,
    pub index: usize,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            TraceKind::Start => "start",
            TraceKind::Done => "done",
            TraceKind::Stall => "stall",
        };
        write!(f, "{},{},{},{}", self.cycle, self.module.name(), kind, self.index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOptions {
    pub double_buffer: bool,
    pub trace: bool,
    /// Skip data movement and arithmetic; only cycles are computed.
    pub timing_only: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            double_buffer: true,
            trace: false,
            timing_only: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub dram: Vec<f64>,
    pub total_cycles: u64,
    pub busy: BTreeMap<Module, u64>,
    /// Cycles modules spent waiting on tokens while having work queued.
    pub stall_cycles: u64,
    pub trace: Vec<TraceEvent>,
    /// Cycle at which each layer segment completes.
    pub layer_end: Vec<u64>,
}

impl SimResult {
    pub fn busy_sum(&self) -> u64 {
        self.busy.values().sum()
    }

    pub fn trace_text(&self) -> String {
        let mut s = String::new();
        for e in &self.trace {
            s.push_str(&e.to_string());
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub total_cycles: u64,
    pub per_module_busy: BTreeMap<String, u64>,
    pub stall_cycles: u64,
    pub gops_at_freq: f64,
}

impl Summary {
    /// `ops` is the operation count of the run (2 per MAC).
    pub fn new(result: &SimResult, hw: &HwConfig, ops: f64) -> Summary {
        let seconds = result.total_cycles as f64 / hw.platform.freq_hz;
        Summary {
            total_cycles: result.total_cycles,
            per_module_busy: result.busy.iter().map(|(m, c)| (m.name().to_string(), *c)).collect(),
            stall_cycles: result.stall_cycles,
            gops_at_freq: if seconds > 0.0 { ops / seconds / 1e9 } else { 0.0 },
        }
    }
}

/// One cycle of one GEMM core: a `PI x PO` broadcast array computing a GEMV.
///
/// `weights` is `PI x PO` row-major. Only the first `lanes_in` inputs and
/// `lanes_out` outputs are active. Products are added into `acc` one input
/// lane at a time, ascending.
#[inline]
pub fn gemv_step(inputs: &[f64], weights: &[f64], po: usize, lanes_in: usize, lanes_out: usize, acc: &mut [f64]) {
    for p in 0..lanes_in {
        let x = inputs[p];
        let row = &weights[p * po..p * po + lanes_out];
        for (a, w) in acc[..lanes_out].iter_mut().zip(row) {
            *a += w * x;
        }
    }
}

/// One cycle of the whole PE: every one of the `PT x PT` cores runs a GEMV
/// on its own input vector and weight block. Inputs are `cores x PI`,
/// weights `cores x PI x PO`, accumulators `cores x PO`.
pub fn pe_step(pi: usize, po: usize, inputs: &[f64], weights: &[f64], acc: &mut [f64]) {
    let cores = acc.len() / po;
    for core in 0..cores {
        gemv_step(
            &inputs[core * pi..(core + 1) * pi],
            &weights[core * pi * po..(core + 1) * pi * po],
            po,
            pi,
            po,
            &mut acc[core * po..(core + 1) * po],
        );
    }
}

/// Per-slot token bookkeeping for one ping-pong resource.
#[derive(Debug, Clone, Copy, Default)]
struct Token {
    written: bool,
    write_end: u64,
    writer: Option<Module>,
    reads_end: u64,
}

impl Token {
    fn read_ready(&self, consumer: Module, index: usize) -> Result<u64> {
        if !self.written {
            return Err(Error::Deadlock {
                consumer: consumer.name(),
                producer: self.writer.map_or(producer_of(consumer), Module::name),
                index,
            });
        }
        Ok(self.write_end)
    }

    fn write_ready(&self) -> u64 {
        self.write_end.max(self.reads_end)
    }

    fn record_read(&mut self, end: u64) {
        self.reads_end = self.reads_end.max(end);
    }

    fn record_write(&mut self, module: Module, end: u64) {
        self.written = true;
        self.write_end = end;
        self.writer = Some(module);
        self.reads_end = 0;
    }
}

fn producer_of(consumer: Module) -> &'static str {
    match consumer {
        Module::Comp => "load",
        Module::Save => "comp",
        _ => "load",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Res {
    Input(usize),
    Weight(usize),
    Bias(usize),
    Output(usize),
}

#[derive(Default)]
struct Tokens {
    input: [Token; 2],
    weight: [Token; 2],
    bias: [Token; 2],
    output: [Token; 2],
}

impl Tokens {
    fn get(&mut self, r: Res) -> &mut Token {
        match r {
            Res::Input(s) => &mut self.input[s],
            Res::Weight(s) => &mut self.weight[s],
            Res::Bias(s) => &mut self.bias[s],
            Res::Output(s) => &mut self.output[s],
        }
    }
}

/// Previous input window, for row reuse.
#[derive(Debug, Clone, Copy)]
struct Window {
    slot: usize,
    top: i64,
    rows: usize,
    pitch: usize,
    channels: usize,
}

struct Machine<'a> {
    hw: &'a HwConfig,
    mats: TransformMatrices,
    input: [Vec<f64>; 2],
    weight: Vec<f64>,
    bias: [Vec<f64>; 2],
    output: [Vec<f64>; 2],
    window: Option<Window>,
    functional: bool,
}

fn slot_of(line: usize, lines: usize, index: usize, buffer: &'static str) -> Result<usize> {
    let slot = line / lines;
    if slot > 1 {
        return Err(Error::BufferOverrun {
            buffer,
            index,
            detail: format!("line {line} is past the second slot"),
        });
    }
    Ok(slot)
}

fn overrun(buffer: &'static str, index: usize, needed: usize, have: usize) -> Error {
    Error::BufferOverrun {
        buffer,
        index,
        detail: format!("needs {needed} words, slot holds {have}"),
    }
}

fn dram_layout(wino: bool, hw: &HwConfig) -> DramLayout {
    DramLayout::new(wino, hw.m())
}

impl Machine<'_> {
    /// Rows of the window that must come from DRAM, honoring reuse.
    fn fetched_rows(&self, d: &LoadInpDims, slot: usize) -> Vec<usize> {
        let top = d.window_top as i64;
        let reuse = self.reusable(d, slot);
        (0..d.window_rows as usize)
            .filter(|&r| {
                let y = top + r as i64;
                if y < 0 || y >= d.tensor_rows as i64 {
                    return false;
                }
                match reuse {
                    Some(w) => y < w.top || y >= w.top + w.rows as i64,
                    None => true,
                }
            })
            .collect()
    }

    fn reusable(&self, d: &LoadInpDims, slot: usize) -> Option<Window> {
        if !d.reuse {
            return None;
        }
        self.window
            .filter(|w| w.slot != slot && w.pitch == d.pitch() as usize && w.channels == d.channels as usize)
    }

    fn load_inp(&mut self, instr: &Instruction, d: &LoadInpDims, index: usize, dram: &[f64]) -> Result<u64> {
        let lines = self.hw.slot_lines();
        let slot = slot_of(instr.buff_base as usize, lines, index, "input")?;
        if !(instr.buff_base as usize).is_multiple_of(lines) {
            return Err(Error::BufferOverrun {
                buffer: "input",
                index,
                detail: "window must start at a slot boundary".into(),
            });
        }
        let (c, pitch, rows) = (d.channels as usize, d.pitch() as usize, d.window_rows as usize);
        let words = rows * pitch * c;
        if words > self.hw.input_slot_words() {
            return Err(overrun("input", index, words, self.hw.input_slot_words()));
        }
        if d.reuse && self.reusable(d, slot).is_none() {
            return Err(Error::Dependency {
                index,
                detail: "reuse requested but the previous window is incompatible".into(),
            });
        }
        let fetched = self.fetched_rows(d, slot);
        let cols = d.tensor_cols as usize;
        let cost_words = fetched.len() * cols * c;

        if self.functional {
            let top = d.window_top as i64;
            let mut win = vec![0.0; words];
            if let Some(prev) = self.reusable(d, slot) {
                let old = &self.input[prev.slot];
                for r in 0..rows {
                    let y = top + r as i64;
                    if y >= prev.top && y < prev.top + prev.rows as i64 && y >= 0 && y < d.tensor_rows as i64 {
                        let src = (y - prev.top) as usize * pitch * c;
                        win[r * pitch * c..(r + 1) * pitch * c].copy_from_slice(&old[src..src + pitch * c]);
                    }
                }
            }
            let lay = dram_layout(instr.layout.source_is_wino(), self.hw);
            let base = instr.dram_base as usize;
            let pad = d.pad_left as usize;
            for &r in &fetched {
                let y = (top + r as i64) as usize;
                for x in 0..cols {
                    let first = base + lay.offset(c, cols, 0, y, x);
                    if first + c > dram.len() {
                        return Err(Error::DramOutOfBounds {
                            index,
                            address: (first + c - 1) as u64,
                        });
                    }
                    let dst = (r * pitch + pad + x) * c;
                    win[dst..dst + c].copy_from_slice(&dram[first..first + c]);
                }
            }
            self.input[slot][..words].copy_from_slice(&win);
        }
        self.window = Some(Window {
            slot,
            top: d.window_top as i64,
            rows,
            pitch,
            channels: c,
        });
        Ok(cost_words as u64)
    }

    fn load_wgt(&mut self, instr: &Instruction, words: usize, index: usize, dram: &[f64]) -> Result<()> {
        let first = instr.buff_base as usize * self.hw.weight_banks();
        if first + words > self.weight.len() {
            return Err(overrun("weight", index, first + words, self.weight.len()));
        }
        let lines = self.hw.slot_lines();
        let end_line = (instr.buff_base as usize * self.hw.weight_banks() + words).div_ceil(self.hw.weight_banks());
        if words > 0 && (end_line - 1) / lines != instr.buff_base as usize / lines {
            return Err(Error::BufferOverrun {
                buffer: "weight",
                index,
                detail: "load crosses a slot boundary".into(),
            });
        }
        if self.functional {
            let src = instr.dram_base as usize;
            if src + words > dram.len() {
                return Err(Error::DramOutOfBounds {
                    index,
                    address: (src + words) as u64,
                });
            }
            self.weight[first..first + words].copy_from_slice(&dram[src..src + words]);
        }
        Ok(())
    }

    fn load_bias(&mut self, instr: &Instruction, count: usize, index: usize, dram: &[f64]) -> Result<()> {
        let slot = instr.buff_base as usize;
        if slot > 1 || count > self.hw.bias_slot_words() {
            return Err(overrun("bias", index, count, self.hw.bias_slot_words()));
        }
        if self.functional {
            let src = instr.dram_base as usize;
            if src + count > dram.len() {
                return Err(Error::DramOutOfBounds {
                    index,
                    address: (src + count) as u64,
                });
            }
            self.bias[slot][..count].copy_from_slice(&dram[src..src + count]);
        }
        Ok(())
    }

    fn check_comp(&self, instr: &Instruction, d: &CompDims, index: usize) -> Result<()> {
        let (c, k, w) = (d.in_channels as usize, d.out_channels as usize, d.out_cols as usize);
        let pitch = d.stride as usize;
        let out_words = k * d.out_rows as usize * w;
        if out_words > self.hw.output_slot_words() {
            return Err(overrun("output", index, out_words, self.hw.output_slot_words()));
        }
        let kernel = if instr.wino {
            self.hw.pt * self.hw.pt
        } else {
            (d.kr * d.ks) as usize
        };
        let wfirst = instr.buff_base as usize * self.hw.weight_banks();
        if wfirst + k * c * kernel > self.weight.len() {
            return Err(overrun("weight", index, wfirst + k * c * kernel, self.weight.len()));
        }
        let needed_rows = if instr.wino {
            d.kr as usize * 3 + self.hw.pt
        } else {
            d.out_rows as usize + d.kr as usize - 1
        };
        if needed_rows * pitch * c > self.hw.input_slot_words() {
            return Err(overrun(
                "input",
                index,
                needed_rows * pitch * c,
                self.hw.input_slot_words(),
            ));
        }
        Ok(())
    }

    fn comp_cycles(&self, instr: &Instruction, d: &CompDims) -> u64 {
        let (pi, po, pt) = (self.hw.pi, self.hw.po, self.hw.pt);
        let cch = (d.in_channels as usize).div_ceil(pi);
        let och = (d.out_channels as usize).div_ceil(po);
        if instr.wino {
            let tiles_x = (d.out_cols as usize).div_ceil(self.hw.m());
            (tiles_x * cch * och) as u64
        } else {
            let units = d.out_rows as usize * d.out_cols as usize * (d.kr * d.ks) as usize * cch;
            (units.div_ceil(pt * pt) * och) as u64
        }
    }

    fn comp_wino(&mut self, instr: &Instruction, d: &CompDims) {
        let (pi, po, pt, m) = (self.hw.pi, self.hw.po, self.hw.pt, self.hw.m());
        let e_count = pt * pt;
        let (c, k, w) = (d.in_channels as usize, d.out_channels as usize, d.out_cols as usize);
        let pitch = d.stride as usize;
        let (row0, col0) = (d.kr as usize * 3, d.ks as usize * 3);
        let window = &self.input[d.in_slot as usize];
        let wbase = instr.buff_base as usize * self.hw.weight_banks();
        let out = &mut self.output[d.out_slot as usize];
        if !instr.accumulate {
            out[..k * m * w].iter_mut().for_each(|v| *v = 0.0);
        }
        let tiles_x = w.div_ceil(m);
        let mut tile = vec![0.0; e_count];
        let mut v = vec![0.0; c * e_count];
        let mut inputs = vec![0.0; e_count * pi];
        let mut weights = vec![0.0; e_count * pi * po];
        let mut acc = vec![0.0; e_count * po];
        let mut result = vec![0.0; e_count];
        for tx in 0..tiles_x {
            // Load manager: online input transform of every channel's tile.
            for ci in 0..c {
                for i in 0..pt {
                    for j in 0..pt {
                        let x = tx * m + col0 + j;
                        tile[i * pt + j] = if x < pitch {
                            window[((row0 + i) * pitch + x) * c + ci]
                        } else {
                            0.0
                        };
                    }
                }
                v[ci * e_count..(ci + 1) * e_count].copy_from_slice(&transform_input_tile(&tile, &self.mats));
            }
            for o0 in (0..k).step_by(po) {
                let lanes_out = po.min(k - o0);
                acc.iter_mut().for_each(|a| *a = 0.0);
                for c0 in (0..c).step_by(pi) {
                    let lanes_in = pi.min(c - c0);
                    for e in 0..e_count {
                        for p in 0..lanes_in {
                            inputs[e * pi + p] = v[(c0 + p) * e_count + e];
                            for o in 0..lanes_out {
                                weights[(e * pi + p) * po + o] =
                                    self.weight[wbase + ((o0 + o) * c + c0 + p) * e_count + e];
                            }
                        }
                    }
                    // Core e computes element e of the element-wise product.
                    for e in 0..e_count {
                        gemv_step(
                            &inputs[e * pi..(e + 1) * pi],
                            &weights[e * pi * po..(e + 1) * pi * po],
                            po,
                            lanes_in,
                            lanes_out,
                            &mut acc[e * po..(e + 1) * po],
                        );
                    }
                }
                // Save manager: inverse transform into the accumulating buffer.
                for o in 0..lanes_out {
                    for e in 0..e_count {
                        result[e] = acc[e * po + o];
                    }
                    let y = inverse_transform(&result, &self.mats);
                    for i in 0..m {
                        for j in 0..m {
                            let x = tx * m + j;
                            if x < w {
                                let slot = ((o0 + o) * m + i) * w + x;
                                out[slot] += y[i * m + j];
                            }
                        }
                    }
                }
            }
        }
    }

    fn comp_spat(&mut self, instr: &Instruction, d: &CompDims) {
        let (pi, po, pt) = (self.hw.pi, self.hw.po, self.hw.pt);
        let cores = pt * pt;
        let (c, k, w) = (d.in_channels as usize, d.out_channels as usize, d.out_cols as usize);
        let (r, s, rows) = (d.kr as usize, d.ks as usize, d.out_rows as usize);
        let pitch = d.stride as usize;
        let cch = c.div_ceil(pi);
        let window = &self.input[d.in_slot as usize];
        let wbase = instr.buff_base as usize * self.hw.weight_banks();
        let out = &mut self.output[d.out_slot as usize];
        if !instr.accumulate {
            out[..k * rows * w].iter_mut().for_each(|v| *v = 0.0);
        }
        // Work units (row, x, i, j, channel chunk) are dealt to the cores in
        // turn; each core keeps partial sums per output pixel.
        let pixels = rows * w;
        let mut partial = vec![0.0; cores * pixels * po];
        let mut inputs = vec![0.0; pi];
        let mut weights = vec![0.0; pi * po];
        for o0 in (0..k).step_by(po) {
            let lanes_out = po.min(k - o0);
            partial.iter_mut().for_each(|a| *a = 0.0);
            let mut unit = 0usize;
            for cc in 0..cch {
                let c0 = cc * pi;
                let lanes_in = pi.min(c - c0);
                for i in 0..r {
                    for j in 0..s {
                        for p in 0..lanes_in {
                            for o in 0..lanes_out {
                                weights[p * po + o] = self.weight[wbase + (((o0 + o) * c + c0 + p) * r + i) * s + j];
                            }
                        }
                        for y in 0..rows {
                            for x in 0..w {
                                let col = x + j;
                                for p in 0..lanes_in {
                                    inputs[p] = if col < pitch {
                                        window[((y + i) * pitch + col) * c + c0 + p]
                                    } else {
                                        0.0
                                    };
                                }
                                let core = unit % cores;
                                let px = y * w + x;
                                let at = (core * pixels + px) * po;
                                gemv_step(&inputs, &weights, po, lanes_in, lanes_out, &mut partial[at..at + po]);
                                unit += 1;
                            }
                        }
                    }
                }
            }
            // Save manager: sum the cores' partials per pixel.
            for o in 0..lanes_out {
                for px in 0..pixels {
                    let mut sum = 0.0;
                    for core in 0..cores {
                        sum += partial[(core * pixels + px) * po + o];
                    }
                    out[(o0 + o) * pixels + px] += sum;
                }
            }
        }
    }

    fn save(&mut self, instr: &Instruction, d: &SaveDims, index: usize, dram: &mut [f64]) -> Result<()> {
        let rows_alloc = if instr.wino { self.hw.m() } else { 1 };
        let (k, w, rows) = (d.channels as usize, d.cols as usize, d.valid_rows as usize);
        if rows > rows_alloc || k * rows_alloc * w > self.hw.output_slot_words() {
            return Err(overrun(
                "output",
                index,
                k * rows_alloc * w,
                self.hw.output_slot_words(),
            ));
        }
        if !self.functional {
            return Ok(());
        }
        let buf = &self.output[d.out_slot as usize];
        let bias = &self.bias[d.bias_slot as usize];
        let mut values = vec![0.0; k * rows * w];
        for o in 0..k {
            for y in 0..rows {
                for x in 0..w {
                    let mut v = buf[(o * rows_alloc + y) * w + x];
                    if d.bias {
                        v += bias[o];
                    }
                    if instr.relu {
                        v = v.max(0.0);
                    }
                    values[(o * rows + y) * w + x] = v;
                }
            }
        }
        let block = TileBlock {
            values: &values,
            channels: k,
            rows,
            cols: w,
            first_channel: d.first_channel as usize,
            first_row: d.first_row as usize,
            total_channels: d.total_channels as usize,
        };
        let to = dram_layout(instr.layout.target_is_wino(), self.hw);
        let base = instr.dram_base as usize;
        for (off, v) in save_layout_transform(&block, to) {
            let addr = base + off;
            let slot = dram.get_mut(addr).ok_or(Error::DramOutOfBounds {
                index,
                address: addr as u64,
            })?;
            *slot = v;
        }
        Ok(())
    }
}

fn load_cycles(words: u64, hw: &HwConfig, port: f64) -> u64 {
    (words as f64 / hw.rate(port)).ceil() as u64
}

/// Runs a program. `host` is called with the layer index and DRAM after each
/// layer segment completes, for host-side ops between layers.
pub fn run(
    program: &Program,
    hw: &HwConfig,
    mut dram: Vec<f64>,
    opts: SimOptions,
    host: &mut dyn FnMut(usize, &mut [f64]) -> Result<()>,
) -> Result<SimResult> {
    hw.validate()?;
    let functional = !opts.timing_only;
    let banks = hw.weight_banks();
    let mut m = Machine {
        hw,
        mats: transform_matrices(hw.wino_params())?,
        input: [vec![0.0; hw.input_slot_words()], vec![0.0; hw.input_slot_words()]],
        weight: vec![0.0; if functional { 2 * hw.slot_lines() * banks } else { 0 }],
        bias: [vec![0.0; hw.bias_slot_words()], vec![0.0; hw.bias_slot_words()]],
        output: [vec![0.0; hw.output_slot_words()], vec![0.0; hw.output_slot_words()]],
        window: None,
        functional,
    };
    if !functional {
        m.input = [Vec::new(), Vec::new()];
        m.output = [Vec::new(), Vec::new()];
        // Bounds checks still need the buffer size.
        m.weight = Vec::new();
    }
    let weight_len = 2 * hw.slot_lines() * banks;

    let mut tokens = Tokens::default();
    let mut busy = [0u64; 4];
    let mut stall = 0u64;
    let mut prev_end = 0u64;
    let mut horizon = 0u64;
    let mut trace = Vec::new();
    let mut layer_end = Vec::new();

    // Segment boundaries act as barriers; without segments the whole program
    // is one segment.
    let mut bounds: Vec<(usize, usize, Option<usize>)> = program
        .segments
        .iter()
        .map(|s| (s.start, s.end, Some(s.layer)))
        .collect();
    if bounds.is_empty() {
        bounds.push((0, program.instructions.len(), None));
    }

    for (start, end, layer) in bounds {
        let mut free = [horizon; 4];
        prev_end = prev_end.max(horizon);
        for index in start..end {
            let instr = &program.instructions[index];
            instr.validate()?;
            let module = Module::of(instr);
            let mut reads: Vec<Res> = Vec::new();
            let mut writes: Vec<Res> = Vec::new();
            match instr.op {
                Op::LoadInp(d) => {
                    let slot = slot_of(instr.buff_base as usize, hw.slot_lines(), index, "input")?;
                    if let Some(w) = m.reusable(&d, slot) {
                        reads.push(Res::Input(w.slot));
                    }
                    writes.push(Res::Input(slot));
                }
                Op::LoadWgt(_) => {
                    writes.push(Res::Weight(slot_of(
                        instr.buff_base as usize,
                        hw.slot_lines(),
                        index,
                        "weight",
                    )?));
                }
                Op::LoadBias(_) => writes.push(Res::Bias((instr.buff_base as usize).min(1))),
                Op::Comp(d) => {
                    reads.push(Res::Input(d.in_slot as usize));
                    reads.push(Res::Weight(slot_of(
                        instr.buff_base as usize,
                        hw.slot_lines(),
                        index,
                        "weight",
                    )?));
                    if instr.accumulate {
                        reads.push(Res::Output(d.out_slot as usize));
                    }
                    writes.push(Res::Output(d.out_slot as usize));
                }
                Op::Save(d) => {
                    reads.push(Res::Output(d.out_slot as usize));
                    if d.bias {
                        reads.push(Res::Bias(d.bias_slot as usize));
                    }
                }
            }
            let mi = module.index();
            let mut ready = free[mi];
            for &r in &reads {
                ready = ready.max(tokens.get(r).read_ready(module, index)?);
            }

            let duration = match instr.op {
                Op::LoadInp(d) => {
                    let words = m.load_inp(instr, &d, index, &dram)?;
                    load_cycles(words, hw, hw.ldi_port())
                }
                Op::LoadWgt(d) => {
                    if functional {
                        m.load_wgt(instr, d.words as usize, index, &dram)?;
                    } else if instr.buff_base as usize * banks + d.words as usize > weight_len {
                        return Err(overrun("weight", index, d.words as usize, weight_len));
                    }
                    load_cycles(d.words as u64, hw, hw.ldw_port())
                }
                Op::LoadBias(d) => {
                    m.load_bias(instr, d.count as usize, index, &dram)?;
                    load_cycles(d.count as u64, hw, hw.ldw_port())
                }
                Op::Comp(d) => {
                    if functional {
                        m.check_comp(instr, &d, index)?;
                        if instr.wino {
                            m.comp_wino(instr, &d);
                        } else {
                            m.comp_spat(instr, &d);
                        }
                    }
                    m.comp_cycles(instr, &d)
                }
                Op::Save(d) => {
                    m.save(instr, &d, index, &mut dram)?;
                    let words = d.channels as u64 * d.valid_rows as u64 * d.cols as u64;
                    load_cycles(words, hw, hw.sv_port())
                }
            };

            for &w in &writes {
                ready = ready.max(tokens.get(w).write_ready());
            }
            if !opts.double_buffer {
                ready = ready.max(prev_end);
            }
            let begin = ready;
            let finish = begin + duration;
            if begin > free[mi] {
                stall += begin - free[mi];
                if opts.trace {
                    trace.push(TraceEvent {
                        cycle: free[mi],
                        module,
                        kind: TraceKind::Stall,
                        index,
                    });
                }
            }
            for &r in &reads {
                tokens.get(r).record_read(finish);
            }
            for &w in &writes {
                tokens.get(w).record_write(module, finish);
            }
            free[mi] = finish;
            busy[mi] += duration;
            prev_end = finish;
            horizon = horizon.max(finish);
            if opts.trace {
                trace.push(TraceEvent {
                    cycle: begin,
                    module,
                    kind: TraceKind::Start,
                    index,
                });
                trace.push(TraceEvent {
                    cycle: finish,
                    module,
                    kind: TraceKind::Done,
                    index,
                });
            }
        }
        layer_end.push(horizon);
        if let Some(layer) = layer {
            if functional {
                host(layer, &mut dram)?;
            }
        }
    }
    trace.sort_by_key(|e| e.cycle);
    Ok(SimResult {
        dram,
        total_cycles: horizon,
        busy: Module::ALL.iter().map(|&m| (m, busy[m.index()])).collect(),
        stall_cycles: stall,
        trace,
        layer_end,
    })
}

/// A full-model functional run: output activation plus timing.
#[derive(Debug, Clone)]
pub struct ModelRun {
    pub output: Tensor,
    pub result: SimResult,
    pub summary: Summary,
}

pub fn model_ops(model: &DnnModel) -> f64 {
    model.layers.iter().map(|l| 2.0 * layer_macs(l) as f64).sum()
}

/// Builds the DRAM image, runs the program with host ops between layers,
/// and reads back the final activation.
pub fn simulate_model(
    model: &DnnModel,
    compiled: &CompiledModel,
    hw: &HwConfig,
    input: &Tensor,
    params: &[LayerParams],
    opts: SimOptions,
) -> Result<ModelRun> {
    let dram = build_dram_image(model, compiled, hw, input, params)?;
    let mut host = |i: usize, dram: &mut [f64]| -> Result<()> {
        apply_host_ops(model, compiled, i, dram);
        Ok(())
    };
    let opts = SimOptions {
        timing_only: false,
        ..opts
    };
    let result = run(&compiled.program, hw, dram, opts, &mut host)?;
    let output = read_output(model, compiled, &result.dram);
    let summary = Summary::new(&result, hw, model_ops(model));
    Ok(ModelRun {
        output,
        result,
        summary,
    })
}

/// Cycle count only; no DRAM image is built.
pub fn simulate_timing(
    model: &DnnModel,
    compiled: &CompiledModel,
    hw: &HwConfig,
    opts: SimOptions,
) -> Result<(SimResult, Summary)> {
    let opts = SimOptions {
        timing_only: true,
        ..opts
    };
    let result = run(&compiled.program, hw, Vec::new(), opts, &mut |_, _| Ok(()))?;
    let summary = Summary::new(&result, hw, model_ops(model));
    Ok((result, summary))
}
