//! The five-instruction accelerator ISA and its 128-bit encoding.
//!
//! Word layout (bit 127 is the MSB):
//!
//! | bits     | field                                   |
//! |----------|-----------------------------------------|
//! | 127..125 | opcode                                  |
//! | 124      | WINO_FLAG                               |
//! | 123..122 | layout mode (SAVE, LOAD_INP)            |
//! | 121      | relu flag (SAVE)                        |
//! | 120      | accumulate flag (COMP)                  |
//! | 119..104 | BUFF_BASE                               |
//! | 103..72  | DRAM_BASE                               |
//! | 71..0    | six 12-bit dims fields, opcode specific |
//!
//! Dims fields are listed MSB first below. Some 12-bit fields hold several
//! packed subfields; no subfield straddles a field boundary. Bits marked
//! `-` are reserved and must be zero, as must header flags an opcode does not
//! use.
//!
//! * `LOAD_INP`: `channels[11:0]`; `channels[15:12] window_rows:6 reuse:1 -:1`;
//!   `tensor_cols`; `tensor_rows`; `window_top` (two's complement);
//!   `pad_left:6 -:6`. BUFF_BASE is the input-buffer line, DRAM_BASE the
//!   activation tensor base. The window holds `window_rows` rows starting at
//!   tensor row `window_top` with a pitch of `tensor_cols + 2 * pad_left`;
//!   rows and columns outside the tensor read as zero. With `reuse` set, rows
//!   shared with the previous window are copied on chip instead of fetched.
//! * `LOAD_WGT`: `words[11:0]`; `words[23:12]`; four reserved fields.
//!   BUFF_BASE is the weight-buffer line, DRAM_BASE the first word.
//! * `LOAD_BIAS`: `count`; five reserved fields. BUFF_BASE is the bias slot.
//! * `COMP`: `in_channels[11:0]`; `in_channels[15:12] out_rows:4 kr:4`;
//!   `out_channels`; `out_cols`; `stride`; `ks:4 in_slot:1 out_slot:1 -:6`.
//!   BUFF_BASE is the weight-buffer line. `kr`/`ks` hold the kernel size in
//!   Spatial mode and the sub-kernel index in Winograd mode.
//! * `SAVE`: `channels`; `cols`; `first_channel`; `first_row`;
//!   `total_channels[11:0]`;
//!   `total_channels[12] valid_rows:4 out_slot:1 bias:1 bias_slot:1 -:4`.
//!   DRAM_BASE is the output tensor base.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const INSTRUCTION_BITS: u32 = 128;
pub const DIMS_BITS: u32 = 72;
pub const DIMS_FIELD_BITS: u32 = 12;
pub const PROGRAM_MAGIC: &[u8; 4] = b"HDNN";
pub const PROGRAM_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Opcode {
    LoadInp = 0,
    LoadWgt = 1,
    LoadBias = 2,
    Comp = 3,
    Save = 4,
}

impl Opcode {
    pub const ALL: [Opcode; 5] = [
        Opcode::LoadInp,
        Opcode::LoadWgt,
        Opcode::LoadBias,
        Opcode::Comp,
        Opcode::Save,
    ];

    pub fn from_bits(v: u8) -> Result<Self> {
        Opcode::ALL.get(v as usize).copied().ok_or(Error::InvalidOpcode(v))
    }

    pub fn mnemonic(self) -> &'static str {
        match self {
            Opcode::LoadInp => "LOAD_INP",
            Opcode::LoadWgt => "LOAD_WGT",
            Opcode::LoadBias => "LOAD_BIAS",
            Opcode::Comp => "COMP",
            Opcode::Save => "SAVE",
        }
    }
}

/// Source-to-destination feature-map layout conversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LayoutMode {
    W2W = 0,
    W2S = 1,
    S2S = 2,
    S2W = 3,
}

impl LayoutMode {
    pub fn from_bits(v: u8) -> Self {
        match v & 3 {
            0 => LayoutMode::W2W,
            1 => LayoutMode::W2S,
            2 => LayoutMode::S2S,
            _ => LayoutMode::S2W,
        }
    }

    /// Mode pair `(from_wino, to_wino)` to layout mode.
    pub fn between(from_wino: bool, to_wino: bool) -> Self {
        match (from_wino, to_wino) {
            (true, true) => LayoutMode::W2W,
            (true, false) => LayoutMode::W2S,
            (false, false) => LayoutMode::S2S,
            (false, true) => LayoutMode::S2W,
        }
    }

    pub fn source_is_wino(self) -> bool {
        matches!(self, LayoutMode::W2W | LayoutMode::W2S)
    }

    pub fn target_is_wino(self) -> bool {
        matches!(self, LayoutMode::W2W | LayoutMode::S2W)
    }

    fn name(self) -> &'static str {
        match self {
            LayoutMode::W2W => "W2W",
            LayoutMode::W2S => "W2S",
            LayoutMode::S2S => "S2S",
            LayoutMode::S2W => "S2W",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LoadInpDims {
    pub channels: u32,
    pub window_rows: u32,
    pub reuse: bool,
    pub tensor_cols: u32,
    pub tensor_rows: u32,
    pub window_top: i32,
    pub pad_left: u32,
}

impl LoadInpDims {
    /// On-chip row pitch in pixels.
    pub fn pitch(&self) -> u32 {
        self.tensor_cols + 2 * self.pad_left
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LoadWgtDims {
    pub words: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LoadBiasDims {
    pub count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CompDims {
    pub in_channels: u32,
    pub out_rows: u32,
    pub kr: u32,
    pub out_channels: u32,
    pub out_cols: u32,
    pub stride: u32,
    pub ks: u32,
    pub in_slot: u32,
    pub out_slot: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SaveDims {
    pub channels: u32,
    pub cols: u32,
    pub first_channel: u32,
    pub first_row: u32,
    pub total_channels: u32,
    pub valid_rows: u32,
    pub out_slot: u32,
    pub bias: bool,
    pub bias_slot: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Op {
    LoadInp(LoadInpDims),
    LoadWgt(LoadWgtDims),
    LoadBias(LoadBiasDims),
    Comp(CompDims),
    Save(SaveDims),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instruction {
    pub wino: bool,
    pub layout: LayoutMode,
    pub relu: bool,
    pub accumulate: bool,
    pub buff_base: u16,
    pub dram_base: u32,
    pub op: Op,
}

/// `(name, width)` of every dims subfield, MSB first, per opcode.
type Layout = &'static [(&'static str, u32)];

const LOAD_INP_LAYOUT: Layout = &[
    ("channels_lo", 12),
    ("channels_hi", 4),
    ("window_rows", 6),
    ("reuse", 1),
    ("-", 1),
    ("tensor_cols", 12),
    ("tensor_rows", 12),
    ("window_top", 12),
    ("pad_left", 6),
    ("-", 6),
];
const LOAD_WGT_LAYOUT: Layout = &[("words_lo", 12), ("words_hi", 12), ("-", 48)];
const LOAD_BIAS_LAYOUT: Layout = &[("count", 12), ("-", 60)];
const COMP_LAYOUT: Layout = &[
    ("in_channels_lo", 12),
    ("in_channels_hi", 4),
    ("out_rows", 4),
    ("kr", 4),
    ("out_channels", 12),
    ("out_cols", 12),
    ("stride", 12),
    ("ks", 4),
    ("in_slot", 1),
    ("out_slot", 1),
    ("-", 6),
];
const SAVE_LAYOUT: Layout = &[
    ("channels", 12),
    ("cols", 12),
    ("first_channel", 12),
    ("first_row", 12),
    ("total_channels_lo", 12),
    ("total_channels_hi", 1),
    ("valid_rows", 4),
    ("out_slot", 1),
    ("bias", 1),
    ("bias_slot", 1),
    ("-", 4),
];

fn layout_of(op: Opcode) -> Layout {
    match op {
        Opcode::LoadInp => LOAD_INP_LAYOUT,
        Opcode::LoadWgt => LOAD_WGT_LAYOUT,
        Opcode::LoadBias => LOAD_BIAS_LAYOUT,
        Opcode::Comp => COMP_LAYOUT,
        Opcode::Save => SAVE_LAYOUT,
    }
}

fn split(v: u32, lo_bits: u32) -> (u64, u64) {
    ((v & ((1 << lo_bits) - 1)) as u64, (v >> lo_bits) as u64)
}

impl Op {
    pub fn opcode(&self) -> Opcode {
        match self {
            Op::LoadInp(_) => Opcode::LoadInp,
            Op::LoadWgt(_) => Opcode::LoadWgt,
            Op::LoadBias(_) => Opcode::LoadBias,
            Op::Comp(_) => Opcode::Comp,
            Op::Save(_) => Opcode::Save,
        }
    }

    /// Field values in layout order, reserved fields as zero.
    fn values(&self) -> Vec<u64> {
        match *self {
            Op::LoadInp(d) => {
                let (lo, hi) = split(d.channels, 12);
                vec![
                    lo,
                    hi,
                    d.window_rows as u64,
                    d.reuse as u64,
                    0,
                    d.tensor_cols as u64,
                    d.tensor_rows as u64,
                    (d.window_top as u64) & 0xFFF,
                    d.pad_left as u64,
                    0,
                ]
            }
            Op::LoadWgt(d) => {
                let (lo, hi) = split(d.words, 12);
                vec![lo, hi, 0]
            }
            Op::LoadBias(d) => vec![d.count as u64, 0],
            Op::Comp(d) => {
                let (lo, hi) = split(d.in_channels, 12);
                vec![
                    lo,
                    hi,
                    d.out_rows as u64,
                    d.kr as u64,
                    d.out_channels as u64,
                    d.out_cols as u64,
                    d.stride as u64,
                    d.ks as u64,
                    d.in_slot as u64,
                    d.out_slot as u64,
                    0,
                ]
            }
            Op::Save(d) => {
                let (lo, hi) = split(d.total_channels, 12);
                vec![
                    d.channels as u64,
                    d.cols as u64,
                    d.first_channel as u64,
                    d.first_row as u64,
                    lo,
                    hi,
                    d.valid_rows as u64,
                    d.out_slot as u64,
                    d.bias as u64,
                    d.bias_slot as u64,
                    0,
                ]
            }
        }
    }

    fn from_values(op: Opcode, v: &[u64]) -> Op {
        let u = |i: usize| v[i] as u32;
        match op {
            Opcode::LoadInp => Op::LoadInp(LoadInpDims {
                channels: u(0) | (u(1) << 12),
                window_rows: u(2),
                reuse: v[3] != 0,
                tensor_cols: u(5),
                tensor_rows: u(6),
                window_top: ((u(7) << 20) as i32) >> 20,
                pad_left: u(8),
            }),
            Opcode::LoadWgt => Op::LoadWgt(LoadWgtDims {
                words: u(0) | (u(1) << 12),
            }),
            Opcode::LoadBias => Op::LoadBias(LoadBiasDims { count: u(0) }),
            Opcode::Comp => Op::Comp(CompDims {
                in_channels: u(0) | (u(1) << 12),
                out_rows: u(2),
                kr: u(3),
                out_channels: u(4),
                out_cols: u(5),
                stride: u(6),
                ks: u(7),
                in_slot: u(8),
                out_slot: u(9),
            }),
            Opcode::Save => Op::Save(SaveDims {
                channels: u(0),
                cols: u(1),
                first_channel: u(2),
                first_row: u(3),
                total_channels: u(4) | (u(5) << 12),
                valid_rows: u(6),
                out_slot: u(7),
                bias: v[8] != 0,
                bias_slot: u(9),
            }),
        }
    }

    /// Checks every logical value against its total bit budget.
    fn check_widths(&self) -> Result<()> {
        let check = |field: &'static str, value: u32, bits: u32| -> Result<()> {
            if (value as u64) >> bits != 0 {
                Err(Error::FieldOverflow {
                    field,
                    value: value as u64,
                    bits,
                })
            } else {
                Ok(())
            }
        };
        match *self {
            Op::LoadInp(d) => {
                check("channels", d.channels, 16)?;
                check("window_rows", d.window_rows, 6)?;
                check("tensor_cols", d.tensor_cols, 12)?;
                check("tensor_rows", d.tensor_rows, 12)?;
                check("pad_left", d.pad_left, 6)?;
                if !(-2048..2048).contains(&d.window_top) {
                    return Err(Error::FieldOverflow {
                        field: "window_top",
                        value: d.window_top.unsigned_abs() as u64,
                        bits: 12,
                    });
                }
                check("pitch", d.pitch(), 12)
            }
            Op::LoadWgt(d) => check("words", d.words, 24),
            Op::LoadBias(d) => check("count", d.count, 12),
            Op::Comp(d) => {
                check("in_channels", d.in_channels, 16)?;
                check("out_rows", d.out_rows, 4)?;
                check("kr", d.kr, 4)?;
                check("out_channels", d.out_channels, 12)?;
                check("out_cols", d.out_cols, 12)?;
                check("stride", d.stride, 12)?;
                check("ks", d.ks, 4)?;
                check("in_slot", d.in_slot, 1)?;
                check("out_slot", d.out_slot, 1)
            }
            Op::Save(d) => {
                check("channels", d.channels, 12)?;
                check("cols", d.cols, 12)?;
                check("first_channel", d.first_channel, 12)?;
                check("first_row", d.first_row, 12)?;
                check("total_channels", d.total_channels, 13)?;
                check("valid_rows", d.valid_rows, 4)?;
                check("out_slot", d.out_slot, 1)?;
                check("bias_slot", d.bias_slot, 1)
            }
        }
    }
}

impl Instruction {
    /// Header flags default to what the opcode allows; LOAD_INP layout
    /// follows the mode.
    pub fn new(op: Op, wino: bool) -> Self {
        let layout = match op {
            Op::LoadInp(_) => LayoutMode::between(wino, wino),
            _ => LayoutMode::W2W,
        };
        Instruction {
            wino,
            layout,
            relu: false,
            accumulate: false,
            buff_base: 0,
            dram_base: 0,
            op,
        }
    }

    pub fn with_bases(mut self, buff_base: u16, dram_base: u32) -> Self {
        self.buff_base = buff_base;
        self.dram_base = dram_base;
        self
    }

    pub fn opcode(&self) -> Opcode {
        self.op.opcode()
    }

    pub fn validate(&self) -> Result<()> {
        self.op.check_widths()?;
        let op = self.opcode();
        if self.relu && op != Opcode::Save {
            return Err(Error::InvalidWord(format!(
                "{} cannot carry the relu flag",
                op.mnemonic()
            )));
        }
        if self.accumulate && op != Opcode::Comp {
            return Err(Error::InvalidWord(format!(
                "{} cannot carry the accumulate flag",
                op.mnemonic()
            )));
        }
        match op {
            Opcode::Save => {
                if self.layout.source_is_wino() != self.wino {
                    return Err(Error::InvalidWord(format!(
                        "SAVE layout {} does not start from the current mode",
                        self.layout.name()
                    )));
                }
            }
            Opcode::LoadInp => {
                if !matches!(self.layout, LayoutMode::W2W | LayoutMode::S2S) {
                    return Err(Error::InvalidWord(format!(
                        "LOAD_INP supports only W2W/S2S, got {}",
                        self.layout.name()
                    )));
                }
            }
            _ => {
                if self.layout != LayoutMode::W2W {
                    return Err(Error::InvalidWord(format!(
                        "{} has reserved layout bits set",
                        op.mnemonic()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn encode(&self) -> Result<u128> {
        self.validate()?;
        let mut word: u128 = (self.opcode() as u128) << 125;
        word |= (self.wino as u128) << 124;
        word |= (self.layout as u128) << 122;
        word |= (self.relu as u128) << 121;
        word |= (self.accumulate as u128) << 120;
        word |= (self.buff_base as u128) << 104;
        word |= (self.dram_base as u128) << 72;
        let mut shift = DIMS_BITS;
        for ((_, width), value) in layout_of(self.opcode()).iter().zip(self.op.values()) {
            shift -= width;
            word |= (value as u128) << shift;
        }
        Ok(word)
    }

    pub fn decode(word: u128) -> Result<Instruction> {
        let opcode = Opcode::from_bits((word >> 125) as u8)?;
        let mut values = Vec::new();
        let mut shift = DIMS_BITS;
        for &(name, width) in layout_of(opcode) {
            shift -= width;
            let v = ((word >> shift) & ((1u128 << width) - 1)) as u64;
            if name == "-" && v != 0 {
                return Err(Error::InvalidWord(format!(
                    "reserved dims bits set in {}",
                    opcode.mnemonic()
                )));
            }
            values.push(v);
        }
        let instr = Instruction {
            wino: (word >> 124) & 1 == 1,
            layout: LayoutMode::from_bits((word >> 122) as u8),
            relu: (word >> 121) & 1 == 1,
            accumulate: (word >> 120) & 1 == 1,
            buff_base: (word >> 104) as u16,
            dram_base: (word >> 72) as u32,
            op: Op::from_values(opcode, &values),
        };
        instr.validate()?;
        Ok(instr)
    }
}

pub fn encode(instr: &Instruction) -> Result<u128> {
    instr.encode()
}

pub fn decode(word: u128) -> Result<Instruction> {
    Instruction::decode(word)
}

/// Low 64-bit word first, each little-endian.
pub fn word_to_bytes(word: u128) -> [u8; 16] {
    let mut out = [0u8; 16];
    out[..8].copy_from_slice(&(word as u64).to_le_bytes());
    out[8..].copy_from_slice(&((word >> 64) as u64).to_le_bytes());
    out
}

pub fn word_from_bytes(bytes: &[u8; 16]) -> u128 {
    let lo = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes"));
    let hi = u64::from_le_bytes(bytes[8..].try_into().expect("8 bytes"));
    ((hi as u128) << 64) | lo as u128
}

/// Contiguous instruction range belonging to one model layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSegment {
    pub layer: usize,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Program {
    pub instructions: Vec<Instruction>,
    pub segments: Vec<LayerSegment>,
}

impl Program {
    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    pub fn count(&self, op: Opcode) -> usize {
        self.instructions.iter().filter(|i| i.opcode() == op).count()
    }

    /// Binary program image: magic, version, count, then packed words.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(10 + 16 * self.len());
        out.extend_from_slice(PROGRAM_MAGIC);
        out.extend_from_slice(&PROGRAM_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        for instr in &self.instructions {
            out.extend_from_slice(&word_to_bytes(instr.encode()?));
        }
        Ok(out)
    }

    /// Parses a binary image. Layer segments are not part of the image.
    pub fn from_bytes(bytes: &[u8]) -> Result<Program> {
        if bytes.len() < 10 || &bytes[..4] != PROGRAM_MAGIC {
            return Err(Error::ProgramFormat("missing HDNN magic".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != PROGRAM_VERSION {
            return Err(Error::ProgramFormat(format!("unsupported version {version}")));
        }
        let count = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
        let body = &bytes[10..];
        if body.len() != count * 16 {
            return Err(Error::ProgramFormat(format!(
                "header declares {count} instructions, body holds {} bytes",
                body.len()
            )));
        }
        let instructions = body
            .chunks_exact(16)
            .map(|c| Instruction::decode(word_from_bytes(c.try_into().expect("16 bytes"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Program {
            instructions,
            segments: Vec::new(),
        })
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Program> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Program::from_bytes(&bytes)
    }

    pub fn disassemble(&self) -> String {
        self.instructions.iter().map(|i| format!("{i}\n")).collect()
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} wino={} buff={} dram={}",
            self.opcode().mnemonic(),
            self.wino as u8,
            self.buff_base,
            self.dram_base
        )?;
        match self.op {
            Op::LoadInp(d) => write!(
                f,
                " layout={} channels={} window_rows={} reuse={} tensor_cols={} tensor_rows={} window_top={} pad_left={}",
                self.layout.name(),
                d.channels,
                d.window_rows,
                d.reuse as u8,
                d.tensor_cols,
                d.tensor_rows,
                d.window_top,
                d.pad_left
            ),
            Op::LoadWgt(d) => write!(f, " words={}", d.words),
            Op::LoadBias(d) => write!(f, " count={}", d.count),
            Op::Comp(d) => write!(
                f,
                " acc={} in_channels={} out_rows={} kr={} out_channels={} out_cols={} stride={} ks={} in_slot={} out_slot={}",
                self.accumulate as u8,
                d.in_channels,
                d.out_rows,
                d.kr,
                d.out_channels,
                d.out_cols,
                d.stride,
                d.ks,
                d.in_slot,
                d.out_slot
            ),
            Op::Save(d) => write!(
                f,
                " layout={} relu={} channels={} cols={} first_channel={} first_row={} total_channels={} valid_rows={} out_slot={} bias={} bias_slot={}",
                self.layout.name(),
                self.relu as u8,
                d.channels,
                d.cols,
                d.first_channel,
                d.first_row,
                d.total_channels,
                d.valid_rows,
                d.out_slot,
                d.bias as u8,
                d.bias_slot
            ),
        }
    }
}

impl FromStr for Instruction {
    type Err = Error;

    /// Parses one line of the disassembly format.
    fn from_str(line: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidWord(msg);
        let mut parts = line.split_whitespace();
        let mnemonic = parts.next().ok_or_else(|| bad("empty line".into()))?;
        let opcode = Opcode::ALL
            .into_iter()
            .find(|o| o.mnemonic() == mnemonic)
            .ok_or_else(|| bad(format!("unknown mnemonic {mnemonic}")))?;
        let mut kv = std::collections::HashMap::new();
        for p in parts {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got {p}")))?;
            kv.insert(k, v);
        }
        let num = |k: &str| -> Result<u64> {
            kv.get(k)
                .ok_or_else(|| bad(format!("missing {k}")))?
                .parse::<u64>()
                .map_err(|e| bad(format!("{k}: {e}")))
        };
        let n32 = |k: &str| num(k).map(|v| v as u32);
        let flag = |k: &str| num(k).map(|v| v != 0);
        let layout = match kv.get("layout") {
            None => LayoutMode::W2W,
            Some(&"W2W") => LayoutMode::W2W,
            Some(&"W2S") => LayoutMode::W2S,
            Some(&"S2S") => LayoutMode::S2S,
            Some(&"S2W") => LayoutMode::S2W,
            Some(other) => return Err(bad(format!("unknown layout {other}"))),
        };
        let op = match opcode {
            Opcode::LoadInp => Op::LoadInp(LoadInpDims {
                channels: n32("channels")?,
                window_rows: n32("window_rows")?,
                reuse: flag("reuse")?,
                tensor_cols: n32("tensor_cols")?,
                tensor_rows: n32("tensor_rows")?,
                window_top: kv
                    .get("window_top")
                    .ok_or_else(|| bad("missing window_top".into()))?
                    .parse::<i32>()
                    .map_err(|e| bad(format!("window_top: {e}")))?,
                pad_left: n32("pad_left")?,
            }),
            Opcode::LoadWgt => Op::LoadWgt(LoadWgtDims { words: n32("words")? }),
            Opcode::LoadBias => Op::LoadBias(LoadBiasDims { count: n32("count")? }),
            Opcode::Comp => Op::Comp(CompDims {
                in_channels: n32("in_channels")?,
                out_rows: n32("out_rows")?,
                kr: n32("kr")?,
                out_channels: n32("out_channels")?,
                out_cols: n32("out_cols")?,
                stride: n32("stride")?,
                ks: n32("ks")?,
                in_slot: n32("in_slot")?,
                out_slot: n32("out_slot")?,
            }),
            Opcode::Save => Op::Save(SaveDims {
                channels: n32("channels")?,
                cols: n32("cols")?,
                first_channel: n32("first_channel")?,
                first_row: n32("first_row")?,
                total_channels: n32("total_channels")?,
                valid_rows: n32("valid_rows")?,
                out_slot: n32("out_slot")?,
                bias: flag("bias")?,
                bias_slot: n32("bias_slot")?,
            }),
        };
        let buff = num("buff")?;
        let dram = num("dram")?;
        if buff > u16::MAX as u64 {
            return Err(Error::FieldOverflow {
                field: "buff_base",
                value: buff,
                bits: 16,
            });
        }
        if dram > u32::MAX as u64 {
            return Err(Error::FieldOverflow {
                field: "dram_base",
                value: dram,
                bits: 32,
            });
        }
        let instr = Instruction {
            wino: flag("wino")?,
            layout,
            relu: kv.contains_key("relu") && flag("relu")?,
            accumulate: kv.contains_key("acc") && flag("acc")?,
            buff_base: buff as u16,
            dram_base: dram as u32,
            op,
        };
        instr.validate()?;
        Ok(instr)
    }
}

/// Parses a whole disassembly listing.
pub fn assemble(text: &str) -> Result<Program> {
    let instructions = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::parse)
        .collect::<Result<Vec<_>>>()?;
    Ok(Program {
        instructions,
        segments: Vec::new(),
    })
}
