#![allow(dead_code)]

use hdnn_core::isa::*;
use hdnn_core::perfmodel::{Platform, ProfiledConstants, ResourceCaps};
use proptest::prelude::*;

pub fn platform(freq: f64, bw: f64, depth: usize) -> Platform {
    Platform {
        name: "test".into(),
        freq_hz: freq,
        bw_words_per_s: bw,
        data_width: 12,
        bram_width: 18,
        bram_depth: depth,
        dram_words: 1 << 32,
        caps: ResourceCaps {
            lut: 1e9,
            dsp: 1e9,
            bram: 1e9,
        },
        constants: ProfiledConstants::default(),
    }
}

fn bits(n: u32) -> std::ops::Range<u32> {
    0..1 << n
}

fn load_inp() -> impl Strategy<Value = Op> {
    (
        bits(16),
        bits(6),
        any::<bool>(),
        bits(12),
        bits(12),
        -2048i32..2048,
        bits(6),
    )
        .prop_filter("pitch fits", |t| t.3 + 2 * t.6 < 1 << 12)
        .prop_map(
            |(channels, window_rows, reuse, tensor_cols, tensor_rows, window_top, pad_left)| {
                Op::LoadInp(LoadInpDims {
                    channels,
                    window_rows,
                    reuse,
                    tensor_cols,
                    tensor_rows,
                    window_top,
                    pad_left,
                })
            },
        )
}

fn comp() -> impl Strategy<Value = Op> {
    (
        bits(16),
        bits(4),
        bits(4),
        bits(12),
        bits(12),
        bits(12),
        bits(4),
        bits(1),
        bits(1),
    )
        .prop_map(
            |(in_channels, out_rows, kr, out_channels, out_cols, stride, ks, in_slot, out_slot)| {
                Op::Comp(CompDims {
                    in_channels,
                    out_rows,
                    kr,
                    out_channels,
                    out_cols,
                    stride,
                    ks,
                    in_slot,
                    out_slot,
                })
            },
        )
}

fn save() -> impl Strategy<Value = Op> {
    (
        bits(12),
        bits(12),
        bits(12),
        bits(12),
        bits(13),
        bits(4),
        bits(1),
        any::<bool>(),
        bits(1),
    )
        .prop_map(
            |(channels, cols, first_channel, first_row, total_channels, valid_rows, out_slot, bias, bias_slot)| {
                Op::Save(SaveDims {
                    channels,
                    cols,
                    first_channel,
                    first_row,
                    total_channels,
                    valid_rows,
                    out_slot,
                    bias,
                    bias_slot,
                })
            },
        )
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        load_inp(),
        bits(24).prop_map(|words| Op::LoadWgt(LoadWgtDims { words })),
        bits(12).prop_map(|count| Op::LoadBias(LoadBiasDims { count })),
        comp(),
        save(),
    ]
}

/// Any instruction that passes `validate`: header flags and layout bits are
/// drawn only where the opcode allows them.
pub fn instruction() -> impl Strategy<Value = Instruction> {
    (
        op(),
        any::<bool>(),
        any::<bool>(),
        any::<bool>(),
        any::<u16>(),
        any::<u32>(),
    )
        .prop_map(|(op, wino, flag, to_wino, buff_base, dram_base)| {
            let mut i = Instruction::new(op, wino).with_bases(buff_base, dram_base);
            match op {
                Op::Save(_) => {
                    i.relu = flag;
                    i.layout = LayoutMode::between(wino, to_wino);
                }
                Op::Comp(_) => i.accumulate = flag,
                _ => {}
            }
            i
        })
}
