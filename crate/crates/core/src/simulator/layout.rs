//! External-memory feature-map layouts and the SAVE-side layout transforms.
//!
//! Both layouts keep channels innermost so a PI- or PO-wide vector of channels
//! is one contiguous burst.
//!
//! * Spatial: `((y * W) + x) * C + c`, plain row-major pixels.
//! * Winograd: rows are grouped into bands of `m`; inside a band pixels are
//!   column-major, so one `m`-row strip of a tile column is contiguous:
//!   `(((y / m) * W + x) * m + y % m) * C + c`. Band count is `ceil(H / m)`.

use serde::{Deserialize, Serialize};

use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DramLayout {
    Spat,
    Wino { m: usize },
}

impl DramLayout {
    pub fn new(wino: bool, m: usize) -> Self {
        if wino {
            DramLayout::Wino { m }
        } else {
            DramLayout::Spat
        }
    }

    pub fn is_wino(self) -> bool {
        matches!(self, DramLayout::Wino { .. })
    }

    /// Word offset of logical element `(c, y, x)` of a `C x H x W` tensor.
    #[inline]
    pub fn offset(self, channels: usize, cols: usize, c: usize, y: usize, x: usize) -> usize {
        match self {
            DramLayout::Spat => (y * cols + x) * channels + c,
            DramLayout::Wino { m } => (((y / m) * cols + x) * m + y % m) * channels + c,
        }
    }

    /// Words occupied by a `C x H x W` tensor.
    pub fn words(self, channels: usize, rows: usize, cols: usize) -> usize {
        match self {
            DramLayout::Spat => channels * rows * cols,
            DramLayout::Wino { m } => channels * rows.div_ceil(m) * m * cols,
        }
    }
}

pub fn write_tensor(dram: &mut [f64], base: usize, t: &Tensor, layout: DramLayout) {
    let d = t.dims();
    let (c, h, w) = (d[0], d[1], d[2]);
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                dram[base + layout.offset(c, w, ch, y, x)] = t.at3(ch, y, x);
            }
        }
    }
}

pub fn read_tensor(dram: &[f64], base: usize, dims: (usize, usize, usize), layout: DramLayout) -> Tensor {
    let (c, h, w) = dims;
    let mut t = Tensor::zeros(&[c, h, w]);
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                t.set3(ch, y, x, dram[base + layout.offset(c, w, ch, y, x)]);
            }
        }
    }
    t
}

/// One output-buffer block as the SAVE module sees it: `channels x rows x cols`
/// values, logically ordered, located at `(first_channel, first_row)` of a
/// tensor with `total_channels` channels and `cols` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct TileBlock<'a> {
    pub values: &'a [f64],
    pub channels: usize,
    pub rows: usize,
    pub cols: usize,
    pub first_channel: usize,
    pub first_row: usize,
    pub total_channels: usize,
}

/// DRAM offsets and values for a block, in ascending address order.
///
/// The source layout only describes how the block was produced; the words
/// land where the destination layout puts them.
pub fn save_layout_transform(block: &TileBlock, to: DramLayout) -> Vec<(usize, f64)> {
    let mut out = Vec::with_capacity(block.values.len());
    for k in 0..block.channels {
        for y in 0..block.rows {
            for x in 0..block.cols {
                let v = block.values[(k * block.rows + y) * block.cols + x];
                let off = to.offset(
                    block.total_channels,
                    block.cols,
                    block.first_channel + k,
                    block.first_row + y,
                    x,
                );
                out.push((off, v));
            }
        }
    }
    out.sort_by_key(|&(off, _)| off);
    out
}
