//! Winograd minimal filtering F(m x m, r x r) for 3x3 kernels.
//!
//! A layer is computed as `PT * PT` independent channel-reduction GEMMs over
//! transformed tiles, followed by the output transform. Kernels larger than
//! `r x r` are split into zero-padded `r x r` sub-kernels whose partial outputs
//! are summed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LayerSpec;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WinogradParams {
    pub m: usize,
    pub r: usize,
}

impl WinogradParams {
    pub const F2X3: WinogradParams = WinogradParams { m: 2, r: 3 };
    pub const F4X3: WinogradParams = WinogradParams { m: 4, r: 3 };

    pub fn new(m: usize, r: usize) -> Result<Self> {
        let p = WinogradParams { m, r };
        p.validate()?;
        Ok(p)
    }

    /// The algorithm whose input tile is `pt x pt`.
    pub fn for_tile(pt: usize) -> Result<Self> {
        match pt {
            4 => Ok(Self::F2X3),
            6 => Ok(Self::F4X3),
            _ => Err(Error::UnsupportedWinograd {
                m: pt.saturating_sub(2),
                r: 3,
            }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.m, self.r) {
            (2, 3) | (4, 3) => Ok(()),
            (m, r) => Err(Error::UnsupportedWinograd { m, r }),
        }
    }

    /// Input tile size `m + r - 1`.
    pub fn pt(&self) -> usize {
        self.m + self.r - 1
    }
}

/// Row-major constant matrices `A (PT x m)`, `G (PT x r)`, `B (PT x PT)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformMatrices {
    pub params: WinogradParams,
    pub a: Vec<f64>,
    pub g: Vec<f64>,
    pub b: Vec<f64>,
}

// Transposes are what the algorithms are usually written with; the stored
// A and B are obtained by transposing these.
const F2_BT: [f64; 16] = [
    1.0, 0.0, -1.0, 0.0, //
    0.0, 1.0, 1.0, 0.0, //
    0.0, -1.0, 1.0, 0.0, //
    0.0, 1.0, 0.0, -1.0,
];
const F2_G: [f64; 12] = [
    1.0, 0.0, 0.0, //
    0.5, 0.5, 0.5, //
    0.5, -0.5, 0.5, //
    0.0, 0.0, 1.0,
];
const F2_AT: [f64; 8] = [
    1.0, 1.0, 1.0, 0.0, //
    0.0, 1.0, -1.0, -1.0,
];

const F4_BT: [f64; 36] = [
    4.0, 0.0, -5.0, 0.0, 1.0, 0.0, //
    0.0, -4.0, -4.0, 1.0, 1.0, 0.0, //
    0.0, 4.0, -4.0, -1.0, 1.0, 0.0, //
    0.0, -2.0, -1.0, 2.0, 1.0, 0.0, //
    0.0, 2.0, -1.0, -2.0, 1.0, 0.0, //
    0.0, 4.0, 0.0, -5.0, 0.0, 1.0,
];
const F4_G: [f64; 18] = [
    1.0 / 4.0,
    0.0,
    0.0, //
    -1.0 / 6.0,
    -1.0 / 6.0,
    -1.0 / 6.0, //
    -1.0 / 6.0,
    1.0 / 6.0,
    -1.0 / 6.0, //
    1.0 / 24.0,
    1.0 / 12.0,
    1.0 / 6.0, //
    1.0 / 24.0,
    -1.0 / 12.0,
    1.0 / 6.0, //
    0.0,
    0.0,
    1.0,
];
const F4_AT: [f64; 24] = [
    1.0, 1.0, 1.0, 1.0, 1.0, 0.0, //
    0.0, 1.0, -1.0, 2.0, -2.0, 0.0, //
    0.0, 1.0, 1.0, 4.0, 4.0, 0.0, //
    0.0, 1.0, -1.0, 8.0, -8.0, 1.0,
];

fn transpose(m: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            t[j * rows + i] = m[i * cols + j];
        }
    }
    t
}

/// `(n x k) * (k x p)`, row-major.
pub(crate) fn matmul(a: &[f64], b: &[f64], n: usize, k: usize, p: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * p];
    for i in 0..n {
        for j in 0..p {
            let mut acc = 0.0;
            for l in 0..k {
                acc += a[i * k + l] * b[l * p + j];
            }
            out[i * p + j] = acc;
        }
    }
    out
}

pub fn transform_matrices(params: WinogradParams) -> Result<TransformMatrices> {
    params.validate()?;
    let pt = params.pt();
    let (bt, g, at): (&[f64], &[f64], &[f64]) = match params.m {
        2 => (&F2_BT, &F2_G, &F2_AT),
        _ => (&F4_BT, &F4_G, &F4_AT),
    };
    Ok(TransformMatrices {
        params,
        a: transpose(at, params.m, pt),
        g: g.to_vec(),
        b: transpose(bt, pt, pt),
    })
}

impl TransformMatrices {
    pub fn pt(&self) -> usize {
        self.params.pt()
    }

    pub fn m(&self) -> usize {
        self.params.m
    }

    pub fn r(&self) -> usize {
        self.params.r
    }
}

/// `B^T d B` for a `PT x PT` tile.
pub fn transform_input_tile(d: &[f64], mats: &TransformMatrices) -> Vec<f64> {
    let pt = mats.pt();
    debug_assert_eq!(d.len(), pt * pt);
    let bt = transpose(&mats.b, pt, pt);
    let tmp = matmul(&bt, d, pt, pt, pt);
    matmul(&tmp, &mats.b, pt, pt, pt)
}

/// `G g G^T` for an `r x r` kernel.
pub fn transform_kernel(g: &[f64], mats: &TransformMatrices) -> Vec<f64> {
    let (pt, r) = (mats.pt(), mats.r());
    debug_assert_eq!(g.len(), r * r);
    let gt = transpose(&mats.g, pt, r);
    let tmp = matmul(&mats.g, g, pt, r, r);
    matmul(&tmp, &gt, pt, r, pt)
}

/// `A^T t A`, producing an `m x m` output tile.
pub fn inverse_transform(t: &[f64], mats: &TransformMatrices) -> Vec<f64> {
    let (pt, m) = (mats.pt(), mats.m());
    debug_assert_eq!(t.len(), pt * pt);
    let at = transpose(&mats.a, pt, m);
    let tmp = matmul(&at, t, m, pt, pt);
    matmul(&tmp, &mats.a, m, pt, m)
}

/// One `r x r` slice of a larger kernel and its position inside it.
#[derive(Debug, Clone, PartialEq)]
pub struct SubKernel {
    pub weights: Tensor,
    pub row_offset: usize,
    pub col_offset: usize,
}

/// Number of `r x r` sub-kernels along each kernel axis.
pub fn decomposition_factors(r_k: usize, s_k: usize, r: usize) -> (usize, usize) {
    (r_k.div_ceil(r), s_k.div_ceil(r))
}

/// Splits `[K, C, R, S]` weights into `ceil(R/r) * ceil(S/r)` zero-padded
/// `r x r` sub-kernels, in row-major order of their offsets.
pub fn decompose_kernel(weights: &Tensor, r: usize) -> Vec<SubKernel> {
    let d = weights.dims();
    let (k, c, rk, sk) = (d[0], d[1], d[2], d[3]);
    let (dr, ds) = decomposition_factors(rk, sk, r);
    let mut subs = Vec::with_capacity(dr * ds);
    for a in 0..dr {
        for b in 0..ds {
            let mut w = Tensor::zeros(&[k, c, r, r]);
            for ko in 0..k {
                for ci in 0..c {
                    for i in 0..r {
                        for j in 0..r {
                            let (si, sj) = (a * r + i, b * r + j);
                            if si < rk && sj < sk {
                                w.set4(ko, ci, i, j, weights.at4(ko, ci, si, sj));
                            }
                        }
                    }
                }
            }
            subs.push(SubKernel {
                weights: w,
                row_offset: a * r,
                col_offset: b * r,
            });
        }
    }
    subs
}

/// Transformed kernels `U[k][c]`, each a `PT * PT` tile, indexed `k * C + c`.
pub fn transform_weights(weights: &Tensor, mats: &TransformMatrices) -> Vec<Vec<f64>> {
    let d = weights.dims();
    let (k, c, r) = (d[0], d[1], d[2]);
    let mut out = Vec::with_capacity(k * c);
    let mut g = vec![0.0; r * r];
    for ko in 0..k {
        for ci in 0..c {
            for i in 0..r {
                for j in 0..r {
                    g[i * r + j] = weights.at4(ko, ci, i, j);
                }
            }
            out.push(transform_kernel(&g, mats));
        }
    }
    out
}

/// Reads the `PT x PT` input tile whose top-left corner sits at
/// `(y0, x0)` in unpadded input coordinates; out-of-range reads are zero.
pub(crate) fn gather_tile(input: &Tensor, c: usize, y0: isize, x0: isize, pt: usize, out: &mut [f64]) {
    let d = input.dims();
    let (h, w) = (d[1] as isize, d[2] as isize);
    for i in 0..pt {
        for j in 0..pt {
            let (y, x) = (y0 + i as isize, x0 + j as isize);
            out[i * pt + j] = if y >= 0 && x >= 0 && y < h && x < w {
                input.at3(c, y as usize, x as usize)
            } else {
                0.0
            };
        }
    }
}

/// Adds one sub-kernel's Winograd partial output into `out` (`[K, H, W]`).
///
/// The channel reduction runs as `PT * PT` GEMMs `M_e = U_e * V_e`
/// (`K x C` by `C x tiles`), accumulated in ascending channel order.
#[allow(clippy::too_many_arguments)]
fn accumulate_partial(
    input: &Tensor,
    u: &[Vec<f64>],
    layer: &LayerSpec,
    row_offset: usize,
    col_offset: usize,
    mats: &TransformMatrices,
    out: &mut Tensor,
    mults: &mut u64,
) {
    let (pt, m) = (mats.pt(), mats.m());
    let (k, c, h, w) = (layer.k, layer.c, layer.h, layer.w);
    let (tiles_y, tiles_x) = (h.div_ceil(m), w.div_ceil(m));
    let tiles = tiles_y * tiles_x;
    let e_count = pt * pt;

    // V[e][c][t]
    let mut v = vec![0.0; e_count * c * tiles];
    let mut d = vec![0.0; e_count];
    for ci in 0..c {
        for ty in 0..tiles_y {
            for tx in 0..tiles_x {
                let y0 = (ty * m + row_offset) as isize - layer.pad_top() as isize;
                let x0 = (tx * m + col_offset) as isize - layer.pad_left() as isize;
                gather_tile(input, ci, y0, x0, pt, &mut d);
                let vt = transform_input_tile(&d, mats);
                let t = ty * tiles_x + tx;
                for (e, val) in vt.into_iter().enumerate() {
                    v[(e * c + ci) * tiles + t] = val;
                }
            }
        }
    }

    // M[e][k][t]
    let mut mm = vec![0.0; e_count * k * tiles];
    for e in 0..e_count {
        for ko in 0..k {
            let row = &mut mm[(e * k + ko) * tiles..(e * k + ko + 1) * tiles];
            for ci in 0..c {
                let weight = u[ko * c + ci][e];
                let vrow = &v[(e * c + ci) * tiles..(e * c + ci + 1) * tiles];
                for (acc, x) in row.iter_mut().zip(vrow) {
                    *acc += weight * x;
                }
            }
        }
    }
    *mults += (e_count * k * c * tiles) as u64;

    let mut tile = vec![0.0; e_count];
    for ko in 0..k {
        for ty in 0..tiles_y {
            for tx in 0..tiles_x {
                let t = ty * tiles_x + tx;
                for (e, slot) in tile.iter_mut().enumerate() {
                    *slot = mm[(e * k + ko) * tiles + t];
                }
                let y = inverse_transform(&tile, mats);
                for i in 0..m {
                    for j in 0..m {
                        let (oy, ox) = (ty * m + i, tx * m + j);
                        if oy < h && ox < w {
                            let cur = out.at3(ko, oy, ox);
                            out.set3(ko, oy, ox, cur + y[i * m + j]);
                        }
                    }
                }
            }
        }
    }
}

fn finish(out: &mut Tensor, bias: Option<&Tensor>, layer: &LayerSpec) {
    let (k, h, w) = layer.output_dims();
    for ko in 0..k {
        let b = if layer.bias {
            bias.map_or(0.0, |b| b.data()[ko])
        } else {
            0.0
        };
        for y in 0..h {
            for x in 0..w {
                let mut v = out.at3(ko, y, x);
                if layer.bias {
                    v += b;
                }
                if layer.relu {
                    v = v.max(0.0);
                }
                out.set3(ko, y, x, v);
            }
        }
    }
}

fn check_shapes(input: &Tensor, weights: &Tensor, bias: Option<&Tensor>, layer: &LayerSpec) -> Result<()> {
    let (c, h_in, w_in) = layer.input_dims();
    if input.dims() != [c, h_in, w_in] || weights.dims() != [layer.k, layer.c, layer.r, layer.s] {
        return Err(Error::ShapeMismatch(format!(
            "input {:?} / weights {:?} do not match the layer",
            input.dims(),
            weights.dims()
        )));
    }
    if layer.bias && bias.map(|b| b.dims() != [layer.k]).unwrap_or(true) {
        return Err(Error::ShapeMismatch("layer needs a [K] bias tensor".into()));
    }
    Ok(())
}

/// Winograd convolution of a layer with an `r x r` kernel.
///
/// Returns the output and the number of element-wise multiplications
/// (`PT^2` per output tile, input channel and output channel).
pub fn winograd_conv_layer(
    input: &Tensor,
    weights: &Tensor,
    bias: Option<&Tensor>,
    layer: &LayerSpec,
    params: WinogradParams,
) -> Result<(Tensor, u64)> {
    params.validate()?;
    if layer.r != params.r || layer.s != params.r {
        return Err(Error::ShapeMismatch(format!(
            "kernel {}x{} is not {}x{}; decompose it first",
            layer.r, layer.s, params.r, params.r
        )));
    }
    winograd_conv_decomposed(input, weights, bias, layer, params)
}

/// Winograd convolution for any kernel size via kernel decomposition.
pub fn winograd_conv_decomposed(
    input: &Tensor,
    weights: &Tensor,
    bias: Option<&Tensor>,
    layer: &LayerSpec,
    params: WinogradParams,
) -> Result<(Tensor, u64)> {
    params.validate()?;
    check_shapes(input, weights, bias, layer)?;
    let mats = transform_matrices(params)?;
    let mut out = Tensor::zeros(&[layer.k, layer.h, layer.w]);
    let mut mults = 0;
    for sub in decompose_kernel(weights, params.r) {
        let u = transform_weights(&sub.weights, &mats);
        accumulate_partial(
            input,
            &u,
            layer,
            sub.row_offset,
            sub.col_offset,
            &mats,
            &mut out,
            &mut mults,
        );
    }
    finish(&mut out, bias, layer);
    Ok((out, mults))
}
