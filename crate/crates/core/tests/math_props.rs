//! Reference convolution and Winograd properties.

use hdnn_core::model::{conv_oracle, layer_macs, LayerSpec, Padding};
use hdnn_core::tensor::Tensor;
use hdnn_core::winograd::{
    decompose_kernel, inverse_transform, transform_input_tile, transform_kernel, transform_matrices,
    winograd_conv_decomposed, WinogradParams,
};
use proptest::prelude::*;

fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0..1.0f64, n)
}

fn layer() -> impl Strategy<Value = LayerSpec> {
    (
        1usize..5,
        1usize..5,
        1usize..6,
        1usize..6,
        1usize..9,
        1usize..9,
        any::<bool>(),
    )
        .prop_map(|(k, c, r, s, h, w, valid)| {
            let padding = if valid { Padding::Valid } else { Padding::Same };
            LayerSpec::conv(k, c, r, s, h, w)
                .with_padding(padding)
                .with_relu(false)
                .with_bias(false)
        })
}

fn tensor(dims: Vec<usize>) -> impl Strategy<Value = Tensor> {
    let n = dims.iter().product();
    values(n).prop_map(move |v| Tensor::from_vec(&dims, v).unwrap())
}

fn layer_io() -> impl Strategy<Value = (LayerSpec, Tensor, Tensor)> {
    layer().prop_flat_map(|l| {
        let (c, h, w) = l.input_dims();
        (Just(l.clone()), tensor(vec![c, h, w]), tensor(vec![l.k, l.c, l.r, l.s]))
    })
}

/// `m x m` valid correlation of a `PT x PT` tile with an `r x r` kernel.
fn direct_tile(d: &[f64], g: &[f64], m: usize, r: usize) -> Vec<f64> {
    let pt = m + r - 1;
    let mut out = vec![0.0; m * m];
    for y in 0..m {
        for x in 0..m {
            for i in 0..r {
                for j in 0..r {
                    out[y * m + x] += d[(y + i) * pt + x + j] * g[i * r + j];
                }
            }
        }
    }
    out
}

fn tile_identity(m: usize, d: &[f64], g: &[f64]) -> Result<(), TestCaseError> {
    let mats = transform_matrices(WinogradParams::new(m, 3).unwrap()).unwrap();
    let u = transform_kernel(g, &mats);
    let v = transform_input_tile(d, &mats);
    let prod: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a * b).collect();
    let y = inverse_transform(&prod, &mats);
    let expected = direct_tile(d, g, m, 3);
    let scale = expected.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    for (a, b) in y.iter().zip(&expected) {
        prop_assert!((a - b).abs() <= 1e-9 * scale, "{a} vs {b}");
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn f2_tile_identity(d in values(16), g in values(9)) {
        tile_identity(2, &d, &g)?;
    }

    #[test]
    fn f4_tile_identity(d in values(36), g in values(9)) {
        tile_identity(4, &d, &g)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn oracle_is_linear((layer, x, g) in layer_io(), a in -4.0..4.0f64) {
        let (y, _) = conv_oracle(&x, &g, None, &layer).unwrap();
        let (ya, _) = conv_oracle(&x.scale(a), &g, None, &layer).unwrap();
        prop_assert!(ya.max_rel_diff(&y.scale(a)) <= 1e-9);
    }

    #[test]
    fn delta_kernel_is_identity(h in 1usize..12, w in 1usize..12, x in values(144)) {
        let layer = LayerSpec::conv(1, 1, 3, 3, h, w).with_relu(false).with_bias(false);
        let x = Tensor::from_vec(&[1, h, w], x[..h * w].to_vec()).unwrap();
        let mut g = Tensor::zeros(&[1, 1, 3, 3]);
        g.set4(0, 0, 1, 1, 1.0);
        let (y, _) = conv_oracle(&x, &g, None, &layer).unwrap();
        prop_assert_eq!(y, x);
    }

    #[test]
    fn oracle_multiplications_equal_macs((layer, x, g) in layer_io()) {
        let (_, mults) = conv_oracle(&x, &g, None, &layer).unwrap();
        prop_assert_eq!(mults, layer_macs(&layer));
    }

    #[test]
    fn decomposition_partitions_the_kernel(k in 1usize..3, c in 1usize..3, r in 1usize..8, s in 1usize..8) {
        let n = k * c * r * s;
        // Distinct nonzero entries make every original weight traceable.
        let w = Tensor::from_vec(&[k, c, r, s], (1..=n).map(|v| v as f64).collect()).unwrap();
        let subs = decompose_kernel(&w, 3);
        prop_assert_eq!(subs.len(), r.div_ceil(3) * s.div_ceil(3));
        let mut seen = vec![0usize; n];
        for sub in &subs {
            for ko in 0..k {
                for ci in 0..c {
                    for i in 0..3 {
                        for j in 0..3 {
                            let v = sub.weights.at4(ko, ci, i, j);
                            let (si, sj) = (sub.row_offset + i, sub.col_offset + j);
                            if si < r && sj < s {
                                prop_assert_eq!(v, w.at4(ko, ci, si, sj));
                                seen[v as usize - 1] += 1;
                            } else {
                                prop_assert_eq!(v, 0.0);
                            }
                        }
                    }
                }
            }
        }
        prop_assert!(seen.iter().all(|&count| count == 1));
    }

    #[test]
    fn winograd_matches_oracle_and_counts((layer, x, g) in layer_io(), big in any::<bool>()) {
        let m = if big { 4 } else { 2 };
        let pt = m + 2;
        let (reference, _) = conv_oracle(&x, &g, None, &layer).unwrap();
        let (y, mults) = winograd_conv_decomposed(&x, &g, None, &layer, WinogradParams::new(m, 3).unwrap()).unwrap();
        prop_assert!(y.max_rel_diff(&reference) <= 1e-6);
        let tiles = layer.h.div_ceil(m) * layer.w.div_ceil(m);
        let subs = layer.r.div_ceil(3) * layer.s.div_ceil(3);
        prop_assert_eq!(mults as usize, pt * pt * tiles * layer.k * layer.c * subs);
    }
}
