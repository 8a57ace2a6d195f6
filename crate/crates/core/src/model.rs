//! DNN model description, validation and the direct-convolution reference.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv,
    Fc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    Same,
    Valid,
}

/// Host-side max pooling applied to a layer's output before the next layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HostPool {
    pub window: usize,
    pub stride: usize,
}

fn default_stride() -> usize {
    1
}

fn default_padding() -> Padding {
    Padding::Same
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "C")]
    pub c: usize,
    #[serde(rename = "R", default = "one")]
    pub r: usize,
    #[serde(rename = "S", default = "one")]
    pub s: usize,
    #[serde(rename = "H", default = "one")]
    pub h: usize,
    #[serde(rename = "W", default = "one")]
    pub w: usize,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default = "default_padding")]
    pub padding: Padding,
    #[serde(default)]
    pub relu: bool,
    #[serde(default)]
    pub bias: bool,
    #[serde(default)]
    pub host_pool: Option<HostPool>,
}

fn one() -> usize {
    1
}

impl LayerSpec {
    pub fn conv(k: usize, c: usize, r: usize, s: usize, h: usize, w: usize) -> Self {
        LayerSpec {
            kind: LayerKind::Conv,
            k,
            c,
            r,
            s,
            h,
            w,
            stride: 1,
            padding: Padding::Same,
            relu: false,
            bias: false,
            host_pool: None,
        }
    }

    pub fn fc(k: usize, c: usize) -> Self {
        LayerSpec {
            kind: LayerKind::Fc,
            ..LayerSpec::conv(k, c, 1, 1, 1, 1)
        }
    }

    pub fn with_padding(mut self, padding: Padding) -> Self {
        self.padding = padding;
        self
    }

    pub fn with_relu(mut self, relu: bool) -> Self {
        self.relu = relu;
        self
    }

    pub fn with_bias(mut self, bias: bool) -> Self {
        self.bias = bias;
        self
    }

    pub fn with_pool(mut self, window: usize, stride: usize) -> Self {
        self.host_pool = Some(HostPool { window, stride });
        self
    }

    pub fn is_fc(&self) -> bool {
        self.kind == LayerKind::Fc
    }

    /// Zero rows/cols added above and left of the input.
    pub fn pad_top(&self) -> usize {
        match self.padding {
            Padding::Same => (self.r - 1) / 2,
            Padding::Valid => 0,
        }
    }

    pub fn pad_left(&self) -> usize {
        match self.padding {
            Padding::Same => (self.s - 1) / 2,
            Padding::Valid => 0,
        }
    }

    /// Unpadded input feature map size `(C, H_in, W_in)`.
    pub fn input_dims(&self) -> (usize, usize, usize) {
        match self.padding {
            Padding::Same => (self.c, self.h, self.w),
            Padding::Valid => (self.c, self.h + self.r - 1, self.w + self.s - 1),
        }
    }

    pub fn output_dims(&self) -> (usize, usize, usize) {
        (self.k, self.h, self.w)
    }

    /// Output dims after the optional host pooling step.
    pub fn pooled_output_dims(&self) -> (usize, usize, usize) {
        match self.host_pool {
            Some(p) => (
                self.k,
                (self.h - p.window) / p.stride + 1,
                (self.w - p.window) / p.stride + 1,
            ),
            None => self.output_dims(),
        }
    }

    pub fn validate(&self, index: usize) -> Result<()> {
        let bad = |reason: &str| Error::InvalidLayer {
            layer: index,
            reason: reason.to_string(),
        };
        if self.stride != 1 {
            return Err(Error::UnsupportedStride(self.stride));
        }
        if [self.k, self.c, self.r, self.s, self.h, self.w].contains(&0) {
            return Err(bad("K, C, R, S, H, W must all be >= 1"));
        }
        if self.is_fc() && (self.r != 1 || self.s != 1 || self.h != 1 || self.w != 1) {
            return Err(bad("fc layers require R = S = H = W = 1"));
        }
        if let Some(p) = self.host_pool {
            if p.window == 0 || p.stride == 0 {
                return Err(bad("pool window and stride must be >= 1"));
            }
            if p.window > self.h || p.window > self.w {
                return Err(bad("pool window larger than the feature map"));
            }
        }
        Ok(())
    }
}

/// Multiply-accumulates of one layer: `K * C * R * S * H * W`.
pub fn layer_macs(layer: &LayerSpec) -> u64 {
    [layer.k, layer.c, layer.r, layer.s, layer.h, layer.w]
        .iter()
        .map(|&v| v as u64)
        .product()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DnnModel {
    pub name: String,
    pub layers: Vec<LayerSpec>,
}

impl DnnModel {
    pub fn new(name: impl Into<String>, layers: Vec<LayerSpec>) -> Result<Self> {
        let model = DnnModel {
            name: name.into(),
            layers,
        };
        model.validate()?;
        Ok(model)
    }

    /// Number of accelerator layers.
    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn total_macs(&self) -> u64 {
        self.layers.iter().map(layer_macs).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Parse("model has no layers".into()));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            layer.validate(i)?;
        }
        for (i, pair) in self.layers.windows(2).enumerate() {
            let (prev, next) = (&pair[0], &pair[1]);
            let (pk, ph, pw) = prev.pooled_output_dims();
            if next.is_fc() {
                if next.c != pk * ph * pw {
                    return Err(Error::ShapeMismatch(format!(
                        "layer {} (fc) expects {} inputs, layer {} produces {}x{}x{}",
                        i + 1,
                        next.c,
                        i,
                        pk,
                        ph,
                        pw
                    )));
                }
            } else {
                let (nc, nh, nw) = next.input_dims();
                if (nc, nh, nw) != (pk, ph, pw) {
                    return Err(Error::ShapeMismatch(format!(
                        "layer {} expects input {}x{}x{}, layer {} produces {}x{}x{}",
                        i + 1,
                        nc,
                        nh,
                        nw,
                        i,
                        pk,
                        ph,
                        pw
                    )));
                }
            }
        }
        Ok(())
    }

    /// Whether a host-side flatten sits between layer `i` and `i + 1`.
    pub fn flatten_after(&self, i: usize) -> bool {
        match self.layers.get(i + 1) {
            Some(next) if next.is_fc() => {
                let (_, h, w) = self.layers[i].pooled_output_dims();
                h * w > 1
            }
            _ => false,
        }
    }
}

pub fn parse_model(text: &str) -> Result<DnnModel> {
    let model: DnnModel = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    model.validate()?;
    Ok(model)
}

/// Weights and optional bias of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weights: Tensor,
    pub bias: Option<Tensor>,
}

impl LayerParams {
    pub fn random<R: rand::Rng + ?Sized>(layer: &LayerSpec, rng: &mut R) -> Self {
        // Scale keeps activations O(1) through deep stacks.
        let fan_in = (layer.c * layer.r * layer.s) as f64;
        let weights = Tensor::random(&[layer.k, layer.c, layer.r, layer.s], rng).scale(1.0 / fan_in.sqrt());
        let bias = layer.bias.then(|| Tensor::random(&[layer.k], rng).scale(0.1));
        LayerParams { weights, bias }
    }
}

/// Deterministic random input and parameters for a whole model.
pub fn random_model_data(model: &DnnModel, seed: u64) -> (Tensor, Vec<LayerParams>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (c, h, w) = model.layers[0].input_dims();
    let input = Tensor::random(&[c, h, w], &mut rng);
    let params = model.layers.iter().map(|l| LayerParams::random(l, &mut rng)).collect();
    (input, params)
}

fn check_conv_shapes(input: &Tensor, weights: &Tensor, bias: Option<&Tensor>, layer: &LayerSpec) -> Result<()> {
    let (c, h_in, w_in) = layer.input_dims();
    if input.dims() != [c, h_in, w_in] {
        return Err(Error::ShapeMismatch(format!(
            "input {:?} does not match layer input {:?}",
            input.dims(),
            [c, h_in, w_in]
        )));
    }
    if weights.dims() != [layer.k, layer.c, layer.r, layer.s] {
        return Err(Error::ShapeMismatch(format!(
            "weights {:?} do not match [{}, {}, {}, {}]",
            weights.dims(),
            layer.k,
            layer.c,
            layer.r,
            layer.s
        )));
    }
    match (layer.bias, bias) {
        (true, None) => Err(Error::ShapeMismatch("layer needs a bias tensor".into())),
        (true, Some(b)) if b.dims() != [layer.k] => Err(Error::ShapeMismatch(format!(
            "bias {:?} does not match [{}]",
            b.dims(),
            layer.k
        ))),
        _ => Ok(()),
    }
}

/// Direct convolution (cross-correlation, as in DNN frameworks).
///
/// Returns the `[K, H, W]` output and the number of multiplications
/// performed, counting products against padding zeros.
pub fn conv_oracle(
    input: &Tensor,
    weights: &Tensor,
    bias: Option<&Tensor>,
    layer: &LayerSpec,
) -> Result<(Tensor, u64)> {
    check_conv_shapes(input, weights, bias, layer)?;
    let (_, h_in, w_in) = layer.input_dims();
    let (pt, pl) = (layer.pad_top() as isize, layer.pad_left() as isize);
    let mut out = Tensor::zeros(&[layer.k, layer.h, layer.w]);
    let mut mults = 0u64;
    for k in 0..layer.k {
        for y in 0..layer.h {
            for x in 0..layer.w {
                let mut acc = 0.0;
                for c in 0..layer.c {
                    for i in 0..layer.r {
                        for j in 0..layer.s {
                            let iy = y as isize + i as isize - pt;
                            let ix = x as isize + j as isize - pl;
                            let v = if iy >= 0 && ix >= 0 && (iy as usize) < h_in && (ix as usize) < w_in {
                                input.at3(c, iy as usize, ix as usize)
                            } else {
                                0.0
                            };
                            acc += v * weights.at4(k, c, i, j);
                            mults += 1;
                        }
                    }
                }
                if layer.bias {
                    acc += bias.expect("checked").data()[k];
                }
                if layer.relu {
                    acc = acc.max(0.0);
                }
                out.set3(k, y, x, acc);
            }
        }
    }
    Ok((out, mults))
}

pub fn max_pool(input: &Tensor, pool: HostPool) -> Tensor {
    let d = input.dims();
    let (c, h, w) = (d[0], d[1], d[2]);
    let oh = (h - pool.window) / pool.stride + 1;
    let ow = (w - pool.window) / pool.stride + 1;
    let mut out = Tensor::zeros(&[c, oh, ow]);
    for ch in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                let mut m = f64::NEG_INFINITY;
                for i in 0..pool.window {
                    for j in 0..pool.window {
                        m = m.max(input.at3(ch, y * pool.stride + i, x * pool.stride + j));
                    }
                }
                out.set3(ch, y, x, m);
            }
        }
    }
    out
}

/// Host-side work between layer `i` and `i + 1`: pooling, then flattening
/// into an fc input when needed.
pub fn host_ops(model: &DnnModel, i: usize, activation: Tensor) -> Tensor {
    let layer = &model.layers[i];
    let pooled = match layer.host_pool {
        Some(p) => max_pool(&activation, p),
        None => activation,
    };
    if model.flatten_after(i) {
        let n = pooled.len();
        pooled.reshape(&[n, 1, 1]).expect("same element count")
    } else {
        pooled
    }
}

/// Runs the whole model through `conv_oracle`, returning every layer output
/// (before host ops).
pub fn reference_forward(model: &DnnModel, input: &Tensor, params: &[LayerParams]) -> Result<Vec<Tensor>> {
    let mut outputs = Vec::with_capacity(model.len());
    let mut x = input.clone();
    for (i, layer) in model.layers.iter().enumerate() {
        if layer.is_fc() && x.dims() != [layer.c, 1, 1] {
            let n = x.len();
            x = x.reshape(&[n, 1, 1])?;
        }
        let p = &params[i];
        let (y, _) = conv_oracle(&x, &p.weights, p.bias.as_ref(), layer)?;
        outputs.push(y.clone());
        x = host_ops(model, i, y);
    }
    Ok(outputs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn counting_case_same_padding() {
        let layer = LayerSpec::conv(1, 1, 3, 3, 4, 4);
        let input = Tensor::filled(&[1, 4, 4], 1.0);
        let weights = Tensor::filled(&[1, 1, 3, 3], 1.0);
        let (out, mults) = conv_oracle(&input, &weights, None, &layer).unwrap();
        let expected = [
            4.0, 6.0, 6.0, 4.0, //
            6.0, 9.0, 9.0, 6.0, //
            6.0, 9.0, 9.0, 6.0, //
            4.0, 6.0, 6.0, 4.0,
        ];
        assert_eq!(out.data(), &expected);
        assert_eq!(mults, 144);
    }

    #[test]
    fn valid_padding_matches_hand_unrolled_dot_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let layer = LayerSpec::conv(1, 1, 3, 3, 4, 4).with_padding(Padding::Valid);
        let input = Tensor::random(&[1, 6, 6], &mut rng);
        let g = Tensor::random(&[1, 1, 3, 3], &mut rng);
        let (out, mults) = conv_oracle(&input, &g, None, &layer).unwrap();
        let d = input.data();
        let w = g.data();
        for y in 0..4 {
            for x in 0..4 {
                let p = |i: usize, j: usize| d[(y + i) * 6 + x + j];
                let expected = p(0, 0) * w[0]
                    + p(0, 1) * w[1]
                    + p(0, 2) * w[2]
                    + p(1, 0) * w[3]
                    + p(1, 1) * w[4]
                    + p(1, 2) * w[5]
                    + p(2, 0) * w[6]
                    + p(2, 1) * w[7]
                    + p(2, 2) * w[8];
                assert!((out.at3(0, y, x) - expected).abs() < 1e-12);
            }
        }
        assert_eq!(mults, layer_macs(&layer));
    }

    #[test]
    fn layer_macs_examples() {
        assert_eq!(layer_macs(&LayerSpec::conv(1, 1, 3, 3, 4, 4)), 144);
        assert_eq!(
            layer_macs(&LayerSpec::conv(64, 64, 3, 3, 32, 32)),
            64 * 64 * 9 * 32 * 32
        );
        assert_eq!(layer_macs(&LayerSpec::conv(64, 64, 3, 3, 32, 32)), 37_748_736);
        assert_eq!(layer_macs(&LayerSpec::fc(10, 100)), 1_000);
    }

    #[test]
    fn delta_kernel_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let layer = LayerSpec::conv(1, 1, 3, 3, 5, 7);
        let input = Tensor::random(&[1, 5, 7], &mut rng);
        let mut g = Tensor::zeros(&[1, 1, 3, 3]);
        g.set4(0, 0, 1, 1, 1.0);
        let (out, _) = conv_oracle(&input, &g, None, &layer).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn relu_and_bias() {
        let layer = LayerSpec::conv(2, 1, 1, 1, 1, 2).with_relu(true).with_bias(true);
        let input = Tensor::from_vec(&[1, 1, 2], vec![1.0, -1.0]).unwrap();
        let w = Tensor::from_vec(&[2, 1, 1, 1], vec![1.0, 2.0]).unwrap();
        let b = Tensor::from_vec(&[2], vec![0.5, -3.0]).unwrap();
        let (out, _) = conv_oracle(&input, &w, Some(&b), &layer).unwrap();
        assert_eq!(out.data(), &[1.5, 0.0, 0.0, 0.0]);
        assert!(conv_oracle(&input, &w, None, &layer).is_err());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let layer = LayerSpec::conv(1, 2, 3, 3, 4, 4);
        let input = Tensor::zeros(&[1, 4, 4]);
        let w = Tensor::zeros(&[1, 2, 3, 3]);
        assert!(matches!(
            conv_oracle(&input, &w, None, &layer),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn parse_minimal_model() {
        let text = r#"{"name":"one","layers":[{"kind":"conv","K":1,"C":1,"R":3,"S":3,"H":4,"W":4,"stride":1,"padding":"same","relu":false,"bias":false,"host_pool":null}]}"#;
        let m = parse_model(text).unwrap();
        assert_eq!(m.len(), 1);
    }

    #[test]
    fn parse_rejects_stride_two() {
        let text = r#"{"name":"s","layers":[{"kind":"conv","K":1,"C":1,"R":3,"S":3,"H":4,"W":4,"stride":2}]}"#;
        assert!(matches!(parse_model(text), Err(Error::UnsupportedStride(2))));
    }

    #[test]
    fn parse_rejects_malformed_and_mismatched() {
        assert!(matches!(parse_model("{not json"), Err(Error::Parse(_))));
        let text = r#"{"name":"m","layers":[
            {"kind":"conv","K":4,"C":1,"R":3,"S":3,"H":4,"W":4},
            {"kind":"conv","K":4,"C":3,"R":3,"S":3,"H":4,"W":4}]}"#;
        assert!(matches!(parse_model(text), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn pooling_and_flatten_between_layers() {
        let text = r#"{"name":"p","layers":[
            {"kind":"conv","K":2,"C":1,"R":3,"S":3,"H":4,"W":4,"host_pool":{"window":2,"stride":2}},
            {"kind":"fc","K":3,"C":8}]}"#;
        let m = parse_model(text).unwrap();
        assert!(m.flatten_after(0));
        let (input, params) = random_model_data(&m, 1);
        let outs = reference_forward(&m, &input, &params).unwrap();
        assert_eq!(outs[1].dims(), &[3, 1, 1]);
    }

    #[test]
    fn max_pool_picks_window_maximum() {
        let t = Tensor::from_vec(&[1, 2, 4], vec![1.0, 5.0, 2.0, 0.0, 3.0, 4.0, -1.0, 7.0]).unwrap();
        let p = max_pool(&t, HostPool { window: 2, stride: 2 });
        assert_eq!(p.data(), &[5.0, 7.0]);
    }
}
