//! Model descriptions and static shape checking.

use serde::{Deserialize, Serialize};

use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    #[default]
    Valid,
    /// Output size `ceil(n / stride)`, padding split with the extra cell at the end.
    Same,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Conv2d {
        out_channels: usize,
        kernel_h: usize,
        kernel_w: usize,
        stride: usize,
        #[serde(default)]
        padding: Padding,
        #[serde(default = "yes")]
        trainable: bool,
    },
    MaxPool {
        size: usize,
    },
    Dropout {
        rate: f64,
    },
    Flatten,
    Dense {
        units: usize,
        #[serde(default = "yes")]
        trainable: bool,
    },
    Relu,
    Softmax,
}

impl LayerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::MaxPool { .. } => "maxpool",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Relu => "relu",
            LayerSpec::Softmax => "softmax",
        }
    }

    pub fn has_params(&self) -> bool {
        matches!(self, LayerSpec::Conv2d { .. } | LayerSpec::Dense { .. })
    }

    pub fn is_trainable(&self) -> bool {
        match *self {
            LayerSpec::Conv2d { trainable, .. } | LayerSpec::Dense { trainable, .. } => trainable,
            _ => false,
        }
    }

    pub fn set_trainable(&mut self, value: bool) {
        if let LayerSpec::Conv2d { trainable, .. } | LayerSpec::Dense { trainable, .. } = self {
            *trainable = value;
        }
    }
}

/// Output length and leading padding of one convolution axis.
pub fn conv_axis(n: usize, k: usize, stride: usize, padding: Padding) -> Option<(usize, usize)> {
    match padding {
        Padding::Valid => (n >= k).then(|| ((n - k) / stride + 1, 0)),
        Padding::Same => {
            let out = n.div_ceil(stride);
            let total = ((out - 1) * stride + k).saturating_sub(n);
            Some((out, total / 2))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Height, width, channels of one example.
    pub input: [usize; 3],
    pub layers: Vec<LayerSpec>,
}

impl ModelConfig {
    /// Shape after every layer, starting with the input shape. Image-like
    /// tensors are `[h, w, c]`; flattened ones `[n]`.
    pub fn shape_chain(&self) -> Result<Vec<Vec<usize>>, NnError> {
        let mut shapes = vec![self.input.to_vec()];
        for (i, layer) in self.layers.iter().enumerate() {
            let cur = shapes.last().unwrap();
            let bad = |why: String| NnError::Shape { layer: i, kind: layer.kind(), detail: why };
            let next = match *layer {
                LayerSpec::Conv2d { out_channels, kernel_h, kernel_w, stride, padding, .. } => {
                    let [h, w, _] = image_shape(cur).ok_or_else(|| bad(format!("needs [h, w, c] input, got {cur:?}")))?;
                    if stride == 0 || kernel_h == 0 || kernel_w == 0 || out_channels == 0 {
                        return Err(bad("kernel, stride and channels must be positive".into()));
                    }
                    let (oh, _) = conv_axis(h, kernel_h, stride, padding)
                        .ok_or_else(|| bad(format!("kernel {kernel_h}×{kernel_w} larger than input {h}×{w}")))?;
                    let (ow, _) = conv_axis(w, kernel_w, stride, padding)
                        .ok_or_else(|| bad(format!("kernel {kernel_h}×{kernel_w} larger than input {h}×{w}")))?;
                    vec![oh, ow, out_channels]
                }
                LayerSpec::MaxPool { size } => {
                    let [h, w, c] = image_shape(cur).ok_or_else(|| bad(format!("needs [h, w, c] input, got {cur:?}")))?;
                    if size == 0 || h < size || w < size {
                        return Err(bad(format!("pool {size} does not fit {h}×{w}")));
                    }
                    vec![h / size, w / size, c]
                }
                LayerSpec::Dropout { rate } => {
                    if !(0.0..1.0).contains(&rate) {
                        return Err(bad(format!("rate {rate} outside [0, 1)")));
                    }
                    cur.clone()
                }
                LayerSpec::Flatten => vec![cur.iter().product()],
                LayerSpec::Dense { units, .. } => {
                    if cur.len() != 1 {
                        return Err(bad(format!("needs flat input, got {cur:?}")));
                    }
                    if units == 0 {
                        return Err(bad("units must be positive".into()));
                    }
                    vec![units]
                }
                LayerSpec::Relu => cur.clone(),
                LayerSpec::Softmax => {
                    if cur.len() != 1 {
                        return Err(bad(format!("needs flat input, got {cur:?}")));
                    }
                    if i + 1 != self.layers.len() {
                        return Err(bad("softmax must be the last layer".into()));
                    }
                    cur.clone()
                }
            };
            shapes.push(next);
        }
        Ok(shapes)
    }

    /// Weight and bias shapes of every layer with parameters.
    pub fn param_shapes(&self) -> Result<Vec<Option<(Vec<usize>, Vec<usize>)>>, NnError> {
        let shapes = self.shape_chain()?;
        Ok(self
            .layers
            .iter()
            .enumerate()
            .map(|(i, layer)| match *layer {
                LayerSpec::Conv2d { out_channels, kernel_h, kernel_w, .. } => {
                    Some((vec![out_channels, kernel_h, kernel_w, shapes[i][2]], vec![out_channels]))
                }
                LayerSpec::Dense { units, .. } => Some((vec![shapes[i][0], units], vec![units])),
                _ => None,
            })
            .collect())
    }

    pub fn n_params(&self) -> Result<usize, NnError> {
        Ok(self
            .param_shapes()?
            .into_iter()
            .flatten()
            .map(|(w, b)| w.iter().product::<usize>() + b.iter().product::<usize>())
            .sum())
    }

    pub fn output_shape(&self) -> Result<Vec<usize>, NnError> {
        Ok(self.shape_chain()?.pop().unwrap())
    }
}

fn image_shape(s: &[usize]) -> Option<[usize; 3]> {
    s.try_into().ok()
}

/// Two convolution blocks (16 kernels 7×7, then 32 kernels 5×5, stride 2,
/// each followed by ReLU, 2×2 max pooling and 0.2 dropout), then dense
/// layers of 32 and 16 units and a 2-way softmax.
pub fn build_vanilla_cnn() -> ModelConfig {
    build_vanilla_cnn_with([224, 224, 3], Padding::Valid)
}

/// The same architecture for another input size or padding mode.
pub fn build_vanilla_cnn_with(input: [usize; 3], padding: Padding) -> ModelConfig {
    let conv = |out_channels, k| LayerSpec::Conv2d { out_channels, kernel_h: k, kernel_w: k, stride: 2, padding, trainable: true };
    let dense = |units| LayerSpec::Dense { units, trainable: true };
    ModelConfig {
        input,
        layers: vec![
            conv(16, 7),
            LayerSpec::Relu,
            LayerSpec::MaxPool { size: 2 },
            LayerSpec::Dropout { rate: 0.2 },
            conv(32, 5),
            LayerSpec::Relu,
            LayerSpec::MaxPool { size: 2 },
            LayerSpec::Dropout { rate: 0.2 },
            LayerSpec::Flatten,
            dense(32),
            LayerSpec::Relu,
            dense(16),
            LayerSpec::Relu,
            dense(2),
            LayerSpec::Softmax,
        ],
    }
}

/// The VGG16 convolutional base: five blocks of 3×3 same-padded
/// convolutions (64, 128, 256, 512, 512 kernels; 2, 2, 3, 3, 3 per block),
/// each followed by ReLU, with 2×2 max pooling closing every block. No
/// classifier layers; weights come from a checkpoint.
pub fn build_vgg16_backbone(input: [usize; 3]) -> ModelConfig {
    let mut layers = Vec::new();
    for (channels, n) in [(64, 2), (128, 2), (256, 3), (512, 3), (512, 3)] {
        for _ in 0..n {
            layers.push(LayerSpec::Conv2d { out_channels: channels, kernel_h: 3, kernel_w: 3, stride: 1, padding: Padding::Same, trainable: true });
            layers.push(LayerSpec::Relu);
        }
        layers.push(LayerSpec::MaxPool { size: 2 });
    }
    ModelConfig { input, layers }
}

/// Appends a dense head (`head_units`, ReLU after each, then 2-way softmax)
/// to a backbone and marks every layer trainable. A trailing softmax on the
/// backbone is dropped and a non-flat backbone output is flattened.
pub fn build_transfer_model(backbone: &ModelConfig, head_units: &[usize]) -> Result<ModelConfig, NnError> {
    let mut layers = backbone.layers.clone();
    if matches!(layers.last(), Some(LayerSpec::Softmax)) {
        layers.pop();
    }
    let trunk = ModelConfig { input: backbone.input, layers: layers.clone() };
    if trunk.output_shape()?.len() != 1 {
        layers.push(LayerSpec::Flatten);
    }
    for layer in &mut layers {
        layer.set_trainable(true);
    }
    for &units in head_units {
        layers.push(LayerSpec::Dense { units, trainable: true });
        layers.push(LayerSpec::Relu);
    }
    layers.push(LayerSpec::Dense { units: 2, trainable: true });
    layers.push(LayerSpec::Softmax);
    let model = ModelConfig { input: backbone.input, layers };
    model.shape_chain()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vanilla_shape_chain() {
        let shapes = build_vanilla_cnn().shape_chain().unwrap();
        let pick = |i: usize| shapes[i].clone();
        assert_eq!(pick(0), vec![224, 224, 3]);
        assert_eq!(pick(1), vec![109, 109, 16]);
        assert_eq!(pick(3), vec![54, 54, 16]);
        assert_eq!(pick(5), vec![25, 25, 32]);
        assert_eq!(pick(7), vec![12, 12, 32]);
        assert_eq!(pick(9), vec![4608]);
        assert_eq!(pick(10), vec![32]);
        assert_eq!(pick(12), vec![16]);
        assert_eq!(pick(15), vec![2]);
    }

    #[test]
    fn vgg16_base_shapes() {
        let cfg = build_vgg16_backbone([224, 224, 3]);
        assert_eq!(cfg.output_shape().unwrap(), vec![7, 7, 512]);
        // 14,714,688 weights in the published convolutional base
        assert_eq!(cfg.n_params().unwrap(), 14_714_688);
        let head = build_transfer_model(&cfg, &[50, 20]).unwrap();
        assert_eq!(head.shape_chain().unwrap()[32], vec![25_088]);
    }

    #[test]
    fn first_conv_parameter_count() {
        let shapes = build_vanilla_cnn().param_shapes().unwrap();
        let (w, b) = shapes[0].clone().unwrap();
        assert_eq!(w.iter().product::<usize>() + b[0], 2368);
    }

    #[test]
    fn same_padding_axis() {
        assert_eq!(conv_axis(16, 7, 2, Padding::Same), Some((8, 2)));
        assert_eq!(conv_axis(5, 3, 1, Padding::Same), Some((5, 1)));
        assert_eq!(conv_axis(4, 7, 2, Padding::Valid), None);
    }

    #[test]
    fn transfer_head_on_flat_feature() {
        let backbone = ModelConfig { input: [1, 1, 512], layers: vec![LayerSpec::Flatten] };
        let m = build_transfer_model(&backbone, &[50, 20]).unwrap();
        let shapes = m.param_shapes().unwrap();
        assert_eq!(shapes[1].as_ref().unwrap().0, vec![512, 50]);
        assert_eq!(m.output_shape().unwrap(), vec![2]);
    }

    #[test]
    fn transfer_marks_backbone_trainable() {
        let backbone = ModelConfig {
            input: [8, 8, 1],
            layers: vec![LayerSpec::Conv2d { out_channels: 2, kernel_h: 3, kernel_w: 3, stride: 1, padding: Padding::Valid, trainable: false }],
        };
        let m = build_transfer_model(&backbone, &[50, 20]).unwrap();
        assert!(m.layers[0].is_trainable());
        assert_eq!(m.layers[1], LayerSpec::Flatten);
    }

    #[test]
    fn errors_name_the_layer() {
        let cfg = ModelConfig { input: [4, 4, 1], layers: vec![LayerSpec::Dense { units: 3, trainable: true }] };
        assert!(matches!(cfg.shape_chain(), Err(NnError::Shape { layer: 0, kind: "dense", .. })));
        let cfg = build_vanilla_cnn_with([16, 16, 3], Padding::Valid);
        assert!(matches!(cfg.shape_chain(), Err(NnError::Shape { layer: 4, kind: "conv2d", .. })));
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = build_vanilla_cnn();
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains(r#"{"type":"conv2d","out_channels":16"#));
        assert_eq!(serde_json::from_str::<ModelConfig>(&text).unwrap(), cfg);
    }
}
