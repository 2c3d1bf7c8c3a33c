//! Checkpoint files: 8 magic bytes, a `u32` format version, a `u64` header
//! length, a JSON header describing every array (name, dtype, shape, byte
//! offset into the payload), then the arrays as little-endian `f32`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{build_transfer_model, AdamState, LayerParams, Model, ModelConfig, NnError, Tensor};

const MAGIC: &[u8; 8] = b"WHSTLCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingMetadata {
    pub epoch: usize,
    pub best_val_loss: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub weights: Vec<NamedArray>,
    pub optimizer: Option<AdamState<f32>>,
    pub metadata: TrainingMetadata,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArrayEntry {
    name: String,
    dtype: String,
    shape: Vec<usize>,
    offset: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    model: ModelConfig,
    metadata: TrainingMetadata,
    optimizer: Option<AdamState<f32>>,
    arrays: Vec<ArrayEntry>,
}

impl Checkpoint {
    pub fn from_model(model: &Model<f32>, optimizer: Option<&AdamState<f32>>, metadata: TrainingMetadata) -> Self {
        let weights = model
            .named_params()
            .into_iter()
            .map(|(name, t)| NamedArray { name, shape: t.shape().to_vec(), data: t.data().to_vec() })
            .collect();
        Self { config: model.config().clone(), weights, optimizer: optimizer.cloned(), metadata }
    }

    /// Rebuilds a model for `config` from the stored arrays.
    pub fn to_model(&self, config: &ModelConfig) -> Result<Model<f32>, NnError> {
        let mut model = Model::<f32>::new(config.clone(), 0)?;
        let expected: Vec<(String, Vec<usize>)> =
            model.named_params().into_iter().map(|(n, t)| (n, t.shape().to_vec())).collect();
        let find = |name: &str| -> Result<&NamedArray, NnError> {
            let mut hits = self.weights.iter().filter(|a| a.name == name);
            let first = hits.next().ok_or_else(|| NnError::Corrupt(format!("array {name} missing")))?;
            if hits.next().is_some() {
                return Err(NnError::Corrupt(format!("array {name} stored twice")));
            }
            Ok(first)
        };
        let mut arrays = Vec::with_capacity(expected.len());
        for (name, shape) in &expected {
            let a = find(name)?;
            if &a.shape != shape {
                return Err(NnError::ShapeMismatch { name: name.clone(), expected: shape.clone(), found: a.shape.clone() });
            }
            arrays.push(a);
        }
        let mut it = arrays.into_iter();
        for p in model.params_mut().iter_mut().flatten() {
            let (w, b) = (it.next().unwrap(), it.next().unwrap());
            *p = LayerParams {
                weight: Tensor::new(w.shape.clone(), w.data.clone())?,
                bias: Tensor::new(b.shape.clone(), b.data.clone())?,
            };
        }
        Ok(model)
    }

    pub fn model(&self) -> Result<Model<f32>, NnError> {
        self.to_model(&self.config)
    }

    /// A transfer model over this checkpoint's first `keep_layers` layers
    /// (all of them when `None`), with the stored weights copied into the
    /// backbone and the new head initialized from `seed`.
    pub fn transfer_model(&self, keep_layers: Option<usize>, head_units: &[usize], seed: u64) -> Result<Model<f32>, NnError> {
        let n = keep_layers.unwrap_or(self.config.layers.len());
        if n == 0 || n > self.config.layers.len() {
            return Err(NnError::InvalidConfig(format!("cannot keep {n} of {} backbone layers", self.config.layers.len())));
        }
        let trunk = ModelConfig { input: self.config.input, layers: self.config.layers[..n].to_vec() };
        let backbone = self.model()?;
        let mut model = Model::new(build_transfer_model(&trunk, head_units)?, seed)?;
        for (dst, src) in model.params_mut().iter_mut().zip(&backbone.params()[..n]) {
            if let Some(p) = src {
                *dst = Some(p.clone());
            }
        }
        Ok(model)
    }
}

fn corrupt(why: impl Into<String>) -> NnError {
    NnError::Corrupt(why.into())
}

pub fn write_checkpoint<W: Write>(ckpt: &Checkpoint, mut out: W) -> Result<(), NnError> {
    let mut arrays: Vec<(&str, &[usize], &[f32])> =
        ckpt.weights.iter().map(|a| (a.name.as_str(), a.shape.as_slice(), a.data.as_slice())).collect();
    let moment_names: Vec<String>;
    if let Some(opt) = &ckpt.optimizer {
        if opt.m.len() != ckpt.weights.len() || opt.v.len() != ckpt.weights.len() {
            return Err(corrupt("optimizer moments do not match the weight arrays"));
        }
        moment_names = ckpt.weights.iter().flat_map(|a| [format!("adam.m.{}", a.name), format!("adam.v.{}", a.name)]).collect();
        for (i, a) in ckpt.weights.iter().enumerate() {
            arrays.push((&moment_names[2 * i], &a.shape, &opt.m[i]));
            arrays.push((&moment_names[2 * i + 1], &a.shape, &opt.v[i]));
        }
    }
    let mut offset = 0u64;
    let mut entries = Vec::with_capacity(arrays.len());
    for (name, shape, data) in &arrays {
        if shape.iter().product::<usize>() != data.len() {
            return Err(corrupt(format!("array {name} has {} values for shape {shape:?}", data.len())));
        }
        entries.push(ArrayEntry { name: name.to_string(), dtype: "f32".into(), shape: shape.to_vec(), offset });
        offset += 4 * data.len() as u64;
    }
    let header = Header { model: ckpt.config.clone(), metadata: ckpt.metadata.clone(), optimizer: ckpt.optimizer.clone(), arrays: entries };
    let json = serde_json::to_vec(&header).map_err(|e| corrupt(e.to_string()))?;
    out.write_all(MAGIC)?;
    out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    out.write_all(&(json.len() as u64).to_le_bytes())?;
    out.write_all(&json)?;
    let mut buf = Vec::with_capacity(offset as usize);
    for (_, _, data) in &arrays {
        for v in data.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<Checkpoint, NnError> {
    if bytes.len() < 20 {
        return Err(corrupt(format!("file of {} bytes is shorter than the fixed header", bytes.len())));
    }
    if &bytes[..8] != MAGIC {
        return Err(corrupt("bad magic bytes"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(NnError::Version { found: version, expected: CHECKPOINT_VERSION });
    }
    let header_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let json = bytes.get(20..20 + header_len).ok_or_else(|| corrupt("header runs past end of file"))?;
    let header: Header = serde_json::from_slice(json).map_err(|e| corrupt(format!("header: {e}")))?;
    let payload = &bytes[20 + header_len..];

    let mut expected_offset = 0u64;
    let mut arrays = Vec::with_capacity(header.arrays.len());
    for e in &header.arrays {
        if e.dtype != "f32" {
            return Err(corrupt(format!("array {} has dtype {}", e.name, e.dtype)));
        }
        if e.offset != expected_offset {
            return Err(corrupt(format!("array {} at offset {}, expected {expected_offset}", e.name, e.offset)));
        }
        let n: usize = e.shape.iter().product();
        let start = e.offset as usize;
        let raw = payload.get(start..start + 4 * n).ok_or_else(|| corrupt(format!("array {} truncated", e.name)))?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        arrays.push(NamedArray { name: e.name.clone(), shape: e.shape.clone(), data });
        expected_offset += 4 * n as u64;
    }
    if payload.len() as u64 != expected_offset {
        return Err(corrupt(format!("{} trailing payload bytes", payload.len() as u64 - expected_offset.min(payload.len() as u64))));
    }

    let (weights, moments): (Vec<NamedArray>, Vec<NamedArray>) = arrays.into_iter().partition(|a| !a.name.starts_with("adam."));
    let optimizer = match header.optimizer {
        None if moments.is_empty() => None,
        None => return Err(corrupt("optimizer arrays without optimizer state")),
        Some(mut opt) => {
            if moments.len() != 2 * weights.len() {
                return Err(corrupt("optimizer moments do not match the weight arrays"));
            }
            for (i, w) in weights.iter().enumerate() {
                let (m, v) = (&moments[2 * i], &moments[2 * i + 1]);
                if m.name != format!("adam.m.{}", w.name) || v.name != format!("adam.v.{}", w.name) {
                    return Err(corrupt(format!("optimizer arrays out of order at {}", w.name)));
                }
            }
            let mut it = moments.into_iter();
            while let (Some(m), Some(v)) = (it.next(), it.next()) {
                opt.m.push(m.data);
                opt.v.push(v.data);
            }
            Some(opt)
        }
    };
    Ok(Checkpoint { config: header.model, weights, optimizer, metadata: header.metadata })
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<(), NnError> {
    let mut buf = Vec::new();
    write_checkpoint(ckpt, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint, NnError> {
    read_checkpoint(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{build_vanilla_cnn_with, Padding};

    fn sample() -> Checkpoint {
        let model = Model::<f32>::new(build_vanilla_cnn_with([16, 16, 3], Padding::Same), 3).unwrap();
        let mut opt = AdamState::new(&model, 1e-4);
        opt.t = 7;
        opt.m[0][3] = 0.25;
        opt.v[1][0] = 1e-9;
        Checkpoint::from_model(&model, Some(&opt), TrainingMetadata { epoch: 4, best_val_loss: Some(0.3125), seed: 11 })
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let ckpt = sample();
        let mut a = Vec::new();
        write_checkpoint(&ckpt, &mut a).unwrap();
        let back = read_checkpoint(&a).unwrap();
        assert_eq!(back, ckpt);
        let mut b = Vec::new();
        write_checkpoint(&back, &mut b).unwrap();
        assert_eq!(a, b);
        assert_eq!(back.model().unwrap().named_params().len(), 10);
    }

    #[test]
    fn transfer_keeps_backbone_weights() {
        let ckpt = sample();
        let model = ckpt.transfer_model(Some(9), &[50, 20], 5).unwrap();
        let backbone = ckpt.model().unwrap();
        assert_eq!(model.params()[0], backbone.params()[0]);
        assert_eq!(model.params()[4], backbone.params()[4]);
        assert!(matches!(model.config().layers[9], crate::nn::LayerSpec::Dense { units: 50, .. }));
        assert!(ckpt.transfer_model(Some(99), &[50], 5).is_err());
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let mut a = Vec::new();
        write_checkpoint(&sample(), &mut a).unwrap();
        for cut in [10, 30, a.len() - 1] {
            assert!(matches!(read_checkpoint(&a[..cut]), Err(NnError::Corrupt(_))), "cut {cut}");
        }
    }

    #[test]
    fn other_version_rejected() {
        let mut a = Vec::new();
        write_checkpoint(&sample(), &mut a).unwrap();
        a[8] = 9;
        assert!(matches!(read_checkpoint(&a), Err(NnError::Version { found: 9, expected: 1 })));
    }

    #[test]
    fn mismatched_config_names_the_array() {
        let ckpt = sample();
        let mut other = ckpt.config.clone();
        if let crate::nn::LayerSpec::Dense { units, .. } = &mut other.layers[9] {
            *units = 31;
        }
        match ckpt.to_model(&other) {
            Err(NnError::ShapeMismatch { name, .. }) => assert_eq!(name, "layer9.weight"),
            r => panic!("unexpected {r:?}"),
        }
    }
}
