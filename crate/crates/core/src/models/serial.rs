//! Trained-model JSON format. Parameter tensors are stored as base64 of the
//! little-endian f64 bytes so a round trip is bit-exact.

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::data::NormalizerStats;
use crate::error::{Error, Result};
use crate::models::{zero_params, ModelSpec, TrainedModel};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    rows: usize,
    cols: usize,
    data: String,
}

#[derive(Serialize, Deserialize)]
struct NormalizerRecord {
    mean: String,
    std: String,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    spec: ModelSpec,
    normalizer: NormalizerRecord,
    tensors: Vec<TensorRecord>,
}

fn encode_f64s(values: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    B64.encode(bytes)
}

fn decode_f64s(encoded: &str, expected: usize) -> Result<Vec<f64>> {
    let bytes = B64
        .decode(encoded)
        .map_err(|e| Error::Config(format!("bad base64 payload: {e}")))?;
    if bytes.len() != expected * 8 {
        return Err(Error::Config(format!(
            "tensor payload holds {} bytes, expected {}",
            bytes.len(),
            expected * 8
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// Serializes a trained model to its JSON document.
pub fn model_to_json(model: &TrainedModel) -> Result<String> {
    let tensors = model
        .params
        .tensors()
        .iter()
        .map(|t| TensorRecord {
            name: t.name.clone(),
            rows: t.rows,
            cols: t.cols,
            data: encode_f64s(t.data),
        })
        .collect();
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        spec: model.spec.clone(),
        normalizer: NormalizerRecord {
            mean: encode_f64s(&model.normalizer.mean),
            std: encode_f64s(&model.normalizer.std),
        },
        tensors,
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

/// Parses a model document, validating the format version and that every
/// tensor matches the shape the spec dictates.
pub fn model_from_json(json: &str) -> Result<TrainedModel> {
    let file: ModelFile = serde_json::from_str(json)?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::Config(format!(
            "model format_version {} is not supported (expected {MODEL_FORMAT_VERSION})",
            file.format_version
        )));
    }
    file.spec.validate()?;
    let mut params = zero_params(&file.spec)?;
    {
        let expected = params.tensors();
        if expected.len() != file.tensors.len() {
            return Err(Error::Config(format!(
                "model file has {} tensors, spec requires {}",
                file.tensors.len(),
                expected.len()
            )));
        }
        for (exp, rec) in expected.iter().zip(&file.tensors) {
            if exp.name != rec.name || exp.rows != rec.rows || exp.cols != rec.cols {
                return Err(Error::Config(format!(
                    "tensor `{}` ({}x{}) does not match expected `{}` ({}x{})",
                    rec.name, rec.rows, rec.cols, exp.name, exp.rows, exp.cols
                )));
            }
        }
    }
    let mut flat = Vec::with_capacity(params.param_count());
    for rec in &file.tensors {
        flat.extend(decode_f64s(&rec.data, rec.rows * rec.cols)?);
    }
    params.unflatten_from(&flat)?;

    let dim = file.spec.input_dim;
    let normalizer = NormalizerStats {
        mean: decode_f64s(&file.normalizer.mean, dim)?,
        std: decode_f64s(&file.normalizer.std, dim)?,
    };
    Ok(TrainedModel {
        spec: file.spec,
        params,
        normalizer,
    })
}
