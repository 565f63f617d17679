use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tract_onnx::prelude::*;
use tract_onnx::tract_hir::infer::Factoid;
use tract_onnx::tract_hir::internal::DimLike;

use super::DeepFeatureProvider;
use crate::error::{Error, Result};
use crate::preprocess::{CenteredRgbTensor, CANONICAL_SIZE};

/// Name the exported graph must give its single input.
pub const INPUT_NAME: &str = "input";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TensorLayout {
    /// 1 × 3 × 224 × 224
    Nchw,
    /// 1 × 224 × 224 × 3
    Nhwc,
}

/// Sidecar written next to the model as `<model file>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnnxMetadata {
    pub layout: TensorLayout,
    #[serde(default)]
    pub width: Option<usize>,
    #[serde(default)]
    pub backbone: Option<String>,
    /// Centering constants the exporter assumed, B, G, R.
    #[serde(default)]
    pub means: Option<[f64; 3]>,
}

impl OnnxMetadata {
    pub fn sidecar_path(model: &Path) -> PathBuf {
        let mut s = model.as_os_str().to_owned();
        s.push(".json");
        PathBuf::from(s)
    }
}

/// Frozen feature-extraction graph executed with tract.
pub struct OnnxBackbone {
    plan: TypedRunnableModel<TypedModel>,
    layout: TensorLayout,
    width: usize,
}

fn provider_err(e: impl std::fmt::Display) -> Error {
    Error::Provider(e.to_string())
}

impl OnnxBackbone {
    pub fn open(path: &Path, width: usize) -> Result<Self> {
        if !path.exists() {
            return Err(Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "model file not found"),
            ));
        }
        let sidecar = OnnxMetadata::sidecar_path(path);
        let metadata: Option<OnnxMetadata> = if sidecar.exists() {
            let text = std::fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
            Some(serde_json::from_str(&text)?)
        } else {
            None
        };

        let model = tract_onnx::onnx()
            .model_for_path(path)
            .map_err(provider_err)?;
        let inputs = model.input_outlets().map_err(provider_err)?;
        if inputs.len() != 1 {
            return Err(Error::Provider(format!(
                "expected one graph input, found {}",
                inputs.len()
            )));
        }
        let input_name = &model.node(inputs[0].node).name;
        if input_name != INPUT_NAME {
            return Err(Error::Provider(format!(
                "graph input is named `{input_name}`, expected `{INPUT_NAME}`"
            )));
        }

        let layout = match metadata.as_ref().map(|m| m.layout) {
            Some(l) => l,
            None => infer_layout(&model)?,
        };
        if let Some(declared) = metadata.as_ref().and_then(|m| m.width) {
            if declared != width {
                return Err(Error::Provider(format!(
                    "metadata declares width {declared}, configuration {width}"
                )));
            }
        }

        let s = CANONICAL_SIZE;
        let shape: [usize; 4] = match layout {
            TensorLayout::Nchw => [1, 3, s, s],
            TensorLayout::Nhwc => [1, s, s, 3],
        };
        let plan = model
            .with_input_fact(0, f32::fact(shape).into())
            .and_then(|m| m.into_optimized())
            .and_then(|m| m.into_runnable())
            .map_err(provider_err)?;

        let backbone = Self {
            plan,
            layout,
            width,
        };
        // Probe once so a shape mismatch surfaces at open time.
        let probe = CenteredRgbTensor {
            width: s,
            height: s,
            data: vec![0.0; s * s * 3],
        };
        backbone.run(&probe)?;
        Ok(backbone)
    }

    pub fn layout(&self) -> TensorLayout {
        self.layout
    }

    fn run(&self, tensor: &CenteredRgbTensor) -> Result<Vec<f64>> {
        let (h, w) = (tensor.height, tensor.width);
        let input: Tensor = match self.layout {
            TensorLayout::Nchw => {
                tract_ndarray::Array4::from_shape_vec((1, 3, h, w), tensor.to_chw())
            }
            TensorLayout::Nhwc => {
                tract_ndarray::Array4::from_shape_vec((1, h, w, 3), tensor.data.clone())
            }
        }
        .map_err(provider_err)?
        .into();
        let outputs = self.plan.run(tvec!(input.into())).map_err(provider_err)?;
        let view = outputs[0].to_array_view::<f32>().map_err(provider_err)?;
        let row: Vec<f64> = view.iter().map(|&v| v as f64).collect();
        if row.len() != self.width {
            return Err(Error::Provider(format!(
                "graph output flattens to {} values, configuration declares {}",
                row.len(),
                self.width
            )));
        }
        Ok(row)
    }
}

fn infer_layout(model: &InferenceModel) -> Result<TensorLayout> {
    let fact = model.input_fact(0).map_err(provider_err)?;
    let dims: Option<Vec<usize>> = fact.shape.concretize().map(|d| {
        d.iter()
            .map(|x| x.to_usize().unwrap_or(0))
            .collect()
    });
    match dims.as_deref() {
        Some([_, 3, _, _]) => Ok(TensorLayout::Nchw),
        Some([_, _, _, 3]) => Ok(TensorLayout::Nhwc),
        _ => Err(Error::Provider(
            "cannot infer input layout; provide a metadata sidecar".into(),
        )),
    }
}

impl DeepFeatureProvider for OnnxBackbone {
    fn width(&self) -> usize {
        self.width
    }

    fn needs_pixels(&self) -> bool {
        true
    }

    fn row(&self, id: &str, tensor: Option<&CenteredRgbTensor>) -> Result<Vec<f64>> {
        let tensor = tensor.ok_or_else(|| {
            Error::Provider(format!("ONNX backend needs the image for sample `{id}`"))
        })?;
        self.run(tensor)
    }
}
