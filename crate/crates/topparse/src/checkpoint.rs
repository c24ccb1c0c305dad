//! Single-file model checkpoints: configuration, vocabularies and every
//! parameter tensor. Values are stored as the hex of their little-endian
//! bytes, so a checkpoint reloads bit-exactly and identical models always
//! serialize to identical files.

use std::path::Path;

use serde::{Deserialize, Serialize};
use topparse_core::dataset::Vocabs;
use topparse_core::neural::Tensor;
use topparse_core::rnng::{Model, RnngConfig};

use crate::error::CliError;
use crate::io::{read_text, write_text};

pub const FORMAT: &str = "topparse-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredParam {
    pub name: String,
    pub shape: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub frozen_rows: Vec<usize>,
    pub data: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: RnngConfig,
    pub vocabs: Vocabs,
    #[serde(default)]
    pub run_config: serde_json::Value,
    pub params: Vec<StoredParam>,
}

impl Checkpoint {
    pub fn from_model(model: &Model<f32>, run_config: serde_json::Value) -> Checkpoint {
        let params = model
            .store
            .params()
            .iter()
            .map(|p| StoredParam {
                name: p.name.clone(),
                shape: p.value.shape.clone(),
                frozen_rows: p.frozen_rows.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i).collect(),
                data: hex::encode(p.value.data.iter().flat_map(|x| x.to_le_bytes()).collect::<Vec<u8>>()),
            })
            .collect();
        Checkpoint {
            format: FORMAT.to_string(),
            version: VERSION,
            config: model.config.clone(),
            vocabs: model.vocabs().clone(),
            run_config,
            params,
        }
    }

    pub fn into_model(self) -> Result<Model<f32>, CliError> {
        if self.format != FORMAT || self.version != VERSION {
            return Err(CliError::Failed(format!(
                "unsupported checkpoint {} v{} (expected {FORMAT} v{VERSION})",
                self.format, self.version
            )));
        }
        let mut params = Vec::with_capacity(self.params.len());
        for p in self.params {
            let bytes = hex::decode(&p.data).map_err(|e| CliError::Failed(format!("parameter {}: {e}", p.name)))?;
            if bytes.len() % 4 != 0 {
                return Err(CliError::Failed(format!("parameter {}: truncated data", p.name)));
            }
            let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
            let tensor = Tensor::from_vec(&p.shape, data).map_err(CliError::failed)?;
            let mut frozen = Vec::new();
            if !p.frozen_rows.is_empty() {
                frozen = vec![false; tensor.rows()];
                for &r in &p.frozen_rows {
                    *frozen.get_mut(r).ok_or_else(|| CliError::Failed(format!("parameter {}: bad frozen row", p.name)))? =
                        true;
                }
            }
            params.push((p.name, tensor, frozen));
        }
        Model::from_parts(self.config, self.vocabs, params).map_err(CliError::failed)
    }
}

pub fn save(model: &Model<f32>, run_config: serde_json::Value, path: &Path) -> Result<(), CliError> {
    let ckpt = Checkpoint::from_model(model, run_config);
    let text = serde_json::to_string(&ckpt).map_err(CliError::failed)?;
    write_text(path, &text)
}

pub fn load(path: &Path) -> Result<Model<f32>, CliError> {
    let text = read_text(path)?;
    let ckpt: Checkpoint =
        serde_json::from_str(&text).map_err(|e| CliError::Failed(format!("{}: not a checkpoint: {e}", path.display())))?;
    ckpt.into_model()
}
