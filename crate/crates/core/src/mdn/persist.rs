use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::MdnConfig;
use super::model::{layout, MdnModel, N_HEADS};
use crate::error::{Error, Result};

/// Version tag written into every model file.
pub const MODEL_FORMAT_VERSION: u32 = 1;
const FORMAT: &str = "bubblecast-mdn";
const HEAD_NAMES: [&str; N_HEADS] = ["pi", "mu", "sigma", "xi", "nu"];

#[derive(Serialize, Deserialize)]
struct LayerFile {
    name: String,
    rows: usize,
    cols: usize,
    /// Row-major `rows × cols`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    config: MdnConfig,
    input_center: Vec<f64>,
    input_scale: Vec<f64>,
    target_center: f64,
    target_scale: f64,
    layers: Vec<LayerFile>,
}

impl MdnModel {
    pub fn to_json(&self) -> Result<String> {
        let names = (0..self.hidden.len()).map(|i| format!("hidden{i}")).chain(HEAD_NAMES.iter().map(|h| format!("head_{h}")));
        let layers = self
            .hidden
            .iter()
            .chain(&self.heads)
            .zip(names)
            .map(|(l, name)| LayerFile {
                name,
                rows: l.rows,
                cols: l.cols,
                weights: self.params[l.w..l.w + l.rows * l.cols].to_vec(),
                bias: self.params[l.b..l.b + l.rows].to_vec(),
            })
            .collect();
        let file = ModelFile {
            format: FORMAT.into(),
            version: MODEL_FORMAT_VERSION,
            config: self.config.clone(),
            input_center: self.input_center.clone(),
            input_scale: self.input_scale.clone(),
            target_center: self.target_center,
            target_scale: self.target_scale,
            layers,
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(text)?;
        if f.format != FORMAT || f.version != MODEL_FORMAT_VERSION {
            return Err(Error::input(format!("unsupported model file {} v{}", f.format, f.version)));
        }
        let mut m = MdnModel::init(f.config, f.input_center, f.input_scale, f.target_center, f.target_scale)?;
        let (hidden, heads, _) = layout(&m.config);
        if f.layers.len() != hidden.len() + heads.len() {
            return Err(Error::input("model file has the wrong number of layers"));
        }
        for (l, lf) in hidden.iter().chain(&heads).zip(&f.layers) {
            if lf.rows != l.rows || lf.cols != l.cols || lf.weights.len() != l.rows * l.cols || lf.bias.len() != l.rows {
                return Err(Error::input(format!("layer {} has shape {}x{}, expected {}x{}", lf.name, lf.rows, lf.cols, l.rows, l.cols)));
            }
            m.params[l.w..l.w + l.rows * l.cols].copy_from_slice(&lf.weights);
            m.params[l.b..l.b + l.rows].copy_from_slice(&lf.bias);
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
