//! Regressors from transition features to maximum trill speed.

mod eval;
mod linear;
mod mlp;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::FeatureScheme;
use crate::fingering::{KeyTable, Transition};
use crate::observations::TrillObservation;

pub use eval::{
    anchor_floor, anchor_groups, detect_anchors, evaluate, evaluate_encoded, metrics, scheme_table, speed_bin,
    stratified_folds, table_to_csv, AnchorFloor, EvalConfig, EvalReport, Fold, Metrics, SPEED_BIN_EDGES,
};
pub use linear::{fit_linear, LinearFit};
pub use mlp::{fit_perceptron, Perceptron, PerceptronConfig, PerceptronFit, Standardizer};

/// Predictions below this are raised to it; slower than any recorded trill.
pub const DEFAULT_CLAMP_FLOOR: f64 = 0.5;

const FORMAT_TAG: &str = "saxdiff-cost-model/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    Linear,
    Perceptron,
}

impl ModelKind {
    pub const ALL: [ModelKind; 2] = [ModelKind::Linear, ModelKind::Perceptron];

    pub fn abbreviation(self) -> &'static str {
        match self {
            ModelKind::Linear => "LM",
            ModelKind::Perceptron => "MLP",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.abbreviation())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<ModelKind> {
        match s.to_ascii_lowercase().as_str() {
            "lm" | "linear" => Ok(ModelKind::Linear),
            "mlp" | "perceptron" => Ok(ModelKind::Perceptron),
            _ => Err(Error::Config(format!("unknown model kind `{s}` (expected LM or MLP)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Parameters {
    Linear { slopes: Vec<f64>, intercept: f64 },
    /// First layer already absorbs the input standardization.
    Perceptron(Perceptron),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub clamp_floor: f64,
    pub perceptron: PerceptronConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            clamp_floor: DEFAULT_CLAMP_FLOOR,
            perceptron: PerceptronConfig::default(),
        }
    }
}

/// Encoded training rows for one scheme.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn encode(observations: &[TrillObservation], scheme: &FeatureScheme, keys: &KeyTable) -> Dataset {
        Dataset {
            x: observations.iter().map(|o| scheme.encode_values(&o.transition, keys)).collect(),
            y: observations.iter().map(|o| o.speed).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: idx.iter().map(|&i| self.x[i].clone()).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
        }
    }

    /// SHA-256 over the exact bits of every row, hex encoded.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for (row, y) in self.x.iter().zip(&self.y) {
            for v in row {
                h.update(v.to_bits().to_le_bytes());
            }
            h.update(y.to_bits().to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostModel {
    pub kind: ModelKind,
    pub scheme: FeatureScheme,
    pub params: Parameters,
    /// Recorded for inspection; predictions do not apply it again.
    pub standardization: Option<Standardizer>,
    pub clamp_floor: f64,
    pub data_checksum: String,
    pub train_mse: f64,
}

fn check_rows(data: &Dataset, scheme: &FeatureScheme) -> Result<()> {
    let p = scheme.len();
    if data.len() < p + 1 {
        return Err(Error::InsufficientData(format!(
            "{} observations for a {}-slot scheme; need at least {}",
            data.len(),
            p,
            p + 1
        )));
    }
    if let Some(bad) = data.x.iter().find(|r| r.len() != p) {
        return Err(Error::Mismatch(format!("feature row has {} values, scheme {} has {p} slots", bad.len(), scheme)));
    }
    Ok(())
}

pub fn train_linear(data: &Dataset, scheme: &FeatureScheme, cfg: &TrainConfig) -> Result<CostModel> {
    check_rows(data, scheme)?;
    let fit = fit_linear(&data.x, &data.y)?;
    let train_mse = data.x.iter().zip(&data.y).map(|(r, y)| (fit.predict(r) - y).powi(2)).sum::<f64>() / data.len() as f64;
    Ok(CostModel {
        kind: ModelKind::Linear,
        scheme: scheme.clone(),
        params: Parameters::Linear {
            slopes: fit.slopes,
            intercept: fit.intercept,
        },
        standardization: None,
        clamp_floor: cfg.clamp_floor,
        data_checksum: data.checksum(),
        train_mse,
    })
}

pub fn train_perceptron(data: &Dataset, scheme: &FeatureScheme, seed: u64, cfg: &TrainConfig) -> Result<CostModel> {
    check_rows(data, scheme)?;
    let fit = fit_perceptron(&data.x, &data.y, seed, &cfg.perceptron)?;
    Ok(CostModel {
        kind: ModelKind::Perceptron,
        scheme: scheme.clone(),
        params: Parameters::Perceptron(fit.network.fold(&fit.standardizer)),
        standardization: Some(fit.standardizer),
        clamp_floor: cfg.clamp_floor,
        data_checksum: data.checksum(),
        train_mse: fit.train_mse,
    })
}

pub fn train(kind: ModelKind, data: &Dataset, scheme: &FeatureScheme, seed: u64, cfg: &TrainConfig) -> Result<CostModel> {
    match kind {
        ModelKind::Linear => train_linear(data, scheme, cfg),
        ModelKind::Perceptron => train_perceptron(data, scheme, seed, cfg),
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    kind: ModelKind,
    scheme: FeatureScheme,
    slot_names: Vec<String>,
    #[serde(default)]
    hidden: usize,
    /// Linear: slopes then intercept. Perceptron: hidden×input weights
    /// (row-major), hidden biases, output weights, output bias.
    parameters: Vec<f64>,
    standardization: Option<Standardizer>,
    clamp_floor: f64,
    data_checksum: String,
    train_mse: f64,
}

impl CostModel {
    /// Unclamped regression output for an encoded row.
    pub fn raw_output(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.scheme.len() {
            return Err(Error::Mismatch(format!(
                "feature vector has {} values, model scheme {} has {}",
                x.len(),
                self.scheme,
                self.scheme.len()
            )));
        }
        Ok(match &self.params {
            Parameters::Linear { slopes, intercept } => intercept + slopes.iter().zip(x).map(|(s, v)| s * v).sum::<f64>(),
            Parameters::Perceptron(net) => net.forward(x),
        })
    }

    pub fn predict_features(&self, x: &[f64]) -> Result<f64> {
        Ok(self.clamp(self.raw_output(x)?))
    }

    pub fn clamp(&self, raw: f64) -> f64 {
        raw.max(self.clamp_floor)
    }

    /// Predicted maximum trill speed for a transition, never below the floor.
    pub fn predict(&self, t: &Transition, keys: &KeyTable) -> f64 {
        let x = self.scheme.encode_values(t, keys);
        self.predict_features(&x).expect("scheme encodes its own slot count")
    }

    pub fn to_json(&self) -> Result<String> {
        let (hidden, parameters) = match &self.params {
            Parameters::Linear { slopes, intercept } => {
                let mut p = slopes.clone();
                p.push(*intercept);
                (0, p)
            }
            Parameters::Perceptron(net) => {
                let mut p = net.hidden_weights.clone();
                p.extend(&net.hidden_bias);
                p.extend(&net.output_weights);
                p.push(net.output_bias);
                (net.hidden, p)
            }
        };
        let file = ModelFile {
            format: FORMAT_TAG.into(),
            kind: self.kind,
            scheme: self.scheme.clone(),
            slot_names: self.scheme.slot_names().to_vec(),
            hidden,
            parameters,
            standardization: self.standardization.clone(),
            clamp_floor: self.clamp_floor,
            data_checksum: self.data_checksum.clone(),
            train_mse: self.train_mse,
        };
        let mut s = serde_json::to_string_pretty(&file)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str, source: &str) -> Result<CostModel> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::load(source, e.to_string()))?;
        if file.format != FORMAT_TAG {
            return Err(Error::load(source, format!("unsupported model format `{}`", file.format)));
        }
        let scheme = file.scheme.rebuild().map_err(|e| Error::load(source, e.to_string()))?;
        if scheme.slot_names() != file.slot_names.as_slice() {
            return Err(Error::load(
                source,
                format!("slot names in file do not match scheme {}", scheme),
            ));
        }
        let p = scheme.len();
        let params = match file.kind {
            ModelKind::Linear => {
                if file.parameters.len() != p + 1 {
                    return Err(Error::load(source, format!("expected {} linear parameters, found {}", p + 1, file.parameters.len())));
                }
                let (slopes, b) = file.parameters.split_at(p);
                Parameters::Linear {
                    slopes: slopes.to_vec(),
                    intercept: b[0],
                }
            }
            ModelKind::Perceptron => {
                let h = file.hidden;
                if h == 0 || file.parameters.len() != Perceptron::param_count(p, h) {
                    return Err(Error::load(
                        source,
                        format!("perceptron parameter count {} does not fit {p} inputs and {h} hidden units", file.parameters.len()),
                    ));
                }
                let (w1, rest) = file.parameters.split_at(h * p);
                let (b1, rest) = rest.split_at(h);
                let (w2, rest) = rest.split_at(h);
                let net = Perceptron {
                    inputs: p,
                    hidden: h,
                    hidden_weights: w1.to_vec(),
                    hidden_bias: b1.to_vec(),
                    output_weights: w2.to_vec(),
                    output_bias: rest[0],
                };
                net.check_shape()?;
                Parameters::Perceptron(net)
            }
        };
        if !file.clamp_floor.is_finite() {
            return Err(Error::load(source, "clamp floor must be finite"));
        }
        Ok(CostModel {
            kind: file.kind,
            scheme,
            params,
            standardization: file.standardization,
            clamp_floor: file.clamp_floor,
            data_checksum: file.data_checksum,
            train_mse: file.train_mse,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<CostModel> {
        let path = path.as_ref();
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| Error::load(&name, e.to_string()))?;
        CostModel::from_json(&text, &name)
    }
}
