use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detect::DetectParams;
use crate::eval::DEFAULT_IOU_THRESHOLD;
use crate::features::{OfParams, SaliencyParams, Variant};
use crate::flow::FlowParams;
use crate::grid::GridSpec;
use crate::zorder::Quantizer;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("bad override `{0}` (expected key=value)")]
    Override(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Quantizer settings. The value range defaults to the natural range of the
/// variant's features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantizerConfig {
    pub bits: u32,
    pub range: Option<[f64; 2]>,
}

impl Default for QuantizerConfig {
    fn default() -> Self {
        Self { bits: 8, range: None }
    }
}

impl QuantizerConfig {
    pub fn build(&self, variant: Variant) -> Result<Quantizer, ConfigError> {
        let q = match self.range {
            Some([lo, hi]) => Quantizer::new(vec![(lo, hi); crate::grid::CELLS], self.bits),
            None => Quantizer::for_variant(variant, self.bits),
        };
        q.map_err(|e| ConfigError::Invalid(format!("quantizer: {e}")))
    }
}

/// Inputs of one scenario. Relative paths resolve against the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioInput {
    pub id: String,
    /// FSEQ file or directory of `frame_%06d.pgm` files.
    pub frames: Option<PathBuf>,
    pub saliency: Option<PathBuf>,
    /// Precomputed flow; used instead of `frames` for the flow variant.
    pub flow: Option<PathBuf>,
}

/// Declarative form of a whole run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub variant: Variant,
    pub output: PathBuf,
    pub annotations: Option<PathBuf>,
    /// Scenarios processed concurrently.
    pub jobs: usize,
    /// Measure throughput. Off gives byte-identical metrics between runs.
    pub timing: bool,
    pub iou_threshold: f64,
    pub flow: FlowParams,
    pub of: OfParams,
    pub saliency: SaliencyParams,
    pub grid: GridSpec,
    pub quantizer: QuantizerConfig,
    pub detect: DetectParams,
    #[serde(rename = "scenario")]
    pub scenarios: Vec<ScenarioInput>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Of,
            output: PathBuf::from("out"),
            annotations: None,
            jobs: 1,
            timing: true,
            iou_threshold: DEFAULT_IOU_THRESHOLD,
            flow: FlowParams::default(),
            of: OfParams::default(),
            saliency: SaliencyParams::default(),
            grid: GridSpec::default(),
            quantizer: QuantizerConfig::default(),
            detect: DetectParams::default(),
            scenarios: Vec::new(),
        }
    }
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id != "."
        && id != ".."
        && id.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c))
}

impl PipelineConfig {
    /// Parses TOML text, applies `key=value` overrides and resolves relative
    /// paths against `base`.
    pub fn from_toml(text: &str, overrides: &[String], base: &Path) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut cfg: PipelineConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::from_toml(&text, overrides, base)
    }

    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.output);
        if let Some(a) = &mut self.annotations {
            join(a);
        }
        for s in &mut self.scenarios {
            for p in [&mut s.frames, &mut s.saliency, &mut s.flow].into_iter().flatten() {
                join(p);
            }
        }
    }

    /// Checks parameters and that every scenario has the input its variant
    /// needs, before any processing starts.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.flow.validate().map_err(|e| invalid(&e))?;
        self.of.validate().map_err(|e| invalid(&e))?;
        self.saliency.validate().map_err(|e| invalid(&e))?;
        self.detect.validate().map_err(|e| invalid(&e))?;
        self.quantizer.build(self.variant)?;
        crate::grid::make_grid(1000, 1000, &self.grid).map_err(|e| invalid(&e))?;
        if self.jobs < 1 {
            return Err(ConfigError::Invalid("jobs must be >= 1".into()));
        }
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return Err(ConfigError::Invalid(format!(
                "iou_threshold {} not in (0, 1]",
                self.iou_threshold
            )));
        }
        let mut seen = BTreeSet::new();
        for s in &self.scenarios {
            if !valid_id(&s.id) {
                return Err(ConfigError::Invalid(format!(
                    "scenario id `{}` may only use letters, digits, `_`, `-` and `.`",
                    s.id
                )));
            }
            if !seen.insert(&s.id) {
                return Err(ConfigError::Invalid(format!("scenario `{}` listed twice", s.id)));
            }
            let ok = match self.variant {
                Variant::Of => s.frames.is_some() || s.flow.is_some(),
                Variant::Cnn => s.saliency.is_some(),
            };
            if !ok {
                let need = match self.variant {
                    Variant::Of => "`frames` or `flow`",
                    Variant::Cnn => "`saliency`",
                };
                return Err(ConfigError::Invalid(format!(
                    "scenario `{}` needs {need} for the {} variant",
                    s.id, self.variant
                )));
            }
        }
        Ok(())
    }
}

/// Sets a dotted key such as `flow.levels=4`. The value is read as a TOML
/// value and falls back to a plain string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), ConfigError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| ConfigError::Override(assignment.to_string()))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::Override(assignment.to_string()));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let (last, parents) = path.split_last().expect("split yields at least one part");
    let mut node = table;
    for p in parents {
        let entry = node
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::Override(format!("{assignment}: `{p}` is not a section")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}
