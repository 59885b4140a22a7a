//! Run configuration: JSON file, command-line overrides, and conversion
//! into the library's config types. Precedence is flags > file > defaults.

use std::path::{Path, PathBuf};

use ngcf_core::model::{ModelConfig, Variant};
use ngcf_core::training::TrainConfig;
use ngcf_core::eval::EvalConfig;
use ngcf_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Directory produced by `prepare` (train.txt, valid.txt, test.txt).
    pub data_dir: String,
    /// Where checkpoints, curves, and reports are written.
    pub out_dir: String,
    pub variant: String,
    pub embed_dim: usize,
    /// Propagation layer widths. Omit for the variant's default: three
    /// embed-dim layers, one for svdpp, none for mf.
    pub layer_dims: Option<Vec<usize>>,
    pub leaky_slope: f64,
    pub message_dropout: f64,
    pub node_dropout: f64,
    pub include_layer0: bool,
    pub svdpp_user_coeff: String,
    pub svdpp_item_coeff: String,
    pub lr: f64,
    pub l2_lambda: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub reg_mode: String,
    /// Evaluate the test split every epoch for the learning curve.
    pub track_test: bool,
    /// Cutoff for the early-stopping validation metric.
    pub early_stop_k: usize,
    /// Cutoffs for the final report.
    pub k_values: Vec<usize>,
    /// Keep validation items out of the ranking candidates at test time.
    pub exclude_validation: bool,
    /// Zero the wall-clock column in curve files so reruns are
    /// byte-identical.
    pub deterministic: bool,
    /// Checkpoint whose embeddings initialize this run.
    pub warm_start: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let m = ModelConfig::default();
        let t = TrainConfig::default();
        let e = EvalConfig::default();
        RunConfig {
            data_dir: String::new(),
            out_dir: String::new(),
            variant: m.variant.to_string(),
            embed_dim: m.embed_dim,
            layer_dims: None,
            leaky_slope: m.leaky_slope,
            message_dropout: m.message_dropout,
            node_dropout: m.node_dropout,
            include_layer0: m.include_layer0,
            svdpp_user_coeff: m.svdpp_user_coeff.to_string(),
            svdpp_item_coeff: m.svdpp_item_coeff.to_string(),
            lr: t.lr,
            l2_lambda: t.l2_lambda,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
            adam_beta1: t.adam_beta1,
            adam_beta2: t.adam_beta2,
            adam_eps: t.adam_eps,
            seed: t.seed,
            reg_mode: t.reg_mode.to_string(),
            track_test: t.track_test,
            early_stop_k: t.early_stop_k,
            k_values: e.k_values,
            exclude_validation: e.exclude_validation,
            deterministic: false,
            warm_start: None,
        }
    }
}

/// Flags shared by commands that accept a run configuration. Every field
/// shadows a `RunConfig` field; unset flags leave the file value alone.
#[derive(clap::Args, Debug, Clone, Default)]
pub struct ConfigOverrides {
    /// JSON run configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Prepared dataset directory.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Output directory for run artifacts.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Model family: ngcf, svdpp, gcmc, pinsage, or mf.
    #[arg(long)]
    pub variant: Option<String>,
    /// Propagation layer widths, comma separated (e.g. 64,64,64).
    #[arg(long, value_delimiter = ',')]
    pub layers: Option<Vec<usize>>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// L2 regularization strength.
    #[arg(long = "l2")]
    pub l2: Option<f64>,
    /// Message dropout rate in [0, 1).
    #[arg(long = "msg-dropout")]
    pub msg_dropout: Option<f64>,
    /// Node dropout rate in [0, 1).
    #[arg(long = "node-dropout")]
    pub node_dropout: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long = "epochs")]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// L2 target: all-params or batch-embeddings.
    #[arg(long)]
    pub reg_mode: Option<String>,
    /// Report cutoffs, comma separated (e.g. 20,40,60).
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    /// Record test metrics every epoch (slower).
    #[arg(long)]
    pub track_test: bool,
    /// Zero wall-clock fields so output files are byte-reproducible.
    #[arg(long)]
    pub deterministic: bool,
    /// Let validation items compete as ranking candidates at test time.
    #[arg(long)]
    pub rank_validation_items: bool,
    /// Checkpoint whose embeddings warm-start this run.
    #[arg(long)]
    pub warm_start: Option<PathBuf>,
}

fn path_string(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

impl RunConfig {
    /// Reads the JSON file if given, otherwise starts from defaults, then
    /// applies flag overrides.
    pub fn resolve(overrides: &ConfigOverrides) -> Result<RunConfig> {
        let mut cfg = match &overrides.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    Error::Config(format!("cannot read config {}: {e}", path.display()))
                })?;
                serde_json::from_str::<RunConfig>(&text).map_err(|e| {
                    Error::Config(format!("invalid config {}: {e}", path.display()))
                })?
            }
            None => RunConfig::default(),
        };
        cfg.apply(overrides);
        Ok(cfg)
    }

    fn apply(&mut self, o: &ConfigOverrides) {
        if let Some(v) = &o.data_dir {
            self.data_dir = path_string(v);
        }
        if let Some(v) = &o.out_dir {
            self.out_dir = path_string(v);
        }
        if let Some(v) = &o.variant {
            self.variant = v.clone();
        }
        if let Some(v) = &o.layers {
            self.layer_dims = Some(v.clone());
        }
        if let Some(v) = o.embed_dim {
            self.embed_dim = v;
        }
        if let Some(v) = o.lr {
            self.lr = v;
        }
        if let Some(v) = o.l2 {
            self.l2_lambda = v;
        }
        if let Some(v) = o.msg_dropout {
            self.message_dropout = v;
        }
        if let Some(v) = o.node_dropout {
            self.node_dropout = v;
        }
        if let Some(v) = o.batch_size {
            self.batch_size = v;
        }
        if let Some(v) = o.max_epochs {
            self.max_epochs = v;
        }
        if let Some(v) = o.patience {
            self.patience = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = &o.reg_mode {
            self.reg_mode = v.clone();
        }
        if let Some(v) = &o.k {
            self.k_values = v.clone();
        }
        if o.track_test {
            self.track_test = true;
        }
        if o.deterministic {
            self.deterministic = true;
        }
        if o.rank_validation_items {
            self.exclude_validation = false;
        }
        if let Some(v) = &o.warm_start {
            self.warm_start = Some(path_string(v));
        }
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        let variant: Variant = self.variant.parse()?;
        let layer_dims = match &self.layer_dims {
            Some(dims) => dims.clone(),
            None => match variant {
                Variant::Mf => Vec::new(),
                Variant::Svdpp => vec![self.embed_dim],
                _ => vec![self.embed_dim; 3],
            },
        };
        let cfg = ModelConfig {
            variant,
            embed_dim: self.embed_dim,
            layer_dims,
            leaky_slope: self.leaky_slope,
            message_dropout: self.message_dropout,
            node_dropout: self.node_dropout,
            include_layer0: self.include_layer0,
            svdpp_user_coeff: self.svdpp_user_coeff.parse()?,
            svdpp_item_coeff: self.svdpp_item_coeff.parse()?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let cfg = TrainConfig {
            lr: self.lr,
            l2_lambda: self.l2_lambda,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            adam_beta1: self.adam_beta1,
            adam_beta2: self.adam_beta2,
            adam_eps: self.adam_eps,
            seed: self.seed,
            reg_mode: self.reg_mode.parse()?,
            track_test: self.track_test,
            early_stop_k: self.early_stop_k,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn eval_config(&self) -> Result<EvalConfig> {
        let cfg = EvalConfig {
            k_values: self.k_values.clone(),
            exclude_validation: self.exclude_validation,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks the fields a training run needs before any work starts.
    pub fn validate_for_training(&self) -> Result<()> {
        if self.data_dir.is_empty() {
            return Err(Error::Config("data_dir is required (--data-dir or config file)".into()));
        }
        if self.out_dir.is_empty() {
            return Err(Error::Config("out_dir is required (--out-dir or config file)".into()));
        }
        if !Path::new(&self.data_dir).is_dir() {
            return Err(Error::Config(format!("data_dir {} does not exist", self.data_dir)));
        }
        if let Some(w) = &self.warm_start {
            if !Path::new(w).is_file() {
                return Err(Error::Config(format!("warm-start checkpoint {w} does not exist")));
            }
        }
        self.model_config()?;
        self.train_config()?;
        self.eval_config()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ngcf_core::model::Variant;
    use ngcf_core::training::RegMode;

    #[test]
    fn defaults_mirror_library_defaults() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.model_config().unwrap(), ModelConfig::default());
        assert_eq!(cfg.train_config().unwrap(), TrainConfig::default());
        assert_eq!(cfg.eval_config().unwrap(), EvalConfig::default());
    }

    #[test]
    fn flags_override_file_values() {
        let mut file = RunConfig::default();
        file.lr = 0.5;
        file.variant = "gcmc".into();
        let json = serde_json::to_string(&file).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, json).unwrap();

        let overrides = ConfigOverrides {
            config: Some(path),
            lr: Some(0.25),
            layers: Some(vec![8, 8]),
            embed_dim: Some(8),
            rank_validation_items: true,
            ..ConfigOverrides::default()
        };
        let cfg = RunConfig::resolve(&overrides).unwrap();
        assert_eq!(cfg.lr, 0.25);
        assert_eq!(cfg.model_config().unwrap().variant, Variant::Gcmc);
        assert_eq!(cfg.layer_dims, Some(vec![8, 8]));
        assert!(!cfg.exclude_validation);
        assert_eq!(cfg.train_config().unwrap().reg_mode, RegMode::AllParams);
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"learning_rate": 0.1}"#).unwrap();
        let overrides =
            ConfigOverrides { config: Some(path), ..ConfigOverrides::default() };
        assert!(matches!(RunConfig::resolve(&overrides), Err(Error::Config(_))));
    }

    #[test]
    fn omitted_layers_follow_the_variant() {
        for (variant, expect) in [
            ("mf", vec![]),
            ("svdpp", vec![64]),
            ("ngcf", vec![64, 64, 64]),
            ("pinsage", vec![64, 64, 64]),
        ] {
            let mut cfg = RunConfig::default();
            cfg.variant = variant.into();
            assert_eq!(cfg.model_config().unwrap().layer_dims, expect, "{variant}");
        }
    }

    #[test]
    fn explicit_layers_are_honored_verbatim() {
        let mut cfg = RunConfig::default();
        cfg.variant = "mf".into();
        cfg.layer_dims = Some(vec![16]);
        assert!(matches!(cfg.model_config(), Err(Error::Config(_))));
    }

    #[test]
    fn bad_variant_surfaces_as_config_error() {
        let mut cfg = RunConfig::default();
        cfg.variant = "deepfm".into();
        assert!(matches!(cfg.model_config(), Err(Error::Config(_))));
    }
}
