//! Subcommand surface and implementations.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use ngcf_core::dataset::{k_core_filter, split, InputFormat};
use ngcf_core::eval::{evaluate_all, EvalConfig, EvalReport};
use ngcf_core::graph::laplacian_for;
use ngcf_core::model::{forward_eval, ModelConfig, Propagation, Variant};
use ngcf_core::training::{grad_check, TrainConfig, Trainer};
use ngcf_core::{Error, Result};

use crate::checkpoint;
use crate::config::{ConfigOverrides, RunConfig};
use crate::dataio;
use crate::report::{self, CurveWriter};

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const CONFIG_ECHO_FILE: &str = "config.json";

#[derive(Parser, Debug)]
#[command(
    name = "ngcf",
    version,
    about = "Graph-based collaborative filtering: prepare data, train, evaluate, export"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Filter, split, and index a raw interaction file.
    Prepare(PrepareArgs),
    /// Train a model and write checkpoint, curve, and report files.
    Train(TrainArgs),
    /// Rank and score a prepared dataset with a saved checkpoint.
    Evaluate(EvaluateArgs),
    /// Compare analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
    /// Dump final user and item representations as TSV.
    #[command(name = "export-embeddings")]
    ExportEmbeddings(ExportArgs),
    /// Merge the learning curves of several runs into one CSV.
    Curves(CurvesArgs),
}

impl Command {
    pub fn run(&self) -> Result<()> {
        match self {
            Command::Prepare(a) => cmd_prepare(a),
            Command::Train(a) => cmd_train(a),
            Command::Evaluate(a) => cmd_evaluate(a),
            Command::Gradcheck(a) => cmd_gradcheck(a),
            Command::ExportEmbeddings(a) => cmd_export_embeddings(a),
            Command::Curves(a) => cmd_curves(a),
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum FileFormat {
    /// One `user<TAB>item` pair per line.
    EdgeList,
    /// One `user item1 item2 ...` line per user.
    Grouped,
}

impl From<FileFormat> for InputFormat {
    fn from(f: FileFormat) -> InputFormat {
        match f {
            FileFormat::EdgeList => InputFormat::EdgeList,
            FileFormat::Grouped => InputFormat::Grouped,
        }
    }
}

#[derive(clap::Args, Debug)]
pub struct PrepareArgs {
    /// Raw interaction file.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = FileFormat::EdgeList)]
    pub format: FileFormat,
    /// Iteratively drop users/items with fewer interactions than this.
    #[arg(long = "k-core", default_value_t = 10)]
    pub k_core: usize,
    /// Fraction of each user's interactions kept for training.
    #[arg(long, default_value_t = 0.8)]
    pub train_frac: f64,
    /// Fraction of the training pool held out for validation.
    #[arg(long, default_value_t = 0.1)]
    pub val_frac: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(clap::Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub overrides: ConfigOverrides,
}

#[derive(clap::Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Prepared dataset directory the checkpoint was trained on.
    #[arg(long)]
    pub data_dir: PathBuf,
    /// Report cutoffs, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "20")]
    pub k: Vec<usize>,
    /// Where to write report files (default: the checkpoint's directory).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Let validation items compete as ranking candidates.
    #[arg(long)]
    pub rank_validation_items: bool,
}

#[derive(clap::Args, Debug)]
pub struct GradcheckArgs {
    /// Model family: ngcf, svdpp, gcmc, pinsage, or mf.
    #[arg(long, default_value = "ngcf")]
    pub variant: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub embed_dim: usize,
    /// Layer widths; defaults to three layers of embed-dim (variant permitting).
    #[arg(long, value_delimiter = ',')]
    pub layers: Option<Vec<usize>>,
    /// L2 regularization strength included in the checked objective.
    #[arg(long = "l2", default_value_t = 1e-5)]
    pub l2: f64,
    /// L2 target: all-params or batch-embeddings.
    #[arg(long, default_value = "all-params")]
    pub reg_mode: String,
}

#[derive(clap::Args, Debug)]
pub struct ExportArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Prepared dataset directory the checkpoint was trained on.
    #[arg(long)]
    pub data_dir: PathBuf,
    /// Output TSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(clap::Args, Debug)]
pub struct CurvesArgs {
    /// Run directories containing curve.csv.
    #[arg(required = true)]
    pub run_dirs: Vec<PathBuf>,
    /// Merged CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn cmd_prepare(args: &PrepareArgs) -> Result<()> {
    let raw = dataio::read_raw(&args.input, args.format.into())?;
    let filtered = k_core_filter(&raw, args.k_core)?;
    if filtered.pairs.is_empty() {
        return Err(Error::Data(format!(
            "no interactions survive the {}-core filter",
            args.k_core
        )));
    }
    let ds = split(&filtered, args.train_frac, args.val_frac, args.seed)?;
    dataio::write_split(&ds, &args.out_dir)?;
    let (n_train, n_valid, n_test) = ds.counts();
    println!(
        "prepared {}: {} users, {} items, {n_train} train / {n_valid} valid / {n_test} test",
        args.out_dir.display(),
        ds.n_users,
        ds.n_items,
    );
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::Data(format!("cannot create {}: {e}", dir.display())))
}

/// Overwrites the trainer's base embeddings with a checkpoint's, keeping
/// the fresh layer weights and optimizer state.
fn warm_start(trainer: &mut Trainer<f32>, path: &Path) -> Result<()> {
    let (header, params) = checkpoint::load(path)?;
    let dst = &mut trainer.params.e0;
    if (params.e0.n_rows(), params.e0.n_cols()) != (dst.n_rows(), dst.n_cols()) {
        return Err(Error::Config(format!(
            "warm-start embeddings are {}x{} but this model needs {}x{}",
            params.e0.n_rows(),
            params.e0.n_cols(),
            dst.n_rows(),
            dst.n_cols()
        )));
    }
    dst.data_mut().copy_from_slice(params.e0.data());
    if header.variant != Variant::Mf.as_str() {
        eprintln!(
            "warning: warm-start checkpoint is a '{}' model; only its base embeddings are used",
            header.variant
        );
    }
    Ok(())
}

fn print_report_summary(report: &EvalReport) {
    println!("test metrics over {} users:", report.n_users_evaluated);
    for (ki, &k) in report.k_values.iter().enumerate() {
        println!("  recall@{k} {:.6}  ndcg@{k} {:.6}", report.recall[ki], report.ndcg[ki]);
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let cfg = RunConfig::resolve(&args.overrides)?;
    cfg.validate_for_training()?;
    let model_cfg = cfg.model_config()?;
    let train_cfg = cfg.train_config()?;
    let eval_cfg = cfg.eval_config()?;

    let ds = dataio::load_prepared(Path::new(&cfg.data_dir))?;
    let lap = laplacian_for(&ds)?;
    let mut trainer =
        Trainer::<f32>::new(model_cfg, train_cfg.clone(), &lap, ds.n_users, ds.n_items)?;
    if let Some(w) = &cfg.warm_start {
        warm_start(&mut trainer, Path::new(w))?;
    }

    let out_dir = PathBuf::from(&cfg.out_dir);
    create_dir(&out_dir)?;
    let mut echo = serde_json::to_string_pretty(&cfg)
        .map_err(|e| Error::Data(format!("cannot encode config: {e}")))?;
    echo.push('\n');
    let echo_path = out_dir.join(CONFIG_ECHO_FILE);
    std::fs::write(&echo_path, echo)
        .map_err(|e| Error::Data(format!("cannot write {}: {e}", echo_path.display())))?;

    let mut curve = CurveWriter::create(&out_dir, cfg.deterministic)?;
    let mut curve_err: Option<Error> = None;
    let fit = trainer.fit(&ds, |record| {
        if curve_err.is_none() {
            if let Err(e) = curve.append(record) {
                curve_err = Some(e);
            }
        }
        println!(
            "epoch {:>4}  loss {:<12.6}  val recall@{} {:.6}",
            record.epoch, record.train_loss, train_cfg.early_stop_k, record.val_recall
        );
    })?;
    if let Some(e) = curve_err {
        return Err(e);
    }
    curve.finish()?;

    let ckpt_path = out_dir.join(CHECKPOINT_FILE);
    checkpoint::save(
        &ckpt_path,
        &trainer.model_cfg,
        &trainer.params,
        ds.n_users,
        ds.n_items,
        fit.best_epoch,
        fit.best_val_recall,
        train_cfg.seed,
    )?;

    let report = evaluate_all(&trainer.params, &trainer.model_cfg, &trainer.prop, &ds, &eval_cfg)?;
    report::write_report(&report, &out_dir)?;
    print_report_summary(&report);
    println!(
        "best epoch {} (val recall@{} {:.6}); artifacts in {}",
        fit.best_epoch,
        train_cfg.early_stop_k,
        fit.best_val_recall,
        out_dir.display()
    );
    Ok(())
}

fn checked_load(
    checkpoint_path: &Path,
    data_dir: &Path,
) -> Result<(checkpoint::CheckpointHeader, ModelConfig, ngcf_core::model::ModelParams<f32>, ngcf_core::dataset::InteractionDataset)>
{
    let (header, params) = checkpoint::load(checkpoint_path)?;
    let model_cfg = header.model_config()?;
    let ds = dataio::load_prepared(data_dir)?;
    if ds.n_users != header.n_users || ds.n_items != header.n_items {
        return Err(Error::Data(format!(
            "dataset has {} users / {} items but the checkpoint was trained on {} / {}",
            ds.n_users, ds.n_items, header.n_users, header.n_items
        )));
    }
    Ok((header, model_cfg, params, ds))
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let (_, model_cfg, params, ds) = checked_load(&args.checkpoint, &args.data_dir)?;
    let lap = laplacian_for(&ds)?;
    let prop = Propagation::build(&model_cfg, &lap, ds.n_users)?;
    let eval_cfg = EvalConfig {
        k_values: args.k.clone(),
        exclude_validation: !args.rank_validation_items,
    };
    let report = evaluate_all(&params, &model_cfg, &prop, &ds, &eval_cfg)?;
    let out_dir = match &args.out_dir {
        Some(dir) => dir.clone(),
        None => args
            .checkpoint
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    report::write_report(&report, &out_dir)?;
    print_report_summary(&report);
    println!("report written to {}", out_dir.display());
    Ok(())
}

pub fn cmd_gradcheck(args: &GradcheckArgs) -> Result<()> {
    let variant: Variant = args.variant.parse()?;
    let layer_dims = match &args.layers {
        Some(layers) => layers.clone(),
        None => match variant {
            Variant::Mf => Vec::new(),
            Variant::Svdpp => vec![args.embed_dim],
            _ => vec![args.embed_dim; 3],
        },
    };
    let model_cfg = ModelConfig {
        variant,
        embed_dim: args.embed_dim,
        layer_dims,
        ..ModelConfig::default()
    };
    let train_cfg = TrainConfig {
        l2_lambda: args.l2,
        reg_mode: args.reg_mode.parse()?,
        ..TrainConfig::default()
    };
    let report = grad_check(&model_cfg, &train_cfg, args.seed)?;
    println!(
        "gradcheck variant={variant} seed={}: max relative error {:.3e} over {} entries (worst: {}) -> {}",
        args.seed,
        report.max_rel_err,
        report.n_checked,
        report.worst_tensor,
        if report.passed { "PASS" } else { "FAIL" }
    );
    if report.passed {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "gradient check failed: max relative error {:.3e}",
            report.max_rel_err
        )))
    }
}

pub fn cmd_export_embeddings(args: &ExportArgs) -> Result<()> {
    let (_, model_cfg, params, ds) = checked_load(&args.checkpoint, &args.data_dir)?;
    let lap = laplacian_for(&ds)?;
    let prop = Propagation::build(&model_cfg, &lap, ds.n_users)?;
    let trace = forward_eval(&params, &model_cfg, &prop)?;
    let estar = &trace.estar;

    let users = dataio::names_by_index(&ds.user_map, ds.n_users);
    let items = dataio::names_by_index(&ds.item_map, ds.n_items);
    let mut out = String::new();
    let mut push_row = |kind: &str, name: &str, row: &[f32]| {
        let _ = write!(out, "{kind}:{name}");
        for v in row {
            let _ = write!(out, "\t{v}");
        }
        out.push('\n');
    };
    for (u, name) in users.iter().enumerate() {
        push_row("user", name, estar.row(u));
    }
    for (i, name) in items.iter().enumerate() {
        push_row("item", name, estar.row(ds.n_users + i));
    }
    std::fs::write(&args.out, out)
        .map_err(|e| Error::Data(format!("cannot write {}: {e}", args.out.display())))?;
    println!(
        "wrote {} rows of dimension {} to {}",
        estar.n_rows(),
        estar.n_cols(),
        args.out.display()
    );
    Ok(())
}

pub fn cmd_curves(args: &CurvesArgs) -> Result<()> {
    report::merge_curves(&args.run_dirs, &args.out)?;
    println!("merged {} runs into {}", args.run_dirs.len(), args.out.display());
    Ok(())
}
