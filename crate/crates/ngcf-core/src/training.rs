//! Pairwise ranking loss, Adam, and the epoch/early-stopping loop.

use alloc::string::String;
use alloc::vec;
#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;

use crate::dataset::{sample_triples, BprTriple, InteractionDataset};
use crate::error::{Error, Result};
use crate::eval::{evaluate_all, EvalConfig};
use crate::graph::NormalizedLaplacian;
use crate::model::{
    backward, forward_with_plan, init_params, predict, DropoutPlan, ModelConfig,
    ModelParams, ParamGrads, Propagation,
};
use crate::numeric::{pairwise_sum, sigmoid, softplus, DenseMatrix, Rng, Scalar};

/// What the L2 penalty covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegMode {
    /// Every parameter tensor, embeddings and layer weights alike.
    AllParams,
    /// Only the final representations of the users and items sampled into
    /// the current batch, averaged over the batch.
    BatchEmbeddings,
}

impl RegMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegMode::AllParams => "all-params",
            RegMode::BatchEmbeddings => "batch-embeddings",
        }
    }
}

impl core::str::FromStr for RegMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all-params" => Ok(RegMode::AllParams),
            "batch-embeddings" => Ok(RegMode::BatchEmbeddings),
            other => Err(Error::Config(alloc::format!("unknown reg mode '{other}'"))),
        }
    }
}

impl core::fmt::Display for RegMode {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Optimization settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub l2_lambda: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Consecutive non-improving validation epochs tolerated before
    /// stopping. Zero stops on the first epoch that fails to improve.
    pub patience: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub reg_mode: RegMode,
    /// Also evaluate the test split every epoch (slower; curves only).
    pub track_test: bool,
    /// Cutoff used for the early-stopping validation metric.
    pub early_stop_k: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-4,
            l2_lambda: 1e-5,
            batch_size: 1024,
            max_epochs: 400,
            patience: 50,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 1,
            reg_mode: RegMode::AllParams,
            track_test: false,
            early_stop_k: 20,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if !(self.l2_lambda.is_finite() && self.l2_lambda >= 0.0) {
            return Err(Error::Config("l2 strength must be non-negative".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max epochs must be at least 1".into()));
        }
        for (name, beta) in [("beta1", self.adam_beta1), ("beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::Config(alloc::format!("adam {name} must be in [0, 1)")));
            }
        }
        if !(self.adam_eps.is_finite() && self.adam_eps > 0.0) {
            return Err(Error::Config("adam epsilon must be positive".into()));
        }
        if self.early_stop_k == 0 {
            return Err(Error::Config("early-stop cutoff must be at least 1".into()));
        }
        Ok(())
    }
}

/// First and second moment estimates, one pair per parameter tensor, in
/// [`ModelParams::tensors`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<DenseMatrix<T>>,
    pub v: Vec<DenseMatrix<T>>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ModelParams<T>) -> Self {
        let zeros: Vec<DenseMatrix<T>> = params
            .tensors()
            .iter()
            .map(|p| DenseMatrix::zeros(p.n_rows(), p.n_cols()))
            .collect();
        AdamState { m: zeros.clone(), v: zeros, t: 0 }
    }
}

/// Mean pairwise ranking loss `softplus(y_neg - y_pos)` over a batch, plus
/// its gradient with respect to each score. The gradients already carry the
/// 1/batch factor; regularization is added separately by the caller.
pub fn bpr_loss<T: Scalar>(y_pos: &[T], y_neg: &[T]) -> Result<(T, Vec<T>, Vec<T>)> {
    if y_pos.len() != y_neg.len() {
        return Err(Error::Config("score slices differ in length".into()));
    }
    if y_pos.is_empty() {
        return Err(Error::Config("scores must not be empty".into()));
    }
    let batch = T::from_f64(y_pos.len() as f64);
    let mut loss = T::zero();
    let mut grad_pos = Vec::with_capacity(y_pos.len());
    let mut grad_neg = Vec::with_capacity(y_pos.len());
    for (idx, (&yp, &yn)) in y_pos.iter().zip(y_neg).enumerate() {
        let x = yp - yn;
        if !x.is_finite() {
            return Err(Error::Diverged { context: "pairwise score", index: idx });
        }
        loss = loss + softplus(-x);
        let g = sigmoid(-x) / batch;
        grad_pos.push(-g);
        grad_neg.push(g);
    }
    Ok((loss / batch, grad_pos, grad_neg))
}

fn squared_norm<T: Scalar>(m: &DenseMatrix<T>) -> T {
    let mut acc = T::zero();
    for &x in m.data() {
        acc = acc + x * x;
    }
    acc
}

/// `lambda * sum of squared entries` over every parameter tensor.
pub fn l2_penalty<T: Scalar>(params: &ModelParams<T>, lambda: f64) -> T {
    let mut acc = T::zero();
    for tensor in params.tensors() {
        acc = acc + squared_norm(tensor);
    }
    T::from_f64(lambda) * acc
}

/// `lambda / batch * sum of squared representation rows` over the sampled
/// triples, counting repeated rows once per occurrence.
pub fn batch_embedding_penalty<T: Scalar>(
    estar: &DenseMatrix<T>,
    n_users: usize,
    triples: &[BprTriple],
    lambda: f64,
) -> T {
    let mut acc = T::zero();
    for t in triples {
        for row in [t.user, n_users + t.pos, n_users + t.neg] {
            for &x in estar.row(row) {
                acc = acc + x * x;
            }
        }
    }
    T::from_f64(lambda / triples.len() as f64) * acc
}

/// One bias-corrected Adam update over all tensors.
pub fn adam_step<T: Scalar>(
    params: &mut ModelParams<T>,
    grads: &ParamGrads<T>,
    state: &mut AdamState<T>,
    cfg: &TrainConfig,
) -> Result<()> {
    state.t += 1;
    let correction1 = 1.0 - cfg.adam_beta1.powi(state.t as i32);
    let correction2 = 1.0 - cfg.adam_beta2.powi(state.t as i32);
    let b1 = T::from_f64(cfg.adam_beta1);
    let b2 = T::from_f64(cfg.adam_beta2);
    let one_minus_b1 = T::from_f64(1.0 - cfg.adam_beta1);
    let one_minus_b2 = T::from_f64(1.0 - cfg.adam_beta2);
    let inv_c1 = T::from_f64(1.0 / correction1);
    let inv_c2 = T::from_f64(1.0 / correction2);
    let lr = T::from_f64(cfg.lr);
    let eps = T::from_f64(cfg.adam_eps);

    let grad_tensors = grads.tensors();
    let mut param_tensors = params.tensors_mut();
    if grad_tensors.len() != param_tensors.len()
        || state.m.len() != param_tensors.len()
    {
        return Err(Error::Config("optimizer state does not match parameters".into()));
    }
    for (ti, theta) in param_tensors.iter_mut().enumerate() {
        let g = grad_tensors[ti];
        if g.n_rows() != theta.n_rows() || g.n_cols() != theta.n_cols() {
            return Err(Error::Shape {
                context: "adam update",
                expected: (theta.n_rows(), theta.n_cols()),
                got: (g.n_rows(), g.n_cols()),
            });
        }
        let m = state.m[ti].data_mut();
        let v = state.v[ti].data_mut();
        let g = g.data();
        for (i, x) in theta.data_mut().iter_mut().enumerate() {
            m[i] = b1 * m[i] + one_minus_b1 * g[i];
            v[i] = b2 * v[i] + one_minus_b2 * g[i] * g[i];
            let m_hat = m[i] * inv_c1;
            let v_hat = v[i] * inv_c2;
            *x = *x - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Routes each score gradient back onto the representation rows it touched:
/// a triple's user row collects the gradients through both its scores, and
/// each item row collects the gradient through its own score.
fn scatter_score_grads<T: Scalar>(
    estar: &DenseMatrix<T>,
    n_users: usize,
    triples: &[BprTriple],
    grad_pos: &[T],
    grad_neg: &[T],
) -> DenseMatrix<T> {
    let d = estar.n_cols();
    let mut grad = DenseMatrix::zeros(estar.n_rows(), d);
    for (idx, t) in triples.iter().enumerate() {
        let (pos_row, neg_row) = (n_users + t.pos, n_users + t.neg);
        let (gp, gn) = (grad_pos[idx], grad_neg[idx]);
        {
            let user_grad = grad.row_mut(t.user);
            let (ep, en) = (estar.row(pos_row), estar.row(neg_row));
            for c in 0..d {
                user_grad[c] = user_grad[c] + gp * ep[c] + gn * en[c];
            }
        }
        let eu = estar.row(t.user);
        {
            let pos_grad = grad.row_mut(pos_row);
            for c in 0..d {
                pos_grad[c] = pos_grad[c] + gp * eu[c];
            }
        }
        let neg_grad = grad.row_mut(neg_row);
        for c in 0..d {
            neg_grad[c] = neg_grad[c] + gn * eu[c];
        }
    }
    grad
}

fn add_batch_embedding_grads<T: Scalar>(
    grad: &mut DenseMatrix<T>,
    estar: &DenseMatrix<T>,
    n_users: usize,
    triples: &[BprTriple],
    lambda: f64,
) {
    let coeff = T::from_f64(2.0 * lambda / triples.len() as f64);
    for t in triples {
        for row in [t.user, n_users + t.pos, n_users + t.neg] {
            let src = estar.row(row);
            let dst = grad.row_mut(row);
            for c in 0..src.len() {
                dst[c] = dst[c] + coeff * src[c];
            }
        }
    }
}

/// Per-epoch training summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub mean_loss: f64,
    pub n_batches: usize,
}

/// One row of the learning curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_recall: f64,
    pub val_ndcg: f64,
    pub test_recall: Option<f64>,
    pub test_ndcg: Option<f64>,
}

/// Outcome of [`Trainer::fit`]. The trainer's parameters are left at the
/// best-validation checkpoint, not the last epoch's.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub best_epoch: usize,
    pub best_val_recall: f64,
    pub epochs_run: usize,
    pub stopped_early: bool,
    pub curve: Vec<EpochRecord>,
}

/// Tracks the best validation value seen so far under strict improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    patience: usize,
    best: f64,
    best_epoch: usize,
    non_improving: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        EarlyStopper { patience, best: f64::NEG_INFINITY, best_epoch: 0, non_improving: 0 }
    }

    /// Records one epoch's value; returns whether it strictly improved.
    pub fn observe(&mut self, epoch: usize, value: f64) -> bool {
        if value > self.best {
            self.best = value;
            self.best_epoch = epoch;
            self.non_improving = 0;
            true
        } else {
            self.non_improving += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.non_improving > self.patience
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

/// Owns the parameters, optimizer state, and sampling stream for one
/// training run.
pub struct Trainer<T: Scalar> {
    pub model_cfg: ModelConfig,
    pub train_cfg: TrainConfig,
    pub prop: Propagation<T>,
    pub params: ModelParams<T>,
    pub adam: AdamState<T>,
    rng: Rng,
}

impl<T: Scalar> Trainer<T> {
    /// Fresh trainer with Xavier-initialized parameters.
    pub fn new(
        model_cfg: ModelConfig,
        train_cfg: TrainConfig,
        laplacian: &NormalizedLaplacian,
        n_users: usize,
        n_items: usize,
    ) -> Result<Self> {
        let root = Rng::new(train_cfg.seed);
        let params = init_params(&model_cfg, n_users, n_items, &mut root.derive(0))?;
        let prop = Propagation::build(&model_cfg, laplacian, n_users)?;
        Self::from_parts(model_cfg, train_cfg, prop, params)
    }

    /// Trainer around existing parameters, e.g. warm-started from a
    /// checkpoint. Optimizer moments start at zero.
    pub fn from_parts(
        model_cfg: ModelConfig,
        train_cfg: TrainConfig,
        prop: Propagation<T>,
        params: ModelParams<T>,
    ) -> Result<Self> {
        model_cfg.validate()?;
        train_cfg.validate()?;
        let adam = AdamState::new(&params);
        let rng = Rng::new(train_cfg.seed).derive(1);
        Ok(Trainer { model_cfg, train_cfg, prop, params, adam, rng })
    }

    /// Runs `ceil(n_train / batch_size)` sampled batches, each with freshly
    /// drawn triples and a freshly drawn dropout plan, and returns the mean
    /// batch objective (ranking term plus regularization).
    pub fn train_epoch(&mut self, ds: &InteractionDataset) -> Result<EpochStats> {
        let n_train = ds.counts().0;
        if n_train == 0 {
            return Err(Error::Data("no training interactions".into()));
        }
        let n_batches = n_train.div_ceil(self.train_cfg.batch_size);
        let mut losses = Vec::with_capacity(n_batches);
        for batch in 0..n_batches {
            let loss = self.train_batch(ds).map_err(|e| match e {
                Error::Diverged { .. } => {
                    Error::Diverged { context: "training batch", index: batch }
                }
                other => other,
            })?;
            losses.push(loss);
        }
        Ok(EpochStats {
            mean_loss: pairwise_sum(&losses) / n_batches as f64,
            n_batches,
        })
    }

    fn train_batch(&mut self, ds: &InteractionDataset) -> Result<f64> {
        let cfg = &self.model_cfg;
        let tcfg = &self.train_cfg;
        let triples = sample_triples(ds, tcfg.batch_size, &mut self.rng);
        let plan = DropoutPlan::sample(&self.prop, cfg, &mut self.rng)?;
        let trace = forward_with_plan(&self.params, cfg, &plan, true)?;
        let estar = &trace.estar;

        let mut y_pos = Vec::with_capacity(triples.len());
        let mut y_neg = Vec::with_capacity(triples.len());
        for t in &triples {
            y_pos.push(predict(estar, ds.n_users, t.user, t.pos));
            y_neg.push(predict(estar, ds.n_users, t.user, t.neg));
        }
        let (mut loss, grad_pos, grad_neg) = bpr_loss(&y_pos, &y_neg)?;

        let mut grad_estar =
            scatter_score_grads(estar, ds.n_users, &triples, &grad_pos, &grad_neg);
        if tcfg.reg_mode == RegMode::BatchEmbeddings && tcfg.l2_lambda > 0.0 {
            loss = loss
                + batch_embedding_penalty(estar, ds.n_users, &triples, tcfg.l2_lambda);
            add_batch_embedding_grads(
                &mut grad_estar,
                estar,
                ds.n_users,
                &triples,
                tcfg.l2_lambda,
            );
        }
        let mut grads = backward(&trace, &plan, cfg, &self.params, &grad_estar)?;
        if tcfg.reg_mode == RegMode::AllParams && tcfg.l2_lambda > 0.0 {
            loss = loss + l2_penalty(&self.params, tcfg.l2_lambda);
            let two_lambda = T::from_f64(2.0 * tcfg.l2_lambda);
            for (g, p) in grads.tensors_mut().iter_mut().zip(self.params.tensors()) {
                g.add_scaled_assign(p, two_lambda)?;
            }
        }
        adam_step(&mut self.params, &grads, &mut self.adam, tcfg)?;
        Ok(loss.to_f64())
    }

    /// Trains until validation recall stops improving or `max_epochs` is
    /// reached, then restores the parameters of the best epoch. `on_epoch`
    /// sees each curve row as it is produced.
    pub fn fit(
        &mut self,
        ds: &InteractionDataset,
        mut on_epoch: impl FnMut(&EpochRecord),
    ) -> Result<FitResult> {
        let val_view = validation_view(ds);
        let val_cfg = EvalConfig {
            k_values: vec![self.train_cfg.early_stop_k],
            exclude_validation: false,
        };
        let test_cfg = EvalConfig {
            k_values: vec![self.train_cfg.early_stop_k],
            exclude_validation: true,
        };
        let mut stopper = EarlyStopper::new(self.train_cfg.patience);
        let mut best_params = self.params.clone();
        let mut best_adam = self.adam.clone();
        let mut curve = Vec::new();
        let mut stopped_early = false;

        for epoch in 1..=self.train_cfg.max_epochs {
            let stats = self.train_epoch(ds)?;
            let val =
                evaluate_all(&self.params, &self.model_cfg, &self.prop, &val_view, &val_cfg)?;
            let (test_recall, test_ndcg) = if self.train_cfg.track_test {
                let test =
                    evaluate_all(&self.params, &self.model_cfg, &self.prop, ds, &test_cfg)?;
                (Some(test.recall[0]), Some(test.ndcg[0]))
            } else {
                (None, None)
            };
            let record = EpochRecord {
                epoch,
                train_loss: stats.mean_loss,
                val_recall: val.recall[0],
                val_ndcg: val.ndcg[0],
                test_recall,
                test_ndcg,
            };
            on_epoch(&record);
            curve.push(record);
            if stopper.observe(epoch, record.val_recall) {
                best_params = self.params.clone();
                best_adam = self.adam.clone();
            }
            if stopper.should_stop() {
                stopped_early = true;
                break;
            }
        }
        self.params = best_params;
        self.adam = best_adam;
        Ok(FitResult {
            best_epoch: stopper.best_epoch(),
            best_val_recall: stopper.best(),
            epochs_run: curve.len(),
            stopped_early,
            curve,
        })
    }
}

/// Dataset view whose test split is the validation split, for computing
/// validation metrics with the shared evaluation path.
fn validation_view(ds: &InteractionDataset) -> InteractionDataset {
    InteractionDataset {
        n_users: ds.n_users,
        n_items: ds.n_items,
        train: ds.train.clone(),
        validation: vec![Vec::new(); ds.n_users],
        test: ds.validation.clone(),
        user_map: ds.user_map.clone(),
        item_map: ds.item_map.clone(),
    }
}

/// Result of [`grad_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_tensor: String,
    pub n_checked: usize,
    pub passed: bool,
}

/// Compares the analytic gradient of the full batch objective (forward,
/// score gather, ranking loss, regularization) against central finite
/// differences on a small random instance in f64. Passes below 1e-4
/// relative error.
pub fn grad_check(
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    seed: u64,
) -> Result<GradCheckReport> {
    model_cfg.validate()?;
    train_cfg.validate()?;
    let root = Rng::new(seed);
    let ds = InteractionDataset::random(7, 9, 0.35, &mut root.derive(0));
    let lap = crate::graph::laplacian_for(&ds)?;
    let prop: Propagation<f64> = Propagation::build(model_cfg, &lap, ds.n_users)?;
    let mut params = init_params::<f64>(model_cfg, ds.n_users, ds.n_items, &mut root.derive(1))?;
    let plan = DropoutPlan::sample(&prop, model_cfg, &mut root.derive(2))?;
    let triples = sample_triples(&ds, 8, &mut root.derive(3));
    let lambda = train_cfg.l2_lambda;
    let reg_mode = train_cfg.reg_mode;
    let n_users = ds.n_users;

    let objective = |p: &ModelParams<f64>| -> Result<f64> {
        let trace = forward_with_plan(p, model_cfg, &plan, false)?;
        let y_pos: Vec<f64> =
            triples.iter().map(|t| predict(&trace.estar, n_users, t.user, t.pos)).collect();
        let y_neg: Vec<f64> =
            triples.iter().map(|t| predict(&trace.estar, n_users, t.user, t.neg)).collect();
        let (loss, _, _) = bpr_loss(&y_pos, &y_neg)?;
        Ok(match reg_mode {
            RegMode::AllParams => loss + l2_penalty(p, lambda),
            RegMode::BatchEmbeddings => {
                loss + batch_embedding_penalty(&trace.estar, n_users, &triples, lambda)
            }
        })
    };

    let trace = forward_with_plan(&params, model_cfg, &plan, true)?;
    let y_pos: Vec<f64> =
        triples.iter().map(|t| predict(&trace.estar, n_users, t.user, t.pos)).collect();
    let y_neg: Vec<f64> =
        triples.iter().map(|t| predict(&trace.estar, n_users, t.user, t.neg)).collect();
    let (_, grad_pos, grad_neg) = bpr_loss(&y_pos, &y_neg)?;
    let mut grad_estar =
        scatter_score_grads(&trace.estar, n_users, &triples, &grad_pos, &grad_neg);
    if reg_mode == RegMode::BatchEmbeddings {
        add_batch_embedding_grads(&mut grad_estar, &trace.estar, n_users, &triples, lambda);
    }
    let mut grads = backward(&trace, &plan, model_cfg, &params, &grad_estar)?;
    if reg_mode == RegMode::AllParams && lambda > 0.0 {
        for (g, p) in grads.tensors_mut().iter_mut().zip(params.tensors()) {
            g.add_scaled_assign(p, 2.0 * lambda)?;
        }
    }

    let names = params.tensor_names();
    let analytic: Vec<DenseMatrix<f64>> =
        grads.tensors().into_iter().cloned().collect();
    let h = 1e-5;
    let mut max_rel_err = 0.0f64;
    let mut worst_tensor = String::new();
    let mut n_checked = 0;
    for (ti, tensor_grad) in analytic.iter().enumerate() {
        for i in 0..tensor_grad.data().len() {
            let orig = params.tensors()[ti].data()[i];
            params.tensors_mut()[ti].data_mut()[i] = orig + h;
            let plus = objective(&params)?;
            params.tensors_mut()[ti].data_mut()[i] = orig - h;
            let minus = objective(&params)?;
            params.tensors_mut()[ti].data_mut()[i] = orig;
            let fd = (plus - minus) / (2.0 * h);
            let a = tensor_grad.data()[i];
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6);
            if rel > max_rel_err {
                max_rel_err = rel;
                worst_tensor = names[ti].clone();
            }
            n_checked += 1;
        }
    }
    Ok(GradCheckReport { max_rel_err, worst_tensor, n_checked, passed: max_rel_err < 1e-4 })
}
