//! Embedding propagation model: forward pass over the normalized adjacency,
//! hand-derived backward pass, message-function variants, and parameter
//! accounting.

use alloc::string::String;
use alloc::vec;
#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::{sample_node_mask, NormalizedLaplacian};
use crate::numeric::{dot, CsrMatrix, DenseMatrix, Rng, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Full propagation rule with the elementwise interaction term.
    Ngcf,
    /// Single linear propagation hop, no weights or activation.
    Svdpp,
    /// Propagation without the elementwise interaction term.
    Gcmc,
    /// Same layer rule as `Gcmc`; by convention trained with message
    /// dropout only. The library applies whatever rates the config carries.
    Pinsage,
    /// No propagation: plain inner-product matrix factorization.
    Mf,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Ngcf => "ngcf",
            Variant::Svdpp => "svdpp",
            Variant::Gcmc => "gcmc",
            Variant::Pinsage => "pinsage",
            Variant::Mf => "mf",
        }
    }

    /// Whether layers carry the elementwise interaction term (and its W2).
    pub fn uses_hadamard(self) -> bool {
        matches!(self, Variant::Ngcf)
    }

    /// Whether layers carry trainable transform weights at all.
    pub fn uses_weights(self) -> bool {
        matches!(self, Variant::Ngcf | Variant::Gcmc | Variant::Pinsage)
    }
}

impl core::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ngcf" => Ok(Variant::Ngcf),
            "svdpp" => Ok(Variant::Svdpp),
            "gcmc" => Ok(Variant::Gcmc),
            "pinsage" => Ok(Variant::Pinsage),
            "mf" => Ok(Variant::Mf),
            other => Err(Error::Config(alloc::format!("unknown variant '{other}'"))),
        }
    }
}

impl core::fmt::Display for Variant {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Neighbor coefficient used by the `svdpp` variant, chosen per side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvdppCoeff {
    /// `1/sqrt(deg(a) deg(b))`, the propagation normalization.
    Laplacian,
    /// `1/sqrt(deg(own))`, depending only on the aggregating node.
    InvSqrtDegree,
    /// No neighbor term on this side.
    Zero,
}

impl SvdppCoeff {
    pub fn as_str(&self) -> &'static str {
        match self {
            SvdppCoeff::Laplacian => "laplacian",
            SvdppCoeff::InvSqrtDegree => "inv-sqrt-degree",
            SvdppCoeff::Zero => "zero",
        }
    }
}

impl core::str::FromStr for SvdppCoeff {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "laplacian" => Ok(SvdppCoeff::Laplacian),
            "inv-sqrt-degree" => Ok(SvdppCoeff::InvSqrtDegree),
            "zero" => Ok(SvdppCoeff::Zero),
            other => Err(Error::Config(alloc::format!("unknown coefficient mode '{other}'"))),
        }
    }
}

impl core::fmt::Display for SvdppCoeff {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub variant: Variant,
    pub embed_dim: usize,
    /// Output width of each propagation layer; length is the layer count.
    pub layer_dims: Vec<usize>,
    pub leaky_slope: f64,
    /// Message dropout rate p1, applied to each layer output in train mode.
    pub message_dropout: f64,
    /// Node dropout rate p2, applied to the propagation matrix in train mode.
    pub node_dropout: f64,
    /// Whether the layer-0 embeddings join the final concatenation.
    /// Ignored by `svdpp` (whose output already embeds layer 0 additively)
    /// and by `mf` (whose output is exactly layer 0).
    pub include_layer0: bool,
    pub svdpp_user_coeff: SvdppCoeff,
    pub svdpp_item_coeff: SvdppCoeff,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            variant: Variant::Ngcf,
            embed_dim: 64,
            layer_dims: vec![64, 64, 64],
            leaky_slope: 0.2,
            message_dropout: 0.0,
            node_dropout: 0.0,
            include_layer0: true,
            svdpp_user_coeff: SvdppCoeff::Laplacian,
            svdpp_item_coeff: SvdppCoeff::Laplacian,
        }
    }
}

impl ModelConfig {
    pub fn n_layers(&self) -> usize {
        self.layer_dims.len()
    }

    /// Width of the final representation.
    pub fn output_dim(&self) -> usize {
        match self.variant {
            Variant::Mf | Variant::Svdpp => self.embed_dim,
            _ => {
                let layers: usize = self.layer_dims.iter().sum();
                if self.include_layer0 {
                    self.embed_dim + layers
                } else {
                    layers
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.layer_dims.iter().any(|&d| d == 0) {
            return Err(Error::Config("embedding and layer dims must be positive".into()));
        }
        match self.variant {
            Variant::Mf if !self.layer_dims.is_empty() => {
                return Err(Error::Config("mf variant requires zero layers".into()));
            }
            Variant::Svdpp if self.layer_dims.as_slice() != [self.embed_dim] => {
                return Err(Error::Config(
                    "svdpp variant requires exactly one layer of embed_dim width".into(),
                ));
            }
            _ => {}
        }
        if !self.include_layer0 && self.layer_dims.is_empty() && self.variant != Variant::Mf {
            return Err(Error::Config("output would be empty".into()));
        }
        if !(0.0..1.0).contains(&self.message_dropout)
            || !(0.0..1.0).contains(&self.node_dropout)
        {
            return Err(Error::Config("dropout rates must be in [0, 1)".into()));
        }
        if !self.leaky_slope.is_finite() {
            return Err(Error::Config("leaky slope must be finite".into()));
        }
        Ok(())
    }

    /// Widths of the per-layer outputs a message-dropout mask applies to.
    fn mask_widths(&self) -> Vec<usize> {
        match self.variant {
            Variant::Mf => Vec::new(),
            Variant::Svdpp => vec![self.embed_dim],
            _ => self.layer_dims.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights<T> {
    pub w1: DenseMatrix<T>,
    /// Present only for the variant with the elementwise interaction term.
    pub w2: Option<DenseMatrix<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    /// Stacked user and item embeddings: row `u` for user `u`, row
    /// `n_users + i` for item `i`.
    pub e0: DenseMatrix<T>,
    pub layers: Vec<LayerWeights<T>>,
}

impl<T: Scalar> ModelParams<T> {
    /// All parameter tensors in a fixed order: `e0`, then `w1`/`w2` per layer.
    pub fn tensors(&self) -> Vec<&DenseMatrix<T>> {
        let mut out = vec![&self.e0];
        for layer in &self.layers {
            out.push(&layer.w1);
            if let Some(w2) = &layer.w2 {
                out.push(w2);
            }
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut DenseMatrix<T>> {
        let mut out = vec![&mut self.e0];
        for layer in &mut self.layers {
            out.push(&mut layer.w1);
            if let Some(w2) = &mut layer.w2 {
                out.push(w2);
            }
        }
        out
    }

    /// Tensor names aligned with [`ModelParams::tensors`].
    pub fn tensor_names(&self) -> Vec<String> {
        let mut out = vec![String::from("e0")];
        for (l, layer) in self.layers.iter().enumerate() {
            out.push(alloc::format!("w1_{}", l + 1));
            if layer.w2.is_some() {
                out.push(alloc::format!("w2_{}", l + 1));
            }
        }
        out
    }

    pub fn n_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.data().len()).sum()
    }

    pub fn convert<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            e0: self.e0.convert(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerWeights {
                    w1: l.w1.convert(),
                    w2: l.w2.as_ref().map(DenseMatrix::convert),
                })
                .collect(),
        }
    }
}

/// Glorot-uniform initialization of every tensor, in declaration order.
pub fn init_params<T: Scalar>(
    cfg: &ModelConfig,
    n_users: usize,
    n_items: usize,
    rng: &mut Rng,
) -> Result<ModelParams<T>> {
    cfg.validate()?;
    let e0 = DenseMatrix::xavier_init(n_users + n_items, cfg.embed_dim, rng);
    let mut layers = Vec::new();
    if cfg.variant.uses_weights() {
        let mut prev = cfg.embed_dim;
        for &dim in &cfg.layer_dims {
            let w1 = DenseMatrix::xavier_init(prev, dim, rng);
            let w2 = cfg
                .variant
                .uses_hadamard()
                .then(|| DenseMatrix::xavier_init(prev, dim, rng));
            layers.push(LayerWeights { w1, w2 });
            prev = dim;
        }
    }
    Ok(ModelParams { e0, layers })
}

/// `(base, extra)` parameter counts: `base` is the embedding table,
/// `extra` the propagation weights.
pub fn param_count(cfg: &ModelConfig, n_users: usize, n_items: usize) -> (usize, usize) {
    let base = cfg.embed_dim * (n_users + n_items);
    let per_layer_tensors = match cfg.variant {
        Variant::Ngcf => 2,
        Variant::Gcmc | Variant::Pinsage => 1,
        Variant::Svdpp | Variant::Mf => 0,
    };
    let mut extra = 0;
    let mut prev = cfg.embed_dim;
    for &dim in &cfg.layer_dims {
        extra += per_layer_tensors * prev * dim;
        prev = dim;
    }
    (base, extra)
}

/// The variant's propagation matrix (and its transpose when asymmetric),
/// in the scalar type the model runs in.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagation<T> {
    pub base: CsrMatrix<T>,
    base_t: Option<CsrMatrix<T>>,
}

impl<T: Scalar> Propagation<T> {
    pub fn build(
        cfg: &ModelConfig,
        laplacian: &NormalizedLaplacian,
        n_users: usize,
    ) -> Result<Propagation<T>> {
        cfg.validate()?;
        match cfg.variant {
            Variant::Svdpp => {
                let coeff =
                    svdpp_coefficients(laplacian, n_users, cfg.svdpp_user_coeff, cfg.svdpp_item_coeff)?;
                let base: CsrMatrix<T> = coeff.convert();
                let symmetric = cfg.svdpp_user_coeff == SvdppCoeff::Laplacian
                    && cfg.svdpp_item_coeff == SvdppCoeff::Laplacian;
                let base_t = (!symmetric).then(|| base.transpose());
                Ok(Propagation { base, base_t })
            }
            _ => Ok(Propagation { base: laplacian.lap.convert(), base_t: None }),
        }
    }

    pub fn base_t(&self) -> &CsrMatrix<T> {
        self.base_t.as_ref().unwrap_or(&self.base)
    }
}

/// Coefficient matrix of Eq-style single-hop aggregation: user rows carry
/// the user-side coefficient toward item columns and vice versa. Zero
/// coefficients are not stored.
fn svdpp_coefficients(
    laplacian: &NormalizedLaplacian,
    n_users: usize,
    user_coeff: SvdppCoeff,
    item_coeff: SvdppCoeff,
) -> Result<CsrMatrix<f64>> {
    let n = laplacian.lap.n_rows();
    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0usize);
    let mut cols = Vec::new();
    let mut values = Vec::new();
    for r in 0..n {
        let mode = if r < n_users { user_coeff } else { item_coeff };
        if mode != SvdppCoeff::Zero {
            let (row_cols, row_values) = laplacian.lap.row_entries(r);
            for (&c, &lap_value) in row_cols.iter().zip(row_values) {
                cols.push(c);
                values.push(match mode {
                    SvdppCoeff::Laplacian => lap_value,
                    SvdppCoeff::InvSqrtDegree => 1.0 / (laplacian.degrees[r] as f64).sqrt(),
                    SvdppCoeff::Zero => unreachable!(),
                });
            }
        }
        offsets.push(cols.len());
    }
    CsrMatrix::from_parts(n, n, offsets, cols, values)
}

/// One sampled realization of train-time stochasticity: the node-dropped
/// propagation matrix and per-layer message-dropout masks. A forward pass
/// through a fixed plan is fully deterministic, which is what makes the
/// finite-difference gradient checks able to cover the dropout path.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutPlan<T> {
    pub matrix: CsrMatrix<T>,
    matrix_t: Option<CsrMatrix<T>>,
    /// Empty when message dropout is off; otherwise one mask per layer.
    pub masks: Vec<DenseMatrix<T>>,
}

impl<T: Scalar> DropoutPlan<T> {
    pub fn sample(prop: &Propagation<T>, cfg: &ModelConfig, rng: &mut Rng) -> Result<Self> {
        let n = prop.base.n_rows();
        let (matrix, matrix_t) = if cfg.node_dropout > 0.0 {
            let keep = sample_node_mask(n, cfg.node_dropout, rng);
            let scale = T::from_f64(1.0 / (1.0 - cfg.node_dropout));
            let matrix = prop.base.masked_scaled(&keep, scale)?;
            let matrix_t = match &prop.base_t {
                Some(base_t) => Some(base_t.masked_scaled(&keep, scale)?),
                None => None,
            };
            (matrix, matrix_t)
        } else {
            (prop.base.clone(), prop.base_t.clone())
        };
        let masks = if cfg.message_dropout > 0.0 {
            cfg.mask_widths()
                .into_iter()
                .map(|w| DenseMatrix::dropout_mask(n, w, cfg.message_dropout, rng))
                .collect()
        } else {
            Vec::new()
        };
        Ok(DropoutPlan { matrix, matrix_t, masks })
    }

    /// Plan with no dropout at all, as used at evaluation time.
    pub fn eval(prop: &Propagation<T>) -> Self {
        DropoutPlan {
            matrix: prop.base.clone(),
            matrix_t: prop.base_t.clone(),
            masks: Vec::new(),
        }
    }

    pub fn matrix_t(&self) -> &CsrMatrix<T> {
        self.matrix_t.as_ref().unwrap_or(&self.matrix)
    }
}

/// Everything the backward pass needs from a forward pass, plus the final
/// concatenated representation.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace<T> {
    /// `[E0, X1, ..., XL]`: each layer's output after activation and mask.
    pub layer_outputs: Vec<DenseMatrix<T>>,
    /// Per layer, the neighbor aggregate `H_l = matrix * X_{l-1}`.
    /// Populated only when the trace is kept for a backward pass.
    pub aggregates: Vec<DenseMatrix<T>>,
    /// Per layer, the pre-activation `Z_l`. Train mode only, like above.
    pub pre_activations: Vec<DenseMatrix<T>>,
    /// Final per-node representation rows.
    pub estar: DenseMatrix<T>,
}

/// Forward pass through a fixed dropout plan. `keep_trace` retains the
/// intermediates needed by [`backward`]; evaluation passes `false`.
pub fn forward_with_plan<T: Scalar>(
    params: &ModelParams<T>,
    cfg: &ModelConfig,
    plan: &DropoutPlan<T>,
    keep_trace: bool,
) -> Result<ForwardTrace<T>> {
    let n_layers = cfg.n_layers();
    if !plan.masks.is_empty() && plan.masks.len() != cfg.mask_widths().len() {
        return Err(Error::Config("dropout plan does not match layer count".into()));
    }
    let mut layer_outputs: Vec<DenseMatrix<T>> = vec![params.e0.clone()];
    let mut aggregates = Vec::new();
    let mut pre_activations = Vec::new();

    match cfg.variant {
        Variant::Mf => {}
        Variant::Svdpp => {
            let h = plan.matrix.spmm(&params.e0)?;
            let mut x = params.e0.add(&h)?;
            if let Some(mask) = plan.masks.first() {
                x = x.hadamard(mask)?;
            }
            check_finite(&x, 1)?;
            if keep_trace {
                aggregates.push(h);
            }
            layer_outputs.push(x);
        }
        _ => {
            let slope = T::from_f64(cfg.leaky_slope);
            for l in 1..=n_layers {
                let weights = &params.layers[l - 1];
                let x_prev = &layer_outputs[l - 1];
                let h = plan.matrix.spmm(x_prev)?;
                let mut z = h.add(x_prev)?.matmul(&weights.w1)?;
                if let Some(w2) = &weights.w2 {
                    z.add_assign(&h.hadamard(x_prev)?.matmul(w2)?)?;
                }
                let y = z.leaky_relu(slope);
                let x = match plan.masks.get(l - 1) {
                    Some(mask) => y.hadamard(mask)?,
                    None => y,
                };
                check_finite(&x, l)?;
                if keep_trace {
                    aggregates.push(h);
                    pre_activations.push(z);
                }
                layer_outputs.push(x);
            }
        }
    }

    let estar = match cfg.variant {
        // The single hop already carries layer 0 additively.
        Variant::Svdpp => layer_outputs[1].clone(),
        Variant::Mf => layer_outputs[0].clone(),
        _ => {
            let from = if cfg.include_layer0 { 0 } else { 1 };
            let blocks: Vec<&DenseMatrix<T>> = layer_outputs[from..].iter().collect();
            DenseMatrix::concat_cols(&blocks)?
        }
    };
    if !keep_trace {
        layer_outputs.truncate(0);
    }
    Ok(ForwardTrace { layer_outputs, aggregates, pre_activations, estar })
}

/// Train-mode forward: samples a dropout plan and keeps the trace.
pub fn forward_train<T: Scalar>(
    params: &ModelParams<T>,
    cfg: &ModelConfig,
    prop: &Propagation<T>,
    rng: &mut Rng,
) -> Result<(ForwardTrace<T>, DropoutPlan<T>)> {
    let plan = DropoutPlan::sample(prop, cfg, rng)?;
    let trace = forward_with_plan(params, cfg, &plan, true)?;
    Ok((trace, plan))
}

/// Eval-mode forward: no dropout, no trace, deterministic.
pub fn forward_eval<T: Scalar>(
    params: &ModelParams<T>,
    cfg: &ModelConfig,
    prop: &Propagation<T>,
) -> Result<ForwardTrace<T>> {
    forward_with_plan(params, cfg, &DropoutPlan::eval(prop), false)
}

/// Score of a user-item pair: inner product of their final rows.
pub fn predict<T: Scalar>(
    estar: &DenseMatrix<T>,
    n_users: usize,
    user: usize,
    item: usize,
) -> T {
    dot(estar.row(user), estar.row(n_users + item))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads<T> {
    pub w1: DenseMatrix<T>,
    pub w2: Option<DenseMatrix<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads<T> {
    pub e0: DenseMatrix<T>,
    pub layers: Vec<LayerGrads<T>>,
}

impl<T: Scalar> ParamGrads<T> {
    /// Tensors aligned with [`ModelParams::tensors`].
    pub fn tensors(&self) -> Vec<&DenseMatrix<T>> {
        let mut out = vec![&self.e0];
        for layer in &self.layers {
            out.push(&layer.w1);
            if let Some(w2) = &layer.w2 {
                out.push(w2);
            }
        }
        out
    }

    /// Mutable counterpart of [`ParamGrads::tensors`], same order.
    pub fn tensors_mut(&mut self) -> Vec<&mut DenseMatrix<T>> {
        let mut out = vec![&mut self.e0];
        for layer in &mut self.layers {
            out.push(&mut layer.w1);
            if let Some(w2) = &mut layer.w2 {
                out.push(w2);
            }
        }
        out
    }
}

/// Backward pass through the trace of a train-mode forward.
///
/// Per layer, with `X = X_{l-1}`, `H = matrix * X`, `A = H + X`,
/// `P = H (*) X`, `Z = A W1 + P W2`, `Y = leaky(Z)`, `X_l = Y (*) mask`:
/// the incoming gradient G passes the mask and the activation slope, then
/// `dW1 = A^T G_z`, `dW2 = P^T G_z`, and the input gradient is
/// `G_a + matrix^T (G_a + G_p (*) X) + G_p (*) H` with `G_a = G_z W1^T`
/// and `G_p = G_z W2^T` (product rule: both Hadamard factors contribute,
/// and the aggregate flows back through the transposed matrix).
pub fn backward<T: Scalar>(
    trace: &ForwardTrace<T>,
    plan: &DropoutPlan<T>,
    cfg: &ModelConfig,
    params: &ModelParams<T>,
    grad_estar: &DenseMatrix<T>,
) -> Result<ParamGrads<T>> {
    if grad_estar.n_rows() != trace.estar.n_rows()
        || grad_estar.n_cols() != trace.estar.n_cols()
    {
        return Err(Error::Shape {
            context: "backward",
            expected: (trace.estar.n_rows(), trace.estar.n_cols()),
            got: (grad_estar.n_rows(), grad_estar.n_cols()),
        });
    }
    if trace.layer_outputs.is_empty() {
        return Err(Error::Config("backward needs a trace-keeping forward".into()));
    }

    match cfg.variant {
        Variant::Mf => Ok(ParamGrads { e0: grad_estar.clone(), layers: Vec::new() }),
        Variant::Svdpp => {
            let g_y = match plan.masks.first() {
                Some(mask) => grad_estar.hadamard(mask)?,
                None => grad_estar.clone(),
            };
            let mut e0 = plan.matrix_t().spmm(&g_y)?;
            e0.add_assign(&g_y)?;
            Ok(ParamGrads { e0, layers: Vec::new() })
        }
        _ => {
            let n_layers = cfg.n_layers();
            let slope = T::from_f64(cfg.leaky_slope);
            // Split the concatenation gradient back into per-layer blocks.
            let from = if cfg.include_layer0 { 0 } else { 1 };
            let mut blocks: Vec<Option<DenseMatrix<T>>> = vec![None; n_layers + 1];
            let mut offset = 0;
            for l in from..=n_layers {
                let width = trace.layer_outputs[l].n_cols();
                blocks[l] = Some(grad_estar.col_block(offset, width));
                offset += width;
            }

            let mut layer_grads: Vec<LayerGrads<T>> = Vec::with_capacity(n_layers);
            let mut grad_x = blocks[n_layers]
                .take()
                .unwrap_or_else(|| DenseMatrix::zeros(grad_estar.n_rows(), cfg.layer_dims[n_layers - 1]));
            for l in (1..=n_layers).rev() {
                let weights = &params.layers[l - 1];
                let x_prev = &trace.layer_outputs[l - 1];
                let h = &trace.aggregates[l - 1];
                let z = &trace.pre_activations[l - 1];

                let g_y = match plan.masks.get(l - 1) {
                    Some(mask) => grad_x.hadamard(mask)?,
                    None => grad_x,
                };
                let g_z = g_y.hadamard(&z.leaky_relu_grad(slope))?;

                let a = h.add(x_prev)?;
                let grad_w1 = a.matmul_transpose_left(&g_z)?;
                let g_a = g_z.matmul_transpose_right(&weights.w1)?;

                let (grad_w2, g_p) = match &weights.w2 {
                    Some(w2) => {
                        let p = h.hadamard(x_prev)?;
                        (Some(p.matmul_transpose_left(&g_z)?), Some(g_z.matmul_transpose_right(w2)?))
                    }
                    None => (None, None),
                };

                let mut g_h = g_a.clone();
                if let Some(g_p) = &g_p {
                    g_h.add_assign(&g_p.hadamard(x_prev)?)?;
                }
                let mut g_x_prev = plan.matrix_t().spmm(&g_h)?;
                g_x_prev.add_assign(&g_a)?;
                if let Some(g_p) = &g_p {
                    g_x_prev.add_assign(&g_p.hadamard(h)?)?;
                }
                if let Some(block) = blocks[l - 1].take() {
                    g_x_prev.add_assign(&block)?;
                }
                layer_grads.push(LayerGrads { w1: grad_w1, w2: grad_w2 });
                grad_x = g_x_prev;
            }
            layer_grads.reverse();
            Ok(ParamGrads { e0: grad_x, layers: layer_grads })
        }
    }
}

fn check_finite<T: Scalar>(x: &DenseMatrix<T>, layer: usize) -> Result<()> {
    if x.first_non_finite().is_some() {
        return Err(Error::Diverged { context: "propagation layer output", index: layer });
    }
    Ok(())
}
