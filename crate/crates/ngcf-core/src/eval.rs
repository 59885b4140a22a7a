//! Full-ranking top-K evaluation: recall and NDCG over all items a user has
//! not interacted with during training, plus sparsity-group breakdowns.

use alloc::string::String;
use alloc::vec;
#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;

use crate::dataset::InteractionDataset;
use crate::error::{Error, Result};
use crate::model::{forward_eval, ModelConfig, ModelParams, Propagation};
use crate::numeric::{dot, pairwise_sum, DenseMatrix, Scalar};

/// Settings for [`evaluate_all`].
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    /// Cutoffs to report, e.g. `[20, 40]`.
    pub k_values: Vec<usize>,
    /// Remove each user's validation items from the ranking candidates so
    /// they cannot count as false negatives. Training items are always
    /// removed.
    pub exclude_validation: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { k_values: vec![20], exclude_validation: true }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_values.is_empty() {
            return Err(Error::Config("k_values must not be empty".into()));
        }
        if self.k_values.contains(&0) {
            return Err(Error::Config("cutoff K must be at least 1".into()));
        }
        Ok(())
    }
}

/// Metric means for one user bucket.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupMetrics {
    /// Largest train-interaction count among the group's users. An empty
    /// group repeats the previous group's value.
    pub boundary: usize,
    /// Users assigned to the group.
    pub n_users: usize,
    /// Users that contributed metrics (nonempty test set).
    pub n_evaluated: usize,
    /// Mean recall per cutoff, aligned with the report's `k_values`.
    pub recall: Vec<f64>,
    /// Mean NDCG per cutoff.
    pub ndcg: Vec<f64>,
}

/// Aggregate evaluation result.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub k_values: Vec<usize>,
    /// Users with at least one test item.
    pub n_users_evaluated: usize,
    /// Mean recall per cutoff over all evaluated users.
    pub recall: Vec<f64>,
    /// Mean NDCG per cutoff over all evaluated users.
    pub ndcg: Vec<f64>,
    /// Four sparsity groups, sparsest first.
    pub groups: Vec<GroupMetrics>,
    pub warnings: Vec<String>,
}

/// Assignment of users to four groups of roughly equal total
/// train-interaction mass, sparsest users first.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityGroups {
    /// Group index (0..4) per user.
    pub assignment: Vec<usize>,
    /// Largest train count per group; empty groups repeat the previous value.
    pub boundaries: [usize; 4],
    /// Users per group.
    pub counts: [usize; 4],
    pub warnings: Vec<String>,
}

/// Bounded best-first list ordered by score descending, then item ascending.
struct TopK {
    cap: usize,
    entries: Vec<(f64, usize)>,
}

impl TopK {
    fn new(cap: usize) -> Self {
        TopK { cap, entries: Vec::with_capacity(cap + 1) }
    }

    fn beats(a: (f64, usize), b: (f64, usize)) -> bool {
        match a.0.total_cmp(&b.0) {
            core::cmp::Ordering::Greater => true,
            core::cmp::Ordering::Less => false,
            core::cmp::Ordering::Equal => a.1 < b.1,
        }
    }

    fn offer(&mut self, score: f64, item: usize) {
        if self.cap == 0 {
            return;
        }
        if self.entries.len() == self.cap {
            let last = *self.entries.last().unwrap();
            if !Self::beats((score, item), last) {
                return;
            }
        }
        let pos = self.entries.partition_point(|&e| Self::beats(e, (score, item)));
        self.entries.insert(pos, (score, item));
        self.entries.truncate(self.cap);
    }

    fn into_items(self) -> Vec<usize> {
        self.entries.into_iter().map(|(_, item)| item).collect()
    }
}

/// Top `k` indices of `scores` excluding flagged positions, ordered by score
/// descending with ties broken by lower index. Returns fewer than `k` when
/// fewer candidates exist.
fn select_top_k(scores: &[f64], excluded: &[bool], k: usize) -> Vec<usize> {
    let mut top = TopK::new(k);
    for (item, &score) in scores.iter().enumerate() {
        if !excluded[item] {
            top.offer(score, item);
        }
    }
    top.into_items()
}

/// Ranks every item for `user` by inner product against the user's final
/// representation row, excluding training (and optionally validation)
/// positives. Ties go to the lower item index. Returns at most `k` items,
/// fewer when the exclusions leave fewer candidates.
pub fn rank_items<T: Scalar>(
    estar: &DenseMatrix<T>,
    ds: &InteractionDataset,
    user: usize,
    k: usize,
    exclude_validation: bool,
) -> Vec<usize> {
    let user_row = estar.row(user);
    let mut excluded = vec![false; ds.n_items];
    for &item in &ds.train[user] {
        excluded[item] = true;
    }
    if exclude_validation {
        for &item in &ds.validation[user] {
            excluded[item] = true;
        }
    }
    let scores: Vec<f64> = (0..ds.n_items)
        .map(|item| {
            if excluded[item] {
                f64::NEG_INFINITY
            } else {
                dot(user_row, estar.row(ds.n_users + item)).to_f64()
            }
        })
        .collect();
    select_top_k(&scores, &excluded, k)
}

/// Fraction of the user's test items that appear in `topk`.
/// `test_items` must be sorted ascending.
pub fn recall_at_k(topk: &[usize], test_items: &[usize]) -> f64 {
    if test_items.is_empty() {
        return 0.0;
    }
    let hits = topk.iter().filter(|item| test_items.binary_search(item).is_ok()).count();
    hits as f64 / test_items.len() as f64
}

/// Normalized discounted cumulative gain with binary relevance: each hit at
/// 0-based rank r contributes 1/log2(r+2), normalized by the best achievable
/// prefix of length min(|topk|, |test|). `test_items` must be sorted
/// ascending.
pub fn ndcg_at_k(topk: &[usize], test_items: &[usize]) -> f64 {
    if test_items.is_empty() || topk.is_empty() {
        return 0.0;
    }
    let mut dcg = 0.0;
    for (rank, item) in topk.iter().enumerate() {
        if test_items.binary_search(item).is_ok() {
            dcg += 1.0 / ((rank + 2) as f64).log2();
        }
    }
    let ideal_len = core::cmp::min(topk.len(), test_items.len());
    let mut idcg = 0.0;
    for rank in 0..ideal_len {
        idcg += 1.0 / ((rank + 2) as f64).log2();
    }
    dcg / idcg
}

/// Splits users into four contiguous bins of (as nearly as possible) equal
/// cumulative train-interaction mass, sweeping users in ascending order of
/// train count. A user whose cumulative mass c satisfies 4c <= g * total
/// lands in the earliest such bin g-1; heavy tails can leave middle bins
/// empty, which is reported as a warning.
pub fn sparsity_groups(ds: &InteractionDataset) -> SparsityGroups {
    let n = ds.n_users;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&u| (ds.train[u].len(), u));
    let total: usize = ds.train.iter().map(|t| t.len()).sum();

    let mut assignment = vec![0usize; n];
    let mut counts = [0usize; 4];
    let mut max_count = [0usize; 4];
    let mut cumulative = 0usize;
    for &u in &order {
        cumulative += ds.train[u].len();
        let mut group = 3;
        for g in 1..4 {
            if 4 * cumulative <= g * total {
                group = g - 1;
                break;
            }
        }
        assignment[u] = group;
        counts[group] += 1;
        if ds.train[u].len() > max_count[group] {
            max_count[group] = ds.train[u].len();
        }
    }

    let mut boundaries = [0usize; 4];
    let mut warnings = Vec::new();
    let mut previous = 0;
    for g in 0..4 {
        if counts[g] == 0 {
            boundaries[g] = previous;
            warnings.push(alloc::format!("sparsity group {g} is empty"));
        } else {
            boundaries[g] = max_count[g];
            previous = max_count[g];
        }
    }

    SparsityGroups { assignment, boundaries, counts, warnings }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        pairwise_sum(values) / values.len() as f64
    }
}

/// Runs one deterministic eval-mode forward pass and averages per-user
/// recall and NDCG at every requested cutoff, overall and per sparsity
/// group. Users without test items are skipped.
pub fn evaluate_all<T: Scalar>(
    params: &ModelParams<T>,
    model_cfg: &ModelConfig,
    prop: &Propagation<T>,
    ds: &InteractionDataset,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    let trace = forward_eval(params, model_cfg, prop)?;
    evaluate_estar(&trace.estar, ds, cfg)
}

/// [`evaluate_all`] on an already-computed representation matrix.
pub fn evaluate_estar<T: Scalar>(
    estar: &DenseMatrix<T>,
    ds: &InteractionDataset,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    if estar.n_rows() != ds.n_users + ds.n_items {
        return Err(Error::Shape {
            context: "evaluation representation",
            expected: (ds.n_users + ds.n_items, estar.n_cols()),
            got: (estar.n_rows(), estar.n_cols()),
        });
    }
    let k_values = &cfg.k_values;
    let k_max = *k_values.iter().max().unwrap();
    let groups = sparsity_groups(ds);

    let n_k = k_values.len();
    let mut overall_recall: Vec<Vec<f64>> = vec![Vec::new(); n_k];
    let mut overall_ndcg: Vec<Vec<f64>> = vec![Vec::new(); n_k];
    let mut group_recall: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); n_k]; 4];
    let mut group_ndcg: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); n_k]; 4];

    for user in 0..ds.n_users {
        let test = &ds.test[user];
        if test.is_empty() {
            continue;
        }
        let topk = rank_items(estar, ds, user, k_max, cfg.exclude_validation);
        let group = groups.assignment[user];
        for (ki, &k) in k_values.iter().enumerate() {
            let prefix = &topk[..core::cmp::min(k, topk.len())];
            let r = recall_at_k(prefix, test);
            let n = ndcg_at_k(prefix, test);
            overall_recall[ki].push(r);
            overall_ndcg[ki].push(n);
            group_recall[group][ki].push(r);
            group_ndcg[group][ki].push(n);
        }
    }

    let n_users_evaluated = overall_recall[0].len();
    let report_groups = (0..4)
        .map(|g| GroupMetrics {
            boundary: groups.boundaries[g],
            n_users: groups.counts[g],
            n_evaluated: group_recall[g][0].len(),
            recall: group_recall[g].iter().map(|v| mean(v)).collect(),
            ndcg: group_ndcg[g].iter().map(|v| mean(v)).collect(),
        })
        .collect();

    Ok(EvalReport {
        k_values: k_values.clone(),
        n_users_evaluated,
        recall: overall_recall.iter().map(|v| mean(v)).collect(),
        ndcg: overall_ndcg.iter().map(|v| mean(v)).collect(),
        groups: report_groups,
        warnings: groups.warnings,
    })
}
