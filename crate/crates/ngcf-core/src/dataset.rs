//! Interaction ingestion, k-core filtering, train/validation/test
//! splitting, and BPR triple sampling.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numeric::{scaled_count, Rng, Rounding};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    /// One `user<TAB>item` pair per line.
    EdgeList,
    /// One `user item1 item2 ...` line per user, whitespace separated.
    Grouped,
}

/// Raw interaction log; duplicates permitted until deduplication.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawInteractions {
    pub pairs: Vec<(String, String)>,
}

impl RawInteractions {
    /// Removes repeated pairs, keeping first-appearance order.
    pub fn deduplicated(&self) -> RawInteractions {
        let mut seen = BTreeSet::new();
        let mut pairs = Vec::new();
        for (u, i) in &self.pairs {
            if seen.insert((u.as_str(), i.as_str())) {
                pairs.push((u.clone(), i.clone()));
            }
        }
        RawInteractions { pairs }
    }
}

/// Re-indexed interactions partitioned into train/validation/test.
///
/// Indices are dense: users in `0..n_users`, items in `0..n_items`. Every
/// user and every item has at least one training interaction; the three
/// per-user lists are sorted and pairwise disjoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionDataset {
    pub n_users: usize,
    pub n_items: usize,
    pub train: Vec<Vec<usize>>,
    pub validation: Vec<Vec<usize>>,
    pub test: Vec<Vec<usize>>,
    pub user_map: BTreeMap<String, usize>,
    pub item_map: BTreeMap<String, usize>,
}

/// One pairwise training observation: `pos` is interacted, `neg` is not.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BprTriple {
    pub user: usize,
    pub pos: usize,
    pub neg: usize,
}

pub fn load_interactions(source: &str, format: InputFormat) -> Result<RawInteractions> {
    let mut pairs = Vec::new();
    for (idx, raw_line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        match format {
            InputFormat::EdgeList => {
                let mut fields = line.split('\t');
                match (fields.next(), fields.next(), fields.next()) {
                    (Some(u), Some(i), None) if !u.is_empty() && !i.trim().is_empty() => {
                        pairs.push((u.to_string(), i.trim().to_string()));
                    }
                    _ => {
                        return Err(Error::Parse {
                            line: line_no,
                            message: "expected exactly two tab-separated fields".into(),
                        })
                    }
                }
            }
            InputFormat::Grouped => {
                let mut tokens = line.split_whitespace();
                let user = tokens.next().unwrap_or_default();
                for item in tokens {
                    pairs.push((user.to_string(), item.to_string()));
                }
            }
        }
    }
    Ok(RawInteractions { pairs })
}

/// Iteratively removes users and items with degree below `k` until every
/// remaining degree is at least `k`. Input is deduplicated first; pair
/// order is preserved.
pub fn k_core_filter(raw: &RawInteractions, k: usize) -> Result<RawInteractions> {
    if k == 0 {
        return Err(Error::Config("k-core order must be at least 1".into()));
    }
    let dedup = raw.deduplicated();
    let (user_names, item_names, mut edges) = index_pairs(&dedup);
    loop {
        let mut user_deg = vec![0usize; user_names.len()];
        let mut item_deg = vec![0usize; item_names.len()];
        for &(u, i) in &edges {
            user_deg[u] += 1;
            item_deg[i] += 1;
        }
        let before = edges.len();
        edges.retain(|&(u, i)| user_deg[u] >= k && item_deg[i] >= k);
        if edges.len() == before {
            break;
        }
    }
    let pairs = edges
        .into_iter()
        .map(|(u, i)| (user_names[u].clone(), item_names[i].clone()))
        .collect();
    Ok(RawInteractions { pairs })
}

/// Splits deduplicated interactions into train/validation/test.
///
/// Per user, the ceiling of `train_frac * degree` interactions go to the
/// train pool and the rest to test; then `val_frac_of_train` of the global
/// train pool (uniform over interactions) moves to validation. A user whose
/// train list would become empty gets their validation entries back. Items
/// that end up with zero train degree are dropped along with their test and
/// validation entries, and indices are re-densified in first-appearance
/// order.
pub fn split(
    raw: &RawInteractions,
    train_frac: f64,
    val_frac_of_train: f64,
    seed: u64,
) -> Result<InteractionDataset> {
    if !(train_frac > 0.0 && train_frac <= 1.0) {
        return Err(Error::Config("train fraction must be in (0, 1]".into()));
    }
    if !(0.0..=1.0).contains(&val_frac_of_train) {
        return Err(Error::Config("validation fraction must be in [0, 1]".into()));
    }
    let dedup = raw.deduplicated();
    if dedup.pairs.is_empty() {
        return Err(Error::Data("no interactions to split".into()));
    }
    let (user_names, item_names, edges) = index_pairs(&dedup);
    let n_users = user_names.len();
    let n_items_prov = item_names.len();
    let mut per_user: Vec<Vec<usize>> = vec![Vec::new(); n_users];
    for (u, i) in edges {
        per_user[u].push(i);
    }

    let mut rng = Rng::new(seed);
    let mut test: Vec<Vec<usize>> = vec![Vec::new(); n_users];
    let mut pool: Vec<(usize, usize)> = Vec::new();
    for (u, items) in per_user.iter_mut().enumerate() {
        rng.shuffle(items);
        let n_train = scaled_count(items.len(), train_frac, Rounding::Up).max(1);
        for (pos, &item) in items.iter().enumerate() {
            if pos < n_train {
                pool.push((u, item));
            } else {
                test[u].push(item);
            }
        }
    }

    let n_val = scaled_count(pool.len(), val_frac_of_train, Rounding::Down);
    let mut to_validation = vec![false; pool.len()];
    for idx in rng.sample_distinct(pool.len(), n_val) {
        to_validation[idx] = true;
    }
    let mut train: Vec<Vec<usize>> = vec![Vec::new(); n_users];
    let mut validation: Vec<Vec<usize>> = vec![Vec::new(); n_users];
    for (idx, &(u, item)) in pool.iter().enumerate() {
        if to_validation[idx] {
            validation[u].push(item);
        } else {
            train[u].push(item);
        }
    }
    for u in 0..n_users {
        if train[u].is_empty() {
            train[u] = core::mem::take(&mut validation[u]);
        }
    }

    let mut item_train_deg = vec![0usize; n_items_prov];
    for list in &train {
        for &item in list {
            item_train_deg[item] += 1;
        }
    }
    let mut remap = vec![usize::MAX; n_items_prov];
    let mut item_map = BTreeMap::new();
    let mut n_items = 0usize;
    for (prov, name) in item_names.iter().enumerate() {
        if item_train_deg[prov] > 0 {
            remap[prov] = n_items;
            item_map.insert(name.clone(), n_items);
            n_items += 1;
        }
    }
    let remap_lists = |lists: Vec<Vec<usize>>| -> Vec<Vec<usize>> {
        lists
            .into_iter()
            .map(|list| {
                let mut out: Vec<usize> = list
                    .into_iter()
                    .filter(|&item| remap[item] != usize::MAX)
                    .map(|item| remap[item])
                    .collect();
                out.sort_unstable();
                out
            })
            .collect()
    };

    let ds = InteractionDataset {
        n_users,
        n_items,
        train: remap_lists(train),
        validation: remap_lists(validation),
        test: remap_lists(test),
        user_map: user_names.into_iter().enumerate().map(|(u, name)| (name, u)).collect(),
        item_map,
    };
    ds.validate()?;
    Ok(ds)
}

/// Samples `batch_size` observations: a uniform user, a uniform positive
/// from their train list, and a uniform rejected-sampled negative. Users
/// whose train list covers every item are skipped and resampled.
pub fn sample_triples(ds: &InteractionDataset, batch_size: usize, rng: &mut Rng) -> Vec<BprTriple> {
    debug_assert!(ds.n_users > 0 && ds.n_items > 0);
    let mut out = Vec::with_capacity(batch_size);
    while out.len() < batch_size {
        let user = rng.next_below(ds.n_users);
        let positives = &ds.train[user];
        if positives.is_empty() || positives.len() == ds.n_items {
            continue;
        }
        let pos = positives[rng.next_below(positives.len())];
        let neg = loop {
            let candidate = rng.next_below(ds.n_items);
            if positives.binary_search(&candidate).is_err() {
                break candidate;
            }
        };
        out.push(BprTriple { user, pos, neg });
    }
    out
}

impl InteractionDataset {
    /// Random train-only dataset where every user and item has degree
    /// at least 1; used by gradient checks and property tests.
    pub fn random(n_users: usize, n_items: usize, edge_prob: f64, rng: &mut Rng) -> Self {
        assert!(n_users > 0 && n_items > 0);
        let mut train: Vec<Vec<usize>> = vec![Vec::new(); n_users];
        for list in train.iter_mut() {
            for item in 0..n_items {
                if rng.next_f64() < edge_prob {
                    list.push(item);
                }
            }
            if list.is_empty() {
                list.push(rng.next_below(n_items));
            }
        }
        let mut item_deg = vec![0usize; n_items];
        for list in &train {
            for &item in list {
                item_deg[item] += 1;
            }
        }
        for (item, &deg) in item_deg.iter().enumerate() {
            if deg == 0 {
                let user = rng.next_below(n_users);
                if let Err(pos) = train[user].binary_search(&item) {
                    train[user].insert(pos, item);
                }
            }
        }
        InteractionDataset {
            n_users,
            n_items,
            train,
            validation: vec![Vec::new(); n_users],
            test: vec![Vec::new(); n_users],
            user_map: (0..n_users).map(|u| (u.to_string(), u)).collect(),
            item_map: (0..n_items).map(|i| (i.to_string(), i)).collect(),
        }
    }

    /// Total interactions in (train, validation, test).
    pub fn counts(&self) -> (usize, usize, usize) {
        let total = |lists: &[Vec<usize>]| lists.iter().map(Vec::len).sum();
        (total(&self.train), total(&self.validation), total(&self.test))
    }

    /// Checks every structural invariant the rest of the pipeline relies on.
    pub fn validate(&self) -> Result<()> {
        let all = [&self.train, &self.validation, &self.test];
        if all.iter().any(|lists| lists.len() != self.n_users) {
            return Err(Error::Data("per-user list count differs from n_users".into()));
        }
        let mut item_train_deg = vec![0usize; self.n_items];
        for u in 0..self.n_users {
            let mut seen = BTreeSet::new();
            for lists in all {
                for window in lists[u].windows(2) {
                    if window[0] >= window[1] {
                        return Err(Error::Data("per-user item list not sorted".into()));
                    }
                }
                for &item in &lists[u] {
                    if item >= self.n_items {
                        return Err(Error::Data("item index out of range".into()));
                    }
                    if !seen.insert(item) {
                        return Err(Error::Data("train/validation/test overlap".into()));
                    }
                }
            }
            if self.train[u].is_empty() {
                return Err(Error::Data("user with empty train list".into()));
            }
            for &item in &self.train[u] {
                item_train_deg[item] += 1;
            }
        }
        if item_train_deg.iter().any(|&d| d == 0) {
            return Err(Error::Data("item with zero train degree".into()));
        }
        if self.user_map.len() != self.n_users || self.item_map.len() != self.n_items {
            return Err(Error::Data("id map size differs from counts".into()));
        }
        Ok(())
    }
}

fn index_pairs(dedup: &RawInteractions) -> (Vec<String>, Vec<String>, Vec<(usize, usize)>) {
    let mut user_ix: BTreeMap<&str, usize> = BTreeMap::new();
    let mut item_ix: BTreeMap<&str, usize> = BTreeMap::new();
    let mut user_names = Vec::new();
    let mut item_names = Vec::new();
    let mut edges = Vec::with_capacity(dedup.pairs.len());
    for (u, i) in &dedup.pairs {
        let uid = *user_ix.entry(u.as_str()).or_insert_with(|| {
            user_names.push(u.clone());
            user_names.len() - 1
        });
        let iid = *item_ix.entry(i.as_str()).or_insert_with(|| {
            item_names.push(i.clone());
            item_names.len() - 1
        });
        edges.push((uid, iid));
    }
    (user_names, item_names, edges)
}
