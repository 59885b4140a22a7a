//! Synthetic interaction corpora for the integration suite.
//!
//! The generator plants collaborative structure a recommender can actually
//! learn: users belong to taste clusters, draw mostly from their own and the
//! neighboring cluster's items, and item popularity is skewed within each
//! cluster, so both low-order and high-order connectivity carry signal.

use std::fmt::Write as _;
use std::path::Path;

use ngcf_core::dataset::{k_core_filter, split, InteractionDataset, RawInteractions};
use ngcf_core::numeric::Rng;

pub const N_CLUSTERS: usize = 10;

/// Quadratically skewed index in `0..n`: low indices are popular.
fn skewed(n: usize, rng: &mut Rng) -> usize {
    let r = rng.next_f64();
    ((n as f64) * r * r) as usize % n
}

/// A skewed draw from the items congruent to `cluster` mod [`N_CLUSTERS`].
fn cluster_item(cluster: usize, n_items: usize, rng: &mut Rng) -> usize {
    let len = (n_items - cluster).div_ceil(N_CLUSTERS);
    cluster + skewed(len, rng) * N_CLUSTERS
}

/// Raw interaction log with duplicates, roughly `n_users * mean_degree`
/// draws. Each user draws 60% from their own cluster, 25% from the next
/// cluster over, and 15% from the popularity-skewed global pool.
pub fn synthetic_raw(
    n_users: usize,
    n_items: usize,
    mean_degree: usize,
    seed: u64,
) -> RawInteractions {
    assert!(n_items > N_CLUSTERS);
    let mut rng = Rng::new(seed);
    let mut pairs = Vec::new();
    let base = (mean_degree as f64 * 0.6) as usize;
    let spread = mean_degree as f64 * 1.2;
    for u in 0..n_users {
        let cluster = u % N_CLUSTERS;
        let r = rng.next_f64();
        let n_draws = base + (spread * r * r) as usize;
        for _ in 0..n_draws {
            let roll = rng.next_f64();
            let item = if roll < 0.60 {
                cluster_item(cluster, n_items, &mut rng)
            } else if roll < 0.85 {
                cluster_item((cluster + 1) % N_CLUSTERS, n_items, &mut rng)
            } else {
                skewed(n_items, &mut rng)
            };
            pairs.push((format!("u{u}"), format!("i{item}")));
        }
    }
    RawInteractions { pairs }
}

/// A corpus on the scale of the classic 100k-interaction movie benchmark
/// (943 users, 1682 items before filtering), 10-core filtered and split
/// 80/20 with a tenth of the train pool as validation. Fully deterministic.
pub fn ml100k_like() -> InteractionDataset {
    let raw = synthetic_raw(943, 1682, 100, 9172);
    let filtered = k_core_filter(&raw, 10).expect("k-core");
    split(&filtered, 0.8, 0.1, 42).expect("split")
}

/// Writes `user<TAB>item` lines for the `prepare` subcommand.
pub fn write_edge_list(raw: &RawInteractions, path: &Path) {
    let mut text = String::new();
    for (u, i) in &raw.pairs {
        let _ = writeln!(text, "{u}\t{i}");
    }
    std::fs::write(path, text).expect("write edge list");
}
