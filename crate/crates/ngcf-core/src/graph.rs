//! Bipartite user-item adjacency, its symmetric degree normalization, and
//! node dropout over the normalized matrix.

use alloc::vec;
#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;

use crate::dataset::InteractionDataset;
use crate::error::{Error, Result};
use crate::numeric::{scaled_count, CsrMatrix, Rng, Rounding};

/// Symmetrically normalized adjacency `D^{-1/2} A D^{-1/2}` of the
/// `(N+M)`-node bipartite interaction graph. The diagonal is zero; the entry
/// linking user `u` and item `i` (node `N+i`) is `1/sqrt(deg(u) * deg(i))`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedLaplacian {
    pub lap: CsrMatrix<f64>,
    pub degrees: Vec<usize>,
}

/// Builds the `(N+M)` square 0/1 adjacency from the train lists: user `u` is
/// node `u`, item `i` is node `N+i`, and each train pair contributes the two
/// symmetric entries.
pub fn build_adjacency(ds: &InteractionDataset) -> Result<CsrMatrix<f64>> {
    let n = ds.n_users + ds.n_items;
    let mut triplets = Vec::with_capacity(2 * ds.train.iter().map(Vec::len).sum::<usize>());
    for (u, items) in ds.train.iter().enumerate() {
        for &i in items {
            triplets.push((u, ds.n_users + i, 1.0));
            triplets.push((ds.n_users + i, u, 1.0));
        }
    }
    let adj = CsrMatrix::from_triplets(n, n, triplets)?;
    for node in 0..n {
        if adj.row_entries(node).0.is_empty() {
            return Err(Error::ZeroDegreeNode { node });
        }
    }
    Ok(adj)
}

/// Normalizes a symmetric 0/1 zero-diagonal adjacency into
/// `D^{-1/2} A D^{-1/2}`, keeping the sparsity pattern.
pub fn build_laplacian(adj: &CsrMatrix<f64>) -> Result<NormalizedLaplacian> {
    let n = adj.n_rows();
    if adj.n_cols() != n {
        return Err(Error::Shape {
            context: "build_laplacian",
            expected: (n, n),
            got: (adj.n_rows(), adj.n_cols()),
        });
    }
    let degrees: Vec<usize> = (0..n).map(|r| adj.row_entries(r).0.len()).collect();
    if let Some(node) = degrees.iter().position(|&d| d == 0) {
        return Err(Error::ZeroDegreeNode { node });
    }
    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0usize);
    let mut cols = Vec::with_capacity(adj.nnz());
    let mut values = Vec::with_capacity(adj.nnz());
    for r in 0..n {
        for &c in adj.row_entries(r).0 {
            cols.push(c);
            values.push(1.0 / ((degrees[r] * degrees[c]) as f64).sqrt());
        }
        offsets.push(cols.len());
    }
    let lap = CsrMatrix::from_parts(n, n, offsets, cols, values)?;
    Ok(NormalizedLaplacian { lap, degrees })
}

pub fn laplacian_for(ds: &InteractionDataset) -> Result<NormalizedLaplacian> {
    build_laplacian(&build_adjacency(ds)?)
}

/// Keep-mask with exactly `floor(n_nodes * p2)` nodes marked dropped,
/// sampled uniformly without replacement.
pub fn sample_node_mask(n_nodes: usize, p2: f64, rng: &mut Rng) -> Vec<bool> {
    let n_drop = scaled_count(n_nodes, p2, Rounding::Down);
    let mut keep = vec![true; n_nodes];
    for idx in rng.sample_distinct(n_nodes, n_drop) {
        keep[idx] = false;
    }
    keep
}

/// Removes every entry whose row or column is a dropped node and rescales
/// the survivors by `1/(1 - p2)`. Dropping rows and columns together keeps
/// the matrix symmetric; the self-connection identity term is added outside
/// this matrix and is never dropped.
pub fn apply_node_mask(
    laplacian: &NormalizedLaplacian,
    keep: &[bool],
    p2: f64,
) -> Result<CsrMatrix<f64>> {
    laplacian.lap.masked_scaled(keep, 1.0 / (1.0 - p2))
}

pub fn node_dropout(
    laplacian: &NormalizedLaplacian,
    p2: f64,
    rng: &mut Rng,
) -> Result<CsrMatrix<f64>> {
    if !(0.0..1.0).contains(&p2) {
        return Err(Error::Config("node dropout rate must be in [0, 1)".into()));
    }
    if p2 == 0.0 {
        return Ok(laplacian.lap.clone());
    }
    let keep = sample_node_mask(laplacian.lap.n_rows(), p2, rng);
    apply_node_mask(laplacian, &keep, p2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::DenseMatrix;
    use alloc::string::ToString;

    fn dataset(n_users: usize, n_items: usize, train: Vec<Vec<usize>>) -> InteractionDataset {
        InteractionDataset {
            n_users,
            n_items,
            validation: vec![Vec::new(); n_users],
            test: vec![Vec::new(); n_users],
            user_map: (0..n_users).map(|u| (u.to_string(), u)).collect(),
            item_map: (0..n_items).map(|i| (i.to_string(), i)).collect(),
            train,
        }
    }

    #[test]
    fn single_edge_graph() {
        let ds = dataset(1, 1, vec![vec![0]]);
        let adj = build_adjacency(&ds).unwrap();
        assert_eq!(adj.to_dense().data(), &[0.0, 1.0, 1.0, 0.0]);
        let lap = build_laplacian(&adj).unwrap();
        assert_eq!(lap.lap.to_dense().data(), &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(lap.degrees, vec![1, 1]);
    }

    #[test]
    fn adjacency_has_two_entries_per_interaction() {
        let mut rng = Rng::new(4);
        let ds = InteractionDataset::random(6, 8, 0.4, &mut rng);
        let n_train: usize = ds.train.iter().map(Vec::len).sum();
        let adj = build_adjacency(&ds).unwrap();
        assert_eq!(adj.nnz(), 2 * n_train);
    }

    #[test]
    fn unreferenced_item_is_a_construction_error() {
        let ds = dataset(1, 2, vec![vec![0]]);
        match build_adjacency(&ds) {
            Err(Error::ZeroDegreeNode { node }) => assert_eq!(node, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn normalization_divides_by_root_degree_product() {
        // user 0 has degree 4; item 0 is only reached by user 0.
        let ds = dataset(4, 4, vec![vec![0, 1, 2, 3], vec![1], vec![2], vec![3]]);
        let lap = laplacian_for(&ds).unwrap();
        assert_eq!(lap.lap.get(0, 4), 0.5);
        assert_eq!(lap.lap.get(4, 0), 0.5);
    }

    #[test]
    fn laplacian_matches_dense_normalization_oracle() {
        let mut rng = Rng::new(20);
        let ds = InteractionDataset::random(20, 30, 0.15, &mut rng);
        let adj = build_adjacency(&ds).unwrap();
        let lap = build_laplacian(&adj).unwrap();
        let n = adj.n_rows();
        let dense = adj.to_dense();
        let mut oracle = DenseMatrix::<f64>::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                let v = dense.get(r, c)
                    / (lap.degrees[r] as f64).sqrt()
                    / (lap.degrees[c] as f64).sqrt();
                oracle.set(r, c, v);
            }
        }
        let got = lap.lap.to_dense();
        for (g, e) in got.data().iter().zip(oracle.data()) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn every_entry_is_exactly_the_degree_formula_and_in_unit_range() {
        let mut rng = Rng::new(8);
        let ds = InteractionDataset::random(9, 11, 0.3, &mut rng);
        let lap = laplacian_for(&ds).unwrap();
        for r in 0..lap.lap.n_rows() {
            let (cols, values) = lap.lap.row_entries(r);
            for (&c, &v) in cols.iter().zip(values) {
                assert_eq!(v, 1.0 / ((lap.degrees[r] * lap.degrees[c]) as f64).sqrt());
                assert!(v > 0.0 && v <= 1.0);
            }
        }
    }

    #[test]
    fn construction_is_deterministic() {
        let mut rng = Rng::new(13);
        let ds = InteractionDataset::random(10, 12, 0.25, &mut rng);
        assert_eq!(laplacian_for(&ds).unwrap(), laplacian_for(&ds).unwrap());
    }

    #[test]
    fn zero_rate_dropout_is_identity() {
        let ds = dataset(2, 2, vec![vec![0, 1], vec![0]]);
        let lap = laplacian_for(&ds).unwrap();
        let mut rng = Rng::new(1);
        assert_eq!(node_dropout(&lap, 0.0, &mut rng).unwrap(), lap.lap);
    }

    #[test]
    fn dropping_one_of_two_nodes_clears_the_matrix() {
        let ds = dataset(1, 1, vec![vec![0]]);
        let lap = laplacian_for(&ds).unwrap();
        let mut rng = Rng::new(2);
        let dropped = node_dropout(&lap, 0.5, &mut rng).unwrap();
        assert_eq!(dropped.nnz(), 0);
    }

    #[test]
    fn mask_drops_exactly_the_floor_count() {
        let mut rng = Rng::new(3);
        for n in [5usize, 10, 16] {
            let keep = sample_node_mask(n, 0.3, &mut rng);
            let dropped = keep.iter().filter(|&&k| !k).count();
            assert_eq!(dropped, (n as f64 * 0.3).floor() as usize);
        }
    }

    #[test]
    fn survivors_are_rescaled_and_victims_are_exactly_the_masked_set() {
        let mut rng = Rng::new(6);
        let ds = InteractionDataset::random(4, 4, 0.5, &mut rng);
        let lap = laplacian_for(&ds).unwrap();
        let p2 = 0.25;
        let keep = sample_node_mask(8, p2, &mut rng);
        let dropped = apply_node_mask(&lap, &keep, p2).unwrap();
        for r in 0..8 {
            let (cols, values) = lap.lap.row_entries(r);
            for (&c, &v) in cols.iter().zip(values) {
                let got = dropped.get(r, c);
                if keep[r] && keep[c] {
                    assert_eq!(got, v * (1.0 / (1.0 - p2)));
                } else {
                    assert_eq!(got, 0.0);
                }
            }
        }
    }

    // Under exact-count node dropout the survival probability of an entry is
    // P = (n-k)(n-k-1) / (n(n-1)) for k dropped of n nodes, so with the
    // 1/(1-p2) rescale the expected output entry is v * P / (1-p2). On 10
    // nodes with p2=0.3 (k=3) that is v * (7*6)/(10*9) / 0.7 = (2/3) v.
    #[test]
    fn dropout_expectation_matches_pair_survival_oracle() {
        let mut rng = Rng::new(123);
        let ds = InteractionDataset::random(4, 6, 0.5, &mut rng);
        let lap = laplacian_for(&ds).unwrap();
        let n = 10usize;
        let p2 = 0.3;
        let k = 3usize;
        let p_pair = ((n - k) * (n - k - 1)) as f64 / (n * (n - 1)) as f64;
        let scale = 1.0 / (1.0 - p2);
        let rounds = 10_000usize;

        let mut sums = DenseMatrix::<f64>::zeros(n, n);
        for _ in 0..rounds {
            let sample = node_dropout(&lap, p2, &mut rng).unwrap().to_dense();
            sums.add_assign(&sample).unwrap();
        }
        for r in 0..n {
            let (cols, values) = lap.lap.row_entries(r);
            for (&c, &v) in cols.iter().zip(values) {
                let mean = sums.get(r, c) / rounds as f64;
                let expected = v * scale * p_pair;
                let second_moment = (v * scale).powi(2) * p_pair;
                let sigma = ((second_moment - expected * expected) / rounds as f64).sqrt();
                assert!(
                    (mean - expected).abs() <= 3.0 * sigma,
                    "entry ({r},{c}): mean {mean}, expected {expected}, sigma {sigma}"
                );
            }
        }
    }
}
