//! Acceptance suite: one test per ship gate, each printing a single
//! `criterion N: PASS/FAIL` line with the measured evidence.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use ngcf_core::dataset::InteractionDataset;
use ngcf_core::eval::{ndcg_at_k, rank_items, recall_at_k};
use ngcf_core::graph::{laplacian_for, NormalizedLaplacian};
use ngcf_core::model::{
    forward_eval, forward_with_plan, init_params, param_count, DropoutPlan, ModelConfig,
    ModelParams, Propagation, SvdppCoeff, Variant,
};
use ngcf_core::numeric::{DenseMatrix, Rng};
use ngcf_core::training::{grad_check, FitResult, RegMode, TrainConfig, Trainer};

fn verdict(n: usize, pass: bool, detail: &str) {
    println!("criterion {n}: {} - {detail}", if pass { "PASS" } else { "FAIL" });
}

// ---------------------------------------------------------------------------
// 1. Analytic gradients vs central finite differences, all propagation
//    variants, five seeds each.

#[test]
fn gradients_match_finite_differences_for_every_variant() {
    let started = Instant::now();
    let seeds = [11u64, 23, 37, 41, 59];
    let mut worst = 0.0f64;
    let mut all_passed = true;
    for variant in [Variant::Ngcf, Variant::Svdpp, Variant::Gcmc, Variant::Pinsage] {
        let layer_dims = match variant {
            Variant::Svdpp => vec![5],
            _ => vec![5, 5, 5],
        };
        let model_cfg =
            ModelConfig { variant, embed_dim: 5, layer_dims, ..ModelConfig::default() };
        for seed in seeds {
            let report = grad_check(&model_cfg, &TrainConfig::default(), seed).unwrap();
            worst = worst.max(report.max_rel_err);
            all_passed &= report.passed && report.max_rel_err < 1e-4;
        }
    }
    // The regularizer that flows through the backward pass gets its own pass.
    let ngcf = ModelConfig { embed_dim: 5, layer_dims: vec![5, 5, 5], ..ModelConfig::default() };
    let batch_reg =
        TrainConfig { reg_mode: RegMode::BatchEmbeddings, ..TrainConfig::default() };
    for seed in seeds {
        let report = grad_check(&ngcf, &batch_reg, seed).unwrap();
        worst = worst.max(report.max_rel_err);
        all_passed &= report.passed && report.max_rel_err < 1e-4;
    }
    let elapsed = started.elapsed();
    let pass = all_passed && elapsed < Duration::from_secs(60);
    verdict(
        1,
        pass,
        &format!("max relative error {worst:.2e} over 4 variants x 5 seeds in {elapsed:.1?}"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 2. Matrix-form forward equals a literal per-node recursion.

/// Per-node reference: for each node, aggregate neighbors entry by entry,
/// add the self term, apply the two transforms, activate. Written against
/// plain vectors so it shares nothing with the library kernels.
fn per_node_forward(
    ds: &InteractionDataset,
    lap: &NormalizedLaplacian,
    params: &ModelParams<f64>,
    cfg: &ModelConfig,
) -> Vec<Vec<f64>> {
    let n = ds.n_users + ds.n_items;
    let mut layers: Vec<Vec<Vec<f64>>> =
        vec![(0..n).map(|a| params.e0.row(a).to_vec()).collect()];
    for (l, weights) in params.layers.iter().enumerate() {
        let prev = &layers[l];
        let din = weights.w1.n_rows();
        let dout = weights.w1.n_cols();
        let mut cur = vec![vec![0.0f64; dout]; n];
        for a in 0..n {
            let (cols, vals) = lap.lap.row_entries(a);
            let mut agg = vec![0.0f64; din];
            for (&b, &w) in cols.iter().zip(vals) {
                for k in 0..din {
                    agg[k] += w * prev[b][k];
                }
            }
            for j in 0..dout {
                let mut z = 0.0;
                for k in 0..din {
                    z += (prev[a][k] + agg[k]) * weights.w1.get(k, j);
                    if let Some(w2) = &weights.w2 {
                        z += agg[k] * prev[a][k] * w2.get(k, j);
                    }
                }
                cur[a][j] = if z >= 0.0 { z } else { cfg.leaky_slope * z };
            }
        }
        layers.push(cur);
    }
    (0..n)
        .map(|a| layers.iter().flat_map(|layer| layer[a].iter().copied()).collect())
        .collect()
}

#[test]
fn matrix_forward_equals_per_node_recursion() {
    let started = Instant::now();
    let mut max_diff = 0.0f64;
    for g in 0..20u64 {
        let n_users = 3 + (g as usize * 2) % 17;
        let n_items = 4 + (g as usize * 3) % 19;
        let edge_prob = 0.25 + 0.02 * g as f64;
        let mut rng = Rng::new(1000 + g);
        let ds = InteractionDataset::random(n_users, n_items, edge_prob, &mut rng);
        let lap = laplacian_for(&ds).unwrap();
        let cfg = ModelConfig {
            embed_dim: 4,
            layer_dims: vec![4, 3, 2],
            ..ModelConfig::default()
        };
        let params: ModelParams<f64> =
            init_params(&cfg, n_users, n_items, &mut rng).unwrap();
        let prop = Propagation::build(&cfg, &lap, n_users).unwrap();
        let estar = forward_eval(&params, &cfg, &prop).unwrap().estar;
        let oracle = per_node_forward(&ds, &lap, &params, &cfg);
        assert_eq!(estar.n_cols(), oracle[0].len());
        for a in 0..n_users + n_items {
            for (j, &want) in oracle[a].iter().enumerate() {
                max_diff = max_diff.max((estar.get(a, j) - want).abs());
            }
        }
    }
    let elapsed = started.elapsed();
    let pass = max_diff < 1e-10 && elapsed < Duration::from_secs(60);
    verdict(
        2,
        pass,
        &format!("max |matrix - per-node| = {max_diff:.2e} over 20 graphs in {elapsed:.1?}"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 3. The one-hop variant matches its closed form, and zeroing the item-side
//    coefficients recovers the plain-item-embedding special case.

fn toy_dataset() -> InteractionDataset {
    InteractionDataset {
        n_users: 2,
        n_items: 3,
        train: vec![vec![0, 1], vec![1, 2]],
        validation: vec![vec![], vec![]],
        test: vec![vec![], vec![]],
        user_map: (0..2).map(|u| (u.to_string(), u)).collect(),
        item_map: (0..3).map(|i| (i.to_string(), i)).collect(),
    }
}

/// Closed-form one-hop profile: each node's base embedding plus the
/// coefficient-weighted sum of its neighbors' base embeddings, with the
/// coefficient rule chosen per side.
fn svdpp_direct(
    ds: &InteractionDataset,
    params: &ModelParams<f64>,
    user_mode: SvdppCoeff,
    item_mode: SvdppCoeff,
) -> Vec<Vec<f64>> {
    let n_users = ds.n_users;
    let d = params.e0.n_cols();
    let user_deg: Vec<usize> = ds.train.iter().map(Vec::len).collect();
    let mut item_deg = vec![0usize; ds.n_items];
    let mut item_neighbors: Vec<Vec<usize>> = vec![Vec::new(); ds.n_items];
    for (u, items) in ds.train.iter().enumerate() {
        for &i in items {
            item_deg[i] += 1;
            item_neighbors[i].push(u);
        }
    }
    let coeff = |mode: SvdppCoeff, own_deg: usize, other_deg: usize| -> f64 {
        match mode {
            SvdppCoeff::Laplacian => 1.0 / ((own_deg * other_deg) as f64).sqrt(),
            SvdppCoeff::InvSqrtDegree => 1.0 / (own_deg as f64).sqrt(),
            SvdppCoeff::Zero => 0.0,
        }
    };
    let mut rows = Vec::new();
    for u in 0..n_users {
        let mut row = params.e0.row(u).to_vec();
        for &i in &ds.train[u] {
            let c = coeff(user_mode, user_deg[u], item_deg[i]);
            for k in 0..d {
                row[k] += c * params.e0.get(n_users + i, k);
            }
        }
        rows.push(row);
    }
    for i in 0..ds.n_items {
        let mut row = params.e0.row(n_users + i).to_vec();
        for &u in &item_neighbors[i] {
            let c = coeff(item_mode, item_deg[i], user_deg[u]);
            for k in 0..d {
                row[k] += c * params.e0.get(u, k);
            }
        }
        rows.push(row);
    }
    rows
}

#[test]
fn one_hop_variant_matches_its_closed_form() {
    let ds = toy_dataset();
    let lap = laplacian_for(&ds).unwrap();
    let mut max_diff = 0.0f64;
    let mut fism_exact = true;
    for (user_mode, item_mode) in [
        (SvdppCoeff::Laplacian, SvdppCoeff::Laplacian),
        (SvdppCoeff::InvSqrtDegree, SvdppCoeff::InvSqrtDegree),
        (SvdppCoeff::Laplacian, SvdppCoeff::Zero),
    ] {
        let cfg = ModelConfig {
            variant: Variant::Svdpp,
            embed_dim: 4,
            layer_dims: vec![4],
            svdpp_user_coeff: user_mode,
            svdpp_item_coeff: item_mode,
            ..ModelConfig::default()
        };
        let mut rng = Rng::new(33);
        let params: ModelParams<f64> =
            init_params(&cfg, ds.n_users, ds.n_items, &mut rng).unwrap();
        let prop = Propagation::build(&cfg, &lap, ds.n_users).unwrap();
        let estar = forward_eval(&params, &cfg, &prop).unwrap().estar;
        let direct = svdpp_direct(&ds, &params, user_mode, item_mode);
        for u in 0..ds.n_users {
            for i in 0..ds.n_items {
                let got = ngcf_core::model::predict(&estar, ds.n_users, u, i);
                let want: f64 = direct[u]
                    .iter()
                    .zip(&direct[ds.n_users + i])
                    .map(|(a, b)| a * b)
                    .sum();
                max_diff = max_diff.max((got - want).abs());
            }
        }
        if item_mode == SvdppCoeff::Zero {
            // Item profiles must collapse to the raw base embeddings.
            for i in 0..ds.n_items {
                fism_exact &= estar.row(ds.n_users + i) == params.e0.row(ds.n_users + i);
            }
        }
    }
    let pass = max_diff < 1e-12 && fism_exact;
    verdict(
        3,
        pass,
        &format!(
            "max |model - closed form| = {max_diff:.2e}; zero item coefficients leave item rows bit-identical: {fism_exact}"
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 4. Parameter accounting at the reference scale.

#[test]
fn parameter_counts_are_exact_at_reference_scale() {
    let cfg = ModelConfig {
        embed_dim: 64,
        layer_dims: vec![64, 64, 64],
        ..ModelConfig::default()
    };
    let (base, extra) = param_count(&cfg, 29_858, 40_981);
    let pass = base == 4_533_696 && extra == 24_576;
    verdict(4, pass, &format!("base {base}, extra {extra} (want 4533696 and 24576)"));
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 5. Ranking metrics vs brute-force formula evaluation.

#[test]
fn ranking_metrics_match_brute_force_on_random_instances() {
    let mut rng = Rng::new(777);
    let mut max_diff = 0.0f64;
    for _ in 0..1000 {
        let n_items = 5 + rng.next_below(56);
        let k = 1 + rng.next_below(n_items);
        // A coarse grid forces score ties, exercising the index tie-break.
        let scores: Vec<f64> =
            (0..n_items).map(|_| rng.next_below(40) as f64 / 8.0).collect();
        let n_test = 1 + rng.next_below(n_items.min(10));
        let mut test_items = rng.sample_distinct(n_items, n_test);
        test_items.sort_unstable();

        // Brute-force side: full argsort, then the textbook formulas.
        let mut order: Vec<usize> = (0..n_items).collect();
        order.sort_by(|&a, &b| {
            scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b))
        });
        let brute_topk: Vec<usize> = order[..k].to_vec();
        let hits = brute_topk.iter().filter(|i| test_items.contains(i)).count();
        let brute_recall = hits as f64 / test_items.len() as f64;
        let mut dcg = 0.0;
        for (rank, item) in brute_topk.iter().enumerate() {
            if test_items.contains(item) {
                dcg += 1.0 / ((rank + 2) as f64).log2();
            }
        }
        let mut idcg = 0.0;
        for rank in 0..brute_topk.len().min(test_items.len()) {
            idcg += 1.0 / ((rank + 2) as f64).log2();
        }
        let brute_ndcg = if idcg > 0.0 { dcg / idcg } else { 0.0 };

        // Library side, driven through the public ranking entry point with a
        // one-dimensional representation whose item rows are the scores.
        let mut data = vec![1.0f64];
        data.extend_from_slice(&scores);
        let estar = DenseMatrix::from_vec(1 + n_items, 1, data).unwrap();
        let ds = InteractionDataset {
            n_users: 1,
            n_items,
            train: vec![vec![]],
            validation: vec![vec![]],
            test: vec![test_items.clone()],
            user_map: std::iter::once(("0".to_string(), 0)).collect(),
            item_map: (0..n_items).map(|i| (i.to_string(), i)).collect(),
        };
        let topk = rank_items(&estar, &ds, 0, k, false);
        assert_eq!(topk, brute_topk, "selection order diverged");
        max_diff = max_diff.max((recall_at_k(&topk, &test_items) - brute_recall).abs());
        max_diff = max_diff.max((ndcg_at_k(&topk, &test_items) - brute_ndcg).abs());
    }
    let pass = max_diff < 1e-12;
    verdict(5, pass, &format!("max metric difference {max_diff:.2e} over 1000 instances"));
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 6. Directional experiment at desk scale: three propagation layers beat
//    plain matrix factorization, and get to MF's best level sooner.

fn run_desk_variant(
    ds: &InteractionDataset,
    lap: &NormalizedLaplacian,
    variant: Variant,
) -> FitResult {
    let (layer_dims, message_dropout) = match variant {
        Variant::Mf => (vec![], 0.0),
        _ => (vec![32, 32, 32], 0.1),
    };
    let model_cfg = ModelConfig {
        variant,
        embed_dim: 32,
        layer_dims,
        message_dropout,
        ..ModelConfig::default()
    };
    let train_cfg = TrainConfig {
        lr: 1e-3,
        batch_size: 2048,
        max_epochs: 120,
        patience: 10,
        track_test: true,
        seed: 7,
        ..TrainConfig::default()
    };
    let mut trainer =
        Trainer::<f32>::new(model_cfg, train_cfg, lap, ds.n_users, ds.n_items).unwrap();
    trainer
        .fit(ds, |r| {
            println!(
                "  {variant:>7} epoch {:>3}  loss {:.4}  val {:.4}  test {:.4}",
                r.epoch,
                r.train_loss,
                r.val_recall,
                r.test_recall.unwrap()
            );
        })
        .unwrap()
}

#[test]
fn propagation_beats_matrix_factorization_at_desk_scale() {
    let started = Instant::now();
    let ds = common::ml100k_like();
    let (n_train, n_valid, n_test) = ds.counts();
    println!(
        "  corpus: {} users, {} items, {n_train} train / {n_valid} valid / {n_test} test",
        ds.n_users, ds.n_items
    );
    let lap = laplacian_for(&ds).unwrap();

    let mf = run_desk_variant(&ds, &lap, Variant::Mf);
    let ngcf = run_desk_variant(&ds, &lap, Variant::Ngcf);

    let mf_best_test = mf.curve[mf.best_epoch - 1].test_recall.unwrap();
    let ngcf_best_test = ngcf.curve[ngcf.best_epoch - 1].test_recall.unwrap();
    let epochs_to_reach = ngcf
        .curve
        .iter()
        .find(|r| r.test_recall.unwrap() >= mf_best_test)
        .map(|r| r.epoch);

    let elapsed = started.elapsed();
    let beats = ngcf_best_test > mf_best_test;
    let faster = epochs_to_reach.is_some_and(|e| e < mf.best_epoch);
    let pass = beats && faster && elapsed < Duration::from_secs(30 * 60);
    verdict(
        6,
        pass,
        &format!(
            "test recall@20 {ngcf_best_test:.4} (3 layers, epoch {}) vs {mf_best_test:.4} (mf, epoch {}); \
             reached mf's best after {:?} epochs; {elapsed:.0?} total",
            ngcf.best_epoch, mf.best_epoch, epochs_to_reach
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 7. With a linear activation, train-mode output is an unbiased estimate of
//    the eval-mode output under message dropout.

#[test]
fn message_dropout_is_unbiased_under_linear_activation() {
    let mut rng = Rng::new(4242);
    let ds = InteractionDataset::random(4, 6, 0.5, &mut rng);
    let lap = laplacian_for(&ds).unwrap();
    let cfg = ModelConfig {
        embed_dim: 4,
        layer_dims: vec![4, 4],
        leaky_slope: 1.0,
        message_dropout: 0.25,
        ..ModelConfig::default()
    };
    let params: ModelParams<f64> = init_params(&cfg, 4, 6, &mut rng).unwrap();
    let prop = Propagation::build(&cfg, &lap, 4).unwrap();
    let reference = forward_eval(&params, &cfg, &prop).unwrap().estar;

    let rounds = 10_000usize;
    let n_entries = reference.n_rows() * reference.n_cols();
    let mut sums = vec![0.0f64; n_entries];
    let mut sq_sums = vec![0.0f64; n_entries];
    for _ in 0..rounds {
        let plan = DropoutPlan::sample(&prop, &cfg, &mut rng).unwrap();
        let estar = forward_with_plan(&params, &cfg, &plan, false).unwrap().estar;
        for (e, &x) in estar.data().iter().enumerate() {
            sums[e] += x;
            sq_sums[e] += x * x;
        }
    }

    let mut max_z = 0.0f64;
    let mut all_within = true;
    for e in 0..n_entries {
        let mean = sums[e] / rounds as f64;
        let var = (sq_sums[e] / rounds as f64 - mean * mean).max(0.0) * rounds as f64
            / (rounds - 1) as f64;
        let sigma = (var / rounds as f64).sqrt();
        let diff = (mean - reference.data()[e]).abs();
        if sigma < 1e-13 {
            // Layer-0 block: never masked, so the draws are all identical.
            all_within &= diff < 1e-12;
        } else {
            max_z = max_z.max(diff / sigma);
            all_within &= diff <= 3.0 * sigma;
        }
    }
    verdict(
        7,
        all_within,
        &format!(
            "{rounds} mask draws on a 10-node graph: worst entry at {max_z:.2} sigma (limit 3)"
        ),
    );
    assert!(all_within);
}

// ---------------------------------------------------------------------------
// 8. Long-run reproduction is documented as a script, not gated here.

#[test]
fn long_run_reproduction_script_is_documented() {
    let script = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scripts/reproduce_gowalla.sh");
    let pass = script.is_file();
    verdict(
        8,
        pass,
        "full-scale reproduction documented in scripts/reproduce_gowalla.sh (run manually; not CI-gated)",
    );
    assert!(pass);
}

/// Full-scale reproduction; hours of compute. Point NGCF_GOWALLA_RAW at the
/// raw `user<TAB>item` check-in file and run with --ignored.
#[test]
#[ignore]
fn gowalla_reproduction_with_real_data() {
    let raw_path = std::env::var("NGCF_GOWALLA_RAW").expect("set NGCF_GOWALLA_RAW");
    let raw = ngcf_cli::dataio::read_raw(
        Path::new(&raw_path),
        ngcf_core::dataset::InputFormat::EdgeList,
    )
    .unwrap();
    let filtered = ngcf_core::dataset::k_core_filter(&raw, 10).unwrap();
    let ds = ngcf_core::dataset::split(&filtered, 0.8, 0.1, 2020).unwrap();
    let lap = laplacian_for(&ds).unwrap();
    let model_cfg = ModelConfig {
        embed_dim: 64,
        layer_dims: vec![64, 64, 64],
        message_dropout: 0.1,
        ..ModelConfig::default()
    };
    let train_cfg = TrainConfig { track_test: false, ..TrainConfig::default() };
    let mut trainer =
        Trainer::<f32>::new(model_cfg, train_cfg, &lap, ds.n_users, ds.n_items).unwrap();
    trainer
        .fit(&ds, |r| println!("epoch {:>3} loss {:.4} val {:.4}", r.epoch, r.train_loss, r.val_recall))
        .unwrap();
    let report = ngcf_core::eval::evaluate_all(
        &trainer.params,
        &trainer.model_cfg,
        &trainer.prop,
        &ds,
        &ngcf_core::eval::EvalConfig::default(),
    )
    .unwrap();
    println!("recall@20 {:.4}, ndcg@20 {:.4}", report.recall[0], report.ndcg[0]);
    assert!((report.recall[0] - 0.1569).abs() <= 0.008);
    assert!((report.ndcg[0] - 0.1327).abs() <= 0.008);
}

// ---------------------------------------------------------------------------
// 9. Deterministic mode: identical config and seed give byte-identical run
//    artifacts through the binary.

#[test]
fn deterministic_training_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let raw = common::synthetic_raw(150, 120, 40, 31);
    let raw_path = dir.path().join("raw.tsv");
    common::write_edge_list(&raw, &raw_path);

    let data_dir = dir.path().join("data");
    let status = Command::new(env!("CARGO_BIN_EXE_ngcf"))
        .args([
            "prepare",
            "--input",
            raw_path.to_str().unwrap(),
            "--k-core",
            "5",
            "--seed",
            "3",
            "--out-dir",
            data_dir.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());

    let train = |out: &Path| {
        let status = Command::new(env!("CARGO_BIN_EXE_ngcf"))
            .args([
                "train",
                "--data-dir",
                data_dir.to_str().unwrap(),
                "--out-dir",
                out.to_str().unwrap(),
                "--variant",
                "ngcf",
                "--embed-dim",
                "8",
                "--layers",
                "8,8",
                "--batch-size",
                "512",
                "--epochs",
                "4",
                "--patience",
                "4",
                "--seed",
                "9",
                "--track-test",
                "--deterministic",
            ])
            .status()
            .unwrap();
        assert!(status.success());
    };
    let run_a = dir.path().join("a");
    let run_b = dir.path().join("b");
    train(&run_a);
    train(&run_b);

    let mut pass = true;
    let mut detail = String::new();
    for name in ["model.ckpt", "curve.csv", "report.json", "report.csv"] {
        let a = std::fs::read(run_a.join(name)).unwrap();
        let b = std::fs::read(run_b.join(name)).unwrap();
        let same = a == b;
        pass &= same;
        detail.push_str(&format!("{name} {}; ", if same { "identical" } else { "DIFFERS" }));
    }
    verdict(9, pass, detail.trim_end_matches("; "));
    assert!(pass);
}
