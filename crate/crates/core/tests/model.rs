mod common;

use bans::datagen::{propagate, sample_noise, sample_values, MlggmParameters};
use bans::graph::{Edge, Independence, Layering};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn factorized_density_matches_joint_density() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let params = common::random_parameters(8, 0.4, &mut rng);
        let y = sample_values(&params, 1, &mut rng).unwrap();
        let y = DVector::from_iterator(params.p(), y.row(0).iter().copied());
        let joint = params.joint_log_density(&y).unwrap();
        let factored = params.factorized_log_density(&y).unwrap();
        assert!((joint - factored).abs() < 1e-8, "{joint} vs {factored}");
    }
}

#[test]
fn two_vertex_precision_is_exact() {
    let layering = Layering::from_sizes(&[1, 1]).unwrap();
    let b = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
    let params = MlggmParameters::new(layering, b, DMatrix::identity(2, 2)).unwrap();
    assert_eq!(params.precision(), DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 1.0]));
    assert_eq!(params.graph().edges().iter().copied().collect::<Vec<_>>(), vec![Edge::directed(0, 1)]);
}

#[test]
fn empirical_covariance_matches_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let graph = bans::datagen::random_chain_graph(&bans::datagen::GenConfig::scenario(6, 0, 2, 0.5), &mut rng).unwrap();
    let params = bans::datagen::sample_parameters(&graph, &Default::default(), &mut rng).unwrap();
    let sigma = params.covariance().unwrap();
    let draws = 100_000;
    let y = sample_values(&params, draws, &mut rng).unwrap();
    let empirical = y.transpose() * &y / draws as f64;
    for i in 0..6 {
        for j in 0..=i {
            let se = ((sigma[(i, i)] * sigma[(j, j)] + sigma[(i, j)].powi(2)) / draws as f64).sqrt();
            let z = (empirical[(i, j)] - sigma[(i, j)]) / se;
            assert!(z.abs() < 3.0, "entry ({i},{j}): empirical {} model {} z {z}", empirical[(i, j)], sigma[(i, j)]);
        }
    }
}

#[test]
fn missing_edges_give_zero_partial_correlations() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut checked = 0;
    for _ in 0..20 {
        let params = common::random_parameters(8, 0.4, &mut rng);
        for statement in params.graph().implied_independencies() {
            let rho = params.partial_correlation(&statement).unwrap();
            assert!(rho.abs() < 1e-10, "{statement:?}: {rho}");
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn present_edges_are_detectably_dependent() {
    let layering = Layering::from_sizes(&[2, 2]).unwrap();
    let mut b = DMatrix::zeros(4, 4);
    b[(2, 0)] = 0.8;
    let mut k = DMatrix::identity(4, 4);
    k[(2, 3)] = 0.4;
    k[(3, 2)] = 0.4;
    let params = MlggmParameters::new(layering, b, k).unwrap();
    let directed = Independence { a: 0, b: 2, given: vec![1] };
    let undirected = Independence { a: 2, b: 3, given: vec![0, 1] };
    assert!(params.partial_correlation(&directed).unwrap().abs() > 0.1);
    assert!(params.partial_correlation(&undirected).unwrap().abs() > 0.1);
}

#[test]
fn ancestral_sampling_splits_into_noise_and_propagation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let params = common::random_parameters(8, 0.4, &mut rng);
    let y = sample_values(&params, 20, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let noise = sample_noise(&params, 20, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    assert_eq!(propagate(&params, &noise).unwrap(), y);
    let resid = &y - &y * params.b().transpose();
    assert!(common::max_abs_diff(&resid, &noise) < 1e-12);
}

#[test]
fn generator_is_equivariant_under_within_layer_relabeling() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..20 {
        let params = common::random_parameters(8, 0.5, &mut rng);
        let perm = common::within_layer_permutation(params.layering(), &mut rng);
        let permuted = common::permute_parameters(&params, &perm);

        let noise = sample_noise(&params, 50, &mut rng).unwrap();
        let y = propagate(&params, &noise).unwrap();
        let y_perm = propagate(&permuted, &common::permute_columns(&noise, &perm)).unwrap();
        assert!(common::max_abs_diff(&common::permute_columns(&y, &perm), &y_perm) < 1e-12);

        let omega = common::permute_matrix(&params.precision(), &perm);
        assert!(common::max_abs_diff(&omega, &permuted.precision()) < 1e-12);
        let sigma = common::permute_matrix(&params.covariance().unwrap(), &perm);
        assert!(common::max_abs_diff(&sigma, &permuted.covariance().unwrap()) < 1e-10);

        let row = DVector::from_iterator(params.p(), y.row(0).iter().copied());
        let row_perm = DVector::from_iterator(params.p(), y_perm.row(0).iter().copied());
        let d = params.joint_log_density(&row).unwrap() - permuted.joint_log_density(&row_perm).unwrap();
        assert!(d.abs() < 1e-10);

        let relabel = |e: Edge| match e {
            Edge::Directed { from, to } => Edge::directed(perm[from], perm[to]),
            Edge::Undirected(u, v) => Edge::undirected(perm[u], perm[v]),
        };
        let edges: std::collections::BTreeSet<_> = params.graph().edges().iter().map(|&e| relabel(e)).collect();
        assert_eq!(&edges, permuted.graph().edges());
        for statement in params.graph().implied_independencies() {
            let mut given: Vec<_> = statement.given.iter().map(|&v| perm[v]).collect();
            given.sort_unstable();
            let moved = Independence { a: perm[statement.a], b: perm[statement.b], given };
            let d = params.partial_correlation(&statement).unwrap() - permuted.partial_correlation(&moved).unwrap();
            assert!(d.abs() < 1e-10);
        }
    }
}
