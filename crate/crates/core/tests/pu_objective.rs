mod common;

use common::{basis, cos, gaussian, unit};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use synet::losses::{
    combined_neg_loss, lort_base_loss, neg_center_loss, pu_targets, repulsion_loss, responsibility_loss, sinkhorn_targets,
    softmax_responsibilities, total_pu_loss, CenterBank, PuConfig, PuInputs, SinkhornConfig, TargetMatrix,
};
use synet::mat::Mat;

fn rows(m: &Mat) -> Vec<Vec<f64>> {
    m.iter_rows().map(|r| r.to_vec()).collect()
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = mx + logits.iter().map(|l| (l - mx).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

/// Plain-domain Sinkhorn with scaling vectors, run for a fixed number of sweeps.
fn sinkhorn_oracle(f: &Mat, c: &Mat, eps: f64, sweeps: usize) -> Vec<Vec<f64>> {
    let (n, k) = (f.rows(), c.rows());
    let kern: Vec<Vec<f64>> = rows(f).iter().map(|fi| rows(c).iter().map(|cj| (-(1.0 - cos(fi, cj)) / eps).exp()).collect()).collect();
    let mut u = vec![1.0; n];
    let mut v = vec![1.0; k];
    for _ in 0..sweeps {
        for i in 0..n {
            u[i] = 1.0 / (0..k).map(|j| kern[i][j] * v[j]).sum::<f64>();
        }
        for j in 0..k {
            v[j] = (n as f64 / k as f64) / (0..n).map(|i| kern[i][j] * u[i]).sum::<f64>();
        }
    }
    (0..n)
        .map(|i| {
            let row: Vec<f64> = (0..k).map(|j| u[i] * kern[i][j] * v[j]).collect();
            let s: f64 = row.iter().sum();
            row.iter().map(|x| x / s).collect()
        })
        .collect()
}

#[test]
fn softmax_two_centers() {
    let f = Mat::from_rows(&[basis(2, 0)], 2);
    let c = Mat::from_rows(&[basis(2, 0), basis(2, 1)], 2);
    let t = softmax_responsibilities(&f, &c, 1.0).unwrap();
    assert!((t.row(0)[0] - 0.7311).abs() < 1e-4);
    assert!((t.row(0)[1] - 0.2689).abs() < 1e-4);
    let eq = Mat::from_rows(&[basis(5, 4)], 5);
    let c4 = Mat::from_rows(&(0..4).map(|i| basis(5, i)).collect::<Vec<_>>(), 5);
    assert!(softmax_responsibilities(&eq, &c4, 0.55).unwrap().row(0).iter().all(|&x| (x - 0.25).abs() < 1e-15));
}

#[test]
fn sinkhorn_symmetric_case_is_half() {
    let f = Mat::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0]], 2);
    let c = Mat::from_rows(&[basis(2, 0), basis(2, 1)], 2);
    let out = sinkhorn_targets(&f, &c, &SinkhornConfig::default()).unwrap();
    for r in out.targets.as_mat().iter_rows() {
        assert!(r.iter().all(|&x| (x - 0.5).abs() < 1e-12));
    }
}

#[test]
fn sinkhorn_column_sums_and_oracle() {
    let f = Mat::from_rows(&[vec![1.0, 0.1], vec![0.9, 0.2], vec![0.1, 1.0], vec![0.3, 0.8]], 2);
    let c = Mat::from_rows(&[basis(2, 0), basis(2, 1)], 2);
    let cfg = SinkhornConfig { epsilon: 0.05, iters: 400_000, tol: 1e-15 };
    let out = sinkhorn_targets(&f, &c, &cfg).unwrap();
    for j in 0..2 {
        let col: f64 = out.plan.iter_rows().map(|r| r[j]).sum();
        assert!((col - 2.0).abs() < 1e-9);
    }
    let oracle = sinkhorn_oracle(&f, &c, 0.05, 400_000);
    for (a, b) in out.targets.as_mat().iter_rows().zip(&oracle) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-10, "{x} vs {y}");
        }
    }
    assert!(out.targets.row(0)[0] > 0.9 && out.targets.row(2)[1] > 0.9);
}

#[test]
fn sinkhorn_needs_enough_features() {
    let f = Mat::from_rows(&[basis(3, 0)], 3);
    let c = Mat::from_rows(&[basis(3, 0), basis(3, 1)], 3);
    assert!(matches!(sinkhorn_targets(&f, &c, &SinkhornConfig::default()), Err(synet::Error::Config(_))));
}

#[test]
fn uniform_targets_cost_ln_k() {
    let f = Mat::from_rows(&[basis(5, 4), basis(5, 4), basis(5, 4)], 5);
    let c = Mat::from_rows(&(0..4).map(|i| basis(5, i)).collect::<Vec<_>>(), 5);
    let l = neg_center_loss(&f, &c, &TargetMatrix::uniform(3, 4), 0.55).unwrap();
    assert!((l.value - 4f64.ln()).abs() < 1e-12);
}

#[test]
fn one_hot_target_value() {
    let f = Mat::from_rows(&[basis(2, 0)], 2);
    let c = Mat::from_rows(&[basis(2, 0), basis(2, 1)], 2);
    let t = TargetMatrix::new(Mat::from_vec(1, 2, vec![1.0, 0.0])).unwrap();
    assert!((neg_center_loss(&f, &c, &t, 1.0).unwrap().value - 0.3133).abs() < 1e-4);
}

#[test]
fn self_targets_give_entropy_and_bound_other_targets() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let f = gaussian(9, 5, &mut rng);
    let c = gaussian(4, 5, &mut rng);
    let p = softmax_responsibilities(&f, &c, 0.55).unwrap();
    let self_ce = neg_center_loss(&f, &c, &p, 0.55).unwrap().value;
    assert!((self_ce - p.mean_entropy()).abs() < 1e-12);
    assert!((responsibility_loss(&f, &c, 0.55).unwrap().value - p.mean_entropy()).abs() < 1e-12);
    // any other target costs at least the entropy
    let q = softmax_responsibilities(&gaussian(9, 5, &mut rng), &c, 0.3).unwrap();
    assert!(neg_center_loss(&f, &c, &q, 0.55).unwrap().value >= self_ce - 1e-12);
}

#[test]
fn combined_weights() {
    assert!((combined_neg_loss(0.4, 0.8, 0.5, 0.5).unwrap() - 0.6).abs() < 1e-15);
    assert!(combined_neg_loss(0.4, 0.8, 0.7, 0.7).is_err());
}

#[test]
fn repulsion_values_and_monotonicity() {
    let pos = basis(4, 3);
    let orth = Mat::from_rows(&[basis(4, 0), basis(4, 1), basis(4, 2)], 4);
    assert_eq!(repulsion_loss(&orth, &pos, 0.1).unwrap().value, 0.0);
    // two centers at cosine 0.5 to the positive and to each other
    // one center at cosine 0.5 to the positive, one orthogonal to it
    let a = unit(&[3f64.sqrt(), 0.0, 1.0]);
    let v = repulsion_loss(&Mat::from_rows(&[a, basis(3, 1)], 3), &basis(3, 2), 0.0).unwrap().value;
    assert!((v - 2f64.ln() * 0.5).abs() < 1e-12);
    assert!((v - 0.3466).abs() < 1e-4);
    let mut last = f64::NEG_INFINITY;
    for step in 0..10 {
        let t = step as f64 / 10.0;
        let near = Mat::from_rows(&[unit(&[1.0 - t, 0.0, 0.5 + t]), unit(&[0.0, 1.0, 0.0])], 3);
        let v = repulsion_loss(&near, &basis(3, 2), 0.1).unwrap().value;
        assert!(v > last);
        last = v;
    }
}

struct BaseCase {
    pos: Mat,
    unl: Mat,
    view_a: Mat,
    view_b: Mat,
    centers: CenterBank,
}

fn base_case(seed: u64) -> BaseCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    BaseCase {
        pos: gaussian(4, 5, &mut rng),
        unl: gaussian(6, 5, &mut rng),
        view_a: gaussian(3, 5, &mut rng),
        view_b: gaussian(3, 5, &mut rng),
        centers: CenterBank::random(5, 4, 2, &mut rng),
    }
}

#[test]
fn base_objective_term_by_term() {
    let case = base_case(9);
    let cfg = PuConfig::default();
    let inputs = PuInputs {
        positive: &case.pos,
        unlabeled: &case.unl,
        synthetic: &Mat::zeros(0, 5),
        views: Some((&case.view_a, &case.view_b)),
        unlabeled_view: None,
    };
    let targets = pu_targets(&inputs, &case.centers, &cfg).unwrap();
    let loss = lort_base_loss(&inputs, &case.centers, &targets, &cfg).unwrap();
    let t = cfg.temperature;

    let cp = unit(&case.centers.c_pos);
    let occ = rows(&case.pos).iter().map(|f| unit(f).iter().zip(&cp).map(|(a, b)| (a - b).powi(2)).sum::<f64>()).sum::<f64>() / 4.0;

    let protos = rows(&case.centers.prototypes);
    let mut ce = 0.0;
    for f in rows(&case.unl) {
        let logits: Vec<f64> = protos.iter().map(|p| cos(&f, p) / t).collect();
        let lp = log_softmax(&logits);
        let q: Vec<f64> = lp.iter().map(|x| x.exp()).collect();
        ce -= q.iter().zip(&lp).map(|(a, b)| a * b).sum::<f64>();
    }
    ce /= 6.0;

    let (a, b) = (rows(&case.view_a), rows(&case.view_b));
    let s = |i: usize, j: usize| cos(&a[i], &b[j]) / t;
    let mut nce = 0.0;
    for i in 0..3 {
        nce -= log_softmax(&(0..3).map(|j| s(i, j)).collect::<Vec<_>>())[i];
        nce -= log_softmax(&(0..3).map(|j| s(j, i)).collect::<Vec<_>>())[i];
    }
    nce /= 6.0;

    assert!((loss.terms.l_occ - occ).abs() < 1e-12);
    assert!((loss.terms.l_ce - ce).abs() < 1e-12);
    assert!((loss.terms.l_simclr - nce).abs() < 1e-12);
    assert!((loss.terms.total - (0.5 * occ + 0.5 * ce + nce)).abs() < 1e-12);
}

#[test]
fn pure_clustering_mix_ignores_the_positive_center() {
    let case = base_case(10);
    let cfg = PuConfig { tau_mix: 1.0, ..PuConfig::default() };
    let inputs = PuInputs { positive: &case.pos, unlabeled: &case.unl, synthetic: &Mat::zeros(0, 5), views: None, unlabeled_view: None };
    let targets = pu_targets(&inputs, &case.centers, &cfg).unwrap();
    let a = lort_base_loss(&inputs, &case.centers, &targets, &cfg).unwrap();
    let mut moved = case.centers.clone();
    moved.c_pos = vec![0.3, -1.0, 2.0, 0.1, 0.0];
    let b = lort_base_loss(&inputs, &moved, &targets, &cfg).unwrap();
    assert_eq!(a.terms.total, b.terms.total);
    assert!(b.grad.centers.c_pos.iter().all(|&x| x == 0.0));
}

fn full_inputs(seed: u64) -> (Mat, Mat, Mat, CenterBank) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (gaussian(6, 5, &mut rng), gaussian(12, 5, &mut rng), gaussian(4, 5, &mut rng), CenterBank::random(5, 4, 3, &mut rng))
}

#[test]
fn zero_weights_reduce_to_the_base_objective_exactly() {
    let (p, u, s, c) = full_inputs(11);
    let inputs = PuInputs { positive: &p, unlabeled: &u, synthetic: &s, views: None, unlabeled_view: None };
    let cfg = PuConfig { lambda_neg: 0.0, lambda_rep: 0.0, ..PuConfig::default() };
    let targets = pu_targets(&inputs, &c, &cfg).unwrap();
    let full = total_pu_loss(&inputs, &c, &targets, &cfg).unwrap();
    let base = lort_base_loss(&inputs, &c, &targets, &cfg).unwrap();
    assert_eq!(full.terms.total.to_bits(), base.terms.total.to_bits());
    assert_eq!(full.grad.positive, base.grad.positive);
    assert_eq!(full.grad.unlabeled, base.grad.unlabeled);
    assert_eq!(full.grad.centers, base.grad.centers);
}

#[test]
fn total_is_the_weighted_sum_of_its_terms() {
    let (p, u, s, c) = full_inputs(12);
    let inputs = PuInputs { positive: &p, unlabeled: &u, synthetic: &s, views: None, unlabeled_view: None };
    let cfg = PuConfig::default();
    let targets = pu_targets(&inputs, &c, &cfg).unwrap();
    let t = total_pu_loss(&inputs, &c, &targets, &cfg).unwrap().terms;
    let expect = t.l_lort + cfg.lambda_neg * (cfg.lambda_n * t.l_neg_syn + cfg.lambda_u * t.l_neg_unl) + cfg.lambda_rep * t.l_rep;
    assert!((t.total - expect).abs() < 1e-12);
    assert!(t.l_neg_syn > 0.0 && t.l_neg_unl > 0.0 && t.l_rep > 0.0);
}

#[test]
fn defaults() {
    let c = PuConfig::default();
    assert_eq!((c.temperature, c.gamma, c.lambda_n, c.lambda_u), (0.55, 0.1, 0.5, 0.5));
    let t = synet::trainer::TrainConfig::pu();
    assert_eq!(t.neg_centers, 4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn features_are_scale_invariant(seed in 0u64..1_000, scale in 0.01f64..100.0) {
        let (p, u, s, c) = full_inputs(seed);
        let cfg = PuConfig::default();
        let scaled = |m: &Mat| { let mut m = m.clone(); m.scale(scale); m };
        let (p2, u2, s2) = (scaled(&p), scaled(&u), scaled(&s));
        let a_in = PuInputs { positive: &p, unlabeled: &u, synthetic: &s, views: None, unlabeled_view: None };
        let b_in = PuInputs { positive: &p2, unlabeled: &u2, synthetic: &s2, views: None, unlabeled_view: None };
        let ta = pu_targets(&a_in, &c, &cfg).unwrap();
        let tb = pu_targets(&b_in, &c, &cfg).unwrap();
        let a = total_pu_loss(&a_in, &c, &ta, &cfg).unwrap().terms.total;
        let b = total_pu_loss(&b_in, &c, &tb, &cfg).unwrap().terms.total;
        prop_assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
    }
}
