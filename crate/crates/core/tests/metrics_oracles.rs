mod common;

use common::{ap_exhaustive, auroc_pairs, fpr_count, maxf_brute, quantized_instance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synet::embedding::FeatureMap;
use synet::eval::{
    auroc, average_precision, object_centric_fpr, overlap_coefficient, pixel_metrics, similarity_histograms, similarity_map,
    threshold_grid, HISTOGRAM_BINS,
};
use synet::mat::Mat;

#[test]
fn auroc_and_ap_match_exhaustive_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..60 {
        let n = rng.gen_range(5..80);
        let (s, g) = quantized_instance(&mut rng, n);
        assert!((auroc(&s, &g).unwrap() - auroc_pairs(&s, &g)).abs() < 1e-12);
        assert!((average_precision(&s, &g).unwrap() - ap_exhaustive(&s, &g)).abs() < 1e-12);
    }
}

#[test]
fn maxf_matches_a_brute_force_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..30 {
        let (s, g) = quantized_instance(&mut rng, 50);
        let m = pixel_metrics(&s, &g).unwrap();
        assert!((m.maxf - maxf_brute(&s, &g, &threshold_grid())).abs() < 1e-12);
        assert!((m.fnr - (1.0 - m.rec)).abs() < 1e-12);
    }
}

#[test]
fn perfectly_separated_and_constant_scores() {
    let s = [0.9, 0.8, 0.7, 0.2, 0.1];
    let g = [true, true, true, false, false];
    assert_eq!(auroc(&s, &g).unwrap(), 1.0);
    assert_eq!(average_precision(&s, &g).unwrap(), 1.0);
    let flat = [0.5; 5];
    assert_eq!(auroc(&flat, &g).unwrap(), 0.5);
    assert!((average_precision(&flat, &g).unwrap() - 0.6).abs() < 1e-15);
    assert!(matches!(auroc(&s, &[true; 5]), Err(synet::Error::SingleClassGroundTruth)));
}

#[test]
fn object_fpr_counts_and_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let scores: Vec<Vec<f64>> = (0..4).map(|_| (0..30).map(|_| rng.gen()).collect()).collect();
    let masks: Vec<Vec<bool>> = (0..4).map(|_| (0..30).map(|_| rng.gen_bool(0.3)).collect()).collect();
    let sr: Vec<&[f64]> = scores.iter().map(|v| v.as_slice()).collect();
    let mr: Vec<&[bool]> = masks.iter().map(|v| v.as_slice()).collect();
    let grid = threshold_grid();
    let curve = object_centric_fpr(&sr, &mr, &grid).unwrap();
    for (t, f) in grid.iter().zip(&curve.fpr) {
        assert_eq!(*f, fpr_count(&scores, &masks, *t));
    }
    assert!(curve.fpr.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(curve.fpr[0], 1.0);
    let empty = vec![false; 30];
    assert!(matches!(object_centric_fpr(&[&scores[0]], &[&empty], &grid), Err(synet::Error::EmptyNegativeRegion)));
}

#[test]
fn histograms_and_overlap() {
    let g = [true, true, false, false];
    let (p, q) = similarity_histograms(&[0.5, 0.5, 0.5, 0.5], &g).unwrap();
    assert_eq!(overlap_coefficient(&p, &q), 1.0);
    let (p, q) = similarity_histograms(&[0.99, 1.0, 0.0, 0.01], &g).unwrap();
    assert_eq!(p[HISTOGRAM_BINS - 1], 1.0);
    assert_eq!(q[0], 1.0);
    assert_eq!(overlap_coefficient(&p, &q), 0.0);
    // bin edges
    let (p, _) = similarity_histograms(&[1.0 / 64.0, 2.0 / 64.0 - 1e-12, 0.0, 0.0], &g).unwrap();
    assert_eq!(p[1], 1.0);

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (s, g) = quantized_instance(&mut rng, 200);
    let (p, q) = similarity_histograms(&s, &g).unwrap();
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let ov = overlap_coefficient(&p, &q);
    assert!((0.0..=1.0).contains(&ov));
    assert_eq!(ov, overlap_coefficient(&q, &p));
    assert!((overlap_coefficient(&[0.2, 0.8], &[0.6, 0.4]) - 0.6).abs() < 1e-15);
}

#[test]
fn similarity_map_endpoints() {
    let fm = FeatureMap {
        height: 1,
        width: 3,
        vectors: Mat::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0]], 2),
        degenerate: vec![],
    };
    assert_eq!(similarity_map(&fm, &[2.0, 0.0]).unwrap().scores, vec![1.0, 0.0, 0.5]);
    assert!(matches!(similarity_map(&fm, &[0.0, 0.0]), Err(synet::Error::Config(_))));
}
