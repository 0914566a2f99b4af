#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use synet::mat::Mat;
use synet::negatives::LabeledScene;
use synet::pipeline::{generate_labeled, DataConfig};

pub fn labeled(seed: u64) -> LabeledScene {
    generate_labeled(seed, 0, &DataConfig::default()).unwrap()
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat {
    let data = (0..rows * cols).map(|_| StandardNormal.sample(&mut *rng)).collect();
    Mat::from_vec(rows, cols, data)
}

pub fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

pub fn cos(a: &[f64], b: &[f64]) -> f64 {
    let (a, b) = (unit(a), unit(b));
    a.iter().zip(&b).map(|(x, y)| x * y).sum()
}

pub fn basis(d: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    v[i] = 1.0;
    v
}

/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Largest relative error between the analytic gradient and central
/// differences at `coords` random coordinates.
pub fn fd_check<F>(params: &[f64], coords: usize, h: f64, rng: &mut ChaCha8Rng, f: F) -> f64
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let (_, g) = f(params);
    assert_eq!(g.len(), params.len());
    let mut worst: f64 = 0.0;
    let mut p = params.to_vec();
    for _ in 0..coords {
        let i = rng.gen_range(0..params.len());
        p[i] = params[i] + h;
        let up = f(&p).0;
        p[i] = params[i] - h;
        let down = f(&p).0;
        p[i] = params[i];
        worst = worst.max(rel_err(g[i], (up - down) / (2.0 * h)));
    }
    worst
}

/// AUROC by counting every positive/negative pair; ties count one half.
pub fn auroc_pairs(scores: &[f64], gt: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        if !gt[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if gt[j] {
                continue;
            }
            pairs += 1.0;
            wins += if si > sj { 1.0 } else if si == sj { 0.5 } else { 0.0 };
        }
    }
    wins / pairs
}

/// Precision and recall for `score >= t`, by recounting.
pub fn pr_at(scores: &[f64], gt: &[bool], t: f64) -> (f64, f64) {
    let tp = scores.iter().zip(gt).filter(|(&s, &g)| g && s >= t).count() as f64;
    let fp = scores.iter().zip(gt).filter(|(&s, &g)| !g && s >= t).count() as f64;
    let pos = gt.iter().filter(|&&g| g).count() as f64;
    let pre = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    (pre, tp / pos)
}

/// Step-wise AP over every distinct score used as a threshold.
pub fn ap_exhaustive(scores: &[f64], gt: &[bool]) -> f64 {
    let mut ts = scores.to_vec();
    ts.sort_by(|a, b| b.total_cmp(a));
    ts.dedup();
    let mut last_rec = 0.0;
    let mut ap = 0.0;
    for t in ts {
        let (pre, rec) = pr_at(scores, gt, t);
        ap += (rec - last_rec) * pre;
        last_rec = rec;
    }
    ap
}

/// Best F1 over the given thresholds.
pub fn maxf_brute(scores: &[f64], gt: &[bool], thresholds: &[f64]) -> f64 {
    thresholds
        .iter()
        .map(|&t| {
            let (p, r) = pr_at(scores, gt, t);
            if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 }
        })
        .fold(0.0, f64::max)
}

/// Share of masked pixels, pooled over scenes, with `score >= t`.
pub fn fpr_count(scores: &[Vec<f64>], masks: &[Vec<bool>], t: f64) -> f64 {
    let (mut hit, mut total) = (0usize, 0usize);
    for (s, m) in scores.iter().zip(masks) {
        for (v, &k) in s.iter().zip(m) {
            if k {
                total += 1;
                hit += (*v >= t) as usize;
            }
        }
    }
    hit as f64 / total as f64
}

/// Scores on a 1/20 lattice (so ties are common) with both classes present.
pub fn quantized_instance(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<bool>) {
    loop {
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..=20) as f64 / 20.0).collect();
        let gt: Vec<bool> = scores.iter().map(|&s| rng.gen::<f64>() < 0.3 + 0.4 * s).collect();
        if gt.iter().any(|&g| g) && gt.iter().any(|&g| !g) {
            return (scores, gt);
        }
    }
}

/// Runs the CLI in `dir` and returns its exit code.
pub fn synet(dir: &std::path::Path, args: &[&str]) -> i32 {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_synet"))
        .args(args)
        .current_dir(dir)
        .env_remove("SYNET_SEED")
        .output()
        .expect("spawn synet");
    if !out.status.success() {
        eprintln!("synet {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    out.status.code().unwrap_or(-1)
}

/// Every file under `dir`, as (relative path, bytes), sorted by path.
pub fn snapshot(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    fn walk(root: &std::path::Path, dir: &std::path::Path, out: &mut Vec<(String, Vec<u8>)>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}
