//! Scoring and metrics: similarity maps, pixel-wise ranking metrics,
//! object-centric FPR sweeps and score histograms.

use serde::{Deserialize, Serialize};

use crate::embedding::FeatureMap;
use crate::error::{config_err, Error, Result};
use crate::mat::{dot, unit_vector};
use crate::negatives::LabeledScene;
use crate::scene::Label;

pub const HISTOGRAM_BINS: usize = 64;
pub const THRESHOLD_STEPS: usize = 256;

/// Per-pixel traversability scores in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMap {
    pub height: usize,
    pub width: usize,
    pub scores: Vec<f64>,
}

/// `(cos(f, c_pos) + 1) / 2` per pixel.
pub fn similarity_map(features: &FeatureMap, c_pos: &[f64]) -> Result<ScoreMap> {
    let Some(c) = unit_vector(c_pos) else {
        return Err(config_err("positive reference is the zero vector"));
    };
    if c.len() != features.dim() {
        return Err(config_err("positive reference does not match the feature dimension"));
    }
    let scores = features
        .vectors
        .iter_rows()
        .map(|f| ((dot(f, &c) + 1.0) / 2.0).clamp(0.0, 1.0))
        .collect();
    Ok(ScoreMap {
        height: features.height,
        width: features.width,
        scores,
    })
}

/// Evaluation ground truth: traversable terrain that is not a synthetic object.
pub fn ground_truth(item: &LabeledScene) -> Vec<bool> {
    item.scene
        .terrain()
        .iter()
        .zip(&item.labels.labels)
        .map(|(t, &l)| t.is_traversable() && l != Label::NegSynthetic)
        .collect()
}

/// `THRESHOLD_STEPS` evenly spaced thresholds covering `[0, 1]`.
pub fn threshold_grid() -> Vec<f64> {
    (0..THRESHOLD_STEPS).map(|i| i as f64 / (THRESHOLD_STEPS - 1) as f64).collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub auroc: f64,
    pub maxf: f64,
    pub ap: f64,
    pub pre: f64,
    pub rec: f64,
    pub fpr: f64,
    pub fnr: f64,
}

impl MetricsReport {
    pub const HEADER: &'static str = "auroc,maxf,ap,pre,rec,fpr,fnr";

    pub fn to_csv(&self) -> String {
        format!(
            "{}\n{},{},{},{},{},{},{}\n",
            Self::HEADER,
            self.auroc,
            self.maxf,
            self.ap,
            self.pre,
            self.rec,
            self.fpr,
            self.fnr
        )
    }
}

fn check_classes(scores: &[f64], gt: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != gt.len() {
        return Err(config_err("scores and ground truth differ in length"));
    }
    let pos = gt.iter().filter(|&&g| g).count();
    let neg = gt.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClassGroundTruth);
    }
    Ok((pos, neg))
}

/// Indices sorted by descending score, with runs of equal scores.
fn tie_groups(scores: &[f64]) -> (Vec<usize>, Vec<(usize, usize)>) {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut groups = Vec::new();
    let mut start = 0;
    for i in 1..=idx.len() {
        if i == idx.len() || scores[idx[i]] != scores[idx[start]] {
            groups.push((start, i));
            start = i;
        }
    }
    (idx, groups)
}

/// Mann–Whitney AUROC with ties counted as one half.
pub fn auroc(scores: &[f64], gt: &[bool]) -> Result<f64> {
    let (pos, neg) = check_classes(scores, gt)?;
    let (idx, groups) = tie_groups(scores);
    // walking from the top, count negatives strictly above each positive
    let mut neg_above = 0usize;
    let mut wins = 0.0;
    for (a, b) in groups {
        let p = idx[a..b].iter().filter(|&&i| gt[i]).count();
        let n = (b - a) - p;
        wins += p as f64 * (neg - neg_above - n) as f64 + 0.5 * (p * n) as f64;
        neg_above += n;
    }
    Ok(wins / (pos as f64 * neg as f64))
}

/// `sum_k (R_k - R_{k-1}) P_k` over distinct score thresholds, descending.
pub fn average_precision(scores: &[f64], gt: &[bool]) -> Result<f64> {
    let (pos, _) = check_classes(scores, gt)?;
    let (idx, groups) = tie_groups(scores);
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut ap = 0.0;
    for (a, b) in groups {
        let p = idx[a..b].iter().filter(|&&i| gt[i]).count();
        tp += p;
        seen += b - a;
        ap += (p as f64 / pos as f64) * (tp as f64 / seen as f64);
    }
    Ok(ap)
}

/// Confusion counts for the rule `score >= t`.
fn confusion(scores: &[f64], gt: &[bool], t: f64) -> (usize, usize, usize, usize) {
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&s, &g) in scores.iter().zip(gt) {
        match (s >= t, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    (tp, fp, tn, fn_)
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// AUROC, AP and the MaxF operating point over the threshold grid.
pub fn pixel_metrics(scores: &[f64], gt: &[bool]) -> Result<MetricsReport> {
    let auroc = auroc(scores, gt)?;
    let ap = average_precision(scores, gt)?;
    let mut best = MetricsReport {
        auroc,
        ap,
        maxf: -1.0,
        ..Default::default()
    };
    for t in threshold_grid() {
        let (tp, fp, tn, fn_) = confusion(scores, gt, t);
        let pre = ratio(tp, tp + fp);
        let rec = ratio(tp, tp + fn_);
        let f = if pre + rec > 0.0 { 2.0 * pre * rec / (pre + rec) } else { 0.0 };
        if f > best.maxf {
            best.maxf = f;
            best.pre = pre;
            best.rec = rec;
            best.fpr = ratio(fp, fp + tn);
            best.fnr = ratio(fn_, fn_ + tp);
        }
    }
    Ok(best)
}

/// Fraction of false positives per threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FprCurve {
    pub thresholds: Vec<f64>,
    pub fpr: Vec<f64>,
}

impl FprCurve {
    pub const HEADER: &'static str = "threshold,fpr";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::HEADER);
        for (t, f) in self.thresholds.iter().zip(&self.fpr) {
            out.push_str(&format!("{t},{f}\n"));
        }
        out
    }

    /// FPR at the grid point nearest to `t`.
    pub fn at(&self, t: f64) -> f64 {
        let i = self
            .thresholds
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        self.fpr[i]
    }
}

/// Pooled over scenes: the share of masked pixels scoring `>= t`, per threshold.
pub fn object_centric_fpr(scores: &[&[f64]], masks: &[&[bool]], thresholds: &[f64]) -> Result<FprCurve> {
    if scores.len() != masks.len() {
        return Err(config_err("one mask per score map is required"));
    }
    if thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(config_err("thresholds must be strictly ascending"));
    }
    let mut inside: Vec<f64> = Vec::new();
    for (s, m) in scores.iter().zip(masks) {
        if s.len() != m.len() {
            return Err(config_err("score map and mask differ in size"));
        }
        inside.extend(s.iter().zip(m.iter()).filter(|(_, &k)| k).map(|(&v, _)| v));
    }
    if inside.is_empty() {
        return Err(Error::EmptyNegativeRegion);
    }
    inside.sort_by(f64::total_cmp);
    let n = inside.len() as f64;
    let fpr = thresholds
        .iter()
        .map(|&t| {
            let below = inside.partition_point(|&v| v < t);
            (inside.len() - below) as f64 / n
        })
        .collect();
    Ok(FprCurve {
        thresholds: thresholds.to_vec(),
        fpr,
    })
}

fn bin_of(s: f64) -> usize {
    ((s * HISTOGRAM_BINS as f64).floor().max(0.0) as usize).min(HISTOGRAM_BINS - 1)
}

/// Normalized 64-bin histograms of the positive and negative scores.
pub fn similarity_histograms(scores: &[f64], gt: &[bool]) -> Result<(Vec<f64>, Vec<f64>)> {
    let (pos, neg) = check_classes(scores, gt)?;
    let mut hp = vec![0.0; HISTOGRAM_BINS];
    let mut hn = vec![0.0; HISTOGRAM_BINS];
    for (&s, &g) in scores.iter().zip(gt) {
        if g {
            hp[bin_of(s)] += 1.0;
        } else {
            hn[bin_of(s)] += 1.0;
        }
    }
    hp.iter_mut().for_each(|v| *v /= pos as f64);
    hn.iter_mut().for_each(|v| *v /= neg as f64);
    Ok((hp, hn))
}

pub const HISTOGRAM_HEADER: &str = "bin_lo,bin_hi,p_pos,p_neg";

pub fn histogram_csv(p_pos: &[f64], p_neg: &[f64]) -> String {
    let mut out = format!("{HISTOGRAM_HEADER}\n");
    let n = p_pos.len();
    for i in 0..n {
        out.push_str(&format!("{},{},{},{}\n", i as f64 / n as f64, (i + 1) as f64 / n as f64, p_pos[i], p_neg[i]));
    }
    out
}

/// `sum_bins min(p, q)`.
pub fn overlap_coefficient(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| a.min(*b)).sum()
}
