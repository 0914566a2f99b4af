//! End-to-end helpers: labeled dataset generation, evaluation sets with
//! composed negatives, and whole-set scoring.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{
    ground_truth, object_centric_fpr, overlap_coefficient, pixel_metrics, similarity_histograms, similarity_map,
    threshold_grid, FprCurve, MetricsReport,
};
use crate::negatives::{inject_dataset, CompositionRecord, InjectionConfig, LabeledScene};
use crate::scene::{generate_scene, make_labels, simulate_trajectory, Label, LabelMode, SceneConfig};
use crate::trainer::{train, Model, TrainConfig, TrainOutput};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub scene: SceneConfig,
    pub footprint_halfwidth: usize,
    /// Pixels farther than this from the footprint become low-confidence negatives.
    pub min_distance: f64,
    /// Fresh scene seeds tried when no trajectory fits.
    pub attempts: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            scene: SceneConfig::default(),
            footprint_halfwidth: 2,
            min_distance: 10.0,
            attempts: 8,
        }
    }
}

fn scene_seed(seed: u64, index: usize, attempt: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((index as u64) << 8) | attempt as u64);
    rng.next_u64()
}

/// One labeled scene; retries with fresh seeds if no corridor admits a trajectory.
pub fn generate_labeled(seed: u64, index: usize, config: &DataConfig) -> Result<LabeledScene> {
    let mut last = Error::NoTraversableCorridor;
    for attempt in 0..config.attempts.max(1) {
        let s = scene_seed(seed, index, attempt);
        let scene = generate_scene(&config.scene, s)?;
        match simulate_trajectory(&scene, s, config.footprint_halfwidth) {
            Ok(traj) => {
                let labels = make_labels(&scene, &traj, LabelMode::Pn { min_distance: config.min_distance })?;
                return Ok(LabeledScene { scene, labels });
            }
            Err(e @ Error::NoTraversableCorridor) => last = e,
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

/// `n` labeled scenes (PN labels; the PU branch reads low-confidence negatives as unlabeled).
pub fn generate_dataset(n: usize, seed: u64, config: &DataConfig) -> Result<Vec<LabeledScene>> {
    (0..n).into_par_iter().map(|i| generate_labeled(seed, i, config)).collect()
}

/// `n` labeled scenes of which `round(ratio * n)` carry composed negatives.
pub fn generate_injected(
    n: usize,
    seed: u64,
    config: &DataConfig,
    ratio: f64,
    injection: &InjectionConfig,
) -> Result<(Vec<LabeledScene>, Vec<CompositionRecord>)> {
    let clean = generate_dataset(n, seed, config)?;
    let inj = inject_dataset(&clean, ratio, seed ^ 0x4556_414c, injection)?;
    Ok((inj.scenes, inj.records))
}

/// Held-out scenes that all carry composed negatives.
pub fn generate_eval_set(
    n: usize,
    seed: u64,
    config: &DataConfig,
    injection: &InjectionConfig,
) -> Result<(Vec<LabeledScene>, Vec<CompositionRecord>)> {
    generate_injected(n, seed, config, 1.0, injection)
}

/// Pooled evaluation of one model over a scene set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub metrics: MetricsReport,
    pub fpr_curve: FprCurve,
    pub density_pos: Vec<f64>,
    pub density_neg: Vec<f64>,
    pub overlap: f64,
}

/// Score maps for every scene, in order.
pub fn score_scenes(model: &Model, scenes: &[LabeledScene]) -> Result<Vec<Vec<f64>>> {
    scenes
        .par_iter()
        .map(|s| Ok(similarity_map(&model.features(&s.scene)?, &model.centers.c_pos)?.scores))
        .collect()
}

/// Pixel metrics, histograms and overlap over all pixels, plus the
/// object-centric FPR over synthetic-negative pixels.
pub fn evaluate_scores(scenes: &[LabeledScene], scores: &[Vec<f64>]) -> Result<EvalSummary> {
    let mut all_scores = Vec::new();
    let mut all_gt = Vec::new();
    let mut masks = Vec::with_capacity(scenes.len());
    for (s, sc) in scenes.iter().zip(scores) {
        all_scores.extend_from_slice(sc);
        all_gt.extend(ground_truth(s));
        masks.push(s.labels.labels.iter().map(|&l| l == Label::NegSynthetic).collect::<Vec<bool>>());
    }
    let metrics = pixel_metrics(&all_scores, &all_gt)?;
    let score_refs: Vec<&[f64]> = scores.iter().map(|s| s.as_slice()).collect();
    let mask_refs: Vec<&[bool]> = masks.iter().map(|m| m.as_slice()).collect();
    let fpr_curve = object_centric_fpr(&score_refs, &mask_refs, &threshold_grid())?;
    let (density_pos, density_neg) = similarity_histograms(&all_scores, &all_gt)?;
    let overlap = overlap_coefficient(&density_pos, &density_neg);
    Ok(EvalSummary {
        metrics,
        fpr_curve,
        density_pos,
        density_neg,
        overlap,
    })
}

pub fn evaluate_model(model: &Model, scenes: &[LabeledScene]) -> Result<EvalSummary> {
    let scores = score_scenes(model, scenes)?;
    evaluate_scores(scenes, &scores)
}

/// One trained configuration and its held-out evaluation.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub config: TrainConfig,
    pub output: TrainOutput,
    pub summary: EvalSummary,
}

pub fn train_and_evaluate(train_set: &[LabeledScene], eval_set: &[LabeledScene], config: &TrainConfig) -> Result<RunResult> {
    let output = train(train_set, config)?;
    let summary = evaluate_model(&output.model, eval_set)?;
    Ok(RunResult {
        config: config.clone(),
        output,
        summary,
    })
}

/// Baseline and full objective trained from the same data and seed.
pub fn compare_with_baseline(
    train_set: &[LabeledScene],
    eval_set: &[LabeledScene],
    config: &TrainConfig,
) -> Result<(RunResult, RunResult)> {
    let base = train_and_evaluate(train_set, eval_set, &config.clone().baseline())?;
    let full = train_and_evaluate(train_set, eval_set, config)?;
    Ok((base, full))
}

pub const ABLATION_RATIOS: [f64; 4] = [0.0, 0.1, 0.2, 0.5];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationPoint {
    pub setting: String,
    pub ratio: f64,
    pub low_quality_fraction: f64,
    pub auroc: f64,
    pub overlap: f64,
}

impl AblationPoint {
    fn from_run(setting: String, run: &RunResult) -> Self {
        Self {
            setting,
            ratio: run.config.injection_ratio,
            low_quality_fraction: run.config.injection.proposal.low_quality_fraction,
            auroc: run.summary.metrics.auroc,
            overlap: run.summary.overlap,
        }
    }
}

pub const ABLATION_HEADER: &str = "setting,ratio,low_quality_fraction,auroc,overlap";

pub fn ablation_csv(points: &[AblationPoint]) -> String {
    let mut out = format!("{ABLATION_HEADER}\n");
    for p in points {
        out.push_str(&format!("{},{},{},{},{}\n", p.setting, p.ratio, p.low_quality_fraction, p.auroc, p.overlap));
    }
    out
}

/// Trains once per injection ratio. A zero ratio means no synthetic
/// negatives at all, so it runs the baseline objective.
pub fn ratio_ablation(
    train_set: &[LabeledScene],
    eval_set: &[LabeledScene],
    config: &TrainConfig,
    ratios: &[f64],
) -> Result<Vec<(AblationPoint, RunResult)>> {
    ratios
        .iter()
        .map(|&ratio| {
            let mut c = config.clone();
            c.injection_ratio = ratio;
            if ratio == 0.0 {
                c = c.baseline();
            }
            let run = train_and_evaluate(train_set, eval_set, &c)?;
            Ok((AblationPoint::from_run(format!("ratio_{ratio}"), &run), run))
        })
        .collect()
}

/// Trains once per LOW-quality fraction of the injected negatives.
pub fn quality_ablation(
    train_set: &[LabeledScene],
    eval_set: &[LabeledScene],
    config: &TrainConfig,
    low_fractions: &[f64],
) -> Result<Vec<(AblationPoint, RunResult)>> {
    low_fractions
        .iter()
        .map(|&low| {
            let mut c = config.clone();
            c.injection.proposal.low_quality_fraction = low;
            let run = train_and_evaluate(train_set, eval_set, &c)?;
            Ok((AblationPoint::from_run(format!("low_{low}"), &run), run))
        })
        .collect()
}
