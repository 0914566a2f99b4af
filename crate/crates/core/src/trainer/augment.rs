//! Training-time augmentation: random crop, horizontal flip and
//! per-channel affine jitter.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::negatives::LabeledScene;
use crate::scene::{Scene, MIN_SIDE};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub flip_prob: f64,
    pub crop_prob: f64,
    /// Smallest crop side as a fraction of the scene side.
    pub crop_min_fraction: f64,
    pub jitter_prob: f64,
    /// Channel gain drawn from `1 +- jitter_gain`.
    pub jitter_gain: f64,
    /// Channel offset drawn from `+- jitter_bias`.
    pub jitter_bias: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            flip_prob: 0.5,
            crop_prob: 0.5,
            crop_min_fraction: 0.75,
            jitter_prob: 0.8,
            jitter_gain: 0.1,
            jitter_bias: 0.05,
        }
    }
}

impl AugmentConfig {
    /// No augmentation at all.
    pub fn none() -> Self {
        Self {
            flip_prob: 0.0,
            crop_prob: 0.0,
            crop_min_fraction: 1.0,
            jitter_prob: 0.0,
            jitter_gain: 0.0,
            jitter_bias: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [self.flip_prob, self.crop_prob, self.jitter_prob];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(config_err("augmentation probabilities must lie in [0, 1]"));
        }
        if !(self.crop_min_fraction > 0.0 && self.crop_min_fraction <= 1.0) {
            return Err(config_err("crop_min_fraction must lie in (0, 1]"));
        }
        if self.jitter_gain < 0.0 || self.jitter_bias < 0.0 {
            return Err(config_err("jitter magnitudes must be non-negative"));
        }
        Ok(())
    }
}

/// Per-channel `clamp(gain * x + bias, 0, 1)`.
pub fn jitter<R: Rng>(scene: &Scene, gain: f64, bias: f64, rng: &mut R) -> Scene {
    let mut out = scene.clone();
    let plane = scene.pixel_count();
    for c in 0..scene.channels() {
        let g = 1.0 + rng.gen_range(-1.0..=1.0) * gain;
        let b = rng.gen_range(-1.0..=1.0) * bias;
        for v in &mut out.data_mut()[c * plane..(c + 1) * plane] {
            *v = (g * *v as f64 + b).clamp(0.0, 1.0) as f32;
        }
    }
    out
}

/// Applies crop, flip and jitter, each with its own probability.
pub fn augment<R: Rng>(item: &LabeledScene, config: &AugmentConfig, rng: &mut R) -> Result<LabeledScene> {
    let mut scene = item.scene.clone();
    let mut labels = item.labels.clone();
    if rng.gen_bool(config.crop_prob) {
        let (h, w) = (scene.height(), scene.width());
        let side = |n: usize, rng: &mut R| {
            let lo = ((n as f64 * config.crop_min_fraction).ceil() as usize).clamp(MIN_SIDE.min(n), n);
            rng.gen_range(lo..=n)
        };
        let ch = side(h, rng);
        let cw = side(w, rng);
        let r0 = rng.gen_range(0..=h - ch);
        let c0 = rng.gen_range(0..=w - cw);
        scene = scene.crop(r0, c0, ch, cw)?;
        labels = labels.crop(r0, c0, ch, cw);
    }
    if rng.gen_bool(config.flip_prob) {
        scene = scene.flipped();
        labels = labels.flipped();
    }
    if rng.gen_bool(config.jitter_prob) {
        scene = jitter(&scene, config.jitter_gain, config.jitter_bias, rng);
    }
    Ok(LabeledScene { scene, labels })
}
