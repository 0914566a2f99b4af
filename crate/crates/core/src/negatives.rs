//! Procedural synthetic negatives: region selection, object rendering,
//! filtering, and composition into a scene with an exact pixel mask.
//!
//! The pipeline mirrors select ROI -> render -> filter (repeat on failure)
//! -> blend. Rendering is procedural, so the mask is exact by construction.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::scene::{value_noise, Label, LabelMask, Scene, PALETTE_SEED};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectClass {
    Blob,
    Box,
    Post,
    Clutter,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 4] = [ObjectClass::Blob, ObjectClass::Box, ObjectClass::Post, ObjectClass::Clutter];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quality {
    High,
    Low,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roi {
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
}

impl Roi {
    pub fn area(&self) -> usize {
        self.height * self.width
    }

    fn check_inside(&self, scene: &Scene) -> Result<()> {
        if self.height == 0
            || self.width == 0
            || self.row + self.height > scene.height()
            || self.col + self.width > scene.width()
        {
            return Err(Error::OutOfBounds {
                row: self.row,
                col: self.col,
                height: self.height,
                width: self.width,
                scene_height: scene.height(),
                scene_width: scene.width(),
            });
        }
        Ok(())
    }
}

/// A rendered object that passed the filters.
#[derive(Clone, Debug, PartialEq)]
pub struct NegativeProposal {
    pub roi: Roi,
    pub object_class: ObjectClass,
    /// `C x roi.height x roi.width`, plane-major.
    pub patch: Vec<f32>,
    /// `roi.height x roi.width`, row-major.
    pub mask: Vec<bool>,
    pub quality: Quality,
    /// Renders rejected before this one was accepted.
    pub retries: usize,
}

impl NegativeProposal {
    pub fn area(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub area_min: usize,
    pub area_max: usize,
    pub min_components: usize,
    pub max_components: usize,
    pub max_retries: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            area_min: 12,
            area_max: 400,
            min_components: 1,
            max_components: 4,
            max_retries: 8,
        }
    }
}

impl FilterConfig {
    /// Accepts every render.
    pub fn vacuous(max_retries: usize) -> Self {
        Self {
            area_min: 0,
            area_max: usize::MAX,
            min_components: 0,
            max_components: usize::MAX,
            max_retries,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.area_min > self.area_max {
            return Err(config_err("area_min must not exceed area_max"));
        }
        if self.min_components > self.max_components {
            return Err(config_err("min_components must not exceed max_components"));
        }
        Ok(())
    }

    pub fn accepts(&self, mask: &[bool], height: usize, width: usize) -> bool {
        let area = mask.iter().filter(|&&m| m).count();
        if area < self.area_min || area > self.area_max {
            return false;
        }
        let comps = count_components(mask, height, width);
        comps >= self.min_components && comps <= self.max_components
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProposalConfig {
    pub filters: FilterConfig,
    /// ROI side lengths are drawn from `[roi_min, roi_max]`.
    pub roi_min: usize,
    pub roi_max: usize,
    /// Probability that a proposal is degraded to LOW quality.
    pub low_quality_fraction: f64,
    /// Scale of the per-class appearance shift applied on top of the scene.
    pub object_contrast: f64,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        Self {
            filters: FilterConfig::default(),
            roi_min: 6,
            roi_max: 16,
            low_quality_fraction: 0.0,
            object_contrast: 1.0,
        }
    }
}

/// Number of 4-connected foreground components.
pub fn count_components(mask: &[bool], height: usize, width: usize) -> usize {
    let mut seen = vec![false; mask.len()];
    let mut stack = Vec::new();
    let mut count = 0;
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(p) = stack.pop() {
            let (r, c) = (p / width, p % width);
            let mut visit = |q: usize| {
                if mask[q] && !seen[q] {
                    seen[q] = true;
                    stack.push(q);
                }
            };
            if r > 0 {
                visit(p - width);
            }
            if r + 1 < height {
                visit(p + width);
            }
            if c > 0 {
                visit(p - 1);
            }
            if c + 1 < width {
                visit(p + 1);
            }
        }
    }
    count
}

/// Per-channel appearance shift of each object class relative to the
/// surface it stands on.
fn object_signature(channel: usize) -> [f64; 4] {
    let mut rng = ChaCha8Rng::seed_from_u64(!PALETTE_SEED ^ (channel as u64).wrapping_mul(0x2545_F491));
    [(); 4].map(|_| {
        let magnitude = rng.gen_range(0.05..0.30);
        if rng.gen_bool(0.5) {
            magnitude
        } else {
            -magnitude
        }
    })
}

fn render_mask<R: Rng>(rng: &mut R, class: ObjectClass, h: usize, w: usize) -> Vec<bool> {
    let mut mask = vec![false; h * w];
    let (hf, wf) = (h as f64, w as f64);
    match class {
        ObjectClass::Blob => {
            let cy = hf / 2.0 + rng.gen_range(-0.1..0.1) * hf;
            let cx = wf / 2.0 + rng.gen_range(-0.1..0.1) * wf;
            let ry = hf / 2.0 * rng.gen_range(0.6..1.0);
            let rx = wf / 2.0 * rng.gen_range(0.6..1.0);
            for r in 0..h {
                for c in 0..w {
                    let dy = (r as f64 + 0.5 - cy) / ry;
                    let dx = (c as f64 + 0.5 - cx) / rx;
                    mask[r * w + c] = dy * dy + dx * dx <= 1.0;
                }
            }
        }
        ObjectClass::Box => {
            let top = rng.gen_range(0..=h / 4);
            let bottom = h - rng.gen_range(0..=h / 4);
            let left = rng.gen_range(0..=w / 4);
            let right = w - rng.gen_range(0..=w / 4);
            for r in top..bottom {
                for c in left..right {
                    mask[r * w + c] = true;
                }
            }
        }
        ObjectClass::Post => {
            let bar = ((wf * rng.gen_range(0.25..0.4)).round() as usize).clamp(1, w);
            let left = rng.gen_range(0..=w - bar);
            let top = rng.gen_range(0..=h / 5);
            for r in top..h {
                for c in left..left + bar {
                    mask[r * w + c] = true;
                }
            }
        }
        ObjectClass::Clutter => {
            let pieces = rng.gen_range(2..=4);
            for _ in 0..pieces {
                let rad = rng.gen_range(1.2..(hf.min(wf) / 3.0).max(1.5));
                let cy = rng.gen_range(0.0..hf);
                let cx = rng.gen_range(0.0..wf);
                for r in 0..h {
                    for c in 0..w {
                        let dy = r as f64 + 0.5 - cy;
                        let dx = c as f64 + 0.5 - cx;
                        if dy * dy + dx * dx <= rad * rad {
                            mask[r * w + c] = true;
                        }
                    }
                }
            }
        }
    }
    mask
}

fn erode(mask: &[bool], h: usize, w: usize) -> Vec<bool> {
    let mut out = vec![false; mask.len()];
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            out[i] = mask[i]
                && r > 0
                && r + 1 < h
                && c > 0
                && c + 1 < w
                && mask[i - w]
                && mask[i + w]
                && mask[i - 1]
                && mask[i + 1];
        }
    }
    out
}

/// Erodes the mask and cuts away a slab along one side ("cropped" objects).
fn degrade<R: Rng>(rng: &mut R, mask: &mut Vec<bool>, patch: &mut [f32], h: usize, w: usize) {
    *mask = erode(mask, h, w);
    let frac = rng.gen_range(0.2..0.4);
    let side = rng.gen_range(0..4);
    for r in 0..h {
        for c in 0..w {
            let cut = match side {
                0 => (r as f64) < frac * h as f64,
                1 => (r as f64) >= (1.0 - frac) * h as f64,
                2 => (c as f64) < frac * w as f64,
                _ => (c as f64) >= (1.0 - frac) * w as f64,
            };
            if cut {
                mask[r * w + c] = false;
            }
        }
    }
    // posterize: coarse quantization artifacts
    for v in patch.iter_mut() {
        *v = ((*v * 4.0).round() / 4.0).clamp(0.0, 1.0);
    }
}

fn render_patch<R: Rng>(rng: &mut R, scene: &Scene, roi: &Roi, class: ObjectClass, contrast: f64) -> Vec<f32> {
    // Scene-consistent: objects keep the local surface appearance and add
    // a class-specific shift plus their own shading.
    let (h, w) = (roi.height, roi.width);
    let mut patch = vec![0f32; scene.channels() * h * w];
    let class_idx = class as usize;
    for ch in 0..scene.channels() {
        let shift = contrast * (object_signature(ch)[class_idx] + rng.gen_range(-0.03..0.03));
        let shade = value_noise(rng, h, w, 4);
        for r in 0..h {
            for c in 0..w {
                let under = scene.value(ch, roi.row + r, roi.col + c) as f64;
                let v = under + shift + 0.08 * shade[r * w + c] + rng.gen_range(-0.03..0.03);
                patch[(ch * h + r) * w + c] = v.clamp(0.0, 1.0) as f32;
            }
        }
    }
    patch
}

/// Samples a ground-band ROI, then renders and filters objects in it until
/// one passes or `max_retries` further attempts have failed.
pub fn propose_negative<R: Rng>(scene: &Scene, rng: &mut R, config: &ProposalConfig) -> Result<NegativeProposal> {
    config.filters.validate()?;
    if config.roi_min == 0 || config.roi_min > config.roi_max {
        return Err(config_err("roi_min must be positive and not exceed roi_max"));
    }
    let band_top = scene.horizon;
    let band_h = scene.height().saturating_sub(band_top);
    if band_h < config.roi_min || scene.width() < config.roi_min {
        return Err(config_err("ground band is smaller than the minimum ROI"));
    }
    let height = rng.gen_range(config.roi_min..=config.roi_max.min(band_h));
    let width = rng.gen_range(config.roi_min..=config.roi_max.min(scene.width()));
    let roi = Roi {
        row: rng.gen_range(band_top..=scene.height() - height),
        col: rng.gen_range(0..=scene.width() - width),
        height,
        width,
    };
    let quality = if rng.gen_bool(config.low_quality_fraction.clamp(0.0, 1.0)) {
        Quality::Low
    } else {
        Quality::High
    };
    for attempt in 0..=config.filters.max_retries {
        let object_class = ObjectClass::ALL[rng.gen_range(0..4)];
        let mut mask = render_mask(rng, object_class, height, width);
        let mut patch = render_patch(rng, scene, &roi, object_class, config.object_contrast);
        if quality == Quality::Low {
            degrade(rng, &mut mask, &mut patch, height, width);
        }
        if config.filters.accepts(&mask, height, width) {
            return Ok(NegativeProposal {
                roi,
                object_class,
                patch,
                mask,
                quality,
                retries: attempt,
            });
        }
    }
    Err(Error::ProposalRejected {
        retries: config.filters.max_retries,
    })
}

/// What was applied to one scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppliedProposal {
    pub roi: Roi,
    pub class: ObjectClass,
    pub area: usize,
    pub quality: Quality,
    pub retries: usize,
    /// POSITIVE pixels that were relabelled NEG_SYNTHETIC.
    #[serde(default)]
    pub overlapped_positive: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompositionRecord {
    pub scene_id: u64,
    pub proposals: Vec<AppliedProposal>,
    pub height: usize,
    pub width: usize,
    /// Union of the applied masks in scene coordinates.
    pub mask: Vec<bool>,
}

impl CompositionRecord {
    pub fn empty(scene_id: u64, height: usize, width: usize) -> Self {
        Self {
            scene_id,
            proposals: Vec::new(),
            height,
            width,
            mask: vec![false; height * width],
        }
    }

    pub fn merge(&mut self, other: CompositionRecord) {
        assert_eq!((self.height, self.width), (other.height, other.width));
        for (a, b) in self.mask.iter_mut().zip(&other.mask) {
            *a |= *b;
        }
        self.proposals.extend(other.proposals);
    }

    pub fn mask_area(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Blends the proposal into the scene. Pixels outside the mask are left
/// untouched; with `soft_edges`, mask pixels on the mask boundary take an
/// even mix of object and scene.
pub fn compose(
    scene: &Scene,
    labels: &LabelMask,
    proposal: &NegativeProposal,
    soft_edges: bool,
) -> Result<(Scene, LabelMask, CompositionRecord)> {
    let roi = proposal.roi;
    roi.check_inside(scene)?;
    if (labels.height, labels.width) != (scene.height(), scene.width()) {
        return Err(config_err("label mask does not match the scene"));
    }
    let (h, w) = (roi.height, roi.width);
    if proposal.mask.len() != h * w || proposal.patch.len() != scene.channels() * h * w {
        return Err(config_err("proposal patch or mask does not match its ROI"));
    }
    let mut out = scene.clone();
    let mut out_labels = labels.clone();
    let mut record = CompositionRecord::empty(scene.seed, scene.height(), scene.width());
    let mut overlapped = 0;
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            if !proposal.mask[i] {
                continue;
            }
            let (sr, sc) = (roi.row + r, roi.col + c);
            let edge = soft_edges
                && (r == 0
                    || c == 0
                    || r + 1 == h
                    || c + 1 == w
                    || !proposal.mask[i - w]
                    || !proposal.mask[i + w]
                    || !proposal.mask[i - 1]
                    || !proposal.mask[i + 1]);
            for ch in 0..scene.channels() {
                let obj = proposal.patch[(ch * h + r) * w + c];
                let v = if edge { 0.5 * obj + 0.5 * scene.value(ch, sr, sc) } else { obj };
                out.set_value(ch, sr, sc, v);
            }
            let si = sr * scene.width() + sc;
            if out_labels.labels[si] == Label::Positive {
                overlapped += 1;
            }
            out_labels.labels[si] = Label::NegSynthetic;
            record.mask[si] = true;
        }
    }
    record.proposals.push(AppliedProposal {
        roi,
        class: proposal.object_class,
        area: proposal.area(),
        quality: proposal.quality,
        retries: proposal.retries,
        overlapped_positive: overlapped,
    });
    Ok((out, out_labels, record))
}

/// A scene with its supervision.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledScene {
    pub scene: Scene,
    pub labels: LabelMask,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectionConfig {
    pub proposal: ProposalConfig,
    /// Objects per augmented scene, drawn uniformly from `[min, max]`.
    pub objects_min: usize,
    pub objects_max: usize,
    /// Fresh ROIs tried per object when a proposal is rejected.
    pub roi_attempts: usize,
    pub soft_edges: bool,
}

impl Default for InjectionConfig {
    fn default() -> Self {
        Self {
            proposal: ProposalConfig::default(),
            objects_min: 1,
            objects_max: 3,
            roi_attempts: 16,
            soft_edges: false,
        }
    }
}

/// Scenes after injection plus one record per augmented scene, ordered by scene index.
#[derive(Clone, Debug)]
pub struct Injection {
    pub scenes: Vec<LabeledScene>,
    pub records: Vec<CompositionRecord>,
}

fn scene_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

/// Composes between `objects_min` and `objects_max` negatives into one scene.
pub fn augment_scene(item: &LabeledScene, scene_id: u64, seed: u64, config: &InjectionConfig) -> Result<(LabeledScene, CompositionRecord)> {
    if config.objects_min == 0 || config.objects_min > config.objects_max {
        return Err(config_err("objects_min must be positive and not exceed objects_max"));
    }
    let mut rng = scene_rng(seed, scene_id as usize);
    let count = rng.gen_range(config.objects_min..=config.objects_max);
    let mut scene = item.scene.clone();
    let mut labels = item.labels.clone();
    let mut record = CompositionRecord::empty(scene_id, scene.height(), scene.width());
    for _ in 0..count {
        let mut last_err = None;
        for _ in 0..config.roi_attempts.max(1) {
            match propose_negative(&scene, &mut rng, &config.proposal) {
                Ok(p) => {
                    let (s, l, r) = compose(&scene, &labels, &p, config.soft_edges)?;
                    scene = s;
                    labels = l;
                    record.merge(r);
                    last_err = None;
                    break;
                }
                Err(e @ Error::ProposalRejected { .. }) => last_err = Some(e),
                Err(e) => return Err(e),
            }
        }
        if record.proposals.is_empty() {
            if let Some(e) = last_err {
                return Err(e);
            }
        }
    }
    record.scene_id = scene_id;
    Ok((LabeledScene { scene, labels }, record))
}

/// Composes negatives into `round(ratio * N)` scenes chosen without replacement.
pub fn inject_dataset(scenes: &[LabeledScene], ratio: f64, seed: u64, config: &InjectionConfig) -> Result<Injection> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(config_err(format!("injection ratio must lie in [0, 1], got {ratio}")));
    }
    let n = scenes.len();
    let n_aug = (ratio * n as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = sample(&mut rng, n, n_aug).into_vec();
    chosen.sort_unstable();

    let augmented: Vec<(usize, (LabeledScene, CompositionRecord))> = chosen
        .par_iter()
        .map(|&i| augment_scene(&scenes[i], i as u64, seed, config).map(|r| (i, r)))
        .collect::<Result<_>>()?;

    let mut out = scenes.to_vec();
    let mut records = Vec::with_capacity(augmented.len());
    for (i, (item, rec)) in augmented {
        out[i] = item;
        records.push(rec);
    }
    Ok(Injection { scenes: out, records })
}

/// Run lengths of one mask row, alternating starting with a (possibly empty) run of zeros.
pub fn rle_encode_row(row: &[bool]) -> Vec<u32> {
    let mut runs = Vec::new();
    let mut current = false;
    let mut len = 0u32;
    for &v in row {
        if v == current {
            len += 1;
        } else {
            runs.push(len);
            current = v;
            len = 1;
        }
    }
    runs.push(len);
    runs
}

pub fn rle_decode_row(runs: &[u32], width: usize) -> Result<Vec<bool>> {
    let mut row = Vec::with_capacity(width);
    for (k, &len) in runs.iter().enumerate() {
        row.extend(std::iter::repeat(k % 2 == 1).take(len as usize));
    }
    if row.len() != width {
        return Err(Error::Format(format!("RLE row covers {} pixels, expected {width}", row.len())));
    }
    Ok(row)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RleMask {
    pub height: usize,
    pub width: usize,
    pub rows: Vec<Vec<u32>>,
}

impl RleMask {
    pub fn encode(mask: &[bool], height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            rows: mask.chunks(width).map(rle_encode_row).collect(),
        }
    }

    pub fn decode(&self) -> Result<Vec<bool>> {
        if self.rows.len() != self.height {
            return Err(Error::Format("RLE row count does not match height".into()));
        }
        let mut out = Vec::with_capacity(self.height * self.width);
        for r in &self.rows {
            out.extend(rle_decode_row(r, self.width)?);
        }
        Ok(out)
    }
}

/// One JSON line of the injection manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub scene_id: u64,
    pub proposals: Vec<AppliedProposal>,
    pub mask: RleMask,
}

impl From<&CompositionRecord> for ManifestRecord {
    fn from(r: &CompositionRecord) -> Self {
        Self {
            scene_id: r.scene_id,
            proposals: r.proposals.clone(),
            mask: RleMask::encode(&r.mask, r.height, r.width),
        }
    }
}

pub fn write_manifest(records: &[CompositionRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(&ManifestRecord::from(r))?);
        out.push('\n');
    }
    Ok(out)
}

pub fn read_manifest(text: &str) -> Result<Vec<ManifestRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}
