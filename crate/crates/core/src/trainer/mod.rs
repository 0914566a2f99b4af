//! Seeded training for both branches: injection, augmentation, per-scene
//! objectives with analytic gradients, and Adam.

pub mod augment;
pub mod optim;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{backward, forward, forward_pixels, Activations, EmbeddingParams, EmbeddingShape, FeatureMap};
use crate::error::{config_err, Error, Result};
use crate::losses::pn::{build_sample_sets, total_pn_loss, vs_loss, ExpansionConfig, PnConfig, PnInputs, PnTerms, SampleCaps, SampleSets};
use crate::losses::pu::{lort_base_loss, pu_targets, total_pu_loss, CenterBank, PuConfig, PuInputs, PuTargets, PuTerms};
use crate::mat::{normalize_rows, unit_vector, Mat};
use crate::negatives::{inject_dataset, CompositionRecord, InjectionConfig, LabeledScene};
use crate::scene::{Label, Scene};

pub use augment::{augment, AugmentConfig};
pub use optim::{optimizer_step, AdamState, BETA1, BETA2, EPSILON};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Pu,
    Pn,
}

/// `Synet` trains the extended objective, `Baseline` the unextended one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Synet,
    Baseline,
}

/// Pixel sample sizes per scene for the PU branch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PuCaps {
    pub positive: usize,
    pub unlabeled: usize,
    pub synthetic: usize,
    pub view_pairs: usize,
}

impl Default for PuCaps {
    fn default() -> Self {
        Self {
            positive: 128,
            unlabeled: 192,
            synthetic: 128,
            view_pairs: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub branch: Branch,
    pub objective: Objective,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub injection_ratio: f64,
    pub injection: InjectionConfig,
    pub augment: AugmentConfig,
    pub embedding: EmbeddingShape,
    pub neg_centers: usize,
    pub prototypes: usize,
    pub pu: PuConfig,
    pub pn: PnConfig,
    pub pu_caps: PuCaps,
    pub pn_caps: SampleCaps,
    pub expansion: ExpansionConfig,
    pub seed: u64,
}

impl TrainConfig {
    pub fn pu() -> Self {
        Self {
            branch: Branch::Pu,
            objective: Objective::Synet,
            epochs: 30,
            batch_size: 4,
            learning_rate: 1e-3,
            injection_ratio: 0.2,
            injection: InjectionConfig::default(),
            augment: AugmentConfig::default(),
            embedding: EmbeddingShape::default(),
            neg_centers: 4,
            prototypes: 8,
            pu: PuConfig::default(),
            pn: PnConfig::default(),
            pu_caps: PuCaps::default(),
            pn_caps: SampleCaps::default(),
            expansion: ExpansionConfig::default(),
            seed: 0,
        }
    }

    pub fn pn() -> Self {
        Self {
            branch: Branch::Pn,
            epochs: 10,
            batch_size: 1,
            ..Self::pu()
        }
    }

    pub fn for_branch(branch: Branch) -> Self {
        match branch {
            Branch::Pu => Self::pu(),
            Branch::Pn => Self::pn(),
        }
    }

    /// The same run without the synthetic-negative terms.
    pub fn baseline(mut self) -> Self {
        self.objective = Objective::Baseline;
        self.pu.lambda_neg = 0.0;
        self.pu.lambda_rep = 0.0;
        self.pn.lambda_n = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(config_err("epochs and batch_size must be at least 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(config_err("learning_rate must be finite and non-negative"));
        }
        if !(0.0..=1.0).contains(&self.injection_ratio) {
            return Err(config_err("injection_ratio must lie in [0, 1]"));
        }
        if self.neg_centers < 2 || self.prototypes < 1 {
            return Err(config_err("need K >= 2 negative centers and at least one prototype"));
        }
        self.embedding.validate()?;
        self.augment.validate()?;
        self.pu.validate()?;
        self.pn.validate()
    }
}

/// Embedding plus centers; the optimizer sees them as one flat vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub embedding: EmbeddingParams,
    pub centers: CenterBank,
}

impl Model {
    pub fn init<R: Rng>(shape: EmbeddingShape, k: usize, m: usize, rng: &mut R) -> Self {
        let embedding = EmbeddingParams::init(shape, rng);
        let centers = CenterBank::random(shape.dim, k, m, rng);
        Self { embedding, centers }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.embedding.to_flat();
        v.extend(self.centers.to_flat());
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        let n = self.embedding.shape.param_count();
        if flat.len() != n + self.centers.param_count() {
            return Err(config_err("model parameter count mismatch"));
        }
        self.embedding = EmbeddingParams::from_flat(self.embedding.shape, &flat[..n])?;
        self.centers = CenterBank::from_flat(self.centers.dim(), self.centers.k(), self.centers.m(), &flat[n..])?;
        Ok(())
    }

    pub fn features(&self, scene: &Scene) -> Result<FeatureMap> {
        forward(scene, &self.embedding)
    }

    /// Unit mean of the normalized features at the given pixels of each scene.
    pub fn mean_feature<'a, I>(&self, items: I) -> Result<Vec<f64>>
    where
        I: IntoIterator<Item = (&'a Scene, Vec<usize>)>,
    {
        let mut sum = vec![0.0; self.embedding.shape.dim];
        for (scene, pixels) in items {
            if pixels.is_empty() {
                continue;
            }
            let acts = forward_pixels(scene, &self.embedding, &pixels)?;
            for row in normalize_rows(&acts.raw).unit.iter_rows() {
                sum.iter_mut().zip(row).for_each(|(s, v)| *s += v);
            }
        }
        unit_vector(&sum).ok_or(Error::EmptyFeatureSet)
    }
}

/// One training scene after augmentation and pixel sampling.
#[derive(Clone, Debug)]
pub enum Prepared {
    Pu(PuPrepared),
    Pn(PnPrepared),
}

/// PU sample: pixel sets in view A, and the matching pixels of view B
/// (A re-jittered and possibly mirrored).
#[derive(Clone, Debug)]
pub struct PuPrepared {
    pub view_a: Scene,
    pub view_b: Scene,
    pub positive: Vec<usize>,
    pub unlabeled: Vec<usize>,
    pub synthetic: Vec<usize>,
    pub pairs_a: Vec<usize>,
    pub pairs_b: Vec<usize>,
    pub unlabeled_b: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct PnPrepared {
    pub scene: Scene,
    pub sets: SampleSets,
}

fn sample_pool<R: Rng>(pool: Vec<usize>, cap: usize, rng: &mut R) -> Vec<usize> {
    if pool.len() <= cap {
        return pool;
    }
    let mut v: Vec<usize> = index::sample(rng, pool.len(), cap).into_iter().map(|i| pool[i]).collect();
    v.sort_unstable();
    v
}

const CROP_ATTEMPTS: usize = 4;

/// A crop may cut away the trajectory; retry, then fall back to an uncropped view.
fn augment_with_positives<R: Rng>(item: &LabeledScene, config: &TrainConfig, rng: &mut R) -> Result<LabeledScene> {
    for _ in 0..CROP_ATTEMPTS {
        let aug = augment(item, &config.augment, rng)?;
        if aug.labels.count(Label::Positive) >= 2 {
            return Ok(aug);
        }
    }
    let no_crop = AugmentConfig {
        crop_prob: 0.0,
        ..config.augment.clone()
    };
    augment(item, &no_crop, rng)
}

/// Augments one scene and draws its pixel samples.
pub fn prepare<R: Rng>(item: &LabeledScene, config: &TrainConfig, rng: &mut R) -> Result<Prepared> {
    let aug = augment_with_positives(item, config, rng)?;
    match config.branch {
        Branch::Pn => {
            let sets = build_sample_sets(&aug.labels, config.pn_caps, config.expansion, rng)?;
            Ok(Prepared::Pn(PnPrepared { scene: aug.scene, sets }))
        }
        Branch::Pu => {
            let caps = config.pu_caps;
            let labels = &aug.labels.labels;
            let pool = |keep: &dyn Fn(Label) -> bool| -> Vec<usize> {
                labels.iter().enumerate().filter(|(_, &l)| keep(l)).map(|(i, _)| i).collect()
            };
            let positive = sample_pool(pool(&|l| l == Label::Positive), caps.positive, rng);
            if positive.is_empty() {
                return Err(Error::EmptyFeatureSet);
            }
            let unlabeled = sample_pool(
                pool(&|l| matches!(l, Label::Unlabeled | Label::NegLowConf)),
                caps.unlabeled,
                rng,
            );
            let synthetic = sample_pool(pool(&|l| l == Label::NegSynthetic), caps.synthetic, rng);
            let n = aug.scene.pixel_count();
            let pairs_a = sample_pool((0..n).collect(), caps.view_pairs, rng);

            let w = aug.scene.width();
            let mirror = rng.gen_bool(config.augment.flip_prob);
            let mut view_b = augment::jitter(&aug.scene, config.augment.jitter_gain, config.augment.jitter_bias, rng);
            if mirror {
                view_b = view_b.flipped();
            }
            let map = |p: usize| if mirror { p - p % w + (w - 1 - p % w) } else { p };
            Ok(Prepared::Pu(PuPrepared {
                pairs_b: pairs_a.iter().map(|&p| map(p)).collect(),
                unlabeled_b: unlabeled.iter().map(|&p| map(p)).collect(),
                view_a: aug.scene,
                view_b,
                positive,
                unlabeled,
                synthetic,
                pairs_a,
            }))
        }
    }
}

/// Per-scene loss breakdown of either branch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Terms {
    Pu(PuTerms),
    Pn(PnTerms),
}

impl Terms {
    pub fn names(branch: Branch) -> &'static [&'static str] {
        match branch {
            Branch::Pu => &PuTerms::NAMES,
            Branch::Pn => &PnTerms::NAMES,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            Terms::Pu(t) => t.values().to_vec(),
            Terms::Pn(t) => t.values().to_vec(),
        }
    }

    pub fn total(&self) -> f64 {
        self.values()[0]
    }
}

/// Frozen soft targets for one prepared scene.
#[derive(Clone, Debug)]
pub enum Targets {
    Pu(PuTargets),
    Pn,
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub terms: Terms,
    /// Gradient in [`Model::to_flat`] layout.
    pub grad: Vec<f64>,
}

/// Row slot of each pixel in a deduplicated forward batch.
struct Batch {
    pixels: Vec<usize>,
    acts: Activations,
}

impl Batch {
    fn new(scene: &Scene, params: &EmbeddingParams, sets: &[&[usize]]) -> Result<Self> {
        let mut pixels: Vec<usize> = sets.iter().flat_map(|s| s.iter().copied()).collect();
        pixels.sort_unstable();
        pixels.dedup();
        let acts = forward_pixels(scene, params, &pixels)?;
        Ok(Self { pixels, acts })
    }

    fn rows(&self, set: &[usize]) -> Vec<usize> {
        set.iter().map(|p| self.pixels.binary_search(p).expect("pixel in batch")).collect()
    }

    fn gather(&self, set: &[usize]) -> Mat {
        self.acts.raw.gather(&self.rows(set))
    }

    fn zeros(&self) -> Mat {
        Mat::zeros(self.acts.raw.rows(), self.acts.raw.cols())
    }
}

struct PuFeatures {
    a: Batch,
    b: Batch,
    positive: Mat,
    unlabeled: Mat,
    synthetic: Mat,
    pairs_a: Mat,
    pairs_b: Mat,
    unlabeled_b: Mat,
}

impl PuFeatures {
    fn new(model: &Model, p: &PuPrepared) -> Result<Self> {
        let emb = &model.embedding;
        let a = Batch::new(&p.view_a, emb, &[&p.positive, &p.unlabeled, &p.synthetic, &p.pairs_a])?;
        let b = Batch::new(&p.view_b, emb, &[&p.pairs_b, &p.unlabeled_b])?;
        Ok(Self {
            positive: a.gather(&p.positive),
            unlabeled: a.gather(&p.unlabeled),
            synthetic: a.gather(&p.synthetic),
            pairs_a: a.gather(&p.pairs_a),
            pairs_b: b.gather(&p.pairs_b),
            unlabeled_b: b.gather(&p.unlabeled_b),
            a,
            b,
        })
    }

    fn inputs(&self) -> PuInputs<'_> {
        PuInputs {
            positive: &self.positive,
            unlabeled: &self.unlabeled,
            synthetic: &self.synthetic,
            views: (!self.pairs_a.is_empty()).then_some((&self.pairs_a, &self.pairs_b)),
            unlabeled_view: (!self.unlabeled_b.is_empty()).then_some(&self.unlabeled_b),
        }
    }
}

fn effective_pu(config: &TrainConfig) -> PuConfig {
    let mut pu = config.pu.clone();
    if config.objective == Objective::Baseline {
        pu.lambda_neg = 0.0;
        pu.lambda_rep = 0.0;
    }
    pu
}

/// Soft targets at the model's current parameters.
pub fn compute_targets(model: &Model, prepared: &Prepared, config: &TrainConfig) -> Result<Targets> {
    match prepared {
        Prepared::Pn(_) => Ok(Targets::Pn),
        Prepared::Pu(p) => {
            let f = PuFeatures::new(model, p)?;
            Ok(Targets::Pu(pu_targets(&f.inputs(), &model.centers, &effective_pu(config))?))
        }
    }
}

/// Loss and gradient with the targets held fixed.
pub fn evaluate(model: &Model, prepared: &Prepared, targets: &Targets, config: &TrainConfig) -> Result<Evaluation> {
    match (prepared, targets) {
        (Prepared::Pu(p), Targets::Pu(t)) => {
            let f = PuFeatures::new(model, p)?;
            evaluate_pu(model, p, &f, t, config)
        }
        (Prepared::Pn(p), Targets::Pn) => evaluate_pn(model, p, config),
        _ => Err(config_err("targets do not match the prepared branch")),
    }
}

/// Targets and loss from a single forward pass.
pub fn step_scene(model: &Model, prepared: &Prepared, config: &TrainConfig) -> Result<Evaluation> {
    match prepared {
        Prepared::Pu(p) => {
            let f = PuFeatures::new(model, p)?;
            let t = pu_targets(&f.inputs(), &model.centers, &effective_pu(config))?;
            evaluate_pu(model, p, &f, &t, config)
        }
        Prepared::Pn(p) => evaluate_pn(model, p, config),
    }
}

fn evaluate_pu(model: &Model, p: &PuPrepared, f: &PuFeatures, targets: &PuTargets, config: &TrainConfig) -> Result<Evaluation> {
    let inputs = f.inputs();
    let loss = match config.objective {
        Objective::Baseline => lort_base_loss(&inputs, &model.centers, targets, &config.pu)?,
        Objective::Synet => total_pu_loss(&inputs, &model.centers, targets, &config.pu)?,
    };
    let mut d_a = f.a.zeros();
    d_a.scatter_add(&f.a.rows(&p.positive), &loss.grad.positive);
    d_a.scatter_add(&f.a.rows(&p.unlabeled), &loss.grad.unlabeled);
    d_a.scatter_add(&f.a.rows(&p.synthetic), &loss.grad.synthetic);
    let mut d_b = f.b.zeros();
    if let (Some(ga), Some(gb)) = (&loss.grad.view_a, &loss.grad.view_b) {
        d_a.scatter_add(&f.a.rows(&p.pairs_a), ga);
        d_b.scatter_add(&f.b.rows(&p.pairs_b), gb);
    }
    let mut grad = backward(&model.embedding, &f.a.acts, &d_a);
    let gb = backward(&model.embedding, &f.b.acts, &d_b);
    grad.iter_mut().zip(gb).for_each(|(g, v)| *g += v);
    grad.extend(loss.grad.centers.to_flat());
    Ok(Evaluation {
        terms: Terms::Pu(loss.terms),
        grad,
    })
}

fn evaluate_pn(model: &Model, p: &PnPrepared, config: &TrainConfig) -> Result<Evaluation> {
    let s = &p.sets;
    let batch = Batch::new(&p.scene, &model.embedding, &[&s.p_s, &s.n_s, &s.p_e, &s.n_e, &s.synthetic])?;
    let (p_s, n_s, p_e, n_e, syn) = (
        batch.gather(&s.p_s),
        batch.gather(&s.n_s),
        batch.gather(&s.p_e),
        batch.gather(&s.n_e),
        batch.gather(&s.synthetic),
    );
    let inputs = PnInputs {
        p_s: &p_s,
        n_s: &n_s,
        p_e: &p_e,
        n_e: &n_e,
        synthetic: &syn,
    };
    let pn = &config.pn;
    let loss = match config.objective {
        Objective::Baseline => vs_loss(&inputs, pn.omega_e, pn.temperature, pn.include_positive)?,
        Objective::Synet => total_pn_loss(&inputs, pn)?,
    };
    let mut d = batch.zeros();
    d.scatter_add(&batch.rows(&s.p_s), &loss.grad.p_s);
    d.scatter_add(&batch.rows(&s.n_s), &loss.grad.n_s);
    d.scatter_add(&batch.rows(&s.p_e), &loss.grad.p_e);
    d.scatter_add(&batch.rows(&s.n_e), &loss.grad.n_e);
    d.scatter_add(&batch.rows(&s.synthetic), &loss.grad.synthetic);
    let mut grad = backward(&model.embedding, &batch.acts, &d);
    grad.resize(grad.len() + model.centers.param_count(), 0.0);
    Ok(Evaluation {
        terms: Terms::Pn(loss.terms),
        grad,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub epoch: usize,
    pub step: usize,
    /// Batch-mean term values aligned with [`LossLog::names`].
    pub values: Vec<f64>,
}

/// Per-step term breakdowns; the first name is always `total`.
#[derive(Clone, Debug, PartialEq)]
pub struct LossLog {
    pub names: Vec<String>,
    pub steps: Vec<StepRecord>,
}

impl LossLog {
    pub fn new(branch: Branch) -> Self {
        Self {
            names: Terms::names(branch).iter().map(|s| s.to_string()).collect(),
            steps: Vec::new(),
        }
    }

    /// Header `epoch,step,total,<terms>`.
    pub fn to_csv(&self) -> String {
        let mut out = format!("epoch,step,{}\n", self.names.join(","));
        for s in &self.steps {
            let vals: Vec<String> = s.values.iter().map(|v| v.to_string()).collect();
            out.push_str(&format!("{},{},{}\n", s.epoch, s.step, vals.join(",")));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
        if header.len() < 3 || header[0] != "epoch" || header[1] != "step" || header[2] != "total" {
            return Err(Error::Format("loss log header must start with epoch,step,total".into()));
        }
        let names: Vec<String> = header[2..].iter().map(|s| s.to_string()).collect();
        let mut steps = Vec::new();
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != header.len() {
                return Err(Error::Format(format!("loss log row {} has {} cells", n + 2, cells.len())));
            }
            let bad = || Error::Format(format!("loss log row {} is not numeric", n + 2));
            steps.push(StepRecord {
                epoch: cells[0].parse().map_err(|_| bad())?,
                step: cells[1].parse().map_err(|_| bad())?,
                values: cells[2..]
                    .iter()
                    .map(|c| c.parse::<f64>().map_err(|_| bad()))
                    .collect::<Result<_>>()?,
            });
        }
        Ok(Self { names, steps })
    }

    /// Mean of each term per epoch, in epoch order.
    pub fn epoch_means(&self) -> Vec<(usize, Vec<f64>)> {
        let mut out: Vec<(usize, Vec<f64>, usize)> = Vec::new();
        for s in &self.steps {
            match out.last_mut() {
                Some((e, sum, n)) if *e == s.epoch => {
                    sum.iter_mut().zip(&s.values).for_each(|(a, b)| *a += b);
                    *n += 1;
                }
                _ => out.push((s.epoch, s.values.clone(), 1)),
            }
        }
        out.into_iter()
            .map(|(e, sum, n)| (e, sum.into_iter().map(|v| v / n as f64).collect()))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub model: Model,
    pub log: LossLog,
    pub optimizer: AdamState,
    /// One record per scene that received synthetic negatives.
    pub injection: Vec<CompositionRecord>,
}

const INIT_STREAM: u64 = u64::MAX;

/// Independent random stream for `(epoch, slot)`; slot 0 is the epoch shuffle.
pub fn stream_rng(seed: u64, epoch: usize, slot: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5459_4e45_5452_4149);
    rng.set_stream(((epoch as u64) << 32) | slot as u64);
    rng
}

fn nonfinite(names: &[String], values: &[f64], grad_ok: bool, epoch: usize, step: usize) -> Option<Error> {
    let bad = names.iter().zip(values).find(|(_, v)| !v.is_finite()).map(|(n, _)| n.clone());
    let term = match (bad, grad_ok) {
        (Some(t), _) => t,
        (None, false) => "gradient".to_string(),
        (None, true) => return None,
    };
    let breakdown: serde_json::Map<String, serde_json::Value> = names
        .iter()
        .zip(values)
        .map(|(n, v)| (n.clone(), serde_json::Value::String(v.to_string())))
        .collect();
    Some(Error::NonFiniteLoss {
        term,
        epoch,
        step,
        breakdown: serde_json::Value::Object(breakdown).to_string(),
    })
}

/// Injects synthetic negatives, then trains. Deterministic in `(dataset, config)`.
pub fn train(dataset: &[LabeledScene], config: &TrainConfig) -> Result<TrainOutput> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(config_err("training dataset is empty"));
    }
    let injection = inject_dataset(dataset, config.injection_ratio, config.seed, &config.injection)?;
    let has_synthetic = injection.scenes.iter().any(|s| s.labels.count(Label::NegSynthetic) > 0);
    let pu_needs = config.branch == Branch::Pu
        && config.objective == Objective::Synet
        && config.pu.lambda_neg > 0.0
        && config.pu.lambda_n > 0.0;
    if pu_needs && !has_synthetic {
        return Err(config_err("the PU objective with lambda_neg > 0 needs at least one scene with synthetic negatives"));
    }
    let out = train_scenes(&injection.scenes, config)?;
    Ok(TrainOutput {
        injection: injection.records,
        ..out
    })
}

/// Trains on scenes as given, without injection.
pub fn train_scenes(scenes: &[LabeledScene], config: &TrainConfig) -> Result<TrainOutput> {
    config.validate()?;
    if scenes.is_empty() {
        return Err(config_err("training dataset is empty"));
    }
    let mut init_rng = stream_rng(config.seed, 0, 0);
    init_rng.set_stream(INIT_STREAM);
    let mut model = Model::init(config.embedding, config.neg_centers, config.prototypes, &mut init_rng);
    let probe = scenes.iter().take(16).map(|s| (&s.scene, s.labels.indices(Label::Positive)));
    model.centers.c_pos = model.mean_feature(probe)?;

    let mut flat = model.to_flat();
    let mut state = AdamState::new(flat.len());
    let mut log = LossLog::new(config.branch);
    let mut order: Vec<usize> = (0..scenes.len()).collect();
    let mut step = 0;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut stream_rng(config.seed, epoch, 0));
        for chunk in order.chunks(config.batch_size) {
            step += 1;
            let evals: Vec<Evaluation> = chunk
                .par_iter()
                .map(|&i| {
                    let mut rng = stream_rng(config.seed, epoch, i + 1);
                    let prepared = prepare(&scenes[i], config, &mut rng)?;
                    step_scene(&model, &prepared, config)
                })
                .collect::<Result<_>>()?;
            let scale = 1.0 / evals.len() as f64;
            let mut grad = vec![0.0; flat.len()];
            let mut values = vec![0.0; log.names.len()];
            for e in &evals {
                grad.iter_mut().zip(&e.grad).for_each(|(g, v)| *g += scale * v);
                values.iter_mut().zip(e.terms.values()).for_each(|(a, v)| *a += scale * v);
            }
            if let Some(err) = nonfinite(&log.names, &values, grad.iter().all(|g| g.is_finite()), epoch, step) {
                return Err(err);
            }
            optimizer_step(&mut flat, &grad, &mut state, config.learning_rate)?;
            model.set_flat(&flat)?;
            log.steps.push(StepRecord { epoch, step, values });
        }
    }
    if config.branch == Branch::Pn {
        let refs = scenes.iter().map(|s| (&s.scene, s.labels.indices(Label::Positive)));
        model.centers.c_pos = model.mean_feature(refs)?;
    }
    Ok(TrainOutput {
        model,
        log,
        optimizer: state,
        injection: Vec::new(),
    })
}
