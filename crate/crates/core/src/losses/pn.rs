//! Positive–negative objective: two-source pixel contrastive loss with an
//! extra term pushing positives away from synthetic negatives.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::mat::{axpy, dot, log_sum_exp, normalize_rows, softmax_in_place, Mat};
use crate::scene::{squared_distance_transform, Label, LabelMask};

#[derive(Clone, Debug)]
pub struct ContrastGrad {
    pub value: f64,
    pub d_positive: Mat,
    pub d_negative: Mat,
}

/// `-1/(|P|(|P|-1)) sum_i sum_{j != i} log[ exp(s_ij/t) / sum_{k in N} exp(s_ik/t) ]`.
///
/// The denominator holds negatives only; `include_positive` adds the
/// positive pair to it (the usual InfoNCE form). Rows are normalized on entry.
pub fn contrastive_loss(positive: &Mat, negative: &Mat, temperature: f64, include_positive: bool) -> Result<ContrastGrad> {
    let p = positive.rows();
    if p < 2 {
        return Err(Error::DegeneratePositiveSet(p));
    }
    if negative.is_empty() {
        return Err(Error::EmptyNegativeSet);
    }
    if negative.cols() != positive.cols() {
        return Err(config_err("positive and negative features differ in dimension"));
    }
    if !(temperature > 0.0) {
        return Err(config_err("temperature must be positive"));
    }
    let pu = normalize_rows(positive);
    let nu = normalize_rows(negative);
    let m = negative.rows();
    let z = (p * (p - 1)) as f64;

    let mut d_p = Mat::zeros(p, positive.cols());
    let mut d_n = Mat::zeros(m, negative.cols());
    let mut value = 0.0;
    let mut neg_logits = vec![0.0; m];
    let mut logits = vec![0.0; m + 1];
    for i in 0..p {
        let a = pu.unit.row(i);
        for k in 0..m {
            neg_logits[k] = dot(a, nu.unit.row(k)) / temperature;
        }
        // gradient w.r.t. the logits of anchor i, accumulated over its pairs
        let mut d_neg_logits = vec![0.0; m];
        let mut neg_soft = neg_logits.clone();
        softmax_in_place(&mut neg_soft);
        let lse_neg = log_sum_exp(&neg_logits);
        for j in 0..p {
            if j == i {
                continue;
            }
            let s = dot(a, pu.unit.row(j)) / temperature;
            let (lse, d_s) = if include_positive {
                logits[0] = s;
                logits[1..].copy_from_slice(&neg_logits);
                let lse = log_sum_exp(&logits);
                softmax_in_place(&mut logits);
                for k in 0..m {
                    d_neg_logits[k] += logits[k + 1];
                }
                (lse, logits[0] - 1.0)
            } else {
                (lse_neg, -1.0)
            };
            value -= s - lse;
            let g = d_s / (z * temperature);
            axpy(g, pu.unit.row(j), d_p.row_mut(i));
            axpy(g, a, d_p.row_mut(j));
        }
        if !include_positive {
            let pairs = (p - 1) as f64;
            for k in 0..m {
                d_neg_logits[k] = pairs * neg_soft[k];
            }
        }
        for k in 0..m {
            let g = d_neg_logits[k] / (z * temperature);
            if g == 0.0 {
                continue;
            }
            axpy(g, nu.unit.row(k), d_p.row_mut(i));
            axpy(g, a, d_n.row_mut(k));
        }
    }
    Ok(ContrastGrad {
        value: value / z,
        d_positive: pu.backward(&d_p),
        d_negative: nu.backward(&d_n),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PnConfig {
    pub omega_e: f64,
    pub lambda_n: f64,
    pub temperature: f64,
    pub include_positive: bool,
}

impl Default for PnConfig {
    fn default() -> Self {
        Self {
            omega_e: 0.5,
            lambda_n: 1.2,
            temperature: 0.55,
            include_positive: false,
        }
    }
}

impl PnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.omega_e) {
            return Err(config_err("omega_e must lie in [0, 1]"));
        }
        if !(self.lambda_n >= 0.0) {
            return Err(config_err("lambda_n must be non-negative"));
        }
        if !(self.temperature > 0.0) {
            return Err(config_err("temperature must be positive"));
        }
        Ok(())
    }
}

/// Feature rows for one PN evaluation.
#[derive(Clone, Copy, Debug)]
pub struct PnInputs<'a> {
    pub p_s: &'a Mat,
    pub n_s: &'a Mat,
    pub p_e: &'a Mat,
    pub n_e: &'a Mat,
    pub synthetic: &'a Mat,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PnTerms {
    pub total: f64,
    pub l_vs_traj: f64,
    pub l_vs_exp: f64,
    pub l_syn_contra: f64,
}

impl PnTerms {
    pub const NAMES: [&'static str; 4] = ["total", "l_vs_traj", "l_vs_exp", "l_syn_contra"];

    pub fn values(&self) -> [f64; 4] {
        [self.total, self.l_vs_traj, self.l_vs_exp, self.l_syn_contra]
    }
}

#[derive(Clone, Debug)]
pub struct PnGrad {
    pub p_s: Mat,
    pub n_s: Mat,
    pub p_e: Mat,
    pub n_e: Mat,
    pub synthetic: Mat,
}

#[derive(Clone, Debug)]
pub struct PnLoss {
    pub terms: PnTerms,
    pub grad: PnGrad,
}

fn zero_grad(inputs: &PnInputs) -> PnGrad {
    let like = |m: &Mat| Mat::zeros(m.rows(), m.cols());
    PnGrad {
        p_s: like(inputs.p_s),
        n_s: like(inputs.n_s),
        p_e: like(inputs.p_e),
        n_e: like(inputs.n_e),
        synthetic: like(inputs.synthetic),
    }
}

/// `(1 - omega_e) L(P_s, N_s) + omega_e L(P_e, N_e)`; a zero-weighted term is not evaluated.
pub fn vs_loss(inputs: &PnInputs, omega_e: f64, temperature: f64, include_positive: bool) -> Result<PnLoss> {
    if !(0.0..=1.0).contains(&omega_e) {
        return Err(config_err("omega_e must lie in [0, 1]"));
    }
    let mut grad = zero_grad(inputs);
    let mut terms = PnTerms::default();
    let w_s = 1.0 - omega_e;
    if w_s != 0.0 {
        let c = contrastive_loss(inputs.p_s, inputs.n_s, temperature, include_positive)?;
        terms.l_vs_traj = c.value;
        grad.p_s.add_scaled(w_s, &c.d_positive);
        grad.n_s.add_scaled(w_s, &c.d_negative);
    }
    if omega_e != 0.0 {
        let c = contrastive_loss(inputs.p_e, inputs.n_e, temperature, include_positive)?;
        terms.l_vs_exp = c.value;
        grad.p_e.add_scaled(omega_e, &c.d_positive);
        grad.n_e.add_scaled(omega_e, &c.d_negative);
    }
    terms.total = combine_vs(terms.l_vs_traj, terms.l_vs_exp, omega_e);
    Ok(PnLoss { terms, grad })
}

/// Weighted sum of the two VS terms; a zero-weighted term is dropped exactly.
pub fn combine_vs(traj: f64, exp: f64, omega_e: f64) -> f64 {
    let mut total = 0.0;
    if omega_e != 1.0 {
        total += (1.0 - omega_e) * traj;
    }
    if omega_e != 0.0 {
        total += omega_e * exp;
    }
    total
}

/// `L_vs + lambda_n L(P_s, N~_s)`. Scenes without synthetic pixels
/// contribute only `L_vs`.
pub fn total_pn_loss(inputs: &PnInputs, config: &PnConfig) -> Result<PnLoss> {
    config.validate()?;
    let mut loss = vs_loss(inputs, config.omega_e, config.temperature, config.include_positive)?;
    if config.lambda_n > 0.0 && !inputs.synthetic.is_empty() {
        let c = contrastive_loss(inputs.p_s, inputs.synthetic, config.temperature, config.include_positive)?;
        loss.terms.l_syn_contra = c.value;
        loss.grad.p_s.add_scaled(config.lambda_n, &c.d_positive);
        loss.grad.synthetic.add_scaled(config.lambda_n, &c.d_negative);
        loss.terms.total += config.lambda_n * c.value;
    }
    Ok(loss)
}

/// Per-set sample caps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleCaps {
    pub positive: usize,
    pub negative: usize,
    pub synthetic: usize,
}

impl Default for SampleCaps {
    fn default() -> Self {
        Self {
            positive: 256,
            negative: 256,
            synthetic: 256,
        }
    }
}

/// Geometry of the simulated expanded supervision.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionConfig {
    /// Positive pixels are dilated by this Euclidean radius.
    pub radius: f64,
    /// Expanded negatives lie farther than `radius + margin` from any positive.
    pub margin: f64,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        Self { radius: 6.0, margin: 2.0 }
    }
}

/// Flat pixel indices, each list sorted ascending.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SampleSets {
    pub p_s: Vec<usize>,
    pub n_s: Vec<usize>,
    pub p_e: Vec<usize>,
    pub n_e: Vec<usize>,
    pub synthetic: Vec<usize>,
}

impl SampleSets {
    /// Sorted, deduplicated union of all sets.
    pub fn pixels(&self) -> Vec<usize> {
        let mut all: Vec<usize> = [&self.p_s, &self.n_s, &self.p_e, &self.n_e, &self.synthetic]
            .into_iter()
            .flatten()
            .copied()
            .collect();
        all.sort_unstable();
        all.dedup();
        all
    }
}

fn sample<R: Rng>(pool: Vec<usize>, cap: usize, rng: &mut R) -> Vec<usize> {
    if pool.len() <= cap {
        return pool;
    }
    let mut picked: Vec<usize> = index::sample(rng, pool.len(), cap).into_iter().map(|i| pool[i]).collect();
    picked.sort_unstable();
    picked
}

/// Samples trajectory, expanded and synthetic sets from a PN label mask.
/// Synthetic pixels never enter the expanded sets.
pub fn build_sample_sets<R: Rng>(labels: &LabelMask, caps: SampleCaps, expansion: ExpansionConfig, rng: &mut R) -> Result<SampleSets> {
    let positives = labels.indices(Label::Positive);
    if positives.len() < 2 {
        return Err(Error::DegeneratePositiveSet(positives.len()));
    }
    let sites: Vec<bool> = labels.labels.iter().map(|&l| l == Label::Positive).collect();
    let d2 = squared_distance_transform(&sites, labels.height, labels.width);
    let near = expansion.radius * expansion.radius;
    let far = (expansion.radius + expansion.margin).powi(2);
    let mut p_e = Vec::new();
    let mut n_e = Vec::new();
    for (i, (&d, &l)) in d2.iter().zip(&labels.labels).enumerate() {
        if l == Label::NegSynthetic {
            continue;
        }
        if d <= near {
            p_e.push(i);
        } else if d > far {
            n_e.push(i);
        }
    }
    let n_s = labels.indices(Label::NegLowConf);
    let syn = labels.indices(Label::NegSynthetic);
    Ok(SampleSets {
        p_s: sample(positives, caps.positive, rng),
        n_s: sample(n_s, caps.negative, rng),
        p_e: sample(p_e, caps.positive, rng),
        n_e: sample(n_e, caps.negative, rng),
        synthetic: sample(syn, caps.synthetic, rng),
    })
}
