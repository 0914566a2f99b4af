//! Positive–unlabeled objective: the LORT-style base loss (compactness,
//! prototype cross-entropy, two-view consistency) extended with
//! negative-center assignment and center repulsion.
//!
//! All functions take raw (unnormalized) features and centers, normalize
//! on entry, and return gradients w.r.t. the raw inputs.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::losses::assign::{sinkhorn_targets, softmax_responsibilities, SinkhornConfig, TargetMatrix};
use crate::mat::{axpy, dot, log_sum_exp, normalize_rows, softmax_in_place, unit_vector, unit_vector_backward, Mat};

/// Clamp on `1 - cos` inside the repulsion logs.
pub const REPULSION_FLOOR: f64 = 1e-6;

/// Positive center, `K` negative centers and `M` unlabeled prototypes.
/// Stored unnormalized; every loss normalizes on use.
#[derive(Clone, Debug, PartialEq)]
pub struct CenterBank {
    pub c_pos: Vec<f64>,
    pub c_neg: Mat,
    pub prototypes: Mat,
}

impl CenterBank {
    pub fn zeros(dim: usize, k: usize, m: usize) -> Self {
        Self {
            c_pos: vec![0.0; dim],
            c_neg: Mat::zeros(k, dim),
            prototypes: Mat::zeros(m, dim),
        }
    }

    /// Random unit directions for every center.
    pub fn random<R: Rng>(dim: usize, k: usize, m: usize, rng: &mut R) -> Self {
        let mut unit = || -> Vec<f64> {
            loop {
                let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut *rng)).collect();
                if let Some(u) = unit_vector(&v) {
                    return u;
                }
            }
        };
        let c_pos = unit();
        let neg: Vec<Vec<f64>> = (0..k).map(|_| unit()).collect();
        let protos: Vec<Vec<f64>> = (0..m).map(|_| unit()).collect();
        Self {
            c_pos,
            c_neg: Mat::from_rows(&neg, dim),
            prototypes: Mat::from_rows(&protos, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.c_pos.len()
    }

    pub fn k(&self) -> usize {
        self.c_neg.rows()
    }

    pub fn m(&self) -> usize {
        self.prototypes.rows()
    }

    pub fn param_count(&self) -> usize {
        self.dim() * (1 + self.k() + self.m())
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.k() < 2 {
            return Err(config_err("need at least two negative centers"));
        }
        if self.c_neg.cols() != d || self.prototypes.cols() != d {
            return Err(config_err("center dimensions disagree"));
        }
        let zero = |v: &[f64]| unit_vector(v).is_none();
        if zero(&self.c_pos) || self.c_neg.iter_rows().any(zero) || self.prototypes.iter_rows().any(zero) {
            return Err(config_err("a center is the zero vector"));
        }
        Ok(())
    }

    /// Flat order: `c_pos`, `c_neg` rows, prototype rows.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.c_pos.clone();
        v.extend_from_slice(self.c_neg.as_slice());
        v.extend_from_slice(self.prototypes.as_slice());
        v
    }

    pub fn from_flat(dim: usize, k: usize, m: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != dim * (1 + k + m) {
            return Err(config_err("center parameter count mismatch"));
        }
        Ok(Self {
            c_pos: flat[..dim].to_vec(),
            c_neg: Mat::from_vec(k, dim, flat[dim..dim * (1 + k)].to_vec()),
            prototypes: Mat::from_vec(m, dim, flat[dim * (1 + k)..].to_vec()),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PuConfig {
    /// Mixing weight between compactness and prototype cross-entropy.
    pub tau_mix: f64,
    /// Softmax temperature for center/prototype assignment and view consistency.
    pub temperature: f64,
    pub lambda_n: f64,
    pub lambda_u: f64,
    pub lambda_neg: f64,
    pub lambda_rep: f64,
    pub gamma: f64,
    pub sinkhorn: SinkhornConfig,
}

impl Default for PuConfig {
    fn default() -> Self {
        Self {
            tau_mix: 0.5,
            temperature: 0.55,
            lambda_n: 0.5,
            lambda_u: 0.5,
            lambda_neg: 0.5,
            lambda_rep: 0.5,
            gamma: 0.1,
            sinkhorn: SinkhornConfig::default(),
        }
    }
}

impl PuConfig {
    pub fn validate(&self) -> Result<()> {
        check_simplex(self.lambda_n, self.lambda_u)?;
        if !(0.0..=1.0).contains(&self.tau_mix) {
            return Err(config_err("tau_mix must lie in [0, 1]"));
        }
        if !(self.temperature > 0.0) {
            return Err(config_err("temperature must be positive"));
        }
        if self.lambda_neg < 0.0 || self.lambda_rep < 0.0 || self.gamma < 0.0 {
            return Err(config_err("loss weights must be non-negative"));
        }
        Ok(())
    }
}

fn check_simplex(lambda_n: f64, lambda_u: f64) -> Result<()> {
    if lambda_n < 0.0 || lambda_u < 0.0 || (lambda_n + lambda_u - 1.0).abs() > 1e-12 {
        return Err(config_err(format!(
            "lambda_N and lambda_U must be non-negative and sum to 1, got {lambda_n} and {lambda_u}"
        )));
    }
    Ok(())
}

/// Value of a loss and its gradient w.r.t. raw features and one center group.
#[derive(Clone, Debug)]
pub struct SoftAssignGrad {
    pub value: f64,
    pub d_features: Mat,
    pub d_centers: Mat,
}

/// `-(1/n) sum_i sum_k T_ik log softmax_k(<f_i, c_k> / temperature)`.
/// With `Some(T)` the targets are constants; with `None` they are the
/// softmax itself and the gradient flows through them as well.
fn soft_assignment_ce(features: &Mat, centers: &Mat, targets: Option<&TargetMatrix>, temperature: f64) -> Result<SoftAssignGrad> {
    if features.is_empty() {
        return Err(Error::EmptyFeatureSet);
    }
    if !(temperature > 0.0) {
        return Err(config_err("temperature must be positive"));
    }
    if let Some(t) = targets {
        if t.rows() != features.rows() || t.as_mat().cols() != centers.rows() {
            return Err(config_err("target matrix shape does not match features x centers"));
        }
    }
    let fu = normalize_rows(features);
    let cu = normalize_rows(centers);
    if !cu.degenerate.is_empty() {
        return Err(config_err("a center is the zero vector"));
    }
    let (n, k) = (features.rows(), centers.rows());
    let mut d_f = Mat::zeros(n, features.cols());
    let mut d_c = Mat::zeros(k, centers.cols());
    let mut logits = vec![0.0; k];
    let mut value = 0.0;
    for i in 0..n {
        let f = fu.unit.row(i);
        for j in 0..k {
            logits[j] = dot(f, cu.unit.row(j)) / temperature;
        }
        let lse = log_sum_exp(&logits);
        let mut p = logits.clone();
        softmax_in_place(&mut p);
        // d(loss_i)/d(logit_j)
        let d_logit: Vec<f64> = match targets {
            Some(t) => {
                let t = t.row(i);
                let t_sum: f64 = t.iter().sum();
                value -= (0..k).map(|j| t[j] * (logits[j] - lse)).sum::<f64>();
                (0..k).map(|j| p[j] * t_sum - t[j]).collect()
            }
            None => {
                let log_p: Vec<f64> = logits.iter().map(|l| l - lse).collect();
                let entropy = -(0..k).map(|j| p[j] * log_p[j]).sum::<f64>();
                value += entropy;
                (0..k).map(|j| -p[j] * (log_p[j] + entropy)).collect()
            }
        };
        for j in 0..k {
            let ds = d_logit[j] / (n as f64 * temperature);
            if ds == 0.0 {
                continue;
            }
            axpy(ds, cu.unit.row(j), d_f.row_mut(i));
            axpy(ds, f, d_c.row_mut(j));
        }
    }
    Ok(SoftAssignGrad {
        value: value / n as f64,
        d_features: fu.backward(&d_f),
        d_centers: cu.backward(&d_c),
    })
}

/// Negative-center loss with constant soft targets.
pub fn neg_center_loss(features: &Mat, neg_centers: &Mat, targets: &TargetMatrix, temperature: f64) -> Result<SoftAssignGrad> {
    soft_assignment_ce(features, neg_centers, Some(targets), temperature)
}

/// Negative-center loss whose targets are the softmax responsibilities
/// themselves, differentiated through. Its value is the mean row entropy
/// of the responsibilities; the gradient sharpens each assignment.
pub fn responsibility_loss(features: &Mat, neg_centers: &Mat, temperature: f64) -> Result<SoftAssignGrad> {
    soft_assignment_ce(features, neg_centers, None, temperature)
}

/// Prototype soft-assignment cross-entropy over unlabeled features (the base
/// objective's clustering term). Same form as [`neg_center_loss`], over prototypes.
pub fn prototype_ce_loss(features: &Mat, prototypes: &Mat, targets: &TargetMatrix, temperature: f64) -> Result<SoftAssignGrad> {
    soft_assignment_ce(features, prototypes, Some(targets), temperature)
}

/// `lambda_n * l_syn + lambda_u * l_unl` on the simplex.
pub fn combined_neg_loss(l_syn: f64, l_unl: f64, lambda_n: f64, lambda_u: f64) -> Result<f64> {
    check_simplex(lambda_n, lambda_u)?;
    Ok(lambda_n * l_syn + lambda_u * l_unl)
}

#[derive(Clone, Debug)]
pub struct RepulsionGrad {
    pub value: f64,
    pub d_neg: Mat,
    pub d_pos: Vec<f64>,
}

/// Pushes negative centers away from the positive center and from each
/// other. The pairwise sum runs over ordered pairs `i != j`.
pub fn repulsion_loss(neg_centers: &Mat, pos_center: &[f64], gamma: f64) -> Result<RepulsionGrad> {
    let k = neg_centers.rows();
    if k < 2 {
        return Err(config_err(format!("repulsion needs K >= 2, got {k}")));
    }
    let nu = normalize_rows(neg_centers);
    let pu = unit_vector(pos_center);
    let (Some(pu), true) = (pu, nu.degenerate.is_empty()) else {
        return Err(config_err("a center is the zero vector"));
    };
    let kf = k as f64;
    let mut d_n = Mat::zeros(k, neg_centers.cols());
    let mut d_p = vec![0.0; pos_center.len()];
    let mut value = 0.0;
    for i in 0..k {
        let a = dot(nu.unit.row(i), &pu);
        let arg = 1.0 - a;
        value -= arg.max(REPULSION_FLOOR).ln() / kf;
        if arg > REPULSION_FLOOR {
            let da = 1.0 / (kf * arg);
            axpy(da, &pu, d_n.row_mut(i));
            axpy(da, nu.unit.row(i), &mut d_p);
        }
    }
    let pair_w = gamma / (kf * (kf - 1.0));
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            let b = dot(nu.unit.row(i), nu.unit.row(j));
            let arg = 1.0 - b;
            value -= pair_w * arg.max(REPULSION_FLOOR).ln();
            if arg > REPULSION_FLOOR {
                let db = pair_w / arg;
                let uj = nu.unit.row(j).to_vec();
                let ui = nu.unit.row(i).to_vec();
                axpy(db, &uj, d_n.row_mut(i));
                axpy(db, &ui, d_n.row_mut(j));
            }
        }
    }
    Ok(RepulsionGrad {
        value,
        d_neg: nu.backward(&d_n),
        d_pos: unit_vector_backward(pos_center, &d_p),
    })
}

#[derive(Clone, Debug)]
pub struct CompactnessGrad {
    pub value: f64,
    pub d_features: Mat,
    pub d_center: Vec<f64>,
}

/// Mean squared distance of unit positive features to the unit positive center.
pub fn compactness_loss(features: &Mat, c_pos: &[f64]) -> Result<CompactnessGrad> {
    if features.is_empty() {
        return Err(Error::EmptyFeatureSet);
    }
    let Some(cu) = unit_vector(c_pos) else {
        return Err(config_err("positive center is the zero vector"));
    };
    let fu = normalize_rows(features);
    let n = features.rows() as f64;
    let mut d_f = Mat::zeros(features.rows(), features.cols());
    let mut d_c = vec![0.0; c_pos.len()];
    let mut value = 0.0;
    for i in 0..features.rows() {
        let f = fu.unit.row(i);
        value += f.iter().zip(&cu).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        axpy(-2.0 / n, &cu, d_f.row_mut(i));
        axpy(-2.0 / n, f, &mut d_c);
    }
    Ok(CompactnessGrad {
        value: value / n,
        d_features: fu.backward(&d_f),
        d_center: unit_vector_backward(c_pos, &d_c),
    })
}

#[derive(Clone, Debug)]
pub struct PairGrad {
    pub value: f64,
    pub d_a: Mat,
    pub d_b: Mat,
}

/// Symmetric cross-view InfoNCE: row `i` of `view_a` and row `i` of
/// `view_b` are the same pixel; every other row is a negative.
pub fn view_consistency_loss(view_a: &Mat, view_b: &Mat, temperature: f64) -> Result<PairGrad> {
    if view_a.is_empty() {
        return Err(Error::EmptyFeatureSet);
    }
    if view_a.rows() != view_b.rows() || view_a.cols() != view_b.cols() {
        return Err(config_err("view feature sets must have the same shape"));
    }
    if !(temperature > 0.0) {
        return Err(config_err("temperature must be positive"));
    }
    let n = view_a.rows();
    let au = normalize_rows(view_a);
    let bu = normalize_rows(view_b);
    let mut s = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            s.row_mut(i)[j] = dot(au.unit.row(i), bu.unit.row(j)) / temperature;
        }
    }
    let mut value = 0.0;
    let mut ds = Mat::zeros(n, n);
    let scale = 0.5 / n as f64;
    // a -> b: softmax over each row
    for i in 0..n {
        let row = s.row(i).to_vec();
        value += log_sum_exp(&row) - row[i];
        let mut p = row;
        softmax_in_place(&mut p);
        p[i] -= 1.0;
        axpy(scale, &p, ds.row_mut(i));
    }
    // b -> a: softmax over each column
    let mut col = vec![0.0; n];
    for j in 0..n {
        for i in 0..n {
            col[i] = s.row(i)[j];
        }
        value += log_sum_exp(&col) - col[j];
        softmax_in_place(&mut col);
        col[j] -= 1.0;
        for i in 0..n {
            ds.row_mut(i)[j] += scale * col[i];
        }
    }
    let mut d_a = Mat::zeros(n, view_a.cols());
    let mut d_b = Mat::zeros(n, view_b.cols());
    for i in 0..n {
        for j in 0..n {
            let g = ds.row(i)[j] / temperature;
            if g == 0.0 {
                continue;
            }
            axpy(g, bu.unit.row(j), d_a.row_mut(i));
            axpy(g, au.unit.row(i), d_b.row_mut(j));
        }
    }
    Ok(PairGrad {
        value: value * scale,
        d_a: au.backward(&d_a),
        d_b: bu.backward(&d_b),
    })
}

/// Feature rows for one PU evaluation.
#[derive(Clone, Copy, Debug)]
pub struct PuInputs<'a> {
    pub positive: &'a Mat,
    pub unlabeled: &'a Mat,
    pub synthetic: &'a Mat,
    /// Same pixels under two augmentations, for the consistency term.
    pub views: Option<(&'a Mat, &'a Mat)>,
    /// Unlabeled rows under the second augmentation; source of the prototype targets.
    pub unlabeled_view: Option<&'a Mat>,
}

/// Soft targets, computed once per step and held constant in the loss.
#[derive(Clone, Debug)]
pub struct PuTargets {
    pub prototypes: Option<TargetMatrix>,
    pub unlabeled: Option<TargetMatrix>,
    pub sinkhorn_residual: f64,
    pub sinkhorn_converged: bool,
}

/// Computes every target the objective needs. Negative-center targets are
/// skipped when `lambda_neg` is zero or the source set is too small.
pub fn pu_targets(inputs: &PuInputs, centers: &CenterBank, config: &PuConfig) -> Result<PuTargets> {
    let source = inputs.unlabeled_view.unwrap_or(inputs.unlabeled);
    let prototypes = if inputs.unlabeled.is_empty() || config.tau_mix == 0.0 {
        None
    } else {
        Some(softmax_responsibilities(source, &centers.prototypes, config.temperature)?)
    };
    let mut out = PuTargets {
        prototypes,
        unlabeled: None,
        sinkhorn_residual: 0.0,
        sinkhorn_converged: true,
    };
    if config.lambda_neg > 0.0 {
        if inputs.unlabeled.rows() >= centers.k() && config.lambda_u > 0.0 {
            let sk = sinkhorn_targets(inputs.unlabeled, &centers.c_neg, &config.sinkhorn)?;
            out.sinkhorn_residual = sk.residual;
            out.sinkhorn_converged = sk.converged;
            out.unlabeled = Some(sk.targets);
        }
    }
    Ok(out)
}

/// Named terms of the PU objective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PuTerms {
    pub total: f64,
    pub l_lort: f64,
    pub l_occ: f64,
    pub l_ce: f64,
    pub l_simclr: f64,
    pub l_neg_syn: f64,
    pub l_neg_unl: f64,
    pub l_rep: f64,
}

impl PuTerms {
    pub const NAMES: [&'static str; 8] = ["total", "l_lort", "l_occ", "l_ce", "l_simclr", "l_neg_syn", "l_neg_unl", "l_rep"];

    pub fn values(&self) -> [f64; 8] {
        [self.total, self.l_lort, self.l_occ, self.l_ce, self.l_simclr, self.l_neg_syn, self.l_neg_unl, self.l_rep]
    }
}

/// Gradients w.r.t. every input of [`PuInputs`] and the centers.
#[derive(Clone, Debug)]
pub struct PuGrad {
    pub positive: Mat,
    pub unlabeled: Mat,
    pub synthetic: Mat,
    pub view_a: Option<Mat>,
    pub view_b: Option<Mat>,
    pub centers: CenterBank,
}

#[derive(Clone, Debug)]
pub struct PuLoss {
    pub terms: PuTerms,
    pub grad: PuGrad,
}

fn empty_grad(inputs: &PuInputs, centers: &CenterBank) -> PuGrad {
    let like = |m: &Mat| Mat::zeros(m.rows(), m.cols());
    PuGrad {
        positive: like(inputs.positive),
        unlabeled: like(inputs.unlabeled),
        synthetic: like(inputs.synthetic),
        view_a: inputs.views.map(|(a, _)| like(a)),
        view_b: inputs.views.map(|(_, b)| like(b)),
        centers: CenterBank::zeros(centers.dim(), centers.k(), centers.m()),
    }
}

/// `(1 - tau_mix) L_occ + tau_mix L_ce + L_simclr`.
pub fn lort_base_loss(inputs: &PuInputs, centers: &CenterBank, targets: &PuTargets, config: &PuConfig) -> Result<PuLoss> {
    if inputs.positive.is_empty() {
        return Err(Error::EmptyFeatureSet);
    }
    let mut grad = empty_grad(inputs, centers);
    let mut terms = PuTerms::default();
    let w_occ = 1.0 - config.tau_mix;
    let w_ce = config.tau_mix;

    let occ = compactness_loss(inputs.positive, &centers.c_pos)?;
    terms.l_occ = occ.value;
    if w_occ != 0.0 {
        grad.positive.add_scaled(w_occ, &occ.d_features);
        axpy(w_occ, &occ.d_center, &mut grad.centers.c_pos);
    }

    if w_ce != 0.0 {
        if let Some(t) = &targets.prototypes {
            let ce = prototype_ce_loss(inputs.unlabeled, &centers.prototypes, t, config.temperature)?;
            terms.l_ce = ce.value;
            grad.unlabeled.add_scaled(w_ce, &ce.d_features);
            grad.centers.prototypes.add_scaled(w_ce, &ce.d_centers);
        }
    }

    if let Some((a, b)) = inputs.views {
        let pair = view_consistency_loss(a, b, config.temperature)?;
        terms.l_simclr = pair.value;
        if let Some(g) = grad.view_a.as_mut() {
            g.add_scaled(1.0, &pair.d_a);
        }
        if let Some(g) = grad.view_b.as_mut() {
            g.add_scaled(1.0, &pair.d_b);
        }
    }

    terms.l_lort = w_occ * terms.l_occ + w_ce * terms.l_ce + terms.l_simclr;
    terms.total = terms.l_lort;
    Ok(PuLoss { terms, grad })
}

/// `L_lort + lambda_neg (lambda_N L_neg^syn + lambda_U L_neg^unl) + lambda_rep L_rep`.
///
/// A negative-center term whose targets are absent (no synthetic pixels in
/// the scene, or fewer unlabeled rows than centers) contributes zero.
/// Zero-weighted terms are not evaluated.
pub fn total_pu_loss(inputs: &PuInputs, centers: &CenterBank, targets: &PuTargets, config: &PuConfig) -> Result<PuLoss> {
    config.validate()?;
    let mut loss = lort_base_loss(inputs, centers, targets, config)?;
    let terms = &mut loss.terms;
    let grad = &mut loss.grad;

    if config.lambda_neg > 0.0 {
        if !inputs.synthetic.is_empty() && config.lambda_n > 0.0 {
            let syn = responsibility_loss(inputs.synthetic, &centers.c_neg, config.temperature)?;
            terms.l_neg_syn = syn.value;
            let w = config.lambda_neg * config.lambda_n;
            grad.synthetic.add_scaled(w, &syn.d_features);
            grad.centers.c_neg.add_scaled(w, &syn.d_centers);
        }
        if let Some(t) = &targets.unlabeled {
            let unl = neg_center_loss(inputs.unlabeled, &centers.c_neg, t, config.temperature)?;
            terms.l_neg_unl = unl.value;
            let w = config.lambda_neg * config.lambda_u;
            grad.unlabeled.add_scaled(w, &unl.d_features);
            grad.centers.c_neg.add_scaled(w, &unl.d_centers);
        }
    }
    if config.lambda_rep > 0.0 {
        let rep = repulsion_loss(&centers.c_neg, &centers.c_pos, config.gamma)?;
        terms.l_rep = rep.value;
        grad.centers.c_neg.add_scaled(config.lambda_rep, &rep.d_neg);
        axpy(config.lambda_rep, &rep.d_pos, &mut grad.centers.c_pos);
    }
    let l_neg = combined_neg_loss(terms.l_neg_syn, terms.l_neg_unl, config.lambda_n, config.lambda_u)?;
    terms.total = terms.l_lort + config.lambda_neg * l_neg + config.lambda_rep * terms.l_rep;
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(d: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    }

    #[test]
    fn uniform_targets_give_ln_k() {
        let f = Mat::from_rows(&[e(5, 4), e(5, 4)], 5);
        let c = Mat::from_rows(&[e(5, 0), e(5, 1), e(5, 2), e(5, 3)], 5);
        let l = neg_center_loss(&f, &c, &TargetMatrix::uniform(2, 4), 0.55).unwrap();
        assert!((l.value - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn one_hot_target_hand_value() {
        let f = Mat::from_rows(&[e(2, 0)], 2);
        let c = Mat::from_rows(&[e(2, 0), e(2, 1)], 2);
        let t = TargetMatrix::new(Mat::from_vec(1, 2, vec![1.0, 0.0])).unwrap();
        let l = neg_center_loss(&f, &c, &t, 1.0).unwrap();
        let expect = -(std::f64::consts::E / (std::f64::consts::E + 1.0)).ln();
        assert!((l.value - expect).abs() < 1e-12);
        assert!((l.value - 0.3133).abs() < 1e-4);
    }

    #[test]
    fn simplex_violation_is_a_config_error() {
        assert!((combined_neg_loss(0.4, 0.8, 0.5, 0.5).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(combined_neg_loss(0.4, 0.8, 1.0, 0.0).unwrap(), 0.4);
        assert!(matches!(combined_neg_loss(0.4, 0.8, 0.6, 0.6), Err(Error::Config(_))));
        assert!(matches!(combined_neg_loss(0.4, 0.8, -0.5, 1.5), Err(Error::Config(_))));
    }

    #[test]
    fn repulsion_values() {
        let pos = e(4, 3);
        let orth = Mat::from_rows(&[e(4, 0), e(4, 1), e(4, 2)], 4);
        assert_eq!(repulsion_loss(&orth, &pos, 0.1).unwrap().value, 0.0);

        let c1 = vec![0.75f64.sqrt(), 0.0, 0.0, 0.5];
        let neg = Mat::from_rows(&[c1, e(4, 1)], 4);
        let l = repulsion_loss(&neg, &pos, 0.1).unwrap();
        assert!((l.value - (-0.5 * 0.5f64.ln())).abs() < 1e-12);
        assert!((l.value - 0.3466).abs() < 1e-4);

        assert!(matches!(repulsion_loss(&Mat::from_rows(&[e(4, 0)], 4), &pos, 0.1), Err(Error::Config(_))));
    }

    #[test]
    fn repulsion_clamps_coincident_centers() {
        let pos = e(3, 0);
        let neg = Mat::from_rows(&[e(3, 0), e(3, 0)], 3);
        let l = repulsion_loss(&neg, &pos, 0.1).unwrap();
        assert!(l.value.is_finite());
        assert!((l.value - (-(1e-6f64).ln() * 1.1)).abs() < 1e-9);
    }

    #[test]
    fn compactness_is_zero_at_the_center() {
        let c = vec![0.0, 2.0, 0.0];
        let f = Mat::from_rows(&[vec![0.0, 1.0, 0.0], vec![0.0, 5.0, 0.0]], 3);
        assert!(compactness_loss(&f, &c).unwrap().value.abs() < 1e-15);
    }

    #[test]
    fn empty_positive_set_is_rejected() {
        let centers = CenterBank::random(3, 2, 2, &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(1));
        let empty = Mat::zeros(0, 3);
        let inputs = PuInputs {
            positive: &empty,
            unlabeled: &empty,
            synthetic: &empty,
            views: None,
            unlabeled_view: None,
        };
        let targets = pu_targets(&inputs, &centers, &PuConfig::default()).unwrap();
        assert!(matches!(
            lort_base_loss(&inputs, &centers, &targets, &PuConfig::default()),
            Err(Error::EmptyFeatureSet)
        ));
    }

    #[test]
    fn responsibility_loss_is_the_target_entropy() {
        let f = Mat::from_vec(3, 3, vec![0.3, -1.0, 0.2, 1.0, 0.5, 0.1, -0.4, 0.2, 0.9]);
        let c = Mat::from_vec(2, 3, vec![1.0, 0.0, 0.2, 0.1, 1.0, -0.3]);
        let t = softmax_responsibilities(&f, &c, 0.55).unwrap();
        let fixed = neg_center_loss(&f, &c, &t, 0.55).unwrap();
        let through = responsibility_loss(&f, &c, 0.55).unwrap();
        assert!((fixed.value - t.mean_entropy()).abs() < 1e-12);
        assert!((through.value - fixed.value).abs() < 1e-12);
        // frozen self-targets give no gradient at all
        assert!(fixed.d_features.as_slice().iter().all(|g| g.abs() < 1e-12));

        let h = 1e-6;
        for idx in 0..9 {
            let mut plus = f.clone();
            plus.as_mut_slice()[idx] += h;
            let mut minus = f.clone();
            minus.as_mut_slice()[idx] -= h;
            let fd = (responsibility_loss(&plus, &c, 0.55).unwrap().value - responsibility_loss(&minus, &c, 0.55).unwrap().value) / (2.0 * h);
            assert!((fd - through.d_features.as_slice()[idx]).abs() < 1e-7);
        }
    }
}
