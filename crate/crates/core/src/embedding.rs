//! Per-pixel feature extractor: a two-layer tanh map from a clamp-padded
//! `(2r+1)^2 x C` neighbourhood to `D` outputs, L2-normalized.
//!
//! Training works on the raw (pre-normalization) outputs; every loss
//! normalizes on entry and returns gradients w.r.t. the raw rows, which
//! [`backward`] carries to the parameters.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::mat::{normalize_rows, Mat};
use crate::scene::Scene;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingShape {
    pub channels: usize,
    pub radius: usize,
    pub hidden: usize,
    pub dim: usize,
}

impl Default for EmbeddingShape {
    fn default() -> Self {
        Self {
            channels: 4,
            radius: 2,
            hidden: 24,
            dim: 16,
        }
    }
}

impl EmbeddingShape {
    pub fn input_len(&self) -> usize {
        let side = 2 * self.radius + 1;
        side * side * self.channels
    }

    pub fn param_count(&self) -> usize {
        self.hidden * self.input_len() + self.hidden + self.dim * self.hidden + self.dim
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.hidden == 0 || self.dim == 0 {
            return Err(config_err("embedding channels, hidden and dim must be positive"));
        }
        Ok(())
    }
}

/// Weights in flat order `w1 (hidden x input), b1, w2 (dim x hidden), b2`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingParams {
    pub shape: EmbeddingShape,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl EmbeddingParams {
    pub fn zeros(shape: EmbeddingShape) -> Self {
        Self {
            shape,
            w1: vec![0.0; shape.hidden * shape.input_len()],
            b1: vec![0.0; shape.hidden],
            w2: vec![0.0; shape.dim * shape.hidden],
            b2: vec![0.0; shape.dim],
        }
    }

    /// Scaled-normal initialization.
    pub fn init<R: Rng>(shape: EmbeddingShape, rng: &mut R) -> Self {
        let mut p = Self::zeros(shape);
        let s1 = (1.0 / shape.input_len() as f64).sqrt() * 2.0;
        let s2 = (1.0 / shape.hidden as f64).sqrt();
        let mut normal = |scale: f64| -> f64 {
            let z: f64 = StandardNormal.sample(rng);
            z * scale
        };
        p.w1.iter_mut().for_each(|w| *w = normal(s1));
        p.b1.iter_mut().for_each(|b| *b = normal(0.1));
        p.w2.iter_mut().for_each(|w| *w = normal(s2));
        p.b2.iter_mut().for_each(|b| *b = normal(0.1));
        p
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.shape.param_count());
        v.extend_from_slice(&self.w1);
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(&self.w2);
        v.extend_from_slice(&self.b2);
        v
    }

    pub fn from_flat(shape: EmbeddingShape, flat: &[f64]) -> Result<Self> {
        if flat.len() != shape.param_count() {
            return Err(config_err(format!(
                "expected {} embedding parameters, got {}",
                shape.param_count(),
                flat.len()
            )));
        }
        let mut p = Self::zeros(shape);
        let (a, rest) = flat.split_at(p.w1.len());
        let (b, rest) = rest.split_at(p.b1.len());
        let (c, d) = rest.split_at(p.w2.len());
        p.w1.copy_from_slice(a);
        p.b1.copy_from_slice(b);
        p.w2.copy_from_slice(c);
        p.b2.copy_from_slice(d);
        Ok(p)
    }

    pub fn is_finite(&self) -> bool {
        self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2).all(|v| v.is_finite())
    }
}

/// Writes the clamp-padded neighbourhood of `(row, col)` into `out`,
/// ordered by `(dy, dx, channel)`.
pub fn patch_descriptor(scene: &Scene, row: usize, col: usize, radius: usize, out: &mut [f64]) {
    let (h, w) = (scene.height() as i64, scene.width() as i64);
    let r = radius as i64;
    let channels = scene.channels();
    let mut k = 0;
    for dy in -r..=r {
        let rr = (row as i64 + dy).clamp(0, h - 1) as usize;
        for dx in -r..=r {
            let cc = (col as i64 + dx).clamp(0, w - 1) as usize;
            for ch in 0..channels {
                out[k] = scene.value(ch, rr, cc) as f64;
                k += 1;
            }
        }
    }
}

/// Cached forward pass over a set of pixels.
#[derive(Clone, Debug)]
pub struct Activations {
    pub pixels: Vec<usize>,
    inputs: Mat,
    hidden: Mat,
    /// Pre-normalization outputs, one row per pixel.
    pub raw: Mat,
}

fn check_shape(scene: &Scene, params: &EmbeddingParams) -> Result<()> {
    params.shape.validate()?;
    if scene.channels() != params.shape.channels {
        return Err(config_err(format!(
            "scene has {} channels, embedding expects {}",
            scene.channels(),
            params.shape.channels
        )));
    }
    Ok(())
}

/// Raw outputs at the given flat pixel indices.
pub fn forward_pixels(scene: &Scene, params: &EmbeddingParams, pixels: &[usize]) -> Result<Activations> {
    check_shape(scene, params)?;
    let shape = params.shape;
    let n_in = shape.input_len();
    let mut inputs = Mat::zeros(pixels.len(), n_in);
    let mut hidden = Mat::zeros(pixels.len(), shape.hidden);
    let mut raw = Mat::zeros(pixels.len(), shape.dim);
    for (i, &p) in pixels.iter().enumerate() {
        if p >= scene.pixel_count() {
            return Err(config_err(format!("pixel index {p} is outside the scene")));
        }
        let x = inputs.row_mut(i);
        patch_descriptor(scene, p / scene.width(), p % scene.width(), shape.radius, x);
        let x = inputs.row(i);
        let hrow = hidden.row_mut(i);
        for (j, hj) in hrow.iter_mut().enumerate() {
            let wrow = &params.w1[j * n_in..(j + 1) * n_in];
            let a: f64 = wrow.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + params.b1[j];
            *hj = a.tanh();
        }
        let hrow = hidden.row(i);
        for (k, zk) in raw.row_mut(i).iter_mut().enumerate() {
            let wrow = &params.w2[k * shape.hidden..(k + 1) * shape.hidden];
            *zk = wrow.iter().zip(hrow).map(|(w, v)| w * v).sum::<f64>() + params.b2[k];
        }
    }
    Ok(Activations {
        pixels: pixels.to_vec(),
        inputs,
        hidden,
        raw,
    })
}

/// Parameter gradient (flat layout) given `dL/d raw` for each cached pixel.
pub fn backward(params: &EmbeddingParams, acts: &Activations, d_raw: &Mat) -> Vec<f64> {
    let shape = params.shape;
    let n_in = shape.input_len();
    let mut g = EmbeddingParams::zeros(shape);
    let mut d_hidden = vec![0.0; shape.hidden];
    for i in 0..acts.pixels.len() {
        let dz = d_raw.row(i);
        if dz.iter().all(|&v| v == 0.0) {
            continue;
        }
        let h = acts.hidden.row(i);
        let x = acts.inputs.row(i);
        d_hidden.fill(0.0);
        for (k, &dzk) in dz.iter().enumerate() {
            g.b2[k] += dzk;
            let gw = &mut g.w2[k * shape.hidden..(k + 1) * shape.hidden];
            let w = &params.w2[k * shape.hidden..(k + 1) * shape.hidden];
            for j in 0..shape.hidden {
                gw[j] += dzk * h[j];
                d_hidden[j] += dzk * w[j];
            }
        }
        for j in 0..shape.hidden {
            let da = d_hidden[j] * (1.0 - h[j] * h[j]);
            if da == 0.0 {
                continue;
            }
            g.b1[j] += da;
            let gw = &mut g.w1[j * n_in..(j + 1) * n_in];
            for (gwi, xi) in gw.iter_mut().zip(x) {
                *gwi += da * xi;
            }
        }
    }
    g.to_flat()
}

/// Unit-norm features over a whole scene.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    pub height: usize,
    pub width: usize,
    pub vectors: Mat,
    /// Pixels whose raw output was (near) zero and were replaced by `e_0`.
    pub degenerate: Vec<usize>,
}

impl FeatureMap {
    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn vector(&self, row: usize, col: usize) -> &[f64] {
        self.vectors.row(row * self.width + col)
    }

    pub fn gather(&self, pixels: &[usize]) -> Mat {
        self.vectors.gather(pixels)
    }
}

pub fn forward(scene: &Scene, params: &EmbeddingParams) -> Result<FeatureMap> {
    let pixels: Vec<usize> = (0..scene.pixel_count()).collect();
    let acts = forward_pixels(scene, params, &pixels)?;
    let unit = normalize_rows(&acts.raw);
    Ok(FeatureMap {
        height: scene.height(),
        width: scene.width(),
        vectors: unit.unit,
        degenerate: unit.degenerate,
    })
}

/// Value and flat parameter gradient of `loss`, a function of the raw
/// outputs at `pixels` returning its value and `dL/d raw`.
pub fn grad<F>(scene: &Scene, params: &EmbeddingParams, pixels: &[usize], loss: F) -> Result<(f64, Vec<f64>)>
where
    F: FnOnce(&Mat) -> Result<(f64, Mat)>,
{
    let acts = forward_pixels(scene, params, pixels)?;
    let (value, d_raw) = loss(&acts.raw)?;
    if !value.is_finite() {
        return Err(Error::NonFiniteLoss {
            term: "loss".into(),
            epoch: 0,
            step: 0,
            breakdown: format!("{value}"),
        });
    }
    Ok((value, backward(params, &acts, &d_raw)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::norm;
    use crate::scene::{generate_scene, SceneConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scene16() -> Scene {
        let cfg = SceneConfig {
            height: 32,
            width: 32,
            channels: 3,
            ..SceneConfig::default()
        };
        generate_scene(&cfg, 5).unwrap().crop(8, 8, 16, 16).unwrap()
    }

    fn shape() -> EmbeddingShape {
        EmbeddingShape {
            channels: 3,
            radius: 1,
            hidden: 6,
            dim: 4,
        }
    }

    #[test]
    fn bias_only_network_is_input_independent() {
        let mut p = EmbeddingParams::zeros(shape());
        p.b2 = vec![3.0, 0.0, 4.0, 0.0];
        let f = forward(&scene16(), &p).unwrap();
        for row in f.vectors.iter_rows() {
            assert_eq!(row, &[0.6, 0.0, 0.8, 0.0]);
        }
    }

    #[test]
    fn all_zero_network_is_flagged() {
        let p = EmbeddingParams::zeros(shape());
        let f = forward(&scene16(), &p).unwrap();
        assert_eq!(f.degenerate.len(), 256);
        assert_eq!(f.vector(0, 0), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn random_network_outputs_unit_vectors() {
        let p = EmbeddingParams::init(shape(), &mut ChaCha8Rng::seed_from_u64(1));
        let s = scene16();
        let a = forward(&s, &p).unwrap();
        assert_eq!(a, forward(&s, &p).unwrap());
        for row in a.vectors.iter_rows() {
            assert!((norm(row) - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn changes_stay_within_the_receptive_field() {
        let p = EmbeddingParams::init(shape(), &mut ChaCha8Rng::seed_from_u64(2));
        let s = scene16();
        let mut t = s.clone();
        t.set_value(1, 7, 9, 1.0 - s.value(1, 7, 9));
        let (a, b) = (forward(&s, &p).unwrap(), forward(&t, &p).unwrap());
        for r in 0..16usize {
            for c in 0..16usize {
                let far = r.abs_diff(7) > 1 || c.abs_diff(9) > 1;
                if far {
                    assert_eq!(a.vector(r, c), b.vector(r, c), "({r}, {c})");
                }
            }
        }
        assert_ne!(a.vector(7, 9), b.vector(7, 9));
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        let p = EmbeddingParams::init(shape(), &mut ChaCha8Rng::seed_from_u64(3));
        let (v, g) = grad(&scene16(), &p, &[0, 5, 17], |raw| Ok((2.5, Mat::zeros(raw.rows(), raw.cols())))).unwrap();
        assert_eq!(v, 2.5);
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn non_finite_loss_is_reported() {
        let p = EmbeddingParams::init(shape(), &mut ChaCha8Rng::seed_from_u64(3));
        let r = grad(&scene16(), &p, &[0], |raw| Ok((f64::NAN, Mat::zeros(raw.rows(), raw.cols()))));
        assert!(matches!(r, Err(Error::NonFiniteLoss { .. })));
    }

    #[test]
    fn mismatched_channels_are_rejected() {
        let p = EmbeddingParams::zeros(EmbeddingShape { channels: 2, ..shape() });
        assert!(forward(&scene16(), &p).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let s = scene16();
        let p = EmbeddingParams::init(shape(), &mut ChaCha8Rng::seed_from_u64(4));
        let pixels = [3usize, 40, 200];
        let weights: Vec<f64> = (0..pixels.len() * 4).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let lin = |raw: &Mat| -> f64 { raw.as_slice().iter().zip(&weights).map(|(a, b)| a * b).sum() };
        let (_, g) = grad(&s, &p, &pixels, |raw| Ok((lin(raw), Mat::from_vec(raw.rows(), raw.cols(), weights.clone())))).unwrap();
        let flat = p.to_flat();
        for k in (0..flat.len()).step_by(7) {
            let mut up = flat.clone();
            let mut dn = flat.clone();
            up[k] += 1e-6;
            dn[k] -= 1e-6;
            let fu = lin(&forward_pixels(&s, &EmbeddingParams::from_flat(p.shape, &up).unwrap(), &pixels).unwrap().raw);
            let fd = lin(&forward_pixels(&s, &EmbeddingParams::from_flat(p.shape, &dn).unwrap(), &pixels).unwrap().raw);
            let num = (fu - fd) / 2e-6;
            assert!((num - g[k]).abs() < 1e-6 * (1.0 + num.abs()), "coord {k}: {num} vs {}", g[k]);
        }
    }
}
