//! Procedural outdoor scenes, simulated robot trajectories, and the
//! self-supervised labels derived from the trajectory footprint.
//!
//! A scene is a stack of `C` descriptor planes over an `H x W` grid plus a
//! terrain-class grid. The terrain grid is ground truth used only for
//! evaluation; training sees the descriptors and the [`LabelMask`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};

pub const MIN_SIDE: usize = 32;

/// Seed for the fixed per-class appearance palette shared by every scene.
pub(crate) const PALETTE_SEED: u64 = 0x5359_4e45_545f_5041;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Terrain {
    GroundA = 0,
    GroundB = 1,
    Sky = 2,
    ObstacleNatural = 3,
}

impl Terrain {
    pub const ALL: [Terrain; 4] = [
        Terrain::GroundA,
        Terrain::GroundB,
        Terrain::Sky,
        Terrain::ObstacleNatural,
    ];

    pub fn is_traversable(self) -> bool {
        matches!(self, Terrain::GroundA | Terrain::GroundB)
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        Self::ALL.get(v as usize).copied()
    }
}

/// Per-pixel supervision state. The discriminants are the on-disk byte values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Label {
    Unlabeled = 0,
    Positive = 1,
    NegLowConf = 2,
    NegSynthetic = 3,
}

impl Label {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Label::Unlabeled),
            1 => Some(Label::Positive),
            2 => Some(Label::NegLowConf),
            3 => Some(Label::NegSynthetic),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    /// Fraction of rows (from the bottom) occupied by ground.
    pub ground_fraction: f64,
    /// Target fraction of the ground band covered by natural obstacles.
    pub obstacle_density: f64,
    /// Amplitude of the smooth per-class texture.
    pub texture_amplitude: f64,
    /// Amplitude of per-pixel uniform noise.
    pub pixel_noise: f64,
    /// Half-range of the per-scene, per-channel brightness offset.
    pub illumination_jitter: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            height: 64,
            width: 64,
            channels: 4,
            ground_fraction: 0.7,
            obstacle_density: 0.10,
            texture_amplitude: 0.10,
            pixel_noise: 0.04,
            illumination_jitter: 0.05,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.height < MIN_SIDE || self.width < MIN_SIDE {
            return Err(config_err(format!(
                "scene must be at least {MIN_SIDE}x{MIN_SIDE}, got {}x{}",
                self.height, self.width
            )));
        }
        if self.channels == 0 {
            return Err(config_err("scene needs at least one channel"));
        }
        if !(self.ground_fraction > 0.0 && self.ground_fraction < 1.0) {
            return Err(config_err("ground_fraction must lie in (0, 1)"));
        }
        if !(0.0..1.0).contains(&self.obstacle_density) {
            return Err(config_err("obstacle_density must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// A synthetic image: `C` descriptor planes in `[0, 1]` plus terrain classes.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    height: usize,
    width: usize,
    channels: usize,
    /// Plane-major: `data[c * H * W + r * W + col]`.
    data: Vec<f32>,
    terrain: Vec<Terrain>,
    pub seed: u64,
    /// First ground row; rows above it are sky.
    pub horizon: usize,
}

impl Scene {
    /// Validating constructor for externally produced scenes.
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<f32>,
        terrain: Vec<Terrain>,
        seed: u64,
    ) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(config_err("scene dimensions must be positive"));
        }
        if data.len() != channels * height * width || terrain.len() != height * width {
            return Err(config_err("scene planes do not match the declared shape"));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(config_err("descriptor values must lie in [0, 1]"));
        }
        let horizon = (0..height)
            .find(|&r| (0..width).any(|c| terrain[r * width + c] != Terrain::Sky))
            .unwrap_or(height);
        Ok(Self {
            height,
            width,
            channels,
            data,
            terrain,
            seed,
            horizon,
        })
    }

    /// Uniform scene of a single terrain class with constant descriptors.
    pub fn uniform(height: usize, width: usize, channels: usize, terrain: Terrain, value: f32) -> Self {
        Self::new(
            height,
            width,
            channels,
            vec![value; channels * height * width],
            vec![terrain; height * width],
            0,
        )
        .expect("uniform scene is valid")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn terrain(&self) -> &[Terrain] {
        &self.terrain
    }

    pub fn terrain_at(&self, row: usize, col: usize) -> Terrain {
        self.terrain[row * self.width + col]
    }

    #[inline]
    pub fn value(&self, channel: usize, row: usize, col: usize) -> f32 {
        self.data[(channel * self.height + row) * self.width + col]
    }

    pub(crate) fn set_value(&mut self, channel: usize, row: usize, col: usize, v: f32) {
        let (h, w) = (self.height, self.width);
        self.data[(channel * h + row) * w + col] = v;
    }

    /// Terrain-derived traversability for every pixel.
    pub fn traversable_mask(&self) -> Vec<bool> {
        self.terrain.iter().map(|t| t.is_traversable()).collect()
    }

    /// Mirrors the scene left to right.
    pub fn flipped(&self) -> Scene {
        let (h, w) = (self.height, self.width);
        let mut out = self.clone();
        for c in 0..self.channels {
            for r in 0..h {
                for col in 0..w {
                    out.data[(c * h + r) * w + col] = self.data[(c * h + r) * w + (w - 1 - col)];
                }
            }
        }
        for r in 0..h {
            for col in 0..w {
                out.terrain[r * w + col] = self.terrain[r * w + (w - 1 - col)];
            }
        }
        out
    }

    /// Sub-window `[row, row + height) x [col, col + width)`.
    pub fn crop(&self, row: usize, col: usize, height: usize, width: usize) -> Result<Scene> {
        if row + height > self.height || col + width > self.width || height == 0 || width == 0 {
            return Err(Error::OutOfBounds {
                row,
                col,
                height,
                width,
                scene_height: self.height,
                scene_width: self.width,
            });
        }
        let mut data = Vec::with_capacity(self.channels * height * width);
        for c in 0..self.channels {
            for r in row..row + height {
                let start = (c * self.height + r) * self.width + col;
                data.extend_from_slice(&self.data[start..start + width]);
            }
        }
        let mut terrain = Vec::with_capacity(height * width);
        for r in row..row + height {
            terrain.extend_from_slice(&self.terrain[r * self.width + col..r * self.width + col + width]);
        }
        Scene::new(height, width, self.channels, data, terrain, self.seed)
    }
}

/// Dense `[-1, 1]` value noise: random lattice values every `cell` pixels,
/// blended with a smoothstep.
pub(crate) fn value_noise<R: Rng>(rng: &mut R, height: usize, width: usize, cell: usize) -> Vec<f64> {
    let cell = cell.max(1);
    let gh = height / cell + 2;
    let gw = width / cell + 2;
    let lattice: Vec<f64> = (0..gh * gw).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
    let mut out = Vec::with_capacity(height * width);
    for r in 0..height {
        let gy = r / cell;
        let ty = smooth((r % cell) as f64 / cell as f64);
        for c in 0..width {
            let gx = c / cell;
            let tx = smooth((c % cell) as f64 / cell as f64);
            let v00 = lattice[gy * gw + gx];
            let v01 = lattice[gy * gw + gx + 1];
            let v10 = lattice[(gy + 1) * gw + gx];
            let v11 = lattice[(gy + 1) * gw + gx + 1];
            let top = v00 + (v01 - v00) * tx;
            let bottom = v10 + (v11 - v10) * tx;
            out.push(top + (bottom - top) * ty);
        }
    }
    out
}

/// Per-channel appearance of each terrain class: (mean, texture gain).
/// Channel `c` is independent of the total channel count.
pub(crate) fn terrain_palette(channel: usize) -> [(f64, f64); 4] {
    let mut rng = ChaCha8Rng::seed_from_u64(PALETTE_SEED ^ (channel as u64).wrapping_mul(0x9E37_79B9));
    let ground_a = rng.gen_range(0.30..0.60);
    let ground_b = (ground_a + rng.gen_range(-0.18f64..0.18)).clamp(0.15, 0.75);
    let sky = rng.gen_range(0.70..0.92);
    // rocks and brush: ground-like, offset along each channel
    let offset = rng.gen_range(0.12..0.28);
    let obstacle = if rng.gen_bool(0.5) { ground_a + offset } else { ground_a - offset };
    [
        (ground_a, 0.8),
        (ground_b, 1.0),
        (sky, 0.3),
        (obstacle, 1.4),
    ]
}

/// Generates a deterministic toy scene from `(config, seed)`.
pub fn generate_scene(config: &SceneConfig, seed: u64) -> Result<Scene> {
    config.validate()?;
    let (h, w) = (config.height, config.width);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let nominal = ((h as f64) * (1.0 - config.ground_fraction)).round() as i64;
    let horizon = (nominal + rng.gen_range(-2..=2)).clamp(1, h as i64 - 4) as usize;

    // Ground split: a meandering path of GROUND_A through GROUND_B, plus noisy patches of A.
    let path_noise = value_noise(&mut rng, h, 1, 12);
    let patch_noise = value_noise(&mut rng, h, w, 14);
    let center = rng.gen_range(w as f64 * 0.3..w as f64 * 0.7);
    let half_width = rng.gen_range(w as f64 * 0.08..w as f64 * 0.16);
    let mut terrain = vec![Terrain::Sky; h * w];
    for r in horizon..h {
        let depth = (r - horizon) as f64 / (h - horizon) as f64;
        let c0 = center + path_noise[r] * w as f64 * 0.15;
        let hw = half_width * (0.5 + depth);
        for c in 0..w {
            let on_path = (c as f64 - c0).abs() <= hw;
            terrain[r * w + c] = if on_path || patch_noise[r * w + c] > 0.45 {
                Terrain::GroundA
            } else {
                Terrain::GroundB
            };
        }
    }

    let band_area = (h - horizon) * w;
    let target = (config.obstacle_density * band_area as f64).round() as usize;
    let max_radius = (h.min(w) / 10).max(3) as f64;
    let mut covered = 0usize;
    let mut attempts = 0;
    while covered < target && attempts < 10_000 {
        attempts += 1;
        let cr = rng.gen_range(horizon as f64..h as f64);
        let cc = rng.gen_range(0.0..w as f64);
        let ry = rng.gen_range(1.5..max_radius);
        let rx = rng.gen_range(1.5..max_radius);
        let r0 = (cr - ry).floor().max(horizon as f64) as usize;
        let r1 = ((cr + ry).ceil() as usize).min(h - 1);
        let c0 = (cc - rx).floor().max(0.0) as usize;
        let c1 = ((cc + rx).ceil() as usize).min(w - 1);
        for r in r0..=r1 {
            for c in c0..=c1 {
                let dy = (r as f64 - cr) / ry;
                let dx = (c as f64 - cc) / rx;
                let idx = r * w + c;
                if dy * dy + dx * dx <= 1.0 && terrain[idx].is_traversable() {
                    terrain[idx] = Terrain::ObstacleNatural;
                    covered += 1;
                }
            }
        }
    }

    let mut data = vec![0f32; config.channels * h * w];
    for ch in 0..config.channels {
        let palette = terrain_palette(ch);
        let offset = rng.gen_range(-1.0..=1.0) * config.illumination_jitter;
        let texture = value_noise(&mut rng, h, w, 6);
        let plane = &mut data[ch * h * w..(ch + 1) * h * w];
        for r in 0..h {
            for c in 0..w {
                let idx = r * w + c;
                let (mean, gain) = palette[terrain[idx] as usize];
                let mut v = mean + offset + config.texture_amplitude * gain * texture[idx];
                if terrain[idx] == Terrain::Sky {
                    v += 0.08 * (1.0 - r as f64 / horizon.max(1) as f64);
                }
                v += rng.gen_range(-1.0..=1.0) * config.pixel_noise;
                plane[idx] = v.clamp(0.0, 1.0) as f32;
            }
        }
    }

    Ok(Scene {
        height: h,
        width: w,
        channels: config.channels,
        data,
        terrain,
        seed,
        horizon,
    })
}

/// Ordered 8-connected walk over traversable terrain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryTrace {
    pub waypoints: Vec<(usize, usize)>,
    pub footprint_halfwidth: usize,
}

impl TrajectoryTrace {
    /// Pixels within Chebyshev distance `footprint_halfwidth` of any waypoint.
    pub fn footprint(&self, height: usize, width: usize) -> Vec<bool> {
        let mut mask = vec![false; height * width];
        let hw = self.footprint_halfwidth;
        for &(r, c) in &self.waypoints {
            for rr in r.saturating_sub(hw)..=(r + hw).min(height - 1) {
                for cc in c.saturating_sub(hw)..=(c + hw).min(width - 1) {
                    mask[rr * width + cc] = true;
                }
            }
        }
        mask
    }

    /// Checks bounds, 8-connectivity, and that every waypoint sits on ground.
    pub fn validate_for(&self, scene: &Scene) -> Result<()> {
        if self.waypoints.is_empty() {
            return Err(config_err("trajectory has no waypoints"));
        }
        for (i, &(r, c)) in self.waypoints.iter().enumerate() {
            if r >= scene.height() || c >= scene.width() {
                return Err(config_err(format!("waypoint {i} is outside the scene")));
            }
            if !scene.terrain_at(r, c).is_traversable() {
                return Err(config_err(format!("waypoint {i} is not on traversable terrain")));
            }
            if i > 0 {
                let (pr, pc) = self.waypoints[i - 1];
                if pr.abs_diff(r) > 1 || pc.abs_diff(c) > 1 || (pr, pc) == (r, c) {
                    return Err(config_err(format!("waypoints {} and {i} are not 8-connected", i - 1)));
                }
            }
        }
        Ok(())
    }
}

fn footprint_fits(scene: &Scene, r: usize, c: usize, hw: usize) -> bool {
    let (h, w) = (scene.height(), scene.width());
    (r.saturating_sub(hw)..=(r + hw).min(h - 1))
        .all(|rr| (c.saturating_sub(hw)..=(c + hw).min(w - 1)).all(|cc| scene.terrain_at(rr, cc).is_traversable()))
}

/// Upward-biased random walk entering from the bottom edge. Every footprint
/// square stays on traversable terrain.
pub fn simulate_trajectory(scene: &Scene, seed: u64, halfwidth: usize) -> Result<TrajectoryTrace> {
    let (h, w) = (scene.height(), scene.width());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bottom = h - 1;
    let starts: Vec<usize> = (0..w).filter(|&c| footprint_fits(scene, bottom, c, halfwidth)).collect();
    if starts.is_empty() {
        return Err(Error::NoTraversableCorridor);
    }
    let mut pos = (bottom, starts[rng.gen_range(0..starts.len())]);
    let mut visited = vec![false; h * w];
    visited[pos.0 * w + pos.1] = true;
    let mut waypoints = vec![pos];

    const MOVES: [(i64, i64, u32); 5] = [(-1, 0, 6), (-1, -1, 3), (-1, 1, 3), (0, -1, 1), (0, 1, 1)];
    let max_steps = h + w / 2;
    for _ in 0..max_steps {
        let mut options: Vec<((usize, usize), u32)> = Vec::with_capacity(5);
        for &(dr, dc, weight) in &MOVES {
            let nr = pos.0 as i64 + dr;
            let nc = pos.1 as i64 + dc;
            if nr < 0 || nc < 0 || nr >= h as i64 || nc >= w as i64 {
                continue;
            }
            let (nr, nc) = (nr as usize, nc as usize);
            if !visited[nr * w + nc] && footprint_fits(scene, nr, nc, halfwidth) {
                options.push(((nr, nc), weight));
            }
        }
        if options.is_empty() {
            break;
        }
        let total: u32 = options.iter().map(|o| o.1).sum();
        let mut pick = rng.gen_range(0..total);
        let mut next = options[0].0;
        for &(p, wgt) in &options {
            if pick < wgt {
                next = p;
                break;
            }
            pick -= wgt;
        }
        pos = next;
        visited[pos.0 * w + pos.1] = true;
        waypoints.push(pos);
    }
    Ok(TrajectoryTrace {
        waypoints,
        footprint_halfwidth: halfwidth,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum LabelMode {
    /// Footprint positive, everything else unlabeled.
    Pu,
    /// Additionally marks pixels farther than `min_distance` (Euclidean,
    /// strictly greater) from every positive pixel as low-confidence negatives.
    Pn { min_distance: f64 },
}

/// Per-pixel supervision grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMask {
    pub height: usize,
    pub width: usize,
    pub labels: Vec<Label>,
}

impl LabelMask {
    pub fn filled(height: usize, width: usize, label: Label) -> Self {
        Self {
            height,
            width,
            labels: vec![label; height * width],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> Label {
        self.labels[row * self.width + col]
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// Flat pixel indices carrying `label`, in row-major order.
    pub fn indices(&self, label: Label) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == label)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn flipped(&self) -> LabelMask {
        let (h, w) = (self.height, self.width);
        let mut out = self.clone();
        for r in 0..h {
            for c in 0..w {
                out.labels[r * w + c] = self.labels[r * w + (w - 1 - c)];
            }
        }
        out
    }

    pub fn crop(&self, row: usize, col: usize, height: usize, width: usize) -> LabelMask {
        let mut labels = Vec::with_capacity(height * width);
        for r in row..row + height {
            labels.extend_from_slice(&self.labels[r * self.width + col..r * self.width + col + width]);
        }
        LabelMask { height, width, labels }
    }
}

/// Derives supervision from the trajectory footprint.
pub fn make_labels(scene: &Scene, traj: &TrajectoryTrace, mode: LabelMode) -> Result<LabelMask> {
    traj.validate_for(scene)?;
    let (h, w) = (scene.height(), scene.width());
    let footprint = traj.footprint(h, w);
    let mut mask = LabelMask::filled(h, w, Label::Unlabeled);
    for (i, &on) in footprint.iter().enumerate() {
        if on {
            debug_assert!(scene.terrain()[i].is_traversable());
            mask.labels[i] = Label::Positive;
        }
    }
    if let LabelMode::Pn { min_distance } = mode {
        if min_distance.is_nan() || min_distance < 0.0 {
            return Err(config_err("min_distance must be non-negative"));
        }
        if min_distance.is_finite() {
            let dist2 = squared_distance_transform(&footprint, h, w);
            let thr2 = min_distance * min_distance;
            for (i, d2) in dist2.iter().enumerate() {
                if *d2 > thr2 {
                    mask.labels[i] = Label::NegLowConf;
                }
            }
        }
    }
    Ok(mask)
}

/// Exact squared Euclidean distance to the nearest `true` site
/// (separable lower-envelope algorithm). Grids without sites return `inf`.
pub fn squared_distance_transform(sites: &[bool], height: usize, width: usize) -> Vec<f64> {
    let inf = f64::INFINITY;
    let mut grid: Vec<f64> = sites.iter().map(|&s| if s { 0.0 } else { inf }).collect();
    let mut buf = vec![0.0; height.max(width)];
    for c in 0..width {
        for r in 0..height {
            buf[r] = grid[r * width + c];
        }
        let out = edt_1d(&buf[..height]);
        for r in 0..height {
            grid[r * width + c] = out[r];
        }
    }
    for r in 0..height {
        let out = edt_1d(&grid[r * width..(r + 1) * width]);
        grid[r * width..(r + 1) * width].copy_from_slice(&out);
    }
    grid
}

fn edt_1d(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut d = vec![f64::INFINITY; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0f64; n + 1];
    let finite: Vec<usize> = (0..n).filter(|&q| f[q].is_finite()).collect();
    if finite.is_empty() {
        return d;
    }
    let mut k = 0usize;
    v[0] = finite[0];
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for &q in &finite[1..] {
        let parabola_cross = |p: usize| {
            ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * q as f64 - 2.0 * p as f64)
        };
        let mut s = parabola_cross(v[k]);
        // z[0] is -inf, so this stops at k == 0
        while s <= z[k] {
            k -= 1;
            s = parabola_cross(v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    let mut k = 0usize;
    for (q, dq) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let diff = q as f64 - p as f64;
        *dq = diff * diff + f[p];
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(h: usize, w: usize, c: usize) -> SceneConfig {
        SceneConfig {
            height: h,
            width: w,
            channels: c,
            ..SceneConfig::default()
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_scene(&cfg(64, 64, 8), 7).unwrap();
        let b = generate_scene(&cfg(64, 64, 8), 7).unwrap();
        assert_eq!(a, b);
        let c = generate_scene(&cfg(64, 64, 8), 8).unwrap();
        assert_ne!(a.data(), c.data());
    }

    #[test]
    fn small_scene_has_sky_and_ground_a() {
        let s = generate_scene(&cfg(32, 32, 1), 0).unwrap();
        assert!(s.terrain().contains(&Terrain::Sky));
        assert!(s.terrain().contains(&Terrain::GroundA));
        assert!(s.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn undersized_config_is_rejected() {
        assert!(matches!(generate_scene(&cfg(31, 64, 1), 0), Err(Error::Config(_))));
        assert!(matches!(generate_scene(&cfg(64, 64, 0), 0), Err(Error::Config(_))));
    }

    #[test]
    fn all_ground_scene_admits_a_trajectory() {
        let s = Scene::uniform(40, 40, 2, Terrain::GroundA, 0.5);
        let t = simulate_trajectory(&s, 1, 2).unwrap();
        t.validate_for(&s).unwrap();
        assert!(t.waypoints.len() > 10);
        let labels = make_labels(&s, &t, LabelMode::Pu).unwrap();
        assert!(labels.count(Label::Positive) > 0);
    }

    #[test]
    fn all_sky_scene_has_no_corridor() {
        let s = Scene::uniform(40, 40, 2, Terrain::Sky, 0.5);
        assert!(matches!(simulate_trajectory(&s, 1, 1), Err(Error::NoTraversableCorridor)));
    }

    #[test]
    fn pu_labels_have_two_states() {
        let s = generate_scene(&cfg(64, 64, 2), 3).unwrap();
        let t = simulate_trajectory(&s, 3, 2).unwrap();
        let m = make_labels(&s, &t, LabelMode::Pu).unwrap();
        assert_eq!(m.count(Label::Positive) + m.count(Label::Unlabeled), 64 * 64);
    }

    #[test]
    fn infinite_threshold_gives_no_low_confidence_negatives() {
        let s = generate_scene(&cfg(64, 64, 2), 3).unwrap();
        let t = simulate_trajectory(&s, 3, 2).unwrap();
        let m = make_labels(&s, &t, LabelMode::Pn { min_distance: f64::INFINITY }).unwrap();
        assert_eq!(m.count(Label::NegLowConf), 0);
    }

    #[test]
    fn distance_transform_matches_brute_force() {
        let (h, w) = (13, 17);
        let mut sites = vec![false; h * w];
        for &i in &[5usize, 40, 41, 120, 200] {
            sites[i] = true;
        }
        let d = squared_distance_transform(&sites, h, w);
        for p in 0..h * w {
            let (pr, pc) = ((p / w) as f64, (p % w) as f64);
            let best = (0..h * w)
                .filter(|&q| sites[q])
                .map(|q| {
                    let (qr, qc) = ((q / w) as f64, (q % w) as f64);
                    (pr - qr).powi(2) + (pc - qc).powi(2)
                })
                .fold(f64::INFINITY, f64::min);
            assert_eq!(d[p], best, "pixel {p}");
        }
        assert!(squared_distance_transform(&vec![false; 12], 3, 4).iter().all(|v| v.is_infinite()));
    }

    #[test]
    fn crop_and_flip_keep_shapes() {
        let s = generate_scene(&cfg(32, 40, 3), 2).unwrap();
        let f = s.flipped();
        assert_eq!(f.value(1, 5, 0), s.value(1, 5, 39));
        assert_eq!(f.flipped(), s);
        let c = s.crop(4, 6, 20, 30).unwrap();
        assert_eq!(c.value(2, 0, 0), s.value(2, 4, 6));
        assert!(s.crop(20, 0, 20, 10).is_err());
    }
}
