//! Binary containers: `SYNT` labeled scenes, `SYNP` embedding weights and
//! full training checkpoints. All integers and floats are little-endian.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::embedding::{EmbeddingParams, EmbeddingShape};
use crate::error::{Error, Result};
use crate::losses::pu::CenterBank;
use crate::negatives::LabeledScene;
use crate::scene::{Label, LabelMask, Scene, Terrain};
use crate::trainer::{Model, TrainConfig, BETA1, BETA2, EPSILON};

pub const SCENE_MAGIC: &[u8; 4] = b"SYNT";
pub const PARAMS_MAGIC: &[u8; 4] = b"SYNP";
pub const VERSION: u16 = 1;

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], what: &'static str) -> Self {
        Self { buf, pos: 0, what }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let Some(end) = end else {
            return Err(Error::Format(format!("truncated {} at byte {}", self.what, self.pos)));
        };
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        if self.take(4)? != magic {
            return Err(Error::Format(format!("{} does not start with {:?}", self.what, std::str::from_utf8(magic).unwrap_or("?"))));
        }
        let v = self.u16()?;
        if v != VERSION {
            return Err(Error::Format(format!("unsupported {} version {v}", self.what)));
        }
        Ok(())
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("size overflow".into()))?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!("{} trailing bytes in {}", self.buf.len() - self.pos, self.what)));
        }
        Ok(())
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_f64s(out: &mut Vec<u8>, vs: &[f64]) {
    for v in vs {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// `SYNT`, version, `H, W, C`, `C x H x W` f32 planes, `H x W` terrain bytes, `H x W` label bytes.
pub fn encode_scene(item: &LabeledScene) -> Result<Vec<u8>> {
    let s = &item.scene;
    if item.labels.height != s.height() || item.labels.width != s.width() {
        return Err(Error::Format("label mask does not match the scene".into()));
    }
    let mut out = Vec::with_capacity(18 + s.data().len() * 4 + 2 * s.pixel_count());
    out.extend_from_slice(SCENE_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    put_u32(&mut out, s.height())?;
    put_u32(&mut out, s.width())?;
    put_u32(&mut out, s.channels())?;
    for v in s.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend(s.terrain().iter().map(|&t| t as u8));
    out.extend(item.labels.labels.iter().map(|&l| l as u8));
    Ok(out)
}

pub fn decode_scene(bytes: &[u8]) -> Result<LabeledScene> {
    let mut r = Reader::new(bytes, "scene container");
    r.magic(SCENE_MAGIC)?;
    let (h, w, c) = (r.u32()?, r.u32()?, r.u32()?);
    let n = h.checked_mul(w).ok_or_else(|| Error::Format("scene size overflow".into()))?;
    let data: Vec<f32> = r
        .take(n.checked_mul(c).and_then(|v| v.checked_mul(4)).ok_or_else(|| Error::Format("scene size overflow".into()))?)?
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
        .collect();
    let terrain = r
        .take(n)?
        .iter()
        .map(|&b| Terrain::from_u8(b).ok_or_else(|| Error::Format(format!("bad terrain byte {b}"))))
        .collect::<Result<Vec<_>>>()?;
    let labels = r
        .take(n)?
        .iter()
        .map(|&b| Label::from_u8(b).ok_or_else(|| Error::Format(format!("bad label byte {b}"))))
        .collect::<Result<Vec<_>>>()?;
    r.finish()?;
    let scene = Scene::new(h, w, c, data, terrain, 0).map_err(|e| Error::Format(e.to_string()))?;
    Ok(LabeledScene {
        scene,
        labels: LabelMask { height: h, width: w, labels },
    })
}

fn encode_params_into(out: &mut Vec<u8>, p: &EmbeddingParams) -> Result<()> {
    out.extend_from_slice(PARAMS_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    put_u32(out, p.shape.channels)?;
    put_u32(out, p.shape.radius)?;
    put_u32(out, p.shape.dim)?;
    put_u32(out, p.shape.hidden)?;
    put_f64s(out, &p.to_flat());
    Ok(())
}

fn decode_params_from(r: &mut Reader) -> Result<EmbeddingParams> {
    r.magic(PARAMS_MAGIC)?;
    let shape = EmbeddingShape {
        channels: r.u32()?,
        radius: r.u32()?,
        dim: r.u32()?,
        hidden: r.u32()?,
    };
    shape.validate()?;
    let flat = r.f64s(shape.param_count())?;
    EmbeddingParams::from_flat(shape, &flat)
}

/// `SYNP`, version, `C, r, D, hidden` as u32, then `w1, b1, w2, b2` as f64.
pub fn encode_params(p: &EmbeddingParams) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    encode_params_into(&mut out, p)?;
    Ok(out)
}

pub fn decode_params(bytes: &[u8]) -> Result<EmbeddingParams> {
    let mut r = Reader::new(bytes, "parameter file");
    let p = decode_params_from(&mut r)?;
    r.finish()?;
    Ok(p)
}

/// Trained model with the configuration that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub config: TrainConfig,
}

/// The `SYNP` block, then `K, M` as u32, `c_pos, c_neg, prototypes` as
/// f64, the optimizer constants `beta1, beta2, eps` as f64, then a u32 byte
/// length and the JSON config echo.
pub fn encode_checkpoint(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    encode_params_into(&mut out, &ckpt.model.embedding)?;
    let c = &ckpt.model.centers;
    put_u32(&mut out, c.k())?;
    put_u32(&mut out, c.m())?;
    put_f64s(&mut out, &c.to_flat());
    put_f64s(&mut out, &[BETA1, BETA2, EPSILON]);
    let json = serde_json::to_vec(&ckpt.config)?;
    put_u32(&mut out, json.len())?;
    out.extend_from_slice(&json);
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader::new(bytes, "checkpoint");
    let embedding = decode_params_from(&mut r)?;
    let (k, m) = (r.u32()?, r.u32()?);
    let d = embedding.shape.dim;
    let flat = r.f64s(d * (1 + k + m))?;
    let centers = CenterBank::from_flat(d, k, m, &flat)?;
    let adam = r.f64s(3)?;
    if adam != [BETA1, BETA2, EPSILON] {
        return Err(Error::Format(format!("checkpoint was written with optimizer constants {adam:?}")));
    }
    let len = r.u32()?;
    let config: TrainConfig = serde_json::from_slice(r.take(len)?)?;
    r.finish()?;
    Ok(Checkpoint {
        model: Model { embedding, centers },
        config,
    })
}

/// Writes to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{generate_scene, make_labels, simulate_trajectory, LabelMode, SceneConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn item() -> LabeledScene {
        let scene = generate_scene(&SceneConfig::default(), 2).unwrap();
        let traj = simulate_trajectory(&scene, 2, 2).unwrap();
        let labels = make_labels(&scene, &traj, LabelMode::Pn { min_distance: 8.0 }).unwrap();
        LabeledScene { scene, labels }
    }

    #[test]
    fn scene_round_trip() {
        let it = item();
        let bytes = encode_scene(&it).unwrap();
        assert_eq!(&bytes[..4], b"SYNT");
        let back = decode_scene(&bytes).unwrap();
        assert_eq!(back.labels, it.labels);
        assert_eq!(back.scene.data(), it.scene.data());
        assert_eq!(back.scene.terrain(), it.scene.terrain());
    }

    #[test]
    fn truncated_and_foreign_bytes_are_rejected() {
        let bytes = encode_scene(&item()).unwrap();
        assert!(matches!(decode_scene(&bytes[..bytes.len() - 1]), Err(Error::Format(_))));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_scene(&bad), Err(Error::Format(_))));
    }

    #[test]
    fn checkpoint_round_trip() {
        let config = TrainConfig::pu();
        let model = Model::init(config.embedding, 4, 8, &mut ChaCha8Rng::seed_from_u64(1));
        let ckpt = Checkpoint { model, config };
        let bytes = encode_checkpoint(&ckpt).unwrap();
        assert_eq!(decode_checkpoint(&bytes).unwrap(), ckpt);
        let params = encode_params(&ckpt.model.embedding).unwrap();
        assert_eq!(&bytes[..params.len()], &params[..]);
        assert_eq!(decode_params(&params).unwrap(), ckpt.model.embedding);
    }
}
