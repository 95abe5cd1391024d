//! Binary checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic "PAGANCKP" | version u32 | config hash [32] | config text (u32 len + utf8)
//! step u64 | rng seed [32], stream u64, word position u128
//! per block: params, spectral u/v pairs, optimizer t + moments (tensors as
//!            rank u32, dims u32…, f32 data)
//! sha256 of everything above [32]
//! ```

use std::path::Path;

use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{BlockOptimizer, TrainConfig, TrainState};
use crate::data_io::parse_config_str;
use crate::error::{Error, Result};
use crate::nets::{Block, DataShape, ModelBundle};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PAGANCKP";
pub const CHECKPOINT_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub config_hash: [u8; 32],
    pub state: TrainState,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn len(&mut self, v: usize) {
        self.u32(u32::try_from(v).expect("length fits in u32"));
    }

    fn tensor(&mut self, t: &Tensor<f32>) {
        self.len(t.shape().len());
        for &d in t.shape() {
            self.len(d);
        }
        for v in t.data() {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }

    fn tensors(&mut self, ts: &[Tensor<f32>]) {
        self.len(ts.len());
        ts.iter().for_each(|t| self.tensor(t));
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize, field: &str) -> Result<&[u8]> {
        let out = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or_else(|| Error::Format(format!("checkpoint truncated in `{field}`")))?;
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self, field: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, field)?.try_into().unwrap()))
    }

    fn u64(&mut self, field: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, field)?.try_into().unwrap()))
    }

    fn len(&mut self, field: &str) -> Result<usize> {
        Ok(self.u32(field)? as usize)
    }

    fn tensor(&mut self, field: &str) -> Result<Tensor<f32>> {
        let rank = self.len(field)?;
        if rank == 0 || rank > 4 {
            return Err(Error::Format(format!("`{field}` has rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(self.len(field)?);
        }
        let n: usize = shape.iter().product();
        let raw = self.take(n.checked_mul(4).unwrap_or(usize::MAX), field)?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Tensor::new(&shape, data).map_err(|e| Error::Format(format!("`{field}`: {e}")))
    }

    fn tensors(&mut self, field: &str) -> Result<Vec<Tensor<f32>>> {
        let n = self.len(field)?;
        (0..n).map(|_| self.tensor(field)).collect()
    }
}

/// Hash of the keys that determine model and optimization; bookkeeping keys
/// (step budget, output cadence, probe budget) are excluded so a run can be
/// extended from its checkpoint.
pub fn config_hash(config: &TrainConfig) -> [u8; 32] {
    let text: String = config
        .to_text()
        .lines()
        .filter(|l| {
            let key = l.split('=').next().unwrap_or("");
            !matches!(key, "steps" | "checkpoint_every" | "eval_every" | "probe_steps")
        })
        .map(|l| format!("{l}\n"))
        .collect();
    Sha256::digest(text.as_bytes()).into()
}

pub fn save_checkpoint(state: &TrainState, config: &TrainConfig, path: &Path) -> Result<()> {
    let mut w = Writer(CHECKPOINT_MAGIC.to_vec());
    w.u32(CHECKPOINT_VERSION);
    w.0.extend_from_slice(&config_hash(config));
    let text = config.to_text();
    w.len(text.len());
    w.0.extend_from_slice(text.as_bytes());
    w.u64(state.step);
    w.0.extend_from_slice(&state.rng.get_seed());
    w.u64(state.rng.get_stream());
    w.0.extend_from_slice(&state.rng.get_word_pos().to_le_bytes());
    for block in Block::ALL {
        let net = state.bundle.network(block);
        w.tensors(&net.params);
        w.len(net.spectral.len());
        for s in &net.spectral {
            w.tensor(&s.u);
            w.tensor(&s.v);
        }
        let opt = &state.optim[block.index()];
        w.u64(opt.t);
        w.tensors(&opt.m);
        w.tensors(&opt.v);
    }
    let digest = Sha256::digest(&w.0);
    w.0.extend_from_slice(&digest);
    std::fs::write(path, &w.0).map_err(|e| Error::io(path, e))
}

/// Loads and verifies a checkpoint. With `expected`, the stored config hash
/// must match it.
pub fn load_checkpoint(path: &Path, expected: Option<&TrainConfig>) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < CHECKPOINT_MAGIC.len() || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(Error::Format(format!("{}: bad magic", path.display())));
    }
    if bytes.len() < 12 + DIGEST_LEN {
        return Err(Error::Format(format!("{}: checkpoint truncated", path.display())));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("{}: unsupported version {version}", path.display())));
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Format(format!("{}: checksum mismatch (truncated or corrupt)", path.display())));
    }

    let mut r = Reader { bytes: body, pos: 12 };
    let hash: [u8; 32] = r.take(32, "config hash")?.try_into().unwrap();
    let text_len = r.len("config text")?;
    let text = std::str::from_utf8(r.take(text_len, "config text")?)
        .map_err(|_| Error::Format("config text is not utf-8".into()))?;
    let config = parse_config_str(text)?;
    if config_hash(&config) != hash {
        return Err(Error::Format("stored config does not match its hash".into()));
    }
    if let Some(exp) = expected {
        if config_hash(exp) != hash {
            return Err(Error::Format(format!("{}: checkpoint belongs to a different config", path.display())));
        }
    }
    let step = r.u64("step")?;
    let seed: [u8; 32] = r.take(32, "rng seed")?.try_into().unwrap();
    let stream = r.u64("rng stream")?;
    let word_pos = u128::from_le_bytes(r.take(16, "rng position")?.try_into().unwrap());
    let mut rng = <ChaCha8Rng as rand::SeedableRng>::from_seed(seed);
    rng.set_stream(stream);
    rng.set_word_pos(word_pos);

    // Shapes come from the config; the stored tensors must fit them.
    let data = data_shape_of(&config)?;
    let mut bundle = ModelBundle::<f32>::new(config.arch(data), &mut <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0))?;
    let mut optim = Vec::with_capacity(5);
    for block in Block::ALL {
        let net = bundle.network_mut(block);
        let params = r.tensors("params")?;
        if params.len() != net.params.len() || params.iter().zip(&net.params).any(|(a, b)| a.shape() != b.shape()) {
            return Err(Error::Format(format!("parameters of block {} do not match the config", block.name())));
        }
        net.params = params;
        let n_sn = r.len("spectral count")?;
        if n_sn != net.spectral.len() {
            return Err(Error::Format(format!("spectral state of block {} does not match", block.name())));
        }
        for s in net.spectral.iter_mut() {
            let u = r.tensor("spectral u")?;
            let v = r.tensor("spectral v")?;
            if u.shape() != s.u.shape() || v.shape() != s.v.shape() {
                return Err(Error::Format(format!("spectral vectors of block {} have wrong shape", block.name())));
            }
            s.u = u;
            s.v = v;
        }
        let t = r.u64("optimizer step")?;
        let m = r.tensors("optimizer m")?;
        let v = r.tensors("optimizer v")?;
        optim.push(BlockOptimizer { t, m, v });
    }
    if r.pos != body.len() {
        return Err(Error::Format(format!("{} trailing bytes", body.len() - r.pos)));
    }
    Ok(Checkpoint {
        config_hash: hash,
        state: TrainState {
            bundle,
            optim,
            rng,
            step,
        },
        config,
    })
}

/// Data shape implied by a config without loading the data.
fn data_shape_of(config: &TrainConfig) -> Result<DataShape> {
    use super::DatasetId;
    Ok(match config.dataset {
        DatasetId::Ring => DataShape::Vector(2),
        DatasetId::Shapes => DataShape::Image {
            channels: 1,
            height: config.shapes_side,
            width: config.shapes_side,
        },
        DatasetId::Mnist => DataShape::Image {
            channels: 1,
            height: 28,
            width: 28,
        },
    })
}
