//! Versioned little-endian binary checkpoints.
//!
//! Layout: magic `ANTNCKPT`, `u32` version, the run configuration as text,
//! the model structure, every parameter block by name, the optimizer state,
//! and the sampling seed. Sampling randomness is a pure function of
//! `(seed, step)`, so the seed and step are the whole RNG state.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::antn::AntnMode;
use crate::arnn::{HeadEncoding, SymmetryFlags};
use crate::model::{Model, ModelSpec};
use crate::vmc::{Adam, TrainState};
use crate::wavefunction::{Ansatz, AnsatzError};

pub const MAGIC: &[u8; 8] = b"ANTNCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Ansatz(#[from] AnsatzError),
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    /// Snapshot of the run configuration, stored verbatim.
    pub config: String,
    pub model: Model,
    pub state: TrainState,
    pub seed: u64,
}

struct Writer<'a, W: Write>(&'a mut W);

impl<W: Write> Writer<'_, W> {
    fn u8(&mut self, v: u8) -> io::Result<()> {
        self.0.write_all(&[v])
    }
    fn u32(&mut self, v: u32) -> io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn u64(&mut self, v: u64) -> io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn i64(&mut self, v: i64) -> io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn f64(&mut self, v: f64) -> io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn bytes(&mut self, b: &[u8]) -> io::Result<()> {
        self.u64(b.len() as u64)?;
        self.0.write_all(b)
    }
    fn f64s(&mut self, v: &[f64]) -> io::Result<()> {
        self.u64(v.len() as u64)?;
        v.iter().try_for_each(|&x| self.f64(x))
    }
    fn usizes(&mut self, v: &[usize]) -> io::Result<()> {
        self.u32(v.len() as u32)?;
        v.iter().try_for_each(|&x| self.u32(x as u32))
    }
    fn symmetry(&mut self, s: &SymmetryFlags) -> io::Result<()> {
        self.u8(s.u1.is_some() as u8)?;
        self.i64(s.u1.unwrap_or(0))?;
        self.u8(s.z2_flip as u8)
    }
}

struct Reader<'a, R: Read>(&'a mut R);

/// Largest length prefix accepted, to fail fast on garbage instead of allocating.
const MAX_LEN: u64 = 1 << 32;

impl<R: Read> Reader<'_, R> {
    fn array<const N: usize>(&mut self) -> Result<[u8; N], CheckpointError> {
        let mut b = [0u8; N];
        self.0.read_exact(&mut b).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => CheckpointError::Corrupt("truncated".into()),
            _ => e.into(),
        })?;
        Ok(b)
    }
    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.array::<1>()?[0])
    }
    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    fn i64(&mut self) -> Result<i64, CheckpointError> {
        Ok(i64::from_le_bytes(self.array()?))
    }
    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.array()?))
    }
    fn len(&mut self) -> Result<usize, CheckpointError> {
        let n = self.u64()?;
        if n > MAX_LEN {
            return Err(CheckpointError::Corrupt(format!("length {n} out of range")));
        }
        Ok(n as usize)
    }
    fn bytes(&mut self) -> Result<Vec<u8>, CheckpointError> {
        let n = self.len()?;
        let mut b = vec![0u8; n];
        self.0.read_exact(&mut b).map_err(|_| CheckpointError::Corrupt("truncated".into()))?;
        Ok(b)
    }
    fn string(&mut self) -> Result<String, CheckpointError> {
        String::from_utf8(self.bytes()?).map_err(|_| CheckpointError::Corrupt("invalid utf-8".into()))
    }
    fn f64s(&mut self) -> Result<Vec<f64>, CheckpointError> {
        let n = self.len()?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn usizes(&mut self) -> Result<Vec<usize>, CheckpointError> {
        let n = self.u32()? as usize;
        (0..n).map(|_| self.u32().map(|v| v as usize)).collect()
    }
    fn symmetry(&mut self) -> Result<SymmetryFlags, CheckpointError> {
        let has = self.u8()? != 0;
        let m = self.i64()?;
        let z2 = self.u8()? != 0;
        Ok(SymmetryFlags { u1: has.then_some(m), z2_flip: z2 })
    }
}

fn encoding_tag(e: HeadEncoding) -> u8 {
    match e {
        HeadEncoding::Polar => 0,
        HeadEncoding::Cartesian => 1,
    }
}

fn mode_tag(m: AntnMode) -> u8 {
    match m {
        AntnMode::Elementwise => 0,
        AntnMode::Blockwise => 1,
    }
}

impl Checkpoint {
    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<(), CheckpointError> {
        let mut w = Writer(out);
        w.0.write_all(MAGIC)?;
        w.u32(VERSION)?;
        w.bytes(self.config.as_bytes())?;
        match self.model.spec() {
            ModelSpec::Mps { dims } => {
                w.u8(0)?;
                w.usizes(&dims)?;
            }
            ModelSpec::Arnn { n, depth, hidden, encoding, symmetry } => {
                w.u8(1)?;
                w.u32(n as u32)?;
                w.u32(depth as u32)?;
                w.u32(hidden as u32)?;
                w.u8(encoding_tag(encoding))?;
                w.symmetry(&symmetry)?;
            }
            ModelSpec::Antn { dims, mode, depth, hidden, symmetry } => {
                w.u8(2)?;
                w.usizes(&dims)?;
                w.u8(mode_tag(mode))?;
                w.u32(depth as u32)?;
                w.u32(hidden as u32)?;
                w.symmetry(&symmetry)?;
            }
        }
        let blocks = self.model.store().blocks();
        w.u32(blocks.len() as u32)?;
        for b in blocks {
            w.bytes(b.name.as_bytes())?;
            w.f64s(&b.values)?;
        }
        let adam = &self.state.adam;
        w.u64(self.state.step)?;
        w.u64(adam.t)?;
        w.f64(adam.beta1)?;
        w.f64(adam.beta2)?;
        w.f64(adam.eps)?;
        w.f64s(&adam.m)?;
        w.f64s(&adam.v)?;
        w.u64(self.seed)?;
        Ok(())
    }

    pub fn read_from<R: Read>(input: &mut R) -> Result<Self, CheckpointError> {
        let mut r = Reader(input);
        if &r.array::<8>().map_err(|_| CheckpointError::BadMagic)? != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(CheckpointError::UnsupportedVersion(version));
        }
        let config = r.string()?;
        let spec = match r.u8()? {
            0 => ModelSpec::Mps { dims: r.usizes()? },
            1 => {
                let (n, depth, hidden) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
                let encoding = match r.u8()? {
                    0 => HeadEncoding::Polar,
                    1 => HeadEncoding::Cartesian,
                    t => return Err(CheckpointError::Corrupt(format!("head encoding tag {t}"))),
                };
                ModelSpec::Arnn { n, depth, hidden, encoding, symmetry: r.symmetry()? }
            }
            2 => {
                let dims = r.usizes()?;
                let mode = match r.u8()? {
                    0 => AntnMode::Elementwise,
                    1 => AntnMode::Blockwise,
                    t => return Err(CheckpointError::Corrupt(format!("mode tag {t}"))),
                };
                let (depth, hidden) = (r.u32()? as usize, r.u32()? as usize);
                ModelSpec::Antn { dims, mode, depth, hidden, symmetry: r.symmetry()? }
            }
            t => return Err(CheckpointError::Corrupt(format!("model tag {t}"))),
        };
        // Structure only: every parameter is overwritten below.
        let mut model = Model::from_spec(&spec, &mut ChaCha8Rng::seed_from_u64(0))?;
        let n_blocks = r.u32()? as usize;
        if n_blocks != model.store().num_blocks() {
            return Err(CheckpointError::Corrupt(format!("{n_blocks} parameter blocks, model has {}", model.store().num_blocks())));
        }
        for _ in 0..n_blocks {
            let name = r.string()?;
            let values = r.f64s()?;
            let id = model.store().id(&name).ok_or_else(|| CheckpointError::Corrupt(format!("unknown block {name:?}")))?;
            let dst = model.store_mut().values_mut(id);
            if dst.len() != values.len() {
                return Err(CheckpointError::Corrupt(format!("block {name:?} has {} values, expected {}", values.len(), dst.len())));
            }
            dst.copy_from_slice(&values);
        }
        let step = r.u64()?;
        let t = r.u64()?;
        let (beta1, beta2, eps) = (r.f64()?, r.f64()?, r.f64()?);
        let m = r.f64s()?;
        let v = r.f64s()?;
        let n_params = model.store().len();
        if m.len() != n_params || v.len() != n_params {
            return Err(CheckpointError::Corrupt("optimizer moments do not match the parameters".into()));
        }
        let seed = r.u64()?;
        Ok(Self { config, model, state: TrainState { step, adam: Adam { beta1, beta2, eps, m, v, t } }, seed })
    }

    /// Writes to a sibling temporary file, then renames over `path`.
    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let tmp = path.with_extension("tmp");
        {
            let mut f = io::BufWriter::new(fs::File::create(&tmp)?);
            self.write_to(&mut f)?;
            f.flush()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let mut f = io::BufReader::new(fs::File::open(path)?);
        Self::read_from(&mut f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mps::Mps;

    fn sample_checkpoint() -> Checkpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mps = Mps::random(5, 3, &mut rng).right_canonicalize().unwrap();
        let sym = SymmetryFlags { u1: Some(1), z2_flip: false };
        let model = Model::Antn(crate::antn::AntnModel::new(&mps, AntnMode::Blockwise, 2, 4, sym, crate::arnn::OutputInit::Uniform(1.0), &mut rng).unwrap());
        let mut state = TrainState::new(model.store().len());
        state.step = 7;
        state.adam.t = 7;
        state.adam.m.iter_mut().enumerate().for_each(|(k, x)| *x = k as f64 * 0.5);
        Checkpoint { config: "[lattice]\nlx = 1\n".into(), model, state, seed: 42 }
    }

    #[test]
    fn round_trip_is_exact() {
        let c = sample_checkpoint();
        let mut buf = Vec::new();
        c.write_to(&mut buf).unwrap();
        let d = Checkpoint::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(d.config, c.config);
        assert_eq!(d.model.spec(), c.model.spec());
        assert_eq!(d.model.store().flat_values(), c.model.store().flat_values());
        assert_eq!(d.state, c.state);
        assert_eq!(d.seed, 42);
        let mut again = Vec::new();
        d.write_to(&mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn rejects_bad_input() {
        let c = sample_checkpoint();
        let mut buf = Vec::new();
        c.write_to(&mut buf).unwrap();
        assert!(matches!(Checkpoint::read_from(&mut &b"NOTACKPT"[..]), Err(CheckpointError::BadMagic)));
        let mut v2 = buf.clone();
        v2[8] = 9;
        assert!(matches!(Checkpoint::read_from(&mut v2.as_slice()), Err(CheckpointError::UnsupportedVersion(9))));
        assert!(matches!(Checkpoint::read_from(&mut &buf[..buf.len() - 3]), Err(CheckpointError::Corrupt(_))));
    }
}
