//! The three trainable ansatz families behind one type.

use rand::{Rng, RngCore};

use crate::antn::{AntnMode, AntnModel};
use crate::arnn::{Arnn, HeadEncoding, OutputInit, SymmetryFlags};
use crate::grad::{GradBuffer, ParamStore};
use crate::lattice::SpinConfig;
use crate::mps::{Mps, MpsLayout, TrainableMps};
use crate::wavefunction::{Ansatz, AnsatzError, ExactSampler, LogAmplitude, Wavefunction};

/// Everything needed to rebuild a model's structure; parameters are loaded separately.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelSpec {
    Mps { dims: Vec<usize> },
    Arnn { n: usize, depth: usize, hidden: usize, encoding: HeadEncoding, symmetry: SymmetryFlags },
    Antn { dims: Vec<usize>, mode: AntnMode, depth: usize, hidden: usize, symmetry: SymmetryFlags },
}

#[derive(Clone, Debug)]
pub enum Model {
    Mps(TrainableMps),
    Arnn(Arnn),
    Antn(AntnModel),
}

impl Model {
    pub fn spec(&self) -> ModelSpec {
        match self {
            Model::Mps(m) => ModelSpec::Mps { dims: m.layout().dims().to_vec() },
            Model::Arnn(a) => ModelSpec::Arnn {
                n: a.net().n_sites(),
                depth: a.net().depth(),
                hidden: a.net().hidden(),
                encoding: a.encoding(),
                symmetry: a.symmetry(),
            },
            Model::Antn(a) => ModelSpec::Antn {
                dims: a.bond_dims().to_vec(),
                mode: a.mode(),
                depth: a.net().depth(),
                hidden: a.net().hidden(),
                symmetry: a.symmetry(),
            },
        }
    }

    /// A model with the structure of `spec` and placeholder parameters.
    pub fn from_spec(spec: &ModelSpec, rng: &mut impl Rng) -> Result<Self, AnsatzError> {
        let zero_mps = |dims: &[usize]| {
            let layout = MpsLayout::new(dims.to_vec());
            let zeros = vec![0.0; layout.total_len()];
            layout.unflatten(&zeros, &zeros)
        };
        Ok(match spec {
            ModelSpec::Mps { dims } => Model::Mps(TrainableMps::from_mps(&zero_mps(dims)?)),
            ModelSpec::Arnn { n, depth, hidden, encoding, symmetry } => {
                Model::Arnn(Arnn::new(*n, *depth, *hidden, *encoding, *symmetry, rng)?)
            }
            ModelSpec::Antn { dims, mode, depth, hidden, symmetry } => {
                Model::Antn(AntnModel::new(&zero_mps(dims)?, *mode, *depth, *hidden, *symmetry, OutputInit::Zero, rng)?)
            }
        })
    }

    /// Elementwise or blockwise ANTN whose tensors start at `mps`; the
    /// network's final layer is zero so the initial state equals `mps`.
    pub fn antn_from_mps(
        mps: &Mps,
        mode: AntnMode,
        depth: usize,
        hidden: usize,
        symmetry: SymmetryFlags,
        rng: &mut impl Rng,
    ) -> Result<Self, AnsatzError> {
        Ok(Model::Antn(AntnModel::new(mps, mode, depth, hidden, symmetry, OutputInit::Zero, rng)?))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Model::Mps(_) => "mps",
            Model::Arnn(_) => "arnn",
            Model::Antn(a) => match a.mode() {
                AntnMode::Elementwise => "elementwise",
                AntnMode::Blockwise => "blockwise",
            },
        }
    }

    fn inner(&self) -> &dyn Ansatz {
        match self {
            Model::Mps(m) => m,
            Model::Arnn(a) => a,
            Model::Antn(a) => a,
        }
    }
}

impl Wavefunction for Model {
    fn n_sites(&self) -> usize {
        self.inner().n_sites()
    }

    fn log_amplitude(&self, x: &SpinConfig) -> Result<LogAmplitude, AnsatzError> {
        self.inner().log_amplitude(x)
    }

    fn log_amplitude_batch(&self, xs: &[SpinConfig]) -> Result<Vec<LogAmplitude>, AnsatzError> {
        self.inner().log_amplitude_batch(xs)
    }
}

impl ExactSampler for Model {
    fn sample(&self, rng: &mut dyn RngCore) -> Result<SpinConfig, AnsatzError> {
        self.inner().sample(rng)
    }

    fn sample_batch(&self, count: usize, rng: &mut dyn RngCore) -> Result<Vec<SpinConfig>, AnsatzError> {
        self.inner().sample_batch(count, rng)
    }
}

impl Ansatz for Model {
    fn store(&self) -> &ParamStore {
        self.inner().store()
    }

    fn store_mut(&mut self) -> &mut ParamStore {
        match self {
            Model::Mps(m) => m.store_mut(),
            Model::Arnn(a) => a.store_mut(),
            Model::Antn(a) => a.store_mut(),
        }
    }

    fn accumulate_log_grad(&self, x: &SpinConfig, a: f64, b: f64, out: &mut GradBuffer) -> Result<(), AnsatzError> {
        self.inner().accumulate_log_grad(x, a, b, out)
    }
}
