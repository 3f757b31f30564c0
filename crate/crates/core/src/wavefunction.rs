//! The interface every ansatz exposes to the oracle and to VMC.

use rand::RngCore;
use thiserror::Error;

use crate::grad::{GradBuffer, GradError, Graph, NodeId, ParamStore, Tape};
use crate::lattice::SpinConfig;
use crate::mps::GraphAmplitude;
use crate::numerics::{NumericsError, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnsatzError {
    #[error("configuration has {got} sites, ansatz has {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    Shape { what: &'static str, expected: usize, got: usize },
    #[error("both values of site {site} are masked; the symmetry target is unreachable")]
    InfeasibleMask { site: usize },
    #[error("invalid symmetry: {0}")]
    InvalidSymmetry(String),
    #[error("operation requires a right-canonical MPS")]
    NotCanonical,
    #[error("state has zero norm")]
    ZeroNorm,
    #[error(transparent)]
    Grad(#[from] GradError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// `log ψ(x) = log_mag + i·phase`. A zero amplitude has `log_mag = -∞`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogAmplitude {
    pub log_mag: f64,
    pub phase: f64,
}

impl LogAmplitude {
    pub const ZERO: LogAmplitude = LogAmplitude { log_mag: f64::NEG_INFINITY, phase: 0.0 };

    pub fn from_complex(z: C64) -> Self {
        if z.norm_sqr() == 0.0 {
            Self::ZERO
        } else {
            Self { log_mag: z.norm().ln(), phase: z.arg() }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.log_mag == f64::NEG_INFINITY
    }

    pub fn to_complex(&self) -> C64 {
        if self.is_zero() {
            C64::new(0.0, 0.0)
        } else {
            C64::from_polar(self.log_mag.exp(), self.phase)
        }
    }

    /// `|ψ(x)|²`
    pub fn prob(&self) -> f64 {
        (2.0 * self.log_mag).exp()
    }
}

pub trait Wavefunction: Sync {
    fn n_sites(&self) -> usize;

    fn log_amplitude(&self, x: &SpinConfig) -> Result<LogAmplitude, AnsatzError>;

    fn log_amplitude_batch(&self, xs: &[SpinConfig]) -> Result<Vec<LogAmplitude>, AnsatzError> {
        xs.iter().map(|x| self.log_amplitude(x)).collect()
    }
}

/// Ansatze that draw exact, independent samples from `|ψ|²`.
pub trait ExactSampler: Wavefunction {
    fn sample(&self, rng: &mut dyn RngCore) -> Result<SpinConfig, AnsatzError>;

    fn sample_batch(&self, count: usize, rng: &mut dyn RngCore) -> Result<Vec<SpinConfig>, AnsatzError> {
        (0..count).map(|_| self.sample(rng)).collect()
    }
}

/// A wavefunction whose parameters live in a [`ParamStore`].
pub trait Ansatz: ExactSampler {
    fn store(&self) -> &ParamStore;

    fn store_mut(&mut self) -> &mut ParamStore;

    /// Adds `a·∇log|ψ(x)| + b·∇arg ψ(x)` to `out`.
    fn accumulate_log_grad(&self, x: &SpinConfig, a: f64, b: f64, out: &mut GradBuffer) -> Result<(), AnsatzError>;

    /// Gradients of `log|ψ(x)|` and `arg ψ(x)`, flattened in block order.
    fn log_amplitude_grads(&self, x: &SpinConfig) -> Result<(Vec<f64>, Vec<f64>), AnsatzError> {
        let mut gl = self.store().grad_buffer();
        self.accumulate_log_grad(x, 1.0, 0.0, &mut gl)?;
        let mut gp = self.store().grad_buffer();
        self.accumulate_log_grad(x, 0.0, 1.0, &mut gp)?;
        Ok((gl.flat(), gp.flat()))
    }
}

/// Records `forward` on a fresh tape and backpropagates `a·log|ψ| + b·arg ψ`.
pub(crate) fn accumulate_with<'s, F>(store: &'s ParamStore, forward: F, a: f64, b: f64, out: &mut GradBuffer) -> Result<(), AnsatzError>
where
    F: FnOnce(&mut Tape<'s>) -> Result<GraphAmplitude<NodeId>, AnsatzError>,
{
    let mut t = Tape::new(store);
    let (l, p) = match forward(&mut t)? {
        GraphAmplitude::Zero => return Err(AnsatzError::ZeroNorm),
        GraphAmplitude::Value { log_mag, phase } => (log_mag, phase),
    };
    let sl = t.scale(&l, a);
    let sp = t.scale(&p, b);
    let loss = t.add(&sl, &sp);
    t.backward(loss, 1.0, out)?;
    Ok(())
}

pub(crate) fn check_len(expected: usize, x: &SpinConfig) -> Result<(), AnsatzError> {
    if x.len() == expected {
        Ok(())
    } else {
        Err(AnsatzError::LengthMismatch { expected, got: x.len() })
    }
}
