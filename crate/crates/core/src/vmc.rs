//! Variational Monte Carlo: local energies, the energy estimator, the
//! variance-controlled gradient, Adam, and the training step.
//!
//! Work is split into fixed-size chunks and reduced in chunk order, so results
//! do not depend on the number of threads.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{HamiltonianTerms, SpinConfig};
use crate::numerics::C64;
use crate::wavefunction::{Ansatz, AnsatzError, ExactSampler, LogAmplitude, Wavefunction};

const CHUNK: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VmcError {
    #[error("batch is empty")]
    EmptyBatch,
    #[error("sampled configuration {0} has zero amplitude")]
    ZeroAmplitude(String),
    #[error("non-finite {what} at step {step}")]
    NonFinite { what: &'static str, step: u64 },
    #[error("gradient has {got} entries, parameters have {expected}")]
    Shape { expected: usize, got: usize },
    #[error("invalid training setting: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Ansatz(#[from] AnsatzError),
}

/// Distinct configurations with weights summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedBatch {
    pub configs: Vec<SpinConfig>,
    pub weights: Vec<f64>,
    /// Number of draws the weights came from; `None` for exact weights.
    pub n_samples: Option<usize>,
}

impl WeightedBatch {
    /// Deduplicates samples; weights are `count / N`.
    pub fn from_samples(samples: &[SpinConfig]) -> Result<Self, VmcError> {
        if samples.is_empty() {
            return Err(VmcError::EmptyBatch);
        }
        let n = samples[0].len();
        let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
        for s in samples {
            *counts.entry(s.to_index()).or_default() += 1;
        }
        let total = samples.len() as f64;
        let (configs, weights) = counts.into_iter().map(|(k, c)| (SpinConfig::from_index(k, n), c as f64 / total)).unzip();
        Ok(Self { configs, weights, n_samples: Some(samples.len()) })
    }

    /// Every configuration weighted by `|ψ(x)|² / Σ|ψ|²`.
    pub fn enumerated<W: Wavefunction + ?Sized>(psi: &W) -> Result<Self, VmcError> {
        let n = psi.n_sites();
        let all: Vec<SpinConfig> = (0..1u64 << n).map(|i| SpinConfig::from_index(i, n)).collect();
        let amps = batch_log_amplitudes(psi, &all)?;
        let probs: Vec<f64> = amps.iter().map(|a| a.prob()).collect();
        let z: f64 = probs.iter().sum();
        if !(z > 0.0) {
            return Err(AnsatzError::ZeroNorm.into());
        }
        let (configs, weights) = all.into_iter().zip(probs).filter(|(_, p)| *p > 0.0).map(|(x, p)| (x, p / z)).unzip();
        Ok(Self { configs, weights, n_samples: None })
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }
}

/// Evaluates `xs` in parallel chunks, preserving order.
pub fn batch_log_amplitudes<W: Wavefunction + ?Sized>(psi: &W, xs: &[SpinConfig]) -> Result<Vec<LogAmplitude>, AnsatzError> {
    let parts = xs.par_chunks(CHUNK).map(|c| psi.log_amplitude_batch(c)).collect::<Result<Vec<_>, _>>()?;
    Ok(parts.into_iter().flatten().collect())
}

/// `E_loc(x) = Σ_y H_xy ψ(y)/ψ(x)` for one configuration.
pub fn local_energy<W: Wavefunction + ?Sized>(psi: &W, terms: &HamiltonianTerms, x: &SpinConfig) -> Result<C64, VmcError> {
    Ok(local_energies(psi, terms, std::slice::from_ref(x))?[0])
}

/// Local energies of many configurations; each distinct amplitude is computed once.
pub fn local_energies<W: Wavefunction + ?Sized>(psi: &W, terms: &HamiltonianTerms, xs: &[SpinConfig]) -> Result<Vec<C64>, VmcError> {
    let n = terms.n_sites();
    let mut rows: Vec<Vec<(u64, f64)>> = Vec::with_capacity(xs.len());
    let mut needed: Vec<u64> = Vec::new();
    for x in xs {
        crate::wavefunction::check_len(n, x)?;
        let mut row = Vec::new();
        terms.for_each_connected(x.to_index(), |y, h| row.push((y, h)));
        needed.extend(row.iter().map(|&(y, _)| y));
        rows.push(row);
    }
    needed.sort_unstable();
    needed.dedup();
    let configs: Vec<SpinConfig> = needed.iter().map(|&k| SpinConfig::from_index(k, n)).collect();
    let amps = batch_log_amplitudes(psi, &configs)?;
    let lookup = |k: u64| amps[needed.binary_search(&k).expect("collected above")];
    xs.iter()
        .zip(&rows)
        .map(|(x, row)| {
            let ax = lookup(x.to_index());
            if ax.is_zero() {
                return Err(VmcError::ZeroAmplitude(x.to_string()));
            }
            let mut e = C64::new(0.0, 0.0);
            for &(y, h) in row {
                let ay = lookup(y);
                if !ay.is_zero() {
                    e += h * C64::new(ay.log_mag - ax.log_mag, ay.phase - ax.phase).exp();
                }
            }
            Ok(e)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyEstimate {
    pub mean: C64,
    pub std_error: f64,
    pub batch_size: usize,
}

/// Weighted mean of the local energies. The standard error is
/// `sqrt(Var / N)` for sampled batches and zero for exact weights.
pub fn estimate_energy(batch: &WeightedBatch, e_loc: &[C64]) -> Result<EnergyEstimate, VmcError> {
    if batch.is_empty() {
        return Err(VmcError::EmptyBatch);
    }
    let mean: C64 = batch.weights.iter().zip(e_loc).map(|(w, e)| e * w).sum();
    let var: f64 = batch.weights.iter().zip(e_loc).map(|(w, e)| w * (e - mean).norm_sqr()).sum();
    let (std_error, batch_size) = match batch.n_samples {
        Some(n) => ((var / n as f64).sqrt(), n),
        None => (0.0, batch.len()),
    };
    Ok(EnergyEstimate { mean, std_error, batch_size })
}

/// `2w·Re{(E_loc − b) ∇log ψ*(x)}` for one distinct configuration.
pub fn sample_contribution<A: Ansatz + ?Sized>(psi: &A, x: &SpinConfig, weight: f64, e_loc: C64, baseline: C64) -> Result<Vec<f64>, VmcError> {
    let d = (e_loc - baseline) * (2.0 * weight);
    let mut buf = psi.store().grad_buffer();
    psi.accumulate_log_grad(x, d.re, d.im, &mut buf)?;
    Ok(buf.flat())
}

/// Energy gradient estimate `Σ_x 2w_x Re{(E_loc(x) − b) ∇log ψ*(x)}`, with
/// baseline `b` equal to the batch mean when `control` is set, otherwise zero.
pub fn gradient<A: Ansatz + ?Sized>(psi: &A, batch: &WeightedBatch, e_loc: &[C64], control: bool) -> Result<Vec<f64>, VmcError> {
    if batch.is_empty() {
        return Err(VmcError::EmptyBatch);
    }
    let baseline = if control { estimate_energy(batch, e_loc)?.mean } else { C64::new(0.0, 0.0) };
    let idx: Vec<usize> = (0..batch.len()).collect();
    let parts = idx
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut buf = psi.store().grad_buffer();
            for &k in chunk {
                let d = (e_loc[k] - baseline) * (2.0 * batch.weights[k]);
                psi.accumulate_log_grad(&batch.configs[k], d.re, d.im, &mut buf)?;
            }
            Ok(buf)
        })
        .collect::<Result<Vec<_>, VmcError>>()?;
    let mut total = psi.store().grad_buffer();
    for p in &parts {
        total.add_assign(p);
    }
    Ok(total.flat())
}

/// Piecewise-constant learning rate, halved at each milestone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub initial: f64,
    pub milestones: Vec<u64>,
}

impl LrSchedule {
    pub fn at(&self, step: u64) -> f64 {
        let halvings = self.milestones.iter().filter(|&&m| m <= step).count();
        self.initial * 0.5f64.powi(halvings as i32)
    }
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self { initial: 0.01, milestones: vec![100, 500, 1000, 1800, 2500, 4000, 6000, 8000] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// Completed updates.
    pub t: u64,
}

impl Adam {
    pub fn new(n_params: usize) -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 }
    }

    /// One update in place. Parameters and moments are untouched on error.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) -> Result<(), VmcError> {
        if grad.len() != self.m.len() || params.len() != self.m.len() {
            return Err(VmcError::Shape { expected: self.m.len(), got: grad.len() });
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(VmcError::NonFinite { what: "gradient", step: self.t });
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for k in 0..params.len() {
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * grad[k];
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * grad[k] * grad[k];
            let mh = self.m[k] / bc1;
            let vh = self.v[k] / bc2;
            params[k] -= lr * mh / (vh.sqrt() + self.eps);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub batch: usize,
    pub steps: u64,
    pub seed: u64,
    pub schedule: LrSchedule,
    pub control: bool,
}

impl TrainSettings {
    pub fn validate(&self) -> Result<(), VmcError> {
        if self.batch == 0 {
            return Err(VmcError::InvalidConfig("batch must be positive".into()));
        }
        if !(self.schedule.initial > 0.0) || !self.schedule.initial.is_finite() {
            return Err(VmcError::InvalidConfig(format!("learning rate {} must be positive", self.schedule.initial)));
        }
        Ok(())
    }
}

/// Optimizer state; sampling randomness is derived from `(seed, step)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub step: u64,
    pub adam: Adam,
}

impl TrainState {
    pub fn new(n_params: usize) -> Self {
        Self { step: 0, adam: Adam::new(n_params) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    pub energy: EnergyEstimate,
    pub lr: f64,
    pub unique: usize,
}

fn chunk_rng(seed: u64, step: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step);
    rng.set_word_pos(chunk as u128 * (1 << 32));
    rng
}

/// `n` exact samples drawn in parallel chunks with per-chunk streams.
pub fn draw_samples<S: ExactSampler + ?Sized>(psi: &S, n: usize, seed: u64, step: u64) -> Result<Vec<SpinConfig>, VmcError> {
    let n_chunks = n.div_ceil(CHUNK);
    let parts = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, step, c);
            let len = CHUNK.min(n - c * CHUNK);
            psi.sample_batch(len, &mut rng)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(parts.into_iter().flatten().collect())
}

/// Samples, estimates the energy of the current parameters, then applies one
/// Adam update. Nothing changes if any quantity is non-finite.
pub fn train_step<A: Ansatz>(psi: &mut A, terms: &HamiltonianTerms, state: &mut TrainState, settings: &TrainSettings) -> Result<StepRecord, VmcError> {
    let step = state.step;
    let samples = draw_samples(psi, settings.batch, settings.seed, step)?;
    let batch = WeightedBatch::from_samples(&samples)?;
    let e_loc = local_energies(psi, terms, &batch.configs)?;
    let energy = estimate_energy(&batch, &e_loc)?;
    if !energy.mean.re.is_finite() || !energy.mean.im.is_finite() {
        return Err(VmcError::NonFinite { what: "energy", step });
    }
    let grad = gradient(psi, &batch, &e_loc, settings.control)?;
    let lr = settings.schedule.at(step);
    let mut params = psi.store().flat_values();
    if let Err(e) = state.adam.step(&mut params, &grad, lr) {
        return Err(match e {
            VmcError::NonFinite { what, .. } => VmcError::NonFinite { what, step },
            e => e,
        });
    }
    psi.store_mut().set_flat_values(&params).map_err(AnsatzError::from)?;
    state.step += 1;
    Ok(StepRecord { step, energy, lr, unique: batch.len() })
}
