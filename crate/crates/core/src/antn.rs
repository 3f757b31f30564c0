//! Autoregressive neural tensor network: MPS tensors plus a masked-network
//! correction, contracted left to right with a per-site normalization that
//! makes every conditional an exact probability.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::arnn::{MaskedNet, OutputInit, SymmetryFlags};
use crate::grad::{Eval, GradBuffer, Graph, ParamId, ParamStore};
use crate::lattice::SpinConfig;
use crate::mps::{complex_vec_mat, ComplexNode, GraphAmplitude, Mps, MpsLayout};
use crate::numerics::C64;
use crate::wavefunction::{accumulate_with, check_len, Ansatz, AnsatzError, ExactSampler, LogAmplitude, Wavefunction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AntnMode {
    /// One complex correction per tensor entry.
    Elementwise,
    /// One complex correction per (site, value), added to every entry.
    Blockwise,
}

/// Left partial contraction, kept at unit norm.
#[derive(Clone, Debug, PartialEq)]
pub struct LeftState {
    pub vector: Vec<C64>,
    pub log_norm: f64,
}

impl LeftState {
    pub fn start() -> Self {
        Self { vector: vec![C64::new(1.0, 0.0)], log_norm: 0.0 }
    }

    pub fn is_zero(&self) -> bool {
        self.log_norm == f64::NEG_INFINITY
    }
}

#[derive(Clone, Debug)]
pub struct AntnModel {
    store: ParamStore,
    layout: MpsLayout,
    re: ParamId,
    im: ParamId,
    net: MaskedNet,
    mode: AntnMode,
    symmetry: SymmetryFlags,
}

impl AntnModel {
    /// Builds a model whose tensors start at `mps`. With `OutputInit::Zero`
    /// the correction vanishes and the model equals `mps` when it is
    /// right-canonical.
    pub fn new(
        mps: &Mps,
        mode: AntnMode,
        depth: usize,
        hidden: usize,
        symmetry: SymmetryFlags,
        output_init: OutputInit,
        rng: &mut impl Rng,
    ) -> Result<Self, AnsatzError> {
        let n = mps.n_sites();
        symmetry.validate(n)?;
        let (layout, re, im) = MpsLayout::flatten(mps);
        let mut store = ParamStore::new();
        let re = store.add_block("mps.re", re)?;
        let im = store.add_block("mps.im", im)?;
        let dims = layout.dims();
        let out_sizes = (0..n)
            .map(|i| match mode {
                AntnMode::Elementwise => 4 * dims[i] * dims[i + 1],
                AntnMode::Blockwise => 4,
            })
            .collect();
        let net = MaskedNet::new(&mut store, "net", depth, hidden, out_sizes, output_init, rng)?;
        Ok(Self { store, layout, re, im, net, mode, symmetry })
    }

    pub fn n_sites(&self) -> usize {
        self.layout.n_sites()
    }

    pub fn mode(&self) -> AntnMode {
        self.mode
    }

    pub fn symmetry(&self) -> SymmetryFlags {
        self.symmetry
    }

    pub fn net(&self) -> &MaskedNet {
        &self.net
    }

    /// Bond dimensions `χ_0..χ_n`.
    pub fn bond_dims(&self) -> &[usize] {
        self.layout.dims()
    }

    /// The current `M` tensors as an MPS (not necessarily canonical).
    pub fn tensors(&self) -> Result<Mps, AnsatzError> {
        self.layout.unflatten(self.store.values(self.re), self.store.values(self.im))
    }

    /// Raw network outputs for site `i` given the first `i` bits of `prefix`.
    pub fn head(&self, i: usize, prefix: &[u8]) -> Vec<f64> {
        let n = self.n_sites();
        let mut bits = vec![0u8; n];
        let k = prefix.len().min(i);
        bits[..k].copy_from_slice(&prefix[..k]);
        let mut e = Eval::new(&self.store);
        let h = self.net.hidden_state(&mut e, &bits);
        let o = self.net.site_output(&mut e, &h, i);
        e.value(&o).to_vec()
    }

    /// `ψ̃_i(v | x_<i)` as a row-major `χ_i × χ_{i+1}` matrix.
    pub fn cond_tensor(&self, i: usize, v: usize, head: &[f64]) -> Result<Vec<C64>, AnsatzError> {
        let expected = self.net.out_sizes()[i];
        if head.len() != expected {
            return Err(AnsatzError::Shape { what: "network head", expected, got: head.len() });
        }
        let (off, l, r) = self.layout.block(i, v);
        let lr = l * r;
        let (mr, mi) = (&self.store.values(self.re)[off..off + lr], &self.store.values(self.im)[off..off + lr]);
        Ok(match self.mode {
            AntnMode::Elementwise => {
                let (fr, fi) = (&head[2 * v * lr..(2 * v + 1) * lr], &head[(2 * v + 1) * lr..(2 * v + 2) * lr]);
                (0..lr).map(|k| C64::new(mr[k] + fr[k], mi[k] + fi[k])).collect()
            }
            AntnMode::Blockwise => (0..lr).map(|k| C64::new(mr[k] + head[2 * v], mi[k] + head[2 * v + 1])).collect(),
        })
    }

    /// Contracts one more site into `state` and renormalizes.
    pub fn step(&self, state: &LeftState, i: usize, v: usize, head: &[f64]) -> Result<LeftState, AnsatzError> {
        let a = self.cond_tensor(i, v, head)?;
        let r = self.layout.dims()[i + 1];
        if state.vector.len() != self.layout.dims()[i] {
            return Err(AnsatzError::Shape { what: "left state", expected: self.layout.dims()[i], got: state.vector.len() });
        }
        let mut out = vec![C64::new(0.0, 0.0); r];
        for (row, u) in a.chunks(r).zip(&state.vector) {
            for (o, m) in out.iter_mut().zip(row) {
                *o += u * m;
            }
        }
        let nrm = out.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nrm == 0.0 || state.is_zero() {
            return Ok(LeftState { vector: out, log_norm: f64::NEG_INFINITY });
        }
        out.iter_mut().for_each(|z| *z /= nrm);
        Ok(LeftState { vector: out, log_norm: state.log_norm + nrm.ln() })
    }

    /// `(q(0|x_<i), q(1|x_<i))` from the norms of both stepped states, with
    /// the U(1) mask applied for `downs` earlier down spins. With spin-flip
    /// symmetry the site-0 pair is `(½, ½)` and later sites are conditionals
    /// of the representative.
    pub fn conditional_prob(&self, state: &LeftState, i: usize, head: &[f64], downs: usize) -> Result<[f64; 2], AnsatzError> {
        if self.symmetry.z2_flip && i == 0 {
            return Ok([0.5, 0.5]);
        }
        let allowed = self.symmetry.allowed(self.n_sites(), i, downs);
        let mut p = [0.0; 2];
        for v in 0..2 {
            if allowed[v] {
                let s = self.step(state, i, v, head)?;
                if !s.is_zero() {
                    p[v] = (2.0 * (s.log_norm - state.log_norm)).exp();
                }
            }
        }
        let total = p[0] + p[1];
        if !(total > 0.0) {
            return Err(AnsatzError::InfeasibleMask { site: i });
        }
        Ok([p[0] / total, p[1] / total])
    }

    fn stepped<G: Graph>(&self, g: &mut G, o: &G::V, u: &Option<ComplexNode<G::V>>, i: usize, v: usize) -> ComplexNode<G::V> {
        let (off, l, r) = self.layout.block(i, v);
        let lr = l * r;
        let m = (g.param(self.re, off, lr), g.param(self.im, off, lr));
        let a = match self.mode {
            AntnMode::Elementwise => {
                let fr = g.slice(o, 2 * v * lr, lr);
                let fi = g.slice(o, (2 * v + 1) * lr, lr);
                (g.add(&m.0, &fr), g.add(&m.1, &fi))
            }
            AntnMode::Blockwise => {
                let fr = g.slice(o, 2 * v, 1);
                let fi = g.slice(o, 2 * v + 1, 1);
                (g.add_scalar(&m.0, &fr), g.add_scalar(&m.1, &fi))
            }
        };
        match u {
            None => a,
            Some(u) => complex_vec_mat(g, u, &a, r),
        }
    }

    /// `log ψ(x)` as graph nodes.
    pub fn forward<G: Graph>(&self, g: &mut G, x: &SpinConfig) -> Result<GraphAmplitude<G::V>, AnsatzError> {
        let n = self.n_sites();
        check_len(n, x)?;
        let (y, _) = self.symmetry.representative(x);
        let h = self.net.hidden_state(g, y.bits());
        let mut u: Option<ComplexNode<G::V>> = None;
        let mut log_mag: Option<G::V> = None;
        let mut downs = 0;
        for i in 0..n {
            let xi = y.bits()[i] as usize;
            let allowed = self.symmetry.allowed(n, i, downs);
            if !allowed[xi] {
                return Ok(GraphAmplitude::Zero);
            }
            let o = self.net.site_output(g, &h, i);
            let next = self.stepped(g, &o, &u, i, xi);
            let nx = {
                let a = g.sum_sq(&next.0);
                let b = g.sum_sq(&next.1);
                g.add(&a, &b)
            };
            if g.scalar(&nx) == 0.0 {
                return Ok(GraphAmplitude::Zero);
            }
            let term = if self.symmetry.z2_flip && i == 0 {
                Some(g.constant(vec![0.5 * 0.5f64.ln()]))
            } else if allowed[1 - xi] {
                let other = self.stepped(g, &o, &u, i, 1 - xi);
                let a = g.sum_sq(&other.0);
                let b = g.sum_sq(&other.1);
                let no = g.add(&a, &b);
                let total = g.add(&nx, &no);
                let ln_x = g.log(&nx);
                let ln_t = g.log(&total);
                let lq = g.sub(&ln_x, &ln_t);
                Some(g.scale(&lq, 0.5))
            } else {
                None
            };
            if let Some(t) = term {
                log_mag = Some(match log_mag {
                    None => t,
                    Some(acc) => g.add(&acc, &t),
                });
            }
            let inv = g.powf(&nx, -0.5);
            u = Some((g.scale_by(&next.0, &inv), g.scale_by(&next.1, &inv)));
            downs += xi;
        }
        let u = u.expect("at least one site");
        let phase = g.atan2(&u.1, &u.0);
        if let Some(e) = g.fault() {
            return Err(e.clone().into());
        }
        let log_mag = match log_mag {
            Some(v) => v,
            None => g.constant(vec![0.0]),
        };
        Ok(GraphAmplitude::Value { log_mag, phase })
    }

    /// `uᵀ·ψ̃_i(v)` without normalization.
    fn raw_step(&self, u: &[C64], o: &[f64], i: usize, v: usize) -> Vec<C64> {
        let (re, im) = (self.store.values(self.re), self.store.values(self.im));
        let (off, l, r) = self.layout.block(i, v);
        let lr = l * r;
        let mut out = vec![C64::new(0.0, 0.0); r];
        for (a, ua) in u.iter().enumerate() {
            for (c, oc) in out.iter_mut().enumerate() {
                let k = a * r + c;
                let (fr, fi) = match self.mode {
                    AntnMode::Elementwise => (o[2 * v * lr + k], o[(2 * v + 1) * lr + k]),
                    AntnMode::Blockwise => (o[2 * v], o[2 * v + 1]),
                };
                *oc += ua * C64::new(re[off + k] + fr, im[off + k] + fi);
            }
        }
        out
    }

    /// Value-only contraction of a representative `y` given each site's head outputs.
    fn chain<'h>(&self, y: &[u8], head: impl Fn(usize) -> &'h [f64]) -> LogAmplitude {
        let n = self.n_sites();
        let dims = self.layout.dims();
        let step = |u: &[C64], o: &[f64], i: usize, v: usize| self.raw_step(u, o, i, v);
        let mut u = vec![C64::new(1.0, 0.0)];
        let mut log_mag = 0.0;
        let mut downs = 0;
        let norm = |v: &[C64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>();
        for i in 0..n {
            debug_assert_eq!(u.len(), dims[i]);
            let xi = y[i] as usize;
            let allowed = self.symmetry.allowed(n, i, downs);
            if !allowed[xi] {
                return LogAmplitude::ZERO;
            }
            let o = head(i);
            let next = step(&u, o, i, xi);
            let nx = norm(&next);
            if nx == 0.0 {
                return LogAmplitude::ZERO;
            }
            if self.symmetry.z2_flip && i == 0 {
                log_mag += 0.5 * 0.5f64.ln();
            } else if allowed[1 - xi] {
                let no = norm(&step(&u, o, i, 1 - xi));
                log_mag += 0.5 * (nx.ln() - (nx + no).ln());
            }
            let inv = nx.powf(-0.5);
            u = next.into_iter().map(|z| z * inv).collect();
            downs += xi;
        }
        LogAmplitude { log_mag, phase: u[0].im.atan2(u[0].re) }
    }

    pub fn log_psi(&self, x: &SpinConfig) -> Result<LogAmplitude, AnsatzError> {
        let mut e = Eval::new(&self.store);
        let amp = self.forward(&mut e, x)?;
        Ok(amp.to_log_amplitude(&e))
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> Result<SpinConfig, AnsatzError> {
        let n = self.n_sites();
        let mut bits = vec![0u8; n];
        let mut state = LeftState::start();
        let mut downs = 0;
        for i in 0..n {
            let head = self.head(i, &bits);
            let b = if self.symmetry.z2_flip && i == 0 {
                0
            } else {
                let p = self.conditional_prob(&state, i, &head, downs)?;
                (rng.gen::<f64>() >= p[0]) as usize
            };
            state = self.step(&state, i, b, &head)?;
            if state.is_zero() {
                return Err(AnsatzError::ZeroNorm);
            }
            bits[i] = b as u8;
            downs += b;
        }
        let y = SpinConfig::new(bits).expect("binary");
        if self.symmetry.z2_flip && rng.gen::<bool>() {
            Ok(y.flipped())
        } else {
            Ok(y)
        }
    }

    /// Ancestral sampling of `count` configurations site by site, with the
    /// network evaluated for the whole batch at once.
    pub fn sample_batch(&self, count: usize, rng: &mut dyn RngCore) -> Result<Vec<SpinConfig>, AnsatzError> {
        let n = self.n_sites();
        let mut bits = vec![vec![0u8; n]; count];
        let mut us = vec![vec![C64::new(1.0, 0.0)]; count];
        let mut downs = vec![0usize; count];
        let norm = |v: &[C64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>();
        for i in 0..n {
            let refs: Vec<&[u8]> = bits.iter().map(|b| b.as_slice()).collect();
            let hidden = self.net.batch_hidden(&self.store, &refs);
            let out = self.net.batch_site_output(&self.store, &hidden, count, i);
            let k = self.net.out_sizes()[i];
            for b in 0..count {
                let o = &out[b * k..(b + 1) * k];
                let allowed = self.symmetry.allowed(n, i, downs[b]);
                let cand: [Option<Vec<C64>>; 2] = [0, 1].map(|v| allowed[v].then(|| self.raw_step(&us[b], o, i, v)));
                let p: [f64; 2] = [0, 1].map(|v| cand[v].as_ref().map_or(0.0, |c| norm(c)));
                let v = if self.symmetry.z2_flip && i == 0 {
                    0
                } else {
                    let total = p[0] + p[1];
                    if !(total > 0.0) {
                        return Err(AnsatzError::InfeasibleMask { site: i });
                    }
                    (rng.gen::<f64>() * total >= p[0]) as usize
                };
                if !(p[v] > 0.0) {
                    return Err(AnsatzError::ZeroNorm);
                }
                let inv = p[v].powf(-0.5);
                us[b] = cand[v].as_ref().expect("chosen value is allowed").iter().map(|z| z * inv).collect();
                bits[b][i] = v as u8;
                downs[b] += v;
            }
        }
        Ok(bits
            .into_iter()
            .map(|b| {
                let y = SpinConfig::new(b).expect("binary");
                if self.symmetry.z2_flip && rng.gen::<bool>() {
                    y.flipped()
                } else {
                    y
                }
            })
            .collect())
    }
}

impl Wavefunction for AntnModel {
    fn n_sites(&self) -> usize {
        self.layout.n_sites()
    }

    fn log_amplitude(&self, x: &SpinConfig) -> Result<LogAmplitude, AnsatzError> {
        self.log_psi(x)
    }

    fn log_amplitude_batch(&self, xs: &[SpinConfig]) -> Result<Vec<LogAmplitude>, AnsatzError> {
        let n = self.n_sites();
        let reps = xs.iter().map(|x| check_len(n, x).map(|_| self.symmetry.representative(x).0)).collect::<Result<Vec<_>, _>>()?;
        let bits: Vec<&[u8]> = reps.iter().map(|y| y.bits()).collect();
        let hidden = self.net.batch_hidden(&self.store, &bits);
        let outs: Vec<Vec<f64>> = (0..n).map(|i| self.net.batch_site_output(&self.store, &hidden, xs.len(), i)).collect();
        Ok(bits.iter().enumerate().map(|(b, y)| self.chain(y, |i| &outs[i][b * self.net.out_sizes()[i]..(b + 1) * self.net.out_sizes()[i]])).collect())
    }
}

impl ExactSampler for AntnModel {
    fn sample(&self, rng: &mut dyn RngCore) -> Result<SpinConfig, AnsatzError> {
        AntnModel::sample(self, rng)
    }

    fn sample_batch(&self, count: usize, rng: &mut dyn RngCore) -> Result<Vec<SpinConfig>, AnsatzError> {
        AntnModel::sample_batch(self, count, rng)
    }
}

impl Ansatz for AntnModel {
    fn store(&self) -> &ParamStore {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn accumulate_log_grad(&self, x: &SpinConfig, a: f64, b: f64, out: &mut GradBuffer) -> Result<(), AnsatzError> {
        accumulate_with(&self.store, |t| self.forward(t, x), a, b, out)
    }
}
