//! Masked dense autoregressive network and the pure autoregressive
//! wavefunction built on it.
//!
//! Hidden units carry a degree `d ∈ [1, n-1]` and only see inputs `x_0..x_{d-1}`.
//! Degrees are assigned in non-decreasing order, so every mask is a prefix of
//! the previous layer and the masked products are [`Graph::prefix_linear`] calls.

use std::sync::Arc;

use rand::{Rng, RngCore};

use crate::grad::{Eval, GradBuffer, Graph, ParamId, ParamStore};
use crate::lattice::SpinConfig;
use crate::mps::GraphAmplitude;
use crate::numerics::{dgemm, row_major, transposed, C64};
use crate::wavefunction::{accumulate_with, check_len, Ansatz, AnsatzError, ExactSampler, LogAmplitude, Wavefunction};

/// How a site's raw head outputs `(o_0, o_1)` per value become a complex number.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadEncoding {
    /// `exp(o_0 + i·o_1)`: log-modulus and phase.
    Polar,
    /// `o_0 + i·o_1`
    Cartesian,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SymmetryFlags {
    /// Target magnetization `n_up − n_down`.
    pub u1: Option<i64>,
    /// Global spin-flip invariance `ψ(x) = ψ(1 − x)`.
    pub z2_flip: bool,
}

impl SymmetryFlags {
    pub fn validate(&self, n: usize) -> Result<(), AnsatzError> {
        if let Some(m) = self.u1 {
            if m.unsigned_abs() as usize > n || (n as i64 - m) % 2 != 0 {
                return Err(AnsatzError::InvalidSymmetry(format!("magnetization {m} is unreachable with {n} spins")));
            }
            if self.z2_flip && m != 0 {
                return Err(AnsatzError::InvalidSymmetry("spin flip requires zero target magnetization".into()));
            }
        }
        Ok(())
    }

    /// Number of down spins required by the U(1) target.
    pub(crate) fn target_down(&self, n: usize) -> Option<usize> {
        self.u1.map(|m| ((n as i64 - m) / 2) as usize)
    }

    /// Which values of site `i` keep the target reachable, given `downs` down
    /// spins among the earlier sites.
    pub(crate) fn allowed(&self, n: usize, i: usize, downs: usize) -> [bool; 2] {
        match self.target_down(n) {
            None => [true, true],
            Some(t) => {
                let remaining = n - i - 1;
                let ok = |d: usize| d <= t && d + remaining >= t;
                [ok(downs), ok(downs + 1)]
            }
        }
    }

    /// The configuration the conditionals are evaluated on, and whether it was flipped.
    pub(crate) fn representative(&self, x: &SpinConfig) -> (SpinConfig, bool) {
        if self.z2_flip && x.bits().first() == Some(&1) {
            (x.flipped(), true)
        } else {
            (x.clone(), false)
        }
    }
}

/// Degree of hidden unit `u` out of `h` for `n` inputs.
fn degree(u: usize, h: usize, n: usize) -> usize {
    if n <= 1 {
        1
    } else {
        1 + u * (n - 1) / h
    }
}

/// Layer parameters and masks of a MADE-style network over `n` binary inputs.
#[derive(Clone, Debug)]
pub struct MaskedNet {
    n: usize,
    depth: usize,
    hidden: usize,
    weights: Vec<ParamId>,
    biases: Vec<ParamId>,
    in_prefix: Arc<[usize]>,
    hidden_prefix: Arc<[usize]>,
    out_w: ParamId,
    out_b: ParamId,
    out_sizes: Vec<usize>,
    out_offsets: Vec<usize>,
    /// Hidden units visible to the output of each site.
    out_prefix: Vec<Arc<[usize]>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OutputInit {
    Zero,
    /// Uniform in `±scale / √fan_in`.
    Uniform(f64),
}

impl MaskedNet {
    /// Registers the layers in `store` under `prefix`. `out_sizes[i]` is the
    /// number of real outputs for site `i`.
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        depth: usize,
        hidden: usize,
        out_sizes: Vec<usize>,
        output_init: OutputInit,
        rng: &mut impl Rng,
    ) -> Result<Self, AnsatzError> {
        let n = out_sizes.len();
        if n == 0 || depth == 0 || hidden == 0 {
            return Err(AnsatzError::InvalidSymmetry(format!(
                "network needs sites, depth and width (n = {n}, depth = {depth}, hidden = {hidden})"
            )));
        }
        let degrees: Vec<usize> = (0..hidden).map(|u| degree(u, hidden, n)).collect();
        let count_le = |d: usize| degrees.iter().filter(|&&e| e <= d).count();
        let in_prefix: Arc<[usize]> = degrees.iter().map(|&d| d.min(n)).collect::<Vec<_>>().into();
        let hidden_prefix: Arc<[usize]> = degrees.iter().map(|&d| count_le(d)).collect::<Vec<_>>().into();
        let mut uniform = |len: usize, fan_in: usize, scale: f64| -> Vec<f64> {
            let bound = scale / (fan_in.max(1) as f64).sqrt();
            (0..len).map(|_| rng.gen_range(-bound..bound)).collect()
        };
        let mut weights = Vec::with_capacity(depth);
        let mut biases = Vec::with_capacity(depth);
        for l in 0..depth {
            let fan_in = if l == 0 { n } else { hidden };
            let w = uniform(hidden * fan_in, fan_in, 1.0);
            let b = uniform(hidden, fan_in, 1.0);
            weights.push(store.add_block(format!("{prefix}.w{l}"), w)?);
            biases.push(store.add_block(format!("{prefix}.b{l}"), b)?);
        }
        let mut out_offsets = Vec::with_capacity(n + 1);
        let mut total = 0;
        for &k in &out_sizes {
            out_offsets.push(total);
            total += k;
        }
        out_offsets.push(total);
        let (ow, ob) = match output_init {
            OutputInit::Zero => (vec![0.0; total * hidden], vec![0.0; total]),
            OutputInit::Uniform(s) => (uniform(total * hidden, hidden, s), uniform(total, hidden, s)),
        };
        let out_w = store.add_block(format!("{prefix}.out.w"), ow)?;
        let out_b = store.add_block(format!("{prefix}.out.b"), ob)?;
        let out_prefix = (0..n).map(|i| vec![count_le(i); out_sizes[i]].into()).collect();
        Ok(Self { n, depth, hidden, weights, biases, in_prefix, hidden_prefix, out_w, out_b, out_sizes, out_offsets, out_prefix })
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn out_sizes(&self) -> &[usize] {
        &self.out_sizes
    }

    /// Final-layer parameter blocks (weights, biases).
    pub fn output_blocks(&self) -> (ParamId, ParamId) {
        (self.out_w, self.out_b)
    }

    /// Activations of the last hidden layer for input bits `x`.
    pub fn hidden_state<G: Graph>(&self, g: &mut G, x: &[u8]) -> G::V {
        let s: Vec<f64> = x.iter().map(|&b| 1.0 - 2.0 * b as f64).collect();
        let mut act = g.constant(s);
        for l in 0..self.depth {
            let (cols, prefix) = if l == 0 { (self.n, &self.in_prefix) } else { (self.hidden, &self.hidden_prefix) };
            let w = g.param(self.weights[l], 0, self.hidden * cols);
            let b = g.param(self.biases[l], 0, self.hidden);
            let pre = g.prefix_linear(&w, &act, cols, prefix);
            let pre = g.add(&pre, &b);
            act = g.tanh(&pre);
        }
        act
    }

    /// Real head outputs of site `i`; they depend only on `x_0..x_{i-1}`.
    pub fn site_output<G: Graph>(&self, g: &mut G, hidden: &G::V, i: usize) -> G::V {
        let (off, k) = (self.out_offsets[i], self.out_sizes[i]);
        let w = g.param(self.out_w, off * self.hidden, k * self.hidden);
        let b = g.param(self.out_b, off, k);
        let y = g.prefix_linear(&w, hidden, self.hidden, &self.out_prefix[i]);
        g.add(&y, &b)
    }
}

impl MaskedNet {
    /// Last hidden layer for a batch of inputs, row-major `B × hidden`.
    pub(crate) fn batch_hidden(&self, store: &ParamStore, xs: &[&[u8]]) -> Vec<f64> {
        let (b, h) = (xs.len(), self.hidden);
        let mut act: Vec<f64> = xs.iter().flat_map(|x| x.iter().map(|&v| 1.0 - 2.0 * v as f64)).collect();
        let mut cols = self.n;
        for l in 0..self.depth {
            let prefix = if l == 0 { &self.in_prefix } else { &self.hidden_prefix };
            let w = store.values(self.weights[l]);
            let masked: Vec<f64> = (0..h)
                .flat_map(|r| (0..cols).map(move |c| if c < prefix[r] { w[r * cols + c] } else { 0.0 }))
                .collect();
            let mut out = vec![0.0; b * h];
            dgemm(b, cols, h, &act, row_major(cols), &masked, transposed(cols), &mut out);
            let bias = store.values(self.biases[l]);
            for row in out.chunks_mut(h) {
                row.iter_mut().zip(bias).for_each(|(v, c)| *v = (*v + c).tanh());
            }
            act = out;
            cols = h;
        }
        act
    }

    /// Head outputs of site `i` for a batch, row-major `B × out_sizes[i]`.
    pub(crate) fn batch_site_output(&self, store: &ParamStore, hidden: &[f64], rows: usize, i: usize) -> Vec<f64> {
        let (off, k, h) = (self.out_offsets[i], self.out_sizes[i], self.hidden);
        let p = self.out_prefix[i].first().copied().unwrap_or(0);
        let w = &store.values(self.out_w)[off * h..(off + k) * h];
        let mut out = vec![0.0; rows * k];
        if p > 0 {
            // Only the first `p` hidden units are visible: a k = p product
            // over the leading columns of both operands.
            dgemm(rows, p, k, hidden, row_major(h), w, transposed(h), &mut out);
        }
        let bias = &store.values(self.out_b)[off..off + k];
        for row in out.chunks_mut(k) {
            row.iter_mut().zip(bias).for_each(|(v, c)| *v += c);
        }
        out
    }
}

/// Pure autoregressive wavefunction: two complex head values per site,
/// normalized per site.
#[derive(Clone, Debug)]
pub struct Arnn {
    store: ParamStore,
    net: MaskedNet,
    encoding: HeadEncoding,
    symmetry: SymmetryFlags,
}

impl Arnn {
    pub fn new(
        n: usize,
        depth: usize,
        hidden: usize,
        encoding: HeadEncoding,
        symmetry: SymmetryFlags,
        rng: &mut impl Rng,
    ) -> Result<Self, AnsatzError> {
        symmetry.validate(n)?;
        let mut store = ParamStore::new();
        let net = MaskedNet::new(&mut store, "net", depth, hidden, vec![4; n], OutputInit::Uniform(1.0), rng)?;
        Ok(Self { store, net, encoding, symmetry })
    }

    pub fn net(&self) -> &MaskedNet {
        &self.net
    }

    pub fn encoding(&self) -> HeadEncoding {
        self.encoding
    }

    pub fn symmetry(&self) -> SymmetryFlags {
        self.symmetry
    }

    /// Unnormalized head values `(ψ̃(0|·), ψ̃(1|·))` from raw outputs.
    fn head_values(&self, o: &[f64]) -> [C64; 2] {
        match self.encoding {
            HeadEncoding::Polar => [C64::from_polar(o[0].exp(), o[1]), C64::from_polar(o[2].exp(), o[3])],
            HeadEncoding::Cartesian => [C64::new(o[0], o[1]), C64::new(o[2], o[3])],
        }
    }

    /// Normalized, masked conditionals of every site for configuration `x`,
    /// reported for `x` itself (spin-flip relabeling already undone).
    pub fn conditionals(&self, x: &SpinConfig) -> Result<Vec<[C64; 2]>, AnsatzError> {
        let n = self.net.n_sites();
        check_len(n, x)?;
        let (y, flipped) = self.symmetry.representative(x);
        let mut e = Eval::new(&self.store);
        let h = self.net.hidden_state(&mut e, y.bits());
        let mut downs = 0;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let o = self.net.site_output(&mut e, &h, i);
            let mut vals = self.head_values(e.value(&o));
            if self.symmetry.z2_flip && i == 0 {
                let phase = vals[0] / vals[0].norm();
                vals = [phase, phase];
            }
            let allowed = self.symmetry.allowed(n, i, downs);
            for v in 0..2 {
                if !allowed[v] {
                    vals[v] = C64::new(0.0, 0.0);
                }
            }
            let norm = (vals[0].norm_sqr() + vals[1].norm_sqr()).sqrt();
            if norm == 0.0 {
                return Err(AnsatzError::InfeasibleMask { site: i });
            }
            let mut pair = [vals[0] / norm, vals[1] / norm];
            if flipped {
                pair.swap(0, 1);
            }
            out.push(pair);
            downs += y.bits()[i] as usize;
        }
        Ok(out)
    }

    /// `log ψ(x)` as graph nodes.
    pub fn forward<G: Graph>(&self, g: &mut G, x: &SpinConfig) -> Result<GraphAmplitude<G::V>, AnsatzError> {
        let n = self.net.n_sites();
        check_len(n, x)?;
        let (y, _) = self.symmetry.representative(x);
        let h = self.net.hidden_state(g, y.bits());
        let mut downs = 0;
        let mut log_mag: Option<G::V> = None;
        let mut phase: Option<G::V> = None;
        let add = |g: &mut G, acc: &mut Option<G::V>, v: G::V| {
            *acc = Some(match acc.take() {
                None => v,
                Some(a) => g.add(&a, &v),
            });
        };
        for i in 0..n {
            let xi = y.bits()[i] as usize;
            let allowed = self.symmetry.allowed(n, i, downs);
            if !allowed[xi] {
                return Ok(GraphAmplitude::Zero);
            }
            let o = self.net.site_output(g, &h, i);
            let z2_first = self.symmetry.z2_flip && i == 0;
            match self.encoding {
                HeadEncoding::Polar => {
                    let l = g.slice(&o, 2 * xi, 1);
                    let th = g.slice(&o, 2 * xi + 1, 1);
                    if z2_first {
                        let c = g_const(g, 0.5 * 0.5f64.ln());
                        add(g, &mut log_mag, c);
                    } else if allowed[1 - xi] {
                        let lo = g.slice(&o, 2 * (1 - xi), 1);
                        let two_l = g.scale(&l, 2.0);
                        let two_lo = g.scale(&lo, 2.0);
                        let lse = g.log_add_exp(&two_l, &two_lo);
                        let lq = g.sub(&two_l, &lse);
                        let half = g.scale(&lq, 0.5);
                        add(g, &mut log_mag, half);
                    }
                    add(g, &mut phase, th);
                }
                HeadEncoding::Cartesian => {
                    let re = g.slice(&o, 2 * xi, 1);
                    let im = g.slice(&o, 2 * xi + 1, 1);
                    let nx = {
                        let pair = g.slice(&o, 2 * xi, 2);
                        g.sum_sq(&pair)
                    };
                    if g.scalar(&nx) == 0.0 {
                        return Ok(GraphAmplitude::Zero);
                    }
                    if z2_first {
                        let c = g_const(g, 0.5 * 0.5f64.ln());
                        add(g, &mut log_mag, c);
                    } else if allowed[1 - xi] {
                        let pair_o = g.slice(&o, 2 * (1 - xi), 2);
                        let no = g.sum_sq(&pair_o);
                        let tot = g.add(&nx, &no);
                        let ln_x = g.log(&nx);
                        let ln_t = g.log(&tot);
                        let lq = g.sub(&ln_x, &ln_t);
                        let half = g.scale(&lq, 0.5);
                        add(g, &mut log_mag, half);
                    }
                    let th = g.atan2(&im, &re);
                    add(g, &mut phase, th);
                }
            }
            downs += xi;
        }
        if let Some(e) = g.fault() {
            return Err(e.clone().into());
        }
        let log_mag = match log_mag {
            Some(v) => v,
            None => g.constant(vec![0.0]),
        };
        Ok(GraphAmplitude::Value { log_mag, phase: phase.expect("at least one site") })
    }

    pub fn log_psi(&self, x: &SpinConfig) -> Result<LogAmplitude, AnsatzError> {
        let mut e = Eval::new(&self.store);
        let amp = self.forward(&mut e, x)?;
        Ok(amp.to_log_amplitude(&e))
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> Result<SpinConfig, AnsatzError> {
        let n = self.net.n_sites();
        let mut bits = vec![0u8; n];
        let mut downs = 0;
        for i in 0..n {
            let mut e = Eval::new(&self.store);
            let h = self.net.hidden_state(&mut e, &bits);
            let o = self.net.site_output(&mut e, &h, i);
            let vals = self.head_values(e.value(&o));
            let allowed = self.symmetry.allowed(n, i, downs);
            let p = if self.symmetry.z2_flip && i == 0 {
                [1.0, 0.0]
            } else {
                [
                    if allowed[0] { vals[0].norm_sqr() } else { 0.0 },
                    if allowed[1] { vals[1].norm_sqr() } else { 0.0 },
                ]
            };
            let total = p[0] + p[1];
            if !(total > 0.0) {
                return Err(AnsatzError::InfeasibleMask { site: i });
            }
            let b = (rng.gen::<f64>() * total >= p[0]) as u8;
            bits[i] = b;
            downs += b as usize;
        }
        let y = SpinConfig::new(bits).expect("bits");
        if self.symmetry.z2_flip && rng.gen::<bool>() {
            Ok(y.flipped())
        } else {
            Ok(y)
        }
    }
}

fn g_const<G: Graph>(g: &mut G, v: f64) -> G::V {
    g.constant(vec![v])
}

impl Wavefunction for Arnn {
    fn n_sites(&self) -> usize {
        self.net.n_sites()
    }

    fn log_amplitude(&self, x: &SpinConfig) -> Result<LogAmplitude, AnsatzError> {
        self.log_psi(x)
    }

    fn log_amplitude_batch(&self, xs: &[SpinConfig]) -> Result<Vec<LogAmplitude>, AnsatzError> {
        let n = self.net.n_sites();
        let reps = xs.iter().map(|x| check_len(n, x).map(|_| self.symmetry.representative(x).0)).collect::<Result<Vec<_>, _>>()?;
        let bits: Vec<&[u8]> = reps.iter().map(|y| y.bits()).collect();
        let hidden = self.net.batch_hidden(&self.store, &bits);
        let outs: Vec<Vec<f64>> = (0..n).map(|i| self.net.batch_site_output(&self.store, &hidden, xs.len(), i)).collect();
        Ok(bits
            .iter()
            .enumerate()
            .map(|(b, y)| {
                let mut log_mag = 0.0;
                let mut phase = 0.0;
                let mut downs = 0;
                for i in 0..n {
                    let xi = y[i] as usize;
                    let allowed = self.symmetry.allowed(n, i, downs);
                    if !allowed[xi] {
                        return LogAmplitude::ZERO;
                    }
                    let o = &outs[i][4 * b..4 * b + 4];
                    let z2_first = self.symmetry.z2_flip && i == 0;
                    match self.encoding {
                        HeadEncoding::Polar => {
                            if z2_first {
                                log_mag += 0.5 * 0.5f64.ln();
                            } else if allowed[1 - xi] {
                                let (a, c) = (2.0 * o[2 * xi], 2.0 * o[2 * (1 - xi)]);
                                log_mag += 0.5 * (a - log_add_exp(a, c));
                            }
                            phase += o[2 * xi + 1];
                        }
                        HeadEncoding::Cartesian => {
                            let nx = o[2 * xi] * o[2 * xi] + o[2 * xi + 1] * o[2 * xi + 1];
                            if nx == 0.0 {
                                return LogAmplitude::ZERO;
                            }
                            if z2_first {
                                log_mag += 0.5 * 0.5f64.ln();
                            } else if allowed[1 - xi] {
                                let no = o[2 * (1 - xi)] * o[2 * (1 - xi)] + o[2 * (1 - xi) + 1] * o[2 * (1 - xi) + 1];
                                log_mag += 0.5 * (nx.ln() - (nx + no).ln());
                            }
                            phase += o[2 * xi + 1].atan2(o[2 * xi]);
                        }
                    }
                    downs += xi;
                }
                LogAmplitude { log_mag, phase }
            })
            .collect())
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

impl ExactSampler for Arnn {
    fn sample(&self, rng: &mut dyn RngCore) -> Result<SpinConfig, AnsatzError> {
        Arnn::sample(self, rng)
    }

    fn sample_batch(&self, count: usize, rng: &mut dyn RngCore) -> Result<Vec<SpinConfig>, AnsatzError> {
        let n = self.net.n_sites();
        let mut bits = vec![vec![0u8; n]; count];
        let mut downs = vec![0usize; count];
        for i in 0..n {
            let refs: Vec<&[u8]> = bits.iter().map(|b| b.as_slice()).collect();
            let hidden = self.net.batch_hidden(&self.store, &refs);
            let out = self.net.batch_site_output(&self.store, &hidden, count, i);
            for b in 0..count {
                let vals = self.head_values(&out[4 * b..4 * b + 4]);
                let allowed = self.symmetry.allowed(n, i, downs[b]);
                let v = if self.symmetry.z2_flip && i == 0 {
                    0
                } else {
                    let p = [0, 1].map(|v| if allowed[v] { vals[v].norm_sqr() } else { 0.0 });
                    let total = p[0] + p[1];
                    if !(total > 0.0) {
                        return Err(AnsatzError::InfeasibleMask { site: i });
                    }
                    (rng.gen::<f64>() * total >= p[0]) as u8
                };
                bits[b][i] = v;
                downs[b] += v as usize;
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

impl Ansatz for Arnn {
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

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn all(n: usize) -> impl Iterator<Item = SpinConfig> {
        (0..1u64 << n).map(move |i| SpinConfig::from_index(i, n))
    }

    fn net(n: usize, enc: HeadEncoding, sym: SymmetryFlags, seed: u64) -> Arnn {
        Arnn::new(n, 2, 8, enc, sym, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn conditionals_are_normalized() {
        for enc in [HeadEncoding::Polar, HeadEncoding::Cartesian] {
            let a = net(5, enc, SymmetryFlags::default(), 1);
            for x in all(5) {
                for c in a.conditionals(&x).unwrap() {
                    assert!((c[0].norm_sqr() + c[1].norm_sqr() - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn u1_forces_second_site() {
        let a = net(2, HeadEncoding::Polar, SymmetryFlags { u1: Some(0), z2_flip: false }, 2);
        let c = a.conditionals(&SpinConfig::new(vec![0, 1]).unwrap()).unwrap();
        assert_eq!(c[1][0], C64::new(0.0, 0.0));
        assert!((c[1][1].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn outputs_ignore_later_inputs() {
        let a = net(6, HeadEncoding::Polar, SymmetryFlags::default(), 3);
        let base = SpinConfig::new(vec![0, 1, 1, 0, 1, 0]).unwrap();
        let c0 = a.conditionals(&base).unwrap();
        for j in 0..6 {
            let mut bits = base.bits().to_vec();
            bits[j] ^= 1;
            let c1 = a.conditionals(&SpinConfig::new(bits).unwrap()).unwrap();
            for i in 0..=j {
                assert_eq!(c0[i], c1[i], "site {i} changed when flipping {j}");
            }
        }
    }

    #[test]
    fn single_site_amplitude_is_the_conditional() {
        let a = net(1, HeadEncoding::Polar, SymmetryFlags::default(), 4);
        for x in all(1) {
            let c = a.conditionals(&x).unwrap()[0][x.bits()[0] as usize];
            let z = a.log_psi(&x).unwrap().to_complex();
            assert!((z - c).norm() < 1e-14);
        }
    }

    #[test]
    fn amplitude_is_product_of_conditionals() {
        for sym in [SymmetryFlags::default(), SymmetryFlags { u1: Some(0), z2_flip: true }] {
            let a = net(6, HeadEncoding::Cartesian, sym, 5);
            for x in all(6) {
                let z = a.log_psi(&x).unwrap().to_complex();
                let c = match a.conditionals(&x) {
                    Ok(c) => c,
                    Err(_) => continue,
                };
                let prod: C64 = c.iter().zip(x.bits()).map(|(c, &b)| c[b as usize]).product();
                assert!((z.norm() - prod.norm()).abs() < 1e-12, "{x}");
            }
        }
    }

    #[test]
    fn symmetry_validation() {
        assert!(SymmetryFlags { u1: Some(1), z2_flip: false }.validate(4).is_err());
        assert!(SymmetryFlags { u1: Some(2), z2_flip: true }.validate(4).is_err());
        assert!(SymmetryFlags { u1: Some(6), z2_flip: false }.validate(4).is_err());
        assert!(SymmetryFlags { u1: Some(-2), z2_flip: false }.validate(4).is_ok());
    }

    #[test]
    fn batch_path_matches_graph_path() {
        let xs: Vec<SpinConfig> = all(6).collect();
        for enc in [HeadEncoding::Polar, HeadEncoding::Cartesian] {
            for sym in [SymmetryFlags::default(), SymmetryFlags { u1: Some(0), z2_flip: true }] {
                let a = net(6, enc, sym, 9);
                let batch = a.log_amplitude_batch(&xs).unwrap();
                for (x, b) in xs.iter().zip(&batch) {
                    let s = a.log_psi(x).unwrap();
                    assert_eq!(s.is_zero(), b.is_zero());
                    if !s.is_zero() {
                        assert!((s.to_complex() - b.to_complex()).norm() < 1e-12 * s.to_complex().norm());
                    }
                }
            }
        }
    }
}
