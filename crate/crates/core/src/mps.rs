//! Matrix product states: evaluation, right canonicalization, prefix marginals
//! and exact ancestral sampling.

use rand::{Rng, RngCore};

use crate::grad::{Eval, GradBuffer, Graph, ParamId, ParamStore};
use crate::lattice::SpinConfig;
use crate::numerics::{qr, ComplexMatrix, Tensor3, C64};
use crate::wavefunction::{accumulate_with, check_len, Ansatz, AnsatzError, ExactSampler, LogAmplitude, Wavefunction};

const CANONICAL_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Canonical {
    None,
    Right,
}

/// Site tensors `T[i]` with dims `(χ_{i-1}, 2, χ_i)` and `χ_0 = χ_n = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mps {
    tensors: Vec<Tensor3>,
    canonical: Canonical,
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// `v · T(s)` for a left vector `v` of length `T.left()`.
fn left_step(v: &[C64], t: &Tensor3, s: usize) -> Vec<C64> {
    let mut out = vec![zero(); t.right()];
    for (a, &va) in v.iter().enumerate() {
        if va == zero() {
            continue;
        }
        for (b, o) in out.iter_mut().enumerate() {
            *o += va * t.get(a, s, b);
        }
    }
    out
}

fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Bond dimensions `min(χ, 2^i, 2^(n-i))` for `i = 0..=n`.
pub fn capped_bond_dims(n: usize, chi: usize) -> Vec<usize> {
    (0..=n)
        .map(|i| {
            let edge = i.min(n - i);
            if edge >= 63 {
                chi
            } else {
                chi.min(1usize << edge)
            }
        })
        .collect()
}

impl Mps {
    pub fn new(tensors: Vec<Tensor3>) -> Result<Self, AnsatzError> {
        if tensors.is_empty() {
            return Err(AnsatzError::Shape { what: "mps sites", expected: 1, got: 0 });
        }
        let mut left = 1;
        for t in &tensors {
            if t.left() != left {
                return Err(AnsatzError::Shape { what: "mps bond", expected: left, got: t.left() });
            }
            if t.phys() != 2 {
                return Err(AnsatzError::Shape { what: "mps physical dim", expected: 2, got: t.phys() });
            }
            left = t.right();
        }
        if left != 1 {
            return Err(AnsatzError::Shape { what: "mps right boundary", expected: 1, got: left });
        }
        Ok(Self { tensors, canonical: Canonical::None })
    }

    /// Bond-dimension-one product state with amplitude 1 on `bits`.
    pub fn product_state(bits: &[u8]) -> Self {
        let tensors = bits
            .iter()
            .map(|&b| {
                let mut t = Tensor3::zeros(1, 2, 1);
                t.set(0, b as usize, 0, C64::new(1.0, 0.0));
                t
            })
            .collect();
        Self { tensors, canonical: Canonical::None }
    }

    /// `(|0…0⟩ + |1…1⟩)/√2` with bond dimension 2. Requires `n ≥ 2`.
    pub fn ghz(n: usize) -> Self {
        assert!(n >= 2, "ghz needs at least two sites");
        let one = C64::new(1.0, 0.0);
        let mut tensors = Vec::with_capacity(n);
        let mut first = Tensor3::zeros(1, 2, 2);
        first.set(0, 0, 0, one * std::f64::consts::FRAC_1_SQRT_2);
        first.set(0, 1, 1, one * std::f64::consts::FRAC_1_SQRT_2);
        tensors.push(first);
        for _ in 1..n - 1 {
            let mut t = Tensor3::zeros(2, 2, 2);
            t.set(0, 0, 0, one);
            t.set(1, 1, 1, one);
            tensors.push(t);
        }
        let mut last = Tensor3::zeros(2, 2, 1);
        last.set(0, 0, 0, one);
        last.set(1, 1, 0, one);
        tensors.push(last);
        Self { tensors, canonical: Canonical::None }
    }

    /// Entries uniform in the unit square, bond dims capped by [`capped_bond_dims`].
    pub fn random(n: usize, chi: usize, rng: &mut impl Rng) -> Self {
        let dims = capped_bond_dims(n, chi);
        let tensors = (0..n)
            .map(|i| {
                let data = (0..dims[i] * 2 * dims[i + 1])
                    .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect();
                Tensor3::from_vec(dims[i], 2, dims[i + 1], data).expect("consistent dims")
            })
            .collect();
        Self { tensors, canonical: Canonical::None }
    }

    pub fn n_sites(&self) -> usize {
        self.tensors.len()
    }

    pub fn tensors(&self) -> &[Tensor3] {
        &self.tensors
    }

    pub fn tensor(&self, i: usize) -> &Tensor3 {
        &self.tensors[i]
    }

    /// `χ_0, …, χ_n`
    pub fn bond_dims(&self) -> Vec<usize> {
        std::iter::once(1).chain(self.tensors.iter().map(|t| t.right())).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.tensors.iter().map(|t| t.right()).max().unwrap_or(1)
    }

    pub fn canonical(&self) -> Canonical {
        self.canonical
    }

    pub fn scaled(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.tensors[0].scale(s);
        out.canonical = Canonical::None;
        out
    }

    /// Largest deviation of `Σ_{s,b} T[a,s,b] conj(T[a',s,b])` from `δ_{aa'}` over all sites.
    pub fn right_canonical_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for t in &self.tensors {
            let m = t.to_right_matrix();
            let cols = m.cols();
            for a in 0..m.rows() {
                for a2 in 0..m.rows() {
                    let mut s = zero();
                    for k in 0..cols {
                        s += m[(a, k)] * m[(a2, k)].conj();
                    }
                    let target = if a == a2 { 1.0 } else { 0.0 };
                    worst = worst.max((s - target).norm());
                }
            }
        }
        worst
    }

    /// Marks the state right-canonical after checking the isometry condition.
    pub fn assume_right_canonical(mut self) -> Result<Self, AnsatzError> {
        if self.right_canonical_error() > CANONICAL_TOL {
            return Err(AnsatzError::NotCanonical);
        }
        self.canonical = Canonical::Right;
        Ok(self)
    }

    pub fn evaluate(&self, x: &SpinConfig) -> Result<C64, AnsatzError> {
        Ok(self.log_evaluate(x)?.to_complex())
    }

    /// Left-to-right contraction with per-site rescaling.
    pub fn log_evaluate(&self, x: &SpinConfig) -> Result<LogAmplitude, AnsatzError> {
        check_len(self.n_sites(), x)?;
        let mut v = vec![C64::new(1.0, 0.0)];
        let mut log_mag = 0.0;
        for (t, &s) in self.tensors.iter().zip(x.bits()) {
            v = left_step(&v, t, s as usize);
            let nrm = norm_sqr(&v);
            if nrm == 0.0 {
                return Ok(LogAmplitude::ZERO);
            }
            log_mag += 0.5 * nrm.ln();
            let inv = 1.0 / nrm.sqrt();
            v.iter_mut().for_each(|z| *z *= inv);
        }
        Ok(LogAmplitude { log_mag, phase: v[0].arg() })
    }

    /// `Σ_x |ψ(x)|²` by transfer matrices.
    pub fn norm_sqr(&self) -> f64 {
        let mut e = ComplexMatrix::identity(1);
        for t in &self.tensors {
            let (l, _, r) = t.dims();
            let mut next = ComplexMatrix::zeros(r, r);
            for s in 0..2 {
                for a in 0..l {
                    for a2 in 0..l {
                        let w = e[(a, a2)];
                        if w == zero() {
                            continue;
                        }
                        for b in 0..r {
                            let tb = t.get(a, s, b).conj() * w;
                            for b2 in 0..r {
                                next[(b, b2)] += tb * t.get(a2, s, b2);
                            }
                        }
                    }
                }
            }
            e = next;
        }
        e[(0, 0)].re
    }

    /// Sweeps LQ decompositions from the right end and normalizes the state.
    pub fn right_canonicalize(&self) -> Result<Mps, AnsatzError> {
        let mut tensors = self.tensors.clone();
        for j in (1..tensors.len()).rev() {
            // A = R† Q† from the QR of A†.
            let a = tensors[j].to_right_matrix();
            let (q, r) = qr(&a.adjoint())?;
            let new_right = q.adjoint();
            let carry = r.adjoint();
            tensors[j] = Tensor3::from_right_matrix(new_right, 2)?;
            let prev = tensors[j - 1].to_left_matrix();
            let merged = crate::numerics::matmul(&prev, &carry)?;
            tensors[j - 1] = Tensor3::from_left_matrix(merged, 2)?;
        }
        let nrm = tensors[0].norm_sqr().sqrt();
        if !(nrm > 0.0) || !nrm.is_finite() {
            return Err(AnsatzError::ZeroNorm);
        }
        tensors[0].scale(C64::new(1.0 / nrm, 0.0));
        Ok(Mps { tensors, canonical: Canonical::Right })
    }

    fn require_canonical(&self) -> Result<(), AnsatzError> {
        if self.canonical == Canonical::Right {
            Ok(())
        } else {
            Err(AnsatzError::NotCanonical)
        }
    }

    /// `q(x_{≤j}) = Σ_{x_{>j}} |ψ(x)|²` for `prefix = x_{≤j}`.
    pub fn marginal(&self, prefix: &[u8]) -> Result<f64, AnsatzError> {
        self.require_canonical()?;
        if prefix.len() > self.n_sites() {
            return Err(AnsatzError::LengthMismatch { expected: self.n_sites(), got: prefix.len() });
        }
        let mut v = vec![C64::new(1.0, 0.0)];
        for (t, &s) in self.tensors.iter().zip(prefix) {
            v = left_step(&v, t, s as usize);
        }
        Ok(norm_sqr(&v))
    }

    /// Ancestral sampling carrying a normalized left vector.
    pub fn sample(&self, rng: &mut dyn RngCore) -> Result<SpinConfig, AnsatzError> {
        self.require_canonical()?;
        let mut v = vec![C64::new(1.0, 0.0)];
        let mut bits = Vec::with_capacity(self.n_sites());
        for t in &self.tensors {
            let u0 = left_step(&v, t, 0);
            let u1 = left_step(&v, t, 1);
            let (n0, n1) = (norm_sqr(&u0), norm_sqr(&u1));
            let pick_one = rng.gen::<f64>() * (n0 + n1) >= n0;
            let (u, nrm) = if pick_one { (u1, n1) } else { (u0, n0) };
            bits.push(pick_one as u8);
            let inv = 1.0 / nrm.sqrt();
            v = u.into_iter().map(|z| z * inv).collect();
        }
        Ok(SpinConfig::new(bits).expect("bits"))
    }
}

impl Wavefunction for Mps {
    fn n_sites(&self) -> usize {
        self.tensors.len()
    }

    fn log_amplitude(&self, x: &SpinConfig) -> Result<LogAmplitude, AnsatzError> {
        self.log_evaluate(x)
    }
}

impl ExactSampler for Mps {
    fn sample(&self, rng: &mut dyn RngCore) -> Result<SpinConfig, AnsatzError> {
        Mps::sample(self, rng)
    }
}

/// Offsets of MPS tensors inside the flat "mps.re"/"mps.im" parameter blocks.
/// Each site is stored as `[s][a][b]`, so `M_i(s)` is a contiguous row-major
/// `χ_{i-1} × χ_i` matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MpsLayout {
    dims: Vec<usize>,
    offsets: Vec<usize>,
}

impl MpsLayout {
    pub fn new(dims: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(dims.len());
        let mut k = 0;
        for i in 0..dims.len() - 1 {
            offsets.push(k);
            k += 2 * dims[i] * dims[i + 1];
        }
        offsets.push(k);
        Self { dims, offsets }
    }

    pub fn n_sites(&self) -> usize {
        self.dims.len() - 1
    }

    /// `χ_0, …, χ_n`
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total_len(&self) -> usize {
        self.offsets[self.n_sites()]
    }

    /// `(offset, rows, cols)` of `M_i(s)`.
    pub fn block(&self, i: usize, s: usize) -> (usize, usize, usize) {
        let (l, r) = (self.dims[i], self.dims[i + 1]);
        (self.offsets[i] + s * l * r, l, r)
    }

    /// Splits an MPS into real and imaginary flat arrays.
    pub fn flatten(mps: &Mps) -> (Self, Vec<f64>, Vec<f64>) {
        let layout = Self::new(mps.bond_dims());
        let mut re = vec![0.0; layout.total_len()];
        let mut im = vec![0.0; layout.total_len()];
        for (i, t) in mps.tensors().iter().enumerate() {
            for s in 0..2 {
                let (off, l, r) = layout.block(i, s);
                for a in 0..l {
                    for b in 0..r {
                        let z = t.get(a, s, b);
                        re[off + a * r + b] = z.re;
                        im[off + a * r + b] = z.im;
                    }
                }
            }
        }
        (layout, re, im)
    }

    pub fn unflatten(&self, re: &[f64], im: &[f64]) -> Result<Mps, AnsatzError> {
        let tensors = (0..self.n_sites())
            .map(|i| {
                let (l, r) = (self.dims[i], self.dims[i + 1]);
                let mut t = Tensor3::zeros(l, 2, r);
                for s in 0..2 {
                    let (off, _, _) = self.block(i, s);
                    for a in 0..l {
                        for b in 0..r {
                            t.set(a, s, b, C64::new(re[off + a * r + b], im[off + a * r + b]));
                        }
                    }
                }
                t
            })
            .collect();
        Mps::new(tensors)
    }
}

/// A pair of real nodes holding the real and imaginary parts of a complex vector.
pub(crate) type ComplexNode<V> = (V, V);

/// `u · A` for complex `u` (length rows) and complex row-major `A`.
pub(crate) fn complex_vec_mat<G: Graph>(g: &mut G, u: &ComplexNode<G::V>, a: &ComplexNode<G::V>, cols: usize) -> ComplexNode<G::V> {
    let rr = g.vec_mat(&u.0, &a.0, cols);
    let ii = g.vec_mat(&u.1, &a.1, cols);
    let ri = g.vec_mat(&u.0, &a.1, cols);
    let ir = g.vec_mat(&u.1, &a.0, cols);
    (g.sub(&rr, &ii), g.add(&ri, &ir))
}

/// `log ψ` as graph nodes, or a structurally zero amplitude.
#[derive(Clone, Debug)]
pub enum GraphAmplitude<V> {
    Zero,
    Value { log_mag: V, phase: V },
}

impl<V> GraphAmplitude<V> {
    pub fn to_log_amplitude<G: Graph<V = V>>(&self, g: &G) -> LogAmplitude {
        match self {
            GraphAmplitude::Zero => LogAmplitude::ZERO,
            GraphAmplitude::Value { log_mag, phase } => LogAmplitude { log_mag: g.scalar(log_mag), phase: g.scalar(phase) },
        }
    }
}

/// An MPS whose tensor entries are trainable real parameters. Its amplitude is
/// the plain contraction, with no normalization.
#[derive(Clone, Debug)]
pub struct TrainableMps {
    store: ParamStore,
    layout: MpsLayout,
    re: ParamId,
    im: ParamId,
}

impl TrainableMps {
    pub fn from_mps(mps: &Mps) -> Self {
        let (layout, re, im) = MpsLayout::flatten(mps);
        let mut store = ParamStore::new();
        let re = store.add_block("mps.re", re).expect("fresh store");
        let im = store.add_block("mps.im", im).expect("fresh store");
        Self { store, layout, re, im }
    }

    pub fn layout(&self) -> &MpsLayout {
        &self.layout
    }

    pub fn to_mps(&self) -> Result<Mps, AnsatzError> {
        self.layout.unflatten(self.store.values(self.re), self.store.values(self.im))
    }

    pub fn forward<G: Graph>(&self, g: &mut G, x: &SpinConfig) -> Result<GraphAmplitude<G::V>, AnsatzError> {
        check_len(self.layout.n_sites(), x)?;
        let mut u: Option<ComplexNode<G::V>> = None;
        let mut log_mag: Option<G::V> = None;
        for (i, &s) in x.bits().iter().enumerate() {
            let (off, l, r) = self.layout.block(i, s as usize);
            let a = (g.param(self.re, off, l * r), g.param(self.im, off, l * r));
            let next = match &u {
                None => a,
                Some(u) => complex_vec_mat(g, u, &a, r),
            };
            let n2r = g.sum_sq(&next.0);
            let n2i = g.sum_sq(&next.1);
            let nrm = g.add(&n2r, &n2i);
            if g.scalar(&nrm) == 0.0 {
                return Ok(GraphAmplitude::Zero);
            }
            let ln = g.log(&nrm);
            let half = g.scale(&ln, 0.5);
            log_mag = Some(match log_mag {
                None => half,
                Some(acc) => g.add(&acc, &half),
            });
            let inv = g.powf(&nrm, -0.5);
            u = Some((g.scale_by(&next.0, &inv), g.scale_by(&next.1, &inv)));
        }
        let u = u.expect("at least one site");
        let phase = g.atan2(&u.1, &u.0);
        if let Some(e) = g.fault() {
            return Err(e.clone().into());
        }
        Ok(GraphAmplitude::Value { log_mag: log_mag.expect("at least one site"), phase })
    }
}

impl Wavefunction for TrainableMps {
    fn n_sites(&self) -> usize {
        self.layout.n_sites()
    }

    fn log_amplitude(&self, x: &SpinConfig) -> Result<LogAmplitude, AnsatzError> {
        let mut e = Eval::new(&self.store);
        let amp = self.forward(&mut e, x)?;
        Ok(amp.to_log_amplitude(&e))
    }
}

impl ExactSampler for TrainableMps {
    /// Right-canonicalizes a copy of the current tensors, then samples it.
    fn sample(&self, rng: &mut dyn RngCore) -> Result<SpinConfig, AnsatzError> {
        self.to_mps()?.right_canonicalize()?.sample(rng)
    }

    fn sample_batch(&self, count: usize, rng: &mut dyn RngCore) -> Result<Vec<SpinConfig>, AnsatzError> {
        let m = self.to_mps()?.right_canonicalize()?;
        (0..count).map(|_| m.sample(rng)).collect()
    }
}

impl Ansatz for TrainableMps {
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

    /// Brute-force `ψ(x)` by multiplying the selected matrices directly.
    fn brute(mps: &Mps, x: &SpinConfig) -> C64 {
        let mut m = ComplexMatrix::identity(1);
        for (t, &s) in mps.tensors().iter().zip(x.bits()) {
            m = crate::numerics::matmul(&m, &t.slice(s as usize)).unwrap();
        }
        m[(0, 0)]
    }

    fn all(n: usize) -> impl Iterator<Item = SpinConfig> {
        (0..1u64 << n).map(move |i| SpinConfig::from_index(i, n))
    }

    #[test]
    fn product_state_amplitudes() {
        let mps = Mps::product_state(&[0, 0, 0]);
        for x in all(3) {
            let expect = if x.n_down() == 0 { 1.0 } else { 0.0 };
            assert_eq!(mps.evaluate(&x).unwrap(), C64::new(expect, 0.0));
        }
    }

    #[test]
    fn ghz_amplitudes() {
        let n = 5;
        let mps = Mps::ghz(n);
        for x in all(n) {
            let z = mps.evaluate(&x).unwrap();
            let expect = if x.n_down() == 0 || x.n_down() == n { std::f64::consts::FRAC_1_SQRT_2 } else { 0.0 };
            assert!((z - C64::new(expect, 0.0)).norm() < 1e-15);
            assert!((z - brute(&mps, &x)).norm() < 1e-15);
        }
    }

    #[test]
    fn random_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mps = Mps::random(6, 3, &mut rng);
        assert_eq!(mps.bond_dims(), vec![1, 2, 3, 3, 3, 2, 1]);
        for x in all(6) {
            let (a, b) = (mps.evaluate(&x).unwrap(), brute(&mps, &x));
            assert!((a - b).norm() <= 1e-12 * b.norm().max(1e-300));
        }
    }

    #[test]
    fn canonicalization_normalizes_and_preserves_ratios() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mps = Mps::random(6, 4, &mut rng);
        let can = mps.right_canonicalize().unwrap();
        assert!(can.right_canonical_error() < 1e-12);
        let total: f64 = all(6).map(|x| can.evaluate(&x).unwrap().norm_sqr()).sum();
        assert!((total - 1.0).abs() < 1e-10);
        assert!((can.norm_sqr() - 1.0).abs() < 1e-10);
        let scale = mps.norm_sqr().sqrt();
        for x in all(6) {
            let (a, b) = (can.evaluate(&x).unwrap() * scale, mps.evaluate(&x).unwrap());
            assert!((a - b).norm() < 1e-10 * b.norm().max(1e-12), "{x}");
        }
    }

    #[test]
    fn canonicalization_is_idempotent_and_scale_free() {
        let ghz = Mps::ghz(4).right_canonicalize().unwrap();
        let again = ghz.right_canonicalize().unwrap();
        let scaled = Mps::ghz(4).scaled(C64::new(7.0, 0.0)).right_canonicalize().unwrap();
        for x in all(4) {
            let z = ghz.evaluate(&x).unwrap();
            assert!((again.evaluate(&x).unwrap() - z).norm() < 1e-12);
            assert!((scaled.evaluate(&x).unwrap() - Mps::ghz(4).evaluate(&x).unwrap()).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_state_cannot_be_canonicalized() {
        let mut mps = Mps::ghz(3);
        mps.tensors[0].scale(zero());
        assert_eq!(mps.right_canonicalize(), Err(AnsatzError::ZeroNorm));
    }

    #[test]
    fn marginals_match_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mps = Mps::random(6, 3, &mut rng).right_canonicalize().unwrap();
        let probs: Vec<f64> = all(6).map(|x| mps.evaluate(&x).unwrap().norm_sqr()).collect();
        for j in 0..=6 {
            for p in 0..1u64 << j {
                let prefix = SpinConfig::from_index(p, j);
                let expect: f64 = (0..1u64 << (6 - j)).map(|rest| probs[((p << (6 - j)) | rest) as usize]).sum();
                assert!((mps.marginal(prefix.bits()).unwrap() - expect).abs() < 1e-12);
            }
        }
        let ghz = Mps::ghz(4).right_canonicalize().unwrap();
        assert!((ghz.marginal(&[0]).unwrap() - 0.5).abs() < 1e-14);
        assert_eq!(Mps::ghz(4).marginal(&[0]), Err(AnsatzError::NotCanonical));
    }

    #[test]
    fn sampling_requires_canonical_and_product_state_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert_eq!(Mps::ghz(3).sample(&mut rng), Err(AnsatzError::NotCanonical));
        let p = Mps::product_state(&[0, 0, 0, 0]).right_canonicalize().unwrap();
        for _ in 0..20 {
            assert_eq!(p.sample(&mut rng).unwrap(), SpinConfig::all_up(4));
        }
    }

    #[test]
    fn layout_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mps = Mps::random(5, 3, &mut rng);
        let (layout, re, im) = MpsLayout::flatten(&mps);
        assert_eq!(layout.unflatten(&re, &im).unwrap(), mps);
        let tm = TrainableMps::from_mps(&mps);
        for x in all(5) {
            let (a, b) = (tm.log_amplitude(&x).unwrap().to_complex(), mps.evaluate(&x).unwrap());
            assert!((a - b).norm() < 1e-12 * b.norm());
        }
    }
}
