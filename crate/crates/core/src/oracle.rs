//! Exact references: dense and Lanczos diagonalization of the J1-J2 model and
//! full enumeration of ansatz distributions.
//!
//! The dense path builds H from Kronecker products of Pauli matrices and never
//! touches [`HamiltonianTerms::for_each_connected`], so it is an independent
//! check on the matrix elements used everywhere else.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::lattice::{HamiltonianTerms, SpinConfig};
use crate::numerics::{lanczos_lowest, LanczosOptions, NumericsError, C64};
use crate::wavefunction::{AnsatzError, Wavefunction};

pub const MAX_DENSE_SITES: usize = 12;
pub const MAX_SPARSE_SITES: usize = 20;
/// Upper bound on the number of f64 entries held by the Krylov basis.
const KRYLOV_MEMORY: usize = 1 << 25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("{n} sites exceeds the limit of {limit} for {path} diagonalization")]
    TooLarge { n: usize, limit: usize, path: &'static str },
    #[error("{n} sites exceeds the enumeration limit of {limit}")]
    TooLargeToEnumerate { n: usize, limit: usize },
    #[error("Kronecker Hamiltonian has an imaginary entry {0:e}")]
    NotReal(f64),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Ansatz(#[from] AnsatzError),
}

#[derive(Clone, Debug)]
pub struct EdResult {
    pub energy: f64,
    pub vector: Option<Vec<f64>>,
    /// `‖Hv − Ev‖`
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Pauli {
    I,
    X,
    Y,
    Z,
}

/// A generalized permutation matrix: column `c` has its single nonzero
/// `phase[c]` in row `row[c]`. Pauli strings are closed under Kronecker
/// products in this form, which keeps 4096-dimensional products cheap.
#[derive(Clone, Debug)]
struct Monomial {
    row: Vec<usize>,
    phase: Vec<C64>,
}

impl Monomial {
    fn pauli(p: Pauli) -> Self {
        let (one, i) = (C64::new(1.0, 0.0), C64::new(0.0, 1.0));
        match p {
            Pauli::I => Self { row: vec![0, 1], phase: vec![one, one] },
            Pauli::X => Self { row: vec![1, 0], phase: vec![one, one] },
            Pauli::Y => Self { row: vec![1, 0], phase: vec![i, -i] },
            Pauli::Z => Self { row: vec![0, 1], phase: vec![one, -one] },
        }
    }

    fn dim(&self) -> usize {
        self.row.len()
    }

    /// `self ⊗ other`
    fn kron(&self, other: &Self) -> Self {
        let db = other.dim();
        let mut row = Vec::with_capacity(self.dim() * db);
        let mut phase = Vec::with_capacity(self.dim() * db);
        for ca in 0..self.dim() {
            for cb in 0..db {
                row.push(self.row[ca] * db + other.row[cb]);
                phase.push(self.phase[ca] * other.phase[cb]);
            }
        }
        Self { row, phase }
    }
}

/// `P_i P_j` on `n` sites with site 0 as the leftmost Kronecker factor.
fn pauli_pair(n: usize, i: usize, j: usize, p: Pauli) -> Monomial {
    let mut m = Monomial { row: vec![0], phase: vec![C64::new(1.0, 0.0)] };
    for s in 0..n {
        let f = if s == i || s == j { p } else { Pauli::I };
        m = m.kron(&Monomial::pauli(f));
    }
    m
}

/// Dense H built from `J (X⊗X + Y⊗Y + Z⊗Z)` Kronecker products, with the
/// Marshall sign applied as the similarity transform `S H S`.
pub fn kron_hamiltonian(terms: &HamiltonianTerms) -> Result<DMatrix<f64>, OracleError> {
    let n = terms.n_sites();
    if n > MAX_DENSE_SITES {
        return Err(OracleError::TooLarge { n, limit: MAX_DENSE_SITES, path: "dense" });
    }
    let dim = 1usize << n;
    let mut h = vec![C64::new(0.0, 0.0); dim * dim];
    let pairs = terms.nn_bonds.iter().map(|&b| (b, terms.j1)).chain(terms.nnn_bonds.iter().map(|&b| (b, terms.j2)));
    for ((i, j), coupling) in pairs {
        for p in [Pauli::X, Pauli::Y, Pauli::Z] {
            let m = pauli_pair(n, i, j, p);
            for c in 0..dim {
                h[m.row[c] * dim + c] += m.phase[c] * coupling;
            }
        }
    }
    let sign: Vec<f64> = (0..dim)
        .map(|x| {
            if terms.marshall_sign {
                crate::lattice::marshall_sign(&terms.lattice, &SpinConfig::from_index(x as u64, n)) as f64
            } else {
                1.0
            }
        })
        .collect();
    let worst_im = h.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if worst_im > 0.0 {
        return Err(OracleError::NotReal(worst_im));
    }
    Ok(DMatrix::from_fn(dim, dim, |r, c| sign[r] * h[r * dim + c].re * sign[c]))
}

/// Lowest eigenpair from a full symmetric eigendecomposition.
pub fn exact_ground_state_dense(terms: &HamiltonianTerms) -> Result<EdResult, OracleError> {
    let h = kron_hamiltonian(terms)?;
    let eig = h.clone().symmetric_eigen();
    let (idx, &energy) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty spectrum");
    let v = eig.eigenvectors.column(idx).into_owned();
    let residual = (&h * &v - &v * energy).norm();
    Ok(EdResult { energy, vector: Some(v.iter().copied().collect()), residual })
}

/// `y = H x` over the full basis using connected configurations.
pub fn sparse_matvec(terms: &HamiltonianTerms, x: &[f64], y: &mut [f64]) {
    y.par_chunks_mut(4096).enumerate().for_each(|(chunk, out)| {
        let base = chunk * 4096;
        for (k, yk) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            terms.for_each_connected((base + k) as u64, |c, el| acc += el * x[c as usize]);
            *yk = acc;
        }
    });
}

/// Lowest eigenpair by restarted Lanczos with a seeded random start vector.
pub fn exact_ground_state_sparse(terms: &HamiltonianTerms, seed: u64) -> Result<EdResult, OracleError> {
    let n = terms.n_sites();
    if n > MAX_SPARSE_SITES {
        return Err(OracleError::TooLarge { n, limit: MAX_SPARSE_SITES, path: "sparse" });
    }
    let dim = 1usize << n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let opts = LanczosOptions { max_krylov: 300.min((KRYLOV_MEMORY / dim).max(8)), tol: 1e-9, max_restarts: 50 };
    let res = lanczos_lowest(dim, |x: &[f64], y: &mut [f64]| sparse_matvec(terms, x, y), &start, opts)?;
    Ok(EdResult { energy: res.value, vector: Some(res.vector), residual: res.residual })
}

/// Dense diagonalization up to 10 sites, Lanczos above.
pub fn exact_ground_state(terms: &HamiltonianTerms) -> Result<EdResult, OracleError> {
    if terms.n_sites() <= 10 {
        exact_ground_state_dense(terms)
    } else {
        exact_ground_state_sparse(terms, 0)
    }
}

pub const MAX_ENUMERATION_SITES: usize = 20;

/// `|ψ(x)|²` for every basis label, indexed by [`SpinConfig::to_index`].
#[derive(Clone, Debug)]
pub struct DistributionTable {
    pub n: usize,
    pub probs: Vec<f64>,
    pub sum: f64,
}

impl DistributionTable {
    /// `|Σ − claimed|`
    pub fn deviation_from(&self, claimed: f64) -> f64 {
        (self.sum - claimed).abs()
    }

    /// Largest probability assigned to a configuration outside `allowed`.
    pub fn max_outside(&self, allowed: impl Fn(&SpinConfig) -> bool) -> f64 {
        (0..self.probs.len())
            .filter(|&x| !allowed(&SpinConfig::from_index(x as u64, self.n)))
            .map(|x| self.probs[x])
            .fold(0.0, f64::max)
    }

    /// Total-variation distance between the normalized table and an empirical
    /// histogram of `samples`.
    pub fn tv_distance<'a>(&self, samples: impl IntoIterator<Item = &'a SpinConfig>) -> f64 {
        let mut counts = vec![0u64; self.probs.len()];
        let mut total = 0u64;
        for s in samples {
            counts[s.to_index() as usize] += 1;
            total += 1;
        }
        0.5 * self
            .probs
            .iter()
            .zip(&counts)
            .map(|(p, &c)| (p / self.sum - c as f64 / total as f64).abs())
            .sum::<f64>()
    }
}

pub fn enumerate_distribution<W: Wavefunction + ?Sized>(psi: &W, n: usize) -> Result<DistributionTable, OracleError> {
    if n > MAX_ENUMERATION_SITES {
        return Err(OracleError::TooLargeToEnumerate { n, limit: MAX_ENUMERATION_SITES });
    }
    let probs = (0..1u64 << n)
        .into_par_iter()
        .map(|x| psi.log_amplitude(&SpinConfig::from_index(x, n)).map(|a| a.prob()))
        .collect::<Result<Vec<f64>, _>>()?;
    let sum = probs.iter().sum();
    Ok(DistributionTable { n, probs, sum })
}

/// `⟨ψ|H|ψ⟩ / ⟨ψ|ψ⟩` by enumeration.
pub fn enumerated_energy<W: Wavefunction + ?Sized>(psi: &W, terms: &HamiltonianTerms) -> Result<f64, OracleError> {
    let n = terms.n_sites();
    if n > MAX_ENUMERATION_SITES {
        return Err(OracleError::TooLargeToEnumerate { n, limit: MAX_ENUMERATION_SITES });
    }
    let amps = (0..1u64 << n)
        .into_par_iter()
        .map(|x| psi.log_amplitude(&SpinConfig::from_index(x, n)).map(|a| a.to_complex()))
        .collect::<Result<Vec<C64>, _>>()?;
    let mut num = C64::new(0.0, 0.0);
    let mut den = 0.0;
    for (x, a) in amps.iter().enumerate() {
        den += a.norm_sqr();
        if a.norm_sqr() == 0.0 {
            continue;
        }
        let mut h_a = C64::new(0.0, 0.0);
        terms.for_each_connected(x as u64, |y, el| h_a += amps[y as usize] * el);
        num += a.conj() * h_a;
    }
    Ok(num.re / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_lattice, heisenberg_terms};

    #[test]
    fn two_site_singlet() {
        let t = heisenberg_terms(&build_lattice(1, 2).unwrap(), 1.0, 0.0);
        let d = exact_ground_state_dense(&t).unwrap();
        assert_eq!(d.energy, -3.0);
        let s = exact_ground_state_sparse(&t, 1).unwrap();
        assert!((s.energy + 3.0).abs() < 1e-12);
    }

    #[test]
    fn chain_dense_and_sparse_agree() {
        let t = heisenberg_terms(&build_lattice(1, 4).unwrap(), 1.0, 0.0);
        let d = exact_ground_state_dense(&t).unwrap();
        let s = exact_ground_state_sparse(&t, 2).unwrap();
        assert!((d.energy - s.energy).abs() < 1e-9);
        // Open four-site Heisenberg chain in the Pauli convention.
        let exact = -3.0 - 2.0 * 3f64.sqrt();
        assert!((d.energy - exact).abs() < 1e-12, "{}", d.energy);
    }

    #[test]
    fn refuses_oversized_systems() {
        let t = heisenberg_terms(&build_lattice(3, 7).unwrap(), 1.0, 0.0);
        assert!(matches!(exact_ground_state_sparse(&t, 0), Err(OracleError::TooLarge { n: 21, .. })));
        let t = heisenberg_terms(&build_lattice(1, 13).unwrap(), 1.0, 0.0);
        assert!(matches!(kron_hamiltonian(&t), Err(OracleError::TooLarge { .. })));
    }

    #[test]
    fn monomial_kron_matches_dense_kron() {
        use crate::numerics::ComplexMatrix;
        let dense = |m: &Monomial| {
            let d = m.dim();
            let mut out = ComplexMatrix::zeros(d, d);
            for c in 0..d {
                out[(m.row[c], c)] = m.phase[c];
            }
            out
        };
        let (y, z) = (Monomial::pauli(Pauli::Y), Monomial::pauli(Pauli::Z));
        let x = Monomial::pauli(Pauli::X);
        let yzx = y.kron(&z).kron(&x);
        let reference = dense(&y).kron(&dense(&z)).kron(&dense(&x));
        assert_eq!(dense(&yzx), reference);
    }
}
