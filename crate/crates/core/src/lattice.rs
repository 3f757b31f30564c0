//! Open-boundary square lattice, J1-J2 Heisenberg bond terms in the Pauli
//! convention, connected configurations and the Marshall sign.
//!
//! Sites are 0-based in row-major order: site `(r, c)` has index `r * ly + c`.
//! Bit value 0 is spin up (Z = +1), 1 is spin down.
//!
//! Integer basis labels put site 0 in the most significant bit:
//! `index = Σ_i x_i · 2^(n-1-i)`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("lattice dimensions must be positive, got {lx}x{ly}")]
    ZeroDimension { lx: usize, ly: usize },
    #[error("configuration has {got} sites, lattice has {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("site value {0} is not a bit")]
    NotABit(u8),
    #[error("{n} sites do not fit in a 64-bit basis label")]
    TooLarge { n: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Lattice {
    lx: usize,
    ly: usize,
}

impl Lattice {
    pub fn new(lx: usize, ly: usize) -> Result<Self, LatticeError> {
        if lx == 0 || ly == 0 {
            return Err(LatticeError::ZeroDimension { lx, ly });
        }
        Ok(Self { lx, ly })
    }

    /// Number of rows.
    pub fn lx(&self) -> usize {
        self.lx
    }

    /// Number of columns, also the chain distance between vertical neighbours.
    pub fn ly(&self) -> usize {
        self.ly
    }

    pub fn n_sites(&self) -> usize {
        self.lx * self.ly
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.ly + col
    }

    pub fn coord(&self, site: usize) -> (usize, usize) {
        (site / self.ly, site % self.ly)
    }

    /// Checkerboard sublattice A: even `row + col`.
    pub fn on_sublattice_a(&self, site: usize) -> bool {
        let (r, c) = self.coord(site);
        (r + c) % 2 == 0
    }
}

pub fn build_lattice(lx: usize, ly: usize) -> Result<Lattice, LatticeError> {
    Lattice::new(lx, ly)
}

/// A basis configuration of `n` spins.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpinConfig {
    bits: Vec<u8>,
}

impl SpinConfig {
    pub fn new(bits: Vec<u8>) -> Result<Self, LatticeError> {
        if let Some(&b) = bits.iter().find(|&&b| b > 1) {
            return Err(LatticeError::NotABit(b));
        }
        Ok(Self { bits })
    }

    pub fn all_up(n: usize) -> Self {
        Self { bits: vec![0; n] }
    }

    /// Decodes an integer basis label (site 0 is the most significant bit).
    pub fn from_index(index: u64, n: usize) -> Self {
        Self { bits: (0..n).map(|i| ((index >> (n - 1 - i)) & 1) as u8).collect() }
    }

    pub fn to_index(&self) -> u64 {
        bits_to_index(&self.bits)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn into_bits(self) -> Vec<u8> {
        self.bits
    }

    pub fn n_down(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    /// `n_up - n_down`.
    pub fn magnetization(&self) -> i64 {
        self.len() as i64 - 2 * self.n_down() as i64
    }

    /// Global spin flip `1 - x`.
    pub fn flipped(&self) -> Self {
        Self { bits: self.bits.iter().map(|b| 1 - b).collect() }
    }
}

impl fmt::Debug for SpinConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SpinConfig({self})")
    }
}

impl fmt::Display for SpinConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.bits {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

pub(crate) fn bits_to_index(bits: &[u8]) -> u64 {
    bits.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64)
}

/// Bond lists and couplings of the J1-J2 model on an ordered lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianTerms {
    pub lattice: Lattice,
    /// Nearest-neighbour pairs `(i, j)` with `i < j`.
    pub nn_bonds: Vec<(usize, usize)>,
    /// Diagonal next-nearest pairs `(i, j)` with `i < j`.
    pub nnn_bonds: Vec<(usize, usize)>,
    pub j1: f64,
    pub j2: f64,
    pub marshall_sign: bool,
}

pub fn heisenberg_terms(lattice: &Lattice, j1: f64, j2: f64) -> HamiltonianTerms {
    let (lx, ly) = (lattice.lx(), lattice.ly());
    let mut nn = Vec::new();
    let mut nnn = Vec::new();
    for r in 0..lx {
        for c in 0..ly {
            let i = lattice.index(r, c);
            if c + 1 < ly {
                nn.push((i, lattice.index(r, c + 1)));
            }
            if r + 1 < lx {
                nn.push((i, lattice.index(r + 1, c)));
                if c + 1 < ly {
                    nnn.push((i, lattice.index(r + 1, c + 1)));
                }
                if c > 0 {
                    nnn.push((i, lattice.index(r + 1, c - 1)));
                }
            }
        }
    }
    HamiltonianTerms { lattice: *lattice, nn_bonds: nn, nnn_bonds: nnn, j1, j2, marshall_sign: false }
}

impl HamiltonianTerms {
    pub fn with_marshall_sign(mut self, on: bool) -> Self {
        self.marshall_sign = on;
        self
    }

    pub fn n_sites(&self) -> usize {
        self.lattice.n_sites()
    }

    /// Every bond with its coupling, nearest neighbours first. Bonds with a
    /// zero coupling are skipped.
    pub fn bonds(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let nn = self.nn_bonds.iter().map(move |&(i, j)| (i, j, self.j1));
        let nnn = self.nnn_bonds.iter().map(move |&(i, j)| (i, j, self.j2));
        nn.chain(nnn).filter(|b| b.2 != 0.0)
    }

    fn sublattice_mask(&self) -> u64 {
        let n = self.n_sites();
        (0..n).filter(|&s| self.lattice.on_sublattice_a(s)).fold(0u64, |m, s| m | 1 << (n - 1 - s))
    }

    /// Calls `f(y, element)` for the diagonal entry and then every pair-flipped
    /// configuration of the basis label `x`. Requires `n ≤ 64`.
    pub fn for_each_connected(&self, x: u64, mut f: impl FnMut(u64, f64)) {
        let n = self.n_sites();
        let mask_a = if self.marshall_sign { self.sublattice_mask() } else { 0 };
        let mut diag = 0.0;
        for (i, j, coupling) in self.bonds() {
            let (bi, bj) = (1u64 << (n - 1 - i), 1u64 << (n - 1 - j));
            if ((x & bi) != 0) == ((x & bj) != 0) {
                diag += coupling;
            } else {
                diag -= coupling;
            }
        }
        f(x, diag);
        for (i, j, coupling) in self.bonds() {
            let (bi, bj) = (1u64 << (n - 1 - i), 1u64 << (n - 1 - j));
            if ((x & bi) != 0) != ((x & bj) != 0) {
                let y = x ^ bi ^ bj;
                let mut el = 2.0 * coupling;
                if self.marshall_sign && ((x & mask_a).count_ones() + (y & mask_a).count_ones()) % 2 == 1 {
                    el = -el;
                }
                f(y, el);
            }
        }
    }
}

/// The diagonal entry first, then one entry per anti-aligned bond.
pub fn connected_configs(terms: &HamiltonianTerms, x: &SpinConfig) -> Result<Vec<(SpinConfig, f64)>, LatticeError> {
    let n = terms.n_sites();
    if x.len() != n {
        return Err(LatticeError::LengthMismatch { expected: n, got: x.len() });
    }
    let xb = x.bits();
    let mut out = Vec::with_capacity(1 + terms.nn_bonds.len() + terms.nnn_bonds.len());
    let diag: f64 = terms.bonds().map(|(i, j, c)| if xb[i] == xb[j] { c } else { -c }).sum();
    out.push((x.clone(), diag));
    let sign_x = if terms.marshall_sign { marshall_sign(&terms.lattice, x) } else { 1 };
    for (i, j, coupling) in terms.bonds() {
        if xb[i] != xb[j] {
            let mut y = x.clone();
            y.bits[i] ^= 1;
            y.bits[j] ^= 1;
            let mut el = 2.0 * coupling;
            if terms.marshall_sign {
                el *= (sign_x * marshall_sign(&terms.lattice, &y)) as f64;
            }
            out.push((y, el));
        }
    }
    Ok(out)
}

/// `(-1)^(number of down spins on sublattice A)`.
pub fn marshall_sign(lattice: &Lattice, x: &SpinConfig) -> i32 {
    let downs_on_a = x.bits().iter().enumerate().filter(|&(s, &b)| b == 1 && lattice.on_sublattice_a(s)).count();
    if downs_on_a % 2 == 0 {
        1
    } else {
        -1
    }
}
