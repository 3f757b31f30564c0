//! Restarted Lanczos with full reorthogonalization for the lowest eigenpair of a
//! Hermitian operator given as a matvec closure.

use nalgebra::DMatrix;

use super::{NumericsError, C64};

/// Scalars the Krylov solver can work with (real or complex).
pub trait KrylovScalar: Copy + Send + Sync + std::fmt::Debug + 'static {
    fn zero() -> Self;
    fn from_re(x: f64) -> Self;
    fn conj(self) -> Self;
    fn norm_sqr(self) -> f64;
    fn re(self) -> f64;
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
    fn mul(self, o: Self) -> Self;
    fn scale(self, s: f64) -> Self;
}

impl KrylovScalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_re(x: f64) -> Self {
        x
    }
    fn conj(self) -> Self {
        self
    }
    fn norm_sqr(self) -> f64 {
        self * self
    }
    fn re(self) -> f64 {
        self
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
}

impl KrylovScalar for C64 {
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn from_re(x: f64) -> Self {
        C64::new(x, 0.0)
    }
    fn conj(self) -> Self {
        C64::conj(&self)
    }
    fn norm_sqr(self) -> f64 {
        C64::norm_sqr(&self)
    }
    fn re(self) -> f64 {
        self.re
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
}

fn dot<T: KrylovScalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc.add(x.conj().mul(*y)))
}

fn norm<T: KrylovScalar>(a: &[T]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// `y -= c·x`
fn axpy_neg<T: KrylovScalar>(y: &mut [T], c: T, x: &[T]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = yi.sub(c.mul(*xi));
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LanczosOptions {
    /// Krylov vectors per restart cycle.
    pub max_krylov: usize,
    /// Required residual `‖Hx − λx‖`.
    pub tol: f64,
    pub max_restarts: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { max_krylov: 200, tol: 1e-10, max_restarts: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct LanczosResult<T> {
    pub value: f64,
    pub vector: Vec<T>,
    pub residual: f64,
    pub matvecs: usize,
}

/// Lowest eigenpair of a Hermitian operator of dimension `dim`.
///
/// `start` seeds the Krylov space and must not be the zero vector.
pub fn lanczos_lowest<T, F>(
    dim: usize,
    mut matvec: F,
    start: &[T],
    opts: LanczosOptions,
) -> Result<LanczosResult<T>, NumericsError>
where
    T: KrylovScalar,
    F: FnMut(&[T], &mut [T]),
{
    if dim == 0 || start.len() != dim {
        return Err(NumericsError::InvalidArgument {
            op: "lanczos",
            detail: format!("start vector length {} for dimension {dim}", start.len()),
        });
    }
    let mut x: Vec<T> = start.to_vec();
    let mut matvecs = 0;

    for _cycle in 0..=opts.max_restarts {
        let nrm = norm(&x);
        if !(nrm.is_finite() && nrm > 0.0) {
            return Err(NumericsError::InvalidArgument { op: "lanczos", detail: "degenerate start vector".into() });
        }
        x.iter_mut().for_each(|z| *z = z.scale(1.0 / nrm));

        let m_cap = opts.max_krylov.min(dim).max(1);
        let mut basis: Vec<Vec<T>> = vec![x.clone()];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut w = vec![T::zero(); dim];
        let mut ritz: (f64, Vec<f64>) = (0.0, vec![1.0]);

        for j in 0..m_cap {
            matvec(&basis[j], &mut w);
            matvecs += 1;
            let alpha = dot(&basis[j], &w).re();
            alphas.push(alpha);
            axpy_neg(&mut w, T::from_re(alpha), &basis[j]);
            if j > 0 {
                axpy_neg(&mut w, T::from_re(betas[j - 1]), &basis[j - 1]);
            }
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(q, &w);
                    axpy_neg(&mut w, c, q);
                }
            }
            let beta = norm(&w);
            let last = j + 1 == m_cap;
            let check = last || beta < 1e-13 || j % 4 == 3 || j < 4;
            if check {
                ritz = lowest_tridiagonal(&alphas, &betas);
                let est = beta * ritz.1[j].abs();
                if est < opts.tol * 0.1 || beta < 1e-13 || last {
                    break;
                }
            }
            betas.push(beta);
            basis.push(w.iter().map(|z| z.scale(1.0 / beta)).collect());
        }

        let (value, coeffs) = ritz;
        let mut vec = vec![T::zero(); dim];
        for (q, &c) in basis.iter().zip(&coeffs) {
            for (vi, qi) in vec.iter_mut().zip(q) {
                *vi = vi.add(qi.scale(c));
            }
        }
        let vn = norm(&vec);
        vec.iter_mut().for_each(|z| *z = z.scale(1.0 / vn));
        matvec(&vec, &mut w);
        matvecs += 1;
        let residual = w.iter().zip(&vec).map(|(hv, v)| hv.sub(v.scale(value)).norm_sqr()).sum::<f64>().sqrt();
        let result = LanczosResult { value, vector: vec, residual, matvecs };
        if residual < opts.tol {
            return Ok(result);
        }
        x = result.vector;
    }
    Err(NumericsError::NotConverged { op: "lanczos", iterations: matvecs })
}

/// Lowest eigenvalue and eigenvector of the symmetric tridiagonal matrix with
/// diagonal `alphas` and off-diagonal `betas` (len = alphas.len() - 1, or more).
pub(crate) fn lowest_tridiagonal(alphas: &[f64], betas: &[f64]) -> (f64, Vec<f64>) {
    let k = alphas.len();
    let t = DMatrix::from_fn(k, k, |r, c| {
        if r == c {
            alphas[r]
        } else if r + 1 == c {
            betas[r]
        } else if c + 1 == r {
            betas[c]
        } else {
            0.0
        }
    });
    let eig = t.symmetric_eigen();
    let (idx, &val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
        .expect("non-empty tridiagonal");
    (val, eig.eigenvectors.column(idx).iter().copied().collect())
}
