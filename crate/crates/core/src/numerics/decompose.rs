//! QR and truncated SVD.

use super::{ComplexMatrix, NumericsError, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

fn ensure_finite(a: &ComplexMatrix, op: &'static str) -> Result<(), NumericsError> {
    if a.is_finite() {
        Ok(())
    } else {
        Err(NumericsError::NonFinite { op })
    }
}

/// Thin Householder QR: `a = Q·R` with `Q` m×k having orthonormal columns and
/// `R` k×n upper triangular, k = min(m, n).
///
/// The diagonal of `R` is real and nonnegative, which makes the factorization
/// unique for full-rank input.
pub fn qr(a: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix), NumericsError> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Err(NumericsError::Empty { op: "qr" });
    }
    ensure_finite(a, "qr")?;
    let k = m.min(n);
    let mut r = a.clone();
    let mut reflectors: Vec<Option<Vec<C64>>> = Vec::with_capacity(k);

    for j in 0..k {
        let norm = (j..m).map(|i| r[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            reflectors.push(None);
            continue;
        }
        let x0 = r[(j, j)];
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { C64::new(1.0, 0.0) };
        let alpha = -phase * norm;
        let mut v: Vec<C64> = (j..m).map(|i| r[(i, j)]).collect();
        v[0] -= alpha;
        let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            reflectors.push(None);
            continue;
        }
        v.iter_mut().for_each(|z| *z /= vnorm);
        apply_reflector_rows(&mut r, &v, j, j);
        for i in j + 1..m {
            r[(i, j)] = ZERO;
        }
        reflectors.push(Some(v));
    }

    let mut q = ComplexMatrix::from_fn(m, k, |i, c| if i == c { C64::new(1.0, 0.0) } else { ZERO });
    for (j, v) in reflectors.iter().enumerate().rev() {
        if let Some(v) = v {
            apply_reflector_rows(&mut q, v, j, 0);
        }
    }
    let mut r = r.leading_rows(k);

    for i in 0..k {
        let d = r[(i, i)];
        let mag = d.norm();
        if mag > 0.0 {
            let ph = d / mag;
            for c in 0..n {
                r[(i, c)] *= ph.conj();
            }
            r[(i, i)] = C64::new(mag, 0.0);
            for row in 0..m {
                q[(row, i)] *= ph;
            }
        }
    }
    Ok((q, r))
}

/// Applies `I - 2 v vᴴ` to rows `start..start+len(v)` of `m`, columns `col0..`.
fn apply_reflector_rows(m: &mut ComplexMatrix, v: &[C64], start: usize, col0: usize) {
    let cols = m.cols();
    for c in col0..cols {
        let mut s = ZERO;
        for (i, vi) in v.iter().enumerate() {
            s += vi.conj() * m[(start + i, c)];
        }
        if s == ZERO {
            continue;
        }
        let f = s * 2.0;
        for (i, vi) in v.iter().enumerate() {
            m[(start + i, c)] -= f * vi;
        }
    }
}

/// Output of [`svd_truncate`]: `a ≈ u · diag(s) · vh`.
#[derive(Clone, Debug)]
pub struct TruncatedSvd {
    pub u: ComplexMatrix,
    pub s: Vec<f64>,
    pub vh: ComplexMatrix,
    /// Sum of squared singular values that were dropped.
    pub discarded_weight: f64,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// Rebuilds `u · diag(s) · vh`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let mut us = self.u.clone();
        for r in 0..us.rows() {
            for (c, &sv) in self.s.iter().enumerate() {
                us[(r, c)] *= sv;
            }
        }
        super::matmul(&us, &self.vh).expect("svd factors have consistent shapes")
    }
}

/// Singular value decomposition truncated to at most `max_rank` values, dropping
/// values `<= cutoff · s[0]` (and exact zeros).
///
/// Computed by one-sided Jacobi rotations on the triangular factor of a QR
/// decomposition, which keeps small singular values accurate.
pub fn svd_truncate(a: &ComplexMatrix, max_rank: usize, cutoff: f64) -> Result<TruncatedSvd, NumericsError> {
    if max_rank == 0 {
        return Err(NumericsError::InvalidArgument { op: "svd_truncate", detail: "max_rank must be >= 1".into() });
    }
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Err(NumericsError::Empty { op: "svd_truncate" });
    }
    ensure_finite(a, "svd_truncate")?;

    // Work with a tall matrix; for wide input decompose the adjoint.
    let wide = n > m;
    let tall = if wide { a.adjoint() } else { a.clone() };
    let (q, r) = qr(&tall)?;
    let (ur, s, v) = jacobi_svd_square(&r)?;
    let u_tall = super::matmul(&q, &ur)?;
    // tall = u_tall · diag(s) · vᴴ
    let (u_full, v_full) = if wide { (v, u_tall) } else { (u_tall, v) };

    let s0 = s.first().copied().unwrap_or(0.0);
    let threshold = cutoff.max(0.0) * s0;
    let mut keep = s.iter().take_while(|&&x| x > threshold && x > 0.0).count().min(max_rank);
    let discarded_weight = s[keep..].iter().map(|x| x * x).sum();
    let zero_matrix = keep == 0;
    if zero_matrix {
        keep = 1;
    }
    let u = u_full.leading_columns(keep);
    let vh = v_full.leading_columns(keep).adjoint();
    let s = if zero_matrix { vec![0.0] } else { s[..keep].to_vec() };
    Ok(TruncatedSvd { u, s, vh, discarded_weight })
}

/// Full SVD of a square matrix: returns (U, s descending, V) with `r = U diag(s) Vᴴ`.
fn jacobi_svd_square(r: &ComplexMatrix) -> Result<(ComplexMatrix, Vec<f64>, ComplexMatrix), NumericsError> {
    let (rows, n) = r.shape();
    // Column-major working copies.
    let mut w: Vec<Vec<C64>> = (0..n).map(|c| (0..rows).map(|i| r[(i, c)]).collect()).collect();
    let mut v: Vec<Vec<C64>> =
        (0..n).map(|c| (0..n).map(|i| if i == c { C64::new(1.0, 0.0) } else { ZERO }).collect()).collect();
    let mut norms: Vec<f64> = w.iter().map(|col| col.iter().map(|z| z.norm_sqr()).sum()).collect();

    // The computed inner product carries rounding of order rows·ε.
    let tol = (rows.max(n) as f64) * f64::EPSILON;
    // Columns this small relative to the whole matrix are already zero to working precision.
    let negligible = f64::EPSILON * f64::EPSILON * norms.iter().sum::<f64>();
    const MAX_SWEEPS: usize = 80;
    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = norms[p];
                let beta = norms[q];
                if alpha <= negligible || beta <= negligible {
                    continue;
                }
                let gamma: C64 = w[p].iter().zip(&w[q]).map(|(a, b)| a.conj() * b).sum();
                let g = gamma.norm();
                if g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let e = gamma / g;
                let se_conj = e.conj() * s;
                let se = e * s;
                rotate(&mut w, p, q, c, se_conj, se);
                rotate(&mut v, p, q, c, se_conj, se);
                norms[p] = w[p].iter().map(|z| z.norm_sqr()).sum();
                norms[q] = w[q].iter().map(|z| z.norm_sqr()).sum();
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(NumericsError::NotConverged { op: "jacobi_svd", iterations: MAX_SWEEPS });
    }
    for x in norms.iter_mut() {
        if *x <= negligible {
            *x = 0.0;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap_or(std::cmp::Ordering::Equal));
    let s: Vec<f64> = order.iter().map(|&j| norms[j].sqrt()).collect();
    let mut u = ComplexMatrix::zeros(rows, n);
    let mut vm = ComplexMatrix::zeros(n, n);
    for (k, &j) in order.iter().enumerate() {
        let sv = s[k];
        for i in 0..rows {
            u[(i, k)] = if sv > 0.0 { w[j][i] / sv } else { ZERO };
        }
        for i in 0..n {
            vm[(i, k)] = v[j][i];
        }
    }
    complete_orthonormal_columns(&mut u, s.iter().filter(|&&x| x > 0.0).count());
    Ok((u, s, vm))
}

/// col_p ← c·col_p − se_conj·col_q ; col_q ← se·col_p + c·col_q
fn rotate(cols: &mut [Vec<C64>], p: usize, q: usize, c: f64, se_conj: C64, se: C64) {
    let (lo, hi) = cols.split_at_mut(q);
    let cp = &mut lo[p];
    let cq = &mut hi[0];
    for (a, b) in cp.iter_mut().zip(cq.iter_mut()) {
        let ap = *a;
        let bq = *b;
        *a = ap * c - se_conj * bq;
        *b = se * ap + bq * c;
    }
}

/// Replaces columns `filled..` with unit vectors orthogonal to all previous columns.
fn complete_orthonormal_columns(u: &mut ComplexMatrix, filled: usize) {
    let (rows, cols) = u.shape();
    let mut next_basis = 0;
    for k in filled..cols {
        while next_basis < rows {
            let mut cand: Vec<C64> = (0..rows).map(|i| if i == next_basis { C64::new(1.0, 0.0) } else { ZERO }).collect();
            next_basis += 1;
            for _ in 0..2 {
                for j in 0..k {
                    let proj: C64 = (0..rows).map(|i| u[(i, j)].conj() * cand[i]).sum();
                    for (i, ci) in cand.iter_mut().enumerate() {
                        *ci -= proj * u[(i, j)];
                    }
                }
            }
            let norm = cand.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > 1e-8 {
                for (i, ci) in cand.iter().enumerate() {
                    u[(i, k)] = ci / norm;
                }
                break;
            }
        }
    }
}
