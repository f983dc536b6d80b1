//! Direct banded and sparse linear solvers for the implicit time steps.
//!
//! The 1D step systems are tridiagonal; in 2D the lexicographic 5-point
//! systems are banded with bandwidth equal to the slow-axis stride. Both go
//! through a banded LU with partial pivoting. `solve_sparse` wraps the banded
//! factorization behind a residual contract and falls back to BiCGSTAB when
//! the factorization breaks down.

use crate::error::SolveError;

/// Band-stored square matrix with `kl` sub- and `ku` superdiagonals.
///
/// Column-major band storage with `kl` extra fill rows so a pivoted
/// factorization can run in place: entry (i, j) lives at
/// `band[j * ldab + (kl + ku + i - j)]`, `ldab = 2 kl + ku + 1`. Columns are
/// contiguous, which keeps the elimination inner loops on one cache line
/// run.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    band: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        assert!(n > 0 && kl < n && ku < n, "bandwidths must be below n");
        BandedMatrix {
            n,
            kl,
            ku,
            band: vec![0.0; (2 * kl + ku + 1) * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn ldab(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        j * self.ldab() + (self.kl + self.ku + i - j)
    }

    #[inline]
    fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && i + self.ku >= j && j + self.kl >= i
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band");
        let s = self.slot(i, j);
        self.band[s] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band");
        let s = self.slot(i, j);
        self.band[s] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.band[self.slot(i, j)]
        } else {
            0.0
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            let mut acc = 0.0;
            for j in lo..=hi {
                acc += self.band[self.slot(i, j)] * x[j];
            }
            y[i] = acc;
        }
        y
    }

    /// Max absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        let mut m = 0.0_f64;
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            let row: f64 = (lo..=hi).map(|j| self.band[self.slot(i, j)].abs()).sum();
            m = m.max(row);
        }
        m
    }
}

/// Solve `A x = rhs` by banded LU with partial pivoting within the band.
pub fn solve_banded(a: &BandedMatrix, rhs: &[f64]) -> Result<Vec<f64>, SolveError> {
    assert_eq!(rhs.len(), a.n);
    let n = a.n;
    let (kl, ku) = (a.kl, a.ku);
    let kw = kl + ku; // effective upper bandwidth after pivoting
    let ldab = 2 * kl + ku + 1;
    let mut ab = a.band.clone();
    // offset of row i within column j: kl + ku + i - j
    let slot = |i: usize, j: usize| j * ldab + (kl + ku + i - j);
    let mut x = rhs.to_vec();

    // Factor with row interchanges, applying them to x on the fly.
    for j in 0..n {
        let i_max = (j + kl).min(n - 1);
        // pivot search runs down the (contiguous) column j
        let mut piv = j;
        let mut pmax = ab[slot(j, j)].abs();
        for i in (j + 1)..=i_max {
            let v = ab[slot(i, j)].abs();
            if v > pmax {
                pmax = v;
                piv = i;
            }
        }
        if pmax == 0.0 {
            return Err(SolveError::Singular { pivot: j });
        }
        let c_hi = (j + kw).min(n - 1);
        if piv != j {
            for c in j..=c_hi {
                ab.swap(slot(j, c), slot(piv, c));
            }
            x.swap(j, piv);
        }
        if i_max > j {
            // multipliers overwrite the subdiagonal of column j
            let d = ab[slot(j, j)];
            for i in (j + 1)..=i_max {
                ab[slot(i, j)] /= d;
            }
            // rank-1 update, one contiguous column segment at a time
            for c in (j + 1)..=c_hi {
                let u = ab[slot(j, c)];
                if u != 0.0 {
                    let (mul_base, upd_base) = (slot(j + 1, j), slot(j + 1, c));
                    for k in 0..(i_max - j) {
                        let m = ab[mul_base + k];
                        ab[upd_base + k] -= m * u;
                    }
                }
            }
            let xj = x[j];
            for i in (j + 1)..=i_max {
                x[i] -= ab[slot(i, j)] * xj;
            }
        }
    }

    // Back substitution against U (bandwidth kl + ku).
    for j in (0..n).rev() {
        x[j] /= ab[slot(j, j)];
        let xj = x[j];
        if xj != 0.0 {
            let i_lo = j.saturating_sub(kw);
            for i in i_lo..j {
                x[i] -= ab[slot(i, j)] * xj;
            }
        }
    }
    Ok(x)
}

/// Coordinate-triplet assembly buffer; duplicates are summed on conversion.
#[derive(Debug, Clone, Default)]
pub struct Triplets {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(n: usize) -> Self {
        Triplets {
            n,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        assert!(i < self.n && j < self.n, "triplet index out of range");
        self.entries.push((i, j, v));
    }
}

/// Compressed-row square matrix.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_triplets(t: &Triplets) -> Self {
        let n = t.n;
        let mut sorted = t.entries.clone();
        sorted.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut cur_row = 0usize;
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in &sorted {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            while cur_row < i {
                cur_row += 1;
                row_ptr[cur_row] = col_idx.len();
            }
            col_idx.push(j);
            values.push(v);
            last = Some((i, j));
        }
        while cur_row < n {
            cur_row += 1;
            row_ptr[cur_row] = col_idx.len();
        }
        SparseMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = acc;
        }
        y
    }

    /// Lower/upper bandwidths of the sparsity pattern.
    pub fn pattern_bandwidths(&self) -> (usize, usize) {
        let mut kl = 0usize;
        let mut ku = 0usize;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                if j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        (kl, ku)
    }

    fn to_banded(&self) -> BandedMatrix {
        let (kl, ku) = self.pattern_bandwidths();
        let mut b = BandedMatrix::zeros(self.n, kl.max(1).min(self.n - 1), ku.max(1).min(self.n - 1));
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                b.add(i, self.col_idx[k], self.values[k]);
            }
        }
        b
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn rel_residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let r: f64 = ax
        .iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt();
    let nb = norm2(b);
    if nb == 0.0 {
        r
    } else {
        r / nb
    }
}

/// Solve `A x = rhs` to relative residual `tol`.
///
/// A banded direct factorization is the fast path; BiCGSTAB with diagonal
/// scaling picks up singular-pivot breakdowns. Failure to meet the residual
/// contract within `max_iter` iterations reports the final residual.
pub fn solve_sparse(
    a: &SparseMatrix,
    rhs: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>, SolveError> {
    assert_eq!(rhs.len(), a.n);
    if norm2(rhs) == 0.0 {
        return Ok(vec![0.0; a.n]);
    }
    let banded = a.to_banded();
    match solve_banded(&banded, rhs) {
        Ok(x) => {
            let res = rel_residual(a, &x, rhs);
            if res <= tol {
                return Ok(x);
            }
            bicgstab(a, rhs, Some(x), tol, max_iter)
        }
        Err(SolveError::Singular { .. }) => bicgstab(a, rhs, None, tol, max_iter),
        Err(e) => Err(e),
    }
}

/// BiCGSTAB with Jacobi (diagonal) row scaling.
fn bicgstab(
    a: &SparseMatrix,
    b: &[f64],
    x0: Option<Vec<f64>>,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>, SolveError> {
    let n = a.n;
    let mut x = x0.unwrap_or_else(|| vec![0.0; n]);
    if !x.iter().all(|v| v.is_finite()) {
        x = vec![0.0; n];
    }
    let ax = a.matvec(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    let r0 = r.clone();
    let nb = norm2(b);
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut res = norm2(&r) / nb;
    if res <= tol {
        return Ok(x);
    }
    for it in 0..max_iter {
        let rho1: f64 = r0.iter().zip(&r).map(|(a, b)| a * b).sum();
        if rho1.abs() < 1e-300 {
            return Err(SolveError::IterativeFailure {
                residual: res,
                iters: it,
            });
        }
        let beta = (rho1 / rho) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        v = a.matvec(&p);
        let denom: f64 = r0.iter().zip(&v).map(|(a, b)| a * b).sum();
        if denom.abs() < 1e-300 {
            return Err(SolveError::IterativeFailure {
                residual: res,
                iters: it,
            });
        }
        alpha = rho1 / denom;
        let s: Vec<f64> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
        if norm2(&s) / nb <= tol {
            for i in 0..n {
                x[i] += alpha * p[i];
            }
            return Ok(x);
        }
        let t = a.matvec(&s);
        let tt: f64 = t.iter().map(|a| a * a).sum();
        if tt == 0.0 {
            return Err(SolveError::IterativeFailure {
                residual: res,
                iters: it,
            });
        }
        omega = t.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>() / tt;
        for i in 0..n {
            x[i] += alpha * p[i] + omega * s[i];
            r[i] = s[i] - omega * t[i];
        }
        res = norm2(&r) / nb;
        if res <= tol {
            return Ok(x);
        }
        rho = rho1;
    }
    Err(SolveError::IterativeFailure {
        residual: res,
        iters: max_iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn banded_identity_returns_rhs() {
        let mut a = BandedMatrix::zeros(5, 1, 1);
        for i in 0..5 {
            a.set(i, i, 1.0);
        }
        let rhs = vec![3.0, -1.0, 0.5, 2.0, 7.0];
        let x = solve_banded(&a, &rhs).unwrap();
        for (a, b) in x.iter().zip(&rhs) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn banded_zero_row_is_singular() {
        let mut a = BandedMatrix::zeros(4, 1, 1);
        for i in 0..4 {
            if i != 2 {
                a.set(i, i, 1.0);
            }
        }
        assert!(matches!(
            solve_banded(&a, &[1.0; 4]),
            Err(SolveError::Singular { .. })
        ));
    }

    #[test]
    fn sparse_identity_returns_rhs() {
        let mut t = Triplets::new(3);
        for i in 0..3 {
            t.push(i, i, 1.0);
        }
        let a = SparseMatrix::from_triplets(&t);
        let x = solve_sparse(&a, &[1.0, 2.0, 3.0], 1e-12, 50).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn sparse_duplicate_triplets_are_summed() {
        let mut t = Triplets::new(2);
        t.push(0, 0, 1.0);
        t.push(0, 0, 2.0);
        t.push(1, 1, 1.0);
        t.push(0, 1, 0.5);
        let a = SparseMatrix::from_triplets(&t);
        let y = a.matvec(&[1.0, 2.0]);
        assert!((y[0] - (3.0 + 1.0)).abs() < 1e-15);
        assert!((y[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn sparse_inconsistent_singular_fails() {
        // Column 1 empty: singular; rhs not in the range.
        let mut t = Triplets::new(2);
        t.push(0, 0, 1.0);
        t.push(1, 0, 1.0);
        let a = SparseMatrix::from_triplets(&t);
        let r = solve_sparse(&a, &[1.0, 2.0], 1e-12, 50);
        assert!(matches!(r, Err(SolveError::IterativeFailure { .. })));
    }
}
