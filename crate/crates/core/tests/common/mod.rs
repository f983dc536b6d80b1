//! Shared test support: dense matrix oracles assembled directly from the
//! stencil formulas, a dense LU, a Jacobi eigensolver, and a deterministic
//! pseudo-random stream. Everything here is independent of the library's
//! operator implementations.
#![allow(dead_code)]

use mfg_core::grid::GridSpec;

/// Row-major dense matrix.
#[derive(Clone, Debug)]
pub struct Dense {
    pub n_rows: usize,
    pub n_cols: usize,
    pub a: Vec<f64>,
}

impl Dense {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Dense {
            n_rows,
            n_cols,
            a: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n_cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n_cols + j] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n_cols + j] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows)
            .map(|i| (0..self.n_cols).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    pub fn transpose(&self) -> Dense {
        let mut t = Dense::zeros(self.n_cols, self.n_rows);
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn scale(&mut self, c: f64) {
        self.a.iter_mut().for_each(|v| *v *= c);
    }

    pub fn max_abs_diff(&self, other: &Dense) -> f64 {
        self.a
            .iter()
            .zip(&other.a)
            .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
    }

    /// Solve by dense LU with partial pivoting.
    pub fn lu_solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        assert_eq!(self.n_rows, self.n_cols);
        let n = self.n_rows;
        let mut a = self.a.clone();
        let mut x = rhs.to_vec();
        for c in 0..n {
            let mut piv = c;
            let mut best = a[c * n + c].abs();
            for r in (c + 1)..n {
                if a[r * n + c].abs() > best {
                    best = a[r * n + c].abs();
                    piv = r;
                }
            }
            if best == 0.0 {
                return None;
            }
            if piv != c {
                for j in 0..n {
                    a.swap(c * n + j, piv * n + j);
                }
                x.swap(c, piv);
            }
            let d = a[c * n + c];
            for r in (c + 1)..n {
                let m = a[r * n + c] / d;
                if m != 0.0 {
                    for j in (c + 1)..n {
                        a[r * n + j] -= m * a[c * n + j];
                    }
                    x[r] -= m * x[c];
                }
                a[r * n + c] = 0.0;
            }
        }
        for c in (0..n).rev() {
            x[c] /= a[c * n + c];
            for r in 0..c {
                x[r] -= a[r * n + c] * x[c];
            }
        }
        Some(x)
    }

    /// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
    /// Returns (eigenvalues, eigenvectors as columns).
    pub fn sym_eigen(&self) -> (Vec<f64>, Dense) {
        assert_eq!(self.n_rows, self.n_cols);
        let n = self.n_rows;
        let mut a = self.clone();
        let mut v = Dense::zeros(n, n);
        for i in 0..n {
            v.set(i, i, 1.0);
        }
        for _sweep in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a.get(p, q) * a.get(p, q);
                }
            }
            if off < 1e-28 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a.get(p, q);
                    if apq.abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a.get(k, p);
                        let akq = a.get(k, q);
                        a.set(k, p, c * akp - s * akq);
                        a.set(k, q, s * akp + c * akq);
                    }
                    for k in 0..n {
                        let apk = a.get(p, k);
                        let aqk = a.get(q, k);
                        a.set(p, k, c * apk - s * aqk);
                        a.set(q, k, s * apk + c * aqk);
                    }
                    for k in 0..n {
                        let vkp = v.get(k, p);
                        let vkq = v.get(k, q);
                        v.set(k, p, c * vkp - s * vkq);
                        v.set(k, q, s * vkp + c * vkq);
                    }
                }
            }
        }
        let w = (0..n).map(|i| a.get(i, i)).collect();
        (w, v)
    }
}

/// Forward difference matrix assembled from its definition (1D).
pub fn dense_dplus(grid: &GridSpec) -> Dense {
    let n = grid.points(0);
    let inv_dx = 1.0 / grid.dx(0);
    let mut m = Dense::zeros(n, n);
    for i in 0..n - 1 {
        m.set(i, i, -inv_dx);
        m.set(i, i + 1, inv_dx);
    }
    m
}

/// Backward difference matrix assembled from its definition (1D).
pub fn dense_dminus(grid: &GridSpec) -> Dense {
    let n = grid.points(0);
    let inv_dx = 1.0 / grid.dx(0);
    let mut m = Dense::zeros(n, n);
    for i in 1..n {
        m.set(i, i - 1, -inv_dx);
        m.set(i, i, inv_dx);
    }
    m
}

/// Neumann Laplacian matrix assembled from its definition (1D).
pub fn dense_laplacian(grid: &GridSpec) -> Dense {
    let n = grid.points(0);
    let c = 1.0 / (grid.dx(0) * grid.dx(0));
    let mut m = Dense::zeros(n, n);
    m.set(0, 0, -c);
    m.set(0, 1, c);
    for i in 1..n - 1 {
        m.set(i, i - 1, c);
        m.set(i, i, -2.0 * c);
        m.set(i, i + 1, c);
    }
    m.set(n - 1, n - 2, c);
    m.set(n - 1, n - 1, -c);
    m
}

/// Coefficient matrices of the adjoint divergence, assembled from its
/// boundary/interior case formulas (1D): `D*[v] = Mp v+ + Mm v-`.
pub fn dense_adjoint_pair(grid: &GridSpec) -> (Dense, Dense) {
    let n = grid.points(0);
    let h = 0.5 / grid.dx(0);
    let mut mp = Dense::zeros(n, n);
    let mut mm = Dense::zeros(n, n);
    mp.set(0, 0, -h);
    mm.set(0, 1, -h);
    for i in 1..n - 1 {
        mp.set(i, i - 1, h);
        mp.set(i, i, -h);
        mm.set(i, i, h);
        mm.set(i, i + 1, -h);
    }
    mp.set(n - 1, n - 2, h);
    mm.set(n - 1, n - 1, h);
    (mp, mm)
}

/// Deterministic pseudo-random stream (SplitMix64), uniform in [-1, 1).
pub struct Stream(u64);

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    pub fn vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.uniform()).collect()
    }

    /// Uniform in [0, 1).
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

pub fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
    let denom = a.abs().max(b.abs()).max(1.0);
    assert!(
        (a - b).abs() <= tol * denom,
        "{what}: {a} vs {b} (rel {})",
        (a - b).abs() / denom
    );
}
