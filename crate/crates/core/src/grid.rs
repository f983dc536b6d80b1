//! Space-time tensor grids and field storage.
//!
//! A grid covers a box `[x_min, x_max]^d` (d = 1 or 2) with `n_x + 1` points
//! per axis and the time interval `[0, T]` with `n_t + 1` points. Fields are
//! stored time-major so each forward/backward sweep touches one contiguous
//! spatial slice per step.

use crate::error::GridError;

/// One spatial axis: endpoints and interval count.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub x_min: f64,
    pub x_max: f64,
    pub n_x: usize,
}

impl Axis {
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_x as f64
    }

    /// Point coordinate, exact at both endpoints.
    pub fn coord(&self, i: usize) -> f64 {
        debug_assert!(i <= self.n_x);
        if i == self.n_x {
            self.x_max
        } else {
            self.x_min + i as f64 * self.dx()
        }
    }
}

/// Space-time grid specification.
#[derive(Debug, Clone)]
pub struct GridSpec {
    axes: Vec<Axis>,
    t_final: f64,
    n_t: usize,
    level: u32,
}

// Grid equality is geometric; the hierarchy level is bookkeeping and two
// grids with the same axes and time sampling carry each other's fields.
impl PartialEq for GridSpec {
    fn eq(&self, other: &Self) -> bool {
        self.axes == other.axes && self.t_final == other.t_final && self.n_t == other.n_t
    }
}

impl GridSpec {
    pub fn new_1d(x_min: f64, x_max: f64, n_x: usize, t_final: f64, n_t: usize) -> Self {
        assert!(n_x >= 1 && n_t >= 1 && x_max > x_min && t_final > 0.0);
        GridSpec {
            axes: vec![Axis { x_min, x_max, n_x }],
            t_final,
            n_t,
            level: 0,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn new_2d(
        x_min: [f64; 2],
        x_max: [f64; 2],
        n_x: [usize; 2],
        t_final: f64,
        n_t: usize,
    ) -> Self {
        assert!(n_t >= 1 && t_final > 0.0);
        for j in 0..2 {
            assert!(n_x[j] >= 1 && x_max[j] > x_min[j]);
        }
        GridSpec {
            axes: (0..2)
                .map(|j| Axis {
                    x_min: x_min[j],
                    x_max: x_max[j],
                    n_x: n_x[j],
                })
                .collect(),
            t_final,
            n_t,
            level: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, j: usize) -> &Axis {
        &self.axes[j]
    }

    pub fn dx(&self, j: usize) -> f64 {
        self.axes[j].dx()
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.n_t as f64
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn time(&self, n: usize) -> f64 {
        if n == self.n_t {
            self.t_final
        } else {
            n as f64 * self.dt()
        }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn with_level(mut self, level: u32) -> Self {
        self.level = level;
        self
    }

    /// Points along axis `j` (`n_x + 1`).
    pub fn points(&self, j: usize) -> usize {
        self.axes[j].n_x + 1
    }

    /// Total spatial points per time slice.
    pub fn n_space(&self) -> usize {
        self.axes.iter().map(|a| a.n_x + 1).product()
    }

    /// Stride of axis `j` in the flattened spatial index (axis 0 fastest).
    pub fn stride(&self, j: usize) -> usize {
        self.axes[..j].iter().map(|a| a.n_x + 1).product()
    }

    /// Product of spatial mesh steps (quadrature weight per spatial point).
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.dx()).product()
    }

    /// Decompose a flattened spatial index into per-axis indices.
    pub fn unflatten(&self, s: usize) -> Vec<usize> {
        let mut rem = s;
        self.axes
            .iter()
            .map(|a| {
                let i = rem % (a.n_x + 1);
                rem /= a.n_x + 1;
                i
            })
            .collect()
    }

    /// Coordinates of the spatial point with flattened index `s`.
    pub fn coords(&self, s: usize) -> Vec<f64> {
        let idx = self.unflatten(s);
        idx.iter()
            .zip(&self.axes)
            .map(|(&i, a)| a.coord(i))
            .collect()
    }

    /// The grid one hierarchy level finer: doubled `n_x` along every axis and
    /// doubled `n_t`, level incremented.
    pub fn refined(&self) -> GridSpec {
        GridSpec {
            axes: self
                .axes
                .iter()
                .map(|a| Axis {
                    x_min: a.x_min,
                    x_max: a.x_max,
                    n_x: 2 * a.n_x,
                })
                .collect(),
            t_final: self.t_final,
            n_t: 2 * self.n_t,
            level: self.level + 1,
        }
    }

    /// True when `fine` doubles this grid along every axis and in time.
    pub fn doubles_to(&self, fine: &GridSpec) -> Result<(), GridError> {
        if self.dim() != fine.dim() {
            return Err(GridError::Dimension {
                expected: self.dim(),
                got: fine.dim(),
            });
        }
        for j in 0..self.dim() {
            if fine.axes[j].n_x != 2 * self.axes[j].n_x {
                return Err(GridError::NotDoubled { axis: j });
            }
        }
        if fine.n_t != 2 * self.n_t {
            return Err(GridError::NotDoubled { axis: self.dim() });
        }
        Ok(())
    }
}

/// One real value per space-time grid point, time-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &GridSpec) -> Self {
        ScalarField {
            grid: grid.clone(),
            data: vec![0.0; grid.n_space() * (grid.n_t() + 1)],
        }
    }

    pub fn constant(grid: &GridSpec, c: f64) -> Self {
        ScalarField {
            grid: grid.clone(),
            data: vec![c; grid.n_space() * (grid.n_t() + 1)],
        }
    }

    /// Build from a function of (spatial index, time index).
    pub fn from_fn(grid: &GridSpec, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let ns = grid.n_space();
        let mut data = Vec::with_capacity(ns * (grid.n_t() + 1));
        for n in 0..=grid.n_t() {
            for s in 0..ns {
                data.push(f(s, n));
            }
        }
        ScalarField {
            grid: grid.clone(),
            data,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn slice(&self, n: usize) -> &[f64] {
        let ns = self.grid.n_space();
        &self.data[n * ns..(n + 1) * ns]
    }

    pub fn slice_mut(&mut self, n: usize) -> &mut [f64] {
        let ns = self.grid.n_space();
        &mut self.data[n * ns..(n + 1) * ns]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self <- (1 - delta) * self + delta * other`, entrywise.
    pub fn blend(&mut self, other: &ScalarField, delta: f64) {
        debug_assert_eq!(self.grid, other.grid);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a = (1.0 - delta) * *a + delta * *b;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Per-dimension forward/backward one-sided values on one spatial slice.
///
/// By construction `plus` vanishes on the upper boundary of its axis and
/// `minus` on the lower boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct SidedPair {
    pub plus: Vec<Vec<f64>>,
    pub minus: Vec<Vec<f64>>,
}

impl SidedPair {
    pub fn zeros(dim: usize, n_space: usize) -> Self {
        SidedPair {
            plus: vec![vec![0.0; n_space]; dim],
            minus: vec![vec![0.0; n_space]; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.plus.len()
    }
}

/// Space-time inner product `Δx Δt Σ u v` (Δx replaced by the product of
/// per-axis steps in 2D).
pub fn inner_product(u: &ScalarField, w: &ScalarField) -> Result<f64, GridError> {
    if u.grid != w.grid {
        return Err(GridError::GridMismatch);
    }
    let weight = u.grid.cell_volume() * u.grid.dt();
    let dot: f64 = u.data.iter().zip(&w.data).map(|(a, b)| a * b).sum();
    Ok(weight * dot)
}

pub fn grid_norm(u: &ScalarField) -> f64 {
    inner_product(u, u).expect("same grid").sqrt()
}

/// Norm of the difference of two fields on one grid.
pub fn grid_distance(u: &ScalarField, w: &ScalarField) -> Result<f64, GridError> {
    if u.grid != w.grid {
        return Err(GridError::GridMismatch);
    }
    let weight = u.grid.cell_volume() * u.grid.dt();
    let sum: f64 = u
        .data
        .iter()
        .zip(&w.data)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((weight * sum).sqrt())
}

/// Spatial-slice inner product with weight `Δx` per dimension (no `Δt`).
pub fn slice_inner(u: &[f64], w: &[f64], grid: &GridSpec) -> f64 {
    debug_assert_eq!(u.len(), w.len());
    let dot: f64 = u.iter().zip(w).map(|(a, b)| a * b).sum();
    grid.cell_volume() * dot
}

pub fn slice_norm(u: &[f64], grid: &GridSpec) -> f64 {
    slice_inner(u, u, grid).sqrt()
}

/// Coarse-to-fine transfer: coincident points are copied, points odd along
/// one axis are midpoint averages, points odd along several axes average all
/// coincident coarse neighbors.
pub fn prolongate(u: &ScalarField, fine: &GridSpec) -> Result<ScalarField, GridError> {
    let coarse = u.grid();
    coarse.doubles_to(fine)?;
    let dim = coarse.dim();
    let mut out = ScalarField::zeros(fine);
    let ns_fine = fine.n_space();

    // Per-axis coarse neighbor indices for every fine spatial point.
    // For even fine index i: the single coarse point i/2 (twice, weight soaks up).
    let neighbors_for = |i: usize| -> (usize, usize) {
        if i % 2 == 0 {
            (i / 2, i / 2)
        } else {
            ((i - 1) / 2, (i + 1) / 2)
        }
    };

    for n in 0..=fine.n_t() {
        let (n_lo, n_hi) = neighbors_for(n);
        let t_odd = n % 2 == 1;
        let slice = out.slice_mut(n);
        for (s, val) in slice.iter_mut().enumerate().take(ns_fine) {
            let idx = fine.unflatten(s);
            // Accumulate the mean over 2^m coincident coarse neighbors,
            // m = number of odd axes (including time).
            let mut acc = 0.0;
            let mut count = 0.0;
            let spatial_cases: Vec<(usize, usize, bool)> = idx
                .iter()
                .map(|&i| {
                    let (lo, hi) = neighbors_for(i);
                    (lo, hi, i % 2 == 1)
                })
                .collect();
            let combos = 1usize << dim;
            for mask in 0..combos {
                let mut sc = 0usize;
                let mut stride = 1usize;
                let mut skip = false;
                for (j, &(lo, hi, odd)) in spatial_cases.iter().enumerate() {
                    let pick_hi = (mask >> j) & 1 == 1;
                    if pick_hi && !odd {
                        skip = true;
                        break;
                    }
                    sc += if pick_hi { hi } else { lo } * stride;
                    stride *= coarse.points(j);
                }
                if skip {
                    continue;
                }
                for &nc in &[n_lo, n_hi][..if t_odd { 2 } else { 1 }] {
                    acc += u.slice(nc)[sc];
                    count += 1.0;
                }
            }
            *val = acc / count;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinates_hit_endpoints_exactly() {
        let g = GridSpec::new_1d(-5.0, 5.0, 7, 1.0, 3);
        assert_eq!(g.axis(0).coord(0), -5.0);
        assert_eq!(g.axis(0).coord(7), 5.0);
        assert_eq!(g.time(3), 1.0);
    }

    #[test]
    fn strides_and_unflatten_2d() {
        let g = GridSpec::new_2d([0.0, 0.0], [1.0, 1.0], [2, 3], 1.0, 1);
        assert_eq!(g.n_space(), 3 * 4);
        assert_eq!(g.stride(0), 1);
        assert_eq!(g.stride(1), 3);
        assert_eq!(g.unflatten(7), vec![1, 2]);
    }

    #[test]
    fn inner_product_unit_field() {
        // Constant 1 on [0,1] x [0,1] with n_x = n_t = 1: 4 points, weight 1,
        // so the norm is 2.
        let g = GridSpec::new_1d(0.0, 1.0, 1, 1.0, 1);
        let u = ScalarField::constant(&g, 1.0);
        assert!((grid_norm(&u) - 2.0).abs() < 1e-15);
        let zero = ScalarField::zeros(&g);
        assert_eq!(grid_norm(&zero), 0.0);
    }

    #[test]
    fn inner_product_symmetry_and_bilinearity() {
        let g = GridSpec::new_1d(-1.0, 2.0, 5, 1.5, 3);
        let u = ScalarField::from_fn(&g, |s, n| ((s * 7 + n * 3) % 11) as f64 - 5.0);
        let w = ScalarField::from_fn(&g, |s, n| ((s * 5 + n * 2) % 13) as f64 - 6.0);
        let v = ScalarField::from_fn(&g, |s, n| ((s + n) % 7) as f64);
        let uw = inner_product(&u, &w).unwrap();
        let wu = inner_product(&w, &u).unwrap();
        assert!((uw - wu).abs() < 1e-13);
        // <u, 2w + 3v> = 2<u,w> + 3<u,v>
        let mut comb = w.clone();
        for (c, (a, b)) in comb.data_mut().iter_mut().zip(w.data().iter().zip(v.data())) {
            *c = 2.0 * a + 3.0 * b;
        }
        let lhs = inner_product(&u, &comb).unwrap();
        let rhs = 2.0 * uw + 3.0 * inner_product(&u, &v).unwrap();
        assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn prolongate_preserves_constants() {
        let g = GridSpec::new_1d(0.0, 1.0, 4, 1.0, 2);
        let f = g.refined();
        let u = ScalarField::constant(&g, 3.25);
        let v = prolongate(&u, &f).unwrap();
        assert!(v.data().iter().all(|&x| (x - 3.25).abs() < 1e-15));
    }

    #[test]
    fn prolongate_midpoint_rule_1d() {
        // Space-only slice u = (0, 1) on n_x = 1 becomes (0, 0.5, 1).
        let g = GridSpec::new_1d(0.0, 1.0, 1, 1.0, 1);
        let f = g.refined();
        let u = ScalarField::from_fn(&g, |s, _| s as f64);
        let v = prolongate(&u, &f).unwrap();
        let want = [0.0, 0.5, 1.0];
        for (a, b) in v.slice(0).iter().zip(&want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn prolongate_reproduces_bilinear_functions() {
        let g = GridSpec::new_1d(-1.0, 1.0, 4, 2.0, 2);
        let f = g.refined();
        let xt = |grid: &GridSpec, s: usize, n: usize| grid.coords(s)[0] * grid.time(n);
        let u = ScalarField::from_fn(&g, |s, n| xt(&g, s, n));
        let v = prolongate(&u, &f).unwrap();
        let want = ScalarField::from_fn(&f, |s, n| xt(&f, s, n));
        for (a, b) in v.data().iter().zip(want.data()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn prolongate_reproduces_multilinear_products_2d() {
        // Products of per-axis affine factors are reproduced exactly: the
        // neighbor set is a tensor product, so the average factorizes.
        let g = GridSpec::new_2d([-1.0, 0.0], [1.0, 2.0], [2, 3], 1.0, 2);
        let f = g.refined();
        let val = |grid: &GridSpec, s: usize, n: usize| {
            let c = grid.coords(s);
            (1.0 + c[0]) * (2.0 - c[1]) * (0.5 + grid.time(n))
        };
        let u = ScalarField::from_fn(&g, |s, n| val(&g, s, n));
        let v = prolongate(&u, &f).unwrap();
        let want = ScalarField::from_fn(&f, |s, n| val(&f, s, n));
        for (a, b) in v.data().iter().zip(want.data()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn prolongate_rejects_non_doubling_target() {
        let g = GridSpec::new_1d(0.0, 1.0, 4, 1.0, 2);
        let bad = GridSpec::new_1d(0.0, 1.0, 6, 1.0, 4);
        let u = ScalarField::zeros(&g);
        assert!(matches!(
            prolongate(&u, &bad),
            Err(GridError::NotDoubled { .. })
        ));
    }
}
