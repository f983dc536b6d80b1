//! Discrete differential operators on spatial slices.
//!
//! All operators implement the homogeneous Neumann / zero-flux convention:
//! the one-sided differences vanish on their respective boundaries, the
//! Laplacian drops the missing neighbor, and the adjoint divergence carries
//! the boundary terms that make `<u, D*[v]> = <[Du], [v]>` hold exactly.
//! 2D variants apply the 1D stencils dimension-by-dimension and sum.

use crate::error::GridError;
use crate::grid::{GridSpec, SidedPair};

fn check_extent(u: &[f64], grid: &GridSpec) -> Result<(), GridError> {
    if u.len() != grid.n_space() {
        return Err(GridError::Shape {
            expected: grid.n_space(),
            got: u.len(),
        });
    }
    Ok(())
}

/// Forward/backward one-sided differences along every axis.
///
/// `plus[j][s] = (u[s + stride_j] - u[s]) / dx_j` away from the upper
/// boundary of axis j and zero on it; `minus` mirrors this on the lower
/// boundary.
pub fn one_sided_gradients(u: &[f64], grid: &GridSpec) -> Result<SidedPair, GridError> {
    check_extent(u, grid)?;
    let dim = grid.dim();
    let mut out = SidedPair::zeros(dim, grid.n_space());
    for j in 0..dim {
        let stride = grid.stride(j);
        let points = grid.points(j);
        let inv_dx = 1.0 / grid.dx(j);
        let plus = &mut out.plus[j];
        let minus = &mut out.minus[j];
        for s in 0..grid.n_space() {
            let i = (s / stride) % points;
            if i + 1 < points {
                plus[s] = (u[s + stride] - u[s]) * inv_dx;
            }
            if i > 0 {
                minus[s] = (u[s] - u[s - stride]) * inv_dx;
            }
        }
    }
    Ok(out)
}

/// Arithmetic mean of the one-sided differences, per dimension.
pub fn central_gradient(g: &SidedPair) -> Vec<Vec<f64>> {
    g.plus
        .iter()
        .zip(&g.minus)
        .map(|(p, m)| p.iter().zip(m).map(|(a, b)| 0.5 * (a + b)).collect())
        .collect()
}

/// Neumann discrete Laplacian, summed over dimensions in 2D.
pub fn laplacian(u: &[f64], grid: &GridSpec) -> Result<Vec<f64>, GridError> {
    check_extent(u, grid)?;
    let mut out = vec![0.0; u.len()];
    for j in 0..grid.dim() {
        let stride = grid.stride(j);
        let points = grid.points(j);
        let inv_dx2 = 1.0 / (grid.dx(j) * grid.dx(j));
        for s in 0..u.len() {
            let i = (s / stride) % points;
            let v = if i == 0 {
                (u[s + stride] - u[s]) * inv_dx2
            } else if i + 1 == points {
                (u[s - stride] - u[s]) * inv_dx2
            } else {
                (u[s + stride] - 2.0 * u[s] + u[s - stride]) * inv_dx2
            };
            out[s] += v;
        }
    }
    Ok(out)
}

/// Adjoint of the one-sided gradient pair under the `1/2`-weighted pair
/// inner product: `<u, D*[v]> = <[Du], [v]>`. Computed per dimension and
/// summed; approximates the negative divergence in the interior.
pub fn adjoint_divergence(v: &SidedPair, grid: &GridSpec) -> Result<Vec<f64>, GridError> {
    if v.dim() != grid.dim() {
        return Err(GridError::Dimension {
            expected: grid.dim(),
            got: v.dim(),
        });
    }
    for j in 0..grid.dim() {
        check_extent(&v.plus[j], grid)?;
        check_extent(&v.minus[j], grid)?;
    }
    let mut out = vec![0.0; grid.n_space()];
    for j in 0..grid.dim() {
        let stride = grid.stride(j);
        let points = grid.points(j);
        let half_inv_dx = 0.5 / grid.dx(j);
        let plus = &v.plus[j];
        let minus = &v.minus[j];
        for (s, o) in out.iter_mut().enumerate() {
            let i = (s / stride) % points;
            let val = if i == 0 {
                -(plus[s] + minus[s + stride]) * half_inv_dx
            } else if i + 1 == points {
                (minus[s] + plus[s - stride]) * half_inv_dx
            } else {
                // -1/2 (D^-(v+) + D^+(v-))_i
                -((plus[s] - plus[s - stride]) + (minus[s + stride] - minus[s])) * half_inv_dx
            };
            *o += val;
        }
    }
    Ok(out)
}
