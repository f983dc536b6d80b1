//! Problem data: Hamiltonian/Lagrangian contracts, the Lax-Friedrichs
//! numerical Hamiltonian, the interaction and terminal cost catalog, and the
//! closed-form moving-Gaussian reference solution.

use crate::error::{GridError, ProblemError};
use crate::grid::{GridSpec, ScalarField};
use crate::linsolve::{solve_banded, BandedMatrix};
use crate::ops;

/// A spatial function sampled once onto the grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialProfile {
    values: Vec<f64>,
}

impl SpatialProfile {
    pub fn sample(grid: &GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.n_space()).map(|s| f(&grid.coords(s))).collect();
        SpatialProfile { values }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        SpatialProfile { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

fn euclid(p: &[f64]) -> f64 {
    p.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Hamiltonian kinds with their convex-conjugate Lagrangians.
///
/// `Quadratic` is `H = |p|^2 / 2` with `L = |v|^2 / 2`. `Power` is
/// `H = h(x) + |p|^gamma / gamma` (`gamma > 1`) with
/// `L = |v|^{gamma'} / gamma' - h(x)`, `1/gamma + 1/gamma' = 1`.
#[derive(Debug, Clone)]
pub enum Hamiltonian {
    Quadratic,
    Power { gamma: f64, offset: SpatialProfile },
}

impl Hamiltonian {
    /// H(x_s, p)
    pub fn value(&self, s: usize, p: &[f64]) -> f64 {
        match self {
            Hamiltonian::Quadratic => 0.5 * p.iter().map(|v| v * v).sum::<f64>(),
            Hamiltonian::Power { gamma, offset } => {
                offset.values()[s] + euclid(p).powf(*gamma) / gamma
            }
        }
    }

    /// D_p H(x_s, p) written into `out`.
    ///
    /// The power kind returns 0 below |p| = 1e-12: `|p|^{gamma-2} p` is
    /// continuous there but the naive product is 0 * inf.
    pub fn grad_p(&self, s: usize, p: &[f64], out: &mut [f64]) {
        let _ = s;
        match self {
            Hamiltonian::Quadratic => out.copy_from_slice(p),
            Hamiltonian::Power { gamma, .. } => {
                let norm = euclid(p);
                if norm < 1e-12 {
                    out.iter_mut().for_each(|v| *v = 0.0);
                } else {
                    let scale = norm.powf(gamma - 2.0);
                    for (o, &pi) in out.iter_mut().zip(p) {
                        *o = scale * pi;
                    }
                }
            }
        }
    }

    /// L(x_s, v), the convex conjugate `sup_p { -<p,v> - H(x,p) }`.
    pub fn lagrangian(&self, s: usize, v: &[f64]) -> f64 {
        match self {
            Hamiltonian::Quadratic => 0.5 * v.iter().map(|a| a * a).sum::<f64>(),
            Hamiltonian::Power { gamma, offset } => {
                let conj = gamma / (gamma - 1.0);
                euclid(v).powf(conj) / conj - offset.values()[s]
            }
        }
    }
}

/// Lax-Friedrichs numerical Hamiltonian
/// `H(x, (p+ + p-)/2) - nu_n * sum_j (p_j+ - p_j-)/2`.
pub fn lf_hamiltonian(h: &Hamiltonian, s: usize, pair: &[(f64, f64)], nu_n: f64) -> f64 {
    let mut center = [0.0; 2];
    let dim = pair.len();
    for (c, &(p, m)) in center.iter_mut().zip(pair) {
        *c = 0.5 * (p + m);
    }
    let mut v = h.value(s, &center[..dim]);
    for &(p, m) in pair {
        v -= nu_n * 0.5 * (p - m);
    }
    v
}

/// Plain partial derivatives of the LF Hamiltonian:
/// `dH/dp_j± = D_pH_j(p̄)/2 ∓ nu_n/2`.
pub fn lf_partials(
    h: &Hamiltonian,
    s: usize,
    pair: &[(f64, f64)],
    nu_n: f64,
    out_plus: &mut [f64],
    out_minus: &mut [f64],
) {
    let dim = pair.len();
    let mut center = [0.0; 2];
    for (c, &(p, m)) in center.iter_mut().zip(pair) {
        *c = 0.5 * (p + m);
    }
    let mut grad = [0.0; 2];
    h.grad_p(s, &center[..dim], &mut grad[..dim]);
    for j in 0..dim {
        out_plus[j] = 0.5 * grad[j] - 0.5 * nu_n;
        out_minus[j] = 0.5 * grad[j] + 0.5 * nu_n;
    }
}

/// Negative LF partials, `v± = -dH^LF/dp±`; these sum to `-D_pH(p̄)`.
pub fn lf_velocities(
    h: &Hamiltonian,
    s: usize,
    pair: &[(f64, f64)],
    nu_n: f64,
    out_plus: &mut [f64],
    out_minus: &mut [f64],
) {
    lf_partials(h, s, pair, nu_n, out_plus, out_minus);
    out_plus.iter_mut().for_each(|v| *v = -*v);
    out_minus.iter_mut().for_each(|v| *v = -*v);
}

/// Flux-pair velocities for the Fokker-Planck advection,
/// `a± = D_pH_j(p̄) ∓ nu_n` (twice the LF partials). The divergence of the
/// pair `(rho a+, rho a-)` equals advection by `-D_pH(D_x^c phi)` plus the
/// grid-scale diffusion `(nu_n dx / 2) Laplacian`, entrywise.
pub fn lf_flux_velocities(
    h: &Hamiltonian,
    s: usize,
    pair: &[(f64, f64)],
    nu_n: f64,
    out_plus: &mut [f64],
    out_minus: &mut [f64],
) {
    lf_partials(h, s, pair, nu_n, out_plus, out_minus);
    out_plus.iter_mut().for_each(|v| *v *= 2.0);
    out_minus.iter_mut().for_each(|v| *v *= 2.0);
}

/// Kernel samples `K(x_i - y_j)` over all index offsets, per axis.
#[derive(Debug, Clone)]
pub struct SampledKernel {
    n_off: Vec<usize>, // 2 n_x + 1 per axis
    values: Vec<f64>,
}

impl SampledKernel {
    pub fn sample(grid: &GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let dim = grid.dim();
        let n_off: Vec<usize> = (0..dim).map(|j| 2 * grid.axis(j).n_x + 1).collect();
        let total: usize = n_off.iter().product();
        let mut values = Vec::with_capacity(total);
        let mut offs = vec![0usize; dim];
        for flat in 0..total {
            let mut rem = flat;
            for j in 0..dim {
                offs[j] = rem % n_off[j];
                rem /= n_off[j];
            }
            let x: Vec<f64> = (0..dim)
                .map(|j| (offs[j] as isize - grid.axis(j).n_x as isize) as f64 * grid.dx(j))
                .collect();
            values.push(f(&x));
        }
        SampledKernel { n_off, values }
    }

    fn convolve(&self, rho: &[f64], grid: &GridSpec) -> Vec<f64> {
        let dim = grid.dim();
        let ns = grid.n_space();
        let idx: Vec<Vec<usize>> = (0..ns).map(|s| grid.unflatten(s)).collect();
        let w = grid.cell_volume();
        let mut out = vec![0.0; ns];
        for (si, oi) in out.iter_mut().enumerate() {
            let ii = &idx[si];
            let mut acc = 0.0;
            for (sj, &rj) in rho.iter().enumerate() {
                let jj = &idx[sj];
                let mut flat = 0usize;
                let mut stride = 1usize;
                for d in 0..dim {
                    let o = ii[d] + grid.axis(d).n_x - jj[d];
                    flat += o * stride;
                    stride *= self.n_off[d];
                }
                acc += self.values[flat] * rj;
            }
            *oi = w * acc;
        }
        out
    }
}

/// Parameters of the moving-Gaussian moment-quadratic cost family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentParams {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
}

/// Interaction cost kinds and their consistent discretizations.
#[derive(Debug, Clone)]
pub enum CostSpec {
    Zero,
    /// f = a * rho(x) + b(x)
    LocalAffine { a: f64, b: SpatialProfile },
    /// f = c * (K * rho)(x), direct quadrature with weight dx per axis
    Convolution { coeff: f64, kernel: SampledKernel },
    /// f = c * (I - Laplacian)^{-2} rho
    Smoothed { coeff: f64 },
    /// The moving-Gaussian cost in (x, t, mu1, mu2); uses the problem's nu
    MomentQuadratic(MomentParams),
    /// f = value inside |x|^2 <= radius_sq, 0 outside
    Obstacle { value: f64, radius_sq: f64 },
}

/// Terminal cost kinds.
#[derive(Debug, Clone)]
pub enum TerminalCost {
    Zero,
    FixedProfile(SpatialProfile),
    /// eta * (rho_T - target)
    DensityTracking { eta: f64, target: SpatialProfile },
    /// a * rho_T(x)
    LocalAffine { a: f64 },
    /// The moving-Gaussian terminal formula; uses the problem's nu
    MomentQuadratic(MomentParams),
}

impl TerminalCost {
    /// Whether f_T depends on the terminal density.
    pub fn density_dependent(&self) -> bool {
        !matches!(self, TerminalCost::Zero | TerminalCost::FixedProfile(_))
    }
}

/// First and second moments `mu1 = dx sum x_i rho_i`, `mu2 = dx sum x_i^2 rho_i`.
pub fn moments(rho: &[f64], grid: &GridSpec) -> Result<(f64, f64), ProblemError> {
    if grid.dim() != 1 {
        return Err(ProblemError::Grid(GridError::Dimension {
            expected: 1,
            got: grid.dim(),
        }));
    }
    if rho.len() != grid.n_space() {
        return Err(ProblemError::Grid(GridError::Shape {
            expected: grid.n_space(),
            got: rho.len(),
        }));
    }
    let dx = grid.dx(0);
    let mut mu1 = 0.0;
    let mut mu2 = 0.0;
    for (i, &r) in rho.iter().enumerate() {
        let x = grid.axis(0).coord(i);
        mu1 += x * r;
        mu2 += x * x * r;
    }
    Ok((dx * mu1, dx * mu2))
}

/// Solve `(I - Laplacian) u = w` with the Neumann discrete Laplacian.
fn helmholtz_solve(w: &[f64], grid: &GridSpec) -> Result<Vec<f64>, ProblemError> {
    let ns = grid.n_space();
    let dim = grid.dim();
    let bw = grid.stride(dim - 1).max(1);
    let mut a = BandedMatrix::zeros(ns, bw, bw);
    for s in 0..ns {
        a.add(s, s, 1.0);
    }
    for j in 0..dim {
        let stride = grid.stride(j);
        let points = grid.points(j);
        let inv_dx2 = 1.0 / (grid.dx(j) * grid.dx(j));
        for s in 0..ns {
            let i = (s / stride) % points;
            if i == 0 {
                a.add(s, s, inv_dx2);
                a.add(s, s + stride, -inv_dx2);
            } else if i + 1 == points {
                a.add(s, s, inv_dx2);
                a.add(s, s - stride, -inv_dx2);
            } else {
                a.add(s, s, 2.0 * inv_dx2);
                a.add(s, s + stride, -inv_dx2);
                a.add(s, s - stride, -inv_dx2);
            }
        }
    }
    solve_banded(&a, w).map_err(ProblemError::from)
}

/// Evaluate the interaction cost on one density slice at time `t`.
///
/// `nu` is the physical viscosity of the owning problem; only the
/// moment-quadratic kind reads it.
pub fn eval_interaction(
    rho: &[f64],
    t: f64,
    spec: &CostSpec,
    grid: &GridSpec,
    nu: f64,
) -> Result<Vec<f64>, ProblemError> {
    if rho.len() != grid.n_space() {
        return Err(ProblemError::Grid(GridError::Shape {
            expected: grid.n_space(),
            got: rho.len(),
        }));
    }
    match spec {
        CostSpec::Zero => Ok(vec![0.0; rho.len()]),
        CostSpec::LocalAffine { a, b } => Ok(rho
            .iter()
            .zip(b.values())
            .map(|(&r, &bv)| a * r + bv)
            .collect()),
        CostSpec::Convolution { coeff, kernel } => {
            let mut out = kernel.convolve(rho, grid);
            out.iter_mut().for_each(|v| *v *= coeff);
            Ok(out)
        }
        CostSpec::Smoothed { coeff } => {
            let once = helmholtz_solve(rho, grid)?;
            let mut twice = helmholtz_solve(&once, grid)?;
            twice.iter_mut().for_each(|v| *v *= coeff);
            Ok(twice)
        }
        CostSpec::MomentQuadratic(p) => {
            let (mu1, mu2) = moments(rho, grid)?;
            let var = mu2 - mu1 * mu1;
            if var <= 0.0 {
                return Err(ProblemError::DegenerateCost { variance: var });
            }
            let mu_dot = 2.0 * p.a * t + p.b;
            let quad = 0.5 * (p.alpha * p.alpha + nu * nu / (var * var));
            let constant = 0.5 * mu_dot * mu_dot + p.alpha * nu - nu * nu / var;
            Ok((0..grid.n_space())
                .map(|s| {
                    let x = grid.axis(0).coord(s);
                    quad * (x - mu1) * (x - mu1) + 2.0 * p.a * x + constant
                })
                .collect())
        }
        CostSpec::Obstacle { value, radius_sq } => Ok((0..grid.n_space())
            .map(|s| {
                let c = grid.coords(s);
                let r2: f64 = c.iter().map(|v| v * v).sum();
                if r2 <= *radius_sq {
                    *value
                } else {
                    0.0
                }
            })
            .collect()),
    }
}

/// Evaluate the terminal cost on the terminal density slice.
pub fn eval_terminal(
    rho_t: &[f64],
    spec: &TerminalCost,
    grid: &GridSpec,
    nu: f64,
) -> Result<Vec<f64>, ProblemError> {
    if rho_t.len() != grid.n_space() {
        return Err(ProblemError::Grid(GridError::Shape {
            expected: grid.n_space(),
            got: rho_t.len(),
        }));
    }
    match spec {
        TerminalCost::Zero => Ok(vec![0.0; rho_t.len()]),
        TerminalCost::FixedProfile(p) => Ok(p.values().to_vec()),
        TerminalCost::DensityTracking { eta, target } => Ok(rho_t
            .iter()
            .zip(target.values())
            .map(|(&r, &g)| eta * (r - g))
            .collect()),
        TerminalCost::LocalAffine { a } => Ok(rho_t.iter().map(|&r| a * r).collect()),
        TerminalCost::MomentQuadratic(p) => {
            let (mu1, mu2) = moments(rho_t, grid)?;
            let var = mu2 - mu1 * mu1;
            if var <= 0.0 {
                return Err(ProblemError::DegenerateCost { variance: var });
            }
            let t_final = grid.t_final();
            let mu_dot = 2.0 * p.a * t_final + p.b;
            let coef = 0.5 * (p.alpha - nu / var);
            Ok((0..grid.n_space())
                .map(|s| {
                    let x = grid.axis(0).coord(s);
                    -mu_dot * x - coef * (x - mu1) * (x - mu1)
                })
                .collect())
        }
    }
}

/// Gaussian density value.
pub fn gaussian_pdf(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    (-0.5 * z * z).exp() / ((2.0 * std::f64::consts::PI).sqrt() * std)
}

/// Closed-form moving-Gaussian equilibrium: `rho* = N(mu(t), sigma(t))` with
/// `mu = a t^2 + b t + c`, `sigma = sigma0 exp(alpha t)`, and the matching
/// value function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticReference {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub sigma0: f64,
    pub alpha: f64,
    pub nu: f64,
}

impl AnalyticReference {
    pub fn mu(&self, t: f64) -> f64 {
        self.a * t * t + self.b * t + self.c
    }

    pub fn sigma(&self, t: f64) -> f64 {
        self.sigma0 * (self.alpha * t).exp()
    }

    pub fn rho_at(&self, x: f64, t: f64) -> f64 {
        gaussian_pdf(x, self.mu(t), self.sigma(t))
    }

    /// Value function consistent with the Fokker-Planck flow of `rho*`:
    /// the quadratic coefficient carries `nu / sigma^2` (the variance).
    pub fn phi_at(&self, x: f64, t: f64) -> f64 {
        let mu = self.mu(t);
        let sig = self.sigma(t);
        let mu_dot = 2.0 * self.a * t + self.b;
        -mu_dot * x - 0.5 * (self.alpha - self.nu / (sig * sig)) * (x - mu) * (x - mu)
    }

    /// Sample `(rho*, phi*)` on the spatial grid at time `t`.
    pub fn sample(&self, grid: &GridSpec, t: f64) -> (Vec<f64>, Vec<f64>) {
        let rho = (0..grid.n_space())
            .map(|s| self.rho_at(grid.coords(s)[0], t))
            .collect();
        let phi = (0..grid.n_space())
            .map(|s| self.phi_at(grid.coords(s)[0], t))
            .collect();
        (rho, phi)
    }

    /// The full reference density as a space-time field.
    pub fn rho_field(&self, grid: &GridSpec) -> ScalarField {
        ScalarField::from_fn(grid, |s, n| self.rho_at(grid.coords(s)[0], grid.time(n)))
    }
}

/// A fully parameterized MFG instance on one grid.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub grid: GridSpec,
    pub hamiltonian: Hamiltonian,
    pub interaction: CostSpec,
    pub terminal: TerminalCost,
    pub rho0: Vec<f64>,
    pub nu: f64,
    pub nu_n: f64,
    pub reference: Option<AnalyticReference>,
    mass0: f64,
}

impl ProblemSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        grid: GridSpec,
        hamiltonian: Hamiltonian,
        interaction: CostSpec,
        terminal: TerminalCost,
        rho0: Vec<f64>,
        nu: f64,
        nu_n: f64,
        reference: Option<AnalyticReference>,
    ) -> Result<Self, ProblemError> {
        if rho0.len() != grid.n_space() {
            return Err(ProblemError::Grid(GridError::Shape {
                expected: grid.n_space(),
                got: rho0.len(),
            }));
        }
        if rho0.iter().any(|&r| r < 0.0 || !r.is_finite()) {
            return Err(ProblemError::Invalid {
                message: "rho0 must be nonnegative and finite".into(),
            });
        }
        let mass0 = grid.cell_volume() * rho0.iter().sum::<f64>();
        if mass0 <= 0.0 {
            return Err(ProblemError::Invalid {
                message: "rho0 must carry positive mass".into(),
            });
        }
        if nu < 0.0 || nu_n < 0.0 {
            return Err(ProblemError::Invalid {
                message: "viscosities must be nonnegative".into(),
            });
        }
        Ok(ProblemSpec {
            grid,
            hamiltonian,
            interaction,
            terminal,
            rho0,
            nu,
            nu_n,
            reference,
            mass0,
        })
    }

    /// Total initial mass with the per-axis dx quadrature weight.
    pub fn mass0(&self) -> f64 {
        self.mass0
    }

    pub fn interaction_at(&self, rho_slice: &[f64], t: f64) -> Result<Vec<f64>, ProblemError> {
        eval_interaction(rho_slice, t, &self.interaction, &self.grid, self.nu)
    }

    pub fn terminal_at(&self, rho_t: &[f64]) -> Result<Vec<f64>, ProblemError> {
        eval_terminal(rho_t, &self.terminal, &self.grid, self.nu)
    }

    /// Interaction cost evaluated slicewise on every time level of `rho`.
    pub fn interaction_field(&self, rho: &ScalarField) -> Result<ScalarField, ProblemError> {
        if rho.grid() != &self.grid {
            return Err(ProblemError::Grid(GridError::GridMismatch));
        }
        let mut out = ScalarField::zeros(&self.grid);
        for n in 0..=self.grid.n_t() {
            let f = self.interaction_at(rho.slice(n), self.grid.time(n))?;
            out.slice_mut(n).copy_from_slice(&f);
        }
        Ok(out)
    }

    /// Central-gradient drift at each point of a phi slice: `-D_pH(D_x^c phi)`.
    pub fn drift(&self, phi_slice: &[f64]) -> Result<Vec<Vec<f64>>, ProblemError> {
        let pair = ops::one_sided_gradients(phi_slice, &self.grid).map_err(ProblemError::Grid)?;
        let central = ops::central_gradient(&pair);
        let dim = self.grid.dim();
        let ns = self.grid.n_space();
        let mut out = vec![vec![0.0; ns]; dim];
        let mut p = [0.0; 2];
        let mut g = [0.0; 2];
        for s in 0..ns {
            for j in 0..dim {
                p[j] = central[j][s];
            }
            self.hamiltonian.grad_p(s, &p[..dim], &mut g[..dim]);
            for j in 0..dim {
                out[j][s] = -g[j];
            }
        }
        Ok(out)
    }
}
