//! State solver along characteristic lines.
//!
//! The renewal boundary is resolved through the Volterra equation
//! `B(t) = F(t) + int_0^t K(t - s) B(s) ds` with kernel `K = R * D` on
//! `[0, 1]`; the state in the boundary-fed region `a < t` is then assembled
//! from the explicit semigroup representation, and the region `a >= t` from
//! the initial profile transported with decay. On a lattice grid (`dt == da`)
//! every characteristic passes through nodes, so no interpolation is needed.
//!
//! This solver shares no code path with the method-of-lines solver in
//! [`crate::mol`] and serves as its oracle.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{dot, BoundarySeries, Field, Grid};
use crate::model::{check_admissible, ModelParams, Profile, DISCOUNT_PANELS};
use crate::quadrature::{cumulative_trapezoid, trapezoid};

/// Second-kind Volterra convolution equation on `[0, t_max]`.
#[derive(Clone)]
pub struct VolterraProblem {
    pub kernel: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub forcing: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub t_max: f64,
}

impl VolterraProblem {
    pub fn new(
        kernel: impl Fn(f64) -> f64 + Send + Sync + 'static,
        forcing: impl Fn(f64) -> f64 + Send + Sync + 'static,
        t_max: f64,
    ) -> Self {
        VolterraProblem {
            kernel: Arc::new(kernel),
            forcing: Arc::new(forcing),
            t_max,
        }
    }

    /// The renewal problem for the profile `phi`: kernel `R D` and forcing
    /// `F_phi(t) = int_{min(t,1)}^1 phi(s - t) R(s) D(s) / D(s - t) ds`.
    pub fn renewal(
        params: &ModelParams,
        phi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        t_max: f64,
    ) -> Self {
        let kernel = RenewalKernel::new(params);
        let forcing_kernel = kernel.clone();
        VolterraProblem::new(
            move |t| kernel.at(t),
            move |t| {
                if t >= 1.0 {
                    return 0.0;
                }
                let k = &forcing_kernel;
                let panels = (((1.0 - t) * 400.0).ceil() as usize).max(1);
                let h = (1.0 - t) / panels as f64;
                let samples: Vec<f64> = (0..=panels)
                    .map(|j| {
                        let s = (t + j as f64 * h).min(1.0);
                        phi(s - t) * k.at(s) / k.survival(s - t)
                    })
                    .collect();
                trapezoid(&samples, h)
            },
            t_max,
        )
    }
}

/// Samples of a Volterra solution on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryDensity {
    pub dt: f64,
    pub b: Vec<f64>,
    pub db: Option<Vec<f64>>,
}

impl BoundaryDensity {
    pub fn sup_norm(&self) -> f64 {
        self.b.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn at(&self, t: f64) -> f64 {
        let n = self.b.len() - 1;
        let s = (t / self.dt).clamp(0.0, n as f64);
        let k = (s.floor() as usize).min(n.saturating_sub(1));
        let f = s - k as f64;
        if n == 0 {
            return self.b[0];
        }
        (1.0 - f) * self.b[k] + f * self.b[k + 1]
    }
}

/// `R D` with `D` read from a tabulated cumulative depreciation integral.
#[derive(Clone)]
struct RenewalKernel {
    recommendation: Profile,
    log_survival: Arc<Vec<f64>>,
}

impl RenewalKernel {
    fn new(params: &ModelParams) -> Self {
        let n = DISCOUNT_PANELS;
        let delta = params.delta.sample_uniform(n);
        RenewalKernel {
            recommendation: params.recommendation.clone(),
            log_survival: Arc::new(cumulative_trapezoid(&delta, 1.0 / n as f64)),
        }
    }

    fn survival(&self, a: f64) -> f64 {
        let n = self.log_survival.len() - 1;
        let s = a.clamp(0.0, 1.0) * n as f64;
        let k = (s.floor() as usize).min(n - 1);
        let f = s - k as f64;
        (-((1.0 - f) * self.log_survival[k] + f * self.log_survival[k + 1])).exp()
    }

    fn at(&self, t: f64) -> f64 {
        if (0.0..=1.0).contains(&t) {
            self.recommendation.eval(t) * self.survival(t)
        } else {
            0.0
        }
    }
}

/// Trapezoid product-integration of `B = F + K * B` on samples with step `dt`.
///
/// The implicit diagonal term is solved algebraically:
/// `B_m (1 - dt/2 K_0) = F_m + dt (K_m B_0 / 2 + sum_{k=1}^{m-1} K_{m-k} B_k)`.
pub fn volterra_trapezoid(kernel: &[f64], forcing: &[f64], dt: f64) -> Result<Vec<f64>> {
    let n = forcing.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    assert!(kernel.len() >= n, "kernel shorter than forcing");
    let pivot = 1.0 - 0.5 * dt * kernel[0];
    if pivot <= 0.0 {
        return Err(Error::SingularStep { pivot });
    }
    let mut b = Vec::with_capacity(n);
    b.push(forcing[0]);
    for m in 1..n {
        let mut acc = 0.5 * kernel[m] * b[0];
        for k in 1..m {
            acc += kernel[m - k] * b[k];
        }
        b.push((forcing[m] + dt * acc) / pivot);
    }
    Ok(b)
}

/// Max-norm residual of the discrete Volterra equation re-evaluated with the
/// same trapezoid quadrature.
pub fn volterra_residual(kernel: &[f64], forcing: &[f64], b: &[f64], dt: f64) -> f64 {
    (0..b.len())
        .map(|m| {
            let conv: Vec<f64> = (0..=m).map(|k| kernel[m - k] * b[k]).collect();
            (b[m] - forcing[m] - trapezoid(&conv, dt)).abs()
        })
        .fold(0.0, f64::max)
}

/// Solves the problem on `steps` uniform panels of `[0, t_max]`.
pub fn solve_volterra(problem: &VolterraProblem, steps: usize) -> Result<BoundaryDensity> {
    if steps < 2 {
        return Err(Error::InvalidParameter(format!(
            "Volterra solve needs at least 2 steps, got {steps}"
        )));
    }
    let dt = problem.t_max / steps as f64;
    let ts = (0..=steps).map(|m| m as f64 * dt);
    let kernel: Vec<f64> = ts.clone().map(|t| (problem.kernel)(t)).collect();
    let forcing: Vec<f64> = ts.map(|t| (problem.forcing)(t)).collect();
    let b = volterra_trapezoid(&kernel, &forcing, dt)?;
    Ok(BoundaryDensity { dt, b, db: None })
}

/// Derivative `B'_D` of the boundary density generated by `D` itself, on
/// `[0, T]`: the same convolution equation with forcing `-K / mu`.
pub fn derivative_bd(params: &ModelParams, steps: usize) -> Result<BoundaryDensity> {
    let mu = params.renewal_multiplier()?;
    let kernel = RenewalKernel::new(params);
    let forcing = kernel.clone();
    let problem = VolterraProblem::new(
        move |t| kernel.at(t),
        move |t| -forcing.at(t) / mu,
        params.horizon,
    );
    let sol = solve_volterra(&problem, steps)?;
    Ok(BoundaryDensity {
        dt: sol.dt,
        b: Vec::new(),
        db: Some(sol.b),
    })
}

/// Characteristic-line state together with the diagnostic jump across `t = a`.
#[derive(Debug, Clone)]
pub struct CharacteristicSolution {
    pub g: Field,
    /// Largest gap between the initial-data and boundary-fed representations
    /// on the diagonal nodes `t_i = a_i`, `i >= 1`.
    pub diagonal_jump: f64,
}

/// Lattice data shared by every node of the assembly.
struct Lattice {
    n: usize,
    m: usize,
    h: f64,
    d: Vec<f64>,
    kernel: Vec<f64>,
    recommendation: Vec<f64>,
}

impl Lattice {
    fn new(params: &ModelParams, grid: &Grid) -> Self {
        let n = grid.n_space();
        let m = grid.n_time();
        let d = params.discount_nodes(n);
        let recommendation = params.recommendation.sample(grid);
        let kernel = (0..=m)
            .map(|k| {
                if k <= n {
                    recommendation[k] * d[k]
                } else {
                    0.0
                }
            })
            .collect();
        Lattice {
            n,
            m,
            h: grid.da(),
            d,
            kernel,
            recommendation,
        }
    }

    /// `F_phi(t_k)` for `k = 0..=len-1`, trapezoid over `s = a_k .. a_N`.
    fn forcing(&self, phi: &[f64], len: usize) -> Vec<f64> {
        (0..len)
            .map(|k| {
                if k >= self.n {
                    return 0.0;
                }
                let samples: Vec<f64> = (k..=self.n)
                    .map(|i| phi[i - k] * self.recommendation[i] * self.d[i] / self.d[i - k])
                    .collect();
                trapezoid(&samples, self.h)
            })
            .collect()
    }

    fn boundary_density(&self, phi: &[f64], len: usize) -> Result<Vec<f64>> {
        volterra_trapezoid(&self.kernel, &self.forcing(phi, len), self.h)
    }
}

/// Assembles `G` on a lattice grid from the characteristic representation.
pub fn solve_state_characteristics(
    params: &ModelParams,
    grid: &Grid,
    u: &Field,
    u0: &BoundarySeries,
) -> Result<CharacteristicSolution> {
    params.validate_on(grid)?;
    if !grid.is_lattice() {
        return Err(Error::GridMismatch(format!(
            "characteristic solver needs dt == da, got dt = {}, da = {}",
            grid.dt(),
            grid.da()
        )));
    }
    check_admissible(params, grid, u, u0)?;
    let mu = params.renewal_multiplier_with(grid.n_space())?;
    let lat = Lattice::new(params, grid);
    let (n, m, h) = (lat.n, lat.m, lat.h);

    let up = u.map(|x| x.powf(params.rho));
    let g0 = params.initial_goodwill.sample(grid);
    let w = params.aggregate_boundary_control(grid, u, u0)?;

    let b_g0 = lat.boundary_density(&g0, m + 1)?;
    let db: Vec<f64> = {
        let forcing: Vec<f64> = lat.kernel.iter().map(|k| -k / mu).collect();
        volterra_trapezoid(&lat.kernel, &forcing, h)?
    };
    // one renewal solve per time node for the distributed control profile
    let b_u: Vec<Vec<f64>> = (0..=m)
        .into_par_iter()
        .map(|k| lat.boundary_density(up.row(k), m - k + 1))
        .collect::<Result<_>>()?;

    // boundary-fed terms depending on tau = t - a only
    let control_b: Vec<f64> = (0..=m)
        .map(|nn| {
            let s: Vec<f64> = (0..=nn).map(|r| b_u[nn - r][r]).collect();
            trapezoid(&s, h)
        })
        .collect();
    let lift: Vec<f64> = (0..=m)
        .map(|nn| {
            let s: Vec<f64> = (0..=nn).map(|k| db[nn - k] * w.get(k)).collect();
            w.get(nn) - mu * trapezoid(&s, h)
        })
        .collect();

    // boundary-fed representation at (t_j, a_i), j >= i, with tau = t_{j-i}
    let boundary_branch = |j: usize, i: usize| {
        let tau = j - i;
        let along: Vec<f64> = (0..=i).map(|r| up.get(tau + r, r) / lat.d[r]).collect();
        lat.d[i] * (b_g0[tau] + trapezoid(&along, h) + control_b[tau] + lift[tau])
    };
    // initial-data representation at (t_j, a_i), i >= j
    let initial_branch = |j: usize, i: usize| {
        let p = i - j;
        let along: Vec<f64> = (0..=j)
            .map(|s| up.get(s, p + s) * lat.d[i] / lat.d[p + s])
            .collect();
        lat.d[i] / lat.d[p] * g0[p] + trapezoid(&along, h)
    };

    let mut g = grid.zero_field();
    let mut diagonal_jump: f64 = 0.0;
    for j in 0..=m {
        for i in 0..=n {
            let value = if i == 0 || i < j {
                boundary_branch(j, i)
            } else {
                if i == j {
                    diagonal_jump =
                        diagonal_jump.max((initial_branch(j, i) - boundary_branch(j, i)).abs());
                }
                initial_branch(j, i)
            };
            g.set(j, i, value);
        }
    }
    if !g.is_finite() {
        return Err(Error::NonFinite("characteristic solver"));
    }
    Ok(CharacteristicSolution { g, diagonal_jump })
}

/// Per-time-node residual of the renewal identity
/// `G(t, 0) = int R G da + int u^rho da + u0^rho`, trapezoid over all nodes.
pub fn boundary_identity_residual(
    params: &ModelParams,
    grid: &Grid,
    g: &Field,
    u: &Field,
    u0: &BoundarySeries,
) -> Result<Vec<f64>> {
    g.ensure_on(grid, "G")?;
    let w = params.aggregate_boundary_control(grid, u, u0)?;
    let r = params.recommendation.sample(grid);
    let wa = grid.space_weights();
    Ok((0..=grid.n_time())
        .map(|j| {
            let rg: Vec<f64> = g.row(j).iter().zip(&r).map(|(g, r)| g * r).collect();
            (g.get(j, 0) - dot(&rg, &wa) - w.get(j)).abs()
        })
        .collect())
}
