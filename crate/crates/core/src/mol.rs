//! Method-of-lines discretization of the coupled state/adjoint system.
//!
//! Space is discretized with an upwind difference for the state and a
//! forward difference for the costate on the uniform grid; the resulting
//! ODE systems are integrated with classical RK4 at the grid's time step.
//! The boundary node `G_0` is algebraic and is recomputed at every stage.

use crate::error::{Error, Result};
use crate::grid::{dot, BoundarySeries, Field, Grid};
use crate::model::{check_admissible, ModelParams};

/// Below this goodwill level the costate source `G^(gamma - 1)` is treated as singular.
pub const STATE_FLOOR: f64 = 1e-12;

/// Forward MOL state. Column 0 holds the algebraic boundary node.
#[derive(Debug, Clone)]
pub struct MolState {
    pub g: Field,
}

impl MolState {
    pub fn boundary(&self) -> BoundarySeries {
        self.g.column(0)
    }
}

/// Backward MOL costate; `xi(t, 1) = 0` and `xi(T, a) = 0`.
#[derive(Debug, Clone)]
pub struct MolAdjoint {
    pub xi: Field,
}

impl MolAdjoint {
    pub fn boundary(&self) -> BoundarySeries {
        self.xi.column(0)
    }
}

/// Trapezoid over nodes `a_1 .. a_N` of `R_i G_i + u_i^rho`, plus `u0^rho`.
pub fn boundary_value(da: f64, recommendation: &[f64], g: &[f64], up: &[f64], u0p: f64) -> f64 {
    let n = g.len() - 1;
    let f = |i: usize| recommendation[i] * g[i] + up[i];
    let inner: f64 = (2..n).map(f).sum();
    da * (0.5 * f(1) + inner + 0.5 * f(n)) + u0p
}

struct StateRhs<'a> {
    da: f64,
    delta: &'a [f64],
    recommendation: &'a [f64],
}

impl StateRhs<'_> {
    /// Sets the boundary node of `y` and writes the derivative into `out`.
    fn eval(&self, y: &mut [f64], up: &[f64], u0p: f64, out: &mut [f64]) {
        y[0] = boundary_value(self.da, self.recommendation, y, up, u0p);
        out[0] = 0.0;
        let inv = 1.0 / self.da;
        for i in 1..y.len() {
            out[i] = -y[i] * (self.delta[i] + inv) + y[i - 1] * inv + up[i];
        }
    }
}

/// Integrates the state rows forward from `G(0, a_i) = G0(a_i)`.
pub fn forward_state(
    params: &ModelParams,
    grid: &Grid,
    u: &Field,
    u0: &BoundarySeries,
) -> Result<MolState> {
    params.validate_on(grid)?;
    check_admissible(params, grid, u, u0)?;
    let n = grid.n_space();
    let dt = grid.dt();
    let delta = params.delta.sample(grid);
    let recommendation = params.recommendation.sample(grid);
    let rhs = StateRhs {
        da: grid.da(),
        delta: &delta,
        recommendation: &recommendation,
    };
    let up = u.map(|x| x.powf(params.rho));
    let u0p = u0.map(|x| x.powf(params.rho));

    let mut g = grid.zero_field();
    let mut y = params.initial_goodwill.sample(grid);
    y[0] = boundary_value(grid.da(), &recommendation, &y, up.row(0), u0p.get(0));
    g.row_mut(0).copy_from_slice(&y);

    let mut stage = vec![0.0; n + 1];
    let mut k = [
        vec![0.0; n + 1],
        vec![0.0; n + 1],
        vec![0.0; n + 1],
        vec![0.0; n + 1],
    ];
    let mut up_mid = vec![0.0; n + 1];
    for j in 0..grid.n_time() {
        let (up_a, up_b) = (up.row(j), up.row(j + 1));
        for i in 0..=n {
            up_mid[i] = 0.5 * (up_a[i] + up_b[i]);
        }
        let u0p_mid = 0.5 * (u0p.get(j) + u0p.get(j + 1));

        stage.copy_from_slice(&y);
        rhs.eval(&mut stage, up_a, u0p.get(j), &mut k[0]);
        for (s, (yi, ki)) in stage.iter_mut().zip(y.iter().zip(&k[0])) {
            *s = yi + 0.5 * dt * ki;
        }
        rhs.eval(&mut stage, &up_mid, u0p_mid, &mut k[1]);
        for (s, (yi, ki)) in stage.iter_mut().zip(y.iter().zip(&k[1])) {
            *s = yi + 0.5 * dt * ki;
        }
        rhs.eval(&mut stage, &up_mid, u0p_mid, &mut k[2]);
        for (s, (yi, ki)) in stage.iter_mut().zip(y.iter().zip(&k[2])) {
            *s = yi + dt * ki;
        }
        rhs.eval(&mut stage, up_b, u0p.get(j + 1), &mut k[3]);
        for i in 1..=n {
            y[i] += dt / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
        }
        y[0] = boundary_value(grid.da(), &recommendation, &y, up_b, u0p.get(j + 1));
        g.row_mut(j + 1).copy_from_slice(&y);
    }
    if !g.is_finite() {
        return Err(Error::NonFinite("forward_state"));
    }
    Ok(MolState { g })
}

struct AdjointRhs<'a> {
    da: f64,
    delta: &'a [f64],
    recommendation: &'a [f64],
    revenue_coeff: f64,
    gamma: f64,
    discount_rate: f64,
}

impl AdjointRhs<'_> {
    fn eval(&self, t: f64, xi: &[f64], g: &[f64], out: &mut [f64]) {
        let n = xi.len() - 1;
        let inv = 1.0 / self.da;
        let scale = self.revenue_coeff * (-self.discount_rate * t).exp() * self.gamma;
        for i in 0..n {
            let source = if self.gamma == 1.0 {
                scale
            } else {
                scale * g[i].powf(self.gamma - 1.0)
            };
            out[i] = source - xi[0] * self.recommendation[i] + xi[i] * (self.delta[i] + inv)
                - xi[i + 1] * inv;
        }
        out[n] = 0.0;
    }
}

/// Integrates the costate rows `i = 0 .. N-1` backward from `xi(T) = 0`,
/// with `xi_N = 0`. The row at `i = 0` uses the same forward difference.
pub fn backward_adjoint(params: &ModelParams, grid: &Grid, state: &MolState) -> Result<MolAdjoint> {
    let g = &state.g;
    g.ensure_on(grid, "state")?;
    if !g.is_finite() {
        return Err(Error::NonFinite("state passed to backward_adjoint"));
    }
    if params.gamma < 1.0 {
        for j in 0..=grid.n_time() {
            for (i, &v) in g.row(j).iter().enumerate() {
                if v <= STATE_FLOOR {
                    return Err(Error::SingularState {
                        value: v,
                        t: grid.t(j),
                        a: grid.a(i),
                    });
                }
            }
        }
    }
    let n = grid.n_space();
    let dt = grid.dt();
    let delta = params.delta.sample(grid);
    let recommendation = params.recommendation.sample(grid);
    let rhs = AdjointRhs {
        da: grid.da(),
        delta: &delta,
        recommendation: &recommendation,
        revenue_coeff: params.revenue_coeff,
        gamma: params.gamma,
        discount_rate: params.discount_rate,
    };

    let mut xi = grid.zero_field();
    let mut y = vec![0.0; n + 1];
    let mut stage = vec![0.0; n + 1];
    let mut g_mid = vec![0.0; n + 1];
    let mut k = [
        vec![0.0; n + 1],
        vec![0.0; n + 1],
        vec![0.0; n + 1],
        vec![0.0; n + 1],
    ];
    for j in (1..=grid.n_time()).rev() {
        let (g_hi, g_lo) = (g.row(j), g.row(j - 1));
        for i in 0..=n {
            g_mid[i] = 0.5 * (g_hi[i] + g_lo[i]);
        }
        let (t_hi, t_mid, t_lo) = (grid.t(j), grid.t(j) - 0.5 * dt, grid.t(j - 1));

        rhs.eval(t_hi, &y, g_hi, &mut k[0]);
        for (s, (yi, ki)) in stage.iter_mut().zip(y.iter().zip(&k[0])) {
            *s = yi - 0.5 * dt * ki;
        }
        rhs.eval(t_mid, &stage, &g_mid, &mut k[1]);
        for (s, (yi, ki)) in stage.iter_mut().zip(y.iter().zip(&k[1])) {
            *s = yi - 0.5 * dt * ki;
        }
        rhs.eval(t_mid, &stage, &g_mid, &mut k[2]);
        for (s, (yi, ki)) in stage.iter_mut().zip(y.iter().zip(&k[2])) {
            *s = yi - dt * ki;
        }
        rhs.eval(t_lo, &stage, g_lo, &mut k[3]);
        for i in 0..n {
            y[i] -= dt / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
        }
        xi.row_mut(j - 1).copy_from_slice(&y);
    }
    if !xi.is_finite() {
        return Err(Error::NonFinite("backward_adjoint"));
    }
    Ok(MolAdjoint { xi })
}

/// Pointwise gradient densities of `J` with respect to `u` and `u0`.
#[derive(Debug, Clone)]
pub struct Gradient {
    pub u: Field,
    pub u0: BoundarySeries,
}

impl Gradient {
    /// Trapezoid-weighted pairing with a direction `(h, h0)`.
    pub fn directional(&self, grid: &Grid, h: &Field, h0: &BoundarySeries) -> f64 {
        let wa = grid.space_weights();
        let wt = grid.time_weights();
        (0..=grid.n_time())
            .map(|j| {
                let prod: Vec<f64> = self
                    .u
                    .row(j)
                    .iter()
                    .zip(h.row(j))
                    .map(|(g, h)| g * h)
                    .collect();
                wt[j] * (dot(&prod, &wa) + self.u0.get(j) * h0.get(j))
            })
            .sum()
    }
}

/// Adjoint-based gradient: `-e^{-rt} beta u - rho u^(rho-1) (xi(t,a) + xi(t,0))`
/// for the distributed control and `-e^{-rt} beta u0 - rho u0^(rho-1) xi(t,0)`
/// for the boundary control. Requires `u, u0 > 0` when `rho < 1`.
pub fn adjoint_gradient(
    params: &ModelParams,
    grid: &Grid,
    u: &Field,
    u0: &BoundarySeries,
    adjoint: &MolAdjoint,
) -> Result<Gradient> {
    u.ensure_on(grid, "u")?;
    u0.ensure_on(grid, "u0")?;
    adjoint.xi.ensure_on(grid, "xi")?;
    let (rho, beta, r) = (params.rho, params.beta, params.discount_rate);
    let marginal = |x: f64| {
        if rho == 1.0 {
            1.0
        } else {
            rho * x.powf(rho - 1.0)
        }
    };
    let mut gu = grid.zero_field();
    let mut gu0 = grid.zero_series();
    for j in 0..=grid.n_time() {
        let disc = (-r * grid.t(j)).exp();
        let xi0 = adjoint.xi.get(j, 0);
        for i in 0..=grid.n_space() {
            let x = u.get(j, i);
            gu.set(
                j,
                i,
                -disc * beta * x - marginal(x) * (adjoint.xi.get(j, i) + xi0),
            );
        }
        let x0 = u0.get(j);
        gu0.values_mut()[j] = -disc * beta * x0 - marginal(x0) * xi0;
    }
    if !(gu.is_finite() && gu0.is_finite()) {
        return Err(Error::NonFinite(
            "adjoint_gradient (control at zero with rho < 1?)",
        ));
    }
    Ok(Gradient { u: gu, u0: gu0 })
}
