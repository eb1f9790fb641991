//! Forward-backward sweep on the optimality system.
//!
//! Each sweep solves the state forward, the costate backward, maps the
//! costate through the pointwise maximizers of the Hamiltonians and relaxes
//! towards the result. The iteration runs on a coarse-to-fine sequence of
//! grids, handing the converged controls to the next level by bilinear
//! interpolation.

use crate::error::{Error, Result};
use crate::grid::{dot, BoundarySeries, Field, Grid};
use crate::model::ModelParams;
use crate::mol::{backward_adjoint, forward_state, MolAdjoint, MolState};
use crate::objective;

/// Distributed control `u` and boundary control `u0` on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPair {
    pub u: Field,
    pub u0: BoundarySeries,
}

impl ControlPair {
    pub fn zero(grid: &Grid) -> Self {
        ControlPair {
            u: grid.zero_field(),
            u0: grid.zero_series(),
        }
    }

    pub fn constant(grid: &Grid, u: f64, u0: f64) -> Self {
        ControlPair {
            u: Field::filled(grid, u),
            u0: BoundarySeries::filled(grid, u0),
        }
    }

    /// Discrete `L^2` norm over `[0,T] x [0,1]` for `u` and `[0,T]` for `u0`.
    pub fn norm(&self, grid: &Grid) -> f64 {
        let wa = grid.space_weights();
        let wt = grid.time_weights();
        (0..=grid.n_time())
            .map(|j| {
                let sq: Vec<f64> = self.u.row(j).iter().map(|x| x * x).collect();
                wt[j] * (dot(&sq, &wa) + self.u0.get(j) * self.u0.get(j))
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn distance(&self, other: &ControlPair, grid: &Grid) -> f64 {
        ControlPair {
            u: self.u.zip_with(&other.u, |a, b| a - b),
            u0: BoundarySeries::new(
                self.u0
                    .values()
                    .iter()
                    .zip(other.u0.values())
                    .map(|(a, b)| a - b)
                    .collect(),
            ),
        }
        .norm(grid)
    }

    fn resample(&self, from: &Grid, to: &Grid) -> ControlPair {
        ControlPair {
            u: self.u.resample(from, to),
            u0: self.u0.resample(from, to),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    /// Weight of the new candidate: `u' = w * candidate + (1 - w) * u`.
    pub relaxation: f64,
    pub tol_control: f64,
    pub max_iters: usize,
    /// Coarse to fine.
    pub levels: Vec<Grid>,
}

impl SweepConfig {
    /// `w = 0.5`, `tol = 1e-6`, 500 sweeps, levels `N = 10, 25, 50` with `dt == da`.
    pub fn default_for(horizon: f64) -> Result<Self> {
        Ok(SweepConfig {
            relaxation: 0.5,
            tol_control: 1e-6,
            max_iters: 500,
            levels: [10, 25, 50]
                .iter()
                .map(|&n| Grid::matched(n, horizon))
                .collect::<Result<_>>()?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "relaxation = {} not in (0, 1]",
                self.relaxation
            )));
        }
        if self.tol_control.is_nan() || self.tol_control <= 0.0 {
            return Err(Error::InvalidParameter("tol_control must be > 0".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        if self.levels.is_empty() {
            return Err(Error::InvalidParameter("no refinement levels".into()));
        }
        for pair in self.levels.windows(2) {
            if pair[1].n_space() <= pair[0].n_space() || pair[1].n_time() <= pair[0].n_time() {
                return Err(Error::InvalidParameter(
                    "refinement levels must strictly increase in N and M".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Pointwise maximizer of the Hamiltonian for costate sum `s`:
/// `s = xi(t,0)` for the boundary control, `s = xi(t,0) + xi(t,a)` for the
/// distributed one. Always in `[0, I]`.
pub fn control_from_costate(params: &ModelParams, t: f64, xi0: f64, xia: Option<f64>) -> f64 {
    let s = xi0 + xia.unwrap_or(0.0);
    if s >= 0.0 {
        return 0.0;
    }
    let rho = params.rho;
    let interior =
        (-(rho / params.beta) * (params.discount_rate * t).exp() * s).powf(1.0 / (2.0 - rho));
    interior.min(params.max_intensity)
}

/// Controls obtained by applying [`control_from_costate`] at every node.
pub fn candidate_controls(params: &ModelParams, grid: &Grid, adjoint: &MolAdjoint) -> ControlPair {
    let xi = &adjoint.xi;
    let mut u = grid.zero_field();
    let mut u0 = grid.zero_series();
    for j in 0..=grid.n_time() {
        let t = grid.t(j);
        let xi0 = xi.get(j, 0);
        for i in 0..=grid.n_space() {
            u.set(
                j,
                i,
                control_from_costate(params, t, xi0, Some(xi.get(j, i))),
            );
        }
        u0.values_mut()[j] = control_from_costate(params, t, xi0, None);
    }
    ControlPair { u, u0 }
}

/// Outcome of one sweep.
#[derive(Debug, Clone)]
pub struct SweepStep {
    pub controls: ControlPair,
    /// `||new - old|| / (1 + ||old||)` in discrete `L^2`.
    pub change: f64,
    /// `J` at the incoming controls.
    pub objective: f64,
    pub state: MolState,
    pub adjoint: MolAdjoint,
}

pub fn sweep_once(
    params: &ModelParams,
    grid: &Grid,
    controls: &ControlPair,
    relaxation: f64,
) -> Result<SweepStep> {
    let state = forward_state(params, grid, &controls.u, &controls.u0)?;
    let objective = objective::evaluate(params, grid, &state.g, &controls.u, &controls.u0)?.total;
    let adjoint = backward_adjoint(params, grid, &state)?;
    let candidate = candidate_controls(params, grid, &adjoint);
    let mix = |new: f64, old: f64| relaxation * new + (1.0 - relaxation) * old;
    let next = ControlPair {
        u: candidate.u.zip_with(&controls.u, mix),
        u0: BoundarySeries::new(
            candidate
                .u0
                .values()
                .iter()
                .zip(controls.u0.values())
                .map(|(&n, &o)| mix(n, o))
                .collect(),
        ),
    };
    let change = next.distance(controls, grid) / (1.0 + controls.norm(grid));
    Ok(SweepStep {
        controls: next,
        change,
        objective,
        state,
        adjoint,
    })
}

/// Converged optimality system on the finest grid plus diagnostics.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub grid: Grid,
    pub g_star: Field,
    pub xi: Field,
    pub u_star: Field,
    pub u0_star: BoundarySeries,
    pub j_star: f64,
    pub j_zero: f64,
    pub iterations_per_level: Vec<usize>,
    pub final_control_change: f64,
    pub max_u: f64,
    pub max_u0: f64,
    pub max_g: f64,
    /// `J` at the input of every sweep, one list per level.
    pub objective_history: Vec<Vec<f64>>,
    pub converged: bool,
}

impl SolveReport {
    pub fn total_iterations(&self) -> usize {
        self.iterations_per_level.iter().sum()
    }

    pub fn relative_gain(&self) -> f64 {
        (self.j_star - self.j_zero) / self.j_zero
    }

    pub fn controls(&self) -> ControlPair {
        ControlPair {
            u: self.u_star.clone(),
            u0: self.u0_star.clone(),
        }
    }
}

fn guess_grid(guess: &ControlPair, horizon: f64) -> Result<Grid> {
    Grid::new(guess.u.n_space(), guess.u.n_time(), horizon)
}

/// Coarse-to-fine sweeping from `initial_guess` (zero controls by default).
pub fn solve(
    params: &ModelParams,
    config: &SweepConfig,
    initial_guess: Option<ControlPair>,
) -> Result<SolveReport> {
    config.validate()?;
    params.validate()?;
    params.renewal_multiplier()?;

    let first = config.levels[0];
    let mut controls = match initial_guess {
        None => ControlPair::zero(&first),
        Some(guess) => {
            if guess.u.matches(&first) {
                guess
            } else {
                let from = guess_grid(&guess, params.horizon)?;
                guess.resample(&from, &first)
            }
        }
    };

    let mut iterations_per_level = Vec::with_capacity(config.levels.len());
    let mut objective_history = Vec::with_capacity(config.levels.len());
    let mut change = f64::INFINITY;
    let mut prev: Option<Grid> = None;
    for grid in &config.levels {
        params.validate_on(grid)?;
        if let Some(from) = prev {
            controls = controls.resample(&from, grid);
        }
        let mut history = Vec::new();
        let mut iters = 0;
        change = f64::INFINITY;
        while iters < config.max_iters {
            let step = sweep_once(params, grid, &controls, config.relaxation)?;
            history.push(step.objective);
            controls = step.controls;
            change = step.change;
            iters += 1;
            if change < config.tol_control {
                break;
            }
        }
        iterations_per_level.push(iters);
        objective_history.push(history);
        prev = Some(*grid);
    }

    let grid = *config.levels.last().expect("validated non-empty");
    let state = forward_state(params, &grid, &controls.u, &controls.u0)?;
    let adjoint = backward_adjoint(params, &grid, &state)?;
    let j_star = objective::evaluate(params, &grid, &state.g, &controls.u, &controls.u0)?.total;
    let zero = ControlPair::zero(&grid);
    let zero_state = forward_state(params, &grid, &zero.u, &zero.u0)?;
    let j_zero = objective::evaluate(params, &grid, &zero_state.g, &zero.u, &zero.u0)?.total;

    let converged = change < config.tol_control;
    let report = SolveReport {
        grid,
        max_u: controls.u.max(),
        max_u0: controls.u0.max(),
        max_g: state.g.max(),
        g_star: state.g,
        xi: adjoint.xi,
        u_star: controls.u,
        u0_star: controls.u0,
        j_star,
        j_zero,
        iterations_per_level,
        final_control_change: change,
        objective_history,
        converged,
    };
    if converged {
        Ok(report)
    } else {
        Err(Error::NoConvergence(Box::new(report)))
    }
}
