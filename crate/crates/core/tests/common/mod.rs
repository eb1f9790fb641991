#![allow(dead_code)]

use goodwill_core::mol::{adjoint_gradient, backward_adjoint, forward_state};
use goodwill_core::objective;
use goodwill_core::{BoundarySeries, ControlPair, Field, Grid, ModelParams, Profile};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::f64::consts::PI;

/// `(rho, eps_g)` for the four low-quality presets, in reference order.
pub const PRESET_PAIRS: [(f64, f64); 4] = [(0.5, 0.1), (0.5, 1.0), (1.0, 0.1), (1.0, 1.0)];

/// Closed-form survival factor of the preset depreciation rate:
/// `int_0^a delta = a - c (1 - e^-a)` with `c = 0.5 / (1 - e^-1)`.
pub fn preset_survival(a: f64) -> f64 {
    let c = 0.5 / (1.0 - (-1.0f64).exp());
    (-a + c * (1.0 - (-a).exp())).exp()
}

pub fn preset_recommendation(a: f64) -> f64 {
    0.6 - (3.0 / 21.0) * a.sqrt()
}

/// Composite Simpson on `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    assert!(n.is_multiple_of(2));
    let h = (hi - lo) / n as f64;
    let mut s = f(lo) + f(hi);
    for k in 1..n {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(lo + k as f64 * h);
    }
    s * h / 3.0
}

/// `int_0^1 R D` for the preset profiles, 10^4-panel Simpson on the closed form.
pub fn golden_stability_integral() -> f64 {
    simpson(
        |a| preset_recommendation(a) * preset_survival(a),
        0.0,
        1.0,
        10_000,
    )
}

/// Smooth test controls `u = 0.2 (1 + a)(1 + t)`, `u0 = 0.1`.
pub fn smooth_controls(grid: &Grid) -> ControlPair {
    ControlPair {
        u: Field::from_fn(grid, |t, a| 0.2 * (1.0 + a) * (1.0 + t)),
        u0: BoundarySeries::filled(grid, 0.1),
    }
}

/// Trapezoid-weighted `L^2` distance of two fields on `[0,T] x [0,1]`.
pub fn l2_distance(grid: &Grid, a: &Field, b: &Field) -> f64 {
    a.zip_with(b, |x, y| (x - y) * (x - y))
        .integrate(grid)
        .sqrt()
}

pub fn objective_at(params: &ModelParams, grid: &Grid, c: &ControlPair) -> f64 {
    let state = forward_state(params, grid, &c.u, &c.u0).expect("forward solve");
    objective::evaluate(params, grid, &state.g, &c.u, &c.u0)
        .expect("objective")
        .total
}

/// A smooth, positively biased perturbation direction.
pub fn smooth_direction(grid: &Grid, rng: &mut StdRng) -> ControlPair {
    let c: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ControlPair {
        u: Field::from_fn(grid, |t, a| {
            1.0 + 0.5
                * (c[0] * (PI * t).cos()
                    + c[1] * (PI * a).cos()
                    + c[2] * (PI * t).cos() * (PI * a).cos())
        }),
        u0: BoundarySeries::from_fn(grid, |t| {
            1.0 + 0.5 * (c[3] * (PI * t).cos() + c[4] * (PI * t).sin())
        }),
    }
}

pub fn shifted(c: &ControlPair, h: &ControlPair, eps: f64) -> ControlPair {
    ControlPair {
        u: c.u.zip_with(&h.u, |x, d| x + eps * d),
        u0: BoundarySeries::new(
            c.u0.values()
                .iter()
                .zip(h.u0.values())
                .map(|(x, d)| x + eps * d)
                .collect(),
        ),
    }
}

pub fn midpoint(a: &ControlPair, b: &ControlPair) -> ControlPair {
    ControlPair {
        u: a.u.zip_with(&b.u, |x, y| 0.5 * (x + y)),
        u0: BoundarySeries::new(
            a.u0.values()
                .iter()
                .zip(b.u0.values())
                .map(|(x, y)| 0.5 * (x + y))
                .collect(),
        ),
    }
}

/// Worst relative error between central finite differences of `J` (step
/// `eps`) and the adjoint directional derivative over `directions` random
/// smooth directions.
pub fn gradient_check(
    params: &ModelParams,
    grid: &Grid,
    at: &ControlPair,
    directions: usize,
    eps: f64,
    seed: u64,
) -> f64 {
    let state = forward_state(params, grid, &at.u, &at.u0).unwrap();
    let adjoint = backward_adjoint(params, grid, &state).unwrap();
    let grad = adjoint_gradient(params, grid, &at.u, &at.u0, &adjoint).unwrap();
    let mut rng = StdRng::seed_from_u64(seed);
    (0..directions)
        .map(|_| {
            let h = smooth_direction(grid, &mut rng);
            let fd = (objective_at(params, grid, &shifted(at, &h, eps))
                - objective_at(params, grid, &shifted(at, &h, -eps)))
                / (2.0 * eps);
            let adj = grad.directional(grid, &h.u, &h.u0);
            (fd - adj).abs() / fd.abs()
        })
        .fold(0.0, f64::max)
}

/// Random nodal controls uniform in `[0, hi]`.
pub fn random_controls(grid: &Grid, hi: f64, rng: &mut StdRng) -> ControlPair {
    let rows = (0..=grid.n_time())
        .map(|_| {
            (0..=grid.n_space())
                .map(|_| rng.gen_range(0.0..=hi))
                .collect()
        })
        .collect();
    ControlPair {
        u: Field::from_rows(rows).unwrap(),
        u0: BoundarySeries::new(
            (0..=grid.n_time())
                .map(|_| rng.gen_range(0.0..=hi))
                .collect(),
        ),
    }
}

/// A model with constant `R`, constant `delta` and constant `G0`.
pub fn constant_model(r: f64, d: f64, g0: f64) -> ModelParams {
    ModelParams {
        recommendation: Profile::Constant(r),
        delta: Profile::Constant(d),
        initial_goodwill: Profile::Constant(g0),
        ..ModelParams::low_quality(1.0, 1.0)
    }
}
