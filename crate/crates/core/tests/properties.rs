mod common;

use common::*;
use goodwill_core::characteristic::{
    solve_state_characteristics, solve_volterra, volterra_residual, volterra_trapezoid,
    VolterraProblem,
};
use goodwill_core::mol::{backward_adjoint, boundary_value, forward_state};
use goodwill_core::objective;
use goodwill_core::sweep::{control_from_costate, sweep_once};
use goodwill_core::{BoundarySeries, ControlPair, Field, Grid, ModelParams, Profile};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn nodes(lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, 2..12)
}

fn preset_pair() -> impl Strategy<Value = (f64, f64)> {
    prop::sample::select(PRESET_PAIRS.to_vec())
}

fn controls_from_seed(grid: &Grid, hi: f64, seed: u64) -> ControlPair {
    random_controls(grid, hi, &mut StdRng::seed_from_u64(seed))
}

fn sup_diff(a: &Field, b: &Field) -> f64 {
    a.zip_with(b, |x, y| (x - y).abs()).max()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn survival_starts_at_one_and_never_increases(delta in nodes(0.0, 3.0), n in 4usize..200) {
        let p = ModelParams { delta: Profile::Samples(delta), ..ModelParams::low_quality(1.0, 1.0) };
        let d = p.discount_nodes(n);
        prop_assert_eq!(d[0], 1.0);
        prop_assert!(d.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(p.discount_factor(0.0), 1.0);
    }

    #[test]
    fn multiplier_is_at_least_one(rec in nodes(0.0, 0.9), delta in nodes(0.0, 2.0)) {
        let p = ModelParams {
            recommendation: Profile::Samples(rec),
            delta: Profile::Samples(delta),
            ..ModelParams::low_quality(1.0, 1.0)
        };
        let mu = p.renewal_multiplier().unwrap();
        prop_assert!(mu >= 1.0);
    }

    #[test]
    fn multiplier_is_one_without_recommendation(delta in nodes(0.0, 2.0)) {
        let p = ModelParams {
            recommendation: Profile::Constant(0.0),
            delta: Profile::Samples(delta),
            ..ModelParams::low_quality(1.0, 1.0)
        };
        prop_assert!((p.renewal_multiplier().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn aggregate_control_is_monotone(seed in any::<u64>(), bump in 0.0..1.0f64, rho in prop::sample::select(vec![0.5, 1.0])) {
        let p = ModelParams::low_quality(rho, 1.0);
        let grid = Grid::matched(12, 1.0).unwrap();
        let low = controls_from_seed(&grid, 1.0, seed);
        let extra = controls_from_seed(&grid, bump, seed.wrapping_add(1));
        let high = shifted(&low, &extra, 1.0);
        let wl = p.aggregate_boundary_control(&grid, &low.u, &low.u0).unwrap();
        let wh = p.aggregate_boundary_control(&grid, &high.u, &high.u0).unwrap();
        prop_assert!(wl.values().iter().zip(wh.values()).all(|(l, h)| h >= l));
    }

    #[test]
    fn states_stay_nonnegative(seed in any::<u64>(), (rho, eps) in preset_pair(), hi in 0.0..3.0f64) {
        let p = ModelParams::low_quality(rho, eps);
        let grid = Grid::matched(16, 1.0).unwrap();
        let c = controls_from_seed(&grid, hi, seed);
        let mol = forward_state(&p, &grid, &c.u, &c.u0).unwrap();
        let chr = solve_state_characteristics(&p, &grid, &c.u, &c.u0).unwrap();
        prop_assert!(mol.g.is_finite() && chr.g.is_finite());
        prop_assert!(mol.g.min() >= 0.0);
        prop_assert!(chr.g.min() >= 0.0);
    }

    #[test]
    fn mol_boundary_identity_holds_to_round_off(seed in any::<u64>(), rho in prop::sample::select(vec![0.5, 1.0])) {
        let p = ModelParams::low_quality(rho, 1.0);
        let grid = Grid::matched(20, 1.0).unwrap();
        let c = controls_from_seed(&grid, 2.0, seed);
        let mol = forward_state(&p, &grid, &c.u, &c.u0).unwrap();
        let r = p.recommendation.sample(&grid);
        let up = c.u.map(|x| x.powf(rho));
        for j in 0..=grid.n_time() {
            let expected = boundary_value(grid.da(), &r, mol.g.row(j), up.row(j), c.u0.get(j).powf(rho));
            prop_assert!((mol.g.get(j, 0) - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn costate_is_negative_in_the_interior(seed in any::<u64>(), (rho, eps) in preset_pair()) {
        let p = ModelParams::low_quality(rho, eps);
        let grid = Grid::matched(16, 1.0).unwrap();
        let c = controls_from_seed(&grid, 1.0, seed);
        let state = forward_state(&p, &grid, &c.u, &c.u0).unwrap();
        let xi = backward_adjoint(&p, &grid, &state).unwrap().xi;
        for j in 0..grid.n_time() {
            for i in 0..grid.n_space() {
                prop_assert!(xi.get(j, i) < 0.0);
            }
            prop_assert_eq!(xi.get(j, grid.n_space()), 0.0);
        }
        prop_assert!(xi.row(grid.n_time()).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sweep_iterates_stay_admissible(seed in any::<u64>(), omega in 0.0..=1.0f64, cap in 0.05..2.0f64, (rho, eps) in preset_pair()) {
        let p = ModelParams { max_intensity: cap, ..ModelParams::low_quality(rho, eps) };
        let grid = Grid::matched(12, 1.0).unwrap();
        let c = controls_from_seed(&grid, cap, seed);
        let next = sweep_once(&p, &grid, &c, omega).unwrap().controls;
        prop_assert!(next.u.min() >= 0.0 && next.u.max() <= cap);
        prop_assert!(next.u0.values().iter().all(|&v| (0.0..=cap).contains(&v)));
    }

    #[test]
    fn control_law_is_bounded_and_monotone(s1 in -5.0..5.0f64, s2 in -5.0..5.0f64, t in 0.0..1.0f64, cap in 0.1..10.0f64, rho in 0.2..=1.0f64) {
        let p = ModelParams { rho, max_intensity: cap, ..ModelParams::low_quality(1.0, 1.0) };
        let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
        let a = control_from_costate(&p, t, lo, None);
        let b = control_from_costate(&p, t, hi, None);
        prop_assert!((0.0..=cap).contains(&a) && (0.0..=cap).contains(&b));
        prop_assert!(a >= b);
    }

    #[test]
    fn objective_is_midpoint_concave(seed in any::<u64>(), (rho, eps) in preset_pair()) {
        let p = ModelParams::low_quality(rho, eps);
        let grid = Grid::matched(16, 1.0).unwrap();
        let mut rng = StdRng::seed_from_u64(seed);
        let a = random_controls(&grid, 2.0, &mut rng);
        let b = random_controls(&grid, 2.0, &mut rng);
        let mid = objective_at(&p, &grid, &midpoint(&a, &b));
        let avg = 0.5 * (objective_at(&p, &grid, &a) + objective_at(&p, &grid, &b));
        prop_assert!(mid >= avg - 1e-9);
    }

    #[test]
    fn revenue_scales_with_the_coefficient(lambda in 0.01..100.0f64, seed in any::<u64>(), gamma in 0.05..=1.0f64) {
        let grid = Grid::matched(10, 1.0).unwrap();
        let g = controls_from_seed(&grid, 3.0, seed).u;
        let base = ModelParams::low_quality(1.0, gamma);
        let scaled = ModelParams { revenue_coeff: lambda * base.revenue_coeff, ..base.clone() };
        let zero = ControlPair::zero(&grid);
        let r1 = objective::evaluate(&base, &grid, &g, &zero.u, &zero.u0).unwrap().revenue;
        let r2 = objective::evaluate(&scaled, &grid, &g, &zero.u, &zero.u0).unwrap().revenue;
        prop_assert!((r2 - lambda * r1).abs() <= 1e-12 * r2.abs().max(1.0));
    }

    #[test]
    fn objective_parts_are_consistent(seed in any::<u64>(), gamma in 0.05..=1.0f64, cf in 0.0..1.0f64, bump in 0.0..1.0f64) {
        let grid = Grid::matched(10, 1.0).unwrap();
        let p = ModelParams { fixed_cost: cf, ..ModelParams::low_quality(1.0, gamma) };
        let c = controls_from_seed(&grid, 2.0, seed);
        let g = controls_from_seed(&grid, 3.0, seed.wrapping_mul(3)).u;
        let parts = objective::evaluate(&p, &grid, &g, &c.u, &c.u0).unwrap();
        prop_assert!(parts.ad_cost >= 0.0 && parts.revenue >= 0.0);
        prop_assert!((parts.total - (parts.revenue - parts.ad_cost - parts.fixed)).abs() < 1e-14);
        let higher = g.map(|v| v + bump);
        let raised = objective::evaluate(&p, &grid, &higher, &c.u, &c.u0).unwrap();
        prop_assert!(raised.revenue >= parts.revenue);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// Sup-norm bound of the boundary density for random bounded profiles.
    #[test]
    fn boundary_density_respects_the_sup_bound(phi in prop::collection::vec(-2.0..2.0f64, 2..10)) {
        let p = ModelParams::low_quality(1.0, 1.0);
        let mu = p.renewal_multiplier().unwrap();
        let phi_sup = phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let profile = Profile::Samples(phi);
        let problem = VolterraProblem::renewal(&p, move |a| profile.eval(a), 1.0);
        let b = solve_volterra(&problem, 60).unwrap();
        prop_assert!(b.sup_norm() <= mu * phi_sup * 0.6 + 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn volterra_residual_is_small(kernel in nodes(0.0, 2.0), forcing in nodes(-1.0, 1.0), steps in 2usize..200) {
        let k = Profile::Samples(kernel);
        let f = Profile::Samples(forcing);
        let dt = 1.0 / steps as f64;
        let ks: Vec<f64> = (0..=steps).map(|m| k.eval(m as f64 * dt)).collect();
        let fs: Vec<f64> = (0..=steps).map(|m| f.eval(m as f64 * dt)).collect();
        let b = volterra_trapezoid(&ks, &fs, dt).unwrap();
        let sup = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(volterra_residual(&ks, &fs, &b, dt) < 1e-6 * (1.0 + sup));
    }

    /// Shrinking control perturbations give shrinking state differences.
    #[test]
    fn states_depend_continuously_on_controls(seed in any::<u64>(), rho in prop::sample::select(vec![0.5, 1.0])) {
        let p = ModelParams::low_quality(rho, 1.0);
        let grid = Grid::matched(16, 1.0).unwrap();
        let base = controls_from_seed(&grid, 1.0, seed);
        let dir = controls_from_seed(&grid, 1.0, seed.wrapping_add(17));
        let g = solve_state_characteristics(&p, &grid, &base.u, &base.u0).unwrap().g;
        let diffs: Vec<f64> = [0.1, 0.01, 0.001]
            .iter()
            .map(|&eps| {
                let c = shifted(&base, &dir, eps);
                sup_diff(&solve_state_characteristics(&p, &grid, &c.u, &c.u0).unwrap().g, &g)
            })
            .collect();
        prop_assert!(diffs[0] > diffs[1] && diffs[1] > diffs[2]);
        prop_assert!(diffs[2] < 0.1);
    }
}

#[test]
fn unstable_recommendation_is_rejected() {
    let p = constant_model(2.0, 0.0, 1.5);
    let grid = Grid::matched(10, 1.0).unwrap();
    let c = ControlPair::zero(&grid);
    assert!(matches!(
        solve_state_characteristics(&p, &grid, &c.u, &c.u0),
        Err(goodwill_core::Error::StabilityViolation { .. })
    ));
    let zero_u0 = BoundarySeries::filled(&grid, 0.0);
    assert!(p.aggregate_boundary_control(&grid, &c.u, &zero_u0).is_ok());
}
