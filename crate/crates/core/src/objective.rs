//! Discounted profit functional.

use crate::error::{Error, Result};
use crate::grid::{dot, BoundarySeries, Field, Grid};
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfitBreakdown {
    /// `int int e^{-rt} K G^gamma`
    pub revenue: f64,
    /// `int int e^{-rt} (beta/2) (u^2 + u0^2)`
    pub ad_cost: f64,
    /// `int int e^{-rt} c_f`
    pub fixed: f64,
    pub total: f64,
}

/// Double composite-trapezoid quadrature of the discounted profit density.
/// `u0^2` is constant in `a` and integrates against `da` with weight one.
pub fn evaluate(
    params: &ModelParams,
    grid: &Grid,
    g: &Field,
    u: &Field,
    u0: &BoundarySeries,
) -> Result<ProfitBreakdown> {
    g.ensure_on(grid, "G")?;
    u.ensure_on(grid, "u")?;
    u0.ensure_on(grid, "u0")?;
    let wa = grid.space_weights();
    let wt = grid.time_weights();
    let half_beta = 0.5 * params.beta;

    let mut revenue = 0.0;
    let mut ad_cost = 0.0;
    let mut fixed = 0.0;
    for (j, wj) in wt.iter().enumerate() {
        let disc = wj * (-params.discount_rate * grid.t(j)).exp();
        let mut row_revenue = Vec::with_capacity(grid.n_space() + 1);
        for (i, &v) in g.row(j).iter().enumerate() {
            if v < 0.0 {
                return Err(Error::NegativeState {
                    value: v,
                    t: grid.t(j),
                    a: grid.a(i),
                });
            }
            row_revenue.push(v.powf(params.gamma));
        }
        let usq: Vec<f64> = u.row(j).iter().map(|x| x * x).collect();
        revenue += disc * params.revenue_coeff * dot(&row_revenue, &wa);
        ad_cost += disc * half_beta * (dot(&usq, &wa) + u0.get(j) * u0.get(j));
        fixed += disc * params.fixed_cost;
    }
    Ok(ProfitBreakdown {
        revenue,
        ad_cost,
        fixed,
        total: revenue - ad_cost - fixed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_goodwill_matches_analytic_time_integral() {
        let params = ModelParams::low_quality(1.0, 0.5);
        let grid = Grid::matched(50, 1.0).unwrap();
        let p = evaluate(
            &params,
            &grid,
            &Field::filled(&grid, 1.0),
            &grid.zero_field(),
            &grid.zero_series(),
        )
        .unwrap();
        let exact = 0.34 * (1.0 - (-0.028f64).exp()) / 0.028;
        assert!((p.total - exact).abs() < 1e-4);
        assert!((exact - 0.335284).abs() < 1e-6);
        assert!((p.total - 0.33530).abs() < 1e-4);
        assert_eq!(p.ad_cost, 0.0);
    }

    #[test]
    fn pure_advertising_cost() {
        let params = ModelParams {
            discount_rate: 1e-9,
            ..ModelParams::low_quality(1.0, 1.0)
        };
        let grid = Grid::matched(20, 1.0).unwrap();
        let c = 0.7;
        let p = evaluate(
            &params,
            &grid,
            &grid.zero_field(),
            &Field::filled(&grid, c),
            &grid.zero_series(),
        )
        .unwrap();
        assert!((p.total + 0.5 * params.beta * c * c).abs() < 1e-8);
    }

    #[test]
    fn boundary_control_cost_is_not_divided_by_segments() {
        let params = ModelParams {
            discount_rate: 1e-9,
            ..ModelParams::low_quality(1.0, 1.0)
        };
        let grid = Grid::matched(20, 1.0).unwrap();
        let p = evaluate(
            &params,
            &grid,
            &grid.zero_field(),
            &grid.zero_field(),
            &BoundarySeries::filled(&grid, 2.0),
        )
        .unwrap();
        assert!((p.ad_cost - 0.5 * params.beta * 4.0).abs() < 1e-8);
    }

    #[test]
    fn fixed_cost_enters_additively() {
        let base = ModelParams::low_quality(1.0, 1.0);
        let with_cost = ModelParams {
            fixed_cost: 0.1,
            ..base.clone()
        };
        let grid = Grid::matched(20, 1.0).unwrap();
        let g = Field::filled(&grid, 1.2);
        let a = evaluate(&base, &grid, &g, &grid.zero_field(), &grid.zero_series()).unwrap();
        let b = evaluate(
            &with_cost,
            &grid,
            &g,
            &grid.zero_field(),
            &grid.zero_series(),
        )
        .unwrap();
        assert!((a.total - b.total - b.fixed).abs() < 1e-15);
        assert!((b.fixed - 0.1 * (1.0 - (-0.028f64).exp()) / 0.028).abs() < 1e-5);
    }

    #[test]
    fn negative_state_is_rejected() {
        let params = ModelParams::low_quality(1.0, 0.1);
        let grid = Grid::matched(10, 1.0).unwrap();
        let g = Field::filled(&grid, -1.0);
        assert!(matches!(
            evaluate(&params, &grid, &g, &grid.zero_field(), &grid.zero_series()),
            Err(Error::NegativeState { .. })
        ));
    }
}
