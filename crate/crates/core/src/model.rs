//! Model definition and the derived quantities shared by both state solvers:
//! the survival factor `D`, the renewal multiplier `mu`, the aggregated
//! boundary control `w` and the lifted boundary profile `g`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{dot, BoundarySeries, Field, Grid};
use crate::quadrature::{cumulative_trapezoid, trapezoid};

/// Panels per unit length used when `D(a)` is requested off-grid.
pub const DISCOUNT_PANELS: usize = 2000;

/// Quadrature nodes used for `mu` when no grid is involved.
pub const STABILITY_NODES: usize = 4000;

/// Number of uniform nodes used to validate function profiles on construction.
const VALIDATION_NODES: usize = 1000;

/// A scalar function of the segment coordinate `a in [0, 1]`.
#[derive(Clone)]
pub enum Profile {
    Constant(f64),
    /// `1 - (0.5 / (1 - e^-1)) e^-a`, increasing depreciation for a low-quality good.
    RisingDepreciation,
    /// `3/5 - (3/21) sqrt(a)`, decreasing recommendation rate.
    FadingRecommendation,
    /// Values at uniform nodes on `[0, 1]`, linearly interpolated.
    Samples(Vec<f64>),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Profile {
    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Profile::Custom(Arc::new(f))
    }

    pub fn eval(&self, a: f64) -> f64 {
        match self {
            Profile::Constant(c) => *c,
            Profile::RisingDepreciation => 1.0 - (0.5 / (1.0 - (-1.0f64).exp())) * (-a).exp(),
            Profile::FadingRecommendation => 0.6 - (3.0 / 21.0) * a.max(0.0).sqrt(),
            Profile::Samples(v) => {
                let n = v.len() - 1;
                if n == 0 {
                    return v[0];
                }
                let s = a.clamp(0.0, 1.0) * n as f64;
                let k = (s.floor() as usize).min(n - 1);
                let f = s - k as f64;
                (1.0 - f) * v[k] + f * v[k + 1]
            }
            Profile::Custom(f) => f(a),
        }
    }

    pub fn sample(&self, grid: &Grid) -> Vec<f64> {
        (0..=grid.n_space()).map(|i| self.eval(grid.a(i))).collect()
    }

    pub(crate) fn sample_uniform(&self, n: usize) -> Vec<f64> {
        (0..=n).map(|k| self.eval(k as f64 / n as f64)).collect()
    }

    fn check_range(&self, what: &str, lo: f64, hi: f64, strict_lo: bool) -> Result<()> {
        if let Profile::Samples(v) = self {
            if v.is_empty() {
                return Err(Error::InvalidParameter(format!(
                    "{what}: empty sample array"
                )));
            }
        }
        let nodes = match self {
            Profile::Samples(v) => v.len().max(VALIDATION_NODES + 1) - 1,
            _ => VALIDATION_NODES,
        };
        for (k, v) in self.sample_uniform(nodes).into_iter().enumerate() {
            let ok = v.is_finite() && v <= hi && if strict_lo { v > lo } else { v >= lo };
            if !ok {
                return Err(Error::InvalidParameter(format!(
                    "{what}({}) = {v} outside admissible range",
                    k as f64 / nodes as f64
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Constant(c) => write!(f, "Constant({c})"),
            Profile::RisingDepreciation => write!(f, "RisingDepreciation"),
            Profile::FadingRecommendation => write!(f, "FadingRecommendation"),
            Profile::Samples(v) => write!(f, "Samples({} nodes)", v.len()),
            Profile::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Scalar parameters and segment profiles of the goodwill model.
#[derive(Debug, Clone)]
pub struct ModelParams {
    /// Goodwill depreciation rate `delta(a)`, values in `[0, 1]`.
    pub delta: Profile,
    /// Consumer recommendation rate `R(a) >= 0`.
    pub recommendation: Profile,
    /// Advertising response exponent, `(0, 1]`.
    pub rho: f64,
    /// Goodwill elasticity of demand, `(0, 1]`.
    pub gamma: f64,
    pub discount_rate: f64,
    /// Unit advertising cost.
    pub beta: f64,
    /// Revenue coefficient `K` in `K * G^gamma`.
    pub revenue_coeff: f64,
    pub fixed_cost: f64,
    pub horizon: f64,
    /// Upper control bound; `f64::INFINITY` means unbounded.
    pub max_intensity: f64,
    pub initial_goodwill: Profile,
}

impl ModelParams {
    /// Shared parameters of the low-quality-good experiments with the given
    /// response exponent and demand elasticity.
    pub fn low_quality(rho: f64, gamma: f64) -> Self {
        ModelParams {
            delta: Profile::RisingDepreciation,
            recommendation: Profile::FadingRecommendation,
            rho,
            gamma,
            discount_rate: 0.028,
            beta: 0.16,
            revenue_coeff: 0.34,
            fixed_cost: 0.0,
            horizon: 1.0,
            max_intensity: f64::INFINITY,
            initial_goodwill: Profile::Constant(1.5),
        }
    }

    /// Checks scalar ranges and samples the profiles. Does not check stability.
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "{name} = {v} not in (0, 1]"
                )))
            }
        };
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} = {v} must be > 0")))
            }
        };
        unit("rho", self.rho)?;
        unit("gamma", self.gamma)?;
        positive("discount_rate", self.discount_rate)?;
        positive("beta", self.beta)?;
        positive("horizon", self.horizon)?;
        if !(self.revenue_coeff.is_finite() && self.revenue_coeff >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "revenue_coeff = {} must be >= 0",
                self.revenue_coeff
            )));
        }
        if !(self.fixed_cost.is_finite() && self.fixed_cost >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "fixed_cost = {} must be >= 0",
                self.fixed_cost
            )));
        }
        if self.max_intensity.is_nan() || self.max_intensity <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "max_intensity = {} must be > 0",
                self.max_intensity
            )));
        }
        self.delta.check_range("delta", 0.0, 1.0, false)?;
        self.recommendation
            .check_range("recommendation", 0.0, f64::MAX, false)?;
        self.initial_goodwill
            .check_range("initial_goodwill", 0.0, f64::MAX, true)?;
        Ok(())
    }

    /// Validation plus positivity of `G0` at the nodes of `grid`.
    pub fn validate_on(&self, grid: &Grid) -> Result<()> {
        self.validate()?;
        if (grid.horizon() - self.horizon).abs() > 1e-12 * self.horizon {
            return Err(Error::GridMismatch(format!(
                "grid horizon {} differs from model horizon {}",
                grid.horizon(),
                self.horizon
            )));
        }
        for i in 0..=grid.n_space() {
            let g = self.initial_goodwill.eval(grid.a(i));
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "initial_goodwill({}) = {g} must be > 0",
                    grid.a(i)
                )));
            }
        }
        Ok(())
    }

    /// `D(a) = exp(-int_0^a delta)`, trapezoid on `ceil(a * DISCOUNT_PANELS)` panels.
    pub fn discount_factor(&self, a: f64) -> f64 {
        let a = a.clamp(0.0, 1.0);
        if a == 0.0 {
            return 1.0;
        }
        let panels = ((a * DISCOUNT_PANELS as f64).ceil() as usize).max(1);
        let h = a / panels as f64;
        let samples: Vec<f64> = (0..=panels)
            .map(|k| self.delta.eval(k as f64 * h))
            .collect();
        (-trapezoid(&samples, h)).exp()
    }

    /// `D` at the `n + 1` uniform nodes `k / n`, cumulative trapezoid on those nodes.
    pub fn discount_nodes(&self, n: usize) -> Vec<f64> {
        let delta = self.delta.sample_uniform(n);
        cumulative_trapezoid(&delta, 1.0 / n as f64)
            .into_iter()
            .map(|s| (-s).exp())
            .collect()
    }

    /// Returns `(integral < 1, integral)` for `int_0^1 R(a) D(a) da` on
    /// `quad_nodes + 1` uniform nodes.
    pub fn stability_check(&self, quad_nodes: usize) -> (bool, f64) {
        let n = quad_nodes.max(2);
        let d = self.discount_nodes(n);
        let rd: Vec<f64> = self
            .recommendation
            .sample_uniform(n)
            .iter()
            .zip(&d)
            .map(|(r, d)| r * d)
            .collect();
        let value = trapezoid(&rd, 1.0 / n as f64);
        (value < 1.0, value)
    }

    /// `mu = 1 / (1 - int R D)` at the default resolution.
    pub fn renewal_multiplier(&self) -> Result<f64> {
        self.renewal_multiplier_with(STABILITY_NODES)
    }

    pub fn renewal_multiplier_with(&self, quad_nodes: usize) -> Result<f64> {
        let (ok, value) = self.stability_check(quad_nodes);
        if !ok {
            return Err(Error::StabilityViolation { value });
        }
        Ok(1.0 / (1.0 - value))
    }

    /// `w(t_j) = int_0^1 u^rho(t_j, a) da + u0^rho(t_j)`.
    pub fn aggregate_boundary_control(
        &self,
        grid: &Grid,
        u: &Field,
        u0: &BoundarySeries,
    ) -> Result<BoundarySeries> {
        u.ensure_on(grid, "u")?;
        u0.ensure_on(grid, "u0")?;
        check_nonnegative(grid, u, u0)?;
        let wa = grid.space_weights();
        let values = (0..=grid.n_time())
            .map(|j| {
                let pow: Vec<f64> = u.row(j).iter().map(|&x| x.powf(self.rho)).collect();
                dot(&pow, &wa) + u0.get(j).powf(self.rho)
            })
            .collect();
        Ok(BoundarySeries::new(values))
    }

    /// `g(t_j, a_i) = mu * w(t_j) * D(a_i)`, with `mu` and `D` on the grid nodes.
    pub fn lifted_boundary(&self, grid: &Grid, w: &BoundarySeries) -> Result<Field> {
        w.ensure_on(grid, "w")?;
        let mu = self.renewal_multiplier_with(grid.n_space())?;
        let d = self.discount_nodes(grid.n_space());
        let mut g = grid.zero_field();
        for j in 0..=grid.n_time() {
            for (gi, di) in g.row_mut(j).iter_mut().zip(&d) {
                *gi = mu * w.get(j) * di;
            }
        }
        Ok(g)
    }
}

fn check_nonnegative(grid: &Grid, u: &Field, u0: &BoundarySeries) -> Result<()> {
    for j in 0..=grid.n_time() {
        if u0.get(j) < 0.0 {
            return Err(Error::NegativeControl {
                value: u0.get(j),
                location: format!("u0(t = {})", grid.t(j)),
            });
        }
        for (i, &v) in u.row(j).iter().enumerate() {
            if v < 0.0 {
                return Err(Error::NegativeControl {
                    value: v,
                    location: format!("u(t = {}, a = {})", grid.t(j), grid.a(i)),
                });
            }
        }
    }
    Ok(())
}

/// Checks `0 <= u, u0 <= I` and finiteness at every node.
pub(crate) fn check_admissible(
    params: &ModelParams,
    grid: &Grid,
    u: &Field,
    u0: &BoundarySeries,
) -> Result<()> {
    u.ensure_on(grid, "u")?;
    u0.ensure_on(grid, "u0")?;
    let max = params.max_intensity;
    let bad = |v: f64| !(v.is_finite() && v >= 0.0 && v <= max);
    for j in 0..=grid.n_time() {
        if bad(u0.get(j)) {
            return Err(Error::InadmissibleControl {
                value: u0.get(j),
                max,
                location: format!("u0(t = {})", grid.t(j)),
            });
        }
        for (i, &v) in u.row(j).iter().enumerate() {
            if bad(v) {
                return Err(Error::InadmissibleControl {
                    value: v,
                    max,
                    location: format!("u(t = {}, a = {})", grid.t(j), grid.a(i)),
                });
            }
        }
    }
    Ok(())
}
