//! The consumer's optimal distributed-investment policy.
//!
//! The optimal installation rate is affine in the state,
//!
//! ```text
//! a(t, x) = -(b K_c/gamma)(x - E[X_t]) - (b L_c/gamma) E[X_t] + constant_term
//!           + (b/2gamma) [conditional price kernel at rate_fast]
//!           + (b/2gamma) [unconditional kernel at rate_slow minus rate_fast],
//! ```
//!
//! with `rate_fast = rho + b^2 K_c/gamma`, `rate_slow = rho + b^2 L_c/gamma`
//! and `constant_term = (b theta - c rho)/(2 gamma rate_slow)`. Under a
//! constant price `P` the long run level is
//! `X_inf(P) = (P + theta - rho c/b) / (2 sigma^2 K_c)`, which is zero at the
//! floor price `P_floor = rho c/b - theta` and equals the full demand `D` at
//! `P_D = P_floor + 2 sigma^2 K_c D`.
//!
//! All mean trajectories and forecasts live in the exponential-sum algebra,
//! so they are exact for the three supported price models.

use crate::error::{Error, Result};
use crate::expsum::ExpSum;
use crate::params::ModelParams;
use crate::price::PriceModel;
use crate::quad::discounted_tail;
use crate::riccati::ScalarGains;

/// Long-run outcome at a constant price, with admissibility verdicts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryOutcome {
    pub p_bar: f64,
    pub x_inf: f64,
    pub q_inf: Option<f64>,
    /// `x_inf / D`.
    pub share: f64,
    pub price_positive: bool,
    pub x_in_range: bool,
    pub q_positive: Option<bool>,
}

impl StationaryOutcome {
    pub fn admissible(&self) -> bool {
        self.price_positive && self.x_in_range && self.q_positive.unwrap_or(true)
    }

    /// Attach the centralised level and its sign verdict.
    pub fn with_q(mut self, q_inf: f64) -> Self {
        self.q_inf = Some(q_inf);
        self.q_positive = Some(q_inf >= 0.0);
        self
    }
}

/// The consumer's closed-form policy for one price model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsumerPolicy {
    pub gains: ScalarGains,
    pub price: PriceModel,
    pub params: ModelParams,
    /// `rho + b^2 K_c / gamma`.
    pub rate_fast: f64,
    /// `rho + b^2 L_c / gamma`.
    pub rate_slow: f64,
    /// `(b theta - c rho) / (2 gamma rate_slow)`.
    pub constant_term: f64,
}

impl ConsumerPolicy {
    pub fn new(params: ModelParams, gains: ScalarGains, price: PriceModel) -> Result<Self> {
        let report = params.validate();
        if !report.is_valid() {
            return Err(Error::Validation(report.summary()));
        }
        let rate_fast = params.rho + params.b * params.b * gains.k_c / params.gamma;
        let rate_slow = params.rho + params.b * params.b * gains.lambda_c / params.gamma;
        Ok(ConsumerPolicy {
            gains,
            price,
            params,
            rate_fast,
            rate_slow,
            constant_term: (params.b * params.theta - params.c * params.rho)
                / (2.0 * params.gamma * rate_slow),
        })
    }

    /// The optimal installation rate at time `t`, state `x`, population mean
    /// `mean_x = E[X_t]`, and observed price `p_t`.
    pub fn optimal_rate(&self, t: f64, x: f64, mean_x: f64, p_t: f64) -> f64 {
        let p = &self.params;
        let cond_fast = self
            .price
            .discounted_kernel(t, self.rate_fast, p_t, true)
            .expect("rate_fast > 0");
        let uncond_slow = self
            .price
            .discounted_kernel(t, self.rate_slow, p_t, false)
            .expect("rate_slow > 0");
        let uncond_fast = self
            .price
            .discounted_kernel(t, self.rate_fast, p_t, false)
            .expect("rate_fast > 0");
        -(p.b * self.gains.k_c / p.gamma) * (x - mean_x)
            - (p.b * self.gains.lambda_c / p.gamma) * mean_x
            + self.constant_term
            + p.b / (2.0 * p.gamma) * (cond_fast + uncond_slow - uncond_fast)
    }

    /// `s -> E[X_s]` under the optimal control, as an exponential sum
    /// based at 0.
    pub fn mean_expsum(&self) -> ExpSum {
        let p = &self.params;
        let a_slow = self.rate_slow - p.rho;
        let g_slow = self.price.mean_expsum().kernel_transform(self.rate_slow);
        let mut forcing = g_slow.scaled(p.b * p.b / (2.0 * p.gamma));
        forcing.add_constant(p.b * self.constant_term);
        forcing.solve_linear_ode(a_slow, p.x0)
    }

    pub fn mean_trajectory(&self, grid: &[f64]) -> Vec<(f64, f64)> {
        let m = self.mean_expsum();
        grid.iter().map(|&t| (t, m.eval(t))).collect()
    }

    /// `s -> E[X_s | F_t]` given `X_t = x_t` and `P_t = p_t`, based at `t`.
    pub fn conditional_mean_expsum(&self, t: f64, x_t: f64, p_t: f64) -> ExpSum {
        let p = &self.params;
        let a_fast = self.rate_fast - p.rho;
        let coupling = p.b * p.b * (self.gains.k_c - self.gains.lambda_c) / p.gamma;
        let h_cond = self
            .price
            .conditional_expsum(t, p_t)
            .kernel_transform(self.rate_fast);
        let g_slow = self
            .price
            .mean_expsum()
            .kernel_transform(self.rate_slow)
            .rebase(t);
        let g_fast = self
            .price
            .mean_expsum()
            .kernel_transform(self.rate_fast)
            .rebase(t);
        let mut forcing = self.mean_expsum().rebase(t).scaled(coupling);
        forcing.add_constant(p.b * self.constant_term);
        forcing.add(&h_cond.scaled(p.b * p.b / (2.0 * p.gamma)));
        forcing.add(&g_slow.scaled(p.b * p.b / (2.0 * p.gamma)));
        forcing.add(&g_fast.scaled(-p.b * p.b / (2.0 * p.gamma)));
        forcing.solve_linear_ode(a_fast, x_t)
    }

    /// `E[D - X_s | F_t]`, the firm's residual-demand forecast.
    pub fn residual_demand_forecast(&self, t: f64, s: f64, x_t: f64, p_t: f64) -> Result<f64> {
        if s < t {
            return Err(Error::Domain(format!("forecast needs s >= t, got {s} < {t}")));
        }
        Ok(self.params.demand - self.conditional_mean_expsum(t, x_t, p_t).eval(s))
    }

    /// `s -> E[Y_s]`: the mean of the linear value coefficient,
    /// `-g_slow(s) - (c b L_c + gamma theta)/(rho gamma + b^2 L_c)`.
    pub fn mean_y(&self) -> ExpSum {
        let p = &self.params;
        let mut y = self
            .price
            .mean_expsum()
            .kernel_transform(self.rate_slow)
            .scaled(-1.0);
        y.add_constant(
            -(p.c * p.b * self.gains.lambda_c + p.gamma * p.theta)
                / (p.rho * p.gamma + p.b * p.b * self.gains.lambda_c),
        );
        y
    }

    /// Sensitivity of `Y_s` to the contemporaneous price `P_s`.
    fn y_price_slope(&self) -> f64 {
        match self.price {
            PriceModel::Constant { .. } => 0.0,
            PriceModel::Martingale { .. } => -1.0 / self.rate_fast,
            PriceModel::OrnsteinUhlenbeck { kappa, .. } => -1.0 / (self.rate_fast + kappa),
        }
    }

    /// `V_C = L_c x0^2 + E[Y_0] x0 + R_0` with
    /// `R_0 = -(1/4gamma) int e^{-rho s} E[(b Y_s + c)^2] ds`.
    pub fn consumer_value(&self) -> Result<f64> {
        let p = &self.params;
        if !self.price.square_integrable(p.rho) {
            return Err(Error::Domain(
                "price second moment is not discount-integrable".into(),
            ));
        }
        let m_y = self.mean_y();
        let mut w = m_y.scaled(p.b);
        w.add_constant(p.c);
        // E[(b Y_s + c)^2] = (b E[Y_s] + c)^2 + b^2 B^2 Var(P_s)
        let bound = w.abs_bound().powi(2);
        let mean_part = discounted_tail(
            &|s| {
                let v = w.eval(s);
                v * v
            },
            0.0,
            p.rho,
            bound,
            1e-9 * bound.max(1.0) / p.rho,
        );
        let slope = self.y_price_slope() * p.b;
        let var_part = slope * slope * self.discounted_price_variance();
        let r0 = -(mean_part + var_part) / (4.0 * p.gamma);
        Ok(self.gains.lambda_c * p.x0 * p.x0 + m_y.eval(0.0) * p.x0 + r0)
    }

    /// `int_0^inf e^{-rho s} Var(P_s) ds`, closed form per variant.
    fn discounted_price_variance(&self) -> f64 {
        let rho = self.params.rho;
        match self.price {
            PriceModel::Constant { .. } => 0.0,
            PriceModel::Martingale { p_init, vol } => {
                p_init * p_init * (1.0 / (rho - vol * vol) - 1.0 / rho)
            }
            PriceModel::OrnsteinUhlenbeck { kappa, vol, .. } => {
                if kappa == 0.0 {
                    vol * vol / (rho * rho)
                } else {
                    vol * vol / (2.0 * kappa) * (1.0 / rho - 1.0 / (rho + 2.0 * kappa))
                }
            }
        }
    }

    /// Total discounted consumer cost, including the control-independent
    /// `D (P_t + theta)` stream.
    pub fn total_cost(&self) -> Result<f64> {
        let p = &self.params;
        let price_stream = self.price.mean_expsum().discounted_integral(p.rho);
        Ok(self.consumer_value()? + p.demand * (p.theta / p.rho + price_stream))
    }
}

/// `(P_floor, P_D)`: the constant prices giving zero and full-demand
/// distributed investment.
pub fn price_bounds(p: &ModelParams, gains: &ScalarGains) -> (f64, f64) {
    let floor = p.rho * p.c / p.b - p.theta;
    (
        floor,
        floor + 2.0 * p.sigma * p.sigma * gains.k_c * p.demand,
    )
}

/// Long-run distributed level at a constant price `p_bar`.
pub fn stationary_level(
    p: &ModelParams,
    gains: &ScalarGains,
    p_bar: f64,
) -> Result<StationaryOutcome> {
    if p.sigma == 0.0 || gains.k_c == 0.0 {
        return Err(Error::Degenerate(
            "stationary level undefined for sigma = 0 or K_c = 0".into(),
        ));
    }
    let x_inf = (p_bar + p.theta - p.rho * p.c / p.b) / (2.0 * p.sigma * p.sigma * gains.k_c);
    Ok(StationaryOutcome {
        p_bar,
        x_inf,
        q_inf: None,
        share: x_inf / p.demand,
        price_positive: p_bar > 0.0,
        x_in_range: (0.0..=p.demand).contains(&x_inf),
        q_positive: None,
    })
}
