//! The firm's optimal centralised-investment policy and stationary value.
//!
//! The optimal adjustment rate tracks the discounted residual-demand
//! forecast,
//!
//! ```text
//! v(t, q) = -(K_f/delta) q
//!           + (lambda/delta) int_t^inf e^{-(rho + K_f/delta)(s-t)} E[D - X_s | F_t] ds
//!           - (pi + h rho)/(2 delta (rho + K_f/delta)),
//! ```
//!
//! with `K_f = (delta/2)(-rho + sqrt(rho^2 + 4 lambda/delta))`. The useful
//! identity `lambda / (rho + K_f/delta) = K_f` makes the constant-forecast
//! fixed point `q = H - (pi + rho h)/(2 lambda)` exact.
//!
//! `stationary_value` is the firm's whole discounted objective at a constant
//! price, the function whose minimiser over prices defines the leader's
//! equilibrium price; it doubles as a brute-force oracle for that price.

use crate::error::{Error, Result};
use crate::expsum::ExpSum;
use crate::params::ModelParams;
use crate::quad::discounted_tail;
use crate::riccati::ScalarGains;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirmPolicy {
    pub k_f: f64,
    pub params: ModelParams,
    /// `rho + K_f / delta`.
    pub rate: f64,
    /// `(pi + h rho) / (2 delta rate)`.
    pub constant_term: f64,
}

impl FirmPolicy {
    pub fn new(params: ModelParams, k_f: f64) -> Result<Self> {
        let report = params.validate();
        if !report.is_valid() {
            return Err(Error::Validation(report.summary()));
        }
        let rate = params.rho + k_f / params.delta;
        Ok(FirmPolicy {
            k_f,
            params,
            rate,
            constant_term: (params.pi + params.h * params.rho) / (2.0 * params.delta * rate),
        })
    }

    /// Optimal rate with the forecast supplied in the exponential-sum
    /// algebra (based at `t`), so the tracking integral is exact.
    pub fn optimal_rate(&self, t: f64, q: f64, forecast: &ExpSum) -> f64 {
        debug_assert!((forecast.t0 - t).abs() < 1e-9);
        let integral = forecast.discounted_integral(self.rate);
        -(self.k_f / self.params.delta) * q + self.params.lambda / self.params.delta * integral
            - self.constant_term
    }

    /// Optimal rate with a black-box forecast; quadrature fallback.
    /// `bound` bounds `|forecast|` on the tail.
    pub fn optimal_rate_fn(
        &self,
        t: f64,
        q: f64,
        forecast: &dyn Fn(f64) -> f64,
        bound: f64,
    ) -> f64 {
        let integral = discounted_tail(forecast, t, self.rate, bound, 1e-9 * bound.max(1.0));
        -(self.k_f / self.params.delta) * q + self.params.lambda / self.params.delta * integral
            - self.constant_term
    }

    /// `s -> E[Q_s]` given the consumer's mean path (based at 0).
    pub fn mean_expsum(&self, consumer_mean: &ExpSum) -> ExpSum {
        let p = &self.params;
        let mut residual = consumer_mean.scaled(-1.0);
        residual.add_constant(p.demand);
        let tracking = residual.kernel_transform(self.rate);
        let mut forcing = tracking.scaled(p.lambda / p.delta);
        forcing.add_constant(-self.constant_term);
        forcing.solve_linear_ode(self.k_f / p.delta, p.q0)
    }

    pub fn mean_trajectory(&self, consumer_mean: &ExpSum, grid: &[f64]) -> Vec<(f64, f64)> {
        let m = self.mean_expsum(consumer_mean);
        grid.iter().map(|&t| (t, m.eval(t))).collect()
    }
}

/// Long-run centralised level given the distributed level.
pub fn stationary_level(p: &ModelParams, x_inf: f64) -> Result<f64> {
    if p.lambda == 0.0 {
        return Err(Error::Degenerate(
            "stationary centralised level undefined for lambda = 0".into(),
        ));
    }
    Ok(p.demand - x_inf - (p.pi + p.rho * p.h) / (2.0 * p.lambda))
}

/// The firm's total discounted objective at a constant price `p_bar` and
/// initial capacity `q`.
pub fn stationary_value(
    p: &ModelParams,
    k_f: f64,
    gains: &ScalarGains,
    p_bar: f64,
    q: f64,
) -> Result<f64> {
    if p.sigma == 0.0 || gains.k_c == 0.0 {
        return Err(Error::Degenerate(
            "firm stationary value needs a nondegenerate consumer response".into(),
        ));
    }
    let x_inf = (p_bar + p.theta - p.rho * p.c / p.b) / (2.0 * p.sigma * p.sigma * gains.k_c);
    let h_resid = p.demand - x_inf;
    let y0 = -2.0 * p.lambda * p.delta * h_resid / (p.rho * p.delta + k_f)
        + (p.delta * p.pi - k_f * p.h) / (p.rho * p.delta + k_f);
    Ok((p.lambda * h_resid * h_resid - p_bar * h_resid) / p.rho
        - (y0 + p.h) * (y0 + p.h) / (4.0 * p.delta * p.rho)
        + y0 * q
        + k_f * q * q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::riccati::{firm_gain, scalar_gains};

    fn baseline_policy() -> FirmPolicy {
        let p = ModelParams::baseline();
        FirmPolicy::new(p, firm_gain(&p)).unwrap()
    }

    #[test]
    fn rate_identity_holds() {
        let pol = baseline_policy();
        let p = pol.params;
        let big = (p.rho * p.delta + pol.k_f).powi(2);
        let lhs = big - p.lambda * p.delta;
        let rhs = p.rho * p.delta * (p.rho * p.delta + pol.k_f);
        assert!((lhs - rhs).abs() <= 1e-12 * big);
        assert!(pol.rate > 0.0);
    }

    #[test]
    fn constant_forecast_fixed_point() {
        let pol = baseline_policy();
        let p = pol.params;
        let h_resid = 30_000.0;
        let q_star = h_resid - (p.pi + p.rho * p.h) / (2.0 * p.lambda);
        let forecast = ExpSum::constant(0.0, h_resid);
        let rate = pol.optimal_rate(0.0, q_star, &forecast);
        let scale = pol.k_f / p.delta * q_star.abs();
        assert!(rate.abs() <= 1e-11 * scale, "rate = {rate}");
    }

    #[test]
    fn rate_points_toward_target() {
        let pol = baseline_policy();
        let p = pol.params;
        let h_resid = 30_000.0;
        let q_star = h_resid - (p.pi + p.rho * p.h) / (2.0 * p.lambda);
        let forecast = ExpSum::constant(0.0, h_resid);
        assert!(pol.optimal_rate(0.0, q_star - 100.0, &forecast) > 0.0);
        assert!(pol.optimal_rate(0.0, q_star + 100.0, &forecast) < 0.0);
    }

    #[test]
    fn lambda_zero_pure_cost_avoidance() {
        let mut p = ModelParams::baseline();
        p.lambda = 0.0;
        let pol = FirmPolicy::new(p, firm_gain(&p)).unwrap();
        assert_eq!(pol.k_f, 0.0);
        let forecast = ExpSum::constant(0.0, 1_000.0);
        let rate = pol.optimal_rate(0.0, 500.0, &forecast);
        let expect = -(p.pi + p.h * p.rho) / (2.0 * p.delta * p.rho);
        assert!((rate - expect).abs() < 1e-12 * expect.abs());
    }

    #[test]
    fn quadrature_rate_matches_closed_form() {
        let pol = baseline_policy();
        let mut forecast = ExpSum::constant(2.0, 20_000.0);
        forecast.push(5_000.0, 0.3, 0);
        let closed = pol.optimal_rate(2.0, 1_000.0, &forecast);
        let quad = pol.optimal_rate_fn(2.0, 1_000.0, &|s| forecast.eval(s), 25_000.0);
        assert!((closed - quad).abs() <= 1e-5 * closed.abs().max(1.0));
    }

    #[test]
    fn mean_trajectory_endpoints() {
        use crate::consumer::{stationary_level as x_level, ConsumerPolicy};
        use crate::price::PriceModel;
        let mut p = ModelParams::baseline();
        p.q0 = 5_000.0;
        let gains = scalar_gains(&p);
        let cons = ConsumerPolicy::new(p, gains, PriceModel::Constant { p_bar: 150.0 }).unwrap();
        let pol = FirmPolicy::new(p, gains.k_f).unwrap();
        let m_q = pol.mean_expsum(&cons.mean_expsum());
        assert!((m_q.eval(0.0) - 5_000.0).abs() < 1e-7);
        let x_inf = x_level(&p, &gains, 150.0).unwrap().x_inf;
        let q_inf = stationary_level(&p, x_inf).unwrap();
        let far = m_q.eval(500.0);
        assert!(
            (far - q_inf).abs() <= 1e-6 * q_inf.abs(),
            "{far} vs {q_inf}"
        );
    }

    #[test]
    fn mean_trajectory_matches_rk_oracle() {
        use crate::consumer::ConsumerPolicy;
        use crate::price::PriceModel;
        let p = ModelParams::baseline();
        let gains = scalar_gains(&p);
        let cons = ConsumerPolicy::new(p, gains, PriceModel::Constant { p_bar: 200.0 }).unwrap();
        let pol = FirmPolicy::new(p, gains.k_f).unwrap();
        let m_x = cons.mean_expsum();
        let m_q = pol.mean_expsum(&m_x);
        // RK4 on dq/dt = E[rate], rebuilding the tracking integral by
        // quadrature at each stage.
        let f = |t: f64, q: f64| {
            pol.optimal_rate_fn(t, q, &|s| p.demand - m_x.eval(s), p.demand)
        };
        let mut q = p.q0;
        let h = 1e-4;
        let mut t = 0.0;
        for _ in 0..200 {
            let k1 = f(t, q);
            let k2 = f(t + 0.5 * h, q + 0.5 * h * k1);
            let k3 = f(t + 0.5 * h, q + 0.5 * h * k2);
            let k4 = f(t + h, q + h * k3);
            q += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t += h;
        }
        assert!(
            (m_q.eval(t) - q).abs() <= 1e-5 * q.abs().max(1.0),
            "{} vs {q}",
            m_q.eval(t)
        );
    }

    #[test]
    fn stationary_level_arithmetic() {
        let p = ModelParams::baseline();
        // correction term is negligible at the baseline penalty
        let correction = (p.pi + p.rho * p.h) / (2.0 * p.lambda);
        assert!((correction - 200.0 / 1.752e7).abs() < 1e-12);
        let q = stationary_level(&p, 10_000.0).unwrap();
        assert!((q - (40_000.0 - correction)).abs() < 1e-9);
        // full substitution leaves a slightly negative level
        assert!(stationary_level(&p, p.demand).unwrap() < 0.0);
        let mut p2 = p;
        p2.pi = 0.0;
        p2.h = 0.0;
        assert_eq!(stationary_level(&p2, 10_000.0).unwrap(), 40_000.0);
    }

    #[test]
    fn value_gradient_in_q() {
        let p = ModelParams::baseline();
        let gains = scalar_gains(&p);
        let k_f = gains.k_f;
        let q = 20_000.0;
        let p_bar = 150.0;
        let dq = 1e-3 * q;
        let up = stationary_value(&p, k_f, &gains, p_bar, q + dq).unwrap();
        let down = stationary_value(&p, k_f, &gains, p_bar, q - dq).unwrap();
        let grad = (up - down) / (2.0 * dq);
        let x_inf = (p_bar + p.theta - p.rho * p.c / p.b) / (2.0 * p.sigma * p.sigma * gains.k_c);
        let h_resid = p.demand - x_inf;
        let y0 = -2.0 * p.lambda * p.delta * h_resid / (p.rho * p.delta + k_f)
            + (p.delta * p.pi - k_f * p.h) / (p.rho * p.delta + k_f);
        let expect = y0 + 2.0 * k_f * q;
        assert!(
            (grad - expect).abs() <= 1e-6 * expect.abs().max(1.0),
            "{grad} vs {expect}"
        );
    }

    #[test]
    fn rate_is_scaled_value_gradient() {
        // 2 delta v + h + dV/dq = 0 at a constant price and forecast.
        let p = ModelParams::baseline();
        let gains = scalar_gains(&p);
        let pol = FirmPolicy::new(p, gains.k_f).unwrap();
        let p_bar = 150.0;
        let x_inf = (p_bar + p.theta - p.rho * p.c / p.b) / (2.0 * p.sigma * p.sigma * gains.k_c);
        let q = 12_000.0;
        let forecast = ExpSum::constant(0.0, p.demand - x_inf);
        let rate = pol.optimal_rate(0.0, q, &forecast);
        let dq = 1.0;
        let up = stationary_value(&p, pol.k_f, &gains, p_bar, q + dq).unwrap();
        let down = stationary_value(&p, pol.k_f, &gains, p_bar, q - dq).unwrap();
        let grad = (up - down) / (2.0 * dq);
        let expect = -(grad + p.h) / (2.0 * p.delta);
        assert!(
            (rate - expect).abs() <= 1e-6 * expect.abs().max(1.0),
            "{rate} vs {expect}"
        );
    }

    #[test]
    fn h_zero_case_collapses() {
        let mut p = ModelParams::baseline();
        p.h = 0.0;
        p.pi = 0.0;
        let gains = scalar_gains(&p);
        let k_f = gains.k_f;
        let (floor, p_d) = crate::consumer::price_bounds(&p, &gains);
        // at P_D the residual demand vanishes, only the q-terms remain
        let q = 3_000.0;
        let v = stationary_value(&p, k_f, &gains, p_d, q).unwrap();
        let y0 = 0.0;
        let expect = -(y0 * y0) / (4.0 * p.delta * p.rho) + y0 * q + k_f * q * q;
        assert!((v - expect).abs() <= 1e-9 * expect.abs().max(1.0));
        let _ = floor;
    }
}
