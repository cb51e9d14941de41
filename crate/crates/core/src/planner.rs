//! The social planner's optimal policy for the coupled two-technology
//! problem.
//!
//! With state `z = (x, q)`, control `u = (b alpha, nu)`, cost weights
//! `N = diag(gamma/b^2, delta)` and the Riccati matrices `K`, `Lambda`,
//! the optimal feedback is
//!
//! ```text
//! u* = -N^{-1} [ K (z - E[z]) + Lambda E[z] ] + Theta,
//! ```
//!
//! the mean path is `E[Z_t] = Gamma_t (z0 - Phi) + Phi` with
//! `Gamma_t = exp(-N^{-1} Lambda t)`, and the stationary mix is
//!
//! ```text
//! x_inf = (rho h + pi - (rho c/b - theta)) / (2 sigma^2 K11),
//! q_inf = D - x_inf - (pi + rho h) / (2 lambda).
//! ```
//!
//! The mean drives the planner toward grid parity: the sign of `x_inf` is
//! the sign of the centralised-minus-distributed cost gap.

use crate::consumer::StationaryOutcome;
use crate::error::{Error, Result};
use crate::firm;
use crate::linalg::{expm2, Mat2, Vec2};
use crate::params::ModelParams;
use crate::riccati::{self, SareSolution, DEFAULT_MAX_STEPS, DEFAULT_SARE_TOL};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerSolution {
    pub params: ModelParams,
    pub sare: SareSolution,
    /// Constant part of the optimal control, `(Theta1, Theta2)`.
    pub theta: Vec2,
    /// Stationary mean state `(Phi1, Phi2)` in MW.
    pub phi: Vec2,
    /// Control cost matrix `diag(gamma/b^2, delta)`.
    pub n: Mat2,
    /// Linear cost vector `(-2 lambda D - theta, -2 lambda D + pi)`.
    pub t_vec: Vec2,
    /// Investment cost vector `(c/b, h)`.
    pub u_vec: Vec2,
}

impl PlannerSolution {
    pub fn n_inv_lambda(&self) -> Mat2 {
        let p = &self.params;
        let l = self.sare.lambda();
        Mat2::new(
            p.b * p.b * l.a / p.gamma,
            p.b * p.b * l.b / p.gamma,
            l.c / p.delta,
            l.d / p.delta,
        )
    }
}

/// Solve the planner problem: Riccati matrices, then the constant terms.
pub fn solve(p: &ModelParams) -> Result<PlannerSolution> {
    let report = p.validate();
    if !report.is_valid() {
        return Err(Error::Validation(report.summary()));
    }
    if p.lambda == 0.0 {
        return Err(Error::Degenerate("planner problem needs lambda > 0".into()));
    }
    let sare = riccati::solve_sare(p, DEFAULT_SARE_TOL, DEFAULT_MAX_STEPS)?;

    let n = Mat2::diagonal(p.gamma / (p.b * p.b), p.delta);
    let t_vec = Vec2 {
        x: -2.0 * p.lambda * p.demand - p.theta,
        y: -2.0 * p.lambda * p.demand + p.pi,
    };
    let u_vec = Vec2 {
        x: p.c / p.b,
        y: p.h,
    };
    // Theta = -1/2 (rho N + Lambda)^{-1} (T + rho U)
    let coeff = sare.lambda().add(&n.scale(p.rho));
    let rhs = Vec2 {
        x: t_vec.x + p.rho * u_vec.x,
        y: t_vec.y + p.rho * u_vec.y,
    };
    let theta_raw = coeff
        .solve(rhs)
        .ok_or_else(|| Error::Degenerate("singular constant-term system".into()))?;
    let theta = Vec2 {
        x: -0.5 * theta_raw.x,
        y: -0.5 * theta_raw.y,
    };

    let phi1 = (p.theta - p.rho * p.c / p.b + p.pi + p.rho * p.h)
        / (2.0 * p.sigma * p.sigma * sare.k11);
    let phi2 = p.demand - phi1 - (p.pi + p.rho * p.h) / (2.0 * p.lambda);

    Ok(PlannerSolution {
        params: *p,
        sare,
        theta,
        phi: Vec2 { x: phi1, y: phi2 },
        n,
        t_vec,
        u_vec,
    })
}

/// `exp(-M t)` for the mean-reversion matrix `M = N^{-1} Lambda`.
pub fn gamma_from(n_inv_lambda: &Mat2, t: f64) -> Mat2 {
    expm2(&n_inv_lambda.scale(-t))
}

pub fn gamma_matrix(sol: &PlannerSolution, t: f64) -> Mat2 {
    gamma_from(&sol.n_inv_lambda(), t)
}

/// `(t, E[X_t], E[Q_t])` along the optimal mean flow.
pub fn mean_trajectories(sol: &PlannerSolution, grid: &[f64]) -> Vec<(f64, f64, f64)> {
    let p = &sol.params;
    let z0 = Vec2 {
        x: p.x0 - sol.phi.x,
        y: p.q0 - sol.phi.y,
    };
    grid.iter()
        .map(|&t| {
            let g = gamma_matrix(sol, t);
            let v = g.mul_vec(z0);
            (t, v.x + sol.phi.x, v.y + sol.phi.y)
        })
        .collect()
}

/// The optimal feedback rates `(alpha, nu)` at state `(x, q)` with means
/// `(mean_x, mean_q)` supplied from the mean flow.
pub fn optimal_rates(
    sol: &PlannerSolution,
    x: f64,
    q: f64,
    mean_x: f64,
    mean_q: f64,
) -> (f64, f64) {
    let p = &sol.params;
    let k = sol.sare.k();
    let l = sol.sare.lambda();
    let dev = Vec2 {
        x: x - mean_x,
        y: q - mean_q,
    };
    let mean = Vec2 { x: mean_x, y: mean_q };
    let kd = k.mul_vec(dev);
    let lm = l.mul_vec(mean);
    // u = -N^{-1}(K dev + Lambda mean) + Theta, then alpha = u1 / b
    let u1 = -(p.b * p.b / p.gamma) * (kd.x + lm.x) + sol.theta.x;
    let u2 = -(kd.y + lm.y) / p.delta + sol.theta.y;
    (u1 / p.b, u2)
}

/// The planner's long-run mix. Price-free: the planner trades off the two
/// technologies directly.
pub fn stationary_mix(p: &ModelParams) -> Result<StationaryOutcome> {
    if p.sigma == 0.0 {
        return Err(Error::Degenerate("stationary mix undefined for sigma = 0".into()));
    }
    let sol = solve(p)?;
    let x_inf = sol.phi.x;
    let q_inf = firm::stationary_level(p, x_inf)?;
    Ok(StationaryOutcome {
        p_bar: f64::NAN,
        x_inf,
        q_inf: Some(q_inf),
        share: x_inf / p.demand,
        price_positive: true,
        x_in_range: (0.0..=p.demand).contains(&x_inf),
        q_positive: Some(q_inf >= 0.0),
    })
}

/// One cell of the flexibility scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub gamma: f64,
    pub delta: f64,
    pub k11: f64,
    pub x_inf: f64,
    pub share: f64,
    /// True when this cell breaks the expected monotone decline of `x_inf`
    /// along either grid axis; a solver-trouble signal, not an abort.
    pub violation: bool,
}

/// Scan `x_inf` over adjustment-cost grids; `x_inf` should fall as either
/// cost rises.
pub fn flexibility_scan(
    p: &ModelParams,
    gamma_grid: &[f64],
    delta_grid: &[f64],
) -> Result<Vec<ScanRow>> {
    let mut rows: Vec<ScanRow> = Vec::with_capacity(gamma_grid.len() * delta_grid.len());
    for (gi, &gamma) in gamma_grid.iter().enumerate() {
        for (di, &delta) in delta_grid.iter().enumerate() {
            let mut q = *p;
            q.gamma = gamma;
            q.delta = delta;
            let sol = solve(&q)?;
            let x_inf = sol.phi.x;
            let tol = 1e-9 * x_inf.abs().max(1.0);
            let mut violation = false;
            if gi > 0 {
                let prev = &rows[(gi - 1) * delta_grid.len() + di];
                if x_inf > prev.x_inf + tol {
                    violation = true;
                }
            }
            if di > 0 {
                let prev: &ScanRow = &rows[gi * delta_grid.len() + di - 1];
                if x_inf > prev.x_inf + tol {
                    violation = true;
                }
            }
            rows.push(ScanRow {
                gamma,
                delta,
                k11: sol.sare.k11,
                x_inf,
                share: x_inf / p.demand,
                violation,
            });
        }
    }
    Ok(rows)
}
