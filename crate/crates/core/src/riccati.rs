//! Riccati gains: the scalar quadratics behind the consumer and firm
//! feedbacks and the planner's 2x2 algebraic Riccati systems.
//!
//! Scalar gains solve
//!
//! ```text
//! b^2 K_c^2 / gamma + (rho - sigma^2) K_c - eta     = 0,   K_c >= 0,
//! b^2 L_c^2 / gamma + rho L_c        - sigma^2 K_c  = 0,   L_c >= 0,
//! K_f^2 / delta     + rho K_f        - lambda       = 0,   K_f >= 0,
//! ```
//!
//! each taken at the nonnegative root via the conjugate form
//! `2q / (p + sqrt(p^2 + 4 r q))` which stays stable when the linear
//! coefficient dominates.
//!
//! The planner's matrices K and Lambda solve, with S = diag(sigma, 0),
//! N = diag(gamma/b^2, delta), Q = [[lambda+eta, lambda], [lambda, lambda]]
//! and Qt = [[-eta, 0], [0, 0]],
//!
//! ```text
//! K N^{-1} K - S K S + rho K - Q               = 0,
//! L N^{-1} L + rho L - (S K S + Q + Qt)        = 0.
//! ```
//!
//! The solver integrates the matrix Riccati ODE `dK/dtau = -rho K + S K S
//! + Q - K N^{-1} K` forward in time-to-go from K = 0; the flow converges
//! to the unique stabilizing positive-definite root. A Newton polish with
//! the analytic Jacobian then drives the algebraic residual to round-off.

use crate::error::{Error, Result};
use crate::linalg::{solve3, Mat2};
use crate::params::ModelParams;

/// Default derivative tolerance for the ODE stage (relative to 1 + |K|).
pub const DEFAULT_SARE_TOL: f64 = 1e-10;
/// Default step budget for the ODE stage.
pub const DEFAULT_MAX_STEPS: u64 = 1_000_000;
/// Target relative residual after the Newton polish.
const POLISH_TOL: f64 = 1e-10;

/// The three scalar feedback gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarGains {
    pub k_c: f64,
    pub lambda_c: f64,
    pub k_f: f64,
}

/// Nonnegative root of `r x^2 + p x - q = 0` with `r > 0`, `q >= 0`,
/// written to avoid cancellation for large positive `p`.
fn stable_quadratic_root(r: f64, p: f64, q: f64) -> f64 {
    if q == 0.0 {
        return 0.0;
    }
    2.0 * q / (p + (p * p + 4.0 * r * q).sqrt())
}

/// Consumer gains `(K_c, Lambda_c)`.
pub fn consumer_gains(p: &ModelParams) -> (f64, f64) {
    let r = p.b * p.b / p.gamma;
    let k_c = stable_quadratic_root(r, p.rho - p.sigma * p.sigma, p.eta);
    let lambda_c = stable_quadratic_root(r, p.rho, p.sigma * p.sigma * k_c);
    (k_c, lambda_c)
}

/// Firm gain `K_f = (delta/2)(-rho + sqrt(rho^2 + 4 lambda/delta))`.
pub fn firm_gain(p: &ModelParams) -> f64 {
    stable_quadratic_root(1.0 / p.delta, p.rho, p.lambda)
}

pub fn scalar_gains(p: &ModelParams) -> ScalarGains {
    let (k_c, lambda_c) = consumer_gains(p);
    ScalarGains {
        k_c,
        lambda_c,
        k_f: firm_gain(p),
    }
}

/// Solution of the planner's two algebraic Riccati systems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SareSolution {
    pub k11: f64,
    pub k12: f64,
    pub k22: f64,
    pub l11: f64,
    pub l12: f64,
    pub l22: f64,
    /// Relative max-norm residual of the K system.
    pub residual_k: f64,
    /// Relative max-norm residual of the Lambda system.
    pub residual_lambda: f64,
    /// ODE steps plus Newton iterations.
    pub iterations: u64,
}

impl SareSolution {
    pub fn k(&self) -> Mat2 {
        Mat2::symmetric(self.k11, self.k12, self.k22)
    }

    pub fn lambda(&self) -> Mat2 {
        Mat2::symmetric(self.l11, self.l12, self.l22)
    }
}

/// Coefficients shared by the two symmetric systems
/// `F(X) = -rho X + C - X N^{-1} X (+ sigma^2 X11 e11) = 0`
/// in the unknowns `(x, y, z) = (X11, X12, X22)`.
struct SymmetricSystem {
    rho: f64,
    n1: f64,
    n2: f64,
    /// `sigma^2` for the K system, 0 for the Lambda system.
    sigma2: f64,
    c11: f64,
    c12: f64,
    c22: f64,
}

impl SymmetricSystem {
    fn residual(&self, v: &[f64; 3]) -> [f64; 3] {
        let [x, y, z] = *v;
        [
            -self.rho * x + self.sigma2 * x + self.c11 - (self.n1 * x * x + self.n2 * y * y),
            -self.rho * y + self.c12 - (self.n1 * x * y + self.n2 * y * z),
            -self.rho * z + self.c22 - (self.n1 * y * y + self.n2 * z * z),
        ]
    }

    fn jacobian(&self, v: &[f64; 3]) -> [[f64; 3]; 3] {
        let [x, y, z] = *v;
        [
            [
                -self.rho + self.sigma2 - 2.0 * self.n1 * x,
                -2.0 * self.n2 * y,
                0.0,
            ],
            [
                -self.n1 * y,
                -self.rho - self.n1 * x - self.n2 * z,
                -self.n2 * y,
            ],
            [0.0, -2.0 * self.n1 * y, -self.rho - 2.0 * self.n2 * z],
        ]
    }

    fn scale(&self) -> f64 {
        self.c11.abs().max(self.c12.abs()).max(self.c22.abs()).max(1.0)
    }
}

fn max3(v: &[f64; 3]) -> f64 {
    v[0].abs().max(v[1].abs()).max(v[2].abs())
}

/// Integrate `dX/dtau = F(X)` from `start` until `|F| <= tol (1 + |X|)`.
///
/// The stepper is linearly implicit backward Euler,
/// `(I/h - J) delta = F(y)`, so stiffness in the flow (rate ratios of 1e8
/// and beyond occur for extreme cost parameters) cannot stall it. Small
/// steps track the flow toward the stabilizing root; as the residual
/// shrinks the accepted step grows and the iteration turns into Newton.
fn integrate_to_rest(
    sys: &SymmetricSystem,
    start: [f64; 3],
    tol: f64,
    max_steps: u64,
) -> Result<([f64; 3], u64)> {
    let mut y = start;
    let mut steps: u64 = 0;
    let mut f = sys.residual(&y);
    let mut h = 1e-3 * (1.0 + max3(&y)) / max3(&f).max(1e-30);
    loop {
        if max3(&f) <= tol * sys.scale().max(1.0 + max3(&y)) {
            return Ok((y, steps));
        }
        if steps >= max_steps {
            return Err(Error::NonConvergence {
                steps,
                residual: max3(&f),
            });
        }
        steps += 1;
        let j = sys.jacobian(&y);
        let mut lhs = [[0.0; 3]; 3];
        for (r, row) in j.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                lhs[r][c] = -v;
            }
            lhs[r][r] += 1.0 / h;
        }
        let delta = match solve3(&lhs, &f) {
            Some(d) => d,
            None => {
                h *= 0.25;
                continue;
            }
        };
        let trial = [y[0] + delta[0], y[1] + delta[1], y[2] + delta[2]];
        let f_trial = sys.residual(&trial);
        if f_trial.iter().all(|v| v.is_finite()) && max3(&f_trial) <= max3(&f) * (1.0 + 1e-8) {
            y = trial;
            f = f_trial;
            h = (h * 2.0).min(1e15);
        } else {
            h *= 0.25;
            if h < 1e-300 {
                return Err(Error::NonConvergence {
                    steps,
                    residual: max3(&f),
                });
            }
        }
    }
}

/// Newton polish from the ODE endpoint; analytic Jacobian, plain steps.
fn newton_polish(sys: &SymmetricSystem, start: [f64; 3]) -> Result<([f64; 3], f64, u64)> {
    let mut y = start;
    let scale = sys.scale();
    for it in 0..50 {
        let f = sys.residual(&y);
        let rel = max3(&f) / scale;
        if rel <= POLISH_TOL {
            return Ok((y, rel, it));
        }
        let j = sys.jacobian(&y);
        let step = solve3(&j, &f)
            .ok_or_else(|| Error::Degenerate("singular Jacobian in Riccati polish".into()))?;
        for i in 0..3 {
            y[i] -= step[i];
        }
    }
    let rel = max3(&sys.residual(&y)) / scale;
    Err(Error::NonConvergence {
        steps: 50,
        residual: rel,
    })
}

fn k_system(p: &ModelParams) -> SymmetricSystem {
    SymmetricSystem {
        rho: p.rho,
        n1: p.b * p.b / p.gamma,
        n2: 1.0 / p.delta,
        sigma2: p.sigma * p.sigma,
        c11: p.lambda + p.eta,
        c12: p.lambda,
        c22: p.lambda,
    }
}

fn lambda_system(p: &ModelParams, k: &[f64; 3]) -> SymmetricSystem {
    // Source S K S + Q + Qt; the Qt entry cancels the eta in Q11.
    SymmetricSystem {
        rho: p.rho,
        n1: p.b * p.b / p.gamma,
        n2: 1.0 / p.delta,
        sigma2: 0.0,
        c11: p.sigma * p.sigma * k[0] + p.lambda,
        c12: p.lambda,
        c22: p.lambda,
    }
}

/// Solve both planner Riccati systems.
pub fn solve_sare(p: &ModelParams, tol: f64, max_steps: u64) -> Result<SareSolution> {
    if tol <= 0.0 {
        return Err(Error::Domain("tolerance must be positive".into()));
    }
    let report = p.validate();
    if !report.is_valid() {
        return Err(Error::Validation(report.summary()));
    }
    if p.lambda == 0.0 {
        return Err(Error::Degenerate(
            "lambda = 0 makes the planner's K matrix singular".into(),
        ));
    }

    let sys_k = k_system(p);
    let (k_ode, steps_k) = integrate_to_rest(&sys_k, [0.0; 3], tol, max_steps)?;
    let (k, residual_k, its_k) = newton_polish(&sys_k, k_ode)?;

    let sys_l = lambda_system(p, &k);
    let (l_ode, steps_l) = integrate_to_rest(&sys_l, [0.0; 3], tol, max_steps)?;
    let (l, residual_lambda, its_l) = newton_polish(&sys_l, l_ode)?;

    let sol = SareSolution {
        k11: k[0],
        k12: k[1],
        k22: k[2],
        l11: l[0],
        l12: l[1],
        l22: l[2],
        residual_k,
        residual_lambda,
        iterations: steps_k + steps_l + its_k + its_l,
    };
    if !sol.k().is_positive_definite() {
        return Err(Error::NotPositiveDefinite(format!("K = {:?}", sol.k())));
    }
    // Lambda may be singular (rank one when sigma = 0), so only require
    // positive semidefiniteness up to round-off.
    let lam = sol.lambda();
    let lam_scale = lam.max_norm().max(1.0);
    if lam.trace() < -1e-12 * lam_scale || lam.det() < -1e-10 * lam_scale * lam_scale {
        return Err(Error::NotPositiveDefinite(format!("Lambda = {lam:?}")));
    }
    Ok(sol)
}

/// Re-run the fixed-point integration from an arbitrary seed. Used to check
/// that the attractor is unique in practice.
pub fn resolve_k_from_seed(p: &ModelParams, seed: [f64; 3]) -> Result<[f64; 3]> {
    let sys = k_system(p);
    let (ode, _) = integrate_to_rest(&sys, seed, DEFAULT_SARE_TOL, DEFAULT_MAX_STEPS)?;
    let (k, _, _) = newton_polish(&sys, ode)?;
    Ok(k)
}
