//! Exponential-polynomial sums: the closed-form algebra behind the mean
//! trajectories and discounted forecast integrals.
//!
//! Every conditional mean, mean trajectory, and residual-demand forecast in
//! this crate is a function of the form
//!
//! ```text
//! f(s) = c0 + sum_i  coef_i * (s - t0)^pow_i * exp(-rate_i * (s - t0)),   s >= t0,
//! ```
//!
//! and this family is closed under the three operations we need: evaluation,
//! the discounted tail integral `int_t0^inf e^{-r(s-t0)} f(s) ds`, the kernel
//! transform `t -> int_t^inf e^{-r(s-t)} f(s) ds`, and the solution of the
//! scalar linear ODE `m' = -a m + f(s)`. Working in this algebra keeps the
//! trajectory formulas exact instead of discretised.

/// Rates closer than this (relatively) are treated as resonant and produce a
/// polynomial factor instead of a near-cancelling difference quotient.
const RATE_COLLISION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpTerm {
    pub coef: f64,
    pub rate: f64,
    pub pow: u32,
}

/// `c0 + sum coef * (s-t0)^pow * e^{-rate (s-t0)}` for `s >= t0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpSum {
    pub t0: f64,
    pub constant: f64,
    pub terms: Vec<ExpTerm>,
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn binomial(n: u32, k: u32) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

impl ExpSum {
    pub fn constant(t0: f64, value: f64) -> Self {
        ExpSum {
            t0,
            constant: value,
            terms: Vec::new(),
        }
    }

    pub fn push(&mut self, coef: f64, rate: f64, pow: u32) {
        if coef == 0.0 {
            return;
        }
        if rate == 0.0 && pow == 0 {
            self.constant += coef;
            return;
        }
        self.terms.push(ExpTerm { coef, rate, pow });
    }

    pub fn eval(&self, s: f64) -> f64 {
        let tau = s - self.t0;
        let mut acc = self.constant;
        for t in &self.terms {
            acc += t.coef * tau.powi(t.pow as i32) * (-t.rate * tau).exp();
        }
        acc
    }

    /// `int_{t0}^inf e^{-r (s - t0)} f(s) ds`. Requires `r > 0` and
    /// `r + rate > 0` for every term.
    pub fn discounted_integral(&self, r: f64) -> f64 {
        assert!(r > 0.0, "discount rate must be positive");
        let mut acc = self.constant / r;
        for t in &self.terms {
            let total = r + t.rate;
            assert!(total > 0.0, "divergent term: rate {} vs discount {r}", t.rate);
            acc += t.coef * factorial(t.pow) / total.powi(t.pow as i32 + 1);
        }
        acc
    }

    /// Re-express the same function with base point `t >= t0`. Exponentials
    /// pick up a constant factor and powers expand binomially.
    pub fn rebase(&self, t: f64) -> ExpSum {
        let dt = t - self.t0;
        let mut out = ExpSum::constant(t, self.constant);
        for term in &self.terms {
            // (dt + tau)^pow e^{-rate (dt + tau)}
            let damp = (-term.rate * dt).exp();
            for j in 0..=term.pow {
                out.push(
                    term.coef * damp * binomial(term.pow, j) * dt.powi((term.pow - j) as i32),
                    term.rate,
                    j,
                );
            }
        }
        out
    }

    /// The kernel transform `g(t) = int_t^inf e^{-r (s - t)} f(s) ds`,
    /// returned as an `ExpSum` in `t` with the same base point.
    pub fn kernel_transform(&self, r: f64) -> ExpSum {
        assert!(r > 0.0);
        let mut out = ExpSum::constant(self.t0, self.constant / r);
        for term in &self.terms {
            let total = r + term.rate;
            assert!(total > 0.0, "divergent kernel: rate {} vs {r}", term.rate);
            // int_0^inf e^{-total tau} (u + tau)^pow dtau, u = t - t0
            for j in 0..=term.pow {
                out.push(
                    term.coef * binomial(term.pow, j) * factorial(term.pow - j)
                        / total.powi((term.pow - j) as i32 + 1),
                    term.rate,
                    j,
                );
            }
        }
        out
    }

    /// Solve `m'(s) = -a m(s) + f(s)`, `m(t0) = m0`, for `a >= 0`. The
    /// solution is again an exponential-polynomial sum based at `t0`.
    pub fn solve_linear_ode(&self, a: f64, m0: f64) -> ExpSum {
        assert!(a >= 0.0, "mean-reversion rate must be nonnegative");
        let mut out = ExpSum::constant(self.t0, 0.0);

        if a == 0.0 {
            // Pure integration: m(s) = m0 + int_0^tau f.
            out.constant = m0;
            out.push(self.constant, 0.0, 1);
            for term in &self.terms {
                if term.rate == 0.0 {
                    out.push(term.coef / (term.pow as f64 + 1.0), 0.0, term.pow + 1);
                } else {
                    // int_0^tau u^k e^{-r u} du expands into e^{-r tau} terms
                    // plus a constant (the full integral).
                    let r = term.rate;
                    let k = term.pow;
                    out.push(term.coef * factorial(k) / r.powi(k as i32 + 1), 0.0, 0);
                    for j in 0..=k {
                        out.push(
                            -term.coef * factorial(k) / (factorial(j) * r.powi((k - j) as i32 + 1)),
                            r,
                            j,
                        );
                    }
                }
            }
            return out;
        }

        // Particular solution per term, then fix the homogeneous coefficient.
        let mut particular_at_zero = 0.0;
        out.constant = self.constant / a;
        particular_at_zero += self.constant / a;
        for term in &self.terms {
            let d = a - term.rate;
            let scale = a.max(term.rate).max(1.0);
            if d.abs() <= RATE_COLLISION_TOL * scale {
                // Resonant: m_p = coef tau^{k+1} e^{-a tau} / (k+1).
                out.push(term.coef / (term.pow as f64 + 1.0), a, term.pow + 1);
            } else {
                // m_p = p(tau) e^{-rate tau} with p_j from the recurrence
                // p_k = coef/d, p_{j} = -(j+1) p_{j+1} / d.
                let k = term.pow;
                let mut pj = term.coef / d;
                out.push(pj, term.rate, k);
                for j in (0..k).rev() {
                    pj = -((j + 1) as f64) * pj / d;
                    out.push(pj, term.rate, j);
                    if j == 0 {
                        particular_at_zero += pj;
                    }
                }
                if k == 0 {
                    particular_at_zero += term.coef / d;
                }
            }
        }
        out.push(m0 - particular_at_zero, a, 0);
        out
    }

    pub fn scaled(&self, factor: f64) -> ExpSum {
        let mut out = self.clone();
        out.constant *= factor;
        for t in &mut out.terms {
            t.coef *= factor;
        }
        out
    }

    /// Add another sum sharing the same base point.
    pub fn add(&mut self, other: &ExpSum) {
        assert!(
            (self.t0 - other.t0).abs() < 1e-12,
            "base points differ: {} vs {}",
            self.t0,
            other.t0
        );
        self.constant += other.constant;
        for t in &other.terms {
            self.terms.push(*t);
        }
    }

    pub fn add_constant(&mut self, value: f64) {
        self.constant += value;
    }

    /// Upper bound on `sup_{s >= t0} |f(s)|`; infinite when a polynomial
    /// term has no exponential damping. Uses `max tau^p e^{-r tau} = (p/(e r))^p`.
    pub fn abs_bound(&self) -> f64 {
        let mut acc = self.constant.abs();
        for t in &self.terms {
            if t.rate <= 0.0 {
                if t.pow > 0 || t.rate < 0.0 {
                    return f64::INFINITY;
                }
                acc += t.coef.abs();
            } else if t.pow == 0 {
                acc += t.coef.abs();
            } else {
                let peak = (t.pow as f64 / (std::f64::consts::E * t.rate)).powi(t.pow as i32);
                acc += t.coef.abs() * peak;
            }
        }
        acc
    }

    /// Limit as `s -> inf`; infinite when a polynomial-only term remains.
    pub fn limit_at_infinity(&self) -> f64 {
        let mut acc = self.constant;
        for t in &self.terms {
            if t.rate == 0.0 && t.pow > 0 {
                return if t.coef > 0.0 {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                };
            }
        }
        // All exponential terms vanish.
        let _ = &mut acc;
        acc
    }
}
