//! Centralised price processes: conditional means, discounted kernels, and
//! exact path transitions for simulation.
//!
//! The closed-form controls only consume two functionals of the price:
//! the conditional mean `E[P_s | F_t]` and the discounted kernel
//! `int_t^inf e^{-r(s-t)} E[P_s | F_t] ds` (or the same with the
//! unconditional mean). All three supported models have affine conditional
//! means, so both functionals are closed form:
//!
//! * `Constant(p_bar)`: the price never moves.
//! * `Martingale(p_init, vol)`: `E[P_s | F_t] = P_t`; sample paths are
//!   driftless geometric Brownian motion, which only matters to the
//!   simulator.
//! * `OrnsteinUhlenbeck(p_init, kappa, p_bar, vol)`:
//!   `E[P_s | F_t] = p_bar + (P_t - p_bar) e^{-kappa (s-t)}`.

use crate::error::{Error, Result};
use crate::expsum::ExpSum;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriceModel {
    Constant {
        p_bar: f64,
    },
    Martingale {
        p_init: f64,
        vol: f64,
    },
    OrnsteinUhlenbeck {
        p_init: f64,
        kappa: f64,
        p_bar: f64,
        vol: f64,
    },
}

impl PriceModel {
    pub fn initial_price(&self) -> f64 {
        match *self {
            PriceModel::Constant { p_bar } => p_bar,
            PriceModel::Martingale { p_init, .. } => p_init,
            PriceModel::OrnsteinUhlenbeck { p_init, .. } => p_init,
        }
    }

    /// `E[P_s | F_t]` given the observed price `p_t`.
    pub fn conditional_mean(&self, t: f64, s: f64, p_t: f64) -> Result<f64> {
        if s < t {
            return Err(Error::Domain(format!("conditional mean needs s >= t, got {s} < {t}")));
        }
        Ok(match *self {
            PriceModel::Constant { p_bar } => p_bar,
            PriceModel::Martingale { .. } => p_t,
            PriceModel::OrnsteinUhlenbeck { kappa, p_bar, .. } => {
                p_bar + (p_t - p_bar) * (-kappa * (s - t)).exp()
            }
        })
    }

    /// `int_t^inf e^{-r(s-t)} E[P_s | F_t] ds` when `conditional`, else the
    /// same integral of the unconditional mean `E[P_s]`.
    pub fn discounted_kernel(&self, t: f64, r: f64, p_t: f64, conditional: bool) -> Result<f64> {
        if r <= 0.0 {
            return Err(Error::Domain(format!("kernel rate must be positive, got {r}")));
        }
        Ok(match *self {
            PriceModel::Constant { p_bar } => p_bar / r,
            PriceModel::Martingale { p_init, .. } => {
                if conditional {
                    p_t / r
                } else {
                    p_init / r
                }
            }
            PriceModel::OrnsteinUhlenbeck { p_init, kappa, p_bar, .. } => {
                let deviation = if conditional {
                    p_t - p_bar
                } else {
                    (p_init - p_bar) * (-kappa * t).exp()
                };
                p_bar / r + deviation / (r + kappa)
            }
        })
    }

    /// Long-run mean, when the model has one. All three variants do.
    pub fn stationary_mean(&self) -> Option<f64> {
        Some(match *self {
            PriceModel::Constant { p_bar } => p_bar,
            PriceModel::Martingale { p_init, .. } => p_init,
            PriceModel::OrnsteinUhlenbeck { p_bar, .. } => p_bar,
        })
    }

    /// Unconditional mean `s -> E[P_s]` as an exponential sum based at 0.
    pub fn mean_expsum(&self) -> ExpSum {
        match *self {
            PriceModel::Constant { p_bar } => ExpSum::constant(0.0, p_bar),
            PriceModel::Martingale { p_init, .. } => ExpSum::constant(0.0, p_init),
            PriceModel::OrnsteinUhlenbeck { p_init, kappa, p_bar, .. } => {
                let mut f = ExpSum::constant(0.0, p_bar);
                f.push(p_init - p_bar, kappa, 0);
                f
            }
        }
    }

    /// Conditional mean `s -> E[P_s | F_t]` as an exponential sum based
    /// at `t`, given the observed price `p_t`.
    pub fn conditional_expsum(&self, t: f64, p_t: f64) -> ExpSum {
        match *self {
            PriceModel::Constant { p_bar } => ExpSum::constant(t, p_bar),
            PriceModel::Martingale { .. } => ExpSum::constant(t, p_t),
            PriceModel::OrnsteinUhlenbeck { kappa, p_bar, .. } => {
                let mut f = ExpSum::constant(t, p_bar);
                f.push(p_t - p_bar, kappa, 0);
                f
            }
        }
    }

    /// Unconditional variance of `P_s`.
    pub fn variance(&self, s: f64) -> f64 {
        match *self {
            PriceModel::Constant { .. } => 0.0,
            PriceModel::Martingale { p_init, vol } => {
                p_init * p_init * ((vol * vol * s).exp() - 1.0)
            }
            PriceModel::OrnsteinUhlenbeck { kappa, vol, .. } => {
                if kappa == 0.0 {
                    vol * vol * s
                } else {
                    vol * vol * (1.0 - (-2.0 * kappa * s).exp()) / (2.0 * kappa)
                }
            }
        }
    }

    /// Whether `e^{-rho s} E[P_s^2]` is integrable. The martingale variant's
    /// second moment grows like `e^{vol^2 s}`; the others are bounded.
    pub fn square_integrable(&self, rho: f64) -> bool {
        match *self {
            PriceModel::Martingale { vol, .. } => vol * vol < rho,
            _ => true,
        }
    }

    /// Exact one-step transition for path simulation; `z` is standard normal.
    pub fn step(&self, p_t: f64, dt: f64, z: f64) -> f64 {
        match *self {
            PriceModel::Constant { p_bar } => p_bar,
            PriceModel::Martingale { vol, .. } => {
                p_t * (-0.5 * vol * vol * dt + vol * dt.sqrt() * z).exp()
            }
            PriceModel::OrnsteinUhlenbeck { kappa, p_bar, vol, .. } => {
                if kappa == 0.0 {
                    p_t + vol * dt.sqrt() * z
                } else {
                    let decay = (-kappa * dt).exp();
                    p_bar
                        + (p_t - p_bar) * decay
                        + vol * ((1.0 - decay * decay) / (2.0 * kappa)).sqrt() * z
                }
            }
        }
    }
}
