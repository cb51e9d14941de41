//! Model constants, unit conventions, validation, and derived elementary costs.
//!
//! Unit conventions: all prices are in EUR/MWh, capacities in MW, rates per
//! year. Config values are stored in these units and never rescaled
//! internally. The capital costs `c` and `h` are usually supplied through
//! their annuities (`rho*c/b` and `rho*h`, both EUR/MWh) because only the
//! annuities are economically meaningful here.

/// Margin below which `rho - sigma^2` triggers a well-posedness warning.
pub const RHO_SIGMA_MARGIN: f64 = 1e-6;

/// All economic and stochastic constants of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Discount rate (1/year). Must exceed `sigma^2`.
    pub rho: f64,
    /// Distributed-generation volatility (1/sqrt(year)).
    pub sigma: f64,
    /// Solar load factor (dimensionless).
    pub b: f64,
    /// Per-unit distributed capacity cost; `rho*c/b` is the EUR/MWh annuity.
    pub c: f64,
    /// Distributed adjustment cost (EUR/MW^2 per year).
    pub gamma: f64,
    /// Transmission cost (EUR/MWh).
    pub theta: f64,
    /// Intermittency-aversion weight (EUR/MW^2 per year).
    pub eta: f64,
    /// Demand level (MW).
    pub demand: f64,
    /// Per-unit centralised capacity cost; `rho*h` is the EUR/MWh annuity.
    pub h: f64,
    /// Centralised adjustment cost (EUR/MW^2 per year).
    pub delta: f64,
    /// Carbon tax (EUR/MWh).
    pub pi: f64,
    /// Commitment penalty (EUR/MW^2 per year).
    pub lambda: f64,
    /// Initial distributed capacity (MW).
    pub x0: f64,
    /// Initial centralised capacity (MW).
    pub q0: f64,
}

/// One violated invariant: the offending field and the broken condition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub condition: &'static str,
}

/// Result of [`validate`]: every violated invariant, plus soft warnings.
/// Validation never aborts; it reports.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    /// One-line summary of all violations, for diagnostics.
    pub fn summary(&self) -> String {
        self.violations
            .iter()
            .map(|v| format!("{}: {}", v.field, v.condition))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// Elementary per-MWh costs derived from the raw constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedCosts {
    /// `rho*c/b` (EUR/MWh): annuity of distributed capacity.
    pub annuity_distributed: f64,
    /// `rho*h` (EUR/MWh): annuity of centralised capacity.
    pub annuity_centralised: f64,
    /// `rho*h + pi` (EUR/MWh): total cost of centralised energy.
    pub total_centralised: f64,
    /// `rho*c/b - theta` (EUR/MWh): net cost of distributed energy.
    pub net_distributed: f64,
}

impl ModelParams {
    /// Check every invariant and list the violations.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let mut fail = |field, condition| report.violations.push(Violation { field, condition });

        if !(self.rho > self.sigma * self.sigma) {
            fail("rho", "rho > sigma^2");
        }
        if !(self.gamma > 0.0) {
            fail("gamma", "gamma > 0");
        }
        if !(self.delta > 0.0) {
            fail("delta", "delta > 0");
        }
        if !(self.lambda >= 0.0) {
            fail("lambda", "lambda >= 0");
        }
        if !(self.eta >= 0.0) {
            fail("eta", "eta >= 0");
        }
        if !(self.b > 0.0) {
            fail("b", "b > 0");
        }
        if !(self.demand > 0.0) {
            fail("D", "D > 0");
        }
        if !(self.theta >= 0.0) {
            fail("theta", "theta >= 0");
        }
        if !(self.pi >= 0.0) {
            fail("pi", "pi >= 0");
        }
        if !(self.c >= 0.0) {
            fail("c", "c >= 0");
        }
        if !(self.h >= 0.0) {
            fail("h", "h >= 0");
        }
        for (field, v) in [
            ("rho", self.rho),
            ("sigma", self.sigma),
            ("x0", self.x0),
            ("q0", self.q0),
        ] {
            if !v.is_finite() {
                report.violations.push(Violation {
                    field,
                    condition: "finite",
                });
            }
        }

        let margin = self.rho - self.sigma * self.sigma;
        if margin > 0.0 && margin < RHO_SIGMA_MARGIN {
            report.warnings.push(format!(
                "rho - sigma^2 = {margin:.3e} is below {RHO_SIGMA_MARGIN:.0e}; \
                 the problem is close to ill-posed"
            ));
        }
        report
    }

    /// Derived per-MWh cost combinations.
    pub fn derived_costs(&self) -> DerivedCosts {
        let annuity_distributed = self.rho * self.c / self.b;
        let annuity_centralised = self.rho * self.h;
        DerivedCosts {
            annuity_distributed,
            annuity_centralised,
            total_centralised: annuity_centralised + self.pi,
            net_distributed: annuity_distributed - self.theta,
        }
    }

    /// Construct with capital costs given as annuities (EUR/MWh):
    /// `annuity_distributed = rho*c/b`, `annuity_centralised = rho*h`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_annuities(
        rho: f64,
        sigma: f64,
        b: f64,
        annuity_distributed: f64,
        gamma: f64,
        theta: f64,
        eta: f64,
        demand: f64,
        annuity_centralised: f64,
        delta: f64,
        pi: f64,
        lambda: f64,
    ) -> Self {
        ModelParams {
            rho,
            sigma,
            b,
            c: annuity_distributed * b / rho,
            gamma,
            theta,
            eta,
            demand,
            h: annuity_centralised / rho,
            delta,
            pi,
            lambda,
            x0: 0.0,
            q0: 0.0,
        }
    }

    /// The baseline calibration used throughout the numerical illustration:
    /// rho = 0.1, sigma = 0.3, b = 0.15, rho*c/b = 130, theta = 50,
    /// rho*h = 100, eta = 876, D = 50 GW, pi = 100, lambda = 8.76e6.
    pub fn baseline() -> Self {
        ModelParams::from_annuities(
            0.1, 0.3, 0.15, 130.0, 1.0, 50.0, 876.0, 50_000.0, 100.0, 1.0, 100.0, 8.76e6,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_is_valid() {
        // rho = 0.1 > sigma^2 = 0.09
        let report = ModelParams::baseline().validate();
        assert!(report.is_valid(), "{}", report.summary());
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn boundary_rho_fails_strict_inequality() {
        let mut p = ModelParams::baseline();
        p.rho = 0.09; // equals sigma^2 exactly
        let report = p.validate();
        assert!(report
            .violations
            .iter()
            .any(|v| v.field == "rho" && v.condition == "rho > sigma^2"));
    }

    #[test]
    fn zero_gamma_is_degenerate() {
        let mut p = ModelParams::baseline();
        p.gamma = 0.0;
        let report = p.validate();
        assert!(report.violations.iter().any(|v| v.field == "gamma"));
    }

    #[test]
    fn near_boundary_warns() {
        let mut p = ModelParams::baseline();
        p.rho = 0.09 + 1e-9;
        let report = p.validate();
        assert!(report.is_valid());
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn derived_costs_arithmetic() {
        let p = ModelParams::baseline();
        let d = p.derived_costs();
        assert!((d.annuity_distributed - 130.0).abs() < 1e-9);
        assert!((d.net_distributed - 80.0).abs() < 1e-9);
        assert!((d.annuity_centralised - 100.0).abs() < 1e-9);
        assert!((d.total_centralised - 200.0).abs() < 1e-9);
    }

    #[test]
    fn derived_costs_zero_inputs() {
        let mut p = ModelParams::baseline();
        p.pi = 0.0;
        p.h = 0.0;
        assert_eq!(p.derived_costs().total_centralised, 0.0);
    }

    #[test]
    fn derived_costs_is_pure() {
        let p = ModelParams::baseline();
        assert_eq!(p.derived_costs(), p.derived_costs());
    }
}
