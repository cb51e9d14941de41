//! Equilibrium electricity prices: the cooperative (Pareto) price that
//! aligns decentralised choices with the planner, and the leader-follower
//! (Stackelberg) price chosen by the firm against the consumer's response.
//!
//! Landmarks: `P_floor = rho c/b - theta` (zero distributed investment) and
//! `P_D = P_floor + 2 sigma^2 K_c D` (full substitution). The Pareto price
//! is the convex combination
//!
//! ```text
//! P* = (1 - K_c/K11) (rho c/b - theta) + (K_c/K11)(rho h + pi),
//! ```
//!
//! admissible when the centralised energy cost dominates the distributed
//! one. The firm's price is
//!
//! ```text
//! P_F(q)  = (lambda delta/(rho delta + K_f)) ((rho h + pi)/(rho delta + K_f) - 2 rho q),
//! xi      = 2 + (lambda/(sigma^2 K_c)) (1 - lambda delta/(rho delta + K_f)^2),
//! P<>(q)  = (1 - 1/xi) P_D + (1/xi) P_F(q),
//! ```
//!
//! a strict convex combination with `xi > 2`, so the leader always prices
//! inside `(P_F(q), P_D)`.

use crate::consumer::{price_bounds, stationary_level, StationaryOutcome};
use crate::error::{Error, Result};
use crate::firm;
use crate::params::ModelParams;
use crate::planner;
use crate::riccati::{scalar_gains, ScalarGains};

/// Pareto price from explicit cost landmarks and gains; the entry point for
/// cross-checking against externally implied gains.
pub fn pareto_price_from(k_c: f64, k11: f64, net_distributed: f64, total_centralised: f64) -> f64 {
    let w = k_c / k11;
    (1.0 - w) * net_distributed + w * total_centralised
}

/// `(P*, admissible)`.
pub fn pareto_price(p: &ModelParams, k_c: f64, k11: f64) -> (f64, bool) {
    let d = p.derived_costs();
    (
        pareto_price_from(k_c, k11, d.net_distributed, d.total_centralised),
        d.net_distributed <= d.total_centralised,
    )
}

/// Relative gap between the consumer's stationary response at `p_star` and
/// the planner's stationary level.
pub fn pareto_consistency(p: &ModelParams, p_star: f64) -> Result<f64> {
    let gains = scalar_gains(p);
    let consumer_x = stationary_level(p, &gains, p_star)?.x_inf;
    let planner_x = planner::stationary_mix(p)?.x_inf;
    Ok((consumer_x - planner_x).abs() / planner_x.abs().max(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StackelbergOutcome {
    pub p_f: f64,
    pub xi: f64,
    pub p_diamond: f64,
    pub admissible: bool,
}

/// The firm's preferred constant price given initial capacity `q`.
pub fn stackelberg_price(p: &ModelParams, gains: &ScalarGains, q: f64) -> Result<StackelbergOutcome> {
    let s2kc = p.sigma * p.sigma * gains.k_c;
    if s2kc == 0.0 {
        return Err(Error::Degenerate(
            "Stackelberg price needs sigma^2 K_c > 0".into(),
        ));
    }
    let denom = p.rho * p.delta + gains.k_f;
    let p_f = p.lambda * p.delta / denom * ((p.rho * p.h + p.pi) / denom - 2.0 * p.rho * q);
    let xi = 2.0 + p.lambda / s2kc * (1.0 - p.lambda * p.delta / (denom * denom));
    let (_, p_d) = price_bounds(p, gains);
    let p_diamond = (1.0 - 1.0 / xi) * p_d + p_f / xi;
    Ok(StackelbergOutcome {
        p_f,
        xi,
        p_diamond,
        admissible: p_f <= p_d && p_diamond > 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Presets {
    /// `P_F(0)`: the zero-capacity follower price.
    pub p_f0: f64,
    pub p_diamond_0: f64,
    /// Legacy-system preset: `h = 0`, `q = D - pi/(2 lambda)`. Absent when
    /// `lambda = 0`.
    pub p_f_tilde_d: Option<f64>,
    pub p_diamond_tilde_d: Option<f64>,
}

pub fn preset_prices(p: &ModelParams, gains: &ScalarGains) -> Result<Presets> {
    let at_zero = stackelberg_price(p, gains, 0.0)?;
    let (tilde_f, tilde_d) = if p.lambda > 0.0 {
        let mut legacy = *p;
        legacy.h = 0.0;
        let q = p.demand - p.pi / (2.0 * p.lambda);
        let out = stackelberg_price(&legacy, gains, q)?;
        (Some(out.p_f), Some(out.p_diamond))
    } else {
        (None, None)
    };
    Ok(Presets {
        p_f0: at_zero.p_f,
        p_diamond_0: at_zero.p_diamond,
        p_f_tilde_d: tilde_f,
        p_diamond_tilde_d: tilde_d,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub name: &'static str,
    pub holds: bool,
}

/// Boolean chain of the expected price ordering; each link is reported,
/// never assumed.
pub fn ordering_report(p: &ModelParams) -> Result<Vec<Verdict>> {
    let gains = scalar_gains(p);
    let sol = planner::solve(p)?;
    let (p_floor, p_d) = price_bounds(p, &gains);
    let (p_star, _) = pareto_price(p, gains.k_c, sol.sare.k11);
    let stack = stackelberg_price(p, &gains, 0.0)?;
    let total = p.derived_costs().total_centralised;
    Ok(vec![
        Verdict { name: "P_floor <= P*", holds: p_floor <= p_star },
        Verdict { name: "P* <= rho h + pi", holds: p_star <= total },
        Verdict { name: "P_F(0) <= rho h + pi", holds: stack.p_f <= total },
        Verdict { name: "rho h + pi <= P_D", holds: total <= p_d },
        Verdict { name: "P* <= P<>(0)", holds: p_star <= stack.p_diamond },
    ])
}

/// Bisect `gamma` so the full-substitution price hits `target_p_d`.
/// `P_D` increases with `gamma` through `K_c`.
pub fn calibrate_gamma(p: &ModelParams, target_p_d: f64) -> Result<f64> {
    let eval = |gamma: f64| {
        let mut q = *p;
        q.gamma = gamma;
        price_bounds(&q, &scalar_gains(&q)).1
    };
    let (mut lo, mut hi) = (1e-15, 1e3);
    let p_floor = p.rho * p.c / p.b - p.theta;
    if target_p_d <= p_floor || eval(lo) > target_p_d || eval(hi) < target_p_d {
        return Err(Error::Calibration(format!(
            "target P_D = {target_p_d} not bracketed on gamma in (1e-15, 1e3)"
        )));
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        let v = eval(mid);
        if (v - target_p_d).abs() <= 1e-6 {
            return Ok(mid);
        }
        if v < target_p_d {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

/// Bisect `gamma` so the planner's leading gain hits `target_k11`.
/// `K11` increases with `gamma`.
pub fn calibrate_gamma_to_k11(p: &ModelParams, target_k11: f64) -> Result<f64> {
    let eval = |gamma: f64| -> Result<f64> {
        let mut q = *p;
        q.gamma = gamma;
        Ok(planner::solve(&q)?.sare.k11)
    };
    let (mut lo, mut hi) = (1e-15, 1e3);
    if eval(lo)? > target_k11 || eval(hi)? < target_k11 {
        return Err(Error::Calibration(format!(
            "target K11 = {target_k11} not bracketed on gamma in (1e-15, 1e3)"
        )));
    }
    for _ in 0..120 {
        let mid = (lo * hi).sqrt();
        let v = eval(mid)?;
        if (v - target_k11).abs() <= 1e-9 * target_k11 {
            return Ok(mid);
        }
        if v < target_k11 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

/// Everything the CLI prints for one parameter set.
#[derive(Debug, Clone)]
pub struct EquilibriumReport {
    pub p_floor: f64,
    pub p_d: f64,
    pub p_star: f64,
    pub pareto_admissible: bool,
    pub stackelberg: StackelbergOutcome,
    pub presets: Presets,
    pub consumer_at_pareto: StationaryOutcome,
    pub consumer_at_diamond: StationaryOutcome,
    pub planner_mix: StationaryOutcome,
    pub ordering: Vec<Verdict>,
}

pub fn report(p: &ModelParams) -> Result<EquilibriumReport> {
    let gains = scalar_gains(p);
    let sol = planner::solve(p)?;
    let (p_floor, p_d) = price_bounds(p, &gains);
    let (p_star, pareto_admissible) = pareto_price(p, gains.k_c, sol.sare.k11);
    let stackelberg = stackelberg_price(p, &gains, p.q0)?;
    let presets = preset_prices(p, &gains)?;
    let consumer_at_pareto = stationary_level(p, &gains, p_star)?;
    let consumer_at_diamond = stationary_level(p, &gains, stackelberg.p_diamond)?;
    let planner_mix = {
        let x_inf = sol.phi.x;
        let q_inf = firm::stationary_level(p, x_inf)?;
        StationaryOutcome {
            p_bar: p_star,
            x_inf,
            q_inf: Some(q_inf),
            share: x_inf / p.demand,
            price_positive: p_star > 0.0,
            x_in_range: (0.0..=p.demand).contains(&x_inf),
            q_positive: Some(q_inf >= 0.0),
        }
    };
    Ok(EquilibriumReport {
        p_floor,
        p_d,
        p_star,
        pareto_admissible,
        stackelberg,
        presets,
        consumer_at_pareto,
        consumer_at_diamond,
        planner_mix,
        ordering: ordering_report(p)?,
    })
}

/// One printed cell of the scenario battery: an equilibrium price and the
/// induced long-run distributed level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableCell {
    pub price: f64,
    pub x_gw: f64,
    pub admissible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableRow {
    pub pi: f64,
    pub delta: f64,
    pub left_pareto: TableCell,
    pub left_stackelberg: TableCell,
    pub right_pareto: TableCell,
    pub right_stackelberg: TableCell,
}

fn pareto_cell(p: &ModelParams) -> Result<TableCell> {
    let gains = scalar_gains(p);
    let sol = planner::solve(p)?;
    let (price, admissible) = pareto_price(p, gains.k_c, sol.sare.k11);
    let x = if admissible { sol.phi.x } else { 0.0 };
    Ok(TableCell {
        price,
        x_gw: x / 1_000.0,
        admissible,
    })
}

fn stackelberg_cell(p: &ModelParams, q: f64) -> Result<TableCell> {
    let gains = scalar_gains(p);
    let out = stackelberg_price(p, &gains, q)?;
    let x = stationary_level(p, &gains, out.p_diamond)?.x_inf;
    Ok(TableCell {
        price: out.p_diamond,
        x_gw: x / 1_000.0,
        admissible: out.admissible,
    })
}

/// The 8-cell scenario battery: `pi in {0, 100}`, `delta in {1, 1e-2}`,
/// new-build (left, `x0 = q0 = 0`) vs legacy system (right, `h = 0`,
/// `q0 = D - pi/(2 lambda)`).
pub fn table1(base: &ModelParams) -> Result<Vec<TableRow>> {
    let mut rows = Vec::with_capacity(4);
    for &pi in &[0.0, 100.0] {
        for &delta in &[1.0, 1e-2] {
            let mut left = *base;
            left.pi = pi;
            left.delta = delta;
            left.x0 = 0.0;
            left.q0 = 0.0;
            let mut right = left;
            right.h = 0.0;
            right.q0 = base.demand - pi / (2.0 * base.lambda);
            rows.push(TableRow {
                pi,
                delta,
                left_pareto: pareto_cell(&left)?,
                left_stackelberg: stackelberg_cell(&left, left.q0)?,
                right_pareto: pareto_cell(&right)?,
                right_stackelberg: stackelberg_cell(&right, right.q0)?,
            });
        }
    }
    Ok(rows)
}

fn round_price(p: f64) -> f64 {
    (p * 2.0).round() / 2.0
}

fn round_gw(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

fn fmt_price(c: &TableCell) -> String {
    if c.admissible {
        format!("{}", round_price(c.price))
    } else {
        "n.e.".into()
    }
}

fn fmt_gw(c: &TableCell) -> String {
    format!("{}", round_gw(c.x_gw))
}

pub fn render_table1_markdown(rows: &[TableRow]) -> String {
    let mut out = String::new();
    out.push_str("| scenario | P* | X (GW) | P<> | X (GW) | P~* | X (GW) | P~<> | X (GW) |\n");
    out.push_str("|---|---|---|---|---|---|---|---|---|\n");
    for r in rows {
        out.push_str(&format!(
            "| pi={}, delta={} | {} | {} | {} | {} | {} | {} | {} | {} |\n",
            r.pi,
            r.delta,
            fmt_price(&r.left_pareto),
            fmt_gw(&r.left_pareto),
            fmt_price(&r.left_stackelberg),
            fmt_gw(&r.left_stackelberg),
            fmt_price(&r.right_pareto),
            fmt_gw(&r.right_pareto),
            fmt_price(&r.right_stackelberg),
            fmt_gw(&r.right_stackelberg),
        ));
    }
    out
}

pub fn render_table1_csv(rows: &[TableRow]) -> String {
    let mut out = String::from(
        "pi,delta,p_star,x_star_gw,p_diamond,x_diamond_gw,p_star_legacy,x_star_legacy_gw,p_diamond_legacy,x_diamond_legacy_gw\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.pi,
            r.delta,
            fmt_price(&r.left_pareto),
            fmt_gw(&r.left_pareto),
            fmt_price(&r.left_stackelberg),
            fmt_gw(&r.left_stackelberg),
            fmt_price(&r.right_pareto),
            fmt_gw(&r.right_pareto),
            fmt_price(&r.right_stackelberg),
            fmt_gw(&r.right_stackelberg),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn calibrated_baseline() -> ModelParams {
        let mut p = ModelParams::baseline();
        p.gamma = calibrate_gamma(&p, 282.0).unwrap();
        p
    }

    #[test]
    fn pareto_endpoints() {
        let p = ModelParams::baseline();
        let d = p.derived_costs();
        // equal gains: price sits at the centralised cost
        let at_top = pareto_price_from(2.0, 2.0, d.net_distributed, d.total_centralised);
        assert_eq!(at_top, d.total_centralised);
        // dominant planner gain: price sits near the distributed cost
        let near_floor = pareto_price_from(1e-9, 1.0, d.net_distributed, d.total_centralised);
        assert!((near_floor - d.net_distributed).abs() < 1e-6);
    }

    #[test]
    fn pareto_lies_between_costs_when_admissible() {
        let p = calibrated_baseline();
        let gains = scalar_gains(&p);
        let sol = planner::solve(&p).unwrap();
        let (p_star, adm) = pareto_price(&p, gains.k_c, sol.sare.k11);
        assert!(adm);
        let d = p.derived_costs();
        assert!(d.net_distributed <= p_star && p_star <= d.total_centralised);
    }

    #[test]
    fn pareto_consistency_is_tiny() {
        let p = calibrated_baseline();
        let gains = scalar_gains(&p);
        let sol = planner::solve(&p).unwrap();
        let (p_star, _) = pareto_price(&p, gains.k_c, sol.sare.k11);
        let residual = pareto_consistency(&p, p_star).unwrap();
        assert!(residual <= 1e-9, "residual = {residual:e}");
    }

    #[test]
    fn stackelberg_lambda_zero_halves_p_d() {
        let mut p = calibrated_baseline();
        p.lambda = 0.0;
        let gains = scalar_gains(&p);
        let (_, p_d) = price_bounds(&p, &gains);
        let out = stackelberg_price(&p, &gains, 0.0).unwrap();
        assert_eq!(out.p_f, 0.0);
        assert_eq!(out.xi, 2.0);
        assert!((out.p_diamond - p_d / 2.0).abs() < 1e-12 * p_d);
    }

    #[test]
    fn xi_exceeds_two_and_dual_route_agrees() {
        for &(delta, q) in &[(1.0, 0.0), (1e-2, 0.0), (1.0, 20_000.0)] {
            let mut p = calibrated_baseline();
            p.delta = delta;
            let gains = scalar_gains(&p);
            let out = stackelberg_price(&p, &gains, q).unwrap();
            assert!(out.xi > 2.0);
            let denom = p.rho * p.delta + gains.k_f;
            let alt = 2.0
                + p.lambda / (p.sigma * p.sigma * gains.k_c) * (p.rho * p.delta / denom);
            assert!(
                (out.xi - alt).abs() <= 1e-10 * alt,
                "xi {} vs {alt}",
                out.xi
            );
        }
    }

    #[test]
    fn diamond_is_strict_convex_combination() {
        let p = calibrated_baseline();
        let gains = scalar_gains(&p);
        let (_, p_d) = price_bounds(&p, &gains);
        let out = stackelberg_price(&p, &gains, 0.0).unwrap();
        assert!(out.p_f < out.p_diamond && out.p_diamond < p_d);
    }

    #[test]
    fn diamond_is_affine_decreasing_in_q() {
        let p = calibrated_baseline();
        let gains = scalar_gains(&p);
        let at = |q: f64| stackelberg_price(&p, &gains, q).unwrap().p_diamond;
        let d1 = at(1_000.0) - at(0.0);
        let d2 = at(2_000.0) - at(1_000.0);
        assert!(d1 < 0.0);
        assert!((d1 - d2).abs() < 1e-9 * d1.abs());
        let out = stackelberg_price(&p, &gains, 0.0).unwrap();
        let denom = p.rho * p.delta + gains.k_f;
        let slope = -2.0 * p.rho * p.lambda * p.delta / (out.xi * denom);
        assert!((d1 / 1_000.0 - slope).abs() < 1e-9 * slope.abs());
    }

    #[test]
    fn grid_search_recovers_diamond() {
        let p = calibrated_baseline();
        let gains = scalar_gains(&p);
        let (p_floor, p_d) = price_bounds(&p, &gains);
        for &q in &[0.0, 10_000.0] {
            let closed = stackelberg_price(&p, &gains, q).unwrap().p_diamond;
            let step = 1e-2;
            let n = ((p_d - p_floor) / step) as usize;
            let mut best = (f64::INFINITY, p_floor);
            for i in 0..=n {
                let price = p_floor + i as f64 * step;
                let v = firm::stationary_value(&p, gains.k_f, &gains, price, q).unwrap();
                if v < best.0 {
                    best = (v, price);
                }
            }
            assert!(
                (best.1 - closed).abs() <= step + 1e-9,
                "q={q}: grid {} vs closed {closed}",
                best.1
            );
        }
    }

    #[test]
    fn legacy_preset_sign() {
        let mut p = calibrated_baseline();
        p.h = 0.0;
        p.pi = 0.0;
        let gains = scalar_gains(&p);
        let out = stackelberg_price(&p, &gains, p.demand).unwrap();
        let denom = p.rho * p.delta + gains.k_f;
        let expect = -2.0 * p.rho * p.demand * p.lambda * p.delta / denom;
        assert!((out.p_f - expect).abs() < 1e-9 * expect.abs());
        assert!(out.p_f < 0.0);
    }

    #[test]
    fn follower_price_approaches_centralised_cost() {
        // with a huge penalty, P_F(0) -> rho h + pi from below
        let mut p = calibrated_baseline();
        p.lambda = 1e12;
        let gains = scalar_gains(&p);
        let out = stackelberg_price(&p, &gains, 0.0).unwrap();
        let total = p.derived_costs().total_centralised;
        assert!(out.p_f < total);
        assert!(total - out.p_f < 0.1);
    }

    #[test]
    fn ordering_chain_all_hold_at_calibration() {
        let p = calibrated_baseline();
        let verdicts = ordering_report(&p).unwrap();
        for v in &verdicts {
            assert!(v.holds, "{} fails", v.name);
        }
    }

    #[test]
    fn pareto_can_exceed_stackelberg_without_penalty() {
        // a vanishing penalty pulls the leader's price toward P_D/2, while a
        // large tax pushes the Pareto price toward rho h + pi above it
        let mut p = calibrated_baseline();
        p.lambda = 1e-3;
        p.pi = 200.0;
        let gains = scalar_gains(&p);
        let sol = planner::solve(&p).unwrap();
        let (p_star, adm) = pareto_price(&p, gains.k_c, sol.sare.k11);
        assert!(adm);
        let out = stackelberg_price(&p, &gains, 0.0).unwrap();
        assert!(p_star > out.p_diamond, "{p_star} vs {}", out.p_diamond);
    }

    #[test]
    fn calibrate_round_trip() {
        let p = ModelParams::baseline();
        let gamma0 = 2.5e-8;
        let mut q = p;
        q.gamma = gamma0;
        let target = price_bounds(&q, &scalar_gains(&q)).1;
        let back = calibrate_gamma(&p, target).unwrap();
        assert!((back - gamma0).abs() <= 1e-6 * gamma0, "{back} vs {gamma0}");
    }

    #[test]
    fn calibrate_hits_target_p_d() {
        let p = calibrated_baseline();
        let (p_floor, p_d) = price_bounds(&p, &scalar_gains(&p));
        assert!((p_d - 282.0).abs() <= 1e-6);
        assert!((p_floor - 80.0).abs() < 1e-9);
        let gains = scalar_gains(&p);
        assert!((gains.k_c - 0.022444).abs() < 1e-4, "K_c = {}", gains.k_c);
    }

    #[test]
    fn impossible_calibration_target() {
        let p = ModelParams::baseline();
        assert!(matches!(
            calibrate_gamma(&p, 50.0),
            Err(Error::Calibration(_))
        ));
    }

    #[test]
    fn calibrate_k11_round_trip() {
        let p = ModelParams::baseline();
        let target = 0.37;
        let gamma = calibrate_gamma_to_k11(&p, target).unwrap();
        let mut q = p;
        q.gamma = gamma;
        let k11 = planner::solve(&q).unwrap().sare.k11;
        assert!((k11 - target).abs() <= 1e-8 * target);
    }

    #[test]
    fn table_battery_layout() {
        let p = calibrated_baseline();
        let rows = table1(&p).unwrap();
        assert_eq!(rows.len(), 4);
        for r in &rows {
            // legacy Pareto cells exist only once the tax covers the gap
            assert_eq!(r.right_pareto.admissible, r.pi >= 80.0);
            assert!(r.left_pareto.admissible);
        }
        let md = render_table1_markdown(&rows);
        assert_eq!(md.matches("n.e.").count(), 2);
        let csv = render_table1_csv(&rows);
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn stationary_share_depends_only_on_cost_gap() {
        // X*_inf is a function of (rho h + pi) - (rho c/b - theta) alone
        let base = calibrated_baseline();
        let mix0 = planner::stationary_mix(&base).unwrap();
        let mut shifted = base;
        shifted.pi += 30.0;
        shifted.c += 30.0 * shifted.b / shifted.rho; // raises rho c/b by 30 too
        let mix1 = planner::stationary_mix(&shifted).unwrap();
        assert!(
            (mix0.x_inf - mix1.x_inf).abs() <= 1e-9 * mix0.x_inf.abs(),
            "{} vs {}",
            mix0.x_inf,
            mix1.x_inf
        );
    }
}
