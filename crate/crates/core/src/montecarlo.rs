//! Monte Carlo validation of the closed-form policies.
//!
//! Euler-Maruyama on `dX = b a dt + sigma X dW` with the closed-form mean
//! `E[X_t]` injected into the feedback, so paths are independent and the
//! cross-path sample mean estimates the true unconditional mean. Costs are
//! the time-discretised discounted sums of the running costs; the
//! law-dependent `eta Var[X_t]` term uses the cross-path sample variance.
//!
//! Reproducibility contract: every variate is a pure function of
//! `(seed, path, step, stream)`, paths are processed in fixed-size blocks,
//! and block results are merged in index order, so output is bit-identical
//! across runs and thread counts. The optimality probes rerun the same
//! seeds under a perturbed control (common random numbers), so the cost
//! difference at `epsilon = 0` is exactly zero.

use crate::consumer::ConsumerPolicy;
use crate::error::{Error, Result};
use crate::firm::FirmPolicy;
use crate::planner::{self, PlannerSolution};
use crate::price::PriceModel;
use crate::rng::CounterRng;
use rayon::prelude::*;

/// Paths per reduction block; fixed so the merge order never depends on
/// the thread count.
const BLOCK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub n_paths: usize,
    /// Step (years).
    pub dt: f64,
    /// Horizon (years).
    pub horizon: f64,
    pub seed: u64,
    /// Discount rate used for the truncation-tail estimate.
    pub tail_rate: f64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 2 {
            return Err(Error::Domain("need at least 2 paths".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Domain("dt must be positive".into()));
        }
        if self.horizon < self.dt {
            return Err(Error::Domain("horizon must cover at least one step".into()));
        }
        if !(self.tail_rate > 0.0) {
            return Err(Error::Domain("tail rate must be positive".into()));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.horizon / self.dt).round().max(1.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub grid: Vec<f64>,
    pub mean_x: Vec<f64>,
    pub var_x: Vec<f64>,
    pub mean_q: Option<Vec<f64>>,
    /// Cumulative discounted cost up to each grid time, including any
    /// law-dependent term.
    pub cost_running: Vec<f64>,
    /// Discounted cost estimate, including any law-dependent term.
    pub cost: f64,
    /// Standard error of the pathwise cost component.
    pub std_error: f64,
    /// Fraction of (path, time) samples with negative distributed capacity.
    pub negative_frequency: f64,
    /// `e^{-tail_rate T}` times the final running-cost rate, over the rate.
    pub tail_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PerturbShape {
    ConstantShift,
    DecayingExp,
    ProportionalToState,
}

/// An additive control perturbation `eps * phi(t, x)`.
#[derive(Debug, Clone, Copy)]
pub struct Perturbation {
    pub shape: PerturbShape,
    pub epsilon: f64,
    /// Natural control scale for the shift shapes.
    pub scale: f64,
    /// Decay rate of the exponential shape.
    pub decay: f64,
}

impl Perturbation {
    fn rate(&self, t: f64, x: f64) -> f64 {
        match self.shape {
            PerturbShape::ConstantShift => self.epsilon * self.scale,
            PerturbShape::DecayingExp => self.epsilon * self.scale * (-self.decay * t).exp(),
            PerturbShape::ProportionalToState => self.epsilon * x,
        }
    }
}

/// The standard probe battery: three shapes times eps in {+-1e-2, +-1e-1}.
pub fn default_perturbations() -> Vec<(PerturbShape, f64)> {
    let mut out = Vec::with_capacity(12);
    for shape in [
        PerturbShape::ConstantShift,
        PerturbShape::DecayingExp,
        PerturbShape::ProportionalToState,
    ] {
        for eps in [-0.1, -0.01, 0.01, 0.1] {
            out.push((shape, eps));
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct ProbeEntry {
    pub shape: PerturbShape,
    pub epsilon: f64,
    /// Perturbed-minus-optimal discounted cost.
    pub delta_j: f64,
    pub std_error: f64,
}

/// Per-block accumulators, merged sequentially in block order.
struct BlockOut {
    sum_x: Vec<f64>,
    sumsq_x: Vec<f64>,
    sum_q: Vec<f64>,
    /// Discounted cost increment at each step, summed over paths.
    sum_cost: Vec<f64>,
    neg: u64,
    sum_last_rate: f64,
}

impl BlockOut {
    fn new(len: usize, with_q: bool) -> Self {
        BlockOut {
            sum_x: vec![0.0; len],
            sumsq_x: vec![0.0; len],
            sum_q: if with_q { vec![0.0; len] } else { Vec::new() },
            sum_cost: vec![0.0; len],
            neg: 0,
            sum_last_rate: 0.0,
        }
    }
}

struct RunOut {
    grid: Vec<f64>,
    mean_x: Vec<f64>,
    var_x: Vec<f64>,
    mean_q: Option<Vec<f64>>,
    path_costs: Vec<f64>,
    /// Mean discounted pathwise cost increment at each step.
    cost_inc: Vec<f64>,
    /// Discounted law-dependent cost increment (the variance penalty) at
    /// each step, shared by all paths.
    common_inc: Vec<f64>,
    negative_frequency: f64,
    tail_bound: f64,
}

impl RunOut {
    fn common_cost(&self) -> f64 {
        self.common_inc.iter().sum()
    }
}

struct Merged {
    mean_x: Vec<f64>,
    var_x: Vec<f64>,
    mean_q: Option<Vec<f64>>,
    cost_inc: Vec<f64>,
    negative_frequency: f64,
    tail_bound: f64,
}

fn merge_blocks(blocks: Vec<BlockOut>, n: usize, tail_rate: f64, horizon: f64) -> Merged {
    let len = blocks[0].sum_x.len();
    let mut sum_x = vec![0.0; len];
    let mut sumsq_x = vec![0.0; len];
    let mut sum_cost = vec![0.0; len];
    let with_q = !blocks[0].sum_q.is_empty();
    let mut sum_q = vec![0.0; len];
    let mut neg = 0u64;
    let mut sum_last = 0.0;
    for b in &blocks {
        for j in 0..len {
            sum_x[j] += b.sum_x[j];
            sumsq_x[j] += b.sumsq_x[j];
            sum_cost[j] += b.sum_cost[j];
            if with_q {
                sum_q[j] += b.sum_q[j];
            }
        }
        neg += b.neg;
        sum_last += b.sum_last_rate;
    }
    let nf = n as f64;
    Merged {
        mean_x: sum_x.iter().map(|s| s / nf).collect(),
        var_x: (0..len)
            .map(|j| ((sumsq_x[j] - sum_x[j] * sum_x[j] / nf) / (nf - 1.0)).max(0.0))
            .collect(),
        mean_q: with_q.then(|| sum_q.iter().map(|s| s / nf).collect()),
        cost_inc: sum_cost.iter().map(|s| s / nf).collect(),
        negative_frequency: neg as f64 / (nf * len as f64),
        tail_bound: (-tail_rate * horizon).exp() * (sum_last / nf).abs() / tail_rate,
    }
}

/// Precomputed per-step pieces of the consumer feedback
/// `a = slope_x (x - m_j) + base_j + slope_p p`.
struct ConsumerPre {
    disc: Vec<f64>,
    m: Vec<f64>,
    base: Vec<f64>,
    slope_x: f64,
    slope_p: f64,
}

fn consumer_pre(pol: &ConsumerPolicy, grid: &[f64]) -> ConsumerPre {
    let p = &pol.params;
    let mean = pol.mean_expsum();
    let g_slow = pol.price.mean_expsum().kernel_transform(pol.rate_slow);
    let g_fast = pol.price.mean_expsum().kernel_transform(pol.rate_fast);
    let half = p.b / (2.0 * p.gamma);
    // conditional kernel split into p-free and p-linear parts
    let (a_cond, b_cond) = match pol.price {
        PriceModel::Constant { p_bar } => (p_bar / pol.rate_fast, 0.0),
        PriceModel::Martingale { .. } => (0.0, 1.0 / pol.rate_fast),
        PriceModel::OrnsteinUhlenbeck { kappa, p_bar, .. } => (
            p_bar * (1.0 / pol.rate_fast - 1.0 / (pol.rate_fast + kappa)),
            1.0 / (pol.rate_fast + kappa),
        ),
    };
    let m: Vec<f64> = grid.iter().map(|&t| mean.eval(t)).collect();
    let base: Vec<f64> = grid
        .iter()
        .zip(&m)
        .map(|(&t, &mj)| {
            -(p.b * pol.gains.lambda_c / p.gamma) * mj
                + pol.constant_term
                + half * (a_cond + g_slow.eval(t) - g_fast.eval(t))
        })
        .collect();
    ConsumerPre {
        disc: grid.iter().map(|&t| (-p.rho * t).exp()).collect(),
        m,
        base,
        slope_x: -(p.b * pol.gains.k_c / p.gamma),
        slope_p: half * b_cond,
    }
}

fn consumer_run(
    pol: &ConsumerPolicy,
    cfg: &SimConfig,
    perturb: Option<&Perturbation>,
) -> Result<RunOut> {
    cfg.validate()?;
    let p = pol.params;
    let n_steps = cfg.n_steps();
    let dt = cfg.dt;
    let grid: Vec<f64> = (0..=n_steps).map(|j| j as f64 * dt).collect();
    let pre = consumer_pre(pol, &grid);
    let rng = CounterRng::new(cfg.seed);
    let sqdt = dt.sqrt();

    let mut path_costs = vec![0.0; cfg.n_paths];
    let blocks: Vec<BlockOut> = path_costs
        .par_chunks_mut(BLOCK)
        .enumerate()
        .map(|(bi, costs)| {
            let mut out = BlockOut::new(n_steps + 1, false);
            for (k, slot) in costs.iter_mut().enumerate() {
                let path = (bi * BLOCK + k) as u64;
                let mut x = p.x0;
                let mut price = pol.price.initial_price();
                let mut cost = 0.0;
                let mut last_rate = 0.0;
                for j in 0..=n_steps {
                    out.sum_x[j] += x;
                    out.sumsq_x[j] += x * x;
                    if x < 0.0 {
                        out.neg += 1;
                    }
                    if j == n_steps {
                        break;
                    }
                    let t = grid[j];
                    let mut alpha = pre.slope_x * (x - pre.m[j]) + pre.base[j] + pre.slope_p * price;
                    if let Some(pert) = perturb {
                        alpha += pert.rate(t, x);
                    }
                    let rate = p.gamma * alpha * alpha
                        + p.c * alpha
                        + (price + p.theta) * (p.demand - x);
                    let inc = pre.disc[j] * rate * dt;
                    cost += inc;
                    out.sum_cost[j] += inc;
                    last_rate = rate;
                    let z = rng.normal(path, j as u64, 0);
                    let w = rng.normal(path, j as u64, 1);
                    x += p.b * alpha * dt + p.sigma * x * sqdt * z;
                    price = pol.price.step(price, dt, w);
                }
                out.sum_last_rate += last_rate;
                *slot = cost;
            }
            out
        })
        .collect();

    let m = merge_blocks(blocks, cfg.n_paths, cfg.tail_rate, cfg.horizon);
    let common_inc: Vec<f64> = (0..=n_steps)
        .map(|j| {
            if j < n_steps {
                pre.disc[j] * p.eta * m.var_x[j] * dt
            } else {
                0.0
            }
        })
        .collect();
    Ok(RunOut {
        grid,
        mean_x: m.mean_x,
        var_x: m.var_x,
        mean_q: None,
        path_costs,
        cost_inc: m.cost_inc,
        common_inc,
        negative_frequency: m.negative_frequency,
        tail_bound: m.tail_bound,
    })
}

fn finalize(run: RunOut) -> SimResult {
    let common_cost = run.common_cost();
    let n = run.path_costs.len() as f64;
    let mean: f64 = run.path_costs.iter().sum::<f64>() / n;
    let var: f64 = run
        .path_costs
        .iter()
        .map(|c| (c - mean) * (c - mean))
        .sum::<f64>()
        / (n - 1.0);
    let mut running = 0.0;
    let cost_running: Vec<f64> = run
        .cost_inc
        .iter()
        .zip(&run.common_inc)
        .map(|(a, b)| {
            running += a + b;
            running
        })
        .collect();
    SimResult {
        grid: run.grid,
        mean_x: run.mean_x,
        var_x: run.var_x,
        mean_q: run.mean_q,
        cost_running,
        cost: mean + common_cost,
        std_error: (var / n).sqrt(),
        negative_frequency: run.negative_frequency,
        tail_bound: run.tail_bound,
    }
}

pub fn simulate_consumer(pol: &ConsumerPolicy, cfg: &SimConfig) -> Result<SimResult> {
    consumer_run(pol, cfg, None).map(finalize)
}

/// Interacting-particle variant: the feedback uses the cross-path
/// empirical mean instead of the closed-form mean, so paths are coupled
/// and the system approximates the mean-field limit as `n_paths` grows.
pub fn simulate_consumer_interacting(pol: &ConsumerPolicy, cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    let p = pol.params;
    let n = cfg.n_paths;
    let n_steps = cfg.n_steps();
    let dt = cfg.dt;
    let grid: Vec<f64> = (0..=n_steps).map(|j| j as f64 * dt).collect();
    let pre = consumer_pre(pol, &grid);
    let slope_mean = -(p.b * pol.gains.lambda_c / p.gamma);
    let rng = CounterRng::new(cfg.seed);
    let sqdt = dt.sqrt();

    let mut xs = vec![p.x0; n];
    let mut ps = vec![pol.price.initial_price(); n];
    let mut path_costs = vec![0.0; n];
    let mut out = BlockOut::new(n_steps + 1, false);
    for j in 0..=n_steps {
        let mut sum = 0.0;
        for &x in &xs {
            sum += x;
            out.sumsq_x[j] += x * x;
            if x < 0.0 {
                out.neg += 1;
            }
        }
        out.sum_x[j] = sum;
        if j == n_steps {
            break;
        }
        let emp_mean = sum / n as f64;
        // p-free feedback part at x = emp_mean, with the closed-form mean
        // replaced by the empirical one in both occurrences
        let rest = pre.base[j] - slope_mean * pre.m[j] + slope_mean * emp_mean;
        let mut cost_sum = 0.0;
        let mut last_sum = 0.0;
        let chunks: Vec<(f64, f64)> = xs
            .par_chunks_mut(BLOCK)
            .zip(ps.par_chunks_mut(BLOCK))
            .zip(path_costs.par_chunks_mut(BLOCK))
            .enumerate()
            .map(|(bi, ((bx, bp), bc))| {
                let mut c_sum = 0.0;
                let mut l_sum = 0.0;
                for k in 0..bx.len() {
                    let path = (bi * BLOCK + k) as u64;
                    let x = bx[k];
                    let price = bp[k];
                    let alpha = pre.slope_x * (x - emp_mean) + rest + pre.slope_p * price;
                    let rate = p.gamma * alpha * alpha
                        + p.c * alpha
                        + (price + p.theta) * (p.demand - x);
                    let inc = pre.disc[j] * rate * dt;
                    bc[k] += inc;
                    c_sum += inc;
                    l_sum += rate;
                    let z = rng.normal(path, j as u64, 0);
                    let w = rng.normal(path, j as u64, 1);
                    bx[k] = x + p.b * alpha * dt + p.sigma * x * sqdt * z;
                    bp[k] = pol.price.step(price, dt, w);
                }
                (c_sum, l_sum)
            })
            .collect();
        for (c_sum, l_sum) in chunks {
            cost_sum += c_sum;
            if j == n_steps - 1 {
                last_sum += l_sum;
            }
        }
        out.sum_cost[j] = cost_sum;
        if j == n_steps - 1 {
            out.sum_last_rate = last_sum;
        }
    }

    let m = merge_blocks(vec![out], n, cfg.tail_rate, cfg.horizon);
    let common_inc: Vec<f64> = (0..=n_steps)
        .map(|j| {
            if j < n_steps {
                pre.disc[j] * p.eta * m.var_x[j] * dt
            } else {
                0.0
            }
        })
        .collect();
    Ok(finalize(RunOut {
        grid,
        mean_x: m.mean_x,
        var_x: m.var_x,
        mean_q: None,
        path_costs,
        cost_inc: m.cost_inc,
        common_inc,
        negative_frequency: m.negative_frequency,
        tail_bound: m.tail_bound,
    }))
}

fn probe_from_runs(
    base: &RunOut,
    perturbed: RunOut,
    shape: PerturbShape,
    epsilon: f64,
) -> ProbeEntry {
    let n = base.path_costs.len() as f64;
    let mean_base: f64 = base.path_costs.iter().sum::<f64>() / n;
    let mean_pert: f64 = perturbed.path_costs.iter().sum::<f64>() / n;
    let delta = (mean_pert + perturbed.common_cost()) - (mean_base + base.common_cost());
    let dmean = mean_pert - mean_base;
    let var: f64 = base
        .path_costs
        .iter()
        .zip(&perturbed.path_costs)
        .map(|(a, b)| {
            let d = b - a - dmean;
            d * d
        })
        .sum::<f64>()
        / (n - 1.0);
    ProbeEntry {
        shape,
        epsilon,
        delta_j: delta,
        std_error: (var / n).sqrt(),
    }
}

/// Perturbation probes for the consumer control. The optimal control must
/// not lose to any perturbation beyond noise: `delta_j >= -2 s.e.`.
pub fn optimality_probe(
    pol: &ConsumerPolicy,
    cfg: &SimConfig,
    perturbations: &[(PerturbShape, f64)],
) -> Result<Vec<ProbeEntry>> {
    let base = consumer_run(pol, cfg, None)?;
    let p0 = pol.price.initial_price();
    let scale = pol
        .optimal_rate(0.0, pol.params.x0, pol.params.x0, p0)
        .abs()
        .max(1.0);
    perturbations
        .iter()
        .map(|&(shape, eps)| {
            let pert = Perturbation {
                shape,
                epsilon: eps,
                scale,
                decay: pol.params.rho,
            };
            let run = consumer_run(pol, cfg, Some(&pert))?;
            Ok(probe_from_runs(&base, run, shape, eps))
        })
        .collect()
}

/// Per-step affine decomposition of the firm's tracking integral
/// `I(t, x, p) = base_j + ix x + ip p`.
struct FirmPre {
    base: Vec<f64>,
    ix: f64,
    ip: f64,
}

fn firm_pre(cons: &ConsumerPolicy, firm: &FirmPolicy, grid: &[f64]) -> FirmPre {
    let d = cons.params.demand;
    let integral = |t: f64, x: f64, p: f64| {
        d / firm.rate
            - cons
                .conditional_mean_expsum(t, x, p)
                .discounted_integral(firm.rate)
    };
    let i00 = integral(0.0, 0.0, 0.0);
    let ix = integral(0.0, 1.0, 0.0) - i00;
    let ip = integral(0.0, 0.0, 1.0) - i00;
    FirmPre {
        base: grid.iter().map(|&t| integral(t, 0.0, 0.0)).collect(),
        ix,
        ip,
    }
}

fn firm_run(
    cons: &ConsumerPolicy,
    firm: &FirmPolicy,
    cfg: &SimConfig,
    perturb: Option<&Perturbation>,
) -> Result<RunOut> {
    cfg.validate()?;
    let p = cons.params;
    let n_steps = cfg.n_steps();
    let dt = cfg.dt;
    let grid: Vec<f64> = (0..=n_steps).map(|j| j as f64 * dt).collect();
    let cpre = consumer_pre(cons, &grid);
    let fpre = firm_pre(cons, firm, &grid);
    let rng = CounterRng::new(cfg.seed);
    let sqdt = dt.sqrt();
    let kf_d = firm.k_f / p.delta;
    let lam_d = p.lambda / p.delta;

    let mut path_costs = vec![0.0; cfg.n_paths];
    let blocks: Vec<BlockOut> = path_costs
        .par_chunks_mut(BLOCK)
        .enumerate()
        .map(|(bi, costs)| {
            let mut out = BlockOut::new(n_steps + 1, true);
            for (k, slot) in costs.iter_mut().enumerate() {
                let path = (bi * BLOCK + k) as u64;
                let mut x = p.x0;
                let mut q = p.q0;
                let mut price = cons.price.initial_price();
                let mut cost = 0.0;
                let mut last_rate = 0.0;
                for j in 0..=n_steps {
                    out.sum_x[j] += x;
                    out.sumsq_x[j] += x * x;
                    out.sum_q[j] += q;
                    if x < 0.0 {
                        out.neg += 1;
                    }
                    if j == n_steps {
                        break;
                    }
                    let t = grid[j];
                    let alpha =
                        cpre.slope_x * (x - cpre.m[j]) + cpre.base[j] + cpre.slope_p * price;
                    let mut nu = -kf_d * q
                        + lam_d * (fpre.base[j] + fpre.ix * x + fpre.ip * price)
                        - firm.constant_term;
                    if let Some(pert) = perturb {
                        nu += pert.rate(t, q);
                    }
                    let resid = p.demand - x;
                    let rate = p.delta * nu * nu
                        + p.h * nu
                        + p.pi * q
                        + p.lambda * (resid - q) * (resid - q)
                        - price * resid;
                    let inc = cpre.disc[j] * rate * dt;
                    cost += inc;
                    out.sum_cost[j] += inc;
                    last_rate = rate;
                    let z = rng.normal(path, j as u64, 0);
                    let w = rng.normal(path, j as u64, 1);
                    x += p.b * alpha * dt + p.sigma * x * sqdt * z;
                    q += nu * dt;
                    price = cons.price.step(price, dt, w);
                }
                out.sum_last_rate += last_rate;
                *slot = cost;
            }
            out
        })
        .collect();

    let m = merge_blocks(blocks, cfg.n_paths, cfg.tail_rate, cfg.horizon);
    Ok(RunOut {
        grid,
        mean_x: m.mean_x,
        var_x: m.var_x,
        mean_q: m.mean_q,
        path_costs,
        cost_inc: m.cost_inc,
        common_inc: vec![0.0; n_steps + 1],
        negative_frequency: m.negative_frequency,
        tail_bound: m.tail_bound,
    })
}

/// Perturbation probes for the firm control against the simulated
/// consumer population.
pub fn firm_probe(
    cons: &ConsumerPolicy,
    firm: &FirmPolicy,
    cfg: &SimConfig,
    perturbations: &[(PerturbShape, f64)],
) -> Result<Vec<ProbeEntry>> {
    let base = firm_run(cons, firm, cfg, None)?;
    let grid = [0.0];
    let fpre = firm_pre(cons, firm, &grid);
    let nu0 = -(firm.k_f / cons.params.delta) * cons.params.q0
        + cons.params.lambda / cons.params.delta
            * (fpre.base[0] + fpre.ix * cons.params.x0 + fpre.ip * cons.price.initial_price())
        - firm.constant_term;
    let scale = nu0.abs().max(1.0);
    perturbations
        .iter()
        .map(|&(shape, eps)| {
            let pert = Perturbation {
                shape,
                epsilon: eps,
                scale,
                decay: cons.params.rho,
            };
            let run = firm_run(cons, firm, cfg, Some(&pert))?;
            Ok(probe_from_runs(&base, run, shape, eps))
        })
        .collect()
}

fn planner_run(
    sol: &PlannerSolution,
    cfg: &SimConfig,
    perturb: Option<&(Perturbation, Perturbation)>,
) -> Result<RunOut> {
    cfg.validate()?;
    let p = sol.params;
    let n_steps = cfg.n_steps();
    let dt = cfg.dt;
    let grid: Vec<f64> = (0..=n_steps).map(|j| j as f64 * dt).collect();
    let means = planner::mean_trajectories(sol, &grid);
    let disc: Vec<f64> = grid.iter().map(|&t| (-p.rho * t).exp()).collect();
    let rng = CounterRng::new(cfg.seed);
    let sqdt = dt.sqrt();

    let mut path_costs = vec![0.0; cfg.n_paths];
    let blocks: Vec<BlockOut> = path_costs
        .par_chunks_mut(BLOCK)
        .enumerate()
        .map(|(bi, costs)| {
            let mut out = BlockOut::new(n_steps + 1, true);
            for (k, slot) in costs.iter_mut().enumerate() {
                let path = (bi * BLOCK + k) as u64;
                let mut x = p.x0;
                let mut q = p.q0;
                let mut cost = 0.0;
                let mut last_rate = 0.0;
                for j in 0..=n_steps {
                    out.sum_x[j] += x;
                    out.sumsq_x[j] += x * x;
                    out.sum_q[j] += q;
                    if x < 0.0 {
                        out.neg += 1;
                    }
                    if j == n_steps {
                        break;
                    }
                    let t = grid[j];
                    let (_, mx, mq) = means[j];
                    let (mut alpha, mut nu) = planner::optimal_rates(sol, x, q, mx, mq);
                    if let Some((pa, pn)) = perturb {
                        alpha += pa.rate(t, x);
                        nu += pn.rate(t, q);
                    }
                    let resid = p.demand - x;
                    let rate = p.gamma * alpha * alpha
                        + p.c * alpha
                        + p.theta * resid
                        + p.delta * nu * nu
                        + p.h * nu
                        + p.pi * q
                        + p.lambda * (resid - q) * (resid - q);
                    let inc = disc[j] * rate * dt;
                    cost += inc;
                    out.sum_cost[j] += inc;
                    last_rate = rate;
                    let z = rng.normal(path, j as u64, 0);
                    x += p.b * alpha * dt + p.sigma * x * sqdt * z;
                    q += nu * dt;
                }
                out.sum_last_rate += last_rate;
                *slot = cost;
            }
            out
        })
        .collect();

    let m = merge_blocks(blocks, cfg.n_paths, cfg.tail_rate, cfg.horizon);
    let common_inc: Vec<f64> = (0..=n_steps)
        .map(|j| {
            if j < n_steps {
                disc[j] * p.eta * m.var_x[j] * dt
            } else {
                0.0
            }
        })
        .collect();
    Ok(RunOut {
        grid,
        mean_x: m.mean_x,
        var_x: m.var_x,
        mean_q: m.mean_q,
        path_costs,
        cost_inc: m.cost_inc,
        common_inc,
        negative_frequency: m.negative_frequency,
        tail_bound: m.tail_bound,
    })
}

pub fn simulate_planner(sol: &PlannerSolution, cfg: &SimConfig) -> Result<SimResult> {
    planner_run(sol, cfg, None).map(finalize)
}

/// Perturbation probes for the planner's pair of controls; each setting
/// perturbs both rates with the same shape and epsilon.
pub fn planner_probe(
    sol: &PlannerSolution,
    cfg: &SimConfig,
    perturbations: &[(PerturbShape, f64)],
) -> Result<Vec<ProbeEntry>> {
    let base = planner_run(sol, cfg, None)?;
    let p = sol.params;
    let (a0, n0) = planner::optimal_rates(sol, p.x0, p.q0, p.x0, p.q0);
    let scale_a = a0.abs().max(1.0);
    let scale_n = n0.abs().max(1.0);
    perturbations
        .iter()
        .map(|&(shape, eps)| {
            let pa = Perturbation {
                shape,
                epsilon: eps,
                scale: scale_a,
                decay: p.rho,
            };
            let pn = Perturbation {
                shape,
                epsilon: eps,
                scale: scale_n,
                decay: p.rho,
            };
            let run = planner_run(sol, cfg, Some(&(pa, pn)))?;
            Ok(probe_from_runs(&base, run, shape, eps))
        })
        .collect()
}
