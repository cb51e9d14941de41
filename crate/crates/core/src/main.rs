//! Scenario runner: every computation in the library behind a subcommand.
//!
//! Data goes to standard output (or files under `--out`); diagnostics go
//! to standard error. Exit codes: 0 success, 1 invalid input, 2 numerical
//! failure, 3 I/O failure.

use clap::{Parser, Subcommand, ValueEnum};
use gencoord::config::{OutputFormat, ScenarioConfig};
use gencoord::consumer::{self, ConsumerPolicy};
use gencoord::equilibrium;
use gencoord::error::Error;
use gencoord::firm::{self, FirmPolicy};
use gencoord::montecarlo::{self, ProbeEntry, SimResult};
use gencoord::params::ModelParams;
use gencoord::planner;
use gencoord::riccati::{self, scalar_gains, DEFAULT_MAX_STEPS, DEFAULT_SARE_TOL};
use gencoord::Result;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "gencoord", version, about = "Centralised vs distributed generation: prices, policies, simulation")]
struct Cli {
    /// Scenario file (key = value); defaults to the built-in baseline.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output artifacts; defaults to standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Simulation seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output format override for tabular artifacts.
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Recalibrate gamma so the full-demand price equals this target
    /// before running the subcommand.
    #[arg(long = "calibrate-pd", global = true)]
    calibrate_pd: Option<f64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Md,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimTarget {
    Consumer,
    /// Consumer population coupled through the empirical mean.
    Interacting,
    Planner,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProbeTarget {
    Consumer,
    Firm,
    Planner,
}

#[derive(Subcommand)]
enum Cmd {
    /// Scalar Riccati gains and the planner's 2x2 solution.
    Gains,
    /// Long-run capacities at a constant price.
    Stationary {
        /// Constant price; defaults to the scenario price model's long-run mean.
        #[arg(long)]
        price: Option<f64>,
    },
    /// The price equating decentralised and planner outcomes.
    Pareto,
    /// The producer's preferred price at a given initial capacity.
    Stackelberg {
        /// Initial centralised capacity (MW); defaults to q0.
        #[arg(long)]
        q: Option<f64>,
    },
    /// Verdict chain for the price ordering.
    Ordering,
    /// The benchmark price/quantity battery over pi and delta.
    Table1,
    /// x_inf monotonicity scan over the adjustment-cost grids.
    Scan,
    /// Monte Carlo paths and cost estimate.
    Simulate {
        #[arg(long, value_enum, default_value = "consumer")]
        target: SimTarget,
    },
    /// Control-perturbation probes (delta cost vs optimal).
    Probe {
        #[arg(long, value_enum, default_value = "consumer")]
        target: ProbeTarget,
    },
    /// Solve gamma from a full-demand price target.
    Calibrate {
        /// Target full-demand price.
        #[arg(long)]
        target_pd: Option<f64>,
        /// Target planner gain K11 (alternative to --target-pd).
        #[arg(long)]
        target_k11: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_class(&e))
        }
    }
}

fn exit_class(e: &Error) -> u8 {
    match e {
        Error::Validation(_) | Error::Config(_) | Error::Domain(_) => 1,
        Error::NonConvergence { .. }
        | Error::Degenerate(_)
        | Error::NotPositiveDefinite(_)
        | Error::Calibration(_) => 2,
        Error::Io(_) => 3,
    }
}

fn run(cli: &Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig {
            params: ModelParams::baseline(),
            price: None,
            run: Default::default(),
        },
    };
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    if let Some(fmt) = cli.format {
        cfg.run.format = match fmt {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Md => OutputFormat::Markdown,
        };
    }
    if let Some(target) = cli.calibrate_pd {
        let gamma = equilibrium::calibrate_gamma(&cfg.params, target)?;
        eprintln!("calibrated gamma = {gamma:.6e} for P_D = {target}");
        cfg.params.gamma = gamma;
    }

    match &cli.cmd {
        Cmd::Gains => cmd_gains(cli, &cfg),
        Cmd::Stationary { price } => cmd_stationary(cli, &cfg, *price),
        Cmd::Pareto => cmd_pareto(cli, &cfg),
        Cmd::Stackelberg { q } => cmd_stackelberg(cli, &cfg, *q),
        Cmd::Ordering => cmd_ordering(cli, &cfg),
        Cmd::Table1 => cmd_table1(cli, &cfg),
        Cmd::Scan => cmd_scan(cli, &cfg),
        Cmd::Simulate { target } => cmd_simulate(cli, &cfg, *target),
        Cmd::Probe { target } => cmd_probe(cli, &cfg, *target),
        Cmd::Calibrate {
            target_pd,
            target_k11,
        } => cmd_calibrate(cli, &cfg, *target_pd, *target_k11),
    }
}

fn emit(cli: &Cli, name: &str, ext: &str, content: &str) -> Result<()> {
    match &cli.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(format!("{name}.{ext}"));
            std::fs::write(&path, content)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{content}"),
    }
    Ok(())
}

fn require_price(cfg: &ScenarioConfig) -> Result<gencoord::price::PriceModel> {
    cfg.price.clone().ok_or_else(|| {
        Error::Validation("this subcommand needs a `price.model` in the scenario file".into())
    })
}

fn cmd_gains(cli: &Cli, cfg: &ScenarioConfig) -> Result<()> {
    let p = &cfg.params;
    let report = p.validate();
    if !report.is_valid() {
        return Err(Error::Validation(report.summary()));
    }
    let g = scalar_gains(p);
    let sare = riccati::solve_sare(p, DEFAULT_SARE_TOL, DEFAULT_MAX_STEPS)?;
    let mut s = String::from("name,value\n");
    for (name, v) in [
        ("k_c", g.k_c),
        ("lambda_c", g.lambda_c),
        ("k_f", g.k_f),
        ("k11", sare.k11),
        ("k12", sare.k12),
        ("k22", sare.k22),
        ("l11", sare.l11),
        ("l12", sare.l12),
        ("l22", sare.l22),
        ("residual_k", sare.residual_k),
        ("residual_lambda", sare.residual_lambda),
    ] {
        writeln!(s, "{name},{v:.12e}").unwrap();
    }
    emit(cli, "gains", "csv", &s)
}

fn cmd_stationary(cli: &Cli, cfg: &ScenarioConfig, price: Option<f64>) -> Result<()> {
    let p = &cfg.params;
    let g = scalar_gains(p);
    let p_bar = match price {
        Some(v) => v,
        None => require_price(cfg)?.stationary_mean().ok_or_else(|| {
            Error::Validation("price model has no long-run mean; pass --price".into())
        })?,
    };
    let out = consumer::stationary_level(p, &g, p_bar)?;
    let out = out.with_q(firm::stationary_level(p, out.x_inf)?);
    let (floor, p_d) = consumer::price_bounds(p, &g);
    let mut s = String::from("name,value\n");
    writeln!(s, "p_bar,{p_bar:.12e}").unwrap();
    writeln!(s, "p_floor,{floor:.12e}").unwrap();
    writeln!(s, "p_d,{p_d:.12e}").unwrap();
    writeln!(s, "x_inf,{:.12e}", out.x_inf).unwrap();
    writeln!(s, "q_inf,{:.12e}", out.q_inf.unwrap()).unwrap();
    writeln!(s, "share,{:.12e}", out.share).unwrap();
    writeln!(s, "admissible,{}", out.admissible()).unwrap();
    emit(cli, "stationary", "csv", &s)
}

fn cmd_pareto(cli: &Cli, cfg: &ScenarioConfig) -> Result<()> {
    let p = &cfg.params;
    let rep = equilibrium::report(p)?;
    let gap = equilibrium::pareto_consistency(p, rep.p_star)?;
    let mut s = String::from("name,value\n");
    writeln!(s, "p_floor,{:.12e}", rep.p_floor).unwrap();
    writeln!(s, "p_d,{:.12e}", rep.p_d).unwrap();
    writeln!(s, "p_star,{:.12e}", rep.p_star).unwrap();
    writeln!(s, "admissible,{}", rep.pareto_admissible).unwrap();
    writeln!(s, "consistency_gap,{gap:.12e}").unwrap();
    writeln!(s, "x_inf,{:.12e}", rep.consumer_at_pareto.x_inf).unwrap();
    writeln!(s, "share,{:.12e}", rep.consumer_at_pareto.share).unwrap();
    emit(cli, "pareto", "csv", &s)
}

fn cmd_stackelberg(cli: &Cli, cfg: &ScenarioConfig, q: Option<f64>) -> Result<()> {
    let p = &cfg.params;
    let g = scalar_gains(p);
    let q = q.unwrap_or(p.q0);
    let out = equilibrium::stackelberg_price(p, &g, q)?;
    let consumer_at = consumer::stationary_level(p, &g, out.p_diamond)?;
    let mut s = String::from("name,value\n");
    writeln!(s, "q,{q:.12e}").unwrap();
    writeln!(s, "p_f,{:.12e}", out.p_f).unwrap();
    writeln!(s, "xi,{:.12e}", out.xi).unwrap();
    writeln!(s, "p_diamond,{:.12e}", out.p_diamond).unwrap();
    writeln!(s, "admissible,{}", out.admissible).unwrap();
    writeln!(s, "x_inf,{:.12e}", consumer_at.x_inf).unwrap();
    emit(cli, "stackelberg", "csv", &s)
}

fn cmd_ordering(cli: &Cli, cfg: &ScenarioConfig) -> Result<()> {
    let verdicts = equilibrium::ordering_report(&cfg.params)?;
    let mut s = String::from("relation,holds\n");
    for v in &verdicts {
        writeln!(s, "{},{}", v.name, v.holds).unwrap();
    }
    emit(cli, "ordering", "csv", &s)
}

fn cmd_table1(cli: &Cli, cfg: &ScenarioConfig) -> Result<()> {
    let rows = equilibrium::table1(&cfg.params)?;
    match cfg.run.format {
        OutputFormat::Markdown => emit(
            cli,
            "table1",
            "md",
            &equilibrium::render_table1_markdown(&rows),
        ),
        OutputFormat::Csv => emit(cli, "table1", "csv", &equilibrium::render_table1_csv(&rows)),
    }
}

fn cmd_scan(cli: &Cli, cfg: &ScenarioConfig) -> Result<()> {
    let grid = [1e-3, 1e-2, 1e-1, 1.0];
    let rows = planner::flexibility_scan(&cfg.params, &grid, &grid)?;
    let mut s = String::from("gamma,delta,k11,x_inf,share,violation\n");
    for r in &rows {
        writeln!(
            s,
            "{:.3e},{:.3e},{:.12e},{:.12e},{:.12e},{}",
            r.gamma, r.delta, r.k11, r.x_inf, r.share, r.violation
        )
        .unwrap();
    }
    emit(cli, "scan", "csv", &s)
}

fn render_sim(res: &SimResult) -> String {
    let mut s = String::new();
    writeln!(s, "# cost = {:.12e}", res.cost).unwrap();
    writeln!(s, "# std_error = {:.12e}", res.std_error).unwrap();
    writeln!(s, "# tail_bound = {:.12e}", res.tail_bound).unwrap();
    writeln!(s, "# negative_frequency = {:.6e}", res.negative_frequency).unwrap();
    match &res.mean_q {
        Some(mq) => {
            s.push_str("t,mean_x,var_x,mean_q,cost_running\n");
            for j in 0..res.grid.len() {
                writeln!(
                    s,
                    "{:.6},{:.12e},{:.12e},{:.12e},{:.12e}",
                    res.grid[j], res.mean_x[j], res.var_x[j], mq[j], res.cost_running[j]
                )
                .unwrap();
            }
        }
        None => {
            s.push_str("t,mean_x,var_x,cost_running\n");
            for j in 0..res.grid.len() {
                writeln!(
                    s,
                    "{:.6},{:.12e},{:.12e},{:.12e}",
                    res.grid[j], res.mean_x[j], res.var_x[j], res.cost_running[j]
                )
                .unwrap();
            }
        }
    }
    s
}

fn consumer_policy(cfg: &ScenarioConfig) -> Result<ConsumerPolicy> {
    let price = require_price(cfg)?;
    ConsumerPolicy::new(cfg.params, scalar_gains(&cfg.params), price)
}

fn cmd_simulate(cli: &Cli, cfg: &ScenarioConfig, target: SimTarget) -> Result<()> {
    let sim = cfg.sim_config();
    let res = match target {
        SimTarget::Consumer => montecarlo::simulate_consumer(&consumer_policy(cfg)?, &sim)?,
        SimTarget::Interacting => {
            montecarlo::simulate_consumer_interacting(&consumer_policy(cfg)?, &sim)?
        }
        SimTarget::Planner => {
            let sol = planner::solve(&cfg.params)?;
            montecarlo::simulate_planner(&sol, &sim)?
        }
    };
    emit(cli, "simulate", "csv", &render_sim(&res))
}

fn render_probes(control: &str, entries: &[ProbeEntry]) -> String {
    let mut s = String::from("control,shape,epsilon,delta_j,std_error\n");
    for e in entries {
        writeln!(
            s,
            "{control},{:?},{},{:.12e},{:.12e}",
            e.shape, e.epsilon, e.delta_j, e.std_error
        )
        .unwrap();
    }
    s
}

fn cmd_probe(cli: &Cli, cfg: &ScenarioConfig, target: ProbeTarget) -> Result<()> {
    let sim = cfg.sim_config();
    let perts = montecarlo::default_perturbations();
    let (name, entries) = match target {
        ProbeTarget::Consumer => (
            "consumer",
            montecarlo::optimality_probe(&consumer_policy(cfg)?, &sim, &perts)?,
        ),
        ProbeTarget::Firm => {
            let pol = consumer_policy(cfg)?;
            let fp = FirmPolicy::new(cfg.params, pol.gains.k_f)?;
            ("firm", montecarlo::firm_probe(&pol, &fp, &sim, &perts)?)
        }
        ProbeTarget::Planner => {
            let sol = planner::solve(&cfg.params)?;
            ("planner", montecarlo::planner_probe(&sol, &sim, &perts)?)
        }
    };
    emit(cli, "probe", "csv", &render_probes(name, &entries))
}

fn cmd_calibrate(
    cli: &Cli,
    cfg: &ScenarioConfig,
    target_pd: Option<f64>,
    target_k11: Option<f64>,
) -> Result<()> {
    let p = &cfg.params;
    let gamma = match (target_pd, target_k11) {
        (Some(pd), None) => equilibrium::calibrate_gamma(p, pd)?,
        (None, Some(k11)) => equilibrium::calibrate_gamma_to_k11(p, k11)?,
        _ => {
            return Err(Error::Validation(
                "pass exactly one of --target-pd or --target-k11".into(),
            ))
        }
    };
    let mut q = *p;
    q.gamma = gamma;
    let g = scalar_gains(&q);
    let (floor, p_d) = consumer::price_bounds(&q, &g);
    let mut s = String::from("name,value\n");
    writeln!(s, "gamma,{gamma:.12e}").unwrap();
    writeln!(s, "k_c,{:.12e}", g.k_c).unwrap();
    writeln!(s, "p_floor,{floor:.12e}").unwrap();
    writeln!(s, "p_d,{p_d:.12e}").unwrap();
    emit(cli, "calibrate", "csv", &s)
}
