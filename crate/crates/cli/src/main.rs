use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sbp_elastic::interface::EdgeRestriction;
use sbp_elastic::krylov::{assemble_dense, GhostOperator, SolverConfig};
use sbp_elastic::scenarios::Scenario;
use sbp_elastic::timestepper::TimeConfig;
use sbp_elastic_cli::config::prepare_dir;
use sbp_elastic_cli::experiments::{self, edge_name};
use sbp_elastic_cli::output::{Cell, Table};
use sbp_elastic_cli::{parse_config, run, Result};

#[derive(Parser)]
#[command(name = "sbp-elastic", version, about = "Elastic waves on two-block curvilinear grids with 1:2 refinement")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for randomized checks.
    #[arg(long, global = true, default_value_t = 2024)]
    seed: u64,
    #[arg(long, global = true, default_value = "output")]
    output_dir: PathBuf,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Edge treatment of the restriction: transpose, norm-adjoint, preserving, linear.
    #[arg(long, value_parser = parse_edge, default_value = "linear")]
    edge: EdgeRestriction,
    #[arg(long, default_value_t = 1.3)]
    cfl: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configured simulation.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        cfl: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
    },
    /// Manufactured-solution errors and rates over a sequence of grids.
    Convergence {
        #[arg(long, value_delimiter = ',', default_values_t = [24, 48])]
        intervals: Vec<usize>,
        #[arg(long)]
        periodic: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Energy history of the energy scenario.
    Energy {
        #[arg(long, default_value_t = 2000)]
        steps: usize,
        #[arg(long, default_value_t = 10)]
        stride: usize,
        #[arg(long)]
        periodic: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Condition numbers and iteration counts of the ghost-point solvers.
    SolveBench {
        #[arg(long, value_delimiter = ',', default_values_t = [24])]
        intervals: Vec<usize>,
        #[arg(long, value_parser = parse_edge, default_value = "transpose")]
        edge: EdgeRestriction,
        #[arg(long, default_value_t = 3)]
        block_size: usize,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        /// Skip the SVD-based 2-norm condition numbers.
        #[arg(long)]
        no_svd: bool,
    },
    /// Summation-by-parts identities and interface-operator properties on random data.
    SbpCheck {
        #[arg(long, value_delimiter = ',', default_values_t = [8, 12, 16, 24, 48])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        triples: usize,
        #[arg(long, default_value_t = 1000)]
        pairs: usize,
    },
    /// Write the assembled ghost-system matrix as (row, col, value) triplets.
    DumpInterfaceMatrix {
        #[arg(long, default_value_t = 24)]
        intervals: usize,
        #[arg(long, value_parser = parse_edge, default_value = "linear")]
        edge: EdgeRestriction,
    },
}

fn parse_edge(s: &str) -> std::result::Result<EdgeRestriction, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("unknown edge treatment `{s}`"))
}

fn execute(cli: Cli) -> Result<bool> {
    let out = cli.output_dir.clone();
    match cli.command {
        Command::Run { config, dt, cfl, t_end } => {
            let mut cfg = parse_config(&config)?;
            cfg.output.dir = out;
            cfg.time.dt = dt.or(cfg.time.dt);
            cfg.time.cfl = cfl.unwrap_or(cfg.time.cfl);
            cfg.time.t_end = t_end.or(cfg.time.t_end);
            let o = run(&cfg)?;
            println!("{} steps of {:.6e}; manifest in {}", o.manifest.steps, o.manifest.dt, cfg.output.dir.join("manifest.json").display());
            if let Some(e) = o.final_error {
                println!("final L2 error {:.6e} (max {:.6e})", e.l2, e.max);
            }
            Ok(o.manifest.solver_stats.not_converged == 0)
        }
        Command::Convergence { intervals, periodic, common } => {
            prepare_dir(&out)?;
            let mut rows = Vec::new();
            for iv in intervals {
                let r = experiments::mms_run(iv, periodic, common.edge, SolverConfig::default(), common.cfl)?;
                println!(
                    "2h = 2π/{iv}: L2 {:.6e} (coarse {:.6e}, fine {:.6e}); Jacobian-weighted {:.6e}",
                    r.global.l2_grid, r.coarse.l2_grid, r.fine.l2_grid, r.global.l2
                );
                rows.push(r);
            }
            experiments::write_convergence(&out.join("convergence.csv"), &rows)?;
            Ok(true)
        }
        Command::Energy { steps, stride, periodic, common } => {
            prepare_dir(&out)?;
            let s = Scenario::energy(periodic);
            let (model, p) = experiments::two_block(&s, None, common.edge, s.recommended_solver())?;
            let (dt, full) = model.time_grid(&TimeConfig { cfl: common.cfl, t_end: s.t_end, dt: None })?;
            let r = experiments::energy_run(&model, p.as_ref(), dt, steps.min(full), stride)?;
            experiments::write_energy(&out.join("energy.csv"), &r)?;
            println!("{} steps of {dt:.6e}: max relative drift {:.3e}", r.steps, r.max_drift);
            if let Some(k) = r.diverged_at {
                println!("energy blew up at step {k}");
            }
            Ok(r.diverged_at.is_none())
        }
        Command::SolveBench { intervals, edge, block_size, tol, no_svd } => {
            prepare_dir(&out)?;
            let mut rows = Vec::new();
            for iv in intervals {
                let r = experiments::solve_bench(iv, edge, block_size, tol, !no_svd)?;
                println!("2h = 2π/{iv} ({} unknowns): cond₁ {:.2} / {:.2} / {:.2}", r.unknowns, r.cond_l1[0], r.cond_l1[1], r.cond_l1[2]);
                rows.push(r);
            }
            experiments::write_bench(&out.join("solve_bench.csv"), &rows)?;
            Ok(true)
        }
        Command::SbpCheck { sizes, triples, pairs } => {
            prepare_dir(&out)?;
            let rows = experiments::sbp_check(&sizes, triples, cli.seed)?;
            let mut t = Table::create(
                &out.join("sbp_check.csv"),
                &["n", "first_derivative", "ghost_second_derivative", "free_second_derivative", "symmetry", "min_eigenvalue"],
            )?;
            for r in &rows {
                t.row(&[
                    r.n.into(),
                    r.first_derivative.into(),
                    r.ghost_second_derivative.into(),
                    r.free_second_derivative.into(),
                    r.symmetry.into(),
                    r.min_eigenvalue.into(),
                ])?;
            }
            t.finish()?;
            let i = experiments::interface_check(pairs, cli.seed)?;
            let mut t = Table::create(&out.join("interface_check.csv"), &["property", "edge", "value"])?;
            t.row(&["restriction_minus_quarter_transpose".into(), "transpose".into(), i.restriction_vs_transpose.into()])?;
            t.row(&["bicubic_interpolation_error".into(), "transpose".into(), i.bicubic.into()])?;
            for (e, d) in &i.adjoint {
                t.row(&["adjoint_defect".into(), edge_name(*e).into(), Cell::Num(*d)])?;
            }
            t.finish()?;
            let worst = rows.iter().map(|r| r.worst()).fold(0.0, f64::max);
            let adj = i.adjoint.iter().map(|a| a.1).fold(0.0, f64::max);
            println!("SBP identities: worst relative residual {worst:.2e}; interface adjoint defect {adj:.2e}");
            Ok(worst < 1e-12 && adj < 1e-12 && i.restriction_vs_transpose == 0.0 && i.bicubic < 1e-12)
        }
        Command::DumpInterfaceMatrix { intervals, edge } => {
            prepare_dir(&out)?;
            let (model, _) = experiments::two_block(&Scenario::mms(intervals), None, edge, SolverConfig::default())?;
            let iface = model.interface.as_ref().expect("two-block model");
            let k = assemble_dense(&GhostOperator(iface), SolverConfig::default().dense_cap)?;
            let path = out.join(format!("ghost_matrix_{intervals}_{}.csv", edge_name(edge)));
            let mut t = Table::create(&path, &["row", "col", "value"])?;
            for c in 0..k.ncols() {
                for r in 0..k.nrows() {
                    if k[(r, c)] != 0.0 {
                        t.row(&[r.into(), c.into(), k[(r, c)].into()])?;
                    }
                }
            }
            t.finish()?;
            println!("{}×{} matrix written to {}", k.nrows(), k.ncols(), path.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
