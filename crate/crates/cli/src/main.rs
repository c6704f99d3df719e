use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rbm_cli::config::{build_model, Config};
use rbm_cli::experiments::{self, commuting_diagonal_model};
use rbm_cli::report;

/// Randomized time-splitting for linear-quadratic optimal control:
/// simulation, optimization, and convergence experiments.
#[derive(Parser)]
#[command(name = "rbm", version, about)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct GlobalArgs {
    /// TOML experiment configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// master seed override
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// realization count override
    #[arg(long, global = true)]
    realizations: Option<u64>,
    /// output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// worker thread count (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Forward-solve the randomized dynamics and report errors against the
    /// original solution
    Simulate {
        /// step size exponent: h = 2^-e
        #[arg(long, default_value_t = 9)]
        h_exponent: u32,
    },
    /// Optimize the randomized problem on one realization and compare with
    /// the original optimum
    Optimize {
        #[arg(long, default_value_t = 9)]
        h_exponent: u32,
    },
    /// Full convergence sweep over the configured step sizes
    Converge,
    /// Variance table of the four heat-rod randomization cases
    Table1 {
        /// compare against the built-in reference values (within 1%)
        #[arg(long)]
        check: bool,
        #[arg(long, default_value_t = 61)]
        nodes: usize,
    },
    /// Forward/control errors across spatial resolutions at fixed h
    MeshStudy {
        #[arg(long, value_delimiter = ',', default_values_t = vec![31usize, 61, 121])]
        nodes: Vec<usize>,
        #[arg(long, default_value_t = 9)]
        h_exponent: u32,
    },
    /// Stepping-time comparison of original vs randomized solves
    Timing {
        #[arg(long, default_value_t = 7)]
        h_exponent: u32,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        /// assert that the randomized stepping beats the original
        #[arg(long)]
        check: bool,
    },
    /// Exact-expectation error bounds on the commuting diagonal model
    CommutativeCheck {
        #[arg(long, value_delimiter = ',', default_values_t = vec![2usize, 4, 6])]
        intervals: Vec<usize>,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
    },
    /// Batch-partition mapping audit: exact inclusion probabilities and
    /// assembled-operator identity
    ParticleCheck {
        /// particle/batch pairs as N:P
        #[arg(long, value_delimiter = ',', default_values_t = vec![String::from("4:2"), String::from("6:2"), String::from("6:3"), String::from("8:4")])]
        pairs: Vec<String>,
    },
}

/// Exit 2: a requested check failed (vs 1 for operational errors).
struct CheckFailed(Vec<String>);

fn run(cli: Cli) -> anyhow::Result<Result<(), CheckFailed>> {
    let mut config = match &cli.global.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.global.seed {
        config.sweep.master_seed = seed;
    }
    if let Some(r) = cli.global.realizations {
        config.sweep.realizations = r;
    }
    if let Some(t) = cli.global.threads.or(config.sweep.threads) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .ok();
    }
    let out = &cli.global.out;

    match &cli.command {
        Command::Simulate { h_exponent } => {
            let model = build_model(&config.model)?;
            let sim = experiments::run_simulate(&model, *h_exponent, &config.sweep)?;
            report::write(out, "records.csv", &report::records_csv(&sim.records))?;
            report::write(out, "trajectory.csv", &sim.trajectory.to_csv())?;
            report::write(out, "schedule.csv", &sim.schedule_csv)?;
            report::write(out, "meta.json", &report::meta_json("simulate", &config))?;
            println!(
                "simulate: {} realizations at h=2^-{h_exponent}, outputs in {}",
                config.sweep.realizations,
                out.display()
            );
            Ok(Ok(()))
        }
        Command::Optimize { h_exponent } => {
            let model = build_model(&config.model)?;
            let opt = experiments::run_optimize(&model, *h_exponent, &config.sweep)?;
            report::write(out, "records.csv", &report::records_csv(&[opt.record.clone()]))?;
            report::write(out, "control.csv", &opt.randomized.control.to_csv())?;
            report::write(out, "control_reference.csv", &opt.reference.control.to_csv())?;
            report::write(out, "history.csv", &opt.randomized.history_csv())?;
            report::write(out, "meta.json", &report::meta_json("optimize", &config))?;
            println!(
                "optimize: J_h = {:.6e} in {} iterations (reference J = {:.6e}), outputs in {}",
                opt.randomized.cost,
                opt.randomized.iterations,
                opt.reference.cost,
                out.display()
            );
            Ok(Ok(()))
        }
        Command::Converge => {
            let model = build_model(&config.model)?;
            let rep = experiments::run_convergence(&model, &config.sweep)?;
            report::write(out, "records.csv", &report::records_csv(&rep.records))?;
            report::write(out, "summary.csv", &report::summary_csv(&rep))?;
            report::write(out, "meta.json", &report::meta_json("converge", &config))?;
            for s in &rep.slopes {
                println!(
                    "{}: slope {:.3} (drop largest h: {:.3})",
                    s.metric, s.slope, s.slope_drop_largest_h
                );
            }
            println!("outputs in {}", out.display());
            Ok(Ok(()))
        }
        Command::Table1 { check, nodes } => {
            let rows =
                experiments::run_variance_table(*nodes, 1.5, config.sweep.resolvent_shift)?;
            report::write(out, "records.csv", &report::variance_table_csv(&rows))?;
            report::write(out, "meta.json", &report::meta_json("table1", &config))?;
            for r in &rows {
                println!("case {:>3}: Var = {:.4e}  Var_W = {:.4}", r.case, r.var, r.var_weighted);
            }
            if *check {
                let failures = experiments::variance_table_check(&rows);
                if !failures.is_empty() {
                    return Ok(Err(CheckFailed(failures)));
                }
                println!("table1 check: all cases within 1%");
            }
            Ok(Ok(()))
        }
        Command::MeshStudy { nodes, h_exponent } => {
            let rows = experiments::run_mesh_study(nodes, *h_exponent, &config.sweep)?;
            report::write(out, "records.csv", &report::mesh_csv(&rows))?;
            report::write(out, "meta.json", &report::meta_json("mesh-study", &config))?;
            for r in &rows {
                println!(
                    "N={:>4}: err={:.4e}  err/sqrt(Var)={:.4e}  err/sqrt(Var_W)={:.4e}",
                    r.nodes, r.state_error, r.state_over_sqrt_var, r.state_over_sqrt_var_weighted
                );
            }
            Ok(Ok(()))
        }
        Command::Timing {
            h_exponent,
            reps,
            check,
        } => {
            let model = build_model(&config.model)?;
            let rows =
                experiments::run_timing(&model, *h_exponent, *reps, config.sweep.master_seed)?;
            report::write(out, "records.csv", &report::timing_csv(&rows))?;
            report::write(out, "meta.json", &report::meta_json("timing", &config))?;
            for r in &rows {
                println!(
                    "{:>13}: setup {:.4}s, stepping median {:.6}s (h={}, K={})",
                    r.solver, r.setup_s, r.step_median_s, r.h, r.intervals
                );
            }
            if *check {
                let original = rows.iter().find(|r| r.solver == "original").unwrap();
                let randomized = rows.iter().find(|r| r.solver == "randomized").unwrap();
                if randomized.step_median_s >= original.step_median_s {
                    return Ok(Err(CheckFailed(vec![format!(
                        "randomized stepping {:.6}s is not faster than original {:.6}s",
                        randomized.step_median_s, original.step_median_s
                    )])));
                }
                println!(
                    "timing check: randomized/original stepping ratio {:.3} < 1",
                    randomized.step_median_s / original.step_median_s
                );
            }
            Ok(Ok(()))
        }
        Command::CommutativeCheck { intervals, horizon } => {
            let (d, t, x0) = commuting_diagonal_model();
            let rows = experiments::run_commutative_check(
                &d,
                &t,
                &x0,
                intervals,
                *horizon,
                config.sweep.resolvent_shift,
            )?;
            report::write(out, "records.csv", &report::commutative_csv(&rows))?;
            report::write(out, "meta.json", &report::meta_json("commutative-check", &config))?;
            let mut failures = Vec::new();
            for r in &rows {
                println!(
                    "K={:>2}: exact {:.4e} <= bounds ({:.4e}, {:.4e}, {:.4e})  pass={}",
                    r.intervals,
                    r.exact_mse,
                    r.growth_bound,
                    r.weighted_bound_identity,
                    r.weighted_bound_resolvent,
                    r.pass
                );
                if !r.pass {
                    failures.push(format!("bound violated at K={}", r.intervals));
                }
            }
            if failures.is_empty() {
                Ok(Ok(()))
            } else {
                Ok(Err(CheckFailed(failures)))
            }
        }
        Command::ParticleCheck { pairs } => {
            let parsed: Vec<(usize, usize)> = pairs
                .iter()
                .map(|s| {
                    let (n, p) = s
                        .split_once(':')
                        .ok_or_else(|| anyhow::anyhow!("pair '{s}' is not N:P"))?;
                    Ok((n.trim().parse()?, p.trim().parse()?))
                })
                .collect::<anyhow::Result<_>>()?;
            let rows = experiments::run_particle_check(&parsed)?;
            report::write(out, "records.csv", &report::particle_csv(&rows))?;
            report::write(out, "meta.json", &report::meta_json("particle-check", &config))?;
            let mut failures = Vec::new();
            for r in &rows {
                println!(
                    "N={} P={}: {} partitions, inclusion exact: {}, assembly max err {:.2e}",
                    r.particles, r.batch, r.partitions, r.inclusion_exact, r.assembly_max_err
                );
                if !r.inclusion_exact || r.assembly_max_err > 1e-12 {
                    failures.push(format!("particle mapping failed at N={} P={}", r.particles, r.batch));
                }
            }
            if failures.is_empty() {
                Ok(Ok(()))
            } else {
                Ok(Err(CheckFailed(failures)))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // usage/help go to stdout with success; argument errors exit 1
            let is_help = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if is_help {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match run(cli) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(CheckFailed(failures))) => {
            for f in failures {
                eprintln!("check failed: {f}");
            }
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
