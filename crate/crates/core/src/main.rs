//! Command-line interface: single runs, convergence sweeps, CFL stability
//! scans, divergence-cleaning studies, and SBP operator self-checks.

use clap::{Parser, Subcommand};
use induction::cleaning::CleanMethod;
use induction::error::Error;
use induction::harness::{
    self, run_clean_study, run_convergence, run_simulation, RunConfig,
};
use induction::rhs::FormSelection;
use induction::sbp::SbpOp1D;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "induction",
    about = "High-order SBP finite-difference solver for the magnetic induction equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print SBP identity and accuracy residuals for one operator.
    SbpCheck {
        #[arg(long, default_value_t = 4)]
        order: usize,
        #[arg(long, default_value_t = 32)]
        n: usize,
    },
    /// Run a single simulation described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Convergence sweep over node counts.
    Converge {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated node counts, e.g. 40,80,160.
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        /// CSV output path (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scan CFL numbers from the largest down to the first stable one.
    CflScan {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated CFL numbers (hall cases interpret them as cfl/N).
        #[arg(long, value_delimiter = ',')]
        cfl_grid: Vec<f64>,
    },
    /// Compare divergence-cleaning methods on one setup.
    CleanStudy {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated methods: none,ws-ln,ws-d0,ns-d0.
        #[arg(long, value_delimiter = ',')]
        methods: Vec<String>,
        /// Run all six standard form combinations instead of the config's.
        #[arg(long)]
        presets: bool,
        /// CSV output path (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn sbp_check(order: usize, n: usize) -> Result<(), Error> {
    let op = SbpOp1D::new(order, n, 1.0 / (n as f64 - 1.0))?;
    let dx = op.dx();
    let dense = op.d_op_dense();
    let m = op.m_weights();
    let mut identity: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut e = 0.0;
            if i == j && i == 0 {
                e = -1.0;
            }
            if i == j && i == n - 1 {
                e = 1.0;
            }
            identity = identity.max((m[i] * dense[i * n + j] + dense[j * n + i] * m[j] - e).abs());
        }
    }
    let ones = vec![1.0; n];
    let mut out = vec![0.0; n];
    op.apply_d(&ones, &mut out);
    let rowsum = out.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    println!("order {order}, n {n}, dx {dx:.6e}");
    println!("max |M D + D^T M - E|      = {identity:.3e}");
    println!("max |D 1| (row sums)       = {rowsum:.3e}");
    for k in 1..=order {
        let f: Vec<f64> = (0..n).map(|i| (i as f64 * dx).powi(k as i32)).collect();
        op.apply_d(&f, &mut out);
        let mut interior: f64 = 0.0;
        let mut boundary: f64 = 0.0;
        let nb = op.closure_rows();
        for i in 0..n {
            let x = i as f64 * dx;
            let err = (out[i] - k as f64 * x.powi(k as i32 - 1)).abs();
            if i < nb || i >= n - nb {
                boundary = boundary.max(err);
            } else {
                interior = interior.max(err);
            }
        }
        println!("x^{k}: interior residual {interior:.3e}, closure residual {boundary:.3e}");
    }
    let w_sum: f64 = m.iter().sum();
    println!("sum of norm weights - 1    = {:.3e}", w_sum - 1.0);
    Ok(())
}

fn cmd_run(config: PathBuf, output_dir: Option<PathBuf>) -> Result<(), Error> {
    let mut cfg = RunConfig::from_json_file(&config)?;
    if output_dir.is_some() {
        cfg.output_dir = output_dir;
    }
    let result = run_simulation(&cfg)?;
    let (eps_b, eps_div) = harness::compute_errors(
        &result.grid,
        &result.state,
        result.final_time,
        cfg.case,
        &cfg.hall_exact(),
    );
    let energy = induction::grid::energy(&result.grid, &result.state);
    println!(
        "case {} order {} N {} forms {}",
        cfg.case.name(),
        cfg.order,
        cfg.n,
        cfg.forms.label()
    );
    println!(
        "steps {}  t_final {:.6}  wall {:.3}s",
        result.steps, result.final_time, result.wall_seconds
    );
    if result.blew_up {
        println!("result: NaN (blow-up detected)");
    } else {
        println!("energy ||B||_M^2 = {energy:.8e}");
        println!("eps_divB         = {eps_div:.8e}");
        if let Some(e) = eps_b {
            println!("eps_B            = {e:.8e}");
        }
    }
    if cfg.divclean.method != CleanMethod::None {
        let c = &result.clean_summary;
        println!(
            "cleaning: {} applications ({} skipped), {} CG iterations, max post div {:.3e}, {} breakdowns",
            c.applications, c.skipped, c.total_iterations, c.max_post_div, c.breakdowns
        );
    }
    harness::emit_run_outputs(&cfg, &result)?;
    Ok(())
}

fn cmd_converge(config: PathBuf, ns: Vec<usize>, out: Option<PathBuf>) -> Result<(), Error> {
    if ns.is_empty() {
        return Err(Error::InvalidConfig("need at least one node count".into()));
    }
    let cfg = RunConfig::from_json_file(&config)?;
    let report = run_convergence(&cfg, &ns)?;
    match out {
        Some(path) => {
            let mut f = std::fs::File::create(path)?;
            harness::write_convergence_csv(&mut f, &report)?;
        }
        None => harness::write_convergence_csv(&mut std::io::stdout().lock(), &report)?,
    }
    Ok(())
}

fn cmd_cfl_scan(config: PathBuf, grid: Vec<f64>) -> Result<(), Error> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("need at least one CFL value".into()));
    }
    let cfg = RunConfig::from_json_file(&config)?;
    let scan = harness::run_cfl_scan(&cfg, &grid)?;
    for (cfl, stable) in &scan.tried {
        println!(
            "cfl {:.4} -> {}",
            cfl,
            if *stable { "stable" } else { "blow-up" }
        );
    }
    match scan.max_stable {
        Some(c) => println!("max stable cfl: {c:.4}"),
        None => println!("no stable cfl in the scanned range"),
    }
    Ok(())
}

fn cmd_clean_study(
    config: PathBuf,
    methods: Vec<String>,
    presets: bool,
    out: Option<PathBuf>,
) -> Result<(), Error> {
    let cfg = RunConfig::from_json_file(&config)?;
    let methods: Vec<CleanMethod> = methods
        .iter()
        .map(|s| {
            CleanMethod::parse(s)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown cleaning method '{s}'")))
        })
        .collect::<Result<_, _>>()?;
    if methods.is_empty() {
        return Err(Error::InvalidConfig("need at least one method".into()));
    }
    let forms: Vec<FormSelection> = if presets {
        FormSelection::presets().to_vec()
    } else {
        vec![cfg.forms]
    };
    let rows = run_clean_study(&cfg, &forms, &methods)?;
    match out {
        Some(path) => {
            let mut f = std::fs::File::create(path)?;
            harness::write_cleanstudy_csv(&mut f, &rows)?;
        }
        None => harness::write_cleanstudy_csv(&mut std::io::stdout().lock(), &rows)?,
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::SbpCheck { order, n } => sbp_check(order, n),
        Command::Run { config, output_dir } => cmd_run(config, output_dir),
        Command::Converge { config, n, out } => cmd_converge(config, n, out),
        Command::CflScan { config, cfl_grid } => cmd_cfl_scan(config, cfl_grid),
        Command::CleanStudy {
            config,
            methods,
            presets,
            out,
        } => cmd_clean_study(config, methods, presets, out),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
