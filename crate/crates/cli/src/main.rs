use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{ArgAction, Parser, Subcommand};
use fcmg::experiments::{
    cmd_hierarchy, cmd_lambda_hist, cmd_solve, cmd_sweep, cmd_table, write_hierarchy_csv,
    write_lambda_csv, write_sweep_csv, write_table_csv, ExperimentConfig,
};
use fcmg::multigrid::CoarseOp;
use fcmg::stabilization::Scheme;

/// Finite cell Poisson solver with Nitsche boundary conditions and
/// adaptive geometric multigrid.
#[derive(Parser, Debug)]
#[command(name = "fcmg", version)]
struct Cli {
    /// TOML configuration; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for result files.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true)]
    scheme: Option<Scheme>,
    #[arg(long = "coarse-op", global = true)]
    coarse_op: Option<CoarseOp>,
    /// Comma-separated sweep factors, e.g. `0.25,1,4`.
    #[arg(long, global = true, value_delimiter = ',')]
    factors: Option<Vec<f64>>,
    /// Number of adaptive refinement levels.
    #[arg(long, global = true)]
    levels: Option<u8>,
    /// Reserved; runs do not use random numbers.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Sequential, bit-reproducible execution (always on).
    #[arg(long, global = true, action = ArgAction::SetTrue)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// DoF counts and stabilization estimates per mesh.
    Table,
    /// Two-grid solves with the estimate scaled by each factor.
    Sweep,
    /// Reduction rates over all meshes and scheme/coarse-operator cases.
    Hierarchy,
    /// Per-cell local estimates of one mesh.
    LambdaHist {
        /// Mesh index; defaults to the finest.
        #[arg(long)]
        level: Option<usize>,
    },
    /// One multigrid solve on the finest mesh.
    Solve,
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.scheme {
        cfg.solver.scheme = s;
    }
    if let Some(c) = cli.coarse_op {
        cfg.solver.coarse_op = c;
    }
    if let Some(f) = &cli.factors {
        cfg.solver.factors = f.clone();
    }
    if let Some(l) = cli.levels {
        cfg.mesh.adaptive_levels = l;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.output {
        cfg.output = o.display().to_string();
    }
    if cfg.output.is_empty() {
        cfg.output = "results".into();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    println!("writing {}", path.display());
    Ok(BufWriter::new(f))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cfg = resolve(&cli)?;
    let dir = PathBuf::from(&cfg.output);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let hash = cfg.hash();

    match cli.command {
        Command::Table => {
            let rows = cmd_table(&cfg)?;
            for r in &rows {
                println!(
                    "tau_{}  n_dof {:>7}  lambda_g {:>14}  lambda_l_mean {:>14}",
                    r.level,
                    r.n_dof,
                    if r.global_skipped {
                        "-".into()
                    } else {
                        r.lambda_g.map_or("-".into(), |v| format!("{v:.2}"))
                    },
                    r.lambda_l.map_or("-".into(), |(_, m, _)| format!("{m:.2}"))
                );
            }
            write_table_csv(create(&dir, "table.csv")?, &hash, &rows)?;
        }
        Command::Sweep => {
            let rows = cmd_sweep(&cfg)?;
            for r in &rows {
                println!(
                    "factor {:>8}  iterations {:>3}  converged {:<5}  rate {}",
                    r.factor,
                    r.iterations,
                    r.converged,
                    r.rate.map_or("-".into(), |v| format!("{v:.4}"))
                );
            }
            let name = format!("sweep_{}.csv", cfg.solver.scheme);
            write_sweep_csv(create(&dir, &name)?, &hash, cfg.solver.scheme, &rows)?;
        }
        Command::Hierarchy => {
            let rows = cmd_hierarchy(&cfg)?;
            for r in &rows {
                println!(
                    "tau_{}  {:>6} {:>8}  {:<13}  rate {}",
                    r.level,
                    r.scheme,
                    r.coarse_op,
                    r.status,
                    r.rate.map_or("-".into(), |v| format!("{v:.4}"))
                );
            }
            write_hierarchy_csv(create(&dir, "hierarchy.csv")?, &hash, &rows)?;
        }
        Command::LambdaHist { level } => {
            let level = level.unwrap_or(cfg.mesh.adaptive_levels as usize);
            let hist = cmd_lambda_hist(&cfg, level)?;
            println!(
                "tau_{}: {} Dirichlet-cut cells, lambda_g {}",
                hist.level,
                hist.cells.len(),
                hist.lambda_g.map_or("-".into(), |v| format!("{v:.2}"))
            );
            write_lambda_csv(
                create(&dir, &format!("lambda_hist_{level}.csv"))?,
                &hash,
                &hist,
            )?;
        }
        Command::Solve => {
            let report = cmd_solve(&cfg)?;
            println!(
                "converged {}  iterations {}  rate {}",
                report.converged,
                report.iterations,
                report.rate().map_or("-".into(), |v| format!("{v:.4}"))
            );
            report.write_to(create(&dir, "solve.txt")?)?;
        }
    }
    Ok(())
}
