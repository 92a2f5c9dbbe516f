use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use setdm::darcy::{darcy_velocity, write_csv};
use setdm::harness::{build_problem, run_study, solve_single, StudyConfig};

#[derive(Parser)]
#[command(name = "setdm", version, about = "Exponential integrators for parabolic SPDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Study configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of realizations.
    #[arg(long)]
    realizations: Option<usize>,
    /// Worker threads.
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<StudyConfig> {
        let mut cfg = StudyConfig::from_file(&self.config)
            .with_context(|| format!("reading {}", self.config.display()))?;
        if let Some(s) = self.seed {
            cfg.study.seed = s;
        }
        if let Some(r) = self.realizations {
            cfg.study.realizations = r;
        }
        if let Some(t) = self.threads {
            cfg.study.threads = Some(t);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence study and write report.csv and report.json.
    Converge {
        #[command(flatten)]
        common: Common,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Integrate one trajectory with the first scheme and the smallest dt.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// Realization index of the Brownian path.
        #[arg(long, default_value_t = 0)]
        realization: u64,
    },
    /// Solve the Darcy problem and write pressure and velocity per cell.
    Darcy {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Converge { common, out_dir } => {
            let cfg = common.load()?;
            let report = run_study(&cfg)?;
            report.write_to_dir(&out_dir)?;
            print!("{}", report.to_csv_string());
            for f in &report.fitted_orders {
                match f.order {
                    Some(o) => println!("{}: order {o:.3}", f.scheme.label()),
                    None => println!("{}: no fit ({})", f.scheme.label(), f.note.as_deref().unwrap_or("")),
                }
            }
        }
        Command::Solve { common, out, realization } => {
            let cfg = common.load()?;
            let problem = build_problem(&cfg)?;
            let scheme = cfg.study.schemes[0];
            let dt = *cfg.study.dt_list.last().expect("validated non-empty");
            let traj = solve_single(&cfg, &problem, scheme, dt, realization)?;
            traj.write_csv(BufWriter::new(File::create(&out)?), problem.grid(), problem.layout())?;
            eprintln!("{} dt={dt} steps={} -> {}", scheme.label(), traj.steps, out.display());
        }
        Command::Darcy { common, out } => {
            let cfg = common.load()?;
            let grid = cfg.grid()?;
            let perm = cfg.darcy.permeability(&grid)?;
            let (p, q) = darcy_velocity(&grid, &perm, cfg.darcy.p_left, cfg.darcy.p_right)?;
            if !q.max_abs().is_finite() {
                bail!("Darcy solve produced a non-finite velocity");
            }
            write_csv(BufWriter::new(File::create(&out)?), &grid, &perm, &p, &q)?;
            eprintln!("inflow {:e} outflow {:e} -> {}", q.inflow(&grid), q.outflow(&grid), out.display());
        }
    }
    Ok(())
}
