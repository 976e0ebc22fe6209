use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use ctmqc::config::RunConfig;
use ctmqc::model::ModelId;
use ctmqc::runner::{self, DumpOptions, BENCHMARK_COMBOS, SWEEP_DTS_AS, SWEEP_NTRAJ};

#[derive(Parser)]
#[command(name = "ctmqc", version, about = "Coupled-trajectory mixed quantum-classical dynamics on Tully models")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model used when no config file is given.
    #[arg(long)]
    model: Option<ModelId>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated seed list.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Override a config key, e.g. --set dt_as=2 or --set exact.n_points=8192.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Propagate the trajectory ensemble.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dump_qm: bool,
        #[arg(long)]
        dump_traj: bool,
        /// Also write model_curves.json with the potentials of every model.
        #[arg(long)]
        dump_model_curves: bool,
    },
    /// Grid-based reference propagation.
    Exact {
        #[command(flatten)]
        common: Common,
    },
    /// Final norm deviation and energy drift across time steps.
    SweepDt {
        #[command(flatten)]
        common: Common,
        /// Time steps in attoseconds.
        #[arg(long, value_delimiter = ',')]
        dts: Option<Vec<f64>>,
        /// Sweep the six CTMQC/CTMQC-E combinations instead of the configured one.
        #[arg(long)]
        all_combos: bool,
    },
    /// Convergence with the number of trajectories.
    SweepNtraj {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        counts: Option<Vec<usize>>,
    },
    /// Compare run directories against each other and an exact reference.
    Compare {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        exact: Option<PathBuf>,
        /// Report path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut cfg = match (&common.config, common.model) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            RunConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        (None, Some(model)) => RunConfig::new(model),
        (None, None) => bail!("either --config or --model is required"),
    };
    if let Some(m) = common.model {
        cfg.model = m;
    }
    cfg = cfg.with_overrides(&common.sets)?;
    if let Some(s) = common.seed {
        cfg.seed = Some(s);
        cfg.seeds = None;
    }
    if let Some(s) = &common.seeds {
        cfg.seeds = Some(s.clone());
    }
    Ok(cfg.resolve()?)
}

fn out_dir(common: &Common, cfg: &RunConfig, fallback: &str) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(fallback))
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<()> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Run { common, dump_qm, dump_traj, dump_model_curves } => {
            let cfg = load(&common)?;
            let out = out_dir(&common, &cfg, "out/run");
            let dumps = DumpOptions { qm: dump_qm, traj: dump_traj, model_curves: dump_model_curves };
            for dir in runner::run(&cfg, &out, dumps)? {
                println!("{}", dir.join("observables.csv").display());
            }
        }
        Cmd::Exact { common } => {
            let cfg = load(&common)?;
            let out = out_dir(&common, &cfg, "out/exact");
            let run = runner::exact(&cfg, &out)?;
            if let Some(t) = run.truncated_at_fs {
                eprintln!("warning: amplitude reached the grid edge at {t:.3} fs; output truncated");
            }
            println!("{}", out.join("observables.csv").display());
        }
        Cmd::SweepDt { common, dts, all_combos } => {
            let cfg = load(&common)?;
            let out = out_dir(&common, &cfg, "out/sweep_dt");
            let dts = dts.unwrap_or_else(|| SWEEP_DTS_AS.to_vec());
            let combos = if all_combos { BENCHMARK_COMBOS.to_vec() } else { vec![(cfg.method, cfg.qm_variant)] };
            let report = runner::sweep_dt(&cfg, &dts, &combos)?;
            runner::write_sweep_dt(&report, &out)?;
            println!("{}", out.join("sweep_dt.csv").display());
        }
        Cmd::SweepNtraj { common, counts } => {
            let cfg = load(&common)?;
            let out = out_dir(&common, &cfg, "out/sweep_ntraj");
            let counts = counts.unwrap_or_else(|| SWEEP_NTRAJ.to_vec());
            let report = runner::sweep_ntraj(&cfg, &counts)?;
            runner::write_sweep_ntraj(&report, &out)?;
            println!("{}", out.join("sweep_ntraj.csv").display());
        }
        Cmd::Compare { runs, exact, out } => {
            let report = runner::compare(&runs, exact.as_deref())?;
            let out = out.unwrap_or_else(|| Path::new("out").join("compare.json"));
            runner::write_compare(&report, &out)?;
            println!("{}", out.display());
        }
    }
    Ok(())
}
