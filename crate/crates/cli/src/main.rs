use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::Parser;

use hetsim_core::report::{manifest, write_csv_file};
use hetsim_core::{parse_config, run_simulation, Algorithm, ScenarioConfig};

/// Run cluster-head election simulations and write per-round metrics as CSV.
#[derive(Debug, Parser)]
#[command(name = "hetsim", version)]
struct Args {
    /// Scenario file (TOML). Defaults apply to anything it leaves out.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Election algorithm to run: heteng, leach or heed. Repeat for several.
    /// Without it the config's strategy is used, else all three.
    #[arg(long = "algorithm", value_name = "NAME")]
    algorithms: Vec<Algorithm>,

    #[arg(long)]
    seed: Option<u64>,

    #[arg(long)]
    runs: Option<u32>,

    #[arg(long)]
    rounds: Option<u64>,

    #[arg(long)]
    nodes: Option<usize>,

    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn load_config(args: &Args) -> Result<ScenarioConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_config(&text).with_context(|| format!("in {}", path.display()))?
        }
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(runs) = args.runs {
        config.runs = runs;
    }
    if let Some(rounds) = args.rounds {
        config.rounds = rounds;
    }
    if let Some(nodes) = args.nodes {
        config.node_count = nodes;
    }
    config.validate()?;
    Ok(config)
}

fn selected_algorithms(args: &Args, config: &ScenarioConfig) -> Vec<Algorithm> {
    let mut chosen = if !args.algorithms.is_empty() {
        args.algorithms.clone()
    } else if let Some(a) = config.strategy {
        vec![a]
    } else {
        Algorithm::ALL.to_vec()
    };
    chosen.sort();
    chosen.dedup();
    chosen
}

fn write_outputs(out: &Path, config: &ScenarioConfig, algorithm: Algorithm) -> Result<()> {
    let report = run_simulation(config, algorithm)?;
    for (i, run) in report.runs.iter().enumerate() {
        let path = out.join(format!("{}_run{i}.csv", algorithm.name()));
        write_csv_file(&path, run).with_context(|| format!("writing {}", path.display()))?;
    }
    let path = out.join(format!("{}_avg.csv", algorithm.name()));
    write_csv_file(&path, &report.mean).with_context(|| format!("writing {}", path.display()))?;
    if let Some(last) = report.mean.last() {
        log::info!(
            "{}: round {} alive {:.1} residual {:.3} J",
            algorithm,
            last.round,
            last.alive_count,
            last.total_residual
        );
    }
    Ok(())
}

fn run(args: Args) -> Result<()> {
    let config = load_config(&args)?;
    let algorithms = selected_algorithms(&args, &config);
    if args.out.exists() && !args.out.is_dir() {
        bail!("{} exists and is not a directory", args.out.display());
    }
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;

    for &algorithm in &algorithms {
        write_outputs(&args.out, &config, algorithm)?;
    }

    let now = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let text = manifest(&config, args.config.as_deref(), &args.out, &algorithms, now);
    let path = args.out.join("manifest.toml");
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Args::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
