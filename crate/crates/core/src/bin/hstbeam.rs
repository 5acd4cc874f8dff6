//! Command-line front end: `run`, `sweep`, `verify-bounds`, `calibrate`.
//!
//! Exit status is 0 on success, 1 for configuration problems and 2 when a
//! runtime invariant breaks (including bound violations in `verify-bounds`).

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hstbeam::regret::{power_of_two_checkpoints, verify_bounds, ArmNoise, SyntheticBanditSpec};
use hstbeam::sim::{path_statistics, sweep, write_sweep_csv, Policy, RunResult, ScenarioConfig, Simulation, SweepAxis};
use hstbeam::Error;

#[derive(Parser)]
#[command(
    name = "hstbeam",
    version,
    about = "Bandit beam search simulator for mmWave high-speed-train backhaul"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario TOML file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// bandit, sequential, genie or all.
    #[arg(long, default_value = "all")]
    policy: String,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Overrides the number of traverses.
    #[arg(long)]
    traverses: Option<u32>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the traverses and write per-slot and summary CSVs.
    Run(Common),
    /// One run per value of an axis, joined into sweep.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// num_measure, n_antennas or num_traverses.
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<u64>,
    },
    /// Monte Carlo check of the pull-count and regret bounds on Bernoulli arms.
    VerifyBounds {
        #[arg(long, value_delimiter = ',', default_value = "0.9,0.5,0.3,0.1")]
        means: Vec<f64>,
        #[arg(long, default_value_t = 2)]
        num_measure: usize,
        #[arg(long, default_value_t = 1)]
        num_streams: usize,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = 10_000)]
        horizon: u64,
        #[arg(long, default_value_t = 200)]
        seeds: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Live-path-count distribution of the birth–death schedule.
    Calibrate(Common),
}

fn policies(arg: &str) -> hstbeam::Result<Vec<Policy>> {
    if arg == "all" {
        return Ok(Policy::ALL.to_vec());
    }
    arg.split(',').map(|s| s.trim().parse()).collect()
}

fn load_config(common: &Common) -> hstbeam::Result<ScenarioConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::ConfigParse(format!("{}: {e}", path.display())))?;
            ScenarioConfig::from_toml_str(&text)?
        }
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(t) = common.traverses {
        cfg.num_traverses = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> hstbeam::Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn print_summary(results: &[RunResult]) {
    for r in results {
        for s in &r.traverses {
            println!(
                "{:<10} traverse {:>2}  mean SE {:>8.4}  genie {:>8.4}  regret +{:.1}",
                r.policy.as_str(),
                s.traverse,
                s.mean_policy_se,
                s.mean_genie_se,
                s.regret_increment
            );
        }
    }
}

fn cmd_run(common: &Common) -> hstbeam::Result<()> {
    let cfg = load_config(common)?;
    let pols = policies(&common.policy)?;
    let sim = Simulation::new(cfg.clone())?;
    let results = pols.iter().map(|&p| sim.run(p)).collect::<hstbeam::Result<Vec<_>>>()?;
    let dir = &common.out_dir;
    for r in &results {
        r.write_slots_csv(create(dir, &format!("slots_{}.csv", r.policy))?)?;
        if let Some(b) = &r.bandit {
            b.write_csv(create(dir, "bandit_tables.csv")?)?;
        }
    }
    RunResult::write_summary_csv(&results, create(dir, "summary.csv")?)?;
    if let Some(r) = results.first() {
        r.write_path_histogram_csv(create(dir, "path_histogram.csv")?)?;
    }
    fs::write(dir.join("scenario.toml"), cfg.to_toml_string())?;
    print_summary(&results);
    Ok(())
}

fn cmd_sweep(common: &Common, axis: &str, values: &[u64]) -> hstbeam::Result<()> {
    let cfg = load_config(common)?;
    let axis: SweepAxis = axis.parse()?;
    let pols = policies(&common.policy)?;
    let points = sweep(&cfg, axis, values, &pols)?;
    write_sweep_csv(axis, &points, create(&common.out_dir, "sweep.csv")?)?;
    for p in &points {
        println!("{} = {}", axis.as_str(), p.value);
        print_summary(&p.results);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    means: &[f64],
    num_measure: usize,
    num_streams: usize,
    c: f64,
    horizon: u64,
    seeds: usize,
    seed: u64,
    out_dir: &Path,
) -> hstbeam::Result<bool> {
    let spec = SyntheticBanditSpec {
        arm_means: means.to_vec(),
        arm_noise: ArmNoise::Bernoulli,
        num_measure,
        num_streams,
        exploration_c: c,
        horizon,
        num_seeds: seeds,
        measurement_noise: 0.0,
        base_seed: seed,
    };
    let report = verify_bounds(&spec, &power_of_two_checkpoints(6, horizon))?;
    report.write_csv(create(out_dir, "bounds.csv")?)?;
    for (n, r) in &report.mean_regret {
        println!("n = {n:>6}  mean regret {r:>9.3}");
    }
    println!("min pull-count margin {:.3}", report.min_pull_margin());
    println!("min regret margin     {:.3}", report.min_regret_margin());
    for v in &report.violations {
        eprintln!("violation: {v}");
    }
    Ok(report.violations.is_empty())
}

fn cmd_calibrate(common: &Common) -> hstbeam::Result<()> {
    let cfg = load_config(common)?;
    let n = common.traverses.map(u64::from).unwrap_or(50);
    let stats = path_statistics(&cfg, n)?;
    stats.write_csv(create(&common.out_dir, "path_stats.csv")?)?;
    for l in 1..stats.window_counts.len() {
        println!("L = {l}: {:5.1}%", 100.0 * stats.fraction(l));
    }
    println!("distinct paths per traverse: {:.1}", stats.mean_distinct_paths());
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config { .. } | Error::ConfigParse(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(common) => cmd_run(common).map(|_| true),
        Command::Sweep { common, axis, values } => cmd_sweep(common, axis, values).map(|_| true),
        Command::VerifyBounds {
            means,
            num_measure,
            num_streams,
            c,
            horizon,
            seeds,
            seed,
            out_dir,
        } => cmd_verify(means, *num_measure, *num_streams, *c, *horizon, *seeds, *seed, out_dir),
        Command::Calibrate(common) => cmd_calibrate(common).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
