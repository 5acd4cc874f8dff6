//! Traverse loop binding channel, probing and policy, plus CSV output.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bandit::{run_timeslot, top_k, BinnedBandit};
use crate::baselines::{sequential_step, SequentialScanState, GENIE_POOL_TOP};
use crate::codebook::{best_stream_subset, StreamSet};
use crate::error::{Error, Result};
use crate::sim::config::{EnvironmentMode, ScenarioConfig};
use crate::sim::environment::{Environment, SlotChannel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Policy {
    Bandit,
    Sequential,
    Genie,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::Bandit, Policy::Sequential, Policy::Genie];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Bandit => "bandit",
            Policy::Sequential => "sequential",
            Policy::Genie => "genie",
        }
    }

    fn rng_stream(self) -> u64 {
        match self {
            Policy::Bandit => 1 << 32,
            Policy::Sequential => 2 << 32,
            Policy::Genie => 3 << 32,
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bandit" => Ok(Policy::Bandit),
            "sequential" => Ok(Policy::Sequential),
            "genie" => Ok(Policy::Genie),
            other => Err(Error::config("policy", format!("unknown policy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotRow {
    pub traverse: u32,
    pub slot: u64,
    pub genie_rate: f64,
    pub policy_rate: f64,
    pub cumulative_regret: f64,
    pub arms: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraverseSummary {
    pub traverse: u32,
    pub mean_policy_se: f64,
    pub mean_genie_se: f64,
    /// Policy SE after subtracting the TTI share spent on pilots.
    pub mean_effective_se: f64,
    pub regret_increment: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub policy: Policy,
    pub rows: Vec<SlotRow>,
    pub traverses: Vec<TraverseSummary>,
    /// `path_histogram[l]`: slots with `l` live paths.
    pub path_histogram: Vec<u64>,
    pub bandit: Option<BinnedBandit<f64>>,
}

const SLOT_HEADER: [&str; 7] = [
    "traverse",
    "slot",
    "policy",
    "genie_rate",
    "policy_rate",
    "cumulative_regret",
    "arms",
];

const SUMMARY_HEADER: [&str; 6] = [
    "policy",
    "traverse",
    "mean_policy_se",
    "mean_genie_se",
    "mean_effective_se",
    "regret_increment",
];

fn summary_fields(policy: Policy, s: &TraverseSummary) -> [String; 6] {
    [
        policy.to_string(),
        s.traverse.to_string(),
        s.mean_policy_se.to_string(),
        s.mean_genie_se.to_string(),
        s.mean_effective_se.to_string(),
        s.regret_increment.to_string(),
    ]
}

impl RunResult {
    /// Cumulative regret after `n` slots counted from the first traverse.
    pub fn regret_after(&self, n: usize) -> Option<f64> {
        n.checked_sub(1)
            .and_then(|i| self.rows.get(i))
            .map(|r| r.cumulative_regret)
    }

    pub fn mean_se(&self, traverse: u32) -> Option<f64> {
        self.traverses
            .iter()
            .find(|s| s.traverse == traverse)
            .map(|s| s.mean_policy_se)
    }

    pub fn write_slots_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(SLOT_HEADER)?;
        for r in &self.rows {
            let arms = r.arms.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" ");
            w.write_record([
                r.traverse.to_string(),
                r.slot.to_string(),
                self.policy.to_string(),
                r.genie_rate.to_string(),
                r.policy_rate.to_string(),
                r.cumulative_regret.to_string(),
                arms,
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(results: &[RunResult], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(SUMMARY_HEADER)?;
        for res in results {
            for s in &res.traverses {
                w.write_record(summary_fields(res.policy, s))?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_path_histogram_csv<W: Write>(&self, out: W) -> Result<()> {
        let total: u64 = self.path_histogram.iter().sum();
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["live_paths", "slots", "fraction"])?;
        for (l, &n) in self.path_histogram.iter().enumerate().skip(1) {
            let frac = if total == 0 { 0.0 } else { n as f64 / total as f64 };
            w.write_record([l.to_string(), n.to_string(), frac.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Genie outcome at one slot: exhaustive search over the strongest arms and
/// each live path's own beam pair.
pub fn genie_at(channel: &SlotChannel<'_>, config: &ScenarioConfig) -> Result<StreamSet<f64>> {
    let gains = channel.all_gains_sqr();
    let mut pool = top_k(&gains, GENIE_POOL_TOP.max(config.num_streams));
    for &a in channel.path_arms() {
        if !pool.contains(&a) {
            pool.push(a);
        }
    }
    best_stream_subset(channel, &pool, config.num_streams, &config.measurement_config())
}

/// One traverse's environment with its genie trace.
#[derive(Debug)]
struct Stage {
    env: Environment,
    genie: Vec<StreamSet<f64>>,
}

impl Stage {
    fn build(config: &ScenarioConfig, stream: u64) -> Result<Self> {
        let env = Environment::generate(config, stream)?;
        let genie = (0..env.slots())
            .map(|s| genie_at(&env.channel_at(s)?, config))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { env, genie })
    }
}

/// Environment and genie reference for a scenario, shared by all policies run on it.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: ScenarioConfig,
    stages: Arc<Vec<Stage>>,
}

impl Simulation {
    /// Draws the environment (one schedule replayed on every traverse, or one
    /// per traverse in fresh mode) and precomputes the genie.
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let count = match config.environment {
            EnvironmentMode::Replay => 1,
            EnvironmentMode::Fresh => config.num_traverses as u64,
        };
        let stages = (0..count)
            .map(|k| Stage::build(&config, k))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config,
            stages: Arc::new(stages),
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    /// Same environment and genie with a different probe budget.
    pub fn with_num_measure(&self, num_measure: usize) -> Result<Self> {
        let config = ScenarioConfig {
            num_measure,
            ..self.config.clone()
        };
        config.validate()?;
        Ok(Self {
            config,
            stages: Arc::clone(&self.stages),
        })
    }

    /// Same environment with a different number of traverses. Fresh-mode
    /// environments are regenerated when more traverses are needed.
    pub fn with_traverses(&self, num_traverses: u32) -> Result<Self> {
        let config = ScenarioConfig {
            num_traverses,
            ..self.config.clone()
        };
        if config.environment == EnvironmentMode::Fresh && num_traverses as usize > self.stages.len() {
            return Self::new(config);
        }
        config.validate()?;
        Ok(Self {
            config,
            stages: Arc::clone(&self.stages),
        })
    }

    fn stage(&self, traverse: u32) -> &Stage {
        &self.stages[(traverse as usize).min(self.stages.len() - 1)]
    }

    pub fn environment(&self, traverse: u32) -> &Environment {
        &self.stage(traverse).env
    }

    pub fn genie_trace(&self, traverse: u32) -> &[StreamSet<f64>] {
        &self.stage(traverse).genie
    }

    pub fn run(&self, policy: Policy) -> Result<RunResult> {
        let cfg = &self.config;
        let pcfg = cfg.policy_config();
        let mcfg = cfg.measurement_config();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(policy.rng_stream());
        let mut bandit = BinnedBandit::<f64>::new(cfg.num_arms(), cfg.slots_per_traverse, cfg.bin_len_slots);
        let mut scan = SequentialScanState::new();
        let probes = match policy {
            Policy::Genie => 0,
            _ => cfg.num_measure,
        };
        let data_fraction = mcfg.data_fraction(probes);

        let slots = cfg.slots_per_traverse;
        let mut rows = Vec::with_capacity((slots * cfg.num_traverses as u64) as usize);
        let mut traverses = Vec::with_capacity(cfg.num_traverses as usize);
        let mut path_histogram = vec![0u64; cfg.max_paths + 1];
        let mut regret = 0.0;
        for traverse in 0..cfg.num_traverses {
            let stage = self.stage(traverse);
            let regret_start = regret;
            let (mut policy_sum, mut genie_sum) = (0.0, 0.0);
            for slot in 0..slots {
                let channel = stage.env.channel_at(slot)?;
                let genie = &stage.genie[slot as usize];
                let genie_rate = genie.sum_rate();
                let (rate, arms) = match policy {
                    Policy::Genie => (genie_rate, genie.arms.clone()),
                    Policy::Bandit => {
                        let table = bandit.table_for(slot);
                        let out = run_timeslot(table, &pcfg, &channel, &mcfg, &mut rng)?;
                        (out.sum_rate(), out.powered)
                    }
                    Policy::Sequential => {
                        let out = sequential_step(
                            &mut scan,
                            cfg.num_measure,
                            cfg.num_streams,
                            cfg.adaptive_streams,
                            &channel,
                            &mcfg,
                            &mut rng,
                        )?;
                        (out.sum_rate(), out.powered)
                    }
                };
                if !rate.is_finite() || !genie_rate.is_finite() {
                    return Err(Error::Invariant(format!(
                        "non-finite rate at traverse {traverse} slot {slot}"
                    )));
                }
                regret += genie_rate - rate;
                policy_sum += rate;
                genie_sum += genie_rate;
                let live = stage.env.live_path_count(slot)?;
                path_histogram[live.min(cfg.max_paths)] += 1;
                rows.push(SlotRow {
                    traverse: traverse + 1,
                    slot,
                    genie_rate,
                    policy_rate: rate,
                    cumulative_regret: regret,
                    arms,
                });
            }
            let n = slots as f64;
            traverses.push(TraverseSummary {
                traverse: traverse + 1,
                mean_policy_se: policy_sum / n,
                mean_genie_se: genie_sum / n,
                mean_effective_se: policy_sum / n * data_fraction,
                regret_increment: regret - regret_start,
            });
        }

        let bandit = match policy {
            Policy::Bandit => {
                check_pull_accounting(&bandit, cfg)?;
                Some(bandit)
            }
            _ => None,
        };
        Ok(RunResult {
            policy,
            rows,
            traverses,
            path_histogram,
            bandit,
        })
    }
}

/// Every visit to a bin hands out exactly `D` data pulls.
fn check_pull_accounting(bandit: &BinnedBandit<f64>, cfg: &ScenarioConfig) -> Result<()> {
    if cfg.update_measured {
        return Ok(());
    }
    for (b, t) in bandit.tables.iter().enumerate() {
        if t.total_pulls() != t.clock * cfg.num_streams as u64 {
            return Err(Error::Invariant(format!(
                "bin {b}: {} pulls after {} visits with D = {}",
                t.total_pulls(),
                t.clock,
                cfg.num_streams
            )));
        }
    }
    Ok(())
}

/// Convenience wrapper: build the environment and run one policy on it.
pub fn run(config: &ScenarioConfig, policy: Policy) -> Result<RunResult> {
    Simulation::new(config.clone())?.run(policy)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    NumMeasure,
    NAntennas,
    NumTraverses,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::NumMeasure => "num_measure",
            SweepAxis::NAntennas => "n_antennas",
            SweepAxis::NumTraverses => "num_traverses",
        }
    }

    /// The config with this axis set to `value`. Antenna sweeps resize the mRRH array.
    pub fn apply(self, base: &ScenarioConfig, value: u64) -> Result<ScenarioConfig> {
        let v = usize::try_from(value).map_err(|_| Error::config(self.as_str(), "value too large"))?;
        let mut cfg = base.clone();
        match self {
            SweepAxis::NumMeasure => cfg.num_measure = v,
            SweepAxis::NAntennas => cfg.n_t = v,
            SweepAxis::NumTraverses => {
                cfg.num_traverses =
                    u32::try_from(value).map_err(|_| Error::config("num_traverses", "value too large"))?
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "num_measure" | "M" | "m" => Ok(SweepAxis::NumMeasure),
            "n_antennas" => Ok(SweepAxis::NAntennas),
            "num_traverses" => Ok(SweepAxis::NumTraverses),
            other => Err(Error::config("axis", format!("unknown sweep axis {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: u64,
    pub results: Vec<RunResult>,
}

/// One run per axis value on a shared base seed. Values run in parallel; each
/// worker owns its simulation, and results come back in input order.
pub fn sweep(base: &ScenarioConfig, axis: SweepAxis, values: &[u64], policies: &[Policy]) -> Result<Vec<SweepPoint>> {
    let configs = values
        .iter()
        .map(|&v| axis.apply(base, v))
        .collect::<Result<Vec<_>>>()?;
    configs
        .into_par_iter()
        .zip(values.par_iter())
        .map(|(cfg, &value)| {
            let sim = Simulation::new(cfg)?;
            let results = policies.iter().map(|&p| sim.run(p)).collect::<Result<Vec<_>>>()?;
            Ok(SweepPoint { value, results })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(axis: SweepAxis, points: &[SweepPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["axis", "value"];
    header.extend(SUMMARY_HEADER);
    w.write_record(&header)?;
    for p in points {
        for res in &p.results {
            for s in &res.traverses {
                let mut rec = vec![axis.as_str().to_string(), p.value.to_string()];
                rec.extend(summary_fields(res.policy, s));
                w.write_record(&rec)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ScenarioConfig {
        ScenarioConfig {
            n_t: 8,
            n_r: 4,
            num_measure: 4,
            num_streams: 2,
            num_traverses: 2,
            slots_per_traverse: 2_000,
            train_speed_kmh: 3_600.0,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn genie_has_zero_regret() {
        let res = run(&tiny(), Policy::Genie).unwrap();
        assert!(res.rows.iter().all(|r| r.cumulative_regret == 0.0));
        assert_eq!(res.rows.len(), 4_000);
    }

    #[test]
    fn row_count_and_traverse_labels() {
        let res = run(&tiny(), Policy::Sequential).unwrap();
        assert_eq!(res.rows.len(), 4_000);
        assert_eq!(res.rows[1_999].traverse, 1);
        assert_eq!(res.rows[2_000].traverse, 2);
        assert_eq!(res.traverses.len(), 2);
        assert_eq!(res.path_histogram.iter().sum::<u64>(), 4_000);
    }

    #[test]
    fn replayed_genie_is_identical_across_traverses() {
        let res = run(&tiny(), Policy::Genie).unwrap();
        assert_eq!(res.traverses[0].mean_genie_se, res.traverses[1].mean_genie_se);
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = run(&tiny(), Policy::Bandit).unwrap();
        let b = run(&tiny(), Policy::Bandit).unwrap();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        a.write_slots_csv(&mut x).unwrap();
        b.write_slots_csv(&mut y).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn policy_names_round_trip() {
        for p in Policy::ALL {
            assert_eq!(p.as_str().parse::<Policy>().unwrap(), p);
        }
        assert!("greedy".parse::<Policy>().is_err());
    }

    #[test]
    fn single_value_sweep_equals_run() {
        let cfg = tiny();
        let pts = sweep(&cfg, SweepAxis::NumMeasure, &[4], &[Policy::Bandit]).unwrap();
        let direct = run(&cfg, Policy::Bandit).unwrap();
        assert_eq!(pts[0].results[0].rows, direct.rows);
    }

    #[test]
    fn sweep_rejects_invalid_values() {
        assert!(sweep(&tiny(), SweepAxis::NumMeasure, &[2], &[Policy::Bandit]).is_err());
    }

    #[test]
    fn fresh_mode_draws_new_schedules() {
        let cfg = ScenarioConfig {
            environment: EnvironmentMode::Fresh,
            ..tiny()
        };
        let sim = Simulation::new(cfg).unwrap();
        let a: Vec<usize> = sim.environment(0).windows.iter().map(|w| w.num_paths()).collect();
        let b: Vec<usize> = sim.environment(1).windows.iter().map(|w| w.num_paths()).collect();
        assert_ne!(a, b);
    }
}
