//! Path statistics of the birth–death schedule.

use std::io::Write;

use rayon::prelude::*;

use crate::error::Result;
use crate::sim::config::ScenarioConfig;
use crate::sim::environment::Environment;

#[derive(Debug, Clone, PartialEq)]
pub struct PathStats {
    /// `window_counts[l]`: windows with `l` live paths, LoS included.
    pub window_counts: Vec<u64>,
    /// Distinct paths seen in each traverse.
    pub distinct_paths: Vec<usize>,
}

impl PathStats {
    pub fn fraction(&self, live_paths: usize) -> f64 {
        let total: u64 = self.window_counts.iter().sum();
        if total == 0 {
            return 0.0;
        }
        self.window_counts.get(live_paths).copied().unwrap_or(0) as f64 / total as f64
    }

    pub fn mean_distinct_paths(&self) -> f64 {
        if self.distinct_paths.is_empty() {
            return 0.0;
        }
        self.distinct_paths.iter().sum::<usize>() as f64 / self.distinct_paths.len() as f64
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["live_paths", "windows", "fraction"])?;
        for (l, &n) in self.window_counts.iter().enumerate().skip(1) {
            w.write_record([l.to_string(), n.to_string(), self.fraction(l).to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Live-path-count distribution over `num_traverses` schedules drawn with seeds
/// `config.seed, config.seed + 1, ...`.
pub fn path_statistics(config: &ScenarioConfig, num_traverses: u64) -> Result<PathStats> {
    config.validate()?;
    let envs = (0..num_traverses)
        .into_par_iter()
        .map(|k| {
            let cfg = ScenarioConfig {
                seed: config.seed.wrapping_add(k),
                ..config.clone()
            };
            Environment::generate(&cfg, 0)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut window_counts = vec![0u64; config.max_paths + 1];
    let mut distinct_paths = Vec::with_capacity(envs.len());
    for env in &envs {
        for w in &env.windows {
            window_counts[w.num_paths().min(config.max_paths)] += 1;
        }
        distinct_paths.push(env.distinct_paths());
    }
    Ok(PathStats {
        window_counts,
        distinct_paths,
    })
}
