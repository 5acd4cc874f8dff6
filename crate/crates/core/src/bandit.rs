//! UCB beam-search policy.
//!
//! Each timeslot the policy scores every arm with `μ_i + c·√(ln t / n_i)`,
//! probes the `M` best-scoring arms with pilots, sends data on the `D`
//! strongest of those, and folds the normalized rates back into the running
//! means. State is kept per location bin so that a table only ever sees one
//! stretch of track.

use std::cmp::Ordering;
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::codebook::{
    best_stream_subset, measure_arm, transmit_rates, BeamChannel, MeasurementConfig, MeasurementRecord, StreamSet,
};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Per-arm pull counts and running mean rewards for one location bin.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditTable<T> {
    pub num_arms: usize,
    pub pull_counts: Vec<u64>,
    pub mean_rewards: Vec<T>,
    /// Timeslots this table has been consulted in.
    pub clock: u64,
}

impl<T: Real> BanditTable<T> {
    pub fn new(num_arms: usize) -> Self {
        Self {
            num_arms,
            pull_counts: vec![0; num_arms],
            mean_rewards: vec![T::zero(); num_arms],
            clock: 0,
        }
    }

    /// Starts a new timeslot (`t ← t + 1`).
    pub fn begin_slot(&mut self) {
        self.clock += 1;
    }

    pub fn total_pulls(&self) -> u64 {
        self.pull_counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyConfig<T> {
    pub exploration_c: T,
    /// Arms probed per slot (`M`).
    pub num_measure: usize,
    /// Data streams per slot (`D`).
    pub num_streams: usize,
    /// Spectral efficiency mapped to reward 1.
    pub reward_ref_rate: T,
    /// Also credit probed-but-unused arms with their pilot-estimated rate.
    pub update_measured: bool,
    /// Power only the best subset of `G_D` (see [`allocate_streams`]).
    pub adaptive_streams: bool,
}

impl<T: Real> PolicyConfig<T> {
    pub fn validate(&self, num_arms: usize) -> Result<()> {
        if self.num_streams == 0 || self.num_streams >= self.num_measure {
            return Err(Error::config("num_streams", "need 1 <= D < M"));
        }
        if self.num_measure > num_arms {
            return Err(Error::config("num_measure", "M cannot exceed the number of arms"));
        }
        if !(self.exploration_c >= T::zero()) {
            return Err(Error::config("exploration_c", "must be non-negative"));
        }
        if !(self.reward_ref_rate > T::zero()) {
            return Err(Error::config("reward_ref_rate", "must be positive"));
        }
        Ok(())
    }

    pub fn reward(&self, rate: T) -> T {
        (rate / self.reward_ref_rate).min(T::one()).max(T::zero())
    }
}

/// Location bin of a slot: `floor(slot / bin_len_slots)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BinIndex(pub usize);

impl BinIndex {
    pub fn of(slot_in_traverse: u64, bin_len_slots: u64) -> Self {
        BinIndex((slot_in_traverse / bin_len_slots.max(1)) as usize)
    }
}

/// Upper confidence bounds; unpulled arms score `+∞`.
pub fn ucb_scores<T: Real>(table: &BanditTable<T>, cfg: &PolicyConfig<T>) -> Vec<T> {
    let log_t = T::lit(table.clock.max(1) as f64).ln();
    table
        .pull_counts
        .iter()
        .zip(&table.mean_rewards)
        .map(|(&n, &mu)| {
            if n == 0 {
                T::infinity()
            } else {
                mu + cfg.exploration_c * (log_t / T::lit(n as f64)).sqrt()
            }
        })
        .collect()
}

fn descending_then_index<T: PartialOrd>(values: &[T]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    }
}

/// Indices of the `k` largest values, largest first, ties to the lower index.
pub fn top_k<T: PartialOrd>(values: &[T], k: usize) -> Vec<usize> {
    let k = k.min(values.len());
    if k == 0 {
        return Vec::new();
    }
    let mut idx: Vec<usize> = (0..values.len()).collect();
    let cmp = descending_then_index(values);
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, &cmp);
        idx.truncate(k);
    }
    idx.sort_by(&cmp);
    idx
}

/// `G_M`: the `M` arms with the largest UCBs.
pub fn select_arms<T: Real>(table: &BanditTable<T>, cfg: &PolicyConfig<T>) -> Vec<usize> {
    top_k(&ucb_scores(table, cfg), cfg.num_measure)
}

/// `G_D`: the `D` probed arms with the largest received pilot power.
pub fn select_streams<T: Real>(measurements: &[MeasurementRecord<T>], num_streams: usize) -> Vec<usize> {
    let mut recs: Vec<&MeasurementRecord<T>> = measurements.iter().collect();
    recs.sort_by(|a, b| {
        b.measured_power_w
            .partial_cmp(&a.measured_power_w)
            .unwrap_or(Ordering::Equal)
            .then(a.arm_id.cmp(&b.arm_id))
    });
    recs.into_iter().take(num_streams).map(|r| r.arm_id).collect()
}

/// Splits `G_D` into the arms that carry data and returns
/// `(chosen, powered, rates)` with `rates` aligned with `chosen`.
///
/// `chosen` is always [`select_streams`]. With `adaptive` set the transmitter
/// powers the subset of `chosen` with the best sum rate on the effective
/// channel of those beams, so a leakage copy of a strong path is left idle
/// instead of interfering with it. Idle arms get rate zero.
pub fn allocate_streams<T: Real, C: BeamChannel<T> + ?Sized>(
    channel: &C,
    measurements: &[MeasurementRecord<T>],
    num_streams: usize,
    adaptive: bool,
    measurement_cfg: &MeasurementConfig<T>,
) -> Result<(Vec<usize>, Vec<usize>, Vec<T>)> {
    let chosen = select_streams(measurements, num_streams);
    let set = if adaptive {
        best_stream_subset(channel, &chosen, num_streams, measurement_cfg)?
    } else {
        StreamSet {
            rates: transmit_rates(channel, &chosen, measurement_cfg)?,
            arms: chosen.clone(),
        }
    };
    let rates = chosen
        .iter()
        .map(|a| set.arms.iter().position(|b| b == a).map_or(T::zero(), |k| set.rates[k]))
        .collect();
    Ok((chosen, set.arms, rates))
}

/// Folds one reward per arm into the running means.
pub fn update<T: Real>(table: &mut BanditTable<T>, rewards: &[(usize, T)]) -> Result<()> {
    for &(arm, x) in rewards {
        if arm >= table.num_arms {
            return Err(Error::InvalidArm {
                arm,
                num_arms: table.num_arms,
            });
        }
        if !(x >= T::zero() && x <= T::one()) {
            return Err(Error::RewardOutOfRange(x.to_f64_lossy()));
        }
    }
    for &(arm, x) in rewards {
        let n = T::lit(table.pull_counts[arm] as f64);
        table.mean_rewards[arm] = (x + table.mean_rewards[arm] * n) / (n + T::one());
        table.pull_counts[arm] += 1;
    }
    Ok(())
}

/// Everything that happened in one slot of the policy.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotOutcome<T> {
    pub measured: Vec<usize>,
    /// `G_D`, strongest first.
    pub chosen: Vec<usize>,
    /// Members of `chosen` that carried data.
    pub powered: Vec<usize>,
    pub measurements: Vec<MeasurementRecord<T>>,
    /// Per-stream spectral efficiency, aligned with `chosen`; zero for unpowered arms.
    pub rates: Vec<T>,
    pub rewards: Vec<(usize, T)>,
}

impl<T: Real> SlotOutcome<T> {
    pub fn sum_rate(&self) -> T {
        self.rates.iter().copied().sum()
    }
}

/// One pass of the policy loop: score, probe, pick streams, transmit, learn.
pub fn run_timeslot<T, C, R>(
    table: &mut BanditTable<T>,
    cfg: &PolicyConfig<T>,
    channel: &C,
    measurement_cfg: &MeasurementConfig<T>,
    rng: &mut R,
) -> Result<SlotOutcome<T>>
where
    T: Real,
    C: BeamChannel<T> + ?Sized,
    R: Rng + ?Sized,
    StandardNormal: Distribution<T>,
{
    if table.num_arms != channel.num_arms() {
        return Err(Error::Dimension(format!(
            "bandit table has {} arms, channel {}",
            table.num_arms,
            channel.num_arms()
        )));
    }
    table.begin_slot();
    let measured = select_arms(table, cfg);
    let measurements = measured
        .iter()
        .map(|&arm| measure_arm(channel, arm, measurement_cfg, rng))
        .collect::<Result<Vec<_>>>()?;
    let (chosen, powered, rates) = allocate_streams(
        channel,
        &measurements,
        cfg.num_streams,
        cfg.adaptive_streams,
        measurement_cfg,
    )?;
    let mut rewards: Vec<(usize, T)> = chosen
        .iter()
        .zip(&rates)
        .map(|(&arm, &rate)| (arm, cfg.reward(rate)))
        .collect();
    if cfg.update_measured {
        rewards.extend(
            measurements
                .iter()
                .filter(|m| !chosen.contains(&m.arm_id))
                .map(|m| (m.arm_id, cfg.reward(m.est_rate_bps_hz))),
        );
    }
    update(table, &rewards)?;
    Ok(SlotOutcome {
        measured,
        chosen,
        powered,
        measurements,
        rates,
        rewards,
    })
}

/// One [`BanditTable`] per location bin, persisting across traverses.
#[derive(Debug, Clone)]
pub struct BinnedBandit<T> {
    pub bin_len_slots: u64,
    pub tables: Vec<BanditTable<T>>,
}

impl<T: Real> BinnedBandit<T> {
    pub fn new(num_arms: usize, slots_per_traverse: u64, bin_len_slots: u64) -> Self {
        let bin_len_slots = bin_len_slots.max(1);
        let bins = slots_per_traverse.div_ceil(bin_len_slots).max(1) as usize;
        Self {
            bin_len_slots,
            tables: vec![BanditTable::new(num_arms); bins],
        }
    }

    pub fn table_for(&mut self, slot_in_traverse: u64) -> &mut BanditTable<T> {
        let BinIndex(b) = BinIndex::of(slot_in_traverse, self.bin_len_slots);
        let last = self.tables.len() - 1;
        &mut self.tables[b.min(last)]
    }

    /// CSV snapshot with one `(bin, arm, pulls, mean_reward)` row per arm.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin", "arm_id", "pulls", "mean_reward"])?;
        for (b, t) in self.tables.iter().enumerate() {
            for arm in 0..t.num_arms {
                w.write_record([
                    b.to_string(),
                    arm.to_string(),
                    t.pull_counts[arm].to_string(),
                    t.mean_rewards[arm].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
