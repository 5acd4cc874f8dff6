//! Reference policies: the modified sequential scanner and the perfect-CSI genie.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bandit::{allocate_streams, top_k, SlotOutcome};
use crate::codebook::{best_stream_subset, measure_arm, BeamChannel, MeasurementConfig, StreamSet};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Scan cursor plus the arms that carried data in the previous TTI.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SequentialScanState {
    pub cursor: usize,
    pub held_arms: Vec<usize>,
}

impl SequentialScanState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// One TTI of the sequential scanner: re-probe last TTI's data arms, fill the
/// rest of the `M` probes in row-major order from the cursor, keep the best `D`.
pub fn sequential_step<T, C, R>(
    state: &mut SequentialScanState,
    num_measure: usize,
    num_streams: usize,
    adaptive_streams: bool,
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
    let num_arms = channel.num_arms();
    if num_streams == 0 || num_streams >= num_measure || num_measure > num_arms {
        return Err(Error::config("num_measure", "need 1 <= D < M <= number of arms"));
    }
    let mut measured: Vec<usize> = state.held_arms.clone();
    measured.truncate(num_measure);
    let mut cursor = state.cursor % num_arms;
    while measured.len() < num_measure {
        if !measured.contains(&cursor) {
            measured.push(cursor);
        }
        cursor = (cursor + 1) % num_arms;
    }
    state.cursor = cursor;

    let measurements = measured
        .iter()
        .map(|&arm| measure_arm(channel, arm, measurement_cfg, rng))
        .collect::<Result<Vec<_>>>()?;
    let (chosen, powered, rates) =
        allocate_streams(channel, &measurements, num_streams, adaptive_streams, measurement_cfg)?;
    state.held_arms = chosen.clone();
    Ok(SlotOutcome {
        measured,
        chosen,
        powered,
        measurements,
        rates,
        rewards: Vec::new(),
    })
}

/// Arms kept in the genie's candidate pool by virtual-channel magnitude.
pub const GENIE_POOL_TOP: usize = 8;

/// Best noiseless sum rate over every set of at most `num_streams` arms drawn
/// from a candidate pool.
///
/// The pool is the [`GENIE_POOL_TOP`] strongest entries of the virtual channel
/// plus `path_arms` (typically each live path's nearest beam pair). Under the
/// interference-free model the pool search reduces to the strongest-prefix rule.
pub fn genie_rates<T: Real, C: BeamChannel<T> + ?Sized>(
    channel: &C,
    num_streams: usize,
    measurement_cfg: &MeasurementConfig<T>,
    path_arms: &[usize],
) -> Result<StreamSet<T>> {
    let num_arms = channel.num_arms();
    for &a in path_arms {
        channel.check_arm(a)?;
    }
    let magnitudes: Vec<T> = (0..num_arms).map(|a| channel.arm_gain(a).norm_sqr()).collect();
    let mut pool = top_k(&magnitudes, GENIE_POOL_TOP.max(num_streams));
    for &a in path_arms {
        if !pool.contains(&a) {
            pool.push(a);
        }
    }
    best_stream_subset(channel, &pool, num_streams, measurement_cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::{arm_id, transmit_rates, BeamPair, Codebook, DenseBeamChannel, Side, StreamModel};
    use crate::linalg::CMatrix;
    use num_complex::Complex;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mcfg(model: StreamModel) -> MeasurementConfig<f64> {
        MeasurementConfig {
            tx_power_w: 1.0,
            noise_power_w: 1e-2,
            pilot_length: 8,
            tti_s: 0.25e-3,
            pilot_fraction: 0.2,
            max_measurements: 8,
            stream_model: model,
        }
    }

    /// Virtual channel with the given on-grid entries (rx, tx, gain).
    fn sparse(n: usize, entries: &[(usize, usize, f64)]) -> (CMatrix<f64>, Codebook<f64>) {
        let cb = Codebook::<f64>::dft(Side::Transmit, n).unwrap();
        let mut hv = CMatrix::zeros(n, n);
        for &(q, p, g) in entries {
            hv[(q, p)] = Complex::new(g, 0.0);
        }
        let h = crate::codebook::physical_channel(&hv, &cb, &cb).unwrap();
        (h, cb)
    }

    #[test]
    fn cold_start_scans_first_arms() {
        let (h, cb) = sparse(4, &[]);
        let ch = DenseBeamChannel::new(&h, &cb, &cb).unwrap();
        let mut st = SequentialScanState::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = sequential_step(&mut st, 6, 2, false, &ch, &mcfg(StreamModel::Sinr), &mut rng).unwrap();
        assert_eq!(out.measured, vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(st.cursor, 6);
        assert_eq!(st.held_arms, out.chosen);
    }

    #[test]
    fn held_arm_is_not_scanned_twice() {
        let (h, cb) = sparse(4, &[]);
        let ch = DenseBeamChannel::new(&h, &cb, &cb).unwrap();
        let mut st = SequentialScanState {
            cursor: 6,
            held_arms: vec![7],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let out = sequential_step(&mut st, 3, 1, false, &ch, &mcfg(StreamModel::Sinr), &mut rng).unwrap();
        assert_eq!(out.measured, vec![7, 6, 8]);
        assert_eq!(st.cursor, 9);
    }

    #[test]
    fn cursor_wraps() {
        let (h, cb) = sparse(4, &[]);
        let ch = DenseBeamChannel::new(&h, &cb, &cb).unwrap();
        let mut st = SequentialScanState {
            cursor: 15,
            held_arms: vec![3],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = sequential_step(&mut st, 3, 1, false, &ch, &mcfg(StreamModel::Sinr), &mut rng).unwrap();
        assert_eq!(out.measured, vec![3, 15, 0]);
        assert_eq!(st.cursor, 1);
    }

    #[test]
    fn scanner_finds_strong_arm_and_holds_it() {
        let (h, cb) = sparse(4, &[(2, 1, 1.0)]);
        let ch = DenseBeamChannel::new(&h, &cb, &cb).unwrap();
        let target = arm_id(BeamPair { tx: 1, rx: 2 }, 4);
        let mut st = SequentialScanState::new();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut found_at = None;
        for t in 0..10 {
            let out = sequential_step(&mut st, 3, 1, false, &ch, &mcfg(StreamModel::Sinr), &mut rng).unwrap();
            if out.chosen == vec![target] && found_at.is_none() {
                found_at = Some(t);
            }
            if found_at.is_some() {
                assert_eq!(out.chosen, vec![target]);
            }
        }
        assert!(found_at.unwrap() <= 16 / 2);
    }

    #[test]
    fn genie_single_path_uses_one_stream() {
        let (h, cb) = sparse(8, &[(3, 5, 0.2)]);
        let ch = DenseBeamChannel::new(&h, &cb, &cb).unwrap();
        for model in [StreamModel::Sinr, StreamModel::InterferenceFree] {
            let g = genie_rates(&ch, 3, &mcfg(model), &[]).unwrap();
            assert_eq!(g.arms, vec![arm_id(BeamPair { tx: 5, rx: 3 }, 8)]);
            let expect = (1.0 + 64.0 * 0.04 / 1e-2f64).log2();
            assert!((g.sum_rate() - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn genie_prefers_fewer_streams_when_power_split_hurts() {
        // One strong path, one very weak one: splitting power loses.
        let (h, cb) = sparse(8, &[(1, 1, 1.0), (6, 6, 1e-4)]);
        let ch = DenseBeamChannel::new(&h, &cb, &cb).unwrap();
        let c = mcfg(StreamModel::InterferenceFree);
        let g = genie_rates(&ch, 2, &c, &[]).unwrap();
        assert_eq!(g.arms.len(), 1);
        // Brute force over D' in {1, 2} on the two nonzero arms.
        let a = arm_id(BeamPair { tx: 1, rx: 1 }, 8);
        let b = arm_id(BeamPair { tx: 6, rx: 6 }, 8);
        let one: f64 = transmit_rates(&ch, &[a], &c).unwrap().iter().sum();
        let two: f64 = transmit_rates(&ch, &[a, b], &c).unwrap().iter().sum();
        assert!(one > two);
        assert!((g.sum_rate() - one.max(two)).abs() < 1e-9);
    }

    #[test]
    fn genie_sum_rate_non_decreasing_in_streams() {
        let (h, cb) = sparse(8, &[(1, 1, 1.0), (4, 6, 0.5), (7, 2, 0.3)]);
        let ch = DenseBeamChannel::new(&h, &cb, &cb).unwrap();
        let c = mcfg(StreamModel::Sinr);
        let mut prev = 0.0;
        for d in 1..=4 {
            let s = genie_rates(&ch, d, &c, &[]).unwrap().sum_rate();
            assert!(s + 1e-12 >= prev);
            prev = s;
        }
    }

    #[test]
    fn genie_at_least_any_policy_choice() {
        let (h, cb) = sparse(4, &[(0, 1, 1.0), (3, 2, 0.6), (2, 0, 0.2)]);
        let ch = DenseBeamChannel::new(&h, &cb, &cb).unwrap();
        let c = mcfg(StreamModel::Sinr);
        let g = genie_rates(&ch, 2, &c, &[]).unwrap().sum_rate();
        for a in 0..16 {
            for b in (a + 1)..16 {
                let r: f64 = transmit_rates(&ch, &[a, b], &c).unwrap().iter().sum();
                assert!(r <= g + 1e-12);
            }
        }
    }
}
