//! DFT beam codebooks, the virtual channel, and the pilot measurement model.
//!
//! An *arm* is a (transmit beam `p`, receive beam `q`) pair, indexed row-major
//! as `arm = q·N_t + p`. Everything downstream of this module only needs the
//! beamformed scalar `w_q^H H f_p`, which is what [`BeamChannel`] exposes.

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channel::ula_response;
use crate::channel::ArrayGeometry;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Transmit,
    Receive,
}

/// Unitary DFT codebook of `N` beams for an `N`-element array.
///
/// Beam `n` (0-based) steers to the normalized spatial direction
/// `θ_n = (n + 1 − (N+1)/2)/N`, where a direction is `(d/λ)·sin φ`.
/// Beams are stored as the *columns* of `matrix`.
#[derive(Debug, Clone)]
pub struct Codebook<T> {
    pub side: Side,
    pub num_beams: usize,
    pub matrix: CMatrix<T>,
    pub grid_angles: Vec<T>,
    beams: Vec<Vec<Complex<T>>>,
}

impl<T: Real> Codebook<T> {
    pub fn dft(side: Side, num_beams: usize) -> Result<Self> {
        if num_beams == 0 {
            return Err(Error::config("num_beams", "must be at least 1"));
        }
        let n = T::from_usize_lossy(num_beams);
        let centre = (n + T::one()) / T::lit(2.0);
        let grid_angles: Vec<T> = (1..=num_beams).map(|k| (T::from_usize_lossy(k) - centre) / n).collect();
        let beams: Vec<_> = grid_angles
            .iter()
            .map(|&theta| ula_response(num_beams, theta))
            .collect();
        let matrix = CMatrix::from_columns(&beams)?;
        Ok(Self {
            side,
            num_beams,
            matrix,
            grid_angles,
            beams,
        })
    }

    pub fn beam(&self, index: usize) -> &[Complex<T>] {
        &self.beams[index]
    }

    /// Physical steering angle of beam `index` for the given array, if the
    /// grid direction is visible (`|θ_n λ/d| ≤ 1`).
    pub fn beam_angle(&self, index: usize, geom: &ArrayGeometry<T>) -> Option<T> {
        let s = self.grid_angles[index] * geom.carrier_wavelength / geom.element_spacing;
        (s.abs() <= T::one()).then(|| s.asin())
    }

    /// Index of the grid direction closest to the spatial frequency `(d/λ)·sin φ`,
    /// wrapping modulo one as the DFT does.
    pub fn nearest_beam(&self, spatial_frequency: T) -> usize {
        let n = T::from_usize_lossy(self.num_beams);
        let shifted = spatial_frequency * n + (n - T::one()) / T::lit(2.0);
        let k = shifted.round().to_i64().unwrap_or(0);
        k.rem_euclid(self.num_beams as i64) as usize
    }

    /// `max |A A^H − I|`.
    pub fn unitarity_error(&self) -> T {
        let gram = self.matrix.matmul(&self.matrix.adjoint()).expect("square codebook");
        gram.max_abs_diff(&CMatrix::identity(self.num_beams))
    }
}

/// Transmit and receive beam indices of one arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BeamPair {
    pub tx: usize,
    pub rx: usize,
}

pub fn arm_id(pair: BeamPair, num_tx: usize) -> usize {
    pair.rx * num_tx + pair.tx
}

pub fn beam_pair(arm: usize, num_tx: usize) -> BeamPair {
    BeamPair {
        tx: arm % num_tx,
        rx: arm / num_tx,
    }
}

/// Anything that can report the beamformed gain `w_q^H H f_p` of a beam pair.
pub trait BeamChannel<T: Real> {
    fn num_tx_beams(&self) -> usize;
    fn num_rx_beams(&self) -> usize;
    fn beam_gain(&self, pair: BeamPair) -> Complex<T>;

    fn num_arms(&self) -> usize {
        self.num_tx_beams() * self.num_rx_beams()
    }

    fn arm_gain(&self, arm: usize) -> Complex<T> {
        self.beam_gain(beam_pair(arm, self.num_tx_beams()))
    }

    fn check_arm(&self, arm: usize) -> Result<()> {
        if arm >= self.num_arms() {
            return Err(Error::InvalidArm {
                arm,
                num_arms: self.num_arms(),
            });
        }
        Ok(())
    }
}

/// A physical channel matrix viewed through a pair of codebooks.
#[derive(Debug, Clone, Copy)]
pub struct DenseBeamChannel<'a, T> {
    pub h: &'a CMatrix<T>,
    pub tx_codebook: &'a Codebook<T>,
    pub rx_codebook: &'a Codebook<T>,
}

impl<'a, T: Real> DenseBeamChannel<'a, T> {
    pub fn new(h: &'a CMatrix<T>, tx_codebook: &'a Codebook<T>, rx_codebook: &'a Codebook<T>) -> Result<Self> {
        if h.rows() != rx_codebook.num_beams || h.cols() != tx_codebook.num_beams {
            return Err(Error::Dimension(format!(
                "channel {}x{} vs codebooks rx={} tx={}",
                h.rows(),
                h.cols(),
                rx_codebook.num_beams,
                tx_codebook.num_beams
            )));
        }
        Ok(Self {
            h,
            tx_codebook,
            rx_codebook,
        })
    }
}

impl<T: Real> BeamChannel<T> for DenseBeamChannel<'_, T> {
    fn num_tx_beams(&self) -> usize {
        self.tx_codebook.num_beams
    }

    fn num_rx_beams(&self) -> usize {
        self.rx_codebook.num_beams
    }

    fn beam_gain(&self, pair: BeamPair) -> Complex<T> {
        self.h
            .bilinear(self.rx_codebook.beam(pair.rx), self.tx_codebook.beam(pair.tx))
    }
}

/// Virtual channel `H_V = A_r^H H A_t / √(N_t N_r)`; entry `(q, p)` is `w_q^H H f_p / √(N_t N_r)`.
pub fn virtual_channel<T: Real>(h: &CMatrix<T>, tx_cb: &Codebook<T>, rx_cb: &Codebook<T>) -> Result<CMatrix<T>> {
    DenseBeamChannel::new(h, tx_cb, rx_cb)?;
    let scale = T::one() / T::from_usize_lossy(tx_cb.num_beams * rx_cb.num_beams).sqrt();
    Ok(rx_cb.matrix.adjoint().matmul(h)?.matmul(&tx_cb.matrix)?.scale(scale))
}

/// Inverse of [`virtual_channel`].
pub fn physical_channel<T: Real>(h_v: &CMatrix<T>, tx_cb: &Codebook<T>, rx_cb: &Codebook<T>) -> Result<CMatrix<T>> {
    let scale = T::from_usize_lossy(tx_cb.num_beams * rx_cb.num_beams).sqrt();
    Ok(rx_cb.matrix.matmul(h_v)?.matmul(&tx_cb.matrix.adjoint())?.scale(scale))
}

/// How concurrent data streams affect each other's rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamModel {
    /// Each stream sees only its own beam pair and thermal noise.
    InterferenceFree,
    /// Each stream's receive beam also collects the other streams' signals.
    Sinr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementConfig<T> {
    pub tx_power_w: T,
    pub noise_power_w: T,
    pub pilot_length: usize,
    pub tti_s: T,
    /// Fraction of a TTI reserved for pilots when `max_measurements` beams are probed.
    pub pilot_fraction: T,
    pub max_measurements: usize,
    pub stream_model: StreamModel,
}

impl<T: Real> MeasurementConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: T| v > T::zero() && v.is_finite();
        if !positive(self.tx_power_w) {
            return Err(Error::config("tx_power_w", "must be positive"));
        }
        if !positive(self.noise_power_w) {
            return Err(Error::config("noise_power_w", "must be positive"));
        }
        if self.pilot_length == 0 {
            return Err(Error::config("pilot_length", "must be at least 1"));
        }
        if !positive(self.tti_s) {
            return Err(Error::config("tti_s", "must be positive"));
        }
        if !(self.pilot_fraction > T::zero() && self.pilot_fraction < T::one()) {
            return Err(Error::config("pilot_fraction", "must lie in (0, 1)"));
        }
        if self.max_measurements == 0 {
            return Err(Error::config("max_measurements", "must be at least 1"));
        }
        Ok(())
    }

    /// Share of the TTI left for data after probing `measurements` beam pairs.
    pub fn data_fraction(&self, measurements: usize) -> T {
        let used = self.pilot_fraction * T::from_usize_lossy(measurements) / T::from_usize_lossy(self.max_measurements);
        (T::one() - used).max(T::zero())
    }

    pub fn snr_rate(&self, power: T) -> T {
        (T::one() + power / self.noise_power_w).log2()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementRecord<T> {
    pub arm_id: usize,
    pub beam_pair: BeamPair,
    /// Mean received pilot power `Y(i)` in watts, noise included.
    pub measured_power_w: T,
    /// Spectral efficiency implied by `Y(i)` after removing the noise floor.
    pub est_rate_bps_hz: T,
}

/// Noiseless received pilot power `P·|w_q^H H f_p|²`.
pub fn noiseless_power<T: Real, C: BeamChannel<T> + ?Sized>(channel: &C, arm: usize, cfg: &MeasurementConfig<T>) -> T {
    cfg.tx_power_w * channel.arm_gain(arm).norm_sqr()
}

/// Probes one arm with a unit-power pilot of `pilot_length` samples.
pub fn measure_arm<T, C, R>(
    channel: &C,
    arm: usize,
    cfg: &MeasurementConfig<T>,
    rng: &mut R,
) -> Result<MeasurementRecord<T>>
where
    T: Real,
    C: BeamChannel<T> + ?Sized,
    R: Rng + ?Sized,
    StandardNormal: Distribution<T>,
{
    channel.check_arm(arm)?;
    let signal = channel.arm_gain(arm) * cfg.tx_power_w.sqrt();
    // w^H n has variance σ² because ‖w‖ = 1; split evenly over I and Q.
    let sd = (cfg.noise_power_w / T::lit(2.0)).sqrt();
    let mut acc = T::zero();
    for _ in 0..cfg.pilot_length {
        let re: T = StandardNormal.sample(rng);
        let im: T = StandardNormal.sample(rng);
        acc = acc + (signal + Complex::new(re * sd, im * sd)).norm_sqr();
    }
    let measured_power_w = acc / T::from_usize_lossy(cfg.pilot_length);
    let snr = (measured_power_w - cfg.noise_power_w).max(T::zero()) / cfg.noise_power_w;
    Ok(MeasurementRecord {
        arm_id: arm,
        beam_pair: beam_pair(arm, channel.num_tx_beams()),
        measured_power_w,
        est_rate_bps_hz: (T::one() + snr).log2(),
    })
}

/// Per-stream spectral efficiency when data is sent on `arms` with equal power split.
pub fn transmit_rates<T: Real, C: BeamChannel<T> + ?Sized>(
    channel: &C,
    arms: &[usize],
    cfg: &MeasurementConfig<T>,
) -> Result<Vec<T>> {
    for (k, &a) in arms.iter().enumerate() {
        channel.check_arm(a)?;
        if arms[..k].contains(&a) {
            return Err(Error::DuplicateArm(a));
        }
    }
    if arms.is_empty() {
        return Ok(Vec::new());
    }
    let n_t = channel.num_tx_beams();
    let pairs: Vec<BeamPair> = arms.iter().map(|&a| beam_pair(a, n_t)).collect();
    let per_stream = cfg.tx_power_w / T::from_usize_lossy(arms.len());
    let rates = pairs
        .iter()
        .map(|mine| {
            let signal = per_stream * channel.beam_gain(*mine).norm_sqr();
            let interference = match cfg.stream_model {
                StreamModel::InterferenceFree => T::zero(),
                StreamModel::Sinr => pairs
                    .iter()
                    .filter(|other| *other != mine)
                    .map(|other| {
                        per_stream
                            * channel
                                .beam_gain(BeamPair {
                                    tx: other.tx,
                                    rx: mine.rx,
                                })
                                .norm_sqr()
                    })
                    .sum(),
            };
            (T::one() + signal / (cfg.noise_power_w + interference)).log2()
        })
        .collect();
    Ok(rates)
}

/// Arms that carry data in one slot and their per-stream rates.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamSet<T> {
    pub arms: Vec<usize>,
    pub rates: Vec<T>,
}

impl<T: Real> StreamSet<T> {
    pub fn sum_rate(&self) -> T {
        self.rates.iter().copied().sum()
    }
}

/// The subset of `pool` with 1..=`max_streams` members and the best sum rate,
/// found by exhaustive search over the pool's cross-gain matrix.
pub fn best_stream_subset<T: Real, C: BeamChannel<T> + ?Sized>(
    channel: &C,
    pool: &[usize],
    max_streams: usize,
    cfg: &MeasurementConfig<T>,
) -> Result<StreamSet<T>> {
    for (k, &a) in pool.iter().enumerate() {
        channel.check_arm(a)?;
        if pool[..k].contains(&a) {
            return Err(Error::DuplicateArm(a));
        }
    }
    let n_t = channel.num_tx_beams();
    let pairs: Vec<BeamPair> = pool.iter().map(|&a| beam_pair(a, n_t)).collect();
    // cross[k][j] = |w_{q_k}^H H f_{p_j}|^2
    let cross: Vec<Vec<T>> = pairs
        .iter()
        .map(|mine| {
            pairs
                .iter()
                .map(|other| {
                    channel
                        .beam_gain(BeamPair {
                            tx: other.tx,
                            rx: mine.rx,
                        })
                        .norm_sqr()
                })
                .collect()
        })
        .collect();

    let mut best: (T, Vec<usize>) = (T::neg_infinity(), Vec::new());
    let mut current = Vec::with_capacity(max_streams);
    let max_streams = max_streams.min(pool.len());
    for size in 1..=max_streams {
        enumerate_subsets(pool.len(), size, 0, &mut current, &mut |subset| {
            let total = subset_sum_rate(subset, &pairs, &cross, cfg);
            if total > best.0 {
                best = (total, subset.to_vec());
            }
        });
    }
    let arms: Vec<usize> = best.1.iter().map(|&i| pool[i]).collect();
    let rates = transmit_rates(channel, &arms, cfg)?;
    Ok(StreamSet { arms, rates })
}

fn subset_sum_rate<T: Real>(subset: &[usize], pairs: &[BeamPair], cross: &[Vec<T>], cfg: &MeasurementConfig<T>) -> T {
    let per_stream = cfg.tx_power_w / T::from_usize_lossy(subset.len());
    subset
        .iter()
        .map(|&k| {
            let signal = per_stream * cross[k][k];
            let interference = match cfg.stream_model {
                StreamModel::InterferenceFree => T::zero(),
                StreamModel::Sinr => subset
                    .iter()
                    .filter(|&&j| pairs[j] != pairs[k])
                    .map(|&j| per_stream * cross[k][j])
                    .sum(),
            };
            (T::one() + signal / (cfg.noise_power_w + interference)).log2()
        })
        .sum()
}

fn enumerate_subsets(n: usize, size: usize, start: usize, current: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
    if current.len() == size {
        visit(current);
        return;
    }
    let remaining = size - current.len();
    for i in start..=(n - remaining) {
        current.push(i);
        enumerate_subsets(n, size, i + 1, current, visit);
        current.pop();
    }
}
