//! Path schedule of one traverse and a fast beam-domain view of it.
//!
//! The physical channel is a sum of at most `max_paths` rank-one terms, so the
//! gain of a beam pair is `Σ_l c_l(t)·(w_q^H a_r,l)·(a_t,l^H f_p)`. The two
//! inner products per path only change at window boundaries and are cached.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{build_channel, evolve_paths, steering_vector, ArrayGeometry, PathState};
use crate::codebook::{arm_id, BeamChannel, BeamPair, Codebook};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::sim::config::ScenarioConfig;

type C64 = Complex<f64>;

/// Paths of one WSS window with their per-beam responses.
#[derive(Debug, Clone)]
pub struct WindowChannel {
    pub paths: Vec<PathState<f64>>,
    /// `√(N_t N_r)·α_l` per path.
    coeffs: Vec<C64>,
    /// `w_q^H a_r(aoa_l)` for every receive beam `q`.
    rx_resp: Vec<Vec<C64>>,
    /// `a_t(aod_l)^H f_p` for every transmit beam `p`.
    tx_resp: Vec<Vec<C64>>,
    /// Beam pair best aligned with each path.
    pub path_arms: Vec<usize>,
}

fn beam_responses(
    geom: &ArrayGeometry<f64>,
    angle: f64,
    codebook: &Codebook<f64>,
    conj_beam: bool,
) -> Result<Vec<C64>> {
    let a = steering_vector(geom, angle)?;
    Ok((0..codebook.num_beams)
        .map(|i| {
            codebook
                .beam(i)
                .iter()
                .zip(&a)
                .map(|(b, s)| if conj_beam { b.conj() * s } else { s.conj() * b })
                .sum()
        })
        .collect())
}

fn argmax_norm(v: &[C64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.norm_sqr() > v[best].norm_sqr() {
            best = i;
        }
    }
    best
}

impl WindowChannel {
    fn new(
        paths: Vec<PathState<f64>>,
        tx_geom: &ArrayGeometry<f64>,
        rx_geom: &ArrayGeometry<f64>,
        tx_cb: &Codebook<f64>,
        rx_cb: &Codebook<f64>,
    ) -> Result<Self> {
        let scale = ((tx_cb.num_beams * rx_cb.num_beams) as f64).sqrt();
        let mut coeffs = Vec::with_capacity(paths.len());
        let mut rx_resp = Vec::with_capacity(paths.len());
        let mut tx_resp = Vec::with_capacity(paths.len());
        let mut path_arms = Vec::with_capacity(paths.len());
        for p in &paths {
            let r = beam_responses(rx_geom, p.aoa, rx_cb, true)?;
            let t = beam_responses(tx_geom, p.aod, tx_cb, false)?;
            let arm = arm_id(
                BeamPair {
                    tx: argmax_norm(&t),
                    rx: argmax_norm(&r),
                },
                tx_cb.num_beams,
            );
            if !path_arms.contains(&arm) {
                path_arms.push(arm);
            }
            coeffs.push(p.complex_gain * scale);
            rx_resp.push(r);
            tx_resp.push(t);
        }
        Ok(Self {
            paths,
            coeffs,
            rx_resp,
            tx_resp,
            path_arms,
        })
    }

    pub fn num_paths(&self) -> usize {
        self.paths.len()
    }
}

/// The beam-domain channel at one timeslot.
#[derive(Debug, Clone)]
pub struct SlotChannel<'a> {
    window: &'a WindowChannel,
    rotated: Vec<C64>,
    n_t: usize,
    n_r: usize,
}

impl BeamChannel<f64> for SlotChannel<'_> {
    fn num_tx_beams(&self) -> usize {
        self.n_t
    }

    fn num_rx_beams(&self) -> usize {
        self.n_r
    }

    fn beam_gain(&self, pair: BeamPair) -> C64 {
        self.rotated
            .iter()
            .zip(&self.window.rx_resp)
            .zip(&self.window.tx_resp)
            .map(|((c, r), t)| c * r[pair.rx] * t[pair.tx])
            .sum()
    }
}

impl SlotChannel<'_> {
    pub fn path_arms(&self) -> &[usize] {
        &self.window.path_arms
    }

    /// `|w_q^H H f_p|²` for every arm, in arm order.
    pub fn all_gains_sqr(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_t * self.n_r];
        let mut row = vec![C64::new(0.0, 0.0); self.n_t];
        for q in 0..self.n_r {
            row.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
            for ((c, r), t) in self.rotated.iter().zip(&self.window.rx_resp).zip(&self.window.tx_resp) {
                let cr = c * r[q];
                for (x, tp) in row.iter_mut().zip(t) {
                    *x += cr * tp;
                }
            }
            for (p, x) in row.iter().enumerate() {
                out[q * self.n_t + p] = x.norm_sqr();
            }
        }
        out
    }
}

/// Path schedule for one traverse, one entry per WSS window.
#[derive(Debug, Clone)]
pub struct Environment {
    pub windows: Vec<WindowChannel>,
    wss_window_slots: u64,
    slots: u64,
    tti_s: f64,
    n_t: usize,
    n_r: usize,
    tx_geom: ArrayGeometry<f64>,
    rx_geom: ArrayGeometry<f64>,
}

impl Environment {
    /// Draws a schedule from `(config.seed, stream)`.
    ///
    /// The birth–death chain runs `burn_in_windows` windows before the traverse so
    /// it starts near its stationary path count. Geometry of each window is
    /// taken at the train position of the window's midpoint.
    pub fn generate(config: &ScenarioConfig, stream: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(stream);
        let scene = config.scene();
        let dynamics = config.dynamics();
        let tx_geom = config.tx_geometry()?;
        let rx_geom = config.rx_geometry()?;
        let (tx_cb, rx_cb) = config.codebooks()?;
        let ws = config.wss_window_slots as i64;
        let burn = config.burn_in_windows as i64;
        let midpoint = |k: i64| scene.train_x(k * ws + ws / 2);

        let mut paths = vec![crate::channel::dynamics::initial_los(&scene, midpoint(-burn))?];
        let mut windows = Vec::with_capacity(config.num_windows() as usize);
        for i in 0..(burn + config.num_windows() as i64) {
            let k = i - burn;
            paths = evolve_paths(&dynamics, &scene, &paths, i as u64, midpoint(k), &mut rng)?;
            if k >= 0 {
                windows.push(WindowChannel::new(paths.clone(), &tx_geom, &rx_geom, &tx_cb, &rx_cb)?);
            }
        }
        Ok(Self {
            windows,
            wss_window_slots: config.wss_window_slots,
            slots: config.slots_per_traverse,
            tti_s: config.tti_s,
            n_t: config.n_t,
            n_r: config.n_r,
            tx_geom,
            rx_geom,
        })
    }

    pub fn slots(&self) -> u64 {
        self.slots
    }

    fn window_index(&self, slot: u64) -> Result<usize> {
        if slot >= self.slots {
            return Err(Error::SlotOutOfRange {
                slot,
                horizon: self.slots,
            });
        }
        Ok((slot / self.wss_window_slots) as usize)
    }

    pub fn window_at(&self, slot: u64) -> Result<&WindowChannel> {
        Ok(&self.windows[self.window_index(slot)?])
    }

    pub fn live_path_count(&self, slot: u64) -> Result<usize> {
        Ok(self.window_at(slot)?.num_paths())
    }

    pub fn channel_at(&self, slot: u64) -> Result<SlotChannel<'_>> {
        let window = self.window_at(slot)?;
        let t = slot as f64 * self.tti_s;
        let rotated = window
            .paths
            .iter()
            .zip(&window.coeffs)
            .map(|(p, c)| c * p.doppler_rotation(t))
            .collect();
        Ok(SlotChannel {
            window,
            rotated,
            n_t: self.n_t,
            n_r: self.n_r,
        })
    }

    /// The physical channel matrix at `slot`.
    pub fn physical_channel_at(&self, slot: u64) -> Result<CMatrix<f64>> {
        let window = self.window_at(slot)?;
        build_channel(&window.paths, &self.tx_geom, &self.rx_geom, slot as f64 * self.tti_s)
    }

    /// Distinct path ids seen during the traverse, LoS included.
    pub fn distinct_paths(&self) -> usize {
        let mut ids: Vec<u64> = self
            .windows
            .iter()
            .flat_map(|w| w.paths.iter().map(|p| p.path_id))
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }
}
