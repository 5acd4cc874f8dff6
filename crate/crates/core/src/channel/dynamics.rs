//! Birth–death process of reflected paths over WSS windows.

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channel::{PathState, SceneGeometry, IMMORTAL};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct PathDynamicsConfig<T> {
    /// WSS window length in TTIs.
    pub wss_window_slots: u64,
    pub tti_s: T,
    /// Probability that a new reflected path appears in a window, indexed by
    /// the number of reflected paths alive in the previous window. Counts past
    /// the end of the table never spawn.
    pub birth_prob_by_count: Vec<T>,
    /// Cap on live paths including LoS.
    pub max_paths: usize,
    pub lifetime_mean_s: T,
    pub lifetime_std_s: T,
    pub lifetime_min_s: T,
    pub lifetime_max_s: T,
    pub nlos_extra_loss_db: T,
    /// Reflectors are dropped uniformly within ± this distance of the train.
    pub reflector_span_m: T,
}

impl<T: Real> PathDynamicsConfig<T> {
    pub fn wss_window_s(&self) -> T {
        self.tti_s * T::lit(self.wss_window_slots as f64)
    }

    /// Same birth probability regardless of the current path count.
    pub fn with_constant_birth(mut self, birth_prob: T) -> Self {
        self.birth_prob_by_count = vec![birth_prob; self.max_paths.saturating_sub(1)];
        self
    }

    pub fn birth_prob(&self, nlos_count: usize) -> T {
        self.birth_prob_by_count
            .get(nlos_count)
            .copied()
            .unwrap_or_else(T::zero)
    }

    pub fn validate(&self) -> Result<()> {
        if self.wss_window_slots == 0 {
            return Err(Error::config("wss_window_slots", "must be at least 1"));
        }
        if !(self.tti_s > T::zero()) {
            return Err(Error::config("tti_s", "must be positive"));
        }
        if self.max_paths == 0 {
            return Err(Error::config("max_paths", "must be at least 1"));
        }
        for p in &self.birth_prob_by_count {
            if !(*p >= T::zero() && *p <= T::one()) {
                return Err(Error::config("birth_prob_by_count", "entries must lie in [0, 1]"));
            }
        }
        if !(self.lifetime_min_s > T::zero() && self.lifetime_min_s <= self.lifetime_max_s) {
            return Err(Error::config(
                "lifetime_min_s",
                "need 0 < lifetime_min_s <= lifetime_max_s",
            ));
        }
        if self.lifetime_mean_s < self.lifetime_min_s || self.lifetime_mean_s > self.lifetime_max_s {
            return Err(Error::config(
                "lifetime_mean_s",
                "must lie within the truncation bounds",
            ));
        }
        if !(self.lifetime_std_s >= T::zero()) {
            return Err(Error::config("lifetime_std_s", "must be non-negative"));
        }
        if !(self.reflector_span_m >= T::zero()) {
            return Err(Error::config("reflector_span_m", "must be non-negative"));
        }
        Ok(())
    }

    /// Draws a lifetime from the Gaussian truncated to `[lifetime_min_s, lifetime_max_s]`.
    pub fn sample_lifetime<R: Rng + ?Sized>(&self, rng: &mut R) -> T
    where
        StandardNormal: Distribution<T>,
    {
        if self.lifetime_std_s == T::zero() {
            return self.lifetime_mean_s;
        }
        for _ in 0..10_000 {
            let z: T = StandardNormal.sample(rng);
            let t = self.lifetime_mean_s + self.lifetime_std_s * z;
            if t >= self.lifetime_min_s && t <= self.lifetime_max_s {
                return t;
            }
        }
        self.lifetime_mean_s
    }

    /// Number of whole windows a path of the given lifetime survives.
    pub fn lifetime_windows(&self, lifetime_s: T) -> u64 {
        let w = (lifetime_s / self.wss_window_s()).ceil();
        w.to_u64().unwrap_or(1).max(1)
    }
}

/// Re-derives angles, amplitude and Doppler of a path from the geometry at `train_x`.
/// The gain phase of a path is kept for its whole life.
pub fn refresh_path<T: Real>(
    path: &mut PathState<T>,
    scene: &SceneGeometry<T>,
    nlos_extra_loss_db: T,
    train_x: T,
) -> Result<()> {
    let (aod, aoa, distance, doppler, extra) = match path.reflector_x_m {
        None => {
            let g = scene.los_at(train_x);
            (g.aod, g.aoa, g.distance_m, g.doppler_hz, T::zero())
        }
        Some(rx) => {
            let g = scene.reflected_at(train_x, rx);
            (g.aod, g.aoa, g.distance_m, g.doppler_hz, nlos_extra_loss_db)
        }
    };
    let amplitude = scene.path_amplitude(distance, extra)?;
    let phase = path.complex_gain.arg();
    path.complex_gain = Complex::from_polar(amplitude, phase);
    path.aod = aod;
    path.aoa = aoa;
    path.doppler_hz = doppler;
    Ok(())
}

/// The LoS path at window 0.
pub fn initial_los<T: Real>(scene: &SceneGeometry<T>, train_x: T) -> Result<PathState<T>> {
    let mut p = PathState {
        path_id: 0,
        is_los: true,
        complex_gain: Complex::new(T::one(), T::zero()),
        aod: T::zero(),
        aoa: T::zero(),
        doppler_hz: T::zero(),
        birth_window: 0,
        death_window: IMMORTAL,
        reflector_x_m: None,
    };
    refresh_path(&mut p, scene, T::zero(), train_x)?;
    Ok(p)
}

/// Advances the path set into `window_index`.
///
/// Expired reflected paths are dropped, at most one new reflected path is born
/// (probability looked up by the previous window's reflected-path count and
/// suppressed at `max_paths`), and every survivor's geometry is refreshed at
/// the train position `train_x` for the new window. Path ids of new paths are
/// `window_index + 1`, unique because a window spawns at most one path.
pub fn evolve_paths<T: Real, R: Rng + ?Sized>(
    dynamics: &PathDynamicsConfig<T>,
    scene: &SceneGeometry<T>,
    prev_paths: &[PathState<T>],
    window_index: u64,
    train_x: T,
    rng: &mut R,
) -> Result<Vec<PathState<T>>>
where
    StandardNormal: Distribution<T>,
{
    if prev_paths.iter().filter(|p| p.is_los).count() != 1 {
        return Err(Error::Invariant("path set must contain exactly one LoS path".into()));
    }
    let prev_nlos = prev_paths.iter().filter(|p| !p.is_los).count();
    let mut next: Vec<PathState<T>> = prev_paths
        .iter()
        .filter(|p| p.is_los || p.death_window > window_index)
        .cloned()
        .collect();

    // Draw unconditionally so the random stream does not depend on the cap.
    let u: f64 = rng.random();
    let offset: f64 = rng.random::<f64>() * 2.0 - 1.0;
    let phase: f64 = rng.random::<f64>() * std::f64::consts::TAU;
    let lifetime = dynamics.sample_lifetime(rng);

    let birth = u < dynamics.birth_prob(prev_nlos).to_f64_lossy() && next.len() < dynamics.max_paths;
    if birth {
        let reflector_x = train_x + dynamics.reflector_span_m * T::lit(offset);
        next.push(PathState {
            path_id: window_index + 1,
            is_los: false,
            complex_gain: Complex::from_polar(T::one(), T::lit(phase)),
            aod: T::zero(),
            aoa: T::zero(),
            doppler_hz: T::zero(),
            birth_window: window_index,
            death_window: window_index + dynamics.lifetime_windows(lifetime),
            reflector_x_m: Some(reflector_x),
        });
    }
    for p in &mut next {
        refresh_path(p, scene, dynamics.nlos_extra_loss_db, train_x)?;
    }
    Ok(next)
}
