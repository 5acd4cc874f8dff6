//! Sparse time-varying mmWave channel of the mRRH → mTAT backhaul link.
//!
//! The channel is a sum of a handful of propagation paths, each contributing a
//! rank-one term `a_r(aoa) a_t(aod)^H` scaled by its complex gain and rotated
//! by its Doppler phase. The line-of-sight path always exists; reflected paths
//! are born and die at WSS-window granularity (see [`dynamics`]).

pub mod dynamics;
pub mod geometry;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::Real;

pub use dynamics::{evolve_paths, PathDynamicsConfig};
pub use geometry::{fold_ula_angle, LosGeometry, PathGeometry, SceneGeometry};

/// Death window carried by the line-of-sight path.
pub const IMMORTAL: u64 = u64::MAX;

/// Uniform linear array parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry<T> {
    pub num_elements: usize,
    /// Inter-element spacing in meters.
    pub element_spacing: T,
    /// Carrier wavelength in meters.
    pub carrier_wavelength: T,
}

impl<T: Real> ArrayGeometry<T> {
    pub fn new(num_elements: usize, element_spacing: T, carrier_wavelength: T) -> Result<Self> {
        if num_elements == 0 {
            return Err(Error::config("num_elements", "must be at least 1"));
        }
        if !(element_spacing > T::zero()) || !(carrier_wavelength > T::zero()) {
            return Err(Error::config("element_spacing/carrier_wavelength", "must be positive"));
        }
        Ok(Self {
            num_elements,
            element_spacing,
            carrier_wavelength,
        })
    }

    /// Half-wavelength spaced array, the default layout.
    pub fn half_wavelength(num_elements: usize, carrier_wavelength: T) -> Result<Self> {
        Self::new(num_elements, carrier_wavelength / T::lit(2.0), carrier_wavelength)
    }

    /// Normalized spatial frequency `(d/λ)·sin(angle)` seen by the array.
    pub fn spatial_frequency(&self, angle: T) -> T {
        self.element_spacing / self.carrier_wavelength * angle.sin()
    }
}

/// Unit-norm ULA response for a normalized spatial frequency `(d/λ)·sin φ`.
pub fn ula_response<T: Real>(num_elements: usize, spatial_frequency: T) -> Vec<Complex<T>> {
    let scale = T::one() / T::from_usize_lossy(num_elements).sqrt();
    let step = T::TAU() * spatial_frequency;
    (0..num_elements)
        .map(|k| Complex::from_polar(scale, step * T::from_usize_lossy(k)))
        .collect()
}

/// Array steering vector: element `k` is `e^{j k (2π/λ) d sin(angle)} / √N`.
pub fn steering_vector<T: Real>(geom: &ArrayGeometry<T>, angle: T) -> Result<Vec<Complex<T>>> {
    if !angle.is_finite() {
        return Err(Error::NonFiniteAngle(angle.to_f64_lossy()));
    }
    Ok(ula_response(geom.num_elements, geom.spatial_frequency(angle)))
}

/// Log-distance pathloss `61.4 + 34·log10(d)` in dB.
pub fn pathloss_db<T: Real>(distance_m: T) -> Result<T> {
    if !(distance_m > T::zero()) || !distance_m.is_finite() {
        return Err(Error::NonPositiveDistance(distance_m.to_f64_lossy()));
    }
    Ok(T::lit(61.4) + T::lit(34.0) * distance_m.log10())
}

/// One propagation path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathState<T> {
    pub path_id: u64,
    pub is_los: bool,
    /// Linear-scale complex amplitude (antenna gains and pathloss folded in).
    pub complex_gain: Complex<T>,
    /// Angle of departure at the mRRH, radians in (−π/2, π/2].
    pub aod: T,
    /// Angle of arrival at the mTAT, radians in (−π/2, π/2].
    pub aoa: T,
    pub doppler_hz: T,
    pub birth_window: u64,
    /// First window in which the path no longer exists; [`IMMORTAL`] for LoS.
    pub death_window: u64,
    /// Longitudinal position of the reflector on the building line, NLoS only.
    pub reflector_x_m: Option<T>,
}

impl<T: Real> PathState<T> {
    /// Doppler phase factor `e^{j2πνt}` at `time_s`.
    pub fn doppler_rotation(&self, time_s: T) -> Complex<T> {
        Complex::from_polar(T::one(), T::TAU() * self.doppler_hz * time_s)
    }

    pub fn is_alive_in(&self, window: u64) -> bool {
        self.birth_window <= window && window < self.death_window
    }
}

/// Physical channel matrix `H = √(N_t N_r) Σ_l α_l a_r(aoa_l) a_t(aod_l)^H e^{j2πν_l t}`.
///
/// Rows index receive elements, columns transmit elements.
pub fn build_channel<T: Real>(
    paths: &[PathState<T>],
    tx_geom: &ArrayGeometry<T>,
    rx_geom: &ArrayGeometry<T>,
    time_s: T,
) -> Result<CMatrix<T>> {
    let n_t = tx_geom.num_elements;
    let n_r = rx_geom.num_elements;
    let array_gain = T::from_usize_lossy(n_t * n_r).sqrt();
    let mut h = CMatrix::zeros(n_r, n_t);
    for path in paths {
        let a_r = steering_vector(rx_geom, path.aoa)?;
        let a_t = steering_vector(tx_geom, path.aod)?;
        let coef = path.complex_gain * path.doppler_rotation(time_s) * array_gain;
        h.add_assign(&CMatrix::outer(&a_r, &a_t).scale_complex(coef))?;
    }
    Ok(h)
}

/// The live paths at one timeslot together with their physical channel matrix.
#[derive(Debug, Clone)]
pub struct ChannelSnapshot<T> {
    pub timeslot: u64,
    pub live_paths: Vec<PathState<T>>,
    pub h_matrix: CMatrix<T>,
}

impl<T: Real> ChannelSnapshot<T> {
    pub fn new(
        timeslot: u64,
        live_paths: Vec<PathState<T>>,
        tx_geom: &ArrayGeometry<T>,
        rx_geom: &ArrayGeometry<T>,
        time_s: T,
    ) -> Result<Self> {
        let los = live_paths.iter().filter(|p| p.is_los).count();
        if los != 1 {
            return Err(Error::Invariant(format!(
                "snapshot must carry exactly one LoS path, found {los}"
            )));
        }
        let h_matrix = build_channel(&live_paths, tx_geom, rx_geom, time_s)?;
        Ok(Self {
            timeslot,
            live_paths,
            h_matrix,
        })
    }

    pub fn num_paths(&self) -> usize {
        self.live_paths.len()
    }
}
