//! Top-view geometry of one mRRH coverage segment.
//!
//! Coordinates: the track runs along `x` at `y = 0`, the mast stands at
//! `x = 0` with the mRRH at `y = track_offset_m`, and the reflecting building
//! line runs parallel to the track at `y = -building_offset_m`. The train moves
//! towards `+x`. Both arrays have their broadside along the track, so a
//! direction's angle is `atan2(lateral, longitudinal)` folded into the ULA's
//! unambiguous range.

use crate::channel::pathloss_db;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Folds an angle in (−π, π] onto (−π/2, π/2] preserving its sine.
pub fn fold_ula_angle<T: Real>(angle: T) -> T {
    let half_pi = T::FRAC_PI_2();
    let pi = T::PI();
    let folded = if angle > half_pi {
        pi - angle
    } else if angle <= -half_pi {
        -pi - angle
    } else {
        angle
    };
    if folded <= -half_pi {
        half_pi
    } else {
        folded
    }
}

/// Line-of-sight parameters at one train position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LosGeometry<T> {
    pub aod: T,
    pub aoa: T,
    pub distance_m: T,
    pub doppler_hz: T,
}

/// Angles, length and Doppler of any (direct or reflected) path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathGeometry<T> {
    pub aod: T,
    pub aoa: T,
    pub distance_m: T,
    pub doppler_hz: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneGeometry<T> {
    /// Lateral distance between the mRRH and the track.
    pub track_offset_m: T,
    /// Lateral distance between the track and the reflecting building line.
    pub building_offset_m: T,
    pub train_speed_mps: T,
    pub wavelength_m: T,
    pub tti_s: T,
    /// Train position at slot 0, relative to the mast (negative = before it).
    pub start_x_m: T,
    pub horizon_slots: u64,
    pub tx_antenna_gain_dbi: T,
    pub rx_antenna_gain_dbi: T,
}

impl<T: Real> SceneGeometry<T> {
    /// Train position for a (possibly negative, i.e. pre-traverse) slot index.
    pub fn train_x(&self, slot: i64) -> T {
        self.start_x_m + self.train_speed_mps * T::lit(slot as f64) * self.tti_s
    }

    /// LoS angles, distance and Doppler at `timeslot` within the traverse.
    pub fn geometry_update(&self, timeslot: u64) -> Result<LosGeometry<T>> {
        if timeslot >= self.horizon_slots {
            return Err(Error::SlotOutOfRange {
                slot: timeslot,
                horizon: self.horizon_slots,
            });
        }
        Ok(self.los_at(self.train_x(timeslot as i64)))
    }

    pub fn los_at(&self, train_x: T) -> LosGeometry<T> {
        let longitudinal = -train_x;
        let lateral = self.track_offset_m;
        let angle = lateral.atan2(longitudinal);
        let distance_m = longitudinal.hypot(lateral);
        LosGeometry {
            aod: fold_ula_angle(angle),
            aoa: fold_ula_angle(angle),
            distance_m,
            doppler_hz: self.doppler(longitudinal, distance_m),
        }
    }

    /// Single-bounce path mRRH → reflector at `(reflector_x, -building_offset)` → train.
    pub fn reflected_at(&self, train_x: T, reflector_x: T) -> PathGeometry<T> {
        let ry = -self.building_offset_m;
        // Departure: from the mRRH towards the reflector.
        let dep_long = -reflector_x;
        let dep_lat = self.track_offset_m - ry;
        // Arrival: from the train towards the reflector.
        let arr_long = reflector_x - train_x;
        let arr_lat = ry;
        let first_leg = dep_long.hypot(dep_lat);
        let second_leg = arr_long.hypot(arr_lat);
        PathGeometry {
            aod: fold_ula_angle(dep_lat.atan2(dep_long)),
            aoa: fold_ula_angle(arr_lat.atan2(arr_long)),
            distance_m: first_leg + second_leg,
            doppler_hz: self.doppler(arr_long, second_leg),
        }
    }

    /// `(v/λ)·cos` of the angle between the velocity and the arrival direction.
    fn doppler(&self, along_track: T, length: T) -> T {
        if length <= T::zero() {
            return T::zero();
        }
        self.train_speed_mps / self.wavelength_m * (along_track / length)
    }

    pub fn max_doppler_hz(&self) -> T {
        self.train_speed_mps / self.wavelength_m
    }

    /// Amplitude `|α|` for a path of the given length with an extra loss on top of pathloss.
    pub fn path_amplitude(&self, distance_m: T, extra_loss_db: T) -> Result<T> {
        let db = self.tx_antenna_gain_dbi + self.rx_antenna_gain_dbi - pathloss_db(distance_m)? - extra_loss_db;
        Ok(T::lit(10.0).powf(db / T::lit(20.0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn scene(speed: f64) -> SceneGeometry<f64> {
        SceneGeometry {
            track_offset_m: 5.0,
            building_offset_m: 15.0,
            train_speed_mps: speed,
            wavelength_m: 299_792_458.0 / 28e9,
            tti_s: 0.25e-3,
            start_x_m: -250.0,
            horizon_slots: 20_000,
            tx_antenna_gain_dbi: 25.0,
            rx_antenna_gain_dbi: 12.0,
        }
    }

    #[test]
    fn fold_preserves_sine() {
        for a in [-3.0, -2.0, -PI / 2.0, -0.3, 0.0, 1.2, PI / 2.0, 2.5, PI] {
            let f = fold_ula_angle(a);
            assert!(f > -PI / 2.0 && f <= PI / 2.0, "{a} -> {f}");
            assert!((f.sin().abs() - a.sin().abs()).abs() < 1e-12);
            if a.sin().abs() < 1.0 - 1e-12 {
                assert!((f.sin() - a.sin()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn abeam_the_mast() {
        let s = scene(100.0);
        let g = s.los_at(0.0);
        assert!((g.distance_m - 5.0).abs() < 1e-12);
        assert!(g.doppler_hz.abs() < 1e-9);
        assert!((g.aod - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn approaching_doppler() {
        let s = scene(100.0);
        let g = s.geometry_update(0).unwrap();
        let expect = (100.0 / s.wavelength_m) * (5.0f64 / 250.0).atan().cos();
        assert!((g.doppler_hz - expect).abs() < 1e-9);
        // 100 / 0.010707 · 0.9998 ≈ 9338 Hz.
        assert!((g.doppler_hz - 9338.0).abs() < 2.0, "{}", g.doppler_hz);
        assert!((g.distance_m - 250.05).abs() < 0.01);
        assert!((g.aod - (5.0f64).atan2(250.0)).abs() < 1e-12);
    }

    #[test]
    fn stationary_train_has_no_doppler() {
        let s = scene(0.0);
        for slot in [0, 5_000, 19_999] {
            assert_eq!(s.geometry_update(slot).unwrap().doppler_hz, 0.0);
        }
    }

    #[test]
    fn rejects_slot_beyond_horizon() {
        let s = scene(100.0);
        assert!(matches!(s.geometry_update(20_000), Err(Error::SlotOutOfRange { .. })));
    }

    #[test]
    fn receding_train_folds_angle() {
        let s = scene(100.0);
        let before = s.los_at(-100.0);
        let after = s.los_at(100.0);
        assert!((before.aod - after.aod).abs() < 1e-12);
        assert!((before.doppler_hz + after.doppler_hz).abs() < 1e-9);
    }

    #[test]
    fn reflected_path_is_longer_than_los() {
        let s = scene(100.0);
        for (tx, rx) in [(-200.0, -180.0), (-50.0, -80.0), (10.0, 40.0)] {
            let r = s.reflected_at(tx, rx);
            assert!(r.distance_m > s.los_at(tx).distance_m);
            assert!(r.doppler_hz.abs() <= s.max_doppler_hz() + 1e-9);
            assert!(r.aod > -PI / 2.0 && r.aod <= PI / 2.0);
        }
    }

    #[test]
    fn amplitude_from_budget() {
        let s = scene(100.0);
        // 25 + 12 - 61.4 = -24.4 dB at 1 m.
        let a = s.path_amplitude(1.0, 0.0).unwrap();
        assert!((20.0 * a.log10() + 24.4).abs() < 1e-9);
        let b = s.path_amplitude(1.0, 15.0).unwrap();
        assert!((20.0 * (a / b).log10() - 15.0).abs() < 1e-9);
    }
}
