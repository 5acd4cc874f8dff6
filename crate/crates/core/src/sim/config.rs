//! Scenario file: flat TOML with units in the key names. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bandit::PolicyConfig;
use crate::channel::{ArrayGeometry, PathDynamicsConfig, SceneGeometry};
use crate::codebook::{Codebook, MeasurementConfig, Side, StreamModel};
use crate::error::{Error, Result};

const SPEED_OF_LIGHT_MPS: f64 = 299_792_458.0;

/// Whether later traverses see the same path schedule as the first one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvironmentMode {
    Replay,
    Fresh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub mrrh_spacing_m: f64,
    pub track_offset_m: f64,
    pub building_offset_m: f64,
    pub carrier_hz: f64,
    pub tx_antenna_gain_dbi: f64,
    pub rx_antenna_gain_dbi: f64,
    pub tx_power_dbm: f64,
    pub noise_power_dbm: f64,
    pub train_speed_kmh: f64,
    pub tti_s: f64,
    pub slots_per_traverse: u64,
    pub num_traverses: u32,
    pub n_t: usize,
    pub n_r: usize,
    pub num_measure: usize,
    pub num_streams: usize,
    pub seed: u64,

    pub exploration_c: f64,
    pub bin_len_slots: u64,
    pub update_measured: bool,
    pub adaptive_streams: bool,
    pub pilot_length: usize,
    pub pilot_fraction: f64,
    pub stream_model: StreamModel,

    pub wss_window_slots: u64,
    pub birth_prob_by_count: Vec<f64>,
    pub max_paths: usize,
    pub lifetime_mean_s: f64,
    pub lifetime_std_s: f64,
    pub lifetime_min_s: f64,
    pub lifetime_max_s: f64,
    pub nlos_extra_loss_db: f64,
    pub reflector_span_m: f64,
    /// Windows simulated before the traverse starts so it begins in steady state.
    pub burn_in_windows: u64,
    pub environment: EnvironmentMode,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            mrrh_spacing_m: 500.0,
            track_offset_m: 5.0,
            building_offset_m: 15.0,
            carrier_hz: 28e9,
            tx_antenna_gain_dbi: 25.0,
            rx_antenna_gain_dbi: 12.0,
            tx_power_dbm: 33.0,
            noise_power_dbm: -80.0,
            train_speed_kmh: 360.0,
            tti_s: 0.25e-3,
            slots_per_traverse: 20_000,
            num_traverses: 2,
            n_t: 32,
            n_r: 32,
            num_measure: 6,
            num_streams: 3,
            seed: 1,
            exploration_c: 1.0,
            bin_len_slots: 100,
            update_measured: false,
            adaptive_streams: true,
            pilot_length: 8,
            pilot_fraction: 0.2,
            stream_model: StreamModel::Sinr,
            wss_window_slots: 100,
            birth_prob_by_count: vec![0.217, 0.215, 0.103, 0.092],
            max_paths: 5,
            lifetime_mean_s: 0.251,
            lifetime_std_s: 0.055,
            lifetime_min_s: 0.025,
            lifetime_max_s: 0.75,
            nlos_extra_loss_db: 15.0,
            reflector_span_m: 50.0,
            burn_in_windows: 40,
            environment: EnvironmentMode::Replay,
        }
    }
}

fn dbm_to_w(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config is always serializable")
    }

    pub fn speed_mps(&self) -> f64 {
        self.train_speed_kmh / 3.6
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT_MPS / self.carrier_hz
    }

    pub fn tx_power_w(&self) -> f64 {
        dbm_to_w(self.tx_power_dbm)
    }

    pub fn noise_power_w(&self) -> f64 {
        dbm_to_w(self.noise_power_dbm)
    }

    pub fn num_arms(&self) -> usize {
        self.n_t * self.n_r
    }

    pub fn num_windows(&self) -> u64 {
        self.slots_per_traverse.div_ceil(self.wss_window_slots)
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(field: &'static str, v: f64) -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be positive and finite, got {v}")))
            }
        }
        fn finite(field: &'static str, v: f64) -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(field, "must be finite"))
            }
        }
        positive("mrrh_spacing_m", self.mrrh_spacing_m)?;
        positive("track_offset_m", self.track_offset_m)?;
        positive("building_offset_m", self.building_offset_m)?;
        positive("carrier_hz", self.carrier_hz)?;
        finite("tx_antenna_gain_dbi", self.tx_antenna_gain_dbi)?;
        finite("rx_antenna_gain_dbi", self.rx_antenna_gain_dbi)?;
        finite("tx_power_dbm", self.tx_power_dbm)?;
        finite("noise_power_dbm", self.noise_power_dbm)?;
        positive("train_speed_kmh", self.train_speed_kmh)?;
        positive("tti_s", self.tti_s)?;
        if !(self.exploration_c >= 0.0 && self.exploration_c.is_finite()) {
            return Err(Error::config("exploration_c", "must be non-negative"));
        }
        if self.slots_per_traverse == 0 {
            return Err(Error::config("slots_per_traverse", "must be at least 1"));
        }
        if self.num_traverses == 0 {
            return Err(Error::config("num_traverses", "must be at least 1"));
        }
        if self.n_t == 0 || self.n_r == 0 {
            return Err(Error::config("n_t", "array sizes must be at least 1"));
        }
        if self.num_streams == 0 {
            return Err(Error::config("num_streams", "must be at least 1"));
        }
        if self.num_measure <= self.num_streams {
            return Err(Error::config("num_measure", "must exceed num_streams"));
        }
        if self.num_measure > self.num_arms() {
            return Err(Error::config("num_measure", "cannot exceed n_t * n_r"));
        }
        if self.bin_len_slots == 0 {
            return Err(Error::config("bin_len_slots", "must be at least 1"));
        }
        let travelled = self.slots_per_traverse as f64 * self.tti_s * self.speed_mps();
        if (travelled - self.mrrh_spacing_m).abs() > 1e-6 * self.mrrh_spacing_m {
            return Err(Error::config(
                "slots_per_traverse",
                format!(
                    "slots * tti * speed = {travelled} m but mrrh_spacing_m = {}",
                    self.mrrh_spacing_m
                ),
            ));
        }
        self.measurement_config().validate()?;
        self.dynamics().validate()?;
        self.policy_config().validate(self.num_arms())?;
        Ok(())
    }

    pub fn scene(&self) -> SceneGeometry<f64> {
        SceneGeometry {
            track_offset_m: self.track_offset_m,
            building_offset_m: self.building_offset_m,
            train_speed_mps: self.speed_mps(),
            wavelength_m: self.wavelength_m(),
            tti_s: self.tti_s,
            start_x_m: -self.mrrh_spacing_m / 2.0,
            horizon_slots: self.slots_per_traverse,
            tx_antenna_gain_dbi: self.tx_antenna_gain_dbi,
            rx_antenna_gain_dbi: self.rx_antenna_gain_dbi,
        }
    }

    pub fn dynamics(&self) -> PathDynamicsConfig<f64> {
        PathDynamicsConfig {
            wss_window_slots: self.wss_window_slots,
            tti_s: self.tti_s,
            birth_prob_by_count: self.birth_prob_by_count.clone(),
            max_paths: self.max_paths,
            lifetime_mean_s: self.lifetime_mean_s,
            lifetime_std_s: self.lifetime_std_s,
            lifetime_min_s: self.lifetime_min_s,
            lifetime_max_s: self.lifetime_max_s,
            nlos_extra_loss_db: self.nlos_extra_loss_db,
            reflector_span_m: self.reflector_span_m,
        }
    }

    pub fn measurement_config(&self) -> MeasurementConfig<f64> {
        MeasurementConfig {
            tx_power_w: self.tx_power_w(),
            noise_power_w: self.noise_power_w(),
            pilot_length: self.pilot_length,
            tti_s: self.tti_s,
            pilot_fraction: self.pilot_fraction,
            max_measurements: self.num_arms(),
            stream_model: self.stream_model,
        }
    }

    /// Single-stream LoS rate at the closest point of the track with full array gain.
    pub fn reward_ref_rate(&self) -> f64 {
        let scene = self.scene();
        let amp = scene
            .path_amplitude(self.track_offset_m, 0.0)
            .expect("track offset is validated positive");
        let gain = (self.n_t * self.n_r) as f64 * amp * amp;
        (1.0 + self.tx_power_w() * gain / self.noise_power_w()).log2()
    }

    pub fn policy_config(&self) -> PolicyConfig<f64> {
        PolicyConfig {
            exploration_c: self.exploration_c,
            num_measure: self.num_measure,
            num_streams: self.num_streams,
            reward_ref_rate: self.reward_ref_rate(),
            update_measured: self.update_measured,
            adaptive_streams: self.adaptive_streams,
        }
    }

    pub fn tx_geometry(&self) -> Result<ArrayGeometry<f64>> {
        ArrayGeometry::half_wavelength(self.n_t, self.wavelength_m())
    }

    pub fn rx_geometry(&self) -> Result<ArrayGeometry<f64>> {
        ArrayGeometry::half_wavelength(self.n_r, self.wavelength_m())
    }

    pub fn codebooks(&self) -> Result<(Codebook<f64>, Codebook<f64>)> {
        Ok((
            Codebook::dft(Side::Transmit, self.n_t)?,
            Codebook::dft(Side::Receive, self.n_r)?,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_consistent() {
        let c = ScenarioConfig::default();
        c.validate().unwrap();
        assert!((c.speed_mps() - 100.0).abs() < 1e-12);
        assert!((c.tx_power_w() - 10f64.powf(0.3)).abs() < 1e-12);
        assert!((c.noise_power_w() - 1e-11).abs() < 1e-20);
        assert_eq!(c.num_windows(), 200);
    }

    #[test]
    fn round_trips_through_toml() {
        let c = ScenarioConfig::default();
        let back = ScenarioConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let c = ScenarioConfig::from_toml_str("num_measure = 8\nseed = 3\n").unwrap();
        assert_eq!(c.num_measure, 8);
        assert_eq!(c.n_t, 32);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let e = ScenarioConfig::from_toml_str("tx_power_dBm = 30\n").unwrap_err();
        assert!(matches!(e, Error::ConfigParse(_)), "{e}");
    }

    #[test]
    fn inconsistent_horizon_is_rejected() {
        let e = ScenarioConfig::from_toml_str("slots_per_traverse = 10000\n").unwrap_err();
        assert!(
            matches!(&e, Error::Config { field, .. } if field == "slots_per_traverse"),
            "{e}"
        );
    }

    #[test]
    fn field_level_diagnostics() {
        let e = ScenarioConfig::from_toml_str("num_measure = 3\nnum_streams = 3\n").unwrap_err();
        assert!(matches!(&e, Error::Config { field, .. } if field == "num_measure"));
        let e = ScenarioConfig::from_toml_str("carrier_hz = -1.0\n").unwrap_err();
        assert!(matches!(&e, Error::Config { field, .. } if field == "carrier_hz"));
    }

    #[test]
    fn reference_rate_matches_link_budget() {
        let c = ScenarioConfig::default();
        // 25 + 12 - (61.4 + 34 log10 5) dB, times 1024 array gain, 33 dBm over -80 dBm.
        let amp2 = 10f64.powf((37.0 - 61.4 - 34.0 * 5f64.log10()) / 10.0);
        let expect = (1.0 + 10f64.powf(0.3) * 1024.0 * amp2 / 1e-11).log2();
        assert!((c.reward_ref_rate() - expect).abs() < 1e-9);
    }
}
