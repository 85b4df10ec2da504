use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// All scalar parameters of the link, fully resolved (derived quantities
/// filled in).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemConfig {
    pub n_t: usize,
    pub n_r: usize,
    pub m_tx: usize,
    pub n_rx: usize,
    pub layers_tx: usize,
    pub layers_rx: usize,
    pub carrier_freq: f64,
    pub wavelength: f64,
    pub element_spacing: f64,
    pub element_area: f64,
    pub sim_thickness_tx: f64,
    pub sim_thickness_rx: f64,
    pub link_distance: f64,
    pub pathloss_exponent: f64,
    pub tx_power_dbm: f64,
    pub noise_dbm: f64,
    pub bandwidth_hz: f64,
    pub altitude_m: f64,
    pub seed: u64,
}

/// On-disk form. Every field is optional; derived lengths default from the
/// wavelength.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ConfigFile {
    n_t: Option<usize>,
    n_r: Option<usize>,
    m_tx: Option<usize>,
    n_rx: Option<usize>,
    layers_tx: Option<usize>,
    layers_rx: Option<usize>,
    carrier_freq: Option<f64>,
    wavelength: Option<f64>,
    element_spacing: Option<f64>,
    element_area: Option<f64>,
    sim_thickness_tx: Option<f64>,
    sim_thickness_rx: Option<f64>,
    link_distance: Option<f64>,
    pathloss_exponent: Option<f64>,
    tx_power_dbm: Option<f64>,
    noise_dbm: Option<f64>,
    bandwidth_hz: Option<f64>,
    altitude_m: Option<f64>,
    seed: Option<u64>,
}

impl ConfigFile {
    fn resolve(self) -> Result<SystemConfig> {
        let carrier_freq = self.carrier_freq.unwrap_or(2e9);
        if !(carrier_freq > 0.0 && carrier_freq.is_finite()) {
            return Err(Error::InvalidConfig(format!("carrier_freq must be positive, got {carrier_freq}")));
        }
        let derived = SPEED_OF_LIGHT / carrier_freq;
        let wavelength = match self.wavelength {
            Some(w) if ((w - derived) / derived).abs() > 1e-9 => {
                return Err(Error::InvalidConfig(format!("wavelength {w} disagrees with c/carrier_freq = {derived}")))
            }
            Some(w) => w,
            None => derived,
        };
        let cfg = SystemConfig {
            n_t: self.n_t.unwrap_or(8),
            n_r: self.n_r.unwrap_or(8),
            m_tx: self.m_tx.unwrap_or(40),
            n_rx: self.n_rx.unwrap_or(100),
            layers_tx: self.layers_tx.unwrap_or(4),
            layers_rx: self.layers_rx.unwrap_or(4),
            carrier_freq,
            wavelength,
            element_spacing: self.element_spacing.unwrap_or(wavelength / 2.0),
            element_area: self.element_area.unwrap_or((wavelength / 2.0).powi(2)),
            sim_thickness_tx: self.sim_thickness_tx.unwrap_or(5.0 * wavelength),
            sim_thickness_rx: self.sim_thickness_rx.unwrap_or(5.0 * wavelength),
            link_distance: self.link_distance.unwrap_or(200.0),
            pathloss_exponent: self.pathloss_exponent.unwrap_or(2.5),
            tx_power_dbm: self.tx_power_dbm.unwrap_or(20.0),
            noise_dbm: self.noise_dbm.unwrap_or(-110.0),
            bandwidth_hz: self.bandwidth_hz.unwrap_or(2e7),
            altitude_m: self.altitude_m.unwrap_or(5.0),
            seed: self.seed.unwrap_or(1),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl Default for SystemConfig {
    fn default() -> Self {
        ConfigFile::default().resolve().expect("default configuration is valid")
    }
}

impl SystemConfig {
    /// Parses a JSON object. Absent fields take their defaults; unknown keys
    /// are rejected.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: ConfigFile = serde_json::from_str(text)?;
        raw.resolve()
    }

    /// Parses a JSON object after applying `key=value` overrides. Values are
    /// parsed as JSON, so `m_tx=20` sets an integer.
    pub fn from_json_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut map: Map<String, Value> = if text.trim().is_empty() {
            Map::new()
        } else {
            match serde_json::from_str(text)? {
                Value::Object(map) => map,
                _ => return Err(Error::InvalidConfig("config must be a JSON object".into())),
            }
        };
        for (key, value) in overrides {
            let parsed: Value = serde_json::from_str(value)
                .map_err(|_| Error::InvalidConfig(format!("cannot parse override {key}={value}")))?;
            map.insert(key.clone(), parsed);
        }
        let raw: ConfigFile = serde_json::from_value(Value::Object(map))?;
        raw.resolve()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_t", self.n_t),
            ("n_r", self.n_r),
            ("m_tx", self.m_tx),
            ("n_rx", self.n_rx),
            ("layers_tx", self.layers_tx),
            ("layers_rx", self.layers_rx),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        let positive = [
            ("wavelength", self.wavelength),
            ("element_spacing", self.element_spacing),
            ("element_area", self.element_area),
            ("sim_thickness_tx", self.sim_thickness_tx),
            ("sim_thickness_rx", self.sim_thickness_rx),
            ("link_distance", self.link_distance),
            ("bandwidth_hz", self.bandwidth_hz),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive and finite, got {v}")));
            }
        }
        for (name, v) in [
            ("pathloss_exponent", self.pathloss_exponent),
            ("tx_power_dbm", self.tx_power_dbm),
            ("noise_dbm", self.noise_dbm),
            ("altitude_m", self.altitude_m),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be finite")));
            }
        }
        if self.pathloss_exponent < 0.0 {
            return Err(Error::InvalidConfig("pathloss_exponent must be non-negative".into()));
        }
        if self.link_distance <= self.sim_thickness_tx + self.sim_thickness_rx {
            return Err(Error::InvalidConfig("link_distance must exceed the combined SIM thickness".into()));
        }
        Ok(())
    }

    /// ρ = P/σ² (linear).
    pub fn snr_linear(&self) -> f64 {
        db_to_linear(self.tx_power_dbm - self.noise_dbm)
    }

    pub fn snr_db(&self) -> f64 {
        self.tx_power_dbm - self.noise_dbm
    }

    /// `min(M, N)`.
    pub fn s(&self) -> usize {
        self.m_tx.min(self.n_rx)
    }

    /// `max(M, N)`.
    pub fn t(&self) -> usize {
        self.m_tx.max(self.n_rx)
    }

    pub fn layer_gap_tx(&self) -> f64 {
        self.sim_thickness_tx / self.layers_tx as f64
    }

    pub fn layer_gap_rx(&self) -> f64 {
        self.sim_thickness_rx / self.layers_rx as f64
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}
