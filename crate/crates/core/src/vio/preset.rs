use serde::{Deserialize, Serialize};

use crate::error::VioError;

/// Error model of one VIO hardware configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VioPreset {
    pub name: String,
    /// Output rate (Hz).
    pub rate: f64,
    /// White noise on translation (m) and rotation (rad).
    pub sigma_t: f64,
    pub sigma_r: f64,
    /// Random-walk drift rates (m/√s, rad/√s).
    pub beta_t: f64,
    pub beta_r: f64,
    pub latency_ms: f64,
}

impl VioPreset {
    /// Noise-free, drift-free, zero-latency estimator at `rate`.
    pub fn ideal(rate: f64) -> Self {
        Self {
            name: "ideal".into(),
            rate,
            sigma_t: 0.0,
            sigma_r: 0.0,
            beta_t: 0.0,
            beta_r: 0.0,
            latency_ms: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), VioError> {
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(VioError::InvalidPreset(format!(
                "{}: rate {} must be positive",
                self.name, self.rate
            )));
        }
        let params = [
            self.sigma_t,
            self.sigma_r,
            self.beta_t,
            self.beta_r,
            self.latency_ms,
        ];
        if params.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(VioError::InvalidPreset(format!(
                "{}: noise, drift and latency must be non-negative",
                self.name
            )));
        }
        Ok(())
    }

    pub fn latency(&self) -> f64 {
        self.latency_ms * 1e-3
    }

    /// Multiplies noise and drift (not rate or latency) by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            sigma_t: self.sigma_t * k,
            sigma_r: self.sigma_r * k,
            beta_t: self.beta_t * k,
            beta_r: self.beta_r * k,
            ..self.clone()
        }
    }
}

/// The four shipped hardware configurations, ordered from most to least
/// accurate.
pub const PRESET_NAMES: [&str; 4] = [
    "wired-stereo",
    "wireless-stereo",
    "wired-rgbd",
    "wireless-rgbd",
];

/// Mean absolute position error (m) each shipped preset is calibrated to.
pub fn calibration_target(name: &str) -> Option<f64> {
    match name {
        "wired-stereo" => Some(0.0365),
        "wireless-stereo" => Some(0.0384),
        "wired-rgbd" => Some(0.0541),
        "wireless-rgbd" => Some(0.0833),
        _ => None,
    }
}

/// Relative noise/drift mix of each preset before calibration. Stereo is
/// noise-dominated; the wireless RGB-D link is drift-dominated with a
/// stronger rotational component.
pub fn uncalibrated_shape(name: &str) -> Option<VioPreset> {
    let p = |rate, sigma_t, sigma_r, beta_t, beta_r, latency_ms| VioPreset {
        name: name.to_string(),
        rate,
        sigma_t,
        sigma_r,
        beta_t,
        beta_r,
        latency_ms,
    };
    match name {
        "wired-stereo" => Some(p(30.0, 0.02, 0.01, 0.004, 0.002, 35.0)),
        "wireless-stereo" => Some(p(30.0, 0.02, 0.01, 0.004, 0.002, 70.0)),
        "wired-rgbd" => Some(p(30.0, 0.025, 0.01, 0.007, 0.002, 35.0)),
        "wireless-rgbd" => Some(p(15.0, 0.02, 0.015, 0.012, 0.008, 120.0)),
        _ => None,
    }
}

/// Calibrated presets: the uncalibrated shapes scaled by `mcr fit-presets`
/// (200 seeds from 10000). Mirrors `config/vio_presets.toml`.
#[rustfmt::skip]
pub fn shipped_presets() -> Vec<VioPreset> {
    let p = |name: &str, rate, sigma_t, sigma_r, beta_t, beta_r, latency_ms| VioPreset {
        name: name.to_string(),
        rate,
        sigma_t,
        sigma_r,
        beta_t,
        beta_r,
        latency_ms,
    };
    vec![
        p("wired-stereo", 30.0, 0.015485118485039494, 0.007742559242519747, 0.003097023697007899, 0.0015485118485039494, 35.0),
        p("wireless-stereo", 30.0, 0.016201444204771178, 0.008100722102385589, 0.0032402888409542355, 0.0016201444204771178, 70.0),
        p("wired-rgbd", 30.0, 0.018760345337466334, 0.007504138134986534, 0.0052528966944905735, 0.0015008276269973067, 35.0),
        p("wireless-rgbd", 15.0, 0.01578262950141834, 0.011836972126063756, 0.009469577700851006, 0.0063130518005673365, 120.0),
    ]
}

pub fn shipped_preset(name: &str) -> Result<VioPreset, VioError> {
    if name == "ideal" || name == "zero" {
        return Ok(VioPreset::ideal(30.0));
    }
    shipped_presets()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| VioError::UnknownPreset(name.to_string()))
}

/// On-disk layout of a preset file: a `[[preset]]` table per configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetFile {
    pub preset: Vec<VioPreset>,
}

impl PresetFile {
    pub fn from_toml(text: &str) -> Result<Self, VioError> {
        let file: Self = toml::from_str(text).map_err(|e| VioError::InvalidPreset(e.to_string()))?;
        for p in &file.preset {
            p.validate()?;
        }
        Ok(file)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("preset file serializes")
    }

    pub fn get(&self, name: &str) -> Result<VioPreset, VioError> {
        self.preset
            .iter()
            .find(|p| p.name == name)
            .cloned()
            .ok_or_else(|| VioError::UnknownPreset(name.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_rates() {
        for p in shipped_presets() {
            p.validate().unwrap();
            let expected = if p.name == "wireless-rgbd" { 15.0 } else { 30.0 };
            assert_eq!(p.rate, expected);
        }
    }

    #[test]
    fn negative_noise_rejected() {
        let mut p = VioPreset::ideal(30.0);
        p.sigma_t = -1.0;
        assert!(p.validate().is_err());
        assert!(shipped_preset("nope").is_err());
    }

    #[test]
    fn preset_file_round_trip() {
        let file = PresetFile {
            preset: shipped_presets(),
        };
        let back = PresetFile::from_toml(&file.to_toml()).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.get("wired-rgbd").unwrap().rate, 30.0);
    }
}
