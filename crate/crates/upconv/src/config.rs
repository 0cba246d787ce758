//! Run configuration: JSON schema with unit-suffixed keys, defaults for
//! every optional field, strict rejection of unknown keys, and dotted-path
//! overrides for command-line use.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coupling::NonlinearCoefficient;
use crate::device::DeviceParams;
use crate::dynamics::{GriiraModel, LossModel};
use crate::error::{Error, Result};

/// Channel geometry and material selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub width_um: f64,
    pub depth_um: f64,
    pub material: String,
    pub exchange_model: String,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            width_um: 2.0,
            depth_um: 6.0,
            material: "ktp_z".into(),
            exchange_model: "rb_exchange_z".into(),
        }
    }
}

/// Wavelength triple, device length, poling period, and nonlinearity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProcessConfig {
    pub lambda_in_nm: f64,
    pub lambda_pump_nm: f64,
    pub length_mm: f64,
    /// Fabricated poling period, µm.
    pub poling_period_um: f64,
    /// Nonlinear tensor element, pm/V; the first-order grating factor
    /// 2/π is applied internally.
    pub d_eff_pm_per_v: f64,
}

impl Default for ProcessConfig {
    fn default() -> Self {
        Self {
            lambda_in_nm: 1311.0,
            lambda_pump_nm: 514.5,
            length_mm: 9.6,
            poling_period_um: 2.535,
            d_eff_pm_per_v: 16.65,
        }
    }
}

/// Operating point and thermal tuning anchors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OperatingConfig {
    pub temperature_c: f64,
    /// Pump power of the tuning reference condition, mW.
    pub p_ref_mw: f64,
    pub thermal_load_k_per_w: f64,
}

impl Default for OperatingConfig {
    fn default() -> Self {
        Self { temperature_c: 20.0, p_ref_mw: 0.0, thermal_load_k_per_w: 13.8 }
    }
}

/// Phasematching-curve sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurveConfig {
    /// Half-width of the sampled span around the phasematched
    /// wavelength, nm.
    pub half_span_nm: f64,
    pub samples: usize,
    /// Pump power during the curve measurement, mW.
    pub pump_power_mw: f64,
    /// Measured curve width for the effective-length estimate, nm.
    pub measured_fwhm_nm: Option<f64>,
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self { half_span_nm: 0.75, samples: 1501, pump_power_mw: 0.0, measured_fwhm_nm: None }
    }
}

/// Explicit per-band losses replacing the preset list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossOverrideConfig {
    pub alpha_pump_db_per_cm: f64,
    pub alpha_in_db_per_cm: f64,
    pub alpha_out_db_per_cm: f64,
    #[serde(default)]
    pub label: Option<String>,
}

/// Conversion-dynamics sweep configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsConfig {
    /// Input-band power, µW.
    pub p_in_uw: f64,
    /// Pump sweep, mW, strictly increasing.
    pub pump_powers_mw: Vec<f64>,
    /// Loss presets to sweep (`literature`, `estimated`, `lossless`).
    pub loss_presets: Vec<String>,
    /// Explicit losses; when present, replaces `loss_presets`.
    pub loss_override: Option<LossOverrideConfig>,
    /// Pump-induced extra input-band loss coefficient, dB/(cm·W).
    pub griira_db_per_cm_per_w: Option<f64>,
    /// Normalized-efficiency override, 1/(W·cm²); when absent the value
    /// is computed from the mode overlap.
    pub eta_nor_override_per_w_cm2: Option<f64>,
    /// Fixed integration step count.
    pub steps: usize,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            p_in_uw: 20.0,
            pump_powers_mw: (0..=40).map(|i| 10.0 * i as f64).collect(),
            loss_presets: vec!["literature".into(), "estimated".into()],
            loss_override: None,
            griira_db_per_cm_per_w: None,
            eta_nor_override_per_w_cm2: None,
            steps: 2000,
        }
    }
}

/// One named transmission factor of a measurement chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainFactor {
    pub label: String,
    pub transmission: f64,
}

/// Measured powers for the external-efficiency accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasuredConfig {
    /// Input power ahead of the input chain, µW.
    pub p_in_uw: f64,
    /// Detected output power behind the output chain, nW.
    pub p_out_nw: f64,
    /// Output-band transmission of the device relative to a matched
    /// reference, for the loss estimate.
    pub relative_transmission_out: Option<f64>,
}

impl Default for MeasuredConfig {
    fn default() -> Self {
        Self { p_in_uw: 22.1, p_out_nw: 980.0, relative_transmission_out: None }
    }
}

/// Transmission chains and mode matching linking internal and external
/// conversion efficiencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransmissionConfig {
    pub input_chain: Vec<ChainFactor>,
    pub output_chain: Vec<ChainFactor>,
    /// Power fraction of the launched field matched to the converting
    /// mode.
    pub mode_matching: f64,
    pub measured: Option<MeasuredConfig>,
}

impl Default for TransmissionConfig {
    fn default() -> Self {
        Self {
            input_chain: vec![
                ChainFactor { label: "delivery_optics".into(), transmission: 0.517 },
                ChainFactor { label: "launch".into(), transmission: 0.627 },
            ],
            output_chain: vec![ChainFactor { label: "collection".into(), transmission: 0.696 }],
            mode_matching: 0.507,
            measured: None,
        }
    }
}

/// Export grid for the input-band mode field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModeGridConfig {
    pub x_half_um: f64,
    pub y_min_um: f64,
    pub y_max_um: f64,
    pub h_um: f64,
}

impl Default for ModeGridConfig {
    fn default() -> Self {
        Self { x_half_um: 20.0, y_min_um: -0.625, y_max_um: 15.625, h_um: 0.0625 }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Complete run configuration with every default echoed on re-emission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Material data file; absent → compiled-in data set.
    pub material_data: Option<PathBuf>,
    pub geometry: GeometryConfig,
    pub process: ProcessConfig,
    pub operating: OperatingConfig,
    pub curve: CurveConfig,
    pub dynamics: DynamicsConfig,
    pub transmission: TransmissionConfig,
    pub mode_grid: ModeGridConfig,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            material_data: None,
            geometry: GeometryConfig::default(),
            process: ProcessConfig::default(),
            operating: OperatingConfig::default(),
            curve: CurveConfig::default(),
            dynamics: DynamicsConfig::default(),
            transmission: TransmissionConfig::default(),
            mode_grid: ModeGridConfig::default(),
            output_dir: default_output_dir(),
        }
    }
}

impl RunConfig {
    /// Check every cross-field constraint the schema cannot express.
    pub fn validate(&self) -> Result<()> {
        self.device_params()?.validate()?;
        let c = &self.curve;
        if !(c.half_span_nm > 0.0) || c.samples < 16 {
            return Err(Error::Configuration(format!(
                "curve needs half_span_nm > 0 and samples ≥ 16, got ({}, {})",
                c.half_span_nm, c.samples
            )));
        }
        if let Some(f) = c.measured_fwhm_nm {
            if !(f > 0.0) {
                return Err(Error::Configuration(format!(
                    "curve.measured_fwhm_nm must be positive, got {f}"
                )));
            }
        }
        let d = &self.dynamics;
        if !(d.p_in_uw > 0.0) {
            return Err(Error::Configuration(format!(
                "dynamics.p_in_uw must be positive, got {}",
                d.p_in_uw
            )));
        }
        if d.pump_powers_mw.len() < 2 || !d.pump_powers_mw.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Configuration(
                "dynamics.pump_powers_mw must be a strictly increasing list of ≥ 2 powers".into(),
            ));
        }
        if d.pump_powers_mw[0] < 0.0 {
            return Err(Error::Configuration(
                "dynamics.pump_powers_mw must be non-negative".into(),
            ));
        }
        if d.steps < 8 {
            return Err(Error::Configuration(format!(
                "dynamics.steps must be ≥ 8, got {}",
                d.steps
            )));
        }
        if d.loss_override.is_none() {
            if d.loss_presets.is_empty() {
                return Err(Error::Configuration(
                    "dynamics.loss_presets must name at least one preset (or set loss_override)"
                        .into(),
                ));
            }
            for preset in &d.loss_presets {
                loss_preset_by_name(preset)?;
            }
        }
        for model in self.loss_models()? {
            model.validate()?;
        }
        if let Some(eta) = d.eta_nor_override_per_w_cm2 {
            if !(eta > 0.0) {
                return Err(Error::Configuration(format!(
                    "dynamics.eta_nor_override_per_w_cm2 must be positive, got {eta}"
                )));
            }
        }
        let t = &self.transmission;
        for factor in t.input_chain.iter().chain(&t.output_chain) {
            if !(factor.transmission > 0.0 && factor.transmission <= 1.0) {
                return Err(Error::Configuration(format!(
                    "transmission factor '{}' must lie in (0, 1], got {}",
                    factor.label, factor.transmission
                )));
            }
        }
        if !(t.mode_matching > 0.0 && t.mode_matching <= 1.0) {
            return Err(Error::Configuration(format!(
                "transmission.mode_matching must lie in (0, 1], got {}",
                t.mode_matching
            )));
        }
        if let Some(m) = &t.measured {
            if !(m.p_in_uw > 0.0) || !(m.p_out_nw >= 0.0) {
                return Err(Error::Configuration(format!(
                    "measured powers must be positive input / non-negative output, got ({}, {})",
                    m.p_in_uw, m.p_out_nw
                )));
            }
            if let Some(r) = m.relative_transmission_out {
                if !(r > 0.0 && r <= 1.0) {
                    return Err(Error::Configuration(format!(
                        "measured.relative_transmission_out must lie in (0, 1], got {r}"
                    )));
                }
            }
        }
        let g = &self.mode_grid;
        if !(g.x_half_um > 0.0) || !(g.h_um > 0.0) || !(g.y_max_um > g.y_min_um) || g.y_min_um > 0.0
        {
            return Err(Error::Configuration(format!(
                "mode_grid must satisfy x_half_um > 0, h_um > 0, y_min_um ≤ 0 < y_max_um; got ({}, {}, {}, {})",
                g.x_half_um, g.h_um, g.y_min_um, g.y_max_um
            )));
        }
        Ok(())
    }

    /// Device parameters derived from the configuration.
    pub fn device_params(&self) -> Result<DeviceParams> {
        if !(self.process.d_eff_pm_per_v > 0.0) {
            return Err(Error::Configuration(format!(
                "process.d_eff_pm_per_v must be positive, got {}",
                self.process.d_eff_pm_per_v
            )));
        }
        Ok(DeviceParams {
            width_um: self.geometry.width_um,
            depth_um: self.geometry.depth_um,
            lambda_in_nm: self.process.lambda_in_nm,
            lambda_pump_nm: self.process.lambda_pump_nm,
            length_mm: self.process.length_mm,
            poling_period_um: self.process.poling_period_um,
            temperature_c: self.operating.temperature_c,
            p_ref_mw: self.operating.p_ref_mw,
            thermal_load_k_per_w: self.operating.thermal_load_k_per_w,
            d_eff: NonlinearCoefficient {
                tensor_pm_per_v: self.process.d_eff_pm_per_v,
                qpm_factor: std::f64::consts::FRAC_2_PI,
            },
            material: self.geometry.material.clone(),
            exchange_model: self.geometry.exchange_model.clone(),
        })
    }

    /// Loss models the dynamics sweep runs over.
    pub fn loss_models(&self) -> Result<Vec<LossModel>> {
        let d = &self.dynamics;
        let mut models = if let Some(over) = &d.loss_override {
            vec![LossModel {
                alpha_pump_db_per_cm: over.alpha_pump_db_per_cm,
                alpha_in_db_per_cm: over.alpha_in_db_per_cm,
                alpha_out_db_per_cm: over.alpha_out_db_per_cm,
                griira: None,
                label: over.label.clone().unwrap_or_else(|| "custom".into()),
            }]
        } else {
            d.loss_presets
                .iter()
                .map(|p| loss_preset_by_name(p))
                .collect::<Result<Vec<_>>>()?
        };
        if let Some(coeff) = d.griira_db_per_cm_per_w {
            let g = GriiraModel::new(coeff)?;
            for m in &mut models {
                m.griira = Some(g);
            }
        }
        Ok(models)
    }

    /// Stable JSON text with all defaults echoed; basis of the config
    /// hash and of `--emit-config` style round-trips.
    pub fn canonical_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }
}

/// Resolve a loss-preset name.
pub fn loss_preset_by_name(name: &str) -> Result<LossModel> {
    match name {
        "literature" => Ok(LossModel::literature()),
        "estimated" => Ok(LossModel::estimated()),
        "lossless" => Ok(LossModel::lossless()),
        other => Err(Error::Configuration(format!(
            "unknown loss preset '{other}'; expected literature, estimated, or lossless"
        ))),
    }
}

/// Load, override, and validate a configuration file.
///
/// `overrides` are dotted-path assignments (`process.length_mm=19.2`)
/// applied to the parsed JSON before validation; values parse as JSON
/// first and fall back to strings.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|e| {
        Error::Configuration(format!("{}: JSON parse error: {e}", path.display()))
    })?;
    for assignment in overrides {
        apply_override(&mut value, assignment)?;
    }
    let mut config: RunConfig = serde_json::from_value(value)
        .map_err(|e| Error::Configuration(format!("{}: {e}", path.display())))?;
    // A relative material-data path is anchored at the config file.
    if let Some(data) = &config.material_data {
        if data.is_relative() {
            if let Some(dir) = path.parent() {
                config.material_data = Some(dir.join(data));
            }
        }
    }
    config.validate()?;
    Ok(config)
}

/// Apply one `dotted.path=value` assignment to a JSON tree.
pub fn apply_override(root: &mut serde_json::Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment.split_once('=').ok_or_else(|| {
        Error::Configuration(format!(
            "override '{assignment}' must have the form key.path=value"
        ))
    })?;
    if path.is_empty() {
        return Err(Error::Configuration(format!(
            "override '{assignment}' has an empty key path"
        )));
    }
    let value: serde_json::Value = serde_json::from_str(raw)
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut node = root;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, seg) in segments.iter().enumerate() {
        if !node.is_object() {
            return Err(Error::Configuration(format!(
                "override '{path}': segment '{seg}' does not address an object"
            )));
        }
        let map = node.as_object_mut().unwrap();
        if i + 1 == segments.len() {
            map.insert(seg.to_string(), value);
            return Ok(());
        }
        node = map
            .entry(seg.to_string())
            .or_insert_with(|| serde_json::Value::Object(serde_json::Map::new()));
    }
    unreachable!("loop returns on the last segment");
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_documented_defaults() {
        let config: RunConfig = serde_json::from_str("{}").unwrap();
        config.validate().unwrap();
        assert_eq!(config.process.length_mm, 9.6);
        assert_eq!(config.process.poling_period_um, 2.535);
        assert_eq!(config.geometry.width_um, 2.0);
        assert_eq!(config.geometry.depth_um, 6.0);
        assert_eq!(config.dynamics.steps, 2000);
        assert_eq!(config.operating.thermal_load_k_per_w, 13.8);
    }

    #[test]
    fn unknown_or_suffixless_keys_are_rejected() {
        // A length key without its unit suffix is not part of the schema.
        let err = serde_json::from_str::<RunConfig>(r#"{"process": {"length": 9.6}}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("length"), "error does not name the field: {err}");
        assert!(serde_json::from_str::<RunConfig>(r#"{"geometry": {"width": 2.0}}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"unrelated": 1}"#).is_err());
    }

    #[test]
    fn round_trip_is_identical() {
        let config = RunConfig::default();
        let text = config.canonical_json().unwrap();
        let reloaded: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(config, reloaded);
        assert_eq!(text, reloaded.canonical_json().unwrap());
    }

    #[test]
    fn validation_names_field_and_constraint() {
        let mut config = RunConfig::default();
        config.dynamics.pump_powers_mw = vec![100.0, 50.0];
        let err = config.validate().unwrap_err().to_string();
        assert!(err.contains("pump_powers_mw"), "{err}");
        let mut config = RunConfig::default();
        config.transmission.mode_matching = 1.5;
        assert!(config.validate().is_err());
        let mut config = RunConfig::default();
        config.dynamics.loss_presets = vec!["bogus".into()];
        assert!(config.validate().is_err());
        let mut config = RunConfig::default();
        config.curve.samples = 4;
        assert!(config.validate().is_err());
    }

    #[test]
    fn loss_models_respect_override_and_presets() {
        let config = RunConfig::default();
        let models = config.loss_models().unwrap();
        assert_eq!(models.len(), 2);
        assert_eq!(models[0].label, "literature");
        assert_eq!(models[0].alpha_out_db_per_cm, 4.34);
        assert_eq!(models[1].label, "estimated");
        assert_eq!(models[1].alpha_out_db_per_cm, 6.3);
        let mut config = RunConfig::default();
        config.dynamics.loss_override = Some(LossOverrideConfig {
            alpha_pump_db_per_cm: 1.0,
            alpha_in_db_per_cm: 0.5,
            alpha_out_db_per_cm: 2.0,
            label: None,
        });
        let models = config.loss_models().unwrap();
        assert_eq!(models.len(), 1);
        assert_eq!(models[0].label, "custom");
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let mut value = serde_json::json!({});
        apply_override(&mut value, "process.length_mm=19.2").unwrap();
        apply_override(&mut value, "dynamics.loss_presets=[\"estimated\"]").unwrap();
        apply_override(&mut value, "geometry.material=ktp_z").unwrap();
        let config: RunConfig = serde_json::from_value(value).unwrap();
        assert_eq!(config.process.length_mm, 19.2);
        assert_eq!(config.dynamics.loss_presets, vec!["estimated".to_string()]);
        assert_eq!(config.geometry.material, "ktp_z");
        let mut value = serde_json::json!({});
        assert!(apply_override(&mut value, "no-equals-sign").is_err());
        assert!(apply_override(&mut value, "=5").is_err());
    }
}
