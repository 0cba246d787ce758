//! Run reports and artifact emission: unit-tagged quantities, CSV
//! writers with fixed formatting, and a SHA-256 manifest so repeated
//! runs can be compared byte for byte.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::device::BandCounts;
use crate::dynamics::EfficiencyCurve;
use crate::error::Result;
use crate::modes::GuidedMode;
use crate::qpm::PhasematchingCurve;

/// A value tagged with its unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub value: f64,
    pub unit: String,
}

impl Quantity {
    pub fn new(value: f64, unit: &str) -> Self {
        Self { value, unit: unit.into() }
    }
}

/// One emitted file with its content hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub kind: String,
    pub sha256: String,
}

/// Machine-readable summary of one command run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    /// Tool name and version that produced the report.
    pub tool: String,
    pub command: String,
    /// SHA-256 of the canonical (defaults-echoed) configuration JSON.
    pub config_sha256: String,
    /// Identity and schema version of the material data set.
    pub material_data: String,
    /// Derived quantities, each carrying its unit.
    pub quantities: BTreeMap<String, Quantity>,
    /// Guided-mode counts when the command solved for them.
    pub counts: Option<BandCounts>,
    /// Free-form caveats about model validity.
    pub annotations: Vec<String>,
    /// Data files emitted alongside this report.
    pub files: Vec<ManifestEntry>,
}

impl RunReport {
    pub fn new(command: &str, config: &RunConfig, material_data: String) -> Result<Self> {
        Ok(Self {
            tool: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
            command: command.into(),
            config_sha256: sha256_hex(config.canonical_json()?.as_bytes()),
            material_data,
            quantities: BTreeMap::new(),
            counts: None,
            annotations: Vec::new(),
            files: Vec::new(),
        })
    }

    pub fn set(&mut self, name: &str, value: f64, unit: &str) {
        self.quantities.insert(name.into(), Quantity::new(value, unit));
    }

    pub fn annotate(&mut self, note: &str) {
        self.annotations.push(note.into());
    }

    /// Stable serialized form (sorted quantity keys, trailing newline).
    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }
}

/// An artifact prepared in memory, written only after the whole command
/// has succeeded.
#[derive(Debug, Clone)]
pub struct Artifact {
    /// File name inside the output directory.
    pub name: String,
    /// Role tag recorded in the manifest (`mode_field`, `curve`, …).
    pub kind: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn new(name: &str, kind: &str, text: String) -> Self {
        Self { name: name.into(), kind: kind.into(), bytes: text.into_bytes() }
    }
}

/// Hex-encoded SHA-256 digest.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        use std::fmt::Write;
        write!(out, "{b:02x}").expect("string write");
    }
    out
}

/// Write all artifacts plus the report into `out_dir`, recording each
/// data file's hash in the report manifest. The report itself is written
/// last so a partially emitted directory never carries a report.
pub fn emit_artifacts(
    out_dir: &Path,
    report: &mut RunReport,
    artifacts: &[Artifact],
) -> Result<PathBuf> {
    std::fs::create_dir_all(out_dir)?;
    report.files = artifacts
        .iter()
        .map(|a| ManifestEntry {
            path: a.name.clone(),
            kind: a.kind.clone(),
            sha256: sha256_hex(&a.bytes),
        })
        .collect();
    for artifact in artifacts {
        std::fs::write(out_dir.join(&artifact.name), &artifact.bytes)?;
    }
    let report_path = out_dir.join("report.json");
    std::fs::write(&report_path, report.to_json()?)?;
    Ok(report_path)
}

/// Mode-field CSV: header row, "." decimal separator, "\n" line ends,
/// row-major over the grid (x fastest).
pub fn mode_csv(mode: &GuidedMode) -> String {
    let g = &mode.grid;
    let mut out = String::with_capacity(24 * g.len());
    out.push_str("x_um,y_um,field\n");
    for j in 0..g.ny {
        for i in 0..g.nx {
            use std::fmt::Write;
            writeln!(out, "{:.4},{:.4},{:.6e}", g.x(i), g.y(j), mode.field_at(i, j))
                .expect("string write");
        }
    }
    out
}

/// Phasematching-curve CSV (`lambda_in_nm,response`).
pub fn curve_csv(curve: &PhasematchingCurve) -> String {
    let mut out = String::with_capacity(32 * curve.points.len());
    out.push_str("lambda_in_nm,response\n");
    for &(lambda, response) in &curve.points {
        use std::fmt::Write;
        writeln!(out, "{lambda:.6},{response:.9e}").expect("string write");
    }
    out
}

/// Sidecar JSON for a phasematching curve.
pub fn curve_sidecar(curve: &PhasematchingCurve) -> Result<String> {
    let value = serde_json::json!({
        "fwhm_nm": curve.fwhm_nm,
        "peak_lambda_in_nm": curve.peak_lambda_nm,
        "temperature_c": curve.t_c,
        "pump_power_mw": curve.p_pump_mw,
    });
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    Ok(text)
}

/// Conversion-dynamics CSV (`p_pump_mw,eta_conversion,eta_depletion`).
pub fn dynamics_csv(sweep: &EfficiencyCurve) -> String {
    let mut out = String::with_capacity(40 * sweep.p_pump_mw.len());
    out.push_str("p_pump_mw,eta_conversion,eta_depletion\n");
    for k in 0..sweep.p_pump_mw.len() {
        use std::fmt::Write;
        writeln!(
            out,
            "{:.3},{:.9e},{:.9e}",
            sweep.p_pump_mw[k], sweep.eta_conversion[k], sweep.eta_depletion[k]
        )
        .expect("string write");
    }
    out
}

/// Sidecar JSON for a dynamics sweep.
pub fn dynamics_sidecar(sweep: &EfficiencyCurve, p_in_uw: f64, steps: usize) -> Result<String> {
    let value = serde_json::json!({
        "loss_model": sweep.loss_label,
        "eta_nor_per_w_m2": sweep.eta_nor_per_w_m2,
        "p_in_uw": p_in_uw,
        "integration_steps": steps,
    });
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_matches_known_vector() {
        // FIPS 180-4 test vector for "abc".
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn report_round_trips_and_sorts_quantities() {
        let config = RunConfig::default();
        let mut report = RunReport::new("qpm", &config, "builtin:ktp schema 1".into()).unwrap();
        report.set("zeta", 1.0, "nm");
        report.set("alpha", 2.0, "mm");
        let text = report.to_json().unwrap();
        // BTreeMap serialization orders keys, so "alpha" precedes "zeta".
        assert!(text.find("alpha").unwrap() < text.find("zeta").unwrap());
        let back: RunReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.quantities["alpha"], Quantity::new(2.0, "mm"));
        assert_eq!(back.config_sha256.len(), 64);
    }

    #[test]
    fn csv_formats_use_point_decimal_and_newline() {
        let curve = PhasematchingCurve {
            points: vec![(1310.5, 0.25), (1311.0, 1.0)],
            fwhm_nm: 0.185,
            peak_lambda_nm: 1311.0,
            t_c: 20.0,
            p_pump_mw: 0.0,
        };
        let csv = curve_csv(&curve);
        assert_eq!(
            csv,
            "lambda_in_nm,response\n1310.500000,2.500000000e-1\n1311.000000,1.000000000e0\n"
        );
        assert!(!csv.contains('\r'));
        let sidecar = curve_sidecar(&curve).unwrap();
        assert!(sidecar.contains("\"fwhm_nm\": 0.185"));
    }

    #[test]
    fn emission_manifest_hashes_every_data_file() {
        let dir = tempfile::tempdir().unwrap();
        let config = RunConfig::default();
        let mut report = RunReport::new("curve", &config, "builtin".into()).unwrap();
        let artifacts = vec![
            Artifact::new("a.csv", "curve", "x\n1\n".into()),
            Artifact::new("a.json", "curve_sidecar", "{}\n".into()),
        ];
        let report_path = emit_artifacts(dir.path(), &mut report, &artifacts).unwrap();
        assert!(report_path.ends_with("report.json"));
        assert_eq!(report.files.len(), 2);
        for entry in &report.files {
            let bytes = std::fs::read(dir.path().join(&entry.path)).unwrap();
            assert_eq!(sha256_hex(&bytes), entry.sha256);
        }
        let text = std::fs::read_to_string(report_path).unwrap();
        let back: RunReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.files, report.files);
    }
}
