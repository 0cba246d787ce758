//! Command implementations behind the binary: each subcommand maps a
//! validated configuration to solver calls, derived quantities, and
//! deterministic artifacts.

use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::coupling::{
    complete_conversion_power, external_conversion_efficiency, fresnel_transmission,
    internal_from_external, loss_from_relative_transmission, optimal_gaussian_coupling,
    OverlapResult, TransmissionChain,
};
use crate::device::{grid_neff_pump, grid_neff_uv, DeviceModel};
use crate::dynamics::{efficiency_vs_pump, IntegrationControl};
use crate::error::Result;
use crate::grid::Grid;
use crate::material::{MaterialDb, BUILTIN_MATERIAL_ID};
use crate::modes::field_fwhm;
use crate::qpm::{effective_length_from_fwhm, predicted_curve_fwhm_nm, PhasematchingModel};
use crate::report::{
    curve_csv, curve_sidecar, dynamics_csv, dynamics_sidecar, emit_artifacts, mode_csv,
    sha256_hex, Artifact, RunReport,
};

/// The five subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Modes,
    Qpm,
    Curve,
    Dynamics,
    Report,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Modes => "modes",
            CommandKind::Qpm => "qpm",
            CommandKind::Curve => "curve",
            CommandKind::Dynamics => "dynamics",
            CommandKind::Report => "report",
        }
    }
}

/// Configuration resolved against its material data, ready to solve.
pub struct PreparedRun {
    pub config: RunConfig,
    pub model: DeviceModel,
    /// Identity line for the report: data-set id, schema, content hash.
    pub material_tag: String,
}

/// Load material data and bind the device model.
pub fn prepare(config: RunConfig) -> Result<PreparedRun> {
    config.validate()?;
    let (db, material_tag) = match &config.material_data {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                crate::error::Error::Io(std::io::Error::new(
                    e.kind(),
                    format!("{}: {e}", path.display()),
                ))
            })?;
            let db = MaterialDb::from_json(&text)?;
            let tag = format!(
                "{} (schema {}, sha256:{})",
                path.display(),
                db.schema_version,
                sha256_hex(text.as_bytes())
            );
            (db, tag)
        }
        None => {
            let db = MaterialDb::builtin().clone();
            let tag = format!("{BUILTIN_MATERIAL_ID} (schema {})", db.schema_version);
            (db, tag)
        }
    };
    let model = DeviceModel::new(&db, config.device_params()?)?;
    Ok(PreparedRun { config, model, material_tag })
}

/// Run one command and emit its artifacts into `out_dir` (which defaults
/// to the configured output directory).
pub fn run_command(
    kind: CommandKind,
    config: RunConfig,
    out_dir: Option<&Path>,
) -> Result<(RunReport, PathBuf)> {
    let out = out_dir.unwrap_or_else(|| config.output_dir.as_path()).to_path_buf();
    let run = prepare(config)?;
    let mut report = RunReport::new(kind.name(), &run.config, run.material_tag.clone())?;
    let mut artifacts = Vec::new();
    match kind {
        CommandKind::Modes => {
            modes_section(&run, &mut report, &mut artifacts)?;
        }
        CommandKind::Qpm => {
            let pm = run.model.phasematching_model()?;
            qpm_section(&run, &pm, &mut report)?;
        }
        CommandKind::Curve => {
            let pm = run.model.phasematching_model()?;
            curve_section(&run, &pm, &mut report, &mut artifacts)?;
        }
        CommandKind::Dynamics => {
            dynamics_section(&run, &mut report, &mut artifacts)?;
        }
        CommandKind::Report => {
            modes_section(&run, &mut report, &mut artifacts)?;
            let pm = run.model.phasematching_model()?;
            qpm_section(&run, &pm, &mut report)?;
            curve_section(&run, &pm, &mut report, &mut artifacts)?;
            let overlap = dynamics_section(&run, &mut report, &mut artifacts)?;
            transmission_section(&run, overlap.as_ref(), &mut report)?;
        }
    }
    let report_path = emit_artifacts(&out, &mut report, &artifacts)?;
    Ok((report, report_path))
}

/// Mode counts, effective indices, field exports, and the fiber-matching
/// Gaussian fit. Bands without guided modes produce no files.
fn modes_section(
    run: &PreparedRun,
    report: &mut RunReport,
    artifacts: &mut Vec<Artifact>,
) -> Result<()> {
    let t = run.config.operating.temperature_c;
    let p = &run.model.params;
    let counts = run.model.band_counts(t)?;
    report.counts = Some(counts);
    let g = &run.config.mode_grid;
    let export_grid =
        Grid::with_spacing(-g.x_half_um, g.x_half_um, g.y_min_um, g.y_max_um, g.h_um)?;
    if counts.input > 0 {
        let mode = run.model.fundamental(p.lambda_in_nm, t, &export_grid)?;
        report.set("n_eff_input", mode.n_eff, "1");
        let (wx, wy) = field_fwhm(&mode)?;
        report.set("input_mode_fwhm_x_um", wx, "um");
        report.set("input_mode_fwhm_y_um", wy, "um");
        let fit = optimal_gaussian_coupling(&mode)?;
        report.set("gaussian_coupling", fit.efficiency, "1");
        report.set("gaussian_waist_x_um", fit.waist_x_um, "um");
        report.set("gaussian_waist_y_um", fit.waist_y_um, "um");
        artifacts.push(Artifact::new("mode_input.csv", "mode_field", mode_csv(&mode)));
    }
    if counts.pump > 0 {
        let mode = run.model.fundamental(p.lambda_pump_nm, t, &grid_neff_pump())?;
        report.set("n_eff_pump", mode.n_eff, "1");
        artifacts.push(Artifact::new("mode_pump.csv", "mode_field", mode_csv(&mode)));
    }
    if counts.output > 0 {
        let mode = run.model.fundamental(p.lambda_out_nm()?, t, &grid_neff_uv())?;
        report.set("n_eff_output", mode.n_eff, "1");
        let (wx, wy) = field_fwhm(&mode)?;
        report.set("output_mode_fwhm_x_um", wx, "um");
        report.set("output_mode_fwhm_y_um", wy, "um");
        artifacts.push(Artifact::new("mode_output.csv", "mode_field", mode_csv(&mode)));
    }
    Ok(())
}

/// Poling period, group indices, predicted spectral width, and tuning
/// slopes from the dispersion tables.
fn qpm_section(
    run: &PreparedRun,
    pm: &PhasematchingModel,
    report: &mut RunReport,
) -> Result<()> {
    let proc = &run.config.process;
    let op = &run.config.operating;
    report.set("lambda_out_nm", pm.spec.lambda_out_nm, "nm");
    report.set("poling_period_model_um", pm.spec.poling_period_um, "um");
    report.set("poling_period_nominal_um", proc.poling_period_um, "um");
    let ng_in = pm.table_in.group_index(proc.lambda_in_nm)?;
    let ng_out = pm.table_out.group_index(pm.spec.lambda_out_nm)?;
    report.set("group_index_input", ng_in, "1");
    report.set("group_index_output", ng_out, "1");
    report.set("delta_group_index", ng_out - ng_in, "1");
    let fwhm_pred = predicted_curve_fwhm_nm(proc.lambda_in_nm, proc.length_mm, ng_out - ng_in)?;
    report.set("curve_fwhm_predicted_nm", fwhm_pred, "nm");
    if let Some(measured) = run.config.curve.measured_fwhm_nm {
        let l_eff = effective_length_from_fwhm(measured, fwhm_pred, proc.length_mm)?;
        report.set("effective_length_mm", l_eff, "mm");
    }
    let lambda_pm = pm.phasematched_wavelength(op.temperature_c, op.p_ref_mw)?;
    report.set("phasematched_lambda_in_nm", lambda_pm, "nm");
    // Temperature slope by a centered difference well inside the table.
    let dt = 2.5;
    let lam_hot = pm.phasematched_wavelength(op.temperature_c + dt, op.p_ref_mw)?;
    let lam_cold = pm.phasematched_wavelength(op.temperature_c - dt, op.p_ref_mw)?;
    report.set("d_lambda_d_t_nm_per_k", (lam_hot - lam_cold) / (2.0 * dt), "nm/K");
    // Pump-power slope; forward difference keeps powers non-negative.
    let dp = 100.0;
    let lam_loaded = pm.phasematched_wavelength(op.temperature_c, op.p_ref_mw + dp)?;
    let lam_base = pm.phasematched_wavelength(op.temperature_c, op.p_ref_mw)?;
    report.set("d_lambda_d_p_pm_per_mw", (lam_loaded - lam_base) / dp * 1e3, "pm/mW");
    Ok(())
}

/// Sampled phasematching curve around the phasematched wavelength.
fn curve_section(
    run: &PreparedRun,
    pm: &PhasematchingModel,
    report: &mut RunReport,
    artifacts: &mut Vec<Artifact>,
) -> Result<()> {
    let c = &run.config.curve;
    let t = run.config.operating.temperature_c;
    let center = pm.phasematched_wavelength(t, c.pump_power_mw)?;
    let curve = pm.phasematching_curve(
        t,
        c.pump_power_mw,
        (center - c.half_span_nm, center + c.half_span_nm),
        c.samples,
    )?;
    report.set("curve_fwhm_nm", curve.fwhm_nm, "nm");
    report.set("curve_peak_lambda_in_nm", curve.peak_lambda_nm, "nm");
    artifacts.push(Artifact::new("phasematching_curve.csv", "curve", curve_csv(&curve)));
    artifacts.push(Artifact::new(
        "phasematching_curve.meta.json",
        "curve_sidecar",
        curve_sidecar(&curve)?,
    ));
    Ok(())
}

/// Conversion and depletion sweeps for every configured loss model.
/// Returns the overlap result when it was solved (for reuse downstream).
fn dynamics_section(
    run: &PreparedRun,
    report: &mut RunReport,
    artifacts: &mut Vec<Artifact>,
) -> Result<Option<OverlapResult>> {
    let d = &run.config.dynamics;
    let t = run.config.operating.temperature_c;
    let (eta_nor_per_w_m2, overlap) = match d.eta_nor_override_per_w_cm2 {
        Some(cm2) => (cm2 * 1e4, None),
        None => {
            let ov = run.model.overlap(t)?;
            report.set("overlap_kappa_per_m", ov.kappa_per_m, "1/m");
            (ov.eta_nor_per_w_m2, Some(ov))
        }
    };
    report.set("eta_nor_per_w_cm2", eta_nor_per_w_m2 * 1e-4, "1/(W cm^2)");
    let length_m = run.model.params.length_mm * 1e-3;
    let p_complete_w = complete_conversion_power(eta_nor_per_w_m2, length_m)?;
    report.set("complete_conversion_power_mw", p_complete_w * 1e3, "mW");
    let spec = run.config.device_params()?.process_spec()?;
    let control = IntegrationControl { steps: d.steps, refine_tolerance: None };
    for losses in run.config.loss_models()? {
        let sweep = efficiency_vs_pump(
            &d.pump_powers_mw,
            d.p_in_uw,
            &spec,
            eta_nor_per_w_m2,
            &losses,
            &control,
        )?;
        let peak_depl = sweep.eta_depletion.iter().cloned().fold(0.0_f64, f64::max);
        let peak_conv = sweep.eta_conversion.iter().cloned().fold(0.0_f64, f64::max);
        report.set(&format!("peak_depletion_{}", sweep.loss_label), peak_depl, "1");
        report.set(&format!("peak_conversion_{}", sweep.loss_label), peak_conv, "1");
        artifacts.push(Artifact::new(
            &format!("dynamics_{}.csv", sweep.loss_label),
            "dynamics",
            dynamics_csv(&sweep),
        ));
        artifacts.push(Artifact::new(
            &format!("dynamics_{}.meta.json", sweep.loss_label),
            "dynamics_sidecar",
            dynamics_sidecar(&sweep, d.p_in_uw, d.steps)?,
        ));
    }
    report.annotate(
        "Dynamics sweeps hold the process phasematched at every pump power; \
         pump-induced spectral drift is reported separately through the tuning slopes.",
    );
    report.annotate(
        "The propagation model contains no saturation mechanism beyond pump depletion \
         and the configured losses; measured devices may roll off earlier at high pump power.",
    );
    Ok(overlap)
}

/// External/internal efficiency accounting from measured powers and the
/// configured transmission chains.
fn transmission_section(
    run: &PreparedRun,
    overlap: Option<&OverlapResult>,
    report: &mut RunReport,
) -> Result<()> {
    let tr = &run.config.transmission;
    let Some(measured) = &tr.measured else {
        return Ok(());
    };
    let proc = &run.config.process;
    let chain = |factors: &[crate::config::ChainFactor]| -> Result<TransmissionChain> {
        TransmissionChain::new(
            factors.iter().map(|f| (f.label.clone(), f.transmission)).collect(),
        )
    };
    let chain_in = chain(&tr.input_chain)?;
    let chain_out = chain(&tr.output_chain)?;
    report.set("input_chain_transmission", chain_in.product(), "1");
    report.set("output_chain_transmission", chain_out.product(), "1");
    let lambda_out = run.model.params.lambda_out_nm()?;
    let eta_ext = external_conversion_efficiency(
        measured.p_in_uw,
        measured.p_out_nw,
        proc.lambda_in_nm,
        lambda_out,
        &chain_in,
        &chain_out,
    )?;
    report.set("external_conversion_efficiency", eta_ext, "1");
    if let Some(ov) = overlap {
        let facet = fresnel_transmission(ov.n_eff_in)?;
        report.set("facet_transmission_input", facet, "1");
        let eta_int = internal_from_external(eta_ext, facet, tr.mode_matching)?;
        report.set("internal_conversion_efficiency", eta_int, "1");
        report.set("mode_matching", tr.mode_matching, "1");
    }
    if let Some(t_rel) = measured.relative_transmission_out {
        let alpha = loss_from_relative_transmission(t_rel, proc.length_mm)?;
        report.set("alpha_out_measured_db_per_cm", alpha, "dB/cm");
    }
    Ok(())
}
