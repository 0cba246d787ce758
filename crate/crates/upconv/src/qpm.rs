//! Quasi-phasematching: mismatch evaluation, poling-period and
//! phasematched-wavelength solving, and phasematching/tuning curves with
//! pump-heating folded in as an equivalent temperature offset.

use serde::{Deserialize, Serialize};

use crate::coupling::NonlinearCoefficient;
use crate::error::{Error, Result};
use crate::material::ThermoOpticModel;

/// Energy-conservation residual bound for a wavelength triple, in 1/nm.
pub const ENERGY_MATCH_TOL_PER_NM: f64 = 1e-12;
/// Convergence bound on |Δβ| for phasematched-wavelength roots, rad/m.
pub const ROOT_TOL_RAD_PER_M: f64 = 1e-3;
/// Half-width of the root-search window around the reference input
/// wavelength, nm.
pub const SEARCH_HALF_WINDOW_NM: f64 = 2.0;

/// One sum-frequency process: wavelength triple, device length, poling
/// period, and effective nonlinearity.  All fields are z-polarized
/// (type-0 interaction).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProcessSpec {
    pub lambda_in_nm: f64,
    pub lambda_pump_nm: f64,
    pub lambda_out_nm: f64,
    pub length_mm: f64,
    pub poling_period_um: f64,
    pub d_eff: NonlinearCoefficient,
}

impl ProcessSpec {
    /// Build a process from the input/pump pair; the output wavelength is
    /// slaved to energy conservation.
    pub fn new(
        lambda_in_nm: f64,
        lambda_pump_nm: f64,
        length_mm: f64,
        poling_period_um: f64,
        d_eff: NonlinearCoefficient,
    ) -> Result<Self> {
        if !(length_mm > 0.0) || !(poling_period_um > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "process needs positive length and poling period, got {length_mm} mm and {poling_period_um} µm"
            )));
        }
        if !(d_eff.effective_pm_per_v() > 0.0) {
            return Err(Error::InvalidArgument(
                "process needs a positive effective nonlinearity".into(),
            ));
        }
        let lambda_out_nm = energy_matched_output(lambda_in_nm, lambda_pump_nm)?;
        Ok(Self { lambda_in_nm, lambda_pump_nm, lambda_out_nm, length_mm, poling_period_um, d_eff })
    }

    /// Verify the stored triple still satisfies energy conservation.
    pub fn validate(&self) -> Result<()> {
        check_energy_match(self.lambda_in_nm, self.lambda_pump_nm, self.lambda_out_nm)
    }
}

/// Thermal tuning model: pump-power heating as an equivalent uniform
/// temperature offset, anchored at a reference condition where Δβ = 0.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TuningModel {
    /// Equivalent temperature rise per absorbed pump power, K/W.
    pub thermal_load_k_per_w: f64,
    pub t_ref_c: f64,
    pub p_ref_mw: f64,
    pub lambda_in_ref_nm: f64,
}

impl TuningModel {
    pub fn new(thermal_load_k_per_w: f64, t_ref_c: f64, p_ref_mw: f64, lambda_in_ref_nm: f64) -> Result<Self> {
        if !(thermal_load_k_per_w >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "thermal-load coefficient must be ≥ 0, got {thermal_load_k_per_w}"
            )));
        }
        Ok(Self { thermal_load_k_per_w, t_ref_c, p_ref_mw, lambda_in_ref_nm })
    }

    /// Equivalent uniform device temperature for pump power `p_mw`.
    pub fn effective_temperature(&self, t_c: f64, p_mw: f64) -> f64 {
        t_c + self.thermal_load_k_per_w * p_mw * 1e-3
    }
}

/// Output wavelength from energy conservation 1/λ_out = 1/λ_in + 1/λ_pump.
pub fn energy_matched_output(lambda_in_nm: f64, lambda_pump_nm: f64) -> Result<f64> {
    if !(lambda_in_nm > 0.0) || !(lambda_pump_nm > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "wavelengths must be positive, got {lambda_in_nm} and {lambda_pump_nm}"
        )));
    }
    Ok(1.0 / (1.0 / lambda_in_nm + 1.0 / lambda_pump_nm))
}

fn check_energy_match(lambda_in_nm: f64, lambda_pump_nm: f64, lambda_out_nm: f64) -> Result<()> {
    let residual = (1.0 / lambda_out_nm - 1.0 / lambda_in_nm - 1.0 / lambda_pump_nm).abs();
    if residual > ENERGY_MATCH_TOL_PER_NM {
        return Err(Error::ContractViolation(format!(
            "wavelength triple ({lambda_in_nm}, {lambda_pump_nm}, {lambda_out_nm}) nm violates energy conservation: residual {residual:.3e} 1/nm"
        )));
    }
    Ok(())
}

/// Phase mismatch Δβ = 2π(n_out/λ_out − n_in/λ_in − n_pump/λ_pump − 1/Λ)
/// in rad/m.  `poling_period_um` may be infinite to recover the bare
/// material mismatch.
pub fn delta_beta(
    n_eff_in: f64,
    n_eff_pump: f64,
    n_eff_out: f64,
    lambda_in_nm: f64,
    lambda_pump_nm: f64,
    lambda_out_nm: f64,
    poling_period_um: f64,
) -> Result<f64> {
    check_energy_match(lambda_in_nm, lambda_pump_nm, lambda_out_nm)?;
    if !(poling_period_um > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "poling period must be positive, got {poling_period_um} µm"
        )));
    }
    // Index-weighted reciprocal sum in 1/nm, grating term converted to match.
    let mismatch_per_nm = n_eff_out / lambda_out_nm
        - n_eff_in / lambda_in_nm
        - n_eff_pump / lambda_pump_nm
        - 1.0 / (poling_period_um * 1e3);
    Ok(2.0 * std::f64::consts::PI * mismatch_per_nm * 1e9)
}

/// First-order poling period Λ = 1/(n_out/λ_out − n_in/λ_in − n_p/λ_p)
/// in µm.
pub fn solve_poling_period(
    n_eff_in: f64,
    n_eff_pump: f64,
    n_eff_out: f64,
    lambda_in_nm: f64,
    lambda_pump_nm: f64,
    lambda_out_nm: f64,
) -> Result<f64> {
    let mismatch_per_um = (n_eff_out / lambda_out_nm
        - n_eff_in / lambda_in_nm
        - n_eff_pump / lambda_pump_nm)
        * 1e3;
    if !(mismatch_per_um > 0.0) {
        return Err(Error::NoQpmSolution { mismatch_per_um });
    }
    Ok(1.0 / mismatch_per_um)
}

/// Normalized sinc² grating response, 1 at perfect phasematching.
pub fn phasematching_response(delta_beta_rad_per_m: f64, length_mm: f64) -> Result<f64> {
    if !(length_mm > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "device length must be positive, got {length_mm} mm"
        )));
    }
    let x = 0.5 * delta_beta_rad_per_m * length_mm * 1e-3;
    if x == 0.0 {
        return Ok(1.0);
    }
    let s = x.sin() / x;
    Ok(s * s)
}

/// Half-maximum abscissa of sinc²: sin²(x)/x² = 1/2 at x ≈ 1.39156.
pub const SINC2_HALF_MAX_X: f64 = 1.391_557_377_4;

/// Closed-form spectral width (FWHM, nm) of the sinc² response when the
/// group-index difference between the output and input bands dominates
/// the detuning slope: FWHM = 2·x_half·λ_in²/(π·L·Δn_g).
pub fn predicted_curve_fwhm_nm(
    lambda_in_nm: f64,
    length_mm: f64,
    delta_group_index: f64,
) -> Result<f64> {
    if !(lambda_in_nm > 0.0) || !(length_mm > 0.0) || !(delta_group_index > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "predicted_curve_fwhm_nm needs positive λ, L, and Δn_g, got ({lambda_in_nm}, {length_mm}, {delta_group_index})"
        )));
    }
    Ok(2.0 * SINC2_HALF_MAX_X * lambda_in_nm * lambda_in_nm
        / (std::f64::consts::PI * length_mm * 1e6 * delta_group_index))
}

/// Effective interaction length inferred from a measured bandwidth via
/// FWHM ∝ 1/L.
pub fn effective_length_from_fwhm(measured_fwhm_nm: f64, predicted_fwhm_nm: f64, length_mm: f64) -> Result<f64> {
    if !(measured_fwhm_nm > 0.0) || !(predicted_fwhm_nm > 0.0) || !(length_mm > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "effective_length_from_fwhm needs positive widths and length, got ({measured_fwhm_nm}, {predicted_fwhm_nm}, {length_mm})"
        )));
    }
    Ok(length_mm * predicted_fwhm_nm / measured_fwhm_nm)
}

/// Cubic-spline table of n_eff(λ) for one band at a build temperature,
/// with the bulk thermo-optic model supplying the temperature shift.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeffTable {
    lambda_nm: Vec<f64>,
    n_eff: Vec<f64>,
    /// Natural-spline second derivatives at the knots.
    second_derivs: Vec<f64>,
    /// Temperature at which the knots were solved, °C.
    pub t_table_c: f64,
    /// Bulk thermo-optic model applied additively for T ≠ t_table_c.
    pub thermo: ThermoOpticModel,
}

impl NeffTable {
    /// Build from solved knots; requires ≥ 5 strictly increasing
    /// wavelengths.
    pub fn from_knots(
        lambda_nm: Vec<f64>,
        n_eff: Vec<f64>,
        t_table_c: f64,
        thermo: ThermoOpticModel,
    ) -> Result<Self> {
        if lambda_nm.len() < 5 {
            return Err(Error::InvalidArgument(format!(
                "n_eff table needs at least 5 knots, got {}",
                lambda_nm.len()
            )));
        }
        if lambda_nm.len() != n_eff.len() {
            return Err(Error::InvalidArgument(format!(
                "n_eff table knot mismatch: {} wavelengths vs {} values",
                lambda_nm.len(),
                n_eff.len()
            )));
        }
        if !lambda_nm.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(
                "n_eff table wavelengths must be strictly increasing".into(),
            ));
        }
        let second_derivs = natural_spline_second_derivs(&lambda_nm, &n_eff);
        Ok(Self { lambda_nm, n_eff, second_derivs, t_table_c, thermo })
    }

    pub fn lambda_range_nm(&self) -> (f64, f64) {
        (self.lambda_nm[0], *self.lambda_nm.last().unwrap())
    }

    /// Interpolated n_eff at the build temperature.
    pub fn eval(&self, lambda_nm: f64) -> Result<f64> {
        let (lo, hi) = self.lambda_range_nm();
        if !(lambda_nm >= lo && lambda_nm <= hi) {
            return Err(Error::Bracketing(format!(
                "wavelength {lambda_nm} nm outside the n_eff table range [{lo}, {hi}] nm"
            )));
        }
        // Locate the knot interval by binary search.
        let idx = match self.lambda_nm.binary_search_by(|v| v.total_cmp(&lambda_nm)) {
            Ok(i) => i.min(self.lambda_nm.len() - 2),
            Err(i) => i - 1,
        };
        let (x0, x1) = (self.lambda_nm[idx], self.lambda_nm[idx + 1]);
        let h = x1 - x0;
        let a = (x1 - lambda_nm) / h;
        let b = (lambda_nm - x0) / h;
        Ok(a * self.n_eff[idx]
            + b * self.n_eff[idx + 1]
            + ((a * a * a - a) * self.second_derivs[idx]
                + (b * b * b - b) * self.second_derivs[idx + 1])
                * h
                * h
                / 6.0)
    }

    /// Spline slope dn_eff/dλ at the build temperature, per nm.
    pub fn dn_dlambda_nm(&self, lambda_nm: f64) -> Result<f64> {
        let (lo, hi) = self.lambda_range_nm();
        if !(lambda_nm >= lo && lambda_nm <= hi) {
            return Err(Error::Bracketing(format!(
                "wavelength {lambda_nm} nm outside the n_eff table range [{lo}, {hi}] nm"
            )));
        }
        let idx = match self.lambda_nm.binary_search_by(|v| v.total_cmp(&lambda_nm)) {
            Ok(i) => i.min(self.lambda_nm.len() - 2),
            Err(i) => i - 1,
        };
        let (x0, x1) = (self.lambda_nm[idx], self.lambda_nm[idx + 1]);
        let h = x1 - x0;
        let a = (x1 - lambda_nm) / h;
        let b = (lambda_nm - x0) / h;
        Ok((self.n_eff[idx + 1] - self.n_eff[idx]) / h
            + h / 6.0
                * (-(3.0 * a * a - 1.0) * self.second_derivs[idx]
                    + (3.0 * b * b - 1.0) * self.second_derivs[idx + 1]))
    }

    /// Group index n_g = n_eff − λ·dn_eff/dλ at the build temperature.
    pub fn group_index(&self, lambda_nm: f64) -> Result<f64> {
        Ok(self.eval(lambda_nm)? - lambda_nm * self.dn_dlambda_nm(lambda_nm)?)
    }

    /// Interpolated n_eff shifted to temperature `t_c` by the bulk
    /// thermo-optic slope.
    pub fn eval_at(&self, lambda_nm: f64, t_c: f64) -> Result<f64> {
        let base = self.eval(lambda_nm)?;
        let dt = t_c - self.t_table_c;
        if dt == 0.0 {
            return Ok(base);
        }
        Ok(base + dt * self.thermo.dn_dt(lambda_nm)?)
    }
}

/// Second derivatives of the natural cubic spline through (x, y).
fn natural_spline_second_derivs(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    let mut u = vec![0.0; n];
    for i in 1..n - 1 {
        let sig = (x[i] - x[i - 1]) / (x[i + 1] - x[i - 1]);
        let p = sig * m[i - 1] + 2.0;
        m[i] = (sig - 1.0) / p;
        let slope_hi = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
        let slope_lo = (y[i] - y[i - 1]) / (x[i] - x[i - 1]);
        u[i] = (6.0 * (slope_hi - slope_lo) / (x[i + 1] - x[i - 1]) - sig * u[i - 1]) / p;
    }
    for i in (1..n - 1).rev() {
        m[i] = m[i] * m[i + 1] + u[i];
    }
    m[0] = 0.0;
    m[n - 1] = 0.0;
    m
}

/// Dispersion model of the full process: one table per band (the pump is
/// fixed-wavelength, so a scalar plus thermo model suffices).
#[derive(Debug, Clone)]
pub struct PhasematchingModel {
    pub spec: ProcessSpec,
    pub tuning: TuningModel,
    pub table_in: NeffTable,
    pub table_out: NeffTable,
    /// Pump n_eff at the table temperature.
    pub n_eff_pump: f64,
    pub thermo_pump: ThermoOpticModel,
}

impl PhasematchingModel {
    /// Δβ at input wavelength `lambda_in_nm` and device temperature `t_c`
    /// (already including any pump-heating offset), with λ_out slaved to
    /// energy conservation.
    pub fn delta_beta_at(&self, lambda_in_nm: f64, t_c: f64) -> Result<f64> {
        let lambda_out = energy_matched_output(lambda_in_nm, self.spec.lambda_pump_nm)?;
        let n_in = self.table_in.eval_at(lambda_in_nm, t_c)?;
        let n_out = self.table_out.eval_at(lambda_out, t_c)?;
        let n_pump = self.n_eff_pump
            + (t_c - self.table_in.t_table_c) * self.thermo_pump.dn_dt(self.spec.lambda_pump_nm)?;
        delta_beta(
            n_in,
            n_pump,
            n_out,
            lambda_in_nm,
            self.spec.lambda_pump_nm,
            lambda_out,
            self.spec.poling_period_um,
        )
    }

    /// Input wavelength of perfect phasematching at temperature `t_c` and
    /// pump power `p_mw`, searched within ±2 nm of the tuning reference.
    pub fn phasematched_wavelength(&self, t_c: f64, p_mw: f64) -> Result<f64> {
        let t_eff = self.tuning.effective_temperature(t_c, p_mw);
        let center = self.tuning.lambda_in_ref_nm;
        let (range_lo, range_hi) = self.table_in.lambda_range_nm();
        let lo = (center - SEARCH_HALF_WINDOW_NM).max(range_lo);
        let hi = (center + SEARCH_HALF_WINDOW_NM).min(range_hi);
        self.root_in_window(t_eff, lo, hi)
    }

    fn root_in_window(&self, t_eff: f64, lo_nm: f64, hi_nm: f64) -> Result<f64> {
        let mut a = lo_nm;
        let mut b = hi_nm;
        let mut fa = self.delta_beta_at(a, t_eff)?;
        let mut fb = self.delta_beta_at(b, t_eff)?;
        if fa == 0.0 {
            return Ok(a);
        }
        if fb == 0.0 {
            return Ok(b);
        }
        if fa.signum() == fb.signum() {
            return Err(Error::Bracketing(format!(
                "no phasematched wavelength in [{lo_nm:.3}, {hi_nm:.3}] nm: Δβ spans [{fa:.3e}, {fb:.3e}] rad/m without a sign change"
            )));
        }
        // Bisection to a narrow bracket, then secant polish.
        for _ in 0..80 {
            let mid = 0.5 * (a + b);
            let fm = self.delta_beta_at(mid, t_eff)?;
            if fm.abs() < ROOT_TOL_RAD_PER_M {
                return Ok(mid);
            }
            if fm.signum() == fa.signum() {
                a = mid;
                fa = fm;
            } else {
                b = mid;
                fb = fm;
            }
            if (b - a).abs() < 1e-9 {
                break;
            }
        }
        let mut x0 = a;
        let mut f0 = fa;
        let mut x1 = b;
        let mut f1 = fb;
        for _ in 0..12 {
            if (f1 - f0).abs() < f64::MIN_POSITIVE * 1e10 {
                break;
            }
            let x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
            let x2 = x2.clamp(lo_nm, hi_nm);
            let f2 = self.delta_beta_at(x2, t_eff)?;
            if f2.abs() < ROOT_TOL_RAD_PER_M {
                return Ok(x2);
            }
            x0 = x1;
            f0 = f1;
            x1 = x2;
            f1 = f2;
        }
        Err(Error::NumericalConvergence {
            context: "phasematched-wavelength root polish".into(),
            iterations: 92,
            residual: f1.abs(),
        })
    }

    /// Sample the sinc² response over `span_nm` around the phasematched
    /// wavelength and measure its width.
    pub fn phasematching_curve(
        &self,
        t_c: f64,
        p_mw: f64,
        span_nm: (f64, f64),
        samples: usize,
    ) -> Result<PhasematchingCurve> {
        let (lo, hi) = span_nm;
        if !(hi > lo) || samples < 16 {
            return Err(Error::InvalidArgument(format!(
                "curve span must be increasing and sampled with ≥ 16 points, got [{lo}, {hi}] with {samples}"
            )));
        }
        let t_eff = self.tuning.effective_temperature(t_c, p_mw);
        let peak = self.root_in_window(t_eff, lo, hi).map_err(|e| match e {
            Error::Bracketing(msg) => {
                Error::Bracketing(format!("curve span does not bracket the phasematched wavelength: {msg}"))
            }
            other => other,
        })?;
        let mut lambdas: Vec<f64> = (0..samples)
            .map(|i| lo + (hi - lo) * i as f64 / (samples - 1) as f64)
            .collect();
        // Insert the exact peak so the curve maximum is 1 by construction.
        let step = (hi - lo) / (samples - 1) as f64;
        if lambdas.iter().all(|&l| (l - peak).abs() > 1e-9 * step) {
            let pos = lambdas.partition_point(|&l| l < peak);
            lambdas.insert(pos, peak);
        }
        let length_mm = self.spec.length_mm;
        let mut points = Vec::with_capacity(lambdas.len());
        for &l in &lambdas {
            let db = self.delta_beta_at(l, t_eff)?;
            points.push((l, phasematching_response(db, length_mm)?));
        }
        let fwhm_nm = curve_fwhm(&points)?;
        Ok(PhasematchingCurve { points, fwhm_nm, peak_lambda_nm: peak, t_c, p_pump_mw: p_mw })
    }
}

/// Sampled phasematching response curve with its half-maximum width.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhasematchingCurve {
    /// (λ_in nm, normalized response) pairs, ascending in λ.
    pub points: Vec<(f64, f64)>,
    pub fwhm_nm: f64,
    pub peak_lambda_nm: f64,
    pub t_c: f64,
    pub p_pump_mw: f64,
}

/// Full width at half maximum of a sampled curve by linear interpolation
/// around its maximum point.
fn curve_fwhm(points: &[(f64, f64)]) -> Result<f64> {
    let peak_idx = points
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap();
    let half = 0.5 * points[peak_idx].1;
    let cross = |i0: usize, i1: usize| -> f64 {
        let (x0, y0) = points[i0];
        let (x1, y1) = points[i1];
        x0 + (half - y0) * (x1 - x0) / (y1 - y0)
    };
    let mut left = None;
    for i in (1..=peak_idx).rev() {
        if points[i - 1].1 < half && points[i].1 >= half {
            left = Some(cross(i - 1, i));
            break;
        }
    }
    let mut right = None;
    for i in peak_idx..points.len() - 1 {
        if points[i].1 >= half && points[i + 1].1 < half {
            right = Some(cross(i, i + 1));
            break;
        }
    }
    match (left, right) {
        (Some(l), Some(r)) => Ok(r - l),
        _ => Err(Error::Bracketing(
            "curve span too narrow: the half-maximum level is not crossed on both sides of the peak".into(),
        )),
    }
}
