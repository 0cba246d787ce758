//! Mode-overlap, normalized-efficiency, Gaussian-coupling, and
//! transmission-chain accounting for the three-wave mixing process.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modes::GuidedMode;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Vacuum permittivity, F/m.
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;

/// Second-order nonlinear coefficient split into the raw tensor value and
/// the first-order quasi-phasematching reduction, so the effective product
/// stays auditable.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NonlinearCoefficient {
    /// Tensor element d₃₃ in pm/V.
    pub tensor_pm_per_v: f64,
    /// Dimensionless reduction factor for the poling order (2/π for
    /// first-order square-wave poling).
    pub qpm_factor: f64,
}

impl Default for NonlinearCoefficient {
    fn default() -> Self {
        Self { tensor_pm_per_v: 16.65, qpm_factor: std::f64::consts::FRAC_2_PI }
    }
}

impl NonlinearCoefficient {
    /// Effective nonlinear coefficient in pm/V.
    pub fn effective_pm_per_v(&self) -> f64 {
        self.tensor_pm_per_v * self.qpm_factor
    }
}

/// Signed overlap integral ∫∫ E_in·E_pump·E_out dA of three normalized
/// modes sharing one grid and polarization, in 1/m.
pub fn overlap_integral(e_in: &GuidedMode, e_pump: &GuidedMode, e_out: &GuidedMode) -> Result<f64> {
    for other in [e_pump, e_out] {
        if !e_in.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch(
                "overlap integral requires all three modes on one grid".into(),
            ));
        }
        if e_in.axis != other.axis {
            return Err(Error::GridMismatch(format!(
                "overlap integral requires one polarization axis, got {} and {}",
                e_in.axis, other.axis
            )));
        }
    }
    let sum: f64 = e_in
        .field
        .iter()
        .zip(&e_pump.field)
        .zip(&e_out.field)
        .map(|((&a, &b), &c)| a * b * c)
        .sum();
    // Fields carry µm⁻¹ normalization, the cell area is µm²; the product
    // integral is 1/µm, converted to 1/m.
    Ok(sum * e_in.grid.cell_area() * 1e6)
}

/// Normalized conversion efficiency in 1/(W·m²):
/// η_nor = 8π²/(c·ε₀) · d_eff²·κ̃² / (n_in·n_pump·n_out·λ_in·λ_out).
pub fn normalized_efficiency(
    kappa_per_m: f64,
    d_eff_pm_per_v: f64,
    n_in: f64,
    n_pump: f64,
    n_out: f64,
    lambda_in_nm: f64,
    lambda_out_nm: f64,
) -> Result<f64> {
    for (name, v) in [
        ("kappa", kappa_per_m),
        ("d_eff", d_eff_pm_per_v),
        ("n_in", n_in),
        ("n_pump", n_pump),
        ("n_out", n_out),
        ("lambda_in", lambda_in_nm),
        ("lambda_out", lambda_out_nm),
    ] {
        if !(v >= 0.0) || (name.starts_with('n') || name.starts_with("lambda")) && v <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "normalized_efficiency: {name} must be positive, got {v}"
            )));
        }
    }
    let d = d_eff_pm_per_v * 1e-12;
    let prefactor = 8.0 * std::f64::consts::PI.powi(2) / (SPEED_OF_LIGHT * VACUUM_PERMITTIVITY);
    Ok(prefactor * d * d * kappa_per_m * kappa_per_m
        / (n_in * n_pump * n_out * lambda_in_nm * 1e-9 * lambda_out_nm * 1e-9))
}

/// Pump power for complete conversion of a lossless phasematched guide of
/// length `length_m`: P = (π/(2L))²/η_nor, in W.
pub fn complete_conversion_power(eta_nor_per_w_m2: f64, length_m: f64) -> Result<f64> {
    if eta_nor_per_w_m2 <= 0.0 || length_m <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "complete_conversion_power requires positive efficiency and length, got {eta_nor_per_w_m2} and {length_m}"
        )));
    }
    let half_wave = std::f64::consts::PI / (2.0 * length_m);
    Ok(half_wave * half_wave / eta_nor_per_w_m2)
}

/// Overlap summary for one mode triple.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OverlapResult {
    /// Overlap magnitude, 1/m.
    pub kappa_per_m: f64,
    /// Sign of the raw overlap integral (+1.0 or -1.0).
    pub kappa_sign: f64,
    /// Normalized efficiency, 1/(W·m²).
    pub eta_nor_per_w_m2: f64,
    pub n_eff_in: f64,
    pub n_eff_pump: f64,
    pub n_eff_out: f64,
    pub lambda_in_nm: f64,
    pub lambda_out_nm: f64,
}

impl OverlapResult {
    /// Evaluate overlap and normalized efficiency directly from a solved
    /// mode triple and a nonlinear coefficient.
    pub fn from_modes(
        e_in: &GuidedMode,
        e_pump: &GuidedMode,
        e_out: &GuidedMode,
        d_eff: &NonlinearCoefficient,
    ) -> Result<Self> {
        let raw = overlap_integral(e_in, e_pump, e_out)?;
        let kappa = raw.abs();
        let eta = normalized_efficiency(
            kappa,
            d_eff.effective_pm_per_v(),
            e_in.n_eff,
            e_pump.n_eff,
            e_out.n_eff,
            e_in.lambda_nm,
            e_out.lambda_nm,
        )?;
        Ok(Self {
            kappa_per_m: kappa,
            kappa_sign: if raw.is_sign_negative() { -1.0 } else { 1.0 },
            eta_nor_per_w_m2: eta,
            n_eff_in: e_in.n_eff,
            n_eff_pump: e_pump.n_eff,
            n_eff_out: e_out.n_eff,
            lambda_in_nm: e_in.lambda_nm,
            lambda_out_nm: e_out.lambda_nm,
        })
    }

    /// Normalized efficiency in the conventional 1/(W·cm²) report unit.
    pub fn eta_nor_per_w_cm2(&self) -> f64 {
        self.eta_nor_per_w_m2 * 1e-4
    }
}

/// Coupling efficiency |⟨E, G⟩|² of a normalized mode with a normalized
/// elliptical Gaussian of the given 1/e field waists and center.
pub fn gaussian_coupling(
    mode: &GuidedMode,
    waist_x_um: f64,
    waist_y_um: f64,
    center: (f64, f64),
) -> Result<f64> {
    if !(waist_x_um > 0.0) || !(waist_y_um > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gaussian_coupling waists must be positive, got ({waist_x_um}, {waist_y_um})"
        )));
    }
    let g = &mode.grid;
    let mut dot = 0.0;
    let mut norm = 0.0;
    for j in 0..g.ny {
        let dy = (g.y(j) - center.1) / waist_y_um;
        let ey = (-dy * dy).exp();
        for i in 0..g.nx {
            let dx = (g.x(i) - center.0) / waist_x_um;
            let gv = (-dx * dx).exp() * ey;
            dot += mode.field[g.idx(i, j)] * gv;
            norm += gv * gv;
        }
    }
    if norm == 0.0 {
        return Ok(0.0);
    }
    // The common cell-area factor cancels between dot² and norm except for
    // the mode's own unit normalization.
    Ok(dot * dot / norm * g.cell_area())
}

/// Best Gaussian source match for a mode.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GaussianFit {
    pub efficiency: f64,
    pub waist_x_um: f64,
    pub waist_y_um: f64,
    pub center_x_um: f64,
    pub center_y_um: f64,
}

/// Maximize the Gaussian coupling of `mode` over waists and center with a
/// deterministic Nelder–Mead search started from the field moments.
pub fn optimal_gaussian_coupling(mode: &GuidedMode) -> Result<GaussianFit> {
    let g = &mode.grid;
    let area = g.cell_area();
    // Intensity moments for the start point.
    let (mut cx, mut cy) = (0.0, 0.0);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let w = mode.field[g.idx(i, j)].powi(2) * area;
            cx += g.x(i) * w;
            cy += g.y(j) * w;
        }
    }
    let (mut sx2, mut sy2) = (0.0, 0.0);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let w = mode.field[g.idx(i, j)].powi(2) * area;
            sx2 += (g.x(i) - cx).powi(2) * w;
            sy2 += (g.y(j) - cy).powi(2) * w;
        }
    }
    // For a Gaussian field of waist w, the intensity variance is w²/4.
    let start = [
        (2.0 * sx2.sqrt()).max(g.hx()).ln(),
        (2.0 * sy2.sqrt()).max(g.hy()).ln(),
        cx,
        cy,
    ];
    let objective = |p: &[f64; 4]| -> f64 {
        gaussian_coupling(mode, p[0].exp(), p[1].exp(), (p[2], p[3])).unwrap_or(0.0)
    };
    let best = nelder_mead_max(objective, start, [0.12, 0.12, 0.25 * g.hx(), 0.25 * g.hy()]);
    Ok(GaussianFit {
        efficiency: objective(&best),
        waist_x_um: best[0].exp(),
        waist_y_um: best[1].exp(),
        center_x_um: best[2],
        center_y_um: best[3],
    })
}

/// Deterministic Nelder–Mead maximizer over 4 parameters.
fn nelder_mead_max(f: impl Fn(&[f64; 4]) -> f64, start: [f64; 4], step: [f64; 4]) -> [f64; 4] {
    const ITERS: usize = 400;
    let mut simplex: Vec<[f64; 4]> = vec![start];
    for d in 0..4 {
        let mut v = start;
        v[d] += step[d];
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(&f).collect();
    for _ in 0..ITERS {
        // Order best → worst (maximization: descending value, stable).
        let mut order: Vec<usize> = (0..simplex.len()).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        let simplex_sorted: Vec<[f64; 4]> = order.iter().map(|&i| simplex[i]).collect();
        let values_sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        simplex = simplex_sorted;
        values = values_sorted;
        if values[0] - values[4] < 1e-14 {
            break;
        }
        let mut centroid = [0.0; 4];
        for v in simplex.iter().take(4) {
            for d in 0..4 {
                centroid[d] += v[d] / 4.0;
            }
        }
        let expand_point = |t: f64| -> [f64; 4] {
            let mut p = [0.0; 4];
            for d in 0..4 {
                p[d] = centroid[d] + t * (centroid[d] - simplex[4][d]);
            }
            p
        };
        let reflected = expand_point(1.0);
        let fr = f(&reflected);
        if fr > values[0] {
            let expanded = expand_point(2.0);
            let fe = f(&expanded);
            if fe > fr {
                simplex[4] = expanded;
                values[4] = fe;
            } else {
                simplex[4] = reflected;
                values[4] = fr;
            }
        } else if fr > values[3] {
            simplex[4] = reflected;
            values[4] = fr;
        } else {
            let contracted = expand_point(-0.5);
            let fc = f(&contracted);
            if fc > values[4] {
                simplex[4] = contracted;
                values[4] = fc;
            } else {
                // Shrink toward the best vertex.
                for i in 1..5 {
                    for d in 0..4 {
                        simplex[i][d] = simplex[0][d] + 0.5 * (simplex[i][d] - simplex[0][d]);
                    }
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..5 {
        if values[i] > values[best] {
            best = i;
        }
    }
    simplex[best]
}

/// Ordered list of named transmission factors applied to one beam path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransmissionChain {
    pub factors: Vec<(String, f64)>,
}

impl TransmissionChain {
    pub fn new(factors: Vec<(String, f64)>) -> Result<Self> {
        for (name, value) in &factors {
            if !(*value > 0.0 && *value <= 1.0) {
                return Err(Error::Configuration(format!(
                    "transmission factor '{name}' must lie in (0, 1], got {value}"
                )));
            }
        }
        Ok(Self { factors })
    }

    pub fn identity() -> Self {
        Self { factors: Vec::new() }
    }

    pub fn product(&self) -> f64 {
        self.factors.iter().map(|(_, v)| v).product()
    }
}

/// External photon-number conversion efficiency from measured powers.
///
/// The input chain describes losses between the input-power measurement and
/// the waveguide (the source power is multiplied down), the output chain the
/// losses between the waveguide and the output detector (the detected power
/// is divided back up):
/// η = (λ_out·P_out/Π_out) / (λ_in·P_in·Π_in).
pub fn external_conversion_efficiency(
    p_in_uw: f64,
    p_out_nw: f64,
    lambda_in_nm: f64,
    lambda_out_nm: f64,
    chain_in: &TransmissionChain,
    chain_out: &TransmissionChain,
) -> Result<f64> {
    if !(p_in_uw > 0.0) || !(p_out_nw >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "external_conversion_efficiency needs P_in > 0 and P_out ≥ 0, got {p_in_uw} µW and {p_out_nw} nW"
        )));
    }
    let p_in_w = p_in_uw * 1e-6 * chain_in.product();
    let p_out_w = p_out_nw * 1e-9 / chain_out.product();
    Ok((p_out_w * lambda_out_nm) / (p_in_w * lambda_in_nm))
}

/// Internal conversion efficiency from the external one by removing the
/// input facet transmission and the source/mode matching factor.
pub fn internal_from_external(eta_ext: f64, facet_transmission: f64, mode_matching: f64) -> Result<f64> {
    for (name, v) in [("facet_transmission", facet_transmission), ("mode_matching", mode_matching)] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "internal_from_external: {name} must lie in (0, 1], got {v}"
            )));
        }
    }
    Ok(eta_ext / (facet_transmission * mode_matching))
}

/// Normal-incidence Fresnel power transmission of a facet with effective
/// index `n_eff` against air.
pub fn fresnel_transmission(n_eff: f64) -> Result<f64> {
    if !(n_eff >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "fresnel_transmission expects n_eff ≥ 1, got {n_eff}"
        )));
    }
    let r = (n_eff - 1.0) / (n_eff + 1.0);
    Ok(1.0 - r * r)
}

/// Pump depletion efficiency 1 − P_on/P_off from transmitted pump powers.
pub fn depletion_efficiency(p_transmitted_on: f64, p_transmitted_off: f64) -> Result<f64> {
    if !(p_transmitted_off > 0.0) || !(p_transmitted_on >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "depletion_efficiency needs P_off > 0 and P_on ≥ 0, got {p_transmitted_on} and {p_transmitted_off}"
        )));
    }
    if p_transmitted_on > p_transmitted_off {
        return Err(Error::InconsistentMeasurement(format!(
            "transmitted pump with conversion on ({p_transmitted_on}) exceeds the pump-off reference ({p_transmitted_off})"
        )));
    }
    Ok(1.0 - p_transmitted_on / p_transmitted_off)
}

/// Propagation loss in dB/cm from a relative-transmission measurement over
/// a guide of `length_mm`.
pub fn loss_from_relative_transmission(t_rel: f64, length_mm: f64) -> Result<f64> {
    if !(t_rel > 0.0 && t_rel <= 1.0) || !(length_mm > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "loss_from_relative_transmission needs T ∈ (0, 1] and L > 0, got {t_rel} and {length_mm}"
        )));
    }
    Ok(-10.0 * t_rel.log10() / (length_mm / 10.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::material::Axis;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    /// Build a normalized pseudo-mode holding an analytic field sampled on
    /// the grid, for quadrature oracles.
    fn analytic_mode(grid: &Grid, lambda_nm: f64, f: impl Fn(f64, f64) -> f64) -> GuidedMode {
        let mut field = vec![0.0; grid.len()];
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                field[grid.idx(i, j)] = f(grid.x(i), grid.y(j));
            }
        }
        let norm: f64 = field.iter().map(|v| v * v).sum::<f64>() * grid.cell_area();
        let scale = 1.0 / norm.sqrt();
        for v in &mut field {
            *v *= scale;
        }
        GuidedMode {
            lambda_nm,
            axis: Axis::Z,
            n_eff: 1.9,
            m_x: 0,
            m_y: 0,
            field,
            grid: grid.clone(),
            residual_rel: 0.0,
            boundary_leakage: 0.0,
        }
    }

    fn wide_grid() -> Grid {
        Grid::with_spacing(-8.0, 8.0, -8.0, 8.0, 0.05).unwrap()
    }

    #[test]
    fn triple_gaussian_overlap_matches_closed_form() {
        // For normalized Gaussians E_k = (2/π)^(1/2)·(w_x w_y)^(-1/2)
        // ·exp(-x²/w_x² - y²/w_y²) (discrete L² norm 1), the triple-product
        // integral is separable; per axis ∫g³ dx over normalized 1-D
        // factors gives (2/(3π))^(1/2)·(2/w)^(1/2)·…; combining axes:
        // κ̃ = (2√2)/(3√π)·(w_x·w_y)^(-1/2).
        let grid = wide_grid();
        for (wx, wy) in [(1.0, 1.0), (1.5, 0.8), (2.2, 1.3)] {
            let mode = analytic_mode(&grid, 1000.0, |x, y| {
                (-x * x / (wx * wx) - y * y / (wy * wy)).exp()
            });
            let kappa = overlap_integral(&mode, &mode, &mode).unwrap();
            let oracle_per_um =
                2.0 * 2.0f64.sqrt() / (3.0 * std::f64::consts::PI.sqrt()) / (wx * wy).sqrt();
            assert_relative_eq!(kappa, oracle_per_um * 1e6, max_relative = 1e-6);
        }
    }

    #[test]
    fn odd_mode_overlap_vanishes() {
        let grid = wide_grid();
        let even = analytic_mode(&grid, 1000.0, |x, y| (-x * x - y * y).exp());
        let odd = analytic_mode(&grid, 1000.0, |x, y| x * (-x * x - y * y).exp());
        let kappa = overlap_integral(&odd, &even, &even).unwrap();
        assert!(kappa.abs() < 1e-6, "parity-forbidden overlap {kappa}");
    }

    #[test]
    fn overlap_requires_common_grid() {
        let a = analytic_mode(&wide_grid(), 1000.0, |x, y| (-x * x - y * y).exp());
        let other = Grid::with_spacing(-8.0, 8.0, -8.0, 8.0, 0.1).unwrap();
        let b = analytic_mode(&other, 1000.0, |x, y| (-x * x - y * y).exp());
        assert!(matches!(
            overlap_integral(&a, &a, &b),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn overlap_scaling_law() {
        // Dilating all three fields by s rescales κ̃ by 1/s.
        let grid = wide_grid();
        let narrow = analytic_mode(&grid, 1000.0, |x, y| (-x * x - y * y).exp());
        let s = 2.0;
        let dilated = analytic_mode(&grid, 1000.0, |x, y| {
            (-(x / s) * (x / s) - (y / s) * (y / s)).exp()
        });
        let k1 = overlap_integral(&narrow, &narrow, &narrow).unwrap();
        let k2 = overlap_integral(&dilated, &dilated, &dilated).unwrap();
        assert_relative_eq!(k1 / k2, s, max_relative = 1e-6);
    }

    #[test]
    fn overlap_stable_under_refinement() {
        let coarse = Grid::with_spacing(-6.0, 6.0, -6.0, 6.0, 0.1).unwrap();
        let fine = coarse.refined();
        let make = |g: &Grid| {
            analytic_mode(g, 1000.0, |x, y| (-x * x / 1.1 - y * y / 0.7).exp())
        };
        let kc = overlap_integral(&make(&coarse), &make(&coarse), &make(&coarse)).unwrap();
        let kf = overlap_integral(&make(&fine), &make(&fine), &make(&fine)).unwrap();
        assert!(
            ((kc - kf) / kf).abs() < 0.01,
            "refinement moved overlap by more than 1%: {kc} vs {kf}"
        );
    }

    #[test]
    fn normalized_efficiency_reference_point() {
        // Eq.-(4) evaluation with the reference overlap and coefficient:
        // κ̃ = 1.35e5 1/m, d_eff = 16.65·2/π pm/V, bulk-like indices.
        let d = NonlinearCoefficient::default();
        assert_relative_eq!(d.effective_pm_per_v(), 10.599_719, max_relative = 1e-6);
        let eta = normalized_efficiency(1.35e5, d.effective_pm_per_v(), 1.8217, 1.8946, 2.0009, 1311.0, 369.5)
            .unwrap();
        // 1/(W·cm²) convention: ≈ 1.82, quoted loosely as 1.83.
        assert_abs_diff_eq!(eta * 1e-4, 1.8208, epsilon = 0.01);
        // Cross-check through the complete-conversion power of a 9.6 mm guide.
        let p_c = complete_conversion_power(eta, 9.6e-3).unwrap();
        assert_abs_diff_eq!(p_c, 1.470, epsilon = 0.015);
        assert!((p_c - 1.460).abs() / 1.460 < 0.05);
    }

    #[test]
    fn normalized_efficiency_trivial_scalings() {
        let eta0 = normalized_efficiency(0.0, 10.6, 1.8, 1.9, 2.0, 1311.0, 369.5).unwrap();
        assert_eq!(eta0, 0.0);
        let e1 = normalized_efficiency(1e5, 5.0, 1.8, 1.9, 2.0, 1311.0, 369.5).unwrap();
        let e2 = normalized_efficiency(1e5, 10.0, 1.8, 1.9, 2.0, 1311.0, 369.5).unwrap();
        assert_relative_eq!(e2 / e1, 4.0, max_relative = 1e-12);
        // Strict monotonicity directions.
        let base = normalized_efficiency(1e5, 5.0, 1.8, 1.9, 2.0, 1311.0, 369.5).unwrap();
        assert!(normalized_efficiency(1.1e5, 5.0, 1.8, 1.9, 2.0, 1311.0, 369.5).unwrap() > base);
        assert!(normalized_efficiency(1e5, 5.0, 1.9, 1.9, 2.0, 1311.0, 369.5).unwrap() < base);
        assert!(normalized_efficiency(1e5, 5.0, 1.8, 1.9, 2.0, 1400.0, 369.5).unwrap() < base);
    }

    #[test]
    fn gaussian_coupling_self_match_is_unity() {
        let grid = wide_grid();
        let (wx, wy, cx, cy) = (1.7, 0.9, 0.3, -0.4);
        let mode = analytic_mode(&grid, 1000.0, |x, y| {
            (-(x - cx).powi(2) / (wx * wx) - (y - cy).powi(2) / (wy * wy)).exp()
        });
        let eta = gaussian_coupling(&mode, wx, wy, (cx, cy)).unwrap();
        assert_relative_eq!(eta, 1.0, max_relative = 1e-12);
        // A far-displaced Gaussian captures essentially nothing.
        let far = gaussian_coupling(&mode, wx, wy, (cx + 7.0, cy)).unwrap();
        assert!(far < 1e-3, "distant source coupling {far}");
    }

    #[test]
    fn optimizer_recovers_gaussian_parameters() {
        let grid = wide_grid();
        let (wx, wy, cx, cy) = (1.4, 0.8, 0.25, -0.55);
        let mode = analytic_mode(&grid, 1000.0, |x, y| {
            (-(x - cx).powi(2) / (wx * wx) - (y - cy).powi(2) / (wy * wy)).exp()
        });
        let fit = optimal_gaussian_coupling(&mode).unwrap();
        assert!(fit.efficiency > 1.0 - 1e-9, "efficiency {}", fit.efficiency);
        assert_abs_diff_eq!(fit.waist_x_um, wx, epsilon = 1e-3);
        assert_abs_diff_eq!(fit.waist_y_um, wy, epsilon = 1e-3);
        assert_abs_diff_eq!(fit.center_x_um, cx, epsilon = 1e-3);
        assert_abs_diff_eq!(fit.center_y_um, cy, epsilon = 1e-3);
    }

    #[test]
    fn optimizer_is_deterministic() {
        let grid = Grid::with_spacing(-4.0, 4.0, -4.0, 4.0, 0.1).unwrap();
        let mode = analytic_mode(&grid, 1000.0, |x, y| {
            ((-x * x / 2.1 - y * y / 0.6).exp()) * (1.0 + 0.2 * (y + 0.3).tanh())
        });
        let a = optimal_gaussian_coupling(&mode).unwrap();
        let b = optimal_gaussian_coupling(&mode).unwrap();
        assert_eq!(a.efficiency.to_bits(), b.efficiency.to_bits());
        assert_eq!(a.waist_x_um.to_bits(), b.waist_x_um.to_bits());
        assert_eq!(a.center_y_um.to_bits(), b.center_y_um.to_bits());
    }

    #[test]
    fn external_efficiency_reference_chain() {
        let chain_in = TransmissionChain::new(vec![("incoupling objective".into(), 0.696)]).unwrap();
        let chain_out = TransmissionChain::new(vec![
            ("outcoupling".into(), 0.517),
            ("filters".into(), 0.627),
        ])
        .unwrap();
        let eta =
            external_conversion_efficiency(22.1, 980.0, 1311.0, 369.5, &chain_in, &chain_out)
                .unwrap();
        // Hand evaluation: (980e-9/0.324159·369.5)/(22.1e-6·0.696·1311).
        assert_abs_diff_eq!(eta, 0.055_394, epsilon = 1e-5);
        assert!((eta - 0.055).abs() < 0.002);
    }

    #[test]
    fn external_efficiency_trivial_collapses() {
        let id = TransmissionChain::identity();
        assert_eq!(
            external_conversion_efficiency(10.0, 0.0, 1311.0, 369.5, &id, &id).unwrap(),
            0.0
        );
        // Identity chains and equal wavelengths reduce to the power ratio.
        let eta = external_conversion_efficiency(10.0, 5000.0, 800.0, 800.0, &id, &id).unwrap();
        assert_relative_eq!(eta, 5e-6 / 10e-6, max_relative = 1e-12);
    }

    #[test]
    fn external_efficiency_scale_invariance() {
        let chain_in = TransmissionChain::new(vec![("a".into(), 0.9)]).unwrap();
        let chain_out = TransmissionChain::new(vec![("b".into(), 0.5)]).unwrap();
        let e1 =
            external_conversion_efficiency(22.1, 980.0, 1311.0, 369.5, &chain_in, &chain_out)
                .unwrap();
        let e2 =
            external_conversion_efficiency(44.2, 1960.0, 1311.0, 369.5, &chain_in, &chain_out)
                .unwrap();
        assert_relative_eq!(e1, e2, max_relative = 1e-12);
    }

    #[test]
    fn chain_rejects_invalid_factor() {
        assert!(TransmissionChain::new(vec![("bad".into(), 0.0)]).is_err());
        assert!(TransmissionChain::new(vec![("bad".into(), 1.2)]).is_err());
        assert!(TransmissionChain::new(vec![("ok".into(), 1.0)]).is_ok());
    }

    #[test]
    fn internal_efficiency_reference_window() {
        // Facet transmission from the modeled input effective index.
        let facet = fresnel_transmission(1.8228).unwrap();
        assert_abs_diff_eq!(facet, 0.9150, epsilon = 5e-4);
        let eta_int = internal_from_external(0.055, facet, 0.507).unwrap();
        assert!((0.09..=0.12).contains(&eta_int), "η_int = {eta_int}");
        assert!((eta_int - 0.105).abs() < 0.015);
        // Trivial collapses.
        assert_eq!(internal_from_external(0.055, 1.0, 1.0).unwrap(), 0.055);
        assert_relative_eq!(
            internal_from_external(0.055, 1.0, 0.5).unwrap(),
            0.11,
            max_relative = 1e-12
        );
    }

    #[test]
    fn depletion_edge_cases() {
        assert_eq!(depletion_efficiency(5.0, 5.0).unwrap(), 0.0);
        assert_eq!(depletion_efficiency(0.0, 5.0).unwrap(), 1.0);
        assert_relative_eq!(depletion_efficiency(3.0, 5.0).unwrap(), 0.4, max_relative = 1e-12);
        assert!(matches!(
            depletion_efficiency(6.0, 5.0),
            Err(Error::InconsistentMeasurement(_))
        ));
    }

    #[test]
    fn loss_conversion_reference_points() {
        assert_eq!(loss_from_relative_transmission(1.0, 9.6).unwrap(), 0.0);
        assert_relative_eq!(
            loss_from_relative_transmission(0.1, 10.0).unwrap(),
            10.0,
            max_relative = 1e-12
        );
        let alpha = loss_from_relative_transmission(0.336, 9.6).unwrap();
        assert_abs_diff_eq!(alpha, 4.9340, epsilon = 5e-4);
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

        #[test]
        fn prop_triple_gaussian_product_invariant(
            wx in 0.6f64..2.0,
            wy in 0.6f64..2.0,
        ) {
            // κ̃·√(w_x·w_y) is the waist-free triple-Gaussian constant.
            let grid = Grid::with_spacing(-8.0, 8.0, -8.0, 8.0, 0.08).unwrap();
            let mode = analytic_mode(&grid, 1000.0, |x, y| {
                (-x * x / (wx * wx) - y * y / (wy * wy)).exp()
            });
            let kappa_um = overlap_integral(&mode, &mode, &mode).unwrap() * 1e-6;
            let constant = kappa_um * (wx * wy).sqrt();
            let oracle = 2.0 * 2.0f64.sqrt() / (3.0 * std::f64::consts::PI.sqrt());
            prop_assert!((constant - oracle).abs() < 1e-4,
                "waist-scaled overlap {constant} vs {oracle}");
        }

        #[test]
        fn prop_depletion_in_unit_interval(
            p_off in 0.1f64..100.0,
            frac in 0.0f64..1.0,
        ) {
            let eta = depletion_efficiency(frac * p_off, p_off).unwrap();
            prop_assert!((0.0..=1.0).contains(&eta));
        }

        #[test]
        fn prop_gaussian_coupling_bounded(
            wx in 0.3f64..3.0,
            wy in 0.3f64..3.0,
            cx in -2.0f64..2.0,
            cy in -2.0f64..2.0,
        ) {
            let grid = Grid::with_spacing(-6.0, 6.0, -6.0, 6.0, 0.1).unwrap();
            let mode = analytic_mode(&grid, 1000.0, |x, y| {
                (-x * x / 1.3 - y * y / 0.9).exp()
            });
            let eta = gaussian_coupling(&mode, wx, wy, (cx, cy)).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&eta), "coupling {eta}");
        }
    }
}
