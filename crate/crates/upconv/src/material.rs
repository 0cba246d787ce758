//! Bulk dispersion, thermo-optic correction, and the ion-exchange index
//! profile of the waveguide, plus sampled 2-D index maps.
//!
//! All public operations take vacuum wavelengths in nanometers; the
//! coefficient data files use micrometers internally (the conventional
//! unit for Sellmeier fits).

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Refractive index of the cover medium above the surface (air).
pub const COVER_INDEX: f64 = 1.0;

/// Nanometers per micrometer.
const NM_PER_UM: f64 = 1000.0;

/// Polarization axis of the crystal frame (z = optical axis).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Z,
    Y,
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Axis::Z => write!(f, "z"),
            Axis::Y => write!(f, "y"),
        }
    }
}

/// Two-pole Sellmeier model `n²(λ) = A + B/(λ² − C) + D/(λ² − E)`,
/// λ in micrometers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SellmeierModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    /// Wavelength validity interval `[λ_min, λ_max]` in micrometers.
    pub validity_um: [f64; 2],
}

impl SellmeierModel {
    fn check_range(&self, name: &str, lambda_um: f64) -> Result<()> {
        check_range(name, lambda_um, self.validity_um)
    }

    /// Refractive index at `lambda_nm` (no thermo-optic correction).
    pub fn index(&self, lambda_nm: f64) -> Result<f64> {
        let l = lambda_nm / NM_PER_UM;
        self.check_range("sellmeier", l)?;
        let l2 = l * l;
        let n2 = self.a + self.b / (l2 - self.c) + self.d / (l2 - self.e);
        if n2 <= 1.0 {
            return Err(Error::ContractViolation(format!(
                "sellmeier model produced non-physical n² = {n2} at λ = {lambda_nm} nm"
            )));
        }
        Ok(n2.sqrt())
    }

    /// Analytic first derivative dn/dλ in µm⁻¹ at `lambda_nm`.
    pub fn dn_dlambda_um(&self, lambda_nm: f64) -> Result<f64> {
        let l = lambda_nm / NM_PER_UM;
        self.check_range("sellmeier", l)?;
        let l2 = l * l;
        let n = self.index(lambda_nm)?;
        let dn2 = -2.0 * l * (self.b / ((l2 - self.c) * (l2 - self.c)) + self.d / ((l2 - self.e) * (l2 - self.e)));
        Ok(dn2 / (2.0 * n))
    }

    /// Group index `n_g = n − λ·dn/dλ` at `lambda_nm`.
    pub fn group_index(&self, lambda_nm: f64) -> Result<f64> {
        let l = lambda_nm / NM_PER_UM;
        Ok(self.index(lambda_nm)? - l * self.dn_dlambda_um(lambda_nm)?)
    }
}

/// Thermo-optic dispersion `dn/dT(λ) = scale·Σ_k c_k λ^{−k}`, λ in
/// micrometers, result in K⁻¹.  The bulk index model is linear in
/// temperature: `n(λ, T) = n(λ, T₀) + (T − T₀)·dn/dT(λ)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThermoOpticModel {
    /// Coefficients `[c₀, c₁, c₂, c₃]` of ascending powers of 1/λ.
    pub inv_lambda_um_coeffs: [f64; 4],
    /// Overall scale (K⁻¹), e.g. 1e-5 for coefficients quoted in 10⁻⁵/K.
    pub scale_per_k: f64,
    /// Reference temperature (°C) at which the pure Sellmeier value holds.
    pub t0_c: f64,
    pub validity_um: [f64; 2],
}

impl ThermoOpticModel {
    /// dn/dT in K⁻¹ at `lambda_nm`.
    pub fn dn_dt(&self, lambda_nm: f64) -> Result<f64> {
        let l = lambda_um_checked("thermo-optic", lambda_nm, self.validity_um)?;
        let inv = 1.0 / l;
        let [c0, c1, c2, c3] = self.inv_lambda_um_coeffs;
        Ok(self.scale_per_k * (c0 + inv * (c1 + inv * (c2 + inv * c3))))
    }
}

/// Dispersion of the surface index increase Δn₀(λ) of the exchanged layer:
/// `Δn₀(λ) = a + b/(λ² − c) + d·λ²/(λ² − e)`, λ in micrometers.
///
/// The first pole sits just below the validity range (electronic resonance
/// of the exchanged layer); the second matches the bulk infrared pole so
/// that the increment stays a small perturbation of the host dispersion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceIncreaseModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub validity_um: [f64; 2],
    #[serde(default)]
    pub provenance: String,
}

impl SurfaceIncreaseModel {
    /// Surface index increase at `lambda_nm` (dimensionless).
    pub fn delta_n0(&self, lambda_nm: f64) -> Result<f64> {
        let l = lambda_um_checked("surface-increase", lambda_nm, self.validity_um)?;
        let l2 = l * l;
        Ok(self.a + self.b / (l2 - self.c) + self.d * l2 / (l2 - self.e))
    }

    /// Analytic derivative dΔn₀/dλ in µm⁻¹ at `lambda_nm`.
    pub fn ddelta_n0_dlambda_um(&self, lambda_nm: f64) -> Result<f64> {
        let l = lambda_um_checked("surface-increase", lambda_nm, self.validity_um)?;
        let l2 = l * l;
        let p1 = -2.0 * l * self.b / ((l2 - self.c) * (l2 - self.c));
        let p2 = -2.0 * l * self.d * self.e / ((l2 - self.e) * (l2 - self.e));
        Ok(p1 + p2)
    }
}

/// One named bulk material entry: Sellmeier plus thermo-optic model for a
/// single polarization axis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaterialEntry {
    pub axis: Axis,
    pub sellmeier: SellmeierModel,
    pub thermo_optic: ThermoOpticModel,
    pub provenance: String,
}

impl MaterialEntry {
    /// Bulk refractive index at wavelength `lambda_nm` and temperature
    /// `t_c` (°C): Sellmeier value plus the linear thermo-optic correction.
    pub fn bulk_index(&self, lambda_nm: f64, t_c: f64) -> Result<f64> {
        let n0 = self.sellmeier.index(lambda_nm)?;
        let dt = t_c - self.thermo_optic.t0_c;
        if dt == 0.0 {
            return Ok(n0);
        }
        Ok(n0 + dt * self.thermo_optic.dn_dt(lambda_nm)?)
    }
}

/// Versioned collection of material entries and exchange-layer models,
/// loaded from the JSON data file shipped with the crate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaterialDb {
    pub schema_version: String,
    pub materials: BTreeMap<String, MaterialEntry>,
    pub exchange_models: BTreeMap<String, SurfaceIncreaseModel>,
}

/// Identifier reported for the compiled-in data set.
pub const BUILTIN_MATERIAL_ID: &str = "builtin:ktp";

static BUILTIN: OnceLock<MaterialDb> = OnceLock::new();

impl MaterialDb {
    /// Parse and validate a data file from a JSON string.
    pub fn from_json(text: &str) -> Result<Self> {
        let db: MaterialDb = serde_json::from_str(text)?;
        db.validate()?;
        Ok(db)
    }

    /// Load and validate a data file from disk.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.display()),
            ))
        })?;
        Self::from_json(&text)
    }

    /// The compiled-in data set (KTP z/y axes plus the Rb exchange layer).
    pub fn builtin() -> &'static MaterialDb {
        BUILTIN.get_or_init(|| {
            MaterialDb::from_json(include_str!("../data/ktp.json"))
                .expect("compiled-in material data must validate")
        })
    }

    pub fn material(&self, name: &str) -> Result<&MaterialEntry> {
        self.materials.get(name).ok_or_else(|| {
            Error::Configuration(format!(
                "unknown material '{name}'; available: {:?}",
                self.materials.keys().collect::<Vec<_>>()
            ))
        })
    }

    pub fn exchange_model(&self, name: &str) -> Result<&SurfaceIncreaseModel> {
        self.exchange_models.get(name).ok_or_else(|| {
            Error::Configuration(format!(
                "unknown exchange model '{name}'; available: {:?}",
                self.exchange_models.keys().collect::<Vec<_>>()
            ))
        })
    }

    /// Structural sanity of every entry: positive validity spans, poles
    /// outside the validity interval, physical index values, normal
    /// dispersion, and bounded thermo-optic magnitude.
    fn validate(&self) -> Result<()> {
        for (name, entry) in &self.materials {
            let [lo, hi] = entry.sellmeier.validity_um;
            if !(lo > 0.0 && hi > lo) {
                return Err(Error::Configuration(format!(
                    "material '{name}': invalid sellmeier validity range [{lo}, {hi}]"
                )));
            }
            for pole in [entry.sellmeier.c, entry.sellmeier.e] {
                if pole >= lo * lo && pole <= hi * hi {
                    return Err(Error::Configuration(format!(
                        "material '{name}': sellmeier pole at λ² = {pole} µm² lies inside the validity range"
                    )));
                }
            }
            let samples = 64;
            let mut prev = f64::INFINITY;
            for k in 0..=samples {
                let l_um = lo + (hi - lo) * k as f64 / samples as f64;
                let n = entry.sellmeier.index(l_um * NM_PER_UM)?;
                if n <= 1.0 || !n.is_finite() {
                    return Err(Error::Configuration(format!(
                        "material '{name}': non-physical index {n} at λ = {l_um} µm"
                    )));
                }
                if n >= prev {
                    return Err(Error::Configuration(format!(
                        "material '{name}': dispersion not monotone decreasing at λ = {l_um} µm"
                    )));
                }
                prev = n;
            }
            let [tlo, thi] = entry.thermo_optic.validity_um;
            for k in 0..=samples {
                let l_um = tlo + (thi - tlo) * k as f64 / samples as f64;
                let dndt = entry.thermo_optic.dn_dt(l_um * NM_PER_UM)?;
                if !dndt.is_finite() || dndt.abs() > 1e-3 {
                    return Err(Error::Configuration(format!(
                        "material '{name}': thermo-optic coefficient {dndt} K⁻¹ out of bounds at λ = {l_um} µm"
                    )));
                }
            }
        }
        for (name, model) in &self.exchange_models {
            let [lo, hi] = model.validity_um;
            if !(lo > 0.0 && hi > lo) {
                return Err(Error::Configuration(format!(
                    "exchange model '{name}': invalid validity range [{lo}, {hi}]"
                )));
            }
            for k in 0..=64 {
                let l_um = lo + (hi - lo) * k as f64 / 64.0;
                let dn = model.delta_n0(l_um * NM_PER_UM)?;
                if !dn.is_finite() || dn <= 0.0 || dn > 0.5 {
                    return Err(Error::Configuration(format!(
                        "exchange model '{name}': non-physical Δn₀ = {dn} at λ = {l_um} µm"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn check_range(model: &str, lambda_um: f64, validity: [f64; 2]) -> Result<()> {
    if !lambda_um.is_finite() || lambda_um < validity[0] || lambda_um > validity[1] {
        return Err(Error::WavelengthOutOfRange {
            model: model.to_string(),
            lambda_um,
            min_um: validity[0],
            max_um: validity[1],
        });
    }
    Ok(())
}

fn lambda_um_checked(model: &str, lambda_nm: f64, validity: [f64; 2]) -> Result<f64> {
    let l = lambda_nm / NM_PER_UM;
    check_range(model, l, validity)?;
    Ok(l)
}

/// Ion-exchange index-increase profile of one channel: box of width `w`
/// laterally, complementary-error-function decay of depth scale `d`, with
/// the dispersive surface value Δn₀(λ).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExchangeIndexProfile {
    pub surface: SurfaceIncreaseModel,
    /// Channel width `w` in micrometers (lateral box extent).
    pub width_um: f64,
    /// Penetration depth `d` in micrometers; the depth shape is
    /// `erfc(y/d)`, so the argument is 1 at `y = d`.
    pub depth_um: f64,
}

/// Absolute tolerance (µm) for detecting nodes exactly on the channel edge.
const EDGE_TOL_UM: f64 = 1e-9;

impl ExchangeIndexProfile {
    pub fn new(surface: SurfaceIncreaseModel, width_um: f64, depth_um: f64) -> Result<Self> {
        if !(width_um > 0.0) || !(depth_um > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "channel width and depth must be positive, got w = {width_um} µm, d = {depth_um} µm"
            )));
        }
        Ok(ExchangeIndexProfile { surface, width_um, depth_um })
    }

    /// Lateral box factor: 1 inside the channel, 0 outside, ½ for points
    /// exactly on the edge (the mean of the two one-sided limits, which
    /// keeps sampled maps second-order accurate for the field solver).
    fn lateral_factor(&self, x_um: f64) -> f64 {
        let half = 0.5 * self.width_um;
        let r = x_um.abs();
        if (r - half).abs() <= EDGE_TOL_UM {
            0.5
        } else if r < half {
            1.0
        } else {
            0.0
        }
    }

    /// Index increase Δn at lateral position `x_um`, depth `y_um` ≥ 0, and
    /// wavelength `lambda_nm`.
    pub fn index_increase(&self, x_um: f64, y_um: f64, lambda_nm: f64) -> Result<f64> {
        if y_um < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "depth must be non-negative (y = 0 is the surface), got y = {y_um} µm"
            )));
        }
        let lateral = self.lateral_factor(x_um);
        if lateral == 0.0 {
            return Ok(0.0);
        }
        let dn0 = self.surface.delta_n0(lambda_nm)?;
        Ok(dn0 * lateral * libm::erfc(y_um / self.depth_um))
    }
}

/// Sampled 2-D index distribution on a grid, for one wavelength,
/// temperature, and polarization axis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexMap {
    pub grid: Grid,
    /// Row-major samples, index `j*nx + i` for node `(i, j)`.
    pub samples: Vec<f64>,
    pub lambda_nm: f64,
    pub temperature_c: f64,
    pub axis: Axis,
    /// Bulk (substrate) index at this wavelength and temperature; guided
    /// modes require n_eff above this value.
    pub n_substrate: f64,
    /// Maximum possible index: substrate plus the surface increase.
    pub n_peak: f64,
    /// Index of the cover medium (air) above the surface.
    pub cover_index: f64,
}

impl IndexMap {
    pub fn sample(&self, i: usize, j: usize) -> f64 {
        self.samples[self.grid.idx(i, j)]
    }
}

/// Sample the full index distribution (cover, substrate, exchanged
/// channel) on `grid` for the mode solver.
///
/// The grid must include the surface (y_min ≤ 0), reach at least 1.2·d
/// below the surface, and extend at least one channel width beyond each
/// channel edge; smaller domains cannot contain the exchanged region and
/// its decay, and are rejected as configuration errors.
pub fn build_index_map(
    bulk: &MaterialEntry,
    profile: &ExchangeIndexProfile,
    lambda_nm: f64,
    t_c: f64,
    grid: &Grid,
) -> Result<IndexMap> {
    let w = profile.width_um;
    let d = profile.depth_um;
    if grid.y_min > 0.0 {
        return Err(Error::Configuration(format!(
            "grid must include the surface: y_min = {} µm > 0", grid.y_min
        )));
    }
    if grid.y_max < 1.2 * d {
        return Err(Error::Configuration(format!(
            "grid too shallow: y_max = {} µm < 1.2·d = {} µm",
            grid.y_max,
            1.2 * d
        )));
    }
    if grid.x_min > -(1.5 * w) || grid.x_max < 1.5 * w {
        return Err(Error::Configuration(format!(
            "grid too narrow: need x ≤ −{0} µm and x ≥ {0} µm to clear the channel edges",
            1.5 * w
        )));
    }
    let n_sub = bulk.bulk_index(lambda_nm, t_c)?;
    let dn0 = profile.surface.delta_n0(lambda_nm)?;
    let mut samples = Vec::with_capacity(grid.len());
    for j in 0..grid.ny {
        let y = grid.y(j);
        for i in 0..grid.nx {
            let x = grid.x(i);
            if y < 0.0 {
                samples.push(COVER_INDEX);
            } else {
                samples.push(n_sub + profile.index_increase(x, y, lambda_nm)?);
            }
        }
    }
    Ok(IndexMap {
        grid: grid.clone(),
        samples,
        lambda_nm,
        temperature_c: t_c,
        axis: bulk.axis,
        n_substrate: n_sub,
        n_peak: n_sub + dn0,
        cover_index: COVER_INDEX,
    })
}
