//! Solver-backed device model: channel geometry plus material data
//! composed into guided-mode solves, cached dispersion tables, and the
//! phasematching/overlap observables the command-line tools report.

use serde::{Deserialize, Serialize};

use crate::coupling::{
    optimal_gaussian_coupling, GaussianFit, NonlinearCoefficient, OverlapResult,
};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::material::{
    build_index_map, ExchangeIndexProfile, IndexMap, MaterialDb, MaterialEntry,
};
use crate::modes::{count_guided_modes, field_fwhm, solve_modes, GuidedMode};
use crate::qpm::{
    energy_matched_output, solve_poling_period, NeffTable, PhasematchingModel, ProcessSpec,
    TuningModel,
};

/// Half-width (nm) of the input-band dispersion table around the
/// reference wavelength.
pub const TABLE_HALF_SPAN_IN_NM: f64 = 2.4;
/// Number of knots per dispersion table.
pub const TABLE_KNOTS: usize = 7;

/// Complete physical description of one converter device.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeviceParams {
    /// Channel width, µm.
    pub width_um: f64,
    /// Exchange depth, µm.
    pub depth_um: f64,
    pub lambda_in_nm: f64,
    pub lambda_pump_nm: f64,
    pub length_mm: f64,
    /// Fabricated (nominal) poling period, µm.
    pub poling_period_um: f64,
    /// Operating temperature that anchors the tuning reference, °C.
    pub temperature_c: f64,
    /// Pump power at the tuning reference, mW.
    pub p_ref_mw: f64,
    /// Equivalent temperature rise per absorbed pump power, K/W.
    pub thermal_load_k_per_w: f64,
    pub d_eff: NonlinearCoefficient,
    /// Key of the bulk material entry in the data file.
    pub material: String,
    /// Key of the exchange-layer model in the data file.
    pub exchange_model: String,
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self {
            width_um: 2.0,
            depth_um: 6.0,
            lambda_in_nm: 1311.0,
            lambda_pump_nm: 514.5,
            length_mm: 9.6,
            poling_period_um: 2.535,
            temperature_c: 20.0,
            p_ref_mw: 0.0,
            thermal_load_k_per_w: 13.8,
            d_eff: NonlinearCoefficient::default(),
            material: "ktp_z".into(),
            exchange_model: "rb_exchange_z".into(),
        }
    }
}

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("width_um", self.width_um),
            ("depth_um", self.depth_um),
            ("lambda_in_nm", self.lambda_in_nm),
            ("lambda_pump_nm", self.lambda_pump_nm),
            ("length_mm", self.length_mm),
            ("poling_period_um", self.poling_period_um),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Configuration(format!(
                    "device parameter {name} must be positive and finite, got {v}"
                )));
            }
        }
        if !(self.thermal_load_k_per_w >= 0.0) {
            return Err(Error::Configuration(format!(
                "thermal_load_k_per_w must be ≥ 0, got {}",
                self.thermal_load_k_per_w
            )));
        }
        if !self.temperature_c.is_finite() || !self.p_ref_mw.is_finite() || self.p_ref_mw < 0.0 {
            return Err(Error::Configuration(format!(
                "tuning reference must be finite with p_ref ≥ 0, got ({}, {})",
                self.temperature_c, self.p_ref_mw
            )));
        }
        Ok(())
    }

    /// Output wavelength slaved to energy conservation.
    pub fn lambda_out_nm(&self) -> Result<f64> {
        energy_matched_output(self.lambda_in_nm, self.lambda_pump_nm)
    }

    /// Process specification at the fabricated (nominal) poling period.
    pub fn process_spec(&self) -> Result<ProcessSpec> {
        ProcessSpec::new(
            self.lambda_in_nm,
            self.lambda_pump_nm,
            self.length_mm,
            self.poling_period_um,
            self.d_eff,
        )
    }
}

/// Evaluation grid for input-band (telecom) mode solves.
pub fn grid_neff_ir() -> Grid {
    Grid::with_spacing(-9.0, 9.0, -0.625, 11.875, 0.0625).expect("static grid")
}

/// Evaluation grid for pump-band mode solves.
pub fn grid_neff_pump() -> Grid {
    Grid::with_spacing(-4.0, 4.0, -0.6, 9.4, 0.05).expect("static grid")
}

/// Evaluation grid for output-band (UV) mode solves.
pub fn grid_neff_uv() -> Grid {
    Grid::with_spacing(-3.0, 3.0, -0.48, 7.52, 0.04).expect("static grid")
}

/// Common grid for the three-mode overlap integral.
pub fn grid_overlap() -> Grid {
    Grid::with_spacing(-10.0, 10.0, -0.625, 13.125, 0.0625).expect("static grid")
}

/// Counting domain for the strongly confined pump and output bands.
pub fn grid_count() -> Grid {
    Grid::with_spacing(-6.0, 6.0, -0.6, 13.4, 0.05).expect("static grid")
}

/// Wide domain resolving the weakly confined input mode's lateral tails;
/// used for input-band counting, mode export, and fiber-coupling fits.
pub fn grid_ir_wide() -> Grid {
    Grid::with_spacing(-20.0, 20.0, -0.625, 15.625, 0.0625).expect("static grid")
}

/// Mode counts of the three bands.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BandCounts {
    pub input: usize,
    pub pump: usize,
    pub output: usize,
}

/// A device bound to its material data, ready to solve.
#[derive(Debug, Clone)]
pub struct DeviceModel {
    pub params: DeviceParams,
    pub bulk: MaterialEntry,
    pub profile: ExchangeIndexProfile,
}

impl DeviceModel {
    pub fn new(db: &MaterialDb, params: DeviceParams) -> Result<Self> {
        params.validate()?;
        let bulk = db.material(&params.material)?.clone();
        let surface = db.exchange_model(&params.exchange_model)?.clone();
        let profile = ExchangeIndexProfile::new(surface, params.width_um, params.depth_um)?;
        Ok(Self { params, bulk, profile })
    }

    /// Reference device on the compiled-in material data.
    pub fn reference() -> Result<Self> {
        Self::new(MaterialDb::builtin(), DeviceParams::default())
    }

    pub fn tuning(&self) -> Result<TuningModel> {
        TuningModel::new(
            self.params.thermal_load_k_per_w,
            self.params.temperature_c,
            self.params.p_ref_mw,
            self.params.lambda_in_nm,
        )
    }

    /// Sampled index distribution at one wavelength and temperature.
    pub fn index_map(&self, lambda_nm: f64, t_c: f64, grid: &Grid) -> Result<IndexMap> {
        build_index_map(&self.bulk, &self.profile, lambda_nm, t_c, grid)
    }

    /// Fundamental guided mode at one wavelength and temperature.
    pub fn fundamental(&self, lambda_nm: f64, t_c: f64, grid: &Grid) -> Result<GuidedMode> {
        let map = self.index_map(lambda_nm, t_c, grid)?;
        solve_modes(&map, 1)?.into_iter().next().ok_or_else(|| {
            Error::DegenerateMode(format!(
                "no guided mode at λ = {lambda_nm} nm on the requested grid"
            ))
        })
    }

    /// Number of guided modes at one wavelength on `grid`.
    pub fn mode_count(&self, lambda_nm: f64, t_c: f64, grid: &Grid) -> Result<usize> {
        count_guided_modes(&self.index_map(lambda_nm, t_c, grid)?)
    }

    /// Guided-mode counts for the three bands on their counting domains.
    pub fn band_counts(&self, t_c: f64) -> Result<BandCounts> {
        let wide = grid_ir_wide();
        let upper = grid_count();
        Ok(BandCounts {
            input: self.mode_count(self.params.lambda_in_nm, t_c, &wide)?,
            pump: self.mode_count(self.params.lambda_pump_nm, t_c, &upper)?,
            output: self.mode_count(self.params.lambda_out_nm()?, t_c, &upper)?,
        })
    }

    /// Knot wavelengths of the input-band dispersion table.
    pub fn table_knots_in(&self) -> Vec<f64> {
        let step = 2.0 * TABLE_HALF_SPAN_IN_NM / (TABLE_KNOTS - 1) as f64;
        (0..TABLE_KNOTS)
            .map(|k| self.params.lambda_in_nm - TABLE_HALF_SPAN_IN_NM + step * k as f64)
            .collect()
    }

    /// Knot wavelengths of the output-band dispersion table, covering the
    /// image of the input span under energy conservation with margin.
    pub fn table_knots_out(&self) -> Result<Vec<f64>> {
        let center = self.params.lambda_out_nm()?;
        // dλ_out/dλ_in = (λ_out/λ_in)²; pad the slaved span by ~25%.
        let slope = (center / self.params.lambda_in_nm).powi(2);
        let half = 1.25 * TABLE_HALF_SPAN_IN_NM * slope;
        let step = 2.0 * half / (TABLE_KNOTS - 1) as f64;
        Ok((0..TABLE_KNOTS).map(|k| center - half + step * k as f64).collect())
    }

    /// Solve the dispersion tables for the input and output bands and the
    /// pump effective index, all at the device temperature.
    pub fn build_tables(&self) -> Result<(NeffTable, NeffTable, f64)> {
        let t = self.params.temperature_c;
        let thermo = self.bulk.thermo_optic.clone();
        let ir_grid = grid_neff_ir();
        let mut n_in = Vec::with_capacity(TABLE_KNOTS);
        let knots_in = self.table_knots_in();
        for &l in &knots_in {
            n_in.push(self.fundamental(l, t, &ir_grid)?.n_eff);
        }
        let table_in = NeffTable::from_knots(knots_in, n_in, t, thermo.clone())?;

        let uv_grid = grid_neff_uv();
        let knots_out = self.table_knots_out()?;
        let mut n_out = Vec::with_capacity(TABLE_KNOTS);
        for &l in &knots_out {
            n_out.push(self.fundamental(l, t, &uv_grid)?.n_eff);
        }
        let table_out = NeffTable::from_knots(knots_out, n_out, t, thermo)?;

        let n_pump = self.fundamental(self.params.lambda_pump_nm, t, &grid_neff_pump())?.n_eff;
        Ok((table_in, table_out, n_pump))
    }

    /// First-order poling period that phasematches the reference triple,
    /// from fresh mode solves at the device temperature.
    pub fn solved_poling_period_um(&self) -> Result<f64> {
        let t = self.params.temperature_c;
        let l_out = self.params.lambda_out_nm()?;
        let n_in = self.fundamental(self.params.lambda_in_nm, t, &grid_neff_ir())?.n_eff;
        let n_pump = self.fundamental(self.params.lambda_pump_nm, t, &grid_neff_pump())?.n_eff;
        let n_out = self.fundamental(l_out, t, &grid_neff_uv())?.n_eff;
        solve_poling_period(
            n_in,
            n_pump,
            n_out,
            self.params.lambda_in_nm,
            self.params.lambda_pump_nm,
            l_out,
        )
    }

    /// Dispersion model with the poling period anchored so that the
    /// tuning reference condition is exactly phasematched.
    pub fn phasematching_model(&self) -> Result<PhasematchingModel> {
        let (table_in, table_out, n_eff_pump) = self.build_tables()?;
        self.phasematching_model_from_tables(table_in, table_out, n_eff_pump)
    }

    /// Assemble the anchored model from pre-solved tables.
    pub fn phasematching_model_from_tables(
        &self,
        table_in: NeffTable,
        table_out: NeffTable,
        n_eff_pump: f64,
    ) -> Result<PhasematchingModel> {
        let tuning = self.tuning()?;
        let thermo_pump = self.bulk.thermo_optic.clone();
        let l_out = self.params.lambda_out_nm()?;
        let t_anchor = tuning.effective_temperature(tuning.t_ref_c, tuning.p_ref_mw);
        let n_in = table_in.eval_at(self.params.lambda_in_nm, t_anchor)?;
        let n_out = table_out.eval_at(l_out, t_anchor)?;
        let n_pump = n_eff_pump
            + (t_anchor - table_in.t_table_c) * thermo_pump.dn_dt(self.params.lambda_pump_nm)?;
        let period = solve_poling_period(
            n_in,
            n_pump,
            n_out,
            self.params.lambda_in_nm,
            self.params.lambda_pump_nm,
            l_out,
        )?;
        let spec = ProcessSpec::new(
            self.params.lambda_in_nm,
            self.params.lambda_pump_nm,
            self.params.length_mm,
            period,
            self.params.d_eff,
        )?;
        Ok(PhasematchingModel { spec, tuning, table_in, table_out, n_eff_pump, thermo_pump })
    }

    /// Three-mode overlap and normalized efficiency on the shared
    /// overlap grid.
    pub fn overlap(&self, t_c: f64) -> Result<OverlapResult> {
        let grid = grid_overlap();
        let mode_in = self.fundamental(self.params.lambda_in_nm, t_c, &grid)?;
        let mode_pump = self.fundamental(self.params.lambda_pump_nm, t_c, &grid)?;
        let mode_out = self.fundamental(self.params.lambda_out_nm()?, t_c, &grid)?;
        OverlapResult::from_modes(&mode_in, &mode_pump, &mode_out, &self.params.d_eff)
    }

    /// Input mode on the wide domain with its best-matched Gaussian.
    pub fn input_mode_fit(&self, t_c: f64) -> Result<(GuidedMode, GaussianFit)> {
        let mode = self.fundamental(self.params.lambda_in_nm, t_c, &grid_ir_wide())?;
        let fit = optimal_gaussian_coupling(&mode)?;
        Ok((mode, fit))
    }

    /// Intensity FWHM (width, depth) of the output-band fundamental, µm.
    pub fn output_mode_fwhm(&self, t_c: f64) -> Result<(f64, f64)> {
        let mode = self.fundamental(self.params.lambda_out_nm()?, t_c, &grid_neff_uv())?;
        field_fwhm(&mode)
    }
}
