//! Guided-mode solver: scalar finite-difference Helmholtz eigenproblem
//! `(∇² + k²n²)E = β²E` on a sampled index map, with Dirichlet (zero-field)
//! boundaries.
//!
//! Unknowns are the interior grid nodes; the boundary ring is held at zero.
//! The eigenproblem is attacked from the top of the spectrum (largest β²,
//! i.e. largest effective index) through a shift-invert Lanczos iteration
//! over a banded Cholesky factorization; guided-mode counting uses the
//! inertia of a shifted LDLᵀ factorization instead, which needs no
//! iteration at all.

use serde::{Deserialize, Serialize};

use crate::eigen::{BandedSym, CholeskyBanded, Lanczos};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::material::{Axis, IndexMap};

/// Relative accuracy demanded of each Ritz pair before it is accepted.
const RITZ_TOL: f64 = 1e-9;
/// Relative Helmholtz-residual bound each returned mode must satisfy.
const RESIDUAL_TOL: f64 = 1e-6;
/// Lanczos subspace growth schedule.
const M_START: usize = 36;
const M_STEP: usize = 24;
const M_MAX: usize = 480;
/// Fixed seed for the deterministic Lanczos start vector.
const LANCZOS_SEED: u64 = 0x517c_c1b7_2722_0a95;

/// One guided eigenmode of an index map.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GuidedMode {
    pub lambda_nm: f64,
    pub axis: Axis,
    /// Effective index `β/k`.
    pub n_eff: f64,
    /// Lateral mode order: sign changes along the x cut through the peak.
    pub m_x: usize,
    /// Depth mode order: sign changes along the y cut through the peak.
    pub m_y: usize,
    /// Field samples on the full grid (row-major `j*nx + i`), normalized to
    /// `∫∫E² dx dy = 1`; boundary nodes are exactly zero.
    pub field: Vec<f64>,
    pub grid: Grid,
    /// Relative Helmholtz residual ‖(∇²+k²n²)E − β²E‖ / β².
    pub residual_rel: f64,
    /// Largest |E| on the outermost interior ring divided by the peak |E| —
    /// a decay diagnostic; well-contained modes stay below 1e-3.
    pub boundary_leakage: f64,
}

impl GuidedMode {
    pub fn field_at(&self, i: usize, j: usize) -> f64 {
        self.field[self.grid.idx(i, j)]
    }
}

/// Finite-difference Helmholtz operator on the interior nodes, ordered so
/// that the shorter grid direction is contiguous (minimizes the bandwidth
/// of the factorizations).
struct FdOperator {
    fast_n: usize,
    slow_n: usize,
    fast_is_x: bool,
    c_fast: f64,
    c_slow: f64,
    diag: Vec<f64>,
    k_um: f64,
}

impl FdOperator {
    fn build(map: &IndexMap) -> Result<Self> {
        let g = &map.grid;
        let (nx, ny) = (g.nx, g.ny);
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidArgument("grid too small for interior nodes".into()));
        }
        for &s in &map.samples {
            if !s.is_finite() || s < map.cover_index - 1e-9 || s > map.n_peak + 1e-9 {
                return Err(Error::ContractViolation(format!(
                    "index map sample {s} outside [{}, {}]",
                    map.cover_index, map.n_peak
                )));
            }
        }
        let lambda_um = map.lambda_nm / 1000.0;
        let k = 2.0 * std::f64::consts::PI / lambda_um;
        let (cx, cy) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
        let (ix_n, iy_n) = (nx - 2, ny - 2);
        let fast_is_x = ix_n <= iy_n;
        let (fast_n, slow_n) = if fast_is_x { (ix_n, iy_n) } else { (iy_n, ix_n) };
        let (c_fast, c_slow) = if fast_is_x { (cx, cy) } else { (cy, cx) };
        let mut diag = vec![0.0; fast_n * slow_n];
        for slow in 0..slow_n {
            for fast in 0..fast_n {
                let (i, j) = if fast_is_x { (1 + fast, 1 + slow) } else { (1 + slow, 1 + fast) };
                let n = map.samples[g.idx(i, j)];
                diag[slow * fast_n + fast] = k * k * n * n - 2.0 * cx - 2.0 * cy;
            }
        }
        Ok(FdOperator { fast_n, slow_n, fast_is_x, c_fast, c_slow, diag, k_um: k })
    }

    fn len(&self) -> usize {
        self.fast_n * self.slow_n
    }

    /// `out = A·v` applied directly from the stencil.
    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let (fnn, snn) = (self.fast_n, self.slow_n);
        for slow in 0..snn {
            let base = slow * fnn;
            for fast in 0..fnn {
                let p = base + fast;
                let mut acc = self.diag[p] * v[p];
                if fast > 0 {
                    acc += self.c_fast * v[p - 1];
                }
                if fast + 1 < fnn {
                    acc += self.c_fast * v[p + 1];
                }
                if slow > 0 {
                    acc += self.c_slow * v[p - fnn];
                }
                if slow + 1 < snn {
                    acc += self.c_slow * v[p + fnn];
                }
                out[p] = acc;
            }
        }
    }

    /// Assemble `σI − A` (positive definite for σ above the spectrum).
    fn shifted_from_above(&self, sigma: f64) -> BandedSym {
        let n = self.len();
        let mut m = BandedSym::zeros(n, self.fast_n);
        for slow in 0..self.slow_n {
            for fast in 0..self.fast_n {
                let p = slow * self.fast_n + fast;
                m.set(p, 0, sigma - self.diag[p]);
                if fast + 1 < self.fast_n {
                    m.set(p, 1, -self.c_fast);
                }
                if slow + 1 < self.slow_n {
                    m.set(p, self.fast_n, -self.c_slow);
                }
            }
        }
        m
    }

    /// Assemble `A − cI` (indefinite; used for inertia counting).
    fn minus_shift(&self, c: f64) -> BandedSym {
        let n = self.len();
        let mut m = BandedSym::zeros(n, self.fast_n);
        for slow in 0..self.slow_n {
            for fast in 0..self.fast_n {
                let p = slow * self.fast_n + fast;
                m.set(p, 0, self.diag[p] - c);
                if fast + 1 < self.fast_n {
                    m.set(p, 1, self.c_fast);
                }
                if slow + 1 < self.slow_n {
                    m.set(p, self.fast_n, self.c_slow);
                }
            }
        }
        m
    }

    /// Grid coordinates of solver node `p`.
    fn grid_ij(&self, p: usize) -> (usize, usize) {
        let (fast, slow) = (p % self.fast_n, p / self.fast_n);
        if self.fast_is_x {
            (1 + fast, 1 + slow)
        } else {
            (1 + slow, 1 + fast)
        }
    }
}

fn rayleigh_and_residual(op: &FdOperator, x: &[f64], work: &mut [f64]) -> (f64, f64) {
    op.apply(x, work);
    let lambda: f64 = x.iter().zip(work.iter()).map(|(&a, &b)| a * b).sum();
    let mut r2 = 0.0;
    for (w, &xi) in work.iter().zip(x) {
        let d = w - lambda * xi;
        r2 += d * d;
    }
    (lambda, r2.sqrt())
}

/// Count the eigenmodes with effective index above the substrate index by
/// Sylvester inertia of the shifted operator — deterministic and free of
/// iteration, at the cost of one factorization.
pub fn count_guided_modes(map: &IndexMap) -> Result<usize> {
    if map.n_peak <= map.n_substrate + 1e-15 {
        return Ok(0);
    }
    let op = FdOperator::build(map)?;
    let k2 = op.k_um * op.k_um;
    let cutoff = k2 * map.n_substrate * map.n_substrate;
    let mut shift = cutoff * (1.0 + 1e-12);
    let mut last_err = None;
    for attempt in 0..5 {
        match op.minus_shift(shift).ldlt_inertia(1e-13) {
            Ok(inertia) => return Ok(inertia.positive),
            Err(e) => {
                last_err = Some(e);
                shift = cutoff * (1.0 + 1e-12 + 3e-11 * (attempt + 1) as f64);
            }
        }
    }
    Err(last_err.unwrap())
}

/// Solve up to `max_count` guided modes, sorted by descending effective
/// index.  Structures with fewer guided modes return the full set; a map
/// with no index contrast returns an empty list.
pub fn solve_modes(map: &IndexMap, max_count: usize) -> Result<Vec<GuidedMode>> {
    if max_count == 0 {
        return Err(Error::InvalidArgument("max_count must be ≥ 1".into()));
    }
    if map.n_peak <= map.n_substrate + 1e-15 {
        return Ok(Vec::new());
    }
    let op = FdOperator::build(map)?;
    let n = op.len();
    let k2 = op.k_um * op.k_um;
    let cutoff = k2 * map.n_substrate * map.n_substrate;
    let top = k2 * map.n_peak * map.n_peak;
    let sigma = top + (0.1 * (top - cutoff)).max(0.5);
    let chol: CholeskyBanded = op.shifted_from_above(sigma).cholesky()?;
    let mut apply_m = |v: &[f64], out: &mut [f64]| {
        out.copy_from_slice(v);
        chol.solve_in_place(out);
    };

    let mut lan = Lanczos::new(n, LANCZOS_SEED);
    let mut m_target = M_START.min(n);
    let selected;
    loop {
        while lan.steps() < m_target && !lan.exhausted() {
            lan.step(&mut apply_m);
        }
        let ritz = lan.ritz()?;
        // Walk descending Ritz values; collect guided candidates from the
        // top while everything stays converged.  The set is sealed once a
        // converged value below cutoff closes it, or the requested count is
        // reached with a trustworthy successor (converged, or separated by
        // more than the residual bounds so it cannot overtake).
        let mut picked: Vec<usize> = Vec::new();
        let mut sealed = false;
        for idx in 0..ritz.len() {
            let theta = ritz.values[idx];
            if theta <= 0.0 {
                sealed = true; // beyond the positive spectrum of the inverse
                break;
            }
            let bound = ritz.bounds[idx];
            let converged = bound <= RITZ_TOL * theta;
            if picked.len() == max_count {
                let prev = *picked.last().unwrap();
                let separated =
                    ritz.values[prev] - ritz.bounds[prev] > theta + bound;
                sealed = converged || separated;
                break;
            }
            if !converged {
                break;
            }
            let lambda = sigma - 1.0 / theta;
            if lambda <= cutoff * (1.0 + 1e-14) {
                sealed = true; // a converged value below cutoff closes the set
                break;
            }
            picked.push(idx);
        }
        if !sealed && lan.exhausted() {
            sealed = true; // invariant subspace: nothing further exists
        }
        if sealed {
            selected = (ritz, picked);
            break;
        }
        if lan.exhausted() || m_target >= M_MAX.min(n) {
            let worst = ritz
                .bounds
                .iter()
                .zip(&ritz.values)
                .filter(|(_, &v)| v > 0.0)
                .map(|(&b, &v)| b / v)
                .fold(0.0, f64::max);
            return Err(Error::NumericalConvergence {
                context: "mode eigensolver: Krylov space exhausted before the requested modes converged"
                    .into(),
                iterations: lan.steps(),
                residual: worst,
            });
        }
        m_target = (m_target + M_STEP).min(M_MAX.min(n));
    }

    let (ritz, picked) = selected;
    let mut work = vec![0.0; n];
    let mut accepted: Vec<(f64, f64, Vec<f64>)> = Vec::new(); // (λ, residual, x)
    for &idx in &picked {
        let mut x = lan.assemble(ritz.coeff_column(idx));
        let (mut lambda, mut res) = rayleigh_and_residual(&op, &x, &mut work);
        let mut polish = 0;
        while res > RESIDUAL_TOL * lambda.abs() && polish < 8 {
            // One inverse-iteration sweep, deflated against the modes
            // already accepted above this one.
            work.copy_from_slice(&x);
            chol.solve_in_place(&mut work);
            for (_, _, prev) in &accepted {
                let g: f64 = prev.iter().zip(work.iter()).map(|(&a, &b)| a * b).sum();
                for (w, &p) in work.iter_mut().zip(prev) {
                    *w -= g * p;
                }
            }
            let nrm: f64 = work.iter().map(|&v| v * v).sum::<f64>().sqrt();
            if nrm == 0.0 {
                break;
            }
            for (xi, &w) in x.iter_mut().zip(work.iter()) {
                *xi = w / nrm;
            }
            let polished = rayleigh_and_residual(&op, &x, &mut work);
            lambda = polished.0;
            res = polished.1;
            polish += 1;
        }
        if res > RESIDUAL_TOL * lambda.abs() {
            return Err(Error::NumericalConvergence {
                context: "mode eigensolver: Helmholtz residual above tolerance after polishing".into(),
                iterations: lan.steps() + polish,
                residual: res / lambda.abs(),
            });
        }
        if lambda <= cutoff {
            continue; // polishing revealed a sub-cutoff value
        }
        accepted.push((lambda, res / lambda.abs(), x));
    }

    let mut modes: Vec<GuidedMode> = accepted
        .into_iter()
        .map(|(lambda, residual_rel, x)| assemble_mode(map, &op, lambda, residual_rel, &x))
        .collect::<Result<_>>()?;
    modes.sort_by(|a, b| {
        b.n_eff
            .partial_cmp(&a.n_eff)
            .unwrap()
            .then(a.m_x.cmp(&b.m_x))
            .then(a.m_y.cmp(&b.m_y))
    });
    Ok(modes)
}

fn assemble_mode(
    map: &IndexMap,
    op: &FdOperator,
    lambda: f64,
    residual_rel: f64,
    x: &[f64],
) -> Result<GuidedMode> {
    let g = &map.grid;
    let n_eff = lambda.sqrt() / op.k_um;
    if n_eff > map.n_peak + 1e-9 {
        return Err(Error::ContractViolation(format!(
            "computed n_eff = {n_eff} exceeds the index-map maximum {}",
            map.n_peak
        )));
    }
    // Scatter to the full grid; quadrature-normalize; orient the peak up.
    let quad = 1.0 / g.cell_area().sqrt();
    let mut field = vec![0.0; g.len()];
    for (p, &v) in x.iter().enumerate() {
        let (i, j) = op.grid_ij(p);
        field[g.idx(i, j)] = v * quad;
    }
    let mut peak = 0.0_f64;
    let mut peak_signed = 0.0_f64;
    let (mut pi, mut pj) = (0usize, 0usize);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let v = field[g.idx(i, j)];
            if v.abs() > peak {
                peak = v.abs();
                peak_signed = v;
                pi = i;
                pj = j;
            }
        }
    }
    if peak_signed < 0.0 {
        for v in &mut field {
            *v = -*v;
        }
    }
    // Outermost interior ring = largest field adjacent to the zero boundary.
    let mut leak = 0.0_f64;
    for i in 1..g.nx - 1 {
        leak = leak.max(field[g.idx(i, 1)].abs());
        leak = leak.max(field[g.idx(i, g.ny - 2)].abs());
    }
    for j in 1..g.ny - 1 {
        leak = leak.max(field[g.idx(1, j)].abs());
        leak = leak.max(field[g.idx(g.nx - 2, j)].abs());
    }
    let m_x = sign_changes((0..g.nx).map(|i| field[g.idx(i, pj)]), peak);
    let m_y = sign_changes((0..g.ny).map(|j| field[g.idx(pi, j)]), peak);
    Ok(GuidedMode {
        lambda_nm: map.lambda_nm,
        axis: map.axis,
        n_eff,
        m_x,
        m_y,
        field,
        grid: g.clone(),
        residual_rel,
        boundary_leakage: leak / peak,
    })
}

fn sign_changes(cut: impl Iterator<Item = f64>, peak: f64) -> usize {
    let thr = 1e-6 * peak;
    let mut last = 0.0_f64;
    let mut flips = 0;
    for v in cut {
        if v.abs() >= thr {
            let s = v.signum();
            if last != 0.0 && s != last {
                flips += 1;
            }
            last = s;
        }
    }
    flips
}

/// Largest off-diagonal overlap `|⟨E_i, E_j⟩|` of a mode set; 0 for fewer
/// than two modes.  All modes must share grid, wavelength, and axis.
pub fn mode_orthogonality(modes: &[GuidedMode]) -> Result<f64> {
    if modes.len() < 2 {
        return Ok(0.0);
    }
    let first = &modes[0];
    for m in &modes[1..] {
        if !m.grid.same_as(&first.grid) || m.lambda_nm != first.lambda_nm || m.axis != first.axis {
            return Err(Error::GridMismatch(
                "mode orthogonality requires a shared grid, wavelength, and axis".into(),
            ));
        }
    }
    let area = first.grid.cell_area();
    let mut worst = 0.0_f64;
    for a in 0..modes.len() {
        for b in a + 1..modes.len() {
            let dot: f64 = modes[a]
                .field
                .iter()
                .zip(&modes[b].field)
                .map(|(&x, &y)| x * y)
                .sum();
            worst = worst.max((area * dot).abs());
        }
    }
    Ok(worst)
}

/// Full width at half maximum of the intensity `E²` along the two axis cuts
/// through the intensity peak, with linear interpolation between samples.
/// Returns `(lateral µm, depth µm)`.
pub fn field_fwhm(mode: &GuidedMode) -> Result<(f64, f64)> {
    let g = &mode.grid;
    let mut best = 0.0_f64;
    let (mut pi, mut pj) = (0usize, 0usize);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let v = mode.field[g.idx(i, j)].abs();
            if v > best {
                best = v;
                pi = i;
                pj = j;
            }
        }
    }
    if pi == 0 || pi == g.nx - 1 || pj == 0 || pj == g.ny - 1 {
        return Err(Error::DegenerateMode(
            "intensity peak sits on the grid boundary".into(),
        ));
    }
    let half = best * best * 0.5;
    let along_x = |i: usize| {
        let v = mode.field[g.idx(i, pj)];
        v * v
    };
    let along_y = |j: usize| {
        let v = mode.field[g.idx(pi, j)];
        v * v
    };
    let lat = cut_width(pi, g.nx, g.hx(), half, along_x)?;
    let dep = cut_width(pj, g.ny, g.hy(), half, along_y)?;
    Ok((lat, dep))
}

fn cut_width(
    peak: usize,
    len: usize,
    h: f64,
    half: f64,
    intensity: impl Fn(usize) -> f64,
) -> Result<f64> {
    let crossing = |a: usize, b: usize| -> f64 {
        let (ia, ib) = (intensity(a), intensity(b));
        // Fraction of a cell from a toward b where I crosses the half level.
        (ia - half) / (ia - ib)
    };
    let mut right = None;
    for i in peak..len - 1 {
        if intensity(i + 1) < half {
            right = Some((i - peak) as f64 + crossing(i, i + 1));
            break;
        }
    }
    let mut left = None;
    for i in (1..=peak).rev() {
        if intensity(i - 1) < half {
            left = Some((peak - i) as f64 + crossing(i, i - 1));
            break;
        }
    }
    match (left, right) {
        (Some(l), Some(r)) => Ok((l + r) * h),
        _ => Err(Error::DegenerateMode(
            "half-maximum level not crossed inside the grid".into(),
        )),
    }
}
