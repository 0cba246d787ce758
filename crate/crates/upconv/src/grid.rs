//! Uniform tensor-product grid for the waveguide cross-section.
//!
//! Coordinates: `x` is the lateral direction (channel centered on x = 0),
//! `y` is depth into the substrate (y = 0 is the surface, y < 0 is the
//! cover).  All lengths in micrometers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum node count per direction; coarser grids cannot resolve a mode.
pub const MIN_NODES: usize = 16;

/// Uniform rectangular grid with vertex-centered nodes.
///
/// Node `(i, j)` sits at `(x_min + i*hx, y_min + j*hy)` with
/// `0 <= i < nx`, `0 <= j < ny`.  Spacings satisfy
/// `hx = (x_max - x_min)/(nx - 1)` and likewise for `hy`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    /// Build a grid from extents and node counts, validating consistency.
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(x_max > x_min) || !(y_max > y_min) {
            return Err(Error::InvalidArgument(format!(
                "grid extents must be increasing: x [{x_min}, {x_max}], y [{y_min}, {y_max}]"
            )));
        }
        if nx < MIN_NODES || ny < MIN_NODES {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least {MIN_NODES} nodes per direction, got {nx} x {ny}"
            )));
        }
        let g = Grid { x_min, x_max, y_min, y_max, nx, ny };
        if !(g.hx().is_finite() && g.hy().is_finite() && g.hx() > 0.0 && g.hy() > 0.0) {
            return Err(Error::InvalidArgument("grid spacing must be positive and finite".into()));
        }
        Ok(g)
    }

    /// Convenience constructor from extents and a target spacing `h`; the
    /// extents must be integer multiples of `h` to keep nodes on the lattice.
    pub fn with_spacing(x_min: f64, x_max: f64, y_min: f64, y_max: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::InvalidArgument("grid spacing must be positive".into()));
        }
        let nx_span = (x_max - x_min) / h;
        let ny_span = (y_max - y_min) / h;
        let nx = nx_span.round() as usize;
        let ny = ny_span.round() as usize;
        if (nx_span - nx as f64).abs() > 1e-9 || (ny_span - ny as f64).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "extents must be integer multiples of the spacing {h}"
            )));
        }
        Grid::new(x_min, x_max, y_min, y_max, nx + 1, ny + 1)
    }

    pub fn hx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn hy(&self) -> f64 {
        (self.y_max - self.y_min) / (self.ny - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.hx()
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y_min + j as f64 * self.hy()
    }

    /// Total node count.
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Row-major flat index: rows iterate y slowly, x quickly.
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Halve both spacings, keeping extents; existing nodes are preserved
    /// (node counts go from n to 2n - 1).
    pub fn refined(&self) -> Grid {
        Grid {
            nx: 2 * self.nx - 1,
            ny: 2 * self.ny - 1,
            ..self.clone()
        }
    }

    /// Quadrature weight of one node for rectangle-rule integration.
    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    /// True if both grids have identical extents and node counts.
    pub fn same_as(&self, other: &Grid) -> bool {
        self == other
    }
}
