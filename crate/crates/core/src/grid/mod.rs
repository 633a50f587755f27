//! Uniform cell-centered grids on an origin-centered box and the scalar
//! fields that live on them.

mod norms;
mod snapshot;
mod spectral;
mod wasserstein;

pub use norms::{bv_a, norms, rotation_generator, tv_interior, Norms};
pub use snapshot::{read_snapshot, write_snapshot, SnapshotHeader};
pub(crate) use spectral::transpose;
pub use spectral::{heat_step, poisson_solve, DirichletPoisson, NeumannHeat, POISSON_MARGIN};
pub use wasserstein::{w2_line, w2_radial, w2_radial_profile};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometry of a uniform grid on the box `[-L_0/2, L_0/2] x [-L_1/2, L_1/2]`.
///
/// One-dimensional grids use `n[1] == 1`; the second axis is then inert.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dim: usize,
    n: [usize; 2],
    len: [f64; 2],
}

impl GridSpec {
    pub const MIN_CELLS: usize = 8;

    pub fn new_1d(n: usize, len: f64) -> Result<Self> {
        Self::build(1, [n, 1], [len, 1.0])
    }

    pub fn new_2d(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        Self::build(2, [nx, ny], [lx, ly])
    }

    /// Square `n x n` grid on `[-half, half]^2`.
    pub fn square(n: usize, half: f64) -> Result<Self> {
        Self::new_2d(n, n, 2.0 * half, 2.0 * half)
    }

    fn build(dim: usize, n: [usize; 2], len: [f64; 2]) -> Result<Self> {
        for a in 0..dim {
            if n[a] < Self::MIN_CELLS {
                return Err(Error::InvalidParameter(format!(
                    "grid needs at least {} cells per side, got {}",
                    Self::MIN_CELLS,
                    n[a]
                )));
            }
            if !(len[a].is_finite() && len[a] > 0.0) {
                return Err(Error::InvalidParameter(format!("box side must be positive, got {}", len[a])));
            }
        }
        Ok(Self { dim, n, len })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nx(&self) -> usize {
        self.n[0]
    }

    pub fn ny(&self) -> usize {
        self.n[1]
    }

    pub fn shape(&self) -> [usize; 2] {
        self.n
    }

    pub fn lengths(&self) -> [f64; 2] {
        self.len
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Spacing along `axis`.
    pub fn h(&self, axis: usize) -> f64 {
        self.len[axis] / self.n[axis] as f64
    }

    /// Smallest spacing over the active axes.
    pub fn h_min(&self) -> f64 {
        (0..self.dim).map(|a| self.h(a)).fold(f64::INFINITY, f64::min)
    }

    /// Volume of one cell (`h^d`).
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.h(a)).product()
    }

    pub fn box_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.len[a]).product()
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.n[0] + i
    }

    #[inline]
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.n[0], k / self.n[0])
    }

    /// Coordinate of the center of cell `i` along `axis`.
    #[inline]
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        if axis >= self.dim {
            return 0.0;
        }
        -0.5 * self.len[axis] + (i as f64 + 0.5) * self.h(axis)
    }

    /// Cell center as `[x, y]` (`y = 0` in 1D).
    #[inline]
    pub fn center(&self, k: usize) -> [f64; 2] {
        let (i, j) = self.ij(k);
        [self.coord(0, i), self.coord(1, j)]
    }

    /// Continuous cell coordinate of a point: cell centers sit at integers.
    #[inline]
    pub fn to_cell_coords(&self, x: [f64; 2]) -> [f64; 2] {
        let mut c = [0.0; 2];
        for a in 0..self.dim {
            c[a] = (x[a] + 0.5 * self.len[a]) / self.h(a) - 0.5;
        }
        c
    }

    /// Face neighbours of cell `k` as `(neighbour, axis)` pairs.
    pub fn neighbors(&self, k: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (i, j) = self.ij(k);
        let nx = self.n[0];
        let ny = self.n[1];
        let two_d = self.dim == 2;
        [
            (i > 0).then(|| (k - 1, 0)),
            (i + 1 < nx).then(|| (k + 1, 0)),
            (two_d && j > 0).then(|| (k - nx, 1)),
            (two_d && j + 1 < ny).then(|| (k + nx, 1)),
        ]
        .into_iter()
        .flatten()
    }

    /// Chebyshev distance (in cells) from cell `k` to the nearest box edge.
    pub fn cells_to_boundary(&self, k: usize) -> usize {
        let (i, j) = self.ij(k);
        let mut d = i.min(self.n[0] - 1 - i);
        if self.dim == 2 {
            d = d.min(j.min(self.n[1] - 1 - j));
        }
        d
    }
}

/// Real values on the cells of a [`GridSpec`], row-major with `x` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    pub fn from_vec(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "field has {} values, grid has {} cells",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at cell centers.
    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|k| f(grid.center(k))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self { grid: self.grid, values }
    }

    pub fn check_finite(&self, name: &'static str) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFiniteInput(name))
        }
    }

    pub fn same_grid(&self, other: &Self) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// `h^d * sum(values)`.
    pub fn integral(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().sum::<f64>()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `h^d * sum(|a - b|)`.
    pub fn l1_distance(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        self.grid.cell_volume() * self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }

    /// `h^d * sum((self - other)_+)`.
    pub fn l1_positive_part(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        self.grid.cell_volume() * self.values.iter().zip(&other.values).map(|(a, b)| (a - b).max(0.0)).sum::<f64>()
    }

    pub fn linf_distance(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Mass-weighted center, `[0, 0]` for a massless field.
    pub fn center_of_mass(&self) -> [f64; 2] {
        let mut m = 0.0;
        let mut c = [0.0; 2];
        for (k, &v) in self.values.iter().enumerate() {
            let x = self.grid.center(k);
            m += v;
            c[0] += v * x[0];
            c[1] += v * x[1];
        }
        if m == 0.0 {
            [0.0, 0.0]
        } else {
            [c[0] / m, c[1] / m]
        }
    }

    /// Smallest Chebyshev distance (in cells) from a cell with `|v| > eps` to the box edge.
    pub fn support_margin(&self, eps: f64) -> Option<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() > eps)
            .map(|(k, _)| self.grid.cells_to_boundary(k))
            .min()
    }

    /// Bilinear interpolation at a physical point; zero outside the box.
    pub fn sample(&self, x: [f64; 2]) -> f64 {
        let c = self.grid.to_cell_coords(x);
        let [nx, ny] = self.grid.shape();
        let get = |i: isize, j: isize| -> f64 {
            if i < 0 || j < 0 || i as usize >= nx || j as usize >= ny {
                0.0
            } else {
                self.values[self.grid.idx(i as usize, j as usize)]
            }
        };
        let fx = c[0].floor();
        let tx = c[0] - fx;
        let i0 = fx as isize;
        if self.grid.dim() == 1 {
            return (1.0 - tx) * get(i0, 0) + tx * get(i0 + 1, 0);
        }
        let fy = c[1].floor();
        let ty = c[1] - fy;
        let j0 = fy as isize;
        (1.0 - tx) * (1.0 - ty) * get(i0, j0)
            + tx * (1.0 - ty) * get(i0 + 1, j0)
            + (1.0 - tx) * ty * get(i0, j0 + 1)
            + tx * ty * get(i0 + 1, j0 + 1)
    }

    /// `x -> f(x / scale)` by bilinear resampling; scale > 1 dilates the field.
    pub fn dilate(&self, scale: f64) -> Self {
        Self::from_fn(self.grid, |x| self.sample([x[0] / scale, x[1] / scale]))
    }

    /// Discrete Laplacian (5-point, 3-point in 1D) with homogeneous Dirichlet
    /// data on the box faces, the operator inverted by [`poisson_solve`].
    pub fn laplacian(&self) -> Self {
        let g = self.grid;
        let mut out = vec![0.0; g.len()];
        let inv_h2 = [1.0 / (g.h(0) * g.h(0)), 1.0 / (g.h(1) * g.h(1))];
        for (k, o) in out.iter_mut().enumerate() {
            let (i, j) = g.ij(k);
            let v = self.values[k];
            let left = if i > 0 { self.values[k - 1] } else { -v };
            let right = if i + 1 < g.nx() { self.values[k + 1] } else { -v };
            let mut s = (left - 2.0 * v + right) * inv_h2[0];
            if g.dim() == 2 {
                let down = if j > 0 { self.values[k - g.nx()] } else { -v };
                let up = if j + 1 < g.ny() { self.values[k + g.nx()] } else { -v };
                s += (down - 2.0 * v + up) * inv_h2[1];
            }
            *o = s;
        }
        Self { grid: g, values: out }
    }

    /// `0.5 * ||grad f||^2` with forward face differences (faces inside the box).
    pub fn dirichlet_energy(&self) -> f64 {
        let g = self.grid;
        let mut e = 0.0;
        for k in 0..g.len() {
            for (nb, axis) in g.neighbors(k) {
                if nb > k {
                    let d = (self.values[nb] - self.values[k]) / g.h(axis);
                    e += d * d;
                }
            }
        }
        0.5 * e * g.cell_volume()
    }
}

impl std::ops::Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: Self) -> ScalarField {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl std::ops::Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: Self) -> ScalarField {
        self.zip_map(rhs, |a, b| a - b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_coarse_grids() {
        assert!(GridSpec::new_2d(4, 16, 1.0, 1.0).is_err());
        assert!(GridSpec::new_1d(16, -1.0).is_err());
    }

    #[test]
    fn centers_are_symmetric_about_origin() {
        let g = GridSpec::square(16, 2.0).unwrap();
        assert!((g.coord(0, 0) + g.coord(0, 15)).abs() < 1e-15);
        assert!((g.h(0) - 0.25).abs() < 1e-15);
        let c = ScalarField::constant(g, 1.0).center_of_mass();
        assert!(c[0].abs() < 1e-14 && c[1].abs() < 1e-14);
    }

    #[test]
    fn sample_reproduces_affine_fields() {
        let g = GridSpec::square(32, 1.0).unwrap();
        let f = ScalarField::from_fn(g, |x| 1.0 + 2.0 * x[0] - 0.5 * x[1]);
        let v = f.sample([0.123, -0.3]);
        assert!((v - (1.0 + 0.246 + 0.15)).abs() < 1e-12);
    }

    #[test]
    fn neighbours_respect_box_edges() {
        let g = GridSpec::square(8, 1.0).unwrap();
        assert_eq!(g.neighbors(0).count(), 2);
        assert_eq!(g.neighbors(g.idx(3, 3)).count(), 4);
        let g1 = GridSpec::new_1d(8, 1.0).unwrap();
        assert_eq!(g1.neighbors(3).count(), 2);
    }
}
