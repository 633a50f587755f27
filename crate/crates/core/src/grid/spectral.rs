//! Fast sine/cosine transform solvers for the 5-point Laplacian.
//!
//! Cell-centered unknowns with homogeneous Dirichlet data on the box faces
//! diagonalize under DST-II/DST-III; homogeneous Neumann data under
//! DCT-II/DCT-III. Both transforms are unnormalized in `rustdct`, with
//! `T3(T2(x)) = (N/2) x`.

use std::f64::consts::PI;
use std::sync::Arc;

use rustdct::{DctPlanner, TransformType2And3};

use super::{GridSpec, ScalarField};
use crate::error::{Error, Result};

type Plan = Arc<dyn TransformType2And3<f64>>;

/// Minimum distance (cells) between a Poisson right-hand side and the box edge.
pub const POISSON_MARGIN: usize = 4;

#[derive(Clone, Copy)]
enum Kind {
    Dst2,
    Dst3,
    Dct2,
    Dct3,
}

fn run(plan: &Plan, kind: Kind, row: &mut [f64], scratch: &mut [f64]) {
    match kind {
        Kind::Dst2 => plan.process_dst2_with_scratch(row, scratch),
        Kind::Dst3 => plan.process_dst3_with_scratch(row, scratch),
        Kind::Dct2 => plan.process_dct2_with_scratch(row, scratch),
        Kind::Dct3 => plan.process_dct3_with_scratch(row, scratch),
    }
}

fn rows(buf: &mut [f64], width: usize, plan: &Plan, kind: Kind) {
    let scratch_len = plan.get_scratch_len();
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        buf.par_chunks_mut(width)
            .for_each_init(|| vec![0.0; scratch_len], |s, row| run(plan, kind, row, s));
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut s = vec![0.0; scratch_len];
        for row in buf.chunks_mut(width) {
            run(plan, kind, row, &mut s);
        }
    }
}

/// Writes the `ny x nx` transpose of the row-major `nx x ny` buffer `src`.
pub(crate) fn transpose(src: &[f64], nx: usize, ny: usize, dst: &mut [f64]) {
    const B: usize = 32;
    for jb in (0..ny).step_by(B) {
        for ib in (0..nx).step_by(B) {
            for j in jb..(jb + B).min(ny) {
                for i in ib..(ib + B).min(nx) {
                    dst[i * ny + j] = src[j * nx + i];
                }
            }
        }
    }
}

/// Separable transform of a row-major `nx x ny` buffer (`ny == 1` skips the y pass).
struct Separable {
    nx: usize,
    ny: usize,
    px: Plan,
    py: Option<Plan>,
    tmp: Vec<f64>,
}

impl Separable {
    fn new(nx: usize, ny: usize) -> Self {
        let mut planner = DctPlanner::new();
        let px = planner.plan_dct2(nx);
        let py = (ny > 1).then(|| planner.plan_dct2(ny));
        Self { nx, ny, px, py, tmp: vec![0.0; nx * ny] }
    }

    fn apply(&mut self, buf: &mut [f64], kind: Kind) {
        rows(buf, self.nx, &self.px, kind);
        if let Some(py) = &self.py {
            transpose(buf, self.nx, self.ny, &mut self.tmp);
            rows(&mut self.tmp, self.ny, py, kind);
            transpose(&self.tmp, self.ny, self.nx, buf);
        }
    }
}

/// Symbol `4 sin^2(pi m / 2N) / h^2` of the 1D second difference for mode `m`.
fn symbol(m: usize, n: usize, h: f64) -> f64 {
    let s = (PI * m as f64 / (2.0 * n as f64)).sin();
    4.0 * s * s / (h * h)
}

/// Reusable solver for `-Lap_h w = f` with `w = 0` on the box faces.
pub struct DirichletPoisson {
    nx: usize,
    ny: usize,
    inv_eig: Vec<f64>,
    sep: Separable,
}

impl DirichletPoisson {
    /// Solver on an `nx x ny` block of cells with spacings `hx, hy` (`ny == 1` for 1D).
    pub fn new(nx: usize, ny: usize, hx: f64, hy: f64) -> Self {
        let scale = 2.0 / nx as f64 * if ny > 1 { 2.0 / ny as f64 } else { 1.0 };
        let mut inv_eig = vec![0.0; nx * ny];
        for j in 0..ny {
            let ly = if ny > 1 { symbol(j + 1, ny, hy) } else { 0.0 };
            for i in 0..nx {
                inv_eig[j * nx + i] = scale / (symbol(i + 1, nx, hx) + ly);
            }
        }
        Self { nx, ny, inv_eig, sep: Separable::new(nx, ny) }
    }

    pub fn for_grid(grid: &GridSpec) -> Self {
        Self::new(grid.nx(), grid.ny(), grid.h(0), grid.h(1))
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Replaces the right-hand side in `buf` by the solution.
    pub fn solve_in_place(&mut self, buf: &mut [f64]) {
        debug_assert_eq!(buf.len(), self.len());
        self.sep.apply(buf, Kind::Dst2);
        for (b, s) in buf.iter_mut().zip(&self.inv_eig) {
            *b *= s;
        }
        self.sep.apply(buf, Kind::Dst3);
    }
}

/// Reusable exact propagator `exp(s Lap_h)` with homogeneous Neumann faces.
pub struct NeumannHeat {
    eig: Vec<f64>,
    scale: f64,
    sep: Separable,
}

impl NeumannHeat {
    pub fn for_grid(grid: &GridSpec) -> Self {
        let (nx, ny) = (grid.nx(), grid.ny());
        let mut eig = vec![0.0; nx * ny];
        for j in 0..ny {
            let ly = if ny > 1 { symbol(j, ny, grid.h(1)) } else { 0.0 };
            for i in 0..nx {
                eig[j * nx + i] = symbol(i, nx, grid.h(0)) + ly;
            }
        }
        let scale = 2.0 / nx as f64 * if ny > 1 { 2.0 / ny as f64 } else { 1.0 };
        Self { eig, scale, sep: Separable::new(nx, ny) }
    }

    pub fn propagate_in_place(&mut self, buf: &mut [f64], s: f64) {
        self.sep.apply(buf, Kind::Dct2);
        for (b, l) in buf.iter_mut().zip(&self.eig) {
            *b *= self.scale * (-s * l).exp();
        }
        self.sep.apply(buf, Kind::Dct3);
    }
}

/// Solves `-Lap_h w = rhs` with `w = 0` on the box boundary.
///
/// The box stands in for the whole space, so a right-hand side reaching
/// within [`POISSON_MARGIN`] cells of the edge is rejected.
pub fn poisson_solve(rhs: &ScalarField) -> Result<ScalarField> {
    rhs.check_finite("rhs")?;
    if let Some(m) = rhs.support_margin(0.0) {
        if m < POISSON_MARGIN {
            return Err(Error::SupportTouchesBoundary { cells: m });
        }
    }
    let mut buf = rhs.values().to_vec();
    DirichletPoisson::for_grid(rhs.grid()).solve_in_place(&mut buf);
    ScalarField::from_vec(*rhs.grid(), buf)
}

/// Exact solution of `v_t = Lap_h v` over time `s` with no-flux box faces.
pub fn heat_step(u: &ScalarField, s: f64) -> Result<ScalarField> {
    u.check_finite("u")?;
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::InvalidParameter(format!("heat step duration must be >= 0, got {s}")));
    }
    if s == 0.0 {
        return Ok(u.clone());
    }
    let mut buf = u.values().to_vec();
    NeumannHeat::for_grid(u.grid()).propagate_in_place(&mut buf, s);
    ScalarField::from_vec(*u.grid(), buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump(g: GridSpec) -> ScalarField {
        ScalarField::from_fn(g, |x| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            if r2 < 0.25 {
                (0.25 - r2).powi(3) * 100.0
            } else {
                0.0
            }
        })
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let g = GridSpec::square(32, 1.0).unwrap();
        let w = poisson_solve(&ScalarField::zeros(g)).unwrap();
        assert!(w.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn inverts_the_discrete_laplacian() {
        let g = GridSpec::new_2d(48, 40, 2.0, 1.6).unwrap();
        let v = bump(g);
        let rhs = v.laplacian().map(|x| -x);
        let w = poisson_solve(&rhs).unwrap();
        assert!(w.linf_distance(&v) < 1e-10 * v.max());
    }

    #[test]
    fn residual_is_at_rounding_level() {
        let g = GridSpec::square(64, 1.0).unwrap();
        let rhs = ScalarField::from_fn(g, |x| if x[0].abs() < 0.3 && x[1].abs() < 0.2 { 1.0 } else { 0.0 });
        let w = poisson_solve(&rhs).unwrap();
        let res = &w.laplacian().map(|x| -x) - &rhs;
        assert!(res.values().iter().all(|r| r.abs() <= 1e-10));
    }

    #[test]
    fn one_dimensional_indicator_matches_closed_form() {
        // -w'' = chi_{|x|<a} on (-1, 1), w(+-1) = 0.
        let a = 0.25;
        let exact = |x: f64| {
            let x = x.abs();
            if x < a {
                a * (1.0 - a) + 0.5 * (a * a - x * x)
            } else {
                a * (1.0 - x)
            }
        };
        let mut errs = Vec::new();
        for n in [64, 128] {
            let g = GridSpec::new_1d(n, 2.0).unwrap();
            let rhs = ScalarField::from_fn(g, |x| if x[0].abs() < a { 1.0 } else { 0.0 });
            let w = poisson_solve(&rhs).unwrap();
            let err = (0..n).map(|k| (w.values()[k] - exact(g.center(k)[0])).abs()).fold(0.0, f64::max);
            errs.push(err);
        }
        let h = 2.0 / 128.0;
        assert!(errs[1] < h * h, "errors {errs:?}");
    }

    #[test]
    fn flags_support_near_the_edge() {
        let g = GridSpec::square(32, 1.0).unwrap();
        let mut rhs = ScalarField::zeros(g);
        rhs.values_mut()[g.idx(1, 16)] = 1.0;
        assert!(matches!(poisson_solve(&rhs), Err(Error::SupportTouchesBoundary { .. })));
    }

    #[test]
    fn heat_identity_and_constants() {
        let g = GridSpec::square(16, 1.0).unwrap();
        let u = bump(g);
        assert_eq!(heat_step(&u, 0.0).unwrap(), u);
        let c = heat_step(&ScalarField::constant(g, 3.5), 0.7).unwrap();
        assert!(c.values().iter().all(|v| (v - 3.5).abs() < 1e-12));
    }

    #[test]
    fn heat_lowest_mode_decays_at_discrete_rate() {
        let g = GridSpec::new_2d(32, 24, 2.0, 1.5).unwrap();
        let n = g.nx();
        let mode = ScalarField::from_fn(g, |x| {
            let c = g.to_cell_coords(x);
            (PI * (c[0] + 0.5) / n as f64).cos()
        });
        let s = 0.3;
        let lam = symbol(1, n, g.h(0));
        let v = heat_step(&mode, s).unwrap();
        let expect = mode.map(|x| x * (-lam * s).exp());
        assert!(v.linf_distance(&expect) < 1e-12);
    }

    #[test]
    fn heat_conserves_mass_and_bounds() {
        let g = GridSpec::square(32, 1.0).unwrap();
        let u = ScalarField::from_fn(g, |x| if x[0] > 0.2 { 2.0 } else { 0.5 });
        let v = heat_step(&u, 0.05).unwrap();
        assert!((v.integral() - u.integral()).abs() < 1e-12 * u.integral());
        assert!(v.min() >= 0.5 - 1e-12 && v.max() <= 2.0 + 1e-12);
    }

    #[test]
    fn heat_semigroup() {
        let g = GridSpec::square(24, 1.0).unwrap();
        let u = bump(g);
        let a = heat_step(&heat_step(&u, 0.01).unwrap(), 0.02).unwrap();
        let b = heat_step(&u, 0.03).unwrap();
        assert!(a.linf_distance(&b) < 1e-12);
    }
}
