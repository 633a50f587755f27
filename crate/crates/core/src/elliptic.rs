//! The `b = D = 0` path: `rho - Lap w = rho0 + eta`, `w (1 - rho) = 0`,
//! solved as an obstacle problem for the time-integrated pressure `w`.

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleOptions {
    /// Bound on `||min(w, -Lap w + c)||_inf`.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for ObstacleOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_sweeps: 200_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleSolution {
    pub w: ScalarField,
    pub rho: ScalarField,
    pub active: Vec<bool>,
    pub kkt_residual: f64,
    /// L1 amount removed when clipping the recovered density to `[0, 1]`.
    pub clipped: f64,
    pub sweeps: usize,
}

/// Minimizer of `1/2 |grad w|^2 + int c w` over `w >= 0`, i.e.
/// `w >= 0`, `-Lap w + c >= 0`, `w (-Lap w + c) = 0`, with `w = 0` on the box faces.
pub fn obstacle_solve_general(
    c: &ScalarField,
    warm: Option<&ScalarField>,
    opts: &ObstacleOptions,
) -> Result<(ScalarField, f64, usize)> {
    c.check_finite("c")?;
    let g = *c.grid();
    let mut w = match warm {
        Some(w0) => {
            w0.same_grid(c)?;
            w0.values().iter().map(|v| v.max(0.0)).collect()
        }
        None => vec![0.0; g.len()],
    };
    let cv = c.values();
    let sweeper = Sweeper::new(&g);
    // cells that may ever carry w > 0 are those reachable from {c < 0}
    let seed: Vec<usize> = (0..g.len()).filter(|&k| cv[k] < 0.0 || w[k] > 0.0).collect();
    if seed.is_empty() {
        return Ok((ScalarField::zeros(g), 0.0, 0));
    }
    let mut bbox = BBox::around(&g, &seed, 2);
    let mut sweeps = 0;
    loop {
        let check_every = 8;
        let mut res = f64::INFINITY;
        while sweeps < opts.max_sweeps {
            for _ in 0..check_every {
                sweeper.sweep(&mut w, cv, &bbox);
            }
            sweeps += check_every;
            res = sweeper.residual(&w, cv, &bbox);
            if res <= opts.tol {
                break;
            }
        }
        let grown = bbox.grow_if_needed(&g, &w, 2);
        if res <= opts.tol && !grown {
            let full = sweeper.residual(&w, cv, &BBox::full(&g));
            if full <= opts.tol {
                return Ok((ScalarField::from_vec(g, w)?, full, sweeps));
            }
            bbox = BBox::full(&g);
        }
        if sweeps >= opts.max_sweeps {
            let full = sweeper.residual(&w, cv, &BBox::full(&g));
            return Err(Error::NoConvergence { iters: sweeps, residuals: vec![full] });
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct BBox {
    i0: usize,
    i1: usize,
    j0: usize,
    j1: usize,
}

impl BBox {
    fn full(g: &GridSpec) -> Self {
        Self { i0: 0, i1: g.nx() - 1, j0: 0, j1: g.ny() - 1 }
    }

    fn around(g: &GridSpec, cells: &[usize], pad: usize) -> Self {
        let mut b = Self { i0: usize::MAX, i1: 0, j0: usize::MAX, j1: 0 };
        for &k in cells {
            let (i, j) = g.ij(k);
            b.i0 = b.i0.min(i);
            b.i1 = b.i1.max(i);
            b.j0 = b.j0.min(j);
            b.j1 = b.j1.max(j);
        }
        b.pad(g, pad)
    }

    fn pad(mut self, g: &GridSpec, pad: usize) -> Self {
        self.i0 = self.i0.saturating_sub(pad);
        self.j0 = self.j0.saturating_sub(pad);
        self.i1 = (self.i1 + pad).min(g.nx() - 1);
        self.j1 = (self.j1 + pad).min(g.ny() - 1);
        self
    }

    /// Pads the box when `w > 0` reaches its outermost layer.
    fn grow_if_needed(&mut self, g: &GridSpec, w: &[f64], pad: usize) -> bool {
        let at_edge = (self.j0..=self.j1).any(|j| {
            (self.i0..=self.i1).any(|i| {
                let edge = i == self.i0 || i == self.i1 || j == self.j0 || j == self.j1;
                edge && w[g.idx(i, j)] > 0.0
            })
        });
        let full = BBox::full(g);
        let is_full = self.i0 == full.i0 && self.i1 == full.i1 && self.j0 == full.j0 && self.j1 == full.j1;
        if at_edge && !is_full {
            *self = self.pad(g, pad.max((self.i1 - self.i0) / 4));
            return true;
        }
        false
    }
}

/// Red-black projected SOR for `-Lap w + c` with Dirichlet faces.
struct Sweeper {
    nx: usize,
    ny: usize,
    two_d: bool,
    inv_h2: [f64; 2],
    omega: f64,
}

impl Sweeper {
    fn new(g: &GridSpec) -> Self {
        let l = g.lengths()[0].max(if g.dim() == 2 { g.lengths()[1] } else { 0.0 });
        let h = g.h(0).max(if g.dim() == 2 { g.h(1) } else { 0.0 });
        Self {
            nx: g.nx(),
            ny: g.ny(),
            two_d: g.dim() == 2,
            inv_h2: [1.0 / (g.h(0) * g.h(0)), 1.0 / (g.h(1) * g.h(1))],
            omega: 2.0 / (1.0 + (std::f64::consts::PI * h / l).sin()),
        }
    }

    /// `(sum of neighbour terms, diagonal)` so that `-Lap w = diag w - nb`.
    #[inline]
    fn stencil(&self, w: &[f64], i: usize, j: usize) -> (f64, f64) {
        let k = j * self.nx + i;
        let mut nb = 0.0;
        let mut diag = 2.0 * self.inv_h2[0];
        if i > 0 {
            nb += w[k - 1] * self.inv_h2[0];
        } else {
            diag += self.inv_h2[0];
        }
        if i + 1 < self.nx {
            nb += w[k + 1] * self.inv_h2[0];
        } else {
            diag += self.inv_h2[0];
        }
        if self.two_d {
            diag += 2.0 * self.inv_h2[1];
            if j > 0 {
                nb += w[k - self.nx] * self.inv_h2[1];
            } else {
                diag += self.inv_h2[1];
            }
            if j + 1 < self.ny {
                nb += w[k + self.nx] * self.inv_h2[1];
            } else {
                diag += self.inv_h2[1];
            }
        }
        (nb, diag)
    }

    fn sweep(&self, w: &mut [f64], c: &[f64], b: &BBox) {
        for color in 0..2 {
            for j in b.j0..=b.j1 {
                let start = b.i0 + (b.i0 + j + color) % 2;
                for i in (start..=b.i1).step_by(2) {
                    let (nb, diag) = self.stencil(w, i, j);
                    let k = j * self.nx + i;
                    let gs = (nb - c[k]) / diag;
                    w[k] = (w[k] + self.omega * (gs - w[k])).max(0.0);
                }
            }
        }
    }

    fn residual(&self, w: &[f64], c: &[f64], b: &BBox) -> f64 {
        let mut r = 0.0_f64;
        for j in b.j0..=b.j1 {
            for i in b.i0..=b.i1 {
                let (nb, diag) = self.stencil(w, i, j);
                let k = j * self.nx + i;
                r = r.max(w[k].min(diag * w[k] - nb + c[k]).abs());
            }
        }
        r
    }
}

fn check_capacity(f: &ScalarField) -> Result<()> {
    let vol = f.grid().cell_volume();
    let excess: f64 = f.values().iter().map(|v| (v - 1.0).max(0.0)).sum::<f64>() * vol;
    let room: f64 = f.values().iter().map(|v| (1.0 - v).max(0.0)).sum::<f64>() * vol;
    if excess > room * (1.0 + 1e-12) {
        return Err(Error::CapacityExceeded { mass: f.integral(), volume: f.grid().box_volume() });
    }
    Ok(())
}

/// `rho = clip(num + Lap w) / den` where the clip to `[0, 1]` is measured.
fn recover(num: &ScalarField, w: &ScalarField, den: impl Fn(usize) -> f64) -> (ScalarField, f64) {
    let lap = w.laplacian();
    let mut clipped = 0.0;
    let vals = num
        .values()
        .iter()
        .zip(lap.values())
        .enumerate()
        .map(|(k, (f, l))| {
            let r = (f + l) / den(k);
            let c = r.clamp(0.0, 1.0);
            clipped += (r - c).abs();
            c
        })
        .collect();
    let g = *num.grid();
    (ScalarField::from_vec(g, vals).expect("same grid"), clipped * g.cell_volume())
}

/// Obstacle problem with source `f = rho0 + eta`: `c = 1 - f`.
pub fn obstacle_solve(f: &ScalarField, tol: f64) -> Result<ObstacleSolution> {
    obstacle_solve_with(f, &ObstacleOptions { tol, ..Default::default() }, None)
}

pub fn obstacle_solve_with(f: &ScalarField, opts: &ObstacleOptions, warm: Option<&ScalarField>) -> Result<ObstacleSolution> {
    f.check_finite("f")?;
    if f.min() < 0.0 {
        return Err(Error::InvalidParameter("obstacle source must be nonnegative".into()));
    }
    check_capacity(f)?;
    let c = f.map(|v| 1.0 - v);
    let (w, kkt_residual, sweeps) = obstacle_solve_general(&c, warm, opts)?;
    let (rho, clipped) = recover(f, &w, |_| 1.0);
    let active = w.values().iter().map(|&v| v > 0.0).collect();
    Ok(ObstacleSolution { w, rho, active, kkt_residual, clipped, sweeps })
}

/// `eta <- n0 - (n0 - eta) exp(-tau rho)`, exact for `rho` frozen over the step.
pub fn eta_step_exact(eta: &ScalarField, rho: &ScalarField, n0: &ScalarField, tau: f64) -> Result<ScalarField> {
    eta.same_grid(rho)?;
    eta.same_grid(n0)?;
    if !(tau >= 0.0) {
        return Err(Error::InvalidParameter("tau must be nonnegative".into()));
    }
    let v = eta
        .values()
        .iter()
        .zip(rho.values())
        .zip(n0.values())
        .map(|((e, r), n)| n - (n - e) * (-tau * r).exp())
        .collect();
    ScalarField::from_vec(*eta.grid(), v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EllipticState {
    pub step: usize,
    pub t: f64,
    pub rho: ScalarField,
    pub w: ScalarField,
    pub eta: ScalarField,
    pub kkt_residual: f64,
    pub clipped: f64,
}

/// Splitting for the `(rho, w, eta)` system: an exact `eta` update with the
/// previous density, then an obstacle solve for `rho0 + eta` warm-started
/// from the previous `w`. Returns every step, the initial state first.
pub fn evolve_elliptic(rho0: &ScalarField, n0: &ScalarField, tau: f64, t_final: f64, tol: f64) -> Result<Vec<EllipticState>> {
    rho0.same_grid(n0)?;
    rho0.check_finite("rho0")?;
    n0.check_finite("n0")?;
    if !(tau > 0.0) || !(t_final >= 0.0) {
        return Err(Error::InvalidParameter("need tau > 0 and t_final >= 0".into()));
    }
    if n0.min() < 0.0 {
        return Err(Error::InvalidParameter("n0 must be nonnegative".into()));
    }
    let g = *rho0.grid();
    let opts = ObstacleOptions { tol, ..Default::default() };
    let mut states = vec![EllipticState {
        step: 0,
        t: 0.0,
        rho: rho0.clone(),
        w: ScalarField::zeros(g),
        eta: ScalarField::zeros(g),
        kkt_residual: 0.0,
        clipped: 0.0,
    }];
    let steps = (t_final / tau).round() as usize;
    for k in 0..steps {
        let prev = states.last().expect("nonempty");
        let eta = eta_step_exact(&prev.eta, &prev.rho, n0, tau)?;
        let f = rho0 + &eta;
        let sol = obstacle_solve_with(&f, &opts, Some(&prev.w))?;
        states.push(EllipticState {
            step: k + 1,
            t: (k + 1) as f64 * tau,
            rho: sol.rho,
            w: sol.w,
            eta,
            kkt_residual: sol.kkt_residual,
            clipped: sol.clipped,
        });
    }
    Ok(states)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryState {
    pub rho: ScalarField,
    pub w: ScalarField,
    pub kkt_residual: f64,
    pub clipped: f64,
    /// `||w (1 - rho)||_1`.
    pub complementarity: f64,
}

/// Limit of the `max n0 < 1` dynamics: `(1 - n0) rho - Lap w = rho0`, `w (1 - rho) = 0`.
pub fn stationary_solve(rho0: &ScalarField, n0: &ScalarField, tol: f64) -> Result<StationaryState> {
    rho0.same_grid(n0)?;
    let sup = n0.max();
    if sup >= 1.0 - 1e-6 {
        return Err(Error::NutrientAtCapacity(sup));
    }
    if n0.min() < 0.0 || rho0.min() < 0.0 {
        return Err(Error::InvalidParameter("rho0 and n0 must be nonnegative".into()));
    }
    let c = n0.zip_map(rho0, |n, r| (1.0 - n) - r);
    let opts = ObstacleOptions { tol, ..Default::default() };
    let (w, kkt_residual, _) = obstacle_solve_general(&c, None, &opts)?;
    let nv = n0.values().to_vec();
    let (rho, clipped) = recover(rho0, &w, |k| 1.0 - nv[k]);
    let complementarity = w.values().iter().zip(rho.values()).map(|(a, r)| (a * (1.0 - r)).abs()).sum::<f64>()
        * rho.grid().cell_volume();
    Ok(StationaryState { rho, w, kkt_residual, clipped, complementarity })
}
