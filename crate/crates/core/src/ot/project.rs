//! Wasserstein projection onto `{rho <= 1}` through its dual pressure problem.
//!
//! The dual objective is `J(p) = <p^c, mu> - <p, 1>` over `p >= 0`. On the grid
//! the c-transform is evaluated as the minimum of the exact discrete transform
//! and a sub-cell transform
//!
//! ```text
//! p_sub(x_i) = p_i - sum_faces (h^2 / 2 tau) H(tau (p_i - p_j)_+ / h^2)
//! ```
//!
//! with `H(u) = u^2` up to `u = 1/2` and linear beyond. The sub-cell term is
//! what a displacement of `tau grad p` shorter than a cell costs, which the
//! exact grid transform cannot see. The scheme is accurate while each step
//! moves mass by less than half a cell (`tau |grad p| < h / 2`); beyond that
//! the flux through a face saturates and the iteration stalls. Both pieces are concave in `p`, and the
//! supergradient of `J` is `h^d (rho - 1)` where `rho` is the upwind scatter of
//! `mu` along `-grad p`, so `rho` conserves mass exactly and is nonnegative.
//!
//! `J` is maximized by a primal-dual active set (semismooth Newton) iteration
//! with Armijo backtracking, so the recorded objective never decreases. The
//! Newton systems are weighted graph Laplacians on the active set, solved by
//! conjugate gradients preconditioned with a fast sine transform Poisson solve
//! on the bounding box of the active set.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::grid::{DirichletPoisson, GridSpec, ScalarField};
use crate::ot::ctransform::ctransform_raw;
use crate::ot::pushforward::pushforward_raw;

/// Weight floor in the Newton Jacobian, relative to unit density.
const WEIGHT_FLOOR: f64 = 1e-3;
const MAX_CG_ITERS: usize = 2000;
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionOptions {
    /// Relative tolerance on `rho <= 1` and on `||p (1 - rho)||_1 / mass`.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iters: 500 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualPotential {
    pub p: ScalarField,
    pub p_c: ScalarField,
    pub tau: f64,
    pub dual_value: f64,
    /// `max(max(rho - 1)_+, ||p (1 - rho)||_1 / mass)` at exit.
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub rho: ScalarField,
    pub dual: DualPotential,
    /// `||(id + tau grad p)_# rho - mu||_1 / mass`, infinite if the map leaves the box.
    pub pushforward_residual: f64,
    /// `||p (1 - rho)||_1`.
    pub complementarity_residual: f64,
    pub iterations: usize,
    /// Dual objective after every accepted iterate, starting with the initial guess.
    pub dual_history: Vec<f64>,
}

impl ProjectionResult {
    pub fn feasibility_violation(&self) -> f64 {
        self.rho.values().iter().fold(0.0_f64, |m, &r| m.max(r - 1.0))
    }
}

struct Problem<'a> {
    g: GridSpec,
    tau: f64,
    mu: &'a [f64],
    /// Huber knee: at most this fraction of a cell leaves through one face.
    cap: f64,
    /// `tau / h_a^2`: fraction of a cell moved per unit pressure jump.
    speed: [f64; 2],
    vol: f64,
}

struct Eval {
    j: f64,
    pc: Vec<f64>,
    rho: Vec<f64>,
    jump: Vec<bool>,
}

fn huber(u: f64, a: f64) -> f64 {
    if u <= a {
        u * u
    } else {
        2.0 * a * u - a * a
    }
}

impl<'a> Problem<'a> {
    fn new(mu: &'a ScalarField, tau: f64) -> Self {
        let g = *mu.grid();
        Self {
            g,
            tau,
            mu: mu.values(),
            cap: 0.5,
            speed: [tau / (g.h(0) * g.h(0)), tau / (g.h(1) * g.h(1))],
            vol: g.cell_volume(),
        }
    }

    /// Visits every interior face once as `(k, neighbour, axis)`.
    fn for_each_face(&self, mut f: impl FnMut(usize, usize, usize)) {
        let (nx, ny) = (self.g.nx(), self.g.ny());
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                if i + 1 < nx {
                    f(k, k + 1, 0);
                }
                if self.g.dim() == 2 && j + 1 < ny {
                    f(k, k + nx, 1);
                }
            }
        }
    }

    fn evaluate(&self, p: &[f64]) -> Eval {
        let mut psub = p.to_vec();
        self.for_each_face(|k, n, a| {
            let d = p[k] - p[n];
            let half_cost = 0.5 / self.speed[a];
            if d > 0.0 {
                psub[k] -= half_cost * huber(self.speed[a] * d, self.cap);
            } else if d < 0.0 {
                psub[n] -= half_cost * huber(-self.speed[a] * d, self.cap);
            }
        });
        let (exact, arg) = ctransform_raw(&self.g, p, self.tau);
        let mut jump = vec![false; p.len()];
        let mut pc = psub;
        for k in 0..p.len() {
            if exact[k] < pc[k] {
                pc[k] = exact[k];
                jump[k] = true;
            }
        }
        let mut rho = self.mu.to_vec();
        for k in 0..p.len() {
            if jump[k] && self.mu[k] > 0.0 {
                rho[k] -= self.mu[k];
                rho[arg[k]] += self.mu[k];
            }
        }
        self.for_each_face(|k, n, a| {
            let d = p[k] - p[n];
            let (src, dst) = if d > 0.0 { (k, n) } else if d < 0.0 { (n, k) } else { return };
            if jump[src] {
                return;
            }
            let flux = self.mu[src] * (self.speed[a] * d.abs()).min(self.cap);
            rho[src] -= flux;
            rho[dst] += flux;
        });
        let j = self.vol * pc.iter().zip(self.mu).zip(p).map(|((c, m), q)| c * m - q).sum::<f64>();
        Eval { j, pc, rho, jump }
    }

    fn residuals(&self, p: &[f64], ev: &Eval, mass: f64) -> (f64, f64) {
        let feas = ev.rho.iter().zip(p).fold(0.0_f64, |m, (&r, &q)| {
            let deficit = if q > 0.0 { 1.0 - r } else { 0.0 };
            m.max(r - 1.0).max(deficit)
        });
        let comp = self.vol * p.iter().zip(&ev.rho).map(|(q, r)| q * (1.0 - r).abs()).sum::<f64>();
        (feas, comp / mass)
    }
}

/// Conjugate gradients for the Newton system on the active set, restricted to
/// the active set's bounding box.
struct NewtonSystem {
    sx: usize,
    sy: usize,
    active: Vec<bool>,
    diag: Vec<f64>,
    /// Coupling to the `+x` and `+y` neighbour (zero unless both are active).
    kx: Vec<f64>,
    ky: Vec<f64>,
}

impl NewtonSystem {
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let (sx, sy) = (self.sx, self.sy);
        for k in 0..sx * sy {
            out[k] = if self.active[k] { self.diag[k] * x[k] } else { 0.0 };
        }
        for b in 0..sy {
            for a in 0..sx {
                let k = b * sx + a;
                if a + 1 < sx && self.kx[k] != 0.0 {
                    out[k] -= self.kx[k] * x[k + 1];
                    out[k + 1] -= self.kx[k] * x[k];
                }
                if b + 1 < sy && self.ky[k] != 0.0 {
                    out[k] -= self.ky[k] * x[k + sx];
                    out[k + sx] -= self.ky[k] * x[k];
                }
            }
        }
    }

    fn solve(&self, rhs: &[f64], pre: &mut DirichletPoisson, atol: f64) -> Option<Vec<f64>> {
        let n = rhs.len();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let inf = |a: &[f64]| a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let precondition = |r: &[f64], pre: &mut DirichletPoisson| {
            let mut z = r.to_vec();
            pre.solve_in_place(&mut z);
            for (zk, &act) in z.iter_mut().zip(&self.active) {
                if !act {
                    *zk = 0.0;
                }
            }
            z
        };
        let mut x = vec![0.0; n];
        let mut r = rhs.to_vec();
        if inf(&r) <= atol {
            return Some(x);
        }
        let mut z = precondition(&r, pre);
        let mut d = z.clone();
        let mut rz = dot(&r, &z);
        let mut q = vec![0.0; n];
        for _ in 0..MAX_CG_ITERS {
            self.apply(&d, &mut q);
            let dq = dot(&d, &q);
            if !(dq > 0.0) {
                return None;
            }
            let alpha = rz / dq;
            for k in 0..n {
                x[k] += alpha * d[k];
                r[k] -= alpha * q[k];
            }
            if inf(&r) <= atol {
                return Some(x);
            }
            z = precondition(&r, pre);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..n {
                d[k] = z[k] + beta * d[k];
            }
        }
        None
    }
}

/// Solver state shared by the iterations of one projection.
struct Solver<'a> {
    pb: Problem<'a>,
    tol: f64,
    mass: f64,
    plans: HashMap<(usize, usize), DirichletPoisson>,
}

impl Solver<'_> {
    /// Semismooth Newton direction for the current iterate, or `None` if the
    /// linear solve breaks down.
    fn newton_direction(&mut self, p: &[f64], ev: &Eval) -> Option<Vec<f64>> {
        let g = self.pb.g;
        let (nx, ny) = (g.nx(), g.ny());
        let c = g.h_min() * g.h_min() / self.pb.tau;
        let active: Vec<bool> = (0..p.len()).map(|k| p[k] - c * (1.0 - ev.rho[k]) > 0.0).collect();
        let mut dir: Vec<f64> = (0..p.len()).map(|k| if active[k] { 0.0 } else { -p[k] }).collect();
        let (mut i0, mut i1, mut j0, mut j1) = (usize::MAX, 0, usize::MAX, 0);
        for (k, _) in active.iter().enumerate().filter(|(_, &a)| a) {
            let (i, j) = (k % nx, k / nx);
            i0 = i0.min(i);
            i1 = i1.max(i);
            j0 = j0.min(j);
            j1 = j1.max(j);
        }
        if i0 == usize::MAX {
            return Some(dir);
        }
        // pad so every face of an active cell lies inside the box, and keep at
        // least three cells per side for the transform preconditioner
        let pad = |lo: usize, hi: usize, n: usize| {
            let (mut lo, mut hi) = (lo.saturating_sub(1), (hi + 1).min(n - 1));
            while hi - lo < 2 && (lo > 0 || hi + 1 < n) {
                lo = lo.saturating_sub(1);
                hi = (hi + 1).min(n - 1);
            }
            (lo, hi)
        };
        let (i0, i1) = pad(i0, i1, nx);
        let (j0, j1) = if g.dim() == 2 { pad(j0, j1, ny) } else { (0, 0) };
        let (sx, sy) = (i1 - i0 + 1, j1 - j0 + 1);
        let full = |a: usize, b: usize| (j0 + b) * nx + i0 + a;

        let weight = |k: usize, n: usize, a: usize| -> f64 {
            let d = p[k] - p[n];
            let up = if d > 0.0 {
                k
            } else if d < 0.0 {
                n
            } else if self.pb.mu[k] >= self.pb.mu[n] {
                k
            } else {
                n
            };
            let w = if !ev.jump[up] && self.pb.speed[a] * d.abs() < self.pb.cap { self.pb.mu[up] } else { 0.0 };
            self.pb.speed[a] * w.max(WEIGHT_FLOOR)
        };

        let m = sx * sy;
        let mut sys = NewtonSystem {
            sx,
            sy,
            active: vec![false; m],
            diag: vec![0.0; m],
            kx: vec![0.0; m],
            ky: vec![0.0; m],
        };
        let mut rhs = vec![0.0; m];
        for b in 0..sy {
            for a in 0..sx {
                let s = b * sx + a;
                let k = full(a, b);
                sys.active[s] = active[k];
                if active[k] {
                    rhs[s] = ev.rho[k] - 1.0;
                }
            }
        }
        // faces between cells of the box, plus faces leaving the box (only
        // relevant where the box was clamped at the grid edge, i.e. never)
        for b in 0..sy {
            for a in 0..sx {
                let s = b * sx + a;
                let k = full(a, b);
                let couple = |n: usize, axis: usize, other: Option<usize>, sys: &mut NewtonSystem, rhs: &mut [f64]| {
                    let (ak, an) = (active[k], active[n]);
                    if !ak && !an {
                        return;
                    }
                    let w = weight(k, n, axis);
                    let o = other.expect("neighbour of an active cell lies in the padded box");
                    if ak {
                        sys.diag[s] += w;
                    }
                    if an {
                        sys.diag[o] += w;
                    }
                    match (ak, an) {
                        (true, true) => {
                            if axis == 0 {
                                sys.kx[s] = w;
                            } else {
                                sys.ky[s] = w;
                            }
                        }
                        (true, false) => rhs[s] -= w * p[n],
                        (false, true) => rhs[o] -= w * p[k],
                        (false, false) => {}
                    }
                };
                if a + 1 < sx {
                    couple(k + 1, 0, Some(s + 1), &mut sys, &mut rhs);
                }
                if g.dim() == 2 && b + 1 < sy {
                    couple(k + nx, 1, Some(s + sx), &mut sys, &mut rhs);
                }
            }
        }
        let pre = self
            .plans
            .entry((sx, sy))
            .or_insert_with(|| DirichletPoisson::new(sx, sy, g.h(0), g.h(1)));
        let bmax = rhs.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        let atol = (0.05 * self.tol).max(1e-3 * bmax).max(1e-14);
        let x = sys.solve(&rhs, pre, atol)?;
        for b in 0..sy {
            for a in 0..sx {
                let s = b * sx + a;
                if sys.active[s] {
                    dir[full(a, b)] = x[s];
                }
            }
        }
        Some(dir)
    }

    /// Preconditioned supergradient `(-Lap)^{-1} (rho - 1) / tau` on the whole grid.
    fn gradient_direction(&mut self, ev: &Eval) -> Vec<f64> {
        let g = self.pb.g;
        let pre = self
            .plans
            .entry((g.nx(), g.ny()))
            .or_insert_with(|| DirichletPoisson::for_grid(&g));
        let mut d: Vec<f64> = ev.rho.iter().map(|r| (r - 1.0) / self.pb.tau).collect();
        pre.solve_in_place(&mut d);
        d
    }

    /// Backtracking along `p + t dir` projected onto `p >= 0`; accepts only a
    /// nondecreasing objective.
    fn line_search(&self, p: &[f64], ev: &Eval, dir: &[f64]) -> Option<(Vec<f64>, Eval)> {
        let mut t = 1.0;
        for _ in 0..MAX_HALVINGS {
            let cand: Vec<f64> = p.iter().zip(dir).map(|(q, d)| (q + t * d).max(0.0)).collect();
            if cand != p {
                let ec = self.pb.evaluate(&cand);
                if ec.j >= ev.j {
                    return Some((cand, ec));
                }
            }
            t *= 0.5;
        }
        None
    }
}

/// Projects `mu` onto `{rho <= 1}` in the Wasserstein sense with the default
/// iteration cap.
pub fn project(mu: &ScalarField, tau: f64, tol: f64) -> Result<ProjectionResult> {
    project_with(mu, tau, &ProjectionOptions { tol, ..Default::default() }, None)
}

/// [`project`] with explicit options and an optional initial pressure.
pub fn project_with(
    mu: &ScalarField,
    tau: f64,
    opts: &ProjectionOptions,
    warm_start: Option<&ScalarField>,
) -> Result<ProjectionResult> {
    mu.check_finite("mu")?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if mu.min() < 0.0 {
        return Err(Error::InvalidParameter("mu must be nonnegative".into()));
    }
    let g = *mu.grid();
    let mass = mu.integral();
    if mass > 0.9 * g.box_volume() {
        return Err(Error::CapacityExceeded { mass, volume: g.box_volume() });
    }
    let mut p = match warm_start {
        Some(w) => {
            mu.same_grid(w)?;
            w.check_finite("warm_start")?;
            w.values().iter().map(|v| v.max(0.0)).collect()
        }
        None => vec![0.0; g.len()],
    };
    if mass == 0.0 {
        p.iter_mut().for_each(|v| *v = 0.0);
    }
    let mut solver = Solver { pb: Problem::new(mu, tau), tol: opts.tol, mass: mass.max(f64::MIN_POSITIVE), plans: HashMap::new() };
    let mut ev = solver.pb.evaluate(&p);
    let mut history = vec![ev.j];
    let mut recent: Vec<f64> = Vec::new();
    let mut iterations = 0;
    loop {
        let (feas, comp) = solver.pb.residuals(&p, &ev, solver.mass);
        let kkt = feas.max(comp);
        if feas <= opts.tol && comp <= opts.tol {
            break;
        }
        recent.push(kkt);
        if recent.len() > 5 {
            recent.remove(0);
        }
        if iterations >= opts.max_iters {
            return Err(Error::NoConvergence { iters: iterations, residuals: recent });
        }
        iterations += 1;
        let step = solver
            .newton_direction(&p, &ev)
            .and_then(|d| solver.line_search(&p, &ev, &d))
            .or_else(|| {
                let d = solver.gradient_direction(&ev);
                solver.line_search(&p, &ev, &d)
            });
        match step {
            Some((np, nev)) => {
                p = np;
                ev = nev;
                history.push(ev.j);
            }
            None => return Err(Error::NoConvergence { iters: iterations, residuals: recent }),
        }
    }
    let (feas, comp) = solver.pb.residuals(&p, &ev, solver.mass);
    let pushforward_residual = match pushforward_raw(&g, &ev.rho, &p, tau) {
        Some(pf) => pf.iter().zip(mu.values()).map(|(a, b)| (a - b).abs()).sum::<f64>() * g.cell_volume() / solver.mass,
        None => f64::INFINITY,
    };
    let dual = DualPotential {
        p: ScalarField::from_vec(g, p)?,
        p_c: ScalarField::from_vec(g, ev.pc)?,
        tau,
        dual_value: ev.j,
        kkt_residual: feas.max(comp),
    };
    Ok(ProjectionResult {
        rho: ScalarField::from_vec(g, ev.rho)?,
        dual,
        pushforward_residual,
        complementarity_residual: comp * mass,
        iterations,
        dual_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::{ctransform, pushforward};
    use proptest::prelude::*;

    fn disk(g: GridSpec, r: f64, height: f64) -> ScalarField {
        ScalarField::from_fn(g, |x| if x[0] * x[0] + x[1] * x[1] < r * r { height } else { 0.0 })
    }

    #[test]
    fn feasible_input_is_its_own_projection() {
        let g = GridSpec::square(32, 1.0).unwrap();
        let mu = disk(g, 0.5, 0.8);
        let res = project(&mu, 0.01, 1e-8).unwrap();
        assert_eq!(res.rho, mu);
        assert!(res.dual.p.values().iter().all(|&v| v == 0.0));
        assert_eq!(res.iterations, 0);
    }

    #[test]
    fn one_step_radial_oracle() {
        // mu = (1 + tau n0) chi_{B_r}: rho = chi_{B_r'} with r' = r (1 + tau n0)^{1/2},
        // p close to (n0 / 4) (r'^2 - |x|^2)_+
        let g = GridSpec::square(128, 1.0).unwrap();
        let (tau, n0, r) = (0.01, 2.0, 0.5);
        let mu = disk(g, r, 1.0 + tau * n0);
        let res = project(&mu, tau, 1e-8).unwrap();
        let rp = r * (1.0 + tau * n0).sqrt();
        let h = g.h(0);
        let pmax = n0 / 4.0 * rp * rp;
        for k in 0..g.len() {
            let c = g.center(k);
            let rad = (c[0] * c[0] + c[1] * c[1]).sqrt();
            let rho = res.rho.values()[k];
            if rad < rp - h {
                assert!((rho - 1.0).abs() < 1e-6, "rho = {rho} at r = {rad}");
            }
            if rad > rp + h {
                assert_eq!(rho, 0.0, "mass outside the oracle disk at r = {rad}");
            }
            let oracle = (n0 / 4.0 * (rp * rp - rad * rad)).max(0.0);
            let p = res.dual.p.values()[k];
            assert!((p - oracle).abs() < 0.05 * pmax, "p = {p}, oracle = {oracle} at r = {rad}");
        }
        assert!((res.rho.integral() - mu.integral()).abs() < 1e-10 * mu.integral());
    }

    #[test]
    fn one_dimensional_affine_oracle() {
        // mu = m chi_{[-a,a]}: the optimal map is x -> x / m, so
        // p = (1 - 1/m) ((m a)^2 - x^2) / (2 tau) on [-m a, m a]
        let g = GridSpec::new_1d(256, 2.0).unwrap();
        let (tau, a, m) = (1e-3, 0.4, 1.004);
        let mu = ScalarField::from_fn(g, |x| if x[0].abs() < a { m } else { 0.0 });
        let res = project(&mu, tau, 1e-10).unwrap();
        let pmax = (1.0 - 1.0 / m) * (m * a).powi(2) / (2.0 * tau);
        for i in 0..g.nx() {
            let x = g.coord(0, i);
            let oracle = ((1.0 - 1.0 / m) * ((m * a).powi(2) - x * x) / (2.0 * tau)).max(0.0);
            assert!((res.dual.p.at(i, 0) - oracle).abs() < 0.01 * pmax, "x = {x}");
        }
    }

    #[test]
    fn pushforward_recovers_mu_to_first_order() {
        // The face scatter moves fractions of boundary cells, which a bilinear
        // pushforward cannot undo exactly: the residual is O(tau) and comes from
        // the interface ring.
        let g = GridSpec::square(128, 1.0).unwrap();
        let n0 = 2.0;
        let residual = |tau: f64| {
            let mu = disk(g, 0.5, 1.0 + tau * n0);
            let res = project(&mu, tau, 1e-8).unwrap();
            let back = pushforward(&res.rho, &res.dual.p, tau).unwrap();
            let err = back.l1_distance(&mu) / mu.integral();
            assert!((res.pushforward_residual - err).abs() < 1e-12);
            err
        };
        let (coarse, fine) = (residual(2e-4), residual(1e-4));
        assert!(fine <= 1e-3, "pushforward residual {fine}");
        assert!((coarse / fine - 2.0).abs() < 0.2, "ratio {}", coarse / fine);
    }

    #[test]
    fn dual_potential_invariants() {
        let g = GridSpec::square(48, 1.0).unwrap();
        let tau = 0.005;
        let mu = ScalarField::from_fn(g, |x| {
            let r2 = x[0] * x[0] + 2.0 * x[1] * x[1];
            if r2 < 0.2 {
                1.0 + tau * (3.0 + x[0])
            } else {
                0.0
            }
        });
        let res = project(&mu, tau, 1e-8).unwrap();
        let d = &res.dual;
        assert!(d.p.min() >= 0.0);
        assert!(d.dual_value.is_finite());
        // p_c lies below the exact transform, hence below p(y) + |x-y|^2 / 2 tau
        let exact = ctransform(&d.p, tau).unwrap();
        assert!(d.p_c.values().iter().zip(exact.values()).all(|(a, b)| a <= b));
        assert!(res.dual_history.windows(2).all(|w| w[1] >= w[0]));
        assert!(res.feasibility_violation() <= 1e-8);
        assert!(res.complementarity_residual <= 1e-8 * mu.integral());
    }

    #[test]
    fn projection_is_idempotent() {
        let g = GridSpec::square(48, 1.0).unwrap();
        let mu = disk(g, 0.4, 1.05);
        let once = project(&mu, 0.01, 1e-8).unwrap();
        let twice = project(&once.rho, 0.01, 1e-8).unwrap();
        assert!(twice.rho.linf_distance(&once.rho) <= 1e-8);
    }

    #[test]
    fn capacity_guard() {
        let g = GridSpec::square(16, 1.0).unwrap();
        let mu = ScalarField::constant(g, 0.95);
        assert!(matches!(project(&mu, 0.01, 1e-6), Err(Error::CapacityExceeded { .. })));
    }

    #[test]
    fn warm_start_converges_to_the_same_solution() {
        let g = GridSpec::square(64, 1.0).unwrap();
        let mu = disk(g, 0.5, 1.02);
        let cold = project(&mu, 0.01, 1e-9).unwrap();
        let guess = cold.dual.p.map(|v| 0.7 * v);
        let warm = project_with(&mu, 0.01, &ProjectionOptions { tol: 1e-9, max_iters: 500 }, Some(&guess)).unwrap();
        assert!(warm.rho.linf_distance(&cold.rho) < 1e-6);
        assert!(warm.dual.p.linf_distance(&cold.dual.p) < 1e-6 * (1.0 + cold.dual.p.max()));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn random_patches_satisfy_the_contract(
            cx in -0.2f64..0.2, cy in -0.2f64..0.2,
            a in 0.2f64..0.45, b in 0.2f64..0.45,
            growth in 0.0f64..5.0, tau in 0.001f64..0.02,
        ) {
            let g = GridSpec::square(32, 1.0).unwrap();
            let mu = ScalarField::from_fn(g, |x| {
                let inside = ((x[0] - cx) / a).powi(2) + ((x[1] - cy) / b).powi(2) < 1.0;
                if inside { 1.0 + tau * growth * (1.0 + x[0]) } else { 0.0 }
            });
            let res = project(&mu, tau, 1e-7).unwrap();
            let m = mu.integral();
            prop_assert!((res.rho.integral() - m).abs() <= 1e-8 * m);
            prop_assert!(res.feasibility_violation() <= 1e-7);
            prop_assert!(res.rho.min() >= 0.0);
            prop_assert!(res.complementarity_residual <= 1e-7 * m);
            prop_assert!(res.dual_history.windows(2).all(|w| w[1] >= w[0]));
        }
    }
}
