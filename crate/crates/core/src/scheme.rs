//! Time stepping of the coupled density/nutrient system.
//!
//! Each step projects `rho (1 + tau (n - b))` onto `{rho <= 1}` and then updates
//! the nutrient by `n <- e^{tau D Lap} (n (1 - tau rho_new))`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::boundary_radii;
use crate::grid::{bv_a, heat_step, norms, rotation_generator, GridSpec, ScalarField};
use crate::ot::{project_with, ProjectionOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeParams {
    pub tau: f64,
    /// Death rate.
    pub b: f64,
    /// Nutrient diffusivity.
    pub diffusion: f64,
    pub t_final: f64,
    /// Relative projection tolerance.
    pub tol: f64,
    pub max_iters: usize,
    pub grid: GridSpec,
}

impl SchemeParams {
    pub fn new(grid: GridSpec, tau: f64, t_final: f64) -> Self {
        Self { tau, b: 0.0, diffusion: 0.0, t_final, tol: 1e-6, max_iters: 500, grid }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if !(self.b >= 0.0 && self.diffusion >= 0.0) {
            return bad("b and D must be nonnegative".into());
        }
        if self.tau * self.b >= 1.0 {
            return bad(format!("tau * b = {} must be < 1 for the monotone update", self.tau * self.b));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return bad(format!("t_final must be >= 0, got {}", self.t_final));
        }
        if !(self.tol > 0.0) {
            return bad("tol must be positive".into());
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.tau).round() as usize
    }

    fn projection(&self) -> ProjectionOptions {
        ProjectionOptions { tol: self.tol, max_iters: self.max_iters }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub step: usize,
    pub t: f64,
    pub rho: ScalarField,
    pub n: ScalarField,
    /// Pressure of the last projection.
    pub p: ScalarField,
    /// Consumed nutrient `n0 - n`; only tracked when `D = 0`.
    pub eta: Option<ScalarField>,
    /// Accumulated `sum tau p`.
    pub w: ScalarField,
}

impl SimState {
    pub fn initial(rho0: &ScalarField, n0: &ScalarField, params: &SchemeParams) -> Result<Self> {
        params.validate()?;
        rho0.same_grid(n0)?;
        if *rho0.grid() != params.grid {
            return Err(Error::GridMismatch);
        }
        rho0.check_finite("rho0")?;
        n0.check_finite("n0")?;
        // scheme output exceeds 1 by at most the projection tolerance
        if rho0.min() < 0.0 || rho0.max() > 1.0 + params.tol {
            return Err(Error::InvalidParameter("rho0 must take values in [0, 1]".into()));
        }
        let rho0 = &rho0.map(|v| v.min(1.0));
        if n0.min() < 0.0 {
            return Err(Error::InvalidParameter("n0 must be nonnegative".into()));
        }
        if let Some(m) = rho0.support_margin(0.0) {
            if m < 2 {
                return Err(Error::SupportTouchesBoundary { cells: m });
            }
        }
        let g = params.grid;
        Ok(Self {
            step: 0,
            t: 0.0,
            rho: rho0.clone(),
            n: n0.clone(),
            p: ScalarField::zeros(g),
            eta: (params.diffusion == 0.0).then(|| ScalarField::zeros(g)),
            w: ScalarField::zeros(g),
        })
    }
}

/// Per-step record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub step: usize,
    pub t: f64,
    pub mass: f64,
    pub bv: f64,
    pub bv_a: f64,
    /// `max(0, 0.5 ||grad p||^2 - int rho_prev (n_prev - b) p)`.
    pub energy_residual: f64,
    /// `||rho (1 - rho)||_1`.
    pub patch_residual: f64,
    /// `||p (1 - rho)||_1`.
    pub complementarity: f64,
    pub max_pressure: f64,
    /// `max (rho_prev (1 - tau b) - rho)_+`.
    pub monotonicity_violation: f64,
    /// `max(0, ||rho - rho_prev||_1 - 2 tau (2b + ||n0||_inf) sup_mass)`.
    pub lipschitz_excess: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub com_x: f64,
    pub com_y: f64,
    pub projection_iters: usize,
}

impl DiagnosticsRow {
    pub const CSV_HEADER: &'static str = "step,t,mass,bv,bv_a,energy_residual,patch_residual,complementarity,\
max_pressure,monotonicity_violation,lipschitz_excess,r_min,r_max,com_x,com_y,projection_iters";

    fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.step,
            self.t,
            self.mass,
            self.bv,
            self.bv_a,
            self.energy_residual,
            self.patch_residual,
            self.complementarity,
            self.max_pressure,
            self.monotonicity_violation,
            self.lipschitz_excess,
            self.r_min,
            self.r_max,
            self.com_x,
            self.com_y,
            self.projection_iters
        )
    }

    fn observe(state: &SimState, energy_residual: f64, monotonicity: f64, lipschitz: f64, iters: usize) -> Self {
        let g = state.rho.grid();
        let nr = norms(&state.rho);
        let ba = if g.dim() == 2 { bv_a(&state.rho, rotation_generator()).unwrap_or(0.0) } else { 0.0 };
        let vol = g.cell_volume();
        let rho = state.rho.values();
        let patch = vol * rho.iter().map(|r| (r * (1.0 - r)).abs()).sum::<f64>();
        let comp = vol * state.p.values().iter().zip(rho).map(|(p, r)| (p * (1.0 - r)).abs()).sum::<f64>();
        let (r_min, r_max) = boundary_radii(&state.rho).unwrap_or((0.0, 0.0));
        let com = state.rho.center_of_mass();
        Self {
            step: state.step,
            t: state.t,
            mass: nr.l1,
            bv: nr.bv,
            bv_a: ba,
            energy_residual,
            patch_residual: patch,
            complementarity: comp,
            max_pressure: state.p.max(),
            monotonicity_violation: monotonicity,
            lipschitz_excess: lipschitz,
            r_min,
            r_max,
            com_x: com[0],
            com_y: com[1],
            projection_iters: iters,
        }
    }
}

pub fn write_diagnostics_csv<W: Write>(out: &mut W, rows: &[DiagnosticsRow]) -> Result<()> {
    writeln!(out, "{}", DiagnosticsRow::CSV_HEADER)?;
    for r in rows {
        writeln!(out, "{}", r.csv())?;
    }
    Ok(())
}

/// One step of the scheme. Returns the new state and the step's diagnostics.
pub fn step(state: &SimState, params: &SchemeParams) -> Result<(SimState, StepReport)> {
    let tau = params.tau;
    let mu = state.rho.zip_map(&state.n, |r, n| r * (1.0 + tau * (n - params.b)));
    if mu.min() < 0.0 {
        return Err(Error::InvalidParameter("negative growth factor; need n >= 0 and tau b < 1".into()));
    }
    let proj = project_with(&mu, tau, &params.projection(), Some(&state.p))?;
    let rho = proj.rho;
    let p = proj.dual.p;
    let consumed = state.n.zip_map(&rho, |n, r| n * (1.0 - tau * r));
    let n = if params.diffusion > 0.0 { heat_step(&consumed, tau * params.diffusion)? } else { consumed };
    let nmin = n.min();
    if nmin < -params.tol {
        return Err(Error::NutrientNegative { min: nmin });
    }
    let eta = state.eta.as_ref().map(|e| {
        let mut e = e.clone();
        for ((ev, n_old), n_new) in e.values_mut().iter_mut().zip(state.n.values()).zip(n.values()) {
            *ev += n_old - n_new;
        }
        e
    });
    let vol = params.grid.cell_volume();
    let work = vol
        * state
            .rho
            .values()
            .iter()
            .zip(state.n.values())
            .zip(p.values())
            .map(|((r, nn), q)| r * (nn - params.b) * q)
            .sum::<f64>();
    let energy_residual = (p.dirichlet_energy() - work).max(0.0);
    let monotonicity = state
        .rho
        .values()
        .iter()
        .zip(rho.values())
        .fold(0.0_f64, |m, (old, new)| m.max(old * (1.0 - tau * params.b) - new));
    let w = state.w.zip_map(&p, |w, q| w + tau * q);
    let next = SimState { step: state.step + 1, t: (state.step + 1) as f64 * tau, rho, n, p, eta, w };
    Ok((
        next,
        StepReport {
            energy_residual,
            monotonicity_violation: monotonicity,
            projection_iters: proj.iterations,
            pushforward_residual: proj.pushforward_residual,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub energy_residual: f64,
    pub monotonicity_violation: f64,
    pub projection_iters: usize,
    pub pushforward_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<SimState>,
    pub diagnostics: Vec<DiagnosticsRow>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn final_state(&self) -> &SimState {
        self.snapshots.last().expect("a trajectory holds at least one snapshot")
    }
}

/// Step indices for the requested snapshot times (nearest step, deduplicated).
pub fn snapshot_steps(times: &[f64], params: &SchemeParams) -> Result<Vec<usize>> {
    if times.is_empty() {
        return Err(Error::SnapshotScheduleEmpty);
    }
    let last = params.steps();
    let mut steps = Vec::with_capacity(times.len());
    for &t in times {
        if !(t >= 0.0 && t <= params.t_final + 0.5 * params.tau) {
            return Err(Error::InvalidParameter(format!(
                "snapshot time {t} outside [0, {}]",
                params.t_final
            )));
        }
        steps.push(((t / params.tau).round() as usize).min(last));
    }
    steps.sort_unstable();
    steps.dedup();
    Ok(steps)
}

/// Evenly spaced snapshot times `0, dt, 2 dt, ...` up to `t_final`.
pub fn every(dt: f64, params: &SchemeParams) -> Vec<f64> {
    let k = (dt / params.tau).round().max(1.0) as usize;
    (0..=params.steps()).step_by(k).map(|s| s as f64 * params.tau).collect()
}

/// Runs the scheme to `t_final`, keeping the states closest to `snapshot_times`
/// and one diagnostics row per step (row 0 describes the initial state).
pub fn run(rho0: &ScalarField, n0: &ScalarField, params: &SchemeParams, snapshot_times: &[f64]) -> Result<Trajectory> {
    run_observed(rho0, n0, params, snapshot_times, |_, _| Ok(()))
}

/// [`run`] with a callback invoked on every retained snapshot as it is produced.
pub fn run_observed(
    rho0: &ScalarField,
    n0: &ScalarField,
    params: &SchemeParams,
    snapshot_times: &[f64],
    mut on_snapshot: impl FnMut(&SimState, &DiagnosticsRow) -> Result<()>,
) -> Result<Trajectory> {
    let keep = snapshot_steps(snapshot_times, params)?;
    let mut state = SimState::initial(rho0, n0, params)?;
    let n0_sup = n0.max();
    let rate = 2.0 * params.b + n0_sup;
    let mut sup_mass = rho0.integral();
    let mut diagnostics = vec![DiagnosticsRow::observe(&state, 0.0, 0.0, 0.0, 0)];
    let mut snapshots = Vec::new();
    let mut next_keep = keep.iter().peekable();
    if next_keep.peek() == Some(&&0) {
        on_snapshot(&state, &diagnostics[0])?;
        snapshots.push(state.clone());
        next_keep.next();
    }
    for _ in 0..params.steps() {
        let (next, report) = step(&state, params)?;
        let moved = next.rho.l1_distance(&state.rho);
        sup_mass = sup_mass.max(next.rho.integral());
        let lipschitz = (moved - 2.0 * params.tau * rate * sup_mass).max(0.0);
        let row = DiagnosticsRow::observe(
            &next,
            report.energy_residual,
            report.monotonicity_violation,
            lipschitz,
            report.projection_iters,
        );
        state = next;
        if next_keep.peek() == Some(&&state.step) {
            on_snapshot(&state, &row)?;
            snapshots.push(state.clone());
            next_keep.next();
        }
        diagnostics.push(row);
    }
    Ok(Trajectory { snapshots, diagnostics })
}

/// Runs two independent simulations, concurrently when the `parallel` feature is on.
pub fn run_pair(
    a: (&ScalarField, &ScalarField),
    b: (&ScalarField, &ScalarField),
    params: &SchemeParams,
    snapshot_times: &[f64],
) -> Result<(Trajectory, Trajectory)> {
    #[cfg(feature = "parallel")]
    let (ra, rb) = rayon::join(
        || run(a.0, a.1, params, snapshot_times),
        || run(b.0, b.1, params, snapshot_times),
    );
    #[cfg(not(feature = "parallel"))]
    let (ra, rb) = (run(a.0, a.1, params, snapshot_times), run(b.0, b.1, params, snapshot_times));
    Ok((ra?, rb?))
}

/// `N(t) = (e^{(s-1)t} - 1)/(s - 1)` and `M(t) = s N(t) + 1` for `s = ||n0||_inf`
/// (with `N = t` when `s = 1`).
pub fn contraction_constants(n0_sup: f64, t: f64) -> (f64, f64) {
    let x = (n0_sup - 1.0) * t;
    let big_n = if x == 0.0 { t } else { t * x.exp_m1() / x };
    (big_n, n0_sup * big_n + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionRow {
    pub t: f64,
    /// `||(rho1 - rho0)_+||_1`.
    pub lhs: f64,
    /// `N(t) ||(n0_1 - n0_0)_+||_1 + M(t) ||(rho0_1 - rho0_0)_+||_1`.
    pub bound: f64,
}

impl ContractionRow {
    pub fn excess(&self) -> f64 {
        self.lhs - self.bound
    }
}

/// Evaluates both sides of the L1 contraction inequality at every shared snapshot.
pub fn contraction_bound_check(
    traj0: &Trajectory,
    traj1: &Trajectory,
    n0_0: &ScalarField,
    n0_1: &ScalarField,
    rho0_0: &ScalarField,
    rho0_1: &ScalarField,
) -> Result<Vec<ContractionRow>> {
    let g = n0_0.grid();
    for f in [n0_1, rho0_0, rho0_1] {
        if f.grid() != g {
            return Err(Error::GridMismatch);
        }
    }
    if traj0.snapshots.len() != traj1.snapshots.len() {
        return Err(Error::GridMismatch);
    }
    let n_sup = n0_0.max().max(n0_1.max());
    let dn = n0_1.l1_positive_part(n0_0);
    let drho = rho0_1.l1_positive_part(rho0_0);
    traj0
        .snapshots
        .iter()
        .zip(&traj1.snapshots)
        .map(|(a, b)| {
            if a.rho.grid() != g || b.rho.grid() != g || (a.t - b.t).abs() > 1e-12 {
                return Err(Error::GridMismatch);
            }
            let (big_n, big_m) = contraction_constants(n_sup, a.t);
            Ok(ContractionRow { t: a.t, lhs: b.rho.l1_positive_part(&a.rho), bound: big_n * dn + big_m * drho })
        })
        .collect()
}
