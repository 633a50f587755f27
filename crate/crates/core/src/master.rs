//! Constant-nutrient structure: the mass factor `m(t)`, the two parameter-free
//! Hele-Shaw flows and the rescalings that map them onto the full system.

use crate::error::{Error, Result};
use crate::grid::{w2_radial_profile, GridSpec, ScalarField};
use crate::ot::{project_with, ProjectionOptions};

/// `m(t) = (n0 e^{(n0-1)t} - 1)/(n0 - 1)`, or `t + 1` when `n0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassFactor {
    pub n0: f64,
}

impl MassFactor {
    pub fn new(n0: f64) -> Result<Self> {
        if !(n0 > 0.0 && n0.is_finite()) {
            return Err(Error::InvalidParameter(format!("n0 must be positive, got {n0}")));
        }
        Ok(Self { n0 })
    }

    pub fn m(&self, t: f64) -> f64 {
        let x = (self.n0 - 1.0) * t;
        if x == 0.0 {
            return 1.0 + self.n0 * t;
        }
        1.0 + self.n0 * t * x.exp_m1() / x
    }

    /// Inverse of [`MassFactor::m`].
    pub fn t(&self, m: f64) -> Result<f64> {
        let out = || Error::MOutOfRange { m, n0: self.n0 };
        if !(m >= 1.0) {
            return Err(out());
        }
        if let Some(cap) = self.limit() {
            if m >= cap {
                return Err(out());
            }
        }
        let a = self.n0 - 1.0;
        let y = (m - 1.0) * a / self.n0;
        if y == 0.0 {
            return Ok((m - 1.0) / self.n0);
        }
        Ok((m - 1.0) / self.n0 * y.ln_1p() / y)
    }

    /// `1/(1 - n0)` for `n0 < 1`.
    pub fn limit(&self) -> Option<f64> {
        (self.n0 < 1.0).then(|| 1.0 / (1.0 - self.n0))
    }

    /// `m'(t) = n0 e^{(n0-1)t}`.
    pub fn rate(&self, t: f64) -> f64 {
        self.n0 * ((self.n0 - 1.0) * t).exp()
    }
}

pub fn m_of_t(n0: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("t must be nonnegative, got {t}")));
    }
    Ok(MassFactor::new(n0)?.m(t))
}

pub fn t_of_m(n0: f64, m: f64) -> Result<f64> {
    MassFactor::new(n0)?.t(m)
}

/// `r(t) = m(t)^{1/d} r0`.
pub fn radial_radius(r0: f64, n0: f64, t: f64, d: usize) -> Result<f64> {
    if !(r0 > 0.0) || !(d == 1 || d == 2) {
        return Err(Error::InvalidParameter("need r0 > 0 and d in {1, 2}".into()));
    }
    Ok(m_of_t(n0, t)?.powf(1.0 / d as f64) * r0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSnapshot {
    pub step: usize,
    pub t: f64,
    pub rho: ScalarField,
    pub p: ScalarField,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowRow {
    pub t: f64,
    pub mass: f64,
    pub center_of_mass: [f64; 2],
    pub projection_iters: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrajectory {
    pub tau: f64,
    pub snapshots: Vec<FlowSnapshot>,
    /// One row per step, the initial state first.
    pub rows: Vec<FlowRow>,
}

impl FlowTrajectory {
    pub fn densities(&self) -> Vec<(f64, ScalarField)> {
        self.snapshots.iter().map(|s| (s.t, s.rho.clone())).collect()
    }
}

fn check_patch(rho0: &ScalarField) -> Result<()> {
    rho0.check_finite("rho0")?;
    if rho0.values().iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::InvalidParameter("rho0 must take values in [0, 1]".into()));
    }
    if let Some(m) = rho0.support_margin(0.0) {
        if m < 2 {
            return Err(Error::SupportTouchesBoundary { cells: m });
        }
    }
    Ok(())
}

fn keep_steps(times: &[f64], tau: f64, t_final: f64) -> Result<Vec<usize>> {
    if times.is_empty() {
        return Err(Error::SnapshotScheduleEmpty);
    }
    let last = (t_final / tau).round() as usize;
    let mut s: Vec<usize> = times.iter().map(|&t| ((t.max(0.0) / tau).round() as usize).min(last)).collect();
    s.sort_unstable();
    s.dedup();
    Ok(s)
}

fn run_flow(
    rho0: &ScalarField,
    t_final: f64,
    tau: f64,
    tol: f64,
    snapshot_times: &[f64],
    mut advance: impl FnMut(&ScalarField) -> Result<ScalarField>,
) -> Result<FlowTrajectory> {
    check_patch(rho0)?;
    if !(tau > 0.0) || !(t_final >= 0.0) {
        return Err(Error::InvalidParameter("need tau > 0 and t_final >= 0".into()));
    }
    let keep = keep_steps(snapshot_times, tau, t_final)?;
    let g = *rho0.grid();
    let opts = ProjectionOptions { tol, ..Default::default() };
    let mut rho = rho0.clone();
    let mut p = ScalarField::zeros(g);
    let mut snapshots = Vec::new();
    let mut rows = vec![FlowRow { t: 0.0, mass: rho.integral(), center_of_mass: rho.center_of_mass(), projection_iters: 0 }];
    if keep.first() == Some(&0) {
        snapshots.push(FlowSnapshot { step: 0, t: 0.0, rho: rho.clone(), p: p.clone() });
    }
    let steps = (t_final / tau).round() as usize;
    for k in 1..=steps {
        let mu = advance(&rho)?;
        let proj = project_with(&mu, tau, &opts, Some(&p))?;
        rho = proj.rho;
        p = proj.dual.p;
        let t = k as f64 * tau;
        rows.push(FlowRow { t, mass: rho.integral(), center_of_mass: rho.center_of_mass(), projection_iters: proj.iterations });
        if keep.binary_search(&k).is_ok() {
            snapshots.push(FlowSnapshot { step: k, t, rho: rho.clone(), p: p.clone() });
        }
    }
    Ok(FlowTrajectory { tau, snapshots, rows })
}

/// Hele-Shaw flow with the constant source `rho0`: each step projects `rho + tau rho0`.
pub fn run_hs_source(rho0: &ScalarField, t_final: f64, tau: f64, tol: f64, snapshot_times: &[f64]) -> Result<FlowTrajectory> {
    let src = rho0.map(|v| tau * v);
    run_flow(rho0, t_final, tau, tol, snapshot_times, |rho| Ok(rho + &src))
}

/// Hele-Shaw flow in the confining potential `|x|^2/(2d)`: each step pushes the
/// density forward by the dilation `x -> (1 - tau/d) x` and then projects.
pub fn run_hs_potential(rho0: &ScalarField, t_final: f64, tau: f64, tol: f64, snapshot_times: &[f64]) -> Result<FlowTrajectory> {
    let d = rho0.grid().dim() as f64;
    let s = 1.0 - tau / d;
    if !(s > 0.0) {
        return Err(Error::InvalidParameter(format!("tau/d = {} must be < 1", tau / d)));
    }
    let g = *rho0.grid();
    let wx = dilation_weights(&g, 0, s);
    let wy = if g.dim() == 2 { dilation_weights(&g, 1, s) } else { vec![vec![(0, 1.0)]] };
    run_flow(rho0, t_final, tau, tol, snapshot_times, |rho| Ok(scatter_dilation(rho, &wx, &wy)))
}

/// Per-cell `(target, fraction)` lists for the image of each cell interval
/// under `x -> s x` along one axis.
fn dilation_weights(g: &GridSpec, axis: usize, s: f64) -> Vec<Vec<(usize, f64)>> {
    let n = g.shape()[axis];
    let h = g.h(axis);
    let left = -0.5 * g.lengths()[axis];
    (0..n)
        .map(|i| {
            let a = s * (left + i as f64 * h);
            let b = s * (left + (i + 1) as f64 * h);
            let j0 = (((a - left) / h).floor().max(0.0) as usize).min(n - 1);
            let j1 = (((b - left) / h).ceil() as usize).min(n);
            (j0..j1)
                .filter_map(|j| {
                    let lo = a.max(left + j as f64 * h);
                    let hi = b.min(left + (j + 1) as f64 * h);
                    (hi > lo).then(|| (j, (hi - lo) / (b - a)))
                })
                .collect()
        })
        .collect()
}

/// Exact pushforward of the piecewise-constant density under `x -> s x`.
fn scatter_dilation(rho: &ScalarField, wx: &[Vec<(usize, f64)>], wy: &[Vec<(usize, f64)>]) -> ScalarField {
    let g = *rho.grid();
    let mut out = vec![0.0; g.len()];
    let v = rho.values();
    for (j, row_w) in wy.iter().enumerate() {
        for (i, col_w) in wx.iter().enumerate() {
            let m = v[g.idx(i, j)];
            if m == 0.0 {
                continue;
            }
            for &(tj, fy) in row_w {
                for &(ti, fx) in col_w {
                    out[g.idx(ti, tj)] += m * fx * fy;
                }
            }
        }
    }
    ScalarField::from_vec(g, out).expect("same grid")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceRow {
    pub t: f64,
    /// Reference time actually matched.
    pub s_matched: f64,
    /// `||rho(t) - reference||_1 / ||rho(t)||_1`.
    pub l1_error: f64,
    /// Relative L1 change of the reference under a resampling round trip.
    pub resample_floor: f64,
}

pub const EQUIVALENCE_CSV_HEADER: &str = "t,s_matched,l1_error,resample_floor";

pub fn write_equivalence_csv<W: std::io::Write>(out: &mut W, rows: &[EquivalenceRow]) -> Result<()> {
    writeln!(out, "{EQUIVALENCE_CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.t, r.s_matched, r.l1_error, r.resample_floor)?;
    }
    Ok(())
}

fn nearest<'a>(reference: &'a [(f64, ScalarField)], s: f64) -> Result<&'a (f64, ScalarField)> {
    let best = reference
        .iter()
        .min_by(|a, b| (a.0 - s).abs().total_cmp(&(b.0 - s).abs()))
        .ok_or(Error::SnapshotScheduleEmpty)?;
    let gap = reference.windows(2).map(|w| w[1].0 - w[0].0).fold(0.0, f64::max);
    if (best.0 - s).abs() > 0.5 * gap + 1e-9 {
        return Err(Error::CheckpointOutOfRange(s));
    }
    Ok(best)
}

fn relative_l1(a: &ScalarField, b: &ScalarField) -> f64 {
    let m = a.integral().abs();
    if m == 0.0 {
        return a.l1_distance(b);
    }
    a.l1_distance(b) / m
}

/// Compares `rho(., t)` with `rho_*(., m(t) - 1)` at every checkpoint of `full`.
pub fn equivalence_check_i(full: &[(f64, ScalarField)], hs: &[(f64, ScalarField)], n0: f64) -> Result<Vec<EquivalenceRow>> {
    let mf = MassFactor::new(n0)?;
    full.iter()
        .map(|(t, rho)| {
            let (s, reference) = nearest(hs, mf.m(*t) - 1.0)?;
            rho.same_grid(reference)?;
            Ok(EquivalenceRow { t: *t, s_matched: *s, l1_error: relative_l1(rho, reference), resample_floor: 0.0 })
        })
        .collect()
}

/// Compares `rho(x, t)` with `rho_dag(m(t)^{-1/d} x, ln m(t))`, resampling bilinearly.
pub fn equivalence_check_ii(full: &[(f64, ScalarField)], hsp: &[(f64, ScalarField)], n0: f64) -> Result<Vec<EquivalenceRow>> {
    let mf = MassFactor::new(n0)?;
    full.iter()
        .map(|(t, rho)| {
            let m = mf.m(*t);
            let (s, reference) = nearest(hsp, m.ln())?;
            rho.same_grid(reference)?;
            let scale = m.powf(1.0 / rho.grid().dim() as f64);
            let (dilated, floor) = if scale == 1.0 {
                (reference.clone(), 0.0)
            } else {
                let d = reference.dilate(scale);
                let back = d.dilate(1.0 / scale);
                let f = relative_l1(reference, &back);
                (d, f)
            };
            Ok(EquivalenceRow { t: *t, s_matched: *s, l1_error: relative_l1(rho, &dilated), resample_floor: floor })
        })
        .collect()
}

/// Built-in harmonic test functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Harmonic {
    One,
    X1,
    X2,
    X1X2,
    /// `x1^2 - x2^2`
    Saddle,
}

impl Harmonic {
    pub fn parse(spec: &str, dim: usize) -> Result<Self> {
        let h = match spec.replace(' ', "").as_str() {
            "1" => Harmonic::One,
            "x" | "x1" => Harmonic::X1,
            "y" | "x2" => Harmonic::X2,
            "xy" | "x1x2" | "x1*x2" => Harmonic::X1X2,
            "x1^2-x2^2" | "x^2-y^2" => Harmonic::Saddle,
            _ => return Err(Error::NotHarmonic(spec.to_string())),
        };
        if dim == 1 && !matches!(h, Harmonic::One | Harmonic::X1) {
            return Err(Error::NotHarmonic(spec.to_string()));
        }
        Ok(h)
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        match self {
            Harmonic::One => 1.0,
            Harmonic::X1 => x[0],
            Harmonic::X2 => x[1],
            Harmonic::X1X2 => x[0] * x[1],
            Harmonic::Saddle => x[0] * x[0] - x[1] * x[1],
        }
    }
}

/// `h^d sum rho g` at cell centers for a named harmonic `g`.
pub fn harmonic_moment(rho: &ScalarField, spec: &str) -> Result<f64> {
    let g = rho.grid();
    let f = Harmonic::parse(spec, g.dim())?;
    Ok(rho.values().iter().enumerate().map(|(k, v)| v * f.eval(g.center(k))).sum::<f64>() * g.cell_volume())
}

/// `n(t) = n0 - n0 int_0^t e^{-(t-s)} rho(s) ds` at the last snapshot, by the
/// trapezoid rule over the snapshots (which must start at 0 and be at most
/// `10 tau` apart).
pub fn nutrient_from_density(snaps: &[(f64, ScalarField)], n0: f64, tau: f64) -> Result<ScalarField> {
    let Some((t0, first)) = snaps.first() else {
        return Err(Error::SnapshotScheduleEmpty);
    };
    if t0.abs() > 1e-12 {
        return Err(Error::InvalidParameter("density snapshots must start at t = 0".into()));
    }
    let limit = 10.0 * tau;
    for w in snaps.windows(2) {
        let gap = w[1].0 - w[0].0;
        if gap > limit * (1.0 + 1e-9) {
            return Err(Error::SparseTrajectory { spacing: gap, limit });
        }
    }
    let g = *first.grid();
    let t = snaps.last().expect("nonempty").0;
    let mut acc = vec![0.0; g.len()];
    for w in snaps.windows(2) {
        let (s0, r0) = (&w[0].0, &w[0].1);
        let (s1, r1) = (&w[1].0, &w[1].1);
        r0.same_grid(r1)?;
        let (e0, e1) = ((-(t - s0)).exp(), (-(t - s1)).exp());
        let half = 0.5 * (s1 - s0);
        for ((a, x), y) in acc.iter_mut().zip(r0.values()).zip(r1.values()) {
            *a += half * (e0 * x + e1 * y);
        }
    }
    ScalarField::from_vec(g, acc.into_iter().map(|a| n0 - n0 * a).collect())
}

/// `m(t)^{1/d} W2(rho(m(t)^{1/d} x), chi_{B_{r_inf}})`, with W2 evaluated on
/// radial mass profiles (exact for radial data, a lower bound otherwise).
pub fn rescaled_ball_distance(rho: &ScalarField, n0: f64, t: f64, r_inf: f64) -> Result<f64> {
    let g = *rho.grid();
    let scale = m_of_t(n0, t)?.powf(1.0 / g.dim() as f64);
    let shrunk = rho.dilate(1.0 / scale);
    let ball = ScalarField::from_fn(g, |x| if x[0] * x[0] + x[1] * x[1] < r_inf * r_inf { 1.0 } else { 0.0 });
    Ok(scale * w2_radial_profile(&shrunk, &ball)?)
}
