//! Execution of configured runs and preset suites.

use std::io::Write;

use patchflow::elliptic::evolve_elliptic;
use patchflow::geometry::{
    arrival_times, default_w_thresh, extract_patch, holder_modulus, polar_lipschitz, r_reflection_violation,
    reflection_violation, Hyperplane, Side,
};
use patchflow::grid::{norms, GridSpec, ScalarField};
use patchflow::master::{
    equivalence_check_i, equivalence_check_ii, harmonic_moment, m_of_t, run_hs_potential, run_hs_source,
    write_equivalence_csv, FlowTrajectory,
};
use patchflow::presets::{disk, preset};
use patchflow::scheme::{self, contraction_bound_check, write_diagnostics_csv, SchemeParams, Trajectory};
use patchflow::{Error, Result};

use crate::config::{Mode, RunConfig};
use crate::output::{Check, Output};

const OBSTACLE_TOL: f64 = 1e-9;

/// L1 measure of a two-cell strip along the patch boundary.
fn band(rho: &ScalarField) -> f64 {
    2.0 * rho.grid().h_min() * norms(rho).bv
}

fn worst(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(0.0, f64::max)
}

/// Runs the scheme, writing `rho`, `n` and `p` snapshots, `diagnostics.csv`
/// and the per-step checks every run must satisfy.
fn scheme_stage(params: &SchemeParams, rho0: &ScalarField, n0: &ScalarField, times: &[f64], out: &mut Output) -> Result<Trajectory> {
    let tr = scheme::run_observed(rho0, n0, params, times, |s, _| {
        out.snapshot("rho", s.step, s.t, &s.rho)?;
        out.snapshot("n", s.step, s.t, &s.n)?;
        out.snapshot("p", s.step, s.t, &s.p)
    })?;
    let mut f = out.file("diagnostics.csv")?;
    write_diagnostics_csv(&mut f, &tr.diagnostics)?;
    f.flush()?;
    let d = &tr.diagnostics;
    out.check(Check::at_most("energy_dissipation", worst(d.iter().map(|r| r.energy_residual)), params.tol));
    out.check(Check::at_most("monotonicity", worst(d.iter().map(|r| r.monotonicity_violation)), params.tol));
    out.check(Check::at_most(
        "complementarity",
        worst(d.iter().filter(|r| r.max_pressure > 0.0).map(|r| r.complementarity / (r.mass * r.max_pressure))),
        1e-3,
    ));
    out.check(Check::at_most("lipschitz_in_time", worst(d.iter().map(|r| r.lipschitz_excess)), params.tol));
    Ok(tr)
}

fn flow_stage(tr: &FlowTrajectory, out: &mut Output) -> Result<()> {
    let mut f = out.file("flow.csv")?;
    writeln!(f, "t,mass,com_x,com_y,projection_iters")?;
    for r in &tr.rows {
        writeln!(f, "{},{},{},{},{}", r.t, r.mass, r.center_of_mass[0], r.center_of_mass[1], r.projection_iters)?;
    }
    f.flush()?;
    for s in &tr.snapshots {
        out.snapshot("rho", s.step, s.t, &s.rho)?;
        out.snapshot("p", s.step, s.t, &s.p)?;
    }
    Ok(())
}

fn require_constant(cfg: &RunConfig) -> Result<f64> {
    cfg.constant_n0()
        .ok_or_else(|| Error::InvalidParameter(format!("mode {:?} needs a spatially constant n0", cfg.mode)))
}

fn checkpoints(tr: &Trajectory) -> Vec<(f64, ScalarField)> {
    tr.snapshots.iter().filter(|s| s.t > 0.0).map(|s| (s.t, s.rho.clone())).collect()
}

fn master_i(rho0: &ScalarField, n0: f64, params: &SchemeParams, tr: &Trajectory, out: &mut Output) -> Result<()> {
    let full = checkpoints(tr);
    let targets = full.iter().map(|(t, _)| Ok(m_of_t(n0, *t)? - 1.0)).collect::<Result<Vec<_>>>()?;
    let s_final = targets.iter().copied().fold(0.0, f64::max);
    let hs = run_hs_source(rho0, s_final, params.tau, params.tol, &targets)?;
    let rows = equivalence_check_i(&full, &hs.densities(), n0)?;
    let mut f = out.file("master_i.csv")?;
    write_equivalence_csv(&mut f, &rows)?;
    f.flush()?;
    out.check(Check::at_most("master_i", worst(rows.iter().map(|r| r.l1_error)), 0.05));
    Ok(())
}

fn master_ii(rho0: &ScalarField, n0: f64, params: &SchemeParams, tr: &Trajectory, out: &mut Output) -> Result<()> {
    let full = checkpoints(tr);
    let targets = full.iter().map(|(t, _)| Ok(m_of_t(n0, *t)?.ln())).collect::<Result<Vec<_>>>()?;
    let s_final = targets.iter().copied().fold(0.0, f64::max);
    let hs = run_hs_potential(rho0, s_final, params.tau, params.tol, &targets)?;
    let rows = equivalence_check_ii(&full, &hs.densities(), n0)?;
    let mut f = out.file("master_ii.csv")?;
    write_equivalence_csv(&mut f, &rows)?;
    f.flush()?;
    out.check(Check::at_most("master_ii_minus_floor", worst(rows.iter().map(|r| r.l1_error - r.resample_floor)), 0.05));
    Ok(())
}

fn harmonic_checks(rho0: &ScalarField, n0: f64, tr: &Trajectory, out: &mut Output) -> Result<()> {
    let family: &[&str] = if rho0.grid().dim() == 1 { &["1", "x"] } else { &["1", "x", "y", "xy", "x^2-y^2"] };
    let mut err = 0.0_f64;
    for s in &tr.snapshots {
        let m = m_of_t(n0, s.t)?;
        for g in family {
            let scale = m * rho0.integral() * (1.0 + rho0.grid().lengths()[0].powi(2));
            err = err.max((harmonic_moment(&s.rho, g)? - m * harmonic_moment(rho0, g)?).abs() / scale);
        }
    }
    out.check(Check::at_most("harmonic_moments", err, 1e-2));
    Ok(())
}

fn contraction(
    params: &SchemeParams,
    a: (&ScalarField, &ScalarField),
    b: (&ScalarField, &ScalarField),
    times: &[f64],
    out: &mut Output,
) -> Result<()> {
    let (t0, t1) = scheme::run_pair(a, b, params, times)?;
    let rows = contraction_bound_check(&t0, &t1, a.1, b.1, a.0, b.0)?;
    let mut f = out.file("contraction.csv")?;
    writeln!(f, "t,lhs,bound")?;
    for r in &rows {
        writeln!(f, "{},{},{}", r.t, r.lhs, r.bound)?;
    }
    f.flush()?;
    out.check(Check::at_most("contraction_excess", worst(rows.iter().map(|r| r.lhs - 1.1 * r.bound)), 1e-12));
    let ordered = |x: &ScalarField, y: &ScalarField| x.values().iter().zip(y.values()).all(|(p, q)| p <= q);
    if ordered(a.0, b.0) && ordered(a.1, b.1) {
        let v = worst(t0.snapshots.iter().zip(&t1.snapshots).map(|(x, y)| x.rho.l1_positive_part(&y.rho) / band(&y.rho)));
        out.check(Check::at_most("ordering_over_band", v, 1.0));
    }
    let e = worst(t0.diagnostics.iter().chain(&t1.diagnostics).map(|r| r.energy_residual));
    out.check(Check::at_most("energy_dissipation", e, params.tol));
    Ok(())
}

fn geometry_rows(tr: &Trajectory, times: &[f64], out: &mut Output) -> Result<Vec<(f64, f64)>> {
    let mut f = out.file("geometry.csv")?;
    writeln!(f, "t,area,perimeter,roughness,r_min,r_max,star_shaped,polar_lipschitz,r_reflection")?;
    let mut rough = Vec::new();
    for s in &tr.snapshots {
        if !times.is_empty() && !times.iter().any(|&t| (t - s.t).abs() <= 1e-9) {
            continue;
        }
        let Ok(g) = extract_patch(&s.rho) else { continue };
        let lip = polar_lipschitz(&g).unwrap_or(f64::NAN);
        let refl = r_reflection_violation(&g, 0.9 * g.r_min).unwrap_or(f64::NAN);
        writeln!(
            f,
            "{},{},{},{},{},{},{},{},{}",
            s.t,
            g.area(),
            g.perimeter(),
            g.roughness(),
            g.r_min,
            g.r_max,
            g.is_star_shaped(),
            lip,
            refl
        )?;
        rough.push((s.t, g.roughness()));
    }
    f.flush()?;
    Ok(rough)
}

/// Snapshot steps the scheme keeps: the user schedule rounded to steps.
fn rounded(times: &[f64], params: &SchemeParams) -> Vec<f64> {
    let mut v: Vec<f64> = times.iter().map(|t| (t / params.tau).round() * params.tau).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn geometry_mode(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let p = &cfg.params;
    let user = rounded(&cfg.snapshot_times, p);
    let mut times = scheme::every(5.0 * p.tau, p);
    times.extend(user.iter().copied());
    times.push(p.t_final);
    let times = rounded(&times, p);
    let tr = scheme::run(&cfg.rho0, &cfg.n0, p, &times)?;
    let mut f = out.file("diagnostics.csv")?;
    write_diagnostics_csv(&mut f, &tr.diagnostics)?;
    f.flush()?;
    geometry_rows(&tr, &user, out)?;
    let w: Vec<(f64, ScalarField)> = tr.snapshots.iter().map(|s| (s.t, s.w.clone())).collect();
    let thresh = default_w_thresh(&tr.final_state().w);
    let arrival = arrival_times(&w, p.tau, thresh)?;
    out.snapshot("arrival", tr.final_state().step, tr.final_state().t, &arrival.to_field(-1.0))?;
    let holder = holder_modulus(&arrival, cfg.alpha, cfg.holder_radius);
    let mut hf = out.file("holder.json")?;
    match &holder {
        Ok(h) => writeln!(
            hf,
            "{}",
            serde_json::json!({"alpha": cfg.alpha, "modulus": h.modulus, "pair": [h.pair.0, h.pair.1], "pairs_used": h.pairs_used})
        )?,
        Err(e) => writeln!(hf, "{}", serde_json::json!({"alpha": cfg.alpha, "error": e.to_string()}))?,
    }
    hf.flush()?;
    out.check(Check::at_most("energy_dissipation", worst(tr.diagnostics.iter().map(|r| r.energy_residual)), p.tol));
    if p.b == 0.0 && p.diffusion == 0.0 {
        if let Ok(g0) = extract_patch(&cfg.rho0) {
            if g0.is_star_shaped() {
                let lost = tr
                    .snapshots
                    .iter()
                    .filter(|s| extract_patch(&s.rho).map_or(true, |g| !g.is_star_shaped()))
                    .count();
                out.check(Check::at_most("star_shape_lost_snapshots", lost as f64, 0.0));
            }
        }
    }
    Ok(())
}

fn elliptic_mode(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let p = &cfg.params;
    let states = evolve_elliptic(&cfg.rho0, &cfg.n0, p.tau, p.t_final, OBSTACLE_TOL)?;
    let keep = scheme::snapshot_steps(&cfg.snapshot_times, p)?;
    let mut f = out.file("elliptic.csv")?;
    writeln!(f, "step,t,mass,kkt_residual,clipped")?;
    for s in &states {
        writeln!(f, "{},{},{},{},{}", s.step, s.t, s.rho.integral(), s.kkt_residual, s.clipped)?;
        if keep.binary_search(&s.step).is_ok() {
            out.snapshot("rho", s.step, s.t, &s.rho)?;
            out.snapshot("w", s.step, s.t, &s.w)?;
            out.snapshot("eta", s.step, s.t, &s.eta)?;
        }
    }
    f.flush()?;
    out.check(Check::at_most("kkt_residual", worst(states.iter().map(|s| s.kkt_residual)), 1e-8));
    Ok(())
}

/// Executes a parsed configuration.
pub fn run_config(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let p = &cfg.params;
    match cfg.mode {
        Mode::Scheme => {
            scheme_stage(p, &cfg.rho0, &cfg.n0, &cfg.snapshot_times, out)?;
        }
        Mode::Elliptic => elliptic_mode(cfg, out)?,
        Mode::HsSource | Mode::HsPotential => {
            let source = cfg.mode == Mode::HsSource;
            let tr = if source {
                run_hs_source(&cfg.rho0, p.t_final, p.tau, p.tol, &cfg.snapshot_times)?
            } else {
                run_hs_potential(&cfg.rho0, p.t_final, p.tau, p.tol, &cfg.snapshot_times)?
            };
            flow_stage(&tr, out)?;
            let m0 = cfg.rho0.integral();
            let growth = |t: f64| if source { 1.0 + t } else { 1.0 };
            let err = worst(tr.rows.iter().map(|r| (r.mass / (m0 * growth(r.t)) - 1.0).abs()));
            out.check(Check::at_most(if source { "mass_growth" } else { "mass_conservation" }, err, 1e-3));
        }
        Mode::CheckMaster => {
            let n0 = require_constant(cfg)?;
            let tr = scheme_stage(p, &cfg.rho0, &cfg.n0, &cfg.snapshot_times, out)?;
            master_i(&cfg.rho0, n0, p, &tr, out)?;
            master_ii(&cfg.rho0, n0, p, &tr, out)?;
            harmonic_checks(&cfg.rho0, n0, &tr, out)?;
        }
        Mode::CheckContraction => {
            let (r1, n1) = cfg.pair.as_ref().ok_or_else(|| Error::InvalidParameter("missing [pair]".into()))?;
            contraction(p, (&cfg.rho0, &cfg.n0), (r1, n1), &cfg.snapshot_times, out)?;
        }
        Mode::Geometry => geometry_mode(cfg, out)?,
    }
    Ok(())
}

/// Runs a named preset at `n x n` with its acceptance assertions.
pub fn run_preset(name: &str, n: usize, out: &mut Output) -> Result<()> {
    let pr = preset(name, n)?;
    let p = &pr.params;
    let h = p.grid.h_min();
    let n0 = pr.n0.values()[0];
    match pr.name {
        "radial" => {
            let tr = scheme_stage(p, &pr.rho0, &pr.n0, &pr.snapshot_times, out)?;
            let (mut r_err, mut m_err) = (0.0_f64, 0.0_f64);
            for s in &tr.snapshots {
                let m = m_of_t(n0, s.t)?;
                let r = 0.5 * m.sqrt();
                let g = extract_patch(&s.rho)?;
                r_err = r_err.max((g.r_min - r).abs()).max((g.r_max - r).abs());
                m_err = m_err.max((s.rho.integral() / (m * pr.rho0.integral()) - 1.0).abs());
            }
            out.check(Check::at_most("radius_error", r_err, 2.0 * h));
            out.check(Check::at_most("mass_error", m_err, 0.01));
        }
        "blob" => {
            let tr = scheme_stage(p, &pr.rho0, &pr.n0, &pr.snapshot_times, out)?;
            let c0 = pr.rho0.center_of_mass();
            let (mut m_err, mut drift) = (0.0_f64, 0.0_f64);
            for s in &tr.snapshots {
                m_err = m_err.max((s.rho.integral() / (m_of_t(n0, s.t)? * pr.rho0.integral()) - 1.0).abs());
                let c = s.rho.center_of_mass();
                drift = drift.max(((c[0] - c0[0]).powi(2) + (c[1] - c0[1]).powi(2)).sqrt());
            }
            out.check(Check::at_most("mass_law", m_err, 0.01));
            out.check(Check::at_most("center_of_mass_drift", drift, h));
            harmonic_checks(&pr.rho0, n0, &tr, out)?;
        }
        "stationary" => {
            let tr = scheme_stage(p, &pr.rho0, &pr.n0, &pr.snapshot_times, out)?;
            let last = tr.diagnostics.last().expect("initial row");
            let target = (1.0 / (1.0 - n0)).sqrt();
            out.check(Check::at_most("final_radius_error", (last.r_min - target).abs().max((last.r_max - target).abs()), 1.5 * h));
            let limit = pr.rho0.integral() / (1.0 - n0);
            let pts: Vec<(f64, f64)> = tr
                .diagnostics
                .iter()
                .filter(|d| d.t >= 2.0 - 1e-9 && d.t <= 8.0 + 1e-9 && d.mass < limit)
                .map(|d| (d.t, (limit - d.mass).ln()))
                .collect();
            let slope = fit_slope(&pts);
            out.check(Check::at_most("deficit_rate_relative_error", (slope / (n0 - 1.0) - 1.0).abs(), 0.2));
        }
        "master-I" | "master-II" => {
            let tr = scheme_stage(p, &pr.rho0, &pr.n0, &pr.snapshot_times, out)?;
            if pr.name == "master-I" {
                master_i(&pr.rho0, n0, p, &tr, out)?;
            } else {
                master_ii(&pr.rho0, n0, p, &tr, out)?;
            }
        }
        "dendrite" => {
            let tr = scheme_stage(p, &pr.rho0, &pr.n0, &pr.snapshot_times, out)?;
            let rough = geometry_rows(&tr, &[], out)?;
            let onset = (n0 / p.b).ln();
            let late: Vec<f64> = rough.iter().filter(|(t, _)| *t >= onset).map(|(_, r)| *r).collect();
            let decrease = late.windows(2).map(|w| w[0] - w[1]).fold(f64::NEG_INFINITY, f64::max);
            out.check(Check { id: "roughness_increasing".into(), bound: 0.0, measured: decrease, pass: decrease < 0.0 });
        }
        "two-blob-merge" => {
            let tr = scheme_stage(p, &pr.rho0, &pr.n0, &pr.snapshot_times, out)?;
            let fields: Vec<ScalarField> = tr.snapshots.iter().map(|s| s.rho.clone()).collect();
            let plane = Hyperplane::new([1.0, 0.0], 0.0)?;
            let rep = reflection_violation(&fields, &plane, Side::Negative)?;
            let v = worst(rep.violations.iter().zip(&fields).map(|(v, f)| v / (rep.resample_floor + band(f))));
            out.check(Check::at_most("reflection_over_floor_and_band", v, 1.0));
            let control = reflection_violation(&fields[..1], &plane, Side::Positive)?;
            let cells = control.violations[0] / p.grid.cell_volume();
            out.check(Check { id: "negative_control_cells".into(), bound: 0.0, measured: cells, pass: cells > 0.0 });
            let g = p.grid;
            let mid = fields.last().expect("snapshots").at(g.nx() / 2, g.ny() / 2);
            out.check(Check { id: "merged_center_density".into(), bound: 0.5, measured: mid, pass: mid >= 0.5 });
        }
        other => return Err(Error::InvalidParameter(format!("preset `{other}` has no suite"))),
    }
    Ok(())
}

pub const CHECK_MODES: [&str; 4] = ["ctransform", "obstacle", "master", "contraction"];

/// Stand-alone oracle checks; `n` is the grid size for the simulation-backed modes.
pub fn run_check(mode: &str, n: usize, out: &mut Output) -> Result<()> {
    match mode {
        "ctransform" => {
            use patchflow::ot::{brute_force_ctransform, ctransform};
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
            let grids = [GridSpec::square(16, 1.0)?, GridSpec::new_1d(64, 2.0)?];
            let mut err = 0.0_f64;
            for trial in 0..200 {
                let g = grids[trial % 2];
                let tau = 10f64.powf(rng.gen_range(-3.0..0.5));
                let vals = (0..g.len()).map(|_| rng.gen_range(0.0..2.0)).collect();
                let p = ScalarField::from_vec(g, vals)?;
                err = err.max(ctransform(&p, tau)?.linf_distance(&brute_force_ctransform(&p, tau)?));
            }
            out.check(Check::at_most("ctransform_vs_brute_force", err, 1e-12));
        }
        "obstacle" => {
            let g = GridSpec::square(n.max(16), 1.0)?;
            let v = ScalarField::from_fn(g, |x| 0.01 * (0.25 - x[0] * x[0] - x[1] * x[1]).max(0.0).powi(3));
            let f = v.laplacian().map(|l| 1.0 - l);
            let s = patchflow::elliptic::obstacle_solve(&f, 1e-10)?;
            out.snapshot("w", 0, 0.0, &s.w)?;
            out.check(Check::at_most("manufactured_kkt", s.kkt_residual, 1e-8));
            out.check(Check::at_most("manufactured_w_error", s.w.linf_distance(&v), 1e-6));
        }
        "master" => {
            let pr = preset("master-I", n)?;
            let n0 = pr.n0.values()[0];
            let tr = scheme_stage(&pr.params, &pr.rho0, &pr.n0, &pr.snapshot_times, out)?;
            master_i(&pr.rho0, n0, &pr.params, &tr, out)?;
            master_ii(&pr.rho0, n0, &pr.params, &tr, out)?;
            harmonic_checks(&pr.rho0, n0, &tr, out)?;
        }
        "contraction" => {
            let g = GridSpec::square(n, 2.0)?;
            let params = SchemeParams::new(g, if n <= 128 { 2e-3 } else { 1e-3 }, 0.35);
            let n0 = ScalarField::constant(g, 2.0);
            let (a, b) = (disk(g, [0.0, 0.0], 0.4), disk(g, [0.0, 0.0], 0.5));
            contraction(&params, (&a, &n0), (&b, &n0), &scheme::every(0.05, &params), out)?;
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown check `{other}`; known checks: {}",
                CHECK_MODES.join(", ")
            )))
        }
    }
    Ok(())
}

fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|k| (k as f64, 3.0 - 0.5 * k as f64)).collect();
        assert!((fit_slope(&pts) + 0.5).abs() < 1e-14);
    }
}
