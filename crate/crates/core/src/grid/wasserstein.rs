//! One-dimensional quantile evaluation of W2 for line and radial profiles.

use super::ScalarField;
use crate::error::{Error, Result};

const MASS_TOL: f64 = 5e-3;
/// Relative L1 asymmetry above which a field is rejected as non-radial.
pub const RADIAL_TOL: f64 = 0.05;
const SUBSAMPLES: usize = 4;

/// Piecewise-uniform density on consecutive bins `[edges[i], edges[i+1]]`.
struct Profile {
    edges: Vec<f64>,
    masses: Vec<f64>,
}

impl Profile {
    fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Quantile function as linear pieces `(q0, q1, x0, x1)` over `[0, scale * mass]`.
    fn pieces(&self, scale: f64) -> Vec<(f64, f64, f64, f64)> {
        let mut out = Vec::new();
        let mut q = 0.0;
        for (i, &m) in self.masses.iter().enumerate() {
            if m > 0.0 {
                let q1 = q + m * scale;
                out.push((q, q1, self.edges[i], self.edges[i + 1]));
                q = q1;
            }
        }
        out
    }
}

fn check_density(f: &ScalarField, name: &'static str) -> Result<()> {
    f.check_finite(name)?;
    if f.min() < 0.0 {
        return Err(Error::InvalidParameter(format!("`{name}` has negative values")));
    }
    Ok(())
}

/// W2 between two piecewise-uniform profiles after scaling both to their mean mass.
fn quantile_w2(a: &Profile, b: &Profile) -> f64 {
    let (ma, mb) = (a.total(), b.total());
    if ma <= 0.0 || mb <= 0.0 {
        return 0.0;
    }
    let mean = 0.5 * (ma + mb);
    let pa = a.pieces(mean / ma);
    let pb = b.pieces(mean / mb);
    let eval = |p: &(f64, f64, f64, f64), q: f64| {
        let t = ((q - p.0) / (p.1 - p.0)).clamp(0.0, 1.0);
        p.2 + t * (p.3 - p.2)
    };
    let (mut ia, mut ib) = (0, 0);
    let mut q = 0.0;
    let mut acc = 0.0;
    while ia < pa.len() && ib < pb.len() {
        let end = pa[ia].1.min(pb[ib].1);
        if end > q {
            let d0 = eval(&pa[ia], q) - eval(&pb[ib], q);
            let d1 = eval(&pa[ia], end) - eval(&pb[ib], end);
            acc += (end - q) * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0;
            q = end;
        }
        if pa[ia].1 <= q {
            ia += 1;
        }
        if ib < pb.len() && pb[ib].1 <= q {
            ib += 1;
        }
    }
    acc.max(0.0).sqrt()
}

fn line_profile(f: &ScalarField) -> Profile {
    let g = f.grid();
    let h = g.h(0);
    let edges = (0..=g.nx()).map(|i| -0.5 * g.lengths()[0] + i as f64 * h).collect();
    let masses = f.values().iter().map(|v| v * h).collect();
    Profile { edges, masses }
}

fn radial_profile(f: &ScalarField) -> Profile {
    let g = f.grid();
    let [lx, ly] = g.lengths();
    let rmax = 0.5 * (lx * lx + ly * ly).sqrt();
    let dr = g.h_min() / SUBSAMPLES as f64;
    let nbins = (rmax / dr).ceil() as usize + 1;
    let mut masses = vec![0.0; nbins];
    let (hx, hy) = (g.h(0), g.h(1));
    let sy = if g.dim() == 1 { 1 } else { SUBSAMPLES };
    let w = g.cell_volume() / (SUBSAMPLES * sy) as f64;
    for (k, &v) in f.values().iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let c = g.center(k);
        for a in 0..SUBSAMPLES {
            let x = c[0] + hx * ((a as f64 + 0.5) / SUBSAMPLES as f64 - 0.5);
            for b in 0..sy {
                let y = if sy == 1 { 0.0 } else { c[1] + hy * ((b as f64 + 0.5) / sy as f64 - 0.5) };
                let bin = (((x * x + y * y).sqrt() / dr) as usize).min(nbins - 1);
                masses[bin] += v * w;
            }
        }
    }
    let edges = (0..=nbins).map(|i| i as f64 * dr).collect();
    Profile { edges, masses }
}

/// Relative L1 defect of `f` under the grid symmetries that fix the origin.
fn radial_asymmetry(f: &ScalarField) -> f64 {
    let g = f.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let v = f.values();
    let norm: f64 = v.iter().map(|x| x.abs()).sum();
    if norm == 0.0 {
        return 0.0;
    }
    let square = nx == ny && (g.h(0) - g.h(1)).abs() <= 1e-12 * g.h(0);
    let mut worst = 0.0_f64;
    let mut defect = |map: &dyn Fn(usize, usize) -> usize| {
        let mut s = 0.0;
        for j in 0..ny {
            for i in 0..nx {
                s += (v[g.idx(i, j)] - v[map(i, j)]).abs();
            }
        }
        worst = worst.max(s / norm);
    };
    defect(&|i, j| g.idx(nx - 1 - i, j));
    defect(&|i, j| g.idx(i, ny - 1 - j));
    if square {
        defect(&|i, j| g.idx(j, i));
        defect(&|i, j| g.idx(ny - 1 - j, i));
    }
    worst
}

/// W2 between two densities on a line grid by the quantile formula.
pub fn w2_line(mu: &ScalarField, nu: &ScalarField) -> Result<f64> {
    mu.same_grid(nu)?;
    if mu.grid().dim() != 1 {
        return Err(Error::InvalidParameter("w2_line needs a one-dimensional grid".into()));
    }
    check_density(mu, "mu")?;
    check_density(nu, "nu")?;
    check_mass(mu, nu)?;
    Ok(quantile_w2(&line_profile(mu), &line_profile(nu)))
}

fn check_mass(mu: &ScalarField, nu: &ScalarField) -> Result<()> {
    let (a, b) = (mu.integral(), nu.integral());
    let rel = (a - b).abs() / a.max(b).max(f64::MIN_POSITIVE);
    if rel > MASS_TOL {
        return Err(Error::MassMismatch { rel });
    }
    Ok(())
}

/// W2 between two radially symmetric densities.
///
/// In one dimension this is [`w2_line`]. In two dimensions both fields must
/// be invariant (to [`RADIAL_TOL`]) under the grid reflections and quarter
/// turns, and the distance is evaluated on the radial mass profiles.
pub fn w2_radial(mu: &ScalarField, nu: &ScalarField) -> Result<f64> {
    mu.same_grid(nu)?;
    if mu.grid().dim() == 1 {
        return w2_line(mu, nu);
    }
    check_density(mu, "mu")?;
    check_density(nu, "nu")?;
    check_mass(mu, nu)?;
    let asym = radial_asymmetry(mu).max(radial_asymmetry(nu));
    if asym > RADIAL_TOL {
        return Err(Error::NotRadial(asym));
    }
    Ok(quantile_w2(&radial_profile(mu), &radial_profile(nu)))
}

/// W2 between the radial mass profiles of two densities with no symmetry or
/// mass checks; masses are rescaled to their mean.
///
/// Since `||x| - |y|| <= |x - y|`, this is a lower bound for the true distance
/// and equals it for radial data.
pub fn w2_radial_profile(mu: &ScalarField, nu: &ScalarField) -> Result<f64> {
    mu.same_grid(nu)?;
    check_density(mu, "mu")?;
    check_density(nu, "nu")?;
    Ok(quantile_w2(&radial_profile(mu), &radial_profile(nu)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn ball(g: GridSpec, r: f64, height: f64) -> ScalarField {
        ScalarField::from_fn(g, |x| if x[0] * x[0] + x[1] * x[1] < r * r { height } else { 0.0 })
    }

    #[test]
    fn identical_fields_are_at_distance_zero() {
        let g = GridSpec::square(64, 2.0).unwrap();
        let b = ball(g, 1.0, 1.0);
        assert_eq!(w2_radial(&b, &b).unwrap(), 0.0);
    }

    #[test]
    fn line_translation_is_exact() {
        let g = GridSpec::new_1d(64, 4.0).unwrap();
        let mu = ScalarField::from_fn(g, |x| if (-1.0..0.0).contains(&x[0]) { 1.0 } else { 0.0 });
        let nu = ScalarField::from_fn(g, |x| if (0.0..1.0).contains(&x[0]) { 1.0 } else { 0.0 });
        assert!((w2_radial(&mu, &nu).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn line_dilation_matches_quadrature() {
        // uniform on [-1,1] against half-height uniform on [-2,2]: map x -> 2x,
        // W2^2 = int_{-1}^{1} x^2 dx = 2/3
        let g = GridSpec::new_1d(64, 8.0).unwrap();
        let mu = ScalarField::from_fn(g, |x| if x[0].abs() < 1.0 { 1.0 } else { 0.0 });
        let nu = ScalarField::from_fn(g, |x| if x[0].abs() < 2.0 { 0.5 } else { 0.0 });
        assert!((w2_line(&mu, &nu).unwrap() - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    /// Midpoint-rule quadrature of the radial quantile difference, from the
    /// closed-form mass profiles `F_mu(r) = pi r^2` and `F_nu(r) = pi r^2 / 2`.
    fn ball_pair_oracle() -> f64 {
        let total = std::f64::consts::PI;
        let n = 200_000;
        let dq = total / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let q = (i as f64 + 0.5) * dq;
            let ra = (q / std::f64::consts::PI).sqrt();
            let rb = (2.0 * q / std::f64::consts::PI).sqrt();
            acc += (ra - rb) * (ra - rb) * dq;
        }
        acc.sqrt()
    }

    #[test]
    fn unit_ball_against_spread_ball() {
        let oracle = ball_pair_oracle();
        assert!((oracle - 0.519_140_3).abs() < 1e-6, "oracle = {oracle}");
        let g = GridSpec::square(256, 2.0).unwrap();
        let mu = ball(g, 1.0, 1.0);
        let nu = ball(g, 2f64.sqrt(), 0.5);
        let w = w2_radial(&mu, &nu).unwrap();
        // cell-sampled disks carry O(h) boundary error
        assert!((w - oracle).abs() < 2.0 * g.h(0), "w2 = {w}, oracle = {oracle}");
    }

    #[test]
    fn rejects_mass_mismatch_and_asymmetry() {
        let g = GridSpec::square(128, 2.0).unwrap();
        let mu = ball(g, 1.0, 1.0);
        assert!(matches!(w2_radial(&mu, &ball(g, 0.9, 1.0)), Err(Error::MassMismatch { .. })));
        let ellipse = ScalarField::from_fn(g, |x| {
            if x[0] * x[0] / 1.5625 + x[1] * x[1] / 0.64 < 1.0 {
                1.0
            } else {
                0.0
            }
        });
        let r = w2_radial(&mu, &ellipse);
        assert!(matches!(r, Err(Error::NotRadial(_))), "{r:?}");
        let lower = w2_radial_profile(&mu, &ellipse).unwrap();
        assert!(lower > 0.0 && lower.is_finite());
    }
}
