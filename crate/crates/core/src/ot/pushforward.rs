use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};

/// Central-difference gradient of `p` at cell `(i, j)` in units of cells
/// travelled per unit `tau`, i.e. `grad p / h` per axis. One-sided at the box edge.
fn grad_cells(g: &GridSpec, p: &[f64], i: usize, j: usize) -> [f64; 2] {
    let k = g.idx(i, j);
    let diff = |lo: Option<usize>, hi: Option<usize>, h: f64| -> f64 {
        match (lo, hi) {
            (Some(a), Some(b)) => (p[b] - p[a]) / (2.0 * h * h),
            (None, Some(b)) => (p[b] - p[k]) / (h * h),
            (Some(a), None) => (p[k] - p[a]) / (h * h),
            (None, None) => 0.0,
        }
    };
    let gx = diff(
        (i > 0).then(|| k - 1),
        (i + 1 < g.nx()).then(|| k + 1),
        g.h(0),
    );
    let gy = if g.dim() == 2 {
        diff(
            (j > 0).then(|| k - g.nx()),
            (j + 1 < g.ny()).then(|| k + g.nx()),
            g.h(1),
        )
    } else {
        0.0
    };
    [gx, gy]
}

/// Bilinear (cloud-in-cell) deposit of `mass` at continuous cell coordinates `c`.
///
/// Weights that would land beyond the outermost cell centers are folded back onto
/// the edge cells so that mass is conserved; returns false if `c` lies outside the box.
fn deposit(g: &GridSpec, out: &mut [f64], c: [f64; 2], mass: f64) -> bool {
    let (nx, ny) = (g.nx() as f64, g.ny() as f64);
    if !(c[0] >= -0.5 && c[0] <= nx - 0.5) {
        return false;
    }
    let split = |x: f64, n: usize| -> (usize, usize, f64) {
        let x = x.clamp(0.0, (n - 1) as f64);
        let f = x.floor();
        let i0 = f as usize;
        let t = x - f;
        (i0, (i0 + 1).min(n - 1), t)
    };
    let (i0, i1, tx) = split(c[0], g.nx());
    if g.dim() == 1 {
        out[i0] += mass * (1.0 - tx);
        out[i1] += mass * tx;
        return true;
    }
    if !(c[1] >= -0.5 && c[1] <= ny - 0.5) {
        return false;
    }
    let (j0, j1, ty) = split(c[1], g.ny());
    out[g.idx(i0, j0)] += mass * (1.0 - tx) * (1.0 - ty);
    out[g.idx(i1, j0)] += mass * tx * (1.0 - ty);
    out[g.idx(i0, j1)] += mass * (1.0 - tx) * ty;
    out[g.idx(i1, j1)] += mass * tx * ty;
    true
}

/// `(id + tau grad p)_# rho` on raw values; `None` if some mass leaves the box.
pub(crate) fn pushforward_raw(g: &GridSpec, rho: &[f64], p: &[f64], tau: f64) -> Option<Vec<f64>> {
    let mut out = vec![0.0; rho.len()];
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let k = g.idx(i, j);
            if rho[k] == 0.0 {
                continue;
            }
            let d = grad_cells(g, p, i, j);
            let c = [i as f64 + tau * d[0], j as f64 + tau * d[1]];
            if !deposit(g, &mut out, c, rho[k]) {
                return None;
            }
        }
    }
    Some(out)
}

/// Pushes `rho` forward by `x -> x + tau grad p(x)`, splitting each cell's mass
/// bilinearly among the cells around its image. Total mass is conserved.
pub fn pushforward(rho: &ScalarField, p: &ScalarField, tau: f64) -> Result<ScalarField> {
    rho.same_grid(p)?;
    rho.check_finite("rho")?;
    p.check_finite("p")?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    let out = pushforward_raw(rho.grid(), rho.values(), p.values(), tau).ok_or(Error::MapLeavesBox)?;
    ScalarField::from_vec(*rho.grid(), out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob(g: GridSpec) -> ScalarField {
        ScalarField::from_fn(g, |x| if (x[0] - 0.1).powi(2) + x[1] * x[1] < 0.3 { 1.0 } else { 0.0 })
    }

    #[test]
    fn zero_pressure_is_identity() {
        let g = GridSpec::square(32, 1.0).unwrap();
        let r = blob(g);
        assert_eq!(pushforward(&r, &ScalarField::zeros(g), 0.1).unwrap(), r);
    }

    #[test]
    fn affine_pressure_translates() {
        // grad p = (0.5, -0.25): shift by tau * grad p = exactly (2h, -h) with h = 1/16, tau = 0.25
        let g = GridSpec::square(32, 1.0).unwrap();
        let r = blob(g);
        let p = ScalarField::from_fn(g, |x| 0.5 * x[0] - 0.25 * x[1] + 1.0);
        let out = pushforward(&r, &p, 0.25).unwrap();
        for j in 1..31 {
            for i in 2..32 {
                assert!((out.at(i, j - 1) - r.at(i - 2, j)).abs() < 1e-12);
            }
        }
        assert!((out.integral() - r.integral()).abs() < 1e-12 * r.integral());
    }

    #[test]
    fn fractional_shift_smears_within_one_cell() {
        let g = GridSpec::new_1d(32, 2.0).unwrap();
        let r = ScalarField::from_fn(g, |x| if x[0].abs() < 0.3 { 1.0 } else { 0.0 });
        let p = ScalarField::from_fn(g, |x| 0.3 * x[0]);
        let out = pushforward(&r, &p, 0.1).unwrap();
        let shifted = ScalarField::from_fn(g, |x| r.sample([x[0] - 0.03, 0.0]));
        assert!(out.l1_distance(&shifted) < 1e-12);
    }

    #[test]
    fn leaving_the_box_is_an_error() {
        let g = GridSpec::square(16, 1.0).unwrap();
        let r = blob(g);
        let p = ScalarField::from_fn(g, |x| 10.0 * x[0]);
        assert_eq!(pushforward(&r, &p, 1.0), Err(Error::MapLeavesBox));
    }
}
