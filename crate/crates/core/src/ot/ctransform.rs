//! Quadratic-cost c-transform `p^c(x) = min_y p(y) + |x - y|^2 / (2 tau)` on the grid.

use crate::error::{Error, Result};
use crate::grid::{transpose, GridSpec, ScalarField};

/// Largest grid accepted by [`brute_force_ctransform`].
pub const BRUTE_FORCE_LIMIT: usize = 4096;

/// Lower envelope of the parabolas `f[q] + c (x - q)^2` sampled at integer `x`.
///
/// Ties resolve to the smallest `q`.
fn envelope(f: &[f64], c: f64, out: &mut [f64], arg: &mut [usize], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    let n = f.len();
    v.clear();
    z.clear();
    v.push(0);
    z.push(f64::NEG_INFINITY);
    z.push(f64::INFINITY);
    let key = |q: usize| f[q] + c * (q * q) as f64;
    for q in 1..n {
        loop {
            let r = *v.last().expect("envelope never empties");
            let s = (key(q) - key(r)) / (2.0 * c * (q - r) as f64);
            let k = v.len() - 1;
            if s <= z[k] {
                v.pop();
                z.pop();
                continue;
            }
            v.push(q);
            z[k + 1] = s;
            z.push(f64::INFINITY);
            break;
        }
    }
    let mut k = 0;
    for x in 0..n {
        while z[k + 1] < x as f64 {
            k += 1;
        }
        let d = x as f64 - v[k] as f64;
        out[x] = f[v[k]] + c * d * d;
        arg[x] = v[k];
    }
}

fn pass(src: &[f64], width: usize, c: f64, out: &mut [f64], arg: &mut [usize]) {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        src.par_chunks(width)
            .zip(out.par_chunks_mut(width))
            .zip(arg.par_chunks_mut(width))
            .for_each_init(
                || (Vec::with_capacity(width), Vec::with_capacity(width + 1)),
                |(v, z), ((f, o), a)| envelope(f, c, o, a, v, z),
            );
    }
    #[cfg(not(feature = "parallel"))]
    {
        let (mut v, mut z) = (Vec::with_capacity(width), Vec::with_capacity(width + 1));
        for ((f, o), a) in src.chunks(width).zip(out.chunks_mut(width)).zip(arg.chunks_mut(width)) {
            envelope(f, c, o, a, &mut v, &mut z);
        }
    }
}

/// Separable transform of raw cell values; returns values and flat argmin indices.
pub(crate) fn ctransform_raw(grid: &GridSpec, p: &[f64], tau: f64) -> (Vec<f64>, Vec<usize>) {
    let (nx, ny) = (grid.nx(), grid.ny());
    let cx = grid.h(0) * grid.h(0) / (2.0 * tau);
    let mut g = vec![0.0; p.len()];
    let mut ax = vec![0usize; p.len()];
    pass(p, nx, cx, &mut g, &mut ax);
    if grid.dim() == 1 {
        return (g, ax);
    }
    let cy = grid.h(1) * grid.h(1) / (2.0 * tau);
    let mut gt = vec![0.0; p.len()];
    transpose(&g, nx, ny, &mut gt);
    let mut out_t = vec![0.0; p.len()];
    let mut ay_t = vec![0usize; p.len()];
    pass(&gt, ny, cy, &mut out_t, &mut ay_t);
    transpose(&out_t, ny, nx, &mut g);
    let mut arg = vec![0usize; p.len()];
    for j in 0..ny {
        for i in 0..nx {
            let jy = ay_t[i * ny + j];
            arg[j * nx + i] = jy * nx + ax[jy * nx + i];
        }
    }
    (g, arg)
}

fn check(p: &ScalarField, tau: f64) -> Result<()> {
    p.check_finite("p")?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    Ok(())
}

/// The c-transform by per-axis lower envelopes, linear in the number of cells.
pub fn ctransform(p: &ScalarField, tau: f64) -> Result<ScalarField> {
    ctransform_with_argmin(p, tau).map(|(f, _)| f)
}

/// The c-transform together with the (leftmost) minimizing cell for every cell.
pub fn ctransform_with_argmin(p: &ScalarField, tau: f64) -> Result<(ScalarField, Vec<usize>)> {
    check(p, tau)?;
    let (v, arg) = ctransform_raw(p.grid(), p.values(), tau);
    Ok((ScalarField::from_vec(*p.grid(), v)?, arg))
}

/// Exhaustive `O(N^2)` c-transform; a reference for [`ctransform`].
pub fn brute_force_ctransform(p: &ScalarField, tau: f64) -> Result<ScalarField> {
    check(p, tau)?;
    let g = p.grid();
    if g.len() > BRUTE_FORCE_LIMIT {
        return Err(Error::GridTooLarge { cells: g.len(), limit: BRUTE_FORCE_LIMIT });
    }
    let v = p.values();
    let out = (0..g.len())
        .map(|x| {
            let cx = g.center(x);
            let mut best = f64::INFINITY;
            for (y, &py) in v.iter().enumerate() {
                let cy = g.center(y);
                let d2 = (cx[0] - cy[0]).powi(2) + if g.dim() == 2 { (cx[1] - cy[1]).powi(2) } else { 0.0 };
                let val = py + d2 / (2.0 * tau);
                if val < best {
                    best = val;
                }
            }
            best
        })
        .collect();
    ScalarField::from_vec(*g, out)
}
