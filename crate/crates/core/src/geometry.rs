//! Free-boundary diagnostics: patch extraction, reflections, arrival times.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{norms, GridSpec, ScalarField};

pub const RAYS: usize = 256;
const THRESHOLD: f64 = 0.5;
pub const HOLDER_PAIRS: usize = 10_000;
pub const HOLDER_SEED: u64 = 0x5eed_0f_a11;

/// Discrete tumor region `{rho > 1/2}` and its polar description about the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGeometry {
    pub indicator: ScalarField,
    /// Inside cells with at least one face neighbour outside.
    pub boundary: Vec<usize>,
    pub center_of_mass: [f64; 2],
    pub r_min: f64,
    pub r_max: f64,
    /// Outermost crossing radius per ray; ray `j` points at angle `2 pi j / rays`.
    pub polar: Vec<f64>,
    /// Number of level crossings met along each ray.
    pub crossings: Vec<usize>,
    pub origin_inside: bool,
}

impl PatchGeometry {
    pub fn area(&self) -> f64 {
        self.indicator.integral()
    }

    /// Anisotropic perimeter of the indicator.
    pub fn perimeter(&self) -> f64 {
        norms(&self.indicator).bv
    }

    /// `perimeter / sqrt(area)`, scale-free.
    pub fn roughness(&self) -> f64 {
        self.perimeter() / self.area().sqrt()
    }

    pub fn is_star_shaped(&self) -> bool {
        self.origin_inside && self.crossings.iter().all(|&c| c == 1)
    }

    pub fn ray_angle(&self, j: usize) -> f64 {
        2.0 * std::f64::consts::PI * j as f64 / self.polar.len() as f64
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        let g = self.indicator.grid();
        let c = g.to_cell_coords(x);
        let (i, j) = (c[0].round(), c[1].round());
        if i < 0.0 || j < 0.0 || i as usize >= g.nx() || j as usize >= g.ny() {
            return false;
        }
        self.indicator.at(i as usize, j as usize) > 0.5
    }
}

fn ray_directions(grid: &GridSpec) -> Vec<[f64; 2]> {
    if grid.dim() == 1 {
        return vec![[1.0, 0.0], [-1.0, 0.0]];
    }
    (0..RAYS)
        .map(|j| {
            let th = 2.0 * std::f64::consts::PI * j as f64 / RAYS as f64;
            [th.cos(), th.sin()]
        })
        .collect()
}

/// Crossings of the 1/2 level along a ray, linearly interpolated between samples.
fn cast(rho: &ScalarField, dir: [f64; 2], dr: f64, rmax: f64) -> (usize, f64) {
    let mut prev = rho.sample([0.0, 0.0]) - THRESHOLD;
    let mut count = 0;
    let mut outer = 0.0;
    let steps = (rmax / dr).ceil() as usize;
    for s in 1..=steps {
        let r = s as f64 * dr;
        let cur = rho.sample([r * dir[0], r * dir[1]]) - THRESHOLD;
        if (prev > 0.0) != (cur > 0.0) {
            count += 1;
            outer = r - dr * cur / (cur - prev);
        }
        prev = cur;
    }
    (count, outer)
}

pub fn extract_patch(rho: &ScalarField) -> Result<PatchGeometry> {
    rho.check_finite("rho")?;
    let g = *rho.grid();
    let indicator = rho.map(|v| if v > THRESHOLD { 1.0 } else { 0.0 });
    let ind = indicator.values();
    if ind.iter().all(|&v| v == 0.0) {
        return Err(Error::EmptyPatch);
    }
    let boundary = (0..g.len())
        .filter(|&k| ind[k] == 1.0 && (g.neighbors(k).any(|(nb, _)| ind[nb] == 0.0) || g.cells_to_boundary(k) == 0))
        .collect();
    let [lx, ly] = g.lengths();
    let rmax = 0.5 * (lx * lx + ly * ly).sqrt();
    let dr = 0.25 * g.h_min();
    let (crossings, polar): (Vec<usize>, Vec<f64>) =
        ray_directions(&g).into_iter().map(|d| cast(rho, d, dr, rmax)).unzip();
    let r_min = polar.iter().copied().fold(f64::INFINITY, f64::min);
    let r_max = polar.iter().copied().fold(0.0, f64::max);
    Ok(PatchGeometry {
        center_of_mass: indicator.center_of_mass(),
        indicator,
        boundary,
        r_min,
        r_max,
        polar,
        crossings,
        origin_inside: rho.sample([0.0, 0.0]) > THRESHOLD,
    })
}

/// Smallest and largest outer boundary radius, `None` for an empty patch.
pub fn boundary_radii(rho: &ScalarField) -> Option<(f64, f64)> {
    extract_patch(rho).ok().map(|p| (p.r_min, p.r_max))
}

/// The hyperplane `{x : x . normal = offset}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperplane {
    pub normal: [f64; 2],
    pub offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `x . normal > offset`
    Positive,
    /// `x . normal < offset`
    Negative,
}

impl Hyperplane {
    pub fn new(normal: [f64; 2], offset: f64) -> Result<Self> {
        let n = (normal[0] * normal[0] + normal[1] * normal[1]).sqrt();
        if !(n > 0.0 && n.is_finite() && offset.is_finite()) {
            return Err(Error::InvalidParameter("hyperplane needs a nonzero finite normal".into()));
        }
        Ok(Self { normal: [normal[0] / n, normal[1] / n], offset })
    }

    pub fn signed_distance(&self, x: [f64; 2]) -> f64 {
        x[0] * self.normal[0] + x[1] * self.normal[1] - self.offset
    }

    pub fn reflect(&self, x: [f64; 2]) -> [f64; 2] {
        let s = 2.0 * self.signed_distance(x);
        [x[0] - s * self.normal[0], x[1] - s * self.normal[1]]
    }

    fn on_side(&self, x: [f64; 2], side: Side) -> bool {
        let s = self.signed_distance(x);
        match side {
            Side::Positive => s > 0.0,
            Side::Negative => s < 0.0,
        }
    }
}

/// Cell index of `x` if it is a cell center (to 1e-9 cells).
fn exact_cell(g: &GridSpec, x: [f64; 2]) -> Option<Option<usize>> {
    let c = g.to_cell_coords(x);
    let (i, j) = (c[0].round(), c[1].round());
    if (c[0] - i).abs() > 1e-9 || (c[1] - j).abs() > 1e-9 {
        return None;
    }
    if i < 0.0 || j < 0.0 || i as usize >= g.nx() || j as usize >= g.ny() {
        return Some(None);
    }
    Some(Some(g.idx(i as usize, j as usize)))
}

/// `f o phi_H`. Cell centers map to cell centers for grid-exact planes; other
/// planes fall back to bilinear sampling and the returned flag is `false`.
pub fn reflect_field(f: &ScalarField, h: &Hyperplane) -> (ScalarField, bool) {
    let g = *f.grid();
    let exact = (0..g.len()).all(|k| exact_cell(&g, h.reflect(g.center(k))).is_some());
    let v = f.values();
    let out = ScalarField::from_fn(g, |x| {
        let y = h.reflect(x);
        if exact {
            exact_cell(&g, y).flatten().map_or(0.0, |k| v[k])
        } else {
            f.sample(y)
        }
    });
    (out, exact)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionReport {
    /// `||(rho_H - rho)_+||_{L1(H side)}` per snapshot.
    pub violations: Vec<f64>,
    /// L1 change on the tested side from reflecting twice; zero for grid-exact planes.
    pub resample_floor: f64,
    pub exact: bool,
}

impl ReflectionReport {
    pub fn max_violation(&self) -> f64 {
        self.violations.iter().copied().fold(0.0, f64::max)
    }
}

fn side_l1_excess(a: &ScalarField, b: &ScalarField, h: &Hyperplane, side: Side, abs: bool) -> f64 {
    let g = a.grid();
    let mut s = 0.0;
    for (k, (x, y)) in a.values().iter().zip(b.values()).enumerate() {
        if h.on_side(g.center(k), side) {
            s += if abs { (x - y).abs() } else { (x - y).max(0.0) };
        }
    }
    s * g.cell_volume()
}

pub fn reflection_violation(traj: &[ScalarField], h: &Hyperplane, side: Side) -> Result<ReflectionReport> {
    let Some(first) = traj.first() else {
        return Err(Error::SnapshotScheduleEmpty);
    };
    let mut exact = true;
    let mut floor = 0.0_f64;
    let mut violations = Vec::with_capacity(traj.len());
    for rho in traj {
        rho.same_grid(first)?;
        let (rh, ex) = reflect_field(rho, h);
        exact &= ex;
        if !ex {
            let (back, _) = reflect_field(&rh, h);
            floor = floor.max(side_l1_excess(&back, rho, h, side, true));
        }
        violations.push(side_l1_excess(&rh, rho, h, side, false));
    }
    Ok(ReflectionReport { violations, resample_floor: floor, exact })
}

pub const FAN_NORMALS: usize = 16;
pub const FAN_OFFSETS: usize = 4;

/// Area of `phi_H(Omega cap H+) \ Omega`, maximized over the hyperplanes of the
/// given fan that keep `B_r(0)` on the origin side.
pub fn fan_violation(patch: &PatchGeometry, r: f64, normals: &[[f64; 2]], offsets: &[f64]) -> Result<f64> {
    let g = *patch.indicator.grid();
    if g.dim() != 2 {
        return Err(Error::InvalidParameter("reflection fans need d = 2".into()));
    }
    let ind = patch.indicator.values();
    let mut worst = 0.0_f64;
    for &nv in normals {
        for &s in offsets.iter().filter(|&&s| s >= r) {
            let h = Hyperplane::new(nv, s)?;
            let cells = (0..g.len())
                .filter(|&k| ind[k] == 1.0 && h.signed_distance(g.center(k)) > 0.0)
                .filter(|&k| !patch.contains(h.reflect(g.center(k))))
                .count();
            worst = worst.max(cells as f64 * g.cell_volume());
        }
    }
    Ok(worst)
}

/// r-reflection test on 16 normals and 4 offsets spread over `[r, r_max)`.
pub fn r_reflection_violation(patch: &PatchGeometry, r: f64) -> Result<f64> {
    let g = patch.indicator.grid();
    if g.dim() != 2 {
        return Err(Error::InvalidParameter("r-reflection needs d = 2".into()));
    }
    if !(r > 0.0) {
        return Err(Error::InvalidParameter("r must be positive".into()));
    }
    if !patch.origin_inside || patch.r_min < r {
        return Err(Error::BallNotContained(r));
    }
    let normals: Vec<[f64; 2]> = (0..FAN_NORMALS)
        .map(|j| {
            let th = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / FAN_NORMALS as f64;
            [th.cos(), th.sin()]
        })
        .collect();
    let span = (patch.r_max - r).max(0.0);
    let offsets: Vec<f64> = (0..FAN_OFFSETS).map(|k| r + span * k as f64 / FAN_OFFSETS as f64).collect();
    fan_violation(patch, r, &normals, &offsets)
}

/// First snapshot time at which `w > w_thresh`, `+inf` where never.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalTimeField {
    pub times: Vec<f64>,
    pub grid: GridSpec,
}

impl ArrivalTimeField {
    /// As a field, with `+inf` replaced by `fill`.
    pub fn to_field(&self, fill: f64) -> ScalarField {
        let v = self.times.iter().map(|&t| if t.is_finite() { t } else { fill }).collect();
        ScalarField::from_vec(self.grid, v).expect("arrival times match their grid")
    }
}

/// Default threshold `1e-8 max(w_final)`.
pub fn default_w_thresh(w_final: &ScalarField) -> f64 {
    1e-8 * w_final.max()
}

/// `snaps` are `(t, w)` pairs in increasing time with spacing at most `10 tau`.
pub fn arrival_times(snaps: &[(f64, ScalarField)], tau: f64, w_thresh: f64) -> Result<ArrivalTimeField> {
    let Some((_, w0)) = snaps.first() else {
        return Err(Error::SnapshotScheduleEmpty);
    };
    let grid = *w0.grid();
    let limit = 10.0 * tau;
    for pair in snaps.windows(2) {
        let gap = pair[1].0 - pair[0].0;
        if gap > limit * (1.0 + 1e-9) {
            return Err(Error::SparseTrajectory { spacing: gap, limit });
        }
        if gap < 0.0 {
            return Err(Error::InvalidParameter("snapshot times must increase".into()));
        }
    }
    let mut times = vec![f64::INFINITY; grid.len()];
    for (t, w) in snaps {
        if *w.grid() != grid {
            return Err(Error::GridMismatch);
        }
        for (tk, &wk) in times.iter_mut().zip(w.values()) {
            if tk.is_infinite() && wk > w_thresh {
                *tk = *t;
            }
        }
    }
    Ok(ArrivalTimeField { times, grid })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderEstimate {
    pub modulus: f64,
    /// Cells attaining the modulus.
    pub pair: (usize, usize),
    pub pairs_used: usize,
}

/// `sup |T_x - T_y| / |x - y|^alpha` over seeded random pairs with both times
/// finite and `|x - y| <= radius_cap`.
pub fn holder_modulus(field: &ArrivalTimeField, alpha: f64, radius_cap: f64) -> Result<HolderEstimate> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let g = field.grid;
    let finite: Vec<usize> = (0..g.len()).filter(|&k| field.times[k].is_finite()).collect();
    if finite.len() < 2 || !(radius_cap > 0.0) {
        return Err(Error::NoFinitePairs);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(HOLDER_SEED);
    let (hx, hy) = (g.h(0), if g.dim() == 2 { g.h(1) } else { 0.0 });
    let ri = (radius_cap / hx).floor() as i64;
    let rj = if g.dim() == 2 { (radius_cap / hy).floor() as i64 } else { 0 };
    let mut best = HolderEstimate { modulus: 0.0, pair: (finite[0], finite[0]), pairs_used: 0 };
    for _ in 0..HOLDER_PAIRS * 4 {
        if best.pairs_used == HOLDER_PAIRS {
            break;
        }
        let a = finite[rng.gen_range(0..finite.len())];
        let (i, j) = g.ij(a);
        let di = rng.gen_range(-ri..=ri);
        let dj = rng.gen_range(-rj..=rj);
        let (bi, bj) = (i as i64 + di, j as i64 + dj);
        if (di, dj) == (0, 0) || bi < 0 || bj < 0 || bi as usize >= g.nx() || bj as usize >= g.ny() {
            continue;
        }
        let b = g.idx(bi as usize, bj as usize);
        let dist = ((di as f64 * hx).powi(2) + (dj as f64 * hy).powi(2)).sqrt();
        if dist > radius_cap || !field.times[b].is_finite() {
            continue;
        }
        best.pairs_used += 1;
        let q = (field.times[a] - field.times[b]).abs() / dist.powf(alpha);
        if q > best.modulus {
            best.modulus = q;
            best.pair = (a, b);
        }
    }
    if best.pairs_used == 0 {
        return Err(Error::NoFinitePairs);
    }
    Ok(best)
}

/// Largest `|d ln r / d theta|` of the polar graph of a star-shaped patch.
///
/// Differences are taken between rays whose arc separation at `r_min` is at
/// least eight cells (adjacent rays on fine grids), so that the staircase of
/// the cell indicator is not differentiated.
pub fn polar_lipschitz(patch: &PatchGeometry) -> Result<f64> {
    if patch.indicator.grid().dim() != 2 {
        return Err(Error::InvalidParameter("polar graphs need d = 2".into()));
    }
    if !patch.is_star_shaped() {
        let rays = patch.crossings.iter().filter(|&&c| c != 1).count();
        return Err(Error::NotStarShaped { rays: rays.max(1) });
    }
    let n = patch.polar.len();
    let dth = 2.0 * std::f64::consts::PI / n as f64;
    let h = patch.indicator.grid().h_min();
    let stride = ((8.0 * h / (patch.r_min * dth)).ceil() as usize).clamp(1, n / 8);
    let span = stride as f64 * dth;
    Ok((0..n)
        .map(|j| (patch.polar[(j + stride) % n].ln() - patch.polar[j].ln()).abs() / span)
        .fold(0.0, f64::max))
}
