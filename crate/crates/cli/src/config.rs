//! TOML run configuration.
//!
//! ```toml
//! mode = "scheme"        # scheme | elliptic | hs_source | hs_potential
//!                        # | check_master | check_contraction | geometry
//! [grid]
//! n = 128                # or nx / ny; dim = 1 uses n only
//! half_width = 2.0       # box [-half_width, half_width]^d
//!
//! [params]
//! tau = 2e-3
//! t_final = 0.35
//! b = 0.0
//! diffusion = 0.0
//! tol = 1e-6
//! max_iters = 500
//!
//! [initial]
//! preset = "radial"      # fills every other field with the preset's values
//! rho0 = "disk"          # disk | blob | two-blobs, or rho0_file = "field.snap"
//! radius = 0.5
//! n0 = 2.0               # or n0_file = "nutrient.snap"
//!
//! [pair]                 # second datum for check_contraction
//! rho0 = "disk"
//! radius = 0.4
//! n0 = 2.0
//!
//! [output]
//! dir = "out"
//! snapshot_times = [0.0, 0.1]   # or snapshot_every = 0.05
//!
//! [geometry]
//! alpha = 0.5
//! holder_radius = 0.5
//! ```

use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use patchflow::grid::{read_snapshot, GridSpec, ScalarField};
use patchflow::presets::{self, preset};
use patchflow::scheme::{self, SchemeParams};
use serde::Deserialize;
use toml::Spanned;

#[derive(Debug, Clone, PartialEq)]
pub struct SchemaError {
    pub path: String,
    pub reason: String,
    pub line: Option<usize>,
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "config error at `{}` (line {l}): {}", self.path, self.reason),
            None => write!(f, "config error at `{}`: {}", self.path, self.reason),
        }
    }
}

impl std::error::Error for SchemaError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Scheme,
    Elliptic,
    HsSource,
    HsPotential,
    CheckMaster,
    CheckContraction,
    Geometry,
}

impl Mode {
    pub const NAMES: [&'static str; 7] =
        ["scheme", "elliptic", "hs_source", "hs_potential", "check_master", "check_contraction", "geometry"];

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "scheme" => Mode::Scheme,
            "elliptic" => Mode::Elliptic,
            "hs_source" => Mode::HsSource,
            "hs_potential" => Mode::HsPotential,
            "check_master" => Mode::CheckMaster,
            "check_contraction" => Mode::CheckContraction,
            "geometry" => Mode::Geometry,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub params: SchemeParams,
    pub rho0: ScalarField,
    pub n0: ScalarField,
    /// Second initial datum for contraction checks.
    pub pair: Option<(ScalarField, ScalarField)>,
    pub snapshot_times: Vec<f64>,
    pub out_dir: Option<PathBuf>,
    pub alpha: f64,
    pub holder_radius: f64,
}

impl RunConfig {
    /// The nutrient value when `n0` is spatially constant.
    pub fn constant_n0(&self) -> Option<f64> {
        let v = self.n0.values();
        v.iter().all(|&x| x == v[0]).then_some(v[0])
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Raw {
    mode: Spanned<String>,
    grid: Option<RawGrid>,
    params: Option<RawParams>,
    initial: Option<RawInitial>,
    pair: Option<RawInitial>,
    output: Option<RawOutput>,
    geometry: Option<RawGeometry>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    dim: Option<Spanned<usize>>,
    n: Option<Spanned<usize>>,
    nx: Option<Spanned<usize>>,
    ny: Option<Spanned<usize>>,
    half_width: Option<Spanned<f64>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawParams {
    tau: Option<Spanned<f64>>,
    t_final: Option<Spanned<f64>>,
    b: Option<Spanned<f64>>,
    diffusion: Option<Spanned<f64>>,
    tol: Option<Spanned<f64>>,
    max_iters: Option<Spanned<usize>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    preset: Option<Spanned<String>>,
    rho0: Option<Spanned<String>>,
    radius: Option<Spanned<f64>>,
    rho0_file: Option<Spanned<String>>,
    n0: Option<Spanned<f64>>,
    n0_file: Option<Spanned<String>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
    snapshot_times: Option<Spanned<Vec<f64>>>,
    snapshot_every: Option<Spanned<f64>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    alpha: Option<Spanned<f64>>,
    holder_radius: Option<Spanned<f64>>,
}

struct Ctx<'a> {
    text: &'a str,
    base: &'a Path,
}

impl Ctx<'_> {
    fn line(&self, offset: usize) -> usize {
        self.text[..offset.min(self.text.len())].matches('\n').count() + 1
    }

    fn err<T>(&self, path: &str, reason: impl Into<String>, at: Option<&Spanned<T>>) -> SchemaError {
        SchemaError { path: path.into(), reason: reason.into(), line: at.map(|s| self.line(s.span().start)) }
    }

    fn load(&self, path: &str, file: &Spanned<String>) -> Result<ScalarField, SchemaError> {
        let p = self.base.join(file.get_ref());
        let f = File::open(&p).map_err(|e| self.err(path, format!("{}: {e}", p.display()), Some(file)))?;
        read_snapshot(&mut BufReader::new(f))
            .map(|(_, field)| field)
            .map_err(|e| self.err(path, format!("{}: {e}", p.display()), Some(file)))
    }
}

fn val<T: Copy>(s: &Option<Spanned<T>>) -> Option<T> {
    s.as_ref().map(|v| *v.get_ref())
}

/// Parses a configuration whose relative field-file paths are resolved against the current directory.
pub fn parse_config(text: &str) -> Result<RunConfig, SchemaError> {
    parse_config_at(text, Path::new("."))
}

pub fn parse_config_at(text: &str, base: &Path) -> Result<RunConfig, SchemaError> {
    let cx = Ctx { text, base };
    let raw: Raw = toml::from_str(text).map_err(|e| SchemaError {
        path: "<document>".into(),
        reason: e.message().to_string(),
        line: e.span().map(|s| cx.line(s.start)),
    })?;
    let mode = Mode::parse(raw.mode.get_ref()).ok_or_else(|| {
        cx.err("mode", format!("unknown mode `{}`; expected one of {}", raw.mode.get_ref(), Mode::NAMES.join(", ")), Some(&raw.mode))
    })?;
    let grid_raw = raw.grid.unwrap_or_default();
    let params_raw = raw.params.unwrap_or_default();
    let init = raw.initial.unwrap_or_default();
    let out = raw.output.unwrap_or_default();
    let geo = raw.geometry.unwrap_or_default();

    let base_preset = match &init.preset {
        Some(name) => {
            let n = val(&grid_raw.n).unwrap_or(128);
            Some(preset(name.get_ref(), n).map_err(|e| cx.err("initial.preset", e.to_string(), Some(name)))?)
        }
        None => None,
    };

    let grid = match &base_preset {
        Some(p) => p.params.grid,
        None => {
            let dim = val(&grid_raw.dim).unwrap_or(2);
            let half = val(&grid_raw.half_width).unwrap_or(2.0);
            let n = val(&grid_raw.n);
            let built = match dim {
                1 => {
                    let n = n.ok_or_else(|| cx.err::<usize>("grid.n", "required for a 1D grid", None))?;
                    GridSpec::new_1d(n, 2.0 * half)
                }
                2 => {
                    let nx = val(&grid_raw.nx).or(n);
                    let ny = val(&grid_raw.ny).or(n);
                    match (nx, ny) {
                        (Some(nx), Some(ny)) => GridSpec::new_2d(nx, ny, 2.0 * half, 2.0 * half * ny as f64 / nx as f64),
                        _ => return Err(cx.err::<usize>("grid.n", "set n, or both nx and ny", None)),
                    }
                }
                d => return Err(cx.err("grid.dim", format!("dimension must be 1 or 2, got {d}"), grid_raw.dim.as_ref())),
            };
            built.map_err(|e| cx.err("grid", e.to_string(), grid_raw.n.as_ref()))?
        }
    };

    let mut params = match &base_preset {
        Some(p) => p.params,
        None => {
            let tau = params_raw.tau.as_ref().ok_or_else(|| cx.err::<f64>("params.tau", "required", None))?;
            let tf = params_raw.t_final.as_ref().ok_or_else(|| cx.err::<f64>("params.t_final", "required", None))?;
            SchemeParams::new(grid, *tau.get_ref(), *tf.get_ref())
        }
    };
    if let Some(v) = val(&params_raw.tau) {
        params.tau = v;
    }
    if let Some(v) = val(&params_raw.t_final) {
        params.t_final = v;
    }
    if let Some(v) = val(&params_raw.b) {
        params.b = v;
    }
    if let Some(v) = val(&params_raw.diffusion) {
        params.diffusion = v;
    }
    if let Some(v) = val(&params_raw.tol) {
        params.tol = v;
    }
    if let Some(v) = val(&params_raw.max_iters) {
        params.max_iters = v;
    }
    if let Err(e) = params.validate() {
        let (path, at) = if params.tau * params.b >= 1.0 {
            ("params.b", params_raw.b.as_ref().or(params_raw.tau.as_ref()))
        } else {
            ("params", params_raw.tau.as_ref())
        };
        let reason = if params.tau * params.b >= 1.0 {
            format!("tau * b = {} must be < 1: the death factor (1 - tau b) keeps the density update monotone", params.tau * params.b)
        } else {
            e.to_string()
        };
        return Err(cx.err(path, reason, at));
    }

    let (preset_rho, preset_n0) = match &base_preset {
        Some(p) => (Some(p.rho0.clone()), Some(p.n0.clone())),
        None => (None, None),
    };
    let (rho0, n0) = initial_datum(&cx, "initial", &init, grid, preset_rho, preset_n0)?;
    let pair = match &raw.pair {
        Some(p) => Some(initial_datum(&cx, "pair", p, grid, None, None)?),
        None => None,
    };
    if mode == Mode::CheckContraction && pair.is_none() {
        return Err(cx.err::<String>("pair", "check_contraction needs a [pair] section", None));
    }

    let snapshot_times = match (&out.snapshot_times, &out.snapshot_every) {
        (Some(_), Some(e)) => return Err(cx.err("output.snapshot_every", "give snapshot_times or snapshot_every, not both", Some(e))),
        (Some(ts), None) => {
            if let Some(bad) = ts.get_ref().iter().find(|&&t| !(0.0..=params.t_final + 1e-12).contains(&t)) {
                return Err(cx.err("output.snapshot_times", format!("time {bad} outside [0, {}]", params.t_final), Some(ts)));
            }
            ts.get_ref().clone()
        }
        (None, Some(e)) => {
            if !(*e.get_ref() > 0.0) {
                return Err(cx.err("output.snapshot_every", "must be positive", Some(e)));
            }
            scheme::every(*e.get_ref(), &params)
        }
        (None, None) => match &base_preset {
            Some(p) => p.snapshot_times.iter().copied().filter(|&t| t <= params.t_final + 1e-12).collect(),
            None => vec![0.0, params.t_final],
        },
    };
    if snapshot_times.is_empty() {
        return Err(cx.err::<f64>("output.snapshot_times", "empty schedule", None));
    }

    let alpha = val(&geo.alpha).unwrap_or(0.5);
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(cx.err("geometry.alpha", "must lie in (0, 1]", geo.alpha.as_ref()));
    }
    let holder_radius = val(&geo.holder_radius).unwrap_or(0.5);
    if !(holder_radius > 0.0) {
        return Err(cx.err("geometry.holder_radius", "must be positive", geo.holder_radius.as_ref()));
    }

    Ok(RunConfig {
        mode,
        params,
        rho0,
        n0,
        pair,
        snapshot_times,
        out_dir: out.dir.map(PathBuf::from),
        alpha,
        holder_radius,
    })
}

fn initial_datum(
    cx: &Ctx,
    section: &str,
    init: &RawInitial,
    grid: GridSpec,
    preset_rho: Option<ScalarField>,
    preset_n0: Option<ScalarField>,
) -> Result<(ScalarField, ScalarField), SchemaError> {
    let path = |k: &str| format!("{section}.{k}");
    let rho0 = match (&init.rho0, &init.rho0_file) {
        (Some(_), Some(f)) => return Err(cx.err(&path("rho0_file"), "give rho0 or rho0_file, not both", Some(f))),
        (None, Some(f)) => cx.load(&path("rho0_file"), f)?,
        (Some(shape), None) => match shape.get_ref().as_str() {
            "disk" => {
                let r = val(&init.radius).unwrap_or(0.5);
                if !(r > 0.0) {
                    return Err(cx.err(&path("radius"), "must be positive", init.radius.as_ref()));
                }
                presets::disk(grid, [0.0, 0.0], r)
            }
            "blob" => presets::blob(grid),
            "two-blobs" => presets::two_blobs(grid),
            other => {
                return Err(cx.err(&path("rho0"), format!("unknown shape `{other}`; expected disk, blob or two-blobs"), Some(shape)))
            }
        },
        (None, None) => preset_rho.ok_or_else(|| cx.err::<String>(&path("rho0"), "required (or set initial.preset)", None))?,
    };
    let n0 = match (&init.n0, &init.n0_file) {
        (Some(_), Some(f)) => return Err(cx.err(&path("n0_file"), "give n0 or n0_file, not both", Some(f))),
        (None, Some(f)) => cx.load(&path("n0_file"), f)?,
        (Some(c), None) => {
            if !(*c.get_ref() >= 0.0) {
                return Err(cx.err(&path("n0"), "must be nonnegative", Some(c)));
            }
            ScalarField::constant(grid, *c.get_ref())
        }
        (None, None) => preset_n0.ok_or_else(|| cx.err::<f64>(&path("n0"), "required (or set initial.preset)", None))?,
    };
    if rho0.grid() != &grid || n0.grid() != &grid {
        let at = init.rho0_file.as_ref().or(init.n0_file.as_ref());
        return Err(cx.err(section, "field file grid differs from the configured grid", at));
    }
    Ok((rho0, n0))
}
