//! Named scenarios shared by the command line tool and the test suites.

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};
use crate::scheme::SchemeParams;

/// Indicator of the disk of radius `r` about `center`, sampled at cell centers.
pub fn disk(g: GridSpec, center: [f64; 2], r: f64) -> ScalarField {
    ScalarField::from_fn(g, |x| {
        let (dx, dy) = (x[0] - center[0], x[1] - center[1]);
        if dx * dx + dy * dy < r * r {
            1.0
        } else {
            0.0
        }
    })
}

/// Star-shaped blob `|x| < r0 (1 + amp cos(lobes theta))`.
pub fn lobed(g: GridSpec, r0: f64, amp: f64, lobes: u32) -> ScalarField {
    ScalarField::from_fn(g, |x| {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let th = x[1].atan2(x[0]);
        if r < r0 * (1.0 + amp * (lobes as f64 * th).cos()) {
            1.0
        } else {
            0.0
        }
    })
}

/// Three-lobe blob used by the non-radial tests.
pub fn blob(g: GridSpec) -> ScalarField {
    lobed(g, 0.45, 0.3, 3)
}

/// Two disks of unequal size either side of `x = 0`; the larger one sits on the left.
pub fn two_blobs(g: GridSpec) -> ScalarField {
    let left = disk(g, [-0.4, 0.0], 0.35);
    let right = disk(g, [0.4, 0.0], 0.28);
    left.zip_map(&right, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub params: SchemeParams,
    pub rho0: ScalarField,
    pub n0: ScalarField,
    pub snapshot_times: Vec<f64>,
}

pub const PRESET_NAMES: [&str; 7] = ["radial", "blob", "stationary", "master-I", "master-II", "dendrite", "two-blob-merge"];

fn evenly(t_final: f64, count: usize) -> Vec<f64> {
    (0..=count).map(|k| t_final * k as f64 / count as f64).collect()
}

/// Builds a preset on an `n x n` grid.
pub fn preset(name: &str, n: usize) -> Result<Preset> {
    let mk = |half: f64| GridSpec::square(n, half);
    let p = match name {
        "radial" => {
            let g = mk(2.0)?;
            let mut params = SchemeParams::new(g, 1e-3, 0.35);
            params.tau = if n <= 128 { 2e-3 } else { 1e-3 };
            Preset {
                name: "radial",
                params,
                rho0: disk(g, [0.0, 0.0], 0.5),
                n0: ScalarField::constant(g, 2.0),
                snapshot_times: evenly(0.35, 5),
            }
        }
        "blob" | "master-I" | "master-II" => {
            let g = mk(2.0)?;
            let params = SchemeParams::new(g, 1e-3, 0.3);
            Preset {
                name: match name {
                    "blob" => "blob",
                    "master-I" => "master-I",
                    _ => "master-II",
                },
                params,
                rho0: blob(g),
                n0: ScalarField::constant(g, 2.0),
                snapshot_times: vec![0.0, 0.1, 0.2, 0.3],
            }
        }
        "stationary" => {
            let g = mk(2.0)?;
            let params = SchemeParams::new(g, 1e-2, 8.0);
            Preset {
                name: "stationary",
                params,
                rho0: disk(g, [0.0, 0.0], 1.0),
                n0: ScalarField::constant(g, 0.5),
                snapshot_times: evenly(8.0, 8),
            }
        }
        "dendrite" => {
            let g = mk(3.0)?;
            let mut params = SchemeParams::new(g, 2e-3, 6.0);
            params.b = 0.4;
            Preset {
                name: "dendrite",
                params,
                rho0: disk(g, [0.0, 0.0], 0.25),
                n0: ScalarField::constant(g, 2.0),
                snapshot_times: vec![0.0, 2.0, 4.0, 5.0, 6.0],
            }
        }
        "two-blob-merge" => {
            let g = mk(2.0)?;
            let params = SchemeParams::new(g, 2e-3, 0.4);
            Preset {
                name: "two-blob-merge",
                params,
                rho0: two_blobs(g),
                n0: ScalarField::constant(g, 2.0),
                snapshot_times: evenly(0.4, 8),
            }
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown preset `{other}`; known presets: {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_build_valid_patches() {
        for name in PRESET_NAMES {
            let p = preset(name, 64).unwrap();
            p.params.validate().unwrap();
            assert!(p.rho0.values().iter().all(|&v| v == 0.0 || v == 1.0), "{name}");
            assert!(p.rho0.support_margin(0.0).unwrap() >= 4, "{name}");
            assert!(p.snapshot_times.iter().all(|&t| t <= p.params.t_final));
        }
        assert!(preset("nope", 64).is_err());
    }

    #[test]
    fn blob_is_star_shaped_and_two_blobs_are_separate() {
        let g = GridSpec::square(128, 2.0).unwrap();
        assert!(crate::geometry::extract_patch(&blob(g)).unwrap().is_star_shaped());
        let tb = two_blobs(g);
        assert_eq!(tb.at(64, 64), 0.0);
        assert_eq!(tb.at(63, 64), 0.0);
    }
}
