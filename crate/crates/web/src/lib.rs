//! Browser bindings: a growing patch, the 1D c-transform and the mass factor.

use patchflow::grid::{GridSpec, ScalarField};
use patchflow::master::m_of_t;
use patchflow::ot::ctransform;
use patchflow::presets::preset;
use patchflow::scheme::{self, SchemeParams, SimState};
use wasm_bindgen::prelude::*;

fn js(e: patchflow::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// A running simulation of one of the built-in presets.
#[wasm_bindgen]
pub struct Simulation {
    params: SchemeParams,
    state: SimState,
}

#[wasm_bindgen]
impl Simulation {
    /// `n x n` grid; `n0` and `b` override the preset's nutrient level and death rate.
    #[wasm_bindgen(constructor)]
    pub fn new(name: &str, n: usize, n0: f64, b: f64) -> Result<Simulation, JsError> {
        let p = preset(name, n).map_err(js)?;
        let mut params = p.params;
        params.b = b;
        params.t_final = f64::INFINITY;
        let nutrient = ScalarField::constant(params.grid, n0);
        let mut check = params;
        check.t_final = 0.0;
        let state = SimState::initial(&p.rho0, &nutrient, &check).map_err(js)?;
        Ok(Simulation { params, state })
    }

    /// Advances `k` steps; stops early with an error if the scheme fails.
    pub fn advance(&mut self, k: usize) -> Result<(), JsError> {
        for _ in 0..k {
            let (next, _) = scheme::step(&self.state, &self.params).map_err(js)?;
            self.state = next;
        }
        Ok(())
    }

    pub fn time(&self) -> f64 {
        self.state.t
    }

    pub fn mass(&self) -> f64 {
        self.state.rho.integral()
    }

    pub fn size(&self) -> usize {
        self.params.grid.nx()
    }

    /// Row-major density, `y` increasing with the row index.
    pub fn density(&self) -> Vec<f64> {
        self.state.rho.values().to_vec()
    }

    pub fn nutrient(&self) -> Vec<f64> {
        self.state.n.values().to_vec()
    }

    pub fn pressure(&self) -> Vec<f64> {
        self.state.p.values().to_vec()
    }
}

/// c-transform of `p` sampled on `p.len()` cells covering an interval of length `len`.
#[wasm_bindgen]
pub fn ctransform_1d(p: Vec<f64>, len: f64, tau: f64) -> Result<Vec<f64>, JsError> {
    let g = GridSpec::new_1d(p.len(), len).map_err(js)?;
    let f = ScalarField::from_vec(g, p).map_err(js)?;
    Ok(ctransform(&f, tau).map_err(js)?.into_values())
}

/// `m(t)` at `samples` evenly spaced times in `[0, t_final]`.
#[wasm_bindgen]
pub fn mass_factor_curve(n0: f64, t_final: f64, samples: usize) -> Result<Vec<f64>, JsError> {
    let k = samples.max(2);
    (0..k).map(|i| m_of_t(n0, t_final * i as f64 / (k - 1) as f64).map_err(js)).collect()
}
