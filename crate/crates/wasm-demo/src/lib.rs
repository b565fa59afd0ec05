//! Browser bindings: the two-user capacity pentagon, best replies, and a
//! short population-dynamics run.

use macgame::dynamics::{Dynamics, DynamicsRun, Protocol, ProtocolKind};
use macgame::evolution::{uniform_grid, PayoffMethod, PopulationState};
use macgame::game::best_response;
use macgame::{CapacityRegionView, ChannelModel, Utility};
use wasm_bindgen::prelude::*;

const MAX_DEMO_STEPS: usize = 200_000;

fn two_user_view(snr1: f64, snr2: f64) -> Result<CapacityRegionView, String> {
    let model = ChannelModel::from_snr(vec![snr1, snr2]).map_err(|e| e.to_string())?;
    CapacityRegionView::new(model).map_err(|e| e.to_string())
}

/// Corners of the pentagon, counter-clockwise from the origin, as
/// `[x0, y0, x1, y1, ...]`.
pub fn pentagon(snr1: f64, snr2: f64) -> Result<Vec<f64>, String> {
    let view = two_user_view(snr1, snr2)?;
    let (c1, c2, c) = (view.single_capacity(0), view.single_capacity(1), view.total_capacity());
    Ok(vec![0.0, 0.0, c1, 0.0, c1, c - c1, c - c2, c2, 0.0, c2])
}

pub fn reply(snr1: f64, snr2: f64, user: usize, other: f64) -> Result<f64, String> {
    if user > 1 {
        return Err(format!("user must be 0 or 1, got {user}"));
    }
    let view = two_user_view(snr1, snr2)?;
    best_response(&view, user, &[other]).map_err(|e| e.to_string())
}

/// Result of [`simulate`].
#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct DemoTrace {
    times: Vec<f64>,
    mean_rates: Vec<f64>,
    grid: Vec<f64>,
    masses: Vec<f64>,
    equal_share: f64,
}

#[wasm_bindgen]
impl DemoTrace {
    #[wasm_bindgen(getter)]
    pub fn times(&self) -> Vec<f64> {
        self.times.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn mean_rates(&self) -> Vec<f64> {
        self.mean_rates.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn grid(&self) -> Vec<f64> {
        self.grid.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn masses(&self) -> Vec<f64> {
        self.masses.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn equal_share(&self) -> f64 {
        self.equal_share
    }
}

/// Runs `steps` Euler steps from the uniform state on `points` rates in
/// `[0, C_1]`, `g(x) = x`, exact payoffs.
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    users: usize,
    snr: f64,
    protocol: &str,
    theta: f64,
    growth: f64,
    dt: f64,
    steps: usize,
    points: usize,
) -> Result<DemoTrace, String> {
    if !(2..=3).contains(&users) {
        return Err(format!("the demo runs 2 or 3 users, got {users}"));
    }
    if steps > MAX_DEMO_STEPS {
        return Err(format!("at most {MAX_DEMO_STEPS} steps"));
    }
    let kind = match protocol {
        "bnn" => ProtocolKind::Bnn,
        "replicator" => ProtocolKind::Replicator,
        "smith" => ProtocolKind::Smith,
        other => return Err(format!("unknown protocol `{other}`")),
    };
    let err = |e: macgame::Error| e.to_string();
    let view = CapacityRegionView::new(ChannelModel::from_snr(vec![snr; users]).map_err(err)?).map_err(err)?;
    let protocol = Protocol::new(kind, theta, growth).map_err(err)?;
    let g = Utility::Identity;
    let dynamics = Dynamics::new(&view, &g, protocol, PayoffMethod::Exact).map_err(err)?;
    let grid = uniform_grid(view.single_capacity(0), points);
    let n = grid.len();
    let initial = PopulationState::new(grid, vec![1.0 / n as f64; n]).map_err(err)?;
    let run = DynamicsRun {
        initial,
        dt,
        steps,
        record_every: (steps / 200).max(1),
    };
    let trace = dynamics.simulate(&run).map_err(err)?;
    Ok(DemoTrace {
        times: trace.records.iter().map(|r| r.t).collect(),
        mean_rates: trace.records.iter().map(|r| r.mean_rate).collect(),
        grid: trace.final_state.grid().to_vec(),
        masses: trace.final_state.masses().to_vec(),
        equal_share: view.total_capacity() / users as f64,
    })
}

#[wasm_bindgen(js_name = regionPolygon)]
pub fn region_polygon(snr1: f64, snr2: f64) -> Result<Vec<f64>, JsError> {
    pentagon(snr1, snr2).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = bestResponse)]
pub fn best_response_js(snr1: f64, snr2: f64, user: usize, other: f64) -> Result<f64, JsError> {
    reply(snr1, snr2, user, other).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = runDynamics)]
#[allow(clippy::too_many_arguments)]
pub fn run_dynamics(
    users: usize,
    snr: f64,
    protocol: &str,
    theta: f64,
    growth: f64,
    dt: f64,
    steps: usize,
    points: usize,
) -> Result<DemoTrace, JsError> {
    simulate(users, snr, protocol, theta, growth, dt, steps, points).map_err(|e| JsError::new(&e))
}
