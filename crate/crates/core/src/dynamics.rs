//! Constrained evolutionary dynamics on a discretized action grid.
//!
//! With payoffs `F_i = F(x_i, λ)`, average `F̄ = Σ_j λ_j F_j`, base weights
//! `ŵ` and growth `K`:
//!
//! ```text
//! BNN:        v_i = K [ŵ_i e_i − λ_i Σ_j ŵ_j e_j],        e_i = max(F_i − F̄, 0)
//! replicator: v_i = K λ_i (F_i − F̄)
//! θ-Smith:    v_i = K [ŵ_i Σ_j λ_j φ(F_i − F_j) − λ_i Σ_j ŵ_j φ(F_j − F_i)],
//!             φ(d) = max(d, 0)^θ
//! ```
//!
//! Switches into actions failing `x ≤ C_N − (m−1)E(λ)` are blocked. The flow
//! is integrated by explicit Euler with clip-and-renormalize.

use crate::capacity::CapacityRegionView;
use crate::error::{Error, Result};
use crate::evolution::{
    check_exact_size, exact_payoff, montecarlo_payoff, passes_indicator, PayoffMethod, PopulationState,
};
use crate::rng::{stream_rng, Substream};
use crate::utility::Utility;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolKind {
    Bnn,
    Replicator,
    Smith,
}

impl ProtocolKind {
    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::Bnn => "bnn",
            ProtocolKind::Replicator => "replicator",
            ProtocolKind::Smith => "smith",
        }
    }
}

/// Revision protocol with growth parameter `K` (and `θ` for Smith).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Protocol {
    kind: ProtocolKind,
    theta: f64,
    growth: f64,
}

impl Protocol {
    pub fn new(kind: ProtocolKind, theta: f64, growth: f64) -> Result<Self> {
        if !(growth.is_finite() && growth > 0.0) {
            return Err(Error::InvalidArgument(format!("growth K must be positive, got {growth}")));
        }
        if kind == ProtocolKind::Smith && !(theta.is_finite() && theta >= 1.0) {
            return Err(Error::InvalidArgument(format!("theta must be ≥ 1, got {theta}")));
        }
        Ok(Protocol { kind, theta, growth })
    }

    pub fn bnn(growth: f64) -> Result<Self> {
        Self::new(ProtocolKind::Bnn, 1.0, growth)
    }

    pub fn replicator(growth: f64) -> Result<Self> {
        Self::new(ProtocolKind::Replicator, 1.0, growth)
    }

    pub fn smith(theta: f64, growth: f64) -> Result<Self> {
        Self::new(ProtocolKind::Smith, theta, growth)
    }

    pub fn kind(&self) -> ProtocolKind {
        self.kind
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn growth(&self) -> f64 {
        self.growth
    }
}

/// Time-stepping parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsRun {
    pub initial: PopulationState,
    pub dt: f64,
    pub steps: usize,
    pub record_every: usize,
}

/// One recorded sample of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub mean_rate: f64,
    pub avg_payoff: f64,
    pub velocity_l1: f64,
    /// `|Σλ − 1|` before renormalization in the step that produced this state.
    pub mass_drift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    pub final_state: PopulationState,
    pub max_drift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: PopulationState,
    pub drift: f64,
}

/// Payoffs, average payoff and velocity at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    pub payoffs: Vec<f64>,
    pub avg_payoff: f64,
    pub velocity: Vec<f64>,
}

impl Flow {
    pub fn l1(&self) -> f64 {
        self.velocity.iter().map(|v| v.abs()).sum()
    }
}

/// A symmetric population game together with a protocol and payoff method.
#[derive(Debug, Clone)]
pub struct Dynamics<'a> {
    view: &'a CapacityRegionView,
    utility: &'a Utility,
    protocol: Protocol,
    method: PayoffMethod,
}

impl<'a> Dynamics<'a> {
    pub fn new(view: &'a CapacityRegionView, utility: &'a Utility, protocol: Protocol, method: PayoffMethod) -> Result<Self> {
        if !view.model().is_symmetric() {
            return Err(Error::AsymmetricModel("population dynamics need equal SNRs"));
        }
        if let PayoffMethod::MonteCarlo { samples, .. } = method {
            if samples < 2 {
                return Err(Error::InvalidArgument("Monte Carlo needs at least 2 samples".into()));
            }
        }
        Ok(Dynamics {
            view,
            utility,
            protocol,
            method,
        })
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol
    }

    /// `F(x_i, λ)` for every grid point. Monte Carlo draws come from
    /// substream `(tick, i)`, so results do not depend on evaluation order.
    pub fn payoffs(&self, state: &PopulationState, tick: u64) -> Result<Vec<f64>> {
        match self.method {
            PayoffMethod::Exact => {
                check_exact_size(self.view, state)?;
                Ok(state
                    .grid()
                    .iter()
                    .map(|a| exact_payoff(self.view, self.utility, *a, state))
                    .collect())
            }
            PayoffMethod::MonteCarlo { samples, seed } => {
                let n = state.len() as u64;
                state
                    .grid()
                    .iter()
                    .enumerate()
                    .map(|(i, a)| {
                        let stream = Substream::Dynamics.base() + tick * n + i as u64;
                        let mut rng = stream_rng(seed, stream);
                        montecarlo_payoff(self.view, self.utility, *a, state, samples, &mut rng).map(|e| e.value)
                    })
                    .collect()
            }
        }
    }

    pub fn flow(&self, state: &PopulationState) -> Result<Flow> {
        self.flow_at(state, 0)
    }

    fn flow_at(&self, state: &PopulationState, tick: u64) -> Result<Flow> {
        let payoffs = self.payoffs(state, tick)?;
        let lambda = state.masses();
        let w = state.base_weights();
        let mean = state.mean_rate();
        let open: Vec<bool> = state
            .grid()
            .iter()
            .map(|a| passes_indicator(self.view, *a, mean))
            .collect();
        let avg: f64 = lambda.iter().zip(&payoffs).map(|(l, f)| l * f).sum();
        let k = self.protocol.growth;
        let n = state.len();

        let velocity: Vec<f64> = match self.protocol.kind {
            ProtocolKind::Bnn => {
                let excess: Vec<f64> = (0..n)
                    .map(|i| if open[i] { (payoffs[i] - avg).max(0.0) } else { 0.0 })
                    .collect();
                let outflow: f64 = w.iter().zip(&excess).map(|(w, e)| w * e).sum();
                (0..n)
                    .map(|i| k * (w[i] * excess[i] - lambda[i] * outflow))
                    .collect()
            }
            ProtocolKind::Replicator => (0..n)
                .map(|i| {
                    let f = if open[i] { payoffs[i] } else { 0.0 };
                    k * lambda[i] * (f - avg)
                })
                .collect(),
            ProtocolKind::Smith => {
                let theta = self.protocol.theta;
                let phi = |d: f64| if d > 0.0 { d.powf(theta) } else { 0.0 };
                (0..n)
                    .map(|i| {
                        let inflow = if open[i] {
                            w[i] * (0..n).map(|j| lambda[j] * phi(payoffs[i] - payoffs[j])).sum::<f64>()
                        } else {
                            0.0
                        };
                        let outflow = lambda[i]
                            * (0..n)
                                .filter(|&j| open[j])
                                .map(|j| w[j] * phi(payoffs[j] - payoffs[i]))
                                .sum::<f64>();
                        k * (inflow - outflow)
                    })
                    .collect()
            }
        };
        Ok(Flow {
            payoffs,
            avg_payoff: avg,
            velocity,
        })
    }

    /// Mass velocity `v_i` at every grid point.
    pub fn velocity(&self, state: &PopulationState) -> Result<Vec<f64>> {
        Ok(self.flow(state)?.velocity)
    }

    /// `‖v‖₁`; zero exactly at rest points.
    pub fn rest_point_residual(&self, state: &PopulationState) -> Result<f64> {
        Ok(self.flow(state)?.l1())
    }

    /// One explicit Euler step.
    pub fn step(&self, state: &PopulationState, dt: f64) -> Result<StepOutcome> {
        self.step_at(state, dt, 0).map(|(outcome, _)| outcome)
    }

    fn step_at(&self, state: &PopulationState, dt: f64, tick: u64) -> Result<(StepOutcome, Flow)> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        let flow = self.flow_at(state, tick)?;
        let mut masses: Vec<f64> = state
            .masses()
            .iter()
            .zip(&flow.velocity)
            .map(|(m, v)| m + dt * v)
            .collect();
        if masses.iter().any(|m| !m.is_finite()) {
            return Err(Error::StepTooLarge);
        }
        masses.iter_mut().for_each(|m| *m = m.max(0.0));
        let total: f64 = masses.iter().sum();
        if total.is_nan() || total <= 0.0 {
            return Err(Error::StepTooLarge);
        }
        let drift = (total - 1.0).abs();
        masses.iter_mut().for_each(|m| *m /= total);
        let state = state.with_masses(masses)?;
        Ok((StepOutcome { state, drift }, flow))
    }

    /// Runs `steps` Euler steps, recording at tick 0, every `record_every`
    /// ticks and at the final tick.
    pub fn simulate(&self, run: &DynamicsRun) -> Result<Trace> {
        if run.record_every == 0 {
            return Err(Error::InvalidArgument("record_every must be at least 1".into()));
        }
        if !(run.dt.is_finite() && run.dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", run.dt)));
        }
        let mut state = run.initial.clone();
        let mut records = Vec::new();
        let mut drift = 0.0;
        let mut max_drift: f64 = 0.0;
        for tick in 0..=run.steps {
            let record = tick % run.record_every == 0 || tick == run.steps;
            if tick == run.steps {
                if record {
                    let flow = self.flow_at(&state, tick as u64)?;
                    records.push(self.record(tick, run.dt, &state, &flow, drift));
                }
                break;
            }
            let (outcome, flow) = self.step_at(&state, run.dt, tick as u64)?;
            if record {
                records.push(self.record(tick, run.dt, &state, &flow, drift));
            }
            drift = outcome.drift;
            max_drift = max_drift.max(drift);
            state = outcome.state;
        }
        Ok(Trace {
            records,
            final_state: state,
            max_drift,
        })
    }

    fn record(&self, tick: usize, dt: f64, state: &PopulationState, flow: &Flow, drift: f64) -> TraceRecord {
        TraceRecord {
            t: tick as f64 * dt,
            mean_rate: state.mean_rate(),
            avg_payoff: flow.avg_payoff,
            velocity_l1: flow.l1(),
            mass_drift: drift,
        }
    }
}
