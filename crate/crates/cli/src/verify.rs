//! The `verify` suite: invariant checks on one scenario, one line each.

use std::io::Write;
use std::path::PathBuf;

use macgame::capacity::UserSet;
use macgame::dynamics::{Dynamics, Protocol};
use macgame::evolution::{
    ess_check, expected_payoff, grid_with_point, symmetric_equilibrium, uniform_grid, EssTestSpec, PayoffMethod,
    PopulationState, MAX_EXACT_CELLS,
};
use macgame::game::{efficiency_metrics, is_nash, is_strong_equilibrium, potential, MAX_COALITION_USERS};
use macgame::rng::{stream_rng, Substream};
use macgame::selection::normalized_equilibrium;
use macgame::{CapacityRegionView, NormalizedEqConfig, Utility};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::format::sig9;
use crate::scenario::Scenario;
use crate::{CliError, CliResult};

const MAX_LATTICE_USERS: usize = 10;
const POTENTIAL_PAIRS: usize = 1000;
const STRONG_SAMPLES: usize = 10;
const MC_STATES: usize = 20;
const MC_SAMPLES: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VerifyReport {
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
}

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

type Check = fn(&Scenario, &CapacityRegionView, &Utility) -> macgame::Result<Outcome>;

const CHECKS: &[(&str, Check)] = &[
    ("safe-rate identity", safe_rate_identity),
    ("rank submodular and monotone", rank_lattice),
    ("face samples on the face", face_samples),
    ("nash iff maximal face", nash_iff_face),
    ("potential identity", potential_identity),
    ("strong equilibrium on the face", strong_on_face),
    ("efficiency ratios", efficiency),
    ("normalized equilibrium kkt", normalized),
    ("sorted-prefix membership", sorted_prefix),
    ("ess at the equal share", ess),
    ("rest point at the equal share", rest_point),
    ("monte carlo payoff", montecarlo),
];

pub fn run_suite(scenario: &Scenario, view: &CapacityRegionView, out: &mut dyn Write) -> CliResult<VerifyReport> {
    let g = scenario.utility()?;
    let mut report = VerifyReport::default();
    let stdout_err = |source| CliError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    };
    for (name, check) in CHECKS {
        let line = match check(scenario, view, &g) {
            Ok(Outcome::Pass(d)) => {
                report.passed += 1;
                format!("PASS {name}: {d}")
            }
            Ok(Outcome::Fail(d)) => {
                report.failed += 1;
                format!("FAIL {name}: {d}")
            }
            Ok(Outcome::Skip(d)) => {
                report.skipped += 1;
                format!("SKIP {name}: {d}")
            }
            Err(e) => {
                report.failed += 1;
                format!("FAIL {name}: {e}")
            }
        };
        writeln!(out, "{line}").map_err(stdout_err)?;
    }
    writeln!(
        out,
        "verify: {} passed, {} failed, {} skipped",
        report.passed, report.failed, report.skipped
    )
    .map_err(stdout_err)?;
    Ok(report)
}

fn rng(scenario: &Scenario, offset: u64) -> ChaCha8Rng {
    stream_rng(scenario.seed, Substream::MonteCarlo.base() + (1 << 32) + offset)
}

fn safe_rate_identity(_: &Scenario, view: &CapacityRegionView, _: &Utility) -> macgame::Result<Outcome> {
    let full = view.full_set();
    let mut worst: f64 = 0.0;
    for i in 0..view.users() {
        let rest = full.without(i);
        let rest_cap = if rest.is_empty() { 0.0 } else { view.rank(rest) };
        worst = worst.max((view.safe_rates()[i] - (view.total_capacity() - rest_cap)).abs());
    }
    Ok(verdict(worst <= 1e-12, format!("max error {}", sig9(worst))))
}

fn rank_lattice(_: &Scenario, view: &CapacityRegionView, _: &Utility) -> macgame::Result<Outcome> {
    let m = view.users();
    if m > MAX_LATTICE_USERS {
        return Ok(Outcome::Skip(format!("m = {m} exceeds {MAX_LATTICE_USERS}")));
    }
    let rank = |bits: usize| {
        if bits == 0 {
            0.0
        } else {
            view.rank(UserSet::from_bits(bits as u32))
        }
    };
    let mut failures = 0usize;
    for a in 0..1usize << m {
        for i in 0..m {
            failures += usize::from(rank(a | 1 << i) < rank(a) - 1e-12);
        }
        for b in 0..1usize << m {
            failures += usize::from(rank(a) + rank(b) < rank(a | b) + rank(a & b) - 1e-12);
        }
    }
    Ok(verdict(failures == 0, format!("{failures} violations over {} subset pairs", 1usize << (2 * m))))
}

fn face_samples(scenario: &Scenario, view: &CapacityRegionView, _: &Utility) -> macgame::Result<Outcome> {
    let samples = view.sample_max_face(scenario.face_samples, scenario.seed)?;
    let mut bad = 0;
    for p in &samples {
        if !view.is_feasible(p)? || view.max_face_residual(p)? != 0.0 {
            bad += 1;
        }
    }
    Ok(verdict(bad == 0, format!("{bad} of {} samples off the face", samples.len())))
}

fn nash_iff_face(scenario: &Scenario, view: &CapacityRegionView, _: &Utility) -> macgame::Result<Outcome> {
    let samples = view.sample_max_face(scenario.face_samples, scenario.seed)?;
    let mut rng = rng(scenario, 1);
    let mut disagreements = 0;
    for p in &samples {
        let mut points = vec![p.to_vec()];
        let shrink = 1.0 - 10f64.powf(rng.random_range(-5.0..-0.7));
        points.push(p.iter().map(|x| x * shrink).collect());
        let mut push = p.to_vec();
        let j = rng.random_range(0..push.len());
        push[j] += 10f64.powf(rng.random_range(-5.0..-0.7));
        points.push(push);
        for q in &points {
            if is_nash(view, q)? != (view.max_face_residual(q)? == 0.0) {
                disagreements += 1;
            }
        }
    }
    Ok(verdict(
        disagreements == 0,
        format!("{disagreements} disagreements over {} profiles", 3 * samples.len()),
    ))
}

/// Uniform in the box `∏[0, C_i)`, shrunk towards the origin until feasible.
fn random_feasible(view: &CapacityRegionView, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut p: Vec<f64> = (0..view.users())
        .map(|i| rng.random_range(0.0..view.single_capacity(i)))
        .collect();
    while !feasible(view, &p) {
        p.iter_mut().for_each(|x| *x *= 0.9);
    }
    p
}

fn feasible(view: &CapacityRegionView, p: &[f64]) -> bool {
    view.is_feasible(p).unwrap_or(false)
}

fn potential_identity(scenario: &Scenario, view: &CapacityRegionView, g: &Utility) -> macgame::Result<Outcome> {
    let mut rng = rng(scenario, 2);
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    while pairs < POTENTIAL_PAIRS {
        let alpha = random_feasible(view, &mut rng);
        let j = rng.random_range(0..view.users());
        let mut beta = alpha.clone();
        beta[j] = rng.random_range(0.0..view.single_capacity(j));
        if !feasible(view, &beta) {
            continue;
        }
        let dv = potential(view, g, &alpha)? - potential(view, g, &beta)?;
        worst = worst.max((dv - (g.eval(alpha[j]) - g.eval(beta[j]))).abs());
        pairs += 1;
    }
    Ok(verdict(worst < 1e-12, format!("max error {} over {pairs} pairs", sig9(worst))))
}

fn strong_on_face(scenario: &Scenario, view: &CapacityRegionView, g: &Utility) -> macgame::Result<Outcome> {
    let m = view.users();
    if m > MAX_COALITION_USERS {
        return Ok(Outcome::Skip(format!("m = {m} exceeds {MAX_COALITION_USERS}")));
    }
    let samples = view.sample_max_face(STRONG_SAMPLES, scenario.seed)?;
    let mut strong = 0;
    for p in &samples {
        strong += usize::from(is_strong_equilibrium(view, g, p, scenario.deviation_grid)?);
    }
    Ok(verdict(
        strong == samples.len(),
        format!("{strong}/{} face samples strong at grid {}", samples.len(), scenario.deviation_grid),
    ))
}

fn efficiency(scenario: &Scenario, view: &CapacityRegionView, g: &Utility) -> macgame::Result<Outcome> {
    let eff = efficiency_metrics(view, g, scenario.face_samples, scenario.seed)?;
    let detail = format!("spoa {} pos {}", sig9(eff.spoa), sig9(eff.pos));
    if matches!(g, Utility::Identity) {
        Ok(verdict(
            (eff.spoa - 1.0).abs() <= 1e-6 && (eff.pos - 1.0).abs() <= 1e-6,
            detail,
        ))
    } else {
        Ok(verdict(eff.spoa > 0.0 && eff.spoa <= eff.pos + 1e-12 && eff.pos <= 1.0 + 1e-12, detail))
    }
}

fn normalized(scenario: &Scenario, view: &CapacityRegionView, g: &Utility) -> macgame::Result<Outcome> {
    let m = view.users();
    // utilities without a strictly decreasing derivative are checked with ln(1+x)
    let utility = if g.is_strictly_concave() { g.clone() } else { Utility::Log1p };
    let weights = scenario.weights.clone().unwrap_or_else(|| vec![1.0; m]);
    let equal = weights.iter().all(|w| *w == weights[0]);
    let config = NormalizedEqConfig::new(weights, utility.clone())?;
    let eq = normalized_equilibrium(view, &config)?;
    let on_face = view.max_face_residual(&eq.profile)? == 0.0;
    let mut ok = on_face && eq.kkt_residual < 1e-8;
    if view.model().is_symmetric() && equal {
        let share = view.total_capacity() / m as f64;
        ok &= eq.profile.iter().all(|a| (a - share).abs() <= 1e-9);
    }
    Ok(verdict(
        ok,
        format!("g = {}, kkt residual {}, on face {on_face}", utility.name(), sig9(eq.kkt_residual)),
    ))
}

fn symmetric_only(view: &CapacityRegionView) -> Option<Outcome> {
    (!view.model().is_symmetric()).then(|| Outcome::Skip("asymmetric channel".into()))
}

fn sorted_prefix(scenario: &Scenario, view: &CapacityRegionView, _: &Utility) -> macgame::Result<Outcome> {
    if let Some(skip) = symmetric_only(view) {
        return Ok(skip);
    }
    let mut rng = rng(scenario, 3);
    let hi = view.single_capacity(0) * 1.1;
    let mut disagreements = 0;
    let points = 2000;
    for _ in 0..points {
        let p: Vec<f64> = (0..view.users()).map(|_| rng.random_range(0.0..hi)).collect();
        if view.is_feasible(&p)? != view.is_feasible_sorted_prefix(&p)? {
            disagreements += 1;
        }
    }
    Ok(verdict(disagreements == 0, format!("{disagreements} disagreements over {points} points")))
}

fn ess(scenario: &Scenario, view: &CapacityRegionView, g: &Utility) -> macgame::Result<Outcome> {
    if let Some(skip) = symmetric_only(view) {
        return Ok(skip);
    }
    let share = symmetric_equilibrium(view)?;
    let at = ess_check(view, g, &EssTestSpec::new(share, scenario.mutant_grid, scenario.epsilons.clone())?)?;
    let below = ess_check(
        view,
        g,
        &EssTestSpec::new(0.9 * share, scenario.mutant_grid, scenario.epsilons.clone())?,
    )?;
    Ok(verdict(
        at.is_ess && !below.is_ess && below.witness.is_some(),
        format!("stable at r* {}, stable at 0.9 r* {}", at.is_ess, below.is_ess),
    ))
}

fn exact_fits(view: &CapacityRegionView, points: usize) -> bool {
    (points as f64).powi(view.users() as i32 - 1) <= MAX_EXACT_CELLS
}

fn rest_point(scenario: &Scenario, view: &CapacityRegionView, g: &Utility) -> macgame::Result<Outcome> {
    if let Some(skip) = symmetric_only(view) {
        return Ok(skip);
    }
    if !exact_fits(view, scenario.grid_points + 1) {
        return Ok(Outcome::Skip("grid too large for exact payoffs".into()));
    }
    let share = symmetric_equilibrium(view)?;
    let grid = grid_with_point(view.single_capacity(0), scenario.grid_points, share);
    let state = PopulationState::dirac(grid, share)?;
    let mut worst: f64 = 0.0;
    for protocol in [
        Protocol::bnn(scenario.growth)?,
        Protocol::replicator(scenario.growth)?,
        Protocol::smith(scenario.theta, scenario.growth)?,
    ] {
        let dynamics = Dynamics::new(view, g, protocol, PayoffMethod::Exact)?;
        worst = worst.max(dynamics.rest_point_residual(&state)?);
    }
    Ok(verdict(worst < 1e-8, format!("max residual {}", sig9(worst))))
}

fn montecarlo(scenario: &Scenario, view: &CapacityRegionView, g: &Utility) -> macgame::Result<Outcome> {
    if let Some(skip) = symmetric_only(view) {
        return Ok(skip);
    }
    let points = 11;
    if !exact_fits(view, points) {
        return Ok(Outcome::Skip("too many users for exact payoffs".into()));
    }
    let mut rng = rng(scenario, 4);
    let grid = uniform_grid(view.single_capacity(0), points);
    let mut outside = 0;
    for k in 0..MC_STATES {
        let w: Vec<f64> = (0..points).map(|_| rng.random_range(0.01..1.0)).collect();
        let total: f64 = w.iter().sum();
        let state = PopulationState::new(grid.clone(), w.iter().map(|x| x / total).collect())?;
        let a = grid[rng.random_range(0..points)];
        let exact = expected_payoff(view, g, a, &state, PayoffMethod::Exact)?;
        let mc = expected_payoff(
            view,
            g,
            a,
            &state,
            PayoffMethod::MonteCarlo {
                samples: MC_SAMPLES,
                seed: scenario.seed.wrapping_add(k as u64),
            },
        )?;
        if (mc.value - exact.value).abs() > 4.0 * mc.std_error + 1e-12 {
            outside += 1;
        }
    }
    Ok(verdict(
        outside == 0,
        format!("{outside} of {MC_STATES} estimates beyond 4 standard errors"),
    ))
}
