//! Acceptance criteria, one test per criterion. Each test writes a single
//! `criterion N: PASS|FAIL ...` line straight to stdout so the verdicts show
//! up even when libtest captures output.

use std::io::Write;
use std::time::{Duration, Instant};

use macgame::capacity::UserSet;
use macgame::dynamics::{Dynamics, DynamicsRun, Protocol};
use macgame::evolution::{
    ess_check, expected_payoff, grid_with_point, symmetric_equilibrium, uniform_grid, EssTestSpec, PayoffMethod,
    PopulationState,
};
use macgame::game::{efficiency_metrics, is_nash, is_strong_equilibrium, potential};
use macgame::selection::{goodman_certificate, normalized_equilibrium};
use macgame::{CapacityRegionView, ChannelModel, NormalizedEqConfig, Utility};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

fn report(criterion: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "criterion {criterion}: {verdict} ({detail})").unwrap();
    out.flush().unwrap();
}

fn view(snr: &[f64]) -> CapacityRegionView {
    CapacityRegionView::new(ChannelModel::from_snr(snr.to_vec()).unwrap()).unwrap()
}

fn random_masses(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x: f64| x / total).collect()
}

#[test]
fn criterion_01_capacity_identities() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_identity: f64 = 0.0;
    let mut submodular_failures = 0usize;
    let mut monotone_failures = 0usize;
    for _ in 0..1000 {
        let m = rng.random_range(1..=8);
        let snr: Vec<f64> = (0..m).map(|_| 10f64.powf(rng.random_range(-2.0..2.0))).collect();
        let model = ChannelModel::from_snr(snr).unwrap();
        let full = UserSet::full(m);
        let c_full = model.capacity_of(full).unwrap();
        for i in 0..m {
            let rest = if m == 1 { 0.0 } else { model.capacity_of(full.without(i)).unwrap() };
            let err = (model.safe_rate(i, full).unwrap() - (c_full - rest)).abs();
            worst_identity = worst_identity.max(err);
        }
        let cap = |bits: u32| {
            if bits == 0 {
                0.0
            } else {
                model.capacity_of(UserSet::from_bits(bits)).unwrap()
            }
        };
        let caps: Vec<f64> = (0..1u32 << m).map(cap).collect();
        for a in 0..1usize << m {
            for i in 0..m {
                if caps[a | 1 << i] < caps[a] - 1e-12 {
                    monotone_failures += 1;
                }
            }
            for b in 0..1usize << m {
                if caps[a] + caps[b] < caps[a | b] + caps[a & b] - 1e-12 {
                    submodular_failures += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = worst_identity <= 1e-12
        && submodular_failures == 0
        && monotone_failures == 0
        && elapsed < Duration::from_secs(10);
    report(
        1,
        pass,
        &format!(
            "max |r - (C_N - C_N\\i)| = {worst_identity:.2e}, submodularity failures {submodular_failures}, \
             monotonicity failures {monotone_failures}, {elapsed:.2?}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_02_nash_iff_max_face() {
    let start = Instant::now();
    let models: [&[f64]; 4] = [&[1.0, 1.0], &[1.0, 1.0, 1.0], &[3.0, 1.0], &[3.0, 1.0, 2.0]];
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut checked = 0usize;
    let mut disagreements = 0usize;
    for (k, snr) in models.iter().enumerate() {
        let view = view(snr);
        let samples = view.sample_max_face(500, 2000 + k as u64).unwrap();
        for face in &samples {
            let on_face = view.max_face_residual(face).unwrap() == 0.0;
            if is_nash(&view, face).unwrap() != on_face || !on_face {
                disagreements += 1;
            }
            checked += 1;

            // shrink towards the origin, or push one coordinate outwards
            let mut off = face.to_vec();
            if rng.random_bool(0.5) {
                let shrink = 1.0 - 10f64.powf(rng.random_range(-5.0..-0.7));
                off.iter_mut().for_each(|x| *x *= shrink);
            } else {
                let j = rng.random_range(0..off.len());
                off[j] += 10f64.powf(rng.random_range(-5.0..-0.7));
            }
            let on_face = view.max_face_residual(&off).unwrap() == 0.0;
            if is_nash(&view, &off).unwrap() != on_face || on_face {
                disagreements += 1;
            }
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = disagreements == 0 && elapsed < Duration::from_secs(30);
    report(
        2,
        pass,
        &format!("{checked} profiles over 4 models, {disagreements} disagreements, {elapsed:.2?}"),
    );
    assert!(pass);
}

#[test]
fn criterion_03_strong_equilibrium() {
    let start = Instant::now();
    let view = view(&[1.0, 1.0, 1.0]);
    let g = Utility::Identity;
    let grid = 25;
    let step = view.single_capacity(0) / (grid - 1) as f64;

    let face = view.sample_max_face(50, 303).unwrap();
    let face_true = face
        .iter()
        .filter(|p| is_strong_equilibrium(&view, &g, p, grid).unwrap())
        .count();

    let mut rng = ChaCha8Rng::seed_from_u64(304);
    let mut interior = Vec::new();
    while interior.len() < 50 {
        let p: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..view.single_capacity(0))).collect();
        if view.min_slack(&p).unwrap() >= 2.0 * step {
            interior.push(p);
        }
    }
    let interior_true = interior
        .iter()
        .filter(|p| is_strong_equilibrium(&view, &g, p, grid).unwrap())
        .count();

    let elapsed = start.elapsed();
    let pass = face_true == 50 && interior_true == 0 && elapsed < Duration::from_secs(300);
    report(
        3,
        pass,
        &format!("face {face_true}/50 strong, interior {interior_true}/50 strong, {elapsed:.2?}"),
    );
    assert!(pass);
}

#[test]
fn criterion_04_price_of_anarchy() {
    let start = Instant::now();
    let mut details = Vec::new();
    let mut pass = true;
    for (k, snr) in [vec![1.0, 1.0], vec![1.0, 1.0, 1.0]].iter().enumerate() {
        let view = view(snr);
        let eff = efficiency_metrics(&view, &Utility::Identity, 500, 404 + k as u64).unwrap();
        pass &= (eff.spoa - 1.0).abs() <= 1e-6 && (eff.pos - 1.0).abs() <= 1e-6;
        details.push(format!("m={} spoa={:.9} pos={:.9}", snr.len(), eff.spoa, eff.pos));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(60);
    report(4, pass, &format!("{}, {elapsed:.2?}", details.join(", ")));
    assert!(pass);
}

#[test]
fn criterion_05_potential_identity() {
    let models: [&[f64]; 4] = [&[1.0, 1.0], &[3.0, 1.0], &[1.0, 1.0, 1.0], &[3.0, 1.0, 2.0]];
    let utilities = [Utility::Identity, Utility::Log1p, Utility::power(0.5).unwrap()];
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    while pairs < 1000 {
        let view = view(models[pairs % models.len()]);
        let g = &utilities[pairs % utilities.len()];
        let m = view.users();
        let alpha: Vec<f64> = (0..m).map(|i| rng.random_range(0.0..view.single_capacity(i))).collect();
        if !view.is_feasible(&alpha).unwrap() {
            continue;
        }
        let j = rng.random_range(0..m);
        let mut beta = alpha.clone();
        beta[j] = rng.random_range(0.0..view.single_capacity(j));
        if !view.is_feasible(&beta).unwrap() {
            continue;
        }
        let lhs = potential(&view, g, &alpha).unwrap() - potential(&view, g, &beta).unwrap();
        let rhs = g.eval(alpha[j]) - g.eval(beta[j]);
        worst = worst.max((lhs - rhs).abs());
        pairs += 1;
    }
    let pass = worst < 1e-12;
    report(5, pass, &format!("{pairs} feasible pairs, max error {worst:.2e}"));
    assert!(pass);
}

#[test]
fn criterion_06_normalized_equilibrium() {
    let g = Utility::Log1p;
    let mut pass = true;
    let mut details = Vec::new();
    for m in [2usize, 3] {
        let view = view(&vec![1.0; m]);
        let config = NormalizedEqConfig::equal_weights(m, g.clone()).unwrap();
        let eq = normalized_equilibrium(&view, &config).unwrap();
        let share = view.total_capacity() / m as f64;
        let profile_err = eq.profile.iter().map(|a| (a - share).abs()).fold(0.0, f64::max);
        pass &= profile_err <= 1e-9 && eq.kkt_residual < 1e-8;

        // interior points of the region
        let mut rng = ChaCha8Rng::seed_from_u64(606 + m as u64);
        let fd = 1e-5;
        let mut certified = 0;
        let mut jac_err: f64 = 0.0;
        let mut tested = 0;
        while tested < 20 {
            let p: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..view.single_capacity(0))).collect();
            if view.min_slack(&p).unwrap() <= 1e-2 {
                continue;
            }
            let cert = goodman_certificate(&view, &g, &p, &vec![1.0; m], fd).unwrap();
            if cert.negative_definite {
                certified += 1;
            }
            for (i, x) in p.iter().enumerate() {
                for k in 0..m {
                    let analytic = if i == k { -(1.0 + x).powi(-2) } else { 0.0 };
                    jac_err = jac_err.max((cert.jacobian[(i, k)] - analytic).abs());
                }
            }
            tested += 1;
        }
        pass &= certified == tested && jac_err <= 1e-6;
        details.push(format!(
            "m={m} profile err {profile_err:.1e} kkt {:.1e} certified {certified}/{tested} jacobian err {jac_err:.1e}",
            eq.kkt_residual
        ));
    }
    report(6, pass, &details.join(", "));
    assert!(pass);
}

#[test]
fn criterion_07_ess() {
    let start = Instant::now();
    let mut pass = true;
    let mut details = Vec::new();
    for m in [2usize, 3] {
        let view = view(&vec![1.0; m]);
        let share = symmetric_equilibrium(&view).unwrap();
        for g in [Utility::Identity, Utility::Log1p] {
            let eps = vec![0.1, 0.01, 0.001];
            let at = ess_check(&view, &g, &EssTestSpec::new(share, 50, eps.clone()).unwrap()).unwrap();
            let below = ess_check(&view, &g, &EssTestSpec::new(0.9 * share, 50, eps).unwrap()).unwrap();
            let ok = at.is_ess && !below.is_ess && below.witness.is_some();
            pass &= ok;
            let witness = below
                .witness
                .map(|w| format!("mutant {:.6} at eps {}", w.mutant, w.epsilon))
                .unwrap_or_else(|| "none".into());
            details.push(format!(
                "m={m} g={}: ess at r* {}, at 0.9r* {} (witness {witness})",
                g.name(),
                at.is_ess,
                below.is_ess
            ));
        }
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(60);
    report(7, pass, &format!("{}; {elapsed:.2?}", details.join("; ")));
    assert!(pass);
}

#[test]
fn criterion_08_rest_points() {
    let mut pass = true;
    let mut worst_rest: f64 = 0.0;
    for m in [2usize, 3] {
        let view = view(&vec![1.0; m]);
        let g = Utility::Identity;
        let share = symmetric_equilibrium(&view).unwrap();
        let grid = grid_with_point(view.single_capacity(0), 51, share);
        let state = PopulationState::dirac(grid, share).unwrap();
        for protocol in [
            Protocol::bnn(1.0).unwrap(),
            Protocol::replicator(1.0).unwrap(),
            Protocol::smith(1.0, 1.0).unwrap(),
            Protocol::smith(2.0, 1.0).unwrap(),
        ] {
            let dynamics = Dynamics::new(&view, &g, protocol, PayoffMethod::Exact).unwrap();
            worst_rest = worst_rest.max(dynamics.rest_point_residual(&state).unwrap());
        }
    }
    pass &= worst_rest < 1e-8;

    let view = view(&[1.0, 1.0]);
    let g = Utility::Identity;
    let dynamics = Dynamics::new(&view, &g, Protocol::bnn(1.0).unwrap(), PayoffMethod::Exact).unwrap();
    let grid = uniform_grid(view.single_capacity(0), 51);
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut least_moving = f64::INFINITY;
    for _ in 0..20 {
        let state = PopulationState::new(grid.clone(), random_masses(&mut rng, grid.len())).unwrap();
        least_moving = least_moving.min(dynamics.rest_point_residual(&state).unwrap());
    }
    pass &= least_moving > 1e-6;
    report(
        8,
        pass,
        &format!("max residual at Dirac(r*) {worst_rest:.2e}, min BNN residual off equilibrium {least_moving:.2e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_09_dynamics_convergence() {
    let view = view(&[1.0, 1.0]);
    let g = Utility::Identity;
    let target = 3f64.ln() / 2.0;
    let initial = PopulationState::uniform(view.single_capacity(0), 51).unwrap();
    let run = DynamicsRun {
        initial,
        dt: 0.01,
        steps: 20_000,
        record_every: 1,
    };
    let mut pass = true;
    let mut details = Vec::new();
    for protocol in [
        Protocol::bnn(1.0).unwrap(),
        Protocol::smith(1.0, 1.0).unwrap(),
        Protocol::replicator(1.0).unwrap(),
    ] {
        let start = Instant::now();
        let dynamics = Dynamics::new(&view, &g, protocol, PayoffMethod::Exact).unwrap();
        let trace = dynamics.simulate(&run).unwrap();
        let elapsed = start.elapsed();
        let hit = trace
            .records
            .iter()
            .find(|r| (r.mean_rate - target).abs() < 1e-2)
            .map(|r| r.t);
        let final_mean = trace.final_state.mean_rate();
        let ok = hit.is_some() && trace.max_drift < 1e-9 && elapsed < Duration::from_secs(120);
        pass &= ok;
        details.push(format!(
            "{}: final mean {final_mean:.6}, first within 1e-2 at t={}, max drift {:.1e}, {elapsed:.2?}",
            protocol.kind().name(),
            hit.map(|t| format!("{t}")).unwrap_or_else(|| "never".into()),
            trace.max_drift
        ));
    }
    report(9, pass, &details.join("; "));
    assert!(pass);
}

#[test]
fn criterion_10_montecarlo_estimator() {
    let view = view(&[1.0, 1.0, 1.0]);
    let g = Utility::Identity;
    let grid = uniform_grid(view.single_capacity(0), 21);
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut agree = 0;
    for k in 0..100u64 {
        let state = PopulationState::new(grid.clone(), random_masses(&mut rng, grid.len())).unwrap();
        let a = grid[rng.random_range(0..grid.len())];
        let exact = expected_payoff(&view, &g, a, &state, PayoffMethod::Exact).unwrap();
        let mc = expected_payoff(
            &view,
            &g,
            a,
            &state,
            PayoffMethod::MonteCarlo {
                samples: 100_000,
                seed: 10_000 + k,
            },
        )
        .unwrap();
        if (mc.value - exact.value).abs() <= 3.0 * mc.std_error {
            agree += 1;
        }
    }
    let pass = agree >= 99;
    report(10, pass, &format!("{agree}/100 states within 3 standard errors"));
    assert!(pass);
}
