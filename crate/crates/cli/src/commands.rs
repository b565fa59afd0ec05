use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use macgame::dynamics::{Dynamics, DynamicsRun, Protocol, ProtocolKind};
use macgame::evolution::{
    ess_check, grid_with_point, symmetric_equilibrium, uniform_grid, EssTestSpec, MutantVerdict, PopulationState,
};
use macgame::game::{
    efficiency_metrics, find_coalition_deviation, is_pareto_optimal, nash_check, MAX_COALITION_USERS,
    MAX_PARETO_USERS,
};
use macgame::selection::{goodman_certificate, normalized_equilibrium, Bound};
use macgame::{CapacityRegionView, NormalizedEqConfig, Trace};

use crate::format::{sig9, sig9_list};
use crate::scenario::{InitialState, Scenario};
use crate::{verify, CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "macgame", version, about = "Rate allocation games on the Gaussian multiple access channel")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Scenario file (`key = value` lines).
    pub scenario: PathBuf,
    /// Print the fully resolved scenario and exit.
    #[arg(long)]
    pub dump_config: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print every subset capacity C_J and the safe rates.
    Region {
        #[command(flatten)]
        common: Common,
        /// Also print this many points sampled from the maximal face.
        #[arg(long, default_value_t = 0)]
        face_points: usize,
    },
    /// Best response of one user to the others' rates.
    Br {
        #[command(flatten)]
        common: Common,
        /// User index, 1-based.
        #[arg(long)]
        user: usize,
        /// Rates of the other users in index order.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        others: Vec<f64>,
    },
    /// Nash, strong-equilibrium and Pareto verdicts for a profile.
    CheckEq {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        profile: Vec<f64>,
        /// Largest best-response gap accepted as equilibrium.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Exit with status 1 unless the profile is a Nash equilibrium.
        #[arg(long)]
        assert: bool,
    },
    /// Strong price of anarchy, price of stability and the social optimum.
    Metrics {
        #[command(flatten)]
        common: Common,
    },
    /// Normalized equilibrium for the scenario weights.
    Normalized {
        #[command(flatten)]
        common: Common,
        /// Run the negative-definiteness check at this interior profile.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        certify: Option<Vec<f64>>,
        /// Finite-difference step of the check.
        #[arg(long, default_value_t = 1e-5)]
        fd_step: f64,
    },
    /// Invasion test of a symmetric resident rate.
    Ess {
        #[command(flatten)]
        common: Common,
        /// Resident rate (default C_N/m).
        #[arg(long, allow_hyphen_values = true)]
        resident: Option<f64>,
        /// Exit with status 1 unless the resident is evolutionarily stable.
        #[arg(long)]
        assert: bool,
    },
    /// Integrate the population dynamics and write the trace CSVs.
    Dynamics {
        #[command(flatten)]
        common: Common,
        /// Trace CSV path (overrides `trace_csv`).
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Final-state CSV path (overrides `final_csv`).
        #[arg(long = "final")]
        final_state: Option<PathBuf>,
    },
    /// Run the invariant suite on the scenario.
    Verify {
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Region { common, .. }
            | Command::Br { common, .. }
            | Command::CheckEq { common, .. }
            | Command::Metrics { common }
            | Command::Normalized { common, .. }
            | Command::Ess { common, .. }
            | Command::Dynamics { common, .. }
            | Command::Verify { common } => common,
        }
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match execute(&cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn load_scenario(path: &Path) -> CliResult<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(Scenario::parse(&text)?)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

macro_rules! outln {
    ($out:expr, $($arg:tt)*) => {
        writeln!($out, $($arg)*).map_err(|source| CliError::Io { path: PathBuf::from("<stdout>"), source })?
    };
}

pub fn execute(command: &Command, out: &mut dyn Write) -> CliResult<()> {
    let common = command.common();
    let scenario = load_scenario(&common.scenario)?;
    if common.dump_config {
        write!(out, "{}", scenario.dump()).map_err(io_err(Path::new("<stdout>")))?;
        return Ok(());
    }
    let view = scenario.view()?;
    match command {
        Command::Region { face_points, .. } => region(&scenario, &view, *face_points, out),
        Command::Br { user, others, .. } => best_reply(&view, *user, others, out),
        Command::CheckEq {
            profile, tol, assert, ..
        } => check_eq(&scenario, &view, profile, *tol, *assert, out),
        Command::Metrics { .. } => metrics(&scenario, &view, out),
        Command::Normalized { certify, fd_step, .. } => normalized(&scenario, &view, certify.as_deref(), *fd_step, out),
        Command::Ess { resident, assert, .. } => ess(&scenario, &view, *resident, *assert, out),
        Command::Dynamics { trace, final_state, .. } => {
            let trace_path = trace.clone().unwrap_or_else(|| PathBuf::from(&scenario.trace_csv));
            let final_path = final_state.clone().unwrap_or_else(|| PathBuf::from(&scenario.final_csv));
            dynamics(&scenario, &view, &trace_path, &final_path, out)
        }
        Command::Verify { .. } => {
            let report = verify::run_suite(&scenario, &view, out)?;
            if report.failed > 0 {
                return Err(CliError::Failed(format!("{} verification check(s) failed", report.failed)));
            }
            Ok(())
        }
    }
}

fn region(scenario: &Scenario, view: &CapacityRegionView, face_points: usize, out: &mut dyn Write) -> CliResult<()> {
    outln!(out, "users = {}", view.users());
    outln!(out, "snr = {}", sig9_list(view.model().snr()));
    for set in view.constraint_rows() {
        outln!(out, "C{set} = {}", sig9(view.rank(set)));
    }
    for (i, r) in view.safe_rates().iter().enumerate() {
        outln!(out, "r_{} = {}", i + 1, sig9(*r));
    }
    if face_points > 0 {
        for p in view.sample_max_face(face_points, scenario.seed)? {
            outln!(out, "face_point = {}", sig9_list(&p));
        }
    }
    Ok(())
}

fn best_reply(view: &CapacityRegionView, user: usize, others: &[f64], out: &mut dyn Write) -> CliResult<()> {
    let m = view.users();
    if user == 0 || user > m {
        return Err(CliError::Usage(format!("--user must lie in 1..={m}, got {user}")));
    }
    if others.len() + 1 != m {
        return Err(CliError::Usage(format!("--others needs {} rates, got {}", m - 1, others.len())));
    }
    let br = macgame::game::best_response(view, user - 1, others)?;
    outln!(out, "BR_{user} = {}", sig9(br));
    Ok(())
}

fn check_profile(view: &CapacityRegionView, profile: &[f64]) -> CliResult<()> {
    if profile.len() != view.users() {
        return Err(CliError::Usage(format!(
            "--profile needs {} rates, got {}",
            view.users(),
            profile.len()
        )));
    }
    if profile.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(CliError::Usage("profile rates must be non-negative".into()));
    }
    Ok(())
}

fn check_eq(
    scenario: &Scenario,
    view: &CapacityRegionView,
    profile: &[f64],
    tol: f64,
    assert: bool,
    out: &mut dyn Write,
) -> CliResult<()> {
    check_profile(view, profile)?;
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(CliError::Usage(format!("--tol must be non-negative, got {tol}")));
    }
    let g = scenario.utility()?;
    let nash = nash_check(view, profile)?;
    let is_nash = nash.feasible && nash.max_gap <= tol;
    let m = view.users();
    let strong = if m <= MAX_COALITION_USERS {
        let deviation = find_coalition_deviation(view, &g, profile, scenario.deviation_grid)?;
        (is_nash && deviation.is_none()).to_string()
    } else {
        "n/a".to_string()
    };
    let pareto = if m <= MAX_PARETO_USERS {
        is_pareto_optimal(view, &g, profile, scenario.deviation_grid)?.to_string()
    } else {
        "n/a".to_string()
    };
    outln!(out, "nash: {is_nash}, strong: {strong}, pareto: {pareto}");
    outln!(out, "feasible = {}", nash.feasible);
    if nash.feasible {
        outln!(out, "best_responses = {}", sig9_list(&nash.best_responses));
        outln!(out, "max_br_gap = {}", sig9(nash.max_gap));
    }
    outln!(out, "max_face_residual = {}", sig9(view.max_face_residual(profile)?));
    if assert && !is_nash {
        return Err(CliError::Failed("profile is not a Nash equilibrium".into()));
    }
    Ok(())
}

fn metrics(scenario: &Scenario, view: &CapacityRegionView, out: &mut dyn Write) -> CliResult<()> {
    let g = scenario.utility()?;
    let eff = efficiency_metrics(view, &g, scenario.face_samples, scenario.seed)?;
    outln!(out, "spoa = {}", sig9(eff.spoa));
    outln!(out, "pos = {}", sig9(eff.pos));
    outln!(out, "social_opt = {}", sig9(eff.social_opt));
    outln!(out, "worst_equilibrium = {}", sig9(eff.worst_equilibrium));
    outln!(out, "best_equilibrium = {}", sig9(eff.best_equilibrium));
    outln!(out, "candidates = {}", eff.candidates);
    Ok(())
}

fn normalized(
    scenario: &Scenario,
    view: &CapacityRegionView,
    certify: Option<&[f64]>,
    fd_step: f64,
    out: &mut dyn Write,
) -> CliResult<()> {
    let m = view.users();
    let g = scenario.utility()?;
    let weights = scenario.weights.clone().unwrap_or_else(|| vec![1.0; m]);
    let config = NormalizedEqConfig::new(weights, g.clone())?;
    let eq = normalized_equilibrium(view, &config)?;
    for (j, a) in eq.profile.iter().enumerate() {
        let bound = match eq.bounds[j] {
            Bound::Free => "free",
            Bound::Lower => "lower",
            Bound::Upper => "upper",
        };
        outln!(out, "alpha_{} = {} ({bound})", j + 1, sig9(*a));
    }
    outln!(out, "scale = {}", sig9(eq.scale));
    outln!(out, "multipliers = {}", sig9_list(&eq.multipliers));
    outln!(out, "kkt_residual = {}", sig9(eq.kkt_residual));
    outln!(out, "max_face_residual = {}", sig9(view.max_face_residual(&eq.profile)?));
    if let Some(point) = certify {
        check_profile(view, point)?;
        let cert = goodman_certificate(view, &g, point, &eq.multipliers, fd_step)?;
        outln!(out, "eigenvalues = {}", sig9_list(&cert.eigenvalues));
        outln!(out, "negative_definite = {}", cert.negative_definite);
    }
    Ok(())
}

fn ess(
    scenario: &Scenario,
    view: &CapacityRegionView,
    resident: Option<f64>,
    assert: bool,
    out: &mut dyn Write,
) -> CliResult<()> {
    let g = scenario.utility()?;
    let resident = match resident {
        Some(r) => r,
        None => symmetric_equilibrium(view)?,
    };
    let spec = EssTestSpec::new(resident, scenario.mutant_grid, scenario.epsilons.clone())?;
    let report = ess_check(view, &g, &spec)?;
    let count = |f: fn(&MutantVerdict) -> bool| report.outcomes.iter().filter(|o| f(&o.verdict)).count();
    outln!(out, "resident = {}", sig9(resident));
    outln!(out, "ess: {}", report.is_ess);
    outln!(out, "repelled = {}", count(|v| matches!(v, MutantVerdict::Repelled { .. })));
    outln!(out, "invades = {}", count(|v| matches!(v, MutantVerdict::Invades(_))));
    outln!(out, "infeasible = {}", count(|v| matches!(v, MutantVerdict::InfeasibleInvasion)));
    match &report.witness {
        Some(w) => outln!(
            out,
            "witness: mutant = {}, epsilon = {}, resident_payoff = {}, mutant_payoff = {}",
            sig9(w.mutant),
            sig9(w.epsilon),
            sig9(w.resident_payoff),
            sig9(w.mutant_payoff)
        ),
        None => outln!(out, "witness: none"),
    }
    if assert && !report.is_ess {
        return Err(CliError::Failed(format!("resident {} is not evolutionarily stable", sig9(resident))));
    }
    Ok(())
}

/// Initial population of a scenario: uniform over `[0, C_1]` or all mass on
/// `C_N/m`.
pub fn initial_state(scenario: &Scenario, view: &CapacityRegionView) -> CliResult<PopulationState> {
    let upper = view.single_capacity(0);
    Ok(match scenario.initial {
        InitialState::Uniform => {
            let grid = uniform_grid(upper, scenario.grid_points);
            let n = grid.len();
            PopulationState::new(grid, vec![1.0 / n as f64; n])?
        }
        InitialState::Share => {
            let share = symmetric_equilibrium(view)?;
            PopulationState::dirac(grid_with_point(upper, scenario.grid_points, share), share)?
        }
    })
}

pub fn protocol(scenario: &Scenario) -> CliResult<Protocol> {
    Ok(Protocol::new(scenario.protocol, scenario.theta, scenario.growth)?)
}

pub fn simulate(scenario: &Scenario, view: &CapacityRegionView) -> CliResult<Trace> {
    let g = scenario.utility()?;
    let dynamics = Dynamics::new(view, &g, protocol(scenario)?, scenario.payoff_method())?;
    let run = DynamicsRun {
        initial: initial_state(scenario, view)?,
        dt: scenario.dt,
        steps: scenario.steps,
        record_every: scenario.record_every,
    };
    Ok(dynamics.simulate(&run)?)
}

pub fn write_trace_csv(trace: &Trace, path: &Path) -> CliResult<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["t", "mean_rate", "avg_payoff", "velocity_l1", "mass_drift"])?;
    for r in &trace.records {
        w.write_record([
            sig9(r.t),
            sig9(r.mean_rate),
            sig9(r.avg_payoff),
            sig9(r.velocity_l1),
            sig9(r.mass_drift),
        ])?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn write_state_csv(state: &PopulationState, path: &Path) -> CliResult<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["grid_value", "mass"])?;
    for (x, m) in state.grid().iter().zip(state.masses()) {
        w.write_record([sig9(*x), sig9(*m)])?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

fn dynamics(
    scenario: &Scenario,
    view: &CapacityRegionView,
    trace_path: &Path,
    final_path: &Path,
    out: &mut dyn Write,
) -> CliResult<()> {
    let trace = simulate(scenario, view)?;
    write_trace_csv(&trace, trace_path)?;
    write_state_csv(&trace.final_state, final_path)?;
    let theta = if scenario.protocol == ProtocolKind::Smith {
        format!(" (theta = {})", sig9(scenario.theta))
    } else {
        String::new()
    };
    outln!(out, "protocol = {}{theta}", scenario.protocol.name());
    outln!(out, "steps = {}", scenario.steps);
    outln!(out, "final mean_rate = {}", sig9(trace.final_state.mean_rate()));
    outln!(out, "equal share = {}", sig9(view.total_capacity() / view.users() as f64));
    outln!(out, "max mass_drift = {}", sig9(trace.max_drift));
    outln!(out, "trace = {} ({} records)", trace_path.display(), trace.records.len());
    outln!(out, "final_state = {}", final_path.display());
    Ok(())
}
