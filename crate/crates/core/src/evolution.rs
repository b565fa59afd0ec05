//! Population-level statics: the symmetric equilibrium, the constrained ESS
//! test, the mixed capacity region and the expected payoff `F(a, μ)`.
//!
//! A focal user sending at rate `a` meets `m − 1` opponents drawn
//! independently from the population state `μ`:
//!
//! ```text
//! F(a, μ) = 1[a ≤ C_N − (m−1) E(μ)] · g(a) · ν_{m−1}(D_a)
//! D_a     = {(b_2..b_m) : (a, b_2..b_m) ∈ C}
//! ```

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand_chacha::ChaCha8Rng;

use crate::capacity::{CapacityRegionView, UserSet};
use crate::error::{Error, Result};
use crate::game::payoff_unchecked;
use crate::rng::{stream_rng, Substream};
use crate::utility::Utility;
use crate::{FEAS_TOL, STRICT_MARGIN};

const MASS_TOL: f64 = 1e-9;
const NEG_MASS_TOL: f64 = 1e-12;
/// Largest grid enumeration `N^{m−1}` for exact payoffs.
pub const MAX_EXACT_CELLS: f64 = 1e7;

/// A probability distribution over a finite grid of rates.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationState {
    grid: Vec<f64>,
    masses: Vec<f64>,
    base_weights: Vec<f64>,
}

/// Evenly spaced points `0, h/(n−1), …, h`.
pub fn uniform_grid(upper: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![upper],
        _ => (0..points)
            .map(|k| upper * k as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// Quadrature widths for an increasing grid: half the distance between the
/// neighbours, or the single adjacent gap at either end. Uniform grids get a
/// constant `Δ`.
pub fn cell_widths(grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    match n {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => (0..n)
            .map(|i| {
                if i == 0 {
                    grid[1] - grid[0]
                } else if i == n - 1 {
                    grid[n - 1] - grid[n - 2]
                } else {
                    0.5 * (grid[i + 1] - grid[i - 1])
                }
            })
            .collect(),
    }
}

impl PopulationState {
    /// Validates and stores a state. Masses within `1e−12` below zero are
    /// clipped to zero.
    pub fn new(grid: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        let base_weights = cell_widths(&grid);
        Self::with_base_weights(grid, masses, base_weights)
    }

    pub fn with_base_weights(grid: Vec<f64>, mut masses: Vec<f64>, base_weights: Vec<f64>) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::InvalidState("grid is empty".into()));
        }
        if masses.len() != grid.len() || base_weights.len() != grid.len() {
            return Err(Error::InvalidState(format!(
                "grid has {} points but {} masses and {} base weights",
                grid.len(),
                masses.len(),
                base_weights.len()
            )));
        }
        if grid.iter().any(|x| !x.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidState("grid must be finite and strictly increasing".into()));
        }
        if grid[0] < 0.0 {
            return Err(Error::InvalidState("grid rates must be non-negative".into()));
        }
        if base_weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidState("base weights must be positive".into()));
        }
        for m in masses.iter_mut() {
            if !m.is_finite() || *m < -NEG_MASS_TOL {
                return Err(Error::InvalidState(format!("invalid mass {m}")));
            }
            if *m < 0.0 {
                *m = 0.0;
            }
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidState(format!("masses sum to {total}, not 1")));
        }
        Ok(PopulationState {
            grid,
            masses,
            base_weights,
        })
    }

    /// Equal mass on `points` evenly spaced rates in `[0, upper]`.
    pub fn uniform(upper: f64, points: usize) -> Result<Self> {
        if points == 0 {
            return Err(Error::InvalidState("grid is empty".into()));
        }
        let grid = uniform_grid(upper, points);
        let masses = vec![1.0 / points as f64; points];
        Self::new(grid, masses)
    }

    /// All mass on the grid point closest to `rate` (which must be within
    /// `1e−12` of a grid point).
    pub fn dirac(grid: Vec<f64>, rate: f64) -> Result<Self> {
        let idx = grid
            .iter()
            .position(|x| (x - rate).abs() <= 1e-12)
            .ok_or_else(|| Error::InvalidState(format!("rate {rate} is not a grid point")))?;
        let mut masses = vec![0.0; grid.len()];
        masses[idx] = 1.0;
        Self::new(grid, masses)
    }

    /// The same grid and base measure with new masses.
    pub fn with_masses(&self, masses: Vec<f64>) -> Result<Self> {
        Self::with_base_weights(self.grid.clone(), masses, self.base_weights.clone())
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn base_weights(&self) -> &[f64] {
        &self.base_weights
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// `E(μ) = Σ_i x_i μ_i`.
    pub fn mean_rate(&self) -> f64 {
        self.grid.iter().zip(&self.masses).map(|(x, m)| x * m).sum()
    }

    /// Grid indices carrying positive mass.
    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.masses[i] > 0.0).collect()
    }
}

/// Uniform grid on `[0, upper]` with `rate` inserted if it is not already a
/// grid point.
pub fn grid_with_point(upper: f64, points: usize, rate: f64) -> Vec<f64> {
    let mut grid = uniform_grid(upper, points);
    if !grid.iter().any(|x| (x - rate).abs() <= 1e-12) {
        let at = grid.partition_point(|x| *x < rate);
        grid.insert(at, rate);
    }
    grid
}

fn require_symmetric(view: &CapacityRegionView) -> Result<()> {
    if !view.model().is_symmetric() {
        return Err(Error::AsymmetricModel("symmetric equilibrium and ESS need equal SNRs"));
    }
    Ok(())
}

/// `C_N / m`, the unique symmetric pure equilibrium rate.
pub fn symmetric_equilibrium(view: &CapacityRegionView) -> Result<f64> {
    require_symmetric(view)?;
    let m = view.users();
    let share = view.total_capacity() / m as f64;
    let safe = view.safe_rates()[0];
    assert!(safe <= share + FEAS_TOL, "safe rate {safe} exceeds equal share {share}");
    debug_assert_eq!(view.max_face_residual(&vec![share; m]).ok(), Some(0.0));
    Ok(share)
}

/// Invasion test configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct EssTestSpec {
    pub resident: f64,
    /// Number of evenly spaced mutant rates over `[0, C_{1}]`.
    pub mutant_grid: usize,
    /// Invasion shares `ε ∈ (0, 1)`.
    pub epsilon_grid: Vec<f64>,
}

impl EssTestSpec {
    pub fn new(resident: f64, mutant_grid: usize, epsilon_grid: Vec<f64>) -> Result<Self> {
        if mutant_grid < 2 {
            return Err(Error::InvalidArgument("mutant grid needs at least 2 points".into()));
        }
        if epsilon_grid.is_empty() || epsilon_grid.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
            return Err(Error::InvalidArgument("invasion shares must lie in (0, 1)".into()));
        }
        if !(resident.is_finite() && resident >= 0.0) {
            return Err(Error::InvalidArgument(format!("resident rate must be non-negative, got {resident}")));
        }
        Ok(EssTestSpec {
            resident,
            mutant_grid,
            epsilon_grid,
        })
    }
}

/// A mutant beating the resident at invasion share `epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct Invasion {
    pub mutant: f64,
    pub epsilon: f64,
    pub resident_payoff: f64,
    pub mutant_payoff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MutantVerdict {
    /// The resident strictly wins for every tested share up to `threshold`.
    Repelled { threshold: f64 },
    /// The resident does not win at the smallest tested share.
    Invades(Invasion),
    /// The mixed population leaves the region, so the mutant cannot invade.
    InfeasibleInvasion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MutantOutcome {
    pub mutant: f64,
    pub verdict: MutantVerdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EssReport {
    pub is_ess: bool,
    /// The invading mutant with the largest payoff, if any.
    pub witness: Option<Invasion>,
    pub outcomes: Vec<MutantOutcome>,
}

/// Constrained ESS test of a symmetric resident rate.
///
/// For each mutant `mut ≠ r` and share `ε`, the resident population shifts to
/// `r_ε = ε·mut + (1−ε)·r` and the resident must strictly out-earn the mutant
/// against `m − 1` opponents playing `r_ε`. Mutants above `C_N/m` push the
/// symmetric profile out of the region and are classified as infeasible.
pub fn ess_check(view: &CapacityRegionView, g: &Utility, spec: &EssTestSpec) -> Result<EssReport> {
    require_symmetric(view)?;
    let m = view.users();
    let share = view.total_capacity() / m as f64;
    if spec.resident > share + FEAS_TOL {
        return Err(Error::InvalidArgument(format!(
            "resident {} exceeds the largest symmetric rate {share}",
            spec.resident
        )));
    }
    let r = spec.resident;
    let mut epsilons = spec.epsilon_grid.clone();
    epsilons.sort_by(f64::total_cmp);

    let mutants = uniform_grid(view.single_capacity(0), spec.mutant_grid);
    let mut outcomes = Vec::with_capacity(mutants.len());
    let mut witness: Option<Invasion> = None;
    let mut profile = vec![0.0; m];

    for &mutant in &mutants {
        if (mutant - r).abs() <= STRICT_MARGIN {
            continue;
        }
        if mutant > share + FEAS_TOL {
            outcomes.push(MutantOutcome {
                mutant,
                verdict: MutantVerdict::InfeasibleInvasion,
            });
            continue;
        }
        // largest prefix of ascending shares on which the resident wins
        let mut threshold = None;
        let mut first_loss = None;
        for &eps in &epsilons {
            let shifted = eps * mutant + (1.0 - eps) * r;
            profile.iter_mut().for_each(|x| *x = shifted);
            if !view.contains(&profile) {
                break;
            }
            profile[0] = r;
            let resident_payoff = payoff_unchecked(view, g, &profile, 0);
            profile[0] = mutant;
            let mutant_payoff = payoff_unchecked(view, g, &profile, 0);
            if resident_payoff > mutant_payoff + STRICT_MARGIN {
                threshold = Some(eps);
            } else {
                first_loss = Some(Invasion {
                    mutant,
                    epsilon: eps,
                    resident_payoff,
                    mutant_payoff,
                });
                break;
            }
        }
        let verdict = match (threshold, first_loss) {
            (Some(threshold), _) => MutantVerdict::Repelled { threshold },
            (None, Some(invasion)) => {
                if witness
                    .as_ref()
                    .is_none_or(|w| invasion.mutant_payoff > w.mutant_payoff)
                {
                    witness = Some(invasion.clone());
                }
                MutantVerdict::Invades(invasion)
            }
            (None, None) => MutantVerdict::InfeasibleInvasion,
        };
        outcomes.push(MutantOutcome { mutant, verdict });
    }

    Ok(EssReport {
        is_ess: witness.is_none(),
        witness,
        outcomes,
    })
}

/// Population profile for the mixed-region test.
#[derive(Debug, Clone, Copy)]
pub enum MixedProfile<'a> {
    /// Every user draws from the same state.
    Shared(&'a PopulationState),
    PerUser(&'a [PopulationState]),
}

/// Membership in the mixed capacity region: expected subset sums must respect
/// every `C_J`. The product-measure integral of a sum is the sum of means.
pub fn mixed_feasible(view: &CapacityRegionView, profile: MixedProfile<'_>) -> Result<bool> {
    let m = view.users();
    let means: Vec<f64> = match profile {
        MixedProfile::Shared(state) => vec![state.mean_rate(); m],
        MixedProfile::PerUser(states) => {
            if states.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    actual: states.len(),
                });
            }
            states.iter().map(PopulationState::mean_rate).collect()
        }
    };
    Ok((1u32..(1 << m)).all(|bits| {
        let set = UserSet::from_bits(bits);
        set.members().map(|j| means[j]).sum::<f64>() <= view.rank(set) + FEAS_TOL
    }))
}

/// How `ν_{m−1}(D_a)` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PayoffMethod {
    /// Enumerate every opponent tuple on the grid.
    Exact,
    /// Average over `samples` iid opponent tuples.
    MonteCarlo { samples: usize, seed: u64 },
}

/// Payoff value with its Monte Carlo standard error (zero when exact).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayoffEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// Whether `a` passes the mean-field indicator `a ≤ C_N − (m−1)E(μ)`.
pub fn passes_indicator(view: &CapacityRegionView, a: f64, mean: f64) -> bool {
    a <= view.total_capacity() - (view.users() - 1) as f64 * mean + FEAS_TOL
}

/// Expected payoff `F(a, μ)` of a focal user at rate `a`.
pub fn expected_payoff(
    view: &CapacityRegionView,
    g: &Utility,
    a: f64,
    state: &PopulationState,
    method: PayoffMethod,
) -> Result<PayoffEstimate> {
    if !(a.is_finite() && a >= 0.0) {
        return Err(Error::InvalidArgument(format!("rate must be non-negative, got {a}")));
    }
    match method {
        PayoffMethod::Exact => {
            check_exact_size(view, state)?;
            Ok(PayoffEstimate {
                value: exact_payoff(view, g, a, state),
                std_error: 0.0,
            })
        }
        PayoffMethod::MonteCarlo { samples, seed } => {
            let mut rng = stream_rng(seed, Substream::MonteCarlo.base());
            montecarlo_payoff(view, g, a, state, samples, &mut rng)
        }
    }
}

/// Mixed payoff `F(λ, μ) = Σ_a λ(a) F(a, μ)` for a focal population `λ` on
/// the same grid as `μ`, exact method.
pub fn mixed_payoff(view: &CapacityRegionView, g: &Utility, focal: &PopulationState, state: &PopulationState) -> Result<f64> {
    check_exact_size(view, state)?;
    Ok(focal
        .grid()
        .iter()
        .zip(focal.masses())
        .filter(|(_, w)| **w > 0.0)
        .map(|(a, w)| w * exact_payoff(view, g, *a, state))
        .sum())
}

pub(crate) fn check_exact_size(view: &CapacityRegionView, state: &PopulationState) -> Result<()> {
    let cells = (state.len() as f64).powi(view.users() as i32 - 1);
    if cells > MAX_EXACT_CELLS {
        return Err(Error::ExactTooLarge { cells });
    }
    Ok(())
}

/// Exact `F(a, μ)`, enumerating only supported opponent tuples.
pub(crate) fn exact_payoff(view: &CapacityRegionView, g: &Utility, a: f64, state: &PopulationState) -> f64 {
    if !passes_indicator(view, a, state.mean_rate()) {
        return 0.0;
    }
    let m = view.users();
    let opponents = m - 1;
    let support = state.support();
    let grid = state.grid();
    let masses = state.masses();

    let mut profile = vec![a; m];
    let mut digits = vec![0usize; opponents];
    let mut measure = 0.0;
    loop {
        let mut weight = 1.0;
        for (slot, &d) in digits.iter().enumerate() {
            let idx = support[d];
            profile[slot + 1] = grid[idx];
            weight *= masses[idx];
        }
        if view.contains(&profile) {
            measure += weight;
        }
        // odometer increment over the support
        let mut pos = 0;
        loop {
            if pos == opponents {
                return g.eval(a) * measure;
            }
            digits[pos] += 1;
            if digits[pos] < support.len() {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}

pub(crate) fn montecarlo_payoff(
    view: &CapacityRegionView,
    g: &Utility,
    a: f64,
    state: &PopulationState,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<PayoffEstimate> {
    if samples < 2 {
        return Err(Error::InvalidArgument("Monte Carlo needs at least 2 samples".into()));
    }
    if !passes_indicator(view, a, state.mean_rate()) {
        return Ok(PayoffEstimate {
            value: 0.0,
            std_error: 0.0,
        });
    }
    let m = view.users();
    let sampler = WeightedIndex::new(state.masses())
        .map_err(|e| Error::InvalidState(format!("cannot sample state: {e}")))?;
    let mut profile = vec![a; m];
    let mut hits = 0usize;
    for _ in 0..samples {
        for slot in profile.iter_mut().skip(1) {
            *slot = state.grid()[sampler.sample(rng)];
        }
        if view.contains(&profile) {
            hits += 1;
        }
    }
    let n = samples as f64;
    let p = hits as f64 / n;
    // unbiased sample variance of a 0/1 indicator
    let var = p * (1.0 - p) * n / (n - 1.0);
    let ga = g.eval(a);
    Ok(PayoffEstimate {
        value: ga * p,
        std_error: ga * (var / n).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacity::ChannelModel;
    use approx::assert_abs_diff_eq;

    fn two_unit() -> CapacityRegionView {
        CapacityRegionView::new(ChannelModel::from_snr(vec![1.0, 1.0]).unwrap()).unwrap()
    }

    fn three_points() -> PopulationState {
        PopulationState::new(vec![0.0, 0.3, 0.6], vec![1.0 / 3.0; 3]).unwrap()
    }

    #[test]
    fn symmetric_equilibrium_examples() {
        assert_abs_diff_eq!(symmetric_equilibrium(&two_unit()).unwrap(), 0.549306, epsilon = 1e-6);
        let paper = CapacityRegionView::new(ChannelModel::symmetric(3, 25.0, 0.1).unwrap()).unwrap();
        assert_abs_diff_eq!(symmetric_equilibrium(&paper).unwrap(), 2.207135, epsilon = 1e-6);
        let single = CapacityRegionView::new(ChannelModel::from_snr(vec![1.0]).unwrap()).unwrap();
        assert_abs_diff_eq!(symmetric_equilibrium(&single).unwrap(), 2f64.ln(), epsilon = 1e-15);
        let asym = CapacityRegionView::new(ChannelModel::from_snr(vec![3.0, 1.0]).unwrap()).unwrap();
        assert!(symmetric_equilibrium(&asym).is_err());
    }

    #[test]
    fn state_validation() {
        assert!(PopulationState::new(vec![0.0, 0.1], vec![0.5, 0.4]).is_err());
        assert!(PopulationState::new(vec![0.1, 0.0], vec![0.5, 0.5]).is_err());
        assert!(PopulationState::new(vec![0.0, 0.1], vec![1.0]).is_err());
        assert!(PopulationState::new(vec![0.0, 0.1], vec![1.0 + 1e-13, -1e-13]).is_ok());
        let s = PopulationState::new(vec![0.0, 0.1], vec![1.0 + 1e-13, -1e-13]).unwrap();
        assert_eq!(s.masses()[1], 0.0);
        assert!(PopulationState::new(vec![0.0, 0.1], vec![1.1, -0.1]).is_err());
    }

    #[test]
    fn uniform_state_has_constant_weights() {
        let s = PopulationState::uniform(2f64.ln(), 51).unwrap();
        let delta = 2f64.ln() / 50.0;
        for w in s.base_weights() {
            assert_abs_diff_eq!(*w, delta, epsilon = 1e-15);
        }
    }

    #[test]
    fn mean_rate_examples() {
        let s = PopulationState::dirac(vec![0.0, 0.5, 1.0], 0.5).unwrap();
        assert_eq!(s.mean_rate(), 0.5);
        assert_abs_diff_eq!(three_points().mean_rate(), 0.3, epsilon = 1e-15);
        let skew = PopulationState::new(vec![0.1, 0.2, 0.9], vec![0.2, 0.5, 0.3]).unwrap();
        assert!((0.1..=0.9).contains(&skew.mean_rate()));
        assert!(PopulationState::dirac(vec![0.0, 1.0], 0.5).is_err());
    }

    #[test]
    fn mixed_region_examples() {
        let view = two_unit();
        let mean03 = PopulationState::dirac(vec![0.0, 0.3], 0.3).unwrap();
        assert!(mixed_feasible(&view, MixedProfile::Shared(&mean03)).unwrap());
        let at_c1 = PopulationState::dirac(vec![0.0, 2f64.ln()], 2f64.ln()).unwrap();
        assert!(!mixed_feasible(&view, MixedProfile::Shared(&at_c1)).unwrap());
        let zero = PopulationState::dirac(vec![0.0, 0.5], 0.0).unwrap();
        assert!(mixed_feasible(&view, MixedProfile::Shared(&zero)).unwrap());
        let per_user = [mean03.clone(), at_c1.clone()];
        // 0.3 + ln2 < ln3 and each single mean is below ln2
        assert!(mixed_feasible(&view, MixedProfile::PerUser(&per_user)).unwrap());
        assert!(mixed_feasible(&view, MixedProfile::PerUser(&per_user[..1])).is_err());
    }

    #[test]
    fn expected_payoff_examples() {
        let view = two_unit();
        let state = three_points();
        let g = Utility::Identity;
        let f = expected_payoff(&view, &g, 0.4, &state, PayoffMethod::Exact).unwrap();
        assert_abs_diff_eq!(f.value, 0.4, epsilon = 1e-15);
        let f = expected_payoff(&view, &g, 0.6, &state, PayoffMethod::Exact).unwrap();
        assert_abs_diff_eq!(f.value, 0.4, epsilon = 1e-15);
        // indicator: ln3 - 0.3 ≈ 0.7986 < 0.8
        let f = expected_payoff(&view, &g, 0.8, &state, PayoffMethod::Exact).unwrap();
        assert_eq!(f.value, 0.0);
    }

    #[test]
    fn exact_payoff_size_limit() {
        let view = CapacityRegionView::new(ChannelModel::from_snr(vec![1.0; 5]).unwrap()).unwrap();
        let state = PopulationState::uniform(0.5, 101).unwrap();
        assert!(matches!(
            expected_payoff(&view, &Utility::Identity, 0.1, &state, PayoffMethod::Exact),
            Err(Error::ExactTooLarge { .. })
        ));
        let mc = PayoffMethod::MonteCarlo {
            samples: 1000,
            seed: 1,
        };
        assert!(expected_payoff(&view, &Utility::Identity, 0.1, &state, mc).is_ok());
    }

    #[test]
    fn montecarlo_is_deterministic() {
        let view = two_unit();
        let state = three_points();
        let mc = PayoffMethod::MonteCarlo {
            samples: 5000,
            seed: 42,
        };
        let a = expected_payoff(&view, &Utility::Identity, 0.6, &state, mc).unwrap();
        let b = expected_payoff(&view, &Utility::Identity, 0.6, &state, mc).unwrap();
        assert_eq!(a, b);
        assert!((a.value - 0.4).abs() < 4.0 * a.std_error);
    }

    #[test]
    fn mixed_payoff_averages_focal_actions() {
        let view = two_unit();
        let state = three_points();
        let focal = PopulationState::new(vec![0.0, 0.3, 0.6], vec![0.0, 0.5, 0.5]).unwrap();
        let f = mixed_payoff(&view, &Utility::Identity, &focal, &state).unwrap();
        assert_abs_diff_eq!(f, 0.5 * 0.3 + 0.5 * 0.4, epsilon = 1e-15);
    }

    #[test]
    fn ess_at_equal_share() {
        let view = two_unit();
        let share = symmetric_equilibrium(&view).unwrap();
        let spec = EssTestSpec::new(share, 50, vec![0.1, 0.01, 0.001]).unwrap();
        let report = ess_check(&view, &Utility::Identity, &spec).unwrap();
        assert!(report.is_ess);
        assert!(report.witness.is_none());
        assert!(report
            .outcomes
            .iter()
            .any(|o| o.verdict == MutantVerdict::InfeasibleInvasion));
    }

    #[test]
    fn ess_fails_below_equal_share() {
        let view = two_unit();
        let share = symmetric_equilibrium(&view).unwrap();
        let spec = EssTestSpec::new(0.9 * share, 50, vec![0.1, 0.01, 0.001]).unwrap();
        let report = ess_check(&view, &Utility::Log1p, &spec).unwrap();
        assert!(!report.is_ess);
        let w = report.witness.unwrap();
        assert!(w.mutant > 0.9 * share && w.mutant <= share);
        assert!(w.mutant_payoff > w.resident_payoff);
    }

    #[test]
    fn ess_skips_the_resident_itself() {
        let view = two_unit();
        // resident on the mutant grid: 0 is the first grid point
        let spec = EssTestSpec::new(0.0, 10, vec![0.01]).unwrap();
        let report = ess_check(&view, &Utility::Identity, &spec).unwrap();
        assert!(report.outcomes.iter().all(|o| o.mutant != 0.0));
        assert_eq!(report.outcomes.len(), 9);
    }

    #[test]
    fn ess_spec_validation() {
        assert!(EssTestSpec::new(0.1, 1, vec![0.1]).is_err());
        assert!(EssTestSpec::new(0.1, 10, vec![]).is_err());
        assert!(EssTestSpec::new(0.1, 10, vec![1.0]).is_err());
        let view = two_unit();
        let too_high = EssTestSpec::new(0.6, 10, vec![0.1]).unwrap();
        assert!(ess_check(&view, &Utility::Identity, &too_high).is_err());
    }
}
