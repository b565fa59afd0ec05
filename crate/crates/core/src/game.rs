//! The one-shot rate-allocation game.
//!
//! User `j` earns `g(α_j)` when the whole profile is decodable and nothing
//! otherwise. Because `g` is strictly increasing, every best reply pushes the
//! user onto the tightest capacity constraint it belongs to, which makes the
//! maximal face exactly the equilibrium set.

use itertools::Itertools;

use crate::capacity::{CapacityRegionView, RateProfile, UserSet};
use crate::error::{Error, Result};
use crate::utility::Utility;
use crate::{FEAS_TOL, IMPROVE_MARGIN};

/// Largest user count for coalition enumeration.
pub const MAX_COALITION_USERS: usize = 6;
/// Largest user count for the Pareto lattice oracle.
pub const MAX_PARETO_USERS: usize = 4;

/// A nonempty group of users deviating together.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Coalition(UserSet);

impl Coalition {
    pub fn new(members: UserSet, users: usize) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidArgument("coalition must be nonempty".into()));
        }
        if !members.is_subset_of(UserSet::full(users)) {
            return Err(Error::InvalidArgument(format!(
                "coalition {members} is not a subset of the {users} players"
            )));
        }
        Ok(Coalition(members))
    }

    pub fn members(&self) -> UserSet {
        self.0
    }

    /// Every nonempty coalition of `users` players.
    pub fn all(users: usize) -> impl Iterator<Item = Coalition> {
        (1u32..(1 << users)).map(|bits| Coalition(UserSet::from_bits(bits)))
    }
}

/// A joint deviation under which every coalition member strictly gains.
#[derive(Debug, Clone, PartialEq)]
pub struct Deviation {
    pub coalition: Coalition,
    /// The full profile after the deviation.
    pub profile: Vec<f64>,
}

/// `u_j(α) = g(α_j)` if `α` is feasible, else 0.
pub fn payoff(view: &CapacityRegionView, g: &Utility, rates: &[f64], user: usize) -> Result<f64> {
    view.check_len(rates)?;
    check_user(view, user)?;
    Ok(payoff_unchecked(view, g, rates, user))
}

pub(crate) fn payoff_unchecked(view: &CapacityRegionView, g: &Utility, rates: &[f64], user: usize) -> f64 {
    if view.contains(rates) {
        g.eval(rates[user])
    } else {
        0.0
    }
}

fn check_user(view: &CapacityRegionView, user: usize) -> Result<()> {
    if user >= view.users() {
        return Err(Error::UserOutOfRange {
            user,
            users: view.users(),
        });
    }
    Ok(())
}

fn insert_user(others: &[f64], user: usize, rate: f64) -> Vec<f64> {
    let mut full = Vec::with_capacity(others.len() + 1);
    full.extend_from_slice(&others[..user]);
    full.push(rate);
    full.extend_from_slice(&others[user..]);
    full
}

/// Best reply of `user` to the opponents' rates `others` (length `m − 1`,
/// in user order with `user` removed):
///
/// ```text
/// BR = max(r_{user,N}, min_{J∋user} C_J − Σ_{k∈J, k≠user} α_k)
/// ```
///
/// Independent of the (strictly increasing) utility.
pub fn best_response(view: &CapacityRegionView, user: usize, others: &[f64]) -> Result<f64> {
    check_user(view, user)?;
    if others.len() + 1 != view.users() {
        return Err(Error::DimensionMismatch {
            expected: view.users() - 1,
            actual: others.len(),
        });
    }
    let full = insert_user(others, user, 0.0);
    if !view.contains(&full) {
        return Err(Error::NoFeasibleActionSet);
    }
    Ok(best_response_in(view, user, &full))
}

/// Best reply with the opponents read from a full profile.
pub(crate) fn best_response_in(view: &CapacityRegionView, user: usize, rates: &[f64]) -> f64 {
    view.safe_rates()[user].max(view.tightest_room(user, rates))
}

/// Outcome of the best-reply fixed-point test.
#[derive(Debug, Clone, PartialEq)]
pub struct NashCheck {
    pub feasible: bool,
    /// `BR_j(α_{−j})` per user; empty when the profile is infeasible.
    pub best_responses: Vec<f64>,
    /// Largest `|BR_j − α_j|`.
    pub max_gap: f64,
}

impl NashCheck {
    pub fn is_nash(&self) -> bool {
        self.feasible && self.max_gap <= FEAS_TOL
    }
}

pub fn nash_check(view: &CapacityRegionView, rates: &[f64]) -> Result<NashCheck> {
    view.check_len(rates)?;
    if !view.contains(rates) {
        return Ok(NashCheck {
            feasible: false,
            best_responses: Vec::new(),
            max_gap: f64::INFINITY,
        });
    }
    let best_responses: Vec<f64> = (0..view.users())
        .map(|j| best_response_in(view, j, rates))
        .collect();
    let max_gap = best_responses
        .iter()
        .zip(rates)
        .map(|(b, a)| (b - a).abs())
        .fold(0.0, f64::max);
    Ok(NashCheck {
        feasible: true,
        best_responses,
        max_gap,
    })
}

/// Every user already plays its best reply (infeasible profiles are not).
pub fn is_nash(view: &CapacityRegionView, rates: &[f64]) -> Result<bool> {
    Ok(nash_check(view, rates)?.is_nash())
}

fn linspace(hi: f64, points: usize) -> impl Iterator<Item = f64> {
    let last = (points - 1) as f64;
    (0..points).map(move |k| hi * k as f64 / last)
}

fn check_grid(grid: usize) -> Result<()> {
    if grid < 2 {
        return Err(Error::InvalidArgument(format!("grid needs at least 2 points, got {grid}")));
    }
    Ok(())
}

/// Searches every coalition and every joint deviation on a per-user grid of
/// `grid` points over `[0, C_{i}]` for one that is feasible and strictly
/// improves all members. Only grid values that improve the member at all are
/// combined.
pub fn find_coalition_deviation(
    view: &CapacityRegionView,
    g: &Utility,
    rates: &[f64],
    grid: usize,
) -> Result<Option<Deviation>> {
    view.check_len(rates)?;
    check_grid(grid)?;
    let m = view.users();
    if m > MAX_COALITION_USERS {
        return Err(Error::CoalitionTooLarge { users: m });
    }
    let current: Vec<f64> = (0..m).map(|j| payoff_unchecked(view, g, rates, j)).collect();
    let improving: Vec<Vec<f64>> = (0..m)
        .map(|j| {
            linspace(view.single_capacity(j), grid)
                .filter(|v| g.eval(*v) > current[j] + IMPROVE_MARGIN)
                .collect()
        })
        .collect();

    let mut trial = rates.to_vec();
    for coalition in Coalition::all(m) {
        let members: Vec<usize> = coalition.members().members().collect();
        if members.iter().any(|&j| improving[j].is_empty()) {
            continue;
        }
        let found = members
            .iter()
            .map(|&j| improving[j].iter().copied())
            .multi_cartesian_product()
            .find(|joint| {
                for (&j, &v) in members.iter().zip(joint) {
                    trial[j] = v;
                }
                view.contains(&trial)
            });
        if found.is_some() {
            return Ok(Some(Deviation {
                coalition,
                profile: trial,
            }));
        }
        trial.copy_from_slice(rates);
    }
    Ok(None)
}

/// Grid verdict on strong equilibrium: feasible and no coalition has a
/// jointly profitable deviation at grid resolution.
pub fn is_strong_equilibrium(view: &CapacityRegionView, g: &Utility, rates: &[f64], grid: usize) -> Result<bool> {
    let deviation = find_coalition_deviation(view, g, rates, grid)?;
    Ok(view.contains(rates) && deviation.is_none())
}

/// Lattice oracle for Pareto optimality: no feasible lattice point (with
/// `grid` points per axis over `[0, C_{i}]`) gives every user at least its
/// payoff and someone strictly more.
pub fn is_pareto_optimal(view: &CapacityRegionView, g: &Utility, rates: &[f64], grid: usize) -> Result<bool> {
    view.check_len(rates)?;
    check_grid(grid)?;
    let m = view.users();
    if m > MAX_PARETO_USERS {
        return Err(Error::TooManyUsers {
            users: m,
            max: MAX_PARETO_USERS,
            what: "Pareto lattice search",
        });
    }
    let current: Vec<f64> = (0..m).map(|j| payoff_unchecked(view, g, rates, j)).collect();
    let axes: Vec<Vec<f64>> = (0..m)
        .map(|j| {
            linspace(view.single_capacity(j), grid)
                .filter(|v| g.eval(*v) >= current[j])
                .collect()
        })
        .collect();
    if axes.iter().any(Vec::is_empty) {
        return Ok(true);
    }
    let dominated = axes
        .iter()
        .map(|axis| axis.iter().copied())
        .multi_cartesian_product()
        .any(|beta| {
            view.contains(&beta)
                && beta
                    .iter()
                    .zip(&current)
                    .any(|(b, u)| g.eval(*b) > u + IMPROVE_MARGIN)
        });
    Ok(!dominated)
}

/// Constrained potential `V(α) = 1_C(α) Σ_j g(α_j)`.
pub fn potential(view: &CapacityRegionView, g: &Utility, rates: &[f64]) -> Result<f64> {
    view.check_len(rates)?;
    Ok(if view.contains(rates) {
        rates.iter().map(|a| g.eval(*a)).sum()
    } else {
        0.0
    })
}

/// Welfare ratios over sampled equilibria.
#[derive(Debug, Clone, PartialEq)]
pub struct Efficiency {
    /// Worst sampled equilibrium welfare over the social optimum.
    pub spoa: f64,
    /// Best sampled equilibrium welfare over the social optimum.
    pub pos: f64,
    pub social_opt: f64,
    pub worst_equilibrium: f64,
    pub best_equilibrium: f64,
    /// Number of candidate profiles evaluated.
    pub candidates: usize,
}

/// Efficiency of the equilibrium set, measured on face samples plus the face
/// vertices (`m ≤ 6`) and the equal-share point when it lies on the face.
pub fn efficiency_metrics(view: &CapacityRegionView, g: &Utility, face_samples: usize, seed: u64) -> Result<Efficiency> {
    let m = view.users();
    let mut candidates: Vec<RateProfile> = view.sample_max_face(face_samples, seed)?;
    if m <= crate::capacity::MAX_VERTEX_USERS {
        candidates.extend(view.face_vertices()?);
    }
    let equal = vec![view.total_capacity() / m as f64; m];
    if view.max_face_residual(&equal)? == 0.0 {
        candidates.push(RateProfile::new(equal)?);
    }

    let mut worst = f64::INFINITY;
    let mut best = f64::NEG_INFINITY;
    let mut social_opt = f64::NEG_INFINITY;
    for profile in &candidates {
        let welfare = potential(view, g, profile)?;
        social_opt = social_opt.max(welfare);
        if is_nash(view, profile)? {
            worst = worst.min(welfare);
            best = best.max(welfare);
        }
    }
    if social_opt.is_nan() || social_opt <= 0.0 || !worst.is_finite() {
        return Err(Error::InvalidArgument(
            "no positive-welfare equilibrium among the candidates".into(),
        ));
    }
    Ok(Efficiency {
        spoa: worst / social_opt,
        pos: best / social_opt,
        social_opt,
        worst_equilibrium: worst,
        best_equilibrium: best,
        candidates: candidates.len(),
    })
}
