//! Polymatroid capacity region of the Gaussian multiple access channel.
//!
//! With per-user received SNRs `s_i`, the capacity of a user set `J` is
//!
//! ```text
//! C_J = ln(1 + Σ_{i∈J} s_i)
//! ```
//!
//! and the region is `{α ≥ 0 : Σ_{i∈J} α_i ≤ C_J for every nonempty J}`.
//! All rates are in nats.

use std::fmt;
use std::ops::Deref;

use itertools::Itertools;
use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Substream};
use crate::FEAS_TOL;

/// Largest user count for which the region enumerates its `2^m - 1` subsets.
pub const MAX_USERS: usize = 20;

/// Largest user count for which face vertices are enumerated.
pub const MAX_VERTEX_USERS: usize = 6;

const MAX_FACE_DRAWS: usize = 100_000;

/// A set of users, stored as a bitmask over 0-based indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct UserSet(u32);

impl UserSet {
    pub const EMPTY: UserSet = UserSet(0);

    pub fn from_bits(bits: u32) -> Self {
        UserSet(bits)
    }

    /// All users `0..m`.
    pub fn full(m: usize) -> Self {
        assert!(m <= 32);
        if m == 32 {
            UserSet(u32::MAX)
        } else {
            UserSet((1u32 << m) - 1)
        }
    }

    pub fn singleton(user: usize) -> Self {
        UserSet(1 << user)
    }

    pub fn from_members<I: IntoIterator<Item = usize>>(members: I) -> Self {
        UserSet(members.into_iter().fold(0, |acc, i| acc | (1 << i)))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, user: usize) -> bool {
        user < 32 && self.0 & (1 << user) != 0
    }

    pub fn without(self, user: usize) -> Self {
        UserSet(self.0 & !(1 << user))
    }

    pub fn with(self, user: usize) -> Self {
        UserSet(self.0 | (1 << user))
    }

    pub fn is_subset_of(self, other: UserSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Members in increasing order.
    pub fn members(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..32).filter(move |i| bits & (1 << i) != 0)
    }
}

impl fmt::Display for UserSet {
    /// 1-based, e.g. `{1,2,3}`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.members().map(|i| i + 1).join(","))
    }
}

/// Physical channel: one received SNR `P_i h_i / σ²` per user.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    snr: Vec<f64>,
    symmetric: bool,
}

impl ChannelModel {
    pub fn from_snr(snr: Vec<f64>) -> Result<Self> {
        if snr.is_empty() {
            return Err(Error::InvalidChannel("at least one user is required".into()));
        }
        if snr.len() > 32 {
            return Err(Error::TooManyUsers {
                users: snr.len(),
                max: 32,
                what: "user sets",
            });
        }
        if let Some((i, s)) = snr.iter().enumerate().find(|(_, s)| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::InvalidChannel(format!(
                "snr of user {} must be positive and finite, got {s}",
                i + 1
            )));
        }
        let symmetric = snr.iter().all(|s| *s == snr[0]);
        Ok(ChannelModel { snr, symmetric })
    }

    /// `m` users sharing power `power` over noise variance `noise`.
    pub fn symmetric(m: usize, power: f64, noise: f64) -> Result<Self> {
        if !(noise.is_finite() && noise > 0.0) {
            return Err(Error::InvalidChannel(format!("noise variance must be positive, got {noise}")));
        }
        Self::from_snr(vec![power / noise; m])
    }

    /// Per-user powers `P_i` and gains `h_i` over a common noise variance.
    pub fn from_physical(powers: &[f64], gains: &[f64], noise: f64) -> Result<Self> {
        if powers.len() != gains.len() {
            return Err(Error::InvalidChannel(format!(
                "{} powers but {} gains",
                powers.len(),
                gains.len()
            )));
        }
        if !(noise.is_finite() && noise > 0.0) {
            return Err(Error::InvalidChannel(format!("noise variance must be positive, got {noise}")));
        }
        Self::from_snr(powers.iter().zip(gains).map(|(p, h)| p * h / noise).collect())
    }

    pub fn users(&self) -> usize {
        self.snr.len()
    }

    pub fn snr(&self) -> &[f64] {
        &self.snr
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// The same channel with every SNR multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::from_snr(self.snr.iter().map(|s| s * factor).collect())
    }

    fn check_subset(&self, subset: UserSet) -> Result<()> {
        if !subset.is_subset_of(UserSet::full(self.users())) {
            return Err(Error::UserOutOfRange {
                user: subset.members().last().unwrap_or(0),
                users: self.users(),
            });
        }
        Ok(())
    }

    fn snr_sum(&self, subset: UserSet) -> f64 {
        subset.members().map(|i| self.snr[i]).sum()
    }

    /// `C_J = ln(1 + Σ_{i∈J} snr_i)`.
    pub fn capacity_of(&self, subset: UserSet) -> Result<f64> {
        if subset.is_empty() {
            return Err(Error::EmptySubset);
        }
        self.check_subset(subset)?;
        Ok(self.snr_sum(subset).ln_1p())
    }

    /// Rate of `user` when the other members of `subset` are treated as noise.
    pub fn safe_rate(&self, user: usize, subset: UserSet) -> Result<f64> {
        self.check_subset(subset)?;
        if !subset.contains(user) {
            return Err(Error::UserNotInSubset {
                user: user + 1,
                subset: subset.to_string(),
            });
        }
        let interference = self.snr_sum(subset.without(user));
        Ok((self.snr[user] / (1.0 + interference)).ln_1p())
    }
}

/// A rate vector `α ∈ R_+^m`, one entry per user.
#[derive(Debug, Clone, PartialEq)]
pub struct RateProfile(Vec<f64>);

impl RateProfile {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if let Some(r) = rates.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "rates must be finite and non-negative, got {r}"
            )));
        }
        Ok(RateProfile(rates))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for RateProfile {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Cached geometry of the capacity region for one channel.
#[derive(Debug, Clone)]
pub struct CapacityRegionView {
    model: ChannelModel,
    // indexed by subset bitmask; rank[0] = 0
    rank: Vec<f64>,
    safe_rates: Vec<f64>,
}

impl CapacityRegionView {
    pub fn new(model: ChannelModel) -> Result<Self> {
        let m = model.users();
        if m > MAX_USERS {
            return Err(Error::TooManyUsers {
                users: m,
                max: MAX_USERS,
                what: "capacity region enumeration",
            });
        }
        let mut sums = vec![0.0f64; 1 << m];
        for mask in 1usize..(1 << m) {
            let low = mask.trailing_zeros() as usize;
            sums[mask] = sums[mask & (mask - 1)] + model.snr[low];
        }
        let rank = sums.iter().map(|s| s.ln_1p()).collect();
        let full = UserSet::full(m);
        let safe_rates = (0..m)
            .map(|i| model.safe_rate(i, full))
            .collect::<Result<Vec<_>>>()?;

        let view = CapacityRegionView {
            model,
            rank,
            safe_rates,
        };

        let total = view.total_capacity();
        let safe_sum: f64 = view.safe_rates.iter().sum();
        if safe_sum > total + FEAS_TOL {
            return Err(Error::InvalidChannel(format!(
                "safe rates sum to {safe_sum} > C_N = {total}; maximal face is empty"
            )));
        }
        if view.model.is_symmetric() && m >= 2 {
            let single = view.rank[1];
            if total / m as f64 >= single {
                return Err(Error::InvalidChannel(format!(
                    "symmetric share C_N/m = {} is not below C_1 = {single}",
                    total / m as f64
                )));
            }
        }
        Ok(view)
    }

    pub fn model(&self) -> &ChannelModel {
        &self.model
    }

    pub fn users(&self) -> usize {
        self.model.users()
    }

    pub fn full_set(&self) -> UserSet {
        UserSet::full(self.users())
    }

    /// `C_J`; zero for the empty set.
    pub fn rank(&self, subset: UserSet) -> f64 {
        self.rank[subset.bits() as usize]
    }

    /// `C_N`, the sum-rate capacity of all users.
    pub fn total_capacity(&self) -> f64 {
        *self.rank.last().expect("rank table is never empty")
    }

    /// Single-user capacity `C_{i}`.
    pub fn single_capacity(&self, user: usize) -> f64 {
        self.rank(UserSet::singleton(user))
    }

    /// Safe rates `r_{i,N}` against all other users.
    pub fn safe_rates(&self) -> &[f64] {
        &self.safe_rates
    }

    /// Constraint rows ordered by size, then lexicographically, matching
    /// `{1},{2},{3},{1,2},{1,3},{2,3},{1,2,3}` for three users.
    pub fn constraint_rows(&self) -> Vec<UserSet> {
        let m = self.users();
        (1..=m)
            .flat_map(|k| (0..m).combinations(k).map(UserSet::from_members))
            .collect()
    }

    /// The 0/1 matrix `M_m`, one row per constraint in [`Self::constraint_rows`] order.
    pub fn constraint_matrix(&self) -> Vec<Vec<u8>> {
        let m = self.users();
        self.constraint_rows()
            .into_iter()
            .map(|row| (0..m).map(|i| row.contains(i) as u8).collect())
            .collect()
    }

    /// Right-hand side `ζ_m` aligned with [`Self::constraint_matrix`].
    pub fn constraint_rhs(&self) -> Vec<f64> {
        self.constraint_rows().into_iter().map(|row| self.rank(row)).collect()
    }

    pub(crate) fn check_len(&self, rates: &[f64]) -> Result<()> {
        if rates.len() != self.users() {
            return Err(Error::DimensionMismatch {
                expected: self.users(),
                actual: rates.len(),
            });
        }
        Ok(())
    }

    /// Largest violation `max(max_J Σ_J α − C_J, max_i −α_i)`; non-positive
    /// inside the region.
    ///
    /// Subsets are visited in Gray-code order so each step adds or removes one
    /// rate.
    pub(crate) fn worst_violation(&self, rates: &[f64]) -> f64 {
        let m = rates.len();
        let mut worst = rates.iter().map(|r| -r).fold(f64::NEG_INFINITY, f64::max);
        let mut mask = 0usize;
        let mut sum = 0.0;
        for i in 1usize..(1 << m) {
            let bit = i.trailing_zeros() as usize;
            mask ^= 1 << bit;
            if mask & (1 << bit) != 0 {
                sum += rates[bit];
            } else {
                sum -= rates[bit];
            }
            worst = worst.max(sum - self.rank[mask]);
        }
        worst
    }

    /// Feasibility without the length check, for hot loops.
    pub(crate) fn contains(&self, rates: &[f64]) -> bool {
        debug_assert_eq!(rates.len(), self.users());
        if rates.iter().any(|r| *r < -FEAS_TOL || r.is_nan()) {
            return false;
        }
        let m = rates.len();
        let mut mask = 0usize;
        let mut sum = 0.0;
        for i in 1usize..(1 << m) {
            let bit = i.trailing_zeros() as usize;
            mask ^= 1 << bit;
            if mask & (1 << bit) != 0 {
                sum += rates[bit];
            } else {
                sum -= rates[bit];
            }
            if sum > self.rank[mask] + FEAS_TOL {
                return false;
            }
        }
        true
    }

    /// Exhaustive membership test over all `2^m − 1` subset constraints.
    pub fn is_feasible(&self, rates: &[f64]) -> Result<bool> {
        self.check_len(rates)?;
        Ok(self.contains(rates))
    }

    /// Symmetric-channel membership: sort descending and compare the `k`-th
    /// prefix sum with the capacity of any size-`k` set.
    pub fn is_feasible_sorted_prefix(&self, rates: &[f64]) -> Result<bool> {
        self.check_len(rates)?;
        if !self.model.is_symmetric() {
            return Err(Error::AsymmetricModel("sorted-prefix test needs equal SNRs"));
        }
        if rates.iter().any(|r| *r < -FEAS_TOL || r.is_nan()) {
            return Ok(false);
        }
        let mut sorted = rates.to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let mut prefix = 0.0;
        for (k, r) in sorted.iter().enumerate() {
            prefix += r;
            if prefix > self.rank(UserSet::full(k + 1)) + FEAS_TOL {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Smallest slack over all constraints, including `α_i ≥ 0`.
    pub fn min_slack(&self, rates: &[f64]) -> Result<f64> {
        self.check_len(rates)?;
        Ok(-self.worst_violation(rates))
    }

    /// Distance-like residual to the maximal face
    /// `{α ≥ r, Σ α = C_N}`: zero on the face (within tolerance), otherwise the
    /// largest violated constraint.
    pub fn max_face_residual(&self, rates: &[f64]) -> Result<f64> {
        self.check_len(rates)?;
        let region = self.worst_violation(rates).max(0.0);
        let floor = rates
            .iter()
            .zip(&self.safe_rates)
            .map(|(a, r)| r - a)
            .fold(0.0, f64::max);
        let total = (self.total_capacity() - rates.iter().sum::<f64>()).abs();
        let residual = region.max(floor).max(total);
        Ok(if residual <= FEAS_TOL { 0.0 } else { residual })
    }

    /// Tightest bound on `user`'s rate given the others:
    /// `min_{J∋user} C_J − Σ_{k∈J, k≠user} α_k`. `rates[user]` is ignored.
    pub(crate) fn tightest_room(&self, user: usize, rates: &[f64]) -> f64 {
        let m = rates.len();
        let bit = 1usize << user;
        let mut best = f64::INFINITY;
        for mask in 1usize..(1 << m) {
            if mask & bit == 0 {
                continue;
            }
            let others: f64 = (0..m)
                .filter(|&k| k != user && mask & (1 << k) != 0)
                .map(|k| rates[k])
                .sum();
            best = best.min(self.rank[mask] - others);
        }
        best
    }

    /// Test-point generator for the maximal face.
    ///
    /// Draws uniform Dirichlet weights `w`, maps them to `r + (C_N − Σr)·w` and
    /// rejects any point that violates a subset constraint. Deterministic in
    /// `seed`.
    pub fn sample_max_face(&self, count: usize, seed: u64) -> Result<Vec<RateProfile>> {
        let m = self.users();
        let slack = self.total_capacity() - self.safe_rates.iter().sum::<f64>();
        assert!(slack >= -FEAS_TOL, "maximal face is empty");
        let slack = slack.max(0.0);

        let mut rng = stream_rng(seed, Substream::FaceSampling.base());
        let mut out = Vec::with_capacity(count);
        let mut draws = 0;
        while out.len() < count {
            if draws >= MAX_FACE_DRAWS {
                return Err(Error::DegenerateFace { draws });
            }
            draws += 1;
            let weights: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(Exp1)).collect();
            let norm: f64 = weights.iter().sum();
            let mut point: Vec<f64> = self
                .safe_rates
                .iter()
                .zip(&weights)
                .map(|(r, w)| r + slack * w / norm)
                .collect();
            // pin the sum exactly onto C_N
            let drift = self.total_capacity() - point.iter().sum::<f64>();
            let last = point.len() - 1;
            point[last] += drift;
            if self.contains(&point) && self.max_face_residual(&point)? == 0.0 {
                out.push(RateProfile(point));
            }
        }
        Ok(out)
    }

    /// Vertices of the maximal face: for every user ordering `π`, the greedy
    /// point `α_{π(k)} = C_{π(1..k)} − C_{π(1..k−1)}`.
    pub fn face_vertices(&self) -> Result<Vec<RateProfile>> {
        let m = self.users();
        if m > MAX_VERTEX_USERS {
            return Err(Error::TooManyUsers {
                users: m,
                max: MAX_VERTEX_USERS,
                what: "vertex enumeration",
            });
        }
        let mut vertices: Vec<Vec<f64>> = Vec::new();
        for order in (0..m).permutations(m) {
            let mut point = vec![0.0; m];
            let mut prefix = UserSet::EMPTY;
            for &user in &order {
                let next = prefix.with(user);
                point[user] = self.rank(next) - self.rank(prefix);
                prefix = next;
            }
            if !vertices
                .iter()
                .any(|v| v.iter().zip(&point).all(|(a, b)| (a - b).abs() <= 1e-12))
            {
                vertices.push(point);
            }
        }
        Ok(vertices.into_iter().map(RateProfile).collect())
    }
}
