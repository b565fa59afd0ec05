//! Equilibrium selection on the maximal face.
//!
//! The normalized equilibrium solves the weighted KKT system
//! `τ_j g'(α_j) = c`, `Σ_j α_j = C_N` for a common scale `c > 0`, with each
//! rate kept inside `[r_{j,N}, C_{j}]`. Since `(g')^{-1}` is decreasing, the
//! clamped total rate is monotone in `c` and a scalar bisection finds it.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::capacity::{CapacityRegionView, RateProfile};
use crate::error::{Error, Result};
use crate::utility::Utility;

const BRACKET_FLOOR: f64 = 1e-12;
const MAX_BISECTIONS: usize = 200;
const SUM_TOL: f64 = 1e-10;
const DEFINITE_TOL: f64 = 1e-10;

/// Per-user weights `τ_j` and a strictly concave utility.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedEqConfig {
    weights: Vec<f64>,
    utility: Utility,
}

impl NormalizedEqConfig {
    pub fn new(weights: Vec<f64>, utility: Utility) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidArgument(format!("weights must be positive, got {w}")));
        }
        if !utility.is_strictly_concave() {
            return Err(Error::NotStrictlyConcave(format!(
                "`{}` has no strictly decreasing derivative",
                utility.name()
            )));
        }
        Ok(NormalizedEqConfig { weights, utility })
    }

    /// All weights equal to one.
    pub fn equal_weights(users: usize, utility: Utility) -> Result<Self> {
        Self::new(vec![1.0; users], utility)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn utility(&self) -> &Utility {
        &self.utility
    }
}

/// Which bound, if any, holds a coordinate of the solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Free,
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedEquilibrium {
    pub profile: RateProfile,
    /// Common scale `c`.
    pub scale: f64,
    /// `ζ_j = c / τ_j`.
    pub multipliers: Vec<f64>,
    pub bounds: Vec<Bound>,
    /// Largest `|τ_j g'(α_j) − c|` over free coordinates.
    pub kkt_residual: f64,
}

pub fn normalized_equilibrium(view: &CapacityRegionView, config: &NormalizedEqConfig) -> Result<NormalizedEquilibrium> {
    let m = view.users();
    if config.weights.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: config.weights.len(),
        });
    }
    let g = &config.utility;
    let lower = view.safe_rates().to_vec();
    let upper: Vec<f64> = (0..m).map(|j| view.single_capacity(j)).collect();
    let target = view.total_capacity();

    let rates_at = |c: f64| -> Vec<f64> {
        (0..m)
            .map(|j| {
                let free = g
                    .inv_deriv(c / config.weights[j])
                    .expect("strictly concave utilities have an inverse derivative");
                free.clamp(lower[j], upper[j])
            })
            .collect()
    };
    let total = |c: f64| rates_at(c).iter().sum::<f64>();

    // at c_hi every coordinate sits on its lower bound, at c_lo on its upper
    let mut lo = BRACKET_FLOOR;
    let mut hi = (0..m)
        .map(|j| config.weights[j] * g.deriv(lower[j]))
        .fold(f64::NEG_INFINITY, f64::max);
    let (sum_lo, sum_hi) = (total(lo), total(hi));
    if !(sum_lo >= target - SUM_TOL && sum_hi <= target + SUM_TOL) {
        return Err(Error::BracketFailure {
            low: lo,
            high: hi,
            low_sum: sum_lo,
            high_sum: sum_hi,
            target,
        });
    }

    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if total(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let scale = 0.5 * (lo + hi);
    let mut rates = rates_at(scale);

    // bisection leaves a rounding-level gap; put it on a free coordinate
    let gap = target - rates.iter().sum::<f64>();
    let bounds: Vec<Bound> = rates
        .iter()
        .enumerate()
        .map(|(j, a)| {
            if *a <= lower[j] {
                Bound::Lower
            } else if *a >= upper[j] {
                Bound::Upper
            } else {
                Bound::Free
            }
        })
        .collect();
    if let Some(j) = bounds.iter().position(|b| *b == Bound::Free) {
        rates[j] += gap;
    }
    let final_gap = (target - rates.iter().sum::<f64>()).abs();
    if final_gap > SUM_TOL {
        return Err(Error::BracketFailure {
            low: lo,
            high: hi,
            low_sum: total(lo),
            high_sum: total(hi),
            target,
        });
    }

    let kkt_residual = (0..m)
        .filter(|&j| bounds[j] == Bound::Free)
        .map(|j| (config.weights[j] * g.deriv(rates[j]) - scale).abs())
        .fold(0.0, f64::max);
    let multipliers = config.weights.iter().map(|t| scale / t).collect();

    Ok(NormalizedEquilibrium {
        profile: RateProfile::new(rates)?,
        scale,
        multipliers,
        bounds,
        kkt_residual,
    })
}

/// Numerical Goodman/Rosen check at one interior point.
#[derive(Debug, Clone, PartialEq)]
pub struct GoodmanCertificate {
    /// Jacobian `G` of `h(α) = [ζ_j ∂_j u_j(α)]_j`.
    pub jacobian: DMatrix<f64>,
    /// `G + Gᵀ`.
    pub symmetric_part: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub negative_definite: bool,
}

/// Builds `G` by central differences of `h` with step `fd_step` and tests
/// `G + Gᵀ` for negative definiteness (all eigenvalues below `−1e−10`).
///
/// In the interior the indicator is constant, so `∂_j u_j = g'(α_j)`.
pub fn goodman_certificate(
    view: &CapacityRegionView,
    g: &Utility,
    rates: &[f64],
    zeta: &[f64],
    fd_step: f64,
) -> Result<GoodmanCertificate> {
    view.check_len(rates)?;
    let m = view.users();
    if zeta.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: zeta.len(),
        });
    }
    if !(fd_step.is_finite() && fd_step > 0.0) {
        return Err(Error::InvalidArgument(format!("fd_step must be positive, got {fd_step}")));
    }
    let slack = view.min_slack(rates)?;
    if slack <= 2.0 * fd_step {
        return Err(Error::NotInterior { slack });
    }

    let h = |point: &[f64]| -> Vec<f64> { (0..m).map(|j| zeta[j] * g.deriv(point[j])).collect() };
    let mut jacobian = DMatrix::zeros(m, m);
    let mut probe = rates.to_vec();
    for k in 0..m {
        probe[k] = rates[k] + fd_step;
        let plus = h(&probe);
        probe[k] = rates[k] - fd_step;
        let minus = h(&probe);
        probe[k] = rates[k];
        for j in 0..m {
            jacobian[(j, k)] = (plus[j] - minus[j]) / (2.0 * fd_step);
        }
    }
    let symmetric_part = &jacobian + jacobian.transpose();
    let eigenvalues: Vec<f64> = SymmetricEigen::new(symmetric_part.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    let negative_definite = eigenvalues.iter().all(|e| *e < -DEFINITE_TOL);
    Ok(GoodmanCertificate {
        jacobian,
        symmetric_part,
        eigenvalues,
        negative_definite,
    })
}
