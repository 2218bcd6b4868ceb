//! ON/OFF pilot protocol and least-squares estimation of cascaded coefficients.
//!
//! Only one reflecting element is switched on per pilot slot, so the protocol
//! takes `Σ M_k` slots and each slot observes one coefficient without
//! interference. The pilot symbol and the reflection coefficient used during
//! estimation are unit modulus and cancel in the LS estimate, which leaves
//!
//! ```text
//! ĥ = h + ε,   ε ~ CN(0, σ_z² / p_k)
//! ```
//!
//! That error model is simulated directly.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{complex_gaussian, ChannelRealization};
use crate::error::{Error, Result};
use crate::rng::{self, Domain};

/// Relative tolerance on the pilot energy budget.
pub const BUDGET_TOLERANCE: f64 = 1e-9;

/// Where a pilot allocation came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Identical,
    Refined,
    Simplified,
    ExactNumeric,
    Custom,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Identical => "identical",
            Strategy::Refined => "refined",
            Strategy::Simplified => "simplified",
            Strategy::ExactNumeric => "exact-numeric",
            Strategy::Custom => "custom",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identical" => Ok(Strategy::Identical),
            "refined" => Ok(Strategy::Refined),
            "simplified" | "optimal" => Ok(Strategy::Simplified),
            "exact" | "exact-numeric" => Ok(Strategy::ExactNumeric),
            "custom" => Ok(Strategy::Custom),
            other => Err(Error::Parse {
                what: "strategy".into(),
                message: format!("unknown strategy `{other}`"),
            }),
        }
    }
}

/// Per-IRS pilot powers `p_k` (W). All elements of one IRS share `p_k`.
///
/// Invariant: `Σ M_k p_k = (Σ M_k) · budget` to [`BUDGET_TOLERANCE`].
#[derive(Debug, Clone, PartialEq)]
pub struct PilotAllocation {
    powers: Vec<f64>,
    elements: Vec<usize>,
    budget: f64,
    strategy: Strategy,
}

impl PilotAllocation {
    pub fn new(
        powers: Vec<f64>,
        elements: Vec<usize>,
        budget: f64,
        strategy: Strategy,
    ) -> Result<Self> {
        if powers.is_empty() || powers.len() != elements.len() {
            return Err(Error::InvalidAllocation(format!(
                "{} powers for {} IRSs",
                powers.len(),
                elements.len()
            )));
        }
        if !(budget > 0.0 && budget.is_finite()) {
            return Err(Error::InvalidAllocation(format!("budget must be > 0, got {budget}")));
        }
        if let Some(k) = powers.iter().position(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(Error::InvalidAllocation(format!(
                "pilot power of IRS {k} must be > 0, got {}",
                powers[k]
            )));
        }
        if elements.contains(&0) {
            return Err(Error::InvalidAllocation("IRS with zero elements".into()));
        }
        let spent: f64 = powers.iter().zip(&elements).map(|(p, &m)| p * m as f64).sum();
        let available = budget * elements.iter().sum::<usize>() as f64;
        if ((spent - available) / available).abs() > BUDGET_TOLERANCE {
            return Err(Error::InvalidAllocation(format!(
                "pilot energy {spent:e} does not match the budget {available:e}"
            )));
        }
        Ok(PilotAllocation {
            powers,
            elements,
            budget,
            strategy,
        })
    }

    /// Scales positive `weights` so the budget holds exactly.
    pub fn from_weights(
        weights: &[f64],
        elements: Vec<usize>,
        budget: f64,
        strategy: Strategy,
    ) -> Result<Self> {
        if weights.len() != elements.len() {
            return Err(Error::InvalidAllocation(format!(
                "{} weights for {} IRSs",
                weights.len(),
                elements.len()
            )));
        }
        // Dividing by the largest weight first makes equal weights exactly 1,
        // so they reproduce the budget bit for bit.
        let peak = weights.iter().copied().fold(0.0, f64::max);
        let scaled: Vec<f64> = weights.iter().map(|w| w / peak).collect();
        let count = elements.iter().sum::<usize>() as f64;
        let mean = scaled.iter().zip(&elements).map(|(w, &m)| w * m as f64).sum::<f64>() / count;
        let powers = scaled.iter().map(|w| budget * (w / mean)).collect();
        PilotAllocation::new(powers, elements, budget, strategy)
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn elements(&self) -> &[usize] {
        &self.elements
    }

    /// Average per-element pilot power `p`.
    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }

    /// Total pilot energy `Σ M_k p_k`.
    pub fn energy(&self) -> f64 {
        self.powers
            .iter()
            .zip(&self.elements)
            .map(|(p, &m)| p * m as f64)
            .sum()
    }

    /// LS error variances `δ_k² = σ_z² / p_k`.
    pub fn error_variances(&self, sigma_z2: f64) -> Vec<f64> {
        self.powers.iter().map(|p| sigma_z2 / p).collect()
    }
}

/// Number of pilot slots used by the ON/OFF protocol.
pub fn pilot_overhead(elements: &[usize]) -> usize {
    elements.iter().sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub irs_ids: Vec<usize>,
    pub estimates: Vec<Vec<Complex64>>,
    /// `δ_k² = σ_z² / p_k`.
    pub error_variance: Vec<f64>,
}

/// Unit-modulus reflection coefficients, one per element.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseConfiguration {
    pub coefficients: Vec<Vec<Complex64>>,
}

impl PhaseConfiguration {
    /// Phases matched to the true channel.
    pub fn matched(truth: &ChannelRealization) -> Self {
        PhaseConfiguration {
            coefficients: truth.coefficients.iter().map(|c| align_all(c)).collect(),
        }
    }

    /// Independent uniform phases, keyed by `(seed, IRS id)`.
    pub fn random(truth: &ChannelRealization, seed: u64) -> Self {
        let coefficients = truth
            .irs_ids
            .iter()
            .zip(&truth.coefficients)
            .map(|(&id, c)| {
                let mut rng = rng::stream(seed, Domain::RandomPhase, id as u64);
                (0..c.len())
                    .map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI)))
                    .collect()
            })
            .collect();
        PhaseConfiguration { coefficients }
    }
}

/// LS estimates of every coefficient in `truth` with pilot powers `allocation`.
pub fn estimate_ls(
    truth: &ChannelRealization,
    allocation: &PilotAllocation,
    sigma_z2: f64,
    seed: u64,
) -> Result<EstimationResult> {
    if allocation.len() != truth.num_irs() {
        return Err(Error::ShapeMismatch(format!(
            "allocation covers {} IRSs, realization has {}",
            allocation.len(),
            truth.num_irs()
        )));
    }
    if allocation.elements() != truth.elements().as_slice() {
        return Err(Error::ShapeMismatch(format!(
            "allocation element counts {:?} differ from realization {:?}",
            allocation.elements(),
            truth.elements()
        )));
    }
    if !(sigma_z2 > 0.0) {
        return Err(Error::InvalidConfig(format!("noise power must be > 0, got {sigma_z2}")));
    }
    let error_variance = allocation.error_variances(sigma_z2);
    let estimates = truth
        .irs_ids
        .iter()
        .zip(&truth.coefficients)
        .zip(&error_variance)
        .map(|((&id, coeffs), &delta2)| {
            let mut rng = rng::stream(seed, Domain::Estimation, id as u64);
            coeffs
                .iter()
                .map(|h| h + complex_gaussian(&mut rng, delta2))
                .collect()
        })
        .collect();
    Ok(EstimationResult {
        irs_ids: truth.irs_ids.clone(),
        estimates,
        error_variance,
    })
}

fn align(h: Complex64) -> Complex64 {
    let r = h.norm();
    if r > 0.0 && r.is_finite() {
        h.conj() / r
    } else {
        log::warn!("degenerate channel estimate {h}; using unit reflection");
        Complex64::new(1.0, 0.0)
    }
}

fn align_all(coeffs: &[Complex64]) -> Vec<Complex64> {
    coeffs.iter().map(|&h| align(h)).collect()
}

/// Reflection coefficients `φ̂ = ĥ* / |ĥ|`; a zero estimate maps to `1`.
pub fn configure_phases(est: &EstimationResult) -> PhaseConfiguration {
    PhaseConfiguration {
        coefficients: est.estimates.iter().map(|c| align_all(c)).collect(),
    }
}
