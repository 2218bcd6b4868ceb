//! Closed-form average channel gain and ergodic-rate expressions.
//!
//! With phases configured from LS estimates, each element contributes a term
//! `x = (h* + ε*) h / |h + ε|` to the received amplitude. For `h ~ CN(0, β²)`
//! and `ε ~ CN(0, δ²)`,
//!
//! ```text
//! E{Re x} = √π β² / (2 √(β² + δ²)),   E{Im x} = 0,   E{|x|²} = β²
//! ```
//!
//! and terms from different elements are independent. The average gain
//! `E{|Σ φ̂ h|²}` therefore splits into a diagonal part `Σ M_k β_k²`, an
//! intra-IRS part and an inter-IRS part, both built from the mean alignment
//! above. The rate bound is `log₂(1 + q E{|Σ φ̂ h|²} / σ_n²)`, which by Jensen's
//! inequality upper-bounds the ergodic rate.

use std::f64::consts::PI;

use crate::channel::{ChannelRealization, LinkStatistics};
use crate::error::{Error, Result};
use crate::estimation::{PhaseConfiguration, PilotAllocation};

/// `E{|Σ φ̂ h|²}` and its three additive components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainBreakdown {
    pub total: f64,
    /// `Σ_k M_k β_k²`.
    pub diagonal: f64,
    /// Cross terms between elements of the same IRS.
    pub intra: f64,
    /// Cross terms between elements of different IRSs.
    pub inter: f64,
}

impl GainBreakdown {
    fn from_parts(diagonal: f64, intra: f64, inter: f64) -> Self {
        GainBreakdown {
            total: diagonal + intra + inter,
            diagonal,
            intra,
            inter,
        }
    }
}

/// `|Σ_k Σ_m φ_{k,m} h_{k,m}|²` for one realization.
pub fn received_gain(truth: &ChannelRealization, phases: &PhaseConfiguration) -> Result<f64> {
    if truth.coefficients.len() != phases.coefficients.len()
        || truth
            .coefficients
            .iter()
            .zip(&phases.coefficients)
            .any(|(h, p)| h.len() != p.len())
    {
        return Err(Error::ShapeMismatch(
            "phase configuration does not match the channel realization".into(),
        ));
    }
    let sum = truth
        .coefficients
        .iter()
        .zip(&phases.coefficients)
        .flat_map(|(h, p)| h.iter().zip(p))
        .map(|(h, p)| p * h)
        .sum::<num_complex::Complex64>();
    Ok(sum.norm_sqr())
}

/// Instantaneous rate `log₂(1 + q |Σ φ h|² / σ_n²)` in bit/s/Hz.
pub fn instantaneous_rate(
    truth: &ChannelRealization,
    phases: &PhaseConfiguration,
    q: f64,
    sigma_n2: f64,
) -> Result<f64> {
    let gain = received_gain(truth, phases)?;
    Ok((q / sigma_n2 * gain).ln_1p() / std::f64::consts::LN_2)
}

/// `E{Re{(h* + ε*) h / |h + ε|}} = √π β² / (2 √(β² + δ²))`.
pub fn mean_alignment(beta2: f64, delta2: f64) -> f64 {
    PI.sqrt() * beta2 / (2.0 * (beta2 + delta2).sqrt())
}

/// Average gain for per-IRS variances `beta2`, element counts and per-IRS
/// LS error variances `delta2` (zero for perfect CSI).
pub fn expected_gain_from_errors(
    beta2: &[f64],
    elements: &[usize],
    delta2: &[f64],
) -> Result<GainBreakdown> {
    if beta2.len() != elements.len() || beta2.len() != delta2.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} variances, {} element counts, {} error variances",
            beta2.len(),
            elements.len(),
            delta2.len()
        )));
    }
    let m: Vec<f64> = elements.iter().map(|&m| m as f64).collect();
    let align: Vec<f64> = beta2
        .iter()
        .zip(delta2)
        .map(|(&b, &d)| mean_alignment(b, d))
        .collect();
    let diagonal = beta2.iter().zip(&m).map(|(b, m)| m * b).sum();
    let intra = align
        .iter()
        .zip(&m)
        .map(|(a, m)| a * a * m * (m - 1.0))
        .sum();
    let mut inter = 0.0;
    for k in 0..beta2.len() {
        let others: f64 = (0..beta2.len())
            .filter(|&j| j != k)
            .map(|j| m[j] * align[j])
            .sum();
        inter += m[k] * align[k] * others;
    }
    Ok(GainBreakdown::from_parts(diagonal, intra, inter))
}

/// Average gain with LS errors `δ_k² = σ_z² / p_k` from `allocation`.
pub fn expected_gain(
    stats: &LinkStatistics,
    allocation: &PilotAllocation,
    sigma_z2: f64,
) -> Result<GainBreakdown> {
    expected_gain_from_errors(
        stats.beta2(),
        allocation.elements(),
        &allocation.error_variances(sigma_z2),
    )
}

/// Average gain with error-free estimates.
pub fn perfect_csi_gain(stats: &LinkStatistics, elements: &[usize]) -> Result<GainBreakdown> {
    expected_gain_from_errors(stats.beta2(), elements, &vec![0.0; stats.len()])
}

/// Average gain with independent uniform phases: only the diagonal survives.
pub fn random_phase_gain(stats: &LinkStatistics, elements: &[usize]) -> Result<GainBreakdown> {
    if stats.len() != elements.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} variances for {} IRSs",
            stats.len(),
            elements.len()
        )));
    }
    let diagonal = stats
        .beta2()
        .iter()
        .zip(elements)
        .map(|(b, &m)| b * m as f64)
        .sum();
    Ok(GainBreakdown::from_parts(diagonal, 0.0, 0.0))
}

/// Jensen bound `log₂(1 + q · gain / σ_n²)`.
pub fn ergodic_capacity_bound(gain: f64, q: f64, sigma_n2: f64) -> f64 {
    (q * gain / sigma_n2).ln_1p() / std::f64::consts::LN_2
}

/// High-SNR approximation `log₂(E{SNR})`.
pub fn high_snr_rate(gain: f64, q: f64, sigma_n2: f64) -> f64 {
    (q * gain / sigma_n2).log2()
}

/// Low-SNR approximation `E{SNR} / ln 2`.
pub fn low_snr_rate(gain: f64, q: f64, sigma_n2: f64) -> f64 {
    q * gain / sigma_n2 / std::f64::consts::LN_2
}
