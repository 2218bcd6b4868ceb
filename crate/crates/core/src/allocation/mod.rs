//! Pilot power allocation across IRSs.
//!
//! The allocation problem maximizes the pilot-dependent part of the average
//! channel gain,
//!
//! ```text
//! φ(P) = Σ_k β_k⁴ Σ_m g_{k,m} Σ_{m'≠m} g_{k,m'}
//!      + Σ_k Σ_m β_k² g_{k,m} Σ_{k'≠k} Σ_{m'} β_{k'}² g_{k',m'},
//! g_{k,m} = 1 / √(β_k² + σ_z² / p_{k,m}),
//! ```
//!
//! subject to the average pilot power budget `Σ_k Σ_m p_{k,m} = (Σ_k M_k) p`.
//! Stationarity forces equal powers inside each IRS, so every strategy here
//! works with one power `p_k` per IRS:
//!
//! * [`allocate_identical`]: `p_k = p`.
//! * [`allocate_refined`]: `p_k ∝ √(Σ_j β_j M_j / β_k − 1)`, the stationary
//!   point once `β_k² + σ_z²/p_k ≈ β_k²`.
//! * [`allocate_simplified`]: `p_k ∝ 1/√β_k`, the large-array limit of the
//!   refined form (inverse square-root law).
//! * [`allocate_exact`]: solves the full stationarity system numerically.
//!
//! [`brute_force_oracle`] searches the budget simplex directly and is used to
//! validate all of the above.

mod exact;
mod oracle;

pub use exact::{allocate_exact, solve_stationarity, StationaryPoint};
pub use oracle::{brute_force_oracle, OracleMode, OracleResult};

use std::sync::atomic::{AtomicBool, Ordering};

use crate::channel::LinkStatistics;
use crate::error::{Error, Result};
use crate::estimation::{PilotAllocation, Strategy};
use crate::units::linear_to_db;

/// Default moderate-SNR threshold `γ` on `p β_k² / σ_z²` (10 dB).
pub const DEFAULT_MIN_SNR_GAMMA: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationProblem {
    beta: Vec<f64>,
    elements: Vec<usize>,
    budget: f64,
    sigma_z2: f64,
    min_snr_gamma: f64,
}

impl AllocationProblem {
    /// `beta` holds the cascaded amplitudes `β_k` (not the variances).
    pub fn new(beta: Vec<f64>, elements: Vec<usize>, budget: f64, sigma_z2: f64) -> Result<Self> {
        let problem = AllocationProblem {
            beta,
            elements,
            budget,
            sigma_z2,
            min_snr_gamma: DEFAULT_MIN_SNR_GAMMA,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn from_stats(
        stats: &LinkStatistics,
        elements: Vec<usize>,
        budget: f64,
        sigma_z2: f64,
    ) -> Result<Self> {
        AllocationProblem::new(stats.beta(), elements, budget, sigma_z2)
    }

    pub fn with_min_snr_gamma(mut self, gamma: f64) -> Result<Self> {
        self.min_snr_gamma = gamma;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if self.beta.is_empty() || self.beta.len() != self.elements.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} amplitudes for {} IRSs",
                self.beta.len(),
                self.elements.len()
            )));
        }
        if self.beta.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
            return Err(Error::InvalidConfig("amplitudes must be positive and finite".into()));
        }
        if self.elements.contains(&0) {
            return Err(Error::InvalidConfig("IRS with zero elements".into()));
        }
        for (name, v) in [
            ("budget", self.budget),
            ("sigma_z2", self.sigma_z2),
            ("min_snr_gamma", self.min_snr_gamma),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn beta2(&self) -> Vec<f64> {
        self.beta.iter().map(|b| b * b).collect()
    }

    pub fn elements(&self) -> &[usize] {
        &self.elements
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn sigma_z2(&self) -> f64 {
        self.sigma_z2
    }

    pub fn min_snr_gamma(&self) -> f64 {
        self.min_snr_gamma
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    pub fn total_elements(&self) -> usize {
        self.elements.iter().sum()
    }

    /// Per-link estimation SNR at the average budget, `p β_k² / σ_z²`.
    pub fn estimation_snr(&self) -> Vec<f64> {
        self.beta
            .iter()
            .map(|b| self.budget * b * b / self.sigma_z2)
            .collect()
    }

    /// Whether every link meets `p β_k² / σ_z² ≥ γ`.
    pub fn is_moderate_snr(&self) -> bool {
        self.estimation_snr().iter().all(|&s| s >= self.min_snr_gamma)
    }

    /// Same links with a different budget.
    pub fn with_budget(&self, budget: f64) -> Result<Self> {
        let mut p = self.clone();
        p.budget = budget;
        p.validate()?;
        Ok(p)
    }

    /// Warns on the first violation in the process, logs at debug level after.
    fn warn_if_outside_validity(&self, strategy: Strategy) {
        static WARNED: AtomicBool = AtomicBool::new(false);
        if self.is_moderate_snr() {
            return;
        }
        let level = if WARNED.swap(true, Ordering::Relaxed) {
            log::Level::Debug
        } else {
            log::Level::Warn
        };
        log::log!(
            level,
            "{strategy} allocation used below the moderate-SNR threshold γ = {} (link SNRs {:?})",
            self.min_snr_gamma,
            self.estimation_snr()
        );
    }
}

/// `1 / √(β² + σ_z²/p)`, zero when `p = 0`.
fn alignment_weight(beta2: f64, sigma_z2: f64, power: f64) -> f64 {
    if power > 0.0 {
        1.0 / (beta2 + sigma_z2 / power).sqrt()
    } else {
        0.0
    }
}

/// Evaluates `φ` for arbitrary per-element powers `powers[k][m]`.
pub fn objective_phi(powers: &[Vec<f64>], problem: &AllocationProblem) -> Result<f64> {
    if powers.len() != problem.len()
        || powers
            .iter()
            .zip(problem.elements())
            .any(|(p, &m)| p.len() != m)
    {
        return Err(Error::ShapeMismatch(
            "per-element powers do not match the problem".into(),
        ));
    }
    if powers.iter().flatten().any(|p| !(*p >= 0.0 && p.is_finite())) {
        return Err(Error::InvalidAllocation("pilot powers must be >= 0".into()));
    }
    let sigma = problem.sigma_z2();
    let beta2 = problem.beta2();
    let weights: Vec<Vec<f64>> = powers
        .iter()
        .zip(&beta2)
        .map(|(ps, &b2)| ps.iter().map(|&p| alignment_weight(b2, sigma, p)).collect())
        .collect();
    let sums: Vec<f64> = weights.iter().map(|w| w.iter().sum()).collect();

    let mut intra = 0.0;
    for ((w, &a), &b2) in weights.iter().zip(&sums).zip(&beta2) {
        let pairs: f64 = w.iter().map(|g| g * (a - g)).sum();
        intra += b2 * b2 * pairs;
    }
    let mut inter = 0.0;
    for k in 0..problem.len() {
        let others: f64 = (0..problem.len())
            .filter(|&j| j != k)
            .map(|j| beta2[j] * sums[j])
            .sum();
        inter += beta2[k] * sums[k] * others;
    }
    Ok(intra + inter)
}

/// `φ` when all elements of IRS `k` use `powers[k]`, through the collapsed
/// form `S² − Σ_k M_k β_k⁴ g_k²` with `S = Σ_k M_k β_k² g_k`.
pub fn objective_phi_per_irs(powers: &[f64], problem: &AllocationProblem) -> Result<f64> {
    if powers.len() != problem.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} powers for {} IRSs",
            powers.len(),
            problem.len()
        )));
    }
    if powers.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
        return Err(Error::InvalidAllocation("pilot powers must be >= 0".into()));
    }
    let mut aggregate = 0.0;
    let mut own = 0.0;
    for ((&p, &b), &m) in powers.iter().zip(problem.beta()).zip(problem.elements()) {
        let b2 = b * b;
        let term = b2 * alignment_weight(b2, problem.sigma_z2(), p);
        aggregate += m as f64 * term;
        own += m as f64 * term * term;
    }
    Ok(aggregate * aggregate - own)
}

fn single_irs(problem: &AllocationProblem, strategy: Strategy) -> Result<PilotAllocation> {
    PilotAllocation::new(
        vec![problem.budget()],
        problem.elements().to_vec(),
        problem.budget(),
        strategy,
    )
}

pub fn allocate_identical(problem: &AllocationProblem) -> Result<PilotAllocation> {
    PilotAllocation::new(
        vec![problem.budget(); problem.len()],
        problem.elements().to_vec(),
        problem.budget(),
        Strategy::Identical,
    )
}

/// Inverse square-root law `p_k = (Σ M_j) p / (√β_k Σ_j M_j/√β_j)`.
pub fn allocate_simplified(problem: &AllocationProblem) -> Result<PilotAllocation> {
    if problem.len() == 1 {
        return single_irs(problem, Strategy::Simplified);
    }
    problem.warn_if_outside_validity(Strategy::Simplified);
    let weights: Vec<f64> = problem.beta().iter().map(|b| 1.0 / b.sqrt()).collect();
    PilotAllocation::from_weights(
        &weights,
        problem.elements().to_vec(),
        problem.budget(),
        Strategy::Simplified,
    )
}

/// `p_k ∝ √(Σ_j β_j M_j / β_k − 1)`, normalized to the budget.
pub fn allocate_refined(problem: &AllocationProblem) -> Result<PilotAllocation> {
    if problem.len() == 1 {
        return single_irs(problem, Strategy::Refined);
    }
    problem.warn_if_outside_validity(Strategy::Refined);
    let weighted: f64 = problem
        .beta()
        .iter()
        .zip(problem.elements())
        .map(|(b, &m)| b * m as f64)
        .sum();
    let weights = problem
        .beta()
        .iter()
        .enumerate()
        .map(|(k, b)| {
            let radicand = weighted / b - 1.0;
            if radicand > 0.0 {
                Ok(radicand.sqrt())
            } else {
                Err(Error::RadicandNonPositive { irs: k, radicand })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    PilotAllocation::from_weights(
        &weights,
        problem.elements().to_vec(),
        problem.budget(),
        Strategy::Refined,
    )
}

/// Any strategy by tag. `Custom` is not a strategy and is rejected.
pub fn allocate(problem: &AllocationProblem, strategy: Strategy) -> Result<PilotAllocation> {
    match strategy {
        Strategy::Identical => allocate_identical(problem),
        Strategy::Simplified => allocate_simplified(problem),
        Strategy::Refined => allocate_refined(problem),
        Strategy::ExactNumeric => allocate_exact(problem, 1e-10, 200),
        Strategy::Custom => Err(Error::InvalidConfig(
            "custom allocations are built with PilotAllocation::new".into(),
        )),
    }
}

/// Peak-to-average power ratio of a pilot sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PaprReport {
    pub papr_linear: f64,
    pub papr_db: f64,
    /// `√(β_max / β_min)`, the bound met by the inverse square-root law.
    pub upper_bound_linear: f64,
    pub upper_bound_db: f64,
}

impl PaprReport {
    pub fn within_bound(&self) -> bool {
        self.papr_db <= self.upper_bound_db + 1e-9
    }
}

/// `max_k p_k / p`, with the bound computed from the problem's amplitudes.
pub fn papr(allocation: &PilotAllocation, problem: &AllocationProblem) -> PaprReport {
    let peak = allocation.powers().iter().copied().fold(0.0, f64::max);
    let papr_linear = peak / allocation.budget();
    let b_max = problem.beta().iter().copied().fold(0.0, f64::max);
    let b_min = problem.beta().iter().copied().fold(f64::INFINITY, f64::min);
    let upper_bound_linear = (b_max / b_min).sqrt();
    PaprReport {
        papr_linear,
        papr_db: linear_to_db(papr_linear),
        upper_bound_linear,
        upper_bound_db: linear_to_db(upper_bound_linear),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(beta: &[f64], elements: &[usize], budget: f64, sigma: f64) -> AllocationProblem {
        AllocationProblem::new(beta.to_vec(), elements.to_vec(), budget, sigma).unwrap()
    }

    #[test]
    fn phi_single_element_is_zero() {
        let p = problem(&[1e-5], &[1], 1.0, 1e-14);
        assert_eq!(objective_phi(&[vec![1.0]], &p).unwrap(), 0.0);
    }

    #[test]
    fn phi_two_equal_elements_by_hand() {
        let (b, pw, s) = (0.7f64, 0.3, 0.2);
        let p = problem(&[b], &[2], pw, s);
        let phi = objective_phi(&[vec![pw, pw]], &p).unwrap();
        let expected = 2.0 * b.powi(4) / (b * b + s / pw);
        assert!((phi - expected).abs() < 1e-14);
    }

    #[test]
    fn phi_is_permutation_invariant_within_irs() {
        let p = problem(&[0.8, 0.3], &[3, 2], 1.0, 0.1);
        let a = objective_phi(&[vec![0.5, 1.0, 1.7], vec![0.9, 0.9]], &p).unwrap();
        let b = objective_phi(&[vec![1.7, 0.5, 1.0], vec![0.9, 0.9]], &p).unwrap();
        assert!((a - b).abs() <= 1e-15 * a);
    }

    #[test]
    fn collapsed_form_matches_per_element_form() {
        let p = problem(&[0.8, 0.3, 0.05], &[3, 2, 4], 1.0, 0.1);
        let powers = [0.7, 1.9, 0.4];
        let expanded: Vec<Vec<f64>> = powers
            .iter()
            .zip(p.elements())
            .map(|(&x, &m)| vec![x; m])
            .collect();
        let a = objective_phi(&expanded, &p).unwrap();
        let b = objective_phi_per_irs(&powers, &p).unwrap();
        assert!((a - b).abs() <= 1e-13 * a);
    }

    #[test]
    fn phi_rejects_bad_shapes() {
        let p = problem(&[0.8, 0.3], &[3, 2], 1.0, 0.1);
        assert!(objective_phi(&[vec![1.0; 3]], &p).is_err());
        assert!(objective_phi_per_irs(&[1.0], &p).is_err());
    }

    #[test]
    fn identical_allocation() {
        let p = problem(&[1.0, 0.2, 0.05], &[10, 20, 5], 0.4, 1e-3);
        let a = allocate_identical(&p).unwrap();
        assert_eq!(a.powers(), &[0.4, 0.4, 0.4]);
        assert!((a.energy() - 35.0 * 0.4).abs() < 1e-12);
        assert_eq!(papr(&a, &p).papr_db, 0.0);
    }

    #[test]
    fn simplified_equal_links_reduce_to_identical() {
        let p = problem(&[0.3, 0.3], &[50, 50], 2.0, 1e-3);
        let a = allocate_simplified(&p).unwrap();
        for &x in a.powers() {
            assert!((x - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn simplified_inverse_square_root_law() {
        // β_1² = 16 β_2² means amplitude ratio 4 and power ratio 2.
        let p = problem(&[4e-5, 1e-5], &[1, 1], 1.0, 1e-14);
        let a = allocate_simplified(&p).unwrap();
        assert!((a.powers()[1] / a.powers()[0] - 2.0).abs() < 1e-12);
        let r = papr(&a, &p);
        assert!((r.papr_linear - 4.0 / 3.0).abs() < 1e-12);
        assert!(r.within_bound());
    }

    #[test]
    fn refined_direct_evaluation() {
        let b0 = 1e-5;
        let p = problem(&[4.0 * b0, b0], &[1, 1], 1.0, 1e-14);
        let a = allocate_refined(&p).unwrap();
        // Radicands 5/4 - 1 and 5 - 1.
        let w = [0.25f64.sqrt(), 4f64.sqrt()];
        let scale = 2.0 / (w[0] + w[1]);
        assert!((a.powers()[0] - w[0] * scale).abs() < 1e-12);
        assert!((a.powers()[1] - w[1] * scale).abs() < 1e-12);
    }

    #[test]
    fn refined_degenerate_radicand_is_reported() {
        // The radicand is M_k − 1 + Σ_{j≠k} β_j M_j / β_k, so it only reaches
        // zero when a single-element IRS drowns the rest below rounding.
        let p = problem(&[1.0, 1e-17], &[1, 1], 1.0, 1e-6);
        let err = allocate_refined(&p).unwrap_err();
        assert!(matches!(err, Error::RadicandNonPositive { irs: 0, .. }));
    }

    #[test]
    fn refined_approaches_simplified_for_large_arrays() {
        let p = problem(&[3e-5, 1e-5, 5e-6], &[1000, 1000, 1000], 1.0, 1e-14);
        let r = allocate_refined(&p).unwrap();
        let s = allocate_simplified(&p).unwrap();
        for (a, b) in r.powers().iter().zip(s.powers()) {
            assert!((a / b - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn single_irs_gets_the_whole_budget() {
        let p = problem(&[1e-5], &[1], 0.3, 1e-14);
        for s in [
            Strategy::Identical,
            Strategy::Simplified,
            Strategy::Refined,
            Strategy::ExactNumeric,
        ] {
            assert_eq!(allocate(&p, s).unwrap().powers(), &[0.3]);
        }
        assert!(allocate(&p, Strategy::Custom).is_err());
    }

    #[test]
    fn papr_bound_for_equal_links_is_zero_db() {
        let p = problem(&[0.2, 0.2, 0.2], &[3, 4, 5], 1.0, 1e-3);
        let r = papr(&allocate_simplified(&p).unwrap(), &p);
        assert!(r.papr_db.abs() < 1e-12);
        assert_eq!(r.upper_bound_db, 0.0);
    }

    #[test]
    fn moderate_snr_flag() {
        let p = problem(&[1e-5, 1e-6], &[1, 1], 1.0, 1e-14);
        assert!(p.is_moderate_snr());
        let low = p.with_budget(1e-5).unwrap();
        assert!(!low.is_moderate_snr());
        assert!(p.clone().with_min_snr_gamma(0.0).is_err());
    }
}
