//! End-to-end trials and ergodic rate estimation.
//!
//! One trial samples the cascaded channels of the active IRSs, estimates them
//! with the given pilot powers, sets the phases from the estimates and
//! evaluates the rate. Trial `t` uses seed `trial_seed(master_seed, t)` and
//! every random draw inside it is keyed by IRS index, so switching an IRS off
//! leaves the draws of the others untouched.
//!
//! Trials run in parallel; results are collected in trial order and summed
//! with compensation, so reports are bit-identical for any thread count.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::allocation::{allocate, AllocationProblem};
use crate::capacity::{
    ergodic_capacity_bound, expected_gain, perfect_csi_gain, random_phase_gain, received_gain,
    GainBreakdown,
};
use crate::channel::{
    link_statistics, sample_irs, sample_rician, ChannelRealization, Position3D, ScenarioConfig,
};
use crate::error::{Error, Result};
use crate::estimation::{
    configure_phases, estimate_ls, PhaseConfiguration, PilotAllocation, Strategy, BUDGET_TOLERANCE,
};
use crate::rng::trial_seed;

/// Which IRSs take part in a trial. Displays as `"10"` for IRS-1 on, IRS-2 off.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IrsMask {
    on: Vec<bool>,
}

impl IrsMask {
    pub fn new(on: Vec<bool>) -> Self {
        IrsMask { on }
    }

    pub fn all_on(count: usize) -> Self {
        IrsMask {
            on: vec![true; count],
        }
    }

    /// Only IRS `index` (zero based) switched on.
    pub fn single(count: usize, index: usize) -> Self {
        IrsMask {
            on: (0..count).map(|k| k == index).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.on.len()
    }

    pub fn is_empty(&self) -> bool {
        self.on.is_empty()
    }

    pub fn is_active(&self, k: usize) -> bool {
        self.on.get(k).copied().unwrap_or(false)
    }

    /// Indices of the active IRSs, ascending.
    pub fn active(&self) -> Vec<usize> {
        (0..self.on.len()).filter(|&k| self.on[k]).collect()
    }

    pub fn is_all_on(&self) -> bool {
        self.on.iter().all(|&b| b)
    }
}

impl fmt::Display for IrsMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.on {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for IrsMask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let on = s
            .chars()
            .map(|c| match c {
                '1' => Ok(true),
                '0' => Ok(false),
                other => Err(Error::Parse {
                    what: "IRS mask".into(),
                    message: format!("unexpected character `{other}` in `{s}`"),
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        if on.is_empty() {
            return Err(Error::Parse {
                what: "IRS mask".into(),
                message: "empty mask".into(),
            });
        }
        Ok(IrsMask { on })
    }
}

/// How the reflection phases are chosen in a trial.
#[derive(Debug, Clone, PartialEq)]
pub enum PhaseScheme {
    /// From LS estimates taken with these pilot powers (active IRSs only).
    Estimated(PilotAllocation),
    /// From the true channel.
    PerfectCsi,
    /// Independent uniform phases.
    RandomPhase,
}

impl PhaseScheme {
    pub fn label(&self) -> String {
        match self {
            PhaseScheme::Estimated(a) => a.strategy().to_string(),
            PhaseScheme::PerfectCsi => "perfect-csi".into(),
            PhaseScheme::RandomPhase => "random-phase".into(),
        }
    }
}

impl From<PilotAllocation> for PhaseScheme {
    fn from(allocation: PilotAllocation) -> Self {
        PhaseScheme::Estimated(allocation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    /// `log₂(1 + q |Σ φ h|² / σ_n²)`.
    pub rate: f64,
    /// `|Σ φ h|²`.
    pub gain: f64,
}

/// Mean and standard error of rate and gain over a set of trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialStatistics {
    pub n_trials: usize,
    pub mean_rate: f64,
    pub std_error: f64,
    pub mean_gain: f64,
    pub gain_std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub user: Position3D,
    pub scheme: String,
    pub mask: IrsMask,
    pub n_trials: usize,
    pub mean_rate: f64,
    /// Zero when `n_trials = 1`, see `single_trial`.
    pub std_error: f64,
    pub single_trial: bool,
    pub mean_gain: f64,
    pub gain_std_error: f64,
    /// Closed-form average gain for the active IRSs.
    pub expected_gain: GainBreakdown,
    /// `log₂(1 + q · expected_gain / σ_n²)`.
    pub closed_form_bound: f64,
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Mean and standard error of `n` values, summed with compensation in
/// iteration order. The error is zero for a single value.
pub fn mean_and_error(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let mut acc = Compensated::default();
    values.clone().for_each(|v| acc.add(v));
    let mean = acc.value() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let mut dev = Compensated::default();
    values.for_each(|v| dev.add((v - mean) * (v - mean)));
    let variance = dev.value() / (n - 1) as f64;
    (mean, (variance / n as f64).sqrt())
}

/// Runs `trial(t, seed_t)` for `t = 0..n_trials` in parallel and aggregates
/// the outcomes in trial order.
pub fn aggregate_trials<F>(n_trials: usize, master_seed: u64, trial: F) -> Result<TrialStatistics>
where
    F: Fn(u64, u64) -> Result<TrialOutcome> + Sync,
{
    if n_trials == 0 {
        return Err(Error::InvalidConfig("n_trials must be >= 1".into()));
    }
    let outcomes = (0..n_trials as u64)
        .into_par_iter()
        .map(|t| trial(t, trial_seed(master_seed, t)))
        .collect::<Result<Vec<_>>>()?;
    let (mean_rate, std_error) = mean_and_error(outcomes.iter().map(|o| o.rate), n_trials);
    let (mean_gain, gain_std_error) = mean_and_error(outcomes.iter().map(|o| o.gain), n_trials);
    Ok(TrialStatistics {
        n_trials,
        mean_rate,
        std_error,
        mean_gain,
        gain_std_error,
    })
}

/// Allocation problem over the active IRSs of `mask`.
///
/// The pilot energy `(Σ_all M_k) p` of the full deployment is kept and spread
/// over the active elements, so the per-element budget becomes
/// `p · Σ_all M_k / Σ_active M_k`.
pub fn masked_problem(
    scenario: &ScenarioConfig,
    user: &Position3D,
    mask: &IrsMask,
) -> Result<AllocationProblem> {
    let active = checked_active(scenario, mask)?;
    let stats = link_statistics(scenario, user)?.select(&active)?;
    let elements: Vec<usize> = active.iter().map(|&k| scenario.irs[k].elements).collect();
    let budget = masked_budget(scenario, &elements);
    AllocationProblem::from_stats(&stats, elements, budget, scenario.noise_bs)
}

/// Allocation of `strategy` for the active IRSs of `mask`.
pub fn allocate_for(
    scenario: &ScenarioConfig,
    user: &Position3D,
    mask: &IrsMask,
    strategy: Strategy,
) -> Result<PilotAllocation> {
    allocate(&masked_problem(scenario, user, mask)?, strategy)
}

fn masked_budget(scenario: &ScenarioConfig, active_elements: &[usize]) -> f64 {
    let active: usize = active_elements.iter().sum();
    scenario.pilot_power * scenario.total_elements() as f64 / active as f64
}

fn checked_active(scenario: &ScenarioConfig, mask: &IrsMask) -> Result<Vec<usize>> {
    if mask.len() != scenario.irs.len() {
        return Err(Error::ShapeMismatch(format!(
            "mask `{mask}` for {} IRSs",
            scenario.irs.len()
        )));
    }
    let active = mask.active();
    if active.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(active)
}

/// Validated inputs shared by every trial of one configuration.
struct Prepared<'a> {
    scenario: &'a ScenarioConfig,
    user: Position3D,
    scheme: &'a PhaseScheme,
    active: Vec<usize>,
    beta2: Vec<f64>,
    elements: Vec<usize>,
    rayleigh: bool,
}

impl<'a> Prepared<'a> {
    fn new(
        scenario: &'a ScenarioConfig,
        user: &Position3D,
        scheme: &'a PhaseScheme,
        mask: &IrsMask,
    ) -> Result<Self> {
        scenario.validate()?;
        let active = checked_active(scenario, mask)?;
        let stats = link_statistics(scenario, user)?;
        let beta2: Vec<f64> = active.iter().map(|&k| stats.beta2()[k]).collect();
        let elements: Vec<usize> = active.iter().map(|&k| scenario.irs[k].elements).collect();
        if let PhaseScheme::Estimated(allocation) = scheme {
            if allocation.elements() != elements.as_slice() {
                return Err(Error::ShapeMismatch(format!(
                    "allocation covers element counts {:?}, active IRSs have {:?}",
                    allocation.elements(),
                    elements
                )));
            }
            let available = scenario.pilot_power * scenario.total_elements() as f64;
            if ((allocation.energy() - available) / available).abs() > BUDGET_TOLERANCE {
                return Err(Error::InvalidAllocation(format!(
                    "allocation spends {:e} J per slot set, the deployment budget is {:e}",
                    allocation.energy(),
                    available
                )));
            }
        }
        Ok(Prepared {
            scenario,
            user: *user,
            scheme,
            active,
            beta2,
            elements,
            rayleigh: scenario.is_rayleigh_cascade(),
        })
    }

    fn sample(&self, seed: u64) -> Result<ChannelRealization> {
        if self.rayleigh {
            let coefficients = self
                .active
                .iter()
                .zip(&self.beta2)
                .zip(&self.elements)
                .map(|((&k, &b2), &m)| sample_irs(b2, m, seed, k))
                .collect();
            Ok(ChannelRealization {
                seed,
                irs_ids: self.active.clone(),
                coefficients,
            })
        } else {
            sample_rician(self.scenario, &self.user, &self.active, seed)
        }
    }

    fn run(&self, seed: u64) -> Result<TrialOutcome> {
        let truth = self.sample(seed)?;
        let phases = match self.scheme {
            PhaseScheme::Estimated(allocation) => {
                configure_phases(&estimate_ls(&truth, allocation, self.scenario.noise_bs, seed)?)
            }
            PhaseScheme::PerfectCsi => PhaseConfiguration::matched(&truth),
            PhaseScheme::RandomPhase => PhaseConfiguration::random(&truth, seed),
        };
        let gain = received_gain(&truth, &phases)?;
        let snr = self.scenario.downlink_power * gain / self.scenario.noise_user;
        Ok(TrialOutcome {
            rate: snr.ln_1p() / std::f64::consts::LN_2,
            gain,
        })
    }

    fn expected_gain(&self) -> Result<GainBreakdown> {
        let stats = crate::channel::LinkStatistics::new(self.beta2.clone())?;
        match self.scheme {
            PhaseScheme::Estimated(a) => expected_gain(&stats, a, self.scenario.noise_bs),
            PhaseScheme::PerfectCsi => perfect_csi_gain(&stats, &self.elements),
            PhaseScheme::RandomPhase => random_phase_gain(&stats, &self.elements),
        }
    }
}

/// One trial with any phase scheme.
pub fn run_trial_with(
    scenario: &ScenarioConfig,
    user: &Position3D,
    scheme: &PhaseScheme,
    mask: &IrsMask,
    seed: u64,
) -> Result<TrialOutcome> {
    Prepared::new(scenario, user, scheme, mask)?.run(seed)
}

/// Rate of one end-to-end trial with estimated phases.
pub fn run_trial(
    scenario: &ScenarioConfig,
    user: &Position3D,
    allocation: &PilotAllocation,
    mask: &IrsMask,
    seed: u64,
) -> Result<f64> {
    let scheme = PhaseScheme::Estimated(allocation.clone());
    Ok(run_trial_with(scenario, user, &scheme, mask, seed)?.rate)
}

/// Closed-form average gain and rate bound for one configuration.
pub fn closed_form_bound(
    scenario: &ScenarioConfig,
    user: &Position3D,
    scheme: &PhaseScheme,
    mask: &IrsMask,
) -> Result<(GainBreakdown, f64)> {
    let gain = Prepared::new(scenario, user, scheme, mask)?.expected_gain()?;
    let bound = ergodic_capacity_bound(gain.total, scenario.downlink_power, scenario.noise_user);
    Ok((gain, bound))
}

/// Ergodic rate over `n_trials` independent trials, with the closed-form
/// bound for the same configuration attached.
pub fn ergodic_rate(
    scenario: &ScenarioConfig,
    user: &Position3D,
    scheme: &PhaseScheme,
    mask: &IrsMask,
    n_trials: usize,
    master_seed: u64,
) -> Result<RateReport> {
    let prepared = Prepared::new(scenario, user, scheme, mask)?;
    let stats = aggregate_trials(n_trials, master_seed, |_, seed| prepared.run(seed))?;
    let expected = prepared.expected_gain()?;
    Ok(RateReport {
        user: *user,
        scheme: scheme.label(),
        mask: mask.clone(),
        n_trials,
        mean_rate: stats.mean_rate,
        std_error: stats.std_error,
        single_trial: n_trials == 1,
        mean_gain: stats.mean_gain,
        gain_std_error: stats.gain_std_error,
        expected_gain: expected,
        closed_form_bound: ergodic_capacity_bound(
            expected.total,
            scenario.downlink_power,
            scenario.noise_user,
        ),
    })
}

/// Every `(user, strategy, mask)` combination, in that nesting order.
pub fn irs_selection_sweep(
    scenario: &ScenarioConfig,
    users: &[Position3D],
    strategies: &[Strategy],
    masks: &[IrsMask],
    n_trials: usize,
    master_seed: u64,
) -> Result<Vec<RateReport>> {
    if users.is_empty() || strategies.is_empty() || masks.is_empty() {
        return Err(Error::InvalidConfig("selection sweep lists must be non-empty".into()));
    }
    let mut reports = Vec::with_capacity(users.len() * strategies.len() * masks.len());
    for user in users {
        for &strategy in strategies {
            for mask in masks {
                let allocation = allocate_for(scenario, user, mask, strategy)?;
                reports.push(ergodic_rate(
                    scenario,
                    user,
                    &PhaseScheme::Estimated(allocation),
                    mask,
                    n_trials,
                    master_seed,
                )?);
            }
        }
    }
    Ok(reports)
}
