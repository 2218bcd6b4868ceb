//! Deployment geometry, path loss and cascaded channel generation.
//!
//! A scenario holds one single-antenna BS, `K` IRSs and (separately) one user.
//! The direct BS–user link is blocked, so the user only sees the `Σ M_k`
//! cascaded reflection coefficients `h = u · v*`.
//!
//! With a pure line-of-sight BS–IRS hop (`K_bi = ∞`) and Rayleigh IRS–user hop
//! (`K_iu = 0`) every coefficient of IRS `k` is `CN(0, β_k²)` where `β_k²` is
//! the product of the two path losses. [`sample_channels`] draws exactly that.
//! Other Rician factors go through [`sample_rician`], which builds `u` and `v`
//! explicitly; the deterministic line-of-sight components use zero phase.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3D {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let p = Position3D { x, y, z };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x.is_finite() && self.y.is_finite() && self.z.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "non-finite coordinate in {self:?}"
            )));
        }
        if self.z < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "negative height {} m",
                self.z
            )));
        }
        Ok(())
    }

    pub fn distance(&self, other: &Position3D, mode: DistanceMode) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        match mode {
            DistanceMode::Euclidean => {
                let dz = self.z - other.z;
                (dx * dx + dy * dy + dz * dz).sqrt()
            }
            DistanceMode::Horizontal => (dx * dx + dy * dy).sqrt(),
        }
    }
}

/// How link distances are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMode {
    /// Full 3-D distance including the height difference.
    #[default]
    Euclidean,
    /// Distance between the ground-plane projections (heights ignored).
    Horizontal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrsSpec {
    pub position: Position3D,
    pub elements: usize,
}

impl IrsSpec {
    pub fn new(position: Position3D, elements: usize) -> Result<Self> {
        if elements == 0 {
            return Err(Error::InvalidConfig("an IRS needs at least one element".into()));
        }
        position.validate()?;
        Ok(IrsSpec { position, elements })
    }
}

/// Rician K-factor of a hop. `Infinite` is a purely deterministic LoS hop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RicianFactor {
    Finite(f64),
    Infinite,
}

impl RicianFactor {
    fn validate(&self) -> Result<()> {
        match *self {
            RicianFactor::Finite(k) if !(k >= 0.0 && k.is_finite()) => Err(Error::InvalidConfig(
                format!("Rician factor must be >= 0, got {k}"),
            )),
            _ => Ok(()),
        }
    }

    /// `(los, scattered)` amplitude weights, `√(K/(K+1))` and `√(1/(K+1))`.
    fn weights(&self) -> (f64, f64) {
        match *self {
            RicianFactor::Infinite => (1.0, 0.0),
            RicianFactor::Finite(k) => ((k / (k + 1.0)).sqrt(), (1.0 / (k + 1.0)).sqrt()),
        }
    }
}

/// Everything needed to simulate one deployment, in linear units.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub bs_position: Position3D,
    pub irs: Vec<IrsSpec>,
    /// Downlink BS transmit power `q` (W).
    pub downlink_power: f64,
    /// Average uplink pilot power `p` (W).
    pub pilot_power: f64,
    /// Noise power at the BS during pilot reception (W).
    pub noise_bs: f64,
    /// Noise power at the user (W).
    pub noise_user: f64,
    /// Path loss `C0` at the 1 m reference distance (linear).
    pub ref_path_loss: f64,
    pub exponent_bs_irs: f64,
    pub exponent_irs_user: f64,
    pub rician_bs_irs: RicianFactor,
    pub rician_irs_user: f64,
    pub distance_mode: DistanceMode,
}

impl ScenarioConfig {
    /// The common simulation parameters: `σ_z² = -110 dBm`, `σ_n² = -90 dBm`,
    /// `q = 40 dBm`, `C0 = -20 dB`, `α_bi = 2.2`, `α_iu = 2.8`, BS at
    /// `(0, 0, 10)`, `K_bi = ∞` and `K_iu = 0`.
    pub fn with_default_link(irs: Vec<IrsSpec>, pilot_power: f64) -> Self {
        use crate::units::{db_to_linear, dbm_to_watts};
        ScenarioConfig {
            bs_position: Position3D {
                x: 0.0,
                y: 0.0,
                z: 10.0,
            },
            irs,
            downlink_power: dbm_to_watts(40.0),
            pilot_power,
            noise_bs: dbm_to_watts(-110.0),
            noise_user: dbm_to_watts(-90.0),
            ref_path_loss: db_to_linear(-20.0),
            exponent_bs_irs: 2.2,
            exponent_irs_user: 2.8,
            rician_bs_irs: RicianFactor::Infinite,
            rician_irs_user: 0.0,
            distance_mode: DistanceMode::Euclidean,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.bs_position.validate()?;
        if self.irs.is_empty() {
            return Err(Error::InvalidConfig("scenario needs at least one IRS".into()));
        }
        for irs in &self.irs {
            if irs.elements == 0 {
                return Err(Error::InvalidConfig("an IRS needs at least one element".into()));
            }
            irs.position.validate()?;
        }
        let powers = [
            ("downlink_power", self.downlink_power),
            ("pilot_power", self.pilot_power),
            ("noise_bs", self.noise_bs),
            ("noise_user", self.noise_user),
        ];
        for (name, value) in powers {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be > 0, got {value}")));
            }
        }
        for (name, value) in [
            ("exponent_bs_irs", self.exponent_bs_irs),
            ("exponent_irs_user", self.exponent_irs_user),
        ] {
            if !(value >= 2.0 && value.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be >= 2, got {value}")));
            }
        }
        if !(self.ref_path_loss > 0.0 && self.ref_path_loss <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "reference path loss must lie in (0, 1], got {}",
                self.ref_path_loss
            )));
        }
        self.rician_bs_irs.validate()?;
        RicianFactor::Finite(self.rician_irs_user).validate()?;
        Ok(())
    }

    pub fn elements(&self) -> Vec<usize> {
        self.irs.iter().map(|s| s.elements).collect()
    }

    pub fn total_elements(&self) -> usize {
        self.irs.iter().map(|s| s.elements).sum()
    }

    /// True when the cascade is exactly `CN(0, β_k²)` (LoS BS hop, Rayleigh user hop).
    pub fn is_rayleigh_cascade(&self) -> bool {
        self.rician_bs_irs == RicianFactor::Infinite && self.rician_irs_user == 0.0
    }

    fn leg_losses(&self, irs: &IrsSpec, user: &Position3D) -> Result<(f64, f64)> {
        let d_bi = self.bs_position.distance(&irs.position, self.distance_mode);
        let d_iu = irs.position.distance(user, self.distance_mode);
        Ok((
            path_loss(d_bi, self.exponent_bs_irs, self.ref_path_loss)?,
            path_loss(d_iu, self.exponent_irs_user, self.ref_path_loss)?,
        ))
    }
}

/// Per-IRS cascaded channel power `β_k²` (linear).
#[derive(Debug, Clone, PartialEq)]
pub struct LinkStatistics {
    beta2: Vec<f64>,
}

impl LinkStatistics {
    pub fn new(beta2: Vec<f64>) -> Result<Self> {
        if beta2.is_empty() {
            return Err(Error::InvalidConfig("link statistics need at least one IRS".into()));
        }
        if let Some(bad) = beta2.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
            return Err(Error::InvalidConfig(format!(
                "cascaded variance must be positive and finite, got {bad}"
            )));
        }
        Ok(LinkStatistics { beta2 })
    }

    pub fn beta2(&self) -> &[f64] {
        &self.beta2
    }

    /// Amplitudes `β_k = √β_k²`.
    pub fn beta(&self) -> Vec<f64> {
        self.beta2.iter().map(|b| b.sqrt()).collect()
    }

    pub fn len(&self) -> usize {
        self.beta2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta2.is_empty()
    }

    /// Statistics of the IRSs listed in `ids`, in that order.
    pub fn select(&self, ids: &[usize]) -> Result<Self> {
        let beta2 = ids
            .iter()
            .map(|&k| {
                self.beta2.get(k).copied().ok_or_else(|| {
                    Error::ShapeMismatch(format!("IRS index {k} out of range {}", self.len()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        LinkStatistics::new(beta2)
    }
}

/// One draw of every cascaded coefficient.
///
/// `irs_ids[i]` is the scenario index of the IRS whose coefficients sit in
/// `coefficients[i]`; random streams are keyed by that index so a subset of
/// IRSs draws exactly the values it would have drawn inside the full set.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub seed: u64,
    pub irs_ids: Vec<usize>,
    pub coefficients: Vec<Vec<Complex64>>,
}

impl ChannelRealization {
    pub fn num_irs(&self) -> usize {
        self.coefficients.len()
    }

    pub fn elements(&self) -> Vec<usize> {
        self.coefficients.iter().map(Vec::len).collect()
    }

    pub fn total_elements(&self) -> usize {
        self.coefficients.iter().map(Vec::len).sum()
    }

    /// Keeps only the IRSs at the given positions of this realization.
    pub fn select(&self, positions: &[usize]) -> Result<Self> {
        let mut irs_ids = Vec::with_capacity(positions.len());
        let mut coefficients = Vec::with_capacity(positions.len());
        for &i in positions {
            let coeffs = self.coefficients.get(i).ok_or_else(|| {
                Error::ShapeMismatch(format!("IRS position {i} out of range {}", self.num_irs()))
            })?;
            irs_ids.push(self.irs_ids[i]);
            coefficients.push(coeffs.clone());
        }
        Ok(ChannelRealization {
            seed: self.seed,
            irs_ids,
            coefficients,
        })
    }
}

/// Log-distance path loss `c0 · d^-α`, valid from the 1 m reference distance.
pub fn path_loss(distance: f64, exponent: f64, c0: f64) -> Result<f64> {
    if !(distance >= 1.0) {
        return Err(Error::BelowReferenceDistance { distance });
    }
    if !(exponent > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "path-loss exponent must be > 0, got {exponent}"
        )));
    }
    Ok(c0 * distance.powf(-exponent))
}

/// Cascaded variances `β_k² = PL(BS, IRS_k) · PL(IRS_k, user)` for every IRS.
pub fn link_statistics(scenario: &ScenarioConfig, user: &Position3D) -> Result<LinkStatistics> {
    user.validate()?;
    let beta2 = scenario
        .irs
        .iter()
        .map(|irs| scenario.leg_losses(irs, user).map(|(bi, iu)| bi * iu))
        .collect::<Result<Vec<_>>>()?;
    LinkStatistics::new(beta2)
}

/// Draws a `CN(0, variance)` sample.
pub(crate) fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// `M` coefficients of IRS `irs_id`, i.i.d. `CN(0, beta2)`.
pub fn sample_irs(beta2: f64, elements: usize, seed: u64, irs_id: usize) -> Vec<Complex64> {
    let mut rng = rng::stream(seed, Domain::Channel, irs_id as u64);
    (0..elements)
        .map(|_| complex_gaussian(&mut rng, beta2))
        .collect()
}

/// Draws `h_{k,m} ~ CN(0, β_k²)` for every element of every IRS.
pub fn sample_channels(
    stats: &LinkStatistics,
    irs_list: &[IrsSpec],
    seed: u64,
) -> Result<ChannelRealization> {
    if stats.len() != irs_list.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} link statistics for {} IRSs",
            stats.len(),
            irs_list.len()
        )));
    }
    let coefficients = stats
        .beta2()
        .iter()
        .zip(irs_list)
        .enumerate()
        .map(|(k, (&b2, irs))| sample_irs(b2, irs.elements, seed, k))
        .collect();
    Ok(ChannelRealization {
        seed,
        irs_ids: (0..irs_list.len()).collect(),
        coefficients,
    })
}

/// Draws cascaded coefficients for the IRSs in `irs_ids` from explicit
/// Rician BS–IRS and IRS–user hops.
pub fn sample_rician(
    scenario: &ScenarioConfig,
    user: &Position3D,
    irs_ids: &[usize],
    seed: u64,
) -> Result<ChannelRealization> {
    let (los_bi, nlos_bi) = scenario.rician_bs_irs.weights();
    let (los_iu, nlos_iu) = RicianFactor::Finite(scenario.rician_irs_user).weights();
    let mut coefficients = Vec::with_capacity(irs_ids.len());
    for &k in irs_ids {
        let irs = scenario.irs.get(k).ok_or_else(|| {
            Error::ShapeMismatch(format!("IRS index {k} out of range {}", scenario.irs.len()))
        })?;
        let (pl_bi, pl_iu) = scenario.leg_losses(irs, user)?;
        let mut rng = rng::stream(seed, Domain::Channel, k as u64);
        let coeffs = (0..irs.elements)
            .map(|_| {
                let u = pl_bi.sqrt()
                    * (Complex64::new(los_bi, 0.0) + nlos_bi * complex_gaussian(&mut rng, 1.0));
                let v = pl_iu.sqrt()
                    * (Complex64::new(los_iu, 0.0) + nlos_iu * complex_gaussian(&mut rng, 1.0));
                u * v.conj()
            })
            .collect();
        coefficients.push(coeffs);
    }
    Ok(ChannelRealization {
        seed,
        irs_ids: irs_ids.to_vec(),
        coefficients,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn pos(x: f64, y: f64, z: f64) -> Position3D {
        Position3D::new(x, y, z).unwrap()
    }

    fn fig3_scenario(elements: usize) -> ScenarioConfig {
        ScenarioConfig::with_default_link(
            vec![IrsSpec::new(pos(50.0, 0.0, 10.0), elements).unwrap()],
            1e-3,
        )
    }

    #[test]
    fn path_loss_reference_and_values() {
        assert_eq!(path_loss(1.0, 2.8, 0.01).unwrap(), 0.01);
        let v = path_loss(10.0, 2.2, 0.01).unwrap();
        assert!((v - 6.309_573_444_801_93e-5).abs() / v < 1e-12);
        let near = path_loss(7.0, 2.2, 0.01).unwrap();
        let far = path_loss(14.0, 2.2, 0.01).unwrap();
        assert!((near / far - 2f64.powf(2.2)).abs() < 1e-12);
    }

    #[test]
    fn path_loss_rejects_short_distances() {
        assert!(matches!(
            path_loss(0.5, 2.0, 0.01),
            Err(Error::BelowReferenceDistance { .. })
        ));
        assert!(path_loss(0.0, 2.0, 0.01).is_err());
    }

    #[test]
    fn fig3_statistics_by_hand() {
        let s = fig3_scenario(100);
        let stats = link_statistics(&s, &pos(50.0, 4.0, 0.0)).unwrap();
        let expected = 0.01 * 50f64.powf(-2.2) * 0.01 * 116f64.sqrt().powf(-2.8);
        assert!((stats.beta2()[0] - expected).abs() / expected < 1e-12);
    }

    #[test]
    fn mirror_symmetric_irs_have_equal_statistics() {
        let mut s = fig3_scenario(10);
        s.irs = vec![
            IrsSpec::new(pos(50.0, -10.0, 10.0), 10).unwrap(),
            IrsSpec::new(pos(50.0, 10.0, 10.0), 10).unwrap(),
        ];
        let stats = link_statistics(&s, &pos(48.0, 0.0, 0.0)).unwrap();
        assert_eq!(stats.beta2()[0], stats.beta2()[1]);
    }

    #[test]
    fn moving_away_decreases_gain() {
        let s = fig3_scenario(10);
        let mut last = f64::INFINITY;
        for d in [4.0, 8.0, 16.0, 26.0] {
            let b = link_statistics(&s, &pos(50.0, d, 0.0)).unwrap().beta2()[0];
            assert!(b < last);
            last = b;
        }
    }

    #[test]
    fn doubling_irs_user_distance_scales_by_power_law() {
        // Same height as the IRS so the IRS-user distance is exactly d.
        let s = fig3_scenario(10);
        let a = link_statistics(&s, &pos(50.0, 5.0, 10.0)).unwrap().beta2()[0];
        let b = link_statistics(&s, &pos(50.0, 10.0, 10.0)).unwrap().beta2()[0];
        assert!((b / a - 2f64.powf(-2.8)).abs() / 2f64.powf(-2.8) < 1e-12);
    }

    #[test]
    fn co_located_user_is_rejected() {
        let s = fig3_scenario(10);
        assert!(link_statistics(&s, &pos(50.0, 0.0, 10.0)).is_err());
    }

    #[test]
    fn horizontal_mode_ignores_height() {
        let a = pos(0.0, 0.0, 10.0);
        let b = pos(3.0, 4.0, 0.0);
        assert_eq!(a.distance(&b, DistanceMode::Horizontal), 5.0);
        assert!((a.distance(&b, DistanceMode::Euclidean) - 125f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn invalid_scenarios_are_rejected() {
        let mut s = fig3_scenario(10);
        assert!(s.validate().is_ok());
        s.exponent_irs_user = 1.5;
        assert!(s.validate().is_err());
        let mut s = fig3_scenario(10);
        s.pilot_power = 0.0;
        assert!(s.validate().is_err());
        let mut s = fig3_scenario(10);
        s.irs.clear();
        assert!(s.validate().is_err());
        assert!(Position3D::new(0.0, 0.0, -1.0).is_err());
        assert!(IrsSpec::new(pos(0.0, 0.0, 0.0), 0).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let stats = LinkStatistics::new(vec![2.0, 0.5]).unwrap();
        let irs = vec![
            IrsSpec::new(pos(0.0, 0.0, 0.0), 8).unwrap(),
            IrsSpec::new(pos(1.0, 0.0, 0.0), 3).unwrap(),
        ];
        let a = sample_channels(&stats, &irs, 11).unwrap();
        let b = sample_channels(&stats, &irs, 11).unwrap();
        let c = sample_channels(&stats, &irs, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.elements(), vec![8, 3]);
    }

    #[test]
    fn sample_power_matches_variance() {
        let n = 1_000_000;
        let stats = LinkStatistics::new(vec![3.5]).unwrap();
        let irs = vec![IrsSpec::new(pos(0.0, 0.0, 0.0), n).unwrap()];
        let r = sample_channels(&stats, &irs, 5).unwrap();
        let powers: Vec<f64> = r.coefficients[0].iter().map(|h| h.norm_sqr()).collect();
        let mean = powers.iter().sum::<f64>() / n as f64;
        let var = powers.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - 3.5).abs() / 3.5 < 0.01);
        assert!((mean - 3.5).abs() < 3.0 * se);
    }

    #[test]
    fn phases_are_uniform() {
        let n = 100_000;
        let stats = LinkStatistics::new(vec![1.0]).unwrap();
        let irs = vec![IrsSpec::new(pos(0.0, 0.0, 0.0), n).unwrap()];
        let r = sample_channels(&stats, &irs, 99).unwrap();
        let mut u: Vec<f64> = r.coefficients[0]
            .iter()
            .map(|h| h.arg().rem_euclid(2.0 * PI) / (2.0 * PI))
            .collect();
        u.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let ks = u
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let lo = i as f64 / n as f64;
                let hi = (i + 1) as f64 / n as f64;
                (x - lo).abs().max((hi - x).abs())
            })
            .fold(0.0, f64::max);
        // Asymptotic 5% critical value of the one-sample KS statistic.
        assert!(ks < 1.358 / (n as f64).sqrt(), "KS statistic {ks}");
    }

    #[test]
    fn distinct_coefficients_are_uncorrelated() {
        let n = 100_000;
        let stats = LinkStatistics::new(vec![1.0, 1.0]).unwrap();
        let irs = vec![
            IrsSpec::new(pos(0.0, 0.0, 0.0), 2).unwrap(),
            IrsSpec::new(pos(1.0, 0.0, 0.0), 1).unwrap(),
        ];
        let mut within = Complex64::new(0.0, 0.0);
        let mut across = Complex64::new(0.0, 0.0);
        for seed in 0..n as u64 {
            let r = sample_channels(&stats, &irs, seed).unwrap();
            within += r.coefficients[0][0] * r.coefficients[0][1].conj();
            across += r.coefficients[0][0] * r.coefficients[1][0].conj();
        }
        let bound = 3.0 / (n as f64).sqrt();
        assert!(within.norm() / (n as f64) < bound);
        assert!(across.norm() / (n as f64) < bound);
    }

    #[test]
    fn rician_sampler_reduces_to_cascade_variance() {
        let s = fig3_scenario(200_000);
        let user = pos(50.0, 6.0, 0.0);
        let stats = link_statistics(&s, &user).unwrap();
        let r = sample_rician(&s, &user, &[0], 3).unwrap();
        let mean = r.coefficients[0].iter().map(|h| h.norm_sqr()).sum::<f64>()
            / r.coefficients[0].len() as f64;
        assert!((mean / stats.beta2()[0] - 1.0).abs() < 0.02);
    }

    #[test]
    fn realization_select_keeps_ids() {
        let stats = LinkStatistics::new(vec![1.0, 2.0, 3.0]).unwrap();
        let irs: Vec<_> = (0..3)
            .map(|i| IrsSpec::new(pos(i as f64, 0.0, 0.0), 2).unwrap())
            .collect();
        let r = sample_channels(&stats, &irs, 1).unwrap();
        let sub = r.select(&[2, 0]).unwrap();
        assert_eq!(sub.irs_ids, vec![2, 0]);
        assert_eq!(sub.coefficients[0], r.coefficients[2]);
        // Drawing only IRS 2 reproduces the same coefficients.
        assert_eq!(sample_irs(3.0, 2, 1, 2), r.coefficients[2]);
    }
}
