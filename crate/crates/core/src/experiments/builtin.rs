//! Built-in experiment setups.
//!
//! All share the common link parameters of [`ScenarioConfig::with_default_link`]
//! and a BS at `(0, 0, 10)`.
//!
//! | name  | deployment | user path | compared |
//! |-------|------------|-----------|----------|
//! | fig4  | one IRS at (50, 0, 10) | (50, d, 0), d = 4..26 | M ∈ {100, 1000} × p ∈ {0, 30} dBm |
//! | fig6  | IRSs at (50, ∓10, 10), M = (100, 100) | (48, d, 0), d = -16..16 | all schemes at p ∈ {-13, -23} dBm |
//! | fig7  | as fig6 | as fig6 | pilot powers and PAPR at -13 dBm |
//! | fig8  | as fig6, M = (1000, 100) | as fig6 | as fig6 |
//! | fig9  | as fig8 | as fig6 | as fig7 |
//! | fig10 | as fig6 | as fig6 | masks 11, 10, 01 for M = (100, 100) and (1000, 100) |
//! | fig12 | K = 1..6 IRSs of 1000 elements in a 20 m disc around (50, 0, 0) | fixed | p ∈ {-23, -13} dBm |
//! | fig13 | as fig12 with 1440 elements split over K | fixed | as fig12 |
//!
//! The two-IRS setups measure distances in the ground plane; the single-IRS
//! and random-placement setups use 3-D distances.

use super::{Case, ExperimentSpec, Placement, Scheme, Sweep, SweepVariable};
use crate::channel::{DistanceMode, IrsSpec, Position3D, ScenarioConfig};
use crate::error::{Error, Result};
use crate::estimation::Strategy;
use crate::montecarlo::IrsMask;
use crate::units::dbm_to_watts;

pub const BUILTIN_EXPERIMENTS: [&str; 8] = [
    "fig4", "fig6", "fig7", "fig8", "fig9", "fig10", "fig12", "fig13",
];

const DEFAULT_TRIALS: usize = 1000;
const DEFAULT_SEED: u64 = 2021;

fn at(x: f64, y: f64, z: f64) -> Position3D {
    Position3D { x, y, z }
}

fn irs(x: f64, y: f64, elements: usize) -> IrsSpec {
    IrsSpec {
        position: at(x, y, 10.0),
        elements,
    }
}

fn power_case(dbm: f64) -> Case {
    Case {
        label: format!("p{dbm}dBm"),
        pilot_power: Some(dbm_to_watts(dbm)),
        ..Case::default()
    }
}

fn spec(name: &str, scenario: ScenarioConfig, user: Position3D, sweep: Sweep) -> ExperimentSpec {
    ExperimentSpec {
        name: name.into(),
        scenario,
        user,
        sweep,
        cases: vec![Case::default_case()],
        schemes: vec![Scheme::Allocation(Strategy::Simplified), Scheme::Allocation(Strategy::Identical)],
        masks: Vec::new(),
        n_trials: DEFAULT_TRIALS,
        master_seed: DEFAULT_SEED,
        output: Some(format!("{name}.csv").into()),
        placement: None,
    }
}

fn two_irs(name: &str, m1: usize) -> ExperimentSpec {
    let mut scenario = ScenarioConfig::with_default_link(
        vec![irs(50.0, -10.0, m1), irs(50.0, 10.0, 100)],
        dbm_to_watts(-13.0),
    );
    scenario.distance_mode = DistanceMode::Horizontal;
    let sweep = Sweep {
        variable: SweepVariable::UserY,
        start: -16.0,
        stop: 16.0,
        step: 2.0,
    };
    spec(name, scenario, at(48.0, 0.0, 0.0), sweep)
}

fn with_all_schemes(mut s: ExperimentSpec) -> ExperimentSpec {
    s.cases = vec![power_case(-13.0), power_case(-23.0)];
    s.schemes.extend([Scheme::PerfectCsi, Scheme::RandomPhase]);
    s
}

fn random_disc(name: &str) -> ExperimentSpec {
    let scenario = ScenarioConfig::with_default_link(
        (0..6).map(|_| irs(50.0, 0.0, 1000)).collect(),
        dbm_to_watts(-13.0),
    );
    let sweep = Sweep {
        variable: SweepVariable::IrsCount,
        start: 1.0,
        stop: 6.0,
        step: 1.0,
    };
    let mut s = spec(name, scenario, at(50.0, 0.0, 0.0), sweep);
    s.cases = vec![power_case(-23.0), power_case(-13.0)];
    s.placement = Some(Placement {
        center: at(50.0, 0.0, 0.0),
        radius: 20.0,
        height: 10.0,
        max_irs: 6,
    });
    s
}

/// The named setup with its default trials, seed and output file.
pub fn builtin_experiment(name: &str) -> Result<ExperimentSpec> {
    let spec = match name {
        "fig4" => {
            let scenario = ScenarioConfig::with_default_link(vec![irs(50.0, 0.0, 100)], dbm_to_watts(0.0));
            let sweep = Sweep {
                variable: SweepVariable::UserY,
                start: 4.0,
                stop: 26.0,
                step: 2.0,
            };
            let mut s = spec(name, scenario, at(50.0, 4.0, 0.0), sweep);
            s.schemes = vec![Scheme::Allocation(Strategy::Identical)];
            s.cases = [100, 1000]
                .iter()
                .flat_map(|&m| {
                    [0.0, 30.0].map(|dbm| Case {
                        label: format!("M{m}_p{dbm}dBm"),
                        elements: Some(vec![m]),
                        pilot_power: Some(dbm_to_watts(dbm)),
                        ..Case::default()
                    })
                })
                .collect();
            s
        }
        "fig6" => with_all_schemes(two_irs(name, 100)),
        "fig7" => two_irs(name, 100),
        "fig8" => with_all_schemes(two_irs(name, 1000)),
        "fig9" => two_irs(name, 1000),
        "fig10" => {
            let mut s = two_irs(name, 100);
            s.masks = ["11", "10", "01"].iter().map(|m| m.parse::<IrsMask>()).collect::<Result<_>>()?;
            s.cases = [(100, "M100-100"), (1000, "M1000-100")]
                .iter()
                .map(|&(m1, label)| Case {
                    label: label.into(),
                    elements: Some(vec![m1, 100]),
                    ..Case::default()
                })
                .collect();
            s
        }
        "fig12" => random_disc(name),
        "fig13" => {
            let mut s = random_disc(name);
            for case in &mut s.cases {
                case.total_elements = Some(1440);
            }
            s
        }
        other => return Err(Error::UnknownExperiment(other.into())),
    };
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_builtin_is_valid() {
        for name in BUILTIN_EXPERIMENTS {
            let s = builtin_experiment(name).unwrap();
            assert_eq!(s.name, name);
            assert_eq!(s.n_trials, 1000);
        }
        assert!(matches!(builtin_experiment("fig5"), Err(Error::UnknownExperiment(_))));
    }

    #[test]
    fn fig4_geometry() {
        let s = builtin_experiment("fig4").unwrap();
        assert_eq!(s.scenario.irs.len(), 1);
        assert_eq!(s.scenario.irs[0].position, at(50.0, 0.0, 10.0));
        assert_eq!(s.user, at(50.0, 4.0, 0.0));
        assert_eq!(s.sweep.values().len(), 12);
        assert_eq!(s.cases.len(), 4);
        assert_eq!(s.scenario.distance_mode, DistanceMode::Euclidean);
    }

    #[test]
    fn fig6_geometry() {
        let s = builtin_experiment("fig6").unwrap();
        let y: Vec<f64> = s.scenario.irs.iter().map(|i| i.position.y).collect();
        assert_eq!(y, vec![-10.0, 10.0]);
        assert!(s.scenario.irs.iter().all(|i| i.position.x == 50.0 && i.elements == 100));
        assert_eq!(s.user.x, 48.0);
        assert_eq!(s.sweep.values().first(), Some(&-16.0));
        assert_eq!(s.sweep.values().last(), Some(&16.0));
        assert_eq!(s.schemes.len(), 4);
    }

    #[test]
    fn fig13_splits_elements() {
        let s = builtin_experiment("fig13").unwrap();
        for k in 1..=6 {
            let (scenario, _) = s.configure(k as f64, &s.cases[0]).unwrap();
            assert_eq!(scenario.irs.len(), k);
            assert!(scenario.irs.iter().all(|i| i.elements == 1440 / k));
        }
    }

    #[test]
    fn fig9_is_asymmetric() {
        let s = builtin_experiment("fig9").unwrap();
        assert_eq!(s.scenario.elements(), vec![1000, 100]);
        assert_eq!(s.scenario.pilot_power, dbm_to_watts(-13.0));
    }
}
