//! TOML forms of scenarios and experiments.
//!
//! Powers are written in dBm and the reference path loss in dB; everything
//! else is linear. Link parameters may be omitted and then take the common
//! defaults (`q = 40 dBm`, `σ_z² = -110 dBm`, `σ_n² = -90 dBm`,
//! `C0 = -20 dB`, exponents 2.2 and 2.8, `K_bi = "inf"`, `K_iu = 0`).
//!
//! ```toml
//! pilot_power_dbm = -13.0
//! distance_mode = "horizontal"
//!
//! [bs_position]
//! x = 0.0
//! y = 0.0
//! z = 10.0
//!
//! [[irs]]
//! elements = 100
//! position = { x = 50.0, y = -10.0, z = 10.0 }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Case, ExperimentSpec, Placement, Scheme, Sweep};
use crate::channel::{DistanceMode, IrsSpec, Position3D, RicianFactor, ScenarioConfig};
use crate::error::{Error, Result};
use crate::montecarlo::IrsMask;
use crate::units::{db_to_linear, dbm_to_watts, linear_to_db, tidy_log, watts_to_dbm};

fn parse_error(what: &str, message: impl ToString) -> Error {
    Error::Parse {
        what: what.into(),
        message: message.to_string(),
    }
}

/// A Rician factor written as a number or as `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FactorText {
    Number(f64),
    Word(String),
}

impl FactorText {
    fn to_factor(&self) -> Result<RicianFactor> {
        match self {
            FactorText::Number(k) => Ok(RicianFactor::Finite(*k)),
            FactorText::Word(w) if w == "inf" => Ok(RicianFactor::Infinite),
            FactorText::Word(w) => Err(parse_error("Rician factor", format!("expected a number or \"inf\", got `{w}`"))),
        }
    }

    fn from_factor(factor: RicianFactor) -> Self {
        match factor {
            RicianFactor::Finite(k) => FactorText::Number(k),
            RicianFactor::Infinite => FactorText::Word("inf".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IrsFile {
    pub elements: usize,
    pub position: Position3D,
}

fn d_bs() -> Position3D {
    Position3D { x: 0.0, y: 0.0, z: 10.0 }
}
fn d_q() -> f64 {
    40.0
}
fn d_noise_bs() -> f64 {
    -110.0
}
fn d_noise_user() -> f64 {
    -90.0
}
fn d_c0() -> f64 {
    -20.0
}
fn d_alpha_bi() -> f64 {
    2.2
}
fn d_alpha_iu() -> f64 {
    2.8
}
fn d_k_bi() -> FactorText {
    FactorText::Word("inf".into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub pilot_power_dbm: f64,
    #[serde(default = "d_q")]
    pub downlink_power_dbm: f64,
    #[serde(default = "d_noise_bs")]
    pub noise_bs_dbm: f64,
    #[serde(default = "d_noise_user")]
    pub noise_user_dbm: f64,
    #[serde(default = "d_c0")]
    pub ref_path_loss_db: f64,
    #[serde(default = "d_alpha_bi")]
    pub exponent_bs_irs: f64,
    #[serde(default = "d_alpha_iu")]
    pub exponent_irs_user: f64,
    #[serde(default = "d_k_bi")]
    pub rician_bs_irs: FactorText,
    #[serde(default)]
    pub rician_irs_user: f64,
    #[serde(default)]
    pub distance_mode: DistanceMode,
    #[serde(default = "d_bs")]
    pub bs_position: Position3D,
    pub irs: Vec<IrsFile>,
}

impl ScenarioFile {
    pub fn from_config(config: &ScenarioConfig) -> Self {
        let dbm = |w: f64| tidy_log(watts_to_dbm(w));
        ScenarioFile {
            pilot_power_dbm: dbm(config.pilot_power),
            downlink_power_dbm: dbm(config.downlink_power),
            noise_bs_dbm: dbm(config.noise_bs),
            noise_user_dbm: dbm(config.noise_user),
            ref_path_loss_db: tidy_log(linear_to_db(config.ref_path_loss)),
            exponent_bs_irs: config.exponent_bs_irs,
            exponent_irs_user: config.exponent_irs_user,
            rician_bs_irs: FactorText::from_factor(config.rician_bs_irs),
            rician_irs_user: config.rician_irs_user,
            distance_mode: config.distance_mode,
            bs_position: config.bs_position,
            irs: config
                .irs
                .iter()
                .map(|s| IrsFile {
                    elements: s.elements,
                    position: s.position,
                })
                .collect(),
        }
    }

    pub fn to_config(&self) -> Result<ScenarioConfig> {
        let irs = self
            .irs
            .iter()
            .map(|s| IrsSpec::new(s.position, s.elements))
            .collect::<Result<Vec<_>>>()?;
        let config = ScenarioConfig {
            bs_position: self.bs_position,
            irs,
            downlink_power: dbm_to_watts(self.downlink_power_dbm),
            pilot_power: dbm_to_watts(self.pilot_power_dbm),
            noise_bs: dbm_to_watts(self.noise_bs_dbm),
            noise_user: dbm_to_watts(self.noise_user_dbm),
            ref_path_loss: db_to_linear(self.ref_path_loss_db),
            exponent_bs_irs: self.exponent_bs_irs,
            exponent_irs_user: self.exponent_irs_user,
            rician_bs_irs: self.rician_bs_irs.to_factor()?,
            rician_irs_user: self.rician_irs_user,
            distance_mode: self.distance_mode,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<ScenarioConfig> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| parse_error("scenario", e))?;
        file.to_config()
    }

    pub fn load(path: &Path) -> Result<ScenarioConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ScenarioFile::parse(&text)
    }

    pub fn emit(config: &ScenarioConfig) -> Result<String> {
        toml::to_string(&ScenarioFile::from_config(config)).map_err(|e| parse_error("scenario", e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFile {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elements: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_elements: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pilot_power_dbm: Option<f64>,
}

fn d_trials() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub name: String,
    #[serde(default = "d_trials")]
    pub n_trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub schemes: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub masks: Vec<String>,
    pub user: Position3D,
    pub sweep: Sweep,
    pub scenario: ScenarioFile,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cases: Vec<CaseFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub placement: Option<Placement>,
}

impl ExperimentFile {
    pub fn from_spec(spec: &ExperimentSpec) -> Self {
        let single_default = spec.cases.len() == 1 && spec.cases[0] == Case::default_case();
        ExperimentFile {
            name: spec.name.clone(),
            n_trials: spec.n_trials,
            master_seed: spec.master_seed,
            output: spec.output.clone(),
            schemes: spec.schemes.iter().map(Scheme::to_string).collect(),
            masks: spec.masks.iter().map(IrsMask::to_string).collect(),
            user: spec.user,
            sweep: spec.sweep,
            scenario: ScenarioFile::from_config(&spec.scenario),
            cases: if single_default {
                Vec::new()
            } else {
                spec.cases
                    .iter()
                    .map(|c| CaseFile {
                        label: c.label.clone(),
                        elements: c.elements.clone(),
                        total_elements: c.total_elements,
                        pilot_power_dbm: c.pilot_power.map(|p| tidy_log(watts_to_dbm(p))),
                    })
                    .collect()
            },
            placement: spec.placement,
        }
    }

    pub fn to_spec(&self) -> Result<ExperimentSpec> {
        let schemes = self
            .schemes
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<Scheme>>>()?;
        let masks = self
            .masks
            .iter()
            .map(|m| m.parse())
            .collect::<Result<Vec<IrsMask>>>()?;
        let cases = if self.cases.is_empty() {
            vec![Case::default_case()]
        } else {
            self.cases
                .iter()
                .map(|c| Case {
                    label: c.label.clone(),
                    elements: c.elements.clone(),
                    total_elements: c.total_elements,
                    pilot_power: c.pilot_power_dbm.map(dbm_to_watts),
                })
                .collect()
        };
        let spec = ExperimentSpec {
            name: self.name.clone(),
            scenario: self.scenario.to_config()?,
            user: self.user,
            sweep: self.sweep,
            cases,
            schemes,
            masks,
            n_trials: self.n_trials,
            master_seed: self.master_seed,
            output: self.output.clone(),
            placement: self.placement,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn parse(text: &str) -> Result<ExperimentSpec> {
        let file: ExperimentFile = toml::from_str(text).map_err(|e| parse_error("experiment", e))?;
        file.to_spec()
    }

    pub fn load(path: &Path) -> Result<ExperimentSpec> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentFile::parse(&text)
    }

    pub fn emit(spec: &ExperimentSpec) -> Result<String> {
        toml::to_string(&ExperimentFile::from_spec(spec)).map_err(|e| parse_error("experiment", e))
    }
}

impl Case {
    /// The scenario as given, without overrides.
    pub fn default_case() -> Self {
        Case {
            label: "default".into(),
            ..Case::default()
        }
    }
}
