//! Declarative sweeps and their CSV output.
//!
//! An [`ExperimentSpec`] names a scenario, a base user position, one swept
//! variable, a list of cases (element counts or pilot powers to compare), the
//! phase schemes and IRS masks to evaluate, and the Monte Carlo settings.
//! [`run_experiment`] evaluates every combination and returns rows ordered by
//! sweep index, then case, scheme and mask.
//!
//! The CSV header is
//!
//! ```text
//! sweep,strategy,mask,mean_rate,std_err,bound,papr_db,p_1,...,p_K
//! ```
//!
//! where `p_k` is the pilot power of IRS `k` in dBm (empty when the IRS is
//! switched off or the scheme uses no pilots) and `bound` is the closed-form
//! rate bound. With more than one case the strategy cell reads
//! `scheme/case-label`.
//!
//! With a [`Placement`], IRS positions are redrawn in every trial and the
//! bound, PAPR and power columns are trial averages.

mod builtin;
mod file;

pub use builtin::{builtin_experiment, BUILTIN_EXPERIMENTS};
pub use file::{ExperimentFile, ScenarioFile};

use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocation::papr;
use crate::channel::{Position3D, ScenarioConfig};
use crate::error::{Error, Result};
use crate::estimation::Strategy;
use crate::montecarlo::{
    allocate_for, closed_form_bound, ergodic_rate, masked_problem, mean_and_error,
    run_trial_with, IrsMask, PhaseScheme,
};
use crate::rng::{self, trial_seed, Domain};
use crate::units::{dbm_to_watts, watts_to_dbm};

/// Column names before the per-IRS power columns.
pub const CSV_FIXED_COLUMNS: [&str; 7] = [
    "sweep", "strategy", "mask", "mean_rate", "std_err", "bound", "papr_db",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepVariable {
    /// User x coordinate (m).
    UserX,
    /// User y coordinate (m).
    UserY,
    /// Elements on every IRS.
    Elements,
    /// Number of IRSs, taking the first `K` of the scenario or placement.
    IrsCount,
    /// Average pilot power (dBm).
    PilotPowerDbm,
}

/// Inclusive range `start, start + step, ..., ≤ stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Sweep {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidConfig(format!("sweep step must be > 0, got {}", self.step)));
        }
        if !(self.start.is_finite() && self.stop.is_finite() && self.start <= self.stop) {
            return Err(Error::InvalidConfig(format!(
                "empty sweep range {}..{}",
                self.start, self.stop
            )));
        }
        if matches!(self.variable, SweepVariable::Elements | SweepVariable::IrsCount) {
            for v in self.values() {
                if v < 1.0 || v.fract() != 0.0 {
                    return Err(Error::InvalidConfig(format!(
                        "sweep over counts needs positive integers, got {v}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| {
                let v = self.start + i as f64 * self.step;
                let r = (v * 1e9).round() / 1e9;
                if r == 0.0 {
                    0.0
                } else {
                    r
                }
            })
            .collect()
    }
}

/// One variant of the deployment compared within an experiment.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Case {
    pub label: String,
    /// Elements per IRS; a single entry applies to every IRS.
    pub elements: Option<Vec<usize>>,
    /// Total elements split evenly over the IRSs.
    pub total_elements: Option<usize>,
    /// Average pilot power (W).
    pub pilot_power: Option<f64>,
}

/// How phases are obtained for one curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Allocation(Strategy),
    PerfectCsi,
    RandomPhase,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Allocation(s) => write!(f, "{s}"),
            Scheme::PerfectCsi => f.write_str("perfect-csi"),
            Scheme::RandomPhase => f.write_str("random-phase"),
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "perfect-csi" => Ok(Scheme::PerfectCsi),
            "random-phase" => Ok(Scheme::RandomPhase),
            other => match other.parse::<Strategy>()? {
                Strategy::Custom => Err(Error::Parse {
                    what: "scheme".into(),
                    message: "custom allocations cannot be swept".into(),
                }),
                strategy => Ok(Scheme::Allocation(strategy)),
            },
        }
    }
}

/// Random IRS placement, uniform over a horizontal disc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    /// Disc center; only `x` and `y` are used.
    pub center: Position3D,
    pub radius: f64,
    /// IRS height (m).
    pub height: f64,
    /// Positions drawn per trial; IRS `k` always takes the `k`-th draw.
    pub max_irs: usize,
}

impl Placement {
    /// Positions for trial `trial`, drawn in polar form with `r = R √U`.
    pub fn draw(&self, master_seed: u64, trial: u64) -> Vec<Position3D> {
        let mut rng = rng::stream(master_seed, Domain::Placement, trial);
        (0..self.max_irs)
            .map(|_| {
                let r = self.radius * rng.random::<f64>().sqrt();
                let theta = 2.0 * std::f64::consts::PI * rng.random::<f64>();
                Position3D {
                    x: self.center.x + r * theta.cos(),
                    y: self.center.y + r * theta.sin(),
                    z: self.height,
                }
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        self.center.validate()?;
        if !(self.radius > 0.0 && self.radius.is_finite() && self.height >= 0.0 && self.max_irs > 0) {
            return Err(Error::InvalidConfig("placement needs radius > 0, height >= 0 and max_irs > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub scenario: ScenarioConfig,
    /// User position before the sweep is applied.
    pub user: Position3D,
    pub sweep: Sweep,
    /// At least one case; a case with no overrides uses the scenario as is.
    pub cases: Vec<Case>,
    pub schemes: Vec<Scheme>,
    /// Empty means every IRS on at every point.
    pub masks: Vec<IrsMask>,
    pub n_trials: usize,
    pub master_seed: u64,
    pub output: Option<PathBuf>,
    pub placement: Option<Placement>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.user.validate()?;
        self.sweep.validate()?;
        if self.schemes.is_empty() {
            return Err(Error::InvalidConfig("experiment needs at least one scheme".into()));
        }
        if self.cases.is_empty() {
            return Err(Error::InvalidConfig("experiment needs at least one case".into()));
        }
        if self.n_trials == 0 {
            return Err(Error::InvalidConfig("n_trials must be >= 1".into()));
        }
        for case in &self.cases {
            if case.label.contains([',', '"', '\n', '/']) {
                return Err(Error::InvalidConfig(format!(
                    "case label `{}` may not contain `,`, `\"`, `/` or newlines",
                    case.label
                )));
            }
        }
        if let Some(placement) = &self.placement {
            placement.validate()?;
        }
        if self.sweep.variable == SweepVariable::IrsCount {
            if !self.masks.is_empty() {
                return Err(Error::InvalidConfig("masks cannot be combined with an IRS-count sweep".into()));
            }
            let available = self.scenario.irs.len();
            let limit = self.placement.map_or(available, |p| p.max_irs.min(available));
            if let Some(v) = self.sweep.values().iter().find(|&&v| v as usize > limit) {
                return Err(Error::InvalidConfig(format!("IRS count {v} exceeds the {limit} available")));
            }
        } else {
            for mask in &self.masks {
                if mask.len() != self.scenario.irs.len() {
                    return Err(Error::InvalidConfig(format!(
                        "mask `{mask}` does not cover the {} IRSs",
                        self.scenario.irs.len()
                    )));
                }
            }
        }
        Ok(())
    }

    fn strategy_label(&self, scheme: Scheme, case: &Case) -> String {
        if self.cases.len() > 1 {
            format!("{scheme}/{}", case.label)
        } else {
            scheme.to_string()
        }
    }

    /// Scenario and user at one sweep value under one case.
    pub fn configure(&self, value: f64, case: &Case) -> Result<(ScenarioConfig, Position3D)> {
        let mut scenario = self.scenario.clone();
        let mut user = self.user;
        if self.sweep.variable == SweepVariable::IrsCount {
            scenario.irs.truncate(value as usize);
        }
        let k = scenario.irs.len();
        if let Some(elements) = &case.elements {
            match elements.len() {
                1 => scenario.irs.iter_mut().for_each(|s| s.elements = elements[0]),
                n if n == k => {
                    for (s, &m) in scenario.irs.iter_mut().zip(elements) {
                        s.elements = m;
                    }
                }
                n => {
                    return Err(Error::InvalidConfig(format!(
                        "case `{}` lists {n} element counts for {k} IRSs",
                        case.label
                    )))
                }
            }
        }
        if let Some(total) = case.total_elements {
            if total % k != 0 || total == 0 {
                return Err(Error::InvalidConfig(format!(
                    "case `{}`: {total} elements do not split evenly over {k} IRSs",
                    case.label
                )));
            }
            scenario.irs.iter_mut().for_each(|s| s.elements = total / k);
        }
        if let Some(p) = case.pilot_power {
            scenario.pilot_power = p;
        }
        match self.sweep.variable {
            SweepVariable::UserX => user.x = value,
            SweepVariable::UserY => user.y = value,
            SweepVariable::Elements => {
                scenario.irs.iter_mut().for_each(|s| s.elements = value as usize)
            }
            SweepVariable::IrsCount => {}
            SweepVariable::PilotPowerDbm => scenario.pilot_power = dbm_to_watts(value),
        }
        scenario.validate()?;
        Ok((scenario, user))
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep: f64,
    pub strategy: String,
    pub mask: String,
    pub mean_rate: f64,
    pub std_err: f64,
    pub bound: f64,
    pub papr_db: Option<f64>,
    /// Pilot power per scenario IRS (dBm), `None` when off or pilot-free.
    pub powers_dbm: Vec<Option<f64>>,
}

fn phase_scheme(
    scheme: Scheme,
    scenario: &ScenarioConfig,
    user: &Position3D,
    mask: &IrsMask,
) -> Result<(PhaseScheme, Option<f64>, Vec<Option<f64>>)> {
    match scheme {
        Scheme::Allocation(strategy) => {
            let problem = masked_problem(scenario, user, mask)?;
            let allocation = allocate_for(scenario, user, mask, strategy)?;
            let report = papr(&allocation, &problem);
            let mut powers = vec![None; scenario.irs.len()];
            for (&k, &p) in mask.active().iter().zip(allocation.powers()) {
                powers[k] = Some(watts_to_dbm(p));
            }
            Ok((PhaseScheme::Estimated(allocation), Some(report.papr_db), powers))
        }
        Scheme::PerfectCsi => Ok((PhaseScheme::PerfectCsi, None, vec![None; scenario.irs.len()])),
        Scheme::RandomPhase => Ok((PhaseScheme::RandomPhase, None, vec![None; scenario.irs.len()])),
    }
}

struct PlacedTrial {
    rate: f64,
    bound: f64,
    papr_db: Option<f64>,
    powers_w: Vec<Option<f64>>,
}

impl ExperimentSpec {
    fn evaluate_fixed(
        &self,
        value: f64,
        scenario: &ScenarioConfig,
        user: &Position3D,
        scheme: Scheme,
        mask: &IrsMask,
        label: String,
    ) -> Result<ResultRow> {
        let (phases, papr_db, powers_dbm) = phase_scheme(scheme, scenario, user, mask)?;
        let report = ergodic_rate(scenario, user, &phases, mask, self.n_trials, self.master_seed)?;
        Ok(ResultRow {
            sweep: value,
            strategy: label,
            mask: mask.to_string(),
            mean_rate: report.mean_rate,
            std_err: report.std_error,
            bound: report.closed_form_bound,
            papr_db,
            powers_dbm,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn evaluate_placed(
        &self,
        placement: &Placement,
        value: f64,
        scenario: &ScenarioConfig,
        user: &Position3D,
        scheme: Scheme,
        mask: &IrsMask,
        label: String,
    ) -> Result<ResultRow> {
        let trials = (0..self.n_trials as u64)
            .into_par_iter()
            .map(|t| {
                let mut placed = scenario.clone();
                for (irs, position) in placed.irs.iter_mut().zip(placement.draw(self.master_seed, t)) {
                    irs.position = position;
                }
                let (phases, papr_db, powers_dbm) = phase_scheme(scheme, &placed, user, mask)?;
                let outcome = run_trial_with(&placed, user, &phases, mask, trial_seed(self.master_seed, t))?;
                let (_, bound) = closed_form_bound(&placed, user, &phases, mask)?;
                Ok(PlacedTrial {
                    rate: outcome.rate,
                    bound,
                    papr_db,
                    powers_w: powers_dbm.into_iter().map(|p| p.map(dbm_to_watts)).collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let n = trials.len();
        let (mean_rate, std_err) = mean_and_error(trials.iter().map(|t| t.rate), n);
        let (bound, _) = mean_and_error(trials.iter().map(|t| t.bound), n);
        let papr_db = trials[0]
            .papr_db
            .map(|_| mean_and_error(trials.iter().map(|t| t.papr_db.unwrap_or(0.0)), n).0);
        let powers_dbm = (0..scenario.irs.len())
            .map(|k| {
                trials[0].powers_w[k].map(|_| {
                    watts_to_dbm(mean_and_error(trials.iter().map(|t| t.powers_w[k].unwrap_or(0.0)), n).0)
                })
            })
            .collect();
        Ok(ResultRow {
            sweep: value,
            strategy: label,
            mask: mask.to_string(),
            mean_rate,
            std_err,
            bound,
            papr_db,
            powers_dbm,
        })
    }

    fn evaluate_point(&self, value: f64, case: &Case) -> Result<Vec<ResultRow>> {
        let (scenario, user) = self.configure(value, case)?;
        let masks = if self.masks.is_empty() {
            vec![IrsMask::all_on(scenario.irs.len())]
        } else {
            self.masks.clone()
        };
        let mut rows = Vec::with_capacity(self.schemes.len() * masks.len());
        for &scheme in &self.schemes {
            for mask in &masks {
                let label = self.strategy_label(scheme, case);
                rows.push(match &self.placement {
                    Some(p) => self.evaluate_placed(p, value, &scenario, &user, scheme, mask, label)?,
                    None => self.evaluate_fixed(value, &scenario, &user, scheme, mask, label)?,
                });
            }
        }
        Ok(rows)
    }
}

/// Evaluates every combination of the spec; rows come back in sweep order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let points: Vec<(f64, &Case)> = spec
        .sweep
        .values()
        .into_iter()
        .flat_map(|v| spec.cases.iter().map(move |c| (v, c)))
        .collect();
    let rows = points
        .par_iter()
        .map(|&(value, case)| spec.evaluate_point(value, case))
        .collect::<Result<Vec<_>>>()?;
    Ok(rows.into_iter().flatten().collect())
}

fn cell(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes rows as CSV with `max K` power columns.
pub fn write_csv<W: Write>(rows: &[ResultRow], writer: W) -> Result<()> {
    let k = rows.iter().map(|r| r.powers_dbm.len()).max().unwrap_or(0);
    let mut csv = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = CSV_FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((1..=k).map(|i| format!("p_{i}")));
    csv.write_record(&header)?;
    for row in rows {
        let mut record = vec![
            row.sweep.to_string(),
            row.strategy.clone(),
            row.mask.clone(),
            row.mean_rate.to_string(),
            row.std_err.to_string(),
            row.bound.to_string(),
            cell(row.papr_db),
        ];
        record.extend((0..k).map(|i| cell(row.powers_dbm.get(i).copied().flatten())));
        csv.write_record(&record)?;
    }
    csv.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

/// Manifest path next to a CSV: `out.csv` becomes `out.manifest.toml`.
pub fn manifest_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("manifest.toml")
}

#[derive(Serialize)]
struct Manifest<'a> {
    generator: &'static str,
    version: &'static str,
    master_seed: u64,
    n_trials: usize,
    rows: usize,
    csv: String,
    spec: &'a ExperimentFile,
}

/// Runs the spec and writes the CSV plus its manifest to `path`.
pub fn run_to_file(spec: &ExperimentSpec, path: &Path) -> Result<Vec<ResultRow>> {
    let rows = run_experiment(spec)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(&rows, std::io::BufWriter::new(file))?;

    let echo = ExperimentFile::from_spec(spec);
    let manifest = Manifest {
        generator: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        master_seed: spec.master_seed,
        n_trials: spec.n_trials,
        rows: rows.len(),
        csv: path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        spec: &echo,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Parse {
        what: "manifest".into(),
        message: e.to_string(),
    })?;
    let target = manifest_path(path);
    std::fs::write(&target, text).map_err(|e| Error::io(&target, e))?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_values_are_inclusive_and_clean() {
        let s = Sweep {
            variable: SweepVariable::UserY,
            start: -16.0,
            stop: 16.0,
            step: 2.0,
        };
        let v = s.values();
        assert_eq!(v.len(), 17);
        assert_eq!(v[8], 0.0);
        assert_eq!(v[16], 16.0);
        let t = Sweep {
            variable: SweepVariable::PilotPowerDbm,
            start: 0.1,
            stop: 0.7,
            step: 0.1,
        };
        assert_eq!(t.values(), vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]);
    }

    #[test]
    fn invalid_sweeps_are_rejected() {
        let mut s = Sweep {
            variable: SweepVariable::UserY,
            start: 1.0,
            stop: 0.0,
            step: 1.0,
        };
        assert!(s.validate().is_err());
        s.stop = 2.0;
        s.step = 0.0;
        assert!(s.validate().is_err());
        let c = Sweep {
            variable: SweepVariable::IrsCount,
            start: 1.0,
            stop: 2.0,
            step: 0.5,
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in ["identical", "simplified", "refined", "exact-numeric", "perfect-csi", "random-phase"] {
            assert_eq!(s.parse::<Scheme>().unwrap().to_string(), s);
        }
        assert!("custom".parse::<Scheme>().is_err());
    }

    #[test]
    fn placement_is_uniform_on_the_disc() {
        let p = Placement {
            center: Position3D { x: 50.0, y: 0.0, z: 0.0 },
            radius: 20.0,
            height: 10.0,
            max_irs: 6,
        };
        let mut inner = 0usize;
        let n = 20_000u64;
        for t in 0..n {
            for q in p.draw(3, t) {
                let r = ((q.x - 50.0).powi(2) + q.y.powi(2)).sqrt();
                assert!(r <= 20.0 && q.z == 10.0);
                if r <= 10.0 {
                    inner += 1;
                }
            }
        }
        // A quarter of the area lies inside half the radius.
        let frac = inner as f64 / (6 * n) as f64;
        assert!((frac - 0.25).abs() < 3.0 * (0.25f64 * 0.75 / (6 * n) as f64).sqrt() + 1e-3);
        assert_eq!(p.draw(3, 7), p.draw(3, 7));
        assert_eq!(p.draw(3, 7)[..2], Placement { max_irs: 2, ..p }.draw(3, 7)[..]);
    }

    #[test]
    fn csv_header_is_exact() {
        let row = ResultRow {
            sweep: 4.0,
            strategy: "identical".into(),
            mask: "10".into(),
            mean_rate: 1.5,
            std_err: 0.25,
            bound: 2.0,
            papr_db: Some(0.0),
            powers_dbm: vec![Some(-13.0), None],
        };
        let mut out = Vec::new();
        write_csv(&[row], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "sweep,strategy,mask,mean_rate,std_err,bound,papr_db,p_1,p_2\n\
             4,identical,10,1.5,0.25,2,0,-13,\n"
        );
    }

    #[test]
    fn manifest_sits_next_to_the_csv() {
        assert_eq!(manifest_path(Path::new("out/fig4.csv")), PathBuf::from("out/fig4.manifest.toml"));
    }
}
