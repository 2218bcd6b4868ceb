//! Exhaustive search over the pilot budget simplex.
//!
//! Energy fractions `x_i ≥ 0, Σ x_i = 1` are enumerated on a grid of step
//! `grid_resolution`, the best grid point is refined by a pairwise-transfer
//! pattern search, and the result is converted to per-element powers.

use rayon::prelude::*;

use crate::error::{Error, Result};

use super::{objective_phi, objective_phi_per_irs, AllocationProblem};

/// Largest `Σ M_k` searched element by element.
pub const MAX_PER_ELEMENT_COORDINATES: usize = 6;
/// Largest grid the oracle will enumerate.
pub const MAX_GRID_POINTS: u128 = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    /// One coordinate per element; requires `Σ M_k ≤ 6`.
    PerElement,
    /// One coordinate per IRS, elements of an IRS share its power.
    PerIrs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Powers `p_{k,m}` (W) after refinement.
    pub per_element: Vec<Vec<f64>>,
    /// `φ` after refinement.
    pub objective: f64,
    /// `φ` at the best grid point, before refinement.
    pub grid_objective: f64,
}

impl OracleResult {
    /// Mean power of each IRS.
    pub fn per_irs(&self) -> Vec<f64> {
        self.per_element
            .iter()
            .map(|p| p.iter().sum::<f64>() / p.len() as f64)
            .collect()
    }
}

struct Search<'a> {
    problem: &'a AllocationProblem,
    mode: OracleMode,
    /// Elements behind each coordinate.
    weights: Vec<f64>,
    energy: f64,
}

impl Search<'_> {
    fn powers(&self, fractions: &[f64]) -> Vec<f64> {
        fractions
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| x * self.energy / w)
            .collect()
    }

    fn per_element(&self, fractions: &[f64]) -> Vec<Vec<f64>> {
        let powers = self.powers(fractions);
        match self.mode {
            OracleMode::PerIrs => powers
                .iter()
                .zip(self.problem.elements())
                .map(|(&p, &m)| vec![p; m])
                .collect(),
            OracleMode::PerElement => {
                let mut rest = powers.as_slice();
                self.problem
                    .elements()
                    .iter()
                    .map(|&m| {
                        let (head, tail) = rest.split_at(m);
                        rest = tail;
                        head.to_vec()
                    })
                    .collect()
            }
        }
    }

    fn objective(&self, fractions: &[f64]) -> f64 {
        let value = match self.mode {
            OracleMode::PerIrs => objective_phi_per_irs(&self.powers(fractions), self.problem),
            OracleMode::PerElement => objective_phi(&self.per_element(fractions), self.problem),
        };
        value.expect("oracle points are valid by construction")
    }

    /// Best composition of `units` over `parts` coordinates, with `head`
    /// prepended; ties keep the lexicographically smallest point.
    fn best_with_prefix(&self, head: usize, units: usize, parts: usize, step: f64) -> (f64, Vec<usize>) {
        let mut point = vec![0usize; parts + 1];
        point[0] = head;
        let mut best = (f64::NEG_INFINITY, Vec::new());
        let mut fractions = vec![0.0; parts + 1];
        self.walk(&mut point, 1, units, step, &mut fractions, &mut best);
        best
    }

    fn walk(
        &self,
        point: &mut Vec<usize>,
        index: usize,
        remaining: usize,
        step: f64,
        fractions: &mut Vec<f64>,
        best: &mut (f64, Vec<usize>),
    ) {
        if index + 1 == point.len() {
            point[index] = remaining;
            for (f, &u) in fractions.iter_mut().zip(point.iter()) {
                *f = u as f64 * step;
            }
            let value = self.objective(fractions);
            if value > best.0 {
                *best = (value, point.clone());
            }
            return;
        }
        for units in 0..=remaining {
            point[index] = units;
            self.walk(point, index + 1, remaining - units, step, fractions, best);
        }
    }

    /// Pairwise energy transfers with step halving.
    fn refine(&self, mut x: Vec<f64>, start: f64) -> (f64, Vec<f64>) {
        let mut value = self.objective(&x);
        let mut h = start;
        let floor = start * 1e-7;
        let mut budget = 1_000_000usize;
        while h >= floor && budget > 0 {
            let mut improved = true;
            while improved && budget > 0 {
                improved = false;
                for i in 0..x.len() {
                    for j in 0..x.len() {
                        if i == j || x[j] < h {
                            continue;
                        }
                        budget = budget.saturating_sub(1);
                        let mut trial = x.clone();
                        trial[i] += h;
                        trial[j] -= h;
                        let v = self.objective(&trial);
                        if v > value {
                            value = v;
                            x = trial;
                            improved = true;
                        }
                    }
                }
            }
            h *= 0.5;
        }
        (value, x)
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Maximizes `φ` over the budget simplex by enumeration plus local refinement.
pub fn brute_force_oracle(
    problem: &AllocationProblem,
    grid_resolution: f64,
    mode: OracleMode,
) -> Result<OracleResult> {
    if !(grid_resolution > 0.0 && grid_resolution <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "grid resolution must lie in (0, 1], got {grid_resolution}"
        )));
    }
    let weights: Vec<f64> = match mode {
        OracleMode::PerIrs => problem.elements().iter().map(|&m| m as f64).collect(),
        OracleMode::PerElement => {
            if problem.total_elements() > MAX_PER_ELEMENT_COORDINATES {
                return Err(Error::Intractable(format!(
                    "per-element search over {} elements exceeds {MAX_PER_ELEMENT_COORDINATES}; use per-IRS mode",
                    problem.total_elements()
                )));
            }
            vec![1.0; problem.total_elements()]
        }
    };
    let units = (1.0 / grid_resolution).round() as usize;
    let dims = weights.len();
    let points = binomial((units + dims - 1) as u128, (dims - 1) as u128);
    if points > MAX_GRID_POINTS {
        return Err(Error::Intractable(format!(
            "{points} grid points at resolution {grid_resolution}; coarsen the grid or use per-IRS mode"
        )));
    }
    let search = Search {
        problem,
        mode,
        weights,
        energy: problem.total_elements() as f64 * problem.budget(),
    };
    let step = 1.0 / units as f64;

    let (grid_objective, grid_point) = if dims == 1 {
        (search.objective(&[1.0]), vec![units])
    } else {
        let candidates: Vec<(f64, Vec<usize>)> = (0..=units)
            .into_par_iter()
            .map(|head| search.best_with_prefix(head, units - head, dims - 1, step))
            .collect();
        // Candidates arrive in lexicographic order; strict comparison keeps the first.
        candidates
            .into_iter()
            .fold((f64::NEG_INFINITY, Vec::new()), |best, c| if c.0 > best.0 { c } else { best })
    };

    let start: Vec<f64> = grid_point.iter().map(|&u| u as f64 * step).collect();
    let (objective, refined) = search.refine(start, 0.5 * step);
    Ok(OracleResult {
        per_element: search.per_element(&refined),
        objective,
        grid_objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(beta: &[f64], elements: &[usize], budget: f64, sigma: f64) -> AllocationProblem {
        AllocationProblem::new(beta.to_vec(), elements.to_vec(), budget, sigma).unwrap()
    }

    #[test]
    fn equal_links_share_equally() {
        let p = problem(&[1e-5, 1e-5], &[1, 1], 1.0, 1e-14);
        let r = brute_force_oracle(&p, 0.01, OracleMode::PerElement).unwrap();
        for x in r.per_irs() {
            assert!((x - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn within_irs_powers_are_equal() {
        let p = problem(&[1e-5], &[3], 1e-3, 1e-14);
        let r = brute_force_oracle(&p, 0.01, OracleMode::PerElement).unwrap();
        for x in &r.per_element[0] {
            assert!((x / 1e-3 - 1.0).abs() < 0.03, "{:?}", r.per_element);
        }
    }

    #[test]
    fn ratio_tends_to_two_for_sixteenfold_gain_on_large_arrays() {
        let p = problem(&[4e-5, 1e-5], &[1000, 1000], 1e3, 1e-14);
        let mut errors = Vec::new();
        for res in [0.05, 0.01, 0.002] {
            let x = brute_force_oracle(&p, res, OracleMode::PerIrs).unwrap().per_irs();
            errors.push((x[1] / x[0] - 2.0).abs());
        }
        assert!(errors[2] < 0.01, "{errors:?}");
    }

    #[test]
    fn single_element_pair_follows_amplitude_ratio() {
        // φ = 2 β_1² β_2² g_1 g_2; maximizing g_1 g_2 at high SNR gives
        // p_1 β_1 = p_2 β_2.
        let p = problem(&[4e-5, 1e-5], &[1, 1], 1e3, 1e-14);
        let x = brute_force_oracle(&p, 0.002, OracleMode::PerElement).unwrap().per_irs();
        assert!((x[1] / x[0] - 4.0).abs() < 0.01, "{x:?}");
    }

    #[test]
    fn grid_tie_break_is_deterministic() {
        let p = problem(&[2e-5, 2e-5, 1e-5], &[2, 2, 1], 1e-2, 1e-14);
        let a = brute_force_oracle(&p, 0.05, OracleMode::PerElement).unwrap();
        let b = brute_force_oracle(&p, 0.05, OracleMode::PerElement).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn refinement_never_loses() {
        let p = problem(&[3e-5, 1e-5, 4e-6], &[10, 20, 30], 1e-4, 1e-14);
        let r = brute_force_oracle(&p, 0.05, OracleMode::PerIrs).unwrap();
        assert!(r.objective >= r.grid_objective);
        let energy: f64 = r.per_element.iter().flatten().sum();
        assert!((energy / (60.0 * 1e-4) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn large_per_element_search_is_refused() {
        let p = problem(&[1e-5, 1e-5], &[4, 3], 1.0, 1e-14);
        assert!(matches!(
            brute_force_oracle(&p, 0.1, OracleMode::PerElement),
            Err(Error::Intractable(_))
        ));
        assert!(brute_force_oracle(&p, 0.0, OracleMode::PerIrs).is_err());
        let q = problem(&[1e-5; 6], &[1; 6], 1.0, 1e-14);
        assert!(matches!(
            brute_force_oracle(&q, 1e-4, OracleMode::PerIrs),
            Err(Error::Intractable(_))
        ));
    }
}
