//! Numerical solution of the per-IRS stationarity system.
//!
//! With equal powers inside each IRS, stationarity of `φ` under the budget
//! reads, for every `k`,
//!
//! ```text
//! σ_z²/p_k² · [ β_k² S g_k³ − β_k⁴ g_k⁴ ] = λ,   S = Σ_j M_j β_j² g_j.
//! ```
//!
//! Everything is normalized before solving: `s_k = p_k / p`,
//! `ρ_k = p β_k² / σ_z²`, `b_k = β_k / β_max` and
//! `c_k = (1 + 1/(ρ_k s_k))^{-1/2} = β_k g_k`. The condition becomes
//!
//! ```text
//! G_k = c_k³ (S̃ / b_k − c_k) / s_k² = λ̃,   S̃ = Σ_j M_j b_j c_j,
//! ```
//!
//! with `λ = σ_z²/p² · λ̃` and `Σ_k M_k s_k = Σ_k M_k`. At fixed `S̃` each
//! `G_k` is strictly decreasing in `s_k` on the region where it is positive.
//! The solver iterates `S̃` to a fixed point; every step bisects on `ln λ̃`
//! to meet the budget, with one safeguarded Newton solve per IRS in `ln s_k`.
//! Holding the budget inside the step keeps the iteration contractive even
//! when every link is in the low-SNR regime.

use crate::error::{Error, Result};
use crate::estimation::{PilotAllocation, Strategy};

use super::AllocationProblem;

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryPoint {
    /// Per-IRS powers `p_k` (W).
    pub powers: Vec<f64>,
    /// Multiplier `λ` of the stationarity condition.
    pub multiplier: f64,
    /// `max_k |G_k − λ̃| / λ̃` at the returned point.
    pub residual: f64,
    /// Fixed-point iterations used.
    pub iterations: usize,
}

struct Normalized {
    b: Vec<f64>,
    rho: Vec<f64>,
    m: Vec<f64>,
    total: f64,
}

impl Normalized {
    fn new(problem: &AllocationProblem) -> Self {
        let b_max = problem.beta().iter().copied().fold(0.0, f64::max);
        let b = problem.beta().iter().map(|b| b / b_max).collect();
        let rho = problem.estimation_snr();
        let m: Vec<f64> = problem.elements().iter().map(|&m| m as f64).collect();
        let total = m.iter().sum();
        Normalized { b, rho, m, total }
    }

    fn aggregate(&self, shares: &[f64]) -> f64 {
        (0..self.b.len())
            .map(|k| self.m[k] * self.b[k] * alignment(self.rho[k], shares[k]).0)
            .sum()
    }

    fn stationarity(&self, k: usize, aggregate: f64, share: f64) -> f64 {
        let (c, _) = alignment(self.rho[k], share);
        c.powi(3) * (aggregate / self.b[k] - c) / (share * share)
    }
}

/// `(c, 1 − c²)` for estimation SNR `ρ s`.
fn alignment(rho: f64, share: f64) -> (f64, f64) {
    let w = 1.0 / (rho * share);
    ((1.0 + w).powf(-0.5), w / (1.0 + w))
}

/// Solves `G(s) = λ̃` at fixed `S̃` for one IRS, in `t = ln s`.
fn solve_share(rho: f64, b: f64, aggregate: f64, ln_lambda: f64, guess: f64) -> f64 {
    let r = aggregate / b;
    let residual = |t: f64| -> (f64, f64) {
        let (c, omc2) = alignment(rho, t.exp());
        if c >= r {
            return (f64::NEG_INFINITY, f64::NEG_INFINITY);
        }
        let value = 3.0 * c.ln() - 2.0 * t + (r - c).ln() - ln_lambda;
        let slope = -2.0 + 1.5 * omc2 - 0.5 * c * omc2 / (r - c);
        (value, slope)
    };
    // G vanishes where c reaches S̃/b_k, which only happens when S̃ < b_k.
    let ceiling = if r < 1.0 {
        let w = 1.0 / (r * r) - 1.0;
        Some((1.0 / (rho * w)).ln())
    } else {
        None
    };
    let mut t = guess.ln();
    if let Some(top) = ceiling {
        t = t.min(top - 1e-3);
    }

    let mut lo = t;
    let mut step = 1.0;
    while residual(lo).0 <= 0.0 {
        lo -= step;
        step *= 2.0;
    }
    let mut hi = t.max(lo);
    let mut step = 1.0;
    loop {
        if residual(hi).0 < 0.0 {
            break;
        }
        hi += step;
        step *= 2.0;
        if let Some(top) = ceiling {
            if hi >= top {
                hi = top;
                break;
            }
        }
    }

    let mut x = if residual(t).0.is_finite() && t > lo && t < hi {
        t
    } else {
        0.5 * (lo + hi)
    };
    for _ in 0..200 {
        let (fx, dfx) = residual(x);
        if fx == 0.0 {
            return x.exp();
        }
        if fx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / dfx;
        let next = if fx.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 1e-15 * x.abs().max(1.0) || hi - lo <= 1e-15 * x.abs().max(1.0) {
            return next.exp();
        }
        x = next;
    }
    x.exp()
}

/// Shares meeting the budget for a fixed aggregate, by bisection on `ln λ̃`.
fn budget_step(norm: &Normalized, aggregate: f64, shares: &[f64]) -> (f64, Vec<f64>) {
    let solve = |ln_lambda: f64, from: &[f64]| -> Vec<f64> {
        (0..norm.b.len())
            .map(|k| solve_share(norm.rho[k], norm.b[k], aggregate, ln_lambda, from[k]))
            .collect()
    };
    let spent = |s: &[f64]| -> f64 { s.iter().zip(&norm.m).map(|(s, m)| s * m).sum() };

    let mean_ln = (0..norm.b.len())
        .map(|k| norm.stationarity(k, aggregate, shares[k]).max(f64::MIN_POSITIVE).ln())
        .sum::<f64>()
        / norm.b.len() as f64;

    // Spent budget falls as λ̃ grows.
    let mut lo = mean_ln;
    let mut hi = mean_ln;
    let mut s_lo = solve(lo, shares);
    let mut step = 0.5;
    while spent(&s_lo) < norm.total {
        lo -= step;
        step *= 2.0;
        s_lo = solve(lo, &s_lo);
    }
    let mut s_hi = solve(hi, &s_lo);
    let mut step = 0.5;
    while spent(&s_hi) > norm.total {
        hi += step;
        step *= 2.0;
        s_hi = solve(hi, &s_hi);
    }

    let mut current = s_hi;
    while hi - lo > 1e-14 * lo.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        current = solve(mid, &current);
        if spent(&current) > norm.total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let scale = norm.total / spent(&current);
    let shares = current.iter().map(|s| s * scale).collect();
    (0.5 * (lo + hi), shares)
}

fn relative_residual(norm: &Normalized, shares: &[f64]) -> (f64, f64) {
    let aggregate = norm.aggregate(shares);
    let g: Vec<f64> = (0..shares.len())
        .map(|k| norm.stationarity(k, aggregate, shares[k]))
        .collect();
    let lambda = g.iter().zip(&norm.m).map(|(g, m)| g * m).sum::<f64>() / norm.total;
    let worst = g
        .iter()
        .map(|g| ((g - lambda) / lambda).abs())
        .fold(0.0, f64::max);
    (lambda, worst)
}

/// Solves the stationarity system from the identical-allocation start.
pub fn solve_stationarity(
    problem: &AllocationProblem,
    tolerance: f64,
    max_iterations: usize,
) -> Result<StationaryPoint> {
    if !(tolerance > 0.0) {
        return Err(Error::InvalidConfig(format!("tolerance must be > 0, got {tolerance}")));
    }
    let p = problem.budget();
    let to_powers = |shares: &[f64]| shares.iter().map(|s| s * p).collect::<Vec<_>>();
    let physical = |lambda: f64| problem.sigma_z2() / (p * p) * lambda;
    if problem.len() == 1 {
        return Ok(StationaryPoint {
            powers: vec![p],
            multiplier: 0.0,
            residual: 0.0,
            iterations: 0,
        });
    }

    let norm = Normalized::new(problem);
    let mut shares = vec![1.0; problem.len()];
    let mut aggregate = norm.aggregate(&shares);
    let mut residual = f64::INFINITY;
    for iteration in 1..=max_iterations {
        let (_, next) = budget_step(&norm, aggregate, &shares);
        shares = next;
        aggregate = norm.aggregate(&shares);
        let (lambda, worst) = relative_residual(&norm, &shares);
        residual = worst;
        if residual <= tolerance {
            return Ok(StationaryPoint {
                powers: to_powers(&shares),
                multiplier: physical(lambda),
                residual,
                iterations: iteration,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iterations,
        residual,
    })
}

/// Per-IRS powers solving the full stationarity system.
pub fn allocate_exact(
    problem: &AllocationProblem,
    tolerance: f64,
    max_iterations: usize,
) -> Result<PilotAllocation> {
    let point = solve_stationarity(problem, tolerance, max_iterations)?;
    PilotAllocation::new(
        point.powers,
        problem.elements().to_vec(),
        problem.budget(),
        Strategy::ExactNumeric,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::{allocate_simplified, objective_phi_per_irs};

    fn problem(beta: &[f64], elements: &[usize], budget: f64, sigma: f64) -> AllocationProblem {
        AllocationProblem::new(beta.to_vec(), elements.to_vec(), budget, sigma).unwrap()
    }

    /// Physical stationarity terms evaluated without normalization.
    fn raw_terms(problem: &AllocationProblem, powers: &[f64]) -> Vec<f64> {
        let sigma = problem.sigma_z2();
        let beta2 = problem.beta2();
        let g: Vec<f64> = beta2
            .iter()
            .zip(powers)
            .map(|(b2, p)| 1.0 / (b2 + sigma / p).sqrt())
            .collect();
        let s: f64 = (0..powers.len())
            .map(|k| problem.elements()[k] as f64 * beta2[k] * g[k])
            .sum();
        (0..powers.len())
            .map(|k| {
                sigma / (powers[k] * powers[k])
                    * (beta2[k] * s * g[k].powi(3) - beta2[k] * beta2[k] * g[k].powi(4))
            })
            .collect()
    }

    #[test]
    fn symmetric_problem_gives_equal_powers() {
        let p = problem(&[2e-5, 2e-5, 2e-5], &[40, 40, 40], 1e-3, 1e-14);
        let point = solve_stationarity(&p, 1e-10, 100).unwrap();
        for x in &point.powers {
            assert!((x / 1e-3 - 1.0).abs() < 1e-9);
        }
        assert!(point.residual <= 1e-10);
    }

    #[test]
    fn returned_point_is_stationary_in_physical_units() {
        for (budget, m) in [(1e-4, [100, 100]), (1e-7, [100, 20]), (1e-9, [3, 5])] {
            let p = problem(&[4e-6, 1e-6], &m, budget, 1e-14);
            let point = solve_stationarity(&p, 1e-10, 200).unwrap();
            let terms = raw_terms(&p, &point.powers);
            for t in &terms {
                assert!(((t - point.multiplier) / point.multiplier).abs() < 1e-8, "{terms:?}");
            }
            let energy: f64 = point.powers.iter().zip(&m).map(|(x, &m)| x * m as f64).sum();
            let total = (m[0] + m[1]) as f64 * budget;
            assert!(((energy - total) / total).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_simplified_at_high_snr_and_large_arrays() {
        let p = problem(&[8e-6, 3e-6, 1e-6], &[1000, 1000, 1000], 1.0, 1e-14);
        assert!(p.estimation_snr().iter().all(|&s| s >= 100.0));
        let exact = allocate_exact(&p, 1e-10, 200).unwrap();
        let simple = allocate_simplified(&p).unwrap();
        for (a, b) in exact.powers().iter().zip(simple.powers()) {
            assert!((a / b - 1.0).abs() < 0.02, "{:?} vs {:?}", exact.powers(), simple.powers());
        }
    }

    #[test]
    fn exact_dominates_perturbations() {
        let m = [64.0, 16.0];
        for budget in [1e-4, 1e-6, 1e-8] {
            let p = problem(&[5e-6, 1e-6], &[64, 16], budget, 1e-14);
            let exact = allocate_exact(&p, 1e-12, 200).unwrap();
            let x = exact.powers();
            let best = objective_phi_per_irs(x, &p).unwrap();
            let movable = (m[0] * x[0]).min(m[1] * x[1]);
            for eps in [1e-2, 1e-3] {
                for sign in [-1.0, 1.0] {
                    let shift = sign * eps * movable;
                    let moved = [x[0] + shift / m[0], x[1] - shift / m[1]];
                    let phi = objective_phi_per_irs(&moved, &p).unwrap();
                    assert!(phi <= best * (1.0 + 1e-14), "budget {budget}");
                }
            }
        }
    }

    #[test]
    fn iteration_cap_is_reported() {
        let p = problem(&[5e-6, 1e-6], &[64, 16], 1e-8, 1e-14);
        let err = solve_stationarity(&p, 1e-300, 2).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { iterations: 2, .. }));
    }

    #[test]
    fn deep_low_snr_converges() {
        let p = problem(&[3e-6, 1e-6, 5e-7], &[100, 100, 100], 1e-12, 1e-14);
        let point = solve_stationarity(&p, 1e-10, 500).unwrap();
        assert!(point.residual <= 1e-10);
        assert!(point.powers.iter().all(|x| *x > 0.0));
    }
}
