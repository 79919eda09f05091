//! Model cell probabilities, divergence objectives, initialization, and
//! the divergence-minimizing fit.
//!
//! The estimator family is indexed by a tuning parameter beta >= 0. At
//! beta = 0 the objective is the Kullback-Leibler divergence between the
//! empirical and model category probabilities, whose unit-share-weighted
//! minimizer coincides with the maximum composite likelihood estimate; at
//! beta > 0 it is the density-power divergence, trading a little efficiency
//! for robustness to contaminated cells.

use crate::copulas::{self, CopulaFamily};
use crate::data_model::{
    empirical_cell_probs, empirical_margins, validate_dataset, EmpiricalMargins, OneShotDataset,
};
use crate::error::{Error, Result};
use crate::optim::{nelder_mead, NmOptions};

/// Intercept and stress slope of the dependence-parameter link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaVector {
    pub a0: f64,
    pub a1: f64,
}

impl ThetaVector {
    pub fn new(a0: f64, a1: f64) -> Self {
        ThetaVector { a0, a1 }
    }
}

/// Model probabilities of the four failure categories in one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellProbabilities {
    pub pi0: f64,
    pub pi1: f64,
    pub pi2: f64,
    pub pi12: f64,
}

impl CellProbabilities {
    pub fn as_array(&self) -> [f64; 4] {
        [self.pi0, self.pi1, self.pi2, self.pi12]
    }
}

/// How the per-cell divergences are combined into one objective.
///
/// `UnitShare` weights each cell by its share of devices, `K_ij / K`; with
/// beta = 0 the minimizer is then exactly the composite-likelihood maximum.
/// `Uniform` adds the cell divergences without weights, treating every test
/// condition symmetrically. The two coincide (up to scale) on balanced
/// designs where every cell tests the same number of devices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellWeighting {
    UnitShare,
    Uniform,
}

impl CellWeighting {
    pub fn name(self) -> &'static str {
        match self {
            CellWeighting::UnitShare => "unit-share",
            CellWeighting::Uniform => "uniform",
        }
    }
}

/// Fit configuration. `weighting: None` resolves to `UnitShare` at
/// beta = 0 and `Uniform` at beta > 0, the defaults under which the
/// estimator family reproduces its reference behavior on unbalanced data.
#[derive(Debug, Clone)]
pub struct FitConfig {
    pub beta: f64,
    /// Probabilities are floored at this value inside logarithms and
    /// beta-powers so the objective stays finite when a model or empirical
    /// category collapses to zero.
    pub floor_eps: f64,
    pub objective_rel_tol: f64,
    pub simplex_tol: f64,
    pub max_iterations: usize,
    /// Explicit start; defaults to [`initialize_theta`].
    pub start: Option<ThetaVector>,
    pub weighting: Option<CellWeighting>,
    /// Extra stress levels at which the report evaluates alpha and tau.
    pub eval_stresses: Vec<f64>,
}

impl FitConfig {
    pub fn for_beta(beta: f64) -> Self {
        FitConfig {
            beta,
            ..FitConfig::default()
        }
    }

    pub fn resolved_weighting(&self) -> CellWeighting {
        self.weighting.unwrap_or(if self.beta == 0.0 {
            CellWeighting::UnitShare
        } else {
            CellWeighting::Uniform
        })
    }

    fn check(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Domain(format!(
                "beta must be a finite nonnegative real, got {}",
                self.beta
            )));
        }
        if !(self.floor_eps > 0.0 && self.floor_eps <= 1e-6) {
            return Err(Error::Domain(format!(
                "floor_eps must lie in (0, 1e-6], got {}",
                self.floor_eps
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Domain("max_iterations must be >= 1".to_string()));
        }
        Ok(())
    }
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            beta: 0.0,
            floor_eps: 1e-10,
            objective_rel_tol: 1e-10,
            simplex_tol: 1e-8,
            max_iterations: 2000,
            start: None,
            weighting: None,
            eval_stresses: Vec::new(),
        }
    }
}

/// Result of one fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub theta_hat: ThetaVector,
    pub beta: f64,
    pub objective_value: f64,
    /// `(stress, alpha)` at every dataset stress plus requested extras,
    /// ascending.
    pub alpha_by_stress: Vec<(f64, f64)>,
    /// `(stress, tau)` aligned with `alpha_by_stress`.
    pub tau_by_stress: Vec<(f64, f64)>,
    pub abias_percent: f64,
    pub converged: bool,
    pub iterations: usize,
    pub start_used: ThetaVector,
    /// Probability components floored when evaluating the objective at
    /// `theta_hat`; 0 on clean interior data.
    pub floor_events: u64,
    pub weighting: CellWeighting,
}

/// Builds the four category probabilities from the copula value at the
/// plugged-in margins:
/// pi0 = 1 - f1 - f2 + C, pi1 = f1 - C, pi2 = f2 - C, pi12 = C.
pub fn cell_probabilities(
    family: CopulaFamily,
    theta: ThetaVector,
    x: f64,
    margins: &EmpiricalMargins,
) -> Result<CellProbabilities> {
    let alpha = copulas::link_alpha(family, theta, x);
    let c = copulas::copula_cdf(family, margins.f1_hat, margins.f2_hat, alpha)?;
    Ok(assemble_cell_probs(margins.f1_hat, margins.f2_hat, c))
}

fn assemble_cell_probs(f1: f64, f2: f64, c: f64) -> CellProbabilities {
    // The Frechet bounds keep every component nonnegative in exact
    // arithmetic; clamp the last-ulp negatives that rounding can produce.
    CellProbabilities {
        pi0: (1.0 - f1 - f2 + c).max(0.0),
        pi1: (f1 - c).max(0.0),
        pi2: (f2 - c).max(0.0),
        pi12: c.max(0.0),
    }
}

fn cell_probs_raw(family: CopulaFamily, theta: ThetaVector, x: f64, f1: f64, f2: f64) -> CellProbabilities {
    let alpha = copulas::link_alpha(family, theta, x);
    let c = copulas::copula_cdf_raw(family, f1, f2, alpha);
    assemble_cell_probs(f1, f2, c)
}

/// Kullback-Leibler divergence between one empirical and one model
/// category vector: sum of p ln(p / pi), with 0 ln 0 = 0.
///
/// Callers are responsible for flooring `pi` (see [`FitConfig::floor_eps`]);
/// with a zero model probability against a positive empirical one the
/// divergence is rightly infinite.
pub fn kl_cell_divergence(p: &[f64; 4], pi: &CellProbabilities) -> f64 {
    let q = pi.as_array();
    let mut d = 0.0;
    for r in 0..4 {
        if p[r] > 0.0 {
            d += p[r] * (p[r] / q[r]).ln();
        }
    }
    d
}

/// Density-power divergence with tuning beta:
/// sum pi^(1+beta) - ((1+beta)/beta) sum p pi^beta for beta > 0, and the
/// KL divergence exactly at beta = 0.
pub fn dpd_cell_divergence(p: &[f64; 4], pi: &CellProbabilities, beta: f64) -> f64 {
    if beta == 0.0 {
        return kl_cell_divergence(p, pi);
    }
    let q = pi.as_array();
    let mut power_term = 0.0;
    let mut cross_term = 0.0;
    for r in 0..4 {
        let qb = q[r].powf(beta);
        power_term += qb * q[r];
        cross_term += p[r] * qb;
    }
    power_term - (1.0 + beta) / beta * cross_term
}

struct PreparedCell {
    x: f64,
    f1: f64,
    f2: f64,
    p: [f64; 4],
    /// Device count as a real number; also the unit-share numerator.
    k: f64,
    counts: [f64; 4],
}

fn prepare_cells(ds: &OneShotDataset) -> Result<Vec<PreparedCell>> {
    let mut order: Vec<usize> = (0..ds.cells().len()).collect();
    // Canonical evaluation order makes every objective exactly invariant
    // to the row order of the input.
    order.sort_by(|&a, &b| {
        let (ca, _) = &ds.cells()[a];
        let (cb, _) = &ds.cells()[b];
        ca.stress
            .total_cmp(&cb.stress)
            .then(ca.inspection_time.total_cmp(&cb.inspection_time))
    });
    let mut out = Vec::with_capacity(order.len());
    for idx in order {
        let (cond, counts) = &ds.cells()[idx];
        let m = empirical_margins(counts)?;
        let p = empirical_cell_probs(counts)?;
        let n = counts.as_array();
        out.push(PreparedCell {
            x: cond.stress,
            f1: m.f1_hat,
            f2: m.f2_hat,
            p,
            k: counts.total() as f64,
            counts: [n[0] as f64, n[1] as f64, n[2] as f64, n[3] as f64],
        });
    }
    Ok(out)
}

/// Evaluates the combined divergence objective; returns the value and the
/// number of floored probability components.
fn objective_eval(
    cells: &[PreparedCell],
    family: CopulaFamily,
    theta: ThetaVector,
    beta: f64,
    weighting: CellWeighting,
    floor_eps: f64,
) -> (f64, u64) {
    let total: f64 = cells.iter().map(|c| c.k).sum();
    let mut value = 0.0;
    let mut floors = 0u64;
    for cell in cells {
        let pi = cell_probs_raw(family, theta, cell.x, cell.f1, cell.f2);
        let mut q = pi.as_array();
        for item in &mut q {
            if *item < floor_eps {
                *item = floor_eps;
                floors += 1;
            }
        }
        let floored = CellProbabilities {
            pi0: q[0],
            pi1: q[1],
            pi2: q[2],
            pi12: q[3],
        };
        let d = dpd_cell_divergence(&cell.p, &floored, beta);
        let w = match weighting {
            CellWeighting::UnitShare => cell.k / total,
            CellWeighting::Uniform => 1.0,
        };
        value += w * d;
    }
    (value, floors)
}

/// The unit-share-weighted divergence objective,
/// `sum_cells (K_ij / K) d_beta(p_ij, pi_ij(theta))`, with margins plugged
/// in from the observed proportions.
pub fn weighted_objective(
    ds: &OneShotDataset,
    family: CopulaFamily,
    theta: ThetaVector,
    beta: f64,
) -> Result<f64> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::Domain(format!(
            "beta must be a finite nonnegative real, got {beta}"
        )));
    }
    let cells = prepare_cells(ds)?;
    Ok(objective_eval(
        &cells,
        family,
        theta,
        beta,
        CellWeighting::UnitShare,
        FitConfig::default().floor_eps,
    )
    .0)
}

/// Composite log-likelihood of the category counts,
/// `sum_cells sum_r n_r ln pi_r(theta)`, with the same flooring convention
/// as the divergence objectives. Its maximizer is the quasi maximum
/// likelihood estimate.
pub fn composite_log_likelihood(
    ds: &OneShotDataset,
    family: CopulaFamily,
    theta: ThetaVector,
    floor_eps: f64,
) -> Result<f64> {
    let cells = prepare_cells(ds)?;
    let mut ll = 0.0;
    for cell in cells {
        let pi = cell_probs_raw(family, theta, cell.x, cell.f1, cell.f2);
        let q = pi.as_array();
        for r in 0..4 {
            if cell.counts[r] > 0.0 {
                ll += cell.counts[r] * q[r].max(floor_eps).ln();
            }
        }
    }
    Ok(ll)
}

/// Pairwise concordance estimate of Kendall's tau at one stress level:
/// C = sum n0 n12, D = sum n1 n2 over the cells at that stress,
/// tau-hat = (C - D)/(C + D), and 0 when no pair is informative.
pub fn kendall_tau_hat(ds: &OneShotDataset, x: f64) -> Result<f64> {
    let mut concordant: u128 = 0;
    let mut discordant: u128 = 0;
    let mut seen = false;
    for (cond, counts) in ds.cells() {
        if cond.stress == x {
            seen = true;
            concordant += counts.n0 as u128 * counts.n12 as u128;
            discordant += counts.n1 as u128 * counts.n2 as u128;
        }
    }
    if !seen {
        return Err(Error::UnknownStress(x));
    }
    if concordant + discordant == 0 {
        return Ok(0.0);
    }
    let c = concordant as f64;
    let d = discordant as f64;
    Ok((c - d) / (c + d))
}

/// Moment-style starting value: per stress level, invert the Kendall-tau
/// estimate into a dependence parameter, map it through the inverse link,
/// and fit the two-parameter line by least squares.
///
/// Gumbel-Hougaard tau estimates are clipped to [0.01, 0.99] (the inverse
/// link diverges at independence); Frank ones to [-0.99, 0.99], inverted by
/// the alpha/9 rule inside its advisory range and exactly outside it.
pub fn initialize_theta(ds: &OneShotDataset, family: CopulaFamily) -> Result<ThetaVector> {
    let stresses = ds.stress_levels();
    if stresses.len() < 2 {
        return Err(Error::Identification(
            "initializer needs at least 2 distinct stress levels".to_string(),
        ));
    }
    let mut lambdas = Vec::with_capacity(stresses.len());
    for &x in stresses {
        let tau = kendall_tau_hat(ds, x)?;
        let lambda = match family {
            CopulaFamily::GumbelHougaard => {
                let tau = tau.clamp(0.01, 0.99);
                let alpha = copulas::gh_alpha_from_tau(tau)?;
                copulas::link_inverse(family, alpha)?
            }
            CopulaFamily::Frank => {
                let tau = tau.clamp(-0.99, 0.99);
                if tau.abs() <= 0.307 {
                    9.0 * tau
                } else {
                    copulas::frank_alpha_from_tau(tau)?
                }
            }
        };
        lambdas.push(lambda);
    }
    least_squares_line(stresses, &lambdas)
}

fn least_squares_line(xs: &[f64], ys: &[f64]) -> Result<ThetaVector> {
    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - x_mean) * (x - x_mean);
        sxy += (x - x_mean) * (y - y_mean);
    }
    if sxx == 0.0 {
        return Err(Error::Identification(
            "all stress levels equal; slope is unidentified".to_string(),
        ));
    }
    let a1 = sxy / sxx;
    Ok(ThetaVector {
        a0: y_mean - a1 * x_mean,
        a1,
    })
}

/// Minimizes the configured divergence objective by Nelder-Mead and
/// assembles the full fit report. Non-convergence within the iteration
/// budget is reported through `converged`, not as an error.
pub fn fit(ds: &OneShotDataset, family: CopulaFamily, config: &FitConfig) -> Result<FitResult> {
    config.check()?;
    let report = validate_dataset(ds);
    if !report.is_valid() {
        return Err(Error::InvalidDataset(report.violations.join("; ")));
    }
    if ds.stress_levels().len() < 2 {
        return Err(Error::Identification(
            "fitting a stress slope needs at least 2 distinct stress levels".to_string(),
        ));
    }
    let cells = prepare_cells(ds)?;
    let start = match config.start {
        Some(theta) => theta,
        None => initialize_theta(ds, family)?,
    };
    let weighting = config.resolved_weighting();
    let beta = config.beta;
    let floor_eps = config.floor_eps;

    let opts = NmOptions {
        init_step: 0.1,
        rel_obj_tol: config.objective_rel_tol,
        simplex_tol: config.simplex_tol,
        max_iterations: config.max_iterations,
    };
    let outcome = nelder_mead(
        |t| {
            objective_eval(
                &cells,
                family,
                ThetaVector { a0: t[0], a1: t[1] },
                beta,
                weighting,
                floor_eps,
            )
            .0
        },
        [start.a0, start.a1],
        &opts,
    );
    let theta_hat = ThetaVector {
        a0: outcome.x[0],
        a1: outcome.x[1],
    };
    let objective_value = outcome.fx;
    let (_, floor_events) = objective_eval(&cells, family, theta_hat, beta, weighting, floor_eps);

    let mut stresses: Vec<f64> = ds
        .stress_levels()
        .iter()
        .chain(config.eval_stresses.iter())
        .copied()
        .collect();
    stresses.sort_by(f64::total_cmp);
    stresses.dedup();
    let mut alpha_by_stress = Vec::with_capacity(stresses.len());
    let mut tau_by_stress = Vec::with_capacity(stresses.len());
    for &x in &stresses {
        let alpha = copulas::link_alpha(family, theta_hat, x);
        alpha_by_stress.push((x, alpha));
        tau_by_stress.push((x, copulas::copula_tau(family, alpha)?));
    }

    Ok(FitResult {
        theta_hat,
        beta,
        objective_value,
        alpha_by_stress,
        tau_by_stress,
        abias_percent: abias(ds, family, theta_hat)?,
        converged: outcome.converged,
        iterations: outcome.iterations,
        start_used: start,
        floor_events,
        weighting,
    })
}

/// Empirical absolute bias: 100 times the plain mean, over every cell and
/// every one of the four categories, of |empirical - model| probability.
pub fn abias(ds: &OneShotDataset, family: CopulaFamily, theta_hat: ThetaVector) -> Result<f64> {
    let cells = prepare_cells(ds)?;
    let mut pairs = Vec::with_capacity(cells.len());
    for cell in &cells {
        let pi = cell_probs_raw(family, theta_hat, cell.x, cell.f1, cell.f2);
        pairs.push((cell.p, pi.as_array()));
    }
    Ok(abias_from_pairs(&pairs))
}

pub(crate) fn abias_from_pairs(pairs: &[([f64; 4], [f64; 4])]) -> f64 {
    let mut sum = 0.0;
    let mut count = 0.0;
    for (p, q) in pairs {
        for r in 0..4 {
            sum += (p[r] - q[r]).abs();
            count += 1.0;
        }
    }
    100.0 * sum / count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::{CellCounts, TestCondition};
    use crate::datasets::serial_sacrifice;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cell(it: f64, x: f64, n: [u64; 4]) -> (TestCondition, CellCounts) {
        (
            TestCondition {
                inspection_time: it,
                stress: x,
            },
            CellCounts::new(n[0], n[1], n[2], n[3]),
        )
    }

    #[test]
    fn cell_probabilities_reduce_to_margin_product_under_independence() {
        let m = EmpiricalMargins {
            f1_hat: 0.5,
            f2_hat: 0.4,
        };
        // Frank at theta = (0,0) is exact independence.
        let pi = cell_probabilities(CopulaFamily::Frank, ThetaVector::new(0.0, 0.0), 3.0, &m)
            .unwrap();
        assert_relative_eq!(pi.pi0, 0.3, max_relative = 1e-12);
        assert_relative_eq!(pi.pi1, 0.3, max_relative = 1e-12);
        assert_relative_eq!(pi.pi2, 0.2, max_relative = 1e-12);
        assert_relative_eq!(pi.pi12, 0.2, max_relative = 1e-12);
    }

    #[test]
    fn cell_probabilities_compose_the_copula_value() {
        let m = EmpiricalMargins {
            f1_hat: 0.5,
            f2_hat: 0.5,
        };
        let theta = ThetaVector::new(-2.0, 0.02);
        let pi =
            cell_probabilities(CopulaFamily::GumbelHougaard, theta, 25.0, &m).unwrap();
        let alpha = copulas::link_alpha(CopulaFamily::GumbelHougaard, theta, 25.0);
        let c = copulas::gh_cdf(0.5, 0.5, alpha).unwrap();
        assert_eq!(pi.pi12, c);
        assert_relative_eq!(pi.pi0, c, max_relative = 1e-12);
        assert_relative_eq!(pi.pi1, 0.5 - c, max_relative = 1e-12);
    }

    #[test]
    fn cell_probabilities_at_degenerate_margins() {
        let m = EmpiricalMargins {
            f1_hat: 0.0,
            f2_hat: 0.0,
        };
        let pi = cell_probabilities(
            CopulaFamily::GumbelHougaard,
            ThetaVector::new(0.5, 0.0),
            1.0,
            &m,
        )
        .unwrap();
        assert_eq!(pi.as_array(), [1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn cell_probabilities_stay_on_simplex() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let m = EmpiricalMargins {
                f1_hat: rng.random::<f64>(),
                f2_hat: rng.random::<f64>(),
            };
            let theta = ThetaVector::new(rng.random_range(-3.0..3.0), rng.random_range(-0.2..0.2));
            for family in [CopulaFamily::GumbelHougaard, CopulaFamily::Frank] {
                let pi = cell_probabilities(family, theta, rng.random_range(0.0..50.0), &m)
                    .unwrap();
                let q = pi.as_array();
                for x in q {
                    assert!((0.0..=1.0).contains(&x));
                }
                assert_abs_diff_eq!(q.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            }
        }
    }

    fn probs(p: [f64; 4]) -> CellProbabilities {
        CellProbabilities {
            pi0: p[0],
            pi1: p[1],
            pi2: p[2],
            pi12: p[3],
        }
    }

    #[test]
    fn kl_divergence_known_values() {
        let p = [0.25, 0.25, 0.25, 0.25];
        assert_eq!(kl_cell_divergence(&p, &probs(p)), 0.0);

        // Single nonzero term: 1 * ln(1 / 0.5) = ln 2.
        let p = [1.0, 0.0, 0.0, 0.0];
        let pi = probs([0.5, 0.5 / 3.0, 0.5 / 3.0, 0.5 / 3.0]);
        assert_relative_eq!(kl_cell_divergence(&p, &pi), 2.0_f64.ln(), max_relative = 1e-15);

        let p = [0.25; 4];
        let pi = probs([0.4, 0.3, 0.2, 0.1]);
        assert_relative_eq!(
            kl_cell_divergence(&p, &pi),
            0.12177727428716866027,
            max_relative = 1e-14
        );
    }

    #[test]
    fn kl_divergence_is_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let p = random_simplex(&mut rng);
            let q = random_simplex(&mut rng);
            let d = kl_cell_divergence(&p, &probs(q));
            assert!(d >= -1e-12, "negative KL {d}");
        }
        let p = random_simplex(&mut rng);
        assert_abs_diff_eq!(kl_cell_divergence(&p, &probs(p)), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn dpd_hand_example_at_beta_one() {
        let p = [1.0, 0.0, 0.0, 0.0];
        let pi = probs([0.7, 0.1, 0.1, 0.1]);
        // (0.49 + 3 * 0.01) - 2 * 0.7 = -0.88
        assert_relative_eq!(dpd_cell_divergence(&p, &pi, 1.0), -0.88, max_relative = 1e-14);
    }

    #[test]
    fn dpd_approaches_kl_up_to_data_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let beta = 1e-6;
        for _ in 0..50 {
            let p = random_simplex(&mut rng);
            let q = random_simplex(&mut rng);
            let entropy: f64 = p
                .iter()
                .filter(|&&x| x > 0.0)
                .map(|&x| x * x.ln())
                .sum();
            let constant = 1.0 / beta + entropy;
            let dpd = dpd_cell_divergence(&p, &probs(q), beta);
            let kl = kl_cell_divergence(&p, &probs(q));
            assert_abs_diff_eq!(dpd - kl + constant, 0.0, epsilon = 1e-4);
        }
    }

    #[test]
    fn dpd_is_minimized_at_the_empirical_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for &beta in &[0.2, 0.4, 0.6, 1.0] {
            let p = random_simplex(&mut rng);
            let at_p = dpd_cell_divergence(&p, &probs(p), beta);
            for _ in 0..500 {
                let q = random_simplex(&mut rng);
                let at_q = dpd_cell_divergence(&p, &probs(q), beta);
                assert!(at_q >= at_p - 1e-9, "beta={beta}: {at_q} < {at_p}");
            }
        }
    }

    fn random_simplex(rng: &mut ChaCha8Rng) -> [f64; 4] {
        let mut e = [0.0; 4];
        let mut total = 0.0;
        for item in &mut e {
            *item = -rng.random::<f64>().ln();
            total += *item;
        }
        e.map(|x| x / total)
    }

    #[test]
    fn weighted_objective_of_single_cell_is_the_cell_divergence() {
        let ds = OneShotDataset::new(vec![cell(10.0, 1.0, [40, 30, 20, 10])]);
        let theta = ThetaVector::new(0.5, 0.1);
        let obj = weighted_objective(&ds, CopulaFamily::Frank, theta, 0.3).unwrap();
        let m = empirical_margins(&ds.cells()[0].1).unwrap();
        let pi = cell_probabilities(CopulaFamily::Frank, theta, 1.0, &m).unwrap();
        let d = dpd_cell_divergence(&[0.4, 0.3, 0.2, 0.1], &pi, 0.3);
        assert_relative_eq!(obj, d, max_relative = 1e-14);
    }

    #[test]
    fn weighted_kl_objective_is_negative_scaled_likelihood_plus_constant() {
        let named = serial_sacrifice();
        let ds = &named.dataset;
        let total = ds.total_units() as f64;
        // Entropy of the empirical vectors; the theta-free part of the identity.
        let mut entropy = 0.0;
        for (_, counts) in ds.cells() {
            let k = counts.total() as f64;
            for n in counts.as_array() {
                if n > 0 {
                    let p = n as f64 / k;
                    entropy += (k / total) * p * p.ln();
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for family in [CopulaFamily::GumbelHougaard, CopulaFamily::Frank] {
            for _ in 0..20 {
                let theta =
                    ThetaVector::new(rng.random_range(-3.0..2.0), rng.random_range(-0.5..0.5));
                let dkl = weighted_objective(ds, family, theta, 0.0).unwrap();
                let ll = composite_log_likelihood(ds, family, theta, 1e-10).unwrap();
                assert_abs_diff_eq!(dkl, -ll / total + entropy, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn weighted_objective_is_continuous_in_beta_at_zero() {
        let named = serial_sacrifice();
        let ds = &named.dataset;
        let beta = 1e-6;
        let total = ds.total_units() as f64;
        let mut entropy = 0.0;
        for (_, counts) in ds.cells() {
            let k = counts.total() as f64;
            for n in counts.as_array() {
                if n > 0 {
                    let p = n as f64 / k;
                    entropy += (k / total) * p * p.ln();
                }
            }
        }
        let constant = 1.0 / beta + entropy;
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..20 {
            let theta = ThetaVector::new(rng.random_range(-3.0..2.0), rng.random_range(-0.5..0.5));
            let near = weighted_objective(ds, CopulaFamily::GumbelHougaard, theta, beta).unwrap();
            let at = weighted_objective(ds, CopulaFamily::GumbelHougaard, theta, 0.0).unwrap();
            assert_abs_diff_eq!(near - at + constant, 0.0, epsilon = 1e-4);
        }
    }

    #[test]
    fn kendall_tau_hat_on_embedded_data() {
        let named = serial_sacrifice();
        // Control group: C = 237, D = 119 by direct accumulation.
        let tau = kendall_tau_hat(&named.dataset, 0.0).unwrap();
        assert_relative_eq!(tau, 118.0 / 356.0, max_relative = 1e-15);
        // Irradiated group: C = 401, D = 148.
        let tau = kendall_tau_hat(&named.dataset, 1.0).unwrap();
        assert_relative_eq!(tau, 253.0 / 549.0, max_relative = 1e-15);
        assert!(matches!(
            kendall_tau_hat(&named.dataset, 2.0),
            Err(Error::UnknownStress(_))
        ));
    }

    #[test]
    fn kendall_tau_hat_degenerate_conventions() {
        let ds = OneShotDataset::new(vec![cell(10.0, 0.0, [10, 0, 0, 10])]);
        assert_eq!(kendall_tau_hat(&ds, 0.0).unwrap(), 1.0);
        // No informative pairs at all.
        let ds = OneShotDataset::new(vec![cell(10.0, 0.0, [10, 5, 0, 0])]);
        assert_eq!(kendall_tau_hat(&ds, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn initializer_interpolates_two_levels_exactly() {
        // tau-hat is 118/356 at x=0 and 253/549 at x=1; the two-point least
        // squares line passes through both transformed values.
        let named = serial_sacrifice();
        let theta = initialize_theta(&named.dataset, CopulaFamily::GumbelHougaard).unwrap();
        let logit = |t: f64| (t / (1.0 - t)).ln();
        let l0 = logit(118.0 / 356.0);
        let l1 = logit(253.0 / 549.0);
        assert_relative_eq!(theta.a0, l0, max_relative = 1e-12);
        assert_relative_eq!(theta.a1, l1 - l0, max_relative = 1e-12);
    }

    #[test]
    fn initializer_uses_exact_frank_inverse_outside_approx_range() {
        // Both embedded tau-hats exceed 0.307, so the exact inverse applies.
        let named = serial_sacrifice();
        let theta = initialize_theta(&named.dataset, CopulaFamily::Frank).unwrap();
        let a0 = copulas::frank_alpha_from_tau(118.0 / 356.0).unwrap();
        let a1 = copulas::frank_alpha_from_tau(253.0 / 549.0).unwrap() - a0;
        assert_abs_diff_eq!(theta.a0, a0, epsilon = 1e-6);
        assert_abs_diff_eq!(theta.a1, a1, epsilon = 1e-6);
    }

    #[test]
    fn initializer_uses_nine_tau_rule_inside_approx_range() {
        let ds = OneShotDataset::new(vec![
            cell(10.0, 0.0, [30, 20, 15, 10]), // C=300, D=300
            cell(20.0, 0.0, [30, 10, 10, 10]), // C=300, D=100
            cell(10.0, 1.0, [20, 10, 20, 15]), // C=300, D=200
        ]);
        let tau0 = kendall_tau_hat(&ds, 0.0).unwrap();
        let tau1 = kendall_tau_hat(&ds, 1.0).unwrap();
        assert!(tau0.abs() <= 0.307 && tau1.abs() <= 0.307);
        let theta = initialize_theta(&ds, CopulaFamily::Frank).unwrap();
        assert_relative_eq!(theta.a0, 9.0 * tau0, max_relative = 1e-12);
        assert_relative_eq!(theta.a1, 9.0 * (tau1 - tau0), max_relative = 1e-12);
    }

    #[test]
    fn initializer_clips_nonpositive_tau_for_gh() {
        // Discordant-dominated data: raw tau-hat is negative at both levels.
        let ds = OneShotDataset::new(vec![
            cell(10.0, 0.0, [5, 30, 30, 1]),
            cell(10.0, 1.0, [5, 40, 40, 1]),
        ]);
        assert!(kendall_tau_hat(&ds, 0.0).unwrap() < 0.0);
        let theta = initialize_theta(&ds, CopulaFamily::GumbelHougaard).unwrap();
        // Both levels clip to tau = 0.01, so the line is flat at its logit.
        let expected = (0.01_f64 / 0.99).ln();
        assert_relative_eq!(theta.a0, expected, max_relative = 1e-10);
        assert_abs_diff_eq!(theta.a1, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn initializer_requires_two_stress_levels() {
        let ds = OneShotDataset::new(vec![cell(10.0, 0.0, [5, 3, 2, 1])]);
        assert!(matches!(
            initialize_theta(&ds, CopulaFamily::Frank),
            Err(Error::Identification(_))
        ));
    }

    #[test]
    fn fit_reproduces_gh_reference_estimates_at_beta_zero() {
        let named = serial_sacrifice();
        let result = fit(
            &named.dataset,
            CopulaFamily::GumbelHougaard,
            &FitConfig::for_beta(0.0),
        )
        .unwrap();
        assert!(result.converged);
        assert_eq!(result.weighting, CellWeighting::UnitShare);
        assert_abs_diff_eq!(result.theta_hat.a0, -2.135, epsilon = 0.01);
        assert_abs_diff_eq!(result.theta_hat.a1, 0.048, epsilon = 0.05);
        let alpha0 = result.alpha_by_stress[0].1;
        assert_abs_diff_eq!(alpha0, 1.118, epsilon = 0.005);
        assert_abs_diff_eq!(result.tau_by_stress[0].1, 0.106, epsilon = 0.005);
    }

    #[test]
    fn fit_reproduces_frank_reference_estimates() {
        let named = serial_sacrifice();
        let qmle = fit(
            &named.dataset,
            CopulaFamily::Frank,
            &FitConfig::for_beta(0.0),
        )
        .unwrap();
        assert_abs_diff_eq!(qmle.theta_hat.a0, 1.342, epsilon = 0.01);
        assert_abs_diff_eq!(qmle.theta_hat.a1, 0.425, epsilon = 0.01);

        let robust = fit(
            &named.dataset,
            CopulaFamily::Frank,
            &FitConfig::for_beta(0.6),
        )
        .unwrap();
        assert_eq!(robust.weighting, CellWeighting::Uniform);
        assert_abs_diff_eq!(robust.theta_hat.a0, 1.185, epsilon = 0.02);
        assert_abs_diff_eq!(robust.theta_hat.a1, 0.742, epsilon = 0.02);
    }

    #[test]
    fn fit_with_unit_share_weights_at_positive_beta_moves_the_optimum() {
        // Regression pin from an independent implementation of the same
        // objective: the unit-share-weighted Frank fit at beta = 0.6.
        let named = serial_sacrifice();
        let config = FitConfig {
            beta: 0.6,
            weighting: Some(CellWeighting::UnitShare),
            ..FitConfig::default()
        };
        let result = fit(&named.dataset, CopulaFamily::Frank, &config).unwrap();
        assert_abs_diff_eq!(result.theta_hat.a0, 1.144, epsilon = 0.01);
        assert_abs_diff_eq!(result.theta_hat.a1, 0.952, epsilon = 0.01);
    }

    #[test]
    fn qmle_routes_agree() {
        // Minimizing the unit-share KL objective and maximizing the
        // composite log-likelihood are the same estimator.
        let named = serial_sacrifice();
        for family in [CopulaFamily::GumbelHougaard, CopulaFamily::Frank] {
            let via_divergence = fit(&named.dataset, family, &FitConfig::for_beta(0.0)).unwrap();
            let start = initialize_theta(&named.dataset, family).unwrap();
            let via_likelihood = nelder_mead(
                |t| {
                    -composite_log_likelihood(
                        &named.dataset,
                        family,
                        ThetaVector::new(t[0], t[1]),
                        1e-10,
                    )
                    .unwrap()
                },
                [start.a0, start.a1],
                &NmOptions::default(),
            );
            assert_abs_diff_eq!(
                via_divergence.theta_hat.a0,
                via_likelihood.x[0],
                epsilon = 1e-4
            );
            assert_abs_diff_eq!(
                via_divergence.theta_hat.a1,
                via_likelihood.x[1],
                epsilon = 1e-4
            );
        }
    }

    #[test]
    fn fit_recovers_truth_from_exact_cell_counts() {
        // Counts generated as K * pi(theta*) for huge K: the fit must land
        // on theta* for any beta.
        let theta_star = ThetaVector::new(-2.0, 0.02);
        let family = CopulaFamily::GumbelHougaard;
        let k = 1_000_000.0;
        let mut cells = Vec::new();
        for &x in &[30.0_f64, 40.0, 50.0] {
            for &it in &[5.0_f64, 10.0, 15.0, 20.0] {
                // Smooth margins standing in for a lifetime model.
                let f1 = 1.0 - (-it / 18.0).exp();
                let f2 = 1.0 - (-it / 15.0).exp();
                let alpha = copulas::link_alpha(family, theta_star, x);
                let c = copulas::gh_cdf(f1, f2, alpha).unwrap();
                let pi = [1.0 - f1 - f2 + c, f1 - c, f2 - c, c];
                let n: Vec<u64> = pi.iter().map(|p| (p * k).round() as u64).collect();
                cells.push(cell(it, x, [n[0], n[1], n[2], n[3]]));
            }
        }
        let ds = OneShotDataset::new(cells);
        for beta in [0.0, 0.4] {
            let result = fit(&ds, family, &FitConfig::for_beta(beta)).unwrap();
            assert_abs_diff_eq!(result.theta_hat.a0, theta_star.a0, epsilon = 0.05);
            assert_abs_diff_eq!(result.theta_hat.a1, theta_star.a1, epsilon = 0.05);
        }
    }

    #[test]
    fn fit_is_invariant_to_cell_order() {
        let named = serial_sacrifice();
        let reversed = OneShotDataset::new(named.dataset.cells().iter().rev().cloned().collect());
        for family in [CopulaFamily::GumbelHougaard, CopulaFamily::Frank] {
            let a = fit(&named.dataset, family, &FitConfig::for_beta(0.2)).unwrap();
            let b = fit(&reversed, family, &FitConfig::for_beta(0.2)).unwrap();
            assert_eq!(a.theta_hat.a0.to_bits(), b.theta_hat.a0.to_bits());
            assert_eq!(a.theta_hat.a1.to_bits(), b.theta_hat.a1.to_bits());
        }
    }

    #[test]
    fn no_flooring_on_clean_interior_data() {
        let ds = OneShotDataset::new(vec![
            cell(10.0, 0.0, [40, 25, 20, 15]),
            cell(20.0, 0.0, [25, 30, 25, 20]),
            cell(10.0, 1.0, [35, 25, 25, 15]),
            cell(20.0, 1.0, [20, 30, 25, 25]),
        ]);
        for family in [CopulaFamily::GumbelHougaard, CopulaFamily::Frank] {
            let result = fit(&ds, family, &FitConfig::for_beta(0.2)).unwrap();
            assert_eq!(result.floor_events, 0);
        }
    }

    #[test]
    fn fit_rejects_degenerate_designs_and_bad_configs() {
        let one_level = OneShotDataset::new(vec![
            cell(10.0, 0.0, [5, 3, 2, 1]),
            cell(20.0, 0.0, [5, 3, 2, 1]),
        ]);
        assert!(matches!(
            fit(&one_level, CopulaFamily::Frank, &FitConfig::for_beta(0.0)),
            Err(Error::Identification(_))
        ));

        let named = serial_sacrifice();
        assert!(fit(
            &named.dataset,
            CopulaFamily::Frank,
            &FitConfig::for_beta(-0.1)
        )
        .is_err());
        let bad_floor = FitConfig {
            floor_eps: 1e-3,
            ..FitConfig::default()
        };
        assert!(fit(&named.dataset, CopulaFamily::Frank, &bad_floor).is_err());
    }

    #[test]
    fn fit_evaluates_requested_stresses() {
        let named = serial_sacrifice();
        let config = FitConfig {
            eval_stresses: vec![0.5],
            ..FitConfig::for_beta(0.0)
        };
        let result = fit(&named.dataset, CopulaFamily::GumbelHougaard, &config).unwrap();
        let stresses: Vec<f64> = result.alpha_by_stress.iter().map(|&(x, _)| x).collect();
        assert_eq!(stresses, vec![0.0, 0.5, 1.0]);
        for (&(_, alpha), &(_, tau)) in result
            .alpha_by_stress
            .iter()
            .zip(result.tau_by_stress.iter())
        {
            assert_relative_eq!(
                copulas::gh_tau(alpha).unwrap(),
                tau,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn abias_core_examples() {
        // Model equals data in every cell.
        let pairs = vec![([0.4, 0.3, 0.2, 0.1], [0.4, 0.3, 0.2, 0.1])];
        assert_eq!(abias_from_pairs(&pairs), 0.0);
        // One cell off by 0.01 in every category.
        let pairs = vec![([0.4, 0.3, 0.2, 0.1], [0.39, 0.31, 0.19, 0.11])];
        assert_relative_eq!(abias_from_pairs(&pairs), 1.0, max_relative = 1e-10);
    }

    #[test]
    fn abias_matches_reference_values_at_the_qmle() {
        let named = serial_sacrifice();
        let gh = fit(
            &named.dataset,
            CopulaFamily::GumbelHougaard,
            &FitConfig::for_beta(0.0),
        )
        .unwrap();
        assert_abs_diff_eq!(gh.abias_percent, 0.899, epsilon = 0.05);
        let frank = fit(
            &named.dataset,
            CopulaFamily::Frank,
            &FitConfig::for_beta(0.0),
        )
        .unwrap();
        assert_abs_diff_eq!(frank.abias_percent, 0.691, epsilon = 0.05);
    }
}
