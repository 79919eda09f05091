//! Synthetic data generation and the Monte Carlo study.
//!
//! Datasets are drawn cell by cell from Multinomial(k_star, pi_true): the
//! observed table is exactly the category counts, so this is
//! distributionally identical to simulating lifetimes and censoring them
//! at the inspection time, and much faster. The lifetime path is kept as
//! [`sample_lifetime_pair`] and validated against the multinomial route.

use crate::copulas::{self, CopulaFamily};
use crate::data_model::{CellCounts, OneShotDataset, TestCondition};
use crate::error::{Error, Result};
use crate::inference::{cell_probabilities, fit, CellProbabilities, FitConfig, ThetaVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Exp1};
use rayon::prelude::*;
use statrs::function::gamma::gamma_lr;

/// Lifetime distribution family of the failure modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginalFamily {
    Weibull,
    Gamma,
}

impl MarginalFamily {
    pub fn name(self) -> &'static str {
        match self {
            MarginalFamily::Weibull => "weibull",
            MarginalFamily::Gamma => "gamma",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "weibull" => Ok(MarginalFamily::Weibull),
            "gamma" => Ok(MarginalFamily::Gamma),
            other => Err(Error::InvalidScenario(format!(
                "unknown marginal family '{other}' (expected 'weibull' or 'gamma')"
            ))),
        }
    }
}

/// One of the two competing failure modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureMode {
    Mode1,
    Mode2,
}

/// Log-linear lifetime model shared by both failure modes: scale
/// beta_j = exp(s0 + s1 x_j) is common, shape eta_{j,g} = exp(r0_g + r1 x_j)
/// is mode-specific. Both are positive for every finite stress by
/// construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginalModel {
    pub family: MarginalFamily,
    pub s0: f64,
    pub s1: f64,
    pub r0_mode1: f64,
    pub r0_mode2: f64,
    pub r1: f64,
}

impl MarginalModel {
    pub fn scale(&self, x: f64) -> f64 {
        (self.s0 + self.s1 * x).exp()
    }

    pub fn shape(&self, mode: FailureMode, x: f64) -> f64 {
        let r0 = match mode {
            FailureMode::Mode1 => self.r0_mode1,
            FailureMode::Mode2 => self.r0_mode2,
        };
        (r0 + self.r1 * x).exp()
    }
}

/// Complete description of one Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SimScenario {
    pub stresses: Vec<f64>,
    pub inspection_times: Vec<f64>,
    /// Devices tested at each (inspection time, stress) condition.
    pub k_star: u64,
    pub marginal: MarginalModel,
    pub copula: CopulaFamily,
    pub theta_true: ThetaVector,
    pub contaminate: bool,
    /// Normal operating stress at which alpha_0 and tau_0 are reported.
    pub normal_stress_x0: f64,
}

impl SimScenario {
    pub fn validate(&self) -> Result<()> {
        if self.k_star == 0 {
            return Err(Error::InvalidScenario("k_star must be >= 1".to_string()));
        }
        if self.stresses.is_empty() || self.inspection_times.is_empty() {
            return Err(Error::InvalidScenario(
                "stresses and inspection_times must be non-empty".to_string(),
            ));
        }
        for &x in &self.stresses {
            if !x.is_finite() {
                return Err(Error::InvalidScenario(format!("non-finite stress {x}")));
            }
        }
        for &it in &self.inspection_times {
            if !(it.is_finite() && it > 0.0) {
                return Err(Error::InvalidScenario(format!(
                    "inspection times must be positive and finite, got {it}"
                )));
            }
        }
        let mut sorted = self.stresses.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        if sorted.len() != self.stresses.len() {
            return Err(Error::InvalidScenario(
                "stress levels must be distinct".to_string(),
            ));
        }
        if !self.normal_stress_x0.is_finite() {
            return Err(Error::InvalidScenario(
                "normal_stress_x0 must be finite".to_string(),
            ));
        }
        Ok(())
    }
}

/// True dependence quantities implied by a scenario at its normal stress.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrueDependence {
    pub a0: f64,
    pub a1: f64,
    pub alpha0: f64,
    pub tau0: f64,
    pub x0: f64,
}

/// Mean estimates for one tuning parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MCRow {
    pub beta: f64,
    pub mean_a0: f64,
    pub mean_a1: f64,
    pub mean_alpha0: f64,
    pub mean_tau0: f64,
    /// Replications whose fit converged; means are over these only.
    pub converged_replications: u64,
    pub failed_replications: u64,
}

/// Monte Carlo study output.
#[derive(Debug, Clone, PartialEq)]
pub struct MCSummary {
    pub seed: u64,
    pub replications: u64,
    pub truth: TrueDependence,
    pub rows: Vec<MCRow>,
}

/// Lifetime CDF of one failure mode at stress x. Weibull:
/// 1 - exp(-(t/beta_j)^eta); Gamma: the regularized lower incomplete
/// gamma function P(eta, t/beta_j).
pub fn marginal_cdf(model: &MarginalModel, mode: FailureMode, t: f64, x: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!(
            "lifetime must be nonnegative, got {t}"
        )));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let scale = model.scale(x);
    let shape = model.shape(mode, x);
    Ok(match model.family {
        MarginalFamily::Weibull => -(-(t / scale).powf(shape)).exp_m1(),
        MarginalFamily::Gamma => gamma_lr(shape, t / scale),
    })
}

/// Quantile of the marginal by bisection on the CDF, to an absolute
/// tolerance of 1e-10 in t.
fn marginal_quantile(model: &MarginalModel, mode: FailureMode, p: f64, x: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    let p = p.min(1.0 - 1e-16);
    let cdf = |t: f64| marginal_cdf(model, mode, t, x).expect("t >= 0 inside quantile");
    let mut hi = model.scale(x).max(1.0);
    let mut guard = 0;
    while cdf(hi) < p {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            break;
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Model category probabilities at one scenario grid point, from the true
/// margins and the true dependence parameter.
pub fn true_cell_probs(sc: &SimScenario, it: f64, x: f64) -> Result<CellProbabilities> {
    if !sc.inspection_times.contains(&it) || !sc.stresses.contains(&x) {
        return Err(Error::Domain(format!(
            "condition (it={it}, x={x}) is not on the scenario grid"
        )));
    }
    let f1 = marginal_cdf(&sc.marginal, FailureMode::Mode1, it, x)?;
    let f2 = marginal_cdf(&sc.marginal, FailureMode::Mode2, it, x)?;
    cell_probabilities(
        sc.copula,
        sc.theta_true,
        x,
        &crate::data_model::EmpiricalMargins {
            f1_hat: f1,
            f2_hat: f2,
        },
    )
}

/// Multinomial draw by sequential conditional binomials.
fn sample_cell_counts(rng: &mut ChaCha8Rng, k: u64, probs: [f64; 4]) -> CellCounts {
    let mut out = [0u64; 4];
    let mut remaining = k;
    let mut prob_left = 1.0;
    for r in 0..3 {
        if remaining == 0 {
            break;
        }
        let p = if prob_left > 0.0 {
            (probs[r] / prob_left).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let draw = if p >= 1.0 {
            remaining
        } else {
            Binomial::new(remaining, p)
                .expect("conditional probability clamped to [0,1]")
                .sample(rng)
        };
        out[r] = draw;
        remaining -= draw;
        prob_left -= probs[r];
    }
    out[3] = remaining;
    CellCounts::new(out[0], out[1], out[2], out[3])
}

/// Draws one dataset: every grid condition gets an independent
/// Multinomial(k_star, true_cell_probs) cell, then the contamination
/// transform is applied when the scenario asks for it. Deterministic in
/// the seed; cells are generated with stress as the outer loop, in the
/// order the scenario lists them.
pub fn simulate_dataset(sc: &SimScenario, seed: u64) -> Result<OneShotDataset> {
    sc.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells = Vec::with_capacity(sc.stresses.len() * sc.inspection_times.len());
    for &x in &sc.stresses {
        for &it in &sc.inspection_times {
            let pi = true_cell_probs(sc, it, x)?;
            let counts = sample_cell_counts(&mut rng, sc.k_star, pi.as_array());
            cells.push((
                TestCondition {
                    inspection_time: it,
                    stress: x,
                },
                counts,
            ));
        }
    }
    let ds = OneShotDataset::new(cells);
    if sc.contaminate {
        contaminate(&ds, sc)
    } else {
        Ok(ds)
    }
}

fn logsumexp2(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Conditional-distribution inverse for the Frank copula: V given U = u at
/// conditional probability p, in log space so no exponential underflows.
fn frank_conditional_v(alpha: f64, u: f64, p: f64) -> f64 {
    let lu = (1.0 - p).ln() - alpha * u;
    let ln_num = logsumexp2(lu, p.ln() - alpha);
    let ln_den = logsumexp2(lu, p.ln());
    (-(ln_num - ln_den) / alpha).clamp(0.0, 1.0)
}

/// Draws one dependent lifetime pair at stress x: (U, V) from the copula,
/// then each coordinate through the inverse marginal CDF.
///
/// Frank uses conditional-distribution inversion; Gumbel-Hougaard uses the
/// frailty construction with a positive stable variate of index 1/alpha
/// (Chambers-Mallows-Stuck). This is the oracle the multinomial generator
/// is checked against.
pub fn sample_lifetime_pair<R: Rng + ?Sized>(sc: &SimScenario, x: f64, rng: &mut R) -> (f64, f64) {
    let alpha = copulas::link_alpha(sc.copula, sc.theta_true, x);
    let (u, v) = match sc.copula {
        CopulaFamily::Frank => {
            let u: f64 = rng.random();
            if alpha == 0.0 {
                (u, rng.random())
            } else {
                let p: f64 = rng.random();
                (u, frank_conditional_v(alpha, u, p))
            }
        }
        CopulaFamily::GumbelHougaard => {
            if alpha == 1.0 {
                (rng.random(), rng.random())
            } else {
                let a = 1.0 / alpha;
                let theta = loop {
                    let t: f64 = rng.random_range(0.0..std::f64::consts::PI);
                    if t > 0.0 {
                        break t;
                    }
                };
                let w: f64 = rng.sample(Exp1);
                let s = (a * theta).sin() / theta.sin().powf(1.0 / a)
                    * (((1.0 - a) * theta).sin() / w).powf((1.0 - a) / a);
                let e1: f64 = rng.sample(Exp1);
                let e2: f64 = rng.sample(Exp1);
                ((-(e1 / s).powf(a)).exp(), (-(e2 / s).powf(a)).exp())
            }
        }
    };
    (
        marginal_quantile(&sc.marginal, FailureMode::Mode1, u, x),
        marginal_quantile(&sc.marginal, FailureMode::Mode2, v, x),
    )
}

/// Applies the contamination transform at the highest-exposure condition
/// (largest inspection time, largest stress):
/// (n0, n1, n2, n12) becomes (n0, n1, n2 + n12, 0). Joint failures are
/// relabeled as mode-2-only, so the cell total and the mode-2 margin are
/// conserved while the dependence signal is destroyed.
pub fn contaminate(ds: &OneShotDataset, sc: &SimScenario) -> Result<OneShotDataset> {
    let target_it = sc
        .inspection_times
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let target_x = sc
        .stresses
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut cells = ds.cells().to_vec();
    let mut found = false;
    for (cond, counts) in &mut cells {
        if cond.inspection_time == target_it && cond.stress == target_x {
            *counts = CellCounts::new(counts.n0, counts.n1, counts.n2 + counts.n12, 0);
            found = true;
        }
    }
    if !found {
        return Err(Error::MissingCell(format!(
            "contamination target (it={target_it}, x={target_x}) not in dataset"
        )));
    }
    Ok(OneShotDataset::new(cells))
}

/// Counter-derived per-replication seed (SplitMix64 finalizer), so
/// replications are independent of execution order.
fn derive_seed(seed: u64, replication: u64) -> u64 {
    let mut z = seed ^ replication.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn add(&mut self, value: f64) {
        let y = value - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Runs the full study: `replications` independent datasets, each fitted
/// at every tuning parameter in `betas`, means accumulated per beta.
///
/// Replications run in parallel but results are reduced in replication
/// order with compensated summation, so the output is bit-identical for
/// any thread count. Replications whose fit does not converge (or errors)
/// are excluded from the means and counted.
pub fn monte_carlo(
    sc: &SimScenario,
    betas: &[f64],
    replications: u64,
    seed: u64,
) -> Result<MCSummary> {
    sc.validate()?;
    if replications == 0 {
        return Err(Error::Domain("replications must be >= 1".to_string()));
    }
    if betas.is_empty() {
        return Err(Error::Domain(
            "at least one tuning parameter is required".to_string(),
        ));
    }
    for &beta in betas {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::Domain(format!(
                "beta must be a finite nonnegative real, got {beta}"
            )));
        }
    }
    let x0 = sc.normal_stress_x0;
    let alpha0 = copulas::link_alpha(sc.copula, sc.theta_true, x0);
    let truth = TrueDependence {
        a0: sc.theta_true.a0,
        a1: sc.theta_true.a1,
        alpha0,
        tau0: copulas::copula_tau(sc.copula, alpha0)?,
        x0,
    };

    // (a0, a1, alpha0, tau0) per beta, or None when the fit is excluded.
    let per_rep: Vec<Vec<Option<[f64; 4]>>> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let rows = match simulate_dataset(sc, derive_seed(seed, rep)) {
                Ok(ds) => betas
                    .iter()
                    .map(|&beta| {
                        let result = fit(&ds, sc.copula, &FitConfig::for_beta(beta));
                        match result {
                            Ok(r) if r.converged => {
                                let a0_hat =
                                    copulas::link_alpha(sc.copula, r.theta_hat, x0);
                                match copulas::copula_tau(sc.copula, a0_hat) {
                                    Ok(tau) => Some([
                                        r.theta_hat.a0,
                                        r.theta_hat.a1,
                                        a0_hat,
                                        tau,
                                    ]),
                                    Err(_) => None,
                                }
                            }
                            _ => None,
                        }
                    })
                    .collect(),
                Err(_) => vec![None; betas.len()],
            };
            rows
        })
        .collect();

    let mut rows = Vec::with_capacity(betas.len());
    for (b, &beta) in betas.iter().enumerate() {
        let mut sums = [Kahan::default(); 4];
        let mut converged = 0u64;
        for rep in &per_rep {
            if let Some(values) = rep[b] {
                for (acc, v) in sums.iter_mut().zip(values) {
                    acc.add(v);
                }
                converged += 1;
            }
        }
        let denom = if converged > 0 {
            converged as f64
        } else {
            f64::NAN
        };
        rows.push(MCRow {
            beta,
            mean_a0: sums[0].sum / denom,
            mean_a1: sums[1].sum / denom,
            mean_alpha0: sums[2].sum / denom,
            mean_tau0: sums[3].sum / denom,
            converged_replications: converged,
            failed_replications: replications - converged,
        });
    }

    Ok(MCSummary {
        seed,
        replications,
        truth,
        rows,
    })
}

/// The study designs used throughout: three stress levels (30, 40, 50),
/// four inspection times (5, 10, 15, 20), normal stress 25, and one of six
/// named copula/marginal combinations. Defaults: k_star = 100, no
/// contamination; callers override both.
pub fn builtin_scenario(name: &str) -> Result<SimScenario> {
    let weibull = MarginalModel {
        family: MarginalFamily::Weibull,
        s0: 3.5,
        s1: -0.02,
        r0_mode1: 2.0,
        r0_mode2: 2.1,
        r1: -0.03,
    };
    let gamma = MarginalModel {
        family: MarginalFamily::Gamma,
        s0: -0.3,
        s1: 0.04,
        r0_mode1: 3.6,
        r0_mode2: 3.8,
        r1: -0.06,
    };
    let (marginal, copula, theta_true) = match name {
        "gh-weibull" => (weibull, CopulaFamily::GumbelHougaard, ThetaVector::new(-2.0, 0.02)),
        "gh-gamma" => (gamma, CopulaFamily::GumbelHougaard, ThetaVector::new(-2.0, 0.02)),
        "frank-pos-weibull" => (weibull, CopulaFamily::Frank, ThetaVector::new(1.0, 0.02)),
        "frank-pos-gamma" => (gamma, CopulaFamily::Frank, ThetaVector::new(1.0, 0.02)),
        "frank-neg-weibull" => (weibull, CopulaFamily::Frank, ThetaVector::new(-1.0, -0.02)),
        "frank-neg-gamma" => (gamma, CopulaFamily::Frank, ThetaVector::new(-1.0, -0.02)),
        other => {
            return Err(Error::InvalidScenario(format!(
                "unknown builtin scenario '{other}'"
            )))
        }
    };
    Ok(SimScenario {
        stresses: vec![30.0, 40.0, 50.0],
        inspection_times: vec![5.0, 10.0, 15.0, 20.0],
        k_star: 100,
        marginal,
        copula,
        theta_true,
        contaminate: false,
        normal_stress_x0: 25.0,
    })
}

/// Names accepted by [`builtin_scenario`], in canonical order.
pub const BUILTIN_SCENARIOS: [&str; 6] = [
    "gh-weibull",
    "gh-gamma",
    "frank-pos-weibull",
    "frank-pos-gamma",
    "frank-neg-weibull",
    "frank-neg-gamma",
];
