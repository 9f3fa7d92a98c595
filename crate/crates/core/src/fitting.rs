//! Maximum-likelihood fits of a model class to a count table.
//!
//! The training error of a behavior `p` against frequencies `f` is the
//! setting-weighted relative entropy
//! `Σ_xy w_xy Σ_ab [f log(f/p̃) - f + p̃]`, with `p̃ = max(p, 1e-12)`. When
//! no cell is clamped the extra `-f + p̃` terms cancel per setting and the
//! value is exactly `Σ w Σ f log(f/p)`; when cells are clamped they keep
//! every term nonnegative.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bell::{chsh_max, frequencies, ns_delta, Behavior, DataTable, EmpiricalFrequencies};
use crate::error::{Error, Result};
use crate::models::{self, Constraint, ModelClass, ModelSpec, ParamVector};
use crate::optim::{self, Options};
use crate::qmath::{jacobi, pt_b, C64, M4};
use crate::rng::{substream, TAG_RESTART};

/// Lower clamp on model probabilities inside the loss.
pub const PROB_FLOOR: f64 = 1e-12;
/// Certification threshold on the partial-transpose eigenvalue in PPT mode.
pub const PPT_CERTIFY_TOL: f64 = 1e-6;
/// Scale of the random restart initialisation.
const INIT_SCALE: f64 = 0.5;
/// Finite-difference step of [`gradient_check`].
const FD_STEP: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub step_tol: f64,
    pub loss_tol: f64,
    /// Penalty weights `μ` used in turn by PPT-constrained fits.
    pub penalty_weight_schedule: Vec<f64>,
    pub seed: u64,
    /// Error differences at or below this are treated as ties by the
    /// overfitting verdict.
    pub tie_tolerance: f64,
    /// qCC only: add one start at the (approximate) two-qubit realisation of
    /// the best cCC fit, after the random restarts.
    pub nested_warm_start: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            restarts: 16,
            max_iters: 4000,
            step_tol: 1e-10,
            loss_tol: 1e-11,
            penalty_weight_schedule: vec![10.0, 100.0, 1000.0],
            seed: 0,
            tie_tolerance: 1e-8,
            nested_warm_start: true,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts < 1 {
            return Err(Error::invalid("fit config", "restarts must be at least 1"));
        }
        if !(self.step_tol >= 0.0 && self.loss_tol >= 0.0 && self.tie_tolerance >= 0.0) {
            return Err(Error::invalid("fit config", "tolerances must be nonnegative"));
        }
        let schedule = &self.penalty_weight_schedule;
        if schedule.is_empty()
            || schedule.iter().any(|m| !(m.is_finite() && *m > 0.0))
            || schedule.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::invalid(
                "fit config",
                "penalty schedule must be positive and strictly increasing",
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub spec: ModelSpec,
    pub config: FitConfig,
    pub best_theta: ParamVector,
    /// Relative entropy per trial (nats).
    pub train_error: f64,
    pub fitted_behavior: Behavior,
    pub fitted_ns_delta: f64,
    pub fitted_chsh_max: f64,
    /// Starts (random restarts plus any warm start) that stopped on a
    /// convergence criterion rather than the iteration cap.
    pub restarts_converged: usize,
    /// Index of the winning start; the warm start, if any, comes last.
    pub best_restart: usize,
    /// Smallest eigenvalue of the fitted state's partial transpose (qCC only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ppt_min_eigenvalue: Option<f64>,
}

/// Per-cell contribution and derivative of the loss.
#[inline]
fn cell_term(f: f64, p: f64) -> (f64, f64) {
    let pc = p.max(PROB_FLOOR);
    let value = if f > 0.0 { f * libm::log(f / pc) - f + pc } else { pc };
    let slope = if p > PROB_FLOOR { 1.0 - f / pc } else { 0.0 };
    (value, slope)
}

/// Setting-weighted relative entropy of `b` from the frequencies `f`.
pub fn loss(f: &EmpiricalFrequencies, b: &Behavior) -> f64 {
    loss_and_slope(f, b, None)
}

fn loss_and_slope(f: &EmpiricalFrequencies, b: &Behavior, mut dp: Option<&mut [f64; 16]>) -> f64 {
    let w = f.weights();
    let fp = f.behavior().cells();
    let bp = b.cells();
    let mut total = 0.0;
    for i in 0..16 {
        let ws = w[i / 4];
        let (v, s) = cell_term(fp[i], bp[i]);
        total += ws * v;
        if let Some(d) = dp.as_deref_mut() {
            d[i] = ws * s;
        }
    }
    total.max(0.0)
}

/// Smallest eigenvalue of `ρ^{T_B}` and its eigenvector.
fn pt_min_eig(rho: &M4) -> (f64, [C64; 4]) {
    let (vals, vecs) = jacobi(4, &pt_b(rho));
    let k = (0..4).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap_or(0);
    (vals[k], [vecs[k], vecs[4 + k], vecs[8 + k], vecs[12 + k]])
}

/// Loss (plus the PPT penalty with weight `mu`) and its chart gradient.
fn objective(spec: &ModelSpec, f: &EmpiricalFrequencies, mu: Option<f64>, theta: &[f64], grad: &mut [f64]) -> f64 {
    let b = models::forward(spec, theta);
    let mut dp = [0.0; 16];
    let mut value = loss_and_slope(f, &b, Some(&mut dp));
    let mut extra = None;
    if let Some(mu) = mu {
        let rho = models::qcc_rho(theta);
        let (lambda, v) = pt_min_eig(&rho);
        if lambda < 0.0 {
            value += mu * lambda * lambda;
            // dλ = Tr[(v v†)^{T_B} dρ]
            let mut vv = [C64::new(0.0, 0.0); 16];
            for i in 0..4 {
                for j in 0..4 {
                    vv[i * 4 + j] = v[i] * v[j].conj() * (2.0 * mu * lambda);
                }
            }
            extra = Some(pt_b(&vv));
        }
    }
    models::pullback(spec, theta, &dp, extra.as_ref(), grad);
    value
}

/// Moves a qCC state onto the PPT set by mixing with `I/4` just enough to
/// lift the partial-transpose spectrum to zero.
fn restore_ppt(theta: &mut [f64]) {
    let rho = models::qcc_rho(theta);
    let (lambda, _) = pt_min_eig(&rho);
    if lambda >= 0.0 {
        return;
    }
    let t = -lambda / (0.25 - lambda);
    let mut mixed = rho;
    for (k, z) in mixed.iter_mut().enumerate() {
        *z *= 1.0 - t;
        if k % 5 == 0 {
            *z += t * 0.25;
        }
    }
    models::qcc_set_state(theta, &mixed);
}

fn initial_theta(n: usize, seed: u64, restart: usize) -> Vec<f64> {
    let mut rng = substream(seed, &[TAG_RESTART, restart as u64]);
    (0..n).map(|_| INIT_SCALE * rng.sample::<f64, _>(StandardNormal)).collect()
}

struct Candidate {
    theta: Vec<f64>,
    error: f64,
    converged: bool,
}

fn fit_from(spec: &ModelSpec, f: &EmpiricalFrequencies, cfg: &FitConfig, theta0: Vec<f64>) -> Candidate {
    let opts = Options::new(cfg.max_iters, cfg.step_tol, cfg.loss_tol);
    if spec.constraint != Constraint::Ppt {
        let out = optim::minimize(|t, g| objective(spec, f, None, t, g), theta0, &opts);
        let error = loss(f, &models::forward(spec, &out.x));
        return Candidate {
            converged: out.converged(),
            theta: out.x,
            error,
        };
    }
    let mut theta = theta0;
    let mut converged = true;
    for &mu in &cfg.penalty_weight_schedule {
        let out = optim::minimize(|t, g| objective(spec, f, Some(mu), t, g), theta, &opts);
        converged &= out.converged();
        theta = out.x;
    }
    restore_ppt(&mut theta);
    let error = loss(f, &models::forward(spec, &theta));
    Candidate {
        theta,
        error,
        converged,
    }
}

/// Fits `spec` to `table` and returns the best of `cfg.restarts` local optima
/// (lowest restart index on ties).
pub fn fit(spec: &ModelSpec, table: &DataTable, cfg: &FitConfig) -> Result<FitResult> {
    let f = frequencies(table)?;
    fit_frequencies(spec, &f, cfg)
}

/// [`fit`] on precomputed frequencies.
pub fn fit_frequencies(spec: &ModelSpec, f: &EmpiricalFrequencies, cfg: &FitConfig) -> Result<FitResult> {
    spec.validate()?;
    cfg.validate()?;
    let n = models::param_count(spec);
    let mut starts: Vec<Vec<f64>> = (0..cfg.restarts).map(|k| initial_theta(n, cfg.seed, k)).collect();
    if spec.class == ModelClass::Qcc && cfg.nested_warm_start {
        let inner = FitConfig {
            nested_warm_start: false,
            ..cfg.clone()
        };
        let base = fit_frequencies(&ModelSpec::new(ModelClass::Ccc), f, &inner)?;
        if let Some(theta) = models::approximate_qcc_params(&base.fitted_behavior) {
            starts.push(theta);
        }
    }
    let mut best: Option<(usize, Candidate)> = None;
    let mut restarts_converged = 0;
    for (k, theta0) in starts.into_iter().enumerate() {
        let c = fit_from(spec, f, cfg, theta0);
        restarts_converged += usize::from(c.converged);
        let better = match &best {
            None => true,
            Some((_, b)) => c.error < b.error || (b.error.is_nan() && !c.error.is_nan()),
        };
        if better {
            best = Some((k, c));
        }
    }
    let (best_restart, best) = best.expect("at least one restart");
    let fitted_behavior = models::forward(spec, &best.theta);
    let ppt_min_eigenvalue = (spec.class == ModelClass::Qcc)
        .then(|| pt_min_eig(&models::qcc_rho(&best.theta)).0);
    Ok(FitResult {
        spec: *spec,
        config: cfg.clone(),
        train_error: best.error,
        fitted_ns_delta: ns_delta(&fitted_behavior),
        fitted_chsh_max: chsh_max(&fitted_behavior),
        fitted_behavior,
        best_theta: ParamVector(best.theta),
        restarts_converged,
        best_restart,
        ppt_min_eigenvalue,
    })
}

/// Analytic loss gradient at `theta`.
pub fn loss_gradient(spec: &ModelSpec, theta: &ParamVector, f: &EmpiricalFrequencies) -> Result<Vec<f64>> {
    models::behavior_of(spec, theta)?;
    let mut grad = vec![0.0; theta.len()];
    objective(spec, f, None, &theta.0, &mut grad);
    Ok(grad)
}

/// Largest deviation between the analytic loss gradient and central finite
/// differences, relative to `max(‖g_fd‖∞, 1e-3)`.
pub fn gradient_check(spec: &ModelSpec, theta: &ParamVector, f: &EmpiricalFrequencies) -> Result<f64> {
    let analytic = loss_gradient(spec, theta, f)?;
    let mut probe = theta.0.clone();
    let mut numeric = vec![0.0; probe.len()];
    for i in 0..probe.len() {
        let t0 = probe[i];
        probe[i] = t0 + FD_STEP;
        let up = loss(f, &models::forward(spec, &probe));
        probe[i] = t0 - FD_STEP;
        let down = loss(f, &models::forward(spec, &probe));
        probe[i] = t0;
        numeric[i] = (up - down) / (2.0 * FD_STEP);
    }
    let scale = numeric.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-3);
    let worst = analytic
        .iter()
        .zip(&numeric)
        .fold(0.0f64, |m, (a, n)| m.max((a - n).abs()));
    Ok(worst / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::sample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one_setting(fcells: [f64; 4], bcells: [f64; 4]) -> (EmpiricalFrequencies, Behavior) {
        let mk = |c: [f64; 4]| {
            Behavior::from_fn(|x, y, a, b| if x == 0 && y == 0 { c[2 * a + b] } else { 0.25 }).unwrap()
        };
        (
            EmpiricalFrequencies::exact(&mk(fcells), [1.0, 0.0, 0.0, 0.0]).unwrap(),
            mk(bcells),
        )
    }

    #[test]
    fn loss_examples() {
        let u = Behavior::uniform();
        let f = EmpiricalFrequencies::exact(&u, [0.25; 4]).unwrap();
        assert_eq!(loss(&f, &u), 0.0);

        let (f, b) = one_setting([0.5, 0.5, 0.0, 0.0], [0.25; 4]);
        assert!((loss(&f, &b) - core::f64::consts::LN_2).abs() < 1e-12);

        let (f, b) = one_setting([0.25; 4], [0.5, 0.5, 0.0, 0.0]);
        let value = loss(&f, &b);
        let dominant = 0.5 * libm::log(0.25 / PROB_FLOOR);
        assert!(value.is_finite() && (value - dominant).abs() < 1.0, "{value} vs {dominant}");
    }

    #[test]
    fn config_validation() {
        assert!(FitConfig::default().validate().is_ok());
        let bad = FitConfig {
            penalty_weight_schedule: vec![100.0, 10.0],
            ..FitConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = FitConfig {
            restarts: 0,
            ..FitConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn empty_setting_is_reported() {
        let mut t = DataTable::default();
        t.add(0, 0, 0, 0, 3);
        let err = fit(&ModelSpec::new(ModelClass::Ccc), &t, &FitConfig::default());
        assert!(matches!(err, Err(Error::EmptySetting { .. })));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let table = sample(&Behavior::uniform().mix(&crate::oracles::pr_box(), 0.6), 500, 1);
        let f = frequencies(&table).unwrap();
        for class in [ModelClass::Ccc, ModelClass::Qcc, ModelClass::Csd0, ModelClass::Cce0, ModelClass::Nscc] {
            let spec = ModelSpec::new(class);
            for _ in 0..5 {
                let theta = ParamVector(
                    (0..models::param_count(&spec))
                        .map(|_| rng.sample::<f64, _>(StandardNormal))
                        .collect(),
                );
                let dev = gradient_check(&spec, &theta, &f).unwrap();
                assert!(dev <= 1e-4, "{class:?}: {dev}");
            }
        }
    }

    #[test]
    fn penalty_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = frequencies(&sample(&Behavior::uniform(), 100, 2)).unwrap();
        let spec = ModelSpec::qcc_ppt();
        let mut checked = 0;
        while checked < 3 {
            let theta: Vec<f64> = (0..56).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            if pt_min_eig(&models::qcc_rho(&theta)).0 >= -1e-3 {
                continue;
            }
            checked += 1;
            let mut g = vec![0.0; 56];
            objective(&spec, &f, Some(10.0), &theta, &mut g);
            let mut probe = theta.clone();
            let mut scratch = vec![0.0; 56];
            for i in 0..32 {
                probe[i] = theta[i] + FD_STEP;
                let up = objective(&spec, &f, Some(10.0), &probe, &mut scratch);
                probe[i] = theta[i] - FD_STEP;
                let down = objective(&spec, &f, Some(10.0), &probe, &mut scratch);
                probe[i] = theta[i];
                let fd = (up - down) / (2.0 * FD_STEP);
                assert!((fd - g[i]).abs() <= 1e-5 * fd.abs().max(1.0), "{i}: {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn self_consistent_fit_reaches_zero() {
        let spec = ModelSpec::new(ModelClass::Ccc);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let theta = ParamVector((0..20).map(|_| rng.sample::<f64, _>(StandardNormal)).collect());
        let truth = models::behavior_of(&spec, &theta).unwrap();
        let f = EmpiricalFrequencies::exact(&truth, [0.25; 4]).unwrap();
        let cfg = FitConfig {
            restarts: 4,
            ..FitConfig::default()
        };
        let r = fit_frequencies(&spec, &f, &cfg).unwrap();
        assert!(r.train_error <= 1e-6, "{}", r.train_error);
        assert!(r.fitted_ns_delta <= 1e-10);
    }

    #[test]
    fn ppt_fit_certifies_state() {
        let spec = crate::scenarios::ScenarioSpec::new(crate::scenarios::ScenarioId::Entangled);
        let table = sample(&crate::scenarios::ground_truth(&spec).unwrap(), 2000, 4);
        let cfg = FitConfig {
            restarts: 2,
            ..FitConfig::default()
        };
        let r = fit(&ModelSpec::qcc_ppt(), &table, &cfg).unwrap();
        let lambda = r.ppt_min_eigenvalue.unwrap();
        assert!(lambda >= -PPT_CERTIFY_TOL, "{lambda}");
        assert!(r.fitted_chsh_max <= 2.0 + 1e-6);
    }

    #[test]
    fn fit_is_deterministic() {
        let table = sample(&Behavior::uniform(), 300, 5);
        let cfg = FitConfig {
            restarts: 2,
            ..FitConfig::default()
        };
        let spec = ModelSpec::new(ModelClass::Qcc);
        assert_eq!(fit(&spec, &table, &cfg).unwrap(), fit(&spec, &table, &cfg).unwrap());
    }
}
