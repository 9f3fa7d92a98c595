//! Ground-truth behaviors for the simulated experiments.
//!
//! All quantum scenarios share the measurements `A: Z, X` and
//! `B: (Z ± X)/√2` unless stated otherwise.
//!
//! - `E1-entangled`: `(1 - noise)|Φ+⟩⟨Φ+| + noise·I/4`, CHSH `2√2 (1 - noise)`.
//! - `E2-dephased`: the E1 state after `ρ ↦ ½ρ + ½(X⊗I)ρ(X⊗I)`; separable,
//!   CHSH `√2 (1 - noise)`.
//! - `E3-near-saturation`: the E2 state measured along `cos θ X ± sin θ Z` on
//!   both sides, with `θ` bisected until `chsh_max = 2 - epsilon`.
//! - `E4-signalling`: the E2 behavior with Bob's conditional on `(a, x, y)`
//!   tilted by `exp(±η (-1)^b)` (sign set by `x`), `η` bisected until
//!   `ns_delta = signalling_strength`. Alice's marginals are untouched.
//! - `E5-near-tsirelson`: `w·PR + (1 - w)·uniform` with `4w = 2√2 ∓ epsilon`.

use serde::{Deserialize, Serialize};

use crate::bell::{cell, chsh_max, ns_delta, sample, Behavior, DataTable};
use crate::error::{Error, Result};
use crate::models::born_behavior;
use crate::oracles::{pr_box, TSIRELSON_BOUND};
use crate::qmath::{BinaryPovm, DensityMatrix, C64};
use crate::rng::{derive_seed, TAG_TEST, TAG_TRAIN};

/// Precision required of the E3/E4/E5 tuning searches.
pub const TUNING_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioId {
    #[serde(rename = "E1-entangled")]
    Entangled,
    #[serde(rename = "E2-dephased")]
    Dephased,
    #[serde(rename = "E3-near-saturation")]
    NearSaturation,
    #[serde(rename = "E4-signalling")]
    Signalling,
    #[serde(rename = "E5-near-tsirelson")]
    NearTsirelson,
}

impl ScenarioId {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioId::Entangled => "E1-entangled",
            ScenarioId::Dephased => "E2-dephased",
            ScenarioId::NearSaturation => "E3-near-saturation",
            ScenarioId::Signalling => "E4-signalling",
            ScenarioId::NearTsirelson => "E5-near-tsirelson",
        }
    }
}

fn default_trials() -> u64 {
    10_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: ScenarioId,
    /// White-noise fraction of the quantum state (E1–E4).
    #[serde(default)]
    pub noise: f64,
    /// Shortfall from the Bell bound (E3) or offset from the Tsirelson bound (E5).
    #[serde(default)]
    pub epsilon: f64,
    /// Target `ns_delta` of the truth (E4).
    #[serde(default)]
    pub signalling_strength: f64,
    /// E5 only: place the truth at `2√2 + epsilon` instead of `2√2 - epsilon`.
    #[serde(default)]
    pub above_tsirelson: bool,
    #[serde(default = "default_trials")]
    pub trials_per_setting: u64,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(id: ScenarioId) -> Self {
        ScenarioSpec {
            id,
            noise: 0.0,
            epsilon: 0.0,
            signalling_strength: 0.0,
            above_tsirelson: false,
            trials_per_setting: default_trials(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::invalid("scenario", "noise must lie in [0, 1]"));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid("scenario", "epsilon must be finite and nonnegative"));
        }
        if !(0.0..1.0).contains(&self.signalling_strength) {
            return Err(Error::invalid("scenario", "signalling strength must lie in [0, 1)"));
        }
        if self.trials_per_setting < 1 {
            return Err(Error::invalid("scenario", "trials per setting must be at least 1"));
        }
        Ok(())
    }
}

/// Train and test tables sampled from one truth.
#[derive(Clone, Debug, PartialEq)]
pub struct Generated {
    pub train: DataTable,
    pub test: DataTable,
    pub truth: Behavior,
}

fn phi_plus() -> DensityMatrix {
    let s = core::f64::consts::FRAC_1_SQRT_2;
    let c = |v: f64| C64::new(v, 0.0);
    DensityMatrix::pure(&[c(s), c(0.0), c(0.0), c(s)]).expect("Φ+ is a valid state")
}

fn entangled_state(noise: f64) -> DensityMatrix {
    phi_plus()
        .mix(&DensityMatrix::maximally_mixed(), 1.0 - noise)
        .expect("mixture of states")
}

/// `ρ ↦ ½ρ + ½(X⊗I)ρ(X⊗I)`.
fn dephase_a(rho: &DensityMatrix) -> DensityMatrix {
    let m = rho.matrix();
    // (X⊗I) flips the first qubit: index 2i + k ↦ 2(1 - i) + k
    let flip = |r: usize| r ^ 2;
    let mut out = m.clone();
    for r in 0..4 {
        for c in 0..4 {
            out.set(r, c, (m.get(r, c) + m.get(flip(r), flip(c))) * 0.5);
        }
    }
    DensityMatrix::new(out).expect("dephasing channel preserves states")
}

fn povm(n: [f64; 3]) -> BinaryPovm {
    BinaryPovm::projective(n).expect("unit Bloch vector")
}

fn standard_measurements() -> ([BinaryPovm; 2], [BinaryPovm; 2]) {
    let s = core::f64::consts::FRAC_1_SQRT_2;
    (
        [povm([0.0, 0.0, 1.0]), povm([1.0, 0.0, 0.0])],
        [povm([s, 0.0, s]), povm([-s, 0.0, s])],
    )
}

/// Measurements `cos θ X ± sin θ Z` on both sides.
fn tilted_measurements(theta: f64) -> ([BinaryPovm; 2], [BinaryPovm; 2]) {
    let (c, s) = (libm::cos(theta), libm::sin(theta));
    let pair = || [povm([c, 0.0, s]), povm([c, 0.0, -s])];
    (pair(), pair())
}

/// The quantum state behind E1–E4.
pub fn truth_state(s: &ScenarioSpec) -> Result<Option<DensityMatrix>> {
    s.validate()?;
    Ok(match s.id {
        ScenarioId::Entangled => Some(entangled_state(s.noise)),
        ScenarioId::Dephased | ScenarioId::NearSaturation | ScenarioId::Signalling => {
            Some(dephase_a(&entangled_state(s.noise)))
        }
        ScenarioId::NearTsirelson => None,
    })
}

/// Bisection of a continuous `f` on `[lo, hi]` for `f(t) = target`, where
/// `f(lo)` and `f(hi)` bracket the target.
fn bisect(mut lo: f64, mut hi: f64, target: f64, f: impl Fn(f64) -> f64) -> Result<f64> {
    let (flo, fhi) = (f(lo), f(hi));
    if (flo - target).abs() <= TUNING_TOL {
        return Ok(lo);
    }
    if (fhi - target).abs() <= TUNING_TOL {
        return Ok(hi);
    }
    if (flo - target).signum() == (fhi - target).signum() {
        return Err(Error::UnreachableTarget { target });
    }
    let rising = fhi > flo;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if (fm - target).abs() <= TUNING_TOL {
            return Ok(mid);
        }
        if (fm < target) == rising {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::UnreachableTarget { target })
}

/// Bob's conditional on `(a, x, y)` reweighted by `exp(η_x (-1)^b)` with
/// `η_0 = η`, `η_1 = -η`.
fn tilt(base: &Behavior, eta: f64) -> Behavior {
    let mut p = [0.0; 16];
    for x in 0..2 {
        let e = if x == 0 { eta } else { -eta };
        for y in 0..2 {
            for a in 0..2 {
                let (p0, p1) = (base.get(x, y, a, 0), base.get(x, y, a, 1));
                let (w0, w1) = (p0 * libm::exp(e), p1 * libm::exp(-e));
                let total = w0 + w1;
                if total > 0.0 {
                    p[cell(x, y, a, 0)] = (p0 + p1) * w0 / total;
                    p[cell(x, y, a, 1)] = (p0 + p1) * w1 / total;
                }
            }
        }
    }
    Behavior::from_raw(p)
}

pub fn ground_truth(s: &ScenarioSpec) -> Result<Behavior> {
    s.validate()?;
    let state = truth_state(s)?;
    match s.id {
        ScenarioId::Entangled | ScenarioId::Dephased => {
            let (a, b) = standard_measurements();
            Ok(born_behavior(&state.expect("quantum scenario"), &a, &b))
        }
        ScenarioId::NearSaturation => {
            let rho = state.expect("quantum scenario");
            let target = 2.0 - s.epsilon;
            let value = |theta: f64| {
                let (a, b) = tilted_measurements(theta);
                chsh_max(&born_behavior(&rho, &a, &b))
            };
            let theta = bisect(0.0, core::f64::consts::FRAC_PI_2, target, value)?;
            let (a, b) = tilted_measurements(theta);
            Ok(born_behavior(&rho, &a, &b))
        }
        ScenarioId::Signalling => {
            let (a, b) = standard_measurements();
            let base = born_behavior(&state.expect("quantum scenario"), &a, &b);
            if s.signalling_strength == 0.0 {
                return Ok(base);
            }
            let eta = bisect(0.0, 40.0, s.signalling_strength, |e| ns_delta(&tilt(&base, e)))?;
            Ok(tilt(&base, eta))
        }
        ScenarioId::NearTsirelson => {
            let target = if s.above_tsirelson {
                TSIRELSON_BOUND + s.epsilon
            } else {
                TSIRELSON_BOUND - s.epsilon
            };
            let w = target / 4.0;
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::UnreachableTarget { target });
            }
            Ok(pr_box().mix(&Behavior::uniform(), w))
        }
    }
}

/// Samples independent train and test tables from the truth.
pub fn generate(s: &ScenarioSpec) -> Result<Generated> {
    let truth = ground_truth(s)?;
    Ok(Generated {
        train: sample(&truth, s.trials_per_setting, derive_seed(s.seed, &[TAG_TRAIN])),
        test: sample(&truth, s.trials_per_setting, derive_seed(s.seed, &[TAG_TEST])),
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::{chsh, frequencies};
    use crate::oracles::is_ppt_separable;

    fn spec(id: ScenarioId) -> ScenarioSpec {
        ScenarioSpec::new(id)
    }

    #[test]
    fn entangled_reaches_tsirelson() {
        let b = ground_truth(&spec(ScenarioId::Entangled)).unwrap();
        assert!((chsh_max(&b) - TSIRELSON_BOUND).abs() < 1e-12);
        assert!(ns_delta(&b) < 1e-12);
    }

    #[test]
    fn entangled_violation_threshold() {
        let threshold = 1.0 - core::f64::consts::FRAC_1_SQRT_2;
        for k in 0..=100 {
            let noise = k as f64 / 100.0;
            let b = ground_truth(&ScenarioSpec { noise, ..spec(ScenarioId::Entangled) }).unwrap();
            assert_eq!(chsh_max(&b) > 2.0 + 1e-12, noise < threshold - 1e-12, "noise {noise}");
        }
    }

    #[test]
    fn dephased_is_separable_and_local() {
        for k in 0..=10 {
            let s = ScenarioSpec { noise: k as f64 / 10.0, ..spec(ScenarioId::Dephased) };
            assert!(is_ppt_separable(&truth_state(&s).unwrap().unwrap()));
            let b = ground_truth(&s).unwrap();
            assert!(chsh_max(&b) <= 2.0 && ns_delta(&b) < 1e-12);
        }
        let b = ground_truth(&spec(ScenarioId::Dephased)).unwrap();
        assert!((chsh(&b) - core::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn near_saturation_hits_target() {
        for eps in [0.0, 0.01, 0.3] {
            let b = ground_truth(&ScenarioSpec { epsilon: eps, ..spec(ScenarioId::NearSaturation) }).unwrap();
            assert!((chsh_max(&b) - (2.0 - eps)).abs() <= TUNING_TOL);
        }
        let too_far = ScenarioSpec { noise: 0.5, epsilon: 0.01, ..spec(ScenarioId::NearSaturation) };
        assert!(matches!(ground_truth(&too_far), Err(Error::UnreachableTarget { .. })));
    }

    #[test]
    fn signalling_strength_is_exact() {
        let zero = ground_truth(&spec(ScenarioId::Signalling)).unwrap();
        assert_eq!(zero, ground_truth(&spec(ScenarioId::Dephased)).unwrap());
        for strength in [0.01, 0.1, 0.5] {
            let b = ground_truth(&ScenarioSpec { signalling_strength: strength, ..spec(ScenarioId::Signalling) }).unwrap();
            assert!((ns_delta(&b) - strength).abs() <= TUNING_TOL);
            for x in 0..2 {
                for a in 0..2 {
                    assert!((b.alice_marginal(a, x, 0) - b.alice_marginal(a, x, 1)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn near_tsirelson_weights() {
        let b = ground_truth(&ScenarioSpec { epsilon: TSIRELSON_BOUND - 2.0, ..spec(ScenarioId::NearTsirelson) }).unwrap();
        assert!((chsh_max(&b) - 2.0).abs() < 1e-12);
        let above = ScenarioSpec { epsilon: 0.01, above_tsirelson: true, ..spec(ScenarioId::NearTsirelson) };
        assert!((chsh_max(&ground_truth(&above).unwrap()) - TSIRELSON_BOUND - 0.01).abs() < 1e-12);
        let unreachable = ScenarioSpec { epsilon: 2.0, above_tsirelson: true, ..spec(ScenarioId::NearTsirelson) };
        assert!(ground_truth(&unreachable).is_err());
    }

    #[test]
    fn generation_is_deterministic_and_independent() {
        let s = ScenarioSpec { trials_per_setting: 1000, seed: 7, ..spec(ScenarioId::Dephased) };
        let g1 = generate(&s).unwrap();
        let g2 = generate(&s).unwrap();
        assert_eq!(g1, g2);
        assert_ne!(g1.train, g1.test);
        assert_eq!(g1.train.trials(1, 1), 1000);
    }

    #[test]
    fn dephased_tables_fluctuate_off_no_signalling() {
        let hits = (0..100)
            .filter(|&seed| {
                let s = ScenarioSpec { seed, ..spec(ScenarioId::Dephased) };
                let g = generate(&s).unwrap();
                ns_delta(frequencies(&g.train).unwrap().behavior()) > 0.0
            })
            .count();
        assert!(hits >= 95);
    }

    #[test]
    fn near_saturation_fluctuates_over_the_bound() {
        let hits = (0..200)
            .filter(|&seed| {
                let s = ScenarioSpec { epsilon: 0.01, trials_per_setting: 1000, seed, ..spec(ScenarioId::NearSaturation) };
                let g = generate(&s).unwrap();
                chsh_max(frequencies(&g.train).unwrap().behavior()) > 2.0
            })
            .count();
        assert!(hits as f64 / 200.0 >= 0.1, "{hits}");
    }
}
