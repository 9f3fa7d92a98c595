//! The five causal-model classes of the CHSH scenario.
//!
//! Every class is a smooth map from an unconstrained real vector to a
//! [`Behavior`]. Classical conditionals are charted by logistic / softmax
//! logits, the quantum class by a 4×4 state factor and four spectral effect
//! charts. Parameter layouts:
//!
//! | class  | layout (blocks in order)                                        |
//! |--------|-----------------------------------------------------------------|
//! | `cCC`  | `p(λ)` logits `[d]`, `p(a=0\|x,λ)` `[x][λ]`, `p(b=0\|y,λ)` `[y][λ]` |
//! | `cSD0` | `p(λ)` `[d]`, `p(x=0\|λ)` `[d]`, Alice `[x][λ]`, Bob `[y][λ]`      |
//! | `cCE0` | `p(λ)` `[d]`, Alice `[x][λ]`, `p(b=0\|x,y,λ)` `[x][y][λ]`          |
//! | `qCC`  | factor `g` (32: re/im interleaved, row-major), `E_x` ×2, `F_y` ×2 (6 each) |
//! | `nsCC` | 24 weight logits over [`oracles::enumerate_ns_vertices`]        |

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::bell::{cell, Behavior};
use crate::error::{Error, Result};
use crate::qmath::{
    adj2, effect_m2, effect_params_from_m2, effect_params_near_m2, hermitize4, jacobi, kron2, logistic, mul2, reduce_to_a,
    reduce_to_b, sub2, tr2, unitary_m2, unitary_m2_derivs, BinaryPovm, CMat, DensityMatrix, C64, I2,
    M2, M4,
};

pub const DEFAULT_LATENT_CARDINALITY: usize = 4;
const QCC_PARAMS: usize = 56;
const NSCC_PARAMS: usize = 24;
/// Largest per-cell discrepancy accepted from the cCC → qCC embedding.
pub const EMBEDDING_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelClass {
    /// Common cause, classical parameters.
    #[serde(rename = "cCC")]
    Ccc,
    /// Common cause, quantum parameters (two-qubit state, binary POVMs).
    #[serde(rename = "qCC")]
    Qcc,
    /// Superdeterministic: the latent variable also drives Alice's setting.
    #[serde(rename = "cSD0")]
    Csd0,
    /// Cause-effect: Alice's setting influences Bob's outcome.
    #[serde(rename = "cCE0")]
    Cce0,
    /// Post-quantum common cause: any no-signalling behavior.
    #[serde(rename = "nsCC")]
    Nscc,
}

impl ModelClass {
    pub fn name(self) -> &'static str {
        match self {
            ModelClass::Ccc => "cCC",
            ModelClass::Qcc => "qCC",
            ModelClass::Csd0 => "cSD0",
            ModelClass::Cce0 => "cCE0",
            ModelClass::Nscc => "nsCC",
        }
    }

    pub fn is_classical(self) -> bool {
        matches!(self, ModelClass::Ccc | ModelClass::Csd0 | ModelClass::Cce0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Constraint {
    #[default]
    None,
    /// The fitted state must have a positive partial transpose.
    Ppt,
}

fn default_d() -> usize {
    DEFAULT_LATENT_CARDINALITY
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModelSpec {
    pub class: ModelClass,
    /// Latent cardinality of the classical classes.
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default)]
    pub constraint: Constraint,
}

impl ModelSpec {
    pub fn new(class: ModelClass) -> Self {
        ModelSpec {
            class,
            d: DEFAULT_LATENT_CARDINALITY,
            constraint: Constraint::None,
        }
    }

    pub fn with_cardinality(mut self, d: usize) -> Self {
        self.d = d;
        self
    }

    /// qCC restricted to PPT (separable) states.
    pub fn qcc_ppt() -> Self {
        ModelSpec {
            class: ModelClass::Qcc,
            d: DEFAULT_LATENT_CARDINALITY,
            constraint: Constraint::Ppt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 1 {
            return Err(Error::invalid("model spec", "latent cardinality must be at least 1"));
        }
        if self.constraint == Constraint::Ppt && self.class != ModelClass::Qcc {
            return Err(Error::invalid("model spec", "the ppt constraint applies to qCC only"));
        }
        Ok(())
    }

    /// Short display label, e.g. `cCC`, `cSD0(d=6)`, `qCC+ppt`.
    pub fn label(&self) -> String {
        let mut s = String::from(self.class.name());
        if self.class.is_classical() && self.d != DEFAULT_LATENT_CARDINALITY {
            s.push_str(&format!("(d={})", self.d));
        }
        if self.constraint == Constraint::Ppt {
            s.push_str("+ppt");
        }
        s
    }
}

/// Unconstrained chart coordinates of a model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn param_count(spec: &ModelSpec) -> usize {
    let d = spec.d;
    match spec.class {
        ModelClass::Ccc => 5 * d,
        ModelClass::Csd0 => 6 * d,
        ModelClass::Cce0 => 7 * d,
        ModelClass::Qcc => QCC_PARAMS,
        ModelClass::Nscc => NSCC_PARAMS,
    }
}

pub fn behavior_of(spec: &ModelSpec, theta: &ParamVector) -> Result<Behavior> {
    spec.validate()?;
    let expected = param_count(spec);
    if theta.len() != expected {
        return Err(Error::ChartMismatch {
            expected,
            got: theta.len(),
        });
    }
    if theta.0.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("parameter vector", "non-finite coordinate"));
    }
    Ok(forward(spec, &theta.0))
}

/// Behavior of a valid spec at `theta` (length already checked).
pub(crate) fn forward(spec: &ModelSpec, theta: &[f64]) -> Behavior {
    let p = match spec.class {
        ModelClass::Ccc => ccc_forward(spec.d, theta),
        ModelClass::Csd0 => csd0_forward(spec.d, theta),
        ModelClass::Cce0 => cce0_forward(spec.d, theta),
        ModelClass::Qcc => qcc_forward(&QccParts::new(theta)),
        ModelClass::Nscc => nscc_forward(theta),
    };
    Behavior::from_raw(p)
}

/// Vector-Jacobian product: given `dp = ∂L/∂p`, writes `∂L/∂θ` into `grad`.
/// `rho_grad` adds a direct `∂L/∂ρ` term (qCC only).
pub(crate) fn pullback(
    spec: &ModelSpec,
    theta: &[f64],
    dp: &[f64; 16],
    rho_grad: Option<&M4>,
    grad: &mut [f64],
) {
    match spec.class {
        ModelClass::Ccc => ccc_pullback(spec.d, theta, dp, grad),
        ModelClass::Csd0 => csd0_pullback(spec.d, theta, dp, grad),
        ModelClass::Cce0 => cce0_pullback(spec.d, theta, dp, grad),
        ModelClass::Qcc => qcc_pullback(&QccParts::new(theta), theta, dp, rho_grad, grad),
        ModelClass::Nscc => nscc_pullback(theta, dp, grad),
    }
}

// ---------------------------------------------------------------------------
// Classical classes.

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&l| libm::exp(l - max)).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= total);
    out
}

fn softmax_pullback(probs: &[f64], g: &[f64], out: &mut [f64]) {
    let mean: f64 = probs.iter().zip(g).map(|(p, g)| p * g).sum();
    for k in 0..probs.len() {
        out[k] += probs[k] * (g[k] - mean);
    }
}

/// Adds `w · P(a|α) · P(b|β)` into the four cells of one setting, where `α`
/// and `β` are the probabilities of outcome 0.
#[inline]
fn add_product(p: &mut [f64; 16], x: usize, y: usize, w: f64, alpha: f64, beta: f64) {
    let base = cell(x, y, 0, 0);
    p[base] += w * alpha * beta;
    p[base + 1] += w * alpha * (1.0 - beta);
    p[base + 2] += w * (1.0 - alpha) * beta;
    p[base + 3] += w * (1.0 - alpha) * (1.0 - beta);
}

/// Derivatives of `Σ_ab G_ab P(a|α) P(b|β)` with respect to the weight,
/// `α` and `β`.
#[inline]
fn product_grads(dp: &[f64; 16], x: usize, y: usize, alpha: f64, beta: f64) -> (f64, f64, f64) {
    let base = cell(x, y, 0, 0);
    let g = &dp[base..base + 4];
    let dw = g[0] * alpha * beta
        + g[1] * alpha * (1.0 - beta)
        + g[2] * (1.0 - alpha) * beta
        + g[3] * (1.0 - alpha) * (1.0 - beta);
    let da = (g[0] - g[2]) * beta + (g[1] - g[3]) * (1.0 - beta);
    let db = (g[0] - g[1]) * alpha + (g[2] - g[3]) * (1.0 - alpha);
    (dw, da, db)
}

fn ccc_forward(d: usize, t: &[f64]) -> [f64; 16] {
    let pi = softmax(&t[..d]);
    let mut p = [0.0; 16];
    for l in 0..d {
        for x in 0..2 {
            let alpha = logistic(t[d + x * d + l]);
            for y in 0..2 {
                let beta = logistic(t[3 * d + y * d + l]);
                add_product(&mut p, x, y, pi[l], alpha, beta);
            }
        }
    }
    p
}

fn ccc_pullback(d: usize, t: &[f64], dp: &[f64; 16], grad: &mut [f64]) {
    grad.fill(0.0);
    let pi = softmax(&t[..d]);
    let mut gpi = vec![0.0; d];
    for l in 0..d {
        for x in 0..2 {
            let ia = d + x * d + l;
            let alpha = logistic(t[ia]);
            for y in 0..2 {
                let ib = 3 * d + y * d + l;
                let beta = logistic(t[ib]);
                let (dw, da, db) = product_grads(dp, x, y, alpha, beta);
                gpi[l] += dw;
                grad[ia] += pi[l] * da * alpha * (1.0 - alpha);
                grad[ib] += pi[l] * db * beta * (1.0 - beta);
            }
        }
    }
    softmax_pullback(&pi, &gpi, &mut grad[..d]);
}

fn cce0_forward(d: usize, t: &[f64]) -> [f64; 16] {
    let pi = softmax(&t[..d]);
    let mut p = [0.0; 16];
    for l in 0..d {
        for x in 0..2 {
            let alpha = logistic(t[d + x * d + l]);
            for y in 0..2 {
                let beta = logistic(t[3 * d + (2 * x + y) * d + l]);
                add_product(&mut p, x, y, pi[l], alpha, beta);
            }
        }
    }
    p
}

fn cce0_pullback(d: usize, t: &[f64], dp: &[f64; 16], grad: &mut [f64]) {
    grad.fill(0.0);
    let pi = softmax(&t[..d]);
    let mut gpi = vec![0.0; d];
    for l in 0..d {
        for x in 0..2 {
            let ia = d + x * d + l;
            let alpha = logistic(t[ia]);
            for y in 0..2 {
                let ib = 3 * d + (2 * x + y) * d + l;
                let beta = logistic(t[ib]);
                let (dw, da, db) = product_grads(dp, x, y, alpha, beta);
                gpi[l] += dw;
                grad[ia] += pi[l] * da * alpha * (1.0 - alpha);
                grad[ib] += pi[l] * db * beta * (1.0 - beta);
            }
        }
    }
    softmax_pullback(&pi, &gpi, &mut grad[..d]);
}

/// Log of the logistic function, `-softplus(-t)`.
fn log_logistic(t: f64) -> f64 {
    if t >= 0.0 {
        -libm::log1p(libm::exp(-t))
    } else {
        t - libm::log1p(libm::exp(t))
    }
}

/// Posterior `p(λ | x) ∝ p(λ) p(x | λ)` for both `x`, computed in log space.
fn csd0_posteriors(d: usize, t: &[f64]) -> [Vec<f64>; 2] {
    let z0: Vec<f64> = (0..d).map(|l| t[l] + log_logistic(t[d + l])).collect();
    let z1: Vec<f64> = (0..d).map(|l| t[l] + log_logistic(-t[d + l])).collect();
    [softmax(&z0), softmax(&z1)]
}

fn csd0_forward(d: usize, t: &[f64]) -> [f64; 16] {
    let q = csd0_posteriors(d, t);
    let mut p = [0.0; 16];
    for l in 0..d {
        for x in 0..2 {
            let alpha = logistic(t[2 * d + x * d + l]);
            for y in 0..2 {
                let beta = logistic(t[4 * d + y * d + l]);
                add_product(&mut p, x, y, q[x][l], alpha, beta);
            }
        }
    }
    p
}

fn csd0_pullback(d: usize, t: &[f64], dp: &[f64; 16], grad: &mut [f64]) {
    grad.fill(0.0);
    let q = csd0_posteriors(d, t);
    let mut h = [vec![0.0; d], vec![0.0; d]];
    for l in 0..d {
        for x in 0..2 {
            let ia = 2 * d + x * d + l;
            let alpha = logistic(t[ia]);
            for y in 0..2 {
                let ib = 4 * d + y * d + l;
                let beta = logistic(t[ib]);
                let (dw, da, db) = product_grads(dp, x, y, alpha, beta);
                h[x][l] += dw;
                grad[ia] += q[x][l] * da * alpha * (1.0 - alpha);
                grad[ib] += q[x][l] * db * beta * (1.0 - beta);
            }
        }
    }
    for x in 0..2 {
        let mean: f64 = (0..d).map(|l| q[x][l] * h[x][l]).sum();
        for l in 0..d {
            let gz = q[x][l] * (h[x][l] - mean);
            grad[l] += gz;
            let s = logistic(t[d + l]);
            // d/dv log σ(v) = 1 - σ(v); d/dv log(1 - σ(v)) = -σ(v)
            grad[d + l] += if x == 0 { gz * (1.0 - s) } else { -gz * s };
        }
    }
}

// ---------------------------------------------------------------------------
// No-signalling class.

/// Cell value of no-signalling vertex `k` in the order of
/// [`crate::oracles::enumerate_ns_vertices`].
#[inline]
fn ns_vertex_cell(k: usize, x: usize, y: usize, a: usize, b: usize) -> f64 {
    if k < 16 {
        let (f, g) = (k / 4, k % 4);
        if a == (f >> x) & 1 && b == (g >> y) & 1 {
            1.0
        } else {
            0.0
        }
    } else {
        let v = k - 16;
        let (alpha, beta, gamma) = (v >> 2, (v >> 1) & 1, v & 1);
        if (a ^ b) == ((x & y) ^ (alpha & x) ^ (beta & y) ^ gamma) {
            0.5
        } else {
            0.0
        }
    }
}

fn nscc_forward(t: &[f64]) -> [f64; 16] {
    let w = softmax(&t[..NSCC_PARAMS]);
    let mut p = [0.0; 16];
    for (k, wk) in w.iter().enumerate() {
        for (i, (x, y, a, b)) in crate::bell::cells().enumerate() {
            p[i] += wk * ns_vertex_cell(k, x, y, a, b);
        }
    }
    p
}

fn nscc_pullback(t: &[f64], dp: &[f64; 16], grad: &mut [f64]) {
    grad.fill(0.0);
    let w = softmax(&t[..NSCC_PARAMS]);
    let g: Vec<f64> = (0..NSCC_PARAMS)
        .map(|k| {
            crate::bell::cells()
                .enumerate()
                .map(|(i, (x, y, a, b))| dp[i] * ns_vertex_cell(k, x, y, a, b))
                .sum()
        })
        .collect();
    softmax_pullback(&w, &g, grad);
}

// ---------------------------------------------------------------------------
// Quantum class.

struct QccParts {
    g: M4,
    trace: f64,
    rho: M4,
    /// `E_{0|x}` and `F_{0|y}`.
    alice: [M2; 2],
    bob: [M2; 2],
}

fn effect_block(t: &[f64], start: usize) -> [f64; 6] {
    let mut out = [0.0; 6];
    out.copy_from_slice(&t[start..start + 6]);
    out
}

impl QccParts {
    fn new(t: &[f64]) -> Self {
        let mut g = [C64::new(0.0, 0.0); 16];
        for (k, z) in g.iter_mut().enumerate() {
            *z = C64::new(t[2 * k], t[2 * k + 1]);
        }
        let mut gg = [C64::new(0.0, 0.0); 16];
        for i in 0..4 {
            for j in i..4 {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..4 {
                    acc += g[i * 4 + k] * g[j * 4 + k].conj();
                }
                gg[i * 4 + j] = acc;
                gg[j * 4 + i] = acc.conj();
            }
        }
        let trace: f64 = (0..4).map(|i| gg[i * 5].re).sum::<f64>().max(f64::MIN_POSITIVE);
        let mut rho = gg;
        rho.iter_mut().for_each(|z| *z /= trace);
        hermitize4(&mut rho);
        QccParts {
            g,
            trace,
            rho,
            alice: [effect_m2(&effect_block(t, 32)), effect_m2(&effect_block(t, 38))],
            bob: [effect_m2(&effect_block(t, 44)), effect_m2(&effect_block(t, 50))],
        }
    }
}

fn outcome_effect(e0: &M2, outcome: usize) -> M2 {
    if outcome == 0 {
        *e0
    } else {
        sub2(&I2, e0)
    }
}

fn born_cells(rho: &M4, alice: &[M2; 2], bob: &[M2; 2]) -> [f64; 16] {
    let mut p = [0.0; 16];
    for x in 0..2 {
        for a in 0..2 {
            let sb = reduce_to_b(rho, &outcome_effect(&alice[x], a));
            for y in 0..2 {
                for b in 0..2 {
                    let v = tr2(&mul2(&sb, &outcome_effect(&bob[y], b))).re;
                    p[cell(x, y, a, b)] = v.clamp(0.0, 1.0);
                }
            }
        }
    }
    p
}

fn qcc_forward(parts: &QccParts) -> [f64; 16] {
    born_cells(&parts.rho, &parts.alice, &parts.bob)
}

/// `∂L/∂θ` for one effect chart given `Ξ` with `dL = Tr[Ξ dE]`.
fn effect_pullback(theta: &[f64; 6], xi: &M2) -> [f64; 6] {
    let h = [theta[2], theta[3], theta[4], theta[5]];
    let u = unitary_m2(&h);
    let s = [logistic(theta[0]), logistic(theta[1])];
    let k = mul2(&adj2(&u), &mul2(xi, &u));
    let mut out = [0.0; 6];
    out[0] = k[0].re * s[0] * (1.0 - s[0]);
    out[1] = k[3].re * s[1] * (1.0 - s[1]);
    // the global phase h0 does not move E
    let du = unitary_m2_derivs(&h);
    let ud_adj = {
        // D U†
        let ua = adj2(&u);
        [ua[0] * s[0], ua[1] * s[0], ua[2] * s[1], ua[3] * s[1]]
    };
    for m in 0..3 {
        let term = mul2(xi, &mul2(&du[m], &ud_adj));
        out[3 + m] = 2.0 * tr2(&term).re;
    }
    out
}

fn qcc_pullback(parts: &QccParts, t: &[f64], dp: &[f64; 16], rho_grad: Option<&M4>, grad: &mut [f64]) {
    grad.fill(0.0);
    let zero = C64::new(0.0, 0.0);
    let f_eff = |y: usize, b: usize| outcome_effect(&parts.bob[y], b);
    let e_eff = |x: usize, a: usize| outcome_effect(&parts.alice[x], a);

    // ∂L/∂ρ = Σ_{x,a} E_{a|x} ⊗ (Σ_{y,b} G F_{b|y})
    let mut m: M4 = match rho_grad {
        Some(extra) => *extra,
        None => [zero; 16],
    };
    for x in 0..2 {
        for a in 0..2 {
            let mut fsum = [zero; 4];
            for y in 0..2 {
                for b in 0..2 {
                    let g = dp[cell(x, y, a, b)];
                    let f = f_eff(y, b);
                    for k in 0..4 {
                        fsum[k] += f[k] * g;
                    }
                }
            }
            let kr = kron2(&e_eff(x, a), &fsum);
            for k in 0..16 {
                m[k] += kr[k];
            }
        }
    }

    // Effects: dL = Tr[Ξ_x dE_{0|x}], Ξ_x = Tr_B[ρ (I ⊗ Σ_{y,b} (G_{0b} - G_{1b}) F_{b|y})].
    for x in 0..2 {
        let mut fsum = [zero; 4];
        for y in 0..2 {
            for b in 0..2 {
                let g = dp[cell(x, y, 0, b)] - dp[cell(x, y, 1, b)];
                let f = f_eff(y, b);
                for k in 0..4 {
                    fsum[k] += f[k] * g;
                }
            }
        }
        let xi = reduce_to_a(&parts.rho, &fsum);
        let start = 32 + 6 * x;
        let ge = effect_pullback(&effect_block(t, start), &xi);
        grad[start..start + 6].copy_from_slice(&ge);
    }
    for y in 0..2 {
        let mut esum = [zero; 4];
        for x in 0..2 {
            for a in 0..2 {
                let g = dp[cell(x, y, a, 0)] - dp[cell(x, y, a, 1)];
                let e = e_eff(x, a);
                for k in 0..4 {
                    esum[k] += e[k] * g;
                }
            }
        }
        let psi = reduce_to_b(&parts.rho, &esum);
        let start = 44 + 6 * y;
        let ge = effect_pullback(&effect_block(t, start), &psi);
        grad[start..start + 6].copy_from_slice(&ge);
    }

    // State: dL = (2/t) Re Tr[g† (M - cI) dg], c = Tr[ρ M].
    let c: f64 = (0..4)
        .flat_map(|i| (0..4).map(move |j| (i, j)))
        .map(|(i, j)| (parts.rho[i * 4 + j] * m[j * 4 + i]).re)
        .sum();
    for i in 0..4 {
        m[i * 5] -= c;
    }
    let scale = 2.0 / parts.trace;
    for i in 0..4 {
        for j in 0..4 {
            // K = g† (M - cI); K_ji = Σ_k conj(g_kj) (M - cI)_ki
            let mut kji = zero;
            for k in 0..4 {
                kji += parts.g[k * 4 + j].conj() * m[k * 4 + i];
            }
            grad[2 * (4 * i + j)] = scale * kji.re;
            grad[2 * (4 * i + j) + 1] = -scale * kji.im;
        }
    }
}

/// State of a qCC parameter vector.
pub fn qcc_state(theta: &ParamVector) -> Result<DensityMatrix> {
    if theta.len() != QCC_PARAMS {
        return Err(Error::ChartMismatch {
            expected: QCC_PARAMS,
            got: theta.len(),
        });
    }
    Ok(DensityMatrix::from_m4_unchecked(&QccParts::new(&theta.0).rho))
}

pub(crate) fn qcc_rho(theta: &[f64]) -> M4 {
    QccParts::new(theta).rho
}

/// Replaces the state block of a qCC vector by a factor of `rho`
/// (`g = V √Λ` from its eigendecomposition).
pub(crate) fn qcc_set_state(theta: &mut [f64], rho: &M4) {
    let (vals, vecs) = jacobi(4, rho);
    for i in 0..4 {
        for j in 0..4 {
            let z = vecs[i * 4 + j] * libm::sqrt(vals[j].max(0.0));
            theta[2 * (4 * i + j)] = z.re;
            theta[2 * (4 * i + j) + 1] = z.im;
        }
    }
}

/// Born-rule behavior `Tr[ρ (E_{a|x} ⊗ F_{b|y})]`.
pub fn born_behavior(rho: &DensityMatrix, alice: &[BinaryPovm; 2], bob: &[BinaryPovm; 2]) -> Behavior {
    let a = [alice[0].effect0().to_m2(), alice[1].effect0().to_m2()];
    let b = [bob[0].effect0().to_m2(), bob[1].effect0().to_m2()];
    Behavior::from_raw(born_cells(&rho.matrix().to_m4(), &a, &b))
}

/// Effect-chart coordinates of a smoothed projector onto the +1 eigenspace
/// of `n·σ`: eigenvalues `σ(sharpness)` and `σ(-sharpness)`.
pub fn projective_effect_params(n: [f64; 3], sharpness: f64) -> Result<[f64; 6]> {
    let proj = BinaryPovm::projective(n)?.effect0().to_m2();
    let (hi, lo) = (logistic(sharpness), logistic(-sharpness));
    let e: M2 = [
        proj[0] * (hi - lo) + lo,
        proj[1] * (hi - lo),
        proj[2] * (hi - lo),
        proj[3] * (hi - lo) + lo,
    ];
    effect_params_from_m2(&e).ok_or_else(|| Error::invalid("effect", "sharpness out of range"))
}

/// Assembles a qCC vector from a 4×4 state factor and effect-chart blocks
/// `[E_0, E_1]` (Alice) and `[F_0, F_1]` (Bob).
pub fn qcc_params(g: &CMat, alice: [[f64; 6]; 2], bob: [[f64; 6]; 2]) -> Result<ParamVector> {
    if g.rows() != 4 || g.cols() != 4 {
        return Err(Error::invalid("state factor", "shape must be 4x4"));
    }
    let mut t = vec![0.0; QCC_PARAMS];
    for (k, z) in g.as_slice().iter().enumerate() {
        t[2 * k] = z.re;
        t[2 * k + 1] = z.im;
    }
    for (i, block) in alice.iter().chain(bob.iter()).enumerate() {
        t[32 + 6 * i..38 + 6 * i].copy_from_slice(block);
    }
    Ok(ParamVector(t))
}

// ---------------------------------------------------------------------------
// Inclusion witness and signalling witnesses.

/// A qCC parameter vector with the same behavior as the cCC vector `theta_ccc`.
///
/// The construction steers Bob's qubit: Alice's outcome `(a, x)` prepares the
/// subnormalised qubit state whose statistics under two fixed Bob effects
/// reproduce `p(·, b | x, y)`; a purification of Bob's reduced state together
/// with the pretty-good Alice measurement then realises the assemblage on
/// two qubits. It falls back to steering Alice's qubit with the parties
/// swapped. Behaviors outside both steerable regions return
/// [`Error::NotEmbeddable`].
pub fn embed_ccc_into_qcc(theta_ccc: &ParamVector, d: usize) -> Result<ParamVector> {
    if d != DEFAULT_LATENT_CARDINALITY {
        return Err(Error::UnsupportedCardinality(d));
    }
    let target = behavior_of(&ModelSpec::new(ModelClass::Ccc), theta_ccc)?;
    embed_behavior_into_qcc(&target)
}

/// Two-qubit realisation of a no-signalling behavior by steering, see
/// [`embed_ccc_into_qcc`].
pub fn embed_behavior_into_qcc(target: &Behavior) -> Result<ParamVector> {
    let qcc = ModelSpec::new(ModelClass::Qcc);
    let accept = |theta: ParamVector| -> Option<ParamVector> {
        let got = behavior_of(&qcc, &theta).ok()?;
        (got.max_abs_diff(target) <= EMBEDDING_TOL).then_some(theta)
    };
    if let Some(theta) = steer_bob(target, false).and_then(accept) {
        return Ok(theta);
    }
    steer_bob(&swap_behavior(target), false)
        .map(|t| swap_parties(&t))
        .and_then(accept)
        .ok_or(Error::NotEmbeddable)
}

/// qCC parameters whose behavior approximates `target`: the steering
/// construction with out-of-range steered states pulled back into the Bloch
/// ball. Exact whenever [`embed_behavior_into_qcc`] succeeds.
pub(crate) fn approximate_qcc_params(target: &Behavior) -> Option<Vec<f64>> {
    let qcc = ModelSpec::new(ModelClass::Qcc);
    let candidates = [
        steer_bob(target, true),
        steer_bob(&swap_behavior(target), true).map(|t| swap_parties(&t)),
    ];
    candidates
        .into_iter()
        .flatten()
        .filter_map(|t| {
            let err = behavior_of(&qcc, &t).ok()?.max_abs_diff(target);
            Some((err, t))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, t)| t.0)
}

fn swap_behavior(b: &Behavior) -> Behavior {
    Behavior::from_raw(core::array::from_fn(|i| {
        let (x, y, a, bb) = (i >> 3, (i >> 2) & 1, (i >> 1) & 1, i & 1);
        b.get(y, x, bb, a)
    }))
}

/// Steers Bob's qubit; with `relaxed`, steered states outside the Bloch
/// ball are shrunk onto it and effect spectra are clamped instead of
/// rejected.
fn steer_bob(target: &Behavior, relaxed: bool) -> Option<ParamVector> {
    const SHRINK: f64 = 1.0 - 1e-6;
    const MIN_MASS: f64 = 1e-12;
    const MAX_RADIUS_SQ: f64 = 1.0 - 1e-9;
    // Bob's conditional correlators c_y given Alice's (a, x).
    let mut pa = [[0.0; 2]; 2];
    let mut corr = [[[0.0; 2]; 2]; 2];
    for x in 0..2 {
        for a in 0..2 {
            pa[x][a] = 0.5 * (target.alice_marginal(a, x, 0) + target.alice_marginal(a, x, 1));
            if relaxed {
                pa[x][a] = pa[x][a].max(MIN_MASS);
            } else if !(pa[x][a] > 0.0) {
                return None;
            }
            for y in 0..2 {
                let m = target.alice_marginal(a, x, y);
                corr[x][a][y] = if m > 0.0 {
                    (target.get(x, y, a, 0) - target.get(x, y, a, 1)) / m
                } else {
                    0.0
                };
            }
        }
    }
    // Bob's effects F_{0|y} = ((1 + α_y) I + β_y n_y·σ) / 2 with n_0 = Z, n_1 = X.
    let mut alpha = [0.0; 2];
    let mut beta = [0.0; 2];
    for y in 0..2 {
        let vals = [corr[0][0][y], corr[0][1][y], corr[1][0][y], corr[1][1][y]];
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        alpha[y] = 0.5 * (lo + hi);
        beta[y] = SHRINK * (1.0 - alpha[y].abs());
        if !(beta[y] > 0.0) {
            if !relaxed {
                return None;
            }
            alpha[y] = alpha[y].clamp(-SHRINK, SHRINK);
            beta[y] = SHRINK * (1.0 - alpha[y].abs());
        }
    }
    let zero = C64::new(0.0, 0.0);
    let mut sigma = [[[zero; 4]; 2]; 2];
    for x in 0..2 {
        for a in 0..2 {
            let mut rz = (corr[x][a][0] - alpha[0]) / beta[0];
            let mut rx = (corr[x][a][1] - alpha[1]) / beta[1];
            let r2 = rz * rz + rx * rx;
            if r2 >= MAX_RADIUS_SQ {
                if !relaxed {
                    return None;
                }
                let k = libm::sqrt(MAX_RADIUS_SQ / r2);
                rz *= k;
                rx *= k;
            }
            let w = 0.5 * pa[x][a];
            sigma[x][a] = [
                C64::new(w * (1.0 + rz), 0.0),
                C64::new(w * rx, 0.0),
                C64::new(w * rx, 0.0),
                C64::new(w * (1.0 - rz), 0.0),
            ];
        }
    }
    let mut rho_b = [zero; 4];
    for x in 0..2 {
        for a in 0..2 {
            for k in 0..4 {
                rho_b[k] += sigma[x][a][k] * 0.5;
            }
        }
    }
    let (vals, vecs) = jacobi(2, &rho_b);
    if !(vals[0] > 1e-300 && vals[1] > 1e-300) {
        return None;
    }
    let spectral = |f: &dyn Fn(f64) -> f64| -> M2 {
        let mut out = [zero; 4];
        for k in 0..2 {
            let fk = f(vals[k]);
            for i in 0..2 {
                for j in 0..2 {
                    out[i * 2 + j] += vecs[i * 2 + k] * vecs[j * 2 + k].conj() * fk;
                }
            }
        }
        out
    };
    let sqrt_rho = spectral(&|v| libm::sqrt(v));
    let inv_sqrt = spectral(&|v| 1.0 / libm::sqrt(v));
    let invert = |m: &M2| {
        if relaxed {
            effect_params_near_m2(m, 1e-13)
        } else {
            effect_params_from_m2(m)
        }
    };

    let mut alice = [[0.0; 6]; 2];
    for x in 0..2 {
        // Alice's effect reproducing σ_{0|x}: (ρ_B^{-1/2} σ ρ_B^{-1/2})^T
        let m = mul2(&inv_sqrt, &mul2(&sigma[x][0], &inv_sqrt));
        let mt: M2 = [m[0], m[2], m[1], m[3]];
        alice[x] = invert(&mt)?;
    }
    let mut bob = [[0.0; 6]; 2];
    for y in 0..2 {
        let (c0, b) = (0.5 * (1.0 + alpha[y]), 0.5 * beta[y]);
        let f: M2 = if y == 0 {
            [C64::new(c0 + b, 0.0), zero, zero, C64::new(c0 - b, 0.0)]
        } else {
            [C64::new(c0, 0.0), C64::new(b, 0.0), C64::new(b, 0.0), C64::new(c0, 0.0)]
        };
        bob[y] = invert(&f)?;
    }
    // |ψ> = (I ⊗ √ρ_B) Σ_i |i i>, i.e. ψ_{2i+k} = (√ρ_B)_{ki}
    let mut g = CMat::zeros(4, 4);
    for i in 0..2 {
        for k in 0..2 {
            g.set(2 * i + k, 0, sqrt_rho[k * 2 + i]);
        }
    }
    qcc_params(&g, alice, bob).ok()
}

/// Exchanges the roles of the two qubits in a qCC vector.
fn swap_parties(theta: &ParamVector) -> ParamVector {
    let t = &theta.0;
    let mut out = t.clone();
    for i in 0..2 {
        for k in 0..2 {
            for col in 0..4 {
                let from = (2 * i + k) * 4 + col;
                let to = (2 * k + i) * 4 + col;
                out[2 * to] = t[2 * from];
                out[2 * to + 1] = t[2 * from + 1];
            }
        }
    }
    out[32..44].copy_from_slice(&t[44..56]);
    out[44..56].copy_from_slice(&t[32..44]);
    ParamVector(out)
}

/// Saturation used for deterministic classical responses.
const SATURATED: f64 = 30.0;

/// Parameters of a structurally radical class whose behavior signals:
/// `cCE0` with Bob's outcome copying Alice's setting, or `cSD0` whose latent
/// parity fixes both Alice's setting and Bob's outcome.
pub fn witness_signalling_params(class: ModelClass) -> Result<ParamVector> {
    let d = DEFAULT_LATENT_CARDINALITY;
    match class {
        ModelClass::Cce0 => {
            let mut t = vec![0.0; 7 * d];
            for x in 0..2 {
                for y in 0..2 {
                    for l in 0..d {
                        t[3 * d + (2 * x + y) * d + l] = if x == 0 { SATURATED } else { -SATURATED };
                    }
                }
            }
            Ok(ParamVector(t))
        }
        ModelClass::Csd0 => {
            let mut t = vec![0.0; 6 * d];
            for l in 0..d {
                let even = if l % 2 == 0 { SATURATED } else { -SATURATED };
                t[d + l] = even;
                for y in 0..2 {
                    t[4 * d + y * d + l] = even;
                }
            }
            Ok(ParamVector(t))
        }
        other => Err(Error::invalid(
            "model class",
            format!("{} cannot signal", other.name()),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::{chsh, chsh_max, ns_delta};
    use crate::oracles;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_theta(spec: &ModelSpec, rng: &mut ChaCha8Rng, scale: f64) -> ParamVector {
        ParamVector(
            (0..param_count(spec))
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect(),
        )
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(param_count(&ModelSpec::new(ModelClass::Ccc)), 20);
        assert_eq!(param_count(&ModelSpec::new(ModelClass::Csd0)), 24);
        assert_eq!(param_count(&ModelSpec::new(ModelClass::Cce0)), 28);
        assert_eq!(param_count(&ModelSpec::new(ModelClass::Qcc)), 56);
        assert_eq!(param_count(&ModelSpec::new(ModelClass::Nscc)), 24);
    }

    #[test]
    fn spec_validation() {
        assert!(ModelSpec::new(ModelClass::Ccc).with_cardinality(0).validate().is_err());
        let bad = ModelSpec {
            constraint: Constraint::Ppt,
            ..ModelSpec::new(ModelClass::Ccc)
        };
        assert!(bad.validate().is_err());
        assert!(ModelSpec::qcc_ppt().validate().is_ok());
        assert_eq!(ModelSpec::qcc_ppt().label(), "qCC+ppt");
    }

    #[test]
    fn wrong_length_is_a_chart_mismatch() {
        let err = behavior_of(&ModelSpec::new(ModelClass::Ccc), &ParamVector(vec![0.0; 3]));
        assert_eq!(err, Err(Error::ChartMismatch { expected: 20, got: 3 }));
    }

    #[test]
    fn zero_logits_give_uniform_ccc() {
        let spec = ModelSpec::new(ModelClass::Ccc);
        let b = behavior_of(&spec, &ParamVector(vec![0.0; 20])).unwrap();
        assert!(b.max_abs_diff(&Behavior::uniform()) < 1e-15);
    }

    #[test]
    fn nscc_vertex_order_matches_oracles() {
        let set = oracles::enumerate_ns_vertices();
        for (k, v) in set.vertices.iter().enumerate() {
            for (x, y, a, b) in crate::bell::cells() {
                assert_eq!(ns_vertex_cell(k, x, y, a, b), v.get(x, y, a, b));
            }
        }
    }

    #[test]
    fn nscc_on_pr_vertex() {
        let mut t = vec![-40.0; 24];
        t[16] = 40.0;
        let b = behavior_of(&ModelSpec::new(ModelClass::Nscc), &ParamVector(t)).unwrap();
        assert!((chsh(&b) - 4.0).abs() < 1e-12);
        assert!(ns_delta(&b) < 1e-15);
    }

    #[test]
    fn qcc_on_bell_state_reaches_tsirelson() {
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let mut g = CMat::zeros(4, 4);
        g.set(0, 0, C64::new(s, 0.0));
        g.set(3, 0, C64::new(s, 0.0));
        let sharp = 25.0;
        let alice = [
            projective_effect_params([0.0, 0.0, 1.0], sharp).unwrap(),
            projective_effect_params([1.0, 0.0, 0.0], sharp).unwrap(),
        ];
        let bob = [
            projective_effect_params([s, 0.0, s], sharp).unwrap(),
            projective_effect_params([-s, 0.0, s], sharp).unwrap(),
        ];
        let theta = qcc_params(&g, alice, bob).unwrap();
        let b = behavior_of(&ModelSpec::new(ModelClass::Qcc), &theta).unwrap();
        assert!((chsh(&b) - 2.0 * core::f64::consts::SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn csd0_with_flat_settings_matches_ccc() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ccc = random_theta(&ModelSpec::new(ModelClass::Ccc), &mut rng, 1.0);
        let d = 4;
        let mut t = vec![0.0; 6 * d];
        t[..d].copy_from_slice(&ccc.0[..d]);
        for l in 0..d {
            t[d + l] = 0.7;
        }
        t[2 * d..6 * d].copy_from_slice(&ccc.0[d..5 * d]);
        let b_sd = behavior_of(&ModelSpec::new(ModelClass::Csd0), &ParamVector(t)).unwrap();
        let b_cc = behavior_of(&ModelSpec::new(ModelClass::Ccc), &ccc).unwrap();
        assert!(b_sd.max_abs_diff(&b_cc) < 1e-14);
        assert!(ns_delta(&b_sd) < 1e-14);
    }

    #[test]
    fn signalling_witnesses() {
        let ce = behavior_of(
            &ModelSpec::new(ModelClass::Cce0),
            &witness_signalling_params(ModelClass::Cce0).unwrap(),
        )
        .unwrap();
        assert!((ns_delta(&ce) - 1.0).abs() < 1e-9);
        let sd = behavior_of(
            &ModelSpec::new(ModelClass::Csd0),
            &witness_signalling_params(ModelClass::Csd0).unwrap(),
        )
        .unwrap();
        assert!(ns_delta(&sd) >= 0.1);
        assert!(witness_signalling_params(ModelClass::Ccc).is_err());
    }

    #[test]
    fn embedding_examples() {
        let uniform = embed_ccc_into_qcc(&ParamVector(vec![0.0; 20]), 4).unwrap();
        let b = behavior_of(&ModelSpec::new(ModelClass::Qcc), &uniform).unwrap();
        assert!(b.max_abs_diff(&Behavior::uniform()) < 1e-9);

        // deterministic vertex: λ concentrated on 0, Alice a = x, Bob b = 1
        let mut t = vec![0.0; 20];
        t[0] = 30.0;
        for l in 0..4 {
            t[4 + l] = 30.0; // x = 0 → a = 0
            t[8 + l] = -30.0; // x = 1 → a = 1
            t[12 + l] = -30.0;
            t[16 + l] = -30.0;
        }
        let ccc = ParamVector(t);
        let target = behavior_of(&ModelSpec::new(ModelClass::Ccc), &ccc).unwrap();
        let q = embed_ccc_into_qcc(&ccc, 4).unwrap();
        let got = behavior_of(&ModelSpec::new(ModelClass::Qcc), &q).unwrap();
        assert!(got.max_abs_diff(&target) < 1e-9);

        assert_eq!(embed_ccc_into_qcc(&ParamVector(vec![0.0; 15]), 3), Err(Error::UnsupportedCardinality(3)));
    }

    #[test]
    fn images_respect_their_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let spec = ModelSpec::new(ModelClass::Ccc);
            let b = behavior_of(&spec, &random_theta(&spec, &mut rng, 2.0)).unwrap();
            assert!(chsh_max(&b) <= 2.0 + 1e-9 && ns_delta(&b) <= 1e-12);
            let spec = ModelSpec::new(ModelClass::Qcc);
            let b = behavior_of(&spec, &random_theta(&spec, &mut rng, 1.0)).unwrap();
            assert!(chsh_max(&b) <= oracles::TSIRELSON_BOUND + 1e-9 && ns_delta(&b) <= 1e-12);
        }
    }
}
