//! Dense complex matrices for one- and two-qubit operators.
//!
//! Everything here is sized for dimension 2 and 4. [`CMat`] is the general
//! carrier used at API boundaries; the fitting hot path works on the fixed
//! size arrays [`M2`] and [`M4`] (row-major) to avoid allocation.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Tolerance for the state and effect invariants.
pub const INVARIANT_TOL: f64 = 1e-10;
/// Tolerance for decomposition residuals.
pub const DECOMPOSITION_TOL: f64 = 1e-8;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Row-major complex matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    /// Builds a matrix from row-major entries; all entries must be finite.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::invalid("matrix", "entry count does not match shape"));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("matrix", "non-finite entry"));
        }
        Ok(CMat { rows, cols, data })
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        CMat::from_vec(rows, cols, data.iter().map(|&r| C64::new(r, 0.0)).collect())
    }

    pub fn diag(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut m = CMat::zeros(n, n);
        for (i, &e) in entries.iter().enumerate() {
            m.data[i * n + i] = C64::new(e, 0.0);
        }
        m
    }

    /// Column vector.
    pub fn column(entries: &[C64]) -> Self {
        CMat {
            rows: entries.len(),
            cols: 1,
            data: entries.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, z: C64) {
        self.data[i * self.cols + j] = z;
    }

    pub fn col(&self, j: usize) -> CMat {
        CMat::column(&(0..self.rows).map(|i| self.get(i, j)).collect::<Vec<_>>())
    }

    pub fn adjoint(&self) -> CMat {
        let mut out = CMat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.get(i, j).conj();
            }
        }
        out
    }

    /// Matrix product. Panics on a shape mismatch.
    pub fn matmul(&self, rhs: &CMat) -> CMat {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = CMat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.get(k, j);
                }
            }
        }
        out
    }

    pub fn add(&self, rhs: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, rhs: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> CMat {
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    /// Largest entrywise modulus of `self - rhs`.
    pub fn max_abs_diff(&self, rhs: &CMat) -> f64 {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest entrywise modulus of `self - self†`.
    pub fn hermitian_defect(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        self.max_abs_diff(&self.adjoint())
    }

    pub(crate) fn to_m2(&self) -> M2 {
        debug_assert_eq!((self.rows, self.cols), (2, 2));
        [self.data[0], self.data[1], self.data[2], self.data[3]]
    }

    pub(crate) fn to_m4(&self) -> M4 {
        debug_assert_eq!((self.rows, self.cols), (4, 4));
        let mut m = [ZERO; 16];
        m.copy_from_slice(&self.data);
        m
    }

    pub(crate) fn from_m2(m: &M2) -> CMat {
        CMat {
            rows: 2,
            cols: 2,
            data: m.to_vec(),
        }
    }

    pub(crate) fn from_m4(m: &M4) -> CMat {
        CMat {
            rows: 4,
            cols: 4,
            data: m.to_vec(),
        }
    }
}

pub fn pauli_x() -> CMat {
    CMat::from_m2(&[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> CMat {
    CMat::from_m2(&[ZERO, C64::new(0.0, -1.0), C64::new(0.0, 1.0), ZERO])
}

pub fn pauli_z() -> CMat {
    CMat::diag(&[1.0, -1.0])
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut out = CMat::zeros(rows, cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let aij = a.get(i, j);
            for k in 0..b.rows {
                for l in 0..b.cols {
                    out.data[(i * b.rows + k) * cols + j * b.cols + l] = aij * b.get(k, l);
                }
            }
        }
    }
    out
}

/// Eigenpairs of a Hermitian matrix by cyclic Jacobi rotations, ascending
/// eigenvalues, eigenvectors as unit column vectors.
pub fn hermitian_eigs(m: &CMat) -> Result<Vec<(f64, CMat)>> {
    if m.rows != m.cols {
        return Err(Error::invalid("matrix", "eigendecomposition needs a square matrix"));
    }
    let asymmetry = m.hermitian_defect();
    if !(asymmetry <= DECOMPOSITION_TOL) {
        return Err(Error::NonHermitian { asymmetry });
    }
    let n = m.rows;
    let (vals, vecs) = jacobi(n, &m.data);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
    Ok(order
        .into_iter()
        .map(|k| {
            let v: Vec<C64> = (0..n).map(|i| vecs[i * n + k]).collect();
            (vals[k], CMat::column(&v))
        })
        .collect())
}

/// Cyclic Jacobi on a row-major Hermitian `n × n` matrix. Returns unsorted
/// eigenvalues and the eigenvector matrix (eigenvectors in columns).
pub(crate) fn jacobi(n: usize, m: &[C64]) -> (Vec<f64>, Vec<C64>) {
    let mut a = m.to_vec();
    // Symmetrize so tiny input asymmetry does not leak into the rotations.
    for i in 0..n {
        a[i * n + i] = C64::new(a[i * n + i].re, 0.0);
        for j in (i + 1)..n {
            let z = (a[i * n + j] + a[j * n + i].conj()) * 0.5;
            a[i * n + j] = z;
            a[j * n + i] = z.conj();
        }
    }
    let mut v = vec![ZERO; n * n];
    for i in 0..n {
        v[i * n + i] = ONE;
    }
    let scale: f64 = a.iter().map(|z| z.norm_sqr()).sum::<f64>().max(f64::MIN_POSITIVE);
    for _sweep in 0..64 {
        let off: f64 = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j].norm_sqr())
            .sum();
        if off <= 1e-32 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                let mag = apq.norm();
                if mag <= 1e-300 {
                    continue;
                }
                let phase = apq / mag;
                let app = a[p * n + p].re;
                let aqq = a[q * n + q].re;
                let theta = (aqq - app) / (2.0 * mag);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                // J = diag(1, conj(phase)) at (p, q) followed by a real rotation.
                let jpp = C64::new(c, 0.0);
                let jpq = C64::new(s, 0.0);
                let jqp = phase.conj() * (-s);
                let jqq = phase.conj() * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = akp * jpp + akq * jqp;
                    a[k * n + q] = akp * jpq + akq * jqq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = jpp.conj() * apk + jqp.conj() * aqk;
                    a[q * n + k] = jpq.conj() * apk + jqq.conj() * aqk;
                }
                a[p * n + q] = ZERO;
                a[q * n + p] = ZERO;
                a[p * n + p] = C64::new(a[p * n + p].re, 0.0);
                a[q * n + q] = C64::new(a[q * n + q].re, 0.0);
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = vkp * jpp + vkq * jqp;
                    v[k * n + q] = vkp * jpq + vkq * jqq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i * n + i].re).collect(), v)
}

/// A two-qubit state: 4×4 Hermitian, positive semidefinite, unit trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CMat", into = "CMat")]
pub struct DensityMatrix {
    mat: CMat,
}

impl DensityMatrix {
    pub fn new(mat: CMat) -> Result<Self> {
        if mat.rows != 4 || mat.cols != 4 {
            return Err(Error::invalid("density matrix", "shape must be 4x4"));
        }
        let asymmetry = mat.hermitian_defect();
        if asymmetry > INVARIANT_TOL {
            return Err(Error::NonHermitian { asymmetry });
        }
        let tr = mat.trace().re;
        if (tr - 1.0).abs() > INVARIANT_TOL {
            return Err(Error::invalid("density matrix", "trace differs from 1"));
        }
        let min = hermitian_eigs(&mat)?[0].0;
        if min < -INVARIANT_TOL {
            return Err(Error::invalid("density matrix", "negative eigenvalue"));
        }
        Ok(DensityMatrix { mat })
    }

    /// Maximally mixed state `I/4`.
    pub fn maximally_mixed() -> Self {
        DensityMatrix {
            mat: CMat::identity(4).scale(C64::new(0.25, 0.0)),
        }
    }

    /// Projector onto a (normalised on entry) pure state.
    pub fn pure(psi: &[C64; 4]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if !(norm > 1e-300) {
            return Err(Error::DegenerateFactor);
        }
        let v = CMat::column(psi);
        DensityMatrix::new(v.matmul(&v.adjoint()).scale(C64::new(1.0 / norm, 0.0)))
    }

    /// Convex combination `w·self + (1-w)·other`.
    pub fn mix(&self, other: &DensityMatrix, w: f64) -> Result<Self> {
        DensityMatrix::new(
            self.mat
                .scale(C64::new(w, 0.0))
                .add(&other.mat.scale(C64::new(1.0 - w, 0.0))),
        )
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub(crate) fn from_m4_unchecked(m: &M4) -> Self {
        DensityMatrix { mat: CMat::from_m4(m) }
    }
}

impl TryFrom<CMat> for DensityMatrix {
    type Error = Error;
    fn try_from(m: CMat) -> Result<Self> {
        DensityMatrix::new(m)
    }
}

impl From<DensityMatrix> for CMat {
    fn from(d: DensityMatrix) -> CMat {
        d.mat
    }
}

/// Two-outcome qubit measurement; `effect1 = I - effect0`.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryPovm {
    effect0: CMat,
}

impl BinaryPovm {
    pub fn new(effect0: CMat) -> Result<Self> {
        if effect0.rows != 2 || effect0.cols != 2 {
            return Err(Error::invalid("effect", "shape must be 2x2"));
        }
        let asymmetry = effect0.hermitian_defect();
        if asymmetry > INVARIANT_TOL {
            return Err(Error::NonHermitian { asymmetry });
        }
        let eigs = hermitian_eigs(&effect0)?;
        if eigs[0].0 < -INVARIANT_TOL || eigs[1].0 > 1.0 + INVARIANT_TOL {
            return Err(Error::invalid("effect", "eigenvalues outside [0, 1]"));
        }
        Ok(BinaryPovm { effect0 })
    }

    /// Projective measurement along a Bloch direction; outcome 0 is the +1
    /// eigenspace of `n·σ`.
    pub fn projective(n: [f64; 3]) -> Result<Self> {
        let len = libm::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
        if !(len > 0.0) {
            return Err(Error::invalid("effect", "zero Bloch direction"));
        }
        let (x, y, z) = (n[0] / len, n[1] / len, n[2] / len);
        BinaryPovm::new(CMat::from_m2(&[
            C64::new(0.5 * (1.0 + z), 0.0),
            C64::new(0.5 * x, -0.5 * y),
            C64::new(0.5 * x, 0.5 * y),
            C64::new(0.5 * (1.0 - z), 0.0),
        ]))
    }

    pub fn effect0(&self) -> &CMat {
        &self.effect0
    }

    pub fn effect(&self, outcome: usize) -> CMat {
        match outcome {
            0 => self.effect0.clone(),
            _ => CMat::identity(2).sub(&self.effect0),
        }
    }

    pub(crate) fn from_m2_unchecked(m: &M2) -> Self {
        BinaryPovm {
            effect0: CMat::from_m2(m),
        }
    }
}

/// Transposes the second tensor factor of a two-qubit operator.
pub fn partial_transpose_b(rho: &DensityMatrix) -> CMat {
    CMat::from_m4(&pt_b(&rho.mat.to_m4()))
}

/// `g g† / Tr(g g†)` for a 4×4 factor.
pub fn state_from_factor(g: &CMat) -> Result<DensityMatrix> {
    if g.rows != 4 || g.cols != 4 {
        return Err(Error::invalid("state factor", "shape must be 4x4"));
    }
    let gg = g.matmul(&g.adjoint());
    let tr = gg.trace().re;
    if !(tr >= 1e-300) || !tr.is_finite() {
        return Err(Error::DegenerateFactor);
    }
    let mut m = gg.scale(C64::new(1.0 / tr, 0.0)).to_m4();
    hermitize4(&mut m);
    Ok(DensityMatrix::from_m4_unchecked(&m))
}

/// Binary effect from six unconstrained reals `(t1, t2, h0, h1, h2, h3)`:
/// `effect0 = U diag(σ(t1), σ(t2)) U†` with `U = exp(iH)` and
/// `H = h0·I + h1·X + h2·Y + h3·Z`.
pub fn effect_from_params(theta: &[f64; 6]) -> BinaryPovm {
    BinaryPovm::from_m2_unchecked(&effect_m2(theta))
}

// ---------------------------------------------------------------------------
// Fixed-size kernels.

/// Row-major 2×2 complex matrix.
pub(crate) type M2 = [C64; 4];
/// Row-major 4×4 complex matrix; index `2·a + b` for qubit A ⊗ qubit B.
pub(crate) type M4 = [C64; 16];

pub(crate) const I2: M2 = [ONE, ZERO, ZERO, ONE];

pub(crate) fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + libm::exp(-t))
    } else {
        let e = libm::exp(t);
        e / (1.0 + e)
    }
}

pub(crate) fn mul2(a: &M2, b: &M2) -> M2 {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

pub(crate) fn adj2(a: &M2) -> M2 {
    [a[0].conj(), a[2].conj(), a[1].conj(), a[3].conj()]
}

pub(crate) fn sub2(a: &M2, b: &M2) -> M2 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]]
}

pub(crate) fn tr2(a: &M2) -> C64 {
    a[0] + a[3]
}

pub(crate) fn hermitize4(m: &mut M4) {
    for i in 0..4 {
        m[i * 4 + i] = C64::new(m[i * 4 + i].re, 0.0);
        for j in (i + 1)..4 {
            let z = (m[i * 4 + j] + m[j * 4 + i].conj()) * 0.5;
            m[i * 4 + j] = z;
            m[j * 4 + i] = z.conj();
        }
    }
}

pub(crate) fn pt_b(m: &M4) -> M4 {
    let mut out = [ZERO; 16];
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                for d in 0..2 {
                    // <a b| M^{T_B} |c d> = <a d| M |c b>
                    out[(2 * a + b) * 4 + 2 * c + d] = m[(2 * a + d) * 4 + 2 * c + b];
                }
            }
        }
    }
    out
}

/// `Tr_B[ρ (I ⊗ F)]`, a 2×2 operator on qubit A.
pub(crate) fn reduce_to_a(rho: &M4, f: &M2) -> M2 {
    let mut out = [ZERO; 4];
    for i in 0..2 {
        for j in 0..2 {
            let mut acc = ZERO;
            for k in 0..2 {
                for l in 0..2 {
                    acc += rho[(2 * i + k) * 4 + 2 * j + l] * f[l * 2 + k];
                }
            }
            out[i * 2 + j] = acc;
        }
    }
    out
}

/// `Tr_A[ρ (E ⊗ I)]`, a 2×2 operator on qubit B.
pub(crate) fn reduce_to_b(rho: &M4, e: &M2) -> M2 {
    let mut out = [ZERO; 4];
    for k in 0..2 {
        for l in 0..2 {
            let mut acc = ZERO;
            for i in 0..2 {
                for j in 0..2 {
                    acc += rho[(2 * i + k) * 4 + 2 * j + l] * e[j * 2 + i];
                }
            }
            out[k * 2 + l] = acc;
        }
    }
    out
}

pub(crate) fn kron2(a: &M2, b: &M2) -> M4 {
    let mut out = [ZERO; 16];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[(2 * i + k) * 4 + 2 * j + l] = a[i * 2 + j] * b[k * 2 + l];
                }
            }
        }
    }
    out
}

/// `U = exp(iH)` for `H = h0·I + h·σ`, in closed form.
pub(crate) fn unitary_m2(h: &[f64; 4]) -> M2 {
    let r = libm::sqrt(h[1] * h[1] + h[2] * h[2] + h[3] * h[3]);
    let (c, sinc) = (libm::cos(r), sinc(r));
    let w = su2(c, sinc, [h[1], h[2], h[3]]);
    let ph = C64::new(libm::cos(h[0]), libm::sin(h[0]));
    [w[0] * ph, w[1] * ph, w[2] * ph, w[3] * ph]
}

/// `cos r·I + i·sinc(r)·(v·σ)`.
fn su2(c: f64, s: f64, v: [f64; 3]) -> M2 {
    // v·σ = [[v3, v1 - i v2], [v1 + i v2, -v3]]
    let i = C64::new(0.0, 1.0);
    [
        C64::new(c, 0.0) + i * (s * v[2]),
        i * C64::new(s * v[0], -s * v[1]),
        i * C64::new(s * v[0], s * v[1]),
        C64::new(c, 0.0) - i * (s * v[2]),
    ]
}

pub(crate) fn sinc(r: f64) -> f64 {
    if r < 1e-4 {
        1.0 - r * r / 6.0
    } else {
        libm::sin(r) / r
    }
}

/// `(r cos r - sin r) / r³`, the radial derivative factor of `sinc`.
fn sinc_slope(r: f64) -> f64 {
    if r < 1e-3 {
        -1.0 / 3.0 + r * r / 30.0
    } else {
        (r * libm::cos(r) - libm::sin(r)) / (r * r * r)
    }
}

/// Derivatives `∂U/∂h_k` for `k = 1, 2, 3`.
pub(crate) fn unitary_m2_derivs(h: &[f64; 4]) -> [M2; 3] {
    let v = [h[1], h[2], h[3]];
    let r = libm::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    let s = sinc(r);
    let q = sinc_slope(r);
    let ph = C64::new(libm::cos(h[0]), libm::sin(h[0]));
    let i = C64::new(0.0, 1.0);
    let vs: M2 = [
        C64::new(v[2], 0.0),
        C64::new(v[0], -v[1]),
        C64::new(v[0], v[1]),
        C64::new(-v[2], 0.0),
    ];
    let paulis: [M2; 3] = [
        [ZERO, ONE, ONE, ZERO],
        [ZERO, C64::new(0.0, -1.0), C64::new(0.0, 1.0), ZERO],
        [ONE, ZERO, ZERO, C64::new(-1.0, 0.0)],
    ];
    let mut out = [[ZERO; 4]; 3];
    for k in 0..3 {
        for e in 0..4 {
            let id = if e == 0 || e == 3 { 1.0 } else { 0.0 };
            let dw = C64::new(-s * v[k] * id, 0.0) + i * (vs[e] * (q * v[k]) + paulis[k][e] * s);
            out[k][e] = dw * ph;
        }
    }
    out
}

pub(crate) fn effect_m2(theta: &[f64; 6]) -> M2 {
    let u = unitary_m2(&[theta[2], theta[3], theta[4], theta[5]]);
    let d = [logistic(theta[0]), logistic(theta[1])];
    let ud: M2 = [u[0] * d[0], u[1] * d[1], u[2] * d[0], u[3] * d[1]];
    let mut e = mul2(&ud, &adj2(&u));
    e[0] = C64::new(e[0].re, 0.0);
    e[3] = C64::new(e[3].re, 0.0);
    e[2] = e[1].conj();
    e
}

/// Inverse of the effect chart: parameters reproducing a Hermitian effect
/// whose eigenvalues lie strictly inside (0, 1).
pub(crate) fn effect_params_from_m2(e: &M2) -> Option<[f64; 6]> {
    effect_chart_inverse(e, 0.0)
}

/// Like [`effect_params_from_m2`], but eigenvalues are first clamped into
/// `[floor, 1 - floor]`.
pub(crate) fn effect_params_near_m2(e: &M2, floor: f64) -> Option<[f64; 6]> {
    effect_chart_inverse(e, floor)
}

fn effect_chart_inverse(e: &M2, floor: f64) -> Option<[f64; 6]> {
    let (vals, vecs) = jacobi(2, e);
    let mut out = [0.0; 6];
    for k in 0..2 {
        let ev = if floor > 0.0 { vals[k].clamp(floor, 1.0 - floor) } else { vals[k] };
        if !(ev > 0.0 && ev < 1.0) {
            return None;
        }
        out[k] = libm::log(ev / (1.0 - ev));
    }
    // vecs holds eigenvectors in its columns; write it as e^{iφ}·W with W in SU(2).
    let det = vecs[0] * vecs[3] - vecs[1] * vecs[2];
    let phi = 0.5 * libm::atan2(det.im, det.re);
    let unphase = C64::new(libm::cos(phi), -libm::sin(phi));
    let w: M2 = [vecs[0] * unphase, vecs[1] * unphase, vecs[2] * unphase, vecs[3] * unphase];
    // W = cos r·I + i sin r·(n·σ)
    let cos_r = (0.5 * (w[0] + w[3]).re).clamp(-1.0, 1.0);
    let sx = 0.5 * (w[1] + w[2]).im;
    let sy = 0.5 * (w[1] - w[2]).re;
    let sz = 0.5 * (w[0] - w[3]).im;
    let sin_r = libm::sqrt(sx * sx + sy * sy + sz * sz);
    let r = libm::atan2(sin_r, cos_r);
    let scale = if sin_r > 1e-300 { r / sin_r } else { 1.0 };
    out[2] = phi;
    out[3] = sx * scale;
    out[4] = sy * scale;
    out[5] = sz * scale;
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn kron_identity_and_projectors() {
        assert_eq!(kron(&CMat::identity(2), &CMat::identity(2)), CMat::identity(4));
        let p0 = CMat::diag(&[1.0, 0.0]);
        assert_eq!(kron(&p0, &p0), CMat::diag(&[1.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn kron_x_flips_first_qubit_of_bell_pair() {
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let phi = CMat::column(&[c(s), c(0.0), c(0.0), c(s)]);
        let out = kron(&pauli_x(), &CMat::identity(2)).matmul(&phi);
        // |10> + |01> over sqrt 2
        let expected = CMat::column(&[c(0.0), c(s), c(s), c(0.0)]);
        assert!(out.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn eigs_of_simple_matrices() {
        let e = hermitian_eigs(&CMat::diag(&[3.0, 1.0])).unwrap();
        assert!((e[0].0 - 1.0).abs() < 1e-14 && (e[1].0 - 3.0).abs() < 1e-14);
        let e = hermitian_eigs(&pauli_x()).unwrap();
        assert!((e[0].0 + 1.0).abs() < 1e-14 && (e[1].0 - 1.0).abs() < 1e-14);
        let e = hermitian_eigs(&pauli_y()).unwrap();
        assert!((e[0].0 + 1.0).abs() < 1e-14 && (e[1].0 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigs_reject_non_hermitian() {
        let m = CMat::from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(hermitian_eigs(&m), Err(Error::NonHermitian { .. })));
    }

    #[test]
    fn partial_transpose_examples() {
        let mixed = DensityMatrix::maximally_mixed();
        assert!(partial_transpose_b(&mixed).max_abs_diff(mixed.matrix()) < 1e-16);

        let prod = DensityMatrix::pure(&[c(1.0), c(0.0), c(0.0), c(0.0)]).unwrap();
        assert_eq!(&partial_transpose_b(&prod), prod.matrix());

        let s = core::f64::consts::FRAC_1_SQRT_2;
        let phi = DensityMatrix::pure(&[c(s), c(0.0), c(0.0), c(s)]).unwrap();
        let min = hermitian_eigs(&partial_transpose_b(&phi)).unwrap()[0].0;
        assert!((min + 0.5).abs() < 1e-12);
    }

    #[test]
    fn factor_examples() {
        let rho = state_from_factor(&CMat::identity(4)).unwrap();
        assert!(rho.matrix().max_abs_diff(DensityMatrix::maximally_mixed().matrix()) < 1e-16);

        let rho = state_from_factor(&CMat::diag(&[1.0, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(rho.matrix(), &CMat::diag(&[1.0, 0.0, 0.0, 0.0]));

        let s = core::f64::consts::FRAC_1_SQRT_2;
        let mut g = CMat::zeros(4, 4);
        g.set(0, 0, c(s));
        g.set(3, 0, c(s));
        let rho = state_from_factor(&g).unwrap();
        let mut phi = CMat::zeros(4, 4);
        for &(i, j) in &[(0, 0), (0, 3), (3, 0), (3, 3)] {
            phi.set(i, j, c(0.5));
        }
        assert!(rho.matrix().max_abs_diff(&phi) < 1e-15);

        assert_eq!(state_from_factor(&CMat::zeros(4, 4)), Err(Error::DegenerateFactor));
    }

    #[test]
    fn effect_chart_examples() {
        let e = effect_from_params(&[0.0; 6]);
        assert!(e.effect0().max_abs_diff(&CMat::diag(&[0.5, 0.5])) < 1e-15);

        let e = effect_from_params(&[30.0, -30.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(e.effect0().max_abs_diff(&CMat::diag(&[1.0, 0.0])) < 1e-12);
    }

    #[test]
    fn effect_chart_inverse_round_trips() {
        let theta = [0.3, -1.2, 0.4, 0.7, -0.2, 1.9];
        let e = effect_m2(&theta);
        let back = effect_params_from_m2(&e).unwrap();
        let e2 = effect_m2(&back);
        for k in 0..4 {
            assert!((e[k] - e2[k]).norm() < 1e-13);
        }
    }

    #[test]
    fn unitary_derivatives_match_finite_differences() {
        let h = [0.3, 0.5, -0.8, 0.2];
        let d = unitary_m2_derivs(&h);
        let step = 1e-6;
        for k in 0..3 {
            let mut hp = h;
            let mut hm = h;
            hp[k + 1] += step;
            hm[k + 1] -= step;
            let (up, um) = (unitary_m2(&hp), unitary_m2(&hm));
            for e in 0..4 {
                let fd = (up[e] - um[e]) / (2.0 * step);
                assert!((fd - d[k][e]).norm() < 1e-8, "k={k} e={e}");
            }
        }
        // near the origin, where the closed form switches to series
        let d0 = unitary_m2_derivs(&[0.0; 4]);
        let fd = (unitary_m2(&[0.0, 1e-6, 0.0, 0.0])[1] - unitary_m2(&[0.0, -1e-6, 0.0, 0.0])[1]) / 2e-6;
        assert!((fd - d0[0][1]).norm() < 1e-8);
    }
}
