//! Brute-force references for the CHSH scenario: polytope vertices, the
//! local and quantum bounds, and the two-qubit PPT separability verdict.
//!
//! These are deliberately independent of the model charts so tests can use
//! them to check model images.

use alloc::vec::Vec;

use crate::bell::{cell, cells, chsh, Behavior};
use crate::qmath::{hermitian_eigs, partial_transpose_b, DensityMatrix};

/// Maximal CHSH value of local models.
pub const LOCAL_BOUND: f64 = 2.0;
/// Maximal CHSH value of quantum models.
pub const TSIRELSON_BOUND: f64 = 2.0 * core::f64::consts::SQRT_2;
/// Maximal CHSH value of any behavior.
pub const ALGEBRAIC_BOUND: f64 = 4.0;
/// Minimum partial-transpose eigenvalue accepted as PPT.
pub const PPT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VertexKind {
    LocalDeterministic,
    NoSignalling,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VertexSet {
    pub vertices: Vec<Behavior>,
    pub kind: VertexKind,
}

/// `a = f(x)`, `b = g(y)` where `f` and `g` are indexed by their truth tables.
pub fn local_vertex(f: usize, g: usize) -> Behavior {
    Behavior::from_fn(|x, y, a, b| {
        if a == (f >> x) & 1 && b == (g >> y) & 1 {
            1.0
        } else {
            0.0
        }
    })
    .expect("deterministic vertex is normalised")
}

/// PR-box variant `a ⊕ b = xy ⊕ αx ⊕ βy ⊕ γ`.
pub fn pr_vertex(alpha: usize, beta: usize, gamma: usize) -> Behavior {
    Behavior::from_fn(|x, y, a, b| {
        if (a ^ b) == ((x & y) ^ (alpha & x) ^ (beta & y) ^ gamma) {
            0.5
        } else {
            0.0
        }
    })
    .expect("PR vertex is normalised")
}

/// The canonical PR box (`a ⊕ b = xy`).
pub fn pr_box() -> Behavior {
    pr_vertex(0, 0, 0)
}

/// The 16 local deterministic behaviors.
pub fn enumerate_local_vertices() -> VertexSet {
    let vertices = (0..4)
        .flat_map(|f| (0..4).map(move |g| local_vertex(f, g)))
        .collect();
    VertexSet {
        vertices,
        kind: VertexKind::LocalDeterministic,
    }
}

/// The 24 vertices of the no-signalling polytope: the 16 local ones followed
/// by the 8 PR-box variants (ordered by `4α + 2β + γ`).
///
/// The list is fixed; [`brute_force_ns_vertices`] recomputes it from the
/// half-space description.
pub fn enumerate_ns_vertices() -> VertexSet {
    let mut vertices = enumerate_local_vertices().vertices;
    for alpha in 0..2 {
        for beta in 0..2 {
            for gamma in 0..2 {
                vertices.push(pr_vertex(alpha, beta, gamma));
            }
        }
    }
    VertexSet {
        vertices,
        kind: VertexKind::NoSignalling,
    }
}

/// Largest CHSH value over the local deterministic vertices.
pub fn local_bound_chsh() -> f64 {
    enumerate_local_vertices()
        .vertices
        .iter()
        .map(chsh)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Two-qubit separability via positivity of the partial transpose.
pub fn is_ppt_separable(rho: &DensityMatrix) -> bool {
    ppt_min_eigenvalue(rho) >= -PPT_TOL
}

pub fn ppt_min_eigenvalue(rho: &DensityMatrix) -> f64 {
    hermitian_eigs(&partial_transpose_b(rho))
        .map(|e| e[0].0)
        .unwrap_or(f64::NEG_INFINITY)
}

/// Equality constraints of the no-signalling polytope as rows `(coeffs, rhs)`:
/// four normalisations and four marginal-independence conditions.
fn ns_equalities() -> Vec<([f64; 16], f64)> {
    let mut rows = Vec::new();
    for s in 0..4 {
        let mut r = [0.0; 16];
        r[4 * s..4 * s + 4].fill(1.0);
        rows.push((r, 1.0));
    }
    for x in 0..2 {
        let mut r = [0.0; 16];
        for b in 0..2 {
            r[cell(x, 0, 0, b)] += 1.0;
            r[cell(x, 1, 0, b)] -= 1.0;
        }
        rows.push((r, 0.0));
    }
    for y in 0..2 {
        let mut r = [0.0; 16];
        for a in 0..2 {
            r[cell(0, y, a, 0)] += 1.0;
            r[cell(1, y, a, 0)] -= 1.0;
        }
        rows.push((r, 0.0));
    }
    rows
}

/// Membership in the no-signalling polytope from its half-space description.
pub fn in_ns_polytope(b: &Behavior, tol: f64) -> bool {
    b.cells().iter().all(|&v| v >= -tol)
        && ns_equalities().iter().all(|(row, rhs)| {
            let lhs: f64 = row.iter().zip(b.cells()).map(|(c, p)| c * p).sum();
            (lhs - rhs).abs() <= tol
        })
}

/// Solves a dense 16×16 system by Gaussian elimination with partial
/// pivoting; `None` when (numerically) singular.
fn solve16(mut m: [[f64; 17]; 16]) -> Option<[f64; 16]> {
    for col in 0..16 {
        let pivot = (col..16).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-9 {
            return None;
        }
        m.swap(col, pivot);
        for row in 0..16 {
            if row != col {
                let factor = m[row][col] / m[col][col];
                if factor != 0.0 {
                    for k in col..17 {
                        m[row][k] -= factor * m[col][k];
                    }
                }
            }
        }
    }
    let mut x = [0.0; 16];
    for i in 0..16 {
        x[i] = m[i][16] / m[i][i];
    }
    Some(x)
}

/// Vertex enumeration of the no-signalling polytope by exhausting every
/// choice of eight vanishing cells: a feasible point whose active
/// constraints have full rank is a vertex.
pub fn brute_force_ns_vertices() -> Vec<Behavior> {
    let eqs = ns_equalities();
    let mut found: Vec<Behavior> = Vec::new();
    for mask in 0u32..(1 << 16) {
        if mask.count_ones() != 8 {
            continue;
        }
        let mut m = [[0.0; 17]; 16];
        for (r, (row, rhs)) in eqs.iter().enumerate() {
            m[r][..16].copy_from_slice(row);
            m[r][16] = *rhs;
        }
        let mut r = eqs.len();
        for c in 0..16 {
            if mask & (1 << c) != 0 {
                m[r][c] = 1.0;
                r += 1;
            }
        }
        let Some(p) = solve16(m) else { continue };
        if p.iter().any(|&v| v < -1e-12) {
            continue;
        }
        let mut clean = [0.0; 16];
        for (i, v) in p.iter().enumerate() {
            clean[i] = if v.abs() < 1e-12 { 0.0 } else { *v };
        }
        let b = Behavior::from_raw(clean);
        if !found.iter().any(|v| v.max_abs_diff(&b) < 1e-9) {
            found.push(b);
        }
    }
    found
}

/// Whether `b` is (within tolerance) a member of `set`.
pub fn contains(set: &VertexSet, b: &Behavior, tol: f64) -> bool {
    set.vertices.iter().any(|v| v.max_abs_diff(b) <= tol)
}

/// Number of cells of `b` that vanish.
pub fn zero_cells(b: &Behavior) -> usize {
    cells().filter(|&(x, y, a, bb)| b.get(x, y, a, bb) == 0.0).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::{chsh_max, ns_delta};
    use crate::qmath::C64;

    #[test]
    fn local_vertices() {
        let set = enumerate_local_vertices();
        assert_eq!(set.vertices.len(), 16);
        assert!(set.vertices.iter().all(|v| ns_delta(v) == 0.0));
        let best = set.vertices.iter().map(chsh_max).fold(0.0, f64::max);
        assert!((best - 2.0).abs() < 1e-12);
        assert!(set.vertices.iter().all(|v| zero_cells(v) == 12));
    }

    #[test]
    fn local_bound_scans() {
        assert!((local_bound_chsh() - 2.0).abs() < 1e-12);
        let set = enumerate_local_vertices();
        let mut avg = [0.0; 16];
        for v in &set.vertices {
            for (i, p) in v.cells().iter().enumerate() {
                avg[i] += p / 16.0;
            }
        }
        assert!(chsh_max(&Behavior::new(avg).unwrap()) <= 2.0);
        // sign-flipped variant: negate every correlator by flipping b
        let flipped = set
            .vertices
            .iter()
            .map(|v| Behavior::from_fn(|x, y, a, b| v.get(x, y, a, 1 - b)).unwrap())
            .map(|v| chsh(&v))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((flipped - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ns_vertices() {
        let set = enumerate_ns_vertices();
        assert_eq!(set.vertices.len(), 24);
        assert!(set.vertices.iter().all(|v| ns_delta(v) <= 1e-12));
        assert!(contains(&set, &pr_box(), 0.0));
        let local = enumerate_local_vertices();
        assert!(local.vertices.iter().all(|v| contains(&set, v, 0.0)));
        for v in &set.vertices[16..] {
            assert!((chsh_max(v) - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn brute_force_agrees_with_fixed_list() {
        let brute = brute_force_ns_vertices();
        let set = enumerate_ns_vertices();
        assert_eq!(brute.len(), 24);
        assert!(brute.iter().all(|v| contains(&set, v, 1e-12)));
    }

    #[test]
    fn ppt_verdicts() {
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let c = |v: f64| C64::new(v, 0.0);
        let phi = DensityMatrix::pure(&[c(s), c(0.0), c(0.0), c(s)]).unwrap();
        let psi = DensityMatrix::pure(&[c(0.0), c(s), c(s), c(0.0)]).unwrap();
        assert!(!is_ppt_separable(&phi));
        assert!((ppt_min_eigenvalue(&phi) + 0.5).abs() < 1e-12);
        assert!(is_ppt_separable(&DensityMatrix::maximally_mixed()));
        assert!(is_ppt_separable(&phi.mix(&psi, 0.5).unwrap()));
    }

    #[test]
    fn half_space_membership() {
        assert!(in_ns_polytope(&pr_box(), 1e-12));
        let signalling = Behavior::from_fn(|x, _, a, b| if a == 0 && b == x { 1.0 } else { 0.0 }).unwrap();
        assert!(!in_ns_polytope(&signalling, 1e-9));
    }
}
