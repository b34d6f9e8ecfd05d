//! Inertia (Maslov) indices of Lagrangian triples and tuples, the
//! symplectic classification predicate, and the integer identities tying
//! the inertia index to the representation index.
//!
//! Convention: the symplectic form is omega(z, w) = Im <z, w> with the
//! hermitian product antilinear in the *second* slot.  This makes R^n
//! Lagrangian and is the sign for which the inertia/index identity below
//! holds as stated; the opposite slot convention flips the sign of tau.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagrangian::{dim_intersection, tau2, Lagrangian, LagrangianTuple};
use crate::numerics::{self, svd_jacobi_real, CMat, Tolerances};

/// omega(z, w) = Im(sum_i z_i conj(w_i)) on column vectors given as columns
/// of complex matrices.
fn omega_cols(a: &CMat, i: usize, b: &CMat, j: usize) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for k in 0..n {
        acc += (a[(k, i)] * b[(k, j)].conj()).im;
    }
    acc
}

/// Inertia index of a Lagrangian triple: the signature of the quadratic
/// form q(x1,x2,x3) = omega(x1,x2) + omega(x2,x3) + omega(x3,x1) on
/// L1 + L2 + L3, computed in the real bases given by Takagi frames.
pub fn inertia_index(
    l1: &Lagrangian,
    l2: &Lagrangian,
    l3: &Lagrangian,
    tol: &Tolerances,
) -> Result<i64> {
    let n = l1.n();
    if l2.n() != n || l3.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "inertia_index: dims {}, {}, {}",
            n,
            l2.n(),
            l3.n()
        )));
    }
    let frames = [l1.frame(tol)?, l2.frame(tol)?, l3.frame(tol)?];
    let mut q = Array2::<f64>::zeros((3 * n, 3 * n));
    // cyclic pairs (1,2), (2,3), (3,1) each contribute omega/2 off-diagonal
    for (s, t) in [(0usize, 1usize), (1, 2), (2, 0)] {
        for i in 0..n {
            for j in 0..n {
                let w = 0.5 * omega_cols(&frames[s], i, &frames[t], j);
                q[(s * n + i, t * n + j)] += w;
                q[(t * n + j, s * n + i)] += w;
            }
        }
    }
    let (n_plus, n_minus, _) = numerics::signature(&q, 1e-8)?;
    Ok(n_plus as i64 - n_minus as i64)
}

/// The symplectic invariants of a triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleInvariants {
    pub n0: usize,
    pub n12: usize,
    pub n23: usize,
    pub n31: usize,
    pub tau: i64,
}

/// Real dimension of the intersection of all Lagrangians in the tuple,
/// via the common nullspace of the stacked projection complements.
pub fn total_intersection_dim(tuple: &LagrangianTuple, tol: &Tolerances) -> Result<usize> {
    let n = tuple.n();
    let ell = tuple.ell();
    let mut stack = Array2::<f64>::zeros((2 * n * ell, 2 * n));
    for (s, l) in tuple.lagrangians.iter().enumerate() {
        let g = l.frame(tol)?;
        // real 2n x n of the realified frame columns
        let mut gr = Array2::<f64>::zeros((2 * n, n));
        for j in 0..n {
            for k in 0..n {
                gr[(k, j)] = g[(k, j)].re;
                gr[(n + k, j)] = g[(k, j)].im;
            }
        }
        let p = gr.dot(&gr.t()); // orthogonal projection onto L
        for i in 0..2 * n {
            for j in 0..2 * n {
                stack[(2 * n * s + i, j)] = (if i == j { 1.0 } else { 0.0 }) - p[(i, j)];
            }
        }
    }
    let (sv, _) = svd_jacobi_real(&stack);
    Ok(numerics::nullity(&sv, tol.rank_cutoff))
}

/// Invariants (n0, n_jk, tau) of a Lagrangian triple.
pub fn triple_invariants(
    l1: &Lagrangian,
    l2: &Lagrangian,
    l3: &Lagrangian,
    tol: &Tolerances,
) -> Result<TripleInvariants> {
    let n12 = dim_intersection(l1, l2, tol)?;
    let n23 = dim_intersection(l2, l3, tol)?;
    let n31 = dim_intersection(l3, l1, tol)?;
    let tuple = LagrangianTuple::new(vec![l1.clone(), l2.clone(), l3.clone()])?;
    let n0 = total_intersection_dim(&tuple, tol)?;
    let tau = inertia_index(l1, l2, l3, tol)?;
    Ok(TripleInvariants {
        n0,
        n12,
        n23,
        n31,
        tau,
    })
}

/// The four classification conditions for the invariants of a triple.
pub fn classify_valid(d: &TripleInvariants, n: usize) -> bool {
    let TripleInvariants {
        n0,
        n12,
        n23,
        n31,
        tau,
    } = *d;
    let sum = n12 + n23 + n31;
    let cond1 = n0 <= n12 && n0 <= n23 && n0 <= n31 && n12 <= n && n23 <= n && n31 <= n;
    let cond2 = sum <= n + 2 * n0;
    let cond3 = tau.unsigned_abs() as usize <= n + 2 * n0 - sum.min(n + 2 * n0);
    // parity: tau = n - sum mod 2
    let cond4 = (tau - (n as i64 - sum as i64)).rem_euclid(2) == 0;
    cond1 && cond2 && cond3 && cond4
}

/// Telescoping inertia index of an ell-tuple:
/// tau(L1,L2,L3) + tau(L1,L3,L4) + ... + tau(L1,L_{ell-1},L_ell).
pub fn generalized_maslov(tuple: &LagrangianTuple, tol: &Tolerances) -> Result<i64> {
    let ell = tuple.ell();
    if ell < 3 {
        return Err(Error::InvalidArgument(format!(
            "generalized_maslov needs ell >= 3, got {}",
            ell
        )));
    }
    let mut acc = 0i64;
    for i in 1..ell - 1 {
        acc += inertia_index(tuple.get(0), tuple.get(i), tuple.get(i + 1), tol)?;
    }
    Ok(acc)
}

/// Report of the index identities evaluated on one tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub tau: i64,
    #[serde(rename = "I")]
    pub index: i64,
    pub n0: usize,
    /// Cyclic consecutive intersection dims n_{12}, n_{23}, ..., n_{ell 1}.
    pub njk: Vec<usize>,
    pub identities: IdentityChecks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityChecks {
    /// tau = 3n - 2 I - (n12 + n23 + n31); triples only.
    pub indcomp: Option<bool>,
    /// I(tuple) = sum of triple indices - sum_i (n - n_{1i}); ell >= 4.
    pub index_telescope: Option<bool>,
    /// tau = n ell - 2 I - sum of cyclic consecutive intersections.
    pub iandtau: bool,
    /// |tau| <= n(ell-2) + 2 n0 - sum of cyclic consecutive intersections.
    pub maslov_bound: bool,
    /// n - n0 <= I <= 2n + n0 - (n12+n23+n31); triples only.
    pub index_bounds: Option<bool>,
}

/// Index of the representation attached to a tuple: the sum of all angles
/// of the products tau2(L_s, L_{s+1}), required to be integer within tol.
pub fn tuple_index(tuple: &LagrangianTuple, tol: &Tolerances) -> Result<i64> {
    let ell = tuple.ell();
    let mut total = 0.0;
    for s in 0..ell {
        let g = tau2(tuple.get(s), tuple.get((s + 1) % ell))?;
        let spec = numerics::spectrum(&g, tol)?;
        total += spec.alpha.iter().sum::<f64>();
    }
    let r = total.round();
    if (total - r).abs() > 1e-8 {
        return Err(Error::NonIntegerIndex {
            value: total,
            tol: 1e-8,
        });
    }
    Ok(r as i64)
}

/// Evaluate both sides of each index identity and report agreement.
pub fn check_index_identities(tuple: &LagrangianTuple, tol: &Tolerances) -> Result<IdentityReport> {
    let ell = tuple.ell();
    if ell < 3 {
        return Err(Error::InvalidArgument(format!(
            "check_index_identities needs ell >= 3, got {}",
            ell
        )));
    }
    let n = tuple.n();
    let tau = generalized_maslov(tuple, tol)?;
    let index = tuple_index(tuple, tol)?;
    let n0 = total_intersection_dim(tuple, tol)?;
    let mut njk = Vec::with_capacity(ell);
    for s in 0..ell {
        njk.push(dim_intersection(tuple.get(s), tuple.get((s + 1) % ell), tol)?);
    }
    let njk_sum: usize = njk.iter().sum();

    let indcomp = if ell == 3 {
        Some(tau == 3 * n as i64 - 2 * index - njk_sum as i64)
    } else {
        None
    };
    let index_telescope = if ell >= 4 {
        let mut triple_sum = 0i64;
        for i in 1..ell - 1 {
            let t =
                LagrangianTuple::new(vec![tuple.get(0).clone(), tuple.get(i).clone(), tuple.get(i + 1).clone()])?;
            triple_sum += tuple_index(&t, tol)?;
        }
        let mut correction = 0i64;
        for i in 2..ell - 1 {
            let n1i = dim_intersection(tuple.get(0), tuple.get(i), tol)?;
            correction += n as i64 - n1i as i64;
        }
        Some(index == triple_sum - correction)
    } else {
        None
    };
    let iandtau = tau == n as i64 * ell as i64 - 2 * index - njk_sum as i64;
    let maslov_bound =
        tau.unsigned_abs() as i64 <= n as i64 * (ell as i64 - 2) + 2 * n0 as i64 - njk_sum as i64;
    let index_bounds = if ell == 3 {
        let lower = n as i64 - n0 as i64;
        let upper = 2 * n as i64 + n0 as i64 - njk_sum as i64;
        Some(lower <= index && index <= upper)
    } else {
        None
    };

    Ok(IdentityReport {
        tau,
        index,
        n0,
        njk,
        identities: IdentityChecks {
            indcomp,
            index_telescope,
            iandtau,
            maslov_bound,
            index_bounds,
        },
    })
}
