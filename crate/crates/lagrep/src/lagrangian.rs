//! Lagrangian subspaces of C^n, their antilinear involutions, and the
//! splitting of unitary matrices into products of two involutions.
//!
//! A Lagrangian L = g R^n is stored through the symmetric unitary
//! M = g g^T, which is independent of the right O(n) frame ambiguity.
//! The involution through L acts as z -> M conj(z).

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::numerics::{
    self, adjoint, check_unitary, cluster_angles, conj_mat, eye, fro_norm,
    skew_hermitian_defect, svd_jacobi_real, symmetry_defect, unitary_eigen, C64, CMat, CVec,
    Spectrum, Tolerances,
};

/// A Lagrangian subspace of C^n, canonically the symmetric unitary M = g g^T.
#[derive(Debug, Clone, PartialEq)]
pub struct Lagrangian {
    m: CMat,
}

impl Lagrangian {
    /// Validate M: unitary and symmetric within tolerance.
    pub fn new(m: CMat, tol: &Tolerances) -> Result<Lagrangian> {
        check_unitary(&m, tol.unitarity)?;
        let sd = symmetry_defect(&m);
        if sd > tol.unitarity {
            return Err(Error::NotSymmetric {
                defect: sd,
                tol: tol.unitarity,
            });
        }
        Ok(Lagrangian { m })
    }

    /// The standard Lagrangian L0 = R^n (M = I).
    pub fn standard(n: usize) -> Lagrangian {
        Lagrangian { m: eye(n) }
    }

    /// L = g R^n for a unitary frame g; frames differing by a right O(n)
    /// factor give the same M.
    pub fn from_frame(g: &CMat, tol: &Tolerances) -> Result<Lagrangian> {
        check_unitary(g, tol.unitarity)?;
        let m = g.dot(&g.t().to_owned());
        Ok(Lagrangian { m })
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.m
    }

    /// A unitary frame g with g g^T = M, recovered by the Takagi-style
    /// factorization.  Deterministic (principal square-root branch).
    pub fn frame(&self, tol: &Tolerances) -> Result<CMat> {
        numerics::takagi_symmetric_unitary(&self.m, tol)
    }

    /// The involution through L: z -> M conj(z).
    pub fn involution_apply(&self, z: &CVec) -> Result<CVec> {
        if z.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "involution_apply: vector length {} vs n={}",
                z.len(),
                self.n()
            )));
        }
        Ok(self.m.dot(&z.mapv(|w| w.conj())))
    }

    /// Ad through the involution on u(n): X -> M conj(X) M^{-1}.
    pub fn adjoint_involution(&self, x: &CMat) -> Result<CMat> {
        if x.nrows() != self.n() || x.ncols() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "adjoint_involution: {}x{} vs n={}",
                x.nrows(),
                x.ncols(),
                self.n()
            )));
        }
        let defect = skew_hermitian_defect(x);
        if defect > 1e-8 * fro_norm(x).max(1.0) {
            return Err(Error::NotSkewHermitian { defect });
        }
        Ok(adjoint_involution_raw(&self.m, x))
    }

    /// Rotate by a unitary: L -> uL, i.e. M -> u M u^T.
    pub fn rotate(&self, u: &CMat) -> Lagrangian {
        Lagrangian {
            m: u.dot(&self.m).dot(&u.t().to_owned()),
        }
    }
}

/// M conj(X) M^{-1} without the skew-hermitian check (M^{-1} = conj(M)).
pub(crate) fn adjoint_involution_raw(m: &CMat, x: &CMat) -> CMat {
    m.dot(&conj_mat(x)).dot(&conj_mat(m))
}

/// An ordered tuple of Lagrangians sharing a dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianTuple {
    pub lagrangians: Vec<Lagrangian>,
}

impl LagrangianTuple {
    pub fn new(lagrangians: Vec<Lagrangian>) -> Result<LagrangianTuple> {
        if lagrangians.len() < 2 {
            return Err(Error::InvalidArgument(
                "LagrangianTuple needs at least two entries".into(),
            ));
        }
        let n = lagrangians[0].n();
        if lagrangians.iter().any(|l| l.n() != n) {
            return Err(Error::DimensionMismatch(
                "LagrangianTuple entries must share a dimension".into(),
            ));
        }
        Ok(LagrangianTuple { lagrangians })
    }

    pub fn ell(&self) -> usize {
        self.lagrangians.len()
    }

    pub fn n(&self) -> usize {
        self.lagrangians[0].n()
    }

    pub fn get(&self, s: usize) -> &Lagrangian {
        &self.lagrangians[s]
    }

    /// Rotate the whole tuple by a unitary (diagonal action).
    pub fn rotate(&self, u: &CMat) -> LagrangianTuple {
        LagrangianTuple {
            lagrangians: self.lagrangians.iter().map(|l| l.rotate(u)).collect(),
        }
    }
}

/// The product of involutions through L1 and L2, as the unitary matrix
/// M1 conj(M2).
pub fn tau2(l1: &Lagrangian, l2: &Lagrangian) -> Result<CMat> {
    if l1.n() != l2.n() {
        return Err(Error::DimensionMismatch(format!(
            "tau2: {} vs {}",
            l1.n(),
            l2.n()
        )));
    }
    Ok(l1.matrix().dot(&conj_mat(l2.matrix())))
}

/// Split a unitary g as a product of two involutions: returns (L1, L2)
/// with tau2(L1, L2) = g.
///
/// The fiber over g is Z(g) intersected with the symmetric unitaries; the
/// `fiber` argument picks a point of it, expressed in the eigenbasis of g
/// (block-diagonal symmetric unitary per eigenvalue cluster).  `None` picks
/// the identity section.
pub fn tau2_split(
    g: &CMat,
    fiber: Option<&CMat>,
    tol: &Tolerances,
) -> Result<(Lagrangian, Lagrangian)> {
    check_unitary(g, tol.unitarity)?;
    let n = g.nrows();
    let eig = unitary_eigen(g, tol)?;
    let u = &eig.vectors;
    // exact unit-modulus phases (not angle-snapped) for best reconstruction
    let gu = g.dot(u);
    let mut d = Array2::<C64>::zeros((n, n));
    for j in 0..n {
        let mut z = C64::new(0.0, 0.0);
        for k in 0..n {
            z += u[(k, j)].conj() * gu[(k, j)];
        }
        d[(j, j)] = z / z.norm();
    }
    let h1 = match fiber {
        None => eye(n),
        Some(h) => {
            if h.nrows() != n || h.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "tau2_split fiber: {}x{} vs n={}",
                    h.nrows(),
                    h.ncols(),
                    n
                )));
            }
            check_unitary(h, 1e-8).map_err(|_| {
                Error::Precondition("tau2_split: fiber point is not unitary".into())
            })?;
            if symmetry_defect(h) > 1e-8 {
                return Err(Error::Precondition(
                    "tau2_split: fiber point is not symmetric".into(),
                ));
            }
            let comm = h.dot(&d) - d.dot(h);
            if fro_norm(&comm) > 1e-8 {
                return Err(Error::Precondition(
                    "tau2_split: fiber point does not commute with the eigenphases".into(),
                ));
            }
            h.clone()
        }
    };
    let ut = u.t().to_owned();
    let m1 = u.dot(&h1).dot(&ut);
    let h1inv_d = adjoint(&h1).dot(&d);
    let m2 = u.dot(&conj_mat(&h1inv_d)).dot(&ut);
    let l1 = Lagrangian::new(m1, tol)?;
    let l2 = Lagrangian::new(m2, tol)?;
    Ok((l1, l2))
}

/// Real dimension of L1 intersect L2: the multiplicity of angle 0 in the
/// spectrum of tau2(L1, L2).
pub fn dim_intersection(l1: &Lagrangian, l2: &Lagrangian, tol: &Tolerances) -> Result<usize> {
    let g = tau2(l1, l2)?;
    let spec = numerics::spectrum(&g, tol)?;
    Ok(spec.zero_multiplicity(tol.cluster))
}

/// Orthonormal real basis of u(n) under <X,Y> = Re Tr(X* Y).
pub(crate) fn skew_hermitian_basis(n: usize) -> Vec<CMat> {
    let mut basis = Vec::with_capacity(n * n);
    for k in 0..n {
        let mut b = Array2::<C64>::zeros((n, n));
        b[(k, k)] = C64::new(0.0, 1.0);
        basis.push(b);
    }
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    for k in 0..n {
        for l in (k + 1)..n {
            let mut b1 = Array2::<C64>::zeros((n, n));
            b1[(k, l)] = C64::new(inv_sqrt2, 0.0);
            b1[(l, k)] = C64::new(-inv_sqrt2, 0.0);
            basis.push(b1);
            let mut b2 = Array2::<C64>::zeros((n, n));
            b2[(k, l)] = C64::new(0.0, inv_sqrt2);
            b2[(l, k)] = C64::new(0.0, inv_sqrt2);
            basis.push(b2);
        }
    }
    basis
}

pub(crate) fn skew_coords(x: &CMat, basis: &[CMat]) -> Vec<f64> {
    basis
        .iter()
        .map(|b| {
            let mut acc = 0.0;
            for i in 0..x.nrows() {
                for j in 0..x.ncols() {
                    acc += (b[(i, j)].conj() * x[(i, j)]).re;
                }
            }
            acc
        })
        .collect()
}

/// Dimensions attached to a pair of Lagrangians: the intersection of their
/// stabilizer algebras inside u(n), and the centralizer algebra of
/// g = tau2(L1, L2).  These satisfy 2 dim(o1 cap o2) = dim z(g) - n.
pub fn stabilizer_algebra_dim(
    l1: &Lagrangian,
    l2: &Lagrangian,
    tol: &Tolerances,
) -> Result<(usize, usize)> {
    if l1.n() != l2.n() {
        return Err(Error::DimensionMismatch(format!(
            "stabilizer_algebra_dim: {} vs {}",
            l1.n(),
            l2.n()
        )));
    }
    let n = l1.n();
    let basis = skew_hermitian_basis(n);
    let dim = basis.len();
    // rows: coordinates of (Ad_{sigma_j} B - B) for j = 1, 2
    let mut op = Array2::<f64>::zeros((2 * dim, dim));
    for (col, b) in basis.iter().enumerate() {
        let a1 = adjoint_involution_raw(l1.matrix(), b) - b;
        let a2 = adjoint_involution_raw(l2.matrix(), b) - b;
        for (row, coord) in skew_coords(&a1, &basis).into_iter().enumerate() {
            op[(row, col)] = coord;
        }
        for (row, coord) in skew_coords(&a2, &basis).into_iter().enumerate() {
            op[(dim + row, col)] = coord;
        }
    }
    let (sv, _) = svd_jacobi_real(&op);
    let dim_cap = numerics::nullity(&sv, tol.rank_cutoff);

    let g = tau2(l1, l2)?;
    let spec = numerics::spectrum(&g, tol)?;
    let ids = cluster_angles(&spec.alpha, tol.cluster);
    let mut counts = std::collections::HashMap::new();
    for id in ids {
        *counts.entry(id).or_insert(0usize) += 1;
    }
    let dim_z: usize = counts.values().map(|&c| c * c).sum();
    Ok((dim_cap, dim_z))
}

/// Conjugators c_s = g_{s+1}^{-1} making the adjacent products
/// gamma_s = tau2(L_s, L_{s+1}) and gamma_{s+1} simultaneously symmetric.
pub fn pairwise_symmetrizers(tuple: &LagrangianTuple, tol: &Tolerances) -> Result<Vec<CMat>> {
    let ell = tuple.ell();
    let mut out = Vec::with_capacity(ell);
    for s in 0..ell {
        let next = (s + 1) % ell;
        let frame = tuple.get(next).frame(tol)?;
        out.push(adjoint(&frame));
    }
    Ok(out)
}

/// Symmetry defect of conjugating gamma_s and gamma_{s+1} by c_s, maximized
/// over s; the contract is that this stays below 1e-9.
pub fn symmetrizer_defect(tuple: &LagrangianTuple, conjugators: &[CMat]) -> Result<f64> {
    let ell = tuple.ell();
    if conjugators.len() != ell {
        return Err(Error::DimensionMismatch(format!(
            "symmetrizer_defect: {} conjugators for ell={}",
            conjugators.len(),
            ell
        )));
    }
    let mut worst = 0.0f64;
    for s in 0..ell {
        let next = (s + 1) % ell;
        let after = (s + 2) % ell;
        let g_s = tau2(tuple.get(s), tuple.get(next))?;
        let g_next = tau2(tuple.get(next), tuple.get(after))?;
        let c = &conjugators[s];
        let cinv = adjoint(c);
        let b1 = c.dot(&g_s).dot(&cinv);
        let b2 = c.dot(&g_next).dot(&cinv);
        worst = worst.max(symmetry_defect(&b1)).max(symmetry_defect(&b2));
    }
    Ok(worst)
}

/// Spectrum of tau2(L2, L1) from that of tau2(L1, L2): reversal/negation
/// mod 1 with zeros fixed.
pub fn reversed_spectrum(spec: &Spectrum) -> Spectrum {
    spec.inverse()
}

/// Random Lagrangian from a Haar frame.
pub fn random_lagrangian(n: usize, seed: numerics::Seed, tol: &Tolerances) -> Result<Lagrangian> {
    let g = numerics::haar_unitary(n, seed)?;
    Lagrangian::from_frame(&g, tol)
}

/// Random tuple of `ell` independent Haar Lagrangians.
pub fn random_tuple(
    n: usize,
    ell: usize,
    seed: numerics::Seed,
    tol: &Tolerances,
) -> Result<LagrangianTuple> {
    let mut ls = Vec::with_capacity(ell);
    for s in 0..ell {
        ls.push(random_lagrangian(n, seed.child(s as u64), tol)?);
    }
    LagrangianTuple::new(ls)
}
