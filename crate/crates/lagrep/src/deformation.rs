//! Representations of the punctured-sphere group, the map from Lagrangian
//! tuples to representations, twist/bend deformations, and the rank checks
//! on the differential of that map.
//!
//! Tangent coordinates: a variation of a Lagrangian L is parametrized by
//! W = sigma-dot sigma, a skew-hermitian matrix in the (-1)-eigenspace of
//! the adjoint involution of L; the stored symmetric unitary moves as
//! M-dot = W M.  The induced variation of gamma_s = tau2(L_s, L_{s+1}) is
//! X_s = W_s + Ad_{sigma_s} W_{s+1}.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagrangian::{adjoint_involution_raw, tau2, Lagrangian, LagrangianTuple};
use crate::numerics::{
    self, adjoint, exp_skew_hermitian, eye, fro_norm, svd_jacobi, svd_jacobi_real,
    unitary_eigen, C64, CMat, RMat, Seed, Tolerances, UnitaryEigen, TWO_PI,
};
use crate::spectra::SpectrumTuple;

/// A homomorphism of the punctured-sphere group into U(n): ell unitary
/// matrices whose ordered product is the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Representation {
    pub gammas: Vec<CMat>,
    pub n: usize,
    pub ell: usize,
}

pub const RELATION_TOL: f64 = 1e-8;

impl Representation {
    pub fn new(gammas: Vec<CMat>, tol: &Tolerances) -> Result<Representation> {
        let ell = gammas.len();
        if ell < 2 {
            return Err(Error::InvalidArgument(
                "Representation needs at least two factors".into(),
            ));
        }
        let n = gammas[0].nrows();
        for (s, g) in gammas.iter().enumerate() {
            numerics::check_unitary(g, tol.unitarity).map_err(|e| {
                Error::Precondition(format!("Representation factor {}: {}", s, e))
            })?;
            if g.nrows() != n {
                return Err(Error::DimensionMismatch(
                    "Representation factors must share a dimension".into(),
                ));
            }
        }
        let defect = relation_defect(&gammas);
        if defect > RELATION_TOL {
            return Err(Error::Precondition(format!(
                "product relation violated: ||gamma_1...gamma_ell - I||_F = {:.3e}",
                defect
            )));
        }
        Ok(Representation { gammas, n, ell })
    }

    pub fn trivial(n: usize, ell: usize) -> Representation {
        Representation {
            gammas: vec![eye(n); ell],
            n,
            ell,
        }
    }
}

pub fn relation_defect(gammas: &[CMat]) -> f64 {
    let n = gammas[0].nrows();
    let mut p = eye(n);
    for g in gammas {
        p = p.dot(g);
    }
    fro_norm(&(p - eye(n)))
}

/// gamma_s = tau2(L_s, L_{s+1}) cyclically; the product telescopes to the
/// identity.
pub fn phi_tilde(tuple: &LagrangianTuple, tol: &Tolerances) -> Result<Representation> {
    let ell = tuple.ell();
    let mut gammas = Vec::with_capacity(ell);
    for s in 0..ell {
        gammas.push(tau2(tuple.get(s), tuple.get((s + 1) % ell))?);
    }
    Representation::new(gammas, tol)
}

/// Row s is the spectrum of gamma_s.
pub fn spectral_projection(rho: &Representation, tol: &Tolerances) -> Result<SpectrumTuple> {
    let mut alpha = Vec::with_capacity(rho.ell);
    for g in &rho.gammas {
        alpha.push(numerics::spectrum(g, tol)?.alpha);
    }
    SpectrumTuple::new(alpha)
}

/// Real dimension of the commutant of the representation inside u(n);
/// equals 1 exactly when the representation is irreducible.
pub fn commutant_dim(rho: &Representation, tol: &Tolerances) -> usize {
    let n = rho.n;
    let mut op = Array2::<C64>::zeros((rho.ell * n * n, n * n));
    for (s, g) in rho.gammas.iter().enumerate() {
        // vec(gX - Xg) = (g (x) I - I (x) g^T) vec(X), row-major vec
        for i in 0..n {
            for j in 0..n {
                let row0 = s * n * n + i * n + j;
                for k in 0..n {
                    // (gX)_{ij} = sum_k g_{ik} X_{kj}
                    op[(row0, k * n + j)] += g[(i, k)];
                    // (Xg)_{ij} = sum_k X_{ik} g_{kj}
                    op[(row0, i * n + k)] -= g[(k, j)];
                }
            }
        }
    }
    let (sv, _) = svd_jacobi(&op);
    numerics::nullity(&sv, tol.rank_cutoff)
}

/// Number of trivial summands: the complex dimension of the common fixed
/// space of all factors.
pub fn n0_trivial(rho: &Representation, tol: &Tolerances) -> usize {
    let n = rho.n;
    let mut stack = Array2::<C64>::zeros((rho.ell * n, n));
    for (s, g) in rho.gammas.iter().enumerate() {
        for i in 0..n {
            for j in 0..n {
                stack[(s * n + i, j)] = g[(i, j)] - if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            }
        }
    }
    let (sv, _) = svd_jacobi(&stack);
    numerics::nullity(&sv, tol.rank_cutoff)
}

/// Total multiplicity of the angle 0 across all factors.
pub fn n1_zero_angles(rho: &Representation, tol: &Tolerances) -> Result<usize> {
    let mut total = 0;
    for g in &rho.gammas {
        total += numerics::spectrum(g, tol)?.zero_multiplicity(tol.cluster);
    }
    Ok(total)
}

/// Twist: rescale each Lagrangian by a unit phase, M_s -> tau_s^2 M_s.
pub fn twist(tuple: &LagrangianTuple, phases: &[C64], tol: &Tolerances) -> Result<LagrangianTuple> {
    if phases.len() != tuple.ell() {
        return Err(Error::DimensionMismatch(format!(
            "twist: {} phases for ell = {}",
            phases.len(),
            tuple.ell()
        )));
    }
    for (s, t) in phases.iter().enumerate() {
        if (t.norm() - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "twist: phase {} has modulus {:.3e}",
                s,
                t.norm()
            )));
        }
    }
    let mut ls = Vec::with_capacity(tuple.ell());
    for (s, l) in tuple.lagrangians.iter().enumerate() {
        let t2 = phases[s] * phases[s];
        let m = l.matrix().mapv(|z| z * t2);
        ls.push(Lagrangian::new(m, tol)?);
    }
    LagrangianTuple::new(ls)
}

/// Real bending about L_s (0-based) of length r: conjugate
/// L_{s+1}, ..., L_{s+r} by b = g_s exp(A) g_s^{-1} with A real
/// antisymmetric in the frame of L_s.
pub fn bend(
    tuple: &LagrangianTuple,
    s: usize,
    r: usize,
    a: &RMat,
    tol: &Tolerances,
) -> Result<LagrangianTuple> {
    let ell = tuple.ell();
    let n = tuple.n();
    if s >= ell {
        return Err(Error::InvalidArgument(format!(
            "bend: s = {} out of range (ell = {})",
            s, ell
        )));
    }
    if r == 0 || r > ell {
        return Err(Error::InvalidArgument(format!(
            "bend: length r = {} must be in 1..=ell = {}",
            r, ell
        )));
    }
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "bend: parameter is {}x{}, expected {}x{}",
            a.nrows(),
            a.ncols(),
            n,
            n
        )));
    }
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            asym += (a[(i, j)] + a[(j, i)]).powi(2);
        }
    }
    if asym.sqrt() > 1e-10 * (1.0 + numerics::fro_norm_real(a)) {
        return Err(Error::InvalidArgument(
            "bend: parameter must be real antisymmetric".into(),
        ));
    }
    let g = tuple.get(s).frame(tol)?;
    let ac = a.mapv(|x| C64::new(x, 0.0));
    let ea = exp_skew_hermitian(&ac)?;
    let b = g.dot(&ea).dot(&adjoint(&g));
    let bt = b.t().to_owned();
    let mut ls = tuple.lagrangians.clone();
    for off in 1..=r {
        let idx = (s + off) % ell;
        let m = b.dot(ls[idx].matrix()).dot(&bt);
        ls[idx] = Lagrangian::new(m, tol)?;
    }
    LagrangianTuple::new(ls)
}

// ---------------------------------------------------------------------------
// tangent machinery

/// A tangent direction to the tuple space: one W_s per Lagrangian, each in
/// the (-1)-eigenspace of the corresponding adjoint involution.
pub type TupleTangent = Vec<CMat>;

/// One tangent vector to the representation variety, right-translated:
/// X_s = gamma_s-dot gamma_s^{-1}.
#[derive(Debug, Clone)]
pub struct TangentFrame {
    pub vectors: Vec<TupleTangent>,
}

/// Defect of the cocycle relation X_1 + Ad_{g1} X_2 + ... on one vector.
pub fn cocycle_defect(rho: &Representation, x: &[CMat]) -> f64 {
    let n = rho.n;
    let mut acc = Array2::<C64>::zeros((n, n));
    let mut prefix = eye(n);
    for (s, xs) in x.iter().enumerate() {
        acc = acc + prefix.dot(xs).dot(&adjoint(&prefix));
        prefix = prefix.dot(&rho.gammas[s]);
    }
    fro_norm(&acc)
}

/// Orthonormal basis of the (-1)-eigenspace of the adjoint involution of a
/// Lagrangian with frame g: the matrices g (i S) g^{-1} for S running over
/// an orthonormal basis of real symmetric matrices.
pub fn o_perp_basis(frame: &CMat) -> Vec<CMat> {
    let n = frame.nrows();
    let ginv = adjoint(frame);
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut basis = Vec::with_capacity(n * (n + 1) / 2);
    for k in 0..n {
        let mut s = Array2::<C64>::zeros((n, n));
        s[(k, k)] = C64::new(0.0, 1.0);
        basis.push(frame.dot(&s).dot(&ginv));
    }
    for k in 0..n {
        for l in (k + 1)..n {
            let mut s = Array2::<C64>::zeros((n, n));
            s[(k, l)] = C64::new(0.0, inv_sqrt2);
            s[(l, k)] = C64::new(0.0, inv_sqrt2);
            basis.push(frame.dot(&s).dot(&ginv));
        }
    }
    basis
}

/// The differential of phi-tilde on one tuple tangent:
/// X_s = W_s + Ad_{sigma_s} W_{s+1}.
pub fn dphi(tuple: &LagrangianTuple, w: &[CMat]) -> Vec<CMat> {
    let ell = tuple.ell();
    (0..ell)
        .map(|s| {
            let m = tuple.get(s).matrix();
            &w[s] + &adjoint_involution_raw(m, &w[(s + 1) % ell])
        })
        .collect()
}

fn flatten_real(mats: &[CMat], out: &mut Vec<f64>) {
    for m in mats {
        for z in m.iter() {
            out.push(z.re);
            out.push(z.im);
        }
    }
}

/// Numerical rank of the differential of phi-tilde at an irreducible tuple,
/// over the full tangent space of dimension ell n(n+1)/2.  Returns the rank
/// and the singular-value gap ratio that supports it.
pub fn jacobian_rank(tuple: &LagrangianTuple, tol: &Tolerances) -> Result<(usize, f64)> {
    let rho = phi_tilde(tuple, tol)?;
    if commutant_dim(&rho, tol) != 1 {
        return Err(Error::Precondition(
            "jacobian_rank: representation is reducible; the rank statement needs irreducibility"
                .into(),
        ));
    }
    let ell = tuple.ell();
    let n = tuple.n();
    let mut frames = Vec::with_capacity(ell);
    for l in &tuple.lagrangians {
        frames.push(l.frame(tol)?);
    }
    let dim_per = n * (n + 1) / 2;
    let rows = 2 * ell * n * n;
    let cols = ell * dim_per;
    let mut mat = Array2::<f64>::zeros((rows, cols));
    let mut col = 0;
    for s in 0..ell {
        for w_basis in o_perp_basis(&frames[s]) {
            let mut w: Vec<CMat> = vec![Array2::zeros((n, n)); ell];
            w[s] = w_basis;
            let x = dphi(tuple, &w);
            let mut flat = Vec::with_capacity(rows);
            flatten_real(&x, &mut flat);
            for (row, v) in flat.into_iter().enumerate() {
                mat[(row, col)] = v;
            }
            col += 1;
        }
    }
    let (sv, _) = svd_jacobi_real(&mat);
    Ok(numerics::rank_by_gap(&sv, 1e4))
}

/// Spectral data of every factor, cached for differential work.
pub struct RepSpectralData {
    pub eigs: Vec<UnitaryEigen>,
}

pub fn rep_spectral_data(rho: &Representation, tol: &Tolerances) -> Result<RepSpectralData> {
    let mut eigs = Vec::with_capacity(rho.ell);
    for g in &rho.gammas {
        eigs.push(unitary_eigen(g, tol)?);
    }
    Ok(RepSpectralData { eigs })
}

/// First-order variation of the angles of every factor along a tangent:
/// alpha-dot_j = Im (V* X V)_{jj} / 2 pi, valid for simple spectra.
pub fn spectral_differential(data: &RepSpectralData, x: &[CMat]) -> Vec<f64> {
    let mut out = Vec::new();
    for (s, eig) in data.eigs.iter().enumerate() {
        let v = &eig.vectors;
        let n = v.nrows();
        let xv = x[s].dot(v);
        for j in 0..n {
            let mut z = C64::new(0.0, 0.0);
            for k in 0..n {
                z += v[(k, j)].conj() * xv[(k, j)];
            }
            out.push(z.im / TWO_PI);
        }
    }
    out
}

/// The twist and bend tangent directions at a tuple, in W coordinates.
pub fn twist_bend_directions(tuple: &LagrangianTuple, tol: &Tolerances) -> Result<Vec<TupleTangent>> {
    let ell = tuple.ell();
    let n = tuple.n();
    let mut dirs: Vec<TupleTangent> = Vec::new();
    // twists: W_s = i I in one slot
    for s in 0..ell {
        let mut w: TupleTangent = vec![Array2::zeros((n, n)); ell];
        let mut m = Array2::<C64>::zeros((n, n));
        for k in 0..n {
            m[(k, k)] = C64::new(0.0, 1.0);
        }
        w[s] = m;
        dirs.push(w);
    }
    // bends: for each anchor s, length r, and antisymmetric basis element
    let mut frames = Vec::with_capacity(ell);
    for l in &tuple.lagrangians {
        frames.push(l.frame(tol)?);
    }
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    for s in 0..ell {
        let ginv = adjoint(&frames[s]);
        let mut o_basis = Vec::with_capacity(n * (n - 1) / 2);
        for k in 0..n {
            for l in (k + 1)..n {
                let mut a = Array2::<C64>::zeros((n, n));
                a[(k, l)] = C64::new(inv_sqrt2, 0.0);
                a[(l, k)] = C64::new(-inv_sqrt2, 0.0);
                o_basis.push(frames[s].dot(&a).dot(&ginv));
            }
        }
        for b in &o_basis {
            for r in 1..=ell {
                let mut w: TupleTangent = vec![Array2::zeros((n, n)); ell];
                for off in 1..=r {
                    let idx = (s + off) % ell;
                    let m_idx = tuple.get(idx).matrix();
                    w[idx] = b - &adjoint_involution_raw(m_idx, b);
                }
                dirs.push(w);
            }
        }
    }
    Ok(dirs)
}

/// Rank of the composed map (tuple -> spectra of all factors) over the
/// twist+bend tangent span; at a generic irreducible tuple this must be
/// ell * n - 1.
pub fn spectral_tangent_rank(tuple: &LagrangianTuple, tol: &Tolerances) -> Result<(usize, f64)> {
    let rho = phi_tilde(tuple, tol)?;
    if commutant_dim(&rho, tol) != 1 {
        return Err(Error::Precondition(
            "spectral_tangent_rank: representation is reducible".into(),
        ));
    }
    let proj = spectral_projection(&rho, tol)?;
    for (s, row) in proj.alpha.iter().enumerate() {
        for j in 1..row.len() {
            if numerics::circ_dist(row[j], row[j - 1]) < tol.cluster {
                return Err(Error::Precondition(format!(
                    "spectral_tangent_rank: factor {} has a multiple eigenvalue; \
                     the spectral map is not differentiable there",
                    s
                )));
            }
        }
    }
    let data = rep_spectral_data(&rho, tol)?;
    let dirs = twist_bend_directions(tuple, tol)?;
    let rows = tuple.ell() * tuple.n();
    let mut mat = Array2::<f64>::zeros((rows, dirs.len()));
    for (col, w) in dirs.iter().enumerate() {
        let x = dphi(tuple, w);
        for (row, v) in spectral_differential(&data, &x).into_iter().enumerate() {
            mat[(row, col)] = v;
        }
    }
    let (sv, _) = svd_jacobi_real(&mat);
    Ok(numerics::rank_by_gap(&sv, 1e4))
}

/// Closed-form dimensions attached to a multiplicity structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    /// dim of the fixed-class irreducible representation space.
    pub rep_irr: f64,
    /// dim of its Lagrangian locus (exactly half).
    pub lrep_irr: f64,
    /// dim of the space of irreducible Lagrangian homomorphisms.
    pub lhom_total: f64,
    /// dim of the moduli of irreducible Lagrangian representations.
    pub lrep_total: f64,
}

/// Evaluate the dimension formulas for given (n, ell) and multiplicities.
pub fn expected_dimensions(n: usize, ell: usize, mu: &[Vec<usize>]) -> DimensionReport {
    let nf = n as f64;
    let ef = ell as f64;
    let mu_sq: f64 = mu
        .iter()
        .flat_map(|row| row.iter().map(|&m| (m * m) as f64))
        .sum();
    let rep_irr = (ef - 2.0) * nf * nf + 2.0 - mu_sq;
    let lrep_irr = 0.5 * (ef - 2.0) * nf * nf + 1.0 - 0.5 * mu_sq;
    // total spaces: the rank computation pins these (the tuple space has
    // dimension ell n(n+1)/2 and the map has one-dimensional kernel at a
    // generic irreducible point)
    let lhom_total = ef * nf * (nf + 1.0) / 2.0 - 1.0;
    let lrep_total = 0.5 * (ef - 2.0) * nf * nf + 0.5 * ef * nf;
    DimensionReport {
        rep_irr,
        lrep_irr,
        lhom_total,
        lrep_total,
    }
}

/// Draw Haar tuples until the image representation is irreducible with
/// simple nonzero spectra.  Generic tuples qualify immediately.
pub fn random_irreducible_tuple(
    n: usize,
    ell: usize,
    seed: Seed,
    tol: &Tolerances,
) -> Result<LagrangianTuple> {
    for attempt in 0..50u64 {
        let t = crate::lagrangian::random_tuple(n, ell, seed.child(attempt), tol)?;
        let rho = phi_tilde(&t, tol)?;
        if commutant_dim(&rho, tol) != 1 {
            continue;
        }
        let proj = spectral_projection(&rho, tol)?;
        let simple = proj.alpha.iter().all(|row| {
            row.iter().all(|&a| numerics::circ_dist(a, 0.0) > tol.cluster)
                && row.windows(2).all(|w| numerics::circ_dist(w[0], w[1]) > tol.cluster)
        });
        if simple {
            return Ok(t);
        }
    }
    Err(Error::Precondition(
        "random_irreducible_tuple: no generic tuple found (should not happen)".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrangian::random_tuple;
    use crate::numerics::circ_dist;

    const TOL: Tolerances = Tolerances::DEFAULT;

    #[test]
    fn phi_tilde_telescopes() {
        let l0 = Lagrangian::standard(2);
        let t = LagrangianTuple::new(vec![l0.clone(), l0.clone(), l0]).unwrap();
        let rho = phi_tilde(&t, &TOL).unwrap();
        for g in &rho.gammas {
            assert!(fro_norm(&(g - &eye(2))) < 1e-14);
        }
        // ell = 2: gamma_2 = gamma_1^{-1}
        let t2 = random_tuple(3, 2, Seed(1000), &TOL).unwrap();
        let rho2 = phi_tilde(&t2, &TOL).unwrap();
        let prod = rho2.gammas[0].dot(&rho2.gammas[1]);
        assert!(fro_norm(&(prod - eye(3))) < 1e-12);
        // random tuple: product telescopes to machine precision
        for k in 0..10u64 {
            let t = random_tuple(3, 4, Seed(1001).child(k), &TOL).unwrap();
            let rho = phi_tilde(&t, &TOL).unwrap();
            assert!(relation_defect(&rho.gammas) < 1e-12);
        }
    }

    #[test]
    fn spectral_projection_trivial() {
        let rho = Representation::trivial(3, 4);
        let proj = spectral_projection(&rho, &TOL).unwrap();
        assert_eq!(proj, SpectrumTuple::zeros(4, 3));
    }

    #[test]
    fn lagrangian_triple_index_set() {
        // n=2 Haar triples with simple nonzero spectra have index 2, 3 or 4
        let mut seen = std::collections::HashSet::new();
        for k in 0..60u64 {
            let t = random_tuple(2, 3, Seed(1002).child(k), &TOL).unwrap();
            let rho = phi_tilde(&t, &TOL).unwrap();
            let proj = spectral_projection(&rho, &TOL).unwrap();
            let ok = proj.alpha.iter().all(|row| {
                row.iter().all(|&a| circ_dist(a, 0.0) > 1e-6)
                    && row.windows(2).all(|w| (w[1] - w[0]).abs() > 1e-6)
            });
            if !ok {
                continue;
            }
            let i = crate::spectra::integer_index(&proj, 1e-8).unwrap();
            assert!((2..=4).contains(&i), "index {} out of range", i);
            seen.insert(i);
        }
        assert!(seen.len() >= 2, "expected several indices, saw {:?}", seen);
    }

    #[test]
    fn commutant_dims() {
        let rho = Representation::trivial(3, 3);
        assert_eq!(commutant_dim(&rho, &TOL), 9);
        assert_eq!(n0_trivial(&rho, &TOL), 3);
        assert_eq!(n1_zero_angles(&rho, &TOL).unwrap(), 9);
        // Haar Lagrangian triple: irreducible with probability one
        let t = random_tuple(2, 3, Seed(1003), &TOL).unwrap();
        let rho = phi_tilde(&t, &TOL).unwrap();
        assert_eq!(commutant_dim(&rho, &TOL), 1);
        assert_eq!(n0_trivial(&rho, &TOL), 0);
    }

    #[test]
    fn commutant_of_block_sum() {
        // direct sum of two non-isomorphic irreducibles has commutant dim 2
        let t1 = random_tuple(2, 3, Seed(1004), &TOL).unwrap();
        let t2 = random_tuple(2, 3, Seed(1005), &TOL).unwrap();
        let r1 = phi_tilde(&t1, &TOL).unwrap();
        let r2 = phi_tilde(&t2, &TOL).unwrap();
        let mut gammas = Vec::new();
        for s in 0..3 {
            let mut g = Array2::<C64>::zeros((4, 4));
            for i in 0..2 {
                for j in 0..2 {
                    g[(i, j)] = r1.gammas[s][(i, j)];
                    g[(2 + i, 2 + j)] = r2.gammas[s][(i, j)];
                }
            }
            gammas.push(g);
        }
        let rho = Representation::new(gammas, &TOL).unwrap();
        assert_eq!(commutant_dim(&rho, &TOL), 2);
    }

    #[test]
    fn twist_rotates_spectra() {
        let t = random_tuple(2, 3, Seed(1006), &TOL).unwrap();
        let rho = phi_tilde(&t, &TOL).unwrap();
        let before = spectral_projection(&rho, &TOL).unwrap();
        let phases: Vec<C64> = vec![
            C64::from_polar(1.0, 0.4),
            C64::from_polar(1.0, -0.9),
            C64::from_polar(1.0, 0.25),
        ];
        let tw = twist(&t, &phases, &TOL).unwrap();
        let after = spectral_projection(&phi_tilde(&tw, &TOL).unwrap(), &TOL).unwrap();
        for s in 0..3 {
            let shift = (phases[s] * phases[s] * (phases[(s + 1) % 3] * phases[(s + 1) % 3]).conj())
                .arg()
                / TWO_PI;
            let mut expected: Vec<f64> = before.alpha[s]
                .iter()
                .map(|&a| (a + shift).rem_euclid(1.0))
                .collect();
            expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for j in 0..2 {
                assert!(
                    circ_dist(after.alpha[s][j], expected[j]) < 1e-9,
                    "s={} got {:?} expected {:?}",
                    s,
                    after.alpha[s],
                    expected
                );
            }
        }
        // all phases equal: representation unchanged
        let c = C64::from_polar(1.0, 0.77);
        let tw = twist(&t, &[c, c, c], &TOL).unwrap();
        let rho2 = phi_tilde(&tw, &TOL).unwrap();
        for s in 0..3 {
            assert!(fro_norm(&(&rho2.gammas[s] - &rho.gammas[s])) < 1e-12);
        }
        // identity twist
        let one = C64::new(1.0, 0.0);
        let tw = twist(&t, &[one, one, one], &TOL).unwrap();
        assert_eq!(tw, t);
        // non-unit phase rejected
        assert!(twist(&t, &[C64::new(2.0, 0.0), one, one], &TOL).is_err());
    }

    #[test]
    fn bend_locality() {
        let t = random_tuple(3, 4, Seed(1007), &TOL).unwrap();
        let rho = phi_tilde(&t, &TOL).unwrap();
        let before = spectral_projection(&rho, &TOL).unwrap();
        let mut a = Array2::<f64>::zeros((3, 3));
        a[(0, 1)] = 0.6;
        a[(1, 0)] = -0.6;
        a[(0, 2)] = -0.2;
        a[(2, 0)] = 0.2;
        let s = 1usize;
        let r = 2usize;
        let bent = bend(&t, s, r, &a, &TOL).unwrap();
        let after = spectral_projection(&phi_tilde(&bent, &TOL).unwrap(), &TOL).unwrap();
        // only gamma_{s+r} may change class
        let moved = (s + r) % 4;
        for sp in 0..4 {
            if sp == moved {
                continue;
            }
            for j in 0..3 {
                assert!(
                    circ_dist(before.alpha[sp][j], after.alpha[sp][j]) < 1e-10,
                    "factor {} moved", sp
                );
            }
        }
        // zero bend is the identity
        let z = Array2::<f64>::zeros((3, 3));
        let same = bend(&t, 0, 2, &z, &TOL).unwrap();
        for s in 0..4 {
            assert!(fro_norm(&(same.get(s).matrix() - t.get(s).matrix())) < 1e-12);
        }
        // full-length bend conjugates everything: all spectra unchanged
        let global = bend(&t, 2, 4, &a, &TOL).unwrap();
        let ga = spectral_projection(&phi_tilde(&global, &TOL).unwrap(), &TOL).unwrap();
        for sp in 0..4 {
            for j in 0..3 {
                assert!(circ_dist(before.alpha[sp][j], ga.alpha[sp][j]) < 1e-10);
            }
        }
        // symmetric parameter rejected
        let mut sym = Array2::<f64>::zeros((3, 3));
        sym[(0, 1)] = 1.0;
        sym[(1, 0)] = 1.0;
        assert!(bend(&t, 0, 1, &sym, &TOL).is_err());
    }

    #[test]
    fn dphi_matches_finite_differences() {
        let t = random_tuple(2, 3, Seed(1008), &TOL).unwrap();
        let frames: Vec<CMat> = t
            .lagrangians
            .iter()
            .map(|l| l.frame(&TOL).unwrap())
            .collect();
        let dirs = o_perp_basis(&frames[1]);
        let w_elem = &dirs[1];
        let mut w: Vec<CMat> = vec![Array2::zeros((2, 2)); 3];
        w[1] = w_elem.clone();
        let x = dphi(&t, &w);
        // finite difference along M(t) = exp(tW/2) M exp(tW/2)^T
        let h = 1e-5;
        let perturb = |sign: f64| -> Representation {
            let mut ls = t.lagrangians.clone();
            let e = exp_skew_hermitian(&w_elem.mapv(|z| z * C64::new(sign * h / 2.0, 0.0))).unwrap();
            let m = e.dot(ls[1].matrix()).dot(&e.t().to_owned());
            ls[1] = Lagrangian::new(m, &TOL).unwrap();
            phi_tilde(&LagrangianTuple::new(ls).unwrap(), &TOL).unwrap()
        };
        let rp = perturb(1.0);
        let rm = perturb(-1.0);
        let rho = phi_tilde(&t, &TOL).unwrap();
        for s in 0..3 {
            let fd = (&rp.gammas[s] - &rm.gammas[s]).mapv(|z| z / C64::new(2.0 * h, 0.0));
            let analytic = x[s].dot(&rho.gammas[s]);
            let err = fro_norm(&(fd.clone() - &analytic));
            assert!(err < 1e-6, "factor {}: fd mismatch {}", s, err);
        }
        // image tangents satisfy the cocycle relation
        assert!(cocycle_defect(&rho, &x) < 1e-12);
    }

    #[test]
    fn jacobian_rank_values() {
        for (ell, n, seed) in [(3usize, 2usize, 1009u64), (3, 3, 1010), (4, 2, 1011)] {
            let t = random_irreducible_tuple(n, ell, Seed(seed), &TOL).unwrap();
            let (rank, ratio) = jacobian_rank(&t, &TOL).unwrap();
            let expected = ell * n * (n + 1) / 2 - 1;
            assert_eq!(rank, expected, "ell={} n={}", ell, n);
            assert!(ratio > 1e4, "gap ratio {}", ratio);
        }
        // trivial tuple is reducible: rank check refuses
        let l0 = Lagrangian::standard(2);
        let t = LagrangianTuple::new(vec![l0.clone(), l0.clone(), l0]).unwrap();
        assert!(jacobian_rank(&t, &TOL).is_err());
    }


    #[test]
    fn spectral_rank_values() {
        for (ell, n, seed) in [(3usize, 2usize, 1012u64), (3, 3, 1013), (4, 2, 1014)] {
            let t = random_irreducible_tuple(n, ell, Seed(seed), &TOL).unwrap();
            let (rank, ratio) = spectral_tangent_rank(&t, &TOL).unwrap();
            assert_eq!(rank, ell * n - 1, "ell={} n={}", ell, n);
            assert!(ratio > 1e4, "gap ratio {}", ratio);
        }
    }

    #[test]
    fn dimension_formulas() {
        // ell=3, n=2 generic: 4+2-6 = 0 and 2+1-3 = 0
        let generic2 = vec![vec![1usize, 1]; 3];
        let d = expected_dimensions(2, 3, &generic2);
        assert_eq!(d.rep_irr, 0.0);
        assert_eq!(d.lrep_irr, 0.0);
        // ell=3, n=3 generic: 9+2-9 = 2 and 4.5+1-4.5 = 1
        let generic3 = vec![vec![1usize, 1, 1]; 3];
        let d = expected_dimensions(3, 3, &generic3);
        assert_eq!(d.rep_irr, 2.0);
        assert_eq!(d.lrep_irr, 1.0);
        // ell=4, n=2 generic: 8+2-8 = 2, half = 1
        let generic42 = vec![vec![1usize, 1]; 4];
        let d = expected_dimensions(2, 4, &generic42);
        assert_eq!(d.rep_irr, 2.0);
        assert_eq!(d.lrep_irr, 1.0);
    }

    #[test]
    fn half_dimension_over_all_structures() {
        // dim L-locus = half of dim rep space for every multiplicity structure
        fn partitions_of(n: usize) -> Vec<Vec<usize>> {
            // all compositions of n (ordered multiplicities)
            let mut out = Vec::new();
            if n == 0 {
                out.push(vec![]);
                return out;
            }
            for first in 1..=n {
                for rest in partitions_of(n - first) {
                    let mut v = vec![first];
                    v.extend(rest);
                    out.push(v);
                }
            }
            out
        }
        for n in 1..=4usize {
            let comps = partitions_of(n);
            for ell in 3..=4usize {
                for c1 in &comps {
                    for c2 in &comps {
                        let mu = vec![c1.clone(), c2.clone(), c1.clone(), c2.clone()][..ell].to_vec();
                        let d = expected_dimensions(n, ell, &mu);
                        assert_eq!(d.lrep_irr * 2.0, d.rep_irr);
                    }
                }
            }
        }
    }

    #[test]
    fn statistical_irreducibility() {
        // reducibles are measure zero among Haar tuples
        let mut reducible = 0;
        for k in 0..300u64 {
            let n = 2 + (k % 2) as usize;
            let t = random_tuple(n, 3, Seed(1015).child(k), &TOL).unwrap();
            let rho = phi_tilde(&t, &TOL).unwrap();
            if commutant_dim(&rho, &TOL) != 1 {
                reducible += 1;
            }
        }
        assert_eq!(reducible, 0);
    }

    #[test]
    fn image_tangent_orthogonal_to_stabilizer_intersection() {
        // Construct a pair with nontrivial o_1 cap o_2: L2 = phase * L1 has
        // the same stabilizer.  Image tangents must be orthogonal to it.
        let l1 = Lagrangian::standard(2);
        let phase = C64::from_polar(1.0, 0.35);
        let m2 = l1.matrix().mapv(|z| z * phase * phase);
        let l2 = Lagrangian::new(m2, &TOL).unwrap();
        let l3 = crate::lagrangian::random_lagrangian(2, Seed(1016), &TOL).unwrap();
        let t = LagrangianTuple::new(vec![l1, l2, l3]).unwrap();
        // o_1 cap o_2 = o(2), spanned by the rotation generator
        let mut j = Array2::<C64>::zeros((2, 2));
        j[(0, 1)] = C64::new(1.0, 0.0);
        j[(1, 0)] = C64::new(-1.0, 0.0);
        let frames: Vec<CMat> = t.lagrangians.iter().map(|l| l.frame(&TOL).unwrap()).collect();
        for s in 0..3 {
            for w_elem in o_perp_basis(&frames[s]) {
                let mut w: Vec<CMat> = vec![Array2::zeros((2, 2)); 3];
                w[s] = w_elem;
                let x = dphi(&t, &w);
                // X_1 lives in gamma-tangent slot 0 = pair (L1, L2)
                let inner: f64 = -(0..2)
                    .map(|i| (0..2).map(|k| (j[(i, k)] * x[0][(k, i)]).re).sum::<f64>())
                    .sum::<f64>();
                assert!(inner.abs() < 1e-10, "s={} inner={}", s, inner);
            }
        }
    }
}
