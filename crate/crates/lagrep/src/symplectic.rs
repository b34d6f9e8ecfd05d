//! The invariant 2-form on products of conjugacy classes and the numerical
//! isotropy test for fixed-class Lagrangian deformations.
//!
//! Tangents to a conjugacy class at gamma are written X = (I - Ad_gamma) xi
//! for a generator xi; the representative is fixed by requiring xi
//! orthogonal to the centralizer algebra of gamma (minimal norm).

use ndarray::Array2;

use crate::deformation::{
    commutant_dim, dphi, phi_tilde, rep_spectral_data, spectral_differential,
    twist_bend_directions, RepSpectralData, Representation,
};
use crate::error::{Error, Result};
use crate::lagrangian::LagrangianTuple;
use crate::numerics::{
    self, adjoint, circ_dist, cluster_angles, fro_norm, svd_jacobi_real, unitary_eigen, C64,
    CMat, Seed, Tolerances, TWO_PI,
};

/// Ad-invariant inner product on u(n): <X, Y> = -Re Tr(XY).
pub fn lie_inner(x: &CMat, y: &CMat) -> f64 {
    let n = x.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..n {
            acc += (x[(i, k)] * y[(k, i)]).re;
        }
    }
    -acc
}

fn ad(g: &CMat, x: &CMat) -> CMat {
    g.dot(x).dot(&adjoint(g))
}

/// Generators for a class tangent: one xi_s per factor, each orthogonal to
/// the centralizer algebra of gamma_s.
#[derive(Debug, Clone)]
pub struct ClassTangent {
    pub xis: Vec<CMat>,
}

/// Minimal-norm generator xi with (I - Ad_gamma) xi = X; fails if X has a
/// component along the centralizer algebra above tolerance (such an X moves
/// the conjugacy class).
pub fn solve_generator(gamma: &CMat, x: &CMat, tol: &Tolerances) -> Result<CMat> {
    let n = gamma.nrows();
    if x.nrows() != n || x.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "solve_generator: {}x{} vs n={}",
            x.nrows(),
            x.ncols(),
            n
        )));
    }
    let eig = unitary_eigen(gamma, tol)?;
    let v = &eig.vectors;
    let ids = cluster_angles(&eig.alpha, tol.cluster);
    let xt = adjoint(v).dot(x).dot(v);
    let phases: Vec<C64> = eig
        .alpha
        .iter()
        .map(|&a| C64::from_polar(1.0, TWO_PI * a))
        .collect();
    let mut central = 0.0f64;
    let mut xi_t = Array2::<C64>::zeros((n, n));
    for j in 0..n {
        for k in 0..n {
            if ids[j] == ids[k] {
                central += xt[(j, k)].norm_sqr();
            } else {
                let denom = C64::new(1.0, 0.0) - phases[j] * phases[k].conj();
                xi_t[(j, k)] = xt[(j, k)] / denom;
            }
        }
    }
    let scale = fro_norm(x).max(1.0);
    if central.sqrt() > 1e-8 * scale {
        return Err(Error::Precondition(format!(
            "solve_generator: tangent has a class-changing component of size {:.3e}",
            central.sqrt()
        )));
    }
    Ok(v.dot(&xi_t).dot(&adjoint(v)))
}

/// The invariant 2-form on a product of conjugacy classes, evaluated on two
/// class tangents given by their generators.
pub fn two_form(rho: &Representation, xi: &ClassTangent, eta: &ClassTangent) -> Result<f64> {
    let ell = rho.ell;
    if xi.xis.len() != ell || eta.xis.len() != ell {
        return Err(Error::DimensionMismatch(format!(
            "two_form: generators {} / {} for ell = {}",
            xi.xis.len(),
            eta.xis.len(),
            ell
        )));
    }
    let n = rho.n;
    // diagonal terms
    let mut total = 0.0;
    for s in 0..ell {
        let g = &rho.gammas[s];
        total += lie_inner(&ad(g, &xi.xis[s]), &eta.xis[s]);
        total -= lie_inner(&ad(g, &eta.xis[s]), &xi.xis[s]);
    }
    // cross terms with prefix-conjugated fundamental fields
    let mut f = Vec::with_capacity(ell);
    let mut h = Vec::with_capacity(ell);
    let mut prefix = numerics::eye(n);
    for t in 0..ell {
        let g = &rho.gammas[t];
        let xf = &xi.xis[t] - &ad(g, &xi.xis[t]);
        let ef = &eta.xis[t] - &ad(g, &eta.xis[t]);
        f.push(ad(&prefix, &xf));
        h.push(ad(&prefix, &ef));
        prefix = prefix.dot(g);
    }
    for s in 0..ell {
        for t in (s + 1)..ell {
            total += lie_inner(&f[s], &h[t]);
            total -= lie_inner(&h[s], &f[t]);
        }
    }
    Ok(0.5 * total)
}

/// A fixed-class tangent direction at a Lagrangian tuple: the per-factor
/// right-translated components and their generators.
pub struct FixedClassDirection {
    pub components: Vec<CMat>,
    pub generators: ClassTangent,
    pub norm: f64,
}

/// Spanning set of fixed-class Lagrangian tangent directions: the kernel of
/// the spectral differential restricted to the twist+bend span.
pub fn fixed_class_directions(
    tuple: &LagrangianTuple,
    tol: &Tolerances,
) -> Result<(Representation, Vec<FixedClassDirection>)> {
    let rho = phi_tilde(tuple, tol)?;
    if commutant_dim(&rho, tol) != 1 {
        return Err(Error::Precondition(
            "isotropy test needs an irreducible representation".into(),
        ));
    }
    let proj = crate::deformation::spectral_projection(&rho, tol)?;
    for (s, row) in proj.alpha.iter().enumerate() {
        let simple = row
            .windows(2)
            .all(|w| circ_dist(w[0], w[1]) > tol.cluster)
            && row.iter().all(|&a| circ_dist(a, 0.0) > tol.cluster);
        if !simple {
            return Err(Error::Precondition(format!(
                "isotropy test needs simple nonzero spectra; factor {} fails",
                s
            )));
        }
    }
    let data = rep_spectral_data(&rho, tol)?;
    let dirs = twist_bend_directions(tuple, tol)?;
    let tangents: Vec<Vec<CMat>> = dirs.iter().map(|w| dphi(tuple, w)).collect();
    let rows = rho.ell * rho.n;
    let mut smat = Array2::<f64>::zeros((rows, tangents.len()));
    for (col, x) in tangents.iter().enumerate() {
        for (row, v) in spectral_differential(&data, x).into_iter().enumerate() {
            smat[(row, col)] = v;
        }
    }
    let (sv, vmat) = svd_jacobi_real(&smat);
    let cutoff = 1e-7 * sv.first().copied().unwrap_or(0.0).max(1.0);
    let mut out = Vec::new();
    for (col, &s) in sv.iter().enumerate() {
        if s > cutoff {
            continue;
        }
        // assemble the tangent combination
        let mut x: Vec<CMat> = vec![Array2::zeros((rho.n, rho.n)); rho.ell];
        for (k, t) in tangents.iter().enumerate() {
            let c = vmat[(k, col)];
            if c.abs() < 1e-300 {
                continue;
            }
            for s in 0..rho.ell {
                x[s] = &x[s] + &t[s].mapv(|z| z * c);
            }
        }
        let norm: f64 = x.iter().map(|m| fro_norm(m).powi(2)).sum::<f64>().sqrt();
        if norm < 1e-10 {
            continue;
        }
        let mut xis = Vec::with_capacity(rho.ell);
        for s in 0..rho.ell {
            xis.push(solve_generator(&rho.gammas[s], &x[s], tol)?);
        }
        out.push(FixedClassDirection {
            components: x,
            generators: ClassTangent { xis },
            norm,
        });
    }
    Ok((rho, out))
}

/// Maximum of |two_form| over all pairs of fixed-class Lagrangian tangent
/// directions, normalized by the product of tangent norms.
pub fn isotropy_defect(tuple: &LagrangianTuple, tol: &Tolerances) -> Result<f64> {
    let (rho, dirs) = fixed_class_directions(tuple, tol)?;
    let mut worst = 0.0f64;
    for i in 0..dirs.len() {
        for j in (i + 1)..dirs.len() {
            let val = two_form(&rho, &dirs[i].generators, &dirs[j].generators)?;
            worst = worst.max(val.abs() / (dirs[i].norm * dirs[j].norm));
        }
    }
    Ok(worst)
}

/// A random class-preserving (but generically non-Lagrangian) tangent:
/// random skew-hermitian generators projected off each centralizer algebra.
pub fn random_class_tangent(
    rho: &Representation,
    data: &RepSpectralData,
    seed: Seed,
    tol: &Tolerances,
) -> ClassTangent {
    use rand_distr::{Distribution, StandardNormal};
    let n = rho.n;
    let mut rng = seed.rng();
    let mut xis = Vec::with_capacity(rho.ell);
    for s in 0..rho.ell {
        let mut y = Array2::<C64>::zeros((n, n));
        for i in 0..n {
            let d: f64 = StandardNormal.sample(&mut rng);
            y[(i, i)] = C64::new(0.0, d);
            for j in (i + 1)..n {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                y[(i, j)] = C64::new(re, im);
                y[(j, i)] = C64::new(-re, im);
            }
        }
        // project off the centralizer: zero intra-cluster entries in the
        // eigenbasis of gamma_s
        let v = &data.eigs[s].vectors;
        let ids = cluster_angles(&data.eigs[s].alpha, tol.cluster);
        let mut yt = adjoint(v).dot(&y).dot(v);
        for i in 0..n {
            for j in 0..n {
                if ids[i] == ids[j] {
                    yt[(i, j)] = C64::new(0.0, 0.0);
                }
            }
        }
        xis.push(v.dot(&yt).dot(&adjoint(v)));
    }
    ClassTangent { xis }
}

/// Norm of the tangent induced by a generator tuple.
pub fn tangent_norm(rho: &Representation, xi: &ClassTangent) -> f64 {
    let mut acc = 0.0;
    for s in 0..rho.ell {
        let g = &rho.gammas[s];
        let x = &xi.xis[s] - &ad(g, &xi.xis[s]);
        acc += fro_norm(&x).powi(2);
    }
    acc.sqrt()
}
