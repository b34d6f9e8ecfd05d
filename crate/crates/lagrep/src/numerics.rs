//! Dense complex/real matrix kernels shared by the whole toolkit.
//!
//! Everything here targets small matrices (n <= 16): spectra of unitary
//! matrices, inertia signatures, Takagi-style factorization of symmetric
//! unitary matrices, Haar sampling and the conjugacy-class distance used
//! as a solver objective.  All routines are pure and deterministic.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = Array2<C64>;
pub type CVec = Array1<C64>;
pub type RMat = Array2<f64>;

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Deterministic RNG seed.  Each value yields an independent stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Seed(pub u64);

impl Seed {
    /// Derive a child seed; used to hand independent streams to restarts
    /// and grid points without coupling them to thread scheduling.
    pub fn child(self, index: u64) -> Seed {
        Seed(splitmix64(self.0 ^ splitmix64(index.wrapping_add(0x9e37_79b9_7f4a_7c15))))
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Numerical tolerances.  Overridable; defaults are the contract values.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Unitarity defect ||A*A - I||_F allowed on inputs.
    pub unitarity: f64,
    /// Angles within this distance of 0 or 1 snap to 0 (branch cut).
    pub angle_snap: f64,
    /// Circular distance under which two angles count as equal.
    pub cluster: f64,
    /// Absolute singular-value cutoff for rank/nullspace decisions.
    pub rank_cutoff: f64,
    /// Residual allowed on factorizations (Takagi round trip).
    pub factor_residual: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            unitarity: 1e-10,
            angle_snap: 1e-9,
            cluster: 1e-7,
            rank_cutoff: 1e-8,
            factor_residual: 1e-9,
        }
    }
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        unitarity: 1e-10,
        angle_snap: 1e-9,
        cluster: 1e-7,
        rank_cutoff: 1e-8,
        factor_residual: 1e-9,
    };
}

// ---------------------------------------------------------------------------
// basic helpers

pub fn eye(n: usize) -> CMat {
    Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

pub fn adjoint(a: &CMat) -> CMat {
    a.t().mapv(|z| z.conj())
}

pub fn conj_mat(a: &CMat) -> CMat {
    a.mapv(|z| z.conj())
}

pub fn fro_norm(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn fro_norm_real(a: &RMat) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    a.dot(b)
}

/// ||A*A - I||_F, the unitarity defect.
pub fn unitarity_defect(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut g = adjoint(a).dot(a);
    for i in 0..n {
        g[(i, i)] -= C64::new(1.0, 0.0);
    }
    fro_norm(&g)
}

pub fn check_unitary(a: &CMat, tol: f64) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "expected square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let defect = unitarity_defect(a);
    if defect > tol {
        return Err(Error::NotUnitary { defect, tol });
    }
    Ok(())
}

pub fn symmetry_defect(a: &CMat) -> f64 {
    let mut d = 0.0f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            d += (a[(i, j)] - a[(j, i)]).norm_sqr();
        }
    }
    d.sqrt()
}

pub fn skew_hermitian_defect(a: &CMat) -> f64 {
    let mut d = 0.0f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            d += (a[(i, j)] + a[(j, i)].conj()).norm_sqr();
        }
    }
    d.sqrt()
}

/// Circular distance between two angles in [0,1).
pub fn circ_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Reduce an angle to [0,1), snapping values within `snap` of 0 or 1 to 0.
pub fn canonical_angle(alpha: f64, snap: f64) -> f64 {
    let mut a = alpha.rem_euclid(1.0);
    if a < snap || a > 1.0 - snap {
        a = 0.0;
    }
    a
}

// ---------------------------------------------------------------------------
// hermitian eigensolvers (cyclic Jacobi)

/// Eigendecomposition of a complex hermitian matrix: H = V diag(w) V*,
/// eigenvalues ascending, V unitary.  Cyclic Jacobi; quadratic convergence,
/// backward stable, plenty for n <= 16.
pub fn eigh_complex(h: &CMat) -> (Vec<f64>, CMat) {
    let n = h.nrows();
    let mut a = h.clone();
    let mut v = eye(n);
    if n <= 1 {
        let w = if n == 1 { vec![a[(0, 0)].re] } else { vec![] };
        return (w, v);
    }
    let scale = fro_norm(&a).max(1e-300);
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.norm() <= 1e-18 * scale {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let r = apq.norm();
                let phi = apq / r; // e^{i arg}
                // rotate in the (p,q) plane: columns p' = c p + s conj(phi) q ...
                let tau = (aqq - app) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    1.0 / (tau - (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // G acts as: new_p = c*e_p - s*conj(phi)*e_q ; new_q = s*phi*e_p + c*e_q
                // apply A <- G* A G and V <- V G
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * c - akq * phi.conj() * s;
                    a[(k, q)] = akp * phi * s + akq * c;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * c - aqk * phi * s;
                    a[(q, k)] = apk * phi.conj() * s + aqk * c;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c - vkq * phi.conj() * s;
                    v[(k, q)] = vkp * phi * s + vkq * c;
                }
            }
        }
    }
    let mut w: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    // sort ascending, permute eigenvector columns alongside
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| w[i].partial_cmp(&w[j]).unwrap());
    let wp: Vec<f64> = idx.iter().map(|&i| w[i]).collect();
    let mut vp = v.clone();
    for (new, &old) in idx.iter().enumerate() {
        for k in 0..n {
            vp[(k, new)] = v[(k, old)];
        }
    }
    w = wp;
    (w, vp)
}

/// Real symmetric eigendecomposition with real orthogonal eigenvectors.
pub fn eigh_real(h: &RMat) -> (Vec<f64>, RMat) {
    let n = h.nrows();
    let mut a = h.clone();
    let mut v = Array2::<f64>::eye(n);
    if n <= 1 {
        let w = if n == 1 { vec![a[(0, 0)]] } else { vec![] };
        return (w, v);
    }
    let scale = fro_norm_real(&a).max(1e-300);
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-18 * scale {
                    continue;
                }
                let tau = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    1.0 / (tau - (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * c - akq * s;
                    a[(k, q)] = akp * s + akq * c;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * c - aqk * s;
                    a[(q, k)] = apk * s + aqk * c;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c - vkq * s;
                    v[(k, q)] = vkp * s + vkq * c;
                }
            }
        }
    }
    let w: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| w[i].partial_cmp(&w[j]).unwrap());
    let wp: Vec<f64> = idx.iter().map(|&i| w[i]).collect();
    let mut vp = v.clone();
    for (new, &old) in idx.iter().enumerate() {
        for k in 0..n {
            vp[(k, new)] = v[(k, old)];
        }
    }
    (wp, vp)
}

// ---------------------------------------------------------------------------
// one-sided Jacobi SVD (rank / nullspace workhorse)

/// Singular values (descending) and right singular vectors of a complex
/// matrix, via one-sided Jacobi.  Small singular values come out accurate
/// to machine precision, which is what rank decisions need.
pub fn svd_jacobi(a: &CMat) -> (Vec<f64>, CMat) {
    let m = a.nrows();
    let n = a.ncols();
    let mut u = a.clone();
    let mut v = eye(n);
    let scale = fro_norm(&u).max(1e-300);
    let eps = 1e-15;
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut app = 0.0f64;
                let mut aqq = 0.0f64;
                let mut apq = C64::new(0.0, 0.0);
                for k in 0..m {
                    app += u[(k, p)].norm_sqr();
                    aqq += u[(k, q)].norm_sqr();
                    apq += u[(k, p)].conj() * u[(k, q)];
                }
                let r = apq.norm();
                if r <= eps * (app * aqq).sqrt().max(1e-300) {
                    continue;
                }
                rotated = true;
                let phi = apq / r;
                let tau = (aqq - app) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    1.0 / (tau - (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..m {
                    let ukp = u[(k, p)];
                    let ukq = u[(k, q)];
                    u[(k, p)] = ukp * c - ukq * phi.conj() * s;
                    u[(k, q)] = ukp * phi * s + ukq * c;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c - vkq * phi.conj() * s;
                    v[(k, q)] = vkp * phi * s + vkq * c;
                }
            }
        }
        if !rotated {
            break;
        }
        let _ = scale;
    }
    let mut sv: Vec<f64> = (0..n)
        .map(|j| (0..m).map(|k| u[(k, j)].norm_sqr()).sum::<f64>().sqrt())
        .collect();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| sv[j].partial_cmp(&sv[i]).unwrap());
    let svp: Vec<f64> = idx.iter().map(|&i| sv[i]).collect();
    let mut vp = v.clone();
    for (new, &old) in idx.iter().enumerate() {
        for k in 0..n {
            vp[(k, new)] = v[(k, old)];
        }
    }
    sv = svp;
    (sv, vp)
}

/// Real-matrix wrapper around [`svd_jacobi`].
pub fn svd_jacobi_real(a: &RMat) -> (Vec<f64>, RMat) {
    let ac = a.mapv(|x| C64::new(x, 0.0));
    let (sv, v) = svd_jacobi(&ac);
    (sv, v.mapv(|z| z.re))
}

/// Nullspace dimension at an absolute singular-value cutoff.
pub fn nullity(sv: &[f64], cutoff: f64) -> usize {
    sv.iter().filter(|&&s| s <= cutoff).count()
}

/// Numerical rank by singular-value gap detection (scale free): the rank is
/// set at the first ratio gap exceeding `gap_ratio` whose tail is already
/// negligible against s_max; if no such gap exists everything above
/// 1e-12 * s_max counts.  Returns (rank, achieved gap ratio).
pub fn rank_by_gap(sv: &[f64], gap_ratio: f64) -> (usize, f64) {
    if sv.is_empty() || sv[0] <= 1e-300 {
        return (0, f64::INFINITY);
    }
    for i in 0..sv.len() - 1 {
        let lo = sv[i + 1].max(1e-300);
        let ratio = sv[i] / lo;
        if ratio > gap_ratio && sv[i + 1] <= 1e-6 * sv[0] {
            return (i + 1, ratio);
        }
    }
    (sv.iter().filter(|&&s| s > 1e-12 * sv[0]).count(), 1.0)
}

// ---------------------------------------------------------------------------
// spectra of unitary matrices

/// Sorted angles alpha in [0,1) with eigenvalues exp(2*pi*i*alpha).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub alpha: Vec<f64>,
    pub n: usize,
}

impl Spectrum {
    pub fn new(alpha: Vec<f64>) -> Spectrum {
        let n = alpha.len();
        Spectrum { alpha, n }
    }

    /// Multiplicity of the angle 0 under the circular clustering tolerance.
    pub fn zero_multiplicity(&self, cluster_tol: f64) -> usize {
        self.alpha
            .iter()
            .filter(|&&a| circ_dist(a, 0.0) < cluster_tol)
            .count()
    }

    /// Spectrum of the inverse matrix: angles negated mod 1, re-sorted.
    pub fn inverse(&self) -> Spectrum {
        let mut alpha: Vec<f64> = self
            .alpha
            .iter()
            .map(|&a| if a == 0.0 { 0.0 } else { 1.0 - a })
            .collect();
        alpha.sort_by(|x, y| x.partial_cmp(y).unwrap());
        Spectrum::new(alpha)
    }
}

/// Full spectral data of a unitary matrix: angles plus a unitary V with
/// A = V diag(exp(2 pi i alpha)) V*.
pub struct UnitaryEigen {
    pub alpha: Vec<f64>,
    pub vectors: CMat,
}

/// Eigendecomposition of a unitary matrix through the commuting hermitian
/// pair H1 = (A+A*)/2, H2 = (A-A*)/2i: diagonalize H1, then H2 on each
/// H1-eigenspace (clustering threshold 1e-8).
pub fn unitary_eigen(a: &CMat, tol: &Tolerances) -> Result<UnitaryEigen> {
    check_unitary(a, tol.unitarity)?;
    let n = a.nrows();
    let astar = adjoint(a);
    let h1 = (a + &astar).mapv(|z| z * 0.5);
    let h2 = (a - &astar).mapv(|z| z * C64::new(0.0, -0.5));
    let (w1, mut v) = eigh_complex(&h1);
    // refine within H1-clusters by diagonalizing H2 there
    let clusters = cluster_values(&w1, 1e-8);
    for (lo, hi) in clusters {
        let len = hi - lo;
        if len <= 1 {
            continue;
        }
        let vc = v.slice(ndarray::s![.., lo..hi]).to_owned();
        let block = adjoint(&vc).dot(&h2).dot(&vc);
        let (_, w) = eigh_complex(&block);
        let rotated = vc.dot(&w);
        for (col, j) in (lo..hi).enumerate() {
            for k in 0..n {
                v[(k, j)] = rotated[(k, col)];
            }
        }
    }
    // Rayleigh quotients give the eigenvalue phases
    let av = a.dot(&v);
    let mut alpha: Vec<f64> = (0..n)
        .map(|j| {
            let mut z = C64::new(0.0, 0.0);
            for k in 0..n {
                z += v[(k, j)].conj() * av[(k, j)];
            }
            let theta = z.im.atan2(z.re);
            canonical_angle(theta / TWO_PI, tol.angle_snap)
        })
        .collect();
    // sort ascending, permuting eigenvectors alongside
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| alpha[i].partial_cmp(&alpha[j]).unwrap());
    let ap: Vec<f64> = idx.iter().map(|&i| alpha[i]).collect();
    let mut vp = v.clone();
    for (new, &old) in idx.iter().enumerate() {
        for k in 0..n {
            vp[(k, new)] = v[(k, old)];
        }
    }
    alpha = ap;
    Ok(UnitaryEigen { alpha, vectors: vp })
}

/// The sorted angle vector of a unitary matrix.
pub fn spectrum(a: &CMat, tol: &Tolerances) -> Result<Spectrum> {
    Ok(Spectrum::new(unitary_eigen(a, tol)?.alpha))
}

/// Contiguous clusters of an ascending value list: (start, end) half-open.
pub fn cluster_values(values: &[f64], tol: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let n = values.len();
    let mut start = 0;
    for i in 1..=n {
        if i == n || values[i] - values[i - 1] > tol {
            out.push((start, i));
            start = i;
        }
    }
    out
}

/// Clusters of an ascending angle list in [0,1) under *circular* tolerance:
/// a trailing cluster within tol of 1 is merged with a leading cluster at 0.
/// Returns per-entry cluster ids (contiguous except for the possible wrap).
pub fn cluster_angles(alpha: &[f64], tol: f64) -> Vec<usize> {
    let n = alpha.len();
    let mut id = vec![0usize; n];
    let mut next = 0usize;
    for i in 0..n {
        if i > 0 && alpha[i] - alpha[i - 1] > tol {
            next += 1;
        }
        id[i] = next;
    }
    if n > 1 && next > 0 && circ_dist(alpha[n - 1], alpha[0]) <= tol {
        // wrap: merge the last cluster into the first
        let last = id[n - 1];
        for x in id.iter_mut() {
            if *x == last {
                *x = 0;
            }
        }
    }
    id
}

// ---------------------------------------------------------------------------
// Haar sampling

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the
/// R-diagonal kept real positive (modified Gram-Schmidt).  Deterministic
/// per seed.
pub fn haar_unitary(n: usize, seed: Seed) -> Result<CMat> {
    if n == 0 {
        return Err(Error::InvalidArgument("haar_unitary: n must be >= 1".into()));
    }
    let mut rng = seed.rng();
    let mut z = Array2::<C64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            z[(i, j)] = C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2;
        }
    }
    // modified Gram-Schmidt, re-orthogonalized once
    let mut q = z;
    for j in 0..n {
        for _pass in 0..2 {
            for k in 0..j {
                let mut r = C64::new(0.0, 0.0);
                for i in 0..n {
                    r += q[(i, k)].conj() * q[(i, j)];
                }
                for i in 0..n {
                    let qik = q[(i, k)];
                    q[(i, j)] -= qik * r;
                }
            }
        }
        let norm: f64 = (0..n).map(|i| q[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        for i in 0..n {
            q[(i, j)] /= norm;
        }
    }
    Ok(q)
}

// ---------------------------------------------------------------------------
// signatures

/// Counts of eigenvalues of a real symmetric matrix above tol, below -tol,
/// and within [-tol, tol].
pub fn signature(q: &RMat, tol: f64) -> Result<(usize, usize, usize)> {
    if q.nrows() != q.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "signature: expected square, got {}x{}",
            q.nrows(),
            q.ncols()
        )));
    }
    let mut defect = 0.0f64;
    for i in 0..q.nrows() {
        for j in 0..q.ncols() {
            defect += (q[(i, j)] - q[(j, i)]).powi(2);
        }
    }
    if defect.sqrt() > tol.max(1e-12) * fro_norm_real(q).max(1.0) {
        return Err(Error::NotSymmetric {
            defect: defect.sqrt(),
            tol,
        });
    }
    let (w, _) = eigh_real(q);
    let n_plus = w.iter().filter(|&&x| x > tol).count();
    let n_minus = w.iter().filter(|&&x| x < -tol).count();
    let n_zero = w.len() - n_plus - n_minus;
    Ok((n_plus, n_minus, n_zero))
}

// ---------------------------------------------------------------------------
// Takagi-style factorization of symmetric unitary matrices

/// Real orthogonal diagonalization of a symmetric unitary M: returns
/// (o, d) with o real orthogonal, o^T M o = diag(d), and the diagonal
/// sorted by ascending angle in [0,1).
///
/// M = X + iY with X, Y real symmetric commuting; diagonalize X, then Y on
/// each X-eigenspace (clustering threshold 1e-8).
pub fn orthogonal_diagonalization(m: &CMat, tol: &Tolerances) -> Result<(RMat, Vec<C64>)> {
    check_unitary(m, tol.unitarity)?;
    let sd = symmetry_defect(m);
    if sd > tol.unitarity {
        return Err(Error::NotSymmetric {
            defect: sd,
            tol: tol.unitarity,
        });
    }
    let n = m.nrows();
    let x = m.mapv(|z| z.re);
    let y = m.mapv(|z| z.im);
    let (wx, mut o) = eigh_real(&x);
    for (lo, hi) in cluster_values(&wx, 1e-8) {
        let len = hi - lo;
        if len <= 1 {
            continue;
        }
        let oc = o.slice(ndarray::s![.., lo..hi]).to_owned();
        let block = oc.t().dot(&y).dot(&oc);
        let (_, w) = eigh_real(&block);
        let rot = oc.dot(&w);
        for (col, j) in (lo..hi).enumerate() {
            for k in 0..n {
                o[(k, j)] = rot[(k, col)];
            }
        }
    }
    let oc = o.mapv(|v| C64::new(v, 0.0));
    let d_full = oc.t().dot(m).dot(&oc);
    let mut off = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                off += d_full[(i, j)].norm_sqr();
            }
        }
    }
    if off.sqrt() > 1e-7 {
        return Err(Error::DiagonalizationFailure {
            residual: off.sqrt(),
            tol: 1e-7,
        });
    }
    let mut d: Vec<C64> = (0..n).map(|j| d_full[(j, j)]).collect();
    // sort columns by ascending eigenvalue angle
    let angle = |z: &C64| -> f64 { canonical_angle(z.im.atan2(z.re) / TWO_PI, 1e-12) };
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| angle(&d[i]).partial_cmp(&angle(&d[j])).unwrap());
    let dp: Vec<C64> = idx.iter().map(|&i| d[i]).collect();
    let mut op = o.clone();
    for (new, &old) in idx.iter().enumerate() {
        for k in 0..n {
            op[(k, new)] = o[(k, old)];
        }
    }
    d = dp;
    Ok((op, d))
}

/// For symmetric unitary M, produce unitary g with g g^T = M.
///
/// Writes o^T M o = D through [`orthogonal_diagonalization`] and returns
/// g = o D^{1/2} with the principal branch of each diagonal phase
/// (arg in [0, 2pi)).
pub fn takagi_symmetric_unitary(m: &CMat, tol: &Tolerances) -> Result<CMat> {
    let n = m.nrows();
    let (o, d) = orthogonal_diagonalization(m, tol)?;
    let mut g = o.mapv(|v| C64::new(v, 0.0));
    for j in 0..n {
        let mut theta = d[j].im.atan2(d[j].re);
        if theta < 0.0 {
            theta += TWO_PI;
        }
        let half = C64::from_polar(1.0, theta / 2.0);
        for i in 0..n {
            g[(i, j)] *= half;
        }
    }
    // round-trip guarantee
    let gt = g.t().to_owned();
    let residual = fro_norm(&(g.dot(&gt) - m));
    if residual > tol.factor_residual {
        return Err(Error::DiagonalizationFailure {
            residual,
            tol: tol.factor_residual,
        });
    }
    Ok(g)
}

// ---------------------------------------------------------------------------
// conjugacy-class distance

/// Sum over j of |e(alpha_j) - e(beta_{m(j)})|^2 minimized over cyclic-shift
/// matchings of the two sorted angle lists.
pub fn class_distance(spec: &Spectrum, target: &Spectrum) -> Result<f64> {
    if spec.n != target.n {
        return Err(Error::DimensionMismatch(format!(
            "class_distance: {} vs {}",
            spec.n, target.n
        )));
    }
    let n = spec.n;
    if n == 0 {
        return Ok(0.0);
    }
    let mut best = f64::INFINITY;
    for shift in 0..n {
        let mut total = 0.0;
        for j in 0..n {
            let d = spec.alpha[j] - target.alpha[(j + shift) % n];
            let s = (std::f64::consts::PI * d).sin();
            total += 4.0 * s * s;
        }
        best = best.min(total);
    }
    Ok(best)
}

/// The cyclic matching realizing [`class_distance`]: target index for each
/// spectrum index.
pub fn class_matching(spec: &Spectrum, target: &Spectrum) -> Result<usize> {
    if spec.n != target.n {
        return Err(Error::DimensionMismatch(format!(
            "class_matching: {} vs {}",
            spec.n, target.n
        )));
    }
    let n = spec.n;
    let mut best = f64::INFINITY;
    let mut best_shift = 0;
    for shift in 0..n {
        let mut total = 0.0;
        for j in 0..n {
            let d = spec.alpha[j] - target.alpha[(j + shift) % n];
            let s = (std::f64::consts::PI * d).sin();
            total += 4.0 * s * s;
        }
        if total < best {
            best = total;
            best_shift = shift;
        }
    }
    Ok(best_shift)
}

// ---------------------------------------------------------------------------
// matrix exponential of skew-hermitian matrices

/// exp(X) for skew-hermitian X, through the hermitian eigendecomposition of
/// iX; the result is unitary to working precision.
pub fn exp_skew_hermitian(x: &CMat) -> Result<CMat> {
    let defect = skew_hermitian_defect(x);
    if defect > 1e-8 * fro_norm(x).max(1.0) {
        return Err(Error::NotSkewHermitian { defect });
    }
    let h = x.mapv(|z| z * C64::new(0.0, 1.0)); // iX hermitian
    let (w, v) = eigh_complex(&h);
    let n = x.nrows();
    let mut d = Array2::<C64>::zeros((n, n));
    for j in 0..n {
        d[(j, j)] = C64::from_polar(1.0, -w[j]);
    }
    Ok(v.dot(&d).dot(&adjoint(&v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cm(rows: Vec<Vec<(f64, f64)>>) -> CMat {
        let n = rows.len();
        Array2::from_shape_fn((n, rows[0].len()), |(i, j)| {
            C64::new(rows[i][j].0, rows[i][j].1)
        })
    }

    #[test]
    fn spectrum_identity_is_zero() {
        let a = eye(3);
        let s = spectrum(&a, &Tolerances::DEFAULT).unwrap();
        assert_eq!(s.alpha, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn spectrum_diag_i_minus_one() {
        // diag(i, -1) -> (1/4, 1/2)
        let a = cm(vec![
            vec![(0.0, 1.0), (0.0, 0.0)],
            vec![(0.0, 0.0), (-1.0, 0.0)],
        ]);
        let s = spectrum(&a, &Tolerances::DEFAULT).unwrap();
        assert!((s.alpha[0] - 0.25).abs() < 1e-12);
        assert!((s.alpha[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn spectrum_scalar_phase() {
        // n=1, A = e^{2 i theta}, theta = 0.3: alpha = 0.3/pi
        let theta: f64 = 0.3;
        let a = cm(vec![vec![((2.0 * theta).cos(), (2.0 * theta).sin())]]);
        let s = spectrum(&a, &Tolerances::DEFAULT).unwrap();
        let expect = (theta / std::f64::consts::PI).rem_euclid(1.0);
        assert!((s.alpha[0] - expect).abs() < 1e-12, "{} vs {}", s.alpha[0], expect);
    }

    #[test]
    fn spectrum_rejects_non_unitary() {
        let a = cm(vec![
            vec![(2.0, 0.0), (0.0, 0.0)],
            vec![(0.0, 0.0), (1.0, 0.0)],
        ]);
        assert!(matches!(
            spectrum(&a, &Tolerances::DEFAULT),
            Err(Error::NotUnitary { .. })
        ));
    }

    #[test]
    fn haar_is_unitary_and_deterministic() {
        let a = haar_unitary(2, Seed(1)).unwrap();
        assert!(unitarity_defect(&a) < 1e-12);
        let b1 = haar_unitary(3, Seed(7)).unwrap();
        let b2 = haar_unitary(3, Seed(7)).unwrap();
        assert_eq!(b1, b2);
        assert!(haar_unitary(0, Seed(0)).is_err());
    }

    #[test]
    fn haar_trace_moment() {
        // Haar moment: E |Tr A|^2 = 1; Monte-Carlo oracle with 10^4 samples.
        let samples = 10_000u64;
        let mut acc = 0.0;
        for k in 0..samples {
            let a = haar_unitary(2, Seed(424242).child(k)).unwrap();
            let tr = a[(0, 0)] + a[(1, 1)];
            acc += tr.norm_sqr();
        }
        let mean = acc / samples as f64;
        assert!((mean - 1.0).abs() < 0.05, "mean |Tr|^2 = {}", mean);
    }

    #[test]
    fn spectrum_conjugation_invariance() {
        for k in 0..20 {
            let a = haar_unitary(4, Seed(10).child(k)).unwrap();
            let u = haar_unitary(4, Seed(11).child(k)).unwrap();
            let conj = u.dot(&a).dot(&adjoint(&u));
            let s1 = spectrum(&a, &Tolerances::DEFAULT).unwrap();
            let s2 = spectrum(&conj, &Tolerances::DEFAULT).unwrap();
            for j in 0..4 {
                assert!(circ_dist(s1.alpha[j], s2.alpha[j]) < 1e-10);
            }
        }
    }

    #[test]
    fn signature_examples() {
        let d = Array2::from_diag(&ndarray::arr1(&[1.0, -1.0, 0.0]));
        assert_eq!(signature(&d, 1e-10).unwrap(), (1, 1, 1));
        let z = Array2::<f64>::zeros((3, 3));
        assert_eq!(signature(&z, 1e-10).unwrap(), (0, 0, 3));
        let mut offdiag = Array2::<f64>::zeros((2, 2));
        offdiag[(0, 1)] = 1.0;
        offdiag[(1, 0)] = 1.0;
        assert_eq!(signature(&offdiag, 1e-10).unwrap(), (1, 1, 0));
    }

    #[test]
    fn signature_congruence_invariance() {
        let mut rng = Seed(99).rng();
        for _ in 0..10 {
            let q0 = {
                let mut q = Array2::<f64>::zeros((4, 4));
                for i in 0..4 {
                    for j in 0..=i {
                        let v: f64 = StandardNormal.sample(&mut rng);
                        q[(i, j)] = v;
                        q[(j, i)] = v;
                    }
                }
                q
            };
            let p = {
                // random invertible (identity + small noise keeps conditioning mild)
                let mut p = Array2::<f64>::eye(4);
                for i in 0..4 {
                    for j in 0..4 {
                        let v: f64 = StandardNormal.sample(&mut rng);
                        p[(i, j)] += 0.3 * v;
                    }
                }
                p
            };
            let q1 = p.t().dot(&q0).dot(&p);
            let s0 = signature(&q0, 1e-9).unwrap();
            let s1 = signature(&q1, 1e-9).unwrap();
            assert_eq!(s0, s1);
        }
    }

    #[test]
    fn takagi_identity_and_diagonal() {
        let g = takagi_symmetric_unitary(&eye(3), &Tolerances::DEFAULT).unwrap();
        let gt = g.t().to_owned();
        assert!(fro_norm(&(g.dot(&gt) - eye(3))) < 1e-12);
        // all entries of g real (g in O(n))
        assert!(g.iter().all(|z| z.im.abs() < 1e-12));

        // M = diag(e^{i pi/2}, e^{i pi}) -> g with g g^T = M
        let m = cm(vec![
            vec![(0.0, 1.0), (0.0, 0.0)],
            vec![(0.0, 0.0), (-1.0, 0.0)],
        ]);
        let g = takagi_symmetric_unitary(&m, &Tolerances::DEFAULT).unwrap();
        let gt = g.t().to_owned();
        assert!(fro_norm(&(g.dot(&gt) - &m)) < 1e-12);
    }

    #[test]
    fn takagi_round_trip_random() {
        // 100 random M = u u^T from Haar u, n <= 4
        for k in 0..100u64 {
            let n = 1 + (k % 4) as usize;
            let u = haar_unitary(n, Seed(1234).child(k)).unwrap();
            let m = u.dot(&u.t().to_owned());
            let g = takagi_symmetric_unitary(&m, &Tolerances::DEFAULT).unwrap();
            let gt = g.t().to_owned();
            let res = fro_norm(&(g.dot(&gt) - &m));
            assert!(res < 1e-9, "n={} k={} residual={}", n, k, res);
        }
    }

    #[test]
    fn class_distance_examples() {
        let s = Spectrum::new(vec![0.1, 0.4, 0.9]);
        assert!(class_distance(&s, &s).unwrap() < 1e-15);
        // n=1: A = 1 vs target 1/2 -> |1 - e^{i pi}|^2 = 4
        let one = Spectrum::new(vec![0.0]);
        let half = Spectrum::new(vec![0.5]);
        assert!((class_distance(&one, &half).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn class_distance_rigid_rotation() {
        // Rotating every angle by 1/4 costs |1 - e^{i pi/2}|^2 = 2 per entry
        // along the order-preserving matching.  For n <= 2 every cyclic
        // matching gives exactly 2n, so the minimum is pinned; for larger n
        // the rotation-induced matching is only an upper bound (a rotated
        // near-uniform spectrum almost matches itself).
        for k in 0..10u64 {
            for n in [1usize, 2] {
                let a = haar_unitary(n, Seed(777).child(10 * k + n as u64)).unwrap();
                let s = spectrum(&a, &Tolerances::DEFAULT).unwrap();
                let mut rotated: Vec<f64> =
                    s.alpha.iter().map(|&x| (x + 0.25).rem_euclid(1.0)).collect();
                rotated.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let t = Spectrum::new(rotated);
                let d = class_distance(&s, &t).unwrap();
                assert!((d - 2.0 * n as f64).abs() < 1e-9, "n={} d={}", n, d);
            }
            for n in [3usize, 4] {
                let a = haar_unitary(n, Seed(778).child(10 * k + n as u64)).unwrap();
                let s = spectrum(&a, &Tolerances::DEFAULT).unwrap();
                let mut rotated: Vec<f64> =
                    s.alpha.iter().map(|&x| (x + 0.25).rem_euclid(1.0)).collect();
                rotated.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let t = Spectrum::new(rotated);
                let d = class_distance(&s, &t).unwrap();
                assert!(d <= 2.0 * n as f64 + 1e-9, "n={} d={}", n, d);
            }
        }
    }

    #[test]
    fn exp_skew_is_unitary() {
        let x = cm(vec![
            vec![(0.0, 0.3), (0.2, 0.1)],
            vec![(-0.2, 0.1), (0.0, -0.6)],
        ]);
        let e = exp_skew_hermitian(&x).unwrap();
        assert!(unitarity_defect(&e) < 1e-12);
    }

    #[test]
    fn svd_detects_rank() {
        // rank-1 complex 3x3
        let u = haar_unitary(3, Seed(5)).unwrap();
        let mut a = Array2::<C64>::zeros((3, 3));
        for i in 0..3 {
            for j in 0..3 {
                a[(i, j)] = u[(i, 0)] * u[(j, 1)].conj();
            }
        }
        let (sv, _) = svd_jacobi(&a);
        assert!(sv[0] > 0.9);
        assert!(sv[1] < 1e-13 && sv[2] < 1e-13);
        let (rank, ratio) = rank_by_gap(&sv, 1e4);
        assert_eq!(rank, 1);
        assert!(ratio > 1e4);
    }

    proptest! {
        #[test]
        fn eigh_reconstructs_hermitian(seed in 0u64..500) {
            let n = 2 + (seed % 4) as usize;
            let u = haar_unitary(n, Seed(31).child(seed)).unwrap();
            // hermitian with spread eigenvalues
            let mut h = Array2::<C64>::zeros((n, n));
            for j in 0..n {
                for i in 0..n {
                    for k in 0..n {
                        h[(i, k)] += u[(i, j)] * u[(k, j)].conj() * (j as f64 - 1.3);
                    }
                }
            }
            let (w, v) = eigh_complex(&h);
            let mut d = Array2::<C64>::zeros((n, n));
            for j in 0..n { d[(j,j)] = C64::new(w[j], 0.0); }
            let rec = v.dot(&d).dot(&adjoint(&v));
            prop_assert!(fro_norm(&(rec - &h)) < 1e-12 * (1.0 + fro_norm(&h)));
            prop_assert!(unitarity_defect(&v) < 1e-13);
        }

        #[test]
        fn unitary_eigen_reconstructs(seed in 0u64..200) {
            let n = 1 + (seed % 4) as usize;
            let a = haar_unitary(n, Seed(32).child(seed)).unwrap();
            let e = unitary_eigen(&a, &Tolerances::DEFAULT).unwrap();
            let mut d = Array2::<C64>::zeros((n, n));
            for j in 0..n { d[(j,j)] = C64::from_polar(1.0, TWO_PI * e.alpha[j]); }
            let rec = e.vectors.dot(&d).dot(&adjoint(&e.vectors));
            prop_assert!(fro_norm(&(rec - &a)) < 1e-10);
            // ascending in [0,1)
            for j in 0..n {
                prop_assert!(e.alpha[j] >= 0.0 && e.alpha[j] < 1.0);
                if j > 0 { prop_assert!(e.alpha[j] >= e.alpha[j-1]); }
            }
        }
    }
}
