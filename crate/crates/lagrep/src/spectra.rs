//! Combinatorics of eigenvalue data: canonical angle tuples, the index,
//! multiplicity strata, boundary collapse, relative indices and the
//! explicit bracket-inequality feasibility tables for U(2) and U(3)
//! with three factors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{circ_dist, cluster_angles};

/// An ell x n array of angles in [0,1), each row ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTuple {
    pub ell: usize,
    pub n: usize,
    pub alpha: Vec<Vec<f64>>,
}

impl SpectrumTuple {
    pub fn new(alpha: Vec<Vec<f64>>) -> Result<SpectrumTuple> {
        let ell = alpha.len();
        if ell == 0 {
            return Err(Error::InvalidArgument("SpectrumTuple: empty".into()));
        }
        let n = alpha[0].len();
        for (s, row) in alpha.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "SpectrumTuple row {}: length {} vs {}",
                    s,
                    row.len(),
                    n
                )));
            }
            for j in 0..n {
                if !(0.0..1.0).contains(&row[j]) {
                    return Err(Error::InvalidArgument(format!(
                        "SpectrumTuple row {} entry {}: {} outside [0,1)",
                        s, j, row[j]
                    )));
                }
                if j > 0 && row[j] < row[j - 1] {
                    return Err(Error::InvalidArgument(format!(
                        "SpectrumTuple row {}: not ascending",
                        s
                    )));
                }
            }
        }
        Ok(SpectrumTuple { ell, n, alpha })
    }

    pub fn zeros(ell: usize, n: usize) -> SpectrumTuple {
        SpectrumTuple {
            ell,
            n,
            alpha: vec![vec![0.0; n]; ell],
        }
    }
}

/// Per-row partitions of {1..n} into multiplicity clusters, plus the set z
/// of rows whose smallest distinct angle is 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplicityStructure {
    /// Breakpoints 0 = m_0 < ... < m_{l_s} = n per row.
    pub partitions: Vec<Vec<usize>>,
    /// Rows (0-based) with a zero cluster.
    pub z: Vec<usize>,
}

impl MultiplicityStructure {
    pub fn lengths(&self) -> Vec<usize> {
        self.partitions.iter().map(|p| p.len() - 1).collect()
    }

    /// Multiplicities per row: mu_j = m_j - m_{j-1}.
    pub fn multiplicities(&self) -> Vec<Vec<usize>> {
        self.partitions
            .iter()
            .map(|p| p.windows(2).map(|w| w[1] - w[0]).collect())
            .collect()
    }

    pub fn in_z(&self, s: usize) -> bool {
        self.z.contains(&s)
    }
}

/// A choice, per row, of a k-element subset of column indices (1-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSelection {
    pub k: usize,
    pub subsets: Vec<Vec<usize>>,
}

impl PartitionSelection {
    pub fn new(k: usize, subsets: Vec<Vec<usize>>) -> Result<PartitionSelection> {
        for (s, sub) in subsets.iter().enumerate() {
            if sub.len() != k {
                return Err(Error::InvalidArgument(format!(
                    "PartitionSelection row {}: size {} != k = {}",
                    s,
                    sub.len(),
                    k
                )));
            }
        }
        Ok(PartitionSelection { k, subsets })
    }

    /// The complementary selection (size n - k per row).
    pub fn complement(&self, n: usize) -> PartitionSelection {
        let subsets = self
            .subsets
            .iter()
            .map(|sub| (1..=n).filter(|i| !sub.contains(i)).collect())
            .collect();
        PartitionSelection {
            k: n - self.k,
            subsets,
        }
    }
}

/// The index: the plain double sum of all angles.
pub fn index(a: &SpectrumTuple) -> f64 {
    a.alpha.iter().flatten().sum()
}

/// Round the index to the nearest integer, failing if it is not within tol.
pub fn integer_index(a: &SpectrumTuple, tol: f64) -> Result<i64> {
    let i = index(a);
    let r = i.round();
    if (i - r).abs() > tol {
        return Err(Error::NonIntegerIndex { value: i, tol });
    }
    Ok(r as i64)
}

/// Canonicalize a raw angle matrix: sort each row and apply the boundary
/// equivalence sending trailing 1s to leading 0s.
pub fn normalize(raw: &[Vec<f64>]) -> Result<SpectrumTuple> {
    let mut alpha = Vec::with_capacity(raw.len());
    for (s, row) in raw.iter().enumerate() {
        for &x in row {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::InvalidArgument(format!(
                    "normalize: row {} entry {} outside [0,1]",
                    s, x
                )));
            }
        }
        let mut r = row.clone();
        r.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // entries equal to 1 wrap to leading zeros
        let ones = r.iter().filter(|&&x| x >= 1.0 - 1e-12).count();
        let keep = r.len() - ones;
        let mut out = vec![0.0; ones];
        out.extend_from_slice(&r[..keep]);
        alpha.push(out);
    }
    SpectrumTuple::new(alpha)
}

/// Cluster equal angles per row (circular tolerance) into a multiplicity
/// structure.  Angles circularly within tol of 0 are treated as the zero
/// cluster.
pub fn multiplicity_structure(a: &SpectrumTuple, tol: f64) -> MultiplicityStructure {
    let mut partitions = Vec::with_capacity(a.ell);
    let mut z = Vec::new();
    for (s, row) in a.alpha.iter().enumerate() {
        // wrap near-1 angles onto the zero cluster before clustering
        let mut r: Vec<f64> = row
            .iter()
            .map(|&x| if circ_dist(x, 0.0) < tol { 0.0 } else { x })
            .collect();
        r.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let ids = cluster_angles(&r, tol);
        let mut breaks = vec![0usize];
        for i in 1..r.len() {
            if ids[i] != ids[i - 1] {
                breaks.push(i);
            }
        }
        breaks.push(r.len());
        partitions.push(breaks);
        if circ_dist(r[0], 0.0) < tol {
            z.push(s);
        }
    }
    MultiplicityStructure { partitions, z }
}

/// Result of collapsing the top cluster of one row to the branch point.
#[derive(Debug, Clone, PartialEq)]
pub struct CollapseOutcome {
    pub tuple: SpectrumTuple,
    pub structure: MultiplicityStructure,
    /// Drop of the boundary index: n - m^{s0}_{l-1}, the size of the
    /// collapsed cluster.
    pub index_drop: usize,
}

/// Send the top cluster of row s0 to 1 and apply the boundary equivalence.
/// The new partition and z follow the two stratification cases depending on
/// whether row s0 already had a zero cluster.
pub fn collapse_top(
    a: &SpectrumTuple,
    m: &MultiplicityStructure,
    s0: usize,
) -> Result<CollapseOutcome> {
    if s0 >= a.ell {
        return Err(Error::InvalidArgument(format!(
            "collapse_top: row {} out of range (ell = {})",
            s0, a.ell
        )));
    }
    let breaks = &m.partitions[s0];
    let l = breaks.len() - 1;
    if l == 0 {
        return Err(Error::InvalidArgument("collapse_top: empty row".into()));
    }
    let top_size = a.n - breaks[l - 1];
    let mut alpha = a.alpha.clone();
    // top cluster -> 1 -> equivalence: becomes leading zeros
    let keep = breaks[l - 1];
    let mut row = vec![0.0; top_size];
    row.extend_from_slice(&alpha[s0][..keep]);
    alpha[s0] = row;
    let tuple = SpectrumTuple::new(alpha)?;

    let mut partitions = m.partitions.clone();
    let mut z = m.z.clone();
    if m.in_z(s0) {
        // zero cluster absorbs the collapsed one: l decreases
        let mut nb = Vec::with_capacity(l);
        nb.push(0);
        for i in 1..l {
            nb.push(breaks[i] + top_size);
        }
        // breaks[l-1] + top_size = n closes the partition
        debug_assert_eq!(*nb.last().unwrap(), a.n);
        partitions[s0] = nb;
    } else {
        // a new zero cluster appears in front: l stays, s0 joins z
        let mut nb = Vec::with_capacity(l + 1);
        nb.push(0);
        nb.push(top_size);
        for i in 1..l {
            nb.push(breaks[i] + top_size);
        }
        debug_assert_eq!(*nb.last().unwrap(), a.n);
        partitions[s0] = nb;
        z.push(s0);
        z.sort_unstable();
    }
    Ok(CollapseOutcome {
        tuple,
        structure: MultiplicityStructure { partitions, z },
        index_drop: top_size,
    })
}

/// Sum of the selected entries (1-based column indices per row).
pub fn relative_index(a: &SpectrumTuple, p: &PartitionSelection) -> Result<f64> {
    if p.subsets.len() != a.ell {
        return Err(Error::DimensionMismatch(format!(
            "relative_index: {} subsets for ell = {}",
            p.subsets.len(),
            a.ell
        )));
    }
    let mut total = 0.0;
    for (s, sub) in p.subsets.iter().enumerate() {
        for &j in sub {
            if j == 0 || j > a.n {
                return Err(Error::InvalidArgument(format!(
                    "relative_index: index {} out of 1..={}",
                    j, a.n
                )));
            }
            total += a.alpha[s][j - 1];
        }
    }
    Ok(total)
}

/// The bracket [i_1,...,i_ell]: one entry per row.
fn bracket_value(a: &SpectrumTuple, idx: &[usize]) -> f64 {
    idx.iter()
        .enumerate()
        .map(|(s, &i)| a.alpha[s][i - 1])
        .sum()
}

/// All distinct permutations of a small multiset.
fn distinct_permutations(base: &[usize]) -> Vec<Vec<usize>> {
    let mut items = base.to_vec();
    items.sort_unstable();
    let mut out = Vec::new();
    loop {
        out.push(items.clone());
        // next_permutation
        let n = items.len();
        let mut i = n as isize - 2;
        while i >= 0 && items[i as usize] >= items[i as usize + 1] {
            i -= 1;
        }
        if i < 0 {
            break;
        }
        let mut j = n - 1;
        while items[j] <= items[i as usize] {
            j -= 1;
        }
        items.swap(i as usize, j);
        items[i as usize + 1..].reverse();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Sense {
    Le,
    Ge,
}

/// One inequality family: bracket pattern, sense, and bound.
struct Family {
    pattern: &'static [usize],
    sense: Sense,
    bound: f64,
}

const SLACK: f64 = 1e-9;

fn check_families(a: &SpectrumTuple, families: &[Family]) -> (bool, Vec<String>) {
    let mut violated = Vec::new();
    for fam in families {
        for perm in distinct_permutations(fam.pattern) {
            let v = bracket_value(a, &perm);
            let bad = match fam.sense {
                Sense::Le => v > fam.bound + SLACK,
                Sense::Ge => v < fam.bound - SLACK,
            };
            if bad {
                let idx: Vec<String> = perm.iter().map(|i| i.to_string()).collect();
                let op = match fam.sense {
                    Sense::Le => "<=",
                    Sense::Ge => ">=",
                };
                violated.push(format!("[{}]{}{}", idx.join(","), op, fam.bound as i64));
            }
        }
    }
    (violated.is_empty(), violated)
}

/// Shared preconditions of the explicit wall tables: three factors, distinct
/// nonzero angles per row, integer index.
fn check_wall_preconditions(a: &SpectrumTuple, n: usize, tol: f64) -> Result<i64> {
    if a.ell != 3 || a.n != n {
        return Err(Error::DimensionMismatch(format!(
            "expected ell=3, n={}, got ell={}, n={}",
            n, a.ell, a.n
        )));
    }
    for (s, row) in a.alpha.iter().enumerate() {
        for j in 0..a.n {
            if circ_dist(row[j], 0.0) < tol {
                return Err(Error::Precondition(format!(
                    "row {} has a zero angle; the wall tables assume nonzero eigenvalues",
                    s
                )));
            }
            if j > 0 && circ_dist(row[j], row[j - 1]) < tol {
                return Err(Error::Precondition(format!(
                    "row {} has a multiplicity; the wall tables assume distinct eigenvalues",
                    s
                )));
            }
        }
    }
    integer_index(a, 1e-8)
}

/// Outcome of a feasibility predicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub feasible: bool,
    pub violated: Vec<String>,
    pub index: i64,
}

/// Bracket-inequality feasibility for three U(2) classes with distinct
/// nonzero angles.
pub fn feasible_u2(a: &SpectrumTuple, tol: f64) -> Result<Feasibility> {
    let idx = check_wall_preconditions(a, 2, tol)?;
    let families: &[Family] = match idx {
        2 => &[Family {
            pattern: &[2, 1, 1],
            sense: Sense::Le,
            bound: 1.0,
        }],
        3 => &[
            Family {
                pattern: &[2, 2, 1],
                sense: Sense::Le,
                bound: 2.0,
            },
            Family {
                pattern: &[2, 2, 2],
                sense: Sense::Ge,
                bound: 2.0,
            },
        ],
        4 => &[Family {
            pattern: &[2, 1, 1],
            sense: Sense::Le,
            bound: 2.0,
        }],
        _ => {
            return Ok(Feasibility {
                feasible: false,
                violated: vec!["index in {2,3,4}".into()],
                index: idx,
            })
        }
    };
    let (feasible, violated) = check_families(a, families);
    Ok(Feasibility {
        feasible,
        violated,
        index: idx,
    })
}

/// Bracket-inequality feasibility for three U(3) classes with distinct
/// nonzero angles.
pub fn feasible_u3(a: &SpectrumTuple, tol: f64) -> Result<Feasibility> {
    let idx = check_wall_preconditions(a, 3, tol)?;
    let families: &[Family] = match idx {
        3 => &[
            Family { pattern: &[3, 1, 1], sense: Sense::Le, bound: 1.0 },
            Family { pattern: &[2, 2, 1], sense: Sense::Le, bound: 1.0 },
            Family { pattern: &[3, 3, 1], sense: Sense::Ge, bound: 1.0 },
            Family { pattern: &[3, 2, 2], sense: Sense::Ge, bound: 1.0 },
            Family { pattern: &[3, 3, 2], sense: Sense::Ge, bound: 2.0 },
        ],
        4 => &[
            Family { pattern: &[2, 1, 1], sense: Sense::Le, bound: 1.0 },
            Family { pattern: &[3, 2, 1], sense: Sense::Ge, bound: 1.0 },
            Family { pattern: &[2, 2, 2], sense: Sense::Ge, bound: 1.0 },
            Family { pattern: &[3, 3, 1], sense: Sense::Le, bound: 2.0 },
            Family { pattern: &[3, 2, 2], sense: Sense::Le, bound: 2.0 },
            Family { pattern: &[3, 3, 3], sense: Sense::Ge, bound: 2.0 },
        ],
        5 => &[
            Family { pattern: &[1, 1, 1], sense: Sense::Le, bound: 1.0 },
            Family { pattern: &[2, 2, 1], sense: Sense::Ge, bound: 1.0 },
            Family { pattern: &[3, 1, 1], sense: Sense::Ge, bound: 1.0 },
            Family { pattern: &[3, 2, 1], sense: Sense::Le, bound: 2.0 },
            Family { pattern: &[2, 2, 2], sense: Sense::Le, bound: 2.0 },
            Family { pattern: &[3, 3, 2], sense: Sense::Ge, bound: 2.0 },
        ],
        6 => &[
            Family { pattern: &[2, 1, 1], sense: Sense::Ge, bound: 1.0 },
            Family { pattern: &[3, 1, 1], sense: Sense::Le, bound: 2.0 },
            Family { pattern: &[2, 2, 1], sense: Sense::Le, bound: 2.0 },
            Family { pattern: &[3, 3, 1], sense: Sense::Ge, bound: 2.0 },
            Family { pattern: &[3, 2, 2], sense: Sense::Ge, bound: 2.0 },
        ],
        _ => {
            return Ok(Feasibility {
                feasible: false,
                violated: vec!["index in {3,4,5,6}".into()],
                index: idx,
            })
        }
    };
    let (feasible, violated) = check_families(a, families);
    Ok(Feasibility {
        feasible,
        violated,
        index: idx,
    })
}

/// Wall distance: minimum |bracket - bound| over every inequality of the
/// index family, used to keep scan points away from walls.
pub fn wall_distance(a: &SpectrumTuple) -> Result<f64> {
    let idx = integer_index(a, 1e-8)?;
    let families: Vec<(&'static [usize], f64)> = match (a.n, idx) {
        (2, 2) => vec![(&[2, 1, 1], 1.0)],
        (2, 3) => vec![(&[2, 2, 1], 2.0), (&[2, 2, 2], 2.0)],
        (2, 4) => vec![(&[2, 1, 1], 2.0)],
        (3, 3) => vec![
            (&[3, 1, 1], 1.0),
            (&[2, 2, 1], 1.0),
            (&[3, 3, 1], 1.0),
            (&[3, 2, 2], 1.0),
            (&[3, 3, 2], 2.0),
        ],
        (3, 4) => vec![
            (&[2, 1, 1], 1.0),
            (&[3, 2, 1], 1.0),
            (&[2, 2, 2], 1.0),
            (&[3, 3, 1], 2.0),
            (&[3, 2, 2], 2.0),
            (&[3, 3, 3], 2.0),
        ],
        (3, 5) => vec![
            (&[1, 1, 1], 1.0),
            (&[2, 2, 1], 1.0),
            (&[3, 1, 1], 1.0),
            (&[3, 2, 1], 2.0),
            (&[2, 2, 2], 2.0),
            (&[3, 3, 2], 2.0),
        ],
        (3, 6) => vec![
            (&[2, 1, 1], 1.0),
            (&[3, 1, 1], 2.0),
            (&[2, 2, 1], 2.0),
            (&[3, 3, 1], 2.0),
            (&[3, 2, 2], 2.0),
        ],
        // indices outside the realizable range have no walls at all
        (2, _) | (3, _) => return Ok(f64::INFINITY),
        _ => {
            return Err(Error::InvalidArgument(format!(
                "wall_distance: no wall table for n={}",
                a.n
            )))
        }
    };
    let mut best = f64::INFINITY;
    for (pattern, bound) in families {
        for perm in distinct_permutations(pattern) {
            best = best.min((bracket_value(a, &perm) - bound).abs());
        }
    }
    Ok(best)
}

/// The two-sided index bound in terms of the trivial-summand count N0 and
/// the total zero-angle multiplicity N1.
pub fn index_bounds_ok(a: &SpectrumTuple, n0: usize, n1: usize) -> bool {
    let i = index(a);
    let n = a.n as f64;
    let ell = a.ell as f64;
    let lower = n - n0 as f64;
    let upper = n * (ell - 1.0) + n0 as f64 - n1 as f64;
    lower <= i + 1e-8 && i <= upper + 1e-8
}
