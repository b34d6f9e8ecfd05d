//! JSON encodings of the domain types.
//!
//! Complex numbers serialize as [re, im] pairs and matrices as row-major
//! nested arrays.  Decoding validates every type invariant and reports the
//! first violation with a JSON-pointer-style path.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::deformation::Representation;
use crate::error::{Error, Result};
use crate::lagrangian::{Lagrangian, LagrangianTuple};
use crate::numerics::{C64, CMat, RMat, Tolerances};
use crate::spectra::SpectrumTuple;

pub type ComplexPair = [f64; 2];
pub type MatrixJson = Vec<Vec<ComplexPair>>;

pub fn encode_matrix(a: &CMat) -> MatrixJson {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| [a[(i, j)].re, a[(i, j)].im]).collect())
        .collect()
}

pub fn decode_matrix(m: &MatrixJson, n: usize, path: &str) -> Result<CMat> {
    if m.len() != n {
        return Err(Error::Decode {
            path: path.into(),
            message: format!("expected {} rows, found {}", n, m.len()),
        });
    }
    let mut out = Array2::<C64>::zeros((n, n));
    for (i, row) in m.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Decode {
                path: format!("{}/{}", path, i),
                message: format!("expected {} columns, found {}", n, row.len()),
            });
        }
        for (j, &[re, im]) in row.iter().enumerate() {
            if !re.is_finite() || !im.is_finite() {
                return Err(Error::Decode {
                    path: format!("{}/{}/{}", path, i, j),
                    message: "non-finite entry".into(),
                });
            }
            out[(i, j)] = C64::new(re, im);
        }
    }
    Ok(out)
}

pub fn encode_real_matrix(a: &RMat) -> Vec<Vec<f64>> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect())
        .collect()
}

pub fn decode_real_matrix(m: &[Vec<f64>], n: usize, path: &str) -> Result<RMat> {
    if m.len() != n {
        return Err(Error::Decode {
            path: path.into(),
            message: format!("expected {} rows, found {}", n, m.len()),
        });
    }
    let mut out = Array2::<f64>::zeros((n, n));
    for (i, row) in m.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Decode {
                path: format!("{}/{}", path, i),
                message: format!("expected {} columns, found {}", n, row.len()),
            });
        }
        for (j, &v) in row.iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// unitary matrices

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnitaryMatrixJson {
    pub n: usize,
    #[serde(rename = "A")]
    pub a: MatrixJson,
}

impl UnitaryMatrixJson {
    pub fn encode(a: &CMat) -> UnitaryMatrixJson {
        UnitaryMatrixJson {
            n: a.nrows(),
            a: encode_matrix(a),
        }
    }

    pub fn decode(&self, tol: &Tolerances) -> Result<CMat> {
        let a = decode_matrix(&self.a, self.n, "/A")?;
        crate::numerics::check_unitary(&a, tol.unitarity).map_err(|e| Error::Decode {
            path: "/A".into(),
            message: e.to_string(),
        })?;
        Ok(a)
    }
}

// ---------------------------------------------------------------------------
// Lagrangians

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LagrangianJson {
    pub n: usize,
    #[serde(rename = "M")]
    pub m: MatrixJson,
}

impl LagrangianJson {
    pub fn encode(l: &Lagrangian) -> LagrangianJson {
        LagrangianJson {
            n: l.n(),
            m: encode_matrix(l.matrix()),
        }
    }

    pub fn decode(&self, tol: &Tolerances, path: &str) -> Result<Lagrangian> {
        let m = decode_matrix(&self.m, self.n, &format!("{}/M", path))?;
        Lagrangian::new(m, tol).map_err(|e| Error::Decode {
            path: format!("{}/M", path),
            message: e.to_string(),
        })
    }
}

pub fn encode_tuple(t: &LagrangianTuple) -> Vec<LagrangianJson> {
    t.lagrangians.iter().map(LagrangianJson::encode).collect()
}

pub fn decode_tuple(items: &[LagrangianJson], tol: &Tolerances) -> Result<LagrangianTuple> {
    let mut ls = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        ls.push(item.decode(tol, &format!("/{}", i))?);
    }
    LagrangianTuple::new(ls)
}

// ---------------------------------------------------------------------------
// representations

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepresentationJson {
    pub ell: usize,
    pub n: usize,
    pub gammas: Vec<MatrixJson>,
}

impl RepresentationJson {
    pub fn encode(r: &Representation) -> RepresentationJson {
        RepresentationJson {
            ell: r.ell,
            n: r.n,
            gammas: r.gammas.iter().map(encode_matrix).collect(),
        }
    }

    pub fn decode(&self, tol: &Tolerances) -> Result<Representation> {
        if self.gammas.len() != self.ell {
            return Err(Error::Decode {
                path: "/gammas".into(),
                message: format!("expected {} factors, found {}", self.ell, self.gammas.len()),
            });
        }
        let mut gammas = Vec::with_capacity(self.ell);
        for (s, g) in self.gammas.iter().enumerate() {
            gammas.push(decode_matrix(g, self.n, &format!("/gammas/{}", s))?);
        }
        Representation::new(gammas, tol).map_err(|e| Error::Decode {
            path: "/gammas".into(),
            message: e.to_string(),
        })
    }
}

// ---------------------------------------------------------------------------
// spectrum tuples

pub fn decode_spectrum_tuple(v: &serde_json::Value) -> Result<SpectrumTuple> {
    let parsed: SpectrumTupleJson =
        serde_json::from_value(v.clone()).map_err(|e| Error::Decode {
            path: "/".into(),
            message: e.to_string(),
        })?;
    parsed.decode()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumTupleJson {
    pub ell: usize,
    pub n: usize,
    pub alpha: Vec<Vec<f64>>,
}

impl SpectrumTupleJson {
    pub fn encode(a: &SpectrumTuple) -> SpectrumTupleJson {
        SpectrumTupleJson {
            ell: a.ell,
            n: a.n,
            alpha: a.alpha.clone(),
        }
    }

    pub fn decode(&self) -> Result<SpectrumTuple> {
        if self.alpha.len() != self.ell {
            return Err(Error::Decode {
                path: "/alpha".into(),
                message: format!("expected {} rows, found {}", self.ell, self.alpha.len()),
            });
        }
        for (s, row) in self.alpha.iter().enumerate() {
            if row.len() != self.n {
                return Err(Error::Decode {
                    path: format!("/alpha/{}", s),
                    message: format!("expected {} entries, found {}", self.n, row.len()),
                });
            }
        }
        SpectrumTuple::new(self.alpha.clone()).map_err(|e| Error::Decode {
            path: "/alpha".into(),
            message: e.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrangian::random_tuple;
    use crate::numerics::Seed;
    use proptest::prelude::*;

    const TOL: Tolerances = Tolerances::DEFAULT;

    #[test]
    fn tuple_round_trip_byte_identical() {
        let t = random_tuple(3, 4, Seed(1300), &TOL).unwrap();
        let json = serde_json::to_string(&encode_tuple(&t)).unwrap();
        let items: Vec<LagrangianJson> = serde_json::from_str(&json).unwrap();
        let t2 = decode_tuple(&items, &TOL).unwrap();
        let json2 = serde_json::to_string(&encode_tuple(&t2)).unwrap();
        assert_eq!(json, json2);
    }

    #[test]
    fn decode_rejects_non_unitary_with_path() {
        let bad = UnitaryMatrixJson {
            n: 2,
            a: vec![
                vec![[1.001, 0.0], [0.0, 0.0]],
                vec![[0.0, 0.0], [1.0, 0.0]],
            ],
        };
        match bad.decode(&TOL) {
            Err(Error::Decode { path, message }) => {
                assert_eq!(path, "/A");
                assert!(message.contains("unitary"), "{}", message);
            }
            other => panic!("expected decode error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn decode_rejects_bad_shapes() {
        let bad = SpectrumTupleJson {
            ell: 3,
            n: 2,
            alpha: vec![vec![0.1, 0.2], vec![0.1]],
        };
        assert!(bad.decode().is_err());
    }

    proptest! {
        #[test]
        fn spectrum_tuple_round_trip(seed in 0u64..50) {
            let mut rng = Seed(seed).rng();
            use rand::Rng;
            let rows: Vec<Vec<f64>> = (0..3).map(|_| {
                let mut r: Vec<f64> = (0..3).map(|_| rng.gen::<f64>() * 0.999).collect();
                r.sort_by(|a, b| a.partial_cmp(b).unwrap());
                r
            }).collect();
            let a = SpectrumTuple::new(rows).unwrap();
            let json = serde_json::to_string(&SpectrumTupleJson::encode(&a)).unwrap();
            let back: SpectrumTupleJson = serde_json::from_str(&json).unwrap();
            let a2 = back.decode().unwrap();
            prop_assert_eq!(a, a2);
        }
    }
}
