//! JSON form of a QUBO: `{n, q: [[i, j, v], ...], b, offset}` where `q` lists
//! the non-zero upper-triangular entries (`i <= j`) of the symmetric matrix.

use serde::{Deserialize, Serialize};

use super::{QuboError, QuboProblem};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuboDump {
    pub n: usize,
    pub q: Vec<(usize, usize, f64)>,
    pub b: Vec<f64>,
    pub offset: f64,
}

impl QuboDump {
    pub fn from_problem<T: Real>(p: &QuboProblem<T>) -> Self {
        let n = p.n();
        let mut q = Vec::new();
        for i in 0..n {
            for j in i..n {
                let v = p.q()[(i, j)].as_f64();
                if v != 0.0 {
                    q.push((i, j, v));
                }
            }
        }
        Self { n, q, b: p.b().iter().map(|v| v.as_f64()).collect(), offset: p.offset().as_f64() }
    }

    pub fn to_problem<T: Real>(&self) -> Result<QuboProblem<T>, QuboError> {
        if self.b.len() != self.n {
            return Err(QuboError::Dump(format!("b has {} entries for n = {}", self.b.len(), self.n)));
        }
        let entries: Vec<(usize, usize, T)> = self.q.iter().map(|&(i, j, v)| (i, j, T::lit(v))).collect();
        QuboProblem::from_upper(self.n, &entries, self.b.iter().map(|&v| T::lit(v)).collect(), T::lit(self.offset))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("dump serialises")
    }

    pub fn from_json(s: &str) -> Result<Self, QuboError> {
        serde_json::from_str(s).map_err(|e| QuboError::Dump(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn json_round_trip(n in 1usize..7, seed in any::<u64>()) {
            let mut s = seed;
            let mut next = || {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
                ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            };
            let mut entries = Vec::new();
            for i in 0..n {
                for j in i..n {
                    entries.push((i, j, next()));
                }
            }
            let b = (0..n).map(|_| next()).collect();
            let p = QuboProblem::from_upper(n, &entries, b, next()).unwrap();
            let back: QuboProblem<f64> = QuboDump::from_json(&QuboDump::from_problem(&p).to_json()).unwrap().to_problem().unwrap();
            prop_assert_eq!(back, p);
        }
    }

    #[test]
    fn malformed_dump() {
        assert!(QuboDump::from_json("{\"n\": 2}").is_err());
        let d = QuboDump { n: 2, q: vec![], b: vec![0.0], offset: 0.0 };
        assert!(d.to_problem::<f64>().is_err());
    }
}
