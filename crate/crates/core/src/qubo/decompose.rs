//! Variable selection and clamping used to cut a large QUBO down to a
//! fixed-size subproblem around a known good assignment.

use super::{QuboError, QuboProblem};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Exact energy change from flipping each variable of `z` on its own.
pub fn flip_deltas<T: Real>(p: &QuboProblem<T>, z: &[u8]) -> Vec<T> {
    let h = p.local_fields(z);
    h.iter()
        .enumerate()
        .map(|(i, &hi)| {
            let d = hi + p.q()[(i, i)];
            if z[i] == 0 {
                d
            } else {
                -d
            }
        })
        .collect()
}

/// The `k` variables whose single flip moves the energy the most.
///
/// Ties are broken toward the smaller index; the result is sorted ascending.
pub fn energy_impact_select<T: Real>(p: &QuboProblem<T>, z_star: &[u8], k: usize) -> Result<Vec<usize>, QuboError> {
    let n = p.n();
    if k > n {
        return Err(QuboError::TooMany { k, n });
    }
    super::energy(p, z_star)?;
    let impact: Vec<T> = flip_deltas(p, z_star).into_iter().map(|d| d.abs()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| impact[b].partial_cmp(&impact[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    let mut chosen = order[..k].to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

/// Restricts `p` to the variables in `index`, freezing every other variable
/// at its value in `z_star`.
///
/// Frozen couplings fold into the linear terms and the frozen block's own
/// energy becomes the offset, so for every sub-assignment `s`
/// `energy(sub, s) + sub.offset() == energy(p, merge(s, z_star))`.
pub fn clamp_subproblem<T: Real>(p: &QuboProblem<T>, z_star: &[u8], index: &[usize]) -> Result<QuboProblem<T>, QuboError> {
    let n = p.n();
    super::energy(p, z_star)?;
    let mut selected = vec![false; n];
    for &i in index {
        if i >= n || selected[i] {
            return Err(QuboError::BadIndex(i));
        }
        selected[i] = true;
    }
    let two = T::lit(2.0);
    let q = p.q();
    let sub_q = Matrix::from_fn(index.len(), index.len(), |a, b| q[(index[a], index[b])]);
    let sub_b = index
        .iter()
        .map(|&i| {
            let row = q.row(i);
            let folded = (0..n).filter(|&j| !selected[j] && z_star[j] != 0).fold(T::zero(), |acc, j| acc + row[j]);
            p.b()[i] + two * folded
        })
        .collect();
    let mut frozen = z_star.to_vec();
    for &i in index {
        frozen[i] = 0;
    }
    QuboProblem::new(sub_q, sub_b, p.energy_of(&frozen))
}
