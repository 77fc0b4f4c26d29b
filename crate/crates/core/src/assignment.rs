//! Minimum-cost perfect matching on square cost matrices (Hungarian method
//! with row/column potentials, O(n^3)).

use ndarray::ArrayView2;

use crate::error::{Error, Result};

/// Returns `assignment` with row `i` matched to column `assignment[i]`.
pub fn hungarian(cost: ArrayView2<f64>) -> Result<Vec<usize>> {
    let (n, m) = cost.dim();
    if n != m {
        return Err(Error::Dimension(format!(
            "assignment needs a square cost matrix, got {n}x{m}"
        )));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("assignment cost matrix".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    // 1-based arrays with a virtual column 0, as in the classic formulation.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[matched_row[j] - 1] = j - 1;
    }
    Ok(assignment)
}

/// `sum_i cost[i, assignment[i]]`, summed in row order.
pub fn assignment_cost(cost: ArrayView2<f64>, assignment: &[usize]) -> f64 {
    assignment.iter().enumerate().map(|(i, &j)| cost[[i, j]]).sum()
}
