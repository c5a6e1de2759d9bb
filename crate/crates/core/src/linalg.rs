// Small dense solves (4×4 Jacobians, block-diagram loop equations).

use std::ops::{Div, Mul, Sub};

use num_traits::Zero;

/// Solves `a · x = b` by Gaussian elimination with partial pivoting.
///
/// `mag` ranks pivot candidates. Returns `None` when a pivot magnitude falls
/// below `tiny`.
pub(crate) fn solve_dense<F, R>(
    mut a: Vec<Vec<F>>,
    mut b: Vec<F>,
    mag: impl Fn(&F) -> R,
    tiny: R,
) -> Option<Vec<F>>
where
    F: Copy + Zero + Sub<Output = F> + Mul<Output = F> + Div<Output = F>,
    R: PartialOrd + Copy,
{
    let n = b.len();
    debug_assert!(a.len() == n && a.iter().all(|row| row.len() == n));
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            mag(&a[i][col])
                .partial_cmp(&mag(&a[j][col]))
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
        if !(mag(&a[pivot][col]) > tiny) {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor.is_zero() {
                continue;
            }
            for k in col..n {
                let v = a[col][k];
                a[row][k] = a[row][k] - factor * v;
            }
            let v = b[col];
            b[row] = b[row] - factor * v;
        }
    }
    let mut x = vec![F::zero(); n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc = acc - a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}
